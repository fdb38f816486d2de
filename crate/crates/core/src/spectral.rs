//! Markov operators on finite Cayley graphs, mean-zero spectral radii,
//! exact equidistribution of walks, and product-set growth.

use std::borrow::Cow;
use std::collections::HashSet;

use nalgebra::DMatrix;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{generate_finite_image, FiniteGroupTable, GroupPreset, OrbitError};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
/// Largest group handled by the dense eigensolver.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("adjacency has {len} entries, expected {vertices} x {degree}")]
    Shape { len: usize, vertices: usize, degree: usize },
    #[error("neighbour {0} out of range")]
    BadVertex(usize),
    #[error("graph with {0} vertices exceeds the dense limit")]
    TooLargeForDense(usize),
    #[error("subset generates a subgroup of order {subgroup_size}, not the whole group of order {group_size}")]
    NotGenerating { subgroup_size: usize, group_size: usize },
    #[error("empty subset")]
    EmptySubset,
}

/// A Cayley graph in generator-action form: vertex `x` has the `degree`
/// neighbours `adj[x * degree + s]`, counted with multiplicity.
#[derive(Clone, Debug)]
pub struct CayleyGraph<'a> {
    vertices: usize,
    degree: usize,
    adj: Cow<'a, [u32]>,
    /// Number of steps `s` with `x * s = x`.
    loops: usize,
    modulus: u64,
}

impl<'a> CayleyGraph<'a> {
    pub fn from_table(table: &'a FiniteGroupTable) -> Self {
        let loops = (0..table.degree()).filter(|&s| table.step(0, s) == 0).count();
        CayleyGraph {
            vertices: table.len(),
            degree: table.degree(),
            adj: Cow::Borrowed(table.action_table()),
            loops,
            modulus: table.modulus(),
        }
    }

    /// Arbitrary regular graph; vertex 0 plays the identity when counting loops.
    pub fn from_adjacency(vertices: usize, degree: usize, adj: Vec<u32>) -> Result<CayleyGraph<'static>, SpectralError> {
        if adj.len() != vertices * degree {
            return Err(SpectralError::Shape { len: adj.len(), vertices, degree });
        }
        if let Some(&bad) = adj.iter().find(|&&y| y as usize >= vertices) {
            return Err(SpectralError::BadVertex(bad as usize));
        }
        let loops = if vertices == 0 { 0 } else { (0..degree).filter(|&s| adj[s] == 0).count() };
        Ok(CayleyGraph { vertices, degree, adj: Cow::Owned(adj), loops, modulus: 0 })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn neighbours(&self, x: usize) -> &[u32] {
        &self.adj[x * self.degree..(x + 1) * self.degree]
    }

    /// The same graph with vertex `x` renamed `perm[x]`.
    pub fn relabel(&self, perm: &[usize]) -> CayleyGraph<'static> {
        let mut adj = vec![0u32; self.adj.len()];
        for x in 0..self.vertices {
            for (s, &y) in self.neighbours(x).iter().enumerate() {
                adj[perm[x] * self.degree + s] = perm[y as usize] as u32;
            }
        }
        CayleyGraph { vertices: self.vertices, degree: self.degree, adj: Cow::Owned(adj), loops: self.loops, modulus: self.modulus }
    }

    /// Lower end of the possible spectrum, `-1 + 2 * loops / |S|`.
    pub fn lower_spectral_edge(&self) -> f64 {
        -1.0 + 2.0 * self.loops as f64 / self.degree as f64
    }
}

/// `(Mf)(x) = |S|^-1 Σ_s f(x s)`.
pub fn markov_apply(graph: &CayleyGraph<'_>, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), graph.vertices, "function must be defined on every vertex");
    let inv = 1.0 / graph.degree as f64;
    (0..graph.vertices).map(|x| graph.neighbours(x).iter().map(|&y| f[y as usize]).sum::<f64>() * inv).collect()
}

fn markov_apply_into(graph: &CayleyGraph<'_>, f: &[f64], out: &mut [f64]) {
    let inv = 1.0 / graph.degree as f64;
    for (x, o) in out.iter_mut().enumerate() {
        *o = graph.neighbours(x).iter().map(|&y| f[y as usize]).sum::<f64>() * inv;
    }
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub modulus: u64,
    pub group_size: usize,
    pub degree: usize,
    pub rho0: f64,
    /// `rho0` lies in `[bracket.0, bracket.1]`.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub tolerance: f64,
    pub residual: f64,
    pub converged: bool,
    /// Extremes of the Rayleigh quotients `v·Mv` seen during iteration.
    pub ritz_min: f64,
    pub ritz_max: f64,
    pub lower_edge: f64,
}

impl SpectralReport {
    /// All observed Ritz values lie in `[-1 + 2 loops/|S|, 1]` up to `eps`.
    pub fn spectrum_contained(&self, eps: f64) -> bool {
        self.ritz_min >= self.lower_edge - eps && self.ritz_max <= 1.0 + eps
    }
}

/// Spectral radius of `M` on mean-zero functions, by power iteration with
/// `M^2` and re-centering after every application. Stops once
/// `|M^2 v - θ v| <= tol` for the unit iterate `v`, with `θ = |Mv|^2`.
pub fn mean_zero_spectral_radius(graph: &CayleyGraph<'_>, tol: f64, maxiter: usize) -> SpectralReport {
    let n = graph.vertices;
    let mut report = SpectralReport {
        modulus: graph.modulus,
        group_size: n,
        degree: graph.degree,
        rho0: 0.0,
        bracket: (0.0, 0.0),
        iterations: 0,
        tolerance: tol,
        residual: 0.0,
        converged: true,
        ritz_min: 0.0,
        ritz_max: 0.0,
        lower_edge: graph.lower_spectral_edge(),
    };
    if n <= 1 {
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    center(&mut v);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let (mut ritz_min, mut ritz_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut theta = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < maxiter {
        iterations += 1;
        markov_apply_into(graph, &v, &mut w);
        center(&mut w);
        let r1 = dot(&v, &w);
        ritz_min = ritz_min.min(r1);
        ritz_max = ritz_max.max(r1);
        let wn2 = dot(&w, &w);
        markov_apply_into(graph, &w, &mut u);
        center(&mut u);
        if wn2 > 0.0 {
            let r2 = dot(&w, &u) / wn2;
            ritz_min = ritz_min.min(r2);
            ritz_max = ritz_max.max(r2);
        }
        theta = dot(&v, &u);
        residual = u.iter().zip(&v).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
        if residual <= tol {
            break;
        }
        let un = norm(&u);
        if un == 0.0 {
            break;
        }
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / un;
        }
    }
    let theta = theta.max(0.0);
    report.rho0 = theta.sqrt();
    report.bracket = ((theta - residual).max(0.0).sqrt(), (theta + residual).sqrt());
    report.iterations = iterations;
    report.residual = residual;
    report.converged = residual <= tol;
    report.ritz_min = ritz_min;
    report.ritz_max = ritz_max;
    report
}

/// The explicit `n x n` Markov matrix.
pub fn dense_operator(graph: &CayleyGraph<'_>) -> Result<DMatrix<f64>, SpectralError> {
    let n = graph.vertices;
    if n > DENSE_LIMIT {
        return Err(SpectralError::TooLargeForDense(n));
    }
    let inv = 1.0 / graph.degree as f64;
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        for &y in graph.neighbours(x) {
            m[(x, y as usize)] += inv;
        }
    }
    Ok(m)
}

/// Full spectrum of `M` (ascending) and the mean-zero spectral radius, from a
/// dense symmetric eigensolve of `P M P` with `P` the projection off constants.
pub fn dense_spectrum(graph: &CayleyGraph<'_>) -> Result<(Vec<f64>, f64), SpectralError> {
    let m = dense_operator(graph)?;
    let n = graph.vertices;
    if n <= 1 {
        return Ok((m.iter().copied().collect(), 0.0));
    }
    let mut spectrum: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    spectrum.sort_by(f64::total_cmp);
    let p = DMatrix::<f64>::identity(n, n) - DMatrix::<f64>::from_element(n, n, 1.0 / n as f64);
    let pmp = &p * m * &p;
    let pmp = (&pmp + pmp.transpose()) * 0.5;
    let rho = pmp.symmetric_eigenvalues().iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    Ok((spectrum, rho))
}

/// Uses the dense solver up to [`DENSE_LIMIT`] elements, power iteration above.
pub fn spectral_radius_auto(graph: &CayleyGraph<'_>, tol: f64, maxiter: usize) -> SpectralReport {
    let mut report = mean_zero_spectral_radius(graph, tol, maxiter);
    if let Ok((_, rho)) = dense_spectrum(graph) {
        report.rho0 = rho;
        report.bracket = (rho, rho);
        report.converged = true;
    }
    report
}

/// One row of the spectral table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub modulus: u64,
    pub group_size: usize,
    pub rho0: f64,
    pub diameter: u32,
    pub girth_lower_bound: Option<u32>,
}

impl SpectralRow {
    pub fn new(table: &FiniteGroupTable, report: &SpectralReport) -> Self {
        SpectralRow {
            modulus: table.modulus(),
            group_size: table.len(),
            rho0: report.rho0,
            diameter: table.diameter(),
            girth_lower_bound: table.girth_lower_bound(),
        }
    }
}

/// Number of length-`k` step words ending at each element, for `k = 0..=kmax`.
/// Row `k` sums to `|S|^k`.
pub fn exact_walk_counts(table: &FiniteGroupTable, kmax: usize) -> Vec<Vec<BigUint>> {
    let n = table.len();
    let mut rows = Vec::with_capacity(kmax + 1);
    let mut cur = vec![BigUint::zero(); n];
    cur[0] = BigUint::from(1u32);
    rows.push(cur.clone());
    for _ in 0..kmax {
        let mut next = vec![BigUint::zero(); n];
        for (x, c) in cur.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for s in 0..table.degree() {
                next[table.step(x, s)] += c;
            }
        }
        cur = next;
        rows.push(cur.clone());
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionPoint {
    pub k: usize,
    /// `max_α |μ_k(α) - 1/|Λ_d||`, exactly.
    #[serde(skip)]
    pub max_error_exact: BigRational,
    pub max_error: f64,
    /// `sqrt|Λ_d| · ρ^k`.
    pub bound: f64,
    pub holds: bool,
}

/// Exact `max_α |r_{d,k}(α)|` for `k = 0..=kmax` against `sqrt(n) ρ^k`, with
/// the comparison made exactly against the bound plus `slack`.
pub fn equidistribution_profile(table: &FiniteGroupTable, rho: f64, kmax: usize, slack: f64) -> Vec<EquidistributionPoint> {
    let n = table.len();
    let nb = BigInt::from(n);
    let sqrt_n = (n as f64).sqrt();
    let mut total = BigInt::from(1);
    let degree = BigInt::from(table.degree());
    exact_walk_counts(table, kmax)
        .into_iter()
        .enumerate()
        .map(|(k, counts)| {
            if k > 0 {
                total *= &degree;
            }
            // |count/S^k - 1/n| = |count·n - S^k| / (S^k · n)
            let num = counts
                .iter()
                .map(|c| (BigInt::from(c.clone()) * &nb - &total).magnitude().clone())
                .max()
                .unwrap_or_default();
            let exact = BigRational::new(BigInt::from(num), &total * &nb);
            let bound = sqrt_n * rho.powi(k as i32);
            let holds = BigRational::from_float(bound + slack).is_some_and(|b| exact <= b);
            EquidistributionPoint { k, max_error: exact.to_f64().unwrap_or(f64::NAN), max_error_exact: exact, bound, holds }
        })
        .collect()
}

/// Builds `Λ_d`, computes `ρ_d`, and returns the error at step `k`.
pub fn equidistribution_error(preset: &GroupPreset, d: u64, k: usize, cap: usize) -> Result<EquidistributionPoint, SpectralError> {
    let table = generate_finite_image(preset, d, cap)?;
    let graph = CayleyGraph::from_table(&table);
    let report = spectral_radius_auto(&graph, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS);
    Ok(equidistribution_profile(&table, report.rho0, k, 1e-9).pop().expect("k + 1 points"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub set_size: usize,
    pub triple_size: usize,
    /// `log|AAA| / log|A|`; absent when `|A| = 1`.
    pub exponent: Option<f64>,
}

fn product_set(table: &FiniteGroupTable, left: &HashSet<usize>, right: &[usize]) -> HashSet<usize> {
    let mut out = HashSet::new();
    for &a in left {
        for &b in right {
            out.insert(table.multiply(a, b));
        }
    }
    out
}

/// Size of the subgroup generated by `set`.
pub fn generated_subgroup_size(table: &FiniteGroupTable, set: &[usize]) -> usize {
    let mut seen: HashSet<usize> = HashSet::from([0]);
    let mut stack = vec![0usize];
    while let Some(x) = stack.pop() {
        for &a in set {
            let y = table.multiply(x, a);
            if seen.insert(y) {
                stack.push(y);
            }
        }
    }
    seen.len()
}

/// `|A|`, `|A·A·A|` and the growth exponent for a generating subset `A`.
pub fn triple_product_growth(table: &FiniteGroupTable, set: &[usize]) -> Result<GrowthReport, SpectralError> {
    let mut a: Vec<usize> = set.to_vec();
    a.sort_unstable();
    a.dedup();
    if a.is_empty() {
        return Err(SpectralError::EmptySubset);
    }
    let sub = generated_subgroup_size(table, &a);
    if sub != table.len() {
        return Err(SpectralError::NotGenerating { subgroup_size: sub, group_size: table.len() });
    }
    let a_set: HashSet<usize> = a.iter().copied().collect();
    let aa = product_set(table, &a_set, &a);
    let aaa = product_set(table, &aa, &a);
    let exponent = (a.len() > 1).then(|| (aaa.len() as f64).ln() / (a.len() as f64).ln());
    Ok(GrowthReport { set_size: a.len(), triple_size: aaa.len(), exponent })
}
