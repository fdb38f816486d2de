use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{congruence_sum, SieveError, SieveSequence};
use crate::exactmath::{is_prime_u64, is_squarefree_u64, prime_divisors_u64, primes_up_to};
use crate::orbits::{FiniteGroupTable, ModMatrixView, Polynomial};

/// `ν_p(Ω_p)` for the uniform measure on a finite set `Y_p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalDensity {
    pub prime: u64,
    pub omega_size: u64,
    pub group_size: u64,
    pub density: BigRational,
}

impl LocalDensity {
    pub fn uniform(prime: u64, omega_size: u64, group_size: u64) -> Result<Self, SieveError> {
        if group_size == 0 || omega_size > group_size {
            return Err(SieveError::BadDensity(prime));
        }
        let density = BigRational::new(omega_size.into(), group_size.into());
        Ok(LocalDensity { prime, omega_size, group_size, density })
    }

    pub fn density_f64(&self) -> f64 {
        self.density.to_f64().unwrap_or(f64::NAN)
    }
}

/// Exact `|Ω_p|` and density over the elements of `table`.
pub fn local_density<F>(table: &FiniteGroupTable, predicate: F) -> LocalDensity
where
    F: Fn(ModMatrixView<'_>) -> bool + Sync,
{
    let count = (0..table.len()).into_par_iter().filter(|&i| predicate(table.element(i))).count();
    LocalDensity::uniform(table.modulus(), count as u64, table.len() as u64).expect("count within group")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub kappa: f64,
    pub intercept: f64,
    /// Root-mean-square and largest absolute residual of the fit.
    pub rms_residual: f64,
    pub max_residual: f64,
    pub primes_used: usize,
    pub largest_prime: u64,
}

pub const MIN_FIT_PRIMES: usize = 5;

/// Least-squares slope of `Σ_{q<=p} g(q) log q` against `log p`, one point
/// per prime in the list.
pub fn dimension_estimate(densities: &[LocalDensity]) -> Result<DimensionFit, SieveError> {
    let mut ds: Vec<&LocalDensity> = densities.iter().collect();
    ds.sort_by_key(|d| d.prime);
    if ds.len() < MIN_FIT_PRIMES {
        return Err(SieveError::TooFewPrimes { needed: MIN_FIT_PRIMES, got: ds.len() });
    }
    let mut partial = 0.0;
    let points: Vec<(f64, f64)> = ds
        .iter()
        .map(|d| {
            let lp = (d.prime as f64).ln();
            partial += d.density_f64() * lp;
            (lp, partial)
        })
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let kappa = sxy / sxx;
    let intercept = my - kappa * mx;
    let residuals: Vec<f64> = points.iter().map(|p| p.1 - intercept - kappa * p.0).collect();
    Ok(DimensionFit {
        kappa,
        intercept,
        rms_residual: (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt(),
        max_residual: residuals.iter().fold(0.0f64, |a, r| a.max(r.abs())),
        primes_used: ds.len(),
        largest_prime: ds.last().map_or(0, |d| d.prime),
    })
}

fn univariate_coefficients(f: &Polynomial) -> Result<Vec<BigInt>, SieveError> {
    if f.nvars() != 1 {
        return Err(SieveError::NotUnivariate(f.nvars()));
    }
    let mut coeffs = vec![BigInt::zero(); f.degree() as usize + 1];
    for (e, c) in f.terms() {
        coeffs[e[0] as usize] += c;
    }
    Ok(coeffs)
}

fn roots_mod_prime(coeffs: &[BigInt], p: u64) -> u64 {
    let pb = BigInt::from(p);
    let c: Vec<u128> = coeffs.iter().map(|c| c.mod_floor(&pb).to_u64().expect("residue") as u128).collect();
    let p = p as u128;
    (0..p)
        .filter(|&t| c.iter().rev().fold(0u128, |acc, &a| (acc * t + a) % p) == 0)
        .count() as u64
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCount {
    pub modulus: u64,
    /// `ρ_f(d)`, the number of residues `t mod d` with `f(t) ≡ 0`.
    pub count: u64,
    /// Primes `p | d` where `f` vanishes at every residue.
    pub vanishing_primes: Vec<u64>,
}

/// `ρ_f(d)` for squarefree `d`, multiplicative over the primes of `d`.
pub fn poly_root_count(f: &Polynomial, d: u64) -> Result<RootCount, SieveError> {
    if d == 0 || !is_squarefree_u64(d) {
        return Err(SieveError::BadModulus(d.into()));
    }
    let coeffs = univariate_coefficients(f)?;
    let mut count = 1u64;
    let mut vanishing_primes = Vec::new();
    for p in prime_divisors_u64(d) {
        let r = roots_mod_prime(&coeffs, p);
        if r == p {
            vanishing_primes.push(p);
        }
        count *= r;
    }
    Ok(RootCount { modulus: d, count, vanishing_primes })
}

/// `g(p) = ρ_f(p)/p` for every prime `p <= x`.
pub fn poly_local_densities(f: &Polynomial, x: u64) -> Result<Vec<LocalDensity>, SieveError> {
    let coeffs = univariate_coefficients(f)?;
    Ok(primes_up_to(x)
        .into_par_iter()
        .map(|p| LocalDensity::uniform(p, roots_mod_prime(&coeffs, p), p).expect("root count at most p"))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCheck {
    pub modulus: u64,
    pub x: u64,
    pub congruence_sum: BigRational,
    pub main_term: BigRational,
    pub roots: u64,
    /// `|S_d - ρ_f(d) X / d| <= ρ_f(d)`.
    pub holds: bool,
}

/// Compares `S_d(ℱ_{f,X})` with its main term `ρ_f(d) X / d`. `seq` must be
/// [`SieveSequence::from_polynomial`] for the same `f` and `X`.
pub fn classical_oracle(seq: &SieveSequence, f: &Polynomial, x: u64, d: u64) -> Result<ClassicalCheck, SieveError> {
    let roots = poly_root_count(f, d)?.count;
    let s = congruence_sum(seq, &BigInt::from(d))?;
    let main_term = BigRational::new(BigInt::from(roots) * x, d.into());
    let holds = (&s - &main_term).abs() <= BigRational::from_integer(roots.into());
    Ok(ClassicalCheck { modulus: d, x, congruence_sum: s, main_term, roots, holds })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeSieveMass {
    pub z: u64,
    /// `H`; absent when some `ν_p = 1`, which empties the sifted set.
    pub h: Option<BigRational>,
    pub full_primes: Vec<u64>,
    pub terms: usize,
}

impl LargeSieveMass {
    /// The bound `mass / H` on the sifted measure.
    pub fn sifted_bound(&self, mass: &BigRational) -> BigRational {
        match &self.h {
            Some(h) => mass / h,
            None => BigRational::zero(),
        }
    }
}

/// `H = Σ_{d<z} μ(d)² Π_{p|d} ν_p/(1-ν_p)` over `d` built from the listed primes.
pub fn large_sieve_mass(densities: &[LocalDensity], z: u64) -> LargeSieveMass {
    let mut ds: Vec<&LocalDensity> = densities.iter().filter(|d| d.prime < z && is_prime_u64(d.prime)).collect();
    ds.sort_by_key(|d| d.prime);
    ds.dedup_by_key(|d| d.prime);
    let full_primes: Vec<u64> = ds.iter().filter(|d| d.density.is_one()).map(|d| d.prime).collect();
    if !full_primes.is_empty() {
        return LargeSieveMass { z, h: None, full_primes, terms: 0 };
    }
    let ratios: Vec<(u64, BigRational)> =
        ds.iter().map(|d| (d.prime, &d.density / (BigRational::one() - &d.density))).collect();
    // depth-first over squarefree products below z
    let mut h = BigRational::zero();
    let mut terms = 0usize;
    let mut stack: Vec<(usize, u64, BigRational)> = vec![(0, 1, BigRational::one())];
    while let Some((start, d, w)) = stack.pop() {
        if d >= z {
            continue;
        }
        h += &w;
        terms += 1;
        for (j, (p, r)) in ratios.iter().enumerate().skip(start) {
            match d.checked_mul(*p) {
                Some(dp) if dp < z => stack.push((j + 1, dp, &w * r)),
                _ => break,
            }
        }
    }
    LargeSieveMass { z, h: Some(h), full_primes, terms }
}
