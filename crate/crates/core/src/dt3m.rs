//! First homology of 3-manifolds glued from a symplectic gluing matrix:
//! `H₁ ≅ Z^{2g} / ⟨J, φ J⟩` with `J` spanned by the first `g` basis vectors.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactmath::{lattice_quotient, omega, primes_up_to, rank_mod_p, FactorEffort, IntMatrix, Omega};
use crate::orbits::{
    generate_finite_image, reduce_mod, sample_walk, standard_symplectic_form, GroupPreset, OrbitError, WalkEnsemble,
};

#[derive(Debug, Error)]
pub enum Dt3mError {
    #[error("gluing matrix is not symplectic for genus {0}")]
    NotSymplectic(usize),
    #[error("gluing matrix must be {expected}x{expected}, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// Genus `g` and the action `φ_*` on `H₁` of the Heegaard surface.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeegaardDatum {
    genus: usize,
    phi: IntMatrix,
}

impl HeegaardDatum {
    pub fn new(genus: usize, phi: IntMatrix) -> Result<Self, Dt3mError> {
        let n = 2 * genus;
        if phi.rows() != n || phi.cols() != n {
            return Err(Dt3mError::Shape { expected: n, rows: phi.rows(), cols: phi.cols() });
        }
        let w = standard_symplectic_form(genus);
        if &(&phi.transpose() * &w) * &phi != w {
            return Err(Dt3mError::NotSymplectic(genus));
        }
        Ok(HeegaardDatum { genus, phi })
    }

    pub fn identity(genus: usize) -> Self {
        HeegaardDatum { genus, phi: IntMatrix::identity(2 * genus) }
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn phi(&self) -> &IntMatrix {
        &self.phi
    }

    /// The `2g x 2g` matrix with columns `e_1..e_g, φe_1..φe_g`.
    pub fn relation_matrix(&self) -> IntMatrix {
        let g = self.genus;
        let mut m = IntMatrix::zeros(2 * g, 2 * g);
        for j in 0..g {
            m.set(j, j, BigInt::one());
            for i in 0..2 * g {
                m.set(i, g + j, self.phi.get(i, j).clone());
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub free_rank: usize,
    /// Invariant factors greater than 1, in divisibility order.
    pub invariant_factors: Vec<BigInt>,
    /// Order of the torsion subgroup.
    pub torsion_order: BigInt,
    /// `|H₁|`, with 0 standing for an infinite group.
    pub order: BigInt,
}

impl HomologyResult {
    pub fn is_finite(&self) -> bool {
        self.free_rank == 0
    }

    /// `dim H₁ ⊗ F_p` from the invariant factors.
    pub fn dimension_mod(&self, p: u64) -> usize {
        self.free_rank + self.invariant_factors.iter().filter(|d| (*d % p).is_zero()).count()
    }
}

pub fn homology_group(datum: &HeegaardDatum) -> HomologyResult {
    let q = lattice_quotient(&datum.relation_matrix());
    let invariant_factors: Vec<BigInt> = q.invariant_factors.iter().filter(|d| !d.is_zero() && !d.is_one()).cloned().collect();
    let order = if q.free_rank == 0 { q.torsion_order.clone() } else { BigInt::zero() };
    HomologyResult { free_rank: q.free_rank, invariant_factors, torsion_order: q.torsion_order, order }
}

/// `dim_{F_p} H₁(M, F_p) = 2g - rank_p`.
pub fn homology_mod_p(datum: &HeegaardDatum, p: u64) -> usize {
    2 * datum.genus - rank_mod_p(&datum.relation_matrix(), p)
}

/// Whether `log|H₁| <= 2g log(2g max|φ_ij|)` when `H₁` is finite.
pub fn torsion_within_size_bound(datum: &HeegaardDatum, h: &HomologyResult) -> bool {
    if !h.is_finite() {
        return true;
    }
    let n = 2 * datum.genus;
    let max = datum.phi.max_abs_entry().to_f64().unwrap_or(f64::INFINITY).max(1.0);
    let log_order = big_log(&h.order);
    log_order <= n as f64 * (n as f64 * max).ln() + 1e-9
}

fn big_log(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        n.to_f64().map_or(f64::INFINITY, f64::ln)
    } else {
        let shift = bits - 64;
        (n >> shift).to_f64().map_or(f64::INFINITY, f64::ln) + shift as f64 * std::f64::consts::LN_2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaDensity {
    pub genus: usize,
    pub prime: u64,
    pub exact: bool,
    /// `|Ω_p| / |Sp_2g(F_p)|` when exact, the sample fraction otherwise.
    pub density: BigRational,
    pub omega_size: u64,
    pub sample_size: u64,
    /// 95% normal interval for Monte Carlo estimates.
    pub confidence_interval: Option<(f64, f64)>,
}

/// `⟨J_p, γJ_p⟩ ≠ F_p^{2g}`: the lower-left `g x g` block of `γ` is singular mod `p`.
fn lower_left_singular(entries: &[u32], g: usize, p: u64) -> bool {
    let n = 2 * g;
    let mut block = IntMatrix::zeros(g, g);
    for i in 0..g {
        for j in 0..g {
            block.set(i, j, BigInt::from(entries[(g + i) * n + j]));
        }
    }
    rank_mod_p(&block, p) < g
}

/// Density of `Ω_p` in `Sp_2g(F_p)`, by exhaustive enumeration when the group
/// has at most `cap` elements, else by `samples` long random walks mod `p`.
pub fn omega_density_exact(g: usize, p: u64, cap: usize, samples: usize, seed: u64) -> Result<OmegaDensity, Dt3mError> {
    let preset = GroupPreset::symplectic_transvections(g);
    match generate_finite_image(&preset, p, cap) {
        Ok(table) => {
            let count = (0..table.len())
                .into_par_iter()
                .filter(|&i| lower_left_singular(table.element(i).entries, g, p))
                .count() as u64;
            Ok(OmegaDensity {
                genus: g,
                prime: p,
                exact: true,
                density: BigRational::new(count.into(), table.len().into()),
                omega_size: count,
                sample_size: table.len() as u64,
                confidence_interval: None,
            })
        }
        Err(OrbitError::TooLarge { .. }) => {
            let gens: Vec<Vec<u32>> =
                preset.generators().iter().map(|m| reduce_mod(m, p).map(|r| r.entries)).collect::<Result<_, _>>()?;
            let n = 2 * g;
            let steps = 64 * n * n;
            let hits = (0..samples as u64)
                .into_par_iter()
                .filter(|&i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(crate::orbits::derive_sub_seed(seed, i));
                    let mut x: Vec<u32> = (0..n * n).map(|k| u32::from(k % (n + 1) == 0)).collect();
                    for _ in 0..steps {
                        let s = &gens[rng.gen_range(0..gens.len())];
                        x = mul_mod(&x, s, n, p);
                    }
                    lower_left_singular(&x, g, p)
                })
                .count() as u64;
            let phat = hits as f64 / samples.max(1) as f64;
            let half = 1.96 * (phat * (1.0 - phat) / samples.max(1) as f64).sqrt();
            Ok(OmegaDensity {
                genus: g,
                prime: p,
                exact: false,
                density: BigRational::new(hits.into(), samples.max(1).into()),
                omega_size: hits,
                sample_size: samples as u64,
                confidence_interval: Some(((phat - half).max(0.0), (phat + half).min(1.0))),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn mul_mod(a: &[u32], b: &[u32], n: usize, p: u64) -> Vec<u32> {
    let mut out = vec![0u32; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0u64;
            for k in 0..n {
                acc = (acc + a[i * n + k] as u64 * b[k * n + j] as u64) % p;
            }
            out[i * n + j] = acc as u32;
        }
    }
    out
}

/// One walk sample's homology, as written to the per-sample table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomologySample {
    pub k: usize,
    pub index: usize,
    pub finite: bool,
    /// 0 when infinite.
    pub torsion_order: BigInt,
    /// Ω of the order: `None` when infinite or when factorization gave up.
    pub omega_order: Option<u32>,
    /// Number of primes `p < z` dividing the order (all of them when infinite).
    pub small_prime_divisors: usize,
    pub within_size_bound: bool,
}

pub fn homology_sample(k: usize, index: usize, datum: &HeegaardDatum, z: u64, effort: &FactorEffort) -> HomologySample {
    let h = homology_group(datum);
    let small: Vec<u64> = primes_up_to(z.saturating_sub(1));
    let small_prime_divisors = small.iter().filter(|&&p| h.dimension_mod(p) > 0).count();
    let omega_order = match omega(&h.order, effort) {
        Ok(Omega::Finite(w)) => Some(w),
        _ => None,
    };
    HomologySample {
        k,
        index,
        finite: h.is_finite(),
        torsion_order: h.order.clone(),
        omega_order: if h.is_finite() { omega_order } else { None },
        small_prime_divisors,
        within_size_bound: torsion_within_size_bound(datum, &h),
    }
}

/// Homology of every sample of a symplectic walk ensemble.
pub fn ensemble_homology(ensemble: &WalkEnsemble, z: u64, effort: &FactorEffort) -> Result<Vec<HomologySample>, Dt3mError> {
    let n = ensemble.samples.first().map_or(0, IntMatrix::rows);
    ensemble
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, phi)| {
            let datum = HeegaardDatum::new(n / 2, phi.clone())?;
            Ok(homology_sample(ensemble.steps, i, &datum, z, effort))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomologySummary {
    pub k: usize,
    pub samples: usize,
    pub infinite: usize,
    pub infinite_fraction: f64,
    pub standard_error: f64,
    /// Fraction of finite samples with no prime divisor below `z`.
    pub no_small_part_fraction: f64,
}

pub fn summarize(k: usize, samples: &[HomologySample]) -> HomologySummary {
    let n = samples.len();
    let infinite = samples.iter().filter(|s| !s.finite).count();
    let frac = if n == 0 { 0.0 } else { infinite as f64 / n as f64 };
    let clean = samples.iter().filter(|s| s.finite && s.small_prime_divisors == 0).count();
    HomologySummary {
        k,
        samples: n,
        infinite,
        infinite_fraction: frac,
        standard_error: if n == 0 { 0.0 } else { (frac * (1.0 - frac) / n as f64).sqrt() },
        no_small_part_fraction: if n == 0 { 0.0 } else { clean as f64 / n as f64 },
    }
}

/// Walks of each length in `ks` on `preset`, with per-`k` seeds derived
/// from `seed`, summarized.
pub fn homology_profile(
    preset: &GroupPreset,
    ks: &[usize],
    samples: usize,
    seed: u64,
    z: u64,
    effort: &FactorEffort,
) -> Result<Vec<(HomologySummary, Vec<HomologySample>)>, Dt3mError> {
    ks.iter()
        .enumerate()
        .map(|(j, &k)| {
            let e = sample_walk(preset, k, samples, crate::orbits::derive_sub_seed(seed, j as u64));
            let s = ensemble_homology(&e, z, effort)?;
            Ok((summarize(k, &s), s))
        })
        .collect()
}

/// `|density - 1/p| · p²` for the exact genus-`g` densities, as a check of
/// the `1/p + O(1/p²)` size of `Ω_p`.
pub fn density_defect(d: &OmegaDensity) -> f64 {
    let p = d.prime as f64;
    (d.density.to_f64().unwrap_or(f64::NAN) - 1.0 / p).abs() * p * p
}
