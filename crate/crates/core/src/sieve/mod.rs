//! The sieve engine: measured sequences, congruence sums, Legendre sifting,
//! local densities and dimension fits, level-of-distribution bookkeeping,
//! large-sieve mass and almost-prime statistics.
//!
//! Every count and mass is an exact rational. Only slope fits, spectral
//! constants and standard errors are floating point.

mod density;
mod level;
mod omega;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apollonian::Packing;
use crate::exactmath::{is_prime_u64, is_squarefree_u64, ArithError};
use crate::orbits::{orbit_value, OrbitError, Polynomial, WalkEnsemble};

pub use density::{
    classical_oracle, dimension_estimate, large_sieve_mass, local_density, poly_local_densities, poly_root_count,
    ClassicalCheck, DimensionFit, LargeSieveMass, LocalDensity, RootCount,
};
pub use level::{level_ledger, sift_profile, LevelLedger, SiftPoint, SiftProfile};
pub use omega::{
    almost_prime_measure, almost_prime_table, concentration_from_counts, hardy_ramanujan, observe_omegas,
    prime_count_baseline, prime_divisor_concentration, AlmostPrimeReport, ConcentrationReport, HardyRamanujan,
    OmegaObservation, PrimeCountBaseline,
};

#[derive(Debug, Error)]
pub enum SieveError {
    #[error("modulus {0} must be a positive squarefree integer")]
    BadModulus(BigInt),
    #[error("weights must be non-negative (item {0})")]
    NegativeWeight(String),
    #[error("need at least {needed} primes for a dimension fit, got {got}")]
    TooFewPrimes { needed: usize, got: usize },
    #[error("polynomial must be univariate, got {0} variables")]
    NotUnivariate(usize),
    #[error("density for {0} is not a probability")]
    BadDensity(u64),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveItem {
    pub label: String,
    /// `|n(y)|`, always at least 1 for items of `Y⁺`.
    pub value: BigInt,
    pub weight: BigRational,
    #[serde(skip)]
    small: Option<u64>,
}

impl SieveItem {
    fn divisible_by_u64(&self, d: u64) -> bool {
        match self.small {
            Some(v) => v % d == 0,
            None => (&self.value % d).is_zero(),
        }
    }

    fn divisible_by(&self, d: &BigInt) -> bool {
        match (self.small, d.to_u64()) {
            (Some(v), Some(d)) => v % d == 0,
            _ => (&self.value % d).is_zero(),
        }
    }
}

/// A finite measured family `(y, n(y), weight)`. Items with `n(y) = 0` form
/// the zero set `Y⁰` and never enter congruence sums or sifted counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveSequence {
    items: Vec<SieveItem>,
    zero_set: Vec<(String, BigRational)>,
    total_mass: BigRational,
    zero_mass: BigRational,
    /// Common weight when every item of `Y⁺` has the same one.
    #[serde(skip)]
    uniform_weight: Option<BigRational>,
}

impl SieveSequence {
    pub fn new(entries: impl IntoIterator<Item = (String, BigInt, BigRational)>) -> Result<Self, SieveError> {
        let mut items = Vec::new();
        let mut zero_set = Vec::new();
        for (label, n, w) in entries {
            if w.is_negative() {
                return Err(SieveError::NegativeWeight(label));
            }
            if n.is_zero() {
                zero_set.push((label, w));
            } else {
                let value = n.abs();
                let small = value.to_u64();
                items.push(SieveItem { label, value, weight: w, small });
            }
        }
        let total_mass = items.iter().map(|i| &i.weight).sum();
        let zero_mass = zero_set.iter().map(|(_, w)| w).sum();
        let uniform_weight = match items.first() {
            Some(first) if items.iter().all(|i| i.weight == first.weight) => Some(first.weight.clone()),
            None => Some(BigRational::zero()),
            _ => None,
        };
        Ok(SieveSequence { items, zero_set, total_mass, zero_mass, uniform_weight })
    }

    /// Counting measure on `lo..=hi` with `n(y) = y`.
    pub fn from_range(lo: i64, hi: i64) -> Self {
        Self::from_integers((lo..=hi).map(BigInt::from))
    }

    /// Counting measure with `n(y)` the given integers.
    pub fn from_integers(values: impl IntoIterator<Item = BigInt>) -> Self {
        Self::new(values.into_iter().enumerate().map(|(i, v)| (i.to_string(), v, BigRational::one())))
            .expect("unit weights")
    }

    /// Counting measure on `1..=x` with `n(m) = f(m)`.
    pub fn from_polynomial(f: &Polynomial, x: u64) -> Result<Self, SieveError> {
        if f.nvars() != 1 {
            return Err(SieveError::NotUnivariate(f.nvars()));
        }
        let values: Result<Vec<BigInt>, OrbitError> =
            (1..=x).into_par_iter().map(|m| f.eval(&[BigInt::from(m)])).collect();
        Self::new(values?.into_iter().enumerate().map(|(i, v)| ((i + 1).to_string(), v, BigRational::one())))
    }

    /// The curvature multiset `𝒞(c)` of a packing, one item per circle.
    pub fn from_packing(packing: &Packing) -> Self {
        Self::from_integers(packing.curvatures().iter().cloned())
    }

    /// One item per walk sample with `n(γ) = f(γ · x0)`, each of weight `1/N`.
    pub fn from_walk(ensemble: &WalkEnsemble, x0: &[BigInt], f: &Polynomial) -> Result<Self, SieveError> {
        let values: Result<Vec<BigInt>, OrbitError> =
            ensemble.samples.par_iter().map(|g| orbit_value(g, x0, f)).collect();
        let w = BigRational::new(BigInt::one(), BigInt::from(ensemble.len().max(1)));
        Self::new(values?.into_iter().enumerate().map(|(i, v)| (i.to_string(), v, w.clone())))
    }

    pub fn items(&self) -> &[SieveItem] {
        &self.items
    }

    pub fn zero_set(&self) -> &[(String, BigRational)] {
        &self.zero_set
    }

    /// `S(ℱ)`, the mass of `Y⁺`.
    pub fn total_mass(&self) -> &BigRational {
        &self.total_mass
    }

    /// Mass of `Y⁰`.
    pub fn zero_mass(&self) -> &BigRational {
        &self.zero_mass
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn mass_where(&self, pred: impl Fn(&SieveItem) -> bool + Sync) -> BigRational {
        match &self.uniform_weight {
            Some(w) => {
                let count = self.items.par_iter().filter(|i| pred(i)).count();
                w * BigInt::from(count)
            }
            None => self
                .items
                .par_iter()
                .filter(|i| pred(i))
                .map(|i| i.weight.clone())
                .reduce(BigRational::zero, |a, b| a + b),
        }
    }
}

fn check_squarefree(d: &BigInt) -> Result<(), SieveError> {
    let ok = d.is_positive()
        && match d.to_u64() {
            Some(v) => is_squarefree_u64(v),
            None => crate::exactmath::moebius(d).map(|m| m != 0).unwrap_or(false),
        };
    if ok {
        Ok(())
    } else {
        Err(SieveError::BadModulus(d.clone()))
    }
}

/// `S_d(ℱ)`: the mass of items with `d | n(y)`.
pub fn congruence_sum(seq: &SieveSequence, d: &BigInt) -> Result<BigRational, SieveError> {
    check_squarefree(d)?;
    if d.is_one() {
        return Ok(seq.total_mass.clone());
    }
    Ok(match d.to_u64() {
        Some(du) => seq.mass_where(|i| i.divisible_by_u64(du)),
        None => seq.mass_where(|i| i.divisible_by(d)),
    })
}

/// Upper limit on the number of divisors of `P(z)` in inclusion–exclusion.
pub const DEFAULT_DIVISOR_BUDGET: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiftResult {
    pub z: u64,
    pub sieving_primes: Vec<u64>,
    /// `Σ_{d | P(z)} μ(d) S_d`, absent when the divisor budget was exceeded.
    pub inclusion_exclusion: Option<BigRational>,
    /// Mass of items with `gcd(n(y), P(z)) = 1`.
    pub direct: BigRational,
    pub budget_exceeded: bool,
}

impl SiftResult {
    pub fn value(&self) -> &BigRational {
        &self.direct
    }
}

/// `S(ℱ, z)` over the primes of `primes` below `z`, by inclusion–exclusion
/// over the divisors of `P(z)` and by a direct scan. The two must agree.
pub fn legendre_sift(seq: &SieveSequence, primes: &[u64], z: u64, divisor_budget: usize) -> SiftResult {
    let mut ps: Vec<u64> = primes.iter().copied().filter(|&p| p < z && is_prime_u64(p)).collect();
    ps.sort_unstable();
    ps.dedup();
    let p_z: BigInt = ps.iter().map(|&p| BigInt::from(p)).product();
    let direct = seq.mass_where(|i| match i.small {
        Some(v) => ps.iter().all(|&p| v % p != 0),
        None => i.value.gcd(&p_z).is_one(),
    });
    let budget_exceeded = ps.len() >= usize::BITS as usize || (1usize << ps.len()) > divisor_budget;
    let inclusion_exclusion = (!budget_exceeded).then(|| {
        let terms: Vec<BigRational> = (0..1usize << ps.len())
            .into_par_iter()
            .map(|mask| {
                let d: BigInt = ps.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &p)| BigInt::from(p)).product();
                let s = congruence_sum(seq, &d).expect("divisors of P(z) are squarefree");
                if mask.count_ones() % 2 == 1 {
                    -s
                } else {
                    s
                }
            })
            .collect();
        let ie: BigRational = terms.into_iter().sum();
        assert_eq!(ie, direct, "inclusion-exclusion disagrees with the direct scan");
        ie
    });
    SiftResult { z, sieving_primes: ps, inclusion_exclusion, direct, budget_exceeded }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmath::primes_up_to;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn congruence_sums_on_a_range() {
        let s = SieveSequence::from_range(1, 30);
        assert_eq!(congruence_sum(&s, &6.into()).unwrap(), r(5));
        assert_eq!(congruence_sum(&s, &1.into()).unwrap(), r(30));
        assert_eq!(congruence_sum(&s, &31.into()).unwrap(), r(0));
        assert!(congruence_sum(&s, &4.into()).is_err());
        assert!(congruence_sum(&s, &0.into()).is_err());
    }

    #[test]
    fn zero_set_is_kept_apart() {
        let s = SieveSequence::from_range(-2, 3);
        assert_eq!(s.len(), 5);
        assert_eq!(s.zero_set().len(), 1);
        assert_eq!(s.total_mass(), &r(5));
        assert_eq!(congruence_sum(&s, &2.into()).unwrap(), r(2));
        let sift = legendre_sift(&s, &primes_up_to(10), 10, DEFAULT_DIVISOR_BUDGET);
        assert_eq!(sift.direct, r(2));
    }

    #[test]
    fn legendre_examples() {
        let s = SieveSequence::from_range(1, 30);
        let all = primes_up_to(100);
        let six = legendre_sift(&s, &all, 6, DEFAULT_DIVISOR_BUDGET);
        assert_eq!(six.inclusion_exclusion, Some(r(8)));
        assert_eq!(six.sieving_primes, vec![2, 3, 5]);
        let two = legendre_sift(&s, &all, 2, DEFAULT_DIVISOR_BUDGET);
        assert_eq!(two.direct, r(30));

        // brute-force gcd scan
        let big = SieveSequence::from_range(1, 10_000);
        let sift = legendre_sift(&big, &all, 30, DEFAULT_DIVISOR_BUDGET);
        let brute = (1..=10_000u64).filter(|n| num_integer::gcd(*n, 6469693230) == 1).count();
        assert_eq!(sift.inclusion_exclusion, Some(r(brute as i64)));
    }

    #[test]
    fn budget_exhaustion_falls_back_to_direct() {
        let s = SieveSequence::from_range(1, 100);
        let sift = legendre_sift(&s, &primes_up_to(100), 100, 8);
        assert!(sift.budget_exceeded);
        assert!(sift.inclusion_exclusion.is_none());
        // 1 and the primes in 50..100 survive
        assert_eq!(sift.direct, r(1));
    }

    #[test]
    fn weighted_sequences() {
        let s = SieveSequence::new([
            ("a".to_string(), BigInt::from(6), BigRational::new(1.into(), 2.into())),
            ("b".to_string(), BigInt::from(-35), BigRational::new(1.into(), 3.into())),
            ("c".to_string(), BigInt::from(0), r(4)),
        ])
        .unwrap();
        assert_eq!(s.total_mass(), &BigRational::new(5.into(), 6.into()));
        assert_eq!(s.zero_mass(), &r(4));
        assert_eq!(congruence_sum(&s, &5.into()).unwrap(), BigRational::new(1.into(), 3.into()));
        let sift = legendre_sift(&s, &[2, 3], 5, DEFAULT_DIVISOR_BUDGET);
        assert_eq!(sift.inclusion_exclusion, Some(BigRational::new(1.into(), 3.into())));
        assert!(SieveSequence::new([("x".to_string(), BigInt::from(1), r(-1))]).is_err());
    }

    #[test]
    fn large_values_use_big_divisibility() {
        let p: BigInt = BigInt::from(u64::MAX) * 7 * 11;
        let s = SieveSequence::from_integers([p.clone(), p + 1]);
        assert_eq!(congruence_sum(&s, &77.into()).unwrap(), r(1));
        let sift = legendre_sift(&s, &[7, 11], 12, DEFAULT_DIVISOR_BUDGET);
        assert_eq!(sift.inclusion_exclusion, Some(sift.direct.clone()));
    }
}
