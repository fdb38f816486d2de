use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::LocalDensity;
use super::{congruence_sum, legendre_sift, SieveSequence, DEFAULT_DIVISOR_BUDGET};

/// Remainders `r_d = S_d - g(d) S` below a cutoff, and the level constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelLedger {
    pub cutoff: u64,
    /// `(d, |r_d|)` for every squarefree `d < D` composed of listed primes.
    pub remainders: Vec<(u64, BigRational)>,
    /// `R(D) = Σ_{d<D} |r_d|`.
    pub aggregate: BigRational,
    /// `R(D) / S(ℱ)`.
    pub relative_aggregate: f64,
    /// `sup_p log|Ω_p| / log p`.
    pub delta: f64,
    /// `sup_p log|Y_p| / log p`.
    pub delta1: f64,
    pub rho: Option<f64>,
    /// `ρ^{-1/(1 + Δ + Δ₁/2)}`; any `1 < β` below it gives level `β^k`.
    pub beta_bound: Option<f64>,
    /// Geometric midpoint of `(1, beta_bound)`.
    pub beta_candidate: Option<f64>,
}

/// Builds the ledger for `seq` with `g(p)` taken from `densities`.
pub fn level_ledger(seq: &SieveSequence, densities: &[LocalDensity], cutoff: u64, rho: Option<f64>) -> LevelLedger {
    let by_prime: BTreeMap<u64, &LocalDensity> = densities.iter().map(|d| (d.prime, d)).collect();
    // squarefree d < D with their g(d), depth first over increasing primes
    let primes: Vec<(u64, &BigRational)> = by_prime.iter().map(|(&p, d)| (p, &d.density)).collect();
    let mut moduli: Vec<(u64, BigRational)> = Vec::new();
    let mut stack: Vec<(usize, u64, BigRational)> = vec![(0, 1, BigRational::one())];
    while let Some((start, d, g)) = stack.pop() {
        if d >= cutoff {
            continue;
        }
        for (j, &(p, gp)) in primes.iter().enumerate().skip(start) {
            match d.checked_mul(p) {
                Some(dp) if dp < cutoff => stack.push((j + 1, dp, &g * gp)),
                _ => break,
            }
        }
        moduli.push((d, g));
    }
    moduli.sort_by_key(|m| m.0);
    let total = seq.total_mass().clone();
    let remainders: Vec<(u64, BigRational)> = moduli
        .into_par_iter()
        .map(|(d, g)| {
            let s = congruence_sum(seq, &BigInt::from(d)).expect("squarefree by construction");
            (d, (s - g * &total).abs())
        })
        .collect();
    let aggregate: BigRational = remainders.iter().map(|r| &r.1).sum();
    let relative_aggregate = if total.is_zero() { 0.0 } else { (&aggregate / &total).to_f64().unwrap_or(f64::NAN) };
    let exponent = |size: u64, p: u64| if size <= 1 { 0.0 } else { (size as f64).ln() / (p as f64).ln() };
    let delta = densities.iter().map(|d| exponent(d.omega_size, d.prime)).fold(0.0, f64::max);
    let delta1 = densities.iter().map(|d| exponent(d.group_size, d.prime)).fold(0.0, f64::max);
    let beta_bound = rho.filter(|&r| r > 0.0 && r < 1.0).map(|r| r.powf(-1.0 / (1.0 + delta + delta1 / 2.0)));
    LevelLedger {
        cutoff,
        remainders,
        aggregate,
        relative_aggregate,
        delta,
        delta1,
        rho,
        beta_bound,
        beta_candidate: beta_bound.map(f64::sqrt),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiftPoint {
    pub z: u64,
    pub sifted: BigRational,
    /// `S(ℱ, z) / S(ℱ) · (log z)^κ`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiftProfile {
    pub kappa: f64,
    pub points: Vec<SiftPoint>,
    /// Smallest and largest normalized value: the fitted constants of the
    /// two-sided estimate `S(ℱ, z) ≍ S(ℱ) / (log z)^κ` over this range.
    pub bracket: (f64, f64),
}

/// Sifted mass at each `z`, normalized by `(log z)^κ / S(ℱ)`.
pub fn sift_profile(seq: &SieveSequence, primes: &[u64], zs: &[u64], kappa: f64) -> SiftProfile {
    let total = seq.total_mass().to_f64().unwrap_or(f64::NAN);
    let points: Vec<SiftPoint> = zs
        .iter()
        .map(|&z| {
            let sifted = legendre_sift(seq, primes, z, DEFAULT_DIVISOR_BUDGET).direct;
            let normalized = sifted.to_f64().unwrap_or(f64::NAN) / total * (z as f64).ln().powf(kappa);
            SiftPoint { z, sifted, normalized }
        })
        .collect();
    let bracket = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.normalized), hi.max(p.normalized)));
    SiftProfile { kappa, points, bracket }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmath::primes_up_to;

    #[test]
    fn ledger_for_the_integers() {
        // counting measure on 1..=X: r_d = floor(X/d) - X/d, so |r_d| < 1
        let seq = SieveSequence::from_range(1, 1000);
        let ds: Vec<LocalDensity> = primes_up_to(50).into_iter().map(|p| LocalDensity::uniform(p, 1, p).unwrap()).collect();
        let ledger = level_ledger(&seq, &ds, 50, None);
        assert_eq!(ledger.remainders[0], (1, BigRational::zero()));
        for (d, r) in &ledger.remainders {
            let exact = BigRational::new(BigInt::from(1000 % d), BigInt::from(*d));
            assert_eq!(r, &exact, "d = {d}");
        }
        let sum: BigRational = ledger.remainders.iter().map(|r| r.1.clone()).sum();
        assert_eq!(ledger.aggregate, sum);
        assert_eq!(ledger.delta, 0.0);
        assert!((ledger.delta1 - 1.0).abs() < 1e-12);
        assert!(ledger.beta_bound.is_none());
        // 30 squarefree d below 50
        assert_eq!(ledger.remainders.len(), (1..50u64).filter(|&d| crate::exactmath::is_squarefree_u64(d)).count());
    }

    #[test]
    fn beta_bound_from_rho() {
        let seq = SieveSequence::from_range(1, 10);
        let ds = [LocalDensity::uniform(5, 20, 120).unwrap()];
        let l = level_ledger(&seq, &ds, 6, Some(0.8472));
        let (delta, delta1) = (20f64.ln() / 5f64.ln(), 120f64.ln() / 5f64.ln());
        let expected = 0.8472f64.powf(-1.0 / (1.0 + delta + delta1 / 2.0));
        assert!((l.beta_bound.unwrap() - expected).abs() < 1e-12);
        let b = l.beta_candidate.unwrap();
        assert!(1.0 < b && b < expected);
    }

    #[test]
    fn sift_profile_brackets_are_ordered() {
        let seq = SieveSequence::from_range(1, 20_000);
        let prof = sift_profile(&seq, &primes_up_to(200), &[5, 10, 20, 50, 100], 1.0);
        assert!(prof.points.windows(2).all(|w| w[1].sifted <= w[0].sifted));
        assert!(prof.bracket.0 <= prof.bracket.1);
        assert!(prof.bracket.0 > 0.0);
    }
}
