use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SieveError;
use crate::exactmath::{omega, primes_up_to, FactorEffort, IntMatrix, Omega};
use crate::orbits::{orbit_value, Polynomial, WalkEnsemble};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub primes: Vec<u64>,
    pub samples: usize,
    /// `Σ_p ν_p`.
    pub expected_count: f64,
    /// Mean over samples of `(#{p : y mod p ∈ Ω_p} - Σ ν_p)²`.
    pub mean_square: f64,
    /// `Σ_p ν_p (1 - ν_p)`, the variance if the events were independent.
    pub bernoulli_variance: f64,
    /// Standard error of `mean_square` under the independent model.
    pub standard_error: f64,
}

impl ConcentrationReport {
    /// `|mean_square - bernoulli_variance|` in standard errors.
    pub fn deviation_sigmas(&self) -> f64 {
        if self.standard_error == 0.0 {
            if self.mean_square == self.bernoulli_variance {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean_square - self.bernoulli_variance).abs() / self.standard_error
        }
    }
}

/// Mean-square deviation from per-sample hit counts.
pub fn concentration_from_counts(primes: Vec<u64>, counts: &[u32], densities: &[f64]) -> ConcentrationReport {
    let expected: f64 = densities.iter().sum();
    let var: f64 = densities.iter().map(|v| v * (1.0 - v)).sum();
    // fourth cumulant of a Bernoulli(ν) is ν(1-ν)(1-6ν(1-ν))
    let kappa4: f64 = densities.iter().map(|v| v * (1.0 - v) * (1.0 - 6.0 * v * (1.0 - v))).sum();
    let n = counts.len();
    let mean_square = if n == 0 {
        0.0
    } else {
        counts.iter().map(|&c| (c as f64 - expected).powi(2)).sum::<f64>() / n as f64
    };
    let standard_error = if n == 0 { 0.0 } else { ((kappa4 + 2.0 * var * var) / n as f64).max(0.0).sqrt() };
    ConcentrationReport { primes, samples: n, expected_count: expected, mean_square, bernoulli_variance: var, standard_error }
}

/// Concentration of `#{p < z : γ mod p ∈ Ω_p}` around its mean over a walk
/// ensemble. `in_omega(γ, p)` decides membership; `densities` holds `(p, ν_p)`.
pub fn prime_divisor_concentration<F>(ensemble: &WalkEnsemble, densities: &[(u64, BigRational)], in_omega: F) -> ConcentrationReport
where
    F: Fn(&IntMatrix, u64) -> bool + Sync,
{
    let primes: Vec<u64> = densities.iter().map(|d| d.0).collect();
    let nus: Vec<f64> = densities.iter().map(|d| d.1.to_f64().unwrap_or(f64::NAN)).collect();
    let counts: Vec<u32> =
        ensemble.samples.par_iter().map(|g| primes.iter().filter(|&&p| in_omega(g, p)).count() as u32).collect();
    concentration_from_counts(primes, &counts, &nus)
}

/// Ω of one orbit value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmegaObservation {
    /// `f(γ x0) = 0`, so Ω is infinite.
    Zero,
    Exact(u32),
    /// Factorization stopped; Ω is at least this.
    AtLeast(u32),
}

/// Ω(f(γ · x0)) for every sample, factorizations in parallel.
pub fn observe_omegas(
    ensemble: &WalkEnsemble,
    x0: &[BigInt],
    f: &Polynomial,
    effort: &FactorEffort,
) -> Result<Vec<OmegaObservation>, SieveError> {
    ensemble
        .samples
        .par_iter()
        .map(|g| {
            let v = orbit_value(g, x0, f)?;
            Ok(match omega(&v, effort) {
                Ok(Omega::Infinite) => OmegaObservation::Zero,
                Ok(Omega::Finite(k)) => OmegaObservation::Exact(k),
                Err(u) => OmegaObservation::AtLeast(u.omega_lower_bound()),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostPrimeReport {
    pub r: u32,
    pub samples: usize,
    /// Samples with `Ω <= r` proven.
    pub proven: usize,
    /// Unfactored samples whose known lower bound on Ω is still `<= r`.
    pub undecided: usize,
    pub zero: usize,
    /// `proven / N`: unfactored values counted as having large Ω.
    pub fraction_lower: f64,
    /// `(proven + undecided) / N`.
    pub fraction_upper: f64,
    pub zero_fraction: f64,
    /// Binomial standard error of `fraction_lower`.
    pub standard_error: f64,
}

/// Fraction of samples with `Ω(f(γ x0)) <= r`, bracketed by the unfactored ones.
pub fn almost_prime_measure(observations: &[OmegaObservation], r: u32) -> AlmostPrimeReport {
    let n = observations.len();
    let mut proven = 0;
    let mut undecided = 0;
    let mut zero = 0;
    for o in observations {
        match *o {
            OmegaObservation::Zero => zero += 1,
            OmegaObservation::Exact(k) if k <= r => proven += 1,
            OmegaObservation::AtLeast(k) if k <= r => undecided += 1,
            _ => {}
        }
    }
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let p = frac(proven);
    AlmostPrimeReport {
        r,
        samples: n,
        proven,
        undecided,
        zero,
        fraction_lower: p,
        fraction_upper: frac(proven + undecided),
        zero_fraction: frac(zero),
        standard_error: if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() },
    }
}

/// [`almost_prime_measure`] for each `r`.
pub fn almost_prime_table(observations: &[OmegaObservation], rs: &[u32]) -> Vec<AlmostPrimeReport> {
    rs.iter().map(|&r| almost_prime_measure(observations, r)).collect()
}

/// Ω(n) for `n <= x` from a smallest-prime-factor sieve; entry 0 unused.
fn big_omega_table(x: usize) -> Vec<u8> {
    let mut spf = vec![0u32; x + 1];
    for p in primes_up_to(x as u64) {
        let p = p as usize;
        let mut m = p;
        while m <= x {
            if spf[m] == 0 {
                spf[m] = p as u32;
            }
            m += p;
        }
    }
    let mut om = vec![0u8; x + 1];
    for n in 2..=x {
        om[n] = om[n / spf[n] as usize] + 1;
    }
    om
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyRamanujan {
    pub x: u64,
    /// `Σ_{n<=X} (Ω(n) - log log X)²`.
    pub sum_square_deviation: f64,
    /// The sum divided by `X log log X`.
    pub ratio: f64,
}

pub fn hardy_ramanujan(x: u64) -> HardyRamanujan {
    let om = big_omega_table(x as usize);
    let ll = (x as f64).ln().ln();
    let sum: f64 = om[1..].iter().map(|&k| (k as f64 - ll).powi(2)).sum();
    HardyRamanujan { x, sum_square_deviation: sum, ratio: sum / (x as f64 * ll) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeCountBaseline {
    pub x: u64,
    pub pi: u64,
    /// `X / log X`.
    pub approximation: f64,
    /// `|π(X) - X/log X| / π(X)`.
    pub relative_error: f64,
    /// `π(X) / (X / log X)`.
    pub ratio: f64,
}

pub fn prime_count_baseline(x: u64) -> PrimeCountBaseline {
    let pi = primes_up_to(x).len() as u64;
    let approximation = x as f64 / (x as f64).ln();
    PrimeCountBaseline {
        x,
        pi,
        approximation,
        relative_error: (pi as f64 - approximation).abs() / pi as f64,
        ratio: pi as f64 / approximation,
    }
}

#[cfg(test)]
mod tests {
    use num_traits::Zero;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::exactmath::factor_u64;
    use crate::orbits::{generate_finite_image, sample_walk, GroupPreset};

    #[test]
    fn omega_table_matches_factorization() {
        let om = big_omega_table(5000);
        for n in 1..=5000u64 {
            let k: u32 = factor_u64(n).iter().map(|f| f.1).sum();
            assert_eq!(om[n as usize] as u32, k);
        }
    }

    #[test]
    fn baselines_at_small_x() {
        assert_eq!(prime_count_baseline(100).pi, 25);
        let hr = hardy_ramanujan(1000);
        assert!(hr.ratio > 0.0 && hr.ratio.is_finite());
    }

    #[test]
    fn empty_prime_set_has_no_deviation() {
        let l = GroupPreset::lubotzky();
        let e = sample_walk(&l, 5, 50, 1);
        let rep = prime_divisor_concentration(&e, &[], |_, _| false);
        assert_eq!(rep.mean_square, 0.0);
        assert_eq!(rep.deviation_sigmas(), 0.0);
    }

    #[test]
    fn uniform_product_elements_match_the_bernoulli_model() {
        // CRT: a uniform element of Π SL_2(F_p) has independent uniform components
        let sl2 = GroupPreset::sl2_elementary();
        let primes = [2u64, 3, 5, 7, 11, 13];
        let tables: Vec<_> = primes.iter().map(|&p| generate_finite_image(&sl2, p, 1_000_000).unwrap()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 20_000;
        let counts: Vec<u32> = (0..n)
            .map(|_| {
                tables
                    .iter()
                    .filter(|t| {
                        let g = t.element(rng.gen_range(0..t.len()));
                        g.get(1, 0) == 0
                    })
                    .count() as u32
            })
            .collect();
        let nus: Vec<f64> = primes.iter().map(|&p| 1.0 / (p as f64 + 1.0)).collect();
        let rep = concentration_from_counts(primes.to_vec(), &counts, &nus);
        assert!(rep.deviation_sigmas() < 5.0, "{rep:?}");
    }

    #[test]
    fn walk_concentration_is_near_bernoulli() {
        let l = GroupPreset::lubotzky();
        let e = sample_walk(&l, 50, 2000, 11);
        let densities: Vec<(u64, BigRational)> = primes_up_to(29)
            .into_iter()
            .filter(|&p| p != 3)
            .map(|p| (p, BigRational::new(1.into(), (p + 1).into())))
            .collect();
        let rep = prime_divisor_concentration(&e, &densities, |g, p| (g.get(1, 0) % p).is_zero());
        let ratio = rep.mean_square / rep.bernoulli_variance;
        assert!((0.5..2.0).contains(&ratio), "{rep:?}");
    }

    #[test]
    fn almost_prime_trivial_polynomials() {
        let l = GroupPreset::lubotzky();
        let e = sample_walk(&l, 10, 30, 3);
        let x0 = [BigInt::from(1), BigInt::from(0)];
        let effort = FactorEffort::default();
        let one = observe_omegas(&e, &x0, &Polynomial::constant(2, 1), &effort).unwrap();
        assert_eq!(almost_prime_measure(&one, 0).fraction_lower, 1.0);
        let zero = observe_omegas(&e, &x0, &Polynomial::constant(2, 0), &effort).unwrap();
        let rep = almost_prime_measure(&zero, 100);
        assert_eq!(rep.zero_fraction, 1.0);
        assert_eq!(rep.fraction_upper, 0.0);
    }

    #[test]
    fn almost_prime_fraction_is_monotone_in_r() {
        let l = GroupPreset::lubotzky();
        let e = sample_walk(&l, 12, 500, 8);
        let x0 = [BigInt::from(1), BigInt::from(2)];
        let obs = observe_omegas(&e, &x0, &Polynomial::product_of_coordinates(2), &FactorEffort::default()).unwrap();
        let table = almost_prime_table(&obs, &(0..30).collect::<Vec<_>>());
        for w in table.windows(2) {
            assert!(w[0].fraction_lower <= w[1].fraction_lower);
            assert!(w[0].fraction_upper <= w[1].fraction_upper);
        }
        assert!(table.iter().all(|t| t.fraction_lower <= t.fraction_upper));
    }

    #[test]
    fn zero_set_fraction_shrinks_with_walk_length() {
        // f = second coordinate of γ (1, 0): the lower-left entry
        let l = GroupPreset::lubotzky();
        let f = Polynomial::coordinate(2, 1);
        let x0 = [BigInt::from(1), BigInt::from(0)];
        let n = 4000;
        let fractions: Vec<f64> = [2usize, 6, 12]
            .iter()
            .map(|&k| {
                let e = sample_walk(&l, k, n, 21);
                almost_prime_measure(&observe_omegas(&e, &x0, &f, &FactorEffort::default()).unwrap(), 0).zero_fraction
            })
            .collect();
        for w in fractions.windows(2) {
            let sigma = (w[0] * (1.0 - w[0]) / n as f64).sqrt() + (w[1] * (1.0 - w[1]) / n as f64).sqrt();
            assert!(w[1] <= w[0] + 3.0 * sigma, "{fractions:?}");
        }
        assert!(fractions[2] < fractions[0]);
    }
}
