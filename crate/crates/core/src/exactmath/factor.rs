//! Integer factorization and the arithmetic functions built on it.
//!
//! Strategy: trial division by the primes below a configurable bound
//! (default 10^6), then Pollard-Brent rho on composite cofactors. Primes
//! below 3.3e24 are certified by deterministic Miller-Rabin; larger probable
//! primes get a Pocklington certificate when the factored part of `n - 1`
//! is large enough, and are flagged as uncertified otherwise.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::ArithError;

const MR_BASES: [u64; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// Miller-Rabin with the first 13 prime bases is exact below this value
/// (Sorenson and Webster).
const MR_DETERMINISTIC_LIMIT: u128 = 3_317_044_064_679_887_385_961_981;

const DEFAULT_TRIAL_BOUND: u64 = 1_000_000;

/// Effort limits for [`factorize`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorEffort {
    /// Primes up to this bound are removed by trial division.
    pub trial_bound: u64,
    /// Composite cofactors wider than this many bits are left unfactored.
    pub max_cofactor_bits: u64,
    /// Iteration budget for each Pollard-Brent attempt.
    pub rho_iterations: u64,
    /// Number of polynomial constants tried before giving up on a cofactor.
    pub rho_attempts: u32,
}

impl Default for FactorEffort {
    fn default() -> Self {
        Self {
            trial_bound: DEFAULT_TRIAL_BOUND,
            max_cofactor_bits: 128,
            rho_iterations: 1 << 22,
            rho_attempts: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Primality {
    Composite,
    /// Proven prime (deterministic test or certificate).
    Prime,
    /// Passed strong probable-prime tests but no certificate was found.
    ProbablePrime,
}

impl Primality {
    pub fn is_prime(self) -> bool {
        !matches!(self, Primality::Composite)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimePower {
    pub prime: BigInt,
    pub exponent: u32,
    pub certified: bool,
}

/// `sign * prod(prime^exponent)`, primes strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub sign: i8,
    pub factors: Vec<PrimePower>,
}

impl Factorization {
    fn unit(sign: i8) -> Self {
        Self { sign, factors: Vec::new() }
    }

    fn from_primes(sign: i8, mut primes: Vec<(BigInt, bool)>) -> Self {
        primes.sort_by(|a, b| a.0.cmp(&b.0));
        let mut factors: Vec<PrimePower> = Vec::new();
        for (p, certified) in primes {
            match factors.last_mut() {
                Some(last) if last.prime == p => last.exponent += 1,
                _ => factors.push(PrimePower { prime: p, exponent: 1, certified }),
            }
        }
        Self { sign, factors }
    }

    /// Number of prime factors counted with multiplicity.
    pub fn big_omega(&self) -> u32 {
        self.factors.iter().map(|f| f.exponent).sum()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|f| f.exponent == 1)
    }

    pub fn product(&self) -> BigInt {
        let mut acc = BigInt::from(self.sign);
        for f in &self.factors {
            acc *= num_traits::pow(f.prime.clone(), f.exponent as usize);
        }
        acc
    }

    pub fn all_certified(&self) -> bool {
        self.factors.iter().all(|f| f.certified)
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign < 0 {
            write!(f, "-")?;
        }
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        for (i, pp) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, " * ")?;
            }
            if pp.exponent == 1 {
                write!(f, "{}", pp.prime)?;
            } else {
                write!(f, "{}^{}", pp.prime, pp.exponent)?;
            }
        }
        Ok(())
    }
}

/// Ω(n). Zero maps to `Infinite`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Omega {
    Finite(u32),
    Infinite,
}

impl Omega {
    pub fn at_most(self, r: u32) -> bool {
        matches!(self, Omega::Finite(k) if k <= r)
    }
}

/// A factorization that ran out of effort. `partial` times `cofactor`
/// reconstructs the input; the cofactor is known to be composite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unfactored {
    pub partial: Factorization,
    pub cofactor: BigInt,
}

impl Unfactored {
    /// Ω is at least the primes found so far plus two for the composite cofactor.
    pub fn omega_lower_bound(&self) -> u32 {
        self.partial.big_omega() + 2
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FactorError {
    #[error("zero has no factorization")]
    Zero,
    #[error("composite cofactor {} left unfactored", .0.cofactor)]
    Unfactored(Unfactored),
}

fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_up_to(DEFAULT_TRIAL_BOUND))
}

/// Sieve of Eratosthenes: all primes `<= n`.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

/// Primes below `bound` drawn from the cached table when possible.
fn trial_primes(bound: u64) -> std::borrow::Cow<'static, [u64]> {
    if bound <= DEFAULT_TRIAL_BOUND {
        let table = small_primes();
        let end = table.partition_point(|&p| p <= bound);
        std::borrow::Cow::Borrowed(&table[..end])
    } else {
        std::borrow::Cow::Owned(primes_up_to(bound))
    }
}

fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, n);
        }
        base = mul_mod(base, base, n);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality test for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'bases: for &a in &MR_BASES[..12] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

fn strong_probable_prime(n: &BigUint, a: u64) -> bool {
    let one = BigUint::one();
    let n1 = n - &one;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    let mut x = BigUint::from(a).modpow(&d, n);
    if x == one || x == n1 {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if x == n1 {
            return true;
        }
    }
    false
}

/// Primality of `|n|`.
pub fn is_prime(n: &BigInt) -> Primality {
    is_prime_with(n, &FactorEffort::default())
}

pub fn is_prime_with(n: &BigInt, effort: &FactorEffort) -> Primality {
    let m = n.magnitude();
    if let Some(small) = m.to_u64() {
        return if is_prime_u64(small) { Primality::Prime } else { Primality::Composite };
    }
    for &p in &MR_BASES {
        if (m % p).is_zero() {
            return Primality::Composite;
        }
    }
    if !MR_BASES.iter().all(|&a| strong_probable_prime(m, a)) {
        return Primality::Composite;
    }
    if m.to_u128().is_some_and(|v| v < MR_DETERMINISTIC_LIMIT) {
        return Primality::Prime;
    }
    if pocklington(m, effort) {
        Primality::Prime
    } else {
        Primality::ProbablePrime
    }
}

/// Pocklington-Lehmer: if `F | n - 1` with `F^2 > n`, and for every prime
/// `q | F` some base `a` has `a^(n-1) = 1` and `gcd(a^((n-1)/q) - 1, n) = 1`,
/// then `n` is prime.
fn pocklington(n: &BigUint, effort: &FactorEffort) -> bool {
    let n1 = BigInt::from(n - 1u32);
    let (known, _) = partial_factor(&n1, effort);
    let mut f = BigUint::one();
    for pp in &known.factors {
        if !pp.certified {
            continue;
        }
        f *= num_traits::pow(pp.prime.magnitude().clone(), pp.exponent as usize);
    }
    if &f * &f <= *n {
        return false;
    }
    let n1u = n - 1u32;
    for pp in &known.factors {
        if !pp.certified {
            continue;
        }
        let q = pp.prime.magnitude();
        let exp = &n1u / q;
        let witness = (2u64..200).any(|a| {
            let a = BigUint::from(a);
            if a.modpow(&n1u, n) != BigUint::one() {
                return false;
            }
            let t = a.modpow(&exp, n);
            let t1 = if t.is_zero() { n - 1u32 } else { t - 1u32 };
            t1.gcd(n).is_one()
        });
        if !witness {
            return false;
        }
    }
    true
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Pollard rho with Brent's cycle detection on a 64-bit odd composite.
fn brent_u64(n: u64, c: u64, max_iter: u64) -> Option<u64> {
    const BATCH: u64 = 128;
    let f = |x: u64| (mul_mod(x, x, n) + c) % n;
    let (mut y, mut r, mut q, mut g) = (2u64 % n, 1u64, 1u64, 1u64);
    let mut x = y;
    let mut ys = y;
    let mut spent = 0u64;
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            for _ in 0..BATCH.min(r - k) {
                y = f(y);
                q = mul_mod(q, x.abs_diff(y), n);
            }
            g = gcd_u64(q, n);
            k += BATCH;
        }
        spent += r;
        r *= 2;
        if spent > max_iter {
            break;
        }
    }
    if g == n {
        // the batched product overshot; replay one step at a time
        for _ in 0..=2 * r {
            ys = f(ys);
            g = gcd_u64(x.abs_diff(ys), n);
            if g > 1 {
                break;
            }
        }
    }
    (g > 1 && g < n).then_some(g)
}

fn brent_big(n: &BigUint, c: u64, max_iter: u64) -> Option<BigUint> {
    const BATCH: u64 = 128;
    let c = BigUint::from(c);
    let f = |x: &BigUint| (x * x + &c) % n;
    let diff = |a: &BigUint, b: &BigUint| if a > b { a - b } else { b - a };
    let one = BigUint::one();
    let mut y = BigUint::from(2u32);
    let mut r = 1u64;
    let mut q = BigUint::one();
    let mut g = BigUint::one();
    let mut x = y.clone();
    let mut ys = y.clone();
    let mut spent = 0u64;
    while g == one {
        x = y.clone();
        for _ in 0..r {
            y = f(&y);
        }
        let mut k = 0;
        while k < r && g == one {
            ys = y.clone();
            for _ in 0..BATCH.min(r - k) {
                y = f(&y);
                q = (&q * diff(&x, &y)) % n;
            }
            g = q.gcd(n);
            k += BATCH;
        }
        spent += r;
        r *= 2;
        if spent > max_iter {
            break;
        }
    }
    if &g == n {
        for _ in 0..=2 * r {
            ys = f(&ys);
            g = diff(&x, &ys).gcd(n);
            if g > one {
                break;
            }
        }
    }
    (g > one && &g < n).then_some(g)
}

fn find_factor(n: &BigUint, effort: &FactorEffort) -> Option<BigUint> {
    let root = n.sqrt();
    if &(&root * &root) == n {
        return Some(root);
    }
    for attempt in 0..effort.rho_attempts {
        let c = 1 + attempt as u64;
        let found = match n.to_u64() {
            Some(small) => brent_u64(small, c, effort.rho_iterations).map(BigUint::from),
            None => brent_big(n, c, effort.rho_iterations),
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Factors as far as the effort allows. Returns the collected primes (with
/// certification flags) and the product of the composite pieces left over.
fn partial_factor(n: &BigInt, effort: &FactorEffort) -> (Factorization, BigUint) {
    let sign = if n.sign() == Sign::Minus { -1 } else { 1 };
    let mut rest = n.magnitude().clone();
    let mut primes: Vec<(BigInt, bool)> = Vec::new();
    if rest.is_zero() {
        return (Factorization::unit(sign), rest);
    }

    let table = trial_primes(effort.trial_bound);
    let mut rest_changed = true;
    for (idx, &p) in table.iter().enumerate() {
        if rest.is_one() {
            break;
        }
        if let Some(r) = rest.to_u64() {
            if p.saturating_mul(p) > r {
                break;
            }
        }
        if (&rest % p).is_zero() {
            while (&rest % p).is_zero() {
                rest /= p;
                primes.push((BigInt::from(p), true));
            }
            rest_changed = true;
        }
        if rest_changed && matches!(idx, 64 | 1024 | 16384) {
            rest_changed = false;
            if is_prime_with(&BigInt::from(rest.clone()), effort).is_prime() {
                break;
            }
        }
    }

    let mut leftover = BigUint::one();
    let mut stack = vec![rest];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        match is_prime_with(&BigInt::from(m.clone()), effort) {
            Primality::Prime => {
                primes.push((BigInt::from(m), true));
                continue;
            }
            Primality::ProbablePrime => {
                primes.push((BigInt::from(m), false));
                continue;
            }
            Primality::Composite => {}
        }
        if m.bits() > effort.max_cofactor_bits {
            leftover *= m;
            continue;
        }
        match find_factor(&m, effort) {
            Some(a) => {
                let b = &m / &a;
                stack.push(a);
                stack.push(b);
            }
            None => leftover *= m,
        }
    }
    (Factorization::from_primes(sign, primes), leftover)
}

/// Complete factorization of `n`, or the partial result when effort runs out.
pub fn factorize(n: &BigInt, effort: &FactorEffort) -> Result<Factorization, FactorError> {
    if n.is_zero() {
        return Err(FactorError::Zero);
    }
    let (partial, leftover) = partial_factor(n, effort);
    if leftover.is_one() {
        Ok(partial)
    } else {
        Err(FactorError::Unfactored(Unfactored { partial, cofactor: BigInt::from(leftover) }))
    }
}

/// Ω(n), with Ω(0) = +∞.
pub fn omega(n: &BigInt, effort: &FactorEffort) -> Result<Omega, Unfactored> {
    match factorize(n, effort) {
        Ok(f) => Ok(Omega::Finite(f.big_omega())),
        Err(FactorError::Zero) => Ok(Omega::Infinite),
        Err(FactorError::Unfactored(u)) => Err(u),
    }
}

/// Möbius function; `d` must be positive.
pub fn moebius(d: &BigInt) -> Result<i8, ArithError> {
    if d.sign() != Sign::Plus {
        return Err(ArithError::Domain(format!("moebius({d}) requires d >= 1")));
    }
    let f = factorize(d, &FactorEffort::default()).map_err(|e| ArithError::Domain(e.to_string()))?;
    Ok(if !f.is_squarefree() {
        0
    } else if f.big_omega() % 2 == 0 {
        1
    } else {
        -1
    })
}

/// Prime factorization of a machine integer as `(p, e)` pairs.
pub fn factor_u64(n: u64) -> Vec<(u64, u32)> {
    assert!(n > 0, "factor_u64(0)");
    let f = factorize(&BigInt::from(n), &FactorEffort::default())
        .expect("64-bit integers always factor within the default effort");
    f.factors
        .iter()
        .map(|pp| (pp.prime.to_u64().expect("factor of a u64"), pp.exponent))
        .collect()
}

pub fn is_squarefree_u64(n: u64) -> bool {
    n > 0 && factor_u64(n).iter().all(|&(_, e)| e == 1)
}

/// Distinct prime divisors in increasing order.
pub fn prime_divisors_u64(n: u64) -> Vec<u64> {
    factor_u64(n).into_iter().map(|(p, _)| p).collect()
}

pub fn moebius_u64(n: u64) -> i8 {
    let f = factor_u64(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn omega_examples() {
        let e = FactorEffort::default();
        assert_eq!(omega(&big(0), &e).unwrap(), Omega::Infinite);
        assert_eq!(omega(&big(1), &e).unwrap(), Omega::Finite(0));
        assert_eq!(omega(&big(60), &e).unwrap(), Omega::Finite(4));
        assert_eq!(omega(&big(-60), &e).unwrap(), Omega::Finite(4));
    }

    #[test]
    fn moebius_examples() {
        assert_eq!(moebius(&big(1)).unwrap(), 1);
        assert_eq!(moebius(&big(12)).unwrap(), 0);
        assert_eq!(moebius(&big(30)).unwrap(), -1);
        assert!(moebius(&big(0)).is_err());
        assert!(moebius(&big(-5)).is_err());
    }

    #[test]
    fn sieve_agrees_with_trial_division() {
        let naive: Vec<u64> = (2..2000u64).filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)).collect();
        assert_eq!(primes_up_to(1999), naive);
        for n in 0..2000u64 {
            assert_eq!(is_prime_u64(n), naive.binary_search(&n).is_ok(), "n = {n}");
        }
    }

    #[test]
    fn strong_pseudoprimes_are_composite() {
        // 3215031751 is a strong pseudoprime to bases 2, 3, 5, 7
        assert!(!is_prime_u64(3_215_031_751));
        assert!(!is_prime_u64(3_825_123_056_546_413_051));
        assert!(is_prime_u64(18_446_744_073_709_551_557));
    }

    #[test]
    fn semiprime_beyond_trial_bound() {
        // two primes above 10^6, product above 2^40
        let p = 1_000_003u64;
        let q = 2_000_003u64;
        assert!(is_prime_u64(p) && is_prime_u64(q));
        let f = factorize(&BigInt::from(p * q), &FactorEffort::default()).unwrap();
        assert_eq!(f.factors.len(), 2);
        assert_eq!(f.product(), BigInt::from(p * q));
    }

    #[test]
    fn factors_beyond_64_bits() {
        // (2^61 - 1) * 1000003^2 * 2000003, about 122 bits
        let m61 = (BigInt::one() << 61) - 1;
        let n = &m61 * big(1_000_003) * big(1_000_003) * big(2_000_003);
        let f = factorize(&n, &FactorEffort::default()).unwrap();
        assert_eq!(f.product(), n);
        assert_eq!(f.big_omega(), 4);
        assert!(f.all_certified());
    }

    #[test]
    fn large_prime_gets_certificate() {
        // 2^127 - 1 is prime and above the deterministic Miller-Rabin range
        let m127 = (BigInt::one() << 127) - 1;
        assert_eq!(is_prime(&m127), Primality::Prime);
        let composite = &m127 * big(3);
        assert_eq!(is_prime(&composite), Primality::Composite);
    }

    #[test]
    fn effort_bound_yields_unfactored() {
        let p = (BigInt::one() << 89) - 1; // prime
        let q = (BigInt::one() << 107) - 1; // prime
        let n = &p * &q * big(12);
        let effort = FactorEffort { max_cofactor_bits: 100, ..FactorEffort::default() };
        match omega(&n, &effort) {
            Err(u) => {
                assert_eq!(u.cofactor, &p * &q);
                assert_eq!(u.partial.big_omega(), 3);
                assert_eq!(u.omega_lower_bound(), 5);
            }
            Ok(o) => panic!("expected unfactored, got {o:?}"),
        }
    }

    #[test]
    fn moebius_sums_vanish_off_one() {
        for n in 1..=10_000u64 {
            let s: i64 = (1..=n).filter(|d| n % d == 0).map(|d| moebius_u64(d) as i64).sum();
            assert_eq!(s, (n == 1) as i64, "n = {n}");
        }
    }
}
