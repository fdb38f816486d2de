//! Exact integer arithmetic shared by every other module: integer matrices,
//! factorization-based arithmetic functions and Smith normal form.

mod factor;
mod matrix;
mod snf;

pub use factor::{
    factor_u64, factorize, is_prime, is_prime_u64, is_prime_with, is_squarefree_u64, moebius,
    moebius_u64, omega, prime_divisors_u64, primes_up_to, FactorEffort, FactorError,
    Factorization, Omega, PrimePower, Primality, Unfactored,
};
pub use matrix::IntMatrix;

pub use snf::{lattice_quotient, rank_mod_p, smith_normal_form, LatticeQuotient};

pub use num_bigint::BigInt;
pub use num_rational::BigRational;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ArithError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
}
