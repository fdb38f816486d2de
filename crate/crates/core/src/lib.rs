//! Sieve methods in orbits of matrix groups, at desk scale.
//!
//! The crate is organised bottom-up:
//!
//! * [`exactmath`] - big-integer matrices, factorization, Ω, μ, Smith normal form.
//! * [`apollonian`] - Descartes quadruples and integral Apollonian packings.
//! * [`orbits`] - group presets, reduction modulo squarefree `d`, finite images,
//!   random walks and word/norm balls.
//! * [`spectral`] - Markov operators on Cayley graphs of the finite images.
//! * [`sieve`] - congruence sums, Legendre sifting, local densities, sieve
//!   dimension, large-sieve mass and almost-prime statistics.
//! * [`dt3m`] - first homology of Heegaard-splitting 3-manifolds from their
//!   symplectic gluing data.

pub mod apollonian;
pub mod dt3m;
pub mod exactmath;
pub mod orbits;
pub mod sieve;
pub mod spectral;
