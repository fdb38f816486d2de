//! Matrix-group presets, reduction modulo squarefree integers, finite images
//! and the counting methods on orbits (random walks, word balls, norm balls).
//!
//! Generator lists are multisets: a generator listed twice is stepped to
//! twice as often, and reduction mod `d` may merge distinct generators
//! without changing step probabilities. Every preset contains the identity
//! and is closed under inverses (with multiplicity).

mod ball;
mod finite;
mod poly;
mod walk;

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::exactmath::{is_squarefree_u64, prime_divisors_u64, IntMatrix};

pub use ball::{combinatorial_ball, norm_ball, NormBall, WordBall};
pub use finite::{
    discover_exceptional, generate_finite_image, strong_approx_check, FiniteGroupTable, StrongApproxReport,
    DEFAULT_ENUMERATION_CAP,
};
pub use poly::Polynomial;
pub use walk::{derive_sub_seed, exact_word_counts, sample_walk, WalkEnsemble};

#[derive(Debug, thiserror::Error)]
pub enum OrbitError {
    #[error("modulus {0} must be a squarefree integer >= 2")]
    BadModulus(u64),
    #[error("group image mod {modulus} exceeds the enumeration cap of {cap} elements")]
    TooLarge { modulus: u64, cap: usize },
    #[error("invalid preset: {0}")]
    InvalidPreset(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("order of the ambient group {0} over Z/dZ is not available in closed form")]
    AmbientUnknown(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The algebraic group a preset's generators are checked against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmbientGroup {
    SpecialLinear { m: usize },
    /// `Sp_2g` for the form `[[0, I], [-I, 0]]`.
    Symplectic { g: usize },
    /// Automorphisms of the integral quadratic form with this Gram matrix.
    Orthogonal { gram: IntMatrix },
}

impl AmbientGroup {
    pub fn dim(&self) -> usize {
        match self {
            AmbientGroup::SpecialLinear { m } => *m,
            AmbientGroup::Symplectic { g } => 2 * g,
            AmbientGroup::Orthogonal { gram } => gram.rows(),
        }
    }

    pub fn contains(&self, x: &IntMatrix) -> bool {
        if x.rows() != self.dim() || x.cols() != self.dim() {
            return false;
        }
        match self {
            AmbientGroup::SpecialLinear { .. } => x.determinant().is_ok_and(|d| d.is_one()),
            AmbientGroup::Symplectic { g } => {
                let w = standard_symplectic_form(*g);
                &(&x.transpose() * &w) * x == w
            }
            AmbientGroup::Orthogonal { gram } => &(&x.transpose() * gram) * x == *gram,
        }
    }

    /// `|G(Z/dZ)| = prod_{p | d} |G(F_p)|` for squarefree `d`, when known in
    /// closed form (SL_m and Sp_2g). `None` on overflow or for orthogonal groups.
    pub fn order_mod(&self, d: u64) -> Option<u128> {
        let mut total: u128 = 1;
        for p in prime_divisors_u64(d) {
            let p = p as u128;
            let part = match self {
                AmbientGroup::SpecialLinear { m } => {
                    let m = *m as u32;
                    let mut acc = p.checked_pow(m * (m - 1) / 2)?;
                    for i in 2..=m {
                        acc = acc.checked_mul(p.checked_pow(i)? - 1)?;
                    }
                    acc
                }
                AmbientGroup::Symplectic { g } => {
                    let g = *g as u32;
                    let mut acc = p.checked_pow(g * g)?;
                    for i in 1..=g {
                        acc = acc.checked_mul(p.checked_pow(2 * i)? - 1)?;
                    }
                    acc
                }
                AmbientGroup::Orthogonal { .. } => return None,
            };
            total = total.checked_mul(part)?;
        }
        Some(total)
    }
}

impl fmt::Display for AmbientGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AmbientGroup::SpecialLinear { m } => write!(f, "SL_{m}"),
            AmbientGroup::Symplectic { g } => write!(f, "Sp_{}", 2 * g),
            AmbientGroup::Orthogonal { gram } => write!(f, "O(Q), Q = {gram}"),
        }
    }
}

/// `[[0, I_g], [-I_g, 0]]`.
pub fn standard_symplectic_form(g: usize) -> IntMatrix {
    let mut w = IntMatrix::zeros(2 * g, 2 * g);
    for i in 0..g {
        w.set(i, g + i, BigInt::one());
        w.set(g + i, i, -BigInt::one());
    }
    w
}

/// A finitely generated matrix group with its step multiset and exceptional primes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPreset {
    pub name: String,
    pub ambient: AmbientGroup,
    generators: Vec<IntMatrix>,
    /// Primes where strong approximation is known or observed to fail.
    pub exceptional: Vec<u64>,
}

impl GroupPreset {
    /// Validates membership in the ambient group, presence of the identity
    /// and closure of the multiset under inverses.
    pub fn new(
        name: impl Into<String>,
        ambient: AmbientGroup,
        generators: Vec<IntMatrix>,
        mut exceptional: Vec<u64>,
    ) -> Result<Self, OrbitError> {
        let n = ambient.dim();
        for (i, g) in generators.iter().enumerate() {
            if g.rows() != n || g.cols() != n {
                return Err(OrbitError::InvalidPreset(format!("generator {i} is not {n}x{n}")));
            }
            if !ambient.contains(g) {
                return Err(OrbitError::InvalidPreset(format!("generator {i} = {g} is not in {ambient}")));
            }
        }
        if !generators.iter().any(IntMatrix::is_identity) {
            return Err(OrbitError::InvalidPreset("the identity must be one of the generators".into()));
        }
        let id = IntMatrix::identity(n);
        for (i, g) in generators.iter().enumerate() {
            let count = generators.iter().filter(|h| *h == g).count();
            let inverses = generators.iter().filter(|h| g * *h == id).count();
            if count != inverses {
                return Err(OrbitError::InvalidPreset(format!(
                    "generator {i} = {g} appears {count} times but its inverse appears {inverses} times"
                )));
            }
        }
        exceptional.sort_unstable();
        exceptional.dedup();
        Ok(Self { name: name.into(), ambient, generators, exceptional })
    }

    pub fn generators(&self) -> &[IntMatrix] {
        &self.generators
    }

    /// The same group with generator `i` repeated `weights[i]` times, so that
    /// walks step to it with probability proportional to its weight. Inverse
    /// pairs must carry equal weights.
    pub fn weighted(&self, weights: &[u32]) -> Result<Self, OrbitError> {
        if weights.len() != self.generators.len() {
            return Err(OrbitError::InvalidPreset(format!(
                "{} weights for {} generators",
                weights.len(),
                self.generators.len()
            )));
        }
        let gens = self
            .generators
            .iter()
            .zip(weights)
            .flat_map(|(g, &w)| std::iter::repeat_n(g.clone(), w as usize))
            .collect();
        Self::new(format!("{}-weighted", self.name), self.ambient.clone(), gens, self.exceptional.clone())
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    /// Distinct generators other than the identity.
    pub fn distinct_nontrivial(&self) -> Vec<IntMatrix> {
        let mut out: Vec<IntMatrix> = Vec::new();
        for g in &self.generators {
            if !g.is_identity() && !out.contains(g) {
                out.push(g.clone());
            }
        }
        out
    }

    pub fn is_exceptional_modulus(&self, d: u64) -> bool {
        self.exceptional.iter().any(|p| d % p == 0)
    }

    /// The group generated by `[[1, ±3], [0, 1]]` and `[[1, 0], [±3, 1]]`,
    /// of infinite index in SL_2(Z); trivial modulo 3.
    pub fn lubotzky() -> Self {
        let gens = vec![
            IntMatrix::identity(2),
            IntMatrix::from_literal([[1, 3], [0, 1]]),
            IntMatrix::from_literal([[1, -3], [0, 1]]),
            IntMatrix::from_literal([[1, 0], [3, 1]]),
            IntMatrix::from_literal([[1, 0], [-3, 1]]),
        ];
        Self::new("lubotzky", AmbientGroup::SpecialLinear { m: 2 }, gens, vec![3]).expect("valid preset")
    }

    /// SL_2(Z) with the elementary generators `[[1, ±1], [0, 1]]`, `[[1, 0], [±1, 1]]`.
    pub fn sl2_elementary() -> Self {
        let gens = vec![
            IntMatrix::identity(2),
            IntMatrix::from_literal([[1, 1], [0, 1]]),
            IntMatrix::from_literal([[1, -1], [0, 1]]),
            IntMatrix::from_literal([[1, 0], [1, 1]]),
            IntMatrix::from_literal([[1, 0], [-1, 1]]),
        ];
        Self::new("sl2", AmbientGroup::SpecialLinear { m: 2 }, gens, vec![]).expect("valid preset")
    }

    /// The Apollonian group generated by the four Descartes reflections,
    /// acting on column vectors of curvatures.
    pub fn apollonian() -> Self {
        let mut gens = vec![IntMatrix::identity(4)];
        for i in 0..4 {
            let mut s = IntMatrix::identity(4);
            for j in 0..4 {
                s.set(i, j, BigInt::from(if i == j { -1 } else { 2 }));
            }
            gens.push(s);
        }
        let mut gram = IntMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                gram.set(i, j, BigInt::from(if i == j { 1 } else { -1 }));
            }
        }
        Self::new("apollonian", AmbientGroup::Orthogonal { gram }, gens, vec![]).expect("valid preset")
    }

    /// Sp_2g(Z) generated by the symplectic transvections
    /// `[[I, S], [0, I]]` and `[[I, 0], [S, I]]` for the elementary symmetric
    /// matrices `S = E_ii` and `S = E_ij + E_ji`, with inverses and identity.
    pub fn symplectic_transvections(g: usize) -> Self {
        let n = 2 * g;
        let mut symmetric = Vec::new();
        for i in 0..g {
            for j in i..g {
                symmetric.push((i, j));
            }
        }
        let mut gens = vec![IntMatrix::identity(n)];
        for &(i, j) in &symmetric {
            for sign in [1i64, -1] {
                for lower in [false, true] {
                    let mut m = IntMatrix::identity(n);
                    let (ro, co) = if lower { (g, 0) } else { (0, g) };
                    m.set(ro + i, co + j, BigInt::from(sign));
                    m.set(ro + j, co + i, BigInt::from(sign));
                    gens.push(m);
                }
            }
        }
        Self::new(format!("sp{n}"), AmbientGroup::Symplectic { g }, gens, vec![]).expect("valid preset")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "lubotzky" | "L" => Some(Self::lubotzky()),
            "sl2" => Some(Self::sl2_elementary()),
            "apollonian" => Some(Self::apollonian()),
            "sp2" => Some(Self::symplectic_transvections(1)),
            "sp4" => Some(Self::symplectic_transvections(2)),
            "sp6" => Some(Self::symplectic_transvections(3)),
            _ => None,
        }
    }

    /// Stable textual description used to key caches.
    pub fn fingerprint(&self) -> String {
        let gens: Vec<String> = self.generators.iter().map(ToString::to_string).collect();
        format!("{}|{}", self.ambient, gens.join(";"))
    }
}

/// A matrix over `Z/dZ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModMatrix {
    pub dim: usize,
    pub modulus: u64,
    pub entries: Vec<u32>,
}

impl ModMatrix {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.dim + j] as u64
    }

    pub fn as_view(&self) -> ModMatrixView<'_> {
        ModMatrixView { dim: self.dim, modulus: self.modulus, entries: &self.entries }
    }

    pub fn is_identity(&self) -> bool {
        self.as_view().is_identity()
    }
}

/// Borrowed matrix over `Z/dZ`, e.g. an element of a [`FiniteGroupTable`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModMatrixView<'a> {
    pub dim: usize,
    pub modulus: u64,
    pub entries: &'a [u32],
}

impl ModMatrixView<'_> {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.dim + j] as u64
    }

    pub fn is_identity(&self) -> bool {
        let one = 1 % self.modulus;
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.get(i, j) == if i == j { one } else { 0 }))
    }

    /// Matrix-vector product mod the modulus.
    pub fn apply(&self, x: &[u64]) -> Vec<u64> {
        let m = self.modulus as u128;
        (0..self.dim)
            .map(|i| ((0..self.dim).map(|j| self.get(i, j) as u128 * x[j] as u128 % m).sum::<u128>() % m) as u64)
            .collect()
    }

    pub fn to_owned(&self) -> ModMatrix {
        ModMatrix { dim: self.dim, modulus: self.modulus, entries: self.entries.to_vec() }
    }
}

/// Largest modulus supported by the `u32` entry storage.
pub const MAX_MODULUS: u64 = 1 << 31;

pub(crate) fn check_modulus(d: u64) -> Result<(), OrbitError> {
    if !(2..MAX_MODULUS).contains(&d) || !is_squarefree_u64(d) {
        return Err(OrbitError::BadModulus(d));
    }
    Ok(())
}

/// Entrywise reduction of an integer matrix modulo a squarefree `d >= 2`.
pub fn reduce_mod(g: &IntMatrix, d: u64) -> Result<ModMatrix, OrbitError> {
    check_modulus(d)?;
    if !g.is_square() {
        return Err(OrbitError::Dimension(format!("{}x{} matrix is not square", g.rows(), g.cols())));
    }
    Ok(reduce_unchecked(g, d))
}

pub(crate) fn reduce_unchecked(g: &IntMatrix, d: u64) -> ModMatrix {
    let db = BigInt::from(d);
    let entries = g
        .entries()
        .iter()
        .map(|x| x.mod_floor(&db).to_u32().expect("residue below 2^31"))
        .collect();
    ModMatrix { dim: g.rows(), modulus: d, entries }
}

/// `f(g · x0)` evaluated exactly.
pub fn orbit_value(g: &IntMatrix, x0: &[BigInt], f: &Polynomial) -> Result<BigInt, OrbitError> {
    if g.cols() != x0.len() {
        return Err(OrbitError::Dimension(format!("{}x{} matrix applied to a vector of length {}", g.rows(), g.cols(), x0.len())));
    }
    let y = g.mul_vec(x0).map_err(|e| OrbitError::Dimension(e.to_string()))?;
    f.eval(&y)
}
