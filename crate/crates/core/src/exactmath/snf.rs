use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::IntMatrix;

/// Invariant factors `d_1 | d_2 | ... | d_r` of `a`, where `r = min(rows, cols)`.
/// Zeros (the free part) come last.
///
/// Pivot rule: the nonzero entry of smallest absolute value in the active
/// submatrix, ties broken by lowest `(row, col)`.
pub fn smith_normal_form(a: &IntMatrix) -> Vec<BigInt> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut m: Vec<Vec<BigInt>> = (0..rows).map(|i| a.row(i).to_vec()).collect();
    let r = rows.min(cols);
    let mut diag = Vec::with_capacity(r);

    for t in 0..r {
        loop {
            let Some((pi, pj)) = smallest_nonzero(&m, t) else {
                diag.resize(r, BigInt::zero());
                return diag;
            };
            m.swap(t, pi);
            for row in m.iter_mut() {
                row.swap(t, pj);
            }

            let pivot = m[t][t].clone();
            let mut clean = true;
            for i in t + 1..rows {
                if m[i][t].is_zero() {
                    continue;
                }
                let q = m[i][t].div_floor(&pivot);
                for j in t..cols {
                    let v = &q * &m[t][j];
                    m[i][j] -= v;
                }
                clean &= m[i][t].is_zero();
            }
            for j in t + 1..cols {
                if m[t][j].is_zero() {
                    continue;
                }
                let q = m[t][j].div_floor(&pivot);
                for i in t..rows {
                    let v = &q * &m[i][t];
                    m[i][j] -= v;
                }
                clean &= m[t][j].is_zero();
            }
            if !clean {
                continue;
            }

            // the pivot must divide the rest of the active block
            let offending = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !(&m[i][j] % &pivot).is_zero());
            match offending {
                Some((i, _)) => {
                    for j in t..cols {
                        let v = m[i][j].clone();
                        m[t][j] += v;
                    }
                }
                None => break,
            }
        }
        diag.push(m[t][t].abs());
    }
    diag
}

fn smallest_nonzero(m: &[Vec<BigInt>], t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, BigInt)> = None;
    for (i, row) in m.iter().enumerate().skip(t) {
        for (j, x) in row.iter().enumerate().skip(t) {
            if x.is_zero() {
                continue;
            }
            let ax = x.abs();
            if best.as_ref().is_none_or(|(_, _, b)| ax < *b) {
                best = Some((i, j, ax));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Structure of `Z^rows / (column lattice of A)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeQuotient {
    pub invariant_factors: Vec<BigInt>,
    pub free_rank: usize,
    /// Order of the torsion subgroup (product of the nonzero invariant factors).
    pub torsion_order: BigInt,
}

pub fn lattice_quotient(a: &IntMatrix) -> LatticeQuotient {
    let invariant_factors = smith_normal_form(a);
    let nonzero = invariant_factors.iter().filter(|d| !d.is_zero()).count();
    let torsion_order = invariant_factors
        .iter()
        .filter(|d| !d.is_zero())
        .fold(BigInt::one(), |acc, d| acc * d);
    LatticeQuotient { invariant_factors, free_rank: a.rows() - nonzero, torsion_order }
}

/// Rank of `a` reduced modulo the prime `p`.
pub fn rank_mod_p(a: &IntMatrix, p: u64) -> usize {
    let pb = BigInt::from(p);
    let mut m: Vec<Vec<u64>> = (0..a.rows())
        .map(|i| {
            a.row(i)
                .iter()
                .map(|x| {
                    let r = x.mod_floor(&pb);
                    u64::try_from(r).expect("residue below p")
                })
                .collect()
        })
        .collect();
    let (rows, cols) = (a.rows(), a.cols());
    let mut rank = 0;
    for c in 0..cols {
        let Some(pr) = (rank..rows).find(|&i| m[i][c] != 0) else { continue };
        m.swap(rank, pr);
        let inv = inverse_mod(m[rank][c], p);
        for j in c..cols {
            m[rank][j] = mul_mod(m[rank][j], inv, p);
        }
        for i in 0..rows {
            if i != rank && m[i][c] != 0 {
                let f = m[i][c];
                for j in c..cols {
                    let sub = mul_mod(f, m[rank][j], p);
                    m[i][j] = (m[i][j] + p - sub) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

/// Inverse of `a` modulo the prime `p` by Fermat.
pub(crate) fn inverse_mod(a: u64, p: u64) -> u64 {
    let (mut base, mut exp, mut acc) = (a % p, p - 2, 1 % p);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(smith_normal_form(&IntMatrix::identity(2)), ints(&[1, 1]));
        assert_eq!(smith_normal_form(&IntMatrix::from_literal([[2, 0], [0, 3]])), ints(&[1, 6]));
        assert_eq!(smith_normal_form(&IntMatrix::zeros(2, 2)), ints(&[0, 0]));
    }

    /// Index of the sublattice spanned by the columns, by counting the
    /// residues of Z^2 modulo the lattice inside a fundamental box.
    fn brute_force_index(a: [[i64; 2]; 2]) -> i64 {
        let det = (a[0][0] * a[1][1] - a[0][1] * a[1][0]).abs();
        // points (x, y) with 0 <= x, y < det are a full residue system mod det*Z^2;
        // count classes modulo the lattice by solving A c = v over Q
        let mut classes = std::collections::HashSet::new();
        for x in 0..det {
            for y in 0..det {
                // canonical representative: reduce v by the lattice using
                // coordinates c = adj(A) v / det taken modulo 1
                let c0 = (a[1][1] * x - a[0][1] * y).rem_euclid(det);
                let c1 = (-a[1][0] * x + a[0][0] * y).rem_euclid(det);
                classes.insert((c0, c1));
            }
        }
        classes.len() as i64
    }

    #[test]
    fn torsion_order_matches_lattice_index() {
        for a in [[[2, 0], [0, 3]], [[4, 6], [2, 8]], [[1, 1], [0, 5]], [[6, 4], [4, 6]]] {
            let q = lattice_quotient(&IntMatrix::from_literal(a));
            assert_eq!(q.free_rank, 0);
            assert_eq!(q.torsion_order, BigInt::from(brute_force_index(a)), "{a:?}");
        }
    }

    #[test]
    fn rectangular_and_rank_deficient() {
        let a = IntMatrix::from_literal([[2, 4, 4], [-6, 6, 12], [10, -4, -16]]);
        assert_eq!(smith_normal_form(&a), ints(&[2, 6, 12]));
        let b = IntMatrix::from_literal([[1, 2, 3], [2, 4, 6]]);
        let q = lattice_quotient(&b);
        assert_eq!(q.invariant_factors, ints(&[1, 0]));
        assert_eq!(q.free_rank, 1);
    }

    #[test]
    fn rank_over_prime_fields() {
        let a = IntMatrix::from_literal([[1, 1], [0, 5]]);
        assert_eq!(rank_mod_p(&a, 5), 1);
        assert_eq!(rank_mod_p(&a, 2), 2);
        assert_eq!(rank_mod_p(&IntMatrix::zeros(3, 3), 7), 0);
        let b = IntMatrix::from_literal([[-1, 2], [3, -6]]);
        assert_eq!(rank_mod_p(&b, 3), 1);
    }
}
