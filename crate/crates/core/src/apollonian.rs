//! Integral Apollonian circle packings.
//!
//! A Descartes quadruple `(c1, c2, c3, c4)` of curvatures of four mutually
//! tangent circles satisfies `Q(c) = 0` with
//! `Q(x, y, z, t) = 2(x² + y² + z² + t²) − (x + y + z + t)²`. Replacing one
//! coordinate by the other root of `Q`, `c_i' = 2(sum of the other three) − c_i`,
//! gives the four reflections generating the Apollonian group; the packing
//! is the orbit of a root quadruple under them.
//!
//! Quadruples are stored sorted, and the sorted form is the deduplication
//! key. The curvature multiset includes the four root curvatures.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum ApollonianError {
    #[error("({0}) is not a Descartes quadruple: Q = {1}")]
    NotDescartes(String, BigInt),
    #[error("reflection index {0} out of range 0..4")]
    BadIndex(usize),
    #[error("bound {bound} is below the root curvature {max}")]
    BoundTooSmall { bound: BigInt, max: BigInt },
    #[error("descent did not terminate within {0} steps")]
    DescentGuard(usize),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `Q(x,y,z,t) = 2(x²+y²+z²+t²) − (x+y+z+t)²`, evaluated exactly.
pub fn descartes_form(c: &[BigInt; 4]) -> BigInt {
    let sum: BigInt = c.iter().sum();
    let squares: BigInt = c.iter().map(|x| x * x).sum();
    squares * 2 - &sum * &sum
}

/// Four curvatures satisfying `Q = 0`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DescartesQuadruple([BigInt; 4]);

impl DescartesQuadruple {
    pub fn new(c: [BigInt; 4]) -> Result<Self, ApollonianError> {
        let q = descartes_form(&c);
        if !q.is_zero() {
            return Err(ApollonianError::NotDescartes(join(&c), q));
        }
        Ok(Self(c))
    }

    pub fn from_i64(c: [i64; 4]) -> Result<Self, ApollonianError> {
        Self::new(c.map(BigInt::from))
    }

    pub fn curvatures(&self) -> &[BigInt; 4] {
        &self.0
    }

    pub fn sum(&self) -> BigInt {
        self.0.iter().sum()
    }

    pub fn sorted(&self) -> Self {
        let mut c = self.0.clone();
        c.sort();
        Self(c)
    }

    /// The other Descartes root in coordinate `i` (0-based).
    fn reflected_coordinate(&self, i: usize) -> BigInt {
        let others: BigInt = self.0.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, c)| c).sum();
        others * 2 - &self.0[i]
    }

    /// Applies the reflection `s_{i+1}`: coordinate `i` (0-based) is replaced
    /// by the other root of `Q`. Each reflection is an involution.
    pub fn reflect(&self, i: usize) -> Result<Self, ApollonianError> {
        if i >= 4 {
            return Err(ApollonianError::BadIndex(i));
        }
        let mut c = self.0.clone();
        c[i] = self.reflected_coordinate(i);
        Ok(Self(c))
    }

    /// Descends by sum-decreasing reflections to the sorted root quadruple.
    pub fn reduce_to_root(&self) -> Result<Self, ApollonianError> {
        const GUARD: usize = 1 << 20;
        let mut q = self.clone();
        for _ in 0..GUARD {
            // prefer the largest curvature that can shrink
            let step = (0..4)
                .map(|i| (i, q.reflected_coordinate(i)))
                .filter(|(i, new)| new < &q.0[*i])
                .max_by(|a, b| q.0[a.0].cmp(&q.0[b.0]).then(b.0.cmp(&a.0)));
            match step {
                Some((i, new)) => q.0[i] = new,
                None => return Ok(q.sorted()),
            }
        }
        Err(ApollonianError::DescentGuard(GUARD))
    }
}

impl fmt::Display for DescartesQuadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", join(&self.0))
    }
}

impl fmt::Debug for DescartesQuadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn join(c: &[BigInt; 4]) -> String {
    c.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// A packing truncated at a curvature bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packing {
    pub root: DescartesQuadruple,
    pub bound: BigInt,
    /// Sorted quadruples reached from the root.
    pub quadruples: BTreeSet<DescartesQuadruple>,
    curvatures: Vec<BigInt>,
}

impl Packing {
    /// One entry per circle: the four root circles plus the new circle of
    /// every non-root quadruple. Sorted ascending.
    pub fn curvatures(&self) -> &[BigInt] {
        &self.curvatures
    }

    /// Curvature multiplicities (the "with multiplicity" view).
    pub fn curvature_counts(&self) -> BTreeMap<BigInt, usize> {
        let mut m = BTreeMap::new();
        for c in &self.curvatures {
            *m.entry(c.clone()).or_insert(0) += 1;
        }
        m
    }

    /// The "without multiplicity" view.
    pub fn distinct_curvatures(&self) -> BTreeSet<BigInt> {
        self.curvatures.iter().cloned().collect()
    }

    /// True when some quadruple of the packing contains both curvatures,
    /// i.e. two tangent circles carry them.
    pub fn has_tangent_pair(&self, a: &BigInt, b: &BigInt) -> bool {
        self.quadruples.iter().any(|q| {
            let c = q.curvatures();
            (0..4).any(|i| (0..4).any(|j| i != j && &c[i] == a && &c[j] == b))
        })
    }

    /// Writes the snapshot format: a header line `root c1 c2 c3 c4 bound B`
    /// followed by one sorted quadruple per line in lexicographic order.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let r = self.root.curvatures();
        writeln!(w, "root {} {} {} {} bound {}", r[0], r[1], r[2], r[3], self.bound)?;
        for q in &self.quadruples {
            let c = q.curvatures();
            writeln!(w, "{} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        Ok(())
    }

    /// Reads a snapshot back. The curvature multiset is rebuilt by
    /// re-running the enumeration and checked against the stored quadruples.
    pub fn read_snapshot<R: BufRead>(r: R) -> Result<Self, ApollonianError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| ApollonianError::Snapshot("empty file".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 7 || parts[0] != "root" || parts[5] != "bound" {
            return Err(ApollonianError::Snapshot(format!("bad header {header:?}")));
        }
        let num = |s: &str| {
            s.parse::<BigInt>().map_err(|_| ApollonianError::Snapshot(format!("not an integer: {s:?}")))
        };
        let root = DescartesQuadruple::new([num(parts[1])?, num(parts[2])?, num(parts[3])?, num(parts[4])?])?;
        let bound = num(parts[6])?;
        let mut stored = BTreeSet::new();
        for line in lines {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(ApollonianError::Snapshot(format!("bad record {line:?}")));
            }
            stored.insert(DescartesQuadruple::new([num(f[0])?, num(f[1])?, num(f[2])?, num(f[3])?])?);
        }
        let packing = enumerate_packing(&root, &bound)?;
        if packing.quadruples != stored {
            return Err(ApollonianError::Snapshot("records do not match the root and bound".into()));
        }
        Ok(packing)
    }
}

/// Breadth-first closure of `root` under the four reflections, keeping only
/// quadruples whose newly created curvature is at most `bound`.
pub fn enumerate_packing(root: &DescartesQuadruple, bound: &BigInt) -> Result<Packing, ApollonianError> {
    enumerate_packing_ordered(root, bound, [0, 1, 2, 3])
}

/// [`enumerate_packing`] with an explicit reflection order; the result does
/// not depend on it.
pub fn enumerate_packing_ordered(
    root: &DescartesQuadruple,
    bound: &BigInt,
    order: [usize; 4],
) -> Result<Packing, ApollonianError> {
    Ok(bfs(root, bound, order, usize::MAX)?.0)
}

/// [`enumerate_packing`] that stops after the first BFS layer taking the
/// number of quadruples above `cap`. The flag is false when it stopped early;
/// the partial packing then holds every quadruple up to that depth.
pub fn enumerate_packing_capped(
    root: &DescartesQuadruple,
    bound: &BigInt,
    cap: usize,
) -> Result<(Packing, bool), ApollonianError> {
    bfs(root, bound, [0, 1, 2, 3], cap)
}

fn bfs(
    root: &DescartesQuadruple,
    bound: &BigInt,
    order: [usize; 4],
    cap: usize,
) -> Result<(Packing, bool), ApollonianError> {
    let max = root.curvatures().iter().max().expect("four entries").clone();
    if bound < &max {
        return Err(ApollonianError::BoundTooSmall { bound: bound.clone(), max });
    }
    let start = root.sorted();
    let mut seen = BTreeSet::new();
    seen.insert(start.clone());
    let mut curvatures: Vec<BigInt> = start.curvatures().to_vec();
    let mut frontier = vec![start];
    let mut complete = true;
    while !frontier.is_empty() {
        let children: Vec<(DescartesQuadruple, BigInt)> = frontier
            .par_iter()
            .flat_map_iter(|q| {
                order.iter().filter_map(move |&i| {
                    let new = q.reflected_coordinate(i);
                    if &new > bound {
                        return None;
                    }
                    let mut c = q.0.clone();
                    c[i] = new.clone();
                    Some((DescartesQuadruple(c).sorted(), new))
                })
            })
            .collect();
        let mut next = Vec::new();
        for (q, new) in children {
            if seen.insert(q.clone()) {
                curvatures.push(new);
                next.push(q);
            }
        }
        frontier = next;
        if seen.len() > cap && !frontier.is_empty() {
            complete = false;
            break;
        }
    }
    curvatures.sort();
    Ok((Packing { root: root.clone(), bound: bound.clone(), quadruples: seen, curvatures }, complete))
}

/// Sequential depth-first enumeration with the same pruning and
/// deduplication rules; used as an independent cross-check of the BFS.
pub fn enumerate_packing_dfs(root: &DescartesQuadruple, bound: &BigInt) -> (BTreeSet<DescartesQuadruple>, Vec<BigInt>) {
    let start = root.sorted();
    let mut seen = BTreeSet::new();
    let mut curvatures: Vec<BigInt> = start.curvatures().to_vec();
    seen.insert(start.clone());
    let mut stack = VecDeque::from([start]);
    while let Some(q) = stack.pop_back() {
        for i in (0..4).rev() {
            let r = q.reflect(i).expect("index in range");
            if &r.0[i] > bound {
                continue;
            }
            let key = r.sorted();
            if !seen.contains(&key) {
                curvatures.push(r.0[i].clone());
                seen.insert(key.clone());
                stack.push_back(key);
            }
        }
    }
    curvatures.sort();
    (seen, curvatures)
}
