use std::collections::HashMap;

use num_bigint::BigInt;

use super::{GroupPreset, OrbitError};
use crate::exactmath::IntMatrix;

/// The combinatorial ball `B_S(k)`: all elements of word length at most `k`.
#[derive(Clone, Debug)]
pub struct WordBall {
    pub radius: usize,
    /// Elements in BFS order; `lengths[i]` is the word length of `elements[i]`.
    pub elements: Vec<IntMatrix>,
    pub lengths: Vec<u32>,
    /// `sphere_sizes[j]` counts elements of word length exactly `j`.
    pub sphere_sizes: Vec<usize>,
}

impl WordBall {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Exact `B_S(k)` by BFS with exact matrix equality.
pub fn combinatorial_ball(preset: &GroupPreset, k: usize, cap: usize) -> Result<WordBall, OrbitError> {
    let gens = preset.distinct_nontrivial();
    let id = IntMatrix::identity(preset.dim());
    let mut seen: HashMap<IntMatrix, u32> = HashMap::from([(id.clone(), 0)]);
    let mut elements = vec![id];
    let mut lengths = vec![0u32];
    let mut sphere_sizes = vec![1usize];
    let mut start = 0;
    for r in 1..=k {
        let end = elements.len();
        let mut added = 0;
        for i in start..end {
            for s in &gens {
                let y = &elements[i] * s;
                if seen.contains_key(&y) {
                    continue;
                }
                if elements.len() >= cap {
                    return Err(OrbitError::TooLarge { modulus: 0, cap });
                }
                seen.insert(y.clone(), r as u32);
                elements.push(y);
                lengths.push(r as u32);
                added += 1;
            }
        }
        sphere_sizes.push(added);
        start = end;
        if added == 0 {
            // the group is finite and exhausted
            sphere_sizes.resize(k + 1, 0);
            break;
        }
    }
    Ok(WordBall { radius: k, elements, lengths, sphere_sizes })
}

/// Elements of `B_S(kmax)` whose max-entry norm is at most `x`.
#[derive(Clone, Debug)]
pub struct NormBall {
    pub bound: BigInt,
    pub word_cutoff: usize,
    pub elements: Vec<IntMatrix>,
    /// True only when a certified word-length bound covers every element of
    /// norm at most `bound`.
    pub complete: bool,
}

/// Norm ball by filtering the word ball. `certified_length`, when given, is
/// the caller's guarantee that every element of norm `<= x` has word length
/// at most that value; the result is complete iff `kmax` reaches it.
pub fn norm_ball(
    preset: &GroupPreset,
    x: &BigInt,
    kmax: usize,
    certified_length: Option<usize>,
    cap: usize,
) -> Result<NormBall, OrbitError> {
    let ball = combinatorial_ball(preset, kmax, cap)?;
    let elements = ball.elements.into_iter().filter(|g| &g.max_abs_entry() <= x).collect();
    Ok(NormBall {
        bound: x.clone(),
        word_cutoff: kmax,
        elements,
        complete: certified_length.is_some_and(|l| kmax >= l),
    })
}
