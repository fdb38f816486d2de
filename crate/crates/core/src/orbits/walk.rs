use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GroupPreset, OrbitError};
use crate::exactmath::IntMatrix;

/// Sub-seed of walk `index`: the first output of ChaCha8 keyed by the master
/// seed on stream `index`. Independent of how samples are scheduled.
pub fn derive_sub_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// `N` independent walks of `k` steps, each step drawn uniformly from the
/// generator multiset and multiplied on the right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkEnsemble {
    pub preset: String,
    pub preset_fingerprint: String,
    pub steps: usize,
    pub master_seed: u64,
    pub samples: Vec<IntMatrix>,
    pub sub_seeds: Vec<u64>,
    /// ChaCha word position of each walk's generator, as decimal strings,
    /// so that walks can be extended after a restart.
    word_positions: Vec<String>,
}

fn run_walk(preset: &GroupPreset, start: IntMatrix, rng: &mut ChaCha8Rng, steps: usize) -> IntMatrix {
    let gens = preset.generators();
    let mut x = start;
    for _ in 0..steps {
        let s = rng.gen_range(0..gens.len());
        x = &x * &gens[s];
    }
    x
}

pub fn sample_walk(preset: &GroupPreset, steps: usize, samples: usize, seed: u64) -> WalkEnsemble {
    let results: Vec<(IntMatrix, u64, u128)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let sub = derive_sub_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(sub);
            let x = run_walk(preset, IntMatrix::identity(preset.dim()), &mut rng, steps);
            (x, sub, rng.get_word_pos())
        })
        .collect();
    let mut ensemble = WalkEnsemble {
        preset: preset.name.clone(),
        preset_fingerprint: preset.fingerprint(),
        steps,
        master_seed: seed,
        samples: Vec::with_capacity(samples),
        sub_seeds: Vec::with_capacity(samples),
        word_positions: Vec::with_capacity(samples),
    };
    for (x, sub, pos) in results {
        ensemble.samples.push(x);
        ensemble.sub_seeds.push(sub);
        ensemble.word_positions.push(pos.to_string());
    }
    ensemble
}

impl WalkEnsemble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Continues every walk by `extra` steps. The result equals sampling
    /// `steps + extra` steps directly with the same seed.
    pub fn extend(&mut self, preset: &GroupPreset, extra: usize) -> Result<(), OrbitError> {
        if preset.fingerprint() != self.preset_fingerprint {
            return Err(OrbitError::Snapshot(format!("ensemble was sampled on {}, not {}", self.preset, preset.name)));
        }
        let updated: Result<Vec<(IntMatrix, u128)>, OrbitError> = self
            .samples
            .par_iter()
            .zip(self.sub_seeds.par_iter())
            .zip(self.word_positions.par_iter())
            .map(|((x, &sub), pos)| {
                let pos: u128 = pos.parse().map_err(|_| OrbitError::Snapshot(format!("bad word position {pos:?}")))?;
                let mut rng = ChaCha8Rng::seed_from_u64(sub);
                rng.set_word_pos(pos);
                let y = run_walk(preset, x.clone(), &mut rng, extra);
                Ok((y, rng.get_word_pos()))
            })
            .collect();
        for (i, (y, pos)) in updated?.into_iter().enumerate() {
            self.samples[i] = y;
            self.word_positions[i] = pos.to_string();
        }
        self.steps += extra;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, OrbitError> {
        let e: Self = serde_json::from_str(text).map_err(|e| OrbitError::Snapshot(e.to_string()))?;
        if e.samples.len() != e.sub_seeds.len() || e.samples.len() != e.word_positions.len() {
            return Err(OrbitError::Snapshot("ragged ensemble snapshot".into()));
        }
        Ok(e)
    }
}

/// Number of length-`k` generator words evaluating to each group element:
/// `|S|^k · μ_k`, computed by repeated convolution with the step multiset.
pub fn exact_word_counts(preset: &GroupPreset, k: usize) -> HashMap<IntMatrix, u128> {
    let mut dist: HashMap<IntMatrix, u128> = HashMap::from([(IntMatrix::identity(preset.dim()), 1)]);
    for _ in 0..k {
        let mut next: HashMap<IntMatrix, u128> = HashMap::new();
        for (x, c) in &dist {
            for s in preset.generators() {
                *next.entry(x * s).or_insert(0) += c;
            }
        }
        dist = next;
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_steps_is_identity() {
        let e = sample_walk(&GroupPreset::lubotzky(), 0, 17, 5);
        assert_eq!(e.len(), 17);
        assert!(e.samples.iter().all(IntMatrix::is_identity));
    }

    #[test]
    fn reproducible_and_extendable() {
        let l = GroupPreset::lubotzky();
        let a = sample_walk(&l, 12, 200, 99);
        let b = sample_walk(&l, 12, 200, 99);
        assert_eq!(a, b);
        let c = sample_walk(&l, 12, 200, 100);
        assert_ne!(a.samples, c.samples);

        let mut short = sample_walk(&l, 5, 200, 99);
        short.extend(&l, 7).unwrap();
        assert_eq!(short.samples, a.samples);
        assert_eq!(short.steps, 12);

        let restored = WalkEnsemble::from_json(&a.to_json()).unwrap();
        assert_eq!(restored, a);
    }

    #[test]
    fn independent_of_thread_count() {
        let l = GroupPreset::lubotzky();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_walk(&l, 20, 300, 7));
        let b = four.install(|| sample_walk(&l, 20, 300, 7));
        assert_eq!(a, b);
    }

    #[test]
    fn two_step_counts_match_word_expansion() {
        let l = GroupPreset::lubotzky();
        let gens = l.generators();
        let mut brute: HashMap<IntMatrix, u128> = HashMap::new();
        for a in gens {
            for b in gens {
                *brute.entry(a * b).or_insert(0) += 1;
            }
        }
        let dp = exact_word_counts(&l, 2);
        assert_eq!(dp, brute);
        assert_eq!(dp.values().sum::<u128>(), 25);
        assert_eq!(dp[&IntMatrix::identity(2)], 5);
    }

    #[test]
    fn one_step_frequencies_are_uniform() {
        let l = GroupPreset::lubotzky();
        let n = 100_000usize;
        let e = sample_walk(&l, 1, n, 2024);
        let p = 1.0 / 5.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for g in l.generators() {
            let count = e.samples.iter().filter(|x| *x == g).count() as f64;
            assert!((count - n as f64 * p).abs() < 4.0 * sigma, "{g}: {count}");
        }
    }
}
