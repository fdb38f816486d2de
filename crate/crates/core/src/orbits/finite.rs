use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_modulus, reduce_unchecked, GroupPreset, ModMatrixView, OrbitError};
use crate::exactmath::{is_prime_u64, primes_up_to};

pub const DEFAULT_ENUMERATION_CAP: usize = 2_000_000;

/// The image `Λ_d` of a preset modulo `d`, enumerated by breadth-first search
/// from the identity with the generators applied on the right in list order.
/// Element 0 is the identity.
#[derive(Clone, Debug)]
pub struct FiniteGroupTable {
    modulus: u64,
    dim: usize,
    /// `len * dim * dim` entries, row-major per element
    entries: Vec<u32>,
    index: HashMap<Box<[u32]>, u32>,
    /// `action[i * degree + s]` is the index of `element(i) * generator(s)`
    action: Vec<u32>,
    degree: usize,
    /// BFS distance from the identity (word length in the reduced generators)
    depth: Vec<u32>,
    preset_fingerprint: String,
}

fn mat_mul_mod(a: &[u32], b: &[u32], n: usize, d: u64, out: &mut Vec<u32>) {
    out.clear();
    for i in 0..n {
        for j in 0..n {
            let mut acc: u64 = 0;
            for k in 0..n {
                acc = (acc + a[i * n + k] as u64 * b[k * n + j] as u64) % d;
            }
            out.push(acc as u32);
        }
    }
}

impl FiniteGroupTable {
    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the step multiset (including the identity and repeats).
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn element(&self, i: usize) -> ModMatrixView<'_> {
        let n2 = self.dim * self.dim;
        ModMatrixView { dim: self.dim, modulus: self.modulus, entries: &self.entries[i * n2..(i + 1) * n2] }
    }

    pub fn elements(&self) -> impl Iterator<Item = ModMatrixView<'_>> + '_ {
        (0..self.len()).map(|i| self.element(i))
    }

    pub fn index_of(&self, entries: &[u32]) -> Option<usize> {
        self.index.get(entries).map(|&i| i as usize)
    }

    /// `element(i) * generator(s)`.
    pub fn step(&self, i: usize, s: usize) -> usize {
        self.action[i * self.degree + s] as usize
    }

    /// Neighbour lists in generator order, one row per element.
    pub fn action_table(&self) -> &[u32] {
        &self.action
    }

    pub fn depth(&self, i: usize) -> u32 {
        self.depth[i]
    }

    /// Index of each reduced generator.
    pub fn generator_indices(&self) -> Vec<usize> {
        (0..self.degree).map(|s| self.step(0, s)).collect()
    }

    /// Index of `element(i) * element(j)`.
    pub fn multiply(&self, i: usize, j: usize) -> usize {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        mat_mul_mod(self.element(i).entries, self.element(j).entries, self.dim, self.modulus, &mut out);
        self.index_of(&out).expect("table is closed under multiplication")
    }

    /// Largest word length; the Cayley graph is vertex-transitive, so this
    /// is its diameter.
    pub fn diameter(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Length of the shortest cycle in the simple Cayley graph (loops and
    /// parallel edges removed), found from the BFS tree at the identity.
    /// Exact for Cayley graphs by vertex-transitivity; `None` for forests.
    pub fn girth_lower_bound(&self) -> Option<u32> {
        let mut gens: Vec<usize> = self.generator_indices().into_iter().filter(|&g| g != 0).collect();
        gens.sort_unstable();
        gens.dedup();
        let n = self.len();
        let mut dist = vec![u32::MAX; n];
        let mut parent = vec![usize::MAX; n];
        dist[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut best: Option<u32> = None;
        let cols: Vec<usize> = gens
            .iter()
            .map(|&g| (0..self.degree).find(|&s| self.step(0, s) == g).expect("generator column"))
            .collect();
        while let Some(x) = queue.pop_front() {
            if best.is_some_and(|b| 2 * dist[x] + 1 >= b) {
                break;
            }
            for &s in &cols {
                let y = self.step(x, s);
                if dist[y] == u32::MAX {
                    dist[y] = dist[x] + 1;
                    parent[y] = x;
                    queue.push_back(y);
                } else if parent[x] != y {
                    let c = dist[x] + dist[y] + 1;
                    best = Some(best.map_or(c, |b| b.min(c)));
                }
            }
        }
        best
    }

    pub fn preset_fingerprint(&self) -> &str {
        &self.preset_fingerprint
    }

    fn cache_path(dir: &Path, preset: &GroupPreset, d: u64) -> PathBuf {
        dir.join(format!("{}-{:016x}-mod{d}.json", preset.name, fnv1a(preset.fingerprint().as_bytes())))
    }

    /// Writes the table to `dir`, keyed by the preset fingerprint hash and modulus.
    pub fn save_cache(&self, dir: &Path, preset: &GroupPreset) -> Result<PathBuf, OrbitError> {
        std::fs::create_dir_all(dir)?;
        let path = Self::cache_path(dir, preset, self.modulus);
        let file = CacheFile {
            fingerprint: self.preset_fingerprint.clone(),
            modulus: self.modulus,
            dim: self.dim,
            degree: self.degree,
            entries: self.entries.clone(),
            action: self.action.clone(),
            depth: self.depth.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|e| OrbitError::Snapshot(e.to_string()))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Loads a cached table, or `None` if no matching cache file exists.
    pub fn load_cache(dir: &Path, preset: &GroupPreset, d: u64) -> Result<Option<Self>, OrbitError> {
        let path = Self::cache_path(dir, preset, d);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        let f: CacheFile = serde_json::from_str(&text).map_err(|e| OrbitError::Snapshot(e.to_string()))?;
        if f.fingerprint != preset.fingerprint() || f.modulus != d {
            return Ok(None);
        }
        let n2 = f.dim * f.dim;
        let len = f.depth.len();
        if f.entries.len() != len * n2 || f.action.len() != len * f.degree {
            return Err(OrbitError::Snapshot("inconsistent table cache".into()));
        }
        let index = (0..len).map(|i| (f.entries[i * n2..(i + 1) * n2].into(), i as u32)).collect();
        Ok(Some(Self {
            modulus: f.modulus,
            dim: f.dim,
            entries: f.entries,
            index,
            action: f.action,
            degree: f.degree,
            depth: f.depth,
            preset_fingerprint: f.fingerprint,
        }))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    fingerprint: String,
    modulus: u64,
    dim: usize,
    degree: usize,
    entries: Vec<u32>,
    action: Vec<u32>,
    depth: Vec<u32>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Enumerates `Λ_d` by BFS closure of the reduced generators. Fails with
/// [`OrbitError::TooLarge`] once more than `cap` elements are found.
pub fn generate_finite_image(preset: &GroupPreset, d: u64, cap: usize) -> Result<FiniteGroupTable, OrbitError> {
    check_modulus(d)?;
    let dim = preset.dim();
    let n2 = dim * dim;
    let gens: Vec<Vec<u32>> = preset.generators().iter().map(|g| reduce_unchecked(g, d).entries).collect();
    let degree = gens.len();

    let mut identity = vec![0u32; n2];
    for i in 0..dim {
        identity[i * dim + i] = (1 % d) as u32;
    }
    let mut entries = identity.clone();
    let mut index: HashMap<Box<[u32]>, u32> = HashMap::new();
    index.insert(identity.into(), 0);
    let mut depth = vec![0u32];
    let mut action: Vec<u32> = Vec::new();

    let mut level_start = 0usize;
    while level_start < depth.len() {
        let level_end = depth.len();
        // products for the whole level in parallel, inserted in BFS order
        let products: Vec<Vec<u32>> = (level_start..level_end)
            .into_par_iter()
            .flat_map_iter(|i| {
                let x = entries[i * n2..(i + 1) * n2].to_vec();
                gens.iter().map(move |s| {
                    let mut out = Vec::with_capacity(n2);
                    mat_mul_mod(&x, s, dim, d, &mut out);
                    out
                })
            })
            .collect();
        for (k, y) in products.into_iter().enumerate() {
            let i = level_start + k / degree;
            let j = match index.get(y.as_slice()) {
                Some(&j) => j,
                None => {
                    let j = depth.len();
                    if j >= cap {
                        return Err(OrbitError::TooLarge { modulus: d, cap });
                    }
                    entries.extend_from_slice(&y);
                    index.insert(y.into(), j as u32);
                    depth.push(depth[i] + 1);
                    j as u32
                }
            };
            action.push(j);
        }
        level_start = level_end;
    }

    Ok(FiniteGroupTable {
        modulus: d,
        dim,
        entries,
        index,
        action,
        degree,
        depth,
        preset_fingerprint: preset.fingerprint(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongApproxReport {
    pub modulus: u64,
    pub image_size: usize,
    pub ambient_size: u128,
    pub surjective: bool,
}

/// Compares `|Λ_d|` with `|G(Z/dZ)|`.
pub fn strong_approx_check(preset: &GroupPreset, d: u64, cap: usize) -> Result<StrongApproxReport, OrbitError> {
    check_modulus(d)?;
    let ambient_size = preset.ambient.order_mod(d).ok_or_else(|| OrbitError::AmbientUnknown(preset.ambient.to_string()))?;
    let table = generate_finite_image(preset, d, cap)?;
    Ok(StrongApproxReport {
        modulus: d,
        image_size: table.len(),
        ambient_size,
        surjective: table.len() as u128 == ambient_size,
    })
}

/// Runs [`strong_approx_check`] for every prime in `lo..=hi`. Primes whose
/// image exceeds the cap are returned separately.
pub fn discover_exceptional(
    preset: &GroupPreset,
    lo: u64,
    hi: u64,
    cap: usize,
) -> Result<(Vec<StrongApproxReport>, Vec<u64>), OrbitError> {
    let primes: Vec<u64> = primes_up_to(hi).into_iter().filter(|&p| p >= lo && is_prime_u64(p)).collect();
    let results: Vec<(u64, Result<StrongApproxReport, OrbitError>)> =
        primes.par_iter().map(|&p| (p, strong_approx_check(preset, p, cap))).collect();
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (p, r) in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(OrbitError::TooLarge { .. }) => skipped.push(p),
            Err(e) => return Err(e),
        }
    }
    Ok((reports, skipped))
}
