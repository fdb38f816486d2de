use std::fmt;
use std::path::Path;

use orbit_sieve::exactmath::{FactorEffort, IntMatrix};
use orbit_sieve::orbits::{AmbientGroup, GroupPreset, Polynomial, DEFAULT_ENUMERATION_CAP};
use serde::{Deserialize, Serialize};

/// A config problem, located at a line of the config file when possible.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {}", self.path, self.message),
            (Some(l), None) => write!(f, "{}:{l}: {}", self.path, self.message),
            _ => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Apollonian,
    Strongapprox,
    Spectral,
    Sieve,
    Saturation,
    Dt3m,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Apollonian => "apollonian",
            Subcommand::Strongapprox => "strongapprox",
            Subcommand::Spectral => "spectral",
            Subcommand::Sieve => "sieve",
            Subcommand::Saturation => "saturation",
            Subcommand::Dt3m => "dt3m",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub seed: u64,
    /// Wall-clock seconds between walk-ensemble checkpoints; absent disables them.
    pub checkpoint_seconds: Option<u64>,
    pub group: Option<GroupSpec>,
    #[serde(default)]
    pub effort: EffortSpec,
    #[serde(default)]
    pub output: OutputSpec,
    pub apollonian: Option<ApollonianSpec>,
    pub strongapprox: Option<StrongApproxSpec>,
    pub spectral: Option<SpectralSpec>,
    pub sieve: Option<SieveSpec>,
    pub saturation: Option<SaturationSpec>,
    pub dt3m: Option<Dt3mSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    /// Built-in preset name.
    pub preset: Option<String>,
    /// `sl<m>`, `sp<2g>` or `o` with `gram`.
    pub ambient: Option<String>,
    pub gram: Option<Vec<Vec<i64>>>,
    pub matrices: Option<Vec<Vec<Vec<i64>>>>,
    #[serde(default)]
    pub exceptional: Vec<u64>,
    pub weights: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EffortSpec {
    pub trial_bound: u64,
    pub factor_bits: u64,
    pub rho_iterations: u64,
    pub rho_attempts: u32,
    pub enumeration_cap: usize,
    pub bfs_cap: usize,
    pub divisor_budget: usize,
}

impl Default for EffortSpec {
    fn default() -> Self {
        let f = FactorEffort::default();
        EffortSpec {
            trial_bound: f.trial_bound,
            factor_bits: f.max_cofactor_bits,
            rho_iterations: f.rho_iterations,
            rho_attempts: f.rho_attempts,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            bfs_cap: 10_000_000,
            divisor_budget: orbit_sieve::sieve::DEFAULT_DIVISOR_BUDGET,
        }
    }
}

impl EffortSpec {
    pub fn factor_effort(&self) -> FactorEffort {
        FactorEffort {
            trial_bound: self.trial_bound,
            max_cofactor_bits: self.factor_bits,
            rho_iterations: self.rho_iterations,
            rho_attempts: self.rho_attempts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub json: bool,
    pub csv: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { json: true, csv: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApollonianSpec {
    pub root: [i64; 4],
    pub bound: u64,
    #[serde(default = "default_z")]
    pub z: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrongApproxSpec {
    /// Inclusive prime range `[lo, hi]`.
    pub primes: [u64; 2],
    #[serde(default)]
    pub moduli: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSpec {
    pub primes: [u64; 2],
    #[serde(default)]
    pub moduli: Vec<u64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SieveSpec {
    /// Inclusive integer range.
    pub range: Option<[i64; 2]>,
    /// File of integers, one per line; `#` starts a comment.
    pub file: Option<String>,
    /// Univariate polynomial in `x0`, evaluated at `1..=x`.
    pub polynomial: Option<String>,
    pub x: Option<u64>,
    pub z: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationSpec {
    pub x0: Vec<i64>,
    pub f: String,
    pub k: Vec<usize>,
    pub samples: usize,
    pub r: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dt3mSpec {
    pub genus: usize,
    pub k: Vec<usize>,
    pub samples: usize,
    #[serde(default = "default_z")]
    pub z: u64,
    #[serde(default)]
    pub density_primes: Vec<u64>,
    #[serde(default = "default_density_samples")]
    pub density_samples: usize,
}

fn default_z() -> u64 {
    30
}

fn default_tolerance() -> f64 {
    orbit_sieve::spectral::DEFAULT_TOLERANCE
}

fn default_max_iterations() -> usize {
    orbit_sieve::spectral::DEFAULT_MAX_ITERATIONS
}

fn default_density_samples() -> usize {
    10_000
}

/// A parsed config together with its source text, for locating errors.
pub struct LoadedConfig {
    pub config: RunConfig,
    path: String,
    text: String,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: name.clone(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::from_str(&name, &text)
    }

    pub fn from_str(path: &str, text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            ConfigError { path: path.to_string(), line, column, message: e.message().to_string() }
        })?;
        Ok(LoadedConfig { config, path: path.to_string(), text: text.to_string() })
    }

    /// An error pointing at `key` inside `[section]` (or the top level).
    pub fn error(&self, section: Option<&str>, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            path: self.path.clone(),
            line: locate_key(&self.text, section, key),
            column: None,
            message: message.into(),
        }
    }

    /// Checks everything the chosen subcommand needs and builds the group.
    pub fn validate(&self, sub: Subcommand) -> Result<Validated, ConfigError> {
        let c = &self.config;
        if let Some(s) = c.subcommand {
            if s != sub {
                return Err(self.error(None, "subcommand", format!("config is for `{}`, not `{}`", s.name(), sub.name())));
            }
        }
        let e = &c.effort;
        if e.enumeration_cap == 0 {
            return Err(self.error(Some("effort"), "enumeration_cap", "must be positive"));
        }
        if e.trial_bound < 2 {
            return Err(self.error(Some("effort"), "trial_bound", "must be at least 2"));
        }
        let missing = |name: &str| ConfigError {
            path: self.path.clone(),
            line: None,
            column: None,
            message: format!("missing [{name}] section"),
        };
        let mut group = None;
        match sub {
            Subcommand::Apollonian => {
                let a = c.apollonian.as_ref().ok_or_else(|| missing("apollonian"))?;
                let q = a.root;
                let big = q.iter().map(|&x| x as i128);
                let (s, s2): (i128, i128) = big.fold((0, 0), |(s, s2), x| (s + x, s2 + x * x));
                if s * s != 2 * s2 {
                    return Err(self.error(Some("apollonian"), "root", format!("{q:?} is not a Descartes quadruple")));
                }
                if a.bound < q.iter().copied().max().unwrap_or(0).max(0) as u64 {
                    return Err(self.error(Some("apollonian"), "bound", "bound is below the root curvatures"));
                }
            }
            Subcommand::Strongapprox => {
                let s = c.strongapprox.as_ref().ok_or_else(|| missing("strongapprox"))?;
                self.check_moduli("strongapprox", &s.moduli)?;
                group = Some(self.group()?);
            }
            Subcommand::Spectral => {
                let s = c.spectral.as_ref().ok_or_else(|| missing("spectral"))?;
                if s.tolerance.is_nan() || s.tolerance <= 0.0 {
                    return Err(self.error(Some("spectral"), "tolerance", "must be positive"));
                }
                self.check_moduli("spectral", &s.moduli)?;
                group = Some(self.group()?);
            }
            Subcommand::Sieve => {
                let s = c.sieve.as_ref().ok_or_else(|| missing("sieve"))?;
                let sources = [s.range.is_some(), s.file.is_some(), s.polynomial.is_some()].iter().filter(|&&b| b).count();
                if sources != 1 {
                    return Err(self.error(Some("sieve"), "z", "give exactly one of `range`, `file` or `polynomial`"));
                }
                if let Some(p) = &s.polynomial {
                    Polynomial::parse(p, 1).map_err(|e| self.error(Some("sieve"), "polynomial", e.to_string()))?;
                    if s.x.is_none() {
                        return Err(self.error(Some("sieve"), "polynomial", "`polynomial` needs `x`"));
                    }
                }
            }
            Subcommand::Saturation => {
                let s = c.saturation.as_ref().ok_or_else(|| missing("saturation"))?;
                let g = self.group()?;
                if s.x0.len() != g.dim() {
                    return Err(self.error(
                        Some("saturation"),
                        "x0",
                        format!("x0 has {} entries but the group acts on dimension {}", s.x0.len(), g.dim()),
                    ));
                }
                Polynomial::parse(&s.f, g.dim()).map_err(|e| self.error(Some("saturation"), "f", e.to_string()))?;
                self.check_grid("saturation", &s.k)?;
                if s.r.is_empty() {
                    return Err(self.error(Some("saturation"), "r", "at least one r is needed"));
                }
                group = Some(g);
            }
            Subcommand::Dt3m => {
                let s = c.dt3m.as_ref().ok_or_else(|| missing("dt3m"))?;
                if s.genus == 0 || s.genus > 4 {
                    return Err(self.error(Some("dt3m"), "genus", "genus must be between 1 and 4"));
                }
                self.check_grid("dt3m", &s.k)?;
                for &p in &s.density_primes {
                    if !orbit_sieve::exactmath::is_prime_u64(p) || p >= 1 << 31 {
                        return Err(self.error(Some("dt3m"), "density_primes", format!("{p} is not a prime below 2^31")));
                    }
                }
                let g = match &c.group {
                    Some(_) => self.group()?,
                    None => GroupPreset::symplectic_transvections(s.genus),
                };
                if g.ambient != (AmbientGroup::Symplectic { g: s.genus }) {
                    return Err(self.error(Some("group"), "preset", format!("dt3m needs a subgroup of Sp_{}", 2 * s.genus)));
                }
                group = Some(g);
            }
        }
        Ok(Validated { group })
    }

    fn check_moduli(&self, section: &str, moduli: &[u64]) -> Result<(), ConfigError> {
        for &d in moduli {
            if !(2..1 << 31).contains(&d) || !orbit_sieve::exactmath::is_squarefree_u64(d) {
                return Err(self.error(Some(section), "moduli", format!("{d} is not a squarefree modulus in [2, 2^31)")));
            }
        }
        Ok(())
    }

    fn check_grid(&self, section: &str, ks: &[usize]) -> Result<(), ConfigError> {
        if ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(self.error(Some(section), "k", "the k grid must be strictly increasing"));
        }
        Ok(())
    }

    fn group(&self) -> Result<GroupPreset, ConfigError> {
        let g = self.config.group.as_ref().ok_or_else(|| ConfigError {
            path: self.path.clone(),
            line: None,
            column: None,
            message: "missing [group] section".into(),
        })?;
        let err = |key: &str, m: String| self.error(Some("group"), key, m);
        let base = match (&g.preset, &g.matrices) {
            (Some(name), None) => {
                GroupPreset::builtin(name).ok_or_else(|| err("preset", format!("unknown preset {name:?}")))?
            }
            (None, Some(ms)) => {
                let ambient = match g.ambient.as_deref() {
                    Some("o") => {
                        let gram = g.gram.as_ref().ok_or_else(|| err("ambient", "orthogonal ambient needs `gram`".into()))?;
                        AmbientGroup::Orthogonal {
                            gram: IntMatrix::from_rows(gram).map_err(|e| err("gram", e.to_string()))?,
                        }
                    }
                    Some(a) if a.starts_with("sl") => AmbientGroup::SpecialLinear {
                        m: a[2..].parse().map_err(|_| err("ambient", format!("bad ambient {a:?}")))?,
                    },
                    Some(a) if a.starts_with("sp") => {
                        let n: usize = a[2..].parse().map_err(|_| err("ambient", format!("bad ambient {a:?}")))?;
                        if n == 0 || n % 2 == 1 {
                            return Err(err("ambient", format!("bad ambient {a:?}")));
                        }
                        AmbientGroup::Symplectic { g: n / 2 }
                    }
                    other => return Err(err("ambient", format!("ambient must be sl<m>, sp<2g> or o, got {other:?}"))),
                };
                let gens = ms
                    .iter()
                    .map(|m| IntMatrix::from_rows(m))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| err("matrices", e.to_string()))?;
                GroupPreset::new("inline", ambient, gens, g.exceptional.clone()).map_err(|e| err("matrices", e.to_string()))?
            }
            _ => return Err(err("preset", "give exactly one of `preset` or `matrices`".into())),
        };
        match &g.weights {
            Some(w) => base.weighted(w).map_err(|e| err("weights", e.to_string())),
            None => Ok(base),
        }
    }
}

pub struct Validated {
    pub group: Option<GroupPreset>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

/// 1-based line of `key = ...` inside `[section]`, or of the section header
/// when the key is absent.
fn locate_key(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = Some(name.trim().to_string());
            if Some(name.trim()) == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current.as_deref() == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "seed = 1\n[sieve]\nrange = [1, 30]\nz = \"six\"\n";
        let err = LoadedConfig::from_str("c.toml", text).err().unwrap();
        assert_eq!(err.line, Some(4));
        let err = LoadedConfig::from_str("c.toml", "seed = 1\nbogus = 2\n").err().unwrap();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn validation_errors_point_at_the_key() {
        let text = "[group]\npreset = \"lubotzky\"\n\n[saturation]\nx0 = [1, 2, 3]\nf = \"x0*x1\"\nk = [5]\nsamples = 10\nr = [1]\n";
        let c = LoadedConfig::from_str("c.toml", text).unwrap();
        let err = c.validate(Subcommand::Saturation).err().unwrap();
        assert_eq!(err.line, Some(5));
        assert!(err.to_string().starts_with("c.toml:5:"));
    }

    #[test]
    fn inline_matrices_build_a_group() {
        let text = "[group]\nambient = \"sl2\"\nmatrices = [[[1,0],[0,1]], [[1,2],[0,1]], [[1,-2],[0,1]]]\n[strongapprox]\nprimes = [2, 5]\n";
        let c = LoadedConfig::from_str("c.toml", text).unwrap();
        let v = c.validate(Subcommand::Strongapprox).unwrap();
        assert_eq!(v.group.unwrap().generators().len(), 3);
    }

    #[test]
    fn mismatched_subcommand_is_rejected() {
        let c = LoadedConfig::from_str("c.toml", "subcommand = \"sieve\"\n[sieve]\nrange=[1,2]\nz=3\n").unwrap();
        assert_eq!(c.validate(Subcommand::Dt3m).err().unwrap().line, Some(1));
    }
}
