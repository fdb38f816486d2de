use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use orbit_sieve::apollonian::{enumerate_packing_capped, DescartesQuadruple};
use orbit_sieve::dt3m::{density_defect, ensemble_homology, omega_density_exact, summarize, HomologySample, HomologySummary};
use orbit_sieve::exactmath::{is_prime, primes_up_to, Primality};
use orbit_sieve::orbits::{
    derive_sub_seed, discover_exceptional, generate_finite_image, sample_walk, strong_approx_check, GroupPreset,
    OrbitError, Polynomial, WalkEnsemble,
};
use orbit_sieve::sieve::{almost_prime_table, legendre_sift, observe_omegas, AlmostPrimeReport, SieveSequence};
use orbit_sieve::spectral::{spectral_radius_auto, CayleyGraph, SpectralRow, DENSE_LIMIT};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, LoadedConfig, RunConfig, Subcommand};
use crate::report::{ReportWriter, TOOL, VERSION};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("{0}")]
    Compute(String),
}

impl RunError {
    fn compute(e: impl std::fmt::Display) -> Self {
        RunError::Compute(e.to_string())
    }
}

pub struct Outcome {
    pub complete: bool,
    pub written: Vec<PathBuf>,
}

pub struct RunOptions {
    pub out: PathBuf,
    pub resume: Option<PathBuf>,
}

pub fn run(sub: Subcommand, loaded: &LoadedConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let validated = loaded.validate(sub)?;
    let config = &loaded.config;
    if opts.resume.is_some() && !matches!(sub, Subcommand::Saturation | Subcommand::Dt3m) {
        return Err(RunError::Resume(format!("`{}` has no resumable state", sub.name())));
    }
    let mut w = ReportWriter::new(&opts.out, sub, config)?;
    let complete = match sub {
        Subcommand::Apollonian => apollonian(config, &mut w)?,
        Subcommand::Strongapprox => strongapprox(config, validated.group.as_ref().expect("validated"), &mut w)?,
        Subcommand::Spectral => spectral(config, validated.group.as_ref().expect("validated"), &mut w)?,
        Subcommand::Sieve => sieve(loaded, &mut w)?,
        Subcommand::Saturation => saturation(config, validated.group.as_ref().expect("validated"), opts, &mut w)?,
        Subcommand::Dt3m => dt3m(config, validated.group.as_ref().expect("validated"), opts, &mut w)?,
    };
    Ok(Outcome { complete, written: w.written })
}

fn rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn apollonian(config: &RunConfig, w: &mut ReportWriter) -> Result<bool, RunError> {
    let spec = config.apollonian.as_ref().expect("validated");
    let root = DescartesQuadruple::from_i64(spec.root).map_err(RunError::compute)?;
    let reduced = root.reduce_to_root().map_err(RunError::compute)?;
    let (packing, complete) =
        enumerate_packing_capped(&root, &BigInt::from(spec.bound), config.effort.bfs_cap).map_err(RunError::compute)?;
    let snapshot = w.dir().join("packing.txt");
    packing.write_snapshot(BufWriter::new(std::fs::File::create(&snapshot)?))?;
    w.written.push(snapshot);

    #[derive(Serialize)]
    struct Row {
        curvature: String,
        count: usize,
        prime: bool,
    }
    let rows: Vec<Row> = packing
        .curvature_counts()
        .into_iter()
        .map(|(c, count)| Row { prime: is_prime(&c) != Primality::Composite && c > BigInt::one(), curvature: c.to_string(), count })
        .collect();
    let prime_circles: usize = rows.iter().filter(|r| r.prime).map(|r| r.count).sum();
    let distinct_primes = rows.iter().filter(|r| r.prime).count();
    let seq = SieveSequence::from_packing(&packing);
    let sift = legendre_sift(&seq, &primes_up_to(spec.z), spec.z, config.effort.divisor_budget);
    let c = reduced.curvatures();
    w.json(
        "apollonian",
        complete,
        json!({
            "root": spec.root,
            "root_quadruple": [c[0].to_string(), c[1].to_string(), c[2].to_string(), c[3].to_string()],
            "bound": spec.bound,
            "circles": packing.curvatures().len(),
            "quadruples": packing.quadruples.len(),
            "distinct_curvatures": rows.len(),
            "prime_circles": prime_circles,
            "distinct_prime_curvatures": distinct_primes,
            "sieve": {
                "z": spec.z,
                "sieving_primes": sift.sieving_primes,
                "sifted": rational(&sift.direct),
                "sifted_fraction": (&sift.direct / seq.total_mass()).to_f64(),
            },
        }),
    )?;
    w.csv("apollonian", &rows, &["curvature", "count", "prime"])?;
    Ok(complete)
}

fn prime_range(range: [u64; 2]) -> Vec<u64> {
    if range[0] > range[1] {
        return Vec::new();
    }
    primes_up_to(range[1]).into_iter().filter(|&p| p >= range[0]).collect()
}

fn strongapprox(config: &RunConfig, preset: &GroupPreset, w: &mut ReportWriter) -> Result<bool, RunError> {
    let spec = config.strongapprox.as_ref().expect("validated");
    let cap = config.effort.enumeration_cap;
    let (mut reports, mut skipped) = if spec.primes[0] > spec.primes[1] {
        (Vec::new(), Vec::new())
    } else {
        discover_exceptional(preset, spec.primes[0], spec.primes[1], cap).map_err(RunError::compute)?
    };
    for &d in &spec.moduli {
        match strong_approx_check(preset, d, cap) {
            Ok(r) => reports.push(r),
            Err(OrbitError::TooLarge { .. }) => skipped.push(d),
            Err(e) => return Err(RunError::compute(e)),
        }
    }
    reports.sort_by_key(|r| r.modulus);
    reports.dedup_by_key(|r| r.modulus);
    skipped.sort_unstable();
    #[derive(Serialize)]
    struct Row {
        modulus: u64,
        image_size: usize,
        ambient_size: String,
        surjective: bool,
    }
    let rows: Vec<Row> = reports
        .iter()
        .map(|r| Row { modulus: r.modulus, image_size: r.image_size, ambient_size: r.ambient_size.to_string(), surjective: r.surjective })
        .collect();
    let failures: Vec<u64> = reports.iter().filter(|r| !r.surjective).map(|r| r.modulus).collect();
    let complete = skipped.is_empty();
    w.json(
        "strongapprox",
        complete,
        json!({
            "group": preset.name,
            "ambient": preset.ambient.to_string(),
            "failures": failures,
            "skipped_over_cap": skipped,
            "checks": rows,
        }),
    )?;
    w.csv("strongapprox", &rows, &["modulus", "image_size", "ambient_size", "surjective"])?;
    Ok(complete)
}

fn spectral(config: &RunConfig, preset: &GroupPreset, w: &mut ReportWriter) -> Result<bool, RunError> {
    let spec = config.spectral.as_ref().expect("validated");
    let mut moduli = prime_range(spec.primes);
    moduli.extend(&spec.moduli);
    moduli.sort_unstable();
    moduli.dedup();
    #[derive(Serialize)]
    struct Row {
        modulus: u64,
        exceptional: bool,
        group_size: usize,
        degree: usize,
        rho0: f64,
        bracket_low: f64,
        bracket_high: f64,
        method: &'static str,
        iterations: usize,
        converged: bool,
        spectrum_contained: bool,
        diameter: u32,
        girth_lower_bound: Option<u32>,
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for d in moduli {
        let table = match generate_finite_image(preset, d, config.effort.enumeration_cap) {
            Ok(t) => t,
            Err(OrbitError::TooLarge { .. }) => {
                skipped.push(d);
                continue;
            }
            Err(e) => return Err(RunError::compute(e)),
        };
        let graph = CayleyGraph::from_table(&table);
        let report = spectral_radius_auto(&graph, spec.tolerance, spec.max_iterations);
        let row = SpectralRow::new(&table, &report);
        rows.push(Row {
            modulus: d,
            exceptional: preset.is_exceptional_modulus(d),
            group_size: row.group_size,
            degree: report.degree,
            rho0: row.rho0,
            bracket_low: report.bracket.0,
            bracket_high: report.bracket.1,
            method: if table.len() <= DENSE_LIMIT { "dense" } else { "power" },
            iterations: report.iterations,
            converged: report.converged,
            spectrum_contained: report.spectrum_contained(1e-9),
            diameter: row.diameter,
            girth_lower_bound: row.girth_lower_bound,
        });
    }
    let complete = skipped.is_empty() && rows.iter().all(|r| r.converged);
    let sup = rows.iter().filter(|r| !r.exceptional).map(|r| r.rho0).fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))));
    w.json(
        "spectral",
        complete,
        json!({
            "group": preset.name,
            "rows": rows,
            "max_rho0_nonexceptional": sup,
            "skipped_over_cap": skipped,
        }),
    )?;
    w.csv(
        "spectral",
        &rows,
        &[
            "modulus",
            "exceptional",
            "group_size",
            "degree",
            "rho0",
            "bracket_low",
            "bracket_high",
            "method",
            "iterations",
            "converged",
            "spectrum_contained",
            "diameter",
            "girth_lower_bound",
        ],
    )?;
    Ok(complete)
}

fn read_integer_file(loaded: &LoadedConfig, path: &str) -> Result<Vec<BigInt>, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| loaded.error(Some("sieve"), "file", format!("cannot read {path}: {e}")))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let n: BigInt = body.parse().map_err(|_| ConfigError {
            path: path.to_string(),
            line: Some(i + 1),
            column: None,
            message: format!("not an integer: {body:?}"),
        })?;
        out.push(n);
    }
    Ok(out)
}

fn sieve(loaded: &LoadedConfig, w: &mut ReportWriter) -> Result<bool, RunError> {
    let config = &loaded.config;
    let spec = config.sieve.as_ref().expect("validated");
    let (source, seq) = if let Some([lo, hi]) = spec.range {
        (format!("range {lo}..={hi}"), SieveSequence::from_range(lo, hi))
    } else if let Some(path) = &spec.file {
        (format!("file {path}"), SieveSequence::from_integers(read_integer_file(loaded, path)?))
    } else {
        let text = spec.polynomial.as_deref().expect("validated");
        let f = Polynomial::parse(text, 1).map_err(RunError::compute)?;
        let x = spec.x.expect("validated");
        (format!("polynomial {text} on 1..={x}"), SieveSequence::from_polynomial(&f, x).map_err(RunError::compute)?)
    };
    let primes = primes_up_to(spec.z);
    let sift = legendre_sift(&seq, &primes, spec.z, config.effort.divisor_budget);
    #[derive(Serialize)]
    struct Row {
        prime: u64,
        sifted: String,
        fraction: Option<f64>,
    }
    let total = seq.total_mass().clone();
    let fraction = |q: &BigRational| if seq.is_empty() { None } else { (q / &total).to_f64() };
    let rows: Vec<Row> = sift
        .sieving_primes
        .iter()
        .map(|&p| {
            let s = legendre_sift(&seq, &primes, p + 1, 0).direct;
            Row { prime: p, fraction: fraction(&s), sifted: rational(&s) }
        })
        .collect();
    w.json(
        "sieve",
        true,
        json!({
            "source": source,
            "items": seq.len(),
            "zero_set": seq.zero_set().len(),
            "total_mass": rational(&total),
            "z": spec.z,
            "sieving_primes": sift.sieving_primes,
            "sifted": rational(&sift.direct),
            "sifted_count": sift.direct.is_integer().then(|| sift.direct.numer().to_string()),
            "sifted_fraction": fraction(&sift.direct),
            "inclusion_exclusion": sift.inclusion_exclusion.as_ref().map(rational),
            "divisor_budget_exceeded": sift.budget_exceeded,
        }),
    )?;
    w.csv("sieve", &rows, &["prime", "sifted", "fraction"])?;
    Ok(true)
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    tool: String,
    version: String,
    subcommand: String,
    config: Value,
    ensemble: WalkEnsemble,
    rows: Vec<Value>,
}

/// Extends one walk ensemble through the `ks` grid, evaluating `each` at
/// every grid point and checkpointing the ensemble plus finished rows.
fn drive_walks<T, F>(
    sub: Subcommand,
    config: &RunConfig,
    preset: &GroupPreset,
    ks: &[usize],
    samples: usize,
    opts: &RunOptions,
    mut each: F,
) -> Result<Vec<T>, RunError>
where
    T: Serialize + DeserializeOwned,
    F: FnMut(&WalkEnsemble) -> Result<T, RunError>,
{
    let config_value = serde_json::to_value(config).expect("config serializes");
    let (mut ensemble, mut rows): (WalkEnsemble, Vec<T>) = match &opts.resume {
        Some(path) => {
            let cp = load_checkpoint(path)?;
            if cp.subcommand != sub.name() || cp.config != config_value {
                return Err(RunError::Resume(format!("{} was written by a different run configuration", path.display())));
            }
            if cp.ensemble.preset_fingerprint != preset.fingerprint() || cp.ensemble.len() != samples || cp.rows.len() > ks.len() {
                return Err(RunError::Resume(format!("{} does not match the configured walks", path.display())));
            }
            let expected_steps = if cp.rows.is_empty() { 0 } else { ks[cp.rows.len() - 1] };
            if cp.ensemble.steps != expected_steps {
                return Err(RunError::Resume(format!("{} has inconsistent progress", path.display())));
            }
            let rows = cp
                .rows
                .into_iter()
                .map(serde_json::from_value)
                .collect::<Result<Vec<T>, _>>()
                .map_err(|e| RunError::Resume(e.to_string()))?;
            (cp.ensemble, rows)
        }
        None => (sample_walk(preset, 0, samples, config.seed), Vec::new()),
    };
    let mut last = Instant::now();
    for &k in &ks[rows.len()..] {
        ensemble.extend(preset, k - ensemble.steps).map_err(RunError::compute)?;
        rows.push(each(&ensemble)?);
        if let Some(secs) = config.checkpoint_seconds {
            if last.elapsed().as_secs() >= secs {
                let cp = Checkpoint {
                    tool: TOOL.into(),
                    version: VERSION.into(),
                    subcommand: sub.name().into(),
                    config: config_value.clone(),
                    ensemble: ensemble.clone(),
                    rows: rows.iter().map(|r| serde_json::to_value(r).expect("row serializes")).collect(),
                };
                let path = opts.out.join(format!("checkpoint-{}.json", sub.name()));
                let tmp = path.with_extension("json.tmp");
                std::fs::write(&tmp, serde_json::to_string(&cp).expect("checkpoint serializes"))?;
                std::fs::rename(&tmp, &path)?;
                last = Instant::now();
            }
        }
    }
    Ok(rows)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Resume(format!("{}: {e}", path.display())))?;
    let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| RunError::Resume(format!("{}: {e}", path.display())))?;
    if cp.tool != TOOL {
        return Err(RunError::Resume(format!("{} is not an {TOOL} checkpoint", path.display())));
    }
    Ok(cp)
}

#[derive(Serialize, Deserialize)]
struct SaturationStep {
    k: usize,
    zero_fraction: f64,
    table: Vec<AlmostPrimeReport>,
}

fn saturation(config: &RunConfig, preset: &GroupPreset, opts: &RunOptions, w: &mut ReportWriter) -> Result<bool, RunError> {
    let spec = config.saturation.as_ref().expect("validated");
    let f = Polynomial::parse(&spec.f, preset.dim()).map_err(RunError::compute)?;
    let x0: Vec<BigInt> = spec.x0.iter().map(|&v| BigInt::from(v)).collect();
    let effort = config.effort.factor_effort();
    let steps = drive_walks(Subcommand::Saturation, config, preset, &spec.k, spec.samples, opts, |e| {
        let obs = observe_omegas(e, &x0, &f, &effort).map_err(RunError::compute)?;
        let table = almost_prime_table(&obs, &spec.r);
        let zero_fraction = table.first().map_or(0.0, |t| t.zero_fraction);
        Ok(SaturationStep { k: e.steps, zero_fraction, table })
    })?;
    #[derive(Serialize)]
    struct Row {
        k: usize,
        r: u32,
        samples: usize,
        proven: usize,
        undecided: usize,
        zero: usize,
        fraction_lower: f64,
        fraction_upper: f64,
        standard_error: f64,
    }
    let rows: Vec<Row> = steps
        .iter()
        .flat_map(|s| {
            s.table.iter().map(move |t| Row {
                k: s.k,
                r: t.r,
                samples: t.samples,
                proven: t.proven,
                undecided: t.undecided,
                zero: t.zero,
                fraction_lower: t.fraction_lower,
                fraction_upper: t.fraction_upper,
                standard_error: t.standard_error,
            })
        })
        .collect();
    let complete = rows.iter().all(|r| r.undecided == 0);
    w.json("saturation", complete, json!({ "group": preset.name, "f": spec.f, "x0": spec.x0, "steps": steps }))?;
    w.csv(
        "saturation",
        &rows,
        &["k", "r", "samples", "proven", "undecided", "zero", "fraction_lower", "fraction_upper", "standard_error"],
    )?;
    Ok(complete)
}

#[derive(Serialize, Deserialize)]
struct Dt3mStep {
    summary: HomologySummary,
    samples: Vec<HomologySample>,
}

fn dt3m(config: &RunConfig, preset: &GroupPreset, opts: &RunOptions, w: &mut ReportWriter) -> Result<bool, RunError> {
    let spec = config.dt3m.as_ref().expect("validated");
    let effort = config.effort.factor_effort();
    let steps = drive_walks(Subcommand::Dt3m, config, preset, &spec.k, spec.samples, opts, |e| {
        let samples = ensemble_homology(e, spec.z, &effort).map_err(RunError::compute)?;
        Ok(Dt3mStep { summary: summarize(e.steps, &samples), samples })
    })?;
    let densities = spec
        .density_primes
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let seed = derive_sub_seed(config.seed ^ 0xd3_d3_d3, i as u64);
            omega_density_exact(spec.genus, p, config.effort.enumeration_cap, spec.density_samples, seed)
                .map_err(RunError::compute)
        })
        .collect::<Result<Vec<_>, _>>()?;
    #[derive(Serialize)]
    struct SampleRow {
        k: usize,
        index: usize,
        finite: bool,
        torsion_order: String,
        omega_order: Option<u32>,
        small_prime_divisors: usize,
        within_size_bound: bool,
    }
    let sample_rows: Vec<SampleRow> = steps
        .iter()
        .flat_map(|s| s.samples.iter())
        .map(|s| SampleRow {
            k: s.k,
            index: s.index,
            finite: s.finite,
            torsion_order: s.torsion_order.to_string(),
            omega_order: s.omega_order,
            small_prime_divisors: s.small_prime_divisors,
            within_size_bound: s.within_size_bound,
        })
        .collect();
    let unfactored = sample_rows.iter().filter(|s| s.finite && s.omega_order.is_none()).count();
    let summaries: Vec<&HomologySummary> = steps.iter().map(|s| &s.summary).collect();
    let density_json: Vec<Value> = densities
        .iter()
        .map(|d| {
            json!({
                "prime": d.prime,
                "exact": d.exact,
                "density": rational(&d.density),
                "density_f64": d.density.to_f64(),
                "omega_size": d.omega_size,
                "sample_size": d.sample_size,
                "confidence_interval": d.confidence_interval,
                "defect_times_p_squared": d.exact.then(|| density_defect(d)),
            })
        })
        .collect();
    let complete = unfactored == 0;
    w.json(
        "dt3m",
        complete,
        json!({
            "group": preset.name,
            "genus": spec.genus,
            "z": spec.z,
            "summaries": summaries,
            "omega_densities": density_json,
            "size_bound_violations": sample_rows.iter().filter(|s| !s.within_size_bound).count(),
            "unfactored_orders": unfactored,
        }),
    )?;
    #[derive(Serialize)]
    struct SummaryRow {
        k: usize,
        samples: usize,
        infinite: usize,
        infinite_fraction: f64,
        standard_error: f64,
        no_small_part_fraction: f64,
    }
    let rows: Vec<SummaryRow> = summaries
        .iter()
        .map(|s| SummaryRow {
            k: s.k,
            samples: s.samples,
            infinite: s.infinite,
            infinite_fraction: s.infinite_fraction,
            standard_error: s.standard_error,
            no_small_part_fraction: s.no_small_part_fraction,
        })
        .collect();
    w.csv("dt3m", &rows, &["k", "samples", "infinite", "infinite_fraction", "standard_error", "no_small_part_fraction"])?;
    w.csv(
        "dt3m_samples",
        &sample_rows,
        &["k", "index", "finite", "torsion_order", "omega_order", "small_prime_divisors", "within_size_bound"],
    )?;
    Ok(complete)
}
