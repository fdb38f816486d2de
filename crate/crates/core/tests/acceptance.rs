//! Acceptance checks. Runs without the libtest harness and prints one
//! `PASS` or `FAIL` line per criterion; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use orbit_sieve::apollonian::{descartes_form, enumerate_packing, DescartesQuadruple};
use orbit_sieve::dt3m::{homology_group, homology_mod_p, omega_density_exact, HeegaardDatum};
use orbit_sieve::exactmath::{is_squarefree_u64, primes_up_to, FactorEffort};
use orbit_sieve::orbits::{generate_finite_image, sample_walk, strong_approx_check, GroupPreset, Polynomial};
use orbit_sieve::sieve::{
    almost_prime_table, classical_oracle, dimension_estimate, hardy_ramanujan, legendre_sift, observe_omegas,
    poly_local_densities, prime_count_baseline, SieveSequence, DEFAULT_DIVISOR_BUDGET,
};
use orbit_sieve::spectral::{
    dense_spectrum, equidistribution_profile, mean_zero_spectral_radius, spectral_radius_auto, CayleyGraph,
    DEFAULT_MAX_ITERATIONS, DENSE_LIMIT,
};

const CAP: usize = 2_000_000;
const RHO_MATCH: f64 = 1e-8;
const EQUIDIST_SLACK: f64 = 1e-9;
const SPECTRUM_EPS: f64 = 1e-9;
const KAPPA_TOLERANCE: f64 = 0.15;
const HR_CONSTANT: f64 = 3.0;
const PRIME_COUNT_TOLERANCE: f64 = 0.10;
const SEED_SIGMAS: f64 = 3.0;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn descartes() -> Outcome {
    let root = [-6i64, 11, 14, 15].map(BigInt::from);
    ensure(descartes_form(&root).is_zero(), || "Q(-6,11,14,15) != 0".into())?;
    let q0 = DescartesQuadruple::new(root).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut reflections = 0;
    for _ in 0..100 {
        let mut q = q0.clone();
        for _ in 0..100 {
            let i = rng.gen_range(0..4);
            let next = q.reflect(i).map_err(|e| e.to_string())?;
            ensure(descartes_form(next.curvatures()).is_zero(), || format!("Q != 0 after reflection {reflections}"))?;
            ensure(next.reflect(i).map_err(|e| e.to_string())? == q, || format!("s_{i}^2 != 1"))?;
            q = next;
            reflections += 1;
        }
    }
    Ok(format!("Q = 0 at the root and after {reflections} random reflections; s_i^2 = 1"))
}

fn packing() -> Outcome {
    let root = DescartesQuadruple::from_i64([-6, 11, 14, 15]).map_err(|e| e.to_string())?;
    let p = enumerate_packing(&root, &BigInt::from(100)).map_err(|e| e.to_string())?;
    let c23 = BigInt::from(23);
    let count = p.curvature_counts().get(&c23).copied().unwrap_or(0);
    ensure(count > 0, || "curvature 23 missing".into())?;
    ensure(p.has_tangent_pair(&BigInt::from(11), &c23), || "no quadruple with 11 and 23".into())?;
    Ok(format!("23 occurs {count} time(s) below 100; (11, 23) are tangent"))
}

fn strong_approximation() -> Outcome {
    let l = GroupPreset::lubotzky();
    let mut sizes = Vec::new();
    for p in [2, 5, 7, 11, 13, 10] {
        let r = strong_approx_check(&l, p, CAP).map_err(|e| e.to_string())?;
        ensure(r.surjective, || format!("not surjective mod {p}: {} of {}", r.image_size, r.ambient_size))?;
        sizes.push(format!("{p}:{}", r.image_size));
    }
    let t3 = generate_finite_image(&l, 3, CAP).map_err(|e| e.to_string())?;
    ensure(t3.len() == 1, || format!("image mod 3 has {} elements", t3.len()))?;
    Ok(format!("surjective images {} ; trivial mod 3", sizes.join(" ")))
}

fn markov_spectrum() -> Outcome {
    let l = GroupPreset::lubotzky();
    let lower = -1.0 + 2.0 / 5.0;
    let mut worst_rho: f64 = 0.0;
    let mut worst_match: f64 = 0.0;
    let mut dense_checked = Vec::new();
    for p in primes_up_to(31).into_iter().filter(|&p| p != 3) {
        let t = generate_finite_image(&l, p, CAP).map_err(|e| e.to_string())?;
        let g = CayleyGraph::from_table(&t);
        ensure((g.lower_spectral_edge() - lower).abs() < 1e-15, || format!("lower edge mod {p}"))?;
        let r = mean_zero_spectral_radius(&g, 1e-12, DEFAULT_MAX_ITERATIONS);
        ensure(r.converged, || format!("iteration did not converge mod {p}"))?;
        ensure(r.rho0 < 1.0, || format!("rho0 = {} mod {p}", r.rho0))?;
        ensure(r.spectrum_contained(SPECTRUM_EPS), || format!("Ritz values escape [{lower}, 1] mod {p}"))?;
        worst_rho = worst_rho.max(r.rho0);
        if t.len() <= DENSE_LIMIT {
            let (spec, rho) = dense_spectrum(&g).map_err(|e| e.to_string())?;
            ensure(spec.iter().all(|&x| x >= lower - SPECTRUM_EPS && x <= 1.0 + SPECTRUM_EPS), || {
                format!("dense spectrum escapes mod {p}: [{}, {}]", spec[0], spec[spec.len() - 1])
            })?;
            let diff = (rho - r.rho0).abs();
            ensure(diff <= RHO_MATCH, || format!("iteration {} vs dense {rho} mod {p}", r.rho0))?;
            worst_match = worst_match.max(diff);
            dense_checked.push(p);
        }
    }
    Ok(format!(
        "max rho0 = {worst_rho:.6} over p <= 31; iteration vs dense for p in {dense_checked:?}, max diff {worst_match:.2e}"
    ))
}

fn equidistribution() -> Outcome {
    let l = GroupPreset::lubotzky();
    let mut summary = Vec::new();
    for d in [2u64, 5, 7, 10, 35] {
        let t = generate_finite_image(&l, d, CAP).map_err(|e| e.to_string())?;
        let r = spectral_radius_auto(&CayleyGraph::from_table(&t), 1e-12, DEFAULT_MAX_ITERATIONS);
        let rho = r.bracket.1;
        let prof = equidistribution_profile(&t, rho, 40, EQUIDIST_SLACK);
        if let Some(bad) = prof.iter().find(|p| !p.holds) {
            return Err(format!("d = {d}, k = {}: error {} > bound {}", bad.k, bad.max_error, bad.bound));
        }
        summary.push(format!("d={d} rho={rho:.4} err(40)={:.2e}", prof[40].max_error));
    }
    Ok(summary.join("; "))
}

fn sieve_identity() -> Outcome {
    let seq = SieveSequence::from_range(1, 10_000);
    let primes = primes_up_to(30);
    let r = legendre_sift(&seq, &primes, 30, DEFAULT_DIVISOR_BUDGET);
    let ie = r.inclusion_exclusion.clone().ok_or("inclusion-exclusion skipped")?;
    let p30: u64 = primes.iter().product();
    let scan = (1..=10_000u64).filter(|n| n.gcd(&p30) == 1).count();
    let scan = BigRational::from_integer(BigInt::from(scan));
    ensure(ie == r.direct && r.direct == scan, || format!("{ie} vs {} vs {scan}", r.direct))?;
    let f = Polynomial::univariate(&[1, 0, 1]);
    let mut checks = 0;
    for x in [1_000u64, 10_000] {
        let seq = SieveSequence::from_polynomial(&f, x).map_err(|e| e.to_string())?;
        for d in (1..=100).filter(|&d| is_squarefree_u64(d)) {
            let c = classical_oracle(&seq, &f, x, d).map_err(|e| e.to_string())?;
            ensure(c.holds, || format!("|S_d - rho(d)X/d| > rho(d) at d = {d}, X = {x}"))?;
            checks += 1;
        }
    }
    Ok(format!("S(1..10^4, 30) = {scan} by both methods; {checks} classical checks hold"))
}

fn sieve_dimension() -> Outcome {
    let f = Polynomial::univariate(&[1, 0, 1]);
    let ds = poly_local_densities(&f, 100_000).map_err(|e| e.to_string())?;
    let fit = dimension_estimate(&ds).map_err(|e| e.to_string())?;
    ensure((fit.kappa - 1.0).abs() <= KAPPA_TOLERANCE, || format!("kappa = {}", fit.kappa))?;
    Ok(format!("kappa = {:.4} from {} primes", fit.kappa, fit.primes_used))
}

fn dt_density() -> Outcome {
    let mut out = Vec::new();
    for p in [2u64, 3, 5, 7] {
        let d = omega_density_exact(1, p, CAP, 0, 0).map_err(|e| e.to_string())?;
        let expect = BigRational::new(BigInt::one(), BigInt::from(p + 1));
        ensure(d.exact && d.density == expect, || format!("p = {p}: {} vs {expect}", d.density))?;
        out.push(format!("{}/{}", d.omega_size, d.sample_size));
    }
    Ok(format!("|Omega_p|/|SL2(F_p)| = {}", out.join(", ")))
}

fn dt_homology() -> Outcome {
    let mut n = 0;
    for g in 1..=2 {
        let id = homology_group(&HeegaardDatum::identity(g));
        ensure(id.free_rank == g, || format!("identity in genus {g} has free rank {}", id.free_rank))?;
        let preset = GroupPreset::symplectic_transvections(g);
        for (j, k) in [3usize, 10, 30, 60, 100].into_iter().enumerate() {
            for phi in sample_walk(&preset, k, 100, 10 * g as u64 + j as u64).samples {
                let datum = HeegaardDatum::new(g, phi).map_err(|e| e.to_string())?;
                let h = homology_group(&datum);
                for p in [2, 3, 5] {
                    let (a, b) = (homology_mod_p(&datum, p), h.dimension_mod(p));
                    ensure(a == b, || format!("genus {g}, k = {k}, p = {p}: {a} vs {b}"))?;
                }
                n += 1;
            }
        }
    }
    Ok(format!("{n} samples agree mod 2, 3, 5; identity has free rank g"))
}

fn baselines() -> Outcome {
    let x = 100_000u64;
    let hr = hardy_ramanujan(x);
    ensure(hr.ratio <= HR_CONSTANT, || format!("Hardy-Ramanujan ratio {}", hr.ratio))?;
    let pc = prime_count_baseline(x);
    let vs_approx = (pc.pi as f64 - pc.approximation).abs() / pc.approximation;
    println!(
        "  prime count: pi(X) = {}, X/log X = {:.1}; |diff|/pi(X) = {:.4}, |diff|/(X/log X) = {:.4}",
        pc.pi, pc.approximation, pc.relative_error, vs_approx
    );
    ensure(pc.relative_error <= PRIME_COUNT_TOLERANCE, || format!("relative error {}", pc.relative_error))?;
    Ok(format!("HR ratio {:.4} <= {HR_CONSTANT}; pi(X) relative error {:.4}", hr.ratio, pc.relative_error))
}

fn saturation() -> Outcome {
    let l = GroupPreset::lubotzky();
    let x0 = [BigInt::from(1), BigInt::from(2)];
    let f = Polynomial::product_of_coordinates(2);
    let rs = [1u32, 2, 3, 4, 6, 8];
    let tables: Vec<_> = [1u64, 2]
        .iter()
        .map(|&seed| {
            let e = sample_walk(&l, 20, 10_000, seed);
            observe_omegas(&e, &x0, &f, &FactorEffort::default()).map(|o| almost_prime_table(&o, &rs))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for t in &tables {
        ensure(t.iter().all(|r| r.undecided == 0), || "unfactored values".into())?;
        ensure(t.iter().all(|r| r.fraction_lower > 0.0), || "zero fraction".into())?;
        ensure(t.windows(2).all(|w| w[0].fraction_lower <= w[1].fraction_lower), || "fraction decreases in r".into())?;
    }
    let mut worst: f64 = 0.0;
    for (a, b) in tables[0].iter().zip(&tables[1]) {
        let se = (a.standard_error.powi(2) + b.standard_error.powi(2)).sqrt();
        let z = if se > 0.0 { (a.fraction_lower - b.fraction_lower).abs() / se } else { 0.0 };
        ensure(z <= SEED_SIGMAS, || format!("r = {}: seeds differ by {z:.2} sigma", a.r))?;
        worst = worst.max(z);
    }
    let fr: Vec<String> = tables[0].iter().map(|r| format!("r={}:{:.4}", r.r, r.fraction_lower)).collect();
    Ok(format!("{}; seeds agree within {worst:.2} sigma", fr.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("descartes invariant", descartes),
        ("packing ground truth", packing),
        ("strong approximation for L", strong_approximation),
        ("markov spectrum", markov_spectrum),
        ("equidistribution bound", equidistribution),
        ("sieve identity", sieve_identity),
        ("sieve dimension", sieve_dimension),
        ("dt density", dt_density),
        ("dt homology consistency", dt_homology),
        ("baselines", baselines),
        ("saturation", saturation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
