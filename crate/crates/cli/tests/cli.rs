use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn orbsieve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbsieve")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &Path, sub: &str, config: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap().to_string();
    let cfg = config.to_str().unwrap().to_string();
    let mut args = vec![sub, "--config", &cfg, "--out", &out];
    args.extend_from_slice(extra);
    orbsieve(&args)
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()).unwrap()
}

#[test]
fn strongapprox_on_lubotzky_finds_only_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[group]\npreset = \"lubotzky\"\n\n[strongapprox]\nprimes = [2, 13]\n");
    let o = run_in(tmp.path(), "strongapprox", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path(), "strongapprox");
    assert_eq!(r["report"]["failures"], serde_json::json!([3]));
    assert_eq!(r["report"]["checks"].as_array().unwrap().len(), 6);
    assert_eq!(r["complete"], true);
    assert_eq!(r["metadata"]["config"]["strongapprox"]["primes"], serde_json::json!([2, 13]));
    assert!(r["metadata"]["version"].is_string());
}

#[test]
fn empty_prime_range_is_a_noop() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[group]\npreset = \"lubotzky\"\n[strongapprox]\nprimes = [14, 16]\n");
    let o = run_in(tmp.path(), "strongapprox", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(tmp.path(), "strongapprox");
    assert_eq!(r["report"]["checks"], serde_json::json!([]));
    let cfg = write_config(tmp.path(), "[group]\npreset = \"lubotzky\"\n[spectral]\nprimes = [20, 10]\n");
    let o = run_in(tmp.path(), "spectral", &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(tmp.path(), "spectral")["report"]["rows"], serde_json::json!([]));
}

#[test]
fn sieve_on_an_integer_file() {
    let tmp = tempfile::tempdir().unwrap();
    let ints: String = (1..=30).map(|n| format!("{n}\n")).collect();
    fs::write(tmp.path().join("ints.txt"), format!("# the integers 1..30\n{ints}")).unwrap();
    let file = tmp.path().join("ints.txt");
    let cfg = write_config(tmp.path(), &format!("[sieve]\nfile = {:?}\nz = 6\n", file.to_str().unwrap()));
    let o = run_in(tmp.path(), "sieve", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path(), "sieve");
    assert_eq!(r["report"]["sifted_count"], "8");
    assert_eq!(r["report"]["inclusion_exclusion"], "8");
    assert_eq!(r["report"]["sieving_primes"], serde_json::json!([2, 3, 5]));
    let csv = fs::read_to_string(tmp.path().join("sieve.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# {"));
    assert_eq!(lines[1], "prime,sifted,fraction");
    assert!(lines[4].starts_with("5,8,"));
}

#[test]
fn invalid_config_exits_two_with_a_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sieve]\nrange = [1, 30]\nz = six\n");
    let o = run_in(tmp.path(), "sieve", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("run.toml:3:"), "{err}");

    let cfg = write_config(tmp.path(), "[group]\npreset = \"nope\"\n[strongapprox]\nprimes = [2, 5]\n");
    let o = run_in(tmp.path(), "strongapprox", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.toml:2:"));

    let o = orbsieve(&["sieve", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn effort_bound_exhaustion_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[group]\npreset = \"lubotzky\"\n[effort]\nenumeration_cap = 100\n[strongapprox]\nprimes = [2, 7]\n",
    );
    let o = run_in(tmp.path(), "strongapprox", &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    let r = report(tmp.path(), "strongapprox");
    assert_eq!(r["complete"], false);
    assert_eq!(r["report"]["skipped_over_cap"], serde_json::json!([5, 7]));
}

const SATURATION: &str = "seed = 11\ncheckpoint_seconds = 0\n[group]\npreset = \"lubotzky\"\n\n[saturation]\nx0 = [1, 2]\nf = \"x0*x1\"\nk = [2, 5, 8]\nsamples = 200\nr = [2, 4, 8]\n";

#[test]
fn outputs_are_identical_across_worker_counts_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SATURATION);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert!(run_in(&a, "saturation", &cfg, &["--workers", "1"]).status.success());
    assert!(run_in(&b, "saturation", &cfg, &["--workers", "4"]).status.success());
    for f in ["saturation.json", "saturation.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let snapshot = a.join("checkpoint-saturation.json");
    assert!(snapshot.exists());
    let o = run_in(&c, "saturation", &cfg, &["--resume", snapshot.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(a.join("saturation.json")).unwrap(), fs::read(c.join("saturation.json")).unwrap());

    let other = tmp.path().join("other.toml");
    fs::write(&other, SATURATION.replace("seed = 11", "seed = 12")).unwrap();
    let o = run_in(&c, "saturation", &other, &["--resume", snapshot.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot resume"));
}

#[test]
fn seed_flag_overrides_config_and_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SATURATION);
    let a = tmp.path().join("a");
    assert!(run_in(&a, "saturation", &cfg, &["--seed", "99"]).status.success());
    let r = report(&a, "saturation");
    assert_eq!(r["metadata"]["seed"], 99);
    assert_eq!(r["metadata"]["config"]["seed"], 99);
    let table = &r["report"]["steps"][2]["table"];
    let fr: Vec<f64> = table.as_array().unwrap().iter().map(|t| t["fraction_lower"].as_f64().unwrap()).collect();
    assert!(fr.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn apollonian_packing_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[apollonian]\nroot = [-6, 11, 14, 15]\nbound = 200\nz = 10\n");
    let o = run_in(tmp.path(), "apollonian", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path(), "apollonian");
    assert_eq!(r["report"]["root_quadruple"], serde_json::json!(["-6", "11", "14", "15"]));
    let csv = fs::read_to_string(tmp.path().join("apollonian.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "23,1,true" || l.starts_with("23,")));
    assert!(tmp.path().join("packing.txt").exists());

    let cfg = write_config(tmp.path(), "[effort]\nbfs_cap = 5\n[apollonian]\nroot = [-6, 11, 14, 15]\nbound = 200\n");
    let o = run_in(tmp.path(), "apollonian", &cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(report(tmp.path(), "apollonian")["complete"], false);
}

#[test]
fn spectral_and_dt3m_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[group]\npreset = \"lubotzky\"\n[spectral]\nprimes = [2, 7]\nmoduli = [10]\n");
    let o = run_in(tmp.path(), "spectral", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = report(tmp.path(), "spectral")["report"]["rows"].as_array().unwrap().clone();
    assert_eq!(rows.iter().map(|r| r["modulus"].as_u64().unwrap()).collect::<Vec<_>>(), vec![2, 3, 5, 7, 10]);
    assert!(rows.iter().all(|r| r["rho0"].as_f64().unwrap() < 1.0));

    let cfg = write_config(tmp.path(), "[dt3m]\ngenus = 1\nk = [1, 10]\nsamples = 100\ndensity_primes = [2, 3]\n");
    let o = run_in(tmp.path(), "dt3m", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(tmp.path(), "dt3m");
    assert_eq!(r["report"]["omega_densities"][0]["density"], "1/3");
    assert_eq!(r["report"]["omega_densities"][1]["density"], "1/4");
    assert_eq!(r["report"]["size_bound_violations"], 0);
    let samples = fs::read_to_string(tmp.path().join("dt3m_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 2 + 200);
}
