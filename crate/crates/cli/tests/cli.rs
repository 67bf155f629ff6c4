use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hyperchaos"));
    c.env_remove("HYPERCHAOS_OUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out").arg(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "{}\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn csv_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect()
}

#[test]
fn generate_ascii_length_contract() {
    let d = TempDir::new().unwrap();
    ok(run(d.path(), &["generate", "--bits", "1000000", "--format", "ascii"]));
    for k in 1..=5 {
        let text = fs::read_to_string(d.path().join(format!("B{k}.txt"))).unwrap();
        let digits = text.bytes().filter(|b| matches!(b, b'0' | b'1')).count();
        assert_eq!(digits, 1_000_000);
        assert_eq!(text.len(), 1_000_001);
        assert!(text.ends_with('\n'));
    }
}

#[test]
fn generate_is_deterministic_and_backend_sensitive() {
    let (a, b, c) = (TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["generate", "--bits", "200000"];
    ok(run(a.path(), &args));
    ok(run(b.path(), &args));
    ok(run(c.path(), &[&args[..], &["--backend", "double"]].concat()));
    for k in 1..=5 {
        let name = format!("B{k}.bin");
        let fa = fs::read(a.path().join(&name)).unwrap();
        assert_eq!(fa.len(), 25_000);
        assert_eq!(fa, fs::read(b.path().join(&name)).unwrap());
        assert_ne!(fa, fs::read(c.path().join(&name)).unwrap());
    }
}

#[test]
fn generate_subset() {
    let d = TempDir::new().unwrap();
    ok(run(d.path(), &["generate", "--bits", "64", "--streams", "B2,B5"]));
    let mut names: Vec<_> = fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["B2.bin", "B5.bin"]);
}

#[test]
fn printed_configuration_reproduces_the_run() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let out = ok(run(a.path(), &["generate", "--bits", "5000", "--c", "0.01", "--discard", "50"]));
    let cfg_path = b.path().join("run.cfg");
    let cfg = out.replace(&a.path().display().to_string(), &b.path().display().to_string());
    fs::write(&cfg_path, cfg.lines().filter(|l| !l.contains("->")).collect::<Vec<_>>().join("\n")).unwrap();
    ok(bin().args(["generate", "--config"]).arg(&cfg_path).output().unwrap());
    for k in 1..=5 {
        let name = format!("B{k}.bin");
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn flags_override_file_and_env_sets_output() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "c = 0.3\nbits = 100\nformat = ascii\n").unwrap();
    let out = ok(bin()
        .args(["generate", "--bits", "240", "--config"])
        .arg(&cfg)
        .env("HYPERCHAOS_OUT_DIR", d.path())
        .output()
        .unwrap());
    assert!(out.contains("c=0.3\n") && out.contains("bits=240\n") && out.contains("format=ascii\n"));
    assert_eq!(fs::read_to_string(d.path().join("B1.txt")).unwrap().trim().len(), 240);
}

#[test]
fn stability_classification() {
    let d = TempDir::new().unwrap();
    assert!(ok(run(d.path(), &["analyze", "stability", "--c", "0.6"])).contains("classification: Stable"));
    assert!(ok(run(d.path(), &["analyze", "stability", "--c", "0.2"])).contains("classification: Unstable"));
}

#[test]
fn lyapunov_sum_is_minus_one() {
    let d = TempDir::new().unwrap();
    ok(run(d.path(), &["analyze", "lyapunov", "--t", "2000"]));
    let rows = csv_rows(&d.path().join("lyapunov.csv"));
    assert_eq!(rows.len(), 1);
    let v: Vec<f64> = rows[0].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(v.len(), 7);
    assert!((v[1..6].iter().sum::<f64>() + 1.0).abs() < 1e-3);
}

#[test]
fn bifurcation_row_contract() {
    let d = TempDir::new().unwrap();
    ok(run(
        d.path(),
        &["analyze", "bifurcation", "--c-min", "0", "--c-max", "1", "--points", "200", "--transient", "100", "--capture", "50"],
    ));
    let rows = csv_rows(&d.path().join("bifurcation.csv"));
    assert!(rows.len() >= 200);
    let cs: std::collections::BTreeSet<_> = rows.iter().map(|r| r.split(',').next().unwrap().to_string()).collect();
    assert_eq!(cs.len(), 200);
}

#[test]
fn poincare_and_trajectory_exports() {
    let d = TempDir::new().unwrap();
    ok(run(d.path(), &["analyze", "poincare", "--t", "3000"]));
    let text = fs::read_to_string(d.path().join("poincare.csv")).unwrap();
    assert!(text.starts_with("y,z,u,v\n"));
    assert!(text.lines().count() > 1);

    ok(run(d.path(), &["analyze", "trajectory", "--steps", "10"]));
    let text = fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    assert!(text.starts_with("step,x,y,z,u,v,x_hex,"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn entropy_rows() {
    let d = TempDir::new().unwrap();
    ok(run(d.path(), &["entropy", "--widths", "4,8,12,16,20,24", "--states", "20000"]));
    let rows = csv_rows(&d.path().join("entropy.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("4,"));
}

#[test]
fn test_suite_reports() {
    let d = TempDir::new().unwrap();
    let out = ok(run(
        d.path(),
        &["test", "--sequences", "4", "--length", "20000", "--serial-m", "8", "--apen-m", "6"],
    ));
    assert!(out.contains("approximate_entropy"));
    for k in 1..=5 {
        let text = fs::read_to_string(d.path().join(format!("test_B{k}.csv"))).unwrap();
        assert!(text.starts_with("test,p_value,proportion_pass,n_sequences\n"));
        assert_eq!(text.lines().count(), 11);
    }
}

#[test]
fn failed_acceptance_run_exits_5() {
    let d = TempDir::new().unwrap();
    let input = d.path().join("ones.bin");
    fs::write(&input, vec![0xFFu8; 5000]).unwrap();
    let o = run(
        d.path(),
        &["test", "--input", input.to_str().unwrap(), "--sequences", "2", "--length", "20000",
          "--serial-m", "8", "--apen-m", "6", "--acceptance"],
    );
    assert_eq!(o.status.code(), Some(5), "{}", stdout(&o));
}

#[test]
fn insufficient_bits_names_counts() {
    let d = TempDir::new().unwrap();
    let input = d.path().join("short.bin");
    fs::write(&input, vec![0x5Au8; 100]).unwrap();
    let o = run(d.path(), &["test", "--input", input.to_str().unwrap(), "--sequences", "2", "--length", "1000"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2000") && err.contains("800"), "{err}");
}

#[test]
fn bench_reports_throughput() {
    let d = TempDir::new().unwrap();
    let out = ok(run(d.path(), &["bench", "--seconds", "0.3"]));
    let rate: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("throughput_bits_per_second="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rate > 0.0);
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let bad_cfg = d.path().join("bad.cfg");
    fs::write(&bad_cfg, "colour=red\n").unwrap();
    let code = |o: Output| o.status.code();

    assert_eq!(code(bin().args(["generate", "--config"]).arg(&bad_cfg).output().unwrap()), Some(2));
    assert_eq!(code(run(d.path(), &["generate", "--bits", "10", "--c", "20"])), Some(2));

    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(code(bin().args(["generate", "--bits", "10", "--out"]).arg(&blocker).output().unwrap()), Some(3));
    let missing = d.path().join("missing.cfg");
    assert_eq!(code(bin().args(["generate", "--config"]).arg(&missing).output().unwrap()), Some(3));

    let o = run(d.path(), &["analyze", "trajectory", "--c", "3", "--overflow", "trap", "--steps", "1000"]);
    assert_eq!(code(o.clone()), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at step"));
}
