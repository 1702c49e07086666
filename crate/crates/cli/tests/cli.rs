use std::path::Path;
use std::process::{Command, Output};

use bipolar_cli::{Command as Cmd, FileConfig, ReportEnvelope, RunConfig};
use bipolar_core::distgeo::build_instance;
use bipolar_core::io::{read_instance_file, write_instance, write_instance_file};
use serde_json::Value;

fn bipolar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bipolar")).args(args).output().unwrap()
}

fn report(path: &Path) -> (String, ReportEnvelope) {
    let text = std::fs::read_to_string(path).unwrap();
    let env = ReportEnvelope::parse(&text).unwrap();
    (text, env)
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn check_on_euclidean_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "check.json");
    let o = bipolar(&["check", "--manifold", "euclidean:dim=3", "--k", "3", "--l", "3", "--seed", "42", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, env) = report(Path::new(&out));
    assert_eq!(env.payload["status"], "Feasible");
    assert!(!env.evidence);
    assert_eq!(env.config.seed, 42);
}

#[test]
fn sphere_scan_is_all_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "scan.json");
    let o = bipolar(&["scan", "--manifold", "sphere:r=1.0", "--k", "2", "--l", "2", "--trials", "30", "--budget", "30", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, env) = report(Path::new(&out));
    assert_eq!(env.payload["feasible"], 30);
}

#[test]
fn reports_round_trip_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "scan.json");
    let o = bipolar(&["scan", "--manifold", "sphere:r=1.0", "--k", "3", "--l", "1", "--trials", "8", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let (text, env) = report(Path::new(&out));
    assert_eq!(env.to_text().unwrap(), text);
}

#[test]
fn tampered_payload_fails_the_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "check.json");
    bipolar(&["check", "--seed", "3", "--out", &out]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["payload"]["check"]["lowrank"]["best_penalty"] = Value::from(1.0);
    let err = ReportEnvelope::parse(&serde_json::to_string(&v).unwrap()).unwrap_err();
    assert!(err.to_string().contains("checksum"), "{err}");
}

#[test]
fn payloads_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        let out = out_arg(dir.path(), &format!("w{workers}.json"));
        let o = bipolar(&["scan", "--manifold", "sphere:r=1.0", "--k", "2", "--l", "1", "--trials", "12", "--seed", "9", "--workers", workers, "--out", &out]);
        assert_eq!(o.status.code(), Some(0));
        report(Path::new(&out)).1
    };
    let (a, b) = (run("1"), run("3"));
    assert_eq!(a.payload, b.payload);
    assert_eq!(a.checksum, b.checksum);
}

#[test]
fn config_file_is_merged_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "manifold = \"sphere:r=2.0\"\ntrials = 5\nseed = 17\nbudget = 10\n").unwrap();
    let out = out_arg(dir.path(), "scan.json");
    let o = bipolar(&["scan", "--config", cfg.to_str().unwrap(), "--k", "2", "--l", "0", "--seed", "18", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, env) = report(Path::new(&out));
    assert_eq!(env.config.manifold, "sphere:r=2.0");
    assert_eq!((env.config.trials, env.config.seed, env.config.budget), (5, 18, 10));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "trials = 5\nsamples = 3\n").unwrap();
    let o = bipolar(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples"));
    assert!(FileConfig::parse("seed = 1\nbudget = 2\n").is_ok());
    assert!(FileConfig::parse("command = \"scan\"\n").is_err());
}

#[test]
fn invalid_arguments_exit_with_one() {
    for args in [
        vec!["scan", "--trials", "0"],
        vec!["scan", "--budget", "0"],
        vec!["scan", "--tol-feas", "-1e-7"],
        vec!["scan", "--workers", "0"],
        vec!["scan", "--manifold", "sphere:r=-1"],
        vec!["scan", "--manifold", "torus:r=1"],
        vec!["scan", "--k", "9", "--l", "9"],
        vec!["scan", "--instance", "x.inst"],
        vec!["bogus"],
        vec!["scan", "--mode", "sideways"],
    ] {
        let o = bipolar(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
    let o = bipolar(&["scan", "--manifold", "sphere:r=-1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`r`"));
    assert_eq!(bipolar(&["--help"]).status.code(), Some(0));
}

#[test]
fn resolve_applies_command_defaults() {
    let c = RunConfig::resolve(Cmd::Rigidity, FileConfig::default()).unwrap();
    assert_eq!((c.trials, c.budget), (200, 200));
    assert!(c.manifold.contains("flatband"));
    let c = RunConfig::resolve(Cmd::Check, FileConfig { k: Some(2), l: Some(0), ..Default::default() }).unwrap();
    assert_eq!((c.k, c.l, c.manifold.as_str()), (2, 0, "euclidean:dim=3"));
}

#[test]
fn check_reads_instance_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("star.inst");
    // Symmetric star with outer distances 1.9 > √3: not realizable.
    let mut d = vec![vec![0.0; 4]; 4];
    for i in 1..4 {
        d[0][i] = 1.0;
        d[i][0] = 1.0;
        for j in 1..4 {
            if i != j {
                d[i][j] = 1.9;
            }
        }
    }
    write_instance_file(&path, &build_instance(2, 0, d).unwrap()).unwrap();
    let out = out_arg(dir.path(), "check.json");
    let o = bipolar(&["check", "--instance", path.to_str().unwrap(), "--budget", "20", "--out", &out]);
    assert_eq!(o.status.code(), Some(3));
    let (_, env) = report(Path::new(&out));
    assert_eq!(env.payload["status"], "NotFoundAfterBudget");
    assert_eq!(env.payload["oracle_confirmed"], true);

    let text = std::fs::read_to_string(&path).unwrap();
    let broken = text.replacen("1.8999999999999999e0", "1.8000000000000000e0", 1);
    assert_ne!(broken, text);
    let bad = dir.path().join("bad.inst");
    std::fs::write(&bad, broken).unwrap();
    let o = bipolar(&["check", "--instance", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not symmetric"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn dumped_scan_instances_recheck_standalone() {
    let dir = tempfile::tempdir().unwrap();
    let dumps = dir.path().join("dumps");
    let out = out_arg(dir.path(), "scan.json");
    let o = bipolar(&[
        "scan", "--manifold", "revolution:profile=cosh,extent=3", "--k", "2", "--l", "0", "--trials", "40", "--budget", "30", "--seed", "4",
        "--dump-dir", dumps.to_str().unwrap(), "--out", &out,
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, env) = report(Path::new(&out));
    assert!(env.evidence);
    let mut files: Vec<_> = std::fs::read_dir(&dumps).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty());
    for f in files.iter().take(3) {
        let inst = read_instance_file::<f64>(f).unwrap();
        assert_eq!(write_instance(&inst), std::fs::read_to_string(f).unwrap());
        let o = bipolar(&["check", "--instance", f.to_str().unwrap(), "--budget", "30"]);
        assert_eq!(o.status.code(), Some(3), "{}", f.display());
    }
}

#[test]
fn mtw_scan_honours_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "mtw.json");
    let o = bipolar(&["mtw-scan", "--manifold", "sphere:r=1.0", "--trials", "20", "--mode", "perp", "--out", &out]);
    let (_, env) = report(Path::new(&out));
    assert_eq!(env.payload["perpendicular_only"], true);
    assert_eq!(o.status.code(), Some(if env.evidence { 3 } else { 0 }));
    assert_eq!(env.payload["evaluated"], 20);
}

#[test]
fn rigidity_exit_code_tracks_evidence_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "rig.json");
    let o = bipolar(&["rigidity", "--trials", "8", "--budget", "20", "--seed", "2", "--out", &out]);
    let (_, env) = report(Path::new(&out));
    let flags = env.payload["comparison_violation_evidence"].as_bool().unwrap() || env.payload["mtw_violation_evidence"].as_bool().unwrap();
    assert_eq!(env.evidence, flags);
    assert_eq!(o.status.code(), Some(if flags { 3 } else { 0 }));
    assert_eq!(env.payload["positive_control_failures"], 0);
}

#[test]
fn filling_on_reference_surface_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "fill.json");
    let o = bipolar(&["filling", "--trials", "8", "--seed", "5", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, env) = report(Path::new(&out));
    assert!(env.payload["in_band"].as_u64().unwrap() >= 1);
    assert!(env.payload["max_in_band_defect"].as_f64().unwrap() <= 1e-6);
}
