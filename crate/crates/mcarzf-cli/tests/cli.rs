use std::path::Path;
use std::process::Command;

use mcarzf::sim::{SchemeId, Sweep};
use mcarzf::SystemConfig;
use mcarzf_cli::manifest::{resolve, DEFAULT_ANTENNAS, DEFAULT_SNR_DB};
use mcarzf_cli::output::{csv_bytes, read_sidecar};
use mcarzf_cli::{exit, run_sweep, CliError, FileConfig, Overrides, SweepKind};

const TINY: &str = "
[system]
cells = 2
users = 2
antennas = 8
n_drops = 1
mc_trials = 4
threads = 1
";

fn config_errors(r: Result<mcarzf_cli::RunManifest, CliError>) -> Vec<String> {
    match r {
        Err(CliError::Config(v)) => v,
        Err(e) => panic!("expected a config error, got {e}"),
        Ok(_) => panic!("expected a config error"),
    }
}

fn snr5() -> Overrides {
    Overrides { points: Some(vec![0.0, 5.0, 10.0, 15.0, 20.0]), ..Default::default() }
}

#[test]
fn empty_config_resolves_to_defaults() {
    let file = FileConfig::parse("").unwrap();
    assert_eq!(file, FileConfig::default());
    let m = resolve(file, SweepKind::Snr, &Overrides::default(), Path::new("out")).unwrap();
    assert_eq!(m.config, SystemConfig::default());
    assert_eq!(m.sweep, Sweep::Snr(DEFAULT_SNR_DB.to_vec()));
    assert_eq!(m.schemes, SchemeId::ALL.to_vec());
    assert_eq!(m.csv_path, Path::new("out/sweep_snr.csv"));
    let m = resolve(FileConfig::default(), SweepKind::Antennas, &Overrides::default(), Path::new("out")).unwrap();
    assert_eq!(m.sweep, Sweep::Antennas(DEFAULT_ANTENNAS.to_vec()));
}

#[test]
fn zero_users_is_rejected_with_every_violation() {
    let file = FileConfig::parse("[system]\nusers = 0\nantennas = 0\nrho_dl = -1.0\n").unwrap();
    let errs = config_errors(resolve(file, SweepKind::Snr, &Overrides::default(), Path::new(".")));
    assert_eq!(errs.len(), 3, "{errs:?}");
    assert!(errs.iter().any(|e| e.contains("users")));
    assert!(errs.iter().any(|e| e.contains("antennas")));
    assert!(errs.iter().any(|e| e.contains("rho_dl")));
}

#[test]
fn conflicting_sweeps_are_rejected() {
    let file = FileConfig::parse("[sweep]\nrho_db = [0.0, 10.0]\nantennas = [8, 16]\n").unwrap();
    let errs = config_errors(resolve(file.clone(), SweepKind::Snr, &Overrides::default(), Path::new(".")));
    assert!(errs.iter().any(|e| e.contains("both")), "{errs:?}");
    let errs = config_errors(resolve(file, SweepKind::Antennas, &Overrides::default(), Path::new(".")));
    assert!(errs.iter().any(|e| e.contains("both")), "{errs:?}");
    // A fixed value on the swept axis is also a conflict.
    let ov = Overrides { rho_db: Some(10.0), ..Default::default() };
    config_errors(resolve(FileConfig::default(), SweepKind::Snr, &ov, Path::new(".")));
}

#[test]
fn unknown_keys_are_rejected() {
    for text in ["colour = 1\n", "[system]\nuserz = 3\n", "[sweep]\nsnr = [1.0]\n", "[extra]\n"] {
        assert!(matches!(FileConfig::parse(text), Err(CliError::Config(_))), "{text:?} accepted");
    }
}

#[test]
fn flags_override_the_file() {
    let file = FileConfig::parse("schemes = [\"RZF-uniform\"]\n[system]\nseed = 1\nn_drops = 3\n[sweep]\nrho_db = [1.0]\n").unwrap();
    let ov = Overrides {
        seed: Some(9),
        drops: Some(2),
        schemes: Some(vec![SchemeId::McaMaxmin]),
        points: Some(vec![4.0]),
        antennas: Some(32),
        ..Default::default()
    };
    let m = resolve(file, SweepKind::Snr, &ov, Path::new(".")).unwrap();
    assert_eq!((m.config.seed, m.seed, m.config.n_drops, m.config.antennas), (9, 9, 2, 32));
    assert_eq!(m.schemes, vec![SchemeId::McaMaxmin]);
    assert_eq!(m.sweep, Sweep::Snr(vec![4.0]));
}

#[test]
fn csv_has_one_row_per_scheme_and_point() {
    let dir = tempfile::tempdir().unwrap();
    let m = resolve(FileConfig::parse(TINY).unwrap(), SweepKind::Snr, &snr5(), dir.path()).unwrap();
    run_sweep(&m, &mut |_| {}).unwrap();
    let text = std::fs::read_to_string(&m.csv_path).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 21);
    assert_eq!(lines[0], "scheme,sweep_name,sweep_value,min_rate_bits,n_drops,mc_trials,failed");
    assert!(lines[1].starts_with("RZF-uniform,rho_db,0,"));
    assert!(lines[20].starts_with("MCA-RZF-maxmin,rho_db,20,"));
    for row in &lines[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 7);
        assert!(f[3].parse::<f64>().unwrap() > 0.0);
        assert_eq!((f[4], f[5], f[6]), ("1", "4", "false"));
    }
}

#[test]
fn failed_scheme_rows_are_marked() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{TINY}fp_max_iters = 1\n");
    let m = resolve(FileConfig::parse(&text).unwrap(), SweepKind::Snr, &snr5(), dir.path()).unwrap();
    let err = run_sweep(&m, &mut |_| {}).unwrap_err();
    assert_eq!(err.exit_code(), exit::CONVERGENCE);
    let csv = std::fs::read_to_string(&m.csv_path).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 20);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        if f[0] == "MCA-RZF-maxmin" {
            assert_eq!((f[3], f[6]), ("", "true"), "{row}");
        } else {
            assert_eq!(f[6], "false", "{row}");
        }
    }
    let side = read_sidecar(&m.json_path).unwrap();
    let s = side.result.points[0].scheme(SchemeId::McaMaxmin).unwrap();
    assert!(s.drops[0].error.as_deref().unwrap().contains("converge"));
}

#[test]
fn rerun_is_byte_identical_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let ov = Overrides { points: Some(vec![4.0, 8.0]), drops: Some(2), ..Default::default() };
    let run = |threads: usize, sub: &str| {
        let ov = Overrides { threads: Some(threads), ..ov.clone() };
        let m = resolve(FileConfig::parse(TINY).unwrap(), SweepKind::Antennas, &ov, &dir.path().join(sub)).unwrap();
        run_sweep(&m, &mut |_| {}).unwrap();
        std::fs::read(&m.csv_path).unwrap()
    };
    let a = run(1, "a");
    assert_eq!(a, run(1, "b"));
    assert_eq!(a, run(3, "c"));
}

#[test]
fn sidecar_round_trips_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = resolve(FileConfig::parse(TINY).unwrap(), SweepKind::Snr, &Overrides { points: Some(vec![10.0]), ..Default::default() }, dir.path()).unwrap();
    let res = run_sweep(&m, &mut |_| {}).unwrap();
    let side = read_sidecar(&m.json_path).unwrap();
    assert_eq!(side.manifest, m);
    assert_eq!(side.result, res);
    let lk = m.config.cells * m.config.users;
    assert!(side.result.points[0].schemes.iter().all(|s| s.drops[0].dl_sinr.len() == lk));
    // The embedded CSV generator reproduces the file from the sidecar alone.
    assert_eq!(csv_bytes(&side.manifest, &side.result).unwrap(), std::fs::read(&m.csv_path).unwrap());
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mcarzf"));
    c.env_remove(mcarzf_cli::OUT_DIR_ENV);
    c
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nusers = 0\n").unwrap();
    let out = bin().args(["sweep-snr", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("users"));

    let out = bin().args(["sweep-snr", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::USAGE));

    let out = bin().args(["sweep-snr", "--schemes", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::USAGE));

    let missing = bin().args(["sweep-snr", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(exit::OTHER));

    let slow = dir.path().join("slow.toml");
    std::fs::write(&slow, format!("{TINY}fp_max_iters = 1\n")).unwrap();
    let out = bin()
        .args(["sweep-snr", "--quiet", "--rho-db", "10", "--config"])
        .arg(&slow)
        .env(mcarzf_cli::OUT_DIR_ENV, dir.path().join("env_out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::CONVERGENCE));
    assert!(dir.path().join("env_out/sweep_snr.csv").exists());
}

#[test]
fn binary_sweep_writes_to_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = bin()
        .args(["sweep-antennas", "--quiet", "--antennas", "4,6", "--rho-db", "-5", "--schemes", "rzf-uniform,MCA-RZF-maxmin", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/sweep_antennas.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("RZF-uniform,antennas,4,"));
    assert!(rows[4].starts_with("MCA-RZF-maxmin,antennas,6,"));
}

#[test]
fn golden_prints_closed_forms() {
    let out = bin().arg("golden").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    assert!((value("delta") - g).abs() < 1e-8);
    assert!((value("T") - g).abs() < 1e-8);
    let f = g.powi(4);
    assert!((value("xi_bar") - f / (1.0 - f)).abs() < 1e-8);
    assert_eq!(bin().args(["golden", "--antennas", "0"]).output().unwrap().status.code(), Some(exit::CONFIG));
}
