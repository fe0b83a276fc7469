use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quantlink"))
}

const TINY_CONFIG: &str = "num_ues = 2\nnum_antennas = 2\narray_geometry = 1x2\n\
                           m_total = 16\nm_used = 4\nnum_pilots = 4\nnum_taps = 3\n\
                           trials = 2\nb_adc = 1, 2\nb_frt = 2, inf\nseed = 11\n";

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.txt");
    std::fs::write(&path, TINY_CONFIG).unwrap();
    path
}

#[test]
fn run_writes_sweep_plot_and_audit_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let status = binary()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--workers")
        .arg("2")
        .status()
        .unwrap();
    assert!(status.success());

    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "modulation,b_adc,b_frt,scheme,nmse,trials");
    // 2 adc x 2 frt cells x 2 schemes.
    assert_eq!(lines.len(), 1 + 8);
    assert!(sweep.ends_with('\n'));
    assert!(!sweep.contains('\r'));

    assert!(out.join("plot_qpsk_frt2.csv").is_file());
    assert!(out.join("plot_qpsk_frtinf.csv").is_file());
    assert!(out.join("audit_qpsk.csv").is_file());
    let audit = std::fs::read_to_string(out.join("audit_qpsk.csv")).unwrap();
    assert_eq!(
        audit.lines().next().unwrap(),
        "seed,scheme,b_adc,b_frt,error,power"
    );
    // 4 cells x 2 trials x 2 schemes.
    assert_eq!(audit.lines().count(), 1 + 16);
}

#[test]
fn outputs_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let mut tables = Vec::new();
    for (label, workers) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(label);
        let status = binary()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .status()
            .unwrap();
        assert!(status.success());
        tables.push(std::fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn trial_and_seed_overrides_take_effect() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let base = dir.path().join("base");
    let overridden = dir.path().join("overridden");
    for (out, extra) in [
        (&base, vec![]),
        (&overridden, vec!["--trials", "1", "--seed", "77"]),
    ] {
        let status = binary()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .args(["--workers", "1"])
            .args(extra)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let base_csv = std::fs::read_to_string(base.join("sweep.csv")).unwrap();
    let over_csv = std::fs::read_to_string(overridden.join("sweep.csv")).unwrap();
    assert!(base_csv.lines().skip(1).all(|l| l.ends_with(",2")));
    assert!(over_csv.lines().skip(1).all(|l| l.ends_with(",1")));
    assert_ne!(base_csv, over_csv);
}

#[test]
fn worker_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let status = binary()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--trials", "1"])
        .env("QUANTLINK_WORKERS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    let bad = binary()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .env("QUANTLINK_WORKERS", "many")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.contains("QUANTLINK_WORKERS"), "{stderr}");
}

#[test]
fn invalid_configs_fail_with_line_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "trials = 1\nnonsense_key = 4\n").unwrap();
    let output = binary()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 2"), "{stderr}");
    assert!(stderr.contains("nonsense_key"), "{stderr}");

    let missing = binary()
        .args(["run", "--config"])
        .arg(dir.path().join("absent.txt"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn selftest_reports_every_check_as_passing() {
    let output = binary().arg("selftest").output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 5);
    assert!(!stdout.contains("FAIL"), "{stdout}");
}
