//! CSV schema stability: a two-trial fixture swept with one worker must
//! reproduce the golden files byte for byte. Headers, column order, float
//! formatting, and row ordering are all part of the contract; regenerate
//! the goldens (and review the diff) only on an intentional format change:
//!
//! ```text
//! cargo run -p quantlink-cli -- run \
//!     --config crates/core/tests/data/fixture_config.txt \
//!     --out crates/core/tests/data/golden --workers 1
//! ```

use std::path::{Path, PathBuf};

use quantlink::config::ExperimentConfig;
use quantlink::sweep::{run_sweep, AUDIT_CSV_HEADER, PLOT_CSV_HEADER, SWEEP_CSV_HEADER};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn golden(name: &str) -> String {
    let path = data_dir().join("golden").join(name);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|err| panic!("golden file {} unreadable: {err}", path.display()))
}

#[test]
fn headers_are_pinned() {
    assert_eq!(SWEEP_CSV_HEADER, "modulation,b_adc,b_frt,scheme,nmse,trials");
    assert_eq!(AUDIT_CSV_HEADER, "seed,scheme,b_adc,b_frt,error,power");
    assert_eq!(PLOT_CSV_HEADER, "b_adc,nmse_proposed,nmse_benchmark");
}

#[test]
fn two_trial_fixture_matches_golden_files() {
    let config = ExperimentConfig::load(&data_dir().join("fixture_config.txt"))
        .expect("fixture config is valid");
    let result = run_sweep(&config, Some(1)).expect("fixture sweep runs");

    assert_eq!(result.to_csv_string(), golden("sweep.csv"), "sweep.csv drifted");

    let dir = tempfile::tempdir().expect("create temp dir");
    result.write_audit(dir.path()).expect("write audit files");
    result.emit_plot_data(dir.path()).expect("write plot files");
    for name in ["audit_qpsk.csv", "plot_qpsk_frt2.csv", "plot_qpsk_frtinf.csv"] {
        let written = std::fs::read_to_string(dir.path().join(name))
            .unwrap_or_else(|err| panic!("{name} was not written: {err}"));
        assert_eq!(written, golden(name), "{name} drifted");
    }
}

/// Guards the goldens themselves: structural checks that would catch a
/// corrupted or accidentally regenerated fixture before the byte
/// comparison makes the mismatch look like a code regression.
#[test]
fn golden_files_have_expected_shape() {
    let sweep = golden("sweep.csv");
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some(SWEEP_CSV_HEADER));
    // 2 ADC depths x 2 fronthaul depths x 2 schemes.
    assert_eq!(lines.count(), 8);
    assert!(sweep.ends_with('\n') && !sweep.contains('\r'));

    let audit = golden("audit_qpsk.csv");
    assert_eq!(audit.lines().next(), Some(AUDIT_CSV_HEADER));
    // Header + 2 trials x 2 schemes per cell x 4 cells.
    assert_eq!(audit.lines().count(), 17);

    for name in ["plot_qpsk_frt2.csv", "plot_qpsk_frtinf.csv"] {
        let plot = golden(name);
        assert_eq!(plot.lines().next(), Some(PLOT_CSV_HEADER));
        assert_eq!(plot.lines().count(), 3, "{name}: header plus one row per ADC depth");
        for row in plot.lines().skip(1) {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields.len(), 3, "{name}: row {row} has wrong arity");
            let proposed: f64 = fields[1].parse().expect("proposed NMSE parses");
            let benchmark: f64 = fields[2].parse().expect("benchmark NMSE parses");
            assert!(proposed.is_finite() && benchmark.is_finite());
        }
    }
}
