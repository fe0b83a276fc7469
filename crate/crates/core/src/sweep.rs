//! Sweep orchestration: runs every (modulation, ADC resolution, fronthaul
//! resolution) cell over paired Monte Carlo trials, aggregates NMSE per
//! scheme, and serializes the results as CSV tables.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::pipeline::{
    aggregate_nmse, run_realization, FronthaulBits, RealizationResult, Scheme,
};
use crate::rng::TrialStreams;
use crate::signal::Modulation;
use crate::{Error, Result};

/// One aggregated sweep-table row: a (modulation, b_adc, b_frt, scheme)
/// cell's NMSE over `trials` realizations. `wall_time` is the elapsed time
/// of the cell that produced the row; it is recorded for budget tracking but
/// not serialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub modulation: Modulation,
    pub adc_bits: u32,
    pub fronthaul_bits: FronthaulBits,
    pub scheme: Scheme,
    pub nmse: f64,
    pub trials: usize,
    pub wall_time: Duration,
}

/// One per-realization audit record. `seed` is the trial index under the
/// config's master seed, which together replay the realization exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub modulation: Modulation,
    pub seed: u64,
    pub scheme: Scheme,
    pub adc_bits: u32,
    pub fronthaul_bits: FronthaulBits,
    pub error: f64,
    pub power: f64,
}

/// Aggregated rows plus the per-realization audit trail of one sweep.
#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub audit: Vec<AuditRow>,
}

pub const SWEEP_CSV_HEADER: &str = "modulation,b_adc,b_frt,scheme,nmse,trials";
pub const AUDIT_CSV_HEADER: &str = "seed,scheme,b_adc,b_frt,error,power";
pub const PLOT_CSV_HEADER: &str = "b_adc,nmse_proposed,nmse_benchmark";

/// Runs the full sweep described by `config`.
///
/// Trials run in parallel on a dedicated pool (`workers = None` uses all
/// cores), but results are collected in trial order and aggregated
/// single-threaded, so the output is byte-identical for any worker count.
/// Every cell re-simulates its trials from `TrialStreams::new(seed, trial)`;
/// because the streams ignore the swept quantities, all cells of a trial
/// share the same drop, channel, noise, and transmitted symbols.
pub fn run_sweep(config: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Plan(format!("failed to build worker pool: {e}")))?;

    let mut result = SweepResult::default();
    for &modulation in &config.modulations {
        for &adc_bits in &config.adc_bits {
            let params = config.realization_params(modulation, adc_bits)?;
            for &fronthaul_bits in &config.fronthaul_bits {
                let started = Instant::now();
                let cell: Vec<RealizationResult> = pool.install(|| {
                    (0..config.trials as u64)
                        .into_par_iter()
                        .map(|trial| {
                            let streams = TrialStreams::new(config.seed, trial);
                            run_realization(&params, fronthaul_bits, &streams).map_err(|e| {
                                Error::Trial {
                                    trial,
                                    source: Box::new(e),
                                }
                            })
                        })
                        .collect::<Result<_>>()
                })?;
                let wall_time = started.elapsed();
                for scheme in [Scheme::Proposed, Scheme::Benchmark] {
                    result.rows.push(SweepRow {
                        modulation,
                        adc_bits,
                        fronthaul_bits,
                        scheme,
                        nmse: aggregate_nmse(&cell, scheme, config.nmse_estimator)?,
                        trials: config.trials,
                        wall_time,
                    });
                }
                for (trial, realization) in cell.iter().enumerate() {
                    for scheme in [Scheme::Proposed, Scheme::Benchmark] {
                        result.audit.push(AuditRow {
                            modulation,
                            seed: trial as u64,
                            scheme,
                            adc_bits,
                            fronthaul_bits,
                            error: realization.error(scheme),
                            power: realization.clean_power,
                        });
                    }
                }
            }
        }
    }
    Ok(result)
}

impl SweepResult {
    /// The aggregated sweep table as CSV text (LF line endings).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.modulation,
                row.adc_bits,
                row.fronthaul_bits,
                row.scheme,
                row.nmse,
                row.trials
            ));
        }
        out
    }

    /// Writes the sweep table to `path`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Writes one audit CSV per modulation into `dir` and returns the paths.
    pub fn write_audit(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        for modulation in self.modulations_in_order() {
            let mut out = String::from(AUDIT_CSV_HEADER);
            out.push('\n');
            for row in self.audit.iter().filter(|r| r.modulation == modulation) {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.seed, row.scheme, row.adc_bits, row.fronthaul_bits, row.error, row.power
                ));
            }
            let path = dir.join(format!("audit_{modulation}.csv"));
            std::fs::write(&path, out)?;
            paths.push(path);
        }
        Ok(paths)
    }

    /// Writes one plotting CSV per (modulation, fronthaul resolution) pair
    /// into `dir`: NMSE of both schemes as a function of the ADC resolution.
    /// The emitted files jointly contain every aggregated sweep value.
    pub fn emit_plot_data(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        if self.rows.is_empty() {
            return Err(Error::EmptyResult("sweep has no rows to plot".into()));
        }
        let mut paths = Vec::new();
        for modulation in self.modulations_in_order() {
            for fronthaul_bits in self.fronthaul_in_order(modulation) {
                let mut out = String::from(PLOT_CSV_HEADER);
                out.push('\n');
                for adc_bits in self.adc_bits_in_order(modulation) {
                    let nmse = |scheme| {
                        self.lookup(modulation, adc_bits, fronthaul_bits, scheme)
                            .ok_or_else(|| {
                                Error::EmptyResult(format!(
                                    "missing sweep row for {modulation}, b_adc={adc_bits}, \
                                     b_frt={fronthaul_bits}"
                                ))
                            })
                    };
                    out.push_str(&format!(
                        "{},{},{}\n",
                        adc_bits,
                        nmse(Scheme::Proposed)?,
                        nmse(Scheme::Benchmark)?
                    ));
                }
                let path = dir.join(format!("plot_{modulation}_frt{fronthaul_bits}.csv"));
                std::fs::write(&path, out)?;
                paths.push(path);
            }
        }
        Ok(paths)
    }

    /// NMSE of one cell, if present.
    pub fn lookup(
        &self,
        modulation: Modulation,
        adc_bits: u32,
        fronthaul_bits: FronthaulBits,
        scheme: Scheme,
    ) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.modulation == modulation
                    && r.adc_bits == adc_bits
                    && r.fronthaul_bits == fronthaul_bits
                    && r.scheme == scheme
            })
            .map(|r| r.nmse)
    }

    fn modulations_in_order(&self) -> Vec<Modulation> {
        let mut seen = Vec::new();
        for row in &self.rows {
            if !seen.contains(&row.modulation) {
                seen.push(row.modulation);
            }
        }
        if seen.is_empty() {
            for row in &self.audit {
                if !seen.contains(&row.modulation) {
                    seen.push(row.modulation);
                }
            }
        }
        seen
    }

    fn fronthaul_in_order(&self, modulation: Modulation) -> Vec<FronthaulBits> {
        let mut seen = Vec::new();
        for row in self.rows.iter().filter(|r| r.modulation == modulation) {
            if !seen.contains(&row.fronthaul_bits) {
                seen.push(row.fronthaul_bits);
            }
        }
        seen
    }

    fn adc_bits_in_order(&self, modulation: Modulation) -> Vec<u32> {
        let mut seen = Vec::new();
        for row in self.rows.iter().filter(|r| r.modulation == modulation) {
            if !seen.contains(&row.adc_bits) {
                seen.push(row.adc_bits);
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_config(extra: &str) -> ExperimentConfig {
        let base = "num_ues = 2\nnum_antennas = 2\narray_geometry = 1x2\n\
                    m_total = 32\nm_used = 8\nnum_pilots = 8\nnum_taps = 4\n\
                    trials = 2\nb_adc = 2\nb_frt = 2, inf\nseed = 5\n";
        ExperimentConfig::from_text(&format!("{base}{extra}")).unwrap()
    }

    #[test]
    fn one_cell_sweep_emits_exactly_two_rows() {
        let config = desk_config("trials = 1\nb_adc = 3\nb_frt = 4\n");
        let result = run_sweep(&config, Some(1)).unwrap();
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.rows[0].scheme, Scheme::Proposed);
        assert_eq!(result.rows[1].scheme, Scheme::Benchmark);
        assert_eq!(result.rows[0].trials, 1);
        let csv = result.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert!(lines[1].starts_with("qpsk,3,4,proposed,"));
        assert!(lines[2].starts_with("qpsk,3,4,benchmark,"));
    }

    #[test]
    fn nmse_is_nonnegative_and_rows_cover_every_cell() {
        let config = desk_config("");
        let result = run_sweep(&config, Some(2)).unwrap();
        // 1 modulation x 1 adc x 2 frt x 2 schemes.
        assert_eq!(result.rows.len(), 4);
        for row in &result.rows {
            assert!(row.nmse >= 0.0, "nmse {}", row.nmse);
            assert!(row.nmse.is_finite());
        }
        // 2 trials x 2 cells x 2 schemes.
        assert_eq!(result.audit.len(), 8);
        for row in &result.audit {
            assert!(row.power > 0.0);
            assert!(row.error >= 0.0);
        }
    }

    #[test]
    fn csv_bytes_are_independent_of_worker_count_and_rerun() {
        let config = desk_config("");
        let first = run_sweep(&config, Some(1)).unwrap().to_csv_string();
        let second = run_sweep(&config, Some(1)).unwrap().to_csv_string();
        let wide = run_sweep(&config, Some(4)).unwrap().to_csv_string();
        assert_eq!(first, second);
        assert_eq!(first, wide);
    }

    #[test]
    fn different_master_seeds_change_the_table() {
        let a = run_sweep(&desk_config(""), Some(2)).unwrap().to_csv_string();
        let b = run_sweep(&desk_config("seed = 6\n"), Some(2))
            .unwrap()
            .to_csv_string();
        assert_ne!(a, b);
    }

    #[test]
    fn plot_files_partition_the_sweep_table() {
        let config = desk_config("b_adc = 1, 2\n");
        let result = run_sweep(&config, Some(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = result.emit_plot_data(dir.path()).unwrap();
        // One file per (modulation, b_frt) pair.
        assert_eq!(paths.len(), 2);
        assert!(paths[0].ends_with("plot_qpsk_frt2.csv"));
        assert!(paths[1].ends_with("plot_qpsk_frtinf.csv"));

        let mut reconstructed = Vec::new();
        for path in &paths {
            let name = path.file_stem().unwrap().to_str().unwrap().to_string();
            let fronthaul: FronthaulBits = name
                .rsplit_once("frt")
                .unwrap()
                .1
                .parse()
                .unwrap();
            let text = std::fs::read_to_string(path).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some(PLOT_CSV_HEADER));
            let mut rows = 0;
            for line in lines {
                let fields: Vec<&str> = line.split(',').collect();
                let adc_bits: u32 = fields[0].parse().unwrap();
                let proposed: f64 = fields[1].parse().unwrap();
                let benchmark: f64 = fields[2].parse().unwrap();
                reconstructed.push((adc_bits, fronthaul, Scheme::Proposed, proposed));
                reconstructed.push((adc_bits, fronthaul, Scheme::Benchmark, benchmark));
                rows += 1;
            }
            // Row count equals the ADC sweep length.
            assert_eq!(rows, 2);
        }
        // Merged plot files reconstruct the sweep table exactly (CSV floats
        // round-trip, so equality is exact).
        assert_eq!(reconstructed.len(), result.rows.len());
        for (adc_bits, fronthaul, scheme, nmse) in reconstructed {
            let expected = result
                .lookup(Modulation::Qpsk, adc_bits, fronthaul, scheme)
                .unwrap();
            assert_eq!(nmse.to_bits(), expected.to_bits());
        }
    }

    #[test]
    fn audit_files_are_split_by_modulation() {
        let config = desk_config("modulation = qpsk, 16qam\nb_frt = inf\n");
        let result = run_sweep(&config, Some(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = result.write_audit(dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[0].ends_with("audit_qpsk.csv"));
        assert!(paths[1].ends_with("audit_16qam.csv"));
        for path in &paths {
            let text = std::fs::read_to_string(path).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some(AUDIT_CSV_HEADER));
            // 2 trials x 1 cell x 2 schemes.
            assert_eq!(lines.count(), 4);
        }
    }

    #[test]
    fn plotting_an_empty_sweep_is_an_error() {
        let empty = SweepResult::default();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            empty.emit_plot_data(dir.path()),
            Err(Error::EmptyResult(_))
        ));
    }
}
