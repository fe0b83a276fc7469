//! Fast end-to-end invariant checks, exposed to the CLI as a `selftest`
//! subcommand. Each check exercises one load-bearing property of the
//! library in a second or less and reports a named pass/fail outcome.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::admm::{self, AdmmConfig};
use crate::channel::{
    apply_channel, noise_variance_dbm, pathloss_mean_db, ChannelRealization, LargeScaleFading,
    PowerDelayProfile,
};
use crate::config::ExperimentConfig;
use crate::linmodel::{
    build_observation_matrix, build_pilot_signal, quantization_bounds, stack_antenna_series,
    ModelDims, ObservationModel,
};
use crate::quant::ScalarQuantizer;
use crate::rng::TrialStreams;
use crate::signal::{Constellation, FrequencyGrid, Modulation, SubcarrierPlan, UnitaryDft};
use crate::sweep::run_sweep;
use crate::Result;

/// Outcome of one named invariant check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} - {}", self.name, self.detail)
    }
}

/// True when every check passed.
pub fn all_passed(checks: &[CheckOutcome]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn check(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    match body() {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("errored: {e}"),
        },
    }
}

/// Relative error of the linear observation model against direct
/// time-domain simulation: `||A s + p - z_direct|| / ||z_direct||` for one
/// seeded realization with unit large-scale gains.
///
/// The direct signal comes from explicit cyclic-prefix convolution, a code
/// path that shares nothing with the matrix builder, so agreement pins the
/// model construction end to end.
pub fn model_equivalence_relative_error(
    num_users: usize,
    num_antennas: usize,
    dft_size: usize,
    num_data: usize,
    num_pilots: usize,
    num_taps: usize,
    streams: &TrialStreams,
) -> Result<f64> {
    let constellation = Constellation::new(Modulation::Qpsk);
    let dft = UnitaryDft::new(dft_size);
    let plan = SubcarrierPlan::uniform(
        dft_size,
        num_data,
        num_pilots,
        num_taps,
        &mut streams.stream("plan"),
    )?;
    let large_scale = LargeScaleFading::from_parts(vec![1.0; num_users], vec![1.0; num_users], 0.0)?;
    let mut profile_rng = streams.stream("delay-profile");
    let profiles: Vec<PowerDelayProfile> = (0..num_users)
        .map(|_| {
            PowerDelayProfile::sample_clustered(num_taps, 1.0, 2.0, 2.0, 2.0, 5, &mut profile_rng)
        })
        .collect::<Result<_>>()?;
    let channel = ChannelRealization::sample(
        &large_scale,
        &profiles,
        num_antennas,
        &mut streams.stream("taps"),
    )?;
    let grid = FrequencyGrid::draw(
        &plan,
        &constellation,
        num_users,
        &mut streams.stream("symbols"),
    );
    let tx_powers = vec![1.0; num_users];
    let tx_symbols: Vec<_> = (0..num_users)
        .map(|k| dft.idft_time_samples(grid.user(k), plan.cp_len()))
        .collect();
    let direct = stack_antenna_series(&apply_channel(&channel, &tx_symbols, &tx_powers)?);

    let matrix = build_observation_matrix(&channel, &plan, &tx_powers)?;
    let pilot = build_pilot_signal(&dft, &channel, &grid, &plan, &tx_powers)?;
    let symbols = grid.stacked_data_symbols(&plan);
    let mut error = 0.0;
    let mut power = 0.0;
    for (row_index, &z) in direct.iter().enumerate() {
        let mut image = pilot[row_index];
        for (col_index, &s) in symbols.iter().enumerate() {
            image += matrix[(row_index, col_index)] * s;
        }
        error += (image - z).norm_sqr();
        power += z.norm_sqr();
    }
    Ok((error / power).sqrt())
}

/// Result of one noiseless fine-quantization solver trial.
#[derive(Debug, Clone, Copy)]
pub struct ExactRecoveryOutcome {
    pub wrong_symbols: usize,
    pub total_symbols: usize,
    /// Final `||z - A x - p|| / ||z||` of the solver.
    pub model_residual_ratio: f64,
}

/// Runs the solver on one seeded instance of the exact-recovery regime:
/// QPSK, noiseless, 10-bit ADC, equal-power users with unit large-scale
/// gains at (K=4, N=4, M=64, data=16, pilots=16, taps=4). With near-lossless
/// quantization the feasible set pins down the transmitted symbols, so a
/// converged solver recovers them exactly.
///
/// Recovered and transmitted symbols come from the same constellation level
/// table, so float equality is the correct comparison.
pub fn exact_recovery_trial(
    streams: &TrialStreams,
    iterations: usize,
) -> Result<ExactRecoveryOutcome> {
    let (num_users, num_antennas, dft_size, num_data, num_pilots, num_taps) =
        (4, 4, 64, 16, 16, 4);
    let constellation = Constellation::new(Modulation::Qpsk);
    let dft = UnitaryDft::new(dft_size);
    let plan = SubcarrierPlan::uniform(
        dft_size,
        num_data,
        num_pilots,
        num_taps,
        &mut streams.stream("plan"),
    )?;
    let large_scale =
        LargeScaleFading::from_parts(vec![1.0; num_users], vec![1.0; num_users], 0.0)?;
    let mut profile_rng = streams.stream("delay-profile");
    let profiles: Vec<PowerDelayProfile> = (0..num_users)
        .map(|_| {
            PowerDelayProfile::sample_clustered(num_taps, 1.0, 2.0, 2.0, 2.0, 5, &mut profile_rng)
        })
        .collect::<Result<_>>()?;
    let channel = ChannelRealization::sample(
        &large_scale,
        &profiles,
        num_antennas,
        &mut streams.stream("taps"),
    )?;
    let grid = FrequencyGrid::draw(
        &plan,
        &constellation,
        num_users,
        &mut streams.stream("symbols"),
    );
    let tx_powers = vec![1.0; num_users];
    let tx_symbols: Vec<_> = (0..num_users)
        .map(|k| dft.idft_time_samples(grid.user(k), plan.cp_len()))
        .collect();
    let clean = stack_antenna_series(&apply_channel(&channel, &tx_symbols, &tx_powers)?);

    let components: Vec<f64> = clean.iter().flat_map(|v| [v.re, v.im]).collect();
    let adc = ScalarQuantizer::design_lloyd_max(&components, 10)?;
    let observed = adc.quantize_vector(&clean);
    let (lower, upper) = quantization_bounds(&adc, &observed);

    let rms =
        (clean.iter().map(|v| v.norm_sqr()).sum::<f64>() / (2.0 * clean.len() as f64)).sqrt();
    let gain = 1.0 / rms;
    let matrix = build_observation_matrix(&channel, &plan, &tx_powers)?;
    let pilot = build_pilot_signal(&dft, &channel, &grid, &plan, &tx_powers)?;
    let dims = ModelDims {
        num_antennas,
        dft_size,
        num_users,
        num_data,
        num_taps,
    };
    let model = ObservationModel::lift_to_real(
        &(&matrix * Complex64::from(gain)),
        &pilot.iter().map(|v| v * gain).collect::<Vec<_>>(),
        &observed.values.iter().map(|v| v * gain).collect::<Vec<_>>(),
        lower * gain,
        upper * gain,
        dims,
    )?;
    let config = AdmmConfig {
        iterations,
        ..AdmmConfig::default()
    };
    let outcome = admm::run(&model, &constellation, &config)?;
    let sent = grid.stacked_data_symbols(&plan);
    let wrong_symbols = sent
        .iter()
        .zip(&outcome.projected_symbols)
        .filter(|(a, b)| a != b)
        .count();
    let model_residual_ratio = outcome.residuals.last().map_or(0.0, |t| t.model)
        / outcome.signal_norm.max(f64::MIN_POSITIVE);
    Ok(ExactRecoveryOutcome {
        wrong_symbols,
        total_symbols: sent.len(),
        model_residual_ratio,
    })
}

/// Runs every invariant check and returns the outcomes in a fixed order.
pub fn run_selftest() -> Vec<CheckOutcome> {
    vec![
        check("unitary-transform-round-trip", || {
            let dft = UnitaryDft::new(64);
            let mut rng = TrialStreams::new(1, 0).stream("selftest-dft");
            let freq: Vec<Complex64> = (0..64)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let symbol = dft.idft_time_samples(&freq, 3);
            let back = dft.dft(symbol.body());
            let error: f64 = freq
                .iter()
                .zip(&back)
                .map(|(&a, &b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let time_power: f64 = symbol.body().iter().map(|v| v.norm_sqr()).sum();
            let freq_power: f64 = freq.iter().map(|v| v.norm_sqr()).sum();
            let parseval_gap = (time_power - freq_power).abs() / freq_power;
            Ok((
                error < 1e-12 && parseval_gap < 1e-12,
                format!("round-trip error {error:.2e}, power mismatch {parseval_gap:.2e}"),
            ))
        }),
        check("noise-floor-reference", || {
            let dbm = noise_variance_dbm(15.36e6, 7.0)?;
            Ok((
                (dbm + 95.14).abs() < 0.01,
                format!("sigma^2 = {dbm:.4} dBm (expected -95.14 within 0.01)"),
            ))
        }),
        check("pathloss-reference", || {
            let db = pathloss_mean_db(100.0)?;
            Ok((
                (db + 113.7).abs() < 1e-9,
                format!("mean pathloss at 100 m = {db:.6} dB (expected -113.7)"),
            ))
        }),
        check("quantizer-gaussian-fixed-point", || {
            let mut rng = TrialStreams::new(1, 0).stream("selftest-quant");
            let normal = rand_distr::Normal::new(0.0, 1.0).expect("valid parameters");
            let samples: Vec<f64> = (0..100_000)
                .map(|_| rand_distr::Distribution::sample(&normal, &mut rng))
                .collect();
            let quantizer = ScalarQuantizer::design_lloyd_max(&samples, 1)?;
            let levels = quantizer.levels();
            let expected = (2.0 / std::f64::consts::PI).sqrt();
            let gap = (levels[1] - expected).abs().max((levels[0] + expected).abs());
            Ok((
                gap < 1e-2,
                format!("1-bit levels ({:.4}, {:.4}), expected +/-{expected:.4}", levels[0], levels[1]),
            ))
        }),
        check("projection-idempotence", || {
            let mut rng = TrialStreams::new(1, 0).stream("selftest-proj");
            for modulation in [Modulation::Qpsk, Modulation::Qam16] {
                let constellation = Constellation::new(modulation);
                for _ in 0..1000 {
                    let point = Complex64::new(
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                    );
                    let once = constellation.project(point);
                    let twice = constellation.project(once);
                    if once != twice
                        || !constellation.axis_levels().contains(&once.re)
                        || !constellation.axis_levels().contains(&once.im)
                    {
                        return Ok((false, format!("projection unstable at {point}")));
                    }
                }
            }
            Ok((true, "2000 random points project idempotently onto the grid".into()))
        }),
        check("observation-model-equivalence", || {
            let mut worst = 0.0f64;
            for trial in 0..5 {
                let streams = TrialStreams::new(99, trial);
                worst = worst.max(model_equivalence_relative_error(2, 2, 32, 8, 8, 4, &streams)?);
            }
            Ok((
                worst < 1e-10,
                format!("worst relative model error over 5 realizations: {worst:.2e}"),
            ))
        }),
        check("noiseless-exact-recovery", || {
            for trial in 0..2 {
                let outcome = exact_recovery_trial(&TrialStreams::new(7, trial), 50)?;
                if outcome.wrong_symbols != 0 {
                    return Ok((
                        false,
                        format!(
                            "trial {trial}: {}/{} symbols wrong",
                            outcome.wrong_symbols, outcome.total_symbols
                        ),
                    ));
                }
            }
            Ok((true, "2/2 noiseless high-resolution trials recovered exactly".into()))
        }),
        check("sweep-determinism", || {
            let config = ExperimentConfig::from_text(
                "num_ues = 2\nnum_antennas = 2\narray_geometry = 1x2\nm_total = 16\n\
                 m_used = 4\nnum_pilots = 4\nnum_taps = 3\ntrials = 1\nb_adc = 2\n\
                 b_frt = inf\nseed = 3\n",
            )?;
            let narrow = run_sweep(&config, Some(1))?.to_csv_string();
            let wide = run_sweep(&config, Some(2))?.to_csv_string();
            Ok((
                narrow == wide,
                if narrow == wide {
                    "1-worker and 2-worker sweeps agree byte-for-byte".into()
                } else {
                    "worker count changed the output".into()
                },
            ))
        }),
        check("quantizer-cell-consistency", || {
            let mut rng = TrialStreams::new(1, 0).stream("selftest-train");
            let signal: Vec<Complex64> = (0..4096)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let components: Vec<f64> = signal.iter().flat_map(|v| [v.re, v.im]).collect();
            let quantizer = ScalarQuantizer::design_lloyd_max(&components, 3)?;
            let coded = quantizer.quantize_vector(&signal);
            let in_cell = signal.iter().zip(&coded.real_cells).all(|(v, &cell)| {
                let (lower, upper) = quantizer.cell_bounds(cell);
                lower <= v.re && v.re < upper
            });
            Ok((
                in_cell,
                "every quantized sample lies in its reported cell".into(),
            ))
        }),
    ]
}
