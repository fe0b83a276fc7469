//! One end-to-end Monte Carlo realization: draw a drop, push every user's
//! OFDM symbol through the channel, apply ADC quantization, reconstruct (or
//! pass through) the received signal, quantize it again for the fronthaul,
//! and score both transport schemes against the clean received signal.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::admm::{self, AdmmConfig};
use crate::channel::{
    add_noise, apply_channel, ChannelRealization, DropGeometry, LargeScaleFading,
    PowerDelayProfile,
};
use crate::linmodel::{
    build_observation_matrix, build_pilot_signal, quantization_bounds, stack_antenna_series,
    unstack_antenna_series, ModelDims, ObservationModel,
};
use crate::quant::ScalarQuantizer;
use crate::rng::TrialStreams;
use crate::signal::{Constellation, FrequencyGrid, Modulation, SubcarrierPlan, UnitaryDft};
use crate::{Error, Result};

/// Number of synthetic samples drawn when a quantizer is trained on a
/// Gaussian fit instead of the empirical signal.
const GAUSSIAN_TRAINING_SAMPLES: usize = 1 << 16;

/// The two fronthaul transport schemes under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Reconstruct the pre-ADC signal first, then forward it.
    Proposed,
    /// Forward the frequency transform of the raw ADC output.
    Benchmark,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Proposed => write!(f, "proposed"),
            Scheme::Benchmark => write!(f, "benchmark"),
        }
    }
}

/// Fronthaul resolution: a finite per-component bit width or unquantized
/// transport (spelled `inf` in configs and output files).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FronthaulBits {
    Bits(u32),
    Unquantized,
}

impl fmt::Display for FronthaulBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FronthaulBits::Bits(b) => write!(f, "{b}"),
            FronthaulBits::Unquantized => write!(f, "inf"),
        }
    }
}

impl FromStr for FronthaulBits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if trimmed.eq_ignore_ascii_case("inf") {
            return Ok(FronthaulBits::Unquantized);
        }
        let bits: u32 = trimmed.parse().map_err(|_| {
            Error::InvalidParameter(format!(
                "fronthaul resolution must be a bit count or `inf`, got {trimmed:?}"
            ))
        })?;
        if bits == 0 || bits > 24 {
            return Err(Error::InvalidParameter(format!(
                "fronthaul resolution must be 1..=24 bits, got {bits}"
            )));
        }
        Ok(FronthaulBits::Bits(bits))
    }
}

/// How quantizer level tables are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantizerTraining {
    /// Fit the empirical component distribution of the signal at hand.
    #[default]
    Empirical,
    /// Fit a zero-mean Gaussian with the signal's component RMS.
    GaussianMatched,
}

/// Whether solver inputs are normalized to unit RMS before reconstruction.
/// Normalization rescales the model, observations, and bounds by a common
/// positive factor, which leaves the constrained problem's solutions
/// unchanged but makes the solver penalty dimensionless, so one penalty
/// value works across receive-power scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverScaling {
    #[default]
    Rms,
    Off,
}

/// Reconstruction strategy for the proposed scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReconstructionMode {
    /// The interval/constellation-constrained solver.
    #[default]
    Admm,
    /// Identity reconstruction (forwards the ADC output); turns the proposed
    /// scheme into the benchmark and exists to test scheme isolation.
    PassThrough,
}

/// How per-realization (error, power) pairs are reduced to one NMSE number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmseEstimator {
    /// `sum(errors) / sum(powers)`: realizations with more received power
    /// weigh more.
    #[default]
    RatioOfSums,
    /// Unweighted mean of per-realization `error / power` ratios.
    MeanOfRatios,
}

/// Clustered delay-profile shape parameters, in units of the sample period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayProfileParams {
    pub clusters: usize,
    pub cluster_decay_periods: f64,
    pub ray_decay_periods: f64,
    pub cluster_spacing_periods: f64,
}

/// Everything needed to simulate one Monte Carlo realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationParams {
    pub num_users: usize,
    pub num_antennas: usize,
    pub dft_size: usize,
    pub num_data: usize,
    pub num_pilots: usize,
    pub num_taps: usize,
    pub ofdm_symbols: usize,
    pub area_side_m: f64,
    pub height_m: f64,
    pub tx_power_w: f64,
    pub noise_variance_w: f64,
    pub sample_period_s: f64,
    pub delay_profile: DelayProfileParams,
    pub modulation: Modulation,
    pub adc_bits: u32,
    pub admm: AdmmConfig,
    pub quantizer_training: QuantizerTraining,
    pub solver_scaling: SolverScaling,
    pub reconstruction: ReconstructionMode,
}

/// Signals produced by one OFDM symbol of one realization, after the ADC and
/// reconstruction stages but before any fronthaul quantization. Frequency
/// vectors are indexed `[antenna][data subcarrier]`, symbol matrices
/// `[user][data subcarrier]`, and time signals `[antenna][sample]`.
#[derive(Debug, Clone)]
pub struct SymbolRound {
    /// Data-subcarrier transform of the clean (noiseless, unquantized)
    /// received signal: the scoring reference.
    pub reference_freq: Vec<Vec<Complex64>>,
    /// Data-subcarrier transform of the reconstructed signal.
    pub proposed_freq: Vec<Vec<Complex64>>,
    /// Data-subcarrier transform of the raw ADC output.
    pub benchmark_freq: Vec<Vec<Complex64>>,
    /// Clean received time signal.
    pub clean_time: Vec<Vec<Complex64>>,
    /// ADC output time signal.
    pub quantized_time: Vec<Vec<Complex64>>,
    /// Transmitted data symbols.
    pub sent_symbols: Vec<Vec<Complex64>>,
    /// Solver's constellation-rounded symbol decisions (empty in
    /// pass-through mode).
    pub recovered_symbols: Vec<Vec<Complex64>>,
    /// Final `|| z - A x - p ||` of the solver, in solver units.
    pub solver_model_residual: f64,
    /// Final `|| z ||` of the solver, in the same units.
    pub solver_signal_norm: f64,
}

/// All symbol rounds of one realization.
#[derive(Debug, Clone)]
pub struct TrialSignals {
    pub rounds: Vec<SymbolRound>,
}

impl TrialSignals {
    /// Total clean received power on the data subcarriers.
    pub fn clean_power(&self) -> f64 {
        self.rounds
            .iter()
            .map(|round| power_of(&round.reference_freq))
            .sum()
    }
}

/// Squared error and power contributions of one realization at one fronthaul
/// setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationResult {
    pub adc_bits: u32,
    pub fronthaul_bits: FronthaulBits,
    pub proposed_error: f64,
    pub benchmark_error: f64,
    pub clean_power: f64,
}

impl RealizationResult {
    pub fn error(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Proposed => self.proposed_error,
            Scheme::Benchmark => self.benchmark_error,
        }
    }
}

fn power_of(freq: &[Vec<Complex64>]) -> f64 {
    freq.iter()
        .flat_map(|row| row.iter().map(|v| v.norm_sqr()))
        .sum()
}

fn squared_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(&va, &vb)| (va - vb).norm_sqr()))
        .sum()
}

fn components_of(values: &[Complex64]) -> Vec<f64> {
    values.iter().flat_map(|v| [v.re, v.im]).collect()
}

fn component_rms(values: &[Complex64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v.norm_sqr()).sum::<f64>() / (2.0 * values.len() as f64)).sqrt()
}

/// Trains a quantizer for `signal` according to the configured policy.
fn train_quantizer(
    signal: &[Complex64],
    bits: u32,
    training: QuantizerTraining,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<ScalarQuantizer> {
    match training {
        QuantizerTraining::Empirical => {
            ScalarQuantizer::design_lloyd_max(&components_of(signal), bits)
        }
        QuantizerTraining::GaussianMatched => {
            let rms = component_rms(signal);
            if !(rms.is_finite() && rms > 0.0) {
                return Err(Error::Quantizer(
                    "signal RMS is zero; cannot fit a Gaussian training set".into(),
                ));
            }
            let normal = rand_distr::Normal::new(0.0, rms)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let samples: Vec<f64> = (0..GAUSSIAN_TRAINING_SAMPLES)
                .map(|_| rand_distr::Distribution::sample(&normal, rng))
                .collect();
            ScalarQuantizer::design_lloyd_max(&samples, bits)
        }
    }
}

fn validate_params(params: &RealizationParams) -> Result<()> {
    let positive_counts = [
        ("users", params.num_users),
        ("antennas", params.num_antennas),
        ("DFT size", params.dft_size),
        ("data subcarriers", params.num_data),
        ("channel taps", params.num_taps),
        ("OFDM symbols", params.ofdm_symbols),
    ];
    for (name, v) in positive_counts {
        if v == 0 {
            return Err(Error::InvalidParameter(format!("{name} must be positive")));
        }
    }
    if !(params.sample_period_s.is_finite() && params.sample_period_s > 0.0) {
        return Err(Error::InvalidParameter("sample period must be positive".into()));
    }
    Ok(())
}

/// Runs the random and deterministic stages of one realization that do not
/// depend on the fronthaul resolution: drop, channel, transmit, noise, ADC,
/// reference transform, and both schemes' pre-fronthaul signals.
///
/// All randomness is drawn from named substreams of `streams`, so two calls
/// with the same streams are bit-identical, and calls that differ only in
/// `adc_bits`, reconstruction settings, or modulation share the same drop,
/// channel, and noise (paired sampling). The ADC itself consumes no
/// randomness under empirical training.
pub fn simulate_realization(
    params: &RealizationParams,
    streams: &TrialStreams,
) -> Result<TrialSignals> {
    validate_params(params)?;
    let constellation = Constellation::new(params.modulation);
    let dft = UnitaryDft::new(params.dft_size);
    let plan = SubcarrierPlan::uniform(
        params.dft_size,
        params.num_data,
        params.num_pilots,
        params.num_taps,
        &mut streams.stream("plan"),
    )?;
    let geometry = DropGeometry::sample(
        params.num_users,
        params.area_side_m,
        params.height_m,
        &mut streams.stream("drop"),
    )?;
    let large_scale = LargeScaleFading::sample(
        &geometry,
        params.tx_power_w,
        params.noise_variance_w,
        &mut streams.stream("shadowing"),
    )?;
    let ts = params.sample_period_s;
    let mut profile_rng = streams.stream("delay-profile");
    let profiles: Vec<PowerDelayProfile> = (0..params.num_users)
        .map(|_| {
            PowerDelayProfile::sample_clustered(
                params.num_taps,
                ts,
                params.delay_profile.cluster_decay_periods * ts,
                params.delay_profile.ray_decay_periods * ts,
                params.delay_profile.cluster_spacing_periods * ts,
                params.delay_profile.clusters,
                &mut profile_rng,
            )
        })
        .collect::<Result<_>>()?;
    let tx_powers: Vec<f64> = (0..params.num_users)
        .map(|k| large_scale.tx_power_w(k))
        .collect();

    let mut rounds = Vec::with_capacity(params.ofdm_symbols);
    for symbol_index in 0..params.ofdm_symbols as u64 {
        let channel = ChannelRealization::sample(
            &large_scale,
            &profiles,
            params.num_antennas,
            &mut streams.indexed_stream("taps", symbol_index),
        )?;
        let grid = FrequencyGrid::draw(
            &plan,
            &constellation,
            params.num_users,
            &mut streams.indexed_stream("symbols", symbol_index),
        );
        let tx_symbols: Vec<_> = (0..params.num_users)
            .map(|k| dft.idft_time_samples(grid.user(k), plan.cp_len()))
            .collect();
        let clean_time = apply_channel(&channel, &tx_symbols, &tx_powers)?;
        let noisy_time = add_noise(
            &clean_time,
            params.noise_variance_w,
            &mut streams.indexed_stream("noise", symbol_index),
        )?;

        let stacked_noisy = stack_antenna_series(&noisy_time);
        let adc = train_quantizer(
            &stacked_noisy,
            params.adc_bits,
            params.quantizer_training,
            &mut streams.indexed_stream("adc-training", symbol_index),
        )?;
        let observed = adc.quantize_vector(&stacked_noisy);
        let quantized_time = unstack_antenna_series(&observed.values, params.num_antennas);

        let reference_freq: Vec<Vec<Complex64>> = clean_time
            .iter()
            .map(|row| dft.dft_at_indices(row, plan.data_indices()))
            .collect();
        let benchmark_freq: Vec<Vec<Complex64>> = quantized_time
            .iter()
            .map(|row| dft.dft_at_indices(row, plan.data_indices()))
            .collect();
        let sent_symbols: Vec<Vec<Complex64>> = (0..params.num_users)
            .map(|k| {
                plan.data_indices()
                    .iter()
                    .map(|&m| grid.user(k)[m])
                    .collect()
            })
            .collect();

        let round = match params.reconstruction {
            ReconstructionMode::PassThrough => SymbolRound {
                proposed_freq: benchmark_freq.clone(),
                reference_freq,
                benchmark_freq,
                clean_time,
                quantized_time,
                sent_symbols,
                recovered_symbols: Vec::new(),
                solver_model_residual: 0.0,
                solver_signal_norm: 0.0,
            },
            ReconstructionMode::Admm => {
                let pilot = build_pilot_signal(&dft, &channel, &grid, &plan, &tx_powers)?;
                let matrix = build_observation_matrix(&channel, &plan, &tx_powers)?;
                let (lower, upper) = quantization_bounds(&adc, &observed);

                let gain = match params.solver_scaling {
                    SolverScaling::Off => 1.0,
                    SolverScaling::Rms => {
                        let rms = component_rms(&observed.values);
                        if rms > 0.0 {
                            1.0 / rms
                        } else {
                            1.0
                        }
                    }
                };
                let dims = ModelDims {
                    num_antennas: params.num_antennas,
                    dft_size: params.dft_size,
                    num_users: params.num_users,
                    num_data: params.num_data,
                    num_taps: params.num_taps,
                };
                let model = ObservationModel::lift_to_real(
                    &(&matrix * Complex64::from(gain)),
                    &pilot.iter().map(|v| v * gain).collect::<Vec<_>>(),
                    &observed.values.iter().map(|v| v * gain).collect::<Vec<_>>(),
                    lower * gain,
                    upper * gain,
                    dims,
                )?;
                let outcome = admm::run(&model, &constellation, &params.admm)?;
                let estimate: Vec<Complex64> =
                    outcome.estimate.iter().map(|v| v / gain).collect();
                let estimate_time = unstack_antenna_series(&estimate, params.num_antennas);
                let proposed_freq = estimate_time
                    .iter()
                    .map(|row| dft.dft_at_indices(row, plan.data_indices()))
                    .collect();
                let recovered_symbols: Vec<Vec<Complex64>> = (0..params.num_users)
                    .map(|k| {
                        outcome.projected_symbols
                            [k * params.num_data..(k + 1) * params.num_data]
                            .to_vec()
                    })
                    .collect();
                SymbolRound {
                    reference_freq,
                    proposed_freq,
                    benchmark_freq,
                    clean_time,
                    quantized_time,
                    sent_symbols,
                    recovered_symbols,
                    solver_model_residual: outcome
                        .residuals
                        .last()
                        .map_or(0.0, |r| r.model),
                    solver_signal_norm: outcome.signal_norm,
                }
            }
        };
        rounds.push(round);
    }
    Ok(TrialSignals { rounds })
}

/// Applies one fronthaul setting to already-simulated signals and returns
/// the error/power contributions of both schemes.
///
/// For finite resolutions, one quantizer per scheme is trained on that
/// scheme's own frequency-domain components (pooled over the realization's
/// symbols); `inf` forwards the signals unchanged. Gaussian-matched training
/// draws from per-(scheme, resolution) substreams so schemes stay
/// independently seeded.
pub fn fronthaul_stage(
    signals: &TrialSignals,
    adc_bits: u32,
    fronthaul_bits: FronthaulBits,
    training: QuantizerTraining,
    streams: &TrialStreams,
) -> Result<RealizationResult> {
    let clean_power = signals.clean_power();
    let mut errors = [0.0f64; 2];
    for (slot, scheme) in [Scheme::Proposed, Scheme::Benchmark].into_iter().enumerate() {
        let per_round: Vec<&Vec<Vec<Complex64>>> = signals
            .rounds
            .iter()
            .map(|round| match scheme {
                Scheme::Proposed => &round.proposed_freq,
                Scheme::Benchmark => &round.benchmark_freq,
            })
            .collect();
        let error = match fronthaul_bits {
            FronthaulBits::Unquantized => signals
                .rounds
                .iter()
                .zip(&per_round)
                .map(|(round, freq)| squared_distance(freq, &round.reference_freq))
                .sum(),
            FronthaulBits::Bits(bits) => {
                let pooled: Vec<Complex64> = per_round
                    .iter()
                    .flat_map(|freq| freq.iter().flatten().copied())
                    .collect();
                let mut rng = streams
                    .indexed_stream(&format!("fronthaul-training-{scheme}"), u64::from(bits));
                let quantizer = train_quantizer(&pooled, bits, training, &mut rng)?;
                signals
                    .rounds
                    .iter()
                    .zip(&per_round)
                    .map(|(round, freq)| {
                        let transported: Vec<Vec<Complex64>> = freq
                            .iter()
                            .map(|row| quantizer.quantize_vector(row).values)
                            .collect();
                        squared_distance(&transported, &round.reference_freq)
                    })
                    .sum()
            }
        };
        errors[slot] = error;
    }
    Ok(RealizationResult {
        adc_bits,
        fronthaul_bits,
        proposed_error: errors[0],
        benchmark_error: errors[1],
        clean_power,
    })
}

/// Simulates one realization and scores it at one fronthaul setting.
pub fn run_realization(
    params: &RealizationParams,
    fronthaul_bits: FronthaulBits,
    streams: &TrialStreams,
) -> Result<RealizationResult> {
    let signals = simulate_realization(params, streams)?;
    fronthaul_stage(
        &signals,
        params.adc_bits,
        fronthaul_bits,
        params.quantizer_training,
        streams,
    )
}

/// Reduces per-realization results to one NMSE value for a scheme.
pub fn aggregate_nmse(
    results: &[RealizationResult],
    scheme: Scheme,
    estimator: NmseEstimator,
) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyResult(
            "NMSE aggregation needs at least one realization".into(),
        ));
    }
    match estimator {
        NmseEstimator::RatioOfSums => {
            let error: f64 = results.iter().map(|r| r.error(scheme)).sum();
            let power: f64 = results.iter().map(|r| r.clean_power).sum();
            if power <= 0.0 {
                return Err(Error::EmptyResult(
                    "total clean signal power is zero".into(),
                ));
            }
            Ok(error / power)
        }
        NmseEstimator::MeanOfRatios => {
            let mut total = 0.0;
            for r in results {
                if r.clean_power <= 0.0 {
                    return Err(Error::EmptyResult(
                        "a realization has zero clean signal power".into(),
                    ));
                }
                total += r.error(scheme) / r.clean_power;
            }
            Ok(total / results.len() as f64)
        }
    }
}
