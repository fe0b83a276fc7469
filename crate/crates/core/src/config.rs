//! Experiment configuration: defaults, a flat `key = value` file format,
//! validation, and translation into per-realization simulation parameters.

use std::path::Path;

use crate::admm::{AdmmConfig, EstimateSource};
use crate::channel::{dbm_to_watts, noise_variance_dbm};
use crate::pipeline::{
    DelayProfileParams, FronthaulBits, NmseEstimator, QuantizerTraining, RealizationParams,
    ReconstructionMode, SolverScaling,
};
use crate::signal::Modulation;
use crate::{Error, Result};

/// Full description of a sweep experiment. `Default` is the reference
/// single-AP setup: a 500 m square served by one 2x2-array access point,
/// 8 single-antenna users, 256 subcarriers (64 data, 64 pilot) at 60 kHz
/// spacing, 6 channel taps, 7 dB noise figure, 0.1 W uplink power, a
/// 5-cluster exponential delay profile, and a sweep over 1..=5 ADC bits
/// with fronthaul resolutions {2, 4, inf} at 50 trials per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub area_side_m: f64,
    pub height_m: f64,
    pub num_aps: usize,
    pub num_ues: usize,
    pub num_antennas: usize,
    pub array_shape: (usize, usize),
    pub m_total: usize,
    pub m_used: usize,
    pub num_pilots: usize,
    pub num_taps: usize,
    pub subcarrier_spacing_hz: f64,
    pub noise_figure_db: f64,
    pub tx_power_w: f64,
    pub sv_clusters: usize,
    pub sv_cluster_decay: f64,
    pub sv_ray_decay: f64,
    pub sv_cluster_spacing: f64,
    pub modulations: Vec<Modulation>,
    pub adc_bits: Vec<u32>,
    pub fronthaul_bits: Vec<FronthaulBits>,
    pub admm_penalty: f64,
    pub admm_iterations: usize,
    pub admm_stop_tolerance: f64,
    pub reconstruction_output: EstimateSource,
    pub quantizer_training: QuantizerTraining,
    pub nmse_estimator: NmseEstimator,
    pub solver_scaling: SolverScaling,
    pub reconstruction: ReconstructionMode,
    pub ofdm_symbols: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            area_side_m: 500.0,
            height_m: 10.0,
            num_aps: 1,
            num_ues: 8,
            num_antennas: 4,
            array_shape: (2, 2),
            m_total: 256,
            m_used: 64,
            num_pilots: 64,
            num_taps: 6,
            subcarrier_spacing_hz: 60_000.0,
            noise_figure_db: 7.0,
            tx_power_w: 0.1,
            sv_clusters: 5,
            sv_cluster_decay: 2.0,
            sv_ray_decay: 2.0,
            sv_cluster_spacing: 2.0,
            modulations: vec![Modulation::Qpsk],
            adc_bits: vec![1, 2, 3, 4, 5],
            fronthaul_bits: vec![
                FronthaulBits::Bits(2),
                FronthaulBits::Bits(4),
                FronthaulBits::Unquantized,
            ],
            admm_penalty: 10.0,
            admm_iterations: 20,
            admm_stop_tolerance: 0.0,
            reconstruction_output: EstimateSource::ModelImage,
            quantizer_training: QuantizerTraining::Empirical,
            nmse_estimator: NmseEstimator::RatioOfSums,
            solver_scaling: SolverScaling::Rms,
            reconstruction: ReconstructionMode::Admm,
            ofdm_symbols: 1,
            trials: 50,
            seed: 1,
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_scalar<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(line, format!("invalid value {value:?} for key `{key}`")))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| parse_scalar(line, key, item.trim()))
        .collect()
}

fn parse_fronthaul_list(line: usize, value: &str) -> Result<Vec<FronthaulBits>> {
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse::<FronthaulBits>()
                .map_err(|e| config_err(line, e.to_string()))
        })
        .collect()
}

fn parse_array_shape(line: usize, value: &str) -> Result<(usize, usize)> {
    let bad = || config_err(line, format!("array_geometry must look like `2x2`, got {value:?}"));
    let (rows, cols) = value.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        rows.trim().parse().map_err(|_| bad())?,
        cols.trim().parse().map_err(|_| bad())?,
    ))
}

impl ExperimentConfig {
    /// Parses overrides in the flat `key = value` format (one pair per line,
    /// `#` starts a comment, blank lines ignored, later assignments win) on
    /// top of the defaults, then validates. Unknown keys are rejected with
    /// their line number.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (index, raw_line) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected `key = value`, got {content:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(config_err(line, format!("empty value for key `{key}`")));
            }
            match key {
                "area_side_m" => config.area_side_m = parse_scalar(line, key, value)?,
                "height_m" => config.height_m = parse_scalar(line, key, value)?,
                "num_aps" => config.num_aps = parse_scalar(line, key, value)?,
                "num_ues" => config.num_ues = parse_scalar(line, key, value)?,
                "num_antennas" => config.num_antennas = parse_scalar(line, key, value)?,
                "array_geometry" => config.array_shape = parse_array_shape(line, value)?,
                "m_total" => config.m_total = parse_scalar(line, key, value)?,
                "m_used" => config.m_used = parse_scalar(line, key, value)?,
                "num_pilots" => config.num_pilots = parse_scalar(line, key, value)?,
                "num_taps" => config.num_taps = parse_scalar(line, key, value)?,
                "subcarrier_spacing_hz" => {
                    config.subcarrier_spacing_hz = parse_scalar(line, key, value)?
                }
                "noise_figure_db" => config.noise_figure_db = parse_scalar(line, key, value)?,
                "tx_power_w" => config.tx_power_w = parse_scalar(line, key, value)?,
                "sv_clusters" => config.sv_clusters = parse_scalar(line, key, value)?,
                "sv_cluster_decay" => config.sv_cluster_decay = parse_scalar(line, key, value)?,
                "sv_ray_decay" => config.sv_ray_decay = parse_scalar(line, key, value)?,
                "sv_cluster_spacing" => {
                    config.sv_cluster_spacing = parse_scalar(line, key, value)?
                }
                "modulation" => {
                    config.modulations = value
                        .split(',')
                        .map(|item| {
                            item.trim()
                                .parse::<Modulation>()
                                .map_err(|e| config_err(line, e.to_string()))
                        })
                        .collect::<Result<_>>()?
                }
                "b_adc" => config.adc_bits = parse_list(line, key, value)?,
                "b_frt" => config.fronthaul_bits = parse_fronthaul_list(line, value)?,
                "admm_rho" => config.admm_penalty = parse_scalar(line, key, value)?,
                "admm_iterations" => config.admm_iterations = parse_scalar(line, key, value)?,
                "admm_stop_tolerance" => {
                    config.admm_stop_tolerance = parse_scalar(line, key, value)?
                }
                "reconstruction_output" => {
                    config.reconstruction_output = match value {
                        "model" => EstimateSource::ModelImage,
                        "signal" => EstimateSource::SignalIterate,
                        "interval" => EstimateSource::IntervalProjection,
                        other => {
                            return Err(config_err(
                                line,
                                format!(
                                    "reconstruction_output must be model, signal, or interval; got {other:?}"
                                ),
                            ))
                        }
                    }
                }
                "quantizer_training" => {
                    config.quantizer_training = match value {
                        "empirical" => QuantizerTraining::Empirical,
                        "gaussian" => QuantizerTraining::GaussianMatched,
                        other => {
                            return Err(config_err(
                                line,
                                format!("quantizer_training must be empirical or gaussian; got {other:?}"),
                            ))
                        }
                    }
                }
                "nmse_estimator" => {
                    config.nmse_estimator = match value {
                        "ratio_of_sums" => NmseEstimator::RatioOfSums,
                        "mean_of_ratios" => NmseEstimator::MeanOfRatios,
                        other => {
                            return Err(config_err(
                                line,
                                format!(
                                    "nmse_estimator must be ratio_of_sums or mean_of_ratios; got {other:?}"
                                ),
                            ))
                        }
                    }
                }
                "solver_scaling" => {
                    config.solver_scaling = match value {
                        "rms" => SolverScaling::Rms,
                        "none" => SolverScaling::Off,
                        other => {
                            return Err(config_err(
                                line,
                                format!("solver_scaling must be rms or none; got {other:?}"),
                            ))
                        }
                    }
                }
                "reconstruction" => {
                    config.reconstruction = match value {
                        "admm" => ReconstructionMode::Admm,
                        "passthrough" => ReconstructionMode::PassThrough,
                        other => {
                            return Err(config_err(
                                line,
                                format!("reconstruction must be admm or passthrough; got {other:?}"),
                            ))
                        }
                    }
                }
                "ofdm_symbols" => config.ofdm_symbols = parse_scalar(line, key, value)?,
                "trials" => config.trials = parse_scalar(line, key, value)?,
                "seed" => config.seed = parse_scalar(line, key, value)?,
                other => return Err(config_err(line, format!("unknown key `{other}`"))),
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Reads and parses a config file; an empty file yields the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Checks every structural invariant the simulation relies on.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::ConfigValidation(message));
        if self.num_aps != 1 {
            return fail(format!(
                "this build models exactly one access point; num_aps = {}",
                self.num_aps
            ));
        }
        let positive_counts = [
            ("num_ues", self.num_ues),
            ("num_antennas", self.num_antennas),
            ("m_total", self.m_total),
            ("m_used", self.m_used),
            ("num_taps", self.num_taps),
            ("sv_clusters", self.sv_clusters),
            ("admm_iterations", self.admm_iterations),
            ("ofdm_symbols", self.ofdm_symbols),
            ("trials", self.trials),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !self.m_total.is_multiple_of(self.m_used) {
            return fail(format!(
                "data subcarriers must divide the DFT size for uniform spacing; \
                 m_total = {}, m_used = {}",
                self.m_total, self.m_used
            ));
        }
        if self.m_used + self.num_pilots > self.m_total {
            return fail(format!(
                "m_used + num_pilots = {} exceeds m_total = {}",
                self.m_used + self.num_pilots,
                self.m_total
            ));
        }
        if self.num_taps > self.m_total {
            return fail(format!(
                "num_taps = {} exceeds the symbol length m_total = {}",
                self.num_taps, self.m_total
            ));
        }
        if self.array_shape.0 * self.array_shape.1 != self.num_antennas {
            return fail(format!(
                "array_geometry {}x{} does not match num_antennas = {}",
                self.array_shape.0, self.array_shape.1, self.num_antennas
            ));
        }
        let positive_reals = [
            ("area_side_m", self.area_side_m),
            ("height_m", self.height_m),
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("tx_power_w", self.tx_power_w),
            ("sv_cluster_decay", self.sv_cluster_decay),
            ("sv_ray_decay", self.sv_ray_decay),
            ("sv_cluster_spacing", self.sv_cluster_spacing),
            ("admm_rho", self.admm_penalty),
        ];
        for (name, v) in positive_reals {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        if !self.noise_figure_db.is_finite() {
            return fail("noise_figure_db must be finite".into());
        }
        if !(self.admm_stop_tolerance.is_finite() && self.admm_stop_tolerance >= 0.0) {
            return fail(format!(
                "admm_stop_tolerance must be nonnegative, got {}",
                self.admm_stop_tolerance
            ));
        }
        if self.modulations.is_empty() {
            return fail("modulation sweep list must be nonempty".into());
        }
        if self.adc_bits.is_empty() {
            return fail("b_adc sweep list must be nonempty".into());
        }
        if self.fronthaul_bits.is_empty() {
            return fail("b_frt sweep list must be nonempty".into());
        }
        for &bits in &self.adc_bits {
            if bits == 0 || bits > 24 {
                return fail(format!("b_adc entries must be 1..=24, got {bits}"));
            }
        }
        Ok(())
    }

    /// Total signal bandwidth `B = M * subcarrier spacing` in Hz.
    pub fn bandwidth_hz(&self) -> f64 {
        self.m_total as f64 * self.subcarrier_spacing_hz
    }

    /// Sample period `1 / B` in seconds.
    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.bandwidth_hz()
    }

    /// Receiver thermal-noise variance in watts.
    pub fn noise_variance_w(&self) -> Result<f64> {
        Ok(dbm_to_watts(noise_variance_dbm(
            self.bandwidth_hz(),
            self.noise_figure_db,
        )?))
    }

    /// Solver settings, with a zero tolerance meaning "run all iterations".
    pub fn admm_config(&self) -> AdmmConfig {
        AdmmConfig {
            penalty: self.admm_penalty,
            iterations: self.admm_iterations,
            reuse_factorization: true,
            stop_tolerance: (self.admm_stop_tolerance > 0.0).then_some(self.admm_stop_tolerance),
            estimate: self.reconstruction_output,
        }
    }

    /// Simulation parameters for one sweep cell.
    pub fn realization_params(
        &self,
        modulation: Modulation,
        adc_bits: u32,
    ) -> Result<RealizationParams> {
        Ok(RealizationParams {
            num_users: self.num_ues,
            num_antennas: self.num_antennas,
            dft_size: self.m_total,
            num_data: self.m_used,
            num_pilots: self.num_pilots,
            num_taps: self.num_taps,
            ofdm_symbols: self.ofdm_symbols,
            area_side_m: self.area_side_m,
            height_m: self.height_m,
            tx_power_w: self.tx_power_w,
            noise_variance_w: self.noise_variance_w()?,
            sample_period_s: self.sample_period_s(),
            delay_profile: DelayProfileParams {
                clusters: self.sv_clusters,
                cluster_decay_periods: self.sv_cluster_decay,
                ray_decay_periods: self.sv_ray_decay,
                cluster_spacing_periods: self.sv_cluster_spacing,
            },
            modulation,
            adc_bits,
            admm: self.admm_config(),
            quantizer_training: self.quantizer_training,
            solver_scaling: self.solver_scaling,
            reconstruction: self.reconstruction,
        })
    }
}
