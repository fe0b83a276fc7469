//! Splitting solver for the signal reconstruction problem.
//!
//! Given the real-lifted observation model, the solver minimizes
//! `|| z - y ||^2` subject to three constraints handled by auxiliary copies
//! and scaled dual variables:
//!
//! * `z` lies inside the per-component quantization intervals (copy `t`);
//! * `z = A x + p` for some symbol vector `x` (dual on the model equation);
//! * `x` entries belong to the finite constellation level sets (copy `b`).
//!
//! Every subproblem has a closed form: a diagonal quadratic for `z`, interval
//! clamping for `t`, nearest-level rounding for `b`, and one SPD solve with
//! the cached Gram factorization for `x`. The constellation constraint makes
//! the overall problem non-convex, so the iteration is run for a fixed number
//! of sweeps rather than to a convergence guarantee.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::linmodel::{unlift_to_complex, ObservationModel};
use crate::signal::{nearest_level, Constellation};
use crate::{Error, Result};

/// Which iterate is reported as the reconstructed signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateSource {
    /// `A x + p` with the final symbol iterate: always model-consistent.
    #[default]
    ModelImage,
    /// The final unconstrained signal iterate `z`.
    SignalIterate,
    /// The final interval-projected copy `t`.
    IntervalProjection,
}

/// Solver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    /// Penalty weight of the three constraint terms.
    pub penalty: f64,
    /// Number of full update sweeps.
    pub iterations: usize,
    /// Reuse one Gram factorization across sweeps (results are identical;
    /// disabling is only useful for benchmarking the cache).
    pub reuse_factorization: bool,
    /// Optional early stop: end once all three constraint residuals fall
    /// below this norm. `None` runs exactly `iterations` sweeps.
    pub stop_tolerance: Option<f64>,
    /// Iterate reported as the reconstruction.
    pub estimate: EstimateSource,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            penalty: 10.0,
            iterations: 20,
            reuse_factorization: true,
            stop_tolerance: None,
            estimate: EstimateSource::ModelImage,
        }
    }
}

impl AdmmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.penalty.is_finite() && self.penalty > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "penalty must be positive, got {}",
                self.penalty
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("need at least one sweep".into()));
        }
        if let Some(tol) = self.stop_tolerance {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "stop tolerance must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }
}

/// Norms of the three constraint residuals after one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualTriple {
    /// `|| t - z ||`
    pub interval: f64,
    /// `|| b - x ||`
    pub constellation: f64,
    /// `|| z - A x - p ||`
    pub model: f64,
}

/// Serializes a residual log as CSV (`iteration,r1,r2,r3`).
pub fn residuals_to_csv(residuals: &[ResidualTriple]) -> String {
    let mut out = String::from("iteration,r1,r2,r3\n");
    for (i, r) in residuals.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e}\n",
            i + 1,
            r.interval,
            r.constellation,
            r.model
        ));
    }
    out
}

/// Cached SPD factorization of `I + A^T A`.
///
/// An empty symbol dimension (all-pilot plans) degenerates to a zero-size
/// solve and is handled explicitly.
pub struct GramFactor {
    cholesky: Option<Cholesky<f64, Dyn>>,
}

impl GramFactor {
    pub fn new(model: &ObservationModel) -> Result<Self> {
        let a = model.matrix();
        if a.ncols() == 0 {
            return Ok(Self { cholesky: None });
        }
        let gram = DMatrix::identity(a.ncols(), a.ncols()) + a.tr_mul(a);
        let cholesky = Cholesky::new(gram).ok_or_else(|| {
            Error::InvalidParameter(
                "identity-plus-Gram matrix was not positive definite; \
                 the model contains non-finite entries"
                    .into(),
            )
        })?;
        Ok(Self {
            cholesky: Some(cholesky),
        })
    }

    /// Solves `(I + A^T A) v = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.cholesky {
            Some(cholesky) => cholesky.solve(rhs),
            None => rhs.clone_owned(),
        }
    }
}

/// All iterates of the solver. Names follow the roles: `signal` is the
/// reconstruction iterate, `interval_proj` its in-cell copy, `symbols` the
/// data-symbol iterate, `symbol_proj` its constellation-rounded copy.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub signal: DVector<f64>,
    pub interval_proj: DVector<f64>,
    pub symbols: DVector<f64>,
    pub symbol_proj: DVector<f64>,
    pub dual_interval: DVector<f64>,
    pub dual_symbols: DVector<f64>,
    pub dual_model: DVector<f64>,
    pub iteration: usize,
    pub residuals: Vec<ResidualTriple>,
}

impl AdmmState {
    /// Zero initialization; the interval copy starts clamped into its cell so
    /// it is feasible from the first sweep.
    pub fn init(model: &ObservationModel) -> Self {
        let rows = model.rows();
        let cols = model.cols();
        let mut interval_proj = DVector::zeros(rows);
        for i in 0..rows {
            interval_proj[i] = clamp(0.0, model.lower()[i], model.upper()[i]);
        }
        Self {
            signal: DVector::zeros(rows),
            interval_proj,
            symbols: DVector::zeros(cols),
            symbol_proj: DVector::zeros(cols),
            dual_interval: DVector::zeros(rows),
            dual_symbols: DVector::zeros(cols),
            dual_model: DVector::zeros(rows),
            iteration: 0,
            residuals: Vec::new(),
        }
    }

    /// Closed-form minimizer of the signal subproblem:
    /// `z = (y + rho (t + u1 + A x + p - u3)) / (1 + 2 rho)`.
    pub fn signal_update(&mut self, model: &ObservationModel, penalty: f64) {
        let image = model.image(&self.symbols);
        let pulled = &self.interval_proj + &self.dual_interval + image - &self.dual_model;
        self.signal = (model.observed() + pulled * penalty) / (1.0 + 2.0 * penalty);
    }

    /// Rounds `x - u2` onto the constellation level sets: the first half of
    /// the lifted vector holds real parts, the second half imaginary parts.
    pub fn constellation_update(&mut self, constellation: &Constellation) {
        let levels = constellation.axis_levels();
        for i in 0..self.symbols.len() {
            self.symbol_proj[i] = nearest_level(self.symbols[i] - self.dual_symbols[i], levels);
        }
    }

    /// Clamps `z - u1` into the per-component quantization cells; infinite
    /// bounds clamp one-sidedly.
    pub fn interval_update(&mut self, model: &ObservationModel) {
        for i in 0..self.signal.len() {
            self.interval_proj[i] = clamp(
                self.signal[i] - self.dual_interval[i],
                model.lower()[i],
                model.upper()[i],
            );
        }
    }

    /// Solves the symbol subproblem
    /// `(I + A^T A) x = b + u2 + A^T (z - p + u3)` with the cached factor.
    pub fn symbol_update(&mut self, model: &ObservationModel, factor: &GramFactor) {
        let pulled = &self.signal - model.pilot() + &self.dual_model;
        let rhs = &self.symbol_proj + &self.dual_symbols + model.matrix().tr_mul(&pulled);
        self.symbols = factor.solve(&rhs);
    }

    /// Scaled dual ascent on the three constraints, then logs the residuals.
    pub fn dual_update(&mut self, model: &ObservationModel) {
        let image = model.image(&self.symbols);
        let interval_gap = &self.interval_proj - &self.signal;
        let symbol_gap = &self.symbol_proj - &self.symbols;
        let model_gap = &self.signal - image;
        self.dual_interval += &interval_gap;
        self.dual_symbols += &symbol_gap;
        self.dual_model += &model_gap;
        self.residuals.push(ResidualTriple {
            interval: interval_gap.norm(),
            constellation: symbol_gap.norm(),
            model: model_gap.norm(),
        });
        self.iteration += 1;
    }

    fn all_finite(&self) -> bool {
        [
            &self.signal,
            &self.interval_proj,
            &self.symbols,
            &self.symbol_proj,
            &self.dual_interval,
            &self.dual_symbols,
            &self.dual_model,
        ]
        .iter()
        .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

fn clamp(x: f64, lower: f64, upper: f64) -> f64 {
    x.max(lower).min(upper)
}

/// Solver output, un-lifted back to complex vectors.
#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    /// Reconstructed time-domain signal (length `N * M`, stacked `q*N + n`).
    pub estimate: Vec<Complex64>,
    /// Final symbol iterate `x` (length `K * num_data`).
    pub symbols: Vec<Complex64>,
    /// Constellation-rounded symbols `b`; exact constellation points.
    pub projected_symbols: Vec<Complex64>,
    /// Residual norms per sweep.
    pub residuals: Vec<ResidualTriple>,
    /// Norm of the final signal iterate, for relative-residual checks.
    pub signal_norm: f64,
}

/// Runs the configured number of sweeps in the fixed order
/// signal, constellation copy, interval copy, symbols, duals.
pub fn run(
    model: &ObservationModel,
    constellation: &Constellation,
    config: &AdmmConfig,
) -> Result<AdmmOutcome> {
    config.validate()?;
    let cached = GramFactor::new(model)?;
    let mut state = AdmmState::init(model);
    for _ in 0..config.iterations {
        let fresh;
        let factor = if config.reuse_factorization {
            &cached
        } else {
            fresh = GramFactor::new(model)?;
            &fresh
        };
        state.signal_update(model, config.penalty);
        state.constellation_update(constellation);
        state.interval_update(model);
        state.symbol_update(model, factor);
        state.dual_update(model);
        if !state.all_finite() {
            return Err(Error::NonFinite(state.iteration));
        }
        if let Some(tol) = config.stop_tolerance {
            let last = state.residuals.last().expect("logged this sweep");
            if last.interval < tol && last.constellation < tol && last.model < tol {
                break;
            }
        }
    }
    let lifted_estimate = match config.estimate {
        EstimateSource::ModelImage => model.image(&state.symbols),
        EstimateSource::SignalIterate => state.signal.clone(),
        EstimateSource::IntervalProjection => state.interval_proj.clone(),
    };
    Ok(AdmmOutcome {
        estimate: unlift_to_complex(&lifted_estimate),
        symbols: unlift_to_complex(&state.symbols),
        projected_symbols: unlift_to_complex(&state.symbol_proj),
        signal_norm: state.signal.norm(),
        residuals: state.residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::ModelDims;
    use crate::signal::Modulation;
    use approx::assert_abs_diff_eq;

    /// Complex scalar model (one observation, one symbol): A = 1 + 0.5i,
    /// p = 0.2 - 0.1i, 1-bit observation (+1, +1) with cells (0, inf).
    fn toy_model() -> ObservationModel {
        let matrix = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.5, 1.0]);
        ObservationModel::from_real_parts(
            matrix,
            DVector::from_vec(vec![0.2, -0.1]),
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![f64::INFINITY, f64::INFINITY]),
            ModelDims {
                num_antennas: 1,
                dft_size: 1,
                num_users: 1,
                num_data: 1,
                num_taps: 1,
            },
        )
        .unwrap()
    }

    #[test]
    fn init_is_zero_with_feasible_interval_copy() {
        let model = toy_model();
        let state = AdmmState::init(&model);
        assert!(state.signal.iter().all(|&v| v == 0.0));
        assert!(state.symbols.iter().all(|&v| v == 0.0));
        assert!(state.dual_interval.iter().all(|&v| v == 0.0));
        assert!(state.residuals.is_empty());
        for i in 0..model.rows() {
            assert!(state.interval_proj[i] >= model.lower()[i]);
            assert!(state.interval_proj[i] <= model.upper()[i]);
        }
        // Cells here are (0, inf): zero clamps to the lower edge.
        assert_eq!(state.interval_proj.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn vanishing_penalty_recovers_the_observation() {
        let model = toy_model();
        let mut state = AdmmState::init(&model);
        state.signal_update(&model, 1e-12);
        assert_abs_diff_eq!(state.signal[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(state.signal[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_matrix_symbol_update_returns_b_plus_dual() {
        let matrix = DMatrix::zeros(2, 2);
        let model = ObservationModel::from_real_parts(
            matrix,
            DVector::zeros(2),
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![f64::INFINITY, f64::INFINITY]),
            ModelDims {
                num_antennas: 1,
                dft_size: 1,
                num_users: 1,
                num_data: 1,
                num_taps: 1,
            },
        )
        .unwrap();
        let factor = GramFactor::new(&model).unwrap();
        let mut state = AdmmState::init(&model);
        state.symbol_proj = DVector::from_vec(vec![0.3, -0.8]);
        state.dual_symbols = DVector::from_vec(vec![0.1, 0.25]);
        state.symbol_update(&model, &factor);
        assert_abs_diff_eq!(state.symbols[0], 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(state.symbols[1], -0.55, epsilon = 1e-14);
    }

    #[test]
    fn interval_update_clamps_one_sidedly() {
        let model = toy_model();
        let mut state = AdmmState::init(&model);
        state.signal = DVector::from_vec(vec![-3.0, 5.0]);
        state.interval_update(&model);
        assert_eq!(state.interval_proj[0], 0.0); // clamped up to the cell edge
        assert_eq!(state.interval_proj[1], 5.0); // inside (0, inf): unchanged
    }

    #[test]
    fn constellation_update_rounds_each_half() {
        let model = toy_model();
        let constellation = Constellation::new(Modulation::Qpsk);
        let mut state = AdmmState::init(&model);
        state.symbols = DVector::from_vec(vec![0.9, -0.2]);
        state.constellation_update(&constellation);
        let a = 1.0 / 2.0_f64.sqrt();
        assert_eq!(state.symbol_proj[0], a);
        assert_eq!(state.symbol_proj[1], -a);
    }

    #[test]
    fn one_sweep_matches_hand_computation() {
        // Every number below is computed by hand from the closed forms with
        // penalty = 2 on the toy model.
        let model = toy_model();
        let constellation = Constellation::new(Modulation::Qpsk);
        let factor = GramFactor::new(&model).unwrap();
        let mut state = AdmmState::init(&model);
        let penalty = 2.0;

        state.signal_update(&model, penalty);
        // z = (y + 2 p) / 5 = ([1,1] + [0.4,-0.2]) / 5
        assert_abs_diff_eq!(state.signal[0], 0.28, epsilon = 1e-15);
        assert_abs_diff_eq!(state.signal[1], 0.16, epsilon = 1e-15);

        state.constellation_update(&constellation);
        // projection of 0 ties toward the smaller level -1/sqrt(2)
        let level = -(1.0 / 2.0_f64.sqrt());
        assert_eq!(state.symbol_proj.as_slice(), &[level, level]);

        state.interval_update(&model);
        assert_abs_diff_eq!(state.interval_proj[0], 0.28, epsilon = 1e-15);
        assert_abs_diff_eq!(state.interval_proj[1], 0.16, epsilon = 1e-15);

        state.symbol_update(&model, &factor);
        // rhs = b + A^T (z - p) = [-1/sqrt(2) + 0.21, -1/sqrt(2) + 0.22],
        // I + A^T A = 2.25 I.
        let x0 = (level + 0.21) / 2.25;
        let x1 = (level + 0.22) / 2.25;
        assert_abs_diff_eq!(state.symbols[0], x0, epsilon = 1e-15);
        assert_abs_diff_eq!(state.symbols[1], x1, epsilon = 1e-15);

        state.dual_update(&model);
        assert_eq!(state.dual_interval.as_slice(), &[0.0, 0.0]); // t == z
        assert_abs_diff_eq!(state.dual_symbols[0], level - x0, epsilon = 1e-15);
        assert_abs_diff_eq!(state.dual_symbols[1], level - x1, epsilon = 1e-15);
        // u3 = z - A x - p with A = [[1,-0.5],[0.5,1]]
        let ax = [x0 - 0.5 * x1, 0.5 * x0 + x1];
        assert_abs_diff_eq!(state.dual_model[0], 0.28 - ax[0] - 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(state.dual_model[1], 0.16 - ax[1] + 0.1, epsilon = 1e-15);

        assert_eq!(state.iteration, 1);
        assert_eq!(state.residuals.len(), 1);
        let r = state.residuals[0];
        assert_abs_diff_eq!(r.interval, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            r.constellation,
            ((level - x0).powi(2) + (level - x1).powi(2)).sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn satisfied_constraints_leave_duals_unchanged() {
        let model = toy_model();
        let mut state = AdmmState::init(&model);
        // Fabricate a perfectly consistent state: x free, z = A x + p, t = z,
        // b = x.
        state.symbols = DVector::from_vec(vec![0.4, 0.2]);
        state.signal = model.image(&state.symbols);
        state.interval_proj = state.signal.clone();
        state.symbol_proj = state.symbols.clone();
        state.dual_update(&model);
        assert!(state.dual_interval.iter().all(|&v| v == 0.0));
        assert!(state.dual_symbols.iter().all(|&v| v == 0.0));
        assert!(state.dual_model.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn run_logs_one_residual_triple_per_sweep_and_is_deterministic() {
        let model = toy_model();
        let constellation = Constellation::new(Modulation::Qpsk);
        let config = AdmmConfig {
            iterations: 7,
            penalty: 10.0,
            ..AdmmConfig::default()
        };
        let a = run(&model, &constellation, &config).unwrap();
        let b = run(&model, &constellation, &config).unwrap();
        assert_eq!(a.residuals.len(), 7);
        for (ra, rb) in a.residuals.iter().zip(&b.residuals) {
            assert_eq!(ra, rb);
        }
        assert_eq!(a.estimate, b.estimate);
        // Factorization reuse does not change results.
        let no_reuse = AdmmConfig {
            reuse_factorization: false,
            ..config
        };
        let c = run(&model, &constellation, &no_reuse).unwrap();
        assert_eq!(a.estimate, c.estimate);
        assert_eq!(a.symbols, c.symbols);
    }

    #[test]
    fn feasibility_of_auxiliaries_holds_every_sweep() {
        let model = toy_model();
        let constellation = Constellation::new(Modulation::Qam16);
        let factor = GramFactor::new(&model).unwrap();
        let mut state = AdmmState::init(&model);
        let levels = constellation.axis_levels();
        for _ in 0..25 {
            state.signal_update(&model, 10.0);
            state.constellation_update(&constellation);
            state.interval_update(&model);
            state.symbol_update(&model, &factor);
            state.dual_update(&model);
            for i in 0..model.rows() {
                assert!(state.interval_proj[i] >= model.lower()[i]);
                assert!(state.interval_proj[i] <= model.upper()[i]);
            }
            for &b in state.symbol_proj.iter() {
                assert!(levels.contains(&b));
            }
        }
    }

    #[test]
    fn empty_symbol_dimension_returns_the_pilot() {
        // All-pilot plan: zero data columns; the reconstruction is exactly p.
        let matrix = DMatrix::zeros(2, 0);
        let model = ObservationModel::from_real_parts(
            matrix,
            DVector::from_vec(vec![0.7, -0.3]),
            DVector::from_vec(vec![1.0, -1.0]),
            DVector::from_vec(vec![0.0, f64::NEG_INFINITY]),
            DVector::from_vec(vec![f64::INFINITY, 0.0]),
            ModelDims {
                num_antennas: 1,
                dft_size: 1,
                num_users: 1,
                num_data: 0,
                num_taps: 1,
            },
        )
        .unwrap();
        let outcome = run(
            &model,
            &Constellation::new(Modulation::Qpsk),
            &AdmmConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.symbols.len(), 0);
        assert_eq!(outcome.estimate, vec![Complex64::new(0.7, -0.3)]);
    }

    #[test]
    fn residual_csv_has_header_and_one_row_per_sweep() {
        let residuals = vec![
            ResidualTriple {
                interval: 1.0,
                constellation: 2.0,
                model: 3.0,
            };
            3
        ];
        let csv = residuals_to_csv(&residuals);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "iteration,r1,r2,r3");
        assert!(lines[1].starts_with("1,"));
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let model = toy_model();
        let constellation = Constellation::new(Modulation::Qpsk);
        for config in [
            AdmmConfig {
                penalty: 0.0,
                ..AdmmConfig::default()
            },
            AdmmConfig {
                iterations: 0,
                ..AdmmConfig::default()
            },
            AdmmConfig {
                stop_tolerance: Some(-1.0),
                ..AdmmConfig::default()
            },
        ] {
            assert!(run(&model, &constellation, &config).is_err());
        }
    }
}
