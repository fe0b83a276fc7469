//! Transmit-side signal definitions: data constellations, the split of
//! subcarriers into data/pilot/null sets, and unitary DFT/IDFT transforms
//! with cyclic-prefix handling.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Supported data modulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    /// Per-axis amplitude levels, scaled for unit average symbol power.
    fn axis_levels(self) -> Vec<f64> {
        match self {
            // |s|^2 = 2 * (1/2) = 1.
            Modulation::Qpsk => {
                let a = 1.0 / 2.0_f64.sqrt();
                vec![-a, a]
            }
            // Mean per-axis power (1 + 9) / 2 / 10 = 1/2, so |s|^2 = 1.
            Modulation::Qam16 => {
                let a = 1.0 / 10.0_f64.sqrt();
                vec![-3.0 * a, -a, a, 3.0 * a]
            }
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulation::Qpsk => write!(f, "qpsk"),
            Modulation::Qam16 => write!(f, "16qam"),
        }
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Modulation::Qpsk),
            "16qam" => Ok(Modulation::Qam16),
            other => Err(Error::InvalidParameter(format!(
                "unknown modulation {other:?}; expected qpsk or 16qam"
            ))),
        }
    }
}

/// A square constellation described by its per-axis amplitude levels.
///
/// Real and imaginary parts are drawn and projected independently, which is
/// exact for the square constellations used here.
#[derive(Debug, Clone)]
pub struct Constellation {
    modulation: Modulation,
    levels: Vec<f64>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        Self {
            modulation,
            levels: modulation.axis_levels(),
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    /// Amplitude levels of one axis, ascending.
    pub fn axis_levels(&self) -> &[f64] {
        &self.levels
    }

    /// All constellation points, imaginary-axis-major.
    pub fn points(&self) -> Vec<Complex64> {
        let mut points = Vec::with_capacity(self.levels.len() * self.levels.len());
        for &re in &self.levels {
            for &im in &self.levels {
                points.push(Complex64::new(re, im));
            }
        }
        points
    }

    /// Average power over the constellation, assuming equiprobable points.
    pub fn average_power(&self) -> f64 {
        let points = self.points();
        points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64
    }

    /// Draws one symbol uniformly (independent uniform picks per axis).
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        let re = self.levels[rng.random_range(0..self.levels.len())];
        let im = self.levels[rng.random_range(0..self.levels.len())];
        Complex64::new(re, im)
    }

    /// Projects a complex value onto the nearest constellation point,
    /// independently per axis.
    pub fn project(&self, value: Complex64) -> Complex64 {
        Complex64::new(
            nearest_level(value.re, &self.levels),
            nearest_level(value.im, &self.levels),
        )
    }
}

/// Nearest entry of an ascending level table; exact ties resolve to the
/// smaller level.
pub fn nearest_level(x: f64, levels: &[f64]) -> f64 {
    debug_assert!(!levels.is_empty());
    let mut best = levels[0];
    let mut best_distance = (x - levels[0]).abs();
    for &level in &levels[1..] {
        let distance = (x - level).abs();
        if distance < best_distance {
            best = level;
            best_distance = distance;
        }
    }
    best
}

/// Assignment of every subcarrier of one OFDM symbol to exactly one role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierPlan {
    dft_size: usize,
    num_taps: usize,
    data: Vec<usize>,
    pilots: Vec<usize>,
    nulls: Vec<usize>,
}

impl SubcarrierPlan {
    /// Builds a plan from explicit data and pilot index sets. Remaining
    /// indices become nulls. Index sets must be disjoint and in range.
    pub fn new(
        dft_size: usize,
        num_taps: usize,
        mut data: Vec<usize>,
        mut pilots: Vec<usize>,
    ) -> Result<Self> {
        if dft_size == 0 {
            return Err(Error::Plan("DFT size must be positive".into()));
        }
        if num_taps == 0 || num_taps > dft_size {
            return Err(Error::Plan(format!(
                "channel length {num_taps} must lie in 1..={dft_size}"
            )));
        }
        data.sort_unstable();
        pilots.sort_unstable();
        for &m in data.iter().chain(pilots.iter()) {
            if m >= dft_size {
                return Err(Error::Plan(format!(
                    "subcarrier index {m} out of range for DFT size {dft_size}"
                )));
            }
        }
        if data.windows(2).any(|w| w[0] == w[1]) || pilots.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Plan("duplicate subcarrier index".into()));
        }
        let mut role = vec![0u8; dft_size];
        for &m in &data {
            role[m] = 1;
        }
        for &m in &pilots {
            if role[m] != 0 {
                return Err(Error::Plan(format!(
                    "subcarrier {m} assigned to both data and pilot"
                )));
            }
            role[m] = 2;
        }
        let nulls = (0..dft_size).filter(|&m| role[m] == 0).collect();
        Ok(Self {
            dft_size,
            num_taps,
            data,
            pilots,
            nulls,
        })
    }

    /// Standard plan: `num_data` uniformly spaced data subcarriers starting
    /// at index 0, and `num_pilots` pilot subcarriers drawn uniformly at
    /// random (without replacement) from the remaining indices.
    pub fn uniform(
        dft_size: usize,
        num_data: usize,
        num_pilots: usize,
        num_taps: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if num_data == 0 || !dft_size.is_multiple_of(num_data) {
            return Err(Error::Plan(format!(
                "data subcarrier count {num_data} must divide DFT size {dft_size}"
            )));
        }
        if num_pilots > dft_size - num_data {
            return Err(Error::Plan(format!(
                "{num_pilots} pilots do not fit beside {num_data} data subcarriers \
                 in {dft_size} bins"
            )));
        }
        let spacing = dft_size / num_data;
        let data: Vec<usize> = (0..num_data).map(|j| j * spacing).collect();
        let mut remaining: Vec<usize> = (0..dft_size)
            .filter(|m| !m.is_multiple_of(spacing))
            .collect();
        // Partial Fisher-Yates: after i swaps the first i entries are a
        // uniform sample without replacement.
        for i in 0..num_pilots {
            let j = rng.random_range(i..remaining.len());
            remaining.swap(i, j);
        }
        let pilots = remaining[..num_pilots].to_vec();
        Self::new(dft_size, num_taps, data, pilots)
    }

    pub fn dft_size(&self) -> usize {
        self.dft_size
    }

    /// Channel impulse-response length the cyclic prefix must cover.
    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    /// Cyclic-prefix length (`num_taps - 1`).
    pub fn cp_len(&self) -> usize {
        self.num_taps - 1
    }

    pub fn data_indices(&self) -> &[usize] {
        &self.data
    }

    pub fn pilot_indices(&self) -> &[usize] {
        &self.pilots
    }

    pub fn null_indices(&self) -> &[usize] {
        &self.nulls
    }

    pub fn num_data(&self) -> usize {
        self.data.len()
    }
}

/// Frequency-domain symbols of every user for one OFDM symbol: pilots carry
/// the fixed training value `1 + 0i`, data subcarriers carry constellation
/// symbols, nulls are zero.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    per_user: Vec<Vec<Complex64>>,
}

impl FrequencyGrid {
    /// Draws independent data symbols for `num_users` users.
    pub fn draw(
        plan: &SubcarrierPlan,
        constellation: &Constellation,
        num_users: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut per_user = Vec::with_capacity(num_users);
        for _ in 0..num_users {
            let mut row = vec![Complex64::ZERO; plan.dft_size()];
            for &m in plan.pilot_indices() {
                row[m] = Complex64::ONE;
            }
            for &m in plan.data_indices() {
                row[m] = constellation.draw(rng);
            }
            per_user.push(row);
        }
        Self { per_user }
    }

    /// Builds a grid from explicit rows (mostly for tests and tooling).
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension("frequency grid needs at least one user".into()));
        }
        let len = rows[0].len();
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Dimension("frequency grid rows differ in length".into()));
        }
        Ok(Self { per_user: rows })
    }

    pub fn num_users(&self) -> usize {
        self.per_user.len()
    }

    /// Full frequency row of one user.
    pub fn user(&self, k: usize) -> &[Complex64] {
        &self.per_user[k]
    }

    /// Copy of user `k`'s row with the data subcarriers zeroed; this is the
    /// deterministic (pilot + null) part of the transmit signal.
    pub fn pilot_only_row(&self, plan: &SubcarrierPlan, k: usize) -> Vec<Complex64> {
        let mut row = self.per_user[k].clone();
        for &m in plan.data_indices() {
            row[m] = Complex64::ZERO;
        }
        row
    }

    /// Data symbols stacked user-major: entry `k * num_data + j` is user `k`'s
    /// symbol on the `j`-th data subcarrier. This is the unknown vector the
    /// observation model multiplies.
    pub fn stacked_data_symbols(&self, plan: &SubcarrierPlan) -> Vec<Complex64> {
        let mut stacked = Vec::with_capacity(self.num_users() * plan.num_data());
        for row in &self.per_user {
            for &m in plan.data_indices() {
                stacked.push(row[m]);
            }
        }
        stacked
    }
}

/// One time-domain OFDM symbol including its cyclic prefix.
#[derive(Debug, Clone)]
pub struct OfdmSymbol {
    /// Samples at q = -cp_len, ..., -1, 0, ..., body_len - 1.
    samples: Vec<Complex64>,
    cp_len: usize,
}

impl OfdmSymbol {
    /// Samples of the symbol body, q = 0..dft_size.
    pub fn body(&self) -> &[Complex64] {
        &self.samples[self.cp_len..]
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// Sample at time index `q`, valid for `-cp_len <= q < dft_size`.
    pub fn sample(&self, q: isize) -> Complex64 {
        let idx = q + self.cp_len as isize;
        assert!(
            idx >= 0 && (idx as usize) < self.samples.len(),
            "time index {q} outside the symbol (cp_len {})",
            self.cp_len
        );
        self.samples[idx as usize]
    }
}

/// Unitary DFT pair of a fixed size (both directions scaled by
/// `1/sqrt(size)`), with plans cached for reuse.
pub struct UnitaryDft {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl UnitaryDft {
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "DFT size must be positive");
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn check_len(&self, len: usize) {
        assert_eq!(len, self.size, "vector length does not match DFT size");
    }

    /// Time samples of one OFDM symbol: unitary IDFT of the frequency row
    /// plus a cyclic prefix of `cp_len` samples copied from the body tail.
    pub fn idft_time_samples(&self, freq: &[Complex64], cp_len: usize) -> OfdmSymbol {
        self.check_len(freq.len());
        assert!(cp_len < self.size, "cyclic prefix must be shorter than the body");
        let mut body = freq.to_vec();
        self.inverse.process(&mut body);
        let scale = 1.0 / (self.size as f64).sqrt();
        for v in &mut body {
            *v *= scale;
        }
        let mut samples = Vec::with_capacity(cp_len + self.size);
        samples.extend_from_slice(&body[self.size - cp_len..]);
        samples.extend_from_slice(&body);
        OfdmSymbol { samples, cp_len }
    }

    /// Unitary DFT of a full block of time samples.
    pub fn dft(&self, time: &[Complex64]) -> Vec<Complex64> {
        self.check_len(time.len());
        let mut freq = time.to_vec();
        self.forward.process(&mut freq);
        let scale = 1.0 / (self.size as f64).sqrt();
        for v in &mut freq {
            *v *= scale;
        }
        freq
    }

    /// Unitary DFT evaluated at a subset of bins.
    pub fn dft_at_indices(&self, time: &[Complex64], indices: &[usize]) -> Vec<Complex64> {
        let freq = self.dft(time);
        indices.iter().map(|&m| freq[m]).collect()
    }
}
