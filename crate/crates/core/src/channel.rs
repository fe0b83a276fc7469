//! Propagation model: user drop geometry, distance-based pathloss with
//! log-normal shadowing, thermal noise, clustered power-delay profiles, and
//! i.i.d. Rayleigh tap realizations.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::signal::OfdmSymbol;
use crate::{Error, Result};

/// Standard deviation of the log-normal shadowing term, in dB.
pub const SHADOWING_STD_DB: f64 = 8.2;

/// Mean pathloss in dB at 3-D distance `distance_m` (meters).
pub fn pathloss_mean_db(distance_m: f64) -> Result<f64> {
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "pathloss distance must be positive and finite, got {distance_m}"
        )));
    }
    Ok(-49.9 - 31.9 * distance_m.log10())
}

/// Thermal noise power in dBm over `bandwidth_hz` with the given receiver
/// noise figure.
pub fn noise_variance_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> Result<f64> {
    if !bandwidth_hz.is_finite() || bandwidth_hz <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive and finite, got {bandwidth_hz}"
        )));
    }
    Ok(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// Positions of the access point and the users in a square service area.
/// The access point antenna sits `height_m` above the user plane, so all
/// distances are 3-D.
#[derive(Debug, Clone)]
pub struct DropGeometry {
    height_m: f64,
    access_point: [f64; 2],
    users: Vec<[f64; 2]>,
}

impl DropGeometry {
    /// Drops the access point and `num_users` users independently and
    /// uniformly over an `area_side_m` x `area_side_m` square.
    pub fn sample(
        num_users: usize,
        area_side_m: f64,
        height_m: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if num_users == 0 {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        if !(area_side_m.is_finite() && area_side_m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "area side must be positive, got {area_side_m}"
            )));
        }
        if !(height_m.is_finite() && height_m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "antenna height must be non-negative, got {height_m}"
            )));
        }
        let point = |rng: &mut ChaCha8Rng| {
            [
                rng.random_range(0.0..area_side_m),
                rng.random_range(0.0..area_side_m),
            ]
        };
        let access_point = point(rng);
        let users = (0..num_users).map(|_| point(rng)).collect();
        Ok(Self {
            height_m,
            access_point,
            users,
        })
    }

    /// Geometry with explicit coordinates; used by tests and deterministic
    /// scenarios.
    pub fn from_positions(
        access_point: [f64; 2],
        users: Vec<[f64; 2]>,
        height_m: f64,
    ) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        Ok(Self {
            height_m,
            access_point,
            users,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// 3-D distance from user `k` to the access point antenna.
    pub fn distance(&self, k: usize) -> f64 {
        let dx = self.users[k][0] - self.access_point[0];
        let dy = self.users[k][1] - self.access_point[1];
        (dx * dx + dy * dy + self.height_m * self.height_m).sqrt()
    }
}

/// Per-user large-scale coefficients plus the link noise power, all in
/// linear units (watts for powers, pure ratio for the gains).
#[derive(Debug, Clone)]
pub struct LargeScaleFading {
    gains: Vec<f64>,
    tx_power_w: Vec<f64>,
    noise_variance_w: f64,
}

impl LargeScaleFading {
    /// Draws shadowing for every user of a drop and converts pathloss to
    /// linear channel gains.
    pub fn sample(
        geometry: &DropGeometry,
        tx_power_w: f64,
        noise_variance_w: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if !(tx_power_w.is_finite() && tx_power_w >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transmit power must be non-negative, got {tx_power_w}"
            )));
        }
        if !(noise_variance_w.is_finite() && noise_variance_w >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be non-negative, got {noise_variance_w}"
            )));
        }
        let shadowing = Normal::new(0.0, SHADOWING_STD_DB)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut gains = Vec::with_capacity(geometry.num_users());
        for k in 0..geometry.num_users() {
            let db = pathloss_mean_db(geometry.distance(k))? + shadowing.sample(rng);
            gains.push(10f64.powf(db / 10.0));
        }
        Ok(Self {
            tx_power_w: vec![tx_power_w; geometry.num_users()],
            gains,
            noise_variance_w,
        })
    }

    /// Large-scale description with explicit gains; used by tests.
    pub fn from_parts(gains: Vec<f64>, tx_power_w: Vec<f64>, noise_variance_w: f64) -> Result<Self> {
        if gains.len() != tx_power_w.len() {
            return Err(Error::Dimension(
                "gain and power vectors must have one entry per user".into(),
            ));
        }
        if gains.is_empty() {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        Ok(Self {
            gains,
            tx_power_w,
            noise_variance_w,
        })
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    /// Linear channel gain of user `k` (pathloss plus shadowing).
    pub fn gain(&self, k: usize) -> f64 {
        self.gains[k]
    }

    /// Uplink transmit power of user `k` in watts.
    pub fn tx_power_w(&self, k: usize) -> f64 {
        self.tx_power_w[k]
    }

    pub fn noise_variance_w(&self) -> f64 {
        self.noise_variance_w
    }
}

/// Normalized power-delay profile over the channel taps.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    taps: Vec<f64>,
}

impl PowerDelayProfile {
    /// Normalizes an explicit non-negative tap power vector.
    pub fn from_taps(mut taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("profile needs at least one tap".into()));
        }
        if taps.iter().any(|&t| !t.is_finite() || t < 0.0) {
            return Err(Error::InvalidParameter(
                "tap powers must be finite and non-negative".into(),
            ));
        }
        let total: f64 = taps.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("tap powers sum to zero".into()));
        }
        for t in &mut taps {
            *t /= total;
        }
        Ok(Self { taps })
    }

    /// Draws a clustered exponential-decay profile.
    ///
    /// Cluster arrival times start at zero with exponential inter-arrivals of
    /// mean `cluster_spacing_s`; within a cluster, rays arrive every sample
    /// period. Ray power decays as `exp(-T_c / cluster_decay_s)` with the
    /// cluster start and `exp(-tau / ray_decay_s)` with the intra-cluster
    /// delay. Arrivals are binned to the nearest sampling instant, anything
    /// past tap `num_taps - 1` is dropped, and the result is normalized to
    /// unit total power.
    #[allow(clippy::too_many_arguments)]
    pub fn sample_clustered(
        num_taps: usize,
        sample_period_s: f64,
        cluster_decay_s: f64,
        ray_decay_s: f64,
        cluster_spacing_s: f64,
        num_clusters: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if num_taps == 0 {
            return Err(Error::InvalidParameter("profile needs at least one tap".into()));
        }
        if num_clusters == 0 {
            return Err(Error::InvalidParameter("need at least one cluster".into()));
        }
        for (name, v) in [
            ("sample period", sample_period_s),
            ("cluster decay", cluster_decay_s),
            ("ray decay", ray_decay_s),
            ("cluster spacing", cluster_spacing_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }

        let inter_arrival = Exp::new(1.0 / cluster_spacing_s)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut cluster_starts = vec![0.0f64];
        for _ in 1..num_clusters {
            let previous = *cluster_starts.last().expect("nonempty");
            cluster_starts.push(previous + inter_arrival.sample(rng));
        }

        // Delays are kept while they round into an existing tap bin.
        let horizon = (num_taps as f64 - 0.5) * sample_period_s;
        let mut taps = vec![0.0f64; num_taps];
        for start in cluster_starts {
            if start >= horizon {
                continue;
            }
            let cluster_weight = (-start / cluster_decay_s).exp();
            let mut delay_in_cluster = 0.0;
            while start + delay_in_cluster < horizon {
                let bin = ((start + delay_in_cluster) / sample_period_s).round() as usize;
                if bin < num_taps {
                    taps[bin] += cluster_weight * (-delay_in_cluster / ray_decay_s).exp();
                }
                delay_in_cluster += sample_period_s;
            }
        }
        Self::from_taps(taps)
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    /// Fraction of channel power in tap `r`; the taps sum to one.
    pub fn tap(&self, r: usize) -> f64 {
        self.taps[r]
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// One small-scale realization of every user's impulse response at every
/// receive antenna. Tap `r` of user `k` is a length-`num_antennas` vector of
/// circularly symmetric complex Gaussians with per-antenna power
/// `gain_k * pdp_k[r]`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    // taps[k][r][n]
    taps: Vec<Vec<Vec<Complex64>>>,
    num_antennas: usize,
    num_taps: usize,
}

impl ChannelRealization {
    pub fn sample(
        large_scale: &LargeScaleFading,
        profiles: &[PowerDelayProfile],
        num_antennas: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if profiles.len() != large_scale.num_users() {
            return Err(Error::Dimension(
                "need one delay profile per user".into(),
            ));
        }
        if num_antennas == 0 {
            return Err(Error::InvalidParameter("need at least one antenna".into()));
        }
        let num_taps = profiles[0].num_taps();
        if profiles.iter().any(|p| p.num_taps() != num_taps) {
            return Err(Error::Dimension("delay profiles differ in length".into()));
        }
        let unit = Normal::new(0.0, 1.0).expect("unit normal is valid");
        let mut taps = Vec::with_capacity(large_scale.num_users());
        for k in 0..large_scale.num_users() {
            let mut per_tap = Vec::with_capacity(num_taps);
            for r in 0..num_taps {
                // Per-component std dev so that E|h|^2 = gain * pdp[r].
                let std = (large_scale.gain(k) * profiles[k].tap(r) / 2.0).sqrt();
                let row = (0..num_antennas)
                    .map(|_| Complex64::new(std * unit.sample(rng), std * unit.sample(rng)))
                    .collect();
                per_tap.push(row);
            }
            taps.push(per_tap);
        }
        Ok(Self {
            taps,
            num_antennas,
            num_taps,
        })
    }

    /// Channel realization from explicit taps (`taps[k][r][n]`).
    pub fn from_taps(taps: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        if taps.is_empty() || taps[0].is_empty() || taps[0][0].is_empty() {
            return Err(Error::Dimension("channel taps must be non-empty".into()));
        }
        let num_taps = taps[0].len();
        let num_antennas = taps[0][0].len();
        for per_user in &taps {
            if per_user.len() != num_taps || per_user.iter().any(|t| t.len() != num_antennas) {
                return Err(Error::Dimension("ragged channel tap array".into()));
            }
        }
        Ok(Self {
            taps,
            num_antennas,
            num_taps,
        })
    }

    pub fn num_users(&self) -> usize {
        self.taps.len()
    }

    pub fn num_taps(&self) -> usize {
        self.num_taps
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    /// Antenna vector of tap `r` of user `k`.
    pub fn tap(&self, k: usize, r: usize) -> &[Complex64] {
        &self.taps[k][r]
    }
}

/// Passes one time-domain OFDM symbol per user through the channel and
/// superimposes them at the receive array.
///
/// The returned signal is indexed `[antenna][sample]` over the symbol body
/// `q = 0..dft_size`; each tap reaches back into the cyclic prefix, so the
/// prefix must cover the full channel memory. This is the direct convolution
/// route, independent of the frequency-domain observation model.
pub fn apply_channel(
    channel: &ChannelRealization,
    symbols: &[OfdmSymbol],
    tx_powers: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    if symbols.len() != channel.num_users() || tx_powers.len() != channel.num_users() {
        return Err(Error::Dimension(
            "need one transmit symbol and power per user".into(),
        ));
    }
    let body_len = symbols
        .first()
        .map(|s| s.body().len())
        .ok_or_else(|| Error::Dimension("no users".into()))?;
    if symbols.iter().any(|s| s.body().len() != body_len) {
        return Err(Error::Dimension("user symbols differ in length".into()));
    }
    if symbols.iter().any(|s| s.cp_len() + 1 < channel.num_taps()) {
        return Err(Error::Dimension(format!(
            "cyclic prefix too short for {} channel taps",
            channel.num_taps()
        )));
    }
    if tx_powers.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
        return Err(Error::InvalidParameter(
            "transmit powers must be non-negative".into(),
        ));
    }
    let mut received = vec![vec![Complex64::ZERO; body_len]; channel.num_antennas()];
    for (k, symbol) in symbols.iter().enumerate() {
        let amplitude = tx_powers[k].sqrt();
        for q in 0..body_len {
            for r in 0..channel.num_taps() {
                let s = symbol.sample(q as isize - r as isize) * amplitude;
                for (n, &h) in channel.tap(k, r).iter().enumerate() {
                    received[n][q] += h * s;
                }
            }
        }
    }
    Ok(received)
}

/// Adds circularly symmetric complex Gaussian noise of total per-sample
/// variance `variance_w` to each entry. A zero variance returns the input
/// unchanged (bit-exact).
pub fn add_noise(
    signal: &[Vec<Complex64>],
    variance_w: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<Complex64>>> {
    if !(variance_w.is_finite() && variance_w >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be non-negative, got {variance_w}"
        )));
    }
    if variance_w == 0.0 {
        return Ok(signal.to_vec());
    }
    let component = Normal::new(0.0, (variance_w / 2.0).sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(signal
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| v + Complex64::new(component.sample(rng), component.sample(rng)))
                .collect()
        })
        .collect())
}
