//! The stacked linear observation model of one OFDM symbol.
//!
//! The received block at antenna `n`, sample `q` is a linear function of the
//! unknown data symbols once channel, plan, pilots, and transmit powers are
//! fixed: `z = A x + p`, where `x` stacks every user's data symbols and `p`
//! collects the known pilot/null contribution. This module assembles `A` and
//! `p`, converts the observed quantizer cells into per-component interval
//! bounds, and lifts everything to the real-valued form the solver consumes.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelRealization;
use crate::quant::{QuantizedVector, ScalarQuantizer};
use crate::signal::{FrequencyGrid, SubcarrierPlan, UnitaryDft};
use crate::{Error, Result};

/// Dimension record of an assembled model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub num_antennas: usize,
    pub dft_size: usize,
    pub num_users: usize,
    pub num_data: usize,
    pub num_taps: usize,
}

impl ModelDims {
    /// Complex observation length `N * M`.
    pub fn observation_len(&self) -> usize {
        self.num_antennas * self.dft_size
    }

    /// Complex unknown length `K * num_data`.
    pub fn symbol_len(&self) -> usize {
        self.num_users * self.num_data
    }
}

/// Interleaves per-antenna time series into the stacked order used by the
/// model: entry `q * N + n` is antenna `n` at sample `q`.
pub fn stack_antenna_series(per_antenna: &[Vec<Complex64>]) -> Vec<Complex64> {
    let num_antennas = per_antenna.len();
    let len = per_antenna.first().map_or(0, Vec::len);
    let mut stacked = Vec::with_capacity(num_antennas * len);
    for q in 0..len {
        for row in per_antenna {
            stacked.push(row[q]);
        }
    }
    stacked
}

/// Inverse of [`stack_antenna_series`].
pub fn unstack_antenna_series(stacked: &[Complex64], num_antennas: usize) -> Vec<Vec<Complex64>> {
    assert!(num_antennas > 0 && stacked.len().is_multiple_of(num_antennas));
    let len = stacked.len() / num_antennas;
    (0..num_antennas)
        .map(|n| (0..len).map(|q| stacked[q * num_antennas + n]).collect())
        .collect()
}

/// Real lift `[Re(v); Im(v)]` of a complex vector.
pub fn lift_complex_vector(v: &[Complex64]) -> DVector<f64> {
    let mut lifted = DVector::zeros(2 * v.len());
    for (i, value) in v.iter().enumerate() {
        lifted[i] = value.re;
        lifted[v.len() + i] = value.im;
    }
    lifted
}

/// Inverse of [`lift_complex_vector`].
pub fn unlift_to_complex(v: &DVector<f64>) -> Vec<Complex64> {
    assert!(v.len().is_multiple_of(2), "lifted vectors have even length");
    let half = v.len() / 2;
    (0..half)
        .map(|i| Complex64::new(v[i], v[half + i]))
        .collect()
}

/// Known received contribution of the pilot and null subcarriers, stacked
/// over samples then antennas (`q * N + n`).
///
/// Each user's data subcarriers are zeroed, the remaining row is transformed
/// to time domain, passed through that user's taps with cyclic indexing, and
/// scaled by the square root of the transmit power.
pub fn build_pilot_signal(
    dft: &UnitaryDft,
    channel: &ChannelRealization,
    grid: &FrequencyGrid,
    plan: &SubcarrierPlan,
    tx_powers: &[f64],
) -> Result<Vec<Complex64>> {
    check_link_dims(channel, grid.num_users(), plan, tx_powers)?;
    if dft.size() != plan.dft_size() {
        return Err(Error::Dimension(
            "transform size does not match the subcarrier plan".into(),
        ));
    }
    let m_total = plan.dft_size();
    let num_antennas = channel.num_antennas();
    let mut pilot = vec![Complex64::ZERO; num_antennas * m_total];
    for k in 0..grid.num_users() {
        let masked = grid.pilot_only_row(plan, k);
        let symbol = dft.idft_time_samples(&masked, plan.cp_len());
        let body = symbol.body();
        let amplitude = tx_powers[k].sqrt();
        for q in 0..m_total {
            for r in 0..channel.num_taps() {
                let s = body[(q + m_total - r) % m_total] * amplitude;
                let taps = channel.tap(k, r);
                for (n, &h) in taps.iter().enumerate() {
                    pilot[q * num_antennas + n] += h * s;
                }
            }
        }
    }
    Ok(pilot)
}

/// Complex observation matrix mapping stacked data symbols to stacked
/// received samples: row `q * N + n`, column `k * num_data + j` equals
/// `sqrt(p_k) * sum_r h_k[r][n] * exp(i 2 pi ((q - r) mod M) m_j / M) / sqrt(M)`.
pub fn build_observation_matrix(
    channel: &ChannelRealization,
    plan: &SubcarrierPlan,
    tx_powers: &[f64],
) -> Result<DMatrix<Complex64>> {
    check_link_dims(channel, tx_powers.len(), plan, tx_powers)?;
    let m_total = plan.dft_size();
    let num_antennas = channel.num_antennas();
    let num_users = tx_powers.len();
    let num_data = plan.num_data();

    // twiddle[t][j] = exp(i 2 pi t m_j / M) / sqrt(M)
    let scale = 1.0 / (m_total as f64).sqrt();
    let twiddle: Vec<Vec<Complex64>> = (0..m_total)
        .map(|t| {
            plan.data_indices()
                .iter()
                .map(|&m_j| {
                    let phase = 2.0 * std::f64::consts::PI * (t * m_j % m_total) as f64
                        / m_total as f64;
                    Complex64::new(phase.cos(), phase.sin()) * scale
                })
                .collect()
        })
        .collect();

    let mut matrix = DMatrix::zeros(num_antennas * m_total, num_users * num_data);
    for k in 0..num_users {
        let amplitude = tx_powers[k].sqrt();
        for j in 0..num_data {
            let col = k * num_data + j;
            for q in 0..m_total {
                for r in 0..channel.num_taps() {
                    let w = twiddle[(q + m_total - r) % m_total][j];
                    let taps = channel.tap(k, r);
                    for (n, &h) in taps.iter().enumerate() {
                        matrix[(q * num_antennas + n, col)] += h * w * amplitude;
                    }
                }
            }
        }
    }
    Ok(matrix)
}

/// Per-component interval bounds of the observed quantizer cells, in the
/// lifted order (all real parts, then all imaginary parts). Outer cells get
/// infinite sentinels.
pub fn quantization_bounds(
    quantizer: &ScalarQuantizer,
    observed: &QuantizedVector,
) -> (DVector<f64>, DVector<f64>) {
    let len = observed.values.len();
    assert_eq!(observed.real_cells.len(), len);
    assert_eq!(observed.imag_cells.len(), len);
    let mut lower = DVector::zeros(2 * len);
    let mut upper = DVector::zeros(2 * len);
    for (i, (&re_cell, &im_cell)) in observed
        .real_cells
        .iter()
        .zip(&observed.imag_cells)
        .enumerate()
    {
        let (re_lo, re_up) = quantizer.cell_bounds(re_cell);
        let (im_lo, im_up) = quantizer.cell_bounds(im_cell);
        lower[i] = re_lo;
        upper[i] = re_up;
        lower[len + i] = im_lo;
        upper[len + i] = im_up;
    }
    (lower, upper)
}

/// The real-valued observation model consumed by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    matrix: DMatrix<f64>,
    pilot: DVector<f64>,
    observed: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    dims: ModelDims,
}

impl ObservationModel {
    /// Builds the real model from complex parts by block lifting:
    /// `A_r = [[Re A, -Im A], [Im A, Re A]]`, vectors as `[Re; Im]`.
    /// Bound vectors are already in lifted order.
    pub fn lift_to_real(
        matrix: &DMatrix<Complex64>,
        pilot: &[Complex64],
        observed: &[Complex64],
        lower: DVector<f64>,
        upper: DVector<f64>,
        dims: ModelDims,
    ) -> Result<Self> {
        let obs_len = dims.observation_len();
        let sym_len = dims.symbol_len();
        if matrix.nrows() != obs_len || matrix.ncols() != sym_len {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                obs_len,
                sym_len
            )));
        }
        if pilot.len() != obs_len || observed.len() != obs_len {
            return Err(Error::Dimension(
                "pilot/observation length does not match the dimension record".into(),
            ));
        }
        if lower.len() != 2 * obs_len || upper.len() != 2 * obs_len {
            return Err(Error::Dimension(
                "bound vectors must have one entry per lifted component".into(),
            ));
        }

        let lifted_matrix = DMatrix::from_fn(2 * obs_len, 2 * sym_len, |row, col| {
            let entry = matrix[(row % obs_len, col % sym_len)];
            match (row < obs_len, col < sym_len) {
                (true, true) => entry.re,
                (true, false) => -entry.im,
                (false, true) => entry.im,
                (false, false) => entry.re,
            }
        });
        Self::from_real_parts(
            lifted_matrix,
            lift_complex_vector(pilot),
            lift_complex_vector(observed),
            lower,
            upper,
            dims,
        )
    }

    /// Builds the model directly from real-valued parts (regression fixtures
    /// and tests). All invariants are still checked.
    pub fn from_real_parts(
        matrix: DMatrix<f64>,
        pilot: DVector<f64>,
        observed: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
        dims: ModelDims,
    ) -> Result<Self> {
        let rows = 2 * dims.observation_len();
        let cols = 2 * dims.symbol_len();
        if matrix.nrows() != rows
            || matrix.ncols() != cols
            || pilot.len() != rows
            || observed.len() != rows
            || lower.len() != rows
            || upper.len() != rows
        {
            return Err(Error::Dimension(
                "real model parts disagree with the dimension record".into(),
            ));
        }
        for i in 0..rows {
            if !(lower[i] <= observed[i] && observed[i] < upper[i]) {
                return Err(Error::InvalidParameter(format!(
                    "observed component {i} ({}) outside its cell [{}, {})",
                    observed[i], lower[i], upper[i]
                )));
            }
        }
        Ok(Self {
            matrix,
            pilot,
            observed,
            lower,
            upper,
            dims,
        })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    /// Lifted row count `2 N M`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Lifted column count `2 K num_data`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pilot(&self) -> &DVector<f64> {
        &self.pilot
    }

    pub fn observed(&self) -> &DVector<f64> {
        &self.observed
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Model image `A_r x + p_r` of a lifted symbol vector.
    pub fn image(&self, lifted_symbols: &DVector<f64>) -> DVector<f64> {
        &self.matrix * lifted_symbols + &self.pilot
    }

    /// Serializes dimensions and all arrays (row-major, little-endian f64)
    /// for fixture capture.
    pub fn write_binary<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for dim in [
            self.dims.num_antennas,
            self.dims.dft_size,
            self.dims.num_users,
            self.dims.num_data,
            self.dims.num_taps,
        ] {
            writer.write_all(&(dim as u64).to_le_bytes())?;
        }
        for row in 0..self.matrix.nrows() {
            for col in 0..self.matrix.ncols() {
                writer.write_all(&self.matrix[(row, col)].to_le_bytes())?;
            }
        }
        for vector in [&self.pilot, &self.observed, &self.lower, &self.upper] {
            for &v in vector.iter() {
                writer.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a model serialized with [`ObservationModel::write_binary`].
    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self> {
        let mut u64_buf = [0u8; 8];
        let mut read_u64 = |reader: &mut R| -> Result<u64> {
            reader.read_exact(&mut u64_buf)?;
            Ok(u64::from_le_bytes(u64_buf))
        };
        let num_antennas = read_u64(&mut reader)? as usize;
        let dft_size = read_u64(&mut reader)? as usize;
        let num_users = read_u64(&mut reader)? as usize;
        let num_data = read_u64(&mut reader)? as usize;
        let num_taps = read_u64(&mut reader)? as usize;
        let dims = ModelDims {
            num_antennas,
            dft_size,
            num_users,
            num_data,
            num_taps,
        };
        let rows = 2 * dims.observation_len();
        let cols = 2 * dims.symbol_len();

        let read_f64s = |reader: &mut R, count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            reader.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };
        let matrix_entries = read_f64s(&mut reader, rows * cols)?;
        let matrix = DMatrix::from_row_slice(rows, cols, &matrix_entries);
        let pilot = DVector::from_vec(read_f64s(&mut reader, rows)?);
        let observed = DVector::from_vec(read_f64s(&mut reader, rows)?);
        let lower = DVector::from_vec(read_f64s(&mut reader, rows)?);
        let upper = DVector::from_vec(read_f64s(&mut reader, rows)?);
        Self::from_real_parts(matrix, pilot, observed, lower, upper, dims)
    }
}

fn check_link_dims(
    channel: &ChannelRealization,
    num_users: usize,
    plan: &SubcarrierPlan,
    tx_powers: &[f64],
) -> Result<()> {
    if channel.num_users() != num_users || tx_powers.len() != num_users {
        return Err(Error::Dimension(format!(
            "channel has {} users, grid/powers have {}/{}",
            channel.num_users(),
            num_users,
            tx_powers.len()
        )));
    }
    if channel.num_taps() > plan.dft_size() {
        return Err(Error::Dimension(
            "channel is longer than the DFT block".into(),
        ));
    }
    if channel.num_taps() != plan.num_taps() {
        return Err(Error::Dimension(format!(
            "plan reserves a prefix for {} taps, channel has {}",
            plan.num_taps(),
            channel.num_taps()
        )));
    }
    if tx_powers.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
        return Err(Error::InvalidParameter(
            "transmit powers must be non-negative".into(),
        ));
    }
    Ok(())
}
