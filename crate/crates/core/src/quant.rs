//! Scalar quantization: the mid-rise table quantizer applied by the ADCs and
//! the fronthaul, and a Lloyd–Max design routine that fits the level table to
//! an empirical sample distribution under a zero-symmetry constraint.

use num_complex::Complex64;

use crate::{Error, Result};

/// Iteration cap and convergence threshold for the Lloyd-Max fixed point.
const LLOYD_MAX_ITERATIONS: usize = 500;
const LLOYD_MAX_TOLERANCE: f64 = 1e-8;

/// Result of quantizing one real sample: the reproduction level, the 1-based
/// cell index, and the half-open cell `[lower, upper)` the input fell in.
/// The outer cells extend to negative / positive infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedSample {
    pub value: f64,
    pub cell: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Result of quantizing a complex vector component-wise: reproduction values
/// plus the 1-based cell index of every real and imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedVector {
    pub values: Vec<Complex64>,
    pub real_cells: Vec<usize>,
    pub imag_cells: Vec<usize>,
}

/// A scalar quantizer with `2^bits` reproduction levels and the thresholds
/// halfway between adjacent levels. Cells are half-open on the right, so an
/// input exactly on a threshold maps to the upper cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarQuantizer {
    bits: u32,
    levels: Vec<f64>,
    thresholds: Vec<f64>,
}

impl ScalarQuantizer {
    /// Builds a quantizer from an explicit ascending level table.
    pub fn new(bits: u32, levels: Vec<f64>) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::InvalidParameter(format!(
                "quantizer resolution must be 1..=24 bits, got {bits}"
            )));
        }
        let expected = 1usize << bits;
        if levels.len() != expected {
            return Err(Error::Quantizer(format!(
                "{bits}-bit quantizer needs {expected} levels, got {}",
                levels.len()
            )));
        }
        if levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::Quantizer("levels must be finite".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Quantizer("levels must be strictly increasing".into()));
        }
        let thresholds = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            bits,
            levels,
            thresholds,
        })
    }

    /// Fits a `bits`-resolution quantizer to an empirical distribution with
    /// the Lloyd-Max fixed-point iteration.
    ///
    /// The sample set is first symmetrized by pooling `{x} U {-x}`, so the
    /// designed table satisfies `level[i] = -level[last - i]` exactly and the
    /// quantizer is unbiased for symmetric inputs. Empty cells are re-seeded
    /// between their neighbors, and after convergence the level table is
    /// symmetrized once more to remove residual rounding drift.
    pub fn design_lloyd_max(samples: &[f64], bits: u32) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::InvalidParameter(format!(
                "quantizer resolution must be 1..=24 bits, got {bits}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::Quantizer("cannot design on an empty sample set".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Quantizer("training samples must be finite".into()));
        }

        let mut pooled = Vec::with_capacity(samples.len() * 2);
        for &s in samples {
            pooled.push(s);
            pooled.push(-s);
        }
        pooled.sort_unstable_by(f64::total_cmp);
        let lo = pooled[0];
        let hi = pooled[pooled.len() - 1];
        if lo == hi {
            return Err(Error::Quantizer(
                "training samples are all identical; no level table exists".into(),
            ));
        }

        // Prefix sums make every cell mean an O(1) lookup.
        let mut prefix = Vec::with_capacity(pooled.len() + 1);
        prefix.push(0.0f64);
        for &x in &pooled {
            prefix.push(prefix.last().expect("nonempty") + x);
        }

        let num_levels = 1usize << bits;
        let mut levels: Vec<f64> = (0..num_levels)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / num_levels as f64)
            .collect();

        for _ in 0..LLOYD_MAX_ITERATIONS {
            // Cell boundaries in the sorted sample array; cell i holds
            // samples in [threshold[i-1], threshold[i]).
            let mut bounds = Vec::with_capacity(num_levels + 1);
            bounds.push(0usize);
            for w in levels.windows(2) {
                let threshold = 0.5 * (w[0] + w[1]);
                bounds.push(pooled.partition_point(|&x| x < threshold));
            }
            bounds.push(pooled.len());

            let means: Vec<Option<f64>> = (0..num_levels)
                .map(|i| {
                    let (b0, b1) = (bounds[i], bounds[i + 1]);
                    (b1 > b0).then(|| (prefix[b1] - prefix[b0]) / (b1 - b0) as f64)
                })
                .collect();

            // Centroids where cells are occupied; empty runs are re-seeded on
            // an even grid between the surrounding anchors.
            let mut updated = vec![0.0f64; num_levels];
            let mut i = 0;
            while i < num_levels {
                if let Some(mean) = means[i] {
                    updated[i] = mean;
                    i += 1;
                    continue;
                }
                let run_start = i;
                while i < num_levels && means[i].is_none() {
                    i += 1;
                }
                let left = if run_start == 0 { lo } else { updated[run_start - 1] };
                let right = if i == num_levels {
                    hi
                } else {
                    means[i].expect("loop stopped on an occupied cell")
                };
                let run_len = i - run_start;
                for (offset, slot) in updated[run_start..i].iter_mut().enumerate() {
                    *slot = left + (right - left) * (offset + 1) as f64 / (run_len + 1) as f64;
                }
            }

            let shift = levels
                .iter()
                .zip(&updated)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            levels = updated;
            if shift < LLOYD_MAX_TOLERANCE {
                break;
            }
        }

        // Enforce exact odd symmetry of the converged table.
        let symmetric: Vec<f64> = (0..num_levels)
            .map(|i| 0.5 * (levels[i] - levels[num_levels - 1 - i]))
            .collect();
        Self::new(bits, symmetric).map_err(|_| {
            Error::Quantizer(
                "training distribution too degenerate for the requested resolution".into(),
            )
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Reproduction levels, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Interior decision thresholds (midpoints of adjacent levels).
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Half-open cell `[lower, upper)` of the 1-based cell index.
    pub fn cell_bounds(&self, cell: usize) -> (f64, f64) {
        assert!(
            cell >= 1 && cell <= self.levels.len(),
            "cell index {cell} outside 1..={}",
            self.levels.len()
        );
        let lower = if cell == 1 {
            f64::NEG_INFINITY
        } else {
            self.thresholds[cell - 2]
        };
        let upper = if cell == self.levels.len() {
            f64::INFINITY
        } else {
            self.thresholds[cell - 1]
        };
        (lower, upper)
    }

    /// Quantizes one real sample.
    pub fn quantize(&self, x: f64) -> QuantizedSample {
        // Number of thresholds at or below x = 0-based cell index.
        let idx = self.thresholds.partition_point(|&t| t <= x);
        let cell = idx + 1;
        let (lower, upper) = self.cell_bounds(cell);
        QuantizedSample {
            value: self.levels[idx],
            cell,
            lower,
            upper,
        }
    }

    /// Quantizes real and imaginary parts of each entry independently.
    pub fn quantize_vector(&self, values: &[Complex64]) -> QuantizedVector {
        let mut out = QuantizedVector {
            values: Vec::with_capacity(values.len()),
            real_cells: Vec::with_capacity(values.len()),
            imag_cells: Vec::with_capacity(values.len()),
        };
        for &v in values {
            let re = self.quantize(v.re);
            let im = self.quantize(v.im);
            out.values.push(Complex64::new(re.value, im.value));
            out.real_cells.push(re.cell);
            out.imag_cells.push(im.cell);
        }
        out
    }

    /// Mean squared reproduction error over a sample set.
    pub fn mean_square_distortion(&self, samples: &[f64]) -> f64 {
        assert!(!samples.is_empty(), "distortion of an empty sample set");
        samples
            .iter()
            .map(|&x| {
                let e = x - self.quantize(x).value;
                e * e
            })
            .sum::<f64>()
            / samples.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn sign_quantizer_maps_to_cells_and_bounds() {
        let q = ScalarQuantizer::new(1, vec![-1.0, 1.0]).unwrap();
        let s = q.quantize(0.3);
        assert_eq!(s.value, 1.0);
        assert_eq!(s.cell, 2);
        assert_eq!(s.lower, 0.0);
        assert_eq!(s.upper, f64::INFINITY);
        let s = q.quantize(-2.5);
        assert_eq!(s.value, -1.0);
        assert_eq!(s.cell, 1);
        assert_eq!(s.lower, f64::NEG_INFINITY);
        assert_eq!(s.upper, 0.0);
    }

    #[test]
    fn threshold_hits_land_in_the_upper_cell() {
        let q = ScalarQuantizer::new(1, vec![-1.0, 1.0]).unwrap();
        assert_eq!(q.quantize(0.0).cell, 2);
        let q = ScalarQuantizer::new(2, vec![-3.0, -1.0, 1.0, 3.0]).unwrap();
        assert_eq!(q.quantize(-2.0).cell, 2);
        assert_eq!(q.quantize(2.0).cell, 4);
    }

    #[test]
    fn reproduction_levels_are_fixed_points() {
        let q = ScalarQuantizer::new(2, vec![-3.0, -1.0, 1.0, 3.0]).unwrap();
        for &l in q.levels() {
            assert_eq!(q.quantize(l).value, l);
        }
    }

    #[test]
    fn quantization_is_monotone_and_consistent_with_bounds() {
        let q = ScalarQuantizer::new(3, vec![-2.1, -1.3, -0.8, -0.2, 0.3, 0.9, 1.4, 2.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut inputs: Vec<f64> = (0..10_000)
            .map(|_| rand::Rng::random_range(&mut rng, -4.0..4.0))
            .collect();
        inputs.sort_unstable_by(f64::total_cmp);
        let mut previous = f64::NEG_INFINITY;
        for &x in &inputs {
            let s = q.quantize(x);
            assert!(s.value >= previous, "quantizer must be monotone");
            previous = s.value;
            assert!(s.lower <= x && x < s.upper, "input must lie in its cell");
            assert!(s.lower <= s.value && s.value < s.upper || s.upper == f64::INFINITY);
            let (lo, hi) = q.cell_bounds(s.cell);
            assert_eq!((lo, hi), (s.lower, s.upper));
        }
    }

    #[test]
    fn complex_vectors_are_quantized_per_component() {
        let q = ScalarQuantizer::new(1, vec![-1.0, 1.0]).unwrap();
        let v = [Complex64::new(0.3, -0.4), Complex64::new(-2.0, 5.0)];
        let out = q.quantize_vector(&v);
        assert_eq!(out.values[0], Complex64::new(1.0, -1.0));
        assert_eq!(out.values[1], Complex64::new(-1.0, 1.0));
        assert_eq!(out.real_cells, vec![2, 1]);
        assert_eq!(out.imag_cells, vec![1, 2]);
    }

    #[test]
    fn one_bit_gaussian_design_matches_the_analytic_optimum() {
        // Optimal 1-bit quantizer for N(0,1): levels at +-sqrt(2/pi),
        // distortion 1 - 2/pi.
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<f64> = (0..300_000).map(|_| normal.sample(&mut rng)).collect();
        let q = ScalarQuantizer::design_lloyd_max(&samples, 1).unwrap();
        assert_abs_diff_eq!(q.levels()[1], 0.7978845608028654, epsilon = 5e-3);
        assert_eq!(q.levels()[0], -q.levels()[1]);
        assert_abs_diff_eq!(
            q.mean_square_distortion(&samples),
            0.36338022763241865,
            epsilon = 5e-3
        );
    }

    #[test]
    fn two_bit_gaussian_design_matches_published_tables() {
        // Classic Lloyd-Max N(0,1) 4-level solution: +-0.4528, +-1.510.
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..300_000).map(|_| normal.sample(&mut rng)).collect();
        let q = ScalarQuantizer::design_lloyd_max(&samples, 2).unwrap();
        assert_abs_diff_eq!(q.levels()[2], 0.4528, epsilon = 1e-2);
        assert_abs_diff_eq!(q.levels()[3], 1.510, epsilon = 1e-2);
        assert_abs_diff_eq!(q.mean_square_distortion(&samples), 0.1175, epsilon = 5e-3);
    }

    #[test]
    fn designed_tables_satisfy_the_optimality_conditions() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<f64> = (0..100_000).map(|_| normal.sample(&mut rng)).collect();
        for bits in 1..=4u32 {
            let q = ScalarQuantizer::design_lloyd_max(&samples, bits).unwrap();
            // Interior thresholds sit halfway between adjacent levels.
            for (i, &t) in q.thresholds().iter().enumerate() {
                assert_abs_diff_eq!(t, 0.5 * (q.levels()[i] + q.levels()[i + 1]), epsilon = 1e-9);
            }
            // Each level is the centroid of its cell over the pooled
            // (symmetrized) training set.
            let pooled: Vec<f64> = samples.iter().flat_map(|&x| [x, -x]).collect();
            let mut sums = vec![(0.0f64, 0usize); q.num_levels()];
            for &x in &pooled {
                let cell = q.quantize(x).cell - 1;
                sums[cell].0 += x;
                sums[cell].1 += 1;
            }
            for (i, &(sum, count)) in sums.iter().enumerate() {
                assert!(count > 0, "bits={bits}: cell {i} unoccupied");
                assert_abs_diff_eq!(sum / count as f64, q.levels()[i], epsilon = 1e-6);
            }
            // Odd symmetry is exact by construction.
            for i in 0..q.num_levels() {
                assert_eq!(q.levels()[i], -q.levels()[q.num_levels() - 1 - i]);
            }
        }
    }

    #[test]
    fn design_is_deterministic_in_its_inputs() {
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..50_000).map(|_| normal.sample(&mut rng)).collect();
        let a = ScalarQuantizer::design_lloyd_max(&samples, 3).unwrap();
        let b = ScalarQuantizer::design_lloyd_max(&samples, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn design_handles_more_levels_than_samples() {
        // 4 samples (8 pooled) but 16 requested levels: empty cells must be
        // re-seeded, and the result must still be a valid ascending table
        // with near-zero residual distortion.
        let samples = [0.1, 0.5, 1.0, 2.0];
        let q = ScalarQuantizer::design_lloyd_max(&samples, 4).unwrap();
        assert_eq!(q.num_levels(), 16);
        for w in q.levels().windows(2) {
            assert!(w[0] < w[1]);
        }
        let power = samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64;
        assert!(q.mean_square_distortion(&samples) < 0.01 * power);
    }

    #[test]
    fn distortion_shrinks_with_resolution() {
        let normal = Normal::new(0.0, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let samples: Vec<f64> = (0..60_000).map(|_| normal.sample(&mut rng)).collect();
        let distortions: Vec<f64> = (1..=5)
            .map(|bits| {
                ScalarQuantizer::design_lloyd_max(&samples, bits)
                    .unwrap()
                    .mean_square_distortion(&samples)
            })
            .collect();
        for w in distortions.windows(2) {
            assert!(w[1] < w[0], "distortion must shrink: {distortions:?}");
        }
    }

    #[test]
    fn design_rejects_degenerate_inputs() {
        assert!(ScalarQuantizer::design_lloyd_max(&[], 2).is_err());
        assert!(ScalarQuantizer::design_lloyd_max(&[0.0, 0.0, 0.0], 2).is_err());
        assert!(ScalarQuantizer::design_lloyd_max(&[1.0, f64::NAN], 2).is_err());
        assert!(ScalarQuantizer::design_lloyd_max(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn explicit_tables_are_validated() {
        assert!(ScalarQuantizer::new(1, vec![1.0, -1.0]).is_err()); // not ascending
        assert!(ScalarQuantizer::new(1, vec![1.0]).is_err()); // wrong count
        assert!(ScalarQuantizer::new(1, vec![f64::INFINITY, 1.0]).is_err());
        assert!(ScalarQuantizer::new(0, vec![]).is_err());
    }
}
