//! Variable-bandwidth kernel Markov approximation of the transfer operator.
//!
//! For embedded points `h_1..h_N`, forward step `s` and neighbor count `K`:
//!
//! ```text
//! d_i   = distance from h_i to its K-th nearest neighbor (self excluded, all N points searched)
//! S_ij  = exp(-|h_i - h_{j+s}|² / (d_i d_{j+s})),   i, j = 1..N-s
//! P_ij  = S_ij / Σ_j S_ij
//! ```
//!
//! Right-multiplying `P` by samples of a function along the trajectory pushes the function
//! forward `s` steps, so `P 1 = 1` and the leading eigenvalue is 1.

mod eigen;

use std::path::Path;

use faer::Mat;
use rayon::prelude::*;

use crate::embed::EmbeddedSeries;
use crate::error::{Error, Result};
use crate::series::fmt_num;

pub use eigen::{eigendecompose, SpectralDecomposition, RESIDUAL_FAILURE};

/// Relative (to the data diameter) K-th neighbor distance below which a bandwidth counts as zero.
pub const ZERO_BANDWIDTH_RTOL: f64 = 1e-12;

/// Distance from every point to its `k`-th nearest neighbor, excluding the point itself.
pub fn knn_bandwidths(points: &EmbeddedSeries, k: usize) -> Result<Vec<f64>> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::NeighborCount { k, n });
    }
    let rows: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d2: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| points.dist2(i, j)).collect();
            let far = d2.iter().copied().fold(0.0, f64::max);
            let (_, kth, _) = d2.select_nth_unstable_by(k - 1, f64::total_cmp);
            (kth.sqrt(), far)
        })
        .collect();
    let diameter = rows.iter().map(|r| r.1).fold(0.0, f64::max).sqrt();
    let threshold = ZERO_BANDWIDTH_RTOL * diameter;
    rows.iter()
        .enumerate()
        .map(|(index, &(distance, _))| {
            if distance <= threshold {
                Err(Error::ZeroBandwidth {
                    index,
                    distance,
                    threshold,
                })
            } else {
                Ok(distance)
            }
        })
        .collect()
}

/// Kernel matrix `S` of shape `(N-s) × (N-s)`.
pub fn kernel_matrix(points: &EmbeddedSeries, step: usize, bandwidths: &[f64]) -> Result<Mat<f64>> {
    let n = points.len();
    if step >= n {
        return Err(Error::SeriesTooShort {
            required: step,
            actual: n,
        });
    }
    if bandwidths.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: bandwidths.len(),
        });
    }
    if let Some((index, &distance)) = bandwidths
        .iter()
        .enumerate()
        .find(|(_, d)| !(**d > 0.0 && d.is_finite()))
    {
        return Err(Error::ZeroBandwidth {
            index,
            distance,
            threshold: 0.0,
        });
    }
    let m = n - step;
    let mut buf = vec![0.0; m * m];
    buf.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let di = bandwidths[i];
        for (j, entry) in row.iter_mut().enumerate() {
            let col = j + step;
            *entry = (-points.dist2(i, col) / (di * bandwidths[col])).exp();
        }
    });
    Ok(Mat::from_fn(m, m, |i, j| buf[i * m + j]))
}

/// Normalize every row of a nonnegative kernel to sum to one.
pub fn row_stochastic(kernel: &Mat<f64>) -> Result<Mat<f64>> {
    let (r, c) = (kernel.nrows(), kernel.ncols());
    let mut sums = vec![0.0; r];
    for j in 0..c {
        for (i, s) in sums.iter_mut().enumerate() {
            let v = kernel[(i, j)];
            if !(v >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "kernel entry ({i}, {j}) = {v} is negative or NaN"
                )));
            }
            *s += v;
        }
    }
    if let Some(i) = sums.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::ZeroRow(i));
    }
    Ok(Mat::from_fn(r, c, |i, j| kernel[(i, j)] / sums[i]))
}

/// Row-stochastic transition matrix plus the parameters that produced it.
#[derive(Debug, Clone)]
pub struct MarkovOperator {
    p: Mat<f64>,
    /// Forward step `s` in sampling intervals.
    pub step: usize,
    /// Neighbor count `K` used for the bandwidths.
    pub neighbors: usize,
    pub dt: f64,
    /// `d_i` for all `N` embedded points.
    pub bandwidths: Vec<f64>,
    /// Source-series index of operator row 0.
    pub offset: usize,
    /// Physical time of source sample 0.
    pub t0: f64,
}

impl MarkovOperator {
    /// Assemble `P` from embedded data.
    pub fn build(points: &EmbeddedSeries, step: usize, neighbors: usize) -> Result<Self> {
        let bandwidths = knn_bandwidths(points, neighbors)?;
        let kernel = kernel_matrix(points, step, &bandwidths)?;
        let p = row_stochastic(&kernel)?;
        Ok(Self {
            p,
            step,
            neighbors,
            dt: points.dt,
            bandwidths,
            offset: points.offset(),
            t0: points.t0,
        })
    }

    /// Wrap an existing row-stochastic matrix (unit spacing, no bandwidth metadata).
    pub fn from_matrix(p: Mat<f64>, step: usize) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::LengthMismatch {
                expected: p.nrows(),
                actual: p.ncols(),
            });
        }
        for i in 0..p.nrows() {
            let row_sum: f64 = (0..p.ncols()).map(|j| p[(i, j)]).sum();
            if (row_sum - 1.0).abs() > 1e-12 || (0..p.ncols()).any(|j| !(p[(i, j)] >= 0.0)) {
                return Err(Error::InvalidConfig(format!("row {i} is not stochastic (sum {row_sum})")));
            }
        }
        Ok(Self {
            p,
            step,
            neighbors: 0,
            dt: 1.0,
            bandwidths: Vec::new(),
            offset: 0,
            t0: 0.0,
        })
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.p
    }

    /// Number of states `N - s`.
    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }

    /// Physical time stamp of operator row `i` (newest sample of its delay vector).
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + (self.offset + i) as f64 * self.dt
    }

    /// Dump `P` as comma-separated rows.
    pub fn write_matrix(&self, path: &Path) -> Result<()> {
        let n = self.len();
        let mut out = String::with_capacity(n * n * 24);
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_num(self.p[(i, j)]));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> EmbeddedSeries {
        EmbeddedSeries::from_points(Mat::from_fn(xs.len(), 1, |i, _| xs[i]))
    }

    fn random_cloud(n: usize, dim: usize, seed: u64) -> EmbeddedSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        EmbeddedSeries::from_points(Mat::from_fn(n, dim, |i, j| data[i * dim + j]))
    }

    #[test]
    fn bandwidths_on_a_line() {
        let pts = line(&[0.0, 1.0, 3.0]);
        assert_eq!(knn_bandwidths(&pts, 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert_eq!(knn_bandwidths(&pts, 2).unwrap(), vec![3.0, 2.0, 3.0]);
        assert!(matches!(knn_bandwidths(&pts, 3), Err(Error::NeighborCount { k: 3, n: 3 })));
        assert!(knn_bandwidths(&pts, 0).is_err());
    }

    #[test]
    fn bandwidths_match_exhaustive_sort() {
        let pts = random_cloud(100, 3, 11);
        let fast = knn_bandwidths(&pts, 5).unwrap();
        for i in 0..100 {
            let mut all: Vec<f64> = (0..100)
                .filter(|&j| j != i)
                .map(|j| {
                    (0..3)
                        .map(|c| (pts.points()[(i, c)] - pts.points()[(j, c)]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            all.sort_by(f64::total_cmp);
            assert_eq!(fast[i], all[4]);
        }
    }

    #[test]
    fn duplicate_points_raise_zero_bandwidth() {
        let pts = line(&[0.0, 0.0, 1.0, 2.0]);
        assert!(matches!(
            knn_bandwidths(&pts, 1),
            Err(Error::ZeroBandwidth { index: 0, .. })
        ));
        // the second neighbor is distinct, so K=2 is fine
        assert!(knn_bandwidths(&pts, 2).is_ok());
    }

    #[test]
    fn kernel_entries() {
        let pts = line(&[0.0, 2.0, 5.0]);
        let d = [1.0, 2.0, 2.0];
        let s0 = kernel_matrix(&pts, 0, &d).unwrap();
        for i in 0..3 {
            assert_eq!(s0[(i, i)], 1.0);
        }
        // |h_0 - h_1|² = 4 = d_0 d_1 * 2
        assert_abs_diff_eq!(s0[(0, 1)], (-2.0f64).exp(), epsilon = 1e-16);
        // distance² equal to d_i d_{j+s} gives e^{-1}
        let pts = line(&[0.0, 2.0f64.sqrt()]);
        let s = kernel_matrix(&pts, 0, &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s[(0, 1)], (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn kernel_matches_direct_formula() {
        let pts = random_cloud(50, 3, 5);
        let d = knn_bandwidths(&pts, 4).unwrap();
        let s = kernel_matrix(&pts, 1, &d).unwrap();
        assert_eq!((s.nrows(), s.ncols()), (49, 49));
        let p = pts.points();
        for i in 0..49 {
            for j in 0..49 {
                let mut d2 = 0.0;
                for c in 0..3 {
                    d2 += (p[(i, c)] - p[(j + 1, c)]).powi(2);
                }
                let direct = (-d2 / (d[i] * d[j + 1])).exp();
                assert!((s[(i, j)] - direct).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn kernel_rejects_bad_inputs() {
        let pts = line(&[0.0, 1.0, 2.0]);
        assert!(matches!(kernel_matrix(&pts, 3, &[1.0; 3]), Err(Error::SeriesTooShort { .. })));
        assert!(matches!(kernel_matrix(&pts, 0, &[1.0; 2]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(
            kernel_matrix(&pts, 0, &[1.0, 0.0, 1.0]),
            Err(Error::ZeroBandwidth { index: 1, .. })
        ));
    }

    #[test]
    fn row_normalization() {
        let s = faer::mat![[2.0, 2.0], [1.0, 3.0]];
        let p = row_stochastic(&s).unwrap();
        assert_eq!(p, faer::mat![[0.5, 0.5], [0.25, 0.75]]);
        let z = faer::mat![[1.0, 1.0], [0.0, 0.0]];
        assert!(matches!(row_stochastic(&z), Err(Error::ZeroRow(1))));
        let neg = faer::mat![[1.0, -1.0], [1.0, 1.0]];
        assert!(row_stochastic(&neg).is_err());
    }

    #[test]
    fn built_operator_is_stochastic() {
        let pts = random_cloud(80, 2, 9);
        let op = MarkovOperator::build(&pts, 2, 6).unwrap();
        assert_eq!(op.len(), 78);
        assert!(op.bandwidths.iter().all(|d| *d > 0.0));
        for i in 0..op.len() {
            let sum: f64 = (0..op.len()).map(|j| op.matrix()[(i, j)]).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!((0..op.len()).all(|j| op.matrix()[(i, j)] >= 0.0));
        }
    }

    #[test]
    fn matrix_dump_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let op = MarkovOperator::from_matrix(faer::mat![[0.9, 0.1], [0.1, 0.9]], 1).unwrap();
        let path = dir.path().join("p.csv");
        op.write_matrix(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let vals: Vec<f64> = text.split([',', '\n']).filter(|s| !s.is_empty()).map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.9, 0.1, 0.1, 0.9]);
        assert!(MarkovOperator::from_matrix(faer::mat![[0.5, 0.4], [0.1, 0.9]], 1).is_err());
    }
}
