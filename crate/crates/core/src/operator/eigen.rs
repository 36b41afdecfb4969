use std::cmp::Ordering;
use std::path::Path;

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::diag::Diag;
use faer::{Accum, Mat, MatRef};
use num_complex::Complex64;

use super::MarkovOperator;
use crate::error::{Error, Result};
use crate::series::fmt_num;

/// Relative residual above which an eigenpair is treated as unconverged.
pub const RESIDUAL_FAILURE: f64 = 1e-6;

/// Moduli closer than this are treated as ties when ordering the spectrum.
const MODULUS_QUANTUM: f64 = 1e-10;

/// Eigenvalue condition number above which biorthogonality is not trusted.
const ILL_CONDITIONED: f64 = 1e8;

/// Leading eigenpairs of a [`MarkovOperator`] with their biorthonormal duals.
///
/// Eigenvalues are ordered by descending modulus; ties go to the larger real part, and
/// conjugate partners are adjacent with the positive-imaginary member first. Each right
/// vector has unit norm and its largest-modulus entry real and positive; each dual vector
/// satisfies `v'† v = 1`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<Complex64>,
    right: Vec<Vec<Complex64>>,
    dual: Vec<Vec<Complex64>>,
    partner: Vec<Option<usize>>,
    right_residuals: Vec<f64>,
    dual_residuals: Vec<f64>,
    condition: Vec<f64>,
    pub step: usize,
    pub dt: f64,
    /// Source-series index of vector entry 0.
    pub offset: usize,
    pub t0: f64,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Length of each eigenvector (`N - s`).
    pub fn vector_len(&self) -> usize {
        self.right.first().map_or(0, Vec::len)
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> Complex64 {
        self.eigenvalues[j]
    }

    pub fn right(&self, j: usize) -> &[Complex64] {
        &self.right[j]
    }

    pub fn dual(&self, j: usize) -> &[Complex64] {
        &self.dual[j]
    }

    /// Index of the complex-conjugate partner of eigenpair `j`, if `λ_j` is not real.
    pub fn partner(&self, j: usize) -> Option<usize> {
        self.partner[j]
    }

    pub fn is_real(&self, j: usize) -> bool {
        self.partner[j].is_none()
    }

    /// `‖P v_j - λ_j v_j‖ / ‖v_j‖`.
    pub fn right_residuals(&self) -> &[f64] {
        &self.right_residuals
    }

    /// `‖Pᵀ v'_j - conj(λ_j) v'_j‖ / ‖v'_j‖`.
    pub fn dual_residuals(&self) -> &[f64] {
        &self.dual_residuals
    }

    /// `‖v'_j‖ ‖v_j‖ / |v'_j† v_j|`, the eigenvalue condition number.
    pub fn condition(&self, j: usize) -> f64 {
        self.condition[j]
    }

    pub fn max_residual(&self) -> f64 {
        self.right_residuals
            .iter()
            .chain(&self.dual_residuals)
            .copied()
            .fold(0.0, f64::max)
    }

    /// Indices whose eigenvalues are too ill-conditioned for biorthogonality to be meaningful.
    pub fn ill_conditioned(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.condition[j] > ILL_CONDITIONED)
            .collect()
    }

    /// `max_{i≠j} |v'_i† v_j|` over the retained, well-conditioned pairs.
    pub fn biorthogonality_defect(&self) -> f64 {
        let bad = self.ill_conditioned();
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i == j || bad.contains(&i) || bad.contains(&j) {
                    continue;
                }
                worst = worst.max(inner(&self.dual[i], &self.right[j]).norm());
            }
        }
        worst
    }

    /// Physical time of vector entry `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + (self.offset + i) as f64 * self.dt
    }

    /// Table with columns `index,re,im,modulus,arg,residual` (1-based index).
    pub fn eigenvalue_table(&self) -> String {
        let mut out = String::from("index,re,im,modulus,arg,residual\n");
        for (j, l) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                j + 1,
                fmt_num(l.re),
                fmt_num(l.im),
                fmt_num(l.norm()),
                fmt_num(l.arg()),
                fmt_num(self.right_residuals[j].max(self.dual_residuals[j]))
            ));
        }
        out
    }

    pub fn write_eigenvalue_table(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.eigenvalue_table()).map_err(|e| Error::io(path, e))
    }

    /// Write `time,re_v1,im_v1,...` for the listed 0-based mode indices.
    pub fn write_mode_series(&self, path: &Path, modes: &[usize], dual: bool) -> Result<()> {
        let vecs = if dual { &self.dual } else { &self.right };
        let tag = if dual { "w" } else { "v" };
        let mut out = String::from("time");
        for &j in modes {
            out.push_str(&format!(",re_{tag}{0},im_{tag}{0}", j + 1));
        }
        out.push('\n');
        for i in 0..self.vector_len() {
            out.push_str(&fmt_num(self.time(i)));
            for &j in modes {
                let z = vecs[j][i];
                out.push_str(&format!(",{},{}", fmt_num(z.re), fmt_num(z.im)));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A real eigenvalue or a conjugate pair as packed by the real Schur solver.
#[derive(Debug, Clone, Copy)]
struct Unit {
    col: usize,
    /// Representative eigenvalue with nonnegative imaginary part.
    lambda: Complex64,
    pair: bool,
    /// The solver stored the negative-imaginary member first.
    flipped: bool,
}

fn unit_order(a: &Unit, b: &Unit) -> Ordering {
    let qa = (a.lambda.norm() / MODULUS_QUANTUM).round() as i64;
    let qb = (b.lambda.norm() / MODULUS_QUANTUM).round() as i64;
    qb.cmp(&qa)
        .then_with(|| b.lambda.re.total_cmp(&a.lambda.re))
        .then_with(|| a.lambda.im.total_cmp(&b.lambda.im))
}

fn column(u: MatRef<'_, f64>, col: usize, pair: bool, flipped: bool) -> Vec<Complex64> {
    (0..u.nrows())
        .map(|i| {
            if pair {
                let z = Complex64::new(u[(i, col)], u[(i, col + 1)]);
                if flipped {
                    z.conj()
                } else {
                    z
                }
            } else {
                Complex64::new(u[(i, col)], 0.0)
            }
        })
        .collect()
}

/// Unit norm, largest-modulus entry real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let nv = norm(v);
    let (pivot, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z = *z * phase / nv;
    }
    v[pivot].im = 0.0;
}

/// Residual norms of `A x_j - mu_j x_j` for the columns `xs`.
fn residuals(a: MatRef<'_, f64>, xs: &[Vec<Complex64>], mus: &[Complex64]) -> Vec<f64> {
    let n = a.nrows();
    let k = xs.len();
    let re = Mat::from_fn(n, k, |i, j| xs[j][i].re);
    let im = Mat::from_fn(n, k, |i, j| xs[j][i].im);
    let mut are = Mat::<f64>::zeros(n, k);
    let mut aim = Mat::<f64>::zeros(n, k);
    let par = faer::get_global_parallelism();
    matmul(&mut are, Accum::Replace, a, &re, 1.0, par);
    matmul(&mut aim, Accum::Replace, a, &im, 1.0, par);
    (0..k)
        .map(|j| {
            let r: f64 = (0..n)
                .map(|i| (Complex64::new(are[(i, j)], aim[(i, j)]) - mus[j] * xs[j][i]).norm_sqr())
                .sum();
            r.sqrt() / norm(&xs[j])
        })
        .collect()
}

/// Top `m` eigenpairs of `P` by modulus, with dual (left) eigenvectors.
///
/// A conjugate pair straddling position `m` is kept whole, so up to `m + 1` pairs may be
/// returned. Right and left eigenvectors come from a single real Schur factorization.
pub fn eigendecompose(op: &MarkovOperator, m: usize) -> Result<SpectralDecomposition> {
    let p = op.matrix();
    let n = p.nrows();
    if m == 0 || m > n {
        return Err(Error::InvalidConfig(format!(
            "requested {m} eigenpairs of a {n}-state operator"
        )));
    }

    let par = faer::get_global_parallelism();
    let mut s_re = Diag::<f64>::zeros(n);
    let mut s_im = Diag::<f64>::zeros(n);
    let mut left = Mat::<f64>::zeros(n, n);
    let mut right = Mat::<f64>::zeros(n, n);
    let scratch = evd::evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    );
    let mut mem = MemBuffer::new(scratch);
    evd::evd_real(
        p.as_ref(),
        s_re.as_mut(),
        s_im.as_mut(),
        Some(left.as_mut()),
        Some(right.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::EigenNonConvergence {
        max_residual: f64::INFINITY,
        residuals: Vec::new(),
    })?;

    let s_re = s_re.column_vector();
    let s_im = s_im.column_vector();
    let mut units = Vec::with_capacity(n);
    let mut col = 0;
    while col < n {
        if s_im[col] == 0.0 {
            units.push(Unit {
                col,
                lambda: Complex64::new(s_re[col], 0.0),
                pair: false,
                flipped: false,
            });
            col += 1;
        } else {
            units.push(Unit {
                col,
                lambda: Complex64::new(s_re[col], s_im[col].abs()),
                pair: true,
                flipped: s_im[col] < 0.0,
            });
            col += 2;
        }
    }
    units.sort_by(unit_order);

    let mut eigenvalues = Vec::with_capacity(m + 1);
    let mut rights = Vec::with_capacity(m + 1);
    let mut duals = Vec::with_capacity(m + 1);
    let mut partner = Vec::with_capacity(m + 1);
    let mut condition = Vec::with_capacity(m + 1);
    for u in &units {
        if eigenvalues.len() >= m {
            break;
        }
        let mut v = column(right.as_ref(), u.col, u.pair, u.flipped);
        let mut w = column(left.as_ref(), u.col, u.pair, u.flipped);
        fix_phase(&mut v);
        let c = inner(&w, &v);
        let scale = c.conj().inv();
        for z in w.iter_mut() {
            *z *= scale;
        }
        let kappa = norm(&w);
        if kappa > ILL_CONDITIONED {
            log::warn!(
                "eigenvalue {:.6}{:+.6}i is ill-conditioned (condition {kappa:.3e})",
                u.lambda.re,
                u.lambda.im
            );
        }
        let j = eigenvalues.len();
        if u.pair {
            eigenvalues.push(u.lambda);
            eigenvalues.push(u.lambda.conj());
            partner.push(Some(j + 1));
            partner.push(Some(j));
            let vc: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
            let wc: Vec<Complex64> = w.iter().map(|z| z.conj()).collect();
            rights.push(v);
            rights.push(vc);
            duals.push(w);
            duals.push(wc);
            condition.extend([kappa, kappa]);
        } else {
            eigenvalues.push(u.lambda);
            partner.push(None);
            rights.push(v);
            duals.push(w);
            condition.push(kappa);
        }
    }

    let right_residuals = residuals(p.as_ref(), &rights, &eigenvalues);
    let conj: Vec<Complex64> = eigenvalues.iter().map(|l| l.conj()).collect();
    let dual_residuals = residuals(p.as_ref().transpose(), &duals, &conj);

    let dec = SpectralDecomposition {
        eigenvalues,
        right: rights,
        dual: duals,
        partner,
        right_residuals,
        dual_residuals,
        condition,
        step: op.step,
        dt: op.dt,
        offset: op.offset,
        t0: op.t0,
    };
    let worst = dec.max_residual();
    if !(worst <= RESIDUAL_FAILURE) {
        return Err(Error::EigenNonConvergence {
            max_residual: worst,
            residuals: dec
                .right_residuals
                .iter()
                .zip(&dec.dual_residuals)
                .map(|(a, b)| a.max(*b))
                .collect(),
        });
    }
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddedSeries;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_operator(n: usize, step: usize, seed: u64) -> MarkovOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * 3).map(|_| rng.gen::<f64>()).collect();
        let pts = EmbeddedSeries::from_points(Mat::from_fn(n, 3, |i, j| data[i * 3 + j]));
        MarkovOperator::build(&pts, step, 5).unwrap()
    }

    #[test]
    fn symmetric_two_state_chain() {
        let op = MarkovOperator::from_matrix(faer::mat![[0.9, 0.1], [0.1, 0.9]], 1).unwrap();
        let dec = eigendecompose(&op, 2).unwrap();
        assert_abs_diff_eq!(dec.eigenvalue(0).re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvalue(1).re, 0.8, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(dec.right(0)[0].re, s, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.right(0)[1].re, s, epsilon = 1e-14);
        // (1, -1) up to sign; phase rule makes the first max-modulus entry positive
        assert_abs_diff_eq!(dec.right(1)[0].re, s, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.right(1)[1].re, -s, epsilon = 1e-14);
        assert!(dec.is_real(0) && dec.is_real(1));
    }

    #[test]
    fn cyclic_shift_has_quarter_turn() {
        // state i -> i+1 (mod 4)
        let p = Mat::from_fn(4, 4, |i, j| if j == (i + 1) % 4 { 1.0 } else { 0.0 });
        let op = MarkovOperator::from_matrix(p, 1).unwrap();
        let dec = eigendecompose(&op, 4).unwrap();
        let l = dec.eigenvalues();
        assert_abs_diff_eq!(l[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[1].im, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[2].im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[3].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l[1].arg(), std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert_eq!(dec.partner(1), Some(2));
        assert_eq!(dec.partner(2), Some(1));
    }

    #[test]
    fn random_operator_invariants() {
        let op = random_operator(60, 1, 3);
        let dec = eigendecompose(&op, 12).unwrap();
        assert_abs_diff_eq!(dec.eigenvalue(0).re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(dec.eigenvalue(0).im, 0.0);
        let v0 = dec.right(0);
        let c = v0[0];
        assert!(v0.iter().all(|z| (z - c).norm() < 1e-10));
        for j in 0..dec.len() {
            assert!(dec.eigenvalue(j).norm() <= 1.0 + 1e-8);
            assert!(dec.right_residuals()[j] < 1e-8, "right residual {j}");
            assert!(dec.dual_residuals()[j] < 1e-8, "dual residual {j}");
            assert_abs_diff_eq!(inner(dec.dual(j), dec.right(j)).re, 1.0, epsilon = 1e-12);
            if let Some(k) = dec.partner(j) {
                assert_eq!(dec.eigenvalue(k), dec.eigenvalue(j).conj());
                assert!(dec.right(j).iter().zip(dec.right(k)).all(|(a, b)| *a == b.conj()));
            }
        }
        assert!(dec.biorthogonality_defect() < 1e-8);
    }

    #[test]
    fn ordering_is_descending_modulus() {
        let dec = eigendecompose(&random_operator(50, 2, 8), 20).unwrap();
        let l = dec.eigenvalues();
        for w in l.windows(2) {
            assert!(w[0].norm() >= w[1].norm() - MODULUS_QUANTUM);
        }
        for j in 0..l.len() {
            if let Some(k) = dec.partner(j) {
                if k == j + 1 {
                    assert!(l[j].im > 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_mode_count() {
        let op = random_operator(10, 1, 1);
        assert!(eigendecompose(&op, 0).is_err());
        assert!(eigendecompose(&op, 10).is_err());
    }

    #[test]
    fn tables_have_one_row_per_mode() {
        let dec = eigendecompose(&random_operator(30, 1, 2), 5).unwrap();
        let table = dec.eigenvalue_table();
        assert_eq!(table.lines().count(), dec.len() + 1);
        assert!(table.starts_with("index,re,im,modulus,arg,residual\n1,"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("modes.csv");
        dec.write_mode_series(&path, &[0, 1], false).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,re_v1,im_v1,re_v2,im_v2");
        assert_eq!(text.lines().count(), dec.vector_len() + 1);
    }
}
