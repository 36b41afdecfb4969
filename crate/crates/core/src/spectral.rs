//! Periods, amplitudes and reconstructions from a spectral decomposition.

use std::fmt;
use std::path::Path;

pub use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::SpectralDecomposition;
use crate::series::{fmt_num, TimeSeries};

/// Imaginary parts at or below this are treated as zero.
pub const IMAG_TOL: f64 = 1e-10;

/// Oscillation period `2π s dt / |arg λ|`.
pub fn eigenperiod(lambda: Complex64, step: usize, dt: f64) -> Result<f64> {
    let arg = lambda.arg().abs();
    if arg <= IMAG_TOL || lambda.im.abs() <= IMAG_TOL {
        return Err(Error::RealEigenvalue {
            re: lambda.re,
            im: lambda.im,
        });
    }
    Ok(std::f64::consts::TAU * step as f64 * dt / arg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Constant,
    Trend,
    Oscillatory,
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeKind::Constant => "constant",
            ModeKind::Trend => "trend",
            ModeKind::Oscillatory => "oscillatory",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ModeReport {
    /// 0-based index into the decomposition.
    pub index: usize,
    pub eigenvalue: Complex64,
    pub kind: ModeKind,
    /// `f64::INFINITY` for real modes.
    pub period: f64,
    /// Norm of the projection coefficient `Y_j = v'_j† h` (over components for vector targets).
    pub amplitude: f64,
    /// Real part of `v_j`, one value per aligned time stamp.
    pub time_series: Vec<f64>,
}

/// The source samples aligned with eigenvector entries (newest-sample convention).
pub fn align(series: &TimeSeries, dec: &SpectralDecomposition) -> Result<TimeSeries> {
    series.window(dec.offset, dec.vector_len())
}

fn check_len(dec: &SpectralDecomposition, target: &TimeSeries) -> Result<()> {
    if target.len() != dec.vector_len() {
        return Err(Error::LengthMismatch {
            expected: dec.vector_len(),
            actual: target.len(),
        });
    }
    Ok(())
}

/// `Y_j = v'_j† h` for each component of `target`.
pub fn coefficients(dec: &SpectralDecomposition, j: usize, target: &TimeSeries) -> Result<Vec<Complex64>> {
    check_len(dec, target)?;
    let w = dec.dual(j);
    Ok((0..target.dim())
        .map(|k| {
            w.iter()
                .enumerate()
                .map(|(n, z)| z.conj() * target.snapshot(n)[k])
                .sum()
        })
        .collect())
}

/// One report per real mode and per conjugate pair (positive-frequency member).
pub fn classify_modes(dec: &SpectralDecomposition, observations: &TimeSeries) -> Result<Vec<ModeReport>> {
    check_len(dec, observations)?;
    let mut out = Vec::new();
    for j in 0..dec.len() {
        let lambda = dec.eigenvalue(j);
        if lambda.im < -IMAG_TOL {
            continue;
        }
        let kind = if j == 0 {
            ModeKind::Constant
        } else if lambda.im > IMAG_TOL {
            ModeKind::Oscillatory
        } else {
            ModeKind::Trend
        };
        let period = if kind == ModeKind::Oscillatory {
            eigenperiod(lambda, dec.step, dec.dt)?
        } else {
            f64::INFINITY
        };
        let amplitude = coefficients(dec, j, observations)?
            .iter()
            .map(|y| y.norm_sqr())
            .sum::<f64>()
            .sqrt();
        out.push(ModeReport {
            index: j,
            eigenvalue: lambda,
            kind,
            period,
            amplitude,
            time_series: dec.right(j).iter().map(|z| z.re).collect(),
        });
    }
    Ok(out)
}

/// The first nonconstant real mode.
pub fn trend_mode(reports: &[ModeReport]) -> Option<&ModeReport> {
    reports.iter().find(|r| r.kind == ModeKind::Trend)
}

/// The oscillatory report whose period is closest to `target`.
pub fn closest_period(reports: &[ModeReport], target: f64) -> Option<&ModeReport> {
    reports
        .iter()
        .filter(|r| r.kind == ModeKind::Oscillatory)
        .min_by(|a, b| (a.period - target).abs().total_cmp(&(b.period - target).abs()))
}

/// Table with columns `j,re,im,period,amplitude,kind` (1-based `j`).
pub fn mode_table(reports: &[ModeReport]) -> String {
    let mut out = String::from("j,re,im,period,amplitude,kind\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.index + 1,
            fmt_num(r.eigenvalue.re),
            fmt_num(r.eigenvalue.im),
            fmt_num(r.period),
            fmt_num(r.amplitude),
            r.kind
        ));
    }
    out
}

pub fn write_mode_table(path: &Path, reports: &[ModeReport]) -> Result<()> {
    std::fs::write(path, mode_table(reports)).map_err(|e| Error::io(path, e))
}

/// Add missing conjugate partners; returns the closed, sorted set and the indices that were added.
pub fn close_under_conjugation(dec: &SpectralDecomposition, indices: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut set: Vec<usize> = Vec::with_capacity(indices.len() + 1);
    for &j in indices {
        if j >= dec.len() {
            return Err(Error::UnknownMode {
                index: j + 1,
                available: dec.len(),
            });
        }
        if !set.contains(&j) {
            set.push(j);
        }
    }
    let mut added = Vec::new();
    for &j in indices {
        if let Some(k) = dec.partner(j) {
            if !set.contains(&k) {
                set.push(k);
                added.push(k);
            }
        }
    }
    set.sort_unstable();
    Ok((set, added))
}

#[derive(Debug, Clone)]
pub struct Projection {
    /// 0-based mode indices.
    pub indices: Vec<usize>,
    /// Real part of the projected series, row-major like [`TimeSeries`].
    pub values: Vec<f64>,
    /// Largest imaginary magnitude discarded from the output.
    pub max_imag: f64,
    /// Index set is closed under conjugation, so the output is real in exact arithmetic.
    pub real: bool,
    pub dim: usize,
    pub dt: f64,
    /// Time of the first output sample.
    pub t0: f64,
}

impl Projection {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.dim).copied().collect()
    }

    pub fn to_series(&self) -> Result<TimeSeries> {
        TimeSeries::new(self.values.clone(), self.dim, self.dt, self.t0)
    }

    /// `time,c0,c1,...` with full-precision numbers.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::from("time");
        for k in 0..self.dim {
            out.push_str(&format!(",c{k}"));
        }
        out.push('\n');
        for (i, row) in self.values.chunks(self.dim).enumerate() {
            out.push_str(&fmt_num(self.t0 + i as f64 * self.dt));
            for v in row {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Apply `Π = Σ_j v_j v'_j†` componentwise to `target`.
pub fn project(dec: &SpectralDecomposition, indices: &[usize], target: &TimeSeries) -> Result<Projection> {
    check_len(dec, target)?;
    let (closed, added) = close_under_conjugation(dec, indices)?;
    let mut set: Vec<usize> = indices.to_vec();
    set.sort_unstable();
    set.dedup();
    let n = target.len();
    let d = target.dim();
    let mut acc = vec![Complex64::new(0.0, 0.0); n * d];
    for &j in &set {
        let y = coefficients(dec, j, target)?;
        for (m, v) in dec.right(j).iter().enumerate() {
            for k in 0..d {
                acc[m * d + k] += v * y[k];
            }
        }
    }
    Ok(Projection {
        real: added.is_empty() && closed.len() == set.len(),
        max_imag: acc.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
        values: acc.iter().map(|z| z.re).collect(),
        indices: set,
        dim: d,
        dt: dec.dt,
        t0: dec.time(0),
    })
}

/// Least-squares `gain * mode + offset ≈ reference`; returns `(offset, gain, scaled)`.
pub fn affine_scale(mode: &[f64], reference: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if mode.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: mode.len(),
            actual: reference.len(),
        });
    }
    let n = mode.len() as f64;
    let mx = mode.iter().sum::<f64>() / n;
    let my = reference.iter().sum::<f64>() / n;
    let sxx: f64 = mode.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = mode.iter().zip(reference).map(|(x, y)| (x - mx) * (y - my)).sum();
    let scale = mode.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if mode.is_empty() || !(sxx > (1e-14 * scale).powi(2) * n) {
        return Err(Error::ZeroVariance);
    }
    let gain = sxy / sxx;
    let offset = my - gain * mx;
    let scaled = mode.iter().map(|x| gain * x + offset).collect();
    Ok((offset, gain, scaled))
}

/// RMS of `|mode|` inside the mask over RMS outside; infinite when the outside is identically zero.
pub fn regime_localization(mode: &[Complex64], mask: &[bool]) -> Result<f64> {
    if mode.len() != mask.len() {
        return Err(Error::LengthMismatch {
            expected: mode.len(),
            actual: mask.len(),
        });
    }
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (z, &m) in mode.iter().zip(mask) {
        if m {
            si += z.norm_sqr();
            ni += 1;
        } else {
            so += z.norm_sqr();
            no += 1;
        }
    }
    if ni == 0 || no == 0 {
        return Err(Error::EmptyMask {
            inside: ni,
            outside: no,
        });
    }
    let inside = (si / ni as f64).sqrt();
    let outside = (so / no as f64).sqrt();
    if outside == 0.0 {
        return Ok(if inside == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(inside / outside)
}

/// Pearson correlation coefficient; NaN if either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
