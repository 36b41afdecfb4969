//! Delay embedding and the geometry of embedded harmonic orbits.
//!
//! A single harmonic `cos(θ)` sampled with lag angle `β` embeds in three delays as the ellipse
//! `γ_β(θ) = (cos θ, cos(θ+β), cos(θ+2β))`. The ellipses for distinct `β ∈ (0, π/2]` all pivot
//! about the common axis `[1, 0, -1]` and never intersect; their area peaks at `β = π/3`, where
//! the ellipse is a circle. [`suggest_lag`] picks the lag that places the fastest rotation at
//! `β = π/2`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::series::{fmt_num, TimeSeries};

/// Matrix of delay vectors built from a [`TimeSeries`].
///
/// Row `r` holds `(h_t, h_{t-ℓ}, …, h_{t-(Q-1)ℓ})` with `t = (Q-1)ℓ + r`, each snapshot
/// flattened to `dim` components. Rows are time-stamped by their newest sample.
#[derive(Debug, Clone)]
pub struct EmbeddedSeries {
    points: Mat<f64>,
    pub q: usize,
    pub lag: usize,
    /// Components per source snapshot.
    pub dim: usize,
    pub dt: f64,
    /// Physical time of source sample 0.
    pub t0: f64,
    pub source_length: usize,
}

impl EmbeddedSeries {
    /// Wrap raw points (rows) as an embedding with `q = 1`, `lag = 1`.
    pub fn from_points(points: Mat<f64>) -> Self {
        let n = points.nrows();
        let dim = points.ncols();
        Self {
            points,
            q: 1,
            lag: 1,
            dim,
            dt: 1.0,
            t0: 0.0,
            source_length: n,
        }
    }

    pub fn points(&self) -> &Mat<f64> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Ambient dimension `dim * q`.
    pub fn width(&self) -> usize {
        self.points.ncols()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        (0..self.width()).map(|c| self.points[(r, c)]).collect()
    }

    /// Source index of the newest sample in row `r`.
    pub fn source_index(&self, r: usize) -> usize {
        self.offset() + r
    }

    /// Source index of row 0, `(Q-1)ℓ`.
    pub fn offset(&self) -> usize {
        (self.q - 1) * self.lag
    }

    pub fn time(&self, r: usize) -> f64 {
        self.t0 + self.source_index(r) as f64 * self.dt
    }

    /// Squared Euclidean distance between rows `a` and `b`.
    #[inline]
    pub fn dist2(&self, a: usize, b: usize) -> f64 {
        let ra = self.points.row(a);
        let rb = self.points.row(b);
        ra.iter().zip(rb.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Write the matrix with a metadata comment line and a `time,c0,c1,...` header.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = format!(
            "# q={} lag={} dt={} t0={} dim={} source_length={}\ntime",
            self.q, self.lag, self.dt, self.t0, self.dim, self.source_length
        );
        for c in 0..self.width() {
            out.push_str(&format!(",c{c}"));
        }
        out.push('\n');
        for r in 0..self.len() {
            out.push_str(&fmt_num(self.time(r)));
            for c in 0..self.width() {
                out.push(',');
                out.push_str(&fmt_num(self.points[(r, c)]));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Delay-embed `series` with `q` delays spaced `lag` samples apart.
pub fn delay_embed(series: &TimeSeries, q: usize, lag: usize) -> Result<EmbeddedSeries> {
    if q == 0 || lag == 0 {
        return Err(Error::InvalidConfig(format!(
            "embedding needs q >= 1 and lag >= 1 (got q={q}, lag={lag})"
        )));
    }
    let span = (q - 1) * lag;
    let len = series.len();
    if len <= span {
        return Err(Error::SeriesTooShort {
            required: span,
            actual: len,
        });
    }
    let n = len - span;
    let d = series.dim();
    let points = Mat::from_fn(n, d * q, |r, c| {
        let (delay, k) = (c / d, c % d);
        series.snapshot(span + r - delay * lag)[k]
    });
    Ok(EmbeddedSeries {
        points,
        q,
        lag,
        dim: d,
        dt: series.dt,
        t0: series.t0,
        source_length: len,
    })
}

/// Point `(cos θ, cos(θ+β), cos(θ+2β))` of the embedded unit circle.
pub fn ellipse_curve(beta: f64, theta: f64) -> [f64; 3] {
    [theta.cos(), (theta + beta).cos(), (theta + 2.0 * beta).cos()]
}

/// Semi-axes of the ellipse traced by [`ellipse_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseAxes {
    /// `[√(2+cos 2β), √(1-cos 2β)]`.
    pub lengths: [f64; 2],
    /// Unit directions `[sin 2β, 2 sin β, sin 2β]/‖·‖` and `[1, 0, -1]/√2`.
    pub directions: [[f64; 3]; 2],
}

pub fn ellipse_axes(beta: f64) -> Result<EllipseAxes> {
    if beta == 0.0 {
        return Err(Error::DegenerateBeta(beta));
    }
    if !(beta > 0.0 && beta <= FRAC_PI_2) {
        return Err(Error::Domain {
            name: "beta",
            value: beta,
            expected: "(0, pi/2]",
        });
    }
    let c2 = (2.0 * beta).cos();
    let tilted = [(2.0 * beta).sin(), 2.0 * beta.sin(), (2.0 * beta).sin()];
    let norm = tilted.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(EllipseAxes {
        lengths: [(2.0 + c2).sqrt(), (1.0 - c2).sqrt()],
        directions: [tilted.map(|v| v / norm), [s, 0.0, -s]],
    })
}

/// Area `π √(2+cos 2β) √(1-cos 2β)` enclosed by the embedded ellipse.
pub fn ellipse_area(beta: f64) -> f64 {
    let c2 = (2.0 * beta).cos();
    PI * (2.0 + c2).sqrt() * (1.0 - c2).max(0.0).sqrt()
}

/// Lag (in samples) that maps the fastest rotation rate `alpha_max` to a quarter turn.
///
/// Rounds `(π/2)/alpha_max` to the nearest integer, ties down, and never returns less than 1.
pub fn suggest_lag(alpha_max: f64) -> Result<usize> {
    if !(alpha_max > 0.0 && alpha_max <= PI) {
        return Err(Error::Domain {
            name: "alpha_max",
            value: alpha_max,
            expected: "(0, pi]",
        });
    }
    let ratio = FRAC_PI_2 / alpha_max;
    let floor = ratio.floor();
    let lag = if ratio - floor > 0.5 { floor + 1.0 } else { floor };
    Ok((lag as usize).max(1))
}
