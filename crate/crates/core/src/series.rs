//! Uniformly sampled scalar and vector time series.

use crate::error::{Error, Result};

/// Uniformly sampled series of `len()` snapshots, each with `dim()` components.
///
/// Samples are stored row-major: snapshot `t` occupies `samples[t*dim..(t+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    dim: usize,
    /// Sampling interval in physical units.
    pub dt: f64,
    /// Physical time of the first snapshot.
    pub t0: f64,
    pub time_unit: String,
    pub value_unit: String,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, dim: usize, dt: f64, t0: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("series dimension must be positive".into()));
        }
        if !samples.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                expected: samples.len() / dim * dim,
                actual: samples.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain {
                name: "dt",
                value: dt,
                expected: "(0, inf)",
            });
        }
        if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "non-finite sample at flat index {bad}"
            )));
        }
        Ok(Self {
            samples,
            dim,
            dt,
            t0,
            time_unit: String::new(),
            value_unit: String::new(),
        })
    }

    /// Scalar series with unit spacing starting at zero.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1, 1.0, 0.0)
    }

    pub fn with_units(mut self, time_unit: impl Into<String>, value_unit: impl Into<String>) -> Self {
        self.time_unit = time_unit.into();
        self.value_unit = value_unit.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn snapshot(&self, t: usize) -> &[f64] {
        &self.samples[t * self.dim..(t + 1) * self.dim]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Component `k` of every snapshot.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.samples.iter().skip(k).step_by(self.dim).copied().collect()
    }

    pub fn time(&self, t: usize) -> f64 {
        self.t0 + t as f64 * self.dt
    }

    /// Contiguous sub-series of snapshots `start..start+len`, keeping physical time stamps.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::LengthMismatch {
                expected: start + len,
                actual: self.len(),
            });
        }
        Ok(Self {
            samples: self.samples[start * self.dim..(start + len) * self.dim].to_vec(),
            dim: self.dim,
            dt: self.dt,
            t0: self.time(start),
            time_unit: self.time_unit.clone(),
            value_unit: self.value_unit.clone(),
        })
    }

    pub(crate) fn map_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), self.samples.len());
        Self {
            samples,
            ..self.clone()
        }
    }
}

/// Format a value with full double precision in scientific notation.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_and_window() {
        let s = TimeSeries::new(vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0], 2, 0.5, 1.0).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.component(1), vec![10.0, 20.0, 30.0]);
        let w = s.window(1, 2).unwrap();
        assert_eq!(w.snapshot(0), &[2.0, 20.0]);
        assert_eq!(w.t0, 1.5);
        assert!(s.window(2, 2).is_err());
    }

    #[test]
    fn rejects_ragged_samples() {
        assert!(TimeSeries::new(vec![1.0, 2.0, 3.0], 2, 1.0, 0.0).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN], 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -3.25e-12, 1.0 / 3.0, 12345.678] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }
}
