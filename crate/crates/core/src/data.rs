//! Ingestion of nonuniform scalar records and gridded snapshot stacks.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{fmt_num, TimeSeries};

/// Scalar record with strictly increasing sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct NonuniformRecord {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl NonuniformRecord {
    /// Sorts by time if needed; repeated times are an error.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                actual: values.len(),
            });
        }
        let mut pairs: Vec<(f64, f64)> = times.into_iter().zip(values).collect();
        if pairs.windows(2).any(|w| w[0].0 > w[1].0) {
            log::warn!("record times are not ascending; sorting {} samples", pairs.len());
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateTime(w[0].0));
        }
        let (times, values) = pairs.into_iter().unzip();
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Samples with `lo <= t <= hi`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Self {
        let (times, values) = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| (lo..=hi).contains(*t))
            .map(|(t, v)| (*t, *v))
            .unzip();
        Self { times, values }
    }

    /// Reinterpret times as ages before present: `t = -age`, so time runs forward.
    pub fn ages_to_time(&self) -> Self {
        Self {
            times: self.times.iter().rev().map(|a| -a).collect(),
            values: self.values.iter().rev().copied().collect(),
        }
    }
}

/// Which columns of a delimited file hold time and value.
///
/// The default matches the LR04 stack layout: time, value, then an ignored error column,
/// with one header line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSpec {
    pub time_col: usize,
    pub value_col: usize,
    /// Non-comment lines to skip before data starts.
    pub header_rows: usize,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            time_col: 0,
            value_col: 1,
            header_rows: 1,
        }
    }
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|f| !f.is_empty())
}

/// Parse a comma-, semicolon- or whitespace-delimited record. Lines starting with `#` are comments.
pub fn parse_scalar_record(text: &str, spec: ColumnSpec, path: &Path) -> Result<NonuniformRecord> {
    let mut skipped = 0;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_start_matches('\u{feff}').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if skipped < spec.header_rows {
            skipped += 1;
            continue;
        }
        let cols: Vec<&str> = fields(line).collect();
        let get = |c: usize, what: &str| -> Result<f64> {
            let raw = cols.get(c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("missing {what} column {c}"),
            })?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("invalid {what} {raw:?}"),
                })
        };
        times.push(get(spec.time_col, "time")?);
        values.push(get(spec.value_col, "value")?);
    }
    NonuniformRecord::new(times, values)
}

pub fn load_scalar_record(path: &Path, spec: ColumnSpec) -> Result<NonuniformRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scalar_record(&text, spec, path)
}

/// Linear interpolation at `t_start, t_start + dt, ...` up to `t_end`.
pub fn interpolate_uniform(record: &NonuniformRecord, dt: f64, t_start: f64, t_end: f64) -> Result<TimeSeries> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            expected: "(0, inf)",
        });
    }
    let (Some(&min), Some(&max)) = (record.times.first(), record.times.last()) else {
        return Err(Error::SeriesTooShort {
            required: 1,
            actual: 0,
        });
    };
    if !(t_start <= t_end && t_start >= min && t_end <= max) {
        return Err(Error::Extrapolation {
            start: t_start,
            end: t_end,
            min,
            max,
        });
    }
    let n = ((t_end - t_start) / dt + 1e-9).floor() as usize + 1;
    let values = (0..n)
        .map(|i| {
            let t = t_start + i as f64 * dt;
            let hi = record.times.partition_point(|&x| x <= t);
            let lo = hi - 1;
            if record.times[lo] == t || hi == record.len() {
                return record.values[lo];
            }
            let (t0, t1) = (record.times[lo], record.times[hi]);
            let (v0, v1) = (record.values[lo], record.values[hi]);
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        })
        .collect();
    TimeSeries::new(values, 1, dt, t_start)
}

/// Write `series` as `time,c0,...` preceded by a `#` metadata line.
pub fn write_series(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut out = format!(
        "# dt={} t0={} dim={} len={} time_unit={} value_unit={}\ntime",
        fmt_num(series.dt),
        fmt_num(series.t0),
        series.dim(),
        series.len(),
        series.time_unit,
        series.value_unit
    );
    for k in 0..series.dim() {
        let _ = write!(out, ",c{k}");
    }
    out.push('\n');
    for t in 0..series.len() {
        out.push_str(&fmt_num(series.time(t)));
        for v in series.snapshot(t) {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Grid cells kept after dropping those missing at any time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMask {
    pub rows: usize,
    pub cols: usize,
    /// Row-major flat indices of kept cells, ascending.
    pub kept: Vec<usize>,
}

impl GridMask {
    pub fn kept_count(&self) -> usize {
        self.kept.len()
    }

    /// Place a kept-cell vector back onto the full grid, filling dropped cells.
    pub fn scatter_back(&self, values: &[f64], fill: f64) -> Result<Vec<f64>> {
        if values.len() != self.kept.len() {
            return Err(Error::LengthMismatch {
                expected: self.kept.len(),
                actual: values.len(),
            });
        }
        let mut grid = vec![fill; self.rows * self.cols];
        for (&cell, &v) in self.kept.iter().zip(values) {
            grid[cell] = v;
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone)]
pub struct FieldStack {
    pub series: TimeSeries,
    pub mask: GridMask,
    pub sentinel: f64,
}

fn is_missing(v: f64, sentinel: f64) -> bool {
    v == sentinel || (v.is_nan() && sentinel.is_nan())
}

/// Parse the snapshot-stack text format.
///
/// ```text
/// fieldstack rows=2 cols=2 snapshots=3 sentinel=-999 dt=1 t0=0
/// 1.0 2.0 -999 4.0
/// ...
/// ```
///
/// One line per snapshot with `rows*cols` row-major values; `#` lines are comments.
pub fn parse_field_stack(text: &str, path: &Path) -> Result<FieldStack> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty field stack".into()))?;
    let mut words = header.split_whitespace();
    if words.next() != Some("fieldstack") {
        return Err(parse_err(hline, "expected 'fieldstack' header".into()));
    }
    let (mut rows, mut cols, mut snaps) = (None, None, None);
    let (mut sentinel, mut dt, mut t0) = (f64::NAN, 1.0, 0.0);
    for w in words {
        let (key, val) = w
            .split_once('=')
            .ok_or_else(|| parse_err(hline, format!("malformed header field {w:?}")))?;
        let num = || {
            val.parse::<f64>()
                .map_err(|_| parse_err(hline, format!("invalid {key} {val:?}")))
        };
        let count = || {
            val.parse::<usize>()
                .map_err(|_| parse_err(hline, format!("invalid {key} {val:?}")))
        };
        match key {
            "rows" => rows = Some(count()?),
            "cols" => cols = Some(count()?),
            "snapshots" => snaps = Some(count()?),
            "sentinel" => sentinel = num()?,
            "dt" => dt = num()?,
            "t0" => t0 = num()?,
            _ => return Err(parse_err(hline, format!("unknown header field {key:?}"))),
        }
    }
    let (Some(rows), Some(cols), Some(snaps)) = (rows, cols, snaps) else {
        return Err(parse_err(hline, "header needs rows, cols and snapshots".into()));
    };
    let cells = rows * cols;
    if cells == 0 {
        return Err(Error::GridInconsistency("grid has no cells".into()));
    }

    let mut raw = Vec::with_capacity(snaps * cells);
    let mut count = 0;
    for (ln, line) in lines {
        let before = raw.len();
        for f in fields(line) {
            let v = f
                .parse::<f64>()
                .map_err(|_| parse_err(ln, format!("invalid value {f:?}")))?;
            if !v.is_finite() && !is_missing(v, sentinel) {
                return Err(parse_err(ln, format!("non-finite value {f:?} is not the sentinel")));
            }
            raw.push(v);
        }
        if raw.len() - before != cells {
            return Err(Error::GridInconsistency(format!(
                "line {ln}: snapshot has {} values, grid has {cells}",
                raw.len() - before
            )));
        }
        count += 1;
    }
    if count != snaps {
        return Err(Error::GridInconsistency(format!(
            "header declares {snaps} snapshots, found {count}"
        )));
    }

    let kept: Vec<usize> = (0..cells)
        .filter(|&c| (0..snaps).all(|t| !is_missing(raw[t * cells + c], sentinel)))
        .collect();
    if kept.is_empty() {
        return Err(Error::GridInconsistency("every cell is missing at some time".into()));
    }
    let samples = (0..snaps)
        .flat_map(|t| kept.iter().map(move |&c| (t, c)))
        .map(|(t, c)| raw[t * cells + c])
        .collect();
    Ok(FieldStack {
        series: TimeSeries::new(samples, kept.len(), dt, t0)?,
        mask: GridMask { rows, cols, kept },
        sentinel,
    })
}

pub fn load_field_stack(path: &Path) -> Result<FieldStack> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_field_stack(&text, path)
}

/// Serialize full-grid snapshots in the format read by [`load_field_stack`].
pub fn field_stack_text(rows: usize, cols: usize, snapshots: &[Vec<f64>], sentinel: f64, dt: f64, t0: f64) -> String {
    let mut out = format!(
        "fieldstack rows={rows} cols={cols} snapshots={} sentinel={sentinel} dt={dt} t0={t0}\n",
        snapshots.len()
    );
    for snap in snapshots {
        let line: Vec<String> = snap.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Subtract the per-phase mean over snapshots `start..end` from every snapshot of that phase.
///
/// Phase is the snapshot index modulo `cycle` (12 for monthly data starting in January).
pub fn anomalies(series: &TimeSeries, start: usize, end: usize, cycle: usize) -> Result<TimeSeries> {
    if cycle == 0 || start >= end || end > series.len() || end - start < cycle {
        return Err(Error::WindowOutOfRange {
            start,
            end,
            len: series.len(),
            cycle,
        });
    }
    let d = series.dim();
    let mut sums = vec![0.0; cycle * d];
    let mut counts = vec![0usize; cycle];
    for t in start..end {
        let p = t % cycle;
        counts[p] += 1;
        for (k, v) in series.snapshot(t).iter().enumerate() {
            sums[p * d + k] += v;
        }
    }
    let mut out = series.samples().to_vec();
    for t in 0..series.len() {
        let p = t % cycle;
        for k in 0..d {
            out[t * d + k] -= sums[p * d + k] / counts[p] as f64;
        }
    }
    Ok(series.map_samples(out))
}
