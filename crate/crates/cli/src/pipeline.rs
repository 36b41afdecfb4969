use std::path::Path;

use anyhow::{bail, Context};
use trendcycle::data::{self, ColumnSpec, GridMask};
use trendcycle::embed::{delay_embed, EmbeddedSeries};
use trendcycle::models::simulate;
use trendcycle::operator::{eigendecompose, MarkovOperator, SpectralDecomposition};
use trendcycle::spectral::{self, ModeReport};
use trendcycle::TimeSeries;

use crate::config::{check_span, Input, Params, RunConfig};

pub struct Loaded {
    /// Series fed to the embedding.
    pub input: TimeSeries,
    /// Default reconstruction target (anomalies if configured).
    pub target: TimeSeries,
    pub mask: Option<GridMask>,
}

fn uniform(record: &data::NonuniformRecord) -> Option<f64> {
    let t = record.times();
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    t.windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0))
        .then_some(dt)
}

pub fn load(cfg: &RunConfig) -> anyhow::Result<Loaded> {
    let (raw, mask) = match &cfg.input {
        Input::Synthetic { model } => {
            let traj = simulate(model).context("stage synth")?;
            (traj.series(), None)
        }
        Input::Scalar {
            path,
            time_col,
            value_col,
            header_rows,
            ages,
        } => {
            let spec = ColumnSpec {
                time_col: *time_col,
                value_col: *value_col,
                header_rows: *header_rows,
            };
            let mut record = data::load_scalar_record(path, spec).context("stage load")?;
            if *ages {
                record = record.ages_to_time();
            }
            if record.len() < 2 {
                bail!("stage load: {} has fewer than two samples", path.display());
            }
            let times = record.times();
            let start = cfg.preprocess.start.unwrap_or(times[0]);
            let end = cfg.preprocess.end.unwrap_or(times[times.len() - 1]);
            let dt = match (cfg.preprocess.dt, uniform(&record)) {
                (Some(dt), _) | (None, Some(dt)) => dt,
                (None, None) => bail!("stage load: record is not uniformly sampled; set preprocess.dt"),
            };
            let series = data::interpolate_uniform(&record, dt, start, end)
                .with_context(|| format!("stage interpolate (dt={dt}, start={start}, end={end})"))?;
            (series, None)
        }
        Input::Field { path } => {
            let stack = data::load_field_stack(path).context("stage load")?;
            (stack.series, Some(stack.mask))
        }
    };
    let (input, target) = match &cfg.preprocess.anomaly {
        Some(w) => {
            let anom = data::anomalies(&raw, w.start, w.end, w.cycle).context("stage anomalies")?;
            if w.apply_to_input {
                (anom.clone(), anom)
            } else {
                (raw, anom)
            }
        }
        None => (raw.clone(), raw),
    };
    Ok(Loaded {
        input,
        target,
        mask,
    })
}

pub struct Analysis {
    pub embedded: EmbeddedSeries,
    pub operator: MarkovOperator,
    pub decomposition: SpectralDecomposition,
    pub reports: Vec<ModeReport>,
}

pub fn analyze(series: &TimeSeries, p: Params) -> anyhow::Result<Analysis> {
    check_span(p, series.len())?;
    let embedded = delay_embed(series, p.q, p.lag)
        .with_context(|| format!("stage embed (Q={}, lag={})", p.q, p.lag))?;
    log::info!("embedded {} points of width {}", embedded.len(), embedded.width());
    let operator = MarkovOperator::build(&embedded, p.step, p.knn)
        .with_context(|| format!("stage operator (step={}, knn={})", p.step, p.knn))?;
    let modes = p.modes.min(operator.len() - 1);
    log::info!("decomposing {0}x{0} operator for {modes} modes", operator.len());
    let decomposition =
        eigendecompose(&operator, modes).with_context(|| format!("stage eigendecompose (modes={modes})"))?;
    let aligned = spectral::align(series, &decomposition).context("stage classify")?;
    let reports = spectral::classify_modes(&decomposition, &aligned).context("stage classify")?;
    Ok(Analysis {
        embedded,
        operator,
        decomposition,
        reports,
    })
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
