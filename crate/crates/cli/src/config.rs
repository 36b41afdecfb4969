//! Run configuration: a TOML file whose fields can be overridden from the command line.
//!
//! ```toml
//! [input]
//! source = "scalar"          # or "synthetic" / "field"
//! path = "lr04_stack.csv"    # relative to this file
//! ages = true                # times are ages before present; flip to forward time
//!
//! [preprocess]
//! dt = 1.0
//! start = -3000.0
//! end = 0.0
//!
//! [embedding]
//! q = 5
//! lag = 10
//!
//! [operator]
//! step = 7
//! knn = 7
//! modes = 20
//! ```
//!
//! Synthetic input nests a model table: `[input.model] kind = "F", n_steps = 2000, seed = 7`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use trendcycle::models::{ModelConfig, ModelKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Input,
    #[serde(default)]
    pub preprocess: Preprocess,
    #[serde(default)]
    pub embedding: Embedding,
    #[serde(default)]
    pub operator: OperatorParams,
    #[serde(default)]
    pub output: Output,
    /// Filled in by the run; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    Synthetic {
        model: ModelConfig,
    },
    Scalar {
        path: PathBuf,
        #[serde(default)]
        time_col: usize,
        #[serde(default = "one")]
        value_col: usize,
        #[serde(default = "one")]
        header_rows: usize,
        #[serde(default)]
        ages: bool,
    },
    Field {
        path: PathBuf,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocess {
    /// Interpolate onto this spacing; required for nonuniform records.
    pub dt: Option<f64>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    /// Climatology removal for reconstruction targets.
    pub anomaly: Option<AnomalyWindow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyWindow {
    pub start: usize,
    pub end: usize,
    pub cycle: usize,
    /// Also feed anomalies (rather than raw values) to the operator.
    #[serde(default)]
    pub apply_to_input: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Embedding {
    pub q: Option<usize>,
    pub lag: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorParams {
    pub step: Option<usize>,
    pub knn: Option<usize>,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub write_matrix: bool,
    #[serde(default)]
    pub write_embedding: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub version: String,
    pub dt: f64,
    pub t0: f64,
    pub series_length: usize,
    pub offset: usize,
}

/// Analysis parameters after applying flags, config and per-input defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    pub q: usize,
    pub lag: usize,
    pub step: usize,
    pub knn: usize,
    pub modes: usize,
}

const DEFAULT_MODES: usize = 20;

impl Params {
    /// Defaults tuned per model; recorded data gets the benthic-stack settings.
    pub fn defaults_for(input: &Input) -> Self {
        let (q, lag, step, knn) = match input {
            Input::Synthetic { model } => match model.kind {
                ModelKind::M => (3, 16, 1, 7),
                ModelKind::A => (2, 16, 1, 7),
                ModelKind::F | ModelKind::FPrime => (3, 10, 1, 25),
            },
            Input::Scalar { .. } | Input::Field { .. } => (5, 10, 7, 7),
        };
        Self {
            q,
            lag,
            step,
            knn,
            modes: DEFAULT_MODES,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<ModelKind>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub drift: Option<trendcycle::models::DriftLaw>,
    pub q: Option<usize>,
    pub lag: Option<usize>,
    pub step: Option<usize>,
    pub knn: Option<usize>,
    pub modes: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn synthetic(kind: ModelKind) -> Self {
        Self {
            input: Input::Synthetic {
                model: ModelConfig::new(kind),
            },
            preprocess: Preprocess::default(),
            embedding: Embedding::default(),
            operator: OperatorParams::default(),
            output: Output::default(),
            run: None,
        }
    }

    /// Parse a config file; relative input paths are taken relative to its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.input {
            Input::Scalar { path, .. } | Input::Field { path } if path.is_relative() => {
                *path = base.join(&*path);
            }
            _ => {}
        }
        if let Some(dir) = &mut cfg.output.dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    /// Build from an optional file plus overrides; at least one must name an input.
    pub fn resolve(path: Option<&Path>, ov: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match (path, ov.model) {
            (Some(p), _) => Self::load(p)?,
            (None, Some(kind)) => Self::synthetic(kind),
            (None, None) => bail!("an input is required: pass --config or --model"),
        };
        if let Some(kind) = ov.model {
            match &mut cfg.input {
                Input::Synthetic { model } if model.kind != kind => {
                    *model = ModelConfig {
                        kind,
                        ..ModelConfig::new(kind)
                    }
                }
                Input::Synthetic { .. } => {}
                _ => cfg.input = Input::Synthetic { model: ModelConfig::new(kind) },
            }
        }
        if let Input::Synthetic { model } = &mut cfg.input {
            if let Some(n) = ov.steps {
                model.n_steps = n;
            }
            if let Some(seed) = ov.seed {
                model.seed = seed;
            }
            if let Some(drift) = ov.drift {
                model.drift = drift;
            }
            model.validate().context("validating model configuration")?;
            model.x0 = Some(model.resolved_x0());
        } else if ov.steps.is_some() || ov.seed.is_some() || ov.drift.is_some() {
            bail!("--steps, --seed and --drift only apply to synthetic input");
        }

        let d = Params::defaults_for(&cfg.input);
        cfg.embedding.q = ov.q.or(cfg.embedding.q).or(Some(d.q));
        cfg.embedding.lag = ov.lag.or(cfg.embedding.lag).or(Some(d.lag));
        cfg.operator.step = ov.step.or(cfg.operator.step).or(Some(d.step));
        cfg.operator.knn = ov.knn.or(cfg.operator.knn).or(Some(d.knn));
        cfg.operator.modes = ov.modes.or(cfg.operator.modes).or(Some(d.modes));
        if let Some(out) = &ov.out {
            cfg.output.dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Params {
        Params {
            q: self.embedding.q.unwrap_or(1),
            lag: self.embedding.lag.unwrap_or(1),
            step: self.operator.step.unwrap_or(1),
            knn: self.operator.knn.unwrap_or(1),
            modes: self.operator.modes.unwrap_or(DEFAULT_MODES),
        }
    }

    fn validate(&self) -> anyhow::Result<()> {
        let p = self.params();
        for (name, v) in [("Q", p.q), ("lag", p.lag), ("step", p.step), ("knn", p.knn), ("modes", p.modes)] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if let Input::Scalar { path, .. } | Input::Field { path } = &self.input {
            if !path.is_file() {
                bail!("input file {} does not exist", path.display());
            }
        }
        if let Some(dt) = self.preprocess.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bail!("preprocess.dt must be positive, got {dt}");
            }
        }
        if let Input::Synthetic { model } = &self.input {
            check_span(p, model.n_steps)?;
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// The embedding span plus the forward step must leave at least one operator row.
pub fn check_span(p: Params, len: usize) -> anyhow::Result<()> {
    let span = (p.q - 1) * p.lag + p.step;
    if span >= len {
        bail!(
            "stage embed: (Q-1)*lag + step = ({}-1)*{} + {} = {span} must be below the series length {len}",
            p.q,
            p.lag,
            p.step
        );
    }
    Ok(())
}
