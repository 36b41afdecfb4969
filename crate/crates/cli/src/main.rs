//! `trendcycle`: synthesize model series, analyze them with a kernel transfer operator, and
//! reconstruct observables from selected eigenmodes.
//!
//! Exit status is 0 on success, 2 for invalid input or configuration, 3 when a numerical
//! stage fails (zero bandwidth, isolated kernel row, unconverged eigensolver).

mod config;
mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use trendcycle::models::{DriftLaw, ModelKind};
use trendcycle::series::fmt_num;
use trendcycle::spectral;

use config::{Input, Overrides, RunConfig, RunInfo};
use pipeline::write_text;

#[derive(Parser)]
#[command(name = "trendcycle", version, about = "Trend and cycle extraction via transfer-operator eigenfunctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a model and write its series and metadata.
    Synth(Common),
    /// Build the operator and write eigenvalues, mode series and the mode report.
    Analyze(Common),
    /// Project a target series onto selected modes.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// 1-based mode indices, e.g. `2,3`. Missing conjugate partners are added.
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
        /// Scalar series to project instead of the analyzed input; must match its length.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Re-emit the period table from a previous `analyze` output directory.
    Periods {
        #[arg(long, env = "TRENDCYCLE_OUT", default_value = "out")]
        out: PathBuf,
        /// Override the forward step recorded in the run.
        #[arg(long)]
        step: Option<usize>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic model: M, A, F or Fprime.
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Drift law for M and A: linear, quadratic, or `d0,d1,d2`.
    #[arg(long)]
    drift: Option<DriftLaw>,
    /// Number of delays.
    #[arg(long = "Q")]
    q: Option<usize>,
    #[arg(long)]
    lag: Option<usize>,
    /// Forward step of the operator, in samples.
    #[arg(long)]
    step: Option<usize>,
    /// Neighbor rank that sets each bandwidth.
    #[arg(long)]
    knn: Option<usize>,
    /// Number of eigenpairs to keep.
    #[arg(long)]
    modes: Option<usize>,
    /// Output directory.
    #[arg(long, env = "TRENDCYCLE_OUT")]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let ov = Overrides {
            model: self.model,
            steps: self.steps,
            seed: self.seed,
            drift: self.drift,
            q: self.q,
            lag: self.lag,
            step: self.step,
            knn: self.knn,
            modes: self.modes,
            out: self.out.clone(),
        };
        RunConfig::resolve(self.config.as_deref(), &ov)
    }
}

fn output_dir(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn synth(common: &Common) -> anyhow::Result<()> {
    let cfg = common.resolve()?;
    let Input::Synthetic { model } = &cfg.input else {
        bail!("synth needs synthetic input (--model or [input] source = \"synthetic\")");
    };
    let traj = trendcycle::models::simulate(model).context("stage synth")?;
    let dir = output_dir(&cfg)?;
    let files = traj
        .export(&dir, &format!("model_{}", model.kind))
        .context("stage export")?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

/// Run the pipeline and write the resolved config sidecar; shared by analyze and reconstruct.
fn run_analysis(cfg: &mut RunConfig, dir: &Path) -> anyhow::Result<(pipeline::Loaded, pipeline::Analysis)> {
    let loaded = pipeline::load(cfg)?;
    let analysis = pipeline::analyze(&loaded.input, cfg.params())?;
    let dec = &analysis.decomposition;
    cfg.run = Some(RunInfo {
        version: env!("CARGO_PKG_VERSION").to_string(),
        dt: loaded.input.dt,
        t0: loaded.input.t0,
        series_length: loaded.input.len(),
        offset: dec.offset,
    });
    write_text(&dir.join("resolved_config.toml"), &cfg.to_toml()?)?;
    Ok((loaded, analysis))
}

fn analyze(common: &Common) -> anyhow::Result<()> {
    let mut cfg = common.resolve()?;
    let dir = output_dir(&cfg)?;
    let (_, analysis) = run_analysis(&mut cfg, &dir)?;
    let dec = &analysis.decomposition;
    dec.write_eigenvalue_table(&dir.join("eigenvalues.csv"))?;
    let all: Vec<usize> = (0..dec.len()).collect();
    dec.write_mode_series(&dir.join("modes.csv"), &all, false)?;
    spectral::write_mode_table(&dir.join("mode_report.csv"), &analysis.reports)?;
    if cfg.output.write_matrix {
        analysis.operator.write_matrix(&dir.join("operator.csv"))?;
    }
    if cfg.output.write_embedding {
        analysis.embedded.write(&dir.join("embedding.csv"))?;
    }
    if !dec.ill_conditioned().is_empty() {
        log::warn!("ill-conditioned modes (1-based): {:?}", dec.ill_conditioned().iter().map(|j| j + 1).collect::<Vec<_>>());
    }
    print!("{}", spectral::mode_table(&analysis.reports));
    Ok(())
}

fn reconstruct(common: &Common, indices: &[usize], target: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg = common.resolve()?;
    let dir = output_dir(&cfg)?;
    let (loaded, analysis) = run_analysis(&mut cfg, &dir)?;
    let dec = &analysis.decomposition;

    let zero_based = indices
        .iter()
        .map(|&i| {
            if i == 0 || i > dec.len() {
                Err(trendcycle::Error::UnknownMode {
                    index: i,
                    available: dec.len(),
                })
            } else {
                Ok(i - 1)
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .context("stage reconstruct")?;
    let (closed, added) = spectral::close_under_conjugation(dec, &zero_based)?;
    if !added.is_empty() {
        log::warn!(
            "index set not closed under conjugation; adding partner mode(s) {:?}",
            added.iter().map(|j| j + 1).collect::<Vec<_>>()
        );
    }

    let full = match target {
        Some(path) => {
            let rec = trendcycle::data::load_scalar_record(path, Default::default())
                .context("stage reconstruct: loading target")?;
            if rec.len() != loaded.input.len() {
                bail!(
                    "stage reconstruct: target has {} samples, analyzed series has {}",
                    rec.len(),
                    loaded.input.len()
                );
            }
            trendcycle::TimeSeries::new(rec.values().to_vec(), 1, loaded.input.dt, loaded.input.t0)?
        }
        None => loaded.target.clone(),
    };
    let aligned = spectral::align(&full, dec).context("stage reconstruct")?;
    let proj = spectral::project(dec, &closed, &aligned).context("stage reconstruct")?;
    proj.write(&dir.join("projection.csv"))?;
    if let Some(mask) = &loaded.mask {
        let mut out = String::new();
        for t in 0..proj.len() {
            let row = &proj.values[t * proj.dim..(t + 1) * proj.dim];
            let grid = mask.scatter_back(row, f64::NAN)?;
            let line: Vec<String> = grid.iter().map(|v| fmt_num(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        write_text(&dir.join("projection_grid.csv"), &out)?;
    }
    println!(
        "projected onto modes {:?} ({} samples, max discarded imaginary part {:.3e})",
        closed.iter().map(|j| j + 1).collect::<Vec<_>>(),
        proj.len(),
        proj.max_imag
    );
    Ok(())
}

fn periods(dir: &Path, step: Option<usize>) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&dir.join("resolved_config.toml"))?;
    let info = cfg.run.as_ref().context("resolved config has no [run] section")?;
    let step = step.or(cfg.operator.step).context("no forward step recorded")?;
    let path = dir.join("eigenvalues.csv");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = String::from("index,re,im,modulus,period\n");
    for (n, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |k: usize| -> anyhow::Result<f64> {
            cols.get(k)
                .and_then(|c| c.parse().ok())
                .with_context(|| format!("{}:{}: malformed row", path.display(), n + 1))
        };
        let lambda = trendcycle::spectral::Complex64::new(parse(1)?, parse(2)?);
        let period = spectral::eigenperiod(lambda, step, info.dt).unwrap_or(f64::INFINITY);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            cols[0],
            fmt_num(lambda.re),
            fmt_num(lambda.im),
            fmt_num(lambda.norm()),
            fmt_num(period)
        ));
    }
    write_text(&dir.join("periods.csv"), &out)?;
    print!("{out}");
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<trendcycle::Error>()) {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(c) => synth(c),
        Command::Analyze(c) => analyze(c),
        Command::Reconstruct {
            common,
            indices,
            target,
        } => reconstruct(common, indices, target.as_deref()),
        Command::Periods { out, step } => periods(out, *step),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
