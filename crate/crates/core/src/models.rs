//! Idealized nonautonomous models that produce scalar observation series.
//!
//! * **M**: helical drift on a cylinder, observed as `x + cos θ` (drift in the mean).
//! * **A**: same dynamics observed as `(a + x) cos θ` (drift in the amplitude).
//! * **F**: a metastable regime coordinate `x` selects the rotation rate of `θ`; observed as `cos θ`.
//! * **F′**: two phases always rotate; the regime coordinate selects which one is observed.
//!
//! All angles are radians. Phases accumulate in ℝ and are only reduced mod 2π inside
//! observation maps.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{fmt_num, TimeSeries};

/// Which model generates the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    M,
    A,
    F,
    #[serde(rename = "Fprime")]
    FPrime,
}

impl ModelKind {
    pub fn is_switching(self) -> bool {
        matches!(self, ModelKind::F | ModelKind::FPrime)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::M => "M",
            ModelKind::A => "A",
            ModelKind::F => "F",
            ModelKind::FPrime => "Fprime",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" => Ok(ModelKind::M),
            "A" | "a" => Ok(ModelKind::A),
            "F" | "f" => Ok(ModelKind::F),
            "Fprime" | "fprime" | "F'" | "F′" => Ok(ModelKind::FPrime),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind {other:?} (expected M, A, F or Fprime)"
            ))),
        }
    }
}

/// Per-step drift `d(t)` of the axial coordinate in models M and A.
///
/// The presets describe the shape of the resulting mean `x_t` and scale with the run length:
/// `Linear` raises `x` steadily by [`DriftLaw::LINEAR_RISE`] over the run, `Quadratic` rises
/// to [`DriftLaw::QUADRATIC_PEAK`] at 60% of the run and falls back afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DriftLaw {
    Linear,
    Quadratic,
    /// `d(t) = d0 + d1 t + d2 t²`.
    Coefficients { d0: f64, d1: f64, d2: f64 },
}

impl DriftLaw {
    pub const LINEAR_RISE: f64 = 4.0;
    pub const QUADRATIC_PEAK: f64 = 3.0;
    const QUADRATIC_PEAK_AT: f64 = 0.6;

    /// Polynomial coefficients `(d0, d1, d2)` for a run of `n_steps`.
    pub fn coefficients(&self, n_steps: usize) -> [f64; 3] {
        let n = n_steps.max(1) as f64;
        match *self {
            DriftLaw::Linear => [Self::LINEAR_RISE / n, 0.0, 0.0],
            DriftLaw::Quadratic => {
                // x_t = A (1 - ((t - pn)/(pn))²)
                let pn = Self::QUADRATIC_PEAK_AT * n;
                let a = Self::QUADRATIC_PEAK;
                [2.0 * a / pn, -2.0 * a / (pn * pn), 0.0]
            }
            DriftLaw::Coefficients { d0, d1, d2 } => [d0, d1, d2],
        }
    }
}

impl FromStr for DriftLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(DriftLaw::Linear),
            "quadratic" => Ok(DriftLaw::Quadratic),
            other => {
                let parts: Vec<&str> = other.split(',').collect();
                if parts.len() == 3 {
                    let parse = |p: &str| {
                        p.trim().parse::<f64>().map_err(|_| {
                            Error::InvalidConfig(format!("bad drift coefficient {p:?}"))
                        })
                    };
                    Ok(DriftLaw::Coefficients {
                        d0: parse(parts[0])?,
                        d1: parse(parts[1])?,
                        d2: parse(parts[2])?,
                    })
                } else {
                    Err(Error::InvalidConfig(format!(
                        "unknown drift {other:?} (expected linear, quadratic or d0,d1,d2)"
                    )))
                }
            }
        }
    }
}

/// Parameters of one synthetic model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_steps: usize,
    /// Rotation rate (radians/step) for M and A.
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    /// Rotation rates (radians/step) for F and F′; `alpha1` is active when `x > 1/2`.
    #[serde(default = "defaults::alpha1")]
    pub alpha1: f64,
    #[serde(default = "defaults::alpha2")]
    pub alpha2: f64,
    #[serde(default = "defaults::drift")]
    pub drift: DriftLaw,
    /// Base amplitude of model A.
    #[serde(default = "defaults::amplitude")]
    pub amplitude: f64,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    /// Sharpness of the regime switch.
    #[serde(default = "defaults::sharpness")]
    pub c: f64,
    #[serde(default)]
    pub seed: u64,
    /// Initial axial/regime coordinate. For F and F′ it is drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub theta2_0: f64,
}

mod defaults {
    use std::f64::consts::TAU;

    pub fn alpha() -> f64 {
        0.1
    }
    pub fn alpha1() -> f64 {
        TAU / 40.0
    }
    pub fn alpha2() -> f64 {
        TAU / 97.3537
    }
    pub fn drift() -> super::DriftLaw {
        super::DriftLaw::Linear
    }
    pub fn amplitude() -> f64 {
        1.0
    }
    pub fn delta() -> f64 {
        7.5e-4
    }
    pub fn sharpness() -> f64 {
        40.0
    }
}

impl ModelConfig {
    /// Default run for `kind`: 1000 steps for M/A, 2000 for F/F′.
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            n_steps: if kind.is_switching() { 2000 } else { 1000 },
            alpha: defaults::alpha(),
            alpha1: defaults::alpha1(),
            alpha2: defaults::alpha2(),
            drift: defaults::drift(),
            amplitude: defaults::amplitude(),
            delta: defaults::delta(),
            c: defaults::sharpness(),
            seed: 0,
            x0: None,
            theta0: 0.0,
            theta2_0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_steps == 0 {
            return bad("n_steps must be positive".into());
        }
        let finite = [
            self.alpha,
            self.alpha1,
            self.alpha2,
            self.amplitude,
            self.delta,
            self.c,
            self.theta0,
            self.theta2_0,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("model parameters must be finite".into());
        }
        if self.kind.is_switching() {
            if !(self.delta > 0.0 && self.delta < 1.0) {
                return bad(format!("delta={} must lie in (0, 1)", self.delta));
            }
            if !(self.c > 0.0) {
                return bad(format!("c={} must be positive", self.c));
            }
            if self.alpha1 == self.alpha2 {
                return bad("alpha1 and alpha2 must differ".into());
            }
            if let Some(x0) = self.x0 {
                if !(0.0..=1.0).contains(&x0) {
                    return bad(format!("x0={x0} must lie in [0, 1]"));
                }
            }
        } else if let Some(x0) = self.x0 {
            if !x0.is_finite() {
                return bad("x0 must be finite".into());
            }
        }
        Ok(())
    }

    /// Initial coordinate actually used by [`simulate`].
    ///
    /// For F/F′ without an explicit `x0`, the seed draws `x0` uniformly from `[0, 1/2)`,
    /// so runs start in the slow (`alpha2`) regime.
    pub fn resolved_x0(&self) -> f64 {
        match self.x0 {
            Some(x0) => x0,
            None if self.kind.is_switching() => {
                ChaCha8Rng::seed_from_u64(self.seed).gen_range(0.0..0.5)
            }
            None => 0.0,
        }
    }
}

/// State of a model at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelState {
    /// Models M and A: time, axial drift coordinate, phase.
    Drift { t: usize, x: f64, theta: f64 },
    /// Model F: regime coordinate and phase.
    Switch { x: f64, theta: f64 },
    /// Model F′: regime coordinate and two phases.
    Coexist { x: f64, theta1: f64, theta2: f64 },
}

impl ModelState {
    pub fn x(&self) -> f64 {
        match *self {
            ModelState::Drift { x, .. }
            | ModelState::Switch { x, .. }
            | ModelState::Coexist { x, .. } => x,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<ModelState>,
    pub observations: Vec<f64>,
    pub config: ModelConfig,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Observations as a unit-step scalar series.
    pub fn series(&self) -> TimeSeries {
        TimeSeries::new(self.observations.clone(), 1, 1.0, 0.0)
            .expect("observations are finite")
            .with_units("step", "")
    }

    pub fn x_values(&self) -> Vec<f64> {
        self.states.iter().map(ModelState::x).collect()
    }

    /// Per-step flag for the fast (`alpha1`, `x > 1/2`) regime.
    pub fn fast_regime_mask(&self) -> Vec<bool> {
        self.states.iter().map(|s| s.x() > 0.5).collect()
    }

    /// Write `step,observation` rows.
    pub fn write_series(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.len() * 28);
        out.push_str("step,observation\n");
        for (t, h) in self.observations.iter().enumerate() {
            out.push_str(&format!("{t},{}\n", fmt_num(*h)));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Write the run-metadata sidecar (TOML): resolved config plus the drawn initial state.
    pub fn write_metadata(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Meta<'a> {
            generator: &'static str,
            version: &'static str,
            resolved_x0: f64,
            drift_coefficients: [f64; 3],
            model: &'a ModelConfig,
        }
        let meta = Meta {
            generator: "trendcycle",
            version: env!("CARGO_PKG_VERSION"),
            resolved_x0: self.config.resolved_x0(),
            drift_coefficients: self.config.drift.coefficients(self.config.n_steps),
            model: &self.config,
        };
        let text = toml::to_string_pretty(&meta)
            .map_err(|e| Error::InvalidConfig(format!("cannot serialize metadata: {e}")))?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Write series and sidecar as `<stem>.csv` and `<stem>.toml` inside `dir`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<[PathBuf; 2]> {
        let series = dir.join(format!("{stem}.csv"));
        let meta = dir.join(format!("{stem}.toml"));
        self.write_series(&series)?;
        self.write_metadata(&meta)?;
        Ok([series, meta])
    }
}

/// One step of the metastable map `f_δ` on `[0, 1]`.
///
/// The halves `[0, 1/2]` and `[1/2, 1]` are almost invariant; each step leaves the current
/// half with probability `δ` under Lebesgue measure.
pub fn tent_map_step(x: f64, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            expected: "[0, 1]",
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            expected: "(0, 1)",
        });
    }
    Ok(tent_unchecked(x, delta))
}

#[inline]
fn tent_unchecked(x: f64, delta: f64) -> f64 {
    if x < 0.25 {
        2.0 * x
    } else if x < 0.75 {
        (delta + 2.0 * (x - 0.25)).rem_euclid(1.0)
    } else {
        0.5 + 2.0 * (x - 0.75)
    }
}

/// Smooth regime indicator `w(x) = (1 + tanh(c (x - 1/2))) / 2`.
pub fn switching_weight(x: f64, c: f64) -> f64 {
    0.5 * (1.0 + (c * (x - 0.5)).tanh())
}

/// Run a model for `config.n_steps` steps, returning states and observations.
///
/// `states[t]` is the state that produced `observations[t]`; `states[0]` is the initial state.
pub fn simulate(config: &ModelConfig) -> Result<Trajectory> {
    config.validate()?;
    let n = config.n_steps;
    let x0 = config.resolved_x0();
    let mut states = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);

    match config.kind {
        ModelKind::M | ModelKind::A => {
            let [d0, d1, d2] = config.drift.coefficients(n);
            let (mut x, mut theta) = (x0, config.theta0);
            for t in 0..n {
                let phase = theta.rem_euclid(TAU).cos();
                let h = if config.kind == ModelKind::M {
                    x + phase
                } else {
                    (config.amplitude + x) * phase
                };
                states.push(ModelState::Drift { t, x, theta });
                observations.push(h);
                let tf = t as f64;
                x += d0 + d1 * tf + d2 * tf * tf;
                theta += config.alpha;
            }
        }
        ModelKind::F => {
            let (mut x, mut theta) = (x0, config.theta0);
            for _ in 0..n {
                states.push(ModelState::Switch { x, theta });
                observations.push(theta.rem_euclid(TAU).cos());
                let w = switching_weight(x, config.c);
                theta += w * config.alpha1 + (1.0 - w) * config.alpha2;
                x = tent_unchecked(x, config.delta);
            }
        }
        ModelKind::FPrime => {
            let (mut x, mut t1, mut t2) = (x0, config.theta0, config.theta2_0);
            for _ in 0..n {
                let w = switching_weight(x, config.c);
                states.push(ModelState::Coexist {
                    x,
                    theta1: t1,
                    theta2: t2,
                });
                observations.push(w * t1.rem_euclid(TAU).cos() + (1.0 - w) * t2.rem_euclid(TAU).cos());
                t1 += config.alpha1;
                t2 += config.alpha2;
                x = tent_unchecked(x, config.delta);
            }
        }
    }

    Ok(Trajectory {
        states,
        observations,
        config: config.clone(),
    })
}

/// Rotation period in steps for a rate in radians/step.
pub fn rotation_period(alpha: f64) -> f64 {
    2.0 * PI / alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn tent_map_branches() {
        assert_abs_diff_eq!(tent_map_step(0.1, 0.1).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(tent_map_step(0.5, 0.1).unwrap(), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(tent_map_step(0.8, 0.1).unwrap(), 0.6, epsilon = 1e-15);
        // x = 1 goes through the third branch
        assert_eq!(tent_map_step(1.0, 0.1).unwrap(), 1.0);
        // wrap-around in the middle branch
        assert_abs_diff_eq!(tent_map_step(0.7, 0.2).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn tent_map_rejects_out_of_domain() {
        assert!(matches!(tent_map_step(1.2, 0.1), Err(Error::Domain { name: "x", .. })));
        assert!(matches!(tent_map_step(-0.01, 0.1), Err(Error::Domain { .. })));
        assert!(tent_map_step(0.3, 0.0).is_err());
    }

    #[test]
    fn switching_weight_values() {
        assert_eq!(switching_weight(0.5, 40.0), 0.5);
        assert_abs_diff_eq!(switching_weight(1.0, 40.0), 1.0, epsilon = 1e-15);
        // (1 + tanh(-10)) / 2, evaluated independently in extended precision
        let expected = 2.061_153_636_656_598_6e-9;
        assert!((switching_weight(0.25, 40.0) - expected).abs() < 1e-20);
    }

    #[test]
    fn initial_observations() {
        let mut m = ModelConfig::new(ModelKind::M);
        m.drift = DriftLaw::Coefficients {
            d0: 0.0,
            d1: 0.1,
            d2: 0.0,
        };
        assert_eq!(simulate(&m).unwrap().observations[0], 1.0);

        let a = ModelConfig::new(ModelKind::A);
        assert_eq!(simulate(&a).unwrap().observations[0], 1.0);
    }

    #[test]
    fn literal_linear_increment_accumulates() {
        let mut m = ModelConfig::new(ModelKind::M);
        m.n_steps = 4;
        m.drift = DriftLaw::Coefficients {
            d0: 0.0,
            d1: 0.1,
            d2: 0.0,
        };
        let xs = simulate(&m).unwrap().x_values();
        assert_abs_diff_eq!(xs[1], 0.0);
        assert_abs_diff_eq!(xs[2], 0.1);
        assert_abs_diff_eq!(xs[3], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn drift_presets_have_documented_shape() {
        let n = 1000;
        let mut cfg = ModelConfig::new(ModelKind::M);
        let xs = simulate(&cfg).unwrap().x_values();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert_abs_diff_eq!(xs[n - 1], DriftLaw::LINEAR_RISE * (n - 1) as f64 / n as f64, epsilon = 1e-9);

        cfg.drift = DriftLaw::Quadratic;
        let xs = simulate(&cfg).unwrap().x_values();
        let (imax, xmax) = xs
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!((590..=610).contains(&imax), "peak at {imax}");
        assert!((xmax - DriftLaw::QUADRATIC_PEAK).abs() < 0.01);
        assert!(xs[n - 1] < 0.7 * xmax);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut f = ModelConfig::new(ModelKind::F);
        f.delta = 1.5;
        assert!(matches!(simulate(&f), Err(Error::InvalidConfig(_))));
        let mut f = ModelConfig::new(ModelKind::FPrime);
        f.alpha2 = f.alpha1;
        assert!(simulate(&f).is_err());
        let mut f = ModelConfig::new(ModelKind::F);
        f.x0 = Some(1.5);
        assert!(simulate(&f).is_err());
        let mut m = ModelConfig::new(ModelKind::M);
        m.n_steps = 0;
        assert!(simulate(&m).is_err());
    }

    #[test]
    fn switching_runs_stay_in_unit_interval() {
        for kind in [ModelKind::F, ModelKind::FPrime] {
            let mut cfg = ModelConfig::new(kind);
            cfg.delta = 0.01;
            let traj = simulate(&cfg).unwrap();
            assert_eq!(traj.len(), cfg.n_steps);
            assert!(traj.x_values().iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn fprime_observes_weighted_phases() {
        let mut cfg = ModelConfig::new(ModelKind::FPrime);
        cfg.x0 = Some(0.1);
        let traj = simulate(&cfg).unwrap();
        for (s, h) in traj.states.iter().zip(&traj.observations).take(50) {
            if let ModelState::Coexist { x, theta1, theta2 } = *s {
                let w = switching_weight(x, cfg.c);
                assert_abs_diff_eq!(*h, w * theta1.cos() + (1.0 - w) * theta2.cos(), epsilon = 1e-12);
            } else {
                panic!("wrong state variant");
            }
        }
    }

    #[test]
    fn lebesgue_measure_is_invariant() {
        // Push a uniform ensemble forward one step; long double-precision orbits of a
        // doubling map eventually cycle, so a single orbit is not a fair sample.
        let delta = 0.1;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut bins = [0usize; 20];
        let n = 1_000_000;
        for _ in 0..n {
            let x = tent_map_step(rng.gen::<f64>(), delta).unwrap();
            bins[((x * 20.0) as usize).min(19)] += 1;
        }
        let expected = n as f64 / 20.0;
        for (k, &b) in bins.iter().enumerate() {
            let rel = (b as f64 - expected).abs() / expected;
            assert!(rel < 0.03, "bin {k}: {b} vs {expected} ({rel:.4})");
        }
    }

    #[test]
    fn crossing_fraction_matches_delta() {
        let delta = 0.01;
        let n = 1_000_000;
        let mut crossings = 0usize;
        let mut total = 0usize;
        for seed in 0..4u64 {
            let mut x: f64 = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..1.0);
            for _ in 0..n / 4 {
                let next = tent_map_step(x, delta).unwrap();
                if (x < 0.5) != (next < 0.5) {
                    crossings += 1;
                }
                total += 1;
                x = next;
            }
        }
        let frac = crossings as f64 / total as f64;
        // binomial standard error ~1e-4
        assert!((frac - delta).abs() < 5e-4, "crossing fraction {frac}");
    }

    #[test]
    fn mean_residence_time_is_inverse_delta() {
        // Monte-Carlo over 100 seeds: mean length of completed residences ≈ 1/δ ± 30%.
        let delta = 7.5e-4;
        let mut lengths = Vec::new();
        for seed in 0..100u64 {
            let mut x: f64 = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..0.5);
            let mut side = x < 0.5;
            let mut run = 0usize;
            let mut first = true;
            for _ in 0..20_000 {
                x = tent_map_step(x, delta).unwrap();
                run += 1;
                if (x < 0.5) != side {
                    if !first {
                        lengths.push(run);
                    }
                    first = false;
                    run = 0;
                    side = x < 0.5;
                }
            }
        }
        assert!(lengths.len() > 100, "only {} completed residences", lengths.len());
        let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
        let target = 1.0 / delta;
        assert!((mean - target).abs() < 0.3 * target, "mean residence {mean}");
    }

    #[test]
    fn model_f_phase_increments_follow_regime() {
        let cfg = ModelConfig {
            delta: 0.02,
            n_steps: 5000,
            seed: 3,
            ..ModelConfig::new(ModelKind::F)
        };
        let traj = simulate(&cfg).unwrap();
        let span = (cfg.alpha1 - cfg.alpha2).abs();
        // outside (0.45, 0.55), w is within (1 - tanh(0.05 c))/2 of 0 or 1
        let tol = span * (1.0 - (0.05 * cfg.c).tanh()) / 2.0 + 1e-12;
        let mut seen = [false; 2];
        for pair in traj.states.windows(2) {
            let (ModelState::Switch { x, theta }, ModelState::Switch { theta: next, .. }) =
                (pair[0], pair[1])
            else {
                panic!("wrong state variant");
            };
            if x > 0.45 && x < 0.55 {
                continue;
            }
            let inc = next - theta;
            let expected = if x > 0.5 { cfg.alpha1 } else { cfg.alpha2 };
            assert!((inc - expected).abs() <= tol, "x={x} inc={inc}");
            seen[(x > 0.5) as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn seeded_x0_starts_in_slow_regime() {
        for seed in 0..20 {
            let cfg = ModelConfig {
                seed,
                ..ModelConfig::new(ModelKind::F)
            };
            let x0 = cfg.resolved_x0();
            assert!((0.0..0.5).contains(&x0));
        }
    }

    #[test]
    fn export_writes_series_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ModelConfig::new(ModelKind::F);
        cfg.n_steps = 10;
        cfg.seed = 7;
        let traj = simulate(&cfg).unwrap();
        let [series, meta] = traj.export(dir.path(), "run").unwrap();
        let text = std::fs::read_to_string(series).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with("step,observation\n0,"));
        let meta: toml::Value = toml::from_str(&std::fs::read_to_string(meta).unwrap()).unwrap();
        assert_eq!(meta["model"]["seed"].as_integer(), Some(7));
        assert_eq!(meta["model"]["kind"].as_str(), Some("F"));
        let back: ModelConfig = meta["model"].clone().try_into().unwrap();
        assert_eq!(back, cfg);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn simulation_is_reproducible(seed in any::<u64>(), kind in 0usize..4) {
            let kind = [ModelKind::M, ModelKind::A, ModelKind::F, ModelKind::FPrime][kind];
            let cfg = ModelConfig { seed, n_steps: 300, ..ModelConfig::new(kind) };
            let a = simulate(&cfg).unwrap();
            let b = simulate(&cfg).unwrap();
            let bits = |t: &Trajectory| t.observations.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a), bits(&b));
            prop_assert_eq!(a.states, b.states);
        }

        #[test]
        fn tent_map_stays_in_unit_interval(x in 0.0f64..=1.0, delta in 1e-6f64..0.999) {
            let y = tent_map_step(x, delta).unwrap();
            prop_assert!((0.0..=1.0).contains(&y));
        }

        #[test]
        fn switching_weight_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.1f64..100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(switching_weight(lo, c) <= switching_weight(hi, c));
        }
    }
}
