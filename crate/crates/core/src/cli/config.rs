//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "name": "fig1",
//!   "sweep": "pi_sweep",
//!   "mu": [1.5, 2, 4],
//!   "sigma": [[3, 0, 0], [0, 3, 0], [0, 0, 3]],
//!   "pi_grid": {"start": 0.02, "stop": 0.98, "step": 0.001},
//!   "eps_grid": [1, 1.5, 2, 2.5],
//!   "out_dir": "out",
//!   "svg": true,
//!   "seed": 0,
//!   "tol": 1e-10
//! }
//! ```
//!
//! Grids are either explicit lists or `{start, stop, step}` ranges. Which of
//! `pi_plus`/`pi_grid`/`epsilon`/`eps_grid` are required depends on the sweep;
//! see [`ExperimentConfig::resolve`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearloss::{LinearLossConstraint, NormOrder};
use crate::model::GaussianMixture;
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Risks and gap against the class prior, one series per budget.
    PiSweep,
    /// Risks and gap against the budget, one series per prior.
    EpsSweep,
    /// Regime labels and numerically located extrema per budget.
    Regime,
    /// Exact gap next to its upper and lower bounds.
    Bounds,
    /// Linear-loss training agreement frequencies against sample size.
    FiniteSample,
    /// Active-set changes of z* along the budget.
    Breakpoints,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::PiSweep => "pi_sweep",
            SweepKind::EpsSweep => "eps_sweep",
            SweepKind::Regime => "regime",
            SweepKind::Bounds => "bounds",
            SweepKind::FiniteSample => "finite_sample",
            SweepKind::Breakpoints => "breakpoints",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    /// Grid values; ranges include `stop` when it lies on the lattice.
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
                    return Err(Error::Config(format!(
                        "invalid range start={start} stop={stop} step={step}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                // Snapped to 12 significant digits so 0.05-steps print as 2.05, not 2.0500000000000003.
                (0..=count)
                    .map(|k| {
                        let x = start + step * k as f64;
                        format!("{x:.11e}").parse::<f64>().unwrap_or(x)
                    })
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid values must be finite".into()));
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        Ok(v)
    }
}

/// Settings for the linear-loss training experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteSampleSpec {
    /// `"1"` or `"inf"`.
    pub p: String,
    #[serde(rename = "W", default = "one")]
    pub budget: f64,
    /// Coordinates are clipped to `[−clip, clip]`.
    pub clip: f64,
    pub n_grid: Grid,
    pub trials: usize,
}

fn one() -> f64 {
    1.0
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_tol() -> f64 {
    crate::boxqp::DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub sweep: SweepKind,
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Grid>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_true")]
    pub svg: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_sample: Option<FiniteSampleSpec>,
}

/// A validated config with grids expanded.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub template: GaussianMixture,
    /// Prior values: the x-axis for `pi_sweep`/`regime`, series otherwise.
    pub priors: Vec<f64>,
    /// Budget values: series for `pi_sweep`, the x-axis otherwise.
    pub budgets: Vec<f64>,
    pub finite_sample: Option<ResolvedFiniteSample>,
}

#[derive(Debug, Clone)]
pub struct ResolvedFiniteSample {
    pub constraint: LinearLossConstraint,
    pub clip: f64,
    pub sizes: Vec<usize>,
    pub trials: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn grid_or_single(grid: &Option<Grid>, single: Option<f64>) -> Result<Option<Vec<f64>>> {
        match (grid, single) {
            (Some(g), _) => g.values().map(Some),
            (None, Some(v)) => Ok(Some(vec![v])),
            (None, None) => Ok(None),
        }
    }

    /// Checks field combinations for the sweep and expands grids.
    pub fn resolve(&self) -> Result<Resolved> {
        let need = |what: &str| Error::Config(format!("sweep '{}' requires {what}", self.sweep.as_str()));
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid experiment name '{}'", self.name)));
        }
        let base_pi = self.pi_plus.unwrap_or(0.5);
        let template = GaussianMixture::new(self.mu.clone(), self.sigma.clone(), base_pi)?;
        let priors = Self::grid_or_single(&self.pi_grid, self.pi_plus)?;
        let budgets = Self::grid_or_single(&self.eps_grid, self.epsilon)?;
        if let Some(p) = &priors {
            if p.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                return Err(Error::Config("prior values must lie in (0, 1)".into()));
            }
        }
        if let Some(e) = &budgets {
            if e.iter().any(|x| *x < 0.0) {
                return Err(Error::Config("budget values must be nonnegative".into()));
            }
        }
        let (priors, budgets) = match self.sweep {
            SweepKind::PiSweep | SweepKind::Regime => {
                if self.pi_grid.is_none() {
                    return Err(need("pi_grid"));
                }
                (priors.unwrap_or_default(), budgets.ok_or_else(|| need("epsilon or eps_grid"))?)
            }
            SweepKind::EpsSweep => (
                priors.unwrap_or_else(|| vec![0.5]),
                budgets.ok_or_else(|| need("eps_grid"))?,
            ),
            SweepKind::Bounds | SweepKind::Breakpoints => {
                if self.eps_grid.is_none() {
                    return Err(need("eps_grid"));
                }
                (vec![base_pi], budgets.unwrap_or_default())
            }
            SweepKind::FiniteSample => (
                vec![base_pi],
                vec![self.epsilon.ok_or_else(|| need("epsilon"))?],
            ),
        };
        let finite_sample = match (&self.finite_sample, self.sweep) {
            (Some(spec), SweepKind::FiniteSample) => Some(resolve_finite(spec)?),
            (None, SweepKind::FiniteSample) => return Err(need("a finite_sample block")),
            _ => None,
        };
        Ok(Resolved {
            template,
            priors,
            budgets,
            finite_sample,
        })
    }

    /// Applies command-line overrides. Comma-separated `pi`/`eps` lists
    /// become grids; a single value also sets the scalar field.
    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(mu) = &o.mu {
            self.mu = mu.clone();
        }
        if let Some(sigma) = &o.sigma {
            self.sigma = sigma.clone();
        }
        if let Some(pi) = &o.pi {
            self.pi_grid = Some(Grid::List(pi.clone()));
            self.pi_plus = (pi.len() == 1).then(|| pi[0]);
        }
        if let Some(eps) = &o.eps {
            self.eps_grid = Some(Grid::List(eps.clone()));
            self.epsilon = (eps.len() == 1).then(|| eps[0]);
        }
        if let Some(tol) = o.tol {
            self.tol = tol;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = out.clone();
        }
        if o.no_svg {
            self.svg = false;
        }
    }
}

fn resolve_finite(spec: &FiniteSampleSpec) -> Result<ResolvedFiniteSample> {
    let p: NormOrder = spec.p.parse().map_err(|e| Error::Config(format!("finite_sample.p: {e}")))?;
    if matches!(p, NormOrder::Lp(_)) {
        return Err(Error::Config("finite_sample.p must be 1 or inf".into()));
    }
    let constraint = LinearLossConstraint::new(spec.budget, p).map_err(|e| Error::Config(e.to_string()))?;
    if !(spec.clip > 0.0 && spec.clip.is_finite()) {
        return Err(Error::Config("finite_sample.clip must be positive".into()));
    }
    if spec.trials == 0 {
        return Err(Error::Config("finite_sample.trials must be at least 1".into()));
    }
    let sizes = spec
        .n_grid
        .values()?
        .into_iter()
        .map(|n| {
            if n >= 1.0 && n.fract() == 0.0 {
                Ok(n as usize)
            } else {
                Err(Error::Config(format!("sample sizes must be positive integers, got {n}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResolvedFiniteSample {
        constraint,
        clip: spec.clip,
        sizes,
        trials: spec.trials,
    })
}

/// Command-line values that take precedence over a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mu: Option<Vec<f64>>,
    pub sigma: Option<Matrix>,
    pub pi: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub no_svg: bool,
}

/// Parses `"1.5,2,4"`.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    let t = s.trim();
    if t.starts_with('[') {
        return serde_json::from_str(t).map_err(|e| Error::Config(format!("cannot parse vector '{s}': {e}")));
    }
    t.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse number '{x}' in '{s}'")))
        })
        .collect()
}

/// Parses `"3,0;0,3"` (rows split by `;`), a JSON row array, or `"<s>I<d>"`
/// for a scaled identity such as `3I3`.
pub fn parse_matrix(s: &str) -> Result<Matrix> {
    let t = s.trim();
    if t.starts_with('[') {
        let rows: Vec<Vec<f64>> =
            serde_json::from_str(t).map_err(|e| Error::Config(format!("cannot parse matrix '{s}': {e}")))?;
        return Matrix::from_rows(rows);
    }
    if let Some((scale, dim)) = t.split_once('I') {
        let scale = if scale.is_empty() { 1.0 } else { scale.parse::<f64>().map_err(|_| Error::Config(format!("bad scale in '{s}'")))? };
        let dim: usize = dim.parse().map_err(|_| Error::Config(format!("bad dimension in '{s}'")))?;
        return Ok(Matrix::scaled_identity(dim, scale));
    }
    let rows = t.split(';').map(parse_vector).collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(rows)
}
