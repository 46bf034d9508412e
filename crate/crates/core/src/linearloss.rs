//! Linear loss `ℓ(x, y, w) = −y⟨w, x⟩` under an ℓp weight budget: closed-form
//! optima, training from samples, and concentration bounds for the event
//! that standard and robust training agree.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm_inf, norm_l1, sign};

/// Norm order of the weight budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    L1,
    /// Finite `p > 1`.
    Lp(f64),
    LInf,
}

impl NormOrder {
    pub fn new(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(NormOrder::L1)
        } else if p == f64::INFINITY {
            Ok(NormOrder::LInf)
        } else if p.is_finite() && p > 1.0 {
            Ok(NormOrder::Lp(p))
        } else {
            Err(Error::Domain(format!("norm order must be 1, a finite p > 1 or inf, got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NormOrder::L1 => 1.0,
            NormOrder::Lp(p) => p,
            NormOrder::LInf => f64::INFINITY,
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormOrder::L1 => norm_l1(v),
            NormOrder::LInf => norm_inf(v),
            NormOrder::Lp(p) => v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::LInf => write!(f, "inf"),
            other => write!(f, "{}", other.value()),
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(NormOrder::LInf),
            t => {
                let p: f64 = t
                    .parse()
                    .map_err(|_| Error::Domain(format!("cannot parse norm order '{s}'")))?;
                NormOrder::new(p)
            }
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// The feasible set `{w : ‖w‖_p ≤ W}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearLossConstraint {
    #[serde(rename = "W")]
    pub budget: f64,
    pub p: NormOrder,
}

impl LinearLossConstraint {
    pub fn new(budget: f64, p: NormOrder) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::Domain(format!("weight budget W must be positive, got {budget}")));
        }
        Ok(Self { budget, p })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    /// `+1` or `−1`.
    pub y: i8,
}

/// Training set with its signed empirical mean `μ̂ = (1/n)Σ yⁱxⁱ`.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub points: Vec<LabeledPoint>,
    pub mu_hat: Vec<f64>,
    pub n: usize,
    /// Largest observed `‖x‖∞`.
    #[serde(rename = "A")]
    pub sup_norm: f64,
}

impl SampleSet {
    pub fn from_points(points: Vec<LabeledPoint>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Domain("sample set is empty".into()));
        };
        let dim = first.x.len();
        let mut sum = vec![0.0; dim];
        let mut sup_norm = 0.0f64;
        for p in &points {
            if p.x.len() != dim {
                return Err(Error::Shape(format!(
                    "sample dimension {} differs from {dim}",
                    p.x.len()
                )));
            }
            if p.y != 1 && p.y != -1 {
                return Err(Error::Domain(format!("labels must be +1 or -1, got {}", p.y)));
            }
            let y = f64::from(p.y);
            for (s, x) in sum.iter_mut().zip(&p.x) {
                *s += y * x;
            }
            sup_norm = sup_norm.max(norm_inf(&p.x));
        }
        let n = points.len();
        let mu_hat = sum.into_iter().map(|s| s / n as f64).collect();
        Ok(Self {
            points,
            mu_hat,
            n,
            sup_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu_hat.len()
    }
}

/// Index of the first coordinate attaining `‖μ‖∞`.
fn first_argmax_abs(mu: &[f64]) -> usize {
    let mut best = 0;
    for (i, m) in mu.iter().enumerate() {
        if m.abs() > mu[best].abs() {
            best = i;
        }
    }
    best
}

/// Minimizer of `−⟨w, μ⟩ + ε‖w‖₁` over `‖w‖_p ≤ W`; `ε = 0` gives the
/// standard optimum. Among several maximizers of `|μ_j|` for `p = 1`, the
/// lowest index is chosen.
pub fn closed_form_weights(mu: &[f64], constraint: &LinearLossConstraint, epsilon: f64) -> Vec<f64> {
    let big_w = constraint.budget;
    let d = mu.len();
    let max = norm_inf(mu);
    match constraint.p {
        NormOrder::L1 => {
            let mut w = vec![0.0; d];
            if d > 0 && max >= epsilon {
                let j = first_argmax_abs(mu);
                w[j] = big_w * sign(mu[j]);
            }
            w
        }
        NormOrder::Lp(p) => {
            if max <= epsilon {
                return vec![0.0; d];
            }
            let eta: Vec<f64> = mu
                .iter()
                .map(|m| {
                    if m.abs() >= epsilon {
                        (m.abs() - epsilon).powf(1.0 / (p - 1.0)) * sign(*m)
                    } else {
                        0.0
                    }
                })
                .collect();
            let norm = NormOrder::Lp(p).norm(&eta);
            eta.into_iter().map(|e| big_w * e / norm).collect()
        }
        NormOrder::LInf => mu
            .iter()
            .map(|m| if m.abs() >= epsilon { big_w * sign(*m) } else { 0.0 })
            .collect(),
    }
}

/// Expected adversarial linear loss `−⟨w, μ⟩ + ε‖w‖₁`.
pub fn linear_loss_risk(w: &[f64], mu: &[f64], epsilon: f64) -> Result<f64> {
    if w.len() != mu.len() {
        return Err(Error::Shape(format!(
            "weights have dimension {} but mu has {}",
            w.len(),
            mu.len()
        )));
    }
    Ok(-dot(w, mu) + epsilon * norm_l1(w))
}

/// Plug-in training: the closed form evaluated at `μ̂`.
pub fn train_finite_sample(
    samples: &SampleSet,
    constraint: &LinearLossConstraint,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if samples.n == 0 {
        return Err(Error::Domain("sample set is empty".into()));
    }
    Ok(closed_form_weights(&samples.mu_hat, constraint, epsilon))
}

/// Weight vectors compared entrywise at `1e-12`.
pub fn weights_agree(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Which probability statement to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HoeffdingCase {
    /// `p = 1`, `‖μ‖∞ ≥ ε`: standard and robust training agree.
    P1Equal,
    /// `p = 1`, `0 < ‖μ‖∞ < ε`: the natural-loss gap equals `W‖μ‖∞`.
    P1Gap,
    /// `p = ∞`, `min|μ_i| ≥ ε`: standard and robust training agree.
    PInfEqual,
    /// `p = ∞`, `0 < |μ_j| < ε`: the natural-loss gap is at least `W|μ_j|`.
    PInfGap(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct HoeffdingReport {
    pub case: HoeffdingCase,
    /// Probability lower bound clamped to `[0, 1]`.
    pub bound: f64,
    /// The formula's value before clamping (may be negative).
    pub raw_bound: f64,
    /// `‖μ‖∞` minus the largest strictly smaller magnitude; 0 if none.
    pub r: f64,
    /// `min_j |μ_j| − ε`.
    pub tau: f64,
    /// More than one coordinate attains `‖μ‖∞`.
    pub tied_maxima: bool,
}

/// Margin between the largest magnitude and the runner-up distinct one.
pub fn margin_gap(mu: &[f64]) -> f64 {
    let max = norm_inf(mu);
    mu.iter()
        .map(|m| m.abs())
        .filter(|a| *a < max)
        .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |b| b.max(a))))
        .map_or(0.0, |second| max - second)
}

pub fn hoeffding_bound(
    mu: &[f64],
    epsilon: f64,
    n: u64,
    a: f64,
    case: HoeffdingCase,
) -> Result<HoeffdingReport> {
    if mu.is_empty() {
        return Err(Error::Domain("mu must be nonempty".into()));
    }
    if !(epsilon >= 0.0) || !(a > 0.0) || n == 0 {
        return Err(Error::Domain(format!(
            "need epsilon >= 0, A > 0 and n >= 1 (got {epsilon}, {a}, {n})"
        )));
    }
    let d = mu.len() as f64;
    let nf = n as f64;
    let two_a2 = 2.0 * a * a;
    let max = norm_inf(mu);
    let min = mu.iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
    let r = margin_gap(mu);
    let tau = min - epsilon;
    let tied_maxima = mu.iter().filter(|m| m.abs() == max).count() > 1;
    let fail = |msg: String| Err(Error::Applicability(msg));

    let raw = match case {
        HoeffdingCase::P1Equal => {
            if max < epsilon {
                return fail(format!("p1_equal requires ||mu||_inf >= epsilon ({max} < {epsilon})"));
            }
            1.0 - 2.0 * (-nf * (max - epsilon).powi(2) / two_a2).exp()
        }
        HoeffdingCase::P1Gap => {
            if !(max > 0.0 && max < epsilon) {
                return fail(format!("p1_gap requires 0 < ||mu||_inf < epsilon (got {max}, {epsilon})"));
            }
            let selection = if r > 0.0 {
                4.0 * d * (-nf * r * r / (8.0 * a * a)).exp()
            } else {
                0.0
            };
            1.0 - selection - 2.0 * d * (-nf * (epsilon - max).powi(2) / two_a2).exp()
        }
        HoeffdingCase::PInfEqual => {
            if min < epsilon {
                return fail(format!("pinf_equal requires min |mu_i| >= epsilon ({min} < {epsilon})"));
            }
            1.0 - 2.0 * d * (-nf * tau * tau / two_a2).exp()
        }
        HoeffdingCase::PInfGap(j) => {
            let Some(mj) = mu.get(j).map(|m| m.abs()) else {
                return Err(Error::Shape(format!("index {j} out of range for dimension {}", mu.len())));
            };
            if !(mj > 0.0 && mj < epsilon) {
                return fail(format!("pinf_gap requires 0 < |mu_{j}| < epsilon (got {mj}, {epsilon})"));
            }
            let m = (epsilon - mj).min(mj);
            1.0 - 2.0 * (-nf * m * m / two_a2).exp()
        }
    };
    Ok(HoeffdingReport {
        case,
        bound: raw.clamp(0.0, 1.0),
        raw_bound: raw,
        r,
        tau,
        tied_maxima,
    })
}
