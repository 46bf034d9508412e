//! Regime classification in the class prior and Θ(ε²) bounds on the
//! natural-risk gap.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::boxqp;
use crate::classifiers::{adversarial_classifier, bayes_classifier, ZERO_COORD_TOL};
use crate::error::{Error, Result};
use crate::model::{nontrivial_budget, GaussianMixture, ThreatModel};
use crate::numerics::{dot, norm_inf, norm_l1, normal_cdf, normal_pdf};
use crate::risk::natural_risk;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
/// Lower slack on `c/d² ≥ 1/2`.
const RATIO_SLACK: f64 = 1e-10;
/// Relative width of the band in which a regime label is reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-10;
/// Differences at or below this size count as flat when locating extrema.
pub const FLATNESS_BAND: f64 = 1e-12;

/// `c = 2⟨μ, Σ⁻¹(μ − εz*)⟩`, `d = 2‖μ − εz*‖_{Σ⁻¹}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeParams {
    pub c: f64,
    pub d: f64,
    pub ratio: f64,
    pub kkt_residual: f64,
}

fn require_nontrivial(mixture: &GaussianMixture, threat: &ThreatModel) -> Result<()> {
    if !nontrivial_budget(mixture, threat) {
        return Err(Error::Applicability(format!(
            "requires epsilon < ||mu||_inf ({} >= {})",
            threat.epsilon(),
            norm_inf(mixture.mu())
        )));
    }
    Ok(())
}

pub fn regime_params(mixture: &GaussianMixture, threat: &ThreatModel, tol: f64) -> Result<RegimeParams> {
    require_nontrivial(mixture, threat)?;
    let sol = boxqp::solve_zstar(mixture, threat, tol)?;
    let eps = threat.epsilon();
    let shifted: Vec<f64> = mixture
        .mu()
        .iter()
        .zip(&sol.z_star)
        .map(|(m, z)| m - eps * z)
        .collect();
    let q = mixture.sigma_inv(&shifted)?;
    let c = 2.0 * dot(mixture.mu(), &q);
    let d = 2.0 * dot(&shifted, &q).max(0.0).sqrt();
    let ratio = c / (d * d);
    if !(ratio >= 0.5 - RATIO_SLACK) {
        return Err(Error::Invariant(format!("c/d^2 = {ratio} fell below 1/2")));
    }
    Ok(RegimeParams {
        c,
        d,
        ratio,
        kkt_residual: sol.kkt_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeLabel {
    /// Single maximum at `π₊ = 1/2`.
    Standard,
    /// Local minimum at `π₊ = 1/2` flanked by two maxima.
    Surprising,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeLabel::Standard => "standard",
            RegimeLabel::Surprising => "surprising",
        })
    }
}

/// Label from comparing `lhs > rhs`; `marginal` marks a comparison within
/// the relative band where rounding could flip it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeDecision {
    pub label: RegimeLabel,
    pub lhs: f64,
    pub rhs: f64,
    pub marginal: bool,
    pub params: RegimeParams,
}

fn decide(lhs: f64, rhs: f64, params: RegimeParams, degenerate: bool) -> RegimeDecision {
    let scale = lhs.abs().max(rhs.abs());
    let marginal = (lhs - rhs).abs() <= MARGINAL_BAND * scale;
    let label = if !degenerate && lhs > rhs {
        RegimeLabel::Surprising
    } else {
        RegimeLabel::Standard
    };
    RegimeDecision {
        label,
        lhs,
        rhs,
        marginal,
        params,
    }
}

/// Shape of `π₊ ↦ R_nat(w_adv)`: surprising iff `c > d²`.
pub fn risk_regime(mixture: &GaussianMixture, threat: &ThreatModel, tol: f64) -> Result<RegimeDecision> {
    let p = regime_params(mixture, threat, tol)?;
    Ok(decide(p.c, p.d * p.d, p, threat.epsilon() == 0.0))
}

/// Shape of `π₊ ↦ G`: surprising iff
/// `2(c/d² − 1)e^{−(c/d)²/2}/d > −e^{−‖μ‖²/2}/(2‖μ‖)` in the Σ⁻¹ norm.
pub fn gap_regime(mixture: &GaussianMixture, threat: &ThreatModel, tol: f64) -> Result<RegimeDecision> {
    let p = regime_params(mixture, threat, tol)?;
    let norm = mixture.mu_inv_norm();
    let lhs = 2.0 * (p.ratio - 1.0) * (-(p.c / p.d).powi(2) / 2.0).exp() / p.d;
    let rhs = -(-norm * norm / 2.0).exp() / (2.0 * norm);
    // at ε = 0 both sides coincide and the gap is identically zero
    let degenerate = threat.epsilon() == 0.0;
    let gap = decide(lhs, rhs, p, degenerate);
    let risk = decide(p.c, p.d * p.d, p, degenerate);
    if risk.label == RegimeLabel::Surprising
        && gap.label == RegimeLabel::Standard
        && !risk.marginal
        && !gap.marginal
    {
        return Err(Error::Invariant(format!(
            "risk regime is surprising but gap regime is not (lhs {lhs:e}, rhs {rhs:e})"
        )));
    }
    Ok(gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeTarget {
    Risk,
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterShape {
    LocalMin,
    LocalMax,
    Neither,
    /// `π₊ = 1/2` is not on the grid.
    Absent,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremaSummary {
    /// Grid locations of interior local maxima.
    pub interior_maxima: Vec<f64>,
    pub center: CenterShape,
    /// `max |f(π) − f(1 − π)|` over mirrored grid points.
    pub symmetry_defect: f64,
    pub pi: Vec<f64>,
    pub values: Vec<f64>,
}

impl ExtremaSummary {
    /// The label the observed shape corresponds to, if it matches either.
    pub fn observed_label(&self) -> Option<RegimeLabel> {
        match (self.interior_maxima.len(), self.center) {
            (2, CenterShape::LocalMin) => Some(RegimeLabel::Surprising),
            (1, CenterShape::LocalMax) => Some(RegimeLabel::Standard),
            _ => None,
        }
    }
}

fn check_symmetric_grid(pi: &[f64]) -> Result<()> {
    if pi.len() < 3 {
        return Err(Error::Domain("prior grid needs at least 3 points".into()));
    }
    if pi.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::Domain("prior grid values must lie in (0, 1)".into()));
    }
    if pi.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("prior grid must be strictly increasing".into()));
    }
    let n = pi.len();
    if (0..n).any(|k| (pi[k] + pi[n - 1 - k] - 1.0).abs() > 1e-9) {
        return Err(Error::Domain("prior grid must be symmetric about 1/2".into()));
    }
    Ok(())
}

/// Evaluates the risk or gap curve over `π₊` (μ, Σ and ε fixed; the bias
/// follows the prior) and locates its extrema.
pub fn verify_regime_numerically(
    template: &GaussianMixture,
    threat: &ThreatModel,
    pi_grid: &[f64],
    which: RegimeTarget,
    tol: f64,
) -> Result<ExtremaSummary> {
    check_symmetric_grid(pi_grid)?;
    // z* does not depend on the prior, so the weight vector is shared
    let robust = adversarial_classifier(template, threat, tol)?.classifier;
    let bayes_w = bayes_classifier(template).w;
    let values = pi_grid
        .par_iter()
        .map(|&pi| {
            let m = template.with_prior(pi)?;
            let bias = m.log_odds_bias();
            let mut adv = robust.clone();
            adv.w0 = bias;
            let r = natural_risk(&adv, &m)?;
            Ok(match which {
                RegimeTarget::Risk => r,
                RegimeTarget::Gap => {
                    let nat = crate::model::LinearClassifier::new(bayes_w.clone(), bias);
                    (r - natural_risk(&nat, &m)?).max(0.0)
                }
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize_extrema(pi_grid, values))
}

/// Extrema of a sampled curve via sign changes of consecutive differences.
/// Maxima within one step of either end are ignored.
pub fn summarize_extrema(pi: &[f64], values: Vec<f64>) -> ExtremaSummary {
    let n = values.len();
    let step_sign = |k: usize| {
        let d = values[k + 1] - values[k];
        if d.abs() <= FLATNESS_BAND {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        }
    };
    let mut interior_maxima = Vec::new();
    // last nonzero slope and the index where it ended
    let mut prev: Option<(i32, usize)> = None;
    for k in 0..n.saturating_sub(1) {
        let s = step_sign(k);
        if s == 0 {
            continue;
        }
        if let Some((ps, pk)) = prev {
            if ps > 0 && s < 0 {
                // the top spans grid points pk+1 ..= k; report its midpoint
                let lo = pk + 1;
                let idx = (lo + k) / 2;
                if lo > 1 && k + 2 < n {
                    interior_maxima.push(pi[idx]);
                }
            }
        }
        prev = Some((s, k));
    }

    let center = match pi.iter().position(|p| (p - 0.5).abs() <= 1e-12) {
        Some(c) if c > 0 && c + 1 < n => {
            let (l, m, r) = (values[c - 1], values[c], values[c + 1]);
            if m < l - FLATNESS_BAND && m < r - FLATNESS_BAND {
                CenterShape::LocalMin
            } else if m > l + FLATNESS_BAND && m > r + FLATNESS_BAND {
                CenterShape::LocalMax
            } else {
                CenterShape::Neither
            }
        }
        _ => CenterShape::Absent,
    };
    let symmetry_defect = (0..n)
        .map(|k| (values[k] - values[n - 1 - k]).abs())
        .fold(0.0, f64::max);
    ExtremaSummary {
        interior_maxima,
        center,
        symmetry_defect,
        pi: pi.to_vec(),
        values,
    }
}

/// Constants governing the gap bounds of a balanced mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBoundTerms {
    /// `‖sign(Σ⁻¹μ)‖²_{Σ⁻¹} − ‖Σ⁻¹μ‖₁²/‖μ‖²_{Σ⁻¹}`, clamped at 0.
    pub c_sigma_mu: f64,
    /// `‖μ‖²_{Σ⁻¹} / (2‖Σ⁻¹μ‖₁)`.
    pub eps_limit_a: f64,
    /// `‖μ‖_{Σ⁻¹} / (2√C)`; infinite when `C = 0`.
    pub eps_limit_b: f64,
    pub mu_inv_norm: f64,
}

pub fn gap_bound_terms(mixture: &GaussianMixture) -> Result<GapBoundTerms> {
    if !mixture.is_balanced() {
        return Err(Error::Unsupported(format!(
            "gap bounds are defined for balanced classes only (pi_plus = {})",
            mixture.pi_plus()
        )));
    }
    let v = mixture.sigma_inv(mixture.mu())?;
    let norm_sq = dot(mixture.mu(), &v);
    if !(norm_sq > 0.0) {
        return Err(Error::Domain("gap bounds need a nonzero mean".into()));
    }
    let signs: Vec<f64> = v
        .iter()
        .map(|x| if x.abs() <= ZERO_COORD_TOL { 0.0 } else { x.signum() })
        .collect();
    let sign_norm_sq = dot(&signs, &mixture.sigma_inv(&signs)?);
    let l1 = norm_l1(&v);
    let raw = sign_norm_sq - l1 * l1 / norm_sq;
    if raw < -1e-12 * sign_norm_sq.max(1.0) {
        return Err(Error::Invariant(format!("C = {raw:e} is negative")));
    }
    let c = raw.max(0.0);
    let norm = norm_sq.sqrt();
    Ok(GapBoundTerms {
        c_sigma_mu: c,
        eps_limit_a: norm_sq / (2.0 * l1),
        eps_limit_b: if c == 0.0 {
            f64::INFINITY
        } else {
            norm / (2.0 * c.sqrt())
        },
        mu_inv_norm: norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBoundForm {
    /// `Φ(−‖μ‖ + 2Cε²/‖μ‖) − Φ(−‖μ‖)`.
    PhiDifference,
    /// `2e^{−‖μ‖²/8}Cε²/(√(2π)‖μ‖)`.
    Exponential,
    /// `2e^{−b²/2}Cε²/(√(2π)‖μ‖)` with `b = −‖μ‖ + 2Cε²/‖μ‖`.
    Precise,
}

fn within(eps: f64, limit: f64) -> bool {
    eps <= limit * (1.0 + 1e-12)
}

fn limit_error(eps: f64, name: &str, limit: f64) -> Error {
    Error::Applicability(format!(
        "epsilon = {eps} exceeds limit {name} = {limit}"
    ))
}

pub fn gap_upper_bound(mixture: &GaussianMixture, threat: &ThreatModel, form: UpperBoundForm) -> Result<f64> {
    let t = gap_bound_terms(mixture)?;
    let eps = threat.epsilon();
    if !within(eps, t.eps_limit_a) {
        return Err(limit_error(eps, "A (||mu||^2 / (2 ||Sigma^-1 mu||_1))", t.eps_limit_a));
    }
    let norm = t.mu_inv_norm;
    let shift = 2.0 * t.c_sigma_mu * eps * eps / norm;
    let b = -norm + shift;
    match form {
        UpperBoundForm::PhiDifference | UpperBoundForm::Exponential if !within(eps, t.eps_limit_b) => {
            Err(limit_error(eps, "B (||mu|| / (2 sqrt C))", t.eps_limit_b))
        }
        UpperBoundForm::PhiDifference => Ok((normal_cdf(b) - normal_cdf(-norm)).max(0.0)),
        UpperBoundForm::Exponential => {
            Ok(2.0 * (-norm * norm / 8.0).exp() * t.c_sigma_mu * eps * eps / (SQRT_2PI * norm))
        }
        UpperBoundForm::Precise => {
            if b > 0.0 {
                return Err(Error::Applicability(format!(
                    "epsilon = {eps} makes 2 C eps^2 exceed ||mu||^2; the tangent bound needs a nonpositive argument"
                )));
            }
            Ok(normal_pdf(b) * shift)
        }
    }
}

/// `e^{−‖μ‖²/2}Cε²/(3√(2π)‖μ‖)`; needs diagonal Σ and `min|μ_i| ≥ ε`.
pub fn gap_lower_bound(mixture: &GaussianMixture, threat: &ThreatModel) -> Result<f64> {
    let t = gap_bound_terms(mixture)?;
    let eps = threat.epsilon();
    if !mixture.sigma().is_diagonal(1e-12) {
        return Err(Error::Applicability("lower bound requires a diagonal covariance".into()));
    }
    let min = mixture.mu().iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
    if min < eps {
        return Err(Error::Applicability(format!(
            "lower bound requires min |mu_i| >= epsilon ({min} < {eps})"
        )));
    }
    if !within(eps, t.eps_limit_a) {
        return Err(limit_error(eps, "A", t.eps_limit_a));
    }
    if !within(eps, t.eps_limit_b) {
        return Err(limit_error(eps, "B", t.eps_limit_b));
    }
    let norm = t.mu_inv_norm;
    Ok((-norm * norm / 2.0).exp() * t.c_sigma_mu * eps * eps / (3.0 * SQRT_2PI * norm))
}
