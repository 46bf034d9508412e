//! Exact natural and adversarial 0-1 risks of linear classifiers.

use serde::Serialize;

use crate::boxqp::BoxQpSolution;
use crate::classifiers::{adversarial_classifier, bayes_classifier};
use crate::error::{Error, Result};
use crate::model::{GaussianMixture, LinearClassifier, ThreatModel};
use crate::numerics::{dot, norm_l1, normal_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub natural_risk: f64,
    pub adversarial_risk: f64,
    /// Adversarial error conditional on `y = +1`.
    pub plus_term: f64,
    /// Adversarial error conditional on `y = −1`.
    pub minus_term: f64,
    pub natural_plus_term: f64,
    pub natural_minus_term: f64,
}

/// Per-class error probabilities `(P[err | y=+1], P[err | y=−1])` under an
/// ℓ∞ budget `eps`.
fn class_terms(c: &LinearClassifier, m: &GaussianMixture, eps: f64) -> (f64, f64) {
    if c.is_zero() {
        // constant prediction: +1 when w0 ≥ 0
        return if c.w0 >= 0.0 { (0.0, 1.0) } else { (1.0, 0.0) };
    }
    let spread = m
        .sigma()
        .quad_form(&c.w)
        .expect("dimension checked")
        .max(0.0)
        .sqrt();
    let shift = -dot(&c.w, m.mu()) + eps * norm_l1(&c.w);
    let plus = normal_cdf((shift - c.w0) / spread).clamp(0.0, 1.0);
    let minus = normal_cdf((shift + c.w0) / spread).clamp(0.0, 1.0);
    (plus, minus)
}

/// Closed-form risks of `sign(⟨w,x⟩ + w0)` against the mixture, with and
/// without the ℓ∞ adversary.
pub fn adversarial_risk(
    classifier: &LinearClassifier,
    mixture: &GaussianMixture,
    threat: &ThreatModel,
) -> Result<RiskReport> {
    classifier.check_dim(mixture.dim())?;
    let (pp, pm) = (mixture.pi_plus(), mixture.pi_minus());
    let (plus, minus) = class_terms(classifier, mixture, threat.epsilon());
    let (nat_plus, nat_minus) = class_terms(classifier, mixture, 0.0);
    Ok(RiskReport {
        natural_risk: (pp * nat_plus + pm * nat_minus).clamp(0.0, 1.0),
        adversarial_risk: (pp * plus + pm * minus).clamp(0.0, 1.0),
        plus_term: plus,
        minus_term: minus,
        natural_plus_term: nat_plus,
        natural_minus_term: nat_minus,
    })
}

pub fn natural_risk(classifier: &LinearClassifier, mixture: &GaussianMixture) -> Result<f64> {
    Ok(adversarial_risk(classifier, mixture, &ThreatModel::none())?.natural_risk)
}

/// Both optimal classifiers at one budget and the risks a sweep reports.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalRisks {
    pub bayes: LinearClassifier,
    pub robust: LinearClassifier,
    pub solution: BoxQpSolution,
    pub nat_risk_bayes: f64,
    pub nat_risk_adv: f64,
    pub adv_risk_adv: f64,
    pub gap: f64,
}

pub fn optimal_risks(
    mixture: &GaussianMixture,
    threat: &ThreatModel,
    tol: f64,
) -> Result<OptimalRisks> {
    let bayes = bayes_classifier(mixture);
    let adv = adversarial_classifier(mixture, threat, tol)?;
    let nat_bayes = natural_risk(&bayes, mixture)?;
    let report = adversarial_risk(&adv.classifier, mixture, threat)?;
    let diff = report.natural_risk - nat_bayes;
    if diff < -1e-10 {
        return Err(Error::Invariant(format!(
            "robust classifier beats the Bayes classifier on natural risk by {:e}",
            -diff
        )));
    }
    Ok(OptimalRisks {
        bayes,
        robust: adv.classifier,
        solution: adv.solution,
        nat_risk_bayes: nat_bayes,
        nat_risk_adv: report.natural_risk,
        adv_risk_adv: report.adversarial_risk,
        gap: diff.max(0.0),
    })
}

/// `R_nat(w_adv) − R_nat(w_nat)`, clamped at 0 against rounding.
pub fn gap(mixture: &GaussianMixture, threat: &ThreatModel, tol: f64) -> Result<f64> {
    Ok(optimal_risks(mixture, threat, tol)?.gap)
}
