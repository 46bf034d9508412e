//! Bayes-optimal and adversarially-optimal linear classifiers, plus the
//! coordinate conditions under which they coincide.

use serde::Serialize;

use crate::boxqp::{self, BoxQpSolution};
use crate::error::{Error, Result};
use crate::linearloss::NormOrder;
use crate::model::{nontrivial_budget, GaussianMixture, LinearClassifier, ThreatModel};
use crate::numerics::{norm_inf, sign};

/// Entries of Σ⁻¹μ at or below this magnitude count as zero.
pub const ZERO_COORD_TOL: f64 = 1e-10;
/// Relative tolerance for "all magnitudes equal the same constant c".
pub const EQUAL_MAGNITUDE_TOL: f64 = 1e-9;

/// `w = Σ⁻¹μ`, `w0 = ln(π₊/π₋)/2`.
pub fn bayes_classifier(mixture: &GaussianMixture) -> LinearClassifier {
    let w = mixture.sigma_inv(mixture.mu()).expect("dimensions validated");
    LinearClassifier::new(w, mixture.log_odds_bias())
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversarialClassifier {
    pub classifier: LinearClassifier,
    pub solution: BoxQpSolution,
    /// ε ≥ ‖μ‖∞: the weight vector is exactly zero.
    pub trivial: bool,
}

/// `w = Σ⁻¹(μ − εz*)`, `w0 = ln(π₊/π₋)/2`, with z* from the box QP.
pub fn adversarial_classifier(
    mixture: &GaussianMixture,
    threat: &ThreatModel,
    tol: f64,
) -> Result<AdversarialClassifier> {
    let solution = boxqp::solve_zstar(mixture, threat, tol)?;
    let bias = mixture.log_odds_bias();
    if !nontrivial_budget(mixture, threat) {
        return Ok(AdversarialClassifier {
            classifier: LinearClassifier::zero(mixture.dim(), bias),
            solution,
            trivial: true,
        });
    }
    let eps = threat.epsilon();
    let shifted: Vec<f64> = mixture
        .mu()
        .iter()
        .zip(&solution.z_star)
        .map(|(m, z)| m - eps * z)
        .collect();
    let w = mixture.sigma_inv(&shifted)?;
    Ok(AdversarialClassifier {
        classifier: LinearClassifier::new(w, bias),
        solution,
        trivial: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoTradeoffReport {
    pub equivalent: bool,
    pub witness_c: Option<f64>,
    pub violating_indices: Vec<usize>,
}

/// Decides whether the robust optimum is also Bayes optimal for a balanced
/// mixture: some `c ≥ ε` must satisfy `μ_i = c·sign((Σ⁻¹μ)_i)` on the
/// support of Σ⁻¹μ and `|μ_i| ≤ c` off it.
pub fn no_tradeoff_check(
    mixture: &GaussianMixture,
    threat: &ThreatModel,
) -> Result<NoTradeoffReport> {
    if !mixture.is_balanced() {
        return Err(Error::Unsupported(format!(
            "equivalence check is defined for balanced classes only (pi_plus = {})",
            mixture.pi_plus()
        )));
    }
    if !nontrivial_budget(mixture, threat) {
        return Err(Error::Applicability(format!(
            "requires epsilon < ||mu||_inf ({} >= {})",
            threat.epsilon(),
            norm_inf(mixture.mu())
        )));
    }
    let eps = threat.epsilon();
    let mu = mixture.mu();
    let v = mixture.sigma_inv(mu)?;
    let support: Vec<usize> = (0..v.len()).filter(|&i| v[i].abs() > ZERO_COORD_TOL).collect();
    let off_support: Vec<usize> = (0..v.len()).filter(|&i| v[i].abs() <= ZERO_COORD_TOL).collect();

    // signed magnitudes μ_i·sign(v_i) on the support; c is the most common one
    let signed: Vec<f64> = support.iter().map(|&i| mu[i] * sign(v[i])).collect();
    let matches = |a: f64, b: f64| (a - b).abs() <= EQUAL_MAGNITUDE_TOL * a.abs().max(b.abs());
    let c = signed
        .iter()
        .copied()
        .max_by_key(|a| signed.iter().filter(|b| matches(*a, **b)).count())
        .unwrap_or(0.0);

    let mut violating: Vec<usize> = support
        .iter()
        .zip(&signed)
        .filter(|(_, s)| !matches(**s, c))
        .map(|(i, _)| *i)
        .collect();
    let c_ok = c >= eps - 1e-12 && c > 0.0;
    if !c_ok {
        violating = support.clone();
    }
    violating.extend(
        off_support
            .iter()
            .filter(|&&i| mu[i].abs() > c * (1.0 + EQUAL_MAGNITUDE_TOL))
            .copied(),
    );
    violating.sort_unstable();
    violating.dedup();

    let equivalent = c_ok && violating.is_empty();
    Ok(NoTradeoffReport {
        equivalent,
        witness_c: equivalent.then_some(c),
        violating_indices: violating,
    })
}

/// Necessary and sufficient condition for `w_nat = w_adv` under the linear
/// loss with an ℓp weight budget.
pub fn linear_loss_tradeoff_check(mu: &[f64], epsilon: f64, p: NormOrder) -> Result<bool> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let max = norm_inf(mu);
    Ok(match p {
        NormOrder::L1 => max >= epsilon || max == 0.0,
        NormOrder::LInf => mu.iter().all(|m| *m == 0.0 || m.abs() >= epsilon),
        NormOrder::Lp(_) => {
            if max == 0.0 {
                true
            } else {
                let zero = |m: f64| m.abs() <= EQUAL_MAGNITUDE_TOL * max;
                max >= epsilon
                    && mu
                        .iter()
                        .all(|m| zero(*m) || (m.abs() - max).abs() <= EQUAL_MAGNITUDE_TOL * max)
            }
        }
    })
}
