//! Distribution, threat model and classifier types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, cholesky, Matrix, SpdFactor};

/// Binary Gaussian mixture: `P[y = ±1] = π±`, `x | y ~ N(y·μ, Σ)`.
///
/// Construction validates Σ once and caches its Cholesky factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpec", into = "MixtureSpec")]
pub struct GaussianMixture {
    mu: Vec<f64>,
    sigma: Matrix,
    pi_plus: f64,
    factor: SpdFactor,
}

/// Plain field record for (de)serialization of a mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub mu: Vec<f64>,
    pub sigma: Matrix,
    pub pi_plus: f64,
}

impl GaussianMixture {
    pub fn new(mu: Vec<f64>, sigma: Matrix, pi_plus: f64) -> Result<Self> {
        validate_mixture(mu, sigma, pi_plus)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn pi_plus(&self) -> f64 {
        self.pi_plus
    }

    pub fn pi_minus(&self) -> f64 {
        1.0 - self.pi_plus
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `ln(π₊/π₋)/2`, the bias shared by the Bayes and adversarial optima.
    pub fn log_odds_bias(&self) -> f64 {
        0.5 * (self.pi_plus / self.pi_minus()).ln()
    }

    /// Same μ and Σ with a different class prior. Reuses the cached factor.
    pub fn with_prior(&self, pi_plus: f64) -> Result<Self> {
        check_prior(pi_plus)?;
        Ok(Self {
            pi_plus,
            ..self.clone()
        })
    }

    /// Σ⁻¹v.
    pub fn sigma_inv(&self, v: &[f64]) -> Result<Vec<f64>> {
        numerics::spd_solve(&self.factor, v)
    }

    /// ‖v‖_{Σ⁻¹}.
    pub fn inv_norm(&self, v: &[f64]) -> Result<f64> {
        numerics::mahalanobis_inv_norm(&self.factor, v)
    }

    /// ‖μ‖_{Σ⁻¹}.
    pub fn mu_inv_norm(&self) -> f64 {
        self.inv_norm(&self.mu).expect("dimensions validated")
    }

    pub fn is_balanced(&self) -> bool {
        (self.pi_plus - 0.5).abs() <= 1e-12
    }

    pub fn spec(&self) -> MixtureSpec {
        MixtureSpec {
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            pi_plus: self.pi_plus,
        }
    }
}

impl TryFrom<MixtureSpec> for GaussianMixture {
    type Error = Error;
    fn try_from(s: MixtureSpec) -> Result<Self> {
        validate_mixture(s.mu, s.sigma, s.pi_plus)
    }
}

impl From<GaussianMixture> for MixtureSpec {
    fn from(m: GaussianMixture) -> Self {
        m.spec()
    }
}

fn check_prior(pi_plus: f64) -> Result<()> {
    if !(pi_plus > 0.0 && pi_plus < 1.0) {
        return Err(Error::Domain(format!(
            "pi_plus must lie in the open interval (0, 1), got {pi_plus}"
        )));
    }
    Ok(())
}

pub fn validate_mixture(mu: Vec<f64>, sigma: Matrix, pi_plus: f64) -> Result<GaussianMixture> {
    if mu.len() != sigma.dim() {
        return Err(Error::Shape(format!(
            "mu has dimension {} but sigma is {}x{}",
            mu.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    if mu.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("mu entries must be finite".into()));
    }
    check_prior(pi_plus)?;
    let factor = cholesky(&sigma)?;
    Ok(GaussianMixture {
        mu,
        sigma,
        pi_plus,
        factor,
    })
}

/// ℓ∞ perturbation budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ThreatModel {
    epsilon: f64,
}

impl ThreatModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn none() -> Self {
        Self { epsilon: 0.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl TryFrom<f64> for ThreatModel {
    type Error = Error;
    fn try_from(e: f64) -> Result<Self> {
        ThreatModel::new(e)
    }
}

impl From<ThreatModel> for f64 {
    fn from(t: ThreatModel) -> f64 {
        t.epsilon
    }
}

/// `ε < ‖μ‖∞`: outside this range the optimal robust classifier is zero.
pub fn nontrivial_budget(mixture: &GaussianMixture, threat: &ThreatModel) -> bool {
    threat.epsilon() < numerics::norm_inf(mixture.mu())
}

/// Predicts `sign(⟨w,x⟩ + w0)`.
///
/// For `w = 0` the prediction is the constant `+1` when `w0 ≥ 0` and `-1`
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub w: Vec<f64>,
    pub w0: f64,
}

impl LinearClassifier {
    pub fn new(w: Vec<f64>, w0: f64) -> Self {
        Self { w, w0 }
    }

    pub fn zero(dim: usize, w0: f64) -> Self {
        Self { w: vec![0.0; dim], w0 }
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().all(|x| *x == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            w: self.w.iter().map(|x| x * s).collect(),
            w0: self.w0 * s,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        numerics::dot(&self.w, x) + self.w0
    }

    /// Unit-Euclidean-norm weight direction (zero stays zero).
    pub fn direction(&self) -> Vec<f64> {
        let n = numerics::dot(&self.w, &self.w).sqrt();
        if n == 0.0 {
            return self.w.clone();
        }
        self.w.iter().map(|x| x / n).collect()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.w.len() != dim {
            return Err(Error::Shape(format!(
                "classifier has dimension {} but mixture has {dim}",
                self.w.len()
            )));
        }
        Ok(())
    }
}
