//! Seeded sampling from the mixture and empirical risk estimates.
//!
//! Every draw is a pure function of `(seed, stream_id, index)`, so results
//! do not depend on how the index range is split across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linearloss::{
    hoeffding_bound, linear_loss_risk, train_finite_sample, weights_agree, HoeffdingCase, HoeffdingReport,
    LabeledPoint, LinearLossConstraint, NormOrder, SampleSet,
};
use crate::model::{GaussianMixture, LinearClassifier, ThreatModel};
use crate::numerics::{dot, norm_inf, norm_l1, normal_cdf, normal_pdf};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless generator: the value at a counter is `splitmix64(key + counter·φ)`.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(spec: RngSpec) -> Self {
        let key = mix64(spec.seed ^ mix64(spec.stream_id.wrapping_add(GOLDEN)));
        Self { key }
    }

    pub fn bits(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals from counters `c` and `c + 1`.
    pub fn normal_pair(&self, counter: u64) -> (f64, f64) {
        let u1 = self.uniform(counter);
        let u2 = self.uniform(counter + 1);
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * libm::cos(theta), r * libm::sin(theta))
    }
}

/// Counter layout of one labeled draw: a label uniform followed by the
/// Box–Muller uniforms for `dim` normals.
#[derive(Debug, Clone, Copy)]
struct DrawLayout {
    dim: usize,
    stride: u64,
}

impl DrawLayout {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            stride: 1 + 2 * dim.div_ceil(2) as u64,
        }
    }

    /// `(y, x)` for sample `index`; `x` is written into `buf`.
    fn draw(&self, rng: &CounterRng, m: &GaussianMixture, index: u64, buf: &mut Vec<f64>, g: &mut Vec<f64>) -> f64 {
        let base = index * self.stride;
        let y = if rng.uniform(base) < m.pi_plus() { 1.0 } else { -1.0 };
        g.clear();
        let mut c = base + 1;
        while g.len() < self.dim {
            let (a, b) = rng.normal_pair(c);
            g.push(a);
            if g.len() < self.dim {
                g.push(b);
            }
            c += 2;
        }
        let noise = m.factor().lower_mul(g);
        buf.clear();
        buf.extend(m.mu().iter().zip(&noise).map(|(mu, e)| y * mu + e));
        y
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    Ok(())
}

fn draw_points(mixture: &GaussianMixture, n: usize, rng: RngSpec, clip: Option<f64>) -> Vec<LabeledPoint> {
    let layout = DrawLayout::new(mixture.dim());
    let gen = CounterRng::new(rng);
    (0..n)
        .into_par_iter()
        .with_min_len(CHUNK / 4)
        .map_init(
            || (Vec::new(), Vec::new()),
            |(buf, g), i| {
                let y = layout.draw(&gen, mixture, i as u64, buf, g);
                let x = match clip {
                    Some(a) => buf.iter().map(|v| v.clamp(-a, a)).collect(),
                    None => buf.clone(),
                };
                LabeledPoint { x, y: y as i8 }
            },
        )
        .collect()
}

/// `n` labeled draws `y ~ π±`, `x = yμ + Lg`.
pub fn sample(mixture: &GaussianMixture, n: usize, rng: RngSpec) -> Result<SampleSet> {
    check_n(n)?;
    SampleSet::from_points(draw_points(mixture, n, rng, None))
}

/// Like [`sample`] with every coordinate clipped to `[−a, a]`.
pub fn sample_clipped(mixture: &GaussianMixture, n: usize, a: f64, rng: RngSpec) -> Result<SampleSet> {
    check_n(n)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("clip bound must be positive, got {a}")));
    }
    SampleSet::from_points(draw_points(mixture, n, rng, Some(a)))
}

/// `E[clamp(Z, −a, a)]` for `Z ~ N(m, s²)`.
pub fn clipped_gaussian_mean(m: f64, s: f64, a: f64) -> f64 {
    let lo = (-a - m) / s;
    let hi = (a - m) / s;
    let inside = normal_cdf(hi) - normal_cdf(lo);
    -a * normal_cdf(lo) + a * (1.0 - normal_cdf(hi)) + m * inside + s * (normal_pdf(lo) - normal_pdf(hi))
}

/// `E[y·x]` under [`sample_clipped`]; only depends on the diagonal of Σ.
pub fn clipped_signed_mean(mixture: &GaussianMixture, a: f64) -> Vec<f64> {
    mixture
        .mu()
        .iter()
        .zip(mixture.sigma().diag())
        .map(|(m, v)| clipped_gaussian_mean(*m, v.sqrt(), a))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalRisk {
    pub estimate: f64,
    /// `√(estimate·(1 − estimate)/n)`.
    pub std_error: f64,
    pub n: usize,
}

impl EmpiricalRisk {
    pub fn from_count(errors: u64, n: usize) -> Self {
        let estimate = errors as f64 / n as f64;
        Self {
            estimate,
            std_error: (estimate * (1.0 - estimate) / n as f64).sqrt(),
            n,
        }
    }
}

/// Fraction of draws the classifier gets wrong under the worst ℓ∞
/// perturbation, which shifts the margin by `−ε‖w‖₁`.
pub fn empirical_adversarial_risk(
    classifier: &LinearClassifier,
    mixture: &GaussianMixture,
    threat: &ThreatModel,
    n: usize,
    rng: RngSpec,
) -> Result<EmpiricalRisk> {
    check_n(n)?;
    classifier.check_dim(mixture.dim())?;
    let layout = DrawLayout::new(mixture.dim());
    let gen = CounterRng::new(rng);
    let shift = threat.epsilon() * norm_l1(&classifier.w);
    let constant = classifier.is_zero();
    let errors: u64 = (0..n)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map_init(
            || (Vec::new(), Vec::new()),
            |(buf, g), i| {
                let y = layout.draw(&gen, mixture, i as u64, buf, g);
                let wrong = if constant {
                    let pred = if classifier.w0 >= 0.0 { 1.0 } else { -1.0 };
                    pred != y
                } else {
                    y * (dot(&classifier.w, buf) + classifier.w0) - shift <= 0.0
                };
                u64::from(wrong)
            },
        )
        .sum();
    Ok(EmpiricalRisk::from_count(errors, n))
}

/// Outcome of repeated linear-loss training on clipped samples.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteSampleOutcome {
    /// `E[y·x]` of the clipped distribution.
    pub mu: Vec<f64>,
    pub report: HoeffdingReport,
    /// Trials in which the bounded event occurred.
    pub hits: usize,
    pub trials: usize,
    pub frequency: f64,
}

/// The concentration statement matching `mu`, `ε` and the norm order.
pub fn select_case(mu: &[f64], epsilon: f64, p: NormOrder) -> Result<HoeffdingCase> {
    let max = norm_inf(mu);
    match p {
        NormOrder::L1 if max >= epsilon => Ok(HoeffdingCase::P1Equal),
        NormOrder::L1 if max > 0.0 => Ok(HoeffdingCase::P1Gap),
        NormOrder::LInf if mu.iter().all(|m| m.abs() >= epsilon) => Ok(HoeffdingCase::PInfEqual),
        NormOrder::LInf => mu
            .iter()
            .position(|m| m.abs() > 0.0 && m.abs() < epsilon)
            .map(HoeffdingCase::PInfGap)
            .ok_or_else(|| Error::Applicability("no coordinate with 0 < |mu_j| < epsilon".into())),
        NormOrder::Lp(_) => Err(Error::Unsupported("concentration bounds cover p = 1 and p = inf only".into())),
        NormOrder::L1 => Err(Error::Applicability("mu is zero".into())),
    }
}

/// Trains standard and robust linear-loss classifiers on `trials`
/// independent clipped samples of size `n` and counts how often the event
/// of the matching concentration bound occurs. Trial `t` uses stream
/// `rng.stream_id + t`.
pub fn finite_sample_trials(
    mixture: &GaussianMixture,
    constraint: &LinearLossConstraint,
    epsilon: f64,
    n: usize,
    clip: f64,
    trials: usize,
    rng: RngSpec,
) -> Result<FiniteSampleOutcome> {
    check_n(n)?;
    if trials == 0 {
        return Err(Error::Domain("trial count must be at least 1".into()));
    }
    let mu = clipped_signed_mean(mixture, clip);
    let case = select_case(&mu, epsilon, constraint.p)?;
    let report = hoeffding_bound(&mu, epsilon, n as u64, clip, case)?;
    let big_w = constraint.budget;
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = sample_clipped(mixture, n, clip, rng.with_stream(rng.stream_id.wrapping_add(t as u64)))?;
            let adv = train_finite_sample(&s, constraint, epsilon)?;
            let nat = train_finite_sample(&s, constraint, 0.0)?;
            let diff = linear_loss_risk(&adv, &mu, 0.0)? - linear_loss_risk(&nat, &mu, 0.0)?;
            let hit = match case {
                HoeffdingCase::P1Equal | HoeffdingCase::PInfEqual => weights_agree(&adv, &nat),
                HoeffdingCase::P1Gap => (diff - big_w * norm_inf(&mu)).abs() <= 1e-12 * big_w.max(1.0),
                HoeffdingCase::PInfGap(j) => diff >= big_w * mu[j].abs() - 1e-12,
            };
            Ok(usize::from(hit))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(FiniteSampleOutcome {
        mu,
        report,
        hits,
        trials,
        frequency: hits as f64 / trials as f64,
    })
}
