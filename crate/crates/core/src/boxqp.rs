//! The box-constrained quadratic program behind the optimal robust classifier:
//!
//! ```text
//! z* = argmin_{‖z‖∞ ≤ 1} (μ − εz)ᵀ Σ⁻¹ (μ − εz)
//! ```
//!
//! Solved by projected gradient descent with a constant `1/L` step, where
//! `L = 2ε²·λ_max(Σ⁻¹)`, and certified by a KKT residual. Two independent
//! oracles live alongside: the separable closed form for diagonal Σ and an
//! exhaustive grid search for small dimensions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GaussianMixture, ThreatModel};
use crate::numerics::{self, norm_inf};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200_000;
/// |z_i| at or above `1 - SATURATION_TOL` counts as an active bound.
pub const SATURATION_TOL: f64 = 1e-7;
const GRID_MAX_DIM: usize = 4;

/// Which side of the box a coordinate of z* sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Bound {
    Lower,
    Interior,
    Upper,
}

impl Bound {
    pub fn classify(z: f64) -> Self {
        if z >= 1.0 - SATURATION_TOL {
            Bound::Upper
        } else if z <= -1.0 + SATURATION_TOL {
            Bound::Lower
        } else {
            Bound::Interior
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Bound::Lower => '-',
            Bound::Interior => '0',
            Bound::Upper => '+',
        }
    }
}

pub type ActiveSet = Vec<Bound>;

/// Compact rendering such as `[-,+,0,+]`.
pub fn format_active_set(set: &[Bound]) -> String {
    let inner: Vec<String> = set.iter().map(|b| b.symbol().to_string()).collect();
    format!("[{}]", inner.join(","))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxQpSolution {
    pub z_star: Vec<f64>,
    /// ‖μ − εz*‖²_{Σ⁻¹}
    pub objective: f64,
    pub active_set: ActiveSet,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct BoxQpOptions {
    /// Bound on the projected-gradient norm `‖z − clamp(z − ∇f(z))‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Nesterov momentum with restart whenever the objective increases.
    pub accelerated: bool,
    /// Feasible starting point; defaults to `clamp(μ/ε, −1, 1)`.
    pub start: Option<Vec<f64>>,
}

impl Default for BoxQpOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            accelerated: false,
            start: None,
        }
    }
}

impl BoxQpOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Objective and gradient of `f(z) = ‖μ − εz‖²_{Σ⁻¹}`.
struct Problem<'a> {
    mixture: &'a GaussianMixture,
    eps: f64,
}

impl Problem<'_> {
    fn residual(&self, z: &[f64]) -> Vec<f64> {
        self.mixture
            .mu()
            .iter()
            .zip(z)
            .map(|(m, zi)| m - self.eps * zi)
            .collect()
    }

    /// Returns (f(z), ∇f(z)).
    fn eval(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let r = self.residual(z);
        let s = self.mixture.sigma_inv(&r).expect("dimension checked");
        let f = numerics::dot(&r, &s);
        let g = s.iter().map(|si| -2.0 * self.eps * si).collect();
        (f, g)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let n = self.mixture.inv_norm(&self.residual(z)).expect("dimension checked");
        n * n
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

fn projected_gradient_norm(z: &[f64], g: &[f64]) -> f64 {
    z.iter()
        .zip(g)
        .fold(0.0, |m, (zi, gi)| m.max((zi - clamp_unit(zi - gi)).abs()))
}

/// KKT residual: stationarity on free coordinates, sign consistency on
/// saturated ones (`∇f_i ≤ 0` at +1, `∇f_i ≥ 0` at −1).
pub fn kkt_residual(z: &[f64], grad: &[f64], tol: f64) -> f64 {
    z.iter().zip(grad).fold(0.0, |m, (zi, gi)| {
        let v = if zi.abs() < 1.0 - tol {
            gi.abs()
        } else if *zi > 0.0 {
            gi.max(0.0)
        } else {
            (-gi).max(0.0)
        };
        m.max(v)
    })
}

fn finish(problem: &Problem, z: Vec<f64>, tol: f64, iterations: usize) -> BoxQpSolution {
    let (_, g) = problem.eval(&z);
    BoxQpSolution {
        objective: problem.objective(&z),
        active_set: z.iter().map(|x| Bound::classify(*x)).collect(),
        kkt_residual: kkt_residual(&z, &g, tol),
        iterations,
        z_star: z,
    }
}

pub fn solve_zstar(
    mixture: &GaussianMixture,
    threat: &ThreatModel,
    tol: f64,
) -> Result<BoxQpSolution> {
    solve_zstar_with(mixture, threat, &BoxQpOptions::with_tol(tol))
}

pub fn solve_zstar_with(
    mixture: &GaussianMixture,
    threat: &ThreatModel,
    opts: &BoxQpOptions,
) -> Result<BoxQpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let d = mixture.dim();
    let eps = threat.epsilon();
    let problem = Problem { mixture, eps };
    let mu = mixture.mu();

    if eps == 0.0 {
        // every z is optimal; zero keeps w_adv identical to w_nat
        return Ok(finish(&problem, vec![0.0; d], opts.tol, 0));
    }
    if eps >= norm_inf(mu) {
        let z = mu.iter().map(|m| clamp_unit(m / eps)).collect();
        return Ok(finish(&problem, z, opts.tol, 0));
    }

    let mut z: Vec<f64> = match &opts.start {
        Some(s) => {
            if s.len() != d {
                return Err(Error::Shape(format!("start has length {}, expected {d}", s.len())));
            }
            s.iter().map(|x| clamp_unit(*x)).collect()
        }
        None => mu.iter().map(|m| clamp_unit(m / eps)).collect(),
    };

    let lipschitz = 2.0 * eps * eps * numerics::spd_lambda_max(mixture.factor());
    let step = 1.0 / lipschitz;

    if opts.accelerated {
        accelerated_loop(&problem, z, step, opts)
    } else {
        for it in 0..opts.max_iter {
            let (_, g) = problem.eval(&z);
            if projected_gradient_norm(&z, &g) <= opts.tol {
                return Ok(finish(&problem, z, opts.tol, it));
            }
            for (zi, gi) in z.iter_mut().zip(&g) {
                *zi = clamp_unit(*zi - step * gi);
            }
        }
        let (_, g) = problem.eval(&z);
        let residual = projected_gradient_norm(&z, &g);
        if residual <= opts.tol {
            return Ok(finish(&problem, z, opts.tol, opts.max_iter));
        }
        Err(Error::NonConvergence {
            best: z,
            residual,
            iterations: opts.max_iter,
        })
    }
}

fn accelerated_loop(
    problem: &Problem,
    mut z: Vec<f64>,
    step: f64,
    opts: &BoxQpOptions,
) -> Result<BoxQpSolution> {
    let mut y = z.clone();
    let mut t = 1.0_f64;
    let mut f_prev = problem.eval(&z).0;
    for it in 0..opts.max_iter {
        let (_, gz) = problem.eval(&z);
        if projected_gradient_norm(&z, &gz) <= opts.tol {
            return Ok(finish(problem, z, opts.tol, it));
        }
        let (_, gy) = problem.eval(&y);
        let z_next: Vec<f64> = y
            .iter()
            .zip(&gy)
            .map(|(yi, gi)| clamp_unit(yi - step * gi))
            .collect();
        let f_next = problem.eval(&z_next).0;
        if f_next > f_prev {
            // restart momentum from the current iterate
            t = 1.0;
            y = z.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = z_next
            .iter()
            .zip(&z)
            .map(|(a, b)| clamp_unit(a + beta * (a - b)))
            .collect();
        z = z_next;
        t = t_next;
        f_prev = f_next;
    }
    let (_, g) = problem.eval(&z);
    let residual = projected_gradient_norm(&z, &g);
    if residual <= opts.tol {
        return Ok(finish(problem, z, opts.tol, opts.max_iter));
    }
    Err(Error::NonConvergence {
        best: z,
        residual,
        iterations: opts.max_iter,
    })
}

/// Exact minimizer for diagonal Σ: the objective separates, giving
/// `z_i = clamp(μ_i/ε, −1, 1)` independently of the variances.
pub fn diagonal_zstar(mu: &[f64], sigma_diag: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if mu.len() != sigma_diag.len() {
        return Err(Error::Shape(format!(
            "mu has length {} but sigma_diag has {}",
            mu.len(),
            sigma_diag.len()
        )));
    }
    if let Some(v) = sigma_diag.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("variances must be positive, got {v}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if epsilon == 0.0 {
        return Ok(vec![0.0; mu.len()]);
    }
    Ok(mu.iter().map(|m| clamp_unit(m / epsilon)).collect())
}

/// Exhaustive search over a uniform grid on `[−1, 1]^d`.
pub fn grid_oracle_zstar(
    mixture: &GaussianMixture,
    threat: &ThreatModel,
    grid_points_per_axis: usize,
) -> Result<Vec<f64>> {
    let d = mixture.dim();
    if d > GRID_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "grid oracle supports dimension ≤ {GRID_MAX_DIM}, got {d}"
        )));
    }
    if grid_points_per_axis < 2 {
        return Err(Error::Domain("grid needs at least two points per axis".into()));
    }
    let n = grid_points_per_axis;
    let axis: Vec<f64> = (0..n)
        .map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64)
        .collect();

    // explicit Σ⁻¹ so each grid point costs one quadratic form
    let mut prec = vec![0.0; d * d];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let col = mixture.sigma_inv(&e)?;
        for i in 0..d {
            prec[i * d + j] = col[i];
        }
    }
    let mu = mixture.mu();
    let eps = threat.epsilon();
    let total = n.pow(d as u32);

    let best = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let mut r = [0.0; GRID_MAX_DIM];
            for i in 0..d {
                r[i] = mu[i] - eps * axis[rem % n];
                rem /= n;
            }
            let mut f = 0.0;
            for i in 0..d {
                for j in 0..d {
                    f += r[i] * prec[i * d + j] * r[j];
                }
            }
            (f, idx)
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );

    let mut rem = best.1;
    Ok((0..d)
        .map(|_| {
            let v = axis[rem % n];
            rem /= n;
            v
        })
        .collect())
}

/// `f(z) = ‖μ − εz‖²_{Σ⁻¹}` for arbitrary z.
pub fn objective_at(mixture: &GaussianMixture, threat: &ThreatModel, z: &[f64]) -> Result<f64> {
    if z.len() != mixture.dim() {
        return Err(Error::Shape(format!("z has length {}, expected {}", z.len(), mixture.dim())));
    }
    let problem = Problem {
        mixture,
        eps: threat.epsilon(),
    };
    Ok(problem.objective(z))
}

/// An ε interval across which the active set of z* changes.
#[derive(Debug, Clone, Serialize)]
pub struct Breakpoint {
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub before: ActiveSet,
    pub after: ActiveSet,
    pub description: String,
}

impl Breakpoint {
    pub fn contains(&self, eps: f64) -> bool {
        self.eps_lo <= eps && eps <= self.eps_hi
    }
}

fn check_eps_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() {
        return Err(Error::Domain("epsilon grid is empty".into()));
    }
    if eps_grid.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::Domain("epsilon grid values must be finite and nonnegative".into()));
    }
    if eps_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("epsilon grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Solves the QP at every grid value; results are in grid order.
pub fn solve_eps_grid(
    mixture: &GaussianMixture,
    eps_grid: &[f64],
    tol: f64,
) -> Result<Vec<BoxQpSolution>> {
    check_eps_grid(eps_grid)?;
    eps_grid
        .par_iter()
        .map(|e| solve_zstar(mixture, &ThreatModel::new(*e)?, tol))
        .collect()
}

pub fn detect_breakpoints(
    mixture: &GaussianMixture,
    eps_grid: &[f64],
    tol: f64,
) -> Result<Vec<Breakpoint>> {
    let solutions = solve_eps_grid(mixture, eps_grid, tol)?;
    Ok(breakpoints_from(eps_grid, &solutions))
}

/// Brackets between consecutive grid values whose active sets differ.
///
/// ε = 0 carries no active-set information (every z is optimal there) and
/// is skipped.
pub fn breakpoints_from(eps_grid: &[f64], solutions: &[BoxQpSolution]) -> Vec<Breakpoint> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, &ActiveSet)> = None;
    for (eps, sol) in eps_grid.iter().zip(solutions) {
        if *eps == 0.0 {
            continue;
        }
        if let Some((e0, set0)) = prev {
            if *set0 != sol.active_set {
                out.push(Breakpoint {
                    eps_lo: e0,
                    eps_hi: *eps,
                    before: set0.clone(),
                    after: sol.active_set.clone(),
                    description: describe_change(set0, &sol.active_set),
                });
            }
        }
        prev = Some((*eps, &sol.active_set));
    }
    out
}

fn describe_change(before: &[Bound], after: &[Bound]) -> String {
    let name = |b: Bound| match b {
        Bound::Lower => "lower",
        Bound::Interior => "interior",
        Bound::Upper => "upper",
    };
    before
        .iter()
        .zip(after)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, (a, b))| format!("z{}: {} -> {}", i + 1, name(*a), name(*b)))
        .collect::<Vec<_>>()
        .join("; ")
}
