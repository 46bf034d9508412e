//! Built-in configurations reproducing the reference figures.

use std::path::PathBuf;

use super::config::{ExperimentConfig, Grid, SweepKind};
use crate::numerics::Matrix;

fn rows(r: &[&[f64]]) -> Matrix {
    Matrix::from_rows(r.iter().map(|x| x.to_vec()).collect()).expect("preset matrices are square")
}

fn range(start: f64, stop: f64, step: f64) -> Option<Grid> {
    Some(Grid::Range { start, stop, step })
}

fn base(name: &str, sweep: SweepKind, mu: &[f64], sigma: Matrix) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        sweep,
        mu: mu.to_vec(),
        sigma,
        pi_plus: None,
        pi_grid: None,
        epsilon: None,
        eps_grid: None,
        out_dir: PathBuf::from("out"),
        svg: true,
        seed: 0,
        tol: crate::boxqp::DEFAULT_TOL,
        finite_sample: None,
    }
}

/// Prior grid shared by the prior sweeps.
fn prior_axis() -> Option<Grid> {
    range(0.02, 0.98, 0.001)
}

pub fn presets() -> Vec<ExperimentConfig> {
    let diag = || Matrix::scaled_identity(3, 3.0);
    let diag_mu = [1.5, 2.0, 4.0];

    let mut fig1 = base("fig1", SweepKind::PiSweep, &diag_mu, diag());
    fig1.pi_grid = prior_axis();
    fig1.eps_grid = Some(Grid::List(vec![1.0, 1.5, 2.0, 2.5]));

    let mut fig2 = base(
        "fig2",
        SweepKind::PiSweep,
        &[2.0, 1.0, 3.0],
        rows(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.5], &[1.0, 1.5, 3.0]]),
    );
    fig2.pi_grid = prior_axis();
    fig2.eps_grid = Some(Grid::List(vec![0.5, 1.0, 1.5, 2.0, 2.5]));

    let mut fig3 = base("fig3", SweepKind::PiSweep, &diag_mu, diag());
    fig3.pi_grid = prior_axis();
    fig3.eps_grid = Some(Grid::List(vec![0.5, 1.0, 1.5, 2.0, 2.5]));

    let mut fig4a = base("fig4a", SweepKind::Bounds, &diag_mu, diag());
    fig4a.eps_grid = range(0.0, 1.48, 0.02);

    let mut fig4b = base(
        "fig4b",
        SweepKind::Bounds,
        &[1.0, 1.0, 1.5],
        rows(&[&[2.0, 0.5, 1.0], &[0.5, 2.0, 1.5], &[1.0, 1.5, 4.0]]),
    );
    fig4b.eps_grid = range(0.0, 0.55, 0.01);

    let mut fig5 = base(
        "fig5",
        SweepKind::Breakpoints,
        &[1.0, 2.0, 3.0, 3.4],
        rows(&[
            &[3.0, 1.0, 1.0, 0.0],
            &[1.0, 3.0, 0.0, 0.0],
            &[1.0, 0.0, 3.0, 1.0],
            &[0.0, 0.0, 1.0, 3.0],
        ]),
    );
    fig5.eps_grid = range(0.0, 3.35, 0.05);

    let mut fig6 = base(
        "fig6",
        SweepKind::EpsSweep,
        &[1.0, 2.0, 3.0],
        rows(&[&[3.0, 1.0, 1.0], &[1.0, 3.0, 0.0], &[1.0, 0.0, 3.0]]),
    );
    fig6.pi_grid = Some(Grid::List(vec![0.5, 0.6, 0.7, 0.8]));
    fig6.eps_grid = range(0.0, 2.95, 0.05);

    vec![fig1, fig2, fig3, fig4a, fig4b, fig5, fig6]
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    presets().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_parameters() {
        let names: Vec<String> = presets().into_iter().map(|p| p.name).collect();
        assert_eq!(names, ["fig1", "fig2", "fig3", "fig4a", "fig4b", "fig5", "fig6"]);

        let f2 = preset("fig2").unwrap();
        assert_eq!(f2.mu, vec![2.0, 1.0, 3.0]);
        assert_eq!(f2.sigma.rows(), vec![vec![2.0, 1.0, 1.0], vec![1.0, 2.0, 1.5], vec![1.0, 1.5, 3.0]]);
        let f4b = preset("fig4b").unwrap();
        assert_eq!(f4b.mu, vec![1.0, 1.0, 1.5]);
        assert_eq!(f4b.sigma.rows(), vec![vec![2.0, 0.5, 1.0], vec![0.5, 2.0, 1.5], vec![1.0, 1.5, 4.0]]);
        let f6 = preset("fig6").unwrap();
        assert_eq!(f6.mu, vec![1.0, 2.0, 3.0]);
        assert_eq!(f6.pi_grid, Some(Grid::List(vec![0.5, 0.6, 0.7, 0.8])));
        assert!(preset("fig9").is_none());

        for p in presets() {
            p.resolve().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }
}
