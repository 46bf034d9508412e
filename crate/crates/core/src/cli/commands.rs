//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::config::{parse_matrix, parse_vector, ExperimentConfig, Overrides};
use super::presets::{preset, presets};
use super::run::{format_table, run};
use crate::analysis::{gap_bound_terms, gap_lower_bound, gap_regime, gap_upper_bound, risk_regime, UpperBoundForm};
use crate::classifiers::bayes_classifier;
use crate::error::{Error, Result};
use crate::model::{GaussianMixture, ThreatModel};
use crate::numerics::Matrix;
use crate::risk::optimal_risks;

#[derive(Debug, Parser)]
#[command(name = "robustmix", version, about = "Standard and adversarially robust linear classifiers for Gaussian mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run one of the built-in figure configurations.
    Reproduce {
        preset: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// List the built-in configurations.
    Presets,
    /// Solve for z* and print both optimal classifiers.
    Solve(PointArgs),
    /// Natural and adversarial risks of both optimal classifiers.
    Risk(PointArgs),
    /// Closed-form regime labels.
    Regime(PointArgs),
    /// Gap bound constants and bound values at one budget.
    Bounds(PointArgs),
}

/// Comma-separated or JSON list of numbers, parsed as a single argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Floats(pub Vec<f64>);

fn vector_arg(s: &str) -> std::result::Result<Floats, String> {
    parse_vector(s).map(Floats).map_err(|e| e.to_string())
}

fn matrix_arg(s: &str) -> std::result::Result<Matrix, String> {
    parse_matrix(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args, Default)]
pub struct OverrideArgs {
    #[arg(long, value_parser = vector_arg)]
    pub mu: Option<Floats>,
    /// Covariance as "a,b;c,d", a JSON array of rows, or "<s>I<d>".
    #[arg(long, value_parser = matrix_arg)]
    pub sigma: Option<Matrix>,
    /// Prior value or comma-separated list.
    #[arg(long, value_parser = vector_arg)]
    pub pi: Option<Floats>,
    /// Budget value or comma-separated list.
    #[arg(long, value_parser = vector_arg)]
    pub eps: Option<Floats>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_svg: bool,
}

impl OverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            mu: self.mu.clone().map(|f| f.0),
            sigma: self.sigma.clone(),
            pi: self.pi.clone().map(|f| f.0),
            eps: self.eps.clone().map(|f| f.0),
            tol: self.tol,
            seed: self.seed,
            out_dir: self.out.clone(),
            no_svg: self.no_svg,
        }
    }
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[arg(long, value_parser = vector_arg)]
    pub mu: Floats,
    #[arg(long, value_parser = matrix_arg)]
    pub sigma: Matrix,
    #[arg(long, default_value_t = 0.5)]
    pub pi: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = crate::boxqp::DEFAULT_TOL)]
    pub tol: f64,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

impl PointArgs {
    fn inputs(&self) -> Result<(GaussianMixture, ThreatModel)> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        Ok((
            GaussianMixture::new(self.mu.0.clone(), self.sigma.clone(), self.pi)?,
            ThreatModel::new(self.eps)?,
        ))
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

fn emit(json: bool, value: serde_json::Value, rows: Vec<(&str, String)>) {
    if json {
        println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
    } else {
        let rows: Vec<Vec<String>> = rows.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect();
        print!("{}", format_table(&["quantity", "value"], &rows));
    }
}

fn run_config(mut config: ExperimentConfig, overrides: &OverrideArgs) -> Result<()> {
    config.apply_overrides(&overrides.overrides());
    let report = run(&config)?;
    print!("{}", report.summary);
    println!("wrote {} file(s) to {}", report.files.len(), config.out_dir.display());
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => run_config(ExperimentConfig::load(&config)?, &overrides),
        Command::Reproduce { preset: name, overrides } => {
            let config = preset(&name).ok_or_else(|| {
                let known: Vec<String> = presets().into_iter().map(|p| p.name).collect();
                Error::Config(format!("unknown preset '{name}' (available: {})", known.join(", ")))
            })?;
            run_config(config, &overrides)
        }
        Command::Presets => {
            let rows: Vec<Vec<String>> = presets()
                .into_iter()
                .map(|p| vec![p.name.clone(), p.sweep.as_str().to_string(), format!("{:?}", p.mu)])
                .collect();
            print!("{}", format_table(&["name", "sweep", "mu"], &rows));
            Ok(())
        }
        Command::Solve(a) => {
            let (m, t) = a.inputs()?;
            let r = optimal_risks(&m, &t, a.tol)?;
            let bayes = bayes_classifier(&m);
            emit(
                a.json,
                json!({ "z_star": r.solution.z_star, "objective": r.solution.objective,
                        "kkt_residual": r.solution.kkt_residual, "iterations": r.solution.iterations,
                        "bayes": bayes, "robust": r.robust }),
                vec![
                    ("z_star", fmt_vec(&r.solution.z_star)),
                    ("objective", format!("{:.12e}", r.solution.objective)),
                    ("kkt_residual", format!("{:.3e}", r.solution.kkt_residual)),
                    ("bayes_w", fmt_vec(&bayes.w)),
                    ("bayes_w0", format!("{:.10}", bayes.w0)),
                    ("robust_w", fmt_vec(&r.robust.w)),
                    ("robust_w0", format!("{:.10}", r.robust.w0)),
                ],
            );
            Ok(())
        }
        Command::Risk(a) => {
            let (m, t) = a.inputs()?;
            let r = optimal_risks(&m, &t, a.tol)?;
            emit(
                a.json,
                json!({ "nat_risk_bayes": r.nat_risk_bayes, "nat_risk_adv": r.nat_risk_adv,
                        "adv_risk_adv": r.adv_risk_adv, "gap": r.gap }),
                vec![
                    ("nat_risk_bayes", format!("{:.12e}", r.nat_risk_bayes)),
                    ("nat_risk_adv", format!("{:.12e}", r.nat_risk_adv)),
                    ("adv_risk_adv", format!("{:.12e}", r.adv_risk_adv)),
                    ("gap", format!("{:.12e}", r.gap)),
                ],
            );
            Ok(())
        }
        Command::Regime(a) => {
            let (m, t) = a.inputs()?;
            let risk = risk_regime(&m, &t, a.tol)?;
            let gap = gap_regime(&m, &t, a.tol)?;
            emit(
                a.json,
                json!({ "risk": risk, "gap": gap }),
                vec![
                    ("c", format!("{:.10}", risk.params.c)),
                    ("d", format!("{:.10}", risk.params.d)),
                    ("c/d^2", format!("{:.10}", risk.params.ratio)),
                    ("risk_regime", format!("{}{}", risk.label, if risk.marginal { " (marginal)" } else { "" })),
                    ("gap_lhs", format!("{:.10e}", gap.lhs)),
                    ("gap_rhs", format!("{:.10e}", gap.rhs)),
                    ("gap_regime", format!("{}{}", gap.label, if gap.marginal { " (marginal)" } else { "" })),
                ],
            );
            Ok(())
        }
        Command::Bounds(a) => {
            let (m, t) = a.inputs()?;
            let terms = gap_bound_terms(&m)?;
            let gap = crate::risk::gap(&m, &t, a.tol)?;
            let phi = gap_upper_bound(&m, &t, UpperBoundForm::PhiDifference)?;
            let precise = gap_upper_bound(&m, &t, UpperBoundForm::Precise)?;
            let exp = gap_upper_bound(&m, &t, UpperBoundForm::Exponential)?;
            let lower = if m.sigma().is_diagonal(1e-12) { Some(gap_lower_bound(&m, &t)?) } else { None };
            let mut rows = vec![
                ("C", format!("{:.10e}", terms.c_sigma_mu)),
                ("eps_limit_A", format!("{:.10}", terms.eps_limit_a)),
                ("eps_limit_B", format!("{:.10}", terms.eps_limit_b)),
                ("gap", format!("{gap:.10e}")),
            ];
            if let Some(l) = lower {
                rows.push(("lower_bound", format!("{l:.10e}")));
            }
            rows.extend([
                ("phi_difference", format!("{phi:.10e}")),
                ("precise", format!("{precise:.10e}")),
                ("exponential", format!("{exp:.10e}")),
            ]);
            emit(
                a.json,
                json!({ "terms": terms, "gap": gap, "lower_bound": lower, "phi_difference": phi,
                        "precise": precise, "exponential": exp }),
                rows,
            );
            Ok(())
        }
    }
}
