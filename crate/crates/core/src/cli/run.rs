//! Sweep execution and CSV/SVG emission.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Resolved, SweepKind};
use super::plot::{plot_from_csv, render_svg, CsvData, PlotSpec};
use crate::analysis::{
    gap_bound_terms, gap_lower_bound, gap_regime, gap_upper_bound, risk_regime, summarize_extrema,
    verify_regime_numerically, RegimeTarget, UpperBoundForm,
};
use crate::boxqp::{breakpoints_from, format_active_set, solve_eps_grid};
use crate::classifiers::{adversarial_classifier, bayes_classifier};
use crate::error::{Error, Result};
use crate::linearloss::HoeffdingCase;
use crate::model::{nontrivial_budget, LinearClassifier, ThreatModel};
use crate::montecarlo::{finite_sample_trials, RngSpec};
use crate::risk::{adversarial_risk, natural_risk, optimal_risks};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    for row in &table.rows {
        if row.len() != table.header.len() {
            return Err(Error::Invariant("CSV row width differs from header".into()));
        }
        if let Some(bad) = row.iter().find_map(|c| match c {
            Cell::Num(v) if !v.is_finite() => Some(*v),
            _ => None,
        }) {
            return Err(Error::Invariant(format!("non-finite value {bad} in {}", path.display())));
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table with left-aligned columns.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.iter().map(|s| s.to_string()).collect());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.clone()));
        out.push('\n');
    }
    out
}

fn g(v: f64) -> String {
    format!("{v:.6e}")
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Emitter<'a> {
    config: &'a ExperimentConfig,
    report: RunReport,
}

impl Emitter<'_> {
    /// Writes `<name>_<suffix>.csv` and, when enabled, one SVG per plot
    /// spec, rendered from the CSV as read back from disk.
    fn emit(&mut self, suffix: &str, table: &Table, plots: &[(&str, PlotSpec)]) -> Result<()> {
        let stem = format!("{}_{suffix}", self.config.name);
        let csv_path = self.config.out_dir.join(format!("{stem}.csv"));
        write_csv(&csv_path, table)?;
        self.report.files.push(csv_path.clone());
        if self.config.svg && !plots.is_empty() {
            let data = CsvData::read(&csv_path)?;
            for (name, spec) in plots {
                let svg_path = self.config.out_dir.join(format!("{stem}_{name}.svg"));
                std::fs::write(&svg_path, render_svg(&plot_from_csv(&data, spec)?))?;
                self.report.files.push(svg_path);
            }
        }
        Ok(())
    }

    fn section(&mut self, title: &str, header: &[&str], rows: &[Vec<String>]) {
        self.report.summary.push_str(&format!("{title}\n"));
        self.report.summary.push_str(&format_table(header, rows));
    }
}

fn spec(title: &str, x: &str, ys: &[&str], group: Option<&str>, y_label: &str) -> PlotSpec {
    PlotSpec {
        title: title.into(),
        x: x.into(),
        ys: ys.iter().map(|s| s.to_string()).collect(),
        group: group.map(str::to_owned),
        y_label: y_label.into(),
    }
}

/// SVG file for a CSV written by [`run`], regenerated from the CSV alone.
pub fn replot(csv_path: &Path, plot: &PlotSpec) -> Result<String> {
    Ok(render_svg(&plot_from_csv(&CsvData::read(csv_path)?, plot)?))
}

/// Plot specs used by [`run`] for a sweep's main CSV, keyed by file suffix.
pub fn plot_specs(sweep: SweepKind, dim: usize, with_lower: bool) -> Vec<(String, PlotSpec)> {
    let own = |v: Vec<(&str, PlotSpec)>| v.into_iter().map(|(k, s)| (k.to_string(), s)).collect();
    match sweep {
        SweepKind::PiSweep => own(vec![
            ("nat_risk_adv", spec("Natural risk of the robust classifier", "pi_plus", &["nat_risk_adv"], Some("epsilon"), "risk")),
            ("nat_risk_bayes", spec("Natural risk of the Bayes classifier", "pi_plus", &["nat_risk_bayes"], Some("epsilon"), "risk")),
            ("gap", spec("Natural risk gap", "pi_plus", &["gap"], Some("epsilon"), "gap")),
        ]),
        SweepKind::EpsSweep => own(vec![
            ("gap", spec("Natural risk gap", "epsilon", &["gap"], Some("pi_plus"), "gap")),
            ("nat_risk_adv", spec("Natural risk of the robust classifier", "epsilon", &["nat_risk_adv"], Some("pi_plus"), "risk")),
        ]),
        SweepKind::Regime => own(vec![("ratio", spec("c / d^2", "epsilon", &["ratio"], None, "c/d^2"))]),
        SweepKind::Bounds => {
            let mut ys = vec!["gap"];
            if with_lower {
                ys.push("lower_bound");
            }
            ys.extend(["phi_difference", "precise", "exponential"]);
            own(vec![("bounds", spec("Gap and bounds", "epsilon", &ys, None, "gap"))])
        }
        SweepKind::FiniteSample => own(vec![(
            "frequency",
            spec("Event frequency and concentration bound", "n", &["frequency", "bound"], None, "probability"),
        )]),
        SweepKind::Breakpoints => {
            let z: Vec<String> = (1..=dim).map(|i| format!("z_{i}")).collect();
            let zr: Vec<&str> = z.iter().map(String::as_str).collect();
            vec![
                ("gap".to_string(), spec("Natural risk gap", "epsilon", &["gap"], None, "gap")),
                ("z".to_string(), spec("Box QP solution", "epsilon", &zr, None, "z*")),
            ]
        }
    }
}

/// Executes a config: writes CSV and SVG files into `out_dir` and returns
/// the list of files with a printable summary.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let res = config.resolve()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| {
        Error::Config(format!("output directory {} is not writable: {e}", config.out_dir.display()))
    })?;
    let mut em = Emitter {
        config,
        report: RunReport::default(),
    };
    em.report.summary = format!("== {} ({}) ==\n", config.name, config.sweep.as_str());
    let with_lower = config.sweep == SweepKind::Bounds && res.template.sigma().is_diagonal(1e-12);
    let plots = plot_specs(config.sweep, res.template.dim(), with_lower);
    let plots: Vec<(&str, PlotSpec)> = plots.iter().map(|(k, s)| (k.as_str(), s.clone())).collect();
    match config.sweep {
        SweepKind::PiSweep => pi_sweep(&mut em, &res, &plots)?,
        SweepKind::EpsSweep => eps_sweep(&mut em, &res, &plots)?,
        SweepKind::Regime => regime_sweep(&mut em, &res, &plots)?,
        SweepKind::Bounds => bounds_sweep(&mut em, &res, &plots, with_lower)?,
        SweepKind::FiniteSample => finite_sample_sweep(&mut em, &res, &plots)?,
        SweepKind::Breakpoints => breakpoint_sweep(&mut em, &res, &plots)?,
    }
    Ok(em.report)
}

fn pi_sweep(em: &mut Emitter, res: &Resolved, plots: &[(&str, PlotSpec)]) -> Result<()> {
    let tol = em.config.tol;
    let mut table = Table::new(&[
        "epsilon", "pi_plus", "nat_risk_adv", "nat_risk_bayes", "adv_risk_adv", "gap", "regime_label", "kkt_residual",
    ]);
    let mut summary = Vec::new();
    let bayes_w = bayes_classifier(&res.template).w;
    for &eps in &res.budgets {
        let threat = ThreatModel::new(eps)?;
        let robust = adversarial_classifier(&res.template, &threat, tol)?;
        let labels = if nontrivial_budget(&res.template, &threat) {
            let r = risk_regime(&res.template, &threat, tol)?;
            let gl = gap_regime(&res.template, &threat, tol)?;
            (r.label.to_string(), gl.label.to_string())
        } else {
            ("trivial".to_string(), "trivial".to_string())
        };
        let points = res
            .priors
            .par_iter()
            .map(|&pi| {
                let m = res.template.with_prior(pi)?;
                let bias = m.log_odds_bias();
                let adv = LinearClassifier::new(robust.classifier.w.clone(), bias);
                let rep = adversarial_risk(&adv, &m, &threat)?;
                let nat = natural_risk(&LinearClassifier::new(bayes_w.clone(), bias), &m)?;
                Ok((rep.natural_risk, nat, rep.adversarial_risk, (rep.natural_risk - nat).max(0.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        for (pi, p) in res.priors.iter().zip(&points) {
            table.rows.push(vec![
                num(eps),
                num(*pi),
                num(p.0),
                num(p.1),
                num(p.2),
                num(p.3),
                text(labels.0.clone()),
                num(robust.solution.kkt_residual),
            ]);
        }
        let risk_shape = summarize_extrema(&res.priors, points.iter().map(|p| p.0).collect());
        let gap_shape = summarize_extrema(&res.priors, points.iter().map(|p| p.3).collect());
        summary.push(vec![
            format!("{eps}"),
            labels.0,
            risk_shape.interior_maxima.len().to_string(),
            format!("{:?}", risk_shape.center),
            labels.1,
            gap_shape.interior_maxima.len().to_string(),
            format!("{:?}", gap_shape.center),
        ]);
    }
    em.emit("pi_sweep", &table, plots)?;
    em.section(
        "natural risk of the robust classifier and gap against pi_plus",
        &["epsilon", "risk_regime", "risk_maxima", "risk_center", "gap_regime", "gap_maxima", "gap_center"],
        &summary,
    );
    Ok(())
}

fn eps_sweep(em: &mut Emitter, res: &Resolved, plots: &[(&str, PlotSpec)]) -> Result<()> {
    let tol = em.config.tol;
    let mut table = Table::new(&[
        "pi_plus", "epsilon", "nat_risk_adv", "nat_risk_bayes", "adv_risk_adv", "gap", "kkt_residual", "active_set",
    ]);
    let mut summary = Vec::new();
    for &pi in &res.priors {
        let m = res.template.with_prior(pi)?;
        let points = res
            .budgets
            .par_iter()
            .map(|&e| optimal_risks(&m, &ThreatModel::new(e)?, tol))
            .collect::<Result<Vec<_>>>()?;
        let mut best = (0.0, 0.0);
        for (eps, p) in res.budgets.iter().zip(&points) {
            if p.gap > best.1 {
                best = (*eps, p.gap);
            }
            table.rows.push(vec![
                num(pi),
                num(*eps),
                num(p.nat_risk_adv),
                num(p.nat_risk_bayes),
                num(p.adv_risk_adv),
                num(p.gap),
                num(p.solution.kkt_residual),
                text(format_active_set(&p.solution.active_set)),
            ]);
        }
        let last = points.last().map_or(0.0, |p| p.gap);
        summary.push(vec![format!("{pi}"), g(best.1), format!("{}", best.0), g(last)]);
    }
    em.emit("eps_sweep", &table, plots)?;
    em.section("gap against epsilon", &["pi_plus", "max_gap", "argmax_eps", "final_gap"], &summary);
    Ok(())
}

fn regime_sweep(em: &mut Emitter, res: &Resolved, plots: &[(&str, PlotSpec)]) -> Result<()> {
    let tol = em.config.tol;
    let mut table = Table::new(&[
        "epsilon", "c", "d", "ratio", "risk_label", "risk_marginal", "gap_lhs", "gap_rhs", "gap_label",
        "gap_marginal", "risk_maxima", "risk_center", "gap_maxima", "gap_center", "consistent", "kkt_residual",
    ]);
    let mut summary = Vec::new();
    let mut skipped = Vec::new();
    for &eps in &res.budgets {
        let threat = ThreatModel::new(eps)?;
        if !nontrivial_budget(&res.template, &threat) {
            skipped.push(eps);
            continue;
        }
        let risk = risk_regime(&res.template, &threat, tol)?;
        let gap = gap_regime(&res.template, &threat, tol)?;
        let vr = verify_regime_numerically(&res.template, &threat, &res.priors, RegimeTarget::Risk, tol)?;
        let vg = verify_regime_numerically(&res.template, &threat, &res.priors, RegimeTarget::Gap, tol)?;
        // On the regime boundary the grid cannot resolve the center shape.
        let consistent = if risk.marginal || gap.marginal {
            "marginal".to_string()
        } else {
            (vr.observed_label() == Some(risk.label) && (eps == 0.0 || vg.observed_label() == Some(gap.label)))
                .to_string()
        };
        let p = risk.params;
        table.rows.push(vec![
            num(eps),
            num(p.c),
            num(p.d),
            num(p.ratio),
            text(risk.label.to_string()),
            text(risk.marginal.to_string()),
            num(gap.lhs),
            num(gap.rhs),
            text(gap.label.to_string()),
            text(gap.marginal.to_string()),
            Cell::Int(vr.interior_maxima.len() as i64),
            text(format!("{:?}", vr.center)),
            Cell::Int(vg.interior_maxima.len() as i64),
            text(format!("{:?}", vg.center)),
            text(consistent.clone()),
            num(p.kkt_residual),
        ]);
        summary.push(vec![
            format!("{eps}"),
            format!("{:.6}", p.ratio),
            risk.label.to_string(),
            gap.label.to_string(),
            vr.interior_maxima.len().to_string(),
            vg.interior_maxima.len().to_string(),
            consistent,
        ]);
    }
    em.emit("regime", &table, plots)?;
    em.section(
        "regime labels and numerically located maxima",
        &["epsilon", "c/d^2", "risk", "gap", "risk_maxima", "gap_maxima", "consistent"],
        &summary,
    );
    if !skipped.is_empty() {
        em.report
            .summary
            .push_str(&format!("skipped budgets with epsilon >= ||mu||_inf: {skipped:?}\n"));
    }
    Ok(())
}

fn bounds_sweep(em: &mut Emitter, res: &Resolved, plots: &[(&str, PlotSpec)], with_lower: bool) -> Result<()> {
    let tol = em.config.tol;
    let terms = gap_bound_terms(&res.template)?;
    let mut header = vec!["epsilon", "gap"];
    if with_lower {
        header.push("lower_bound");
    }
    header.extend(["phi_difference", "precise", "exponential"]);
    let mut table = Table::new(&header);
    let m = &res.template;
    let rows = res
        .budgets
        .par_iter()
        .map(|&e| {
            let t = ThreatModel::new(e)?;
            let lower = if with_lower { Some(gap_lower_bound(m, &t)?) } else { None };
            Ok((
                e,
                crate::risk::gap(m, &t, tol)?,
                lower,
                gap_upper_bound(m, &t, UpperBoundForm::PhiDifference)?,
                gap_upper_bound(m, &t, UpperBoundForm::Precise)?,
                gap_upper_bound(m, &t, UpperBoundForm::Exponential)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut violations = 0usize;
    for (e, gap, lower, phi, precise, exp) in &rows {
        let mut chain = vec![*gap, *phi, *precise, *exp];
        if let Some(l) = lower {
            chain.insert(0, *l);
        }
        violations += chain.windows(2).filter(|w| w[0] > w[1] + 1e-12).count();
        let mut row = vec![num(*e), num(*gap)];
        if let Some(l) = lower {
            row.push(num(*l));
        }
        row.extend([num(*phi), num(*precise), num(*exp)]);
        table.rows.push(row);
    }
    em.emit("bounds", &table, plots)?;
    em.section(
        "gap bound constants",
        &["C", "eps_limit_A", "eps_limit_B", "points", "ordering_violations"],
        &[vec![
            g(terms.c_sigma_mu),
            g(terms.eps_limit_a),
            g(terms.eps_limit_b),
            rows.len().to_string(),
            violations.to_string(),
        ]],
    );
    Ok(())
}

pub fn case_label(case: HoeffdingCase) -> String {
    match case {
        HoeffdingCase::P1Equal => "p1_equal".into(),
        HoeffdingCase::P1Gap => "p1_gap".into(),
        HoeffdingCase::PInfEqual => "pinf_equal".into(),
        HoeffdingCase::PInfGap(j) => format!("pinf_gap({j})"),
    }
}

fn finite_sample_sweep(em: &mut Emitter, res: &Resolved, plots: &[(&str, PlotSpec)]) -> Result<()> {
    let fs = res.finite_sample.as_ref().expect("resolved with the sweep");
    let eps = res.budgets[0];
    let mut table = Table::new(&[
        "n", "case", "bound", "raw_bound", "frequency", "hits", "trials", "r", "tau", "tied_maxima",
    ]);
    let mut summary = Vec::new();
    for &n in &fs.sizes {
        let out = finite_sample_trials(
            &res.template,
            &fs.constraint,
            eps,
            n,
            fs.clip,
            fs.trials,
            RngSpec::new(em.config.seed, 0),
        )?;
        let rep = &out.report;
        table.rows.push(vec![
            Cell::Int(n as i64),
            text(case_label(rep.case)),
            num(rep.bound),
            num(rep.raw_bound),
            num(out.frequency),
            Cell::Int(out.hits as i64),
            Cell::Int(out.trials as i64),
            num(rep.r),
            num(rep.tau),
            text(rep.tied_maxima.to_string()),
        ]);
        summary.push(vec![
            n.to_string(),
            case_label(rep.case),
            format!("{:.6}", rep.bound),
            format!("{:.6}", out.frequency),
            (out.frequency >= rep.bound).to_string(),
        ]);
    }
    em.emit("finite_sample", &table, plots)?;
    em.section(
        "linear-loss training against the concentration bound",
        &["n", "case", "bound", "frequency", "frequency>=bound"],
        &summary,
    );
    Ok(())
}

fn breakpoint_sweep(em: &mut Emitter, res: &Resolved, plots: &[(&str, PlotSpec)]) -> Result<()> {
    let tol = em.config.tol;
    let m = &res.template;
    let solutions = solve_eps_grid(m, &res.budgets, tol)?;
    let gaps = res
        .budgets
        .par_iter()
        .map(|&e| crate::risk::gap(m, &ThreatModel::new(e)?, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut header: Vec<String> = ["epsilon", "gap", "objective", "kkt_residual", "active_set"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=m.dim()).map(|i| format!("z_{i}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for ((eps, sol), gap) in res.budgets.iter().zip(&solutions).zip(&gaps) {
        let mut row = vec![
            num(*eps),
            num(*gap),
            num(sol.objective),
            num(sol.kkt_residual),
            text(format_active_set(&sol.active_set)),
        ];
        row.extend(sol.z_star.iter().map(|z| num(*z)));
        table.rows.push(row);
    }
    em.emit("breakpoints_curve", &table, plots)?;

    let brackets = breakpoints_from(&res.budgets, &solutions);
    let mut bt = Table::new(&["eps_lo", "eps_hi", "before", "after", "description"]);
    let mut summary = Vec::new();
    for b in &brackets {
        bt.rows.push(vec![
            num(b.eps_lo),
            num(b.eps_hi),
            text(format_active_set(&b.before)),
            text(format_active_set(&b.after)),
            text(b.description.clone()),
        ]);
        summary.push(vec![
            format!("({}, {})", b.eps_lo, b.eps_hi),
            format_active_set(&b.before),
            format_active_set(&b.after),
            b.description.clone(),
        ]);
    }
    em.emit("breakpoints", &bt, &[])?;
    em.section(
        &format!("{} active-set change(s)", brackets.len()),
        &["bracket", "before", "after", "change"],
        &summary,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rejects_non_finite() {
        let dir = std::env::temp_dir().join(format!("robustmix-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut t = Table::new(&["a"]);
        t.rows.push(vec![num(f64::NAN)]);
        assert!(matches!(write_csv(&dir.join("x.csv"), &t), Err(Error::Invariant(_))));
        t.rows = vec![vec![num(0.1)]];
        write_csv(&dir.join("x.csv"), &t).unwrap();
        let back = std::fs::read_to_string(dir.join("x.csv")).unwrap();
        assert_eq!(back, "a\n1.0000000000000001e-1\n");
        assert_eq!("1.0000000000000001e-1".parse::<f64>().unwrap(), 0.1);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn table_formatting() {
        let s = format_table(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(s, "a    bb\nxyz  1\n");
    }
}
