use std::path::Path;
use std::process::{Command, Output};

use robustmix::cli::config::SweepKind;
use robustmix::cli::run::{plot_specs, replot};

fn robustmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustmix"))
        .args(args)
        .env("ROBUSTMIX_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn lists_presets() {
    let o = robustmix(&["presets"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    for name in ["fig1", "fig2", "fig3", "fig4a", "fig4b", "fig5", "fig6"] {
        assert!(out.contains(name));
    }
}

#[test]
fn risk_json_matches_library() {
    let o = robustmix(&["risk", "--mu", "1.5,2,4", "--sigma", "3I3", "--eps", "1.5", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bayes = v["nat_risk_bayes"].as_f64().unwrap();
    assert!((bayes - 3.231_121_245_907_734e-3).abs() < 1e-15);
    assert!(v["gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    // bad covariance (not SPD)
    let o = robustmix(&["risk", "--mu", "1,1", "--sigma", "1,2;2,1", "--eps", "0.5"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    // unknown preset
    assert_eq!(code(&robustmix(&["reproduce", "fig9"])), 2);
    // outside the validity range of the bounds
    assert_eq!(code(&robustmix(&["bounds", "--mu", "1.5,2,4", "--sigma", "3I3", "--eps", "2"])), 4);
    // bound constants are defined for balanced classes only
    assert_eq!(code(&robustmix(&["bounds", "--mu", "1.5,2,4", "--sigma", "3I3", "--eps", "0.5", "--pi", "0.7"])), 4);
    // missing config file
    assert_eq!(code(&robustmix(&["run", "--config", "/nonexistent/robustmix.json"])), 2);
}

#[test]
fn rejects_malformed_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name":"x","sweep":"pi_sweep","mu":[1],"sigma":[[1]],"colour":1}"#).unwrap();
    assert_eq!(code(&robustmix(&["run", "--config", path.to_str().unwrap()])), 2);
    std::fs::write(&path, r#"{"name":"x","sweep":"pi_sweep","mu":[1],"sigma":[[1]]}"#).unwrap();
    assert_eq!(code(&robustmix(&["run", "--config", path.to_str().unwrap()])), 2);
}

#[test]
fn unwritable_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let o = robustmix(&["reproduce", "fig4a", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn svg_is_reproducible_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = robustmix(&["reproduce", "fig4a", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = out.join("fig4a_bounds.csv");
    let svg = std::fs::read_to_string(out.join("fig4a_bounds_bounds.svg")).unwrap();
    let (_, spec) = plot_specs(SweepKind::Bounds, 3, true).into_iter().find(|(k, _)| k == "bounds").unwrap();
    assert_eq!(replot(&csv, &spec).unwrap(), svg);

    let text = std::fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "epsilon,gap,lower_bound,phi_difference,precise,exponential");
    assert_eq!(text.lines().count(), 1 + 75);
}

#[test]
fn overrides_and_no_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = robustmix(&[
        "reproduce", "fig6", "--out", out.to_str().unwrap(), "--no-svg", "--pi", "0.5,0.9", "--eps", "0,0.5,1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 1);
    let text = std::fs::read_to_string(Path::new(out).join("fig6_eps_sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn finite_sample_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fs.json");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"name":"fs","sweep":"finite_sample","mu":[1,-1.2,0.9],
               "sigma":[[0.25,0,0],[0,0.25,0],[0,0,0.25]],"epsilon":0.5,"out_dir":{:?},
               "finite_sample":{{"p":"inf","W":1,"clip":2,"n_grid":[50,400],"trials":50}}}}"#,
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = robustmix(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("fs_finite_sample.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("pinf_equal"));
}
