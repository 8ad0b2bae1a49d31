//! End-to-end tests of the `pcs-sim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[physics]
n_max = 4
m_max = 2

[distribution]
nodes = 8
samples = 20000

[spectrum]
start = 0.0
stop = 3.0
points = 7

[mask_study]
points = 5
levels = 3
"#;

fn pcs_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcs-sim"))
        .args(args)
        .env_remove("PCS_SIM_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn spectrum_is_deterministic_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let mut tables = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3"), ("c", "1")] {
        let out_dir = dir.path().join(name);
        let out = pcs_sim(&["spectrum", "--config", &config, "--out", out_dir.to_str().unwrap(), "--workers", workers, "--no-plots"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        tables.push(fs::read(out_dir.join("spectrum.csv")).unwrap());
        assert!(out_dir.join("spectrum.json").exists());
        assert!(!out_dir.join("spectrum.svg").exists());
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0], tables[2]);
    let text = String::from_utf8(tables[0].clone()).unwrap();
    assert!(text.starts_with("delta_tilde,"));
    assert_eq!(text.lines().count(), 8);
    assert!(!text.contains('\r'));
}

#[test]
fn completed_study_is_skipped_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out_arg = out_dir.to_str().unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["spectrum", "--config", &config, "--out", out_arg, "--no-plots"];
        args.extend_from_slice(extra);
        pcs_sim(&args)
    };
    assert_eq!(run(&[]).status.code(), Some(0));
    let sidecar = out_dir.join("spectrum.json");
    let stamp = fs::metadata(&sidecar).unwrap().modified().unwrap();
    let again = run(&[]);
    assert_eq!(again.status.code(), Some(0));
    assert!(stderr(&again).contains("already complete"));
    assert_eq!(fs::metadata(&sidecar).unwrap().modified().unwrap(), stamp);
    let forced = run(&["--force"]);
    assert_eq!(forced.status.code(), Some(0));
    assert!(!stderr(&forced).contains("already complete"));
    // a changed configuration is not considered complete
    let config2 = write_config(dir.path(), &SMALL.replace("points = 7", "points = 6"));
    let changed = pcs_sim(&["spectrum", "--config", &config2, "--out", out_arg, "--no-plots"]);
    assert!(!stderr(&changed).contains("already complete"));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(&sidecar).unwrap()).unwrap();
    assert_eq!(meta["status"], "complete");
    assert_eq!(meta["config"]["spectrum"]["points"], 6);
    assert!(meta["version"].is_string());
}

#[test]
fn mask_study_emits_twenty_series_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = pcs_sim(&["mask-study", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("mask_study.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header[..2], ["delta_tilde", "unmasked"]);
    assert_eq!(header.len() - 2, 20);
    assert!(header.contains(&"0_1-_drive1"));
    let svgs = fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
        .count();
    assert!(svgs >= 3);
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_pcs-sim"))
        .args(["spectrum", "--config", &config, "--no-plots"])
        .env("PCS_SIM_OUT", &out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out_dir.join("spectrum.csv").exists());
}

#[test]
fn invalid_config_lists_every_field_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[physics]\ngamma = -1.0\nn_max = 1\n\n[spectrum]\npoints = 0\n");
    let out = pcs_sim(&["spectrum", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for field in ["physics.gamma", "physics.n_max", "spectrum.points"] {
        assert!(err.contains(field), "{field} missing from: {err}");
    }
    assert!(!dir.path().join("o").exists());

    let unknown = write_config(dir.path(), "[physics]\ng_typo = 3.0\n");
    assert_eq!(pcs_sim(&["spectrum", "--config", &unknown]).status.code(), Some(2));
    assert_eq!(pcs_sim(&["spectrum", "--bogus"]).status.code(), Some(2));
}

#[test]
fn render_reports_unusable_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "delta_tilde,w2\n").unwrap();
    let out = pcs_sim(&["render", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nothing to plot"), "{}", stderr(&out));

    let partial = dir.path().join("partial.csv");
    fs::write(&partial, "g,tau_w,pvr_con\n9,0.1,2.0\n").unwrap();
    let out = pcs_sim(&["render", partial.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing columns pvr_unc"), "{}", stderr(&out));

    let odd = dir.path().join("odd.csv");
    fs::write(&odd, "x,y\n1,2\n2,3\n").unwrap();
    let out = pcs_sim(&["render", odd.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("unrecognized table"), "{}", stderr(&out));

    let good = dir.path().join("good.csv");
    fs::write(&good, "delta_tilde,w2\n0,1e-4\n1,3e-4\n2,2e-4\n").unwrap();
    let out = pcs_sim(&["render", good.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(fs::read_to_string(dir.path().join("good.svg")).unwrap().contains("<svg"));
}

#[test]
fn readme_configuration_matches_defaults() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").unwrap() + "```toml\n".len();
    let block = &readme[start..start + readme[start..].find("```").unwrap()];
    let parsed = pcs_core::cli::RunConfig::from_toml(block).unwrap();
    assert_eq!(parsed, pcs_core::cli::RunConfig::default());
}
