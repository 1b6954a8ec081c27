use std::fs;

use vitali_tf::harness::cli::{run_cli, EXIT_CERTIFICATION, EXIT_INVALID, EXIT_OK};
use vitali_tf::io::{load_vtf, read_indices, save_vtf};
use vitali_tf::tensor::Tensor;

fn run(args: &[&str]) -> i32 {
    run_cli(std::iter::once("vtf").chain(args.iter().copied()))
}

fn quadrants(n: usize) -> Tensor {
    Tensor::from_fn(&[n, n], |idx| if 2 * idx[0] > n && 2 * idx[1] > n { 1.0 } else { 0.0 }).unwrap()
}

#[test]
fn help_version_and_usage_errors() {
    assert_eq!(run(&["--help"]), EXIT_OK);
    assert_eq!(run(&["--version"]), EXIT_OK);
    assert_eq!(run(&[]), EXIT_INVALID);
    assert_eq!(run(&["frobnicate"]), EXIT_INVALID);
    assert_eq!(run(&["certify", "--k", "x", "--d", "1", "--n", "8"]), EXIT_INVALID);
}

#[test]
fn denoise_writes_estimate_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("y.vtf");
    let output = dir.path().join("f.vtf");
    let summary = dir.path().join("s.json");
    let y = quadrants(16);
    save_vtf(&y, &input).unwrap();
    let (i, o, s) = (input.to_str().unwrap(), output.to_str().unwrap(), summary.to_str().unwrap());
    assert_eq!(run(&["denoise", i, o, "--k", "1", "--lambda", "0", "--summary", s]), EXIT_OK);
    let f = load_vtf(&output).unwrap();
    assert!(f.sub(&y).unwrap().max_abs() < 1e-10);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(json["mode"], "full-margin");
    assert_eq!(json["converged"], true);

    assert_eq!(run(&["denoise", i, o, "--k", "1", "--sigma", "0.1", "--anova", "--summary", s]), EXIT_OK);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(json["mode"], "anova");
    assert!(json["residual_mse"].as_f64().unwrap() < 0.05);

    assert_eq!(run(&["denoise", i, o, "--k", "1"]), EXIT_INVALID);
    assert_eq!(run(&["denoise", i, o, "--k", "1", "--lambda", "0.1", "--solver", "newton"]), EXIT_INVALID);
    assert_eq!(run(&["denoise", "/nonexistent.vtf", o, "--lambda", "0.1"]), EXIT_INVALID);
}

#[test]
fn grids_are_written_as_indices() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.txt");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["grids", "regular", "--shape", "16,16", "--k", "1", "--per-axis", "2", "--out", o]), EXIT_OK);
    let jumps = read_indices(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(jumps.len(), 4);
    assert_eq!(run(&["grids", "mesh", "--shape", "16,16", "--k", "2", "--delta", "2", "--enlarged", "--out", o]), EXIT_OK);
    assert!(!read_indices(fs::File::open(&out).unwrap()).unwrap().is_empty());
    assert_eq!(run(&["grids", "regular", "--shape", "4", "--k", "3", "--per-axis", "2", "--out", o]), EXIT_INVALID);
}

#[test]
fn rates_writes_csv_svg_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "d = 1\nk = 1\nn = [64, 128, 256]\nsigma = 0.5\nreplicates = 3\nseed = 4\nsignal = \"jumps\"\ns0 = 2\n").unwrap();
    let (csv, svg, json) = (dir.path().join("r.csv"), dir.path().join("r.svg"), dir.path().join("r.json"));
    let code = run(&[
        "rates",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
        "--summary",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,replicate,mse,lambda,converged,seed");
    assert_eq!(text.lines().count(), 10);
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary["points"].as_array().unwrap().len(), 3);
    fs::write(&cfg, "d = 1\n").unwrap();
    assert_eq!(run(&["rates", "--config", cfg.to_str().unwrap()]), EXIT_INVALID);
}

#[test]
fn certify_reports_rows_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let code = run(&["certify", "--k", "1", "--d", "1", "--n", "12", "--instances", "3", "--oracle-iterations", "200", "--out", out.to_str().unwrap()]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "check_name,params,lhs,rhs,pass");
    let failing = text.lines().skip(1).filter(|l| l.ends_with(",false")).count();
    assert_eq!(code, if failing == 0 { EXIT_OK } else { EXIT_CERTIFICATION });
    assert_eq!(failing, 0, "{text}");
    assert_eq!(run(&["certify", "--k", "1", "--d", "1", "--n", "2"]), EXIT_INVALID);
}
