use annulus_cli::plot::from_csv;
use serde_json::Value;
use std::process::Command;

fn annulus(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_annulus")).args(args).env_remove("ANNULUS_SEED").output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let (code, _) = annulus(&["bogus"]);
    assert_eq!(code, annulus_cli::EXIT_USAGE);
    let (code, _) = annulus(&["green", "eval", "--z", "1.2,x", "--w", "1.5,0"]);
    assert_eq!(code, annulus_cli::EXIT_USAGE);
}

#[test]
fn green_check_passes_and_echoes_provenance() {
    let (code, out) = annulus(&["green", "check", "--tau", "2"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["result"]["passed"], Value::Bool(true));
    assert_eq!(v["seed"], 7);
    assert_eq!(v["generator"], annulus::GENERATOR_ID);
    assert_eq!(v["config"]["command"]["tau"], 2.0);
    assert!(!v["streams"].as_array().unwrap().is_empty());
}

#[test]
fn numeric_failure_has_its_own_exit_code() {
    let (code, out) = annulus(&["green", "eval", "--tau", "2", "--z", "1.2,0", "--w", "1.2,0"]);
    assert_eq!(code, annulus_cli::EXIT_NUMERIC);
    assert_eq!(json(&out)["error"], "numeric");
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"tau": 3.0, "seed": 11}"#).unwrap();
    let (code, out) = annulus(&["--config", cfg.to_str().unwrap(), "green", "eval", "--tau", "2", "--z", "1.2,0", "--w", "1.5,1"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["config"]["command"]["tau"], 3.0);
    assert_eq!(v["seed"], 11);
    std::fs::write(&cfg, r#"{"nonsense": 1}"#).unwrap();
    let (code, _) = annulus(&["--config", cfg.to_str().unwrap(), "green", "eval", "--z", "1.2,0", "--w", "1.5,1"]);
    assert_eq!(code, annulus_cli::EXIT_USAGE);
}

#[test]
fn outputs_are_deterministic() {
    let args = ["gmc", "mass", "--samples", "200", "--n-radial", "4", "--n-angular", "16"];
    let (_, a) = annulus(&args);
    let (_, b) = annulus(&args);
    assert_eq!(a, b);
    let (_, c) = annulus(&["--seed", "8", "gmc", "mass", "--samples", "200", "--n-radial", "4", "--n-angular", "16"]);
    assert_ne!(a, c);
}

#[test]
fn volume_law_example_passes() {
    let (code, out) = annulus(&["lqft", "volume-law", "--gamma", "1", "--mu", "1", "--alpha", "1", "--samples", "2000", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["result"]["ks"]["passes"], Value::Bool(true));
}

#[test]
fn integrand_curve_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let svg = dir.path().join("f.svg");
    let base = ["moduli", "integrand", "--tau-min", "1.05", "--tau-max", "50", "--nodes", "8", "--samples", "200"];
    let mut args = base.to_vec();
    args.extend(["--plot", csv.to_str().unwrap(), "--format", "csv"]);
    let (code, stdout) = annulus(&args);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, stdout);
    let pts = from_csv(&text).unwrap();
    assert_eq!(pts.len(), 8);
    assert!(pts.windows(2).all(|w| w[1].x > w[0].x));
    let mut args = base.to_vec();
    args.extend(["--plot", svg.to_str().unwrap()]);
    assert_eq!(annulus(&args).0, 0);
    assert!(std::fs::metadata(&svg).unwrap().len() > 0);
}

#[test]
fn csv_is_refused_for_non_tabular_commands() {
    let (code, _) = annulus(&["--format", "csv", "green", "check"]);
    assert_eq!(code, annulus_cli::EXIT_USAGE);
}
