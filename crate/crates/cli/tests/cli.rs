use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Sandbox { dir: tempfile::tempdir().unwrap() }
    }

    fn config(&self, name: &str, json: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, json).unwrap();
        p
    }

    fn cache(&self) -> PathBuf {
        self.dir.path().join("cache")
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dunkl"))
            .args(args)
            .env("DUNKL_CACHE_DIR", self.cache())
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

const Z2_HALF: &str = r#"{"family":"Z2","d":1,"k":"1/2","N":8}"#;
const B2: &str = r#"{"family":"B","d":2,"k":{"long":"3/2","short":"1/2"},"N":6}"#;

#[test]
fn build_reports_group_and_caches() {
    let sb = Sandbox::new();
    let cfg = sb.config("z.json", Z2_HALF);
    let o = sb.run(&["build", "--config", path(&cfg)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("|G| = 2"));
    assert!(text.contains("gamma = 1/2"));
    for n in 1..=8 {
        assert!(text.contains(&format!("n = {n}: W_n invertible")), "{text}");
    }
    let files: Vec<_> = std::fs::read_dir(sb.cache()).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn build_rejects_k_outside_m_star() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.json", r#"{"family":"Z2","d":1,"k":"-1/2"}"#);
    let o = sb.run(&["build", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n = 1"));
}

#[test]
fn build_b2_order() {
    let sb = Sandbox::new();
    let cfg = sb.config("b2.json", B2);
    let o = sb.run(&["build", "--config", path(&cfg)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("|G| = 8"));
}

#[test]
fn malformed_config_is_exit_2() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.json", r#"{"family":"Q","d":1}"#);
    assert_eq!(sb.run(&["build", "--config", path(&cfg)]).status.code(), Some(2));
    let missing = sb.dir.path().join("absent.json");
    assert_eq!(sb.run(&["build", "--config", path(&missing)]).status.code(), Some(2));
}

#[test]
fn intertwine_examples() {
    let sb = Sandbox::new();
    let cfg = sb.config("z.json", Z2_HALF);
    // V x = x/(1+2k)
    assert_eq!(stdout(&sb.run(&["intertwine", "--config", path(&cfg), "x"])).trim(), "1/2 * x1");
    assert_eq!(stdout(&sb.run(&["intertwine", "--config", path(&cfg), "1"])).trim(), "1");
    let zero = sb.config("b0.json", r#"{"family":"B","d":2,"k":"0"}"#);
    assert_eq!(stdout(&sb.run(&["intertwine", "--config", path(&zero), "x1^2 x2 - 3 x2"])).trim(), "x1^2 x2 - 3 * x2");
}

#[test]
fn cached_and_fresh_lambda_tables_agree() {
    let sb = Sandbox::new();
    let cfg = sb.config("b2.json", B2);
    let fresh = stdout(&sb.run(&["lambda-table", "--config", path(&cfg), "--degree", "4"]));
    assert!(sb.run(&["build", "--config", path(&cfg)]).status.success());
    let cached = stdout(&sb.run(&["lambda-table", "--config", path(&cfg), "--degree", "4"]));
    assert_eq!(fresh, cached);
    assert_eq!(fresh.lines().count(), 1 + 4 * 8);
    let z = sb.config("z.json", Z2_HALF);
    let rows = csv(&stdout(&sb.run(&["lambda-table", "--config", path(&z), "--degree", "1"])));
    // (1+γ)e − kσ with γ = k = 1/2 inverts to (3e + σ)/4
    assert_eq!(rows, vec![vec![1.0, 0.0, 0.75, 0.0], vec![1.0, 1.0, 0.25, 0.0]]);
}

#[test]
fn kernel_grid_k0_matches_closed_form() {
    let sb = Sandbox::new();
    let cfg = sb.config("z0.json", r#"{"family":"Z2","d":1,"k":"0","N":30}"#);
    let o = sb.run(&["kernel-grid", "--config", path(&cfg), "--grid", "x:0:0.8:0.2,y:-1:1:0.25", "--tol", "1e-8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "x1,y1,re,im,tail_bound");
    let rows = csv(&text);
    assert_eq!(rows.len(), 5 * 9);
    for r in &rows {
        let (x, y) = (r[0], r[1]);
        let want = (x * y - x * x / 2.0).exp();
        assert!((r[2] - want).abs() < 1e-8, "{r:?} vs {want}");
        assert_eq!(r[3], 0.0);
        assert!(r[4] < 1e-8);
        if x == 0.0 {
            assert!((r[2] - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn kernel_grid_refuses_uncertified_points() {
    let sb = Sandbox::new();
    let cfg = sb.config("z.json", Z2_HALF);
    let args = ["kernel-grid", "--config", path(&cfg), "--grid", "x:0:2:1,y:0:2:1", "--tol", "1e-10"];
    let o = sb.run(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("certified"));
    let mut loose = args.to_vec();
    loose.push("--allow-uncertified");
    let o = sb.run(&loose);
    assert!(o.status.success());
    assert_eq!(csv(&stdout(&o)).len(), 9);
}

#[test]
fn kernel_grid_rejects_bad_axes() {
    let sb = Sandbox::new();
    let cfg = sb.config("b2.json", B2);
    for g in ["x3:0:1:1", "x1:0:1", "x1:1:0:0.5", "x1:0:1:0.5,x1:0:1:0.5", "z:0:1:1"] {
        let o = sb.run(&["kernel-grid", "--config", path(&cfg), "--grid", g]);
        assert_eq!(o.status.code(), Some(2), "{g}");
    }
}

#[test]
fn ek_eval_rank_one() {
    let sb = Sandbox::new();
    let cfg = sb.config("z.json", r#"{"family":"Z2","d":1,"k":"1/2","N":40}"#);
    let o = sb.run(&["ek-eval", "--config", path(&cfg), "--x", "1", "--y", "-0.5", "--tol", "1e-12"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row = &csv(&stdout(&o))[0];
    // rank one: coefficients c_n = n c_{n-1}/(n + k(1 - (-1)^n)), E = Σ c_n (xy)^n/n!
    let (k, t) = (0.5, -0.5);
    let (mut c, mut term, mut want) = (1.0f64, 1.0f64, 1.0f64);
    for n in 1..60 {
        let nf = n as f64;
        let odd = if n % 2 == 1 { 2.0 } else { 0.0 };
        c *= nf / (nf + k * odd);
        term *= t / nf;
        want += c * term;
    }
    assert!((row[0] - want).abs() < 1e-12, "{} vs {want}", row[0]);
    assert!(row[2] < 1e-12);
}

#[test]
fn verify_exact_b2_passes() {
    let sb = Sandbox::new();
    let cfg = sb.config("b2.json", B2);
    let o = sb.run(&["verify", "--config", path(&cfg), "--suite", "exact"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pass"], true);
    let checks = v["suites"][0]["checks"].as_array().unwrap();
    assert!(checks.len() >= 5);
    assert!(checks.iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_signs_names_validating_conventions() {
    let sb = Sandbox::new();
    let cfg = sb.config("z.json", r#"{"family":"Z2","d":1,"k":"1/2","N":30}"#);
    let o = sb.run(&["verify", "--config", path(&cfg), "--suite", "signs"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let conv: Vec<&str> = v["suites"][0]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["convention"].as_str().unwrap())
        .collect();
    assert_eq!(conv, ["-", "+ix", "-T"]);
}

#[test]
fn verify_positivity_skips_complex_k() {
    let sb = Sandbox::new();
    let cfg = sb.config("zc.json", r#"{"family":"Z2","d":1,"k":{"re":"1/2","im":"1"}}"#);
    let o = sb.run(&["verify", "--config", path(&cfg), "--suite", "positivity"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["suites"][0]["skipped"].as_str().unwrap().contains("real nonnegative"));
}

#[test]
fn verify_unknown_suite_is_exit_2() {
    let sb = Sandbox::new();
    let cfg = sb.config("z.json", Z2_HALF);
    assert_eq!(sb.run(&["verify", "--config", path(&cfg), "--suite", "bogus"]).status.code(), Some(2));
}

#[test]
fn verify_output_is_deterministic() {
    let sb = Sandbox::new();
    let cfg = sb.config("b2.json", B2);
    let args = ["verify", "--config", path(&cfg), "--suite", "all", "--seed", "7"];
    let a = sb.run(&args);
    let b = sb.run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn floating_mode_for_dihedral_five() {
    let sb = Sandbox::new();
    let cfg = sb.config("i5.json", r#"{"family":"I2","m":5,"k":"1/2","N":6}"#);
    let o = sb.run(&["build", "--config", path(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("|G| = 10"));
    assert!(text.contains("mode = floating"));
    let o = sb.run(&["verify", "--config", path(&cfg), "--suite", "exact"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["suites"][0]["skipped"].is_string());
}

#[test]
fn export_quadrature_rule() {
    let sb = Sandbox::new();
    let o = sb.run(&["export-quadrature", "--dim", "2", "--q", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "x1,x2,weight");
    let rows = csv(&text);
    assert_eq!(rows.len(), 9);
    let mass: f64 = rows.iter().map(|r| r[2]).sum();
    let second: f64 = rows.iter().map(|r| r[2] * r[0] * r[0]).sum();
    assert!((mass - 1.0).abs() < 1e-14);
    assert!((second - 1.0).abs() < 1e-14);
    let cfg = sb.config("b2.json", B2);
    let o = sb.run(&["export-quadrature", "--config", path(&cfg), "--q", "3"]);
    assert_eq!(stdout(&o), text);
}
