use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dimcontract"))
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(sub: &str, cfg: &Path, extra: &[&str]) -> Output {
    bin().arg(sub).arg("--config").arg(cfg).args(extra).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn weighted_circle() -> Value {
    json!({
        "space": {"kind": "circle", "resolution": [256]},
        "psi": {"form": "a*cos(theta)", "a": 0.1},
        "f": {"form": "1 + 0.5*cos(theta)"},
        "g": {"form": "1"},
        "m": 2,
        "t": 0.3,
        "t_grid": {"start": 0, "stop": 0.6, "points": 4}
    })
}

#[test]
fn cd_params_reports_the_weighted_circle_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &weighted_circle());
    let o = run("cd-params", &cfg, &[]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v[0]["R"].as_f64().unwrap(), -0.1);
    assert_eq!(v[0]["n"], 1);
}

#[test]
fn cd_params_without_m_lists_intrinsic_and_infinite_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        &json!({"space": {"kind": "sphere_zonal", "resolution": [128]}}),
    );
    let o = run("cd-params", &cfg, &["--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,R,witness_node");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let r: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((r - 1.0).abs() < 1e-6, "{l}");
    }
}

#[test]
fn evolve_conserves_mass_and_writes_the_density_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &weighted_circle());
    let o = run("evolve", &cfg, &[]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["scheme"], "crank_nicolson");
    assert_eq!(v["values"].as_array().unwrap().len(), 256);

    let out = dir.path().join("p.csv");
    let o = run("evolve", &cfg, &["--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 257);
    let last: f64 = text.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(last, v["values"][0].as_f64().unwrap());
}

#[test]
fn evolve_requires_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = weighted_circle();
    c.as_object_mut().unwrap().remove("t");
    let cfg = write_config(dir.path(), "c.json", &c);
    let o = run("evolve", &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("\"t\""));
}

#[test]
fn w2_of_a_rotated_narrow_bump_is_the_rotation_angle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        &json!({
            "space": {"kind": "circle", "resolution": [512]},
            "f": {"form": "exp(200*cos(theta))"},
            "g": {"form": "exp(200*cos(theta - 1))"}
        }),
    );
    let o = run("w2", &cfg, &[]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["method"], "circle_exact");
    assert!((v["w2"].as_f64().unwrap() - 1.0).abs() < 1e-3, "{}", v["w2"]);

    let o = run("w2", &cfg, &["--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("method,w2,w2_sq\ncircle_exact,"));
}

#[test]
fn seeds_make_random_fields_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rand.json",
        &json!({
            "space": {"kind": "circle", "resolution": [128]},
            "f": {"random": {"contrast": 0.5}},
            "g": {"random": {"contrast": 0.5}},
            "seed": 3
        }),
    );
    let a = run("w2", &cfg, &[]).stdout;
    let b = run("w2", &cfg, &["--seed", "3"]).stdout;
    let c = run("w2", &cfg, &["--seed", "4"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn check_main_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &weighted_circle());
    let out = dir.path().join("main.csv");
    let o = run("check-main", &cfg, &["--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("name,t,s,lhs,rhs,deficit"));
    assert_eq!(text.lines().count(), 5);
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS"));
}

#[test]
fn check_vrs_passes_on_the_flat_circle() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = weighted_circle();
    let obj = c.as_object_mut().unwrap();
    obj.remove("psi");
    obj.remove("m");
    let cfg = write_config(dir.path(), "c.json", &c);
    let o = run("check-vrs", &cfg, &[]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["name"], "vrs_limit");
    assert_eq!(v["summary"]["verdict"], "pass");
}

#[test]
fn check_vrs_rejects_finite_m() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &weighted_circle());
    assert_eq!(code(&run("check-vrs", &cfg, &[])), 1);
}

#[test]
fn two_time_bounds_pass_on_the_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        &json!({
            "space": {"kind": "sphere_zonal", "resolution": [256]},
            "f": {"form": "1 + 0.3*cos(theta)"},
            "g": {"form": "1 - 0.3*cos(theta)"},
            "st_grid": {"pairs": [[0.1, 0.1], [0.05, 0.2], [0.2, 0.05]]}
        }),
    );
    for sub in ["check-simple", "check-eks"] {
        let o = run(sub, &cfg, &[]);
        assert_eq!(code(&o), 0, "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout_json(&o)["rows"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn simple_bound_refuses_a_potential() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = weighted_circle();
    c["st_grid"] = json!({"pairs": [[0.1, 0.1]]});
    let cfg = write_config(dir.path(), "c.json", &c);
    let o = run("check-simple", &cfg, &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("precondition"));
}

#[test]
fn a_required_margin_turns_tight_rows_into_failures() {
    // a negative solver tolerance demands deficits of at least that margin,
    // which the t = 0 row cannot meet
    let dir = tempfile::tempdir().unwrap();
    let mut c = weighted_circle();
    c["run"] = json!({"tolerance": {"c_h": 0, "c_u": 0, "solver": -1e-6}});
    let cfg = write_config(dir.path(), "c.json", &c);
    let o = run("check-main", &cfg, &[]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL t=0"), "{err}");
    assert_eq!(stdout_json(&o)["summary"]["verdict"], "fail");
}

#[test]
fn identity_suite_runs_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "i.json",
        &json!({
            "space": {"kind": "circle", "resolution": [64]},
            "identities": {"resolution": 256, "triples": 2},
            "seed": 5
        }),
    );
    let o = run("check-identities", &cfg, &["--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("name,grid,residual,order_estimate,params\n"));
    assert!(String::from_utf8_lossy(&o.stderr).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = weighted_circle();
    c["unexpected"] = json!(1);
    let cfg = write_config(dir.path(), "bad.json", &c);
    assert_eq!(code(&run("cd-params", &cfg, &[])), 1);
    assert_eq!(code(&run("cd-params", &dir.path().join("missing.json"), &[])), 1);
    assert_eq!(code(&bin().arg("no-such-command").output().unwrap()), 1);
    assert_eq!(code(&bin().args(["w2"]).output().unwrap()), 1);
    assert_eq!(code(&bin().arg("--help").output().unwrap()), 0);
}
