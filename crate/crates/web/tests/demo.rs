use dimcontract_web::{contraction_json, heat_flow_json, interpolation_json};
use serde_json::Value;

const CIRCLE: &str = r#"{
    "space": {"kind": "circle", "resolution": [128]},
    "psi": {"form": "a*cos(theta)", "a": 0.2},
    "f": {"form": "exp(4*cos(theta))"},
    "g": {"form": "exp(4*cos(theta - 2))"},
    "m": 3,
    "t": 0.2,
    "t_grid": {"start": 0, "stop": 0.5, "points": 6}
}"#;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn heat_flow_keeps_mass_and_flattens() {
    let v = parse(&heat_flow_json(CIRCLE).unwrap());
    assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let peak = |k: &str| v[k].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).fold(0.0, f64::max);
    assert!(peak("evolved") < peak("initial"));
    assert_eq!(v["x"].as_array().unwrap().len(), 128);
}

#[test]
fn contraction_report_passes() {
    let v = parse(&contraction_json(CIRCLE).unwrap());
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    assert_eq!(v["summary"]["verdict"], "pass");
}

#[test]
fn interpolation_runs_between_the_endpoints() {
    let v = parse(&interpolation_json(CIRCLE, 8).unwrap());
    let frames = v["frames"].as_array().unwrap();
    assert_eq!(frames.len(), 9);
    assert!(v["w2"].as_f64().unwrap() > 0.0);
}

#[test]
fn torus_and_bad_json_are_errors() {
    let torus = r#"{"space": {"kind": "torus2", "resolution": [16, 16]}, "t": 0.1, "f": {"form": "1"}}"#;
    assert!(heat_flow_json(torus).is_err());
    assert!(heat_flow_json("{").is_err());
    assert!(interpolation_json(CIRCLE, 0).is_err());
}
