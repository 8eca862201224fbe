//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every entry point takes a run configuration as JSON, in the same schema
//! the command line reads, and returns JSON. The `*_json` functions hold the
//! logic and are callable natively; the exported wrappers only convert errors.

use std::path::Path;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dimcontract::harness::config::LabConfig;
use dimcontract::harness::run_main_contraction;
use dimcontract::io::to_json;
use dimcontract::semigroup::default_dt_max;
use dimcontract::transport::bb::build_mccann_path;
use dimcontract::transport::{exact_method, w2};
use dimcontract::{Error, HeatSemigroup, NodalField, Result, Scheme, SpaceKind, WeightedSpace};

const ORIGIN: &str = "<browser>";

fn parse(config: &str) -> Result<(LabConfig, WeightedSpace)> {
    let cfg = LabConfig::from_json(config, Path::new(ORIGIN))?;
    if cfg.space.kind == SpaceKind::Torus2 {
        return Err(Error::Config("the demo runs on the circle and the zonal sphere".into()));
    }
    let ws = cfg.weighted_space()?;
    Ok((cfg, ws))
}

fn coords(ws: &WeightedSpace) -> Vec<f64> {
    (0..ws.len()).map(|k| ws.space().coords(k)[0]).collect()
}

#[derive(Serialize)]
struct Flow {
    x: Vec<f64>,
    t: f64,
    initial: Vec<f64>,
    evolved: Vec<f64>,
    mass: f64,
}

/// `f` and `P_t f` at the configured time.
pub fn heat_flow_json(config: &str) -> Result<String> {
    let (cfg, ws) = parse(config)?;
    let f = cfg
        .f
        .as_ref()
        .ok_or_else(|| Error::Config("config needs \"f\"".into()))?;
    let f = cfg.density(f, &ws, cfg.seed.unwrap_or(0), 0)?;
    let t = cfg.t.ok_or_else(|| Error::Config("config needs the time \"t\"".into()))?;
    let sg = if ws.weight().is_zero() {
        HeatSemigroup::new(&ws, Scheme::Spectral)?
    } else {
        HeatSemigroup::crank_nicolson(&ws, cfg.run.dt_max.unwrap_or_else(|| default_dt_max(&ws)))
    };
    let evolved = sg.evolve(f.values(), t)?;
    Ok(to_json(&Flow {
        x: coords(&ws),
        t,
        mass: ws.measure().integrate(&evolved),
        initial: f.values().to_vec(),
        evolved,
    }))
}

/// The dimensional contraction report along `t_grid`.
pub fn contraction_json(config: &str) -> Result<String> {
    let (cfg, ws) = parse(config)?;
    let (f, g) = cfg.densities(&ws, cfg.seed.unwrap_or(0))?;
    let rep = run_main_contraction(&f, &g, &ws, &cfg.cd_params(&ws)?, &cfg.times()?, &cfg.run)?;
    Ok(to_json(&rep))
}

#[derive(Serialize)]
struct Interpolation {
    x: Vec<f64>,
    w2: f64,
    frames: Vec<Vec<f64>>,
}

/// `frames + 1` snapshots of the displacement interpolation from `f` to `g`.
pub fn interpolation_json(config: &str, frames: usize) -> Result<String> {
    let (cfg, ws) = parse(config)?;
    let (f, g) = cfg.densities(&ws, cfg.seed.unwrap_or(0))?;
    let method = exact_method(ws.space().kind()).expect("one-dimensional space");
    let dist = w2(&f, &g, &ws, method, &cfg.run.sinkhorn)?;
    let path = build_mccann_path(&f, &g, &ws, frames)?;
    Ok(to_json(&Interpolation {
        x: coords(&ws),
        w2: dist.w2,
        frames: path.rho_s.iter().map(|r| r.values().to_vec()).collect(),
    }))
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn heat_flow(config: &str) -> std::result::Result<String, JsError> {
    js(heat_flow_json(config))
}

#[wasm_bindgen]
pub fn contraction(config: &str) -> std::result::Result<String, JsError> {
    js(contraction_json(config))
}

#[wasm_bindgen]
pub fn interpolation(config: &str, frames: usize) -> std::result::Result<String, JsError> {
    js(interpolation_json(config, frames))
}
