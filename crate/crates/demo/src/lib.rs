//! Browser demo: purity decay, concurrence–purity trajectories and the
//! unital-region reference curves, computed with the core simulator.
//!
//! The `*_json` functions are plain Rust and return JSON strings; the
//! `#[wasm_bindgen]` exports only forward to them.

use nested_ki::experiments::{self, RunSpec};
use nested_ki::measures;
use nested_ki::model::{build_preset, Fields, KickField, QubitLayout, TopologyPreset};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest register the page will simulate; keeps a click under a few seconds.
pub const DEMO_MAX_QUBITS: usize = 14;
pub const DEMO_MAX_STEPS: u64 = 4000;

#[derive(Debug, Clone, Copy)]
pub struct DemoParams {
    pub n_e: usize,
    pub n_ep: usize,
    pub lambda: f64,
    pub gamma: f64,
    /// Magnitude of the central field along (1, 0, 1)/√2; 0 is dephasing.
    pub beta: f64,
    pub t_max: u64,
    pub stride: u64,
    pub realizations: usize,
    pub seed: u64,
}

fn spec(p: &DemoParams, n_c: usize) -> Result<RunSpec, String> {
    let n = n_c + p.n_e + p.n_ep;
    if n > DEMO_MAX_QUBITS {
        return Err(format!("{n} qubits is more than the demo allows ({DEMO_MAX_QUBITS})"));
    }
    if p.t_max > DEMO_MAX_STEPS {
        return Err(format!("t_max above {DEMO_MAX_STEPS}"));
    }
    let layout = QubitLayout::new(n_c, p.n_e, p.n_ep).map_err(|e| e.to_string())?;
    let fields = Fields { central: KickField::tilted(p.beta), ..Fields::dephasing() };
    let preset = if n_c == 2 { TopologyPreset::Spectator } else { TopologyPreset::BaselineChain };
    let config = build_preset(preset, layout, 1.0, p.lambda, p.gamma, fields).map_err(|e| e.to_string())?;
    Ok(RunSpec::new(config, p.t_max, p.stride).with_seed(p.seed).with_realizations(p.realizations.max(1)))
}

/// Mean purity series of one central qubit, `{"t": [...], "purity": [...]}`.
pub fn purity_decay_json(p: &DemoParams) -> Result<String, String> {
    let s = spec(p, 1)?;
    let out = experiments::purity_decay(&s, &[p.gamma]).map_err(|e| e.to_string())?;
    let series = out.series(&[p.gamma], "purity");
    Ok(json!({
        "t": series.iter().map(|x| x.0).collect::<Vec<_>>(),
        "purity": series.iter().map(|x| x.1).collect::<Vec<_>>(),
    })
    .to_string())
}

/// Per-realization (P, C) points of the spectator Bell pair plus the
/// fraction inside the unital region.
pub fn cp_trajectory_json(p: &DemoParams) -> Result<String, String> {
    let s = spec(p, 2)?;
    let out = experiments::cp_trajectory(&s, &[p.gamma], 101).map_err(|e| e.to_string())?;
    let pts = out.points(p.gamma);
    Ok(json!({
        "t": pts.iter().map(|q| q.time).collect::<Vec<_>>(),
        "purity": pts.iter().map(|q| q.purity).collect::<Vec<_>>(),
        "concurrence": pts.iter().map(|q| q.concurrence).collect::<Vec<_>>(),
        "inside_fraction": out.inside_fraction,
        "sudden_death": out.result.metadata.extra.get("sudden_death").cloned().unwrap_or(Value::Null),
    })
    .to_string())
}

/// Werner and dephasing curves in the C–P plane.
pub fn reference_curves_json(samples: usize) -> Result<String, String> {
    let w = measures::werner_curve(samples).map_err(|e| e.to_string())?;
    let d = measures::dephasing_curve(samples).map_err(|e| e.to_string())?;
    let xy = |c: &[measures::CPPoint]| {
        json!({
            "purity": c.iter().map(|q| q.purity).collect::<Vec<_>>(),
            "concurrence": c.iter().map(|q| q.concurrence).collect::<Vec<_>>(),
        })
    };
    Ok(json!({ "werner": xy(&w), "dephasing": xy(&d) }).to_string())
}

#[allow(clippy::too_many_arguments)]
fn params(n_e: usize, n_ep: usize, lambda: f64, gamma: f64, beta: f64, t_max: u32, stride: u32, realizations: usize, seed: u32) -> DemoParams {
    DemoParams { n_e, n_ep, lambda, gamma, beta, t_max: t_max.into(), stride: stride.into(), realizations, seed: seed.into() }
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn purity_decay(n_e: usize, n_ep: usize, lambda: f64, gamma: f64, beta: f64, t_max: u32, stride: u32, realizations: usize, seed: u32) -> Result<String, JsValue> {
    purity_decay_json(&params(n_e, n_ep, lambda, gamma, beta, t_max, stride, realizations, seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn cp_trajectory(n_e: usize, n_ep: usize, lambda: f64, gamma: f64, beta: f64, t_max: u32, stride: u32, realizations: usize, seed: u32) -> Result<String, JsValue> {
    cp_trajectory_json(&params(n_e, n_ep, lambda, gamma, beta, t_max, stride, realizations, seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn reference_curves(samples: usize) -> Result<String, JsValue> {
    reference_curves_json(samples).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(gamma: f64, beta: f64) -> DemoParams {
        DemoParams { n_e: 2, n_ep: 3, lambda: 0.05, gamma, beta, t_max: 40, stride: 10, realizations: 2, seed: 1 }
    }

    #[test]
    fn purity_series_starts_pure() {
        let v: Value = serde_json::from_str(&purity_decay_json(&small(0.3, 0.0)).unwrap()).unwrap();
        assert_eq!(v["t"].as_array().unwrap().len(), 5);
        assert!((v["purity"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!(v["purity"][4].as_f64().unwrap() < 1.0);
    }

    #[test]
    fn cp_points_start_at_bell() {
        let v: Value = serde_json::from_str(&cp_trajectory_json(&small(0.3, 1.0)).unwrap()).unwrap();
        assert!((v["purity"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((v["concurrence"][0].as_f64().unwrap() - 1.0).abs() < 1e-10);
        assert!(v["inside_fraction"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn curves_have_requested_samples() {
        let v: Value = serde_json::from_str(&reference_curves_json(11).unwrap()).unwrap();
        assert_eq!(v["werner"]["purity"].as_array().unwrap().len(), 11);
        assert_eq!(v["dephasing"]["concurrence"].as_array().unwrap().len(), 11);
    }

    #[test]
    fn size_limits() {
        let mut p = small(0.3, 0.0);
        p.n_ep = 12;
        assert!(purity_decay_json(&p).unwrap_err().contains("demo allows"));
        p.n_ep = 3;
        p.t_max = 10_000;
        assert!(purity_decay_json(&p).is_err());
    }
}
