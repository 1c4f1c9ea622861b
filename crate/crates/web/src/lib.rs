//! Browser bindings: TOML config in, JSON out.

use magnon_cmt::analysis::{classify_coupling, detuning_map, find_dips, spectrum as engine_spectrum};
use magnon_cmt::io::{config_to_toml, parse_config};
use magnon_cmt::system::cavity_loading;
use magnon_cmt::{linspace, preset_config, validate, CriticalVariant, Loading, Scenario, ValidatedConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 1_000_000;

fn load(config: &str, critical: bool) -> Result<ValidatedConfig, String> {
    let mut cfg = parse_config(config).map_err(|e| e.to_string())?;
    if critical {
        cfg.loading = Loading::Critical(CriticalVariant::Complex);
    }
    validate(cfg).map_err(|e| e.to_string())
}

fn grid(name: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_POINTS || !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(format!("invalid {name} grid: {lo}..{hi} with {n} points"));
    }
    Ok(linspace(lo, hi, n))
}

/// Built-in parameter set for `scenario` as TOML.
pub fn default_config_toml(scenario: &str, eta: f64, xi: f64, critical: bool) -> Result<String, String> {
    let s = Scenario::parse(scenario).ok_or_else(|| format!("unknown scenario `{scenario}`"))?;
    let mut cfg = preset_config(s, eta, xi).map_err(|e| e.to_string())?;
    if critical {
        cfg.loading = Loading::Critical(CriticalVariant::Complex);
    }
    Ok(config_to_toml(&cfg))
}

/// S21 over a cavity-detuning grid with the dips found in it.
pub fn spectrum_json(config: &str, phase_a: f64, lo: f64, hi: f64, points: usize, critical: bool) -> Result<String, String> {
    let cfg = load(config, critical)?;
    let dc = grid("delta_c", lo, hi, points)?;
    let s = engine_spectrum(&cfg, &cfg.phases_for(phase_a), &dc).map_err(|e| e.to_string())?;
    let wc = cfg.cavity().omega;
    let dips: Vec<_> = find_dips(&s, 0.01)
        .iter()
        .map(|d| json!({ "delta_c": d.freq - wc, "depth": d.depth, "linewidth": d.linewidth, "min": d.min }))
        .collect();
    Ok(json!({
        "delta_c": dc,
        "re": s.values().iter().map(|v| v.re).collect::<Vec<_>>(),
        "im": s.values().iter().map(|v| v.im).collect::<Vec<_>>(),
        "abs": s.magnitudes(),
        "dips": dips,
    })
    .to_string())
}

/// |S21| over cavity and magnon detunings, rows by magnon detuning.
#[allow(clippy::too_many_arguments)]
pub fn map_json(
    config: &str,
    phase_a: f64,
    dc_lo: f64,
    dc_hi: f64,
    dc_points: usize,
    dm_lo: f64,
    dm_hi: f64,
    dm_points: usize,
    critical: bool,
) -> Result<String, String> {
    let cfg = load(config, critical)?;
    let dc = grid("delta_c", dc_lo, dc_hi, dc_points)?;
    let dm = grid("delta_m", dm_lo, dm_hi, dm_points)?;
    let map = detuning_map(&cfg, phase_a, &dc, &dm).map_err(|e| e.to_string())?;
    Ok(json!({ "delta_c": map.delta_c, "delta_m": map.delta_m, "abs": map.values() }).to_string())
}

/// Level attraction/repulsion classification over a magnon-detuning sweep.
pub fn classify_json(config: &str, phase_a: f64, dm_lo: f64, dm_hi: f64, dm_points: usize, critical: bool) -> Result<String, String> {
    let cfg = load(config, critical)?;
    let dm = grid("delta_m", dm_lo, dm_hi, dm_points)?;
    let class = classify_coupling(&cfg, phase_a, &dm).map_err(|e| e.to_string())?;
    let k = cavity_loading(&cfg, &cfg.phases_for(phase_a)).map_err(|e| e.to_string())?;
    Ok(json!({
        "classification": class,
        "short": class.label.short(),
        "cavity_loading": [k.re, k.im],
    })
    .to_string())
}

#[wasm_bindgen(js_name = defaultConfig)]
pub fn default_config(scenario: &str, eta: f64, xi: f64, critical: bool) -> Result<String, JsValue> {
    default_config_toml(scenario, eta, xi, critical).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn spectrum(config: &str, phase_a: f64, lo: f64, hi: f64, points: usize, critical: bool) -> Result<String, JsValue> {
    spectrum_json(config, phase_a, lo, hi, points, critical).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn map(
    config: &str,
    phase_a: f64,
    dc_lo: f64,
    dc_hi: f64,
    dc_points: usize,
    dm_lo: f64,
    dm_hi: f64,
    dm_points: usize,
    critical: bool,
) -> Result<String, JsValue> {
    map_json(config, phase_a, dc_lo, dc_hi, dc_points, dm_lo, dm_hi, dm_points, critical)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn classify(config: &str, phase_a: f64, dm_lo: f64, dm_hi: f64, dm_points: usize, critical: bool) -> Result<String, JsValue> {
    classify_json(config, phase_a, dm_lo, dm_hi, dm_points, critical).map_err(|e| JsValue::from_str(&e))
}
