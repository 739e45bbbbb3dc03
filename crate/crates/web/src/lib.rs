//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export has a plain-Rust twin so the logic is testable natively.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use macrobell::bell::{self, BellSettings, Tolerances};
use macrobell::homodyne::{self, QuadratureGrid};
use macrobell::specfun::GaussianNoise;
use wasm_bindgen::prelude::*;

fn settings(theta: f64, phi: f64, theta2: f64, phi2: f64) -> BellSettings {
    BellSettings { theta, theta_prime: theta2, phi, phi_prime: phi2 }
}

/// Six probabilities and `s` as a JSON object.
pub fn bell_json(r0: f64, alpha: f64, sigma: f64, angles: [f64; 4]) -> Result<String, String> {
    let [theta, phi, theta2, phi2] = angles;
    let r = bell::bell_ratio(
        r0,
        alpha,
        GaussianNoise::new(sigma).map_err(|e| e.to_string())?,
        &settings(theta, phi, theta2, phi2),
        &Tolerances::default(),
    )
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

/// `s` at each of `steps` evenly spaced amplitudes in `[alpha_min, alpha_max]`.
pub fn scan_alpha_values(r0: f64, sigma: f64, alpha_min: f64, alpha_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    if steps < 2 || !(alpha_max > alpha_min) || alpha_min < 0.0 {
        return Err("need 0 <= alpha_min < alpha_max and at least 2 steps".into());
    }
    let alphas: Vec<f64> =
        (0..steps).map(|i| alpha_min + (alpha_max - alpha_min) * i as f64 / (steps - 1) as f64).collect();
    let noise = GaussianNoise::new(sigma).map_err(|e| e.to_string())?;
    let pts = bell::scan_alpha(r0, noise, &BellSettings::STANDARD, &alphas, &Tolerances::default())
        .map_err(|e| e.to_string())?;
    Ok(pts.into_iter().map(|(_, s)| s).collect())
}

/// Quadrature-limit `s` at each of `steps` noise values in `[0, sigma0_max]`.
pub fn homodyne_values(r0: f64, sigma0_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    if steps < 2 || !(sigma0_max > 0.0) {
        return Err("need sigma0_max > 0 and at least 2 steps".into());
    }
    let grid = QuadratureGrid { nodes: 401, ..QuadratureGrid::default() };
    (0..steps)
        .map(|i| {
            let s0 = sigma0_max * i as f64 / (steps - 1) as f64;
            homodyne::bell_ratio_homodyne(r0, &BellSettings::STANDARD, s0, &grid).map(|r| r.s).map_err(|e| e.to_string())
        })
        .collect()
}

#[wasm_bindgen(js_name = bellRatio)]
pub fn bell_ratio(r0: f64, alpha: f64, sigma: f64, theta: f64, phi: f64, theta2: f64, phi2: f64) -> Result<String, JsError> {
    bell_json(r0, alpha, sigma, [theta, phi, theta2, phi2]).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scanAlpha)]
pub fn scan_alpha(r0: f64, sigma: f64, alpha_min: f64, alpha_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    scan_alpha_values(r0, sigma, alpha_min, alpha_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = homodyneCurve)]
pub fn homodyne_curve(r0: f64, sigma0_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    homodyne_values(r0, sigma0_max, steps).map_err(|e| JsError::new(&e))
}
