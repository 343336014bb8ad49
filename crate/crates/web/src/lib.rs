//! Browser bindings for the demo page in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<_, String>` so the
//! numerics can be tested natively; the wasm wrappers only convert errors.

use kamcrit::criteria::match_elliptic_points;
use kamcrit::map::{reduce_to_torus, trajectory, PhasePoint, Stochasticity};
use kamcrit::orbit::{continue_in_k, orbit_pair, rational_orbit, Convergent, DEFAULT_DK_MAX};
use kamcrit::stability::{destabilization_threshold, monodromy, residue};
use serde_json::json;
use std::f64::consts::TAU;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 2_000_000;

fn stoch(k: f64) -> Result<Stochasticity, String> {
    Stochasticity::new(k).map_err(|e| e.to_string())
}

fn grid(k_min: f64, k_max: f64, samples: usize) -> Result<Vec<f64>, String> {
    if samples < 2 || !(k_min >= 0.0 && k_max > k_min) {
        return Err(format!(
            "need 0 <= K_min < K_max and at least 2 samples, got [{k_min}, {k_max}] x {samples}"
        ));
    }
    Ok((0..samples)
        .map(|i| k_min + (k_max - k_min) * i as f64 / (samples - 1) as f64)
        .collect())
}

/// Torus-reduced points of `seeds` trajectories started on `q = 0` at evenly
/// spaced momenta, flattened as `[q0, p0, q1, p1, ...]` seed after seed.
pub fn portrait_points(k: f64, seeds: usize, iters: usize) -> Result<Vec<f64>, String> {
    let k = stoch(k)?;
    if seeds == 0 || iters == 0 || seeds * (iters + 1) > MAX_POINTS {
        return Err(format!("seeds x iterations must be between 1 and {MAX_POINTS}"));
    }
    let mut out = Vec::with_capacity(2 * seeds * (iters + 1));
    for i in 0..seeds {
        let x0 = PhasePoint::new(0.0, TAU * (i as f64 + 0.5) / seeds as f64);
        for x in trajectory(x0, k, iters).map_err(|e| e.to_string())? {
            let t = reduce_to_torus(x);
            out.push(t.q);
            out.push(t.p);
        }
    }
    Ok(out)
}

/// Residue of the rational orbit `m/n` along a `K` grid, as JSON
/// `{"K": [...], "residue": [...], "K_star": x | null}`. The curve stops
/// where continuation fails.
pub fn residue_curve_json(m: u32, n: u32, k_min: f64, k_max: f64, samples: usize) -> Result<String, String> {
    let c = Convergent::new(m.into(), n.into()).map_err(|e| e.to_string())?;
    let ks = grid(k_min, k_max, samples)?;
    let mut orbit = rational_orbit(c, stoch(ks[0])?).map_err(|e| e.to_string())?;
    let (mut kk, mut rr) = (Vec::new(), Vec::new());
    for &k in &ks {
        match continue_in_k(&orbit, stoch(k)?, DEFAULT_DK_MAX) {
            Ok(o) => {
                kk.push(k);
                rr.push(residue(&monodromy(&o)));
                orbit = o;
            }
            Err(_) => break,
        }
    }
    let k_star = destabilization_threshold(c, kamcrit::Family::Rational).ok();
    Ok(json!({ "m": m, "n": n, "K": kk, "residue": rr, "K_star": k_star }).to_string())
}

/// Minimum matched distance between the rational and alternate orbits of
/// `m/n` along a `K` grid, as JSON `{"K": [...], "d": [...]}`.
pub fn nch_curve_json(m: u32, n: u32, k_min: f64, k_max: f64, samples: usize) -> Result<String, String> {
    let c = Convergent::new(m.into(), n.into()).map_err(|e| e.to_string())?;
    let ks = grid(k_min, k_max, samples)?;
    let (mut a, mut b) = orbit_pair(c, stoch(ks[0])?).map_err(|e| e.to_string())?;
    let (mut kk, mut dd) = (Vec::new(), Vec::new());
    for &k in &ks {
        let kk_ = stoch(k)?;
        let next = continue_in_k(&a, kk_, DEFAULT_DK_MAX)
            .and_then(|x| continue_in_k(&b, kk_, DEFAULT_DK_MAX).map(|y| (x, y)));
        let Ok((x, y)) = next else { break };
        let d = match_elliptic_points(&x, &y)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|p| p.2)
            .fold(f64::INFINITY, f64::min);
        kk.push(k);
        dd.push(d);
        a = x;
        b = y;
    }
    Ok(json!({ "m": m, "n": n, "K": kk, "d": dd }).to_string())
}

#[wasm_bindgen]
pub fn phase_portrait(k: f64, seeds: usize, iters: usize) -> Result<Vec<f64>, JsError> {
    portrait_points(k, seeds, iters).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn residue_curve(m: u32, n: u32, k_min: f64, k_max: f64, samples: usize) -> Result<String, JsError> {
    residue_curve_json(m, n, k_min, k_max, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn nch_curve(m: u32, n: u32, k_min: f64, k_max: f64, samples: usize) -> Result<String, JsError> {
    nch_curve_json(m, n, k_min, k_max, samples).map_err(|e| JsError::new(&e))
}
