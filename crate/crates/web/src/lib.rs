//! Browser bindings for the Mercedes-Benz demo page in `www/`.
//!
//! The plain functions below do the work and are tested natively; the
//! `#[wasm_bindgen]` exports only convert errors for JavaScript.

use nalgebra::DVector;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use tpm_core::basins;
use tpm_core::eigen2d;
use tpm_core::frames::{self, Frame};
use tpm_core::power::{self, LimitClass, RunOptions};
use tpm_core::robustness;
use tpm_core::SymTensor;

pub const MAX_RESOLUTION: usize = 1024;
pub const TOL: f64 = 1e-10;

fn mb(d: usize) -> Result<(SymTensor, Frame), String> {
    if !(3..=12).contains(&d) {
        return Err(format!("order must lie in 3..=12, got {d}"));
    }
    let frame = frames::mercedes_benz();
    let t = SymTensor::all_ones(frame.factors.clone(), d).map_err(|e| e.to_string())?;
    Ok((t, frame))
}

/// RGBA pixels of the basin picture, row-major from the top-left corner.
pub fn render_rgba(d: usize, resolution: usize, iters: usize) -> Result<Vec<u8>, String> {
    if resolution > MAX_RESOLUTION {
        return Err(format!("resolution is capped at {MAX_RESOLUTION}"));
    }
    let (t, frame) = mb(d)?;
    let grid = basins::render_basins(&t, &frame, resolution, iters, TOL).map_err(|e| e.to_string())?;
    Ok(grid.rgba())
}

/// Power-method path from `(x, y)` as JSON: `{points: [[x, y], ..], converged, limit}`.
pub fn trajectory(d: usize, x: f64, y: f64, iters: usize) -> Result<Value, String> {
    let (t, frame) = mb(d)?;
    let x0 = DVector::from_vec(vec![x, y]);
    let opts = RunOptions { max_iter: iters.max(1), tol: TOL, record: true };
    let r = power::run(&t, &x0, opts, Some(&frame.factors)).map_err(|e| e.to_string())?;
    let points: Vec<[f64; 2]> = r.trajectory.unwrap_or_default().iter().map(|p| [p.x[0], p.x[1]]).collect();
    let limit = match r.limit_class {
        LimitClass::Frame { index, sign } => json!({"kind": "frame", "index": index + 1, "sign": sign}),
        LimitClass::Other => json!({"kind": "other"}),
        LimitClass::None => json!({"kind": "none"}),
    };
    Ok(json!({"points": points, "converged": r.converged, "iterations": r.iterations, "limit": limit}))
}

fn complex(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

/// Eigenpairs of the order-`d` tensor plus the certificate of each generator.
pub fn eigen_summary(d: usize) -> Result<Value, String> {
    let (t, frame) = mb(d)?;
    let certificates: Vec<Value> = (0..frame.len())
        .map(|j| match robustness::certify(&t, &frame.column(j), Some(&frame)) {
            Ok(c) => json!({"index": j + 1, "mu": c.mu, "rho": c.rho_numeric, "verdict": format!("{:?}", c.verdict)}),
            Err(e) => json!({"index": j + 1, "error": e.to_string()}),
        })
        .collect();
    let pairs = match eigen2d::all_eigenpairs_2d(&t) {
        Ok(e) => Value::Array(
            e.pairs
                .iter()
                .map(|p| {
                    json!({
                        "vector": [complex(p.vector[0]), complex(p.vector[1])],
                        "eigenvalue": complex(p.eigenvalue),
                        "multiplicity": p.multiplicity,
                        "kind": match (p.normalization, p.is_real) {
                            (eigen2d::Normalization::Isotropic, _) => "isotropic",
                            (_, true) => "real",
                            _ => "complex",
                        },
                    })
                })
                .collect(),
        ),
        Err(tpm_core::Error::DegenerateForm) => Value::Null,
        Err(e) => return Err(e.to_string()),
    };
    Ok(json!({"d": d, "pairs": pairs, "generators": certificates}))
}

#[wasm_bindgen]
pub fn basins_rgba(d: usize, resolution: usize, iters: usize) -> Result<Vec<u8>, JsError> {
    render_rgba(d, resolution, iters).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn power_trajectory(d: usize, x: f64, y: f64, iters: usize) -> Result<String, JsError> {
    trajectory(d, x, y, iters).map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn eigenpairs_json(d: usize) -> Result<String, JsError> {
    eigen_summary(d).map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}
