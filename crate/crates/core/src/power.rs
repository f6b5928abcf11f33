//! Normalized tensor power iteration and classification of its limits.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Contraction;

/// Images shorter than this count as zero.
pub const ZERO_IMAGE: f64 = 1e-300;

/// One application of `x -> T.x^{d-1} / ||T.x^{d-1}||`.
pub fn step<T: Contraction + ?Sized>(t: &T, x: &DVector<f64>) -> Result<DVector<f64>> {
    let y = t.contract_vec(x)?;
    let norm = y.norm();
    if !(norm >= ZERO_IMAGE) {
        return Err(Error::ZeroImage);
    }
    Ok(y / norm)
}

/// `min(||a - b||, ||a + b||)`.
pub fn sign_aligned_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm().min((a + b).norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub record: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-10, record: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LimitClass {
    /// Within `10 tol` of `sign * v_index` and of no other column.
    Frame { index: usize, sign: i8 },
    Other,
    None,
}

impl LimitClass {
    pub fn frame_index(&self) -> Option<usize> {
        match self {
            LimitClass::Frame { index, .. } => Some(*index),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub k: usize,
    pub x: Vec<f64>,
    /// Sign-aligned distance to the previous iterate; absent for `k = 0`.
    pub displacement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRunResult {
    pub final_x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub limit_class: LimitClass,
    pub trajectory: Option<Vec<TracePoint>>,
}

/// Matches `x` against the columns of `reference` up to sign.
pub fn classify(x: &DVector<f64>, reference: &DMatrix<f64>, radius: f64) -> LimitClass {
    let mut found = None;
    for (j, col) in reference.column_iter().enumerate() {
        let col = col.into_owned();
        let plus = (x - &col).norm();
        let minus = (x + &col).norm();
        if plus.min(minus) <= radius {
            if found.is_some() {
                return LimitClass::Other;
            }
            found = Some(LimitClass::Frame { index: j, sign: if plus <= minus { 1 } else { -1 } });
        }
    }
    found.unwrap_or(LimitClass::Other)
}

/// Runs the power iteration from `x0` (normalized first).
///
/// Stops once two consecutive iterates agree up to sign within `tol`.
/// Converged limits are classified against `reference` when one is given.
pub fn run<T: Contraction + ?Sized>(
    t: &T,
    x0: &DVector<f64>,
    opts: RunOptions,
    reference: Option<&DMatrix<f64>>,
) -> Result<PowerRunResult> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgs("max_iter must be at least 1".into()));
    }
    if x0.len() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: x0.len() });
    }
    let norm = x0.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgs("starting vector must be nonzero and finite".into()));
    }
    let mut x = x0 / norm;
    let mut trajectory = opts.record.then(|| {
        vec![TracePoint { k: 0, x: x.iter().copied().collect(), displacement: None }]
    });

    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=opts.max_iter {
        let next = step(t, &x)?;
        let displacement = sign_aligned_distance(&next, &x);
        if let Some(tr) = trajectory.as_mut() {
            tr.push(TracePoint { k, x: next.iter().copied().collect(), displacement: Some(displacement) });
        }
        x = next;
        iterations = k;
        if displacement <= opts.tol {
            converged = true;
            break;
        }
    }

    let limit_class = match (converged, reference) {
        (false, _) => LimitClass::None,
        (true, None) => LimitClass::Other,
        (true, Some(v)) => classify(&x, v, 10.0 * opts.tol),
    };
    Ok(PowerRunResult {
        final_x: x.iter().copied().collect(),
        iterations,
        converged,
        limit_class,
        trajectory,
    })
}
