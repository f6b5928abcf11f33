//! Basins of attraction on the unit disk, the one-dimensional ratio
//! recursion for the Mercedes-Benz frame, and the sector property check.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::power::{self, LimitClass, RunOptions};
use crate::rng;
use crate::tensor::SymTensor;

pub const DEFAULT_RENDER_ITERS: usize = 200;
pub const MIN_RESOLUTION: usize = 16;
/// Samples this close (radians) to a sector boundary are skipped.
pub const BOUNDARY_SKIP: f64 = 1e-6;
pub const SECTOR_CHECK_ITERS: usize = 100_000;

/// One step of the ratio recursion `alpha_k = -<x_k, v_2> / <x_k, v_1>`.
///
/// Written with signed powers so it holds for every order; for even `d` it
/// reduces to `(a^{d-1} - (1-a)^{d-1}/2 + 1/2) / (1 + a^{d-1}/2 + (1-a)^{d-1}/2)`.
pub fn alpha_step(alpha: f64, d: usize) -> f64 {
    let e = d as i32 - 1;
    let p = (-alpha).powi(e);
    let q = (-(1.0 - alpha)).powi(e);
    -(p - 0.5 * q - 0.5) / (1.0 - 0.5 * p - 0.5 * q)
}

/// `k` successive values `alpha_1, .., alpha_k`.
pub fn alpha_orbit(alpha0: f64, d: usize, k: usize) -> Result<Vec<f64>> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::InvalidArgs(format!("alpha0 must lie in (0, 1), got {alpha0}")));
    }
    if d < 3 {
        return Err(Error::InvalidArgs(format!("order must be at least 3, got {d}")));
    }
    let mut out = Vec::with_capacity(k);
    let mut a = alpha0;
    for _ in 0..k {
        a = alpha_step(a, d);
        out.push(a);
    }
    Ok(out)
}

/// `C` with `alpha_step(a) - a = C (a - 1/2)` for even `d`.
pub fn contraction_coefficient(alpha: f64, d: usize) -> f64 {
    let s: f64 = (0..=d - 2)
        .map(|j| alpha.powi((d - 2 - j) as i32) * (1.0 - alpha).powi(j as i32))
        .sum();
    let num = (2.0 - alpha) * s - (1.0 + (1.0 - alpha).powi(d as i32 - 1));
    2.0 * num / (2.0 + alpha.powi(d as i32 - 1) + (1.0 - alpha).powi(d as i32 - 1))
}

/// `-<x, v_2> / <x, v_1>`.
pub fn extract_alpha(x: &DVector<f64>, frame: &Frame) -> f64 {
    -x.dot(&frame.column(1)) / x.dot(&frame.column(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasinLabel {
    /// Converged to `+-v_j` (zero-based).
    Frame(u8),
    Other,
    None,
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub resolution: usize,
    pub d: usize,
    pub frame: String,
    pub max_iter: usize,
    pub tol: f64,
    /// Row-major from the top-left pixel.
    pub labels: Vec<BasinLabel>,
    pub iterations: Vec<u32>,
}

/// Centre of pixel `(row, col)` in the square `[-1, 1]^2`, `y` pointing up.
pub fn pixel_center(resolution: usize, row: usize, col: usize) -> (f64, f64) {
    let h = 2.0 / resolution as f64;
    (-1.0 + (col as f64 + 0.5) * h, 1.0 - (row as f64 + 0.5) * h)
}

pub const COLOR_OTHER: [u8; 3] = [128, 128, 128];
pub const COLOR_NONE: [u8; 3] = [0, 0, 0];
pub const COLOR_OUTSIDE: [u8; 3] = [255, 255, 255];
const FRAME_COLORS: [[u8; 3]; 8] = [
    [0, 0, 255],
    [255, 0, 0],
    [0, 160, 0],
    [255, 200, 0],
    [0, 200, 200],
    [200, 0, 200],
    [120, 60, 0],
    [255, 128, 128],
];

pub fn label_color(label: BasinLabel) -> [u8; 3] {
    match label {
        BasinLabel::Frame(j) => FRAME_COLORS[j as usize % FRAME_COLORS.len()],
        BasinLabel::Other => COLOR_OTHER,
        BasinLabel::None => COLOR_NONE,
        BasinLabel::Outside => COLOR_OUTSIDE,
    }
}

fn classify_pixel(t: &SymTensor, frame: &Frame, x: f64, y: f64, opts: RunOptions) -> (BasinLabel, u32) {
    if x * x + y * y > 1.0 {
        return (BasinLabel::Outside, 0);
    }
    if x == 0.0 && y == 0.0 {
        return (BasinLabel::None, 0);
    }
    match power::run(t, &DVector::from_vec(vec![x, y]), opts, Some(&frame.factors)) {
        Ok(r) => {
            let label = match r.limit_class {
                LimitClass::Frame { index, .. } => BasinLabel::Frame(index as u8),
                LimitClass::Other => BasinLabel::Other,
                LimitClass::None => BasinLabel::None,
            };
            (label, r.iterations as u32)
        }
        Err(_) => (BasinLabel::None, 0),
    }
}

fn render_row(t: &SymTensor, frame: &Frame, resolution: usize, row: usize, opts: RunOptions) -> Vec<(BasinLabel, u32)> {
    (0..resolution)
        .map(|col| {
            let (x, y) = pixel_center(resolution, row, col);
            classify_pixel(t, frame, x, y, opts)
        })
        .collect()
}

/// Runs the power method from every pixel centre inside the unit disk.
pub fn render_basins(t: &SymTensor, frame: &Frame, resolution: usize, max_iter: usize, tol: f64) -> Result<BasinGrid> {
    if t.dim() != 2 || frame.dim() != 2 {
        return Err(Error::InvalidArgs("basins are drawn for n = 2 only".into()));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgs(format!("resolution must be at least {MIN_RESOLUTION}")));
    }
    if frame.len() > u8::MAX as usize {
        return Err(Error::InvalidArgs("too many frame vectors".into()));
    }
    let opts = RunOptions { max_iter, tol, record: false };

    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<(BasinLabel, u32)>> = {
        use rayon::prelude::*;
        (0..resolution).into_par_iter().map(|row| render_row(t, frame, resolution, row, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<(BasinLabel, u32)>> =
        (0..resolution).map(|row| render_row(t, frame, resolution, row, opts)).collect();

    let (labels, iterations) = rows.into_iter().flatten().unzip();
    Ok(BasinGrid { resolution, d: t.order(), frame: frame.name.clone(), max_iter, tol, labels, iterations })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LabelCounts {
    pub frame: Vec<usize>,
    pub other: usize,
    pub none: usize,
    pub outside: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterStats {
    pub min: u32,
    pub max: u32,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColorEntry {
    pub label: String,
    pub rgb: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinSidecar {
    pub resolution: usize,
    pub d: usize,
    pub frame: String,
    pub max_iter: usize,
    pub tol: f64,
    pub colors: Vec<ColorEntry>,
    pub counts: LabelCounts,
    pub iterations: IterStats,
}

impl BasinGrid {
    pub fn label(&self, row: usize, col: usize) -> BasinLabel {
        self.labels[row * self.resolution + col]
    }

    pub fn counts(&self, frame_len: usize) -> LabelCounts {
        let mut c = LabelCounts { frame: vec![0; frame_len], ..Default::default() };
        for &l in &self.labels {
            match l {
                BasinLabel::Frame(j) => {
                    let j = j as usize;
                    if j >= c.frame.len() {
                        c.frame.resize(j + 1, 0);
                    }
                    c.frame[j] += 1;
                }
                BasinLabel::Other => c.other += 1,
                BasinLabel::None => c.none += 1,
                BasinLabel::Outside => c.outside += 1,
            }
        }
        c
    }

    /// Iteration statistics over pixels inside the disk.
    pub fn iter_stats(&self) -> IterStats {
        let inside: Vec<u32> = self
            .labels
            .iter()
            .zip(&self.iterations)
            .filter(|(l, _)| **l != BasinLabel::Outside)
            .map(|(_, &k)| k)
            .collect();
        if inside.is_empty() {
            return IterStats { min: 0, max: 0, mean: 0.0 };
        }
        IterStats {
            min: *inside.iter().min().unwrap(),
            max: *inside.iter().max().unwrap(),
            mean: inside.iter().map(|&k| k as f64).sum::<f64>() / inside.len() as f64,
        }
    }

    pub fn sidecar(&self, frame_len: usize) -> BasinSidecar {
        let mut colors: Vec<ColorEntry> = (0..frame_len)
            .map(|j| ColorEntry { label: format!("v{}", j + 1), rgb: label_color(BasinLabel::Frame(j as u8)) })
            .collect();
        colors.push(ColorEntry { label: "other".into(), rgb: COLOR_OTHER });
        colors.push(ColorEntry { label: "none".into(), rgb: COLOR_NONE });
        colors.push(ColorEntry { label: "outside".into(), rgb: COLOR_OUTSIDE });
        BasinSidecar {
            resolution: self.resolution,
            d: self.d,
            frame: self.frame.clone(),
            max_iter: self.max_iter,
            tol: self.tol,
            colors,
            counts: self.counts(frame_len),
            iterations: self.iter_stats(),
        }
    }

    pub fn rgb(&self) -> Vec<u8> {
        self.labels.iter().flat_map(|&l| label_color(l)).collect()
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.labels
            .iter()
            .flat_map(|&l| {
                let [r, g, b] = label_color(l);
                [r, g, b, 255]
            })
            .collect()
    }

    /// Binary PPM (P6), 8-bit RGB.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.resolution, self.resolution).into_bytes();
        out.extend(self.rgb());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectorReport {
    pub samples: usize,
    pub skipped: usize,
    pub passed: usize,
    pub failed: usize,
}

/// The unique maximizer of `<s v_j, x>` over generators and signs, or `None`
/// when `x` lies within `BOUNDARY_SKIP` radians of a tie.
pub fn unique_maximizer(frame: &Frame, x: &DVector<f64>) -> Option<(usize, i8)> {
    let mut scores: Vec<(f64, usize, i8)> = (0..frame.len())
        .map(|j| {
            let p = frame.column(j).dot(x);
            (p.abs(), j, if p >= 0.0 { 1 } else { -1 })
        })
        .collect();
    scores.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (_, j1, s1) = scores[0];
    if scores.len() > 1 {
        let (_, j2, s2) = scores[1];
        let bisector = frame.column(j1) * f64::from(s1) + frame.column(j2) * f64::from(s2);
        let b = bisector.normalize();
        let angle = (x[0] * b[1] - x[1] * b[0]).abs().asin();
        if angle <= BOUNDARY_SKIP {
            return None;
        }
    }
    Some((j1, s1))
}

/// Samples starts uniformly on the circle and checks that each run ends at
/// the unique maximizer of `<s v_j, x_0>`.
pub fn sector_check(t: &SymTensor, frame: &Frame, samples: usize, seed: u64) -> Result<SectorReport> {
    if t.dim() != 2 {
        return Err(Error::InvalidArgs("sector check needs n = 2".into()));
    }
    if t.order() < 6 || t.order() % 2 == 1 {
        return Err(Error::InvalidArgs(format!("sector check needs an even order >= 6, got {}", t.order())));
    }
    let mut rng = rng::rng_from_seed(seed);
    let opts = RunOptions { max_iter: SECTOR_CHECK_ITERS, tol: 1e-10, record: false };
    let mut report = SectorReport { samples, skipped: 0, passed: 0, failed: 0 };
    for _ in 0..samples {
        let x0 = rng::sample_sphere(&mut rng, 2);
        let Some((j, s)) = unique_maximizer(frame, &x0) else {
            report.skipped += 1;
            continue;
        };
        let r = power::run(t, &x0, opts, Some(&frame.factors))?;
        if r.limit_class == (LimitClass::Frame { index: j, sign: s }) {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
    }
    Ok(report)
}
