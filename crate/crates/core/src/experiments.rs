//! Seeded, schedule-independent numerical experiments.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::eigen2d::{self, EigenPair, Normalization};
use crate::error::{Error, Result};
use crate::frames::{self, Frame};
use crate::power::{self, LimitClass, RunOptions};
use crate::rng;
use crate::robustness;
use crate::tensor::{DenseTensor, Perturbed, SymTensor, DEFAULT_DENSE_CAP};

pub const TABLE1_TRIALS: usize = 20;
pub const TABLE1_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Tick,
    Cross,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Tick => "tick",
            Verdict::Cross => "cross",
        }
    }

    pub fn symbol(&self) -> char {
        match self {
            Verdict::Tick => '✓',
            Verdict::Cross => '✗',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    /// Runs that converged to some `+-v_j`.
    pub successes: usize,
    pub others: usize,
    pub unconverged: usize,
    pub mean_iterations: f64,
    /// Spectral radius of the Jacobian at `v_1`, when `v_1` is an eigenvector.
    pub rho_v1: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceGrid {
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub cells: Vec<GridCell>,
}

impl ConvergenceGrid {
    pub fn cell(&self, n: usize, d: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.n == n && c.d == d)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,d,trials,successes,verdict\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{},{},{}", c.n, c.d, c.trials, c.successes, c.verdict.as_str());
        }
        out
    }

    /// Tick/cross matrix with `d` across and `n` down.
    pub fn render(&self) -> String {
        let mut ns: Vec<usize> = self.cells.iter().map(|c| c.n).collect();
        let mut ds: Vec<usize> = self.cells.iter().map(|c| c.d).collect();
        ns.sort_unstable();
        ns.dedup();
        ds.sort_unstable();
        ds.dedup();
        let mut out = String::from("n\\d");
        for d in &ds {
            let _ = write!(out, "{d:>4}");
        }
        out.push('\n');
        for n in &ns {
            let _ = write!(out, "{n:>3}");
            for d in &ds {
                let mark = self.cell(*n, *d).map(|c| c.verdict.symbol()).unwrap_or(' ');
                let _ = write!(out, "{mark:>4}");
            }
            out.push('\n');
        }
        out
    }
}

struct TrialOutcome {
    success: bool,
    other: bool,
    iterations: usize,
}

fn run_trial(t: &SymTensor, frame: &Frame, seed: u64, opts: RunOptions) -> TrialOutcome {
    let mut rng = rng::rng_from_seed(seed);
    let x0 = rng::sample_sphere(&mut rng, t.dim());
    match power::run(t, &x0, opts, Some(&frame.factors)) {
        Ok(r) => TrialOutcome {
            success: matches!(r.limit_class, LimitClass::Frame { .. }),
            other: r.limit_class == LimitClass::Other,
            iterations: r.iterations,
        },
        Err(_) => TrialOutcome { success: false, other: false, iterations: opts.max_iter },
    }
}

fn grid_cell(n: usize, d: usize, trials: usize, seed: u64, opts: RunOptions) -> Result<GridCell> {
    let frame = frames::regular_simplex(n)?;
    let t = SymTensor::all_ones(frame.factors.clone(), d)?;
    let seeds: Vec<u64> = (0..trials as u64).map(|k| rng::derive_seed(seed, n as u64, d as u64, k)).collect();

    #[cfg(feature = "parallel")]
    let outcomes: Vec<TrialOutcome> = {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| run_trial(&t, &frame, s, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<TrialOutcome> = seeds.iter().map(|&s| run_trial(&t, &frame, s, opts)).collect();

    let successes = outcomes.iter().filter(|o| o.success).count();
    let others = outcomes.iter().filter(|o| o.other).count();
    let mean_iterations = if trials == 0 {
        0.0
    } else {
        outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / trials as f64
    };
    let rho_v1 = robustness::certify(&t, &frame.column(0), Some(&frame)).ok().map(|c| c.rho_numeric);
    Ok(GridCell {
        n,
        d,
        trials,
        successes,
        others,
        unconverged: trials - successes - others,
        mean_iterations,
        rho_v1,
        verdict: if successes == trials { Verdict::Tick } else { Verdict::Cross },
    })
}

/// Power method on `sum_i v_i^{(x)d}` for the regular simplex frame in
/// `R^n`, from `trials` uniform starts per `(n, d)` cell.
pub fn convergence_table(
    n_range: RangeInclusive<usize>,
    d_range: RangeInclusive<usize>,
    trials: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ConvergenceGrid> {
    if *n_range.start() < 2 || *d_range.start() < 2 {
        return Err(Error::InvalidArgs("n and d must be at least 2".into()));
    }
    let opts = RunOptions { max_iter, tol, record: false };
    let pairs: Vec<(usize, usize)> = n_range.flat_map(|n| d_range.clone().map(move |d| (n, d))).collect();

    #[cfg(feature = "parallel")]
    let cells: Result<Vec<GridCell>> = {
        use rayon::prelude::*;
        pairs.par_iter().map(|&(n, d)| grid_cell(n, d, trials, seed, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Result<Vec<GridCell>> = pairs.iter().map(|&(n, d)| grid_cell(n, d, trials, seed, opts)).collect();

    Ok(ConvergenceGrid { seed, max_iter, tol, cells: cells? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MbRow {
    pub vector: [Complex64; 2],
    pub eigenvalue: Complex64,
    /// Absent when the eigenvectors are not isolated.
    pub multiplicity: Option<usize>,
    pub normalization: Normalization,
    pub hermitian_vector: [Complex64; 2],
    pub hermitian_eigenvalue: Complex64,
    pub is_real: bool,
}

impl From<&EigenPair> for MbRow {
    fn from(p: &EigenPair) -> Self {
        MbRow {
            vector: p.vector,
            eigenvalue: p.eigenvalue,
            multiplicity: Some(p.multiplicity),
            normalization: p.normalization,
            hermitian_vector: p.hermitian_vector,
            hermitian_eigenvalue: p.hermitian_eigenvalue,
            is_real: p.is_real,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MbTable {
    pub d: usize,
    /// Every direction is an eigenvector; rows list representatives only.
    pub degenerate: bool,
    pub rows: Vec<MbRow>,
    pub total_multiplicity: Option<usize>,
}

fn real_row(t: &SymTensor, u: f64, v: f64) -> Result<MbRow> {
    let x = [Complex64::new(u, 0.0), Complex64::new(v, 0.0)];
    let mu = eigen2d::eigenvalue_of(t, &x)?;
    Ok(MbRow {
        vector: x,
        eigenvalue: mu,
        multiplicity: None,
        normalization: Normalization::Bilinear,
        hermitian_vector: x,
        hermitian_eigenvalue: mu,
        is_real: true,
    })
}

/// Eigenpairs of the Mercedes-Benz tensor for each order in `d_range`.
pub fn mb_tables(d_range: RangeInclusive<usize>) -> Result<Vec<MbTable>> {
    let frame = frames::mercedes_benz();
    let mut out = Vec::new();
    for d in d_range {
        if d < 3 {
            return Err(Error::InvalidArgs(format!("orders start at 3, got {d}")));
        }
        let t = SymTensor::all_ones(frame.factors.clone(), d)?;
        match eigen2d::all_eigenpairs_2d(&t) {
            Ok(e) => out.push(MbTable {
                d,
                degenerate: false,
                rows: e.pairs.iter().map(MbRow::from).collect(),
                total_multiplicity: Some(e.total),
            }),
            Err(Error::DegenerateForm) => {
                let mut rows = Vec::new();
                for j in 0..frame.len() {
                    let c = frame.column(j);
                    rows.push(real_row(&t, c[0], c[1])?);
                }
                rows.push(real_row(&t, 1.0, 0.0)?);
                out.push(MbTable { d, degenerate: true, rows, total_multiplicity: None });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn fmt_complex(z: Complex64, digits: usize) -> String {
    if z.im == 0.0 {
        format!("{:.*}", digits, z.re)
    } else if z.re == 0.0 {
        format!("{:.*}i", digits, z.im)
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{:.*}{}{:.*}i", digits, z.re, sign, digits, z.im.abs())
    }
}

fn fmt_vector(x: &[Complex64; 2], digits: usize) -> String {
    format!("({}, {})", fmt_complex(x[0], digits), fmt_complex(x[1], digits))
}

/// Plain-text rendering with 15 decimals for eigenvalues.
pub fn render_mb_tables(tables: &[MbTable]) -> String {
    let mut out = String::new();
    for table in tables {
        let _ = writeln!(out, "d = {}", table.d);
        if table.degenerate {
            let _ = writeln!(out, "  every direction is an eigenvector; representatives:");
        }
        for row in &table.rows {
            let mult = row.multiplicity.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
            let tag = match (row.normalization, row.is_real) {
                (Normalization::Isotropic, _) => "isotropic",
                (_, true) => "real",
                _ => "complex",
            };
            let _ = writeln!(
                out,
                "  {:<58} {:<40} {:>3}  {}",
                fmt_vector(&row.vector, 9),
                fmt_complex(row.eigenvalue, 15),
                mult,
                tag
            );
        }
        if let Some(total) = table.total_multiplicity {
            let _ = writeln!(out, "  total multiplicity {total}");
        }
    }
    out
}

pub fn mb_tables_csv(tables: &[MbTable]) -> String {
    let mut out = String::from("d,u_re,u_im,v_re,v_im,mu_re,mu_im,multiplicity,normalization\n");
    for t in tables {
        for r in &t.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{:?}",
                t.d,
                r.vector[0].re,
                r.vector[0].im,
                r.vector[1].re,
                r.vector[1].im,
                r.eigenvalue.re,
                r.eigenvalue.im,
                r.multiplicity.map(|m| m.to_string()).unwrap_or_default(),
                r.normalization
            );
        }
    }
    out
}

/// Symmetric Gaussian tensor: a Gaussian array averaged over index permutations.
pub fn symmetric_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, d: usize, cap: u128) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(n, d, cap)?;
    let raw = rng::gaussian_vec(rng, t.entries().len());
    let mut classes: HashMap<Vec<usize>, (f64, usize)> = HashMap::new();
    let mut keys = Vec::with_capacity(raw.len());
    let mut idx = vec![0usize; d];
    for &g in &raw {
        let mut key = idx.clone();
        key.sort_unstable();
        let e = classes.entry(key.clone()).or_insert((0.0, 0));
        e.0 += g;
        e.1 += 1;
        keys.push(key);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    for (slot, key) in t.entries_mut().iter_mut().zip(&keys) {
        let (sum, count) = classes[key];
        *slot = sum / count as f64;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub frame: String,
    pub d: usize,
    pub noise_fro: f64,
    pub tensor_fro: f64,
    pub starts: usize,
    pub converged: usize,
    /// Sign-aligned distance from each converged limit to the nearest frame vector.
    pub distances: Vec<f64>,
    pub max_distance: Option<f64>,
    pub mean_distance: Option<f64>,
}

/// Adds symmetric noise of Frobenius norm `noise_fro` to the all-ones frame
/// tensor and records how far power-method limits land from the frame.
pub fn perturbation_study(frame: &Frame, d: usize, noise_fro: f64, starts: usize, seed: u64) -> Result<PerturbationReport> {
    let t = SymTensor::all_ones(frame.factors.clone(), d)?;
    let tensor_fro = t.frobenius_norm();
    if !(noise_fro >= 0.0) || noise_fro > 0.1 * tensor_fro {
        return Err(Error::InvalidArgs(format!(
            "noise must lie in [0, 0.1 ||T||_F] = [0, {:.6}]",
            0.1 * tensor_fro
        )));
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut noise = symmetric_gaussian(&mut rng, t.dim(), d, DEFAULT_DENSE_CAP)?;
    let fro = noise.frobenius_norm();
    let scale = if fro > 0.0 { noise_fro / fro } else { 0.0 };
    noise.entries_mut().iter_mut().for_each(|x| *x *= scale);
    let perturbed = Perturbed { base: &t, noise };

    let opts = RunOptions { max_iter: 1000, tol: 1e-12, record: false };
    let mut distances = Vec::new();
    for _ in 0..starts {
        let x0 = rng::sample_sphere(&mut rng, t.dim());
        let r = power::run(&perturbed, &x0, opts, None)?;
        if r.converged {
            let x = DVector::from_vec(r.final_x);
            let best = (0..frame.len())
                .map(|j| power::sign_aligned_distance(&x, &frame.column(j)))
                .fold(f64::INFINITY, f64::min);
            distances.push(best);
        }
    }
    let max_distance = distances.iter().copied().reduce(f64::max);
    let mean_distance = (!distances.is_empty()).then(|| distances.iter().sum::<f64>() / distances.len() as f64);
    Ok(PerturbationReport {
        frame: frame.name.clone(),
        d,
        noise_fro,
        tensor_fro,
        starts,
        converged: distances.len(),
        distances,
        max_distance,
        mean_distance,
    })
}
