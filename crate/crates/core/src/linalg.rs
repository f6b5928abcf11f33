//! Small dense kernels: cyclic Jacobi for symmetric eigenproblems, one-sided
//! Jacobi for singular values and nullspaces, and Durand-Kerner for complex
//! polynomial roots.
//!
//! Everything here targets matrices of a few dozen rows at most.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_JACOBI_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigendecomposition `M = Q diag(values) Q^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one column per entry of `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Largest `|m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric eigensolver based on cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `1e-13 * ||M||_F`. The input must be square and symmetric within `1e-10`
/// (scaled by `max(1, ||M||_F)`).
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
    }
    let fro = m.norm();
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * fro.max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }

    // Work on the exactly symmetric part.
    let mut a = (m + m.transpose()) * 0.5;
    let mut q = DMatrix::<f64>::identity(n, n);
    let target = 1e-13 * fro;

    for _ in 0..MAX_JACOBI_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate_columns(&mut a, p, r, c, s);
                rotate_rows(&mut a, p, r, c, s);
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                rotate_columns(&mut q, p, r, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |row, col| q[(row, order[col])]);
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

fn rotate_columns(a: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..a.nrows() {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
}

fn rotate_rows(a: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..a.ncols() {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
}

/// Right singular system of `a` from one-sided (Hestenes) Jacobi.
///
/// Returns the singular values (one per column of `a`, unsorted) and the
/// orthonormal matrix whose columns are the matching right singular vectors.
fn one_sided_jacobi(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let k = a.ncols();
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(k, k);

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut u, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma = (0..k).map(|j| u.column(j).norm()).collect();
    (sigma, v)
}

/// Singular values of `a`, descending. Only the first `min(rows, cols)` can
/// be nonzero; the rest are reported as (numerical) zeros.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let (mut sigma, _) = one_sided_jacobi(a);
    sigma.sort_by(|x, y| y.total_cmp(x));
    sigma
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Numerical rank: number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sigma = singular_values(a);
    let max = sigma.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Orthonormal basis of `{x : A x = 0}`.
///
/// A right singular vector belongs to the kernel when its singular value is
/// at most `rel_tol * sigma_max`; a zero matrix has the whole space as kernel.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let (sigma, v) = one_sided_jacobi(a);
    let max = sigma.iter().copied().fold(0.0_f64, f64::max);
    sigma
        .iter()
        .enumerate()
        .filter(|(_, &s)| max == 0.0 || s <= rel_tol * max)
        .map(|(j, _)| v.column(j).into_owned())
        .collect()
}

/// Complex polynomial with coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyC {
    coeffs: Vec<Complex64>,
}

impl PolyC {
    /// Builds the polynomial, stripping exactly-zero leading coefficients.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == Complex64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `sum |c_i| |z|^i`, the natural scale for backward-error tests.
    pub fn abs_eval(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> PolyC {
        if self.coeffs.len() <= 1 {
            return PolyC::new(vec![Complex64::new(0.0, 0.0)]);
        }
        PolyC::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |acc, c| acc.max(c.norm()))
    }
}

/// A root together with its (cluster) multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

pub const MAX_DK_SWEEPS: usize = 1000;

/// All roots of `p` with multiplicities; see [`poly_roots_seeded`].
pub fn poly_roots(p: &PolyC, tol: f64) -> Result<Vec<Root>> {
    poly_roots_seeded(p, tol, 0)
}

/// Durand-Kerner (Weierstrass) simultaneous iteration.
///
/// Starts from a perturbed circle enclosing all roots, stops when the largest
/// relative update is at most `tol` or after [`MAX_DK_SWEEPS`] sweeps.
/// Approximations closer than `1e3 * tol` are merged into one root whose
/// multiplicity is the cluster size, so multiplicities always sum to the
/// degree. Different `seed`s rotate the starting circle.
pub fn poly_roots_seeded(p: &PolyC, tol: f64, seed: u64) -> Result<Vec<Root>> {
    let degree = p.degree();
    if degree == 0 {
        return Err(Error::InvalidArgs("polynomial of degree 0 has no roots".into()));
    }
    let coeffs = p.coeffs();

    // Exact zero roots are split off first.
    let zeros = coeffs.iter().take_while(|c| **c == Complex64::new(0.0, 0.0)).count();
    let mut roots = Vec::new();
    if zeros > 0 {
        roots.push(Root { value: Complex64::new(0.0, 0.0), multiplicity: zeros });
    }
    if zeros == degree {
        return Ok(roots);
    }

    let lead = coeffs[degree];
    let monic = PolyC::new(coeffs[zeros..].iter().map(|&c| c / lead).collect());
    let approx = durand_kerner(&monic, tol, seed)?;
    roots.extend(cluster_roots(&monic, &approx, 1e3 * tol));
    Ok(roots)
}

fn durand_kerner(p: &PolyC, tol: f64, seed: u64) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let a = p.coeffs();
    // Fujiwara bound on root moduli.
    let radius = (1..=n)
        .map(|k| {
            let c = a[n - k].norm();
            if k == n {
                (c / 2.0).powf(1.0 / k as f64)
            } else {
                c.powf(1.0 / k as f64)
            }
        })
        .fold(0.0_f64, f64::max)
        * 2.0;
    let radius = if radius > 0.0 { radius } else { 1.0 };

    let offset = 0.4 + 0.7 * (seed as f64);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + offset;
            let r = radius * (1.0 - 0.25 * k as f64 / n as f64);
            Complex64::from_polar(r, theta)
        })
        .collect();

    for _ in 0..MAX_DK_SWEEPS {
        let mut max_update = 0.0_f64;
        for k in 0..n {
            let zk = z[k];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != k {
                    denom *= zk - zj;
                }
            }
            if denom.norm() == 0.0 {
                z[k] = zk + Complex64::new(1e-8, 1e-8) * (1.0 + zk.norm());
                max_update = f64::INFINITY;
                continue;
            }
            let delta = p.eval(zk) / denom;
            z[k] = zk - delta;
            max_update = max_update.max(delta.norm() / zk.norm().max(1.0));
        }
        if max_update <= tol {
            return Ok(z);
        }
    }

    // Multiple roots converge only linearly and stall near sqrt(eps); accept
    // the result if every approximation has a small backward error.
    let residual = z
        .iter()
        .map(|&zk| p.eval(zk).norm() / p.abs_eval(zk).max(f64::MIN_POSITIVE))
        .fold(0.0_f64, f64::max);
    if residual <= 1e-8 {
        Ok(z)
    } else {
        Err(Error::NoConvergence { residual })
    }
}

fn cluster_roots(p: &PolyC, approx: &[Complex64], radius: f64) -> Vec<Root> {
    let n = approx.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = approx[i].norm().max(approx[j].norm()).max(1.0);
            if (approx[i] - approx[j]).norm() <= radius * scale {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj.max(ri)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: Vec<(usize, Vec<Complex64>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(approx[i]),
            None => groups.push((root, vec![approx[i]])),
        }
    }

    let mut groups: Vec<Vec<Complex64>> = groups.into_iter().map(|(_, m)| m).collect();
    merge_multiple_roots(p, &mut groups);

    let dp = p.derivative();
    groups
        .into_iter()
        .map(|members| {
            let m = members.len();
            let center = if m > 1 { refine_multiple(p, centroid(&members), m) } else { members[0] };
            Root { value: polish(p, &dp, center, m), multiplicity: m }
        })
        .collect()
}

fn centroid(members: &[Complex64]) -> Complex64 {
    members.iter().sum::<Complex64>() / members.len() as f64
}

/// Taylor coefficients `p^(k)(c) / k!` by repeated synthetic division.
fn taylor_at(p: &PolyC, c: Complex64) -> Vec<Complex64> {
    let mut work = p.coeffs().to_vec();
    let n = work.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        for i in (k..n - 1).rev() {
            let carry = work[i + 1] * c;
            work[i] += carry;
        }
        out.push(work[k]);
    }
    out
}

/// Newton on `p^(m-1)`, whose root is simple where `p` has an `m`-fold one.
fn refine_multiple(p: &PolyC, mut c: Complex64, m: usize) -> Complex64 {
    for _ in 0..6 {
        let t = taylor_at(p, c);
        if m >= t.len() || t[m].norm() == 0.0 {
            break;
        }
        c -= t[m - 1] / (t[m] * m as f64);
    }
    c
}

/// An `m`-fold root only resolves to about `eps^(1/m)`, so its approximations
/// can sit far outside the cluster radius. Neighbouring clusters are merged
/// when the Taylor expansion at their common centroid vanishes to the order
/// implied by the combined multiplicity.
fn merge_multiple_roots(p: &PolyC, groups: &mut Vec<Vec<Complex64>>) {
    const REACH: f64 = 1e-1;
    const FLAT: f64 = 1e-7;
    loop {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let (ci, cj) = (centroid(&groups[i]), centroid(&groups[j]));
                let dist = (ci - cj).norm();
                if dist <= REACH * ci.norm().max(cj.norm()).max(1.0) {
                    candidates.push((dist, i, j));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let accepted = candidates.into_iter().find(|&(_, i, j)| {
            let merged: Vec<Complex64> = groups[i].iter().chain(&groups[j]).copied().collect();
            let m = merged.len();
            let c = refine_multiple(p, centroid(&merged), m);
            // Coefficients in the variable (t - c) / h, so the test does not depend on |c|.
            let h = c.norm().max(1.0);
            let taylor: Vec<f64> = taylor_at(p, c).iter().enumerate().map(|(k, t)| t.norm() * h.powi(k as i32)).collect();
            let scale = taylor[m..].iter().fold(0.0_f64, |acc, &t| acc.max(t));
            scale > 0.0 && taylor[..m].iter().all(|&t| t <= FLAT * scale)
        });
        match accepted {
            Some((_, i, j)) => {
                let moved = groups.swap_remove(j);
                groups[i].extend(moved);
            }
            None => return,
        }
    }
}

/// Multiplicity-aware Newton refinement; keeps a step only if it lowers |p|.
fn polish(p: &PolyC, dp: &PolyC, mut z: Complex64, multiplicity: usize) -> Complex64 {
    let mut best = p.eval(z).norm();
    for _ in 0..8 {
        let d = dp.eval(z);
        if d.norm() == 0.0 || best == 0.0 {
            break;
        }
        let candidate = z - p.eval(z) / d * multiplicity as f64;
        let value = p.eval(candidate).norm();
        if value < best {
            z = candidate;
            best = value;
        } else {
            break;
        }
    }
    z
}
