//! All complex eigenpairs of a symmetric tensor on `C^2`.
//!
//! `x = (u, v)` is an eigenvector iff `g(u, v) = y_1 v - y_2 u` vanishes,
//! where `y = T.x^{d-1}`. `g` is a binary form of degree `d`; its roots in
//! `t = u / v` plus the root at infinity (`v = 0`) are the eigendirections.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, PolyC};
use crate::power::sign_aligned_distance;
use crate::tensor::SymTensor;

/// Coefficients below this fraction of the form's natural scale are dropped.
pub const NEGLIGIBLE: f64 = 1e-12;
/// Root-finder tolerance used for the eigen-form.
pub const ROOT_TOL: f64 = 1e-12;
/// `|u^2 + v^2|` at or below this (Hermitian-unit `x`) marks an isotropic direction.
pub const ISOTROPIC_TOL: f64 = 1e-8;
/// Imaginary parts at or below this (relative) are rounded away.
pub const REAL_TOL: f64 = 1e-9;
/// Below this relative size the leading coefficient triggers a change of coordinates.
pub const WEAK_LEAD: f64 = 1e-6;

const SEEDS: u64 = 4;

/// The eigen-form as a polynomial in `t = u / v`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenForm {
    pub poly: PolyC,
    /// How many leading coefficients vanished: multiplicity of `(1, 0)`.
    pub infinity_multiplicity: usize,
    pub order: usize,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `g(t, 1) = sum_i lambda_i (a_i t + b_i)^{d-1} (a_i - b_i t)` for `v_i = (a_i, b_i)`.
pub fn eigen_form(t: &SymTensor) -> Result<EigenForm> {
    if t.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: t.dim() });
    }
    let d = t.order();
    let mut coeffs = vec![0.0; d + 1];
    let mut scale = 0.0;
    for (col, &lambda) in t.factors().column_iter().zip(t.lambdas()) {
        let (a, b) = (col[0], col[1]);
        scale += lambda.abs() * (a.abs() + b.abs()).powi(d as i32);
        for k in 0..d {
            let c = lambda * binomial(d - 1, k) * a.powi(k as i32) * b.powi((d - 1 - k) as i32);
            coeffs[k] += c * a;
            coeffs[k + 1] -= c * b;
        }
    }
    let cut = NEGLIGIBLE * scale;
    let mut infinity = 0;
    while coeffs.last().is_some_and(|c| c.abs() <= cut) {
        coeffs.pop();
        infinity += 1;
    }
    if coeffs.is_empty() {
        return Err(Error::DegenerateForm);
    }
    Ok(EigenForm { poly: PolyC::from_real(&coeffs), infinity_multiplicity: infinity, order: d })
}

/// Number of complex eigenvectors of a generic tensor, `((d-1)^n - 1)/(d-2)`.
pub fn cs_count(n: usize, d: usize) -> Result<u128> {
    if d < 3 || n == 0 {
        return Err(Error::InvalidArgs(format!("count needs n >= 1 and d >= 3, got n={n}, d={d}")));
    }
    let base = (d - 1) as u128;
    let power = base
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidArgs(format!("count overflows for n={n}, d={d}")))?;
    Ok((power - 1) / (d - 2) as u128)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Normalization {
    /// `u^2 + v^2 = 1`.
    Bilinear,
    /// `u^2 + v^2 = 0`; Hermitian unit norm, second coordinate real and positive.
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenPair {
    pub vector: [Complex64; 2],
    pub eigenvalue: Complex64,
    pub multiplicity: usize,
    pub normalization: Normalization,
    /// Hermitian-unit representative with real non-negative second coordinate.
    pub hermitian_vector: [Complex64; 2],
    pub hermitian_eigenvalue: Complex64,
    pub is_real: bool,
    /// Generator matched up to sign, for real directions.
    pub generator: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigen2d {
    pub order: usize,
    pub pairs: Vec<EigenPair>,
    pub total: usize,
    pub expected: usize,
}

impl Eigen2d {
    /// Multiplicities add up to the generic count.
    pub fn is_complete(&self) -> bool {
        self.total == self.expected
    }
}

/// Eigenvalue for a fixed representative, dividing by the larger coordinate.
pub fn eigenvalue_of(t: &SymTensor, x: &[Complex64; 2]) -> Result<Complex64> {
    let y = t.contract_vec_complex(x)?;
    let c = if x[0].norm() >= x[1].norm() { 0 } else { 1 };
    Ok(y[c] / x[c])
}

/// `||T.x^{d-1} - mu x||` for a complex representative.
pub fn residual_of(t: &SymTensor, x: &[Complex64; 2], mu: Complex64) -> Result<f64> {
    let y = t.contract_vec_complex(x)?;
    Ok(((y[0] - mu * x[0]).norm_sqr() + (y[1] - mu * x[1]).norm_sqr()).sqrt())
}

fn hermitian_rep(x: [Complex64; 2]) -> [Complex64; 2] {
    let norm = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    let mut h = [x[0] / norm, x[1] / norm];
    if h[1].norm() > 0.0 {
        let phase = h[1].conj() / h[1].norm();
        h = [h[0] * phase, Complex64::new(h[1].norm(), 0.0)];
    } else {
        let phase = h[0].conj() / h[0].norm();
        h = [Complex64::new(h[0].norm(), 0.0), h[1] * phase];
    }
    h
}

fn snap(z: Complex64) -> Complex64 {
    if z.im.abs() <= REAL_TOL * z.norm().max(1.0) {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}

fn build_pair(t: &SymTensor, x: [Complex64; 2], multiplicity: usize) -> Result<EigenPair> {
    let hermitian = hermitian_rep(x);
    let bilinear_sq = hermitian[0] * hermitian[0] + hermitian[1] * hermitian[1];
    let isotropic = bilinear_sq.norm() <= ISOTROPIC_TOL;

    let mut generator = None;
    let (vector, normalization, is_real) = if isotropic {
        (hermitian, Normalization::Isotropic, false)
    } else {
        let s = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let mut b = [snap(x[0] / s), snap(x[1] / s)];
        let is_real = b[0].im == 0.0 && b[1].im == 0.0;
        if is_real {
            let real = DVector::from_vec(vec![b[0].re, b[1].re]);
            generator = t
                .factors()
                .column_iter()
                .position(|c| sign_aligned_distance(&c.into_owned(), &real) <= 1e-8);
        }
        let flip = match generator {
            Some(j) => {
                let col = t.factors().column(j);
                b[0].re * col[0] + b[1].re * col[1] < 0.0
            }
            None => {
                let big = if b[0].norm() >= b[1].norm() { b[0] } else { b[1] };
                let arg = big.arg();
                !(arg > -std::f64::consts::FRAC_PI_2 && arg <= std::f64::consts::FRAC_PI_2)
            }
        };
        if flip {
            b = [-b[0], -b[1]];
        }
        (b, Normalization::Bilinear, is_real)
    };

    let eigenvalue = snap(eigenvalue_of(t, &vector)?);
    let hermitian_eigenvalue = snap(eigenvalue_of(t, &hermitian)?);
    Ok(EigenPair {
        vector,
        eigenvalue,
        multiplicity,
        normalization,
        hermitian_vector: hermitian,
        hermitian_eigenvalue,
        is_real,
        generator,
    })
}

fn form_scale(t: &SymTensor) -> f64 {
    let d = t.order() as i32;
    t.factors()
        .column_iter()
        .zip(t.lambdas())
        .map(|(c, l)| l.abs() * (c[0].abs() + c[1].abs()).powi(d))
        .sum()
}

fn leading(form: &EigenForm) -> f64 {
    form.poly.coeffs().last().map_or(0.0, |c| c.norm())
}

/// Every eigendirection of a tensor on `C^2`, with multiplicities.
pub fn all_eigenpairs_2d(t: &SymTensor) -> Result<Eigen2d> {
    let form = eigen_form(t)?;
    let scale = form_scale(t);
    if leading(&form) >= WEAK_LEAD * scale {
        return solve_form(t, form);
    }
    // A root sits close to (1, 0) without being on it, and a multiple one
    // would straddle infinity. Solve in rotated coordinates instead.
    let d = t.order();
    let rotation = |phi: f64| {
        let (s, c) = phi.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    };
    let mut best: Option<(f64, DMatrix<f64>, SymTensor)> = None;
    for k in 0..d + 2 {
        let r = rotation((k as f64 + 0.5) * std::f64::consts::PI / (d + 2) as f64);
        let rotated = SymTensor::new(r.transpose() * t.factors(), t.lambdas().to_vec(), d)?;
        let lead = eigen_form(&rotated).map(|f| if f.infinity_multiplicity == 0 { leading(&f) } else { 0.0 })?;
        if best.as_ref().is_none_or(|b| lead > b.0) {
            best = Some((lead, r, rotated));
        }
    }
    let (_, r, rotated) = best.expect("at least one candidate rotation");
    let inner = solve_form(&rotated, eigen_form(&rotated)?)?;
    let mut pairs = Vec::with_capacity(inner.pairs.len());
    for p in inner.pairs {
        let y = p.vector;
        let x = [y[0] * r[(0, 0)] + y[1] * r[(0, 1)], y[0] * r[(1, 0)] + y[1] * r[(1, 1)]];
        pairs.push(build_pair(t, x.map(snap), p.multiplicity)?);
    }
    Ok(Eigen2d { pairs, ..inner })
}

fn solve_form(t: &SymTensor, form: EigenForm) -> Result<Eigen2d> {
    let d = form.order;
    let mut roots = Vec::new();
    if form.poly.degree() > 0 {
        let mut last = None;
        for seed in 0..SEEDS {
            match linalg::poly_roots_seeded(&form.poly, ROOT_TOL, seed) {
                Ok(r) => {
                    roots = r;
                    last = None;
                    break;
                }
                Err(e) => last = Some(e),
            }
        }
        if let Some(e) = last {
            return Err(e);
        }
    }

    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut pairs = Vec::with_capacity(roots.len() + 1);
    for root in roots {
        pairs.push(build_pair(t, [snap(root.value), one], root.multiplicity)?);
    }
    if form.infinity_multiplicity > 0 {
        pairs.push(build_pair(t, [one, zero], form.infinity_multiplicity)?);
    }
    let total = pairs.iter().map(|p| p.multiplicity).sum();
    let expected = cs_count(2, d.max(3)).map(|c| c as usize).unwrap_or(d);
    Ok(Eigen2d { order: d, pairs, total, expected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn mb(d: usize) -> SymTensor {
        SymTensor::all_ones(frames::mercedes_benz().factors, d).unwrap()
    }

    fn real_values(e: &Eigen2d) -> Vec<f64> {
        e.pairs.iter().filter(|p| p.is_real).map(|p| p.eigenvalue.re).collect()
    }

    #[test]
    fn mb_order_three_is_the_frame() {
        let e = all_eigenpairs_2d(&mb(3)).unwrap();
        assert_eq!(e.pairs.len(), 3);
        assert!(e.is_complete());
        for p in &e.pairs {
            assert!(p.generator.is_some());
            assert_eq!(p.multiplicity, 1);
            assert_abs_diff_eq!(p.eigenvalue.re, 0.75, epsilon = 1e-12);
            assert_abs_diff_eq!(p.eigenvalue.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_one_has_a_root_at_infinity() {
        let t = SymTensor::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), vec![1.0], 3).unwrap();
        let form = eigen_form(&t).unwrap();
        assert_eq!(form.infinity_multiplicity, 2);
        let e = all_eigenpairs_2d(&t).unwrap();
        assert_eq!(e.total, 3);
        let inf = e.pairs.iter().find(|p| p.vector[1].norm() == 0.0).unwrap();
        assert_eq!(inf.multiplicity, 2);
        assert_eq!(inf.eigenvalue.norm(), 0.0);
    }

    #[test]
    fn mb_order_four_is_degenerate() {
        assert_eq!(eigen_form(&mb(4)), Err(Error::DegenerateForm));
    }

    #[test]
    fn mb_order_seven_isotropic_pairs() {
        let e = all_eigenpairs_2d(&mb(7)).unwrap();
        assert!(e.is_complete());
        let iso: Vec<_> = e.pairs.iter().filter(|p| p.normalization == Normalization::Isotropic).collect();
        assert_eq!(iso.len(), 2);
        for p in iso {
            assert_eq!(p.multiplicity, 2);
            assert!(p.eigenvalue.norm() < 1e-9);
        }
        let reals = real_values(&e);
        assert_eq!(reals.len(), 3);
        assert!(reals.iter().all(|&m| (m - 63.0 / 64.0).abs() < 1e-12));
    }

    #[test]
    fn mb_order_five_isotropic_value() {
        let e = all_eigenpairs_2d(&mb(5)).unwrap();
        let want = 3.0 * 2f64.sqrt() / 8.0;
        let iso: Vec<_> = e.pairs.iter().filter(|p| p.normalization == Normalization::Isotropic).collect();
        assert_eq!(iso.len(), 2);
        for p in iso {
            assert!((p.eigenvalue - Complex64::new(want, 0.0)).norm() < 1e-9, "{:?}", p.eigenvalue);
        }
    }

    #[test]
    fn mb_order_ten_half_angle_rows() {
        let e = all_eigenpairs_2d(&mb(10)).unwrap();
        assert!(e.is_complete());
        let s = 3f64.sqrt() / 2.0;
        for target in [[0.5, s], [-0.5, s], [1.0, 0.0]] {
            let p = e
                .pairs
                .iter()
                .find(|p| p.is_real && (p.vector[0].re - target[0]).abs() < 1e-9 && (p.vector[1].re - target[1]).abs() < 1e-9)
                .unwrap_or_else(|| panic!("missing {target:?}"));
            assert_abs_diff_eq!(p.eigenvalue.re, 243.0 / 512.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn residuals_and_normalizations_hold() {
        for d in (3..=10).filter(|&d| d != 4) {
            let t = mb(d);
            let e = all_eigenpairs_2d(&t).unwrap();
            assert!(e.is_complete(), "d = {d}");
            for p in &e.pairs {
                let res = residual_of(&t, &p.vector, p.eigenvalue).unwrap();
                assert!(res <= 1e-8 * (1.0 + p.eigenvalue.norm()), "d = {d}, {p:?}");
                let q = p.vector[0] * p.vector[0] + p.vector[1] * p.vector[1];
                match p.normalization {
                    Normalization::Bilinear => assert!((q - 1.0).norm() <= 1e-9),
                    Normalization::Isotropic => {
                        assert!(q.norm() <= 1e-9);
                        assert!((p.vector[0].norm_sqr() + p.vector[1].norm_sqr() - 1.0).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn mb_order_eight_isotropic_value() {
        let e = all_eigenpairs_2d(&mb(8)).unwrap();
        let iso: Vec<_> = e.pairs.iter().filter(|p| p.normalization == Normalization::Isotropic).collect();
        assert_eq!(iso.len(), 2);
        for p in iso {
            assert!((p.eigenvalue - Complex64::new(3.0 / 16.0, 0.0)).norm() < 1e-9, "{:?}", p.eigenvalue);
        }
    }

    #[test]
    fn mb_order_nine_complex_rows() {
        let e = all_eigenpairs_2d(&mb(9)).unwrap();
        assert!(e.is_complete());
        let complex: Vec<_> = e.pairs.iter().filter(|p| !p.is_real).collect();
        assert_eq!(complex.len(), 6);
        // Printed ratio u/v of the first complex row.
        let ratio = Complex64::new(0.393942, -0.624439);
        assert!(complex.iter().any(|p| (p.hermitian_vector[0] / p.hermitian_vector[1] - ratio).norm() < 1e-5));
        let printed = [Complex64::new(-0.234194, -0.107117), Complex64::new(0.257529, 0.0)];
        for want in printed {
            let hit = complex.iter().any(|p| {
                let m = p.hermitian_eigenvalue;
                (m - want).norm().min((m + want).norm()) < 1e-5
            });
            assert!(hit, "{want}");
        }
    }

    #[test]
    fn cs_count_examples() {
        for d in 3..=10 {
            assert_eq!(cs_count(2, d).unwrap(), d as u128);
        }
        assert_eq!(cs_count(3, 3).unwrap(), 7);
        assert!(cs_count(2, 2).is_err());
    }

    #[test]
    fn rejects_higher_dimensions() {
        let t = SymTensor::all_ones(frames::cube_diagonals().factors, 3).unwrap();
        assert!(matches!(eigen_form(&t), Err(Error::DimensionMismatch { .. })));
    }
}
