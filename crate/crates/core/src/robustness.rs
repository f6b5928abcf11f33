//! Jacobian of the power map at an eigenvector, its spectral radius, and the
//! analytic upper bounds that certify attraction.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{self, Frame};
use crate::linalg;
use crate::power;
use crate::tensor::{eigen_residual, SymTensor};

/// Largest eigen-residual accepted before forming a Jacobian.
pub const EIGEN_TOL: f64 = 1e-8;
/// Eigenvalues this small are treated as zero.
pub const MIN_EIGENVALUE: f64 = 1e-12;
/// Half-width of the undecided band around `rho = 1`.
pub const VERDICT_MARGIN: f64 = 1e-9;
/// Distance (up to sign) within which a vector is identified with a generator.
pub const MATCH_TOL: f64 = 1e-8;

/// `((d-1)/mu) (T.v^{d-2} - mu v v^T)`.
pub fn jacobian_at(t: &SymTensor, v: &DVector<f64>, mu: f64) -> Result<DMatrix<f64>> {
    if mu.abs() <= MIN_EIGENVALUE {
        return Err(Error::ZeroEigenvalue(mu));
    }
    let (_, residual) = eigen_residual(t, v)?;
    if residual > EIGEN_TOL {
        return Err(Error::NotAnEigenvector { residual });
    }
    let d = t.order() as f64;
    let mut m = t.contract_mat(v)?;
    m.ger(-mu, v, v, 1.0);
    m *= (d - 1.0) / mu;
    Ok((&m + m.transpose()) * 0.5)
}

/// Central-difference Jacobian of the normalized power map.
pub fn jacobian_fd(t: &SymTensor, v: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    let n = v.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mut plus = v.clone();
        let mut minus = v.clone();
        plus[k] += h;
        minus[k] -= h;
        let col = (power::step(t, &plus)? - power::step(t, &minus)?) / (2.0 * h);
        j.set_column(k, &col);
    }
    Ok(j)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_radius_sym(m: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::sym_eigen(m)?.spectral_radius())
}

/// Two links of the submultiplicativity chain for generator `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralBound {
    /// `|(d-1)/mu| ||sum_{i != j} lambda_i a_ij^{d-2} v_i v_i^T||_2`.
    pub tight: f64,
    /// `|(d-1)/mu| (r-1) max|lambda_i| max|a_ij|^{d-2}`.
    pub coarse: f64,
}

pub fn bound_general(t: &SymTensor, j: usize, mu: f64) -> Result<GeneralBound> {
    if mu.abs() <= MIN_EIGENVALUE {
        return Err(Error::ZeroEigenvalue(mu));
    }
    let r = t.rank();
    if j >= r {
        return Err(Error::InvalidArgs(format!("index {j} out of range for rank {r}")));
    }
    let v = t.factors();
    let d = t.order() as i32;
    let n = t.dim();
    let factor = ((d as f64 - 1.0) / mu).abs();
    let vj = v.column(j);

    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut max_lambda = 0.0_f64;
    let mut max_alpha = 0.0_f64;
    for i in (0..r).filter(|&i| i != j) {
        let a = v.column(i).dot(&vj);
        let vi = v.column(i);
        sum.ger(t.lambdas()[i] * a.powi(d - 2), &vi, &vi, 1.0);
        max_lambda = max_lambda.max(t.lambdas()[i].abs());
        max_alpha = max_alpha.max(a.abs());
    }
    let sum = (&sum + sum.transpose()) * 0.5;
    let tight = factor * spectral_radius_sym(&sum)?;
    let coarse = factor * (r as f64 - 1.0) * max_lambda * max_alpha.powi(d - 2);
    Ok(GeneralBound { tight, coarse })
}

/// `||VV^T||_2 alpha^{d-2} (d-1) / (min|lambda| (1 - alpha^{d-1}))`.
pub fn kernel_bound_value(vvt_norm: f64, alpha: f64, d: usize, min_lambda: f64) -> f64 {
    let d = d as i32;
    vvt_norm * alpha.powi(d - 2) * (d as f64 - 1.0) / (min_lambda * (1.0 - alpha.powi(d - 1)))
}

fn lambdas_in_kernel(t: &SymTensor) -> bool {
    let l = DVector::from_column_slice(t.lambdas());
    (t.factors() * &l).norm() <= frames::DEFAULT_FRAME_TOL * l.norm() * t.rank() as f64
}

/// Bound for an equiangular tensor of odd order whose coefficient vector
/// lies in `Ker(V)`; it applies to every generator at once.
pub fn bound_kernel_case(t: &SymTensor) -> Result<f64> {
    let frame = frames::validate_frame(t.factors(), frames::DEFAULT_FRAME_TOL)
        .map_err(|e| Error::PreconditionFailed(format!("generators are not equiangular: {e}")))?;
    kernel_case_for_frame(t, &frame)
}

fn kernel_case_for_frame(t: &SymTensor, frame: &Frame) -> Result<f64> {
    if t.order() % 2 == 0 {
        return Err(Error::PreconditionFailed(format!("order {} is even", t.order())));
    }
    if !lambdas_in_kernel(t) {
        return Err(Error::PreconditionFailed("coefficients are not in the kernel of V".into()));
    }
    let vvt = &frame.factors * frame.factors.transpose();
    let min_lambda = t.lambdas().iter().fold(f64::INFINITY, |acc, l| acc.min(l.abs()));
    Ok(kernel_bound_value(spectral_radius_sym(&vvt)?, frame.alpha, t.order(), min_lambda))
}

/// Bound and common eigenvalue `1 + alpha^{d-2}(r/n - 1)` for the all-ones
/// tensor on an ETF.
pub fn allones_value(n: usize, r: usize, alpha: f64, d: usize) -> (f64, f64) {
    let ratio = r as f64 / n as f64;
    let a = alpha.powi(d as i32 - 2);
    let eigenvalue = 1.0 + a * (ratio - 1.0);
    (ratio * a * (d as f64 - 1.0) / eigenvalue, eigenvalue)
}

/// Returns `(bound, eigenvalue)` for `sum_i v_i^{(x)d}` on an ETF of even order.
pub fn bound_allones_etf(frame: &Frame, d: usize) -> Result<(f64, f64)> {
    if !frame.is_etf {
        return Err(Error::NotEtf);
    }
    if d % 2 == 1 {
        return Err(Error::OddOrder(d));
    }
    Ok(allones_value(frame.dim(), frame.len(), frame.alpha, d))
}

/// `n^{d-1} + n - d - dn`, exactly.
pub fn gamma(n: usize, d: usize) -> Result<i128> {
    if n < 2 || d < 2 {
        return Err(Error::InvalidArgs(format!("gamma needs n, d >= 2, got n={n}, d={d}")));
    }
    let overflow = || Error::InvalidArgs(format!("gamma({n},{d}) overflows 128 bits"));
    let exp = u32::try_from(d - 1).map_err(|_| overflow())?;
    let (n, d) = (n as i128, d as i128);
    let power = n.checked_pow(exp).ok_or_else(overflow)?;
    power
        .checked_add(n)
        .and_then(|x| x.checked_sub(d))
        .and_then(|x| x.checked_sub(d.checked_mul(n)?))
        .ok_or_else(overflow)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Robust,
    NotCertified,
    CertifiedNonAttracting,
}

impl Verdict {
    pub fn from_rho(rho: f64) -> Self {
        if rho < 1.0 - VERDICT_MARGIN {
            Verdict::Robust
        } else if rho > 1.0 + VERDICT_MARGIN {
            Verdict::CertifiedNonAttracting
        } else {
            Verdict::NotCertified
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessCertificate {
    /// Generator matched by the vector (up to sign), if any.
    pub vector_index: Option<usize>,
    pub vector: Vec<f64>,
    pub mu: f64,
    pub residual: f64,
    pub rho_numeric: f64,
    pub bound_general: Option<GeneralBound>,
    pub bound_kernel: Option<f64>,
    pub bound_allones: Option<f64>,
    pub verdict: Verdict,
}

fn match_generator(factors: &DMatrix<f64>, v: &DVector<f64>) -> Option<usize> {
    factors
        .column_iter()
        .position(|c| power::sign_aligned_distance(&c.into_owned(), v) <= MATCH_TOL)
}

fn same_generators(frame: &Frame, t: &SymTensor) -> bool {
    frame.factors.shape() == t.factors().shape() && (&frame.factors - t.factors()).amax() <= MATCH_TOL
}

/// Numeric spectral radius plus every analytic bound whose hypotheses hold.
///
/// `context` is the frame the tensor was built on; without it the tensor's
/// own generators are tested for equiangularity.
pub fn certify(t: &SymTensor, v: &DVector<f64>, context: Option<&Frame>) -> Result<RobustnessCertificate> {
    if v.len() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: v.len() });
    }
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgs("vector must be nonzero".into()));
    }
    let v = v / norm;
    let (mu, residual) = eigen_residual(t, &v)?;
    if residual > EIGEN_TOL {
        return Err(Error::NotAnEigenvector { residual });
    }
    let jac = jacobian_at(t, &v, mu)?;
    let rho = spectral_radius_sym(&jac)?;

    let index = match_generator(t.factors(), &v);
    let own_frame;
    let frame = match context {
        Some(f) if same_generators(f, t) => Some(f),
        Some(_) => None,
        None => {
            own_frame = frames::validate_frame(t.factors(), frames::DEFAULT_FRAME_TOL).ok();
            own_frame.as_ref()
        }
    };

    let mut bound_general_value = None;
    let mut bound_kernel = None;
    let mut bound_allones = None;
    if let Some(j) = index {
        let vj = t.factors().column(j).into_owned();
        let (mu_j, _) = eigen_residual(t, &vj)?;
        bound_general_value = Some(bound_general(t, j, mu_j)?);
        if let Some(f) = frame {
            bound_kernel = kernel_case_for_frame(t, f).ok();
            let l0 = t.lambdas()[0];
            let all_equal = t.lambdas().iter().all(|&l| (l - l0).abs() <= 1e-12 * l0.abs());
            let parity_ok = t.order() % 2 == 0 || (0..f.len()).all(|i| f.signs[(i, j)] == 1);
            if f.is_etf && all_equal && parity_ok {
                bound_allones = Some(allones_value(f.dim(), f.len(), f.alpha, t.order()).0);
            }
        }
    }

    Ok(RobustnessCertificate {
        vector_index: index,
        vector: v.iter().copied().collect(),
        mu,
        residual,
        rho_numeric: rho,
        bound_general: bound_general_value,
        bound_kernel,
        bound_allones,
        verdict: Verdict::from_rho(rho),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mb(d: usize) -> SymTensor {
        SymTensor::all_ones(frames::mercedes_benz().factors, d).unwrap()
    }

    fn v1() -> DVector<f64> {
        DVector::from_vec(vec![0.0, 1.0])
    }

    #[test]
    fn jacobian_mb_order_three() {
        let j = jacobian_at(&mb(3), &v1(), 0.75).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 0.0]);
        assert!((&j - expected).amax() < 1e-14);
        assert_abs_diff_eq!(spectral_radius_sym(&j).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobian_mb_order_five() {
        let j = jacobian_at(&mb(5), &v1(), 15.0 / 16.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-0.8, 0.0, 0.0, 0.0]);
        assert!((&j - expected).amax() < 1e-14);
    }

    #[test]
    fn jacobian_odeco_is_zero() {
        let t = SymTensor::new(DMatrix::identity(3, 3), vec![1.0, 2.0, 3.0], 4).unwrap();
        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let j = jacobian_at(&t, &e2, 2.0).unwrap();
        assert!(j.amax() < 1e-15);
    }

    #[test]
    fn jacobian_preconditions() {
        assert_eq!(jacobian_at(&mb(3), &v1(), 0.0), Err(Error::ZeroEigenvalue(0.0)));
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(jacobian_at(&mb(5), &x, 1.0), Err(Error::NotAnEigenvector { .. })));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for d in 3..=8 {
            let t = mb(d);
            let (mu, _) = eigen_residual(&t, &v1()).unwrap();
            let j = jacobian_at(&t, &v1(), mu).unwrap();
            let fd = jacobian_fd(&t, &v1(), 1e-5).unwrap();
            assert!((j - fd).amax() < 1e-5, "d = {d}");
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 0.0]);
        assert_eq!(spectral_radius_sym(&m).unwrap(), 2.0);
        let f = frames::regular_simplex(2).unwrap();
        let vvt = &f.factors * f.factors.transpose();
        assert_abs_diff_eq!(spectral_radius_sym(&vvt).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn general_bound_examples() {
        let b = bound_general(&mb(5), 0, 15.0 / 16.0).unwrap();
        assert_abs_diff_eq!(b.tight, 0.8, epsilon = 1e-12);
        let b = bound_general(&mb(3), 0, 0.75).unwrap();
        assert_abs_diff_eq!(b.coarse, 8.0 / 3.0, epsilon = 1e-12);
        let odeco = SymTensor::new(DMatrix::identity(3, 3), vec![1.0, 1.0, 1.0], 5).unwrap();
        let b = bound_general(&odeco, 1, 1.0).unwrap();
        assert_eq!((b.tight, b.coarse), (0.0, 0.0));
    }

    #[test]
    fn kernel_bound_examples() {
        let t5 = SymTensor::all_ones(frames::regular_simplex(2).unwrap().factors, 5).unwrap();
        assert_abs_diff_eq!(bound_kernel_case(&t5).unwrap(), 0.8, epsilon = 1e-12);
        let t3 = t5.with_order(3).unwrap();
        assert_abs_diff_eq!(bound_kernel_case(&t3).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(kernel_bound_value(1.0, 0.0, 5, 1.0), 0.0);
        assert!(matches!(bound_kernel_case(&t5.with_order(4).unwrap()), Err(Error::PreconditionFailed(_))));
        let ico = SymTensor::all_ones(frames::icosahedron().factors, 5).unwrap();
        assert!(matches!(bound_kernel_case(&ico), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn allones_bound_examples() {
        let (b, mu) = bound_allones_etf(&frames::mercedes_benz(), 6).unwrap();
        assert_abs_diff_eq!(b, 5.0 / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu, 33.0 / 32.0, epsilon = 1e-12);
        let (b, _) = bound_allones_etf(&frames::icosahedron(), 6).unwrap();
        assert_abs_diff_eq!(b, 0.4 / 1.04, epsilon = 1e-12);
        let (b, _) = bound_allones_etf(&frames::mercedes_benz(), 4).unwrap();
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-12);
        assert_eq!(bound_allones_etf(&frames::mercedes_benz(), 5), Err(Error::OddOrder(5)));
        assert_eq!(bound_allones_etf(&frames::es_r4_6lines(), 6), Err(Error::NotEtf));
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(2, 5).unwrap(), 3);
        assert_eq!(gamma(3, 4).unwrap(), 14);
        assert_eq!(gamma(4, 3).unwrap(), 5);
        assert!(gamma(1, 3).is_err());
        assert!(gamma(1000, 60).is_err());
    }

    #[test]
    fn certify_examples() {
        let c = certify(&mb(5), &v1(), None).unwrap();
        assert_eq!(c.verdict, Verdict::Robust);
        assert_abs_diff_eq!(c.rho_numeric, 0.8, epsilon = 1e-12);
        assert_eq!(c.vector_index, Some(0));
        assert!(c.bound_kernel.is_some());

        let c = certify(&mb(3), &v1(), None).unwrap();
        assert_eq!(c.verdict, Verdict::CertifiedNonAttracting);
        assert_abs_diff_eq!(c.rho_numeric, 2.0, epsilon = 1e-12);

        let f = frames::regular_simplex(4).unwrap();
        let t = SymTensor::all_ones(f.factors.clone(), 3).unwrap();
        let c = certify(&t, &f.column(0), Some(&f)).unwrap();
        assert_eq!(c.verdict, Verdict::Robust);
    }

    #[test]
    fn certify_marks_the_margin_band() {
        let c = certify(&mb(4), &v1(), None).unwrap();
        assert_eq!(c.verdict, Verdict::NotCertified);
        assert_abs_diff_eq!(c.bound_allones.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn icosahedron_first_column_keeps_allones_bound_at_odd_order() {
        let f = frames::icosahedron();
        let t = SymTensor::all_ones(f.factors.clone(), 5).unwrap();
        let c = certify(&t, &f.column(0), Some(&f)).unwrap();
        assert_eq!(c.verdict, Verdict::Robust);
        let b = c.bound_allones.unwrap();
        assert!(b < 1.0 && b >= c.rho_numeric - 1e-8);
        assert!(certify(&t, &f.column(1), Some(&f)).is_err());
    }
}
