//! Symmetric tensors in decomposition form `sum_i lambda_i v_i^{(x)d}`.
//!
//! All contractions go through the factor matrix; the dense representation
//! exists to check them by brute force and to carry unstructured noise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose norm is within this of 1 are kept bit-for-bit.
pub const UNIT_TOL: f64 = 1e-12;
/// Two unit columns closer than this (up to sign) are merged.
pub const COLINEAR_TOL: f64 = 1e-12;
/// Coefficients below this fraction of the largest input coefficient are dropped.
pub const PRUNE_TOL: f64 = 1e-12;
/// Residual below which a unit vector is accepted as an eigenvector.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
/// Default cap on the number of dense entries `n^d`.
pub const DEFAULT_DENSE_CAP: u128 = 10_000_000;

/// Anything the power iteration can be run on.
pub trait Contraction {
    fn dim(&self) -> usize;
    fn order(&self) -> usize;
    /// `T . x^{d-1}`.
    fn contract_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Real symmetric tensor stored as unit generators and coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymTensorJson", into = "SymTensorJson")]
pub struct SymTensor {
    factors: DMatrix<f64>,
    lambdas: Vec<f64>,
    order: usize,
}

impl SymTensor {
    /// Builds a tensor from generators (columns of `factors`) and coefficients.
    ///
    /// Columns are rescaled to unit norm (moving `norm^d` into the
    /// coefficient), colinear columns are merged with `lambda_k + s^d lambda_l`
    /// and vanishing coefficients are dropped. The represented tensor is
    /// unchanged.
    pub fn new(factors: DMatrix<f64>, lambdas: Vec<f64>, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgs(format!("order must be at least 2, got {order}")));
        }
        if factors.nrows() == 0 {
            return Err(Error::InvalidArgs("dimension must be at least 1".into()));
        }
        if factors.ncols() != lambdas.len() {
            return Err(Error::DimensionMismatch { expected: factors.ncols(), found: lambdas.len() });
        }
        if factors.iter().chain(lambdas.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgs("non-finite entry".into()));
        }

        let mut columns: Vec<DVector<f64>> = Vec::with_capacity(lambdas.len());
        let mut coeffs: Vec<f64> = Vec::with_capacity(lambdas.len());
        for (j, &lambda) in lambdas.iter().enumerate() {
            let col = factors.column(j).into_owned();
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::InvalidArgs(format!("column {j} is zero")));
            }
            if (norm - 1.0).abs() <= UNIT_TOL {
                columns.push(col);
                coeffs.push(lambda);
            } else {
                columns.push(col / norm);
                coeffs.push(lambda * norm.powi(order as i32));
            }
        }
        let scale = coeffs.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));

        let mut kept_cols: Vec<DVector<f64>> = Vec::new();
        let mut kept_lambdas: Vec<f64> = Vec::new();
        for (col, lambda) in columns.into_iter().zip(coeffs) {
            let merged = kept_cols.iter().position(|k| {
                (k - &col).norm() <= COLINEAR_TOL || (k + &col).norm() <= COLINEAR_TOL
            });
            match merged {
                Some(idx) => {
                    let same_sign = (&kept_cols[idx] - &col).norm() <= COLINEAR_TOL;
                    let sign = if same_sign || order % 2 == 0 { 1.0 } else { -1.0 };
                    kept_lambdas[idx] += sign * lambda;
                }
                None => {
                    kept_cols.push(col);
                    kept_lambdas.push(lambda);
                }
            }
        }

        let (cols, lambdas): (Vec<_>, Vec<_>) = kept_cols
            .into_iter()
            .zip(kept_lambdas)
            .filter(|(_, l)| l.abs() > PRUNE_TOL * scale)
            .unzip();
        if cols.is_empty() {
            return Err(Error::EmptyDecomposition);
        }
        Ok(Self { factors: DMatrix::from_columns(&cols), lambdas, order })
    }

    /// `sum_i v_i^{(x)d}` over the columns of `factors`.
    pub fn all_ones(factors: DMatrix<f64>, order: usize) -> Result<Self> {
        let r = factors.ncols();
        Self::new(factors, vec![1.0; r], order)
    }

    pub fn dim(&self) -> usize {
        self.factors.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factors.ncols()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn factors(&self) -> &DMatrix<f64> {
        &self.factors
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Same generators and coefficients at a different order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(self.factors.clone(), self.lambdas.clone(), order)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: len });
        }
        Ok(())
    }

    /// `T . x^{d-1} = V diag(lambda) (V^T x)^{.(d-1)}`.
    pub fn contract_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let mut w = self.factors.tr_mul(x);
        for (wi, li) in w.iter_mut().zip(&self.lambdas) {
            *wi = li * wi.powi(self.order as i32 - 1);
        }
        Ok(&self.factors * w)
    }

    /// `T . x^{d-2} = V diag(lambda) D(x) V^T` with `D(x) = diag((V^T x)^{.(d-2)})`.
    pub fn contract_mat(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x.len())?;
        let proj = self.factors.tr_mul(x);
        let n = self.dim();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (i, (&p, &l)) in proj.iter().zip(&self.lambdas).enumerate() {
            let weight = l * p.powi(self.order as i32 - 2);
            if weight != 0.0 {
                let v = self.factors.column(i);
                m.ger(weight, &v, &v, 1.0);
            }
        }
        Ok((&m + m.transpose()) * 0.5)
    }

    /// `T . x^{d-1}` for a complex vector (the tensor stays real).
    pub fn contract_vec_complex(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(x.len())?;
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, &lambda) in self.lambdas.iter().enumerate() {
            let v = self.factors.column(i);
            let s: Complex64 = v.iter().zip(x).map(|(&vk, &xk)| xk * vk).sum();
            let w = s.powu(self.order as u32 - 1) * lambda;
            for (o, &vk) in out.iter_mut().zip(v.iter()) {
                *o += w * vk;
            }
        }
        Ok(out)
    }

    /// Frobenius norm via `||T||_F^2 = sum_ij lambda_i lambda_j <v_i, v_j>^d`.
    pub fn frobenius_norm(&self) -> f64 {
        let gram = self.factors.tr_mul(&self.factors);
        let r = self.rank();
        let mut sum = 0.0;
        for i in 0..r {
            for j in 0..r {
                sum += self.lambdas[i] * self.lambdas[j] * gram[(i, j)].powi(self.order as i32);
            }
        }
        sum.max(0.0).sqrt()
    }

    /// Materializes all `n^d` entries.
    pub fn to_dense(&self, cap: u128) -> Result<DenseTensor> {
        let n = self.dim();
        let d = self.order;
        let entries = dense_len(n, d, cap)?;
        let mut data = vec![0.0; entries];
        let mut idx = vec![0usize; d];
        for slot in data.iter_mut() {
            let mut value = 0.0;
            for (i, &lambda) in self.lambdas.iter().enumerate() {
                let v = self.factors.column(i);
                value += lambda * idx.iter().map(|&k| v[k]).product::<f64>();
            }
            *slot = value;
            increment(&mut idx, n);
        }
        Ok(DenseTensor { n, d, entries: data })
    }
}

impl Contraction for SymTensor {
    fn dim(&self) -> usize {
        SymTensor::dim(self)
    }
    fn order(&self) -> usize {
        self.order
    }
    fn contract_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        SymTensor::contract_vec(self, x)
    }
}

/// Rayleigh value `mu = <T.v^{d-1}, v>` and residual `||T.v^{d-1} - mu v||`.
///
/// `v` is expected to have unit norm (within `1e-9`).
pub fn eigen_residual(t: &SymTensor, v: &DVector<f64>) -> Result<(f64, f64)> {
    let image = t.contract_vec(v)?;
    let mu = image.dot(v);
    let residual = (image - v * mu).norm();
    Ok((mu, residual))
}

fn dense_len(n: usize, d: usize, cap: u128) -> Result<usize> {
    let entries = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if entries > cap {
        return Err(Error::CapExceeded { entries, cap });
    }
    Ok(entries as usize)
}

/// Odometer increment of a multi-index, last position fastest.
fn increment(idx: &mut [usize], n: usize) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < n {
            return;
        }
        idx[k] = 0;
    }
}

/// Dense order-`d` tensor with entries in row-major multi-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    n: usize,
    d: usize,
    entries: Vec<f64>,
}

impl DenseTensor {
    pub fn from_entries(n: usize, d: usize, entries: Vec<f64>) -> Result<Self> {
        let expected = dense_len(n, d, u128::MAX)?;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: entries.len() });
        }
        Ok(Self { n, d, entries })
    }

    pub fn zeros(n: usize, d: usize, cap: u128) -> Result<Self> {
        let len = dense_len(n, d, cap)?;
        Ok(Self { n, d, entries: vec![0.0; len] })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Contracts the leading mode with `x`, `times` times.
    fn contract_leading(&self, x: &DVector<f64>, times: usize) -> Vec<f64> {
        let mut current = self.entries.clone();
        for _ in 0..times {
            let stride = current.len() / self.n;
            let mut next = vec![0.0; stride];
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                for (o, &c) in next.iter_mut().zip(&current[i * stride..(i + 1) * stride]) {
                    *o += xi * c;
                }
            }
            current = next;
        }
        current
    }

    /// Brute-force `T . x^{d-1}` straight from the entries.
    pub fn contract_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        Ok(DVector::from_vec(self.contract_leading(x, self.d - 1)))
    }

    /// Brute-force `T . x^{d-2}`.
    pub fn contract_mat(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: x.len() });
        }
        if self.d < 2 {
            return Err(Error::InvalidArgs("order below 2".into()));
        }
        let flat = self.contract_leading(x, self.d - 2);
        Ok(DMatrix::from_row_slice(self.n, self.n, &flat))
    }

    /// Largest `|T_I - T_{sigma(I)}|` over `samples` random index tuples and
    /// permutations drawn from `rng`.
    pub fn max_asymmetry<R: rand::Rng>(&self, samples: usize, rng: &mut R) -> f64 {
        use rand::seq::SliceRandom;
        let mut worst = 0.0_f64;
        let mut idx = vec![0usize; self.d];
        for _ in 0..samples {
            for i in idx.iter_mut() {
                *i = rng.gen_range(0..self.n);
            }
            let mut perm = idx.clone();
            perm.shuffle(rng);
            worst = worst.max((self.get(&idx) - self.get(&perm)).abs());
        }
        worst
    }
}

impl Contraction for DenseTensor {
    fn dim(&self) -> usize {
        self.n
    }
    fn order(&self) -> usize {
        self.d
    }
    fn contract_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        DenseTensor::contract_vec(self, x)
    }
}

/// A structured tensor plus a dense perturbation of the same shape.
#[derive(Debug, Clone)]
pub struct Perturbed<'a> {
    pub base: &'a SymTensor,
    pub noise: DenseTensor,
}

impl Contraction for Perturbed<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn order(&self) -> usize {
        self.base.order()
    }
    fn contract_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.base.contract_vec(x)? + self.noise.contract_vec(x)?)
    }
}

/// On-disk form: `{"n","r","d","lambdas","V"}` with `V` a list of columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymTensorJson {
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub lambdas: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
}

impl TryFrom<SymTensorJson> for SymTensor {
    type Error = Error;

    fn try_from(j: SymTensorJson) -> Result<Self> {
        if j.v.len() != j.r {
            return Err(Error::DimensionMismatch { expected: j.r, found: j.v.len() });
        }
        if j.lambdas.len() != j.r {
            return Err(Error::DimensionMismatch { expected: j.r, found: j.lambdas.len() });
        }
        if let Some(col) = j.v.iter().find(|c| c.len() != j.n) {
            return Err(Error::DimensionMismatch { expected: j.n, found: col.len() });
        }
        let factors = DMatrix::from_iterator(j.n, j.r, j.v.into_iter().flatten());
        SymTensor::new(factors, j.lambdas, j.d)
    }
}

impl From<SymTensor> for SymTensorJson {
    fn from(t: SymTensor) -> Self {
        SymTensorJson {
            n: t.dim(),
            r: t.rank(),
            d: t.order,
            v: t.factors.column_iter().map(|c| c.iter().copied().collect()).collect(),
            lambdas: t.lambdas,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mb(d: usize) -> SymTensor {
        let s = 3f64.sqrt() / 2.0;
        let v = DMatrix::from_column_slice(2, 3, &[0.0, 1.0, s, -0.5, -s, -0.5]);
        SymTensor::all_ones(v, d).unwrap()
    }

    #[test]
    fn mb_keeps_three_terms() {
        let t = mb(3);
        assert_eq!(t.rank(), 3);
        assert_eq!(t.lambdas(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn odd_order_cancellation_is_empty() {
        let v = DMatrix::from_column_slice(2, 2, &[0.6, 0.8, -0.6, -0.8]);
        assert_eq!(SymTensor::new(v, vec![1.0, 1.0], 3), Err(Error::EmptyDecomposition));
    }

    #[test]
    fn colinear_columns_merge() {
        let v = DMatrix::from_column_slice(2, 2, &[0.6, 0.8, 0.6, 0.8]);
        let t = SymTensor::new(v, vec![1.0, 2.0], 4).unwrap();
        assert_eq!(t.rank(), 1);
        assert_eq!(t.lambdas(), &[3.0]);
    }

    #[test]
    fn unnormalized_columns_move_scale_into_lambda() {
        let v = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let t = SymTensor::new(v, vec![1.0], 3).unwrap();
        assert_eq!(t.lambdas(), &[8.0]);
        assert_eq!(t.factors().column(0).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn construction_errors() {
        let v = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(matches!(SymTensor::new(v.clone(), vec![1.0, 2.0], 3), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(SymTensor::new(v.clone(), vec![1.0], 1), Err(Error::InvalidArgs(_))));
        let z = DMatrix::from_column_slice(2, 1, &[0.0, 0.0]);
        assert!(matches!(SymTensor::new(z, vec![1.0], 3), Err(Error::InvalidArgs(_))));
        assert_eq!(SymTensor::new(v, vec![0.0], 3), Err(Error::EmptyDecomposition));
    }

    #[test]
    fn contract_vec_mb_examples() {
        let v1 = DVector::from_vec(vec![0.0, 1.0]);
        let y = mb(3).contract_vec(&v1).unwrap();
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.75, epsilon = 1e-15);
        let y = mb(5).contract_vec(&v1).unwrap();
        assert_abs_diff_eq!(y[1], 15.0 / 16.0, epsilon = 1e-15);
        let zero = mb(4).contract_vec(&DVector::zeros(2)).unwrap();
        assert_eq!(zero.norm(), 0.0);
        assert!(matches!(mb(3).contract_vec(&DVector::zeros(3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn contract_mat_mb_examples() {
        let v1 = DVector::from_vec(vec![0.0, 1.0]);
        let m = mb(3).contract_mat(&v1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-0.75, 0.0, 0.0, 0.75]);
        assert!((m - expected).norm() < 1e-15);
        let m = mb(5).contract_mat(&v1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-3.0 / 16.0, 0.0, 0.0, 15.0 / 16.0]);
        assert!((m - expected).norm() < 1e-15);
    }

    #[test]
    fn order_two_contract_mat_ignores_x() {
        let t = mb(2);
        let a = t.contract_mat(&DVector::from_vec(vec![0.3, -0.2])).unwrap();
        let b = t.factors() * t.factors().transpose();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn dense_entries() {
        let dense = mb(3).to_dense(DEFAULT_DENSE_CAP).unwrap();
        // 1 + (-1/2)^3 + (-1/2)^3
        assert_abs_diff_eq!(dense.get(&[1, 1, 1]), 0.75, epsilon = 1e-15);

        let e1 = SymTensor::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), vec![1.0], 3).unwrap();
        let dense = e1.to_dense(DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(dense.get(&[0, 0, 0]), 1.0);
        assert_eq!(dense.entries().iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn dense_contraction_matches_mb() {
        let t = mb(3);
        let dense = t.to_dense(DEFAULT_DENSE_CAP).unwrap();
        let v1 = DVector::from_vec(vec![0.0, 1.0]);
        assert!((dense.contract_vec(&v1).unwrap() - t.contract_vec(&v1).unwrap()).norm() <= 1e-14);
    }

    #[test]
    fn dense_cap_is_enforced() {
        assert!(matches!(mb(30).to_dense(DEFAULT_DENSE_CAP), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn eigen_residual_examples() {
        let (mu, res) = eigen_residual(&mb(4), &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(mu, 9.0 / 8.0, epsilon = 1e-14);
        assert!(res <= 1e-14);
        let (_, res) = eigen_residual(&mb(5), &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!(res > 0.1);
    }

    #[test]
    fn frobenius_matches_dense() {
        let t = mb(5);
        let dense = t.to_dense(DEFAULT_DENSE_CAP).unwrap();
        assert_abs_diff_eq!(t.frobenius_norm(), dense.frobenius_norm(), epsilon = 1e-13);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let t = SymTensor::new(
            DMatrix::from_column_slice(3, 2, &[0.1, 0.2, 0.3, -1.0, 0.5, 0.25]),
            vec![1.0 / 3.0, -2.5e-7],
            5,
        )
        .unwrap();
        let text = serde_json::to_string(&t).unwrap();
        let back: SymTensor = serde_json::from_str(&text).unwrap();
        assert_eq!(t, back);
        for (a, b) in t.factors().iter().zip(back.factors().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_rejects_bad_shapes() {
        let text = r#"{"n":2,"r":2,"d":3,"lambdas":[1.0],"V":[[0.0,1.0],[1.0,0.0]]}"#;
        assert!(serde_json::from_str::<SymTensor>(text).is_err());
    }
}
