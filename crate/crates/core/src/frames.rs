//! Equiangular sets, equiangular tight frames, and the concrete catalog.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_FRAME_TOL: f64 = 1e-10;
pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;

/// Unit-column matrix with a common coherence `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub name: String,
    pub factors: DMatrix<f64>,
    pub alpha: f64,
    /// `signs[(i, j)] * alpha = <v_i, v_j>`, unit diagonal.
    pub signs: DMatrix<i8>,
    pub is_etf: bool,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.factors.nrows()
    }

    pub fn len(&self) -> usize {
        self.factors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.ncols() == 0
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.factors.column(j).into_owned()
    }

    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        f64::from(self.signs[(i, j)])
    }

    fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// Lower bound on the coherence of `r` unit vectors in `R^n`.
pub fn welch_bound(n: usize, r: usize) -> Result<f64> {
    if n == 0 || r < n {
        return Err(Error::InvalidArgs(format!("welch bound needs r >= n >= 1, got n={n}, r={r}")));
    }
    if r == n {
        return Ok(0.0);
    }
    Ok((((r - n) as f64) / ((n * (r - 1)) as f64)).sqrt())
}

/// Checks unit norms and equiangularity, fills in `alpha`, signs and the ETF flag.
pub fn validate_frame(v: &DMatrix<f64>, tol: f64) -> Result<Frame> {
    let (n, r) = v.shape();
    if n == 0 || r == 0 {
        return Err(Error::InvalidArgs("frame needs at least one row and one column".into()));
    }
    for (j, col) in v.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > tol {
            return Err(Error::NotUnitNorm { column: j, norm });
        }
    }
    let gram = v.tr_mul(v);

    let mut alpha = 0.0;
    if r >= 2 {
        let reference = gram[(0, 1)].abs();
        let mut worst = (0, 1, 0.0_f64);
        let mut sum = 0.0;
        for i in 0..r {
            for j in i + 1..r {
                let a = gram[(i, j)].abs();
                sum += a;
                let dev = (a - reference).abs();
                if dev > worst.2 {
                    worst = (i, j, dev);
                }
            }
        }
        if worst.2 > tol {
            return Err(Error::NotEquiangular { i: worst.0, j: worst.1, spread: worst.2 });
        }
        alpha = sum / (r * (r - 1) / 2) as f64;
    }

    let mut signs = DMatrix::<i8>::from_element(r, r, 1);
    if alpha > tol {
        for i in 0..r {
            for j in 0..r {
                if i != j && gram[(i, j)] < 0.0 {
                    signs[(i, j)] = -1;
                }
            }
        }
    }

    let tight = r as f64 / n as f64;
    let outer = v * v.transpose() - DMatrix::<f64>::identity(n, n) * tight;
    let tight_ok = outer.amax() <= tol * tight.max(1.0);
    let welch_ok = r >= n && (alpha - welch_bound(n, r)?).abs() <= tol;
    let is_etf = tight_ok && welch_ok;

    Ok(Frame { name: String::new(), factors: v.clone(), alpha, signs, is_etf })
}

fn catalog_frame(n: usize, r: usize, scale: f64, entries_row_major: &[f64], name: &str) -> Frame {
    let v = DMatrix::from_row_slice(n, r, entries_row_major) * scale;
    validate_frame(&v, DEFAULT_FRAME_TOL)
        .expect("catalog frame is equiangular")
        .named(name)
}

/// Three unit vectors at 120 degrees in the plane.
pub fn mercedes_benz() -> Frame {
    let s = 3f64.sqrt() / 2.0;
    catalog_frame(2, 3, 1.0, &[0.0, s, -s, 1.0, -0.5, -0.5], "mb")
}

/// The four diagonals of a cube in `R^3`.
pub fn cube_diagonals() -> Frame {
    #[rustfmt::skip]
    let m = [
        1.0, -1.0, -1.0, -1.0,
        1.0,  1.0, -1.0,  1.0,
        1.0,  1.0,  1.0, -1.0,
    ];
    catalog_frame(3, 4, 1.0 / 3f64.sqrt(), &m, "cube")
}

/// The six diagonals of a regular icosahedron in `R^3`.
pub fn icosahedron() -> Frame {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    #[rustfmt::skip]
    let m = [
        0.0, 0.0, 1.0, -1.0, p, -p,
        1.0, -1.0, p, p, 0.0, 0.0,
        p, p, 0.0, 0.0, 1.0, 1.0,
    ];
    catalog_frame(3, 6, 1.0 / (1.0 + p * p).sqrt(), &m, "icosahedron")
}

/// Sixteen equiangular lines in `R^6`.
pub fn lines16_r6() -> Frame {
    #[rustfmt::skip]
    let m: [f64; 96] = [
        1., -1., -1., -1., -1., -1.,  1.,  1.,  1.,  1.,  1.,  1.,  1.,  1.,  1.,  1.,
        1., -1.,  1.,  1.,  1.,  1., -1., -1., -1., -1.,  1.,  1.,  1.,  1.,  1.,  1.,
        1.,  1., -1.,  1.,  1.,  1., -1.,  1.,  1.,  1., -1., -1., -1.,  1.,  1.,  1.,
        1.,  1.,  1., -1.,  1.,  1.,  1., -1.,  1.,  1., -1.,  1.,  1., -1., -1.,  1.,
        1.,  1.,  1.,  1., -1.,  1.,  1.,  1., -1.,  1.,  1., -1.,  1., -1.,  1., -1.,
        1.,  1.,  1.,  1.,  1., -1.,  1.,  1.,  1., -1.,  1.,  1., -1.,  1., -1., -1.,
    ];
    catalog_frame(6, 16, 1.0 / 6f64.sqrt(), &m, "lines16")
}

/// Six equiangular lines in `R^4` that are not a tight frame.
pub fn es_r4_6lines() -> Frame {
    let a = 1.0 / 3.0;
    let b = 2f64.sqrt() / 3.0;
    let c = 6f64.sqrt() / 3.0;
    #[rustfmt::skip]
    let m = [
        1.0, a, a, a, a, a,
        0.0, 2.0 * b, -b, -b, -b, -b,
        0.0, 0.0, c, 0.0, -c, 0.0,
        0.0, 0.0, 0.0, c, 0.0, -c,
    ];
    catalog_frame(4, 6, 1.0, &m, "es6")
}

/// The `n + 1` vertices of a regular simplex centred at the origin.
pub fn regular_simplex(n: usize) -> Result<Frame> {
    if n < 2 {
        return Err(Error::InvalidArgs(format!("regular simplex needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let diag = (1.0 + 1.0 / nf).sqrt();
    let shift = ((nf + 1.0).sqrt() - 1.0) / nf.powf(1.5);
    let mut v = DMatrix::<f64>::from_element(n, n + 1, -shift);
    for i in 0..n {
        v[(i, i)] += diag;
        v[(i, n)] = -1.0 / nf.sqrt();
    }
    Ok(validate_frame(&v, DEFAULT_FRAME_TOL)?.named(&format!("simplex:{n}")))
}

/// The fixed catalog: every named frame plus the 3-dimensional simplex.
pub fn catalog() -> Vec<Frame> {
    vec![
        mercedes_benz(),
        cube_diagonals(),
        icosahedron(),
        lines16_r6(),
        es_r4_6lines(),
        regular_simplex(3).expect("n = 3 is valid"),
    ]
}

/// Looks up `mb`, `cube`, `icosahedron`, `lines16`, `es6` or `simplex:N`.
pub fn by_name(name: &str) -> Result<Frame> {
    match name {
        "mb" | "mercedes-benz" => Ok(mercedes_benz()),
        "cube" => Ok(cube_diagonals()),
        "icosahedron" => Ok(icosahedron()),
        "lines16" => Ok(lines16_r6()),
        "es6" => Ok(es_r4_6lines()),
        other => match other.strip_prefix("simplex:") {
            Some(n) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::InvalidArgs(format!("bad simplex dimension in {other:?}")))?;
                regular_simplex(n)
            }
            None => Err(Error::InvalidArgs(format!("unknown frame {other:?}"))),
        },
    }
}

/// Orthonormal basis of `Ker(V)` in `R^r`.
pub fn kernel_basis(v: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    linalg::nullspace(v, tol)
}

/// Searches for `mu` with `(lambda_1 s_1^{d-1}, .., mu, .., lambda_r s_r^{d-1})`
/// in the kernel of `V`, where `s_i = sigma_{ij}` and `mu` sits in slot `j`.
///
/// Returns the least-squares `mu` when the residual is within tolerance.
pub fn kernel_condition_holds(frame: &Frame, lambdas: &[f64], d: usize, j: usize) -> Result<(bool, Option<f64>)> {
    let r = frame.len();
    if lambdas.len() != r {
        return Err(Error::DimensionMismatch { expected: r, found: lambdas.len() });
    }
    if j >= r {
        return Err(Error::InvalidArgs(format!("index {j} out of range for {r} columns")));
    }
    let n = frame.dim();
    let mut rest = DVector::<f64>::zeros(n);
    for i in (0..r).filter(|&i| i != j) {
        let coeff = lambdas[i] * frame.sigma(i, j).powi(d as i32 - 1);
        rest += frame.factors.column(i) * coeff;
    }
    let vj = frame.column(j);
    let mu = -vj.dot(&rest) / vj.norm_squared();
    let residual = (&vj * mu + &rest).norm();
    let scale = lambdas.iter().fold(1.0_f64, |acc, l| acc.max(l.abs()));
    if residual <= DEFAULT_FRAME_TOL * scale * r as f64 {
        Ok((true, Some(mu)))
    } else {
        Ok((false, None))
    }
}

/// `||V V^T - (r/n) I||_F`.
pub fn etf_residual(v: &DMatrix<f64>) -> f64 {
    let (n, r) = v.shape();
    (v * v.transpose() - DMatrix::<f64>::identity(n, n) * (r as f64 / n as f64)).norm()
}

/// Largest minus smallest `|<v_i, v_j>|` over distinct pairs.
pub fn coherence_spread(v: &DMatrix<f64>) -> f64 {
    let gram = v.tr_mul(v);
    let r = v.ncols();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for i in 0..r {
        for j in i + 1..r {
            let a = gram[(i, j)].abs();
            lo = lo.min(a);
            hi = hi.max(a);
        }
    }
    if lo.is_finite() { hi - lo } else { 0.0 }
}

/// On-disk form: the tensor's `n`, `r`, `V` (list of columns) plus `alpha`, `is_etf`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub r: usize,
    #[serde(rename = "V")]
    pub v: Vec<Vec<f64>>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub is_etf: Option<bool>,
}

impl FrameJson {
    /// Column matrix, checking the declared shape.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        if self.v.len() != self.r {
            return Err(Error::DimensionMismatch { expected: self.r, found: self.v.len() });
        }
        if let Some(col) = self.v.iter().find(|c| c.len() != self.n) {
            return Err(Error::DimensionMismatch { expected: self.n, found: col.len() });
        }
        Ok(DMatrix::from_iterator(self.n, self.r, self.v.iter().flatten().copied()))
    }
}

impl From<&Frame> for FrameJson {
    fn from(f: &Frame) -> Self {
        FrameJson {
            name: (!f.name.is_empty()).then(|| f.name.clone()),
            n: f.dim(),
            r: f.len(),
            v: f.factors.column_iter().map(|c| c.iter().copied().collect()).collect(),
            alpha: Some(f.alpha),
            is_etf: Some(f.is_etf),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn welch_examples() {
        assert_abs_diff_eq!(welch_bound(2, 3).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(welch_bound(4, 4).unwrap(), 0.0);
        assert_abs_diff_eq!(welch_bound(3, 6).unwrap(), 0.4472135955, epsilon = 1e-10);
        assert_abs_diff_eq!(welch_bound(6, 16).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert!(matches!(welch_bound(3, 2), Err(Error::InvalidArgs(_))));
    }

    #[test]
    fn simplex_two() {
        let f = regular_simplex(2).unwrap();
        assert_abs_diff_eq!(f.alpha, 0.5, epsilon = 1e-12);
        assert!(f.is_etf);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.signs[(i, j)], if i == j { 1 } else { -1 });
            }
        }
        let outer = &f.factors * f.factors.transpose();
        assert!((outer - DMatrix::identity(2, 2) * 1.5).amax() < 1e-12);
        let gram = f.factors.tr_mul(&f.factors);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(gram[(i, j)], -0.5, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn simplex_three() {
        let f = regular_simplex(3).unwrap();
        assert_eq!(f.len(), 4);
        assert_abs_diff_eq!(f.alpha, 1.0 / 3.0, epsilon = 1e-12);
        assert!(regular_simplex(1).is_err());
    }

    #[test]
    fn catalog_flags() {
        let expected = [("mb", true), ("cube", true), ("icosahedron", true), ("lines16", true), ("es6", false)];
        for (name, etf) in expected {
            assert_eq!(by_name(name).unwrap().is_etf, etf, "{name}");
        }
        assert_eq!(catalog().len(), 6);
    }

    #[test]
    fn mb_second_column() {
        let f = mercedes_benz();
        assert_abs_diff_eq!(f.factors[(0, 1)], 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.factors[(1, 1)], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn cube_and_lines_alpha() {
        let cube = cube_diagonals();
        assert_eq!(cube.factors.shape(), (3, 4));
        assert_abs_diff_eq!(cube.alpha, 1.0 / 3.0, epsilon = 1e-12);
        let lines = lines16_r6();
        assert_eq!(lines.factors.shape(), (6, 16));
        assert_abs_diff_eq!(lines.alpha, welch_bound(6, 16).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn icosahedron_gram_pattern() {
        let f = icosahedron();
        let a = 1.0 / 5f64.sqrt();
        assert_abs_diff_eq!(f.alpha, a, epsilon = 1e-12);
        #[rustfmt::skip]
        let pattern = [
            1.,  1.,  1.,  1.,  1.,  1.,
            1.,  1., -1., -1.,  1.,  1.,
            1., -1.,  1.,  1.,  1., -1.,
            1., -1.,  1.,  1., -1.,  1.,
            1.,  1.,  1., -1.,  1., -1.,
            1.,  1., -1.,  1., -1.,  1.,
        ];
        let gram = f.factors.tr_mul(&f.factors);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { a * pattern[6 * i + j] };
                assert_abs_diff_eq!(gram[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn es6_not_tight() {
        let f = es_r4_6lines();
        assert_abs_diff_eq!(f.alpha, 1.0 / 3.0, epsilon = 1e-12);
        assert!(!f.is_etf);
        assert!(etf_residual(&f.factors) > 0.1);
    }

    #[test]
    fn validation_errors() {
        let v = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(matches!(validate_frame(&v, 1e-10), Err(Error::NotUnitNorm { column: 1, .. })));
        let s = 0.5f64.sqrt();
        let v = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, s, s]);
        assert!(matches!(validate_frame(&v, 1e-10), Err(Error::NotEquiangular { .. })));
    }

    #[test]
    fn orthonormal_frame_uses_positive_signs() {
        let f = validate_frame(&DMatrix::identity(3, 3), 1e-10).unwrap();
        assert_eq!(f.alpha, 0.0);
        assert!(f.signs.iter().all(|&s| s == 1));
        assert!(f.is_etf);
    }

    #[test]
    fn kernel_examples() {
        let k = kernel_basis(&regular_simplex(3).unwrap().factors, DEFAULT_KERNEL_TOL);
        assert_eq!(k.len(), 1);
        assert_abs_diff_eq!(k[0][0].abs(), 0.5, epsilon = 1e-12);
        assert!(k[0].iter().all(|x| (x - k[0][0]).abs() < 1e-12));
        assert!(kernel_basis(&DMatrix::identity(4, 4), DEFAULT_KERNEL_TOL).is_empty());
        assert_eq!(kernel_basis(&es_r4_6lines().factors, DEFAULT_KERNEL_TOL).len(), 2);
    }

    #[test]
    fn kernel_condition_examples() {
        let simplex = regular_simplex(2).unwrap();
        let (holds, mu) = kernel_condition_holds(&simplex, &[1.0; 3], 3, 0).unwrap();
        assert!(holds);
        assert_abs_diff_eq!(mu.unwrap(), 1.0, epsilon = 1e-12);

        let ico = icosahedron();
        assert!(kernel_condition_holds(&ico, &[1.0; 6], 5, 0).unwrap().0);
        assert!(!kernel_condition_holds(&ico, &[1.0; 6], 5, 1).unwrap().0);
    }

    #[test]
    fn by_name_rejects_unknown() {
        assert!(by_name("dodecahedron").is_err());
        assert!(by_name("simplex:x").is_err());
        assert_eq!(by_name("simplex:4").unwrap().len(), 5);
    }

    #[test]
    fn frame_json_round_trip() {
        let f = icosahedron();
        let text = serde_json::to_string(&FrameJson::from(&f)).unwrap();
        let back: FrameJson = serde_json::from_str(&text).unwrap();
        let g = validate_frame(&back.matrix().unwrap(), DEFAULT_FRAME_TOL).unwrap();
        assert_eq!(g.factors, f.factors);
        assert_eq!(back.is_etf, Some(true));
    }
}
