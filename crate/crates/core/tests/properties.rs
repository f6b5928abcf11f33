use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use tpm_core::basins;
use tpm_core::eigen2d;
use tpm_core::frames;
use tpm_core::linalg;
use tpm_core::power::{self, RunOptions};
use tpm_core::rng::{gaussian_vec, rng_from_seed, sample_sphere, TpmRng};
use tpm_core::robustness::{self, Verdict};
use tpm_core::tensor::{eigen_residual, SymTensor, SymTensorJson, DEFAULT_DENSE_CAP};

fn random_tensor(rng: &mut TpmRng, n: usize, r: usize, d: usize) -> SymTensor {
    let v = DMatrix::from_vec(n, r, gaussian_vec(rng, n * r));
    SymTensor::new(v, gaussian_vec(rng, r), d).unwrap()
}

/// Coefficients of moderate size and generators at a clear angle, so that no
/// eigendirections of a planar tensor coalesce.
fn well_conditioned_planar(rng: &mut TpmRng, r: usize, d: usize) -> SymTensor {
    loop {
        let mut v = DMatrix::from_vec(2, r, gaussian_vec(rng, 2 * r));
        for mut c in v.column_iter_mut() {
            c /= c.norm();
        }
        let lambdas: Vec<f64> = (0..r)
            .map(|_| {
                let u: f64 = rng.gen_range(0.5..2.0);
                if rng.gen::<bool>() { u } else { -u }
            })
            .collect();
        let t = SymTensor::new(v, lambdas, d).unwrap();
        let g = t.factors().transpose() * t.factors();
        let separated = (0..t.rank()).all(|i| (0..i).all(|j| g[(i, j)].abs() <= 0.95));
        if t.rank() == r && separated {
            return t;
        }
    }
}

fn random_rotation(rng: &mut TpmRng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_vec(n, n, gaussian_vec(rng, n * n));
    a.qr().q()
}

fn scale(t: &SymTensor) -> f64 {
    t.lambdas().iter().map(|l| l.abs()).sum()
}

fn mb(d: usize) -> SymTensor {
    SymTensor::all_ones(frames::mercedes_benz().factors, d).unwrap()
}

fn etfs() -> Vec<frames::Frame> {
    vec![frames::mercedes_benz(), frames::cube_diagonals(), frames::icosahedron(), frames::lines16_r6()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_sign_equivariant(seed in any::<u64>(), n in 1usize..5, r in 1usize..6, d in 2usize..8) {
        let mut rng = rng_from_seed(seed);
        let t = random_tensor(&mut rng, n, r, d);
        let x = sample_sphere(&mut rng, n);
        if let (Ok(a), Ok(b)) = (power::step(&t, &x), power::step(&t, &(-&x))) {
            let sign = if d % 2 == 0 { -1.0 } else { 1.0 };
            prop_assert!((a * sign - b).amax() <= 1e-12);
        }
    }

    #[test]
    fn contractions_match_dense(seed in any::<u64>(), n in 1usize..5, r in 1usize..7, d in 2usize..6) {
        let mut rng = rng_from_seed(seed);
        let t = random_tensor(&mut rng, n, r, d);
        let dense = t.to_dense(DEFAULT_DENSE_CAP).unwrap();
        let x = DVector::from_vec(gaussian_vec(&mut rng, n));
        let s = scale(&t) * x.norm().powi(d as i32 - 1);
        prop_assert!((t.contract_vec(&x).unwrap() - dense.contract_vec(&x).unwrap()).norm() <= 1e-11 * s.max(1.0));
        let s2 = scale(&t) * x.norm().powi(d as i32 - 2);
        prop_assert!((t.contract_mat(&x).unwrap() - dense.contract_mat(&x).unwrap()).norm() <= 1e-11 * s2.max(1.0));
        prop_assert!((t.frobenius_norm() - dense.frobenius_norm()).abs() <= 1e-10 * t.frobenius_norm().max(1.0));
    }

    #[test]
    fn contract_mat_times_x_is_contract_vec(seed in any::<u64>(), n in 1usize..5, r in 1usize..6, d in 2usize..9) {
        let mut rng = rng_from_seed(seed);
        let t = random_tensor(&mut rng, n, r, d);
        let x = sample_sphere(&mut rng, n);
        let lhs = t.contract_mat(&x).unwrap() * &x;
        prop_assert!((lhs - t.contract_vec(&x).unwrap()).norm() <= 1e-12 * scale(&t).max(1.0));
    }

    #[test]
    fn json_round_trip_is_exact(seed in any::<u64>(), n in 1usize..5, r in 1usize..6, d in 2usize..9) {
        let mut rng = rng_from_seed(seed);
        let t = random_tensor(&mut rng, n, r, d);
        let text = serde_json::to_string(&SymTensorJson::from(t.clone())).unwrap();
        let back = SymTensor::try_from(serde_json::from_str::<SymTensorJson>(&text).unwrap()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn step_commutes_with_rotation(seed in any::<u64>(), n in 2usize..5, r in 1usize..6, d in 3usize..8) {
        let mut rng = rng_from_seed(seed);
        let t = random_tensor(&mut rng, n, r, d);
        let q = random_rotation(&mut rng, n);
        let rotated = SymTensor::new(&q * t.factors(), t.lambdas().to_vec(), d).unwrap();
        let x = sample_sphere(&mut rng, n);
        if let (Ok(a), Ok(b)) = (power::step(&t, &x), power::step(&rotated, &(&q * &x))) {
            prop_assert!((&q * a - b).amax() <= 1e-10);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_on_frames(k in 0usize..4, d in 3usize..11, j in 0usize..3) {
        let f = &etfs()[k];
        let t = SymTensor::all_ones(f.factors.clone(), d).unwrap();
        let v = f.column(j);
        if let Ok((mu, res)) = eigen_residual(&t, &v) {
            if res > 1e-12 {
                return Ok(());
            }
            let jac = robustness::jacobian_at(&t, &v, mu).unwrap();
            let fd = robustness::jacobian_fd(&t, &v, 1e-5).unwrap();
            prop_assert!((jac - fd).amax() <= 1e-5);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_on_odeco(seed in any::<u64>(), n in 2usize..5, d in 3usize..8, j in 0usize..4) {
        let j = j % n;
        let mut rng = rng_from_seed(seed);
        let q = random_rotation(&mut rng, n);
        let lambdas: Vec<f64> = (0..n).map(|i| 0.5 + i as f64).collect();
        let t = SymTensor::new(q.clone(), lambdas.clone(), d).unwrap();
        let v = q.column(j).into_owned();
        let (mu, _) = eigen_residual(&t, &v).unwrap();
        prop_assert!((mu - lambdas[j]).abs() <= 1e-12 * lambdas[j]);
        let jac = robustness::jacobian_at(&t, &v, mu).unwrap();
        let fd = robustness::jacobian_fd(&t, &v, 1e-5).unwrap();
        prop_assert!((&jac - fd).amax() <= 1e-5);
        prop_assert!(robustness::spectral_radius_sym(&jac).unwrap() <= 1e-10);
    }

    #[test]
    fn tight_bound_below_coarse(k in 0usize..4, d in 3usize..13, j in 0usize..3) {
        let f = &etfs()[k];
        let t = SymTensor::all_ones(f.factors.clone(), d).unwrap();
        let (mu, _) = eigen_residual(&t, &f.column(j)).unwrap();
        let b = robustness::bound_general(&t, j, mu).unwrap();
        prop_assert!(b.tight <= b.coarse + 1e-12);
    }

    #[test]
    fn gamma_is_monotone(n in 2usize..12, d in 3usize..12) {
        let g = robustness::gamma(n, d).unwrap();
        prop_assert!(robustness::gamma(n + 1, d).unwrap() > g);
        prop_assert!(robustness::gamma(n, d + 1).unwrap() > g);
        let float = (n as f64).powi(d as i32 - 1) + n as f64 - d as f64 - (d * n) as f64;
        prop_assert_eq!(g as f64, float);
    }

    #[test]
    fn alpha_moves_toward_half(a in 0.001f64..0.999, half_d in 3usize..8) {
        let d = 2 * half_d;
        let next = basins::alpha_step(a, d);
        prop_assert!(next > 0.0 && next < 1.0);
        prop_assert!((next - 0.5).abs() <= (a - 0.5).abs() + 1e-15);
        let c = basins::contraction_coefficient(a, d);
        prop_assert!(c > -1.0 && c < 0.0);
        prop_assert!((next - a - c * (a - 0.5)).abs() <= 1e-12);
    }

    #[test]
    fn planar_step_matches_ratio_recursion(theta in 0.0f64..std::f64::consts::TAU, d in 3usize..11) {
        let frame = frames::mercedes_benz();
        let x = DVector::from_vec(vec![theta.cos(), theta.sin()]);
        let c = frame.column(0).dot(&x);
        prop_assume!(c.abs() >= 0.05);
        let a = basins::extract_alpha(&x, &frame);
        let next = power::step(&mb(d), &x).unwrap();
        let want = basins::alpha_step(a, d);
        prop_assert!((basins::extract_alpha(&next, &frame) - want).abs() <= 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn order_four_mb_stalls(theta in 0.0f64..std::f64::consts::TAU) {
        let x = DVector::from_vec(vec![theta.cos(), theta.sin()]);
        prop_assert!((power::step(&mb(4), &x).unwrap() - &x).norm() <= 1e-12);
    }

    #[test]
    fn welch_bound_holds(seed in any::<u64>(), n in 2usize..5, extra in 1usize..5) {
        let r = n + extra;
        let mut rng = rng_from_seed(seed);
        let mut v = DMatrix::from_vec(n, r, gaussian_vec(&mut rng, n * r));
        for mut c in v.column_iter_mut() {
            c /= c.norm();
        }
        let g = v.transpose() * &v;
        let coherence = (0..r).flat_map(|i| (0..r).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| g[(i, j)].abs())
            .fold(0.0, f64::max);
        prop_assert!(coherence >= frames::welch_bound(n, r).unwrap() - 1e-12);
    }

    #[test]
    fn nullspace_is_orthogonal_to_rows(seed in any::<u64>(), m in 1usize..5, n in 1usize..7, rank in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let k = rank.min(m).min(n);
        let a = DMatrix::from_vec(m, k, gaussian_vec(&mut rng, m * k)) * DMatrix::from_vec(k, n, gaussian_vec(&mut rng, k * n));
        let basis = linalg::nullspace(&a, 1e-10);
        prop_assert_eq!(basis.len(), n - k);
        for (i, b) in basis.iter().enumerate() {
            prop_assert!((&a * b).norm() <= 1e-10 * a.norm().max(1.0));
            prop_assert!((b.norm() - 1.0).abs() <= 1e-12);
            for c in &basis[..i] {
                prop_assert!(b.dot(c).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn planar_eigenpairs_are_complete(seed in any::<u64>(), r in 1usize..5, d in 3usize..9) {
        let mut rng = rng_from_seed(seed);
        let t = random_tensor(&mut rng, 2, r, d);
        let e = eigen2d::all_eigenpairs_2d(&t).unwrap();
        prop_assert_eq!(e.total, d);
        for p in &e.pairs {
            prop_assert!(eigen2d::residual_of(&t, &p.vector, p.eigenvalue).unwrap() <= 1e-7 * scale(&t).max(1.0));
        }
    }

    #[test]
    fn planar_eigenvalues_are_rotation_invariant(seed in any::<u64>(), r in 1usize..4, d in 3usize..8) {
        let mut rng = rng_from_seed(seed);
        let t = well_conditioned_planar(&mut rng, r, d);
        let q = random_rotation(&mut rng, 2);
        let rotated = SymTensor::new(&q * t.factors(), t.lambdas().to_vec(), d).unwrap();
        let real = |t: &SymTensor| {
            let mut v: Vec<f64> = eigen2d::all_eigenpairs_2d(t).unwrap().pairs.iter()
                .filter(|p| p.is_real && p.normalization == eigen2d::Normalization::Bilinear)
                .map(|p| p.eigenvalue.re.abs())
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (a, b) = (real(&t), real(&rotated));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-7 * scale(&t).max(1.0));
        }
    }

    #[test]
    fn robust_generators_attract(k in 0usize..3, seed in any::<u64>()) {
        let (t, v) = match k {
            0 => (mb(5), frames::mercedes_benz().column(0)),
            1 => (mb(6), frames::mercedes_benz().column(1)),
            _ => (SymTensor::all_ones(frames::icosahedron().factors, 5).unwrap(), frames::icosahedron().column(0)),
        };
        let cert = robustness::certify(&t, &v, None).unwrap();
        prop_assert_eq!(cert.verdict, Verdict::Robust);
        let mut rng = rng_from_seed(seed);
        let x0 = &v + sample_sphere(&mut rng, v.len()) * 1e-3;
        let opts = RunOptions { max_iter: 2000, tol: 1e-12, record: false };
        let out = power::run(&t, &x0, opts, None).unwrap();
        prop_assert!(out.converged);
        let fin = DVector::from_vec(out.final_x);
        prop_assert!(power::sign_aligned_distance(&fin, &v) <= 1e-9);
    }
}

#[test]
fn simplex_identities() {
    for n in 2..=8 {
        let f = frames::regular_simplex(n).unwrap();
        let g = f.factors.transpose() * &f.factors;
        for i in 0..=n {
            for j in 0..=n {
                let want = if i == j { 1.0 } else { -1.0 / n as f64 };
                assert!((g[(i, j)] - want).abs() <= 1e-12);
            }
        }
        let frame_op = &f.factors * f.factors.transpose();
        assert!((frame_op - DMatrix::identity(n, n) * ((n + 1) as f64 / n as f64)).amax() <= 1e-12);
        assert!(f.factors.column_sum().amax() <= 1e-12);
        assert!((f.alpha - frames::welch_bound(n, n + 1).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn etf_contracted_matrix_constant() {
    for f in etfs() {
        let (n, r) = (f.dim(), f.len());
        for d in (4..=12).step_by(2) {
            let t = SymTensor::all_ones(f.factors.clone(), d).unwrap();
            let (_, eig) = robustness::allones_value(n, r, f.alpha, d);
            for j in 0..r {
                let v = f.column(j);
                let m = t.contract_mat(&v).unwrap();
                let mut rest = m - &v * v.transpose() * eig;
                let c = f.alpha.powi(d as i32 - 2) * r as f64 / n as f64;
                rest -= (DMatrix::identity(n, n) - &v * v.transpose()) * c;
                assert!(rest.amax() <= 1e-12, "{} d={d} j={j}: {}", f.name, rest.amax());
            }
        }
    }
}
