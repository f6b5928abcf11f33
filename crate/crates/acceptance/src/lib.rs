//! Acceptance criteria as plain functions. The `acceptance` test target runs
//! them in order and prints one PASS/FAIL line each.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use tpm_core::basins::{self, BasinLabel};
use tpm_core::eigen2d::Normalization;
use tpm_core::experiments::{self, MbTable};
use tpm_core::frames;
use tpm_core::power;
use tpm_core::rng;
use tpm_core::robustness;
use tpm_core::tensor::{eigen_residual, SymTensor, DEFAULT_DENSE_CAP};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(failures: Vec<String>, summary: String) -> Self {
        if failures.is_empty() {
            Outcome { pass: true, detail: summary }
        } else {
            let shown: Vec<_> = failures.iter().take(6).cloned().collect();
            let more = if failures.len() > 6 { format!(" (+{} more)", failures.len() - 6) } else { String::new() };
            Outcome { pass: false, detail: format!("{}{}", shown.join("; "), more) }
        }
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            out.pass = false;
            out.detail = format!("{} [took {:.2?}, limit {:.0?}]", out.detail, elapsed, limit);
            return out;
        }
    }
    out.detail = format!("{} [{:.2?}]", out.detail, elapsed);
    out
}

fn mb(d: usize) -> SymTensor {
    SymTensor::all_ones(frames::mercedes_benz().factors, d).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Clone, Copy)]
enum Row {
    /// Real unit vector, eigenvalue, multiplicity.
    Real([f64; 2], f64, usize),
    /// Hermitian-unit isotropic vector `(s i / sqrt2, 1 / sqrt2)`.
    Isotropic(f64, f64, usize),
}

fn reference_rows(d: usize) -> Vec<Row> {
    let s = 3f64.sqrt() / 2.0;
    let gens = |mu: f64| vec![Row::Real([0.0, 1.0], mu, 1), Row::Real([s, -0.5], mu, 1), Row::Real([-s, -0.5], mu, 1)];
    let mut rows = match d {
        3 => gens(0.75),
        4 => gens(9.0 / 8.0),
        5 => gens(15.0 / 16.0),
        6 => gens(33.0 / 32.0),
        7 => gens(63.0 / 64.0),
        8 => gens(129.0 / 128.0),
        9 => gens(255.0 / 256.0),
        10 => gens(513.0 / 512.0),
        _ => vec![],
    };
    let iso = |mu: f64, m: usize| vec![Row::Isotropic(-1.0, mu, m), Row::Isotropic(1.0, mu, m)];
    match d {
        4 => rows.push(Row::Real([1.0, 0.0], 9.0 / 8.0, 1)),
        5 => rows.extend(iso(3.0 * 2f64.sqrt() / 8.0, 1)),
        6 => {
            let mu = 27.0 / 32.0;
            rows.extend([Row::Real([0.5, s], mu, 1), Row::Real([-0.5, s], mu, 1), Row::Real([1.0, 0.0], mu, 1)]);
        }
        7 => rows.extend(iso(0.0, 2)),
        8 => {
            rows.extend(iso(3.0 / 16.0, 1));
            let mu = 81.0 / 128.0;
            rows.extend([Row::Real([-0.5, s], mu, 1), Row::Real([0.5, s], mu, 1), Row::Real([1.0, 0.0], mu, 1)]);
        }
        10 => {
            rows.extend(iso(0.0, 2));
            // Reflection symmetry of the frame gives (-1/2, sqrt3/2) the same value as (1/2, sqrt3/2).
            let mu = 243.0 / 512.0;
            rows.extend([Row::Real([-0.5, s], mu, 1), Row::Real([0.5, s], mu, 1), Row::Real([1.0, 0.0], mu, 1)]);
        }
        _ => {}
    }
    rows
}

fn check_table(table: &MbTable, failures: &mut Vec<String>) {
    let d = table.d;
    for row in reference_rows(d) {
        let (target, want, mult) = match row {
            Row::Real(v, mu, m) => ([c(v[0], 0.0), c(v[1], 0.0)], mu, m),
            Row::Isotropic(s, mu, m) => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                ([c(0.0, s * h), c(h, 0.0)], mu, m)
            }
        };
        let found = table.rows.iter().find(|r| {
            let v = if matches!(row, Row::Isotropic(..)) { r.hermitian_vector } else { r.vector };
            (v[0] - target[0]).norm() < 1e-9 && (v[1] - target[1]).norm() < 1e-9
        });
        match found {
            None => failures.push(format!("d={d}: no row for {target:?}")),
            Some(r) => {
                if (r.eigenvalue - c(want, 0.0)).norm() > 1e-9 {
                    failures.push(format!("d={d}: {target:?} has {} not {want}", r.eigenvalue));
                }
                if !table.degenerate && r.multiplicity != Some(mult) {
                    failures.push(format!("d={d}: {target:?} multiplicity {:?} not {mult}", r.multiplicity));
                }
            }
        }
    }
    if d == 9 {
        let complex: Vec<_> = table.rows.iter().filter(|r| !r.is_real).collect();
        let values = [c(-0.234194, -0.107117), c(-0.234194, 0.107117), c(0.257529, 0.0)];
        for p in values {
            let hit = complex.iter().any(|r| {
                let m = r.hermitian_eigenvalue;
                (m - p).norm().min((m + p).norm()) <= 1e-5
            });
            if !hit {
                failures.push(format!("d=9: no complex row with eigenvalue {p}"));
            }
        }
        let ratios = [c(0.393942, -0.624439), c(0.0, 1.965672)];
        for q in ratios {
            let hit = complex.iter().any(|r| {
                let z = r.hermitian_vector[0] / r.hermitian_vector[1];
                (z - q).norm() <= 1e-5 || (z - q.conj()).norm() <= 1e-5
            });
            if !hit {
                failures.push(format!("d=9: no complex row with u/v = {q}"));
            }
        }
        if complex.iter().any(|r| r.normalization == Normalization::Isotropic) {
            failures.push("d=9: unexpected isotropic row".into());
        }
    }
    match table.total_multiplicity {
        Some(total) if total == d => {}
        Some(total) => failures.push(format!("d={d}: multiplicities sum to {total}")),
        None => failures.push(format!("d={d}: eigen-form vanishes identically, multiplicities undefined")),
    }
}

fn criterion_1() -> Outcome {
    let tables = experiments::mb_tables(3..=10).unwrap();
    let mut failures = Vec::new();
    for t in &tables {
        check_table(t, &mut failures);
    }
    let rows: usize = tables.iter().map(|t| t.rows.len()).sum();
    Outcome::new(failures, format!("{rows} rows over d=3..10 match"))
}

fn criterion_2() -> Outcome {
    let grid = experiments::convergence_table(2..=10, 2..=10, 20, 7, 100, 1e-10).unwrap();
    let mut failures = Vec::new();
    for cell in &grid.cells {
        let cross = cell.d == 2 || matches!((cell.n, cell.d), (2, 3) | (3, 3) | (2, 4));
        let got = cell.verdict == experiments::Verdict::Cross;
        if cross != got {
            failures.push(format!(
                "({},{}) expected {} got {}/{}",
                cell.n,
                cell.d,
                if cross { "cross" } else { "tick" },
                cell.successes,
                cell.trials
            ));
        }
    }
    Outcome::new(failures, "81 cells match the tick/cross pattern".into())
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let v1 = DVector::from_vec(vec![0.0, 1.0]);
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-12 {
            failures.push(format!("{name} = {got}, want {want}"));
        }
    };
    check("rho MB d=3", robustness::certify(&mb(3), &v1, None).unwrap().rho_numeric, 2.0);
    check("rho MB d=5", robustness::certify(&mb(5), &v1, None).unwrap().rho_numeric, 0.8);
    let simplex = SymTensor::all_ones(frames::regular_simplex(2).unwrap().factors, 5).unwrap();
    check("kernel bound (2,5)", robustness::bound_kernel_case(&simplex).unwrap(), 0.8);
    check("all-ones bound MB d=6", robustness::bound_allones_etf(&frames::mercedes_benz(), 6).unwrap().0, 5.0 / 11.0);
    Outcome::new(failures, "rho 2 and 0.8, bounds 0.8 and 5/11".into())
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    for (n, d, want) in [(2, 5, 3), (3, 4, 14), (4, 3, 5)] {
        let got = robustness::gamma(n, d).unwrap();
        if got != want {
            failures.push(format!("gamma({n},{d}) = {got}"));
        }
    }
    let mut checked = 0;
    for n in 2..=12 {
        for d in 3..=12 {
            if n + d >= 7 {
                checked += 1;
                let g = robustness::gamma(n, d).unwrap();
                if g <= 0 {
                    failures.push(format!("gamma({n},{d}) = {g}"));
                }
            }
        }
    }
    Outcome::new(failures, format!("three values exact, {checked} cells positive"))
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    let frame = frames::mercedes_benz();
    let mut summary = Vec::new();
    for (k, d) in [6, 8, 10].into_iter().enumerate() {
        let r = basins::sector_check(&mb(d), &frame, 1000, 100 + k as u64).unwrap();
        if r.failed > 0 || r.passed + r.skipped != 1000 {
            failures.push(format!("d={d}: {r:?}"));
        }
        summary.push(format!("d={d} {}/{}", r.passed, 1000 - r.skipped));
    }
    let t4 = mb(4);
    let mut rng = rng::rng_from_seed(4);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let x = rng::sample_sphere(&mut rng, 2);
        worst = worst.max((power::step(&t4, &x).unwrap() - &x).norm());
    }
    if worst > 1e-12 {
        failures.push(format!("d=4 stall displacement {worst:e}"));
    }
    Outcome::new(failures, format!("{}; d=4 max displacement {worst:.1e}", summary.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_k = 0;
    for d in [6, 8] {
        for a0 in [0.05, 0.3, 0.95] {
            let orbit = basins::alpha_orbit(a0, d, 60).unwrap();
            match orbit.iter().position(|a| (a - 0.5).abs() <= 1e-12) {
                Some(k) => worst_k = worst_k.max(k + 1),
                None => failures.push(format!("d={d}, alpha0={a0}: |alpha-1/2| = {:e}", (orbit[59] - 0.5).abs())),
            }
        }
    }
    for a0 in [0.05, 0.3, 0.95] {
        let orbit = basins::alpha_orbit(a0, 4, 60).unwrap();
        if orbit.iter().any(|a| (a - a0).abs() > 1e-15) {
            failures.push(format!("d=4 orbit from {a0} moves"));
        }
    }
    let frame = frames::mercedes_benz();
    let mut rng = rng::rng_from_seed(6);
    let mut worst = 0.0_f64;
    for k in 0..100 {
        let d = 3 + k % 8;
        let t = mb(d);
        let x = rng::sample_sphere(&mut rng, 2);
        let a = basins::extract_alpha(&x, &frame);
        let next = power::step(&t, &x).unwrap();
        let err = (basins::extract_alpha(&next, &frame) - basins::alpha_step(a, d)).abs();
        worst = worst.max(err / basins::alpha_step(a, d).abs().max(1.0));
    }
    if worst > 1e-12 {
        failures.push(format!("2-D/1-D mismatch {worst:e}"));
    }
    Outcome::new(failures, format!("converged within {worst_k} steps; step consistency {worst:.1e}"))
}

fn random_tensor<R: Rng>(rng: &mut R) -> SymTensor {
    let n = rng.gen_range(1..=4);
    let d = rng.gen_range(2..=5);
    let r = rng.gen_range(1..=6);
    let v = DMatrix::from_vec(n, r, rng::gaussian_vec(rng, n * r));
    let lambdas = rng::gaussian_vec(rng, r);
    SymTensor::new(v, lambdas, d).unwrap()
}

fn rel(a: f64, scale: f64) -> f64 {
    a / scale.max(1e-300)
}

fn certified_pairs() -> Vec<(SymTensor, DVector<f64>)> {
    let mut out = Vec::new();
    for d in 3..=8 {
        let t = mb(d);
        let f = frames::mercedes_benz();
        out.push((t.clone(), f.column(0)));
        out.push((t, f.column(2)));
    }
    for (name, orders) in [("cube", [4, 6]), ("icosahedron", [6, 8]), ("lines16", [4, 6]), ("simplex:3", [3, 5])] {
        let f = frames::by_name(name).unwrap();
        for d in orders {
            let t = SymTensor::all_ones(f.factors.clone(), d).unwrap();
            out.push((t, f.column(1)));
        }
    }
    out.retain(|(t, v)| robustness::certify(t, v, None).is_ok());
    out.truncate(20);
    out
}

fn criterion_7() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = rng::rng_from_seed(77);
    let mut worst = 0.0_f64;
    for k in 0..50 {
        let t = random_tensor(&mut rng);
        let dense = t.to_dense(DEFAULT_DENSE_CAP).unwrap();
        let x = rng::sample_sphere(&mut rng, t.dim());
        let a = t.contract_vec(&x).unwrap();
        let b = dense.contract_vec(&x).unwrap();
        let scale = t.lambdas().iter().map(|l| l.abs()).sum::<f64>();
        let e1 = rel((&a - &b).norm(), b.norm().max(scale));
        let m = t.contract_mat(&x).unwrap();
        let md = dense.contract_mat(&x).unwrap();
        let e2 = rel((&m - &md).norm(), md.norm().max(scale));
        worst = worst.max(e1).max(e2);
        if e1 > 1e-11 || e2 > 1e-11 {
            failures.push(format!("tensor {k}: relative errors {e1:e}, {e2:e}"));
        }
    }
    let pairs = certified_pairs();
    if pairs.len() < 20 {
        failures.push(format!("only {} certified eigenpairs", pairs.len()));
    }
    let mut worst_fd = 0.0_f64;
    for (t, v) in &pairs {
        let (mu, _) = eigen_residual(t, v).unwrap();
        let j = robustness::jacobian_at(t, v, mu).unwrap();
        let fd = robustness::jacobian_fd(t, v, 1e-5).unwrap();
        let diff = &j - fd;
        let inf = diff.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        worst_fd = worst_fd.max(inf);
        if inf > 1e-5 {
            failures.push(format!("Jacobian mismatch {inf:e} (n={}, d={})", t.dim(), t.order()));
        }
    }
    Outcome::new(failures, format!("contractions {worst:.1e}, Jacobians {worst_fd:.1e} on {} pairs", pairs.len()))
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let named = [
        ("mb", frames::mercedes_benz()),
        ("cube", frames::cube_diagonals()),
        ("icosahedron", frames::icosahedron()),
        ("lines16", frames::lines16_r6()),
        ("es6", frames::es_r4_6lines()),
    ];
    for (name, f) in &named {
        match frames::validate_frame(&f.factors, frames::DEFAULT_FRAME_TOL) {
            Err(e) => failures.push(format!("{name}: {e}")),
            Ok(v) => {
                let etf = *name != "es6";
                if v.is_etf != etf {
                    failures.push(format!("{name}: is_etf = {}", v.is_etf));
                }
                if etf {
                    let w = frames::welch_bound(v.dim(), v.len()).unwrap();
                    if (v.alpha - w).abs() > 1e-12 {
                        failures.push(format!("{name}: alpha {} vs Welch {w}", v.alpha));
                    }
                }
            }
        }
    }
    for n in 2..=6 {
        let f = frames::regular_simplex(n).unwrap();
        let k = frames::kernel_basis(&f.factors, frames::DEFAULT_KERNEL_TOL);
        let ones = DVector::from_element(n + 1, 1.0 / ((n + 1) as f64).sqrt());
        if k.len() != 1 || (k[0].dot(&ones).abs() - 1.0).abs() > 1e-10 {
            failures.push(format!("simplex {n}: kernel {k:?}"));
        }
    }
    Outcome::new(failures, "5 frames valid, Welch equality, simplex kernels n=2..6".into())
}

fn criterion_9() -> Outcome {
    let frame = frames::mercedes_benz();
    let res = 512;
    let grid = basins::render_basins(&mb(6), &frame, res, basins::DEFAULT_RENDER_ITERS, 1e-10).unwrap();
    let pixel = 2.0 / res as f64;
    let mut disk = 0usize;
    let mut labeled = 0usize;
    let mut wrong = 0usize;
    let mut first_wrong = None;
    for row in 0..res {
        for col in 0..res {
            let label = grid.label(row, col);
            if label == BasinLabel::Outside {
                continue;
            }
            disk += 1;
            let BasinLabel::Frame(j) = label else { continue };
            labeled += 1;
            let (x, y) = basins::pixel_center(res, row, col);
            let p = DVector::from_vec(vec![x, y]);
            let mut scores: Vec<(f64, usize, f64)> = (0..3)
                .map(|k| {
                    let s = frame.column(k).dot(&p);
                    (s.abs(), k, s.signum())
                })
                .collect();
            scores.sort_by(|a, b| b.0.total_cmp(&a.0));
            let b = (frame.column(scores[0].1) * scores[0].2 + frame.column(scores[1].1) * scores[1].2).normalize();
            let dist = (x * b[1] - y * b[0]).abs();
            if dist <= 2.0 * pixel {
                continue;
            }
            if j as usize != scores[0].1 {
                wrong += 1;
                first_wrong.get_or_insert((row, col));
            }
        }
    }
    let frac = labeled as f64 / disk as f64;
    let mut failures = Vec::new();
    if frac < 0.999 {
        failures.push(format!("only {:.4}% of disk pixels labeled", 100.0 * frac));
    }
    if wrong > 0 {
        failures.push(format!("{wrong} pixels off their sector, first at {first_wrong:?}"));
    }
    Outcome::new(failures, format!("{:.4}% labeled, all away from boundaries in sector", 100.0 * frac))
}

pub struct Criterion {
    pub name: &'static str,
    /// Wall-clock budget, where the criterion sets one.
    pub limit: Option<Duration>,
    pub check: fn() -> Outcome,
}

impl Criterion {
    /// Runs the check and folds the time budget into the outcome.
    pub fn run(&self) -> Outcome {
        timed(self.limit, self.check)
    }
}

pub fn criteria() -> Vec<Criterion> {
    let c = |name, secs: Option<u64>, check| Criterion { name, limit: secs.map(Duration::from_secs), check };
    vec![
        c("eigenvalue tables", Some(5), criterion_1 as fn() -> Outcome),
        c("convergence grid", Some(60), criterion_2),
        c("closed-form spectral radii", None, criterion_3),
        c("gamma certificate", None, criterion_4),
        c("sector property", None, criterion_5),
        c("ratio recursion", None, criterion_6),
        c("oracle equivalence", None, criterion_7),
        c("frame validation", None, criterion_8),
        c("basin sectors", Some(30), criterion_9),
    ]
}
