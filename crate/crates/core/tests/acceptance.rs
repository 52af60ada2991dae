//! End-to-end acceptance checks. Run with `--nocapture` to see the report;
//! every criterion prints one PASS/FAIL line and the test fails if any did.
//!
//! Criterion 5 needs `mushrooms` and `leu` in LIBSVM format (optionally
//! gzipped) under `$DWD_DATA_DIR`, or `data/` at the workspace root.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dwd::ingest::{binarize_labels, read_libsvm_path};
use dwd::linalg::{psqmr, NormalSystem, NormalSystemSolver, Strategy, StrategyLimits};
use dwd::metrics::classification_error;
use dwd::model::{compute_class_weights, compute_penalty_parameter, median_interclass_distance};
use dwd::solver::{solve, SolveResult, SolverOptions, Variant};
use dwd::subproblems::newton_theta_q;
use dwd::{ProblemData, SolveStatus, SparseColMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-5;
/// Class separation of the random instances.
const SHIFT: f64 = 0.5;

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn record(&mut self, criterion: usize, pass: bool, detail: String) {
        println!("criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        self.lines.push((criterion, pass, detail));
    }
}

fn random_z(rng: &mut ChaCha8Rng, d: usize, n: usize, density: f64) -> SparseColMatrix {
    let cols: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| {
            (0..d)
                .filter_map(|i| rng.gen_bool(density).then(|| (i, rng.gen_range(-1.0..1.0))))
                .collect()
        })
        .collect();
    SparseColMatrix::from_columns(d, &cols).unwrap()
}

fn rel_err(x: &[f64], oracle: &DVector<f64>) -> f64 {
    let diff: f64 = x.iter().zip(oracle.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    diff / oracle.norm().max(1e-300)
}

/// Dense `[ZZᵀ + μ²I + 𝒯, Zy; (Zy)ᵀ, yᵀy]` built from scratch.
fn dense_normal_matrix(z: &SparseColMatrix, y: &[f64], mu: f64, t: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let d = z.nrows();
    let zd = z.to_dense();
    let yv = DVector::from_column_slice(y);
    let zy = &zd * &yv;
    let mut a = DMatrix::zeros(d + 1, d + 1);
    let mut top = &zd * zd.transpose() + DMatrix::identity(d, d) * (mu * mu);
    if let Some(t) = t {
        top += t;
    }
    a.view_mut((0, 0), (d, d)).copy_from(&top);
    for i in 0..d {
        a[(i, d)] = zy[i];
        a[(d, i)] = zy[i];
    }
    a[(d, d)] = yv.dot(&yv);
    a
}

fn criterion_1(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = rng.gen_range(2..=60);
        let d = rng.gen_range(2..=60);
        let density = if k % 2 == 0 { 1.0 } else { 0.1 };
        let z = random_z(&mut rng, d, n, density);
        let y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let mu = 1.0;
        let h: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let hv = DVector::from_column_slice(&h);
        let sys = NormalSystem::new(&z, &y, mu);
        let oracle = dense_normal_matrix(&z, &y, mu, None).lu().solve(&hv).unwrap();

        for strategy in [Strategy::DirectCholesky, Strategy::Smw] {
            let mut s = NormalSystemSolver::build(&sys, strategy, 0).unwrap();
            let x = s.solve(&sys, &h, &vec![0.0; d + 1], 0.0).unwrap().x;
            worst = worst.max(rel_err(&x, &oracle));
        }

        let mut s = NormalSystemSolver::build(&sys, Strategy::Iterative, k).unwrap();
        s.enable_proximal(&sys).unwrap();
        let p = s.proximal().unwrap();
        // 𝒯 = λ_ℓ I + Σ (λ_i − λ_ℓ) v_i v_iᵀ − ZZᵀ, assembled densely
        let ell = p.ell();
        let lam_l = p.values()[ell - 1];
        let mut t = DMatrix::identity(d, d) * lam_l;
        for (lam, v) in p.values().iter().zip(p.vectors()) {
            let v = DVector::from_column_slice(v);
            t += &v * v.transpose() * (lam - lam_l);
        }
        let zd = z.to_dense();
        t -= &zd * zd.transpose();
        let oracle_t = dense_normal_matrix(&z, &y, mu, Some(&t)).lu().solve(&hv).unwrap();
        let x = s.solve(&sys, &h, &vec![0.0; d + 1], 0.0).unwrap().x;
        worst = worst.max(rel_err(&x, &oracle_t));
    }
    let secs = start.elapsed().as_secs_f64();
    report.record(
        1,
        worst <= 1e-6 && secs < 10.0,
        format!("worst relative error {worst:.2e} over 50 systems x 3 paths, {secs:.2}s"),
    );
}

/// Minimizer of `1/s^q + σ/2 (s−a)²` by bisection on the derivative,
/// bracket width below 1e-12.
fn bisection_oracle(a: f64, q: f64, sigma: f64) -> f64 {
    let g = |s: f64| -q / s.powf(q + 1.0) + sigma * (s - a);
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mid > 0.0 && g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_2(report: &mut Report, runs: &[RunPair]) {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..1000 {
        let a = rng.gen_range(-10.0..10.0);
        let sigma = 10f64.powf(rng.gen_range(-3.0..3.0));
        let q = [0.5, 1.0, 2.0, 4.0][rng.gen_range(0..4)];
        let s0 = 10f64.powf(rng.gen_range(-2.0..1.0));
        let oracle = bisection_oracle(a, q, sigma);
        match newton_theta_q(a, q, 1.0, sigma, s0, 1e-14) {
            Ok((s, _)) => worst = worst.max((s - oracle).abs()),
            Err(_) => failures += 1,
        }
    }
    let newton: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.results.iter().map(|x| x.mean_newton_iterations()))
        .collect();
    let mean_newton = newton.iter().sum::<f64>() / newton.len() as f64;
    let max_newton = newton.iter().cloned().fold(0.0, f64::max);
    report.record(
        2,
        failures == 0 && worst <= 1e-9 && max_newton <= 10.0,
        format!(
            "worst |s - s*| {worst:.2e}, {failures} errors; Newton steps per coordinate in solver runs: mean {mean_newton:.2}, max {max_newton:.2}"
        ),
    );
}

fn criterion_3(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut ok = 0;
    let mut worst_ratio = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=100);
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = b.transpose() * &b + DMatrix::identity(n, n) * 0.1;
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tol = 1e-8 * DVector::from_column_slice(&rhs).norm();
        let out = psqmr(
            |v, o| o.copy_from_slice((&a * DVector::from_column_slice(v)).as_slice()),
            &rhs,
            &vec![0.0; n],
            tol,
            10 * n + 100,
        )
        .unwrap();
        let true_res = (DVector::from_column_slice(&rhs) - &a * DVector::from_column_slice(&out.x)).norm();
        worst_ratio = worst_ratio.max(true_res / tol);
        if out.converged && true_res <= tol {
            ok += 1;
        }
    }
    let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
    let id = psqmr(|v, o| o.copy_from_slice(v), &b, &vec![0.0; 40], 1e-12, 10).unwrap();
    report.record(
        3,
        ok == 50 && id.iterations == 1,
        format!(
            "{ok}/50 SPD systems within tol (worst true residual / tol {worst_ratio:.2}); identity took {} step(s)",
            id.iterations
        ),
    );
}

struct RunPair {
    label: String,
    regime: Strategy,
    /// sGS then DirectExtended.
    results: [SolveResult; 2],
    secs: [f64; 2],
}

fn instance(seed: u64, n: usize, d: usize, density: f64, q: f64) -> ProblemData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let centre: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cols: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|j| {
            (0..d)
                .filter_map(|i| {
                    rng.gen_bool(density)
                        .then(|| (i, rng.gen_range(-1.0..1.0) + SHIFT * y[j] * centre[i]))
                })
                .collect()
        })
        .collect();
    let x = SparseColMatrix::from_columns(d, &cols).unwrap();
    let dist = median_interclass_distance(&x, &y, 1000, seed).unwrap();
    let c = compute_penalty_parameter(n, d, dist, q).unwrap();
    ProblemData::new(x, y, q, c).unwrap()
}

/// 20 instances cycling through the three regimes, each solved for q = 1, 2
/// by both variants.
fn random_runs() -> Vec<RunPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut runs = Vec::new();
    for i in 0..20u64 {
        let regime = [Strategy::DirectCholesky, Strategy::Smw, Strategy::Iterative][(i % 3) as usize];
        let (n, d, limits) = match regime {
            Strategy::DirectCholesky => (
                rng.gen_range(50..200),
                rng.gen_range(5..50),
                StrategyLimits { d_max: usize::MAX, n_max: 0 },
            ),
            Strategy::Smw => (
                rng.gen_range(20..60),
                rng.gen_range(80..200),
                StrategyLimits { d_max: 0, n_max: usize::MAX },
            ),
            Strategy::Iterative => (
                rng.gen_range(100..200),
                rng.gen_range(100..200),
                StrategyLimits { d_max: 0, n_max: 0 },
            ),
        };
        let density = if i % 2 == 0 { 1.0 } else { (10.0 / d as f64).clamp(0.1, 1.0) };
        for q in [1.0, 2.0] {
            let p = instance(100 + i, n, d, density, q);
            let solve_with = |variant| {
                let opts = SolverOptions {
                    limits,
                    variant,
                    tol: TOL,
                    ..SolverOptions::default()
                };
                let t = Instant::now();
                let r = solve(&p, &opts).unwrap();
                (r, t.elapsed().as_secs_f64())
            };
            let (sgs, t0) = solve_with(Variant::Sgs);
            let (de, t1) = solve_with(Variant::DirectExtended);
            runs.push(RunPair {
                label: format!("#{i} {} n={n} d={d} q={q}", regime.as_str()),
                regime,
                results: [sgs, de],
                secs: [t0, t1],
            });
        }
    }
    runs
}

fn criterion_4(report: &mut Report, runs: &[RunPair]) {
    let mut bad = Vec::new();
    let mut regimes = [0usize; 3];
    for r in runs {
        let sgs = &r.results[0];
        if sgs.strategy == Strategy::DirectCholesky {
            regimes[0] += 1;
        } else if sgs.strategy == Strategy::Smw {
            regimes[1] += 1;
        } else {
            regimes[2] += 1;
        }
        if sgs.status != SolveStatus::Converged || sgs.iterations() > 2000 || r.secs[0] >= 30.0 || sgs.strategy != r.regime {
            bad.push(format!("{}: {:?} after {} its, {:.1}s", r.label, sgs.status, sgs.iterations(), r.secs[0]));
        }
    }
    let slowest = runs.iter().map(|r| r.secs[0]).fold(0.0, f64::max);
    report.record(
        4,
        bad.is_empty(),
        format!(
            "{}/{} sGS runs converged (direct/smw/iterative = {}/{}/{}), slowest {slowest:.2}s{}",
            runs.len() - bad.len(),
            runs.len(),
            regimes[0],
            regimes[1],
            regimes[2],
            if bad.is_empty() { String::new() } else { format!("; failed: {}", bad.join(", ")) }
        ),
    );
}

fn data_dir() -> PathBuf {
    std::env::var_os("DWD_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn find_dataset(name: &str) -> Option<PathBuf> {
    let dir = data_dir();
    [name.to_string(), format!("{name}.gz"), format!("{name}.svm"), format!("{name}.txt")]
        .into_iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
}

fn train_file(path: &Path, q: f64, c: Option<f64>) -> (SolveResult, f64, usize, usize, f64) {
    let start = Instant::now();
    let (x, raw) = read_libsvm_path(path, None).unwrap();
    let (_, y) = binarize_labels(&raw).unwrap();
    let c = c.unwrap_or_else(|| {
        let dist = median_interclass_distance(&x, &y, 1000, 0).unwrap();
        compute_penalty_parameter(x.ncols(), x.nrows(), dist, q).unwrap()
    });
    let p = ProblemData::new(x.clone(), y.clone(), q, c)
        .unwrap()
        .with_class_weights(compute_class_weights(&y, q).unwrap())
        .unwrap();
    let r = solve(&p, &SolverOptions::default()).unwrap();
    let err = classification_error(&r.model.w, r.model.beta, &x, &y);
    (r, err, x.ncols(), x.nrows(), start.elapsed().as_secs_f64())
}

fn criterion_5(report: &mut Report) {
    let (Some(mush), Some(leu)) = (find_dataset("mushrooms"), find_dataset("leu")) else {
        report.record(
            5,
            false,
            format!("mushrooms and leu not found in {}; set DWD_DATA_DIR", data_dir().display()),
        );
        return;
    };
    let (r, err, n, d, secs) = train_file(&mush, 1.0, Some(3.75e2));
    let its = r.iterations();
    let mush_ok = r.status == SolveStatus::Converged && err == 0.0 && (20..=500).contains(&its) && secs < 60.0;
    let mush_line = format!("mushrooms n={n} d={d}: {:?} in {its} its, error {err:.2}%, {secs:.1}s", r.status);
    let (r, err, n, d, _) = train_file(&leu, 1.0, None);
    let leu_ok = err == 0.0 && r.strategy == Strategy::Smw;
    report.record(
        5,
        mush_ok && leu_ok,
        format!("{mush_line}; leu n={n} d={d}: {} path, error {err:.2}%", r.strategy.as_str()),
    );
}

fn criterion_6(report: &mut Report, runs: &[RunPair]) {
    let mut close = 0;
    let mut worst = 0.0f64;
    let mut pairs = 0;
    let mut fewer = 0;
    for r in runs {
        let [sgs, de] = &r.results;
        let (ps, pd) = (sgs.residuals.primal_objective, de.residuals.primal_objective);
        let rel = (ps - pd).abs() / ps.abs().max(1e-300);
        if de.status == SolveStatus::MaxIter || rel <= 1e-4 {
            close += 1;
        } else {
            worst = worst.max(rel);
        }
        if sgs.status == SolveStatus::Converged && de.status == SolveStatus::Converged {
            pairs += 1;
            if sgs.iterations() <= de.iterations() {
                fewer += 1;
            }
        }
    }
    let frac = fewer as f64 / pairs.max(1) as f64;
    report.record(
        6,
        close == runs.len() && frac >= 0.6,
        format!(
            "{close}/{} objectives agree to 1e-4 (worst disagreement {worst:.1e}); sGS used no more iterations on {fewer}/{pairs} converged pairs ({:.0}%)",
            runs.len(),
            100.0 * frac
        ),
    );
}

fn criterion_7(report: &mut Report, runs: &[RunPair]) {
    let root = TOL.sqrt();
    let mut accepted = 0;
    let mut kkt_ok = 0;
    let mut duality_ok = 0;
    let mut worst = 0.0f64;
    for r in runs.iter().flat_map(|r| r.results.iter()) {
        if r.status != SolveStatus::Converged {
            continue;
        }
        accepted += 1;
        let res = &r.residuals;
        if res.eta_gap < root || res.eta_c < root {
            kkt_ok += 1;
        }
        let excess = (res.dual_objective - res.primal_objective) / (1.0 + res.primal_objective.abs());
        if excess <= 1e-6 {
            duality_ok += 1;
        } else {
            worst = worst.max(excess);
        }
    }
    report.record(
        7,
        accepted > 0 && kkt_ok == accepted && duality_ok == accepted,
        format!(
            "of {accepted} accepted terminations: {kkt_ok} meet the gap/complementarity bound, {duality_ok} satisfy weak duality (largest relative excess {worst:.1e})"
        ),
    );
}

fn criterion_8(report: &mut Report) {
    let p = instance(900, 120, 150, 0.1, 1.0);
    let opts = SolverOptions {
        limits: StrategyLimits { d_max: 0, n_max: 0 },
        max_iter: 300,
        seed: 5,
        ..SolverOptions::default()
    };
    let bits = |r: &SolveResult| -> Vec<u64> {
        r.log
            .iter()
            .flat_map(|l| {
                [
                    l.k as u64,
                    l.sigma.to_bits(),
                    l.eta_p.to_bits(),
                    l.eta_d.to_bits(),
                    l.eta_c.to_bits(),
                    l.eta_gap.to_bits(),
                    l.primal_objective.to_bits(),
                    l.dual_objective.to_bits(),
                    l.psqmr_iterations as u64,
                    l.double as u64,
                ]
            })
            .collect()
    };
    let a = solve(&p, &opts).unwrap();
    let b = solve(&p, &opts).unwrap();
    let same = bits(&a) == bits(&b) && a.model.w.iter().zip(&b.model.w).all(|(x, y)| x.to_bits() == y.to_bits());
    report.record(
        8,
        same && !a.log.is_empty(),
        format!("{} log rows compared bit for bit on the iterative path", a.log.len()),
    );
}

#[test]
fn acceptance() {
    let mut report = Report { lines: Vec::new() };
    criterion_1(&mut report);
    criterion_3(&mut report);
    let runs = random_runs();
    criterion_2(&mut report, &runs);
    criterion_4(&mut report, &runs);
    criterion_5(&mut report);
    criterion_6(&mut report, &runs);
    criterion_7(&mut report, &runs);
    criterion_8(&mut report);

    report.lines.sort_by_key(|l| l.0);
    println!("--- summary ---");
    for (c, pass, _) in &report.lines {
        println!("criterion {c}: {}", if *pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<usize> = report.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
