//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! value, its tolerance and the wall time. Run with
//! `cargo test --test acceptance -- --nocapture` to see the table.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nativespline::biortho::{gaussian_moment_phis, BiorthoSystem};
use nativespline::gridfn::{inner, Form, Grid, GridFunction};
use nativespline::native::{
    change_system, identity_suite, projector_suite, random_atoms, stabilized_inverse, xprime_norm, NativeSpaceSpec,
    PrimaryNorm,
};
use nativespline::operator::{apply, green, make_derivative_operator, OperatorDescriptor};
use nativespline::solve::{
    conditional_pd_check, constrained_form, default_knot_grid, evaluate_solution, solve_gtv, solve_l2, DataSet,
    GtvConfig, Solution,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn criterion(id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (mut pass, detail) = match result {
        Ok(v) => (v.pass, v.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let mut timing = format!("{:.3} s", elapsed.as_secs_f64());
    if let Some(limit) = limit {
        timing.push_str(&format!(" (limit {} s)", limit.as_secs_f64()));
        pass &= elapsed < limit;
    }
    println!("{} {id:>2} {name}: {detail} [{timing}]", if pass { "PASS" } else { "FAIL" });
    pass
}

fn op(m: u32) -> OperatorDescriptor {
    make_derivative_operator(m).unwrap()
}

fn hermite_spec(m: u32, primary: PrimaryNorm) -> NativeSpaceSpec {
    let sys = BiorthoSystem::hermite_gaussian(Grid::default(), m as usize).unwrap();
    NativeSpaceSpec::new(op(m), sys, primary).unwrap()
}

/// Natural cubic spline through `(xs, ys)` by the tridiagonal system for the
/// second derivatives.
fn natural_cubic(xs: &[f64], ys: &[f64]) -> impl Fn(f64) -> f64 {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sec = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag: Vec<f64> = (0..k).map(|i| 2.0 * (h[i] + h[i + 1])).collect();
        let mut rhs: Vec<f64> = (0..k)
            .map(|i| 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]))
            .collect();
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (0..k).rev() {
            let upper = if i + 1 < k { h[i + 1] * sec[i + 2] } else { 0.0 };
            sec[i + 1] = (rhs[i] - upper) / diag[i];
        }
    }
    let (xs, ys) = (xs.to_vec(), ys.to_vec());
    move |x| {
        let i = xs.windows(2).position(|w| x <= w[1]).unwrap_or(n - 2);
        let (a, b) = (xs[i], xs[i + 1]);
        let hi = b - a;
        let (t0, t1) = (b - x, x - a);
        sec[i] * t0.powi(3) / (6.0 * hi)
            + sec[i + 1] * t1.powi(3) / (6.0 * hi)
            + (ys[i] / hi - sec[i] * hi / 6.0) * t0
            + (ys[i + 1] / hi - sec[i + 1] * hi / 6.0) * t1
    }
}

fn random_dataset(rng: &mut ChaCha8Rng, points: usize) -> DataSet {
    let mut x = rng.random_range(-2.0..0.0);
    let pts = (0..points)
        .map(|_| {
            x += rng.random_range(0.3..2.0);
            (x, rng.random_range(-2.0..2.0))
        })
        .collect();
    DataSet::new(pts).unwrap()
}

fn c1_biorthogonality() -> Verdict {
    let mut worst = 0.0f64;
    for m in 1..=4 {
        let sys = BiorthoSystem::hermite_gaussian(Grid::default(), m).unwrap();
        // Gram recomputed directly from the pairings.
        for (i, phi) in sys.phis().iter().enumerate() {
            for (j, p) in sys.ps().iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner(phi, p).unwrap() - target).abs());
            }
        }
    }
    verdict(worst <= 1e-6, format!("max |Gram - I| over m = 1..4 is {worst:.3e} (tol 1e-6)"))
}

fn c2_green_values() -> Verdict {
    let a = green(&op(1), 1.0);
    let b = green(&op(2), 2.0);
    verdict(a == 0.5 && b == 1.0, format!("green(1, 1) = {a}, green(2, 2) = {b} (exact 0.5, 1.0)"))
}

fn c3_identity_suite() -> Verdict {
    let names = ["left_pseudo_inverse", "right_inverse", "pseudo_right_inverse_of_adjoint", "left_inverse_of_adjoint", "null_space_annihilation"];
    let mut worst = 0.0f64;
    let mut all = true;
    let mut failures = Vec::new();
    for (m, primary) in [(1, PrimaryNorm::L2), (2, PrimaryNorm::L2), (1, PrimaryNorm::M), (2, PrimaryNorm::M)] {
        let report = identity_suite(&hermite_spec(m, primary), 50, 7).unwrap();
        for name in names {
            let r = report.get(name).unwrap();
            worst = worst.max(r.value);
            if r.value.is_nan() || r.value > 1e-4 {
                all = false;
                failures.push(format!("m={m} {}: {name} = {:e}", primary.name(), r.value));
            }
        }
        for r in &report.invariants {
            if !r.pass {
                all = false;
                failures.push(format!("m={m} {}: {} = {:e} > {:e}", primary.name(), r.name, r.value, r.threshold));
            }
        }
    }
    let mut detail = format!("worst inverse / annihilation residual {worst:.3e} (tol 1e-4) over 4 specs x 50 trials");
    if !failures.is_empty() {
        detail.push_str(&format!("; failing: {}", failures.join(", ")));
    }
    verdict(all, detail)
}

fn c4_projectors() -> Verdict {
    let g = Grid::default();
    let mut worst = 0.0f64;
    let mut all = true;
    let systems = (1..=4)
        .map(|m| BiorthoSystem::hermite_gaussian(g, m).unwrap())
        .chain([BiorthoSystem::gaussian_monomial(g, 2).unwrap(), BiorthoSystem::delta_derivatives(g, 2).unwrap()]);
    for sys in systems {
        for r in projector_suite(&sys, 100, 11).unwrap() {
            worst = worst.max(r.value);
            all &= r.value <= 1e-6;
        }
    }
    verdict(all, format!("worst idempotence / adjointness defect {worst:.3e} (tol 1e-6) over 100 inputs x 6 systems"))
}

fn c5_norm_equivalence() -> Verdict {
    let g = Grid::default();
    let mut lines = Vec::new();
    let mut all = true;
    for m in [1u32, 2, 3] {
        let spec = hermite_spec(m, PrimaryNorm::M);
        let alt = gaussian_moment_phis(g, m as usize, 0.5).unwrap();
        let (other, info) = change_system(&spec, alt.clone(), 1e-6).unwrap();
        // Independent Frobenius constants from C_mn = <phi~_m, p_n>.
        let n0 = m as usize;
        let c = DMatrix::from_fn(n0, n0, |i, j| inner(&alt[i], &spec.sys().ps()[j]).unwrap());
        let b2 = c.norm();
        let b1 = 1.0 / c.clone().try_inverse().unwrap().norm();
        let consts_ok = (b2 - info.b2).abs() <= 1e-12 * b2 && (b1 - info.b1).abs() <= 1e-12 * b1;
        let mut rng = ChaCha8Rng::seed_from_u64(500 + m as u64);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..100 {
            let coeffs: Vec<f64> = (0..n0).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = spec.sys().p_combination(&coeffs).unwrap();
            let norm = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = norm(other.sys().phi_coeffs(&p).unwrap()) / norm(spec.sys().phi_coeffs(&p).unwrap());
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let slack = 1e-12;
        let ratios_ok = lo >= b1 * (1.0 - slack) && hi <= b2 * (1.0 + slack);
        // ||Lf||_M for atom-form f, measured under both systems.
        let mut identical = true;
        for t in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + t);
            let w = random_atoms(g, &mut rng);
            let parts: Vec<Form> = w
                .atoms()
                .iter()
                .map(|a| Form::GreenAtom { order: m, center: a.center, weight: a.weight })
                .collect();
            let f = GridFunction::from_form(g, Form::Sum(parts));
            let lf = apply(spec.op(), &f).unwrap();
            let a = xprime_norm(&spec, &lf).unwrap();
            let b = xprime_norm(&other, &lf).unwrap();
            identical &= a.to_bits() == b.to_bits();
            let via_inverse = apply(spec.op(), &stabilized_inverse(&spec, &w).unwrap()).unwrap();
            identical &= xprime_norm(&spec, &via_inverse).unwrap().to_bits() == xprime_norm(&other, &via_inverse).unwrap().to_bits();
        }
        all &= consts_ok && ratios_ok && identical;
        lines.push(format!("m={m}: ratios [{lo:.4}, {hi:.4}] within [B1 {b1:.4}, B2 {b2:.4}], ||Lf|| identical {identical}"));
    }
    verdict(all, lines.join("; "))
}

fn c6_l2_solver() -> Verdict {
    let data = DataSet::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
    let s1 = solve_l2(&op(1), &data).unwrap();
    // Piecewise-linear energy sum (dy)^2 / dx.
    let oracle: f64 = data.points().windows(2).map(|w| (w[1].1 - w[0].1).powi(2) / (w[1].0 - w[0].0)).sum();
    let e1 = (s1.objective - oracle).abs();
    let s2 = solve_l2(&op(2), &data).unwrap();
    let spline = natural_cubic(&data.xs(), &data.ys());
    let xs: Vec<f64> = (0..=2000).map(|i| 2.0 * i as f64 / 2000.0).collect();
    let vals = evaluate_solution(&s2, &op(2), &xs);
    let e2 = xs.iter().zip(&vals).map(|(&x, v)| (v - spline(x)).abs()).fold(0.0, f64::max);
    verdict(
        e1 <= 1e-6 && e2 <= 1e-4,
        format!("m=1 objective {} vs {oracle} (|err| {e1:.1e}, tol 1e-6); m=2 max |f - natural cubic| on [0,2] {e2:.1e} (tol 1e-4)", s1.objective),
    )
}

fn knot_distance(sol: &Solution, x: f64) -> f64 {
    sol.knots.iter().map(|t| (x - t).abs()).fold(f64::INFINITY, f64::min)
}

fn c7_gtv_solver() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = GtvConfig::default();
    let mut worst_rel = 0.0f64;
    let mut max_knots1 = 0;
    let mut worst_d2 = 0.0f64;
    let mut max_knots2 = 0;
    let mut worst_gap = 0.0f64;
    let mut slowest = Duration::ZERO;
    for _ in 0..10 {
        let data = random_dataset(&mut rng, 5);
        let grid = default_knot_grid(&data, cfg.knot_density).unwrap();
        let t = Instant::now();
        let s = solve_gtv(&op(1), &data, &grid, &cfg).unwrap();
        slowest = slowest.max(t.elapsed());
        let tv: f64 = data.ys().windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        worst_rel = worst_rel.max((s.objective - tv).abs() / tv);
        max_knots1 = max_knots1.max(s.knots.len());

        let t = Instant::now();
        let s = solve_gtv(&op(2), &data, &grid, &cfg).unwrap();
        slowest = slowest.max(t.elapsed());
        max_knots2 = max_knots2.max(s.knots.len());
        worst_gap = worst_gap.max((s.objective - s.lower_bound.unwrap()) / s.objective.max(1e-300));
        // Second-difference scan away from the knots.
        let h = 1e-3;
        let (lo, hi) = (data.xs()[0] - 1.0, data.xs()[4] + 1.0);
        let n = ((hi - lo) / h) as usize;
        for i in 1..n {
            let x = lo + i as f64 * h;
            if knot_distance(&s, x) <= 2.0 * h {
                continue;
            }
            let v = evaluate_solution(&s, &op(2), &[x - h, x, x + h]);
            worst_d2 = worst_d2.max(((v[0] - 2.0 * v[1] + v[2]) / (h * h)).abs());
        }
    }
    let pass = worst_rel <= 1e-5 && max_knots1 <= 4 && worst_d2 <= 1e-6 && max_knots2 <= 3 && slowest < Duration::from_secs(10);
    verdict(
        pass,
        format!(
            "m=1: max rel |obj - sum|dy|| {worst_rel:.1e} (tol 1e-5), max knots {max_knots1} (<= 4); m=2: max |D2 f| off knots {worst_d2:.1e} (tol 1e-6), max knots {max_knots2} (<= 3), max dual gap {worst_gap:.1e}; slowest instance {:.3} s (limit 10 s)",
            slowest.as_secs_f64()
        ),
    )
}

fn c8_conditional_positivity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = f64::INFINITY;
    for m in [1u32, 2] {
        for set in 0..7 {
            let k = rng.random_range(4..=9);
            let mut pts: Vec<f64> = Vec::new();
            while pts.len() < k {
                let x = rng.random_range(-4.0..4.0);
                if pts.iter().all(|p: &f64| (p - x).abs() > 1e-3) {
                    pts.push(x);
                }
            }
            let r = conditional_pd_check(&op(m), &pts, 1000, 100 + set).unwrap();
            worst = worst.min(r.min_value);
        }
    }
    // Direct kernel sum with h(r) = |r|^3 / 12 at {0, 1, 2}, a = (1, -2, 1).
    let pts = [0.0f64, 1.0, 2.0];
    let a = [1.0, -2.0, 1.0];
    let mut direct = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            direct += a[i] * a[j] * (pts[i] - pts[j]).abs().powi(3) / 12.0;
        }
    }
    let v = constrained_form(&op(2), &pts, &a).unwrap();
    let pass = worst > 0.0 && (v - 2.0 / 3.0).abs() <= 1e-12 && (direct - 2.0 / 3.0).abs() <= 1e-12;
    verdict(pass, format!("min constrained form {worst:.3e} (> 0) over 2 x 7 point sets x 1000 vectors; (1,-2,1) gives {v} (2/3 +- 1e-12)"))
}

fn c9_null_space_invariance() -> Verdict {
    let data = DataSet::new(vec![(-1.0, 0.3), (0.0, 1.0), (0.7, -0.4), (1.5, 0.2), (2.0, 1.1), (3.2, 0.0)]).unwrap();
    let cfg = GtvConfig::default();
    let grid = default_knot_grid(&data, cfg.knot_density).unwrap();
    let mut worst_w = 0.0f64;
    let mut worst_b = 0.0f64;
    let mut same_knots = true;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for m in [1u32, 2] {
        let o = op(m);
        let solvers: [&dyn Fn(&DataSet) -> Solution; 2] =
            [&|d| solve_l2(&o, d).unwrap(), &|d| solve_gtv(&o, d, &grid, &cfg).unwrap()];
        for solve in solvers {
            let base = solve(&data);
            for _ in 0..20 {
                let q: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();
                let ys: Vec<f64> = data
                    .points()
                    .iter()
                    .map(|&(x, y)| y + q.iter().enumerate().map(|(j, c)| c * x.powi(j as i32)).sum::<f64>())
                    .collect();
                let s = solve(&data.with_values(&ys).unwrap());
                same_knots &= s.knots == base.knots;
                for (a, b) in s.weights.iter().zip(&base.weights) {
                    worst_w = worst_w.max((a - b).abs());
                }
                for (j, qj) in q.iter().enumerate() {
                    worst_b = worst_b.max((s.null_coeffs[j] - base.null_coeffs[j] - qj).abs());
                }
            }
        }
    }
    verdict(
        same_knots && worst_w <= 1e-8 && worst_b <= 1e-8,
        format!("knots unchanged {same_knots}; max weight change {worst_w:.1e} (tol 1e-8); max |db - q| {worst_b:.1e} over 2 orders x 2 solvers x 20 shifts"),
    )
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut detail = Vec::new();
    for (name, body) in [
        ("tv", r#"{"version":1,"operator":{"type":"derivative","order":1},"space":"M","phi":"gaussian","data":[[0,0],[1,1],[2,0],[3.5,-1]],"solver":{"seed":3}}"#),
        ("l2", r#"{"version":1,"operator":{"type":"derivative","order":2},"space":"L2","data":[[0,0],[1,1],[2,0],[3.5,-1]],"solver":{"seed":3}}"#),
    ] {
        let problem = dir.path().join(format!("{name}.json"));
        std::fs::write(&problem, body).unwrap();
        let mut outputs = Vec::new();
        for run in 0..2 {
            let csv = dir.path().join(format!("{name}{run}.csv"));
            let json = dir.path().join(format!("{name}{run}.json"));
            let out = Command::new(env!("CARGO_BIN_EXE_nativespline"))
                .arg("solve")
                .arg(&problem)
                .arg("--out-csv")
                .arg(&csv)
                .arg("--out-json")
                .arg(&json)
                .output()
                .unwrap();
            assert_eq!(out.status.code(), Some(0));
            outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&json).unwrap(), out.stdout));
        }
        let same = outputs[0] == outputs[1];
        identical &= same;
        detail.push(format!("{name}: {} CSV bytes, identical {same}", outputs[0].0.len()));
    }
    verdict(identical, detail.join("; "))
}

#[test]
fn acceptance() {
    let results = [
        criterion(1, "biorthogonality of Hermite-Gaussian systems", Some(Duration::from_secs(1)), c1_biorthogonality),
        criterion(2, "Green's function values", None, c2_green_values),
        criterion(3, "identity suite", Some(Duration::from_secs(30)), c3_identity_suite),
        criterion(4, "projector algebra", None, c4_projectors),
        criterion(5, "norm equivalence under change of basis", None, c5_norm_equivalence),
        criterion(6, "L2 interpolation solver", Some(Duration::from_secs(1)), c6_l2_solver),
        criterion(7, "total-variation solver", None, c7_gtv_solver),
        criterion(8, "conditional positive definiteness", None, c8_conditional_positivity),
        criterion(9, "null-space invariance of the solvers", None, c9_null_space_invariance),
        criterion(10, "deterministic solve output", None, c10_determinism),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    assert!(results.iter().all(|p| *p));
}
