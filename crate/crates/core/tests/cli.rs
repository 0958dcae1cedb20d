use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nativespline::biortho::BiorthoSystem;
use nativespline::cli::{cmd_solve, Overrides, Problem, RunReport};
use nativespline::gridfn::Grid;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nativespline")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CUBIC: &str = r#"{"version":1,"operator":{"type":"derivative","order":2},"space":"L2",
  "data":[[-1,0.5],[0,0],[1.5,1],[2,0],[3,2]]}"#;

#[test]
fn check_default_problem_passes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.json", CUBIC);
    let json = dir.path().join("out.json");
    let out = run(&["check", s(&p), "--out-json", s(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report.pass);
    assert_eq!(report.command, "check");
    assert!(report.invariants.iter().all(|r| r.pass));
    assert_eq!(report.provenance.grid.n, 4801);
}

#[test]
fn delta_phi_in_measure_space_is_a_domain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.json", r#"{"version":1,"operator":{"type":"derivative","order":1},"space":"M","phi":"delta","data":[[0,0],[1,1]]}"#);
    let out = run(&["check", s(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("not admissible"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.json", "{\"version\":1,");
    assert_eq!(run(&["check", s(&bad)]).status.code(), Some(2));
    assert_eq!(run(&["check", "/nonexistent/problem.json"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let p = write(&dir, "p.json", CUBIC);
    assert_eq!(run(&["suite", s(&p), "--trials", "0"]).status.code(), Some(2));
    let outside = write(&dir, "o.json", r#"{"version":1,"operator":{"type":"derivative","order":1},"data":[[0,0],[40,1]]}"#);
    assert_eq!(run(&["solve", s(&outside)]).status.code(), Some(2));
}

#[test]
fn underdetermined_and_unsupported_space_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "u.json", r#"{"version":1,"operator":{"type":"derivative","order":3},"data":[[0,0],[1,1]]}"#);
    let out = run(&["solve", s(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("underdetermined"));
    let p = write(&dir, "lp.json", r#"{"version":1,"operator":{"type":"derivative","order":1},"space":{"Lp":3},"data":[[0,0],[1,1]]}"#);
    assert_eq!(run(&["solve", s(&p)]).status.code(), Some(1));
}

fn phi_csv(grid: &Grid, phis: &[Vec<f64>]) -> String {
    let mut out = String::from("x");
    for k in 0..phis.len() {
        out.push_str(&format!(",phi{}", k + 1));
    }
    out.push('\n');
    for i in 0..grid.len() {
        out.push_str(&grid.x(i).to_string());
        for p in phis {
            out.push_str(&format!(",{}", p[i]));
        }
        out.push('\n');
    }
    out
}

#[test]
fn phi_samples_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::default();
    let sys = BiorthoSystem::gaussian_monomial(grid, 2).unwrap();
    let good: Vec<Vec<f64>> = sys.phis().iter().map(|f| f.samples().to_vec()).collect();
    write(&dir, "good.csv", &phi_csv(&grid, &good));
    let problem = r#"{"version":1,"operator":{"type":"derivative","order":2},"phi":{"samples":"PHI"},"data":[[0,0],[1,1],[2,0]]}"#;
    let p = write(&dir, "good.json", &problem.replace("PHI", "good.csv"));
    assert_eq!(run(&["check", s(&p)]).status.code(), Some(0));

    // Unnormalized Gaussians are not biorthogonal to the monomials.
    let raw: Vec<Vec<f64>> = (0..2).map(|k| grid.nodes().iter().map(|x| x.powi(k) * (-x * x / 2.0).exp()).collect()).collect();
    write(&dir, "raw.csv", &phi_csv(&grid, &raw));
    let p = write(&dir, "raw.json", &problem.replace("PHI", "raw.csv"));
    let out = run(&["check", s(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("not biorthogonal"));

    write(&dir, "short.csv", "x,phi1,phi2\n0,1,2\n");
    let p = write(&dir, "short.json", &problem.replace("PHI", "short.csv"));
    assert_eq!(run(&["check", s(&p)]).status.code(), Some(2));
}

fn natural_cubic(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    // Dense solve for the interior second derivatives; fine for a handful of knots.
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let k = n - 2;
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut r = nalgebra::DVector::<f64>::zeros(k);
    for i in 0..k {
        a[(i, i)] = 2.0 * (h[i] + h[i + 1]);
        if i > 0 {
            a[(i, i - 1)] = h[i];
        }
        if i + 1 < k {
            a[(i, i + 1)] = h[i + 1];
        }
        r[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
    }
    let inner = a.lu().solve(&r).unwrap();
    let mut m = vec![0.0; n];
    m[1..n - 1].copy_from_slice(inner.as_slice());
    if x <= xs[0] || x >= xs[n - 1] {
        // Linear continuation with the end slope.
        let (at, y0, slope) = if x <= xs[0] {
            (xs[0], ys[0], (ys[1] - ys[0]) / h[0] - h[0] * m[1] / 6.0)
        } else {
            (xs[n - 1], ys[n - 1], (ys[n - 1] - ys[n - 2]) / h[n - 2] + h[n - 2] * m[n - 2] / 6.0)
        };
        return y0 + slope * (x - at);
    }
    let i = xs.windows(2).position(|w| x <= w[1]).unwrap();
    let (t0, t1, hi) = (xs[i + 1] - x, x - xs[i], h[i]);
    m[i] * t0.powi(3) / (6.0 * hi) + m[i + 1] * t1.powi(3) / (6.0 * hi) + (ys[i] / hi - m[i] * hi / 6.0) * t0 + (ys[i + 1] / hi - m[i + 1] * hi / 6.0) * t1
}

#[test]
fn solve_csv_matches_natural_cubic_and_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.json", CUBIC);
    let (csv, json) = (dir.path().join("f.csv"), dir.path().join("f.json"));
    let out = run(&["solve", s(&p), "--out-csv", s(&csv), "--out-json", s(&json)]);
    assert_eq!(out.status.code(), Some(0));

    let xs = [-1.0, 0.0, 1.5, 2.0, 3.0];
    let ys = [0.5, 0.0, 1.0, 0.0, 2.0];
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,f,Lf"));
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        let want = natural_cubic(&xs, &ys, v[0]);
        assert!((v[1] - want).abs() <= 1e-9 * (1.0 + want.abs()), "x={} f={} want {want}", v[0], v[1]);
        rows += 1;
    }
    assert_eq!(rows, 4801);

    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let problem = Problem::load(&p, &Overrides::default()).unwrap();
    let (direct, _) = cmd_solve(&problem).unwrap();
    assert_eq!(report, direct);
    let sol = report.solution.unwrap();
    let again: nativespline::solve::Solution = serde_json::from_str(&serde_json::to_string(&sol).unwrap()).unwrap();
    assert!(sol.weights.iter().zip(&again.weights).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn measure_solve_reports_certified_bound() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.json", r#"{"version":1,"operator":{"type":"derivative","order":1},"space":"M","phi":"gaussian","data":[[0,0],[1,1],[2,0]]}"#);
    let json = dir.path().join("o.json");
    assert_eq!(run(&["solve", s(&p), "--out-json", s(&json)]).status.code(), Some(0));
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let sol = report.solution.unwrap();
    assert!((sol.objective - 2.0).abs() <= 1e-9);
    assert!((sol.lower_bound.unwrap() - 2.0).abs() <= 1e-9);
    assert_eq!(sol.knots.len(), 2);
}

#[test]
fn suite_runs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.json", r#"{"version":1,"operator":{"type":"derivative","order":2},"space":"M",
      "phi_alt":{"shifted-gaussian":0.5},"data":[[0,0],[1,1],[2,0],[3,1]]}"#);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(run(&["suite", s(&p), "--trials", "10", "--seed", "5", "--out-json", s(&a)]).status.code(), Some(0));
    assert_eq!(run(&["suite", s(&p), "--trials", "10", "--seed", "5", "--out-json", s(&b)]).status.code(), Some(0));
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let report: RunReport = serde_json::from_slice(&ta).unwrap();
    assert_eq!(report.provenance.seed, 5);
    assert_eq!(report.provenance.trials, Some(10));
    assert!(report.equivalence.is_some());
    assert!(report.invariants.iter().all(|r| r.pass));
}

#[test]
fn grid_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "p.json", CUBIC);
    let json = dir.path().join("o.json");
    let out = run(&["--grid-n", "2401", "--grid-t", "10", "check", s(&p), "--out-json", s(&json)]);
    assert_eq!(out.status.code(), Some(0));
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.provenance.grid.n, 2401);
    assert_eq!(report.provenance.grid.xmax, 10.0);
}
