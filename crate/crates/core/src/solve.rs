//! Interpolation solvers: the quadratic (kernel) problem and the sparse
//! generalized-total-variation problem, plus the conditional positivity check
//! of the kernel.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gridfn::{factorial, green_kernel, poly_eval, Atom, Form, Grid, GridFunction};
use crate::lp::simplex;
use crate::native::{merge_atoms, trial_rng};
use crate::operator::OperatorDescriptor;
use crate::{Error, Result};

/// Interpolation residual and side-condition tolerance (relative to the data scale).
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Knots with `|a| <= PRUNE_REL * max|a|` are dropped.
pub const PRUNE_REL: f64 = 1e-8;

/// Sample points `(x_m, y_m)` with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    points: Vec<(f64, f64)>,
}

impl DataSet {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidData("no data points".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidData("non-finite data value".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidData("abscissae must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Same abscissae, new ordinates.
    pub fn with_values(&self, ys: &[f64]) -> Result<Self> {
        if ys.len() != self.len() {
            return Err(Error::LengthMismatch(ys.len(), self.len()));
        }
        Self::new(self.points.iter().zip(ys).map(|(p, &y)| (p.0, y)).collect())
    }

    fn require_determined(&self, op: &OperatorDescriptor) -> Result<()> {
        if self.len() < op.null_dim() {
            return Err(Error::Underdetermined { points: self.len(), dim: op.null_dim() });
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.points.iter().fold(1.0f64, |m, p| m.max(p.1.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolutionKind {
    Kernel,
    SparseSpline,
}

/// `f(x) = sum_k a_k atom(x - tau_k) + sum_n b_n p_n(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub kind: SolutionKind,
    pub order: u32,
    pub knots: Vec<f64>,
    pub weights: Vec<f64>,
    pub null_coeffs: Vec<f64>,
    /// `a^T G a` for kernel solutions, `sum |a_k|` for sparse splines.
    pub objective: f64,
    /// `max_m |f(x_m) - y_m|`.
    pub residual: f64,
    /// Certified lower bound on the continuum objective (sparse splines only).
    pub lower_bound: Option<f64>,
    pub iterations: usize,
}

/// Kernel of the quadratic problem: `(-1)^m |x - y|^(2m-1) / (2 (2m-1)!)`.
pub fn kernel_h(op: &OperatorDescriptor, x: f64, y: f64) -> f64 {
    let m = op.order() as i32;
    let r = (x - y).abs();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * r.powi(2 * m - 1) / (2.0 * factorial(2 * m as u32 - 1))
}

fn null_matrix(op: &OperatorDescriptor, xs: &[f64]) -> DMatrix<f64> {
    let n0 = op.null_dim();
    DMatrix::from_fn(xs.len(), n0, |i, j| poly_eval(&op.null_basis()[j], xs[i]))
}

fn evaluate_terms(sol: &Solution, op: &OperatorDescriptor, x: f64) -> f64 {
    let atoms: f64 = sol
        .knots
        .iter()
        .zip(&sol.weights)
        .map(|(&t, &a)| match sol.kind {
            SolutionKind::Kernel => a * kernel_h(op, x, t),
            SolutionKind::SparseSpline => a * green_kernel(sol.order, x - t),
        })
        .sum();
    let null: f64 = op.null_basis_at(x).iter().zip(&sol.null_coeffs).map(|(p, b)| p * b).sum();
    atoms + null
}

/// Evaluates the solution's expansion at `xs`.
pub fn evaluate_solution(sol: &Solution, op: &OperatorDescriptor, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| evaluate_terms(sol, op, x)).collect()
}

/// The solution as a closed-form grid function, so that operators act on it
/// analytically.
pub fn solution_function(sol: &Solution, op: &OperatorDescriptor, grid: Grid) -> GridFunction {
    let m = op.order();
    let mut poly = vec![0.0; op.null_basis().iter().map(Vec::len).max().unwrap_or(0)];
    for (coeffs, b) in op.null_basis().iter().zip(&sol.null_coeffs) {
        for (j, c) in coeffs.iter().enumerate() {
            poly[j] += b * c;
        }
    }
    let mut terms = vec![Form::Polynomial(poly)];
    for (&t, &a) in sol.knots.iter().zip(&sol.weights) {
        terms.push(match sol.kind {
            // h = (-1)^m * green_kernel(2m, .)
            SolutionKind::Kernel => Form::GreenAtom {
                order: 2 * m,
                center: t,
                weight: if m.is_multiple_of(2) { a } else { -a },
            },
            SolutionKind::SparseSpline => Form::GreenAtom { order: m, center: t, weight: a },
        });
    }
    GridFunction::from_form(grid, Form::Sum(terms))
}

fn residual_of(sol: &Solution, op: &OperatorDescriptor, data: &DataSet) -> f64 {
    data.points()
        .iter()
        .map(|&(x, y)| (evaluate_terms(sol, op, x) - y).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `||L f||_2^2` subject to `f(x_m) = y_m`.
pub fn solve_l2(op: &OperatorDescriptor, data: &DataSet) -> Result<Solution> {
    data.require_determined(op)?;
    let xs = data.xs();
    let m = xs.len();
    let n0 = op.null_dim();
    let p = null_matrix(op, &xs);
    let g = DMatrix::from_fn(m, m, |i, j| kernel_h(op, xs[i], xs[j]));
    let mut k = DMatrix::zeros(m + n0, m + n0);
    k.view_mut((0, 0), (m, m)).copy_from(&g);
    k.view_mut((0, m), (m, n0)).copy_from(&p);
    k.view_mut((m, 0), (n0, m)).copy_from(&p.transpose());
    let mut rhs = DVector::zeros(m + n0);
    rhs.rows_mut(0, m).copy_from(&DVector::from_vec(data.ys()));
    let lu = k.lu();
    let z = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let a = z.rows(0, m).into_owned();
    let b = z.rows(m, n0).into_owned();
    let side = (p.transpose() * &a).amax();
    let scale = data.scale();
    let objective = (a.transpose() * &g * &a)[(0, 0)];
    let mut sol = Solution {
        kind: SolutionKind::Kernel,
        order: op.order(),
        knots: xs,
        weights: a.iter().copied().collect(),
        null_coeffs: b.iter().copied().collect(),
        objective,
        residual: 0.0,
        lower_bound: None,
        iterations: 0,
    };
    sol.residual = residual_of(&sol, op, data);
    if sol.residual > RESIDUAL_TOL * scale || side > RESIDUAL_TOL * scale * (1.0 + a.amax()) {
        return Err(Error::SingularSystem);
    }
    Ok(sol)
}

/// Algorithm for the discretized l1 problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GtvMethod {
    /// Exact vertex solution by the simplex method.
    Simplex,
    /// Alternating-direction iterations followed by a support refit.
    Admm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtvConfig {
    pub method: GtvMethod,
    /// Candidate knots per data point.
    pub knot_density: usize,
    pub max_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub rho: f64,
}

impl Default for GtvConfig {
    fn default() -> Self {
        Self { method: GtvMethod::Simplex, knot_density: 10, max_iter: 50_000, abs_tol: 1e-10, rel_tol: 1e-8, rho: 1.0 }
    }
}

/// Uniform candidate grid of `density * M` points over `[x_1 - d, x_M + d]`
/// with `d = (x_M - x_1) / (density * M)`.
pub fn default_knot_grid(data: &DataSet, density: usize) -> Result<Grid> {
    let xs = data.xs();
    let count = (density.max(1) * xs.len()).max(3);
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let d = span / count as f64;
    Grid::new(lo - d, hi + d, count)
}

/// Rows of `m`-th divided differences; they annihilate polynomials of degree `< m`.
fn divided_differences(xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let rows = xs.len().saturating_sub(m);
    (0..rows)
        .map(|i| {
            let mut row = vec![0.0; xs.len()];
            for j in i..=i + m {
                let d: f64 = (i..=i + m).filter(|&l| l != j).map(|l| xs[j] - xs[l]).product();
                row[j] = 1.0 / d;
            }
            let peak = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            row.iter_mut().for_each(|v| *v /= peak);
            row
        })
        .collect()
}

/// Grid nodes plus the data sites and the midpoint of every data interval.
/// A step strictly between two close sites needs a candidate there even when
/// the grid is too coarse to place one.
fn candidate_knots(grid: &Grid, xs: &[f64]) -> Vec<f64> {
    let mut c = grid.nodes();
    c.extend_from_slice(xs);
    c.extend(xs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    c.sort_by(f64::total_cmp);
    let tol = 1e-9 * grid.dx();
    c.dedup_by(|a, b| (*a - *b).abs() <= tol);
    c
}

fn fit_null(op: &OperatorDescriptor, data: &DataSet, knots: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let xs = data.xs();
    let p = null_matrix(op, &xs);
    let rhs = DVector::from_iterator(
        xs.len(),
        xs.iter().zip(data.ys()).map(|(&x, y)| {
            y - knots.iter().zip(weights).map(|(&t, &a)| a * green_kernel(op.order(), x - t)).sum::<f64>()
        }),
    );
    let svd = p.svd(true, true);
    let b = svd.solve(&rhs, 1e-14).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(b.iter().copied().collect())
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Basis pursuit `min ||a||_1 s.t. B a = r` by alternating directions.
fn admm_l1(b: &DMatrix<f64>, r: &DVector<f64>, cfg: &GtvConfig) -> Result<(DVector<f64>, usize)> {
    let k = b.ncols();
    let bbt = b * b.transpose();
    let chol = bbt.cholesky().ok_or(Error::SingularSystem)?;
    let project = |v: &DVector<f64>| -> DVector<f64> {
        let resid = b * v - r;
        v - b.transpose() * chol.solve(&resid)
    };
    let mut z = DVector::zeros(k);
    // Scaled dual variable: u = y / rho.
    let mut u = DVector::zeros(k);
    let mut rho = cfg.rho;
    let sqrt_k = (k as f64).sqrt();
    for it in 1..=cfg.max_iter {
        let x = project(&(&z - &u));
        let z_old = z.clone();
        z = (&x + &u).map(|v| soft(v, 1.0 / rho));
        u += &x - &z;
        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_old).norm();
        let eps_pri = sqrt_k * cfg.abs_tol + cfg.rel_tol * x.norm().max(z.norm());
        let eps_dual = sqrt_k * cfg.abs_tol + cfg.rel_tol * rho * u.norm();
        if primal <= eps_pri && dual <= eps_dual {
            return Ok((z, it));
        }
        // Periodic residual balancing, frozen for the second half of the budget
        // so the final iterations run at a fixed penalty.
        let adapt = it % 100 == 0 && 2 * it <= cfg.max_iter;
        if !adapt {
            continue;
        }
        if primal > 10.0 * dual {
            rho *= 2.0;
            u /= 2.0;
        } else if dual > 10.0 * primal {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    Err(Error::NonConvergence(cfg.max_iter))
}

/// Minimizes `sum |a_k|` over Green-function atoms on the candidate knots of
/// `knot_grid` (plus the data sites) and free null-space coefficients, subject
/// to interpolation.
pub fn solve_gtv(op: &OperatorDescriptor, data: &DataSet, knot_grid: &Grid, cfg: &GtvConfig) -> Result<Solution> {
    data.require_determined(op)?;
    let xs = data.xs();
    let ys = data.ys();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if knot_grid.x_min() > lo || knot_grid.x_max() < hi {
        return Err(Error::InvalidArgument("knot grid must span the data sites".into()));
    }
    let order = op.order();
    let n0 = op.null_dim();
    let cands = candidate_knots(knot_grid, &xs);
    if cands.len() < xs.len() {
        return Err(Error::InvalidArgument("fewer candidate knots than data points".into()));
    }
    let z = divided_differences(&xs, n0);
    let dict: Vec<Vec<f64>> = xs.iter().map(|&x| cands.iter().map(|&t| green_kernel(order, x - t)).collect()).collect();
    // Reduced system (Z A) a = Z y; the null-space part has been eliminated.
    let za: Vec<Vec<f64>> = z
        .iter()
        .map(|row| (0..cands.len()).map(|k| row.iter().zip(&dict).map(|(zi, d)| zi * d[k]).sum()).collect())
        .collect();
    let zy: Vec<f64> = z.iter().map(|row| row.iter().zip(&ys).map(|(a, b)| a * b).sum()).collect();

    let kc = cands.len();
    let (weights, iterations, dual) = match cfg.method {
        GtvMethod::Simplex => {
            let a: Vec<Vec<f64>> = za.iter().map(|r| r.iter().copied().chain(r.iter().map(|v| -v)).collect()).collect();
            let lp = simplex(&a, &zy, &vec![1.0; 2 * kc], cfg.max_iter)?;
            let w: Vec<f64> = (0..kc).map(|k| lp.x[k] - lp.x[kc + k]).collect();
            (w, lp.iterations, Some(lp.dual))
        }
        GtvMethod::Admm => {
            if za.is_empty() {
                (vec![0.0; kc], 0, None)
            } else {
                let bm = DMatrix::from_fn(za.len(), kc, |i, j| za[i][j]);
                let (w, it) = admm_l1(&bm, &DVector::from_vec(zy.clone()), cfg)?;
                let peak = w.amax();
                let support: Vec<usize> = (0..kc).filter(|&k| w[k].abs() > PRUNE_REL * peak).collect();
                // Minimum-norm correction on the support so the constraints hold
                // to machine precision. A fresh solve would spread mass over a
                // wide support and inflate the l1 value.
                let bs = DMatrix::from_fn(za.len(), support.len(), |i, j| za[i][support[j]]);
                let ws = DVector::from_iterator(support.len(), support.iter().map(|&k| w[k]));
                let mut full = vec![0.0; kc];
                if !support.is_empty() {
                    let resid = DVector::from_vec(zy.clone()) - &bs * &ws;
                    let corr = bs
                        .svd(true, true)
                        .solve(&resid, 1e-14)
                        .map_err(|e| Error::Internal(e.to_string()))?;
                    for (j, &k) in support.iter().enumerate() {
                        full[k] = ws[j] + corr[j];
                    }
                }
                (full, it, None)
            }
        }
    };

    let peak = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let atoms: Vec<Atom> = cands
        .iter()
        .zip(&weights)
        .filter(|(_, w)| w.abs() > PRUNE_REL * peak)
        .map(|(&t, &w)| Atom { center: t, weight: w, derivative: 0 })
        .collect();
    let scale = data.scale();
    let build = |atoms: &[Atom]| -> Result<Solution> {
        let knots: Vec<f64> = atoms.iter().map(|a| a.center).collect();
        let w: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
        let b = fit_null(op, data, &knots, &w)?;
        let mut sol = Solution {
            kind: SolutionKind::SparseSpline,
            order,
            objective: w.iter().map(|v| v.abs()).sum(),
            knots,
            weights: w,
            null_coeffs: b,
            residual: 0.0,
            lower_bound: None,
            iterations,
        };
        sol.residual = residual_of(&sol, op, data);
        Ok(sol)
    };
    let unmerged = build(&atoms)?;
    let merged_atoms = merge_close(&atoms, 2.0 * knot_grid.dx());
    let mut sol = if merged_atoms.len() < atoms.len() {
        let merged = build(&merged_atoms)?;
        if merged.residual <= RESIDUAL_TOL * scale {
            merged
        } else {
            unmerged
        }
    } else {
        unmerged
    };
    if sol.residual > RESIDUAL_TOL * scale {
        return Err(Error::Internal(format!("interpolation residual {:e} after l1 solve", sol.residual)));
    }
    sol.lower_bound = dual.map(|lambda| certified_lower_bound(op, &xs, &z, &zy, &lambda, &cands));
    Ok(sol)
}

/// Groups same-signed neighbours closer than `gap`; each group becomes one
/// knot at the |weight|-weighted mean position carrying the summed weight.
fn merge_close(atoms: &[Atom], gap: f64) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    let mut last: Option<f64> = None;
    for a in atoms {
        let join = match (out.last(), last) {
            (Some(prev), Some(lc)) => a.center - lc < gap && prev.weight.signum() == a.weight.signum(),
            _ => false,
        };
        if join {
            let g = out.last_mut().unwrap();
            let w = mass.last_mut().unwrap();
            g.center = (g.center * *w + a.center * a.weight.abs()) / (*w + a.weight.abs());
            *w += a.weight.abs();
            g.weight += a.weight;
        } else {
            out.push(*a);
            mass.push(a.weight.abs());
        }
        last = Some(a.center);
    }
    merge_atoms(&out)
}

/// Dual objective `(Z y)^T lambda`, rescaled so that the dual constraint
/// `|sum_i lambda_i (Z rho(. - tau))_i| <= 1` holds for every real `tau`,
/// not just the candidates. Between data sites the constraint function is a
/// polynomial of degree `m - 1`; it is scanned densely there.
fn certified_lower_bound(
    op: &OperatorDescriptor,
    xs: &[f64],
    z: &[Vec<f64>],
    zy: &[f64],
    lambda: &[f64],
    cands: &[f64],
) -> f64 {
    let value: f64 = zy.iter().zip(lambda).map(|(a, b)| a * b).sum();
    // c = Z^T lambda
    let c: Vec<f64> = (0..xs.len()).map(|j| z.iter().zip(lambda).map(|(row, l)| row[j] * l).sum()).collect();
    let eta = |t: f64| -> f64 { xs.iter().zip(&c).map(|(&x, &cj)| cj * green_kernel(op.order(), x - t)).sum() };
    let mut sup = 0.0f64;
    let probes = cands.iter().copied().chain(xs.windows(2).flat_map(|w| {
        let (a, b) = (w[0], w[1]);
        (0..=64).map(move |i| a + (b - a) * i as f64 / 64.0)
    }));
    for t in probes {
        sup = sup.max(eta(t).abs());
        // One-sided limits at the sites matter for m = 1 where eta jumps.
        sup = sup.max(eta(t + 1e-12 * (1.0 + t.abs())).abs()).max(eta(t - 1e-12 * (1.0 + t.abs())).abs());
    }
    value / sup.max(1.0)
}

/// Quadratic form `a^T H a` with `H_ij = kernel_h(x_i, x_j)`, for a nonzero
/// `a` annihilating the null-space basis at `points`.
pub fn constrained_form(op: &OperatorDescriptor, points: &[f64], a: &[f64]) -> Result<f64> {
    if points.len() != a.len() {
        return Err(Error::LengthMismatch(points.len(), a.len()));
    }
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("coefficient vector must be nonzero".into()));
    }
    let p = null_matrix(op, points);
    let side = (p.transpose() * DVector::from_column_slice(a)).amax();
    let scale = points.iter().fold(1.0f64, |m, x| m.max(x.abs())).powi(op.null_dim() as i32);
    if side > 1e-10 * norm * scale {
        return Err(Error::OutsideNullSpace(side));
    }
    let mut s = 0.0;
    for (i, &xi) in points.iter().enumerate() {
        for (j, &xj) in points.iter().enumerate() {
            s += a[i] * a[j] * kernel_h(op, xi, xj);
        }
    }
    Ok(s)
}

/// Result of the conditional positivity probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdReport {
    pub points: Vec<f64>,
    pub trials: u32,
    pub min_value: f64,
    pub max_value: f64,
    pub symmetric: bool,
    pub pass: bool,
}

/// Samples unit vectors orthogonal to the null-space values at `points` and
/// records the extremes of the kernel quadratic form.
pub fn conditional_pd_check(op: &OperatorDescriptor, points: &[f64], trials: u32, seed: u64) -> Result<PdReport> {
    let n0 = op.null_dim();
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if points.len() < n0 + 1 || sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("need at least {} distinct points", n0 + 1)));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let k = points.len();
    let p = null_matrix(op, points);
    // Orthonormal basis of the orthogonal complement of range(P).
    let qr = p.clone().qr();
    let mut full = DMatrix::<f64>::identity(k, k);
    qr.q_tr_mul(&mut full);
    let q = full.transpose();
    let comp = q.columns(n0, k - n0).into_owned();
    let h = DMatrix::from_fn(k, k, |i, j| kernel_h(op, points[i], points[j]));
    let symmetric = (0..k).all(|i| (0..k).all(|j| h[(i, j)] == h[(j, i)]));
    let mut min_value = f64::INFINITY;
    let mut max_value = f64::NEG_INFINITY;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let c = DVector::from_iterator(k - n0, (0..k - n0).map(|_| rng.random_range(-1.0..1.0)));
        let a = &comp * c;
        let a = &a / a.norm();
        let v = (a.transpose() * &h * &a)[(0, 0)];
        min_value = min_value.min(v);
        max_value = max_value.max(v);
    }
    Ok(PdReport { points: points.to_vec(), trials, min_value, max_value, symmetric, pass: symmetric && min_value > 0.0 })
}
