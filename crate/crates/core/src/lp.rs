//! Dense two-phase simplex for small equality-form linear programs.
//!
//! Solves `min c^T z  s.t.  A z = b, z >= 0`. Entering columns are priced by
//! most negative reduced cost with a two-pass (Harris) ratio test that favours
//! large pivots; after a run of degenerate pivots the rule falls back to
//! Bland's until progress resumes. Every choice is deterministic, so the
//! returned vertex is a pure function of the input.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Pivots between rebuilds of the tableau from the original data.
const REFACTOR_EVERY: usize = 32;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

/// Optimal vertex of a linear program.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Equality multipliers: `c - A^T y >= 0` up to tolerance, `b^T y = objective`.
    pub dual: Vec<f64>,
    /// Indices of the basic columns (values `>= A.ncols()` are artificial).
    pub basis: Vec<usize>,
    pub iterations: usize,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // (rows + 1) x (cols + 1); last row is the reduced-cost row, last column the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    // Constraint rows [A | I | b] as first built, for refactoring.
    orig: Vec<f64>,
    // Costs of the current phase, one per column.
    cost: Vec<f64>,
    since_refactor: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.t[pr * w + c] /= p;
        }
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f != 0.0 {
                for c in 0..w {
                    self.t[r * w + c] -= f * self.t[pr * w + c];
                }
            }
        }
        self.basis[pr] = pc;
        self.since_refactor += 1;
    }

    /// Recomputes the tableau as `B^-1 [A | I | b]` and the reduced costs from
    /// the current basis, discarding accumulated elimination error. Returns
    /// false (leaving the tableau untouched) if the basis matrix is singular.
    fn refactor(&mut self) -> bool {
        let w = self.cols + 1;
        let rows = self.rows;
        let b = DMatrix::from_fn(rows, rows, |r, k| self.orig[r * w + self.basis[k]]);
        let rhs = DMatrix::from_fn(rows, w, |r, c| self.orig[r * w + c]);
        let Some(x) = b.lu().solve(&rhs) else { return false };
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for r in 0..rows {
            for c in 0..w {
                self.t[r * w + c] = x[(r, c)];
            }
        }
        for c in 0..w {
            let own = if c < self.cols { self.cost[c] } else { 0.0 };
            let basic: f64 = (0..rows).map(|r| self.cost[self.basis[r]] * x[(r, c)]).sum();
            self.t[rows * w + c] = own - basic;
        }
        self.since_refactor = 0;
        true
    }

    /// Lowest ratio, ties to the lowest basic index (Bland).
    fn ratio_row_bland(&self, pc: usize, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > tol {
                let ratio = self.at(r, self.cols) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bv)) => {
                        let slack = tol * (1.0 + bv.abs());
                        let tie = (ratio - bv).abs() <= slack;
                        if ratio < bv - slack || (tie && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, bv))
                        }
                    }
                };
            }
        }
        best.map(|b| b.0)
    }

    /// Harris ratio test: among rows whose ratio is within the feasibility
    /// tolerance of the minimum, take the largest pivot element.
    fn ratio_row_harris(&self, pc: usize, tol: f64) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > tol {
                bound = bound.min((self.at(r, self.cols).max(0.0) + tol) / a);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > tol && self.at(r, self.cols).max(0.0) / a <= bound {
                let better = match best {
                    None => true,
                    Some((br, ba)) => a > ba || (a == ba && self.basis[r] < self.basis[br]),
                };
                if better {
                    best = Some((r, a));
                }
            }
        }
        best.map(|b| b.0)
    }

    /// Runs simplex iterations over the first `allowed` columns, counting
    /// pivots in `used`. Columns whose negative reduced cost is only rounding
    /// noise and that admit no pivot are skipped.
    fn optimize(&mut self, allowed: usize, tol: f64, cost_tol: f64, cap: usize, used: &mut usize) -> Result<()> {
        let mut degenerate = 0;
        loop {
            if *used >= cap {
                return Err(Error::NonConvergence(cap));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate >= DEGENERATE_LIMIT;
            let mut step = None;
            let mut best = -cost_tol;
            let mut unbounded = false;
            for pc in 0..allowed {
                let d = self.at(self.rows, pc);
                if !(d < best) {
                    continue;
                }
                let row = if bland { self.ratio_row_bland(pc, tol) } else { self.ratio_row_harris(pc, tol) };
                match row {
                    Some(pr) => {
                        step = Some((pr, pc));
                        if bland {
                            break;
                        }
                        best = d;
                    }
                    None if d < -1e3 * cost_tol => {
                        unbounded = true;
                        break;
                    }
                    None => {}
                }
            }
            if unbounded {
                // Rounding can fake an unbounded ray; only trust a fresh tableau.
                if self.since_refactor > 0 && self.refactor() {
                    continue;
                }
                return Err(Error::Internal("linear program is unbounded".into()));
            }
            let Some((pr, pc)) = step else { return Ok(()) };
            let theta = self.at(pr, self.cols) / self.at(pr, pc);
            degenerate = if theta.abs() <= tol { degenerate + 1 } else { 0 };
            self.pivot(pr, pc);
            *used += 1;
        }
    }
}

/// Solves `min c^T z` subject to `a z = b`, `z >= 0`. `a` is row-major with
/// `b.len()` rows and `c.len()` columns.
pub fn simplex(a: &[Vec<f64>], b: &[f64], c: &[f64], max_iter: usize) -> Result<LpSolution> {
    let rows = b.len();
    let n = c.len();
    if a.len() != rows {
        return Err(Error::LengthMismatch(a.len(), rows));
    }
    if let Some(r) = a.iter().find(|r| r.len() != n) {
        return Err(Error::LengthMismatch(r.len(), n));
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .chain(b.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let tol = 1e-11 * scale;

    // Columns: n structural, rows artificial.
    let cols = n + rows;
    let w = cols + 1;
    let mut t = vec![0.0; (rows + 1) * w];
    let mut flip = vec![1.0; rows];
    for r in 0..rows {
        if b[r] < 0.0 {
            flip[r] = -1.0;
        }
        for j in 0..n {
            t[r * w + j] = flip[r] * a[r][j];
        }
        t[r * w + n + r] = 1.0;
        t[r * w + cols] = flip[r] * b[r];
    }
    // Phase-one costs: sum of artificials, expressed in reduced form.
    for r in 0..rows {
        for j in 0..n {
            t[rows * w + j] -= t[r * w + j];
        }
        t[rows * w + cols] -= t[r * w + cols];
    }
    let orig: Vec<f64> = t[..rows * w].to_vec();
    let cost = (0..cols).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    let mut tab = Tableau { rows, cols, t, basis: (n..n + rows).collect(), orig, cost, since_refactor: 0 };
    let mut used = 0;
    let phase_one_tol = 1e-11 * b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    tab.optimize(n, tol, phase_one_tol, max_iter, &mut used)?;
    if tab.since_refactor > 0 && tab.refactor() {
        tab.optimize(n, tol, phase_one_tol, max_iter, &mut used)?;
    }
    let infeasibility = -tab.at(rows, cols);
    if infeasibility > 1e-9 * scale {
        return Err(Error::Internal(format!("linear program infeasible (phase-one value {infeasibility:e})")));
    }
    // Drive artificials out of the basis where a structural pivot exists.
    for r in 0..rows {
        if tab.basis[r] >= n {
            if let Some(pc) = (0..n).find(|&c| tab.at(r, c).abs() > tol) {
                tab.pivot(r, pc);
                used += 1;
            }
        }
    }

    // Phase two: rebuild the cost row from the real objective.
    tab.cost = (0..cols).map(|j| if j < n { c[j] } else { 0.0 }).collect();
    for j in 0..=cols {
        tab.t[rows * w + j] = 0.0;
    }
    for j in 0..n {
        tab.t[rows * w + j] = c[j];
    }
    for r in 0..rows {
        let bj = tab.basis[r];
        let cb = if bj < n { c[bj] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=cols {
                tab.t[rows * w + j] -= cb * tab.t[r * w + j];
            }
        }
    }
    let cost_tol = 1e-11 * c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    tab.optimize(n, tol, cost_tol, max_iter, &mut used)?;
    if tab.since_refactor > 0 && tab.refactor() {
        // The clean tableau may expose a residual improving column.
        tab.optimize(n, tol, cost_tol, max_iter, &mut used)?;
    }

    let mut x = vec![0.0; n];
    for r in 0..rows {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.at(r, cols);
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    // Reduced cost of artificial column r is 0 - y_r (in flipped rows).
    let dual = (0..rows).map(|r| -tab.at(rows, n + r) * flip[r]).collect();
    Ok(LpSolution { x, objective, dual, basis: tab.basis, iterations: used })
}
