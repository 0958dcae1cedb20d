//! Derivative operators `L = D^m`, their Green's functions and inverses.

use serde::{Deserialize, Serialize};

use crate::gridfn::{
    factorial, fd_derivative, fd_samples, fd_weights, green_kernel, growth_exponent, poly_eval,
    sup_distance, weighted_l1_norm, Form, Grid, GridFunction, WeightSpec,
};
use crate::{Error, Result};

/// Largest supported derivative order.
pub const MAX_ORDER: u32 = 4;

/// A spline-admissible operator `D^m` with growth order `m - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDescriptor {
    m: u32,
    alpha: f64,
    /// Ascending coefficients of each null-space basis polynomial.
    null_basis: Vec<Vec<f64>>,
}

/// Green's function `x -> sign(x) x^(m-1) / (2 (m-1)!)` of `D^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenFunction {
    pub m: u32,
}

impl GreenFunction {
    pub fn eval(&self, x: f64) -> f64 {
        green_kernel(self.m, x)
    }
}

/// `D^m` with monomial null basis `1, x, ..., x^(m-1)`.
pub fn make_derivative_operator(m: u32) -> Result<OperatorDescriptor> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::UnsupportedOrder(m));
    }
    let null_basis = (0..m as usize)
        .map(|k| {
            let mut c = vec![0.0; k + 1];
            c[k] = 1.0;
            c
        })
        .collect();
    Ok(OperatorDescriptor {
        m,
        alpha: (m - 1) as f64,
        null_basis,
    })
}

impl OperatorDescriptor {
    /// Descriptor with a caller-chosen null basis. Nothing is verified here;
    /// [`admissibility_check`] reports whether the basis is annihilated.
    pub fn with_null_basis(m: u32, null_basis: Vec<Vec<f64>>) -> Result<Self> {
        if m == 0 || m > MAX_ORDER {
            return Err(Error::UnsupportedOrder(m));
        }
        if null_basis.len() != m as usize {
            return Err(Error::LengthMismatch(null_basis.len(), m as usize));
        }
        Ok(Self {
            m,
            alpha: (m - 1) as f64,
            null_basis,
        })
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    /// Null-space dimension `N0`.
    pub fn null_dim(&self) -> usize {
        self.null_basis.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn null_basis(&self) -> &[Vec<f64>] {
        &self.null_basis
    }

    /// Null basis sampled on `grid`, with polynomial forms attached.
    pub fn null_basis_functions(&self, grid: Grid) -> Vec<GridFunction> {
        self.null_basis
            .iter()
            .map(|c| GridFunction::polynomial(grid, c.clone()))
            .collect()
    }

    /// `p_n(x)` for `n = 0..N0`.
    pub fn null_basis_at(&self, x: f64) -> Vec<f64> {
        self.null_basis.iter().map(|c| poly_eval(c, x)).collect()
    }

    pub fn green_function(&self) -> GreenFunction {
        GreenFunction { m: self.m }
    }

    pub fn green(&self, x: f64) -> f64 {
        green_kernel(self.m, x)
    }

    fn adjoint_sign(&self) -> f64 {
        if self.m.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

/// `green_kernel(op.m, x)`.
pub fn green(op: &OperatorDescriptor, x: f64) -> f64 {
    op.green(x)
}

/// `D^m f`.
pub fn apply(op: &OperatorDescriptor, f: &GridFunction) -> Result<GridFunction> {
    fd_derivative(f, op.m)
}

/// `L* g = (-1)^m D^m g`.
pub fn apply_adjoint(op: &OperatorDescriptor, g: &GridFunction) -> Result<GridFunction> {
    Ok(apply(op, g)?.scale(op.adjoint_sign()))
}

fn primitive(form: &Form) -> Form {
    match form {
        Form::Polynomial(c) => {
            let mut out = vec![0.0];
            out.extend(c.iter().enumerate().map(|(k, v)| v / (k + 1) as f64));
            Form::Polynomial(out)
        }
        Form::GreenAtom {
            order,
            center,
            weight,
        } => Form::GreenAtom {
            order: order + 1,
            center: *center,
            weight: *weight,
        },
        Form::DeltaAtom {
            center,
            weight,
            derivative,
        } => {
            if *derivative == 0 {
                Form::GreenAtom {
                    order: 1,
                    center: *center,
                    weight: *weight,
                }
            } else {
                Form::DeltaAtom {
                    center: *center,
                    weight: *weight,
                    derivative: derivative - 1,
                }
            }
        }
        Form::Sum(parts) => Form::Sum(parts.iter().map(primitive).collect()),
    }
}

/// Primitive of a closed form that vanishes at 0.
fn primitive_from_zero(form: &Form) -> Form {
    let p = primitive(form);
    let at_zero = p.value(0.0);
    Form::Sum(vec![p, Form::Polynomial(vec![-at_zero])]).simplify()
}

/// Cumulative trapezoid rule from the left end with the leading
/// Euler-Maclaurin end correction, so the result is fourth-order accurate.
fn cumulative_integral(grid: &Grid, g: &[f64]) -> Result<Vec<f64>> {
    let h = grid.dx();
    let dg = fd_samples(grid, g, 1)?;
    let mut out = vec![0.0; g.len()];
    let mut acc = 0.0;
    for i in 1..g.len() {
        acc += 0.5 * h * (g[i - 1] + g[i]);
        out[i] = acc - h * h / 12.0 * (dg[i] - dg[0]);
    }
    Ok(out)
}

/// `(D^-1_delta)^iterations f` where `D^-1_delta f(x) = int_0^x f(y) dy`.
///
/// Closed forms are integrated analytically; sampled inputs use a corrected
/// cumulative trapezoid rule.
pub fn anti_derivative_delta(f: &GridFunction, iterations: u32) -> Result<GridFunction> {
    let grid = *f.grid();
    if !grid.contains(0.0) {
        return Err(Error::InvalidArgument(
            "anti-derivative anchored at 0 needs 0 inside the grid".into(),
        ));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be positive".into()));
    }
    let mut cur = f.clone();
    for _ in 0..iterations {
        cur = match cur.form() {
            Some(form) => GridFunction::from_form(grid, primitive_from_zero(form)),
            None => {
                let mut s = cumulative_integral(&grid, cur.samples())?;
                let base = GridFunction::from_samples(grid, s.clone())?.value_at(0.0)?;
                s.iter_mut().for_each(|v| *v -= base);
                let regular = GridFunction::from_samples(grid, s)?;
                if cur.atoms().is_empty() {
                    regular
                } else {
                    let atoms = Form::Sum(
                        cur.atoms()
                            .iter()
                            .map(|a| Form::DeltaAtom {
                                center: a.center,
                                weight: a.weight,
                                derivative: a.derivative,
                            })
                            .collect(),
                    );
                    regular.add(&GridFunction::from_form(grid, primitive_from_zero(&atoms)))?
                }
            }
        };
    }
    Ok(cur)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Trapezoid quadrature of `sum_j w_j h rho_m(x_i - x_j)` at every node, with
/// `rho_m(0) = 0`. Equal to the direct double loop but evaluated in
/// `O(n m)` through prefix sums of the binomially expanded kernel.
pub(crate) fn green_quadrature(grid: &Grid, m: u32, w: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let p = (m - 1) as usize;
    let h = grid.dx();
    let xs = grid.nodes();
    let tw = |j: usize| if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
    // right[k][i] = sum_{j > i} tw_j x_j^k w_j
    let mut right = vec![vec![0.0; n]; p + 1];
    let mut acc = vec![0.0; p + 1];
    for i in (0..n).rev() {
        for k in 0..=p {
            right[k][i] = acc[k];
            acc[k] += tw(i) * xs[i].powi(k as i32) * w[i];
        }
    }
    let coef: Vec<f64> = (0..=p)
        .map(|k| binomial(p, k) * if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let scale = 0.5 * h / factorial(m - 1);
    let mut left = vec![0.0; p + 1];
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for k in 0..=p {
            s += coef[k] * xs[i].powi((p - k) as i32) * (left[k] - right[k][i]);
        }
        out[i] = scale * s;
        for k in 0..=p {
            left[k] += tw(i) * xs[i].powi(k as i32) * w[i];
        }
    }
    out
}

/// `rho_m * w` for sampled `w`: [`green_quadrature`] plus Euler-Maclaurin
/// corrections at the kernel break and the grid ends.
pub(crate) fn green_convolution(grid: &Grid, m: u32, w: &[f64]) -> Result<Vec<f64>> {
    let n = grid.len();
    let h = grid.dx();
    let mut out = green_quadrature(grid, m, w);
    let dw = fd_samples(grid, w, 1)?;
    let p = (m - 1) as i32;
    let rho = |u: f64| 0.5 * u.powi(p) / factorial(m - 1);
    let drho = |u: f64| {
        if m == 1 {
            0.0
        } else {
            0.5 * u.powi(p - 1) / factorial(m - 2)
        }
    };
    let c = h * h / 12.0;
    let (x0, x1) = (grid.x(0), grid.x(n - 1));
    for (i, o) in out.iter_mut().enumerate() {
        let xi = grid.x(i);
        let gr_end = drho(xi - x1) * w[n - 1] - rho(xi - x1) * dw[n - 1];
        let gl_start = -drho(xi - x0) * w[0] + rho(xi - x0) * dw[0];
        *o -= c * (gr_end - gl_start);
        match m {
            1 => *o -= c * dw[i],
            2 => *o += c * w[i],
            _ => {}
        }
    }
    if m == 1 {
        out[0] -= 0.25 * h * w[0];
        out[n - 1] += 0.25 * h * w[n - 1];
    }
    Ok(out)
}

fn inverse_with_sign(op: &OperatorDescriptor, w: &GridFunction, sign: f64) -> Result<GridFunction> {
    let grid = *w.grid();
    let atom_form = |atoms: &[crate::gridfn::Atom]| {
        Form::Sum(
            atoms
                .iter()
                .map(|a| {
                    Form::GreenAtom {
                        order: op.m,
                        center: a.center,
                        weight: sign * a.weight,
                    }
                    .derivative(a.derivative)
                })
                .collect(),
        )
    };
    if let Some(form) = w.form() {
        let only_atoms = match form {
            Form::DeltaAtom { .. } => true,
            Form::Sum(parts) => parts.iter().all(|p| matches!(p, Form::DeltaAtom { .. })),
            Form::Polynomial(c) => c.is_empty(),
            Form::GreenAtom { .. } => false,
        };
        if only_atoms {
            return Ok(GridFunction::from_form(grid, atom_form(w.atoms())));
        }
    }
    if w.samples().iter().any(|v| !v.is_finite()) {
        return Err(Error::UnsupportedForm("non-finite samples".into()));
    }
    let mut conv = green_convolution(&grid, op.m, w.samples())?;
    if sign != 1.0 {
        conv.iter_mut().for_each(|v| *v *= sign);
    }
    let regular = GridFunction::from_samples(grid, conv)?;
    if w.atoms().is_empty() {
        Ok(regular)
    } else {
        regular.add(&GridFunction::from_form(grid, atom_form(w.atoms())).without_form())
    }
}

/// `L^-1 w = rho_m * w`.
///
/// Dirac atoms map to Green's-function atoms exactly; sampled parts are
/// convolved by quadrature.
pub fn canonical_inverse(op: &OperatorDescriptor, w: &GridFunction) -> Result<GridFunction> {
    inverse_with_sign(op, w, 1.0)
}

/// `L^-1* g = (-1)^m rho_m * g`, the adjoint of [`canonical_inverse`].
pub fn canonical_inverse_adjoint(op: &OperatorDescriptor, g: &GridFunction) -> Result<GridFunction> {
    inverse_with_sign(op, g, op.adjoint_sign())
}

/// Measured quantities of [`admissibility_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Largest interior sup-norm of `L p_n`.
    pub null_residual: f64,
    /// Largest interior sup-norm of `L^-1 L phi - phi` over the bank.
    pub left_inverse_residual: f64,
    /// Largest interior sup-norm of `L^-1* L* phi - phi` over the bank.
    pub adjoint_inverse_residual: f64,
    /// Growth exponent of the Green's function sampled on the grid.
    pub green_growth: f64,
    /// Growth exponent of each null-space basis function.
    pub null_growth: Vec<f64>,
    pub alpha: f64,
    /// Worst ratio `||L* phi||_{1,-alpha} / max_k sup (1+|x|)^(alpha+2) |D^k phi|`
    /// over the bank; a boundedness spot check, not a continuity proof.
    pub continuity_ratio: f64,
    pub null_tol: f64,
    pub inverse_tol: f64,
    pub failures: Vec<String>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Default tolerance for `L p_n = 0`.
pub const NULL_TOL: f64 = 1e-8;
/// Default tolerance for the inverse identities on a smooth bank.
pub const INVERSE_TOL: f64 = 1e-6;

/// Rounding floor of `L^-1 L phi - phi` for unit-size `phi`.
///
/// Sample rounding `eps` is amplified by the `D^m` stencil (`sum |w| ~ h^-m`),
/// and the Green's function spreads that noise with weight `|x|^(m-1)`. The
/// floor only matters for `m >= 3` on fine grids.
pub fn roundoff_floor(op: &OperatorDescriptor, grid: &Grid) -> f64 {
    let r = (op.m as usize).div_ceil(2) + 1;
    let offsets: Vec<f64> = (0..=2 * r).map(|j| j as f64 - r as f64).collect();
    let stencil: f64 = fd_weights(0.0, &offsets, op.m as usize)
        .iter()
        .map(|w| w.abs())
        .sum::<f64>()
        / grid.dx().powi(op.m as i32);
    let reach = grid.x_min().abs().max(grid.x_max().abs());
    let spread = grid.dx() * (grid.len() as f64).sqrt() * green_kernel(op.m, reach).abs();
    10.0 * f64::EPSILON * stencil * spread
}

/// Node margin excluded from identity checks.
pub fn boundary_margin(op: &OperatorDescriptor) -> usize {
    5 * op.m as usize
}

/// Spot-checks admissibility of `op` on the given bank of smooth test functions.
pub fn admissibility_check(
    op: &OperatorDescriptor,
    bank: &[GridFunction],
) -> Result<AdmissibilityReport> {
    let first = bank
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty test bank".into()))?;
    let grid = *first.grid();
    let range = grid.interior(boundary_margin(op));
    let mut failures = Vec::new();

    let mut null_residual: f64 = 0.0;
    let mut null_growth = Vec::new();
    for p in op.null_basis_functions(grid) {
        let lp = apply(op, &p)?;
        let zero = vec![0.0; grid.len()];
        null_residual = null_residual.max(sup_distance(lp.samples(), &zero, range.clone()));
        null_growth.push(growth_exponent(&p));
    }
    if null_residual > NULL_TOL {
        failures.push(format!(
            "null basis not annihilated: {null_residual:e} > {NULL_TOL:e}"
        ));
    }

    let inverse_tol = INVERSE_TOL.max(roundoff_floor(op, &grid));
    let mut left: f64 = 0.0;
    let mut adjoint: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    let weight = WeightSpec::new(op.alpha)?;
    for phi in bank {
        if phi.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        let lf = apply(op, phi)?;
        let back = canonical_inverse(op, &lf)?;
        left = left.max(sup_distance(back.samples(), phi.samples(), range.clone()));
        let la = apply_adjoint(op, phi)?;
        let back = canonical_inverse_adjoint(op, &la)?;
        adjoint = adjoint.max(sup_distance(back.samples(), phi.samples(), range.clone()));

        let mut seminorm: f64 = 0.0;
        for k in 0..=op.m {
            let d = fd_derivative(phi, k)?;
            for (i, v) in d.samples().iter().enumerate() {
                seminorm = seminorm.max((1.0 + grid.x(i).abs()).powf(op.alpha + 2.0) * v.abs());
            }
        }
        if seminorm > 0.0 {
            ratio = ratio.max(weighted_l1_norm(&la, weight) / seminorm);
        }
    }
    if left > inverse_tol {
        failures.push(format!("left inverse residual {left:e} > {inverse_tol:e}"));
    }
    if adjoint > inverse_tol {
        failures.push(format!(
            "adjoint inverse residual {adjoint:e} > {inverse_tol:e}"
        ));
    }

    let green_fn = GridFunction::green_atom(grid, op.m, 0.0, 1.0);
    let green_growth = growth_exponent(&green_fn);
    if green_growth > op.alpha + 0.1 {
        failures.push(format!(
            "Green's function grows like |x|^{green_growth:.3}, order {}",
            op.alpha
        ));
    }
    for (n, g) in null_growth.iter().enumerate() {
        if *g > op.alpha + 0.1 {
            failures.push(format!(
                "null basis function {} grows like |x|^{g:.3}, order {}",
                n + 1,
                op.alpha
            ));
        }
    }

    Ok(AdmissibilityReport {
        null_residual,
        left_inverse_residual: left,
        adjoint_inverse_residual: adjoint,
        green_growth,
        null_growth,
        alpha: op.alpha,
        continuity_ratio: ratio,
        null_tol: NULL_TOL,
        inverse_tol,
        failures,
    })
}

/// Gaussian test bank `exp(-(x-c)^2 / (2 s^2))` for a few centers and widths.
pub fn gaussian_bank(grid: Grid) -> Vec<GridFunction> {
    let mut bank = Vec::new();
    for &(c, s) in &[(0.0, 1.0), (-1.5, 0.7), (2.0, 1.3), (0.5, 0.5)] {
        bank.push(GridFunction::from_fn(grid, move |x| {
            let u = (x - c) / s;
            (-0.5 * u * u).exp()
        }));
    }
    bank
}

/// Sign used to compare symmetric Green's functions: `rho(-x) = (-1)^m rho(x)`.
pub fn green_parity(m: u32) -> f64 {
    if m.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}
