//! Functions on a truncated uniform grid.
//!
//! A [`GridFunction`] always carries its regular part as samples. When it was
//! built from a closed form ([`Form`]) the form is kept alongside so that
//! derivatives and pairings can be evaluated analytically. Dirac atoms have
//! no pointwise samples; they live in [`GridFunction::atoms`] and only take
//! part in pairings.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default half-width of the truncated real line.
pub const DEFAULT_HALF_WIDTH: f64 = 12.0;
/// Default number of grid nodes.
pub const DEFAULT_NODES: usize = 4801;

/// Uniform grid on `[x_min, x_max]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need n >= 3, got {n}")));
        }
        Ok(Self {
            x_min,
            x_max,
            n,
            dx: (x_max - x_min) / (n - 1) as f64,
        })
    }

    /// Grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.x_max - self.x_min)
    }

    /// Node `i`. Mirrored nodes of a symmetric grid are exact negatives.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        let last = (self.n - 1) as f64;
        (self.x_min * (last - i as f64) + self.x_max * i as f64) / last
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index of the node equal to `x` (up to a tiny fraction of `dx`).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let k = ((x - self.x_min) / self.dx).round() as usize;
        let k = k.min(self.n - 1);
        ((self.x(k) - x).abs() <= 1e-9 * self.dx).then_some(k)
    }

    /// Node indices that stay `margin` nodes away from both ends.
    pub fn interior(&self, margin: usize) -> std::ops::Range<usize> {
        if 2 * margin >= self.n {
            return 0..0;
        }
        margin..self.n - margin
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::symmetric(DEFAULT_HALF_WIDTH, DEFAULT_NODES).expect("default grid is valid")
    }
}

/// Algebraic weight exponent for `(1 + |x|)^(-alpha)` / `(1 + |x|)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub alpha: f64,
}

impl WeightSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("weight exponent {alpha}")));
        }
        Ok(Self { alpha })
    }
}

/// `sign(x)` with `sign(0) = 0`.
#[inline]
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Canonical Green's function of `D^order`: `sign(u) u^(order-1) / (2 (order-1)!)`.
pub fn green_kernel(order: u32, u: f64) -> f64 {
    debug_assert!(order >= 1);
    0.5 * sign0(u) * u.powi(order as i32 - 1) / factorial(order - 1)
}

/// Dirac atom `weight * delta^(derivative)(x - center)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub center: f64,
    pub weight: f64,
    pub derivative: u32,
}

/// Closed-form description of a function or distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Form {
    /// Coefficients in ascending powers of `x`.
    Polynomial(Vec<f64>),
    /// `weight * green_kernel(order, x - center)`.
    GreenAtom { order: u32, center: f64, weight: f64 },
    /// `weight * delta^(derivative)(x - center)`; quadrature-only.
    DeltaAtom {
        center: f64,
        weight: f64,
        derivative: u32,
    },
    Sum(Vec<Form>),
}

pub(crate) fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub(crate) fn poly_derivative(coeffs: &[f64], k: u32) -> Vec<f64> {
    let k = k as usize;
    if coeffs.len() <= k {
        return Vec::new();
    }
    (k..coeffs.len())
        .map(|j| {
            let falling: f64 = ((j - k + 1)..=j).map(|t| t as f64).product();
            coeffs[j] * falling
        })
        .collect()
}

fn poly_add(acc: &mut Vec<f64>, other: &[f64], scale: f64) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += scale * b;
    }
}

impl Form {
    pub fn zero() -> Self {
        Form::Polynomial(Vec::new())
    }

    /// Value of the regular part at `x`; Dirac atoms contribute nothing.
    pub fn value(&self, x: f64) -> f64 {
        self.derivative_value(x, 0)
    }

    /// Value of the regular part of the `k`-th derivative at `x`.
    pub fn derivative_value(&self, x: f64, k: u32) -> f64 {
        match self {
            Form::Polynomial(c) => poly_eval(&poly_derivative(c, k), x),
            Form::GreenAtom {
                order,
                center,
                weight,
            } => {
                if k < *order {
                    weight * green_kernel(order - k, x - center)
                } else {
                    0.0
                }
            }
            Form::DeltaAtom { .. } => 0.0,
            Form::Sum(parts) => parts.iter().map(|p| p.derivative_value(x, k)).sum(),
        }
    }

    /// Distributional derivative of order `k`.
    pub fn derivative(&self, k: u32) -> Form {
        if k == 0 {
            return self.clone();
        }
        match self {
            Form::Polynomial(c) => Form::Polynomial(poly_derivative(c, k)),
            Form::GreenAtom {
                order,
                center,
                weight,
            } => {
                if k < *order {
                    Form::GreenAtom {
                        order: order - k,
                        center: *center,
                        weight: *weight,
                    }
                } else {
                    Form::DeltaAtom {
                        center: *center,
                        weight: *weight,
                        derivative: k - order,
                    }
                }
            }
            Form::DeltaAtom {
                center,
                weight,
                derivative,
            } => Form::DeltaAtom {
                center: *center,
                weight: *weight,
                derivative: derivative + k,
            },
            Form::Sum(parts) => Form::Sum(parts.iter().map(|p| p.derivative(k)).collect()),
        }
        .simplify()
    }

    pub fn scaled(&self, s: f64) -> Form {
        match self {
            Form::Polynomial(c) => Form::Polynomial(c.iter().map(|v| v * s).collect()),
            Form::GreenAtom {
                order,
                center,
                weight,
            } => Form::GreenAtom {
                order: *order,
                center: *center,
                weight: weight * s,
            },
            Form::DeltaAtom {
                center,
                weight,
                derivative,
            } => Form::DeltaAtom {
                center: *center,
                weight: weight * s,
                derivative: *derivative,
            },
            Form::Sum(parts) => Form::Sum(parts.iter().map(|p| p.scaled(s)).collect()),
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Atom>) {
        match self {
            Form::DeltaAtom {
                center,
                weight,
                derivative,
            } => out.push(Atom {
                center: *center,
                weight: *weight,
                derivative: *derivative,
            }),
            Form::Sum(parts) => parts.iter().for_each(|p| p.collect_atoms(out)),
            _ => {}
        }
    }

    pub fn has_atoms(&self) -> bool {
        match self {
            Form::DeltaAtom { .. } => true,
            Form::Sum(parts) => parts.iter().any(Form::has_atoms),
            _ => false,
        }
    }

    fn flatten_into(self, out: &mut Vec<Form>) {
        match self {
            Form::Sum(parts) => parts.into_iter().for_each(|p| p.flatten_into(out)),
            other => out.push(other),
        }
    }

    /// Flattens nested sums, merges polynomials and drops zero terms.
    pub fn simplify(self) -> Form {
        let mut leaves = Vec::new();
        self.flatten_into(&mut leaves);
        let mut poly: Vec<f64> = Vec::new();
        let mut rest = Vec::new();
        for leaf in leaves {
            match leaf {
                Form::Polynomial(c) => poly_add(&mut poly, &c, 1.0),
                Form::GreenAtom { weight, .. } | Form::DeltaAtom { weight, .. }
                    if weight == 0.0 => {}
                other => rest.push(other),
            }
        }
        while poly.last() == Some(&0.0) {
            poly.pop();
        }
        if !poly.is_empty() {
            rest.push(Form::Polynomial(poly));
        }
        match rest.len() {
            0 => Form::zero(),
            1 => rest.pop().unwrap(),
            _ => Form::Sum(rest),
        }
    }

    /// Polynomial coefficients when the form is a pure polynomial.
    pub fn as_polynomial(&self) -> Option<&[f64]> {
        match self {
            Form::Polynomial(c) => Some(c),
            _ => None,
        }
    }
}

/// A real function (or finite sum of Dirac atoms plus a function) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<f64>,
    atoms: Vec<Atom>,
    form: Option<Form>,
}

impl GridFunction {
    pub fn from_samples(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::SampleLength {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        Ok(Self {
            grid,
            samples,
            atoms: Vec::new(),
            form: None,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        Self {
            samples: grid.sample(f),
            grid,
            atoms: Vec::new(),
            form: None,
        }
    }

    pub fn from_form(grid: Grid, form: Form) -> Self {
        let form = form.simplify();
        Self {
            samples: grid.sample(|x| form.value(x)),
            atoms: form.atoms(),
            form: Some(form),
            grid,
        }
    }

    pub fn zero(grid: Grid) -> Self {
        Self::from_form(grid, Form::zero())
    }

    pub fn polynomial(grid: Grid, coeffs: Vec<f64>) -> Self {
        Self::from_form(grid, Form::Polynomial(coeffs))
    }

    pub fn monomial(grid: Grid, degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = 1.0;
        Self::polynomial(grid, c)
    }

    pub fn green_atom(grid: Grid, order: u32, center: f64, weight: f64) -> Self {
        Self::from_form(
            grid,
            Form::GreenAtom {
                order,
                center,
                weight,
            },
        )
    }

    pub fn delta(grid: Grid, center: f64, weight: f64, derivative: u32) -> Self {
        Self::from_form(
            grid,
            Form::DeltaAtom {
                center,
                weight,
                derivative,
            },
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Samples of the regular part.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn form(&self) -> Option<&Form> {
        self.form.as_ref()
    }

    /// True when the function carries Dirac atoms (quadrature-only on the dual side).
    pub fn is_distribution(&self) -> bool {
        !self.atoms.is_empty()
    }

    /// Drops the closed form, keeping samples and atoms.
    pub fn without_form(mut self) -> Self {
        self.form = None;
        self
    }

    fn check_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Result<GridFunction> {
        self.check_grid(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let form = match (&self.form, &other.form) {
            (Some(f), Some(g)) => Some(Form::Sum(vec![f.scaled(a), g.scaled(b)]).simplify()),
            _ => None,
        };
        let atoms = match &form {
            Some(f) => f.atoms(),
            None => self
                .atoms
                .iter()
                .map(|t| Atom {
                    weight: a * t.weight,
                    ..*t
                })
                .chain(other.atoms.iter().map(|t| Atom {
                    weight: b * t.weight,
                    ..*t
                }))
                .filter(|t| t.weight != 0.0)
                .collect(),
        };
        Ok(GridFunction {
            grid: self.grid,
            samples,
            atoms,
            form,
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            samples: self.samples.iter().map(|v| v * s).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|t| Atom {
                    weight: t.weight * s,
                    ..*t
                })
                .filter(|t| t.weight != 0.0)
                .collect(),
            form: self.form.as_ref().map(|f| f.scaled(s).simplify()),
        }
    }

    /// Value of the regular part at an arbitrary point of the grid.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        self.derivative_at(x, 0)
    }

    /// Value of the regular part of the `k`-th derivative at `x`.
    ///
    /// Closed forms are evaluated exactly; plain samples use finite differences
    /// followed by 4-point Lagrange interpolation.
    pub fn derivative_at(&self, x: f64, k: u32) -> Result<f64> {
        if !self.grid.contains(x) {
            return Err(Error::AtomOutsideGrid(x));
        }
        if let Some(form) = &self.form {
            return Ok(form.derivative_value(x, k));
        }
        if k == 0 {
            return Ok(interpolate(&self.grid, &self.samples, x));
        }
        let d = fd_samples(&self.grid, &self.samples, k)?;
        Ok(interpolate(&self.grid, &d, x))
    }
}

fn interpolate(grid: &Grid, values: &[f64], x: f64) -> f64 {
    if let Some(i) = grid.node_index(x) {
        return values[i];
    }
    let n = grid.len();
    let cell = ((x - grid.x_min()) / grid.dx()).floor() as isize;
    let start = (cell - 1).clamp(0, n.saturating_sub(4) as isize) as usize;
    let stop = (start + 4).min(n);
    let mut acc = 0.0;
    for i in start..stop {
        let mut l = 1.0;
        for j in start..stop {
            if j != i {
                l *= (x - grid.x(j)) / (grid.x(i) - grid.x(j));
            }
        }
        acc += l * values[i];
    }
    acc
}

/// Composite trapezoid rule on the grid.
pub fn trapezoid(grid: &Grid, values: &[f64]) -> f64 {
    let n = values.len();
    let inner: f64 = values.iter().sum();
    grid.dx() * (inner - 0.5 * (values[0] + values[n - 1]))
}

fn pair_atoms_with(atoms: &[Atom], g: &GridFunction) -> Result<f64> {
    let mut acc = 0.0;
    for atom in atoms {
        if !g.grid.contains(atom.center) {
            return Err(Error::AtomOutsideGrid(atom.center));
        }
        let sign = if atom.derivative % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * atom.weight * g.derivative_at(atom.center, atom.derivative)?;
    }
    Ok(acc)
}

/// Duality product `<f, g>`.
///
/// Regular parts are paired by trapezoid quadrature. Dirac atoms of one operand
/// are paired pointwise with the other operand through
/// `<delta^(k)(. - tau), g> = (-1)^k g^(k)(tau)`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.check_grid(g)?;
    if f.is_distribution() && g.is_distribution() {
        return Err(Error::DistributionPairing);
    }
    let products: Vec<f64> = f
        .samples
        .iter()
        .zip(&g.samples)
        .map(|(a, b)| a * b)
        .collect();
    let mut acc = trapezoid(&f.grid, &products);
    acc += pair_atoms_with(&f.atoms, g)?;
    acc += pair_atoms_with(&g.atoms, f)?;
    Ok(acc)
}

/// `max_x (1 + |x|)^(-alpha) |f(x)|` over the samples of the regular part.
pub fn weighted_sup_norm(f: &GridFunction, w: WeightSpec) -> f64 {
    f.samples
        .iter()
        .enumerate()
        .map(|(i, v)| (1.0 + f.grid.x(i).abs()).powf(-w.alpha) * v.abs())
        .fold(0.0, f64::max)
}

/// Quadrature of `(1 + |x|)^alpha |f(x)|` over the regular part.
pub fn weighted_l1_norm(f: &GridFunction, w: WeightSpec) -> f64 {
    let vals: Vec<f64> = f
        .samples
        .iter()
        .enumerate()
        .map(|(i, v)| (1.0 + f.grid.x(i).abs()).powf(w.alpha) * v.abs())
        .collect();
    trapezoid(&f.grid, &vals)
}

/// Finite-difference weights for the `order`-th derivative at `z` on the
/// nodes `x` (Fornberg's recursion).
pub(crate) fn fd_weights(z: f64, x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.swap_remove(order)
}

/// Maximum supported finite-difference order.
pub const MAX_FD_ORDER: u32 = 4;

/// Finite differences of the given order, fourth-order accurate in the
/// interior, with one-sided stencils of the same width near the ends.
pub(crate) fn fd_samples(grid: &Grid, samples: &[f64], order: u32) -> Result<Vec<f64>> {
    let n = grid.len();
    if order == 0 {
        return Ok(samples.to_vec());
    }
    if order > MAX_FD_ORDER || n < 2 * order as usize + 1 {
        return Err(Error::InsufficientResolution { order, n });
    }
    let half = (order as usize).div_ceil(2) + 1;
    let width = (2 * half + 1).min(n);
    let scale = grid.dx().powi(order as i32);
    let stencil = |start: usize, i: usize| -> Vec<f64> {
        let offsets: Vec<f64> = (start..start + width)
            .map(|j| j as f64 - i as f64)
            .collect();
        fd_weights(0.0, &offsets, order as usize)
            .into_iter()
            .map(|w| w / scale)
            .collect()
    };
    let centered_start = width / 2;
    let interior = stencil(0, centered_start);
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let start = i.saturating_sub(centered_start).min(n - width);
        let boundary;
        let weights = if start + centered_start == i {
            &interior
        } else {
            boundary = stencil(start, i);
            &boundary
        };
        *o = weights
            .iter()
            .zip(&samples[start..start + width])
            .map(|(w, v)| w * v)
            .sum();
    }
    Ok(out)
}

/// Derivative of the given order.
///
/// Closed forms are differentiated analytically (a Green's atom of matching
/// order becomes a Dirac atom); plain samples use central differences.
pub fn fd_derivative(f: &GridFunction, order: u32) -> Result<GridFunction> {
    if order > MAX_FD_ORDER || f.grid.len() < 2 * order as usize + 1 {
        return Err(Error::InsufficientResolution {
            order,
            n: f.grid.len(),
        });
    }
    if let Some(form) = &f.form {
        return Ok(GridFunction::from_form(f.grid, form.derivative(order)));
    }
    let samples = fd_samples(&f.grid, &f.samples, order)?;
    let atoms = f
        .atoms
        .iter()
        .map(|a| Atom {
            derivative: a.derivative + order,
            ..*a
        })
        .collect();
    Ok(GridFunction {
        grid: f.grid,
        samples,
        atoms,
        form: None,
    })
}

/// Growth exponent estimated from two scales:
/// `log2(max_{|x-c| <= T} |f| / max_{|x-c| <= T/2} |f|)` with `c`, `T` the grid
/// center and half-width. Exact for `|x|^k` on a symmetric grid, and lower-order
/// terms can only lower it. Returns `-inf` for the zero function.
pub fn growth_exponent(f: &GridFunction) -> f64 {
    let grid = f.grid;
    let c = grid.center();
    let half = 0.5 * grid.half_width();
    let mut inner: f64 = 0.0;
    let mut outer: f64 = 0.0;
    for (i, v) in f.samples.iter().enumerate() {
        outer = outer.max(v.abs());
        if (grid.x(i) - c).abs() <= half * (1.0 + 1e-12) {
            inner = inner.max(v.abs());
        }
    }
    if outer == 0.0 {
        return f64::NEG_INFINITY;
    }
    if inner == 0.0 {
        return f64::INFINITY;
    }
    (outer / inner).log2()
}

/// Growth estimate against order `alpha`: the two-scale exponent of
/// `D^k f` plus `k`, with `k = floor(alpha)`. Differentiating first removes
/// offsets and lower-order terms (a shifted ramp `(x - 3)_+` reads as 1, not
/// as its local slope on the truncated tail).
pub fn growth_estimate(f: &GridFunction, alpha: f64) -> f64 {
    let k = (alpha.max(0.0).floor() as u32).min(MAX_FD_ORDER);
    match fd_derivative(f, k) {
        Ok(d) if k > 0 => growth_exponent(&d) + k as f64,
        _ => growth_exponent(f),
    }
}

/// True when the growth estimate exceeds `alpha + 0.1`.
pub fn exceeds_growth(f: &GridFunction, alpha: f64) -> bool {
    growth_estimate(f, alpha) > alpha + 0.1
}

/// Integral of a non-negative density over the full grid and over the
/// concentric window of two thirds of its half-width.
pub(crate) fn two_scale_integrals(grid: &Grid, density: &[f64]) -> (f64, f64) {
    let full = trapezoid(grid, density);
    let c = grid.center();
    let r = grid.half_width() * 2.0 / 3.0;
    let inner: Vec<f64> = density
        .iter()
        .enumerate()
        .map(|(i, v)| if (grid.x(i) - c).abs() <= r { *v } else { 0.0 })
        .collect();
    (full, trapezoid(grid, &inner))
}

/// Two-scale finiteness probe for `(1 + |x|)^alpha |f|`: the integral over the
/// full grid may exceed the one over the inner two thirds by at most 5%.
pub fn l1_finite_probe(f: &GridFunction, alpha: f64) -> bool {
    let density: Vec<f64> = f
        .samples
        .iter()
        .enumerate()
        .map(|(i, v)| (1.0 + f.grid.x(i).abs()).powf(alpha) * v.abs())
        .collect();
    let (full, inner) = two_scale_integrals(&f.grid, &density);
    full <= 1.05 * inner || full - inner <= 1e-10
}

/// Largest absolute sample difference on the given node range.
pub fn sup_distance(a: &[f64], b: &[f64], range: std::ops::Range<usize>) -> f64 {
    range.map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}
