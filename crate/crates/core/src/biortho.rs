//! Biorthogonal systems `(phi, p)` for the null space of `D^m`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::gridfn::{
    factorial, inner, l1_finite_probe, weighted_sup_norm, Form, Grid, GridFunction, WeightSpec,
};
use crate::{Error, Result};

/// Default tolerance on `max |gram - I|`.
pub const GRAM_TOL: f64 = 1e-6;
/// Largest accepted condition number of a change-of-basis matrix.
pub const MAX_CONDITION: f64 = 1e8;
/// Tolerance on the residual of projecting onto the null space.
pub const SPAN_TOL: f64 = 1e-6;

/// Analysis functionals `phis` paired with null-space polynomials `ps`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthoSystem {
    phis: Vec<GridFunction>,
    ps: Vec<GridFunction>,
    gram: Vec<Vec<f64>>,
}

fn gram_matrix(phis: &[GridFunction], ps: &[GridFunction]) -> Result<Vec<Vec<f64>>> {
    phis.iter()
        .map(|phi| ps.iter().map(|p| inner(phi, p)).collect())
        .collect()
}

fn gram_deviation(gram: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

fn check_shapes(phis: &[GridFunction], ps: &[GridFunction]) -> Result<()> {
    if phis.len() != ps.len() {
        return Err(Error::LengthMismatch(phis.len(), ps.len()));
    }
    if phis.is_empty() {
        return Err(Error::InvalidArgument("empty biorthogonal system".into()));
    }
    let grid = phis[0].grid();
    if phis.iter().chain(ps).any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    if let Some(k) = ps
        .iter()
        .position(|p| p.form().and_then(Form::as_polynomial).is_none())
    {
        return Err(Error::InvalidArgument(format!(
            "null-space function {} is not a polynomial form",
            k + 1
        )));
    }
    Ok(())
}

/// Builds a system and accepts it iff `max |gram - I| <= tol`.
pub fn make_biortho_system(
    phis: Vec<GridFunction>,
    ps: Vec<GridFunction>,
    tol: f64,
) -> Result<BiorthoSystem> {
    let sys = BiorthoSystem::unchecked(phis, ps)?;
    let deviation = sys.gram_deviation();
    if !(deviation <= tol) {
        return Err(Error::NotBiorthogonal {
            gram: sys.gram,
            deviation,
            tol,
        });
    }
    Ok(sys)
}

fn hermite_coeffs(k: usize) -> Vec<f64> {
    // He_{k+1} = x He_k - k He_{k-1}
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for j in 1..k {
        let mut next = vec![0.0; j + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= j as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficients of the Hermite polynomials orthonormal for the weight `exp(-x^2/2)`.
pub fn orthonormal_hermite(k: usize) -> Vec<f64> {
    let norm = ((2.0 * std::f64::consts::PI).sqrt() * factorial(k as u32)).sqrt();
    hermite_coeffs(k).into_iter().map(|c| c / norm).collect()
}

fn monomial_coeffs(k: usize, scale: f64) -> Vec<f64> {
    let mut c = vec![0.0; k + 1];
    c[k] = scale;
    c
}

/// Gaussian-weighted duals of the monomials: `phi_n = sum_j (M^-1)_{nj} x^j G(x - shift)`
/// with `G` the standard normal density and `M` its moment matrix, so that
/// `<phi_n, x^k> = delta_{nk}` when `shift = 0`.
pub fn gaussian_moment_phis(grid: Grid, n0: usize, shift: f64) -> Result<Vec<GridFunction>> {
    let moment = |k: usize| -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            (1..k).step_by(2).map(|j| j as f64).product()
        }
    };
    let m = DMatrix::from_fn(n0, n0, |i, j| moment(i + j));
    let inv = m
        .try_inverse()
        .ok_or(Error::SingularSystem)?;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    Ok((0..n0)
        .map(|n| {
            let coeffs: Vec<f64> = (0..n0).map(|j| inv[(n, j)]).collect();
            GridFunction::from_fn(grid, move |x| {
                let u = x - shift;
                let poly = coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c);
                poly * norm * (-0.5 * u * u).exp()
            })
        })
        .collect())
}

impl BiorthoSystem {
    /// Builds a system and computes its Gram matrix without judging it.
    pub fn unchecked(phis: Vec<GridFunction>, ps: Vec<GridFunction>) -> Result<Self> {
        check_shapes(&phis, &ps)?;
        let gram = gram_matrix(&phis, &ps)?;
        Ok(Self { phis, ps, gram })
    }

    /// `phi_n = p_n exp(-x^2/2)` with `p_n` the orthonormal Hermite polynomials of degree `n - 1`.
    pub fn hermite_gaussian(grid: Grid, n0: usize) -> Result<Self> {
        let mut phis = Vec::with_capacity(n0);
        let mut ps = Vec::with_capacity(n0);
        for k in 0..n0 {
            let c = orthonormal_hermite(k);
            ps.push(GridFunction::polynomial(grid, c.clone()));
            phis.push(GridFunction::from_fn(grid, move |x| {
                c.iter().rev().fold(0.0, |acc, v| acc * x + v) * (-0.5 * x * x).exp()
            }));
        }
        make_biortho_system(phis, ps, GRAM_TOL)
    }

    /// Monomials `1, x, ..., x^(n0-1)` with Gaussian-weighted duals.
    pub fn gaussian_monomial(grid: Grid, n0: usize) -> Result<Self> {
        let phis = gaussian_moment_phis(grid, n0, 0.0)?;
        let ps = (0..n0)
            .map(|k| GridFunction::polynomial(grid, monomial_coeffs(k, 1.0)))
            .collect();
        make_biortho_system(phis, ps, GRAM_TOL)
    }

    /// `phi_n = (-1)^(n-1) delta^(n-1)`, `p_n = x^(n-1) / (n-1)!`: the boundary
    /// conditions at 0 of iterated anti-derivatives.
    pub fn delta_derivatives(grid: Grid, n0: usize) -> Result<Self> {
        if !grid.contains(0.0) {
            return Err(Error::AtomOutsideGrid(0.0));
        }
        let phis = (0..n0)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                GridFunction::delta(grid, 0.0, sign, k as u32)
            })
            .collect();
        let ps = (0..n0)
            .map(|k| {
                GridFunction::polynomial(grid, monomial_coeffs(k, 1.0 / factorial(k as u32)))
            })
            .collect();
        make_biortho_system(phis, ps, GRAM_TOL)
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        self.phis[0].grid()
    }

    pub fn phis(&self) -> &[GridFunction] {
        &self.phis
    }

    pub fn ps(&self) -> &[GridFunction] {
        &self.ps
    }

    pub fn gram(&self) -> &[Vec<f64>] {
        &self.gram
    }

    pub fn gram_deviation(&self) -> f64 {
        gram_deviation(&self.gram)
    }

    /// Ascending coefficients of `p_n`.
    pub fn p_coeffs(&self, n: usize) -> &[f64] {
        self.ps[n]
            .form()
            .and_then(Form::as_polynomial)
            .expect("null-space functions carry polynomial forms")
    }

    /// Highest polynomial degree among the `p_n`.
    pub fn max_degree(&self) -> usize {
        (0..self.len())
            .map(|n| self.p_coeffs(n).len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    /// True when any `phi_n` carries Dirac atoms.
    pub fn has_atoms(&self) -> bool {
        self.phis.iter().any(GridFunction::is_distribution)
    }

    /// Two-scale finiteness probe of `||phi_n||_{1,-alpha}` for every regular `phi_n`.
    pub fn phis_decay(&self, alpha: f64) -> bool {
        self.phis.iter().all(|phi| l1_finite_probe(phi, alpha))
    }

    /// `phi(f) = (<phi_n, f>)_n`.
    pub fn phi_coeffs(&self, f: &GridFunction) -> Result<Vec<f64>> {
        self.phis.iter().map(|phi| inner(phi, f)).collect()
    }

    /// `p(g) = (<p_n, g>)_n`.
    pub fn p_moments(&self, g: &GridFunction) -> Result<Vec<f64>> {
        self.ps.iter().map(|p| inner(p, g)).collect()
    }

    /// `sum_n c_n p_n` as a polynomial-form function.
    pub fn p_combination(&self, coeffs: &[f64]) -> Result<GridFunction> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch(coeffs.len(), self.len()));
        }
        let parts = coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| Form::Polynomial(self.p_coeffs(n).iter().map(|v| v * c).collect()))
            .collect();
        Ok(GridFunction::from_form(*self.grid(), Form::Sum(parts)))
    }

    /// `sum_n c_n phi_n`.
    pub fn phi_combination(&self, coeffs: &[f64]) -> Result<GridFunction> {
        if coeffs.len() != self.len() {
            return Err(Error::LengthMismatch(coeffs.len(), self.len()));
        }
        let mut acc = self.phis[0].scale(coeffs[0]);
        for (phi, c) in self.phis.iter().zip(coeffs).skip(1) {
            acc = acc.combine(1.0, phi, *c)?;
        }
        Ok(acc)
    }

    /// `p(x) = (p_n(x))_n`.
    pub fn p_at(&self, x: f64) -> Vec<f64> {
        (0..self.len())
            .map(|n| crate::gridfn::poly_eval(self.p_coeffs(n), x))
            .collect()
    }
}

/// `Proj_{N_p} f = sum_n <phi_n, f> p_n`.
pub fn proj_np(sys: &BiorthoSystem, f: &GridFunction) -> Result<GridFunction> {
    sys.p_combination(&sys.phi_coeffs(f)?)
}

/// `Proj_{N_phi} g = sum_n <p_n, g> phi_n`.
///
/// The moments `<p_n, g>` must exist: the regular part of `g` has to pass the
/// two-scale `L1,-alpha` probe with `alpha` the top degree of the `p_n`.
pub fn proj_nphi(sys: &BiorthoSystem, g: &GridFunction) -> Result<GridFunction> {
    let alpha = sys.max_degree() as f64;
    if !l1_finite_probe(g, alpha) {
        return Err(Error::DivergentMoments(format!(
            "moments up to degree {alpha} do not settle on the grid"
        )));
    }
    sys.phi_combination(&sys.p_moments(g)?)
}

/// `||p|| = ||phi(p)||_2` for `p` in the span of the `p_n`.
pub fn nullspace_norm(sys: &BiorthoSystem, p: &GridFunction) -> Result<f64> {
    let coeffs = sys.phi_coeffs(p)?;
    let back = sys.p_combination(&coeffs)?;
    let w = WeightSpec::new(sys.max_degree() as f64)?;
    let residual = weighted_sup_norm(&p.sub(&back)?, w);
    if residual > SPAN_TOL {
        return Err(Error::OutsideNullSpace(residual));
    }
    Ok(coeffs.iter().map(|c| c * c).sum::<f64>().sqrt())
}

/// `(sum_n ||p_n||_{inf,alpha}^2)^(1/2)`, the bound on `Proj_{N_p}` as an
/// operator on `L_{inf,alpha}` (measured on the grid).
pub fn projector_bound(ps: &[GridFunction], alpha: f64) -> Result<f64> {
    let w = WeightSpec::new(alpha)?;
    Ok(ps
        .iter()
        .map(|p| weighted_sup_norm(p, w).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Matrix data relating two biorthogonal systems with a common null space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfBasis {
    /// `C_{mn} = <new_phi_m, p_n>`.
    pub c: Vec<Vec<f64>>,
    /// `B = C^-1`; the new null basis is `new_p_n = sum_k B_{kn} p_k`.
    pub b: Vec<Vec<f64>>,
    /// `1 / ||B||_F`.
    pub b1: f64,
    /// `||C||_F`.
    pub b2: f64,
    /// Lower native-norm equivalence constant, once estimated.
    pub a1: Option<f64>,
    /// Upper native-norm equivalence constant, once estimated.
    pub a2: Option<f64>,
    /// 2-norm condition number of `C`.
    pub condition: f64,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Re-pairs the null space with new analysis functionals.
///
/// Returns the new system `(new_phis, C^-1 p)` and the matrices relating it to `sys`.
pub fn change_of_basis(
    sys: &BiorthoSystem,
    new_phis: Vec<GridFunction>,
    tol: f64,
) -> Result<(BiorthoSystem, ChangeOfBasis)> {
    let n0 = sys.len();
    if new_phis.len() != n0 {
        return Err(Error::LengthMismatch(new_phis.len(), n0));
    }
    let rows = gram_matrix(&new_phis, sys.ps())?;
    let c = DMatrix::from_fn(n0, n0, |i, j| rows[i][j]);
    let sv = c.clone().singular_values();
    let smin = sv.min();
    let condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let b = c.clone().try_inverse().ok_or(Error::SingularSystem)?;
    let grid = *sys.grid();
    let new_ps = (0..n0)
        .map(|n| {
            let parts = (0..n0)
                .map(|k| Form::Polynomial(sys.p_coeffs(k).iter().map(|v| v * b[(k, n)]).collect()))
                .collect();
            GridFunction::from_form(grid, Form::Sum(parts))
        })
        .collect();
    let new_sys = make_biortho_system(new_phis, new_ps, tol)?;
    let info = ChangeOfBasis {
        b1: 1.0 / b.norm(),
        b2: c.norm(),
        c: to_rows(&c),
        b: to_rows(&b),
        a1: None,
        a2: None,
        condition,
    };
    Ok((new_sys, info))
}
