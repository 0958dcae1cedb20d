//! Native spaces: stabilized pseudo-inverses, native and pre-dual norms,
//! the direct-sum decomposition `f = L^-1_phi (Lf) + Proj_{N_p} f`, and a
//! randomized suite of the operator identities behind them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::biortho::{change_of_basis, proj_np, proj_nphi, BiorthoSystem, ChangeOfBasis};
use crate::gridfn::{
    exceeds_growth, growth_estimate, trapezoid, two_scale_integrals, weighted_sup_norm, Atom, Form,
    Grid, GridFunction, WeightSpec,
};
use crate::operator::{
    apply, apply_adjoint, boundary_margin, canonical_inverse, canonical_inverse_adjoint,
    OperatorDescriptor,
};
use crate::{Error, Result};

/// Tolerance for the identity residuals of the randomized suite.
pub const IDENTITY_TOL: f64 = 1e-4;
/// Tolerance for `phi(L^-1_phi w) = 0`.
pub const ANNIHILATION_TOL: f64 = 1e-6;
/// Tolerance of the decomposition reconstruction.
pub const RECONSTRUCTION_TOL: f64 = 1e-5;
/// Tolerance for `ps` spanning the operator's null space.
pub const SPAN_TOL: f64 = 1e-8;

/// Norm of the primary space `X'` that `Lf` lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PrimaryNorm {
    L2,
    /// Radon measures (total variation); the pre-dual is `C0`.
    M,
    Lp(f64),
}

impl PrimaryNorm {
    pub fn new_lp(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidArgument(format!("Lp exponent {p} outside [1, inf)")));
        }
        Ok(if p == 2.0 { PrimaryNorm::L2 } else { PrimaryNorm::Lp(p) })
    }

    /// Exponent of `X'` (`1` for measures).
    pub fn exponent(&self) -> f64 {
        match self {
            PrimaryNorm::L2 => 2.0,
            PrimaryNorm::M => 1.0,
            PrimaryNorm::Lp(p) => *p,
        }
    }

    /// Conjugate exponent of the pre-dual `X` (`inf` for `C0`).
    pub fn dual_exponent(&self) -> f64 {
        let p = self.exponent();
        if p == 1.0 {
            f64::INFINITY
        } else {
            p / (p - 1.0)
        }
    }

    pub fn name(&self) -> String {
        match self {
            PrimaryNorm::L2 => "L2".into(),
            PrimaryNorm::M => "M".into(),
            PrimaryNorm::Lp(p) => format!("L{p}"),
        }
    }
}

/// Operator, biorthogonal system and primary norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeSpaceSpec {
    op: OperatorDescriptor,
    sys: BiorthoSystem,
    primary: PrimaryNorm,
}

impl NativeSpaceSpec {
    pub fn new(op: OperatorDescriptor, sys: BiorthoSystem, primary: PrimaryNorm) -> Result<Self> {
        if let PrimaryNorm::Lp(p) = primary {
            PrimaryNorm::new_lp(p)?;
        }
        if sys.len() != op.null_dim() {
            return Err(Error::LengthMismatch(sys.len(), op.null_dim()));
        }
        let grid = *sys.grid();
        let w = WeightSpec::new(op.alpha())?;
        for q in op.null_basis_functions(grid) {
            let back = proj_np(&sys, &q)?;
            let r = weighted_sup_norm(&q.sub(&back)?, w);
            if r > SPAN_TOL {
                return Err(Error::InvalidArgument(format!(
                    "null-space basis does not span the operator null space (residual {r:e})"
                )));
            }
        }
        for n in 0..sys.len() {
            let c = sys.p_coeffs(n);
            let scale = c.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
            if c.iter().skip(op.null_dim()).any(|v| v.abs() > SPAN_TOL * scale) {
                return Err(Error::InvalidArgument(format!(
                    "null-space function {} has degree >= {}",
                    n + 1,
                    op.null_dim()
                )));
            }
        }
        if primary == PrimaryNorm::M && sys.has_atoms() {
            return Err(Error::PhiNotAdmissible(
                "Dirac functionals are not in L1 (X' = M needs phi_n to be ordinary functions)"
                    .into(),
            ));
        }
        if !sys.phis_decay(op.alpha()) {
            return Err(Error::DivergentMoments(
                "phi_n do not decay fast enough for the operator growth order".into(),
            ));
        }
        Ok(Self { op, sys, primary })
    }

    pub fn op(&self) -> &OperatorDescriptor {
        &self.op
    }

    pub fn sys(&self) -> &BiorthoSystem {
        &self.sys
    }

    pub fn primary(&self) -> PrimaryNorm {
        self.primary
    }

    pub fn grid(&self) -> &Grid {
        self.sys.grid()
    }

    /// Same operator and norm with another biorthogonal system.
    pub fn with_system(&self, sys: BiorthoSystem) -> Result<Self> {
        Self::new(self.op.clone(), sys, self.primary)
    }
}

/// `L^-1_phi w = (I - Proj_{N_p}) L^-1 w`.
pub fn stabilized_inverse(spec: &NativeSpaceSpec, w: &GridFunction) -> Result<GridFunction> {
    let f = canonical_inverse(&spec.op, w)?;
    let p = proj_np(&spec.sys, &f)?;
    f.sub(&p)
}

/// `L^-1*_phi g = L^-1* (I - Proj_{N_phi}) g`.
pub fn stabilized_inverse_adjoint(spec: &NativeSpaceSpec, g: &GridFunction) -> Result<GridFunction> {
    let q = proj_nphi(&spec.sys, g)?;
    canonical_inverse_adjoint(&spec.op, &g.sub(&q)?)
}

fn lp_norm(grid: &Grid, samples: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return samples.iter().fold(0.0, |a, v| a.max(v.abs()));
    }
    let vals: Vec<f64> = samples.iter().map(|v| v.abs().powf(p)).collect();
    trapezoid(grid, &vals).powf(1.0 / p)
}

/// Norm of `v` in the pre-dual space `X` (`L2`, `C0` or `Lq`).
pub fn x_norm(spec: &NativeSpaceSpec, v: &GridFunction) -> Result<f64> {
    if v.is_distribution() {
        return Err(Error::NonMember("Dirac atoms are not in X".into()));
    }
    Ok(lp_norm(v.grid(), v.samples(), spec.primary.dual_exponent()))
}

/// Norm of `w` in the primary space `X'`.
///
/// For `M`, Dirac atoms contribute `|weight|` and the regular part is treated
/// as a density.
pub fn xprime_norm(spec: &NativeSpaceSpec, w: &GridFunction) -> Result<f64> {
    match spec.primary {
        PrimaryNorm::M => {
            if let Some(a) = w.atoms().iter().find(|a| a.derivative > 0) {
                return Err(Error::NonMember(format!(
                    "derivative of a Dirac atom at {} is not a measure",
                    a.center
                )));
            }
            let atoms: f64 = merge_atoms(w.atoms()).iter().map(|a| a.weight.abs()).sum();
            Ok(atoms + lp_norm(w.grid(), w.samples(), 1.0))
        }
        other => {
            if w.is_distribution() {
                return Err(Error::NonMember(format!(
                    "Dirac atoms are not in {}",
                    other.name()
                )));
            }
            Ok(lp_norm(w.grid(), w.samples(), other.exponent()))
        }
    }
}

/// Sums atoms sharing a center and derivative order; zero sums are dropped.
/// Output is sorted by `(center, derivative)`.
pub fn merge_atoms(atoms: &[Atom]) -> Vec<Atom> {
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| {
        a.center
            .total_cmp(&b.center)
            .then(a.derivative.cmp(&b.derivative))
    });
    let mut out: Vec<Atom> = Vec::new();
    for a in sorted {
        match out.last_mut() {
            Some(last) if last.center == a.center && last.derivative == a.derivative => {
                last.weight += a.weight
            }
            _ => out.push(a),
        }
    }
    out.retain(|a| a.weight != 0.0);
    out
}

/// Two-scale probe: does the `X'` mass of the regular part of `w` settle
/// between the inner two thirds and the full grid?
fn settles(spec: &NativeSpaceSpec, w: &GridFunction) -> (bool, f64) {
    let p = spec.primary.exponent();
    let density: Vec<f64> = w.samples().iter().map(|v| v.abs().powf(p)).collect();
    let (full, inner) = two_scale_integrals(w.grid(), &density);
    let growth = if inner > 0.0 { full / inner - 1.0 } else { 0.0 };
    (full <= 1.05 * inner || full - inner <= 1e-8, growth)
}

/// Native norm `||Lf||_{X'} + ||phi(f)||_2` with its two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NativeNorm {
    pub value: f64,
    pub lf_norm: f64,
    pub null_norm: f64,
}

fn check_membership(spec: &NativeSpaceSpec, f: &GridFunction, lf: &GridFunction) -> Result<()> {
    if exceeds_growth(f, spec.op.alpha()) {
        return Err(Error::NonMember(format!(
            "f grows like |x|^{:.3}, faster than order {}",
            growth_estimate(f, spec.op.alpha()),
            spec.op.alpha()
        )));
    }
    let (ok, growth) = settles(spec, lf);
    if !ok {
        return Err(Error::NonMember(format!(
            "||Lf|| grows by {:.1}% from 2T/3 to T (divergent)",
            100.0 * growth
        )));
    }
    Ok(())
}

/// `||f||_{X'_L} = ||Lf||_{X'} + ||phi(f)||_2`.
pub fn native_norm(spec: &NativeSpaceSpec, f: &GridFunction) -> Result<NativeNorm> {
    let lf = apply(&spec.op, f)?;
    check_membership(spec, f, &lf)?;
    let lf_norm = xprime_norm(spec, &lf)?;
    let coeffs = spec.sys.phi_coeffs(f)?;
    let null_norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(NativeNorm {
        value: lf_norm + null_norm,
        lf_norm,
        null_norm,
    })
}

/// `||g||_{X_L} = max(||L^-1*_phi g||_X, ||p(g)||_2)`.
pub fn predual_norm(spec: &NativeSpaceSpec, g: &GridFunction) -> Result<f64> {
    let v = stabilized_inverse_adjoint(spec, g)?;
    let moments = spec.sys.p_moments(g)?;
    let null = moments.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(x_norm(spec, &v)?.max(null))
}

/// `f = L^-1_phi w + sum_n p_coeffs[n] p_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub w: GridFunction,
    pub p_coeffs: Vec<f64>,
    /// Interior sup-norm of `f - (L^-1_phi w + p)`.
    pub residual: f64,
}

/// Nodes where identities are compared: the grid minus a `5 m` boundary
/// margin and minus the same margin around Dirac atoms of the `phi_n`.
pub fn identity_mask(spec: &NativeSpaceSpec) -> Vec<bool> {
    let grid = spec.grid();
    let margin = boundary_margin(&spec.op);
    let range = grid.interior(margin);
    let centers: Vec<f64> = spec
        .sys
        .phis()
        .iter()
        .flat_map(|p| p.atoms().iter().map(|a| a.center))
        .collect();
    let reach = margin as f64 * grid.dx() * (1.0 + 1e-9);
    (0..grid.len())
        .map(|i| {
            range.contains(&i) && centers.iter().all(|c| (grid.x(i) - c).abs() > reach)
        })
        .collect()
}

/// Masked sup distance of the regular parts plus the largest weight
/// difference between the merged atoms.
pub fn masked_distance(a: &GridFunction, b: &GridFunction, mask: &[bool]) -> f64 {
    let regular = a
        .samples()
        .iter()
        .zip(b.samples())
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((x, y), _)| (x - y).abs())
        .fold(0.0, f64::max);
    let mut atoms = a.atoms().to_vec();
    atoms.extend(b.atoms().iter().map(|t| Atom {
        weight: -t.weight,
        ..*t
    }));
    let atom_gap = merge_atoms(&atoms)
        .iter()
        .map(|t| t.weight.abs())
        .fold(0.0, f64::max);
    regular + atom_gap
}

/// Splits `f` into `Lf` and its null-space coordinates and checks the reconstruction.
pub fn decompose(spec: &NativeSpaceSpec, f: &GridFunction) -> Result<Decomposition> {
    let w = apply(&spec.op, f)?;
    check_membership(spec, f, &w)?;
    let p_coeffs = spec.sys.phi_coeffs(f)?;
    let rebuilt = stabilized_inverse(spec, &w)?.add(&spec.sys.p_combination(&p_coeffs)?)?;
    let residual = masked_distance(f, &rebuilt, &identity_mask(spec));
    Ok(Decomposition {
        w,
        p_coeffs,
        residual,
    })
}

/// Fills the native-norm equivalence constants of `info`, where `info`
/// relates `spec` to `other` (same operator and norm, new system):
/// `A1 = 1 / (1 + sum ||phi_n||_{X~_L})`, `A2 = 1 + sum ||phi~_n||_{X_L}`.
pub fn norm_equivalence(
    spec: &NativeSpaceSpec,
    other: &NativeSpaceSpec,
    info: &mut ChangeOfBasis,
) -> Result<(f64, f64)> {
    let mut s1 = 0.0;
    for phi in spec.sys.phis() {
        s1 += predual_norm(other, phi)?;
    }
    let mut s2 = 0.0;
    for phi in other.sys.phis() {
        s2 += predual_norm(spec, phi)?;
    }
    let (a1, a2) = (1.0 / (1.0 + s1), 1.0 + s2);
    info.a1 = Some(a1);
    info.a2 = Some(a2);
    Ok((a1, a2))
}

/// Builds the system `(new_phis, C^-1 p)` for `spec` together with all
/// change-of-basis constants, including `A1` and `A2`.
pub fn change_system(
    spec: &NativeSpaceSpec,
    new_phis: Vec<GridFunction>,
    tol: f64,
) -> Result<(NativeSpaceSpec, ChangeOfBasis)> {
    let (sys, mut info) = change_of_basis(&spec.sys, new_phis, tol)?;
    let other = spec.with_system(sys)?;
    norm_equivalence(spec, &other, &mut info)?;
    Ok((other, info))
}

/// One measured invariant with its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl InvariantResult {
    /// Passes iff `value <= threshold` (NaN fails).
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    /// Passes iff `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            pass: value > threshold,
        }
    }
}

/// Result of [`identity_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub trials: u32,
    pub seed: u64,
    pub invariants: Vec<InvariantResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|r| r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantResult> {
        self.invariants.iter().find(|r| r.name == name)
    }
}

/// Deterministic per-trial generator derived from `(seed, trial)`.
pub fn trial_rng(seed: u64, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Random sum of 1 to 3 Gaussians: centers in `[-3, 3]`, widths in
/// `[0.5, 1.5]`, amplitudes in `[-1, 1]`.
pub fn random_mixture(grid: Grid, rng: &mut impl Rng) -> GridFunction {
    let k = rng.random_range(1..=3);
    let comps: Vec<(f64, f64, f64)> = (0..k)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.5..1.5),
            )
        })
        .collect();
    GridFunction::from_fn(grid, move |x| {
        comps
            .iter()
            .map(|(a, c, s)| {
                let u = (x - c) / s;
                a * (-0.5 * u * u).exp()
            })
            .sum()
    })
}

/// Random sum of 1 to 3 Dirac atoms with centers in `[-3, 3]` at least 0.5
/// apart and weights in `[-1, 1]`.
pub fn random_atoms(grid: Grid, rng: &mut impl Rng) -> GridFunction {
    let k = rng.random_range(1..=3);
    let mut centers: Vec<f64> = Vec::with_capacity(k);
    while centers.len() < k {
        let c = rng.random_range(-3.0..3.0);
        if centers.iter().all(|d| (c - d).abs() >= 0.5) {
            centers.push(c);
        }
    }
    let parts = centers
        .into_iter()
        .map(|center| Form::DeltaAtom {
            center,
            weight: rng.random_range(-1.0..1.0),
            derivative: 0,
        })
        .collect();
    GridFunction::from_form(grid, Form::Sum(parts))
}

fn random_null_poly(op: &OperatorDescriptor, rng: &mut impl Rng) -> Vec<f64> {
    (0..op.null_dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect()
}

/// Element of `X` attaining `<w, v> = ||w||_{X'}` with `||v||_X = 1`.
fn norming_element(spec: &NativeSpaceSpec, w: &GridFunction) -> Result<GridFunction> {
    let grid = *w.grid();
    let norm = xprime_norm(spec, w)?;
    if norm == 0.0 {
        return Ok(GridFunction::zero(grid));
    }
    match spec.primary {
        PrimaryNorm::M => {
            if !w.samples().iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidArgument(
                    "norming element for measures needs a pure atom sum".into(),
                ));
            }
            let atoms = merge_atoms(w.atoms());
            let gap = atoms
                .windows(2)
                .map(|p| p[1].center - p[0].center)
                .fold(f64::INFINITY, f64::min);
            let width = (0.5 * gap).min(0.5);
            let smooth = spec.op.order() as i32 + 2;
            Ok(GridFunction::from_fn(grid, move |x| {
                atoms
                    .iter()
                    .map(|a| {
                        let u = (x - a.center) / width;
                        if u.abs() < 1.0 {
                            a.weight.signum() * (1.0 - u * u).powi(smooth)
                        } else {
                            0.0
                        }
                    })
                    .sum()
            }))
        }
        other => {
            let p = other.exponent();
            let scale = norm.powf(p - 1.0);
            let samples = w
                .samples()
                .iter()
                .map(|v| v.signum() * v.abs().powf(p - 1.0) / scale)
                .collect();
            GridFunction::from_samples(grid, samples)
        }
    }
}

#[derive(Default)]
struct Worst {
    left_adjoint: f64,
    pseudo_right_adjoint: f64,
    right: f64,
    left_pseudo: f64,
    isometry: f64,
    annihilation: f64,
    adjoint_null: f64,
    dual_ratio: f64,
    composite_gap: f64,
    attained_gap: f64,
}

/// `L* L^-1*_phi g`, computed directly when the `phi_n` are ordinary functions
/// and term by term (through `g` and the closed-form `phi_n`) otherwise.
fn adjoint_round_trip(spec: &NativeSpaceSpec, g: &GridFunction) -> Result<GridFunction> {
    if !spec.sys.has_atoms() {
        return apply_adjoint(&spec.op, &stabilized_inverse_adjoint(spec, g)?);
    }
    let moments = spec.sys.p_moments(g)?;
    let mut out = apply_adjoint(&spec.op, &canonical_inverse_adjoint(&spec.op, g)?)?;
    for (phi, c) in spec.sys.phis().iter().zip(moments) {
        let back = apply_adjoint(&spec.op, &canonical_inverse_adjoint(&spec.op, phi)?)?;
        out = out.combine(1.0, &back, -c)?;
    }
    Ok(out)
}

fn run_trial(spec: &NativeSpaceSpec, rng: &mut ChaCha8Rng, mask: &[bool], worst: &mut Worst) -> Result<()> {
    let grid = *spec.grid();
    let op = &spec.op;
    let measure = spec.primary == PrimaryNorm::M;

    // (a) L^-1*_phi L* v = v, and the isometry it implies.
    let v = random_mixture(grid, rng);
    let lv = apply_adjoint(op, &v)?;
    let back = stabilized_inverse_adjoint(spec, &lv)?;
    worst.left_adjoint = worst.left_adjoint.max(masked_distance(&back, &v, mask));
    let iso = (x_norm(spec, &back)? - x_norm(spec, &v)?).abs();
    worst.isometry = worst.isometry.max(iso);

    // (b) L* L^-1*_phi g = (I - Proj_{N_phi}) g.
    let g = random_mixture(grid, rng);
    let lhs = adjoint_round_trip(spec, &g)?;
    let rhs = g.sub(&proj_nphi(&spec.sys, &g)?)?;
    worst.pseudo_right_adjoint = worst
        .pseudo_right_adjoint
        .max(masked_distance(&lhs, &rhs, mask));

    // (c) L L^-1_phi w = w, and phi(L^-1_phi w) = 0.
    let w = if measure {
        random_atoms(grid, rng)
    } else {
        random_mixture(grid, rng)
    };
    let f = stabilized_inverse(spec, &w)?;
    let lf = apply(op, &f)?;
    worst.right = worst.right.max(masked_distance(&lf, &w, mask));
    let bc = spec.sys.phi_coeffs(&f)?;
    worst.annihilation = worst
        .annihilation
        .max(bc.iter().fold(0.0, |a, c| a.max(c.abs())));

    // (d) L^-1_phi L f = (I - Proj_{N_p}) f.
    let b = random_null_poly(op, rng);
    let f = if measure {
        let atoms = random_atoms(grid, rng);
        canonical_inverse(op, &atoms)?.add(&spec.sys.p_combination(&b)?)?
    } else {
        random_mixture(grid, rng).add(&spec.sys.p_combination(&b)?.without_form())?
    };
    let lhs = stabilized_inverse(spec, &apply(op, &f)?)?;
    let rhs = f.sub(&proj_np(&spec.sys, &f)?)?;
    worst.left_pseudo = worst.left_pseudo.max(masked_distance(&lhs, &rhs, mask));

    // Null-space property L^-1*_phi phi_n = 0.
    for phi in spec.sys.phis() {
        let out = stabilized_inverse_adjoint(spec, phi)?;
        let zero = GridFunction::zero(grid);
        worst.adjoint_null = worst.adjoint_null.max(masked_distance(&out, &zero, mask));
    }

    // Duality: <f, g> <= ||f||_{X'_L} ||g||_{X_L} over a random bank, and the
    // composite norm pairing (sum against max).
    let nn = native_norm(spec, &f)?;
    for _ in 0..3 {
        let g = random_mixture(grid, rng);
        let gn = predual_norm(spec, &g)?;
        if gn > 0.0 && nn.value > 0.0 {
            let ratio = crate::gridfn::inner(&f, &g)?.abs() / (gn * nn.value);
            worst.dual_ratio = worst.dual_ratio.max(ratio);
        }
    }
    let corners = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    let sup = corners
        .iter()
        .map(|(s, t)| s * nn.lf_norm + t * nn.null_norm)
        .fold(f64::NEG_INFINITY, f64::max);
    worst.composite_gap = worst.composite_gap.max((sup - nn.value).abs());

    // The sup is attained by g = L* v + sum_n c_n phi_n with v norming Lf and
    // c = phi(f) / ||phi(f)||.
    let lf = apply(op, &f)?;
    let v = norming_element(spec, &lf)?;
    let coeffs = spec.sys.phi_coeffs(&f)?;
    let cn = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut g = apply_adjoint(op, &v)?;
    if cn > 0.0 {
        let unit: Vec<f64> = coeffs.iter().map(|c| c / cn).collect();
        g = g.add(&spec.sys.phi_combination(&unit)?)?;
    }
    let gn = predual_norm(spec, &g)?;
    let pairing = crate::gridfn::inner(&f, &g)?;
    let attained = (pairing / gn - nn.value).abs() / nn.value.max(1.0);
    worst.attained_gap = worst.attained_gap.max(attained);
    Ok(())
}

/// Randomized check of the pseudo-inverse identities, null-space properties
/// and norm dualities of `spec`.
pub fn identity_suite(spec: &NativeSpaceSpec, trials: u32, seed: u64) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let mask = identity_mask(spec);
    let mut worst = Worst::default();
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        run_trial(spec, &mut rng, &mask, &mut worst)?;
    }
    let tol = IDENTITY_TOL;
    let invariants = vec![
        InvariantResult::at_most("left_inverse_of_adjoint", worst.left_adjoint, tol),
        InvariantResult::at_most("pseudo_right_inverse_of_adjoint", worst.pseudo_right_adjoint, tol),
        InvariantResult::at_most("right_inverse", worst.right, tol),
        InvariantResult::at_most("left_pseudo_inverse", worst.left_pseudo, tol),
        InvariantResult::at_most("isometry", worst.isometry, tol),
        InvariantResult::at_most("null_space_annihilation", worst.annihilation, ANNIHILATION_TOL),
        InvariantResult::at_most("adjoint_null_space", worst.adjoint_null, tol),
        InvariantResult::at_most("dual_norm_lower_bound", worst.dual_ratio, 1.0 + tol),
        InvariantResult::at_most("composite_duality", worst.composite_gap, 1e-8),
        InvariantResult::at_most("dual_pairing_attained", worst.attained_gap, tol),
    ];
    Ok(SuiteReport {
        trials,
        seed,
        invariants,
    })
}

/// Randomized checks of a change of analysis functionals from `spec` to
/// `new_phis`: Frobenius bounds on `||phi~(p)||_2 / ||phi(p)||_2`, the
/// system independence of `||Lf||_{X'}`, and the native-norm equivalence
/// `A1 ||f|| <= ||f||~ <= A2 ||f||`.
pub fn equivalence_suite(
    spec: &NativeSpaceSpec,
    new_phis: Vec<GridFunction>,
    tol: f64,
    trials: u32,
    seed: u64,
) -> Result<(ChangeOfBasis, Vec<InvariantResult>)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let (other, info) = change_system(spec, new_phis, tol)?;
    let (a1, a2) = (info.a1.unwrap_or(0.0), info.a2.unwrap_or(f64::INFINITY));
    let grid = *spec.grid();
    let (mut ratio_violation, mut lf_diff, mut norm_violation) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let coeffs = random_null_poly(&spec.op, &mut rng);
        let p = spec.sys.p_combination(&coeffs)?;
        let old = l2(&spec.sys.phi_coeffs(&p)?);
        let new = l2(&other.sys.phi_coeffs(&p)?);
        let r = new / old;
        ratio_violation = ratio_violation.max(info.b1 - r).max(r - info.b2);

        let w = match spec.primary {
            PrimaryNorm::M => random_atoms(grid, &mut rng),
            _ => random_mixture(grid, &mut rng),
        };
        let f = stabilized_inverse(spec, &w)?.add(&p)?;
        let lf = apply(&spec.op, &f)?;
        let d = (xprime_norm(spec, &lf)? - xprime_norm(&other, &lf)?).abs();
        lf_diff = lf_diff.max(d);
        let n_old = native_norm(spec, &f)?.value;
        let n_new = native_norm(&other, &f)?.value;
        norm_violation = norm_violation
            .max((a1 * n_old - n_new) / n_old)
            .max((n_new - a2 * n_old) / n_old);
    }
    let invariants = vec![
        InvariantResult::at_most("frobenius_ratio_bounds", ratio_violation, 1e-12),
        InvariantResult::at_most("lf_norm_system_independent", lf_diff, 0.0),
        InvariantResult::at_most("native_norm_equivalence", norm_violation, 1e-9),
    ];
    Ok((info, invariants))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Tolerance for projector idempotence and adjointness.
pub const PROJECTOR_TOL: f64 = 1e-6;

/// Randomized idempotence and adjointness of `Proj_{N_p}` and `Proj_{N_phi}`.
///
/// Inputs are Gaussian mixtures, with a random null-space polynomial added on
/// the `Proj_{N_p}` side.
pub fn projector_suite(sys: &BiorthoSystem, trials: u32, seed: u64) -> Result<Vec<InvariantResult>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let grid = *sys.grid();
    let all = vec![true; grid.len()];
    let w = WeightSpec::new(sys.max_degree() as f64)?;
    let (mut idem_p, mut idem_phi, mut adj) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let coeffs: Vec<f64> = (0..sys.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = random_mixture(grid, &mut rng).add(&sys.p_combination(&coeffs)?)?;
        let g = random_mixture(grid, &mut rng);

        let pf = proj_np(sys, &f)?;
        let ppf = proj_np(sys, &pf)?;
        idem_p = idem_p.max(weighted_sup_norm(&ppf.sub(&pf)?, w) / (1.0 + weighted_sup_norm(&pf, w)));

        let qg = proj_nphi(sys, &g)?;
        let qqg = proj_nphi(sys, &qg)?;
        let scale = 1.0 + masked_distance(&qg, &GridFunction::zero(grid), &all);
        idem_phi = idem_phi.max(masked_distance(&qqg, &qg, &all) / scale);

        let lhs = crate::gridfn::inner(&pf, &g)?;
        let rhs = crate::gridfn::inner(&f, &qg)?;
        adj = adj.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    Ok(vec![
        InvariantResult::at_most("proj_np_idempotence", idem_p, PROJECTOR_TOL),
        InvariantResult::at_most("proj_nphi_idempotence", idem_phi, PROJECTOR_TOL),
        InvariantResult::at_most("projector_adjointness", adj, PROJECTOR_TOL),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biortho::gaussian_moment_phis;
    use crate::operator::make_derivative_operator;

    fn spec(m: u32, primary: PrimaryNorm, gaussian: bool) -> NativeSpaceSpec {
        let g = Grid::default();
        let op = make_derivative_operator(m).unwrap();
        let sys = if gaussian {
            BiorthoSystem::gaussian_monomial(g, m as usize).unwrap()
        } else {
            BiorthoSystem::hermite_gaussian(g, m as usize).unwrap()
        };
        NativeSpaceSpec::new(op, sys, primary).unwrap()
    }

    fn sup(f: &GridFunction) -> f64 {
        f.samples().iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    #[test]
    fn equivalence_suite_hermite_vs_shifted() {
        for (m, primary) in [(1, PrimaryNorm::M), (2, PrimaryNorm::L2)] {
            let s = spec(m, primary, false);
            let alt = gaussian_moment_phis(*s.grid(), m as usize, 0.5).unwrap();
            let (info, inv) = equivalence_suite(&s, alt, 1e-6, 20, 9).unwrap();
            assert!(info.b1 <= info.b2);
            for r in inv {
                assert!(r.pass, "m={m} {r:?}");
            }
        }
    }

    #[test]
    fn projectors_are_adjoint_idempotents() {
        let g = Grid::default();
        for sys in [
            BiorthoSystem::hermite_gaussian(g, 3).unwrap(),
            BiorthoSystem::delta_derivatives(g, 2).unwrap(),
        ] {
            for r in projector_suite(&sys, 20, 5).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn spec_rejects_delta_phi_for_measures() {
        let g = Grid::default();
        let op = make_derivative_operator(1).unwrap();
        let sys = BiorthoSystem::delta_derivatives(g, 1).unwrap();
        assert!(NativeSpaceSpec::new(op.clone(), sys.clone(), PrimaryNorm::L2).is_ok());
        let err = NativeSpaceSpec::new(op, sys, PrimaryNorm::M).unwrap_err();
        assert!(err.to_string().contains("phi not admissible for X = C0"));
    }

    #[test]
    fn spec_rejects_wrong_null_space() {
        let g = Grid::default();
        let op = make_derivative_operator(1).unwrap();
        let sys = BiorthoSystem::gaussian_monomial(g, 2).unwrap();
        assert!(NativeSpaceSpec::new(op, sys, PrimaryNorm::L2).is_err());
    }

    #[test]
    fn stabilized_inverse_examples() {
        let s = spec(1, PrimaryNorm::M, true);
        let g = *s.grid();
        let zero = stabilized_inverse(&s, &GridFunction::zero(g)).unwrap();
        assert_eq!(sup(&zero), 0.0);

        let f = stabilized_inverse(&s, &GridFunction::delta(g, 0.0, 1.0, 0)).unwrap();
        for i in 0..g.len() {
            assert!((f.samples()[i] - 0.5 * crate::gridfn::sign0(g.x(i))).abs() < 1e-15);
        }

        let f = stabilized_inverse(&s, &GridFunction::delta(g, 1.0, 1.0, 0)).unwrap();
        let step = GridFunction::green_atom(g, 1, 1.0, 1.0).without_form();
        let c = crate::gridfn::inner(&s.sys().phis()[0], &step).unwrap();
        for i in 0..g.len() {
            let expect = 0.5 * crate::gridfn::sign0(g.x(i) - 1.0) - c;
            assert!((f.samples()[i] - expect).abs() <= 1e-8);
        }
        // exact moment: 1/2 - Phi(1)
        assert!((c + 0.3413447460685429).abs() < 1e-6, "{c}");
    }

    #[test]
    fn stabilized_inverse_adjoint_examples() {
        let s = spec(2, PrimaryNorm::L2, false);
        let g = *s.grid();
        for phi in s.sys().phis() {
            assert!(sup(&stabilized_inverse_adjoint(&s, phi).unwrap()) <= 1e-6);
        }
        let psi = GridFunction::from_fn(g, |x| (-(x - 0.2) * (x - 0.2) / 1.5).exp());
        let lpsi = apply_adjoint(s.op(), &psi).unwrap();
        let back = stabilized_inverse_adjoint(&s, &lpsi).unwrap();
        let mask = identity_mask(&s);
        assert!(masked_distance(&back, &psi, &mask) <= 1e-5);
        assert_eq!(
            sup(&stabilized_inverse_adjoint(&s, &GridFunction::zero(g)).unwrap()),
            0.0
        );
    }

    #[test]
    fn native_norm_examples() {
        let s = spec(1, PrimaryNorm::M, true);
        let g = *s.grid();
        let n = native_norm(&s, &s.sys().ps()[0]).unwrap();
        assert!((n.value - 1.0).abs() < 1e-10 && n.lf_norm == 0.0);

        let half_sign = GridFunction::green_atom(g, 1, 0.0, 1.0);
        let n = native_norm(&s, &half_sign).unwrap();
        assert_eq!(n.lf_norm, 1.0);
        assert!(n.null_norm < 1e-15);
        assert!((n.value - 1.0).abs() < 1e-15);

        let s2 = spec(2, PrimaryNorm::M, false);
        let f = GridFunction::green_atom(g, 2, 0.0, 3.0);
        assert_eq!(native_norm(&s2, &f).unwrap().lf_norm, 3.0);
    }

    #[test]
    fn native_norm_rejects_growth() {
        let s = spec(1, PrimaryNorm::L2, true);
        let x = GridFunction::from_fn(*s.grid(), |x| x);
        assert!(matches!(native_norm(&s, &x), Err(Error::NonMember(_))));
        let s2 = spec(2, PrimaryNorm::L2, true);
        let cubic = GridFunction::from_fn(*s2.grid(), |x| x * x * x);
        assert!(native_norm(&s2, &cubic).is_err());
    }

    #[test]
    fn predual_norm_examples() {
        let s = spec(2, PrimaryNorm::L2, false);
        let g = *s.grid();
        for phi in s.sys().phis() {
            assert!((predual_norm(&s, phi).unwrap() - 1.0).abs() < 1e-6);
        }
        let psi = GridFunction::from_fn(g, |x| (-0.5 * x * x).exp());
        let lpsi = apply_adjoint(s.op(), &psi).unwrap();
        let l2 = std::f64::consts::PI.sqrt().sqrt();
        assert!((predual_norm(&s, &lpsi).unwrap() - l2).abs() <= 1e-5);
        assert_eq!(predual_norm(&s, &GridFunction::zero(g)).unwrap(), 0.0);
    }

    #[test]
    fn decompose_examples() {
        let s = spec(1, PrimaryNorm::M, true);
        let g = *s.grid();
        let p = s.sys().p_combination(&[2.5]).unwrap();
        let d = decompose(&s, &p).unwrap();
        assert!(d.w.atoms().is_empty() && sup(&d.w) == 0.0);
        assert!((d.p_coeffs[0] - 2.5).abs() < 1e-10);

        let f = GridFunction::green_atom(g, 1, 0.0, 1.0)
            .add(&s.sys().p_combination(&[2.0]).unwrap())
            .unwrap();
        let d = decompose(&s, &f).unwrap();
        assert_eq!(
            d.w.atoms(),
            &[Atom {
                center: 0.0,
                weight: 1.0,
                derivative: 0
            }]
        );
        assert!((d.p_coeffs[0] - 2.0).abs() < 1e-12);
        assert!(d.residual <= 1e-12);

        let l2 = spec(1, PrimaryNorm::L2, true);
        let ramp = GridFunction::from_fn(g, |x| x);
        assert!(matches!(decompose(&l2, &ramp), Err(Error::NonMember(_))));
    }

    #[test]
    fn decompose_sampled_reconstructs() {
        let s = spec(2, PrimaryNorm::L2, false);
        let g = *s.grid();
        let f = GridFunction::from_fn(g, |x| (-(x - 1.0) * (x - 1.0)).exp() + 0.3 - 0.2 * x);
        let d = decompose(&s, &f).unwrap();
        assert!(d.residual <= RECONSTRUCTION_TOL, "{}", d.residual);
    }

    #[test]
    fn suite_rejects_zero_trials() {
        let s = spec(1, PrimaryNorm::L2, true);
        assert!(identity_suite(&s, 0, 1).is_err());
    }

    #[test]
    fn suite_passes_small() {
        for (m, p, gauss) in [
            (1, PrimaryNorm::L2, true),
            (2, PrimaryNorm::M, false),
            (2, PrimaryNorm::Lp(3.0), false),
        ] {
            let s = spec(m, p, gauss);
            let rep = identity_suite(&s, 5, 11).unwrap();
            assert!(rep.passed(), "m={m} {p:?}: {:#?}", rep.invariants);
        }
    }

    #[test]
    fn suite_with_delta_phi() {
        let g = Grid::default();
        let op = make_derivative_operator(2).unwrap();
        let sys = BiorthoSystem::delta_derivatives(g, 2).unwrap();
        let s = NativeSpaceSpec::new(op, sys, PrimaryNorm::L2).unwrap();
        let rep = identity_suite(&s, 5, 3).unwrap();
        assert!(rep.passed(), "{:#?}", rep.invariants);
    }

    #[test]
    fn equivalence_constants_bound_ratios() {
        let s = spec(2, PrimaryNorm::M, false);
        let g = *s.grid();
        let shifted = gaussian_moment_phis(g, 2, 0.5).unwrap();
        let (other, info) = change_system(&s, shifted, 1e-6).unwrap();
        let (a1, a2) = (info.a1.unwrap(), info.a2.unwrap());
        assert!(a1 > 0.0 && a1 <= 1.0 && a2 >= 1.0);
        let mut rng = trial_rng(5, 0);
        for _ in 0..20 {
            let atoms = random_atoms(g, &mut rng);
            let f = canonical_inverse(s.op(), &atoms).unwrap();
            let n = native_norm(&s, &f).unwrap();
            let nt = native_norm(&other, &f).unwrap();
            assert_eq!(n.lf_norm.to_bits(), nt.lf_norm.to_bits());
            assert!(a1 * n.value <= nt.value && nt.value <= a2 * n.value);
        }
    }

    #[test]
    fn merge_atoms_sums_by_center() {
        let a = [
            Atom { center: 1.0, weight: 2.0, derivative: 0 },
            Atom { center: -1.0, weight: 1.0, derivative: 0 },
            Atom { center: 1.0, weight: -2.0, derivative: 0 },
            Atom { center: 1.0, weight: 1.0, derivative: 1 },
        ];
        let m = merge_atoms(&a);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].center, -1.0);
        assert_eq!(m[1].derivative, 1);
    }
}
