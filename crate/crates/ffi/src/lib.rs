//! C ABI for `nativespline`.
//!
//! Objects are opaque handles created by `ns_*_new` / `ns_solve_*` and
//! released with the matching `ns_*_free`. Every fallible call returns an
//! [`NsStatus`]; on failure a message is available from
//! [`ns_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nativespline::biortho::BiorthoSystem;
use nativespline::gridfn::Grid;
use nativespline::native::{identity_suite, NativeSpaceSpec, PrimaryNorm};
use nativespline::operator::{green, make_derivative_operator, OperatorDescriptor};
use nativespline::solve::{
    conditional_pd_check, default_knot_grid, evaluate_solution, kernel_h, solve_gtv, solve_l2,
    DataSet, GtvConfig, Solution,
};
use nativespline::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A mathematical precondition failed (biorthogonality, admissibility, membership).
    Domain = 3,
    /// Singular system, non-convergence or another solver failure.
    Solver = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Primary norm of a native space.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsPrimary {
    L2 = 0,
    Measure = 1,
    Lp = 2,
}

/// Analysis functionals of a native space.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsPhi {
    HermiteGaussian = 0,
    Gaussian = 1,
    Delta = 2,
}

/// Opaque derivative operator `D^m`.
pub struct NsOperator(OperatorDescriptor);

/// Opaque interpolation solution.
pub struct NsSolution {
    op: OperatorDescriptor,
    sol: Solution,
}

/// Opaque native-space specification on the default grid.
pub struct NsSpace(NativeSpaceSpec);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NsStatus {
    match e {
        Error::InvalidGrid(_)
        | Error::GridMismatch
        | Error::SampleLength { .. }
        | Error::AtomOutsideGrid(_)
        | Error::UnsupportedOrder(_)
        | Error::UnsupportedForm(_)
        | Error::InvalidArgument(_)
        | Error::LengthMismatch(..)
        | Error::InvalidData(_)
        | Error::Underdetermined { .. }
        | Error::InsufficientResolution { .. } => NsStatus::InvalidArgument,
        Error::DistributionPairing
        | Error::NotSampled
        | Error::NotBiorthogonal { .. }
        | Error::OutsideNullSpace(_)
        | Error::IllConditioned(_)
        | Error::DivergentMoments(_)
        | Error::NonMember(_)
        | Error::PhiNotAdmissible(_) => NsStatus::Domain,
        Error::SingularSystem | Error::NonConvergence(_) | Error::Internal(_) => NsStatus::Solver,
    }
}

fn guard<F: FnOnce() -> Result<(), (NsStatus, String)>>(f: F) -> NsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside nativespline".into());
            NsStatus::Panic
        }
    }
}

type Failure = (NsStatus, String);

fn lib(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> Failure {
    (NsStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(name))
}

unsafe fn get<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(name))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes) and returns the full message length excluding
/// the NUL. Returns 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ns_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates `D^m` for `1 <= m <= 4`.
///
/// # Safety
/// `out_op` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ns_operator_new(m: u32, out_op: *mut *mut NsOperator) -> NsStatus {
    guard(|| {
        let slot = out(out_op, "out_op")?;
        let op = make_derivative_operator(m).map_err(lib)?;
        *slot = Box::into_raw(Box::new(NsOperator(op)));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from [`ns_operator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ns_operator_free(op: *mut NsOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Green's function `sign(x) x^(m-1) / (2 (m-1)!)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_green(op: *const NsOperator, x: f64, value: *mut f64) -> NsStatus {
    guard(|| {
        let op = get(op, "op")?;
        *out(value, "value")? = green(&op.0, x);
        Ok(())
    })
}

/// Interpolation kernel `(-1)^m |x - y|^(2m-1) / (2 (2m-1)!)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_kernel(op: *const NsOperator, x: f64, y: f64, value: *mut f64) -> NsStatus {
    guard(|| {
        let op = get(op, "op")?;
        *out(value, "value")? = kernel_h(&op.0, x, y);
        Ok(())
    })
}

unsafe fn data(xs: *const f64, ys: *const f64, len: usize) -> Result<DataSet, Failure> {
    let xs = slice(xs, len, "xs")?;
    let ys = slice(ys, len, "ys")?;
    DataSet::new(xs.iter().copied().zip(ys.iter().copied()).collect()).map_err(lib)
}

/// Minimum-`||D^m f||_2` interpolant of `(xs[i], ys[i])`.
///
/// # Safety
/// `xs` and `ys` must point to `len` doubles; `out_sol` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_solve_l2(
    op: *const NsOperator,
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out_sol: *mut *mut NsSolution,
) -> NsStatus {
    guard(|| {
        let op = get(op, "op")?;
        let slot = out(out_sol, "out_sol")?;
        let sol = solve_l2(&op.0, &data(xs, ys, len)?).map_err(lib)?;
        *slot = Box::into_raw(Box::new(NsSolution { op: op.0.clone(), sol }));
        Ok(())
    })
}

/// Minimum-total-variation (`||D^m f||_M`) interpolant with candidate knots
/// `knot_density` per data point (0 selects the default).
///
/// # Safety
/// As [`ns_solve_l2`].
#[no_mangle]
pub unsafe extern "C" fn ns_solve_gtv(
    op: *const NsOperator,
    xs: *const f64,
    ys: *const f64,
    len: usize,
    knot_density: u32,
    out_sol: *mut *mut NsSolution,
) -> NsStatus {
    guard(|| {
        let op = get(op, "op")?;
        let slot = out(out_sol, "out_sol")?;
        let d = data(xs, ys, len)?;
        let mut cfg = GtvConfig::default();
        if knot_density > 0 {
            cfg.knot_density = knot_density as usize;
        }
        let grid = default_knot_grid(&d, cfg.knot_density).map_err(lib)?;
        let sol = solve_gtv(&op.0, &d, &grid, &cfg).map_err(lib)?;
        *slot = Box::into_raw(Box::new(NsSolution { op: op.0.clone(), sol }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from a solver not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ns_solution_free(sol: *mut NsSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Objective value, interpolation residual and knot count.
///
/// # Safety
/// `sol` must be valid; each output may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn ns_solution_summary(
    sol: *const NsSolution,
    objective: *mut f64,
    residual: *mut f64,
    knot_count: *mut usize,
) -> NsStatus {
    guard(|| {
        let s = &get(sol, "sol")?.sol;
        if let Some(o) = objective.as_mut() {
            *o = s.objective;
        }
        if let Some(r) = residual.as_mut() {
            *r = s.residual;
        }
        if let Some(k) = knot_count.as_mut() {
            *k = s.knots.len();
        }
        Ok(())
    })
}

/// Copies knots and weights into arrays of capacity `cap`. Fails with
/// `BufferTooSmall` when `cap` is below the knot count.
///
/// # Safety
/// `knots` and `weights` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_solution_knots(
    sol: *const NsSolution,
    knots: *mut f64,
    weights: *mut f64,
    cap: usize,
) -> NsStatus {
    guard(|| {
        let s = &get(sol, "sol")?.sol;
        let n = s.knots.len();
        if cap < n {
            return Err((NsStatus::BufferTooSmall, format!("need room for {n} knots")));
        }
        slice_mut(knots, n, "knots")?.copy_from_slice(&s.knots);
        slice_mut(weights, n, "weights")?.copy_from_slice(&s.weights);
        Ok(())
    })
}

/// Copies the `m` null-space coefficients into `coeffs` (capacity `cap`).
///
/// # Safety
/// `coeffs` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_solution_null_coeffs(sol: *const NsSolution, coeffs: *mut f64, cap: usize) -> NsStatus {
    guard(|| {
        let s = &get(sol, "sol")?.sol;
        let n = s.null_coeffs.len();
        if cap < n {
            return Err((NsStatus::BufferTooSmall, format!("need room for {n} coefficients")));
        }
        slice_mut(coeffs, n, "coeffs")?.copy_from_slice(&s.null_coeffs);
        Ok(())
    })
}

/// Evaluates the interpolant at `xs[0..len]` into `values[0..len]`.
///
/// # Safety
/// `xs` must point to `len` doubles and `values` to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_solution_evaluate(
    sol: *const NsSolution,
    xs: *const f64,
    len: usize,
    values: *mut f64,
) -> NsStatus {
    guard(|| {
        let s = get(sol, "sol")?;
        let xs = slice(xs, len, "xs")?;
        slice_mut(values, len, "values")?.copy_from_slice(&evaluate_solution(&s.sol, &s.op, xs));
        Ok(())
    })
}

/// Smallest kernel quadratic form over `trials` random unit vectors that
/// annihilate the null space at `points`; positive means conditionally
/// positive definite on the sample.
///
/// # Safety
/// `points` must point to `len` doubles; `min_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_conditional_pd_min(
    op: *const NsOperator,
    points: *const f64,
    len: usize,
    trials: u32,
    seed: u64,
    min_value: *mut f64,
) -> NsStatus {
    guard(|| {
        let op = get(op, "op")?;
        let pts = slice(points, len, "points")?;
        let slot = out(min_value, "min_value")?;
        *slot = conditional_pd_check(&op.0, pts, trials, seed).map_err(lib)?.min_value;
        Ok(())
    })
}

/// Native space of `D^m` on the default grid `[-12, 12]`, 4801 nodes.
/// `p` is read only for `NS_PRIMARY_LP`.
///
/// # Safety
/// `out_space` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_space_new(
    m: u32,
    primary: NsPrimary,
    p: f64,
    phi: NsPhi,
    out_space: *mut *mut NsSpace,
) -> NsStatus {
    guard(|| {
        let slot = out(out_space, "out_space")?;
        let op = make_derivative_operator(m).map_err(lib)?;
        let grid = Grid::default();
        let n0 = op.null_dim();
        let sys = match phi {
            NsPhi::HermiteGaussian => BiorthoSystem::hermite_gaussian(grid, n0),
            NsPhi::Gaussian => BiorthoSystem::gaussian_monomial(grid, n0),
            NsPhi::Delta => BiorthoSystem::delta_derivatives(grid, n0),
        }
        .map_err(lib)?;
        let primary = match primary {
            NsPrimary::L2 => PrimaryNorm::L2,
            NsPrimary::Measure => PrimaryNorm::M,
            NsPrimary::Lp => PrimaryNorm::new_lp(p).map_err(lib)?,
        };
        let spec = NativeSpaceSpec::new(op, sys, primary).map_err(lib)?;
        *slot = Box::into_raw(Box::new(NsSpace(spec)));
        Ok(())
    })
}

/// # Safety
/// `space` must be null or a handle from [`ns_space_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ns_space_free(space: *mut NsSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Runs the randomized identity suite; `passed` receives 1 if every
/// invariant holds, else 0, and `failed_count` the number of failures.
///
/// # Safety
/// Pointers must be valid; `failed_count` may be null.
#[no_mangle]
pub unsafe extern "C" fn ns_identity_suite(
    space: *const NsSpace,
    trials: u32,
    seed: u64,
    passed: *mut i32,
    failed_count: *mut usize,
) -> NsStatus {
    guard(|| {
        let space = get(space, "space")?;
        let slot = out(passed, "passed")?;
        let report = identity_suite(&space.0, trials, seed).map_err(lib)?;
        *slot = report.passed() as i32;
        if let Some(f) = failed_count.as_mut() {
            *f = report.invariants.iter().filter(|r| !r.pass).count();
        }
        Ok(())
    })
}
