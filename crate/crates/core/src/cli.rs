//! Problem-file driven front end behind the `nativespline` binary.
//!
//! Exit codes: 0 when every check passes, 1 on a domain failure (a failed
//! check, a solver error), 2 on usage or parse errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::biortho::{gaussian_moment_phis, BiorthoSystem, GRAM_TOL};
use crate::gridfn::{Grid, GridFunction, DEFAULT_HALF_WIDTH, DEFAULT_NODES};
use crate::native::{
    equivalence_suite, identity_suite, native_norm, projector_suite, InvariantResult, NativeNorm,
    NativeSpaceSpec, PrimaryNorm,
};
use crate::operator::{
    admissibility_check, apply, gaussian_bank, make_derivative_operator, AdmissibilityReport,
    OperatorDescriptor,
};
use crate::solve::{
    conditional_pd_check, default_knot_grid, solution_function, solve_gtv, solve_l2, DataSet,
    GtvConfig, GtvMethod, PdReport, Solution,
};
use crate::Error;

/// Only accepted problem-file version.
pub const PROBLEM_VERSION: u32 = 1;
/// Seed used when neither the problem file nor the command line gives one.
pub const DEFAULT_SEED: u64 = 7;
/// Random directions sampled by the conditional positivity check.
pub const PD_TRIALS: u32 = 1000;

#[derive(Debug, Parser)]
#[command(name = "nativespline", version, about = "Native-space checks and spline interpolation for derivative operators")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Global overrides applied on top of the problem file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Number of grid nodes.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    /// Half-width T of the symmetric grid [-T, T].
    #[arg(long, global = true)]
    pub grid_t: Option<f64>,
    /// Biorthogonality tolerance on max |Gram - I|.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Admissibility, biorthogonality and conditional positivity checks.
    Check {
        problem: PathBuf,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Solve the interpolation problem and write the solution.
    Solve {
        problem: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
    /// Randomized identity suite.
    Suite {
        problem: PathBuf,
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
        trials: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorSpec {
    Derivative { order: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum SpaceSpec {
    #[default]
    L2,
    M,
    Lp(f64),
}

impl SpaceSpec {
    fn primary(self) -> Result<PrimaryNorm, Error> {
        Ok(match self {
            SpaceSpec::L2 => PrimaryNorm::L2,
            SpaceSpec::M => PrimaryNorm::M,
            SpaceSpec::Lp(p) => PrimaryNorm::new_lp(p)?,
        })
    }
}

/// Analysis functionals `phi_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PhiSpec {
    /// Hermite functions paired with orthonormal Hermite polynomials.
    #[default]
    HermiteGaussian,
    /// Gaussian-weighted duals of the monomials.
    Gaussian,
    /// Gaussian-weighted monomial duals centred at the given shift.
    ShiftedGaussian(f64),
    /// `(-1)^(n-1) delta^(n-1)` at the origin.
    Delta,
    /// CSV with header `x,phi1,..,phiN` sampled on the problem grid, paired
    /// with the monomials `1, x, ..`. Relative paths resolve against the
    /// problem file.
    Samples(PathBuf),
}

impl PhiSpec {
    fn name(&self) -> String {
        match self {
            PhiSpec::HermiteGaussian => "hermite-gaussian".into(),
            PhiSpec::Gaussian => "gaussian".into(),
            PhiSpec::ShiftedGaussian(s) => format!("shifted-gaussian({s})"),
            PhiSpec::Delta => "delta".into(),
            PhiSpec::Samples(p) => format!("samples({})", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub method: GtvMethod,
    pub knot_density: usize,
    pub max_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub rho: f64,
    pub seed: Option<u64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let g = GtvConfig::default();
        Self {
            method: g.method,
            knot_density: g.knot_density,
            max_iter: g.max_iter,
            abs_tol: g.abs_tol,
            rel_tol: g.rel_tol,
            rho: g.rho,
            seed: None,
        }
    }
}

impl SolverSpec {
    fn gtv(&self) -> GtvConfig {
        GtvConfig {
            method: self.method,
            knot_density: self.knot_density,
            max_iter: self.max_iter,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            rho: self.rho,
        }
    }
}

/// JSON problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub space: SpaceSpec,
    #[serde(default)]
    pub phi: PhiSpec,
    /// Second system for norm-equivalence checks in `suite`.
    #[serde(default)]
    pub phi_alt: Option<PhiSpec>,
    #[serde(default)]
    pub data: Vec<[f64; 2]>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub xmin: f64,
    pub xmax: f64,
    pub n: usize,
    pub dx: f64,
    /// Truncation half-width `max(|xmin|, |xmax|)`; every norm is measured on this window.
    pub truncation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub order: u32,
    pub space: String,
    pub phi: String,
    pub grid: GridReport,
    pub gram_tol: f64,
    pub seed: u64,
    pub trials: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub phi_alt: String,
    pub b1: f64,
    pub b2: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub condition: f64,
}

/// Machine-readable result of one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub pass: bool,
    pub message: Option<String>,
    pub provenance: Provenance,
    pub invariants: Vec<InvariantResult>,
    pub admissibility: Option<AdmissibilityReport>,
    pub positivity: Option<PdReport>,
    pub norms: Option<NativeNorm>,
    pub solution: Option<Solution>,
    pub equivalence: Option<EquivalenceReport>,
}

impl RunReport {
    fn finish(mut self) -> Self {
        self.pass = self.message.is_none() && self.invariants.iter().all(|r| r.pass);
        self
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Failure that prevents a report from being produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// A parsed problem with overrides applied.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ProblemFile,
    pub dir: PathBuf,
    pub grid: Grid,
    pub gram_tol: f64,
    pub op: OperatorDescriptor,
}

impl Problem {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let file: ProblemFile =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_file(file, dir, ov)
    }

    pub fn from_file(file: ProblemFile, dir: PathBuf, ov: &Overrides) -> Result<Self, CliError> {
        if file.version != PROBLEM_VERSION {
            return Err(CliError::usage(format!("unsupported problem version {} (expected {PROBLEM_VERSION})", file.version)));
        }
        let OperatorSpec::Derivative { order } = file.operator;
        let op = make_derivative_operator(order).map_err(|e| CliError::usage(e.to_string()))?;
        let base = file.grid.unwrap_or(GridSpec { xmin: -DEFAULT_HALF_WIDTH, xmax: DEFAULT_HALF_WIDTH, n: DEFAULT_NODES });
        let (xmin, xmax) = match ov.grid_t {
            Some(t) => (-t, t),
            None => (base.xmin, base.xmax),
        };
        let n = ov.grid_n.unwrap_or(base.n);
        let grid = Grid::new(xmin, xmax, n).map_err(|e| CliError::usage(e.to_string()))?;
        let gram_tol = ov.tol.unwrap_or(GRAM_TOL);
        if !(gram_tol > 0.0) {
            return Err(CliError::usage("--tol must be positive"));
        }
        if let SpaceSpec::Lp(p) = file.space {
            PrimaryNorm::new_lp(p).map_err(|e| CliError::usage(e.to_string()))?;
        }
        if let Some([x, _]) = file.data.iter().find(|[x, _]| !grid.contains(*x)) {
            return Err(CliError::usage(format!("data site {x} lies outside the grid")));
        }
        Ok(Self { file, dir, grid, gram_tol, op })
    }

    pub fn seed(&self, cli_seed: Option<u64>) -> u64 {
        cli_seed.or(self.file.solver.seed).unwrap_or(DEFAULT_SEED)
    }

    fn provenance(&self, seed: u64, trials: Option<u32>) -> Provenance {
        let g = self.grid;
        Provenance {
            version: env!("CARGO_PKG_VERSION").into(),
            order: self.op.order(),
            space: match self.file.space {
                SpaceSpec::L2 => "L2".into(),
                SpaceSpec::M => "M".into(),
                SpaceSpec::Lp(p) => format!("Lp({p})"),
            },
            phi: self.file.phi.name(),
            grid: GridReport {
                xmin: g.x_min(),
                xmax: g.x_max(),
                n: g.len(),
                dx: g.dx(),
                truncation: g.x_min().abs().max(g.x_max().abs()),
            },
            gram_tol: self.gram_tol,
            seed,
            trials,
        }
    }

    fn phis_and_ps(&self, phi: &PhiSpec) -> Result<(Vec<GridFunction>, Vec<GridFunction>), CliError> {
        let n0 = self.op.null_dim();
        let domain = |e: Error| CliError { code: 1, message: e.to_string() };
        let split = |s: BiorthoSystem| (s.phis().to_vec(), s.ps().to_vec());
        Ok(match phi {
            PhiSpec::HermiteGaussian => split(BiorthoSystem::hermite_gaussian(self.grid, n0).map_err(domain)?),
            PhiSpec::Gaussian => split(BiorthoSystem::gaussian_monomial(self.grid, n0).map_err(domain)?),
            PhiSpec::Delta => split(BiorthoSystem::delta_derivatives(self.grid, n0).map_err(domain)?),
            PhiSpec::ShiftedGaussian(s) => (
                gaussian_moment_phis(self.grid, n0, *s).map_err(domain)?,
                self.op.null_basis_functions(self.grid),
            ),
            PhiSpec::Samples(path) => {
                (read_phi_csv(&self.dir.join(path), &self.grid, n0)?, self.op.null_basis_functions(self.grid))
            }
        })
    }

    /// The configured system, without judging its Gram matrix.
    pub fn system(&self) -> Result<BiorthoSystem, CliError> {
        let (phis, ps) = self.phis_and_ps(&self.file.phi)?;
        BiorthoSystem::unchecked(phis, ps).map_err(|e| CliError { code: 1, message: e.to_string() })
    }

    pub fn data(&self) -> Result<DataSet, CliError> {
        DataSet::new(self.file.data.iter().map(|[x, y]| (*x, *y)).collect())
            .map_err(|e| CliError { code: 1, message: e.to_string() })
    }

    fn pd_points(&self) -> Vec<f64> {
        let n0 = self.op.null_dim();
        if self.file.data.len() > n0 {
            self.file.data.iter().map(|p| p[0]).collect()
        } else {
            let k = 2 * n0 + 1;
            (0..k).map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64).collect()
        }
    }
}

/// Reads `x,phi1,..,phiN` samples; the `x` column must reproduce the grid nodes.
pub fn read_phi_csv(path: &Path, grid: &Grid, n0: usize) -> Result<Vec<GridFunction>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let bad = |msg: String| CliError::usage(format!("{}: {msg}", path.display()));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').map(str::trim).collect();
    if header.first() != Some(&"x") || header.len() != n0 + 1 {
        return Err(bad(format!("header must be x followed by {n0} phi columns")));
    }
    let mut cols = vec![Vec::with_capacity(grid.len()); n0];
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if vals.len() != n0 + 1 {
            return Err(bad(format!("row {} has {} fields", i + 1, vals.len())));
        }
        if i >= grid.len() || (vals[0] - grid.x(i)).abs() > 1e-9 * (1.0 + grid.x(i).abs()) {
            return Err(bad(format!("row {} does not match grid node", i + 1)));
        }
        for (c, v) in cols.iter_mut().zip(&vals[1..]) {
            c.push(*v);
        }
    }
    if cols[0].len() != grid.len() {
        return Err(bad(format!("{} rows for a {}-node grid", cols[0].len(), grid.len())));
    }
    cols.into_iter()
        .map(|c| GridFunction::from_samples(*grid, c).map_err(|e| bad(e.to_string())))
        .collect()
}

fn empty_report(command: &str, prov: Provenance) -> RunReport {
    RunReport {
        command: command.into(),
        pass: false,
        message: None,
        provenance: prov,
        invariants: Vec::new(),
        admissibility: None,
        positivity: None,
        norms: None,
        solution: None,
        equivalence: None,
    }
}

fn flag(name: &str, ok: bool) -> InvariantResult {
    InvariantResult::at_most(name, if ok { 0.0 } else { 1.0 }, 0.0)
}

/// Records the Gram deviation and, if it passes, builds the native-space spec.
fn spec_with_checks(problem: &Problem, report: &mut RunReport) -> Result<Option<NativeSpaceSpec>, CliError> {
    let sys = problem.system()?;
    let dev = sys.gram_deviation();
    report.invariants.push(InvariantResult::at_most("biorthogonality", dev, problem.gram_tol));
    if !(dev <= problem.gram_tol) {
        report.message = Some(format!("phi and p are not biorthogonal: max |Gram - I| = {dev:e}"));
        return Ok(None);
    }
    let primary = problem.file.space.primary().map_err(|e| CliError::usage(e.to_string()))?;
    match NativeSpaceSpec::new(problem.op.clone(), sys, primary) {
        Ok(spec) => {
            report.invariants.push(flag("native_space_spec", true));
            Ok(Some(spec))
        }
        Err(e) => {
            report.invariants.push(flag("native_space_spec", false));
            report.message = Some(e.to_string());
            Ok(None)
        }
    }
}

fn positivity(problem: &Problem, seed: u64, report: &mut RunReport) -> Result<(), CliError> {
    let pd = conditional_pd_check(&problem.op, &problem.pd_points(), PD_TRIALS, seed)
        .map_err(|e| CliError { code: 1, message: e.to_string() })?;
    report.invariants.push(InvariantResult::above("conditional_positivity", pd.min_value, 0.0));
    report.invariants.push(flag("kernel_symmetry", pd.symmetric));
    report.positivity = Some(pd);
    Ok(())
}

/// Admissibility of the operator, biorthogonality of the system and
/// conditional positivity of the kernel.
pub fn cmd_check(problem: &Problem) -> Result<RunReport, CliError> {
    let seed = problem.seed(None);
    let mut report = empty_report("check", problem.provenance(seed, None));
    let adm = admissibility_check(&problem.op, &gaussian_bank(problem.grid))
        .map_err(|e| CliError { code: 1, message: e.to_string() })?;
    report.invariants.push(InvariantResult::at_most("null_space_annihilation", adm.null_residual, adm.null_tol));
    report.invariants.push(InvariantResult::at_most("left_inverse", adm.left_inverse_residual, adm.inverse_tol));
    report.invariants.push(InvariantResult::at_most("adjoint_left_inverse", adm.adjoint_inverse_residual, adm.inverse_tol));
    report.invariants.push(flag("admissibility", adm.passed()));
    report.admissibility = Some(adm);
    spec_with_checks(problem, &mut report)?;
    positivity(problem, seed, &mut report)?;
    Ok(report.finish())
}

/// Solution samples on the problem grid as CSV `x,f,Lf` (regular part of `Lf`).
pub fn solution_csv(problem: &Problem, sol: &Solution) -> Result<String, CliError> {
    let f = solution_function(sol, &problem.op, problem.grid);
    let lf = apply(&problem.op, &f).map_err(|e| CliError { code: 1, message: e.to_string() })?;
    let mut out = String::from("x,f,Lf\n");
    for i in 0..problem.grid.len() {
        writeln!(out, "{},{},{}", problem.grid.x(i), f.samples()[i], lf.samples()[i]).expect("string write");
    }
    Ok(out)
}

/// Solves the interpolation problem: the kernel solver for `L2` (and `Lp`
/// with `p = 2`), the sparse solver for `M`.
pub fn cmd_solve(problem: &Problem) -> Result<(RunReport, Option<String>), CliError> {
    let seed = problem.seed(None);
    let mut report = empty_report("solve", problem.provenance(seed, None));
    let spec = spec_with_checks(problem, &mut report)?;
    let data = match problem.data() {
        Ok(d) => d,
        Err(e) => {
            report.message = Some(e.message);
            return Ok((report.finish(), None));
        }
    };
    let solved = match problem.file.space {
        SpaceSpec::L2 => solve_l2(&problem.op, &data),
        SpaceSpec::Lp(2.0) => solve_l2(&problem.op, &data),
        SpaceSpec::Lp(p) => Err(Error::InvalidArgument(format!("no solver for Lp with p = {p}; use L2 or M"))),
        SpaceSpec::M => {
            let cfg = problem.file.solver.gtv();
            default_knot_grid(&data, cfg.knot_density).and_then(|g| solve_gtv(&problem.op, &data, &g, &cfg))
        }
    };
    let sol = match solved {
        Ok(s) => s,
        Err(e) => {
            report.message = Some(e.to_string());
            return Ok((report.finish(), None));
        }
    };
    let csv = solution_csv(problem, &sol)?;
    if let Some(spec) = &spec {
        let f = solution_function(&sol, &problem.op, problem.grid);
        report.norms = native_norm(spec, &f).ok();
    }
    report.solution = Some(sol);
    Ok((report.finish(), Some(csv)))
}

/// Identity suite, projector algebra, biorthogonality, conditional
/// positivity and (with `phi_alt`) norm equivalence.
pub fn cmd_suite(problem: &Problem, trials: u32, seed: Option<u64>) -> Result<RunReport, CliError> {
    if trials == 0 {
        return Err(CliError::usage("trials must be at least 1"));
    }
    let seed = problem.seed(seed);
    let mut report = empty_report("suite", problem.provenance(seed, Some(trials)));
    let domain = |e: Error| CliError { code: 1, message: e.to_string() };
    if let Some(spec) = spec_with_checks(problem, &mut report)? {
        let ids = identity_suite(&spec, trials, seed).map_err(domain)?;
        report.invariants.extend(ids.invariants);
        report.invariants.extend(projector_suite(spec.sys(), trials, seed).map_err(domain)?);
        if let Some(alt) = &problem.file.phi_alt {
            let (phis, _) = problem.phis_and_ps(alt)?;
            let (info, inv) = equivalence_suite(&spec, phis, problem.gram_tol, trials, seed).map_err(domain)?;
            report.invariants.extend(inv);
            report.equivalence = Some(EquivalenceReport {
                phi_alt: alt.name(),
                b1: info.b1,
                b2: info.b2,
                a1: info.a1,
                a2: info.a2,
                condition: info.condition,
            });
        }
    }
    positivity(problem, seed, &mut report)?;
    Ok(report.finish())
}

pub fn report_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn summary(report: &RunReport) -> String {
    let mut out = String::new();
    for r in &report.invariants {
        let verdict = if r.pass { "pass" } else { "FAIL" };
        writeln!(out, "{verdict} {:<34} {:e} (threshold {:e})", r.name, r.value, r.threshold).unwrap();
    }
    if let Some(sol) = &report.solution {
        writeln!(out, "objective {}", sol.objective).unwrap();
        writeln!(out, "residual {:e}", sol.residual).unwrap();
        if let Some(lb) = sol.lower_bound {
            writeln!(out, "lower_bound {lb}").unwrap();
        }
        writeln!(out, "knots {}", sol.knots.len()).unwrap();
        writeln!(out, "{:>24} {:>24}", "tau", "a").unwrap();
        for (t, a) in sol.knots.iter().zip(&sol.weights) {
            writeln!(out, "{t:>24} {a:>24}").unwrap();
        }
        writeln!(out, "null_coeffs {:?}", sol.null_coeffs).unwrap();
    }
    if let Some(msg) = &report.message {
        writeln!(out, "error: {msg}").unwrap();
    }
    writeln!(out, "{}", if report.pass { "PASS" } else { "FAIL" }).unwrap();
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// Runs a parsed command line, printing a summary to stdout; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let ov = cli.overrides;
    let (report, out_json) = match cli.command {
        Command::Check { problem, out_json } => (cmd_check(&Problem::load(&problem, &ov)?)?, out_json),
        Command::Solve { problem, out_csv, out_json } => {
            let (report, csv) = cmd_solve(&Problem::load(&problem, &ov)?)?;
            if let (Some(path), Some(csv)) = (&out_csv, &csv) {
                write_file(path, csv)?;
            }
            (report, out_json)
        }
        Command::Suite { problem, trials, seed, out_json } => {
            (cmd_suite(&Problem::load(&problem, &ov)?, trials, seed)?, out_json)
        }
    };
    if let Some(path) = out_json {
        write_file(&path, &report_json(&report))?;
    }
    print!("{}", summary(&report));
    Ok(report.exit_code())
}
