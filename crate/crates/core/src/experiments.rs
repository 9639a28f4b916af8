//! Convergence studies at `t = 0.5` and the structural assumption report.
//!
//! The smooth initial value `η = L⁻⁴η₀ / ‖L⁻⁴η₀‖_∞` is resolved once on a
//! fine grid; every coarser grid starts from its nodal interpolant. Errors are
//! measured in the lumped norm of a fine reference grid after exact
//! prolongation of the coarse solution.

use std::fmt;
use std::fmt::Write as _;
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{Field, Function1D, Function2D, Grid};
use crate::linsolve::{power_iteration, LinearSolver, LinearSolverHandle, SolverMethod};
use crate::operators::SplitDiffusionOperator;
use crate::oracle::{exact_l2_norm, l2_distance};
use crate::problem::{paper_initial_function, CoefficientSet};
use crate::steppers::{evolve, steps_for, Scheme, SplitOperator};

/// Grids at or above this size use the Kronecker direct solver for `L_h⁻¹`.
pub const DIRECT_SOLVER_MIN_M: usize = 64;

/// Spatial order `s` and projection index `q` of the quadrature finite elements.
pub const SPATIAL_ORDER: u32 = 2;
pub const PROJECTION_Q: u32 = 1;

/// One `(k, h = 1/m)` pair of a study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub k: f64,
    pub m: usize,
}

impl Row {
    pub fn new(k: f64, m: usize) -> Self {
        Row { k, m }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }
}

/// PR rows with `h = k`, from `1/16` to `1/512`.
pub fn paper_pr_rows() -> Vec<Row> {
    (4..=9).map(|e| Row::new(2f64.powi(-e), 1 << e)).collect()
}

/// DR rows with `h ≈ sqrt(k)`.
pub fn paper_dr_rows() -> Vec<Row> {
    [16, 23, 32, 45, 64, 91]
        .into_iter()
        .zip(7..=12)
        .map(|(m, e)| Row::new(2f64.powi(-e), m))
        .collect()
}

/// Errors listed for [`paper_pr_rows`] and [`paper_dr_rows`] in the published table.
pub const PAPER_PR_ERRORS: [f64; 6] = [9.1e-4, 2.9e-4, 7.5e-5, 1.9e-5, 4.6e-6, 1.1e-6];
pub const PAPER_DR_ERRORS: [f64; 6] = [5.3e-4, 3.0e-4, 1.5e-4, 7.8e-5, 3.9e-5, 1.9e-5];

/// DR grid size for step `k` under the `h ∝ sqrt(k)` coupling, `m = round(sqrt(2/k))`.
pub fn dr_grid_for(k: f64) -> usize {
    (2.0 / k).sqrt().round() as usize
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSpec {
    pub m: usize,
    pub k: f64,
    pub scheme: Scheme,
}

impl Default for ReferenceSpec {
    /// PR at `h = 2⁻¹⁰`, `k = 2⁻¹³`.
    fn default() -> Self {
        ReferenceSpec {
            m: 1024,
            k: 2f64.powi(-13),
            scheme: Scheme::PeacemanRachford,
        }
    }
}

#[derive(Clone, Debug)]
pub enum InitialData {
    /// `L_h⁻⁴ P_h η₀` normalized to unit max-norm.
    Paper,
    /// An explicit field, prolonged onto the target grid.
    Field(Field),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub rows: Vec<Row>,
    pub t_end: f64,
    pub reference: ReferenceSpec,
    pub coefficients: CoefficientSet,
    pub initial: InitialData,
}

impl ExperimentConfig {
    pub fn paper_pr() -> Self {
        ExperimentConfig {
            scheme: Scheme::PeacemanRachford,
            rows: paper_pr_rows(),
            t_end: 0.5,
            reference: ReferenceSpec::default(),
            coefficients: CoefficientSet::Paper,
            initial: InitialData::Paper,
        }
    }

    pub fn paper_dr() -> Self {
        ExperimentConfig {
            scheme: Scheme::DouglasRachford,
            rows: paper_dr_rows(),
            ..Self::paper_pr()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return invalid("a convergence study needs at least one row");
        }
        for row in &self.rows {
            Grid::new(row.m)?;
            steps_for(self.t_end, row.k)?;
        }
        Grid::new(self.reference.m)?;
        steps_for(self.t_end, self.reference.k)?;
        Ok(())
    }
}

pub fn build_operator(coefficients: CoefficientSet, m: usize) -> Result<SplitDiffusionOperator> {
    let (lambda, mu) = coefficients.functions();
    SplitDiffusionOperator::assemble(&lambda, &mu, Grid::new(m)?)
}

/// CG on small grids, the Kronecker direct solver from [`DIRECT_SOLVER_MIN_M`] up.
pub fn default_solver(op: &SplitDiffusionOperator) -> Result<LinearSolver> {
    let method = if op.grid().m() >= DIRECT_SOLVER_MIN_M {
        SolverMethod::KroneckerDirect
    } else {
        SolverMethod::ConjugateGradient
    };
    LinearSolver::new(op, LinearSolverHandle::with_method(method))
}

/// Grid on which the smooth initial value `η = L⁻⁴η₀ / ‖L⁻⁴η₀‖_∞` is computed.
pub const ETA_GRID_M: usize = 1024;

/// `L_h⁻⁴ P_h g`, unnormalized.
pub fn smoothed_data(solver: &LinearSolver, g: &Function2D) -> Result<Field> {
    let mut w = Field::interpolate(solver.grid(), g);
    for _ in 0..4 {
        w = solver.solve_lh(&w)?;
    }
    Ok(w)
}

/// `η` on the [`ETA_GRID_M`] grid (`L_h⁻⁴ P_h η₀` divided by its nodal max),
/// together with that max. Computed once per coefficient set.
fn eta_on_fine_grid(coefficients: CoefficientSet) -> Result<&'static (Field, f64)> {
    static PAPER: OnceLock<(Field, f64)> = OnceLock::new();
    static CONSTANT: OnceLock<(Field, f64)> = OnceLock::new();
    let cell = match coefficients {
        CoefficientSet::Paper => &PAPER,
        CoefficientSet::Constant => &CONSTANT,
    };
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let op = build_operator(coefficients, ETA_GRID_M)?;
    let mut w = smoothed_data(&default_solver(&op)?, &paper_initial_function())?;
    let max = w.max_abs();
    if max == 0.0 {
        return invalid("smoothed initial data vanishes identically");
    }
    w.scale(1.0 / max);
    Ok(cell.get_or_init(|| (w, max)))
}

/// `η = L⁻⁴η₀ / ‖L⁻⁴η₀‖_∞`, resolved on the [`ETA_GRID_M`] grid.
pub fn initial_value(coefficients: CoefficientSet) -> Result<&'static Field> {
    Ok(&eta_on_fine_grid(coefficients)?.0)
}

/// The experiment's initial value on `grid`: the nodal interpolant `P_h η`.
///
/// Grids finer than [`ETA_GRID_M`] smooth `η₀` themselves and reuse the
/// normalization of [`initial_value`].
pub fn prepare_initial_data(coefficients: CoefficientSet, grid: Grid) -> Result<Field> {
    let (eta, max) = eta_on_fine_grid(coefficients)?;
    if grid.m() <= ETA_GRID_M {
        return Ok(eta.sample_on(grid));
    }
    let op = build_operator(coefficients, grid.m())?;
    let mut w = smoothed_data(&default_solver(&op)?, &paper_initial_function())?;
    w.scale(1.0 / max);
    Ok(w)
}

fn initial_for(coefficients: CoefficientSet, initial: &InitialData, grid: Grid) -> Result<Field> {
    match initial {
        InitialData::Paper => prepare_initial_data(coefficients, grid),
        InitialData::Field(f) => Ok(f.sample_on(grid)),
    }
}

/// `‖prolong(u_coarse) - u_ref‖_h` on the reference grid.
pub fn measure_error(u_coarse: &Field, u_ref: &Field) -> Result<f64> {
    Ok(u_coarse.prolong_to(u_ref.grid()).sub(u_ref)?.norm())
}

/// Observed orders `log₂(e_i / e_{i+1})` between consecutive rows.
pub fn observed_order(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return invalid("observed orders need at least two errors");
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return invalid(format!("errors must be positive, got {e}"));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Least-squares slope of `log y` against `log x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("slope fit needs two or more matching points");
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return invalid("slope fit needs positive data");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// A trajectory computed once on the reference grid.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub spec: ReferenceSpec,
    pub t_end: f64,
    pub field: Field,
    pub seconds: f64,
}

/// Runs one trajectory: builds `η_h` on grid `m`, then `n = t_end / k` steps.
pub fn run_trajectory(
    coefficients: CoefficientSet,
    initial: &InitialData,
    scheme: Scheme,
    m: usize,
    k: f64,
    t_end: f64,
) -> Result<Field> {
    let n = steps_for(t_end, k)?;
    let op = build_operator(coefficients, m)?;
    let u0 = initial_for(coefficients, initial, op.grid())?;
    match scheme {
        Scheme::CrankNicolson => {
            let cg = LinearSolver::conjugate_gradient(&op)?;
            evolve(&op, scheme, k, n, &u0, Some(&cg))
        }
        _ => evolve(&op, scheme, k, n, &u0, None),
    }
}

pub fn compute_reference(config: &ExperimentConfig) -> Result<ReferenceSolution> {
    let start = Instant::now();
    let spec = config.reference;
    let field = run_trajectory(
        config.coefficients,
        &config.initial,
        spec.scheme,
        spec.m,
        spec.k,
        config.t_end,
    )?;
    Ok(ReferenceSolution {
        spec,
        t_end: config.t_end,
        field,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub k: f64,
    pub m: usize,
    pub error: f64,
    /// Observed order between this row and the next one.
    pub order: Option<f64>,
    pub seconds: f64,
}

impl ReportRow {
    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub scheme: Scheme,
    pub t_end: f64,
    pub reference: ReferenceSpec,
    pub reference_seconds: f64,
    pub rows: Vec<ReportRow>,
}

impl ConvergenceReport {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    /// CSV with columns `k,h,error,order`; the last row has an empty order.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "k,h,error,order")?;
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.16e}")).unwrap_or_default();
            writeln!(w, "{:.16e},{:.16e},{:.16e},{}", r.k, r.h(), r.error, order)?;
        }
        Ok(())
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} study, t = {}, reference {} with h = 1/{}, k = {:e} ({:.1} s)",
            self.scheme.short_name().to_uppercase(),
            self.t_end,
            self.reference.scheme.short_name().to_uppercase(),
            self.reference.m,
            self.reference.k,
            self.reference_seconds
        )?;
        writeln!(
            f,
            "{:>10} {:>8} {:>12} {:>7} {:>8}",
            "k", "h", "error", "order", "time[s]"
        )?;
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_default();
            writeln!(
                f,
                "{:>10} {:>8} {:>12.4e} {:>7} {:>8.2}",
                format!("1/{}", (1.0 / r.k).round()),
                format!("1/{}", r.m),
                r.error,
                order,
                r.seconds
            )?;
        }
        Ok(())
    }
}

/// Runs every row of `config` against an already computed reference.
pub fn run_convergence_with_reference(
    config: &ExperimentConfig,
    reference: &ReferenceSolution,
) -> Result<ConvergenceReport> {
    config.validate()?;
    if (reference.t_end - config.t_end).abs() > 1e-12 * config.t_end.max(1.0) {
        return invalid("reference solution was computed for a different final time");
    }
    let rows: Vec<Result<ReportRow>> = config
        .rows
        .par_iter()
        .map(|row| {
            let start = Instant::now();
            let u = run_trajectory(
                config.coefficients,
                &config.initial,
                config.scheme,
                row.m,
                row.k,
                config.t_end,
            )?;
            Ok(ReportRow {
                k: row.k,
                m: row.m,
                error: measure_error(&u, &reference.field)?,
                order: None,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect();
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    if rows.len() >= 2 {
        let orders = observed_order(&rows.iter().map(|r| r.error).collect::<Vec<_>>())?;
        for (r, o) in rows.iter_mut().zip(orders) {
            r.order = Some(o);
        }
    }
    Ok(ConvergenceReport {
        scheme: config.scheme,
        t_end: config.t_end,
        reference: reference.spec,
        reference_seconds: reference.seconds,
        rows,
    })
}

/// Computes the reference, then every row.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let reference = compute_reference(config)?;
    run_convergence_with_reference(config, &reference)
}

/// Pass/fail outcome of one structural check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct AssumptionReport {
    pub checks: Vec<CheckResult>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Thresholds for [`verify_operators`].
pub mod thresholds {
    pub const DISSIPATIVITY: f64 = 1e-12;
    pub const NONEXPANSIVE: f64 = 1e-12;
    pub const CONJUGATED: f64 = 1e-10;
    pub const CONJUGATED_STEPS: usize = 64;
    pub const STABILITY_SLACK: f64 = 1e-6;
    pub const NORM_RATIO_RANGE: (f64, f64) = (0.3, 3.2);
    pub const NORM_RATIO_DRIFT: f64 = 0.05;
    pub const INTERPOLATION_ORDER: (f64, f64) = (1.9, 2.1);
    pub const INVERSE_BOUND_GROWTH: f64 = 0.10;
    pub const RANDOM_FIELDS: usize = 100;
    pub const RESOLVENT_KAPPAS: [f64; 3] = [1e-3, 1.0, 1e3];
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::from_nodes(grid, |_, _| rng.gen_range(-1.0..1.0))
}

fn conjugated_growth(
    op: &SplitDiffusionOperator,
    scheme: Scheme,
    k: f64,
    u: &Field,
) -> Result<f64> {
    let kappa = match scheme {
        Scheme::DouglasRachford => k,
        _ => 0.5 * k,
    };
    let unorm = u.norm();
    let mut v = op.solve_resolvent_b(kappa, u)?;
    let mut worst: f64 = 0.0;
    for _ in 0..thresholds::CONJUGATED_STEPS {
        v = crate::steppers::step(op, scheme, k, &v, None)?;
        let mut w = op.apply_b(&v)?;
        w.scale(-kappa);
        w.axpy(1.0, &v)?;
        worst = worst.max(w.norm() / unorm);
    }
    Ok(worst)
}

/// Runs the structural checks on the given coefficient set for every grid in `m_list`.
/// Grids checked by [`verify_assumptions`] when none are given.
pub const DEFAULT_VERIFY_GRIDS: [usize; 5] = [8, 16, 32, 64, 128];

pub fn verify_assumptions(
    coefficients: CoefficientSet,
    m_list: &[usize],
) -> Result<AssumptionReport> {
    let ops = m_list
        .iter()
        .map(|&m| build_operator(coefficients, m))
        .collect::<Result<Vec<_>>>()?;
    verify_operators(&ops)
}

/// Runs the structural checks on a family of operators (one per grid, ascending `m`).
///
/// A check that errors out (for example because a broken operator makes a solve
/// fail) is recorded as failed; the remaining checks still run.
pub fn verify_operators(ops: &[SplitDiffusionOperator]) -> Result<AssumptionReport> {
    if ops.is_empty() {
        return invalid("verification needs at least one grid");
    }
    let mut report = AssumptionReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20240501);
    let checks: [(&str, CheckFn); 8] = [
        ("dissipativity", check_dissipativity),
        ("resolvent-nonexpansive", check_resolvents),
        ("cayley-nonexpansive", check_cayley),
        ("conjugated-nonexpansive", check_conjugated),
        ("norm-equivalence", check_norm_equivalence),
        ("interpolation-order", check_interpolation_order),
        ("inverse-bounded", check_inverse_bounded),
        ("stability-bound", check_stability_bound),
    ];
    for (name, check) in checks {
        match check(ops, &mut rng) {
            Ok((passed, detail)) => report.push(name, passed, detail),
            Err(e) => report.push(name, false, format!("error: {e}")),
        }
    }
    Ok(report)
}

type CheckFn = fn(&[SplitDiffusionOperator], &mut ChaCha8Rng) -> Result<(bool, String)>;

fn check_dissipativity(
    ops: &[SplitDiffusionOperator],
    rng: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    use thresholds::*;
    let mut worst_a = f64::NEG_INFINITY;
    let mut worst_b = f64::NEG_INFINITY;
    for op in ops {
        for _ in 0..RANDOM_FIELDS {
            let u = random_field(op.grid(), rng);
            let n2 = u.norm().powi(2);
            worst_a = worst_a.max(op.apply_a(&u)?.inner_product(&u)? / n2);
            worst_b = worst_b.max(op.apply_b(&u)?.inner_product(&u)? / n2);
        }
    }
    Ok((
        worst_a <= DISSIPATIVITY && worst_b <= DISSIPATIVITY,
        format!(
            "max (Au,u)_h/|u|_h^2 = {worst_a:.3e}, max (Bu,u)_h/|u|_h^2 = {worst_b:.3e} (limit {DISSIPATIVITY:e})"
        ),
    ))
}

/// Worst `‖(I-κE)⁻¹u‖/‖u‖` and `‖(I+κE)(I-κE)⁻¹u‖/‖u‖` over both `E = A_h, B_h`.
fn resolvent_ratios(ops: &[SplitDiffusionOperator], rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let mut worst_res: f64 = 0.0;
    let mut worst_cayley: f64 = 0.0;
    for op in ops {
        for _ in 0..10 {
            let u = random_field(op.grid(), rng);
            for kappa in thresholds::RESOLVENT_KAPPAS {
                for a_side in [true, false] {
                    let (w, ew) = if a_side {
                        let w = op.solve_resolvent_a(kappa, &u)?;
                        let ew = op.apply_a(&w)?;
                        (w, ew)
                    } else {
                        let w = op.solve_resolvent_b(kappa, &u)?;
                        let ew = op.apply_b(&w)?;
                        (w, ew)
                    };
                    worst_res = worst_res.max(w.norm() / u.norm());
                    let mut c = ew;
                    c.scale(kappa);
                    c.axpy(1.0, &w)?;
                    worst_cayley = worst_cayley.max(c.norm() / u.norm());
                }
            }
        }
    }
    Ok((worst_res, worst_cayley))
}

fn check_resolvents(
    ops: &[SplitDiffusionOperator],
    rng: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    let (worst, _) = resolvent_ratios(ops, rng)?;
    Ok((
        worst.is_finite() && worst <= 1.0 + thresholds::NONEXPANSIVE,
        format!("max |(I-kE)^-1 u|_h/|u|_h = {worst:.15}"),
    ))
}

fn check_cayley(ops: &[SplitDiffusionOperator], rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (_, worst) = resolvent_ratios(ops, rng)?;
    Ok((
        worst.is_finite() && worst <= 1.0 + thresholds::NONEXPANSIVE,
        format!("max |(I+kE)(I-kE)^-1 u|_h/|u|_h = {worst:.15}"),
    ))
}

fn check_conjugated(
    ops: &[SplitDiffusionOperator],
    rng: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    use thresholds::*;
    let mut worst: f64 = 0.0;
    for op in ops {
        let u = random_field(op.grid(), rng);
        for scheme in [Scheme::DouglasRachford, Scheme::PeacemanRachford] {
            for k in [1.0 / 16.0, 1.0 / 1024.0] {
                worst = worst.max(conjugated_growth(op, scheme, k, &u)?);
            }
        }
    }
    Ok((
        worst.is_finite() && worst <= 1.0 + CONJUGATED,
        format!("max over n <= {CONJUGATED_STEPS} of |(I-kB)S^n(I-kB)^-1 u|_h/|u|_h = {worst:.15}"),
    ))
}

fn check_norm_equivalence(
    ops: &[SplitDiffusionOperator],
    rng: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    use thresholds::*;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut means = Vec::new();
    let samples = 20;
    for op in ops {
        let mut sum = 0.0;
        for _ in 0..samples {
            let u = random_field(op.grid(), rng);
            let r = u.norm() / exact_l2_norm(&u);
            lo = lo.min(r);
            hi = hi.max(r);
            sum += r;
        }
        means.push(sum / samples as f64);
    }
    let mean_hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean_lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let drift = (mean_hi - mean_lo) / mean_hi;
    Ok((
        lo >= NORM_RATIO_RANGE.0 && hi <= NORM_RATIO_RANGE.1 && drift < NORM_RATIO_DRIFT,
        format!(
            "|u|_h/|u|_L2 in [{lo:.4}, {hi:.4}], drift of the per-grid mean {:.2}%",
            100.0 * drift
        ),
    ))
}

fn check_interpolation_order(
    ops: &[SplitDiffusionOperator],
    _: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    use thresholds::*;
    if ops.len() < 2 {
        return Ok((true, "skipped: needs two or more grids".to_string()));
    }
    let g = Function2D::new("sin(pi x) sin(pi y)", |x, y| {
        (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
    });
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for op in ops {
        let grid = op.grid();
        hs.push(grid.h());
        errs.push(l2_distance(&Field::interpolate(grid, &g), &g, 5)?);
    }
    let slope = least_squares_slope(&hs, &errs)?;
    Ok((
        (INTERPOLATION_ORDER.0..=INTERPOLATION_ORDER.1).contains(&slope),
        format!("L2 interpolation error slope {slope:.4}"),
    ))
}

fn check_inverse_bounded(
    ops: &[SplitDiffusionOperator],
    _: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    let mut norms = Vec::new();
    for op in ops {
        let solver = LinearSolver::kronecker_direct(op)?;
        let n = op.grid().interior_count();
        let est = power_iteration(|x| solver.solve_stiffness(x), n, 2000, 1e-10)?;
        // ‖L_h⁻¹‖_h = h² ‖(K_A + K_B)⁻¹‖₂
        let h = op.grid().h();
        norms.push((op.grid().m(), h * h * est.value));
    }
    let coarse_max = norms
        .iter()
        .take(2)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let all_max = norms
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        all_max <= (1.0 + thresholds::INVERSE_BOUND_GROWTH) * coarse_max,
        format!(
            "|L_h^-1|_h = {}",
            norms
                .iter()
                .map(|(m, v)| format!("{v:.5} (m={m})"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    ))
}

fn check_stability_bound(
    ops: &[SplitDiffusionOperator],
    _: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = String::new();
    for op in ops {
        let solver = LinearSolver::kronecker_direct(op)?;
        let est = op.stability_norm_estimate(&solver)?;
        let bound = op.bounds().stability_bound();
        ok &= est.value <= bound + thresholds::STABILITY_SLACK;
        let _ = write!(
            detail,
            "m={}: |A_h L_h^-1|_h = {:.6} (bound {:.4}{}); ",
            op.grid().m(),
            est.value,
            bound,
            if est.converged { "" } else { ", unconverged" }
        );
    }
    Ok((ok, detail.trim_end_matches([';', ' ']).to_string()))
}

/// The operator with `K_λ` negated, which breaks dissipativity of `A_h`.
pub fn sign_flipped_operator(
    lambda: &Function1D,
    mu: &Function1D,
    m: usize,
) -> Result<SplitDiffusionOperator> {
    let grid = Grid::new(m)?;
    let k = crate::operators::TridiagonalMatrix::stiffness(lambda, grid);
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
    let flipped =
        crate::operators::TridiagonalMatrix::new(neg(k.sub()), neg(k.diag()), neg(k.sup()))?;
    let k_mu = crate::operators::TridiagonalMatrix::stiffness(mu, grid);
    SplitDiffusionOperator::from_parts(grid, flipped, k_mu, lambda, mu)
}

/// Convenience check used by the trait-generic code paths.
pub fn is_dissipative<O: SplitOperator>(op: &O, u: &Field) -> Result<bool> {
    let n2 = u.norm().powi(2);
    Ok(
        op.inner_product(&op.apply_a(u)?, u)? <= thresholds::DISSIPATIVITY * n2
            && op.inner_product(&op.apply_b(u)?, u)? <= thresholds::DISSIPATIVITY * n2,
    )
}
