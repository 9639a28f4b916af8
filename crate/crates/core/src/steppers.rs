//! One-step maps of the splitting schemes and the trapezoidal reference method.
//!
//! With step size `k`:
//!
//! ```text
//! Douglas-Rachford:  S = (I - kB)⁻¹ (I - kA)⁻¹ (I + k² AB)
//! Peaceman-Rachford: S = (I - k/2 B)⁻¹ (I + k/2 A) (I - k/2 A)⁻¹ (I + k/2 B)
//! Crank-Nicolson:    S = (I - k/2 L)⁻¹ (I + k/2 L)
//! ```
//!
//! The splitting schemes only need the [`SplitOperator`] capabilities, so they
//! work for any pair of dissipative operators, not just the diffusion instance.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::linsolve::LinearSolver;
use crate::operators::SplitDiffusionOperator;

/// A pair of operators `A`, `B` on a space of fields, both dissipative in the
/// lumped inner product.
pub trait SplitOperator {
    fn grid(&self) -> Grid;
    fn apply_a(&self, u: &Field) -> Result<Field>;
    fn apply_b(&self, u: &Field) -> Result<Field>;
    /// `(I - κA)⁻¹ rhs`
    fn solve_resolvent_a(&self, kappa: f64, rhs: &Field) -> Result<Field>;
    /// `(I - κB)⁻¹ rhs`
    fn solve_resolvent_b(&self, kappa: f64, rhs: &Field) -> Result<Field>;

    fn apply_l(&self, u: &Field) -> Result<Field> {
        let mut out = self.apply_a(u)?;
        out.axpy(1.0, &self.apply_b(u)?)?;
        Ok(out)
    }

    /// `(I + cA) u`
    fn apply_shifted_a(&self, c: f64, u: &Field) -> Result<Field> {
        let mut out = self.apply_a(u)?;
        out.scale(c);
        out.axpy(1.0, u)?;
        Ok(out)
    }

    /// `(I + cB) u`
    fn apply_shifted_b(&self, c: f64, u: &Field) -> Result<Field> {
        let mut out = self.apply_b(u)?;
        out.scale(c);
        out.axpy(1.0, u)?;
        Ok(out)
    }

    fn inner_product(&self, u: &Field, v: &Field) -> Result<f64> {
        u.inner_product(v)
    }

    fn norm(&self, u: &Field) -> f64 {
        u.norm()
    }
}

impl SplitOperator for SplitDiffusionOperator {
    fn grid(&self) -> Grid {
        SplitDiffusionOperator::grid(self)
    }

    fn apply_a(&self, u: &Field) -> Result<Field> {
        SplitDiffusionOperator::apply_a(self, u)
    }

    fn apply_b(&self, u: &Field) -> Result<Field> {
        SplitDiffusionOperator::apply_b(self, u)
    }

    fn apply_l(&self, u: &Field) -> Result<Field> {
        SplitDiffusionOperator::apply_l(self, u)
    }

    fn apply_shifted_a(&self, c: f64, u: &Field) -> Result<Field> {
        SplitDiffusionOperator::apply_shifted_a(self, c, u)
    }

    fn apply_shifted_b(&self, c: f64, u: &Field) -> Result<Field> {
        SplitDiffusionOperator::apply_shifted_b(self, c, u)
    }

    fn solve_resolvent_a(&self, kappa: f64, rhs: &Field) -> Result<Field> {
        SplitDiffusionOperator::solve_resolvent_a(self, kappa, rhs)
    }

    fn solve_resolvent_b(&self, kappa: f64, rhs: &Field) -> Result<Field> {
        SplitDiffusionOperator::solve_resolvent_b(self, kappa, rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    DouglasRachford,
    PeacemanRachford,
    /// Trapezoidal rule on the unsplit `L_h`; the reference integrator.
    CrankNicolson,
}

impl Scheme {
    /// Classical order `r` of the splitting schemes; `None` for the reference method.
    pub fn splitting_order(self) -> Option<u32> {
        match self {
            Scheme::DouglasRachford => Some(1),
            Scheme::PeacemanRachford => Some(2),
            Scheme::CrankNicolson => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::DouglasRachford => "dr",
            Scheme::PeacemanRachford => "pr",
            Scheme::CrankNicolson => "cn",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dr" => Ok(Scheme::DouglasRachford),
            "pr" => Ok(Scheme::PeacemanRachford),
            "cn" => Ok(Scheme::CrankNicolson),
            other => invalid(format!("unknown scheme {other:?} (expected dr, pr or cn)")),
        }
    }
}

fn check_step(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return invalid(format!("step size must be positive, got {k}"));
    }
    Ok(())
}

/// Douglas-Rachford step. `(I + k²AB)u` is evaluated as `u + k² A(B u)`.
pub fn dr_step<O: SplitOperator + ?Sized>(op: &O, k: f64, u: &Field) -> Result<Field> {
    check_step(k)?;
    let mut w = op.apply_a(&op.apply_b(u)?)?;
    w.scale(k * k);
    w.axpy(1.0, u)?;
    let w = op.solve_resolvent_a(k, &w)?;
    op.solve_resolvent_b(k, &w)
}

/// Peaceman-Rachford step.
pub fn pr_step<O: SplitOperator + ?Sized>(op: &O, k: f64, u: &Field) -> Result<Field> {
    check_step(k)?;
    let half = 0.5 * k;
    let w = op.solve_resolvent_a(half, &op.apply_shifted_b(half, u)?)?;
    op.solve_resolvent_b(half, &op.apply_shifted_a(half, &w)?)
}

/// Crank-Nicolson step: `(I - k/2 L) w = u + k/2 L u`, solved as
/// `(2/k I - L) w = (2/k)(u + k/2 L u)` through `solver`.
pub fn cn_step<O: SplitOperator + ?Sized>(
    op: &O,
    k: f64,
    u: &Field,
    solver: &LinearSolver,
) -> Result<Field> {
    check_step(k)?;
    op.grid().check_same(&solver.grid())?;
    let mut rhs = op.apply_l(u)?;
    rhs.scale(0.5 * k);
    rhs.axpy(1.0, u)?;
    let sigma = 2.0 / k;
    rhs.scale(sigma);
    solver.solve_shifted(sigma, &rhs)
}

/// One step of `scheme`. Crank-Nicolson needs `solver`.
pub fn step<O: SplitOperator + ?Sized>(
    op: &O,
    scheme: Scheme,
    k: f64,
    u: &Field,
    solver: Option<&LinearSolver>,
) -> Result<Field> {
    match scheme {
        Scheme::DouglasRachford => dr_step(op, k, u),
        Scheme::PeacemanRachford => pr_step(op, k, u),
        Scheme::CrankNicolson => match solver {
            Some(s) => cn_step(op, k, u, s),
            None => invalid("the Crank-Nicolson scheme needs a linear solver"),
        },
    }
}

/// `n_steps`-fold composition of the step map, `S^n u0`.
pub fn evolve<O: SplitOperator + ?Sized>(
    op: &O,
    scheme: Scheme,
    k: f64,
    n_steps: usize,
    u0: &Field,
    solver: Option<&LinearSolver>,
) -> Result<Field> {
    op.grid().check_same(&u0.grid())?;
    let mut u = u0.clone();
    for _ in 0..n_steps {
        u = step(op, scheme, k, &u, solver)?;
    }
    Ok(u)
}

/// Number of steps of size `k` that reach `t_end` exactly (to `1e-12` relative).
pub fn steps_for(t_end: f64, k: f64) -> Result<usize> {
    check_step(k)?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return invalid(format!("final time must be non-negative, got {t_end}"));
    }
    let n = (t_end / k).round();
    if (n * k - t_end).abs() > 1e-12 * t_end {
        return invalid(format!(
            "t_end = {t_end} is not an integer multiple of k = {k}"
        ));
    }
    Ok(n as usize)
}
