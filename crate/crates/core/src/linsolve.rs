//! Solvers for the full 2D operator.
//!
//! Systems `(σI - L_h) v = f` are multiplied by `h²` to give the SPD system
//! `(σh² I + K_A + K_B) v = h² f`, which is what both methods work on.
//! [`SolverMethod::ConjugateGradient`] is matrix-free and unpreconditioned.
//! [`SolverMethod::KroneckerDirect`] diagonalizes `K_A + K_B` through the
//! symmetrized 1D matrices `S = D^{-1/2} K D^{-1/2}`:
//!
//! ```text
//! K_A + K_B = D^{1/2} (S_λ ⊗ I + I ⊗ S_μ) D^{1/2},   D = D_λ ⊗ D_μ
//! ```
//!
//! so a solve costs four dense `n x n` products and a pointwise division by the
//! eigenvalue sums `θ_λ,p + θ_μ,q`. It only applies for `σ = 0`; shifted systems
//! always go through CG.

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid};
use crate::operators::SplitDiffusionOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    ConjugateGradient,
    KroneckerDirect,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolverHandle {
    pub method: SolverMethod,
    /// Target relative residual `‖L_h v - f‖₂ / ‖f‖₂`.
    pub tol: f64,
    /// Iteration cap for CG; `None` means `10 N`.
    pub max_iter: Option<usize>,
}

impl Default for LinearSolverHandle {
    fn default() -> Self {
        LinearSolverHandle {
            method: SolverMethod::ConjugateGradient,
            tol: 1e-12,
            max_iter: None,
        }
    }
}

impl LinearSolverHandle {
    pub fn with_method(method: SolverMethod) -> Self {
        LinearSolverHandle {
            method,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return invalid(format!(
                "solver tolerance must lie in (0, 1e-2], got {}",
                self.tol
            ));
        }
        Ok(())
    }
}

/// Outcome statistics of one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    /// CG iterations, or refinement sweeps for the direct method.
    pub iterations: usize,
    /// Relative residual of the returned solution, recomputed from scratch.
    pub residual: f64,
}

/// Precomputed eigendecompositions of the symmetrized 1D stiffness matrices.
#[derive(Clone, Debug)]
pub struct KroneckerFactorization {
    n: usize,
    q_lambda: Mat<f64>,
    q_mu: Mat<f64>,
    theta_lambda: Vec<f64>,
    theta_mu: Vec<f64>,
    /// `1 / sqrt(λ_i μ_j)` in field storage order.
    d_inv_sqrt: Vec<f64>,
}

impl KroneckerFactorization {
    pub fn prepare(op: &SplitDiffusionOperator) -> Result<Self> {
        let n = op.grid().n();
        let (q_lambda, theta_lambda) = symmetrized_eigen(op.k_lambda(), op.d_lambda().diag())?;
        let (q_mu, theta_mu) = symmetrized_eigen(op.k_mu(), op.d_mu().diag())?;
        let dl = op.d_lambda().diag();
        let dm = op.d_mu().diag();
        let mut d_inv_sqrt = Vec::with_capacity(n * n);
        for &mu_j in dm {
            for &lambda_i in dl {
                d_inv_sqrt.push(1.0 / (lambda_i * mu_j).sqrt());
            }
        }
        Ok(KroneckerFactorization {
            n,
            q_lambda,
            q_mu,
            theta_lambda,
            theta_mu,
            d_inv_sqrt,
        })
    }

    /// Eigenvalues of `D_λ^{-1/2} K_λ D_λ^{-1/2}`, ascending.
    pub fn theta_lambda(&self) -> &[f64] {
        &self.theta_lambda
    }

    pub fn theta_mu(&self) -> &[f64] {
        &self.theta_mu
    }

    /// `x = (K_A + K_B)⁻¹ g` without refinement.
    pub fn apply_inverse(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        let scaled: Vec<f64> = g.iter().zip(&self.d_inv_sqrt).map(|(a, d)| a * d).collect();
        // Column-major n x n view: entry (i, j) is node (i, j), i runs over x.
        let u = MatRef::from_column_major_slice(&scaled, n, n);
        let mut hat = self.q_lambda.transpose() * u * &self.q_mu;
        for q in 0..n {
            let col = hat.col_as_slice_mut(q);
            let tq = self.theta_mu[q];
            for (h, tp) in col.iter_mut().zip(&self.theta_lambda) {
                *h /= tp + tq;
            }
        }
        let x = &self.q_lambda * hat * self.q_mu.transpose();
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            out.extend_from_slice(x.col_as_slice(j));
        }
        for (a, d) in out.iter_mut().zip(&self.d_inv_sqrt) {
            *a *= d;
        }
        out
    }
}

fn symmetrized_eigen(
    k: &crate::operators::TridiagonalMatrix,
    d: &[f64],
) -> Result<(Mat<f64>, Vec<f64>)> {
    let n = k.n();
    let s = Mat::<f64>::from_fn(n, n, |r, c| {
        let v = if r == c {
            k.diag()[r]
        } else if c == r + 1 {
            k.sup()[r]
        } else if r == c + 1 {
            k.sub()[c]
        } else {
            return 0.0;
        };
        v / (d[r] * d[c]).sqrt()
    });
    let eig = s
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("symmetric eigensolver failed: {e:?}")))?;
    let theta: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    if theta[0] < -1e-10 {
        return Err(Error::Eigen(format!(
            "1D stiffness matrix has negative eigenvalue {}",
            theta[0]
        )));
    }
    let q = eig.U().to_owned();
    Ok((q, theta))
}

/// A solver bound to one operator, holding any precomputed factorization.
#[derive(Clone, Debug)]
pub struct LinearSolver {
    op: SplitDiffusionOperator,
    handle: LinearSolverHandle,
    factorization: Option<KroneckerFactorization>,
}

const MAX_REFINEMENT: usize = 6;
/// Refinement may stall slightly above the tolerance on fine grids; beyond this it is a failure.
const DIRECT_STALL_LIMIT: f64 = 1e-9;

impl LinearSolver {
    pub fn new(op: &SplitDiffusionOperator, handle: LinearSolverHandle) -> Result<Self> {
        handle.validate()?;
        let factorization = match handle.method {
            SolverMethod::KroneckerDirect => Some(KroneckerFactorization::prepare(op)?),
            SolverMethod::ConjugateGradient => None,
        };
        Ok(LinearSolver {
            op: op.clone(),
            handle,
            factorization,
        })
    }

    pub fn conjugate_gradient(op: &SplitDiffusionOperator) -> Result<Self> {
        Self::new(op, LinearSolverHandle::default())
    }

    pub fn kronecker_direct(op: &SplitDiffusionOperator) -> Result<Self> {
        Self::new(
            op,
            LinearSolverHandle::with_method(SolverMethod::KroneckerDirect),
        )
    }

    pub fn grid(&self) -> Grid {
        self.op.grid()
    }

    pub fn handle(&self) -> LinearSolverHandle {
        self.handle
    }

    pub fn operator(&self) -> &SplitDiffusionOperator {
        &self.op
    }

    /// `v = L_h⁻¹ f`.
    pub fn solve_lh(&self, f: &Field) -> Result<Field> {
        self.solve_lh_with_stats(f).map(|(v, _)| v)
    }

    pub fn solve_lh_with_stats(&self, f: &Field) -> Result<(Field, SolveStats)> {
        // L_h v = f  <=>  (K_A + K_B) v = -h² f
        self.solve_shifted_with_stats(0.0, f, -1.0)
    }

    /// `v = (σI - L_h)⁻¹ f` for `σ ≥ 0`.
    pub fn solve_shifted(&self, sigma: f64, f: &Field) -> Result<Field> {
        self.solve_shifted_with_stats(sigma, f, 1.0).map(|(v, _)| v)
    }

    fn solve_shifted_with_stats(
        &self,
        sigma: f64,
        f: &Field,
        sign: f64,
    ) -> Result<(Field, SolveStats)> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return invalid(format!("shift must be non-negative, got {sigma}"));
        }
        let grid = self.op.grid();
        grid.check_same(&f.grid())?;
        let h2 = grid.h() * grid.h();
        let b: Vec<f64> = f.values().iter().map(|v| sign * h2 * v).collect();
        let shift = sigma * h2;
        let (x, stats) = match (&self.factorization, sigma == 0.0) {
            (Some(fact), true) => self.direct(fact, &b)?,
            _ => self.cg(shift, &b)?,
        };
        Ok((Field::from_values(grid, x)?, stats))
    }

    /// `(K_A + K_B)⁻¹ x` on raw coefficient vectors.
    pub fn solve_stiffness(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (x, _) = match &self.factorization {
            Some(fact) => self.direct(fact, b)?,
            None => self.cg(0.0, b)?,
        };
        Ok(x)
    }

    fn residual(&self, shift: f64, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; x.len()];
        self.op.stiffness_combination(x, &mut ax, shift, 1.0, 1.0);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    }

    /// Fast-diagonalization solve followed by iterative refinement against the
    /// matrix-free operator. Refinement stops once the residual reaches `tol` or
    /// stops decreasing, which is the rounding floor of the residual itself.
    fn direct(&self, fact: &KroneckerFactorization, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; b.len()], SolveStats::default()));
        }
        let mut x = fact.apply_inverse(b);
        let mut r = self.residual(0.0, &x, b);
        let mut rel = norm2(&r) / bnorm;
        let mut history = vec![rel];
        let mut sweeps = 0;
        while rel > self.handle.tol && sweeps < MAX_REFINEMENT {
            let dx = fact.apply_inverse(&r);
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let r_new = self.residual(0.0, &candidate, b);
            let rel_new = norm2(&r_new) / bnorm;
            sweeps += 1;
            history.push(rel_new);
            if rel_new >= rel {
                break;
            }
            x = candidate;
            r = r_new;
            rel = rel_new;
        }
        if rel > DIRECT_STALL_LIMIT {
            return Err(Error::NonConvergence {
                iterations: sweeps,
                residual: rel,
                residuals: history,
            });
        }
        Ok((
            x,
            SolveStats {
                iterations: sweeps,
                residual: rel,
            },
        ))
    }

    fn cg(&self, shift: f64, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let n = b.len();
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], SolveStats::default()));
        }
        let tol = self.handle.tol;
        let max_iter = self.handle.max_iter.unwrap_or(10 * n);
        let mut x = vec![0.0; n];
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut ap = vec![0.0; n];
        loop {
            // (Re)start from the true residual so the recurrence drift cannot
            // hide behind the stopping test.
            let mut r = self.residual(shift, &x, b);
            let true_rel = norm2(&r) / bnorm;
            if true_rel <= tol {
                return Ok((
                    x,
                    SolveStats {
                        iterations,
                        residual: true_rel,
                    },
                ));
            }
            if iterations >= max_iter {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: true_rel,
                    residuals: history,
                });
            }
            let mut p = r.clone();
            let mut rr = dot(&r, &r);
            while iterations < max_iter {
                self.op.stiffness_combination(&p, &mut ap, shift, 1.0, 1.0);
                let alpha = rr / dot(&p, &ap);
                for k in 0..n {
                    x[k] += alpha * p[k];
                    r[k] -= alpha * ap[k];
                }
                iterations += 1;
                let rr_new = dot(&r, &r);
                let rel = rr_new.sqrt() / bnorm;
                history.push(rel);
                if rel <= 0.5 * tol {
                    break;
                }
                let beta = rr_new / rr;
                rr = rr_new;
                for k in 0..n {
                    p[k] = r[k] + beta * p[k];
                }
            }
        }
    }
}

/// Convenience wrapper: builds a solver for `op` and computes `L_h⁻¹ f`.
pub fn solve_lh(
    op: &SplitDiffusionOperator,
    f: &Field,
    handle: LinearSolverHandle,
) -> Result<Field> {
    LinearSolver::new(op, handle)?.solve_lh(f)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest-magnitude eigenvalue estimate `‖A x‖` of a symmetric operator, which is
/// its 2-norm. Stops when the relative change drops below `tol`; otherwise returns
/// the last estimate flagged as unconverged.
pub fn power_iteration(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    n: usize,
    max_iter: usize,
    tol: f64,
) -> Result<PowerEstimate> {
    if n == 0 {
        return invalid("power iteration on an empty space");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = 1.0 / norm2(&x);
    x.iter_mut().for_each(|v| *v *= s);
    let mut value = 0.0;
    for it in 1..=max_iter {
        let y = apply(&x)?;
        let ny = norm2(&y);
        if ny == 0.0 {
            return Ok(PowerEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            });
        }
        let change = (ny - value).abs();
        value = ny;
        x = y.into_iter().map(|v| v / ny).collect();
        if change <= tol * ny {
            return Ok(PowerEstimate {
                value,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(PowerEstimate {
        value,
        iterations: max_iter,
        converged: false,
    })
}

/// 2-norm of a general operator from power iteration on `AᵀA`.
pub fn power_iteration_normal(
    mut forward: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    mut adjoint: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    n: usize,
    max_iter: usize,
    tol: f64,
) -> Result<PowerEstimate> {
    let est = power_iteration(|x| adjoint(&forward(x)?), n, max_iter, tol)?;
    Ok(PowerEstimate {
        value: est.value.sqrt(),
        ..est
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_assemble, DenseMatrix};
    use crate::problem::{constant_coefficients, paper_coefficients};
    use std::f64::consts::PI;

    fn random_field(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_nodes(grid, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn paper_op(m: usize) -> SplitDiffusionOperator {
        let (l, mu) = paper_coefficients();
        SplitDiffusionOperator::assemble(&l, &mu, Grid::new(m).unwrap()).unwrap()
    }

    fn rel(a: &Field, b: &Field) -> f64 {
        a.sub(b).unwrap().norm() / b.norm()
    }

    #[test]
    fn cg_round_trip() {
        let op = paper_op(16);
        let v0 = random_field(op.grid(), 1);
        let f = op.apply_l(&v0).unwrap();
        let solver = LinearSolver::conjugate_gradient(&op).unwrap();
        let (v, stats) = solver.solve_lh_with_stats(&f).unwrap();
        assert!(stats.residual <= 1e-12);
        assert!(rel(&v, &v0) <= 1e-10, "{}", rel(&v, &v0));
    }

    #[test]
    fn zero_rhs() {
        let op = paper_op(8);
        let z = Field::zeros(op.grid());
        for s in [
            LinearSolver::conjugate_gradient(&op).unwrap(),
            LinearSolver::kronecker_direct(&op).unwrap(),
        ] {
            assert_eq!(s.solve_lh(&z).unwrap(), z);
        }
    }

    #[test]
    fn matches_dense_lu() {
        let op = paper_op(8);
        let dense = dense_assemble(&op).unwrap();
        let f = random_field(op.grid(), 2);
        let expect = dense.l.lu_solve(f.values()).unwrap();
        let expect = Field::from_values(op.grid(), expect).unwrap();
        for s in [
            LinearSolver::conjugate_gradient(&op).unwrap(),
            LinearSolver::kronecker_direct(&op).unwrap(),
        ] {
            assert!(rel(&s.solve_lh(&f).unwrap(), &expect) <= 1e-9);
        }
    }

    #[test]
    fn shifted_solve_matches_dense() {
        let op = paper_op(8);
        let dense = dense_assemble(&op).unwrap();
        let f = random_field(op.grid(), 3);
        let sigma = 50.0;
        let sys = DenseMatrix::identity(f.values().len())
            .scaled(sigma)
            .sub_scaled(1.0, &dense.l);
        let expect = Field::from_values(op.grid(), sys.lu_solve(f.values()).unwrap()).unwrap();
        for s in [
            LinearSolver::conjugate_gradient(&op).unwrap(),
            LinearSolver::kronecker_direct(&op).unwrap(),
        ] {
            assert!(rel(&s.solve_shifted(sigma, &f).unwrap(), &expect) <= 1e-10);
        }
        let s = LinearSolver::conjugate_gradient(&op).unwrap();
        assert!(s.solve_shifted(-1.0, &f).is_err());
    }

    #[test]
    fn unit_coefficient_spectrum() {
        let (l, mu) = constant_coefficients();
        let m = 8;
        let op = SplitDiffusionOperator::assemble(&l, &mu, Grid::new(m).unwrap()).unwrap();
        let fact = KroneckerFactorization::prepare(&op).unwrap();
        for (p, th) in fact.theta_lambda().iter().enumerate() {
            let exact = 2.0 - 2.0 * ((p + 1) as f64 * PI / m as f64).cos();
            assert!((th - exact).abs() < 1e-13);
        }
        // eigenvector field: the solve is a scalar division
        let h = op.grid().h();
        let (p, q) = (2.0, 3.0);
        let f = Field::from_nodes(op.grid(), |i, j| {
            (p * PI * i as f64 * h).sin() * (q * PI * j as f64 * h).sin()
        });
        let sigma = (2.0 - 2.0 * (p * PI * h).cos() + 2.0 - 2.0 * (q * PI * h).cos()) / (h * h);
        let v = LinearSolver::kronecker_direct(&op)
            .unwrap()
            .solve_lh(&f)
            .unwrap();
        let mut expect = f.clone();
        expect.scale(-1.0 / sigma);
        assert!(rel(&v, &expect) < 1e-13);
    }

    #[test]
    fn cg_and_direct_agree() {
        for m in [8, 16, 32] {
            let op = paper_op(m);
            let f = random_field(op.grid(), m as u64);
            let a = LinearSolver::conjugate_gradient(&op)
                .unwrap()
                .solve_lh(&f)
                .unwrap();
            let (b, stats) = LinearSolver::kronecker_direct(&op)
                .unwrap()
                .solve_lh_with_stats(&f)
                .unwrap();
            assert!(stats.residual <= 1e-12, "m = {m}: {}", stats.residual);
            assert!(rel(&a, &b) <= 1e-8);
        }
    }

    #[test]
    fn direct_solver_accurate_across_sizes() {
        for m in [127, 128, 129, 200] {
            let op = paper_op(m);
            let f = random_field(op.grid(), 9);
            let (_, stats) = LinearSolver::kronecker_direct(&op)
                .unwrap()
                .solve_lh_with_stats(&f)
                .unwrap();
            assert!(stats.residual <= 1e-12, "m = {m}: {}", stats.residual);
        }
    }

    #[test]
    fn cg_non_convergence_reports_history() {
        let op = paper_op(16);
        let handle = LinearSolverHandle {
            max_iter: Some(3),
            ..Default::default()
        };
        let f = random_field(op.grid(), 4);
        match LinearSolver::new(&op, handle).unwrap().solve_lh(&f) {
            Err(Error::NonConvergence {
                iterations,
                residuals,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(residuals.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn handle_tolerance_validated() {
        let op = paper_op(4);
        let bad = LinearSolverHandle {
            tol: 0.5,
            ..Default::default()
        };
        assert!(LinearSolver::new(&op, bad).is_err());
    }

    #[test]
    fn power_iteration_known_norms() {
        let d = [1.0, 2.0, 3.0];
        let est = power_iteration(
            |x| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect()),
            3,
            1000,
            1e-12,
        )
        .unwrap();
        assert!((est.value - 3.0).abs() < 1e-6);

        let t =
            crate::operators::TridiagonalMatrix::new(vec![-1.0; 2], vec![2.0; 3], vec![-1.0; 2])
                .unwrap();
        let est = power_iteration(|x| Ok(t.matvec(x)), 3, 1000, 1e-13).unwrap();
        assert!(est.converged);
        assert!((est.value - (2.0 + 2f64.sqrt())).abs() < 1e-5);
    }

    #[test]
    fn power_iteration_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let g = DenseMatrix::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
        let spd = g.transpose().matmul(&g);
        let est = power_iteration(|x| Ok(spd.matvec(x)), 8, 10_000, 1e-12).unwrap();
        let exact = spd.spectral_norm();
        assert!((est.value - exact).abs() <= 1e-4 * exact);
        // general operator through the normal equations
        let est = power_iteration_normal(
            |x| Ok(g.matvec(x)),
            |x| Ok(g.transpose().matvec(x)),
            8,
            10_000,
            1e-12,
        )
        .unwrap();
        let exact = g.spectral_norm();
        assert!((est.value - exact).abs() <= 1e-4 * exact);
    }

    #[test]
    fn unconverged_power_iteration_is_flagged() {
        let d = [1.0, 0.999];
        let est = power_iteration(
            |x| Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect()),
            2,
            2,
            1e-15,
        )
        .unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 2);
    }
}
