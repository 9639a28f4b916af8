//! Solving L_h v = f with conjugate gradients and with the Kronecker direct method.
//!
//! cargo run --release --example linear_solvers

use std::time::Instant;

use dimsplit::experiments::build_operator;
use dimsplit::{CoefficientSet, Field, LinearSolver};

fn main() -> dimsplit::Result<()> {
    for m in [32, 64, 128, 256] {
        let op = build_operator(CoefficientSet::Paper, m)?;
        let f = Field::from_nodes(op.grid(), |i, j| if (i + j) % 3 == 0 { 1.0 } else { -0.5 });

        let t = Instant::now();
        let (x_cg, cg) = LinearSolver::conjugate_gradient(&op)?.solve_lh_with_stats(&f)?;
        let t_cg = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let (x_d, direct) = LinearSolver::kronecker_direct(&op)?.solve_lh_with_stats(&f)?;
        let t_d = t.elapsed().as_secs_f64();

        println!(
            "m = {m:>3}: CG {:>5} iterations, residual {:.1e}, {t_cg:.3} s | direct {} refinements, residual {:.1e}, {t_d:.3} s | difference {:.1e}",
            cg.iterations,
            cg.residual,
            direct.iterations,
            direct.residual,
            x_cg.sub(&x_d)?.norm() / x_d.norm()
        );
    }
    Ok(())
}
