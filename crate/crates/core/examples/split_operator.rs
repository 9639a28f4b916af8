//! The split operator L_h = A_h + B_h: matrix-free actions, line resolvents and
//! the structural properties the splitting schemes rely on.
//!
//! cargo run --release --example split_operator

use dimsplit::problem::paper_coefficients;
use dimsplit::{Field, Grid, LinearSolver, SplitDiffusionOperator};

fn main() -> dimsplit::Result<()> {
    let (lambda, mu) = paper_coefficients();
    let op = SplitDiffusionOperator::assemble(&lambda, &mu, Grid::new(32)?)?;
    let b = op.bounds();
    println!(
        "lambda in [{:.4}, {:.4}], mu in [{:.4}, {:.4}]",
        b.lambda_0, b.lambda_inf, b.mu_0, b.mu_inf
    );

    let u = Field::from_nodes(op.grid(), |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    let au = op.apply_a(&u)?;
    let bu = op.apply_b(&u)?;
    println!(
        "(A u, u)_h = {:.4e}, (B u, u)_h = {:.4e}",
        au.inner_product(&u)?,
        bu.inner_product(&u)?
    );

    for kappa in [1e-3, 1e-1, 1e1] {
        let w = op.solve_resolvent_a(kappa, &u)?;
        let mut r = op.apply_a(&w)?;
        r.scale(-kappa);
        r.axpy(1.0, &w)?;
        println!(
            "kappa = {kappa:>6}: |(I - kA)^-1 u| / |u| = {:.6}, residual {:.1e}",
            w.norm() / u.norm(),
            r.sub(&u)?.norm() / u.norm()
        );
    }

    let solver = LinearSolver::kronecker_direct(&op)?;
    let est = op.stability_norm_estimate(&solver)?;
    println!(
        "|A_h L_h^-1|_h ~ {:.6} after {} power iterations, bound {:.4}",
        est.value,
        est.iterations,
        b.stability_bound()
    );
    Ok(())
}
