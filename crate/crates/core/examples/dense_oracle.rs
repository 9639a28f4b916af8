//! Small grids against dense matrices: the matrix-free operators reproduce the
//! assembled ones, and local splitting errors against exp(kL_h) shrink with the
//! expected powers of k once k |L_h| is small.
//!
//! cargo run --release --example dense_oracle

use dimsplit::experiments::{build_operator, observed_order};
use dimsplit::oracle::{dense_assemble, dense_expm};
use dimsplit::steppers::step;
use dimsplit::{CoefficientSet, Field, LinearSolver, Scheme};

fn main() -> dimsplit::Result<()> {
    let op = build_operator(CoefficientSet::Paper, 8)?;
    let dense = dense_assemble(&op)?;
    let u = Field::from_nodes(op.grid(), |i, j| (i as f64 * 0.7 + j as f64 * 1.3).sin());

    let mf = op.apply_l(&u)?;
    let d = dense.l.matvec(u.values());
    let diff = mf
        .values()
        .iter()
        .zip(&d)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "|L_h u - dense L u|_max = {diff:.1e}, |L_h|_2 = {:.1}",
        dense.l.spectral_norm()
    );

    let solver = LinearSolver::conjugate_gradient(&op)?;
    let mut smooth = u.clone();
    for _ in 0..3 {
        smooth = solver.solve_lh(&smooth)?;
    }
    let ks: Vec<f64> = (4..=12).map(|e| 2f64.powi(-e)).collect();
    for scheme in [Scheme::DouglasRachford, Scheme::PeacemanRachford] {
        let mut errors = Vec::new();
        for &k in &ks {
            let exact =
                Field::from_values(op.grid(), dense_expm(&dense.l, k)?.matvec(smooth.values()))?;
            errors.push(step(&op, scheme, k, &smooth, None)?.sub(&exact)?.norm());
        }
        let orders: Vec<String> = observed_order(&errors)?
            .iter()
            .map(|o| format!("{o:.2}"))
            .collect();
        println!(
            "{scheme} local error orders, k = 2^-4 .. 2^-12: {}",
            orders.join(" ")
        );
    }
    Ok(())
}
