//! Douglas-Rachford, Peaceman-Rachford and Crank-Nicolson on one grid, against a
//! fine-step Crank-Nicolson run of the same semi-discrete problem.
//!
//! cargo run --release --example time_stepping

use dimsplit::experiments::{build_operator, prepare_initial_data};
use dimsplit::steppers::{evolve, steps_for};
use dimsplit::{CoefficientSet, LinearSolver, Scheme};

fn main() -> dimsplit::Result<()> {
    let t_end = 0.5;
    let op = build_operator(CoefficientSet::Paper, 32)?;
    let cg = LinearSolver::conjugate_gradient(&op)?;
    let u0 = prepare_initial_data(CoefficientSet::Paper, op.grid())?;

    let k_ref = 1.0 / 4096.0;
    let reference = evolve(
        &op,
        Scheme::CrankNicolson,
        k_ref,
        steps_for(t_end, k_ref)?,
        &u0,
        Some(&cg),
    )?;
    println!(
        "|u0|_h = {:.6}, |u(0.5)|_h = {:.6}",
        u0.norm(),
        reference.norm()
    );

    println!("{:>8} {:>12} {:>12} {:>12}", "k", "DR", "PR", "CN");
    for e in 4..=8 {
        let k = 2f64.powi(-e);
        let n = steps_for(t_end, k)?;
        let mut row = format!("{:>8}", format!("1/{}", 1 << e));
        for scheme in [
            Scheme::DouglasRachford,
            Scheme::PeacemanRachford,
            Scheme::CrankNicolson,
        ] {
            let u = evolve(&op, scheme, k, n, &u0, Some(&cg))?;
            row += &format!(" {:>12.4e}", u.sub(&reference)?.norm());
        }
        println!("{row}");
    }
    Ok(())
}
