//! Structural checks behind the error analysis: dissipativity, nonexpansive
//! resolvents, norm equivalence, interpolation order, bounded inverse and the
//! stability bound.
//!
//! cargo run --release --example verify_assumptions

use dimsplit::experiments::{sign_flipped_operator, verify_assumptions, verify_operators};
use dimsplit::problem::paper_coefficients;
use dimsplit::CoefficientSet;

fn main() -> dimsplit::Result<()> {
    for coeff in [CoefficientSet::Paper, CoefficientSet::Constant] {
        let report = verify_assumptions(coeff, &[8, 16, 32, 64])?;
        println!(
            "{coeff:?} coefficients, all passed: {}\n{report}",
            report.all_passed()
        );
    }

    let (lambda, mu) = paper_coefficients();
    let broken = sign_flipped_operator(&lambda, &mu, 8)?;
    let report = verify_operators(&[broken])?;
    println!("with the sign of A_h flipped:\n{report}");
    Ok(())
}
