//! Concrete coefficient pairs and initial data.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::Error;
use crate::grid::{Function1D, Function2D};

/// `λ(x) = x sin(πx) + 0.1`, `μ(y) = cos(2πy) + 1.1`.
pub fn paper_coefficients() -> (Function1D, Function1D) {
    (
        Function1D::new("x*sin(pi*x)+0.1", |x| x * (PI * x).sin() + 0.1),
        Function1D::new("cos(2*pi*y)+1.1", |y| (2.0 * PI * y).cos() + 1.1),
    )
}

/// `λ = μ ≡ 1`, which turns `L` into the Laplacian.
pub fn constant_coefficients() -> (Function1D, Function1D) {
    (Function1D::constant(1.0), Function1D::constant(1.0))
}

/// `η₀(x, y) = sin(3πx) cos(2πy)`; the experiments smooth it by `L_h⁻⁴`.
pub fn paper_initial_function() -> Function2D {
    Function2D::new("sin(3*pi*x)*cos(2*pi*y)", |x, y| {
        (3.0 * PI * x).sin() * (2.0 * PI * y).cos()
    })
}

/// Coefficient selector shared by the CLI and the experiment configs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientSet {
    Paper,
    Constant,
}

impl CoefficientSet {
    pub fn functions(self) -> (Function1D, Function1D) {
        match self {
            CoefficientSet::Paper => paper_coefficients(),
            CoefficientSet::Constant => constant_coefficients(),
        }
    }
}

impl FromStr for CoefficientSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "paper" => Ok(CoefficientSet::Paper),
            "constant" => Ok(CoefficientSet::Constant),
            other => Err(Error::InvalidArgument(format!(
                "unknown coefficient set {other:?} (expected paper or constant)"
            ))),
        }
    }
}
