//! Grids, finite element fields, the lumped norm, resampling and the field file format.
//!
//! cargo run --release --example fields

use std::f64::consts::PI;

use dimsplit::oracle::exact_l2_norm;
use dimsplit::{Field, Function2D, Grid};

fn main() -> dimsplit::Result<()> {
    let g = Function2D::new("sin(pi x) sin(pi y)", |x, y| {
        (PI * x).sin() * (PI * y).sin()
    });

    println!(
        "{:>6} {:>14} {:>14} {:>14}",
        "m", "|P_h g|_h", "|P_h g|_L2", "value at (0.3,0.7)"
    );
    for m in [4, 8, 16, 32] {
        let grid = Grid::new(m)?;
        let u = Field::interpolate(grid, &g);
        println!(
            "{m:>6} {:>14.8} {:>14.8} {:>14.8}",
            u.norm(),
            exact_l2_norm(&u),
            u.evaluate(0.3, 0.7)?
        );
    }
    println!("exact: |g|_L2 = 0.5, g(0.3, 0.7) = {:.8}", g.eval(0.3, 0.7));

    let coarse = Field::interpolate(Grid::new(8)?, &g);
    let fine = coarse.prolong_to(Grid::new(24)?);
    println!(
        "prolonged 8 -> 24, back to 8 exactly: {}",
        fine.sample_on(coarse.grid()) == coarse
    );

    let path = std::env::temp_dir().join("dimsplit-field.txt");
    coarse.save(&path)?;
    let back = Field::load(&path)?;
    println!(
        "wrote {} ({} values), read back identical: {}",
        path.display(),
        back.values().len(),
        back == coarse
    );
    Ok(())
}
