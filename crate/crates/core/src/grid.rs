//! Uniform square mesh on the unit square and the piecewise-bilinear finite element
//! fields living on it.
//!
//! A [`Field`] stores the coefficients of `Σ U[i][j] φ_ij` for the interior nodes
//! `i, j = 1..m-1` only. Boundary values are zero and never stored. Storage is
//! `i` (the x index) fastest, so x-lines are contiguous.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return invalid(format!("grid needs m >= 2 subintervals, got {m}"));
        }
        Ok(Grid { m })
    }

    /// Number of subintervals per dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// Interior nodes per dimension, `m - 1`.
    pub fn n(&self) -> usize {
        self.m - 1
    }

    /// Total number of interior nodes, `(m - 1)^2`.
    pub fn interior_count(&self) -> usize {
        self.n() * self.n()
    }

    /// Node coordinate `i / m` for `i = 0..=m`.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.m as f64
    }

    /// Storage index of interior node `(i, j)`, both in `1..m`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..self.m).contains(&i) && (1..self.m).contains(&j));
        (i - 1) + (j - 1) * self.n()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.m != other.m {
            return Err(Error::GridMismatch {
                expected: self.m,
                found: other.m,
            });
        }
        Ok(())
    }
}

/// A named real function of one variable, used for the diffusion coefficients.
#[derive(Clone)]
pub struct Function1D {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Function1D {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Function1D {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Minimum and maximum over `samples + 1` uniformly spaced points of `[0, 1]`.
    pub fn sampled_extrema(&self, samples: usize) -> (f64, f64) {
        let samples = samples.max(1);
        (0..=samples)
            .map(|s| self.eval(s as f64 / samples as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl fmt::Debug for Function1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Function1D").field(&self.name).finish()
    }
}

/// A named real function of `(x, y)`, used for initial data and exact solutions.
#[derive(Clone)]
pub struct Function2D {
    name: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Function2D {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Function2D {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
}

impl fmt::Debug for Function2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Function2D").field(&self.name).finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.interior_count()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return invalid(format!(
                "field on m = {} needs {} values, got {}",
                grid.m(),
                grid.interior_count(),
                values.len()
            ));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite field value at storage index {p}"));
        }
        Ok(Field { grid, values })
    }

    /// Field with `U[i][j] = f(i, j)` over interior node indices.
    pub fn from_nodes(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let m = grid.m();
        let mut values = Vec::with_capacity(grid.interior_count());
        for j in 1..m {
            for i in 1..m {
                values.push(f(i, j));
            }
        }
        Field { grid, values }
    }

    /// Field whose only nonzero coefficient is `value` at node `(i, j)`.
    pub fn unit_node(grid: Grid, i: usize, j: usize, value: f64) -> Self {
        let mut u = Field::zeros(grid);
        let p = grid.index(i, j);
        u.values[p] = value;
        u
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Coefficient at interior node `(i, j)`; zero on the boundary ring.
    pub fn node(&self, i: usize, j: usize) -> f64 {
        let m = self.grid.m();
        if i == 0 || j == 0 || i >= m || j >= m {
            0.0
        } else {
            self.values[self.grid.index(i, j)]
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Field) -> Result<()> {
        self.grid.check_same(&x.grid)?;
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += alpha * v;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    /// Field with the roles of `x` and `y` exchanged: `T[i][j] = U[j][i]`.
    pub fn transposed(&self) -> Field {
        let n = self.grid.n();
        let mut out = vec![0.0; self.values.len()];
        transpose_into(&self.values, &mut out, n);
        Field {
            grid: self.grid,
            values: out,
        }
    }

    /// Largest absolute nodal value. For piecewise-bilinear functions this is the
    /// maximum over the whole domain.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Euclidean norm of the coefficient vector, summed in storage order.
    pub fn euclidean_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The lumped inner product `(u, v)_h = h^2 Σ U[i][j] V[i][j]`, summed in storage order.
    ///
    /// This equals the element-wise trapezoidal rule because every interior node is a
    /// corner of four elements, each contributing weight `h^2 / 4`.
    pub fn inner_product(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let h = self.grid.h();
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(h * h * s)
    }

    /// `‖u‖_h = h ‖U‖_2`.
    pub fn norm(&self) -> f64 {
        self.grid.h() * self.euclidean_norm()
    }

    /// Nodal interpolation `P_h g`.
    pub fn interpolate(grid: Grid, g: &Function2D) -> Field {
        Field::from_nodes(grid, |i, j| g.eval(grid.coord(i), grid.coord(j)))
    }

    /// Exact value of the finite element function at `(x, y)`.
    ///
    /// Points on an element edge are assigned to the lower-left element.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return invalid(format!("point ({x}, {y}) lies outside the unit square"));
        }
        let m = self.grid.m() as f64;
        Ok(self.evaluate_scaled(x * m, y * m))
    }

    /// Evaluation at mesh coordinates `(s, t) = (x m, y m)`.
    fn evaluate_scaled(&self, s: f64, t: f64) -> f64 {
        let m = self.grid.m();
        let (ei, xi) = locate(s, m);
        let (ej, eta) = locate(t, m);
        let u00 = self.node(ei, ej);
        let u10 = self.node(ei + 1, ej);
        let u01 = self.node(ei, ej + 1);
        let u11 = self.node(ei + 1, ej + 1);
        (1.0 - eta) * ((1.0 - xi) * u00 + xi * u10) + eta * ((1.0 - xi) * u01 + xi * u11)
    }

    /// Samples this finite element function at the interior nodes of `fine`.
    ///
    /// The meshes need not be nested; the result is the exact nodal interpolant.
    pub fn prolong_to(&self, fine: Grid) -> Field {
        self.sample_on(fine)
    }

    /// Nodal interpolant of this finite element function on any grid, coarser or finer.
    pub fn sample_on(&self, grid: Grid) -> Field {
        if grid == self.grid {
            return self.clone();
        }
        let ratio = self.grid.m() as f64 / grid.m() as f64;
        Field::from_nodes(grid, |i, j| {
            self.evaluate_scaled(i as f64 * ratio, j as f64 * ratio)
        })
    }

    /// Writes the text format: `m` on the first line, then one value per line in
    /// storage order with 17 significant digits.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", self.grid.m())?;
        for v in &self.values {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Field> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))??;
        let m: usize = header
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad grid size {header:?}: {e}")))?;
        let grid = Grid::new(m)?;
        let mut values = Vec::with_capacity(grid.interior_count());
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {line:?}: {e}", lineno + 2)))?;
            values.push(v);
        }
        Field::from_values(grid, values).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Field> {
        let file = std::fs::File::open(path)?;
        Field::read_from(std::io::BufReader::new(file))
    }
}

/// Element index and local coordinate in `[0, 1]` for mesh coordinate `s ∈ [0, m]`.
#[inline]
fn locate(s: f64, m: usize) -> (usize, f64) {
    let e = (s.ceil() as usize).saturating_sub(1).min(m - 1);
    (e, (s - e as f64).clamp(0.0, 1.0))
}

/// Transposes an `n x n` block stored row-major.
pub(crate) fn transpose_into(src: &[f64], dst: &mut [f64], n: usize) {
    const B: usize = 32;
    for jb in (0..n).step_by(B) {
        for ib in (0..n).step_by(B) {
            for j in jb..(jb + B).min(n) {
                for i in ib..(ib + B).min(n) {
                    dst[j + i * n] = src[i + j * n];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_nodes(grid, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn grid_sizes() {
        let g = Grid::new(2).unwrap();
        assert_eq!(g.interior_count(), 1);
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.coord(1), 0.5);
        let g = Grid::new(16).unwrap();
        assert_eq!(g.interior_count(), 225);
        assert_eq!(g.h(), 0.0625);
        let g = Grid::new(1024).unwrap();
        assert_eq!(g.h(), 2f64.powi(-10));
        assert_eq!(g.coord(0), 0.0);
        assert_eq!(g.coord(1024), 1.0);
    }

    #[test]
    fn grid_rejects_small_m() {
        assert!(matches!(Grid::new(1), Err(Error::InvalidArgument(_))));
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn single_node_inner_product_and_norm() {
        for m in [2, 5, 16] {
            let g = Grid::new(m).unwrap();
            let u = Field::unit_node(g, 1, 1, 1.0);
            let h = g.h();
            assert!((u.inner_product(&u).unwrap() - h * h).abs() < 1e-15);
            assert!((u.norm() - h).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_field_products() {
        let g = Grid::new(8).unwrap();
        let z = Field::zeros(g);
        let v = random_field(g, 1);
        assert_eq!(z.inner_product(&v).unwrap(), 0.0);
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn all_ones_norm() {
        let g = Grid::new(4).unwrap();
        let u = Field::from_nodes(g, |_, _| 1.0);
        assert!((u.norm() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn element_loop_trapezoid_matches_reduced_form() {
        let g = Grid::new(8).unwrap();
        let u = random_field(g, 2);
        let v = random_field(g, 3);
        let h = g.h();
        let mut s = 0.0;
        for j in 0..8 {
            for i in 0..8 {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    s += u.node(i + di, j + dj) * v.node(i + di, j + dj);
                }
            }
        }
        let oracle = h * h / 4.0 * s;
        let got = u.inner_product(&v).unwrap();
        assert!((got - oracle).abs() <= 1e-14 * oracle.abs().max(1.0));
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let a = Field::zeros(Grid::new(4).unwrap());
        let b = Field::zeros(Grid::new(5).unwrap());
        assert!(matches!(
            a.inner_product(&b),
            Err(Error::GridMismatch {
                expected: 4,
                found: 5
            })
        ));
    }

    #[test]
    fn interpolate_paper_initial_function() {
        let g = Grid::new(16).unwrap();
        let eta0 = Function2D::new("eta0", |x, y| {
            (3.0 * std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * y).cos()
        });
        let u = Field::interpolate(g, &eta0);
        assert_eq!(u.node(3, 5), eta0.eval(3.0 / 16.0, 5.0 / 16.0));
        let zero = Field::interpolate(g, &Function2D::new("0", |_, _| 0.0));
        assert_eq!(zero, Field::zeros(g));
    }

    #[test]
    fn evaluate_at_nodes_and_inside() {
        let g = Grid::new(8).unwrap();
        let u = random_field(g, 4);
        for (i, j) in [(1, 1), (3, 7), (7, 2)] {
            assert_eq!(u.evaluate(g.coord(i), g.coord(j)).unwrap(), u.node(i, j));
        }
        assert_eq!(u.evaluate(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(u.evaluate(0.7, 1.0).unwrap(), 0.0);

        let g2 = Grid::new(2).unwrap();
        let bump = Field::unit_node(g2, 1, 1, 1.0);
        assert!((bump.evaluate(0.25, 0.25).unwrap() - 0.25).abs() < 1e-15);
        // x on a vertical midline: average of the two flanking bilinear values along the edge
        let x = 0.5 * (g.coord(2) + g.coord(3));
        let y = g.coord(4);
        let expected = 0.5 * (u.node(2, 4) + u.node(3, 4));
        assert!((u.evaluate(x, y).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn evaluate_outside_fails() {
        let u = Field::zeros(Grid::new(4).unwrap());
        assert!(u.evaluate(-0.1, 0.5).is_err());
        assert!(u.evaluate(0.5, 1.5).is_err());
    }

    #[test]
    fn prolong_single_node() {
        let coarse = Grid::new(2).unwrap();
        let fine = Grid::new(4).unwrap();
        let p = Field::unit_node(coarse, 1, 1, 1.0).prolong_to(fine);
        let hat = [0.5, 1.0, 0.5];
        for j in 1..4 {
            for i in 1..4 {
                assert!((p.node(i, j) - hat[i - 1] * hat[j - 1]).abs() < 1e-15);
            }
        }
        let z = Field::zeros(coarse).prolong_to(fine);
        assert_eq!(z, Field::zeros(fine));
    }

    #[test]
    fn interpolation_is_a_projection() {
        let g = Grid::new(9).unwrap();
        let u = random_field(g, 5);
        let uu = u.clone();
        let f = Function2D::new("u", move |x, y| uu.evaluate(x, y).unwrap());
        let back = Field::interpolate(g, &f);
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn field_file_round_trip_and_format() {
        let g = Grid::new(3).unwrap();
        let u = Field::from_nodes(g, |i, j| (i * 10 + j) as f64 / 3.0);
        let mut buf = Vec::new();
        u.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "3");
        assert_eq!(lines[1], "3.6666666666666665e0");
        let back = Field::read_from(&buf[..]).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn field_file_rejects_wrong_length() {
        let text = "3\n1.0\n2.0\n";
        assert!(matches!(
            Field::read_from(text.as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            Field::read_from("x\n".as_bytes()),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn transpose_swaps_axes() {
        let g = Grid::new(6).unwrap();
        let u = random_field(g, 6);
        let t = u.transposed();
        assert_eq!(t.node(2, 4), u.node(4, 2));
        assert_eq!(t.transposed(), u);
    }

    #[test]
    fn sampled_extrema_of_paper_lambda() {
        let lambda = Function1D::new("lambda", |x| x * (std::f64::consts::PI * x).sin() + 0.1);
        let (lo, hi) = lambda.sampled_extrema(10_000);
        assert!((lo - 0.1).abs() < 1e-12);
        assert!((hi - 0.6792).abs() < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn norm_squared_is_inner_product(m in 2usize..20, seed in any::<u64>()) {
                let g = Grid::new(m).unwrap();
                let u = random_field(g, seed);
                let ip = u.inner_product(&u).unwrap();
                let n = u.norm();
                prop_assert!((n * n - ip).abs() <= 1e-14 * ip.max(1e-300));
            }

            #[test]
            fn file_round_trip_is_exact(m in 2usize..12, seed in any::<u64>()) {
                let u = random_field(Grid::new(m).unwrap(), seed);
                let mut buf = Vec::new();
                u.write_to(&mut buf).unwrap();
                prop_assert_eq!(Field::read_from(&buf[..]).unwrap(), u);
            }
        }
    }
}
