//! Quadrature finite element matrices for the separable diffusion operator
//! `L u = ∂x(λ(x)μ(y) ∂x u) + ∂y(λ(x)μ(y) ∂y u)` and their matrix-free action.
//!
//! With the lumped mass matrix `M = h² I` the stiffness matrices factor as
//! `K_A = K_λ ⊗ D_μ` and `K_B = D_λ ⊗ K_μ`, so `A_h = -K_A / h²` acts on every
//! x-line independently and `B_h = -K_B / h²` on every y-line. Nothing of size
//! `N x N` is ever formed.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{transpose_into, Field, Function1D, Grid};
use crate::linsolve::{power_iteration_normal, LinearSolver, PowerEstimate};

/// Sample count used for the coefficient extrema `λ₀, ‖λ‖∞, μ₀, ‖μ‖∞`.
pub const EXTREMA_SAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalMatrix {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return invalid(format!(
                "tridiagonal bands have lengths {}/{}/{}",
                sub.len(),
                n,
                sup.len()
            ));
        }
        Ok(TridiagonalMatrix { sub, diag, sup })
    }

    /// The 1D quadrature stiffness matrix of coefficient `c` on the interior nodes:
    /// `tridiag(-(c_{i-1}+c_i), c_{i-1}+2c_i+c_{i+1}, -(c_i+c_{i+1})) / 2`.
    ///
    /// There is no `1/h` factor; it is absorbed by the lumped mass `h² I`.
    pub fn stiffness(c: &Function1D, grid: Grid) -> Self {
        let m = grid.m();
        let cv: Vec<f64> = (0..=m).map(|i| c.eval(grid.coord(i))).collect();
        let diag = (1..m)
            .map(|i| 0.5 * (cv[i - 1] + 2.0 * cv[i] + cv[i + 1]))
            .collect();
        let off: Vec<f64> = (1..m - 1).map(|i| -0.5 * (cv[i] + cv[i + 1])).collect();
        TridiagonalMatrix {
            sub: off.clone(),
            diag,
            sup: off,
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = self.diag[i];
            if i > 0 {
                a[i * n + i - 1] = self.sub[i - 1];
            }
            if i + 1 < n {
                a[i * n + i + 1] = self.sup[i];
            }
        }
        a
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm for `T x = rhs`, no pivoting. Fails on a zero pivot.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if rhs.len() != n {
            return invalid(format!("rhs length {} != {}", rhs.len(), n));
        }
        let mut x = rhs.to_vec();
        let mut c = vec![0.0; n];
        thomas(
            |i| self.diag[i],
            |i| self.sub[i - 1],
            |i| self.sup[i],
            &mut x,
            &mut c,
        )?;
        Ok(x)
    }

    /// Solves `(I + s T) x = rhs` in place. `scratch` needs length `n`.
    #[inline]
    pub fn solve_shifted_in_place(&self, s: f64, rhs: &mut [f64], scratch: &mut [f64]) {
        // I + sT with T positive semidefinite and s > 0 is strictly diagonally dominant
        // for stiffness matrices, so no pivot can vanish.
        let n = self.n();
        debug_assert_eq!(rhs.len(), n);
        let d = &self.diag;
        let l = &self.sub;
        let u = &self.sup;
        let mut denom = 1.0 + s * d[0];
        if n > 1 {
            scratch[0] = s * u[0] / denom;
        }
        rhs[0] /= denom;
        for i in 1..n {
            let li = s * l[i - 1];
            denom = 1.0 + s * d[i] - li * scratch[i - 1];
            if i + 1 < n {
                scratch[i] = s * u[i] / denom;
            }
            rhs[i] = (rhs[i] - li * rhs[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
    }
}

/// Generic Thomas elimination; `x` holds the right-hand side on entry.
fn thomas(
    diag: impl Fn(usize) -> f64,
    sub: impl Fn(usize) -> f64,
    sup: impl Fn(usize) -> f64,
    x: &mut [f64],
    c: &mut [f64],
) -> Result<()> {
    let n = x.len();
    let mut denom = diag(0);
    for i in 0..n {
        if i > 0 {
            denom = diag(i) - sub(i) * c[i - 1];
        }
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "zero pivot in tridiagonal solve at row {i}"
            )));
        }
        if i + 1 < n {
            c[i] = sup(i) / denom;
        }
        x[i] = if i > 0 {
            (x[i] - sub(i) * x[i - 1]) / denom
        } else {
            x[i] / denom
        };
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMatrix {
    diag: Vec<f64>,
}

impl DiagonalMatrix {
    /// `diag(c(x_i))` over the interior nodes.
    pub fn sampled(c: &Function1D, grid: Grid) -> Self {
        DiagonalMatrix {
            diag: (1..grid.m()).map(|i| c.eval(grid.coord(i))).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

/// Extremal coefficient values estimated on a uniform sampling of `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientBounds {
    pub lambda_0: f64,
    pub lambda_inf: f64,
    pub mu_0: f64,
    pub mu_inf: f64,
}

impl CoefficientBounds {
    /// `sqrt(‖λ‖∞ ‖μ‖∞ / (λ₀ μ₀))`, the h-uniform bound on `‖A_h L_h⁻¹‖_h`.
    pub fn stability_bound(&self) -> f64 {
        (self.lambda_inf * self.mu_inf / (self.lambda_0 * self.mu_0)).sqrt()
    }
}

/// The split operator `L_h = A_h + B_h` of the dimension-split diffusion problem.
#[derive(Clone, Debug)]
pub struct SplitDiffusionOperator {
    grid: Grid,
    lambda: Function1D,
    mu: Function1D,
    k_lambda: TridiagonalMatrix,
    k_mu: TridiagonalMatrix,
    d_lambda: DiagonalMatrix,
    d_mu: DiagonalMatrix,
    bounds: CoefficientBounds,
    factors_a: FactorCache,
    factors_b: FactorCache,
}

type FactorCache = Arc<Mutex<Option<Arc<LineFactors>>>>;

const COLUMN_BLOCK: usize = 64;

/// LU factors of `I + s_l T` for every line `l` of a field, for one `κ`.
#[derive(Debug)]
struct LineFactors {
    kappa: f64,
    n: usize,
    inv_pivot: Vec<f64>,
    /// Sub-diagonal multiplier divided by the pivot; zero in the first slot.
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LineFactors {
    fn new(t: &TridiagonalMatrix, kappa: f64, shift: impl Fn(usize) -> f64 + Sync) -> Self {
        let n = t.n();
        let lines: Vec<[Vec<f64>; 3]> = (0..n)
            .into_par_iter()
            .map(|line| {
                let s = shift(line);
                let mut inv = vec![0.0; n];
                let mut lower = vec![0.0; n];
                let mut upper = vec![0.0; n];
                let mut prev = 0.0;
                for i in 0..n {
                    let l = if i > 0 { s * t.sub[i - 1] } else { 0.0 };
                    let d = 1.0 + s * t.diag[i] - l * prev;
                    inv[i] = 1.0 / d;
                    lower[i] = l / d;
                    prev = if i + 1 < n { s * t.sup[i] / d } else { 0.0 };
                    upper[i] = prev;
                }
                [inv, lower, upper]
            })
            .collect();
        let mut f = LineFactors {
            kappa,
            n,
            inv_pivot: Vec::with_capacity(n * n),
            lower: Vec::with_capacity(n * n),
            upper: Vec::with_capacity(n * n),
        };
        for [a, b, c] in lines {
            f.inv_pivot.extend(a);
            f.lower.extend(b);
            f.upper.extend(c);
        }
        f
    }

    /// Same factors with the line index running fastest, i.e. laid out like a field
    /// whose lines are its columns.
    fn transposed(mut self) -> Self {
        let n = self.n;
        for v in [&mut self.inv_pivot, &mut self.lower, &mut self.upper] {
            let mut t = vec![0.0; n * n];
            transpose_into(v, &mut t, n);
            *v = t;
        }
        self
    }

    /// Solves along the columns of the row-major `n x n` block `x`, using factors
    /// from [`LineFactors::transposed`]. Columns are swept in blocks of
    /// `COLUMN_BLOCK`, one block per task.
    fn solve_columns(&self, x: &mut [f64]) {
        let n = self.n;
        let mut blocks: Vec<Vec<&mut [f64]>> = Vec::new();
        for row in x.chunks_mut(n) {
            for (b, piece) in row.chunks_mut(COLUMN_BLOCK).enumerate() {
                if blocks.len() <= b {
                    blocks.push(Vec::with_capacity(n));
                }
                blocks[b].push(piece);
            }
        }
        blocks
            .into_par_iter()
            .enumerate()
            .for_each(|(b, mut rows)| {
                let c0 = b * COLUMN_BLOCK;
                let w = rows[0].len();
                let span = |j: usize| j * n + c0..j * n + c0 + w;
                for (c, a) in rows[0].iter_mut().zip(&self.inv_pivot[span(0)]) {
                    *c *= a;
                }
                for j in 1..n {
                    let (done, rest) = rows.split_at_mut(j);
                    let prev = &done[j - 1];
                    let inv = &self.inv_pivot[span(j)];
                    let lower = &self.lower[span(j)];
                    for (((c, p), a), l) in rest[0].iter_mut().zip(prev.iter()).zip(inv).zip(lower)
                    {
                        *c = *c * a - l * p;
                    }
                }
                for j in (0..n - 1).rev() {
                    let (head, tail) = rows.split_at_mut(j + 1);
                    let next = &tail[0];
                    let upper = &self.upper[span(j)];
                    for ((c, nx), u) in head[j].iter_mut().zip(next.iter()).zip(upper) {
                        *c -= u * nx;
                    }
                }
            });
    }

    fn solve(&self, line: usize, x: &mut [f64]) {
        let r = line * self.n..(line + 1) * self.n;
        let (inv, lower, upper) = (
            &self.inv_pivot[r.clone()],
            &self.lower[r.clone()],
            &self.upper[r],
        );
        let mut prev = 0.0;
        for i in 0..self.n {
            prev = x[i] * inv[i] - lower[i] * prev;
            x[i] = prev;
        }
        for i in (0..self.n - 1).rev() {
            x[i] -= upper[i] * x[i + 1];
        }
    }
}

fn cached_factors(
    cache: &FactorCache,
    kappa: f64,
    build: impl FnOnce() -> LineFactors,
) -> Arc<LineFactors> {
    let mut slot = cache.lock().unwrap_or_else(|e| e.into_inner());
    match slot.as_ref() {
        Some(f) if f.kappa == kappa => f.clone(),
        _ => {
            let f = Arc::new(build());
            *slot = Some(f.clone());
            f
        }
    }
}

impl SplitDiffusionOperator {
    pub fn assemble(lambda: &Function1D, mu: &Function1D, grid: Grid) -> Result<Self> {
        let (lambda_0, lambda_inf) = lambda.sampled_extrema(EXTREMA_SAMPLES);
        let (mu_0, mu_inf) = mu.sampled_extrema(EXTREMA_SAMPLES);
        for (name, lo) in [(lambda.name(), lambda_0), (mu.name(), mu_0)] {
            if !(lo > 0.0) {
                return invalid(format!(
                    "coefficient {name} must be strictly positive on [0, 1], sampled minimum {lo}"
                ));
            }
        }
        Ok(SplitDiffusionOperator {
            grid,
            lambda: lambda.clone(),
            mu: mu.clone(),
            k_lambda: TridiagonalMatrix::stiffness(lambda, grid),
            k_mu: TridiagonalMatrix::stiffness(mu, grid),
            d_lambda: DiagonalMatrix::sampled(lambda, grid),
            d_mu: DiagonalMatrix::sampled(mu, grid),
            bounds: CoefficientBounds {
                lambda_0,
                lambda_inf,
                mu_0,
                mu_inf,
            },
            factors_a: FactorCache::default(),
            factors_b: FactorCache::default(),
        })
    }

    /// Operator built from explicit 1D matrices, bypassing the positivity check.
    /// Used to construct deliberately broken operators in tests.
    pub fn from_parts(
        grid: Grid,
        k_lambda: TridiagonalMatrix,
        k_mu: TridiagonalMatrix,
        lambda: &Function1D,
        mu: &Function1D,
    ) -> Result<Self> {
        if k_lambda.n() != grid.n() || k_mu.n() != grid.n() {
            return invalid("1D matrices do not match the grid");
        }
        let (lambda_0, lambda_inf) = lambda.sampled_extrema(EXTREMA_SAMPLES);
        let (mu_0, mu_inf) = mu.sampled_extrema(EXTREMA_SAMPLES);
        Ok(SplitDiffusionOperator {
            grid,
            lambda: lambda.clone(),
            mu: mu.clone(),
            k_lambda,
            k_mu,
            d_lambda: DiagonalMatrix::sampled(lambda, grid),
            d_mu: DiagonalMatrix::sampled(mu, grid),
            bounds: CoefficientBounds {
                lambda_0,
                lambda_inf,
                mu_0,
                mu_inf,
            },
            factors_a: FactorCache::default(),
            factors_b: FactorCache::default(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn lambda(&self) -> &Function1D {
        &self.lambda
    }

    pub fn mu(&self) -> &Function1D {
        &self.mu
    }

    pub fn k_lambda(&self) -> &TridiagonalMatrix {
        &self.k_lambda
    }

    pub fn k_mu(&self) -> &TridiagonalMatrix {
        &self.k_mu
    }

    pub fn d_lambda(&self) -> &DiagonalMatrix {
        &self.d_lambda
    }

    pub fn d_mu(&self) -> &DiagonalMatrix {
        &self.d_mu
    }

    pub fn bounds(&self) -> CoefficientBounds {
        self.bounds
    }

    fn check(&self, u: &Field) -> Result<()> {
        self.grid.check_same(&u.grid())
    }

    /// `out = shift x + ca K_A x + cb K_B x` on raw coefficient vectors.
    pub(crate) fn stiffness_combination(
        &self,
        x: &[f64],
        out: &mut [f64],
        shift: f64,
        ca: f64,
        cb: f64,
    ) {
        let n = self.grid.n();
        debug_assert_eq!(x.len(), n * n);
        debug_assert_eq!(out.len(), n * n);
        let kl = &self.k_lambda;
        let km = &self.k_mu;
        let dl = self.d_lambda.diag();
        let dm = self.d_mu.diag();
        out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            let cur = &x[j * n..(j + 1) * n];
            let mu_j = dm[j];
            for i in 0..n {
                let mut v = shift * cur[i];
                if ca != 0.0 {
                    let mut ka = kl.diag[i] * cur[i];
                    if i > 0 {
                        ka += kl.sub[i - 1] * cur[i - 1];
                    }
                    if i + 1 < n {
                        ka += kl.sup[i] * cur[i + 1];
                    }
                    v += ca * (mu_j * ka);
                }
                row[i] = v;
            }
            if cb != 0.0 {
                let lo = (j > 0).then(|| (km.sub[j - 1], &x[(j - 1) * n..j * n]));
                let hi = (j + 1 < n).then(|| (km.sup[j], &x[(j + 1) * n..(j + 2) * n]));
                let dj = km.diag[j];
                for i in 0..n {
                    let mut kb = dj * cur[i];
                    if let Some((c, prev)) = lo {
                        kb += c * prev[i];
                    }
                    if let Some((c, next)) = hi {
                        kb += c * next[i];
                    }
                    row[i] += cb * (dl[i] * kb);
                }
            }
        });
    }

    fn combine(&self, u: &Field, shift: f64, ca: f64, cb: f64) -> Result<Field> {
        self.check(u)?;
        let mut out = Field::zeros(self.grid);
        self.stiffness_combination(u.values(), out.values_mut(), shift, ca, cb);
        Ok(out)
    }

    /// `A_h u = -(1/h²)(K_λ ⊗ D_μ) u`: every x-line `j` is multiplied by `-μ(y_j) K_λ / h²`.
    pub fn apply_a(&self, u: &Field) -> Result<Field> {
        let h = self.grid.h();
        self.combine(u, 0.0, -1.0 / (h * h), 0.0)
    }

    /// `B_h u = -(1/h²)(D_λ ⊗ K_μ) u`: every y-line `i` is multiplied by `-λ(x_i) K_μ / h²`.
    pub fn apply_b(&self, u: &Field) -> Result<Field> {
        let h = self.grid.h();
        self.combine(u, 0.0, 0.0, -1.0 / (h * h))
    }

    /// `L_h u = A_h u + B_h u` in a single sweep.
    pub fn apply_l(&self, u: &Field) -> Result<Field> {
        let h = self.grid.h();
        let c = -1.0 / (h * h);
        self.combine(u, 0.0, c, c)
    }

    /// `(I + c A_h) u` in a single sweep.
    pub fn apply_shifted_a(&self, c: f64, u: &Field) -> Result<Field> {
        let h = self.grid.h();
        self.combine(u, 1.0, -c / (h * h), 0.0)
    }

    /// `(I + c B_h) u` in a single sweep.
    pub fn apply_shifted_b(&self, c: f64, u: &Field) -> Result<Field> {
        let h = self.grid.h();
        self.combine(u, 1.0, 0.0, -c / (h * h))
    }

    /// `(I - κ A_h)⁻¹ rhs`: one Thomas solve per x-line,
    /// `(I + κ μ(y_j)/h² K_λ) w_{·,j} = rhs_{·,j}`.
    pub fn solve_resolvent_a(&self, kappa: f64, rhs: &Field) -> Result<Field> {
        check_kappa(kappa)?;
        self.check(rhs)?;
        let n = self.grid.n();
        let h2 = self.grid.h() * self.grid.h();
        let dm = self.d_mu.diag();
        let factors = cached_factors(&self.factors_a, kappa, || {
            LineFactors::new(&self.k_lambda, kappa, |j| kappa * dm[j] / h2)
        });
        let mut out = rhs.clone();
        out.values_mut()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, line)| factors.solve(j, line));
        Ok(out)
    }

    /// `(I - κ B_h)⁻¹ rhs`: one Thomas solve per y-line,
    /// `(I + κ λ(x_i)/h² K_μ) w_{i,·} = rhs_{i,·}`.
    ///
    /// All y-lines are swept together, row by row, so the field is never transposed.
    pub fn solve_resolvent_b(&self, kappa: f64, rhs: &Field) -> Result<Field> {
        check_kappa(kappa)?;
        self.check(rhs)?;
        let h2 = self.grid.h() * self.grid.h();
        let dl = self.d_lambda.diag();
        let factors = cached_factors(&self.factors_b, kappa, || {
            LineFactors::new(&self.k_mu, kappa, |i| kappa * dl[i] / h2).transposed()
        });
        let mut out = rhs.clone();
        factors.solve_columns(out.values_mut());
        Ok(out)
    }

    /// Power-iteration estimate of `‖A_h L_h⁻¹‖_h = ‖K_A (K_A + K_B)⁻¹‖₂`.
    ///
    /// Iterates on `GᵀG` with `G = K_A (K_A+K_B)⁻¹` and `Gᵀ = (K_A+K_B)⁻¹ K_A`.
    pub fn stability_norm_estimate(&self, solver: &LinearSolver) -> Result<PowerEstimate> {
        self.grid.check_same(&solver.grid())?;
        let n = self.grid.interior_count();
        let apply_ka = |x: &[f64]| {
            let mut out = vec![0.0; n];
            self.stiffness_combination(x, &mut out, 0.0, 1.0, 0.0);
            out
        };
        power_iteration_normal(
            |x: &[f64]| Ok(apply_ka(&solver.solve_stiffness(x)?)),
            |x: &[f64]| solver.solve_stiffness(&apply_ka(x)),
            n,
            STABILITY_MAX_ITER,
            STABILITY_TOL,
        )
    }
}

pub const STABILITY_MAX_ITER: usize = 500;
pub const STABILITY_TOL: f64 = 1e-8;

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return invalid(format!("resolvent parameter must be positive, got {kappa}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_assemble, DenseMatrix};
    use crate::problem::{constant_coefficients, paper_coefficients};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_nodes(grid, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        d / n.max(f64::MIN_POSITIVE)
    }

    fn paper_op(m: usize) -> SplitDiffusionOperator {
        let (l, mu) = paper_coefficients();
        SplitDiffusionOperator::assemble(&l, &mu, Grid::new(m).unwrap()).unwrap()
    }

    fn unit_op(m: usize) -> SplitDiffusionOperator {
        let (l, mu) = constant_coefficients();
        SplitDiffusionOperator::assemble(&l, &mu, Grid::new(m).unwrap()).unwrap()
    }

    #[test]
    fn constant_coefficient_stiffness() {
        let k = TridiagonalMatrix::stiffness(&Function1D::constant(1.0), Grid::new(4).unwrap());
        assert_eq!(k.diag(), &[2.0, 2.0, 2.0]);
        assert_eq!(k.sub(), &[-1.0, -1.0]);
        assert!(k.is_symmetric());
    }

    #[test]
    fn linear_coefficient_stiffness() {
        let k = TridiagonalMatrix::stiffness(&Function1D::new("x", |x| x), Grid::new(4).unwrap());
        for (a, b) in k.diag().iter().zip([0.5, 1.0, 1.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in k.sup().iter().zip([-0.375, -0.625]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interior_row_sums_vanish() {
        let (l, _) = paper_coefficients();
        let g = Grid::new(12).unwrap();
        let k = TridiagonalMatrix::stiffness(&l, g);
        let dense = k.to_dense();
        let n = k.n();
        for i in 0..n {
            let s: f64 = dense[i * n..(i + 1) * n].iter().sum();
            if i == 0 || i == n - 1 {
                assert!(s > 0.0);
            } else {
                assert!(s.abs() < 1e-14, "row {i} sums to {s}");
            }
        }
    }

    #[test]
    fn thomas_matches_matvec() {
        let k = TridiagonalMatrix::new(
            vec![1.0, -2.0, 0.5],
            vec![4.0, 5.0, 6.0, 3.0],
            vec![-1.0, 1.5, 0.25],
        )
        .unwrap();
        let x = vec![1.0, -2.0, 3.0, 0.5];
        let b = k.matvec(&x);
        let back = k.solve(&b).unwrap();
        assert!(rel_err(&back, &x) < 1e-14);
        let singular = TridiagonalMatrix::new(vec![1.0], vec![1.0, 1.0], vec![1.0]).unwrap();
        assert!(singular.solve(&[1.0, 1.0]).is_err());
        assert!(TridiagonalMatrix::new(vec![1.0], vec![1.0], vec![]).is_err());
    }

    #[test]
    fn resolvent_residuals_with_cached_factors() {
        let op = paper_op(101);
        let fresh = paper_op(101);
        let u = random_field(op.grid(), 21);
        for kappa in [1e-3, 0.5, 1e-3, 40.0, 0.5] {
            let wa = op.solve_resolvent_a(kappa, &u).unwrap();
            let mut ra = op.apply_a(&wa).unwrap();
            ra.scale(-kappa);
            ra.axpy(1.0, &wa).unwrap();
            assert!(
                ra.sub(&u).unwrap().norm() <= 1e-12 * u.norm(),
                "A, kappa = {kappa}"
            );
            let wb = op.solve_resolvent_b(kappa, &u).unwrap();
            let mut rb = op.apply_b(&wb).unwrap();
            rb.scale(-kappa);
            rb.axpy(1.0, &wb).unwrap();
            assert!(
                rb.sub(&u).unwrap().norm() <= 1e-12 * u.norm(),
                "B, kappa = {kappa}"
            );
            assert_eq!(wb, fresh.solve_resolvent_b(kappa, &u).unwrap());
        }
    }

    #[test]
    fn shifted_solve_residual() {
        let k = TridiagonalMatrix::stiffness(&paper_coefficients().0, Grid::new(40).unwrap());
        let n = k.n();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for s in [1e-3, 1.0, 1e4] {
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = rhs.clone();
            let mut scratch = vec![0.0; n];
            k.solve_shifted_in_place(s, &mut x, &mut scratch);
            let kx = k.matvec(&x);
            let r: Vec<f64> = (0..n).map(|i| x[i] + s * kx[i] - rhs[i]).collect();
            let rn: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bn: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rn <= 1e-12 * bn, "s = {s}: residual {rn}");
        }
    }

    #[test]
    fn assemble_paper_operator() {
        let op = paper_op(16);
        let b = op.bounds();
        assert!((b.lambda_0 - 0.1).abs() < 1e-12);
        assert!((b.mu_0 - 0.1).abs() < 1e-12);
        assert!((b.mu_inf - 2.1).abs() < 1e-12);
        assert!((b.lambda_inf - 0.6792).abs() < 5e-4);
        let unit = unit_op(6);
        assert_eq!(unit.k_lambda().diag(), &[2.0; 5]);
        assert_eq!(unit.d_mu().diag(), &[1.0; 5]);
    }

    #[test]
    fn assemble_rejects_nonpositive_coefficient() {
        let bad = Function1D::new("x", |x| x);
        let one = Function1D::constant(1.0);
        let g = Grid::new(8).unwrap();
        assert!(matches!(
            SplitDiffusionOperator::assemble(&bad, &one, g),
            Err(Error::InvalidArgument(_))
        ));
        assert!(SplitDiffusionOperator::assemble(&one, &bad, g).is_err());
    }

    #[test]
    fn sine_eigenpairs_constant_coefficients() {
        for m in [4, 9, 16] {
            let op = unit_op(m);
            let g = op.grid();
            let h = g.h();
            let ev = (2.0 - 2.0 * (PI * h).cos()) / (h * h);
            let u = Field::from_nodes(g, |i, j| {
                (PI * i as f64 * h).sin() * (PI * j as f64 * h).sin()
            });
            let mut expect = u.clone();
            expect.scale(-ev);
            assert!(rel_err(op.apply_a(&u).unwrap().values(), expect.values()) < 1e-13);
            assert!(rel_err(op.apply_b(&u).unwrap().values(), expect.values()) < 1e-13);
            expect.scale(2.0);
            assert!(rel_err(op.apply_l(&u).unwrap().values(), expect.values()) < 1e-13);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let op = paper_op(8);
        let z = Field::zeros(op.grid());
        assert_eq!(op.apply_a(&z).unwrap(), z);
        assert_eq!(op.apply_b(&z).unwrap(), z);
        assert_eq!(op.apply_l(&z).unwrap(), z);
        assert_eq!(op.solve_resolvent_a(0.3, &z).unwrap(), z);
        assert_eq!(op.solve_resolvent_b(7.0, &z).unwrap(), z);
    }

    #[test]
    fn scalar_resolvent() {
        let op = unit_op(2);
        let one = Field::unit_node(op.grid(), 1, 1, 1.0);
        assert_eq!(op.apply_a(&one).unwrap().values(), &[-8.0]);
        let w = op.solve_resolvent_a(0.1, &one).unwrap();
        assert!((w.values()[0] - 1.0 / 1.8).abs() < 1e-15);
        let w = op.solve_resolvent_b(0.1, &one).unwrap();
        assert!((w.values()[0] - 1.0 / 1.8).abs() < 1e-15);
    }

    #[test]
    fn bad_kappa_and_grid_mismatch() {
        let op = paper_op(8);
        let u = Field::zeros(op.grid());
        assert!(op.solve_resolvent_a(0.0, &u).is_err());
        assert!(op.solve_resolvent_b(-1.0, &u).is_err());
        let other = Field::zeros(Grid::new(5).unwrap());
        assert!(matches!(
            op.apply_a(&other),
            Err(Error::GridMismatch { .. })
        ));
        assert!(op.apply_b(&other).is_err());
        assert!(op.apply_l(&other).is_err());
        assert!(op.solve_resolvent_a(1.0, &other).is_err());
    }

    #[test]
    fn matches_dense_kronecker_oracle() {
        for m in [2, 4, 8] {
            let op = paper_op(m);
            let dense = dense_assemble(&op).unwrap();
            for seed in 0..5 {
                let u = random_field(op.grid(), seed);
                let a = dense.a.matvec(u.values());
                let b = dense.b.matvec(u.values());
                let l = dense.l.matvec(u.values());
                assert!(rel_err(op.apply_a(&u).unwrap().values(), &a) <= 1e-13);
                assert!(rel_err(op.apply_b(&u).unwrap().values(), &b) <= 1e-13);
                assert!(rel_err(op.apply_l(&u).unwrap().values(), &l) <= 1e-13);
                for kappa in [0.01, 1.0] {
                    let ra = DenseMatrix::identity(u.values().len()).sub_scaled(kappa, &dense.a);
                    let rb = DenseMatrix::identity(u.values().len()).sub_scaled(kappa, &dense.b);
                    let wa = ra.lu_solve(u.values()).unwrap();
                    let wb = rb.lu_solve(u.values()).unwrap();
                    assert!(
                        rel_err(op.solve_resolvent_a(kappa, &u).unwrap().values(), &wa) <= 1e-11
                    );
                    assert!(
                        rel_err(op.solve_resolvent_b(kappa, &u).unwrap().values(), &wb) <= 1e-11
                    );
                }
            }
        }
    }

    #[test]
    fn resolvent_residual_small() {
        let op = paper_op(8);
        let rhs = random_field(op.grid(), 11);
        let w = op.solve_resolvent_a(0.01, &rhs).unwrap();
        let mut r = op.apply_a(&w).unwrap();
        r.scale(-0.01);
        r.axpy(1.0, &w).unwrap();
        let r = r.sub(&rhs).unwrap();
        assert!(r.norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn coefficient_swap_transposes() {
        let (l, mu) = paper_coefficients();
        let g = Grid::new(11).unwrap();
        let op = SplitDiffusionOperator::assemble(&l, &mu, g).unwrap();
        let swapped = SplitDiffusionOperator::assemble(&mu, &l, g).unwrap();
        let u = random_field(g, 3);
        let a = op.apply_a(&u).unwrap();
        let b_swapped = swapped.apply_b(&u.transposed()).unwrap().transposed();
        assert!(rel_err(b_swapped.values(), a.values()) < 1e-15);
        let ra = op.solve_resolvent_a(0.2, &u).unwrap();
        let rb = swapped
            .solve_resolvent_b(0.2, &u.transposed())
            .unwrap()
            .transposed();
        assert!(rel_err(rb.values(), ra.values()) < 1e-15);
    }

    #[test]
    fn dissipativity_and_nonexpansivity() {
        for m in [4, 8, 16, 32] {
            let op = paper_op(m);
            for seed in 0..10 {
                let u = random_field(op.grid(), seed);
                let nu2 = u.norm().powi(2);
                assert!(op.apply_a(&u).unwrap().inner_product(&u).unwrap() <= 1e-12 * nu2);
                assert!(op.apply_b(&u).unwrap().inner_product(&u).unwrap() <= 1e-12 * nu2);
                for kappa in [1e-3, 1.0, 1e3] {
                    let w = op.solve_resolvent_a(kappa, &u).unwrap();
                    assert!(w.norm() <= (1.0 + 1e-12) * u.norm());
                    // Cayley transform (I + κA)(I - κA)⁻¹
                    let mut c = op.apply_a(&w).unwrap();
                    c.scale(kappa);
                    c.axpy(1.0, &w).unwrap();
                    assert!(c.norm() <= (1.0 + 1e-12) * u.norm());
                }
            }
        }
    }

    #[test]
    fn stability_norm_unit_coefficients() {
        for m in [4, 8, 16] {
            let op = unit_op(m);
            let solver = LinearSolver::kronecker_direct(&op).unwrap();
            let est = op.stability_norm_estimate(&solver).unwrap();
            assert!(est.value <= 1.0 + 1e-9, "m = {m}: {}", est.value);
            let dense = dense_assemble(&op).unwrap();
            let g = dense.a.matmul(&dense.l.inverse().unwrap());
            let exact = g.spectral_norm();
            assert!((est.value - exact).abs() <= 1e-2 * exact);
        }
    }

    #[test]
    fn stability_norm_paper_coefficients_matches_dense() {
        let op = paper_op(8);
        let solver = LinearSolver::kronecker_direct(&op).unwrap();
        let est = op.stability_norm_estimate(&solver).unwrap();
        let dense = dense_assemble(&op).unwrap();
        let exact = dense.a.matmul(&dense.l.inverse().unwrap()).spectral_norm();
        assert!(
            (est.value - exact).abs() <= 1e-2 * exact,
            "{} vs {exact}",
            est.value
        );
        assert!(est.value <= op.bounds().stability_bound() + 1e-6);
    }
}
