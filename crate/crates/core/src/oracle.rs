//! Brute-force reference implementations for small grids.
//!
//! Everything here is dense and `O(N²)` or worse. It exists to check the
//! matrix-free code paths and is never called by the stepping or solver code.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Function2D};
use crate::operators::SplitDiffusionOperator;

/// Largest unknown count accepted by [`dense_assemble`].
pub const DENSE_BUDGET: usize = 4096;

/// Row-major dense square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        DenseMatrix { n, data }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        DenseMatrix { n, data }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |r, c| if r == c { d[r] } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |r, c| self.get(c, r))
    }

    pub fn scaled(&self, a: f64) -> Self {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|v| a * v).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        self.sub_scaled(-1.0, other)
    }

    /// `self - a * other`
    pub fn sub_scaled(&self, a: f64, other: &DenseMatrix) -> Self {
        assert_eq!(self.n, other.n);
        DenseMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x - a * y)
                .collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.data
            .chunks(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        DenseMatrix { n, data: out }
    }

    /// Kronecker product with `self` as the outer (slow) index.
    pub fn kron(&self, inner: &DenseMatrix) -> Self {
        let (na, nb) = (self.n, inner.n);
        Self::from_fn(na * nb, |r, c| {
            self.get(r / nb, c / nb) * inner.get(r % nb, c % nb)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |r, c| m[(r, c)])
    }

    /// Partial-pivoting LU solve.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let lu = self.to_nalgebra().lu();
        lu.solve(&nalgebra::DVector::from_column_slice(b))
            .map(|x| x.as_slice().to_vec())
            .ok_or_else(|| Error::InvalidArgument("singular dense matrix".into()))
    }

    pub fn inverse(&self) -> Result<Self> {
        self.to_nalgebra()
            .try_inverse()
            .map(|m| Self::from_nalgebra(&m))
            .ok_or_else(|| Error::InvalidArgument("singular dense matrix".into()))
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.to_nalgebra()
            .singular_values()
            .iter()
            .fold(0.0, |m: f64, v| m.max(*v))
    }

    /// Euclidean norm of `self - other` relative to `other`.
    pub fn rel_diff(&self, other: &DenseMatrix) -> f64 {
        self.sub_scaled(1.0, other).frobenius() / other.frobenius().max(f64::MIN_POSITIVE)
    }
}

/// Explicit matrices of `A_h`, `B_h` and `L_h` in field storage order.
#[derive(Clone, Debug)]
pub struct DenseOperators {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub l: DenseMatrix,
}

/// Literal Kronecker expansion of `-(1/h²) K_λ ⊗ D_μ` and `-(1/h²) D_λ ⊗ K_μ`.
///
/// Field storage has `j` (y) as the slow index, so `K_λ ⊗ D_μ` is realized as
/// `kron(D_μ, K_λ)` here.
pub fn dense_assemble(op: &SplitDiffusionOperator) -> Result<DenseOperators> {
    let n = op.grid().n();
    if n * n > DENSE_BUDGET {
        return invalid(format!(
            "dense assembly of {} unknowns exceeds the budget of {DENSE_BUDGET}",
            n * n
        ));
    }
    let h = op.grid().h();
    let c = -1.0 / (h * h);
    let k_lambda = DenseMatrix::from_row_major(n, op.k_lambda().to_dense());
    let k_mu = DenseMatrix::from_row_major(n, op.k_mu().to_dense());
    let d_lambda = DenseMatrix::diagonal(op.d_lambda().diag());
    let d_mu = DenseMatrix::diagonal(op.d_mu().diag());
    let a = d_mu.kron(&k_lambda).scaled(c);
    let b = k_mu.kron(&d_lambda).scaled(c);
    let l = a.add(&b);
    Ok(DenseOperators { a, b, l })
}

/// Maximum dimension accepted by [`dense_expm`].
pub const EXPM_MAX_DIM: usize = 128;

/// `exp(t M)` by scaling and squaring around a truncated Taylor series.
pub fn dense_expm(m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    let n = m.n();
    if n > EXPM_MAX_DIM {
        return invalid(format!(
            "dense_expm limited to dimension {EXPM_MAX_DIM}, got {n}"
        ));
    }
    let x = m.scaled(t);
    // infinity norm
    let norm = x
        .as_slice()
        .chunks(n.max(1))
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = x.scaled(scale);
    let mut sum = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..=40 {
        term = term.matmul(&x).scaled(1.0 / k as f64);
        sum = sum.add(&term);
        if term.max_abs() <= 1e-18 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    Ok(sum)
}

/// Exact `L²(Ω)` norm of the bilinear finite element function, element by element.
pub fn exact_l2_norm(u: &Field) -> f64 {
    // Bilinear element mass matrix on the reference square, corners ordered
    // (0,0), (1,0), (0,1), (1,1): tensor product of [[2,1],[1,2]]/6.
    const MASS: [[f64; 4]; 4] = [
        [4.0, 2.0, 2.0, 1.0],
        [2.0, 4.0, 1.0, 2.0],
        [2.0, 1.0, 4.0, 2.0],
        [1.0, 2.0, 2.0, 4.0],
    ];
    let g = u.grid();
    let h = g.h();
    let mut total = 0.0;
    for j in 0..g.m() {
        for i in 0..g.m() {
            let v = [
                u.node(i, j),
                u.node(i + 1, j),
                u.node(i, j + 1),
                u.node(i + 1, j + 1),
            ];
            let mut q = 0.0;
            for r in 0..4 {
                for c in 0..4 {
                    q += v[r] * MASS[r][c] * v[c];
                }
            }
            total += q / 36.0;
        }
    }
    (total * h * h).sqrt()
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(points: usize) -> Result<Vec<(f64, f64)>> {
    let raw: &[(f64, f64)] = match points {
        2 => &[(-0.5773502691896257, 1.0), (0.5773502691896257, 1.0)],
        4 => &[
            (-0.8611363115940526, 0.34785484513745385),
            (-0.33998104358485626, 0.6521451548625461),
            (0.33998104358485626, 0.6521451548625461),
            (0.8611363115940526, 0.34785484513745385),
        ],
        5 => &[
            (-0.906179845938664, 0.23692688505618908),
            (-0.5384693101056831, 0.47862867049936647),
            (0.0, 0.5688888888888889),
            (0.5384693101056831, 0.47862867049936647),
            (0.906179845938664, 0.23692688505618908),
        ],
        _ => return invalid(format!("no Gauss rule with {points} points")),
    };
    Ok(raw
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect())
}

/// `‖u - g‖_{L²(Ω)}` with a tensor Gauss rule on every element.
pub fn l2_distance(u: &Field, g: &Function2D, points: usize) -> Result<f64> {
    let rule = gauss_legendre(points)?;
    let grid = u.grid();
    let h = grid.h();
    let mut total = 0.0;
    for j in 0..grid.m() {
        for i in 0..grid.m() {
            let (x0, y0) = (grid.coord(i), grid.coord(j));
            for &(sy, wy) in &rule {
                for &(sx, wx) in &rule {
                    let (x, y) = (x0 + sx * h, y0 + sy * h);
                    let d = u.evaluate(x, y)? - g.eval(x, y);
                    total += wx * wy * d * d;
                }
            }
        }
    }
    Ok((total * h * h).sqrt())
}
