//! Symmetric eigendecomposition `K = A D A^T` with `D` sorted non-increasing.
//!
//! The heavy lifting is done by `faer`'s tridiagonal solver running
//! sequentially, so repeated calls on the same input are bitwise identical.

use faer::{Mat, Side};

use crate::error::{argument, Error, Result};

/// Default relative threshold below which an eigenvalue counts as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-9;
const NEGATIVE_TOLERANCE: f64 = 1e-8;

/// `K = A D A^T` for a positive semidefinite `K`.
///
/// Invariants: the columns of `A` are orthonormal, `D` is non-increasing and
/// non-negative (tiny negative eigenvalues are clamped to zero), and exactly
/// the first `rank` entries of `D` exceed `rank_tolerance * D[0]`.
#[derive(Clone, Debug)]
pub struct GramDecomposition {
    vectors: Mat<f64>,
    eigenvalues: Vec<f64>,
    rank: usize,
    rank_tolerance: f64,
}

impl GramDecomposition {
    /// Orthogonal matrix `A`; column `i` pairs with `eigenvalues()[i]`.
    pub fn vectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Numerical rank `m`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `A^T y`.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(y.len(), n, "vector length does not match decomposition");
        (0..n)
            .map(|i| {
                let col = self.vectors.col(i);
                (0..n).map(|k| col[k] * y[k]).sum()
            })
            .collect()
    }

    /// `A w`.
    pub fn unproject(&self, w: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(w.len(), n, "vector length does not match decomposition");
        let mut out = vec![0.0; n];
        for (j, &wj) in w.iter().enumerate() {
            if wj == 0.0 {
                continue;
            }
            let col = self.vectors.col(j);
            for (k, o) in out.iter_mut().enumerate() {
                *o += col[k] * wj;
            }
        }
        out
    }

    /// `A D A^T`, for checking reconstruction.
    pub fn reconstruct(&self) -> Mat<f64> {
        let n = self.dim();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * self.eigenvalues[j]);
        &scaled * self.vectors.transpose()
    }
}

/// Decomposes a symmetric positive semidefinite matrix.
///
/// Fails with [`Error::Argument`] on asymmetric or non-finite input and with
/// [`Error::NotPositiveSemidefinite`] when an eigenvalue falls below
/// `-1e-8 * D[0]`.
pub fn eigh(k: &Mat<f64>, rank_tolerance: f64) -> Result<GramDecomposition> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(argument(format!("expected a non-empty square matrix, got {}x{}", n, k.ncols())));
    }
    if !(rank_tolerance.is_finite() && rank_tolerance > 0.0) {
        return Err(argument(format!("rank tolerance must be positive, got {rank_tolerance}")));
    }
    let mut scale = 1.0f64;
    for j in 0..n {
        for i in 0..n {
            let v = k[(i, j)];
            if !v.is_finite() {
                return Err(argument("matrix has non-finite entries"));
            }
            scale = scale.max(v.abs());
        }
    }
    for j in 0..n {
        for i in (j + 1)..n {
            if (k[(i, j)] - k[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(argument(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }

    let evd = k
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let largest = s[order[0]];
    let floor = -NEGATIVE_TOLERANCE * largest.max(0.0);
    let mut eigenvalues = Vec::with_capacity(n);
    for &idx in &order {
        let d = s[idx];
        if d < floor {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: d, largest });
        }
        eigenvalues.push(d.max(0.0));
    }
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);

    let top = eigenvalues[0];
    let rank = if top > 0.0 {
        eigenvalues.iter().take_while(|&&d| d > rank_tolerance * top).count()
    } else {
        0
    };

    Ok(GramDecomposition { vectors, eigenvalues, rank, rank_tolerance })
}

/// Numerical rank of a decomposition.
pub fn rank_of(decomp: &GramDecomposition) -> usize {
    decomp.rank()
}
