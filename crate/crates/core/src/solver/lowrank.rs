//! Symmetric low-rank factors `X = Z Z^T` and their extraction from
//! projected solutions.

use crate::dense::{sym_eig, DenseMatrix};
use crate::error::{Error, Result};
use crate::krylov::KrylovDecomposition;

/// `X = Z Z^T` with a thin factor `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymLowRank {
    z: DenseMatrix,
}

impl SymLowRank {
    pub fn new(z: DenseMatrix) -> Self {
        Self { z }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            z: DenseMatrix::zeros(n, 0),
        }
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.z
    }

    pub fn into_factor(self) -> DenseMatrix {
        self.z
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn rank(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.z.ncols() == 0 || self.z.iter().all(|v| *v == 0.0)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        &self.z * self.z.transpose()
    }
}

/// Eigenvalues of a projected solution above `dtol`, as `(U_l, D_l)`.
/// Fails if an eigenvalue lies below `-max(dtol, 1e-10 λ_max)`.
pub fn dominant_eigenpairs(small: &DenseMatrix, dtol: f64) -> Result<(DenseMatrix, Vec<f64>)> {
    let eig = sym_eig(small)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let threshold = dtol.max(1e-10 * top);
    if let Some(&low) = eig.values.last() {
        if low < -threshold {
            return Err(Error::NotPsd {
                eigenvalue: low,
                threshold,
            });
        }
    }
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > dtol).collect();
    let mut u = DenseMatrix::zeros(small.nrows(), keep.len());
    let mut d = Vec::with_capacity(keep.len());
    for (c, &i) in keep.iter().enumerate() {
        u.set_column(c, &eig.vectors.column(i));
        d.push(eig.values[i]);
    }
    Ok((u, d))
}

/// Number of eigenvalues of `small` above `dtol`.
pub fn numerical_rank(small: &DenseMatrix, dtol: f64) -> Result<usize> {
    Ok(sym_eig(small)?.values.iter().filter(|&&v| v > dtol).count())
}

/// `Z = 𝒱_m U_l D_l^{1/2}` from the truncated eigendecomposition of the
/// projected solution.
pub fn truncate_lowrank(basis: &KrylovDecomposition, small: &DenseMatrix, dtol: f64) -> Result<SymLowRank> {
    let d = basis.dim();
    if small.shape() != (d, d) {
        return Err(Error::Dimension {
            op: "truncate_lowrank",
            expected: (d, d),
            got: small.shape(),
        });
    }
    let (mut u, vals) = dominant_eigenpairs(small, dtol)?;
    for (c, v) in vals.iter().enumerate() {
        u.column_mut(c).scale_mut(v.sqrt());
    }
    Ok(SymLowRank::new(basis.lift(&u)))
}
