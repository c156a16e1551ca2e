//! Linear operators acting on dense blocks.

use nalgebra::linalg::LU;
use nalgebra::Dyn;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::lu::SparseLu;
use crate::sparse::SparseMatrix;

/// A square operator of dimension `n` applied to `n x k` blocks.
///
/// The inverse and transpose actions are optional capabilities; the
/// extended Krylov process needs the inverse, the logarithmic-norm and
/// operator-norm estimators need the transpose.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, v: &DenseMatrix) -> Result<DenseMatrix>;

    fn has_inverse(&self) -> bool {
        false
    }

    fn apply_inverse(&self, _v: &DenseMatrix) -> Result<DenseMatrix> {
        Err(Error::Capability("inverse action"))
    }

    fn has_transpose(&self) -> bool {
        false
    }

    fn apply_transpose(&self, _v: &DenseMatrix) -> Result<DenseMatrix> {
        Err(Error::Capability("transpose action"))
    }

    /// Dense matrix of the operator, assembled column by column.
    fn to_dense(&self) -> Result<DenseMatrix> {
        let n = self.dim();
        self.apply(&DenseMatrix::identity(n, n))
    }
}

pub(crate) fn check_block(n: usize, v: &DenseMatrix, op: &'static str) -> Result<()> {
    if v.nrows() != n {
        return Err(Error::Dimension {
            op,
            expected: (n, v.ncols()),
            got: v.shape(),
        });
    }
    Ok(())
}

/// A sparse matrix, optionally with a sparse LU factorization for the
/// inverse action.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    a: SparseMatrix,
    lu: Option<SparseLu>,
}

impl SparseOperator {
    pub fn new(a: SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                op: "SparseOperator",
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        Ok(Self { a, lu: None })
    }

    /// Factors the matrix once so the inverse action is available.
    pub fn with_inverse(a: SparseMatrix) -> Result<Self> {
        let mut op = Self::new(a)?;
        op.lu = Some(SparseLu::new(&op.a)?);
        Ok(op)
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        self.a.apply(v)
    }

    fn has_inverse(&self) -> bool {
        self.lu.is_some()
    }

    fn apply_inverse(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.lu {
            Some(lu) => lu.solve(v),
            None => Err(Error::Capability("inverse action (matrix not factored)")),
        }
    }

    fn has_transpose(&self) -> bool {
        true
    }

    fn apply_transpose(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        self.a.apply_transpose(v)
    }

    fn to_dense(&self) -> Result<DenseMatrix> {
        Ok(self.a.to_dense())
    }
}

/// A dense matrix with a dense LU factorization for the inverse action.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    a: DenseMatrix,
    lu: Option<LU<f64, Dyn, Dyn>>,
}

impl DenseOperator {
    /// Wraps `a`; the inverse action is available when `a` is nonsingular.
    pub fn new(a: DenseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotSquare {
                op: "DenseOperator",
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let lu = a.clone().lu();
        let lu = if lu.is_invertible() { Some(lu) } else { None };
        Ok(Self { a, lu })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        check_block(self.dim(), v, "dense apply")?;
        Ok(&self.a * v)
    }

    fn has_inverse(&self) -> bool {
        self.lu.is_some()
    }

    fn apply_inverse(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        check_block(self.dim(), v, "dense solve")?;
        let lu = self
            .lu
            .as_ref()
            .ok_or(Error::Capability("inverse action (matrix is singular)"))?;
        lu.solve(v)
            .ok_or_else(|| Error::Solvability("dense LU solve failed".into()))
    }

    fn has_transpose(&self) -> bool {
        true
    }

    fn apply_transpose(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        check_block(self.dim(), v, "dense apply transpose")?;
        Ok(self.a.tr_mul(v))
    }

    fn to_dense(&self) -> Result<DenseMatrix> {
        Ok(self.a.clone())
    }
}

/// The operator `A = S^{-1} M` for sparse `S` and `M`, with both factored
/// once. The inverse action is `M^{-1} S`.
#[derive(Debug, Clone)]
pub struct PairOperator {
    s: SparseMatrix,
    m: SparseMatrix,
    s_lu: SparseLu,
    m_lu: SparseLu,
}

impl PairOperator {
    pub fn new(s: SparseMatrix, m: SparseMatrix) -> Result<Self> {
        if s.nrows() != m.nrows() || !s.is_square() || !m.is_square() {
            return Err(Error::Dimension {
                op: "operator_from_pair",
                expected: (s.nrows(), s.nrows()),
                got: (m.nrows(), m.ncols()),
            });
        }
        let s_lu = SparseLu::new(&s)?;
        let m_lu = SparseLu::new(&m)?;
        Ok(Self { s, m, s_lu, m_lu })
    }

    /// Factorization of the left factor `S`.
    pub fn left_factor(&self) -> &SparseLu {
        &self.s_lu
    }

    pub fn left_matrix(&self) -> &SparseMatrix {
        &self.s
    }

    pub fn right_matrix(&self) -> &SparseMatrix {
        &self.m
    }
}

impl LinearOperator for PairOperator {
    fn dim(&self) -> usize {
        self.s.nrows()
    }

    fn apply(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        self.s_lu.solve(&self.m.apply(v)?)
    }

    fn has_inverse(&self) -> bool {
        true
    }

    fn apply_inverse(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        self.m_lu.solve(&self.s.apply(v)?)
    }

    fn has_transpose(&self) -> bool {
        true
    }

    fn apply_transpose(&self, v: &DenseMatrix) -> Result<DenseMatrix> {
        self.m.apply_transpose(&self.s_lu.solve_transpose(v)?)
    }
}

/// Builds `A = S^{-1} M` where `S` is the shifted matrix (for example
/// `M - dt K`).
pub fn operator_from_pair(s: SparseMatrix, m: SparseMatrix) -> Result<PairOperator> {
    PairOperator::new(s, m)
}
