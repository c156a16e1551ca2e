//! Left-looking sparse LU factorization with partial pivoting
//! (Gilbert–Peierls), natural column ordering.
//!
//! The factorization satisfies `P A = L U`, where `L` is unit lower
//! triangular and `P` is the row permutation recorded in `pinv`
//! (`pinv[i]` is the pivot step at which original row `i` was chosen).

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Pivots smaller than this multiple of the largest entry of `A` are
/// treated as numerically zero.
const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    // L by column, unit diagonal stored first in each column.
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    // U by column, diagonal stored last in each column.
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
    pinv: Vec<usize>,
}

/// Reusable workspace for the sparse triangular solve of one column.
struct Workspace {
    x: Vec<f64>,
    stack: Vec<(usize, usize)>,
    reach: Vec<usize>,
    mark: Vec<usize>,
    stamp: usize,
}

impl SparseLu {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                op: "sparse_factor",
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let n = a.nrows();
        // Row storage of A^T is column storage of A.
        let at = a.transpose();
        let (ap, ai, ax) = (at.row_ptr(), at.col_idx(), at.values());
        let threshold = PIVOT_TOL * a.max_abs();

        const UNSET: usize = usize::MAX;
        let mut lu = Self {
            n,
            lp: Vec::with_capacity(n + 1),
            li: Vec::with_capacity(4 * a.nnz()),
            lx: Vec::with_capacity(4 * a.nnz()),
            up: Vec::with_capacity(n + 1),
            ui: Vec::with_capacity(4 * a.nnz()),
            ux: Vec::with_capacity(4 * a.nnz()),
            pinv: vec![UNSET; n],
        };
        let mut ws = Workspace {
            x: vec![0.0; n],
            stack: Vec::new(),
            reach: Vec::new(),
            mark: vec![0; n],
            stamp: 0,
        };

        for k in 0..n {
            lu.lp.push(lu.li.len());
            lu.up.push(lu.ui.len());

            // x = L \ A(:, k) restricted to the reach of A(:, k) in the graph of L.
            ws.stamp += 1;
            ws.reach.clear();
            for &i in &ai[ap[k]..ap[k + 1]] {
                if ws.mark[i] != ws.stamp {
                    lu.dfs(i, &mut ws);
                }
            }
            for &i in &ws.reach {
                ws.x[i] = 0.0;
            }
            for p in ap[k]..ap[k + 1] {
                ws.x[ai[p]] = ax[p];
            }
            // The reach list is in reverse topological order.
            for idx in (0..ws.reach.len()).rev() {
                let j = ws.reach[idx];
                let col = lu.pinv[j];
                if col == UNSET {
                    continue;
                }
                let xj = ws.x[j];
                for p in (lu.lp[col] + 1)..lu.lp[col + 1] {
                    ws.x[lu.li[p]] -= lu.lx[p] * xj;
                }
            }

            let mut pivot_row = UNSET;
            let mut best = -1.0;
            for &i in &ws.reach {
                if lu.pinv[i] == UNSET {
                    let v = ws.x[i].abs();
                    if v > best {
                        best = v;
                        pivot_row = i;
                    }
                } else {
                    lu.ui.push(lu.pinv[i]);
                    lu.ux.push(ws.x[i]);
                }
            }
            if pivot_row == UNSET || best <= threshold {
                let row = if pivot_row == UNSET {
                    (0..n).find(|&i| lu.pinv[i] == UNSET).unwrap_or(k)
                } else {
                    pivot_row
                };
                return Err(Error::SingularPivot { step: k, row });
            }
            // Prefer the diagonal on ties.
            if lu.pinv[k] == UNSET && ws.mark[k] == ws.stamp && ws.x[k].abs() >= best {
                pivot_row = k;
            }
            let pivot = ws.x[pivot_row];
            lu.ui.push(k);
            lu.ux.push(pivot);
            lu.pinv[pivot_row] = k;
            lu.li.push(pivot_row);
            lu.lx.push(1.0);
            for &i in &ws.reach {
                if lu.pinv[i] == UNSET {
                    lu.li.push(i);
                    lu.lx.push(ws.x[i] / pivot);
                }
                ws.x[i] = 0.0;
            }
        }
        lu.lp.push(lu.li.len());
        lu.up.push(lu.ui.len());
        for i in lu.li.iter_mut() {
            *i = lu.pinv[*i];
        }
        Ok(lu)
    }

    /// Depth-first search from original row `start` through the columns of
    /// `L` computed so far; appends finished nodes to `ws.reach`.
    fn dfs(&self, start: usize, ws: &mut Workspace) {
        ws.stack.clear();
        ws.mark[start] = ws.stamp;
        ws.stack.push((start, 0));
        while let Some(&(j, mut pos)) = ws.stack.last() {
            let col = self.pinv[j];
            let mut next = None;
            if col != usize::MAX {
                let begin = self.lp[col] + 1;
                let end = self.lp[col + 1];
                while begin + pos < end {
                    let i = self.li[begin + pos];
                    pos += 1;
                    if ws.mark[i] != ws.stamp {
                        next = Some(i);
                        break;
                    }
                }
            }
            let top = ws.stack.len() - 1;
            ws.stack[top].1 = pos;
            if let Some(i) = next {
                ws.mark[i] = ws.stamp;
                ws.stack.push((i, 0));
            } else {
                ws.stack.pop();
                ws.reach.push(j);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries in `L` and `U`.
    pub fn nnz(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    fn check_rhs(&self, b: &DenseMatrix, op: &'static str) -> Result<()> {
        if b.nrows() != self.n {
            return Err(Error::Dimension {
                op,
                expected: (self.n, b.ncols()),
                got: b.shape(),
            });
        }
        Ok(())
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_rhs(b, "sparse_solve")?;
        let n = self.n;
        let mut out = DenseMatrix::zeros(n, b.ncols());
        let mut x = vec![0.0; n];
        for c in 0..b.ncols() {
            let rhs = b.column(c);
            for i in 0..n {
                x[self.pinv[i]] = rhs[i];
            }
            for j in 0..n {
                let xj = x[j];
                if xj != 0.0 {
                    for p in (self.lp[j] + 1)..self.lp[j + 1] {
                        x[self.li[p]] -= self.lx[p] * xj;
                    }
                }
            }
            for j in (0..n).rev() {
                let diag = self.up[j + 1] - 1;
                x[j] /= self.ux[diag];
                let xj = x[j];
                if xj != 0.0 {
                    for p in self.up[j]..diag {
                        x[self.ui[p]] -= self.ux[p] * xj;
                    }
                }
            }
            out.column_mut(c).copy_from_slice(&x);
        }
        Ok(out)
    }

    /// Solves `A^T X = B`.
    pub fn solve_transpose(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_rhs(b, "sparse_solve_transpose")?;
        let n = self.n;
        let mut out = DenseMatrix::zeros(n, b.ncols());
        let mut x = vec![0.0; n];
        for c in 0..b.ncols() {
            x.copy_from_slice(b.column(c).as_slice());
            for j in 0..n {
                let diag = self.up[j + 1] - 1;
                let mut acc = x[j];
                for p in self.up[j]..diag {
                    acc -= self.ux[p] * x[self.ui[p]];
                }
                x[j] = acc / self.ux[diag];
            }
            for j in (0..n).rev() {
                let mut acc = x[j];
                for p in (self.lp[j] + 1)..self.lp[j + 1] {
                    acc -= self.lx[p] * x[self.li[p]];
                }
                x[j] = acc;
            }
            let mut col = out.column_mut(c);
            for i in 0..n {
                col[i] = x[self.pinv[i]];
            }
        }
        Ok(out)
    }
}

/// Factors `a` once for repeated solves.
pub fn sparse_factor(a: &SparseMatrix) -> Result<SparseLu> {
    SparseLu::new(a)
}
