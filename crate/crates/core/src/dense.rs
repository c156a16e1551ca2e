//! Dense double-precision kernels for the small projected problems and for
//! desk-scale reference computations.
//!
//! Storage is `nalgebra::DMatrix<f64>` (column-major). Everything here is a
//! pure function of its inputs.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Thin QR factorization with rank detection.
#[derive(Debug, Clone)]
pub struct QrThin {
    /// `n x rank`, orthonormal columns.
    pub q: DenseMatrix,
    /// `rank x k`, upper staircase; `q * r` reproduces the input.
    pub r: DenseMatrix,
    pub rank: usize,
}

/// Orthonormalizes the columns of `block` by classical Gram–Schmidt with one
/// reorthogonalization pass per column. A column whose remaining norm is at
/// most `rank_tol * ||block||_F` is treated as linearly dependent and dropped.
pub fn qr_thin(block: &DenseMatrix, rank_tol: f64) -> QrThin {
    let threshold = rank_tol * block.norm();
    qr_with_thresholds(block, &vec![threshold; block.ncols()]).0
}

/// Thin QR in which column `j` is dropped when its remaining norm is at most
/// `thresholds[j]` (and always when it is zero). Also returns the indices of
/// the retained columns.
pub fn qr_with_thresholds(block: &DenseMatrix, thresholds: &[f64]) -> (QrThin, Vec<usize>) {
    let (n, k) = block.shape();
    assert_eq!(thresholds.len(), k, "one threshold per column");
    let mut q_cols: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(k);
    let mut r_entries: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut kept = Vec::with_capacity(k);

    for j in 0..k {
        let mut w = block.column(j).into_owned();
        let mut coeffs = vec![0.0; q_cols.len()];
        for _pass in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&q_cols) {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
                *c += proj;
            }
        }
        let norm = w.norm();
        if norm > 0.0 && norm > thresholds[j] {
            w /= norm;
            q_cols.push(w);
            coeffs.push(norm);
            kept.push(j);
        }
        r_entries.push(coeffs);
    }

    let rank = q_cols.len();
    let mut q = DenseMatrix::zeros(n, rank);
    for (j, col) in q_cols.iter().enumerate() {
        q.set_column(j, col);
    }
    let mut r = DenseMatrix::zeros(rank, k);
    for (j, coeffs) in r_entries.iter().enumerate() {
        for (i, &c) in coeffs.iter().enumerate() {
            r[(i, j)] = c;
        }
    }
    (QrThin { q, r, rank }, kept)
}

fn ensure_square(m: &DenseMatrix, op: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            op,
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled degree-13 Padé approximant is
/// accurate to double precision.
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the diagonal [13/13]
/// Padé approximant.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = ensure_square(m, "expm")?;
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let norm1 = one_norm(m);
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m * 2f64.powi(-squarings);
    let b = &PADE13;
    let id = DenseMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Solvability("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Maximum absolute column sum.
pub fn one_norm(m: &DenseMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frob_norm(m: &DenseMatrix) -> f64 {
    m.norm()
}

/// Spectral norm (largest singular value).
pub fn spec_norm_2(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymEig {
    /// `U diag(values) U^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lambda);
        }
        scaled * self.vectors.transpose()
    }
}

/// Eigendecomposition of the symmetric part of `m`.
pub fn sym_eig(m: &DenseMatrix) -> Result<SymEig> {
    let n = ensure_square(m, "sym_eig")?;
    if n == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, 0).ok_or(
        Error::IterationLimit {
            what: "symmetric eigensolver",
            iterations: 0,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}

/// Real Schur form `F = U S U^T` prepared for repeated Lyapunov solves.
///
/// `S` is quasi upper triangular; its 1x1 and 2x2 diagonal blocks are
/// recorded in `blocks` as `(start, size)`.
#[derive(Debug, Clone)]
pub struct SchurLyapunov {
    u: DenseMatrix,
    s: DenseMatrix,
    blocks: Vec<(usize, usize)>,
}

const SCHUR_RETRIES: u64 = 8;

/// Real Schur form `F = U S U^T`.
///
/// The Francis iteration can stall on some structured matrices (several
/// convection-diffusion sizes do). A stalled run is restarted on `Q^T F Q`
/// for a seeded random orthogonal `Q`, and `Q` is folded back into `U`.
fn real_schur(f: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = f.nrows();
    let budget = 100 * n.max(10);
    if let Some(schur) = Schur::try_new(f.clone(), f64::EPSILON, budget) {
        return Ok(schur.unpack());
    }
    for seed in 0..SCHUR_RETRIES {
        let mut rng = Pcg64::seed_from_u64(0x5c4u64 + seed);
        let g = DenseMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        let q = qr_thin(&g, 0.0).q;
        if q.ncols() != n {
            continue;
        }
        if let Some(schur) = Schur::try_new(q.transpose() * f * &q, f64::EPSILON, budget) {
            let (u, s) = schur.unpack();
            return Ok((q * u, s));
        }
    }
    Err(Error::IterationLimit {
        what: "real Schur decomposition",
        iterations: budget * (SCHUR_RETRIES as usize + 1),
    })
}

impl SchurLyapunov {
    pub fn new(f: &DenseMatrix) -> Result<Self> {
        let n = ensure_square(f, "lyap_direct")?;
        if n == 0 {
            return Ok(Self {
                u: DenseMatrix::zeros(0, 0),
                s: DenseMatrix::zeros(0, 0),
                blocks: Vec::new(),
            });
        }
        let (u, s) = real_schur(f)?;
        let blocks = quasi_triangular_blocks(&s);
        Ok(Self { u, s, blocks })
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn schur_vectors(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn schur_factor(&self) -> &DenseMatrix {
        &self.s
    }

    /// Schur form of `alpha F + beta I`, which shares the Schur vectors.
    pub fn affine(&self, alpha: f64, beta: f64) -> Self {
        let n = self.dim();
        let s = &self.s * alpha + DenseMatrix::identity(n, n) * beta;
        Self {
            u: self.u.clone(),
            s,
            blocks: self.blocks.clone(),
        }
    }

    /// `U^T X U`.
    pub fn to_schur_basis(&self, x: &DenseMatrix) -> DenseMatrix {
        self.u.transpose() * x * &self.u
    }

    /// `U Y U^T`.
    pub fn from_schur_basis(&self, y: &DenseMatrix) -> DenseMatrix {
        &self.u * y * self.u.transpose()
    }

    /// Solves `F X + X F^T + Q = 0` for symmetric `Q`.
    pub fn solve(&self, q: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if q.shape() != (n, n) {
            return Err(Error::Dimension {
                op: "lyap_direct",
                expected: (n, n),
                got: q.shape(),
            });
        }
        let c = -self.to_schur_basis(&symmetrize(q));
        let y = self.solve_schur(&c)?;
        Ok(symmetrize(&self.from_schur_basis(&y)))
    }

    /// Solves `S Y + Y S^T = C` in the Schur basis for symmetric `C` by
    /// block back-substitution from the bottom-right corner.
    pub fn solve_schur(&self, c: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        let mut y = DenseMatrix::zeros(n, n);
        if n == 0 {
            return Ok(y);
        }
        let st = self.s.transpose();
        let st_data = st.as_slice();
        let scale = self.s.amax().max(f64::MIN_POSITIVE);

        for jb in (0..self.blocks.len()).rev() {
            let (j0, bj) = self.blocks[jb];
            for ib in (0..=jb).rev() {
                let (i0, bi) = self.blocks[ib];
                let mut rhs = [[0.0f64; 2]; 2];
                for a in 0..bi {
                    let i = i0 + a;
                    let s_row_i = &st_data[i * n..(i + 1) * n];
                    for b in 0..bj {
                        let j = j0 + b;
                        let y_data = y.as_slice();
                        let y_col_j = &y_data[j * n..(j + 1) * n];
                        let y_col_i = &y_data[i * n..(i + 1) * n];
                        let s_row_j = &st_data[j * n..(j + 1) * n];
                        let mut acc = c[(i, j)];
                        for k in (i0 + bi)..n {
                            acc -= s_row_i[k] * y_col_j[k];
                        }
                        // Y[i, l] = Y[l, i] by symmetry; column i is filled
                        // for every l beyond the current column block.
                        for l in (j0 + bj)..n {
                            acc -= y_col_i[l] * s_row_j[l];
                        }
                        rhs[a][b] = acc;
                    }
                }
                let block = solve_small_sylvester(&self.s, (i0, bi), (j0, bj), &rhs, scale)?;
                for a in 0..bi {
                    for b in 0..bj {
                        y[(i0 + a, j0 + b)] = block[a][b];
                        y[(j0 + b, i0 + a)] = block[a][b];
                    }
                }
            }
        }
        Ok(y)
    }
}

fn quasi_triangular_blocks(s: &DenseMatrix) -> Vec<(usize, usize)> {
    let n = s.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && s[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solves `S_ii Y + Y S_jj^T = R` for a block of size at most 2x2 through
/// its Kronecker form.
fn solve_small_sylvester(
    s: &DenseMatrix,
    (i0, bi): (usize, usize),
    (j0, bj): (usize, usize),
    rhs: &[[f64; 2]; 2],
    scale: f64,
) -> Result<[[f64; 2]; 2]> {
    let dim = bi * bj;
    let mut m = [[0.0f64; 5]; 4];
    for b in 0..bj {
        for a in 0..bi {
            let row = a + b * bi;
            for a2 in 0..bi {
                m[row][a2 + b * bi] += s[(i0 + a, i0 + a2)];
            }
            for b2 in 0..bj {
                m[row][a + b2 * bi] += s[(j0 + b, j0 + b2)];
            }
            m[row][4] = rhs[a][b];
        }
    }
    // Gaussian elimination with partial pivoting on the augmented system.
    for col in 0..dim {
        let piv = (col..dim)
            .max_by(|&r1, &r2| m[r1][col].abs().total_cmp(&m[r2][col].abs()))
            .unwrap_or(col);
        if m[piv][col].abs() <= 4.0 * f64::EPSILON * scale {
            return Err(Error::Solvability(format!(
                "eigenvalues of blocks {i0} and {j0} sum to zero (Lyapunov operator singular)"
            )));
        }
        m.swap(col, piv);
        for r in (col + 1)..dim {
            let factor = m[r][col] / m[col][col];
            for c in col..5 {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    let mut x = [0.0f64; 4];
    for r in (0..dim).rev() {
        let mut acc = m[r][4];
        for c in (r + 1)..dim {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    let mut out = [[0.0f64; 2]; 2];
    for b in 0..bj {
        for a in 0..bi {
            out[a][b] = x[a + b * bi];
        }
    }
    Ok(out)
}

/// Solves the algebraic Lyapunov equation `F X + X F^T + Q = 0`.
pub fn lyap_direct(f: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    SchurLyapunov::new(f)?.solve(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gen_random_block;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        gen_random_block(rows, cols, seed).map(|x| 2.0 * x - 1.0)
    }

    fn random_stable(n: usize, seed: u64) -> DenseMatrix {
        random_matrix(n, n, seed) - DenseMatrix::identity(n, n) * (n as f64)
    }

    #[test]
    fn qr_of_orthonormal_slice_is_identity() {
        let block = DenseMatrix::identity(3, 2);
        let qr = qr_thin(&block, 1e-12);
        assert_eq!(qr.rank, 2);
        assert_eq!(qr.q, block);
        assert_eq!(qr.r, DenseMatrix::identity(2, 2));
    }

    #[test]
    fn qr_detects_duplicate_column() {
        let mut block = DenseMatrix::zeros(4, 2);
        block.column_mut(0).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        block.column_mut(1).copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let qr = qr_thin(&block, 1e-12);
        assert_eq!(qr.rank, 1);
        assert!((&qr.q * &qr.r - &block).norm() <= 1e-14 * block.norm());
    }

    #[test]
    fn qr_of_zero_block_has_rank_zero() {
        let qr = qr_thin(&DenseMatrix::zeros(5, 3), 1e-12);
        assert_eq!(qr.rank, 0);
        assert_eq!(qr.q.shape(), (5, 0));
        assert_eq!(qr.r.shape(), (0, 3));
    }

    #[test]
    fn qr_random_block_residuals() {
        let block = random_matrix(50, 4, 3);
        let qr = qr_thin(&block, 1e-12);
        assert_eq!(qr.rank, 4);
        let eye = DenseMatrix::identity(4, 4);
        assert!((qr.q.transpose() * &qr.q - eye).norm() <= 1e-12);
        assert!((&qr.q * &qr.r - &block).norm() <= 1e-12 * block.norm());
        // Re-orthonormalizing Q leaves it unchanged.
        let again = qr_thin(&qr.q, 1e-12);
        assert!((again.q - &qr.q).amax() <= 1e-13);
    }

    #[test]
    fn expm_trivial_cases() {
        let z = DenseMatrix::zeros(4, 4);
        assert_eq!(expm(&z).unwrap(), DenseMatrix::identity(4, 4));

        let d = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-3.0, 0.5, 7.0]));
        let e = expm(&d).unwrap();
        for (i, a) in [-3.0f64, 0.5, 7.0].iter().enumerate() {
            assert!((e[(i, i)] - a.exp()).abs() <= 1e-13 * a.exp());
        }
        assert!(e[(0, 1)].abs() < 1e-12);

        let nil = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&nil).unwrap();
        let expected = DenseMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((e - expected).amax() <= 1e-15);
    }

    #[test]
    fn expm_rejects_non_square() {
        assert!(matches!(
            expm(&DenseMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn expm_matches_eigendecomposition_for_symmetric_input() {
        let r = random_matrix(8, 8, 11);
        let m = symmetrize(&r) * 3.0;
        let eig = sym_eig(&m).unwrap();
        let mut scaled = eig.vectors.clone();
        for (j, &l) in eig.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l.exp());
        }
        let reference = scaled * eig.vectors.transpose();
        let e = expm(&m).unwrap();
        assert!((e - &reference).norm() <= 1e-12 * reference.norm());
    }

    #[test]
    fn lyap_scalar_and_diagonal() {
        let x = lyap_direct(
            &DenseMatrix::from_element(1, 1, -1.0),
            &DenseMatrix::from_element(1, 1, 2.0),
        )
        .unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);

        let f = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let x = lyap_direct(&f, &DenseMatrix::identity(2, 2)).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((x[(1, 1)] - 0.25).abs() < 1e-15);
        assert!(x[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn lyap_on_stalling_schur_input() {
        // Plain Francis iteration does not converge on this operator.
        let f = crate::problems::gen_convdiff(7).unwrap().to_dense();
        assert!(Schur::try_new(f.clone(), f64::EPSILON, 100 * 49).is_none());
        let z = random_matrix(49, 2, 3);
        let q = &z * z.transpose();
        let x = lyap_direct(&f, &q).unwrap();
        let r = &f * &x + &x * f.transpose() + &q;
        assert!(frob_norm(&r) <= 1e-11 * (frob_norm(&f) * frob_norm(&x) + frob_norm(&q)));
    }

    #[test]
    fn lyap_random_stable_residual() {
        for seed in 0..5 {
            let f = random_stable(6, 100 + seed);
            let z = random_matrix(6, 3, 200 + seed);
            let q = &z * z.transpose();
            let x = lyap_direct(&f, &q).unwrap();
            let res = (&f * &x + &x * f.transpose() + &q).norm();
            assert!(res <= 1e-11 * (f.norm() * x.norm() + q.norm()), "{res}");
            assert!((&x - x.transpose()).norm() <= 1e-12 * x.norm());
        }
    }

    #[test]
    fn lyap_with_complex_eigenvalues() {
        // Rotation-dominated stable matrix: the Schur form has 2x2 blocks.
        let mut f = random_matrix(7, 7, 5) * 0.3;
        for i in 0..7 {
            f[(i, i)] -= 1.0;
        }
        f[(0, 1)] += 4.0;
        f[(1, 0)] -= 4.0;
        f[(3, 4)] += 2.5;
        f[(4, 3)] -= 2.5;
        let lyap = SchurLyapunov::new(&f).unwrap();
        assert!(lyap.blocks.iter().any(|&(_, size)| size == 2));
        let q = DenseMatrix::identity(7, 7);
        let x = lyap.solve(&q).unwrap();
        let res = (&f * &x + &x * f.transpose() + &q).norm();
        assert!(res <= 1e-11 * (f.norm() * x.norm() + q.norm()));
    }

    #[test]
    fn lyap_singular_operator_is_reported() {
        let f = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        let err = lyap_direct(&f, &DenseMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::Solvability(_)));
    }

    #[test]
    fn sym_eig_sorting_and_reconstruction() {
        let d = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let eig = sym_eig(&d).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);

        let eig = sym_eig(&DenseMatrix::identity(4, 4)).unwrap();
        assert!(eig.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let z = random_matrix(9, 4, 9);
        let m = &z * z.transpose();
        let eig = sym_eig(&m).unwrap();
        assert!(eig.values.iter().all(|&v| v >= -1e-12 * m.norm()));
        let ut_u = eig.vectors.transpose() * &eig.vectors;
        assert!((ut_u - DenseMatrix::identity(9, 9)).norm() <= 1e-12 * 9.0);
        assert!((eig.reconstruct() - &m).norm() <= 1e-10 * m.norm());
    }

    #[test]
    fn norms() {
        assert!((frob_norm(&DenseMatrix::identity(5, 5)) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(frob_norm(&DenseMatrix::zeros(3, 2)), 0.0);
        let m = random_matrix(10, 3, 1);
        let direct: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((frob_norm(&m) - direct).abs() <= 1e-14 * direct);
        let gram = m.transpose() * &m;
        let top = sym_eig(&gram).unwrap().values[0].sqrt();
        assert!((spec_norm_2(&m) - top).abs() <= 1e-8 * top);
    }
}
