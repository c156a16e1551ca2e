//! Block Arnoldi and extended block Arnoldi processes.
//!
//! After `m` steps a [`KrylovDecomposition`] holds the orthonormal blocks
//! `V_1, ..., V_{m+1}`, the images `A V_1, ..., A V_m` and the projected
//! block upper Hessenberg matrix `T̄_m = 𝒱_{m+1}^T A 𝒱_m`, so that
//! `A 𝒱_m = 𝒱_{m+1} T̄_m` up to the deflation tolerance.
//!
//! Blocks may shrink when new directions are numerically dependent on the
//! existing basis. A zero-width `V_{m+1}` means `range(𝒱_m)` is invariant
//! under `A`.

use serde::{Deserialize, Serialize};

use crate::dense::{qr_with_thresholds, DenseMatrix};
use crate::error::{Error, Result};
use crate::operator::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KrylovVariant {
    /// Polynomial block Krylov space `span{B, AB, ..., A^{m-1}B}`.
    Block,
    /// Extended space `span{A^{-m}B, ..., A^{-1}B, B, ..., A^{m-1}B}`.
    #[default]
    Extended,
}

/// Result of one expansion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// The new block has the same width as its predecessor.
    Full,
    /// The new block lost columns to deflation.
    Deflated { rank: usize },
    /// No new direction: the current space is invariant.
    Breakdown,
}

/// Default deflation tolerance, relative to the norm of each candidate part.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KrylovDecomposition {
    variant: KrylovVariant,
    rank_tol: f64,
    blocks: Vec<DenseMatrix>,
    images: Vec<DenseMatrix>,
    /// Leading columns of each block that are expanded with `A`; the rest
    /// are expanded with `A^{-1}` (extended variant only).
    forward_cols: Vec<usize>,
    /// `offsets[j]` is the number of basis columns in blocks `0..j`.
    offsets: Vec<usize>,
    t_bar: DenseMatrix,
    start_coeffs: DenseMatrix,
    breakdown: bool,
}

fn hcat(parts: &[&DenseMatrix], nrows: usize) -> DenseMatrix {
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DenseMatrix::zeros(nrows, cols);
    let mut c = 0;
    for p in parts {
        out.columns_mut(c, p.ncols()).copy_from(*p);
        c += p.ncols();
    }
    out
}

impl KrylovDecomposition {
    /// Builds `V_1` from `start` (and `A^{-1} start` for the extended
    /// variant) and performs the first expansion, giving the state at `m = 1`.
    pub fn new(
        op: &dyn LinearOperator,
        start: &DenseMatrix,
        variant: KrylovVariant,
        rank_tol: f64,
    ) -> Result<Self> {
        let n = op.dim();
        if start.nrows() != n {
            return Err(Error::Dimension {
                op: "krylov start block",
                expected: (n, start.ncols()),
                got: start.shape(),
            });
        }
        if variant == KrylovVariant::Extended && !op.has_inverse() {
            return Err(Error::Capability("inverse action for the extended Krylov space"));
        }
        let (candidate, split) = match variant {
            KrylovVariant::Block => (start.clone(), start.ncols()),
            KrylovVariant::Extended => {
                let inv = op.apply_inverse(start)?;
                (hcat(&[start, &inv], n), start.ncols())
            }
        };
        let (v1, forward) = Self::orthonormalize(&candidate, split, &[], rank_tol);
        if v1.ncols() == 0 {
            return Err(Error::Precondition("Krylov start block is zero".into()));
        }
        let start_coeffs = v1.tr_mul(start);
        let d1 = v1.ncols();
        let mut kd = Self {
            variant,
            rank_tol,
            blocks: vec![v1],
            images: Vec::new(),
            forward_cols: vec![forward],
            offsets: vec![0, d1],
            t_bar: DenseMatrix::zeros(d1, 0),
            start_coeffs,
            breakdown: false,
        };
        kd.expand(op)?;
        Ok(kd)
    }

    /// Removes the components of `w` along `prev` (two block Gram–Schmidt
    /// passes) and orthonormalizes the remainder. Columns `..split` and
    /// `split..` are judged against the norms of their own parts. Returns the
    /// new block and how many retained columns came from the first part.
    fn orthonormalize(
        w: &DenseMatrix,
        split: usize,
        prev: &[DenseMatrix],
        rank_tol: f64,
    ) -> (DenseMatrix, usize) {
        let k = w.ncols();
        let first = w.columns(0, split).norm();
        let second = w.columns(split, k - split).norm();
        let thresholds: Vec<f64> = (0..k)
            .map(|j| rank_tol * if j < split { first } else { second })
            .collect();
        let mut w = w.clone();
        for _pass in 0..2 {
            for v in prev {
                if v.ncols() > 0 {
                    let coeffs = v.tr_mul(&w);
                    w -= v * coeffs;
                }
            }
        }
        let (qr, kept) = qr_with_thresholds(&w, &thresholds);
        let forward = kept.iter().filter(|&&j| j < split).count();
        (qr.q, forward)
    }

    /// Applies `A` to the newest block, builds the next one and extends
    /// `T̄`.
    fn expand(&mut self, op: &dyn LinearOperator) -> Result<StepOutcome> {
        let n = op.dim();
        let m = self.images.len();
        let newest = &self.blocks[m];
        let d = newest.ncols();
        let image = op.apply(newest)?;
        let (candidate, split) = match self.variant {
            KrylovVariant::Block => (image.clone(), d),
            KrylovVariant::Extended => {
                let f = self.forward_cols[m];
                let fwd = image.columns(0, f).into_owned();
                let inv = op.apply_inverse(&newest.columns(f, d - f).into_owned())?;
                (hcat(&[&fwd, &inv], n), f)
            }
        };
        let (next, forward) = Self::orthonormalize(&candidate, split, &self.blocks, self.rank_tol);
        let r = next.ncols();

        // New T̄ = 𝒱_{m+2}^T [A V_1, ..., A V_{m+1}].
        let rows_old = self.offsets[m + 1];
        let cols_old = self.offsets[m];
        let rows = rows_old + r;
        let cols = cols_old + d;
        let mut t_bar = DenseMatrix::zeros(rows, cols);
        t_bar
            .view_mut((0, 0), (rows_old, cols_old))
            .copy_from(&self.t_bar);
        for (j, img) in self.images.iter().enumerate() {
            let c0 = self.offsets[j];
            t_bar
                .view_mut((rows_old, c0), (r, img.ncols()))
                .copy_from(&next.tr_mul(img));
        }
        for (i, v) in self.blocks.iter().chain(std::iter::once(&next)).enumerate() {
            let r0 = if i <= m { self.offsets[i] } else { rows_old };
            t_bar
                .view_mut((r0, cols_old), (v.ncols(), d))
                .copy_from(&v.tr_mul(&image));
        }

        self.t_bar = t_bar;
        self.images.push(image);
        self.blocks.push(next);
        self.forward_cols.push(forward);
        self.offsets.push(rows);

        Ok(if r == 0 {
            self.breakdown = true;
            StepOutcome::Breakdown
        } else if r < d {
            StepOutcome::Deflated { rank: r }
        } else {
            StepOutcome::Full
        })
    }

    /// Advances from step `m` to `m + 1`. After a breakdown the
    /// decomposition is left unchanged.
    pub fn extend(&mut self, op: &dyn LinearOperator) -> Result<StepOutcome> {
        if self.breakdown {
            return Ok(StepOutcome::Breakdown);
        }
        self.expand(op)
    }

    pub fn variant(&self) -> KrylovVariant {
        self.variant
    }

    /// Number of completed steps.
    pub fn m(&self) -> usize {
        self.images.len()
    }

    /// Problem dimension `n`.
    pub fn n(&self) -> usize {
        self.blocks[0].nrows()
    }

    /// Number of columns of `𝒱_m`.
    pub fn dim(&self) -> usize {
        self.offsets[self.m()]
    }

    /// Width of block `V_j` (1-based).
    pub fn block_width(&self, j: usize) -> usize {
        self.blocks[j - 1].ncols()
    }

    /// Width `d` of the last block `V_m` of the projection basis.
    pub fn last_width(&self) -> usize {
        self.block_width(self.m())
    }

    /// Width of the next block `V_{m+1}`.
    pub fn next_width(&self) -> usize {
        self.blocks[self.m()].ncols()
    }

    pub fn is_breakdown(&self) -> bool {
        self.breakdown
    }

    /// Blocks `V_1, ..., V_{m+1}`.
    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    /// `𝒱_m` as one `n x dim` matrix.
    pub fn basis(&self) -> DenseMatrix {
        let parts: Vec<&DenseMatrix> = self.blocks[..self.m()].iter().collect();
        hcat(&parts, self.n())
    }

    /// `𝒱_{m+1}`.
    pub fn basis_extended(&self) -> DenseMatrix {
        let parts: Vec<&DenseMatrix> = self.blocks.iter().collect();
        hcat(&parts, self.n())
    }

    /// `A 𝒱_m`, from the stored images.
    pub fn image(&self) -> DenseMatrix {
        let parts: Vec<&DenseMatrix> = self.images.iter().collect();
        hcat(&parts, self.n())
    }

    /// `T̄_m`, of size `dim(𝒱_{m+1}) x dim(𝒱_m)`.
    pub fn t_bar(&self) -> &DenseMatrix {
        &self.t_bar
    }

    /// `T_m = 𝒱_m^T A 𝒱_m`.
    pub fn t_m(&self) -> DenseMatrix {
        let d = self.dim();
        self.t_bar.view((0, 0), (d, d)).into_owned()
    }

    /// The coupling block `T_{m+1,m}` (`next_width x last_width`).
    pub fn t_coupling(&self) -> DenseMatrix {
        let d = self.dim();
        let last = self.last_width();
        self.t_bar
            .view((d, d - last), (self.next_width(), last))
            .into_owned()
    }

    /// Coordinates of the start block in `𝒱_m`: `𝒱_m^T start`.
    pub fn start_coeffs(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dim(), self.start_coeffs.ncols());
        out.rows_mut(0, self.start_coeffs.nrows())
            .copy_from(&self.start_coeffs);
        out
    }

    /// `𝒱_m^T W`.
    pub fn project(&self, w: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.dim(), w.ncols());
        for j in 0..self.m() {
            let v = &self.blocks[j];
            out.rows_mut(self.offsets[j], v.ncols())
                .copy_from(&v.tr_mul(w));
        }
        out
    }

    /// `𝒱_m Y`.
    pub fn lift(&self, y: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n(), y.ncols());
        for j in 0..self.m() {
            let v = &self.blocks[j];
            out += v * y.rows(self.offsets[j], v.ncols());
        }
        out
    }

    /// Largest width of the blocks `V_1..V_m`.
    pub fn max_width(&self) -> usize {
        self.blocks[..self.m()].iter().map(|b| b.ncols()).max().unwrap_or(0)
    }
}

/// One block Arnoldi step.
pub fn block_arnoldi_extend(
    op: &dyn LinearOperator,
    state: &mut KrylovDecomposition,
) -> Result<StepOutcome> {
    if state.variant() != KrylovVariant::Block {
        return Err(Error::Precondition("decomposition is not a block Arnoldi one".into()));
    }
    state.extend(op)
}

/// One extended block Arnoldi step.
pub fn extended_block_arnoldi_extend(
    op: &dyn LinearOperator,
    state: &mut KrylovDecomposition,
) -> Result<StepOutcome> {
    if state.variant() != KrylovVariant::Extended {
        return Err(Error::Precondition("decomposition is not an extended one".into()));
    }
    if !op.has_inverse() {
        return Err(Error::Capability("inverse action for the extended Krylov space"));
    }
    state.extend(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{DenseOperator, SparseOperator};
    use crate::problems::{gen_convdiff, gen_random_block};
    use nalgebra::DVector;

    fn check_invariants(op: &dyn LinearOperator, kd: &KrylovDecomposition, a_norm: f64) {
        let v = kd.basis_extended();
        let k = v.ncols();
        let ortho = (v.tr_mul(&v) - DenseMatrix::identity(k, k)).norm();
        assert!(ortho <= 1e-10, "orthonormality {ortho}");
        let vm = kd.basis();
        let av = op.apply(&vm).unwrap();
        let arnoldi = (&av - &v * kd.t_bar()).norm();
        assert!(arnoldi <= 1e-9 * a_norm * vm.norm(), "Arnoldi relation {arnoldi}");
        let proj = (vm.tr_mul(&av) - kd.t_m()).norm();
        assert!(proj <= 1e-10 * a_norm.max(1.0), "projection {proj}");
        // A 𝒱_m = 𝒱_m T_m + V_{m+1} T_{m+1,m} E_m^T.
        let d = kd.dim();
        let last = kd.last_width();
        let mut rhs = &vm * kd.t_m();
        let tail = kd.blocks()[kd.m()].clone() * kd.t_coupling();
        let mut cols = rhs.columns_mut(d - last, last);
        cols += tail;
        assert!((&av - &rhs).norm() <= 1e-9 * a_norm * vm.norm());
    }

    #[test]
    fn identity_breaks_down_immediately() {
        let op = DenseOperator::new(DenseMatrix::identity(6, 6)).unwrap();
        let b = gen_random_block(6, 2, 1);
        let kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Block, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(kd.m(), 1);
        assert!(kd.is_breakdown());
        assert_eq!(kd.t_coupling().len(), 0);

        let kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Extended, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(kd.block_width(1), 2, "[B, A^-1 B] deflates to s columns");
        assert!(kd.is_breakdown());
    }

    #[test]
    fn diagonal_with_unit_vector_stays_axis_aligned() {
        let diag = DVector::from_fn(8, |i, _| -(i as f64) - 1.0);
        let op = DenseOperator::new(DenseMatrix::from_diagonal(&diag)).unwrap();
        let mut b = DenseMatrix::zeros(8, 1);
        b[(0, 0)] = 1.0;
        let kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Block, DEFAULT_RANK_TOL).unwrap();
        assert!(kd.is_breakdown());
        assert_eq!(kd.basis(), b);
        assert_eq!(kd.t_m()[(0, 0)], -1.0);
    }

    #[test]
    fn random_block_arnoldi_invariants() {
        let a = gen_random_block(80, 80, 3).map(|x| x - 0.5);
        let a_norm = crate::dense::spec_norm_2(&a);
        let op = DenseOperator::new(a).unwrap();
        let b = gen_random_block(80, 2, 4);
        let mut kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Block, DEFAULT_RANK_TOL).unwrap();
        let mut previous = kd.basis();
        while kd.m() < 5 {
            assert_eq!(block_arnoldi_extend(&op, &mut kd).unwrap(), StepOutcome::Full);
            let current = kd.basis();
            // Nesting: the old basis is the leading part of the new one.
            assert_eq!(current.columns(0, previous.ncols()), previous);
            previous = current;
        }
        assert_eq!(kd.dim(), 10);
        check_invariants(&op, &kd, a_norm);
        // Block Hessenberg structure.
        let t = kd.t_bar();
        for j in 0..kd.m() {
            for i in (2 * j + 4)..t.nrows() {
                for c in 2 * j..2 * j + 2 {
                    assert!(t[(i, c)].abs() < 1e-12 * a_norm);
                }
            }
        }
    }

    #[test]
    fn extended_span_matches_power_span() {
        let n = 20;
        let diag = DVector::from_fn(n, |i, _| 2.0 + i as f64 * 0.37);
        let a = DenseMatrix::from_diagonal(&diag);
        let op = DenseOperator::new(a.clone()).unwrap();
        let b = gen_random_block(n, 1, 9);
        let mut kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Extended, DEFAULT_RANK_TOL).unwrap();
        for _ in 0..2 {
            extended_block_arnoldi_extend(&op, &mut kd).unwrap();
        }
        let m = kd.m();
        assert_eq!(m, 3);
        let a_inv = a.clone().try_inverse().unwrap();
        let mut cols = Vec::new();
        let mut p = b.clone();
        for _ in 0..m {
            cols.push(p.clone());
            p = &a * p;
        }
        let mut p = b.clone();
        for _ in 0..m {
            p = &a_inv * p;
            cols.push(p.clone());
        }
        let refs: Vec<&DenseMatrix> = cols.iter().collect();
        let span = hcat(&refs, n);
        let q = crate::dense::qr_thin(&span, 1e-14).q;
        let v = kd.basis();
        assert_eq!(v.ncols(), q.ncols());
        let diff = (&v * v.transpose() - &q * q.transpose()).norm();
        assert!(diff <= 1e-8, "projector difference {diff}");
    }

    #[test]
    fn convdiff_extended_relation() {
        let a = gen_convdiff(10).unwrap();
        let a_norm = crate::dense::spec_norm_2(&a.to_dense());
        let op = SparseOperator::with_inverse(a).unwrap();
        let b = gen_random_block(100, 2, 5);
        let mut kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Extended, DEFAULT_RANK_TOL).unwrap();
        while kd.m() < 4 {
            kd.extend(&op).unwrap();
        }
        assert_eq!(kd.dim(), 16);
        check_invariants(&op, &kd, a_norm);
        // Start coefficients reproduce B.
        let b_back = kd.lift(&kd.start_coeffs());
        assert!((b_back - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn breakdown_space_is_invariant() {
        // A acts on a 3-dimensional invariant subspace containing B.
        let mut a = DenseMatrix::zeros(10, 10);
        for i in 0..10 {
            a[(i, i)] = -(i as f64) - 1.0;
        }
        a[(0, 1)] = 0.5;
        a[(1, 2)] = 0.25;
        let op = DenseOperator::new(a.clone()).unwrap();
        let mut b = DenseMatrix::zeros(10, 1);
        b[(2, 0)] = 1.0;
        let mut kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Block, DEFAULT_RANK_TOL).unwrap();
        while !kd.is_breakdown() {
            kd.extend(&op).unwrap();
        }
        assert_eq!(kd.dim(), 3);
        let v = kd.basis();
        let av = &a * &v;
        let outside = (&av - &v * v.tr_mul(&av)).norm();
        assert!(outside <= 1e-8 * av.norm());
    }

    #[test]
    fn extended_requires_inverse() {
        let a = gen_convdiff(3).unwrap();
        let op = SparseOperator::new(a).unwrap();
        let b = gen_random_block(9, 1, 1);
        assert!(matches!(
            KrylovDecomposition::new(&op, &b, KrylovVariant::Extended, DEFAULT_RANK_TOL),
            Err(Error::Capability(_))
        ));
    }
}
