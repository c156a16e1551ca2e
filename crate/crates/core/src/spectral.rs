//! Extremal eigenvalue estimates for large operators: the 2-logarithmic
//! norm and the spectral norm.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::dense::{sym_eig, DenseMatrix};
use crate::error::{Error, Result};
use crate::operator::LinearOperator;

/// Below this size the symmetric matrices are assembled and solved densely.
const DENSE_LIMIT: usize = 400;

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm-sequence
/// bisection.
fn tridiag_max_eig(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < k { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // Number of eigenvalues strictly less than x.
    let count_below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..k {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            d = alpha[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Last component of the unit eigenvector of the tridiagonal matrix for
/// eigenvalue `theta`, via two steps of inverse iteration.
fn tridiag_last_component(alpha: &[f64], beta: &[f64], theta: f64) -> f64 {
    let k = alpha.len();
    if k == 1 {
        return 1.0;
    }
    let scale = alpha.iter().chain(beta).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let shift = theta + 1e-13 * scale;
    let mut y = vec![1.0; k];
    for _ in 0..3 {
        // Thomas algorithm on (T - shift I) z = y with partial pivot-free
        // elimination; the shift keeps the system nonsingular.
        let mut c = vec![0.0; k];
        let mut d = vec![0.0; k];
        let mut denom = alpha[0] - shift;
        c[0] = if k > 1 { beta[0] / denom } else { 0.0 };
        d[0] = y[0] / denom;
        for i in 1..k {
            denom = alpha[i] - shift - beta[i - 1] * c[i - 1];
            if denom == 0.0 {
                denom = f64::EPSILON * scale;
            }
            c[i] = if i + 1 < k { beta[i] / denom } else { 0.0 };
            d[i] = (y[i] - beta[i - 1] * d[i - 1]) / denom;
        }
        let mut z = vec![0.0; k];
        z[k - 1] = d[k - 1];
        for i in (0..k - 1).rev() {
            z[i] = d[i] - c[i] * z[i + 1];
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        y = z.into_iter().map(|v| v / norm).collect();
    }
    y[k - 1]
}

/// Largest eigenvalue of the symmetric operator `apply` by Lanczos with full
/// reorthogonalization.
pub fn lanczos_max_eig<F>(n: usize, apply: F, rel_tol: f64, max_iter: usize, seed: u64) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if n == 0 {
        return Err(Error::Precondition("empty operator".into()));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut q = DVector::from_fn(n, |_, _| rng.gen::<f64>() - 0.5);
    q /= q.norm();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let limit = max_iter.min(n);
    let mut theta = f64::NAN;
    for k in 0..limit {
        let mut w = apply(&q)?;
        let a = q.dot(&w);
        w.axpy(-a, &q, 1.0);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            w.axpy(-b, prev, 1.0);
        }
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        alpha.push(a);
        let b = w.norm();
        theta = tridiag_max_eig(&alpha, &beta);
        let anorm = alpha.iter().chain(&beta).fold(0.0f64, |m, v| m.max(v.abs()));
        let resid = b * tridiag_last_component(&alpha, &beta, theta).abs();
        if resid <= rel_tol * anorm.max(theta.abs()) || b <= 1e-14 * anorm || k + 1 == n {
            return Ok(theta);
        }
        beta.push(b);
        q = w / b;
    }
    Err(Error::IterationLimit {
        what: "Lanczos extremal eigenvalue",
        iterations: limit.max(theta.is_nan() as usize),
    })
}

fn column(v: &DVector<f64>) -> DenseMatrix {
    DenseMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// The 2-logarithmic norm `λ_max((A + A^T) / 2)`.
pub fn log_norm_mu2(op: &dyn LinearOperator) -> Result<f64> {
    let n = op.dim();
    if n <= DENSE_LIMIT {
        let a = op.to_dense()?;
        return Ok(sym_eig(&a)?.values[0]);
    }
    if !op.has_transpose() {
        return Err(Error::Capability("transpose action for the logarithmic norm"));
    }
    lanczos_max_eig(
        n,
        |v| {
            let x = column(v);
            let y = (op.apply(&x)? + op.apply_transpose(&x)?) * 0.5;
            Ok(DVector::from_column_slice(y.as_slice()))
        },
        1e-10,
        2000,
        0x5eed,
    )
}

/// The spectral norm `||A||_2`.
pub fn operator_norm_2(op: &dyn LinearOperator) -> Result<f64> {
    let n = op.dim();
    if n <= DENSE_LIMIT {
        return Ok(crate::dense::spec_norm_2(&op.to_dense()?));
    }
    if !op.has_transpose() {
        return Err(Error::Capability("transpose action for the operator norm"));
    }
    let lambda = lanczos_max_eig(
        n,
        |v| {
            let x = column(v);
            let y = op.apply_transpose(&op.apply(&x)?)?;
            Ok(DVector::from_column_slice(y.as_slice()))
        },
        1e-10,
        2000,
        0x5eed,
    )?;
    Ok(lambda.max(0.0).sqrt())
}

/// `λ_max((M + M^T) / 2)` of a dense matrix.
pub fn log_norm_mu2_dense(m: &DenseMatrix) -> Result<f64> {
    Ok(sym_eig(m)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{DenseOperator, SparseOperator};
    use crate::problems::{gen_convdiff, gen_random_block};
    use crate::sparse::SparseMatrix;

    #[test]
    fn minus_identity() {
        let op = DenseOperator::new(-DenseMatrix::identity(5, 5)).unwrap();
        assert!((log_norm_mu2(&op).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_matrix_gives_largest_eigenvalue() {
        let z = gen_random_block(8, 8, 1);
        let s = &z + z.transpose();
        let op = DenseOperator::new(s.clone()).unwrap();
        let top = sym_eig(&s).unwrap().values[0];
        assert!((log_norm_mu2(&op).unwrap() - top).abs() <= 1e-12 * top.abs());
    }

    #[test]
    fn dense_nonsymmetric_matches_eigensolve() {
        let a = gen_random_block(20, 20, 2).map(|x| x - 0.6);
        let sym = (&a + a.transpose()) * 0.5;
        let expected = sym_eig(&sym).unwrap().values[0];
        let op = DenseOperator::new(a).unwrap();
        let mu = log_norm_mu2(&op).unwrap();
        assert!((mu - expected).abs() <= 1e-8 * expected.abs());
        // Unit vectors never exceed the logarithmic norm.
        let v = gen_random_block(20, 5, 3).map(|x| x - 0.5);
        for c in 0..5 {
            let u = v.column(c) / v.column(c).norm();
            let q = (u.transpose() * &sym * &u)[(0, 0)];
            assert!(q <= mu + 1e-8);
        }
    }

    #[test]
    fn lanczos_matches_dense_on_large_sparse_operator() {
        let a = gen_convdiff(21).unwrap();
        let dense = a.to_dense();
        let mu_dense = sym_eig(&dense).unwrap().values[0];
        let rho_dense = crate::dense::spec_norm_2(&dense);
        let op = SparseOperator::new(a).unwrap();
        assert!(op.dim() > DENSE_LIMIT);
        let mu = log_norm_mu2(&op).unwrap();
        assert!((mu - mu_dense).abs() <= 1e-8 * mu_dense.abs(), "{mu} vs {mu_dense}");
        let rho = operator_norm_2(&op).unwrap();
        assert!((rho - rho_dense).abs() <= 1e-8 * rho_dense, "{rho} vs {rho_dense}");
    }

    #[test]
    fn lanczos_on_diagonal() {
        let n = 500;
        let t: Vec<_> = (0..n).map(|i| (i, i, -(i as f64) - 1.0)).collect();
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let op = SparseOperator::new(a).unwrap();
        assert!((log_norm_mu2(&op).unwrap() + 1.0).abs() < 1e-8);
        assert!((operator_norm_2(&op).unwrap() - n as f64).abs() < 1e-8 * n as f64);
    }
}
