use proptest::prelude::*;

use dlyap::analysis::dense_residual;
use dlyap::dense::{expm, frob_norm, lyap_direct, qr_thin, spec_norm_2, sym_eig, symmetrize};
use dlyap::grid::TimeGrid;
use dlyap::krylov::{KrylovDecomposition, KrylovVariant, StepOutcome};
use dlyap::lu::SparseLu;
use dlyap::operator::{DenseOperator, LinearOperator, SparseOperator};
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::solver::{solve, Method, SolverConfig};
use dlyap::spectral::log_norm_mu2_dense;
use dlyap::DenseMatrix;

fn centered(n: usize, k: usize, seed: u64) -> DenseMatrix {
    gen_random_block(n, k, seed).map(|x| x - 0.5)
}

fn stable(n: usize, seed: u64) -> DenseMatrix {
    centered(n, n, seed) - DenseMatrix::identity(n, n) * (0.5 * n as f64).sqrt() * 1.5
}

fn variant() -> impl Strategy<Value = KrylovVariant> {
    prop_oneof![Just(KrylovVariant::Block), Just(KrylovVariant::Extended)]
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![Just(Method::EbaExp), Just(Method::EbaBdf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn expm_is_multiplicative(seed in 0u64..10_000, scale in 0.05f64..2.0) {
        let mut m = centered(10, 10, seed);
        m *= scale / spec_norm_2(&m);
        let e = expm(&m).unwrap();
        let e2 = expm(&(&m * 2.0)).unwrap();
        prop_assert!(frob_norm(&(&e * &e - &e2)) <= 1e-10 * frob_norm(&e2));
    }

    #[test]
    fn lyap_direct_is_symmetric_and_solves(n in 1usize..12, seed in 0u64..10_000) {
        let f = stable(n, seed);
        let z = gen_random_block(n, 2, seed + 1);
        let q = &z * z.transpose();
        let x = lyap_direct(&f, &q).unwrap();
        prop_assert!(frob_norm(&(&x - x.transpose())) <= 1e-12 * frob_norm(&x));
        let r = &f * &x + &x * f.transpose() + &q;
        prop_assert!(frob_norm(&r) <= 1e-11 * (frob_norm(&f) * frob_norm(&x) + frob_norm(&q)));
    }

    #[test]
    fn qr_thin_is_idempotent(n in 4usize..60, k in 1usize..5, seed in 0u64..10_000) {
        let k = k.min(n);
        let q = qr_thin(&gen_random_block(n, k, seed), 1e-12).q;
        let again = qr_thin(&q, 1e-12).q;
        prop_assert_eq!(again.ncols(), q.ncols());
        prop_assert!(frob_norm(&(&again - &q)) <= 1e-13);
    }

    #[test]
    fn log_norm_bounds_rayleigh_quotients(n in 1usize..20, seed in 0u64..10_000) {
        let a = centered(n, n, seed) * 3.0;
        let mu = log_norm_mu2_dense(&a).unwrap();
        let s = symmetrize(&a);
        let v = centered(n, 8, seed + 3);
        for j in 0..v.ncols() {
            let c = v.column(j);
            let norm = c.norm();
            if norm > 0.0 {
                let u = c / norm;
                prop_assert!((u.transpose() * &s * &u)[(0, 0)] <= mu + 1e-8);
            }
        }
    }

    #[test]
    fn operator_is_linear_and_invertible(n0 in 2usize..9, seed in 0u64..10_000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let op = SparseOperator::with_inverse(gen_convdiff(n0).unwrap()).unwrap();
        let n = op.dim();
        let v = gen_random_block(n, 2, seed);
        let w = gen_random_block(n, 2, seed + 1);
        let lhs = op.apply(&(&v * alpha + &w * beta)).unwrap();
        let rhs = op.apply(&v).unwrap() * alpha + op.apply(&w).unwrap() * beta;
        prop_assert!(frob_norm(&(&lhs - &rhs)) <= 1e-12 * frob_norm(&rhs).max(1.0));
        let back = op.apply(&op.apply_inverse(&v).unwrap()).unwrap();
        prop_assert!(frob_norm(&(&back - &v)) <= 1e-10 * frob_norm(&v));
    }

    #[test]
    fn sparse_lu_residual(n0 in 2usize..9, seed in 0u64..10_000) {
        let a = gen_convdiff(n0).unwrap();
        let lu = SparseLu::new(&a).unwrap();
        let rhs = gen_random_block(a.nrows(), 100, seed);
        let x = lu.solve(&rhs).unwrap();
        for j in 0..rhs.ncols() {
            let r = a.apply(&x.columns(j, 1).into_owned()).unwrap() - rhs.columns(j, 1);
            prop_assert!(r.norm() <= 1e-10 * rhs.column(j).norm());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn arnoldi_relations_hold_at_every_step(
        n0 in 4usize..9, s in 1usize..3, seed in 0u64..10_000, variant in variant()
    ) {
        let a = gen_convdiff(n0).unwrap();
        let ad = a.to_dense();
        let op = SparseOperator::with_inverse(a).unwrap();
        let b = gen_random_block(n0 * n0, s, seed);
        let mut kd = KrylovDecomposition::new(&op, &b, variant, 1e-12).unwrap();
        let mut prev = kd.basis();
        for _ in 0..5 {
            let v = kd.basis();
            prop_assert!(frob_norm(&(v.columns(0, prev.ncols()) - &prev)) == 0.0);
            let ve = kd.basis_extended();
            let d = ve.ncols();
            prop_assert!(frob_norm(&(ve.transpose() * &ve - DenseMatrix::identity(d, d))) <= 1e-10);
            let av = &ad * &v;
            prop_assert!(frob_norm(&(&av - &ve * kd.t_bar())) <= 1e-9 * spec_norm_2(&ad) * spec_norm_2(&v));
            prop_assert!(frob_norm(&(v.transpose() * &av - kd.t_m())) <= 1e-10 * frob_norm(&kd.t_m()));
            prev = v;
            if kd.extend(&op).unwrap() == StepOutcome::Breakdown {
                break;
            }
        }
    }

    #[test]
    fn breakdown_means_invariant_subspace(n in 6usize..30, k in 1usize..5, seed in 0u64..10_000) {
        let d: Vec<f64> = (0..n).map(|i| -1.0 - i as f64).collect();
        let a = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        let mut b = DenseMatrix::zeros(n, 1);
        let w = gen_random_block(k, 1, seed);
        for i in 0..k {
            b[(i, 0)] = 1.0 + w[(i, 0)];
        }
        let op = DenseOperator::new(a.clone()).unwrap();
        let mut kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Block, 1e-12).unwrap();
        let mut broke = kd.is_breakdown();
        for _ in 0..n {
            if broke {
                break;
            }
            broke = kd.extend(&op).unwrap() == StepOutcome::Breakdown;
        }
        prop_assert!(broke);
        let v = kd.basis();
        let av = &a * &v;
        prop_assert!(frob_norm(&(&av - &v * (v.transpose() * &av))) <= 1e-8 * frob_norm(&av));

        let grid = TimeGrid::uniform(0.0, 1.0, 0.05).unwrap();
        let traj = solve(Method::EbaExp, &op, &b, None, &grid, &SolverConfig::default()).unwrap();
        let scale = frob_norm(&(&b * b.transpose()));
        prop_assert!(traj.max_residual() <= 1e-8 * scale);
    }

    #[test]
    fn projected_solutions_are_psd_and_galerkin(
        n in 8usize..40, m in 1usize..5, seed in 0u64..10_000, method in method()
    ) {
        let a = stable(n, seed);
        let b = gen_random_block(n, 2, seed + 1);
        let op = DenseOperator::new(a.clone()).unwrap();
        let grid = TimeGrid::uniform(0.0, 0.5, 0.05).unwrap();
        let cfg = SolverConfig { method, m_max: m, tol: f64::MIN_POSITIVE, store_stride: 1, ..SolverConfig::default() };
        let traj = solve(method, &op, &b, None, &grid, &cfg).unwrap();
        let kd = traj.basis.as_ref().unwrap();
        let v = kd.basis();
        let scale = frob_norm(&(&b * b.transpose()));
        for k in 0..grid.len() {
            let g = traj.small(k).unwrap();
            let eig = sym_eig(g).unwrap();
            let (max, min) = (eig.values[0], *eig.values.last().unwrap());
            prop_assert!(min >= -1e-10 * max.max(0.0));
            prop_assert!(traj.residuals[k] >= 0.0 && traj.residuals_2[k] >= 0.0);
            let r = dense_residual(&a, &b, kd, g);
            prop_assert!(frob_norm(&(v.transpose() * &r * &v)) <= 1e-10 * scale);
        }
    }
}
