//! Observed BDF orders on `A = diag(-1, ..., -5)` against the closed form.

use dlyap::dense::frob_norm;
use dlyap::grid::TimeGrid;
use dlyap::operator::DenseOperator;
use dlyap::problems::gen_random_block;
use dlyap::solver::{solve_eba_bdf, BdfStartup, SolverConfig};
use dlyap::DenseMatrix;

fn main() -> dlyap::Result<()> {
    let lam: Vec<f64> = (1..=5).map(|i| -(i as f64)).collect();
    let op = DenseOperator::new(DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam.clone())))?;
    let b = gen_random_block(5, 1, 3);
    let exact = DenseMatrix::from_fn(5, 5, |i, j| {
        let s = lam[i] + lam[j];
        b[(i, 0)] * b[(j, 0)] * s.exp_m1() / s
    });
    let steps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    for startup in [BdfStartup::Exponential, BdfStartup::LowerOrder] {
        println!("{startup:?} start-up");
        for p in 1..=3 {
            let mut errs = Vec::new();
            for h in steps {
                let grid = TimeGrid::uniform(0.0, 1.0, h)?;
                let cfg = SolverConfig {
                    bdf_order: p,
                    bdf_startup: startup,
                    tol: f64::MIN_POSITIVE,
                    store_stride: usize::MAX,
                    ..SolverConfig::default()
                };
                let traj = solve_eba_bdf(&op, &b, None, &grid, &cfg)?;
                errs.push(frob_norm(&(traj.final_solution() - &exact)));
            }
            let orders: Vec<String> = errs.windows(2).map(|w| format!("{:.2}", (w[0] / w[1]).log2())).collect();
            println!("  p = {p}: error at h = 1.25e-3 {:.3e}, orders {}", errs[3], orders.join(" "));
        }
    }
    Ok(())
}
