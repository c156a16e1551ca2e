//! Both Krylov methods against the two dense references on a small problem.

use dlyap::analysis::{dense_reference_integral, dense_reference_kron_ode, rel_frobenius};
use dlyap::grid::TimeGrid;
use dlyap::operator::SparseOperator;
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::solver::{solve, BdfStartup, Method, SolverConfig};

fn main() -> dlyap::Result<()> {
    let a = gen_convdiff(7)?;
    let ad = a.to_dense();
    let op = SparseOperator::with_inverse(a)?;
    let b = gen_random_block(49, 2, 42);
    let grid = TimeGrid::uniform(0.0, 2.0, 1e-3)?;
    let last = grid.steps();

    let integral = dense_reference_integral(&ad, &b, None, &grid, 4, &[last])?.remove(0);
    let kron = dense_reference_kron_ode(&ad, &b, None, &grid, 2, BdfStartup::Exponential)?;
    println!("integral vs Kronecker BDF2: {:.3e}", rel_frobenius(&integral, &kron[last]));

    for method in [Method::EbaExp, Method::EbaBdf] {
        let cfg = SolverConfig {
            method,
            store_stride: usize::MAX,
            ..SolverConfig::default()
        };
        let x = solve(method, &op, &b, None, &grid, &cfg)?.final_solution();
        println!(
            "{method}: vs integral {:.3e}, vs Kronecker BDF2 {:.3e}",
            rel_frobenius(&integral, &x),
            rel_frobenius(&kron[last], &x)
        );
    }
    Ok(())
}
