//! Rank of the truncated factor `Z` with `X(t) ≈ Z Z^T` for several `dtol`.

use dlyap::dense::frob_norm;
use dlyap::grid::TimeGrid;
use dlyap::operator::SparseOperator;
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::solver::{solve_eba_exp, SolverConfig};

fn main() -> dlyap::Result<()> {
    let op = SparseOperator::with_inverse(gen_convdiff(20)?)?;
    let b = gen_random_block(400, 2, 42);
    let grid = TimeGrid::uniform(0.0, 2.0, 1e-3)?;
    let cfg = SolverConfig {
        store_stride: 500,
        ..SolverConfig::default()
    };
    let traj = solve_eba_exp(&op, &b, None, &grid, &cfg)?;
    let x = traj.final_solution();
    println!("basis dimension {}, ||X(tf)||_F = {:.3e}", traj.dim(), frob_norm(&x));
    for dtol in [1e-4, 1e-8, 1e-12] {
        let z = traj.final_lowrank(dtol)?;
        println!("dtol {dtol:.0e}: rank {:>3}, ||X - ZZ^T||_F = {:.3e}", z.rank(), frob_norm(&(&x - z.to_dense())));
    }
    for &k in traj.stored.keys() {
        println!("t = {:.2}: rank {}", traj.times[k], traj.lowrank_at(k, 1e-12)?.rank());
    }
    Ok(())
}
