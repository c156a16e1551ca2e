//! Example 1 (convection-diffusion) with EBA-exp.
//!
//! `cargo run --example convdiff_eba_exp -- [n0]`

use std::time::Instant;

use dlyap::grid::TimeGrid;
use dlyap::operator::SparseOperator;
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::solver::{solve_eba_exp, SolverConfig};

fn main() -> dlyap::Result<()> {
    let n0: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let n = n0 * n0;
    let op = SparseOperator::with_inverse(gen_convdiff(n0)?)?;
    let b = gen_random_block(n, 2, 42);
    let grid = TimeGrid::uniform(0.0, 2.0, 1e-3)?;
    let cfg = SolverConfig {
        track_rank: true,
        store_stride: usize::MAX,
        ..SolverConfig::default()
    };

    let start = Instant::now();
    let traj = solve_eba_exp(&op, &b, None, &grid, &cfg)?;
    println!("n = {n}, {} nodes, {:.2}s", grid.len(), start.elapsed().as_secs_f64());
    println!("{:>3} {:>5} {:>12} {:>12}", "m", "dim", "probe", "final");
    for r in &traj.history {
        println!("{:>3} {:>5} {:>12.3e} {:>12.3e}", r.m, r.dim, r.probe_residual, r.final_residual);
    }
    let z = traj.final_lowrank(cfg.dtol)?;
    println!(
        "converged = {}, max residual {:.3e}, rank of X(tf) = {}",
        traj.converged,
        traj.max_residual(),
        z.rank()
    );
    Ok(())
}
