//! Example 2 (heat equation, finite elements) with EBA-BDF.
//!
//! `cargo run --example heat_fem_eba_bdf -- [n] [p]`

use dlyap::grid::TimeGrid;
use dlyap::problems::{gen_heat_fem, gen_random_block};
use dlyap::solver::{solve_eba_bdf, SolverConfig};

fn main() -> dlyap::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(900);
    let p: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);

    let heat = gen_heat_fem(n, 0.01, 0.05)?;
    let b = heat.input_matrix(&gen_random_block(n, 2, 42))?;
    let op = heat.into_operator();
    let grid = TimeGrid::uniform(0.0, 2.0, 1e-3)?;
    let cfg = SolverConfig {
        bdf_order: p,
        store_stride: usize::MAX,
        ..SolverConfig::default()
    };
    let traj = solve_eba_bdf(&op, &b, None, &grid, &cfg)?;
    for r in &traj.history {
        println!("m = {:>2}  dim = {:>3}  residual(tf) = {:.3e}", r.m, r.dim, r.final_residual);
    }
    println!("BDF{p}: converged = {}, max residual {:.3e}", traj.converged, traj.max_residual());
    Ok(())
}
