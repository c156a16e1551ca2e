//! Measured error against the stable-case a priori bound as `m` grows.

use dlyap::analysis::{bound_report, dense_reference_integral};
use dlyap::grid::TimeGrid;
use dlyap::operator::SparseOperator;
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::solver::{solve_eba_exp, SolverConfig};

fn main() -> dlyap::Result<()> {
    let a = gen_convdiff(10)?;
    let ad = a.to_dense();
    let op = SparseOperator::with_inverse(a)?;
    let b = gen_random_block(100, 2, 42);
    let grid = TimeGrid::uniform(0.0, 2.0, 1e-2)?;
    let nodes: Vec<usize> = (0..grid.len()).collect();
    let exact = dense_reference_integral(&ad, &b, None, &grid, 8, &nodes)?;

    println!("{:>3} {:>12} {:>12} {:>12}", "m", "error(tf)", "bound(tf)", "min slack");
    for m in 1..=8 {
        let cfg = SolverConfig {
            m_max: m,
            tol: f64::MIN_POSITIVE,
            ..SolverConfig::default()
        };
        let traj = solve_eba_exp(&op, &b, None, &grid, &cfg)?;
        let rep = bound_report(&ad, &traj, &nodes, &exact)?;
        println!(
            "{m:>3} {:>12.3e} {:>12.3e} {:>12.3e}",
            rep.errors[nodes.len() - 1],
            rep.bound_stable[nodes.len() - 1],
            rep.min_slack()
        );
    }
    Ok(())
}
