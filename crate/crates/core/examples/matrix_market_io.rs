//! Writes a problem to Matrix Market files, reads it back and solves it.

use dlyap::grid::TimeGrid;
use dlyap::mtx::{read_dense_matrix_market, read_matrix_market, write_dense_matrix_market, write_matrix_market};
use dlyap::operator::SparseOperator;
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::solver::{solve_eba_exp, SolverConfig};

fn main() -> dlyap::Result<()> {
    let dir = std::env::temp_dir().join(format!("dlyap-mtx-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let a = gen_convdiff(15)?;
    let b = gen_random_block(a.nrows(), 2, 42);
    write_matrix_market(&a, dir.join("A.mtx"))?;
    write_dense_matrix_market(&b, dir.join("B.mtx"))?;

    let a2 = read_matrix_market(dir.join("A.mtx"))?;
    let b2 = read_dense_matrix_market(dir.join("B.mtx"))?;
    println!("A: {}x{}, {} nonzeros, identical: {}", a2.nrows(), a2.ncols(), a2.nnz(), a2 == a);
    println!("B: {}x{}, identical: {}", b2.nrows(), b2.ncols(), b2 == b);

    let op = SparseOperator::with_inverse(a2)?;
    let grid = TimeGrid::uniform(0.0, 1.0, 1e-3)?;
    let traj = solve_eba_exp(&op, &b2, None, &grid, &SolverConfig::default())?;
    println!("m = {}, max residual {:.3e}", traj.m, traj.max_residual());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
