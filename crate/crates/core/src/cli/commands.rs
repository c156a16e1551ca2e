//! The `solve`, `compare`, `sweep` and `gen-problem` subcommands.

use std::fs;
use std::time::Instant;

use crate::analysis::{
    dense_reference_integral, error_bound_stable, gbar_sup, rel_frobenius, INTEGRAL_ORACLE_LIMIT,
};
use crate::dense::{spec_norm_2, DenseMatrix};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mtx::{write_dense_matrix_market, write_matrix_market};
use crate::problems::{BuiltProblem, Export};
use crate::solver::{solve, Method, SolverConfig, Trajectory};
use crate::spectral::log_norm_mu2_dense;

use super::config::{RunConfig, SweepAxis};
use super::report::*;

fn prepare_out(cfg: &RunConfig) -> Result<std::path::PathBuf> {
    let dir = if cfg.output.dir.is_absolute() {
        cfg.output.dir.clone()
    } else {
        std::env::current_dir()?.join(&cfg.output.dir)
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn build(cfg: &RunConfig) -> Result<BuiltProblem> {
    cfg.validate()?;
    cfg.problem.build(&cfg.base_dir)
}

/// Dense `A` when the reference oracle is allowed, otherwise the reason why not.
fn dense_operator(problem: &BuiltProblem) -> std::result::Result<DenseMatrix, String> {
    let n = problem.op.dim();
    if n > INTEGRAL_ORACLE_LIMIT {
        return Err(format!(
            "n = {n} exceeds the dense reference limit {INTEGRAL_ORACLE_LIMIT}"
        ));
    }
    problem.op.to_dense().map_err(|e| e.to_string())
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<bool> {
    let start = Instant::now();
    let problem = build(cfg)?;
    let grid = cfg.grid()?;
    let out = prepare_out(cfg)?;
    let setup = start.elapsed().as_secs_f64();

    let scfg = SolverConfig {
        track_rank: true,
        store_stride: usize::MAX,
        ..cfg.solver.clone()
    };
    let t = Instant::now();
    let traj = solve(scfg.method, problem.op.as_ref(), &problem.b, None, &grid, &scfg)?;
    let solve_seconds = t.elapsed().as_secs_f64();

    let ranks = traj.ranks.clone().unwrap_or_default();
    let rows: Vec<Vec<Cell>> = traj
        .times
        .iter()
        .zip(&traj.residuals)
        .zip(&ranks)
        .map(|((&t, &r), &k)| vec![t.into(), r.into(), k.into()])
        .collect();
    write_csv(&out.join("solve.csv"), &["t", "residual_frobenius", "rank"], &rows)?;

    let factor = if cfg.output.write_factor {
        let z = traj.final_lowrank(cfg.solver.dtol)?;
        let path = out.join("factor.mtx");
        write_dense_matrix_market(z.factor(), &path)?;
        Some(FactorInfo {
            path: "factor.mtx".into(),
            rank: z.rank(),
        })
    } else {
        None
    };

    let report = RunReport {
        problem: cfg.problem.clone(),
        grid: cfg.grid.clone(),
        solver: cfg.solver.clone(),
        method: traj.method,
        converged: traj.converged,
        m: traj.m,
        dim: traj.dim(),
        max_residual: traj.max_residual(),
        iterations: traj.history.clone(),
        nodes: traj
            .times
            .iter()
            .zip(&traj.residuals)
            .enumerate()
            .map(|(k, (&t, &residual))| NodeRecord {
                t,
                residual,
                rank: ranks.get(k).copied(),
            })
            .collect(),
        factor,
        timings: Timings {
            setup_seconds: setup,
            solve_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(traj.converged)
}

pub fn cmd_compare(cfg: &RunConfig) -> Result<bool> {
    let problem = build(cfg)?;
    let grid = cfg.grid()?;
    let out = prepare_out(cfg)?;
    let stride = cfg.output_stride(&grid);
    let nodes = grid.probe_indices(stride);

    let mut runs = Vec::new();
    let mut trajs = Vec::new();
    for method in [Method::EbaExp, Method::EbaBdf] {
        let scfg = SolverConfig {
            method,
            store_stride: stride,
            ..cfg.solver.clone()
        };
        let t = Instant::now();
        let traj = solve(method, problem.op.as_ref(), &problem.b, None, &grid, &scfg)?;
        runs.push(RunSummary {
            method,
            converged: traj.converged,
            m: traj.m,
            max_residual: traj.max_residual(),
            solve_seconds: t.elapsed().as_secs_f64(),
        });
        trajs.push(traj);
    }

    let (oracle, oracle_skipped, oracle_seconds) = match dense_operator(&problem) {
        Ok(a) => {
            let t = Instant::now();
            let x = dense_reference_integral(&a, &problem.b, None, &grid, cfg.solver.quadrature_order, &nodes)?;
            (Some(x), None, Some(t.elapsed().as_secs_f64()))
        }
        Err(reason) => (None, Some(reason), None),
    };

    let mut rows = Vec::with_capacity(nodes.len());
    let mut finals = (None, None, f64::NAN);
    for (i, &k) in nodes.iter().enumerate() {
        let xe = trajs[0].dense_at(k).expect("stored at output stride");
        let xb = trajs[1].dense_at(k).expect("stored at output stride");
        let (re, rb, x11) = match &oracle {
            Some(x) => (rel_frobenius(&x[i], &xe), rel_frobenius(&x[i], &xb), x[i][(0, 0)]),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        let reb = rel_frobenius(&xe, &xb);
        if k == grid.steps() {
            finals = (oracle.as_ref().map(|_| re), oracle.as_ref().map(|_| rb), reb);
        }
        rows.push(vec![
            grid.time(k).into(),
            re.into(),
            rb.into(),
            reb.into(),
            xe[(0, 0)].into(),
            xb[(0, 0)].into(),
            x11.into(),
        ]);
    }
    write_csv(
        &out.join("compare.csv"),
        &["t", "rel_exp_oracle", "rel_bdf_oracle", "rel_exp_bdf", "x11_exp", "x11_bdf", "x11_oracle"],
        &rows,
    )?;
    let converged = runs.iter().all(|r| r.converged);
    write_json(
        &out.join("report.json"),
        &CompareReport {
            problem: cfg.problem.clone(),
            grid: cfg.grid.clone(),
            solver: cfg.solver.clone(),
            runs,
            oracle_skipped,
            oracle_seconds,
            final_rel_exp_oracle: finals.0,
            final_rel_bdf_oracle: finals.1,
            final_rel_exp_bdf: finals.2,
        },
    )?;
    Ok(converged)
}

/// Final-time error and stable-case bound against the dense reference.
fn error_and_bound(exact_final: &DenseMatrix, traj: &Trajectory, mu2: f64) -> (f64, Option<f64>) {
    let error = spec_norm_2(&(exact_final - traj.final_solution()));
    let bound = traj.basis.as_ref().and_then(|kd| {
        let tf = *traj.times.last().expect("nonempty grid");
        error_bound_stable(mu2, spec_norm_2(&kd.t_coupling()), gbar_sup(traj), traj.times[0], tf).ok()
    });
    (error, bound)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<bool> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep: missing [sweep] section".into()))?;
    let problem = build(cfg)?;
    let base_grid = cfg.grid()?;
    let out = prepare_out(cfg)?;
    let methods = sweep.methods.clone().unwrap_or_else(|| vec![cfg.solver.method]);
    let dense = dense_operator(&problem);
    let oracle_skipped = dense.as_ref().err().cloned();
    let mu2 = match &dense {
        Ok(a) => Some(log_norm_mu2_dense(a)?),
        Err(_) => None,
    };

    // Reference at the final time, on the finest grid of the sweep.
    let exact_final = match &dense {
        Ok(a) if !sweep.values.is_empty() => {
            let h = match sweep.axis {
                SweepAxis::H => sweep.values.iter().copied().fold(cfg.solver.h, f64::min),
                _ => cfg.solver.h,
            };
            let grid = TimeGrid::uniform(cfg.grid.t0, cfg.grid.tf, h)?;
            let x = dense_reference_integral(a, &problem.b, None, &grid, cfg.solver.quadrature_order, &[grid.steps()])?;
            x.into_iter().next()
        }
        _ => None,
    };

    let mut points = Vec::new();
    let mut all_ok = true;
    for &method in &methods {
        let mut rows = Vec::new();
        for &value in &sweep.values {
            let mut scfg = SolverConfig {
                method,
                store_stride: cfg.solver.store_stride,
                ..cfg.solver.clone()
            };
            let mut grid = base_grid.clone();
            match sweep.axis {
                SweepAxis::M => {
                    if value < 1.0 || value.fract() != 0.0 {
                        return Err(Error::Config(format!("sweep: m values must be positive integers, got {value}")));
                    }
                    scfg.m_max = value as usize;
                    scfg.tol = f64::MIN_POSITIVE;
                }
                SweepAxis::H => {
                    scfg.h = value;
                    grid = TimeGrid::uniform(cfg.grid.t0, cfg.grid.tf, value)?;
                }
                SweepAxis::P => {
                    if !(1.0..=3.0).contains(&value) || value.fract() != 0.0 {
                        return Err(Error::Config(format!("sweep: p values must be 1, 2 or 3, got {value}")));
                    }
                    scfg.method = Method::EbaBdf;
                    scfg.bdf_order = value as usize;
                }
            }
            let traj = solve(scfg.method, problem.op.as_ref(), &problem.b, None, &grid, &scfg)?;
            if sweep.axis != SweepAxis::M {
                all_ok &= traj.converged;
            }
            let residual = *traj.residuals.last().expect("nonempty grid");
            let (error, bound) = match (&dense, &exact_final, mu2) {
                (Ok(_), Some(x), Some(mu)) => {
                    let (e, b) = error_and_bound(x, &traj, mu);
                    (Some(e), b)
                }
                _ => (None, None),
            };
            rows.push(vec![
                value.into(),
                residual.into(),
                error.unwrap_or(f64::NAN).into(),
                bound.unwrap_or(f64::NAN).into(),
            ]);
            points.push(SweepPoint {
                method: scfg.method,
                axis_value: value,
                residual,
                error,
                bound_eq19: bound,
                m: traj.m,
                converged: traj.converged,
            });
        }
        write_csv(
            &out.join(format!("sweep_{}.csv", method.name())),
            &["axis_value", "residual", "error", "bound_eq19"],
            &rows,
        )?;
    }
    write_json(
        &out.join("report.json"),
        &SweepReport {
            problem: cfg.problem.clone(),
            grid: cfg.grid.clone(),
            solver: cfg.solver.clone(),
            axis: sweep.axis,
            points,
            oracle_skipped,
        },
    )?;
    Ok(all_ok)
}

pub fn cmd_gen_problem(cfg: &RunConfig) -> Result<bool> {
    let problem = build(cfg)?;
    let out = prepare_out(cfg)?;
    for (stem, matrix) in &problem.exports {
        let path = out.join(format!("{stem}.mtx"));
        match matrix {
            Export::Sparse(a) => write_matrix_market(a, &path)?,
            Export::Dense(d) => write_dense_matrix_market(d, &path)?,
        }
    }
    let text = toml::to_string(&cfg.problem).map_err(|e| Error::Config(e.to_string()))?;
    crate::mtx::write_atomic(&out.join("problem.toml"), text.as_bytes())?;
    Ok(true)
}
