//! The EBA-exp and EBA-BDF solvers.
//!
//! Both build the (extended) block Krylov basis `𝒱_m` of `[B, Z0]` one block
//! at a time, solve the projected equation
//!
//! ```text
//! G' = T_m G + G T_m^T + B_m B_m^T,   G(t0) = Z0_m Z0_m^T
//! ```
//!
//! on the grid, and stop once the residual `‖R_m(t)‖_F` is below `tol` at
//! every node. EBA-exp advances `G` with exact exponentials of `T_m` and a
//! quadrature of the Gramian integral; EBA-BDF uses a fixed-step BDF method.

mod bdf;
mod lowrank;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dense::{frob_norm, spec_norm_2, symmetrize, DenseMatrix};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::krylov::{KrylovDecomposition, KrylovVariant, DEFAULT_RANK_TOL};
use crate::operator::LinearOperator;
use crate::quadrature::{GramPropagator, GramStep};

pub use bdf::{bdf_step, BdfCoefficients, BdfStartup};
pub use lowrank::{dominant_eigenpairs, numerical_rank, truncate_lowrank, SymLowRank};

pub(crate) use bdf::BdfIntegrator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    EbaExp,
    EbaBdf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::EbaExp => "eba-exp",
            Method::EbaBdf => "eba-bdf",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "eba-exp" | "exp" => Ok(Method::EbaExp),
            "eba-bdf" | "bdf" => Ok(Method::EbaBdf),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub variant: KrylovVariant,
    pub m_max: usize,
    pub tol: f64,
    pub h: f64,
    pub bdf_order: usize,
    pub bdf_startup: BdfStartup,
    pub quadrature_order: usize,
    pub dtol: f64,
    pub seed: u64,
    pub rank_tol: f64,
    /// Residuals are probed at every `probe_stride`-th node before the full
    /// grid is checked.
    pub probe_stride: usize,
    /// Projected solutions are kept at every `store_stride`-th node and at the
    /// last node.
    pub store_stride: usize,
    /// Record the numerical rank (eigenvalues above `dtol`) at every node.
    pub track_rank: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::EbaExp,
            variant: KrylovVariant::Extended,
            m_max: 30,
            tol: 1e-10,
            h: 1e-3,
            bdf_order: 2,
            bdf_startup: BdfStartup::default(),
            quadrature_order: 4,
            dtol: 1e-12,
            seed: 1,
            rank_tol: DEFAULT_RANK_TOL,
            probe_stride: 10,
            store_stride: 1,
            track_rank: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if !(1..=3).contains(&self.bdf_order) {
            return Err(Error::Config(format!("bdf_order must be 1, 2 or 3, got {}", self.bdf_order)));
        }
        if self.m_max == 0 {
            return Err(Error::Config("m_max must be at least 1".into()));
        }
        if self.quadrature_order == 0 || self.quadrature_order > 64 {
            return Err(Error::Config(format!(
                "quadrature_order must be in 1..=64, got {}",
                self.quadrature_order
            )));
        }
        if !(self.dtol >= 0.0) {
            return Err(Error::Config(format!("dtol must be nonnegative, got {}", self.dtol)));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(Error::Config(format!("rank_tol must be in (0, 1), got {}", self.rank_tol)));
        }
        Ok(())
    }

    pub fn grid(&self, t0: f64, tf: f64) -> Result<TimeGrid> {
        TimeGrid::uniform(t0, tf, self.h)
    }
}

/// One Krylov iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub m: usize,
    pub dim: usize,
    /// Largest residual over the probe nodes.
    pub probe_residual: f64,
    /// Residual at the last node.
    pub final_residual: f64,
    /// Largest residual over the full grid, when it was checked.
    pub full_residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: Method,
    pub n: usize,
    pub times: Vec<f64>,
    /// `‖R_m(t_k)‖_F` at every node for the final `m`.
    pub residuals: Vec<f64>,
    /// `‖R_m(t_k)‖_2` at every node for the final `m`.
    pub residuals_2: Vec<f64>,
    pub ranks: Option<Vec<usize>>,
    /// Projected solutions in basis coordinates, by node index.
    pub stored: BTreeMap<usize, DenseMatrix>,
    pub basis: Option<KrylovDecomposition>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub m: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.basis.as_ref().map_or(0, |b| b.dim())
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, &r| m.max(r))
    }

    pub fn small(&self, k: usize) -> Option<&DenseMatrix> {
        self.stored.get(&k)
    }

    pub fn final_small(&self) -> &DenseMatrix {
        self.stored
            .get(&self.last_index())
            .expect("last node is always stored")
    }

    /// `𝒱 G 𝒱^T` at node `k`, if stored.
    pub fn dense_at(&self, k: usize) -> Option<DenseMatrix> {
        let g = self.stored.get(&k)?;
        Some(match &self.basis {
            Some(b) => b.lift(&b.lift(g).transpose()),
            None => DenseMatrix::zeros(self.n, self.n),
        })
    }

    pub fn final_solution(&self) -> DenseMatrix {
        self.dense_at(self.last_index()).expect("last node is always stored")
    }

    pub fn lowrank_at(&self, k: usize, dtol: f64) -> Result<SymLowRank> {
        let g = self
            .stored
            .get(&k)
            .ok_or_else(|| Error::Precondition(format!("projected solution at node {k} was not stored")))?;
        match &self.basis {
            Some(b) => truncate_lowrank(b, g, dtol),
            None => Ok(SymLowRank::zero(self.n)),
        }
    }

    pub fn final_lowrank(&self, dtol: f64) -> Result<SymLowRank> {
        self.lowrank_at(self.last_index(), dtol)
    }
}

/// `‖R_m‖_F = √2 ‖T_{m+1,m} Ḡ‖_F`, where `Ḡ` holds the last `d` rows of the
/// projected solution and `d` is the width of `T_{m+1,m}`.
pub fn residual_norm(t_coupling: &DenseMatrix, small: &DenseMatrix) -> f64 {
    std::f64::consts::SQRT_2 * frob_norm(&coupled_rows(t_coupling, small))
}

/// `‖R_m‖_2 = ‖T_{m+1,m} Ḡ‖_2`.
pub fn residual_norm_2(t_coupling: &DenseMatrix, small: &DenseMatrix) -> f64 {
    spec_norm_2(&coupled_rows(t_coupling, small))
}

fn coupled_rows(t_coupling: &DenseMatrix, small: &DenseMatrix) -> DenseMatrix {
    let d = t_coupling.ncols();
    if t_coupling.nrows() == 0 || d == 0 {
        return DenseMatrix::zeros(0, small.ncols());
    }
    let rows = small.rows(small.nrows() - d, d);
    t_coupling * rows
}

/// Data of the projected problem at one `m`.
struct Projected {
    t: DenseMatrix,
    b: DenseMatrix,
    g0: DenseMatrix,
    coupling: DenseMatrix,
}

impl Projected {
    fn new(kd: &KrylovDecomposition, s: usize) -> Self {
        let coeffs = kd.start_coeffs();
        let b = coeffs.columns(0, s).into_owned();
        let z0 = coeffs.columns(s, coeffs.ncols() - s);
        Self {
            t: kd.t_m(),
            b,
            g0: symmetrize(&(&z0 * z0.transpose())),
            coupling: kd.t_coupling(),
        }
    }
}

/// Visits the projected solution at the sorted node indices `nodes`.
fn integrate(
    method: Method,
    proj: &Projected,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    nodes: &[usize],
    mut visit: impl FnMut(usize, &DenseMatrix) -> Result<()>,
) -> Result<()> {
    let h = grid.h();
    match method {
        Method::EbaExp => {
            let mut prop = GramPropagator::new(&proj.t, &proj.b, h, cfg.quadrature_order)?;
            let mut cache: HashMap<usize, GramStep> = HashMap::new();
            let mut g = proj.g0.clone();
            let mut at = 0;
            for &k in nodes {
                if k > at {
                    let step = cache.entry(k - at).or_insert_with(|| prop.steps(k - at));
                    g = step.apply(&g);
                    at = k;
                }
                visit(k, &g)?;
            }
        }
        Method::EbaBdf => {
            let mut it = BdfIntegrator::new(
                &proj.t,
                &proj.b,
                &proj.g0,
                h,
                cfg.bdf_order,
                cfg.bdf_startup,
                || Ok(GramPropagator::new(&proj.t, &proj.b, h, cfg.quadrature_order)?.steps(1)),
            )?;
            let mut at = 0;
            for &k in nodes {
                while at < k {
                    it.advance()?;
                    at += 1;
                }
                visit(k, it.current())?;
            }
        }
    }
    Ok(())
}

struct FullPass {
    residuals: Vec<f64>,
    residuals_2: Vec<f64>,
    ranks: Option<Vec<usize>>,
    stored: BTreeMap<usize, DenseMatrix>,
}

fn full_pass(method: Method, proj: &Projected, grid: &TimeGrid, cfg: &SolverConfig) -> Result<FullPass> {
    let nodes: Vec<usize> = (0..grid.len()).collect();
    let last = grid.steps();
    let stride = cfg.store_stride.max(1);
    let mut out = FullPass {
        residuals: Vec::with_capacity(grid.len()),
        residuals_2: Vec::with_capacity(grid.len()),
        ranks: cfg.track_rank.then(Vec::new),
        stored: BTreeMap::new(),
    };
    integrate(method, proj, grid, cfg, &nodes, |k, g| {
        out.residuals.push(residual_norm(&proj.coupling, g));
        out.residuals_2.push(residual_norm_2(&proj.coupling, g));
        if let Some(r) = out.ranks.as_mut() {
            r.push(numerical_rank(g, cfg.dtol)?);
        }
        if k % stride == 0 || k == last {
            out.stored.insert(k, g.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

/// Largest residual over the probe nodes and the residual at the last node.
fn probe_pass(method: Method, proj: &Projected, grid: &TimeGrid, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let nodes = match method {
        Method::EbaExp => grid.probe_indices(cfg.probe_stride),
        // The integrator visits every node anyway.
        Method::EbaBdf => (0..grid.len()).collect(),
    };
    let mut max = 0.0f64;
    let mut last = 0.0;
    integrate(method, proj, grid, cfg, &nodes, |_, g| {
        let f = residual_norm(&proj.coupling, g);
        max = max.max(f);
        last = f;
        Ok(())
    })?;
    Ok((max, last))
}

fn zero_trajectory(method: Method, n: usize, grid: &TimeGrid) -> Trajectory {
    let mut stored = BTreeMap::new();
    stored.insert(grid.steps(), DenseMatrix::zeros(0, 0));
    Trajectory {
        method,
        n,
        times: grid.times(),
        residuals: vec![0.0; grid.len()],
        residuals_2: vec![0.0; grid.len()],
        ranks: None,
        stored,
        basis: None,
        history: vec![IterationRecord {
            m: 1,
            dim: 0,
            probe_residual: 0.0,
            final_residual: 0.0,
            full_residual: Some(0.0),
        }],
        converged: true,
        m: 1,
    }
}

/// Runs `method` on `X' = AX + XA^T + BB^T`, `X(t0) = X0`.
pub fn solve(
    method: Method,
    op: &dyn LinearOperator,
    b: &DenseMatrix,
    x0: Option<&SymLowRank>,
    grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = op.dim();
    if b.nrows() != n {
        return Err(Error::Dimension {
            op: "solve: B",
            expected: (n, b.ncols()),
            got: b.shape(),
        });
    }
    let z0 = match x0 {
        Some(x) if x.n() != n => {
            return Err(Error::Dimension {
                op: "solve: X0 factor",
                expected: (n, x.rank()),
                got: x.factor().shape(),
            })
        }
        Some(x) => x.factor().clone(),
        None => DenseMatrix::zeros(n, 0),
    };
    let s = b.ncols();
    let mut start = DenseMatrix::zeros(n, s + z0.ncols());
    start.columns_mut(0, s).copy_from(b);
    start.columns_mut(s, z0.ncols()).copy_from(&z0);
    if start.iter().all(|v| *v == 0.0) {
        return Ok(zero_trajectory(method, n, grid));
    }

    let mut kd = KrylovDecomposition::new(op, &start, cfg.variant, cfg.rank_tol)?;
    let mut history = Vec::new();
    loop {
        let proj = Projected::new(&kd, s);
        let (probe, last) = probe_pass(method, &proj, grid, cfg)?;
        history.push(IterationRecord {
            m: kd.m(),
            dim: kd.dim(),
            probe_residual: probe,
            final_residual: last,
            full_residual: None,
        });
        let exhausted = kd.is_breakdown() || kd.m() >= cfg.m_max;
        if probe < cfg.tol || exhausted {
            let full = full_pass(method, &proj, grid, cfg)?;
            let max = full.residuals.iter().fold(0.0f64, |m, &r| m.max(r));
            history.last_mut().expect("record pushed").full_residual = Some(max);
            if max < cfg.tol || exhausted {
                return Ok(Trajectory {
                    method,
                    n,
                    times: grid.times(),
                    residuals: full.residuals,
                    residuals_2: full.residuals_2,
                    ranks: full.ranks,
                    stored: full.stored,
                    m: kd.m(),
                    converged: max < cfg.tol,
                    basis: Some(kd),
                    history,
                });
            }
        }
        kd.extend(op)?;
    }
}

/// EBA-exp: exact exponentials of `T_m` and Gauss–Legendre quadrature of the
/// Gramian integral.
pub fn solve_eba_exp(
    op: &dyn LinearOperator,
    b: &DenseMatrix,
    x0: Option<&SymLowRank>,
    grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    solve(Method::EbaExp, op, b, x0, grid, cfg)
}

/// EBA-BDF: fixed-step BDF of order `cfg.bdf_order` on the projected equation.
pub fn solve_eba_bdf(
    op: &dyn LinearOperator,
    b: &DenseMatrix,
    x0: Option<&SymLowRank>,
    grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    solve(Method::EbaBdf, op, b, x0, grid, cfg)
}
