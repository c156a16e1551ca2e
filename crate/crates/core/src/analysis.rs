//! Dense reference solutions and a posteriori error bounds for checking the
//! Krylov solvers on problems small enough to handle densely.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dense::{expm, frob_norm, lyap_direct, spec_norm_2, symmetrize, DenseMatrix};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::krylov::KrylovDecomposition;
use crate::quadrature::{gauss_legendre, GramPropagator, GramStep};
use crate::solver::{BdfCoefficients, BdfStartup, Trajectory};
use crate::spectral::log_norm_mu2_dense;

pub const INTEGRAL_ORACLE_LIMIT: usize = 500;
pub const KRON_ORACLE_LIMIT: usize = 60;

fn check_problem(a: &DenseMatrix, b: &DenseMatrix, x0: Option<&DenseMatrix>, op: &'static str) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare {
            op,
            rows: n,
            cols: a.ncols(),
        });
    }
    if b.nrows() != n {
        return Err(Error::Dimension {
            op,
            expected: (n, b.ncols()),
            got: b.shape(),
        });
    }
    if let Some(x) = x0 {
        if x.shape() != (n, n) {
            return Err(Error::Dimension {
                op,
                expected: (n, n),
                got: x.shape(),
            });
        }
    }
    Ok(n)
}

/// `X(t_k) = e^{(t_k-t0)A} X0 e^{(t_k-t0)A^T} + ∫_0^{t_k-t0} e^{σA} B B^T e^{σA^T} dσ`
/// at the sorted node indices `nodes`, with exact step exponentials and
/// `q`-point Gauss–Legendre panels of one grid step.
pub fn dense_reference_integral(
    a: &DenseMatrix,
    b: &DenseMatrix,
    x0: Option<&DenseMatrix>,
    grid: &TimeGrid,
    q: usize,
    nodes: &[usize],
) -> Result<Vec<DenseMatrix>> {
    let n = check_problem(a, b, x0, "dense_reference_integral")?;
    if n > INTEGRAL_ORACLE_LIMIT {
        return Err(Error::SizeGuard {
            what: "dense_reference_integral",
            limit: INTEGRAL_ORACLE_LIMIT,
            n,
        });
    }
    if nodes.windows(2).any(|w| w[1] < w[0]) || nodes.last().is_some_and(|&k| k > grid.steps()) {
        return Err(Error::Precondition("oracle nodes must be sorted grid indices".into()));
    }
    let mut prop = GramPropagator::new(a, b, grid.h(), q)?;
    let mut x = x0.map_or_else(|| DenseMatrix::zeros(n, n), symmetrize);
    let mut at = 0;
    let mut out = Vec::with_capacity(nodes.len());
    for &k in nodes {
        if k > at {
            x = prop.steps(k - at).apply(&x);
            at = k;
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Fixed-step BDF-`p` on the vectorized equation `x' = (I⊗A + A⊗I) x + vec(BB^T)`,
/// returning every grid node.
///
/// With [`BdfStartup::Exponential`] the first `p - 1` values use
/// `X ↦ E X E^T + W` with `E = e^{hA}` and `A W + W A^T = E B B^T E^T - B B^T`.
pub fn dense_reference_kron_ode(
    a: &DenseMatrix,
    b: &DenseMatrix,
    x0: Option<&DenseMatrix>,
    grid: &TimeGrid,
    p: usize,
    startup: BdfStartup,
) -> Result<Vec<DenseMatrix>> {
    let n = check_problem(a, b, x0, "dense_reference_kron_ode")?;
    if n > KRON_ORACLE_LIMIT {
        return Err(Error::SizeGuard {
            what: "dense_reference_kron_ode",
            limit: KRON_ORACLE_LIMIT,
            n,
        });
    }
    let coeffs: Vec<BdfCoefficients> = (1..=p).map(BdfCoefficients::order).collect::<Result<_>>()?;
    let h = grid.h();
    let nn = n * n;
    let eye = DenseMatrix::identity(n, n);
    let kron_sum = eye.kronecker(a) + a.kronecker(&eye);
    let bbt = b * b.transpose();
    let c = DVector::from_column_slice(bbt.as_slice());

    let orders_needed: Vec<usize> = match startup {
        BdfStartup::LowerOrder => (1..=p).collect(),
        BdfStartup::Exponential => vec![p],
    };
    let mut lus = Vec::with_capacity(p);
    for order in 1..=p {
        if orders_needed.contains(&order) {
            let beta = coeffs[order - 1].beta;
            let m = DenseMatrix::identity(nn, nn) - &kron_sum * (h * beta);
            lus.push(Some(m.lu()));
        } else {
            lus.push(None);
        }
    }
    let exact_step = match startup {
        BdfStartup::Exponential if p > 1 => {
            let e = expm(&(a * h))?;
            let rhs = &e * &bbt * e.transpose() - &bbt;
            let w = lyap_direct(a, &(-rhs))?;
            Some(GramStep { p: e, w })
        }
        _ => None,
    };

    let x_init = x0.map_or_else(|| DenseMatrix::zeros(n, n), symmetrize);
    let mut xs: Vec<DVector<f64>> = vec![DVector::from_column_slice(x_init.as_slice())];
    let mut out = vec![x_init];
    for k in 1..=grid.steps() {
        let next = match (&exact_step, k < p) {
            (Some(step), true) => {
                let y = step.apply(out.last().expect("nonempty"));
                DVector::from_column_slice(y.as_slice())
            }
            _ => {
                let order = k.min(p);
                let cf = &coeffs[order - 1];
                let mut rhs = &c * (h * cf.beta);
                for (i, alpha) in cf.alpha.iter().enumerate() {
                    rhs.axpy(*alpha, &xs[xs.len() - 1 - i], 1.0);
                }
                let lu = lus[order - 1].as_ref().expect("factored for this order");
                lu.solve(&rhs).ok_or(Error::SingularPivot { step: k, row: 0 })?
            }
        };
        let x = symmetrize(&DenseMatrix::from_column_slice(n, n, next.as_slice()));
        xs.push(next);
        if xs.len() > p {
            xs.remove(0);
        }
        out.push(x);
    }
    Ok(out)
}

/// `‖T_{m+1,m}‖ ‖Ḡ_m‖_∞ (e^{2(t-t0)μ} - 1) / (2μ)` for `μ = μ_2(A) < 0`.
pub fn error_bound_stable(mu2: f64, coupling_norm: f64, gbar_sup: f64, t0: f64, t: f64) -> Result<f64> {
    if !(mu2 < 0.0) {
        return Err(Error::Precondition(format!(
            "error bound needs a stable matrix (μ2 < 0), got μ2 = {mu2}"
        )));
    }
    if t < t0 {
        return Err(Error::Precondition("error bound needs t >= t0".into()));
    }
    let growth = (2.0 * (t - t0) * mu2).exp_m1() / (2.0 * mu2);
    Ok(coupling_norm * gbar_sup * growth)
}

/// `2 ‖B‖ ρ^m e^ρ / m!`.
pub fn expm_action_bound(rho: f64, b_norm: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Precondition("expm_action_bound needs m >= 1".into()));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let log_fact: f64 = (1..=m).map(|k| (k as f64).ln()).sum();
    Ok(2.0 * b_norm * (m as f64 * rho.ln() + rho - log_fact).exp())
}

/// `∫_0^{t-t0} e^{uμ} (‖B‖ + ‖B_m‖) 2‖B‖ (uρ)^m e^{uρ} / m! du`.
pub fn error_bound_expm(
    mu2: f64,
    rho: f64,
    b_norm: f64,
    bm_norm: f64,
    m: usize,
    t0: f64,
    t: f64,
    panels: usize,
) -> Result<f64> {
    if t < t0 {
        return Err(Error::Precondition("error bound needs t >= t0".into()));
    }
    let (x, w) = gauss_legendre(8);
    let width = (t - t0) / panels.max(1) as f64;
    let mut total = 0.0;
    for p in 0..panels.max(1) {
        for (xi, wi) in x.iter().zip(&w) {
            let u = (p as f64 + xi) * width;
            let inner = expm_action_bound(u * rho, b_norm, m)?;
            total += wi * width * (u * mu2).exp() * (b_norm + bm_norm) * inner;
        }
    }
    Ok(total)
}

/// Bound curves for one Krylov solution checked against a dense reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub m: usize,
    pub times: Vec<f64>,
    /// `‖X(t) - X_m(t)‖_2` at each node.
    pub errors: Vec<f64>,
    /// The stable-case bound at each node.
    pub bound_stable: Vec<f64>,
    /// The integral bound with the exact exponential action, when computed.
    pub bound_general: Option<Vec<f64>>,
    pub mu2: f64,
    pub rho: f64,
    pub coupling_norm: f64,
    pub gbar_sup: f64,
    pub mu2_projected: f64,
}

impl BoundReport {
    /// Smallest `bound - error` over the nodes.
    pub fn min_slack(&self) -> f64 {
        self.bound_stable
            .iter()
            .zip(&self.errors)
            .map(|(b, e)| b - e)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `max_τ ‖Ḡ_m(τ)‖_2` over the stored nodes of `traj`.
pub fn gbar_sup(traj: &Trajectory) -> f64 {
    let Some(kd) = &traj.basis else { return 0.0 };
    let d = kd.last_width();
    traj.stored
        .values()
        .map(|g| spec_norm_2(&g.rows(g.nrows() - d, d).into_owned()))
        .fold(0.0, f64::max)
}

/// Compares `traj` (which must store every node in `nodes`) with the dense
/// reference `exact` at those nodes and evaluates the stable-case bound.
pub fn bound_report(
    a: &DenseMatrix,
    traj: &Trajectory,
    nodes: &[usize],
    exact: &[DenseMatrix],
) -> Result<BoundReport> {
    if nodes.len() != exact.len() {
        return Err(Error::Precondition("one reference matrix per node is required".into()));
    }
    let kd = traj
        .basis
        .as_ref()
        .ok_or_else(|| Error::Precondition("trajectory has no Krylov basis".into()))?;
    let mu2 = log_norm_mu2_dense(a)?;
    let coupling_norm = spec_norm_2(&kd.t_coupling());
    let sup = gbar_sup(traj);
    let t0 = traj.times[0];
    let mut errors = Vec::with_capacity(nodes.len());
    let mut bound = Vec::with_capacity(nodes.len());
    let mut times = Vec::with_capacity(nodes.len());
    for (&k, x) in nodes.iter().zip(exact) {
        let xm = traj
            .dense_at(k)
            .ok_or_else(|| Error::Precondition(format!("node {k} was not stored")))?;
        errors.push(spec_norm_2(&(x - xm)));
        bound.push(error_bound_stable(mu2, coupling_norm, sup, t0, traj.times[k])?);
        times.push(traj.times[k]);
    }
    Ok(BoundReport {
        m: traj.m,
        times,
        errors,
        bound_stable: bound,
        bound_general: None,
        mu2,
        rho: spec_norm_2(a),
        coupling_norm,
        gbar_sup: sup,
        mu2_projected: log_norm_mu2_dense(&kd.t_m())?,
    })
}

/// `∫_0^{t_k-t0} e^{uμ_2(A)} (‖B‖ + ‖B_m‖) ‖e^{uA}B - 𝒱_m e^{uT_m} B_m‖_2 du`
/// at every grid node, with 4-point Gauss–Legendre panels of one grid step.
pub fn error_bound_general(
    a: &DenseMatrix,
    b: &DenseMatrix,
    kd: &KrylovDecomposition,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    let n = check_problem(a, b, None, "error_bound_general")?;
    if n > INTEGRAL_ORACLE_LIMIT {
        return Err(Error::SizeGuard {
            what: "error_bound_general",
            limit: INTEGRAL_ORACLE_LIMIT,
            n,
        });
    }
    let mu2 = log_norm_mu2_dense(a)?;
    let t_m = kd.t_m();
    let b_m = kd.project(b);
    let weight = spec_norm_2(b) + spec_norm_2(&b_m);
    let h = grid.h();
    let (x, w) = gauss_legendre(4);
    let mut big: Vec<DenseMatrix> = x.iter().map(|xi| Ok(expm(&(a * (xi * h)))? * b)).collect::<Result<_>>()?;
    let mut small: Vec<DenseMatrix> = x
        .iter()
        .map(|xi| Ok(expm(&(&t_m * (xi * h)))? * &b_m))
        .collect::<Result<_>>()?;
    let step_big = expm(&(a * h))?;
    let step_small = expm(&(&t_m * h))?;
    let mut out = vec![0.0];
    let mut total = 0.0;
    for k in 0..grid.steps() {
        for i in 0..x.len() {
            let u = (k as f64 + x[i]) * h;
            let diff = &big[i] - kd.lift(&small[i]);
            total += w[i] * h * (u * mu2).exp() * weight * spec_norm_2(&diff);
            big[i] = &step_big * &big[i];
            small[i] = &step_small * &small[i];
        }
        out.push(total);
    }
    Ok(out)
}

/// The dense residual `Ẋ_m - A X_m - X_m A^T - B B^T` of a projected solution
/// `g`, with `Ẋ_m = 𝒱 (T G + G T^T + B_m B_m^T) 𝒱^T`.
pub fn dense_residual(a: &DenseMatrix, b: &DenseMatrix, kd: &KrylovDecomposition, g: &DenseMatrix) -> DenseMatrix {
    let v = kd.basis();
    let t = kd.t_m();
    let b_m = v.tr_mul(b);
    let gdot = &t * g + g * t.transpose() + &b_m * b_m.transpose();
    let x = &v * g * v.transpose();
    let xdot = &v * gdot * v.transpose();
    xdot - a * &x - &x * a.transpose() - b * b.transpose()
}

/// `F_m = V_{m+1} T_{m+1,m} V_m^T`, the rank-`d` perturbation for which the
/// projected solution solves `Ẋ = (A - F_m) X + X (A - F_m)^T + B B^T` exactly.
pub fn perturbation(kd: &KrylovDecomposition) -> DenseMatrix {
    let m = kd.m();
    let next = &kd.blocks()[m];
    let last = &kd.blocks()[m - 1];
    next * kd.t_coupling() * last.transpose()
}

/// Residual of the perturbed equation for `g`.
pub fn perturbed_residual(a: &DenseMatrix, b: &DenseMatrix, kd: &KrylovDecomposition, g: &DenseMatrix) -> DenseMatrix {
    let v = kd.basis();
    let t = kd.t_m();
    let b_m = v.tr_mul(b);
    let gdot = &t * g + g * t.transpose() + &b_m * b_m.transpose();
    let x = &v * g * v.transpose();
    let xdot = &v * gdot * v.transpose();
    let ap = a - perturbation(kd);
    xdot - &ap * &x - &x * ap.transpose() - b * b.transpose()
}

/// `‖X - Y‖_F / ‖X‖_F` (absolute when `X = 0`).
pub fn rel_frobenius(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    let den = frob_norm(x);
    let num = frob_norm(&(x - y));
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
