//! Fixed-step BDF integration of the projected equation
//! `Y' = T Y + Y T^T + B B^T`.
//!
//! One step of order `p` solves
//!
//! ```text
//! (hβT - I/2) Y + Y (hβT - I/2)^T + hβ B B^T + Σ α_i Y_{k-i} = 0.
//! ```

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dense::{lyap_direct, symmetrize, DenseMatrix, SchurLyapunov};
use crate::error::{Error, Result};
use crate::quadrature::GramStep;

#[derive(Debug, Clone, PartialEq)]
pub struct BdfCoefficients {
    pub p: usize,
    pub beta: f64,
    pub alpha: Vec<f64>,
}

impl BdfCoefficients {
    pub fn order(p: usize) -> Result<Self> {
        let (beta, alpha) = match p {
            1 => (1.0, vec![1.0]),
            2 => (2.0 / 3.0, vec![4.0 / 3.0, -1.0 / 3.0]),
            3 => (6.0 / 11.0, vec![18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0]),
            _ => return Err(Error::Config(format!("BDF order must be 1, 2 or 3, got {p}"))),
        };
        Ok(Self { p, beta, alpha })
    }
}

/// How the first `p - 1` values of a `p`-step method are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BdfStartup {
    /// Step `k < p` uses order `k`.
    LowerOrder,
    /// Starting values from the exponential propagator of the projected
    /// equation.
    #[default]
    Exponential,
}

fn weighted_history(
    bbt: &DenseMatrix,
    history: &[&DenseMatrix],
    h: f64,
    coeffs: &BdfCoefficients,
) -> DenseMatrix {
    let mut q = bbt * (h * coeffs.beta);
    for (a, y) in coeffs.alpha.iter().zip(history) {
        q.zip_apply(*y, |qi, yi| *qi += a * yi);
    }
    q
}

/// One BDF step. `history[0]` is the most recent value.
pub fn bdf_step(
    t_m: &DenseMatrix,
    b_m: &DenseMatrix,
    history: &[DenseMatrix],
    h: f64,
    coeffs: &BdfCoefficients,
) -> Result<DenseMatrix> {
    let d = t_m.nrows();
    if t_m.ncols() != d || b_m.nrows() != d {
        return Err(Error::Dimension {
            op: "bdf_step",
            expected: (d, d),
            got: (b_m.nrows(), t_m.ncols()),
        });
    }
    if history.len() < coeffs.p {
        return Err(Error::Precondition(format!(
            "BDF{} needs {} previous values, got {}",
            coeffs.p,
            coeffs.p,
            history.len()
        )));
    }
    if let Some(y) = history.iter().find(|y| y.shape() != (d, d)) {
        return Err(Error::Dimension {
            op: "bdf_step history",
            expected: (d, d),
            got: y.shape(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::Precondition("BDF step needs h > 0".into()));
    }
    let refs: Vec<&DenseMatrix> = history.iter().collect();
    let q = weighted_history(&(b_m * b_m.transpose()), &refs, h, coeffs);
    let f = t_m * (h * coeffs.beta) - DenseMatrix::identity(d, d) * 0.5;
    lyap_direct(&f, &q)
}

/// Steps the projected equation across a uniform grid.
///
/// Each step solves for the increment `Y_{k+1} - Y_k` with the Schur form of
/// `T` shared by all orders. Rounding then scales with the increment rather
/// than with `Y`, which keeps the small trailing rows of `Y` (and so the
/// residual) accurate down to the level of the exponential method.
pub(crate) struct BdfIntegrator {
    schur: Vec<SchurLyapunov>,
    shifted: Vec<DenseMatrix>,
    coeffs: Vec<BdfCoefficients>,
    bbt: DenseMatrix,
    h: f64,
    p: usize,
    startup: Option<GramStep>,
    history: VecDeque<DenseMatrix>,
    k: usize,
}

impl BdfIntegrator {
    pub fn new(
        t_m: &DenseMatrix,
        b_m: &DenseMatrix,
        y0: &DenseMatrix,
        h: f64,
        p: usize,
        startup: BdfStartup,
        startup_step: impl FnOnce() -> Result<GramStep>,
    ) -> Result<Self> {
        let d = t_m.nrows();
        let base = SchurLyapunov::new(t_m)?;
        let coeffs: Vec<BdfCoefficients> = (1..=p).map(BdfCoefficients::order).collect::<Result<_>>()?;
        let schur = coeffs.iter().map(|c| base.affine(h * c.beta, -0.5)).collect();
        let shifted = coeffs
            .iter()
            .map(|c| t_m * (h * c.beta) - DenseMatrix::identity(d, d) * 0.5)
            .collect();
        let startup = match startup {
            BdfStartup::Exponential if p > 1 => Some(startup_step()?),
            _ => None,
        };
        let mut history = VecDeque::with_capacity(p);
        history.push_front(symmetrize(y0));
        Ok(Self {
            schur,
            shifted,
            coeffs,
            bbt: b_m * b_m.transpose(),
            h,
            p,
            startup,
            history,
            k: 0,
        })
    }

    pub fn current(&self) -> &DenseMatrix {
        &self.history[0]
    }

    pub fn advance(&mut self) -> Result<()> {
        let next = self.k + 1;
        let y = match (&self.startup, next < self.p) {
            (Some(step), true) => step.apply(&self.history[0]),
            _ => {
                let order = next.min(self.p);
                let c = &self.coeffs[order - 1];
                let refs: Vec<&DenseMatrix> = self.history.iter().take(order).collect();
                let q = weighted_history(&self.bbt, &refs, self.h, c);
                let mut y = self.history[0].clone();
                let fy = &self.shifted[order - 1] * &y;
                let defect = &fy + fy.transpose() + q;
                y += self.schur[order - 1].solve(&defect)?;
                symmetrize(&y)
            }
        };
        self.history.push_front(y);
        self.history.truncate(self.p);
        self.k = next;
        Ok(())
    }
}
