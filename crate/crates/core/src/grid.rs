//! Uniform time grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `t_k = t0 + k h` for `k = 0..=steps`, with `t_steps = tf` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    steps: usize,
}

impl TimeGrid {
    /// Uniform grid with step as close to `h` as possible while dividing
    /// `[t0, tf]` exactly. The step is never larger than `h` beyond rounding.
    pub fn uniform(t0: f64, tf: f64, h: f64) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite() && h.is_finite()) || h <= 0.0 {
            return Err(Error::Config(format!("invalid grid t0={t0}, tf={tf}, h={h}")));
        }
        if tf <= t0 {
            return Err(Error::Config(format!("grid needs tf > t0, got [{t0}, {tf}]")));
        }
        let ratio = (tf - t0) / h;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        Self::with_steps(t0, tf, steps.max(1.0) as usize)
    }

    pub fn with_steps(t0: f64, tf: f64, steps: usize) -> Result<Self> {
        if steps == 0 || tf <= t0 {
            return Err(Error::Config("grid needs at least one step over a nonempty interval".into()));
        }
        Ok(Self { t0, tf, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.tf - self.t0) / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.tf
        } else {
            self.t0 + k as f64 * self.h()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// Every `stride`-th node plus the last one.
    pub fn probe_indices(&self, stride: usize) -> Vec<usize> {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        if *idx.last().expect("grid is nonempty") != self.steps {
            idx.push(self.steps);
        }
        idx
    }

    /// `count` node indices spread evenly over the grid, including both ends.
    pub fn sample_indices(&self, count: usize) -> Vec<usize> {
        if count <= 1 {
            return vec![self.steps];
        }
        let mut idx: Vec<usize> = (0..count)
            .map(|i| ((i as f64) * self.steps as f64 / (count - 1) as f64).round() as usize)
            .collect();
        idx.dedup();
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_end_exactly() {
        let g = TimeGrid::uniform(0.0, 2.0, 1e-3).unwrap();
        assert_eq!(g.steps(), 2000);
        assert_eq!(g.len(), 2001);
        assert_eq!(g.time(2000), 2.0);
        let times = g.times();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn step_is_shrunk_to_divide_interval() {
        let g = TimeGrid::uniform(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.steps(), 4);
        assert!((g.h() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn probe_and_sample_indices() {
        let g = TimeGrid::uniform(0.0, 1.0, 0.04).unwrap();
        assert_eq!(g.probe_indices(10), vec![0, 10, 20, 25]);
        let s = g.sample_indices(5);
        assert_eq!(s.first(), Some(&0));
        assert_eq!(s.last(), Some(&25));
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(TimeGrid::uniform(1.0, 0.0, 0.1).is_err());
        assert!(TimeGrid::uniform(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::uniform(0.0, 1.0, f64::NAN).is_err());
    }
}
