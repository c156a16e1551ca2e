//! Benchmark problem generators.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::operator::{LinearOperator, PairOperator, SparseOperator};
use crate::sparse::SparseMatrix;

/// `n x s` block with entries uniform on `[0, 1)`, filled column by column
/// from a PCG-64 stream seeded with `seed`.
pub fn gen_random_block(n: usize, s: usize, seed: u64) -> DenseMatrix {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut out = DenseMatrix::zeros(n, s);
    for v in out.as_mut_slice() {
        *v = rng.gen::<f64>();
    }
    out
}

/// Coefficients of `Δu - f1 ∂u/∂x + f2 ∂u/∂y + g1 u` on the unit square.
#[derive(Clone, Copy)]
pub struct ConvDiffCoefficients {
    pub f1: fn(f64, f64) -> f64,
    pub f2: fn(f64, f64) -> f64,
    pub g1: fn(f64, f64) -> f64,
}

impl ConvDiffCoefficients {
    /// `f1 = 10xy`, `f2 = exp(x^2 y)`, `g1 = 20y`.
    pub fn benchmark() -> Self {
        Self {
            f1: |x, y| 10.0 * x * y,
            f2: |x, y| (x * x * y).exp(),
            g1: |_, y| 20.0 * y,
        }
    }

    /// All coefficient functions zero: the plain 5-point Laplacian.
    pub fn laplacian() -> Self {
        Self {
            f1: |_, _| 0.0,
            f2: |_, _| 0.0,
            g1: |_, _| 0.0,
        }
    }
}

/// Centered 5-point finite differences of the convection–diffusion operator
/// on the `n0 x n0` interior grid of the unit square with homogeneous
/// Dirichlet conditions. Unknown `(i, j)` (x index `i`, y index `j`) has
/// number `j * n0 + i`.
pub fn gen_convdiff_with(n0: usize, coeffs: &ConvDiffCoefficients) -> Result<SparseMatrix> {
    if n0 < 2 {
        return Err(Error::Precondition(format!("gen_convdiff needs n0 >= 2, got {n0}")));
    }
    let h = 1.0 / (n0 as f64 + 1.0);
    let h2 = h * h;
    let n = n0 * n0;
    let mut t = Vec::with_capacity(5 * n);
    for j in 0..n0 {
        for i in 0..n0 {
            let x = (i as f64 + 1.0) * h;
            let y = (j as f64 + 1.0) * h;
            let k = j * n0 + i;
            let cx = (coeffs.f1)(x, y) / (2.0 * h);
            let cy = (coeffs.f2)(x, y) / (2.0 * h);
            t.push((k, k, -4.0 / h2 + (coeffs.g1)(x, y)));
            // -f1 u_x: west gets +f1/(2h), east gets -f1/(2h).
            if i > 0 {
                t.push((k, k - 1, 1.0 / h2 + cx));
            }
            if i + 1 < n0 {
                t.push((k, k + 1, 1.0 / h2 - cx));
            }
            // +f2 u_y: south gets -f2/(2h), north gets +f2/(2h).
            if j > 0 {
                t.push((k, k - n0, 1.0 / h2 - cy));
            }
            if j + 1 < n0 {
                t.push((k, k + n0, 1.0 / h2 + cy));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t)
}

/// The benchmark convection–diffusion matrix of order `n0^2`.
pub fn gen_convdiff(n0: usize) -> Result<SparseMatrix> {
    gen_convdiff_with(n0, &ConvDiffCoefficients::benchmark())
}

fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> SparseMatrix {
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, d));
        if i > 0 {
            t.push((i, i - 1, lo));
        }
        if i + 1 < n {
            t.push((i, i + 1, up));
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("indices in range")
}

/// Semi-discretized 1-D heat equation with linear finite elements and a
/// semi-implicit Euler step: `A = (M - dt K)^{-1} M`, `B = dt (M - dt K)^{-1} F`.
#[derive(Debug, Clone)]
pub struct HeatFem {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    dt: f64,
    op: PairOperator,
}

impl HeatFem {
    /// `M = tridiag(1, 4, 1) / (6n)`.
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// `K = -alpha n tridiag(-1, 2, -1)`.
    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// `M - dt K`.
    pub fn shifted(&self) -> &SparseMatrix {
        self.op.left_matrix()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn operator(&self) -> &PairOperator {
        &self.op
    }

    pub fn into_operator(self) -> PairOperator {
        self.op
    }

    /// `B = dt (M - dt K)^{-1} F`.
    pub fn input_matrix(&self, f: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.op.left_factor().solve(f)? * self.dt)
    }
}

pub fn gen_heat_fem(n: usize, dt: f64, alpha: f64) -> Result<HeatFem> {
    if n < 2 {
        return Err(Error::Precondition(format!("gen_heat_fem needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let mass = tridiag(n, 1.0, 4.0, 1.0).scale(1.0 / (6.0 * nf));
    let stiffness = tridiag(n, -1.0, 2.0, -1.0).scale(-alpha * nf);
    let shifted = mass.add_scaled(1.0, &stiffness, -dt)?;
    let op = PairOperator::new(shifted, mass.clone())?;
    Ok(HeatFem {
        mass,
        stiffness,
        dt,
        op,
    })
}

/// Problem families the command-line front end can build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Convdiff {
        n0: usize,
        #[serde(default = "default_s")]
        s: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        rhs: RhsKind,
    },
    HeatFem {
        n: usize,
        #[serde(default = "default_s")]
        s: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default)]
        rhs: RhsKind,
    },
    /// Stable diagonal test matrix `diag(-1, -2, ..., -n)`.
    Diagonal {
        n: usize,
        #[serde(default = "default_s")]
        s: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        rhs: RhsKind,
    },
    External {
        a_path: String,
        b_path: Option<String>,
        #[serde(default = "default_s")]
        s: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        rhs: RhsKind,
    },
}

/// How the right-hand side factor is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    #[default]
    Random,
    Zero,
}

fn default_s() -> usize {
    2
}

fn default_dt() -> f64 {
    0.01
}

fn default_alpha() -> f64 {
    0.05
}

impl ProblemSpec {
    pub fn s(&self) -> usize {
        match self {
            Self::Convdiff { s, .. }
            | Self::HeatFem { s, .. }
            | Self::Diagonal { s, .. }
            | Self::External { s, .. } => *s,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::Convdiff { seed, .. }
            | Self::HeatFem { seed, .. }
            | Self::Diagonal { seed, .. }
            | Self::External { seed, .. } => *seed,
        }
    }

    pub fn set_seed(&mut self, value: u64) {
        match self {
            Self::Convdiff { seed, .. }
            | Self::HeatFem { seed, .. }
            | Self::Diagonal { seed, .. }
            | Self::External { seed, .. } => *seed = value,
        }
    }

    pub fn rhs(&self) -> RhsKind {
        match self {
            Self::Convdiff { rhs, .. }
            | Self::HeatFem { rhs, .. }
            | Self::Diagonal { rhs, .. }
            | Self::External { rhs, .. } => *rhs,
        }
    }

    /// Problem dimension, when known without reading files.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Convdiff { n0, .. } => Some(n0 * n0),
            Self::HeatFem { n, .. } | Self::Diagonal { n, .. } => Some(*n),
            Self::External { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s() == 0 {
            return Err(Error::Config("problem.s must be at least 1".into()));
        }
        match self {
            Self::Convdiff { n0, .. } if *n0 < 2 => {
                Err(Error::Config("problem.n0 must be at least 2".into()))
            }
            Self::HeatFem { n, dt, .. } if *n < 2 || *dt <= 0.0 => Err(Error::Config(
                "problem.n must be at least 2 and problem.dt positive".into(),
            )),
            Self::Diagonal { n, .. } if *n == 0 => {
                Err(Error::Config("problem.n must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// An assembled problem: the operator `A` and the input block `B`.
pub struct BuiltProblem {
    pub op: Box<dyn LinearOperator>,
    pub b: DenseMatrix,
    /// Matrices worth exporting, by file stem.
    pub exports: Vec<(&'static str, Export)>,
}

pub enum Export {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl ProblemSpec {
    /// Assembles the operator (with its inverse action) and `B`.
    ///
    /// Relative paths of external matrices are resolved against `base`.
    pub fn build(&self, base: &std::path::Path) -> Result<BuiltProblem> {
        self.validate()?;
        let s = self.s();
        let seed = self.seed();
        let rhs = |n: usize| match self.rhs() {
            RhsKind::Random => gen_random_block(n, s, seed),
            RhsKind::Zero => DenseMatrix::zeros(n, s),
        };
        match self {
            Self::Convdiff { n0, .. } => {
                let a = gen_convdiff(*n0)?;
                let b = rhs(a.nrows());
                Ok(BuiltProblem {
                    exports: vec![("A", Export::Sparse(a.clone())), ("B", Export::Dense(b.clone()))],
                    op: Box::new(SparseOperator::with_inverse(a)?),
                    b,
                })
            }
            Self::Diagonal { n, .. } => {
                let t: Vec<_> = (0..*n).map(|i| (i, i, -((i + 1) as f64))).collect();
                let a = SparseMatrix::from_triplets(*n, *n, &t)?;
                let b = rhs(*n);
                Ok(BuiltProblem {
                    exports: vec![("A", Export::Sparse(a.clone())), ("B", Export::Dense(b.clone()))],
                    op: Box::new(SparseOperator::with_inverse(a)?),
                    b,
                })
            }
            Self::HeatFem { n, dt, alpha, .. } => {
                let heat = gen_heat_fem(*n, *dt, *alpha)?;
                let f = rhs(*n);
                let b = heat.input_matrix(&f)?;
                Ok(BuiltProblem {
                    exports: vec![
                        ("M", Export::Sparse(heat.mass().clone())),
                        ("K", Export::Sparse(heat.stiffness().clone())),
                        ("F", Export::Dense(f)),
                        ("B", Export::Dense(b.clone())),
                    ],
                    op: Box::new(heat.into_operator()),
                    b,
                })
            }
            Self::External { a_path, b_path, .. } => {
                let a = crate::mtx::read_matrix_market(base.join(a_path))?;
                let n = a.nrows();
                let b = match b_path {
                    Some(p) => {
                        let b = crate::mtx::read_dense_matrix_market(base.join(p))?;
                        if b.nrows() != n {
                            return Err(Error::Config(format!(
                                "B has {} rows but A is {n}x{n}",
                                b.nrows()
                            )));
                        }
                        b
                    }
                    None => rhs(n),
                };
                Ok(BuiltProblem {
                    exports: vec![("A", Export::Sparse(a.clone())), ("B", Export::Dense(b.clone()))],
                    op: Box::new(SparseOperator::with_inverse(a)?),
                    b,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::sym_eig;

    #[test]
    fn random_block_is_deterministic_and_in_range() {
        let a = gen_random_block(50, 3, 42);
        assert_eq!(a, gen_random_block(50, 3, 42));
        assert_ne!(a, gen_random_block(50, 3, 43));
        assert!(a.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn random_block_column_means() {
        let a = gen_random_block(10_000, 2, 7);
        for c in 0..2 {
            let mean = a.column(c).sum() / 10_000.0;
            assert!((0.45..=0.55).contains(&mean), "{mean}");
        }
    }

    #[test]
    fn laplacian_limit_is_five_point_stencil() {
        let a = gen_convdiff_with(2, &ConvDiffCoefficients::laplacian()).unwrap();
        let h2 = (1.0f64 / 3.0).powi(2);
        let d = a.to_dense();
        for k in 0..4 {
            assert_eq!(d[(k, k)], -4.0 / h2);
        }
        assert_eq!(d[(0, 1)], 1.0 / h2);
        assert_eq!(d[(0, 2)], 1.0 / h2);
        assert_eq!(d[(0, 3)], 0.0);
    }

    #[test]
    fn laplacian_equals_kronecker_sum() {
        let n0 = 6;
        let a = gen_convdiff_with(n0, &ConvDiffCoefficients::laplacian()).unwrap().to_dense();
        let h2 = (1.0 / (n0 as f64 + 1.0)).powi(2);
        let l = tridiag(n0, 1.0 / h2, -2.0 / h2, 1.0 / h2).to_dense();
        let id = DenseMatrix::identity(n0, n0);
        let kron_sum = id.kronecker(&l) + l.kronecker(&id);
        assert_eq!(a, kron_sum);

        // Interior rows (all four neighbours present) sum to zero.
        for j in 1..n0 - 1 {
            for i in 1..n0 - 1 {
                let k = j * n0 + i;
                let sum: f64 = a.row(k).iter().sum();
                assert!(sum.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn benchmark_stencil_at_first_grid_point() {
        let n0 = 10;
        let a = gen_convdiff(n0).unwrap();
        let h = 1.0 / 11.0;
        let (x, y) = (h, h);
        // Point (1, 1) in 1-based grid terms has neighbours in all directions
        // once we move one step inward; use point (i, j) = (1, 1) zero-based.
        let (i, j) = (1usize, 1usize);
        let (xi, yj) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
        let k = j * n0 + i;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        assert!(close(a.get(k, k), -4.0 / (h * h) + 20.0 * yj));
        assert!(close(a.get(k, k - 1), 1.0 / (h * h) + 10.0 * xi * yj / (2.0 * h)));
        assert!(close(a.get(k, k + 1), 1.0 / (h * h) - 10.0 * xi * yj / (2.0 * h)));
        assert!(close(a.get(k, k - n0), 1.0 / (h * h) - (xi * xi * yj).exp() / (2.0 * h)));
        assert!(close(a.get(k, k + n0), 1.0 / (h * h) + (xi * xi * yj).exp() / (2.0 * h)));
        // Corner point (x, y) = (1/11, 1/11).
        assert!(close(a.get(0, 0), -4.0 / (h * h) + 20.0 * y));
        assert!(close(a.get(0, 1), 1.0 / (h * h) - 10.0 * x * y / (2.0 * h)));
        assert!(close(a.get(0, n0), 1.0 / (h * h) + (x * x * y).exp() / (2.0 * h)));
    }

    #[test]
    fn heat_matrices_match_displayed_form() {
        let alpha = 0.05;
        let heat = gen_heat_fem(2, 0.01, alpha).unwrap();
        let m = heat.mass().to_dense();
        let k = heat.stiffness().to_dense();
        let m_expected = DenseMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 4.0]) / 12.0;
        let k_expected = DenseMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]) * (-2.0 * alpha);
        assert!((m - m_expected).amax() < 1e-16);
        assert!((k - k_expected).amax() < 1e-16);
    }

    #[test]
    fn heat_without_diffusion_is_identity() {
        let heat = gen_heat_fem(20, 0.01, 0.0).unwrap();
        use crate::operator::LinearOperator;
        let a = heat.operator().to_dense().unwrap();
        assert!((a - DenseMatrix::identity(20, 20)).amax() < 1e-13);
    }

    #[test]
    fn heat_operator_spectrum_is_real_positive() {
        use crate::operator::LinearOperator;
        let heat = gen_heat_fem(60, 0.01, 0.05).unwrap();
        let a = heat.operator().to_dense().unwrap();
        // A = S^{-1} M is similar to M^{1/2} S^{-1} M^{1/2}, which is SPD.
        let m = heat.mass().to_dense();
        let em = sym_eig(&m).unwrap();
        let mut sqrt_m = em.vectors.clone();
        for (j, &l) in em.values.iter().enumerate() {
            sqrt_m.column_mut(j).scale_mut(l.sqrt());
        }
        let sqrt_m = sqrt_m * em.vectors.transpose();
        let s_inv = heat.shifted().to_dense().try_inverse().unwrap();
        let sym = &sqrt_m * s_inv * &sqrt_m;
        assert!((&sym - sym.transpose()).amax() < 1e-12);
        let values = sym_eig(&sym).unwrap().values;
        assert!(values.iter().all(|&v| v > 0.0));
        let complex = a.complex_eigenvalues();
        assert!(complex.iter().all(|z| z.im.abs() < 1e-8 && z.re > 0.0));
    }

    #[test]
    fn problem_spec_round_trips_through_toml() {
        let spec = ProblemSpec::HeatFem {
            n: 100,
            s: 2,
            seed: 3,
            dt: 0.01,
            alpha: 0.05,
            rhs: RhsKind::Random,
        };
        let text = toml::to_string(&spec).unwrap();
        let back: ProblemSpec = toml::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
