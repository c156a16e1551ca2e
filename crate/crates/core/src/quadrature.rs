//! Quadrature for the projected Gramian
//!
//! ```text
//! G(t) = e^{(t-t0)T} G0 e^{(t-t0)T^T} + ∫_{t0}^{t} e^{(t-τ)T} B B^T e^{(t-τ)T^T} dτ
//! ```
//!
//! and the exponential actions it is built from.
//!
//! The integral over a panel of width `w` is computed with composite
//! Gauss–Legendre rules on sub-panels that shrink geometrically towards the
//! end of the panel where `e^{σT}` varies fastest (`σ = t - τ` small). The
//! node exponentials of one level are the squares of those of the previous
//! level, so a panel costs two Padé evaluations plus matrix products.

use nalgebra::{Complex, DMatrix};

use crate::dense::{expm, one_norm, symmetrize, DenseMatrix};
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "at least one quadrature node");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre recurrence for P_q(x) and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 1 { x } else { p1 };
            let pq_1 = if q == 1 { 1.0 } else { p0 };
            dp = qf * (x * pq - pq_1) / (x * x - 1.0);
            let dx = pq / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        nodes[q - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[q - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Largest `c w` for the innermost sub-panel, where `c` bounds the decay
/// rate of the integrand.
const INNER_RATE: f64 = 0.5;

/// Nodes per geometric level.
const NODES_PER_LEVEL: usize = 24;

/// Layout of the graded rule on `[0, w]`.
#[derive(Debug, Clone)]
pub struct GradedRule {
    /// Width of the innermost interval `[0, w0]`.
    pub w0: f64,
    /// Number of doubling levels `[w0 2^l, w0 2^(l+1)]`.
    pub levels: usize,
    /// Sub-panels per level.
    pub subpanels: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GradedRule {
    /// `rate` bounds `|λ_i + λ_j|` over eigenvalue pairs of `T`.
    pub fn new(width: f64, rate: f64, q: usize) -> Self {
        let levels = if rate * width > INNER_RATE {
            (rate * width / INNER_RATE).log2().ceil() as usize
        } else {
            0
        };
        let subpanels = NODES_PER_LEVEL.div_ceil(q);
        let (nodes, weights) = gauss_legendre(q);
        Self {
            w0: width / 2f64.powi(levels as i32),
            levels,
            subpanels,
            nodes,
            weights,
        }
    }

    /// Node offsets inside `[0, 1]` for one level split into sub-panels,
    /// with their weights (summing to 1).
    fn unit_rule(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.subpanels as f64;
        let mut x = Vec::new();
        let mut w = Vec::new();
        for i in 0..self.subpanels {
            for (y, wy) in self.nodes.iter().zip(&self.weights) {
                x.push((i as f64 + y) / k);
                w.push(wy / k);
            }
        }
        (x, w)
    }

    /// All nodes and weights on `[0, width]`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let (x, w) = self.unit_rule();
        let mut out: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (x * self.w0, w * self.w0)).collect();
        for l in 0..self.levels {
            let a = self.w0 * 2f64.powi(l as i32);
            out.extend(x.iter().zip(&w).map(|(x, w)| (a * (1.0 + x), w * a)));
        }
        out
    }
}

/// Bound on the decay rate of `e^{σT} B B^T e^{σT^T}`.
fn gram_rate(t: &DenseMatrix) -> f64 {
    let inf_norm = one_norm(&t.transpose());
    2.0 * one_norm(t).min(inf_norm).min(t.norm())
}

/// `∫_0^w e^{σT} B B^T e^{σT^T} dσ` with the graded composite rule.
pub fn gram_panel(t: &DenseMatrix, b: &DenseMatrix, width: f64, q: usize) -> Result<DenseMatrix> {
    let d = check_pair(t, b, "gram_panel")?;
    if width == 0.0 || b.ncols() == 0 || d == 0 {
        return Ok(DenseMatrix::zeros(d, d));
    }
    let rule = GradedRule::new(width, gram_rate(t), q);
    let (x, w) = rule.unit_rule();
    let mut acc = DenseMatrix::zeros(d, d);
    let add = |e: &DenseMatrix, weight: f64, acc: &mut DenseMatrix| {
        let z = e * b;
        acc.gemm(weight, &z, &z.transpose(), 1.0);
    };

    // Innermost interval: e^{w0 x T} = e^{w0 i/k T} e^{w0 y T}.
    let k = rule.subpanels;
    let base: Vec<DenseMatrix> = rule
        .nodes
        .iter()
        .map(|y| expm(&(t * (rule.w0 * y / k as f64))))
        .collect::<Result<_>>()?;
    let shift = expm(&(t * (rule.w0 / k as f64)))?;
    let mut offset = DenseMatrix::identity(d, d);
    let mut inner: Vec<DenseMatrix> = Vec::with_capacity(x.len());
    for _ in 0..k {
        for e in &base {
            inner.push(&offset * e);
        }
        offset = &offset * &shift;
    }
    // `offset` is now e^{w0 T}.
    for (e, wx) in inner.iter().zip(&w) {
        add(e, wx * rule.w0, &mut acc);
    }

    // Level l covers [w0 2^l, w0 2^(l+1)] with nodes a (1 + x).
    let mut level: Vec<DenseMatrix> = inner.iter().map(|e| &offset * e).collect();
    for l in 0..rule.levels {
        let a = rule.w0 * 2f64.powi(l as i32);
        for (e, wx) in level.iter().zip(&w) {
            add(e, wx * a, &mut acc);
        }
        if l + 1 < rule.levels {
            for e in level.iter_mut() {
                *e = &*e * &*e;
            }
        }
    }
    Ok(symmetrize(&acc))
}

fn check_pair(t: &DenseMatrix, b: &DenseMatrix, op: &'static str) -> Result<usize> {
    let d = t.nrows();
    if t.ncols() != d {
        return Err(Error::NotSquare {
            op,
            rows: d,
            cols: t.ncols(),
        });
    }
    if b.nrows() != d {
        return Err(Error::Dimension {
            op,
            expected: (d, b.ncols()),
            got: b.shape(),
        });
    }
    Ok(d)
}

/// The affine map `G ↦ P G P^T + W` advancing the Gramian over a time span.
#[derive(Debug, Clone)]
pub struct GramStep {
    pub p: DenseMatrix,
    pub w: DenseMatrix,
}

impl GramStep {
    pub fn identity(d: usize) -> Self {
        Self {
            p: DenseMatrix::identity(d, d),
            w: DenseMatrix::zeros(d, d),
        }
    }

    pub fn apply(&self, g: &DenseMatrix) -> DenseMatrix {
        let mut out = &self.p * g * self.p.transpose();
        out += &self.w;
        symmetrize(&out)
    }

    /// The step that performs `self` first and `then` afterwards.
    pub fn then(&self, then: &GramStep) -> GramStep {
        let p = &then.p * &self.p;
        let w = then.apply(&self.w);
        GramStep { p, w }
    }
}

/// Multiples of one base panel, composed by binary powers.
#[derive(Debug, Clone)]
pub struct GramPropagator {
    powers: Vec<GramStep>,
}

impl GramPropagator {
    pub fn new(t: &DenseMatrix, b: &DenseMatrix, width: f64, q: usize) -> Result<Self> {
        check_pair(t, b, "GramPropagator")?;
        let base = GramStep {
            p: expm(&(t * width))?,
            w: gram_panel(t, b, width, q)?,
        };
        Ok(Self { powers: vec![base] })
    }

    pub fn dim(&self) -> usize {
        self.powers[0].p.nrows()
    }

    /// The step over `k` base panels.
    pub fn steps(&mut self, k: usize) -> GramStep {
        let mut out = GramStep::identity(self.dim());
        let mut bit = 0;
        let mut rest = k;
        while rest > 0 {
            while self.powers.len() <= bit {
                let last = self.powers.last().expect("base present");
                let doubled = last.then(last);
                self.powers.push(doubled);
            }
            if rest & 1 == 1 {
                out = out.then(&self.powers[bit]);
            }
            rest >>= 1;
            bit += 1;
        }
        out
    }
}

/// `G(t) = ∫_{t0}^{t} e^{(t-τ)T} B B^T e^{(t-τ)T^T} dτ` on panels of width
/// at most `h_max` with `q` Gauss–Legendre nodes per sub-panel.
pub fn gram_integral(
    t_m: &DenseMatrix,
    b_m: &DenseMatrix,
    t0: f64,
    t: f64,
    q: usize,
    h_max: f64,
) -> Result<DenseMatrix> {
    let d = check_pair(t_m, b_m, "gram_integral")?;
    if t < t0 {
        return Err(Error::Precondition(format!("gram_integral needs t >= t0, got [{t0}, {t}]")));
    }
    if t == t0 {
        return Ok(DenseMatrix::zeros(d, d));
    }
    if h_max <= 0.0 {
        return Err(Error::Precondition("panel width must be positive".into()));
    }
    let panels = ((t - t0) / h_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut prop = GramPropagator::new(t_m, b_m, (t - t0) / panels as f64, q)?;
    Ok(prop.steps(panels).w)
}

/// `e^{s T} B`.
pub fn expm_action_small(t_m: &DenseMatrix, b_m: &DenseMatrix, s: f64) -> Result<DenseMatrix> {
    check_pair(t_m, b_m, "expm_action_small")?;
    if s < 0.0 {
        return Err(Error::Precondition("expm_action_small needs s >= 0".into()));
    }
    Ok(expm(&(t_m * s))? * b_m)
}

/// Partial-fraction form `r(z) = a0 + Σ a_i / (z - θ_i)` of a rational
/// approximant to `e^z`. With `conjugate_pairs`, each listed term stands for
/// itself and its complex conjugate, so the sum is `2 Re Σ`.
#[derive(Debug, Clone)]
pub struct PartialFractions {
    pub a0: f64,
    /// `(a_i, θ_i)`.
    pub terms: Vec<(Complex<f64>, Complex<f64>)>,
    pub conjugate_pairs: bool,
}

impl PartialFractions {
    pub fn constant(a0: f64) -> Self {
        Self {
            a0,
            terms: Vec::new(),
            conjugate_pairs: false,
        }
    }

    /// Scalar evaluation.
    pub fn eval(&self, z: Complex<f64>) -> Complex<f64> {
        let mut sum = Complex::new(0.0, 0.0);
        for &(a, theta) in &self.terms {
            sum += a / (z - theta);
            if self.conjugate_pairs {
                sum += a.conj() / (z - theta.conj());
            }
        }
        sum + self.a0
    }
}

/// `a0 B + Σ a_i (s T - θ_i I)^{-1} B`, real part taken.
pub fn expm_action_rational(
    t_m: &DenseMatrix,
    b_m: &DenseMatrix,
    s: f64,
    coeffs: &PartialFractions,
) -> Result<DenseMatrix> {
    let d = check_pair(t_m, b_m, "expm_action_rational")?;
    let mut out = b_m * coeffs.a0;
    let st: DMatrix<Complex<f64>> = (t_m * s).map(|x| Complex::new(x, 0.0));
    let bc: DMatrix<Complex<f64>> = b_m.map(|x| Complex::new(x, 0.0));
    let scale = st.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    for &(a, theta) in &coeffs.terms {
        let mut shifted = st.clone();
        for i in 0..d {
            shifted[(i, i)] -= theta;
        }
        let lu = shifted.lu();
        let min_pivot = lu
            .u()
            .diagonal()
            .iter()
            .fold(f64::INFINITY, |m, z| m.min(z.norm()));
        if !(min_pivot > 1e-14 * (scale + theta.norm())) {
            return Err(Error::Solvability(format!(
                "shift θ = {theta} makes s T - θ I singular"
            )));
        }
        let x = lu
            .solve(&bc)
            .ok_or_else(|| Error::Solvability(format!("shift θ = {theta} is singular")))?;
        let factor = if coeffs.conjugate_pairs { 2.0 } else { 1.0 };
        out += (x * a).map(|z| factor * z.re);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::sym_eig;
    use crate::problems::gen_random_block;

    fn random_stable(d: usize, seed: u64) -> DenseMatrix {
        gen_random_block(d, d, seed).map(|x| x - 0.5) - DenseMatrix::identity(d, d) * 2.0
    }

    /// Type (16,16) near-best rational approximation to e^z on (-∞, 0]
    /// in conjugate-pair form, sup error about 7e-14.
    fn exp16() -> PartialFractions {
        let raw: [(f64, f64, f64, f64); 8] = [
            (-6.50718887005691045e+01, -2.27021002379863887e+02, 6.42629749843120113e+00, 1.19469992052438001e+00),
            (1.14452295033918986e+02, 1.03220965958943992e+02, 5.95836746213926549e+00, 3.58922709064685419e+00),
            (-6.31692216169376337e+01, -1.14853103451667664e+01, 5.00362313487589994e+00, 5.99995338281915735e+00),
            (1.52530027960520176e+01, -5.75416890445668283e+00, 3.52001706027609096e+00, 8.44074587212505811e+00),
            (-1.50711797796088254e+00, 1.78138528119116435e+00, 1.43115094929211328e+00, 1.09315987019859531e+01),
            (4.27576033425217938e-02, -1.59216348754907033e-01, -1.40061743192847854e+00, 1.35058379454782749e+01),
            (1.73116626015426713e-04, 4.46009680484602770e-03, -5.24899913443212718e+00, 1.62301833801169728e+01),
            (-2.54471168979632438e-07, -2.47082174337635613e-05, -1.08234777730318363e+01, 1.92885030443836527e+01),
        ];
        PartialFractions {
            a0: -1.1936127688266978e-15,
            terms: raw
                .iter()
                .map(|&(cr, ci, tr, ti)| (Complex::new(cr, ci), Complex::new(tr, ti)))
                .collect(),
            conjugate_pairs: true,
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for q in 1..=12 {
            let (x, w) = gauss_legendre(q);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..2 * q {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-14, "q={q} deg={deg}");
            }
        }
    }

    #[test]
    fn graded_rule_covers_the_panel() {
        let rule = GradedRule::new(1e-3, 1e5, 4);
        assert!(rule.levels > 0);
        let pts = rule.points();
        let total: f64 = pts.iter().map(|p| p.1).sum();
        assert!((total - 1e-3).abs() < 1e-17);
        assert!(pts.iter().all(|&(x, _)| x > 0.0 && x < 1e-3));
        // Scalar stiff integrand ∫_0^h e^{-cσ} dσ.
        for c in [1.0, 1e2, 1e4, 1e5] {
            let approx: f64 = pts.iter().map(|&(x, w)| w * (-c * x).exp()).sum();
            let exact = -(-c * 1e-3f64).exp_m1() / c;
            assert!((approx - exact).abs() <= 1e-13 * 1e-3, "c={c}");
        }
    }

    #[test]
    fn zero_generator_gives_linear_growth() {
        let t = DenseMatrix::zeros(3, 3);
        let b = gen_random_block(3, 2, 1);
        let g = gram_integral(&t, &b, 0.5, 2.0, 4, 0.1).unwrap();
        let expected = &b * b.transpose() * 1.5;
        assert!((g - &expected).norm() <= 1e-14 * expected.norm());
    }

    #[test]
    fn scalar_closed_form() {
        let t = DenseMatrix::from_element(1, 1, -1.0);
        let b = DenseMatrix::from_element(1, 1, 1.0);
        let g = gram_integral(&t, &b, 0.0, 1.0, 4, 1e-2).unwrap();
        let exact = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((g[(0, 0)] - exact).abs() < 1e-14 * exact);
    }

    #[test]
    fn order_doubling_is_self_consistent() {
        let t = random_stable(6, 4);
        let b = gen_random_block(6, 2, 5);
        let g4 = gram_integral(&t, &b, 0.0, 1.0, 4, 0.05).unwrap();
        let g8 = gram_integral(&t, &b, 0.0, 1.0, 8, 0.05).unwrap();
        assert!((&g4 - &g8).norm() <= 1e-12 * g8.norm().max(1.0));
        // Dense Lyapunov oracle: T G + G T^T = e^{T} B B^T e^{T^T} - B B^T.
        let e = expm(&t).unwrap();
        let rhs = &e * &b * b.transpose() * e.transpose() - &b * b.transpose();
        let lhs = &t * &g4 + &g4 * t.transpose();
        assert!((lhs - &rhs).norm() <= 1e-12 * rhs.norm());
        assert!(sym_eig(&g4).unwrap().values.iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn stiff_generator_matches_closed_form() {
        // Eigenvalues from -1 to -1e5 with a panel of 1e-3.
        let d = 8;
        let q = crate::dense::qr_thin(&gen_random_block(d, d, 6), 1e-14).q;
        let lam: Vec<f64> = (0..d).map(|i| -(10f64).powf(i as f64 * 5.0 / 7.0)).collect();
        let t = &q * DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam.clone())) * q.transpose();
        let b = gen_random_block(d, 2, 7);
        let h = 1e-3;
        let w = gram_panel(&t, &b, h, 4).unwrap();
        let bt = q.transpose() * &b;
        let c = &bt * bt.transpose();
        let inner = DenseMatrix::from_fn(d, d, |i, j| {
            let s = lam[i] + lam[j];
            c[(i, j)] * (s * h).exp_m1() / s
        });
        let exact = &q * inner * q.transpose();
        let rel = (&w - &exact).norm() / exact.norm();
        assert!(rel <= 1e-12, "{rel}");
    }

    #[test]
    fn propagation_matches_single_long_panel_sum() {
        let t = random_stable(5, 8);
        let b = gen_random_block(5, 1, 9);
        let mut prop = GramPropagator::new(&t, &b, 0.01, 4).unwrap();
        let direct = prop.steps(37);
        let mut stepwise = GramStep::identity(5);
        for _ in 0..37 {
            stepwise = stepwise.then(&prop.steps(1));
        }
        assert!((&direct.w - &stepwise.w).norm() <= 1e-13 * direct.w.norm());
        assert!((&direct.p - expm(&(&t * 0.37)).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn rejects_reversed_interval() {
        let t = DenseMatrix::zeros(2, 2);
        let b = DenseMatrix::zeros(2, 1);
        assert!(gram_integral(&t, &b, 1.0, 0.0, 4, 0.1).is_err());
    }

    #[test]
    fn expm_action_small_cases() {
        let t = random_stable(4, 10);
        let b = gen_random_block(4, 2, 11);
        assert_eq!(expm_action_small(&t, &b, 0.0).unwrap(), b);
        let diag = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, 0.5]));
        let b = gen_random_block(3, 2, 12);
        let e = expm_action_small(&diag, &b, 0.7).unwrap();
        for i in 0..3 {
            let f = (0.7 * diag[(i, i)]).exp();
            for j in 0..2 {
                assert!((e[(i, j)] - f * b[(i, j)]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn rational_constant_and_single_pole() {
        let t = random_stable(3, 13);
        let b = gen_random_block(3, 1, 14);
        assert_eq!(expm_action_rational(&t, &b, 0.3, &PartialFractions::constant(1.0)).unwrap(), b);

        // r(z) = 1 / (1 - z) written as -1 / (z - 1).
        let r = PartialFractions {
            a0: 0.0,
            terms: vec![(Complex::new(-1.0, 0.0), Complex::new(1.0, 0.0))],
            conjugate_pairs: false,
        };
        let t1 = DenseMatrix::from_element(1, 1, -2.0);
        let b1 = DenseMatrix::from_element(1, 1, 3.0);
        let y = expm_action_rational(&t1, &b1, 0.5, &r).unwrap();
        assert!((y[(0, 0)] - 3.0 / (1.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rational_singular_shift_is_reported() {
        let t = DenseMatrix::from_element(1, 1, 2.0);
        let b = DenseMatrix::from_element(1, 1, 1.0);
        let r = PartialFractions {
            a0: 0.0,
            terms: vec![(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0))],
            conjugate_pairs: false,
        };
        assert!(matches!(
            expm_action_rational(&t, &b, 0.5, &r),
            Err(Error::Solvability(_))
        ));
    }

    #[test]
    fn chebyshev_16_matches_expm_on_symmetric_stable() {
        let coeffs = exp16();
        for x in [0.0, -0.5, -3.0, -20.0, -300.0] {
            let z = coeffs.eval(Complex::new(x, 0.0));
            assert!((z.re - f64::exp(x)).abs() < 1e-13, "x={x}");
        }
        let z = gen_random_block(10, 10, 15).map(|x| x - 0.5);
        let t = -(&z * z.transpose()) * 4.0 - DenseMatrix::identity(10, 10) * 0.1;
        let b = gen_random_block(10, 2, 16);
        for s in [0.1, 1.0, 5.0] {
            let r = expm_action_rational(&t, &b, s, &coeffs).unwrap();
            let e = expm_action_small(&t, &b, s).unwrap();
            assert!((r - e).norm() <= 1e-10 * b.norm(), "s={s}");
        }
    }
}
