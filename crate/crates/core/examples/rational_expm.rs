//! `e^{sT} B` by a type (16,16) rational approximation in partial fractions,
//! compared with scaling and squaring.

use dlyap::dense::{expm, frob_norm};
use dlyap::krylov::{KrylovDecomposition, KrylovVariant};
use dlyap::operator::SparseOperator;
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::quadrature::{expm_action_rational, PartialFractions};
use nalgebra::Complex;

const CF16: [(f64, f64, f64, f64); 8] = [
    (-6.50718887005691045e+01, -2.27021002379863887e+02, 6.42629749843120113e+00, 1.19469992052438001e+00),
    (1.14452295033918986e+02, 1.03220965958943992e+02, 5.95836746213926549e+00, 3.58922709064685419e+00),
    (-6.31692216169376337e+01, -1.14853103451667664e+01, 5.00362313487589994e+00, 5.99995338281915735e+00),
    (1.52530027960520176e+01, -5.75416890445668283e+00, 3.52001706027609096e+00, 8.44074587212505811e+00),
    (-1.50711797796088254e+00, 1.78138528119116435e+00, 1.43115094929211328e+00, 1.09315987019859531e+01),
    (4.27576033425217938e-02, -1.59216348754907033e-01, -1.40061743192847854e+00, 1.35058379454782749e+01),
    (1.73116626015426713e-04, 4.46009680484602770e-03, -5.24899913443212718e+00, 1.62301833801169728e+01),
    (-2.54471168979632438e-07, -2.47082174337635613e-05, -1.08234777730318363e+01, 1.92885030443836527e+01),
];

fn main() -> dlyap::Result<()> {
    let coeffs = PartialFractions {
        a0: -1.1936127688266978e-15,
        terms: CF16
            .iter()
            .map(|&(cr, ci, tr, ti)| (Complex::new(cr, ci), Complex::new(tr, ti)))
            .collect(),
        conjugate_pairs: true,
    };
    let op = SparseOperator::with_inverse(gen_convdiff(10)?)?;
    let b = gen_random_block(100, 2, 42);
    let mut kd = KrylovDecomposition::new(&op, &b, KrylovVariant::Block, 1e-12)?;
    for _ in 1..6 {
        kd.extend(&op)?;
    }
    // The polynomial space keeps T_m moderate; both routes see the same data.
    let t = kd.t_m();
    let bm = kd.start_coeffs();
    for s in [1e-4, 1e-3, 1e-2] {
        let reference = expm(&(&t * s))? * &bm;
        let rational = expm_action_rational(&t, &bm, s, &coeffs)?;
        println!(
            "s = {s:.0e}: ||rational - expm|| / ||B_m|| = {:.3e}",
            frob_norm(&(rational - &reference)) / frob_norm(&bm)
        );
    }
    Ok(())
}
