//! Block and extended block Arnoldi on Example 1: orthonormality, the
//! Arnoldi relation and the size of the coupling block.

use dlyap::dense::{frob_norm, spec_norm_2};
use dlyap::krylov::{KrylovDecomposition, KrylovVariant};
use dlyap::operator::SparseOperator;
use dlyap::problems::{gen_convdiff, gen_random_block};
use dlyap::DenseMatrix;

fn main() -> dlyap::Result<()> {
    let a = gen_convdiff(12)?;
    let ad = a.to_dense();
    let op = SparseOperator::with_inverse(a)?;
    let b = gen_random_block(144, 2, 42);
    for variant in [KrylovVariant::Block, KrylovVariant::Extended] {
        println!("{variant:?}");
        let mut kd = KrylovDecomposition::new(&op, &b, variant, 1e-12)?;
        for _ in 0..6 {
            let v = kd.basis_extended();
            let d = v.ncols();
            let orth = frob_norm(&(v.transpose() * &v - DenseMatrix::identity(d, d)));
            let rel = frob_norm(&(&ad * kd.basis() - &v * kd.t_bar())) / spec_norm_2(&ad);
            println!(
                "  m = {} dim = {:>3}: orthogonality {orth:.1e}, Arnoldi relation {rel:.1e}, ||T_(m+1,m)|| = {:.3e}",
                kd.m(),
                kd.dim(),
                spec_norm_2(&kd.t_coupling())
            );
            kd.extend(&op)?;
        }
    }
    Ok(())
}
