//! Smith and Hermite normal forms of matrices over A, and lattice indices.

use densimodel::linalg::{lattice_index, snf, ALattice, MatrixA};
use densimodel::ring::zp;

fn main() -> densimodel::Result<()> {
    let a = zp(3)?;
    let m = MatrixA::from_ints(&a, &[vec![3, 9, 0], vec![1, 6, 27], vec![0, 0, 9]]);
    let s = snf(&m, 20);
    println!("elementary divisor exponents: {:?}", s.diag);

    let lat = ALattice::from_generators(&m, 20)?;
    let full = ALattice::standard(&a, 3);
    println!("HNF exponents {:?}, quotient exponent {}", lat.exps(), lat.exponent());
    println!("[A^3 : L] = 3^{}", lattice_index(&full, &lat)?);
    let sum = lat.sum(&ALattice::scalar(&a, 3, 1));
    let cap = lat.intersection(&ALattice::scalar(&a, 3, 1));
    println!("L + 3A^3 exponents {:?}, L ∩ 3A^3 exponents {:?}", sum.exps(), cap.exps());
    Ok(())
}
