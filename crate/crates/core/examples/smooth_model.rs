//! The stabilized endomorphism lattice and the exponent N of the smooth model.

use densimodel::corpus::unimodular_odd;
use densimodel::model::{stabilize, ModelOptions};

fn main() -> densimodel::Result<()> {
    // A(pi^s, pi^{2e-s}) + (1) over Z_2[pi], pi^e = 2
    for (e, s) in [(2, 1), (2, 2), (3, 1), (3, 3), (4, 1)] {
        let l = unimodular_odd(e, s, 0)?;
        let m = stabilize(&l, ModelOptions::default())?;
        println!(
            "e={e} s={s}: alpha {} N1 {} N2 {} N {} dim G {}",
            m.alpha, m.n1, m.n2, m.n, m.dim_g
        );
        println!("  T pattern {:?}", m.t_pattern);
        println!("  H pattern {:?}", m.h_pattern);
    }
    Ok(())
}
