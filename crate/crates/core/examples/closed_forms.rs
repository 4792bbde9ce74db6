//! Closed-form densities for the odd-unimodular family, checked against the pipeline.

use densimodel::corpus::unimodular_odd;
use densimodel::fiber::{
    build_kappa_algebra, closed_form_density, enumerate_gtilde, local_density,
    rational_to_string, Family, DEFAULT_BUDGET,
};
use densimodel::lattice::{residue_spaces, FormType};
use densimodel::model::{stabilize, ModelContext, ModelOptions};

fn main() -> densimodel::Result<()> {
    for (e, s) in [(2, 1), (2, 2), (3, 1), (3, 3), (4, 1)] {
        let l = unimodular_odd(e, s, 0)?;
        // the closed form depends on the type of the even residue plane, if any
        let even = residue_spaces(&l)?
            .into_iter()
            .find(|sp| sp.dim > 0 && sp.dim % 2 == 0)
            .map_or(FormType::EvenPlus, |sp| sp.form_type);
        let cf = closed_form_density(Family::UnimodularOdd { e, s, m: 0 }, 2, even)?;
        let m = stabilize(&l, ModelOptions::default())?;
        let ctx = ModelContext::new(&l, m.precision)?;
        let alg = build_kappa_algebra(&ctx, &m)?;
        let count = enumerate_gtilde(&alg, DEFAULT_BUDGET, false)?.count;
        let d = local_density(2, m.n, m.dim_g, count);
        println!(
            "e={e} s={s}: even type {even:?}, closed form N {} density {} | pipeline N {} density {}",
            cf.n_exp,
            rational_to_string(&cf.density),
            m.n,
            rational_to_string(&d.value)
        );
    }
    Ok(())
}
