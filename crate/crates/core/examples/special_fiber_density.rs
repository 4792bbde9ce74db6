//! Counting points of the special fiber and the resulting local density.

use densimodel::corpus::rank_one_anchor;
use densimodel::fiber::{
    build_kappa_algebra, enumerate_gtilde, local_density, rational_to_string, DEFAULT_BUDGET,
};
use densimodel::model::{stabilize, ModelContext, ModelOptions};

fn main() -> densimodel::Result<()> {
    let l = rank_one_anchor()?;
    let m = stabilize(&l, ModelOptions::default())?;
    let ctx = ModelContext::new(&l, m.precision)?;
    let alg = build_kappa_algebra(&ctx, &m)?;
    let en = enumerate_gtilde(&alg, DEFAULT_BUDGET, true)?;
    println!("#G~(k) = {}, points {:?}", en.count, en.points);
    let d = local_density(l.ring().q(), m.n, m.dim_g, en.count);
    println!(
        "beta_L = {}, Conway-Sloane normalization = {}",
        rational_to_string(&d.value),
        rational_to_string(&d.cs_normalized)
    );
    Ok(())
}
