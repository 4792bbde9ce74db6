//! Brute-force automorphism counts mod pi^k against the smooth-model density.

use densimodel::corpus::oracle_corpus;
use densimodel::fiber::{
    build_kappa_algebra, enumerate_gtilde, local_density, naive_density_oracle,
    rational_to_string, OracleConvention, DEFAULT_BUDGET,
};
use densimodel::model::{stabilize, ModelContext, ModelOptions};

fn main() -> densimodel::Result<()> {
    for (name, l) in oracle_corpus()?.into_iter().take(6) {
        let m = stabilize(&l, ModelOptions::default())?;
        let ctx = ModelContext::new(&l, m.precision)?;
        let alg = build_kappa_algebra(&ctx, &m)?;
        let count = enumerate_gtilde(&alg, DEFAULT_BUDGET, false)?.count;
        let d = local_density(l.ring().q(), m.n, m.dim_g, count);
        let kmax = 2 * l.ring().e() as u32 + 3;
        let o = naive_density_oracle(&l, kmax, 1 << 40, OracleConvention::Gram)?;
        let ratios: Vec<String> = o.ratios.iter().map(|(_, r)| rational_to_string(r)).collect();
        println!(
            "{name}: ratios [{}], stable at {:?}, oracle {} vs model {}",
            ratios.join(", "),
            o.stable_at,
            rational_to_string(&o.beta().unwrap()),
            rational_to_string(&d.value)
        );
    }
    Ok(())
}
