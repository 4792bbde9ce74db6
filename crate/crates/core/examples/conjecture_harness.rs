//! Image and kernel of the residue homomorphism on the special fiber.

use densimodel::corpus::example_512;
use densimodel::fiber::{build_kappa_algebra, conjecture_check, DEFAULT_BUDGET};
use densimodel::model::{stabilize, ModelContext, ModelOptions};

fn main() -> densimodel::Result<()> {
    let l = example_512(0, 1)?;
    let m = stabilize(&l, ModelOptions::default())?;
    let ctx = ModelContext::new(&l, m.precision)?;
    let alg = build_kappa_algebra(&ctx, &m)?;
    let r = conjecture_check(&l, &m, &alg, DEFAULT_BUDGET)?;
    println!("N = {}, #G~ = {}", m.n, r.gtilde_count);
    for g in &r.groups {
        println!("  O(V_{}): dim {} {:?}, order {}", g.index, g.dim, g.form_type, g.order);
    }
    println!(
        "image {} kernel {} l {} beta {:?} surjective {} holds {}",
        r.image_size, r.kernel_size, r.l, r.beta, r.surjective, r.holds
    );
    Ok(())
}
