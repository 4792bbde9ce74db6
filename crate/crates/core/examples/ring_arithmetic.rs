//! Arithmetic in a totally ramified extension of Z_2 and the expression language.

use densimodel::expr::parse_element;
use densimodel::ring::{make_ring_int, RingElem};

fn main() -> densimodel::Result<()> {
    // A = Z_2[pi], pi^2 = 2
    let a = make_ring_int(2, 2, &[-2, 0, 1])?;
    let pi = RingElem::pi(&a);
    println!("q = {}, e = {}, e' = {}, v(2) = {}", a.q(), a.e(), a.e_prime(), a.v2());
    println!("pi^2 = {}", pi.square());

    let u = parse_element(&a, "u1")?;
    let inv = u.inv()?;
    println!("u1 = {u}, u1^-1 = {inv}, product = {}", u.mul(&inv));

    let x = parse_element(&a, "u1*pi^3 - 6")?;
    println!("x = {x}, v(x) = {:?}", x.valuation());
    let (k, unit) = x.split_unit().expect("nonzero");
    println!("x = pi^{k} * ({unit})");
    println!("x mod pi^3 = {}", x.reduce_mod_pi(3));
    Ok(())
}
