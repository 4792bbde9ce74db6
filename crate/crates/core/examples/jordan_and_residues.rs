//! Quadratic lattices: duals, Jordan splitting, residue spaces and orthogonal group orders.

use densimodel::lattice::{
    build_lattice, jordan_splitting, orthogonal_group_order, residue_spaces, BlockSpec,
};
use densimodel::ring::{zp, RingElem};

fn main() -> densimodel::Result<()> {
    let a = zp(2)?;
    let i = |v| RingElem::from_int(&a, v);
    // A(0,0) + 2(1) + 2(3)
    let l = build_lattice(
        &a,
        &[
            BlockSpec::plane(0, i(0), i(0)),
            BlockSpec::line(1, i(1)),
            BlockSpec::line(1, i(3)),
        ],
    )?;
    println!("rank {}, v(det) = {}", l.rank(), l.det_valuation());
    let dual = l.dual()?;
    println!("dual lattice shift {} exponents {:?}", dual.shift(), dual.exps());

    let js = jordan_splitting(&l);
    println!("Jordan scales {:?}", js.scales());

    for s in residue_spaces(&l)? {
        let order = orthogonal_group_order(s.dim, s.form_type, a.q(), true);
        println!(
            "B_{}/Z_{}: dim {}, type {:?}, #O = {order}",
            s.index, s.index, s.dim, s.form_type
        );
    }
    Ok(())
}
