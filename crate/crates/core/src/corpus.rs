//! Reference lattices: the two explicit families and the oracle corpus.

use crate::error::Result;
use crate::lattice::{build_lattice, BlockSpec, QuadraticLattice};
use crate::ring::{make_ring, make_ring_int, zp, Ring, RingElem};

/// `Z_2[x]/(x^e - 2)`.
pub fn dyadic_ring(e: usize) -> Result<Ring> {
    let mut eis = vec![0i64; e + 1];
    eis[0] = -2;
    eis[e] = 1;
    make_ring_int(2, e, &eis)
}

/// `m A(0,0) ⊕ A(pi^s, pi^{2e-s}) ⊕ (1)` over `Z_2[x]/(x^e - 2)`.
pub fn unimodular_odd(e: u32, s: u32, m: u32) -> Result<QuadraticLattice> {
    let r = dyadic_ring(e as usize)?;
    let pi = RingElem::pi(&r);
    let zero = RingElem::zero(&r);
    let mut blocks: Vec<BlockSpec> = (0..m)
        .map(|_| BlockSpec::plane(0, zero.clone(), zero.clone()))
        .collect();
    blocks.push(BlockSpec::plane(
        0,
        pi.pow(s as u64),
        pi.pow((2 * e - s) as u64),
    ));
    blocks.push(BlockSpec::line(0, RingElem::one(&r)));
    build_lattice(&r, &blocks)
}

/// `m A(0,0) ⊕ (1) ⊕ m' pi A(0,0)` over `Z_2[sqrt 2]`.
pub fn example_512(m: u32, m_prime: u32) -> Result<QuadraticLattice> {
    let r = dyadic_ring(2)?;
    let zero = RingElem::zero(&r);
    let mut blocks: Vec<BlockSpec> = (0..m)
        .map(|_| BlockSpec::plane(0, zero.clone(), zero.clone()))
        .collect();
    blocks.push(BlockSpec::line(0, RingElem::one(&r)));
    blocks.extend((0..m_prime).map(|_| BlockSpec::plane(1, zero.clone(), zero.clone())));
    build_lattice(&r, &blocks)
}

/// Rank one lattice `(1)` over `Z_2`.
pub fn rank_one_anchor() -> Result<QuadraticLattice> {
    let r = zp(2)?;
    build_lattice(&r, &[BlockSpec::line(0, RingElem::one(&r))])
}

fn line(r: &Ring, scale: u32, t: i64) -> BlockSpec {
    BlockSpec::line(scale, RingElem::from_int(r, t))
}

fn plane(r: &Ring, scale: u32, a: i64, b: i64) -> BlockSpec {
    BlockSpec::plane(scale, RingElem::from_int(r, a), RingElem::from_int(r, b))
}

/// Twelve lattices of rank at most 3 over rings with `e f <= 2`, `p in {2, 3}`,
/// all with scales at most 1.
pub fn oracle_corpus() -> Result<Vec<(String, QuadraticLattice)>> {
    let z2 = zp(2)?;
    let z3 = zp(3)?;
    let r2 = dyadic_ring(2)?;
    let r3 = make_ring_int(3, 2, &[-3, 0, 1])?;
    let z4 = make_ring(2, 2, 1, &[vec![-2], vec![1]])?;
    let pi2 = RingElem::pi(&r2);
    let items: Vec<(&str, Ring, Vec<BlockSpec>)> = vec![
        ("Z2 (1)", z2.clone(), vec![line(&z2, 0, 1)]),
        ("Z2 A(0,0)", z2.clone(), vec![plane(&z2, 0, 0, 0)]),
        ("Z2 A(2,2)", z2.clone(), vec![plane(&z2, 0, 2, 2)]),
        ("Z2 (1)+2(1)", z2.clone(), vec![line(&z2, 0, 1), line(&z2, 1, 1)]),
        (
            "Z2 (3)+(3)+(3)",
            z2.clone(),
            vec![line(&z2, 0, 3), line(&z2, 0, 3), line(&z2, 0, 3)],
        ),
        (
            "Z2 A(0,0)+2(1)",
            z2.clone(),
            vec![plane(&z2, 0, 0, 0), line(&z2, 1, 1)],
        ),
        (
            "Z3 (1)+(1)+(1)",
            z3.clone(),
            vec![line(&z3, 0, 1), line(&z3, 0, 1), line(&z3, 0, 1)],
        ),
        ("Z3 (1)+3(2)", z3.clone(), vec![line(&z3, 0, 1), line(&z3, 1, 2)]),
        ("Z3[pi] (1)+pi(1)", r3.clone(), vec![line(&r3, 0, 1), line(&r3, 1, 1)]),
        (
            "Z2[pi] (1)+(pi)",
            r2.clone(),
            vec![line(&r2, 0, 1), BlockSpec::line(0, pi2.clone())],
        ),
        (
            "Z2[pi] A(pi^2,pi^2)+(1)",
            r2.clone(),
            vec![
                BlockSpec::plane(0, pi2.pow(2), pi2.pow(2)),
                line(&r2, 0, 1),
            ],
        ),
        ("Z4 (1)+(1)", z4.clone(), vec![line(&z4, 0, 1), line(&z4, 0, 1)]),
    ];
    items
        .into_iter()
        .map(|(name, r, blocks)| Ok((name.to_string(), build_lattice(&r, &blocks)?)))
        .collect()
}
