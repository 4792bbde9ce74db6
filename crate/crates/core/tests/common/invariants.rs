//! Structural invariants of the model, each as a check on one lattice.

use densimodel::corpus::dyadic_ring;
use densimodel::fiber::{build_kappa_algebra, enumerate_gtilde, krank, smooth_model_count};
use densimodel::lattice::{build_lattice, dual_of, BlockSpec, QuadraticLattice};
use densimodel::linalg::{scaled_inverse, ALattice, MatrixA};
use densimodel::model::{stabilize, ModelContext, ModelOptions, ModelResult};
use densimodel::ring::{make_ring, make_ring_int, zp, Ring, RingElem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = std::result::Result<(), String>;

#[derive(Debug, Clone)]
pub enum Comp {
    Line(u32, i64),
    Plane(u32, i64, i64),
}

pub type Spec = (usize, Vec<Comp>);

pub const LINE_UNITS: [i64; 4] = [1, 5, 7, 11];
pub const PLANES: [(i64, i64); 4] = [(0, 0), (1, 2), (0, 2), (2, 2)];

pub fn ring_of(idx: usize) -> Ring {
    match idx {
        0 => zp(2).unwrap(),
        1 => zp(3).unwrap(),
        2 => dyadic_ring(2).unwrap(),
        3 => make_ring(2, 2, 1, &[vec![-2], vec![1]]).unwrap(),
        _ => make_ring_int(3, 2, &[-3, 0, 1]).unwrap(),
    }
}

/// Rank at most 3; `A(2,2)` is excluded over odd `p`, where it is not unimodular.
pub fn admissible(spec: &Spec) -> bool {
    let rank: usize = spec
        .1
        .iter()
        .map(|c| match c {
            Comp::Line(..) => 1,
            Comp::Plane(..) => 2,
        })
        .sum();
    let odd_p = spec.0 == 1 || spec.0 == 4;
    let bad = spec.1.iter().any(|c| matches!(c, Comp::Plane(_, 2, 2)) && odd_p);
    rank <= 3 && !bad
}

/// Draws an admissible spec from the same distribution as the proptest strategy.
pub fn random_spec(rng: &mut ChaCha8Rng) -> Spec {
    loop {
        let r = rng.gen_range(0..5);
        let comps = (0..rng.gen_range(1..=2))
            .map(|_| {
                let s = rng.gen_range(0..3);
                if rng.gen_bool(0.5) {
                    Comp::Line(s, LINE_UNITS[rng.gen_range(0..4)])
                } else {
                    let (a, b) = PLANES[rng.gen_range(0..4)];
                    Comp::Plane(s, a, b)
                }
            })
            .collect();
        let spec = (r, comps);
        if admissible(&spec) {
            return spec;
        }
    }
}

pub fn build((r, comps): &Spec) -> QuadraticLattice {
    let ring = ring_of(*r);
    let i = |v: i64| RingElem::from_int(&ring, v);
    let blocks: Vec<BlockSpec> = comps
        .iter()
        .map(|c| match *c {
            Comp::Line(s, t) => BlockSpec::line(s, i(t)),
            Comp::Plane(s, a, b) => BlockSpec::plane(s, i(a), i(b)),
        })
        .collect();
    build_lattice(&ring, &blocks).unwrap()
}

pub fn model(l: &QuadraticLattice) -> (ModelContext, ModelResult) {
    let m = stabilize(l, ModelOptions::default()).unwrap();
    (ModelContext::new(l, m.precision).unwrap(), m)
}

/// Random element of an endomorphism lattice, as a matrix.
pub fn random_member(ring: &Ring, basis: &[MatrixA], rng: &mut ChaCha8Rng) -> MatrixA {
    let n = basis[0].rows();
    let mut x = MatrixA::zeros(ring, n, n);
    for b in basis {
        let c = RingElem::from_int(ring, rng.gen_range(-6..=6));
        x = x.add(&b.scale(&c));
    }
    x
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

pub fn double_dual(spec: &Spec) -> Check {
    let l = build(spec);
    let dd = dual_of(&l, &l.dual().unwrap()).unwrap();
    ensure(dd == ALattice::standard(l.ring(), l.rank()), || format!("{spec:?}"))
}

pub fn chain_rank_and_bound(spec: &Spec) -> Check {
    let l = build(spec);
    let (_, m) = model(&l);
    let n2 = l.rank() * l.rank();
    let t0 = &m.chain[0].lattice;
    for t in &m.chain {
        ensure(t.lattice.dim() == n2, || format!("rank drop {spec:?}"))?;
        ensure(t.lattice.is_sublattice_of(t0), || format!("not in T0 {spec:?}"))?;
    }
    for w in m.chain.windows(2) {
        ensure(w[1].lattice.is_sublattice_of(&w[0].lattice), || {
            format!("not decreasing {spec:?}")
        })?;
    }
    if m.chain.len() > 1 {
        let l1 = ModelContext::torsion_exponent(t0, &m.chain[1].lattice);
        let bound = t0.scaled(2 * l1 as i64);
        for t in &m.chain {
            ensure(bound.is_sublattice_of(&t.lattice), || format!("bound {spec:?}"))?;
        }
    }
    Ok(())
}

pub fn closure_and_adjoint(spec: &Spec, seed: u64) -> Check {
    let l = build(spec);
    let (ctx, m) = model(&l);
    let basis = m.t_tilde.basis_matrices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_member(l.ring(), &basis, &mut rng);
    let y = random_member(l.ring(), &basis, &mut rng);
    ensure(m.t_tilde.contains(&x.mul(&y)), || format!("product {spec:?}"))?;
    let ad = ctx.adjoint(&x).map_err(|e| e.to_string())?;
    ensure(m.t_tilde.contains(&ad), || format!("adjoint {spec:?}"))?;
    ensure(m.t_tilde.contains(&ad.mul(&y)), || format!("adjoint product {spec:?}"))?;
    for b in &basis {
        ensure(m.h_tilde.contains(&ctx.phi(b)), || format!("phi {spec:?}"))?;
    }
    Ok(())
}

pub fn action_in_h_tilde(spec: &Spec, seed: u64) -> Check {
    let l = build(spec);
    let (ctx, m) = model(&l);
    let ring = l.ring().clone();
    let basis = m.t_tilde.basis_matrices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_member(&ring, &basis, &mut rng);
    let y = random_member(&ring, &basis, &mut rng);
    let g = MatrixA::identity(&ring, l.rank()).add(&x);
    let s = l.gram();
    let moved = g.transpose().mul(s).mul(&g).sub(s);
    ensure(m.h_tilde.contains(&moved), || format!("h(gx) - h(x) {spec:?}"))?;
    ensure(moved == ctx.phi(&x).add(&ctx.psi(&x)), || format!("phi + psi {spec:?}"))?;
    let f = ctx.psi(&y);
    ensure(m.h_tilde.contains(&g.transpose().mul(&f).mul(&g).sub(&f)), || {
        format!("action on H~ {spec:?}")
    })
}

/// `Ok(true)` when an invertible sample was found and checked.
pub fn inverse_closure(spec: &Spec, seed: u64) -> std::result::Result<bool, String> {
    let l = build(spec);
    let (_, m) = model(&l);
    let ring = l.ring().clone();
    let basis = m.t_tilde.basis_matrices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = MatrixA::identity(&ring, l.rank());
    let Some(g) = (0..20)
        .map(|_| id.add(&random_member(&ring, &basis, &mut rng)))
        .find(|g| g.det().is_unit())
    else {
        return Ok(false);
    };
    let (inv, d) = scaled_inverse(&g, 40).map_err(|e| e.to_string())?;
    ensure(d == 0, || format!("scaled inverse {spec:?}"))?;
    let inv = inv.map(|x| x.reduce_mod_pi(30));
    ensure(m.t_tilde.contains(&inv.sub(&id)), || format!("inverse {spec:?}"))?;
    Ok(true)
}

pub fn psi_surjective_mod_pi(spec: &Spec) -> Check {
    let l = build(spec);
    let (ctx, m) = model(&l);
    let alg = build_kappa_algebra(&ctx, &m).map_err(|e| e.to_string())?;
    ensure(krank(l.ring().residue_field(), &alg.gamma) == alg.r, || {
        format!("rank of psi mod pi {spec:?}")
    })
}

/// Sign changes on lines and swaps of symmetric planes or equal leading lines
/// are isometries; they must lie in `1 + T~`.
pub fn automorphisms_in_t_tilde(spec: &Spec, seed: u64) -> Check {
    let l = build(spec);
    let (_, m) = model(&l);
    let ring = l.ring().clone();
    let n = l.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let swap = |a: usize, b: usize| {
        let mut sw = MatrixA::identity(&ring, n);
        sw.set(a, a, RingElem::zero(&ring));
        sw.set(b, b, RingElem::zero(&ring));
        sw.set(a, b, RingElem::one(&ring));
        sw.set(b, a, RingElem::one(&ring));
        sw
    };
    let mut g = MatrixA::identity(&ring, n);
    let mut pos = 0;
    for c in &spec.1 {
        match *c {
            Comp::Line(..) => {
                if rng.gen_bool(0.5) {
                    g.set(pos, pos, RingElem::from_int(&ring, -1));
                }
                pos += 1;
            }
            Comp::Plane(_, a, b) => {
                if a == b && rng.gen_bool(0.5) {
                    g = g.mul(&swap(pos, pos + 1));
                }
                pos += 2;
            }
        }
    }
    let s = l.gram();
    if n >= 2
        && s.get(0, 0) == s.get(1, 1)
        && s.get(0, 1).is_zero_repr()
        && (n == 2 || (s.get(0, 2).is_zero_repr() && s.get(1, 2).is_zero_repr()))
    {
        g = g.mul(&swap(0, 1));
    }
    ensure(&g.transpose().mul(s).mul(&g) == s, || format!("not an isometry {spec:?}"))?;
    ensure(
        m.t_tilde.contains(&g.sub(&MatrixA::identity(&ring, n))),
        || format!("automorphism outside T~ {spec:?}"),
    )
}

/// Lattices for the smooth-lifting check.
pub fn lifting_lattices() -> Vec<QuadraticLattice> {
    let z2 = zp(2).unwrap();
    let z3 = zp(3).unwrap();
    let i = |r: &Ring, v: i64| RingElem::from_int(r, v);
    vec![
        build_lattice(&z2, &[BlockSpec::line(0, i(&z2, 1))]).unwrap(),
        build_lattice(&z2, &[BlockSpec::plane(0, i(&z2, 0), i(&z2, 0))]).unwrap(),
        build_lattice(&z3, &[BlockSpec::line(0, i(&z3, 1)), BlockSpec::line(1, i(&z3, 1))])
            .unwrap(),
    ]
}

/// `#G(A/pi^{k+1}) = q^{dim G} #G(A/pi^k)` for `k = 1, 2` and level 1 equal to `#G~(κ)`.
pub fn smooth_lifting_ratio(l: &QuadraticLattice) -> Check {
    let (ctx, m) = model(l);
    let alg = build_kappa_algebra(&ctx, &m).map_err(|e| e.to_string())?;
    let base = enumerate_gtilde(&alg, 1 << 26, false)
        .map_err(|e| e.to_string())?
        .count;
    let qd = l.ring().q().pow(m.dim_g as u32);
    let mut prev = base;
    for k in 1..=3 {
        let c = smooth_model_count(&ctx, &m, &alg, k, 1 << 26).map_err(|e| e.to_string())?;
        let want = if k == 1 { base } else { prev * qd };
        ensure(c == want, || format!("level {k}: {c} != {want}"))?;
        prev = c;
    }
    Ok(())
}
