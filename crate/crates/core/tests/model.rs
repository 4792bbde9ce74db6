mod common;

use common::families::*;
use densimodel::corpus::{example_512, rank_one_anchor, unimodular_odd};
use densimodel::lattice::{build_lattice, BlockSpec, QuadraticLattice};
use densimodel::linalg::{ALattice, MatrixA};
use densimodel::model::*;
use densimodel::ring::{zp, RingElem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rank_one_anchor_chain() {
    let l = rank_one_anchor().unwrap();
    let m = stabilize(&l, ModelOptions::default()).unwrap();
    assert_eq!(m.alpha, 1);
    assert_eq!(m.chain.len(), 2);
    assert_eq!(valuation_pattern_endo(&m.chain[0]), vec![vec![0]]);
    assert_eq!(m.t_pattern, vec![vec![1]]);
    assert_eq!(m.h_pattern, vec![vec![2]]);
    assert_eq!((m.n1, m.n2, m.n), (1, 2, 1));
    assert_eq!(m.dim_g, 0);
    assert!(m.warnings.is_empty());
}

#[test]
fn t0_of_mixed_scale_lattice_over_z3() {
    let r = zp(3).unwrap();
    let one = RingElem::one(&r);
    let l = build_lattice(&r, &[BlockSpec::line(0, one.clone()), BlockSpec::line(1, one)]).unwrap();
    let ctx = ModelContext::new(&l, 40).unwrap();
    let t0 = ctx.compute_t0().unwrap();
    assert_eq!(valuation_pattern_endo(&t0), vec![vec![0, 1], vec![0, 0]]);
    assert_eq!(t0.lattice, box_lattice(&r, &[0, 1, 0, 0]));
}

#[test]
fn t0_of_unimodular_is_everything() {
    let l = unimodular_odd(2, 1, 0).unwrap();
    let ctx = ModelContext::new(&l, 40).unwrap();
    let t0 = ctx.compute_t0().unwrap();
    assert_eq!(t0.lattice, ALattice::standard(l.ring(), 9));
}

#[test]
fn adjoint_examples() {
    let r = zp(2).unwrap();
    let hyp = QuadraticLattice::from_gram(MatrixA::from_ints(&r, &[vec![0, 1], vec![1, 0]])).unwrap();
    let ctx = ModelContext::new(&hyp, 40).unwrap();
    let x = MatrixA::from_ints(&r, &[vec![0, 1], vec![0, 0]]);
    let ad = ctx.adjoint(&x).unwrap();
    // S^{-1} X^T S by hand
    assert_eq!(ad, MatrixA::from_ints(&r, &[vec![0, 1], vec![0, 0]]));
    let y = MatrixA::from_ints(&r, &[vec![1, 2], vec![3, 5]]);
    assert_eq!(ctx.adjoint(&y).unwrap(), MatrixA::from_ints(&r, &[vec![5, 2], vec![3, 1]]));
    let id = MatrixA::identity(&r, 2);
    assert_eq!(ctx.adjoint(&id).unwrap(), id);

    let diag = QuadraticLattice::from_gram(MatrixA::identity(&r, 2)).unwrap();
    let ctx = ModelContext::new(&diag, 40).unwrap();
    assert_eq!(ctx.adjoint(&y).unwrap(), y.transpose());
}

#[test]
fn phi_psi_examples() {
    let l = rank_one_anchor().unwrap();
    let r = l.ring().clone();
    let ctx = ModelContext::new(&l, 40).unwrap();
    let id = MatrixA::identity(&r, 1);
    assert_eq!(ctx.phi(&id), *l.gram());
    assert_eq!(ctx.psi(&id), l.gram().scale(&RingElem::from_int(&r, 2)));
    for c in [3i64, 5, 6, -7] {
        let x = MatrixA::from_ints(&r, &[vec![c]]);
        assert_eq!(ctx.phi(&x), MatrixA::from_ints(&r, &[vec![c * c]]));
        assert_eq!(ctx.psi(&x), MatrixA::from_ints(&r, &[vec![2 * c]]));
    }
}

#[test]
fn psi_images_of_rank_one_chain() {
    let l = rank_one_anchor().unwrap();
    let ctx = ModelContext::new(&l, 40).unwrap();
    let t0 = ctx.compute_t0().unwrap();
    let h0 = ctx.compute_h0().unwrap();
    assert_eq!(valuation_pattern_form(&h0), vec![vec![0]]);
    let im0 = ctx.psi_image(&t0, FormRole::ImPsi(0)).unwrap();
    assert_eq!(valuation_pattern_form(&im0), vec![vec![1]]);
    let t1 = ctx.next_t(&t0, &im0).unwrap();
    assert_eq!(valuation_pattern_endo(&t1), vec![vec![1]]);
    let im1 = ctx.psi_image(&t1, FormRole::ImPsi(1)).unwrap();
    assert_eq!(valuation_pattern_form(&im1), vec![vec![2]]);
    let t2 = ctx.next_t(&t1, &im1).unwrap();
    assert_eq!(t2.lattice, t1.lattice);
}

#[test]
fn h_lies_in_h0() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let l = random_lattice(&mut rng);
        let ctx = ModelContext::new(&l, 60).unwrap();
        let h0 = ctx.compute_h0().unwrap();
        assert!(h0.contains(l.gram()), "{:?}", l.gram());
    }
}

#[test]
fn odd_residue_characteristic_gives_alpha_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in [3u64, 5] {
        let r = zp(p).unwrap();
        for _ in 0..10 {
            let rank = rng.gen_range(1..=3);
            let blocks: Vec<BlockSpec> = (0..rank)
                .map(|_| {
                    let u = loop {
                        let u = rng.gen_range(1..p as i64 * 3);
                        if u % p as i64 != 0 {
                            break u;
                        }
                    };
                    BlockSpec::line(rng.gen_range(0..3), RingElem::from_int(&r, u))
                })
                .collect();
            let l = build_lattice(&r, &blocks).unwrap();
            let m = stabilize(&l, ModelOptions::default()).unwrap();
            assert_eq!(m.alpha, 0);
        }
    }
}

#[test]
fn family_n_matches_formula() {
    for m in [0u32, 1] {
        for (e, s) in [(2u32, 1u32), (2, 2), (3, 1), (3, 3), (4, 1)] {
            let l = unimodular_odd(e, s, m).unwrap();
            let res = stabilize(&l, ModelOptions::default()).unwrap();
            let expect = family_n(e as i64, s as i64, m as i64);
            assert_eq!((res.n1, res.n2, res.n), expect, "e={e} s={s} m={m}");
            assert!(res.alpha <= l.ring().e_prime() + 1);
        }
    }
}

#[test]
fn family_patterns_match_block_form() {
    for m in [0u32, 1] {
        for (e, s) in [(2u32, 1u32), (2, 2), (3, 1), (3, 3), (4, 1)] {
            let l = unimodular_odd(e, s, m).unwrap();
            let res = stabilize(&l, ModelOptions::default()).unwrap();
            let (tp, hp) = family_patterns(e, s, m as usize);
            assert_eq!(res.t_pattern, tp, "T e={e} s={s} m={m}");
            assert_eq!(res.h_pattern, hp, "H e={e} s={s} m={m}");
            let flat: Vec<u32> = tp.iter().flatten().copied().collect();
            assert_eq!(res.t_tilde.lattice, box_lattice(l.ring(), &flat));
            assert_eq!(res.h_tilde.lattice, box_lattice(l.ring(), &upper(&hp)));
        }
    }
}

#[test]
fn example_512_n() {
    for (m, mp) in [(0u32, 1u32), (1, 1), (0, 2)] {
        let l = example_512(m, mp).unwrap();
        let res = stabilize(&l, ModelOptions::default()).unwrap();
        let (m, mp) = (m as i64, mp as i64);
        assert_eq!(res.n, 2 * mp * mp + 2 * m + 3 * mp + 2);
        assert!(res.alpha <= 2);
    }
}

#[test]
fn unramified_alpha_case_split() {
    let r = zp(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = [false; 3];
    for _ in 0..60 {
        let comps = rng.gen_range(1..=3);
        let mut blocks = Vec::new();
        let mut odd = vec![false; 4];
        for _ in 0..comps {
            let scale = rng.gen_range(0..4u32);
            if rng.gen_bool(0.5) {
                let t = [1i64, 3, 5, 7][rng.gen_range(0..4)];
                blocks.push(BlockSpec::line(scale, RingElem::from_int(&r, t)));
                odd[scale as usize] = true;
            } else {
                let a = [0i64, 2][rng.gen_range(0..2)];
                blocks.push(BlockSpec::plane(
                    scale,
                    RingElem::from_int(&r, a),
                    RingElem::from_int(&r, a),
                ));
            }
        }
        let l = build_lattice(&r, &blocks).unwrap();
        let res = stabilize(&l, ModelOptions::default()).unwrap();
        let want = expected_unramified_alpha(&odd);
        assert_eq!(res.alpha, want, "{blocks:?}");
        seen[want] = true;
    }
    assert!(seen.iter().all(|&b| b));
}

#[test]
fn explicit_precision_and_retry() {
    let l = unimodular_odd(3, 1, 0).unwrap();
    let auto = stabilize(&l, ModelOptions::default()).unwrap();
    // a deliberately small cap is doubled until it suffices
    let small = stabilize(
        &l,
        ModelOptions {
            precision: Some(6),
            ..ModelOptions::default()
        },
    )
    .unwrap();
    assert_eq!(small.t_tilde.lattice, auto.t_tilde.lattice);
    assert!(small.precision > 6);
    let fail = stabilize(
        &l,
        ModelOptions {
            precision: Some(2),
            max_retries: 0,
            ..ModelOptions::default()
        },
    );
    assert!(matches!(fail, Err(densimodel::Error::PrecisionExhausted(_))));
}

pub fn random_lattice(rng: &mut ChaCha8Rng) -> QuadraticLattice {
    let ring = match rng.gen_range(0..3) {
        0 => zp(2).unwrap(),
        1 => zp(3).unwrap(),
        _ => densimodel::corpus::dyadic_ring(2).unwrap(),
    };
    let rank = rng.gen_range(1..=3);
    let mut blocks = Vec::new();
    let mut used = 0;
    while used < rank {
        let scale = rng.gen_range(0..3);
        if rank - used >= 2 && ring.p() == 2 && rng.gen_bool(0.4) {
            let a = RingElem::from_int(&ring, [0, 2][rng.gen_range(0..2)]);
            blocks.push(BlockSpec::plane(scale, a.clone(), a));
            used += 2;
        } else {
            let t = RingElem::from_int(&ring, [1, 5, 7, 11][rng.gen_range(0..4)]);
            blocks.push(BlockSpec::line(scale, t));
            used += 1;
        }
    }
    build_lattice(&ring, &blocks).unwrap()
}
