//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Tolerances are pinned: every numeric comparison is exact (rational or
//! integer equality); the only tolerances are wall-clock limits.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::families::*;
use common::invariants::{self, random_spec};
use common::orthogonal::orders_match_brute_force;
use densimodel::corpus::{example_512, oracle_corpus, rank_one_anchor, unimodular_odd};
use densimodel::fiber::{
    build_kappa_algebra, conjecture_check, enumerate_gtilde, local_density, naive_density_oracle,
    rational_to_string, OracleConvention, DEFAULT_BUDGET,
};
use densimodel::lattice::{build_lattice, residue_spaces, BlockSpec, FormType, QuadraticLattice};
use densimodel::linalg::{lattice_index, ALattice};
use densimodel::model::{stabilize, ModelContext, ModelOptions, ModelResult};
use densimodel::ring::{make_ring_int, zp, RingElem};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ANCHOR_LIMIT: Duration = Duration::from_secs(1);
const EXAMPLE_LIMIT: Duration = Duration::from_secs(300);
const ORACLE_LIMIT: Duration = Duration::from_secs(600);
const SUITE_SIZE: usize = 200;
const FAMILY: [(u32, u32); 5] = [(2, 1), (2, 2), (3, 1), (3, 3), (4, 1)];

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn int(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn pipeline(l: &QuadraticLattice) -> Result<(ModelContext, ModelResult), String> {
    let m = stabilize(l, ModelOptions::default()).map_err(|e| e.to_string())?;
    let ctx = ModelContext::new(l, m.precision).map_err(|e| e.to_string())?;
    Ok((ctx, m))
}

fn even_type(l: &QuadraticLattice) -> FormType {
    residue_spaces(l)
        .unwrap()
        .into_iter()
        .find(|s| s.dim > 0 && s.dim % 2 == 0)
        .map_or(FormType::EvenPlus, |s| s.form_type)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let l = rank_one_anchor().map_err(|e| e.to_string())?;
    let (ctx, m) = pipeline(&l)?;
    let alg = build_kappa_algebra(&ctx, &m).map_err(|e| e.to_string())?;
    let count = enumerate_gtilde(&alg, DEFAULT_BUDGET, false)
        .map_err(|e| e.to_string())?
        .count;
    let d = local_density(2, m.n, m.dim_g, count);
    let elapsed = start.elapsed();
    let std1 = ALattice::standard(l.ring(), 1);
    let t_index = lattice_index(&std1, &m.t_tilde.lattice).map_err(|e| e.to_string())?;
    let h_index = lattice_index(&std1, &m.h_tilde.lattice).map_err(|e| e.to_string())?;
    check(m.alpha == 1, || format!("alpha {}", m.alpha))?;
    check(t_index == 1, || format!("T~ index q^{t_index}"))?;
    check(h_index == 2, || format!("H~ index q^{h_index}"))?;
    check(m.n == 1, || format!("N {}", m.n))?;
    check(count == 2, || format!("#G~ {count}"))?;
    check(d.value == int(2), || format!("beta_L {}", d.value))?;
    check(d.cs_normalized == int(4), || format!("CS {}", d.cs_normalized))?;
    check(elapsed < ANCHOR_LIMIT, || format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "alpha 1, [A:T~] = q, [A:H~] = q^2, N 1, #G~ 2, beta_L 2, CS 4 in {elapsed:.2?}"
    ))
}

fn criterion_2() -> Verdict {
    let mut done = 0;
    for m in [0u32, 1] {
        for (e, s) in FAMILY {
            let l = unimodular_odd(e, s, m).map_err(|e| e.to_string())?;
            let (_, res) = pipeline(&l)?;
            let want = family_n(e as i64, s as i64, m as i64);
            check((res.n1, res.n2, res.n) == want, || {
                format!("e={e} s={s} m={m}: {:?} vs {want:?}", (res.n1, res.n2, res.n))
            })?;
            done += 1;
        }
    }
    Ok(format!("{done} cases, (N1, N2, N) exact"))
}

fn criterion_3() -> Verdict {
    let mut done = 0;
    for m in [0u32, 1] {
        for (e, s) in FAMILY {
            let tag = format!("e={e} s={s} m={m}");
            let l = unimodular_odd(e, s, m).map_err(|e| e.to_string())?;
            let (ctx, res) = pipeline(&l)?;
            let (tp, hp) = family_patterns(e, s, m as usize);
            check(res.t_pattern == tp, || format!("{tag}: T pattern {:?}", res.t_pattern))?;
            check(res.h_pattern == hp, || format!("{tag}: H pattern {:?}", res.h_pattern))?;
            let flat: Vec<u32> = tp.iter().flatten().copied().collect();
            check(res.t_tilde.lattice == box_lattice(l.ring(), &flat), || {
                format!("{tag}: T~ is not the box lattice")
            })?;
            check(res.h_tilde.lattice == box_lattice(l.ring(), &upper(&hp)), || {
                format!("{tag}: H~ is not the box lattice")
            })?;
            let alg = build_kappa_algebra(&ctx, &res).map_err(|e| e.to_string())?;
            let c = conjecture_check(&l, &res, &alg, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
            let (vdim, beta, _) = family_expectation(e as i64, s as i64, m as i64);
            // V_0 carries the orthogonal group; every other residue space is a line
            let shape_ok = c.groups.iter().all(|g| {
                if g.index == 0 {
                    g.dim == vdim
                } else {
                    g.dim <= 1
                }
            });
            check(shape_ok, || format!("{tag}: residue spaces {:?}", c.groups))?;
            check(c.surjective, || format!("{tag}: image {} not all of O(V)", c.image_size))?;
            check(c.beta == Some(beta), || format!("{tag}: beta {:?}", c.beta))?;
            let q_l = 2u64.pow(c.l as u32);
            check(c.gtilde_count == c.image_size * q_l * (1 << beta), || {
                format!("{tag}: #G~ {} vs image {} q^l {q_l} 2^beta", c.gtilde_count, c.image_size)
            })?;
            let d = local_density(2, res.n, res.dim_g, c.gtilde_count);
            let want = family_density(e as i64, s as i64, m as i64, 2, even_type(&l));
            check(d.value == want, || format!("{tag}: beta_L {} vs {want}", d.value))?;
            done += 1;
        }
    }
    Ok(format!("{done} cases: patterns entrywise, #G~ = #O q^l 2^beta, beta_L exact"))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (m, mp) in [(0u32, 1u32), (1, 1)] {
        let tag = format!("(m, m') = ({m}, {mp})");
        let l = example_512(m, mp).map_err(|e| e.to_string())?;
        let (ctx, res) = pipeline(&l)?;
        let alg = build_kappa_algebra(&ctx, &res).map_err(|e| e.to_string())?;
        let c = conjecture_check(&l, &res, &alg, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        let (n, l_exp, want) = example_512_expectation(m as i64, mp as i64);
        let d = local_density(2, res.n, res.dim_g, c.gtilde_count);
        check(res.n == n, || format!("{tag}: N {} vs {n}", res.n))?;
        check(c.l == l_exp, || format!("{tag}: l {} vs {l_exp}", c.l))?;
        check(c.beta == Some(1), || format!("{tag}: beta {:?}", c.beta))?;
        check(d.value == want, || format!("{tag}: beta_L {} vs {want}", d.value))?;
        parts.push(format!("{tag}: N {n}, l {l_exp}, beta_L {}", rational_to_string(&d.value)));
    }
    let elapsed = start.elapsed();
    check(elapsed < EXAMPLE_LIMIT, || format!("runtime {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:.1?}", parts.join("; ")))
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let corpus = oracle_corpus().map_err(|e| e.to_string())?;
    check(corpus.len() == 12, || format!("corpus has {} lattices", corpus.len()))?;
    for (name, l) in &corpus {
        let r = l.ring();
        check(l.rank() <= 3 && r.e() * r.f() <= 2 && [2, 3].contains(&r.p()), || {
            format!("{name} is outside the corpus constraints")
        })?;
        let e = r.e() as u32;
        let (ctx, m) = pipeline(l)?;
        let alg = build_kappa_algebra(&ctx, &m).map_err(|e| e.to_string())?;
        let count = enumerate_gtilde(&alg, DEFAULT_BUDGET, false)
            .map_err(|e| e.to_string())?
            .count;
        let d = local_density(r.q(), m.n, m.dim_g, count);
        let o = naive_density_oracle(l, 2 * e + 3, 1 << 40, OracleConvention::Gram)
            .map_err(|err| format!("{name}: {err}"))?;
        let at = o.stable_at.unwrap();
        check(at <= 2 * e + 2, || format!("{name}: stable only at k = {at}"))?;
        let beta = o.beta().unwrap();
        check(beta == d.value, || format!("{name}: oracle {beta} vs model {}", d.value))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < ORACLE_LIMIT, || format!("runtime {elapsed:?}"))?;
    Ok(format!("12/12 agree, stable by 2e+2, {elapsed:.1?} total"))
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6);
    let z3 = zp(3).unwrap();
    let r3 = make_ring_int(3, 2, &[-3, 0, 1]).unwrap();
    let mut odd = 0;
    for ring in [&z3, &r3] {
        for _ in 0..15 {
            let blocks: Vec<BlockSpec> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let u = [1i64, 2, 4, 5][rng.gen_range(0..4)];
                    BlockSpec::line(rng.gen_range(0..3), RingElem::from_int(ring, u))
                })
                .collect();
            let l = build_lattice(ring, &blocks).unwrap();
            let (_, m) = pipeline(&l)?;
            check(m.alpha == 0, || format!("p = 3: alpha {} for {blocks:?}", m.alpha))?;
            odd += 1;
        }
    }
    let z2 = zp(2).unwrap();
    let i = |v: i64| RingElem::from_int(&z2, v);
    let alpha_of = |blocks: &[BlockSpec]| -> Result<usize, String> {
        let l = build_lattice(&z2, blocks).map_err(|e| e.to_string())?;
        Ok(pipeline(&l)?.1.alpha)
    };
    // type II only
    let a = alpha_of(&[BlockSpec::plane(0, i(0), i(0)), BlockSpec::plane(1, i(2), i(2))])?;
    check(a == 0, || format!("type II: alpha {a}"))?;
    // type I
    let b = alpha_of(&[BlockSpec::line(0, i(1)), BlockSpec::plane(2, i(0), i(0))])?;
    check(b >= 1, || format!("type I: alpha {b}"))?;
    let c = alpha_of(&[BlockSpec::line(0, i(1)), BlockSpec::line(1, i(3))])?;
    check(c >= 1, || format!("type I with odd neighbour: alpha {c}"))?;
    let mut split = 0;
    for _ in 0..40 {
        let mut blocks = Vec::new();
        let mut odd_scale = vec![false; 4];
        for _ in 0..rng.gen_range(1..=3) {
            let s = rng.gen_range(0..4u32);
            if rng.gen_bool(0.5) {
                blocks.push(BlockSpec::line(s, i([1, 3, 5, 7][rng.gen_range(0..4)])));
                odd_scale[s as usize] = true;
            } else {
                let v = [0, 2][rng.gen_range(0..2)];
                blocks.push(BlockSpec::plane(s, i(v), i(v)));
            }
        }
        let a = alpha_of(&blocks)?;
        check(a <= 2, || format!("alpha {a} > 2 for {blocks:?}"))?;
        let want = expected_unramified_alpha(&odd_scale);
        check(a == want, || format!("case split: alpha {a} vs {want} for {blocks:?}"))?;
        split += 1;
    }
    Ok(format!(
        "{odd} p=3 lattices alpha 0; type II alpha {a}, type I alpha {b}/{c}; {split} Z_2 case splits"
    ))
}

fn run_suite(name: &str, seed: u64, f: impl Fn(&invariants::Spec, u64) -> Result<bool, String>) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut tries = 0;
    while checked < SUITE_SIZE {
        tries += 1;
        check(tries <= 10 * SUITE_SIZE, || format!("{name}: too few usable instances"))?;
        let spec = random_spec(&mut rng);
        let s: u64 = rng.gen();
        if f(&spec, s).map_err(|e| format!("{name}: {e}"))? {
            checked += 1;
        }
    }
    Ok(format!("{name} {checked}"))
}

fn criterion_7() -> Verdict {
    let always = |r: Result<(), String>| r.map(|_| true);
    let mut parts = vec![
        run_suite("double-dual", 71, |sp, _| always(invariants::double_dual(sp)))?,
        run_suite("chain", 72, |sp, _| always(invariants::chain_rank_and_bound(sp)))?,
        run_suite("closure", 73, |sp, s| always(invariants::closure_and_adjoint(sp, s)))?,
        run_suite("action", 74, |sp, s| always(invariants::action_in_h_tilde(sp, s)))?,
        run_suite("inverse", 75, invariants::inverse_closure)?,
        run_suite("psi-surjective", 76, |sp, _| always(invariants::psi_surjective_mod_pi(sp)))?,
        run_suite("automorphisms", 77, |sp, s| always(invariants::automorphisms_in_t_tilde(sp, s)))?,
    ];
    let lattices = invariants::lifting_lattices();
    for l in &lattices {
        invariants::smooth_lifting_ratio(l).map_err(|e| format!("lifting: {e}"))?;
    }
    parts.push(format!("lifting {} lattices", lattices.len()));
    let cases = orders_match_brute_force().map_err(|e| format!("orthogonal: {e}"))?;
    parts.push(format!("orthogonal orders {cases}"));
    Ok(parts.join(", "))
}

fn criterion_8() -> Verdict {
    let corpus = oracle_corpus().map_err(|e| e.to_string())?;
    let mut failed = Vec::new();
    for (name, l) in &corpus {
        let (ctx, m) = pipeline(l)?;
        let alg = build_kappa_algebra(&ctx, &m).map_err(|e| e.to_string())?;
        let c = conjecture_check(l, &m, &alg, DEFAULT_BUDGET).map_err(|e| e.to_string())?;
        if !c.holds {
            failed.push(format!(
                "{name} (image {}, kernel {}, l {}, beta {:?})",
                c.image_size, c.kernel_size, c.l, c.beta
            ));
        }
    }
    check(failed.is_empty(), || format!("research finding: {}", failed.join("; ")))?;
    Ok(format!("holds on {}/{} corpus lattices", corpus.len(), corpus.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("rank-1 anchor", criterion_1),
        ("family N", criterion_2),
        ("family patterns and fiber", criterion_3),
        ("mixed-scale example", criterion_4),
        ("oracle equivalence", criterion_5),
        ("alpha regression", criterion_6),
        ("property suites", criterion_7),
        ("conjecture harness", criterion_8),
    ];
    let mut all = true;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panic: {:?}", p.downcast_ref::<String>())));
        let took = start.elapsed();
        match verdict {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{took:.1?}]", i + 1),
            Err(why) => {
                all = false;
                println!("criterion {}: FAIL {name}: {why} [{took:.1?}]", i + 1);
            }
        }
    }
    if !all {
        std::process::exit(1);
    }
}
