//! Brute-force orthogonal group orders over small finite fields.

use densimodel::lattice::FormType;
use densimodel::ring::ResidueField;

type ColumnTest<'a> = dyn Fn(&[Vec<u32>], &[u32]) -> bool + 'a;

/// Count `g in GL_d(F_q)` preserving an upper-triangular quadratic form.
pub fn brute_orthogonal(k: &ResidueField, form: &[Vec<u32>]) -> u64 {
    let d = form.len();
    let q = k.q() as usize;
    let eval = |x: &[u32]| -> u32 {
        let mut acc = 0;
        for a in 0..d {
            for b in a..d {
                acc = k.add(acc, k.mul(form[a][b], k.mul(x[a], x[b])));
            }
        }
        acc
    };
    let polar = |x: &[u32], y: &[u32]| -> u32 {
        let s: Vec<u32> = x.iter().zip(y).map(|(a, b)| k.add(*a, *b)).collect();
        k.sub(k.sub(eval(&s), eval(x)), eval(y))
    };
    let vecs: Vec<Vec<u32>> = (0..q.pow(d as u32))
        .map(|mut i| {
            (0..d)
                .map(|_| {
                    let v = (i % q) as u32;
                    i /= q;
                    v
                })
                .collect()
        })
        .collect();
    let basis: Vec<Vec<u32>> = (0..d)
        .map(|i| (0..d).map(|j| u32::from(i == j)).collect())
        .collect();
    fn rec(
        cols: &mut Vec<Vec<u32>>,
        vecs: &[Vec<u32>],
        ok: &ColumnTest,
        done: &dyn Fn(&[Vec<u32>]) -> bool,
        d: usize,
    ) -> u64 {
        if cols.len() == d {
            return u64::from(done(cols));
        }
        let mut n = 0;
        for v in vecs {
            if ok(cols, v) {
                cols.push(v.clone());
                n += rec(cols, vecs, ok, done, d);
                cols.pop();
            }
        }
        n
    }
    let ok = |cols: &[Vec<u32>], v: &[u32]| -> bool {
        let j = cols.len();
        eval(v) == eval(&basis[j])
            && cols
                .iter()
                .enumerate()
                .all(|(i, c)| polar(c, v) == polar(&basis[i], &basis[j]))
    };
    let done = |cols: &[Vec<u32>]| -> bool {
        let m: Vec<Vec<u32>> = (0..d).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
        densimodel::lattice::kdet(k, &m) != 0
    };
    rec(&mut Vec::new(), &vecs, &ok, &done, d)
}

pub fn is_square(k: &ResidueField, a: u32) -> bool {
    (0..k.q()).any(|x| k.mul(x, x) == a)
}

/// Standard forms of each type in dimension `d`.
pub fn standard_forms(k: &ResidueField, d: usize) -> Vec<(FormType, Vec<Vec<u32>>)> {
    let mut out = Vec::new();
    if k.char2() {
        let aniso = (0..k.q())
            .find(|&c| (0..k.q()).all(|t| k.add(k.add(k.mul(t, t), t), c) != 0))
            .unwrap();
        let planes = d / 2;
        for minus in [false, true] {
            if d % 2 == 1 && minus || d < 2 && minus {
                continue;
            }
            let mut f = vec![vec![0u32; d]; d];
            for p in 0..planes {
                f[2 * p][2 * p + 1] = 1;
            }
            if minus {
                f[0][0] = 1;
                f[1][1] = aniso;
            }
            if d % 2 == 1 {
                f[d - 1][d - 1] = 1;
            }
            let ty = match (d % 2, minus) {
                (1, _) => FormType::Odd,
                (_, false) => FormType::EvenPlus,
                _ => FormType::EvenMinus,
            };
            out.push((ty, f));
        }
    } else {
        let nonsq = (1..k.q()).find(|&c| !is_square(k, c)).unwrap();
        for c in [1, nonsq] {
            if d == 0 {
                break;
            }
            let mut f = vec![vec![0u32; d]; d];
            for (i, row) in f.iter_mut().enumerate() {
                row[i] = 1;
            }
            f[d - 1][d - 1] = c;
            let ty = if d % 2 == 1 {
                FormType::Odd
            } else {
                let mut disc = c;
                if (d / 2) % 2 == 1 {
                    disc = k.neg(disc);
                }
                if is_square(k, disc) {
                    FormType::EvenPlus
                } else {
                    FormType::EvenMinus
                }
            };
            out.push((ty, f));
        }
    }
    out
}

/// Compares `orthogonal_group_order` with brute force for `d <= 4`, `q in {2, 3, 4}`,
/// every form type; returns the number of cases compared.
pub fn orders_match_brute_force() -> std::result::Result<usize, String> {
    use densimodel::lattice::orthogonal_group_order;
    use densimodel::ring::default_unram_poly;
    use num_bigint::BigUint;
    let mut cases = 0;
    for (p, f) in [(2u64, 1usize), (3, 1), (2, 2)] {
        let k = ResidueField::new(p, f, &default_unram_poly(p, f));
        for d in 1..=4 {
            let mut seen = Vec::new();
            for (ty, form) in standard_forms(&k, d) {
                let brute = brute_orthogonal(&k, &form);
                let formula = orthogonal_group_order(d, ty, k.q() as u64, k.char2());
                if BigUint::from(brute) != formula {
                    return Err(format!("q={} d={d} {ty:?}: {brute} vs {formula}", k.q()));
                }
                seen.push(ty);
                cases += 1;
            }
            if d % 2 == 0 && !(seen.contains(&FormType::EvenPlus) && seen.contains(&FormType::EvenMinus)) {
                return Err(format!("q={} d={d}: missing a type", k.q()));
            }
        }
    }
    Ok(cases)
}
