//! Independent transcriptions of the explicit family formulas.

use densimodel::lattice::{orthogonal_group_dim, orthogonal_group_order, FormType};
use densimodel::linalg::{ALattice, MatrixA};
use densimodel::ring::{Ring, RingElem};
use num_bigint::BigInt;
use num_rational::BigRational;

pub fn ceil_half(x: i64) -> i64 {
    x.div_euclid(2) + x.rem_euclid(2)
}

/// Independent transcription of the `(N1, N2, N)` formulas for the family.
pub fn family_n(e: i64, s: i64, m: i64) -> (i64, i64, i64) {
    let ep = ceil_half(e);
    if s == e {
        let n1 = 2 * (2 * m + 2) * ep + e;
        let n2 = (2 * m + 2) * (e + ep) + 2 * e;
        (n1, n2, (2 * m + 2) * (e - ep) + e)
    } else {
        let c = ceil_half(e - s);
        let d = ceil_half(2 * e - s + 1);
        let n1 = 2 * (2 * m + 1) * (ep + c) + 2 * d + 2 * e - s;
        let n2 = (2 * m + 1) * (ep + c) + d + (2 * m + 5) * e - s;
        (n1, n2, (2 * m + 1) * (e - ep - c) - d + 2 * e)
    }
}

/// Block patterns of `T~` and `H~` for the family, expanded entrywise.
pub fn family_patterns(e: u32, s: u32, m: usize) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let n = 2 * m + 3;
    let ep = e.div_ceil(2);
    // block of each coordinate: 0 = hyperbolic part, 1 = e1, 2 = e2, 3 = t
    let block = |i: usize| -> usize {
        if i < 2 * m {
            0
        } else {
            i - 2 * m + 1
        }
    };
    let mut t = vec![vec![0u32; n]; n];
    let mut h = vec![vec![0u32; n]; n];
    if s == e {
        for i in 0..n {
            for j in 0..n {
                let (bi, bj) = (block(i) == 3, block(j) == 3);
                t[i][j] = match (bi, bj) {
                    (false, false) => 0,
                    (true, true) => e,
                    _ => ep,
                };
                h[i][j] = match (bi, bj) {
                    (false, false) => {
                        if i == j {
                            e
                        } else {
                            0
                        }
                    }
                    (true, true) => 2 * e,
                    _ => ep,
                };
            }
        }
    } else {
        let c = (e - s).div_ceil(2);
        let d = (2 * e - s + 1).div_ceil(2);
        let tb = [
            [0, 0, c, ep],
            [c, c, e - s, d],
            [0, 0, c, ep],
            [ep, ep, d, e],
        ];
        let hb = [
            [e, 0, c, ep],
            [0, e, c, ep],
            [c, c, 2 * e - s, d],
            [ep, ep, d, 2 * e],
        ];
        for i in 0..n {
            for j in 0..n {
                t[i][j] = tb[block(i)][block(j)];
                h[i][j] = hb[block(i)][block(j)];
                if block(i) == 0 && block(j) == 0 && i != j {
                    h[i][j] = 0;
                }
            }
        }
    }
    (t, h)
}

/// Lattice of vectors whose coordinates have valuation at least `pat[k]`.
pub fn box_lattice(ring: &Ring, pat: &[u32]) -> ALattice {
    let d = pat.len();
    let mut g = MatrixA::zeros(ring, d, d);
    for (k, &v) in pat.iter().enumerate() {
        g.set(k, k, RingElem::pi_pow(ring, v));
    }
    let bound = pat.iter().max().copied().unwrap_or(0) + 1;
    ALattice::from_generators(&g, bound).unwrap()
}

pub fn upper(p: &[Vec<u32>]) -> Vec<u32> {
    let n = p.len();
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| p[i][j]).collect()
}

/// Type I / type II rule for unramified `Z_2`: `alpha` is 0 when every Jordan
/// component is even, 2 when an odd component has an odd neighbour, else 1.
pub fn expected_unramified_alpha(odd_scales: &[bool]) -> usize {
    let odd = |i: i64| i >= 0 && (i as usize) < odd_scales.len() && odd_scales[i as usize];
    if !odd_scales.iter().any(|&b| b) {
        return 0;
    }
    let bound = (0..odd_scales.len() as i64).any(|i| odd(i) && (odd(i - 1) || odd(i + 1)));
    if bound {
        2
    } else {
        1
    }
}

fn qpow(q: u64, k: i64) -> BigRational {
    let b = BigInt::from(q).pow(k.unsigned_abs() as u32);
    if k >= 0 {
        BigRational::from_integer(b)
    } else {
        BigRational::new(BigInt::from(1), b)
    }
}

/// Dimension of the single nonzero residue space of `m A(0,0) + A(pi^s, r pi^{2e-s}) + (t)`,
/// the expected kernel exponent `beta`, and `N`.
pub fn family_expectation(e: i64, s: i64, m: i64) -> (usize, u32, i64) {
    let (_, _, n) = family_n(e, s, m);
    if s == e {
        let vdim = if e % 2 == 1 { 2 * m + 2 } else { 2 * m + 3 };
        (vdim as usize, 1, n)
    } else {
        ((2 * m + 1) as usize, 2, n)
    }
}

/// `beta_L = q^{N - dim O(V)} #O(V) 2^{beta - 1}` for the family.
pub fn family_density(e: i64, s: i64, m: i64, q: u64, even: FormType) -> BigRational {
    let (vdim, beta, n) = family_expectation(e, s, m);
    let ty = if vdim % 2 == 1 { FormType::Odd } else { even };
    let order = orthogonal_group_order(vdim, ty, q, true);
    qpow(q, n - orthogonal_group_dim(vdim) as i64)
        * BigRational::from_integer(BigInt::from(order))
        * qpow(2, beta as i64 - 1)
}

/// `(N, l, beta_L)` for `m A(0,0) + (1) + m' pi A(0,0)` at `e = 2`, `q = 2`.
pub fn example_512_expectation(m: i64, mp: i64) -> (i64, i64, BigRational) {
    let n = 2 * mp * mp + 2 * m + 3 * mp + 2;
    let l = 4 * m * mp + 2 * mp;
    let o0 = orthogonal_group_order((2 * m + 1) as usize, FormType::Odd, 2, true);
    let o1 = orthogonal_group_order((2 * mp) as usize, FormType::EvenPlus, 2, true);
    let d = qpow(2, m + 4 * mp + 2 - 2 * m * m)
        * BigRational::from_integer(BigInt::from(o0))
        * BigRational::from_integer(BigInt::from(o1));
    (n, l, d)
}
