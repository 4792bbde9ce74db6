//! Special fiber of the smooth model: the residue algebra `T~ ⊗ κ`, point
//! enumeration of `G~(κ)`, the residue homomorphisms to the orthogonal groups
//! of the spaces `B_i / Z_i`, the point-count conjecture harness, the density
//! formula, a brute-force density oracle and the closed-form families.

use std::collections::{HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    kdet, orthogonal_group_dim, orthogonal_group_order, residue_spaces, FormType,
    QuadraticLattice, ResidueQuadSpace,
};
use crate::linalg::MatrixA;
use crate::model::{FormLattice, ModelContext, ModelResult};
use crate::ring::{FqElem, ResidueField, Ring, RingElem};

pub const DEFAULT_BUDGET: u128 = 1 << 26;

/// `T~ ⊗ κ` with the reduced equations of `G~`.
#[derive(Debug, Clone)]
pub struct KappaAlgebra {
    pub ring: Ring,
    pub n: usize,
    /// `κ`-dimension `n^2`.
    pub d: usize,
    /// Number of equations `n(n+1)/2`.
    pub r: usize,
    /// `alpha[k][t]`: coordinate `t` of `phi(X_k)`.
    pub alpha: Vec<Vec<u32>>,
    /// `beta[k][l][t]` for `k < l`: coordinate `t` of `X_k^T S X_l + X_l^T S X_k`.
    pub beta: Vec<Vec<Vec<u32>>>,
    /// `gamma[k][t]`: coordinate `t` of `psi(X_k)`.
    pub gamma: Vec<Vec<u32>>,
    /// `structure[a][b][k]`: `X_a X_b = sum_k c X_k`.
    pub structure: Vec<Vec<Vec<u32>>>,
    /// `adjoint[k][j]`: `X_k^ad = sum_j c X_j`.
    pub adjoint: Vec<Vec<u32>>,
    pub t_basis: Vec<MatrixA>,
}

fn reduce_coords(c: &[RingElem]) -> Vec<u32> {
    c.iter().map(|x| x.residue().0).collect()
}

fn form_coords(h: &FormLattice, f: &MatrixA, what: &str) -> Result<Vec<u32>> {
    h.coordinates(f)
        .map(|c| reduce_coords(&c))
        .ok_or_else(|| Error::ClosureViolation(format!("{what} escapes H~")))
}

/// Reduce the defining data of the model modulo `pi`.
pub fn build_kappa_algebra(ctx: &ModelContext, model: &ModelResult) -> Result<KappaAlgebra> {
    let ring = ctx.ring().clone();
    let n = ctx.n();
    let t = &model.t_tilde;
    let h = &model.h_tilde;
    let basis = t.basis_matrices();
    let d = basis.len();
    let r = n * (n + 1) / 2;
    let s = ctx.s();
    let sx: Vec<MatrixA> = basis.iter().map(|x| s.mul(x)).collect();
    let mut alpha = Vec::with_capacity(d);
    let mut gamma = Vec::with_capacity(d);
    for (k, x) in basis.iter().enumerate() {
        alpha.push(form_coords(h, &x.transpose().mul(&sx[k]), "phi(X)")?);
        gamma.push(form_coords(h, &ctx.psi(x), "psi(X)")?);
    }
    let mut beta = vec![vec![vec![0u32; r]; d]; d];
    for k in 0..d {
        for l in k + 1..d {
            let c = basis[k].transpose().mul(&sx[l]);
            let f = c.add(&c.transpose());
            beta[k][l] = form_coords(h, &f, "polar cross term")?;
        }
    }
    let mut structure = vec![vec![vec![0u32; d]; d]; d];
    for a in 0..d {
        for b in 0..d {
            let p = basis[a].mul(&basis[b]);
            let c = t
                .coordinates(&p)
                .ok_or_else(|| Error::ClosureViolation("product escapes T~".into()))?;
            structure[a][b] = reduce_coords(&c);
        }
    }
    let mut adjoint = Vec::with_capacity(d);
    for x in &basis {
        let ad = ctx.adjoint(x)?;
        let c = t
            .coordinates(&ad)
            .ok_or_else(|| Error::ClosureViolation("adjoint escapes T~".into()))?;
        adjoint.push(reduce_coords(&c));
    }
    Ok(KappaAlgebra {
        ring,
        n,
        d,
        r,
        alpha,
        beta,
        gamma,
        structure,
        adjoint,
        t_basis: basis,
    })
}

impl KappaAlgebra {
    pub fn field(&self) -> &ResidueField {
        self.ring.residue_field()
    }

    /// Values of the `r` equations at `x`.
    pub fn equations(&self, x: &[u32]) -> Vec<u32> {
        let k = self.field();
        let mut out = vec![0u32; self.r];
        for a in 0..self.d {
            if x[a] == 0 {
                continue;
            }
            let xa2 = k.mul(x[a], x[a]);
            for t in 0..self.r {
                let v = k.add(k.mul(self.alpha[a][t], xa2), k.mul(self.gamma[a][t], x[a]));
                out[t] = k.add(out[t], v);
            }
            for b in a + 1..self.d {
                if x[b] == 0 {
                    continue;
                }
                let xab = k.mul(x[a], x[b]);
                for t in 0..self.r {
                    if self.beta[a][b][t] != 0 {
                        out[t] = k.add(out[t], k.mul(self.beta[a][b][t], xab));
                    }
                }
            }
        }
        out
    }

    /// Matrix of left multiplication by `x` on `T~ ⊗ κ`: column `b` is `x X_b`.
    pub fn left_mult(&self, x: &[u32]) -> Vec<Vec<u32>> {
        let k = self.field();
        let mut m = vec![vec![0u32; self.d]; self.d];
        for a in 0..self.d {
            if x[a] == 0 {
                continue;
            }
            for b in 0..self.d {
                for (kk, &c) in self.structure[a][b].iter().enumerate() {
                    if c != 0 {
                        m[kk][b] = k.add(m[kk][b], k.mul(x[a], c));
                    }
                }
            }
        }
        m
    }

    /// Is `1 + x` a unit of the unital hull?
    pub fn is_invertible(&self, x: &[u32]) -> bool {
        let mut m = self.left_mult(x);
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = self.field().add(row[i], 1);
        }
        kdet(self.field(), &m) != 0
    }

    /// Monoid law `(1 + x)(1 + y) = 1 + (x + y + xy)`.
    pub fn compose(&self, x: &[u32], y: &[u32]) -> Vec<u32> {
        let k = self.field();
        let lx = self.left_mult(x);
        (0..self.d)
            .map(|i| {
                let mut v = k.add(x[i], y[i]);
                for b in 0..self.d {
                    if y[b] != 0 {
                        v = k.add(v, k.mul(lx[i][b], y[b]));
                    }
                }
                v
            })
            .collect()
    }

    pub fn is_point(&self, x: &[u32]) -> bool {
        self.equations(x).iter().all(|&v| v == 0) && self.is_invertible(x)
    }

    /// Lift of a point to an endomorphism `sum lift(x_k) X_k` of `L`.
    pub fn lift(&self, x: &[u32]) -> MatrixA {
        let mut m = MatrixA::zeros(&self.ring, self.n, self.n);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0 {
                let c = RingElem::lift(&self.ring, FqElem(xk));
                m = m.add(&self.t_basis[k].scale(&c));
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub count: u64,
    pub points: Option<Vec<Vec<u32>>>,
}

fn check_budget(q: u64, d: usize, budget: u128) -> Result<()> {
    let needed = (q as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// Count (and optionally list) the points of `G~(κ)`.
pub fn enumerate_gtilde(alg: &KappaAlgebra, budget: u128, collect: bool) -> Result<Enumeration> {
    let q = alg.ring.q();
    check_budget(q, alg.d, budget)?;
    if q == 2 && alg.d <= 63 && alg.r <= 64 {
        Ok(enumerate_f2(alg, collect))
    } else {
        Ok(enumerate_generic(alg, collect))
    }
}

fn enumerate_f2(alg: &KappaAlgebra, collect: bool) -> Enumeration {
    let d = alg.d;
    let mut lin = vec![0u64; d];
    let mut cross = vec![vec![0u64; d]; d];
    for k in 0..d {
        for t in 0..alg.r {
            if (alg.alpha[k][t] ^ alg.gamma[k][t]) & 1 == 1 {
                lin[k] |= 1 << t;
            }
        }
        for l in k + 1..d {
            for t in 0..alg.r {
                if alg.beta[k][l][t] & 1 == 1 {
                    cross[k][l] |= 1 << t;
                    cross[l][k] |= 1 << t;
                }
            }
        }
    }
    // left multiplication rows: lm[a][row] bitmask over columns
    let mut lm = vec![vec![0u64; d]; d];
    for a in 0..d {
        for b in 0..d {
            for (k, &c) in alg.structure[a][b].iter().enumerate() {
                if c & 1 == 1 {
                    lm[a][k] |= 1 << b;
                }
            }
        }
    }
    let invertible = |x: u64| -> bool {
        let mut rows: Vec<u64> = (0..d).map(|i| 1u64 << i).collect();
        let mut bits = x;
        while bits != 0 {
            let a = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            for (row, m) in rows.iter_mut().zip(&lm[a]) {
                *row ^= m;
            }
        }
        // full rank over F_2: every column has a pivot, so the pivot row is `col`
        for col in 0..d {
            let bit = 1u64 << col;
            let Some(p) = (col..d).find(|&r| rows[r] & bit != 0) else {
                return false;
            };
            rows.swap(col, p);
            let pr = rows[col];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != col && *row & bit != 0 {
                    *row ^= pr;
                }
            }
        }
        true
    };
    let top = d.min(10);
    let low = d - top;
    let results: Vec<(u64, Vec<u64>)> = (0u64..(1u64 << top))
        .into_par_iter()
        .map(|prefix| {
            let x0 = prefix << low;
            let mut x = x0;
            let mut val = 0u64;
            let mut dv = lin.clone();
            for j in 0..d {
                if x >> j & 1 == 1 {
                    for k in 0..d {
                        dv[k] ^= cross[j][k];
                    }
                }
            }
            for j in 0..d {
                if x >> j & 1 == 1 {
                    val ^= lin[j];
                    for k in j + 1..d {
                        if x >> k & 1 == 1 {
                            val ^= cross[j][k];
                        }
                    }
                }
            }
            let mut count = 0u64;
            let mut pts = Vec::new();
            let mut visit = |x: u64, val: u64| {
                if val == 0 && invertible(x) {
                    count += 1;
                    if collect {
                        pts.push(x);
                    }
                }
            };
            visit(x, val);
            for i in 1u64..(1u64 << low) {
                let j = i.trailing_zeros() as usize;
                val ^= dv[j];
                x ^= 1 << j;
                for k in 0..d {
                    dv[k] ^= cross[j][k];
                }
                visit(x, val);
            }
            (count, pts)
        })
        .collect();
    let count = results.iter().map(|r| r.0).sum();
    let points = collect.then(|| {
        let mut all: Vec<u64> = results.into_iter().flat_map(|r| r.1).collect();
        all.sort_unstable();
        all.into_iter()
            .map(|x| (0..d).map(|j| (x >> j & 1) as u32).collect())
            .collect()
    });
    Enumeration { count, points }
}

fn enumerate_generic(alg: &KappaAlgebra, collect: bool) -> Enumeration {
    let q = alg.ring.q() as u32;
    let d = alg.d;
    // equation t can be checked once its last involved variable is assigned
    let mut last = vec![0usize; alg.r];
    for t in 0..alg.r {
        for k in 0..d {
            let mut used = alg.alpha[k][t] != 0 || alg.gamma[k][t] != 0;
            for l in 0..d {
                let (a, b) = if k < l { (k, l) } else { (l, k) };
                if a != b && alg.beta[a][b][t] != 0 {
                    used = true;
                }
            }
            if used {
                last[t] = last[t].max(k);
            }
        }
    }
    let checks: Vec<Vec<usize>> = (0..d)
        .map(|k| (0..alg.r).filter(|&t| last[t] == k).collect())
        .collect();
    fn dfs(
        alg: &KappaAlgebra,
        checks: &[Vec<usize>],
        x: &mut Vec<u32>,
        pos: usize,
        q: u32,
        out: &mut (u64, Vec<Vec<u32>>),
        collect: bool,
    ) {
        if pos == x.len() {
            if alg.is_invertible(x) {
                out.0 += 1;
                if collect {
                    out.1.push(x.clone());
                }
            }
            return;
        }
        for v in 0..q {
            x[pos] = v;
            if !checks[pos].is_empty() {
                let vals = alg.equations(x);
                if checks[pos].iter().any(|&t| vals[t] != 0) {
                    continue;
                }
            }
            dfs(alg, checks, x, pos + 1, q, out, collect);
        }
        x[pos] = 0;
    }
    if d == 0 {
        return Enumeration {
            count: 1,
            points: collect.then(|| vec![vec![]]),
        };
    }
    let parts: Vec<(u64, Vec<Vec<u32>>)> = (0..q)
        .into_par_iter()
        .map(|v0| {
            let mut x = vec![0u32; d];
            x[0] = v0;
            let mut out = (0u64, Vec::new());
            let ok = checks[0].is_empty() || {
                let vals = alg.equations(&x);
                checks[0].iter().all(|&t| vals[t] == 0)
            };
            if ok {
                dfs(alg, &checks, &mut x, 1, q, &mut out, collect);
            }
            out
        })
        .collect();
    let count = parts.iter().map(|p| p.0).sum();
    let points = collect.then(|| {
        let mut all: Vec<Vec<u32>> = parts.into_iter().flat_map(|p| p.1).collect();
        all.sort();
        all
    });
    Enumeration { count, points }
}

/// Number of lifts tried when evaluating the residue homomorphisms.
pub const LIFT_TRIALS: usize = 3;

/// The induced isometry of `V_i` for the point `x`, as a `dim x dim` matrix
/// over `κ` (column `a` is the image of basis vector `a`).
pub fn phi_i_kappa(
    l: &QuadraticLattice,
    alg: &KappaAlgebra,
    space: &ResidueQuadSpace,
    x: &[u32],
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    let ring = l.ring().clone();
    let n = l.rank();
    let base = alg.lift(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result: Option<Vec<Vec<u32>>> = None;
    for trial in 0..LIFT_TRIALS {
        let mut xh = base.clone();
        if trial > 0 {
            let pi = RingElem::pi(&ring);
            for b in &alg.t_basis {
                let c = RingElem::random(&ring, &mut rng, 8).exact().mul(&pi);
                xh = xh.add(&b.scale(&c));
            }
        }
        let g = MatrixA::identity(&ring, n).add(&xh);
        let m = induced_map(l, space, &g)?;
        match &result {
            None => result = Some(m),
            Some(prev) if *prev != m => {
                return Err(Error::LiftDependence(format!(
                    "V_{} image changes with the lift",
                    space.index
                )))
            }
            _ => {}
        }
    }
    let m = result.expect("at least one lift");
    check_isometry(ring.residue_field(), space, &m)?;
    Ok(m)
}

/// Action of an integral endomorphism `g` of `L` on `V_i = B_i / Z_i`.
pub fn induced_map(
    l: &QuadraticLattice,
    space: &ResidueQuadSpace,
    g: &MatrixA,
) -> Result<Vec<Vec<u32>>> {
    let _ = l;
    for b in space.b.columns() {
        if !space.b.member(&g.mul_vec(&b)) {
            return Err(Error::ClosureViolation(format!(
                "endomorphism does not preserve B_{}",
                space.index
            )));
        }
    }
    for z in space.z.columns() {
        if !space.z.member(&g.mul_vec(&z)) {
            return Err(Error::ClosureViolation(format!(
                "endomorphism does not preserve Z_{}",
                space.index
            )));
        }
    }
    let dim = space.dim;
    let mut m = vec![vec![0u32; dim]; dim];
    for (a, v) in space.lifts.iter().enumerate() {
        let img = space
            .project(&g.mul_vec(v))
            .ok_or_else(|| Error::ClosureViolation("image leaves B_i".into()))?;
        for (row, c) in img.iter().enumerate() {
            m[row][a] = c.0;
        }
    }
    Ok(m)
}

fn check_isometry(k: &ResidueField, space: &ResidueQuadSpace, m: &[Vec<u32>]) -> Result<()> {
    let dim = space.dim;
    let col = |a: usize| -> Vec<FqElem> { (0..dim).map(|r| FqElem(m[r][a])).collect() };
    let polar = |x: &[FqElem], y: &[FqElem]| -> u32 {
        let s: Vec<FqElem> = x.iter().zip(y).map(|(a, b)| FqElem(k.add(a.0, b.0))).collect();
        k.sub(
            k.sub(space.eval(k, &s).0, space.eval(k, x).0),
            space.eval(k, y).0,
        )
    };
    for a in 0..dim {
        let ca = col(a);
        if space.eval(k, &ca) != space.form[a][a] {
            return Err(Error::NotIsometry(format!("value of basis vector {a}")));
        }
        for b in a + 1..dim {
            if polar(&ca, &col(b)) != space.form[a][b].0 {
                return Err(Error::NotIsometry(format!("polar value ({a}, {b})")));
            }
        }
    }
    if kdet(k, m) == 0 {
        return Err(Error::NotIsometry("singular image".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ResidueGroupInfo {
    pub index: u32,
    pub dim: usize,
    pub form_type: FormType,
    pub order: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConjectureReport {
    pub alpha: usize,
    pub gtilde_count: u64,
    pub groups: Vec<ResidueGroupInfo>,
    pub image_size: u64,
    pub kernel_size: u64,
    pub l: i64,
    /// `log2(kernel / q^l)` when it is a non-negative integer.
    pub beta: Option<u32>,
    pub surjective: bool,
    pub holds: bool,
}

/// Evaluate the residue homomorphism on every point of `G~(κ)` and compare
/// image and kernel against the orthogonal groups of the residue spaces.
pub fn conjecture_check(
    l: &QuadraticLattice,
    model: &ModelResult,
    alg: &KappaAlgebra,
    budget: u128,
) -> Result<ConjectureReport> {
    let ring = l.ring().clone();
    let q = ring.q();
    let spaces = residue_spaces(l)?;
    let en = enumerate_gtilde(alg, budget, true)?;
    let points = en.points.expect("collected");
    let images: Vec<Vec<Vec<Vec<u32>>>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            spaces
                .iter()
                .map(|s| phi_i_kappa(l, alg, s, x, idx as u64))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let identity_of = |dim: usize| -> Vec<Vec<u32>> {
        (0..dim)
            .map(|i| (0..dim).map(|j| u32::from(i == j)).collect())
            .collect()
    };
    let ids: Vec<Vec<Vec<u32>>> = spaces.iter().map(|s| identity_of(s.dim)).collect();
    let mut image_set: HashSet<&Vec<Vec<Vec<u32>>>> = HashSet::new();
    let mut kernel = 0u64;
    for im in &images {
        image_set.insert(im);
        if *im == ids {
            kernel += 1;
        }
    }
    let groups: Vec<ResidueGroupInfo> = spaces
        .iter()
        .map(|s| ResidueGroupInfo {
            index: s.index,
            dim: s.dim,
            form_type: s.form_type,
            order: orthogonal_group_order(s.dim, s.form_type, q, ring.p() == 2).to_string(),
        })
        .collect();
    let product: BigUint = spaces
        .iter()
        .map(|s| orthogonal_group_order(s.dim, s.form_type, q, ring.p() == 2))
        .product();
    let image_size = image_set.len() as u64;
    let surjective = BigUint::from(image_size) == product;
    let l_exp = model.dim_g as i64
        - spaces
            .iter()
            .map(|s| orthogonal_group_dim(s.dim) as i64)
            .sum::<i64>();
    let beta = beta_exponent(kernel, q, l_exp);
    let holds = surjective && beta.is_some() && image_size * kernel == en.count;
    Ok(ConjectureReport {
        alpha: model.alpha,
        gtilde_count: en.count,
        groups,
        image_size,
        kernel_size: kernel,
        l: l_exp,
        beta,
        surjective,
        holds,
    })
}

fn beta_exponent(kernel: u64, q: u64, l: i64) -> Option<u32> {
    if l < 0 || kernel == 0 {
        return None;
    }
    let ql = (q as u128).checked_pow(l as u32)?;
    if !(kernel as u128).is_multiple_of(ql) {
        return None;
    }
    let rest = kernel as u128 / ql;
    rest.is_power_of_two().then(|| rest.trailing_zeros())
}

/// `q^k` as a rational for any integer `k`.
fn q_pow(q: u64, k: i64) -> BigRational {
    let base = BigInt::from(q).pow(k.unsigned_abs() as u32);
    if k >= 0 {
        BigRational::from_integer(base)
    } else {
        BigRational::new(BigInt::one(), base)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Density {
    pub value: BigRational,
    pub cs_normalized: BigRational,
}

/// `beta_L = (1/2) q^N q^{-dim G} #G~(κ)`.
pub fn local_density(q: u64, n_exp: i64, dim_g: usize, gtilde: u64) -> Density {
    let value = q_pow(q, n_exp - dim_g as i64) * BigRational::from_integer(BigInt::from(gtilde))
        / BigRational::from_integer(BigInt::from(2));
    Density {
        cs_normalized: &value * BigRational::from_integer(BigInt::from(2)),
        value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OracleConvention {
    /// Match the quadratic polynomial: values and doubled polar values.
    QuadraticForm,
    /// Match the Gram matrix: values and polar values.
    #[default]
    Gram,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub ratios: Vec<(u32, BigRational)>,
    pub counts: Vec<(u32, u64)>,
    /// First level `k` with `r_k = r_{k+1}`.
    pub stable_at: Option<u32>,
    pub stable: Option<BigRational>,
}

impl OracleResult {
    pub fn beta(&self) -> Option<BigRational> {
        self.stable
            .as_ref()
            .map(|r| r / BigRational::from_integer(BigInt::from(2)))
    }
}

/// All residues modulo `pi^k`, as exact representatives.
pub fn residues_mod(ring: &Ring, k: u32) -> Vec<RingElem> {
    let q = ring.q() as u32;
    let mut out = vec![RingElem::zero(ring)];
    let mut pk = RingElem::one(ring);
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * q as usize);
        for x in &out {
            for a in 0..q {
                let d = RingElem::lift(ring, FqElem(a)).mul(&pk);
                next.push(x.add(&d).reduce_mod_pi(k));
            }
        }
        out = next;
        pk = pk.mul(&RingElem::pi(ring));
    }
    out
}

/// `A / pi^k` as a finite ring with lookup tables. Element `i` is
/// `sum_t lift(d_t) pi^t` where `d_t` is the `t`-th base-`q` digit of `i`, so
/// reduction modulo `pi^t` is `i mod q^t`.
#[derive(Debug, Clone)]
pub struct ChainRing {
    pub q: usize,
    pub k: u32,
    pub size: usize,
    add: Vec<u16>,
    mul: Vec<u16>,
    index: HashMap<Vec<u64>, u16>,
}

/// Largest `#(A / pi^k)` for which tables are built.
pub const CHAIN_RING_LIMIT: usize = 1024;

impl ChainRing {
    pub fn new(ring: &Ring, k: u32) -> Result<Self> {
        let q = ring.q() as usize;
        let size = (q as u128).checked_pow(k).unwrap_or(u128::MAX);
        if size > CHAIN_RING_LIMIT as u128 {
            return Err(Error::BudgetExceeded {
                needed: size,
                budget: CHAIN_RING_LIMIT as u128,
            });
        }
        let size = size as usize;
        let pi = RingElem::pi(ring);
        let elems: Vec<RingElem> = (0..size)
            .map(|i| {
                let mut x = RingElem::zero(ring);
                let mut pt = RingElem::one(ring);
                let mut rest = i;
                for _ in 0..k {
                    let d = RingElem::lift(ring, FqElem((rest % q) as u32));
                    x = x.add(&d.mul(&pt));
                    pt = pt.mul(&pi);
                    rest /= q;
                }
                x.reduce_mod_pi(k)
            })
            .collect();
        let index: HashMap<Vec<u64>, u16> = elems
            .iter()
            .enumerate()
            .map(|(i, x)| (x.coeffs().to_vec(), i as u16))
            .collect();
        let look = |x: RingElem| index[x.reduce_mod_pi(k).coeffs()];
        let mut add = vec![0u16; size * size];
        let mut mul = vec![0u16; size * size];
        for i in 0..size {
            for j in 0..size {
                add[i * size + j] = look(elems[i].add(&elems[j]));
                mul[i * size + j] = look(elems[i].mul(&elems[j]));
            }
        }
        Ok(ChainRing {
            q,
            k,
            size,
            add,
            mul,
            index,
        })
    }

    pub fn embed(&self, x: &RingElem) -> u16 {
        self.index[x.reduce_mod_pi(self.k).coeffs()]
    }
    #[inline]
    pub fn add(&self, a: u16, b: u16) -> u16 {
        self.add[a as usize * self.size + b as usize]
    }
    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        self.mul[a as usize * self.size + b as usize]
    }
}

/// Largest rank handled by the brute-force oracle.
pub const ORACLE_MAX_RANK: usize = 6;

type Col = [u16; ORACLE_MAX_RANK];

struct Oracle<'a> {
    r: &'a ChainRing,
    n: usize,
    /// Gram entries.
    s: Vec<Vec<u16>>,
    /// Targets for the polar conditions (scaled by the convention).
    polar_target: Vec<Vec<u16>>,
    polar_scale: u16,
    kf: &'a ResidueField,
}

impl Oracle<'_> {
    fn value(&self, v: &Col) -> u16 {
        let r = self.r;
        let mut acc = 0u16;
        for a in 0..self.n {
            if v[a] == 0 {
                continue;
            }
            let mut row = 0u16;
            for b in 0..self.n {
                row = r.add(row, r.mul(self.s[a][b], v[b]));
            }
            acc = r.add(acc, r.mul(v[a], row));
        }
        acc
    }

    /// `scale * c^T S` for a fixed column `c`.
    fn polar_row(&self, c: &Col) -> Col {
        let r = self.r;
        let mut out = [0u16; ORACLE_MAX_RANK];
        for (b, o) in out.iter_mut().enumerate().take(self.n) {
            let mut acc = 0u16;
            for a in 0..self.n {
                acc = r.add(acc, r.mul(c[a], self.s[a][b]));
            }
            *o = r.mul(self.polar_scale, acc);
        }
        out
    }

    /// All columns `v` that extend `cols` compatibly, found digit by digit.
    fn candidates(&self, cols: &[Col]) -> Vec<Col> {
        let (n, q, j) = (self.n, self.r.q, cols.len());
        let r = self.r;
        let target = self.s[j][j] as usize;
        let rows: Vec<(Col, usize)> = cols
            .iter()
            .enumerate()
            .map(|(i, c)| (self.polar_row(c), self.polar_target[i][j] as usize))
            .collect();
        let mut partial: Vec<Col> = vec![[0; ORACLE_MAX_RANK]];
        let mut qt = 1usize;
        let fan = q.pow(n as u32);
        for t in 0..self.r.k {
            let modulus = qt * q;
            let mut next = Vec::new();
            for v in &partial {
                for digits in 0..fan {
                    let mut w = *v;
                    let mut rest = digits;
                    for x in w.iter_mut().take(n) {
                        *x += ((rest % q) * qt) as u16;
                        rest /= q;
                    }
                    if t == 0 && !self.independent(cols, &w) {
                        continue;
                    }
                    let ok = rows.iter().all(|(row, tgt)| {
                        let mut acc = 0u16;
                        for a in 0..n {
                            acc = r.add(acc, r.mul(row[a], w[a]));
                        }
                        acc as usize % modulus == tgt % modulus
                    });
                    if ok && self.value(&w) as usize % modulus == target % modulus {
                        next.push(w);
                    }
                }
            }
            partial = next;
            qt = modulus;
        }
        partial
    }

    fn independent(&self, cols: &[Col], w: &Col) -> bool {
        let q = self.r.q;
        let m: Vec<Vec<u32>> = (0..self.n)
            .map(|i| {
                cols.iter()
                    .map(|c| (c[i] as usize % q) as u32)
                    .chain(std::iter::once((w[i] as usize % q) as u32))
                    .collect()
            })
            .collect();
        krank(self.kf, &m) == cols.len() + 1
    }

    fn count(&self, cols: &mut Vec<Col>) -> u64 {
        if cols.len() == self.n {
            return 1;
        }
        let cands = self.candidates(cols);
        if cols.len() + 1 == self.n {
            return cands.len() as u64;
        }
        let mut total = 0;
        for c in cands {
            cols.push(c);
            total += self.count(cols);
            cols.pop();
        }
        total
    }
}

/// Count `g in GL_n(A/pi^k)` with `h∘g ≡ h (mod pi^k)` under `conv`.
pub fn count_automorphisms_mod(
    l: &QuadraticLattice,
    k: u32,
    conv: OracleConvention,
) -> Result<u64> {
    let ring = l.ring().clone();
    let n = l.rank();
    if n > ORACLE_MAX_RANK {
        return Err(Error::BudgetExceeded {
            needed: n as u128,
            budget: ORACLE_MAX_RANK as u128,
        });
    }
    let r = ChainRing::new(&ring, k)?;
    let g = l.gram();
    let s: Vec<Vec<u16>> = (0..n)
        .map(|i| (0..n).map(|j| r.embed(g.get(i, j))).collect())
        .collect();
    let polar_scale = match conv {
        OracleConvention::QuadraticForm => r.embed(&RingElem::from_int(&ring, 2)),
        OracleConvention::Gram => r.embed(&RingElem::one(&ring)),
    };
    let polar_target = s
        .iter()
        .map(|row| row.iter().map(|&x| r.mul(polar_scale, x)).collect())
        .collect();
    let o = Oracle {
        r: &r,
        n,
        s,
        polar_target,
        polar_scale,
        kf: ring.residue_field(),
    };
    if n == 0 {
        return Ok(1);
    }
    let firsts = o.candidates(&[]);
    if n == 1 {
        return Ok(firsts.len() as u64);
    }
    Ok(firsts
        .into_par_iter()
        .map(|c| o.count(&mut vec![c]))
        .sum())
}

/// Rank of a matrix over the residue field.
pub fn krank(k: &ResidueField, m: &[Vec<u32>]) -> usize {
    let mut a = m.to_vec();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][c] != 0) else {
            continue;
        };
        a.swap(rank, p);
        let inv = k.inv(a[rank][c]);
        for r in 0..rows {
            if r != rank && a[r][c] != 0 {
                let f = k.mul(a[r][c], inv);
                for t in c..cols {
                    let v = k.mul(f, a[rank][t]);
                    a[r][t] = k.sub(a[r][t], v);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// First level from which equal consecutive ratios count as stabilization;
/// below it the counts can plateau before the Hensel range.
pub fn oracle_start_level(l: &QuadraticLattice) -> u32 {
    2 * l.ring().e() as u32 + l.max_scale()
}

/// `r_k = q^{-k dim G} #{g mod pi^k}` for `k = 1, 2, ...` until two
/// consecutive values at levels `>= oracle_start_level` agree, or `kmax`.
pub fn naive_density_oracle(
    l: &QuadraticLattice,
    kmax: u32,
    budget: u128,
    conv: OracleConvention,
) -> Result<OracleResult> {
    let res = oracle_table(l, kmax, budget, conv)?;
    if res.stable.is_none() {
        return Err(Error::NotStabilized(kmax));
    }
    Ok(res)
}

/// Same as [`naive_density_oracle`], but a table that never stabilizes is
/// returned with `stable = None`.
pub fn oracle_table(
    l: &QuadraticLattice,
    kmax: u32,
    budget: u128,
    conv: OracleConvention,
) -> Result<OracleResult> {
    let ring = l.ring().clone();
    let n = l.rank();
    let q = ring.q();
    let needed = (q as u128)
        .checked_pow((n as u32) * kmax)
        .unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let dim_g = (n * n.saturating_sub(1) / 2) as i64;
    let start = oracle_start_level(l);
    let mut ratios: Vec<(u32, BigRational)> = Vec::new();
    let mut counts = Vec::new();
    for k in 1..=kmax {
        let c = count_automorphisms_mod(l, k, conv)?;
        let r = q_pow(q, -(k as i64) * dim_g) * BigRational::from_integer(BigInt::from(c));
        counts.push((k, c));
        let stable = k > start && ratios.last().is_some_and(|(_, prev)| *prev == r);
        ratios.push((k, r.clone()));
        if stable {
            return Ok(OracleResult {
                ratios,
                counts,
                stable_at: Some(k - 1),
                stable: Some(r),
            });
        }
    }
    Ok(OracleResult {
        ratios,
        counts,
        stable_at: None,
        stable: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `m A(0,0) ⊕ A(pi^s, r pi^{2e-s}) ⊕ (t)` over a ramified extension of `Z_2`.
    UnimodularOdd { e: u32, s: u32, m: u32 },
    /// `m A(0,0) ⊕ (1) ⊕ m' pi A(0,0)` with `e = 2`.
    Example512 { m: u32, m_prime: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedForm {
    pub n_exp: i64,
    pub beta: u32,
    pub l: i64,
    pub density: BigRational,
}

/// Closed-form densities for the two explicit families. `q` is the residue
/// field size; `even_type` is the type of the residue space when it is
/// even-dimensional (only the family with `s = e`, `e` odd).
pub fn closed_form_density(family: Family, q: u64, even_type: FormType) -> Result<ClosedForm> {
    let ceil_half = |x: i64| -> i64 { x.div_euclid(2) + x.rem_euclid(2) };
    match family {
        Family::UnimodularOdd { e, s, m } => {
            if e < 2 || s == 0 || s > e || (s < e && s % 2 == 0) {
                return Err(Error::OutOfFamily(format!("e = {e}, s = {s}")));
            }
            let (e, s, m) = (e as i64, s as i64, m as i64);
            let ep = ceil_half(e);
            let (n_exp, beta, vdim) = if s == e {
                let vdim = if e % 2 == 1 { 2 * m + 2 } else { 2 * m + 3 };
                ((2 * m + 2) * (e - ep) + e, 1u32, vdim)
            } else {
                let n = (2 * m + 1) * (e - ep - ceil_half(e - s)) - ceil_half(2 * e - s + 1)
                    + 2 * e;
                (n, 2u32, 2 * m + 1)
            };
            let ty = if vdim % 2 == 1 { FormType::Odd } else { even_type };
            let order = orthogonal_group_order(vdim as usize, ty, q, true);
            let dim_o = orthogonal_group_dim(vdim as usize) as i64;
            let density = q_pow(q, n_exp - dim_o)
                * BigRational::from_integer(BigInt::from(order))
                * q_pow(2, beta as i64 - 1);
            let rank = 2 * m + 3;
            Ok(ClosedForm {
                n_exp,
                beta,
                l: rank * (rank - 1) / 2 - dim_o,
                density,
            })
        }
        Family::Example512 { m, m_prime } => {
            let (m, mp) = (m as i64, m_prime as i64);
            let n_exp = 2 * mp * mp + 2 * m + 3 * mp + 2;
            let o0 = orthogonal_group_order((2 * m + 1) as usize, FormType::Odd, q, true);
            let o1 = orthogonal_group_order((2 * mp) as usize, FormType::EvenPlus, q, true);
            let density = q_pow(q, m + 4 * mp + 2 - 2 * m * m)
                * BigRational::from_integer(BigInt::from(o0 * o1));
            Ok(ClosedForm {
                n_exp,
                beta: 1,
                l: 4 * m * mp + 2 * mp,
                density,
            })
        }
    }
}

/// Number of solutions of the model equations over `A / pi^k` with `1 + x`
/// invertible; smoothness predicts `#G~(κ) q^{(k-1) dim G}`.
pub fn smooth_model_count(
    ctx: &ModelContext,
    model: &ModelResult,
    alg: &KappaAlgebra,
    k: u32,
    budget: u128,
) -> Result<u64> {
    let ring = ctx.ring().clone();
    let n = ctx.n();
    let d = alg.d;
    check_budget(ring.q(), d * k as usize, budget)?;
    let res = residues_mod(&ring, k);
    let basis = &alg.t_basis;
    // the solutions mod pi^k reduce to points mod pi; enumerate their lifts
    let pts = enumerate_gtilde(alg, budget, true)?.points.expect("collected");
    let q = ring.q() as usize;
    let fibre: Vec<Vec<RingElem>> = (0..q)
        .map(|a| {
            res.iter()
                .filter(|x| x.residue().0 == a as u32)
                .cloned()
                .collect()
        })
        .collect();
    let h = &model.h_tilde;
    let count: u64 = pts
        .par_iter()
        .map(|p| {
            let mut idx = vec![0usize; d];
            let mut c = 0u64;
            loop {
                let mut x = MatrixA::zeros(&ring, n, n);
                for (t, &i) in idx.iter().enumerate() {
                    let coef = &fibre[p[t] as usize][i];
                    if !coef.is_zero_repr() {
                        x = x.add(&basis[t].scale(coef));
                    }
                }
                let f = ctx.phi(&x).add(&ctx.psi(&x));
                if let Some(coords) = h.coordinates(&f) {
                    if coords.iter().all(|y| y.val_lb() >= k) {
                        c += 1;
                    }
                }
                let mut t = 0;
                loop {
                    if t == d {
                        break;
                    }
                    idx[t] += 1;
                    if idx[t] < fibre[p[t] as usize].len() {
                        break;
                    }
                    idx[t] = 0;
                    t += 1;
                }
                if t == d {
                    break;
                }
            }
            c
        })
        .sum();
    Ok(count)
}

/// Group points of `G~(κ)` by their image tuple (used for diagnostics).
pub fn image_histogram(images: &[Vec<Vec<Vec<u32>>>]) -> HashMap<Vec<Vec<Vec<u32>>>, u64> {
    let mut h = HashMap::new();
    for im in images {
        *h.entry(im.clone()).or_insert(0) += 1;
    }
    h
}

pub fn rational_to_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

pub fn is_zero_rational(r: &BigRational) -> bool {
    r.is_zero()
}
