//! Quadratic lattices `(L, h)` over `A`: block construction, duals, Jordan
//! splittings, the residue sublattices `A_i ⊇ B_i ⊇ Z_i` and the nonsingular
//! residue quadratic spaces `B_i / Z_i`, plus finite orthogonal group orders.
//!
//! Gram convention: `gram[i][i] = h(e_i)` and `gram[i][j]` is the polar value
//! `h(e_i, e_j) = (h(e_i + e_j) - h(e_i) - h(e_j)) / 2`, so `h(v) = v^T S v`.

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{congruence_kernel, hnf_containing, scaled_inverse, zp_kernel, ALattice, MatrixA};
use crate::ring::{FqElem, ResidueField, Ring, RingElem};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockKind {
    /// `A(a, b)`: Gram `[[a, 1], [1, b]]`.
    Plane(RingElem, RingElem),
    /// `(t)`: Gram `[t]`.
    Line(RingElem),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub scale: u32,
    pub kind: BlockKind,
}

impl BlockSpec {
    pub fn plane(scale: u32, a: RingElem, b: RingElem) -> Self {
        BlockSpec {
            scale,
            kind: BlockKind::Plane(a, b),
        }
    }
    pub fn line(scale: u32, t: RingElem) -> Self {
        BlockSpec {
            scale,
            kind: BlockKind::Line(t),
        }
    }
    pub fn rank(&self) -> usize {
        match self.kind {
            BlockKind::Plane(..) => 2,
            BlockKind::Line(_) => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticLattice {
    ring: Ring,
    gram: MatrixA,
    blocks: Vec<BlockSpec>,
}

/// Orthogonal sum of the blocks, each multiplied by `pi^scale`.
pub fn build_lattice(ring: &Ring, blocks: &[BlockSpec]) -> Result<QuadraticLattice> {
    let n: usize = blocks.iter().map(|b| b.rank()).sum();
    let mut s = MatrixA::zeros(ring, n, n);
    let mut at = 0;
    for b in blocks {
        let c = RingElem::pi_pow(ring, b.scale);
        match &b.kind {
            BlockKind::Plane(x, y) => {
                s.set(at, at, x.exact().mul(&c));
                s.set(at + 1, at + 1, y.exact().mul(&c));
                s.set(at, at + 1, c.clone());
                s.set(at + 1, at, c);
                at += 2;
            }
            BlockKind::Line(t) => {
                s.set(at, at, t.exact().mul(&c));
                at += 1;
            }
        }
    }
    let mut l = QuadraticLattice::from_gram(s)?;
    l.blocks = blocks.to_vec();
    Ok(l)
}

impl QuadraticLattice {
    pub fn from_gram(gram: MatrixA) -> Result<Self> {
        assert_eq!(gram.rows(), gram.cols(), "Gram matrix must be square");
        let ring = gram.ring().clone();
        let gram = gram.map(|x| x.exact());
        if gram != gram.transpose() {
            return Err(Error::InvalidRing("Gram matrix is not symmetric".into()));
        }
        if gram.rows() > 0 && gram.det_valuation(ring.max_prec() / 2).is_none() {
            return Err(Error::DegenerateForm);
        }
        Ok(QuadraticLattice {
            ring,
            gram,
            blocks: Vec::new(),
        })
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }
    pub fn rank(&self) -> usize {
        self.gram.rows()
    }
    pub fn gram(&self) -> &MatrixA {
        &self.gram
    }
    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    /// `v(det S)`.
    pub fn det_valuation(&self) -> u32 {
        self.gram
            .det_valuation(self.ring.max_prec() / 2)
            .expect("nondegenerate")
    }

    /// Largest elementary divisor exponent of the Gram matrix: `L^# ⊆ pi^{-dmax} L`.
    pub fn max_scale(&self) -> u32 {
        let s = crate::linalg::snf(&self.gram, self.ring.max_prec() / 2);
        s.diag.iter().flatten().copied().max().unwrap_or(0)
    }

    pub fn value(&self, x: &[RingElem]) -> RingElem {
        self.polar(x, x)
    }

    pub fn polar(&self, x: &[RingElem], y: &[RingElem]) -> RingElem {
        let sy = self.gram.mul_vec(y);
        let mut acc = RingElem::zero(&self.ring);
        for (a, b) in x.iter().zip(sy.iter()) {
            acc = acc.add(&a.mul(b));
        }
        acc
    }

    /// `pi^dmax S^{-1}` modulo `pi^prec` together with `dmax`.
    pub fn scaled_inverse(&self, prec: u32) -> Result<(MatrixA, u32)> {
        let dmax = self.max_scale();
        scaled_inverse(&self.gram, prec + dmax)
    }

    /// `L^#` in `L`-coordinates.
    pub fn dual(&self) -> Result<ALattice> {
        dual_of(self, &ALattice::standard(&self.ring, self.rank()))
    }
}

/// Dual of a full-rank lattice `M` (in `L`-coordinates) with respect to the
/// polar form of `L`: `M^# = S^{-1} B^{-T} A^n` for `M = B A^n`.
pub fn dual_of(l: &QuadraticLattice, m: &ALattice) -> Result<ALattice> {
    let ring = l.ring().clone();
    let n = l.rank();
    let g = m.basis().transpose().mul(l.gram());
    let vdet = g.det_valuation(ring.max_prec() / 2).ok_or(Error::DegenerateForm)?;
    let (w, d) = scaled_inverse(&g, (n as u32 + 1) * vdet + 2)?;
    let bound = (n as u32 * d).saturating_sub(vdet).max(1);
    // M = pi^{-s} B A^n  =>  M^# = pi^{s} (B^T S)^{-1} A^n = pi^{s-d} W A^n
    let lat = ALattice::from_generators_shifted(&w, bound, d);
    Ok(lat.scaled(m.shift() as i64))
}

/// One Jordan component `pi^scale * U` with `U` unimodular.
#[derive(Debug, Clone)]
pub struct JordanComponent {
    pub scale: u32,
    /// Basis vectors of the component in `L`-coordinates.
    pub basis: Vec<Vec<RingElem>>,
    /// Gram matrix of the component (still containing the factor `pi^scale`).
    pub gram: MatrixA,
}

#[derive(Debug, Clone)]
pub struct JordanSplitting {
    pub components: Vec<JordanComponent>,
    /// Columns are the new basis in `L`-coordinates; unimodular.
    pub change: MatrixA,
}

impl JordanSplitting {
    pub fn scales(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.scale).collect()
    }

    /// Gram matrix of `L` in the split basis.
    pub fn assembled(&self, l: &QuadraticLattice) -> MatrixA {
        self.change.transpose().mul(l.gram()).mul(&self.change)
    }
}

/// Greedy orthogonal splitting: repeatedly peel off a rank-1 block on a
/// diagonal entry of minimal valuation, or (when only a polar entry attains
/// the minimum) a rank-2 block on that pair, then project the rest orthogonally.
pub fn jordan_splitting(l: &QuadraticLattice) -> JordanSplitting {
    let ring = l.ring().clone();
    let n = l.rank();
    let mut c = MatrixA::identity(&ring, n);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut pieces: Vec<(u32, Vec<usize>)> = Vec::new();
    let odd = ring.p() != 2;
    while !remaining.is_empty() {
        let g = c.transpose().mul(l.gram()).mul(&c);
        let val = |i: usize, j: usize| g.get(i, j).val_lb();
        let mut vmin = u32::MAX;
        for (a, &i) in remaining.iter().enumerate() {
            for &j in &remaining[a..] {
                vmin = vmin.min(val(i, j));
            }
        }
        let diag = remaining.iter().copied().find(|&i| val(i, i) == vmin);
        let (block, scale) = match diag {
            Some(i) => (vec![i], vmin),
            None => {
                let (i, j) = remaining
                    .iter()
                    .enumerate()
                    .flat_map(|(a, &i)| remaining[a + 1..].iter().map(move |&j| (i, j)))
                    .find(|&(i, j)| val(i, j) == vmin)
                    .expect("pivot pair");
                if odd {
                    // e_i + e_j has value of valuation vmin
                    for r in 0..n {
                        let v = c.get(r, i).add(c.get(r, j));
                        c.set(r, i, v);
                    }
                    remaining.retain(|&x| x != i);
                    remaining.insert(0, i);
                    continue;
                }
                (vec![i, j], vmin)
            }
        };
        let g = c.transpose().mul(l.gram()).mul(&c);
        // orthogonal projection of the others away from the block
        let others: Vec<usize> = remaining.iter().copied().filter(|x| !block.contains(x)).collect();
        if block.len() == 1 {
            let i = block[0];
            let (v, u) = g.get(i, i).split_unit().expect("nonzero pivot");
            let uinv = u.inv().expect("unit").exact();
            for &k in &others {
                let coef = g.get(i, k).div_pi_pow(v).expect("divisible").exact().mul(&uinv);
                for r in 0..n {
                    let x = c.get(r, k).sub(&coef.mul(c.get(r, i)));
                    c.set(r, k, x);
                }
            }
        } else {
            let (i, j) = (block[0], block[1]);
            let (a, b, d) = (g.get(i, i).clone(), g.get(i, j).clone(), g.get(j, j).clone());
            let det = a.mul(&d).sub(&b.mul(&b));
            let (vd, ud) = det.split_unit().expect("nondegenerate block");
            let udinv = ud.inv().expect("unit").exact();
            for &k in &others {
                let (x, y) = (g.get(i, k), g.get(j, k));
                // solve [[a,b],[b,d]] (s,t) = (x,y)
                let sn = d.mul(x).sub(&b.mul(y));
                let tn = a.mul(y).sub(&b.mul(x));
                let s = sn.div_pi_pow(vd).expect("divisible").exact().mul(&udinv);
                let t = tn.div_pi_pow(vd).expect("divisible").exact().mul(&udinv);
                for r in 0..n {
                    let v = c.get(r, k).sub(&s.mul(c.get(r, i))).sub(&t.mul(c.get(r, j)));
                    c.set(r, k, v);
                }
            }
        }
        remaining.retain(|x| !block.contains(x));
        pieces.push((scale, block));
    }
    // group by scale, keeping a stable order
    let mut scales: Vec<u32> = pieces.iter().map(|p| p.0).collect();
    scales.sort_unstable();
    scales.dedup();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut components = Vec::new();
    for s in scales {
        let idx: Vec<usize> = pieces
            .iter()
            .filter(|p| p.0 == s)
            .flat_map(|p| p.1.iter().copied())
            .collect();
        let basis: Vec<Vec<RingElem>> = idx.iter().map(|&k| c.col(k)).collect();
        let bm = MatrixA::from_cols(&ring, n, &basis);
        let gram = bm.transpose().mul(l.gram()).mul(&bm);
        order.extend(idx);
        components.push(JordanComponent {
            scale: s,
            basis,
            gram,
        });
    }
    let cols: Vec<Vec<RingElem>> = order.iter().map(|&k| c.col(k)).collect();
    JordanSplitting {
        components,
        change: MatrixA::from_cols(&ring, n, &cols),
    }
}

/// `A_i = {x in L : h(x, L) ⊆ pi^i A}`.
pub fn sublattice_a(l: &QuadraticLattice, i: u32) -> ALattice {
    congruence_kernel(l.gram(), i)
}

/// `B_i ⊆ A_i`: for `p = 2`, the kernel of the additive map
/// `x -> pi^{-i} h(x) mod 2` on `A_i`; for odd `p`, `B_i = A_i`.
pub fn sublattice_b(l: &QuadraticLattice, i: u32) -> Result<ALattice> {
    let ai = sublattice_a(l, i);
    let ring = l.ring().clone();
    if ring.p() != 2 {
        return Ok(ai);
    }
    let e = ring.e() as u32;
    zp_kernel(&ai, &[e], |x| Ok(vec![l.value(x).div_pi_pow(i)?.exact()]))
}

/// `Z_i ⊆ B_i`: preimage of the radical of the quadratic form
/// `(1/2) pi^{-i} h mod pi` on `B_i / pi B_i`.
pub fn sublattice_z(l: &QuadraticLattice, i: u32) -> Result<ALattice> {
    let bi = sublattice_b(l, i)?;
    sublattice_z_from(l, i, &bi)
}

fn sublattice_z_from(l: &QuadraticLattice, i: u32, bi: &ALattice) -> Result<ALattice> {
    let bm = bi.basis();
    // radical of the polar form pi^{-i} h(x, y) mod pi, in B-coordinates
    let g = bm.transpose().mul(l.gram()).mul(bm);
    let rad = congruence_kernel(&g, i + 1);
    // then the additive condition (1/2) pi^{-i} h(x) in pi A on the radical
    let qk = zp_kernel(&rad, &[1], |c| {
        let x = bm.mul_vec(c);
        Ok(vec![l.value(&x).div_pi_pow(i)?.half()?.exact()])
    })?;
    let z = bm.mul(qk.basis());
    let bound = bi.exponent() + qk.exponent();
    Ok(hnf_containing(&z, bound.max(1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormType {
    Odd,
    EvenPlus,
    EvenMinus,
}

/// The nonsingular quadratic space `V_i = B_i / Z_i` over the residue field.
#[derive(Debug, Clone)]
pub struct ResidueQuadSpace {
    pub index: u32,
    pub dim: usize,
    /// Upper-triangular form matrix: `Q(x) = sum_{a<=b} form[a][b] x_a x_b`.
    pub form: Vec<Vec<FqElem>>,
    pub form_type: FormType,
    pub b: ALattice,
    pub z: ALattice,
    /// Lifts in `L`-coordinates of a basis of `V_i`.
    pub lifts: Vec<Vec<RingElem>>,
    /// `B_i`-coordinates, reduced mod pi, of the `Z_i`-part of the adapted basis.
    adapted: Vec<Vec<u32>>,
    quotient_rows: Vec<usize>,
}

impl ResidueQuadSpace {
    /// Coordinates in `V_i` of the class of an element of `B_i` (in `L`-coordinates).
    pub fn project(&self, x: &[RingElem]) -> Option<Vec<FqElem>> {
        let ring = self.b.ring();
        let k = ring.residue_field();
        let c = self.b.coordinates(x)?;
        let cb: Vec<u32> = c.iter().map(|a| a.residue().0).collect();
        Some(self.project_bcoords(k, &cb))
    }

    fn project_bcoords(&self, k: &ResidueField, cb: &[u32]) -> Vec<FqElem> {
        // adapted basis matrix is lower unitriangular: columns are e_r for quotient
        // rows and Z-columns otherwise; forward substitution
        let n = cb.len();
        let mut rest = cb.to_vec();
        let mut out = Vec::with_capacity(self.dim);
        for r in 0..n {
            let coef = rest[r];
            if self.quotient_rows.contains(&r) {
                out.push(FqElem(coef));
                rest[r] = 0;
                continue;
            }
            if coef == 0 {
                continue;
            }
            let col = &self.adapted[r];
            for (t, x) in col.iter().enumerate().skip(r) {
                if *x != 0 {
                    rest[t] = k.sub(rest[t], k.mul(coef, *x));
                }
            }
        }
        out
    }

    pub fn eval(&self, k: &ResidueField, x: &[FqElem]) -> FqElem {
        FqElem(eval_form(k, &self.form, x))
    }
}

pub(crate) fn eval_form(k: &ResidueField, form: &[Vec<FqElem>], x: &[FqElem]) -> u32 {
    let mut acc = 0;
    for a in 0..x.len() {
        for b in a..x.len() {
            let c = form[a][b].0;
            if c != 0 {
                acc = k.add(acc, k.mul(c, k.mul(x[a].0, x[b].0)));
            }
        }
    }
    acc
}

/// `V_i` with its form `(1/2) pi^{-i} h mod pi`.
pub fn residue_form(l: &QuadraticLattice, i: u32) -> Result<ResidueQuadSpace> {
    let ring = l.ring().clone();
    let k = ring.residue_field().clone();
    let n = l.rank();
    let b = sublattice_b(l, i)?;
    let z = sublattice_z_from(l, i, &b)?;
    // Z in B-coordinates
    let zcoords: Vec<Vec<RingElem>> = z
        .columns()
        .iter()
        .map(|c| b.coordinates(c).expect("Z inside B"))
        .collect();
    let zb = MatrixA::from_cols(&ring, n, &zcoords);
    let zl = ALattice::from_generators(&zb, n as u32)?;
    let quotient_rows: Vec<usize> = (0..n).filter(|&r| zl.exps()[r] > 0).collect();
    let adapted: Vec<Vec<u32>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|t| zl.basis().get(t, r).residue().0)
                .collect::<Vec<u32>>()
        })
        .collect();
    let lifts: Vec<Vec<RingElem>> = quotient_rows.iter().map(|&r| b.basis().col(r)).collect();
    let dim = lifts.len();
    let qv = |x: &[RingElem]| -> Result<FqElem> {
        Ok(l.value(x).div_pi_pow(i)?.half()?.residue())
    };
    let mut form = vec![vec![FqElem(0); dim]; dim];
    for a in 0..dim {
        form[a][a] = qv(&lifts[a])?;
        for c in a + 1..dim {
            form[a][c] = l.polar(&lifts[a], &lifts[c]).div_pi_pow(i)?.residue();
        }
    }
    let form_type = classify_form(&k, &form);
    Ok(ResidueQuadSpace {
        index: i,
        dim,
        form,
        form_type,
        b,
        z,
        lifts,
        adapted,
        quotient_rows,
    })
}

/// All nonzero residue spaces `V_i`, for `i` up to where they must vanish.
pub fn residue_spaces(l: &QuadraticLattice) -> Result<Vec<ResidueQuadSpace>> {
    let ring = l.ring();
    let top = l.max_scale() + 2 * ring.v2() + 2;
    let mut out = Vec::new();
    for i in 0..=top {
        let v = residue_form(l, i)?;
        if v.dim > 0 {
            out.push(v);
        }
    }
    Ok(out)
}

/// Isometry class of a nonsingular form: odd dimension, or the sign of an
/// even-dimensional form (Arf invariant in characteristic 2, discriminant otherwise).
pub fn classify_form(k: &ResidueField, form: &[Vec<FqElem>]) -> FormType {
    let d = form.len();
    if d % 2 == 1 {
        return FormType::Odd;
    }
    if d == 0 {
        return FormType::EvenPlus;
    }
    if k.char2() {
        let arf = arf_invariant(k, form);
        if k.trace(arf) == 0 {
            FormType::EvenPlus
        } else {
            FormType::EvenMinus
        }
    } else {
        // symmetric matrix G with Q(x) = x^T G x
        let half = k.inv(2 % k.p() as u32);
        let mut g = vec![vec![0u32; d]; d];
        for a in 0..d {
            g[a][a] = form[a][a].0;
            for b in a + 1..d {
                let v = k.mul(form[a][b].0, half);
                g[a][b] = v;
                g[b][a] = v;
            }
        }
        let mut disc = kdet(k, &g);
        if (d / 2) % 2 == 1 {
            disc = k.neg(disc);
        }
        if k.is_square(disc) {
            FormType::EvenPlus
        } else {
            FormType::EvenMinus
        }
    }
}

/// Arf invariant (in `k`, meaningful modulo `{x^2 + x}`) of a nonsingular
/// even-dimensional form in characteristic 2, via symplectic reduction.
pub fn arf_invariant(k: &ResidueField, form: &[Vec<FqElem>]) -> u32 {
    let d = form.len();
    // bilinear form B(x,y) = Q(x+y) - Q(x) - Q(y)
    let mut bmat = vec![vec![0u32; d]; d];
    for a in 0..d {
        for b in a + 1..d {
            bmat[a][b] = form[a][b].0;
            bmat[b][a] = form[a][b].0;
        }
    }
    let bil = |x: &[u32], y: &[u32]| -> u32 {
        let mut acc = 0;
        for a in 0..d {
            if x[a] == 0 {
                continue;
            }
            for b in 0..d {
                if y[b] != 0 && bmat[a][b] != 0 {
                    acc = k.add(acc, k.mul(x[a], k.mul(bmat[a][b], y[b])));
                }
            }
        }
        acc
    };
    let q = |x: &[u32]| -> u32 {
        let xs: Vec<FqElem> = x.iter().map(|&v| FqElem(v)).collect();
        eval_form(k, form, &xs)
    };
    let mut vecs: Vec<Vec<u32>> = (0..d)
        .map(|a| {
            let mut v = vec![0u32; d];
            v[a] = 1;
            v
        })
        .collect();
    let mut arf = 0;
    while !vecs.is_empty() {
        let e = vecs.remove(0);
        let pos = vecs.iter().position(|f| bil(&e, f) != 0).expect("nonsingular");
        let f0 = vecs.remove(pos);
        let c = k.inv(bil(&e, &f0));
        let f: Vec<u32> = f0.iter().map(|&x| k.mul(x, c)).collect();
        arf = k.add(arf, k.mul(q(&e), q(&f)));
        // project the rest onto the orthogonal complement of <e, f>
        for v in vecs.iter_mut() {
            let be = bil(v, &e);
            let bf = bil(v, &f);
            for t in 0..d {
                // v - B(v,f) e - B(v,e) f  (char 2: signs irrelevant)
                let s = k.add(k.mul(bf, e[t]), k.mul(be, f[t]));
                v[t] = k.sub(v[t], s);
            }
        }
    }
    arf
}

/// Determinant over the residue field by Gaussian elimination.
pub fn kdet(k: &ResidueField, m: &[Vec<u32>]) -> u32 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = 1u32;
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| a[r][c] != 0) else {
            return 0;
        };
        if p != c {
            a.swap(p, c);
            det = k.neg(det);
        }
        det = k.mul(det, a[c][c]);
        let inv = k.inv(a[c][c]);
        for r in c + 1..n {
            if a[r][c] == 0 {
                continue;
            }
            let f = k.mul(a[r][c], inv);
            for t in c..n {
                let v = k.mul(f, a[c][t]);
                a[r][t] = k.sub(a[r][t], v);
            }
        }
    }
    det
}

/// `#O(V)(F_q)` for a nonsingular quadratic space of dimension `dim`.
pub fn orthogonal_group_order(dim: usize, ty: FormType, q: u64, char2: bool) -> BigUint {
    if dim == 0 {
        return BigUint::one();
    }
    let qb = BigUint::from(q);
    let prod = |m: usize| -> BigUint {
        let mut acc = BigUint::one();
        for i in 1..=m {
            acc *= qb.pow(2 * i as u32) - 1u32;
        }
        acc
    };
    if dim % 2 == 1 {
        let m = dim / 2;
        let base = qb.pow((m * m) as u32) * prod(m);
        if char2 {
            base
        } else {
            base * 2u32
        }
    } else {
        let m = dim / 2;
        let qm = qb.pow(m as u32);
        let middle = match ty {
            FormType::EvenMinus => qm + 1u32,
            _ => qm - 1u32,
        };
        BigUint::from(2u32) * qb.pow((m * (m - 1)) as u32) * middle * prod(m - 1)
    }
}

/// Dimension of the orthogonal group of a `d`-dimensional space.
pub fn orthogonal_group_dim(d: usize) -> usize {
    d * d.saturating_sub(1) / 2
}
