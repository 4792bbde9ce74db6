//! Matrices over `A`, Smith and Hermite normal forms, and full-rank lattice
//! algebra in `K^d`.
//!
//! Normal forms run in "modular mode": entries are exact representatives of
//! classes modulo `pi^P` for a working precision `P`, every intermediate result
//! is reduced back modulo `pi^P`, and a class is zero when it vanishes modulo
//! `pi^P`. Quotients by a pivot `pi^v` are only ever multiplied against vectors
//! whose entries have valuation at least `v`, so the arbitrary choice of lift is
//! harmless.

use std::fmt;

use crate::error::{Error, Result};
use crate::ring::{Ring, RingElem, Valuation};

#[derive(Clone, PartialEq, Eq)]
pub struct MatrixA {
    ring: Ring,
    rows: usize,
    cols: usize,
    data: Vec<RingElem>,
}

impl fmt::Debug for MatrixA {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MatrixA {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl MatrixA {
    pub fn zeros(ring: &Ring, rows: usize, cols: usize) -> Self {
        MatrixA {
            ring: ring.clone(),
            rows,
            cols,
            data: vec![RingElem::zero(ring); rows * cols],
        }
    }

    pub fn identity(ring: &Ring, n: usize) -> Self {
        let mut m = Self::zeros(ring, n, n);
        for i in 0..n {
            m.set(i, i, RingElem::one(ring));
        }
        m
    }

    pub fn from_rows(ring: &Ring, rows: Vec<Vec<RingElem>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let data: Vec<RingElem> = rows.into_iter().flatten().collect();
        assert_eq!(data.len(), r * c, "ragged rows");
        MatrixA {
            ring: ring.clone(),
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_ints(ring: &Ring, rows: &[Vec<i64>]) -> Self {
        Self::from_rows(
            ring,
            rows.iter()
                .map(|r| r.iter().map(|&x| RingElem::from_int(ring, x)).collect())
                .collect(),
        )
    }

    /// Matrix whose columns are the given vectors of length `d`.
    pub fn from_cols(ring: &Ring, d: usize, cols: &[Vec<RingElem>]) -> Self {
        let mut m = Self::zeros(ring, d, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), d);
            for (i, x) in c.iter().enumerate() {
                m.set(i, j, x.clone());
            }
        }
        m
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &RingElem {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: RingElem) {
        self.data[i * self.cols + j] = x;
    }

    pub fn col(&self, j: usize) -> Vec<RingElem> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<RingElem> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn columns(&self) -> Vec<Vec<RingElem>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(&self.ring, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut out = Self::zeros(&self.ring, self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero_repr() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = o.get(k, j);
                    if b.is_zero_repr() {
                        continue;
                    }
                    let v = out.get(i, j).add(&a.mul(b));
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[RingElem]) -> Vec<RingElem> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = RingElem::zero(&self.ring);
                for (k, x) in v.iter().enumerate() {
                    let a = self.get(i, k);
                    if !a.is_zero_repr() && !x.is_zero_repr() {
                        s = s.add(&a.mul(x));
                    }
                }
                s
            })
            .collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect();
        MatrixA {
            ring: self.ring.clone(),
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect();
        MatrixA {
            ring: self.ring.clone(),
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, c: &RingElem) -> Self {
        self.map(|x| x.mul(c))
    }

    pub fn map(&self, f: impl Fn(&RingElem) -> RingElem) -> Self {
        MatrixA {
            ring: self.ring.clone(),
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Canonical representatives modulo `pi^k`, regarded as exact.
    pub fn reduce(&self, k: u32) -> Self {
        self.map(|x| x.reduce_mod_pi(k))
    }

    pub fn is_zero_mod(&self, k: u32) -> bool {
        self.data.iter().all(|x| x.val_lb() >= k)
    }

    /// Minimum valuation of the entries (`None` if all vanish at precision).
    pub fn min_valuation(&self) -> Option<u32> {
        self.data.iter().filter_map(|x| x.valuation().finite()).min()
    }

    /// Minimum of the per-entry precisions.
    pub fn min_prec(&self) -> u32 {
        self.data.iter().map(|x| x.prec()).min().unwrap_or(self.ring.max_prec())
    }

    /// Divide every entry by `pi^k`; all entries must be divisible.
    pub fn div_pi_pow(&self, k: u32) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for x in &self.data {
            data.push(x.div_pi_pow(k)?.exact());
        }
        Ok(MatrixA {
            ring: self.ring.clone(),
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// `row[dst] += c * row[src]`, reduced modulo `pi^prec`.
    fn row_axpy(&mut self, dst: usize, src: usize, c: &RingElem, prec: u32) {
        for j in 0..self.cols {
            let s = self.get(src, j);
            if s.is_zero_repr() {
                continue;
            }
            let v = self.get(dst, j).add(&c.mul(s)).reduce_mod_pi(prec);
            self.set(dst, j, v);
        }
    }

    fn col_axpy(&mut self, dst: usize, src: usize, c: &RingElem, prec: u32) {
        for i in 0..self.rows {
            let s = self.get(i, src);
            if s.is_zero_repr() {
                continue;
            }
            let v = self.get(i, dst).add(&c.mul(s)).reduce_mod_pi(prec);
            self.set(i, dst, v);
        }
    }

    fn row_scale(&mut self, r: usize, c: &RingElem, prec: u32) {
        for j in 0..self.cols {
            let v = self.get(r, j).mul(c).reduce_mod_pi(prec);
            self.set(r, j, v);
        }
    }

    fn col_scale(&mut self, col: usize, c: &RingElem, prec: u32) {
        for i in 0..self.rows {
            let v = self.get(i, col).mul(c).reduce_mod_pi(prec);
            self.set(i, col, v);
        }
    }

    /// Valuation of the determinant of a square matrix via its Smith form.
    pub fn det_valuation(&self, prec: u32) -> Option<u32> {
        assert_eq!(self.rows, self.cols);
        let s = snf(self, prec);
        s.diag.iter().try_fold(0u32, |acc, d| d.map(|v| acc + v))
    }

    /// Determinant by fraction-free expansion over the ring; intended for small sizes.
    pub fn det(&self) -> RingElem {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return RingElem::one(&self.ring);
        }
        if n == 1 {
            return self.get(0, 0).clone();
        }
        let mut acc = RingElem::zero(&self.ring);
        for j in 0..n {
            let a = self.get(0, j);
            if a.is_zero_repr() {
                continue;
            }
            let mut minor = Self::zeros(&self.ring, n - 1, n - 1);
            for i in 1..n {
                let mut cc = 0;
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    minor.set(i - 1, cc, self.get(i, k).clone());
                    cc += 1;
                }
            }
            let t = a.mul(&minor.det());
            acc = if j % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
        }
        acc
    }
}

fn vmod(x: &RingElem, prec: u32) -> Option<u32> {
    match x.valuation() {
        Valuation::Finite(v) if v < prec => Some(v),
        _ => None,
    }
}

/// `x / pi^v` as an exact representative; `x` must have valuation at least `v`.
fn div_exact(x: &RingElem, v: u32) -> RingElem {
    x.div_pi_pow(v)
        .expect("quotient by pivot power must be exact")
        .exact()
}

/// Smith normal form data: `u * m * v = diag(pi^{d_0}, pi^{d_1}, ...)` modulo
/// `pi^prec`. Finite divisors come first in nonincreasing order; `None` marks a
/// divisor that vanishes at the working precision.
#[derive(Debug, Clone)]
pub struct Snf {
    pub u: MatrixA,
    pub diag: Vec<Option<u32>>,
    pub v: MatrixA,
    pub prec: u32,
}

/// Nonincreasing list of elementary divisor exponents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElemDivisors(pub Vec<u32>);

impl Snf {
    pub fn divisors(&self) -> Result<ElemDivisors> {
        let mut out = Vec::with_capacity(self.diag.len());
        for d in &self.diag {
            match d {
                Some(v) => out.push(*v),
                None => {
                    return Err(Error::PrecisionExhausted(format!(
                        "elementary divisor beyond precision {}",
                        self.prec
                    )))
                }
            }
        }
        Ok(ElemDivisors(out))
    }

    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|d| d.is_some()).count()
    }
}

/// Smith normal form with full pivoting, working modulo `pi^prec`.
pub fn snf(m: &MatrixA, prec: u32) -> Snf {
    let ring = m.ring().clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.reduce(prec);
    let mut u = MatrixA::identity(&ring, rows);
    let mut v = MatrixA::identity(&ring, cols);
    let mut diag = Vec::new();
    let r = rows.min(cols);
    for t in 0..r {
        let mut best: Option<(u32, usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if let Some(val) = vmod(a.get(i, j), prec) {
                    if best.is_none_or(|(b, _, _)| val < b) {
                        best = Some((val, i, j));
                        if val == 0 {
                            break;
                        }
                    }
                }
            }
            if best.is_some_and(|(b, _, _)| b == 0) {
                break;
            }
        }
        let Some((val, pi_, pj)) = best else {
            diag.extend(std::iter::repeat_n(None, r - t));
            break;
        };
        a.swap_rows(t, pi_);
        u.swap_rows(t, pi_);
        a.swap_cols(t, pj);
        v.swap_cols(t, pj);
        let unit_inv = div_exact(a.get(t, t), val)
            .inv()
            .expect("pivot unit part")
            .exact();
        a.row_scale(t, &unit_inv, prec);
        u.row_scale(t, &unit_inv, prec);
        for i in t + 1..rows {
            if a.get(i, t).is_zero_repr() {
                continue;
            }
            let c = div_exact(a.get(i, t), val).neg();
            a.row_axpy(i, t, &c, prec);
            u.row_axpy(i, t, &c, prec);
        }
        for j in t + 1..cols {
            if a.get(t, j).is_zero_repr() {
                continue;
            }
            let c = div_exact(a.get(t, j), val).neg();
            a.col_axpy(j, t, &c, prec);
            v.col_axpy(j, t, &c, prec);
        }
        diag.push(Some(val));
    }
    // reorder finite divisors to be nonincreasing
    let k = diag.iter().filter(|d| d.is_some()).count();
    for t in 0..k / 2 {
        let s = k - 1 - t;
        diag.swap(t, s);
        u.swap_rows(t, s);
        v.swap_cols(t, s);
    }
    Snf { u, diag, v, prec }
}

/// Full-rank lattice `pi^{-shift} * span(basis)` in `K^d`. The basis is the
/// lower-triangular column Hermite form: column `i` has `pi^{exps[i]}` on the
/// diagonal, zeros above it, and each entry to the left of a diagonal entry is
/// reduced to its canonical representative modulo `pi^{exps[row]}`.
#[derive(Clone, PartialEq, Eq)]
pub struct ALattice {
    basis: MatrixA,
    exps: Vec<u32>,
    shift: u32,
}

impl fmt::Debug for ALattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ALattice(shift {}, exps {:?}) ", self.shift, self.exps)?;
        self.basis.fmt(f)
    }
}

/// Hermite form of the lattice spanned by the columns of `gens` together with
/// `pi^prec A^d`. Exact whenever that lattice already contains `pi^prec A^d`.
pub fn hnf_containing(gens: &MatrixA, prec: u32) -> ALattice {
    let ring = gens.ring().clone();
    let d = gens.rows();
    let mut work: Vec<Vec<RingElem>> = gens
        .columns()
        .into_iter()
        .map(|c| c.into_iter().map(|x| x.reduce_mod_pi(prec)).collect())
        .filter(|c: &Vec<RingElem>| c.iter().any(|x| !x.is_zero_repr()))
        .collect();
    let mut basis = MatrixA::zeros(&ring, d, d);
    let mut exps = vec![0u32; d];
    for i in 0..d {
        let mut best: Option<(u32, usize)> = None;
        for (k, c) in work.iter().enumerate() {
            if let Some(v) = vmod(&c[i], prec) {
                if best.is_none_or(|(b, _)| v < b) {
                    best = Some((v, k));
                    if v == 0 {
                        break;
                    }
                }
            }
        }
        let Some((v, k)) = best else {
            exps[i] = prec;
            basis.set(i, i, RingElem::pi_pow(&ring, prec));
            continue;
        };
        let mut piv = work.swap_remove(k);
        let unit_inv = div_exact(&piv[i], v).inv().expect("pivot unit").exact();
        for x in piv.iter_mut() {
            *x = x.mul(&unit_inv).reduce_mod_pi(prec);
        }
        for c in work.iter_mut() {
            if c[i].is_zero_repr() {
                continue;
            }
            let q = div_exact(&c[i], v).neg();
            for (r, x) in c.iter_mut().enumerate().skip(i) {
                if !piv[r].is_zero_repr() {
                    *x = x.add(&q.mul(&piv[r])).reduce_mod_pi(prec);
                }
            }
        }
        if v > 0 {
            let s = RingElem::pi_pow(&ring, prec - v);
            let extra: Vec<RingElem> = piv.iter().map(|x| x.mul(&s).reduce_mod_pi(prec)).collect();
            if extra.iter().any(|x| !x.is_zero_repr()) {
                work.push(extra);
            }
        }
        work.retain(|c| c.iter().any(|x| !x.is_zero_repr()));
        exps[i] = v;
        for (r, x) in piv.into_iter().enumerate() {
            basis.set(r, i, x);
        }
    }
    // the diagonal is exactly pi^{exps[i]}; entries below are mod pi^prec
    for i in 0..d {
        basis.set(i, i, RingElem::pi_pow(&ring, exps[i]));
    }
    reduce_below(&mut basis, &exps);
    ALattice {
        basis,
        exps,
        shift: 0,
    }
}

/// Reduce off-diagonal entries of a lower-triangular basis modulo the
/// diagonal power in their row.
fn reduce_below(basis: &mut MatrixA, exps: &[u32]) {
    let d = basis.rows();
    for j in 0..d {
        for i in j + 1..d {
            let x = basis.get(i, j).clone();
            let r = x.reduce_mod_pi(exps[i]);
            if r == x {
                continue;
            }
            let t = div_exact(&x.sub(&r), exps[i]);
            let neg = t.neg();
            for k in i..d {
                let b = basis.get(k, i);
                if b.is_zero_repr() {
                    continue;
                }
                let v = basis.get(k, j).add(&neg.mul(b));
                basis.set(k, j, v);
            }
            basis.set(i, j, r);
        }
    }
}

/// Hermite form from generators known to finite precision: the working
/// precision is the smallest entry precision, and the result is only accepted
/// when the lattice visibly has index below it.
pub fn hnf_from_approx(gens: &MatrixA) -> Result<ALattice> {
    let prec = gens.min_prec();
    let l = hnf_containing(gens, prec);
    if l.sum_exps() >= prec as u64 {
        return Err(Error::PrecisionExhausted(format!(
            "generators at precision {prec} do not determine the lattice"
        )));
    }
    Ok(l)
}

/// `{x in A^m : m x = 0 mod pi^c}`.
pub fn congruence_kernel(m: &MatrixA, c: u32) -> ALattice {
    let ring = m.ring().clone();
    let cols = m.cols();
    if c == 0 {
        return ALattice::standard(&ring, cols);
    }
    let s = snf(m, c);
    let mut gens = s.v.clone();
    for j in 0..cols {
        let k = match s.diag.get(j) {
            Some(Some(d)) => c.saturating_sub(*d),
            _ => 0,
        };
        if k > 0 {
            gens.col_scale(j, &RingElem::pi_pow(&ring, k), c + 1);
        }
    }
    hnf_containing(&gens, c)
}

/// `pi^dmax * S^{-1}` for a nondegenerate square `S`, valid modulo
/// `pi^{prec - dmax}`, together with `dmax`.
pub fn scaled_inverse(s: &MatrixA, prec: u32) -> Result<(MatrixA, u32)> {
    let sn = snf(s, prec);
    let divs = sn.divisors().map_err(|_| Error::DegenerateForm)?;
    let dmax = divs.0.iter().copied().max().unwrap_or(0);
    let ring = s.ring().clone();
    let n = s.rows();
    let mut mid = MatrixA::zeros(&ring, n, n);
    for (i, d) in divs.0.iter().enumerate() {
        mid.set(i, i, RingElem::pi_pow(&ring, dmax - d));
    }
    let w = sn.v.mul(&mid).mul(&sn.u).reduce(prec);
    Ok((w, dmax))
}

impl ALattice {
    /// `A^d`.
    pub fn standard(ring: &Ring, d: usize) -> Self {
        ALattice {
            basis: MatrixA::identity(ring, d),
            exps: vec![0; d],
            shift: 0,
        }
    }

    /// `pi^k A^d`.
    pub fn scalar(ring: &Ring, d: usize, k: u32) -> Self {
        let mut basis = MatrixA::zeros(ring, d, d);
        for i in 0..d {
            basis.set(i, i, RingElem::pi_pow(ring, k));
        }
        ALattice {
            basis,
            exps: vec![k; d],
            shift: 0,
        }
    }

    /// Lattice spanned by full-rank generators; `bound` must be at least the
    /// valuation of some maximal minor, e.g. of the determinant of a basis.
    pub fn from_generators(gens: &MatrixA, bound: u32) -> Result<Self> {
        let l = hnf_containing(gens, bound);
        if bound > 0 && l.exps.contains(&bound) && gens.rows() > 0 {
            let s = snf(gens, bound + 1);
            if s.rank() < gens.rows() {
                return Err(Error::RankDeficient(
                    "generators do not span a full-rank lattice".into(),
                ));
            }
        }
        Ok(l)
    }

    /// Lattice `pi^{-shift} * span(gens)` where `span(gens)` contains `pi^bound A^d`.
    pub fn from_generators_shifted(gens: &MatrixA, bound: u32, shift: u32) -> Self {
        let mut l = hnf_containing(gens, bound);
        l.shift = shift;
        l.normalize_shift();
        l
    }

    pub fn ring(&self) -> &Ring {
        self.basis.ring()
    }
    pub fn dim(&self) -> usize {
        self.exps.len()
    }
    pub fn basis(&self) -> &MatrixA {
        &self.basis
    }
    pub fn exps(&self) -> &[u32] {
        &self.exps
    }
    pub fn shift(&self) -> u32 {
        self.shift
    }
    pub fn sum_exps(&self) -> u64 {
        self.exps.iter().map(|&x| x as u64).sum()
    }

    /// Basis vectors of the lattice itself (scaled by `pi^{-shift}` implicitly):
    /// returns the integral columns of `pi^shift * L`.
    pub fn columns(&self) -> Vec<Vec<RingElem>> {
        self.basis.columns()
    }

    /// Exponent of `q` in `#(A^d / L)`, negative when `L` is larger than `A^d`
    /// in volume.
    pub fn volume_exp(&self) -> i64 {
        self.sum_exps() as i64 - self.shift as i64 * self.dim() as i64
    }

    fn normalize_shift(&mut self) {
        while self.shift > 0 && self.basis.min_valuation().unwrap_or(0) >= 1 {
            let gens = self.basis.div_pi_pow(1).expect("divisible");
            let bound = self.exponent().saturating_sub(1);
            let shift = self.shift - 1;
            *self = hnf_containing(&gens, bound.max(1));
            self.shift = shift;
        }
    }

    /// `pi^k L` for any integer `k`.
    pub fn scaled(&self, k: i64) -> Self {
        let ring = self.ring().clone();
        if k <= 0 {
            let mut l = self.clone();
            l.shift += (-k) as u32;
            l.normalize_shift();
            return l;
        }
        let k = k as u32;
        let absorb = k.min(self.shift);
        let extra = k - absorb;
        let gens = self.basis.scale(&RingElem::pi_pow(&ring, extra));
        let bound = self.exponent() + extra;
        let mut l = hnf_containing(&gens, bound.max(1));
        l.shift = self.shift - absorb;
        l.normalize_shift();
        l
    }

    /// Integral generators `pi^s L` for a common shift `s >= self.shift`.
    fn integral_at(&self, s: u32) -> (MatrixA, u32) {
        let k = s - self.shift;
        let ring = self.ring();
        let gens = self.basis.scale(&RingElem::pi_pow(ring, k));
        (gens, self.exponent() + k)
    }

    /// Coordinates `c` of an integral vector with `pi^shift x = B c`.
    pub fn coordinates(&self, x: &[RingElem]) -> Option<Vec<RingElem>> {
        let ring = self.ring().clone();
        assert_eq!(x.len(), self.dim());
        let s = RingElem::pi_pow(&ring, self.shift);
        self.solve(x.iter().map(|a| a.mul(&s)).collect())
    }

    /// Smallest `D` with `pi^D A^d ⊆ span(B)`: the exponent of `A^d / pi^shift L`.
    pub fn exponent(&self) -> u32 {
        let ring = self.ring().clone();
        let d = self.dim();
        let lo = self.exps.iter().copied().max().unwrap_or(0);
        let hi = self.sum_exps() as u32;
        (lo..hi)
            .find(|&k| {
                let pk = RingElem::pi_pow(&ring, k);
                (0..d).all(|j| {
                    let mut y = vec![RingElem::zero(&ring); d];
                    y[j] = pk.clone();
                    self.solve(y).is_some()
                })
            })
            .unwrap_or(hi)
    }

    /// Back substitution `B c = r` with integral `c`.
    fn solve(&self, mut r: Vec<RingElem>) -> Option<Vec<RingElem>> {
        let d = self.dim();
        let mut c = Vec::with_capacity(d);
        for i in 0..d {
            let ei = self.exps[i];
            if r[i].val_lb() < ei {
                return None;
            }
            let ci = r[i].div_pi_pow(ei).ok()?;
            for k in i..d {
                let b = self.basis.get(k, i);
                if !b.is_zero_repr() {
                    r[k] = r[k].sub(&ci.mul(b));
                }
            }
            c.push(ci);
        }
        Some(c)
    }

    /// `pi^D B^{-1} pi^shift x`, i.e. coordinates of `pi^D x`.
    pub fn scaled_coordinates(&self, x: &[RingElem], dd: u32) -> Option<Vec<RingElem>> {
        let ring = self.ring().clone();
        let s = RingElem::pi_pow(&ring, dd);
        let y: Vec<RingElem> = x.iter().map(|a| a.mul(&s)).collect();
        self.coordinates(&y)
    }

    pub fn member(&self, x: &[RingElem]) -> bool {
        self.coordinates(x).is_some()
    }

    /// Is `self` contained in `other`?
    pub fn is_sublattice_of(&self, other: &ALattice) -> bool {
        let s = self.shift.max(other.shift);
        let (mine, _) = self.integral_at(s);
        let (theirs, bound) = other.integral_at(s);
        let o = hnf_containing(&theirs, bound);
        mine.columns().iter().all(|c| o.member(c))
    }

    /// Exponent `k` with `#(self / sub) = q^k`.
    pub fn index_of(&self, sub: &ALattice) -> Result<i64> {
        if !sub.is_sublattice_of(self) {
            return Err(Error::NotSublattice("index of a non-sublattice".into()));
        }
        Ok(sub.volume_exp() - self.volume_exp())
    }

    pub fn intersection(&self, other: &ALattice) -> ALattice {
        let ring = self.ring().clone();
        let d = self.dim();
        let s = self.shift.max(other.shift);
        let (bm, cm) = self.integral_at(s);
        let (bn, cn) = other.integral_at(s);
        let c = cm.max(cn).max(1);
        let mut joint = MatrixA::zeros(&ring, d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                joint.set(i, j, bm.get(i, j).clone());
                joint.set(i, d + j, bn.get(i, j).neg());
            }
        }
        let ker = congruence_kernel(&joint, c);
        let mut gens = Vec::new();
        for col in ker.columns() {
            gens.push(bm.mul_vec(&col[..d]));
        }
        let g = MatrixA::from_cols(&ring, d, &gens);
        let mut l = hnf_containing(&g, c);
        l.shift = s;
        l.normalize_shift();
        l
    }

    pub fn sum(&self, other: &ALattice) -> ALattice {
        let ring = self.ring().clone();
        let d = self.dim();
        let s = self.shift.max(other.shift);
        let (bm, cm) = self.integral_at(s);
        let (bn, cn) = other.integral_at(s);
        let mut cols = bm.columns();
        cols.extend(bn.columns());
        let g = MatrixA::from_cols(&ring, d, &cols);
        let mut l = hnf_containing(&g, cm.min(cn).max(1));
        l.shift = s;
        l.normalize_shift();
        l
    }
}

/// Index exponent `k` with `#(m / n) = q^k`.
pub fn lattice_index(m: &ALattice, n: &ALattice) -> Result<i64> {
    m.index_of(n)
}

/// `{x in source : phi(x) in sum_t pi^{targets[t]} A e_t}` for an additive,
/// `pi`-adically continuous map `phi: A^d -> A^k`. The map is evaluated on the
/// `Z_p`-basis `pi^a y^j b` of the source, flattened to a `Z_p`-matrix, and the
/// kernel is computed over `Z_p`. The result is returned as an `A`-lattice and
/// the `A`-module property is verified by comparing indices.
pub fn zp_kernel<F>(source: &ALattice, targets: &[u32], phi: F) -> Result<ALattice>
where
    F: Fn(&[RingElem]) -> Result<Vec<RingElem>>,
{
    let ring = source.ring().clone();
    let (e, f) = (ring.e(), ring.f());
    let d = source.dim();
    assert_eq!(source.shift(), 0, "zp_kernel expects an integral source");
    let kout = targets.len();
    let cmax = targets.iter().copied().max().unwrap_or(0);
    if cmax == 0 {
        return Ok(source.clone());
    }
    let big_c = cmax.div_ceil(e as u32);
    let zpr = crate::ring::zp(ring.p())?;
    let p = ring.p();
    let mut pow_p = vec![1u64];
    for _ in 0..=big_c {
        pow_p.push(pow_p.last().unwrap().saturating_mul(p));
    }
    // Z_p basis of the source
    let mut zbasis: Vec<Vec<RingElem>> = Vec::with_capacity(d * e * f);
    let ys: Vec<RingElem> = (0..f)
        .map(|j| {
            let mut c = vec![0i64; e * f];
            c[j] = 1;
            RingElem::from_coeffs(&ring, &c, ring.max_prec())
        })
        .collect();
    let pis: Vec<RingElem> = (0..e as u32).map(|a| RingElem::pi_pow(&ring, a)).collect();
    for b in source.columns() {
        for pa in &pis {
            for yj in &ys {
                let t = pa.mul(yj);
                zbasis.push(b.iter().map(|x| x.mul(&t)).collect());
            }
        }
    }
    let nz = zbasis.len();
    let nrows = kout * e * f;
    let mut mat = MatrixA::zeros(&zpr, nrows, nz);
    for (col, v) in zbasis.iter().enumerate() {
        let img = phi(v)?;
        assert_eq!(img.len(), kout);
        for (t, y) in img.iter().enumerate() {
            let c = targets[t];
            let y = y.reduce_mod_pi(c);
            for (idx, (val, _)) in y.flatten().into_iter().enumerate() {
                let i = idx / f;
                let need = (c as usize).saturating_sub(i).div_ceil(e) as u32;
                let scale = pow_p[(big_c - need) as usize];
                let v = RingElem::from_int(&zpr, (val % pow_p[need as usize]) as i64)
                    .mul(&RingElem::from_int(&zpr, scale as i64));
                mat.set(t * e * f + idx, col, v);
            }
        }
    }
    let zker = congruence_kernel(&mat, big_c);
    let zp_index = zker.sum_exps();
    let mut gens = Vec::with_capacity(zker.dim());
    for g in zker.columns() {
        let mut x = vec![RingElem::zero(&ring); d];
        for (k, coef) in g.iter().enumerate() {
            if coef.is_zero_repr() {
                continue;
            }
            let c = RingElem::from_int(&ring, coef.coeffs()[0] as i64);
            for r in 0..d {
                x[r] = x[r].add(&c.mul(&zbasis[k][r]));
            }
        }
        gens.push(x);
    }
    let bound = e as u32 * big_c + source.exponent();
    let g = MatrixA::from_cols(&ring, d, &gens);
    let ker = hnf_containing(&g, bound);
    let a_index = ker.sum_exps() - source.sum_exps();
    if zp_index != f as u64 * a_index {
        return Err(Error::NotAModule(format!(
            "Z_p-index p^{zp_index} differs from A-index q^{a_index}"
        )));
    }
    Ok(ker)
}
