//! Finite-precision arithmetic in the ring of integers `A` of a finite
//! extension of `Q_p`, presented as a tower `W[x]/(E(x))` with `W = Z_p[y]/(g(y))`
//! unramified of degree `f` and `E` Eisenstein of degree `e`.
//!
//! Elements store `e*f` integer coefficients (coefficient of `pi^i y^j` at index
//! `i*f + j`) modulo `p^K`, together with an absolute pi-adic precision: the
//! element is known modulo `pi^prec`. Coefficients beyond the precision are kept
//! at zero, which makes the representation canonical.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Ring = Arc<RingSpec>;

type Coeffs = SmallVec<[u64; 8]>;

/// Serializable description of a ring: `{p, f, e, unram_poly, eis_poly}`.
/// Polynomials are listed lowest degree first; every coefficient of the
/// Eisenstein polynomial is itself an element of `W` given by its `y`-coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingRecord {
    pub p: u64,
    pub f: usize,
    pub e: usize,
    pub unram_poly: Vec<i64>,
    pub eis_poly: Vec<Vec<i64>>,
}

#[derive(Debug)]
pub struct RingSpec {
    p: u64,
    f: usize,
    e: usize,
    unram_poly: Vec<i64>,
    eis_poly: Vec<Vec<i64>>,
    digits: u32,
    modulus: u64,
    pow_p: Vec<u64>,
    /// `y^f = sum_j y_red[j] y^j`
    y_red: Vec<u64>,
    /// `pi^e = sum_i pi_red[i] pi^i`, each a `W` element
    pi_red: Vec<Vec<u64>>,
    /// `pi^e = p * eps`
    eps: Coeffs,
    eps_inv: Coeffs,
    residue: Arc<ResidueField>,
}

impl PartialEq for RingSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.f == other.f
            && self.e == other.e
            && self.unram_poly == other.unram_poly
            && self.eis_poly == other.eis_poly
    }
}

impl Eq for RingSpec {}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn vp_u64(mut x: u64, p: u64) -> u32 {
    debug_assert!(x != 0);
    let mut v = 0;
    if p == 2 {
        return x.trailing_zeros();
    }
    while x.is_multiple_of(p) {
        x /= p;
        v += 1;
    }
    v
}

fn mod_i64(x: i64, m: u64) -> u64 {
    let r = (x as i128).rem_euclid(m as i128);
    r as u64
}

/// Polynomials over `F_p`, lowest degree first, trailing zeros trimmed.
fn poly_trim(mut a: Vec<u64>) -> Vec<u64> {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
    a
}

fn poly_rem_fp(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = poly_trim(a.to_vec());
    let b = poly_trim(b.to_vec());
    let db = b.len() - 1;
    let lead_inv = pow_mod(b[db], p - 2, p);
    while r.len() > db && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let c = r[dr] * lead_inv % p;
        for i in 0..=db {
            let idx = dr - db + i;
            r[idx] = (r[idx] + p * p - c * b[i] % p) % p;
        }
        r = poly_trim(r);
        if r.len() - 1 < db || (r.len() == 1 && r[0] == 0) {
            break;
        }
    }
    r
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    r
}

/// Irreducibility over `F_p` by trial division with every monic polynomial of
/// degree at most half the degree.
pub fn is_irreducible_mod_p(poly: &[i64], p: u64) -> bool {
    let a: Vec<u64> = poly.iter().map(|&c| mod_i64(c, p)).collect();
    let a = poly_trim(a);
    let n = a.len() - 1;
    if n == 0 {
        return false;
    }
    for d in 1..=n / 2 {
        let count = p.pow(d as u32);
        for idx in 0..count {
            let mut b = vec![0u64; d + 1];
            let mut t = idx;
            for c in b.iter_mut().take(d) {
                *c = t % p;
                t /= p;
            }
            b[d] = 1;
            let r = poly_rem_fp(&a, &b, p);
            if r.iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

/// Smallest monic irreducible polynomial of degree `f` over `F_p`, ordered by
/// its lower coefficients read as a base-`p` number.
pub fn default_unram_poly(p: u64, f: usize) -> Vec<i64> {
    if f == 1 {
        return vec![0, 1];
    }
    let count = p.pow(f as u32);
    for idx in 0..count {
        let mut poly = vec![0i64; f + 1];
        let mut t = idx;
        for c in poly.iter_mut().take(f) {
            *c = (t % p) as i64;
            t /= p;
        }
        poly[f] = 1;
        if is_irreducible_mod_p(&poly, p) {
            return poly;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// Ring of integers with default unramified polynomial.
pub fn make_ring(p: u64, f: usize, e: usize, eis_coeffs: &[Vec<i64>]) -> Result<Ring> {
    make_ring_with(p, f, e, &default_unram_poly(p, f.max(1)), eis_coeffs)
}

/// Convenience for the common `f = 1` case with integer Eisenstein coefficients.
pub fn make_ring_int(p: u64, e: usize, eis_coeffs: &[i64]) -> Result<Ring> {
    let coeffs: Vec<Vec<i64>> = eis_coeffs.iter().map(|&c| vec![c]).collect();
    make_ring(p, 1, e, &coeffs)
}

/// `Z_p` itself, uniformizer `p`.
pub fn zp(p: u64) -> Result<Ring> {
    make_ring_int(p, 1, &[-(p as i64), 1])
}

pub fn make_ring_with(
    p: u64,
    f: usize,
    e: usize,
    unram_poly: &[i64],
    eis_coeffs: &[Vec<i64>],
) -> Result<Ring> {
    if !is_prime(p) {
        return Err(Error::InvalidRing(format!("{p} is not prime")));
    }
    if f == 0 || e == 0 {
        return Err(Error::InvalidRing("f and e must be at least 1".into()));
    }
    if unram_poly.len() != f + 1 || mod_i64(unram_poly[f], p) == 0 {
        return Err(Error::InvalidRing(format!(
            "unramified polynomial must have degree {f}"
        )));
    }
    if !is_irreducible_mod_p(unram_poly, p) {
        return Err(Error::ReduciblePolynomial(format!("{unram_poly:?}")));
    }
    if eis_coeffs.len() != e + 1 {
        return Err(Error::NonEisenstein(format!(
            "expected {} coefficients, got {}",
            e + 1,
            eis_coeffs.len()
        )));
    }
    // largest K with p^K < 2^62
    let mut digits = 0u32;
    let mut modulus: u64 = 1;
    while (modulus as u128) * (p as u128) < (1u128 << 62) {
        modulus *= p;
        digits += 1;
    }
    if digits < 4 {
        return Err(Error::InvalidRing(format!("prime {p} too large for storage")));
    }
    let mut pow_p = vec![1u64];
    for _ in 0..digits {
        pow_p.push(pow_p.last().unwrap() * p);
    }
    let residue = Arc::new(ResidueField::new(p, f, unram_poly));

    // y^f = -(g_0 + ... + g_{f-1} y^{f-1}) / g_f ; g_f is a unit mod p
    let gf_inv = inv_mod_pk(mod_i64(unram_poly[f], modulus), p, modulus)
        .ok_or_else(|| Error::InvalidRing("unramified leading coefficient".into()))?;
    let y_red: Vec<u64> = (0..f)
        .map(|j| {
            let c = mod_i64(-unram_poly[j], modulus);
            ((c as u128 * gf_inv as u128) % modulus as u128) as u64
        })
        .collect();

    let mut spec = RingSpec {
        p,
        f,
        e,
        unram_poly: unram_poly.to_vec(),
        eis_poly: eis_coeffs
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.resize(f, 0);
                c
            })
            .collect(),
        digits,
        modulus,
        pow_p,
        y_red,
        pi_red: Vec::new(),
        eps: Coeffs::new(),
        eps_inv: Coeffs::new(),
        residue,
    };
    for c in &spec.eis_poly {
        if c.len() > f {
            return Err(Error::NonEisenstein("coefficient outside W".into()));
        }
    }
    let w_of = |c: &Vec<i64>| -> Vec<u64> { c.iter().map(|&x| mod_i64(x, modulus)).collect() };
    // Eisenstein checks
    let lead = w_of(&spec.eis_poly[e]);
    if lead.iter().all(|&c| c % p == 0) {
        return Err(Error::NonEisenstein("leading coefficient is not a unit".into()));
    }
    for i in 0..e {
        let c = &spec.eis_poly[i];
        if c.iter().any(|&x| x.rem_euclid(p as i64) != 0) {
            return Err(Error::NonEisenstein(format!(
                "coefficient of x^{i} is not divisible by p"
            )));
        }
    }
    let c0 = &spec.eis_poly[0];
    if c0.iter().all(|&x| (x / p as i64).rem_euclid(p as i64) == 0) {
        return Err(Error::NonEisenstein(
            "constant coefficient must have valuation exactly 1".into(),
        ));
    }
    // normalize to monic: pi^e = -lead^{-1} * sum_{i<e} a_i pi^i
    let lead_inv = spec.w_inv(&lead).ok_or(Error::NonUnitInverse)?;
    let mut pi_red = Vec::with_capacity(e);
    for i in 0..e {
        let a = w_of(&spec.eis_poly[i]);
        let t = spec.w_mul(&a, &lead_inv);
        pi_red.push(t.iter().map(|&x| (modulus - x) % modulus).collect::<Vec<u64>>());
    }
    spec.pi_red = pi_red;
    // eps = pi^e / p computed from the exact integer data: -lead^{-1} (a_i / p)
    let mut eps = Coeffs::from_elem(0, e * f);
    for i in 0..e {
        let a_div: Vec<u64> = spec.eis_poly[i]
            .iter()
            .map(|&x| mod_i64(x / p as i64, modulus))
            .collect();
        let t = spec.w_mul(&a_div, &lead_inv);
        for j in 0..f {
            eps[i * f + j] = (modulus - t[j]) % modulus;
        }
    }
    spec.eps = eps;
    let eps_inv = spec.raw_unit_inverse(&spec.eps);
    spec.eps_inv = eps_inv;
    Ok(Arc::new(spec))
}

fn inv_mod_pk(a: u64, p: u64, m: u64) -> Option<u64> {
    if a.is_multiple_of(p) {
        return None;
    }
    // extended Euclid on i128
    let (mut t, mut new_t) = (0i128, 1i128);
    let (mut r, mut new_r) = (m as i128, a as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    if r != 1 {
        return None;
    }
    Some(t.rem_euclid(m as i128) as u64)
}

impl RingSpec {
    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn f(&self) -> usize {
        self.f
    }
    pub fn e(&self) -> usize {
        self.e
    }
    /// Cardinality of the residue field.
    pub fn q(&self) -> u64 {
        self.p.pow(self.f as u32)
    }
    pub fn degree(&self) -> usize {
        self.e * self.f
    }
    pub fn unram_poly(&self) -> &[i64] {
        &self.unram_poly
    }
    pub fn eis_poly(&self) -> &[Vec<i64>] {
        &self.eis_poly
    }
    pub fn residue_field(&self) -> &Arc<ResidueField> {
        &self.residue
    }
    /// Largest absolute pi-adic precision an element can carry.
    pub fn max_prec(&self) -> u32 {
        self.e as u32 * (self.digits - 1)
    }
    /// `e'` with `e = 2e'` or `e = 2e' - 1`.
    pub fn e_prime(&self) -> usize {
        self.e.div_ceil(2)
    }
    /// `v_pi(2)`.
    pub fn v2(&self) -> u32 {
        if self.p == 2 {
            self.e as u32
        } else {
            0
        }
    }

    pub fn record(&self) -> RingRecord {
        RingRecord {
            p: self.p,
            f: self.f,
            e: self.e,
            unram_poly: self.unram_poly.clone(),
            eis_poly: self.eis_poly.clone(),
        }
    }

    pub fn from_record(r: &RingRecord) -> Result<Ring> {
        make_ring_with(r.p, r.f, r.e, &r.unram_poly, &r.eis_poly)
    }

    #[inline]
    fn mulmod(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }

    #[inline]
    fn addmod(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline]
    fn submod(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    fn w_mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let f = self.f;
        if f == 1 {
            return vec![self.mulmod(a[0], b[0])];
        }
        let mut prod = vec![0u64; 2 * f - 1];
        for i in 0..f {
            if a[i] == 0 {
                continue;
            }
            for j in 0..f {
                prod[i + j] = self.addmod(prod[i + j], self.mulmod(a[i], b[j]));
            }
        }
        for t in (f..2 * f - 1).rev() {
            let c = prod[t];
            if c == 0 {
                continue;
            }
            prod[t] = 0;
            for j in 0..f {
                let idx = t - f + j;
                prod[idx] = self.addmod(prod[idx], self.mulmod(c, self.y_red[j]));
            }
        }
        prod.truncate(f);
        prod
    }

    fn w_inv(&self, a: &[u64]) -> Option<Vec<u64>> {
        // residue inverse then Newton
        let rf = &self.residue;
        let r = rf.from_digits(&a.iter().map(|&x| (x % self.p) as u32).collect::<Vec<_>>());
        if r == 0 {
            return None;
        }
        let rinv = rf.inv(r);
        let mut y: Vec<u64> = rf.digits(rinv).iter().map(|&d| d as u64).collect();
        for _ in 0..=(64 - (self.digits as u64).leading_zeros()) {
            let ay = self.w_mul(a, &y);
            let mut two_minus = vec![0u64; self.f];
            for j in 0..self.f {
                two_minus[j] = self.submod(if j == 0 { 2 % self.modulus } else { 0 }, ay[j]);
            }
            y = self.w_mul(&y, &two_minus);
        }
        Some(y)
    }

    fn raw_mul(&self, a: &[u64], b: &[u64]) -> Coeffs {
        let (e, f) = (self.e, self.f);
        if e == 1 && f == 1 {
            return smallvec::smallvec![self.mulmod(a[0], b[0])];
        }
        let mut prod: Vec<Vec<u64>> = vec![vec![0u64; f]; 2 * e - 1];
        for i in 0..e {
            let ai = &a[i * f..(i + 1) * f];
            if ai.iter().all(|&x| x == 0) {
                continue;
            }
            for j in 0..e {
                let bj = &b[j * f..(j + 1) * f];
                if bj.iter().all(|&x| x == 0) {
                    continue;
                }
                let t = self.w_mul(ai, bj);
                for k in 0..f {
                    prod[i + j][k] = self.addmod(prod[i + j][k], t[k]);
                }
            }
        }
        for t in (e..2 * e - 1).rev() {
            let c = std::mem::replace(&mut prod[t], vec![0u64; f]);
            if c.iter().all(|&x| x == 0) {
                continue;
            }
            for i in 0..e {
                let add = self.w_mul(&c, &self.pi_red[i]);
                let idx = t - e + i;
                for k in 0..f {
                    prod[idx][k] = self.addmod(prod[idx][k], add[k]);
                }
            }
        }
        let mut out = Coeffs::with_capacity(e * f);
        for row in prod.iter().take(e) {
            out.extend_from_slice(row);
        }
        out
    }

    fn raw_unit_inverse(&self, a: &[u64]) -> Coeffs {
        let rf = &self.residue;
        let r = rf.from_digits(&(0..self.f).map(|j| (a[j] % self.p) as u32).collect::<Vec<_>>());
        let rinv = rf.inv(r);
        let mut y = Coeffs::from_elem(0, self.e * self.f);
        for (j, d) in rf.digits(rinv).iter().enumerate() {
            y[j] = *d as u64;
        }
        let iters = 64 - ((self.e as u64 * self.digits as u64).leading_zeros()) + 1;
        for _ in 0..iters {
            let ay = self.raw_mul(a, &y);
            let mut two_minus = Coeffs::from_elem(0, self.e * self.f);
            for (k, v) in ay.iter().enumerate() {
                two_minus[k] = self.submod(if k == 0 { 2 % self.modulus } else { 0 }, *v);
            }
            y = self.raw_mul(&y, &two_minus);
        }
        y
    }

    /// Number of p-adic digits kept for the coefficient of `pi^i` at precision `prec`.
    #[inline]
    fn digits_at(&self, prec: u32, i: usize) -> u32 {
        let i = i as u32;
        if prec <= i {
            0
        } else {
            (prec - i).div_ceil(self.e as u32).min(self.digits)
        }
    }

    fn canonicalize(&self, c: &mut [u64], prec: u32) {
        for i in 0..self.e {
            let k = self.digits_at(prec, i);
            let m = self.pow_p[k as usize];
            for j in 0..self.f {
                let x = &mut c[i * self.f + j];
                if k == 0 {
                    *x = 0;
                } else if m != self.modulus {
                    *x %= m;
                }
            }
        }
    }
}

/// pi-adic valuation of an element known to finite precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Valuation {
    Finite(u32),
    BelowPrecision,
}

impl Valuation {
    pub fn finite(self) -> Option<u32> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::BelowPrecision => None,
        }
    }
}

#[derive(Clone)]
pub struct RingElem {
    ring: Ring,
    coeffs: Coeffs,
    prec: u32,
}

impl PartialEq for RingElem {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.ring, &other.ring) || self.ring == other.ring)
            && self.prec == other.prec
            && self.coeffs == other.coeffs
    }
}

impl Eq for RingElem {}

impl std::hash::Hash for RingElem {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.prec.hash(state);
        self.coeffs.hash(state);
    }
}

impl RingElem {
    fn from_raw(ring: &Ring, mut coeffs: Coeffs, prec: u32) -> Self {
        let prec = prec.min(ring.max_prec());
        ring.canonicalize(&mut coeffs, prec);
        RingElem {
            ring: ring.clone(),
            coeffs,
            prec,
        }
    }

    pub fn zero(ring: &Ring) -> Self {
        Self::zero_prec(ring, ring.max_prec())
    }

    pub fn zero_prec(ring: &Ring, prec: u32) -> Self {
        Self::from_raw(ring, Coeffs::from_elem(0, ring.degree()), prec)
    }

    pub fn one(ring: &Ring) -> Self {
        Self::from_int(ring, 1)
    }

    pub fn from_int(ring: &Ring, v: i64) -> Self {
        let mut c = Coeffs::from_elem(0, ring.degree());
        c[0] = mod_i64(v, ring.modulus);
        Self::from_raw(ring, c, ring.max_prec())
    }

    /// Element of `W` from its `y`-coefficients.
    pub fn from_w(ring: &Ring, w: &[i64]) -> Self {
        let mut c = Coeffs::from_elem(0, ring.degree());
        for (j, &x) in w.iter().enumerate().take(ring.f) {
            c[j] = mod_i64(x, ring.modulus);
        }
        Self::from_raw(ring, c, ring.max_prec())
    }

    /// Element from a `(pi-power, y-power) -> integer` coefficient table.
    pub fn from_coeffs(ring: &Ring, coeffs: &[i64], prec: u32) -> Self {
        let mut c = Coeffs::from_elem(0, ring.degree());
        for (k, &x) in coeffs.iter().enumerate().take(ring.degree()) {
            c[k] = mod_i64(x, ring.modulus);
        }
        Self::from_raw(ring, c, prec)
    }

    pub fn y(ring: &Ring) -> Self {
        if ring.f == 1 {
            // y generates nothing new; it is a root of g mod p lifted
            let c = mod_i64(-ring.unram_poly[0], ring.modulus);
            let mut coeffs = Coeffs::from_elem(0, ring.degree());
            coeffs[0] = c;
            return Self::from_raw(ring, coeffs, ring.max_prec());
        }
        let mut c = Coeffs::from_elem(0, ring.degree());
        c[1] = 1;
        Self::from_raw(ring, c, ring.max_prec())
    }

    pub fn pi(ring: &Ring) -> Self {
        if ring.e == 1 {
            let mut c = Coeffs::from_elem(0, ring.degree());
            c[..ring.f].copy_from_slice(&ring.pi_red[0]);
            return Self::from_raw(ring, c, ring.max_prec());
        }
        let mut c = Coeffs::from_elem(0, ring.degree());
        c[ring.f] = 1;
        Self::from_raw(ring, c, ring.max_prec())
    }

    pub fn pi_pow(ring: &Ring, k: u32) -> Self {
        let mut r = Self::one(ring);
        let pi = Self::pi(ring);
        for _ in 0..k {
            r = &r * &pi;
        }
        r.with_prec(ring.max_prec())
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Truncate to a lower precision (never raises it).
    pub fn truncate(&self, prec: u32) -> Self {
        Self::from_raw(&self.ring, self.coeffs.clone(), prec.min(self.prec))
    }

    /// Regard the current representative as known to precision `prec`. Valid
    /// whenever any lift of the element is acceptable, e.g. as a coefficient of
    /// a unimodular operation.
    pub fn with_prec(&self, prec: u32) -> Self {
        Self::from_raw(&self.ring, self.coeffs.clone(), prec)
    }

    pub fn exact(&self) -> Self {
        self.with_prec(self.ring.max_prec())
    }

    pub fn valuation(&self) -> Valuation {
        let (e, f) = (self.ring.e, self.ring.f);
        let mut best: Option<u32> = None;
        for i in 0..e {
            for j in 0..f {
                let c = self.coeffs[i * f + j];
                if c != 0 {
                    let v = e as u32 * vp_u64(c, self.ring.p) + i as u32;
                    best = Some(best.map_or(v, |b| b.min(v)));
                }
            }
        }
        match best {
            Some(v) if v < self.prec => Valuation::Finite(v),
            _ => Valuation::BelowPrecision,
        }
    }

    /// Valuation, or the precision when the element is zero at precision:
    /// a lower bound on the true valuation in all cases.
    pub fn val_lb(&self) -> u32 {
        match self.valuation() {
            Valuation::Finite(v) => v,
            Valuation::BelowPrecision => self.prec,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.valuation() == Valuation::BelowPrecision
    }

    pub fn is_unit(&self) -> bool {
        self.valuation() == Valuation::Finite(0)
    }

    /// Exact representative equals zero (all digits vanish).
    pub fn is_zero_repr(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let r = &self.ring;
        let c: Coeffs = self
            .coeffs
            .iter()
            .zip(o.coeffs.iter())
            .map(|(&a, &b)| r.addmod(a, b))
            .collect();
        Self::from_raw(r, c, self.prec.min(o.prec))
    }

    pub fn sub(&self, o: &Self) -> Self {
        let r = &self.ring;
        let c: Coeffs = self
            .coeffs
            .iter()
            .zip(o.coeffs.iter())
            .map(|(&a, &b)| r.submod(a, b))
            .collect();
        Self::from_raw(r, c, self.prec.min(o.prec))
    }

    pub fn neg(&self) -> Self {
        let r = &self.ring;
        let c: Coeffs = self.coeffs.iter().map(|&a| r.submod(0, a)).collect();
        Self::from_raw(r, c, self.prec)
    }

    pub fn mul(&self, o: &Self) -> Self {
        let r = &self.ring;
        let c = r.raw_mul(&self.coeffs, &o.coeffs);
        let prec = (self.prec.saturating_add(o.val_lb())).min(o.prec.saturating_add(self.val_lb()));
        Self::from_raw(r, c, prec)
    }

    pub fn mul_int(&self, k: i64) -> Self {
        self.mul(&Self::from_int(&self.ring, k))
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    pub fn pow(&self, mut k: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.ring);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    /// Inverse of a unit, at the same precision.
    pub fn inv(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::NonUnitInverse);
        }
        let c = self.ring.raw_unit_inverse(&self.coeffs);
        Ok(Self::from_raw(&self.ring, c, self.prec))
    }

    /// Exact division by `pi`; requires valuation at least 1.
    pub fn div_pi(&self) -> Result<Self> {
        let r = &self.ring;
        if self.prec == 0 {
            return Ok(self.clone());
        }
        if self.val_lb() < 1 {
            return Err(Error::PrecisionExhausted(
                "division by pi of a unit".into(),
            ));
        }
        let (e, f) = (r.e, r.f);
        let mut out = Coeffs::from_elem(0, e * f);
        for i in 1..e {
            for j in 0..f {
                out[(i - 1) * f + j] = self.coeffs[i * f + j];
            }
        }
        // c0 / pi = (c0 / p) * pi^(e-1) * eps^{-1}
        let mut c0 = Coeffs::from_elem(0, e * f);
        for j in 0..f {
            debug_assert!(self.coeffs[j].is_multiple_of(r.p));
            c0[(e - 1) * f + j] = self.coeffs[j] / r.p;
        }
        let t = r.raw_mul(&c0, &r.eps_inv);
        for k in 0..e * f {
            out[k] = r.addmod(out[k], t[k]);
        }
        Ok(Self::from_raw(r, out, self.prec - 1))
    }

    pub fn div_pi_pow(&self, k: u32) -> Result<Self> {
        let mut x = self.clone();
        for _ in 0..k {
            x = x.div_pi()?;
        }
        Ok(x)
    }

    pub fn mul_pi_pow(&self, k: u32) -> Self {
        if k == 0 {
            return self.clone();
        }
        self.mul(&Self::pi_pow(&self.ring, k))
    }

    /// Exact division by `p`.
    pub fn div_p(&self) -> Result<Self> {
        let x = self.div_pi_pow(self.ring.e as u32)?;
        let eps = Self::from_raw(&self.ring, self.ring.eps.clone(), self.ring.max_prec());
        Ok(x.mul(&eps))
    }

    /// `x / 2`, exact for `p = 2` and a unit multiple otherwise.
    pub fn half(&self) -> Result<Self> {
        if self.ring.p == 2 {
            self.div_p()
        } else {
            Ok(self.mul(&Self::from_int(&self.ring, 2).inv()?))
        }
    }

    /// Split a nonzero element as `pi^v * u` with `u` a unit.
    pub fn split_unit(&self) -> Option<(u32, Self)> {
        let v = self.valuation().finite()?;
        let u = self.div_pi_pow(v).ok()?;
        Some((v, u))
    }

    pub fn residue(&self) -> FqElem {
        let rf = &self.ring.residue;
        let digits: Vec<u32> = (0..self.ring.f)
            .map(|j| (self.coeffs[j] % self.ring.p) as u32)
            .collect();
        FqElem(rf.from_digits(&digits))
    }

    pub fn lift(ring: &Ring, a: FqElem) -> Self {
        let mut c = Coeffs::from_elem(0, ring.degree());
        for (j, d) in ring.residue.digits(a.0).iter().enumerate() {
            c[j] = *d as u64;
        }
        Self::from_raw(ring, c, ring.max_prec())
    }

    /// The canonical representative of `self mod pi^k`, regarded as exact.
    pub fn reduce_mod_pi(&self, k: u32) -> Self {
        self.truncate(k).exact()
    }

    pub fn random<R: Rng + ?Sized>(ring: &Ring, rng: &mut R, prec: u32) -> Self {
        let c: Coeffs = (0..ring.degree())
            .map(|_| rng.gen_range(0..ring.modulus))
            .collect();
        Self::from_raw(ring, c, prec)
    }

    /// The `Z_p`-coordinates of this element in the basis `pi^i y^j`, as
    /// integers together with the number of known p-adic digits of each.
    pub fn flatten(&self) -> Vec<(u64, u32)> {
        let r = &self.ring;
        (0..r.e)
            .flat_map(|i| {
                let k = r.digits_at(self.prec, i);
                (0..r.f).map(move |j| (i, j, k))
            })
            .map(|(i, j, k)| (self.coeffs[i * r.f + j], k))
            .collect()
    }

    /// Balanced integer value of a coefficient, for display.
    fn signed_coeff(&self, idx: usize, i: usize) -> i128 {
        let k = self.ring.digits_at(self.prec, i);
        let m = self.ring.pow_p[k as usize] as i128;
        let c = self.coeffs[idx] as i128;
        // c and c - p^k agree modulo pi^prec
        if m > 1 && c > m / 2 {
            c - m
        } else {
            c
        }
    }
}

impl fmt::Display for RingElem {
    /// Renders in the element-expression language: sum of `c*y^j*pi^i`.
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (e, f) = (self.ring.e, self.ring.f);
        let mut terms: Vec<String> = Vec::new();
        for i in 0..e {
            for j in 0..f {
                let c = self.signed_coeff(i * f + j, i);
                if c == 0 {
                    continue;
                }
                let mut parts: Vec<String> = Vec::new();
                let mag = c.unsigned_abs();
                if mag != 1 || (i == 0 && j == 0) {
                    parts.push(mag.to_string());
                }
                if j > 0 {
                    parts.push(if j == 1 { "y".into() } else { format!("y^{j}") });
                }
                if i > 0 {
                    parts.push(if i == 1 { "pi".into() } else { format!("pi^{i}") });
                }
                let body = parts.join("*");
                terms.push(if c < 0 { format!("-{body}") } else { body });
            }
        }
        if terms.is_empty() {
            return write!(fm, "0");
        }
        let mut s = terms[0].clone();
        for t in &terms[1..] {
            if let Some(rest) = t.strip_prefix('-') {
                s.push_str(" - ");
                s.push_str(rest);
            } else {
                s.push_str(" + ");
                s.push_str(t);
            }
        }
        write!(fm, "{s}")
    }
}

impl fmt::Debug for RingElem {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "{} + O(pi^{})", self, self.prec)
    }
}

impl<'a> Add<&'a RingElem> for &'a RingElem {
    type Output = RingElem;
    fn add(self, o: &RingElem) -> RingElem {
        RingElem::add(self, o)
    }
}

impl<'a> Sub<&'a RingElem> for &'a RingElem {
    type Output = RingElem;
    fn sub(self, o: &RingElem) -> RingElem {
        RingElem::sub(self, o)
    }
}

impl<'a> Mul<&'a RingElem> for &'a RingElem {
    type Output = RingElem;
    fn mul(self, o: &RingElem) -> RingElem {
        RingElem::mul(self, o)
    }
}

impl Neg for &RingElem {
    type Output = RingElem;
    fn neg(self) -> RingElem {
        RingElem::neg(self)
    }
}

/// An element of the residue field, indexed by its digits in the
/// `unram_poly` basis: `value = sum_j a_j p^j` for `a_0 + a_1 y + ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FqElem(pub u32);

#[derive(Debug)]
pub struct ResidueField {
    p: u64,
    f: usize,
    q: u32,
    poly: Vec<u64>,
    add_table: Vec<u32>,
    mul_table: Vec<u32>,
}

const TABLE_LIMIT: u32 = 256;

impl ResidueField {
    pub fn new(p: u64, f: usize, unram_poly: &[i64]) -> Self {
        let q = p.pow(f as u32) as u32;
        let poly: Vec<u64> = unram_poly.iter().map(|&c| mod_i64(c, p)).collect();
        let mut rf = ResidueField {
            p,
            f,
            q,
            poly,
            add_table: Vec::new(),
            mul_table: Vec::new(),
        };
        if q <= TABLE_LIMIT {
            let n = q as usize;
            let mut add = vec![0u32; n * n];
            let mut mul = vec![0u32; n * n];
            for a in 0..q {
                for b in 0..q {
                    add[a as usize * n + b as usize] = rf.add_slow(a, b);
                    mul[a as usize * n + b as usize] = rf.mul_slow(a, b);
                }
            }
            rf.add_table = add;
            rf.mul_table = mul;
        }
        rf
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn f(&self) -> usize {
        self.f
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn char2(&self) -> bool {
        self.p == 2
    }

    pub fn digits(&self, a: u32) -> Vec<u32> {
        let mut t = a;
        (0..self.f)
            .map(|_| {
                let d = t % self.p as u32;
                t /= self.p as u32;
                d
            })
            .collect()
    }

    pub fn from_digits(&self, d: &[u32]) -> u32 {
        let mut v = 0u32;
        for &x in d.iter().rev() {
            v = v * self.p as u32 + (x % self.p as u32);
        }
        v
    }

    pub fn elements(&self) -> impl Iterator<Item = FqElem> {
        (0..self.q).map(FqElem)
    }

    fn add_slow(&self, a: u32, b: u32) -> u32 {
        let (da, db) = (self.digits(a), self.digits(b));
        let s: Vec<u32> = da
            .iter()
            .zip(db.iter())
            .map(|(&x, &y)| (x + y) % self.p as u32)
            .collect();
        self.from_digits(&s)
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let p = self.p;
        let f = self.f;
        let (da, db) = (self.digits(a), self.digits(b));
        let mut prod = vec![0u64; 2 * f];
        for i in 0..f {
            for j in 0..f {
                prod[i + j] = (prod[i + j] + da[i] as u64 * db[j] as u64) % p;
            }
        }
        let lead_inv = pow_mod(self.poly[f], p - 2, p);
        for t in (f..2 * f).rev() {
            let c = prod[t] * lead_inv % p;
            if c == 0 {
                continue;
            }
            for j in 0..=f {
                let idx = t - f + j;
                prod[idx] = (prod[idx] + p * p - c * self.poly[j] % p) % p;
            }
        }
        let d: Vec<u32> = prod[..f].iter().map(|&x| x as u32).collect();
        self.from_digits(&d)
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.q <= TABLE_LIMIT {
            self.add_table[a as usize * self.q as usize + b as usize]
        } else {
            self.add_slow(a, b)
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if self.q <= TABLE_LIMIT {
            self.mul_table[a as usize * self.q as usize + b as usize]
        } else {
            self.mul_slow(a, b)
        }
    }

    pub fn neg(&self, a: u32) -> u32 {
        let d: Vec<u32> = self
            .digits(a)
            .iter()
            .map(|&x| (self.p as u32 - x) % self.p as u32)
            .collect();
        self.from_digits(&d)
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn pow(&self, a: u32, mut k: u64) -> u32 {
        let mut base = a;
        let mut acc = 1u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u32) -> u32 {
        assert!(a != 0, "inverse of zero in residue field");
        self.pow(a, self.q as u64 - 2)
    }

    /// The unique `b` with `b^p = c`.
    pub fn frobenius_solve(&self, c: FqElem) -> FqElem {
        FqElem(self.pow(c.0, (self.q / self.p as u32) as u64))
    }

    pub fn is_square(&self, a: u32) -> bool {
        if a == 0 || self.p == 2 {
            return true;
        }
        self.pow(a, (self.q as u64 - 1) / 2) == 1
    }

    /// Absolute trace to `F_p`.
    pub fn trace(&self, a: u32) -> u32 {
        let mut s = 0;
        let mut x = a;
        for _ in 0..self.f {
            s = self.add(s, x);
            x = self.pow(x, self.p);
        }
        s
    }
}
