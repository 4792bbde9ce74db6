//! The smooth-model construction: the endomorphism lattice `T^0`, the form
//! lattice `H^0`, the maps `phi(X) = X^T S X` and `psi(X) = S X + X^T S`, the
//! decreasing chain `T^{m+1} = {X in Ker phi_m : X^ad in Ker phi_m}`, its
//! stabilization `T~ = T^alpha`, `H~ = psi(T~)`, and the index exponent `N`.
//!
//! Endomorphisms live in `A^{n^2}` (row-major entries); forms live in
//! `A^{n(n+1)/2}` as their upper-triangular Gram entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::QuadraticLattice;
use crate::linalg::{congruence_kernel, hnf_containing, zp_kernel, ALattice, MatrixA};
use crate::ring::{Ring, RingElem};

pub fn mat_to_vec(x: &MatrixA) -> Vec<RingElem> {
    let n = x.rows();
    (0..n * n).map(|k| x.get(k / n, k % n).clone()).collect()
}

pub fn vec_to_mat(ring: &Ring, n: usize, v: &[RingElem]) -> MatrixA {
    let mut m = MatrixA::zeros(ring, n, n);
    for (k, x) in v.iter().enumerate() {
        m.set(k / n, k % n, x.clone());
    }
    m
}

pub fn form_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of the Gram entry `(i, j)`, `i <= j`, in form coordinates.
pub fn form_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

pub fn form_to_vec(f: &MatrixA) -> Vec<RingElem> {
    let n = f.rows();
    let mut out = Vec::with_capacity(form_dim(n));
    for i in 0..n {
        for j in i..n {
            out.push(f.get(i, j).clone());
        }
    }
    out
}

pub fn vec_to_form(ring: &Ring, n: usize, v: &[RingElem]) -> MatrixA {
    let mut m = MatrixA::zeros(ring, n, n);
    for i in 0..n {
        for j in i..n {
            let x = v[form_index(n, i, j)].clone();
            m.set(i, j, x.clone());
            m.set(j, i, x);
        }
    }
    m
}

/// A full-rank lattice of `n x n` endomorphisms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndoLattice {
    pub n: usize,
    pub level: usize,
    pub lattice: ALattice,
}

impl EndoLattice {
    pub fn basis_matrices(&self) -> Vec<MatrixA> {
        let ring = self.lattice.ring().clone();
        self.lattice
            .columns()
            .iter()
            .map(|c| vec_to_mat(&ring, self.n, c))
            .collect()
    }

    pub fn contains(&self, x: &MatrixA) -> bool {
        self.lattice.member(&mat_to_vec(x))
    }

    /// Coordinates of `x` in the canonical basis.
    pub fn coordinates(&self, x: &MatrixA) -> Option<Vec<RingElem>> {
        self.lattice.coordinates(&mat_to_vec(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormRole {
    H0,
    ImPsi(usize),
    HTilde,
}

/// A full-rank lattice of quadratic forms in Gram convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormLattice {
    pub n: usize,
    pub role: FormRole,
    pub lattice: ALattice,
}

impl FormLattice {
    pub fn basis_matrices(&self) -> Vec<MatrixA> {
        let ring = self.lattice.ring().clone();
        self.lattice
            .columns()
            .iter()
            .map(|c| vec_to_form(&ring, self.n, c))
            .collect()
    }

    pub fn contains(&self, f: &MatrixA) -> bool {
        self.lattice.member(&form_to_vec(f))
    }

    pub fn coordinates(&self, f: &MatrixA) -> Option<Vec<RingElem>> {
        self.lattice.coordinates(&form_to_vec(f))
    }
}

/// Per-lattice data shared by all model computations.
#[derive(Debug, Clone)]
pub struct ModelContext {
    pub lattice: QuadraticLattice,
    /// `pi^dmax S^{-1}`.
    pub w: MatrixA,
    pub dmax: u32,
    /// Working-precision cap: no normal form may run beyond it.
    pub cap: u32,
}

impl ModelContext {
    pub fn new(l: &QuadraticLattice, cap: u32) -> Result<Self> {
        let ring = l.ring();
        let cap = cap.min(ring.max_prec() - 2);
        let dmax = l.max_scale();
        let (w, dmax2) = l.scaled_inverse(ring.max_prec() - 2 * dmax - 2)?;
        debug_assert_eq!(dmax, dmax2);
        Ok(ModelContext {
            lattice: l.clone(),
            w,
            dmax,
            cap,
        })
    }

    pub fn ring(&self) -> &Ring {
        self.lattice.ring()
    }
    pub fn n(&self) -> usize {
        self.lattice.rank()
    }
    pub fn s(&self) -> &MatrixA {
        self.lattice.gram()
    }

    fn check(&self, bound: u64, what: &str) -> Result<u32> {
        if bound >= self.cap as u64 {
            return Err(Error::PrecisionExhausted(format!(
                "{what} needs precision {bound}, cap is {}",
                self.cap
            )));
        }
        Ok(bound as u32)
    }

    pub fn phi(&self, x: &MatrixA) -> MatrixA {
        x.transpose().mul(self.s()).mul(x)
    }

    pub fn psi(&self, x: &MatrixA) -> MatrixA {
        let sx = self.s().mul(x);
        sx.add(&sx.transpose())
    }

    /// `X^ad = S^{-1} X^T S`; fails if the result is not integral.
    pub fn adjoint(&self, x: &MatrixA) -> Result<MatrixA> {
        let t = self.w.mul(&x.transpose()).mul(self.s());
        t.div_pi_pow(self.dmax)
            .map_err(|_| Error::ClosureViolation("adjoint is not integral".into()))
    }

    /// `pi^dmax X^ad`, always integral.
    fn scaled_adjoint(&self, x: &MatrixA) -> MatrixA {
        self.w.mul(&x.transpose()).mul(self.s())
    }

    /// `T^0 = End(L) ∩ End(L^#) = {X : S X S^{-1} integral}`.
    pub fn compute_t0(&self) -> Result<EndoLattice> {
        let ring = self.ring().clone();
        let n = self.n();
        let mut cols = Vec::with_capacity(n * n);
        for k in 0..n * n {
            let mut e = MatrixA::zeros(&ring, n, n);
            e.set(k / n, k % n, RingElem::one(&ring));
            cols.push(mat_to_vec(&self.s().mul(&e).mul(&self.w)));
        }
        let m = MatrixA::from_cols(&ring, n * n, &cols);
        self.check(self.dmax as u64, "T0")?;
        Ok(EndoLattice {
            n,
            level: 0,
            lattice: congruence_kernel(&m, self.dmax),
        })
    }

    /// `H^0 = {F : F(L) ⊆ A, F(L, L^#) ⊆ A} = {F : F S^{-1} integral}`.
    pub fn compute_h0(&self) -> Result<FormLattice> {
        let ring = self.ring().clone();
        let n = self.n();
        let r = form_dim(n);
        let mut cols = Vec::with_capacity(r);
        for k in 0..r {
            let mut c = vec![RingElem::zero(&ring); r];
            c[k] = RingElem::one(&ring);
            let f = vec_to_form(&ring, n, &c);
            cols.push(mat_to_vec(&f.mul(&self.w)));
        }
        let m = MatrixA::from_cols(&ring, n * n, &cols);
        Ok(FormLattice {
            n,
            role: FormRole::H0,
            lattice: congruence_kernel(&m, self.dmax),
        })
    }

    /// `psi(T)`, canonicalized.
    pub fn psi_image(&self, t: &EndoLattice, role: FormRole) -> Result<FormLattice> {
        let ring = self.ring().clone();
        let n = self.n();
        let gens: Vec<Vec<RingElem>> = t
            .basis_matrices()
            .iter()
            .map(|x| form_to_vec(&self.psi(x)))
            .collect();
        let bound = t.lattice.exponent() as u64 + self.dmax as u64 + ring.v2() as u64;
        let bound = self.check(bound.max(1), "psi image")?;
        let g = MatrixA::from_cols(&ring, form_dim(n), &gens);
        Ok(FormLattice {
            n,
            role,
            lattice: hnf_containing(&g, bound),
        })
    }

    /// One step of the chain: `{X in T : phi(X), phi(X^ad) in psi(T)}`.
    pub fn next_t(&self, t: &EndoLattice, im_psi: &FormLattice) -> Result<EndoLattice> {
        let ring = self.ring().clone();
        let n = self.n();
        let d = im_psi.lattice.exponent() as u64;
        let d = self.check(d, "phi kernel")?;
        let r = form_dim(n);
        let targets = vec![d; r];
        let ker = zp_kernel(&t.lattice, &targets, |v| {
            let x = vec_to_mat(&ring, n, v);
            let f = form_to_vec(&self.phi(&x));
            im_psi.lattice.scaled_coordinates(&f, d).ok_or_else(|| {
                Error::PrecisionExhausted("form escapes the ambient lattice".into())
            })
        })?;
        // ad(K), scaled by pi^dmax to be integral
        let gens: Vec<Vec<RingElem>> = ker
            .columns()
            .iter()
            .map(|c| mat_to_vec(&self.scaled_adjoint(&vec_to_mat(&ring, n, c))))
            .collect();
        let bound = ker.exponent() as u64 + 2 * self.dmax as u64;
        let bound = self.check(bound.max(1), "adjoint lattice")?;
        let g = MatrixA::from_cols(&ring, n * n, &gens);
        let ad_k = ALattice::from_generators_shifted(&g, bound, self.dmax);
        let next = ker.intersection(&ad_k);
        Ok(EndoLattice {
            n,
            level: t.level + 1,
            lattice: next,
        })
    }

    /// Smallest `l` with `pi^l * big ⊆ small`.
    pub fn torsion_exponent(big: &ALattice, small: &ALattice) -> u32 {
        let mut l = 0;
        loop {
            if big.scaled(l as i64).is_sublattice_of(small) {
                return l;
            }
            l += 1;
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelResult {
    pub alpha: usize,
    pub chain: Vec<EndoLattice>,
    pub t_tilde: EndoLattice,
    pub h0: FormLattice,
    pub h_tilde: FormLattice,
    pub n1: i64,
    pub n2: i64,
    pub n: i64,
    pub dim_g: usize,
    pub t_pattern: Vec<Vec<u32>>,
    pub h_pattern: Vec<Vec<u32>>,
    pub precision: u32,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelOptions {
    /// Override for the initial working precision.
    pub precision: Option<u32>,
    /// Recompute the stabilization test at doubled precision.
    pub reverify: bool,
    pub max_retries: u32,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            precision: None,
            reverify: true,
            max_retries: 3,
        }
    }
}

/// Default working precision `2 (2 l0 + e n + v(det S)) + 8`, where `l0` is the
/// torsion exponent of `H^0 / psi(T^0)`.
pub fn initial_precision(l: &QuadraticLattice) -> Result<u32> {
    let ring = l.ring();
    let probe = ModelContext::new(l, ring.max_prec() - 2)?;
    let t0 = probe.compute_t0()?;
    let h0 = probe.compute_h0()?;
    let im0 = probe.psi_image(&t0, FormRole::ImPsi(0))?;
    let l0 = ModelContext::torsion_exponent(&h0.lattice, &im0.lattice);
    let guess = 2 * (2 * l0 + ring.e() as u32 * l.rank() as u32 + l.det_valuation()) + 8;
    Ok(guess.min(ring.max_prec() - 2))
}

/// Iterate the chain from `T^0` until it stabilizes, doubling the working
/// precision on exhaustion.
pub fn stabilize(l: &QuadraticLattice, opts: ModelOptions) -> Result<ModelResult> {
    let ring = l.ring().clone();
    let mut cap = match opts.precision {
        Some(p) => p,
        None => initial_precision(l)?,
    };
    let mut attempt = 0;
    loop {
        match stabilize_at(l, cap, opts.reverify) {
            Err(Error::PrecisionExhausted(msg)) => {
                if attempt >= opts.max_retries || cap >= ring.max_prec() - 2 {
                    return Err(Error::PrecisionExhausted(msg));
                }
                attempt += 1;
                cap = (cap * 2).min(ring.max_prec() - 2);
            }
            other => return other,
        }
    }
}

fn stabilize_at(l: &QuadraticLattice, cap: u32, reverify: bool) -> Result<ModelResult> {
    let ring = l.ring().clone();
    let ctx = ModelContext::new(l, cap)?;
    let n = l.rank();
    let h0 = ctx.compute_h0()?;
    let t0 = ctx.compute_t0()?;
    let mut chain = vec![t0];
    let mut warnings = Vec::new();
    let limit = 4 * ring.e() + 8;
    loop {
        let t = chain.last().unwrap();
        let im = ctx.psi_image(t, FormRole::ImPsi(t.level))?;
        let next = ctx.next_t(t, &im)?;
        if next.lattice == t.lattice {
            break;
        }
        if chain.len() > limit {
            return Err(Error::PrecisionExhausted(format!(
                "chain did not stabilize within {limit} steps"
            )));
        }
        chain.push(next);
    }
    let alpha = chain.len() - 1;
    let t_tilde = chain[alpha].clone();
    if reverify && cap * 2 <= ring.max_prec() - 2 {
        let ctx2 = ModelContext::new(l, cap * 2)?;
        let im = ctx2.psi_image(&t_tilde, FormRole::ImPsi(alpha))?;
        let again = ctx2.next_t(&t_tilde, &im)?;
        if again.lattice != t_tilde.lattice {
            return Err(Error::PrecisionExhausted(
                "stabilization not confirmed at doubled precision".into(),
            ));
        }
    }
    let e_prime = ring.e_prime();
    if alpha > e_prime + 1 {
        warnings.push(format!("alpha = {alpha} exceeds e' + 1 = {}", e_prime + 1));
    }
    let mut h_tilde = ctx.psi_image(&t_tilde, FormRole::HTilde)?;
    h_tilde.role = FormRole::HTilde;
    let n1 = t_tilde.lattice.volume_exp();
    let n2 = h_tilde.lattice.volume_exp();
    let t_pattern = valuation_pattern_endo(&t_tilde);
    let h_pattern = valuation_pattern_form(&h_tilde);
    Ok(ModelResult {
        alpha,
        chain,
        t_tilde,
        h0,
        h_tilde,
        n1,
        n2,
        n: n2 - n1,
        dim_g: n * n.saturating_sub(1) / 2,
        t_pattern,
        h_pattern,
        precision: cap,
        warnings,
    })
}

/// `(N1, N2, N)` with `q^{N1} = #(M_n(A) / T~)` and `q^{N2} = #(Sym / H~)`.
pub fn compute_qn(result: &ModelResult) -> (i64, i64, i64) {
    (result.n1, result.n2, result.n)
}

fn min_vals(lat: &ALattice) -> Vec<u32> {
    let d = lat.dim();
    (0..d)
        .map(|i| {
            lat.columns()
                .iter()
                .filter_map(|c| c[i].valuation().finite())
                .min()
                .unwrap_or(u32::MAX)
        })
        .collect()
}

/// Entrywise minimum valuation over the lattice.
pub fn valuation_pattern_endo(t: &EndoLattice) -> Vec<Vec<u32>> {
    let v = min_vals(&t.lattice);
    (0..t.n).map(|i| v[i * t.n..(i + 1) * t.n].to_vec()).collect()
}

pub fn valuation_pattern_form(h: &FormLattice) -> Vec<Vec<u32>> {
    let v = min_vals(&h.lattice);
    (0..h.n)
        .map(|i| (0..h.n).map(|j| v[form_index(h.n, i, j)]).collect())
        .collect()
}
