//! α-derivations, the twisted extensions E^α(A) and E^{α,β}_δ(A), δ-compatibility and checks.
//!
//! A derivation is given by α, β, the images of the topological generators and the flags
//! below; its values on monomials follow from twisted Leibniz, and its values on δ-iterates
//! of generators from the δ-compatibility equation
//! ∂(δy) = (α^{p-1}+pβ)δ(∂y) + β∂(y)^p − Σ_{0<ν<p} p^{-1}C(p,ν) y^{p-ν} α^{ν-1} ∂(y)^ν.

use crate::base_prism::BaseElt;
use crate::delta_poly::{DeltaPoly, DeltaPolyRing, PMono, PVar};
use crate::envelope::{EMono, EnvElt, EnvRing, MAXD};
use crate::error::{QError, QResult};
use crate::report::Report;
use crate::ring::{binom, binom_over_p, DeltaRing, Ring};
use parking_lot::RwLock;
use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

/// Element (x₀, x₁) of E^α(A) ≅ A[T]/(T² − αT), x₀ + x₁T.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistedExtElt<E> {
    pub alpha: E,
    pub x0: E,
    pub x1: E,
}

fn same_alpha<H: Ring>(h: &H, a: &TwistedExtElt<H::Elem>, b: &TwistedExtElt<H::Elem>) -> QResult<()> {
    if h.equal(&a.alpha, &b.alpha) {
        Ok(())
    } else {
        Err(QError::HostMismatch(format!("twists {} and {} differ", h.render(&a.alpha), h.render(&b.alpha))))
    }
}

pub fn ext_add<H: Ring>(h: &H, a: &TwistedExtElt<H::Elem>, b: &TwistedExtElt<H::Elem>) -> QResult<TwistedExtElt<H::Elem>> {
    same_alpha(h, a, b)?;
    Ok(TwistedExtElt { alpha: a.alpha.clone(), x0: h.add(&a.x0, &b.x0), x1: h.add(&a.x1, &b.x1) })
}

/// (x₀,x₁)(y₀,y₁) = (x₀y₀, x₀y₁ + x₁y₀ + αx₁y₁).
pub fn ext_mul<H: Ring>(h: &H, a: &TwistedExtElt<H::Elem>, b: &TwistedExtElt<H::Elem>) -> QResult<TwistedExtElt<H::Elem>> {
    same_alpha(h, a, b)?;
    let x0 = h.mul(&a.x0, &b.x0)?;
    let cross = h.add(&h.mul(&a.x0, &b.x1)?, &h.mul(&a.x1, &b.x0)?);
    let tw = h.mul(&a.alpha, &h.mul(&a.x1, &b.x1)?)?;
    Ok(TwistedExtElt { alpha: a.alpha.clone(), x0, x1: h.add(&cross, &tw) })
}

pub fn ext_pi0<H: Ring>(_h: &H, a: &TwistedExtElt<H::Elem>) -> H::Elem {
    a.x0.clone()
}

/// π_α(x₀,x₁) = x₀ + αx₁.
pub fn ext_pi_alpha<H: Ring>(h: &H, a: &TwistedExtElt<H::Elem>) -> QResult<H::Elem> {
    Ok(h.add(&a.x0, &h.mul(&a.alpha, &a.x1)?))
}

/// 𝒟(x₀,x₁) = x₁.
pub fn ext_d<H: Ring>(_h: &H, a: &TwistedExtElt<H::Elem>) -> H::Elem {
    a.x1.clone()
}

/// Factorization α^{p-1} + pβ = g·h with g ∈ I a base element, letting the
/// δ-compatibility term keep its level.
#[derive(Clone, Debug)]
pub struct FrobFactor<E> {
    pub g: BaseElt,
    pub h: E,
}

/// G·δ(y) where G = α^{p-1}+pβ, raising the level when a factorization is known.
fn g_times<H: DeltaRing>(host: &H, alpha: &H::Elem, beta: &H::Elem, frob: &Option<FrobFactor<H::Elem>>, dy: &H::Elem) -> QResult<H::Elem> {
    match frob {
        Some(f) => host.mul_raise(&host.mul(&f.h, dy)?, &f.g),
        None => {
            let p = host.p();
            let g = host.add(&host.pow(alpha, p - 1)?, &host.scale(beta, p as i64));
            host.mul(&g, dy)
        }
    }
}

/// Second component of δ(x₀,x₁) given δ(x₁).
fn twisted_delta_x1<H: DeltaRing>(
    host: &H,
    alpha: &H::Elem,
    beta: &H::Elem,
    frob: &Option<FrobFactor<H::Elem>>,
    x0: &H::Elem,
    x1: &H::Elem,
    dx1: &H::Elem,
) -> QResult<H::Elem> {
    let p = host.p();
    let mut acc = g_times(host, alpha, beta, frob, dx1)?;
    acc = host.add(&acc, &host.mul(beta, &host.pow(x1, p)?)?);
    let mut x1pow = host.truncate(&host.one(), host.level(x1));
    let mut apow = host.truncate(&host.one(), host.level(alpha));
    for nu in 1..p {
        x1pow = host.mul(&x1pow, x1)?;
        if nu > 1 {
            apow = host.mul(&apow, alpha)?;
        }
        let t = host.mul(&host.mul(&host.pow(x0, p - nu)?, &apow)?, &x1pow)?;
        acc = host.sub(&acc, &host.scale(&t, binom_over_p(p, nu)));
    }
    Ok(acc)
}

/// E^{α,β}_δ(A) as a δ-ring in its own right.
pub struct TwistedExtRing<H: DeltaRing> {
    pub host: Arc<H>,
    pub alpha: H::Elem,
    pub beta: H::Elem,
    pub frob: Option<FrobFactor<H::Elem>>,
}

impl<H: DeltaRing> TwistedExtRing<H> {
    pub fn new(host: Arc<H>, alpha: H::Elem, beta: H::Elem, frob: Option<FrobFactor<H::Elem>>) -> QResult<Self> {
        let da = host.delta(&alpha)?;
        let ab = host.mul(&alpha, &beta)?;
        if !host.equal(&da, &ab) {
            return Err(QError::BadBeta(format!("δ(α) = {} but αβ = {}", host.render(&da), host.render(&ab))));
        }
        Ok(TwistedExtRing { host, alpha, beta, frob })
    }

    pub fn pair(&self, x0: &H::Elem, x1: &H::Elem) -> TwistedExtElt<H::Elem> {
        TwistedExtElt { alpha: self.alpha.clone(), x0: x0.clone(), x1: x1.clone() }
    }

    /// The element T = (0,1).
    pub fn t_elem(&self) -> TwistedExtElt<H::Elem> {
        self.pair(&self.host.zero(), &self.host.one())
    }
}

impl<H: DeltaRing> Ring for TwistedExtRing<H> {
    type Elem = TwistedExtElt<H::Elem>;

    fn base(&self) -> &crate::base_prism::BaseRing {
        self.host.base()
    }
    fn prec(&self) -> u32 {
        self.host.prec()
    }
    fn zero_at(&self, level: u32) -> Self::Elem {
        self.pair(&self.host.zero_at(level), &self.host.zero_at(level))
    }
    fn from_base(&self, b: &BaseElt) -> Self::Elem {
        self.pair(&self.host.from_base(b), &self.host.zero())
    }
    fn level(&self, x: &Self::Elem) -> u32 {
        self.host.level(&x.x0).min(self.host.level(&x.x1))
    }
    fn render(&self, x: &Self::Elem) -> String {
        format!("(pair {} {})", self.host.render(&x.x0), self.host.render(&x.x1))
    }
    fn truncate(&self, x: &Self::Elem, level: u32) -> Self::Elem {
        self.pair(&self.host.truncate(&x.x0, level), &self.host.truncate(&x.x1, level))
    }
    fn is_zero(&self, x: &Self::Elem) -> bool {
        let l = self.level(x);
        self.host.is_zero(&self.host.truncate(&x.x0, l)) && self.host.is_zero(&self.host.truncate(&x.x1, l))
    }
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem {
        self.pair(&self.host.add(&x.x0, &y.x0), &self.host.add(&x.x1, &y.x1))
    }
    fn neg(&self, x: &Self::Elem) -> Self::Elem {
        self.pair(&self.host.neg(&x.x0), &self.host.neg(&x.x1))
    }
    fn scale(&self, x: &Self::Elem, n: i64) -> Self::Elem {
        self.pair(&self.host.scale(&x.x0, n), &self.host.scale(&x.x1, n))
    }
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> QResult<Self::Elem> {
        ext_mul(&*self.host, x, y)
    }
    fn mul_base(&self, x: &Self::Elem, b: &BaseElt) -> QResult<Self::Elem> {
        Ok(self.pair(&self.host.mul_base(&x.x0, b)?, &self.host.mul_base(&x.x1, b)?))
    }
    fn mul_raise(&self, x: &Self::Elem, g: &BaseElt) -> QResult<Self::Elem> {
        Ok(self.pair(&self.host.mul_raise(&x.x0, g)?, &self.host.mul_raise(&x.x1, g)?))
    }
    fn divide_p(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        Ok(self.pair(&self.host.divide_p(&x.x0)?, &self.host.divide_p(&x.x1)?))
    }
    /// (x₀,x₁)^{-1} = (x₀^{-1}, −x₁ x₀^{-1}(x₀+αx₁)^{-1}).
    fn invert(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        let i0 = self.host.invert(&x.x0)?;
        let i1 = self.host.invert(&ext_pi_alpha(&*self.host, x)?)?;
        let y1 = self.host.neg(&self.host.mul(&self.host.mul(&x.x1, &i0)?, &i1)?);
        Ok(self.pair(&i0, &y1))
    }
}

impl<H: DeltaRing> DeltaRing for TwistedExtRing<H> {
    fn delta(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        let d0 = self.host.delta(&x.x0)?;
        let d1 = self.host.delta(&x.x1)?;
        let y1 = twisted_delta_x1(&*self.host, &self.alpha, &self.beta, &self.frob, &x.x0, &x.x1, &d1)?;
        let l = self.host.level(&d0);
        Ok(self.pair(&d0, &self.host.truncate(&y1, l.max(self.host.level(&d1)))))
    }
}

/// Host rings on which derivations are determined by generator images.
pub trait DerivationHost: DeltaRing {
    type Mono: Clone + Eq + Hash + Debug + Send + Sync;

    fn num_generators(&self) -> usize;
    fn generator_name(&self, g: usize) -> String;
    /// δ^k of generator g.
    fn generator_iterate(&self, g: usize, k: u32) -> QResult<Self::Elem>;
    /// Number of δ-iterates δ^k(g) whose δ is still representable.
    fn max_depth(&self) -> u32;
    /// Decomposition x = Σ c·m with each c a scalar, returned as a host element.
    fn split_terms(&self, x: &Self::Elem) -> Vec<(Self::Mono, Self::Elem)>;
    fn mono_is_one(&self, m: &Self::Mono) -> bool;
    /// m = rest · y^e with y = δ^k(generator g): returns (g, k, e, rest).
    fn split_last(&self, m: &Self::Mono) -> (usize, u32, u32, Self::Mono);
}

/// Generator data and memo tables for one α-derivation.
pub struct DerivationSpec<H: DerivationHost> {
    pub name: String,
    pub alpha: H::Elem,
    pub beta: H::Elem,
    pub images: Vec<H::Elem>,
    pub delta_compatible: bool,
    /// Twisted Leibniz when set; plain Leibniz otherwise (negative controls only).
    pub leibniz: bool,
    pub frob: Option<FrobFactor<H::Elem>>,
    var_memo: RwLock<HashMap<(usize, u32), H::Elem>>,
    mono_memo: RwLock<HashMap<H::Mono, (H::Elem, H::Elem)>>,
}

impl<H: DerivationHost> Clone for DerivationSpec<H> {
    fn clone(&self) -> Self {
        DerivationSpec::new(&self.name, self.alpha.clone(), self.beta.clone(), self.images.clone(), self.delta_compatible, self.frob.clone())
            .with_leibniz(self.leibniz)
    }
}

impl<H: DerivationHost> DerivationSpec<H> {
    pub fn new(
        name: &str,
        alpha: H::Elem,
        beta: H::Elem,
        images: Vec<H::Elem>,
        delta_compatible: bool,
        frob: Option<FrobFactor<H::Elem>>,
    ) -> Self {
        DerivationSpec {
            name: name.to_string(),
            alpha,
            beta,
            images,
            delta_compatible,
            leibniz: true,
            frob,
            var_memo: RwLock::new(HashMap::new()),
            mono_memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_leibniz(mut self, on: bool) -> Self {
        self.leibniz = on;
        self
    }

    /// The zero derivation with twist α = β = 0.
    pub fn zero(host: &H) -> Self {
        let images = (0..host.num_generators()).map(|_| host.zero()).collect();
        DerivationSpec::new("zero", host.zero(), host.zero(), images, true, None)
    }

    /// α^{p-1} + pβ.
    pub fn frobenius_factor(&self, host: &H) -> QResult<H::Elem> {
        let p = host.p();
        Ok(host.add(&host.pow(&self.alpha, p - 1)?, &host.scale(&self.beta, p as i64)))
    }

    /// Right-hand side of the δ-compatibility equation for y with known ∂(y).
    pub fn delta_compat_rhs(&self, host: &H, y: &H::Elem, dy: &H::Elem) -> QResult<H::Elem> {
        let ddy = host.delta(dy)?;
        twisted_delta_x1(host, &self.alpha, &self.beta, &self.frob, y, dy, &ddy)
    }

    /// ∂(δ^k g).
    pub fn on_generator(&self, host: &H, g: usize, k: u32) -> QResult<H::Elem> {
        if let Some(v) = self.var_memo.read().get(&(g, k)) {
            return Ok(v.clone());
        }
        let v = if k == 0 {
            self.images
                .get(g)
                .cloned()
                .ok_or_else(|| QError::PreconditionViolated(format!("no image for generator {g}")))?
        } else {
            if !self.delta_compatible {
                return Err(QError::NotDeltaCompatible(format!(
                    "{} needs ∂(δ^{k} {}) but is not δ-compatible",
                    self.name,
                    host.generator_name(g)
                )));
            }
            let y = host.generator_iterate(g, k - 1)?;
            let dy = self.on_generator(host, g, k - 1)?;
            self.delta_compat_rhs(host, &y, &dy)?
        };
        self.var_memo.write().insert((g, k), v.clone());
        Ok(v)
    }

    /// ∂(y^e) = Σ_{m=1}^e C(e,m) y^{e-m} α^{m-1} ∂(y)^m.
    fn on_power(&self, host: &H, y: &H::Elem, dy: &H::Elem, e: u32) -> QResult<H::Elem> {
        if !self.leibniz {
            return Ok(host.scale(&host.mul(&host.pow(y, e - 1)?, dy)?, e as i64));
        }
        let mut acc = host.zero();
        let mut dyp = host.truncate(&host.one(), host.level(dy));
        let mut ap = host.truncate(&host.one(), host.level(&self.alpha));
        for m in 1..=e {
            dyp = host.mul(&dyp, dy)?;
            if m > 1 {
                ap = host.mul(&ap, &self.alpha)?;
            }
            let t = host.mul(&host.mul(&host.pow(y, e - m)?, &ap)?, &dyp)?;
            acc = host.add(&acc, &host.scale(&t, binom(e as u64, m as u64) as i64));
        }
        Ok(acc)
    }

    /// ∂(uv) from u, v, ∂u, ∂v.
    fn product(&self, host: &H, u: &H::Elem, du: &H::Elem, v: &H::Elem, dv: &H::Elem) -> QResult<H::Elem> {
        let mut r = host.add(&host.mul(du, v)?, &host.mul(u, dv)?);
        if self.leibniz {
            r = host.add(&r, &host.mul(&self.alpha, &host.mul(du, dv)?)?);
        }
        Ok(r)
    }

    /// Value on a monomial together with the monomial itself.
    fn on_mono(&self, host: &H, m: &H::Mono) -> QResult<(H::Elem, H::Elem)> {
        let (g, k, e, rest) = host.split_last(m);
        let y = host.generator_iterate(g, k)?;
        let ye = host.pow(&y, e)?;
        let dy = self.on_generator(host, g, k)?;
        let dye = self.on_power(host, &y, &dy, e)?;
        if host.mono_is_one(&rest) {
            return Ok((dye, ye));
        }
        let (drest, rest_elem) = self.mono_value(host, &rest)?;
        let d = self.product(host, &rest_elem, &drest, &ye, &dye)?;
        Ok((d, host.mul(&rest_elem, &ye)?))
    }

    fn mono_value(&self, host: &H, m: &H::Mono) -> QResult<(H::Elem, H::Elem)> {
        if let Some(v) = self.mono_memo.read().get(m) {
            return Ok(v.clone());
        }
        let v = self.on_mono(host, m)?;
        self.mono_memo.write().insert(m.clone(), v.clone());
        Ok(v)
    }

    /// ∂(x), linear over the scalars.
    pub fn apply(&self, host: &H, x: &H::Elem) -> QResult<H::Elem> {
        let mut acc = host.zero_at(host.level(x));
        for (m, c) in host.split_terms(x) {
            if host.mono_is_one(&m) {
                continue;
            }
            let d = self.mono_value(host, &m)?.0;
            acc = host.add(&acc, &host.mul(&c, &d)?);
        }
        Ok(host.truncate(&acc, host.level(x)))
    }

    /// γ(x) = x + α∂(x).
    pub fn gamma(&self, host: &H, x: &H::Elem) -> QResult<H::Elem> {
        Ok(host.add(x, &host.mul(&self.alpha, &self.apply(host, x)?)?))
    }

    /// The section s(x) = (x, ∂(x)) into E^α.
    pub fn section(&self, host: &H, x: &H::Elem) -> QResult<TwistedExtElt<H::Elem>> {
        Ok(TwistedExtElt { alpha: self.alpha.clone(), x0: x.clone(), x1: self.apply(host, x)? })
    }
}

/// Verifies s(xy) = s(x)s(y) and s(x+y) = s(x)+s(y) on consecutive sample pairs.
pub fn section_check<H: DerivationHost>(host: &H, d: &DerivationSpec<H>, samples: &[H::Elem]) -> QResult<Report> {
    let mut r = Report::new("section", "alpha-derivation-section");
    for w in samples.windows(2) {
        let (x, y) = (&w[0], &w[1]);
        let sx = d.section(host, x)?;
        let sy = d.section(host, y)?;
        let prod = ext_mul(host, &sx, &sy)?;
        let sxy = d.section(host, &host.mul(x, y)?)?;
        r.check(host.equal(&prod.x1, &sxy.x1), || format!("x={} y={}", host.render(x), host.render(y)));
        let sum = ext_add(host, &sx, &sy)?;
        let sxpy = d.section(host, &host.add(x, y))?;
        r.check(host.equal(&sum.x1, &sxpy.x1), || format!("sum x={} y={}", host.render(x), host.render(y)));
    }
    Ok(r)
}

/// Verifies the δ-compatibility equation on generator iterates and samples.
pub fn delta_compat_check<H: DerivationHost>(host: &H, d: &DerivationSpec<H>, samples: &[H::Elem]) -> QResult<Report> {
    let da = host.delta(&d.alpha)?;
    let ab = host.mul(&d.alpha, &d.beta)?;
    if !host.equal(&da, &ab) {
        return Err(QError::BadBeta(format!("δ(α) = {} ≠ αβ = {}", host.render(&da), host.render(&ab))));
    }
    let mut r = Report::new("delta-compat", "delta-compatible-derivation");
    let mut xs: Vec<H::Elem> = Vec::new();
    for g in 0..host.num_generators() {
        for k in 0..host.max_depth() {
            xs.push(host.generator_iterate(g, k)?);
        }
    }
    xs.extend(samples.iter().cloned());
    for x in &xs {
        if host.level(x) == 0 {
            continue;
        }
        let dx = d.apply(host, x)?;
        let lhs = d.apply(host, &host.delta(x)?)?;
        let rhs = d.delta_compat_rhs(host, x, &dx)?;
        r.check(host.equal(&lhs, &rhs), || format!("x={}", host.render(x)));
        if host.is_zero(&dx) {
            r.check(host.is_zero(&lhs), || format!("kernel not δ-stable at x={}", host.render(x)));
        }
    }
    Ok(r)
}

/// Verifies ∂(φ(x)) = (α^{p-1}+pβ)φ(∂(x)) on samples.
pub fn frobenius_relation_check<H: DerivationHost>(host: &H, d: &DerivationSpec<H>, samples: &[H::Elem]) -> QResult<Report> {
    let mut r = Report::new("frobenius-relation", "frobenius-derivation-relation");
    let g = d.frobenius_factor(host)?;
    for x in samples {
        let lhs = d.apply(host, &host.phi(x)?)?;
        let rhs = host.mul(&g, &host.phi(&d.apply(host, x)?)?)?;
        r.check(host.equal(&lhs, &rhs), || format!("x={}", host.render(x)));
    }
    Ok(r)
}

/// Verifies ∂₁∂₂ = ∂₂∂₁ on generator iterates and samples.
pub fn commute_check<H: DerivationHost>(
    host: &H,
    d1: &DerivationSpec<H>,
    d2: &DerivationSpec<H>,
    samples: &[H::Elem],
) -> QResult<Report> {
    let pre = |a: &DerivationSpec<H>, b: &DerivationSpec<H>| -> QResult<()> {
        if !host.is_zero(&a.apply(host, &b.alpha)?) {
            return Err(QError::PreconditionViolated(format!("{}(α of {}) ≠ 0", a.name, b.name)));
        }
        if a.delta_compatible && b.delta_compatible && !host.is_zero(&a.apply(host, &b.beta)?) {
            return Err(QError::PreconditionViolated(format!("{}(β of {}) ≠ 0", a.name, b.name)));
        }
        Ok(())
    };
    pre(d1, d2)?;
    pre(d2, d1)?;
    let mut r = Report::new("commute", "commuting-derivations");
    let mut xs: Vec<H::Elem> = Vec::new();
    for g in 0..host.num_generators() {
        for k in 0..host.max_depth() {
            xs.push(host.generator_iterate(g, k)?);
        }
    }
    xs.extend(samples.iter().cloned());
    for x in &xs {
        let a = d1.apply(host, &d2.apply(host, x)?)?;
        let b = d2.apply(host, &d1.apply(host, x)?)?;
        r.check(host.equal(&a, &b), || format!("x={}", host.render(x)));
    }
    Ok(r)
}

impl<C: DeltaRing> DerivationHost for EnvRing<C> {
    type Mono = EMono;

    fn num_generators(&self) -> usize {
        self.d
    }
    fn generator_name(&self, g: usize) -> String {
        self.names[g].clone()
    }
    fn generator_iterate(&self, g: usize, k: u32) -> QResult<Self::Elem> {
        self.delta_tau(g, k as usize)
    }
    fn max_depth(&self) -> u32 {
        self.levels as u32 - 1
    }
    fn split_terms(&self, x: &Self::Elem) -> Vec<(EMono, Self::Elem)> {
        x.terms
            .iter()
            .map(|(m, c)| (*m, self.truncate(&self.constant(c), x.level)))
            .collect()
    }
    fn mono_is_one(&self, m: &EMono) -> bool {
        m.is_one()
    }
    fn split_last(&self, m: &EMono) -> (usize, u32, u32, EMono) {
        let pos = (0..MAXD).rev().find(|&i| m.0[i] != 0).expect("non-trivial monomial");
        let mut rest = *m;
        rest.0[pos] = 0;
        (pos / self.levels, (pos % self.levels) as u32, m.0[pos] as u32, rest)
    }
}

impl<C: DeltaRing> DerivationHost for DeltaPolyRing<C> {
    type Mono = PMono;

    fn num_generators(&self) -> usize {
        self.nvars + self.nconst
    }
    fn generator_name(&self, g: usize) -> String {
        if g < self.nvars {
            format!("S{g}")
        } else {
            format!("t{}", g - self.nvars)
        }
    }
    fn generator_iterate(&self, g: usize, k: u32) -> QResult<Self::Elem> {
        if g < self.nvars {
            self.var(PVar::V(g as u16, k as u16))
        } else if k == 0 {
            self.var(PVar::T((g - self.nvars) as u16))
        } else {
            Ok(self.zero())
        }
    }
    fn max_depth(&self) -> u32 {
        if self.nvars > 0 {
            2
        } else {
            1
        }
    }
    fn split_terms(&self, x: &Self::Elem) -> Vec<(PMono, Self::Elem)> {
        x.terms
            .iter()
            .map(|(m, c)| (m.clone(), self.truncate(&self.constant(c), x.level)))
            .collect()
    }
    fn mono_is_one(&self, m: &PMono) -> bool {
        m.0.is_empty()
    }
    fn split_last(&self, m: &PMono) -> (usize, u32, u32, PMono) {
        let (v, e) = *m.0.last().expect("non-trivial monomial");
        let rest = PMono(m.0[..m.0.len() - 1].to_vec());
        match v {
            PVar::V(i, k) => (i as usize, k as u32, e, rest),
            PVar::T(j) => (self.nvars + j as usize, 0, e, rest),
        }
    }
}

/// The q-Higgs derivation θ_i on an envelope: α = t_iμ, β = t_i^{p-1}η,
/// θ(τ_j) = δ_{ij}, vanishing on the coefficients.
pub fn qhiggs_derivation<C: DeltaRing>(e: &EnvRing<C>, i: usize) -> QResult<DerivationSpec<EnvRing<C>>> {
    if i >= e.d {
        return Err(QError::PreconditionViolated(format!("direction {i} out of range")));
    }
    let b = e.base().clone();
    let t = e.t(i)?;
    let alpha = e.mul_base(&t, &b.mu())?;
    let tp = e.pow(&t, e.p() - 1)?;
    let beta = e.mul_base(&tp, &b.eta())?;
    let images = (0..e.d).map(|j| if j == i { e.one() } else { e.zero() }).collect();
    let frob = Some(FrobFactor { g: b.xi(), h: tp });
    Ok(DerivationSpec::new(&format!("theta{i}"), alpha, beta, images, true, frob))
}

/// The q-Higgs derivation on a framed polynomial chart R[t_1..t_d]: θ_i(t_j) = δ_{ij}[p]_q.
pub fn chart_derivation<C: DeltaRing>(a: &DeltaPolyRing<C>, i: usize) -> QResult<DerivationSpec<DeltaPolyRing<C>>> {
    if i >= a.nconst {
        return Err(QError::PreconditionViolated(format!("direction {i} out of range")));
    }
    let b = a.base().clone();
    let t = a.t(i)?;
    let alpha = a.mul_base(&t, &b.mu())?;
    let tp = a.pow(&t, a.p() - 1)?;
    let beta = a.mul_base(&tp, &b.eta())?;
    let mut images: Vec<DeltaPoly<C::Elem>> = (0..a.nvars).map(|_| a.zero()).collect();
    for j in 0..a.nconst {
        images.push(if j == i { a.from_base(&b.xi()) } else { a.zero() });
    }
    let frob = Some(FrobFactor { g: b.xi(), h: tp });
    Ok(DerivationSpec::new(&format!("theta{i}"), alpha, beta, images, true, frob))
}

/// γ_i(x) = x + t_iμ θ_i(x) on an envelope.
pub fn gamma<C: DeltaRing>(e: &EnvRing<C>, d: &DerivationSpec<EnvRing<C>>, x: &EnvElt<C::Elem>) -> QResult<EnvElt<C::Elem>> {
    d.gamma(e, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_prism::BaseRing;

    fn env(p: u32, n: u32, d: usize, w: u32) -> EnvRing<BaseRing> {
        env_at(p, n, d, w, 0)
    }

    fn env_at(p: u32, n: u32, d: usize, w: u32, a: i64) -> EnvRing<BaseRing> {
        let b = BaseRing::q(p, n).unwrap();
        let cs: Vec<BaseElt> = (0..d).map(|_| b.from_int(a)).collect();
        EnvRing::<BaseRing>::over_base(&b, &cs, n, w).unwrap()
    }

    #[test]
    fn ext_basics() {
        let b = BaseRing::q(2, 2).unwrap();
        let a = b.mu();
        let t = TwistedExtElt { alpha: a.clone(), x0: b.from_int(0), x1: b.from_int(1) };
        let t2 = ext_mul(&b, &t, &t).unwrap();
        assert!(b.equal(&t2.x0, &b.from_int(0)));
        assert!(b.equal(&t2.x1, &a));
        let x = TwistedExtElt { alpha: a.clone(), x0: b.from_int(3), x1: b.q_elt() };
        let pa = ext_pi_alpha(&b, &x).unwrap();
        assert!(b.equal(&pa, &b.e_add(&b.from_int(3), &b.e_mul(&a, &b.q_elt()))));
        let y = TwistedExtElt { alpha: b.from_int(1), x0: b.from_int(0), x1: b.from_int(0) };
        assert!(matches!(ext_mul(&b, &x, &y), Err(QError::HostMismatch(_))));
    }

    #[test]
    fn chart_theta_on_powers() {
        let b = Arc::new(BaseRing::q(2, 3).unwrap());
        let a = DeltaPolyRing::new(b.clone(), 0, 1);
        let th = chart_derivation(&a, 0).unwrap();
        let t = a.t(0).unwrap();
        let t2 = a.mul(&t, &t).unwrap();
        let got = th.apply(&a, &t2).unwrap();
        let expect = a.mul_base(&t, &b.qint(4)).unwrap();
        assert!(a.equal(&got, &expect));
        assert!(a.equal(&th.apply(&a, &t).unwrap(), &a.from_base(&b.xi())));
    }

    #[test]
    fn envelope_theta_values() {
        let e = env(2, 2, 2, 4);
        let b = e.base().clone();
        let th = qhiggs_derivation(&e, 0).unwrap();
        assert!(e.equal(&th.apply(&e, &e.t(0).unwrap()).unwrap(), &e.from_base(&b.xi())));
        assert!(e.is_zero(&th.apply(&e, &e.t(1).unwrap()).unwrap()));
        let g = th.gamma(&e, &e.t(0).unwrap()).unwrap();
        let qp = b.e_pow(&b.q_elt(), 2);
        assert!(e.equal(&g, &e.mul_base(&e.t(0).unwrap(), &qp).unwrap()));
    }

    #[test]
    fn ext_delta_ring_axioms() {
        let b = Arc::new(BaseRing::q(3, 2).unwrap());
        let a = DeltaPolyRing::new(b.clone(), 0, 1);
        let t = a.t(0).unwrap();
        let alpha = a.mul_base(&t, &b.mu()).unwrap();
        let beta = a.mul_base(&a.pow(&t, 2).unwrap(), &b.eta()).unwrap();
        let ext = TwistedExtRing::new(Arc::new(a), alpha, beta, None).unwrap();
        let h = ext.host.clone();
        let x = ext.pair(&h.add(&t, &h.one()), &h.from_int(2));
        let y = ext.pair(&h.from_base(&b.q_elt()), &t);
        assert!(crate::ring::witt2_hom_check(&ext, &x, &y).unwrap());
    }

    fn run_checks(p: u32, n: u32, d: usize, w: u32, seed: u64) {
        let e = env(p, n, d, w);
        let mut r = crate::sample::rng(seed);
        let samples: Vec<_> = (0..12).map(|_| crate::sample::env_elt(&mut r, &e, 3, w / p)).collect();
        for i in 0..d {
            let th = qhiggs_derivation(&e, i).unwrap();
            let rep = section_check(&e, &th, &samples).unwrap();
            assert!(rep.passed, "section {:?}", rep.witness);
            let rep = delta_compat_check(&e, &th, &samples).unwrap();
            assert!(rep.passed, "delta-compat {:?}", rep.witness);
            let rep = frobenius_relation_check(&e, &th, &samples).unwrap();
            assert!(rep.passed, "frobenius {:?}", rep.witness);
            for j in (0..d).filter(|&j| j != i) {
                let tj = qhiggs_derivation(&e, j).unwrap();
                let rep = commute_check(&e, &th, &tj, &samples).unwrap();
                assert!(rep.passed, "commute {:?}", rep.witness);
            }
        }
    }

    #[test]
    fn envelope_checks_p2() {
        run_checks(2, 2, 2, 8, 1);
    }

    #[test]
    fn envelope_checks_p3() {
        run_checks(3, 2, 1, 9, 2);
    }

    #[test]
    fn negative_controls() {
        let e = env_at(2, 2, 1, 8, 1);
        let mut r = crate::sample::rng(5);
        let mut samples: Vec<_> = (0..12).map(|_| crate::sample::env_elt(&mut r, &e, 3, 4)).collect();
        samples.push(e.tau(0).unwrap());
        samples.push(e.delta_tau(0, 1).unwrap());
        let th = qhiggs_derivation(&e, 0).unwrap().with_leibniz(false);
        assert!(!section_check(&e, &th, &samples).unwrap().passed);
        let mut bad = qhiggs_derivation(&e, 0).unwrap();
        bad.beta = e.add(&bad.beta, &e.one());
        assert!(matches!(delta_compat_check(&e, &bad, &samples), Err(QError::BadBeta(_))));
    }
}
