//! Divided power polynomial rings over Z/p^{N+1}, σ-data of envelopes and the
//! comparison map from a q = 1 envelope to the PD polynomial ring.

use crate::base_prism::{big_binom, mod_inverse, BaseElt, BaseRing};
use crate::envelope::{EMono, EnvElt, EnvRing};
use crate::error::{QError, QResult};
use crate::report::Report;
use crate::ring::{binom, DeltaRing, Ring};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use parking_lot::RwLock;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Exponent vector of X_1^{[n_1]} ⋯ X_d^{[n_d]}.
pub type PDMono = Vec<u32>;

#[derive(Clone, Debug, PartialEq)]
pub struct PDElt {
    pub level: u32,
    pub terms: BTreeMap<PDMono, BaseElt>,
}

/// Z/p^{N+1}[X_1, …, X_d]_PD with X^{[m]} X^{[n]} = C(m+n, n) X^{[m+n]}.
#[derive(Clone, Debug)]
pub struct PDRing {
    pub coeff: Arc<BaseRing>,
    pub d: usize,
    pub names: Vec<String>,
}

impl PDRing {
    pub fn new(p: u32, n: u32, d: usize) -> QResult<Self> {
        let coeff = Arc::new(BaseRing::q1(p, n)?);
        Ok(PDRing { coeff, d, names: (0..d).map(|v| format!("X{v}")).collect() })
    }

    pub fn over(coeff: Arc<BaseRing>, d: usize) -> QResult<Self> {
        if !coeff.is_q1() {
            return Err(QError::RingMismatch("PD rings live over the q = 1 base".into()));
        }
        Ok(PDRing { coeff, d, names: (0..d).map(|v| format!("X{v}")).collect() })
    }

    fn finish(&self, level: u32, acc: HashMap<PDMono, BaseElt>) -> PDElt {
        let level = level.min(self.coeff.n());
        let terms = acc
            .into_iter()
            .filter_map(|(m, c)| {
                let c = self.coeff.e_truncate(&c, level);
                if c.is_zero() {
                    None
                } else {
                    Some((m, c))
                }
            })
            .collect();
        PDElt { level, terms }
    }

    fn acc(&self, acc: &mut HashMap<PDMono, BaseElt>, m: PDMono, c: BaseElt) {
        match acc.get_mut(&m) {
            Some(a) => *a = self.coeff.e_add(a, &c),
            None => {
                acc.insert(m, c);
            }
        }
    }

    pub fn term(&self, m: PDMono, c: &BaseElt) -> PDElt {
        let mut acc = HashMap::new();
        acc.insert(m, c.clone());
        self.finish(c.level, acc)
    }

    /// X_v^{[n]}.
    pub fn div_power(&self, v: usize, n: u32) -> PDElt {
        let mut m = vec![0; self.d];
        m[v] = n;
        self.term(m, &self.coeff.from_int(1))
    }

    pub fn var(&self, v: usize) -> PDElt {
        self.div_power(v, 1)
    }

    /// Coefficient ∏ C(a_v + b_v, a_v) of the product of two basis monomials.
    fn mono_mul(&self, a: &PDMono, b: &PDMono) -> (PDMono, BaseElt) {
        let mut m = Vec::with_capacity(self.d);
        let mut c = BigInt::one();
        for v in 0..self.d {
            m.push(a[v] + b[v]);
            c *= big_binom((a[v] + b[v]) as u64, a[v] as u64);
        }
        (m, self.coeff.from_bigint_coeffs(self.coeff.n(), &[c]))
    }

    /// ∂_v, the down-shift X_v^{[n+1]} ↦ X_v^{[n]}.
    pub fn derive(&self, v: usize, x: &PDElt) -> PDElt {
        let mut acc = HashMap::new();
        for (m, c) in &x.terms {
            if m[v] > 0 {
                let mut m2 = m.clone();
                m2[v] -= 1;
                self.acc(&mut acc, m2, c.clone());
            }
        }
        self.finish(x.level, acc)
    }

    pub fn degree(&self, x: &PDElt) -> u32 {
        x.terms.keys().map(|m| m.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn coeff_of(&self, x: &PDElt, m: &PDMono) -> BaseElt {
        x.terms.get(m).cloned().unwrap_or_else(|| self.coeff.elt_zero(x.level))
    }

    pub fn render_mono(&self, m: &PDMono) -> String {
        let parts: Vec<String> = (0..self.d)
            .filter(|&v| m[v] > 0)
            .map(|v| if m[v] == 1 { self.names[v].clone() } else { format!("(dp {} {})", self.names[v], m[v]) })
            .collect();
        match parts.len() {
            0 => "1".into(),
            1 => parts[0].clone(),
            _ => format!("(* {})", parts.join(" ")),
        }
    }
}

impl Ring for PDRing {
    type Elem = PDElt;

    fn base(&self) -> &BaseRing {
        &self.coeff
    }
    fn prec(&self) -> u32 {
        self.coeff.n()
    }
    fn zero_at(&self, level: u32) -> PDElt {
        PDElt { level: level.min(self.coeff.n()), terms: BTreeMap::new() }
    }
    fn from_base(&self, b: &BaseElt) -> PDElt {
        self.term(vec![0; self.d], b)
    }
    fn level(&self, x: &PDElt) -> u32 {
        x.level
    }
    fn render(&self, x: &PDElt) -> String {
        let parts: Vec<String> = x
            .terms
            .iter()
            .map(|(m, c)| {
                let cs = self.coeff.render(c);
                if m.iter().all(|&e| e == 0) {
                    cs
                } else if cs == "1" {
                    self.render_mono(m)
                } else {
                    format!("(* {} {})", cs, self.render_mono(m))
                }
            })
            .collect();
        match parts.len() {
            0 => "0".into(),
            1 => parts[0].clone(),
            _ => format!("(+ {})", parts.join(" ")),
        }
    }
    fn truncate(&self, x: &PDElt, level: u32) -> PDElt {
        self.finish(level.min(x.level), x.terms.clone().into_iter().collect())
    }
    fn is_zero(&self, x: &PDElt) -> bool {
        x.terms.values().all(|c| self.coeff.e_truncate(c, x.level).is_zero())
    }
    fn add(&self, x: &PDElt, y: &PDElt) -> PDElt {
        let mut acc: HashMap<PDMono, BaseElt> = x.terms.clone().into_iter().collect();
        for (m, c) in &y.terms {
            self.acc(&mut acc, m.clone(), c.clone());
        }
        self.finish(x.level.min(y.level), acc)
    }
    fn neg(&self, x: &PDElt) -> PDElt {
        PDElt { level: x.level, terms: x.terms.iter().map(|(m, c)| (m.clone(), self.coeff.e_neg(c))).collect() }
    }
    fn scale(&self, x: &PDElt, n: i64) -> PDElt {
        let acc = x.terms.iter().map(|(m, c)| (m.clone(), self.coeff.e_scale(c, n))).collect();
        self.finish(x.level, acc)
    }
    fn mul(&self, x: &PDElt, y: &PDElt) -> QResult<PDElt> {
        let level = x.level.min(y.level);
        let mut acc = HashMap::new();
        for (a, ca) in &x.terms {
            for (b, cb) in &y.terms {
                let (m, c) = self.mono_mul(a, b);
                let c = self.coeff.e_mul(&self.coeff.e_mul(ca, cb), &c);
                self.acc(&mut acc, m, c);
            }
        }
        Ok(self.finish(level, acc))
    }
    fn mul_base(&self, x: &PDElt, b: &BaseElt) -> QResult<PDElt> {
        let acc = x.terms.iter().map(|(m, c)| (m.clone(), self.coeff.e_mul(c, b))).collect();
        Ok(self.finish(x.level.min(b.level), acc))
    }
    fn mul_raise(&self, x: &PDElt, g: &BaseElt) -> QResult<PDElt> {
        let level = (x.level + 1).min(g.level).min(self.coeff.n());
        let mut acc = HashMap::new();
        for (m, c) in &x.terms {
            acc.insert(m.clone(), self.coeff.e_mul_raise(&self.coeff.e_truncate(c, x.level), g)?);
        }
        Ok(self.finish(level, acc))
    }
    fn divide_p(&self, x: &PDElt) -> QResult<PDElt> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("division by p at level 0".into()));
        }
        let mut acc = HashMap::new();
        for (m, c) in &x.terms {
            acc.insert(m.clone(), self.coeff.e_divide_p(&self.coeff.e_truncate(c, x.level))?);
        }
        Ok(self.finish(x.level - 1, acc))
    }
    fn invert(&self, x: &PDElt) -> QResult<PDElt> {
        let c0 = self.coeff_of(x, &vec![0; self.d]);
        let mut v = self.from_base(&self.coeff.invert(&c0)?);
        v = self.truncate(&v, x.level);
        let one = self.truncate(&self.one(), x.level);
        let two = self.truncate(&self.from_int(2), x.level);
        for _ in 0..64 {
            let xv = self.mul(x, &v)?;
            if self.equal(&xv, &one) {
                return Ok(v);
            }
            v = self.mul(&v, &self.sub(&two, &xv))?;
        }
        Err(QError::NotInvertible(self.render(x)))
    }
}

fn vp_big(p: u32, x: &BigInt) -> u32 {
    if x.is_zero() {
        return u32::MAX;
    }
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut y = x.abs();
    while (&y % &pb).is_zero() {
        y /= &pb;
        v += 1;
    }
    v
}

/// p-adic valuation of a nonzero rational.
pub fn vp_rational(p: u32, x: &BigRational) -> i64 {
    vp_big(p, x.numer()) as i64 - vp_big(p, x.denom()) as i64
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

/// Unit c_n = ∏ (p^k!)^{a_k} / n! for n = Σ a_k p^k in base p.
pub fn legendre_unit(p: u32, n: u64) -> BigRational {
    let mut num = BigInt::one();
    let mut m = n;
    let mut k = 0u32;
    while m > 0 {
        let a = m % p as u64;
        let f = factorial((p as u64).pow(k));
        for _ in 0..a {
            num *= &f;
        }
        m /= p as u64;
        k += 1;
    }
    BigRational::new(num, factorial(n))
}

/// Reduce a p-integral rational modulo p^{level+1}.
pub fn reduce_rational(b: &BaseRing, x: &BigRational, level: u32) -> QResult<BaseElt> {
    let m = BigInt::from(b.ppow(level + 1));
    let den = x.denom().mod_floor(&m);
    if vp_big(b.p(), x.denom()) > 0 {
        return Err(QError::NotDivisible(format!("{x} is not p-integral")));
    }
    let inv = mod_inverse(den.to_i128().unwrap(), b.ppow(level + 1))
        .ok_or_else(|| QError::NotAUnit(format!("denominator of {x}")))?;
    let v = (x.numer().mod_floor(&m) * BigInt::from(inv)).mod_floor(&m);
    Ok(b.from_bigint_coeffs(level, &[v]))
}

/// σ-data (τ, a, b, σ) with δ(a) = p b and σ = (1 − p^{p−1})^{-1}(−b − δτ + Σ p^{-1}C(p,ν) a^{p−ν} p^{ν−1} τ^ν).
#[derive(Clone, Debug)]
pub struct SigmaData<E> {
    pub tau: E,
    pub a: E,
    pub b: E,
    pub sigma: E,
}

pub fn sigma_of_data<R: DeltaRing>(r: &R, tau: &R::Elem, a: &R::Elem, b: &R::Elem) -> QResult<SigmaData<R::Elem>> {
    let p = r.p();
    let da = r.delta(a)?;
    if !r.equal(&da, &r.scale(b, p as i64)) {
        return Err(QError::BadCenter(format!("δ(a) = {} is not p·b", r.render(&da))));
    }
    let mut s = r.neg(&r.add(b, &r.delta(tau)?));
    for nu in 1..p {
        let c = (binom(p as u64, nu as u64) / p as u128) as i64 * (p as i64).pow(nu - 1);
        let t = r.mul(&r.pow(a, p - nu)?, &r.pow(tau, nu)?)?;
        s = r.add(&s, &r.scale(&t, c));
    }
    let b0 = r.base();
    let ppm = b0.from_int(1 - (p as i64).pow(p - 1));
    let u = b0.invert(&ppm)?;
    let sigma = r.mul_base(&s, &u)?;
    Ok(SigmaData { tau: tau.clone(), a: a.clone(), b: b.clone(), sigma })
}

impl<E> SigmaData<E> {
    /// τ^p = pσ, compared at the level of σ raised by one.
    pub fn identity_holds<R: Ring<Elem = E>>(&self, r: &R) -> QResult<bool> {
        let lhs = r.pow(&self.tau, r.p())?;
        let rhs = r.mul_raise(&self.sigma, &r.base().from_int(r.p() as i64))?;
        Ok(r.equal(&lhs, &rhs))
    }
}

/// σ-data of the envelope variable τ_i with center a_i and δ(a_i) = p b.
pub fn sigma_of(e: &EnvRing<BaseRing>, i: usize, b: &BaseElt) -> QResult<SigmaData<EnvElt<BaseElt>>> {
    if !e.base().is_q1() {
        return Err(QError::RingMismatch("σ-data require the q = 1 envelope".into()));
    }
    let tau = e.tau(i)?;
    let a = e.constant(&e.centers[i]);
    let bb = e.constant(&e.coeff.adopt(b));
    sigma_of_data(e, &tau, &a, &bb)
}

/// σ_{21} = (−1)^p σ_{12} given τ_{21} = −τ_{12}.
pub fn sigma_antisym_check<R: Ring>(r: &R, d12: &SigmaData<R::Elem>, d21: &SigmaData<R::Elem>) -> QResult<Report> {
    if !r.is_zero(&r.add(&d12.tau, &d21.tau)) {
        return Err(QError::PreconditionViolated("τ21 ≠ −τ12".into()));
    }
    let mut rep = Report::new("sigma-antisymmetry", "sigma-antisym");
    let sign = if r.p() % 2 == 0 { 1 } else { -1 };
    let rhs = r.scale(&d12.sigma, sign);
    rep.check(r.equal(&d21.sigma, &rhs), || format!("σ21={} (−1)^pσ12={}", r.render(&d21.sigma), r.render(&rhs)));
    Ok(rep)
}

/// σ_{23} = σ_{13} + (−1)^p σ_{12} + Σ p^{-1}C(p,ν) τ_{13}^ν (−τ_{12})^{p−ν} given τ_{23} = τ_{13} − τ_{12}.
pub fn sigma_cocycle_check<R: Ring>(
    r: &R,
    d12: &SigmaData<R::Elem>,
    d13: &SigmaData<R::Elem>,
    d23: &SigmaData<R::Elem>,
) -> QResult<Report> {
    if !r.equal(&d23.tau, &r.sub(&d13.tau, &d12.tau)) {
        return Err(QError::PreconditionViolated("τ23 ≠ τ13 − τ12".into()));
    }
    let p = r.p();
    let mut rep = Report::new("sigma-cocycle", "sigma-cocycle");
    let sign = if p % 2 == 0 { 1 } else { -1 };
    let mut rhs = r.add(&d13.sigma, &r.scale(&d12.sigma, sign));
    let m12 = r.neg(&d12.tau);
    for nu in 1..p {
        let c = (binom(p as u64, nu as u64) / p as u128) as i64;
        let t = r.mul(&r.pow(&d13.tau, nu)?, &r.pow(&m12, p - nu)?)?;
        rhs = r.add(&rhs, &r.scale(&t, c));
    }
    rep.check(r.equal(&d23.sigma, &rhs), || format!("σ23={} rhs={}", r.render(&d23.sigma), r.render(&rhs)));
    Ok(rep)
}

/// Dense univariate polynomial over Q.
#[derive(Clone, Debug, PartialEq)]
pub struct QPoly(pub Vec<BigRational>);

impl QPoly {
    pub fn constant(c: BigRational) -> Self {
        QPoly(vec![c]).trim()
    }
    pub fn x() -> Self {
        QPoly(vec![BigRational::zero(), BigRational::one()])
    }
    fn trim(mut self) -> Self {
        while self.0.last().map(|c| c.is_zero()).unwrap_or(false) {
            self.0.pop();
        }
        self
    }
    pub fn add(&self, o: &QPoly) -> QPoly {
        let n = self.0.len().max(o.0.len());
        let z = BigRational::zero();
        QPoly((0..n).map(|i| self.0.get(i).unwrap_or(&z) + o.0.get(i).unwrap_or(&z)).collect()).trim()
    }
    pub fn scale(&self, c: &BigRational) -> QPoly {
        QPoly(self.0.iter().map(|a| a * c).collect()).trim()
    }
    pub fn sub(&self, o: &QPoly) -> QPoly {
        self.add(&o.scale(&-BigRational::one()))
    }
    pub fn mul(&self, o: &QPoly) -> QPoly {
        if self.0.is_empty() || o.0.is_empty() {
            return QPoly(Vec::new());
        }
        let mut r = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                r[i + j] += a * b;
            }
        }
        QPoly(r).trim()
    }
    pub fn pow(&self, e: u32) -> QPoly {
        let mut acc = QPoly::constant(BigRational::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }
    /// f(g) by Horner's rule.
    pub fn compose(&self, g: &QPoly) -> QPoly {
        let mut acc = QPoly(Vec::new());
        for c in self.0.iter().rev() {
            acc = acc.mul(g).add(&QPoly::constant(c.clone()));
        }
        acc
    }
}

/// Images Y_k of δ^k(τ) in Q[X] for the q = 1 envelope with center a:
/// τ ↦ X, φ(X) = ((a + pX)^p − a)/p, δ(f) = (f(φX) − f^p)/p.
pub fn delta_tau_images(p: u32, a: &BigInt, depth: u32) -> QResult<Vec<QPoly>> {
    let pr = BigRational::from_integer(BigInt::from(p));
    let ar = BigRational::from_integer(a.clone());
    let da = (a - a.pow(p)) / BigInt::from(p);
    if !(&da % BigInt::from(p)).is_zero() {
        return Err(QError::BadCenter(format!("δ({a}) = {da} is not divisible by p")));
    }
    let lin = QPoly(vec![ar.clone(), pr.clone()]);
    let phix = lin.pow(p).sub(&QPoly::constant(ar)).scale(&(BigRational::one() / &pr));
    let mut ys = vec![QPoly::x()];
    for _ in 0..depth {
        let f = ys.last().unwrap();
        let d = f.compose(&phix).sub(&f.pow(p)).scale(&(BigRational::one() / &pr));
        ys.push(d);
    }
    Ok(ys)
}

/// Comparison map from a q = 1 envelope to Z/p^{N+1}[X_1, …, X_d]_PD, τ_i ↦ X_i.
pub struct PdComparison {
    pub env: Arc<EnvRing<BaseRing>>,
    pub pd: PDRing,
    pub depth: u32,
    /// ys[v][k]: image of δ^k(τ_v) in Q[X_v].
    ys: Vec<Vec<QPoly>>,
    memo: RwLock<HashMap<(usize, Vec<u8>), Arc<Vec<(u32, BigRational)>>>>,
}

impl PdComparison {
    /// Images are computed in the torsion-free lift, so an envelope element known at level N
    /// maps to a PD element known at level N with no precision escalation.
    pub fn new(env: Arc<EnvRing<BaseRing>>, depth: u32) -> QResult<Self> {
        if !env.base().is_q1() {
            return Err(QError::RingMismatch("PD comparison needs the q = 1 envelope".into()));
        }
        if env.kmax() > depth {
            return Err(QError::DepthExceeded(format!("envelope depth {} exceeds requested {}", env.kmax(), depth)));
        }
        let pd = PDRing::new(env.p(), env.n, env.d)?;
        let mut ys = Vec::new();
        for v in 0..env.d {
            let a = BigInt::from(env.centers[v].c[0]);
            ys.push(delta_tau_images(env.p(), &a, depth)?);
        }
        Ok(PdComparison { env, pd, depth, ys, memo: RwLock::new(HashMap::new()) })
    }

    /// Replace the image of δ^k(τ_v) by image + X_v (a deliberately wrong dictionary).
    pub fn with_perturbed_image(mut self, v: usize, k: usize) -> Self {
        self.ys[v][k] = self.ys[v][k].add(&QPoly::x());
        self.memo.write().clear();
        self
    }

    /// PD coordinates (n, n!·c_n) of ∏_k Y_k^{digits[k]} in the single variable v.
    fn univariate(&self, v: usize, digits: &[u8]) -> QResult<Arc<Vec<(u32, BigRational)>>> {
        let key = (v, digits.to_vec());
        if let Some(r) = self.memo.read().get(&key) {
            return Ok(r.clone());
        }
        let mut poly = QPoly::constant(BigRational::one());
        for (k, &a) in digits.iter().enumerate() {
            if a == 0 {
                continue;
            }
            if k as u32 > self.depth {
                return Err(QError::DepthExceeded(format!("δ^{k}(τ_{v}) beyond depth {}", self.depth)));
            }
            poly = poly.mul(&self.ys[v][k].pow(a as u32));
        }
        let p = self.env.p();
        let mut out = Vec::new();
        for (n, c) in poly.0.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let pdc = c * BigRational::from_integer(factorial(n as u64));
            if vp_rational(p, &pdc) < 0 {
                return Err(QError::NotDivisible(format!("PD coefficient {pdc} of X^[{n}] is not p-integral")));
            }
            out.push((n as u32, pdc));
        }
        let out = Arc::new(out);
        self.memo.write().insert(key, out.clone());
        Ok(out)
    }

    pub fn mono_image(&self, m: &EMono) -> QResult<PDElt> {
        let e = &self.env;
        let n = self.pd.prec();
        let mut acc: Vec<(PDMono, BigRational)> = vec![(vec![0; e.d], BigRational::one())];
        for v in 0..e.d {
            let digits: Vec<u8> = (0..e.levels).map(|k| m.0[e.slot(v, k)]).collect();
            let uni = self.univariate(v, &digits)?;
            let mut next = Vec::with_capacity(acc.len() * uni.len());
            for (mm, c) in &acc {
                for (k, c2) in uni.iter() {
                    let mut m2 = mm.clone();
                    m2[v] = *k;
                    next.push((m2, c * c2));
                }
            }
            acc = next;
        }
        let mut out = HashMap::new();
        for (m, c) in acc {
            out.insert(m, reduce_rational(&self.pd.coeff, &c, n)?);
        }
        Ok(self.pd.finish(n, out))
    }

    pub fn env_to_pd(&self, x: &EnvElt<BaseElt>) -> QResult<PDElt> {
        let mut acc = self.pd.zero_at(x.level);
        for (m, c) in &x.terms {
            let img = self.mono_image(m)?;
            let c = self.pd.coeff.adopt(c);
            acc = self.pd.add(&acc, &self.pd.mul_base(&img, &c)?);
        }
        Ok(self.pd.truncate(&acc, x.level))
    }

    /// Dictionary δ^k(τ_v) ↦ PD expression plus the σ normalization constant.
    pub fn dictionary_json(&self) -> QResult<serde_json::Value> {
        let e = &self.env;
        let mut rows = Vec::new();
        for v in 0..e.d {
            for k in 0..e.levels {
                let x = e.delta_tau(v, k)?;
                rows.push(serde_json::json!({
                    "var": v,
                    "level": k,
                    "lhs": e.render(&x),
                    "rhs": self.pd.render(&self.env_to_pd(&x)?),
                }));
            }
        }
        let p = e.p() as u64;
        Ok(serde_json::json!({
            "p": e.p(),
            "prec": e.n,
            "depth": self.depth,
            "normalization": "tau^[n] = tau^n / n!",
            "sigma_factor": factorial(p - 1).to_string(),
            "images": rows,
        }))
    }
}

/// PD comparison checks on a q = 1 envelope: τ^p = pσ, multiplicativity,
/// θ ↔ ∂_X and σ ↦ (p−1)! X^{[p]}.
pub fn pd_comparison_check(cmp: &PdComparison, samples: &[EnvElt<BaseElt>]) -> QResult<Report> {
    let e = &cmp.env;
    let p = e.p();
    let mut rep = Report::new("pd-comparison", "pd-comparison");
    let zero = e.coeff.elt_zero(e.coeff.n());
    for i in 0..e.d {
        let a = &e.centers[i];
        let da = e.coeff.e_delta(a)?;
        let b = e.coeff.e_divide_p(&da)?;
        let b = if e.coeff.e_scale(&b, p as i64) == da { b } else { zero.clone() };
        let s = sigma_of(e, i, &b)?;
        rep.check(s.identity_holds(e.as_ref())?, || format!("τ{i}^p ≠ pσ{i}"));
        let img = cmp.env_to_pd(&s.sigma)?;
        let fact = factorial(p as u64 - 1).to_i64().unwrap();
        let expect = cmp.pd.scale(&cmp.pd.div_power(i, p), fact);
        let expect = cmp.pd.truncate(&expect, img.level);
        rep.check(cmp.pd.equal(&img, &expect), || format!("σ{i} ↦ {}", cmp.pd.render(&img)));
    }
    let thetas: Vec<_> = (0..e.d).map(|i| crate::twisted::qhiggs_derivation(e.as_ref(), i)).collect::<QResult<_>>()?;
    for w in samples.windows(2) {
        let (x, y) = (&w[0], &w[1]);
        if e.elt_weight(x) + e.elt_weight(y) <= e.wcap {
            let lhs = cmp.env_to_pd(&e.mul(x, y)?)?;
            let rhs = cmp.pd.mul(&cmp.env_to_pd(x)?, &cmp.env_to_pd(y)?)?;
            rep.check(cmp.pd.equal(&lhs, &rhs), || format!("multiplicativity at x={} y={}", e.render(x), e.render(y)));
        }
    }
    for x in samples {
        let px = cmp.env_to_pd(x)?;
        for (i, th) in thetas.iter().enumerate() {
            let lhs = cmp.env_to_pd(&th.apply(e.as_ref(), x)?)?;
            let rhs = cmp.pd.derive(i, &px);
            rep.check(cmp.pd.equal(&lhs, &rhs), || format!("θ{i} vs ∂X{i} at {}", e.render(x)));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmp(p: u32, n: u32, d: usize, w: u32, a: i64) -> PdComparison {
        let b = BaseRing::q1(p, n).unwrap();
        let cs: Vec<BaseElt> = (0..d).map(|_| b.from_int(a)).collect();
        let e = EnvRing::<BaseRing>::over_base(&b, &cs, n, w).unwrap();
        let k = e.kmax();
        PdComparison::new(Arc::new(e), k).unwrap()
    }

    #[test]
    fn pd_products() {
        let r = PDRing::new(2, 3, 1).unwrap();
        let x = r.var(0);
        assert_eq!(r.mul(&x, &x).unwrap(), r.scale(&r.div_power(0, 2), 2));
        let x2 = r.div_power(0, 2);
        assert_eq!(r.mul(&x2, &x2).unwrap(), r.scale(&r.div_power(0, 4), 6));
        assert_eq!(r.derive(0, &r.div_power(0, 3)), x2);
    }

    #[test]
    fn legendre_units() {
        for p in [2u32, 3, 5] {
            for n in 0..60u64 {
                assert_eq!(vp_rational(p, &legendre_unit(p, n)), 0, "p={p} n={n}");
            }
        }
    }

    #[test]
    fn dictionary_p2() {
        let c = cmp(2, 3, 1, 4, 0);
        let e = c.env.clone();
        let dt = c.env_to_pd(&e.delta_tau(0, 1).unwrap()).unwrap();
        assert_eq!(dt, c.pd.div_power(0, 2));
        let x = e.mul(&e.tau(0).unwrap(), &e.delta_tau(0, 1).unwrap()).unwrap();
        assert_eq!(c.env_to_pd(&x).unwrap(), c.pd.scale(&c.pd.div_power(0, 3), 3));
    }

    #[test]
    fn bad_center() {
        assert!(matches!(delta_tau_images(2, &BigInt::from(2), 1), Err(QError::BadCenter(_))));
        let b = BaseRing::q1(3, 2).unwrap();
        let e = EnvRing::<BaseRing>::over_base(&b, &[b.from_int(0)], 2, 3).unwrap();
        assert!(matches!(sigma_of(&e, 0, &b.from_int(1)), Err(QError::BadCenter(_))));
    }

    #[test]
    fn comparison_checks() {
        for (p, w, a) in [(2u32, 7u32, 0i64), (2, 7, 1), (3, 8, 0), (3, 8, 1)] {
            let c = cmp(p, 3, 1, w, a);
            let e = c.env.clone();
            let mut r = crate::sample::rng(11);
            let samples: Vec<_> = (0..10).map(|_| crate::sample::env_elt(&mut r, &e, 3, w / 2)).collect();
            let rep = pd_comparison_check(&c, &samples).unwrap();
            assert!(rep.passed, "p={p} a={a} {:?}", rep.witness);
        }
    }

    #[test]
    fn sigma_identities_flat() {
        for p in [2u32, 3] {
            let b = BaseRing::q1(p, 3).unwrap();
            let cs: Vec<BaseElt> = (0..3).map(|_| b.from_int(0)).collect();
            let e = EnvRing::<BaseRing>::over_base(&b, &cs, 3, p).unwrap();
            let tau = |l: usize| e.tau(l).unwrap();
            let t = |l: usize| e.t(l).unwrap();
            let zero = e.zero();
            let data = |l: usize, m: usize| sigma_of_data(&e, &e.sub(&tau(l), &tau(m)), &t(m), &zero).unwrap();
            let (d01, d10, d02, d12) = (data(0, 1), data(1, 0), data(0, 2), data(1, 2));
            assert!(d01.identity_holds(&e).unwrap());
            assert!(sigma_antisym_check(&e, &d01, &d10).unwrap().passed);
            assert!(sigma_cocycle_check(&e, &d01, &d02, &d12).unwrap().passed);
            let mut bad = d01.clone();
            bad.sigma = e.add(&bad.sigma, &e.one());
            assert!(!sigma_cocycle_check(&e, &bad, &d02, &d12).unwrap().passed);
        }
    }
}
