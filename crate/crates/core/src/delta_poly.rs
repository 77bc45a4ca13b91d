//! Free δ-polynomial rings C[S_1, …, S_d]_δ with frame constants t_j (δ(t_j) = 0).
//!
//! Variables are V_{i,k} = δ^k(S_i). Exponents are unrestricted.

use crate::error::{QError, QResult};
use crate::ring::{binom, delta_sum_correction, DeltaRing, Ring};
use crate::base_prism::{BaseElt, BaseRing};
use parking_lot::RwLock;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PVar {
    /// δ^k(S_i)
    V(u16, u16),
    /// frame constant t_j
    T(u16),
}

impl PVar {
    pub fn name(&self) -> String {
        match self {
            PVar::V(i, 0) => format!("S{i}"),
            PVar::V(i, 1) => format!("(delta S{i})"),
            PVar::V(i, k) => format!("(delta^{k} S{i})"),
            PVar::T(j) => format!("t{j}"),
        }
    }
}

/// Monomial as a sorted list of (variable, exponent > 0); graded lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PMono(pub Vec<(PVar, u32)>);

impl PMono {
    pub fn one() -> Self {
        PMono(Vec::new())
    }
    pub fn var(v: PVar, e: u32) -> Self {
        if e == 0 {
            PMono::one()
        } else {
            PMono(vec![(v, e)])
        }
    }
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }
    pub fn exp(&self, v: PVar) -> u32 {
        self.0.iter().find(|(w, _)| *w == v).map(|(_, e)| *e).unwrap_or(0)
    }
    pub fn mul(&self, other: &PMono) -> PMono {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0, self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        PMono(out)
    }
    pub fn pow(&self, e: u32) -> PMono {
        if e == 0 {
            return PMono::one();
        }
        PMono(self.0.iter().map(|&(v, a)| (v, a * e)).collect())
    }
    /// Remove variable `v`, returning its exponent.
    pub fn without(&self, v: PVar) -> (PMono, u32) {
        let e = self.exp(v);
        (PMono(self.0.iter().copied().filter(|(w, _)| *w != v).collect()), e)
    }
    pub fn render(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(v, e)| if *e == 1 { v.name() } else { format!("(^ {} {e})", v.name()) })
            .collect();
        match parts.len() {
            0 => "1".into(),
            1 => parts[0].clone(),
            _ => format!("(* {})", parts.join(" ")),
        }
    }
}

impl Ord for PMono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for PMono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaPoly<E> {
    pub level: u32,
    pub terms: BTreeMap<PMono, E>,
}

/// Default monomial-count cap, overridable with QPRISM_BUDGET.
pub fn default_budget() -> usize {
    std::env::var("QPRISM_BUDGET").ok().and_then(|s| s.parse().ok()).unwrap_or(200_000)
}

pub struct DeltaPolyRing<C: DeltaRing> {
    pub coeff: Arc<C>,
    pub nvars: usize,
    pub nconst: usize,
    pub cap: usize,
    dmemo: RwLock<HashMap<PMono, DeltaPoly<C::Elem>>>,
}

impl<C: DeltaRing> DeltaPolyRing<C> {
    pub fn new(coeff: Arc<C>, nvars: usize, nconst: usize) -> Self {
        DeltaPolyRing { coeff, nvars, nconst, cap: default_budget(), dmemo: RwLock::new(HashMap::new()) }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    fn check_var(&self, v: PVar) -> QResult<()> {
        let ok = match v {
            PVar::V(i, _) => (i as usize) < self.nvars,
            PVar::T(j) => (j as usize) < self.nconst,
        };
        if ok {
            Ok(())
        } else {
            Err(QError::RingMismatch(format!("variable {v:?} not in ring")))
        }
    }

    pub fn constant(&self, c: &C::Elem) -> DeltaPoly<C::Elem> {
        let level = self.coeff.level(c);
        let mut terms = BTreeMap::new();
        if !self.coeff.is_zero(c) {
            terms.insert(PMono::one(), c.clone());
        }
        DeltaPoly { level, terms }
    }

    pub fn monomial(&self, m: PMono, c: &C::Elem) -> QResult<DeltaPoly<C::Elem>> {
        for (v, _) in &m.0 {
            self.check_var(*v)?;
        }
        let level = self.coeff.level(c);
        let mut terms = BTreeMap::new();
        if !self.coeff.is_zero(c) {
            terms.insert(m, c.clone());
        }
        Ok(DeltaPoly { level, terms })
    }

    pub fn var(&self, v: PVar) -> QResult<DeltaPoly<C::Elem>> {
        self.monomial(PMono::var(v, 1), &self.coeff.one())
    }

    /// S_i
    pub fn s(&self, i: usize) -> QResult<DeltaPoly<C::Elem>> {
        self.var(PVar::V(i as u16, 0))
    }

    /// t_j
    pub fn t(&self, j: usize) -> QResult<DeltaPoly<C::Elem>> {
        self.var(PVar::T(j as u16))
    }

    pub fn scalar_mul(&self, c: &C::Elem, x: &DeltaPoly<C::Elem>) -> QResult<DeltaPoly<C::Elem>> {
        let level = x.level.min(self.coeff.level(c));
        let mut terms = BTreeMap::new();
        for (m, a) in &x.terms {
            let v = self.coeff.mul(a, c)?;
            if !self.coeff.is_zero(&v) {
                terms.insert(m.clone(), v);
            }
        }
        Ok(self.normalize(DeltaPoly { level, terms }))
    }

    fn normalize(&self, x: DeltaPoly<C::Elem>) -> DeltaPoly<C::Elem> {
        let level = x.terms.values().map(|c| self.coeff.level(c)).fold(x.level, u32::min);
        let terms = x
            .terms
            .into_iter()
            .filter_map(|(m, c)| {
                let c = self.coeff.truncate(&c, level);
                if self.coeff.is_zero(&c) {
                    None
                } else {
                    Some((m, c))
                }
            })
            .collect();
        DeltaPoly { level, terms }
    }

    fn mono_poly(&self, m: PMono, level: u32) -> DeltaPoly<C::Elem> {
        let mut terms = BTreeMap::new();
        terms.insert(m, self.coeff.truncate(&self.coeff.one(), level));
        self.normalize(DeltaPoly { level, terms })
    }

    /// δ of a monomial with coefficient 1, at full precision.
    fn delta_mono(&self, m: &PMono) -> QResult<DeltaPoly<C::Elem>> {
        if let Some(d) = self.dmemo.read().get(m) {
            return Ok(d.clone());
        }
        let prec = self.coeff.prec();
        let p = self.p();
        let res = if m.0.is_empty() {
            self.zero_at(prec)
        } else {
            let (v, e) = *m.0.last().unwrap();
            let rest = PMono(m.0[..m.0.len() - 1].to_vec());
            // δ(v^e)
            let dve = match v {
                PVar::T(_) => self.zero_at(prec),
                PVar::V(i, k) => {
                    let dv = PMono::var(PVar::V(i, k + 1), 1);
                    let modulus = self.base().ppow(self.base().n() + 1);
                    let mut terms = BTreeMap::new();
                    for j in 1..=e {
                        if j > self.base().n() + 1 {
                            break;
                        }
                        let c = (binom(e as u64, j as u64) as i128 % modulus)
                            * (self.base().ppow(j - 1) % modulus)
                            % modulus;
                        let mono = PMono::var(v, p * (e - j)).mul(&dv.pow(j));
                        let cc = self.coeff.from_int(c as i64);
                        if !self.coeff.is_zero(&cc) {
                            terms.insert(mono, cc);
                        }
                    }
                    DeltaPoly { level: prec, terms }
                }
            };
            if rest.0.is_empty() {
                dve
            } else {
                let drest = self.delta_mono(&rest)?;
                let ve = PMono::var(v, e);
                // δ(uv) = δ(u)v^p + u^pδ(v) + pδ(u)δ(v)
                let a = self.mul(&drest, &self.mono_poly(ve.pow(p), prec))?;
                let b = self.mul(&self.mono_poly(rest.pow(p), prec), &dve)?;
                let c = self.scale(&self.mul(&drest, &dve)?, p as i64);
                self.add(&self.add(&a, &b), &c)
            }
        };
        self.dmemo.write().insert(m.clone(), res.clone());
        Ok(res)
    }

    fn delta_term(&self, m: &PMono, c: &C::Elem, level: u32) -> QResult<DeltaPoly<C::Elem>> {
        let p = self.p();
        let dc = self.coeff.delta(c)?;
        let first = self.scalar_mul(&dc, &self.mono_poly(m.pow(p), level))?;
        if m.0.is_empty() {
            return Ok(first);
        }
        let phic = self.coeff.phi(c)?;
        let second = self.scalar_mul(&phic, &self.delta_mono(m)?)?;
        Ok(self.add(&first, &second))
    }

    /// Binary splitting: returns (Σ terms, δ(Σ terms)).
    fn delta_split(&self, terms: &[(PMono, C::Elem)], level: u32) -> QResult<(DeltaPoly<C::Elem>, DeltaPoly<C::Elem>)> {
        if terms.len() == 1 {
            let (m, c) = &terms[0];
            let x = self.monomial(m.clone(), &self.coeff.truncate(c, level))?;
            let d = self.delta_term(m, c, level)?;
            return Ok((x, d));
        }
        let mid = terms.len() / 2;
        let (a, da) = self.delta_split(&terms[..mid], level)?;
        let (b, db) = self.delta_split(&terms[mid..], level)?;
        let corr = delta_sum_correction(self, &a, &b)?;
        let d = self.sub(&self.add(&da, &db), &corr);
        Ok((self.add(&a, &b), d))
    }

    /// Plain ring substitution of frame constant t_j by a polynomial (not δ-coherent).
    pub fn substitute_const(&self, x: &DeltaPoly<C::Elem>, j: usize, img: &DeltaPoly<C::Elem>) -> QResult<DeltaPoly<C::Elem>> {
        let v = PVar::T(j as u16);
        let mut pows: Vec<DeltaPoly<C::Elem>> = vec![self.truncate(&self.one(), img.level)];
        let mut acc = self.zero_at(x.level);
        for (m, c) in &x.terms {
            let (rest, e) = m.without(v);
            while pows.len() <= e as usize {
                let next = self.mul(pows.last().unwrap(), img)?;
                pows.push(next);
            }
            let t = self.mul(&self.monomial(rest, c)?, &pows[e as usize])?;
            acc = self.add(&acc, &t);
        }
        Ok(acc)
    }

    /// Coefficient of a monomial (zero if absent).
    pub fn coeff_of(&self, x: &DeltaPoly<C::Elem>, m: &PMono) -> C::Elem {
        x.terms.get(m).cloned().unwrap_or_else(|| self.coeff.zero_at(x.level))
    }

    /// δ-coherent evaluation into a δ-ring. Images of V_{i,k} default to δ^k of the
    /// highest supplied lower image; supplied consecutive images are checked for coherence.
    pub fn substitute<T: DeltaRing>(
        &self,
        target: &T,
        x: &DeltaPoly<C::Elem>,
        coeff_map: &dyn Fn(&C::Elem) -> QResult<T::Elem>,
        images: &BTreeMap<PVar, T::Elem>,
    ) -> QResult<T::Elem> {
        let mut imgs: BTreeMap<PVar, T::Elem> = images.clone();
        for (v, img) in images {
            if let PVar::V(i, k) = v {
                if *k > 0 {
                    if let Some(prev) = images.get(&PVar::V(*i, k - 1)) {
                        let d = target.delta(prev)?;
                        if !target.equal(&d, img) {
                            return Err(QError::DeltaIncoherent(format!("image of {} is not δ of the previous image", v.name())));
                        }
                    }
                }
            }
        }
        let mut acc = target.zero_at(x.level.min(target.prec()));
        for (m, c) in &x.terms {
            let mut t = coeff_map(c)?;
            for (v, e) in &m.0 {
                let img = self.image_of(target, *v, &mut imgs)?;
                t = target.mul(&t, &target.pow(&img, *e)?)?;
            }
            acc = target.add(&acc, &t);
        }
        Ok(acc)
    }

    fn image_of<T: DeltaRing>(&self, target: &T, v: PVar, imgs: &mut BTreeMap<PVar, T::Elem>) -> QResult<T::Elem> {
        if let Some(x) = imgs.get(&v) {
            return Ok(x.clone());
        }
        match v {
            PVar::T(_) => Err(QError::DeltaIncoherent(format!("no image for {}", v.name()))),
            PVar::V(i, 0) => Err(QError::DeltaIncoherent(format!("no image for S{i}"))),
            PVar::V(i, k) => {
                let prev = self.image_of(target, PVar::V(i, k - 1), imgs)?;
                let d = target.delta(&prev)?;
                imgs.insert(v, d.clone());
                Ok(d)
            }
        }
    }

    pub fn to_json(&self, x: &DeltaPoly<C::Elem>) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = x
            .terms
            .iter()
            .map(|(m, c)| serde_json::json!([m.render(), self.coeff.render(c)]))
            .collect();
        serde_json::json!({"level": x.level, "terms": terms})
    }
}

impl<C: DeltaRing> Ring for DeltaPolyRing<C> {
    type Elem = DeltaPoly<C::Elem>;

    fn base(&self) -> &BaseRing {
        self.coeff.base()
    }
    fn prec(&self) -> u32 {
        self.coeff.prec()
    }
    fn zero_at(&self, level: u32) -> Self::Elem {
        DeltaPoly { level: level.min(self.prec()), terms: BTreeMap::new() }
    }
    fn from_base(&self, b: &BaseElt) -> Self::Elem {
        self.constant(&self.coeff.from_base(b))
    }
    fn level(&self, x: &Self::Elem) -> u32 {
        x.level
    }
    fn render(&self, x: &Self::Elem) -> String {
        let parts: Vec<String> = x
            .terms
            .iter()
            .map(|(m, c)| {
                if m.0.is_empty() {
                    self.coeff.render(c)
                } else {
                    format!("(* {} {})", self.coeff.render(c), m.render())
                }
            })
            .collect();
        match parts.len() {
            0 => "0".into(),
            1 => parts[0].clone(),
            _ => format!("(+ {})", parts.join(" ")),
        }
    }
    fn truncate(&self, x: &Self::Elem, level: u32) -> Self::Elem {
        let level = level.min(x.level);
        self.normalize(DeltaPoly { level, terms: x.terms.clone() })
    }
    fn is_zero(&self, x: &Self::Elem) -> bool {
        x.terms.values().all(|c| self.coeff.is_zero(&self.coeff.truncate(c, x.level)))
    }
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem {
        let level = x.level.min(y.level);
        let mut terms = x.terms.clone();
        for (m, c) in &y.terms {
            match terms.get_mut(m) {
                Some(a) => *a = self.coeff.add(a, c),
                None => {
                    terms.insert(m.clone(), c.clone());
                }
            }
        }
        self.normalize(DeltaPoly { level, terms })
    }
    fn neg(&self, x: &Self::Elem) -> Self::Elem {
        DeltaPoly { level: x.level, terms: x.terms.iter().map(|(m, c)| (m.clone(), self.coeff.neg(c))).collect() }
    }
    fn scale(&self, x: &Self::Elem, n: i64) -> Self::Elem {
        let terms = x.terms.iter().map(|(m, c)| (m.clone(), self.coeff.scale(c, n))).collect();
        self.normalize(DeltaPoly { level: x.level, terms })
    }
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> QResult<Self::Elem> {
        let level = x.level.min(y.level);
        let mut terms: BTreeMap<PMono, C::Elem> = BTreeMap::new();
        for (m1, c1) in &x.terms {
            for (m2, c2) in &y.terms {
                let c = self.coeff.mul(c1, c2)?;
                if self.coeff.is_zero(&c) {
                    continue;
                }
                let m = m1.mul(m2);
                match terms.get_mut(&m) {
                    Some(a) => *a = self.coeff.add(a, &c),
                    None => {
                        terms.insert(m, c);
                    }
                }
            }
        }
        let out = self.normalize(DeltaPoly { level, terms });
        if out.terms.len() > self.cap {
            return Err(QError::BudgetExceeded(format!("{} monomials exceed cap {}", out.terms.len(), self.cap)));
        }
        Ok(out)
    }
    fn mul_base(&self, x: &Self::Elem, b: &BaseElt) -> QResult<Self::Elem> {
        self.scalar_mul(&self.coeff.from_base(b), x)
    }
    fn mul_raise(&self, x: &Self::Elem, g: &BaseElt) -> QResult<Self::Elem> {
        let level = (x.level + 1).min(g.level).min(self.prec());
        let mut terms = BTreeMap::new();
        for (m, c) in &x.terms {
            terms.insert(m.clone(), self.coeff.mul_raise(&self.coeff.truncate(c, x.level), g)?);
        }
        Ok(self.normalize(DeltaPoly { level, terms }))
    }
    fn divide_p(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("division by p at level 0".into()));
        }
        let mut terms = BTreeMap::new();
        for (m, c) in &x.terms {
            terms.insert(m.clone(), self.coeff.divide_p(c)?);
        }
        Ok(self.normalize(DeltaPoly { level: x.level - 1, terms }))
    }
    fn invert(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        if x.terms.keys().any(|m| !m.0.is_empty()) {
            return Err(QError::NotInvertible("non-constant polynomial".into()));
        }
        let c = self.coeff_of(x, &PMono::one());
        Ok(self.constant(&self.coeff.invert(&self.coeff.truncate(&c, x.level))?))
    }
}

impl<C: DeltaRing> DeltaRing for DeltaPolyRing<C> {
    fn delta(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("delta of a level-0 polynomial".into()));
        }
        let level = x.level;
        let terms: Vec<(PMono, C::Elem)> = x.terms.iter().map(|(m, c)| (m.clone(), c.clone())).collect();
        if terms.is_empty() {
            return Ok(self.zero_at(level - 1));
        }
        let (_, d) = self.delta_split(&terms, level)?;
        Ok(self.truncate(&d, level - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::witt2_hom_check;

    fn ring(p: u32, n: u32) -> DeltaPolyRing<BaseRing> {
        DeltaPolyRing::new(Arc::new(BaseRing::q(p, n).unwrap()), 2, 2)
    }

    #[test]
    fn products() {
        let r = ring(2, 3);
        let s = r.s(0).unwrap();
        let s2 = r.mul(&s, &s).unwrap();
        assert_eq!(s2.terms.len(), 1);
        assert_eq!(s2.terms.keys().next().unwrap(), &PMono::var(PVar::V(0, 0), 2));
        let xi = r.from_base(&r.base().xi());
        let xs = r.mul(&xi, &s).unwrap();
        let lhs = r.mul(&xs, &xs).unwrap();
        let rhs = r.mul(&r.mul(&xi, &xi).unwrap(), &s2).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn delta_of_variable_and_square() {
        let r = ring(2, 3);
        let s = r.s(0).unwrap();
        assert_eq!(r.delta(&s).unwrap(), r.truncate(&r.var(PVar::V(0, 1)).unwrap(), 2));
        let s2 = r.mul(&s, &s).unwrap();
        let v1 = r.var(PVar::V(0, 1)).unwrap();
        let expect = r.add(
            &r.scale(&r.mul(&s2, &v1).unwrap(), 2),
            &r.scale(&r.mul(&v1, &v1).unwrap(), 2),
        );
        assert!(r.equal(&r.delta(&s2).unwrap(), &expect));
    }

    #[test]
    fn delta_xi_s_minus_t() {
        let r = ring(2, 3);
        let b = r.base().clone();
        let s = r.s(0).unwrap();
        let t = r.t(0).unwrap();
        let xi = r.from_base(&b.xi());
        let x = r.sub(&r.mul(&xi, &s).unwrap(), &t);
        let d = r.delta(&x).unwrap();
        let v1 = r.var(PVar::V(0, 1)).unwrap();
        let phixi = r.from_base(&b.e_phi(&b.xi()));
        let dxi = r.from_base(&b.e_delta(&b.xi()).unwrap());
        let expect = r.add(
            &r.add(&r.mul(&phixi, &v1).unwrap(), &r.mul(&dxi, &r.mul(&s, &s).unwrap()).unwrap()),
            &r.sub(&r.mul(&xi, &r.mul(&t, &s).unwrap()).unwrap(), &r.mul(&t, &t).unwrap()),
        );
        assert!(r.equal(&d, &expect));
    }

    #[test]
    fn phi_examples() {
        let r = ring(3, 2);
        let t = r.t(0).unwrap();
        assert!(r.equal(&r.phi(&t).unwrap(), &r.pow(&t, 3).unwrap()));
        let s = r.s(0).unwrap();
        let expect = r.add(&r.pow(&s, 3).unwrap(), &r.scale(&r.var(PVar::V(0, 1)).unwrap(), 3));
        assert!(r.equal(&r.phi(&s).unwrap(), &expect));
        let five = r.from_int(5);
        assert!(r.equal(&r.phi(&five).unwrap(), &five));
    }

    #[test]
    fn substitution() {
        let r = ring(2, 2);
        let b = r.base().clone();
        let s = r.s(0).unwrap();
        let t = r.t(0).unwrap();
        let a = r.from_base(&b.from_int(3));
        let x = r.add(&r.sub(&r.mul(&r.from_base(&b.xi()), &s).unwrap(), &t), &a);
        let mut imgs = BTreeMap::new();
        imgs.insert(PVar::V(0, 0), r.zero());
        imgs.insert(PVar::T(0), t.clone());
        let y = r.substitute(&r, &x, &|c| Ok(r.constant(c)), &imgs).unwrap();
        assert!(r.equal(&y, &r.sub(&a, &t)));
        let mut id = BTreeMap::new();
        id.insert(PVar::V(0, 0), s.clone());
        id.insert(PVar::V(1, 0), r.s(1).unwrap());
        id.insert(PVar::T(0), t.clone());
        id.insert(PVar::T(1), r.t(1).unwrap());
        let z = r.mul(&r.delta(&x).unwrap(), &s).unwrap();
        assert!(r.equal(&r.substitute(&r, &z, &|c| Ok(r.constant(c)), &id).unwrap(), &z));
        let mut bad = BTreeMap::new();
        bad.insert(PVar::V(0, 0), s.clone());
        bad.insert(PVar::V(0, 1), s.clone());
        assert!(matches!(r.substitute(&r, &z, &|c| Ok(r.constant(c)), &bad), Err(QError::DeltaIncoherent(_))));
    }

    #[test]
    fn witt_on_polys() {
        let r = ring(3, 2);
        let b = r.base().clone();
        let s = r.s(0).unwrap();
        let x = r.add(&r.mul(&r.from_base(&b.mu()), &s).unwrap(), &r.t(0).unwrap());
        let y = r.add(&r.s(1).unwrap(), &r.from_int(2));
        assert!(witt2_hom_check(&r, &x, &y).unwrap());
    }
}
