//! Truncated divided δ-envelopes C{τ_1, …, τ_d}_δ with [p]_q τ_i = t_i − a_i and δ(t_i) = 0.
//!
//! Elements are stored on the normal-form basis ∏ δ^k(τ_i)^{a_{ik}}, 0 ≤ a_{ik} < p.
//! A monomial's weight is Σ a_{ik} p^k; every stored monomial has weight at most the cap W.

use crate::base_prism::{BaseElt, BaseRing};
use crate::delta_poly::{DeltaPolyRing, PVar};
use crate::error::{QError, QResult};
use crate::ring::{binom, delta_sum_correction, DeltaRing, Ring};
use parking_lot::RwLock;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Maximum number of (variable, δ-level) digit slots in a monomial.
pub const MAXD: usize = 32;

/// Exponent table, slot `v * levels + k` holding the exponent of δ^k(τ_v).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EMono(pub [u8; MAXD]);

impl EMono {
    pub fn one() -> Self {
        EMono([0; MAXD])
    }
    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }
    fn add(&self, o: &EMono) -> EMono {
        let mut r = [0u8; MAXD];
        for i in 0..MAXD {
            r[i] = self.0[i] + o.0[i];
        }
        EMono(r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvElt<E> {
    pub level: u32,
    pub terms: BTreeMap<EMono, E>,
}

type Expansion<E> = Arc<Vec<(EMono, E)>>;

pub struct EnvRing<C: DeltaRing> {
    pub coeff: Arc<C>,
    pub d: usize,
    pub centers: Vec<C::Elem>,
    pub n: u32,
    pub wcap: u32,
    /// Monomial cap for products, read from QPRISM_BUDGET.
    pub budget: usize,
    /// Number of δ-levels per variable (K + 1 with p^K ≤ W).
    pub levels: usize,
    pub names: Vec<String>,
    ppow: Vec<u32>,
    /// rules[v][k]: normal form of (δ^k τ_v)^p.
    rules: Vec<Vec<EnvElt<C::Elem>>>,
    normmemo: RwLock<HashMap<EMono, Expansion<C::Elem>>>,
    dmemo: RwLock<HashMap<EMono, EnvElt<C::Elem>>>,
    phimemo: RwLock<HashMap<EMono, EnvElt<C::Elem>>>,
}

impl<C: DeltaRing> EnvRing<C> {
    /// Build the envelope over `coeff` with centers `a_i`, precision `n` and weight cap `wcap`.
    /// The coefficient ring must carry precision at least n + K (p^K ≤ W) so that the
    /// K-fold δ used for the rewrite table still lands at level n.
    pub fn build(coeff: Arc<C>, centers: Vec<C::Elem>, n: u32, wcap: u32) -> QResult<Self> {
        let d = centers.len();
        let p = coeff.p();
        let mut kmax = 0u32;
        while (p as u64).pow(kmax + 1) <= wcap as u64 {
            kmax += 1;
        }
        let levels = kmax as usize + 1;
        if d * levels > MAXD {
            return Err(QError::BudgetExceeded(format!("{d} variables with {levels} δ-levels exceed {MAXD} slots")));
        }
        if coeff.prec() < n + kmax {
            return Err(QError::PrecisionExhausted(format!(
                "coefficient precision {} < required {}",
                coeff.prec(),
                n + kmax
            )));
        }
        let ppow = (0..levels).map(|k| p.pow(k as u32)).collect();
        let names = (0..d).map(|v| format!("tau{v}")).collect();
        let mut ring = EnvRing {
            coeff,
            d,
            centers,
            n,
            wcap,
            budget: crate::delta_poly::default_budget(),
            levels,
            names,
            ppow,
            rules: vec![Vec::new(); d],
            normmemo: RwLock::new(HashMap::new()),
            dmemo: RwLock::new(HashMap::new()),
            phimemo: RwLock::new(HashMap::new()),
        };
        for k in 0..kmax {
            let mut new_rules = Vec::with_capacity(d);
            for v in 0..d {
                new_rules.push(ring.derive_rule(v, k)?);
            }
            for (v, r) in new_rules.into_iter().enumerate() {
                ring.rules[v].push(r);
            }
            ring.normmemo.write().clear();
        }
        Ok(ring)
    }

    /// Convenience constructor over the q-base (or q = 1 base) at the escalated precision.
    pub fn over_base(base: &BaseRing, centers: &[BaseElt], n: u32, wcap: u32) -> QResult<EnvRing<BaseRing>> {
        let p = base.p();
        let mut kmax = 0u32;
        while (p as u64).pow(kmax + 1) <= wcap as u64 {
            kmax += 1;
        }
        let cb = Arc::new(base.with_prec(n + kmax)?);
        let cs: Vec<BaseElt> = centers
            .iter()
            .map(|a| cb.from_coeffs(cb.n(), &a.c.iter().map(|&c| c as i128).collect::<Vec<_>>()))
            .collect();
        EnvRing::build(cb, cs, n, wcap)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = names;
        self
    }

    pub fn kmax(&self) -> u32 {
        self.levels as u32 - 1
    }

    pub fn slot(&self, v: usize, k: usize) -> usize {
        v * self.levels + k
    }

    pub fn weight(&self, m: &EMono) -> u32 {
        let mut w = 0;
        for v in 0..self.d {
            for k in 0..self.levels {
                w += m.0[self.slot(v, k)] as u32 * self.ppow[k];
            }
        }
        w
    }

    /// Weight of the digits belonging to variable v.
    pub fn var_weight(&self, m: &EMono, v: usize) -> u32 {
        (0..self.levels).map(|k| m.0[self.slot(v, k)] as u32 * self.ppow[k]).sum()
    }

    pub fn elt_weight(&self, x: &EnvElt<C::Elem>) -> u32 {
        x.terms.keys().map(|m| self.weight(m)).max().unwrap_or(0)
    }

    pub fn rule(&self, v: usize, k: usize) -> &EnvElt<C::Elem> {
        &self.rules[v][k]
    }

    pub fn constant(&self, c: &C::Elem) -> EnvElt<C::Elem> {
        let level = self.coeff.level(c).min(self.n);
        let c = self.coeff.truncate(c, level);
        let mut terms = BTreeMap::new();
        if !self.coeff.is_zero(&c) {
            terms.insert(EMono::one(), c);
        }
        EnvElt { level, terms }
    }

    pub fn mono(&self, m: EMono) -> EnvElt<C::Elem> {
        let mut terms = BTreeMap::new();
        terms.insert(m, self.coeff.truncate(&self.coeff.one(), self.n));
        EnvElt { level: self.n, terms }
    }

    /// δ^k(τ_v) as a basis element.
    pub fn delta_tau(&self, v: usize, k: usize) -> QResult<EnvElt<C::Elem>> {
        if v >= self.d || k >= self.levels {
            return Err(QError::WeightCapTooSmall(format!("δ^{k}(τ_{v}) exceeds the envelope's range")));
        }
        let mut m = EMono::one();
        m.0[self.slot(v, k)] = 1;
        Ok(self.mono(m))
    }

    pub fn tau(&self, v: usize) -> QResult<EnvElt<C::Elem>> {
        self.delta_tau(v, 0)
    }

    /// t_v = a_v + [p]_q τ_v.
    pub fn t(&self, v: usize) -> QResult<EnvElt<C::Elem>> {
        let xi = self.base().xi();
        let x = self.mul_base(&self.tau(v)?, &xi)?;
        Ok(self.add(&self.constant(&self.centers[v]), &x))
    }

    pub fn coeff_of(&self, x: &EnvElt<C::Elem>, m: &EMono) -> C::Elem {
        x.terms.get(m).cloned().unwrap_or_else(|| self.coeff.zero_at(x.level))
    }

    /// Whether x is a C-multiple of 1.
    pub fn is_scalar(&self, x: &EnvElt<C::Elem>) -> bool {
        x.terms.keys().all(|m| m.is_one())
    }

    fn finish(&self, level: u32, acc: HashMap<EMono, C::Elem>) -> EnvElt<C::Elem> {
        let level = acc.values().map(|c| self.coeff.level(c)).fold(level, u32::min);
        let terms = acc
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
        EnvElt { level, terms }
    }

    fn accumulate(&self, acc: &mut HashMap<EMono, C::Elem>, m: EMono, c: C::Elem) {
        match acc.get_mut(&m) {
            Some(a) => *a = self.coeff.add(a, &c),
            None => {
                acc.insert(m, c);
            }
        }
    }

    /// Expansion of a digit table with possibly overflowing exponents, at full precision.
    fn norm_digits(&self, dig: EMono) -> QResult<Expansion<C::Elem>> {
        let p = self.p() as u8;
        let pos = (0..self.d * self.levels).find(|&i| dig.0[i] >= p && self.rules[i / self.levels].len() > i % self.levels);
        let Some(pos) = pos else {
            return Ok(Arc::new(vec![(dig, self.coeff.truncate(&self.coeff.one(), self.n))]));
        };
        if let Some(e) = self.normmemo.read().get(&dig) {
            return Ok(e.clone());
        }
        let (v, k) = (pos / self.levels, pos % self.levels);
        let mut rest = dig;
        rest.0[pos] -= p;
        let mut acc: HashMap<EMono, C::Elem> = HashMap::new();
        for (rm, rc) in &self.rules[v][k].terms {
            let sum = rest.add(rm);
            for (m2, c2) in self.norm_digits(sum)?.iter() {
                let c = self.coeff.mul(rc, c2)?;
                if !self.coeff.is_zero(&c) {
                    self.accumulate(&mut acc, *m2, c);
                }
            }
        }
        let out: Vec<(EMono, C::Elem)> = self.finish(self.n, acc).terms.into_iter().collect();
        let out = Arc::new(out);
        self.normmemo.write().insert(dig, out.clone());
        Ok(out)
    }

    /// Multiply a single term into an accumulator.
    fn mul_terms_into(
        &self,
        acc: &mut HashMap<EMono, C::Elem>,
        m1: &EMono,
        m2: &EMono,
        c: C::Elem,
    ) -> QResult<()> {
        let w = self.weight(m1) + self.weight(m2);
        if w > self.wcap {
            return Err(QError::WeightCapTooSmall(format!("product weight {w} exceeds cap {}", self.wcap)));
        }
        let sum = m1.add(m2);
        let p = self.p() as u8;
        if sum.0.iter().all(|&d| d < p) {
            self.accumulate(acc, sum, c);
            return Ok(());
        }
        for (m, c2) in self.norm_digits(sum)?.iter() {
            let cc = self.coeff.mul(&c, c2)?;
            if !self.coeff.is_zero(&cc) {
                self.accumulate(acc, *m, cc);
            }
        }
        Ok(())
    }

    pub fn scalar_mul(&self, c: &C::Elem, x: &EnvElt<C::Elem>) -> QResult<EnvElt<C::Elem>> {
        let level = x.level.min(self.coeff.level(c)).min(self.n);
        let mut acc = HashMap::new();
        for (m, a) in &x.terms {
            acc.insert(*m, self.coeff.mul(a, c)?);
        }
        Ok(self.finish(level, acc))
    }

    /// Power of a single monomial, normalized.
    fn mono_pow(&self, m: &EMono, e: u32) -> QResult<EnvElt<C::Elem>> {
        if e == 0 {
            return Ok(self.one());
        }
        let w = self.weight(m) * e;
        if w > self.wcap {
            return Err(QError::WeightCapTooSmall(format!("power weight {w} exceeds cap {}", self.wcap)));
        }
        let mut dig = EMono::one();
        for i in 0..MAXD {
            let v = m.0[i] as u32 * e;
            if v > 255 {
                return Err(QError::WeightCapTooSmall("exponent overflow".into()));
            }
            dig.0[i] = v as u8;
        }
        let mut acc = HashMap::new();
        for (m2, c2) in self.norm_digits(dig)?.iter() {
            acc.insert(*m2, c2.clone());
        }
        Ok(self.finish(self.n, acc))
    }

    /// δ of a basis monomial, at full precision.
    fn delta_mono(&self, m: &EMono) -> QResult<EnvElt<C::Elem>> {
        if let Some(r) = self.dmemo.read().get(m) {
            return Ok(r.clone());
        }
        let p = self.p();
        let n = self.n;
        let res = match (0..MAXD).rev().find(|&i| m.0[i] != 0) {
            None => self.zero_at(n),
            Some(pos) => {
                let (v, k) = (pos / self.levels, pos % self.levels);
                let e = m.0[pos] as u32;
                let mut rest = *m;
                rest.0[pos] = 0;
                let mut y = EMono::one();
                y.0[pos] = 1;
                let dy = self.delta_tau(v, k + 1)?;
                // δ(y^e) = Σ_j C(e,j) p^{j-1} y^{p(e-j)} δ(y)^j
                let mut dye = self.zero_at(n);
                for j in 1..=e {
                    let c = binom(e as u64, j as u64) as i64 * (p as i64).pow(j - 1);
                    let t = self.mul(&self.mono_pow(&y, p * (e - j))?, &self.pow(&dy, j)?)?;
                    dye = self.add(&dye, &self.scale(&t, c));
                }
                if rest.is_one() {
                    dye
                } else {
                    let drest = self.delta_mono(&rest)?;
                    let mut ye = EMono::one();
                    ye.0[pos] = e as u8;
                    let a = self.mul(&drest, &self.mono_pow(&ye, p)?)?;
                    let b = self.mul(&self.mono_pow(&rest, p)?, &dye)?;
                    let c = self.scale(&self.mul(&drest, &dye)?, p as i64);
                    self.add(&self.add(&a, &b), &c)
                }
            }
        };
        self.dmemo.write().insert(*m, res.clone());
        Ok(res)
    }

    fn delta_term(&self, m: &EMono, c: &C::Elem) -> QResult<EnvElt<C::Elem>> {
        let p = self.p();
        let dc = self.coeff.delta(c)?;
        let first = self.scalar_mul(&dc, &self.mono_pow(m, p)?)?;
        if m.is_one() {
            return Ok(first);
        }
        let phic = self.coeff.phi(c)?;
        let second = self.scalar_mul(&phic, &self.delta_mono(m)?)?;
        Ok(self.add(&first, &second))
    }

    fn delta_split(&self, terms: &[(EMono, C::Elem)], level: u32) -> QResult<(EnvElt<C::Elem>, EnvElt<C::Elem>)> {
        if terms.len() == 1 {
            let (m, c) = &terms[0];
            let c = self.coeff.truncate(c, level);
            let mut t = BTreeMap::new();
            t.insert(*m, c.clone());
            let x = EnvElt { level, terms: t };
            return Ok((x, self.delta_term(m, &c)?));
        }
        let mid = terms.len() / 2;
        let (a, da) = self.delta_split(&terms[..mid], level)?;
        let (b, db) = self.delta_split(&terms[mid..], level)?;
        let corr = delta_sum_correction(self, &a, &b)?;
        Ok((self.add(&a, &b), self.sub(&self.add(&da, &db), &corr)))
    }

    /// φ of a basis monomial: ∏ ((δ^kτ)^p + p δ^{k+1}τ)^{a}.
    fn phi_mono(&self, m: &EMono) -> QResult<EnvElt<C::Elem>> {
        if let Some(r) = self.phimemo.read().get(m) {
            return Ok(r.clone());
        }
        let p = self.p();
        let mut acc = self.one();
        for pos in 0..MAXD {
            let e = m.0[pos] as u32;
            if e == 0 {
                continue;
            }
            let (v, k) = (pos / self.levels, pos % self.levels);
            let mut y = EMono::one();
            y.0[pos] = 1;
            let py = self.add(&self.mono_pow(&y, p)?, &self.scale(&self.delta_tau(v, k + 1)?, p as i64));
            acc = self.mul(&acc, &self.pow(&py, e)?)?;
        }
        self.phimemo.write().insert(*m, acc.clone());
        Ok(acc)
    }

    /// δ computed as (φ(x) − x^p)/p coordinatewise on the free basis.
    pub fn delta_via_phi(&self, x: &EnvElt<C::Elem>) -> QResult<EnvElt<C::Elem>> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("delta of a level-0 element".into()));
        }
        let y = self.sub(&self.phi(x)?, &self.pow(x, self.p())?);
        self.divide_p(&y)
    }

    /// Image of a δ-polynomial in one variable S under S ↦ τ_v (exponents may overflow;
    /// overflows at levels with a rule are normalized, others are left in place).
    fn from_dpoly(&self, v: usize, dp: &DeltaPolyRing<C>, x: &crate::delta_poly::DeltaPoly<C::Elem>) -> QResult<EnvElt<C::Elem>> {
        let _ = dp;
        let level = x.level.min(self.n);
        let mut acc: HashMap<EMono, C::Elem> = HashMap::new();
        for (m, c) in &x.terms {
            let mut dig = EMono::one();
            for (var, e) in &m.0 {
                match var {
                    PVar::V(0, k) if (*k as usize) < self.levels && *e < 256 => {
                        dig.0[self.slot(v, *k as usize)] = *e as u8;
                    }
                    _ => return Err(QError::PreconditionViolated(format!("unexpected variable {} in relation", var.name()))),
                }
            }
            let w = self.weight(&dig);
            if w > self.wcap {
                return Err(QError::WeightCapTooSmall(format!("relation term of weight {w}")));
            }
            let c = self.coeff.truncate(c, level);
            for (m2, c2) in self.norm_digits(dig)?.iter() {
                let cc = self.coeff.mul(&c, c2)?;
                if !self.coeff.is_zero(&cc) {
                    self.accumulate(&mut acc, *m2, cc);
                }
            }
        }
        Ok(self.finish(level, acc))
    }

    /// Rewrite rule for (δ^k τ_v)^p from δ^{k+1}([p]_q S − t + a) with t ↦ a + [p]_q S.
    fn derive_rule(&self, v: usize, k: u32) -> QResult<EnvElt<C::Elem>> {
        let dp = DeltaPolyRing::new(self.coeff.clone(), 1, 1);
        let xi = self.coeff.from_base(&self.coeff.base().xi());
        let s = dp.s(0)?;
        let t = dp.t(0)?;
        let a = dp.constant(&self.centers[v]);
        let xis = dp.scalar_mul(&xi, &s)?;
        let mut rel = dp.add(&dp.sub(&xis, &t), &a);
        for _ in 0..=k {
            rel = dp.delta(&rel)?;
        }
        let t_img = dp.add(&a, &xis);
        let rel = dp.substitute_const(&rel, 0, &t_img)?;
        let img = self.from_dpoly(v, &dp, &rel)?;
        let p = self.p() as u8;
        let mut lead = EMono::one();
        lead.0[self.slot(v, k as usize)] = p;
        let mut top = EMono::one();
        top.0[self.slot(v, k as usize + 1)] = 1;
        let u = self.coeff_of(&img, &lead);
        let f = self.coeff_of(&img, &top);
        let expect_f = self.coeff.from_base(&self.coeff.base().e_truncate(&phi_iter_base(self.coeff.base(), &self.coeff.base().xi(), k + 1), self.n));
        if !self.coeff.equal(&f, &expect_f) {
            return Err(QError::PreconditionViolated(format!("relation of level {} has unexpected top coefficient", k + 1)));
        }
        for m in img.terms.keys() {
            if *m != lead && m.0.iter().any(|&d| d >= p) {
                return Err(QError::PreconditionViolated(format!("relation of level {} is not of the expected shape", k + 1)));
            }
        }
        let uinv = self.coeff.invert(&u).map_err(|_| QError::NotInvertible(format!("leading coefficient of level {}", k + 1)))?;
        let mut rest = img.clone();
        rest.terms.remove(&lead);
        let rhs = self.scalar_mul(&self.coeff.neg(&uinv), &rest)?;
        Ok(rhs)
    }

    pub fn render_mono(&self, m: &EMono) -> String {
        let mut parts = Vec::new();
        for v in 0..self.d {
            for k in 0..self.levels {
                let e = m.0[self.slot(v, k)];
                if e == 0 {
                    continue;
                }
                let base = match k {
                    0 => self.names[v].clone(),
                    1 => format!("(delta {})", self.names[v]),
                    _ => format!("(delta^{k} {})", self.names[v]),
                };
                parts.push(if e == 1 { base } else { format!("(^ {base} {e})") });
            }
        }
        match parts.len() {
            0 => "1".into(),
            1 => parts[0].clone(),
            _ => format!("(* {})", parts.join(" ")),
        }
    }

    /// The rewrite table as JSON: one entry per (variable, level).
    pub fn table_json(&self) -> serde_json::Value {
        let mut rows = Vec::new();
        for v in 0..self.d {
            for k in 0..self.rules[v].len() {
                let lhs = if k == 0 {
                    format!("(^ {} {})", self.names[v], self.p())
                } else if k == 1 {
                    format!("(^ (delta {}) {})", self.names[v], self.p())
                } else {
                    format!("(^ (delta^{k} {}) {})", self.names[v], self.p())
                };
                rows.push(serde_json::json!({"var": v, "level": k, "lhs": lhs, "rhs": self.render(&self.rules[v][k])}));
            }
        }
        serde_json::json!({
            "p": self.p(),
            "prec": self.n,
            "weight_cap": self.wcap,
            "vars": self.d,
            "centers": self.centers.iter().map(|c| self.coeff.render(c)).collect::<Vec<_>>(),
            "rules": rows,
        })
    }

    /// All normal-form monomials of weight ≤ w, in increasing order.
    pub fn basis_upto(&self, w: u32) -> Vec<EMono> {
        let nd = self.d * self.levels;
        let p = self.p() as u8;
        let mut out = Vec::new();
        let mut cur = EMono::one();
        fn rec<C: DeltaRing>(r: &EnvRing<C>, i: usize, nd: usize, p: u8, w: u32, cur: &mut EMono, out: &mut Vec<EMono>) {
            if i == nd {
                if r.weight(cur) <= w {
                    out.push(*cur);
                }
                return;
            }
            for a in 0..p {
                cur.0[i] = a;
                if r.weight(cur) <= w {
                    rec(r, i + 1, nd, p, w, cur, out);
                }
            }
            cur.0[i] = 0;
        }
        rec(self, 0, nd, p, w, &mut cur, &mut out);
        out.sort();
        out
    }

    /// Apply a C-linear map defined on basis monomials.
    pub fn map_linear(
        &self,
        x: &EnvElt<C::Elem>,
        f: &dyn Fn(&EMono) -> QResult<EnvElt<C::Elem>>,
    ) -> QResult<EnvElt<C::Elem>> {
        let mut acc = self.zero_at(x.level);
        for (m, c) in &x.terms {
            let img = f(m)?;
            acc = self.add(&acc, &self.scalar_mul(c, &img)?);
        }
        Ok(acc)
    }
}

fn phi_iter_base(b: &BaseRing, x: &BaseElt, k: u32) -> BaseElt {
    let mut y = x.clone();
    for _ in 0..k {
        y = b.e_phi(&y);
    }
    y
}

impl<C: DeltaRing> Ring for EnvRing<C> {
    type Elem = EnvElt<C::Elem>;

    fn base(&self) -> &BaseRing {
        self.coeff.base()
    }
    fn prec(&self) -> u32 {
        self.n
    }
    fn zero_at(&self, level: u32) -> Self::Elem {
        EnvElt { level: level.min(self.n), terms: BTreeMap::new() }
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
                if m.is_one() {
                    self.coeff.render(c)
                } else {
                    let cs = self.coeff.render(c);
                    if cs == "1" {
                        self.render_mono(m)
                    } else {
                        format!("(* {} {})", cs, self.render_mono(m))
                    }
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
        let acc: HashMap<EMono, C::Elem> = x.terms.iter().map(|(m, c)| (*m, c.clone())).collect();
        self.finish(level, acc)
    }
    fn is_zero(&self, x: &Self::Elem) -> bool {
        x.terms.values().all(|c| self.coeff.is_zero(&self.coeff.truncate(c, x.level)))
    }
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem {
        let level = x.level.min(y.level);
        let mut acc: HashMap<EMono, C::Elem> = x.terms.iter().map(|(m, c)| (*m, c.clone())).collect();
        for (m, c) in &y.terms {
            self.accumulate(&mut acc, *m, c.clone());
        }
        self.finish(level, acc)
    }
    fn neg(&self, x: &Self::Elem) -> Self::Elem {
        EnvElt { level: x.level, terms: x.terms.iter().map(|(m, c)| (*m, self.coeff.neg(c))).collect() }
    }
    fn scale(&self, x: &Self::Elem, n: i64) -> Self::Elem {
        let acc = x.terms.iter().map(|(m, c)| (*m, self.coeff.scale(c, n))).collect();
        self.finish(x.level, acc)
    }
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> QResult<Self::Elem> {
        let level = x.level.min(y.level);
        let mut acc: HashMap<EMono, C::Elem> = HashMap::new();
        for (m1, c1) in &x.terms {
            for (m2, c2) in &y.terms {
                let c = self.coeff.truncate(&self.coeff.mul(c1, c2)?, level);
                if self.coeff.is_zero(&c) {
                    continue;
                }
                self.mul_terms_into(&mut acc, m1, m2, c)?;
            }
            if acc.len() > self.budget {
                return Err(QError::BudgetExceeded(format!("product exceeds {} monomials", self.budget)));
            }
        }
        Ok(self.finish(level, acc))
    }
    fn mul_base(&self, x: &Self::Elem, b: &BaseElt) -> QResult<Self::Elem> {
        self.scalar_mul(&self.coeff.from_base(b), x)
    }
    fn mul_raise(&self, x: &Self::Elem, g: &BaseElt) -> QResult<Self::Elem> {
        let level = (x.level + 1).min(g.level).min(self.n);
        let mut acc = HashMap::new();
        for (m, c) in &x.terms {
            acc.insert(*m, self.coeff.mul_raise(&self.coeff.truncate(c, x.level), g)?);
        }
        Ok(self.finish(level, acc))
    }
    fn divide_p(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("division by p at level 0".into()));
        }
        let mut acc = HashMap::new();
        for (m, c) in &x.terms {
            acc.insert(*m, self.coeff.divide_p(&self.coeff.truncate(c, x.level))?);
        }
        Ok(self.finish(x.level - 1, acc))
    }
    fn invert(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        let c0 = self.coeff_of(x, &EMono::one());
        let mut v = self.constant(&self.coeff.invert(&c0).map_err(|_| QError::NotInvertible(self.render(x)))?);
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

impl<C: DeltaRing> DeltaRing for EnvRing<C> {
    /// Structural δ: binary splitting over terms, δ(c m) = δ(c) m^p + φ(c) δ(m), and the
    /// power and product formulas on basis monomials with δ(δ^kτ) = δ^{k+1}τ.
    fn delta(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("delta of a level-0 element".into()));
        }
        let terms: Vec<(EMono, C::Elem)> = x.terms.iter().map(|(m, c)| (*m, c.clone())).collect();
        if terms.is_empty() {
            return Ok(self.zero_at(x.level - 1));
        }
        let (_, d) = self.delta_split(&terms, x.level)?;
        Ok(self.truncate(&d, x.level - 1))
    }

    fn phi(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        let mut acc = self.zero_at(x.level);
        for (m, c) in &x.terms {
            let pc = self.coeff.phi(&self.coeff.truncate(c, x.level))?;
            let t = if m.is_one() { self.constant(&pc) } else { self.scalar_mul(&pc, &self.phi_mono(m)?)? };
            acc = self.add(&acc, &t);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(p: u32, n: u32, d: usize, w: u32) -> EnvRing<BaseRing> {
        let b = BaseRing::q(p, n).unwrap();
        let cs: Vec<BaseElt> = (0..d).map(|_| b.from_int(0)).collect();
        EnvRing::<BaseRing>::over_base(&b, &cs, n, w).unwrap()
    }

    #[test]
    fn p2_first_rule() {
        let e = env(2, 3, 1, 4);
        let b = e.base().clone();
        let qinv = b.invert(&b.q_elt()).unwrap();
        let one_q2 = b.e_add(&b.from_int(1), &b.e_pow(&b.q_elt(), 2));
        let c = b.e_mul(&qinv, &one_q2);
        let expect = e.mul_base(&e.delta_tau(0, 1).unwrap(), &c).unwrap();
        let tau = e.tau(0).unwrap();
        assert!(e.equal(&e.mul(&tau, &tau).unwrap(), &expect));
    }

    #[test]
    fn normal_monomial_product() {
        let e = env(2, 2, 1, 4);
        let x = e.mul(&e.tau(0).unwrap(), &e.delta_tau(0, 1).unwrap()).unwrap();
        assert_eq!(x.terms.len(), 1);
        let m = x.terms.keys().next().unwrap();
        assert_eq!(m.0[0], 1);
        assert_eq!(m.0[1], 1);
    }

    #[test]
    fn associativity_witness() {
        let e = env(2, 3, 1, 4);
        let tau = e.tau(0).unwrap();
        let l = e.mul(&e.mul(&tau, &tau).unwrap(), &tau).unwrap();
        let r = e.mul(&tau, &e.mul(&tau, &tau).unwrap()).unwrap();
        assert_eq!(l, r);
    }

    #[test]
    fn delta_t_vanishes() {
        for (p, n, w) in [(2, 3, 4), (3, 2, 3)] {
            let b = BaseRing::q(p, n).unwrap();
            let e = EnvRing::<BaseRing>::over_base(&b, &[b.from_int(1), b.mu()], n, w).unwrap();
            for v in 0..2 {
                let t = e.t(v).unwrap();
                assert!(e.is_zero(&e.delta(&t).unwrap()));
                assert!(e.equal(&e.phi(&t).unwrap(), &e.pow(&t, p).unwrap()));
            }
        }
    }

    #[test]
    fn delta_tau_is_basis() {
        let e = env(3, 2, 2, 9);
        let d = e.delta(&e.tau(1).unwrap()).unwrap();
        assert!(e.equal(&d, &e.delta_tau(1, 1).unwrap()));
    }

    #[test]
    fn structural_delta_matches_phi_route() {
        let e = env(2, 3, 1, 8);
        let tau = e.tau(0).unwrap();
        let dt = e.delta_tau(0, 1).unwrap();
        let x = e.add(&e.mul_base(&tau, &e.base().q_elt()).unwrap(), &dt);
        assert!(e.equal(&e.delta(&x).unwrap(), &e.delta_via_phi(&x).unwrap()));
    }

    #[test]
    fn empty_envelope_is_coefficient_ring() {
        let b = BaseRing::q(2, 2).unwrap();
        let e = EnvRing::<BaseRing>::over_base(&b, &[], 2, 4).unwrap();
        let x = e.from_base(&b.mu());
        assert!(e.equal(&e.delta(&x).unwrap(), &e.constant(&e.coeff.e_delta(&e.coeff.mu()).unwrap())));
        assert_eq!(e.levels, 3);
    }
}
