//! Truncations of the q-crystalline base Z[q]/(p, [p]_q)^{n+1} and its q = 1 specialization.
//!
//! An element at level L is a vector of μ-coefficients c_k, k < (p-1)(L+1), with c_k
//! reduced modulo p^{L+1-⌊k/(p-1)⌋}. In q = 1 mode only c_0 survives and the ring is Z/p^{L+1}.

use crate::error::{QError, QResult};
use crate::ring::{binom, DeltaRing, Ring};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "q")]
    Q,
    #[serde(rename = "q1")]
    Q1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BaseDesc {
    pub p: u32,
    pub n: u32,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BaseElt {
    pub desc: BaseDesc,
    pub level: u32,
    pub c: Vec<i64>,
}

/// The finite ring R_n together with cached prime powers.
#[derive(Clone, Debug)]
pub struct BaseRing {
    desc: BaseDesc,
    pw: Vec<i128>,
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

impl BaseRing {
    pub fn new(p: u32, n: u32, mode: Mode) -> QResult<Self> {
        if !is_prime(p) {
            return Err(QError::PreconditionViolated(format!("p = {p} is not prime")));
        }
        let mut pw = vec![1i128];
        for _ in 0..=n + 1 {
            let next = pw.last().unwrap() * p as i128;
            pw.push(next);
        }
        if pw[(n + 1) as usize] >= 1i128 << 62 {
            return Err(QError::PreconditionViolated(format!("p^(n+1) too large for p={p}, n={n}")));
        }
        Ok(BaseRing { desc: BaseDesc { p, n, mode }, pw })
    }

    pub fn q(p: u32, n: u32) -> QResult<Self> {
        Self::new(p, n, Mode::Q)
    }

    pub fn q1(p: u32, n: u32) -> QResult<Self> {
        Self::new(p, n, Mode::Q1)
    }

    pub fn desc(&self) -> BaseDesc {
        self.desc
    }
    pub fn p(&self) -> u32 {
        self.desc.p
    }
    pub fn n(&self) -> u32 {
        self.desc.n
    }
    pub fn mode(&self) -> Mode {
        self.desc.mode
    }
    pub fn is_q1(&self) -> bool {
        self.desc.mode == Mode::Q1
    }

    /// Same base with another precision.
    pub fn with_prec(&self, n: u32) -> QResult<Self> {
        Self::new(self.desc.p, n, self.desc.mode)
    }

    /// Number of stored μ-coefficients at level L.
    pub fn dim(&self, level: u32) -> usize {
        match self.desc.mode {
            Mode::Q1 => 1,
            Mode::Q => ((self.desc.p - 1) * (level + 1)) as usize,
        }
    }

    /// Exponent e_L(k) with c_k taken mod p^{e_L(k)}.
    pub fn exponent(&self, level: u32, k: usize) -> u32 {
        match self.desc.mode {
            Mode::Q1 => level + 1,
            Mode::Q => level + 1 - (k as u32) / (self.desc.p - 1),
        }
    }

    pub fn modulus(&self, level: u32, k: usize) -> i128 {
        self.pw[self.exponent(level, k) as usize]
    }

    pub fn ppow(&self, e: u32) -> i128 {
        self.pw[e as usize]
    }

    fn check(&self, x: &BaseElt) {
        debug_assert!(x.desc.p == self.desc.p && x.desc.mode == self.desc.mode, "base mismatch");
    }

    /// Build an element from raw integer μ-coefficients, reducing them.
    pub fn from_coeffs(&self, level: u32, coeffs: &[i128]) -> BaseElt {
        let level = level.min(self.desc.n);
        let dim = self.dim(level);
        let mut c = vec![0i64; dim];
        for (k, &v) in coeffs.iter().enumerate().take(dim) {
            let m = self.modulus(level, k);
            c[k] = v.rem_euclid(m) as i64;
        }
        BaseElt { desc: self.desc, level, c }
    }

    pub fn from_bigint_coeffs(&self, level: u32, coeffs: &[BigInt]) -> BaseElt {
        let level = level.min(self.desc.n);
        let dim = self.dim(level);
        let mut c = vec![0i64; dim];
        for (k, v) in coeffs.iter().enumerate().take(dim) {
            let m = BigInt::from(self.modulus(level, k));
            let r = ((v % &m) + &m) % &m;
            c[k] = r.to_i64().unwrap();
        }
        BaseElt { desc: self.desc, level, c }
    }

    pub fn elt_zero(&self, level: u32) -> BaseElt {
        self.from_coeffs(level, &[])
    }

    pub fn from_int_at(&self, n: i64, level: u32) -> BaseElt {
        self.from_coeffs(level, &[n as i128])
    }

    pub fn from_int(&self, n: i64) -> BaseElt {
        self.from_int_at(n, self.desc.n)
    }

    pub fn mu(&self) -> BaseElt {
        self.from_coeffs(self.desc.n, &[0, 1])
    }

    pub fn q_elt(&self) -> BaseElt {
        self.from_coeffs(self.desc.n, &[1, 1])
    }

    /// μ^k (zero when it falls into I^{n+1} or in q = 1 mode with k > 0).
    pub fn mu_pow(&self, k: usize) -> BaseElt {
        let mut v = vec![0i128; k + 1];
        v[k] = 1;
        self.from_coeffs(self.desc.n, &v)
    }

    /// [m]_q = Σ_{j≥0} C(m, j+1) μ^j.
    pub fn qint(&self, m: u64) -> BaseElt {
        let dim = self.dim(self.desc.n);
        let coeffs: Vec<BigInt> = (0..dim).map(|j| big_binom(m, j as u64 + 1)).collect();
        self.from_bigint_coeffs(self.desc.n, &coeffs)
    }

    pub fn xi(&self) -> BaseElt {
        self.qint(self.desc.p as u64)
    }

    /// η = Σ_{ν=1}^{p-1} p^{-1}C(p,ν) μ^{ν-1}.
    pub fn eta(&self) -> BaseElt {
        let p = self.desc.p;
        let coeffs: Vec<i128> = (1..p).map(|nu| (binom(p as u64, nu as u64) / p as u128) as i128).collect();
        self.from_coeffs(self.desc.n, &coeffs)
    }

    /// φ(μ) = (1+μ)^p - 1.
    pub fn phi_mu(&self, level: u32) -> BaseElt {
        let p = self.desc.p as u64;
        let coeffs: Vec<i128> = (0..=p as usize).map(|j| if j == 0 { 0 } else { binom(p, j as u64) as i128 }).collect();
        // coefficient of μ^j is C(p, j)
        self.from_coeffs(level, &coeffs)
    }

    pub fn e_add(&self, x: &BaseElt, y: &BaseElt) -> BaseElt {
        self.check(x);
        self.check(y);
        let level = x.level.min(y.level).min(self.desc.n);
        let dim = self.dim(level);
        let c: Vec<i64> = (0..dim)
            .map(|k| {
                let m = self.modulus(level, k);
                let a = *x.c.get(k).unwrap_or(&0) as i128 + *y.c.get(k).unwrap_or(&0) as i128;
                a.rem_euclid(m) as i64
            })
            .collect();
        BaseElt { desc: self.desc, level, c }
    }

    pub fn e_neg(&self, x: &BaseElt) -> BaseElt {
        self.check(x);
        let level = x.level.min(self.desc.n);
        let dim = self.dim(level);
        let c: Vec<i64> = (0..dim)
            .map(|k| (-(*x.c.get(k).unwrap_or(&0) as i128)).rem_euclid(self.modulus(level, k)) as i64)
            .collect();
        BaseElt { desc: self.desc, level, c }
    }

    pub fn e_sub(&self, x: &BaseElt, y: &BaseElt) -> BaseElt {
        self.e_add(x, &self.e_neg(y))
    }

    pub fn e_scale(&self, x: &BaseElt, n: i64) -> BaseElt {
        let level = x.level.min(self.desc.n);
        let dim = self.dim(level);
        let c: Vec<i64> = (0..dim)
            .map(|k| {
                let m = self.modulus(level, k);
                let a = (*x.c.get(k).unwrap_or(&0) as i128) * (n as i128).rem_euclid(m);
                a.rem_euclid(m) as i64
            })
            .collect();
        BaseElt { desc: self.desc, level, c }
    }

    fn conv(&self, x: &[i64], y: &[i64], level: u32) -> BaseElt {
        let dim = self.dim(level);
        let mut acc = vec![0i128; dim];
        for (i, &a) in x.iter().enumerate().take(dim) {
            if a == 0 {
                continue;
            }
            for (j, &b) in y.iter().enumerate().take(dim - i) {
                if b == 0 {
                    continue;
                }
                let m = self.modulus(level, i + j);
                acc[i + j] = (acc[i + j] + (a as i128 * b as i128) % m) % m;
            }
        }
        self.from_coeffs(level, &acc)
    }

    pub fn e_mul(&self, x: &BaseElt, y: &BaseElt) -> BaseElt {
        self.check(x);
        self.check(y);
        let level = x.level.min(y.level).min(self.desc.n);
        self.conv(&x.c, &y.c, level)
    }

    pub fn e_pow(&self, x: &BaseElt, e: u32) -> BaseElt {
        let mut acc = self.from_int_at(1, x.level);
        let mut b = x.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.e_mul(&acc, &b);
            }
            e >>= 1;
            if e > 0 {
                b = self.e_mul(&b, &b);
            }
        }
        acc
    }

    /// Whether x lies in I = (p, μ^{p-1}).
    pub fn in_ideal(&self, x: &BaseElt) -> bool {
        let p = self.desc.p as i64;
        let lim = match self.desc.mode {
            Mode::Q1 => 1,
            Mode::Q => (self.desc.p - 1) as usize,
        };
        x.c.iter().take(lim).all(|&c| c % p == 0)
    }

    pub fn is_unit(&self, x: &BaseElt) -> bool {
        x.c.first().map(|&c| c % self.desc.p as i64 != 0).unwrap_or(false)
    }

    /// g·x for g in I; the result is one level higher than x.
    pub fn e_mul_raise(&self, x: &BaseElt, g: &BaseElt) -> QResult<BaseElt> {
        if !self.in_ideal(g) {
            return Err(QError::PreconditionViolated("mul_raise factor not in I".into()));
        }
        let level = (x.level + 1).min(g.level).min(self.desc.n);
        Ok(self.conv(&x.c, &g.c, level))
    }

    pub fn e_divide_p(&self, x: &BaseElt) -> QResult<BaseElt> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("division by p at level 0".into()));
        }
        let p = self.desc.p as i64;
        if x.c.iter().any(|&c| c % p != 0) {
            return Err(QError::NotDivisible(format!("{:?}", x.c)));
        }
        let level = x.level - 1;
        let coeffs: Vec<i128> = x.c.iter().map(|&c| (c / p) as i128).collect();
        Ok(self.from_coeffs(level, &coeffs))
    }

    pub fn e_phi(&self, x: &BaseElt) -> BaseElt {
        self.check(x);
        let level = x.level.min(self.desc.n);
        if self.is_q1() {
            return self.from_coeffs(level, &[x.c[0] as i128]);
        }
        let fmu = self.phi_mu(level);
        let mut acc = self.elt_zero(level);
        for &c in x.c.iter().rev() {
            acc = self.e_mul(&acc, &fmu);
            acc = self.e_add(&acc, &self.from_int_at(c, level));
        }
        acc
    }

    pub fn e_delta(&self, x: &BaseElt) -> QResult<BaseElt> {
        if x.level == 0 {
            return Err(QError::PrecisionExhausted("delta of a level-0 element".into()));
        }
        let y = self.e_sub(&self.e_phi(x), &self.e_pow(x, self.desc.p));
        self.e_divide_p(&y)
    }

    /// Inverse by Newton iteration v ← v(2 - uv).
    pub fn invert(&self, u: &BaseElt) -> QResult<BaseElt> {
        if !self.is_unit(u) {
            return Err(QError::NotAUnit(self.render(u)));
        }
        let level = u.level.min(self.desc.n);
        let m = self.ppow(level + 1);
        let c0 = mod_inverse(u.c[0] as i128, m).ok_or_else(|| QError::NotAUnit(self.render(u)))?;
        let mut v = self.from_int_at(c0 as i64, level);
        let two = self.from_int_at(2, level);
        let one = self.from_int_at(1, level);
        for _ in 0..64 {
            let uv = self.e_mul(u, &v);
            if uv == one {
                return Ok(v);
            }
            v = self.e_mul(&v, &self.e_sub(&two, &uv));
        }
        Err(QError::NotAUnit("Newton iteration did not converge".into()))
    }

    pub fn e_truncate(&self, x: &BaseElt, level: u32) -> BaseElt {
        let level = level.min(x.level);
        let coeffs: Vec<i128> = x.c.iter().map(|&c| c as i128).collect();
        self.from_coeffs(level, &coeffs)
    }

    /// Reinterpret an element of a base with the same p and mode but different precision.
    pub fn adopt(&self, x: &BaseElt) -> BaseElt {
        let coeffs: Vec<i128> = x.c.iter().map(|&c| c as i128).collect();
        self.from_coeffs(x.level.min(self.desc.n), &coeffs)
    }

    pub fn render(&self, x: &BaseElt) -> String {
        x.sexpr()
    }
}

impl BaseElt {
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&c| c == 0)
    }

    /// Rendering in the S-expression grammar, e.g. `(+ 3 (* 2 mu) (^ mu 2))`.
    pub fn sexpr(&self) -> String {
        let terms: Vec<String> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(k, &c)| {
                let m = match k {
                    0 => String::new(),
                    1 => "mu".to_string(),
                    _ => format!("(^ mu {k})"),
                };
                match (k, c) {
                    (0, _) => c.to_string(),
                    (_, 1) => m,
                    _ => format!("(* {c} {m})"),
                }
            })
            .collect();
        match terms.len() {
            0 => "0".to_string(),
            1 => terms[0].clone(),
            _ => format!("(+ {})", terms.join(" ")),
        }
    }

    pub fn coeff(&self, k: usize) -> i64 {
        *self.c.get(k).unwrap_or(&0)
    }

    /// JSON rendering {"level": L, "coeffs": [[k, "c_k"], ...]}.
    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<serde_json::Value> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(k, c)| serde_json::json!([k, c.to_string()]))
            .collect();
        serde_json::json!({"level": self.level, "coeffs": coeffs})
    }

    pub fn from_json(ring: &BaseRing, v: &serde_json::Value) -> QResult<BaseElt> {
        let bad = |m: &str| QError::Parse(m.to_string());
        let level = v.get("level").and_then(|l| l.as_u64()).ok_or_else(|| bad("missing level"))? as u32;
        let arr = v.get("coeffs").and_then(|c| c.as_array()).ok_or_else(|| bad("missing coeffs"))?;
        let mut coeffs: Vec<BigInt> = Vec::new();
        for entry in arr {
            let k = entry.get(0).and_then(|k| k.as_u64()).ok_or_else(|| bad("bad coefficient index"))? as usize;
            let c: BigInt = match entry.get(1) {
                Some(serde_json::Value::String(s)) => s.parse().map_err(|_| bad("bad coefficient"))?,
                Some(serde_json::Value::Number(n)) => BigInt::from(n.as_i64().ok_or_else(|| bad("bad coefficient"))?),
                _ => return Err(bad("bad coefficient")),
            };
            if coeffs.len() <= k {
                coeffs.resize(k + 1, BigInt::zero());
            }
            coeffs[k] = c;
        }
        if level > ring.n() {
            return Err(bad("level exceeds ring precision"));
        }
        Ok(ring.from_bigint_coeffs(level, &coeffs))
    }
}

impl fmt::Display for BaseElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(k, &c)| match k {
                0 => c.to_string(),
                1 if c == 1 => "mu".to_string(),
                1 => format!("{c}*mu"),
                _ if c == 1 => format!("mu^{k}"),
                _ => format!("{c}*mu^{k}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

pub fn big_binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::from(1u32);
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

pub fn mod_inverse(a: i128, m: i128) -> Option<i128> {
    let (mut old_r, mut r) = (a.rem_euclid(m), m);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m))
}

fn same_ring(x: &BaseElt, y: &BaseElt) -> QResult<()> {
    if x.desc != y.desc {
        return Err(QError::RingMismatch(format!("{:?} vs {:?}", x.desc, y.desc)));
    }
    Ok(())
}

pub fn base_add(r: &BaseRing, x: &BaseElt, y: &BaseElt) -> QResult<BaseElt> {
    same_ring(x, y)?;
    same_ring(x, &r.elt_zero(0))?;
    Ok(r.e_add(x, y))
}

pub fn base_mul(r: &BaseRing, x: &BaseElt, y: &BaseElt) -> QResult<BaseElt> {
    same_ring(x, y)?;
    same_ring(x, &r.elt_zero(0))?;
    Ok(r.e_mul(x, y))
}

pub fn base_neg(r: &BaseRing, x: &BaseElt) -> QResult<BaseElt> {
    same_ring(x, &r.elt_zero(0))?;
    Ok(r.e_neg(x))
}

impl Ring for BaseRing {
    type Elem = BaseElt;

    fn base(&self) -> &BaseRing {
        self
    }
    fn prec(&self) -> u32 {
        self.desc.n
    }
    fn zero_at(&self, level: u32) -> BaseElt {
        self.elt_zero(level)
    }
    fn from_base(&self, b: &BaseElt) -> BaseElt {
        self.adopt(b)
    }
    fn level(&self, x: &BaseElt) -> u32 {
        x.level
    }
    fn render(&self, x: &BaseElt) -> String {
        x.sexpr()
    }
    fn truncate(&self, x: &BaseElt, level: u32) -> BaseElt {
        self.e_truncate(x, level)
    }
    fn is_zero(&self, x: &BaseElt) -> bool {
        x.is_zero()
    }
    fn add(&self, x: &BaseElt, y: &BaseElt) -> BaseElt {
        self.e_add(x, y)
    }
    fn neg(&self, x: &BaseElt) -> BaseElt {
        self.e_neg(x)
    }
    fn scale(&self, x: &BaseElt, n: i64) -> BaseElt {
        self.e_scale(x, n)
    }
    fn mul(&self, x: &BaseElt, y: &BaseElt) -> QResult<BaseElt> {
        Ok(self.e_mul(x, y))
    }
    fn mul_base(&self, x: &BaseElt, b: &BaseElt) -> QResult<BaseElt> {
        Ok(self.e_mul(x, &self.adopt(b)))
    }
    fn mul_raise(&self, x: &BaseElt, g: &BaseElt) -> QResult<BaseElt> {
        self.e_mul_raise(x, &self.adopt(g))
    }
    fn divide_p(&self, x: &BaseElt) -> QResult<BaseElt> {
        self.e_divide_p(x)
    }
    fn invert(&self, x: &BaseElt) -> QResult<BaseElt> {
        BaseRing::invert(self, x)
    }
}

impl DeltaRing for BaseRing {
    fn delta(&self, x: &BaseElt) -> QResult<BaseElt> {
        self.e_delta(x)
    }
    fn phi(&self, x: &BaseElt) -> QResult<BaseElt> {
        Ok(self.e_phi(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{delta_power_formula, witt2_add, witt2_hom_check, witt2_mul, Witt2Elt};

    fn r(p: u32, n: u32) -> BaseRing {
        BaseRing::q(p, n).unwrap()
    }

    #[test]
    fn mu_times_unit_keeps_level() {
        let b = r(2, 2);
        let x = b.e_mul(&b.mu(), &b.from_int(1));
        assert_eq!(x.level, 2);
        assert_eq!(x, b.mu());
    }

    #[test]
    fn q_squared() {
        let b = r(3, 2);
        let q = b.q_elt();
        assert_eq!(b.e_mul(&q, &q), b.from_coeffs(2, &[1, 2, 1]));
    }

    #[test]
    fn qint2_times_mu_vanishes_mod_i2() {
        let b = r(2, 1);
        assert_eq!(b.qint(2), b.from_coeffs(1, &[2, 1]));
        assert!(b.e_mul(&b.qint(2), &b.mu()).is_zero());
    }

    #[test]
    fn delta_examples() {
        for p in [2, 3, 5] {
            let b = r(p, 2);
            assert!(b.e_delta(&b.q_elt()).unwrap().is_zero());
            assert!(b.e_delta(&b.from_int(1)).unwrap().is_zero());
        }
        let b = r(2, 3);
        let d = b.e_delta(&b.mu()).unwrap();
        assert_eq!(d, b.e_truncate(&b.mu(), 2));
        let b0 = r(2, 0);
        assert!(matches!(b0.e_delta(&b0.mu()), Err(QError::PrecisionExhausted(_))));
    }

    #[test]
    fn phi_examples() {
        for p in [2, 3, 5] {
            let b = r(p, 2);
            assert_eq!(b.e_phi(&b.q_elt()), b.e_pow(&b.q_elt(), p));
            assert_eq!(b.e_phi(&b.from_int(7)), b.from_int(7));
            assert_eq!(b.e_phi(&b.mu()), b.e_mul(&b.xi(), &b.mu()));
        }
    }

    #[test]
    fn witt2_examples() {
        let b = r(3, 2);
        let x = Witt2Elt { x0: b.from_coeffs(2, &[4, 1, 7]), x1: b.from_coeffs(2, &[2, 5]) };
        let one = Witt2Elt { x0: b.from_int(1), x1: b.from_int(0) };
        assert_eq!(witt2_mul(&b, &one, &x).unwrap(), x);
        let e = Witt2Elt { x0: b.from_int(0), x1: b.from_int(1) };
        let s = witt2_add(&b, &e, &e).unwrap();
        assert_eq!(s, Witt2Elt { x0: b.from_int(0), x1: b.from_int(2) });
        let y = b.from_coeffs(2, &[1, 2, 3, 4]);
        assert!(witt2_hom_check(&b, &x.x0, &y).unwrap());
    }

    #[test]
    fn invert_examples() {
        let b = r(2, 3);
        assert_eq!(b.invert(&b.from_int(1)).unwrap(), b.from_int(1));
        let qi = b.invert(&b.q_elt()).unwrap();
        assert_eq!(b.e_mul(&qi, &b.q_elt()), b.from_int(1));
        assert!(matches!(b.invert(&b.mu()), Err(QError::NotAUnit(_))));
    }

    #[test]
    fn qint_and_eta() {
        let b = r(2, 3);
        assert_eq!(b.qint(1), b.from_int(1));
        assert_eq!(b.qint(2), b.from_coeffs(3, &[2, 1]));
        assert_eq!(b.eta(), b.from_int(1));
        let b3 = r(3, 2);
        // η = 1 + μ for p = 3
        assert_eq!(b3.eta(), b3.from_coeffs(2, &[1, 1]));
    }

    #[test]
    fn delta_mu_is_eta_mu() {
        for p in [2, 3, 5] {
            let b = r(p, 2);
            let lhs = b.e_delta(&b.mu()).unwrap();
            let rhs = b.e_mul(&b.eta(), &b.mu());
            assert!(b.equal(&lhs, &rhs));
        }
    }

    #[test]
    fn power_formula_small() {
        let b = r(3, 2);
        let x = b.from_coeffs(2, &[2, 1, 1]);
        for n in 1..5 {
            let direct = b.e_delta(&b.e_pow(&x, n)).unwrap();
            assert!(b.equal(&direct, &delta_power_formula(&b, &x, n).unwrap()));
        }
    }

    #[test]
    fn q1_mode() {
        let b = BaseRing::q1(3, 2).unwrap();
        assert!(b.mu().is_zero());
        assert_eq!(b.eta(), b.from_int(1));
        assert_eq!(b.xi(), b.from_int(3));
        // δ(3) = (3 - 27)/3 = -8
        assert_eq!(b.e_delta(&b.from_int(3)).unwrap(), b.from_int_at(-8, 1));
    }

    #[test]
    fn json_roundtrip() {
        let b = r(3, 2);
        let x = b.from_coeffs(2, &[5, 2, 0, 1]);
        let j = x.to_json();
        assert_eq!(BaseElt::from_json(&b, &j).unwrap(), x);
    }

    #[test]
    fn mismatch_detected() {
        let b2 = r(2, 2);
        let b3 = r(3, 2);
        assert!(matches!(base_add(&b2, &b2.mu(), &b3.mu()), Err(QError::RingMismatch(_))));
        assert!(base_mul(&b2, &b2.mu(), &b2.mu()).is_ok());
    }
}
