//! Ring-object traits shared by every coefficient and host ring.
//!
//! Elements carry a precision level L: they are known modulo I^{L+1}. Binary
//! operations return the minimum level of their operands.

use crate::base_prism::{BaseElt, BaseRing};
use crate::error::QResult;
use std::fmt::Debug;

pub trait Ring: Send + Sync {
    type Elem: Clone + Debug + PartialEq + Send + Sync;

    fn base(&self) -> &BaseRing;
    fn prec(&self) -> u32;
    fn p(&self) -> u32 {
        self.base().p()
    }

    fn zero_at(&self, level: u32) -> Self::Elem;
    fn zero(&self) -> Self::Elem {
        self.zero_at(self.prec())
    }
    fn from_base(&self, b: &BaseElt) -> Self::Elem;
    fn from_int(&self, n: i64) -> Self::Elem {
        self.from_base(&self.base().from_int(n))
    }
    fn one(&self) -> Self::Elem {
        self.from_int(1)
    }

    fn level(&self, x: &Self::Elem) -> u32;
    /// S-expression rendering.
    fn render(&self, x: &Self::Elem) -> String;
    /// Forget information above `level` (no-op if already lower).
    fn truncate(&self, x: &Self::Elem, level: u32) -> Self::Elem;
    fn is_zero(&self, x: &Self::Elem) -> bool;

    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn neg(&self, x: &Self::Elem) -> Self::Elem;
    fn sub(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem {
        self.add(x, &self.neg(y))
    }
    fn scale(&self, x: &Self::Elem, n: i64) -> Self::Elem;
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> QResult<Self::Elem>;
    /// Multiply by a base scalar.
    fn mul_base(&self, x: &Self::Elem, b: &BaseElt) -> QResult<Self::Elem>;
    /// Multiply by `g` in I, gaining one level (capped by the precision of `g` and the ring).
    fn mul_raise(&self, x: &Self::Elem, g: &BaseElt) -> QResult<Self::Elem>;
    /// Exact division by p, losing one level.
    fn divide_p(&self, x: &Self::Elem) -> QResult<Self::Elem>;
    /// Multiplicative inverse at the level of `x`.
    fn invert(&self, x: &Self::Elem) -> QResult<Self::Elem>;

    fn pow(&self, x: &Self::Elem, e: u32) -> QResult<Self::Elem> {
        let mut acc = self.truncate(&self.one(), self.level(x));
        let mut b = x.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &b)?;
            }
            e >>= 1;
            if e > 0 {
                b = self.mul(&b, &b)?;
            }
        }
        Ok(acc)
    }

    /// Equality at the common level of the operands.
    fn equal(&self, x: &Self::Elem, y: &Self::Elem) -> bool {
        self.is_zero(&self.sub(x, y))
    }

    fn sum<'a, I: IntoIterator<Item = &'a Self::Elem>>(&self, items: I) -> Self::Elem
    where
        Self::Elem: 'a,
    {
        let mut acc = self.zero();
        for x in items {
            acc = self.add(&acc, x);
        }
        acc
    }
}

pub trait DeltaRing: Ring {
    fn delta(&self, x: &Self::Elem) -> QResult<Self::Elem>;

    /// Frobenius lift x^p + p δ(x); the p-multiple is raised back to the input level.
    fn phi(&self, x: &Self::Elem) -> QResult<Self::Elem> {
        let xp = self.pow(x, self.p())?;
        if self.level(x) == 0 {
            return Ok(xp);
        }
        let d = self.delta(x)?;
        let pd = self.mul_raise(&d, &self.base().from_int(self.p() as i64))?;
        Ok(self.add(&xp, &pd))
    }

    fn delta_iter(&self, x: &Self::Elem, k: u32) -> QResult<Self::Elem> {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.delta(&y)?;
        }
        Ok(y)
    }

    fn phi_iter(&self, x: &Self::Elem, k: u32) -> QResult<Self::Elem> {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.phi(&y)?;
        }
        Ok(y)
    }
}

/// Binomial coefficient as u128 (exact for the small arguments used here).
pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// C(p, i) / p for 0 < i < p.
pub fn binom_over_p(p: u32, i: u32) -> i64 {
    (binom(p as u64, i as u64) / p as u128) as i64
}

/// The correction Σ_{0<i<p} p^{-1}C(p,i) x^i y^{p-i} appearing in δ(x+y).
pub fn delta_sum_correction<R: Ring + ?Sized>(r: &R, x: &R::Elem, y: &R::Elem) -> QResult<R::Elem> {
    let p = r.p();
    let mut xp = vec![r.truncate(&r.one(), r.level(x))];
    let mut yp = vec![r.truncate(&r.one(), r.level(y))];
    for i in 1..p {
        xp.push(r.mul(&xp[i as usize - 1], x)?);
        yp.push(r.mul(&yp[i as usize - 1], y)?);
    }
    let mut acc = r.zero();
    for i in 1..p {
        let t = r.mul(&xp[i as usize], &yp[(p - i) as usize])?;
        acc = r.add(&acc, &r.scale(&t, binom_over_p(p, i)));
    }
    Ok(acc)
}

/// Length-2 Witt vector over any ring.
#[derive(Clone, Debug, PartialEq)]
pub struct Witt2Elt<E> {
    pub x0: E,
    pub x1: E,
}

pub fn witt2_add<R: Ring + ?Sized>(r: &R, a: &Witt2Elt<R::Elem>, b: &Witt2Elt<R::Elem>) -> QResult<Witt2Elt<R::Elem>> {
    let corr = delta_sum_correction(r, &a.x0, &b.x0)?;
    Ok(Witt2Elt {
        x0: r.add(&a.x0, &b.x0),
        x1: r.sub(&r.add(&a.x1, &b.x1), &corr),
    })
}

pub fn witt2_mul<R: Ring + ?Sized>(r: &R, a: &Witt2Elt<R::Elem>, b: &Witt2Elt<R::Elem>) -> QResult<Witt2Elt<R::Elem>> {
    let p = r.p();
    let t1 = r.mul(&r.pow(&a.x0, p)?, &b.x1)?;
    let t2 = r.mul(&a.x1, &r.pow(&b.x0, p)?)?;
    let t3 = r.scale(&r.mul(&a.x1, &b.x1)?, p as i64);
    Ok(Witt2Elt {
        x0: r.mul(&a.x0, &b.x0)?,
        x1: r.add(&r.add(&t1, &t2), &t3),
    })
}

/// The pair (x, δx).
pub fn witt2_of<R: DeltaRing + ?Sized>(r: &R, x: &R::Elem) -> QResult<Witt2Elt<R::Elem>> {
    Ok(Witt2Elt { x0: x.clone(), x1: r.delta(x)? })
}

/// Checks that (1, δ) is additive and multiplicative on the pair (x, y).
pub fn witt2_hom_check<R: DeltaRing + ?Sized>(r: &R, x: &R::Elem, y: &R::Elem) -> QResult<bool> {
    let wx = witt2_of(r, x)?;
    let wy = witt2_of(r, y)?;
    let prod = witt2_mul(r, &wx, &wy)?;
    let xy = r.mul(x, y)?;
    let ok_mul = r.equal(&prod.x0, &xy) && r.equal(&prod.x1, &r.delta(&xy)?);
    let sum = witt2_add(r, &wx, &wy)?;
    let s = r.add(x, y);
    let ok_add = r.equal(&sum.x0, &s) && r.equal(&sum.x1, &r.delta(&s)?);
    Ok(ok_mul && ok_add)
}

/// δ(x^n) via Σ_{j=1}^n C(n,j) p^{j-1} x^{p(n-j)} δ(x)^j.
pub fn delta_power_formula<R: DeltaRing + ?Sized>(r: &R, x: &R::Elem, n: u32) -> QResult<R::Elem> {
    let p = r.p() as i64;
    let d = r.delta(x)?;
    let xp = r.pow(x, r.p())?;
    let mut acc = r.zero();
    for j in 1..=n {
        let c = binom(n as u64, j as u64) as i64 * p.pow(j - 1);
        let t = r.mul(&r.pow(&xp, n - j)?, &r.pow(&d, j)?)?;
        acc = r.add(&acc, &r.scale(&t, c));
    }
    Ok(acc)
}
