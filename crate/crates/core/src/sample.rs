//! Seeded random elements for property checks.

use crate::base_prism::{BaseElt, BaseRing};
use crate::delta_poly::{DeltaPoly, DeltaPolyRing, PMono, PVar};
use crate::envelope::{EnvElt, EnvRing};
use crate::ring::Ring;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform element at the given level.
pub fn base_elt(r: &mut ChaCha8Rng, b: &BaseRing, level: u32) -> BaseElt {
    let dim = b.dim(level);
    let coeffs: Vec<i128> = (0..dim).map(|k| r.gen_range(0..b.modulus(level, k))).collect();
    b.from_coeffs(level, &coeffs)
}

/// Element with only a few small coefficients, cheap to push through δ.
pub fn small_base_elt(r: &mut ChaCha8Rng, b: &BaseRing, level: u32) -> BaseElt {
    let dim = b.dim(level).min(3);
    let coeffs: Vec<i128> = (0..dim).map(|_| r.gen_range(-3..=3)).collect();
    b.from_coeffs(level, &coeffs)
}

/// Random envelope element with up to `terms` monomials of weight ≤ `wmax`.
pub fn env_elt(r: &mut ChaCha8Rng, e: &EnvRing<BaseRing>, terms: usize, wmax: u32) -> EnvElt<BaseElt> {
    let basis = e.basis_upto(wmax);
    let b = e.coeff.clone();
    let mut acc = e.zero();
    let n = r.gen_range(1..=terms);
    for _ in 0..n {
        let m = basis[r.gen_range(0..basis.len())];
        let c = small_base_elt(r, &b, e.n);
        let x = e.scalar_mul(&c, &e.mono(m)).expect("scalar multiple");
        acc = e.add(&acc, &x);
    }
    acc
}

/// Random polynomial in the frame constants of a chart with total degree ≤ `deg`.
pub fn chart_elt(r: &mut ChaCha8Rng, a: &DeltaPolyRing<BaseRing>, terms: usize, deg: u32) -> DeltaPoly<BaseElt> {
    let b = a.coeff.clone();
    let mut out = BTreeMap::new();
    let n = r.gen_range(1..=terms);
    for _ in 0..n {
        let mut m = Vec::new();
        let mut left = deg;
        for j in 0..a.nconst {
            let e = r.gen_range(0..=left);
            left -= e;
            if e > 0 {
                m.push((PVar::T(j as u16), e));
            }
        }
        let c = small_base_elt(r, &b, a.prec());
        out.insert(PMono(m), c);
    }
    let x = DeltaPoly { level: a.prec(), terms: out };
    a.add(&a.zero(), &x)
}
