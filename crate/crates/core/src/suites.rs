//! Named property suites with seeded inputs and corrupted variants.

use crate::base_prism::{big_binom, BaseElt, BaseRing};
use crate::delta_poly::DeltaPolyRing;
use crate::divided_powers::{pd_comparison_check, sigma_antisym_check, sigma_cocycle_check, sigma_of_data, PdComparison};
use crate::envelope::EnvRing;
use crate::error::{QError, QResult};
use crate::homalg::{pd_complex, poincare_check_on, ChainComplex};
use crate::qhiggs::{
    affine_line_classical, affine_line_complex, affine_line_oracle, build_complex, chain_map_check, chart, compose_pullbacks,
    coordinate_map, d_squared_check, fold_map, form_equal, form_generators, frobenius_pullback, frobenius_spec, gauge, gen_form,
    host_directions, lift_matrices, product_leibniz_check, pullback_chain_map, quotient_and_annihilator, random_commuting,
    scalar_extension, tensor_check, Form, Mat, PullbackSpec, QHiggsModule,
};
use crate::report::Report;
use crate::ring::{delta_power_formula, witt2_add, witt2_mul, DeltaRing, Ring, Witt2Elt};
use crate::sample;
use crate::stratification::{invert_base_matrix, strat_weight_cap, CosimplicialEnvelope, Stratification};
use crate::twisted::{commute_check, delta_compat_check, frobenius_relation_check, qhiggs_derivation, section_check};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Clone, Debug, Default)]
pub struct SuiteConfig {
    pub p: Option<u32>,
    pub prec: Option<u32>,
    pub seed: u64,
    pub corrupt: bool,
    pub instances: Option<usize>,
    pub golden: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig { seed, ..Default::default() }
    }
    fn primes(&self, default: &[u32]) -> Vec<u32> {
        self.p.map(|p| vec![p]).unwrap_or_else(|| default.to_vec())
    }
    fn count(&self, default: usize) -> usize {
        self.instances.unwrap_or(default)
    }
}

pub const SUITES: &[(&str, &str)] = &[
    ("delta-axioms", "W2 homomorphism, power formula and φδ = δφ on random pairs"),
    ("base-identities", "δ(μ) = ημ, φ(μ) = [p]_q μ and the δ([p]_q) identity"),
    ("envelope", "normal-form commutativity, associativity, δ(t) = 0 and golden rewrite tables"),
    ("derivations", "commuting θ_i, δ-compatibility, γ_i(t_i) = q^p t_i and the Frobenius relation"),
    ("pd", "q = 1 comparison with divided powers"),
    ("sigma", "σ antisymmetry and cocycle on D(2)"),
    ("complexes", "d² = 0 and Frobenius, scalar-extension, product and composite chain maps"),
    ("strat", "stratification dictionary on quasi-nilpotent instances"),
    ("poincare", "truncated Poincaré lemma for divided-power complexes"),
    ("affine-line", "q-de Rham cohomology of the affine line against direct oracles"),
    ("ca-h0", "kernel of θ_M against the ε-fixed part"),
];

pub fn run_suite(name: &str, cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = match name {
        "delta-axioms" => delta_axioms(cfg),
        "base-identities" => base_identities(cfg),
        "envelope" => envelope_suite(cfg),
        "derivations" => derivations_suite(cfg),
        "pd" => pd_suite(cfg),
        "sigma" => sigma_suite(cfg),
        "complexes" => complexes_suite(cfg),
        "strat" => strat_suite(cfg, false),
        "poincare" => poincare_suite(cfg),
        "affine-line" => affine_line_suite(cfg),
        "ca-h0" => strat_suite(cfg, true),
        _ => Err(QError::Parse(format!("unknown suite {name}"))),
    }?;
    rep.seed = Some(cfg.seed);
    if cfg.corrupt {
        rep.note("corrupted input");
    }
    Ok(rep)
}

fn stop(r: &Report) -> bool {
    !r.passed
}

/// δ on the base ring, shifted by 1 when corrupted.
fn base_delta(b: &BaseRing, x: &BaseElt, corrupt: bool) -> QResult<BaseElt> {
    let d = b.e_delta(x)?;
    Ok(if corrupt { b.e_add(&d, &b.from_int_at(1, d.level)) } else { d })
}

pub fn delta_axioms(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("delta-axioms", "delta-ring-axioms");
    let configs: Vec<(u32, u32)> = match (cfg.p, cfg.prec) {
        (Some(p), Some(n)) => vec![(p, n)],
        (Some(p), None) => vec![(p, 2)],
        _ => vec![(2, 3), (3, 2), (5, 1)],
    };
    let mut r = sample::rng(cfg.seed);
    for (p, n) in configs {
        let b = BaseRing::q(p, n)?;
        for _ in 0..cfg.count(1000) {
            let x = sample::base_elt(&mut r, &b, n);
            let y = sample::base_elt(&mut r, &b, n);
            let w = |z: &BaseElt| -> QResult<Witt2Elt<BaseElt>> { Ok(Witt2Elt { x0: z.clone(), x1: base_delta(&b, z, cfg.corrupt)? }) };
            let (wx, wy) = (w(&x)?, w(&y)?);
            let s = witt2_add(&b, &wx, &wy)?;
            let ws = w(&b.e_add(&x, &y))?;
            rep.check(b.equal(&s.x1, &ws.x1), || format!("p={p} n={n}: δ(x+y) ≠ W2 sum at x={} y={}", x.sexpr(), y.sexpr()));
            let m = witt2_mul(&b, &wx, &wy)?;
            let wm = w(&b.e_mul(&x, &y))?;
            rep.check(b.equal(&m.x1, &wm.x1), || format!("p={p} n={n}: δ(xy) ≠ W2 product at x={} y={}", x.sexpr(), y.sexpr()));
            let k = r.gen_range(2..=4u32);
            let direct = base_delta(&b, &b.e_pow(&x, k), cfg.corrupt)?;
            let formula = delta_power_formula(&b, &x, k)?;
            rep.check(b.equal(&direct, &formula), || format!("p={p} n={n}: δ(x^{k}) ≠ power formula at x={}", x.sexpr()));
            let lhs = b.e_phi(&base_delta(&b, &x, cfg.corrupt)?);
            let rhs = base_delta(&b, &b.e_phi(&x), cfg.corrupt)?;
            rep.check(b.equal(&lhs, &rhs), || format!("p={p} n={n}: φδ ≠ δφ at x={}", x.sexpr()));
            if stop(&rep) {
                return Ok(rep);
            }
        }
        rep.note(format!("p={p} n={n}: {} pairs", cfg.count(1000)));
    }
    Ok(rep)
}

/// Integer polynomials in q for the exact identity check.
#[derive(Clone, Debug, PartialEq)]
struct ZPoly(Vec<BigInt>);

impl ZPoly {
    fn from(c: &[i64]) -> Self {
        ZPoly(c.iter().map(|&x| BigInt::from(x)).collect()).trim()
    }
    fn trim(mut self) -> Self {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
        self
    }
    fn add(&self, o: &ZPoly) -> ZPoly {
        let n = self.0.len().max(o.0.len());
        ZPoly((0..n).map(|i| self.0.get(i).cloned().unwrap_or_default() + o.0.get(i).cloned().unwrap_or_default()).collect()).trim()
    }
    fn scale(&self, c: &BigInt) -> ZPoly {
        ZPoly(self.0.iter().map(|x| x * c).collect()).trim()
    }
    fn sub(&self, o: &ZPoly) -> ZPoly {
        self.add(&o.scale(&BigInt::from(-1)))
    }
    fn mul(&self, o: &ZPoly) -> ZPoly {
        if self.0.is_empty() || o.0.is_empty() {
            return ZPoly(Vec::new());
        }
        let mut out = vec![BigInt::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ZPoly(out).trim()
    }
    fn pow(&self, e: u32) -> ZPoly {
        (0..e).fold(ZPoly::from(&[1]), |acc, _| acc.mul(self))
    }
    /// f(q^p).
    fn frob(&self, p: u32) -> ZPoly {
        let mut out = vec![BigInt::zero(); (self.0.len().max(1) - 1) * p as usize + 1];
        for (i, a) in self.0.iter().enumerate() {
            out[i * p as usize] = a.clone();
        }
        ZPoly(out).trim()
    }
    fn div_exact_int(&self, p: u32) -> Option<ZPoly> {
        let pp = BigInt::from(p);
        if self.0.iter().any(|c| !(c % &pp).is_zero()) {
            return None;
        }
        Some(ZPoly(self.0.iter().map(|c| c / &pp).collect()))
    }
    /// Exact division by q − 1.
    fn div_mu(&self) -> Option<ZPoly> {
        let n = self.0.len();
        if n == 0 {
            return Some(self.clone());
        }
        let mut out = vec![BigInt::zero(); n - 1];
        let mut carry = BigInt::zero();
        for i in (1..n).rev() {
            carry += &self.0[i];
            out[i - 1] = carry.clone();
        }
        if (carry + &self.0[0]).is_zero() {
            Some(ZPoly(out).trim())
        } else {
            None
        }
    }
    fn delta(&self, p: u32) -> Option<ZPoly> {
        self.frob(p).sub(&self.pow(p)).div_exact_int(p)
    }
}

/// (μ^{p−1} + pη)δ([p]_q) + η[p]_q^p − Σ_ν p^{-1}C(p,ν)μ^{ν−1}[p]_q^ν over Z[q].
fn xi_identity_exact(p: u32, eta_shift: i64) -> Option<ZPoly> {
    let mu = ZPoly::from(&[-1, 1]);
    let xi = ZPoly(vec![BigInt::one(); p as usize]);
    let eta = mu.delta(p)?.div_mu()?.add(&ZPoly::from(&[eta_shift]));
    let dxi = xi.delta(p)?;
    let pb = BigInt::from(p);
    let mut acc = mu.pow(p - 1).add(&eta.scale(&pb)).mul(&dxi).add(&eta.mul(&xi.pow(p)));
    for nu in 1..p {
        let c = big_binom(p as u64, nu as u64) / &pb;
        acc = acc.sub(&mu.pow(nu - 1).mul(&xi.pow(nu)).scale(&c));
    }
    Some(acc)
}

pub fn base_identities(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("base-identities", "q-base-identities");
    let n = cfg.prec.unwrap_or(3).max(1);
    let shift = if cfg.corrupt { 1 } else { 0 };
    for p in cfg.primes(&[2, 3, 5]) {
        let b = BaseRing::q(p, n)?;
        let eta = b.e_add(&b.eta(), &b.from_int(shift));
        let dmu = b.e_delta(&b.mu())?;
        rep.check(b.equal(&dmu, &b.e_mul(&eta, &b.mu())), || format!("p={p}: δ(μ) = {} but ημ = {}", dmu.sexpr(), b.e_mul(&eta, &b.mu()).sexpr()));
        let pm = b.e_phi(&b.mu());
        rep.check(b.equal(&pm, &b.e_mul(&b.xi(), &b.mu())), || format!("p={p}: φ(μ) = {}", pm.sexpr()));
        let dxi = b.e_delta(&b.xi())?;
        let lvl = dxi.level;
        let tr = |x: &BaseElt| b.e_truncate(x, lvl);
        let mut acc = b.e_mul(&b.e_add(&b.e_pow(&b.mu(), p - 1), &b.e_scale(&eta, p as i64)), &dxi);
        acc = b.e_add(&acc, &tr(&b.e_mul(&eta, &b.e_pow(&b.xi(), p))));
        for nu in 1..p {
            let c = (crate::ring::binom(p as u64, nu as u64) / p as u128) as i64;
            acc = b.e_sub(&acc, &tr(&b.e_scale(&b.e_mul(&b.e_pow(&b.mu(), nu - 1), &b.e_pow(&b.xi(), nu)), c)));
        }
        rep.check(acc.is_zero(), || format!("p={p}: δ([p]_q) identity leaves {} in R_{lvl}", acc.sexpr()));
        match xi_identity_exact(p, shift) {
            Some(z) => rep.check(z.0.is_empty(), || format!("p={p}: δ([p]_q) identity leaves {:?} in Z[q]", z.0)),
            None => rep.check(false, || format!("p={p}: inexact division in Z[q]")),
        };
        if stop(&rep) {
            break;
        }
    }
    Ok(rep)
}

/// Weight cap used for the golden envelope tables.
pub fn golden_envelope_cap(p: u32) -> u32 {
    p * p
}

pub fn golden_envelope(p: u32, n: u32, d: usize) -> QResult<EnvRing<BaseRing>> {
    let b = BaseRing::q(p, n)?;
    let cs: Vec<BaseElt> = (0..d).map(|i| b.from_int(i as i64 + 1)).collect();
    EnvRing::<BaseRing>::over_base(&b, &cs, n, golden_envelope_cap(p))
}

pub fn golden_name_envelope(p: u32, n: u32, d: usize) -> String {
    format!("envelope_p{p}_d{d}_n{n}.json")
}

pub fn golden_name_pd(p: u32, k: u32) -> String {
    format!("pd_p{p}_k{k}.json")
}

pub fn envelope_suite(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("envelope", "envelope-normal-form");
    let mut r = sample::rng(cfg.seed);
    let precs: Vec<u32> = cfg.prec.map(|n| vec![n]).unwrap_or_else(|| vec![1, 2, 3]);
    for p in cfg.primes(&[2, 3]) {
        for d in 1..=2usize {
            for &n in &precs {
                let e = golden_envelope(p, n, d)?;
                let third = e.wcap / 3;
                for _ in 0..cfg.count(200) / (2 * precs.len()) + 1 {
                    let x = sample::env_elt(&mut r, &e, 3, third);
                    let y = sample::env_elt(&mut r, &e, 3, third);
                    let z = sample::env_elt(&mut r, &e, 3, third);
                    let xy = e.mul(&x, &y)?;
                    rep.check(e.equal(&xy, &e.mul(&y, &x)?), || format!("p={p} d={d} n={n}: xy ≠ yx at {}", e.render(&x)));
                    let l = e.mul(&xy, &z)?;
                    let rr = e.mul(&x, &e.mul(&y, &z)?)?;
                    rep.check(e.equal(&l, &rr), || format!("p={p} d={d} n={n}: (xy)z ≠ x(yz)"));
                    let s = e.add(&x, &y);
                    rep.check(e.equal(&e.delta(&s)?, &e.delta_via_phi(&s)?), || format!("p={p} d={d} n={n}: structural δ ≠ (φ(x) − x^p)/p"));
                    if stop(&rep) {
                        return Ok(rep);
                    }
                }
                for i in 0..d {
                    let shift = if cfg.corrupt { e.one() } else { e.zero() };
                    let t = e.add(&e.t(i)?, &shift);
                    let dt = e.delta(&t)?;
                    rep.check(e.is_zero(&dt), || format!("p={p} d={d} n={n}: δ(t{i}) = {}", e.render(&dt)));
                }
                if let Some(dir) = &cfg.golden {
                    let path = dir.join(golden_name_envelope(p, n, d));
                    match std::fs::read_to_string(&path) {
                        Ok(text) => {
                            let want: serde_json::Value = serde_json::from_str(&text).map_err(|e| QError::Parse(e.to_string()))?;
                            let got = e.table_json();
                            let want = want.get("table").unwrap_or(&want);
                            rep.check(*want == got, || format!("rewrite table differs from {}", path.display()));
                        }
                        Err(_) => rep.fail(format!("missing golden file {}", path.display())),
                    }
                }
                if stop(&rep) {
                    return Ok(rep);
                }
            }
        }
    }
    Ok(rep)
}

pub fn derivations_suite(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("derivations", "q-higgs-derivations");
    let n = cfg.prec.unwrap_or(2);
    let mut r = sample::rng(cfg.seed);
    for p in cfg.primes(&[2, 3]) {
        let w = if p == 2 { 8 } else { 9 };
        let b = BaseRing::q(p, n)?;
        let cs = vec![b.from_int(1), b.from_int(2)];
        let e = EnvRing::<BaseRing>::over_base(&b, &cs, n, w)?;
        let count = cfg.count(100);
        let mut samples: Vec<_> = (0..count).map(|_| sample::env_elt(&mut r, &e, 3, w / p)).collect();
        samples.push(e.tau(0)?);
        samples.push(e.delta_tau(0, 1)?);
        let ths: Vec<_> = (0..2)
            .map(|i| qhiggs_derivation(&e, i).map(|t| t.with_leibniz(!cfg.corrupt)))
            .collect::<QResult<_>>()?;
        for (i, th) in ths.iter().enumerate() {
            rep.absorb(section_check(&e, th, &samples)?);
            if stop(&rep) {
                return Ok(rep);
            }
            rep.absorb(delta_compat_check(&e, th, &samples)?);
            rep.absorb(frobenius_relation_check(&e, th, &samples)?);
            let g = th.gamma(&e, &e.t(i)?)?;
            let want = e.mul_base(&e.t(i)?, &b.e_pow(&b.q_elt(), p))?;
            rep.check(e.equal(&g, &want), || format!("p={p}: γ{i}(t{i}) = {}", e.render(&g)));
        }
        rep.absorb(commute_check(&e, &ths[0], &ths[1], &samples)?);
        rep.note(format!("p={p}: {} samples", samples.len()));
        if stop(&rep) {
            break;
        }
    }
    Ok(rep)
}

pub fn pd_envelope(p: u32, n: u32, depth: u32, a: i64) -> QResult<PdComparison> {
    let b = BaseRing::q1(p, n)?;
    let w = p.pow(depth + 1) - 1;
    let e = EnvRing::<BaseRing>::over_base(&b, &[b.from_int(a)], n, w)?;
    PdComparison::new(Arc::new(e), depth)
}

pub fn pd_suite(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("pd", "pd-comparison");
    let n = cfg.prec.unwrap_or(3);
    let mut r = sample::rng(cfg.seed);
    for p in cfg.primes(&[2, 3]) {
        for depth in 0..=2u32 {
            for a in [0i64, 1] {
                let mut cmp = pd_envelope(p, n, depth, a)?;
                if depth == 0 {
                    check_pd_golden(&mut rep, cfg, p, depth, a)?;
                    continue;
                }
                if cfg.corrupt {
                    cmp = cmp.with_perturbed_image(0, 1);
                }
                let e = cmp.env.clone();
                let mut samples: Vec<_> = (0..cfg.count(12)).map(|_| sample::env_elt(&mut r, &e, 3, e.wcap / 2)).collect();
                samples.extend(e.basis_upto(e.wcap).into_iter().map(|m| e.mono(m)));
                rep.absorb(pd_comparison_check(&cmp, &samples)?);
                check_pd_golden(&mut rep, cfg, p, depth, a)?;
                if stop(&rep) {
                    return Ok(rep);
                }
            }
        }
    }
    Ok(rep)
}

fn check_pd_golden(rep: &mut Report, cfg: &SuiteConfig, p: u32, depth: u32, a: i64) -> QResult<()> {
    let Some(dir) = &cfg.golden else { return Ok(()) };
    if a != 0 {
        return Ok(());
    }
    let path = dir.join(golden_name_pd(p, depth));
    match std::fs::read_to_string(&path) {
        Ok(text) => {
            let want: serde_json::Value = serde_json::from_str(&text).map_err(|e| QError::Parse(e.to_string()))?;
            rep.check(want == pd_dictionary(p, depth)?, || format!("dictionary differs from {}", path.display()));
        }
        Err(_) => rep.fail(format!("missing golden file {}", path.display())),
    }
    Ok(())
}

/// The golden-locked dictionary at precision 3 with center 0.
pub fn pd_dictionary(p: u32, depth: u32) -> QResult<serde_json::Value> {
    pd_envelope(p, 3, depth, 0)?.dictionary_json()
}

pub fn sigma_suite(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("sigma", "sigma-identities");
    let n = cfg.prec.unwrap_or(3);
    for p in cfg.primes(&[2, 3]) {
        for d in 1..=2usize {
            let b = BaseRing::q1(p, n)?;
            let cs: Vec<BaseElt> = (0..d).map(|i| b.from_int(i as i64 * p as i64)).collect();
            let c = CosimplicialEnvelope::new(&b, &cs, p)?;
            let e = c.d2.as_ref();
            for i in 0..d {
                let tau = |l: usize| e.tau(l * d + i);
                let t = |l: usize| e.t(l * d + i);
                let bb = e.zero();
                let data = |l: usize, m: usize| -> QResult<_> { sigma_of_data(e, &e.sub(&tau(l)?, &tau(m)?), &t(m)?, &bb) };
                let (d01, d10, d02, d12) = (data(0, 1)?, data(1, 0)?, data(0, 2)?, data(1, 2)?);
                let mut d01c = d01.clone();
                if cfg.corrupt {
                    d01c.sigma = e.add(&d01c.sigma, &e.one());
                }
                rep.check(d01.identity_holds(e)?, || format!("p={p}: τ01^p ≠ pσ01"));
                rep.absorb(sigma_antisym_check(e, &d01c, &d10)?);
                rep.absorb(sigma_cocycle_check(e, &d01c, &d02, &d12)?);
                if stop(&rep) {
                    return Ok(rep);
                }
            }
        }
    }
    Ok(rep)
}

type Chart = DeltaPolyRing<BaseRing>;

struct ChartInstance {
    m: QHiggsModule<Chart>,
    desc: String,
}

fn random_chart_instance(r: &mut rand_chacha::ChaCha8Rng, p: u32, n: u32, d: usize, rank: usize, corrupt: bool) -> QResult<ChartInstance> {
    let b = BaseRing::q(p, n)?;
    let a = chart(&b, d);
    let mut ms = random_commuting(r, &b, n, rank, d, false);
    if corrupt && d == 2 && rank >= 2 {
        ms[0] = (0..rank).map(|k| (0..rank).map(|j| b.from_int(if j == k + 1 { 1 } else { 0 })).collect()).collect();
        ms[1] = (0..rank).map(|k| (0..rank).map(|j| b.from_int(if k == j + 1 { 1 } else { 0 })).collect()).collect();
    }
    let m0 = QHiggsModule::new(a.clone(), lift_matrices(a.as_ref(), &ms))?;
    let h = a.as_ref();
    let pm: Mat<_> = (0..rank)
        .map(|k| {
            (0..rank)
                .map(|j| if k == j { h.one() } else if k < j { sample::chart_elt(r, h, 2, 1) } else { h.zero() })
                .collect()
        })
        .collect();
    let m = gauge(&m0, &pm)?;
    Ok(ChartInstance { m, desc: format!("p={p} n={n} d={d} rank={rank}") })
}

pub fn complexes_suite(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("complexes", "q-higgs-complexes");
    let mut r = sample::rng(cfg.seed);
    let primes = cfg.primes(&[2, 3]);
    let n = cfg.prec.unwrap_or(1);
    let count = cfg.count(50);
    for k in 0..count {
        let p = primes[k % primes.len()];
        let d = if cfg.corrupt { 2 } else { 1 + (k / primes.len()) % 2 };
        let rank = if cfg.corrupt { 2 } else { 1 + k % 3 };
        let inst = random_chart_instance(&mut r, p, n, d, rank, cfg.corrupt)?;
        let m = &inst.m;
        let mut sub = Report::new(&inst.desc, "q-higgs-complexes");
        sub.absorb(m.check_integrability()?);
        sub.absorb(d_squared_check(m, 2)?);
        if stop(&sub) {
            rep.absorb(sub);
            return Ok(rep);
        }
        let b = m.host.base().clone();
        let fs = frobenius_spec(m.host.clone())?;
        fs.require_valid(m.host.as_ref(), &m.ders, m.host.as_ref(), &m.ders, &[])?;
        let fm = frobenius_pullback(m, 2)?;
        let fm2 = scalar_extension(m, &fs, m.host.clone(), m.ders.clone())?;
        sub.check(fm.same_theta(&fm2), || "Frobenius pullback differs between the two routes".into());
        let fmap = |x: &Form<_>| pullback_chain_map(m, &fm, &fs, x);
        sub.absorb(chain_map_check("frobenius", m, &fm, &fmap, 1)?);
        let a1 = chart(&b, 1);
        let d1 = host_directions(a1.as_ref())?;
        let a2 = chart(&b, 2);
        let d2 = host_directions(a2.as_ref())?;
        let one1 = a1.one();
        if d == 2 {
            let fold = PullbackSpec { name: "fold".into(), g: fold_map(m.host.clone(), a1.clone()), psi: vec![0, 0], c: vec![one1.clone(), one1.clone()] };
            let samples: Vec<_> = (0..3).map(|_| sample::chart_elt(&mut r, m.host.as_ref(), 2, 2)).collect();
            fold.require_valid(m.host.as_ref(), &m.ders, a1.as_ref(), &d1, &samples)?;
            let m1 = scalar_extension(m, &fold, a1.clone(), d1.clone())?;
            sub.absorb(m1.check_integrability()?);
            let map = |x: &Form<_>| pullback_chain_map(m, &m1, &fold, x);
            sub.absorb(chain_map_check("fold", m, &m1, &map, 1)?);
            let fr = frobenius_spec(a1.clone())?;
            let m2 = scalar_extension(&m1, &fr, a1.clone(), d1.clone())?;
            let comp = compose_pullbacks(&fold, &fr, a1.as_ref())?;
            comp.require_valid(m.host.as_ref(), &m.ders, a1.as_ref(), &d1, &samples)?;
            let m2c = scalar_extension(m, &comp, a1.clone(), d1.clone())?;
            sub.check(m2.same_theta(&m2c), || "composite pullback module differs".into());
            for (_, g) in form_generators(m, 1) {
                let x = gen_form(m, &g);
                let two = pullback_chain_map(&m1, &m2, &fr, &pullback_chain_map(m, &m1, &fold, &x)?)?;
                let one = pullback_chain_map(m, &m2c, &comp, &x)?;
                sub.check(form_equal(&m2, &two, &one), || format!("composite chain map differs on e{} w{:?}", g.1, g.2));
            }
        } else {
            let inc = PullbackSpec { name: "inclusion".into(), g: coordinate_map(m.host.clone(), a2.clone(), 0), psi: vec![0], c: vec![a2.one()] };
            inc.require_valid(m.host.as_ref(), &m.ders, a2.as_ref(), &d2, &[])?;
            let m2 = scalar_extension(m, &inc, a2.clone(), d2.clone())?;
            sub.absorb(m2.check_integrability()?);
            let map = |x: &Form<_>| pullback_chain_map(m, &m2, &inc, x);
            sub.absorb(chain_map_check("inclusion", m, &m2, &map, 2)?);
        }
        let ms = random_commuting(&mut r, &b, n, 1, d, false);
        let line = QHiggsModule::with_ders(m.host.clone(), m.ders.clone(), lift_matrices(m.host.as_ref(), &ms))?;
        sub.absorb(product_leibniz_check(m, &line, 1)?);
        let h = m.host.as_ref();
        let v: Vec<_> = (0..m.rank).map(|_| sample::chart_elt(&mut r, h, 2, 1)).collect();
        let w = vec![sample::chart_elt(&mut r, h, 2, 1)];
        sub.absorb(tensor_check(m, &line, &[(v, w)])?);
        rep.absorb(sub);
        if stop(&rep) {
            return Ok(rep);
        }
    }
    rep.note(format!("{count} instances"));
    Ok(rep)
}

struct StratPop {
    c: Arc<CosimplicialEnvelope>,
    theta: Vec<Vec<Vec<BaseElt>>>,
    desc: String,
}

fn strat_population(cfg: &SuiteConfig) -> QResult<Vec<StratPop>> {
    let mut r = sample::rng(cfg.seed);
    let primes = cfg.primes(&[2, 3]);
    let n = cfg.prec.unwrap_or(1);
    let mut envs: Vec<((u32, usize), Arc<CosimplicialEnvelope>)> = Vec::new();
    let mut out = Vec::new();
    for k in 0..cfg.count(50) {
        let p = primes[k % primes.len()];
        let d = 1 + (k / primes.len()) % 2;
        let rank = 1 + (k / (2 * primes.len())) % 3;
        let c = match envs.iter().find(|(key, _)| *key == (p, d)) {
            Some((_, c)) => c.clone(),
            None => {
                let b = BaseRing::q(p, n)?;
                let cs: Vec<BaseElt> = (0..d).map(|i| b.from_int(i as i64 + 1)).collect();
                let c = Arc::new(CosimplicialEnvelope::new(&b, &cs, strat_weight_cap(p, 2))?);
                envs.push(((p, d), c.clone()));
                c
            }
        };
        let theta = random_commuting(&mut r, &c.base, n, rank, d, true);
        out.push(StratPop { c, theta, desc: format!("p={p} d={d} rank={rank}") });
    }
    Ok(out)
}

fn corrupt_strat(c: &CosimplicialEnvelope, s: &mut Stratification) -> QResult<()> {
    let r1 = c.d1.as_ref();
    let f1 = c.divided_power(0, 1)?;
    let extra = r1.add(&f1, &r1.mul(&f1, &f1)?);
    s.e[0][0] = r1.add(&s.e[0][0], &extra);
    Ok(())
}

pub fn mixing_matrix(b: &BaseRing, rank: usize, r: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<BaseElt>> {
    (0..rank)
        .map(|i| (0..rank).map(|j| b.from_int(if i == j { 1 } else if i > j { r.gen_range(-2..=2) } else { 0 })).collect())
        .collect()
}

/// Stratification dictionary checks, or the H⁰ comparison when `ca_h0` is set.
pub fn strat_suite(cfg: &SuiteConfig, ca_h0: bool) -> QResult<Report> {
    let mut rep = if ca_h0 { Report::new("ca-h0", "strat-ca-h0") } else { Report::new("strat", "strat-dictionary") };
    let pop = strat_population(cfg)?;
    let mut r = sample::rng(cfg.seed ^ 0x5eed);
    for inst in &pop {
        let c = inst.c.as_ref();
        let mut s = c.strat_from_higgs(&inst.theta)?;
        if cfg.corrupt {
            corrupt_strat(c, &mut s)?;
        }
        let m = c.module(&inst.theta)?;
        let mut sub = Report::new(&inst.desc, rep.tag.as_str());
        if ca_h0 {
            sub.absorb(c.ca_h0_check(&m, &s, 1)?);
        } else {
            sub.absorb(c.augmentation_check(&s)?);
            sub.absorb(c.cocycle_check(&s)?);
            let samples: Vec<Vec<_>> = vec![(0..m.rank).map(|_| sample::env_elt(&mut r, c.d0.as_ref(), 2, 1)).collect()];
            sub.absorb(c.gamma_check(&m, &s, &samples)?);
            sub.absorb(c.frobenius_check(&s, &inst.theta)?);
            let th2 = random_commuting(&mut r, &c.base, c.base.n(), 2, c.d, true);
            let s2 = c.strat_from_higgs(&th2)?;
            sub.absorb(c.tensor_check(&s, &s2, &inst.theta, &th2)?);
            let pm = mixing_matrix(&c.base, s.rank, &mut r);
            invert_base_matrix(&c.base, &pm)?;
            sub.absorb(c.roundtrip_check(&inst.theta, &pm)?);
        }
        rep.absorb(sub);
        if stop(&rep) {
            return Ok(rep);
        }
    }
    rep.note(format!("{} instances", pop.len()));
    Ok(rep)
}

pub fn poincare_suite(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("poincare", "poincare-lemma");
    let n = cfg.prec.unwrap_or(1);
    let configs: Vec<(u32, u32)> = match cfg.p {
        Some(2) => vec![(2, 4)],
        Some(3) => vec![(3, 9)],
        Some(p) => vec![(p, p)],
        None => vec![(2, 4), (3, 9)],
    };
    for (p, depth) in configs {
        for d in 1..=2usize {
            let mut c = pd_complex(p, n, d, depth, 1)?;
            if cfg.corrupt {
                let d0 = &mut c.diffs[0];
                let col = (0..d0.first().map_or(0, Vec::len)).find(|&j| d0.iter().any(|r| r[j] != 0)).unwrap_or(0);
                for row in d0.iter_mut() {
                    row[col] *= p as i64;
                }
                c = ChainComplex { labels: c.labels.clone(), bands: c.bands.clone(), ..ChainComplex::new(p, c.exps.clone(), c.diffs.clone())? };
            }
            rep.absorb(poincare_check_on(&c, p, n, d, depth, 1)?);
            if stop(&rep) {
                return Ok(rep);
            }
        }
    }
    Ok(rep)
}

pub fn affine_line_suite(cfg: &SuiteConfig) -> QResult<Report> {
    let mut rep = Report::new("affine-line", "q-de-rham-affine-line");
    let deg = 8;
    let precs: Vec<u32> = cfg.prec.map(|n| vec![n]).unwrap_or_else(|| vec![1, 2]);
    for p in cfg.primes(&[2]) {
        for &n in &precs {
            let b = BaseRing::q(p, n)?;
            let c = affine_line_complex(&b, deg)?;
            let (mut h0, mut h1) = affine_line_oracle(&b, deg);
            if cfg.corrupt {
                h1.clear();
                h0.truncate(1);
                for m in 1..=deg as u64 {
                    let (q, a) = quotient_and_annihilator(&b, &b.qint(m));
                    h1.extend(q);
                    h0.extend(a);
                }
                h0.sort_unstable_by(|a, b| b.cmp(a));
                h1.sort_unstable_by(|a, b| b.cmp(a));
            }
            let g0 = c.cohomology(0)?;
            let g1 = c.cohomology(1)?;
            rep.check(g0.factors == h0, || format!("p={p} n={n}: H0 {:?} vs oracle {:?}", g0.factors, h0));
            rep.check(g1.factors == h1, || format!("p={p} n={n}: H1 {:?} vs oracle {:?}", g1.factors, h1));
            let z1 = c.cohomology_via_z(1)?;
            rep.check(z1.factors == g1.factors, || format!("p={p} n={n}: H1 differs between elimination routes"));
            let b1 = BaseRing::q1(p, n)?;
            let c1 = affine_line_complex(&b1, deg)?;
            let (k0, k1) = affine_line_classical(p, n, deg);
            let e0 = c1.cohomology(0)?;
            let e1 = c1.cohomology(1)?;
            rep.check(e0.factors == k0, || format!("p={p} n={n} q=1: H0 {:?} vs {:?}", e0.factors, k0));
            rep.check(e1.factors == k1, || format!("p={p} n={n} q=1: H1 {:?} vs {:?}", e1.factors, k1));
            rep.note(format!("p={p} n={n}: H1 = {}", g1.render(p)));
            if stop(&rep) {
                return Ok(rep);
            }
        }
    }
    Ok(rep)
}

/// The complex of a chart module truncated at degree ≤ w, used by the CLI.
pub fn chart_complex(m: &QHiggsModule<Chart>, w: u32) -> QResult<ChainComplex> {
    build_complex(m, w, 0)
}
