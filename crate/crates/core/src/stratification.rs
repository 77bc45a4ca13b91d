//! Stratifications on the cosimplicial envelope D(•) and their comparison with q-Higgs fields.
//!
//! D(r) is the envelope on (r+1) copies of the frame, variable l·d + i holding copy l of τ_i,
//! all copies centered at a_i, so that τ_{lm} = τ_l − τ_m. Face maps rename copies, the
//! diagonal Δ multiplies them. A stratification is an invertible E over D(1) with
//! ε(1 ⊗ e_j) = Σ_k E[k][j] e_k, so that ε(1 ⊗ x) = Σ_j p_1(x_j) E[:, j].

use crate::base_prism::{BaseElt, BaseRing};
use crate::envelope::{EMono, EnvElt, EnvRing};
use crate::error::{QError, QResult};
use crate::homalg::{kernel_of, maps_to_zero};
use crate::qhiggs::{lift_matrices, tensor, Mat, QHiggsModule};
use crate::report::Report;
use crate::ring::{DeltaRing, Ring};
use crate::twisted::{qhiggs_derivation, DerivationSpec};
use parking_lot::RwLock;
use std::collections::HashMap;
use std::sync::Arc;

pub type Env = EnvRing<BaseRing>;
pub type EElt = EnvElt<BaseElt>;

pub fn mat_identity<R: Ring>(r: &R, n: usize) -> Mat<R::Elem> {
    (0..n).map(|i| (0..n).map(|j| if i == j { r.one() } else { r.zero() }).collect()).collect()
}

pub fn mat_mul<R: Ring>(r: &R, a: &Mat<R::Elem>, b: &Mat<R::Elem>) -> QResult<Mat<R::Elem>> {
    let n = a.len();
    let m = b.first().map(|x| x.len()).unwrap_or(0);
    let mut out = vec![vec![r.zero(); m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            if r.is_zero(&a[i][k]) {
                continue;
            }
            for j in 0..m {
                if !r.is_zero(&b[k][j]) {
                    out[i][j] = r.add(&out[i][j], &r.mul(&a[i][k], &b[k][j])?);
                }
            }
        }
    }
    Ok(out)
}

pub fn mat_equal<R: Ring>(r: &R, a: &Mat<R::Elem>, b: &Mat<R::Elem>) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(u, v)| r.equal(u, v)))
}

pub fn mat_is_zero<R: Ring>(r: &R, a: &Mat<R::Elem>) -> bool {
    a.iter().all(|row| row.iter().all(|x| r.is_zero(x)))
}

pub fn mat_map<R: Ring, S: Ring>(a: &Mat<R::Elem>, f: &dyn Fn(&R::Elem) -> QResult<S::Elem>) -> QResult<Mat<S::Elem>> {
    a.iter().map(|row| row.iter().map(f).collect()).collect()
}

pub fn kron<R: Ring>(r: &R, a: &Mat<R::Elem>, b: &Mat<R::Elem>) -> QResult<Mat<R::Elem>> {
    let (na, nb) = (a.len(), b.len());
    let mut out = vec![vec![r.zero(); na * nb]; na * nb];
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[i * nb + k][j * nb + l] = r.mul(&a[i][j], &b[k][l])?;
                }
            }
        }
    }
    Ok(out)
}

pub fn mat_render<R: Ring>(r: &R, a: &Mat<R::Elem>) -> String {
    format!(
        "[{}]",
        a.iter().map(|row| format!("[{}]", row.iter().map(|x| r.render(x)).collect::<Vec<_>>().join(", "))).collect::<Vec<_>>().join(", ")
    )
}

fn base_mat_mul(b: &BaseRing, x: &[Vec<BaseElt>], y: &[Vec<BaseElt>]) -> Vec<Vec<BaseElt>> {
    let n = x.len();
    let lvl = x.iter().chain(y).flatten().map(|e| e.level).min().unwrap_or(b.n());
    (0..n)
        .map(|i| (0..n).fold(vec![b.elt_zero(lvl); n], |mut acc, k| {
            for j in 0..n {
                acc[j] = b.e_add(&acc[j], &b.e_mul(&x[i][k], &y[k][j]));
            }
            acc
        }))
        .collect()
}

fn base_mat_zero(x: &[Vec<BaseElt>]) -> bool {
    x.iter().flatten().all(|e| e.is_zero())
}

/// A stratification matrix over D(1).
#[derive(Clone, Debug)]
pub struct Stratification {
    pub rank: usize,
    pub e: Mat<EElt>,
}

/// The rings D, D(1), D(2) with face maps and the q-divided-power kernel elements f_n.
pub struct CosimplicialEnvelope {
    pub base: BaseRing,
    pub d: usize,
    pub wcap: u32,
    pub centers: Vec<BaseElt>,
    pub d0: Arc<Env>,
    pub d1: Arc<Env>,
    pub d2: Arc<Env>,
    pub ders0: Arc<Vec<DerivationSpec<Env>>>,
    pub ders1: Vec<DerivationSpec<Env>>,
    fmemo: RwLock<HashMap<(usize, usize), EElt>>,
}

fn build_copies(base: &BaseRing, centers: &[BaseElt], copies: usize, wcap: u32) -> QResult<Env> {
    let d = centers.len();
    let cs: Vec<BaseElt> = (0..copies).flat_map(|_| centers.iter().cloned()).collect();
    let e = Env::over_base(base, &cs, base.n(), wcap)?;
    let names = (0..copies * d).map(|v| if copies == 1 { format!("tau{v}") } else { format!("tau{}_{}", v / d, v % d) }).collect();
    Ok(e.with_names(names))
}

impl CosimplicialEnvelope {
    pub fn new(base: &BaseRing, centers: &[BaseElt], wcap: u32) -> QResult<Self> {
        let d = centers.len();
        let d0 = Arc::new(build_copies(base, centers, 1, wcap)?);
        let d1 = Arc::new(build_copies(base, centers, 2, wcap)?);
        let d2 = Arc::new(build_copies(base, centers, 3, wcap)?);
        let ders0 = Arc::new((0..d).map(|i| qhiggs_derivation(d0.as_ref(), i)).collect::<QResult<Vec<_>>>()?);
        let ders1 = (0..d).map(|i| qhiggs_derivation(d1.as_ref(), d + i)).collect::<QResult<Vec<_>>>()?;
        Ok(CosimplicialEnvelope {
            base: base.clone(),
            d,
            wcap,
            centers: centers.to_vec(),
            d0,
            d1,
            d2,
            ders0,
            ders1,
            fmemo: RwLock::new(HashMap::new()),
        })
    }

    fn ring(&self, r: usize) -> &Env {
        match r {
            0 => &self.d0,
            1 => &self.d1,
            _ => &self.d2,
        }
    }

    /// Ring map D(rs) → D(rt) sending copy l to copy sigma[l].
    pub fn copy_map(&self, rs: usize, rt: usize, sigma: &[usize], x: &EElt) -> QResult<EElt> {
        let (src, tgt) = (self.ring(rs), self.ring(rt));
        let (d, lv) = (self.d, src.levels);
        let injective = (0..sigma.len()).all(|a| (0..a).all(|b| sigma[a] != sigma[b]));
        let mut acc = tgt.zero_at(x.level);
        for (m, c) in &x.terms {
            let img = if injective {
                let mut out = EMono::one();
                for (l, &tl) in sigma.iter().enumerate() {
                    for i in 0..d {
                        for k in 0..lv {
                            out.0[tgt.slot(tl * d + i, k)] = m.0[src.slot(l * d + i, k)];
                        }
                    }
                }
                tgt.mono(out)
            } else {
                let mut out = tgt.one();
                for (l, &tl) in sigma.iter().enumerate() {
                    let mut part = EMono::one();
                    for i in 0..d {
                        for k in 0..lv {
                            part.0[tgt.slot(tl * d + i, k)] = m.0[src.slot(l * d + i, k)];
                        }
                    }
                    if !part.is_one() {
                        out = tgt.mul(&out, &tgt.mono(part))?;
                    }
                }
                out
            };
            acc = tgt.add(&acc, &tgt.scalar_mul(c, &img)?);
        }
        Ok(tgt.truncate(&acc, x.level))
    }

    pub fn p0(&self, x: &EElt) -> QResult<EElt> {
        self.copy_map(0, 1, &[0], x)
    }
    pub fn p1(&self, x: &EElt) -> QResult<EElt> {
        self.copy_map(0, 1, &[1], x)
    }
    pub fn diag(&self, x: &EElt) -> QResult<EElt> {
        self.copy_map(1, 0, &[0, 0], x)
    }
    pub fn swap(&self, x: &EElt) -> QResult<EElt> {
        self.copy_map(1, 1, &[1, 0], x)
    }
    pub fn face(&self, l: usize, m: usize, x: &EElt) -> QResult<EElt> {
        self.copy_map(1, 2, &[l, m], x)
    }

    fn split_copy1(&self, m: &EMono, i: usize) -> (u32, EMono) {
        let v = self.d + i;
        let w = self.d1.var_weight(m, v);
        let mut rest = *m;
        for k in 0..self.d1.levels {
            rest.0[self.d1.slot(v, k)] = 0;
        }
        (w, rest)
    }

    fn weight_mono(&self, i: usize, w: u32) -> QResult<EMono> {
        let v = self.d + i;
        let p = self.base.p();
        let mut m = EMono::one();
        let mut x = w;
        for k in 0..self.d1.levels {
            m.0[self.d1.slot(v, k)] = (x % p) as u8;
            x /= p;
        }
        if x > 0 || w > self.wcap {
            return Err(QError::WeightCapTooSmall(format!("digit monomial of weight {w} exceeds cap {}", self.wcap)));
        }
        Ok(m)
    }

    /// x with θ_{1;i}(x) = y by back-substitution on the copy-1 digit weight.
    pub fn theta1_preimage(&self, i: usize, y: &EElt) -> QResult<EElt> {
        let r = self.d1.as_ref();
        let th = &self.ders1[i];
        let mut x = r.zero_at(y.level);
        let mut rem = y.clone();
        let mut last = u32::MAX;
        while !r.is_zero(&rem) {
            let top = rem.terms.keys().map(|m| self.split_copy1(m, i).0).max().unwrap_or(0);
            if top >= last {
                return Err(QError::PreconditionViolated(format!("θ-preimage does not terminate at weight {top}")));
            }
            last = top;
            let vw = self.weight_mono(i, top + 1)?;
            let img = th.apply(r, &r.mono(vw))?;
            let target = self.weight_mono(i, top)?;
            let lam = r.coeff_of(&img, &target);
            if !self.base.is_unit(&lam) {
                return Err(QError::NotAUnit(format!("leading coefficient {} of θ on weight {}", r.coeff.render(&lam), top + 1)));
            }
            let inv = r.coeff.invert(&lam)?;
            let mut cand = r.zero_at(y.level);
            for (m, c) in &rem.terms {
                let (w, rest) = self.split_copy1(m, i);
                if w == top {
                    let mut mm = rest;
                    for k in 0..r.levels {
                        let s = r.slot(self.d + i, k);
                        mm.0[s] = vw.0[s];
                    }
                    cand = r.add(&cand, &r.scalar_mul(&r.coeff.mul(c, &inv)?, &r.mono(mm))?);
                }
            }
            x = r.add(&x, &cand);
            rem = r.sub(&rem, &th.apply(r, &cand)?);
        }
        Ok(x)
    }

    /// f^{(i)}_n: f_0 = 1, θ_{1;i} f_n = f_{n−1}, Δ f_n = 0.
    pub fn divided_power(&self, i: usize, n: usize) -> QResult<EElt> {
        if let Some(f) = self.fmemo.read().get(&(i, n)) {
            return Ok(f.clone());
        }
        let f = if n == 0 {
            self.d1.one()
        } else {
            let prev = self.divided_power(i, n - 1)?;
            let pre = self.theta1_preimage(i, &prev)?;
            self.d1.sub(&pre, &self.p0(&self.diag(&pre)?)?)
        };
        self.fmemo.write().insert((i, n), f.clone());
        Ok(f)
    }

    pub fn lift0(&self, m: &[Vec<BaseElt>]) -> Mat<EElt> {
        lift_matrices(self.d0.as_ref(), &[m.to_vec()]).remove(0)
    }

    pub fn lift1(&self, m: &[Vec<BaseElt>]) -> Mat<EElt> {
        lift_matrices(self.d1.as_ref(), &[m.to_vec()]).remove(0)
    }

    /// The q-Higgs module over D with base-valued matrices Θ_i.
    pub fn module(&self, theta: &[Vec<Vec<BaseElt>>]) -> QResult<QHiggsModule<Env>> {
        QHiggsModule::with_ders(self.d0.clone(), self.ders0.clone(), lift_matrices(self.d0.as_ref(), theta))
    }

    /// E = Σ_n f_n Θ^n for commuting, quasi-nilpotent base-valued Θ.
    pub fn strat_from_higgs(&self, theta: &[Vec<Vec<BaseElt>>]) -> QResult<Stratification> {
        let b = &self.base;
        let rank = theta.first().map(|m| m.len()).unwrap_or(0);
        if theta.len() != self.d {
            return Err(QError::PreconditionViolated(format!("{} matrices for {} directions", theta.len(), self.d)));
        }
        for i in 0..self.d {
            for j in i + 1..self.d {
                let a = base_mat_mul(b, &theta[i], &theta[j]);
                let c = base_mat_mul(b, &theta[j], &theta[i]);
                let diff: Vec<Vec<BaseElt>> =
                    a.iter().zip(&c).map(|(x, y)| x.iter().zip(y).map(|(u, v)| b.e_sub(u, v)).collect()).collect();
                if !base_mat_zero(&diff) {
                    return Err(QError::PreconditionViolated(format!("Θ{i} and Θ{j} do not commute")));
                }
            }
        }
        let idm: Vec<Vec<BaseElt>> =
            (0..rank).map(|i| (0..rank).map(|j| b.from_int(if i == j { 1 } else { 0 })).collect()).collect();
        let nmax = 4 * rank.max(1) + 2 * self.base.n() as usize + 2;
        let r1 = self.d1.as_ref();
        let mut e = vec![vec![r1.zero(); rank]; rank];
        let mut layer: Vec<(Vec<usize>, Vec<Vec<BaseElt>>)> = vec![(vec![0; self.d], idm)];
        let mut deg = 0;
        while !layer.is_empty() {
            if deg > nmax {
                return Err(QError::NotQuasiNilpotent(format!("Θ-monomials of degree {nmax} do not vanish")));
            }
            for (nvec, pw) in &layer {
                let mut f = r1.one();
                for (i, &ni) in nvec.iter().enumerate() {
                    if ni > 0 {
                        f = r1.mul(&f, &self.divided_power(i, ni)?)?;
                    }
                }
                for k in 0..rank {
                    for j in 0..rank {
                        if !pw[k][j].is_zero() {
                            e[k][j] = r1.add(&e[k][j], &r1.mul_base(&f, &pw[k][j])?);
                        }
                    }
                }
            }
            let mut next: Vec<(Vec<usize>, Vec<Vec<BaseElt>>)> = Vec::new();
            for (nvec, pw) in &layer {
                let last = nvec.iter().rposition(|&x| x > 0).unwrap_or(0);
                for i in last..self.d {
                    let np = base_mat_mul(b, pw, &theta[i]);
                    if base_mat_zero(&np) {
                        continue;
                    }
                    let mut nv = nvec.clone();
                    nv[i] += 1;
                    next.push((nv, np));
                }
            }
            layer = next;
            deg += 1;
        }
        Ok(Stratification { rank, e })
    }

    /// Θ_i = Δ(θ_{1;i}(E)).
    pub fn higgs_from_strat(&self, s: &Stratification) -> QResult<Vec<Mat<EElt>>> {
        let r1 = self.d1.as_ref();
        (0..self.d)
            .map(|i| mat_map::<Env, Env>(&s.e, &|x| self.diag(&self.ders1[i].apply(r1, x)?)))
            .collect()
    }

    /// Base-valued form of a Higgs field, when every entry is a scalar.
    pub fn scalar_theta(&self, th: &[Mat<EElt>]) -> QResult<Vec<Vec<Vec<BaseElt>>>> {
        let r0 = self.d0.as_ref();
        th.iter()
            .map(|m| {
                m.iter()
                    .map(|row| {
                        row.iter()
                            .map(|x| {
                                if r0.is_scalar(x) {
                                    let c = r0.coeff_of(x, &EMono::one());
                                    Ok(self.base.e_truncate(&self.base.adopt(&c), self.base.n()))
                                } else {
                                    Err(QError::PreconditionViolated(format!("non-constant Higgs entry {}", r0.render(x))))
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// ε(1 ⊗ x) = Σ_j p_1(x_j) E[:, j].
    pub fn apply_strat(&self, s: &Stratification, x: &[EElt]) -> QResult<Vec<EElt>> {
        let r1 = self.d1.as_ref();
        let mut out = vec![r1.zero(); s.rank];
        for (j, xj) in x.iter().enumerate() {
            if r1.is_zero(xj) {
                continue;
            }
            let px = self.p1(xj)?;
            for k in 0..s.rank {
                out[k] = r1.add(&out[k], &r1.mul(&px, &s.e[k][j])?);
            }
        }
        Ok(out)
    }

    pub fn augmentation_check(&self, s: &Stratification) -> QResult<Report> {
        let mut r = Report::new("augmentation", "strat-augmentation");
        let de = mat_map::<Env, Env>(&s.e, &|x| self.diag(x))?;
        r.check(mat_equal(self.d0.as_ref(), &de, &mat_identity(self.d0.as_ref(), s.rank)), || {
            format!("Δ*(ε) = {}", mat_render(self.d0.as_ref(), &de))
        });
        Ok(r)
    }

    pub fn cocycle_check(&self, s: &Stratification) -> QResult<Report> {
        let mut r = Report::new("cocycle", "strat-cocycle");
        let r2 = self.d2.as_ref();
        let e01 = mat_map::<Env, Env>(&s.e, &|x| self.face(0, 1, x))?;
        let e12 = mat_map::<Env, Env>(&s.e, &|x| self.face(1, 2, x))?;
        let e02 = mat_map::<Env, Env>(&s.e, &|x| self.face(0, 2, x))?;
        let prod = mat_mul(r2, &e01, &e12)?;
        r.check(mat_equal(r2, &prod, &e02), || format!("p01*ε · p12*ε ≠ p02*ε: {}", mat_render(r2, &prod)));
        let r1 = self.d1.as_ref();
        let sw = mat_map::<Env, Env>(&s.e, &|x| self.swap(x))?;
        let inv = mat_mul(r1, &s.e, &sw)?;
        r.check(mat_equal(r1, &inv, &mat_identity(r1, s.rank)), || "ε · ι*ε ≠ 1".to_string());
        Ok(r)
    }

    /// ε(1 ⊗ γ_{M,i} x) = γ_{1;i}(ε(1 ⊗ x)) on basis vectors and samples.
    pub fn gamma_check(&self, m: &QHiggsModule<Env>, s: &Stratification, samples: &[Vec<EElt>]) -> QResult<Report> {
        let mut r = Report::new("gamma-compatibility", "strat-gamma");
        let r1 = self.d1.as_ref();
        let mut xs: Vec<Vec<EElt>> = (0..m.rank).map(|j| m.basis_vec(j)).collect();
        xs.extend(samples.iter().cloned());
        for x in &xs {
            for i in 0..self.d {
                let lhs = self.apply_strat(s, &m.gamma_m(i, x)?)?;
                let ex = self.apply_strat(s, x)?;
                let rhs: Vec<EElt> = ex.iter().map(|y| self.ders1[i].gamma(r1, y)).collect::<QResult<_>>()?;
                r.check(lhs.iter().zip(&rhs).all(|(a, b)| r1.equal(a, b)), || format!("γ-compatibility fails in direction {i}"));
            }
        }
        Ok(r)
    }

    /// Δ(θ_{1;i}(φ(E))) = [p]_q t_i^{p−1} φ(Θ_i).
    pub fn frobenius_check(&self, s: &Stratification, theta: &[Vec<Vec<BaseElt>>]) -> QResult<Report> {
        let mut r = Report::new("strat-frobenius", "strat-frobenius");
        let (r0, r1) = (self.d0.as_ref(), self.d1.as_ref());
        let pe = mat_map::<Env, Env>(&s.e, &|x| r1.phi(x))?;
        for i in 0..self.d {
            let lhs = mat_map::<Env, Env>(&pe, &|x| self.diag(&self.ders1[i].apply(r1, x)?))?;
            let c = r0.mul_base(&r0.pow(&r0.t(i)?, r0.p() - 1)?, &self.base.xi())?;
            let rhs: Mat<EElt> = theta[i]
                .iter()
                .map(|row| row.iter().map(|x| r0.mul(&c, &r0.from_base(&self.base.e_phi(x)))).collect::<QResult<Vec<_>>>())
                .collect::<QResult<_>>()?;
            r.check(mat_equal(r0, &lhs, &rhs), || format!("Frobenius twist fails in direction {i}: {}", mat_render(r0, &lhs)));
        }
        Ok(r)
    }

    /// The Higgs field of E ⊗ E' equals the tensor-product connection.
    pub fn tensor_check(
        &self,
        s: &Stratification,
        s2: &Stratification,
        theta: &[Vec<Vec<BaseElt>>],
        theta2: &[Vec<Vec<BaseElt>>],
    ) -> QResult<Report> {
        let mut r = Report::new("strat-tensor", "strat-tensor");
        let r1 = self.d1.as_ref();
        let st = Stratification { rank: s.rank * s2.rank, e: kron(r1, &s.e, &s2.e)? };
        let th = self.higgs_from_strat(&st)?;
        let t = tensor(&self.module(theta)?, &self.module(theta2)?)?;
        for i in 0..self.d {
            r.check(mat_equal(self.d0.as_ref(), &th[i], &t.theta[i]), || format!("tensor Higgs field differs in direction {i}"));
        }
        r.absorb(self.augmentation_check(&st)?);
        Ok(r)
    }

    /// Higgs → strat → Higgs, and strat → Higgs → strat on the conjugate P^{-1} E P.
    pub fn roundtrip_check(&self, theta: &[Vec<Vec<BaseElt>>], pmat: &[Vec<BaseElt>]) -> QResult<Report> {
        let mut r = Report::new("roundtrip", "strat-roundtrip");
        let r1 = self.d1.as_ref();
        let s = self.strat_from_higgs(theta)?;
        let back = self.higgs_from_strat(&s)?;
        let lifted = lift_matrices(self.d0.as_ref(), theta);
        for i in 0..self.d {
            r.check(mat_equal(self.d0.as_ref(), &back[i], &lifted[i]), || format!("Higgs field not recovered in direction {i}"));
        }
        let pm = self.lift1(pmat);
        let pinv = invert_base_matrix(&self.base, pmat)?;
        let pi = self.lift1(&pinv);
        let e0 = Stratification { rank: s.rank, e: mat_mul(r1, &mat_mul(r1, &pi, &s.e)?, &pm)? };
        r.absorb(self.augmentation_check(&e0)?);
        r.absorb(self.cocycle_check(&e0)?);
        let th0 = self.scalar_theta(&self.higgs_from_strat(&e0)?)?;
        let s0 = self.strat_from_higgs(&th0)?;
        r.check(mat_equal(r1, &s0.e, &e0.e), || "stratification not recovered from its Higgs field".to_string());
        Ok(r)
    }

    /// ker(x ↦ ε(1⊗x) − p_0(x)) against ker θ_M on M of weight ≤ w, as subgroups with invariant factors.
    pub fn ca_h0_check(&self, m: &QHiggsModule<Env>, s: &Stratification, w: u32) -> QResult<Report> {
        let mut r = Report::new("ca-h0", "strat-ca-h0");
        let (r0, r1) = (self.d0.as_ref(), self.d1.as_ref());
        let n = self.base.n();
        let dim = self.base.dim(n);
        let keys = r0.basis_upto(w);
        let mus: Vec<BaseElt> = (0..dim).map(|k| self.base.mu_pow(k)).collect();
        let mut src = Vec::new();
        let mut cols_a: Vec<Vec<(usize, i64)>> = Vec::new();
        let mut cols_b: Vec<Vec<(usize, i64)>> = Vec::new();
        let mut ia: HashMap<(EMono, usize, usize), usize> = HashMap::new();
        let mut ib: HashMap<(usize, EMono, usize, usize), usize> = HashMap::new();
        let mut ta = Vec::new();
        let mut tb = Vec::new();
        let base = &self.base;
        for key in &keys {
            for j in 0..m.rank {
                let mut x = m.zero_vec();
                x[j] = r0.mono(*key);
                let mut a = self.apply_strat(s, &x)?;
                a[j] = r1.sub(&a[j], &self.p0(&x[j])?);
                let b: Vec<Vec<EElt>> = (0..self.d).map(|i| m.theta_m(i, &x)).collect::<QResult<_>>()?;
                for k in 0..dim {
                    src.push(base.exponent(n, k));
                    let mut ca = Vec::new();
                    for (jj, y) in a.iter().enumerate() {
                        for (mono, c) in &y.terms {
                            let c = base.e_mul(&base.adopt(c), &mus[k]);
                            for (k2, &cv) in c.c.iter().enumerate() {
                                if cv != 0 && k2 < dim {
                                    let len = ia.len();
                                    let row = *ia.entry((*mono, k2, jj)).or_insert_with(|| {
                                        ta.push(base.exponent(n, k2));
                                        len
                                    });
                                    ca.push((row, cv));
                                }
                            }
                        }
                    }
                    let mut cb = Vec::new();
                    for (i, v) in b.iter().enumerate() {
                        for (jj, y) in v.iter().enumerate() {
                            for (mono, c) in &y.terms {
                                let c = base.e_mul(&base.adopt(c), &mus[k]);
                                for (k2, &cv) in c.c.iter().enumerate() {
                                    if cv != 0 && k2 < dim {
                                        let len = ib.len();
                                        let row = *ib.entry((i, *mono, k2, jj)).or_insert_with(|| {
                                            tb.push(base.exponent(n, k2));
                                            len
                                        });
                                        cb.push((row, cv));
                                    }
                                }
                            }
                        }
                    }
                    cols_a.push(ca);
                    cols_b.push(cb);
                }
            }
        }
        let dense = |cols: &[Vec<(usize, i64)>], rows: usize| -> Vec<Vec<i64>> {
            let mut mat = vec![vec![0i64; cols.len()]; rows.max(1)];
            for (c, col) in cols.iter().enumerate() {
                for &(row, v) in col {
                    mat[row][c] += v;
                }
            }
            mat
        };
        if ta.is_empty() {
            ta.push(1);
        }
        if tb.is_empty() {
            tb.push(1);
        }
        let ma = dense(&cols_a, ta.len());
        let mb = dense(&cols_b, tb.len());
        let p = base.p();
        let (ga, fa) = kernel_of(p, &src, &ta, &ma, 0)?;
        let (gb, fb) = kernel_of(p, &src, &tb, &mb, 0)?;
        for g in &ga {
            r.check(maps_to_zero(p, &tb, &mb, g), || "horizontal-for-ε element with θ_M ≠ 0".to_string());
        }
        for g in &gb {
            r.check(maps_to_zero(p, &ta, &ma, g), || "θ_M-horizontal element not fixed by ε".to_string());
        }
        r.check(fa == fb, || format!("invariant factors differ: {fa:?} vs {fb:?}"));
        r.note(format!("H0 factors {fa:?}"));
        Ok(r)
    }
}

/// Inverse of a base matrix by Gauss–Jordan with unit pivots.
pub fn invert_base_matrix(b: &BaseRing, m: &[Vec<BaseElt>]) -> QResult<Vec<Vec<BaseElt>>> {
    let n = m.len();
    let lvl = m.iter().flatten().map(|e| e.level).min().unwrap_or(b.n());
    let mut a: Vec<Vec<BaseElt>> = m.to_vec();
    let mut inv: Vec<Vec<BaseElt>> =
        (0..n).map(|i| (0..n).map(|j| b.from_int_at(if i == j { 1 } else { 0 }, lvl)).collect()).collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| b.is_unit(&a[r][col])).ok_or_else(|| QError::NotInvertible("matrix has no unit pivot".into()))?;
        a.swap(col, piv);
        inv.swap(col, piv);
        let u = b.invert(&a[col][col])?;
        a[col] = a[col].iter().map(|x| b.e_mul(x, &u)).collect();
        inv[col] = inv[col].iter().map(|x| b.e_mul(x, &u)).collect();
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    a[r][j] = b.e_sub(&a[r][j], &b.e_mul(&f, &a[col][j]));
                    inv[r][j] = b.e_sub(&inv[r][j], &b.e_mul(&f, &inv[col][j]));
                }
            }
        }
    }
    Ok(inv)
}

/// Weight cap sufficient for products and Frobenius twists of a stratification built from Θ of
/// nilpotence order ≤ `order`.
pub fn strat_weight_cap(p: u32, order: u32) -> u32 {
    (2 * order).max(p * order).max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qhiggs::random_commuting;
    use crate::sample::rng;

    fn setup(p: u32, n: u32, d: usize, w: u32) -> CosimplicialEnvelope {
        let b = BaseRing::q(p, n).unwrap();
        let cs: Vec<BaseElt> = (0..d).map(|i| b.from_int(i as i64 + 1)).collect();
        CosimplicialEnvelope::new(&b, &cs, w).unwrap()
    }

    #[test]
    fn divided_powers_kernel() {
        let c = setup(2, 1, 1, 4);
        for k in 1..4 {
            let f = c.divided_power(0, k).unwrap();
            let g = c.ders1[0].apply(c.d1.as_ref(), &f).unwrap();
            assert!(c.d1.equal(&g, &c.divided_power(0, k - 1).unwrap()));
            assert!(c.d0.is_zero(&c.diag(&f).unwrap()));
        }
    }

    #[test]
    fn strat_checks() {
        for (p, rank, d, seed) in [(2u32, 2usize, 1usize, 1u64), (3, 3, 2, 2), (2, 3, 2, 3)] {
            let w = strat_weight_cap(p, 2);
            let c = setup(p, 1, d, w);
            let mut r = rng(seed);
            let th = random_commuting(&mut r, &c.base, 1, rank, d, true);
            let s = c.strat_from_higgs(&th).unwrap();
            let m = c.module(&th).unwrap();
            for rep in [
                c.augmentation_check(&s).unwrap(),
                c.cocycle_check(&s).unwrap(),
                c.gamma_check(&m, &s, &[]).unwrap(),
                c.frobenius_check(&s, &th).unwrap(),
                c.tensor_check(&s, &s, &th, &th).unwrap(),
                c.ca_h0_check(&m, &s, 1).unwrap(),
            ] {
                assert!(rep.passed, "p={p} {}: {:?}", rep.name, rep.witness);
            }
            let b = &c.base;
            let pm: Vec<Vec<BaseElt>> = (0..rank)
                .map(|i| (0..rank).map(|j| b.from_int(if i == j { 1 } else if i > j { 1 } else { 0 })).collect())
                .collect();
            let rt = c.roundtrip_check(&th, &pm).unwrap();
            assert!(rt.passed, "{:?}", rt.witness);
        }
    }

    #[test]
    fn broken_cocycle_detected() {
        let c = setup(3, 1, 1, 6);
        let b = &c.base;
        let th = vec![vec![vec![b.from_int(0), b.from_int(1)], vec![b.from_int(0), b.from_int(0)]]];
        let mut s = c.strat_from_higgs(&th).unwrap();
        let r1 = c.d1.as_ref();
        let extra = r1.mul(&c.divided_power(0, 1).unwrap(), &c.divided_power(0, 1).unwrap()).unwrap();
        s.e[0][1] = r1.add(&s.e[0][1], &extra);
        assert!(!c.cocycle_check(&s).unwrap().passed);
    }

    #[test]
    fn not_nilpotent_rejected() {
        let c = setup(2, 1, 1, 4);
        let th = vec![vec![vec![c.base.from_int(1)]]];
        assert!(matches!(c.strat_from_higgs(&th), Err(QError::NotQuasiNilpotent(_)) | Err(QError::WeightCapTooSmall(_))));
    }
}
