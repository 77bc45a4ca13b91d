//! q-Higgs modules over envelopes and framed charts, their complexes and chain maps.
//!
//! Matrices act on column vectors: θ_{M,i}(e_j) = Σ_k Θ_i[k][j] e_k, extended by
//! θ_M(a x) = γ_i(a) θ_M(x) + θ_i(a) x. Forms are stored with left coefficients on ω_I.

use crate::base_prism::{BaseElt, BaseRing};
use crate::delta_poly::{DeltaPolyRing, PMono, PVar};
use crate::envelope::{EMono, EnvRing};
use crate::error::{QError, QResult};
use crate::homalg::{subsets_of, ChainComplex};
use crate::report::Report;
use crate::ring::Ring;
use crate::twisted::{chart_derivation, frobenius_relation_check, qhiggs_derivation, DerivationHost, DerivationSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

/// Host rings of q-Higgs modules: framed charts and envelopes with a weight-filtered basis.
pub trait QHost: DerivationHost + Sized {
    type Key: Ord + Clone + Debug + Hash + Send + Sync;
    fn ndirs(&self) -> usize;
    /// θ_i with α_i = t_iμ.
    fn direction(&self, i: usize) -> QResult<DerivationSpec<Self>>;
    fn t_coord(&self, i: usize) -> QResult<Self::Elem>;
    fn basis_upto(&self, w: u32) -> Vec<Self::Key>;
    fn key_elem(&self, k: &Self::Key) -> Self::Elem;
    fn key_weight(&self, k: &Self::Key) -> u32;
    fn coords(&self, x: &Self::Elem) -> Vec<(Self::Key, BaseElt)>;
    fn render_key(&self, k: &Self::Key) -> String;
}

impl QHost for EnvRing<BaseRing> {
    type Key = EMono;
    fn ndirs(&self) -> usize {
        self.d
    }
    fn direction(&self, i: usize) -> QResult<DerivationSpec<Self>> {
        qhiggs_derivation(self, i)
    }
    fn t_coord(&self, i: usize) -> QResult<Self::Elem> {
        self.t(i)
    }
    fn basis_upto(&self, w: u32) -> Vec<EMono> {
        EnvRing::basis_upto(self, w)
    }
    fn key_elem(&self, k: &EMono) -> Self::Elem {
        self.mono(*k)
    }
    fn key_weight(&self, k: &EMono) -> u32 {
        self.weight(k)
    }
    fn coords(&self, x: &Self::Elem) -> Vec<(EMono, BaseElt)> {
        x.terms.iter().map(|(m, c)| (*m, c.clone())).collect()
    }
    fn render_key(&self, k: &EMono) -> String {
        self.render_mono(k)
    }
}

impl QHost for DeltaPolyRing<BaseRing> {
    type Key = PMono;
    fn ndirs(&self) -> usize {
        self.nconst
    }
    fn direction(&self, i: usize) -> QResult<DerivationSpec<Self>> {
        chart_derivation(self, i)
    }
    fn t_coord(&self, i: usize) -> QResult<Self::Elem> {
        self.t(i)
    }
    fn basis_upto(&self, w: u32) -> Vec<PMono> {
        let mut out = vec![Vec::new()];
        for j in 0..self.nconst {
            let mut next = Vec::new();
            for m in &out {
                let used: u32 = m.iter().map(|(_, e): &(PVar, u32)| *e).sum();
                for e in 0..=(w - used) {
                    let mut m2 = m.clone();
                    if e > 0 {
                        m2.push((PVar::T(j as u16), e));
                    }
                    next.push(m2);
                }
            }
            out = next;
        }
        let mut out: Vec<PMono> = out.into_iter().map(PMono).collect();
        out.sort();
        out
    }
    fn key_elem(&self, k: &PMono) -> Self::Elem {
        self.monomial(k.clone(), &self.coeff.from_int(1)).expect("chart monomial")
    }
    fn key_weight(&self, k: &PMono) -> u32 {
        k.degree()
    }
    fn coords(&self, x: &Self::Elem) -> Vec<(PMono, BaseElt)> {
        x.terms.iter().map(|(m, c)| (m.clone(), c.clone())).collect()
    }
    fn render_key(&self, k: &PMono) -> String {
        k.render()
    }
}

pub type Mat<E> = Vec<Vec<E>>;
pub type Form<E> = BTreeMap<Vec<usize>, Vec<E>>;

/// A free module of rank r with commuting twisted connection matrices Θ_i.
pub struct QHiggsModule<H: QHost> {
    pub host: Arc<H>,
    pub ders: Arc<Vec<DerivationSpec<H>>>,
    pub rank: usize,
    pub theta: Vec<Mat<H::Elem>>,
}

impl<H: QHost> Clone for QHiggsModule<H> {
    fn clone(&self) -> Self {
        QHiggsModule { host: self.host.clone(), ders: self.ders.clone(), rank: self.rank, theta: self.theta.clone() }
    }
}

pub fn host_directions<H: QHost>(host: &H) -> QResult<Arc<Vec<DerivationSpec<H>>>> {
    Ok(Arc::new((0..host.ndirs()).map(|i| host.direction(i)).collect::<QResult<Vec<_>>>()?))
}

impl<H: QHost> QHiggsModule<H> {
    pub fn with_ders(host: Arc<H>, ders: Arc<Vec<DerivationSpec<H>>>, theta: Vec<Mat<H::Elem>>) -> QResult<Self> {
        let rank = theta.first().map(|m| m.len()).unwrap_or(0);
        if theta.len() != ders.len() {
            return Err(QError::PreconditionViolated(format!("{} matrices for {} directions", theta.len(), ders.len())));
        }
        if theta.iter().any(|m| m.len() != rank || m.iter().any(|r| r.len() != rank)) {
            return Err(QError::PreconditionViolated("connection matrices are not square of equal size".into()));
        }
        Ok(QHiggsModule { host, ders, rank, theta })
    }

    pub fn new(host: Arc<H>, theta: Vec<Mat<H::Elem>>) -> QResult<Self> {
        let ders = host_directions(host.as_ref())?;
        Self::with_ders(host, ders, theta)
    }

    pub fn trivial(host: Arc<H>, ders: Arc<Vec<DerivationSpec<H>>>, rank: usize) -> QResult<Self> {
        let z = (0..ders.len()).map(|_| vec![vec![host.zero(); rank]; rank]).collect();
        let mut m = Self::with_ders(host, ders, z)?;
        m.rank = rank;
        Ok(m)
    }

    pub fn ndirs(&self) -> usize {
        self.ders.len()
    }

    pub fn zero_vec(&self) -> Vec<H::Elem> {
        vec![self.host.zero(); self.rank]
    }

    pub fn basis_vec(&self, j: usize) -> Vec<H::Elem> {
        let mut v = self.zero_vec();
        v[j] = self.host.one();
        v
    }

    pub fn vadd(&self, a: &[H::Elem], b: &[H::Elem]) -> Vec<H::Elem> {
        a.iter().zip(b).map(|(x, y)| self.host.add(x, y)).collect()
    }

    pub fn vsub(&self, a: &[H::Elem], b: &[H::Elem]) -> Vec<H::Elem> {
        a.iter().zip(b).map(|(x, y)| self.host.sub(x, y)).collect()
    }

    pub fn vmul(&self, c: &H::Elem, a: &[H::Elem]) -> QResult<Vec<H::Elem>> {
        a.iter().map(|x| self.host.mul(c, x)).collect()
    }

    pub fn vis_zero(&self, a: &[H::Elem]) -> bool {
        a.iter().all(|x| self.host.is_zero(x))
    }

    pub fn vrender(&self, a: &[H::Elem]) -> String {
        format!("[{}]", a.iter().map(|x| self.host.render(x)).collect::<Vec<_>>().join(", "))
    }

    /// θ_{M,i}(v) = Σ_j γ_i(v_j) Θ_i e_j + θ_i(v_j) e_j.
    pub fn theta_m(&self, i: usize, v: &[H::Elem]) -> QResult<Vec<H::Elem>> {
        let h = self.host.as_ref();
        let d = &self.ders[i];
        let mut out = self.zero_vec();
        for (j, x) in v.iter().enumerate() {
            if h.is_zero(x) {
                continue;
            }
            let g = d.gamma(h, x)?;
            for k in 0..self.rank {
                if !h.is_zero(&self.theta[i][k][j]) {
                    out[k] = h.add(&out[k], &h.mul(&g, &self.theta[i][k][j])?);
                }
            }
            out[j] = h.add(&out[j], &d.apply(h, x)?);
        }
        Ok(out)
    }

    /// γ_{M,i} = id + α_i θ_{M,i}.
    pub fn gamma_m(&self, i: usize, v: &[H::Elem]) -> QResult<Vec<H::Elem>> {
        let t = self.theta_m(i, v)?;
        Ok(self.vadd(v, &self.vmul(&self.ders[i].alpha, &t)?))
    }

    pub fn theta_set(&self, s: &[usize], v: &[H::Elem]) -> QResult<Vec<H::Elem>> {
        let mut x = v.to_vec();
        for &i in s.iter().rev() {
            x = self.theta_m(i, &x)?;
        }
        Ok(x)
    }

    pub fn gamma_set(&self, s: &[usize], v: &[H::Elem]) -> QResult<Vec<H::Elem>> {
        let mut x = v.to_vec();
        for &i in s.iter().rev() {
            x = self.gamma_m(i, &x)?;
        }
        Ok(x)
    }

    /// θ_{M,i}θ_{M,j} = θ_{M,j}θ_{M,i} on basis vectors.
    pub fn check_integrability(&self) -> QResult<Report> {
        let mut r = Report::new("integrability", "integrable-connection");
        for i in 0..self.ndirs() {
            for j in i + 1..self.ndirs() {
                for k in 0..self.rank {
                    let e = self.basis_vec(k);
                    let a = self.theta_m(i, &self.theta_m(j, &e)?)?;
                    let b = self.theta_m(j, &self.theta_m(i, &e)?)?;
                    r.check(self.vis_zero(&self.vsub(&a, &b)), || format!("θ{i}θ{j} ≠ θ{j}θ{i} on e{k}"));
                }
            }
        }
        Ok(r)
    }

    /// Smallest N with θ_{M,i}^N(e_j) = 0 for all i, j, up to `nmax`.
    pub fn check_quasi_nilpotent(&self, nmax: usize) -> QResult<Report> {
        let mut r = Report::new("quasi-nilpotence", "quasi-nilpotent");
        let mut worst = 1;
        for i in 0..self.ndirs() {
            for j in 0..self.rank {
                let mut x = self.basis_vec(j);
                let mut n = 0;
                while !self.vis_zero(&x) && n <= nmax {
                    x = self.theta_m(i, &x)?;
                    n += 1;
                }
                r.check(self.vis_zero(&x), || format!("θ{i}^{nmax}(e{j}) ≠ 0"));
                worst = worst.max(n);
            }
        }
        r.note(format!("N = {worst}"));
        Ok(r)
    }

    pub fn theta_json(&self) -> serde_json::Value {
        let h = self.host.as_ref();
        let mats: Vec<serde_json::Value> = self
            .theta
            .iter()
            .map(|m| serde_json::json!(m.iter().map(|r| r.iter().map(|x| h.render(x)).collect::<Vec<_>>()).collect::<Vec<_>>()))
            .collect();
        serde_json::json!({"order": (0..self.ndirs()).collect::<Vec<_>>(), "rank": self.rank, "theta": mats})
    }

    pub fn same_theta(&self, o: &QHiggsModule<H>) -> bool {
        self.rank == o.rank
            && self.theta.len() == o.theta.len()
            && self.theta.iter().zip(&o.theta).all(|(a, b)| {
                a.iter().zip(b).all(|(ra, rb)| ra.iter().zip(rb).all(|(x, y)| self.host.equal(x, y)))
            })
    }
}

/// ω_i ∧ ω_I as (sign, I ∪ {i}), or None if i ∈ I.
pub fn wedge_one(i: usize, set: &[usize]) -> Option<(i64, Vec<usize>)> {
    if set.contains(&i) {
        return None;
    }
    let before = set.iter().filter(|&&j| j < i).count();
    let mut out = set.to_vec();
    out.push(i);
    out.sort_unstable();
    Some((if before % 2 == 0 { 1 } else { -1 }, out))
}

/// ω_I ∧ ω_J as (sign, I ∪ J), or None when they meet.
pub fn wedge(a: &[usize], b: &[usize]) -> Option<(i64, Vec<usize>)> {
    let mut sign = 1;
    let mut cur = a.to_vec();
    for &j in b {
        if cur.contains(&j) {
            return None;
        }
        let after = cur.iter().filter(|&&i| i > j).count();
        if after % 2 == 1 {
            sign = -sign;
        }
        cur.push(j);
        cur.sort_unstable();
    }
    Some((sign, cur))
}

pub fn form_add<H: QHost>(m: &QHiggsModule<H>, acc: &mut Form<H::Elem>, set: Vec<usize>, v: &[H::Elem], sign: i64) {
    let v: Vec<H::Elem> = v.iter().map(|x| m.host.scale(x, sign)).collect();
    match acc.get_mut(&set) {
        Some(a) => *a = m.vadd(a, &v),
        None => {
            acc.insert(set, v);
        }
    }
}

pub fn form_is_zero<H: QHost>(m: &QHiggsModule<H>, x: &Form<H::Elem>) -> bool {
    x.values().all(|v| m.vis_zero(v))
}

pub fn form_equal<H: QHost>(m: &QHiggsModule<H>, x: &Form<H::Elem>, y: &Form<H::Elem>) -> bool {
    let mut diff = x.clone();
    for (s, v) in y {
        form_add(m, &mut diff, s.clone(), v, -1);
    }
    form_is_zero(m, &diff)
}

pub fn form_render<H: QHost>(m: &QHiggsModule<H>, x: &Form<H::Elem>) -> String {
    x.iter().map(|(s, v)| format!("{}·w{:?}", m.vrender(v), s)).collect::<Vec<_>>().join(" + ")
}

/// d(v ω_I) = Σ_i θ_{M,i}(v) ω_i ∧ ω_I.
pub fn d_form<H: QHost>(m: &QHiggsModule<H>, x: &Form<H::Elem>) -> QResult<Form<H::Elem>> {
    let mut out = Form::new();
    for (set, v) in x {
        if m.vis_zero(v) {
            continue;
        }
        for i in 0..m.ndirs() {
            if let Some((sign, ns)) = wedge_one(i, set) {
                let t = m.theta_m(i, v)?;
                form_add(m, &mut out, ns, &t, sign);
            }
        }
    }
    Ok(out)
}

/// Generator (basis key, module index, form index set).
pub type FormGen<K> = (K, usize, Vec<usize>);

pub fn form_generators<H: QHost>(m: &QHiggsModule<H>, w: u32) -> Vec<(usize, FormGen<H::Key>)> {
    let keys = m.host.basis_upto(w);
    let mut out = Vec::new();
    for q in 0..=m.ndirs() {
        for s in subsets_of(m.ndirs(), q) {
            for k in &keys {
                for j in 0..m.rank {
                    out.push((q, (k.clone(), j, s.clone())));
                }
            }
        }
    }
    out
}

pub fn gen_form<H: QHost>(m: &QHiggsModule<H>, g: &FormGen<H::Key>) -> Form<H::Elem> {
    let mut v = m.zero_vec();
    v[g.1] = m.host.key_elem(&g.0);
    let mut f = Form::new();
    f.insert(g.2.clone(), v);
    f
}

/// d∘d = 0 on every generator of basis weight ≤ w.
pub fn d_squared_check<H: QHost>(m: &QHiggsModule<H>, w: u32) -> QResult<Report> {
    let mut r = Report::new("d-squared", "twisted-de-rham-complex");
    for (_, g) in form_generators(m, w) {
        let x = gen_form(m, &g);
        let dd = d_form(m, &d_form(m, &x)?)?;
        r.check(form_is_zero(m, &dd), || format!("d²({} e{} w{:?}) ≠ 0", m.host.render_key(&g.0), g.1, g.2));
    }
    Ok(r)
}

/// The complex on generators μ^k·key·e_j·ω_I with weight(key) + shift·|I| ≤ w as a complex of finite groups.
pub fn build_complex<H: QHost>(m: &QHiggsModule<H>, w: u32, shift: u32) -> QResult<ChainComplex> {
    let h = m.host.as_ref();
    let base = h.base().clone();
    let n = h.prec();
    let dim = base.dim(n);
    let keys = h.basis_upto(w);
    let d = m.ndirs();
    type Gen<K> = (K, usize, usize, Vec<usize>);
    let mut gens: Vec<Vec<Gen<H::Key>>> = vec![Vec::new(); d + 1];
    for q in 0..=d {
        for s in subsets_of(d, q) {
            for key in &keys {
                if h.key_weight(key) + shift * q as u32 > w {
                    continue;
                }
                for j in 0..m.rank {
                    for k in 0..dim {
                        gens[q].push((key.clone(), k, j, s.clone()));
                    }
                }
            }
        }
    }
    let index: Vec<HashMap<Gen<H::Key>, usize>> =
        gens.iter().map(|g| g.iter().cloned().enumerate().map(|(a, b)| (b, a)).collect()).collect();
    let mus: Vec<BaseElt> = (0..dim).map(|k| base.mu_pow(k)).collect();
    let mut diffs = Vec::new();
    for q in 0..d {
        let mut mat = vec![vec![0i64; gens[q].len()]; gens[q + 1].len()];
        let mut done: HashMap<(H::Key, usize, Vec<usize>), Form<H::Elem>> = HashMap::new();
        for (col, (key, k, j, s)) in gens[q].iter().enumerate() {
            let ck = (key.clone(), *j, s.clone());
            let img = match done.get(&ck) {
                Some(x) => x.clone(),
                None => {
                    let x = d_form(m, &gen_form(m, &ck))?;
                    done.insert(ck, x.clone());
                    x
                }
            };
            for (ns, v) in &img {
                for (jj, elem) in v.iter().enumerate() {
                    if h.level(elem) < n && !h.is_zero(elem) {
                        return Err(QError::PrecisionExhausted(format!("differential lost precision at {}", h.render(elem))));
                    }
                    for (key2, c) in h.coords(elem) {
                        let c = base.e_mul(&c, &mus[*k]);
                        if c.is_zero() {
                            continue;
                        }
                        if h.key_weight(&key2) + shift * ns.len() as u32 > w {
                            return Err(QError::WeightCapTooSmall(format!(
                                "d({} e{j} w{:?}) has term {} of weight above {w}",
                                h.render_key(key),
                                s,
                                h.render_key(&key2)
                            )));
                        }
                        for (k2, &cv) in c.c.iter().enumerate() {
                            if cv != 0 {
                                let row = index[q + 1][&(key2.clone(), k2, jj, ns.clone())];
                                mat[row][col] += cv;
                            }
                        }
                    }
                }
            }
        }
        diffs.push(mat);
    }
    let exps = gens.iter().map(|g| g.iter().map(|(_, k, _, _)| base.exponent(n, *k)).collect()).collect();
    let mut c = ChainComplex::new(base.p(), exps, diffs)?;
    c.labels = Some(
        gens.iter()
            .map(|g| g.iter().map(|(key, k, j, s)| format!("mu^{k} {} e{j} w{:?}", h.render_key(key), s)).collect())
            .collect(),
    );
    c.bands = Some(gens.iter().map(|g| g.iter().map(|(key, _, _, s)| h.key_weight(key) + shift * s.len() as u32).collect()).collect());
    Ok(c)
}

/// Checks d'∘F = F∘d on every generator of basis weight ≤ w.
pub fn chain_map_check<H1: QHost, H2: QHost>(
    name: &str,
    m: &QHiggsModule<H1>,
    m2: &QHiggsModule<H2>,
    f: &dyn Fn(&Form<H1::Elem>) -> QResult<Form<H2::Elem>>,
    w: u32,
) -> QResult<Report> {
    let mut r = Report::new(name, "chain-map");
    for (_, g) in form_generators(m, w) {
        let x = gen_form(m, &g);
        let a = d_form(m2, &f(&x)?)?;
        let b = f(&d_form(m, &x)?)?;
        r.check(form_equal(m2, &a, &b), || {
            format!("d∘F ≠ F∘d on {} e{} w{:?}: {} vs {}", m.host.render_key(&g.0), g.1, g.2, form_render(m2, &a), form_render(m2, &b))
        });
    }
    Ok(r)
}

/// Index of e_a ⊗ e_b in the tensor product.
fn tidx(rb: usize, a: usize, b: usize) -> usize {
    a * rb + b
}

pub fn kron_vec<H: QHost>(h: &H, v: &[H::Elem], w: &[H::Elem]) -> QResult<Vec<H::Elem>> {
    let mut out = Vec::with_capacity(v.len() * w.len());
    for a in v {
        for b in w {
            out.push(h.mul(a, b)?);
        }
    }
    Ok(out)
}

/// M ⊗ M' with θ(m⊗m') = θm⊗m' + m⊗θm' + α_i θm⊗θm'.
pub fn tensor<H: QHost>(m: &QHiggsModule<H>, m2: &QHiggsModule<H>) -> QResult<QHiggsModule<H>> {
    if !Arc::ptr_eq(&m.host, &m2.host) || !Arc::ptr_eq(&m.ders, &m2.ders) {
        return Err(QError::HostMismatch("tensor factors live over different hosts".into()));
    }
    let h = m.host.as_ref();
    let (ra, rb) = (m.rank, m2.rank);
    let mut theta = Vec::new();
    for i in 0..m.ndirs() {
        let alpha = &m.ders[i].alpha;
        let mut mat = vec![vec![h.zero(); ra * rb]; ra * rb];
        for a in 0..ra {
            for b in 0..rb {
                let col = tidx(rb, a, b);
                for c in 0..ra {
                    for d in 0..rb {
                        let mut x = h.mul(&m.theta[i][c][a], &m2.theta[i][d][b])?;
                        x = h.mul(alpha, &x)?;
                        if d == b {
                            x = h.add(&x, &m.theta[i][c][a]);
                        }
                        if c == a {
                            x = h.add(&x, &m2.theta[i][d][b]);
                        }
                        mat[tidx(rb, c, d)][col] = x;
                    }
                }
            }
        }
        theta.push(mat);
    }
    QHiggsModule::with_ders(m.host.clone(), m.ders.clone(), theta)
}

/// The tensor formula on arbitrary vectors and the swap braiding.
pub fn tensor_check<H: QHost>(m: &QHiggsModule<H>, m2: &QHiggsModule<H>, samples: &[(Vec<H::Elem>, Vec<H::Elem>)]) -> QResult<Report> {
    let t = tensor(m, m2)?;
    let t21 = tensor(m2, m)?;
    let h = m.host.as_ref();
    let mut r = Report::new("tensor", "tensor-connection");
    for (v, w) in samples {
        for i in 0..m.ndirs() {
            let lhs = t.theta_m(i, &kron_vec(h, v, w)?)?;
            let tv = m.theta_m(i, v)?;
            let tw = m2.theta_m(i, w)?;
            let mut rhs = kron_vec(h, &tv, w)?;
            rhs = t.vadd(&rhs, &kron_vec(h, v, &tw)?);
            rhs = t.vadd(&rhs, &t.vmul(&m.ders[i].alpha, &kron_vec(h, &tv, &tw)?)?);
            r.check(t.vis_zero(&t.vsub(&lhs, &rhs)), || format!("tensor formula fails in direction {i}"));
            let swap = |x: &[H::Elem]| -> Vec<H::Elem> {
                let mut out = vec![h.zero(); x.len()];
                for a in 0..m.rank {
                    for b in 0..m2.rank {
                        out[tidx(m.rank, b, a)] = x[tidx(m2.rank, a, b)].clone();
                    }
                }
                out
            };
            let l2 = t21.theta_m(i, &kron_vec(h, w, v)?)?;
            r.check(t.vis_zero(&t.vsub(&swap(&lhs), &l2)), || format!("swap braiding fails in direction {i}"));
        }
    }
    Ok(r)
}

/// (m ω_I)·(m' ω_I') = (m ⊗ γ_{M',I}(m')) ω_I ∧ ω_I'.
pub fn product<H: QHost>(
    m: &QHiggsModule<H>,
    m2: &QHiggsModule<H>,
    x: &Form<H::Elem>,
    y: &Form<H::Elem>,
) -> QResult<Form<H::Elem>> {
    let h = m.host.as_ref();
    let mut out = Form::new();
    let t = QHiggsModule { host: m.host.clone(), ders: m.ders.clone(), rank: m.rank * m2.rank, theta: Vec::new() };
    for (s, v) in x {
        for (s2, w) in y {
            if let Some((sign, ns)) = wedge(s, s2) {
                let gw = m2.gamma_set(s, w)?;
                form_add(&t, &mut out, ns, &kron_vec(h, v, &gw)?, sign);
            }
        }
    }
    Ok(out)
}

/// d(x·y) = dx·y + (−1)^{deg x} x·dy on generator pairs of basis weight ≤ w.
pub fn product_leibniz_check<H: QHost>(m: &QHiggsModule<H>, m2: &QHiggsModule<H>, w: u32) -> QResult<Report> {
    let t = tensor(m, m2)?;
    let mut r = Report::new("product", "de-rham-product");
    let g1 = form_generators(m, w);
    let g2 = form_generators(m2, w);
    for (q1, a) in &g1 {
        for (_, b) in &g2 {
            let x = gen_form(m, a);
            let y = gen_form(m2, b);
            let lhs = d_form(&t, &product(m, m2, &x, &y)?)?;
            let mut rhs = product(m, m2, &d_form(m, &x)?, &y)?;
            let sign = if q1 % 2 == 0 { 1 } else { -1 };
            for (s, v) in product(m, m2, &x, &d_form(m2, &y)?)? {
                form_add(&t, &mut rhs, s, &v, sign);
            }
            r.check(form_equal(&t, &lhs, &rhs), || {
                format!("Leibniz fails on ({} e{} w{:?})·({} e{} w{:?})", m.host.render_key(&a.0), a.1, a.2, m.host.render_key(&b.0), b.1, b.2)
            });
        }
    }
    Ok(r)
}

pub type RingMap<H1, H2> = Arc<dyn Fn(&<H1 as Ring>::Elem) -> QResult<<H2 as Ring>::Elem> + Send + Sync>;

/// Data (g, ψ, c) of a twisted pullback with g(α_i) = c_i α'_{ψ(i)}.
pub struct PullbackSpec<H1: QHost, H2: QHost> {
    pub name: String,
    pub g: RingMap<H1, H2>,
    pub psi: Vec<usize>,
    pub c: Vec<H2::Elem>,
}

impl<H1: QHost, H2: QHost> Clone for PullbackSpec<H1, H2> {
    fn clone(&self) -> Self {
        PullbackSpec { name: self.name.clone(), g: self.g.clone(), psi: self.psi.clone(), c: self.c.clone() }
    }
}

fn nonempty_subsets(set: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << set.len()) {
        out.push((0..set.len()).filter(|&i| mask >> i & 1 == 1).map(|i| set[i]).collect());
    }
    out
}

impl<H1: QHost, H2: QHost> PullbackSpec<H1, H2> {
    pub fn is_monotone(&self) -> bool {
        self.psi.windows(2).all(|w| w[0] <= w[1])
    }

    fn fiber(&self, i2: usize) -> Vec<usize> {
        (0..self.psi.len()).filter(|&i| self.psi[i] == i2).collect()
    }

    /// Σ_{∅≠S⊂ψ^{-1}(i')} g(f_S) ∏_{i∈S} c_i α'^{|S|−1}, with f_S supplied per subset.
    fn fold_sum(
        &self,
        h2: &H2,
        ders2: &[DerivationSpec<H2>],
        i2: usize,
        f: &mut dyn FnMut(&[usize]) -> QResult<H2::Elem>,
    ) -> QResult<H2::Elem> {
        let mut acc = h2.zero();
        for s in nonempty_subsets(&self.fiber(i2)) {
            let mut t = f(&s)?;
            for &i in &s {
                t = h2.mul(&t, &self.c[i])?;
            }
            t = h2.mul(&t, &h2.pow(&ders2[i2].alpha, s.len() as u32 - 1)?)?;
            acc = h2.add(&acc, &t);
        }
        Ok(acc)
    }

    /// g(α_i) = c_i α'_{ψ(i)}, θ'_{i'}(c_i) = 0 off ψ(i), and the bialgebra condition on generators and samples.
    pub fn validate(
        &self,
        h1: &H1,
        ders1: &[DerivationSpec<H1>],
        h2: &H2,
        ders2: &[DerivationSpec<H2>],
        samples: &[H1::Elem],
    ) -> QResult<Report> {
        let mut r = Report::new(&format!("pullback-spec {}", self.name), "pullback-spec");
        if self.psi.len() != ders1.len() || self.c.len() != ders1.len() || self.psi.iter().any(|&j| j >= ders2.len()) {
            return Err(QError::InvalidPullbackSpec("index map or constants have the wrong size".into()));
        }
        for i in 0..ders1.len() {
            let lhs = (self.g)(&ders1[i].alpha)?;
            let rhs = h2.mul(&self.c[i], &ders2[self.psi[i]].alpha)?;
            r.check(h2.equal(&lhs, &rhs), || format!("g(α{i}) ≠ c{i}·α'{}", self.psi[i]));
            for (i2, d2) in ders2.iter().enumerate() {
                if i2 != self.psi[i] {
                    r.check(h2.is_zero(&d2.apply(h2, &self.c[i])?), || format!("θ'{i2}(c{i}) ≠ 0"));
                }
            }
        }
        let mut xs: Vec<H1::Elem> = (0..h1.ndirs()).map(|i| h1.t_coord(i)).collect::<QResult<_>>()?;
        xs.extend(samples.iter().cloned());
        for x in &xs {
            for i2 in 0..ders2.len() {
                let lhs = ders2[i2].apply(h2, &(self.g)(x)?)?;
                let rhs = self.fold_sum(h2, ders2, i2, &mut |s| {
                    let mut y = x.clone();
                    for &i in s.iter().rev() {
                        y = ders1[i].apply(h1, &y)?;
                    }
                    (self.g)(&y)
                })?;
                r.check(h2.equal(&lhs, &rhs), || format!("θ'{i2}(g({})) mismatch", h1.render(x)));
            }
        }
        Ok(r)
    }

    pub fn require_valid(
        &self,
        h1: &H1,
        ders1: &[DerivationSpec<H1>],
        h2: &H2,
        ders2: &[DerivationSpec<H2>],
        samples: &[H1::Elem],
    ) -> QResult<()> {
        let r = self.validate(h1, ders1, h2, ders2, samples)?;
        if r.passed {
            Ok(())
        } else {
            Err(QError::InvalidPullbackSpec(r.witness.unwrap_or_default()))
        }
    }

    fn gvec(&self, v: &[H1::Elem]) -> QResult<Vec<H2::Elem>> {
        v.iter().map(|x| (self.g)(x)).collect()
    }
}

/// Scalar extension M' = D' ⊗_g M with θ'_{i'}(e_j ⊗ 1) = Σ_S g(θ_{M,S} e_j) ∏c α'^{|S|−1}.
pub fn scalar_extension<H1: QHost, H2: QHost>(
    m: &QHiggsModule<H1>,
    s: &PullbackSpec<H1, H2>,
    host2: Arc<H2>,
    ders2: Arc<Vec<DerivationSpec<H2>>>,
) -> QResult<QHiggsModule<H2>> {
    let h2 = host2.as_ref();
    let mut theta = Vec::new();
    for i2 in 0..ders2.len() {
        let mut mat = vec![vec![h2.zero(); m.rank]; m.rank];
        for j in 0..m.rank {
            for k in 0..m.rank {
                mat[k][j] = s.fold_sum(h2, &ders2, i2, &mut |set| {
                    let v = m.theta_set(set, &m.basis_vec(j))?;
                    (s.g)(&v[k])
                })?;
            }
        }
        theta.push(mat);
    }
    QHiggsModule::with_ders(host2.clone(), ders2, theta)
}

/// m ω_I ↦ g(γ^<_{M,ψ,I}(m)) c_I ω_{ψ(I)}, zero when ψ(I) repeats an index.
pub fn pullback_chain_map<H1: QHost, H2: QHost>(
    m: &QHiggsModule<H1>,
    m2: &QHiggsModule<H2>,
    s: &PullbackSpec<H1, H2>,
    x: &Form<H1::Elem>,
) -> QResult<Form<H2::Elem>> {
    if !s.is_monotone() {
        return Err(QError::OrderViolation(format!("index map {:?} is not order preserving", s.psi)));
    }
    let h2 = m2.host.as_ref();
    let mut out = Form::new();
    for (set, v) in x {
        let img: Vec<usize> = set.iter().map(|&i| s.psi[i]).collect();
        if img.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let mut y = v.clone();
        for &i in set {
            let before: Vec<usize> = (0..i).filter(|&j| s.psi[j] == s.psi[i]).collect();
            y = m.gamma_set(&before, &y)?;
        }
        let mut gy = s.gvec(&y)?;
        for &i in set {
            gy = m2.vmul(&s.c[i], &gy)?;
        }
        let _ = h2;
        form_add(m2, &mut out, img, &gy, 1);
    }
    Ok(out)
}

/// Composite (g'∘g, ψ'∘ψ, c''_i = c'_{ψ(i)} g'(c_i)).
pub fn compose_pullbacks<H1: QHost + 'static, H2: QHost + 'static, H3: QHost + 'static>(
    s: &PullbackSpec<H1, H2>,
    s2: &PullbackSpec<H2, H3>,
    h3: &H3,
) -> QResult<PullbackSpec<H1, H3>> {
    if !s.is_monotone() || !s2.is_monotone() {
        return Err(QError::OrderViolation("composite of non-monotone index maps".into()));
    }
    let g = s.g.clone();
    let g2 = s2.g.clone();
    let comp: RingMap<H1, H3> = Arc::new(move |x| g2(&g(x)?));
    let psi = s.psi.iter().map(|&i| s2.psi[i]).collect();
    let c = (0..s.psi.len()).map(|i| h3.mul(&s2.c[s.psi[i]], &(s2.g)(&s.c[i])?)).collect::<QResult<_>>()?;
    Ok(PullbackSpec { name: format!("{}∘{}", s2.name, s.name), g: comp, psi, c })
}

/// The Frobenius pullback spec (φ, id, [p]_q t_i^{p−1}).
pub fn frobenius_spec<H: QHost + 'static>(host: Arc<H>) -> QResult<PullbackSpec<H, H>> {
    let h = host.as_ref();
    let xi = h.base().xi();
    let c = (0..h.ndirs())
        .map(|i| h.mul_base(&h.pow(&h.t_coord(i)?, h.p() - 1)?, &xi))
        .collect::<QResult<_>>()?;
    let hh = host.clone();
    Ok(PullbackSpec { name: "frobenius".into(), g: Arc::new(move |x| hh.phi(x)), psi: (0..h.ndirs()).collect(), c })
}

/// φ^*M with Θ'_i = [p]_q t_i^{p−1} φ(Θ_i), after checking ∂∘φ = [p]_q t^{p−1} φ∘∂ on the host.
pub fn frobenius_pullback<H: QHost>(m: &QHiggsModule<H>, w: u32) -> QResult<QHiggsModule<H>> {
    let h = m.host.as_ref();
    let samples: Vec<H::Elem> = h.basis_upto(w).iter().map(|k| h.key_elem(k)).collect();
    for d in m.ders.iter() {
        let r = frobenius_relation_check(h, d, &samples)?;
        if !r.passed {
            return Err(QError::FrobeniusRelationFailed(r.witness.unwrap_or_default()));
        }
    }
    let xi = h.base().xi();
    let mut theta = Vec::new();
    for i in 0..m.ndirs() {
        let c = h.mul_base(&h.pow(&h.t_coord(i)?, h.p() - 1)?, &xi)?;
        let mut mat = Vec::new();
        for row in &m.theta[i] {
            mat.push(row.iter().map(|x| h.mul(&c, &h.phi(x)?)).collect::<QResult<Vec<_>>>()?);
        }
        theta.push(mat);
    }
    QHiggsModule::with_ders(m.host.clone(), m.ders.clone(), theta)
}

/// Change of basis f_j = Σ_k P[k][j] e_k for unipotent upper-triangular P:
/// Θ'_i = P^{-1}(Θ_i γ_i(P) + θ_i(P)).
pub fn gauge<H: QHost>(m: &QHiggsModule<H>, pm: &Mat<H::Elem>) -> QResult<QHiggsModule<H>> {
    let h = m.host.as_ref();
    let r = m.rank;
    for k in 0..r {
        for j in 0..=k {
            let want = if j == k { h.one() } else { h.zero() };
            if !h.equal(&pm[k][j], &want) {
                return Err(QError::PreconditionViolated("gauge matrix is not unipotent upper triangular".into()));
            }
        }
    }
    let mul = |a: &Mat<H::Elem>, b: &Mat<H::Elem>| -> QResult<Mat<H::Elem>> {
        let mut out = vec![vec![h.zero(); r]; r];
        for i in 0..r {
            for k in 0..r {
                for j in 0..r {
                    out[i][j] = h.add(&out[i][j], &h.mul(&a[i][k], &b[k][j])?);
                }
            }
        }
        Ok(out)
    };
    let nil: Mat<H::Elem> = (0..r).map(|i| (0..r).map(|j| if i == j { h.zero() } else { h.neg(&pm[i][j]) }).collect()).collect();
    let mut inv: Mat<H::Elem> = (0..r).map(|i| (0..r).map(|j| if i == j { h.one() } else { h.zero() }).collect()).collect();
    let mut pw = inv.clone();
    for _ in 1..r {
        pw = mul(&pw, &nil)?;
        inv = inv.iter().zip(&pw).map(|(a, b)| a.iter().zip(b).map(|(x, y)| h.add(x, y)).collect()).collect();
    }
    let mut theta = Vec::new();
    for i in 0..m.ndirs() {
        let gp: Mat<H::Elem> = pm.iter().map(|row| row.iter().map(|x| m.ders[i].gamma(h, x)).collect()).collect::<QResult<_>>()?;
        let tp: Mat<H::Elem> = pm.iter().map(|row| row.iter().map(|x| m.ders[i].apply(h, x)).collect()).collect::<QResult<_>>()?;
        let inner = mul(&m.theta[i], &gp)?;
        let sum: Mat<H::Elem> = inner.iter().zip(&tp).map(|(a, b)| a.iter().zip(b).map(|(x, y)| h.add(x, y)).collect()).collect();
        theta.push(mul(&inv, &sum)?);
    }
    QHiggsModule::with_ders(m.host.clone(), m.ders.clone(), theta)
}

pub fn random_base_matrix(r: &mut ChaCha8Rng, b: &BaseRing, level: u32, rank: usize, strict: bool) -> Vec<Vec<BaseElt>> {
    (0..rank)
        .map(|k| {
            (0..rank)
                .map(|j| if strict && k >= j { b.elt_zero(level) } else { crate::sample::small_base_elt(r, b, level) })
                .collect()
        })
        .collect()
}

fn base_mat_mul(b: &BaseRing, x: &[Vec<BaseElt>], y: &[Vec<BaseElt>]) -> Vec<Vec<BaseElt>> {
    let n = x.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(b.elt_zero(x[0][0].level), |acc, k| b.e_add(&acc, &b.e_mul(&x[i][k], &y[k][j]))))
                .collect()
        })
        .collect()
}

/// Commuting base matrices Θ_0 and polynomials in it; strictly upper triangular when `nilpotent`.
pub fn random_commuting(r: &mut ChaCha8Rng, b: &BaseRing, level: u32, rank: usize, d: usize, nilpotent: bool) -> Vec<Vec<Vec<BaseElt>>> {
    let t0 = random_base_matrix(r, b, level, rank, nilpotent);
    let t0sq = base_mat_mul(b, &t0, &t0);
    let mut out = vec![t0.clone()];
    for _ in 1..d {
        let c0 = if nilpotent { 0 } else { r.gen_range(-2..=2) };
        let c1 = r.gen_range(-2..=2);
        let c2 = r.gen_range(-2..=2);
        let m = (0..rank)
            .map(|i| {
                (0..rank)
                    .map(|j| {
                        let mut x = b.e_add(&b.e_scale(&t0[i][j], c1), &b.e_scale(&t0sq[i][j], c2));
                        if i == j {
                            x = b.e_add(&x, &b.from_int_at(c0, level));
                        }
                        x
                    })
                    .collect()
            })
            .collect();
        out.push(m);
    }
    out
}

pub fn lift_matrices<H: QHost>(h: &H, ms: &[Vec<Vec<BaseElt>>]) -> Vec<Mat<H::Elem>> {
    ms.iter().map(|m| m.iter().map(|r| r.iter().map(|x| h.from_base(x)).collect()).collect()).collect()
}

/// Framed chart R_n[t_1..t_d] over the q-base (or its q = 1 specialization).
pub fn chart(base: &BaseRing, d: usize) -> Arc<DeltaPolyRing<BaseRing>> {
    Arc::new(DeltaPolyRing::new(Arc::new(base.clone()), 0, d))
}

/// The folding map R[t_1..t_d] → R[t], every t_j ↦ t.
pub fn fold_map(src: Arc<DeltaPolyRing<BaseRing>>, tgt: Arc<DeltaPolyRing<BaseRing>>) -> RingMap<DeltaPolyRing<BaseRing>, DeltaPolyRing<BaseRing>> {
    Arc::new(move |x| {
        let mut imgs = BTreeMap::new();
        for j in 0..src.nconst {
            imgs.insert(PVar::T(j as u16), tgt.t(0)?);
        }
        let t2 = tgt.clone();
        src.substitute(tgt.as_ref(), x, &move |c| Ok(t2.constant(c)), &imgs)
    })
}

/// The inclusion R[t] → R[t_1..t_d], t ↦ t_k.
pub fn coordinate_map(
    src: Arc<DeltaPolyRing<BaseRing>>,
    tgt: Arc<DeltaPolyRing<BaseRing>>,
    k: usize,
) -> RingMap<DeltaPolyRing<BaseRing>, DeltaPolyRing<BaseRing>> {
    Arc::new(move |x| {
        let mut imgs = BTreeMap::new();
        for j in 0..src.nconst {
            imgs.insert(PVar::T(j as u16), tgt.t(k + j)?);
        }
        let t2 = tgt.clone();
        src.substitute(tgt.as_ref(), x, &move |c| Ok(t2.constant(c)), &imgs)
    })
}

/// Invariant-factor exponents of a finite abelian p-group from the counts |G[p^k]| = p^{s_k}.
pub fn factors_from_torsion_counts(s: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    for k in 1..s.len() {
        let ge_k = s[k] - s[k - 1];
        let ge_k1 = if k + 1 < s.len() { s[k + 1] - s[k] } else { 0 };
        for _ in 0..(ge_k - ge_k1) {
            out.push(k as u32);
        }
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

fn all_elements(b: &BaseRing, level: u32) -> Vec<BaseElt> {
    let dim = b.dim(level);
    let mut out = vec![Vec::<i128>::new()];
    for k in 0..dim {
        let m = b.modulus(level, k);
        out = out.into_iter().flat_map(|v| (0..m).map(move |c| [v.clone(), vec![c]].concat())).collect();
    }
    out.into_iter().map(|c| b.from_coeffs(level, &c)).collect()
}

fn logp(p: u32, mut x: usize) -> u32 {
    let mut e = 0;
    while x > 1 {
        x /= p as usize;
        e += 1;
    }
    e
}

/// Structures of R/(x) and Ann(x) by enumerating R_n.
pub fn quotient_and_annihilator(b: &BaseRing, x: &BaseElt) -> (Vec<u32>, Vec<u32>) {
    let n = b.n();
    let elems = all_elements(b, n);
    let p = b.p();
    let ideal: std::collections::HashSet<Vec<i64>> = elems.iter().map(|r| b.e_mul(r, x).c).collect();
    let kmax = n + 2;
    let mut sq = Vec::new();
    let mut sa = Vec::new();
    for k in 0..=kmax {
        let pk = b.from_int((p as i64).pow(k));
        let q = elems.iter().filter(|r| ideal.contains(&b.e_mul(r, &pk).c)).count() / ideal.len();
        sq.push(logp(p, q));
        let a = elems.iter().filter(|r| b.e_mul(r, x).is_zero() && b.e_mul(r, &pk).is_zero()).count();
        sa.push(logp(p, a));
    }
    (factors_from_torsion_counts(&sq), factors_from_torsion_counts(&sa))
}

/// Complex of the affine line R_n[t] with θ(t^m) = [pm]_q t^{m−1}, truncated at degree ≤ deg.
pub fn affine_line_complex(base: &BaseRing, deg: u32) -> QResult<ChainComplex> {
    let a = chart(base, 1);
    let m = QHiggsModule::trivial(a.clone(), host_directions(a.as_ref())?, 1)?;
    build_complex(&m, deg, 1)
}

/// Direct oracle for the affine line: H^0 = R ⊕ ⊕_m Ann([pm]_q), H^1 = ⊕_m R/([pm]_q).
pub fn affine_line_oracle(base: &BaseRing, deg: u32) -> (Vec<u32>, Vec<u32>) {
    let p = base.p() as u64;
    let (_, r_struct) = quotient_and_annihilator(base, &base.elt_zero(base.n()));
    let mut h0 = r_struct;
    let mut h1 = Vec::new();
    for m in 1..=deg as u64 {
        let (q, a) = quotient_and_annihilator(base, &base.qint(p * m));
        h0.extend(a);
        h1.extend(q);
    }
    h0.sort_unstable_by(|a, b| b.cmp(a));
    h1.sort_unstable_by(|a, b| b.cmp(a));
    (h0, h1)
}

/// Classical answer at q = 1: ⊕_m Z/p^{min(v_p(pm), n+1)}.
pub fn affine_line_classical(p: u32, n: u32, deg: u32) -> (Vec<u32>, Vec<u32>) {
    let mut h1 = Vec::new();
    for m in 1..=deg {
        let mut v = 0;
        let mut x = p * m;
        while x % p == 0 {
            x /= p;
            v += 1;
        }
        h1.push(v.min(n + 1));
    }
    let mut h0 = vec![n + 1];
    h0.extend(h1.iter().copied());
    h0.sort_unstable_by(|a, b| b.cmp(a));
    h1.sort_unstable_by(|a, b| b.cmp(a));
    (h0, h1)
}

/// Envelope basis elements used as θ-samples.
pub fn env_samples(e: &EnvRing<BaseRing>, w: u32) -> Vec<crate::envelope::EnvElt<BaseElt>> {
    e.basis_upto(w).into_iter().map(|m| e.mono(m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn module(p: u32, n: u32, d: usize, rank: usize, seed: u64, nil: bool) -> QHiggsModule<DeltaPolyRing<BaseRing>> {
        let b = BaseRing::q(p, n).unwrap();
        let a = chart(&b, d);
        let mut r = crate::sample::rng(seed);
        let ms = random_commuting(&mut r, &b, n, rank, d, nil);
        QHiggsModule::new(a.clone(), lift_matrices(a.as_ref(), &ms)).unwrap()
    }

    #[test]
    fn theta_on_line_powers() {
        let b = BaseRing::q(2, 2).unwrap();
        let a = chart(&b, 1);
        let th = a.direction(0).unwrap();
        for m in 1..6u32 {
            let x = a.pow(&a.t(0).unwrap(), m).unwrap();
            let want = a.mul_base(&a.pow(&a.t(0).unwrap(), m - 1).unwrap(), &b.qint(2 * m as u64)).unwrap();
            assert!(a.equal(&th.apply(a.as_ref(), &x).unwrap(), &want), "m={m}");
        }
    }

    #[test]
    fn integrable_and_d_squared() {
        for seed in 0..4 {
            let m = module(2, 2, 2, 2, seed, false);
            assert!(m.check_integrability().unwrap().passed);
            assert!(d_squared_check(&m, 2).unwrap().passed);
            let c = build_complex(&m, 3, 0).unwrap();
            c.validate().unwrap();
        }
    }

    #[test]
    fn gauge_keeps_integrability() {
        let m = module(2, 1, 2, 3, 4, false);
        let h = m.host.as_ref();
        let mut r = crate::sample::rng(8);
        let pm: Mat<_> = (0..3)
            .map(|k| (0..3).map(|j| if k == j { h.one() } else if k < j { crate::sample::chart_elt(&mut r, h, 2, 1) } else { h.zero() }).collect())
            .collect();
        let g = gauge(&m, &pm).unwrap();
        assert!(g.check_integrability().unwrap().passed);
        assert!(d_squared_check(&g, 1).unwrap().passed);
    }

    #[test]
    fn non_commuting_fails() {
        let b = BaseRing::q(3, 1).unwrap();
        let a = chart(&b, 2);
        let z = b.from_int(0);
        let o = b.from_int(1);
        let m0 = vec![vec![z.clone(), o.clone()], vec![z.clone(), z.clone()]];
        let m1 = vec![vec![z.clone(), z.clone()], vec![o.clone(), z.clone()]];
        let m = QHiggsModule::new(a.clone(), lift_matrices(a.as_ref(), &[m0, m1])).unwrap();
        assert!(!m.check_integrability().unwrap().passed);
        assert!(!d_squared_check(&m, 1).unwrap().passed);
    }

    #[test]
    fn frobenius_two_routes() {
        let m = module(3, 1, 2, 2, 7, false);
        let f = frobenius_pullback(&m, 2).unwrap();
        let s = frobenius_spec(m.host.clone()).unwrap();
        s.require_valid(m.host.as_ref(), &m.ders, m.host.as_ref(), &m.ders, &[]).unwrap();
        let f2 = scalar_extension(&m, &s, m.host.clone(), m.ders.clone()).unwrap();
        assert!(f.same_theta(&f2));
        let map = |x: &Form<_>| pullback_chain_map(&m, &f, &s, x);
        assert!(chain_map_check("frobenius", &m, &f, &map, 1).unwrap().passed);
    }

    #[test]
    fn fold_and_cocycle() {
        let m = module(2, 1, 2, 2, 3, false);
        let b = m.host.base().clone();
        let a1 = chart(&b, 1);
        let d1 = host_directions(a1.as_ref()).unwrap();
        let one = a1.one();
        let fold = PullbackSpec { name: "fold".into(), g: fold_map(m.host.clone(), a1.clone()), psi: vec![0, 0], c: vec![one.clone(), one] };
        fold.require_valid(m.host.as_ref(), &m.ders, a1.as_ref(), &d1, &[]).unwrap();
        let m1 = scalar_extension(&m, &fold, a1.clone(), d1.clone()).unwrap();
        assert!(m1.check_integrability().unwrap().passed);
        let map = |x: &Form<_>| pullback_chain_map(&m, &m1, &fold, x);
        let rep = chain_map_check("fold", &m, &m1, &map, 2).unwrap();
        assert!(rep.passed, "{:?}", rep.witness);
        let fr = frobenius_spec(a1.clone()).unwrap();
        let m2 = scalar_extension(&m1, &fr, a1.clone(), d1.clone()).unwrap();
        let comp = compose_pullbacks(&fold, &fr, a1.as_ref()).unwrap();
        comp.require_valid(m.host.as_ref(), &m.ders, a1.as_ref(), &d1, &[]).unwrap();
        let m2c = scalar_extension(&m, &comp, a1.clone(), d1.clone()).unwrap();
        assert!(m2.same_theta(&m2c));
        for (_, g) in form_generators(&m, 1) {
            let x = gen_form(&m, &g);
            let two = pullback_chain_map(&m1, &m2, &fr, &pullback_chain_map(&m, &m1, &fold, &x).unwrap()).unwrap();
            let one = pullback_chain_map(&m, &m2c, &comp, &x).unwrap();
            assert!(form_equal(&m2, &two, &one));
        }
    }

    #[test]
    fn tensor_and_product() {
        let m = module(2, 1, 2, 2, 5, false);
        let b = m.host.base().clone();
        let mut r = crate::sample::rng(9);
        let ms = random_commuting(&mut r, &b, 1, 1, 2, false);
        let m2 = QHiggsModule::with_ders(m.host.clone(), m.ders.clone(), lift_matrices(m.host.as_ref(), &ms)).unwrap();
        let t = tensor(&m, &m2).unwrap();
        assert!(t.check_integrability().unwrap().passed);
        let h = m.host.as_ref();
        let v = vec![h.t(0).unwrap(), h.one()];
        let w = vec![h.t(1).unwrap()];
        assert!(tensor_check(&m, &m2, &[(v, w)]).unwrap().passed);
        let rep = product_leibniz_check(&m, &m2, 1).unwrap();
        assert!(rep.passed, "{:?}", rep.witness);
    }

    #[test]
    fn affine_line() {
        for n in [1u32, 2] {
            let b = BaseRing::q(2, n).unwrap();
            let c = affine_line_complex(&b, 8).unwrap();
            let (h0, h1) = affine_line_oracle(&b, 8);
            assert_eq!(c.cohomology(0).unwrap().factors, h0);
            assert_eq!(c.cohomology(1).unwrap().factors, h1);
            let b1 = BaseRing::q1(2, n).unwrap();
            let c1 = affine_line_complex(&b1, 8).unwrap();
            let (k0, k1) = affine_line_classical(2, n, 8);
            assert_eq!(c1.cohomology(0).unwrap().factors, k0);
            assert_eq!(c1.cohomology(1).unwrap().factors, k1);
        }
    }

    #[test]
    fn quasi_nilpotent() {
        let m = module(3, 1, 2, 3, 2, true);
        let r = m.check_quasi_nilpotent(5).unwrap();
        assert!(r.passed);
        let b = m.host.base().clone();
        let id = vec![vec![b.from_int(1)]];
        let a = chart(&b, 1);
        let m1 = QHiggsModule::new(a.clone(), lift_matrices(a.as_ref(), &[id])).unwrap();
        assert!(!m1.check_quasi_nilpotent(4).unwrap().passed);
    }
}
