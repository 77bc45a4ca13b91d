//! Cohomology of bounded complexes of finite abelian p-groups ⊕ Z/p^e.
//!
//! The working algorithm eliminates over the local ring Z/p^M (M the largest exponent);
//! the big-integer Smith normal form over Z is kept as an independent route.

use crate::divided_powers::PDRing;
use crate::error::{QError, QResult};
use crate::report::Report;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub type ZMat = Vec<Vec<BigInt>>;

/// U·A·V = S with U, V unimodular, S diagonal with s_1 | s_2 | ⋯.
#[derive(Clone, Debug)]
pub struct Snf {
    pub u: ZMat,
    pub s: ZMat,
    pub v: ZMat,
    pub uinv: ZMat,
    pub vinv: ZMat,
}

fn identity(n: usize) -> ZMat {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

pub fn zmat_mul(a: &ZMat, b: &ZMat) -> ZMat {
    let n = a.len();
    let m = b.first().map(|r| r.len()).unwrap_or(0);
    let k = b.len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut s = BigInt::zero();
                    for l in 0..k {
                        if !a[i][l].is_zero() && !b[l][j].is_zero() {
                            s += &a[i][l] * &b[l][j];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

pub fn zmat_from_i64(a: &[Vec<i64>]) -> ZMat {
    a.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
}

struct SnfState {
    a: ZMat,
    u: ZMat,
    uinv: ZMat,
    v: ZMat,
    vinv: ZMat,
}

impl SnfState {
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.a.swap(i, j);
        self.u.swap(i, j);
        for r in self.uinv.iter_mut() {
            r.swap(i, j);
        }
    }
    fn swap_cols(&mut self, i: usize, j: usize) {
        for r in self.a.iter_mut() {
            r.swap(i, j);
        }
        for r in self.v.iter_mut() {
            r.swap(i, j);
        }
        self.vinv.swap(i, j);
    }
    /// row_i += c·row_j
    fn add_row(&mut self, i: usize, j: usize, c: &BigInt) {
        for k in 0..self.a[0].len() {
            let t = &self.a[j][k] * c;
            self.a[i][k] += t;
        }
        for k in 0..self.u[0].len() {
            let t = &self.u[j][k] * c;
            self.u[i][k] += t;
        }
        for r in self.uinv.iter_mut() {
            let t = &r[i] * c;
            r[j] -= t;
        }
    }
    /// col_i += c·col_j
    fn add_col(&mut self, i: usize, j: usize, c: &BigInt) {
        for r in self.a.iter_mut() {
            let t = &r[j] * c;
            r[i] += t;
        }
        for r in self.v.iter_mut() {
            let t = &r[j] * c;
            r[i] += t;
        }
        for k in 0..self.vinv[0].len() {
            let t = &self.vinv[i][k] * c;
            self.vinv[j][k] -= t;
        }
    }
    fn negate_row(&mut self, i: usize) {
        for x in self.a[i].iter_mut() {
            *x = -x.clone();
        }
        for x in self.u[i].iter_mut() {
            *x = -x.clone();
        }
        for r in self.uinv.iter_mut() {
            r[i] = -r[i].clone();
        }
    }
}

/// Smith normal form over Z with exact big integers and deterministic pivoting.
pub fn smith_normal_form(a: &ZMat) -> Snf {
    let rows = a.len();
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let mut st = SnfState { a: a.clone(), u: identity(rows), uinv: identity(rows), v: identity(cols), vinv: identity(cols) };
    if rows == 0 || cols == 0 {
        return Snf { u: st.u, s: st.a, v: st.v, uinv: st.uinv, vinv: st.vinv };
    }
    let mut t = 0;
    while t < rows.min(cols) {
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !st.a[i][j].is_zero() && best.map(|(bi, bj)| st.a[i][j].abs() < st.a[bi][bj].abs()).unwrap_or(true) {
                    best = Some((i, j));
                }
            }
        }
        let Some((bi, bj)) = best else { break };
        st.swap_rows(t, bi);
        st.swap_cols(t, bj);
        loop {
            let mut changed = false;
            for i in t + 1..rows {
                if !st.a[i][t].is_zero() {
                    let q = st.a[i][t].div_floor(&st.a[t][t]);
                    st.add_row(i, t, &-q);
                    if !st.a[i][t].is_zero() {
                        st.swap_rows(t, i);
                        changed = true;
                    }
                }
            }
            for j in t + 1..cols {
                if !st.a[t][j].is_zero() {
                    let q = st.a[t][j].div_floor(&st.a[t][t]);
                    st.add_col(j, t, &-q);
                    if !st.a[t][j].is_zero() {
                        st.swap_cols(t, j);
                        changed = true;
                    }
                }
            }
            if changed {
                continue;
            }
            let mut bad = None;
            'outer: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !(&st.a[i][j] % &st.a[t][t]).is_zero() {
                        bad = Some(i);
                        break 'outer;
                    }
                }
            }
            match bad {
                Some(i) => st.add_row(t, i, &BigInt::one()),
                None => break,
            }
        }
        if st.a[t][t].is_negative() {
            st.negate_row(t);
        }
        t += 1;
    }
    Snf { u: st.u, s: st.a, v: st.v, uinv: st.uinv, vinv: st.vinv }
}

/// Nonzero diagonal entries of the Smith form.
pub fn invariant_factors_z(a: &ZMat) -> Vec<BigInt> {
    let s = smith_normal_form(a).s;
    (0..s.len().min(s.first().map(|r| r.len()).unwrap_or(0))).map(|i| s[i][i].clone()).filter(|x| !x.is_zero()).collect()
}

/// Elimination over the local ring Z/p^M.
struct LocalSnf {
    p: i128,
    m: u32,
    pm: i128,
    /// Valuations of the pivots, one per rank step.
    vals: Vec<u32>,
    /// Column transform C and its inverse with A·C in column-echelon Smith shape.
    c: Vec<Vec<i128>>,
    cinv: Vec<Vec<i128>>,
}

fn val(p: i128, m: u32, x: i128) -> u32 {
    if x == 0 {
        return m;
    }
    let mut v = 0;
    let mut y = x;
    while y % p == 0 && v < m {
        y /= p;
        v += 1;
    }
    v
}

fn inv_mod(a: i128, m: i128) -> i128 {
    crate::base_prism::mod_inverse(a.rem_euclid(m), m).expect("unit")
}

fn local_snf(a: &[Vec<i128>], cols: usize, p: i128, m: u32) -> LocalSnf {
    let pm = p.pow(m);
    let rows = a.len();
    let mut a: Vec<Vec<i128>> = a.iter().map(|r| r.iter().map(|x| x.rem_euclid(pm)).collect()).collect();
    let mut c: Vec<Vec<i128>> = (0..cols).map(|i| (0..cols).map(|j| (i == j) as i128).collect()).collect();
    let mut cinv = c.clone();
    let mut vals = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        let mut best: Option<(usize, usize, u32)> = None;
        'search: for i in t..rows {
            for j in t..cols {
                let v = val(p, m, a[i][j]);
                if v < m && best.map(|b| v < b.2).unwrap_or(true) {
                    best = Some((i, j, v));
                    if v == 0 {
                        break 'search;
                    }
                }
            }
        }
        let Some((bi, bj, v)) = best else { break };
        a.swap(t, bi);
        if bj != t {
            for r in a.iter_mut() {
                r.swap(t, bj);
            }
            for r in c.iter_mut() {
                r.swap(t, bj);
            }
            cinv.swap(t, bj);
        }
        let pv = p.pow(v);
        let unit = a[t][t] / pv;
        let uinv = inv_mod(unit, pm);
        for r in a.iter_mut() {
            r[t] = (r[t] * uinv).rem_euclid(pm);
        }
        for r in c.iter_mut() {
            r[t] = (r[t] * uinv).rem_euclid(pm);
        }
        for k in 0..cols {
            cinv[t][k] = (cinv[t][k] * unit).rem_euclid(pm);
        }
        for i in 0..rows {
            if i != t && a[i][t] != 0 {
                let f = a[i][t] / pv;
                for k in 0..cols {
                    a[i][k] = (a[i][k] - f * a[t][k]).rem_euclid(pm);
                }
            }
        }
        for j in 0..cols {
            if j != t && a[t][j] != 0 {
                let f = a[t][j] / pv;
                for r in a.iter_mut() {
                    r[j] = (r[j] - f * r[t]).rem_euclid(pm);
                }
                for r in c.iter_mut() {
                    r[j] = (r[j] - f * r[t]).rem_euclid(pm);
                }
                for k in 0..cols {
                    cinv[t][k] = (cinv[t][k] + f * cinv[j][k]).rem_euclid(pm);
                }
            }
        }
        vals.push(v);
        t += 1;
    }
    LocalSnf { p, m, pm, vals, c, cinv }
}

/// Exponents of the cyclic factors of (Z/p^M)^n / span(columns).
fn local_cokernel(cols_vecs: &[Vec<i128>], n: usize, p: i128, m: u32) -> Vec<u32> {
    let rows: Vec<Vec<i128>> = (0..n).map(|i| cols_vecs.iter().map(|c| c[i]).collect()).collect();
    let s = local_snf(&rows, cols_vecs.len(), p, m);
    let mut out: Vec<u32> = s.vals.iter().copied().filter(|&v| v > 0).collect();
    out.extend(std::iter::repeat(m).take(n - s.vals.len()));
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

/// A bounded cochain complex C^0 → C^1 → ⋯ of groups ⊕_j Z/p^{e_j}.
#[derive(Clone, Debug, Serialize)]
pub struct ChainComplex {
    pub p: u32,
    /// exps[q][j]: exponent of the j-th cyclic generator of C^q.
    pub exps: Vec<Vec<u32>>,
    /// diffs[q]: matrix of d^q with rows indexed by C^{q+1} and columns by C^q.
    pub diffs: Vec<Vec<Vec<i64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<Vec<u32>>>,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CohomologyReport {
    pub degree: usize,
    /// Exponents e of the invariant factors p^e, largest first.
    pub factors: Vec<u32>,
}

impl CohomologyReport {
    pub fn log_order(&self) -> u32 {
        self.factors.iter().sum()
    }
    pub fn render(&self, p: u32) -> String {
        if self.factors.is_empty() {
            return "0".into();
        }
        self.factors.iter().map(|e| format!("Z/{p}^{e}")).collect::<Vec<_>>().join(" + ")
    }
}

impl ChainComplex {
    pub fn new(p: u32, exps: Vec<Vec<u32>>, diffs: Vec<Vec<Vec<i64>>>) -> QResult<Self> {
        let c = ChainComplex { p, exps, diffs, labels: None, bands: None };
        c.validate()?;
        Ok(c)
    }

    pub fn top(&self) -> usize {
        self.exps.len()
    }

    fn max_exp(&self) -> u32 {
        self.exps.iter().flatten().copied().max().unwrap_or(1).max(1)
    }

    fn pm(&self) -> i128 {
        (self.p as i128).pow(self.max_exp())
    }

    /// Shape, well-definedness on relations and d∘d ≡ 0 modulo the presentation.
    pub fn validate(&self) -> QResult<()> {
        if self.diffs.len() + 1 != self.exps.len() && !(self.exps.is_empty() && self.diffs.is_empty()) {
            return Err(QError::Parse(format!("{} groups but {} differentials", self.exps.len(), self.diffs.len())));
        }
        if self.exps.iter().flatten().any(|&e| (self.p as i128).checked_pow(e + 1).is_none_or(|m| m >= 1 << 62)) {
            return Err(QError::Parse("group exponent too large".into()));
        }
        let p = self.p as i128;
        for (q, d) in self.diffs.iter().enumerate() {
            if d.len() != self.exps[q + 1].len() || d.iter().any(|r| r.len() != self.exps[q].len()) {
                return Err(QError::Parse(format!("d^{q} has the wrong shape")));
            }
            for (j, &e) in self.exps[q].iter().enumerate() {
                for (k, &f) in self.exps[q + 1].iter().enumerate() {
                    if f > e && (d[k][j] as i128 * p.pow(e)).rem_euclid(p.pow(f)) != 0 {
                        return Err(QError::NotAComplex(format!("d^{q} is not well defined on generator {j}")));
                    }
                }
            }
        }
        for q in 0..self.diffs.len().saturating_sub(1) {
            let (a, b) = (&self.diffs[q], &self.diffs[q + 1]);
            for (i, &f) in self.exps[q + 2].iter().enumerate() {
                let m = p.pow(f);
                for j in 0..self.exps[q].len() {
                    let mut s: i128 = 0;
                    for (k, row) in a.iter().enumerate() {
                        s = (s + b[i][k] as i128 * row[j] as i128).rem_euclid(m);
                    }
                    if s != 0 {
                        return Err(QError::NotAComplex(format!("d^{}∘d^{q} ≠ 0 at ({i},{j})", q + 1)));
                    }
                }
            }
        }
        Ok(())
    }

    fn zero_map(&self, rows: usize, cols: usize) -> Vec<Vec<i64>> {
        vec![vec![0; cols]; rows]
    }

    fn d_out(&self, q: usize) -> Vec<Vec<i64>> {
        if q < self.diffs.len() {
            self.diffs[q].clone()
        } else {
            self.zero_map(0, self.exps[q].len())
        }
    }

    fn d_in(&self, q: usize) -> Vec<Vec<i64>> {
        if q > 0 {
            self.diffs[q - 1].clone()
        } else {
            self.zero_map(self.exps[0].len(), 0)
        }
    }

    /// Kernel of d^q as a subgroup of C^q: generators and invariant factors.
    pub fn kernel(&self, q: usize) -> QResult<(Vec<Vec<i64>>, Vec<u32>)> {
        let tgt = if q + 1 < self.exps.len() { self.exps[q + 1].clone() } else { Vec::new() };
        kernel_of(self.p, &self.exps[q], &tgt, &self.d_out(q), self.max_exp())
    }

    /// H^q by elimination over Z/p^M.
    pub fn cohomology(&self, q: usize) -> QResult<CohomologyReport> {
        let p = self.p as i128;
        let m = self.max_exp();
        let pm = self.pm();
        let n = self.exps[q].len();
        let tgt = if q + 1 < self.exps.len() { self.exps[q + 1].clone() } else { Vec::new() };
        let d = self.d_out(q);
        let a: Vec<Vec<i128>> = d
            .iter()
            .enumerate()
            .map(|(k, r)| r.iter().map(|&x| (x as i128 * p.pow(m - tgt[k])).rem_euclid(pm)).collect())
            .collect();
        let s = local_snf(&a, n, p, m);
        let c: Vec<u32> = (0..n).map(|t| if t < s.vals.len() { m - s.vals[t] } else { 0 }).collect();
        let mut lgens: Vec<Vec<i128>> = Vec::new();
        let din = self.d_in(q);
        for j in 0..din.first().map(|r| r.len()).unwrap_or(0) {
            lgens.push((0..n).map(|i| din[i][j] as i128).collect());
        }
        for (j, &e) in self.exps[q].iter().enumerate() {
            let mut v = vec![0i128; n];
            v[j] = p.pow(e);
            lgens.push(v);
        }
        let mut zcols = Vec::with_capacity(lgens.len() + n);
        for g in &lgens {
            let mut z = vec![0i128; n];
            for t in 0..n {
                let mut y: i128 = 0;
                for k in 0..n {
                    y = (y + s.cinv[t][k] * g[k]).rem_euclid(pm);
                }
                let pc = p.pow(c[t]);
                if y % pc != 0 {
                    return Err(QError::NotAComplex(format!("image of d^{} leaves the kernel of d^{q}", q.wrapping_sub(1))));
                }
                z[t] = y / pc;
            }
            zcols.push(z);
        }
        for t in 0..n {
            let mut z = vec![0i128; n];
            z[t] = p.pow(m - c[t]);
            zcols.push(z);
        }
        let _ = s.p;
        Ok(CohomologyReport { degree: q, factors: local_cokernel(&zcols, n, p, m) })
    }

    pub fn all_cohomology(&self) -> QResult<Vec<CohomologyReport>> {
        (0..self.exps.len()).map(|q| self.cohomology(q)).collect()
    }

    /// H^q through the Smith normal form over Z with relation columns adjoined.
    pub fn cohomology_via_z(&self, q: usize) -> QResult<CohomologyReport> {
        let p = BigInt::from(self.p);
        let n = self.exps[q].len();
        let tgt = if q + 1 < self.exps.len() { self.exps[q + 1].clone() } else { Vec::new() };
        let d = self.d_out(q);
        let nt = tgt.len();
        let mut b: ZMat = vec![vec![BigInt::zero(); n + nt]; nt];
        for k in 0..nt {
            for j in 0..n {
                b[k][j] = BigInt::from(d[k][j]);
            }
            b[k][n + k] = -p.pow(tgt[k]);
        }
        let kgens: ZMat = if nt == 0 {
            identity(n)
        } else {
            let snf = smith_normal_form(&b);
            let rank = (0..nt.min(n + nt)).filter(|&i| !snf.s[i][i].is_zero()).count();
            (0..n).map(|i| (rank..n + nt).map(|j| snf.v[i][j].clone()).collect()).collect()
        };
        if n == 0 {
            return Ok(CohomologyReport { degree: q, factors: Vec::new() });
        }
        let ks = smith_normal_form(&kgens);
        let diag: Vec<BigInt> = (0..n).map(|i| ks.s[i][i].clone()).collect();
        if diag.iter().any(|x| x.is_zero()) {
            return Err(QError::NotAComplex("kernel lattice is not of full rank".into()));
        }
        let din = self.d_in(q);
        let mut lcols: Vec<Vec<BigInt>> = Vec::new();
        for j in 0..din.first().map(|r| r.len()).unwrap_or(0) {
            lcols.push((0..n).map(|i| BigInt::from(din[i][j])).collect());
        }
        for (j, &e) in self.exps[q].iter().enumerate() {
            let mut v = vec![BigInt::zero(); n];
            v[j] = p.pow(e);
            lcols.push(v);
        }
        let lmat: ZMat = (0..n).map(|i| lcols.iter().map(|c| c[i].clone()).collect()).collect();
        let ul = zmat_mul(&ks.u, &lmat);
        let mut coords: ZMat = Vec::with_capacity(n);
        for (i, row) in ul.iter().enumerate() {
            let mut r = Vec::with_capacity(row.len());
            for x in row {
                let (qq, rr) = x.div_rem(&diag[i]);
                if !rr.is_zero() {
                    return Err(QError::NotAComplex("image is not contained in the kernel".into()));
                }
                r.push(qq);
            }
            coords.push(r);
        }
        let inv = invariant_factors_z(&coords);
        if inv.len() < n {
            return Err(QError::NotAComplex("infinite cohomology".into()));
        }
        let mut factors = Vec::new();
        for x in inv {
            if x.is_one() {
                continue;
            }
            let mut e = 0u32;
            let mut y = x.clone();
            while (&y % &p).is_zero() {
                y /= &p;
                e += 1;
            }
            if !y.is_one() {
                return Err(QError::NotAComplex(format!("invariant factor {x} is not a power of p")));
            }
            factors.push(e);
        }
        factors.sort_unstable_by(|a, b| b.cmp(a));
        Ok(CohomologyReport { degree: q, factors })
    }

    pub fn group_log_order(&self, q: usize) -> u32 {
        self.exps[q].iter().sum()
    }

    fn apply(&self, q: usize, x: &[i64]) -> Vec<i64> {
        let p = self.p as i64;
        self.diffs[q]
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let m = p.pow(self.exps[q + 1][k]);
                r.iter().zip(x).fold(0i64, |s, (a, b)| (s + a * b).rem_euclid(m))
            })
            .collect()
    }

    /// log_p |H^q| by enumerating C^{q−1} and C^q; only for groups of order ≤ 2^16.
    pub fn brute_force_log_order(&self, q: usize) -> Option<u32> {
        let size = |e: &Vec<u32>| -> Option<u64> {
            let mut s: u64 = 1;
            for &x in e {
                s = s.checked_mul((self.p as u64).pow(x))?;
            }
            Some(s)
        };
        let nq = size(&self.exps[q])?;
        let nprev = if q > 0 { size(&self.exps[q - 1])? } else { 1 };
        if nq > 1 << 16 || nprev > 1 << 16 {
            return None;
        }
        let elems = |e: &Vec<u32>, total: u64| -> Vec<Vec<i64>> {
            (0..total)
                .map(|mut idx| {
                    e.iter()
                        .map(|&x| {
                            let m = (self.p as u64).pow(x);
                            let v = idx % m;
                            idx /= m;
                            v as i64
                        })
                        .collect()
                })
                .collect()
        };
        let ker = if q < self.diffs.len() {
            elems(&self.exps[q], nq).iter().filter(|x| self.apply(q, x).iter().all(|&y| y == 0)).count() as u64
        } else {
            nq
        };
        let im = if q > 0 {
            let mut set = std::collections::HashSet::new();
            for x in elems(&self.exps[q - 1], nprev) {
                set.insert(self.apply(q - 1, &x));
            }
            set.len() as u64
        } else {
            1
        };
        let ord = ker / im;
        let mut e = 0;
        let mut o = ord;
        while o > 1 {
            o /= self.p as u64;
            e += 1;
        }
        Some(e)
    }

    /// Restriction to the generators of one band (the differential must preserve bands).
    pub fn band(&self, b: u32) -> QResult<ChainComplex> {
        let bands = self.bands.as_ref().ok_or_else(|| QError::PreconditionViolated("complex carries no bands".into()))?;
        let idx: Vec<Vec<usize>> = bands.iter().map(|bs| (0..bs.len()).filter(|&j| bs[j] == b).collect()).collect();
        let exps = idx.iter().enumerate().map(|(q, ix)| ix.iter().map(|&j| self.exps[q][j]).collect()).collect();
        let diffs = (0..self.diffs.len())
            .map(|q| idx[q + 1].iter().map(|&k| idx[q].iter().map(|&j| self.diffs[q][k][j]).collect()).collect())
            .collect();
        ChainComplex::new(self.p, exps, diffs)
    }
}

/// Kernel of a map ⊕Z/p^{e_j} → ⊕Z/p^{f_k}: generators (in source coordinates) and invariant factors.
pub fn kernel_of(p: u32, src: &[u32], tgt: &[u32], mat: &[Vec<i64>], m: u32) -> QResult<(Vec<Vec<i64>>, Vec<u32>)> {
    let m = src.iter().chain(tgt).copied().max().unwrap_or(1).max(m).max(1);
    let pp = p as i128;
    let pm = pp.pow(m);
    let n = src.len();
    let a: Vec<Vec<i128>> = mat
        .iter()
        .enumerate()
        .map(|(k, r)| r.iter().map(|&x| (x as i128 * pp.pow(m - tgt[k])).rem_euclid(pm)).collect())
        .collect();
    let s = local_snf(&a, n, pp, m);
    let mut gens = Vec::new();
    for t in 0..n {
        let c = if t < s.vals.len() { m - s.vals[t] } else { 0 };
        let pc = pp.pow(c);
        let g: Vec<i64> = (0..n)
            .map(|i| ((s.c[i][t] * pc).rem_euclid(pm) % pp.pow(src[i])) as i64)
            .collect();
        if g.iter().any(|&x| x != 0) {
            gens.push(g);
        }
    }
    let cplx = ChainComplex::new(p, vec![src.to_vec(), tgt.to_vec()], vec![mat.to_vec()])?;
    let h = cplx.cohomology(0)?;
    let _ = (s.pm, s.m);
    Ok((gens, h.factors))
}

/// Whether x ∈ ⊕Z/p^{e_j} maps to zero.
pub fn maps_to_zero(p: u32, tgt: &[u32], mat: &[Vec<i64>], x: &[i64]) -> bool {
    mat.iter().enumerate().all(|(k, r)| {
        let m = (p as i128).pow(tgt[k]);
        r.iter().zip(x).fold(0i128, |s, (a, b)| (s + *a as i128 * *b as i128).rem_euclid(m)) == 0
    })
}

/// Truncated PD de Rham complex of M = (Z/p^{N+1})^rank over d variables, box-truncated at
/// X_v^{[n]} with n < depth; generators carry the band |n| + |I|.
pub fn pd_complex(p: u32, n: u32, d: usize, depth: u32, rank: usize) -> QResult<ChainComplex> {
    let pd = PDRing::new(p, n, d)?;
    let mut monos: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..d {
        monos = monos.into_iter().flat_map(|m| (0..depth).map(move |k| [m.clone(), vec![k]].concat())).collect();
    }
    let subsets: Vec<Vec<Vec<usize>>> = (0..=d).map(|q| subsets_of(d, q)).collect();
    let gens: Vec<Vec<(Vec<u32>, usize, Vec<usize>)>> = (0..=d)
        .map(|q| {
            let mut g = Vec::new();
            for i in &subsets[q] {
                for m in &monos {
                    for j in 0..rank {
                        g.push((m.clone(), j, i.clone()));
                    }
                }
            }
            g
        })
        .collect();
    let index: Vec<std::collections::HashMap<(Vec<u32>, usize, Vec<usize>), usize>> =
        gens.iter().map(|g| g.iter().cloned().enumerate().map(|(a, b)| (b, a)).collect()).collect();
    let mut diffs = Vec::new();
    for q in 0..d {
        let mut mat = vec![vec![0i64; gens[q].len()]; gens[q + 1].len()];
        for (col, (m, j, i)) in gens[q].iter().enumerate() {
            let x = pd.term(m.clone(), &pd.coeff.from_int(1));
            for v in 0..d {
                if i.contains(&v) {
                    continue;
                }
                let dx = pd.derive(v, &x);
                let sign = if i.iter().filter(|&&u| u < v).count() % 2 == 0 { 1 } else { -1 };
                let mut ni = i.clone();
                ni.push(v);
                ni.sort_unstable();
                for (mm, c) in &dx.terms {
                    let row = index[q + 1][&(mm.clone(), *j, ni.clone())];
                    mat[row][col] += sign * c.c[0];
                }
            }
        }
        diffs.push(mat);
    }
    let exps = gens.iter().map(|g| vec![n + 1; g.len()]).collect();
    let mut c = ChainComplex::new(p, exps, diffs)?;
    c.labels = Some(
        gens.iter()
            .map(|g| g.iter().map(|(m, j, i)| format!("{} e{j} w{:?}", pd.render_mono(m), i)).collect())
            .collect(),
    );
    c.bands = Some(gens.iter().map(|g| g.iter().map(|(m, _, i)| m.iter().sum::<u32>() + i.len() as u32).collect()).collect());
    Ok(c)
}

/// Strictly increasing index lists of length q in 0..d.
pub fn subsets_of(d: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize == q {
            out.push((0..d).filter(|&i| mask >> i & 1 == 1).collect());
        }
    }
    out.sort();
    out
}

fn binom_usize(n: usize, k: usize) -> usize {
    (0..k).fold(1, |a, i| a * (n - i) / (i + 1))
}

/// Truncated Poincaré lemma: H^0 = M on band 0, exact interior bands, and at band j·depth
/// exactly C(d, j)·rank classes Z/p^{N+1} in degree j.
pub fn poincare_check(p: u32, n: u32, d: usize, depth: u32, rank: usize) -> QResult<Report> {
    if depth == 0 {
        return Err(QError::DepthExceeded("depth must be positive".into()));
    }
    let c = pd_complex(p, n, d, depth, rank)?;
    poincare_check_on(&c, p, n, d, depth, rank)
}

/// The truncated Poincaré expectations on a given banded complex.
pub fn poincare_check_on(c: &ChainComplex, p: u32, n: u32, d: usize, depth: u32, rank: usize) -> QResult<Report> {
    let mut rep = Report::new(&format!("poincare p={p} d={d} depth={depth}"), "poincare-lemma");
    let maxband = d as u32 * depth;
    for b in 0..=maxband {
        let cb = c.band(b)?;
        for q in 0..=d {
            let h = cb.cohomology(q)?;
            let expect: Vec<u32> = if b == 0 && q == 0 {
                vec![n + 1; rank]
            } else if b > 0 && b % depth == 0 && q == (b / depth) as usize {
                vec![n + 1; binom_usize(d, q) * rank]
            } else {
                Vec::new()
            };
            rep.check(h.factors == expect, || format!("band {b} H^{q} = {} expected {:?}", h.render(p), expect));
        }
    }
    rep.note(format!("{} bands, boundary classes at multiples of {depth}", maxband + 1));
    Ok(rep)
}

pub fn bigint_to_i64(x: &BigInt) -> Option<i64> {
    x.to_i64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(a: &[&[i64]]) -> ZMat {
        a.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn snf_examples() {
        assert_eq!(invariant_factors_z(&z(&[&[2, 0], &[0, 4]])), vec![BigInt::from(2), BigInt::from(4)]);
        assert_eq!(invariant_factors_z(&z(&[&[2, 1], &[0, 2]])), vec![BigInt::from(1), BigInt::from(4)]);
        assert!(invariant_factors_z(&z(&[&[0, 0], &[0, 0]])).is_empty());
        let a = z(&[&[6, 4, 2], &[3, 9, 12], &[0, 5, 7]]);
        let s = smith_normal_form(&a);
        assert_eq!(zmat_mul(&zmat_mul(&s.u, &a), &s.v), s.s);
        assert_eq!(zmat_mul(&s.u, &s.uinv), identity(3));
        assert_eq!(zmat_mul(&s.v, &s.vinv), identity(3));
    }

    #[test]
    fn two_term_complex() {
        let c = ChainComplex::new(2, vec![vec![2], vec![2]], vec![vec![vec![2]]]).unwrap();
        assert_eq!(c.cohomology(0).unwrap().factors, vec![1]);
        assert_eq!(c.cohomology(1).unwrap().factors, vec![1]);
        assert_eq!(c.cohomology_via_z(0).unwrap().factors, vec![1]);
        assert_eq!(c.cohomology_via_z(1).unwrap().factors, vec![1]);
        assert_eq!(c.brute_force_log_order(0), Some(1));
    }

    #[test]
    fn not_a_complex() {
        let r = ChainComplex::new(2, vec![vec![1], vec![1], vec![1]], vec![vec![vec![1]], vec![vec![1]]]);
        assert!(matches!(r, Err(QError::NotAComplex(_))));
    }

    #[test]
    fn poincare_small() {
        assert!(poincare_check(2, 1, 1, 4, 1).unwrap().passed);
        assert!(poincare_check(2, 0, 2, 4, 1).unwrap().passed);
        assert!(poincare_check(3, 1, 1, 9, 2).unwrap().passed);
    }

    #[test]
    fn kernels() {
        let (g, f) = kernel_of(2, &[2, 2], &[2], &[vec![1, 1]], 2).unwrap();
        assert_eq!(f, vec![2]);
        for x in &g {
            assert!(maps_to_zero(2, &[2], &[vec![1, 1]], x));
        }
    }
}
