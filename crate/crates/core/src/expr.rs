//! S-expression grammar for ring elements: integers, `mu`, `q`, `xi`, `eta`, host generators,
//! and the forms `(+ …)`, `(- …)`, `(* …)`, `(^ x n)`, `(delta x)`, `(delta^k x)`, `(phi x)`.

use crate::base_prism::{BaseElt, BaseRing};
use crate::delta_poly::{DeltaPoly, DeltaPolyRing, PMono, PVar};
use crate::envelope::{EMono, EnvElt, EnvRing};
use crate::error::{QError, QResult};
use crate::ring::{DeltaRing, Ring};
use num_bigint::BigInt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

pub fn parse(s: &str) -> QResult<Sexp> {
    let toks = tokenize(s);
    let mut pos = 0;
    let e = parse_at(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(QError::Parse(format!("trailing input in {s:?}")));
    }
    Ok(e)
}

fn tokenize(s: &str) -> Vec<String> {
    s.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_string).collect()
}

fn parse_at(t: &[String], pos: &mut usize) -> QResult<Sexp> {
    let tok = t.get(*pos).ok_or_else(|| QError::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match t.get(*pos).map(String::as_str) {
                    None => return Err(QError::Parse("unbalanced parenthesis".into())),
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(parse_at(t, pos)?),
                }
            }
        }
        ")" => Err(QError::Parse("unexpected ')'".into())),
        _ => Ok(Sexp::Atom(tok.clone())),
    }
}

/// Host-specific generators: atoms like `t0` and forms like `(delta^2 tau1)`.
pub trait Resolver<R: Ring> {
    fn resolve(&self, r: &R, e: &Sexp) -> Option<QResult<R::Elem>>;
}

fn delta_depth(head: &str) -> Option<u32> {
    if head == "delta" {
        Some(1)
    } else {
        head.strip_prefix("delta^").and_then(|k| k.parse().ok())
    }
}

fn small_int(e: &Sexp) -> QResult<u32> {
    match e {
        Sexp::Atom(a) => a.parse().map_err(|_| QError::Parse(format!("expected a small integer, got {a}"))),
        _ => Err(QError::Parse("expected a small integer".into())),
    }
}

pub fn eval<R: DeltaRing>(r: &R, e: &Sexp, res: &dyn Resolver<R>) -> QResult<R::Elem> {
    if let Some(x) = res.resolve(r, e) {
        return x;
    }
    let b = r.base();
    match e {
        Sexp::Atom(a) => match a.as_str() {
            "mu" => Ok(r.from_base(&b.mu())),
            "q" => Ok(r.from_base(&b.q_elt())),
            "xi" => Ok(r.from_base(&b.xi())),
            "eta" => Ok(r.from_base(&b.eta())),
            _ => {
                let n: BigInt = a.parse().map_err(|_| QError::Parse(format!("unknown symbol {a}")))?;
                Ok(r.from_base(&b.from_bigint_coeffs(b.n(), &[n])))
            }
        },
        Sexp::List(items) => {
            let (head, args) = match items.split_first() {
                Some((Sexp::Atom(h), rest)) => (h.as_str(), rest),
                _ => return Err(QError::Parse("empty or malformed form".into())),
            };
            let vals = || args.iter().map(|a| eval(r, a, res)).collect::<QResult<Vec<_>>>();
            match head {
                "+" => Ok(vals()?.iter().fold(r.zero(), |acc, x| r.add(&acc, x))),
                "-" => {
                    let v = vals()?;
                    match v.len() {
                        0 => Err(QError::Parse("(-) needs arguments".into())),
                        1 => Ok(r.neg(&v[0])),
                        _ => Ok(v[1..].iter().fold(v[0].clone(), |acc, x| r.sub(&acc, x))),
                    }
                }
                "*" => vals()?.iter().try_fold(r.one(), |acc, x| r.mul(&acc, x)),
                "^" => {
                    if args.len() != 2 {
                        return Err(QError::Parse("(^ x n) takes two arguments".into()));
                    }
                    r.pow(&eval(r, &args[0], res)?, small_int(&args[1])?)
                }
                "phi" => {
                    if args.len() != 1 {
                        return Err(QError::Parse("(phi x) takes one argument".into()));
                    }
                    r.phi(&eval(r, &args[0], res)?)
                }
                h => match delta_depth(h) {
                    Some(k) if args.len() == 1 => r.delta_iter(&eval(r, &args[0], res)?, k),
                    _ => Err(QError::Parse(format!("unknown operator {h}"))),
                },
            }
        }
    }
}

pub fn eval_str<R: DeltaRing>(r: &R, s: &str, res: &dyn Resolver<R>) -> QResult<R::Elem> {
    eval(r, &parse(s)?, res)
}

pub struct NoVars;

impl Resolver<BaseRing> for NoVars {
    fn resolve(&self, _r: &BaseRing, _e: &Sexp) -> Option<QResult<BaseElt>> {
        None
    }
}

/// Chart generators `t<j>` and `S<i>`, `(delta^k S<i>)`.
pub struct ChartVars;

impl Resolver<DeltaPolyRing<BaseRing>> for ChartVars {
    fn resolve(&self, r: &DeltaPolyRing<BaseRing>, e: &Sexp) -> Option<QResult<DeltaPoly<BaseElt>>> {
        let var = |name: &str, k: u32| -> Option<QResult<DeltaPoly<BaseElt>>> {
            if let Some(j) = name.strip_prefix('t').and_then(|x| x.parse::<usize>().ok()) {
                if k > 0 {
                    return None;
                }
                return Some(if j < r.nconst { r.t(j) } else { Err(QError::Parse(format!("no frame variable {name}"))) });
            }
            let i = name.strip_prefix('S').and_then(|x| x.parse::<usize>().ok())?;
            Some(if i < r.nvars {
                r.monomial(PMono::var(PVar::V(i as u16, k as u16), 1), &r.coeff.from_int(1))
            } else {
                Err(QError::Parse(format!("no variable {name}")))
            })
        };
        match e {
            Sexp::Atom(a) => var(a, 0),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(h), Sexp::Atom(a)] => delta_depth(h).and_then(|k| if a.starts_with('S') { var(a, k) } else { None }),
                _ => None,
            },
        }
    }
}

/// Envelope generators by name, `(delta^k name)`, and `t<i>` = a_i + [p]_q τ_i.
pub struct EnvVars;

impl Resolver<EnvRing<BaseRing>> for EnvVars {
    fn resolve(&self, r: &EnvRing<BaseRing>, e: &Sexp) -> Option<QResult<EnvElt<BaseElt>>> {
        let gen = |name: &str, k: usize| -> Option<QResult<EnvElt<BaseElt>>> {
            let v = r.names.iter().position(|n| n == name)?;
            if k >= r.levels {
                return Some(Err(QError::WeightCapTooSmall(format!("δ^{k}({name}) is beyond the weight cap"))));
            }
            let mut m = EMono::one();
            m.0[r.slot(v, k)] = 1;
            Some(Ok(r.mono(m)))
        };
        match e {
            Sexp::Atom(a) => {
                if let Some(x) = gen(a, 0) {
                    return Some(x);
                }
                let i = a.strip_prefix('t').and_then(|x| x.parse::<usize>().ok())?;
                Some(if i < r.d { r.t(i) } else { Err(QError::Parse(format!("no frame variable {a}"))) })
            }
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(h), Sexp::Atom(a)] => delta_depth(h).and_then(|k| gen(a, k as usize)),
                _ => None,
            },
        }
    }
}

/// Expression from a JSON value: a string in the grammar or an integer.
pub fn json_expr(v: &serde_json::Value) -> QResult<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        _ => Err(QError::Parse(format!("expected an expression, got {v}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;

    #[test]
    fn base_roundtrip() {
        let b = BaseRing::q(3, 2).unwrap();
        let mut r = sample::rng(1);
        for _ in 0..50 {
            let x = sample::base_elt(&mut r, &b, 2);
            let y = eval_str(&b, &b.render(&x), &NoVars).unwrap();
            assert!(b.equal(&x, &y));
        }
        let q = eval_str(&b, "(- q 1)", &NoVars).unwrap();
        assert!(b.equal(&q, &b.mu()));
    }

    #[test]
    fn env_roundtrip() {
        let b = BaseRing::q(2, 1).unwrap();
        let e = EnvRing::<BaseRing>::over_base(&b, &[b.from_int(1), b.from_int(0)], 1, 4).unwrap();
        let mut r = sample::rng(2);
        for _ in 0..30 {
            let x = sample::env_elt(&mut r, &e, 3, 4);
            let y = eval_str(&e, &e.render(&x), &EnvVars).unwrap();
            assert!(e.equal(&x, &y), "{}", e.render(&x));
        }
    }

    #[test]
    fn chart_roundtrip() {
        let b = BaseRing::q(2, 2).unwrap();
        let a = DeltaPolyRing::new(std::sync::Arc::new(b.clone()), 0, 2);
        let mut r = sample::rng(3);
        for _ in 0..30 {
            let x = sample::chart_elt(&mut r, &a, 3, 3);
            let y = eval_str(&a, &a.render(&x), &ChartVars).unwrap();
            assert!(a.equal(&x, &y));
        }
    }

    #[test]
    fn errors() {
        let b = BaseRing::q(2, 1).unwrap();
        assert!(matches!(eval_str(&b, "(+ 1", &NoVars), Err(QError::Parse(_))));
        assert!(matches!(eval_str(&b, "(foo 1)", &NoVars), Err(QError::Parse(_))));
        assert!(matches!(eval_str(&b, "zz", &NoVars), Err(QError::Parse(_))));
    }
}
