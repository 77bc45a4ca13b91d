use clap::{Parser, Subcommand, ValueEnum};
use qprism::base_prism::{BaseElt, BaseRing};
use qprism::delta_poly::DeltaPolyRing;
use qprism::envelope::EnvRing;
use qprism::expr::{eval_str, json_expr, ChartVars, EnvVars, NoVars, Resolver};
use qprism::homalg::{pd_complex, ChainComplex, CohomologyReport};
use qprism::qhiggs::{
    affine_line_complex, build_complex, chain_map_check, chart, coordinate_map, d_squared_check, fold_map, frobenius_pullback,
    frobenius_spec, host_directions, pullback_chain_map, scalar_extension, tensor, tensor_check, Form, Mat, PullbackSpec, QHiggsModule,
    QHost,
};
use qprism::report::Report;
use qprism::ring::Ring;
use qprism::stratification::{mat_render, strat_weight_cap, CosimplicialEnvelope, Stratification};
use qprism::suites::{self, golden_envelope_cap, pd_envelope, SuiteConfig, SUITES};
use qprism::{QError, QResult};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "qprism", version, about = "Checks and computations for q-Higgs modules, envelopes and stratifications")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a named property suite, or `all`.
    Check {
        suite: String,
        #[arg(long)]
        p: Option<u32>,
        #[arg(long)]
        prec: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        instances: Option<usize>,
        /// Feed the suite a deliberately broken input.
        #[arg(long)]
        corrupt: bool,
        /// Directory with golden envelope and PD files.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// List the available suites.
    List,
    /// Rewrite table and basis sample of an envelope.
    Envelope {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        prec: u32,
        #[arg(long, default_value_t = 1)]
        vars: usize,
        /// Comma-separated base expressions.
        #[arg(long, value_delimiter = ',')]
        centers: Option<Vec<String>>,
        #[arg(long)]
        wcap: Option<u32>,
        #[arg(long, default_value_t = 12)]
        sample: usize,
        #[arg(long)]
        q1: bool,
    },
    /// δ^k(τ) ↦ divided-power dictionary at q = 1.
    Pd {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        prec: u32,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value_t = 0)]
        center: i64,
    },
    /// Tasks on a q-Higgs module given as JSON.
    Qhiggs {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        task: HiggsTask,
        /// Second module for `tensor`.
        #[arg(long)]
        with: Option<PathBuf>,
        /// Weight bound of the truncated complex.
        #[arg(long, default_value_t = 2)]
        weight: u32,
        /// Pullback along `fold`, `inclusion` or `frobenius`.
        #[arg(long)]
        map: Option<String>,
    },
    /// Stratification tasks on a module over an envelope.
    Strat {
        #[arg(long)]
        module: PathBuf,
        #[arg(long, value_enum)]
        task: StratTask,
        #[arg(long)]
        wcap: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        weight: u32,
    },
    /// Cohomology of a complex of finite abelian p-groups.
    Cohomology {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Built-in complex: `affine-line` or `pd`.
        #[arg(long)]
        example: Option<String>,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 1)]
        prec: u32,
        #[arg(long, default_value_t = 8)]
        deg: u32,
        #[arg(long, default_value_t = 1)]
        vars: usize,
        #[arg(long)]
        q1: bool,
        /// Include the complex itself in the output.
        #[arg(long)]
        emit_complex: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HiggsTask {
    Integrable,
    Complex,
    Tensor,
    Frobenius,
    Pullback,
}

#[derive(Clone, Copy, ValueEnum)]
enum StratTask {
    Build,
    Cocycle,
    Roundtrip,
    Frobenius,
    CaH0,
}

struct Output {
    reports: Vec<Report>,
    result: Value,
    table: Option<Vec<String>>,
}

fn bad(s: impl Into<String>) -> QError {
    QError::Parse(s.into())
}

fn read_json(path: &PathBuf) -> QResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn jint(v: &Value) -> QResult<i64> {
    match v {
        Value::Number(n) => n.as_i64().ok_or_else(|| bad(format!("integer expected, got {n}"))),
        Value::String(s) => s.parse().map_err(|_| bad(format!("decimal integer expected, got {s:?}"))),
        _ => Err(bad(format!("integer expected, got {v}"))),
    }
}

fn field<'a>(v: &'a Value, k: &str) -> QResult<&'a Value> {
    v.get(k).ok_or_else(|| bad(format!("missing field {k:?}")))
}

fn small(v: &Value, k: &str) -> QResult<u32> {
    let x = jint(field(v, k)?)?;
    u32::try_from(x).map_err(|_| bad(format!("{k} out of range")))
}

fn base_of(host: &Value) -> QResult<BaseRing> {
    let p = small(host, "p")?;
    let n = small(host, "prec")?;
    if host.get("q1").and_then(Value::as_bool).unwrap_or(false) {
        BaseRing::q1(p, n)
    } else {
        BaseRing::q(p, n)
    }
}

fn centers_of(b: &BaseRing, host: &Value) -> QResult<Vec<BaseElt>> {
    let cs = field(host, "centers")?.as_array().ok_or_else(|| bad("centers must be a list"))?;
    cs.iter().map(|c| eval_str(b, &json_expr(c)?, &NoVars)).collect()
}

struct ModuleSpec {
    host: Value,
    order: Vec<usize>,
    rank: usize,
    theta: Value,
    epsilon: Option<Value>,
}

fn module_spec(v: &Value, ndirs: usize) -> QResult<ModuleSpec> {
    let rank = small(v, "rank")? as usize;
    let order: Vec<usize> = match v.get("order") {
        Some(Value::Array(a)) => a.iter().map(|x| jint(x).map(|i| i as usize)).collect::<QResult<_>>()?,
        None => (0..ndirs).collect(),
        _ => return Err(bad("order must be a list")),
    };
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted != (0..ndirs).collect::<Vec<_>>() {
        return Err(bad(format!("order {order:?} is not a permutation of the {ndirs} coordinates")));
    }
    Ok(ModuleSpec { host: field(v, "host")?.clone(), order, rank, theta: v.get("theta").cloned().unwrap_or(json!({})), epsilon: v.get("epsilon").cloned() })
}

fn host_kind(v: &Value) -> QResult<String> {
    let h = field(v, "host")?;
    Ok(h.get("kind").and_then(Value::as_str).unwrap_or("chart").to_string())
}

fn host_dirs(v: &Value) -> QResult<usize> {
    let h = field(v, "host")?;
    match h.get("vars") {
        Some(x) => Ok(jint(x)? as usize),
        None => Ok(field(h, "centers")?.as_array().map(Vec::len).unwrap_or(0)),
    }
}

fn parse_matrix<R: Ring>(v: &Value, rank: usize, f: &dyn Fn(&str) -> QResult<R::Elem>) -> QResult<Mat<R::Elem>> {
    let rows = v.as_array().ok_or_else(|| bad("matrix must be a list of rows"))?;
    if rows.len() != rank {
        return Err(bad(format!("matrix has {} rows, rank is {rank}", rows.len())));
    }
    rows.iter()
        .map(|r| {
            let r = r.as_array().ok_or_else(|| bad("row must be a list"))?;
            if r.len() != rank {
                return Err(bad(format!("row has {} entries, rank is {rank}", r.len())));
            }
            r.iter().map(|x| f(&json_expr(x)?)).collect()
        })
        .collect()
}

fn theta_for<T: Clone>(spec: &ModuleSpec, zero: T, f: &dyn Fn(&Value) -> QResult<Vec<Vec<T>>>) -> QResult<Vec<Vec<Vec<T>>>> {
    let map = spec.theta.as_object().ok_or_else(|| bad("theta must be an object keyed by coordinate"))?;
    let nd = spec.order.len();
    let mut by_coord: Vec<Option<Vec<Vec<T>>>> = vec![None; nd];
    for (k, m) in map {
        let i: usize = k.trim_start_matches('t').parse().map_err(|_| bad(format!("bad theta key {k:?}")))?;
        if i >= nd {
            return Err(bad(format!("theta key {k:?} exceeds the {nd} coordinates")));
        }
        by_coord[i] = Some(f(m)?);
    }
    Ok(by_coord.into_iter().map(|m| m.unwrap_or_else(|| vec![vec![zero.clone(); spec.rank]; spec.rank])).collect())
}

fn load_module<H: QHost + 'static>(host: Arc<H>, res: &dyn Resolver<H>, spec: &ModuleSpec) -> QResult<QHiggsModule<H>> {
    let h = host.as_ref();
    let by_coord = theta_for(spec, h.zero(), &|m| parse_matrix::<H>(m, spec.rank, &|s| eval_str(h, s, res)))?;
    let ders = spec.order.iter().map(|&i| h.direction(i)).collect::<QResult<Vec<_>>>()?;
    let theta = spec.order.iter().map(|&i| by_coord[i].clone()).collect();
    QHiggsModule::with_ders(host.clone(), Arc::new(ders), theta)
}

fn module_json<H: QHost>(m: &QHiggsModule<H>, host: &Value, order: &[usize]) -> Value {
    let h = m.host.as_ref();
    let mut theta = serde_json::Map::new();
    for (pos, &i) in order.iter().enumerate() {
        let mat: Vec<Vec<String>> = m.theta[pos].iter().map(|r| r.iter().map(|x| h.render(x)).collect()).collect();
        theta.insert(i.to_string(), json!(mat));
    }
    json!({"host": host, "order": order, "rank": m.rank, "theta": theta})
}

fn complex_json(c: &ChainComplex) -> Value {
    let diffs: Vec<Vec<Vec<String>>> = c.diffs.iter().map(|d| d.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()).collect();
    let mut v = json!({"p": c.p, "exps": c.exps, "diffs": diffs});
    if let Some(l) = &c.labels {
        v["labels"] = json!(l);
    }
    if let Some(b) = &c.bands {
        v["bands"] = json!(b);
    }
    v
}

fn complex_from_json(v: &Value) -> QResult<ChainComplex> {
    let p = small(v, "p")?;
    let exps: Vec<Vec<u32>> = field(v, "exps")?
        .as_array()
        .ok_or_else(|| bad("exps must be a list"))?
        .iter()
        .map(|row| row.as_array().ok_or_else(|| bad("exps rows must be lists"))?.iter().map(|x| jint(x).map(|e| e as u32)).collect())
        .collect::<QResult<_>>()?;
    let diffs: Vec<Vec<Vec<i64>>> = field(v, "diffs")?
        .as_array()
        .ok_or_else(|| bad("diffs must be a list"))?
        .iter()
        .map(|m| {
            m.as_array()
                .ok_or_else(|| bad("each differential must be a matrix"))?
                .iter()
                .map(|r| r.as_array().ok_or_else(|| bad("matrix rows must be lists"))?.iter().map(jint).collect())
                .collect()
        })
        .collect::<QResult<_>>()?;
    ChainComplex::new(p, exps, diffs)
}

fn cohomology_output(c: &ChainComplex, emit: bool) -> QResult<Output> {
    let hs: Vec<CohomologyReport> = c.all_cohomology()?;
    let mut table = vec![format!("{:<8} {:<10} {:<10} {}", "degree", "rank", "log_p|H|", "group")];
    for h in &hs {
        table.push(format!("{:<8} {:<10} {:<10} {}", h.degree, h.factors.len(), h.log_order(), h.render(c.p)));
    }
    let mut result = json!({
        "p": c.p,
        "cohomology": hs.iter().map(|h| json!({"degree": h.degree, "factors": h.factors, "log_order": h.log_order(), "group": h.render(c.p)})).collect::<Vec<_>>(),
    });
    if emit {
        result["complex"] = complex_json(c);
    }
    Ok(Output { reports: Vec::new(), result, table: Some(table) })
}

type Chart = DeltaPolyRing<BaseRing>;

fn chart_host(h: &Value) -> QResult<Arc<Chart>> {
    let b = base_of(h)?;
    let d = small(h, "vars")? as usize;
    Ok(chart(&b, d))
}

fn env_host(h: &Value) -> QResult<Arc<EnvRing<BaseRing>>> {
    let b = base_of(h)?;
    let cs = centers_of(&b, h)?;
    let n = b.n();
    let w = match h.get("wcap") {
        Some(x) => jint(x)? as u32,
        None => golden_envelope_cap(b.p()),
    };
    Ok(Arc::new(EnvRing::<BaseRing>::over_base(&b, &cs, n, w)?))
}

fn sample_pairs<H: QHost>(m: &QHiggsModule<H>, m2: &QHiggsModule<H>) -> QResult<Vec<(Vec<H::Elem>, Vec<H::Elem>)>> {
    let h = m.host.as_ref();
    let t = h.t_coord(0)?;
    let mut out = Vec::new();
    for j in 0..m.rank {
        for k in 0..m2.rank {
            out.push((m.basis_vec(j), m2.vmul(&t, &m2.basis_vec(k))?));
        }
    }
    Ok(out)
}

fn qhiggs_generic<H: QHost + 'static>(
    m: &QHiggsModule<H>,
    spec: &ModuleSpec,
    task: HiggsTask,
    other: Option<QHiggsModule<H>>,
    weight: u32,
) -> QResult<Output> {
    let mut reports = Vec::new();
    let result = match task {
        HiggsTask::Integrable => {
            reports.push(m.check_integrability()?);
            reports.push(d_squared_check(m, weight)?);
            json!({"rank": m.rank, "directions": m.ndirs(), "weight": weight})
        }
        HiggsTask::Complex => {
            let integ = m.check_integrability()?;
            let ok = integ.passed;
            reports.push(integ);
            if !ok {
                return Ok(Output { reports, result: json!({}), table: None });
            }
            let c = build_complex(m, weight, 0)?;
            let out = cohomology_output(&c, true)?;
            return Ok(Output { reports, result: out.result, table: out.table });
        }
        HiggsTask::Tensor => {
            let m2 = other.unwrap_or_else(|| m.clone());
            let t = tensor(m, &m2)?;
            reports.push(tensor_check(m, &m2, &sample_pairs(m, &m2)?)?);
            reports.push(t.check_integrability()?);
            module_json(&t, &spec.host, &spec.order)
        }
        HiggsTask::Frobenius => {
            let fs = frobenius_spec(m.host.clone())?;
            let fm = frobenius_pullback(m, weight)?;
            let fm2 = scalar_extension(m, &fs, m.host.clone(), m.ders.clone())?;
            let mut r = Report::new("frobenius-routes", "frobenius-pullback");
            r.check(fm.same_theta(&fm2), || "pullback differs between the two routes".into());
            reports.push(r);
            let map = |x: &Form<H::Elem>| pullback_chain_map(m, &fm, &fs, x);
            reports.push(chain_map_check("frobenius", m, &fm, &map, weight.min(1))?);
            module_json(&fm, &spec.host, &spec.order)
        }
        HiggsTask::Pullback => return Err(QError::PreconditionViolated("pullback needs a chart host".into())),
    };
    Ok(Output { reports, result, table: None })
}

fn chart_pullback(m: &QHiggsModule<Chart>, spec: &ModuleSpec, map: &str) -> QResult<Output> {
    let b = m.host.base().clone();
    let d = m.ndirs();
    let mut reports = Vec::new();
    let (tgt_d, s) = match map {
        "fold" => {
            if d != 2 {
                return Err(QError::PreconditionViolated("fold needs two coordinates".into()));
            }
            let a1 = chart(&b, 1);
            let one = a1.one();
            (1, PullbackSpec { name: "fold".into(), g: fold_map(m.host.clone(), a1.clone()), psi: vec![0, 0], c: vec![one.clone(), one] })
        }
        "inclusion" => {
            let a2 = chart(&b, d + 1);
            (d + 1, PullbackSpec { name: "inclusion".into(), g: coordinate_map(m.host.clone(), a2.clone(), 0), psi: (0..d).collect(), c: vec![a2.one(); d] })
        }
        "frobenius" => {
            let out = qhiggs_generic(m, spec, HiggsTask::Frobenius, None, 1)?;
            return Ok(out);
        }
        _ => return Err(bad(format!("unknown map {map:?}"))),
    };
    if spec.order.iter().enumerate().any(|(k, &i)| k != i) {
        return Err(QError::OrderViolation("pullbacks need the identity coordinate order".into()));
    }
    let a2 = chart(&b, tgt_d);
    let d2 = host_directions(a2.as_ref())?;
    reports.push(s.validate(m.host.as_ref(), &m.ders, a2.as_ref(), &d2, &[])?);
    s.require_valid(m.host.as_ref(), &m.ders, a2.as_ref(), &d2, &[])?;
    let m2 = scalar_extension(m, &s, a2.clone(), d2.clone())?;
    reports.push(m2.check_integrability()?);
    let cm = |x: &Form<_>| pullback_chain_map(m, &m2, &s, x);
    reports.push(chain_map_check(&s.name, m, &m2, &cm, 1)?);
    let mut host = spec.host.clone();
    host["vars"] = json!(tgt_d);
    Ok(Output { reports, result: module_json(&m2, &host, &(0..tgt_d).collect::<Vec<_>>()), table: None })
}

fn cmd_qhiggs(input: &PathBuf, task: HiggsTask, with: Option<&PathBuf>, weight: u32, map: Option<&str>) -> QResult<Output> {
    let v = read_json(input)?;
    let spec = module_spec(&v, host_dirs(&v)?)?;
    let other = with.map(read_json).transpose()?;
    match host_kind(&v)?.as_str() {
        "chart" => {
            let h = chart_host(&spec.host)?;
            let m = load_module(h.clone(), &ChartVars, &spec)?;
            if let HiggsTask::Pullback = task {
                let default = if m.ndirs() == 2 { "fold" } else { "inclusion" };
                return chart_pullback(&m, &spec, map.unwrap_or(default));
            }
            let m2 = match other {
                Some(o) => {
                    let s2 = module_spec(&o, host_dirs(&o)?)?;
                    if s2.host != spec.host {
                        return Err(QError::HostMismatch("the two modules live on different hosts".into()));
                    }
                    Some(load_module(h, &ChartVars, &s2)?)
                }
                None => None,
            };
            qhiggs_generic(&m, &spec, task, m2, weight)
        }
        "envelope" => {
            let h = env_host(&spec.host)?;
            let m = load_module(h.clone(), &EnvVars, &spec)?;
            let m2 = match other {
                Some(o) => {
                    let s2 = module_spec(&o, host_dirs(&o)?)?;
                    if s2.host != spec.host {
                        return Err(QError::HostMismatch("the two modules live on different hosts".into()));
                    }
                    Some(load_module(h, &EnvVars, &s2)?)
                }
                None => None,
            };
            qhiggs_generic(&m, &spec, task, m2, weight)
        }
        k => Err(bad(format!("unknown host kind {k:?}"))),
    }
}

fn cmd_strat(path: &PathBuf, task: StratTask, wcap: Option<u32>, seed: u64, weight: u32) -> QResult<Output> {
    let v = read_json(path)?;
    let spec = module_spec(&v, host_dirs(&v)?)?;
    if host_kind(&v)? != "envelope" {
        return Err(bad("strat needs an envelope host"));
    }
    let b = base_of(&spec.host)?;
    let cs = centers_of(&b, &spec.host)?;
    let w = wcap.unwrap_or_else(|| strat_weight_cap(b.p(), 2));
    let c = CosimplicialEnvelope::new(&b, &cs, w)?;
    let theta = theta_for(&spec, b.elt_zero(b.n()), &|m| parse_matrix::<BaseRing>(m, spec.rank, &|s| eval_str(&b, s, &NoVars)))?;
    let s = match &spec.epsilon {
        Some(e) => {
            let d1 = c.d1.as_ref();
            Stratification { rank: spec.rank, e: parse_matrix::<EnvRing<BaseRing>>(e, spec.rank, &|x| eval_str(d1, x, &EnvVars))? }
        }
        None => c.strat_from_higgs(&theta)?,
    };
    let eps_json = || -> Value {
        let d1 = c.d1.as_ref();
        json!(s.e.iter().map(|r| r.iter().map(|x| d1.render(x)).collect::<Vec<_>>()).collect::<Vec<_>>())
    };
    let mut reports = Vec::new();
    let result = match task {
        StratTask::Build => {
            reports.push(c.augmentation_check(&s)?);
            json!({"rank": s.rank, "d1_names": c.d1.names, "epsilon": eps_json()})
        }
        StratTask::Cocycle => {
            reports.push(c.augmentation_check(&s)?);
            reports.push(c.cocycle_check(&s)?);
            json!({"rank": s.rank})
        }
        StratTask::Roundtrip => {
            let th = c.higgs_from_strat(&s)?;
            let back = c.scalar_theta(&th)?;
            let mut r = Report::new("strat-to-higgs", "strat-roundtrip");
            for (i, (a, bm)) in back.iter().zip(&theta).enumerate() {
                let same = a.iter().zip(bm).all(|(ra, rb)| ra.iter().zip(rb).all(|(x, y)| b.equal(x, y)));
                r.check(same, || format!("θ{i} recovered as {}", mat_render(&b, a)));
            }
            reports.push(r);
            let mut rng = qprism::sample::rng(seed);
            let pm = suites::mixing_matrix(&b, spec.rank, &mut rng);
            reports.push(c.roundtrip_check(&theta, &pm)?);
            json!({"theta": back.iter().map(|m| m.iter().map(|r| r.iter().map(|x| b.render(x)).collect::<Vec<_>>()).collect::<Vec<_>>()).collect::<Vec<_>>()})
        }
        StratTask::Frobenius => {
            reports.push(c.frobenius_check(&s, &theta)?);
            json!({"rank": s.rank})
        }
        StratTask::CaH0 => {
            let m = c.module(&theta)?;
            reports.push(c.ca_h0_check(&m, &s, weight)?);
            json!({"rank": s.rank, "weight": weight})
        }
    };
    Ok(Output { reports, result, table: None })
}

fn cmd_envelope(p: u32, prec: u32, vars: usize, centers: Option<Vec<String>>, wcap: Option<u32>, sample: usize, q1: bool) -> QResult<Output> {
    let b = if q1 { BaseRing::q1(p, prec)? } else { BaseRing::q(p, prec)? };
    let cs: Vec<BaseElt> = match centers {
        Some(v) => v.iter().map(|s| eval_str(&b, s, &NoVars)).collect::<QResult<_>>()?,
        None => (0..vars).map(|i| b.from_int(i as i64 + 1)).collect(),
    };
    if cs.len() != vars {
        return Err(bad(format!("{} centers given for {vars} variables", cs.len())));
    }
    let e = EnvRing::<BaseRing>::over_base(&b, &cs, prec, wcap.unwrap_or_else(|| golden_envelope_cap(p)))?;
    let mut basis = e.basis_upto(e.wcap);
    basis.sort_by_key(|m| (e.weight(m), e.render_mono(m)));
    let shown: Vec<Value> = basis.iter().take(sample).map(|m| json!({"mono": e.render_mono(m), "weight": e.weight(m)})).collect();
    let table: Vec<String> = e
        .table_json()["rules"]
        .as_array()
        .map(|rs| rs.iter().map(|r| format!("{} = {}", r["lhs"].as_str().unwrap_or(""), r["rhs"].as_str().unwrap_or(""))).collect())
        .unwrap_or_default();
    Ok(Output { reports: Vec::new(), result: json!({"table": e.table_json(), "basis_size": basis.len(), "basis_sample": shown}), table: Some(table) })
}

fn cmd_pd(p: u32, prec: u32, depth: u32, center: i64) -> QResult<Output> {
    let cmp = pd_envelope(p, prec, depth, center)?;
    let dict = cmp.dictionary_json()?;
    let table = dict["images"]
        .as_array()
        .map(|rs| rs.iter().map(|r| format!("{} ↦ {}", r["lhs"].as_str().unwrap_or(""), r["rhs"].as_str().unwrap_or(""))).collect())
        .unwrap_or_default();
    Ok(Output { reports: Vec::new(), result: dict, table: Some(table) })
}

fn cmd_cohomology(input: Option<&PathBuf>, example: Option<&str>, p: u32, prec: u32, deg: u32, vars: usize, q1: bool, emit: bool) -> QResult<Output> {
    let c = match (input, example) {
        (Some(path), None) => complex_from_json(&read_json(path)?)?,
        (None, Some("affine-line")) => {
            let b = if q1 { BaseRing::q1(p, prec)? } else { BaseRing::q(p, prec)? };
            affine_line_complex(&b, deg)?
        }
        (None, Some("pd")) => pd_complex(p, prec, vars, deg, 1)?,
        (None, Some(x)) => return Err(bad(format!("unknown example {x:?}"))),
        _ => return Err(bad("give exactly one of --input and --example")),
    };
    cohomology_output(&c, emit)
}

fn cmd_check(suite: &str, cfg: &SuiteConfig) -> QResult<Output> {
    let names: Vec<&str> = if suite == "all" { SUITES.iter().map(|s| s.0).collect() } else { vec![suite] };
    let mut reports = Vec::new();
    for n in names {
        reports.push(suites::run_suite(n, cfg)?);
    }
    Ok(Output { reports, result: Value::Null, table: None })
}

fn render(out: &Output, fmt: Format) -> String {
    match fmt {
        Format::Json => {
            let v = if out.result.is_null() {
                if out.reports.len() == 1 {
                    json!(out.reports[0])
                } else {
                    json!(out.reports)
                }
            } else if out.reports.is_empty() {
                out.result.clone()
            } else {
                json!({"reports": out.reports, "result": out.result})
            };
            serde_json::to_string_pretty(&v).unwrap_or_default()
        }
        Format::Table => {
            let mut lines: Vec<String> = out.reports.iter().map(Report::table_line).collect();
            match &out.table {
                Some(t) => lines.extend(t.iter().cloned()),
                None => {
                    if let Value::Object(o) = &out.result {
                        let width = o.keys().map(String::len).max().unwrap_or(0);
                        for (k, v) in o {
                            lines.push(format!("{k:<width$}  {v}"));
                        }
                    }
                }
            }
            lines.join("\n")
        }
    }
}

fn run(cli: Cli) -> QResult<Output> {
    match cli.cmd {
        Cmd::Check { suite, p, prec, seed, instances, corrupt, golden } => {
            let cfg = SuiteConfig { p, prec, seed, corrupt, instances, golden };
            cmd_check(&suite, &cfg)
        }
        Cmd::List => {
            let table = SUITES.iter().map(|(n, d)| format!("{n:<16} {d}")).collect();
            Ok(Output { reports: Vec::new(), result: json!(SUITES.iter().map(|(n, d)| json!({"suite": n, "checks": d})).collect::<Vec<_>>()), table: Some(table) })
        }
        Cmd::Envelope { p, prec, vars, centers, wcap, sample, q1 } => cmd_envelope(p, prec, vars, centers, wcap, sample, q1),
        Cmd::Pd { p, prec, depth, center } => cmd_pd(p, prec, depth, center),
        Cmd::Qhiggs { input, task, with, weight, map } => cmd_qhiggs(&input, task, with.as_ref(), weight, map.as_deref()),
        Cmd::Strat { module, task, wcap, seed, weight } => cmd_strat(&module, task, wcap, seed, weight),
        Cmd::Cohomology { input, example, p, prec, deg, vars, q1, emit_complex } => {
            cmd_cohomology(input.as_ref(), example.as_deref(), p, prec, deg, vars, q1, emit_complex)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let fmt = cli.format;
    match run(cli) {
        Ok(out) => {
            println!("{}", render(&out, fmt));
            if out.reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let code = e.exit_code();
            match fmt {
                Format::Json => println!("{}", json!({"error": e.to_string(), "exit": code})),
                Format::Table => eprintln!("error: {e}"),
            }
            ExitCode::from(code as u8)
        }
    }
}
