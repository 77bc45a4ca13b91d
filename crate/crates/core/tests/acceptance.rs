use qprism::report::Report;
use qprism::suites::{run_suite, SuiteConfig, SUITES};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

const SEED: u64 = 20240601;

struct Criterion {
    id: u32,
    suite: &'static str,
    limit: Duration,
    golden: bool,
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn line(id: u32, ok: bool, elapsed: Duration, limit: Duration, detail: &str) -> bool {
    let pass = ok && elapsed <= limit;
    println!(
        "criterion {id:>2}  {}  {:>8.3}s / {:>4}s  tolerance=exact  {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn summary(r: &Report) -> String {
    match &r.witness {
        Some(w) => format!("{} checks={} failures={} witness: {}", r.name, r.checks, r.failures, w),
        None => format!("{} checks={}", r.name, r.checks),
    }
}

fn run_criterion(c: &Criterion) -> bool {
    let mut cfg = SuiteConfig::new(SEED);
    if c.golden {
        cfg.golden = Some(golden_dir());
    }
    let start = Instant::now();
    let res = run_suite(c.suite, &cfg);
    let elapsed = start.elapsed();
    match res {
        Ok(r) => line(c.id, r.passed, elapsed, c.limit, &summary(&r)),
        Err(e) => line(c.id, false, elapsed, c.limit, &format!("{}: error {e}", c.suite)),
    }
}

/// Every suite, fed corrupted input through the CLI, must exit 1 with a witness.
fn negative_controls() -> bool {
    let exe = env!("CARGO_BIN_EXE_qprism");
    let start = Instant::now();
    let mut bad = Vec::new();
    for (name, _) in SUITES {
        let out = Command::new(exe)
            .args(["check", name, "--corrupt", "--seed", &SEED.to_string()])
            .output()
            .expect("run qprism");
        let text = String::from_utf8_lossy(&out.stdout);
        let witnessed = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v.get("witness").and_then(|w| w.as_str().map(|s| !s.is_empty())))
            .unwrap_or(false);
        if out.status.code() != Some(1) || !witnessed {
            bad.push(format!("{name} (exit {:?})", out.status.code()));
        }
    }
    let detail = if bad.is_empty() {
        format!("{} suites rejected corrupted input", SUITES.len())
    } else {
        format!("not rejected: {}", bad.join(", "))
    };
    line(12, bad.is_empty(), start.elapsed(), Duration::from_secs(10), &detail)
}

fn main() {
    let criteria = [
        Criterion { id: 1, suite: "delta-axioms", limit: Duration::from_secs(10), golden: false },
        Criterion { id: 2, suite: "base-identities", limit: Duration::from_secs(1), golden: false },
        Criterion { id: 3, suite: "envelope", limit: Duration::from_secs(60), golden: true },
        Criterion { id: 4, suite: "derivations", limit: Duration::from_secs(60), golden: false },
        Criterion { id: 5, suite: "pd", limit: Duration::from_secs(60), golden: true },
        Criterion { id: 6, suite: "sigma", limit: Duration::from_secs(30), golden: false },
        Criterion { id: 7, suite: "complexes", limit: Duration::from_secs(120), golden: false },
        Criterion { id: 8, suite: "strat", limit: Duration::from_secs(180), golden: false },
        Criterion { id: 9, suite: "poincare", limit: Duration::from_secs(60), golden: false },
        Criterion { id: 10, suite: "affine-line", limit: Duration::from_secs(30), golden: false },
        Criterion { id: 11, suite: "ca-h0", limit: Duration::from_secs(60), golden: false },
    ];
    let mut failed = 0;
    for c in &criteria {
        if !run_criterion(c) {
            failed += 1;
        }
    }
    if !negative_controls() {
        failed += 1;
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
