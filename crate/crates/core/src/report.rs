//! Machine-readable check reports.

use serde::Serialize;

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct Report {
    pub name: String,
    /// Identifier of the property being tested.
    pub tag: String,
    pub passed: bool,
    pub checks: u64,
    pub failures: u64,
    pub witness: Option<String>,
    pub notes: Vec<String>,
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(name: &str, tag: &str) -> Self {
        Report {
            name: name.to_string(),
            tag: tag.to_string(),
            passed: true,
            checks: 0,
            failures: 0,
            witness: None,
            notes: Vec::new(),
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Record one check; the first failure's witness is kept.
    pub fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) -> bool {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            self.passed = false;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
        ok
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn fail(&mut self, witness: impl Into<String>) {
        let w = witness.into();
        self.check(false, || w);
    }

    /// Fold another report into this one.
    pub fn absorb(&mut self, other: Report) {
        self.checks += other.checks;
        self.failures += other.failures;
        if !other.passed {
            self.passed = false;
            if self.witness.is_none() {
                self.witness = other.witness.map(|w| format!("[{}] {}", other.name, w));
            }
        }
        self.notes.extend(other.notes);
    }

    pub fn table_line(&self) -> String {
        format!(
            "{:<28} {:<6} checks={:<6} failures={:<4}{}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.checks,
            self.failures,
            self.witness.as_ref().map(|w| format!(" witness: {w}")).unwrap_or_default()
        )
    }
}
