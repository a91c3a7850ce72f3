use std::collections::BTreeMap;

use calogero::suite::CheckResult;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub meta: BTreeMap<String, String>,
}

impl Entry {
    pub fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Entry { name: name.to_string(), residual, tolerance, passed: residual <= tolerance, meta: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }
}

impl From<CheckResult> for Entry {
    fn from(c: CheckResult) -> Self {
        Entry {
            name: c.name.to_string(),
            residual: c.residual,
            tolerance: c.tolerance,
            passed: c.passed,
            meta: c.meta.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub entries: Vec<Entry>,
    pub summary: Summary,
}

impl VerificationReport {
    pub fn new(kind: &str, seed: u64, entries: Vec<Entry>) -> Self {
        let passed = entries.iter().filter(|e| e.passed).count();
        VerificationReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: kind.to_string(),
            seed,
            summary: Summary { total: entries.len(), passed, failed: entries.len() - passed },
            entries,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
