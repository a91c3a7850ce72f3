//! Scenario files: TOML with a flat set of keys plus an optional `[output]`
//! table. See the README for the schema.

use std::path::Path;

use calogero::hierarchy::min_gap;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Continuous,
    Discrete,
    Semidiscrete,
    VerifyAll,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Continuous => "continuous",
            Kind::Discrete => "discrete",
            Kind::Semidiscrete => "semidiscrete",
            Kind::VerifyAll => "verify-all",
        }
    }
}

/// Where the starting configuration comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// Positions and momenta of a continuous run.
    Phase { x: Vec<f64>, p: Vec<f64> },
    /// Two consecutive configurations of a discrete orbit.
    Orbit { x0: Vec<f64>, x1: Vec<f64> },
    /// Drawn from `seed` with gaps of at least `min_gap`.
    Random,
    /// Nothing to start from (`verify-all`).
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub trajectory: String,
    pub report: String,
}

/// A validated scenario with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: Kind,
    pub n: usize,
    pub seed: u64,
    pub min_gap: f64,
    pub initial: Initial,
    pub gamma: f64,
    pub p1: f64,
    pub p2: f64,
    /// Direction `(c2, c3)` of a continuous run.
    pub direction: [f64; 2],
    pub duration: f64,
    pub dt: f64,
    /// Discrete orbit length, or number of `tau` steps of a chain.
    pub steps: usize,
    pub d_tau: f64,
    /// Number of shifts `K` in a semi-discrete chain.
    pub shifts: usize,
    pub tolerance_scale: f64,
    pub output: Output,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    kind: Kind,
    n: Option<usize>,
    seed: Option<u64>,
    min_gap: Option<f64>,
    x: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
    x0: Option<Vec<f64>>,
    x1: Option<Vec<f64>>,
    gamma: Option<f64>,
    p1: Option<f64>,
    p2: Option<f64>,
    direction: Option<[f64; 2]>,
    duration: Option<f64>,
    dt: Option<f64>,
    steps: Option<usize>,
    d_tau: Option<f64>,
    shifts: Option<usize>,
    tolerance_scale: Option<f64>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    trajectory: Option<String>,
    report: Option<String>,
}

const TOP_KEYS: [&str; 19] = [
    "kind", "n", "seed", "min_gap", "x", "p", "x0", "x1", "gamma", "p1", "p2", "direction", "duration", "dt", "steps",
    "d_tau", "shifts", "tolerance_scale", "output",
];
const OUTPUT_KEYS: [&str; 2] = ["trajectory", "report"];

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_GAMMA: f64 = -2.0;
pub const DEFAULT_MIN_GAP: f64 = 0.5;
pub const DEFAULT_SEED: u64 = 2024;

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { field: field.to_string(), message: message.into() }
}

/// Read and validate a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::FileNotFound(path.display().to_string()),
        _ => CliError::Io(e),
    })?;
    parse_scenario_str(&text)
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        CliError::Parse { line, column, message: e.message().to_string() }
    })?;
    for key in table.keys() {
        if !TOP_KEYS.contains(&key.as_str()) {
            return Err(invalid(key, "unknown key"));
        }
    }
    if let Some(out) = table.get("output").and_then(|v| v.as_table()) {
        for key in out.keys() {
            if !OUTPUT_KEYS.contains(&key.as_str()) {
                return Err(invalid(&format!("output.{key}"), "unknown key"));
            }
        }
    }
    // integers are accepted wherever a float is expected
    let table = widen_integers(table);
    let raw = Raw::deserialize(toml::Value::Table(table)).map_err(|e| {
        let msg = e.message().to_string();
        let field = msg.split('`').nth(1).unwrap_or("scenario").to_string();
        CliError::Validation { field, message: msg }
    })?;
    validate(raw)
}

const FLOAT_KEYS: [&str; 13] =
    ["min_gap", "x", "p", "x0", "x1", "gamma", "p1", "p2", "direction", "duration", "dt", "d_tau", "tolerance_scale"];

fn widen_integers(mut table: toml::Table) -> toml::Table {
    fn widen(v: &mut toml::Value) {
        match v {
            toml::Value::Integer(i) => *v = toml::Value::Float(*i as f64),
            toml::Value::Array(a) => a.iter_mut().for_each(widen),
            _ => {}
        }
    }
    for key in FLOAT_KEYS {
        if let Some(v) = table.get_mut(key) {
            widen(v);
        }
    }
    table
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, "must be finite"))
    }
}

fn configuration(field: &str, v: Vec<f64>, n: usize, gap: f64) -> Result<Vec<f64>, CliError> {
    if v.len() != n {
        return Err(invalid(field, format!("expected {n} values, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "values must be finite"));
    }
    if n > 1 && min_gap(&v) < gap {
        return Err(invalid(field, format!("gap {} below the minimum {gap}", min_gap(&v))));
    }
    Ok(v)
}

fn validate(raw: Raw) -> Result<Scenario, CliError> {
    let kind = raw.kind;
    let min_gap = positive("min_gap", raw.min_gap.unwrap_or(DEFAULT_MIN_GAP))?;
    let n = match (raw.n, kind) {
        (Some(0), _) => return Err(invalid("n", "must be at least 1")),
        (Some(n), _) => n,
        (None, Kind::VerifyAll) => 3,
        (None, _) => {
            let from = raw.x.as_ref().or(raw.x0.as_ref()).ok_or_else(|| invalid("n", "missing"))?;
            from.len()
        }
    };
    let has_phase = raw.x.is_some() || raw.p.is_some();
    let has_orbit = raw.x0.is_some() || raw.x1.is_some();
    let initial = match kind {
        Kind::Continuous => {
            if has_orbit {
                return Err(invalid(if raw.x0.is_some() { "x0" } else { "x1" }, "not used by a continuous run"));
            }
            match (raw.x, raw.p) {
                (Some(x), Some(p)) => {
                    Initial::Phase { x: configuration("x", x, n, min_gap)?, p: configuration("p", p, n, 0.0)? }
                }
                (None, None) => Initial::Random,
                (Some(_), None) => return Err(invalid("p", "missing (x was given)")),
                (None, Some(_)) => return Err(invalid("x", "missing (p was given)")),
            }
        }
        Kind::Discrete | Kind::Semidiscrete => {
            if has_phase {
                return Err(invalid(if raw.x.is_some() { "x" } else { "p" }, "not used by a discrete run; give x0 and x1"));
            }
            match (raw.x0, raw.x1) {
                (Some(x0), Some(x1)) => {
                    Initial::Orbit { x0: configuration("x0", x0, n, min_gap)?, x1: configuration("x1", x1, n, min_gap)? }
                }
                (None, _) => return Err(invalid("x0", "missing")),
                (_, None) => return Err(invalid("x1", "missing")),
            }
        }
        Kind::VerifyAll => {
            if has_phase || has_orbit {
                return Err(invalid("x", "verify-all draws its own states"));
            }
            Initial::None
        }
    };
    let gamma = finite("gamma", raw.gamma.unwrap_or(DEFAULT_GAMMA))?;
    if gamma == 0.0 {
        return Err(invalid("gamma", "must be nonzero"));
    }
    let direction = raw.direction.unwrap_or([1.0, 0.0]);
    if direction.iter().any(|c| !c.is_finite()) || direction == [0.0, 0.0] {
        return Err(invalid("direction", "must be finite and not (0, 0)"));
    }
    let duration = raw.duration.unwrap_or(1.0);
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid("duration", "must be non-negative and finite"));
    }
    let steps = raw.steps.unwrap_or(10);
    if kind == Kind::Discrete && steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    let shifts = raw.shifts.unwrap_or(2);
    if shifts == 0 {
        return Err(invalid("shifts", "must be at least 1"));
    }
    let tolerance_scale = raw.tolerance_scale.unwrap_or(1.0);
    if !(tolerance_scale >= 0.0 && tolerance_scale.is_finite()) {
        return Err(invalid("tolerance_scale", "must be non-negative and finite"));
    }
    let output = raw.output.unwrap_or(RawOutput { trajectory: None, report: None });
    Ok(Scenario {
        kind,
        n,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        min_gap,
        initial,
        gamma,
        p1: finite("p1", raw.p1.unwrap_or(1.0))?,
        p2: finite("p2", raw.p2.unwrap_or(2.0))?,
        direction,
        duration,
        dt: positive("dt", raw.dt.unwrap_or(DEFAULT_DT))?,
        steps,
        d_tau: positive("d_tau", raw.d_tau.unwrap_or(DEFAULT_DT))?,
        shifts,
        tolerance_scale,
        output: Output {
            trajectory: output.trajectory.unwrap_or_else(|| "trajectory".to_string()),
            report: output.report.unwrap_or_else(|| "report.json".to_string()),
        },
    })
}
