//! Run configuration, individual checks and the report every command emits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// Everything that determines a run: the command, its parameters, the
/// tolerances in force and the seed.  Reports embed it verbatim.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        RunConfig { command: command.into(), params: BTreeMap::new(), tolerances: BTreeMap::new(), seed }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_string(), serde_json::to_value(value).expect("parameter serializes"));
        self
    }

    /// Records a tolerance: the override if one was given, else the default.
    /// Returns the value in force.
    pub fn tolerance(&mut self, key: &str, default: f64, overridden: Option<f64>) -> f64 {
        let tol = overridden.unwrap_or(default);
        self.tolerances.insert(key.to_string(), tol);
        tol
    }
}

/// How a check compares its measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `measured ≤ limit`.
    AtMost,
    /// `measured == limit`.
    Equal,
}

/// One verified property with its measured value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub limit: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes iff `measured ≤ limit` (a residual against its tolerance, or a
    /// count against its bound).  NaN never passes.
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            comparison: Comparison::AtMost,
            limit,
            passed: measured <= limit,
            detail: None,
        }
    }

    /// Passes iff `measured == expected`.
    pub fn equal(name: impl Into<String>, measured: f64, expected: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            comparison: Comparison::Equal,
            limit: expected,
            passed: measured == expected,
            detail: None,
        }
    }

    /// A check whose computation itself failed.
    pub fn failed(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            measured: f64::NAN,
            comparison: Comparison::AtMost,
            limit: f64::NAN,
            passed: false,
            detail: Some(reason.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Result of a command: its configuration, checks and command-specific data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub data: BTreeMap<String, Value>,
    /// Tabular output (CSV with header), when the command produces rows.
    #[serde(skip)]
    pub table: Option<String>,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Report { config, passed: true, checks: Vec::new(), data: BTreeMap::new(), table: None }
    }

    pub fn push(&mut self, check: Check) {
        log::debug!("{} {}: {}", if check.passed { "pass" } else { "FAIL" }, check.name, check.measured);
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn insert(&mut self, key: &str, value: impl Serialize) {
        self.data.insert(key.to_string(), serde_json::to_value(value).expect("report data serializes"));
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The command's table if it has one, otherwise the checks as CSV.
    pub fn to_csv(&self) -> String {
        if let Some(t) = &self.table {
            return t.clone();
        }
        let mut s = String::from("check,measured,comparison,limit,passed\n");
        for c in &self.checks {
            let cmp = match c.comparison {
                Comparison::AtMost => "at_most",
                Comparison::Equal => "equal",
            };
            writeln!(s, "{},{:e},{},{:e},{}", c.name, c.measured, cmp, c.limit, c.passed).unwrap();
        }
        s
    }

    /// Human-readable rendering of the same content as the JSON.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}: {}\n", self.config.command, if self.passed { "PASS" } else { "FAIL" });
        for (k, v) in &self.data {
            match v {
                Value::Number(_) | Value::String(_) | Value::Bool(_) => writeln!(s, "  {k}: {v}").unwrap(),
                _ => writeln!(s, "  {k}: {}", serde_json::to_string(v).unwrap()).unwrap(),
            }
        }
        for c in &self.checks {
            let op = match c.comparison {
                Comparison::AtMost => "<=",
                Comparison::Equal => "==",
            };
            write!(
                s,
                "  [{}] {}: {:.3e} {op} {:.3e}",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                c.limit
            )
            .unwrap();
            if let Some(d) = &c.detail {
                write!(s, " ({d})").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_compare_and_aggregate() {
        let mut r = Report::new(RunConfig::new("x", 1));
        r.push(Check::at_most("a", 1e-13, 1e-12));
        r.push(Check::equal("b", 4.0, 4.0));
        assert!(r.passed);
        r.push(Check::at_most("c", f64::NAN, 1.0));
        assert!(!r.passed);
        assert!(!Check::failed("d", "boom").passed);
        assert!(r.to_csv().starts_with("check,measured,comparison,limit,passed\n"));
        assert!(r.to_text().starts_with("x: FAIL"));
    }

    #[test]
    fn tolerance_overrides_are_recorded() {
        let mut c = RunConfig::new("x", 0);
        assert_eq!(c.tolerance("f", 1e-12, None), 1e-12);
        assert_eq!(c.tolerance("g", 1e-12, Some(1e-3)), 1e-3);
        assert_eq!(c.tolerances["g"], 1e-3);
    }
}
