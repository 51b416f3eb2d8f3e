//! Verification records.
//!
//! Every check names the property it tests (for example
//! `cubes.ball_sandwich`), the tolerance it was held to and the worst margin
//! observed. A positive margin means slack; a failed check has a negative
//! margin or a nonempty detail.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub statement: String,
    pub tolerance: f64,
    pub margin: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Records a check that passes when `margin >= 0`.
    pub fn margin(
        &mut self,
        name: &str,
        statement: &str,
        tolerance: f64,
        margin: f64,
        detail: impl Into<String>,
    ) {
        self.checks.push(Check {
            name: name.to_string(),
            statement: statement.to_string(),
            tolerance,
            margin,
            passed: margin >= 0.0 && !margin.is_nan(),
            detail: detail.into(),
        });
    }

    /// Records an error-style check: passes when `error <= tolerance`.
    pub fn within(&mut self, name: &str, statement: &str, tolerance: f64, error: f64) {
        let margin = tolerance - error;
        self.checks.push(Check {
            name: name.to_string(),
            statement: statement.to_string(),
            tolerance,
            margin,
            passed: error <= tolerance,
            detail: alloc::format!("error {error:.3e}"),
        });
    }

    /// Records a boolean check; `violations` lists offending items.
    pub fn exact(&mut self, name: &str, statement: &str, violations: Vec<String>) {
        let passed = violations.is_empty();
        let detail = if passed {
            String::new()
        } else {
            let shown: Vec<String> = violations.iter().take(5).cloned().collect();
            alloc::format!("{} violation(s): {}", violations.len(), shown.join("; "))
        };
        self.checks.push(Check {
            name: name.to_string(),
            statement: statement.to_string(),
            tolerance: 0.0,
            margin: if passed { 0.0 } else { -(violations.len() as f64) },
            passed,
            detail,
        });
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pass_and_fail() {
        let mut r = Report::new();
        r.within("a", "x close to y", 1e-10, 1e-12);
        r.margin("b", "bound", 0.0, 0.5, "");
        assert!(r.all_passed());
        r.exact("c", "no violations", vec!["point 3".into()]);
        assert!(!r.all_passed());
        assert_eq!(r.failures().count(), 1);
        assert!(r.get("c").unwrap().detail.contains("point 3"));
    }
}
