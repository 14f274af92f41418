//! Structured pass/fail reports shared by architecture validation and the
//! partition verifier.

use std::fmt;

use serde::Serialize;

/// Serializes any `Display` value as its string form.
pub(crate) fn display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    /// Stable identifier of the violated rule, e.g. `T1.2` or `arch.self-channel`.
    pub premise: String,
    /// Agents, channels or constructors involved, rendered in DSL syntax.
    pub witness: Vec<String>,
    pub message: String,
}

impl Violation {
    pub fn new(
        premise: impl Into<String>,
        witness: impl IntoIterator<Item = String>,
        message: impl Into<String>,
    ) -> Self {
        Violation {
            premise: premise.into(),
            witness: witness.into_iter().collect(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.premise, self.message)?;
        if !self.witness.is_empty() {
            write!(f, " ({})", self.witness.join(", "))?;
        }
        Ok(())
    }
}

/// `passed` holds iff `violations` is empty. Violations are sorted and
/// deduplicated so reports compare equal regardless of discovery order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerdictReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Conditions that weaken a guarantee without failing the check.
    pub warnings: Vec<String>,
}

impl VerdictReport {
    pub fn new(mut violations: Vec<Violation>, mut warnings: Vec<String>) -> Self {
        violations.sort();
        violations.dedup();
        warnings.sort();
        warnings.dedup();
        VerdictReport {
            passed: violations.is_empty(),
            violations,
            warnings,
        }
    }

    pub fn pass() -> Self {
        VerdictReport::new(Vec::new(), Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// Violations of one premise.
    pub fn of(&self, premise: &str) -> impl Iterator<Item = &Violation> + '_ {
        let premise = premise.to_string();
        self.violations.iter().filter(move |v| v.premise == premise)
    }

    pub fn merge(self, other: VerdictReport) -> VerdictReport {
        let mut v = self.violations;
        v.extend(other.violations);
        let mut w = self.warnings;
        w.extend(other.warnings);
        VerdictReport::new(v, w)
    }
}

impl fmt::Display for VerdictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed {
            writeln!(f, "PASS")?;
        } else {
            writeln!(f, "FAIL ({} violation(s))", self.violations.len())?;
        }
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}
