//! Named numerical checks, the unit every verification suite reports in.

use std::fmt;

/// Whether a failing check fails its suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckKind {
    Asserted,
    /// Measured and reported only; used for documented discrepancies.
    Informational,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Asserted => "asserted",
            CheckKind::Informational => "informational",
        }
    }
}

/// How `measured` is compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    /// `|measured - expected| <= tolerance`.
    Within,
    /// `measured <= expected + tolerance`.
    AtMost,
    /// `measured >= expected - tolerance`.
    AtLeast,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Relation::Within => "within",
            Relation::AtMost => "at-most",
            Relation::AtLeast => "at-least",
        }
    }

    fn holds(self, expected: f64, measured: f64, tolerance: f64) -> bool {
        match self {
            Relation::Within => (measured - expected).abs() <= tolerance,
            Relation::AtMost => measured <= expected + tolerance,
            Relation::AtLeast => measured >= expected - tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub measured: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub kind: CheckKind,
    /// Where the expected value comes from: a closed form, an oracle, a
    /// group law, a conservation law or a timing budget.
    pub source: &'static str,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        relation: Relation,
        expected: f64,
        measured: f64,
        tolerance: f64,
        source: &'static str,
    ) -> Self {
        // NaN never passes
        let pass = relation.holds(expected, measured, tolerance);
        Self {
            name: name.into(),
            expected,
            measured,
            tolerance,
            relation,
            pass,
            kind: CheckKind::Asserted,
            source,
        }
    }

    pub fn within(name: impl Into<String>, expected: f64, measured: f64, tolerance: f64, source: &'static str) -> Self {
        Self::new(name, Relation::Within, expected, measured, tolerance, source)
    }

    /// A non-negative residual bounded by `limit`.
    pub fn residual(name: impl Into<String>, measured: f64, limit: f64, source: &'static str) -> Self {
        Self::new(name, Relation::AtMost, 0.0, measured, limit, source)
    }

    pub fn at_most(name: impl Into<String>, bound: f64, measured: f64, source: &'static str) -> Self {
        Self::new(name, Relation::AtMost, bound, measured, 0.0, source)
    }

    pub fn at_least(name: impl Into<String>, bound: f64, measured: f64, source: &'static str) -> Self {
        Self::new(name, Relation::AtLeast, bound, measured, 0.0, source)
    }

    /// Records a structural failure, such as an integrator guard trip, as a
    /// failed check.
    pub fn failed(name: impl Into<String>, source: &'static str) -> Self {
        Self::new(name, Relation::Within, 0.0, f64::NAN, 0.0, source)
    }

    pub fn informational(mut self) -> Self {
        self.kind = CheckKind::Informational;
        self
    }

    pub fn with_kind(mut self, kind: CheckKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn is_failure(&self) -> bool {
        self.kind == CheckKind::Asserted && !self.pass
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.kind, self.pass) {
            (CheckKind::Informational, _) => "INFO",
            (CheckKind::Asserted, true) => "PASS",
            (CheckKind::Asserted, false) => "FAIL",
        };
        write!(
            f,
            "[{status}] {}: measured {:.6e}, {} {:.6e} (tol {:.1e}; {})",
            self.name,
            self.measured,
            self.relation.name(),
            self.expected,
            self.tolerance,
            self.source
        )
    }
}

/// True when no asserted check failed.
pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| !c.is_failure())
}
