//! Verification reports: one line per check, `id status measured bound tol`.

use std::fmt;

/// One measured check.
#[derive(Debug, Clone)]
pub struct Check {
    pub id: String,
    pub pass: bool,
    pub measured: f64,
    /// The bound or expected value the measurement is held against.
    pub bound: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(id: impl Into<String>, pass: bool, measured: f64, bound: f64, tol: f64) -> Self {
        Self {
            id: id.into(),
            pass,
            measured,
            bound,
            tol,
        }
    }

    /// measured ≤ bound·(1+tol).
    pub fn le(id: impl Into<String>, measured: f64, bound: f64, tol: f64) -> Self {
        Self::new(id, measured <= bound * (1.0 + tol), measured, bound, tol)
    }

    /// |measured - expected| ≤ tol (absolute).
    pub fn close(id: impl Into<String>, measured: f64, expected: f64, tol: f64) -> Self {
        Self::new(id, (measured - expected).abs() <= tol, measured, expected, tol)
    }

    /// measured ≥ bound (with `tol` slack).
    pub fn ge(id: impl Into<String>, measured: f64, bound: f64, tol: f64) -> Self {
        Self::new(id, measured >= bound - tol, measured, bound, tol)
    }

    pub fn flag(id: impl Into<String>, pass: bool) -> Self {
        Self::new(id, pass, if pass { 1.0 } else { 0.0 }, 1.0, 0.0)
    }
}

/// Deterministic report for one suite run.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<Check>,
    /// Config/seed provenance line.
    pub provenance: String,
    pub runtime_seconds: f64,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>, provenance: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            checks: Vec::new(),
            provenance: provenance.into(),
            runtime_seconds: 0.0,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Overall pass ⇔ all checks pass.
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# bctl {} suite={} {}",
            crate::VERSION,
            self.suite,
            self.provenance
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{} {} {} {} {}",
                c.id,
                if c.pass { "pass" } else { "FAIL" },
                c.measured,
                c.bound,
                c.tol
            )?;
        }
        writeln!(
            f,
            "overall {} checks={} runtime={:.2}s",
            if self.pass() { "pass" } else { "FAIL" },
            self.checks.len(),
            self.runtime_seconds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_pass_iff_all_pass() {
        let mut r = VerificationReport::new("demo", "seed=1");
        r.push(Check::le("a", 1.0, 2.0, 0.0));
        assert!(r.pass());
        r.push(Check::le("b", 3.0, 2.0, 0.0));
        assert!(!r.pass());
        let text = format!("{r}");
        assert!(text.contains("a pass 1 2 0"));
        assert!(text.contains("b FAIL 3 2 0"));
        assert!(text.contains("overall FAIL"));
    }
}
