//! Named residual checks and their aggregate.

use serde::{Deserialize, Serialize};

/// Default cap on the masked fraction of a check.
pub const MASK_CAP: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub masked_fraction: f64,
    /// Informational checks are reported but never fail the report.
    #[serde(skip, default = "yes")]
    pub required: bool,
}

fn yes() -> bool {
    true
}

impl Check {
    /// Passes iff `residual <= tol` and the masked fraction is within the cap.
    /// A NaN residual fails.
    pub fn new(name: impl Into<String>, residual: f64, tol: f64, masked_fraction: f64) -> Self {
        let pass = residual <= tol && masked_fraction <= MASK_CAP;
        Check {
            name: name.into(),
            residual,
            tol,
            pass,
            masked_fraction,
            required: true,
        }
    }

    /// Convergence-ratio check: the residual field is `|ratio - 4|` and the
    /// tolerance `0.5`, i.e. the ratio must lie in `[3.5, 4.5]`.
    pub fn ratio(name: impl Into<String>, ratio: f64, masked_fraction: f64) -> Self {
        Check::new(name, (ratio - 4.0).abs(), 0.5, masked_fraction)
    }

    /// Lower-bound check: passes iff `value >= bound`. Used by negative
    /// controls; the residual field carries `bound / value`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        let r = if value > 0.0 { bound / value } else { f64::INFINITY };
        Check::new(name, r, 1.0, 0.0)
    }

    pub fn informational(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn summary(&self) -> String {
        let status = if self.pass {
            "PASS"
        } else if self.required {
            "FAIL"
        } else {
            "info"
        };
        format!(
            "{status} {:<40} residual={:.3e} tol={:.1e} masked={:.3}",
            self.name, self.residual, self.tol, self.masked_fraction
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Default for VerificationReport {
    fn default() -> Self {
        Self::new()
    }
}

impl VerificationReport {
    pub fn new() -> Self {
        VerificationReport {
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, c: Check) {
        if c.required && !c.pass {
            self.pass = false;
        }
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        for c in other.checks {
            self.push(c);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}
