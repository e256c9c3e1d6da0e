//! Verification reports and the scale-aware residual rule.

use crate::Scalar;
use serde::{Deserialize, Serialize};

/// Wall-clock timer for `elapsed_ms`; reads zero on targets without a clock.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn ms(&self) -> u64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_millis() as u64
        }
        #[cfg(target_arch = "wasm32")]
        {
            0
        }
    }
}

/// Both sides below this magnitude: compare absolutely.
pub const ABS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub status: Status,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    pub samples_run: u64,
    pub rejections: u64,
    pub seed: u64,
    pub elapsed_ms: u64,
    pub detail: String,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// One-line text rendering.
    pub fn to_line(&self) -> String {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        format!(
            "{tag} {:<28} rel={:.3e} abs={:.3e} n={} rej={} {}",
            self.name,
            self.max_rel_residual,
            self.max_abs_residual,
            self.samples_run,
            self.rejections,
            self.detail
        )
    }
}

/// One residual measurement: absolute difference plus the scale it is
/// judged against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub abs: f64,
    pub scale: f64,
}

impl Residual {
    /// `|lhs - rhs|` judged against `max(|lhs|, |rhs|)`.
    pub fn between(lhs: Scalar, rhs: Scalar) -> Self {
        Residual { abs: (lhs - rhs).norm(), scale: lhs.norm().max(rhs.norm()) }
    }

    /// A residual already computed, judged against the largest of `terms`.
    pub fn of_terms(value: Scalar, terms: &[Scalar]) -> Self {
        let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
        Residual { abs: value.norm(), scale }
    }

    /// Relative residual, or the absolute one when the scale is tiny.
    pub fn rel(&self) -> f64 {
        if self.scale < ABS_FLOOR {
            self.abs
        } else {
            self.abs / self.scale
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.rel() <= tol
    }
}

/// Running maxima over many residuals.
#[derive(Debug, Clone, Default)]
pub struct Tally {
    pub max_abs: f64,
    pub max_rel: f64,
    pub samples: u64,
    pub rejections: u64,
    /// Set when some residual was NaN.
    pub poisoned: bool,
}

impl Tally {
    pub fn push(&mut self, r: Residual) {
        if r.abs.is_nan() || r.scale.is_nan() {
            self.poisoned = true;
        }
        self.max_abs = self.max_abs.max(r.abs);
        self.max_rel = self.max_rel.max(r.rel());
    }

    pub fn count(&mut self) {
        self.samples += 1;
    }

    pub fn ok(&self, tol: f64) -> bool {
        !self.poisoned && self.max_rel <= tol
    }

    pub fn into_report(self, name: &str, tol: f64, seed: u64, elapsed_ms: u64, detail: String) -> VerificationReport {
        let status = if self.ok(tol) { Status::Pass } else { Status::Fail };
        VerificationReport {
            name: name.to_string(),
            status,
            max_abs_residual: self.max_abs,
            max_rel_residual: if self.poisoned { f64::INFINITY } else { self.max_rel },
            samples_run: self.samples,
            rejections: self.rejections,
            seed,
            elapsed_ms,
            detail,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::re;

    #[test]
    fn tiny_sides_use_absolute() {
        let r = Residual::between(re(1e-16), re(-1e-16));
        assert_eq!(r.rel(), 2e-16);
        let r = Residual::between(re(100.0), re(101.0));
        assert!((r.rel() - 1.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn status_serializes_lowercase() {
        let s = serde_json::to_string(&Status::Skipped).unwrap();
        assert_eq!(s, "\"skipped\"");
    }
}
