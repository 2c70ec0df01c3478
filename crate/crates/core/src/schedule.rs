//! Decaying step-size sequences for the local update (α) and averaging (η) steps.

use std::fmt;

/// α(i) = α₀/(i+1)^τ₁ and η(i) = η₀/(i+1)^τ₂.
///
/// Convergence needs α to decay faster than η, but not by too much:
/// 1 ≥ τ₁ > τ₂ > 0.5 and τ₁ − τ₂ < 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub alpha0: f64,
    pub tau1: f64,
    pub eta0: f64,
    pub tau2: f64,
}

/// One violated clause of the decay-rate conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleViolation {
    /// τ₁ ≤ 1
    Tau1AtMostOne,
    /// τ₁ > τ₂
    Tau1AboveTau2,
    /// τ₂ > 0.5
    Tau2AboveHalf,
    /// τ₁ − τ₂ < 0.5
    RateGapBelowHalf,
    /// α₀ > 0
    Alpha0Positive,
    /// η₀ > 0
    Eta0Positive,
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Tau1AtMostOne => "tau1 <= 1",
            Self::Tau1AboveTau2 => "tau1 > tau2",
            Self::Tau2AboveHalf => "tau2 > 0.5",
            Self::RateGapBelowHalf => "tau1 - tau2 < 0.5",
            Self::Alpha0Positive => "alpha0 > 0",
            Self::Eta0Positive => "eta0 > 0",
        };
        write!(f, "{s} fails")
    }
}

impl StepSchedule {
    pub fn new(alpha0: f64, tau1: f64, eta0: f64, tau2: f64) -> Self {
        Self {
            alpha0,
            tau1,
            eta0,
            tau2,
        }
    }

    /// α₀ = 1, τ₁ = 1, τ₂ = 0.505, η₀ = 0.5/d_max.
    pub fn reference(max_degree: usize) -> Self {
        Self::new(1.0, 1.0, default_eta0(max_degree), 0.505)
    }

    #[inline]
    pub fn alpha_at(&self, i: u64) -> f64 {
        self.alpha0 / ((i + 1) as f64).powf(self.tau1)
    }

    #[inline]
    pub fn eta_at(&self, i: u64) -> f64 {
        self.eta0 / ((i + 1) as f64).powf(self.tau2)
    }

    /// Every violated clause, in a fixed order. Empty means the schedule is valid.
    pub fn validate(&self) -> Vec<ScheduleViolation> {
        let mut v = Vec::new();
        let checks = [
            (self.tau1 <= 1.0, ScheduleViolation::Tau1AtMostOne),
            (self.tau1 > self.tau2, ScheduleViolation::Tau1AboveTau2),
            (self.tau2 > 0.5, ScheduleViolation::Tau2AboveHalf),
            (
                self.tau1 - self.tau2 < 0.5,
                ScheduleViolation::RateGapBelowHalf,
            ),
            (self.alpha0 > 0.0, ScheduleViolation::Alpha0Positive),
            (self.eta0 > 0.0, ScheduleViolation::Eta0Positive),
        ];
        for (ok, clause) in checks {
            if !ok {
                v.push(clause);
            }
        }
        v
    }

    /// η(0)·d_max ≥ 1 lets early averaging steps amplify disagreement.
    pub fn averaging_warning(&self, max_degree: usize) -> Option<String> {
        let product = self.eta_at(0) * max_degree as f64;
        (product >= 1.0).then(|| {
            format!(
                "eta(0) * d_max = {product} >= 1: early averaging steps may amplify disagreement"
            )
        })
    }
}

/// η₀ = 0.5/d_max.
pub fn default_eta0(max_degree: usize) -> f64 {
    0.5 / max_degree.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ScheduleViolation::*;

    #[test]
    fn initial_values() {
        let s = StepSchedule::new(2.0, 1.0, 0.3, 0.6);
        assert_eq!(s.alpha_at(0), 2.0);
        assert_eq!(s.eta_at(0), 0.3);
        let s = StepSchedule::new(1.0, 1.0, 0.1, 0.505);
        assert!((s.alpha_at(99) - 0.01).abs() < 1e-15);
        let via_log = 0.1 * (-0.505 * 4f64.ln()).exp();
        assert!((s.eta_at(3) - via_log).abs() < 1e-15);
    }

    #[test]
    fn validator_clauses() {
        assert!(StepSchedule::new(1.0, 1.0, 0.1, 0.505)
            .validate()
            .is_empty());
        assert!(StepSchedule::new(1.0, 0.6, 0.1, 0.55).validate().is_empty());
        assert_eq!(
            StepSchedule::new(1.0, 1.0, 0.1, 0.4).validate(),
            vec![Tau2AboveHalf, RateGapBelowHalf]
        );
        assert_eq!(
            StepSchedule::new(1.0, 0.5, 0.1, 0.505).validate(),
            vec![Tau1AboveTau2]
        );
        assert_eq!(
            StepSchedule::new(0.0, 1.0, 0.1, 0.505).validate(),
            vec![Alpha0Positive]
        );
        assert_eq!(
            StepSchedule::new(1.0, 1.2, 0.0, 0.8).validate(),
            vec![Tau1AtMostOne, Eta0Positive]
        );
    }

    #[test]
    fn averaging_warning_threshold() {
        assert!(StepSchedule::reference(10).averaging_warning(10).is_none());
        let s = StepSchedule::new(1.0, 1.0, 0.1, 0.505);
        assert!(s.averaging_warning(10).is_some());
        assert_eq!(default_eta0(4), 0.125);
    }
}
