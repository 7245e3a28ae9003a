//! Inexactness schedules: which accuracy each forward (`δ`) and backward
//! (`ε`) solve is asked for at stage `t`, iteration `k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::Budget;

/// Accuracy used for solves that are meant to be exact.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("invalid schedule: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Both passes get the relative error `rel_err`, measured against each
    /// subproblem's own optimum.
    Relative,
    /// Forward solves get `rel_err` relative to their optimum; backward
    /// solves get the absolute error from [`abs_err`], using the value the
    /// forward pass recorded at the same trial point.
    Absolute,
    /// `δ ≡ constant_delta_bar`, `ε ≡ constant_eps_bar` at every stage and
    /// iteration.
    ConstantBounded,
    /// `1e-12` everywhere.
    #[default]
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub mode: ScheduleMode,
    pub eps_bar: f64,
    pub eps0: f64,
    /// Forward accuracy at stage 1.
    #[serde(default = "default_delta1")]
    pub delta1: f64,
    #[serde(default)]
    pub constant_delta_bar: f64,
    #[serde(default)]
    pub constant_eps_bar: f64,
}

fn default_delta1() -> f64 {
    EXACT_TOL
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self::exact()
    }
}

impl ScheduleSpec {
    pub fn exact() -> Self {
        Self {
            mode: ScheduleMode::Exact,
            eps_bar: EXACT_TOL,
            eps0: EXACT_TOL,
            delta1: EXACT_TOL,
            constant_delta_bar: 0.0,
            constant_eps_bar: 0.0,
        }
    }

    pub fn relative(eps_bar: f64, eps0: f64) -> Self {
        Self {
            mode: ScheduleMode::Relative,
            eps_bar,
            eps0,
            ..Self::exact()
        }
    }

    pub fn absolute(eps_bar: f64, eps0: f64) -> Self {
        Self {
            mode: ScheduleMode::Absolute,
            ..Self::relative(eps_bar, eps0)
        }
    }

    pub fn constant(delta_bar: f64, eps_bar: f64) -> Self {
        Self {
            mode: ScheduleMode::ConstantBounded,
            constant_delta_bar: delta_bar,
            constant_eps_bar: eps_bar,
            ..Self::exact()
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let all = [
            self.eps_bar,
            self.eps0,
            self.delta1,
            self.constant_delta_bar,
            self.constant_eps_bar,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ScheduleError::Invalid("all entries must be finite and nonnegative".into()));
        }
        if matches!(self.mode, ScheduleMode::Relative | ScheduleMode::Absolute)
            && !(self.eps0 <= self.eps_bar && self.eps_bar < 1.0)
        {
            return Err(ScheduleError::Invalid(format!(
                "need eps0 <= eps_bar < 1, got eps0 = {}, eps_bar = {}",
                self.eps0, self.eps_bar
            )));
        }
        Ok(())
    }

    /// Budget for the forward solve at stage `t`, iteration `k`.
    pub fn forward_budget(&self, t: usize, k: usize, horizon: usize) -> Budget {
        if t == 1 {
            return Budget::Absolute(self.delta1);
        }
        match self.mode {
            ScheduleMode::Relative | ScheduleMode::Absolute => Budget::Relative(rel_err(t, k, horizon, self)),
            ScheduleMode::ConstantBounded => Budget::Absolute(self.constant_delta_bar),
            ScheduleMode::Exact => Budget::Absolute(EXACT_TOL),
        }
    }

    /// Budget for the backward solves at stage `t ≥ 2`, iteration `k`.
    /// `prev_value` is the forward pass value at the same trial point.
    pub fn backward_budget(&self, t: usize, k: usize, horizon: usize, prev_value: f64) -> Budget {
        match self.mode {
            ScheduleMode::Relative => Budget::Relative(rel_err(t, k, horizon, self)),
            ScheduleMode::Absolute => Budget::Absolute(abs_err(t, k, horizon, self, prev_value)),
            ScheduleMode::ConstantBounded => Budget::Absolute(self.constant_eps_bar),
            ScheduleMode::Exact => Budget::Absolute(EXACT_TOL),
        }
    }
}

/// `(1/k)·[ε̄ − (ε̄ − ε₀)(t − 2)/(T − 2)]`, or `ε̄/k` when `T = 2`.
///
/// Exact mode returns `1e-12`, and constant mode its constant `ε̄`.
///
/// # Panics
/// If `t < 2`, `t > T` or `k = 0`.
pub fn rel_err(t: usize, k: usize, horizon: usize, spec: &ScheduleSpec) -> f64 {
    assert!(t >= 2 && t <= horizon, "stage {t} outside 2..={horizon}");
    assert!(k >= 1, "iterations start at 1");
    match spec.mode {
        ScheduleMode::Exact => EXACT_TOL,
        ScheduleMode::ConstantBounded => spec.constant_eps_bar,
        ScheduleMode::Relative | ScheduleMode::Absolute => {
            let inner = if horizon == 2 {
                spec.eps_bar
            } else {
                spec.eps_bar - (spec.eps_bar - spec.eps0) / (horizon - 2) as f64 * (t - 2) as f64
            };
            inner / k as f64
        }
    }
}

/// `max(1, |prev_value|)·rel_err(t, k)`.
pub fn abs_err(t: usize, k: usize, horizon: usize, spec: &ScheduleSpec, prev_value: f64) -> f64 {
    prev_value.abs().max(1.0) * rel_err(t, k, horizon, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tabulated_values() {
        let s = ScheduleSpec::relative(0.1, 1e-12);
        assert!((rel_err(2, 1, 6, &s) - 0.1).abs() <= 1e-12);
        assert!((rel_err(6, 1, 6, &s) - 1e-12).abs() <= 1e-12);
        assert!((rel_err(4, 2, 6, &s) - 0.025).abs() <= 1e-12);
        assert_eq!(rel_err(2, 4, 2, &s), 0.025);
    }

    #[test]
    fn absolute_values() {
        let s = ScheduleSpec::absolute(0.01, 0.01);
        assert!((abs_err(2, 1, 3, &s, -3.2) - 0.032).abs() < 1e-15);
        assert_eq!(abs_err(2, 1, 3, &s, 0.5), 0.01);
        assert_eq!(abs_err(2, 1, 3, &s, 0.0), 0.01);
    }

    #[test]
    fn exact_mode_everywhere() {
        let s = ScheduleSpec::exact();
        for t in 2..=5 {
            assert_eq!(rel_err(t, 3, 5, &s), 1e-12);
            assert_eq!(s.backward_budget(t, 3, 5, 100.0), Budget::Absolute(1e-12));
        }
        assert_eq!(s.forward_budget(1, 1, 5), Budget::Absolute(1e-12));
    }

    #[test]
    fn validation() {
        assert!(ScheduleSpec::relative(0.1, 0.2).validate().is_err());
        assert!(ScheduleSpec::relative(1.0, 0.2).validate().is_err());
        assert!(ScheduleSpec::relative(0.1, 1e-12).validate().is_ok());
        assert!(ScheduleSpec::constant(-0.1, 0.1).validate().is_err());
    }

    #[test]
    #[should_panic]
    fn stage_one_is_a_contract_violation() {
        rel_err(1, 1, 3, &ScheduleSpec::relative(0.1, 0.01));
    }

    proptest! {
        #[test]
        fn monotone_and_vanishing(eps_bar in 1e-6f64..0.99, ratio in 0.0f64..1.0, horizon in 2usize..12, k in 1usize..50) {
            let s = ScheduleSpec::relative(eps_bar, eps_bar * ratio);
            for t in 2..=horizon {
                let v = rel_err(t, k, horizon, &s);
                prop_assert!(v >= s.eps0 / k as f64 - 1e-15 && v <= s.eps_bar / k as f64 + 1e-15);
                prop_assert!(rel_err(t, k + 1, horizon, &s) <= v);
                if t < horizon {
                    prop_assert!(rel_err(t + 1, k, horizon, &s) <= v + 1e-15);
                }
                prop_assert!(rel_err(t, k * 1000, horizon, &s) <= eps_bar / 1000.0 / k as f64 + 1e-15);
            }
        }
    }
}
