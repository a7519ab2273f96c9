//! Semantic checks on a constructed model.

use std::fmt;

use super::PosmdpModel;

const ROW_SUM_TOL: f64 = 1e-9;
const BELIEF_SUM_TOL: f64 = 1e-12;
/// Minimum probability of not having left `(s, a)` at the probe time.
const SOJOURN_GAP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveDiscountRate { beta: f64 },
    EmptyAdmissibleSet { s: usize },
    NegativeTransition { s: usize, a: usize, s_next: usize, value: f64 },
    TransitionRowSum { s: usize, a: usize, sum: f64 },
    MissingSojourn { s: usize, a: usize, s_next: usize },
    InfiniteSojournMean { s: usize, a: usize, s_next: usize },
    /// No positive time exists before which the process leaves `(s, a)` with
    /// probability bounded away from one.
    InstantaneousTransitions { s: usize, a: usize, mass: f64 },
    NegativeObservation { a: usize, s_next: usize, o: usize, value: f64 },
    ObservationRowSum { a: usize, s_next: usize, sum: f64 },
    InitialObservationRowSum { s_next: usize, sum: f64 },
    NonFiniteReward { s: usize, a: usize },
    NegativeBelief { s: usize, value: f64 },
    InitialBeliefSum { sum: f64 },
    NonFiniteInitialValue { value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match *self {
            NonPositiveDiscountRate { beta } => write!(f, "discount rate beta = {beta} must be finite and > 0"),
            EmptyAdmissibleSet { s } => write!(f, "state {s} has no admissible action"),
            NegativeTransition { s, a, s_next, value } => {
                write!(f, "transition P({s_next}|{s},{a}) = {value} is negative or not finite")
            }
            TransitionRowSum { s, a, sum } => write!(f, "transition row (s={s}, a={a}) sums to {sum}"),
            MissingSojourn { s, a, s_next } => {
                write!(f, "no sojourn distribution for reachable transition (s={s}, a={a}, s'={s_next})")
            }
            InfiniteSojournMean { s, a, s_next } => {
                write!(f, "sojourn distribution for (s={s}, a={a}, s'={s_next}) has no finite mean")
            }
            InstantaneousTransitions { s, a, mass } => write!(
                f,
                "(s={s}, a={a}) leaves with probability {mass} before any positive time"
            ),
            NegativeObservation { a, s_next, o, value } => {
                write!(f, "observation G({o}|{a},{s_next}) = {value} is negative or not finite")
            }
            ObservationRowSum { a, s_next, sum } => {
                write!(f, "observation row (a={a}, s'={s_next}) sums to {sum}")
            }
            InitialObservationRowSum { s_next, sum } => write!(f, "g0 row s'={s_next} sums to {sum}"),
            NonFiniteReward { s, a } => write!(f, "reward for (s={s}, a={a}) is not finite"),
            NegativeBelief { s, value } => write!(f, "initial belief entry {s} = {value} is negative"),
            InitialBeliefSum { sum } => write!(f, "initial belief sums to {sum}"),
            NonFiniteInitialValue { value } => write!(f, "initial_value = {value} is not finite"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "0 violations");
        }
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl PosmdpModel {
    /// Checks every structural invariant plus the regularity, bounded-reward and
    /// finite-mean assumptions. Violations are collected, not short-circuited.
    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        let (ns, na, no) = (self.num_states(), self.num_actions(), self.num_observations());

        if !(self.beta.is_finite() && self.beta > 0.0) {
            out.push(Violation::NonPositiveDiscountRate { beta: self.beta });
        }

        for s in 0..ns {
            if self.admissible[s].is_empty() {
                out.push(Violation::EmptyAdmissibleSet { s });
            }
            for &a in &self.admissible[s] {
                let row = self.transition_row(s, a);
                let mut sum = 0.0;
                for (s_next, &p) in row.iter().enumerate() {
                    if !(p.is_finite() && p >= 0.0) {
                        out.push(Violation::NegativeTransition { s, a, s_next, value: p });
                        continue;
                    }
                    sum += p;
                    if p > 0.0 {
                        match self.sojourn(s, a, s_next) {
                            None => out.push(Violation::MissingSojourn { s, a, s_next }),
                            Some(d) if !d.mean().is_finite() => {
                                out.push(Violation::InfiniteSojournMean { s, a, s_next })
                            }
                            Some(_) => {}
                        }
                    }
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(Violation::TransitionRowSum { s, a, sum });
                } else if let Some(mass) = self.early_exit_mass(s, a) {
                    if mass > 1.0 - SOJOURN_GAP_EPS {
                        out.push(Violation::InstantaneousTransitions { s, a, mass });
                    }
                }
                let r = self.lump_reward(s, a);
                let rates_ok = (0..ns).all(|s_next| self.rate_reward(s, a, s_next).is_finite());
                if !r.is_finite() || !rates_ok {
                    out.push(Violation::NonFiniteReward { s, a });
                }
            }
        }

        for a in 0..na {
            for s_next in 0..ns {
                let row = self.observation_row(a, s_next);
                let mut sum = 0.0;
                for (o, &g) in row.iter().enumerate() {
                    if !(g.is_finite() && g >= 0.0) {
                        out.push(Violation::NegativeObservation { a, s_next, o, value: g });
                    } else {
                        sum += g;
                    }
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(Violation::ObservationRowSum { a, s_next, sum });
                }
            }
        }

        if let Some(g0) = &self.initial_observation_kernel {
            for (s_next, row) in g0.chunks(no).enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|g| !(*g >= 0.0)) {
                    out.push(Violation::InitialObservationRowSum { s_next, sum });
                }
            }
        }

        let mut sum = 0.0;
        for (s, &p) in self.initial_belief.iter().enumerate() {
            if !(p >= 0.0 && p.is_finite()) {
                out.push(Violation::NegativeBelief { s, value: p });
            } else {
                sum += p;
            }
        }
        if (sum - 1.0).abs() > BELIEF_SUM_TOL {
            out.push(Violation::InitialBeliefSum { sum });
        }

        if let Some(value) = self.initial_value {
            if !value.is_finite() {
                out.push(Violation::NonFiniteInitialValue { value });
            }
        }

        ValidationReport { violations: out }
    }

    /// `Σ_{s'} P(s'|s,a) F(τ*|s,a,s')` at a probe time `τ*` below every support
    /// point: half the smallest atom, or a thousandth of the smallest continuous mean.
    fn early_exit_mass(&self, s: usize, a: usize) -> Option<f64> {
        let ns = self.num_states();
        let probe = (0..ns)
            .filter(|&s_next| self.transition_prob(s, a, s_next) > 0.0)
            .filter_map(|s_next| self.sojourn(s, a, s_next))
            .map(|d| match d.atom_time() {
                Some(t) => 0.5 * t,
                None => 1e-3 * d.mean(),
            })
            .fold(f64::INFINITY, f64::min);
        if !probe.is_finite() {
            return None;
        }
        Some(
            (0..ns)
                .filter_map(|s_next| {
                    let p = self.transition_prob(s, a, s_next);
                    (p > 0.0).then(|| self.sojourn(s, a, s_next).map_or(0.0, |d| p * d.cdf(probe)))
                })
                .sum(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bus_problem, build_maintenance_problem};

    #[test]
    fn builtins_validate_cleanly() {
        assert_eq!(build_bus_problem().validate(), ValidationReport::default());
        assert_eq!(build_maintenance_problem(100).unwrap().validate(), ValidationReport::default());
        assert_eq!(build_bus_problem().validate().to_string(), "0 violations");
    }

    #[test]
    fn short_transition_row_is_named() {
        let mut m = build_bus_problem();
        let i = m.sas(2, 1, 14);
        assert_eq!(m.transition[i], 1.0);
        m.transition[i] = 0.9;
        let report = m.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::TransitionRowSum { s: 2, a: 1, sum } if (sum - 0.9).abs() < 1e-12)));
        assert!(report.to_string().contains("(s=2, a=1)"));
    }

    #[test]
    fn missing_sojourn_is_named() {
        let mut m = build_bus_problem();
        let i = m.sas(4, 0, 7);
        m.sojourn[i] = None;
        let report = m.validate();
        assert_eq!(report.violations, vec![Violation::MissingSojourn { s: 4, a: 0, s_next: 7 }]);
    }

    #[test]
    fn bad_belief_and_rate() {
        let mut m = build_bus_problem();
        m.initial_belief[0] = 0.5;
        m.beta = 0.0;
        let report = m.validate();
        assert!(report.violations.contains(&Violation::NonPositiveDiscountRate { beta: 0.0 }));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::InitialBeliefSum { .. })));
    }

    #[test]
    fn reset_rows_split_evenly() {
        let m = build_bus_problem();
        for i in 0..3 {
            let s = 12 + i;
            for a in 0..2 {
                let row = m.transition_row(s, a);
                assert_eq!(&row[..3], &[1.0 / 3.0; 3]);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
