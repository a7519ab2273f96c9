//! Point-based value iteration over a fixed belief/sojourn sample bank.
//!
//! The value function is a finite set of α-vectors; [`backup`] applies the
//! importance-weighted Bellman operator at one belief, [`perseus_update`] runs
//! one randomized improvement pass over the bank's beliefs and [`solve`] repeats
//! passes until the sup-norm change over those beliefs drops below ε.

mod backup;
mod perseus;
mod policy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::Belief;
use crate::model::PosmdpModel;
use crate::sampler::SampleBank;

pub use backup::{alpha_given_a_tau_o, backup, candidate_actions, BackupKernel};
pub use perseus::{
    perseus_update, solve, solve_with_progress, IterationRecord, SolveOutcome, SolverConfig, DEFAULT_MAX_ITERS,
    DEFAULT_RELATIVE_EPSILON,
};
pub use policy::{Policy, PolicyError};

/// Vectors within this distance (pointwise) of one already kept are dropped.
pub const DUPLICATE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("value function has no vectors")]
    EmptyValueFunction,
    #[error("α-vector {index} has {found} entries, expected {expected}")]
    Dimension { index: usize, expected: usize, found: usize },
    #[error("α-vector {index} has a non-finite entry")]
    NonFinite { index: usize },
    #[error("convergence threshold must be finite and > 0, got {0}")]
    InvalidEpsilon(f64),
    #[error(
        "initial value bound needs a discount factor below 1 but the samples give λ = {lambda}; \
         declare `initial_value` in the model to supply a constant initial α-vector instead"
    )]
    DiscountFactorTooLarge { lambda: f64 },
}

/// A hyperplane over the belief simplex, tagged with the action whose backup produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub action: usize,
    pub values: Vec<f64>,
}

impl AlphaVector {
    pub fn new(action: usize, values: Vec<f64>) -> Self {
        Self { action, values }
    }

    #[inline]
    pub fn dot(&self, xi: &Belief) -> f64 {
        xi.dot(&self.values)
    }

    pub fn approx_eq(&self, other: &AlphaVector, tol: f64) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(x, y)| (x - y).abs() <= tol)
    }
}

/// Piecewise-linear convex value function `V(ξ) = max_α ⟨ξ, α⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    vectors: Vec<AlphaVector>,
}

impl ValueFunction {
    pub fn new(vectors: Vec<AlphaVector>) -> Result<Self, SolverError> {
        let Some(first) = vectors.first() else {
            return Err(SolverError::EmptyValueFunction);
        };
        let expected = first.values.len();
        for (index, v) in vectors.iter().enumerate() {
            if v.values.len() != expected {
                return Err(SolverError::Dimension {
                    index,
                    expected,
                    found: v.values.len(),
                });
            }
            if v.values.iter().any(|x| !x.is_finite()) {
                return Err(SolverError::NonFinite { index });
            }
        }
        Ok(Self { vectors })
    }

    /// A single vector with every entry equal to `value`, tagged with action 0.
    pub fn constant(num_states: usize, value: f64) -> Self {
        Self {
            vectors: vec![AlphaVector::new(0, vec![value; num_states])],
        }
    }

    pub fn vectors(&self) -> &[AlphaVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.vectors[0].values.len()
    }

    /// Index of the maximizing vector; the lowest index wins ties.
    pub fn best_index(&self, xi: &Belief) -> usize {
        let mut best = 0;
        let mut best_value = f64::NEG_INFINITY;
        for (i, v) in self.vectors.iter().enumerate() {
            let x = v.dot(xi);
            if x > best_value {
                best = i;
                best_value = x;
            }
        }
        best
    }

    pub fn value_at(&self, xi: &Belief) -> f64 {
        self.vectors.iter().map(|v| v.dot(xi)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn action_at(&self, xi: &Belief) -> usize {
        self.vectors[self.best_index(xi)].action
    }

    /// Adds `alpha` unless a vector within [`DUPLICATE_TOL`] is already present.
    pub(crate) fn insert_distinct(&mut self, alpha: AlphaVector) -> bool {
        if self.vectors.iter().any(|v| v.approx_eq(&alpha, DUPLICATE_TOL)) {
            return false;
        }
        self.vectors.push(alpha);
        true
    }

    pub(crate) fn empty() -> Self {
        Self { vectors: Vec::new() }
    }
}

/// The lower-bound initial value function: one constant vector `M / (1 - λ)`
/// with `M = min R(s,a)` and `λ` the smallest (M > 0) or largest (M < 0)
/// importance ratio over the bank's sojourn times.
pub fn initial_value_function(model: &PosmdpModel, bank: &SampleBank) -> Result<ValueFunction, SolverError> {
    let ns = model.num_states();
    let rewards = model.compute_stage_reward();
    let pairs = (0..ns).flat_map(|s| model.admissible_actions(s).iter().map(move |&a| (s, a)));
    let m = rewards.min_over(pairs);
    if m == 0.0 {
        return Ok(ValueFunction::constant(ns, 0.0));
    }
    let pick = |xs: &mut dyn Iterator<Item = f64>| {
        if m > 0.0 {
            xs.fold(f64::INFINITY, f64::min)
        } else {
            xs.fold(f64::NEG_INFINITY, f64::max)
        }
    };
    let lambda = if bank.times().is_empty() {
        let beta = model.beta();
        pick(&mut model.reachable_transitions().filter_map(|t| {
            model.sojourn(t.s, t.a, t.s_next).map(|d| d.expected_discount(beta))
        }))
    } else {
        pick(&mut bank.importance_ratios(model).into_iter())
    };
    if !(lambda < 1.0) {
        return Err(SolverError::DiscountFactorTooLarge { lambda });
    }
    Ok(ValueFunction::constant(ns, m / (1.0 - lambda)))
}

/// The model's declared constant initial vector if any, else [`initial_value_function`].
pub fn starting_value_function(model: &PosmdpModel, bank: &SampleBank) -> Result<ValueFunction, SolverError> {
    match model.initial_value() {
        Some(c) => Ok(ValueFunction::constant(model.num_states(), c)),
        None => initial_value_function(model, bank),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bus_problem, build_bus_problem_with, build_maintenance_problem, BusRewards};
    use crate::sampler::collect;

    fn b(p: &[f64]) -> Belief {
        Belief::new(p.to_vec()).unwrap()
    }

    #[test]
    fn value_and_action_ties_go_to_lowest_index() {
        let v = ValueFunction::new(vec![
            AlphaVector::new(1, vec![1.0, 0.0]),
            AlphaVector::new(0, vec![0.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(v.value_at(&b(&[0.5, 0.5])), 0.5);
        assert_eq!(v.action_at(&b(&[0.5, 0.5])), 1);
        assert_eq!(v.action_at(&b(&[0.4, 0.6])), 0);
    }

    #[test]
    fn constant_shift_moves_value_not_action() {
        let base = vec![
            AlphaVector::new(0, vec![3.0, -1.0, 0.5]),
            AlphaVector::new(1, vec![0.0, 2.0, 0.0]),
        ];
        let shifted: Vec<_> = base
            .iter()
            .map(|v| AlphaVector::new(v.action, v.values.iter().map(|x| x + 7.5).collect()))
            .collect();
        let (v, w) = (ValueFunction::new(base).unwrap(), ValueFunction::new(shifted).unwrap());
        for p in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0], [0.1, 0.8, 0.1]] {
            let xi = b(&p);
            assert!((w.value_at(&xi) - v.value_at(&xi) - 7.5).abs() < 1e-12);
            assert_eq!(w.action_at(&xi), v.action_at(&xi));
        }
    }

    #[test]
    fn rejects_malformed_value_functions() {
        assert_eq!(ValueFunction::new(vec![]), Err(SolverError::EmptyValueFunction));
        let bad = vec![AlphaVector::new(0, vec![1.0]), AlphaVector::new(0, vec![1.0, 2.0])];
        assert!(matches!(ValueFunction::new(bad), Err(SolverError::Dimension { index: 1, .. })));
        let nan = vec![AlphaVector::new(0, vec![f64::NAN])];
        assert_eq!(ValueFunction::new(nan), Err(SolverError::NonFinite { index: 0 }));
    }

    #[test]
    fn duplicate_vectors_are_suppressed() {
        let mut v = ValueFunction::empty();
        assert!(v.insert_distinct(AlphaVector::new(0, vec![1.0, 2.0])));
        assert!(!v.insert_distinct(AlphaVector::new(1, vec![1.0 + 5e-10, 2.0])));
        assert!(v.insert_distinct(AlphaVector::new(1, vec![1.0 + 5e-9, 2.0])));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn zero_minimum_reward_gives_zero_vector() {
        let m = build_bus_problem();
        let bank = collect(&m, 200, 1);
        let v = initial_value_function(&m, &bank).unwrap();
        assert_eq!(v.vectors(), &[AlphaVector::new(0, vec![0.0; 15])]);
    }

    #[test]
    fn negative_rewards_use_the_largest_ratio() {
        let m = build_bus_problem_with(BusRewards::TimeCost);
        // Without samples the bound falls back to the largest expected discount.
        let bank = collect(&m, 1, 1);
        let v = initial_value_function(&m, &bank).unwrap();
        let r = m.compute_stage_reward();
        let min_r = r.values().iter().copied().fold(f64::INFINITY, f64::min);
        let lambda = m
            .reachable_transitions()
            .map(|t| m.sojourn(t.s, t.a, t.s_next).unwrap().expected_discount(0.02))
            .fold(f64::NEG_INFINITY, f64::max);
        let expected = min_r / (1.0 - lambda);
        assert!(v.vectors()[0].values.iter().all(|x| (x - expected).abs() < 1e-9 * expected.abs()));
    }

    #[test]
    fn ratio_above_one_is_an_error() {
        // The dose atom at τ = 3 carries little proposal mass, so e^{-0.03}/D(3) > 1.
        let m = build_maintenance_problem(10).unwrap();
        let bank = collect(&m, 400, 4);
        assert!(matches!(
            initial_value_function(&m, &bank),
            Err(SolverError::DiscountFactorTooLarge { lambda }) if lambda > 1.0
        ));
        let v = starting_value_function(&m, &bank).unwrap();
        assert_eq!(v.vectors()[0].values, vec![-1e6; 4]);
    }
}
