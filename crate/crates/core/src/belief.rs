//! Belief states and the sojourn-time-aware Bayesian update.
//!
//! After taking action `a`, spending time `τ` in transit and observing `o`,
//!
//! ```text
//! ξ'(s') ∝ G(o|a,s') Σ_s P(s'|s,a) f(τ|s,a,s') ξ(s)
//! ```
//!
//! with the normalizer equal to `P(o|ξ,a,τ)`. Sojourn densities follow the
//! mixed-measure convention of the model (atoms by mass, continuous laws by density).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::PosmdpModel;

/// Normalizers below this are treated as evidence the model cannot produce.
pub const IMPOSSIBLE_EVIDENCE_THRESHOLD: f64 = 1e-300;
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("belief has {found} entries, model has {expected} states")]
    Dimension { expected: usize, found: usize },
    #[error("belief entry {index} = {value} is negative or not finite")]
    InvalidEntry { index: usize, value: f64 },
    #[error("belief sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("impossible evidence: action {action}, sojourn time {tau:?}, observation {observation}")]
    ImpossibleEvidence {
        action: usize,
        tau: Option<f64>,
        observation: usize,
    },
}

/// Probability vector over the hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Validates and renormalizes `probabilities`. Inputs must already sum to 1
    /// within 1e-9; the stored vector then sums to 1 within rounding.
    pub fn new(probabilities: Vec<f64>) -> Result<Self, BeliefError> {
        let sum = Self::checked_sum(&probabilities)?;
        Ok(Self::normalized(probabilities, sum))
    }

    /// Like [`Belief::new`] but keeps the entries bit for bit, for beliefs read
    /// back from files written by this crate.
    pub fn new_unscaled(probabilities: Vec<f64>) -> Result<Self, BeliefError> {
        Self::checked_sum(&probabilities)?;
        Ok(Self(probabilities))
    }

    fn checked_sum(probabilities: &[f64]) -> Result<f64, BeliefError> {
        let mut sum = 0.0;
        for (index, &value) in probabilities.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(BeliefError::InvalidEntry { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(BeliefError::NotNormalized(sum));
        }
        Ok(sum)
    }

    fn normalized(mut probabilities: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            probabilities.iter_mut().for_each(|p| *p /= sum);
        }
        Self(probabilities)
    }

    /// Unit mass on `state`.
    pub fn point(num_states: usize, state: usize) -> Self {
        let mut p = vec![0.0; num_states];
        p[state] = 1.0;
        Self(p)
    }

    pub fn uniform(num_states: usize) -> Self {
        Self(vec![1.0 / num_states as f64; num_states])
    }

    pub fn initial(model: &PosmdpModel) -> Self {
        Self(model.initial_belief().to_vec())
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `⟨ξ, v⟩`
    #[inline]
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(p, x)| p * x).sum()
    }

    /// States with positive probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(s, _)| s)
    }

    fn check_dim(&self, model: &PosmdpModel) -> Result<(), BeliefError> {
        if self.0.len() == model.num_states() {
            Ok(())
        } else {
            Err(BeliefError::Dimension {
                expected: model.num_states(),
                found: self.0.len(),
            })
        }
    }
}

/// `Σ_s ξ(s) P(s'|s,a) f(τ|s,a,s')` for every `s'`.
pub fn predicted_arrival(model: &PosmdpModel, xi: &Belief, a: usize, tau: f64) -> Vec<f64> {
    let ns = model.num_states();
    let at_atom = model.is_atom_time(tau);
    let mut out = vec![0.0; ns];
    for s in xi.support() {
        let weight = xi.0[s];
        for (s_next, &p) in model.transition_row(s, a).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if let Some(d) = model.sojourn(s, a, s_next) {
                out[s_next] += weight * p * d.mixed_density(tau, at_atom);
            }
        }
    }
    out
}

/// Joint density of `(τ, o)` given `(ξ, a)` for every observation: entry `o` is
/// `P(o|ξ,a,τ) = Σ_{s'} G(o|a,s') Σ_s P(s'|s,a) f(τ|s,a,s') ξ(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLikelihood {
    pub values: Vec<f64>,
    pub total: f64,
}

pub fn observation_time_likelihood(model: &PosmdpModel, xi: &Belief, a: usize, tau: f64) -> ObservationLikelihood {
    let arrival = predicted_arrival(model, xi, a, tau);
    let mut values = vec![0.0; model.num_observations()];
    for (s_next, &mass) in arrival.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (o, g) in model.observation_row(a, s_next).iter().enumerate() {
            values[o] += g * mass;
        }
    }
    let total = values.iter().sum();
    ObservationLikelihood { values, total }
}

fn condition(
    model: &PosmdpModel,
    arrival: Vec<f64>,
    a: usize,
    o: usize,
    tau: Option<f64>,
) -> Result<Belief, BeliefError> {
    let mut posterior = arrival;
    for (s_next, v) in posterior.iter_mut().enumerate() {
        *v *= model.observation_prob(a, s_next, o);
    }
    let normalizer: f64 = posterior.iter().sum();
    if !(normalizer >= IMPOSSIBLE_EVIDENCE_THRESHOLD) {
        return Err(BeliefError::ImpossibleEvidence {
            action: a,
            tau,
            observation: o,
        });
    }
    Ok(Belief::normalized(posterior, normalizer))
}

/// Posterior after action `a`, sojourn time `tau` and observation `o`.
pub fn update_with_time(
    model: &PosmdpModel,
    xi: &Belief,
    a: usize,
    tau: f64,
    o: usize,
) -> Result<Belief, BeliefError> {
    xi.check_dim(model)?;
    condition(model, predicted_arrival(model, xi, a, tau), a, o, Some(tau))
}

/// Posterior that ignores the elapsed time (sojourn time integrated out).
pub fn update_without_time(model: &PosmdpModel, xi: &Belief, a: usize, o: usize) -> Result<Belief, BeliefError> {
    xi.check_dim(model)?;
    let ns = model.num_states();
    let mut arrival = vec![0.0; ns];
    for s in xi.support() {
        for (s_next, &p) in model.transition_row(s, a).iter().enumerate() {
            arrival[s_next] += xi.0[s] * p;
        }
    }
    condition(model, arrival, a, o, None)
}
