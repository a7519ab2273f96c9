//! Finite POSMDP models.
//!
//! A [`PosmdpModel`] holds the transition tensor `P(s'|s,a)`, a sojourn law for
//! every reachable `(s, a, s')`, the observation kernel `G(o|a,s')`, the lump-sum
//! and rate rewards, the continuous discount rate and the initial belief. Models
//! are immutable once built; [`PosmdpModel::validate`] checks the modelling
//! assumptions and reports every violation it finds.

mod builtin;
mod document;
mod validate;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distributions::{BetaDensity, DistributionError, SojournDistribution};

pub use builtin::{build_bus_problem, build_bus_problem_with, build_maintenance_problem, BusRewards};
pub use document::{
    BetaKernelDocument, BetaKernelRow, BinsDocument, KernelDocument, ModelDocument, ObservationsDocument, SojournRecord,
};
pub use validate::{ValidationReport, Violation};

/// Version written to and accepted from model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Clamp applied to discretized observation points so beta densities stay finite.
pub const BIN_EDGE_CLAMP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model document is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("`{path}`: expected {expected} entries, found {found}")]
    Shape {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("`{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("`{path}`: {source}")]
    Distribution {
        path: String,
        #[source]
        source: DistributionError,
    },
    #[error("model violates {count} invariant(s):\n{0}", count = .0.violations.len())]
    Validation(ValidationReport),
}

/// How the observation set was declared.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSource {
    Named,
    /// `bins` evenly spaced points on `[0, 1]`.
    Bins(usize),
}

/// How the observation kernel was declared.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSource {
    Dense,
    /// `G(o|a,s') = G(o|a)`, a normalized beta density over the observation bins.
    Beta(Vec<(usize, BetaDensity)>),
}

/// A state space factored into a perfectly observed coordinate and a hidden one.
/// State index is `observable * hidden.len() + hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedObservable {
    pub observable: Vec<String>,
    pub hidden: Vec<String>,
}

impl MixedObservable {
    pub fn state_index(&self, observable: usize, hidden: usize) -> usize {
        observable * self.hidden.len() + hidden
    }
}

/// Transition triple `(s, a, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosmdpModel {
    pub(crate) states: Vec<String>,
    pub(crate) actions: Vec<String>,
    pub(crate) observations: Vec<String>,
    pub(crate) observation_source: ObservationSource,
    /// Per-state admissible action indices, ascending.
    pub(crate) admissible: Vec<Vec<usize>>,
    pub(crate) admissible_declared: bool,
    /// `[s][a][s']`
    pub(crate) transition: Vec<f64>,
    /// `[s][a][s']`
    pub(crate) sojourn: Vec<Option<SojournDistribution>>,
    /// `[a][s'][o]`
    pub(crate) observation_kernel: Vec<f64>,
    pub(crate) kernel_source: KernelSource,
    /// `[s'][o]`
    pub(crate) initial_observation_kernel: Option<Vec<f64>>,
    /// `[s][a]`
    pub(crate) lump_reward: Vec<f64>,
    /// `[s][a][s']`
    pub(crate) rate_reward: Vec<f64>,
    pub(crate) beta: f64,
    pub(crate) initial_belief: Vec<f64>,
    pub(crate) mixed_observable: Option<MixedObservable>,
    pub(crate) initial_value: Option<f64>,
    /// Sorted distinct atom support points over all sojourn laws.
    pub(crate) atom_times: Vec<f64>,
}

impl PosmdpModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn observation_names(&self) -> &[String] {
        &self.observations
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    pub fn admissible_actions(&self, s: usize) -> &[usize] {
        &self.admissible[s]
    }

    pub fn is_admissible(&self, s: usize, a: usize) -> bool {
        self.admissible[s].binary_search(&a).is_ok()
    }

    #[inline]
    fn sas(&self, s: usize, a: usize, s_next: usize) -> usize {
        let n = self.states.len();
        (s * self.actions.len() + a) * n + s_next
    }

    #[inline]
    pub fn transition_prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition[self.sas(s, a, s_next)]
    }

    /// Row `P(·|s,a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.sas(s, a, 0);
        &self.transition[start..start + self.states.len()]
    }

    pub fn sojourn(&self, s: usize, a: usize, s_next: usize) -> Option<&SojournDistribution> {
        self.sojourn[self.sas(s, a, s_next)].as_ref()
    }

    /// Every transition with positive probability.
    pub fn reachable_transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        let (ns, na) = (self.num_states(), self.num_actions());
        (0..ns).flat_map(move |s| {
            (0..na).flat_map(move |a| {
                (0..ns)
                    .filter(move |&s_next| self.transition_prob(s, a, s_next) > 0.0)
                    .map(move |s_next| Transition { s, a, s_next })
            })
        })
    }

    #[inline]
    pub fn observation_prob(&self, a: usize, s_next: usize, o: usize) -> f64 {
        let no = self.observations.len();
        self.observation_kernel[(a * self.states.len() + s_next) * no + o]
    }

    /// Row `G(·|a,s')`.
    pub fn observation_row(&self, a: usize, s_next: usize) -> &[f64] {
        let no = self.observations.len();
        let start = (a * self.states.len() + s_next) * no;
        &self.observation_kernel[start..start + no]
    }

    pub fn initial_observation_kernel(&self) -> Option<&[f64]> {
        self.initial_observation_kernel.as_deref()
    }

    pub fn lump_reward(&self, s: usize, a: usize) -> f64 {
        self.lump_reward[s * self.actions.len() + a]
    }

    pub fn rate_reward(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.rate_reward[self.sas(s, a, s_next)]
    }

    /// Continuous discount rate.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn initial_belief(&self) -> &[f64] {
        &self.initial_belief
    }

    pub fn mixed_observable(&self) -> Option<&MixedObservable> {
        self.mixed_observable.as_ref()
    }

    /// Constant initial α-vector value declared by the model, overriding the
    /// default lower-bound construction.
    pub fn initial_value(&self) -> Option<f64> {
        self.initial_value
    }

    /// Whether `tau` coincides exactly with the support point of some atom in the model.
    #[inline]
    pub fn is_atom_time(&self, tau: f64) -> bool {
        self.atom_times.binary_search_by(|t| t.total_cmp(&tau)).is_ok()
    }

    pub fn atom_times(&self) -> &[f64] {
        &self.atom_times
    }

    /// `f(τ|s,a,s')` under the mixed-measure convention; 0 for unreachable transitions.
    pub fn sojourn_density(&self, s: usize, a: usize, s_next: usize, tau: f64) -> f64 {
        match self.sojourn(s, a, s_next) {
            Some(d) => d.mixed_density(tau, self.is_atom_time(tau)),
            None => 0.0,
        }
    }

    /// Expected stage reward `R(s,a)` for every pair.
    pub fn compute_stage_reward(&self) -> StageRewardTable {
        let (ns, na) = (self.num_states(), self.num_actions());
        let mut values = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                let mut r = self.lump_reward(s, a);
                for s_next in 0..ns {
                    let p = self.transition_prob(s, a, s_next);
                    if p == 0.0 {
                        continue;
                    }
                    let rate = self.rate_reward(s, a, s_next);
                    if rate == 0.0 {
                        continue;
                    }
                    let Some(d) = self.sojourn(s, a, s_next) else {
                        continue;
                    };
                    let accrued = if self.beta > 0.0 {
                        (1.0 - d.expected_discount(self.beta)) / self.beta
                    } else {
                        d.mean()
                    };
                    r += p * rate * accrued;
                }
                values.push(r);
            }
        }
        StageRewardTable {
            values,
            num_actions: na,
        }
    }

    /// SHA-256 of the canonical serialized model, hex encoded.
    pub fn content_hash(&self) -> String {
        let text = self.to_json().expect("model serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(crate) fn rebuild_atom_index(&mut self) {
        let mut atoms: Vec<f64> = self.sojourn.iter().flatten().filter_map(|d| d.atom_time()).collect();
        atoms.sort_by(f64::total_cmp);
        atoms.dedup();
        self.atom_times = atoms;
    }
}

/// Expected reward accrued between two decision epochs, `R(s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRewardTable {
    values: Vec<f64>,
    num_actions: usize,
}

impl StageRewardTable {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    /// `R(·,a)` as an |S|-vector.
    pub fn column(&self, a: usize) -> Vec<f64> {
        self.values.iter().skip(a).step_by(self.num_actions).copied().collect()
    }

    /// `sup |R(s,a)|`.
    pub fn bound(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Minimum over the given pairs.
    pub fn min_over<I: IntoIterator<Item = (usize, usize)>>(&self, pairs: I) -> f64 {
        pairs.into_iter().map(|(s, a)| self.get(s, a)).fold(f64::INFINITY, f64::min)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Parses, builds and validates a model file.
pub fn load_model(bytes: &[u8]) -> Result<PosmdpModel, ModelError> {
    let doc: ModelDocument = serde_json::from_slice(bytes)?;
    let model = PosmdpModel::from_document(doc)?;
    let report = model.validate();
    if report.is_ok() {
        Ok(model)
    } else {
        Err(ModelError::Validation(report))
    }
}
