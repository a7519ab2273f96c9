//! Exploration-phase sample collection and the importance-sampling proposal.
//!
//! [`collect`] explores the model with uniformly random actions, recording every
//! visited belief, every sojourn time drawn along the way and which transition
//! produced it. The normalized transition counts `w(s,a,s')` define the proposal
//!
//! ```text
//! D(τ) = Σ_{s,a,s'} w(s,a,s') f(τ|s,a,s')
//! ```
//!
//! from which the collected times are (by construction) a sample, so a single pool
//! of times can estimate `E[e^{-βτ} g(τ)]` for every transition via the ratio
//! `e^{-βτ} f(τ|s,a,s') / D(τ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{observation_time_likelihood, update_with_time, Belief};
use crate::distributions::SojournDistribution;
use crate::format::to_json_string;
use crate::model::{PosmdpModel, Transition};

#[derive(Debug, Error)]
pub enum BankError {
    #[error("bank document is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bank was collected from model {found}, expected {expected}")]
    ModelMismatch { expected: String, found: String },
    #[error("bank is inconsistent: {0}")]
    Inconsistent(String),
}

/// One collected sojourn time and the transition that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SojournSample {
    pub tau: f64,
    #[serde(flatten)]
    pub origin: Transition,
}

/// Beliefs `B`, sojourn samples `C` and mixture weights `w`; fixed for a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBank {
    beliefs: Vec<Belief>,
    times: Vec<SojournSample>,
    /// `[s][a][s']`
    weights: Vec<f64>,
    num_states: usize,
    num_actions: usize,
    seed: u64,
    model_hash: String,
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Collects `n` beliefs (including the initial one) by random exploration.
pub fn collect(model: &PosmdpModel, n: usize, seed: u64) -> SampleBank {
    assert!(n >= 1, "at least one belief is required");
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beliefs = vec![Belief::initial(model)];
    let mut times = Vec::with_capacity(n.saturating_sub(1));
    let mut counts = vec![0u64; ns * ns * na];

    while beliefs.len() < n {
        let xi = &beliefs[rng.random_range(0..beliefs.len())];
        let s = sample_index(xi.probabilities(), 1.0, &mut rng);
        let actions = model.admissible_actions(s);
        let a = actions[rng.random_range(0..actions.len())];
        let s_next = sample_index(model.transition_row(s, a), 1.0, &mut rng);
        let tau = model
            .sojourn(s, a, s_next)
            .expect("validated models carry a sojourn law for every reachable transition")
            .sample(&mut rng);
        let likelihood = observation_time_likelihood(model, xi, a, tau);
        let o = sample_index(&likelihood.values, likelihood.total, &mut rng);
        // o has positive likelihood, so only an underflowing normalizer can fail here.
        let Ok(next) = update_with_time(model, xi, a, tau, o) else {
            continue;
        };
        times.push(SojournSample {
            tau,
            origin: Transition { s, a, s_next },
        });
        counts[(s * na + a) * ns + s_next] += 1;
        beliefs.push(next);
    }

    let total = times.len() as f64;
    let weights = counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { c as f64 / total })
        .collect();
    SampleBank {
        beliefs,
        times,
        weights,
        num_states: ns,
        num_actions: na,
        seed,
        model_hash: model.content_hash(),
    }
}

impl SampleBank {
    pub fn beliefs(&self) -> &[Belief] {
        &self.beliefs
    }

    pub fn times(&self) -> &[SojournSample] {
        &self.times
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn weight(&self, t: Transition) -> f64 {
        self.weights[(t.s * self.num_actions + t.a) * self.num_states + t.s_next]
    }

    /// Transitions with positive weight, with their weights, in index order.
    pub fn weighted_transitions(&self) -> impl Iterator<Item = (Transition, f64)> + '_ {
        let (ns, na) = (self.num_states, self.num_actions);
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(move |(i, &w)| {
            let s_next = i % ns;
            let a = (i / ns) % na;
            let s = i / (ns * na);
            (Transition { s, a, s_next }, w)
        })
    }

    /// Appends extra beliefs to `B`, e.g. points where the value is of interest.
    pub fn add_beliefs<I: IntoIterator<Item = Belief>>(&mut self, extra: I) {
        self.beliefs.extend(extra);
    }

    pub fn mixture<'m>(&self, model: &'m PosmdpModel) -> MixtureDensity<'m> {
        MixtureDensity::new(self, model)
    }

    /// `e^{-βτ_n} / D(τ_n)` for every collected time, in collection order.
    pub fn importance_ratios(&self, model: &PosmdpModel) -> Vec<f64> {
        let mix = self.mixture(model);
        self.times.iter().map(|t| mix.importance_ratio(t.tau)).collect()
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        let ns = self.num_states;
        let doc = BankDocument {
            model_hash: self.model_hash.clone(),
            seed: self.seed,
            beliefs: self.beliefs.iter().map(|b| b.probabilities().to_vec()).collect(),
            times: self.times.clone(),
            weights: self
                .weights
                .chunks(self.num_actions * ns)
                .map(|per_s| per_s.chunks(ns).map(<[f64]>::to_vec).collect())
                .collect(),
        };
        to_json_string(&doc)
    }

    /// Parses a bank file and checks it against `model`.
    pub fn from_json(bytes: &[u8], model: &PosmdpModel) -> Result<Self, BankError> {
        let doc: BankDocument = serde_json::from_slice(bytes)?;
        let expected = model.content_hash();
        if doc.model_hash != expected {
            return Err(BankError::ModelMismatch {
                expected,
                found: doc.model_hash,
            });
        }
        let (ns, na) = (model.num_states(), model.num_actions());
        let bad = |msg: String| BankError::Inconsistent(msg);
        let beliefs = doc
            .beliefs
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                if p.len() != ns {
                    return Err(bad(format!("belief {i} has {} entries", p.len())));
                }
                Belief::new_unscaled(p).map_err(|e| bad(format!("belief {i}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if beliefs.is_empty() {
            return Err(bad("no beliefs".into()));
        }
        let mut weights = Vec::with_capacity(ns * na * ns);
        if doc.weights.len() != ns {
            return Err(bad("weights have the wrong shape".into()));
        }
        for per_s in &doc.weights {
            if per_s.len() != na || per_s.iter().any(|r| r.len() != ns) {
                return Err(bad("weights have the wrong shape".into()));
            }
            per_s.iter().for_each(|r| weights.extend_from_slice(r));
        }
        for (i, t) in doc.times.iter().enumerate() {
            let o = t.origin;
            if o.s >= ns || o.a >= na || o.s_next >= ns || !(t.tau > 0.0 && t.tau.is_finite()) {
                return Err(bad(format!("time {i} is out of range")));
            }
        }
        Ok(Self {
            beliefs,
            times: doc.times,
            weights,
            num_states: ns,
            num_actions: na,
            seed: doc.seed,
            model_hash: doc.model_hash,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BankDocument {
    model_hash: String,
    seed: u64,
    beliefs: Vec<Vec<f64>>,
    times: Vec<SojournSample>,
    /// `[s][a][s']`
    weights: Vec<Vec<Vec<f64>>>,
}

/// The proposal density `D(τ)` under the mixed-measure convention: at an atom
/// point of the model only atom components count (by weighted mass); elsewhere
/// only continuous components count (by weighted density).
#[derive(Debug, Clone)]
pub struct MixtureDensity<'m> {
    model: &'m PosmdpModel,
    /// `(time, Σ w)` over atom components, sorted by time.
    atoms: Vec<(f64, f64)>,
    continuous: Vec<(f64, SojournDistribution)>,
}

impl<'m> MixtureDensity<'m> {
    pub fn new(bank: &SampleBank, model: &'m PosmdpModel) -> Self {
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut continuous = Vec::new();
        for (t, w) in bank.weighted_transitions() {
            let Some(d) = model.sojourn(t.s, t.a, t.s_next) else {
                continue;
            };
            match d.atom_time() {
                Some(time) => match atoms.iter_mut().find(|(x, _)| *x == time) {
                    Some(entry) => entry.1 += w,
                    None => atoms.push((time, w)),
                },
                None => continuous.push((w, *d)),
            }
        }
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        Self {
            model,
            atoms,
            continuous,
        }
    }

    pub fn density(&self, tau: f64) -> f64 {
        if self.model.is_atom_time(tau) {
            return self
                .atoms
                .binary_search_by(|(t, _)| t.total_cmp(&tau))
                .map_or(0.0, |i| self.atoms[i].1);
        }
        self.continuous.iter().map(|(w, d)| w * d.pdf(tau)).sum()
    }

    /// `e^{-βτ} / D(τ)`; only meaningful at collected times, where `D(τ) > 0`.
    pub fn importance_ratio(&self, tau: f64) -> f64 {
        (-self.model.beta() * tau).exp() / self.density(tau)
    }
}
