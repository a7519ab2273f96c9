//! Monte Carlo execution of the model dynamics under a value-function policy.
//!
//! Each decision epoch draws `s' ~ P(·|s,a)`, `τ ~ f(·|s,a,s')` and
//! `o ~ G(·|a,s')`, filters the belief with `(a, τ, o)` and discounts the
//! realized stage reward by `e^{-β T_n}`, where `T_n` is the elapsed time at
//! the start of epoch `n`.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::belief::{update_with_time, Belief, BeliefError};
use crate::format::fmt_f64;
use crate::model::PosmdpModel;
use crate::parallel::{map_range, Execution};
use crate::sampler::sample_index;
use crate::solver::ValueFunction;

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("action {action} is not admissible in state {state}")]
    InadmissibleAction { state: usize, action: usize },
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Outcome of one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub s_next: usize,
    pub tau: f64,
    pub observation: usize,
    /// `r1(s,a) + r2(s,a,s') (1 - e^{-βτ}) / β`, valued at the start of the epoch.
    pub reward: f64,
}

/// Realized reward of a transition that took `tau`.
pub fn realized_reward(model: &PosmdpModel, s: usize, a: usize, s_next: usize, tau: f64) -> f64 {
    let beta = model.beta();
    model.lump_reward(s, a) + model.rate_reward(s, a, s_next) * -(-beta * tau).exp_m1() / beta
}

pub fn step<R: Rng + ?Sized>(model: &PosmdpModel, s: usize, a: usize, rng: &mut R) -> Result<Step, SimulationError> {
    if s >= model.num_states() || !model.is_admissible(s, a) {
        return Err(SimulationError::InadmissibleAction { state: s, action: a });
    }
    let s_next = sample_index(model.transition_row(s, a), 1.0, rng);
    let tau = model
        .sojourn(s, a, s_next)
        .expect("validated models carry a sojourn law for every reachable transition")
        .sample(rng);
    let observation = sample_index(model.observation_row(a, s_next), 1.0, rng);
    Ok(Step {
        s_next,
        tau,
        observation,
        reward: realized_reward(model, s, a, s_next, tau),
    })
}

/// One decision epoch of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    /// Hidden state at the start of the epoch; not visible to the policy.
    pub state: usize,
    pub action: usize,
    pub tau: f64,
    pub observation: usize,
    /// Belief after filtering with `(action, tau, observation)`.
    pub belief: Belief,
    pub reward: f64,
    pub discounted_reward_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub initial_belief: Belief,
    pub initial_state: usize,
    pub entries: Vec<HistoryEntry>,
    pub cumulative_time: f64,
    pub cumulative_discounted_reward: f64,
}

impl HistoryRecord {
    /// `e^{-β T_N}` accumulated as a product of per-epoch factors.
    pub fn discount_product(&self, beta: f64) -> f64 {
        self.entries.iter().map(|e| (-beta * e.tau).exp()).product()
    }

    /// Trajectory CSV: `epoch,action,tau,observation,belief_1..belief_k,discounted_reward_so_far`.
    pub fn write_csv<W: io::Write>(&self, model: &PosmdpModel, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["epoch".to_string(), "action".into(), "tau".into(), "observation".into()];
        header.extend((1..=model.num_states()).map(|k| format!("belief_{k}")));
        header.push("discounted_reward_so_far".into());
        w.write_record(&header)?;
        for (n, e) in self.entries.iter().enumerate() {
            let mut row = vec![
                n.to_string(),
                model.action_names()[e.action].clone(),
                fmt_f64(e.tau),
                model.observation_names()[e.observation].clone(),
            ];
            row.extend(e.belief.probabilities().iter().map(|&p| fmt_f64(p)));
            row.push(fmt_f64(e.discounted_reward_so_far));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `epochs` decision epochs from a hidden state drawn from `xi0`,
/// acting greedily with respect to `v`.
pub fn rollout<R: Rng + ?Sized>(
    model: &PosmdpModel,
    v: &ValueFunction,
    xi0: &Belief,
    epochs: usize,
    rng: &mut R,
) -> Result<HistoryRecord, SimulationError> {
    assert!(epochs >= 1, "a rollout needs at least one epoch");
    let beta = model.beta();
    let initial_state = sample_index(xi0.probabilities(), 1.0, rng);
    let mut s = initial_state;
    let mut xi = xi0.clone();
    let mut elapsed = 0.0;
    let mut total = 0.0;
    let mut entries = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let a = v.action_at(&xi);
        let st = step(model, s, a, rng)?;
        total += (-beta * elapsed).exp() * st.reward;
        xi = update_with_time(model, &xi, a, st.tau, st.observation)?;
        entries.push(HistoryEntry {
            state: s,
            action: a,
            tau: st.tau,
            observation: st.observation,
            belief: xi.clone(),
            reward: st.reward,
            discounted_reward_so_far: total,
        });
        elapsed += st.tau;
        s = st.s_next;
    }
    Ok(HistoryRecord {
        initial_belief: xi0.clone(),
        initial_state,
        entries,
        cumulative_time: elapsed,
        cumulative_discounted_reward: total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub episodes: usize,
    pub mean: f64,
    /// Standard error of the mean; `None` for a single episode.
    pub standard_error: Option<f64>,
}

/// Random source for episode `episode` of an evaluation seeded with `seed`.
pub fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

/// Mean discounted return over `episodes` independent rollouts from the model's initial belief.
pub fn evaluate(
    model: &PosmdpModel,
    v: &ValueFunction,
    episodes: usize,
    epochs: usize,
    seed: u64,
    exec: Execution,
) -> Result<Evaluation, SimulationError> {
    assert!(episodes >= 1, "at least one episode is required");
    let xi0 = Belief::initial(model);
    let returns = map_range(exec, episodes, |k| {
        rollout(model, v, &xi0, epochs, &mut episode_rng(seed, k)).map(|h| h.cumulative_discounted_reward)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let standard_error = (episodes > 1).then(|| {
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Ok(Evaluation {
        episodes,
        mean,
        standard_error,
    })
}
