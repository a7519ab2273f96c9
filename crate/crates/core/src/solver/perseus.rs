//! Randomized point-based improvement passes and the outer convergence loop.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::model::PosmdpModel;
use crate::parallel::{map_slice, Execution};
use crate::sampler::SampleBank;

use super::{BackupKernel, SolverError, ValueFunction};

/// Convergence threshold relative to `max |R(s,a)|`.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once `max_{ξ∈B} |V'(ξ) - V(ξ)|` falls below this.
    pub epsilon: f64,
    pub max_iters: usize,
    pub execution: Execution,
}

impl SolverConfig {
    /// `ε = 1e-4 · max|R|` (or 1e-4 when every reward is zero), 500 iterations, sequential.
    pub fn for_model(model: &PosmdpModel) -> Self {
        let bound = model.compute_stage_reward().bound();
        Self {
            epsilon: DEFAULT_RELATIVE_EPSILON * if bound > 0.0 { bound } else { 1.0 },
            max_iters: DEFAULT_MAX_ITERS,
            execution: Execution::Sequential,
        }
    }
}

/// Statistics for one improvement pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub vectors: usize,
    /// `max_{ξ∈B} |V'(ξ) - V(ξ)|`
    pub residual: f64,
    /// `min_{ξ∈B} (V'(ξ) - V(ξ))`
    pub min_improvement: f64,
    pub backups: usize,
    /// Largest gain `⟨ξ, backup(ξ)⟩ - V'(ξ)` over `B` from the confirmation
    /// sweep, run only when `residual` fell below ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_gain: Option<f64>,
    /// Wall-clock seconds for the pass; not persisted so output files stay reproducible.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub value_function: ValueFunction,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

fn values_over(v: &ValueFunction, beliefs: &[Belief], exec: Execution) -> Vec<f64> {
    map_slice(exec, beliefs, |xi| v.value_at(xi))
}

/// One pass over `beliefs` given their current values `old`. Returns `V'` and the number of backups.
fn perseus_pass<R: Rng + ?Sized>(
    kernel: &BackupKernel,
    v: &ValueFunction,
    beliefs: &[Belief],
    old: &[f64],
    rng: &mut R,
    exec: Execution,
) -> (ValueFunction, usize) {
    let mut next = ValueFunction::empty();
    let mut pending: Vec<usize> = (0..beliefs.len()).collect();
    let mut backups = 0;
    while !pending.is_empty() {
        let i = pending[rng.random_range(0..pending.len())];
        let xi = &beliefs[i];
        let mut alpha = kernel.backup(v, xi, exec);
        backups += 1;
        if alpha.dot(xi) < old[i] {
            alpha = v.vectors()[v.best_index(xi)].clone();
        }
        let keep = map_slice(exec, &pending, |&j| alpha.dot(&beliefs[j]) < old[j]);
        let mut flags = keep.into_iter();
        pending.retain(|_| flags.next().expect("one flag per pending belief"));
        next.insert_distinct(alpha);
    }
    (next, backups)
}

/// One randomized improvement pass over the bank's beliefs.
pub fn perseus_update<R: Rng + ?Sized>(
    model: &PosmdpModel,
    v: &ValueFunction,
    bank: &SampleBank,
    rng: &mut R,
) -> ValueFunction {
    let kernel = BackupKernel::new(model, bank);
    let old = values_over(v, bank.beliefs(), Execution::Sequential);
    perseus_pass(&kernel, v, bank.beliefs(), &old, rng, Execution::Sequential).0
}

/// Full backup at every belief of `B`. Vectors gaining at least `epsilon` are
/// added to `v`; returns the largest gain.
fn confirmation_sweep(
    kernel: &BackupKernel,
    v: &mut ValueFunction,
    beliefs: &[Belief],
    values: &mut [f64],
    epsilon: f64,
    exec: Execution,
) -> f64 {
    let snapshot = v.clone();
    let backed = map_slice(exec, beliefs, |xi| kernel.backup(&snapshot, xi, Execution::Sequential));
    let mut gain = f64::NEG_INFINITY;
    let mut added = false;
    for ((alpha, xi), old) in backed.into_iter().zip(beliefs).zip(values.iter()) {
        let g = alpha.dot(xi) - old;
        gain = gain.max(g);
        if g >= epsilon {
            added |= v.insert_distinct(alpha);
        }
    }
    if added {
        values.copy_from_slice(&values_over(v, beliefs, exec));
    }
    gain
}

/// Repeats improvement passes from `v0` until the sup-norm change over the
/// bank's beliefs drops below `config.epsilon` or `config.max_iters` passes ran.
///
/// A pass can leave most beliefs un-backed-up when one vector weakly improves
/// all of them, so a small change is confirmed by a full backup sweep over `B`
/// before convergence is declared.
pub fn solve<R: Rng + ?Sized>(
    model: &PosmdpModel,
    bank: &SampleBank,
    v0: ValueFunction,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<SolveOutcome, SolverError> {
    solve_with_progress(model, bank, v0, config, rng, |_| {})
}

/// [`solve`] with a callback invoked after every pass.
pub fn solve_with_progress<R: Rng + ?Sized, F: FnMut(&IterationRecord)>(
    model: &PosmdpModel,
    bank: &SampleBank,
    v0: ValueFunction,
    config: &SolverConfig,
    rng: &mut R,
    mut progress: F,
) -> Result<SolveOutcome, SolverError> {
    if !(config.epsilon.is_finite() && config.epsilon > 0.0) {
        return Err(SolverError::InvalidEpsilon(config.epsilon));
    }
    if v0.num_states() != model.num_states() {
        return Err(SolverError::Dimension {
            index: 0,
            expected: model.num_states(),
            found: v0.num_states(),
        });
    }
    let exec = config.execution;
    let kernel = BackupKernel::new(model, bank);
    let beliefs = bank.beliefs();
    let mut v = v0;
    let mut values = values_over(&v, beliefs, exec);
    let mut trace = Vec::new();
    let mut converged = false;
    for iteration in 1..=config.max_iters {
        let start = Instant::now();
        let (next, backups) = perseus_pass(&kernel, &v, beliefs, &values, rng, exec);
        let next_values = values_over(&next, beliefs, exec);
        let mut residual: f64 = 0.0;
        let mut min_improvement = f64::INFINITY;
        for (new, old) in next_values.iter().zip(&values) {
            let d = new - old;
            residual = residual.max(d.abs());
            min_improvement = min_improvement.min(d);
        }
        v = next;
        values = next_values;
        let mut sweep_gain = None;
        if residual < config.epsilon {
            let gain = confirmation_sweep(&kernel, &mut v, beliefs, &mut values, config.epsilon, exec);
            sweep_gain = Some(gain);
            converged = gain < config.epsilon;
        }
        let record = IterationRecord {
            iteration,
            vectors: v.len(),
            residual,
            min_improvement,
            backups: backups + if sweep_gain.is_some() { beliefs.len() } else { 0 },
            sweep_gain,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        progress(&record);
        trace.push(record);
        if converged {
            break;
        }
    }
    Ok(SolveOutcome {
        value_function: v,
        trace,
        converged,
    })
}
