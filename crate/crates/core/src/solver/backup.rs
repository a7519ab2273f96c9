//! The importance-weighted point backup.
//!
//! For a belief ξ and action a the new vector is
//!
//! ```text
//! α(s|ξ,a) = R(s,a) + (1/|C|) Σ_n e^{-βτ_n}/D(τ_n) Σ_o α*(s|a,τ_n,o)
//! α(s|a,τ,o) = Σ_{s'} G(o|a,s') P(s'|s,a) f(τ|s,a,s') α(s')
//! ```
//!
//! where `α*` is the projection of whichever `α ∈ V` maximizes `⟨ξ, α(·|a,τ_n,o)⟩`.
//! [`BackupKernel`] caches everything that does not depend on ξ or V: samples
//! sharing a sojourn time are merged (their terms are identical), and each
//! remaining `(a, τ)` pair keeps only the `(s, s')` entries where `P·f > 0`.

use crate::belief::Belief;
use crate::model::PosmdpModel;
use crate::parallel::{map_range, Execution};
use crate::sampler::SampleBank;

use super::{AlphaVector, ValueFunction};

/// Work items per parallel task; fixed so the reduction order never depends on
/// the execution mode or thread count.
const BLOCK: usize = 32;

#[derive(Debug, Clone)]
struct TauGroup {
    a: usize,
    /// `multiplicity / |C| · e^{-βτ} / D(τ)`
    weight: f64,
    /// `(s, s', P(s'|s,a) f(τ|s,a,s'))` with positive last component.
    entries: Vec<(usize, usize, f64)>,
    /// Distinct `s'` appearing in `entries`.
    targets: Vec<usize>,
}

/// ξ- and V-independent data for repeated backups against one bank.
#[derive(Debug, Clone)]
pub struct BackupKernel {
    num_states: usize,
    num_actions: usize,
    num_observations: usize,
    admissible: Vec<Vec<usize>>,
    /// `R(s,a)` laid out `[a][s]`.
    stage: Vec<f64>,
    /// `Σ_o G(o|a,s')` laid out `[a][s']`.
    obs_total: Vec<f64>,
    /// Nonzero `(s', G(o|a,s'))` per `[a][o]`.
    obs_sparse: Vec<Vec<(usize, f64)>>,
    groups: Vec<TauGroup>,
}

impl BackupKernel {
    pub fn new(model: &PosmdpModel, bank: &SampleBank) -> Self {
        let (ns, na, no) = (model.num_states(), model.num_actions(), model.num_observations());
        let rewards = model.compute_stage_reward();
        let stage = (0..na).flat_map(|a| rewards.column(a)).collect();

        let mut obs_total = vec![0.0; na * ns];
        let mut obs_sparse = vec![Vec::new(); na * no];
        for a in 0..na {
            for s_next in 0..ns {
                for (o, &g) in model.observation_row(a, s_next).iter().enumerate() {
                    if g > 0.0 {
                        obs_total[a * ns + s_next] += g;
                        obs_sparse[a * no + o].push((s_next, g));
                    }
                }
            }
        }

        let mix = bank.mixture(model);
        let mut taus: Vec<f64> = bank.times().iter().map(|t| t.tau).collect();
        taus.sort_by(f64::total_cmp);
        let total = taus.len() as f64;
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for tau in taus {
            match distinct.last_mut() {
                Some((t, count)) if *t == tau => *count += 1,
                _ => distinct.push((tau, 1)),
            }
        }

        let reachable: Vec<_> = model.reachable_transitions().collect();
        let mut groups = Vec::new();
        for a in 0..na {
            for &(tau, count) in &distinct {
                let mut entries = Vec::new();
                for t in reachable.iter().filter(|t| t.a == a) {
                    let pf = model.transition_prob(t.s, a, t.s_next) * model.sojourn_density(t.s, a, t.s_next, tau);
                    if pf > 0.0 {
                        entries.push((t.s, t.s_next, pf));
                    }
                }
                if entries.is_empty() {
                    continue;
                }
                let mut targets: Vec<usize> = entries.iter().map(|e| e.1).collect();
                targets.sort_unstable();
                targets.dedup();
                groups.push(TauGroup {
                    a,
                    weight: count as f64 / total * mix.importance_ratio(tau),
                    entries,
                    targets,
                });
            }
        }

        Self {
            num_states: ns,
            num_actions: na,
            num_observations: no,
            admissible: (0..ns).map(|s| model.admissible_actions(s).to_vec()).collect(),
            stage,
            obs_total,
            obs_sparse,
            groups,
        }
    }

    /// Number of `(a, τ)` pairs with a nonzero contribution.
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Actions admissible in every state ξ supports; all actions if no single
    /// action is admissible throughout the support.
    fn candidates(&self, xi: &Belief) -> Vec<usize> {
        let mut allowed = vec![true; self.num_actions];
        for s in xi.support() {
            let adm = &self.admissible[s];
            for (a, ok) in allowed.iter_mut().enumerate() {
                *ok &= adm.binary_search(&a).is_ok();
            }
        }
        if !allowed.iter().any(|x| *x) {
            allowed.fill(true);
        }
        (0..self.num_actions).filter(|&a| allowed[a]).collect()
    }

    /// `Σ_n weight_n Σ_o α*(s|a,τ_n,o)` for every action in `active`, laid out `[a][s]`.
    fn future_terms(&self, v: &ValueFunction, xi: &Belief, active: &[bool], exec: Execution) -> Vec<f64> {
        let (ns, no) = (self.num_states, self.num_observations);
        let p = xi.probabilities();
        let vectors = v.vectors();
        let first = &vectors[0].values;
        let blocks = self.groups.len().div_ceil(BLOCK);

        let partials = map_range(exec, blocks, |b| {
            let mut out = vec![0.0; self.num_actions * ns];
            let mut reach = vec![0.0; ns];
            let mut z = vec![0.0; ns];
            let end = ((b + 1) * BLOCK).min(self.groups.len());
            for g in &self.groups[b * BLOCK..end] {
                let a = g.a;
                if !active[a] {
                    continue;
                }
                // Predicted arrival mass per s' and the default (first-vector) choice.
                for &(s, s_next, pf) in &g.entries {
                    reach[s_next] += p[s] * pf;
                }
                for &s_next in &g.targets {
                    z[s_next] = self.obs_total[a * ns + s_next] * first[s_next];
                }
                for o in 0..no {
                    let col = &self.obs_sparse[a * no + o];
                    if col.iter().all(|&(s_next, gv)| gv * reach[s_next] == 0.0) {
                        continue;
                    }
                    let score = |alpha: &[f64]| -> f64 {
                        col.iter().map(|&(s_next, gv)| gv * reach[s_next] * alpha[s_next]).sum()
                    };
                    let mut best = 0;
                    let mut best_score = score(first);
                    for (i, alpha) in vectors.iter().enumerate().skip(1) {
                        let x = score(&alpha.values);
                        if x > best_score {
                            best = i;
                            best_score = x;
                        }
                    }
                    if best != 0 {
                        let chosen = &vectors[best].values;
                        for &(s_next, gv) in col {
                            z[s_next] += gv * (chosen[s_next] - first[s_next]);
                        }
                    }
                }
                let row = &mut out[a * ns..(a + 1) * ns];
                for &(s, s_next, pf) in &g.entries {
                    row[s] += g.weight * pf * z[s_next];
                }
                for &s_next in &g.targets {
                    reach[s_next] = 0.0;
                }
            }
            out
        });

        let mut total = vec![0.0; self.num_actions * ns];
        for part in partials {
            for (t, x) in total.iter_mut().zip(part) {
                *t += x;
            }
        }
        total
    }

    /// The backed-up vector at `xi`: the best action's `α(·|ξ,a)`, lowest action on ties.
    pub fn backup(&self, v: &ValueFunction, xi: &Belief, exec: Execution) -> AlphaVector {
        let ns = self.num_states;
        let candidates = self.candidates(xi);
        let mut active = vec![false; self.num_actions];
        candidates.iter().for_each(|&a| active[a] = true);
        let future = self.future_terms(v, xi, &active, exec);

        let mut best: Option<(f64, AlphaVector)> = None;
        for a in candidates {
            let values: Vec<f64> = (0..ns)
                .map(|s| self.stage[a * ns + s] + future[a * ns + s])
                .collect();
            let value = xi.dot(&values);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, AlphaVector::new(a, values)));
            }
        }
        best.expect("at least one candidate action").1
    }
}

/// Actions the backup maximizes over at `xi`.
pub fn candidate_actions(model: &PosmdpModel, xi: &Belief) -> Vec<usize> {
    let mut out: Vec<usize> = (0..model.num_actions())
        .filter(|&a| xi.support().all(|s| model.is_admissible(s, a)))
        .collect();
    if out.is_empty() {
        out = (0..model.num_actions()).collect();
    }
    out
}

/// One projected vector per `α ∈ V` for the given action, sojourn time and observation.
pub fn alpha_given_a_tau_o(model: &PosmdpModel, v: &ValueFunction, a: usize, tau: f64, o: usize) -> Vec<Vec<f64>> {
    let ns = model.num_states();
    let factor: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            (0..ns)
                .map(|s_next| {
                    model.observation_prob(a, s_next, o)
                        * model.transition_prob(s, a, s_next)
                        * model.sojourn_density(s, a, s_next, tau)
                })
                .collect()
        })
        .collect();
    v.vectors()
        .iter()
        .map(|alpha| {
            factor
                .iter()
                .map(|row| row.iter().zip(&alpha.values).map(|(f, x)| f * x).sum())
                .collect()
        })
        .collect()
}

/// One-off backup; builds a fresh [`BackupKernel`]. Prefer the kernel for repeated calls.
pub fn backup(model: &PosmdpModel, v: &ValueFunction, bank: &SampleBank, xi: &Belief) -> AlphaVector {
    BackupKernel::new(model, bank).backup(v, xi, Execution::Sequential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bus_problem, build_maintenance_problem};
    use crate::sampler::collect;

    #[test]
    fn zero_value_function_backs_up_to_stage_reward() {
        let m = build_maintenance_problem(20).unwrap();
        let bank = collect(&m, 300, 2);
        let zero = ValueFunction::constant(4, 0.0);
        let r = m.compute_stage_reward();
        for p in [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.2, 0.8], [0.25; 4]] {
            let xi = Belief::new(p.to_vec()).unwrap();
            let alpha = backup(&m, &zero, &bank, &xi);
            let best = (0..4)
                .max_by(|&x, &y| xi.dot(&r.column(x)).total_cmp(&xi.dot(&r.column(y))).then(y.cmp(&x)))
                .unwrap();
            assert_eq!(alpha.action, best);
            assert_eq!(alpha.values, r.column(best));
        }
    }

    #[test]
    fn zero_projection_and_identity_projection() {
        let m = build_bus_problem();
        let zero = ValueFunction::constant(15, 0.0);
        let proj = alpha_given_a_tau_o(&m, &zero, 0, 5.0, 1);
        assert!(proj[0].iter().all(|x| *x == 0.0));

        // Bike from stop 3 takes exactly 12: f = 1 at the atom, P and G select stop 4.
        let alpha: Vec<f64> = (0..15).map(|s| s as f64).collect();
        let v = ValueFunction::new(vec![AlphaVector::new(0, alpha.clone())]).unwrap();
        let proj = alpha_given_a_tau_o(&m, &v, 1, 12.0, 4);
        for i in 0..3 {
            assert_eq!(proj[0][9 + i], alpha[12 + i]);
        }
        assert!(proj[0][..9].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let m = build_bus_problem();
        let bank = collect(&m, 600, 5);
        let kernel = BackupKernel::new(&m, &bank);
        let v = ValueFunction::new(vec![
            AlphaVector::new(0, (0..15).map(|s| (s * 7 % 11) as f64).collect()),
            AlphaVector::new(1, (0..15).map(|s| (s * 5 % 13) as f64).collect()),
        ])
        .unwrap();
        for xi in bank.beliefs().iter().step_by(37) {
            assert_eq!(
                kernel.backup(&v, xi, Execution::Sequential),
                kernel.backup(&v, xi, Execution::Parallel)
            );
        }
    }

    #[test]
    fn sojourn_times_are_merged_per_action() {
        let m = build_maintenance_problem(10).unwrap();
        let bank = collect(&m, 500, 8);
        let kernel = BackupKernel::new(&m, &bank);
        let continuous = bank.times().iter().filter(|t| t.origin.a == 3).count();
        // One group for each fixed-time action plus one per replace sample.
        assert_eq!(kernel.num_groups(), 3 + continuous);
    }
}
