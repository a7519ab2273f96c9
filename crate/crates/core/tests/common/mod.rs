#![allow(dead_code)]

use posmdp::distributions::SojournDistribution;
use posmdp::model::{KernelDocument, ModelDocument, ObservationsDocument, SojournRecord};
use posmdp::quadrature::integrate_to_infinity;
use posmdp::solver::AlphaVector;
use posmdp::{Belief, PosmdpModel, SampleBank, ValueFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Beliefs of the maintenance reference table with the published value and action (1-based).
pub const MAINTENANCE_TABLE: [([f64; 4], f64, usize); 8] = [
    ([0.9972, 0.0028, 0.0, 0.0], 46309.8867, 2),
    ([0.9965, 0.0035, 0.0, 0.0], 46299.5234, 2),
    ([0.8714, 0.1286, 0.0, 0.0], 44448.0742, 2),
    ([0.8160, 0.1840, 0.0, 0.0], 43628.1680, 2),
    ([0.0031, 0.6803, 0.3165, 0.0001], 41197.9805, 3),
    ([0.0001, 0.0390, 0.9457, 0.0152], 40560.6250, 3),
    ([0.0, 0.0003, 0.8488, 0.1509], 40504.4453, 4),
    ([0.0, 0.0, 0.0, 1.0], 40504.4414, 4),
];

pub fn table_beliefs() -> Vec<Belief> {
    MAINTENANCE_TABLE
        .iter()
        .map(|(p, _, _)| Belief::new(p.to_vec()).unwrap())
        .collect()
}

fn random_row<R: Rng>(rng: &mut R, n: usize, sparse: bool) -> Vec<f64> {
    loop {
        let mut row: Vec<f64> = (0..n)
            .map(|_| if sparse && rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.05..1.0) })
            .collect();
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|x| *x /= sum);
            // Renormalize once more so the row sums to 1 within rounding.
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
            return row;
        }
    }
}

fn random_sojourn<R: Rng>(rng: &mut R, atoms: &[f64]) -> SojournDistribution {
    match rng.random_range(0..3) {
        0 => SojournDistribution::atom(atoms[rng.random_range(0..atoms.len())]).unwrap(),
        1 => SojournDistribution::inverse_gaussian(rng.random_range(0.5..4.0), rng.random_range(1.0..20.0)).unwrap(),
        _ => SojournDistribution::truncated_gaussian(rng.random_range(0.5..4.0), rng.random_range(0.3..2.0)).unwrap(),
    }
}

/// Random model document with up to `max_s` states, `max_a` actions and `max_o` observations.
pub fn random_document(seed: u64, max_s: usize, max_a: usize, max_o: usize, continuous_only: bool) -> ModelDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.random_range(1..=max_s);
    let na = rng.random_range(1..=max_a);
    let no = rng.random_range(1..=max_o);
    let atoms = [1.0, 2.5];
    let mut transition = vec![vec![vec![0.0; ns]; na]; ns];
    let mut sojourn = Vec::new();
    let mut r2 = vec![vec![vec![0.0; ns]; na]; ns];
    for s in 0..ns {
        for a in 0..na {
            transition[s][a] = random_row(&mut rng, ns, true);
            for s_next in 0..ns {
                r2[s][a][s_next] = rng.random_range(-3.0..3.0);
                if transition[s][a][s_next] > 0.0 {
                    let dist = if continuous_only {
                        SojournDistribution::inverse_gaussian(rng.random_range(0.5..4.0), rng.random_range(1.0..20.0))
                            .unwrap()
                    } else {
                        random_sojourn(&mut rng, &atoms)
                    };
                    sojourn.push(SojournRecord { s, a, s_next, dist });
                }
            }
        }
    }
    let kernel = (0..na)
        .map(|_| (0..ns).map(|_| random_row(&mut rng, no, false)).collect())
        .collect();
    ModelDocument {
        version: 1,
        states: (0..ns).map(|s| format!("s{s}")).collect(),
        actions: (0..na).map(|a| format!("a{a}")).collect(),
        admissible: None,
        observations: ObservationsDocument::Names((0..no).map(|o| format!("o{o}")).collect()),
        transition,
        sojourn,
        observation_kernel: KernelDocument::Dense(kernel),
        g0: None,
        r1: (0..ns).map(|_| (0..na).map(|_| rng.random_range(-5.0..5.0)).collect()).collect(),
        r2,
        beta: rng.random_range(0.05..0.5),
        initial_belief: random_row(&mut rng, ns, false),
        mixed_observable: None,
        initial_value: None,
    }
}

pub fn random_model(seed: u64, max_s: usize, max_a: usize, max_o: usize) -> PosmdpModel {
    PosmdpModel::from_document(random_document(seed, max_s, max_a, max_o, false)).unwrap()
}

pub fn random_value_function(seed: u64, num_states: usize, num_actions: usize) -> ValueFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let k = rng.random_range(1..=3);
    let vectors = (0..k)
        .map(|_| {
            AlphaVector::new(
                rng.random_range(0..num_actions),
                (0..num_states).map(|_| rng.random_range(-10.0..10.0)).collect(),
            )
        })
        .collect();
    ValueFunction::new(vectors).unwrap()
}

pub fn random_belief(seed: u64, n: usize) -> Belief {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbe11ef);
    Belief::new(random_row(&mut rng, n, true)).unwrap()
}

fn is_model_atom(model: &PosmdpModel, tau: f64) -> bool {
    model.reachable_transitions().any(|t| {
        model
            .sojourn(t.s, t.a, t.s_next)
            .and_then(|d| d.atom_time())
            .is_some_and(|x| x == tau)
    })
}

/// `f(τ|s,a,s')` with atoms counted by mass at atom times and continuous laws by density elsewhere.
pub fn density(model: &PosmdpModel, s: usize, a: usize, s_next: usize, tau: f64) -> f64 {
    let Some(d) = model.sojourn(s, a, s_next) else { return 0.0 };
    let atom_time = is_model_atom(model, tau);
    match (d.atom_time(), atom_time) {
        (Some(t), true) => (t == tau) as u8 as f64,
        (Some(_), false) => 0.0,
        (None, true) => 0.0,
        (None, false) => d.pdf(tau),
    }
}

/// `R(s,a)` by direct quadrature of `E[e^{-βτ}]`.
pub fn stage_reward(model: &PosmdpModel, s: usize, a: usize) -> f64 {
    let beta = model.beta();
    let mut r = model.lump_reward(s, a);
    for s_next in 0..model.num_states() {
        let p = model.transition_prob(s, a, s_next);
        if p == 0.0 {
            continue;
        }
        let d = model.sojourn(s, a, s_next).unwrap();
        let discount = match d.atom_time() {
            Some(t) => (-beta * t).exp(),
            None => integrate_to_infinity(|t| (-beta * t).exp() * d.pdf(t), 0.0, 1e-13),
        };
        r += p * model.rate_reward(s, a, s_next) * (1.0 - discount) / beta;
    }
    r
}

/// Straight-line evaluation of the sampled Bellman backup at `xi`:
/// `α(s|ξ,a) = R(s,a) + (1/|C|) Σ_n e^{-βτ_n}/D(τ_n) Σ_o α*_{a,τ_n,o}(s)` with
/// `α_{a,τ,o}(s) = Σ_{s'} G(o|a,s') P(s'|s,a) f(τ|s,a,s') α(s')`.
pub fn brute_force_backup(model: &PosmdpModel, v: &ValueFunction, bank: &SampleBank, xi: &Belief) -> AlphaVector {
    let (ns, na, no) = (model.num_states(), model.num_actions(), model.num_observations());
    let beta = model.beta();
    let taus: Vec<f64> = bank.times().iter().map(|c| c.tau).collect();
    let mixture = |tau: f64| -> f64 {
        let mut d = 0.0;
        for s in 0..ns {
            for a in 0..na {
                for s_next in 0..ns {
                    let w = bank.weight(posmdp::model::Transition { s, a, s_next });
                    d += w * density(model, s, a, s_next, tau);
                }
            }
        }
        d
    };
    let support: Vec<usize> = (0..ns).filter(|&s| xi.probabilities()[s] > 0.0).collect();
    let mut actions: Vec<usize> = (0..na)
        .filter(|&a| support.iter().all(|&s| model.is_admissible(s, a)))
        .collect();
    if actions.is_empty() {
        actions = (0..na).collect();
    }
    let mut best: Option<(f64, AlphaVector)> = None;
    for &a in &actions {
        let mut alpha: Vec<f64> = (0..ns).map(|s| stage_reward(model, s, a)).collect();
        for &tau in &taus {
            let ratio = (-beta * tau).exp() / mixture(tau);
            for o in 0..no {
                let mut chosen: Option<(f64, Vec<f64>)> = None;
                for k in v.vectors() {
                    let mut proj = vec![0.0; ns];
                    for (s, x) in proj.iter_mut().enumerate() {
                        for s_next in 0..ns {
                            *x += model.observation_prob(a, s_next, o)
                                * model.transition_prob(s, a, s_next)
                                * density(model, s, a, s_next, tau)
                                * k.values[s_next];
                        }
                    }
                    let score: f64 = (0..ns).map(|s| xi.probabilities()[s] * proj[s]).sum();
                    if chosen.as_ref().is_none_or(|(b, _)| score > *b) {
                        chosen = Some((score, proj));
                    }
                }
                let proj = chosen.unwrap().1;
                for s in 0..ns {
                    alpha[s] += ratio * proj[s] / taus.len() as f64;
                }
            }
        }
        let value: f64 = (0..ns).map(|s| xi.probabilities()[s] * alpha[s]).sum();
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, AlphaVector::new(a, alpha)));
        }
    }
    best.unwrap().1
}

/// Exact maintenance solution for a model whose observations carry no state
/// information: the belief then evolves deterministically as `ξ P_a`, so point
/// based value iteration on a dense simplex grid with exact discounts converges
/// to the optimal value. Returns `(vectors, discount per action)`.
pub fn maintenance_exact_solution(model: &PosmdpModel, resolution: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (ns, na) = (model.num_states(), model.num_actions());
    let beta = model.beta();
    for a in 0..na {
        let first = model.observation_row(a, 0);
        assert!((1..ns).all(|s| model.observation_row(a, s) == first), "observations must be uninformative");
    }
    let gamma: Vec<f64> = (0..na)
        .map(|a| {
            let d = model.sojourn(0, a, (0..ns).find(|&j| model.transition_prob(0, a, j) > 0.0).unwrap()).unwrap();
            match d.atom_time() {
                Some(t) => (-beta * t).exp(),
                None => integrate_to_infinity(|t| (-beta * t).exp() * d.pdf(t), 0.0, 1e-13),
            }
        })
        .collect();
    for a in 0..na {
        for t in model.reachable_transitions().filter(|t| t.a == a) {
            let d = model.sojourn(t.s, a, t.s_next).unwrap();
            assert_eq!(*d, *model.sojourn(0, a, (0..ns).find(|&j| model.transition_prob(0, a, j) > 0.0).unwrap()).unwrap());
        }
    }
    let rewards: Vec<Vec<f64>> = (0..na).map(|a| (0..ns).map(|s| stage_reward(model, s, a)).collect()).collect();
    let mut grid = Vec::new();
    let mut counts = vec![0usize; ns];
    fn rec(i: usize, left: usize, counts: &mut Vec<usize>, r: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == counts.len() {
            counts[i] = left;
            out.push(counts.iter().map(|&c| c as f64 / r as f64).collect());
            return;
        }
        for k in 0..=left {
            counts[i] = k;
            rec(i + 1, left - k, counts, r, out);
        }
    }
    rec(0, resolution, &mut counts, resolution, &mut grid);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut vectors = vec![vec![model.initial_value().unwrap_or(0.0); ns]];
    for _ in 0..5000 {
        let mut next: Vec<Vec<f64>> = Vec::new();
        let mut change: f64 = 0.0;
        for b in &grid {
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for a in 0..na {
                let nb: Vec<f64> = (0..ns)
                    .map(|j| (0..ns).map(|s| b[s] * model.transition_prob(s, a, j)).sum())
                    .collect();
                let k = vectors
                    .iter()
                    .max_by(|x, y| dot(x, &nb).total_cmp(&dot(y, &nb)))
                    .unwrap();
                let alpha: Vec<f64> = (0..ns)
                    .map(|s| {
                        rewards[a][s] + gamma[a] * (0..ns).map(|j| model.transition_prob(s, a, j) * k[j]).sum::<f64>()
                    })
                    .collect();
                let value = dot(b, &alpha);
                if value > best.0 {
                    best = (value, alpha);
                }
            }
            let old = vectors.iter().map(|k| dot(k, b)).fold(f64::NEG_INFINITY, f64::max);
            change = change.max((best.0 - old).abs());
            if !next.iter().any(|k| k.iter().zip(&best.1).all(|(x, y)| (x - y).abs() < 1e-6)) {
                next.push(best.1);
            }
        }
        vectors = next;
        if change < 1e-7 {
            break;
        }
    }
    (vectors, gamma)
}

pub fn max_dot(vectors: &[Vec<f64>], b: &[f64]) -> f64 {
    vectors
        .iter()
        .map(|k| k.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}
