mod common;

use posmdp::model::{build_bus_problem, build_maintenance_problem};
use posmdp::simulator::{evaluate, rollout, step};
use posmdp::solver::{solve, starting_value_function, AlphaVector, SolverConfig};
use posmdp::{collect, Belief, Execution, PosmdpModel, ValueFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixed(model: &PosmdpModel, action: usize) -> ValueFunction {
    ValueFunction::new(vec![AlphaVector::new(action, vec![0.0; model.num_states()])]).unwrap()
}

fn solved(model: &PosmdpModel, beliefs: usize, max_iters: usize, seed: u64) -> ValueFunction {
    let bank = collect(model, beliefs, seed);
    let v0 = starting_value_function(model, &bank).unwrap();
    let config = SolverConfig {
        max_iters,
        execution: Execution::Parallel,
        ..SolverConfig::for_model(model)
    };
    solve(model, &bank, v0, &config, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap()
        .value_function
}

#[test]
fn solved_bus_policy_beats_fixed_policies() {
    let m = build_bus_problem();
    let v = solved(&m, 2000, 500, 3);
    let episodes = 10_000;
    let opt = evaluate(&m, &v, episodes, 20, 17, Execution::Parallel).unwrap();
    for a in 0..2 {
        let other = evaluate(&m, &fixed(&m, a), episodes, 20, 17, Execution::Parallel).unwrap();
        let se = (opt.standard_error.unwrap().powi(2) + other.standard_error.unwrap().powi(2)).sqrt();
        assert!(opt.mean > other.mean, "action {a}: {} vs {}", opt.mean, other.mean);
        if m.action_names()[a] == "bike" {
            assert!(opt.mean - other.mean > 3.0 * se, "{} vs {} (se {se})", opt.mean, other.mean);
        }
    }
}

#[test]
fn realized_rewards_average_to_stage_rewards() {
    let m = build_maintenance_problem(20).unwrap();
    let table = m.compute_stage_reward();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    for s in 0..m.num_states() {
        for &a in m.admissible_actions(s) {
            let draws: Vec<f64> = (0..n).map(|_| step(&m, s, a, &mut rng).unwrap().reward).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let expected = table.get(s, a);
            assert!((mean - expected).abs() <= 3.0 * se + 1e-9 * expected.abs(), "R({s},{a}) {mean} vs {expected} (se {se})");
        }
    }
}

#[test]
fn maintenance_policy_never_strands_in_the_awful_state() {
    let m = build_maintenance_problem(100).unwrap();
    let v = solved(&m, 2000, 40, 5);
    let replace = m.action_index("replace").unwrap();
    let awful = m.num_states() - 1;
    let h = rollout(&m, &v, &Belief::initial(&m), 5000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let visits: Vec<_> = h.entries.iter().filter(|e| e.state == awful).collect();
    assert!(visits.iter().all(|e| e.action == replace));
    assert!(visits.len() * 100 < h.entries.len());
    assert!(h.entries.windows(2).all(|w| !(w[0].state == awful && w[1].state == awful)));
}

#[test]
fn histories_are_consistent() {
    let m = build_maintenance_problem(20).unwrap();
    let v = fixed(&m, 1);
    let h = rollout(&m, &v, &Belief::initial(&m), 300, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(h.entries.len(), 300);
    let total: f64 = h.entries.iter().map(|e| e.tau).sum();
    assert!((total - h.cumulative_time).abs() < 1e-9);
    let mut discounted = 0.0;
    let mut elapsed = 0.0;
    for e in &h.entries {
        discounted += (-m.beta() * elapsed).exp() * e.reward;
        elapsed += e.tau;
        assert!((e.discounted_reward_so_far - discounted).abs() <= 1e-9 * discounted.abs().max(1.0));
    }
    let product = h.discount_product(m.beta());
    assert!((product - (-m.beta() * h.cumulative_time).exp()).abs() < 1e-9);
}
