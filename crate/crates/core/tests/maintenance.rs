mod common;

use common::{maintenance_exact_solution, max_dot, table_beliefs, MAINTENANCE_TABLE};
use posmdp::model::build_maintenance_problem;
use posmdp::solver::{solve, starting_value_function, SolverConfig};
use posmdp::{collect, Execution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn solver_agrees_with_the_exact_solution() {
    let m = build_maintenance_problem(100).unwrap();
    let mut bank = collect(&m, 5000, 7);
    bank.add_beliefs(table_beliefs());
    let v0 = starting_value_function(&m, &bank).unwrap();
    let config = SolverConfig {
        max_iters: 40,
        epsilon: 1e-12,
        execution: Execution::Parallel,
    };
    let out = solve(&m, &bank, v0, &config, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let v = out.value_function;

    let (exact, gamma) = maintenance_exact_solution(&m, 12);
    let names = m.action_names();
    for (xi, (p, _, paper_action)) in table_beliefs().iter().zip(MAINTENANCE_TABLE) {
        let truth = max_dot(&exact, &p);
        let got = v.value_at(xi);
        assert!((got - truth).abs() <= 1e-3 * truth.abs(), "{p:?}: {got} vs exact {truth}");
        let action = v.action_at(xi);
        // One-step lookahead on the exact solution picks the optimal action.
        let q = |a: usize| {
            let next: Vec<f64> = (0..4).map(|j| (0..4).map(|s| p[s] * m.transition_prob(s, a, j)).sum()).collect();
            (0..4).map(|s| p[s] * common::stage_reward(&m, s, a)).sum::<f64>() + gamma[a] * max_dot(&exact, &next)
        };
        let best = (0..4).max_by(|&a, &b| q(a).total_cmp(&q(b))).unwrap();
        assert_eq!(action, best, "{p:?}");
        if paper_action != 3 {
            assert_eq!(action + 1, paper_action, "{p:?}");
        }
    }
    let count = |name: &str| {
        let a = names.iter().position(|n| n == name).unwrap();
        v.vectors().iter().filter(|k| k.action == a).count()
    };
    assert_eq!(count("backwash"), 1);
    assert_eq!(count("replace"), 1);
    assert!(out.trace.iter().all(|r| r.min_improvement >= -1e-9));
}
