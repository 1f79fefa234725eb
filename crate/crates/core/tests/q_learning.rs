mod common;

use activesim::agent::{Agent, AgentConfig, StopRule};
use activesim::environments::TableEnv;
use activesim::mdp::{Environment, Rng};
use common::{chain, explorer, oracle_gap, sweep, value_iteration};
use proptest::prelude::*;

fn check_against_oracle(agent: &Agent, env: &TableEnv) {
    let (gap, policy_ok) = oracle_gap(agent, env, 1e-3);
    assert!(gap < 1e-3, "max |Q - Q*| = {gap}");
    assert!(policy_ok, "greedy policy is not optimal");
}

#[test]
fn corridor_converges_to_value_iteration() {
    let env = TableEnv::corridor(5, 50);
    let mut agent = Agent::for_env(explorer(), &env);
    let mut rng = Rng::new(11);
    sweep(&mut agent, &env, 100, &mut rng);
    check_against_oracle(&agent, &env);
}

#[test]
fn convergence_rule_reaches_optimal_path_values() {
    let env = TableEnv::corridor(5, 50);
    let q_star = value_iteration(&env, 0.9);
    let mut agent = Agent::for_env(AgentConfig::default(), &env);
    let mut rng = Rng::new(3);
    let mut e = env.clone();
    let rep = agent
        .tlearn(&mut e, StopRule::UntilConvergence { max_steps: 1_000_000 }, &mut rng)
        .unwrap();
    assert!(rep.converged);
    // Follow the greedy policy from the start; every visited value must match.
    let mut s = env.state_count() - 1;
    let mut hops = 0;
    while !env.is_absorbing(s) {
        let a = agent.q.argmax(s);
        let best = q_star[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((agent.q.get(s, a) - best).abs() < 1e-3);
        s = env.successor(s, a);
        hops += 1;
        assert!(hops <= env.state_count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_chains_match_value_iteration(
        rewards in prop::collection::vec([0.0f64..1.0, 0.0f64..1.0], 2..=5),
        seed in any::<u64>(),
    ) {
        let env = chain(&rewards);
        let mut agent = Agent::for_env(explorer(), &env);
        let mut rng = Rng::new(seed);
        sweep(&mut agent, &env, 150, &mut rng);
        check_against_oracle(&agent, &env);
    }

    #[test]
    fn random_tables_match_value_iteration(
        n in 2usize..=5,
        next in prop::collection::vec(0usize..5, 15),
        rewards in prop::collection::vec(-1.0f64..1.0, 15),
        seed in any::<u64>(),
    ) {
        let m = 3;
        let next: Vec<Vec<usize>> = (0..n).map(|s| (0..m).map(|a| next[s * m + a] % n).collect()).collect();
        let reward: Vec<Vec<f64>> = (0..n).map(|s| (0..m).map(|a| rewards[s * m + a]).collect()).collect();
        let mut absorbing = vec![false; n];
        absorbing[0] = true;
        let env = TableEnv::new(next, reward, absorbing, n - 1, 20);
        let mut agent = Agent::for_env(explorer(), &env);
        let mut rng = Rng::new(seed);
        sweep(&mut agent, &env, 150, &mut rng);
        check_against_oracle(&agent, &env);
    }

    #[test]
    fn reward_scaling_scales_q_and_keeps_argmax(
        rewards in prop::collection::vec([0.0f64..1.0, 0.0f64..1.0], 2..=5),
        shift in -3i32..=3,
        seed in any::<u64>(),
    ) {
        // Powers of two make the scaling exact in floating point.
        let c = 2f64.powi(shift);
        let env = chain(&rewards);
        let scaled = env.scaled(c);
        let mut a = Agent::for_env(AgentConfig::default(), &env);
        let mut b = Agent::for_env(AgentConfig::default(), &scaled);
        let (mut ea, mut eb) = (env.clone(), scaled.clone());
        a.tlearn(&mut ea, StopRule::FixedSteps(3000), &mut Rng::new(seed)).unwrap();
        b.tlearn(&mut eb, StopRule::FixedSteps(3000), &mut Rng::new(seed)).unwrap();
        for s in 0..env.state_count() {
            prop_assert_eq!(a.q.argmax(s), b.q.argmax(s));
            for act in 0..2 {
                prop_assert_eq!(a.q.get(s, act) * c, b.q.get(s, act));
            }
        }
    }
}

/// Normal-approximation bound on a binomial count.
fn within_binomial(count: usize, n: usize, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 4.5 * sd
}

#[test]
fn epsilon_greedy_frequencies() {
    for (eps, seed) in [(0.3, 1u64), (0.05, 2), (1.0, 3)] {
        let mut agent = Agent::new(
            AgentConfig {
                epsilon_floor: 0.0,
                ..AgentConfig::default()
            },
            1,
            3,
        );
        agent.set_epsilon(eps);
        agent.q.set(0, 1, 1.0);
        let mut rng = Rng::new(seed);
        let n = 20_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[agent.select_action(0, &mut rng)] += 1;
        }
        let greedy_p = 1.0 - eps + eps / 3.0;
        assert!(within_binomial(counts[1], n, greedy_p), "eps {eps}: {counts:?}");
        assert!(within_binomial(counts[0], n, eps / 3.0), "eps {eps}: {counts:?}");
        assert!(within_binomial(counts[2], n, eps / 3.0), "eps {eps}: {counts:?}");
    }
}

#[test]
fn floor_applies_below_decayed_epsilon() {
    let mut agent = Agent::new(AgentConfig::default(), 1, 2);
    agent.set_epsilon(0.0);
    agent.q.set(0, 0, 1.0);
    let mut rng = Rng::new(5);
    let n = 50_000;
    let off = (0..n).filter(|_| agent.select_action(0, &mut rng) == 1).count();
    // Floor 0.01 over two actions: the other action is drawn with p = 0.005.
    assert!(within_binomial(off, n, 0.005), "{off}");
}

#[test]
fn epsilon_decays_once_per_episode() {
    let env = TableEnv::corridor(3, 10);
    let mut agent = Agent::for_env(AgentConfig::default(), &env);
    let mut e = env.clone();
    let rep = agent
        .tlearn(&mut e, StopRule::Episodes { episodes: 7, max_steps: 10_000 }, &mut Rng::new(0))
        .unwrap();
    assert_eq!(rep.episodes.len(), 7);
    assert!((agent.epsilon() - 0.99f64.powi(7)).abs() < 1e-12);
}
