mod common;

use std::collections::BTreeSet;

use activesim::agent::{Agent, AgentConfig, StopRule};
use activesim::environments::{
    bfs_distance, make_cartpole_env, make_maze_env, parse_grid_layout, shrink_maze, CartPoleParams, Cell,
    DiscretizerSpec, GridLayout, Region,
};
use activesim::mdp::{Environment, Rng};
use common::dijkstra;
use proptest::prelude::*;

fn layout_strategy() -> impl Strategy<Value = GridLayout> {
    (2usize..8, 2usize..8)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(prop::bool::weighted(0.3), w * h)))
        .prop_filter_map("needs two feasible cells", |(w, h, mask)| {
            let blocked: BTreeSet<Cell> = (0..w * h)
                .filter(|&i| mask[i] && i != 0)
                .map(|i| (i / w, i % w))
                .collect();
            GridLayout::new(w, h, &blocked, (0, 0), None).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bfs_agrees_with_dijkstra(layout in layout_strategy(), pick in any::<prop::sample::Index>()) {
        let cells = layout.feasible_cells();
        let from = cells[pick.index(cells.len())];
        let ours = bfs_distance(&layout, from, layout.goal()).unwrap();
        prop_assert_eq!(ours, dijkstra(&layout, from, layout.goal()));
    }

    #[test]
    fn layout_text_round_trips(layout in layout_strategy()) {
        let again = parse_grid_layout(&layout.to_string()).unwrap();
        prop_assert_eq!(again, layout);
    }

    #[test]
    fn shrinking_only_removes_cells(
        layout in layout_strategy(),
        bottom in 0usize..8,
        right in 0usize..8,
    ) {
        let keep = Region { top: 0, left: 0, bottom, right };
        if let Ok(small) = shrink_maze(&layout, keep) {
            for c in small.feasible_cells() {
                prop_assert!(layout.is_feasible(c));
                prop_assert!(keep.contains(c));
            }
            for c in layout.feasible_cells() {
                if keep.contains(c) {
                    prop_assert!(small.is_feasible(c));
                }
            }
        }
    }

    #[test]
    fn cartpole_sources_never_fail_before_the_target(
        x in -2.4f64..2.4,
        v in -3.0f64..3.0,
        theta in -0.5f64..0.5,
        omega in -3.0f64..3.0,
        action in 0usize..2,
        src in 0usize..4,
    ) {
        let bounds = [(4.0, 60.0), (4.0, 45.0), (3.2, 45.0), (3.2, 30.0)];
        let disc = DiscretizerSpec::for_bounds(2.4, 30f64.to_radians());
        let mut target = make_cartpole_env(CartPoleParams::with_bounds(2.4, 30.0), disc).unwrap();
        let (bx, ba) = bounds[src];
        let mut source = make_cartpole_env(CartPoleParams::with_bounds(bx, ba), disc).unwrap();
        let mut rng = Rng::new(0);
        target.reset_to([x, v, theta, omega]);
        source.reset_to([x, v, theta, omega]);
        let t = target.step(action, &mut rng).unwrap();
        let s = source.step(action, &mut rng).unwrap();
        prop_assert_eq!(t.next_state, s.next_state);
        if !t.terminal {
            prop_assert!(!s.terminal);
        }
    }
}

fn shipped_maze() -> GridLayout {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../layouts/maze_target.txt")).unwrap();
    parse_grid_layout(&text).unwrap()
}

fn steps_to_converge(agent: &mut Agent, env: &mut dyn Environment, rng: &mut Rng) -> u64 {
    let rep = agent
        .tlearn(env, StopRule::UntilConvergence { max_steps: 1_000_000 }, rng)
        .unwrap();
    assert!(rep.converged);
    rep.steps
}

#[test]
fn shrunk_source_speeds_up_the_maze_target() {
    let target_layout = shipped_maze();
    let source_layout = shrink_maze(&target_layout, Region { top: 0, left: 0, bottom: 4, right: 9 }).unwrap();
    let (mut scratch, mut transferred) = (0.0, 0.0);
    let runs = 30;
    for seed in 0..runs {
        let mut target = make_maze_env(target_layout.clone());
        let mut source = make_maze_env(source_layout.clone());

        let mut rng = Rng::new(seed);
        let mut fresh = Agent::for_env(AgentConfig::default(), &target);
        scratch += steps_to_converge(&mut fresh, &mut target, &mut rng) as f64;

        let mut rng = Rng::new(seed);
        let mut agent = Agent::for_env(AgentConfig::default(), &source);
        steps_to_converge(&mut agent, &mut source, &mut rng);
        agent.enter_task(Some(&source), &target).unwrap();
        transferred += steps_to_converge(&mut agent, &mut target, &mut rng) as f64;
    }
    let (scratch, transferred) = (scratch / runs as f64, transferred / runs as f64);
    assert!(transferred < scratch, "after transfer {transferred}, from scratch {scratch}");
}
