//! Value iteration and tabular Q-learning on the Gridworld, checked against
//! shortest-path closed forms and each other.

use dropq_core::envs::gridworld::{grid_transition, GridAction, GridState};
use dropq_core::oracle::{
    bellman_residual, greedy_policy, tabular_q_learning, value_iteration, StartState,
    TabularQLearningConfig, DEFAULT_TOL,
};
use dropq_core::schedule::LinearSchedule;
use dropq_core::{Mdp, QTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Optimal value of a state `d` moves from the goal: `d − 1` rewards of −1
/// discounted, then +1.
fn shortest_path_value(d: usize, gamma: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    -(1.0 - gamma.powi(d as i32 - 1)) / (1.0 - gamma) + gamma.powi(d as i32 - 1)
}

#[test]
fn optimal_values_match_shortest_paths() {
    let mdp = Mdp::gridworld(0.9).unwrap();
    let q = value_iteration(&mdp, DEFAULT_TOL).unwrap();
    for s in 0..25 {
        let g = GridState::from_index(s).unwrap();
        let want = shortest_path_value(g.manhattan_to_goal(), 0.9);
        assert!((q.max_value(s) - want).abs() < 1e-8, "{g:?}");
    }
    assert!((q.max_value(GridState::START.index()) - (-4.739)).abs() < 1e-3);
    assert!(bellman_residual(&mdp, &q) <= 1e-8);
}

#[test]
fn bellman_fixed_point_on_every_pair() {
    let mdp = Mdp::gridworld(0.9).unwrap();
    let q = value_iteration(&mdp, DEFAULT_TOL).unwrap();
    for s in 0..25 {
        for a in GridAction::ALL {
            let here = GridState::from_index(s).unwrap();
            if here.is_goal() {
                assert_eq!(q.get(s, a.index()), 0.0);
                continue;
            }
            let (next, r) = grid_transition(here, a);
            let boot = if next.is_goal() { 0.0 } else { 0.9 * q.max_value(next.index()) };
            assert!((q.get(s, a.index()) - (r + boot)).abs() <= 1e-8);
        }
    }
}

#[test]
fn greedy_policy_walks_shortest_paths() {
    let mdp = Mdp::gridworld(0.9).unwrap();
    let q = value_iteration(&mdp, DEFAULT_TOL).unwrap();
    let pi = greedy_policy(&mdp, &q);
    for s in 0..25 {
        let mut g = GridState::from_index(s).unwrap();
        let d = g.manhattan_to_goal();
        let mut steps = 0;
        while !g.is_goal() {
            g = grid_transition(g, GridAction::from_index(pi[g.index()]).unwrap()).0;
            steps += 1;
            assert!(steps <= 8);
        }
        assert_eq!(steps, d);
    }
}

#[test]
fn one_q_learning_update_by_hand() {
    let mdp = Mdp::gridworld(0.9).unwrap();
    let start = GridState::new(1, 0).unwrap().index();
    let cfg = TabularQLearningConfig {
        episodes: 1,
        alpha: 0.5,
        epsilon: LinearSchedule::constant(0.0),
        start: StartState::Fixed(start),
        max_steps: 1,
    };
    // Greedy on an all-zero table takes action 0 (North) to (1,1).
    let q: QTable = tabular_q_learning(&mdp, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let a = GridAction::North.index();
    // −1 plus 0.9 · 0 bootstrap, half-stepped from 0.
    assert_eq!(q.get(start, a), -0.5);
    // The one-step route to the goal: +1, terminal.
    let mut west = QTable::zeros(25, 4);
    west.td_update(start, GridAction::West.index(), 1.0, None, 0.5, 0.9);
    assert_eq!(west.get(start, GridAction::West.index()), 0.5);
}

#[test]
fn tabular_q_learning_converges_to_value_iteration() {
    let mdp = Mdp::gridworld(0.9).unwrap();
    let qstar = value_iteration(&mdp, DEFAULT_TOL).unwrap();
    let cfg = TabularQLearningConfig {
        episodes: 50_000,
        alpha: 0.1,
        epsilon: LinearSchedule::new(1.0, 0.05, 50_000),
        start: StartState::UniformNonTerminal,
        max_steps: 50,
    };
    let q = tabular_q_learning(&mdp, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let d = q.sup_distance(&qstar);
    assert!(d < 0.05, "sup distance {d}");
}
