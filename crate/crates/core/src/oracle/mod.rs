//! Exact dynamic programming on tabular MDPs, the tabular Q-learning
//! baseline, and the overestimation gap of a Q-network against `Q*`.

mod mdp;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::MlpNetwork;
use crate::scalar::Scalar;
use crate::schedule::LinearSchedule;

pub use mdp::{argmax, TabularMdp, TabularQ};

pub const MAX_SWEEPS: usize = 100_000;
pub const DEFAULT_TOL: f64 = 1e-10;

/// One synchronous Bellman optimality sweep `(T Q)(s,a) = r + γ max Q(s',·)`.
/// Terminal-state rows stay zero.
pub fn bellman_backup<T: Scalar>(mdp: &TabularMdp<T>, q: &TabularQ<T>) -> TabularQ<T> {
    let mut out = TabularQ::for_mdp(mdp);
    for s in mdp.non_terminal_states() {
        for a in 0..mdp.n_actions() {
            let n = mdp.next_state(s, a);
            let boot = if mdp.is_terminal(n) {
                T::zero()
            } else {
                q.max_value(n)
            };
            out.set(s, a, mdp.reward(s, a) + mdp.gamma() * boot);
        }
    }
    out
}

/// Sup-norm of `T Q − Q`.
pub fn bellman_residual<T: Scalar>(mdp: &TabularMdp<T>, q: &TabularQ<T>) -> T {
    bellman_backup(mdp, q).sup_distance(q)
}

/// Iterates the Bellman optimality operator from zero until the returned
/// table has residual below `tol`.
pub fn value_iteration<T: Scalar>(mdp: &TabularMdp<T>, tol: T) -> Result<TabularQ<T>> {
    let mut q = TabularQ::for_mdp(mdp);
    let mut delta = T::infinity();
    for _ in 0..MAX_SWEEPS {
        let next = bellman_backup(mdp, &q);
        delta = next.sup_distance(&q);
        q = next;
        // ‖TQₖ₊₁ − Qₖ₊₁‖ ≤ γ‖Qₖ₊₁ − Qₖ‖, so checking the residual directly
        // also covers γ = 1.
        if delta < tol && bellman_residual(mdp, &q) < tol {
            return Ok(q);
        }
    }
    Err(Error::NotConverged {
        iterations: MAX_SWEEPS,
        residual: delta.as_f64(),
    })
}

/// Greedy policy (lowest index on ties).
pub fn greedy_policy<T: Scalar>(mdp: &TabularMdp<T>, q: &TabularQ<T>) -> Vec<usize> {
    (0..mdp.n_states()).map(|s| q.greedy_action(s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartState {
    Fixed(usize),
    UniformNonTerminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularQLearningConfig {
    pub episodes: u64,
    pub alpha: f64,
    /// ε as a function of the episode index.
    pub epsilon: LinearSchedule,
    pub start: StartState,
    pub max_steps: usize,
}

/// ε-greedy tabular Q-learning on `mdp` starting from a zero table.
pub fn tabular_q_learning<T: Scalar, R: Rng + ?Sized>(
    mdp: &TabularMdp<T>,
    config: &TabularQLearningConfig,
    rng: &mut R,
) -> Result<TabularQ<T>> {
    // α = 0 is accepted and leaves the table untouched.
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(Error::InvalidConfig(format!(
            "learning rate {} outside [0, 1]",
            config.alpha
        )));
    }
    let starts: Vec<usize> = mdp.non_terminal_states().collect();
    if starts.is_empty() {
        return Err(Error::InvalidConfig("MDP has no non-terminal state".into()));
    }
    if let StartState::Fixed(s) = config.start {
        if s >= mdp.n_states() || mdp.is_terminal(s) {
            return Err(Error::InvalidConfig(format!("invalid start state {s}")));
        }
    }
    let alpha = T::lit(config.alpha);
    let mut q = TabularQ::for_mdp(mdp);
    for episode in 0..config.episodes {
        let eps = config.epsilon.value(episode);
        let mut s = match config.start {
            StartState::Fixed(s) => s,
            StartState::UniformNonTerminal => starts[rng.random_range(0..starts.len())],
        };
        for _ in 0..config.max_steps {
            let a = if rng.random::<f64>() < eps {
                rng.random_range(0..mdp.n_actions())
            } else {
                q.greedy_action(s)
            };
            let n = mdp.next_state(s, a);
            let terminal = mdp.is_terminal(n);
            q.td_update(s, a, mdp.reward(s, a), (!terminal).then_some(n), alpha, mdp.gamma());
            if terminal {
                break;
            }
            s = n;
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverestimationGap {
    /// Mean over non-terminal states of `max_a Q(s, a; θ)`.
    pub mean_max_q: f64,
    /// Mean over the same states of `max_a Q*(s, a)`.
    pub optimal_mean: f64,
    /// `mean_max_q − optimal_mean`; positive means overestimation.
    pub gap: f64,
}

/// Compares a Q-network (deterministic pass) with `Q*` over all
/// non-terminal states, encoding each state index with `encode`.
pub fn overestimation_gap<T, F>(
    net: &MlpNetwork<T>,
    qstar: &TabularQ<T>,
    mdp: &TabularMdp<T>,
    encode: F,
) -> Result<OverestimationGap>
where
    T: Scalar,
    F: Fn(usize) -> Vec<T>,
{
    let states: Vec<usize> = mdp.non_terminal_states().collect();
    if states.is_empty() {
        return Err(Error::InvalidConfig("MDP has no non-terminal state".into()));
    }
    let rows: Vec<Vec<T>> = states.iter().map(|&s| encode(s)).collect();
    let out = net.predict(&Matrix::from_rows(&rows)?)?;
    if out.cols() != mdp.n_actions() {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_actions(),
            got: out.cols(),
        });
    }
    let n = states.len() as f64;
    let mean_max_q = (0..out.rows())
        .map(|r| out.row(r).iter().copied().fold(T::neg_infinity(), T::max).as_f64())
        .sum::<f64>()
        / n;
    let optimal_mean = states.iter().map(|&s| qstar.max_value(s).as_f64()).sum::<f64>() / n;
    Ok(OverestimationGap {
        mean_max_q,
        optimal_mean,
        gap: mean_max_q - optimal_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::gridworld::{GridAction, GridState};
    use crate::nn::{Activation, DenseLayer, Layer, MlpBuilder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> TabularMdp<f64> {
        TabularMdp::gridworld(0.9).unwrap()
    }

    fn one_hot(s: usize) -> Vec<f64> {
        GridState::from_index(s).unwrap().one_hot()
    }

    /// Linear one-hot network reproducing `table + shift` exactly.
    fn tabular_net(q: &TabularQ<f64>, shift: f64, perm: &[usize]) -> MlpNetwork<f64> {
        let (ns, na) = (q.n_states(), q.n_actions());
        let mut w = vec![0.0; ns * na];
        for s in 0..ns {
            for (out, &a) in perm.iter().enumerate() {
                w[out * ns + s] = q.get(s, a) + shift;
            }
        }
        let layer = DenseLayer::from_parts(ns, na, Activation::Identity, w, vec![0.0; na]).unwrap();
        MlpNetwork::from_layers(ns, vec![Layer::Dense(layer)]).unwrap()
    }

    #[test]
    fn self_loop_geometric_series() {
        let mdp = TabularMdp::<f64>::new(1, 1, vec![0], vec![1.0], vec![false], 0.9).unwrap();
        let q = value_iteration(&mdp, 1e-10).unwrap();
        assert!((q.get(0, 0) - 10.0).abs() < 1e-8);
    }

    #[test]
    fn undiscounted_cycle_does_not_converge() {
        let mdp = TabularMdp::new(1, 1, vec![0], vec![1.0], vec![false], 1.0).unwrap();
        assert!(matches!(value_iteration(&mdp, 1e-10), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn one_step_to_goal_is_plus_one() {
        let q = value_iteration(&grid(), 1e-10).unwrap();
        let s = GridState::new(1, 0).unwrap().index();
        assert!((q.get(s, GridAction::West.index()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn start_state_value_closed_form() {
        let q = value_iteration(&grid(), 1e-10).unwrap();
        // Seven discounted −1 rewards, then +1 discounted by γ⁷.
        let closed: f64 = -(0..7).map(|k| 0.9f64.powi(k)).sum::<f64>() + 0.9f64.powi(7);
        assert!((q.max_value(24) - closed).abs() < 1e-9);
        assert!((closed + 4.739).abs() < 1e-3);
    }

    #[test]
    fn bellman_fixed_point_on_every_pair() {
        let mdp = grid();
        let q = value_iteration(&mdp, 1e-10).unwrap();
        for s in 0..25 {
            for a in 0..4 {
                let n = mdp.next_state(s, a);
                let expect = if mdp.is_terminal(s) {
                    0.0
                } else {
                    let boot = if mdp.is_terminal(n) { 0.0 } else { q.max_value(n) };
                    mdp.reward(s, a) + 0.9 * boot
                };
                assert!((q.get(s, a) - expect).abs() < 1e-8);
            }
        }
        assert!(q.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn greedy_policy_takes_shortest_paths() {
        let mdp = grid();
        let q = value_iteration(&mdp, 1e-10).unwrap();
        let pi = greedy_policy(&mdp, &q);
        for s in mdp.non_terminal_states() {
            let mut cur = s;
            let mut steps = 0;
            while !mdp.is_terminal(cur) {
                cur = mdp.next_state(cur, pi[cur]);
                steps += 1;
                assert!(steps <= 8);
            }
            assert_eq!(steps, GridState::from_index(s).unwrap().manhattan_to_goal());
        }
    }

    #[test]
    fn sweeps_from_zero_do_not_decrease_positive_states() {
        let mdp = grid();
        let qstar = value_iteration(&mdp, 1e-10).unwrap();
        let positive: Vec<usize> = mdp
            .non_terminal_states()
            .filter(|&s| qstar.max_value(s) > 0.0)
            .collect();
        assert!(!positive.is_empty());
        let mut q = TabularQ::for_mdp(&mdp);
        for _ in 0..50 {
            let next = bellman_backup(&mdp, &q);
            for &s in &positive {
                assert!(next.max_value(s) >= q.max_value(s));
            }
            q = next;
        }
    }

    #[test]
    fn zero_learning_rate_leaves_table() {
        let cfg = TabularQLearningConfig {
            episodes: 200,
            alpha: 0.0,
            epsilon: LinearSchedule::constant(0.5),
            start: StartState::UniformNonTerminal,
            max_steps: 50,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = tabular_q_learning(&grid(), &cfg, &mut rng).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_table_has_zero_gap() {
        let mdp = grid();
        let qstar = value_iteration(&mdp, 1e-10).unwrap();
        let net = tabular_net(&qstar, 0.0, &[0, 1, 2, 3]);
        let g = overestimation_gap(&net, &qstar, &mdp, one_hot).unwrap();
        assert!(g.gap.abs() < 1e-12);
        let shifted = tabular_net(&qstar, 0.5, &[0, 1, 2, 3]);
        let g = overestimation_gap(&shifted, &qstar, &mdp, one_hot).unwrap();
        assert!((g.gap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gap_ignores_action_order() {
        let mdp = grid();
        let qstar = value_iteration(&mdp, 1e-10).unwrap();
        let a = tabular_net(&qstar, 0.25, &[0, 1, 2, 3]);
        let b = tabular_net(&qstar, 0.25, &[3, 1, 0, 2]);
        let ga = overestimation_gap(&a, &qstar, &mdp, one_hot).unwrap();
        let gb = overestimation_gap(&b, &qstar, &mdp, one_hot).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn untrained_net_gap_is_minus_optimal_mean() {
        let mdp = grid();
        let qstar = value_iteration(&mdp, 1e-10).unwrap();
        let optimal_mean =
            mdp.non_terminal_states().map(|s| qstar.max_value(s)).sum::<f64>() / 24.0;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net: MlpNetwork<f64> = MlpBuilder::new(25)
            .dense(128, Activation::Relu)
            .dense(128, Activation::Relu)
            .dense(4, Activation::Identity)
            .build(&mut rng)
            .unwrap();
        let g = overestimation_gap(&net, &qstar, &mdp, one_hot).unwrap();
        assert!(g.mean_max_q.abs() < 1.0, "mean max q {}", g.mean_max_q);
        assert!((g.optimal_mean - optimal_mean).abs() < 1e-12);
        assert!((g.gap + optimal_mean).abs() < 1.0);
    }

    #[test]
    fn wrong_encoding_width_rejected() {
        let mdp = grid();
        let qstar = value_iteration(&mdp, 1e-10).unwrap();
        let net = tabular_net(&qstar, 0.0, &[0, 1, 2, 3]);
        assert!(overestimation_gap(&net, &qstar, &mdp, |_| vec![0.0; 4]).is_err());
    }
}
