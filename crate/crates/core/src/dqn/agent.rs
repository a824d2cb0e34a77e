use rand::Rng;

use super::config::{AgentConfig, Algorithm};
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{adam_step, Activation, AdamState, ForwardTape, GradientSet, MlpBuilder, MlpNetwork, Mode};
use crate::oracle::argmax;
use crate::scalar::Scalar;

/// Q-network for `algo`: dense ReLU hidden layers and a linear head, with a
/// dropout layer in front of every hidden layer for the dropout variants
/// (input rate before the first, hidden rate before the rest).
pub fn q_network<T: Scalar, R: Rng + ?Sized>(
    input_dim: usize,
    n_actions: usize,
    algo: Algorithm,
    config: &AgentConfig,
    rng: &mut R,
) -> Result<MlpNetwork<T>> {
    let mut b = MlpBuilder::new(input_dim);
    for (i, &width) in config.hidden_sizes.iter().enumerate() {
        if let Some(kind) = algo.dropout_kind() {
            let p = if i == 0 {
                config.input_dropout
            } else {
                config.hidden_dropout
            };
            b = b.dropout(kind, p);
        }
        b = b.dense(width, Activation::Relu);
    }
    b.dense(n_actions, Activation::Identity).build(rng)
}

/// ε-greedy action. The greedy branch uses a deterministic pass when
/// `mc_samples == 0`, otherwise the mean over `mc_samples` noisy passes.
/// Ties go to the lowest action index.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    net: &MlpNetwork<T>,
    obs: &[T],
    epsilon: f64,
    rng: &mut R,
    mc_samples: usize,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let n_actions = net.output_dim();
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..n_actions));
    }
    let q = greedy_values(net, obs, rng, mc_samples)?;
    Ok(argmax(&q))
}

fn greedy_values<T: Scalar, R: Rng + ?Sized>(
    net: &MlpNetwork<T>,
    obs: &[T],
    rng: &mut R,
    mc_samples: usize,
) -> Result<Vec<T>> {
    if mc_samples == 0 {
        let x = Matrix::from_vec(1, obs.len(), obs.to_vec())?;
        return Ok(net.predict(&x)?.into_vec());
    }
    // K stacked copies get independent noise, same as K separate passes.
    let rows: Vec<&[T]> = vec![obs; mc_samples];
    let (out, _) = net.forward(&Matrix::from_rows(&rows)?, Mode::Train, rng)?;
    let k = T::lit(mc_samples as f64);
    Ok((0..out.cols())
        .map(|a| (0..out.rows()).map(|r| out.get(r, a)).sum::<T>() / k)
        .collect())
}

/// TD targets `r` (terminal) or `r + γ max_a' Q(s', a'; θ⁻)` with the
/// target network in deterministic mode.
pub fn compute_targets<T: Scalar>(
    target_net: &MlpNetwork<T>,
    batch: &[&Transition<T>],
    gamma: T,
) -> Result<Vec<T>> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let rows: Vec<&[T]> = batch.iter().map(|t| t.next_obs.as_slice()).collect();
    let next_q = target_net.predict(&Matrix::from_rows(&rows)?)?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                t.reward
            } else {
                let best = next_q.row(i).iter().copied().fold(T::neg_infinity(), T::max);
                t.reward + gamma * best
            }
        })
        .collect())
}

/// Mean squared TD error over the taken actions.
pub fn td_loss<T: Scalar>(q: &Matrix<T>, actions: &[usize], targets: &[T]) -> T {
    let n = T::lit(actions.len() as f64);
    actions
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (&a, &y))| {
            let d = q.get(i, a) - y;
            d * d
        })
        .sum::<T>()
        / n
}

/// Full training objective (TD loss plus weighted KL penalty) and its
/// gradient, given a Train-mode tape for the batch and its output `q`.
pub fn dqn_loss_and_grad<T: Scalar>(
    net: &MlpNetwork<T>,
    tape: &ForwardTape<T>,
    q: &Matrix<T>,
    actions: &[usize],
    targets: &[T],
    kl_weight: T,
) -> Result<(T, GradientSet<T>)> {
    if actions.len() != q.rows() || targets.len() != q.rows() {
        return Err(Error::DimensionMismatch {
            expected: q.rows(),
            got: actions.len().min(targets.len()),
        });
    }
    if let Some(&bad) = actions.iter().find(|&&a| a >= q.cols()) {
        return Err(Error::InvalidConfig(format!("action {bad} out of range")));
    }
    let scale = T::lit(2.0) / T::lit(actions.len() as f64);
    let mut grad_out = Matrix::zeros(q.rows(), q.cols());
    for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        grad_out.set(i, a, scale * (q.get(i, a) - y));
    }
    let mut grads = net.backward(tape, &grad_out)?;
    let mut loss = td_loss(q, actions, targets);
    if net.has_variational() && kl_weight > T::zero() {
        loss += kl_weight * net.kl_penalty();
        net.add_kl_grad(kl_weight, &mut grads);
    }
    Ok((loss, grads))
}

/// One minibatch update of the online network. Returns the loss before the
/// step.
pub fn train_step<T: Scalar, R: Rng + ?Sized>(
    net: &mut MlpNetwork<T>,
    target_net: &MlpNetwork<T>,
    buffer: &ReplayBuffer<T>,
    adam: &mut AdamState<T>,
    config: &AgentConfig,
    rng: &mut R,
) -> Result<T> {
    if buffer.len() < config.warmup_transitions {
        return Err(Error::Misuse(format!(
            "train_step with {} transitions, warmup needs {}",
            buffer.len(),
            config.warmup_transitions
        )));
    }
    let batch = buffer.sample(config.batch_size, rng)?;
    let targets = compute_targets(target_net, &batch, T::lit(config.gamma))?;
    let rows: Vec<&[T]> = batch.iter().map(|t| t.obs.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let (q, tape) = net.forward(&Matrix::from_rows(&rows)?, Mode::Train, rng)?;
    let (loss, mut grads) = dqn_loss_and_grad(net, &tape, &q, &actions, &targets, T::lit(config.kl_weight))?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training loss {loss}")));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("training gradient".into()));
    }
    if let Some(max_norm) = config.grad_clip {
        grads.clip_global_norm(T::lit(max_norm));
    }
    adam_step(net, &grads, adam, T::lit(config.lr))?;
    if !net.parameters_finite() {
        return Err(Error::NonFinite("parameters after ADAM step".into()));
    }
    Ok(loss)
}

/// `θ⁻ := θ`.
pub fn sync_target<T: Scalar>(net: &MlpNetwork<T>, target_net: &mut MlpNetwork<T>) -> Result<()> {
    target_net.copy_params_from(net)
}
