use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{Curve, ReturnTable};
use crate::backtest::{run_backtest, Method, Phase, ReportLabel, WeightSchedule};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::env::{env_reset, env_step};
use super::network::{qnet_init, QNetwork};
use super::replay::{ReplayBuffer, Transition};
use super::{Action, Hyperparams};

/// `r + gamma * max_a' Q(s', a')`, or just `r` for a terminal transition.
#[inline]
pub fn td_target<T: Scalar>(reward: T, gamma: T, next_max: T, done: bool) -> T {
    if done {
        reward
    } else {
        reward + gamma * next_max
    }
}

fn max_value<T: Scalar>(q: &[T]) -> T {
    q.iter().copied().fold(T::neg_infinity(), T::max)
}

pub fn td_targets<T: Scalar>(batch: &[&Transition<T>], net: &QNetwork<T>, gamma: T) -> Result<Vec<T>> {
    batch
        .iter()
        .map(|t| {
            let next_max = if t.done {
                T::zero()
            } else {
                max_value(&net.forward(&t.next_state)?)
            };
            Ok(td_target(t.reward, gamma, next_max, t.done))
        })
        .collect()
}

/// Highest-valued action, lowest id on ties.
pub fn greedy_action<T: Scalar>(qvals: &[T]) -> Action {
    let mut best = 0;
    for (i, &q) in qvals.iter().enumerate().skip(1) {
        if q > qvals[best] {
            best = i;
        }
    }
    Action(best)
}

/// With probability `epsilon` a uniformly random action, otherwise greedy.
/// One uniform draw is consumed on every call.
pub fn epsilon_greedy<T: Scalar, R: Rng>(qvals: &[T], epsilon: T, rng: &mut R) -> Action {
    let u: f64 = rng.random();
    if u < epsilon.to_f64_lossy() {
        Action(rng.random_range(0..qvals.len()))
    } else {
        greedy_action(qvals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog<T> {
    pub episode: usize,
    pub cum_reward: T,
    /// `None` until the replay buffer holds a full batch.
    pub mean_loss: Option<T>,
    /// Exploration rate used during the episode.
    pub epsilon: T,
}

/// Trains a Q-network on the return table. Deterministic for a fixed seed:
/// the network is initialized from stream 0 of the seed and exploration and
/// replay sampling draw from stream 1.
pub fn train<T: Scalar>(
    returns: &ReturnTable<T>,
    hp: &Hyperparams<T>,
) -> Result<(QNetwork<T>, Vec<EpisodeLog<T>>)> {
    hp.validate()?;
    let mut net = qnet_init(returns.n_assets(), hp);
    if hp.episodes == 0 {
        return Ok((net, Vec::new()));
    }
    // fail before the loop on short tables
    env_reset(returns, hp)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    rng.set_stream(1);
    let mut buffer = ReplayBuffer::new(hp.replay_capacity);
    let mut epsilon = hp.eps_start;
    let mut log = Vec::with_capacity(hp.episodes);

    for episode in 0..hp.episodes {
        let mut state = env_reset(returns, hp)?;
        let mut cum_reward = T::zero();
        let mut loss_sum = T::zero();
        let mut loss_count = 0usize;
        loop {
            let features = state.features();
            let action = epsilon_greedy(&net.forward(&features)?, epsilon, &mut rng);
            let out = env_step(&state, action, returns, hp)?;
            cum_reward = cum_reward + out.reward;
            buffer.push(Transition {
                state: features,
                action,
                reward: out.reward,
                next_state: out.next.features(),
                done: out.done,
            });
            if buffer.len() >= hp.batch_size {
                let batch = buffer.sample(&mut rng, hp.batch_size);
                let targets = td_targets(&batch, &net, hp.gamma)?;
                let loss = net
                    .train_step(&batch, &targets, hp.learning_rate)
                    .map_err(|e| match e {
                        Error::Divergence { step, .. } => Error::Divergence {
                            episode: Some(episode),
                            step,
                        },
                        other => other,
                    })?;
                loss_sum = loss_sum + loss;
                loss_count += 1;
            }
            state = out.next;
            if out.done {
                break;
            }
        }
        log.push(EpisodeLog {
            episode,
            cum_reward,
            mean_loss: (loss_count > 0).then(|| loss_sum / T::from_count(loss_count)),
            epsilon,
        });
        epsilon = (epsilon * hp.eps_decay).max(hp.eps_min);
    }
    Ok((net, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    /// Weights held on every return date of the evaluated table. The first
    /// `window` days, before the first decision, hold equal weights.
    pub schedule: WeightSchedule<T>,
    pub actions: Vec<Action>,
    pub curve: Curve<T>,
    /// Annualized Sharpe of the daily portfolio returns, zero risk-free rate.
    pub sharpe: T,
}

/// Greedy rollout of the trained policy over a return table.
pub fn evaluate<T: Scalar>(
    net: &QNetwork<T>,
    returns: &ReturnTable<T>,
    hp: &Hyperparams<T>,
) -> Result<Evaluation<T>> {
    let n = returns.n_assets();
    let mut state = env_reset(returns, hp)?;
    let mut rows: Vec<T> = Vec::with_capacity(returns.n_rows() * n);
    for _ in 0..state.t {
        rows.extend_from_slice(&state.weights);
    }
    let mut actions = Vec::new();
    loop {
        let action = greedy_action(&net.forward(&state.features())?);
        let out = env_step(&state, action, returns, hp)?;
        actions.push(action);
        for _ in state.t..out.next.t {
            rows.extend_from_slice(&out.next.weights);
        }
        state = out.next;
        if out.done {
            break;
        }
    }
    for _ in state.t..returns.n_rows() {
        rows.extend_from_slice(&state.weights);
    }
    let schedule = WeightSchedule::new(
        returns.dates().to_vec(),
        Matrix::from_vec(returns.n_rows(), n, rows)?,
    )?;
    let label = ReportLabel {
        dataset: "",
        method: Method::Rl,
        phase: Phase::Test,
    };
    let report = run_backtest(label, &schedule, returns, T::zero(), hp.trading_days)?;
    Ok(Evaluation {
        schedule,
        actions,
        curve: report.curve,
        sharpe: report.sharpe,
    })
}

/// CSV `episode,cum_reward,mean_loss,epsilon`; an empty `mean_loss` means
/// no update happened during the episode.
pub fn write_training_log<T: Scalar, W: Write>(log: &[EpisodeLog<T>], mut w: W) -> Result<()> {
    writeln!(w, "episode,cum_reward,mean_loss,epsilon")?;
    for e in log {
        let loss = e.mean_loss.map_or_else(String::new, |l| l.to_string());
        writeln!(w, "{},{},{},{}", e.episode, e.cum_reward, loss, e.epsilon)?;
    }
    Ok(())
}

pub fn read_training_log<T: Scalar, R: Read>(mut r: R) -> Result<Vec<EpisodeLog<T>>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines();
    if lines.next() != Some("episode,cum_reward,mean_loss,epsilon") {
        return Err(Error::Schema("unexpected training log header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Parse {
                row: i + 2,
                message: format!("bad training log line {line:?}"),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(EpisodeLog {
                episode: f[0].parse().map_err(|_| bad())?,
                cum_reward: f[1].parse().map_err(|_| bad())?,
                mean_loss: if f[2].is_empty() {
                    None
                } else {
                    Some(f[2].parse().map_err(|_| bad())?)
                },
                epsilon: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
