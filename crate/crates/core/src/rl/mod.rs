//! Deep Q-learning rebalancing agent.
//!
//! The environment walks a return table in steps of `rebalance_period`
//! days. The agent observes the upper triangle of the trailing-window
//! correlation matrix together with its current weights, and picks one of
//! `2N + 1` actions: buy or sell a `step_delta` slice of one asset, or hold.
//! The reward is the annualized Sharpe ratio of the portfolio over the days
//! the new weights are held.

mod agent;
mod env;
mod model_io;
mod network;
mod replay;
mod tabular;

pub use agent::{
    epsilon_greedy, evaluate, greedy_action, td_target, td_targets, train, write_training_log,
    read_training_log, EpisodeLog, Evaluation,
};
pub use env::{apply_action, corr_features, env_reset, env_step, EnvState, StepOutcome};
pub use model_io::{load_model, read_model, save_model, write_model};
pub use network::{qnet_init, Dense, Gradients, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use tabular::{tabular_q_check, tabular_q_learning, value_iteration, ToyMdp};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Agent and environment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams<T> {
    /// Trailing days used for the correlation state.
    pub window: usize,
    pub episodes: usize,
    pub batch_size: usize,
    /// Days each chosen allocation is held before the next decision.
    pub rebalance_period: usize,
    pub learning_rate: T,
    pub gamma: T,
    pub eps_start: T,
    pub eps_min: T,
    /// Multiplicative decay applied once per episode.
    pub eps_decay: T,
    /// Weight fraction moved by one buy or sell.
    pub step_delta: T,
    pub hidden_dims: Vec<usize>,
    pub replay_capacity: usize,
    pub seed: u64,
    /// Annualization factor for the Sharpe reward.
    pub trading_days: usize,
}

impl<T: Scalar> Default for Hyperparams<T> {
    fn default() -> Self {
        Self {
            window: 60,
            episodes: 50,
            batch_size: 32,
            rebalance_period: 5,
            learning_rate: T::lit(1e-3),
            gamma: T::lit(0.9),
            eps_start: T::one(),
            eps_min: T::lit(0.05),
            eps_decay: T::lit(0.95),
            step_delta: T::lit(0.02),
            hidden_dims: vec![64, 32],
            replay_capacity: 10_000,
            seed: 0,
            trading_days: crate::analytics::DEFAULT_TRADING_DAYS,
        }
    }
}

impl<T: Scalar> Hyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, message: &str| {
            Err(Error::Hyperparam {
                name,
                message: message.to_string(),
            })
        };
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if self.window < 2 {
            return bad("window", "must be at least 2");
        }
        if self.rebalance_period < 1 {
            return bad("rebalance_period", "must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size", "must be at least 1");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity", "must hold at least one batch");
        }
        if !(self.learning_rate > T::zero()) || !self.learning_rate.is_finite() {
            return bad("learning_rate", "must be positive");
        }
        if !unit(self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if !(self.step_delta > T::zero() && self.step_delta < T::one()) {
            return bad("step_delta", "must lie in (0, 1)");
        }
        if !unit(self.eps_start) {
            return bad("eps_start", "must lie in [0, 1]");
        }
        if !unit(self.eps_min) {
            return bad("eps_min", "must lie in [0, 1]");
        }
        if !unit(self.eps_decay) {
            return bad("eps_decay", "must lie in [0, 1]");
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden_dims", "layer widths must be positive");
        }
        if self.trading_days == 0 {
            return bad("trading_days", "must be positive");
        }
        Ok(())
    }
}

/// Discrete action: `2k` buys asset `k`, `2k + 1` sells it, `2N` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Buy(usize),
    Sell(usize),
    Hold,
}

impl Action {
    pub fn count(n_assets: usize) -> usize {
        2 * n_assets + 1
    }

    pub fn buy(asset: usize) -> Self {
        Self(2 * asset)
    }

    pub fn sell(asset: usize) -> Self {
        Self(2 * asset + 1)
    }

    pub fn hold(n_assets: usize) -> Self {
        Self(2 * n_assets)
    }

    pub fn kind(self, n_assets: usize) -> Result<ActionKind> {
        match self.0 {
            id if id == 2 * n_assets => Ok(ActionKind::Hold),
            id if id < 2 * n_assets && id % 2 == 0 => Ok(ActionKind::Buy(id / 2)),
            id if id < 2 * n_assets => Ok(ActionKind::Sell(id / 2)),
            id => Err(Error::Invalid(format!(
                "action {id} out of range for {n_assets} assets"
            ))),
        }
    }
}
