use crate::analytics::{correlation_from_covariance, covariance_of, mean, sample_std, ReturnTable};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::Scalar;

use super::{Action, ActionKind, Hyperparams};

/// Volatility floor in the Sharpe reward.
const REWARD_VOL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState<T> {
    /// Upper triangle (row-major, `i < j`) of the trailing correlation matrix.
    pub corr_features: Vec<T>,
    pub weights: Vec<T>,
    /// Index of the next return row the portfolio will earn.
    pub t: usize,
}

impl<T: Scalar> EnvState<T> {
    /// Network input: correlation features followed by weights.
    pub fn features(&self) -> Vec<T> {
        let mut f = Vec::with_capacity(self.corr_features.len() + self.weights.len());
        f.extend_from_slice(&self.corr_features);
        f.extend_from_slice(&self.weights);
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub next: EnvState<T>,
    pub reward: T,
    pub done: bool,
}

/// Correlation features of return rows `end - window .. end`.
pub fn corr_features<T: Scalar>(returns: &ReturnTable<T>, end: usize, window: usize) -> Vec<T> {
    let block = returns.values().row_range(end - window, end);
    let corr = correlation_from_covariance(&covariance_of(&block));
    let n = corr.nrows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(corr[(i, j)]);
        }
    }
    out
}

/// Applies a buy/sell/hold to the weights and renormalizes onto the simplex.
pub fn apply_action<T: Scalar>(weights: &[T], action: Action, delta: T) -> Result<Vec<T>> {
    let mut w = weights.to_vec();
    match action.kind(weights.len())? {
        ActionKind::Hold => return Ok(w),
        ActionKind::Buy(k) => w[k] = w[k] + delta,
        ActionKind::Sell(k) => w[k] = (w[k] - delta).max(T::zero()),
    }
    let total: T = w.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::InvalidPortfolio("action removed every position".into()));
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

pub fn env_reset<T: Scalar>(returns: &ReturnTable<T>, hp: &Hyperparams<T>) -> Result<EnvState<T>> {
    hp.validate()?;
    if returns.n_rows() <= hp.window + hp.rebalance_period {
        return Err(Error::InsufficientData(format!(
            "{} return rows, need more than window {} + rebalance period {}",
            returns.n_rows(),
            hp.window,
            hp.rebalance_period
        )));
    }
    let n = returns.n_assets();
    Ok(EnvState {
        corr_features: corr_features(returns, hp.window, hp.window),
        weights: vec![T::one() / T::from_count(n); n],
        t: hp.window,
    })
}

/// Applies `action`, holds the new weights for `rebalance_period` days and
/// scores them by annualized Sharpe (zero risk-free rate).
pub fn env_step<T: Scalar>(
    state: &EnvState<T>,
    action: Action,
    returns: &ReturnTable<T>,
    hp: &Hyperparams<T>,
) -> Result<StepOutcome<T>> {
    let end = state.t + hp.rebalance_period;
    if end > returns.n_rows() || state.t < hp.window {
        return Err(Error::InsufficientData(format!(
            "step from day {} needs rows up to {end}, table has {}",
            state.t,
            returns.n_rows()
        )));
    }
    if state.weights.len() != returns.n_assets() {
        return Err(Error::Dimension("state weights do not match the return table".into()));
    }
    let weights = apply_action(&state.weights, action, hp.step_delta)?;
    let daily: Vec<T> = (state.t..end).map(|t| dot(&weights, returns.row(t))).collect();
    let vol = if daily.len() > 1 { sample_std(&daily) } else { T::zero() };
    let days = T::from_count(hp.trading_days);
    let reward = mean(&daily) * days / (vol.max(T::lit(REWARD_VOL_FLOOR)) * days.sqrt());
    Ok(StepOutcome {
        next: EnvState {
            corr_features: corr_features(returns, end, hp.window),
            weights,
            t: end,
        },
        reward,
        done: returns.n_rows() - end < hp.rebalance_period,
    })
}
