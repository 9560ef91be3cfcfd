use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::agent::td_target;

/// Deterministic finite MDP. `next[s][a]` is the successor state, `None`
/// marks a terminal transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyMdp<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub next: Vec<Vec<Option<usize>>>,
    pub reward: Vec<Vec<T>>,
}

impl<T: Scalar> ToyMdp<T> {
    pub fn validate(&self) -> Result<()> {
        let shape_ok = self.n_states > 0
            && self.n_actions > 0
            && self.next.len() == self.n_states
            && self.reward.len() == self.n_states
            && self.next.iter().all(|r| r.len() == self.n_actions)
            && self.reward.iter().all(|r| r.len() == self.n_actions);
        if !shape_ok {
            return Err(Error::Dimension("MDP tables do not match state and action counts".into()));
        }
        if self.next.iter().flatten().flatten().any(|&s| s >= self.n_states) {
            return Err(Error::Invalid("MDP successor out of range".into()));
        }
        Ok(())
    }
}

fn row_max<T: Scalar>(row: &[T]) -> T {
    row.iter().copied().fold(T::neg_infinity(), T::max)
}

/// Optimal action values by repeated Bellman backups until the sup-norm
/// change drops below `tol`.
pub fn value_iteration<T: Scalar>(mdp: &ToyMdp<T>, gamma: T, tol: T, max_iter: usize) -> Result<Vec<Vec<T>>> {
    mdp.validate()?;
    if !(gamma >= T::zero() && gamma < T::one()) {
        return Err(Error::Hyperparam {
            name: "gamma",
            message: "value iteration needs 0 <= gamma < 1".into(),
        });
    }
    let mut q = vec![vec![T::zero(); mdp.n_actions]; mdp.n_states];
    for _ in 0..max_iter {
        let v: Vec<T> = q.iter().map(|r| row_max(r)).collect();
        let mut change = T::zero();
        for (s, row) in q.iter_mut().enumerate() {
            for (a, cell) in row.iter_mut().enumerate() {
                let updated = match mdp.next[s][a] {
                    Some(s2) => td_target(mdp.reward[s][a], gamma, v[s2], false),
                    None => mdp.reward[s][a],
                };
                change = change.max((updated - *cell).abs());
                *cell = updated;
            }
        }
        if change < tol {
            return Ok(q);
        }
    }
    Err(Error::Invalid(format!("value iteration did not converge in {max_iter} sweeps")))
}

/// Q-learning with a uniformly random behavior policy. A terminal
/// transition restarts from a uniformly random state.
pub fn tabular_q_learning<T: Scalar>(
    mdp: &ToyMdp<T>,
    gamma: T,
    alpha: T,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    mdp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![vec![T::zero(); mdp.n_actions]; mdp.n_states];
    let mut s = 0;
    for _ in 0..steps {
        let a = rng.random_range(0..mdp.n_actions);
        let (target, s2) = match mdp.next[s][a] {
            Some(s2) => (td_target(mdp.reward[s][a], gamma, row_max(&q[s2]), false), s2),
            None => (mdp.reward[s][a], rng.random_range(0..mdp.n_states)),
        };
        q[s][a] = q[s][a] + alpha * (target - q[s][a]);
        s = s2;
    }
    Ok(q)
}

/// Largest absolute gap between Q-learning and value-iteration values.
pub fn tabular_q_check<T: Scalar>(mdp: &ToyMdp<T>, gamma: T, alpha: T, steps: usize, seed: u64) -> Result<T> {
    let exact = value_iteration(mdp, gamma, T::lit(1e-12), 100_000)?;
    let learned = tabular_q_learning(mdp, gamma, alpha, steps, seed)?;
    Ok(exact
        .iter()
        .flatten()
        .zip(learned.iter().flatten())
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ToyMdp<f64> {
        // action 0 stays, action 1 moves; reward only for staying in state 1
        ToyMdp {
            n_states: 2,
            n_actions: 2,
            next: vec![vec![Some(0), Some(1)], vec![Some(1), Some(0)]],
            reward: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        }
    }

    #[test]
    fn chain_value_iteration_closed_form() {
        let q = value_iteration(&chain(), 0.9, 1e-13, 10_000).unwrap();
        // V(1) = 1 / (1 - 0.9) = 10, V(0) = 0.9 * 10 = 9
        assert!((q[1][0] - 10.0).abs() < 1e-9);
        assert!((q[0][1] - 9.0).abs() < 1e-9);
        assert!((q[0][0] - 8.1).abs() < 1e-9);
        assert!((q[1][1] - 8.1).abs() < 1e-9);
    }

    #[test]
    fn chain_q_learning_converges() {
        let err = tabular_q_check(&chain(), 0.9, 0.1, 10_000, 7).unwrap();
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn myopic_q_equals_reward() {
        let mdp = ToyMdp {
            n_states: 3,
            n_actions: 2,
            next: vec![vec![Some(1), Some(2)], vec![Some(2), None], vec![Some(0), Some(1)]],
            reward: vec![vec![0.5, -1.0], vec![2.0, 0.25], vec![-0.75, 3.0]],
        };
        let q = tabular_q_learning(&mdp, 0.0, 1.0, 500, 1).unwrap();
        assert_eq!(q, mdp.reward);
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = ToyMdp {
            n_states: 1,
            n_actions: 1,
            next: vec![vec![Some(0)]],
            reward: vec![vec![1.0]],
        };
        let q: Vec<Vec<f64>> = value_iteration(&mdp, 0.5, 1e-14, 1000).unwrap();
        assert!((q[0][0] - 2.0).abs() < 1e-12);
        assert!(tabular_q_check(&mdp, 0.5, 0.5, 200, 0).unwrap() < 1e-9);
    }

    #[test]
    fn rejects_bad_tables() {
        let mut mdp = chain();
        mdp.next[0][1] = Some(5);
        assert!(value_iteration(&mdp, 0.9, 1e-9, 10).is_err());
        assert!(value_iteration(&chain(), 1.0, 1e-9, 10).is_err());
    }
}
