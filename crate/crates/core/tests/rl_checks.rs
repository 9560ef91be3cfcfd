use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use plab_core::analytics::ReturnTable;
use plab_core::linalg::Matrix;
use plab_core::rl::{
    env_reset, env_step, qnet_init, tabular_q_check, td_targets, train, Action, Hyperparams, QNetwork, ToyMdp,
    Transition,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Forward pass from the flat parameter vector with nalgebra arithmetic.
fn oracle_forward(dims: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut a = DVector::from_column_slice(x);
    let mut offset = 0;
    for (k, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = DMatrix::from_row_slice(fan_out, fan_in, &params[offset..offset + fan_in * fan_out]);
        offset += fan_in * fan_out;
        let bias = DVector::from_column_slice(&params[offset..offset + fan_out]);
        offset += fan_out;
        let z = weights * a + bias;
        a = if k + 2 < dims.len() { z.map(|v| v.max(0.0)) } else { z };
    }
    a.iter().copied().collect()
}

fn oracle_loss(dims: &[usize], params: &[f64], states: &[Vec<f64>], actions: &[Action], targets: &[f64]) -> f64 {
    let total: f64 = states
        .iter()
        .zip(actions)
        .zip(targets)
        .map(|((s, a), y)| {
            let e = oracle_forward(dims, params, s)[a.0] - y;
            e * e
        })
        .sum();
    total / states.len() as f64
}

struct Case {
    net: QNetwork<f64>,
    states: Vec<Vec<f64>>,
    actions: Vec<Action>,
    targets: Vec<f64>,
}

fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.random_range(2..8);
    let mut dims = vec![input];
    for _ in 0..rng.random_range(0..3) {
        dims.push(rng.random_range(2..10));
    }
    dims.push(rng.random_range(1..6));
    let mut net = QNetwork::glorot(&dims, seed);
    // non-zero biases so the check covers them
    let params: Vec<f64> = net.params().iter().map(|p| p + rng.random_range(-0.1..0.1)).collect();
    net.set_params(&params).unwrap();
    let batch = rng.random_range(1..9);
    let out = *dims.last().unwrap();
    Case {
        states: (0..batch)
            .map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
        actions: (0..batch).map(|_| Action(rng.random_range(0..out))).collect(),
        targets: (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect(),
        net,
    }
}

#[test]
fn forward_matches_matrix_oracle() {
    for seed in 0..30 {
        let c = random_case(seed);
        let params = c.net.params();
        for s in &c.states {
            let got = c.net.forward(s).unwrap();
            let want = oracle_forward(&c.net.dims(), &params, s);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..40 {
        let c = random_case(seed);
        let dims = c.net.dims();
        let refs: Vec<&[f64]> = c.states.iter().map(Vec::as_slice).collect();
        let (loss, grads) = c.net.loss_and_gradient(&refs, &c.actions, &c.targets).unwrap();
        let params = c.net.params();
        assert!((loss - oracle_loss(&dims, &params, &c.states, &c.actions, &c.targets)).abs() < 1e-12);
        for (i, &analytic) in grads.flat().iter().enumerate() {
            let mut p = params.clone();
            p[i] = params[i] + eps;
            let up = oracle_loss(&dims, &p, &c.states, &c.actions, &c.targets);
            p[i] = params[i] - eps;
            let down = oracle_loss(&dims, &p, &c.states, &c.actions, &c.targets);
            let numeric = (up - down) / (2.0 * eps);
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-8 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn gradient_flows_only_through_taken_action() {
    let c = random_case(99);
    let refs: Vec<&[f64]> = c.states.iter().map(Vec::as_slice).collect();
    let (_, grads) = c.net.loss_and_gradient(&refs, &c.actions, &c.targets).unwrap();
    let last = grads.layers.last().unwrap();
    for r in 0..last.bias.len() {
        if !c.actions.iter().any(|a| a.0 == r) {
            assert_eq!(last.bias[r], 0.0);
            assert!(last.weights.row(r).iter().all(|&g| g == 0.0));
        }
    }
}

fn returns(rows: usize, n: usize, seed: u64) -> ReturnTable<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    ReturnTable::new(
        (0..rows).map(|i| start + chrono::Days::new(i as u64)).collect(),
        (0..n).map(|i| format!("A{i}")).collect(),
        Matrix::from_fn(rows, n, |_, _| rng.random_range(-0.03..0.03)),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn env_keeps_weights_on_simplex(
        seed in any::<u64>(),
        n in 2usize..6,
        delta in 0.01f64..0.99,
        period in 1usize..6,
        actions in prop::collection::vec(any::<prop::sample::Index>(), 1..40),
    ) {
        let hp = Hyperparams { window: 5, rebalance_period: period, step_delta: delta, ..Default::default() };
        let r = returns(5 + period * actions.len() + period, n, seed);
        let mut s = env_reset(&r, &hp).unwrap();
        for a in actions {
            let out = env_step(&s, Action(a.index(2 * n + 1)), &r, &hp).unwrap();
            prop_assert!(out.reward.is_finite());
            prop_assert!(out.next.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((out.next.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(out.next.corr_features.iter().all(|c| (-1.0..=1.0).contains(c)));
            s = out.next;
            if out.done {
                break;
            }
        }
    }

    #[test]
    fn myopic_targets_are_rewards(seed in any::<u64>(), rewards in prop::collection::vec(-50.0f64..50.0, 1..10)) {
        let net = QNetwork::glorot(&[3, 4, 2], seed);
        let batch: Vec<Transition<f64>> = rewards
            .iter()
            .enumerate()
            .map(|(i, &reward)| Transition {
                state: vec![0.1, 0.2, 0.3],
                action: Action(i % 2),
                reward,
                next_state: vec![i as f64, -1.0, 0.5],
                done: i % 3 == 0,
            })
            .collect();
        let refs: Vec<&Transition<f64>> = batch.iter().collect();
        prop_assert_eq!(td_targets(&refs, &net, 0.0).unwrap(), rewards);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let r = returns(120, 3, 1);
    let hp = Hyperparams {
        window: 10,
        episodes: 5,
        batch_size: 8,
        hidden_dims: vec![6],
        seed: 21,
        ..Default::default()
    };
    let (a, la) = train(&r, &hp).unwrap();
    let (b, lb) = train(&r, &hp).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(la, lb);
    let (c, _) = train(&r, &Hyperparams { seed: 22, ..hp.clone() }).unwrap();
    assert_ne!(a.params(), c.params());
    assert_eq!(qnet_init(3, &hp).params(), qnet_init(3, &hp).params());
}

#[test]
fn tabular_update_converges_on_two_state_chain() {
    let mdp = ToyMdp {
        n_states: 2,
        n_actions: 2,
        next: vec![vec![Some(0), Some(1)], vec![Some(1), Some(0)]],
        reward: vec![vec![0.0, 1.0], vec![2.0, 0.0]],
    };
    assert!(tabular_q_check(&mdp, 0.9, 0.1, 10_000, 0).unwrap() < 1e-3);
}
