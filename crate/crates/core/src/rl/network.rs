use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::{Action, Hyperparams, Transition};

/// Fully connected layer, `y = W x + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    fn affine(&self, x: &[T]) -> Vec<T> {
        self.weights
            .rows_iter()
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi))
            .collect()
    }
}

/// Feed-forward action-value network: ReLU hidden layers, linear output.
#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    layers: Vec<Dense<T>>,
    updates: usize,
}

impl<T: Scalar> PartialEq for QNetwork<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Parameter gradients, same shapes as the network layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Flattened in the same order as `QNetwork::params`.
    pub fn flat(&self) -> Vec<T> {
        flatten(&self.layers)
    }
}

fn flatten<T: Scalar>(layers: &[Dense<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(&l.bias);
    }
    out
}

fn zero_layers<T: Scalar>(dims: &[usize]) -> Vec<Dense<T>> {
    dims.windows(2)
        .map(|w| Dense {
            weights: Matrix::zeros(w[1], w[0]),
            bias: vec![T::zero(); w[1]],
        })
        .collect()
}

/// Builds the network for `n_assets` from the hyperparameters: input
/// `N(N-1)/2 + N`, the configured hidden widths, output `2N + 1`.
pub fn qnet_init<T: Scalar>(n_assets: usize, hp: &Hyperparams<T>) -> QNetwork<T> {
    let mut dims = vec![n_assets * (n_assets - 1) / 2 + n_assets];
    dims.extend_from_slice(&hp.hidden_dims);
    dims.push(Action::count(n_assets));
    QNetwork::glorot(&dims, hp.seed)
}

impl<T: Scalar> QNetwork<T> {
    /// All parameters zero.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "network needs input and output dims");
        Self {
            layers: zero_layers(dims),
            updates: 0,
        }
    }

    /// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(dims: &[usize], seed: u64) -> Self {
        let mut net = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let bound = (6.0 / (layer.fan_in() + layer.fan_out()) as f64).sqrt();
            for w in layer.weights.as_mut_slice() {
                *w = T::lit(rng.random_range(-bound..bound));
            }
        }
        net
    }

    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invalid("network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Dimension(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].fan_out(),
                    k + 1,
                    pair[1].fan_in()
                )));
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.fan_out()) {
            return Err(Error::Dimension("bias length differs from layer width".into()));
        }
        Ok(Self { layers, updates: 0 })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].fan_in()];
        d.extend(self.layers.iter().map(Dense::fan_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.fan_in() * l.fan_out() + l.fan_out()).sum()
    }

    /// Number of gradient updates applied so far.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn params(&self) -> Vec<T> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "{} parameters for a network with {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.as_mut_slice() {
                *w = it.next().unwrap();
            }
            for b in &mut l.bias {
                *b = it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        Ok(self.trace(x).1.pop().unwrap())
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "feature vector of length {} for input dim {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Layer inputs and pre-activations of one forward pass.
    fn trace(&self, x: &[T]) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&a);
            let next = if k < last {
                z.iter().map(|&v| v.max(T::zero())).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        (inputs, pre)
    }

    /// Mean squared TD error over the batch and its gradient. Only the taken
    /// action's output contributes.
    pub fn loss_and_gradient(
        &self,
        states: &[&[T]],
        actions: &[Action],
        targets: &[T],
    ) -> Result<(T, Gradients<T>)> {
        let b = states.len();
        if b == 0 || actions.len() != b || targets.len() != b {
            return Err(Error::Dimension(format!(
                "batch of {b} states, {} actions, {} targets",
                actions.len(),
                targets.len()
            )));
        }
        let mut grads = Gradients {
            layers: zero_layers(&self.dims()),
        };
        let scale = T::lit(2.0) / T::from_count(b);
        let mut loss = T::zero();
        for ((&x, &action), &target) in states.iter().zip(actions).zip(targets) {
            self.check_input(x)?;
            if action.0 >= self.output_dim() {
                return Err(Error::Invalid(format!("action {} outside output dim", action.0)));
            }
            let (inputs, pre) = self.trace(x);
            let err = pre[pre.len() - 1][action.0] - target;
            loss = loss + err * err;

            let mut delta = vec![T::zero(); self.output_dim()];
            delta[action.0] = scale * err;
            for k in (0..self.layers.len()).rev() {
                let g = &mut grads.layers[k];
                let input = &inputs[k];
                for (r, &d) in delta.iter().enumerate() {
                    if d == T::zero() {
                        continue;
                    }
                    for (gw, &xi) in g.weights.row_mut(r).iter_mut().zip(input) {
                        *gw = *gw + d * xi;
                    }
                    g.bias[r] = g.bias[r] + d;
                }
                if k == 0 {
                    break;
                }
                let w = &self.layers[k].weights;
                delta = (0..w.ncols())
                    .map(|c| {
                        if pre[k - 1][c] > T::zero() {
                            delta.iter().enumerate().map(|(r, &d)| d * w[(r, c)]).sum()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
            }
        }
        Ok((loss / T::from_count(b), grads))
    }

    /// Mean squared TD error without gradients.
    pub fn loss(&self, states: &[&[T]], actions: &[Action], targets: &[T]) -> Result<T> {
        let mut total = T::zero();
        for ((&x, &a), &y) in states.iter().zip(actions).zip(targets) {
            let q = self.forward(x)?;
            total = total + (q[a.0] - y) * (q[a.0] - y);
        }
        Ok(total / T::from_count(states.len()))
    }

    pub fn apply_gradients(&mut self, grads: &Gradients<T>, learning_rate: T) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, &gw) in l.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
                *w = *w - learning_rate * gw;
            }
            for (b, &gb) in l.bias.iter_mut().zip(&g.bias) {
                *b = *b - learning_rate * gb;
            }
        }
    }

    /// One plain gradient-descent step on the batch; returns the loss
    /// measured before the update.
    pub fn train_step(&mut self, batch: &[&Transition<T>], targets: &[T], learning_rate: T) -> Result<T> {
        let states: Vec<&[T]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let actions: Vec<Action> = batch.iter().map(|t| t.action).collect();
        let (loss, grads) = self.loss_and_gradient(&states, &actions, targets)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                episode: None,
                step: self.updates,
            });
        }
        self.apply_gradients(&grads, learning_rate);
        self.updates += 1;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(state: Vec<f64>, action: usize) -> Transition<f64> {
        Transition {
            state,
            action: Action(action),
            reward: 0.0,
            next_state: vec![],
            done: true,
        }
    }

    #[test]
    fn init_is_seeded_with_zero_biases() {
        let a: QNetwork<f64> = QNetwork::glorot(&[5, 8, 3], 11);
        let b: QNetwork<f64> = QNetwork::glorot(&[5, 8, 3], 11);
        assert_eq!(a, b);
        assert_ne!(a, QNetwork::glorot(&[5, 8, 3], 12));
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&x| x == 0.0)));
        assert_eq!(a.param_count(), 5 * 8 + 8 + 8 * 3 + 3);
        let bound = (6.0f64 / 13.0).sqrt();
        assert!(a.layers()[0].weights.as_slice().iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn qnet_init_dimensions() {
        let hp = Hyperparams::<f64> { hidden_dims: vec![16], ..Default::default() };
        let net = qnet_init(10, &hp);
        assert_eq!(net.dims(), vec![55, 16, 21]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net: QNetwork<f64> = QNetwork::zeros(&[4, 6, 3]);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn identity_single_layer() {
        let net = QNetwork::from_layers(vec![Dense {
            weights: Matrix::<f64>::identity(3),
            bias: vec![0.0; 3],
        }])
        .unwrap();
        assert_eq!(net.forward(&[0.3, -1.0, 2.0]).unwrap(), vec![0.3, -1.0, 2.0]);
    }

    #[test]
    fn mismatched_layers_rejected() {
        let l1 = Dense { weights: Matrix::<f64>::zeros(4, 3), bias: vec![0.0; 4] };
        let l2 = Dense { weights: Matrix::<f64>::zeros(2, 5), bias: vec![0.0; 2] };
        assert!(QNetwork::from_layers(vec![l1, l2]).is_err());
    }

    #[test]
    fn exact_targets_leave_parameters_alone() {
        let mut net: QNetwork<f64> = QNetwork::glorot(&[3, 4, 2], 5);
        let state = vec![0.2, -0.1, 0.4];
        let q = net.forward(&state).unwrap();
        let before = net.clone();
        let t = tr(state, 1);
        let loss = net.train_step(&[&t], &[q[1]], 0.1).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
        assert_eq!(net.updates(), 1);
    }

    #[test]
    fn one_by_one_linear_update() {
        // q = w x + b, L = (q - y)^2, dL/dw = 2 (q - y) x, dL/db = 2 (q - y)
        let mut net = QNetwork::from_layers(vec![Dense {
            weights: Matrix::from_vec(1, 1, vec![0.5]).unwrap(),
            bias: vec![0.1],
        }])
        .unwrap();
        let t = tr(vec![2.0], 0);
        let loss = net.train_step(&[&t], &[3.0], 0.01).unwrap();
        // q = 1.1, err = -1.9
        assert!((loss - 3.61).abs() < 1e-12);
        let w = net.layers()[0].weights[(0, 0)];
        let b = net.layers()[0].bias[0];
        assert!((w - (0.5 + 0.01 * 2.0 * 1.9 * 2.0)).abs() < 1e-15);
        assert!((b - (0.1 + 0.01 * 2.0 * 1.9)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_loss_is_divergence() {
        let mut net: QNetwork<f64> = QNetwork::glorot(&[2, 2], 1);
        let t = tr(vec![1.0, 1.0], 0);
        let err = net.train_step(&[&t], &[f64::INFINITY], 0.1).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 0, .. }));
    }

    #[test]
    fn params_round_trip() {
        let net: QNetwork<f64> = QNetwork::glorot(&[3, 4, 2], 9);
        let mut other = QNetwork::zeros(&[3, 4, 2]);
        other.set_params(&net.params()).unwrap();
        assert_eq!(other, net);
        assert!(other.set_params(&[1.0]).is_err());
    }
}
