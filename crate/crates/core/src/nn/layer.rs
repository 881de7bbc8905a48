use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights (row-major `[out][in]`) and biases of one dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        LayerParams {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    /// He-style uniform fan-in initialisation, zero biases.
    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / n_in as f64).sqrt();
        let weights = (0..n_in * n_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        LayerParams {
            n_in,
            n_out,
            weights,
            biases: vec![0.0; n_out],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_in, self.n_out)
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.is_finite())
    }

    /// `dst += src`, shapes assumed equal.
    pub fn accumulate(&mut self, src: &LayerParams) {
        for (d, s) in self.weights.iter_mut().zip(&src.weights) {
            *d += s;
        }
        for (d, s) in self.biases.iter_mut().zip(&src.biases) {
            *d += s;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .for_each(|v| *v *= k);
    }

    /// Flat view over weights then biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.n_in)
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b),
        );
    }
}

/// Builds a stack of layers for the given sizes from a seeded stream.
pub fn init_layers<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Vec<LayerParams>> {
    if sizes.len() < 2 {
        return Err(Error::InvalidParameter(
            "a network needs at least two layer sizes".into(),
        ));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "layer sizes must be positive".into(),
        ));
    }
    Ok(sizes
        .windows(2)
        .map(|w| LayerParams::init(w[0], w[1], rng))
        .collect())
}

/// Seeded convenience wrapper around [`init_layers`].
pub fn init_network(sizes: &[usize], seed: u64) -> Result<Vec<LayerParams>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    init_layers(sizes, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    /// ReLU on every hidden layer, identity on the block output.
    pub fn block_plan(n_layers: usize) -> Vec<Activation> {
        let mut plan = vec![Activation::Relu; n_layers];
        if let Some(last) = plan.last_mut() {
            *last = Activation::Identity;
        }
        plan
    }
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    /// Input to each layer.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pub preacts: Vec<Vec<f64>>,
    pub plan: Vec<Activation>,
}

pub fn forward(
    layers: &[LayerParams],
    plan: &[Activation],
    input: &[f64],
) -> Result<(Vec<f64>, Tape)> {
    if plan.len() != layers.len() {
        return Err(Error::DimensionMismatch {
            expected: layers.len(),
            actual: plan.len(),
        });
    }
    let mut tape = Tape {
        plan: plan.to_vec(),
        ..Tape::default()
    };
    let mut x = input.to_vec();
    for (layer, act) in layers.iter().zip(plan) {
        if x.len() != layer.n_in {
            return Err(Error::DimensionMismatch {
                expected: layer.n_in,
                actual: x.len(),
            });
        }
        let mut z = Vec::with_capacity(layer.n_out);
        layer.affine(&x, &mut z);
        let a = match act {
            Activation::Relu => z.iter().map(|v| v.max(0.0)).collect(),
            Activation::Identity => z.clone(),
        };
        tape.inputs.push(std::mem::replace(&mut x, a));
        tape.preacts.push(z);
    }
    Ok((x, tape))
}

/// Reverse pass: returns per-layer parameter gradients and the gradient with
/// respect to the stack input.
pub fn backward(
    layers: &[LayerParams],
    tape: &Tape,
    grad_out: &[f64],
) -> (Vec<LayerParams>, Vec<f64>) {
    let mut grads: Vec<LayerParams> = layers.iter().map(LayerParams::zeros_like).collect();
    let mut g = grad_out.to_vec();
    for (i, layer) in layers.iter().enumerate().rev() {
        if tape.plan[i] == Activation::Relu {
            for (gj, z) in g.iter_mut().zip(&tape.preacts[i]) {
                if *z <= 0.0 {
                    *gj = 0.0;
                }
            }
        }
        let x = &tape.inputs[i];
        let grad = &mut grads[i];
        let mut g_in = vec![0.0; layer.n_in];
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            grad.biases[o] += go;
            let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
            let grow = &mut grad.weights[o * layer.n_in..(o + 1) * layer.n_in];
            for k in 0..layer.n_in {
                grow[k] += go * x[k];
                g_in[k] += go * row[k];
            }
        }
        g = g_in;
    }
    (grads, g)
}

/// Smallest |pre-activation| over ReLU units; finite-difference checks are
/// only meaningful when this is not tiny.
pub fn relu_margin(tape: &Tape) -> f64 {
    tape.preacts
        .iter()
        .zip(&tape.plan)
        .filter(|(_, a)| **a == Activation::Relu)
        .flat_map(|(z, _)| z.iter().map(|v| v.abs()))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Straight-line re-implementation used as an oracle for `forward`.
    fn naive_forward(layers: &[LayerParams], x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (li, l) in layers.iter().enumerate() {
            let mut z = vec![0.0; l.n_out];
            for o in 0..l.n_out {
                let mut s = l.biases[o];
                for i in 0..l.n_in {
                    s += l.weights[o * l.n_in + i] * a[i];
                }
                z[o] = if li + 1 < layers.len() && s < 0.0 {
                    0.0
                } else {
                    s
                };
            }
            a = z;
        }
        a
    }

    #[test]
    fn shapes_of_minimal_network() {
        let net = init_network(&[3, 1], 5).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net[0].weights.len(), 3);
        assert_eq!(net[0].biases, vec![0.0]);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        assert_eq!(
            init_network(&[3, 5, 1], 7).unwrap(),
            init_network(&[3, 5, 1], 7).unwrap()
        );
        let net = init_network(&[3, 5, 1], 7).unwrap();
        for l in &net {
            let bound = (6.0 / l.n_in as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
        }
        assert!(init_network(&[3], 1).is_err());
        assert!(init_network(&[3, 0, 1], 1).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = vec![LayerParams::zeros(3, 4), LayerParams::zeros(4, 2)];
        let (out, _) = forward(&net, &Activation::block_plan(2), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn affine_scalar() {
        let net = vec![LayerParams {
            n_in: 1,
            n_out: 1,
            weights: vec![2.0],
            biases: vec![1.0],
        }];
        let (out, _) = forward(&net, &Activation::block_plan(1), &[3.0]).unwrap();
        assert_eq!(out, vec![7.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = init_network(&[3, 2], 0).unwrap();
        assert!(matches!(
            forward(&net, &Activation::block_plan(1), &[1.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                actual: 1
            })
        ));
    }

    #[test]
    fn matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..10 {
            let mut net = init_network(&[3, 6, 5, 2], seed).unwrap();
            for l in &mut net {
                l.biases
                    .iter_mut()
                    .for_each(|b| *b = rng.gen_range(-0.5..0.5));
            }
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (out, _) = forward(&net, &Activation::block_plan(3), &x).unwrap();
            for (a, b) in out.iter().zip(naive_forward(&net, &x)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = init_network(&[3, 4, 2], 1).unwrap();
        let plan = Activation::block_plan(2);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Objective: sum of outputs weighted by (1, -2).
        let f = |n: &[LayerParams]| {
            let (o, _) = forward(n, &plan, &x).unwrap();
            o[0] - 2.0 * o[1]
        };
        let (_, tape) = forward(&net, &plan, &x).unwrap();
        let (grads, _) = backward(&net, &tape, &[1.0, -2.0]);
        for li in 0..net.len() {
            for k in 0..net[li].n_params() {
                let mut p = net.clone();
                let mut m = net.clone();
                *p[li].values_mut().nth(k).unwrap() += 1e-6;
                *m[li].values_mut().nth(k).unwrap() -= 1e-6;
                let fd = (f(&p) - f(&m)) / 2e-6;
                let an = *grads[li].values().nth(k).unwrap();
                assert!((fd - an).abs() < 1e-6, "layer {li} param {k}: {fd} vs {an}");
            }
        }
    }
}
