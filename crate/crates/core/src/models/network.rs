use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::ArchitectureSpec;
use super::target::PreparedSample;
use crate::error::{Error, Result};
use crate::nn::{self, Activation, LayerParams, LossKind, Tape, Trainable};

/// A wired network: one to three dense blocks joined by element-wise
/// products with the `(1, EF)` vectors.
///
/// * one block: `(x, y, t) -> out`
/// * two blocks: `beta = B1(x, y, t)`, `out = B2(beta * (1, EF_t))`
/// * three blocks: `beta' = B1(x, y, t)`, `beta = B2(beta' * (1, EF_t-1))`,
///   `out = B3(beta * (1, EF_t))`
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ArchitectureSpec,
    layers: Vec<LayerParams>,
    blocks: Vec<Range<usize>>,
}

/// Everything cached by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: Vec<f64>,
    /// Influence-factor vectors in wiring order (`beta(t-1)` before `beta(t)`).
    pub betas: Vec<Vec<f64>>,
    tapes: Vec<Tape>,
    /// `(1, EF)` vector multiplied with each beta.
    factors: Vec<Vec<f64>>,
}

impl ForwardPass {
    /// Smallest ReLU pre-activation magnitude across all blocks.
    pub fn relu_margin(&self) -> f64 {
        self.tapes
            .iter()
            .map(nn::relu_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

impl Model {
    pub fn build(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for sizes in spec.block_sizes() {
            layers.extend(nn::init_layers(&sizes, &mut rng)?);
        }
        Self::from_layers(spec, layers)
    }

    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_layers(spec: ArchitectureSpec, layers: Vec<LayerParams>) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::new();
        let mut start = 0;
        let mut expected = Vec::new();
        for sizes in spec.block_sizes() {
            let n = sizes.len() - 1;
            blocks.push(start..start + n);
            start += n;
            expected.extend(sizes.windows(2).map(|w| (w[0], w[1])));
        }
        if layers.len() != expected.len() {
            return Err(Error::DimensionMismatch {
                expected: expected.len(),
                actual: layers.len(),
            });
        }
        for (l, &(n_in, n_out)) in layers.iter().zip(&expected) {
            if l.n_in != n_in
                || l.n_out != n_out
                || l.weights.len() != n_in * n_out
                || l.biases.len() != n_out
            {
                return Err(Error::InvalidParameter(format!(
                    "layer shape {}x{} does not match expected {n_in}x{n_out}",
                    l.n_in, l.n_out
                )));
            }
        }
        Ok(Model {
            spec,
            layers,
            blocks,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(LayerParams::n_params).sum()
    }

    pub fn block(&self, i: usize) -> &[LayerParams] {
        &self.layers[self.blocks[i].clone()]
    }

    pub fn forward(&self, input: &[f64; 3], ef_t: &[f64], ef_tm1: &[f64]) -> Result<ForwardPass> {
        let n_blocks = self.blocks.len();
        let factors: Vec<Vec<f64>> = match n_blocks {
            1 => vec![],
            2 => vec![ef_t.to_vec()],
            _ => vec![ef_tm1.to_vec(), ef_t.to_vec()],
        };
        let beta_width = self.spec.beta_width();
        for f in &factors {
            if f.len() != beta_width {
                return Err(Error::DimensionMismatch {
                    expected: beta_width,
                    actual: f.len(),
                });
            }
        }
        let mut tapes = Vec::with_capacity(n_blocks);
        let mut betas = Vec::with_capacity(n_blocks - 1);
        let mut x = input.to_vec();
        for b in 0..n_blocks {
            let block = self.block(b);
            let (out, tape) = nn::forward(block, &Activation::block_plan(block.len()), &x)?;
            tapes.push(tape);
            if b + 1 < n_blocks {
                x = out
                    .iter()
                    .zip(&factors[b])
                    .map(|(beta, e)| beta * e)
                    .collect();
                betas.push(out);
            } else {
                x = out;
            }
        }
        Ok(ForwardPass {
            output: x,
            betas,
            tapes,
            factors,
        })
    }

    pub fn forward_sample(&self, s: &PreparedSample) -> Result<ForwardPass> {
        self.forward(&s.input, &s.ef_t, &s.ef_tm1)
    }

    /// Parameter gradients for a given output gradient, plus the gradient
    /// with respect to the input of each block.
    fn backward(&self, pass: &ForwardPass, grad_out: &[f64]) -> (Vec<LayerParams>, Vec<Vec<f64>>) {
        let n_blocks = self.blocks.len();
        let mut grads: Vec<Vec<LayerParams>> = vec![Vec::new(); n_blocks];
        let mut input_grads = vec![Vec::new(); n_blocks];
        let mut g = grad_out.to_vec();
        for b in (0..n_blocks).rev() {
            let (gp, gin) = nn::backward(self.block(b), &pass.tapes[b], &g);
            grads[b] = gp;
            if b > 0 {
                g = gin
                    .iter()
                    .zip(&pass.factors[b - 1])
                    .map(|(gz, e)| gz * e)
                    .collect();
            }
            input_grads[b] = gin;
        }
        (grads.into_iter().flatten().collect(), input_grads)
    }

    /// Full output vector (1, 9 or 27 entries).
    pub fn output(&self, s: &PreparedSample) -> Result<Vec<f64>> {
        Ok(self.forward_sample(s)?.output)
    }

    /// Center-cell prediction.
    pub fn predict(&self, s: &PreparedSample) -> Result<f64> {
        let out = self.output(s)?;
        Ok(out[out.len() / 2])
    }

    /// Influence-factor vectors produced for a sample; empty for the
    /// single-block models.
    pub fn betas(&self, s: &PreparedSample) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_sample(s)?.betas)
    }

    /// Sensitivity of the center prediction to each most-recent external
    /// factor, i.e. the effective regression coefficients of the fit.
    pub fn influence(&self, s: &PreparedSample) -> Result<Vec<f64>> {
        let n_blocks = self.blocks.len();
        if n_blocks == 1 {
            return Ok(Vec::new());
        }
        let pass = self.forward_sample(s)?;
        let width = pass.output.len();
        let mut g = vec![0.0; width];
        g[width / 2] = 1.0;
        let (_, input_grads) = self.backward(&pass, &g);
        let beta_t = pass.betas.last().expect("multi-block model has betas");
        Ok(input_grads[n_blocks - 1]
            .iter()
            .zip(beta_t)
            .skip(1)
            .map(|(gz, b)| gz * b)
            .collect())
    }
}

impl Trainable for Model {
    type Example = PreparedSample;

    fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    fn loss_and_grad(
        &self,
        batch: &[&PreparedSample],
        loss: &LossKind,
    ) -> Result<(f64, Vec<LayerParams>)> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        let width = self.spec.kind.output_shape().width();
        let mut total = 0.0;
        let mut grads: Vec<LayerParams> = self.layers.iter().map(LayerParams::zeros_like).collect();
        for s in batch {
            if s.block.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: s.block.len(),
                });
            }
            let pass = self.forward_sample(s)?;
            let b = &s.block;
            let (l, g) = loss.sample_loss(
                &pass.output,
                &b.values,
                &b.mask,
                &b.distances,
                &b.time_offsets,
            )?;
            total += l;
            let (gp, _) = self.backward(&pass, &g);
            grads.iter_mut().zip(&gp).for_each(|(a, d)| a.accumulate(d));
        }
        let k = 1.0 / batch.len() as f64;
        grads.iter_mut().for_each(|g| g.scale(k));
        Ok((total * k, grads))
    }

    fn loss(&self, batch: &[&PreparedSample], loss: &LossKind) -> Result<f64> {
        let mut total = 0.0;
        for s in batch {
            let out = self.output(s)?;
            let b = &s.block;
            total += loss
                .sample_loss(&out, &b.values, &b.mask, &b.distances, &b.time_offsets)?
                .0;
        }
        Ok(total / batch.len().max(1) as f64)
    }
}
