//! Batch-size-one dice-loss training with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::dice_loss;
use super::tensor::Tensor;
use super::{Model, NnError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Record the loss every this many steps (step 1 is always recorded).
    pub log_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 1e-3,
            seed: 0,
            log_interval: 10,
        }
    }
}

/// One (step, loss) sample per log interval.
pub type LossCurve = Vec<(usize, f64)>;

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Trains a model on (input, target mask) pairs, one case per step, cases
/// reshuffled every epoch. Deterministic given `tc.seed` and the initial
/// model. Aborts with [`NnError::Diverged`] if the loss goes non-finite.
pub fn train(
    mut model: Model,
    dataset: &[(Tensor, Tensor)],
    tc: &TrainConfig,
) -> Result<(Model, LossCurve), NnError> {
    if dataset.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = dataset.len(); // trigger a shuffle on the first step
    let shapes: Vec<usize> = model
        .weights
        .iter()
        .zip(&model.biases)
        .flat_map(|(w, b)| [w.len(), b.len()])
        .collect();
    let mut adam = Adam::new(&shapes);
    let mut curve = Vec::new();
    for step in 1..=tc.steps {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let (input, target) = &dataset[order[cursor]];
        cursor += 1;

        let (acts, out) = model.forward_cached(input)?;
        let (loss, grad_out) = dice_loss(&out, target);
        if !loss.is_finite() {
            return Err(NnError::Diverged { step, loss });
        }
        let grads = model.backward(&acts, &out, &grad_out);

        let mut params: Vec<&mut [f64]> = Vec::with_capacity(grads.len() * 2);
        let mut gslices: Vec<&[f64]> = Vec::with_capacity(grads.len() * 2);
        for ((w, b), (gw, gb)) in model
            .weights
            .iter_mut()
            .zip(model.biases.iter_mut())
            .zip(&grads)
        {
            params.push(w.as_mut_slice());
            gslices.push(gw.as_slice());
            params.push(b.as_mut_slice());
            gslices.push(gb.as_slice());
        }
        adam.step(&mut params, &gslices, tc.learning_rate);

        if step == 1 || step % tc.log_interval == 0 || step == tc.steps {
            curve.push((step, loss));
        }
    }
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkConfig;

    /// Smooth input field with a ball-shaped target mask.
    fn toy_case(dims: [usize; 3]) -> (Tensor, Tensor) {
        let mut input = Tensor::zeros(1, dims);
        let mut target = Tensor::zeros(1, dims);
        let c = dims.map(|d| (d as f64 - 1.0) / 2.0);
        let r = dims[0] as f64 / 4.0;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let d2 = (x as f64 - c[0]).powi(2)
                        + (y as f64 - c[1]).powi(2)
                        + (z as f64 - c[2]).powi(2);
                    let i = input.index(0, x, y, z);
                    input.data[i] = (-d2 / (r * r)).exp();
                    if d2 <= r * r {
                        target.data[i] = 1.0;
                    }
                }
            }
        }
        (input, target)
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let cfg = NetworkConfig::encoder_decoder(3, &[4], [4, 4, 4]);
        let model = Model::init(cfg, 5).unwrap();
        let before = model.clone();
        let tc = TrainConfig {
            steps: 1,
            learning_rate: 0.0,
            seed: 1,
            log_interval: 1,
        };
        let (after, curve) = train(model, &[toy_case([4, 4, 4])], &tc).unwrap();
        assert_eq!(after.weights, before.weights);
        assert_eq!(after.biases, before.biases);
        assert_eq!(curve.len(), 1);
    }

    #[test]
    fn same_seed_same_curve() {
        let cfg = NetworkConfig::encoder_decoder(3, &[4], [4, 4, 4]);
        let tc = TrainConfig {
            steps: 20,
            learning_rate: 1e-2,
            seed: 9,
            log_interval: 5,
        };
        let data = vec![toy_case([4, 4, 4]), toy_case([4, 4, 4])];
        let (m1, c1) = train(Model::init(cfg.clone(), 5).unwrap(), &data, &tc).unwrap();
        let (m2, c2) = train(Model::init(cfg, 5).unwrap(), &data, &tc).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(m1.weights, m2.weights);
    }

    #[test]
    fn empty_dataset_rejected() {
        let cfg = NetworkConfig::encoder_decoder(3, &[4], [4, 4, 4]);
        let model = Model::init(cfg, 0).unwrap();
        assert!(matches!(
            train(model, &[], &TrainConfig::default()),
            Err(NnError::EmptyDataset)
        ));
    }

    #[test]
    fn overfits_single_small_case() {
        let cfg = NetworkConfig::encoder_decoder(3, &[8, 16], [16, 16, 16]);
        let model = Model::init(cfg, 3).unwrap();
        let tc = TrainConfig {
            steps: 500,
            learning_rate: 3e-2,
            seed: 3,
            log_interval: 50,
        };
        let (_, curve) = train(model, &[toy_case([16, 16, 16])], &tc).unwrap();
        let final_loss = curve.last().unwrap().1;
        assert!(final_loss <= 0.05, "final dice loss {final_loss}");
    }
}
