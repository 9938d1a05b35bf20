//! Encoder-decoder networks: strided convolutions down, transposed
//! convolutions up, relu between, sigmoid on the output.

pub mod conv;
pub mod ops;
pub mod tensor;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use conv::{conv3d_backward, conv3d_forward, deconv3d_backward, deconv3d_forward};
use ops::{relu_backward, relu_forward, sigmoid_backward, sigmoid_forward};
use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid network config: {0}")]
    BadConfig(String),
    #[error("input has {got_ch} channels and dims {got_dims:?}, config expects {want_ch} channels and dims {want_dims:?}")]
    InputMismatch {
        want_ch: usize,
        want_dims: [usize; 3],
        got_ch: usize,
        got_dims: [usize; 3],
    },
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("training dataset is empty")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv3dStride2,
    Deconv3dStride2,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Odd kernel edge length; ignored for relu.
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    pub fn conv(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind: LayerKind::Conv3dStride2,
            kernel,
            in_channels,
            out_channels,
        }
    }

    pub fn deconv(kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind: LayerKind::Deconv3dStride2,
            kernel,
            in_channels,
            out_channels,
        }
    }

    pub fn relu(channels: usize) -> Self {
        Self {
            kind: LayerKind::Relu,
            kernel: 1,
            in_channels: channels,
            out_channels: channels,
        }
    }

    /// Weights + bias of this layer; zero for activations.
    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Relu => 0,
            LayerKind::Conv3dStride2 | LayerKind::Deconv3dStride2 => {
                self.kernel.pow(3) * self.in_channels * self.out_channels + self.out_channels
            }
        }
    }
}

/// Ordered layer ladder plus the input geometry. The output activation is
/// always sigmoid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layers: Vec<LayerSpec>,
    pub input_dims: [usize; 3],
}

impl NetworkConfig {
    /// Symmetric encoder-decoder: one stride-2 conv (+relu) per channel
    /// step down, mirrored deconvs back up, ending at one output channel.
    pub fn encoder_decoder(kernel: usize, channels: &[usize], input_dims: [usize; 3]) -> Self {
        let mut layers = Vec::new();
        let mut prev = 1;
        for &c in channels {
            layers.push(LayerSpec::conv(kernel, prev, c));
            layers.push(LayerSpec::relu(c));
            prev = c;
        }
        for &c in channels.iter().rev().skip(1) {
            layers.push(LayerSpec::deconv(kernel, prev, c));
            layers.push(LayerSpec::relu(c));
            prev = c;
        }
        layers.push(LayerSpec::deconv(kernel, prev, 1));
        Self {
            layers,
            input_dims,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layers.is_empty() {
            return Err(NnError::BadConfig("empty layer list".into()));
        }
        let mut ch = 1usize;
        let mut downs = 0usize;
        let mut ups = 0usize;
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_channels != ch {
                return Err(NnError::BadConfig(format!(
                    "layer {i} expects {} input channels, previous layer emits {ch}",
                    l.in_channels
                )));
            }
            if l.in_channels == 0 || l.out_channels == 0 {
                return Err(NnError::BadConfig(format!("layer {i} has zero channels")));
            }
            match l.kind {
                LayerKind::Conv3dStride2 => {
                    if l.kernel % 2 == 0 {
                        return Err(NnError::BadConfig(format!("layer {i} kernel is even")));
                    }
                    downs += 1;
                }
                LayerKind::Deconv3dStride2 => {
                    if l.kernel % 2 == 0 {
                        return Err(NnError::BadConfig(format!("layer {i} kernel is even")));
                    }
                    ups += 1;
                }
                LayerKind::Relu => {
                    if l.out_channels != l.in_channels {
                        return Err(NnError::BadConfig(format!(
                            "layer {i}: relu cannot change channel count"
                        )));
                    }
                }
            }
            ch = l.out_channels;
        }
        if ch != 1 {
            return Err(NnError::BadConfig(format!(
                "network must end with 1 channel, ends with {ch}"
            )));
        }
        if downs != ups {
            return Err(NnError::BadConfig(format!(
                "{downs} stride-2 convs vs {ups} deconvs; output dims would differ from input"
            )));
        }
        // every stride-2 conv must see even dims so the deconvs double back
        let mut d = self.input_dims;
        for l in &self.layers {
            if l.kind == LayerKind::Conv3dStride2 {
                if d.iter().any(|&n| n % 2 != 0) {
                    return Err(NnError::BadConfig(format!(
                        "stride-2 conv applied to odd dims {d:?}"
                    )));
                }
                d = d.map(|n| n / 2);
            } else if l.kind == LayerKind::Deconv3dStride2 {
                d = d.map(|n| n * 2);
            }
        }
        Ok(())
    }
}

/// Total trainable parameters of a config.
pub fn param_count(config: &NetworkConfig) -> usize {
    config.layers.iter().map(|l| l.param_count()).sum()
}

/// A network with its learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: NetworkConfig,
    /// Per layer; empty for activation layers.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Model {
    /// Seeded uniform fan-in initialization.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(config.layers.len());
        let mut biases = Vec::with_capacity(config.layers.len());
        for l in &config.layers {
            match l.kind {
                LayerKind::Relu => {
                    weights.push(Vec::new());
                    biases.push(Vec::new());
                }
                LayerKind::Conv3dStride2 | LayerKind::Deconv3dStride2 => {
                    let fan_in = (l.kernel.pow(3) * l.in_channels) as f64;
                    let a = (1.0 / fan_in).sqrt();
                    let n = l.kernel.pow(3) * l.in_channels * l.out_channels;
                    weights.push((0..n).map(|_| rng.gen_range(-a..a)).collect());
                    biases.push(vec![0.0; l.out_channels]);
                }
            }
        }
        Ok(Self {
            config,
            weights,
            biases,
            seed,
        })
    }

    /// All-zero parameters (sigmoid output is uniformly 0.5).
    pub fn zeroed(config: NetworkConfig) -> Result<Self, NnError> {
        let mut m = Self::init(config, 0)?;
        for w in &mut m.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(m)
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.config)
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        if x.channels != 1 || x.dims != self.config.input_dims {
            return Err(NnError::InputMismatch {
                want_ch: 1,
                want_dims: self.config.input_dims,
                got_ch: x.channels,
                got_dims: x.dims,
            });
        }
        Ok(())
    }

    fn apply_layer(&self, i: usize, x: &Tensor) -> Tensor {
        let l = &self.config.layers[i];
        match l.kind {
            LayerKind::Conv3dStride2 => conv3d_forward(
                x,
                &self.weights[i],
                &self.biases[i],
                l.out_channels,
                l.kernel,
                2,
            ),
            LayerKind::Deconv3dStride2 => deconv3d_forward(
                x,
                &self.weights[i],
                &self.biases[i],
                l.out_channels,
                l.kernel,
            ),
            LayerKind::Relu => relu_forward(x),
        }
    }

    /// Full forward pass ending in sigmoid probabilities.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        self.check_input(input)?;
        let mut cur = input.clone();
        for i in 0..self.config.layers.len() {
            cur = self.apply_layer(i, &cur);
        }
        Ok(sigmoid_forward(&cur))
    }

    /// Forward pass keeping every layer input for the backward sweep.
    /// Returns (layer inputs, sigmoid output).
    pub fn forward_cached(&self, input: &Tensor) -> Result<(Vec<Tensor>, Tensor), NnError> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.config.layers.len() + 1);
        acts.push(input.clone());
        for i in 0..self.config.layers.len() {
            let next = self.apply_layer(i, acts.last().unwrap());
            acts.push(next);
        }
        let out = sigmoid_forward(acts.last().unwrap());
        Ok((acts, out))
    }

    /// Reverse sweep from a gradient wrt the sigmoid output. Returns per
    /// layer (grad_w, grad_b), aligned with `config.layers`.
    pub fn backward(
        &self,
        acts: &[Tensor],
        output: &Tensor,
        grad_output: &Tensor,
    ) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut grads = vec![(Vec::new(), Vec::new()); self.config.layers.len()];
        let mut upstream = sigmoid_backward(output, grad_output);
        for i in (0..self.config.layers.len()).rev() {
            let l = &self.config.layers[i];
            let input = &acts[i];
            match l.kind {
                LayerKind::Conv3dStride2 => {
                    let (gx, gw, gb) = conv3d_backward(
                        input,
                        &self.weights[i],
                        l.out_channels,
                        l.kernel,
                        2,
                        &upstream,
                    );
                    grads[i] = (gw, gb);
                    upstream = gx;
                }
                LayerKind::Deconv3dStride2 => {
                    let (gx, gw, gb) = deconv3d_backward(
                        input,
                        &self.weights[i],
                        l.out_channels,
                        l.kernel,
                        &upstream,
                    );
                    grads[i] = (gw, gb);
                    upstream = gx;
                }
                LayerKind::Relu => {
                    upstream = relu_backward(input, &upstream);
                }
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_single_layer() {
        let cfg = NetworkConfig {
            layers: vec![
                LayerSpec::conv(3, 1, 8),
                LayerSpec::deconv(3, 8, 1),
            ],
            input_dims: [4, 4, 4],
        };
        assert_eq!(cfg.layers[0].param_count(), 27 * 8 + 8);
        assert_eq!(cfg.layers[0].param_count(), 224);
        assert_eq!(param_count(&cfg), 224 + 27 * 8 + 1);
    }

    #[test]
    fn empty_config_rejected() {
        let cfg = NetworkConfig {
            layers: vec![],
            input_dims: [4, 4, 4],
        };
        assert_eq!(param_count(&cfg), 0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unbalanced_ladder_rejected() {
        let cfg = NetworkConfig {
            layers: vec![LayerSpec::conv(3, 1, 1)],
            input_dims: [4, 4, 4],
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_model_outputs_half() {
        let cfg = NetworkConfig::encoder_decoder(3, &[4], [4, 4, 4]);
        let m = Model::zeroed(cfg).unwrap();
        let x = Tensor::from_data(1, [4, 4, 4], vec![1.0; 64]);
        let y = m.forward(&x).unwrap();
        assert_eq!(y.dims, [4, 4, 4]);
        for &v in &y.data {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_shape_preserving_and_deterministic() {
        for channels in [vec![4usize], vec![4, 8]] {
            let cfg = NetworkConfig::encoder_decoder(3, &channels, [8, 8, 4]);
            let m = Model::init(cfg, 11).unwrap();
            let x = Tensor::from_data(1, [8, 8, 4], (0..256).map(|i| i as f64 / 256.0).collect());
            let a = m.forward(&x).unwrap();
            let b = m.forward(&x).unwrap();
            assert_eq!(a.dims, [8, 8, 4]);
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn input_mismatch_rejected() {
        let cfg = NetworkConfig::encoder_decoder(3, &[4], [8, 8, 8]);
        let m = Model::init(cfg, 0).unwrap();
        let x = Tensor::zeros(1, [4, 4, 4]);
        assert!(matches!(m.forward(&x), Err(NnError::InputMismatch { .. })));
    }

    #[test]
    fn odd_dims_rejected() {
        let cfg = NetworkConfig::encoder_decoder(3, &[4], [7, 8, 8]);
        assert!(cfg.validate().is_err());
    }
}
