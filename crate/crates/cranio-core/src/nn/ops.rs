//! Pointwise activations and the dice loss.

use super::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor::from_data(
        x.channels,
        x.dims,
        x.data.iter().map(|&v| v.max(0.0)).collect(),
    )
}

/// Gradient wrt the relu input; uses the forward input.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Tensor {
    Tensor::from_data(
        x.channels,
        x.dims,
        x.data
            .iter()
            .zip(&upstream.data)
            .map(|(&v, &u)| if v > 0.0 { u } else { 0.0 })
            .collect(),
    )
}

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    Tensor::from_data(
        x.channels,
        x.dims,
        x.data.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
    )
}

/// Gradient wrt the sigmoid input; uses the forward output `s`.
pub fn sigmoid_backward(s: &Tensor, upstream: &Tensor) -> Tensor {
    Tensor::from_data(
        s.channels,
        s.dims,
        s.data
            .iter()
            .zip(&upstream.data)
            .map(|(&s, &u)| u * s * (1.0 - s))
            .collect(),
    )
}

/// Smoothing term keeping the dice loss defined on empty masks.
pub const DICE_EPS: f64 = 1e-6;

/// Dice loss `1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps)` and its
/// exact gradient wrt the prediction.
pub fn dice_loss(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
    assert_eq!(pred.dims, target.dims);
    assert_eq!(pred.channels, target.channels);
    let mut inter = 0.0;
    let mut psum = 0.0;
    let mut gsum = 0.0;
    for (&p, &g) in pred.data.iter().zip(&target.data) {
        inter += p * g;
        psum += p;
        gsum += g;
    }
    let num = 2.0 * inter + DICE_EPS;
    let den = psum + gsum + DICE_EPS;
    let loss = 1.0 - num / den;
    let grad = Tensor::from_data(
        pred.channels,
        pred.dims,
        target
            .data
            .iter()
            .map(|&g| -(2.0 * g * den - num) / (den * den))
            .collect(),
    );
    (loss, grad)
}
