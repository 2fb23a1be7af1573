//! Fully connected layer `y = act(W·x + b)`.

use rand::Rng;

use super::{Activation, ParamId, ParamSet};
use crate::error::{check_len, Result};

/// Values kept from a forward pass for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// Dense layer whose weights live in an external [`ParamSet`].
///
/// Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dense {
    weight: ParamId,
    bias: ParamId,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha·x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = glorot_limit(in_dim, out_dim);
        let w: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self::with_values(
            params,
            name,
            in_dim,
            out_dim,
            activation,
            w,
            vec![0.0; out_dim],
        )
    }

    pub fn with_values(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let weight = params.add(&format!("{name}.weight"), &[out_dim, in_dim], weight)?;
        let bias = params.add(&format!("{name}.bias"), &[out_dim], bias)?;
        Ok(Self {
            weight,
            bias,
            in_dim,
            out_dim,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight_id(&self) -> ParamId {
        self.weight
    }

    pub fn bias_id(&self) -> ParamId {
        self.bias
    }

    /// Forward pass writing into `out`; returns nothing so hot loops can reuse buffers.
    pub fn forward_into(&self, params: &ParamSet, input: &[f64], out: &mut Vec<f64>) -> Result<()> {
        check_len("dense input", self.in_dim, input.len())?;
        let w = params.value(self.weight);
        let b = params.value(self.bias);
        out.clear();
        out.extend(
            w.chunks_exact(self.in_dim)
                .zip(b)
                .map(|(row, &bias)| self.activation.apply(bias + dot(row, input))),
        );
        Ok(())
    }

    pub fn forward(&self, params: &ParamSet, input: &[f64]) -> Result<DenseCache> {
        let mut output = Vec::with_capacity(self.out_dim);
        self.forward_into(params, input, &mut output)?;
        Ok(DenseCache {
            input: input.to_vec(),
            output,
        })
    }

    /// Backpropagates `d_out` (gradient w.r.t. the layer output) and returns the
    /// gradient w.r.t. the input. Parameter gradients are accumulated when
    /// `accumulate` is set.
    pub fn backward(
        &self,
        params: &mut ParamSet,
        cache: &DenseCache,
        d_out: &[f64],
        accumulate: bool,
    ) -> Result<Vec<f64>> {
        check_len("dense output gradient", self.out_dim, d_out.len())?;
        check_len("dense cached input", self.in_dim, cache.input.len())?;
        let dz: Vec<f64> = d_out
            .iter()
            .zip(&cache.output)
            .map(|(&g, &y)| g * self.activation.derivative_from_output(y))
            .collect();

        let mut d_in = vec![0.0; self.in_dim];
        {
            let w = params.value(self.weight);
            for (row, &g) in w.chunks_exact(self.in_dim).zip(&dz) {
                if g == 0.0 {
                    continue;
                }
                axpy(g, row, &mut d_in);
            }
        }
        if accumulate {
            let gw = &mut params.get_mut(self.weight).grad;
            for (row, &g) in gw.chunks_exact_mut(self.in_dim).zip(&dz) {
                if g == 0.0 {
                    continue;
                }
                axpy(g, &cache.input, row);
            }
            let gb = &mut params.get_mut(self.bias).grad;
            for (gi, &g) in gb.iter_mut().zip(&dz) {
                *gi += g;
            }
        }
        Ok(d_in)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        w
    }

    #[test]
    fn identity_linear_is_identity() {
        let mut ps = ParamSet::new();
        let d = Dense::with_values(
            &mut ps,
            "d",
            3,
            3,
            Activation::Linear,
            identity(3),
            vec![0.0; 3],
        )
        .unwrap();
        let x = [0.3, -1.7, 42.0];
        assert_eq!(d.forward(&ps, &x).unwrap().output, x.to_vec());
    }

    #[test]
    fn tanh_of_zero_input_and_bias_is_zero() {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Dense::new(&mut ps, "d", 4, 5, Activation::Tanh, &mut rng).unwrap();
        let y = d.forward(&ps, &[0.0; 4]).unwrap().output;
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let mut ps = ParamSet::new();
        let d = Dense::with_values(
            &mut ps,
            "d",
            1,
            1,
            Activation::Sigmoid,
            vec![1.0],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(d.forward(&ps, &[0.0]).unwrap().output, vec![0.5]);
    }

    #[test]
    fn wrong_input_length_is_rejected() {
        let mut ps = ParamSet::new();
        let d = Dense::with_values(
            &mut ps,
            "d",
            2,
            1,
            Activation::Linear,
            vec![1.0, 1.0],
            vec![0.0],
        )
        .unwrap();
        assert!(matches!(
            d.forward(&ps, &[1.0]),
            Err(crate::Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_loss_weight_gradient_is_outer_product() {
        // loss = ½‖Wx + b‖² ⇒ dW = (Wx + b)·xᵀ
        let mut ps = ParamSet::new();
        let w = vec![0.5, -1.0, 2.0, 0.25, 0.0, 1.5];
        let b = vec![0.1, -0.2];
        let d = Dense::with_values(&mut ps, "d", 3, 2, Activation::Linear, w, b).unwrap();
        let x = [1.0, 2.0, -3.0];
        let cache = d.forward(&ps, &x).unwrap();
        let y = cache.output.clone();
        d.backward(&mut ps, &cache, &y, true).unwrap();
        let gw = &ps.get(d.weight_id()).grad;
        for r in 0..2 {
            for c in 0..3 {
                assert!((gw[r * 3 + c] - y[r] * x[c]).abs() < 1e-12);
            }
        }
        assert_eq!(ps.get(d.bias_id()).grad, y);
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = Dense::new(&mut ps, "d", 3, 4, Activation::Tanh, &mut rng).unwrap();
        let cache = d.forward(&ps, &[0.2, -0.4, 0.9]).unwrap();
        let dx = d.backward(&mut ps, &cache, &[0.0; 4], true).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert_eq!(ps.grad_norm(), 0.0);
    }
}
