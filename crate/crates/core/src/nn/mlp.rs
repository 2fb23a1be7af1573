//! Feed-forward stack of dense layers owning its parameters.

use rand::Rng;

use super::{Activation, Dense, DenseCache, HasParams, ParamSet, Tape};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MlpRecord {
    caches: Vec<DenseCache>,
}

impl MlpRecord {
    pub fn output(&self) -> &[f64] {
        &self
            .caches
            .last()
            .expect("mlp has at least one layer")
            .output
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    params: ParamSet,
    layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes` lists layer widths from input to output; hidden layers use `hidden`,
    /// the last layer uses `output`.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!(
                "mlp `{name}` needs at least two nonzero layer sizes, got {sizes:?}"
            )));
        }
        let mut params = ParamSet::new();
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, w) in sizes.windows(2).enumerate() {
            let act = if i + 2 == sizes.len() { output } else { hidden };
            layers.push(Dense::new(
                &mut params,
                &format!("{name}.l{i}"),
                w[0],
                w[1],
                act,
                rng,
            )?);
        }
        Ok(Self { params, layers })
    }

    pub fn from_layers(params: ParamSet, layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("mlp without layers".into()));
        }
        for w in layers.windows(2) {
            crate::error::check_len("mlp layer chain", w[0].out_dim(), w[1].in_dim())?;
        }
        Ok(Self { params, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&self.params, &cur, &mut next)?;
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_recorded(&self, input: &[f64]) -> Result<Tape<MlpRecord>> {
        let mut caches: Vec<DenseCache> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = caches.last().map_or(input, |c| &c.output[..]);
            let cache = layer.forward(&self.params, x)?;
            caches.push(cache);
        }
        Ok(Tape::new(MlpRecord { caches }))
    }

    fn backprop(
        &mut self,
        tape: &mut Tape<MlpRecord>,
        d_out: &[f64],
        accumulate: bool,
    ) -> Result<Vec<f64>> {
        let rec = tape.take()?;
        let mut grad = d_out.to_vec();
        for (layer, cache) in self.layers.iter().zip(&rec.caches).rev() {
            grad = layer.backward(&mut self.params, cache, &grad, accumulate)?;
        }
        Ok(grad)
    }

    /// Accumulates parameter gradients for `d_out` and returns the input gradient.
    pub fn backward(&mut self, tape: &mut Tape<MlpRecord>, d_out: &[f64]) -> Result<Vec<f64>> {
        self.backprop(tape, d_out, true)
    }

    /// Input gradient only; parameter gradients are left untouched.
    pub fn input_gradient(
        &mut self,
        tape: &mut Tape<MlpRecord>,
        d_out: &[f64],
    ) -> Result<Vec<f64>> {
        self.backprop(tape, d_out, false)
    }
}

impl HasParams for Mlp {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
