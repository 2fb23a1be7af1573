//! Single LSTM cell with explicit per-step caches for backpropagation through time.
//!
//! Gate pre-activations are stacked as `[input; forget; candidate; output]`, each block
//! `units` rows tall, and computed from `[x(t), h(t−1)]`:
//!
//! ```text
//! c(t) = f(t) ⊙ c(t−1) + i(t) ⊙ g(t)
//! h(t) = o(t) ⊙ tanh(c(t))
//! ```

use rand::Rng;

use super::activation::sigmoid;
use super::dense::{axpy, dot, glorot_limit};
use super::{ParamId, ParamSet};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
}

impl LstmCellState {
    pub fn zeros(units: usize) -> Self {
        Self {
            cell: vec![0.0; units],
            hidden: vec![0.0; units],
            input_gate: vec![0.0; units],
            forget_gate: vec![0.0; units],
            output_gate: vec![0.0; units],
        }
    }

    pub fn units(&self) -> usize {
        self.cell.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepCache {
    input: Vec<f64>,
    prev_hidden: Vec<f64>,
    prev_cell: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Gradients flowing out of one step of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStepGrads {
    pub input: Vec<f64>,
    pub prev_hidden: Vec<f64>,
    pub prev_cell: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmCell {
    w_input: ParamId,
    w_hidden: ParamId,
    bias: ParamId,
    input_dim: usize,
    units: usize,
}

impl LstmCell {
    /// Glorot-uniform weights; forget-gate bias starts at 1.0, other biases at 0.
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        units: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let lx = glorot_limit(input_dim, units);
        let lh = glorot_limit(units, units);
        let wx = (0..4 * units * input_dim)
            .map(|_| rng.random_range(-lx..=lx))
            .collect();
        let wh = (0..4 * units * units)
            .map(|_| rng.random_range(-lh..=lh))
            .collect();
        let mut b = vec![0.0; 4 * units];
        b[units..2 * units].iter_mut().for_each(|v| *v = 1.0);
        Self::with_values(params, name, input_dim, units, wx, wh, b)
    }

    pub fn with_values(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        units: usize,
        w_input: Vec<f64>,
        w_hidden: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let w_input = params.add(&format!("{name}.w_input"), &[4 * units, input_dim], w_input)?;
        let w_hidden = params.add(&format!("{name}.w_hidden"), &[4 * units, units], w_hidden)?;
        let bias = params.add(&format!("{name}.bias"), &[4 * units], bias)?;
        Ok(Self {
            w_input,
            w_hidden,
            bias,
            input_dim,
            units,
        })
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn bias_id(&self) -> ParamId {
        self.bias
    }

    pub fn step(
        &self,
        params: &ParamSet,
        input: &[f64],
        prev: &LstmCellState,
    ) -> Result<(LstmCellState, LstmStepCache)> {
        check_len("lstm input", self.input_dim, input.len())?;
        check_len("lstm previous cell", self.units, prev.cell.len())?;
        check_len("lstm previous hidden", self.units, prev.hidden.len())?;
        if prev.cell.iter().chain(&prev.hidden).any(|v| !v.is_finite()) {
            return Err(Error::CorruptedState(
                "non-finite value in previous cell or hidden state".into(),
            ));
        }
        let u = self.units;
        let wx = params.value(self.w_input);
        let wh = params.value(self.w_hidden);
        let b = params.value(self.bias);
        let z: Vec<f64> = (0..4 * u)
            .map(|r| {
                b[r] + dot(&wx[r * self.input_dim..(r + 1) * self.input_dim], input)
                    + dot(&wh[r * u..(r + 1) * u], &prev.hidden)
            })
            .collect();
        let i: Vec<f64> = z[..u].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[u..2 * u].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * u..3 * u].iter().map(|v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * u..].iter().map(|&v| sigmoid(v)).collect();
        let cell: Vec<f64> = (0..u).map(|k| f[k] * prev.cell[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = cell.iter().map(|v| v.tanh()).collect();
        let hidden: Vec<f64> = (0..u).map(|k| o[k] * tanh_c[k]).collect();
        let state = LstmCellState {
            cell,
            hidden,
            input_gate: i.clone(),
            forget_gate: f.clone(),
            output_gate: o.clone(),
        };
        let cache = LstmStepCache {
            input: input.to_vec(),
            prev_hidden: prev.hidden.clone(),
            prev_cell: prev.cell.clone(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        Ok((state, cache))
    }

    /// One step of BPTT. `d_hidden` and `d_cell` are the total gradients arriving at
    /// this step's outputs (from the layer above and from step t+1).
    pub fn step_backward(
        &self,
        params: &mut ParamSet,
        cache: &LstmStepCache,
        d_hidden: &[f64],
        d_cell: &[f64],
    ) -> Result<LstmStepGrads> {
        let u = self.units;
        check_len("lstm hidden gradient", u, d_hidden.len())?;
        check_len("lstm cell gradient", u, d_cell.len())?;
        let mut dz = vec![0.0; 4 * u];
        let mut d_prev_cell = vec![0.0; u];
        for k in 0..u {
            let (i, f, g, o, tc) = (
                cache.i[k],
                cache.f[k],
                cache.g[k],
                cache.o[k],
                cache.tanh_c[k],
            );
            let dc = d_cell[k] + d_hidden[k] * o * (1.0 - tc * tc);
            let d_o = d_hidden[k] * tc;
            dz[k] = dc * g * i * (1.0 - i);
            dz[u + k] = dc * cache.prev_cell[k] * f * (1.0 - f);
            dz[2 * u + k] = dc * i * (1.0 - g * g);
            dz[3 * u + k] = d_o * o * (1.0 - o);
            d_prev_cell[k] = dc * f;
        }

        let mut d_input = vec![0.0; self.input_dim];
        let mut d_prev_hidden = vec![0.0; u];
        {
            let wx = params.value(self.w_input);
            let wh = params.value(self.w_hidden);
            for (r, &g) in dz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                axpy(
                    g,
                    &wx[r * self.input_dim..(r + 1) * self.input_dim],
                    &mut d_input,
                );
                axpy(g, &wh[r * u..(r + 1) * u], &mut d_prev_hidden);
            }
        }
        {
            let gx = &mut params.get_mut(self.w_input).grad;
            for (row, &g) in gx.chunks_exact_mut(self.input_dim).zip(&dz) {
                axpy(g, &cache.input, row);
            }
        }
        {
            let gh = &mut params.get_mut(self.w_hidden).grad;
            for (row, &g) in gh.chunks_exact_mut(u).zip(&dz) {
                axpy(g, &cache.prev_hidden, row);
            }
        }
        for (gb, &g) in params.get_mut(self.bias).grad.iter_mut().zip(&dz) {
            *gb += g;
        }
        Ok(LstmStepGrads {
            input: d_input,
            prev_hidden: d_prev_hidden,
            prev_cell: d_prev_cell,
        })
    }
}
