//! Sequence regressor: per-step dense embedding, one LSTM layer, dense read-out
//! of the last hidden state.

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::nn::{
    Activation, Dense, DenseCache, HasParams, LstmCell, LstmCellState, LstmStepCache, ParamSet,
    Tape,
};

#[derive(Debug, Clone)]
pub struct CpmRecord {
    embed: Vec<DenseCache>,
    steps: Vec<LstmStepCache>,
    head: DenseCache,
}

impl CpmRecord {
    pub fn output(&self) -> f64 {
        self.head.output[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpmNet {
    params: ParamSet,
    embed: Dense,
    lstm: LstmCell,
    head: Dense,
    time_steps: usize,
}

impl CpmNet {
    pub fn new<R: Rng + ?Sized>(time_steps: usize, units: usize, rng: &mut R) -> Result<Self> {
        if time_steps == 0 || units == 0 {
            return Err(Error::Config(
                "time steps and unit number must be positive".into(),
            ));
        }
        let mut params = ParamSet::new();
        let embed = Dense::new(&mut params, "cpm.input", 1, units, Activation::Linear, rng)?;
        let lstm = LstmCell::new(&mut params, "cpm.lstm", units, units, rng)?;
        let head = Dense::new(&mut params, "cpm.output", units, 1, Activation::Linear, rng)?;
        Ok(Self {
            params,
            embed,
            lstm,
            head,
            time_steps,
        })
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn units(&self) -> usize {
        self.lstm.units()
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        check_len("predictor window", self.time_steps, window.len())?;
        if window.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite value in predictor window".into(),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        self.check_window(window)?;
        let mut state = LstmCellState::zeros(self.units());
        let mut e = Vec::with_capacity(self.units());
        for &x in window {
            self.embed.forward_into(&self.params, &[x], &mut e)?;
            state = self.lstm.step(&self.params, &e, &state)?.0;
        }
        let mut y = Vec::with_capacity(1);
        self.head
            .forward_into(&self.params, &state.hidden, &mut y)?;
        Ok(y[0])
    }

    pub fn forward_recorded(&self, window: &[f64]) -> Result<Tape<CpmRecord>> {
        self.check_window(window)?;
        let mut state = LstmCellState::zeros(self.units());
        let mut embed = Vec::with_capacity(window.len());
        let mut steps = Vec::with_capacity(window.len());
        for &x in window {
            let e = self.embed.forward(&self.params, &[x])?;
            let (next, cache) = self.lstm.step(&self.params, &e.output, &state)?;
            embed.push(e);
            steps.push(cache);
            state = next;
        }
        let head = self.head.forward(&self.params, &state.hidden)?;
        Ok(Tape::new(CpmRecord { embed, steps, head }))
    }

    /// Backpropagation through all recorded steps for output gradient `d_out`.
    pub fn backward(&mut self, tape: &mut Tape<CpmRecord>, d_out: f64) -> Result<()> {
        let rec = tape.take()?;
        let u = self.units();
        let mut dh = self
            .head
            .backward(&mut self.params, &rec.head, &[d_out], true)?;
        let mut dc = vec![0.0; u];
        for (e, step) in rec.embed.iter().zip(&rec.steps).rev() {
            let g = self.lstm.step_backward(&mut self.params, step, &dh, &dc)?;
            self.embed.backward(&mut self.params, e, &g.input, true)?;
            dh = g.prev_hidden;
            dc = g.prev_cell;
        }
        Ok(())
    }

    /// Mean squared error over `(window, target)` pairs, accumulating its gradient.
    pub fn accumulate_mse(&mut self, windows: &[&[f64]], targets: &[f64]) -> Result<f64> {
        check_len("predictor targets", windows.len(), targets.len())?;
        if windows.is_empty() {
            return Err(Error::InsufficientData("empty training batch".into()));
        }
        let scale = 1.0 / windows.len() as f64;
        let mut loss = 0.0;
        for (w, &y) in windows.iter().zip(targets) {
            let mut tape = self.forward_recorded(w)?;
            let err = tape.record().expect("fresh tape").output() - y;
            loss += err * err * scale;
            self.backward(&mut tape, 2.0 * err * scale)?;
        }
        Ok(loss)
    }

    pub fn mse(&self, windows: &[&[f64]], targets: &[f64]) -> Result<f64> {
        check_len("predictor targets", windows.len(), targets.len())?;
        let mut loss = 0.0;
        for (w, &y) in windows.iter().zip(targets) {
            let e = self.forward(w)? - y;
            loss += e * e;
        }
        Ok(loss / windows.len().max(1) as f64)
    }
}

impl HasParams for CpmNet {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}
