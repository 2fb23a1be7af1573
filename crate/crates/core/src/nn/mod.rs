//! Small f64 neural-network toolkit: dense layers, an LSTM cell, Adam/SGD,
//! finite-difference gradient checks and a text checkpoint format.

mod activation;
pub mod checkpoint;
mod dense;
mod gradcheck;
mod lstm;
mod mlp;
mod optim;
mod param;

pub use activation::{sigmoid, Activation};
pub use dense::{Dense, DenseCache};
pub use gradcheck::{grad_check, relative_error};
pub use lstm::{LstmCell, LstmCellState, LstmStepCache, LstmStepGrads};
pub use mlp::{Mlp, MlpRecord};
pub use optim::{Optimizer, OptimizerKind, OptimizerState};
pub use param::{Param, ParamId, ParamSet};

use crate::error::{Error, Result};

/// A recorded forward pass that may be consumed by exactly one backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    record: Option<T>,
}

impl<T> Tape<T> {
    pub fn new(record: T) -> Self {
        Self {
            record: Some(record),
        }
    }

    pub fn record(&self) -> Option<&T> {
        self.record.as_ref()
    }

    pub fn is_consumed(&self) -> bool {
        self.record.is_none()
    }

    /// Hands the recording to a backward pass; a second call fails.
    pub fn take(&mut self) -> Result<T> {
        self.record.take().ok_or(Error::StaleTape)
    }
}

/// Anything that owns a [`ParamSet`].
pub trait HasParams {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
}

impl HasParams for ParamSet {
    fn params(&self) -> &ParamSet {
        self
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tape_is_single_use() {
        let mut t = Tape::new(3);
        assert_eq!(t.take().unwrap(), 3);
        assert!(t.is_consumed());
        assert!(matches!(t.take(), Err(Error::StaleTape)));
    }
}
