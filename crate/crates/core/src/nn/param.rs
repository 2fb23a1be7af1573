//! Named parameter arrays with matching gradient slots.

use crate::error::{Error, Result};

/// One named parameter array, stored row-major, with a gradient of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Handle to a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Names must be unique and values finite.
    pub fn add(&mut self, name: &str, shape: &[usize], value: Vec<f64>) -> Result<ParamId> {
        let expected: usize = shape.iter().product();
        if expected != value.len() {
            return Err(Error::DimensionMismatch {
                context: "parameter shape",
                expected,
                actual: value.len(),
            });
        }
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "parameter `{name}` has non-finite values"
            )));
        }
        let grad = vec![0.0; value.len()];
        self.params.push(Param {
            name: name.to_owned(),
            shape: shape.to_vec(),
            value,
            grad,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, Param> {
        self.params.iter_mut()
    }

    /// Number of parameter arrays.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalars across all arrays.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.value.iter().chain(p.grad.iter()).all(|v| v.is_finite()))
    }

    /// Flattened copy of every value, in registration order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.params
            .iter()
            .flat_map(|p| p.value.iter().copied())
            .collect()
    }

    fn check_same_layout(&self, other: &ParamSet) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::DimensionMismatch {
                context: "parameter set layout",
                expected: self.params.len(),
                actual: other.params.len(),
            });
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.shape != b.shape {
                return Err(Error::DimensionMismatch {
                    context: "parameter shape",
                    expected: a.len(),
                    actual: b.len(),
                });
            }
        }
        Ok(())
    }

    /// Overwrites values with those of `other` (same layout required).
    pub fn copy_values_from(&mut self, other: &ParamSet) -> Result<()> {
        self.check_same_layout(other)?;
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            dst.value.copy_from_slice(&src.value);
        }
        Ok(())
    }

    /// `self ← tau·online + (1 − tau)·self`, elementwise.
    pub fn blend_from(&mut self, online: &ParamSet, tau: f64) -> Result<()> {
        self.check_same_layout(online)?;
        for (dst, src) in self.params.iter_mut().zip(&online.params) {
            for (d, s) in dst.value.iter_mut().zip(&src.value) {
                *d = tau * s + (1.0 - tau) * *d;
            }
        }
        Ok(())
    }
}
