use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// A named trainable tensor paired with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn check(&self) -> Result<()> {
        if self.value.shape() != self.grad.shape() {
            return Err(Error::shape("param grad", self.value.to_string(), self.grad.to_string()));
        }
        Ok(())
    }
}

/// A fixed, ordered collection of parameters. The order is stable and is
/// what optimizer state and checkpoints are keyed on.
pub trait ParamSet {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn grad_norm(&self) -> f64 {
        self.params().iter().map(|p| p.grad.sum_squares()).sum::<f64>().sqrt()
    }

    fn num_values(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Scales every gradient by `factor`.
    fn scale_grads(&mut self, factor: f64) {
        for p in self.params_mut() {
            p.grad.as_mut_slice().iter_mut().for_each(|g| *g *= factor);
        }
    }
}

impl ParamSet for Vec<Param> {
    fn params(&self) -> Vec<&Param> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.iter_mut().collect()
    }
}
