use alloc::string::String;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::Real;

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

/// Process-unique handle of a [`Parameter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    fn fresh() -> Self {
        ParamId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }

    pub fn index(self) -> usize {
        self.0
    }
}

/// A trainable tensor and its accumulated gradient.
///
/// Cloning yields a parameter with a new id, so optimizer state never
/// aliases between the original and the copy.
#[derive(Debug)]
pub struct Parameter<S = f32> {
    id: ParamId,
    name: String,
    value: Tensor<S>,
    grad: Tensor<S>,
}

impl<S: Clone> Clone for Parameter<S> {
    fn clone(&self) -> Self {
        Self {
            id: ParamId::fresh(),
            name: self.name.clone(),
            value: self.value.clone(),
            grad: self.grad.clone(),
        }
    }
}

impl<S: Real> Parameter<S> {
    pub fn new(name: impl Into<String>, value: Tensor<S>) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Self { id: ParamId::fresh(), name: name.into(), value, grad }
    }

    pub fn id(&self) -> ParamId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<S> {
        &self.value
    }

    pub fn grad(&self) -> &Tensor<S> {
        &self.grad
    }

    /// Replaces the value; the shape must not change.
    pub fn set_value(&mut self, value: Tensor<S>) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::ShapeMismatch {
                op: "set_value",
                detail: alloc::format!("{:?} vs {:?}", value.shape(), self.value.shape()),
            });
        }
        self.value = value;
        Ok(())
    }

    pub(crate) fn value_mut(&mut self) -> &mut [S] {
        self.value.data_mut()
    }

    pub(crate) fn accumulate(&mut self, g: &Tensor<S>) {
        for (a, &b) in self.grad.data_mut().iter_mut().zip(g.data()) {
            *a += b;
        }
    }

    pub fn zero_grad(&mut self) {
        for v in self.grad.data_mut() {
            *v = S::zero();
        }
    }

    pub fn cast<T: Real>(&self) -> Parameter<T> {
        Parameter::new(self.name.clone(), self.value.cast())
    }
}

/// Anything that owns parameters.
pub trait Module<S: Real> {
    fn parameters(&self) -> alloc::vec::Vec<&Parameter<S>>;
    fn parameters_mut(&mut self) -> alloc::vec::Vec<&mut Parameter<S>>;

    fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.value().len()).sum()
    }
}
