//! Dense row-major tensors generic over the float width.
//!
//! The network trains in `f32`; gradient tests instantiate the same layers
//! with `f64` to measure finite-difference error well below single-precision
//! noise. `Scalar` is the small trait both widths satisfy.

use crate::rng::SplitMix64;

/// Floating-point element type for network tensors. The conversion methods
/// get names distinct from the `num_traits` ones to stay unambiguous.
pub trait Scalar:
    num_traits::Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
    fn cast(v: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Scalar for f32 {
    fn cast(v: f64) -> Self {
        v as f32
    }
    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn cast(v: f64) -> Self {
        v
    }
    fn into_f64(self) -> f64 {
        self
    }
}

/// Row-major dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); len],
        }
    }

    /// Builds a tensor from existing data. Panics if the element count does
    /// not match the shape; callers construct shapes, not user input.
    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Self {
        let expect: usize = shape.iter().product();
        assert_eq!(
            expect,
            data.len(),
            "shape {:?} wants {} elements, got {}",
            shape,
            expect,
            data.len()
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    /// Fills a fresh tensor with draws from `uniform(-bound, bound)`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut SplitMix64) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| F::cast(rng.range_f64(-bound, bound)))
            .collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Self {
        let expect: usize = shape.iter().product();
        assert_eq!(expect, self.data.len(), "reshape element count mismatch");
        self.shape = shape.to_vec();
        self
    }

    pub fn fill(&mut self, v: F) {
        for x in &mut self.data {
            *x = v;
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, F> {
        self.data.iter()
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A learnable tensor paired with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param<F> {
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
}

impl<F: Scalar> Param<F> {
    pub fn new(value: Tensor<F>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }
}
