//! ReLU and inverted dropout.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::real::Real;
use crate::tensor::Tensor;

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given its input; the derivative at 0 is taken as 0.
pub fn relu_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&xv, &g)| if xv > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data).expect("same shape as x")
}

/// Multiplicative dropout mask: each entry is 0 with probability `rate` and
/// `1/(1−rate)` otherwise. `None` means the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask<T>(Option<Vec<T>>);

impl<T: Real> DropoutMask<T> {
    pub fn identity() -> Self {
        DropoutMask(None)
    }

    pub fn apply(&self, x: &Tensor<T>) -> Tensor<T> {
        match &self.0 {
            None => x.clone(),
            Some(mask) => {
                let data = x.data().iter().zip(mask).map(|(&v, &m)| v * m).collect();
                Tensor::from_vec(x.shape(), data).expect("mask matches input")
            }
        }
    }

    /// The backward pass is the same elementwise product.
    pub fn backward(&self, dy: &Tensor<T>) -> Tensor<T> {
        self.apply(dy)
    }
}

/// Inverted dropout. In evaluation mode, or with `rate == 0`, this is the identity.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    x: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::Parameter(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), DropoutMask::identity()));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let mask = DropoutMask(Some(mask));
    Ok((mask.apply(x), mask))
}
