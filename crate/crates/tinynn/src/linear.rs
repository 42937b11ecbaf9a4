//! Fully connected layer: `y = x·W + b` over the last axis.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::kernels;
use crate::params::{Grads, ModelParams, ParamId};
use crate::real::Real;
use crate::tensor::Tensor;

/// `x[..×n] · W[n×m] + b[m]`; leading axes of `x` are treated as rows.
pub fn linear<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, m) = check_shapes(x, w, b)?;
    let rows = x.rows();
    let mut out = Vec::with_capacity(rows * m);
    for _ in 0..rows {
        out.extend_from_slice(b.data());
    }
    kernels::matmul_acc(x.data(), w.data(), &mut out, rows, n, m);
    let mut shape = x.shape().to_vec();
    *shape.last_mut().expect("rank checked") = m;
    let y = Tensor::from_vec(&shape, out)?;
    y.check_finite("linear")?;
    Ok(y)
}

/// Accumulates `∂L/∂W` and `∂L/∂b` and returns `∂L/∂x`.
pub fn linear_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
    dw: &mut [T],
    db: &mut [T],
) -> Tensor<T> {
    let n = w.shape()[0];
    let m = w.shape()[1];
    let rows = x.rows();
    debug_assert_eq!(dy.len(), rows * m);
    kernels::matmul_at_b_acc(x.data(), dy.data(), dw, rows, n, m);
    for row in dy.data().chunks_exact(m) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    let mut dx = vec![T::zero(); rows * n];
    kernels::matmul_a_bt_acc(dy.data(), w.data(), &mut dx, rows, m, n);
    Tensor::from_vec(x.shape(), dx).expect("dx has the shape of x")
}

fn check_shapes<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize)> {
    if w.rank() != 2 || b.rank() != 1 || x.rank() == 0 {
        return Err(NnError::shape(
            "linear",
            format!("x {:?}, W {:?}, b {:?}", x.shape(), w.shape(), b.shape()),
        ));
    }
    let (n, m) = (w.shape()[0], w.shape()[1]);
    if x.last_dim() != n || b.len() != m {
        return Err(NnError::shape(
            "linear",
            format!("x {:?} · W {:?} + b {:?}", x.shape(), w.shape(), b.shape()),
        ));
    }
    Ok((n, m))
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ModelParams<T>,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let weight = params.add_xavier(
            &format!("{name}.weight"),
            &[inputs, outputs],
            inputs,
            outputs,
            rng,
        );
        let bias = params.add_zeros(&format!("{name}.bias"), &[outputs]);
        Linear { weight, bias, inputs, outputs }
    }

    pub fn forward<T: Real>(&self, p: &ModelParams<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        linear(x, p.value(self.weight), p.value(self.bias))
    }

    pub fn backward<T: Real>(
        &self,
        p: &ModelParams<T>,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        g: &mut Grads<T>,
    ) -> Tensor<T> {
        let (dw, db) = g.pair_mut(self.weight, self.bias);
        linear_backward(x, p.value(self.weight), dy, dw, db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0f32, -2.0, 3.5, 0.0, 4.0, -1.0]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let b = Tensor::zeros(&[3]);
        assert_eq!(linear(&x, &w, &b).unwrap(), x);
    }

    #[test]
    fn classifier_hidden_layer_shape() {
        let x = Tensor::<f32>::zeros(&[4, 832]);
        let w = Tensor::zeros(&[832, 128]);
        let b = Tensor::zeros(&[128]);
        assert_eq!(linear(&x, &w, &b).unwrap().shape(), &[4, 128]);
    }

    #[test]
    fn mismatched_inner_dimension_is_rejected() {
        let x = Tensor::<f32>::zeros(&[2, 5]);
        let w = Tensor::zeros(&[4, 3]);
        let b = Tensor::zeros(&[3]);
        assert!(matches!(linear(&x, &w, &b), Err(NnError::Shape { .. })));
    }

    #[test]
    fn non_finite_output_is_a_numeric_fault() {
        let x = Tensor::from_vec(&[1, 1], vec![f32::MAX]).unwrap();
        let w = Tensor::from_vec(&[1, 1], vec![10.0f32]).unwrap();
        let b = Tensor::zeros(&[1]);
        assert!(matches!(linear(&x, &w, &b), Err(NnError::NumericFault { .. })));
    }
}
