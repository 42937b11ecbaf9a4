//! Valid (unpadded), stride-1 1-D convolution over `batch × channels × length`.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::params::{Grads, ModelParams, ParamId};
use crate::real::Real;
use crate::tensor::Tensor;

/// `y[b,o,l] = bias[o] + Σᵢ Σⱼ kernel[o,i,j] · x[b,i,l+j]`, output length `L−k+1`.
pub fn conv1d<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, c_in, len, c_out, k) = check_shapes(x, kernel, bias)?;
    let out_len = len - k + 1;
    let xs = x.data();
    let ws = kernel.data();
    let mut out = vec![T::zero(); batch * c_out * out_len];
    for b in 0..batch {
        for o in 0..c_out {
            let y = &mut out[(b * c_out + o) * out_len..][..out_len];
            y.fill(bias.data()[o]);
            for i in 0..c_in {
                let xrow = &xs[(b * c_in + i) * len..][..len];
                let wrow = &ws[(o * c_in + i) * k..][..k];
                for (j, &wv) in wrow.iter().enumerate() {
                    for (yv, &xv) in y.iter_mut().zip(&xrow[j..j + out_len]) {
                        *yv += wv * xv;
                    }
                }
            }
        }
    }
    let y = Tensor::from_vec(&[batch, c_out, out_len], out)?;
    y.check_finite("conv1d")?;
    Ok(y)
}

/// Accumulates kernel and bias gradients and returns `∂L/∂x`.
pub fn conv1d_backward<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    dy: &Tensor<T>,
    dkernel: &mut [T],
    dbias: &mut [T],
) -> Tensor<T> {
    let [batch, c_in, len] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    let [c_out, _, k] = [kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]];
    let out_len = len - k + 1;
    let xs = x.data();
    let ws = kernel.data();
    let mut dx = vec![T::zero(); xs.len()];
    for b in 0..batch {
        for o in 0..c_out {
            let g = &dy.data()[(b * c_out + o) * out_len..][..out_len];
            dbias[o] += g.iter().copied().sum::<T>();
            for i in 0..c_in {
                let xrow = &xs[(b * c_in + i) * len..][..len];
                let base = (o * c_in + i) * k;
                for j in 0..k {
                    let wv = ws[base + j];
                    let mut acc = T::zero();
                    let dxrow = &mut dx[(b * c_in + i) * len + j..][..out_len];
                    for ((d, &gv), &xv) in dxrow.iter_mut().zip(g).zip(&xrow[j..j + out_len]) {
                        acc += gv * xv;
                        *d += gv * wv;
                    }
                    dkernel[base + j] += acc;
                }
            }
        }
    }
    Tensor::from_vec(x.shape(), dx).expect("dx has the shape of x")
}

fn check_shapes<T: Real>(
    x: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(usize, usize, usize, usize, usize)> {
    if x.rank() != 3 || kernel.rank() != 3 || bias.rank() != 1 {
        return Err(NnError::shape(
            "conv1d",
            format!("x {:?}, kernel {:?}, bias {:?}", x.shape(), kernel.shape(), bias.shape()),
        ));
    }
    let (batch, c_in, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, kc_in, k) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
    if kc_in != c_in || bias.len() != c_out || k == 0 {
        return Err(NnError::shape(
            "conv1d",
            format!("x {:?}, kernel {:?}, bias {:?}", x.shape(), kernel.shape(), bias.shape()),
        ));
    }
    if len < k {
        return Err(NnError::shape("conv1d", format!("input length {len} < kernel size {k}")));
    }
    Ok((batch, c_in, len, c_out, k))
}

#[derive(Clone, Debug)]
pub struct Conv1d {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
}

impl Conv1d {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ModelParams<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        rng: &mut R,
    ) -> Self {
        let kernel = params.add_xavier(
            &format!("{name}.weight"),
            &[out_channels, in_channels, kernel_size],
            in_channels * kernel_size,
            out_channels * kernel_size,
            rng,
        );
        let bias = params.add_zeros(&format!("{name}.bias"), &[out_channels]);
        Conv1d { kernel, bias, in_channels, out_channels, kernel_size }
    }

    pub fn forward<T: Real>(&self, p: &ModelParams<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv1d(x, p.value(self.kernel), p.value(self.bias))
    }

    pub fn backward<T: Real>(
        &self,
        p: &ModelParams<T>,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        g: &mut Grads<T>,
    ) -> Tensor<T> {
        let (dk, db) = g.pair_mut(self.kernel, self.bias);
        conv1d_backward(x, p.value(self.kernel), dy, dk, db)
    }
}
