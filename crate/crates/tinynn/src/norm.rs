//! Layer normalization over the last axis with learnable scale and shift.

use crate::error::Result;
use crate::params::{Grads, ModelParams, ParamId};
use crate::real::Real;
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
}

/// Values kept from the forward pass.
#[derive(Clone, Debug)]
pub struct LayerNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Real> LayerNormCache<T> {
    /// The pre-affine output `(x − μ)/σ`.
    pub fn normalized(&self) -> &Tensor<T> {
        &self.normalized
    }

    /// `1/σ` for each normalized row.
    pub fn inv_std(&self) -> &[T] {
        &self.inv_std
    }
}

impl LayerNorm {
    pub fn new<T: Real>(params: &mut ModelParams<T>, name: &str, dim: usize) -> Self {
        let gamma = params.add_filled(&format!("{name}.gamma"), &[dim], 1.0);
        let beta = params.add_zeros(&format!("{name}.beta"), &[dim]);
        LayerNorm { gamma, beta, dim }
    }

    pub fn forward<T: Real>(
        &self,
        p: &ModelParams<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, LayerNormCache<T>)> {
        let d = self.dim;
        let gamma = p.value(self.gamma).data();
        let beta = p.value(self.beta).data();
        let eps = T::of(LAYER_NORM_EPS);
        let inv_d = T::of(1.0 / d as f64);
        let rows = x.rows();
        let mut normalized = Vec::with_capacity(x.len());
        let mut out = Vec::with_capacity(x.len());
        let mut inv_std = Vec::with_capacity(rows);
        for row in x.data().chunks_exact(d) {
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            for j in 0..d {
                let n = (row[j] - mean) * is;
                normalized.push(n);
                out.push(n * gamma[j] + beta[j]);
            }
        }
        let y = Tensor::from_vec(x.shape(), out)?;
        y.check_finite("layer_norm")?;
        let normalized = Tensor::from_vec(x.shape(), normalized)?;
        Ok((y, LayerNormCache { normalized, inv_std }))
    }

    pub fn backward<T: Real>(
        &self,
        p: &ModelParams<T>,
        cache: &LayerNormCache<T>,
        dy: &Tensor<T>,
        g: &mut Grads<T>,
    ) -> Tensor<T> {
        let d = self.dim;
        let gamma = p.value(self.gamma).data();
        let inv_d = T::of(1.0 / d as f64);
        let (dgamma, dbeta) = g.pair_mut(self.gamma, self.beta);
        let mut dx = Vec::with_capacity(dy.len());
        let mut dxhat = vec![T::zero(); d];
        for ((grow, nrow), &is) in dy
            .data()
            .chunks_exact(d)
            .zip(cache.normalized.data().chunks_exact(d))
            .zip(&cache.inv_std)
        {
            let mut sum = T::zero();
            let mut sum_n = T::zero();
            for j in 0..d {
                dgamma[j] += grow[j] * nrow[j];
                dbeta[j] += grow[j];
                dxhat[j] = grow[j] * gamma[j];
                sum += dxhat[j];
                sum_n += dxhat[j] * nrow[j];
            }
            let mean = sum * inv_d;
            let mean_n = sum_n * inv_d;
            for j in 0..d {
                dx.push(is * (dxhat[j] - mean - nrow[j] * mean_n));
            }
        }
        Tensor::from_vec(dy.shape(), dx).expect("same shape as dy")
    }
}
