//! Multi-head scaled dot-product self-attention over `batch × time × dim`.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::linear::Linear;
use crate::params::{Grads, ModelParams};
use crate::real::Real;
use crate::tensor::Tensor;

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub dim: usize,
    pub heads: usize,
}

#[derive(Clone, Debug)]
pub struct AttentionCache<T> {
    input: Tensor<T>,
    q: Tensor<T>,
    k: Tensor<T>,
    v: Tensor<T>,
    /// Attention weights laid out as `batch × heads × time × time`.
    weights: Vec<T>,
    context: Tensor<T>,
}

impl<T: Real> AttentionCache<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

impl MultiHeadAttention {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ModelParams<T>,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(NnError::shape(
                "multi_head_attention",
                format!("dim {dim} is not divisible by {heads} heads"),
            ));
        }
        Ok(MultiHeadAttention {
            query: Linear::new(params, &format!("{name}.query"), dim, dim, rng),
            key: Linear::new(params, &format!("{name}.key"), dim, dim, rng),
            value: Linear::new(params, &format!("{name}.value"), dim, dim, rng),
            output: Linear::new(params, &format!("{name}.output"), dim, dim, rng),
            dim,
            heads,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    fn dims<T: Real>(&self, x: &Tensor<T>) -> Result<(usize, usize)> {
        if x.rank() != 3 || x.shape()[2] != self.dim {
            return Err(NnError::shape(
                "multi_head_attention",
                format!("expected batch × time × {}, got {:?}", self.dim, x.shape()),
            ));
        }
        Ok((x.shape()[0], x.shape()[1]))
    }

    pub fn forward<T: Real>(
        &self,
        p: &ModelParams<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, AttentionCache<T>)> {
        let (batch, time) = self.dims(x)?;
        let (d, h, dh) = (self.dim, self.heads, self.head_dim());
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let q = self.query.forward(p, x)?;
        let k = self.key.forward(p, x)?;
        let v = self.value.forward(p, x)?;
        let (qd, kd, vd) = (q.data(), k.data(), v.data());

        let mut weights = vec![T::zero(); batch * h * time * time];
        let mut context = vec![T::zero(); batch * time * d];
        for b in 0..batch {
            for head in 0..h {
                let off = head * dh;
                let w = &mut weights[(b * h + head) * time * time..][..time * time];
                for i in 0..time {
                    let qi = &qd[(b * time + i) * d + off..][..dh];
                    let row = &mut w[i * time..][..time];
                    for (j, s) in row.iter_mut().enumerate() {
                        let kj = &kd[(b * time + j) * d + off..][..dh];
                        *s = qi.iter().zip(kj).map(|(&a, &c)| a * c).sum::<T>() * scale;
                    }
                    softmax_in_place(row);
                    let ci = &mut context[(b * time + i) * d + off..][..dh];
                    for (j, &pw) in row.iter().enumerate() {
                        let vj = &vd[(b * time + j) * d + off..][..dh];
                        for (c, &vv) in ci.iter_mut().zip(vj) {
                            *c += pw * vv;
                        }
                    }
                }
            }
        }
        let context = Tensor::from_vec(x.shape(), context)?;
        let y = self.output.forward(p, &context)?;
        Ok((y, AttentionCache { input: x.clone(), q, k, v, weights, context }))
    }

    pub fn backward<T: Real>(
        &self,
        p: &ModelParams<T>,
        cache: &AttentionCache<T>,
        dy: &Tensor<T>,
        g: &mut Grads<T>,
    ) -> Tensor<T> {
        let (batch, time) = (cache.input.shape()[0], cache.input.shape()[1]);
        let (d, h, dh) = (self.dim, self.heads, self.head_dim());
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let dctx = self.output.backward(p, &cache.context, dy, g);
        let (qd, kd, vd) = (cache.q.data(), cache.k.data(), cache.v.data());
        let dc = dctx.data();

        let mut dq = vec![T::zero(); qd.len()];
        let mut dk = vec![T::zero(); kd.len()];
        let mut dv = vec![T::zero(); vd.len()];
        let mut dp = vec![T::zero(); time];
        for b in 0..batch {
            for head in 0..h {
                let off = head * dh;
                let w = &cache.weights[(b * h + head) * time * time..][..time * time];
                for i in 0..time {
                    let pr = &w[i * time..][..time];
                    let dci = &dc[(b * time + i) * d + off..][..dh];
                    for j in 0..time {
                        let vj = &vd[(b * time + j) * d + off..][..dh];
                        dp[j] = dci.iter().zip(vj).map(|(&a, &c)| a * c).sum::<T>();
                        let dvj = &mut dv[(b * time + j) * d + off..][..dh];
                        for (x, &a) in dvj.iter_mut().zip(dci) {
                            *x += pr[j] * a;
                        }
                    }
                    let inner: T = pr.iter().zip(&dp).map(|(&a, &c)| a * c).sum();
                    for j in 0..time {
                        let ds = pr[j] * (dp[j] - inner) * scale;
                        let qi = (b * time + i) * d + off;
                        let kj = (b * time + j) * d + off;
                        for c in 0..dh {
                            dq[qi + c] += ds * kd[kj + c];
                            dk[kj + c] += ds * qd[qi + c];
                        }
                    }
                }
            }
        }
        let shape = cache.input.shape();
        let dq = Tensor::from_vec(shape, dq).expect("shape");
        let dk = Tensor::from_vec(shape, dk).expect("shape");
        let dv = Tensor::from_vec(shape, dv).expect("shape");
        let mut dx = self.query.backward(p, &cache.input, &dq, g);
        let dxk = self.key.backward(p, &cache.input, &dk, g);
        let dxv = self.value.backward(p, &cache.input, &dv, g);
        for ((a, &b2), &c) in dx.data_mut().iter_mut().zip(dxk.data()).zip(dxv.data()) {
            *a += b2 + c;
        }
        dx
    }
}
