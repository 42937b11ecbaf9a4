//! Post-norm transformer encoder block:
//! `h = LN(x + Drop(MHA(x)))`, `y = LN(h + Drop(FF(h)))`, `FF = W₂·ReLU(W₁·h)`.

use rand::Rng;

use crate::activation::{dropout, relu, relu_backward, DropoutMask};
use crate::attention::{AttentionCache, MultiHeadAttention};
use crate::error::Result;
use crate::linear::Linear;
use crate::norm::{LayerNorm, LayerNormCache};
use crate::params::{Grads, ModelParams};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub norm2: LayerNorm,
    pub dropout: f64,
}

#[derive(Clone, Debug)]
pub struct EncoderCache<T> {
    attn: AttentionCache<T>,
    attn_drop: DropoutMask<T>,
    norm1: LayerNormCache<T>,
    h1: Tensor<T>,
    ff_pre: Tensor<T>,
    ff_act: Tensor<T>,
    ff_drop: DropoutMask<T>,
    norm2: LayerNormCache<T>,
}

impl<T: Real> EncoderCache<T> {
    /// Feed-forward pre-activations (input of the ReLU).
    pub fn ff_preactivation(&self) -> &Tensor<T> {
        &self.ff_pre
    }

    pub fn norm_caches(&self) -> [&LayerNormCache<T>; 2] {
        [&self.norm1, &self.norm2]
    }
}

fn add<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
    Tensor::from_vec(a.shape(), data).expect("same shape")
}

impl EncoderLayer {
    pub fn new<T: Real, R: Rng + ?Sized>(
        params: &mut ModelParams<T>,
        name: &str,
        dim: usize,
        heads: usize,
        ff_hidden: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let attention = MultiHeadAttention::new(params, &format!("{name}.attn"), dim, heads, rng)?;
        let norm1 = LayerNorm::new(params, &format!("{name}.norm1"), dim);
        let ff1 = Linear::new(params, &format!("{name}.ff1"), dim, ff_hidden, rng);
        let ff2 = Linear::new(params, &format!("{name}.ff2"), ff_hidden, dim, rng);
        let norm2 = LayerNorm::new(params, &format!("{name}.norm2"), dim);
        Ok(EncoderLayer { attention, norm1, ff1, ff2, norm2, dropout })
    }

    pub fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        p: &ModelParams<T>,
        x: &Tensor<T>,
        training: bool,
        rng: &mut R,
    ) -> Result<(Tensor<T>, EncoderCache<T>)> {
        let (a, attn) = self.attention.forward(p, x)?;
        let (a, attn_drop) = dropout(&a, self.dropout, training, rng)?;
        let (h1, norm1) = self.norm1.forward(p, &add(x, &a))?;
        let ff_pre = self.ff1.forward(p, &h1)?;
        let ff_act = relu(&ff_pre);
        let f = self.ff2.forward(p, &ff_act)?;
        let (f, ff_drop) = dropout(&f, self.dropout, training, rng)?;
        let (y, norm2) = self.norm2.forward(p, &add(&h1, &f))?;
        Ok((y, EncoderCache { attn, attn_drop, norm1, h1, ff_pre, ff_act, ff_drop, norm2 }))
    }

    pub fn backward<T: Real>(
        &self,
        p: &ModelParams<T>,
        cache: &EncoderCache<T>,
        dy: &Tensor<T>,
        g: &mut Grads<T>,
    ) -> Tensor<T> {
        let dr2 = self.norm2.backward(p, &cache.norm2, dy, g);
        let df = cache.ff_drop.backward(&dr2);
        let dact = self.ff2.backward(p, &cache.ff_act, &df, g);
        let dpre = relu_backward(&cache.ff_pre, &dact);
        let dh1_ff = self.ff1.backward(p, &cache.h1, &dpre, g);
        let dh1 = add(&dr2, &dh1_ff);
        let dr1 = self.norm1.backward(p, &cache.norm1, &dh1, g);
        let da = cache.attn_drop.backward(&dr1);
        let dx_attn = self.attention.backward(p, &cache.attn, &da, g);
        add(&dr1, &dx_attn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sublayers_reduce_to_double_layer_norm() {
        let mut p = ModelParams::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = EncoderLayer::new(&mut p, "enc", 4, 2, 8, 0.1, &mut rng).unwrap();
        for id in p.ids().collect::<Vec<_>>() {
            let name = p.iter().nth(id.index()).unwrap().name.clone();
            if !name.contains("norm") {
                p.value_mut(id).data_mut().fill(0.0);
            }
        }
        let x = Tensor::from_vec(&[1, 2, 4], vec![0.5, -1.0, 2.0, 3.0, 1.0, 1.5, -0.5, 0.0]).unwrap();
        let (y, _) = layer.forward(&p, &x, false, &mut rng).unwrap();
        let (once, _) = layer.norm1.forward(&p, &x).unwrap();
        let (twice, _) = layer.norm2.forward(&p, &once).unwrap();
        assert_eq!(y.shape(), x.shape());
        for (a, b) in y.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_mode_is_pure() {
        let mut p = ModelParams::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer = EncoderLayer::new(&mut p, "enc", 64, 2, 64, 0.1, &mut rng).unwrap();
        let x = Tensor::from_vec(&[2, 3, 64], (0..384).map(|i| (i as f32 * 0.05).sin()).collect())
            .unwrap();
        let (a, _) = layer.forward(&p, &x, false, &mut rng).unwrap();
        let (b, _) = layer.forward(&p, &x, false, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), &[2, 3, 64]);
    }
}
