//! Named parameter store with Adam optimizer state.

use rand::Rng;

use crate::error::{NnError, Result};
use crate::real::Real;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Index of a tensor inside a [`ModelParams`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
}

impl<T: Real> Param<T> {
    pub fn first_moment(&self) -> &[T] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[T] {
        &self.second_moment
    }
}

/// All trainable tensors of one model, in registration order, plus the Adam
/// step counter shared by every tensor.
#[derive(Clone, Debug, Default)]
pub struct ModelParams<T> {
    params: Vec<Param<T>>,
    step: u64,
}

impl<T: Real> ModelParams<T> {
    pub fn new() -> Self {
        ModelParams { params: Vec::new(), step: 0 }
    }

    /// Registers a tensor; names must be unique.
    pub fn add(&mut self, name: &str, value: Tensor<T>) -> ParamId {
        assert!(
            self.params.iter().all(|p| p.name != name),
            "duplicate parameter name {name}"
        );
        let n = value.len();
        self.params.push(Param {
            name: name.to_string(),
            value,
            first_moment: vec![T::zero(); n],
            second_moment: vec![T::zero(); n],
        });
        ParamId(self.params.len() - 1)
    }

    /// Registers a tensor drawn from U(−a, a) with a = √(6/(fan_in+fan_out)).
    pub fn add_xavier<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| T::of(rng.random_range(-bound..bound))).collect();
        self.add(name, Tensor::from_vec(shape, data).expect("shape matches length"))
    }

    pub fn add_zeros(&mut self, name: &str, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn add_filled(&mut self, name: &str, shape: &[usize], value: f64) -> ParamId {
        let t = Tensor::zeros(shape).map(|_| T::of(value));
        self.add(name, t)
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Total scalar count over all tensors.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// `(name, shape)` of every tensor in registration order.
    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.params.iter().map(|p| (p.name.clone(), p.value.shape().to_vec())).collect()
    }

    /// Copies of all values, used to snapshot the best parameters.
    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: Vec<Tensor<T>>) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            assert_eq!(p.value.shape(), v.shape());
            p.value = v;
        }
    }

    /// Replaces the value of `name`, keeping the shape contract.
    pub fn load(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let p = self
            .params
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| NnError::Parameter(format!("unknown tensor {name}")))?;
        if p.value.shape() != value.shape() {
            return Err(NnError::shape(
                "load",
                format!("{name}: expected {:?}, got {:?}", p.value.shape(), value.shape()),
            ));
        }
        p.value = value;
        Ok(())
    }

    /// One bias-corrected Adam update with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    ///
    /// Moments and the update are computed in `f64` and rounded back to `T`.
    pub fn adam_step(&mut self, grads: &Grads<T>, learning_rate: f64) -> Result<()> {
        if grads.bufs.len() != self.params.len() {
            return Err(NnError::shape("adam_step", "gradient set does not match parameters"));
        }
        for (p, g) in self.params.iter().zip(&grads.bufs) {
            if p.value.len() != g.len() {
                return Err(NnError::shape("adam_step", format!("gradient of {}", p.name)));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let corr1 = 1.0 - ADAM_BETA1.powi(t);
        let corr2 = 1.0 - ADAM_BETA2.powi(t);
        for (p, g) in self.params.iter_mut().zip(&grads.bufs) {
            let values = p.value.data_mut();
            for i in 0..values.len() {
                let gi = g[i].as_f64();
                let m = ADAM_BETA1 * p.first_moment[i].as_f64() + (1.0 - ADAM_BETA1) * gi;
                let v = ADAM_BETA2 * p.second_moment[i].as_f64() + (1.0 - ADAM_BETA2) * gi * gi;
                p.first_moment[i] = T::of(m);
                p.second_moment[i] = T::of(v);
                let update = learning_rate * (m / corr1) / ((v / corr2).sqrt() + ADAM_EPSILON);
                values[i] = T::of(values[i].as_f64() - update);
            }
        }
        Ok(())
    }
}

/// Gradient accumulators shaped like a [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<T> {
    bufs: Vec<Vec<T>>,
}

impl<T: Real> Grads<T> {
    pub fn zeros_like(params: &ModelParams<T>) -> Self {
        Grads { bufs: params.params.iter().map(|p| vec![T::zero(); p.value.len()]).collect() }
    }

    pub fn get(&self, id: ParamId) -> &[T] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.bufs[id.0]
    }

    /// Mutable access to two distinct buffers at once.
    pub fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut [T], &mut [T]) {
        assert_ne!(a, b);
        if a.0 < b.0 {
            let (lo, hi) = self.bufs.split_at_mut(b.0);
            (&mut lo[a.0], &mut hi[0])
        } else {
            let (lo, hi) = self.bufs.split_at_mut(a.0);
            (&mut hi[0], &mut lo[b.0])
        }
    }

    pub fn add_assign(&mut self, other: &Grads<T>) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for b in &self.bufs {
            if let Some(index) = b.iter().position(|v| !v.is_finite()) {
                return Err(NnError::NumericFault { op: "gradient", index });
            }
        }
        Ok(())
    }
}
