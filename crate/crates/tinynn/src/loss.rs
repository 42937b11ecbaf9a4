//! Loss functions. The `*_parts` variants return the *sum* of per-sample
//! losses together with its gradient so a batch can be split into chunks whose
//! contributions are added in a fixed order.

use crate::attention::softmax_in_place;
use crate::error::{NnError, Result};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredError,
}

/// Sum over samples of `−log softmax(logits)[label]` and its gradient.
pub fn cross_entropy_parts<T: Real>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>)> {
    let classes = logits.last_dim();
    if logits.rows() != labels.len() {
        return Err(NnError::shape(
            "cross_entropy",
            format!("{} rows of logits for {} labels", logits.rows(), labels.len()),
        ));
    }
    let mut grad = logits.data().to_vec();
    let mut total = 0.0;
    for (row, &label) in grad.chunks_exact_mut(classes).zip(labels) {
        if label >= classes {
            return Err(NnError::Parameter(format!("label {label} outside 0..{classes}")));
        }
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max.as_f64()
            + row.iter().map(|&v| (v - max).as_f64().exp()).sum::<f64>().ln();
        total += lse - row[label].as_f64();
        softmax_in_place(row);
        row[label] -= T::one();
    }
    if !total.is_finite() {
        return Err(NnError::NumericFault { op: "cross_entropy", index: 0 });
    }
    Ok((total, Tensor::from_vec(logits.shape(), grad)?))
}

/// Mean over the batch of the cross-entropy loss.
pub fn cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let (sum, _) = cross_entropy_parts(logits, labels)?;
    Ok(sum / labels.len().max(1) as f64)
}

/// Sum over samples of the per-sample mean squared error, and its gradient.
pub fn mse_parts<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(NnError::shape(
            "mse",
            format!("prediction {:?} vs target {:?}", pred.shape(), target.shape()),
        ));
    }
    let width = pred.last_dim();
    let inv = T::of(2.0 / width as f64);
    let mut total = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let diff = p - t;
            total += diff.as_f64() * diff.as_f64();
            diff * inv
        })
        .collect();
    total /= width as f64;
    if !total.is_finite() {
        return Err(NnError::NumericFault { op: "mse", index: 0 });
    }
    Ok((total, Tensor::from_vec(pred.shape(), grad)?))
}

/// Mean of squared elementwise differences.
pub fn mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    let (sum, _) = mse_parts(pred, target)?;
    Ok(sum / pred.rows().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_class_count() {
        let logits = Tensor::<f32>::zeros(&[4, 30]);
        let loss = cross_entropy(&logits, &[0, 5, 17, 29]).unwrap();
        assert!((loss - 30f64.ln()).abs() < 1e-9);
        assert!((loss - 3.4012).abs() < 1e-4);
    }

    #[test]
    fn huge_logit_does_not_overflow() {
        let mut data = vec![0.0f32; 30];
        data[0] = 1e6;
        let logits = Tensor::from_vec(&[1, 30], data).unwrap();
        let (loss, grad) = cross_entropy_parts(&logits, &[0]).unwrap();
        assert!(loss.abs() < 1e-12);
        grad.check_finite("test").unwrap();
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let logits = Tensor::<f32>::zeros(&[1, 30]);
        assert!(matches!(cross_entropy(&logits, &[30]), Err(NnError::Parameter(_))));
    }

    #[test]
    fn mse_of_identical_tensors_is_zero() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v + 2.0);
        assert!((mse(&a, &b).unwrap() - 4.0).abs() < 1e-12);
    }
}
