use super::error::{NetError, Result};
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Probability clamp used by the cross-entropy loss.
pub const BCE_CLAMP: f64 = 1e-7;

/// Loss value together with its gradient with respect to the predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<S> {
    pub value: S,
    pub grad: Tensor<S>,
}

/// Mean squared error over every entry.
pub fn loss_mse<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>) -> Result<LossOutput<S>> {
    if pred.shape != target.shape {
        return Err(NetError::shape("mse target", &pred.shape, &target.shape));
    }
    if pred.is_empty() {
        return Err(NetError::EmptyMask);
    }
    let n = S::of(pred.len() as f64);
    let two = S::of(2.0);
    let mut value = S::zero();
    let mut grad = Tensor::zeros(&pred.shape);
    for ((g, &p), &t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p - t;
        value += d * d;
        *g = two * d / n;
    }
    Ok(LossOutput { value: value / n, grad })
}

/// Binary cross-entropy averaged over entries whose mask bit is set.
pub fn loss_bce_masked<S: Scalar>(pred: &Tensor<S>, target: &Tensor<S>, mask: &[bool]) -> Result<LossOutput<S>> {
    if pred.shape != target.shape {
        return Err(NetError::shape("bce target", &pred.shape, &target.shape));
    }
    if mask.len() != pred.len() {
        return Err(NetError::shape("bce mask", &[pred.len()], &[mask.len()]));
    }
    let kept = mask.iter().filter(|&&m| m).count();
    if kept == 0 {
        return Err(NetError::EmptyMask);
    }
    let n = S::of(kept as f64);
    let lo = S::of(BCE_CLAMP);
    let hi = S::one() - lo;
    let mut value = S::zero();
    let mut grad = Tensor::zeros(&pred.shape);
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let (p, t) = (pred.data[i], target.data[i]);
        let pc = p.max(lo).min(hi);
        value -= t * pc.ln() + (S::one() - t) * (S::one() - pc).ln();
        if p > lo && p < hi {
            grad.data[i] = (pc - t) / (pc * (S::one() - pc)) / n;
        }
    }
    Ok(LossOutput { value: value / n, grad })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(&[v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn mse_zero_at_target() {
        let p = t(&[0.1, 0.5, -2.0]);
        let out = loss_mse(&p, &p).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(out.grad.data.iter().all(|&g| g == 0.0));
        assert_eq!(loss_mse(&t(&[1.0, -1.0]), &t(&[0.0, 0.0])).unwrap().value, 1.0);
    }

    #[test]
    fn bce_half_is_ln2() {
        let p = t(&[0.5; 6]);
        let target = t(&[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let out = loss_bce_masked(&p, &target, &[true; 6]).unwrap();
        assert!((out.value - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn mask_equals_subset() {
        let p = t(&[0.9, 0.2, 0.6, 0.3]);
        let target = t(&[1.0, 0.0, 0.0, 1.0]);
        let masked = loss_bce_masked(&p, &target, &[true, false, true, false]).unwrap();
        let kept = loss_bce_masked(&t(&[0.9, 0.6]), &t(&[1.0, 0.0]), &[true, true]).unwrap();
        assert!((masked.value - kept.value).abs() < 1e-15);
        assert_eq!(masked.grad.data[1], 0.0);
        assert_eq!(masked.grad.data[3], 0.0);
        assert_eq!(
            loss_bce_masked(&p, &target, &[false; 4]).unwrap_err().kind(),
            "EmptyMask"
        );
    }

    #[test]
    fn bce_gradient_matches_difference() {
        let p = t(&[0.3, 0.8]);
        let target = t(&[1.0, 0.0]);
        let out = loss_bce_masked(&p, &target, &[true, true]).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut up = p.clone();
            up.data[i] += h;
            let mut dn = p.clone();
            dn.data[i] -= h;
            let num = (loss_bce_masked(&up, &target, &[true, true]).unwrap().value
                - loss_bce_masked(&dn, &target, &[true, true]).unwrap().value)
                / (2.0 * h);
            assert!((num - out.grad.data[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn clamped_predictions_stay_finite() {
        let out = loss_bce_masked(&t(&[0.0, 1.0]), &t(&[1.0, 0.0]), &[true, true]).unwrap();
        assert!(out.value.is_finite());
        assert!((out.value - -(1e-7f64).ln()).abs() < 1e-6);
    }
}
