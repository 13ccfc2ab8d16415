use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::nn::{RngStream, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Squared Euclidean norm of the residual.
    L2,
    /// Sum of absolute residuals; subgradient 0 at a zero residual.
    L1,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::L2 => "l2",
            LossKind::L1 => "l1",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(LossKind::L2),
            "l1" => Ok(LossKind::L1),
            _ => Err(Error::config(format!("unknown loss {s:?}, expected l2 or l1"))),
        }
    }
}

/// Loss of one prediction and its gradient with respect to `pred`.
pub fn reconstruction_loss<T: Scalar>(pred: &[T], target: &[T], kind: LossKind) -> Result<(T, Vec<T>)> {
    ensure_len("loss target", pred.len(), target.len())?;
    let mut grad = vec![T::zero(); pred.len()];
    let loss = loss_into(pred, target, kind, T::one(), &mut grad);
    Ok((loss, grad))
}

/// Unscaled loss of all rows; writes `scale * dL/dpred` into `grad`.
pub(crate) fn loss_into<T: Scalar>(pred: &[T], target: &[T], kind: LossKind, scale: T, grad: &mut [T]) -> T {
    let mut total = T::zero();
    let two = T::from_f64(2.0);
    for ((p, t), g) in pred.iter().zip(target).zip(grad.iter_mut()) {
        let r = *p - *t;
        match kind {
            LossKind::L2 => {
                total += r * r;
                *g = scale * two * r;
            }
            LossKind::L1 => {
                total += r.abs();
                *g = if r > T::zero() {
                    scale
                } else if r < T::zero() {
                    -scale
                } else {
                    T::zero()
                };
            }
        }
    }
    total
}

/// `count` codes of length `d` with i.i.d. `N(0, s^2)` entries.
pub fn init_latents(count: usize, d: usize, s: f64, rng: &mut RngStream) -> Result<Vec<Vec<f32>>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::config(format!("latent scale must be positive, got {s}")));
    }
    Ok((0..count)
        .map(|_| (0..d).map(|_| rng.normal(0.0, s) as f32).collect())
        .collect())
}

/// `10 log10(peak^2 / MSE)`; identical inputs give `+inf`.
pub fn psnr(pred: &[f64], target: &[f64], peak: f64) -> Result<f64> {
    ensure_len("psnr target", pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::Empty("psnr input"));
    }
    let mse = pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / pred.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// `psnr` over the pixels of a `w x h` image (`m` channels) with `x + y >= w`,
/// the half where both frequencies of a diagonal sweep are highest.
pub fn psnr_high_frequency_half(pred: &[f64], target: &[f64], w: usize, h: usize, m: usize) -> Result<f64> {
    ensure_len("psnr target", pred.len(), target.len())?;
    ensure_len("image values", w * h * m, pred.len())?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for y in 0..h {
        for x in 0..w {
            if x * h + y * w >= w * h {
                let i = (y * w + x) * m;
                a.extend_from_slice(&pred[i..i + m]);
                b.extend_from_slice(&target[i..i + m]);
            }
        }
    }
    psnr(&a, &b, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        for kind in [LossKind::L2, LossKind::L1] {
            let (l, g) = reconstruction_loss(&[0.3, -0.2], &[0.3, -0.2], kind).unwrap();
            assert_eq!(l, 0.0);
            assert_eq!(g, vec![0.0, 0.0]);
        }
        let (l, g) = reconstruction_loss(&[1.0, 0.0], &[0.0, 0.0], LossKind::L2).unwrap();
        assert_eq!((l, g), (1.0, vec![2.0, 0.0]));
        let (l, g) = reconstruction_loss(&[1.0, -2.0], &[0.0, 0.0], LossKind::L1).unwrap();
        assert_eq!((l, g), (3.0, vec![1.0, -1.0]));
        assert!(reconstruction_loss(&[1.0], &[1.0, 2.0], LossKind::L1).is_err());
        assert_eq!("L1".parse::<LossKind>().unwrap(), LossKind::L1);
        assert!("huber".parse::<LossKind>().is_err());
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let target = [0.2, -0.7, 1.1];
        let pred = [0.5, -0.1, 0.4];
        for kind in [LossKind::L2, LossKind::L1] {
            let (_, g) = reconstruction_loss(&pred, &target, kind).unwrap();
            let fd =
                crate::nn::finite_difference_grad(|p| reconstruction_loss(p, &target, kind).unwrap().0, &pred, 1e-6)
                    .unwrap();
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn latent_init_statistics() {
        let tiny = init_latents(10, 8, 1e-12, &mut RngStream::new(1)).unwrap();
        assert!(tiny.iter().flatten().all(|v| v.abs() < 1e-9));
        let codes = init_latents(1000, 1000, 1e-2, &mut RngStream::new(2)).unwrap();
        let n = 1e6;
        let mean = codes.iter().flatten().map(|&v| f64::from(v)).sum::<f64>() / n;
        let var = codes
            .iter()
            .flatten()
            .map(|&v| (f64::from(v) - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!((var.sqrt() - 1e-2).abs() < 2e-4);
        assert_eq!(
            init_latents(3, 4, 0.5, &mut RngStream::new(3)).unwrap(),
            init_latents(3, 4, 0.5, &mut RngStream::new(3)).unwrap()
        );
        assert!(init_latents(1, 1, 0.0, &mut RngStream::new(3)).is_err());
    }

    #[test]
    fn psnr_examples() {
        assert_eq!(psnr(&[0.5, 0.2], &[0.5, 0.2], 1.0).unwrap(), f64::INFINITY);
        assert!((psnr(&[0.1], &[0.0], 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!((psnr(&[0.01], &[0.0], 1.0).unwrap() - 40.0).abs() < 1e-9);
        assert!(psnr(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn high_frequency_half_selects_lower_right() {
        let (w, h) = (4, 4);
        let target = vec![0.0; 16];
        let mut pred = vec![0.0; 16];
        // Error only in the top-left corner, which is excluded.
        pred[0] = 1.0;
        assert_eq!(
            psnr_high_frequency_half(&pred, &target, w, h, 1).unwrap(),
            f64::INFINITY
        );
        pred[15] = 0.1;
        assert!(psnr_high_frequency_half(&pred, &target, w, h, 1).unwrap().is_finite());
    }
}
