use crate::error::{Error, Result};

/// Central-difference gradient of a scalar function, in 64-bit.
pub fn finite_difference_grad<F>(mut f: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::config(format!("finite-difference step must be > 0, got {eps}")));
    }
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + eps;
        let plus = f(&p);
        p[k] = orig - eps;
        let minus = f(&p);
        p[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "function evaluation at coordinate {k} returned {plus} / {minus}"
            )));
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
