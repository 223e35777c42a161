//! The three second-momentum operations of SET-Adam, one function each.

use crate::error::{Error, Result};

/// `cos^n` of the angle between a nonnegative vector and the all-one vector.
///
/// For `n = 2` this is `(Σ v)² / (d · Σ v²)`. The zero vector and
/// single-coordinate vectors give `1`. `n = 0` always gives `1`.
pub fn cos2_angle(v: &[f64], n: u32) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyLayer);
    }
    let mut max = 0.0f64;
    for (index, &x) in v.iter().enumerate() {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeEntry { index, value: x });
        }
        max = max.max(x);
    }
    if n == 0 || v.len() == 1 || max == 0.0 {
        return Ok(1.0);
    }
    // Normalise by the max so squares neither underflow nor overflow.
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for &x in v {
        let y = x / max;
        sum += y;
        sumsq += y * y;
    }
    let c2 = (sum * sum / (v.len() as f64 * sumsq)).min(1.0);
    Ok(c2.powi((n / 2) as i32))
}

/// Angle between `v` and the all-one vector, in degrees.
pub fn angle_deg(v: &[f64]) -> Result<f64> {
    let c2 = cos2_angle(v, 2)?;
    Ok(c2.sqrt().min(1.0).acos().to_degrees())
}

/// `ṽ = γ v`.
pub fn down_scale(v: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    down_scale_into(v, gamma, &mut out);
    out
}

pub fn down_scale_into(v: &[f64], gamma: f64, out: &mut [f64]) {
    debug_assert!((0.0..=1.0).contains(&gamma));
    for (o, &x) in out.iter_mut().zip(v) {
        *o = gamma * x;
    }
}

/// `w = sqrt(ṽ / (1 - β2^t) + ε)`.
pub fn eps_embed(scaled: &[f64], t: u64, beta2: f64, epsilon: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; scaled.len()];
    eps_embed_into(scaled, t, beta2, epsilon, &mut out)?;
    Ok(out)
}

pub fn eps_embed_into(scaled: &[f64], t: u64, beta2: f64, epsilon: f64, out: &mut [f64]) -> Result<()> {
    if t == 0 {
        return Err(Error::ZeroIteration("second-moment bias correction"));
    }
    let bc2 = 1.0 - beta2.powi(t.min(i32::MAX as u64) as i32);
    for (o, &x) in out.iter_mut().zip(scaled) {
        *o = (x / bc2 + epsilon).sqrt();
    }
    Ok(())
}

/// `w̃ = w - τ · min(w)`.
pub fn down_translate(w: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; w.len()];
    down_translate_into(w, tau, &mut out)?;
    Ok(out)
}

pub fn down_translate_into(w: &[f64], tau: f64, out: &mut [f64]) -> Result<()> {
    let min = w.iter().copied().reduce(f64::min).ok_or(Error::EmptyLayer)?;
    let shift = tau * min;
    for (o, &x) in out.iter_mut().zip(w) {
        *o = x - shift;
    }
    Ok(())
}
