//! Shared layer primitives: forward mode, dropout, layer norm, GELU.

use rand::{Rng, RngCore};

/// Forward-pass mode. Dropout is active only in `Train`.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl<'a> Mode<'a> {
    pub fn train(rng: &'a mut dyn RngCore) -> Self {
        Mode::Train(rng)
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Eval => Mode::Eval,
            Mode::Train(rng) => Mode::Train(&mut **rng),
        }
    }

    /// Inverted-dropout multipliers (`0` or `1/(1-rate)`), or `None` when inactive.
    pub fn dropout_mask(&mut self, n: usize, rate: f64) -> Option<Vec<f64>> {
        match self {
            Mode::Train(rng) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                Some(
                    (0..n)
                        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

pub fn apply_mask(x: &mut [f64], mask: Option<&Vec<f64>>) {
    if let Some(m) = mask {
        for (v, k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Per-row normalized activations (pre-affine) and inverse standard deviations.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub normalized: Vec<f64>,
    pub inv_std: Vec<f64>,
}

pub fn layer_norm(x: &[f64], rows: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, LayerNormCache) {
    let d = gain.len();
    let mut normalized = vec![0.0; rows * d];
    let mut inv_std = vec![0.0; rows];
    let mut y = vec![0.0; rows * d];
    for t in 0..rows {
        let xr = &x[t * d..(t + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std[t] = inv;
        for i in 0..d {
            let n = (xr[i] - mean) * inv;
            normalized[t * d + i] = n;
            y[t * d + i] = gain[i] * n + bias[i];
        }
    }
    (y, LayerNormCache { normalized, inv_std })
}

pub fn layer_norm_backward(
    dy: &[f64],
    cache: &LayerNormCache,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let d = gain.len();
    let rows = cache.inv_std.len();
    let mut dx = vec![0.0; rows * d];
    let mut dn = vec![0.0; d];
    for t in 0..rows {
        let nr = &cache.normalized[t * d..(t + 1) * d];
        let dyr = &dy[t * d..(t + 1) * d];
        let mut sum_dn = 0.0;
        let mut sum_dn_n = 0.0;
        for i in 0..d {
            dgain[i] += dyr[i] * nr[i];
            dbias[i] += dyr[i];
            dn[i] = dyr[i] * gain[i];
            sum_dn += dn[i];
            sum_dn_n += dn[i] * nr[i];
        }
        let scale = cache.inv_std[t] / d as f64;
        for i in 0..d {
            dx[t * d + i] = scale * (d as f64 * dn[i] - sum_dn - nr[i] * sum_dn_n);
        }
    }
    dx
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact (erf) GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layer_norm_statistics() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 1.7).sin() * 5.0 + 2.0).collect();
        let (_, cache) = layer_norm(&x, 3, &[1.0; 4], &[0.0; 4]);
        for t in 0..3 {
            let r = &cache.normalized[t * 4..(t + 1) * 4];
            let mean = r.iter().sum::<f64>() / 4.0;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gelu_known_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        let h = 1e-6;
        for x in [-2.0, -0.3, 0.0, 0.7, 3.0] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn dropout_only_in_train() {
        assert!(Mode::Eval.dropout_mask(10, 0.4).is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mode::train(&mut rng);
        assert!(m.dropout_mask(10, 0.0).is_none());
        let mask = m.dropout_mask(1000, 0.4).unwrap();
        let kept = mask.iter().filter(|&&k| k > 0.0).count();
        assert!((500..700).contains(&kept));
        assert!(mask.iter().all(|&k| k == 0.0 || (k - 1.0 / 0.6).abs() < 1e-15));
    }
}
