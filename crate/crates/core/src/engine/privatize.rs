use rand::Rng;

use super::model::{l2_norm, PerSampleGrads};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rescales every row to L2 norm at most `clip`.
///
/// Rows already within the bound are left untouched. Scaled rows are shrunk by
/// whole ulps until the recomputed norm is `<= clip`, so the bound holds exactly.
pub fn clip_per_sample<F: Scalar>(grads: &mut PerSampleGrads<F>, clip: F) -> Result<()> {
    if !(clip > F::zero()) || !clip.is_finite() {
        return Err(Error::invalid("clip", format!("must be positive, got {clip}")));
    }
    for i in 0..grads.rows() {
        let row = grads.row_mut(i);
        let norm = l2_norm(row);
        if norm <= clip {
            continue;
        }
        let original: Vec<F> = row.to_vec();
        let mut factor = clip / norm;
        let shrink = F::one() - F::lit(4.0) * F::epsilon();
        loop {
            for (r, &o) in row.iter_mut().zip(&original) {
                *r = o * factor;
            }
            if l2_norm(row) <= clip {
                break;
            }
            factor *= shrink;
        }
    }
    Ok(())
}

/// Identifies the noise draw of one iteration of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub seed: u64,
    pub iteration: u64,
}

impl NoiseKey {
    pub fn new(seed: u64, iteration: u64) -> Self {
        NoiseKey { seed, iteration }
    }

    /// Standard normal for `coordinate`, a pure function of `(seed, iteration, coordinate)`.
    pub fn gaussian(&self, coordinate: u64) -> f64 {
        let base = mix(mix(self.seed ^ 0x6a09_e667_f3bc_c909) ^ self.iteration);
        let state = mix(base ^ coordinate.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        // Two uniforms in (0, 1] from 53-bit mantissas.
        let u1 = ((state >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let u2 = ((mix(state ^ 0xbb67_ae85_84ca_a73b) >> 11) as f64) / (1u64 << 53) as f64;
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `(sum of rows + N(0, (sigma * clip)^2) per coordinate) / denominator`.
///
/// `cols` is the parameter count, used when the batch has no rows.
pub fn noisy_aggregate<F: Scalar>(
    clipped: &PerSampleGrads<F>,
    cols: usize,
    sigma: F,
    clip: F,
    denominator: F,
    key: NoiseKey,
) -> Result<Vec<F>> {
    if !(sigma >= F::zero()) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be nonnegative, got {sigma}")));
    }
    if !(denominator > F::zero()) {
        return Err(Error::invalid("denominator", format!("must be positive, got {denominator}")));
    }
    if clipped.rows() > 0 && clipped.cols() != cols {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: clipped.cols(),
        });
    }
    let mut sum = vec![F::zero(); cols];
    for row in clipped.iter_rows() {
        for (s, &g) in sum.iter_mut().zip(row) {
            *s += g;
        }
    }
    let std = sigma * clip;
    if std > F::zero() {
        for (j, s) in sum.iter_mut().enumerate() {
            *s += std * F::lit(key.gaussian(j as u64));
        }
    }
    for s in &mut sum {
        *s /= denominator;
    }
    Ok(sum)
}

/// Each of `0..n` independently with probability `q`.
pub fn poisson_sample<R: Rng + ?Sized>(n: usize, q: f64, rng: &mut R) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid("q", format!("must lie in [0, 1], got {q}")));
    }
    Ok((0..n).filter(|_| rng.random::<f64>() < q).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clip_examples() {
        let mut g = PerSampleGrads::from_rows(vec![vec![3.0f64, 4.0], vec![0.1, 0.1], vec![0.0, 0.0]]).unwrap();
        clip_per_sample(&mut g, 2.5).unwrap();
        assert!((g.row(0)[0] - 1.5).abs() < 1e-15 && (g.row(0)[1] - 2.0).abs() < 1e-15);
        let mut g2 = PerSampleGrads::from_rows(vec![vec![0.1f64, 0.1], vec![0.0, 0.0]]).unwrap();
        clip_per_sample(&mut g2, 1.0).unwrap();
        assert_eq!(g2.row(0), &[0.1, 0.1]);
        assert_eq!(g2.row(1), &[0.0, 0.0]);
        assert!(clip_per_sample(&mut g2, 0.0).is_err());
    }

    #[test]
    fn noiseless_aggregate_is_mean() {
        let g = PerSampleGrads::from_rows(vec![vec![1.0f64, 2.0], vec![3.0, -2.0]]).unwrap();
        let out = noisy_aggregate(&g, 2, 0.0, 1.0, 2.0, NoiseKey::new(1, 0)).unwrap();
        assert_eq!(out, vec![2.0, 0.0]);
    }

    #[test]
    fn aggregate_is_deterministic() {
        let g = PerSampleGrads::from_rows(vec![vec![1.0f64, 2.0, 3.0]]).unwrap();
        let k = NoiseKey::new(11, 4);
        let a = noisy_aggregate(&g, 3, 1.3, 0.7, 5.0, k).unwrap();
        let b = noisy_aggregate(&g, 3, 1.3, 0.7, 5.0, k).unwrap();
        assert_eq!(a, b);
        let c = noisy_aggregate(&g, 3, 1.3, 0.7, 5.0, NoiseKey::new(11, 5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_batch_yields_scaled_noise() {
        let empty = PerSampleGrads::<f64>::zeros(0, 0);
        let out = noisy_aggregate(&empty, 4, 1.0, 1.0, 10.0, NoiseKey::new(0, 0)).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|v| v.is_finite() && *v != 0.0));
    }

    #[test]
    fn poisson_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(poisson_sample(100, 0.0, &mut rng).unwrap().is_empty());
        assert_eq!(poisson_sample(100, 1.0, &mut rng).unwrap(), (0..100).collect::<Vec<_>>());
        assert!(poisson_sample(100, 1.5, &mut rng).is_err());
    }

    #[test]
    fn gaussian_draws_are_standard() {
        let k = NoiseKey::new(3, 9);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|j| k.gaussian(j)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }
}
