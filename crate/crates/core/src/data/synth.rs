use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seven-class skew dominated by one class (~67%), shaped like HAM10000.
pub const HAM10000_LIKE_WEIGHTS: [f64; 7] = [0.67, 0.11, 0.11, 0.04, 0.03, 0.02, 0.02];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub class_weights: Vec<f64>,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 5000,
            class_weights: HAM10000_LIKE_WEIGHTS.to_vec(),
            dim: 20,
            separation: 3.0,
            seed: 0,
        }
    }
}

/// One unit-covariance Gaussian blob per class.
///
/// Class means sit at pairwise distance `separation`: scaled basis vectors when
/// `dim >= K`, otherwise a regular polygon in the first two coordinates (or a
/// line when `dim == 1`). Class sizes are `round(n * w_k)` with the rounding
/// remainder assigned to the heaviest class. Rows are shuffled.
pub fn synth_imbalanced<F: Scalar>(config: &SynthConfig) -> Result<Dataset<F>> {
    let weights = &config.class_weights;
    let k = weights.len();
    if k < 2 {
        return Err(Error::invalid("class_weights", "need at least two classes"));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid("class_weights", "weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("class_weights", format!("weights sum to {total}, not 1")));
    }
    if config.dim == 0 {
        return Err(Error::invalid("dim", "must be positive"));
    }
    if !(config.separation >= 0.0) || !config.separation.is_finite() {
        return Err(Error::invalid("separation", "must be finite and nonnegative"));
    }

    let counts = class_sizes(config.n, weights);
    let means = class_means(k, config.dim, config.separation);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(config.n);
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let x = means[class]
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + z
                })
                .collect::<Vec<f64>>();
            rows.push((x, class));
        }
    }
    // Fisher-Yates on the shared stream keeps generation a pure function of the seed.
    for i in (1..rows.len()).rev() {
        let j = rng.random_range(0..=i);
        rows.swap(i, j);
    }

    let mut features = Vec::with_capacity(config.n * config.dim);
    let mut labels = Vec::with_capacity(config.n);
    for (x, y) in rows {
        features.extend(x.into_iter().map(F::lit));
        labels.push(y);
    }
    Dataset::new(features, config.dim, labels, k)
}

fn class_sizes(n: usize, weights: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = weights.iter().map(|w| (n as f64 * w).round() as usize).collect();
    let heaviest = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, &w)| if w > weights[best] { i } else { best });
    let assigned: usize = counts.iter().sum();
    if assigned > n {
        let excess = assigned - n;
        counts[heaviest] = counts[heaviest].saturating_sub(excess);
    } else {
        counts[heaviest] += n - assigned;
    }
    counts
}

fn class_means(k: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let mut means = vec![vec![0.0; dim]; k];
    if dim >= k {
        let scale = separation / std::f64::consts::SQRT_2;
        for (c, m) in means.iter_mut().enumerate() {
            m[c] = scale;
        }
    } else if dim >= 2 {
        // Adjacent vertices of a regular k-gon at distance `separation`.
        let radius = separation / (2.0 * (std::f64::consts::PI / k as f64).sin());
        for (c, m) in means.iter_mut().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
            m[0] = radius * theta.cos();
            m[1] = radius * theta.sin();
        }
    } else {
        for (c, m) in means.iter_mut().enumerate() {
            m[0] = separation * c as f64;
        }
    }
    means
}
