use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-class proportional train/test split.
///
/// Each class contributes `round(count * test_fraction)` rows to the test side,
/// clamped so both sides keep at least one row of every present class.
pub fn stratified_split<F: Scalar>(
    data: &Dataset<F>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<F>, Dataset<F>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(
            "test_fraction",
            format!("must lie in (0, 1), got {test_fraction}"),
        ));
    }
    if let Some((class, _)) = data
        .class_counts()
        .iter()
        .enumerate()
        .find(|(_, &c)| c == 1)
    {
        return Err(Error::invalid(
            "data",
            format!("class {class} has a single sample and cannot be split"),
        ));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.num_classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut members in by_class {
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}
