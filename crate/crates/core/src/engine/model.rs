//! Softmax regression and one-hidden-layer tanh MLP over a flat parameter vector.
//!
//! Parameter layout (row-major weights):
//! * softmax: `W[K x d]`, `b[K]`
//! * MLP: `W1[h x d]`, `b1[h]`, `W2[K x h]`, `b2[K]`

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    /// Zero selects softmax regression.
    pub hidden: usize,
    pub classes: usize,
}

impl Architecture {
    pub fn softmax(input_dim: usize, classes: usize) -> Self {
        Architecture {
            input_dim,
            hidden: 0,
            classes,
        }
    }

    pub fn mlp(input_dim: usize, hidden: usize, classes: usize) -> Self {
        Architecture {
            input_dim,
            hidden,
            classes,
        }
    }

    pub fn num_params(&self) -> usize {
        let (d, h, k) = (self.input_dim, self.hidden, self.classes);
        if h == 0 {
            k * d + k
        } else {
            h * d + h + k * h + k
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes < 2 {
            return Err(Error::invalid(
                "architecture",
                format!("need input_dim >= 1 and classes >= 2, got {self}"),
            ));
        }
        Ok(())
    }
}

/// `<in>-<hidden>-<classes>`
impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.input_dim, self.hidden, self.classes)
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        if parts.len() != 3 {
            return Err(Error::parse(1, format!("architecture `{s}` is not <in>-<hidden>-<classes>")));
        }
        let num = |p: &str| {
            p.parse::<usize>()
                .map_err(|_| Error::parse(1, format!("bad architecture field `{p}`")))
        };
        let arch = Architecture {
            input_dim: num(parts[0])?,
            hidden: num(parts[1])?,
            classes: num(parts[2])?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<F> {
    arch: Architecture,
    values: Vec<F>,
}

impl<F: Scalar> ModelParams<F> {
    pub fn new(arch: Architecture, values: Vec<F>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.num_params() {
            return Err(Error::DimensionMismatch {
                expected: arch.num_params(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("params", "non-finite parameter"));
        }
        Ok(ModelParams { arch, values })
    }

    /// Every parameter drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` of its layer.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(arch.num_params());
        let mut layer = |count: usize, fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..count {
                values.push(F::lit(rng.random_range(-bound..bound)));
            }
        };
        let (d, h, k) = (arch.input_dim, arch.hidden, arch.classes);
        if h == 0 {
            layer(k * d + k, d, &mut rng);
        } else {
            layer(h * d + h, d, &mut rng);
            layer(k * h + k, h, &mut rng);
        }
        Ok(ModelParams { arch, values })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `w <- w - lr * grad`
    pub fn sgd_step(&mut self, lr: F, grad: &[F]) {
        for (w, &g) in self.values.iter_mut().zip(grad) {
            *w -= lr * g;
        }
    }

    fn check_input(&self, x: &[F]) -> Result<()> {
        if x.len() != self.arch.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Unnormalized class scores for one sample.
    pub fn logits(&self, x: &[F]) -> Result<Vec<F>> {
        self.check_input(x)?;
        Ok(self.forward(x).logits)
    }

    pub fn predict(&self, x: &[F]) -> Result<usize> {
        let logits = self.logits(x)?;
        Ok(argmax(&logits))
    }

    /// Predictions for a row-major block of samples.
    pub fn predict_batch(&self, features: &[F]) -> Result<Vec<usize>> {
        let d = self.arch.input_dim;
        if !features.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: features.len() % d,
            });
        }
        features.chunks(d).map(|x| self.predict(x)).collect()
    }

    /// Cross-entropy of one sample.
    pub fn loss(&self, x: &[F], label: usize) -> Result<F> {
        self.check_input(x)?;
        self.check_label(label)?;
        let logits = self.forward(x).logits;
        Ok(log_sum_exp(&logits) - logits[label])
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.arch.classes {
            return Err(Error::invalid(
                "label",
                format!("label {label} outside [0, {})", self.arch.classes),
            ));
        }
        Ok(())
    }

    fn forward(&self, x: &[F]) -> Forward<F> {
        let (d, h, k) = (self.arch.input_dim, self.arch.hidden, self.arch.classes);
        let p = &self.values;
        if h == 0 {
            let (w, b) = p.split_at(k * d);
            Forward {
                hidden: Vec::new(),
                logits: affine(w, b, x, k, d),
            }
        } else {
            let (w1, rest) = p.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(k * h);
            let hidden: Vec<F> = affine(w1, b1, x, h, d).into_iter().map(F::tanh).collect();
            let logits = affine(w2, b2, &hidden, k, h);
            Forward { hidden, logits }
        }
    }

    /// Loss and its gradient for one sample, written into `grad`.
    fn loss_and_grad(&self, x: &[F], label: usize, grad: &mut [F]) -> F {
        let (d, h, k) = (self.arch.input_dim, self.arch.hidden, self.arch.classes);
        let fwd = self.forward(x);
        let lse = log_sum_exp(&fwd.logits);
        let loss = lse - fwd.logits[label];
        // dL/dlogits = softmax - onehot
        let mut delta: Vec<F> = fwd.logits.iter().map(|&z| (z - lse).exp()).collect();
        delta[label] -= F::one();

        if h == 0 {
            let (gw, gb) = grad.split_at_mut(k * d);
            outer_into(gw, &delta, x);
            gb.copy_from_slice(&delta);
        } else {
            let w2 = &self.values[h * d + h..h * d + h + k * h];
            let (gw1, rest) = grad.split_at_mut(h * d);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(k * h);
            outer_into(gw2, &delta, &fwd.hidden);
            gb2.copy_from_slice(&delta);
            // back through W2 and tanh
            for j in 0..h {
                let mut back = F::zero();
                for c in 0..k {
                    back += w2[c * h + j] * delta[c];
                }
                let a = fwd.hidden[j];
                gb1[j] = back * (F::one() - a * a);
            }
            outer_into(gw1, gb1, x);
        }
        loss
    }
}

struct Forward<F> {
    hidden: Vec<F>,
    logits: Vec<F>,
}

fn affine<F: Scalar>(w: &[F], b: &[F], x: &[F], rows: usize, cols: usize) -> Vec<F> {
    (0..rows)
        .map(|r| {
            let row = &w[r * cols..(r + 1) * cols];
            row.iter().zip(x).fold(b[r], |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

fn outer_into<F: Scalar>(out: &mut [F], left: &[F], right: &[F]) {
    let n = right.len();
    for (i, &l) in left.iter().enumerate() {
        for (o, &r) in out[i * n..(i + 1) * n].iter_mut().zip(right) {
            *o = l * r;
        }
    }
}

fn log_sum_exp<F: Scalar>(v: &[F]) -> F {
    let m = v.iter().copied().fold(F::neg_infinity(), F::max);
    m + v.iter().map(|&z| (z - m).exp()).sum::<F>().ln()
}

fn argmax<F: Scalar>(v: &[F]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &z)| if z > v[best] { i } else { best })
}

/// Per-example loss gradients, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleGrads<F> {
    data: Vec<F>,
    rows: usize,
    cols: usize,
}

impl<F: Scalar> PerSampleGrads<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PerSampleGrads {
            data: vec![F::zero(); rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(PerSampleGrads { data, rows: n, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[F]> {
        // chunks_exact(0) panics; an empty matrix has no rows anyway.
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn row_norms(&self) -> Vec<F> {
        self.iter_rows().map(l2_norm).collect()
    }
}

/// Euclidean norm with a fixed left-to-right summation order.
pub fn l2_norm<F: Scalar>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Exact cross-entropy gradient of each sample in a row-major batch.
pub fn per_sample_gradients<F: Scalar>(
    params: &ModelParams<F>,
    features: &[F],
    labels: &[usize],
) -> Result<PerSampleGrads<F>> {
    per_sample_losses_and_gradients(params, features, labels).map(|(g, _)| g)
}

/// Like [`per_sample_gradients`], also returning each sample's loss.
pub fn per_sample_losses_and_gradients<F: Scalar>(
    params: &ModelParams<F>,
    features: &[F],
    labels: &[usize],
) -> Result<(PerSampleGrads<F>, Vec<F>)> {
    let d = params.arch.input_dim;
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if features.len() != labels.len() * d {
        return Err(Error::DimensionMismatch {
            expected: labels.len() * d,
            found: features.len(),
        });
    }
    for &y in labels {
        params.check_label(y)?;
    }
    let mut grads = PerSampleGrads::zeros(labels.len(), params.len());
    let mut losses = Vec::with_capacity(labels.len());
    for (i, (x, &y)) in features.chunks_exact(d).zip(labels).enumerate() {
        losses.push(params.loss_and_grad(x, y, grads.row_mut(i)));
    }
    Ok((grads, losses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts() {
        assert_eq!(Architecture::softmax(20, 7).num_params(), 147);
        assert_eq!(Architecture::mlp(4, 5, 3).num_params(), 20 + 5 + 15 + 3);
    }

    #[test]
    fn arch_text_round_trip() {
        let a = Architecture::mlp(20, 16, 7);
        assert_eq!(a.to_string(), "20-16-7");
        assert_eq!("20-16-7".parse::<Architecture>().unwrap(), a);
        assert!("20-16".parse::<Architecture>().is_err());
        assert!("20-x-7".parse::<Architecture>().is_err());
    }

    #[test]
    fn init_respects_fan_in_and_seed() {
        let arch = Architecture::mlp(9, 4, 3);
        let p = ModelParams::<f64>::init(arch, 5).unwrap();
        assert_eq!(p, ModelParams::init(arch, 5).unwrap());
        assert_ne!(p, ModelParams::init(arch, 6).unwrap());
        let first = &p.values()[..9 * 4 + 4];
        assert!(first.iter().all(|v| v.abs() < 1.0 / 3.0));
        let second = &p.values()[9 * 4 + 4..];
        assert!(second.iter().all(|v| v.abs() < 0.5));
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        // Softmax is exactly one-hot only in the limit; use logits whose
        // probabilities round to exactly 1 and 0 in f64.
        let arch = Architecture::softmax(1, 2);
        let p = ModelParams::new(arch, vec![0.0, 0.0, 1000.0, 0.0]).unwrap();
        let g = per_sample_gradients(&p, &[1.0], &[0]).unwrap();
        assert!(g.row(0).iter().all(|&v| v == 0.0), "{:?}", g.row(0));
    }

    #[test]
    fn duplicate_samples_give_identical_rows() {
        let arch = Architecture::mlp(3, 4, 3);
        let p = ModelParams::<f64>::init(arch, 1).unwrap();
        let x = [0.3, -1.2, 0.5];
        let batch: Vec<f64> = x.iter().chain(x.iter()).copied().collect();
        let g = per_sample_gradients(&p, &batch, &[2, 2]).unwrap();
        assert_eq!(g.row(0), g.row(1));
    }

    #[test]
    fn rejects_bad_batches() {
        let p = ModelParams::<f64>::init(Architecture::softmax(2, 2), 0).unwrap();
        assert!(per_sample_gradients(&p, &[], &[]).is_err());
        assert!(per_sample_gradients(&p, &[1.0, 2.0, 3.0], &[0]).is_err());
        assert!(per_sample_gradients(&p, &[1.0, 2.0], &[2]).is_err());
        assert!(p.predict(&[1.0]).is_err());
    }

    #[test]
    fn finite_difference_spot_check() {
        let arch = Architecture::mlp(3, 4, 3);
        let p = ModelParams::<f64>::init(arch, 3).unwrap();
        let x = [0.7, -0.2, 1.1];
        let g = per_sample_gradients(&p, &x, &[1]).unwrap();
        let h = 1e-5;
        for j in 0..p.len() {
            let mut plus = p.clone();
            plus.values_mut()[j] += h;
            let mut minus = p.clone();
            minus.values_mut()[j] -= h;
            let fd = (plus.loss(&x, 1).unwrap() - minus.loss(&x, 1).unwrap()) / (2.0 * h);
            assert!((fd - g.row(0)[j]).abs() < 1e-8, "coord {j}: {fd} vs {}", g.row(0)[j]);
        }
    }
}
