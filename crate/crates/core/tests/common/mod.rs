#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use saddp_core::engine::{per_sample_gradients, Architecture, ModelParams};

/// Central difference of the single-sample loss along every coordinate.
pub fn finite_difference(params: &ModelParams<f64>, x: &[f64], label: usize, h: f64) -> Vec<f64> {
    let mut probe = params.clone();
    (0..params.len())
        .map(|j| {
            let w = params.values()[j];
            probe.values_mut()[j] = w + h;
            let up = probe.loss(x, label).unwrap();
            probe.values_mut()[j] = w - h;
            let down = probe.loss(x, label).unwrap();
            probe.values_mut()[j] = w;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|analytic - numeric| / max(|numeric|, floor)` over coordinates.
pub fn worst_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(floor))
        .fold(0.0, f64::max)
}

/// A random architecture with at most `max_params` parameters, random
/// weights, one random input and label.
pub fn random_case(rng: &mut ChaCha8Rng, max_params: usize) -> (ModelParams<f64>, Vec<f64>, usize) {
    let arch = loop {
        let d = rng.random_range(1..=8);
        let h = if rng.random_bool(0.5) { 0 } else { rng.random_range(1..=10) };
        let k = rng.random_range(2..=5);
        let a = Architecture::mlp(d, h, k);
        if a.num_params() <= max_params {
            break a;
        }
    };
    let values = (0..arch.num_params()).map(|_| rng.random_range(-1.5..1.5)).collect();
    let params = ModelParams::new(arch, values).unwrap();
    let x: Vec<f64> = (0..arch.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let label = rng.random_range(0..arch.classes);
    (params, x, label)
}

/// Analytic per-sample gradient of one sample.
pub fn analytic_gradient(params: &ModelParams<f64>, x: &[f64], label: usize) -> Vec<f64> {
    per_sample_gradients(params, x, &[label]).unwrap().row(0).to_vec()
}
