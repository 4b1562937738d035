#![allow(dead_code)]

use placeholder_zsl::dataset::{generate_synthetic, Episode, SplitDataset, SynthConfig};
use placeholder_zsl::numerics::{Activation, MappingNet, Matrix, RngStream};

pub fn random_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// An episode of `m` classes with random attributes and features.
pub fn random_episode(m: usize, shots: usize, attr_dim: usize, feat_dim: usize, rng: &mut RngStream) -> Episode {
    let visual = random_matrix(m * shots, feat_dim, rng);
    let semantic = random_matrix(m, attr_dim, rng);
    Episode::from_parts((0..m).collect(), shots, (0..m * shots).collect(), visual, semantic).unwrap()
}

pub fn random_net(input: usize, hidden: usize, output: usize, rng: &mut RngStream) -> MappingNet {
    MappingNet::new(
        random_matrix(hidden, input, rng),
        (0..hidden).map(|_| rng.normal()).collect(),
        random_matrix(output, hidden, rng),
        (0..output).map(|_| rng.normal()).collect(),
        Activation::Relu,
    )
    .unwrap()
}

/// A small benchmark that trains in well under a second.
pub fn small_config(seed: u64, noise: f64) -> SynthConfig {
    SynthConfig {
        seen_count: 12,
        unseen_count: 4,
        attr_dim: 6,
        feat_dim: 10,
        train_per_class: 16,
        test_per_class: 6,
        noise_scale: noise,
        seed,
    }
}

pub fn small_dataset(seed: u64) -> SplitDataset {
    generate_synthetic(&small_config(seed, 0.5)).unwrap()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, 0 when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` with respect to each entry of `params`.
pub fn numeric_gradient(params: &mut [f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + step;
            let up = f(params);
            params[i] = orig - step;
            let down = f(params);
            params[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}
