#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spforge::fusion::FeatureMatrix;

pub fn matrix(data: Vec<f64>, n_cols: usize, labels: Vec<usize>) -> FeatureMatrix {
    FeatureMatrix {
        story_ids: (0..labels.len()).map(|i| format!("r{i}")).collect(),
        column_names: (0..n_cols).map(|i| format!("f{i}")).collect(),
        n_cols,
        data,
        labels,
        include_severity: false,
    }
}

/// Five well-separated Gaussian blobs in 10 dimensions, `per_class` rows
/// each, interleaved by class. Returns the blob centres alongside.
pub fn separable_blobs(per_class: usize, seed: u64) -> (FeatureMatrix, Vec<Vec<f64>>) {
    let (classes, dims) = (5, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dims).map(|_| if rng.gen::<bool>() { 3.0 } else { -3.0 }).collect())
        .collect();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..per_class * classes {
        let c = i % classes;
        for center in &centers[c] {
            let noise: f64 = StandardNormal.sample(&mut rng);
            data.push(center + 0.7 * noise);
        }
        labels.push(c);
    }
    (matrix(data, dims, labels), centers)
}

/// Index of the nearest centre for every row.
pub fn nearest_center(m: &FeatureMatrix, centers: &[Vec<f64>]) -> Vec<usize> {
    m.rows()
        .map(|row| {
            let d = |c: &Vec<f64>| c.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (0..centers.len())
                .min_by(|&a, &b| d(&centers[a]).total_cmp(&d(&centers[b])))
                .unwrap()
        })
        .collect()
}
