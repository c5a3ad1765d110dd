//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use einv::gmm::{BwStats, DiagGmm};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Planted {
    pub ubm: DiagGmm<f64>,
    pub t_true: Array2<f64>,
    pub stats: Vec<BwStats<f64>>,
}

/// Stats of `n_utts` utterances whose supervector offsets are `T*·w`; each
/// first-order block carries frame-level Gaussian noise unless `noise` is off.
pub fn planted(c: usize, d: usize, r: usize, n_utts: usize, seed: u64, noise: bool) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let t_true = Array2::from_shape_simple_fn((c * d, r), &mut normal);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let variances = Array2::from_shape_simple_fn((c, d), || rng.random_range(0.5..1.5));
    let ubm = DiagGmm::new(Array1::from_elem(c, 1.0 / c as f64), Array2::zeros((c, d)), variances).unwrap();
    let stats = (0..n_utts)
        .map(|u| {
            let w = Array1::from_shape_simple_fn(r, || -> f64 { StandardNormal.sample(&mut rng) });
            let offset = t_true.dot(&w);
            let n = Array1::from_shape_simple_fn(c, || rng.random_range(2000.0..6000.0));
            let f = Array2::from_shape_fn((c, d), |(k, j)| {
                let mean_part = n[k] * offset[k * d + j];
                if noise {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean_part + (n[k] * ubm.variances[[k, j]]).sqrt() * z
                } else {
                    mean_part
                }
            });
            BwStats {
                n,
                f,
                utterance_id: format!("u{u}"),
            }
        })
        .collect();
    Planted { ubm, t_true, stats }
}

// Modified Gram–Schmidt, independent of the crate's linear algebra.
fn orthonormal_columns(a: &Array2<f64>) -> Array2<f64> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        for k in 0..j {
            let dot: f64 = (0..q.nrows()).map(|i| q[[i, j]] * q[[i, k]]).sum();
            for i in 0..q.nrows() {
                q[[i, j]] -= dot * q[[i, k]];
            }
        }
        let norm: f64 = (0..q.nrows()).map(|i| q[[i, j]].powi(2)).sum::<f64>().sqrt();
        for i in 0..q.nrows() {
            q[[i, j]] /= norm;
        }
    }
    q
}

/// Largest principal angle (degrees) between the column spaces of two
/// two-column matrices.
pub fn largest_principal_angle_deg(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.ncols(), 2);
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let m = qa.t().dot(&qb);
    // singular values of a 2×2 matrix from the eigenvalues of MᵀM
    let g = m.t().dot(&m);
    let tr = g[[0, 0]] + g[[1, 1]];
    let det = g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let smallest_sv = (tr / 2.0 - disc).max(0.0).sqrt().min(1.0);
    smallest_sv.acos().to_degrees()
}

