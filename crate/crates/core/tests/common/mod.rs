#![allow(dead_code)]

use emsparse::forward::ScatteringOperator;
use emsparse::geometry::Point;
use emsparse::scene::{Disc, SceneDescriptor, Shape};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn two_cylinders(contrast: f64) -> SceneDescriptor {
    SceneDescriptor::new(
        Shape::Cylinders {
            discs: vec![
                Disc {
                    center: Point::new(-0.17, 0.1),
                    radius: 0.12,
                },
                Disc {
                    center: Point::new(0.17, 0.1),
                    radius: 0.12,
                },
            ],
        },
        contrast,
    )
}

/// `rows x cols` complex Gaussian matrix with unit-norm columns.
pub fn gaussian_operator(rows: usize, cols: usize, seed: u64) -> ScatteringOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c.unscale_mut(n);
    }
    ScatteringOperator::from_dense(m).unwrap()
}

/// `k`-sparse real vector with entries of magnitude in [1, 2].
pub fn planted(n: usize, k: usize, seed: u64) -> (Vec<usize>, DVector<Complex64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut support = rand::seq::index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let mut x = DVector::zeros(n);
    for &i in &support {
        let v: f64 = rng.random_range(1.0..2.0);
        x[i] = Complex64::new(if rng.random_bool(0.5) { v } else { -v }, 0.0);
    }
    (support, x)
}
