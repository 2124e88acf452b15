// Timing probe: 50 EM iterations on a million-row, 4-column design.
use std::time::Instant;

use corrfilter::em::{fit, EMSettings};
use corrfilter::templates::DesignMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() {
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let x1: f64 = rng.gen_range(18.0..30.0);
        let x2: f64 = rng.gen_range(-2.0..2.0);
        let x3: f64 = rng.gen_range(-1.0..1.0);
        let noise: f64 = rng.gen_range(-1.0..1.0);
        let mut yi = x1 + 0.5 * x2 - 0.25 * x3 + 0.5 * noise;
        if i % 20 == 0 {
            yi += rng.gen_range(0.0..50.0);
        }
        rows.push(vec![x1, x2, x3, 1.0]);
        y.push(yi);
    }
    let ids = (0..n).collect();
    let design = DesignMatrix::from_rows(rows, y, ids).unwrap();
    let settings = EMSettings {
        max_iterations: 50,
        tolerance: 0.0,
        ..EMSettings::default()
    };
    let start = Instant::now();
    let fit = fit(&design, &settings).unwrap();
    let elapsed = start.elapsed();
    println!(
        "iterations={} elapsed={:.2?} p={:.4} K={}",
        fit.iterations, elapsed, fit.params.p, fit.k
    );
}
