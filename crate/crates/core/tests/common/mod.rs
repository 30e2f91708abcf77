//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use fuzzy_cgan::autodiff::{Tape, Var};
use fuzzy_cgan::datasets::Dataset;
use fuzzy_cgan::{seeded_rng, Result, Tensor};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Magnitude below which gradient errors are measured absolutely.
pub const FD_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Largest relative error between the reverse-mode gradient of
/// `sum(f(inputs) * W)` and central finite differences, over every input
/// entry. `W` is a fixed random weighting of the output.
pub fn gradient_error<F>(inputs: &[Tensor], weight_seed: u64, f: F) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let weights = {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let (r, c) = f(&tape, &vars)?.shape();
        let mut rng = seeded_rng(weight_seed);
        Tensor::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    };
    let loss_value = |xs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&tape, &vars)?;
        out.mul(&tape.constant(weights.clone()))?.sum_all().value().item()
    };

    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&tape, &vars)?.mul(&tape.constant(weights.clone()))?.sum_all();
    let grads = loss.backward()?;

    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let g = grads.wrt(var);
        for k in 0..inputs[i].len() {
            let original = inputs[i].data()[k];
            work[i].data_mut()[k] = original + FD_STEP;
            let up = loss_value(&work)?;
            work[i].data_mut()[k] = original - FD_STEP;
            let down = loss_value(&work)?;
            work[i].data_mut()[k] = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(g.data()[k], numeric));
        }
    }
    Ok(worst)
}

/// Tensor with entries uniform in `[lo, hi)`.
pub fn random_tensor<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

/// Like [`random_tensor`] but with no entry within `gap` of any point in `avoid`.
pub fn random_tensor_avoiding<R: Rng>(
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
    avoid: &[f64],
    gap: f64,
    rng: &mut R,
) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| loop {
        let v = rng.gen_range(lo..hi);
        if avoid.iter().all(|a| (v - a).abs() > gap) {
            break v;
        }
    })
}

/// Noisy nonlinear regression data with `features` columns.
pub fn synthetic_dataset(name: &str, rows: usize, features: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let x = random_tensor(rows, features, -2.0, 2.0, &mut rng);
    let y = Tensor::from_fn(rows, 1, |r, _| {
        let row = x.row(r);
        let linear: f64 = row.iter().enumerate().map(|(i, v)| v * (1.0 + i as f64 * 0.3)).sum();
        linear + 2.0 * row[0].sin() + 0.1 * rng.gen_range(-1.0..1.0)
    });
    Dataset::new(name, x, y, 1.0).unwrap()
}
