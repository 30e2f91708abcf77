//! Parameter initializers.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// He-normal weights: i.i.d. `N(0, 2 / fan_in)` where `fan_in = rows`.
pub fn he_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Tensor> {
    if rows == 0 {
        return Err(Error::domain("he_normal", "fan-in must be at least 1"));
    }
    normal(rows, cols, (2.0 / rows as f64).sqrt(), rng)
}

/// I.i.d. `N(0, std^2)` entries.
pub fn normal<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Result<Tensor> {
    let dist = Normal::new(0.0, std)
        .map_err(|e| Error::domain("normal", format!("std {std}: {e}")))?;
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::new(rows, cols, data)
}

/// I.i.d. `U(0, 1)` entries.
pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    Tensor::new(rows, cols, data).expect("length matches")
}
