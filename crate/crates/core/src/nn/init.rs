use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Glorot-uniform matrix: entries uniform in `±√(6 / (rows + cols))`.
pub fn xavier_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!(
            "xavier_init needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::from_vec(rows, cols, data)
}
