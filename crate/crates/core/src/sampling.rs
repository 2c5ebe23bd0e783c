//! Seeded random fields for tests, probes and solver starts.

use std::sync::Arc;

use ndarray::Array3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{BoundaryClass, ScalarField};
use crate::grid::Grid;
use crate::scalar::Real;

/// Random expansion with modes `k_i < max_mode` along each axis and
/// coefficients uniform in `[-1, 1]` damped by `1/(1+|k|²)`.
///
/// The same seed and `max_mode` give the same function on every grid that
/// resolves those modes.
pub fn random_field<T: Real, R: Rng + ?Sized>(
    grid: &Arc<Grid<T>>,
    class: BoundaryClass,
    max_mode: usize,
    rng: &mut R,
) -> Result<ScalarField<T>> {
    let shape = match class {
        BoundaryClass::DirichletSine => grid.sine_shape(),
        BoundaryClass::NeumannCosine => grid.cosine_shape(),
        BoundaryClass::Nodal => return Err(Error::UnsupportedClass(class)),
    };
    let offset = usize::from(class == BoundaryClass::DirichletSine);
    let mut c = Array3::zeros(shape);
    for i in 0..max_mode {
        for j in 0..max_mode {
            for k in 0..max_mode {
                let v: f64 = rng.random_range(-1.0..1.0);
                let (ki, kj, kk) = (i + offset, j + offset, k + offset);
                let damp = 1.0 / (1.0 + (ki * ki + kj * kj + kk * kk) as f64);
                if i < shape[0] && j < shape[1] && k < shape[2] {
                    c[[i, j, k]] = T::lit(v * damp);
                }
            }
        }
    }
    ScalarField::from_coefficients(grid.clone(), class, c)
}
