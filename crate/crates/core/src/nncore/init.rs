use ndarray::Array2;
use rand::Rng;

use super::Scalar;

/// `rows x cols` matrix with entries drawn from `U(-scale, scale)`, filled in
/// row-major order.
pub fn uniform_matrix<F: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || F::of(rng.random_range(-scale..scale)))
}
