//! Small dense linear-algebra helpers.

use nalgebra::DMatrix;
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::field::{matrix_to_row_major, Field};

/// Condition-number bound above which a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse with a condition-number guard.
pub fn invert(what: &str, point: &[f64], m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let cond = condition_number(m);
    if !(cond < MAX_CONDITION) {
        return Err(Error::Degenerate { what: what.to_string(), point: point.to_vec(), cond });
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate { what: what.to_string(), point: point.to_vec(), cond })
}

/// Pointwise inverse of a square-matrix field; derivatives use `∂(A⁻¹) = −A⁻¹ ∂A A⁻¹`.
pub fn inverse_field(f: &Field) -> Field {
    let n = f.shape()[0];
    let n_in = f.n_in();
    let a = f.clone();
    let b = f.clone();
    Field::new(n_in, &[n, n], move |x| {
        let m = a.eval_matrix(x);
        let inv = m.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        matrix_to_row_major(&inv)
    })
    .with_fd(f.fd())
    .with_partials(move |x| {
        let m = b.eval_matrix(x);
        let inv = m.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        let mut out = Vec::with_capacity(n_in * n * n);
        for k in 0..n_in {
            let dk = -&inv * b.partial_matrix(x, k) * &inv;
            out.extend(matrix_to_row_major(&dk));
        }
        out
    })
}

pub fn array3(shape: (usize, usize, usize), data: Vec<f64>) -> Array3<f64> {
    Array3::from_shape_vec(shape, data).expect("array3: data length does not match shape")
}

/// Levi-Civita symbol in three dimensions.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub fn max_abs<'a, I: IntoIterator<Item = &'a f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |acc, v| acc.max(v.abs()))
}
