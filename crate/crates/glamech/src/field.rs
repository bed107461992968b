//! Coefficient fields: smooth maps from coordinates to dense row-major arrays.
//!
//! A [`Field`] evaluates to a flat `Vec<f64>` of a fixed shape. Derivatives come from an
//! optional analytic callback and otherwise from the field's own finite-difference
//! configuration.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::fd::Fd;

pub(crate) type EvalFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct Field {
    n_in: usize,
    shape: Vec<usize>,
    eval: Arc<EvalFn>,
    /// Block `k` of the output (length `len()`) holds `∂_k f`.
    partials: Option<Arc<EvalFn>>,
    fd: Fd,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("n_in", &self.n_in)
            .field("shape", &self.shape)
            .field("analytic", &self.partials.is_some())
            .finish()
    }
}

impl Field {
    pub fn new<F>(n_in: usize, shape: &[usize], f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Field { n_in, shape: shape.to_vec(), eval: Arc::new(f), partials: None, fd: Fd::default() }
    }

    /// Scalar field.
    pub fn scalar<F>(n_in: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Field::new(n_in, &[], move |x| vec![f(x)])
    }

    pub fn constant(n_in: usize, shape: &[usize], values: Vec<f64>) -> Self {
        let len: usize = shape.iter().product();
        assert_eq!(values.len(), len, "constant field: value count does not match shape");
        let v = values.clone();
        Field::new(n_in, shape, move |_| v.clone()).with_partials(move |_| vec![0.0; n_in * len])
    }

    pub fn zeros(n_in: usize, shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Field::constant(n_in, shape, vec![0.0; len])
    }

    /// Identity map on `n` coordinates.
    pub fn identity(n: usize) -> Self {
        Field::new(n, &[n], |x| x.to_vec()).with_partials(move |_| {
            let mut d = vec![0.0; n * n];
            for k in 0..n {
                d[k * n + k] = 1.0;
            }
            d
        })
    }

    /// Constant `n × n` identity matrix.
    pub fn identity_matrix(n_in: usize, n: usize) -> Self {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        Field::constant(n_in, &[n, n], v)
    }

    pub fn with_partials<D>(mut self, d: D) -> Self
    where
        D: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.partials = Some(Arc::new(d));
        self
    }

    pub fn with_fd(mut self, fd: Fd) -> Self {
        self.fd = fd;
        self
    }

    /// Drop analytic derivatives so that finite differences are used.
    pub fn without_partials(mut self) -> Self {
        self.partials = None;
        self
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fd(&self) -> Fd {
        self.fd
    }

    pub fn has_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_in, "field evaluated with wrong input length");
        (self.eval)(x)
    }

    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        self.eval(x)[0]
    }

    pub fn eval_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(self.eval(x))
    }

    /// Evaluate a rank-2 field as a matrix.
    pub fn eval_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let (r, c) = (self.shape[0], self.shape[1]);
        DMatrix::from_row_slice(r, c, &self.eval(x))
    }

    /// `∂f/∂x^k` as a flat array of the field's shape.
    pub fn partial(&self, x: &[f64], k: usize) -> Vec<f64> {
        match &self.partials {
            Some(d) => {
                let len = self.len();
                d(x)[k * len..(k + 1) * len].to_vec()
            }
            None => self.fd.partial(|p| (self.eval)(p), x, k),
        }
    }

    pub fn partial_matrix(&self, x: &[f64], k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.shape[0], self.shape[1], &self.partial(x, k))
    }

    /// All partials; entry `k` is `∂_k f`.
    pub fn partials(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match &self.partials {
            Some(d) => {
                let len = self.len();
                let all = d(x);
                (0..self.n_in).map(|k| all[k * len..(k + 1) * len].to_vec()).collect()
            }
            None => (0..self.n_in).map(|k| self.partial(x, k)).collect(),
        }
    }

    /// Directional derivative `Df(x)·w`.
    pub fn directional(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        match &self.partials {
            Some(d) => {
                let len = self.len();
                let all = d(x);
                let mut out = vec![0.0; len];
                for (k, wk) in w.iter().enumerate() {
                    if *wk != 0.0 {
                        for i in 0..len {
                            out[i] += wk * all[k * len + i];
                        }
                    }
                }
                out
            }
            None => self.fd.directional(|p| (self.eval)(p), x, w),
        }
    }

    /// `self ∘ inner`, where `inner` maps into the input space of `self`.
    pub fn compose(&self, inner: &Field) -> Field {
        assert_eq!(inner.shape, vec![self.n_in], "compose: inner field must map into the outer domain");
        let outer = self.clone();
        let inn = inner.clone();
        let mut out = Field::new(inner.n_in, &self.shape, move |x| outer.eval(&inn.eval(x))).with_fd(inner.fd);
        if self.has_partials() && inner.has_partials() {
            let outer = self.clone();
            let inn = inner.clone();
            out = out.with_partials(move |x| {
                let len = outer.len();
                let y = inn.eval(x);
                let douter = outer.partials(&y);
                let dinner = inn.partials(x);
                let mut d = vec![0.0; inn.n_in * len];
                for k in 0..inn.n_in {
                    for (j, dj) in douter.iter().enumerate() {
                        let c = dinner[k][j];
                        if c != 0.0 {
                            for i in 0..len {
                                d[k * len + i] += dj[i] * c;
                            }
                        }
                    }
                }
                d
            });
        }
        out
    }

    /// Extend a field on base coordinates to bundle coordinates `(x, y)` with `r` fibre slots.
    pub fn lift_to_bundle(&self, r: usize) -> Field {
        let base = self.clone();
        let m = self.n_in;
        let b2 = self.clone();
        Field::new(m + r, &self.shape, move |u| base.eval(&u[..m]))
            .with_fd(self.fd)
            .with_partials(move |u| {
                let len = b2.len();
                let mut d = vec![0.0; (m + r) * len];
                for (k, dk) in b2.partials(&u[..m]).into_iter().enumerate() {
                    d[k * len..(k + 1) * len].copy_from_slice(&dk);
                }
                d
            })
    }
}

/// Row-major flattening of a matrix.
pub fn matrix_to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}
