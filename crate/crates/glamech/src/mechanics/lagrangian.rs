//! Lagrangians, their jets, regularity and Finsler checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};
use crate::field::Field;

/// Smallest admissible `‖y‖` for functions that are not smooth on the null section.
pub const Y_MIN: f64 = 1e-6;

/// Default singular-value threshold for regularity.
pub const REGULARITY_TOL: f64 = 1e-10;

/// A real function on the bundle, with optional analytic gradient (whose own partials, if
/// present, give the Hessian).
#[derive(Clone, Debug)]
pub struct Lagrangian {
    m: usize,
    r: usize,
    value: Field,
    gradient: Option<Field>,
    smooth_at_zero: bool,
}

impl Lagrangian {
    pub fn new(m: usize, r: usize, value: Field) -> Self {
        assert_eq!(value.n_in(), m + r, "Lagrangian input must be bundle coordinates");
        assert_eq!(value.len(), 1, "Lagrangian must be scalar");
        Lagrangian { m, r, value, gradient: None, smooth_at_zero: true }
    }

    pub fn from_fn<F>(m: usize, r: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Lagrangian::new(m, r, Field::scalar(m + r, f))
    }

    /// Gradient field of shape `[m + r]`.
    pub fn with_gradient(mut self, gradient: Field) -> Self {
        assert_eq!(gradient.shape(), [self.m + self.r], "gradient must have m + r entries");
        self.gradient = Some(gradient);
        self
    }

    /// Mark the function as non-smooth on the null section (Finsler type).
    pub fn non_smooth_at_zero(mut self) -> Self {
        self.smooth_at_zero = false;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn value_field(&self) -> &Field {
        &self.value
    }
    pub fn smooth_at_zero(&self) -> bool {
        self.smooth_at_zero
    }
    pub fn has_analytic_jet(&self) -> bool {
        self.gradient.as_ref().is_some_and(|g| g.has_partials())
    }

    /// Same function with all analytic derivatives dropped.
    pub fn without_derivatives(&self) -> Self {
        Lagrangian {
            m: self.m,
            r: self.r,
            value: self.value.clone().without_partials(),
            gradient: None,
            smooth_at_zero: self.smooth_at_zero,
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        self.value.eval_scalar(u)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g.eval(u),
            None => self.value.partials(u).into_iter().map(|d| d[0]).collect(),
        }
    }

    fn hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.m + self.r;
        let cols: Vec<Vec<f64>> = match &self.gradient {
            Some(g) => g.partials(u),
            None => {
                let fd = self.value.fd();
                (0..n).map(|k| fd.partial(|q| self.gradient(q), u, k)).collect()
            }
        };
        DMatrix::from_fn(n, n, |i, k| cols[k][i])
    }
}

/// `(L, L_i, L_a, L_{ia}, L_{ab})` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub l: f64,
    pub l_x: DVector<f64>,
    pub l_y: DVector<f64>,
    /// `L_{ib}` as `[i][b]`.
    pub l_xy: DMatrix<f64>,
    pub l_yy: DMatrix<f64>,
}

fn check_null_section(l: &Lagrangian, u: &[f64]) -> Result<()> {
    if !l.smooth_at_zero {
        let ny = u[l.m..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny < Y_MIN {
            return Err(Error::InvalidArgument(format!(
                "function is not smooth on the null section; |y| = {ny:e} < {Y_MIN:e} at {u:?}"
            )));
        }
    }
    Ok(())
}

pub fn lagrangian_jet(l: &Lagrangian, u: &[f64]) -> Result<Jet> {
    let (m, r) = (l.m, l.r);
    check_null_section(l, u)?;
    let v = l.value(u);
    let g = l.gradient(u);
    let h = l.hessian(u);
    let l_yy = DMatrix::from_fn(r, r, |a, b| 0.5 * (h[(m + a, m + b)] + h[(m + b, m + a)]));
    let l_xy = DMatrix::from_fn(m, r, |i, b| 0.5 * (h[(i, m + b)] + h[(m + b, i)]));
    let jet = Jet {
        l: v,
        l_x: DVector::from_column_slice(&g[..m]),
        l_y: DVector::from_column_slice(&g[m..]),
        l_xy,
        l_yy,
    };
    ensure_finite("Lagrangian", u, &[jet.l])?;
    ensure_finite("Lagrangian gradient", u, &g)?;
    ensure_finite("Lagrangian Hessian", u, h.as_slice())?;
    Ok(jet)
}

fn singular_values(h: &DMatrix<f64>) -> Vec<f64> {
    h.clone().singular_values().iter().copied().collect()
}

/// True iff the smallest singular value of `L_{ab}` exceeds `tol`.
pub fn regularity(l: &Lagrangian, u: &[f64], tol: f64) -> bool {
    match lagrangian_jet(l, u) {
        Ok(j) => singular_values(&j.l_yy).iter().all(|s| *s > tol),
        Err(_) => false,
    }
}

pub(crate) fn invert_hessian(l_yy: &DMatrix<f64>, u: &[f64]) -> Result<DMatrix<f64>> {
    let sv = singular_values(l_yy);
    if sv.iter().any(|s| !(*s > REGULARITY_TOL)) {
        return Err(Error::Regularity { point: u.to_vec(), singular_values: sv });
    }
    l_yy.clone()
        .col_piv_qr()
        .try_inverse()
        .ok_or_else(|| Error::Regularity { point: u.to_vec(), singular_values: sv })
}

/// `‖L̃^{ab}‖ = ‖L_{ab}‖⁻¹`.
pub fn hessian_inverse(l: &Lagrangian, u: &[f64]) -> Result<DMatrix<f64>> {
    let j = lagrangian_jet(l, u)?;
    invert_hessian(&j.l_yy, u)
}

/// `E_L = y^a L_a − L`.
pub fn energy(l: &Lagrangian, u: &[f64]) -> Result<f64> {
    check_null_section(l, u)?;
    let y = &u[l.m..];
    let g = l.gradient(u);
    let e = y.iter().zip(&g[l.m..]).map(|(a, b)| a * b).sum::<f64>() - l.value(u);
    ensure_finite("energy", u, &[e])?;
    Ok(e)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinslerReport {
    /// Max of `|F(x, λy) − λF(x, y)|` over samples and scales.
    pub homogeneity_residual: f64,
    /// Smallest eigenvalue of the fibre Hessian of `F²` over samples.
    pub min_hessian_eigenvalue: f64,
    /// Smallest value of `F` over samples.
    pub min_value: f64,
    pub samples_used: usize,
}

impl FinslerReport {
    pub fn is_finsler(&self, tol: f64) -> bool {
        self.homogeneity_residual <= tol && self.min_hessian_eigenvalue > 0.0 && self.min_value > 0.0
    }
}

/// Homogeneity and convexity report for a candidate Finsler function. Samples with
/// `‖y‖ < Y_MIN` are skipped.
pub fn finsler_validate(f: &Lagrangian, samples: &[Vec<f64>]) -> FinslerReport {
    let (m, r) = (f.m, f.r);
    let f2 = {
        let v = f.value.clone();
        Lagrangian::new(m, r, Field::scalar(m + r, move |u| v.eval_scalar(u).powi(2)).with_fd(f.value.fd()))
    };
    let mut report = FinslerReport {
        homogeneity_residual: 0.0,
        min_hessian_eigenvalue: f64::INFINITY,
        min_value: f64::INFINITY,
        samples_used: 0,
    };
    for u in samples {
        let ny = u[m..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny < Y_MIN {
            continue;
        }
        report.samples_used += 1;
        let base = f.value(u);
        report.min_value = report.min_value.min(base);
        for lambda in [0.5, 2.0, 3.7] {
            let mut s = u.clone();
            s[m..].iter_mut().for_each(|v| *v *= lambda);
            report.homogeneity_residual = report.homogeneity_residual.max((f.value(&s) - lambda * base).abs());
        }
        let h = f2.hessian(u);
        let hyy = DMatrix::from_fn(r, r, |a, b| 0.5 * (h[(m + a, m + b)] + h[(m + b, m + a)]));
        let ev = hyy.symmetric_eigenvalues().min();
        report.min_hessian_eigenvalue = report.min_hessian_eigenvalue.min(ev);
    }
    report
}
