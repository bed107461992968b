//! Central finite differences.

/// Stencil order of the central difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdOrder {
    /// Two-point stencil, truncation O(h²).
    Second,
    /// Four-point stencil, truncation O(h⁴).
    Fourth,
}

/// Finite-difference configuration used wherever no analytic derivative is supplied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fd {
    pub step: f64,
    pub order: FdOrder,
}

impl Default for Fd {
    fn default() -> Self {
        Fd::fourth(1e-3)
    }
}

impl Fd {
    pub const fn central(step: f64) -> Self {
        Fd { step, order: FdOrder::Second }
    }

    pub const fn fourth(step: f64) -> Self {
        Fd { step, order: FdOrder::Fourth }
    }

    /// Derivative of `f` at `x` along the unit coordinate direction `k`.
    pub fn partial<F>(&self, f: F, x: &[f64], k: usize) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut w = vec![0.0; x.len()];
        w[k] = 1.0;
        self.stencil(&f, x, &w, self.step)
    }

    /// Directional derivative `Df(x)·w`.
    pub fn directional<F>(&self, f: F, x: &[f64], w: &[f64]) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            let n = f(x).len();
            return vec![0.0; n];
        }
        let unit: Vec<f64> = w.iter().map(|v| v / norm).collect();
        let mut d = self.stencil(&f, x, &unit, self.step);
        d.iter_mut().for_each(|v| *v *= norm);
        d
    }

    /// Derivative of a scalar function of one variable.
    pub fn scalar<F>(&self, f: F, t: f64) -> f64
    where
        F: Fn(f64) -> f64,
    {
        let h = self.step;
        match self.order {
            FdOrder::Second => (f(t + h) - f(t - h)) / (2.0 * h),
            FdOrder::Fourth => {
                (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
            }
        }
    }

    fn stencil<F>(&self, f: &F, x: &[f64], w: &[f64], h: f64) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let shifted = |s: f64| -> Vec<f64> {
            let p: Vec<f64> = x.iter().zip(w).map(|(a, b)| a + s * b).collect();
            f(&p)
        };
        match self.order {
            FdOrder::Second => {
                let fp = shifted(h);
                let fm = shifted(-h);
                fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
            }
            FdOrder::Fourth => {
                let f2 = shifted(2.0 * h);
                let f1 = shifted(h);
                let m1 = shifted(-h);
                let m2 = shifted(-2.0 * h);
                (0..f1.len())
                    .map(|i| (-f2[i] + 8.0 * f1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h))
                    .collect()
            }
        }
    }
}
