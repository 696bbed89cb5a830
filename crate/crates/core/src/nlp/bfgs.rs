//! Damped BFGS approximation of the Lagrangian Hessian, used when a problem
//! does not supply second derivatives.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct DampedBfgs {
    b: DMatrix<f64>,
    initialized: bool,
}

impl DampedBfgs {
    pub fn new(n: usize) -> Self {
        Self {
            b: DMatrix::identity(n, n),
            initialized: false,
        }
    }

    /// Dense lower-triangle pattern `(r, c)` with `r >= c`, row-major.
    pub fn structure(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|r| (0..=r).map(move |c| (r, c))).collect()
    }

    pub fn values(&self, out: &mut [f64]) {
        let n = self.b.nrows();
        let mut k = 0;
        for r in 0..n {
            for c in 0..=r {
                out[k] = self.b[(r, c)];
                k += 1;
            }
        }
    }

    /// Powell-damped update with step `s` and gradient change `y`.
    pub fn update(&mut self, s: &[f64], y: &[f64]) {
        let s = DVector::from_column_slice(s);
        let mut y = DVector::from_column_slice(y);
        let ss = s.dot(&s);
        if ss <= 1e-300 {
            return;
        }
        if !self.initialized {
            let sy = s.dot(&y);
            let yy = y.dot(&y);
            if sy > 0.0 && yy > 0.0 {
                self.b *= yy / sy;
            }
            self.initialized = true;
        }
        let bs = &self.b * &s;
        let sbs = s.dot(&bs);
        let sy = s.dot(&y);
        if sbs <= 0.0 {
            return;
        }
        if sy < 0.2 * sbs {
            let theta = 0.8 * sbs / (sbs - sy);
            y = &y * theta + &bs * (1.0 - theta);
        }
        let sy = s.dot(&y);
        self.b -= &bs * bs.transpose() / sbs;
        self.b += &y * y.transpose() / sy;
    }
}
