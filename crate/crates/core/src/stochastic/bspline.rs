//! Cubic B-spline bases on arbitrary (clamped) knot vectors.
//!
//! Evaluation uses the Cox–de Boor triangle restricted to the nonzero
//! functions of a knot span. Points outside the knot range are evaluated on
//! the first or last span, which extends the end polynomial pieces.

pub const DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// Cubic basis on the given non-decreasing knot vector. The first and
    /// last knots are expected to be repeated `DEGREE + 1` times.
    pub fn new(knots: Vec<f64>) -> Self {
        assert!(knots.len() >= 2 * (DEGREE + 1), "knot vector too short");
        debug_assert!(knots.windows(2).all(|w| w[0] <= w[1]));
        Self { knots }
    }

    /// Clamped uniform knot vector over `[lo, hi]` with `cells` spans.
    pub fn clamped_uniform(lo: f64, hi: f64, cells: usize) -> Self {
        assert!(cells >= 1);
        let mut knots = vec![lo; DEGREE + 1];
        let h = (hi - lo) / cells as f64;
        for k in 1..cells {
            knots.push(lo + k as f64 * h);
        }
        knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
        Self::new(knots)
    }

    /// Not-a-knot interpolation basis for the given strictly increasing data
    /// sites: the dimension equals the number of sites.
    pub fn not_a_knot(sites: &[f64]) -> Self {
        let n = sites.len();
        assert!(n > DEGREE, "not-a-knot needs at least 4 sites");
        let mut knots = vec![sites[0]; DEGREE + 1];
        knots.extend_from_slice(&sites[2..n - 2]);
        knots.extend(std::iter::repeat_n(sites[n - 1], DEGREE + 1));
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len() - DEGREE - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[DEGREE], self.knots[self.len()])
    }

    /// Greville abscissae: averages of `DEGREE` consecutive interior knots.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.knots[i + 1..=i + DEGREE].iter().sum::<f64>() / DEGREE as f64)
            .collect()
    }

    /// Index of the knot span used to evaluate at `x`.
    pub fn span(&self, x: f64) -> usize {
        let n = self.len();
        let (lo, hi) = self.domain();
        if x >= hi {
            // last non-empty span
            let mut s = n - 1;
            while s > DEGREE && self.knots[s] == self.knots[s + 1] {
                s -= 1;
            }
            return s;
        }
        if x <= lo {
            let mut s = DEGREE;
            while s < n - 1 && self.knots[s] == self.knots[s + 1] {
                s += 1;
            }
            return s;
        }
        // binary search for knots[s] <= x < knots[s+1]
        let (mut low, mut high) = (DEGREE, n);
        while high - low > 1 {
            let mid = (low + high) / 2;
            if x < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
        }
        low
    }

    /// Nonzero basis values at `x`: returns the index of the first nonzero
    /// function and the `DEGREE + 1` values.
    pub fn eval_nonzero(&self, x: f64) -> (usize, [f64; DEGREE + 1]) {
        let span = self.span(x);
        let t = &self.knots;
        let mut n = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (span - DEGREE, n)
    }

    /// All basis values at `x` (dense).
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let (first, vals) = self.eval_nonzero(x);
        out[first..first + DEGREE + 1].copy_from_slice(&vals);
        out
    }

    /// Evaluates the spline with the given coefficients.
    pub fn evaluate(&self, coefficients: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coefficients.len(), self.len());
        let (first, vals) = self.eval_nonzero(x);
        vals.iter()
            .zip(&coefficients[first..first + DEGREE + 1])
            .map(|(b, c)| b * c)
            .sum()
    }

    /// Dense collocation matrix `B[i][m] = b_m(points[i])`.
    pub fn collocation_matrix(&self, points: &[f64]) -> nalgebra::DMatrix<f64> {
        let mut mat = nalgebra::DMatrix::zeros(points.len(), self.len());
        for (i, &x) in points.iter().enumerate() {
            let (first, vals) = self.eval_nonzero(x);
            for (j, v) in vals.iter().enumerate() {
                mat[(i, first + j)] = *v;
            }
        }
        mat
    }
}
