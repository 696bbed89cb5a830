//! Stochastic finite volume discretization of a scalar uncertain withdrawal.
//!
//! The uncertainty interval `[lo, hi]` is mapped to the reference coordinate
//! `t ∈ [0, 1]` (value = lo + t·(hi − lo)). Cells, spline bases, quadrature
//! and the probability density are all expressed in `t`, which keeps the
//! construction translation invariant and lets a zero-width interval
//! (a point mass) reuse the same machinery.

pub mod bspline;

use nalgebra::DMatrix;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::GridError;
pub use bspline::BSplineBasis;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gauss–Legendre nodes and weights on [-1, 1], 8 points.
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Distribution of the random part r_j of a withdrawal (kg/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UncertaintySpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    TruncatedNormal {
        mean: f64,
        std: f64,
        lo: f64,
        hi: f64,
    },
}

impl UncertaintySpec {
    pub fn validate(&self) -> Result<(), GridError> {
        let (lo, hi) = self.support();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(GridError::NonFinite);
        }
        if hi <= lo {
            return Err(GridError::DegenerateInterval { lo, hi });
        }
        if let Self::TruncatedNormal { mean, std, .. } = *self {
            if !mean.is_finite() {
                return Err(GridError::NonFinite);
            }
            if !(std > 0.0 && std.is_finite()) {
                return Err(GridError::InvalidStd(std));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lo, hi } | Self::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    fn measure(&self) -> Measure {
        match *self {
            Self::Uniform { .. } => Measure::Uniform,
            Self::TruncatedNormal { mean, std, lo, hi } => {
                let w = hi - lo;
                Measure::truncated_normal((mean - lo) / w, std / w)
            }
        }
    }

    /// Analytic mean of the distribution.
    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.support();
        lo + (hi - lo) * self.measure().mean()
    }

    /// Inverse-CDF sample for `u ∈ [0, 1]`.
    pub fn sample_value(&self, u: f64) -> f64 {
        let (lo, hi) = self.support();
        (lo + (hi - lo) * self.measure().quantile(u)).clamp(lo, hi)
    }
}

/// Probability measure on the reference interval [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    Uniform,
    TruncatedNormal {
        mean: f64,
        std: f64,
        cdf_lo: f64,
        cdf_hi: f64,
    },
}

impl Measure {
    fn truncated_normal(mean: f64, std: f64) -> Self {
        Self::TruncatedNormal {
            mean,
            std,
            cdf_lo: normal_cdf(-mean / std),
            cdf_hi: normal_cdf((1.0 - mean) / std),
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match *self {
            Self::Uniform => 1.0,
            Self::TruncatedNormal {
                mean,
                std,
                cdf_lo,
                cdf_hi,
            } => normal_pdf((t - mean) / std) / (std * (cdf_hi - cdf_lo)),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match *self {
            Self::Uniform => t,
            Self::TruncatedNormal {
                mean,
                std,
                cdf_lo,
                cdf_hi,
            } => ((normal_cdf((t - mean) / std) - cdf_lo) / (cdf_hi - cdf_lo)).clamp(0.0, 1.0),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Self::Uniform => u,
            Self::TruncatedNormal {
                mean,
                std,
                cdf_lo,
                cdf_hi,
            } => {
                if u <= 0.0 {
                    return 0.0;
                }
                if u >= 1.0 {
                    return 1.0;
                }
                (mean + std * normal_quantile(cdf_lo + u * (cdf_hi - cdf_lo))).clamp(0.0, 1.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform => 0.5,
            Self::TruncatedNormal {
                mean,
                std,
                cdf_lo,
                cdf_hi,
            } => {
                let a = -mean / std;
                let b = (1.0 - mean) / std;
                mean + std * (normal_pdf(a) - normal_pdf(b)) / (cdf_hi - cdf_lo)
            }
        }
    }
}

/// Maps per-cell values to a cubic spline over the reference interval
/// (not-a-knot interpolation through the cell centers, polynomially
/// extended to the interval ends).
#[derive(Debug, Clone)]
pub struct CellInterpolant {
    basis: BSplineBasis,
    /// Inverse of the collocation matrix at the cell centers.
    inverse: DMatrix<f64>,
}

impl CellInterpolant {
    pub fn new(centers: &[f64]) -> Self {
        let basis = BSplineBasis::not_a_knot(centers);
        let colloc = basis.collocation_matrix(centers);
        let inverse = colloc
            .lu()
            .try_inverse()
            .expect("not-a-knot collocation is nonsingular for distinct sites");
        Self { basis, inverse }
    }

    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(values);
        (&self.inverse * v).as_slice().to_vec()
    }

    /// Linear weights w such that the interpolant at `t` equals Σ w_k v_k.
    pub fn weights_at(&self, t: f64) -> Vec<f64> {
        let (first, vals) = self.basis.eval_nonzero(t);
        let n = self.basis.len();
        (0..n)
            .map(|k| {
                vals.iter()
                    .enumerate()
                    .map(|(j, b)| b * self.inverse[(first + j, k)])
                    .sum()
            })
            .collect()
    }

    pub fn evaluate_coefficients(&self, coefficients: &[f64], t: f64) -> f64 {
        self.basis.evaluate(coefficients, t)
    }

    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        self.evaluate_coefficients(&self.coefficients(values), t)
    }
}

/// SFV discretization of one uncertain node.
#[derive(Debug, Clone)]
pub struct StochasticGrid {
    pub node_id: String,
    lo: f64,
    hi: f64,
    measure: Measure,
    cells: usize,
    /// Cell centers in reference coordinates.
    centers: Vec<f64>,
    cell_mass: Vec<f64>,
    basis: BSplineBasis,
    greville: Vec<f64>,
    basis_integrals: Vec<f64>,
    interpolant: CellInterpolant,
}

impl StochasticGrid {
    /// Builds `cells` uniform cells over the support of `spec`.
    pub fn build(node_id: &str, spec: &UncertaintySpec, cells: usize) -> Result<Self, GridError> {
        spec.validate()?;
        let (lo, hi) = spec.support();
        Self::from_parts(node_id, lo, hi, spec.measure(), cells)
    }

    /// Zero-width grid: every cell sits at `value` with equal mass.
    pub fn point_mass(node_id: &str, value: f64, cells: usize) -> Result<Self, GridError> {
        if !value.is_finite() {
            return Err(GridError::NonFinite);
        }
        Self::from_parts(node_id, value, value, Measure::Uniform, cells)
    }

    fn from_parts(
        node_id: &str,
        lo: f64,
        hi: f64,
        measure: Measure,
        cells: usize,
    ) -> Result<Self, GridError> {
        if cells < 4 {
            return Err(GridError::TooFewCells(cells));
        }
        let h = 1.0 / cells as f64;
        let centers: Vec<f64> = (0..cells).map(|k| (k as f64 + 0.5) * h).collect();
        let cell_mass = match measure {
            Measure::Uniform => vec![h; cells],
            _ => {
                let cdf: Vec<f64> = (0..=cells).map(|k| measure.cdf(k as f64 * h)).collect();
                cdf.windows(2).map(|w| w[1] - w[0]).collect()
            }
        };
        let basis = BSplineBasis::clamped_uniform(0.0, 1.0, cells);
        let greville = basis.greville();
        let basis_integrals = integrate_basis(&basis, &measure);
        let interpolant = CellInterpolant::new(&centers);
        Ok(Self {
            node_id: node_id.to_string(),
            lo,
            hi,
            measure,
            cells,
            centers,
            cell_mass,
            basis,
            greville,
            basis_integrals,
            interpolant,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn is_point_mass(&self) -> bool {
        self.hi == self.lo
    }

    /// Withdrawal perturbation r (kg/s) at reference coordinate `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        self.lo + t * (self.hi - self.lo)
    }

    /// Reference coordinate of a perturbation value.
    pub fn coordinate_of(&self, value: f64) -> f64 {
        if self.is_point_mass() {
            0.5
        } else {
            (value - self.lo) / (self.hi - self.lo)
        }
    }

    /// Cell boundaries as perturbation values (K + 1 points).
    pub fn knots(&self) -> Vec<f64> {
        (0..=self.cells)
            .map(|k| self.value_at(k as f64 / self.cells as f64))
            .collect()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Cell-center perturbation values r(ω_k) (kg/s).
    pub fn collocation_points(&self) -> Vec<f64> {
        self.centers.iter().map(|&t| self.value_at(t)).collect()
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    /// Greville abscissae of the penalty spline basis (reference coords).
    pub fn greville(&self) -> &[f64] {
        &self.greville
    }

    /// ∫ b_m dμ for every basis function.
    pub fn basis_integrals(&self) -> &[f64] {
        &self.basis_integrals
    }

    pub fn interpolant(&self) -> &CellInterpolant {
        &self.interpolant
    }

    /// Mean of the perturbation under the exact measure.
    pub fn mean_value(&self) -> f64 {
        self.value_at(self.measure.mean())
    }

    /// Inverse-CDF sample of the perturbation, returned with its reference
    /// coordinate.
    pub fn sample(&self, u: f64) -> (f64, f64) {
        let t = self.measure.quantile(u);
        (t, self.value_at(t))
    }

    /// Collocation matrix of the penalty basis at its Greville abscissae.
    pub fn greville_collocation(&self) -> DMatrix<f64> {
        self.basis.collocation_matrix(&self.greville)
    }

    /// Spline coefficients interpolating `values` given at the Greville
    /// abscissae.
    pub fn interpolate_greville(&self, values: &[f64]) -> Vec<f64> {
        let g = self.greville_collocation();
        let rhs = nalgebra::DVector::from_column_slice(values);
        g.lu()
            .solve(&rhs)
            .expect("Greville collocation is nonsingular")
            .as_slice()
            .to_vec()
    }
}

/// Gauss–Legendre quadrature of each basis function against the measure
/// density, one 8-point rule per knot interval.
fn integrate_basis(basis: &BSplineBasis, measure: &Measure) -> Vec<f64> {
    let mut integrals = vec![0.0; basis.len()];
    let knots = basis.knots();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let t = mid + half * node;
            let rho = measure.density(t);
            let (first, vals) = basis.eval_nonzero(t);
            for (j, v) in vals.iter().enumerate() {
                integrals[first + j] += half * weight * rho * v;
            }
        }
    }
    integrals
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tn(mean: f64, std: f64, lo: f64, hi: f64) -> UncertaintySpec {
        UncertaintySpec::TruncatedNormal { mean, std, lo, hi }
    }

    #[test]
    fn uniform_grid_masses() {
        let g = StochasticGrid::build(
            "N3",
            &UncertaintySpec::Uniform {
                lo: 200.0,
                hi: 300.0,
            },
            100,
        )
        .unwrap();
        assert_eq!(g.num_cells(), 100);
        assert!(g.cell_mass().iter().all(|m| (m - 0.01).abs() < 1e-15));
        let g = StochasticGrid::build("J5", &UncertaintySpec::Uniform { lo: 0.0, hi: 32.0 }, 50)
            .unwrap();
        assert!(g.cell_mass().iter().all(|m| (m - 0.02).abs() < 1e-15));
        assert_eq!(g.knots().len(), 51);
        assert_eq!(g.knots()[50], 32.0);
    }

    #[test]
    fn truncated_normal_masses_are_symmetric() {
        let g = StochasticGrid::build("N3", &tn(250.0, 50.0 / 3.0, 200.0, 300.0), 4).unwrap();
        let m = g.cell_mass();
        assert!((m[0] - m[3]).abs() < 1e-14);
        assert!((m[1] - m[2]).abs() < 1e-14);
        assert!(m[1] > m[0]);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let spec = UncertaintySpec::Uniform { lo: 0.0, hi: 1.0 };
        assert_eq!(
            StochasticGrid::build("x", &spec, 3).unwrap_err(),
            GridError::TooFewCells(3)
        );
        let spec = UncertaintySpec::Uniform { lo: 1.0, hi: 1.0 };
        assert!(matches!(
            StochasticGrid::build("x", &spec, 10),
            Err(GridError::DegenerateInterval { .. })
        ));
        assert!(matches!(
            StochasticGrid::build("x", &tn(0.0, 0.0, -1.0, 1.0), 10),
            Err(GridError::InvalidStd(_))
        ));
    }

    #[test]
    fn basis_integrals_sum_to_one() {
        for spec in [
            UncertaintySpec::Uniform {
                lo: 200.0,
                hi: 300.0,
            },
            tn(0.0, 50.0 / 3.0, -50.0, 50.0),
        ] {
            let g = StochasticGrid::build("n", &spec, 37).unwrap();
            let s: f64 = g.basis_integrals().iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "{s}");
            assert!(g.basis_integrals().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn edge_basis_function_has_smaller_integral_under_normal() {
        let g = StochasticGrid::build("n", &tn(0.0, 50.0 / 3.0, -50.0, 50.0), 20).unwrap();
        let i = g.basis_integrals();
        let mid = i.len() / 2;
        assert!(i[0] < i[mid]);
        assert!(i[i.len() - 1] < i[mid]);
    }

    #[test]
    fn sample_value_examples() {
        let u = UncertaintySpec::Uniform {
            lo: 200.0,
            hi: 300.0,
        };
        assert_eq!(u.sample_value(0.5), 250.0);
        let n = tn(0.0, 50.0 / 3.0, -50.0, 50.0);
        assert!(n.sample_value(0.5).abs() < 1e-9);
        let u2 = UncertaintySpec::Uniform { lo: 0.0, hi: 32.0 };
        assert_eq!(u2.sample_value(1.0), 32.0);
        assert_eq!(n.sample_value(0.0), -50.0);
        assert_eq!(n.sample_value(1.0), 50.0);
    }

    #[test]
    fn truncated_normal_mean_is_analytic() {
        // asymmetric truncation shifts the mean towards the wider side
        let n = tn(0.0, 1.0, -1.0, 2.0);
        let expected = (normal_pdf(-1.0) - normal_pdf(2.0)) / (normal_cdf(2.0) - normal_cdf(-1.0));
        assert!((n.mean() - expected).abs() < 1e-12);
    }

    #[test]
    fn point_mass_grid() {
        let g = StochasticGrid::point_mass("n", 16.0, 4).unwrap();
        assert!(g.is_point_mass());
        assert!(g.collocation_points().iter().all(|&v| v == 16.0));
        assert_eq!(g.mean_value(), 16.0);
        assert!((g.cell_mass().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cell_interpolant_reproduces_cubics() {
        let g =
            StochasticGrid::build("n", &UncertaintySpec::Uniform { lo: 0.0, hi: 1.0 }, 12).unwrap();
        let f = |t: f64| 2.0 - t + 3.0 * t * t - 4.0 * t * t * t;
        let values: Vec<f64> = g.centers().iter().map(|&t| f(t)).collect();
        for &t in g.greville() {
            let w = g.interpolant().weights_at(t);
            let v: f64 = w.iter().zip(&values).map(|(a, b)| a * b).sum();
            assert!((v - f(t)).abs() < 1e-12, "t={t}");
        }
    }
}
