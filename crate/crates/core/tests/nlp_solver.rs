use gasflow::error::NlpError;
use gasflow::nlp::{
    check_derivatives, check_hessian, solve, NlpOptions, NlpProblem, NlpSolution, NlpStatus,
};

mod common;

use common::{rosenbrock_reference, BoundedLp, BoxQp, Rosenbrock};

fn opts() -> NlpOptions {
    NlpOptions::default()
}

#[test]
fn box_qp_multiplier() {
    let sol = solve(&BoxQp { scale: 1.0 }, &vec![3.0], &opts()).unwrap();
    assert_eq!(sol.status, NlpStatus::Optimal);
    assert!((sol.x[0] - 1.0).abs() < 1e-8);
    assert!((sol.lambda_lo[0] - 2.0).abs() < 1e-6);
    assert!(sol.kkt.max() <= 1e-8);
}

#[test]
fn bounded_lp_duals_follow_the_active_bound() {
    // Q below u₁: x₁ takes everything, x₂ at its lower bound
    let lp = BoundedLp {
        c: [5.0, 2.0],
        u: [10.0, 10.0],
        q: 6.0,
    };
    let sol = solve(&lp, &vec![1.0, 1.0], &opts()).unwrap();
    assert_eq!(sol.status, NlpStatus::Optimal);
    assert!((sol.x[0] - 6.0).abs() < 1e-6);
    assert!(sol.x[1].abs() < 1e-6);
    // ∇f + Jᵀλ − z_lo + z_hi = 0: −5 − λ = 0
    assert!((sol.lambda_eq[0] + 5.0).abs() < 1e-6);
    assert!((sol.lambda_lo[1] - 3.0).abs() < 1e-6);

    // Q above u₁: x₁ = u₁, the marginal unit comes from x₂
    let lp = BoundedLp {
        c: [5.0, 2.0],
        u: [4.0, 10.0],
        q: 6.0,
    };
    let sol = solve(&lp, &vec![1.0, 1.0], &opts()).unwrap();
    assert_eq!(sol.status, NlpStatus::Optimal);
    assert!((sol.x[0] - 4.0).abs() < 1e-6);
    assert!((sol.x[1] - 2.0).abs() < 1e-6);
    assert!((sol.lambda_eq[0] + 2.0).abs() < 1e-6);
    assert!((sol.lambda_hi[0] - 3.0).abs() < 1e-6);
    assert!(sol.kkt.max() <= 1e-8);
}

#[test]
fn constrained_rosenbrock_matches_reference() {
    let (a, b, lambda) = rosenbrock_reference();
    for exact in [true, false] {
        let sol = solve(
            &Rosenbrock {
                exact_hessian: exact,
            },
            &vec![0.2, 0.3],
            &opts(),
        )
        .unwrap();
        assert_eq!(sol.status, NlpStatus::Optimal, "exact={exact}");
        assert!((sol.x[0] - a).abs() < 1e-7, "{:?} vs {a}", sol.x);
        assert!((sol.x[1] - b).abs() < 1e-7);
        assert!((sol.lambda_eq[0] - lambda).abs() < 1e-5);
    }
}

#[test]
fn objective_scaling_scales_multipliers() {
    let base = solve(&BoxQp { scale: 1.0 }, &vec![3.0], &opts()).unwrap();
    let scaled = solve(&BoxQp { scale: 7.5 }, &vec![3.0], &opts()).unwrap();
    assert!((base.x[0] - scaled.x[0]).abs() < 1e-7);
    assert!((scaled.lambda_lo[0] - 7.5 * base.lambda_lo[0]).abs() < 1e-5);

    let lp = |s: f64| BoundedLp {
        c: [5.0 * s, 2.0 * s],
        u: [4.0, 10.0],
        q: 6.0,
    };
    let a = solve(&lp(1.0), &vec![1.0, 1.0], &opts()).unwrap();
    let b = solve(&lp(3.0), &vec![1.0, 1.0], &opts()).unwrap();
    assert!((b.lambda_eq[0] - 3.0 * a.lambda_eq[0]).abs() < 1e-5);
    assert!((b.lambda_hi[0] - 3.0 * a.lambda_hi[0]).abs() < 1e-5);
}

#[test]
fn warm_start_converges_quickly() {
    let problem = Rosenbrock {
        exact_hessian: true,
    };
    let first = solve(&problem, &vec![-1.2, 1.0], &opts()).unwrap();
    let again = solve(&problem, &first, &opts()).unwrap();
    assert_eq!(again.status, NlpStatus::Optimal);
    assert!(again.iterations <= 3, "{} iterations", again.iterations);

    let lp = BoundedLp {
        c: [5.0, 2.0],
        u: [4.0, 10.0],
        q: 6.0,
    };
    let first = solve(&lp, &vec![1.0, 1.0], &opts()).unwrap();
    let again: NlpSolution = solve(&lp, &first, &opts()).unwrap();
    assert_eq!(again.status, NlpStatus::Optimal);
    assert!(again.iterations <= 3, "{} iterations", again.iterations);
}

#[test]
fn dual_signs_are_nonnegative() {
    let lp = BoundedLp {
        c: [5.0, 2.0],
        u: [4.0, 10.0],
        q: 6.0,
    };
    let sol = solve(&lp, &vec![1.0, 1.0], &opts()).unwrap();
    assert!(sol
        .lambda_lo
        .iter()
        .chain(&sol.lambda_hi)
        .all(|z| *z >= -1e-9));
}

#[test]
fn max_iterations_is_reported() {
    let options = NlpOptions {
        max_iter: 2,
        ..NlpOptions::default()
    };
    let sol = solve(
        &Rosenbrock {
            exact_hessian: true,
        },
        &vec![-1.2, 1.0],
        &options,
    )
    .unwrap();
    assert_eq!(sol.status, NlpStatus::MaxIter);
}

struct InfeasibleBox;

impl NlpProblem for InfeasibleBox {
    fn num_variables(&self) -> usize {
        1
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0], vec![1.0])
    }
    fn objective(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn gradient(&self, _x: &[f64], g: &mut [f64]) {
        g[0] = 1.0;
    }
    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        c[0] = x[0] * x[0] - 4.0;
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        vec![(0, 0)]
    }
    fn jacobian_values(&self, x: &[f64], v: &mut [f64]) {
        v[0] = 2.0 * x[0];
    }
    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        Some(vec![(0, 0)])
    }
    fn hessian_values(&self, _x: &[f64], _of: f64, l: &[f64], v: &mut [f64]) {
        v[0] = 2.0 * l[0];
    }
}

#[test]
fn infeasible_problem_is_not_reported_optimal() {
    let options = NlpOptions {
        max_iter: 200,
        ..NlpOptions::default()
    };
    let sol = solve(&InfeasibleBox, &vec![0.5], &options).unwrap();
    assert_ne!(sol.status, NlpStatus::Optimal);
    assert!(sol.kkt.feasibility > 1.0);
}

struct NanConstraint;

impl NlpProblem for NanConstraint {
    fn num_variables(&self) -> usize {
        1
    }
    fn num_constraints(&self) -> usize {
        2
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0], vec![10.0])
    }
    fn objective(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn gradient(&self, _x: &[f64], g: &mut [f64]) {
        g[0] = 1.0;
    }
    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        c[0] = x[0] - 1.0;
        c[1] = f64::NAN;
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        vec![(0, 0)]
    }
    fn jacobian_values(&self, _x: &[f64], v: &mut [f64]) {
        v[0] = 1.0;
    }
}

#[test]
fn nan_evaluation_names_the_constraint() {
    let err = solve(&NanConstraint, &vec![1.0], &opts()).unwrap_err();
    assert_eq!(
        err,
        NlpError::Evaluation {
            what: "constraint",
            index: 1
        }
    );
}

#[test]
fn derivative_checks_on_analytic_problems() {
    let r = Rosenbrock {
        exact_hessian: true,
    };
    assert!(check_derivatives(&r, &[0.3, -0.7]) <= 1e-5);
    assert!(check_hessian(&r, &[0.3, -0.7], 1.0, &[2.0]).unwrap() <= 1e-5);
    // linear problem at a point where x ± h and the sums are exact
    let lp = BoundedLp {
        c: [0.5, 0.25],
        u: [4.0, 10.0],
        q: 0.0,
    };
    assert!(check_derivatives(&lp, &[0.0, 0.0]) <= 1e-10);
}
