//! Linearly constrained convex programs `min f(x) s.t. Bx = b`, run as the
//! regularized flow on the saddle operator `A(x, y) = (∇f(x) + Bᵀy, b − Bx)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{integrate, FlowParams, InitialConditions, IntegratorConfig, Trajectory};
use crate::error::{Error, Result};
use crate::operators::{fd_gradient_error, AffineMap, ConvexObjective, MonotoneOperator, Quadratic};
use crate::vector::{all_finite, check_dim, dist, norm};

#[derive(Debug, Clone)]
pub struct ConstrainedProblem {
    pub objective: Arc<dyn ConvexObjective>,
    pub b_mat: DMatrix<f64>,
    pub b_rhs: DVector<f64>,
}

impl ConstrainedProblem {
    pub fn new(objective: Arc<dyn ConvexObjective>, b_mat: DMatrix<f64>, b_rhs: DVector<f64>) -> Result<Self> {
        check_dim(objective.dim(), b_mat.ncols())?;
        check_dim(b_mat.nrows(), b_rhs.len())?;
        if !all_finite(b_mat.as_slice()) || !all_finite(b_rhs.as_slice()) {
            return Err(Error::NonFiniteInput("constraint data"));
        }
        let n = objective.dim();
        for probe in [vec![0.0; n], (0..n).map(|i| 0.5 + 0.25 * i as f64).collect()] {
            let err = fd_gradient_error(objective.as_ref(), &probe, 1e-6);
            if err > 1e-5 {
                return Err(Error::InvalidArgument(format!(
                    "objective gradient disagrees with finite differences (relative error {err:e})"
                )));
            }
        }
        if !objective.is_c2() {
            log::warn!("objective is not C2; convergence guarantees do not apply");
        }
        Ok(Self { objective, b_mat, b_rhs })
    }

    /// `min ½‖x‖² s.t. x₁ + x₂ = 1`.
    pub fn toy_qp() -> Self {
        Self::new(Arc::new(Quadratic::half_norm_squared(2)), DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0))
            .expect("toy problem is valid")
    }

    pub fn primal_dim(&self) -> usize {
        self.b_mat.ncols()
    }

    pub fn dual_dim(&self) -> usize {
        self.b_mat.nrows()
    }

    pub fn quadratic(&self) -> Option<&Quadratic> {
        self.objective.as_quadratic()
    }
}

/// Evaluation data for the saddle operator. For quadratic `f` the operator is
/// affine, `[[Q, Bᵀ], [−B, 0]] (x, y) + (q, b)`, and evaluation goes through
/// that matrix.
#[derive(Debug)]
pub struct SaddleStructure {
    pub problem: ConstrainedProblem,
    affine: Option<AffineMap>,
}

impl SaddleStructure {
    pub fn new(problem: ConstrainedProblem) -> Self {
        let affine = problem.quadratic().map(|quad| {
            let (n, m) = (problem.primal_dim(), problem.dual_dim());
            let mut matrix = DMatrix::zeros(n + m, n + m);
            matrix.view_mut((0, 0), (n, n)).copy_from(&quad.hessian);
            matrix.view_mut((0, n), (n, m)).copy_from(&problem.b_mat.transpose());
            matrix.view_mut((n, 0), (m, n)).copy_from(&(-&problem.b_mat));
            let mut shift = DVector::zeros(n + m);
            shift.rows_mut(0, n).copy_from(&quad.linear);
            shift.rows_mut(n, m).copy_from(&problem.b_rhs);
            AffineMap { matrix, shift }
        });
        Self { problem, affine }
    }

    pub fn dim(&self) -> usize {
        self.problem.primal_dim() + self.problem.dual_dim()
    }

    pub fn affine(&self) -> Option<&AffineMap> {
        self.affine.as_ref()
    }

    pub fn apply(&self, xy: &[f64], out: &mut [f64]) {
        if let Some(a) = &self.affine {
            a.apply(xy, out);
            return;
        }
        let (n, m) = (self.problem.primal_dim(), self.problem.dual_dim());
        let (x, y) = xy.split_at(n);
        let (gx, gy) = out.split_at_mut(n);
        self.problem.objective.gradient_into(x, gx);
        let bm = &self.problem.b_mat;
        for (j, g) in gx.iter_mut().enumerate() {
            for (i, yi) in y.iter().enumerate() {
                *g += bm[(i, j)] * yi;
            }
        }
        for (i, g) in gy.iter_mut().enumerate().take(m) {
            let mut bx = 0.0;
            for (j, xj) in x.iter().enumerate() {
                bx += bm[(i, j)] * xj;
            }
            *g = self.problem.b_rhs[i] - bx;
        }
    }
}

pub fn saddle_operator(problem: &ConstrainedProblem) -> Result<MonotoneOperator> {
    check_dim(problem.primal_dim(), problem.objective.dim())?;
    check_dim(problem.dual_dim(), problem.b_rhs.len())?;
    Ok(MonotoneOperator::saddle(Arc::new(SaddleStructure::new(problem.clone()))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddlePoint {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub kkt_residual: f64,
}

/// Least-norm solution of the KKT system of a quadratic program, i.e. the
/// minimal-norm zero of the saddle operator.
pub fn kkt_oracle(problem: &ConstrainedProblem) -> Result<SaddlePoint> {
    let structure = SaddleStructure::new(problem.clone());
    let aff = structure.affine().ok_or_else(|| Error::InvalidArgument("KKT oracle requires a quadratic objective".into()))?;
    let n = problem.primal_dim();
    let svd = aff.matrix.clone().svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(1.0);
    let z = svd.solve(&(-&aff.shift), cutoff).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let z: Vec<f64> = z.iter().copied().collect();
    let mut out = vec![0.0; z.len()];
    aff.apply(&z, &mut out);
    let scale = aff.shift.norm().max(1.0);
    let feas = norm(&out[n..]);
    if feas > 1e-9 * scale {
        return Err(Error::Infeasible { residual: feas });
    }
    let kkt_residual = norm(&out);
    if kkt_residual > 1e-9 * scale {
        return Err(Error::Infeasible { residual: kkt_residual });
    }
    Ok(SaddlePoint { x_star: z[..n].to_vec(), y_star: z[n..].to_vec(), kkt_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdMetric {
    pub t: f64,
    /// `‖Bx − b‖`
    pub feasibility: f64,
    /// `‖∇f(x) + Bᵀy‖`
    pub dual_residual: f64,
    /// `f(x) − f(x*)`, signed
    pub gap: f64,
    /// `‖(x, y) − (x*, y*)‖`
    pub dist_saddle: f64,
    /// `‖x − x*‖`
    pub dist_primal: f64,
    pub norm_y: f64,
}

#[derive(Debug, Clone)]
pub struct PdRun {
    pub trajectory: Trajectory,
    pub metrics: Vec<PdMetric>,
    pub saddle: Option<SaddlePoint>,
}

impl PdRun {
    /// CSV with columns `t,feasibility,dual_residual,gap,dist_saddle`; the gap
    /// column holds `|f(x) − f(x*)|`.
    pub fn to_csv(&self) -> String {
        metrics_csv(&self.metrics)
    }
}

pub fn metrics_csv(metrics: &[PdMetric]) -> String {
    let mut out = String::from("t,feasibility,dual_residual,gap,dist_saddle\n");
    for m in metrics {
        out.push_str(&crate::csv_row(&[m.t, m.feasibility, m.dual_residual, m.gap.abs(), m.dist_saddle]));
    }
    out
}

/// Per-sample metrics of a joint `(x, y)` trajectory.
pub fn pd_metrics(problem: &ConstrainedProblem, traj: &Trajectory, saddle: Option<&SaddlePoint>) -> Vec<PdMetric> {
    let n = problem.primal_dim();
    let f_star = saddle.map(|s| problem.objective.value(&s.x_star));
    traj.samples
        .iter()
        .map(|s| {
            let (x, y) = s.x.split_at(n);
            let (dual, primal) = s.ax.split_at(n);
            let (gap, dist_saddle, dist_primal) = match (saddle, f_star) {
                (Some(sp), Some(fs)) => {
                    let mut star = sp.x_star.clone();
                    star.extend(&sp.y_star);
                    (problem.objective.value(x) - fs, dist(&s.x, &star), dist(x, &sp.x_star))
                }
                _ => (f64::NAN, f64::NAN, f64::NAN),
            };
            PdMetric { t: s.t, feasibility: norm(primal), dual_residual: norm(dual), gap, dist_saddle, dist_primal, norm_y: norm(y) }
        })
        .collect()
}

/// Integrates the flow on the saddle operator and attaches the metrics. The
/// KKT oracle is used when the objective is quadratic.
pub fn solve_pd(
    problem: &ConstrainedProblem,
    params: &FlowParams,
    init: &InitialConditions,
    schedule: &[f64],
    config: &IntegratorConfig,
) -> Result<PdRun> {
    let op = saddle_operator(problem)?;
    let trajectory = integrate(&op, params, init, schedule, config)?;
    let saddle = if problem.quadratic().is_some() { Some(kkt_oracle(problem)?) } else { None };
    let metrics = pd_metrics(problem, &trajectory, saddle.as_ref());
    Ok(PdRun { trajectory, metrics, saddle })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub window: (f64, f64),
    pub samples: usize,
    /// `sup ‖x(t) − x*‖` over the window
    pub m1: f64,
    /// `sup ‖y(t)‖` over the window
    pub m2: f64,
    pub upper_violations: usize,
    pub lower_violations: usize,
    pub worst_upper_margin: f64,
    pub pass: bool,
}

/// Checks `f(x) − f* ≤ M₁‖∇f + Bᵀy‖ + M₂‖Bx − b‖` and
/// `f(x) − f* ≥ −‖y*‖ ‖Bx − b‖` at every sample in the window.
pub fn gap_bound_check(metrics: &[PdMetric], saddle: &SaddlePoint, window: (f64, f64)) -> GapReport {
    let inside: Vec<&PdMetric> = metrics.iter().filter(|m| m.t >= window.0 && m.t <= window.1).collect();
    let m1 = inside.iter().map(|m| m.dist_primal).fold(0.0, f64::max);
    let m2 = inside.iter().map(|m| m.norm_y).fold(0.0, f64::max);
    let y_star = norm(&saddle.y_star);
    let slack = |v: f64| 1e-12 * (1.0 + v.abs());
    let mut upper_violations = 0;
    let mut lower_violations = 0;
    let mut worst = f64::INFINITY;
    for m in &inside {
        let upper = m1 * m.dual_residual + m2 * m.feasibility;
        worst = worst.min(upper - m.gap);
        if m.gap > upper + slack(upper) {
            upper_violations += 1;
        }
        let lower = -y_star * m.feasibility;
        if m.gap < lower - slack(lower) {
            lower_violations += 1;
        }
    }
    GapReport {
        window,
        samples: inside.len(),
        m1,
        m2,
        upper_violations,
        lower_violations,
        worst_upper_margin: if inside.is_empty() { f64::NAN } else { worst },
        pass: !inside.is_empty() && upper_violations == 0 && lower_violations == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{log_schedule, Tolerances};
    use crate::exec::Execution;
    use crate::operators::{monotonicity_probe, PointSampler};
    use approx::assert_abs_diff_eq;

    #[test]
    fn toy_saddle_evaluation() {
        let op = saddle_operator(&ConstrainedProblem::toy_qp()).unwrap();
        assert_eq!(op.eval_slice(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        let out = op.eval_slice(&[0.5, 0.5, -0.5]).unwrap();
        assert!(norm(&out) < 1e-15);
        assert!(op.affine_map().is_some());
    }

    #[test]
    fn toy_kkt() {
        let sp = kkt_oracle(&ConstrainedProblem::toy_qp()).unwrap();
        assert_abs_diff_eq!(sp.x_star[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.x_star[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.y_star[0], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_constraint_gives_zero_pair() {
        let p = ConstrainedProblem::new(Arc::new(Quadratic::half_norm_squared(2)), DMatrix::zeros(1, 2), DVector::zeros(1)).unwrap();
        let sp = kkt_oracle(&p).unwrap();
        assert!(norm(&sp.x_star) < 1e-15 && norm(&sp.y_star) < 1e-15);
    }

    #[test]
    fn singular_hessian_kkt() {
        let q = Quadratic::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), DVector::zeros(2)).unwrap();
        let p = ConstrainedProblem::new(Arc::new(q), DMatrix::from_row_slice(1, 2, &[0.0, 1.0]), DVector::from_element(1, 1.0)).unwrap();
        let sp = kkt_oracle(&p).unwrap();
        assert_abs_diff_eq!(sp.x_star[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.x_star[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sp.y_star[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn infeasible_constraints() {
        // x1 + x2 = 1 and x1 + x2 = 2
        let p = ConstrainedProblem::new(
            Arc::new(Quadratic::half_norm_squared(2)),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            DVector::from_column_slice(&[1.0, 2.0]),
        )
        .unwrap();
        assert!(matches!(kkt_oracle(&p), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let r = ConstrainedProblem::new(Arc::new(Quadratic::half_norm_squared(3)), DMatrix::zeros(1, 2), DVector::zeros(1));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn saddle_is_monotone() {
        let op = saddle_operator(&ConstrainedProblem::toy_qp()).unwrap();
        let rep = monotonicity_probe(&op, &PointSampler::new(3, 3, 10.0), 1000, 1e-10, Execution::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = ConstrainedProblem::toy_qp();
        let params = FlowParams { alpha: 2.0, q: 0.75, s: 1.0 / 6.0, beta: 0.5, gamma: 1.0, c: 0.0, t0: 1.0 };
        let init = InitialConditions::at_rest(vec![0.5, 0.5, -0.5]).unwrap();
        let run = solve_pd(&p, &params, &init, &log_schedule(1.0, 100.0, 5), &IntegratorConfig::default()).unwrap();
        assert!(run.metrics.iter().all(|m| m.dist_saddle < 1e-12));
    }

    #[test]
    fn matches_manually_assembled_operator() {
        let p = ConstrainedProblem::toy_qp();
        let params = FlowParams { alpha: 2.0, q: 0.75, s: 1.0 / 6.0, beta: 0.5, gamma: 1.0, c: 0.25, t0: 1.0 };
        let init = InitialConditions::at_rest(vec![1.0, -1.0, 2.0]).unwrap();
        let sched = log_schedule(1.0, 100.0, 10);
        let cfg = IntegratorConfig::with_tolerances(Tolerances::default());
        let run = solve_pd(&p, &params, &init, &sched, &cfg).unwrap();
        let manual = MonotoneOperator::from_affine_map(
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, -1.0, -1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 0.0, 1.0]),
        )
        .unwrap();
        let direct = integrate(&manual, &params, &init, &sched, &cfg).unwrap();
        for (a, b) in run.trajectory.samples.iter().zip(&direct.samples) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.z, b.z);
        }
    }

    #[test]
    fn gap_bound_at_saddle_is_trivial() {
        let sp = kkt_oracle(&ConstrainedProblem::toy_qp()).unwrap();
        let m = PdMetric { t: 1.0, feasibility: 0.0, dual_residual: 0.0, gap: 0.0, dist_saddle: 0.0, dist_primal: 0.0, norm_y: 0.5 };
        let rep = gap_bound_check(&[m], &sp, (0.5, 2.0));
        assert!(rep.pass);
        assert!(!gap_bound_check(&[m], &sp, (3.0, 4.0)).pass);
        assert!(metrics_csv(&[m]).starts_with("t,feasibility,dual_residual,gap,dist_saddle\n"));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::operators::Quadratic;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn saddle_operator_matches_manual_assembly(
            l in prop::collection::vec(-2.0f64..2.0, 9),
            lin in prop::collection::vec(-2.0f64..2.0, 3),
            b in prop::collection::vec(-2.0f64..2.0, 3),
            rhs in -2.0f64..2.0,
            xy in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            let l = DMatrix::from_column_slice(3, 3, &l);
            let q = &l * l.transpose();
            let f = Quadratic::new(q.clone(), DVector::from_column_slice(&lin)).unwrap();
            let bm = DMatrix::from_row_slice(1, 3, &b);
            let problem = ConstrainedProblem::new(Arc::new(f), bm.clone(), DVector::from_element(1, rhs)).unwrap();
            let op = saddle_operator(&problem).unwrap();

            let mut m = DMatrix::zeros(4, 4);
            m.view_mut((0, 0), (3, 3)).copy_from(&q);
            m.view_mut((0, 3), (3, 1)).copy_from(&bm.transpose());
            m.view_mut((3, 0), (1, 3)).copy_from(&(-&bm));
            let mut shift = lin.clone();
            shift.push(rhs);
            let manual = MonotoneOperator::from_affine_map(m, DVector::from_vec(shift)).unwrap();

            let (mut u, mut v) = (vec![0.0; 4], vec![0.0; 4]);
            op.apply(&xy, &mut u);
            manual.apply(&xy, &mut v);
            prop_assert_eq!(u.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
