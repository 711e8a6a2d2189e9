//! Monotone operators on ℝⁿ: construction, evaluation, problem files and
//! sanity probes.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::primal_dual::SaddleStructure;
use crate::vector::{all_finite, check_dim, dot, VectorPoint};

/// Minimum eigenvalue of the symmetric part below which an affine map is
/// rejected as non-monotone.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A smooth convex functional with value and gradient.
pub trait ConvexObjective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    /// Quadratic data, when `f(x) = ½ xᵀQx + qᵀx`.
    fn as_quadratic(&self) -> Option<&Quadratic> {
        None
    }

    /// Whether the objective is twice continuously differentiable.
    fn is_c2(&self) -> bool {
        true
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }
}

/// `f(x) = ½ xᵀQx + qᵀx` with `Q` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl Quadratic {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        let n = hessian.nrows();
        check_dim(n, hessian.ncols())?;
        check_dim(n, linear.len())?;
        if !all_finite(hessian.as_slice()) || !all_finite(linear.as_slice()) {
            return Err(Error::NonFiniteInput("quadratic data"));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-12 * hessian.amax().max(1.0) {
            return Err(Error::InvalidArgument("quadratic Hessian must be symmetric".into()));
        }
        let min_eig = min_symmetric_eigenvalue(&hessian);
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::NotMonotone { min_eigenvalue: min_eig });
        }
        Ok(Self { hessian, linear })
    }

    /// `½‖x‖²`
    pub fn half_norm_squared(n: usize) -> Self {
        Self { hessian: DMatrix::identity(n, n), linear: DVector::zeros(n) }
    }
}

impl ConvexObjective for Quadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let row: f64 = x.iter().enumerate().map(|(j, xj)| self.hessian[(i, j)] * xj).sum();
            acc += x[i] * (0.5 * row + self.linear[i]);
        }
        acc
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        affine_apply(&self.hessian, self.linear.as_slice(), x, out);
    }

    fn as_quadratic(&self) -> Option<&Quadratic> {
        Some(self)
    }
}

/// `f(x) = Σ_{i<active} ln cosh(x_i − center_i)`: smooth, convex, not
/// strongly convex, with a gradient that is not affine. Coordinates at or
/// beyond `active` do not enter, so the zero set of ∇f is an affine subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCosh {
    pub center: Vec<f64>,
    pub active: usize,
}

impl ConvexObjective for LogCosh {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (0..self.active)
            .map(|i| {
                let u = (x[i] - self.center[i]).abs();
                // ln cosh u = u + ln(1 + e^{-2u}) − ln 2, stable for large u
                u + (-2.0 * u).exp().ln_1p() - std::f64::consts::LN_2
            })
            .sum()
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = if i < self.active { (x[i] - self.center[i]).tanh() } else { 0.0 };
        }
    }
}

/// `A(x) = Mx + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl AffineMap {
    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        affine_apply(&self.matrix, self.shift.as_slice(), x, out);
    }
}

#[inline]
fn affine_apply(m: &DMatrix<f64>, shift: &[f64], x: &[f64], out: &mut [f64]) {
    let n = shift.len();
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let mut acc = 0.0;
        for (j, xj) in x.iter().enumerate() {
            acc += m[(i, j)] * xj;
        }
        *o = acc + shift[i];
    }
}

pub type OpaqueFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// How an operator is represented. Affine data, when available, backs the
/// closed-form Tikhonov and minimal-norm oracles.
#[derive(Clone)]
pub enum Structure {
    Affine(Arc<AffineMap>),
    Gradient(Arc<dyn ConvexObjective>),
    Saddle(Arc<SaddleStructure>),
    Opaque(OpaqueFn),
}

impl fmt::Debug for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Affine(a) => f.debug_tuple("Affine").field(a).finish(),
            Structure::Gradient(g) => f.debug_tuple("Gradient").field(g).finish(),
            Structure::Saddle(s) => f.debug_tuple("Saddle").field(s).finish(),
            Structure::Opaque(_) => f.write_str("Opaque"),
        }
    }
}

/// A single-valued continuous monotone operator `A: ℝⁿ → ℝⁿ`. Immutable and
/// cheap to clone; safe to share across concurrent runs.
#[derive(Clone, Debug)]
pub struct MonotoneOperator {
    dim: usize,
    label: String,
    structure: Structure,
}

impl MonotoneOperator {
    /// `A(x) = M(x − a)`; rejects `M` whose symmetric part has an eigenvalue
    /// below `−1e−10`.
    pub fn affine(m: DMatrix<f64>, a: DVector<f64>) -> Result<Self> {
        let n = m.nrows();
        check_dim(n, m.ncols())?;
        check_dim(n, a.len())?;
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if !all_finite(m.as_slice()) || !all_finite(a.as_slice()) {
            return Err(Error::NonFiniteInput("affine operator data"));
        }
        let shift = -(&m * &a);
        Self::from_affine_map(m, shift)
    }

    /// `A(x) = Mx + shift`, monotonicity-checked.
    pub fn from_affine_map(m: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let n = m.nrows();
        check_dim(n, m.ncols())?;
        check_dim(n, shift.len())?;
        let sym = symmetric_part(&m);
        let min_eig = min_symmetric_eigenvalue(&sym);
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::NotMonotone { min_eigenvalue: min_eig });
        }
        Ok(Self { dim: n, label: "affine".into(), structure: Structure::Affine(Arc::new(AffineMap { matrix: m, shift })) })
    }

    pub fn gradient(objective: Arc<dyn ConvexObjective>) -> Self {
        Self { dim: objective.dim(), label: "gradient".into(), structure: Structure::Gradient(objective) }
    }

    pub fn saddle(structure: Arc<SaddleStructure>) -> Self {
        Self { dim: structure.dim(), label: "saddle".into(), structure: Structure::Saddle(structure) }
    }

    /// Wraps an arbitrary map. Monotonicity is the caller's responsibility
    /// (see [`monotonicity_probe`]).
    pub fn opaque<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { dim, label: "opaque".into(), structure: Structure::Opaque(Arc::new(f)) }
    }

    pub fn identity(n: usize) -> Self {
        Self::affine(DMatrix::identity(n, n), DVector::zeros(n)).expect("identity is monotone").with_label("identity")
    }

    /// The skew rotation `(x, y) ↦ (−y, x)`.
    pub fn rotation() -> Self {
        Self::affine(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), DVector::zeros(2))
            .expect("rotation is monotone")
            .with_label("rotation")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    /// Affine form `Mx + shift` when one is known (affine, quadratic
    /// gradient, or saddle of a quadratic program).
    pub fn affine_map(&self) -> Option<&AffineMap> {
        match &self.structure {
            Structure::Affine(a) => Some(a),
            Structure::Saddle(s) => s.affine(),
            _ => None,
        }
    }

    /// Affine form, building it for quadratic gradients.
    pub fn affine_form(&self) -> Option<AffineMap> {
        match &self.structure {
            Structure::Gradient(g) => g.as_quadratic().map(|q| AffineMap { matrix: q.hessian.clone(), shift: q.linear.clone() }),
            _ => self.affine_map().cloned(),
        }
    }

    pub fn is_gradient(&self) -> bool {
        matches!(self.structure, Structure::Gradient(_))
    }

    /// Unchecked evaluation into `out`; the integrator hot path.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match &self.structure {
            Structure::Affine(a) => a.apply(x, out),
            Structure::Gradient(g) => g.gradient_into(x, out),
            Structure::Saddle(s) => s.apply(x, out),
            Structure::Opaque(f) => f(x, out),
        }
    }

    /// Checked evaluation: dimension and finiteness of the result.
    pub fn eval(&self, x: &VectorPoint) -> Result<VectorPoint> {
        check_dim(self.dim, x.dim())?;
        let mut out = vec![0.0; self.dim];
        self.apply(x.as_slice(), &mut out);
        if !all_finite(&out) {
            return Err(Error::NonFiniteOutput { context: "operator evaluation" });
        }
        VectorPoint::new(out)
    }

    pub fn eval_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        self.apply(x, &mut out);
        if !all_finite(&out) {
            return Err(Error::NonFiniteOutput { context: "operator evaluation" });
        }
        Ok(out)
    }
}

/// `make_affine` under its conventional name.
pub fn make_affine(m: DMatrix<f64>, a: DVector<f64>) -> Result<MonotoneOperator> {
    MonotoneOperator::affine(m, a)
}

pub(crate) fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn min_symmetric_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    sym.clone().symmetric_eigen().eigenvalues.min()
}

/// Seeded generator of point pairs, uniform in the box `center ± radius`.
#[derive(Debug, Clone)]
pub struct PointSampler {
    pub seed: u64,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl PointSampler {
    pub fn new(seed: u64, dim: usize, radius: f64) -> Self {
        Self { seed, center: vec![0.0; dim], radius }
    }

    pub fn pairs(&self, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { self.center.iter().map(|c| c + self.radius * rng.gen_range(-1.0..=1.0)).collect() };
        (0..count)
            .map(|_| {
                let x = draw(&mut rng);
                let y = draw(&mut rng);
                (x, y)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub pairs: usize,
    pub min_inner_product: f64,
    pub witness: (Vec<f64>, Vec<f64>),
    pub pass: bool,
}

/// Samples `⟨A(x) − A(y), x − y⟩` over seeded pairs; passes iff the minimum
/// is at least `−tol`.
pub fn monotonicity_probe(op: &MonotoneOperator, sampler: &PointSampler, pairs: usize, tol: f64, exec: Execution) -> Result<ProbeReport> {
    if pairs == 0 {
        return Err(Error::InvalidArgument("pairs must be >= 1".into()));
    }
    check_dim(op.dim(), sampler.center.len())?;
    let samples = sampler.pairs(pairs);
    let values = exec::map(exec, &samples, |(x, y)| {
        let n = x.len();
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        op.apply(x, &mut ax);
        op.apply(y, &mut ay);
        let da: Vec<f64> = ax.iter().zip(&ay).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        dot(&da, &dx)
    });
    let (idx, min) =
        values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv || v.is_nan() && !bv.is_nan() { (i, v) } else { (bi, bv) });
    Ok(ProbeReport { pairs, min_inner_product: min, witness: samples[idx].clone(), pass: min >= -tol })
}

/// Central-difference Jacobian; diagnostic only.
pub fn fd_jacobian(op: &MonotoneOperator, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let n = op.dim();
    check_dim(n, x.len())?;
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        xp[j] = x[j] + h;
        op.apply(&xp, &mut fp);
        xp[j] = x[j] - h;
        op.apply(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    if !all_finite(jac.as_slice()) {
        return Err(Error::NonFiniteOutput { context: "finite-difference Jacobian" });
    }
    Ok(jac)
}

/// Max relative error between `∇f` and a central-difference gradient of `f`.
pub fn fd_gradient_error(f: &dyn ConvexObjective, x: &[f64], h: f64) -> f64 {
    let g = f.gradient(x);
    let mut xp = x.to_vec();
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f.value(&xp);
        xp[j] = x[j] - h;
        let fm = f.value(&xp);
        xp[j] = x[j];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[j]).abs() / scale);
    }
    worst
}

// ---------------------------------------------------------------------------
// Problem files

/// Known solution set `anchor + span(kernel_basis)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub anchor: Vec<f64>,
    #[serde(default)]
    pub kernel_basis: Vec<Vec<f64>>,
}

impl SolutionSet {
    /// Projection of the origin onto the set.
    pub fn min_norm_point(&self) -> Vec<f64> {
        let n = self.anchor.len();
        let anchor = DVector::from_column_slice(&self.anchor);
        if self.kernel_basis.is_empty() {
            return self.anchor.clone();
        }
        let k = self.kernel_basis.len();
        let basis = DMatrix::from_fn(n, k, |i, j| self.kernel_basis[j][i]);
        // least-squares coefficients of the anchor in span(basis)
        let svd = basis.clone().svd(true, true);
        let coef = svd.solve(&anchor, 1e-12).expect("svd solve");
        (anchor - basis * coef).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Affine,
    GradientQuadratic,
}

/// JSON problem file. Matrices are row-major arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub dim: usize,
    pub kind: ProblemKind,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q_mat: Option<Vec<Vec<f64>>>,
    #[serde(rename = "q", default, skip_serializing_if = "Option::is_none")]
    pub q_vec: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSet>,
}

fn dense(rows: &[Vec<f64>], dim: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::ProblemFile(format!("{name} must be {dim}x{dim}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if !all_finite(&flat) {
        return Err(Error::ProblemFile(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_row_slice(dim, dim, &flat))
}

fn vector(v: &[f64], dim: usize, name: &str) -> Result<DVector<f64>> {
    if v.len() != dim {
        return Err(Error::ProblemFile(format!("{name} must have length {dim}")));
    }
    if !all_finite(v) {
        return Err(Error::ProblemFile(format!("{name} has non-finite entries")));
    }
    Ok(DVector::from_column_slice(v))
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ProblemFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ProblemFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    /// Builds the operator and validates the optional solution set.
    pub fn build(&self) -> Result<(MonotoneOperator, Option<SolutionSet>)> {
        if self.dim == 0 {
            return Err(Error::ProblemFile("dim must be >= 1".into()));
        }
        let op = match self.kind {
            ProblemKind::Affine => {
                let m = dense(self.m.as_deref().ok_or_else(|| Error::ProblemFile("affine needs M".into()))?, self.dim, "M")?;
                let a = match &self.a {
                    Some(a) => vector(a, self.dim, "a")?,
                    None => DVector::zeros(self.dim),
                };
                MonotoneOperator::affine(m, a)?
            }
            ProblemKind::GradientQuadratic => {
                let q =
                    dense(self.q_mat.as_deref().ok_or_else(|| Error::ProblemFile("gradient_quadratic needs Q".into()))?, self.dim, "Q")?;
                let lin = match &self.q_vec {
                    Some(v) => vector(v, self.dim, "q")?,
                    None => DVector::zeros(self.dim),
                };
                MonotoneOperator::gradient(Arc::new(Quadratic::new(q, lin)?))
            }
        };
        if let Some(sol) = &self.solution {
            vector(&sol.anchor, self.dim, "solution.anchor")?;
            for (i, k) in sol.kernel_basis.iter().enumerate() {
                vector(k, self.dim, &format!("solution.kernel_basis[{i}]"))?;
            }
        }
        Ok((op, self.solution.clone()))
    }
}

// ---------------------------------------------------------------------------
// Built-in problems

#[derive(Debug, Clone)]
pub struct BuiltinProblem {
    pub name: &'static str,
    pub description: &'static str,
}

pub const BUILTIN_PROBLEMS: &[BuiltinProblem] = &[
    BuiltinProblem { name: "identity", description: "A(x) = x on R^2; unique zero at the origin" },
    BuiltinProblem { name: "rotation", description: "skew rotation (x, y) -> (-y, x); zero at the origin" },
    BuiltinProblem { name: "rankdef", description: "M = diag(1,1,0,0), a = (1,1,1,1); x* = (1,1,0,0)" },
    BuiltinProblem { name: "fullrank", description: "3x3 nonsymmetric positive-definite M, a = (1,-2,0.5); x* = a" },
    BuiltinProblem { name: "skew_shift", description: "rotation shifted to a = (1, 2); x* = a" },
    BuiltinProblem { name: "logcosh", description: "gradient of sum ln cosh(x_i - 1) over the first 2 of 4 coordinates" },
    BuiltinProblem { name: "qp_toy", description: "saddle operator of min 1/2|x|^2 s.t. x1 + x2 = 1" },
];

/// Looks up a built-in problem by name, with its known solution set.
pub fn builtin(name: &str) -> Result<(MonotoneOperator, Option<SolutionSet>)> {
    let diag = |d: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(d));
    Ok(match name {
        "identity" => (MonotoneOperator::identity(2), Some(SolutionSet { anchor: vec![0.0; 2], kernel_basis: vec![] })),
        "rotation" => (MonotoneOperator::rotation(), Some(SolutionSet { anchor: vec![0.0; 2], kernel_basis: vec![] })),
        "rankdef" => (
            MonotoneOperator::affine(diag(&[1.0, 1.0, 0.0, 0.0]), DVector::from_element(4, 1.0))?.with_label("rankdef"),
            Some(SolutionSet { anchor: vec![1.0; 4], kernel_basis: vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]] }),
        ),
        "fullrank" => {
            let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, -1.0, 1.5, 0.5, 0.0, -0.5, 1.0]);
            let a = vec![1.0, -2.0, 0.5];
            (
                MonotoneOperator::affine(m, DVector::from_column_slice(&a))?.with_label("fullrank"),
                Some(SolutionSet { anchor: a, kernel_basis: vec![] }),
            )
        }
        "skew_shift" => {
            let a = vec![1.0, 2.0];
            (
                MonotoneOperator::affine(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]), DVector::from_column_slice(&a))?
                    .with_label("skew_shift"),
                Some(SolutionSet { anchor: a, kernel_basis: vec![] }),
            )
        }
        "logcosh" => (
            MonotoneOperator::gradient(Arc::new(LogCosh { center: vec![1.0; 4], active: 2 })).with_label("logcosh"),
            Some(SolutionSet { anchor: vec![1.0; 4], kernel_basis: vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]] }),
        ),
        "qp_toy" => {
            let problem = crate::primal_dual::ConstrainedProblem::toy_qp();
            let op = crate::primal_dual::saddle_operator(&problem)?.with_label("qp_toy");
            let sp = crate::primal_dual::kkt_oracle(&problem)?;
            let mut anchor = sp.x_star.clone();
            anchor.extend(&sp.y_star);
            (op, Some(SolutionSet { anchor, kernel_basis: vec![] }))
        }
        other => return Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
    })
}


#[cfg(test)]
pub(crate) mod props {
    use super::*;
    use crate::exec::Execution;
    use proptest::prelude::*;

    /// `M = LLᵀ + K − Kᵀ` with `L` of rank at most `rank`.
    pub(crate) fn monotone_matrix(n: usize, rank: usize) -> impl Strategy<Value = DMatrix<f64>> {
        (prop::collection::vec(-2.0f64..2.0, n * rank), prop::collection::vec(-2.0f64..2.0, n * n)).prop_map(move |(l, k)| {
            let l = DMatrix::from_column_slice(n, rank, &l);
            let k = DMatrix::from_column_slice(n, n, &k);
            &l * l.transpose() + &k - k.transpose()
        })
    }

    proptest! {
        #[test]
        fn affine_monotone_operators_pass_the_probe(
            m in monotone_matrix(3, 2),
            a in prop::collection::vec(-3.0f64..3.0, 3),
            seed in any::<u64>(),
        ) {
            let op = MonotoneOperator::affine(m, DVector::from_column_slice(&a)).unwrap();
            let rep = monotonicity_probe(&op, &PointSampler::new(seed, 3, 5.0), 64, 1e-9, Execution::Sequential).unwrap();
            prop_assert!(rep.pass, "min {}", rep.min_inner_product);
        }

        #[test]
        fn solution_set_projection_is_orthogonal(
            anchor in prop::collection::vec(-5.0f64..5.0, 4),
            basis in prop::collection::vec(-1.0f64..1.0, 4),
        ) {
            prop_assume!(basis.iter().map(|b| b * b).sum::<f64>() > 1e-3);
            let s = SolutionSet { anchor, kernel_basis: vec![basis.clone()] };
            let p = s.min_norm_point();
            prop_assert!(dot(&p, &basis).abs() <= 1e-9 * (1.0 + crate::vector::norm(&p)));
        }
    }
}
