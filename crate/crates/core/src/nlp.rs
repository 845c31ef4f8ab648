//! Local solver for constrained nonlinear programs over a subset of coordinates.
//!
//! Powell-Hestenes-Rockafellar augmented Lagrangian outer loop with a BFGS
//! inner minimizer. Coordinates outside the free set are never touched.
//! Derivatives come from the functions' analytic gradients when present and
//! central finite differences otherwise.

use crate::error::{Error, Result};
use crate::problem::{BoundsFn, Constraint, ConstraintKind, DecisionVector, Function, MultilevelProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Scaled first-order residual accepted as stationary.
    pub stationarity_tol: f64,
    /// Max constraint violation accepted as feasible.
    pub constraint_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty_growth: f64,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    pub fd_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            stationarity_tol: 1e-8,
            constraint_tol: 1e-8,
            max_outer: 50,
            max_inner: 200,
            penalty_growth: 10.0,
            initial_penalty: 10.0,
            max_penalty: 1e12,
            fd_step: 1e-6,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.stationarity_tol,
            self.constraint_tol,
            self.penalty_growth - 1.0,
            self.initial_penalty,
            self.fd_step,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Argument(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub point: DecisionVector,
    pub status: SolveStatus,
    /// Lagrangian gradient norm over the free set, divided by `max(1, |grad f|)`.
    pub stationarity: f64,
    pub max_violation: f64,
    /// Canonical (minimization) objective at `point`.
    pub objective: f64,
    pub outer_iterations: usize,
}

impl SolverResult {
    pub fn is_solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }
}

/// A nonlinear program over the `free` coordinates of a full-length point.
///
/// The objective is `sum(weight * f)` over `terms`; an empty list is the
/// zero objective.
#[derive(Clone)]
pub struct NlpSpec<'a> {
    pub terms: Vec<(f64, &'a Function)>,
    pub constraints: Vec<&'a Constraint>,
    pub free: Vec<usize>,
    pub bounds: Option<&'a BoundsFn>,
    pub multistart: bool,
}

impl<'a> NlpSpec<'a> {
    /// Level `level`'s canonical objective over its own block, subject to `C^level`.
    pub fn for_level(problem: &'a MultilevelProblem, level: usize) -> Result<Self> {
        let spec = problem.level(level)?;
        Ok(Self {
            terms: vec![(spec.sense.sign(), &spec.objective)],
            constraints: problem.level_constraints(level)?,
            free: spec.block.clone(),
            bounds: spec.bounds.as_ref(),
            multistart: spec.multistart,
        })
    }
}

/// Central-difference gradient of `f` over the `free` coordinates.
pub fn finite_diff_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], free: &[usize], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Argument(format!("finite-difference step must be > 0, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(free.len());
    for &i in free {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = f(&probe);
        probe[i] = orig - h;
        let fm = f(&probe);
        probe[i] = orig;
        let d = (fp - fm) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::Evaluation {
                level: None,
                what: format!("finite difference along coordinate {i}"),
                point: x.to_vec(),
            });
        }
        out.push(d);
    }
    Ok(out)
}

/// Solves `level`'s problem over its block from the warm start `x`.
pub fn solve_level(
    problem: &MultilevelProblem,
    level: usize,
    x: &DecisionVector,
    settings: &SolverSettings,
) -> Result<SolverResult> {
    let spec = NlpSpec::for_level(problem, level)?;
    solve_nlp(&spec, x, settings)
}

/// Solves the final level over its block from the warm start `x`.
pub fn solve_full(problem: &MultilevelProblem, x: &DecisionVector, settings: &SolverSettings) -> Result<SolverResult> {
    solve_level(problem, problem.num_levels(), x, settings)
}

pub fn solve_nlp(spec: &NlpSpec<'_>, x: &DecisionVector, settings: &SolverSettings) -> Result<SolverResult> {
    settings.validate()?;
    if spec.free.is_empty() {
        return Err(Error::Argument("free index set is empty".into()));
    }
    if let Some(&i) = spec.free.iter().find(|&&i| i >= x.len()) {
        return Err(Error::Argument(format!("free index {i} out of range")));
    }

    let mut starts = vec![x.as_slice().to_vec()];
    if spec.multistart {
        if let Some(bounds) = spec.bounds {
            starts.extend(corner_starts(x.as_slice(), &spec.free, &bounds(x.as_slice())));
        }
    }

    let mut best: Option<SolverResult> = None;
    for start in starts {
        let res = AugmentedLagrangian::new(spec, start, settings).run()?;
        best = Some(match best {
            None => res,
            Some(b) => {
                if better(&res, &b, settings.constraint_tol) {
                    res
                } else {
                    b
                }
            }
        });
    }
    Ok(best.expect("at least one start"))
}

fn better(a: &SolverResult, b: &SolverResult, ctol: f64) -> bool {
    let rank = |r: &SolverResult| match r.status {
        SolveStatus::Solved => 0,
        SolveStatus::IterationLimit if r.max_violation <= ctol => 1,
        _ => 2,
    };
    match rank(a).cmp(&rank(b)) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal if rank(a) == 2 => a.max_violation < b.max_violation,
        std::cmp::Ordering::Equal => a.objective < b.objective,
    }
}

const MAX_CORNER_DIMS: usize = 4;

fn corner_starts(x: &[f64], free: &[usize], bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    if bounds.len() != free.len() || free.len() > MAX_CORNER_DIMS {
        return Vec::new();
    }
    let mut out = Vec::new();
    for mask in 0..(1usize << free.len()) {
        let mut p = x.to_vec();
        let mut ok = true;
        for (bit, (&i, &(lo, hi))) in free.iter().zip(bounds).enumerate() {
            let v = if mask >> bit & 1 == 0 { lo } else { hi };
            ok &= v.is_finite();
            p[i] = v;
        }
        if ok {
            out.push(p);
        }
    }
    out
}

/// Evaluates the program restricted to the free coordinates.
struct Evaluator<'s, 'a> {
    spec: &'s NlpSpec<'a>,
    fd_step: f64,
    point: Vec<f64>,
    full_grad: Vec<f64>,
}

impl<'s, 'a> Evaluator<'s, 'a> {
    fn set(&mut self, z: &[f64]) {
        for (&i, &v) in self.spec.free.iter().zip(z) {
            self.point[i] = v;
        }
    }

    fn objective(&self) -> f64 {
        self.spec
            .terms
            .iter()
            .map(|(w, f)| if *w == 0.0 { 0.0 } else { w * f.eval(&self.point) })
            .sum()
    }

    fn constraint_values(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.spec.constraints.iter().map(|c| c.function.eval(&self.point)));
    }

    /// Adds `weight * grad f` over the free coordinates into `out`.
    fn add_gradient(&mut self, f: &Function, weight: f64, out: &mut [f64]) -> bool {
        if weight == 0.0 {
            return true;
        }
        match f.gradient() {
            Some(grad) => {
                grad(&self.point, &mut self.full_grad);
                for (o, &i) in out.iter_mut().zip(&self.spec.free) {
                    *o += weight * self.full_grad[i];
                }
            }
            None => {
                let h = self.fd_step;
                for (k, &i) in self.spec.free.iter().enumerate() {
                    let orig = self.point[i];
                    self.point[i] = orig + h;
                    let fp = f.eval(&self.point);
                    self.point[i] = orig - h;
                    let fm = f.eval(&self.point);
                    self.point[i] = orig;
                    out[k] += weight * (fp - fm) / (2.0 * h);
                }
            }
        }
        out.iter().all(|v| v.is_finite())
    }

    fn objective_gradient(&mut self, out: &mut [f64]) -> bool {
        out.fill(0.0);
        let terms = self.spec.terms.clone();
        terms.iter().all(|(w, f)| self.add_gradient(f, *w, out))
    }
}

struct AugmentedLagrangian<'s, 'a> {
    eval: Evaluator<'s, 'a>,
    settings: &'s SolverSettings,
    z: Vec<f64>,
    /// One multiplier per constraint; inequality multipliers stay >= 0.
    multipliers: Vec<f64>,
    penalty: f64,
    cvals: Vec<f64>,
}

impl<'s, 'a> AugmentedLagrangian<'s, 'a> {
    fn new(spec: &'s NlpSpec<'a>, start: Vec<f64>, settings: &'s SolverSettings) -> Self {
        let z = spec.free.iter().map(|&i| start[i]).collect();
        let n = start.len();
        Self {
            eval: Evaluator {
                spec,
                fd_step: settings.fd_step,
                point: start,
                full_grad: vec![0.0; n],
            },
            settings,
            z,
            multipliers: vec![0.0; spec.constraints.len()],
            penalty: settings.initial_penalty,
            cvals: Vec::new(),
        }
    }

    fn constraints(&self) -> &[&'a Constraint] {
        &self.eval.spec.constraints
    }

    /// Augmented Lagrangian value at `z`; `None` when non-finite.
    fn merit(&mut self, z: &[f64]) -> Option<f64> {
        self.eval.set(z);
        let mut v = self.eval.objective();
        let mut cvals = std::mem::take(&mut self.cvals);
        self.eval.constraint_values(&mut cvals);
        let rho = self.penalty;
        for ((c, &g), &lam) in self.constraints().iter().zip(&cvals).zip(&self.multipliers) {
            v += match c.kind {
                ConstraintKind::Equality => lam * g + 0.5 * rho * g * g,
                ConstraintKind::Inequality => {
                    let s = (lam - rho * g).max(0.0);
                    (s * s - lam * lam) / (2.0 * rho)
                }
            };
        }
        self.cvals = cvals;
        v.is_finite().then_some(v)
    }

    /// Gradient of the merit at the point last passed to `merit`. Also
    /// returns the norm of the bare objective gradient.
    fn merit_gradient(&mut self, out: &mut [f64]) -> Option<f64> {
        if !self.eval.objective_gradient(out) {
            return None;
        }
        let fnorm = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rho = self.penalty;
        let constraints: Vec<&Constraint> = self.constraints().to_vec();
        for (k, c) in constraints.iter().enumerate() {
            let g = self.cvals[k];
            let lam = self.multipliers[k];
            let weight = match c.kind {
                ConstraintKind::Equality => lam + rho * g,
                ConstraintKind::Inequality => -(lam - rho * g).max(0.0),
            };
            if !self.eval.add_gradient(&c.function, weight, out) {
                return None;
            }
        }
        Some(fnorm)
    }

    fn max_violation(&self) -> f64 {
        self.constraints()
            .iter()
            .zip(&self.cvals)
            .map(|(c, &v)| if v.is_nan() { f64::INFINITY } else { c.violation(v) })
            .fold(0.0, f64::max)
    }

    fn run(mut self) -> Result<SolverResult> {
        let z0 = self.z.clone();
        if self.merit(&z0).is_none() {
            return Err(Error::Evaluation {
                level: None,
                what: "objective or constraints at solver start".into(),
                point: self.eval.point.clone(),
            });
        }
        let s = self.settings;
        let mut prev_violation = f64::INFINITY;
        let mut stalled_at_cap = 0;
        let mut status = SolveStatus::IterationLimit;
        let mut stationarity = f64::INFINITY;
        let mut outer = 0;
        let dim = self.z.len();
        let mut grad = vec![0.0; dim];

        while outer < s.max_outer {
            outer += 1;
            self.minimize_inner();
            let z = self.z.clone();
            if self.merit(&z).is_none() {
                break;
            }
            // The merit gradient at z equals the Lagrangian gradient at the
            // updated multipliers.
            stationarity = match self.merit_gradient(&mut grad) {
                Some(fnorm) => grad.iter().fold(0.0f64, |m, v| m.max(v.abs())) / fnorm.max(1.0),
                None => f64::INFINITY,
            };
            // Infeasibility plus complementarity of the current multipliers.
            let violation = self
                .constraints()
                .iter()
                .zip(&self.cvals)
                .zip(&self.multipliers)
                .map(|((c, &g), &lam)| match c.kind {
                    ConstraintKind::Equality => g.abs(),
                    ConstraintKind::Inequality => g.min(lam / self.penalty).abs(),
                })
                .fold(0.0, f64::max);
            for k in 0..self.multipliers.len() {
                let g = self.cvals[k];
                let lam = self.multipliers[k];
                self.multipliers[k] = match self.constraints()[k].kind {
                    ConstraintKind::Equality => lam + self.penalty * g,
                    ConstraintKind::Inequality => (lam - self.penalty * g).max(0.0),
                };
            }
            if violation <= s.constraint_tol && stationarity <= s.stationarity_tol {
                status = SolveStatus::Solved;
                break;
            }
            if violation > s.constraint_tol && violation > 0.25 * prev_violation {
                if self.penalty >= s.max_penalty {
                    stalled_at_cap += 1;
                    if stalled_at_cap >= 3 {
                        break;
                    }
                }
                self.penalty = (self.penalty * s.penalty_growth).min(s.max_penalty);
            }
            prev_violation = violation;
        }

        let z = self.z.clone();
        self.merit(&z);
        let violation = self.max_violation();
        if status != SolveStatus::Solved && violation > s.constraint_tol {
            status = SolveStatus::Infeasible;
        }
        let objective = self.eval.objective();
        let point = self.eval.point.clone();
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                level: None,
                what: "solver iterate".into(),
                point,
            });
        }
        Ok(SolverResult {
            point: DecisionVector::from_vec_unchecked(point),
            status,
            stationarity,
            max_violation: violation,
            objective,
            outer_iterations: outer,
        })
    }

    /// BFGS with Armijo backtracking on the merit function.
    fn minimize_inner(&mut self) {
        let n = self.z.len();
        let tol = self.settings.stationarity_tol * 0.1;
        let mut z = self.z.clone();
        let Some(mut f) = self.merit(&z) else { return };
        let mut g = vec![0.0; n];
        let Some(fnorm) = self.merit_gradient(&mut g) else {
            return;
        };
        let scale = fnorm.max(1.0);
        let mut h = identity(n);
        let mut fresh = true;
        let mut d = vec![0.0; n];
        let mut z_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];

        for _ in 0..self.settings.max_inner {
            if inf_norm(&g) <= tol * scale {
                break;
            }
            mat_vec_neg(&h, &g, &mut d);
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                h = identity(n);
                fresh = true;
                d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
                slope = dot(&g, &d);
            }
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-20 {
                for i in 0..n {
                    z_new[i] = z[i] + t * d[i];
                }
                if let Some(fn_) = self.merit(&z_new) {
                    if fn_ <= f + 1e-4 * t * slope {
                        accepted = Some(fn_);
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some(f_new) = accepted else {
                if fresh {
                    break;
                }
                h = identity(n);
                fresh = true;
                continue;
            };
            // merit() above left the evaluator at z_new.
            if self.merit_gradient(&mut g_new).is_none() {
                break;
            }
            let s: Vec<f64> = (0..n).map(|i| z_new[i] - z[i]).collect();
            let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
            let sy = dot(&s, &y);
            if sy > 1e-14 * norm2(&s) * norm2(&y) && sy > 0.0 {
                if fresh {
                    let yy = dot(&y, &y);
                    h = scaled_identity(n, sy / yy);
                }
                bfgs_update(&mut h, &s, &y, sy);
                fresh = false;
            }
            let progress = (f - f_new).abs();
            z.copy_from_slice(&z_new);
            g.copy_from_slice(&g_new);
            f = f_new;
            if progress <= 1e-16 * f.abs().max(1.0) && inf_norm(&s) <= 1e-15 * (1.0 + inf_norm(&z)) {
                break;
            }
        }
        self.z = z;
    }
}

fn identity(n: usize) -> Vec<f64> {
    scaled_identity(n, 1.0)
}

fn scaled_identity(n: usize, s: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = s;
    }
    m
}

fn mat_vec_neg(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        out[i] = -(0..n).map(|j| m[i * n + j] * v[j]).sum::<f64>();
    }
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LevelSpec, Sense};
    use proptest::prelude::*;

    fn vec_of(v: &[f64]) -> DecisionVector {
        DecisionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fd_gradient_of_square() {
        let g = finite_diff_gradient(&|x: &[f64]| x[0] * x[0], &[3.0], &[0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn fd_gradient_is_exact_on_linear() {
        let f = |x: &[f64]| 7.0 * x[0] + 3.0 * x[1];
        let g = finite_diff_gradient(&f, &[0.3, -2.0], &[0, 1], 1e-6).unwrap();
        assert!((g[0] - 7.0).abs() < 1e-9 && (g[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fd_gradient_errors() {
        let f = |x: &[f64]| x[0].sqrt();
        assert!(matches!(
            finite_diff_gradient(&f, &[0.0], &[0], 1e-6),
            Err(Error::Evaluation { .. })
        ));
        assert!(finite_diff_gradient(&f, &[1.0], &[0], 0.0).is_err());
    }

    fn box_problem(lo: f64, hi: f64, target: f64) -> MultilevelProblem {
        let l1 = LevelSpec::new(1, Sense::Minimize, Function::zero(), vec![0]);
        let l2 = LevelSpec::new(
            2,
            Sense::Minimize,
            Function::new(move |x| (x[1] - target).powi(2)),
            vec![1],
        )
        .constraint(Constraint::lower_bound("lo", 1, lo))
        .constraint(Constraint::upper_bound("hi", 1, hi));
        MultilevelProblem::new("box", 2, vec![l1, l2]).unwrap()
    }

    #[test]
    fn clamps_to_box_with_fd_derivatives() {
        let p = box_problem(-1.0, 2.0, 5.0);
        let r = solve_full(&p, &vec_of(&[9.0, 0.0]), &SolverSettings::default()).unwrap();
        assert!(r.is_solved(), "{r:?}");
        assert!((r.point[1] - 2.0).abs() < 1e-6);
        assert_eq!(r.point[0], 9.0);
    }

    #[test]
    fn equality_constrained_quadratic() {
        // min x^2 + y^2 s.t. x + y = 1 -> (0.5, 0.5)
        let l1 = LevelSpec::new(1, Sense::Minimize, Function::zero(), vec![2]);
        let l2 = LevelSpec::new(
            2,
            Sense::Minimize,
            Function::new(|x| x[0] * x[0] + x[1] * x[1]),
            vec![0, 1],
        )
        .constraint(Constraint::equality(
            "sum",
            Function::linear(vec![(0, 1.0), (1, 1.0)], -1.0),
        ));
        let p = MultilevelProblem::new("eq", 3, vec![l1, l2]).unwrap();
        let r = solve_full(&p, &vec_of(&[3.0, -4.0, 1.0]), &SolverSettings::default()).unwrap();
        assert!(r.is_solved(), "{r:?}");
        assert!((r.point[0] - 0.5).abs() < 1e-6 && (r.point[1] - 0.5).abs() < 1e-6);
        assert!(r.max_violation <= 1e-8);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let p = box_problem(1.0, 0.0, 0.5);
        let r = solve_full(&p, &vec_of(&[0.0, 0.3]), &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn concave_objective_multistart_picks_far_bound() {
        // min -z^2 over z in [0, 0.4] from z = 0 (a stationary point).
        let build = |ms: bool| {
            let l1 = LevelSpec::new(1, Sense::Minimize, Function::zero(), vec![0]);
            let l2 = LevelSpec::new(2, Sense::Minimize, Function::new(|x| -x[1] * x[1]), vec![1])
                .constraint(Constraint::lower_bound("z >= 0", 1, 0.0))
                .constraint(Constraint::linear_ge("z <= x", vec![(0, 1.0), (1, -1.0)], 0.0))
                .bounds(|x| vec![(0.0, x[0])])
                .multistart(ms);
            MultilevelProblem::new("concave", 2, vec![l1, l2]).unwrap()
        };
        let x = vec_of(&[0.4, 0.0]);
        let single = solve_full(&build(false), &x, &SolverSettings::default()).unwrap();
        assert!(single.point[1].abs() < 1e-6 || (single.point[1] - 0.4).abs() < 1e-6);
        let multi = solve_full(&build(true), &x, &SolverSettings::default()).unwrap();
        assert!(multi.is_solved());
        assert!((multi.point[1] - 0.4).abs() < 1e-6, "{multi:?}");
    }

    #[test]
    fn empty_free_set_is_rejected() {
        let spec = NlpSpec {
            terms: vec![],
            constraints: vec![],
            free: vec![],
            bounds: None,
            multistart: false,
        };
        assert!(solve_nlp(&spec, &vec_of(&[1.0]), &SolverSettings::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn frozen_coordinates_preserved(x0 in -5.0..5.0f64, start in -5.0..5.0f64, target in -3.0..3.0f64) {
            let p = box_problem(-1.0, 1.0, target);
            let r = solve_full(&p, &vec_of(&[x0, start]), &SolverSettings::default()).unwrap();
            prop_assert_eq!(r.point[0], x0);
            prop_assert!(r.is_solved());
            prop_assert!((r.point[1] - target.clamp(-1.0, 1.0)).abs() < 1e-6);
        }
    }
}
