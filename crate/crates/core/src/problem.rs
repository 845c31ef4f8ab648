//! Multilevel problem model.
//!
//! An L-level problem is a list of [`LevelSpec`]s over one shared decision
//! vector. Level `l` owns a block of coordinates it is allowed to perturb;
//! blocks may overlap. Constraints use the `g(x) >= 0` / `h(x) = 0`
//! convention, and equalities are only accepted at the final level.
//!
//! Levels are addressed 1-based throughout the public API.

use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default tolerance on constraint residuals.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-6;

/// The full concatenated decision variable.
#[derive(Clone, PartialEq)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "decision vector entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Caller guarantees finiteness.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs_diff(&self, other: &DecisionVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for DecisionVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for DecisionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes the full `n`-dimensional gradient into the output slice.
pub type GradientFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Per-block-coordinate `(lower, upper)` bounds, possibly depending on the
/// rest of the point.
pub type BoundsFn = Arc<dyn Fn(&[f64]) -> Vec<(f64, f64)> + Send + Sync>;

/// A scalar function of the decision vector with an optional analytic gradient.
#[derive(Clone)]
pub struct Function {
    value: ValueFn,
    gradient: Option<GradientFn>,
}

impl Function {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// `constant + sum(coef * x[idx])`, with its exact gradient.
    pub fn linear(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        let grad_terms = terms.clone();
        Self::new(move |x| constant + terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()).with_gradient(move |_, g| {
            g.fill(0.0);
            for &(i, c) in &grad_terms {
                g[i] += c;
            }
        })
    }

    pub fn zero() -> Self {
        Self::linear(Vec::new(), 0.0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self) -> Option<&GradientFn> {
        self.gradient.as_ref()
    }
}

impl fmt::Debug for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Function")
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Satisfied when `g(x) >= 0`.
    Inequality,
    /// Satisfied when `h(x) = 0`.
    Equality,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub kind: ConstraintKind,
    pub function: Function,
}

impl Constraint {
    pub fn inequality(name: impl Into<String>, function: Function) -> Self {
        Self {
            name: name.into(),
            kind: ConstraintKind::Inequality,
            function,
        }
    }

    pub fn equality(name: impl Into<String>, function: Function) -> Self {
        Self {
            name: name.into(),
            kind: ConstraintKind::Equality,
            function,
        }
    }

    /// `sum(coef * x[idx]) + constant >= 0`
    pub fn linear_ge(name: impl Into<String>, terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self::inequality(name, Function::linear(terms, constant))
    }

    /// `sum(coef * x[idx]) <= rhs`
    pub fn linear_le(name: impl Into<String>, terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        let neg = terms.into_iter().map(|(i, c)| (i, -c)).collect();
        Self::linear_ge(name, neg, rhs)
    }

    pub fn lower_bound(name: impl Into<String>, index: usize, lo: f64) -> Self {
        Self::linear_ge(name, vec![(index, 1.0)], -lo)
    }

    pub fn upper_bound(name: impl Into<String>, index: usize, hi: f64) -> Self {
        Self::linear_ge(name, vec![(index, -1.0)], hi)
    }

    /// Distance from satisfaction; zero when satisfied.
    pub fn violation(&self, value: f64) -> f64 {
        match self.kind {
            ConstraintKind::Inequality => (-value).max(0.0),
            ConstraintKind::Equality => value.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Multiplier that turns a raw objective into a minimization objective.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

/// Sampling parameters for one level: `samples` random directions per
/// sampling iteration, `iterations` sampling iterations and `step` scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelParams {
    pub samples: usize,
    pub iterations: usize,
    pub step: f64,
}

impl Default for LevelParams {
    fn default() -> Self {
        Self {
            samples: 1,
            iterations: 1,
            step: 1.0,
        }
    }
}

impl LevelParams {
    pub fn new(samples: usize, iterations: usize, step: f64) -> Self {
        Self {
            samples,
            iterations,
            step,
        }
    }

    fn validate(&self, level: usize) -> Result<()> {
        if self.samples < 1 || self.iterations < 1 || !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Problem(format!(
                "level {level}: need samples >= 1, iterations >= 1, step > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct LevelSpec {
    pub index: usize,
    pub sense: Sense,
    pub objective: Function,
    pub constraints: Vec<Constraint>,
    pub block: Vec<usize>,
    pub params: LevelParams,
    /// Box bounds on the block used by the final-level multi-start.
    pub bounds: Option<BoundsFn>,
    pub multistart: bool,
}

impl fmt::Debug for LevelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelSpec")
            .field("index", &self.index)
            .field("sense", &self.sense)
            .field("constraints", &self.constraints.len())
            .field("block", &self.block)
            .field("params", &self.params)
            .field("bounds", &self.bounds.is_some())
            .field("multistart", &self.multistart)
            .finish()
    }
}

impl LevelSpec {
    pub fn new(index: usize, sense: Sense, objective: Function, block: Vec<usize>) -> Self {
        Self {
            index,
            sense,
            objective,
            constraints: Vec::new(),
            block,
            params: LevelParams::default(),
            bounds: None,
            multistart: false,
        }
    }

    pub fn constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn constraints(mut self, cs: impl IntoIterator<Item = Constraint>) -> Self {
        self.constraints.extend(cs);
        self
    }

    pub fn params(mut self, params: LevelParams) -> Self {
        self.params = params;
        self
    }

    pub fn bounds(mut self, bounds: impl Fn(&[f64]) -> Vec<(f64, f64)> + Send + Sync + 'static) -> Self {
        self.bounds = Some(Arc::new(bounds));
        self
    }

    pub fn multistart(mut self, on: bool) -> Self {
        self.multistart = on;
        self
    }

    pub fn has_equalities(&self) -> bool {
        self.constraints.iter().any(|c| c.kind == ConstraintKind::Equality)
    }
}

/// Which constraints make up the feasible set `C^l` of level `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintScope {
    /// Only the constraints attached to level `l`.
    #[default]
    OwnLevel,
    /// Level `l`'s constraints together with those of every level below it.
    WithLowerLevels,
}

/// A reference solution attached to catalog problems.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub point: Vec<f64>,
    /// Leader objective in the leader's own sense (not negated).
    pub leader_value: f64,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct MultilevelProblem {
    name: String,
    n: usize,
    levels: Vec<LevelSpec>,
    scope: ConstraintScope,
    known: Option<KnownOptimum>,
    variable_names: Vec<String>,
}

impl MultilevelProblem {
    pub fn new(name: impl Into<String>, n: usize, levels: Vec<LevelSpec>) -> Result<Self> {
        let problem = Self {
            name: name.into(),
            n,
            variable_names: (0..n).map(|i| format!("x_{i}")).collect(),
            levels,
            scope: ConstraintScope::OwnLevel,
            known: None,
        };
        problem.validate()?;
        Ok(problem)
    }

    fn validate(&self) -> Result<()> {
        let l_count = self.levels.len();
        if l_count < 2 {
            return Err(Error::Problem(format!(
                "a multilevel problem needs at least 2 levels, got {l_count}"
            )));
        }
        let mut covered = vec![false; self.n];
        for (pos, level) in self.levels.iter().enumerate() {
            if level.index != pos + 1 {
                return Err(Error::Problem(format!(
                    "level indices must run 1..=L in order; position {pos} has index {}",
                    level.index
                )));
            }
            if level.block.is_empty() {
                return Err(Error::Problem(format!("level {} has an empty block", level.index)));
            }
            for &i in &level.block {
                if i >= self.n {
                    return Err(Error::Problem(format!(
                        "level {} block index {i} out of range for n = {}",
                        level.index, self.n
                    )));
                }
                covered[i] = true;
            }
            if level.index < l_count && level.has_equalities() {
                return Err(Error::Problem(format!(
                    "equality constraints are only supported at the final level (found at level {})",
                    level.index
                )));
            }
            if level.index < l_count {
                level.params.validate(level.index)?;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::Problem(format!("coordinate {i} is not owned by any level")));
        }
        Ok(())
    }

    pub fn with_scope(mut self, scope: ConstraintScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_known_optimum(mut self, known: KnownOptimum) -> Self {
        self.known = Some(known);
        self
    }

    pub fn with_variable_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::Argument(format!(
                "{} variable names for dimension {}",
                names.len(),
                self.n
            )));
        }
        self.variable_names = names;
        Ok(self)
    }

    /// Replaces the sampling parameters of the non-final levels, in order.
    pub fn with_level_params(mut self, params: &[LevelParams]) -> Result<Self> {
        let upper = self.levels.len() - 1;
        if params.len() != upper {
            return Err(Error::Argument(format!(
                "expected parameters for {upper} non-final levels, got {}",
                params.len()
            )));
        }
        for (level, p) in self.levels.iter_mut().zip(params) {
            p.validate(level.index)?;
            level.params = *p;
        }
        Ok(self)
    }

    pub fn with_multistart(mut self, on: bool) -> Self {
        if let Some(last) = self.levels.last_mut() {
            last.multistart = on;
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }

    pub fn scope(&self) -> ConstraintScope {
        self.scope
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.known.as_ref()
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn level(&self, level: usize) -> Result<&LevelSpec> {
        if level == 0 || level > self.levels.len() {
            return Err(Error::Argument(format!(
                "level {level} out of range 1..={}",
                self.levels.len()
            )));
        }
        Ok(&self.levels[level - 1])
    }

    pub fn block(&self, level: usize) -> Result<&[usize]> {
        Ok(&self.level(level)?.block)
    }

    /// Constraints defining `C^level` under the problem's [`ConstraintScope`].
    pub fn level_constraints(&self, level: usize) -> Result<Vec<&Constraint>> {
        self.level(level)?;
        let upto = match self.scope {
            ConstraintScope::OwnLevel => level,
            ConstraintScope::WithLowerLevels => self.levels.len(),
        };
        Ok(self.levels[level - 1..upto]
            .iter()
            .flat_map(|l| l.constraints.iter())
            .collect())
    }

    /// Every constraint of every level, i.e. the set `C`.
    pub fn all_constraints(&self) -> Vec<&Constraint> {
        self.levels.iter().flat_map(|l| l.constraints.iter()).collect()
    }

    fn check_point(&self, x: &DecisionVector) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Argument(format!(
                "point has dimension {}, problem has {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Raw objective `f^level(x)` in the level's own sense.
    pub fn raw_objective(&self, level: usize, x: &DecisionVector) -> Result<f64> {
        self.check_point(x)?;
        let spec = self.level(level)?;
        let v = spec.objective.eval(x.as_slice());
        if !v.is_finite() {
            return Err(Error::Evaluation {
                level: Some(level),
                what: "objective".into(),
                point: x.as_slice().to_vec(),
            });
        }
        Ok(v)
    }

    /// Objective in canonical minimization form: `f` for minimizers, `-f`
    /// for maximizers.
    pub fn objective_value(&self, level: usize, x: &DecisionVector) -> Result<f64> {
        let sign = self.level(level)?.sense.sign();
        Ok(sign * self.raw_objective(level, x)?)
    }

    /// Raw objective of every level, in level order.
    pub fn all_raw_objectives(&self, x: &DecisionVector) -> Result<Vec<f64>> {
        (1..=self.levels.len()).map(|l| self.raw_objective(l, x)).collect()
    }

    pub fn feasibility_report(&self, level: usize, x: &DecisionVector, tol: f64) -> Result<FeasibilityReport> {
        if !(tol >= 0.0) {
            return Err(Error::Argument(format!("tolerance must be >= 0, got {tol}")));
        }
        self.check_point(x)?;
        let constraints = self.level_constraints(level)?;
        let mut residuals = Vec::with_capacity(constraints.len());
        for c in constraints {
            let value = c.function.eval(x.as_slice());
            if value.is_nan() {
                return Err(Error::Evaluation {
                    level: Some(level),
                    what: format!("constraint `{}`", c.name),
                    point: x.as_slice().to_vec(),
                });
            }
            residuals.push(Residual {
                name: c.name.clone(),
                kind: c.kind,
                value,
            });
        }
        let feasible = residuals.iter().all(|r| r.violation() <= tol);
        Ok(FeasibilityReport {
            level,
            residuals,
            feasible,
            tolerance: tol,
        })
    }

    /// Fast membership test for `C^level`; evaluation failures count as infeasible.
    pub fn is_feasible(&self, level: usize, x: &[f64], tol: f64) -> bool {
        match self.level_constraints(level) {
            Ok(cs) => cs.iter().all(|c| {
                let v = c.function.eval(x);
                !v.is_nan() && c.violation(v) <= tol
            }),
            Err(_) => false,
        }
    }

    pub fn is_feasible_all(&self, x: &[f64], tol: f64) -> bool {
        self.all_constraints().iter().all(|c| {
            let v = c.function.eval(x);
            !v.is_nan() && c.violation(v) <= tol
        })
    }

    /// Returns `x` with `d` added on the coordinates owned by `level`.
    pub fn embed_block(&self, x: &DecisionVector, level: usize, d: &[f64]) -> Result<DecisionVector> {
        self.check_point(x)?;
        let block = self.block(level)?;
        if d.len() != block.len() {
            return Err(Error::Argument(format!(
                "direction has dimension {}, block of level {level} has {}",
                d.len(),
                block.len()
            )));
        }
        let mut out = x.as_slice().to_vec();
        for (&i, &di) in block.iter().zip(d) {
            out[i] += di;
        }
        DecisionVector::new(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: String,
    pub kind: ConstraintKind,
    /// Signed `g` value for inequalities, `h` value for equalities.
    pub value: f64,
}

impl Residual {
    pub fn violation(&self) -> f64 {
        match self.kind {
            ConstraintKind::Inequality => (-self.value).max(0.0),
            ConstraintKind::Equality => self.value.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub level: usize,
    pub residuals: Vec<Residual>,
    pub feasible: bool,
    pub tolerance: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.residuals.iter().map(Residual::violation).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&Residual> {
        self.residuals
            .iter()
            .filter(|r| r.violation() > self.tolerance)
            .max_by(|a, b| a.violation().total_cmp(&b.violation()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_level() -> MultilevelProblem {
        let l1 = LevelSpec::new(1, Sense::Maximize, Function::new(|x| x[0] + x[1]), vec![0]);
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::new(|x| x[1] * x[1]), vec![1])
            .constraint(Constraint::upper_bound("x1 <= 1", 1, 1.0));
        MultilevelProblem::new("two", 2, vec![l1, l2]).unwrap()
    }

    #[test]
    fn rejects_non_finite_vectors() {
        assert!(DecisionVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DecisionVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn rejects_mid_level_equalities() {
        let l1 = LevelSpec::new(1, Sense::Minimize, Function::zero(), vec![0])
            .constraint(Constraint::equality("eq", Function::linear(vec![(0, 1.0)], 0.0)));
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![1]);
        let err = MultilevelProblem::new("bad", 2, vec![l1, l2]).unwrap_err();
        assert!(matches!(err, Error::Problem(_)));
    }

    #[test]
    fn rejects_uncovered_coordinates_and_bad_blocks() {
        let l1 = LevelSpec::new(1, Sense::Minimize, Function::zero(), vec![0]);
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![0]);
        assert!(MultilevelProblem::new("gap", 2, vec![l1.clone(), l2]).is_err());
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![]);
        assert!(MultilevelProblem::new("empty", 2, vec![l1.clone(), l2]).is_err());
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![7]);
        assert!(MultilevelProblem::new("range", 2, vec![l1, l2]).is_err());
    }

    #[test]
    fn rejects_bad_level_params() {
        let l1 = LevelSpec::new(1, Sense::Minimize, Function::zero(), vec![0]).params(LevelParams::new(1, 1, 0.0));
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![1]);
        assert!(MultilevelProblem::new("alpha", 2, vec![l1, l2]).is_err());
    }

    #[test]
    fn maximization_is_negated() {
        let p = two_level();
        let x = DecisionVector::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(p.raw_objective(1, &x).unwrap(), 5.0);
        assert_eq!(p.objective_value(1, &x).unwrap(), -5.0);
        assert_eq!(p.objective_value(2, &x).unwrap(), 9.0);
    }

    #[test]
    fn nan_objective_is_an_evaluation_error() {
        let l1 = LevelSpec::new(1, Sense::Minimize, Function::new(|x| x[0].ln()), vec![0]);
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![1]);
        let p = MultilevelProblem::new("ln", 2, vec![l1, l2]).unwrap();
        let x = DecisionVector::new(vec![-1.0, 0.0]).unwrap();
        assert!(matches!(
            p.objective_value(1, &x),
            Err(Error::Evaluation { level: Some(1), .. })
        ));
    }

    #[test]
    fn embed_block_changes_only_the_block() {
        let p = two_level();
        let x = DecisionVector::new(vec![2.0, 3.0]).unwrap();
        let y = p.embed_block(&x, 2, &[0.5]).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 3.5]);
        assert_eq!(p.embed_block(&x, 1, &[0.0]).unwrap(), x);
        assert!(matches!(p.embed_block(&x, 1, &[0.0, 1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn report_names_the_violated_constraint() {
        let p = two_level();
        let x = DecisionVector::new(vec![0.0, 1.25]).unwrap();
        let r = p.feasibility_report(2, &x, 1e-6).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.worst().unwrap().name, "x1 <= 1");
        assert!((r.max_violation() - 0.25).abs() < 1e-12);
        assert!(p.feasibility_report(2, &x, -1.0).is_err());
    }

    #[test]
    fn scope_with_lower_levels_inherits_constraints() {
        let p = two_level();
        let x = DecisionVector::new(vec![0.0, 2.0]).unwrap();
        assert!(p.feasibility_report(1, &x, 0.0).unwrap().feasible);
        let p = p.with_scope(ConstraintScope::WithLowerLevels);
        assert!(!p.feasibility_report(1, &x, 0.0).unwrap().feasible);
    }

    proptest! {
        #[test]
        fn block_locality(x0 in -10.0..10.0f64, x1 in -10.0..10.0f64, d in -5.0..5.0f64) {
            let p = two_level();
            let x = DecisionVector::new(vec![x0, x1]).unwrap();
            let y = p.embed_block(&x, 1, &[d]).unwrap();
            prop_assert_eq!(y[1], x1);
            prop_assert_eq!(y[0], x0 + d);
        }

        #[test]
        fn feasibility_is_monotone_in_tolerance(v in 0.0..2.0f64, t in 0.0..1.0f64, extra in 0.0..1.0f64) {
            let p = two_level();
            let x = DecisionVector::new(vec![0.0, v]).unwrap();
            if p.feasibility_report(2, &x, t).unwrap().feasible {
                prop_assert!(p.feasibility_report(2, &x, t + extra).unwrap().feasible);
            }
        }

        #[test]
        fn canonical_argmin_is_raw_argmax(values in proptest::collection::vec(-100.0..100.0f64, 1..20)) {
            let p = two_level();
            let pts: Vec<DecisionVector> =
                values.iter().map(|&v| DecisionVector::new(vec![v, 0.0]).unwrap()).collect();
            let by_canon = pts.iter().min_by(|a, b| {
                p.objective_value(1, a).unwrap().total_cmp(&p.objective_value(1, b).unwrap())
            }).unwrap();
            let by_raw = pts.iter().max_by(|a, b| {
                p.raw_objective(1, a).unwrap().total_cmp(&p.raw_objective(1, b).unwrap())
            }).unwrap();
            prop_assert_eq!(p.raw_objective(1, by_canon).unwrap(), p.raw_objective(1, by_raw).unwrap());
        }
    }
}
