//! Monte-Carlo multilevel optimization.
//!
//! [`run_mcmo`] repeatedly calls [`Mcmo::optimize`] on level 1 and keeps the
//! previous point whenever no feasible improvement comes back. `optimize`
//! recurses: level `l < L` perturbs its own block, hands every candidate to
//! level `l + 1`, and keeps the best response that is feasible for `C^l`.
//! The final level is solved to local optimality with [`solve_full`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nlp::{solve_full, solve_nlp, NlpSpec, SolveStatus, SolverSettings};
use crate::problem::{DecisionVector, Function, MultilevelProblem, DEFAULT_FEASIBILITY_TOL};
use crate::sampler::{candidate_set, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    /// Outer iterations.
    pub maxiter: usize,
    /// Number of trailing iterates considered by [`smoothen`].
    pub smoothing_window: usize,
    pub seed: u64,
    pub feasibility_tol: f64,
    pub solver: SolverSettings,
    /// Evaluate the candidate subtrees of each sampling iteration on the
    /// rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            maxiter: 100,
            smoothing_window: 10,
            seed: 0,
            feasibility_tol: DEFAULT_FEASIBILITY_TOL,
            solver: SolverSettings::default(),
            parallel: false,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 {
            return Err(Error::Argument("smoothing window must be >= 1".into()));
        }
        if self.maxiter >= 1 && self.smoothing_window > self.maxiter {
            return Err(Error::Argument(format!(
                "smoothing window {} exceeds maxiter {}",
                self.smoothing_window, self.maxiter
            )));
        }
        if !(self.feasibility_tol >= 0.0) {
            return Err(Error::Argument("feasibility tolerance must be >= 0".into()));
        }
        self.solver.validate()
    }
}

/// Iterates of one run. Entry 0 is the start point.
#[derive(Debug, Clone, Default)]
pub struct RunHistory {
    pub iterates: Vec<DecisionVector>,
    /// Raw objective of every level at each iterate.
    pub objectives: Vec<Vec<f64>>,
    /// Canonical (minimization-form) leader objective at each iterate.
    pub leader_canonical: Vec<f64>,
    /// Milliseconds since the run started.
    pub wall_ms: Vec<f64>,
    /// Cumulative final-level solves.
    pub solve_full_calls: Vec<u64>,
    /// Whether the outer iteration produced no point and kept the previous one.
    pub kept_previous: Vec<bool>,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn leader_values(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| o[0]).collect()
    }

    fn push(
        &mut self,
        problem: &MultilevelProblem,
        x: DecisionVector,
        wall_ms: f64,
        calls: u64,
        kept: bool,
    ) -> Result<()> {
        let objectives = problem.all_raw_objectives(&x)?;
        self.leader_canonical
            .push(problem.levels()[0].sense.sign() * objectives[0]);
        self.objectives.push(objectives);
        self.iterates.push(x);
        self.wall_ms.push(wall_ms);
        self.solve_full_calls.push(calls);
        self.kept_previous.push(kept);
        Ok(())
    }
}

/// Best of the last `k` iterates by canonical leader objective. Later
/// iterates win ties.
pub fn smoothen(history: &RunHistory, k: usize) -> Result<DecisionVector> {
    if history.is_empty() {
        return Err(Error::Argument("cannot smooth an empty history".into()));
    }
    let len = history.len();
    let start = len - k.clamp(1, len);
    let mut best = len - 1;
    for i in (start..len).rev() {
        if history.leader_canonical[i] < history.leader_canonical[best] {
            best = i;
        }
    }
    Ok(history.iterates[best].clone())
}

/// Picks the point with the smallest canonical objective at `level`.
///
/// Nulls and points whose objective cannot be evaluated are skipped. The
/// incumbent wins exact ties, as does an earlier candidate over a later one.
pub fn argmin_candidates(
    problem: &MultilevelProblem,
    candidates: &[Option<DecisionVector>],
    level: usize,
    incumbent: Option<DecisionVector>,
) -> Option<DecisionVector> {
    let score = |x: &DecisionVector| problem.objective_value(level, x).ok();
    let mut best = incumbent.and_then(|x| score(&x).map(|v| (x, v)));
    for c in candidates.iter().flatten() {
        if let Some(v) = score(c) {
            if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((c.clone(), v));
            }
        }
    }
    best.map(|(x, _)| x)
}

/// One MCMO run over a problem. Holds the final-level solve counter.
pub struct Mcmo<'p> {
    problem: &'p MultilevelProblem,
    params: EngineParams,
    solve_calls: AtomicU64,
}

impl<'p> Mcmo<'p> {
    pub fn new(problem: &'p MultilevelProblem, params: EngineParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            problem,
            params,
            solve_calls: AtomicU64::new(0),
        })
    }

    pub fn solve_full_calls(&self) -> u64 {
        self.solve_calls.load(Ordering::Relaxed)
    }

    /// Best response of levels `level..=L` starting from `x`, or `None`.
    pub fn optimize(&self, x: &DecisionVector, level: usize, stream: &RngStream) -> Option<DecisionVector> {
        let last = self.problem.num_levels();
        let tol = self.params.feasibility_tol;
        if level == last {
            self.solve_calls.fetch_add(1, Ordering::Relaxed);
            let res = solve_full(self.problem, x, &self.params.solver).ok()?;
            if res.status != SolveStatus::Solved || !self.problem.is_feasible(last, res.point.as_slice(), tol) {
                return None;
            }
            return Some(res.point);
        }

        let params = self.problem.levels()[level - 1].params;
        let mut current = x.clone();
        let mut best: Option<(DecisionVector, f64)> = None;
        for k in 0..params.iterations as u64 {
            let candidates = candidate_set(
                self.problem,
                &current,
                level,
                params.samples,
                params.step,
                &stream.path(&[k, 0]),
            )
            .ok()?;
            let respond = |(j, c): (usize, &DecisionVector)| -> Option<(DecisionVector, f64)> {
                let y = self.optimize(c, level + 1, &stream.path(&[k, j as u64 + 1]))?;
                if !self.problem.is_feasible(level, y.as_slice(), tol) {
                    return None;
                }
                let v = self.problem.objective_value(level, &y).ok()?;
                Some((y, v))
            };
            let responses: Vec<Option<(DecisionVector, f64)>> = if self.params.parallel {
                candidates.par_iter().enumerate().map(respond).collect()
            } else {
                candidates.iter().enumerate().map(respond).collect()
            };
            for (y, v) in responses.into_iter().flatten() {
                if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                    best = Some((y, v));
                }
            }
            if let Some((b, _)) = &best {
                current = b.clone();
            }
        }
        best.map(|(x, _)| x)
    }

    /// Runs `maxiter` outer iterations from `start`.
    pub fn run(&self, start: &DecisionVector) -> Result<(RunHistory, DecisionVector)> {
        check_start(self.problem, start, self.params.feasibility_tol)?;
        let clock = Instant::now();
        let root = RngStream::new(self.params.seed);
        let mut history = RunHistory::default();
        history.push(self.problem, start.clone(), 0.0, 0, false)?;
        let mut current = start.clone();
        for i in 1..=self.params.maxiter {
            let next = self.optimize(&current, 1, &root.child(i as u64));
            let kept = next.is_none();
            if let Some(x) = next {
                current = x;
            }
            history.push(
                self.problem,
                current.clone(),
                clock.elapsed().as_secs_f64() * 1e3,
                self.solve_full_calls(),
                kept,
            )?;
        }
        let best = smoothen(&history, self.params.smoothing_window)?;
        Ok((history, best))
    }
}

/// Single call of the recursive optimizer at `level`.
pub fn optimize(
    problem: &MultilevelProblem,
    x: &DecisionVector,
    level: usize,
    params: &EngineParams,
    stream: &RngStream,
) -> Result<Option<DecisionVector>> {
    problem.level(level)?;
    Ok(Mcmo::new(problem, *params)?.optimize(x, level, stream))
}

pub fn run_mcmo(
    problem: &MultilevelProblem,
    start: &DecisionVector,
    params: &EngineParams,
) -> Result<(RunHistory, DecisionVector)> {
    Mcmo::new(problem, *params)?.run(start)
}

fn check_start(problem: &MultilevelProblem, start: &DecisionVector, tol: f64) -> Result<()> {
    if start.len() != problem.dim() {
        return Err(Error::Argument(format!(
            "start has dimension {}, problem has {}",
            start.len(),
            problem.dim()
        )));
    }
    for level in 1..=problem.num_levels() {
        let report = problem.feasibility_report(level, start, tol)?;
        if let Some(r) = report.worst() {
            return Err(Error::InfeasibleStart {
                level,
                constraint: r.name.clone(),
                residual: r.value,
            });
        }
    }
    Ok(())
}

/// A point in `C` found by minimizing zero over the whole space from the origin.
pub fn find_feasible_start(problem: &MultilevelProblem, settings: &SolverSettings) -> Result<DecisionVector> {
    find_feasible_start_from(problem, &DecisionVector::zeros(problem.dim()), settings)
}

pub fn find_feasible_start_from(
    problem: &MultilevelProblem,
    guess: &DecisionVector,
    settings: &SolverSettings,
) -> Result<DecisionVector> {
    let zero = Function::zero();
    whole_space_solve(problem, vec![(0.0, &zero)], guess, settings)
}

/// Minimizes `sum(w_l * canonical f^l)` over `C` from the origin.
pub fn weighted_start(
    problem: &MultilevelProblem,
    weights: &[f64],
    settings: &SolverSettings,
) -> Result<DecisionVector> {
    if weights.len() != problem.num_levels() {
        return Err(Error::Argument(format!(
            "{} weights for {} levels",
            weights.len(),
            problem.num_levels()
        )));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return find_feasible_start(problem, settings);
    }
    let terms = problem
        .levels()
        .iter()
        .zip(weights)
        .map(|(l, w)| (w * l.sense.sign(), &l.objective))
        .collect();
    whole_space_solve(problem, terms, &DecisionVector::zeros(problem.dim()), settings)
}

fn whole_space_solve(
    problem: &MultilevelProblem,
    terms: Vec<(f64, &Function)>,
    guess: &DecisionVector,
    settings: &SolverSettings,
) -> Result<DecisionVector> {
    let spec = NlpSpec {
        terms,
        constraints: problem.all_constraints(),
        free: (0..problem.dim()).collect(),
        bounds: None,
        multistart: false,
    };
    let res = solve_nlp(&spec, guess, settings)?;
    match res.status {
        SolveStatus::Solved if problem.is_feasible_all(res.point.as_slice(), DEFAULT_FEASIBILITY_TOL) => Ok(res.point),
        SolveStatus::IterationLimit => Err(Error::IterationLimit(format!(
            "whole-space solve stopped after {} outer iterations: objective {:e}, stationarity {:e}, violation {:e}",
            res.outer_iterations, res.objective, res.stationarity, res.max_violation
        ))),
        _ => Err(Error::NoFeasibleStart {
            violation: res.max_violation,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Constraint, LevelParams, LevelSpec, Sense};
    use crate::problems::{make_nested_toll, make_shared_dof_toy, TollScenario};

    fn dv(v: &[f64]) -> DecisionVector {
        DecisionVector::new(v.to_vec()).unwrap()
    }

    fn history_with(values: &[f64]) -> RunHistory {
        RunHistory {
            iterates: values.iter().map(|&v| dv(&[v])).collect(),
            objectives: values.iter().map(|&v| vec![v]).collect(),
            leader_canonical: values.to_vec(),
            wall_ms: vec![0.0; values.len()],
            solve_full_calls: vec![0; values.len()],
            kept_previous: vec![false; values.len()],
        }
    }

    #[test]
    fn smoothen_windows() {
        let h = history_with(&[1.0, 9.0, 5.0, 3.0, 4.0]);
        assert_eq!(smoothen(&h, 1).unwrap(), dv(&[4.0]));
        assert_eq!(smoothen(&h, 3).unwrap(), dv(&[3.0]));
        assert_eq!(smoothen(&h, 50).unwrap(), dv(&[1.0]));
        assert!(smoothen(&RunHistory::default(), 3).is_err());
    }

    #[test]
    fn argmin_rules() {
        let p = make_shared_dof_toy(0.0, 10.0);
        // level 2 minimizes x
        assert_eq!(argmin_candidates(&p, &[None, None], 2, None), None);
        let got = argmin_candidates(&p, &[Some(dv(&[3.0]))], 2, Some(dv(&[5.0])));
        assert_eq!(got, Some(dv(&[3.0])));
        // incumbent keeps ties; level 1 maximizes x so canonical value is -x
        let inc = dv(&[3.0]);
        let got = argmin_candidates(&p, &[Some(dv(&[3.0])), None], 1, Some(inc.clone()));
        assert!(std::ptr::eq(&got.as_ref().unwrap()[0], &got.as_ref().unwrap()[0]));
        assert_eq!(got, Some(inc));
    }

    #[test]
    fn final_level_optimize_is_solve_full() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let x = dv(&[0.0, 4.0, 0.0, 0.2, 0.8]);
        let params = EngineParams::default();
        let got = optimize(&p, &x, 3, &params, &RngStream::new(0)).unwrap().unwrap();
        let direct = solve_full(&p, &x, &params.solver).unwrap();
        assert_eq!(got, direct.point);
        assert!((got[3] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn final_level_optimize_returns_null_when_infeasible() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let x = dv(&[0.0, 4.0, 2.0, 0.0, 0.0]);
        let got = optimize(&p, &x, 3, &EngineParams::default(), &RngStream::new(0)).unwrap();
        assert!(got.is_none());
    }

    #[test]
    fn follower_overrides_shared_variable() {
        for &(lo, hi, start) in &[(0.0, 1.0, 0.5), (-3.0, 2.0, 2.0), (1.5, 1.6, 1.55)] {
            let p = make_shared_dof_toy(lo, hi);
            let params = EngineParams::default();
            for seed in 0..3 {
                let got = optimize(&p, &dv(&[start]), 1, &params, &RngStream::new(seed))
                    .unwrap()
                    .unwrap();
                assert!((got[0] - lo).abs() < 1e-6, "got {got:?} for [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn maxiter_zero_returns_start() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let x = dv(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        let params = EngineParams {
            maxiter: 0,
            ..Default::default()
        };
        let (h, best) = run_mcmo(&p, &x, &params).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(best, x);
    }

    #[test]
    fn infeasible_start_names_constraint() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let x = dv(&[0.0, 0.0, 1.1, 0.0, 0.0]);
        match run_mcmo(&p, &x, &EngineParams::default()) {
            Err(Error::InfeasibleStart { level, constraint, .. }) => {
                assert_eq!(level, 2);
                assert!(constraint.contains("p1"), "{constraint}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn params_validation() {
        let bad = EngineParams {
            maxiter: 5,
            smoothing_window: 6,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EngineParams {
            smoothing_window: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn contradictory_constraints_have_no_start() {
        let l1 = LevelSpec::new(1, Sense::Minimize, Function::zero(), vec![0])
            .constraint(Constraint::lower_bound("x >= 1", 0, 1.0));
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![0])
            .constraint(Constraint::upper_bound("x <= 0", 0, 0.0));
        let p = MultilevelProblem::new("contradiction", 1, vec![l1, l2]).unwrap();
        assert!(matches!(
            find_feasible_start(&p, &SolverSettings::default()),
            Err(Error::NoFeasibleStart { .. })
        ));
    }

    #[test]
    fn unbounded_weighted_start_reports_iteration_limit() {
        let l1 = LevelSpec::new(1, Sense::Maximize, Function::linear(vec![(0, 1.0)], 0.0), vec![0])
            .constraint(Constraint::lower_bound("x >= 0", 0, 0.0));
        let l2 = LevelSpec::new(2, Sense::Minimize, Function::zero(), vec![0]);
        let p = MultilevelProblem::new("unbounded", 1, vec![l1, l2]).unwrap();
        let err = weighted_start(&p, &[1.0, 0.0], &SolverSettings::default()).unwrap_err();
        assert!(matches!(err, Error::IterationLimit(_)), "{err:?}");
    }

    #[test]
    fn weighted_start_with_zero_weights_is_feasibility_solve() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let a = weighted_start(&p, &[0.0, 0.0, 0.0], &SolverSettings::default()).unwrap();
        let b = find_feasible_start(&p, &SolverSettings::default()).unwrap();
        assert_eq!(a, b);
        assert!(p.is_feasible_all(a.as_slice(), 1e-6));
    }

    #[test]
    fn candidate_count_matches_structure() {
        let p = make_nested_toll(&TollScenario::new(6.0))
            .with_level_params(&[LevelParams::new(3, 2, 0.1), LevelParams::new(4, 1, 0.1)])
            .unwrap();
        let engine = Mcmo::new(&p, EngineParams::default()).unwrap();
        let x = dv(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        engine.optimize(&x, 1, &RngStream::new(5));
        assert_eq!(engine.solve_full_calls(), (4 * 2) * 5);
    }
}
