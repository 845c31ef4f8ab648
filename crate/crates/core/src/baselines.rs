//! Qualitative stand-ins for non-hierarchical solution methods.
//!
//! Neither method anticipates lower-level reactions: iterative best response
//! lets each level optimize its own block in turn, and bounded random search
//! accepts any point that helps the leader and satisfies every constraint.

use rand::Rng;

use crate::engine::find_feasible_start_from;
use crate::error::{Error, Result};
use crate::nlp::{solve_level, SolveStatus, SolverSettings};
use crate::problem::{DecisionVector, MultilevelProblem, DEFAULT_FEASIBILITY_TOL};
use crate::sampler::RngStream;

/// Cycles through the levels `rounds` times, each solving its own problem
/// over its block with every other coordinate held fixed.
///
/// The seed picks the guess handed to the feasibility solve that produces
/// the starting point.
pub fn iterative_best_response(
    problem: &MultilevelProblem,
    rounds: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<DecisionVector> {
    if rounds == 0 {
        return Err(Error::Argument("iterative best response needs rounds >= 1".into()));
    }
    let mut rng = RngStream::new(seed).rng();
    let guess: Vec<f64> = (0..problem.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mut x = find_feasible_start_from(problem, &DecisionVector::new(guess)?, settings)?;
    for _ in 0..rounds {
        for level in 1..=problem.num_levels() {
            let res = solve_level(problem, level, &x, settings)?;
            match res.status {
                SolveStatus::Infeasible => {
                    return Err(Error::Solve {
                        level,
                        reason: format!("infeasible (violation {:e})", res.max_violation),
                    })
                }
                SolveStatus::IterationLimit
                    if !problem.is_feasible(level, res.point.as_slice(), DEFAULT_FEASIBILITY_TOL) =>
                {
                    return Err(Error::Solve {
                        level,
                        reason: "iteration limit at an infeasible point".into(),
                    })
                }
                _ => x = res.point,
            }
        }
    }
    Ok(x)
}

/// Uniform sampling of the box `bounds`, keeping a sample whenever it
/// improves the leader objective and satisfies the constraints of every
/// level. Lower-level optimality is never checked.
///
/// The search starts from the lower corner of the box. If that corner is
/// infeasible the first feasible sample is adopted instead.
pub fn bounded_random_search(
    problem: &MultilevelProblem,
    bounds: &[(f64, f64)],
    samples: usize,
    iters: usize,
    seed: u64,
) -> Result<DecisionVector> {
    if bounds.len() != problem.dim() {
        return Err(Error::Argument(format!(
            "{} bounds for dimension {}",
            bounds.len(),
            problem.dim()
        )));
    }
    if bounds
        .iter()
        .any(|&(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi)
    {
        return Err(Error::Argument("bounds must be finite with lo <= hi".into()));
    }
    let tol = DEFAULT_FEASIBILITY_TOL;
    let score = |x: &DecisionVector| -> Option<f64> {
        if !problem.is_feasible_all(x.as_slice(), tol) {
            return None;
        }
        problem.objective_value(1, x).ok()
    };

    let corner = DecisionVector::new(bounds.iter().map(|b| b.0).collect())?;
    let mut best = score(&corner).map(|v| (corner, v));
    let mut rng = RngStream::new(seed).rng();
    for _ in 0..iters {
        for _ in 0..samples {
            let x = DecisionVector::new(
                bounds
                    .iter()
                    .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
                    .collect(),
            )?;
            if let Some(v) = score(&x) {
                if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                    best = Some((x, v));
                }
            }
        }
    }
    best.map(|(x, _)| x)
        .ok_or(Error::NoFeasibleStart { violation: f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Constraint, Function, LevelSpec, Sense};
    use crate::problems::{make_nested_toll_bounded, TollScenario};

    fn decoupled() -> MultilevelProblem {
        let quad = |i: usize, c: f64| {
            Function::new(move |x| (x[i] - c).powi(2)).with_gradient(move |x, g| {
                g.fill(0.0);
                g[i] = 2.0 * (x[i] - c);
            })
        };
        let l1 = LevelSpec::new(1, Sense::Minimize, quad(0, 1.5), vec![0]);
        let l2 = LevelSpec::new(2, Sense::Minimize, quad(1, -2.0), vec![1]);
        let l3 = LevelSpec::new(3, Sense::Minimize, quad(2, 0.25), vec![2])
            .constraint(Constraint::upper_bound("x2 <= 10", 2, 10.0));
        MultilevelProblem::new("decoupled", 3, vec![l1, l2, l3]).unwrap()
    }

    #[test]
    fn ibr_solves_decoupled_problem_in_one_round() {
        let x = iterative_best_response(&decoupled(), 1, 3, &SolverSettings::default()).unwrap();
        for (a, b) in x.as_slice().iter().zip([1.5, -2.0, 0.25]) {
            assert!((a - b).abs() < 1e-6, "{x:?}");
        }
    }

    #[test]
    fn ibr_is_deterministic_and_misses_the_toll_equilibrium() {
        let p = make_nested_toll_bounded(&TollScenario::new(6.0));
        let s = SolverSettings::default();
        let a = iterative_best_response(&p, 3, 11, &s).unwrap();
        assert_eq!(a, iterative_best_response(&p, 3, 11, &s).unwrap());
        assert!(p.raw_objective(1, &a).unwrap() < 1.0, "{a:?}");
        assert!(iterative_best_response(&p, 0, 11, &s).is_err());
    }

    #[test]
    fn random_search_overestimates_the_leader() {
        let p = make_nested_toll_bounded(&TollScenario::new(-1.5));
        let b = [(0.0, 10.0), (0.0, 10.0), (0.0, 1.0), (0.0, 1.0)];
        let x = bounded_random_search(&p, &b, 50, 20, 1).unwrap();
        assert!(p.raw_objective(1, &x).unwrap() > 0.25);
        assert_eq!(bounded_random_search(&p, &b, 0, 20, 1).unwrap().as_slice(), &[0.0; 4]);
    }

    #[test]
    fn random_search_on_degenerate_hierarchy_approaches_box_optimum() {
        let p = decoupled();
        let b = [(0.0, 3.0), (-3.0, 0.0), (0.0, 1.0)];
        let err = |n: usize| {
            let x = bounded_random_search(&p, &b, n, 1, 4).unwrap();
            (x[0] - 1.5).abs()
        };
        assert!(err(5000) < 0.05);
        assert!(err(5000) <= err(5));
    }
}
