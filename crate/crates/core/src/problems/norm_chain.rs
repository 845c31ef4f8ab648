//! Chain of nested least-squares players.
//!
//! Level `l` owns `x_l`, must keep `x_l <= x_{l-1}`, and minimizes the
//! squared distance `sum_{j >= l} (x_j - w_j)^2`. The hierarchy collapses to
//! projecting `w` onto the nonincreasing cone.

use crate::error::{Error, Result};
use crate::oracles::pava_nonincreasing;
use crate::problem::{Constraint, Function, KnownOptimum, LevelParams, LevelSpec, MultilevelProblem, Sense};

fn tail_residual(w: &[f64], from: usize) -> Function {
    let wv = w.to_vec();
    let wg = w.to_vec();
    Function::new(move |x| (from..wv.len()).map(|j| (x[j] - wv[j]).powi(2)).sum()).with_gradient(move |x, g| {
        g.fill(0.0);
        for j in from..wg.len() {
            g[j] = 2.0 * (x[j] - wg[j]);
        }
    })
}

pub fn make_norm_chain(w: &[f64]) -> Result<MultilevelProblem> {
    let n = w.len();
    if n < 2 {
        return Err(Error::Argument(format!("norm chain needs at least 2 levels, got {n}")));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("norm chain weights must be finite".into()));
    }
    let levels = (0..n)
        .map(|j| {
            let spec = LevelSpec::new(j + 1, Sense::Minimize, tail_residual(w, j), vec![j]);
            if j == 0 {
                spec
            } else {
                spec.constraint(Constraint::linear_le(
                    format!("x_{j} <= x_{}", j - 1),
                    vec![(j, 1.0), (j - 1, -1.0)],
                    0.0,
                ))
            }
        })
        .collect();

    let star = pava_nonincreasing(w);
    let leader_value = star.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum();
    let p = MultilevelProblem::new(format!("norm_chain(n={n})"), n, levels)?
        .with_level_params(&vec![LevelParams::new(6, 1, 1.0); n - 1])?
        .with_known_optimum(KnownOptimum {
            point: star,
            leader_value,
            note: "monotone projection of w".into(),
        });
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::DecisionVector;

    #[test]
    fn values() {
        let w = [3.0, 8.0, 7.0, 7.0, 3.0];
        let p = make_norm_chain(&w).unwrap();
        assert_eq!(p.num_levels(), 5);
        let k = p.known_optimum().unwrap();
        assert!((k.leader_value - 14.75).abs() < 1e-12);
        let origin = DecisionVector::zeros(5);
        assert_eq!(p.raw_objective(1, &origin).unwrap(), 180.0);
        let at_w = DecisionVector::new(w.to_vec()).unwrap();
        assert_eq!(p.raw_objective(5, &at_w).unwrap(), 0.0);
        assert!(p.is_feasible_all(&k.point, 1e-12));
    }

    #[test]
    fn nonincreasing_weights_are_their_own_optimum() {
        let p = make_norm_chain(&[5.0, 4.0, 4.0, -1.0]).unwrap();
        let k = p.known_optimum().unwrap();
        assert_eq!(k.point, vec![5.0, 4.0, 4.0, -1.0]);
        assert_eq!(k.leader_value, 0.0);
    }

    #[test]
    fn rejects_short_or_non_finite() {
        assert!(make_norm_chain(&[1.0]).is_err());
        assert!(make_norm_chain(&[1.0, f64::NAN]).is_err());
    }
}
