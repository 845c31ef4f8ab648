//! Small trilevel test problems and the shared-variable toy.

use crate::problem::{Constraint, Function, KnownOptimum, LevelParams, LevelSpec, MultilevelProblem, Sense};

use super::names;

fn sinha_constraints() -> Vec<Constraint> {
    vec![
        Constraint::linear_le(
            "x1 + x2 + x3 + x4 <= 5",
            vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)],
            5.0,
        ),
        Constraint::linear_le(
            "x1 + x2 - x3 - x4 <= 2",
            vec![(0, 1.0), (1, 1.0), (2, -1.0), (3, -1.0)],
            2.0,
        ),
        Constraint::linear_ge("x1 + x2 + x3 >= 1", vec![(0, 1.0), (1, 1.0), (2, 1.0)], -1.0),
        Constraint::linear_le("-x1 + x2 + x3 <= 1", vec![(0, -1.0), (1, 1.0), (2, 1.0)], 1.0),
        Constraint::linear_le(
            "x1 - x2 + x3 + 2x4 <= 4",
            vec![(0, 1.0), (1, -1.0), (2, 1.0), (3, 2.0)],
            4.0,
        ),
        Constraint::linear_le("x1 + 2x3 + 3x4 <= 3", vec![(0, 1.0), (2, 2.0), (3, 3.0)], 3.0),
        Constraint::upper_bound("x4 <= 2", 3, 2.0),
        Constraint::lower_bound("x1 >= 0", 0, 0.0),
        Constraint::lower_bound("x2 >= 0", 1, 0.0),
        Constraint::lower_bound("x3 >= 0", 2, 0.0),
        Constraint::lower_bound("x4 >= 0", 3, 0.0),
    ]
}

/// Trilevel linear program, all levels maximizing. Every level carries the
/// full common constraint list.
pub fn make_sinha() -> MultilevelProblem {
    let l1 = LevelSpec::new(
        1,
        Sense::Maximize,
        Function::linear(vec![(0, 7.0), (1, 3.0), (2, -4.0), (3, 2.0)], 0.0),
        vec![0, 1],
    )
    .constraints(sinha_constraints());
    let l2 = LevelSpec::new(
        2,
        Sense::Maximize,
        Function::linear(vec![(1, 1.0), (2, 3.0), (3, 4.0)], 0.0),
        vec![2],
    )
    .constraints(sinha_constraints());
    let l3 = LevelSpec::new(
        3,
        Sense::Maximize,
        Function::linear(vec![(0, 2.0), (1, 1.0), (2, 1.0), (3, 1.0)], 0.0),
        vec![3],
    )
    .constraints(sinha_constraints());

    MultilevelProblem::new("sinha", 4, vec![l1, l2, l3])
        .and_then(|p| p.with_level_params(&[LevelParams::new(6, 1, 1.0), LevelParams::new(3, 1, 1.0)]))
        .and_then(|p| p.with_variable_names(names(&["x1", "x2", "x3", "x4"])))
        .expect("sinha problem is well formed")
        .with_known_optimum(KnownOptimum {
            point: vec![2.25, 0.0, 0.0, 0.25],
            leader_value: 16.25,
            note: "reported optimum".into(),
        })
}

/// Trilevel problem over `(x, y, z)` with a concave final level, so the
/// final-level solve restarts from the corners of `z in [0, min(1, x)]`.
pub fn make_tilahun() -> MultilevelProblem {
    let l1 = LevelSpec::new(
        1,
        Sense::Minimize,
        Function::linear(vec![(0, -1.0), (1, 4.0)], 0.0),
        vec![0],
    )
    .constraint(Constraint::linear_le("x + y <= 1", vec![(0, 1.0), (1, 1.0)], 1.0));
    let l2 = LevelSpec::new(
        2,
        Sense::Minimize,
        Function::linear(vec![(1, 2.0), (2, 1.0)], 0.0),
        vec![1],
    )
    .constraint(Constraint::linear_le(
        "-2x + y <= -z",
        vec![(0, -2.0), (1, 1.0), (2, 1.0)],
        0.0,
    ));
    let f3 = Function::new(|x| -x[2] * x[2] + x[1]).with_gradient(|x, g| {
        g.fill(0.0);
        g[1] = 1.0;
        g[2] = -2.0 * x[2];
    });
    let l3 = LevelSpec::new(3, Sense::Minimize, f3, vec![2])
        .constraint(Constraint::linear_le("z <= x", vec![(2, 1.0), (0, -1.0)], 0.0))
        .constraint(Constraint::lower_bound("x >= 0", 0, 0.0))
        .constraint(Constraint::upper_bound("x <= 0.5", 0, 0.5))
        .constraint(Constraint::lower_bound("y >= 0", 1, 0.0))
        .constraint(Constraint::upper_bound("y <= 1", 1, 1.0))
        .constraint(Constraint::lower_bound("z >= 0", 2, 0.0))
        .constraint(Constraint::upper_bound("z <= 1", 2, 1.0))
        .bounds(|x| vec![(0.0, x[0].clamp(0.0, 1.0))])
        .multistart(true);

    MultilevelProblem::new("tilahun", 3, vec![l1, l2, l3])
        .and_then(|p| p.with_level_params(&[LevelParams::new(5, 1, 0.2); 2]))
        .and_then(|p| p.with_variable_names(names(&["x", "y", "z"])))
        .expect("tilahun problem is well formed")
        .with_known_optimum(KnownOptimum {
            point: vec![0.5, 0.0, 0.5],
            leader_value: -0.5,
            note: "the final level raises z up to x".into(),
        })
}

/// Leader maximizes `x`, follower minimizes the same `x` over `[lo, hi]`.
/// The follower always has the last word, so the solution is `lo`.
pub fn make_shared_dof_toy(lo: f64, hi: f64) -> MultilevelProblem {
    let l1 = LevelSpec::new(1, Sense::Maximize, Function::linear(vec![(0, 1.0)], 0.0), vec![0]);
    let l2 = LevelSpec::new(2, Sense::Minimize, Function::linear(vec![(0, 1.0)], 0.0), vec![0])
        .constraint(Constraint::lower_bound("x >= l", 0, lo))
        .constraint(Constraint::upper_bound("x <= u", 0, hi));
    MultilevelProblem::new("shared_dof_toy", 1, vec![l1, l2])
        .and_then(|p| p.with_level_params(&[LevelParams::new(4, 1, 1.0)]))
        .and_then(|p| p.with_variable_names(names(&["x"])))
        .expect("toy problem is well formed")
        .with_known_optimum(KnownOptimum {
            point: vec![lo],
            leader_value: lo,
            note: "follower optimum".into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::{solve_full, SolverSettings};
    use crate::problem::DecisionVector;

    #[test]
    fn sinha_reported_point() {
        let p = make_sinha();
        let x = DecisionVector::new(vec![2.25, 0.0, 0.0, 0.25]).unwrap();
        assert!((p.objective_value(1, &x).unwrap() + 16.25).abs() < 1e-12);
        for l in 1..=3 {
            assert!(p.feasibility_report(l, &x, 1e-9).unwrap().feasible);
        }
        assert!(p.levels().iter().all(|l| l.constraints.len() == 11));
    }

    #[test]
    fn tilahun_literature_point_is_not_a_follower_optimum() {
        let p = make_tilahun();
        let reported = DecisionVector::new(vec![0.5, 0.0, 0.0095]).unwrap();
        assert!(p.is_feasible_all(reported.as_slice(), 1e-9));
        let r = solve_full(&p, &reported, &SolverSettings::default()).unwrap();
        assert!(r.is_solved());
        assert!((r.point[2] - 0.5).abs() < 1e-6, "{:?}", r.point);
        assert!(p.objective_value(3, &r.point).unwrap() < p.objective_value(3, &reported).unwrap());
    }

    #[test]
    fn tilahun_metadata_is_feasible() {
        let p = make_tilahun();
        let k = p.known_optimum().unwrap();
        assert!(p.is_feasible_all(&k.point, 1e-9));
    }
}
