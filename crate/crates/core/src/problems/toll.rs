//! Trilevel nested toll-setting game.
//!
//! A toll setter prices two segments (`t1`, `t2`). A first fleet decides the
//! share `p1` that takes the first tolled segment; a second fleet splits the
//! rest into `p2` (second tolled segment) and `p3` (free segment with extra
//! cost `D`). Congestion cost grows linearly with the share on a segment.

use crate::oracles::toll_equilibrium;
use crate::problem::{Constraint, Function, KnownOptimum, LevelParams, LevelSpec, MultilevelProblem, Sense};

use super::names;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TollScenario {
    /// Extra cost on the free segment; negative values act as a subsidy.
    pub d: f64,
    /// Congestion coefficient. The catalog uses 1.
    pub sigma: f64,
}

impl TollScenario {
    pub fn new(d: f64) -> Self {
        Self { d, sigma: 1.0 }
    }
}

fn table_params() -> [LevelParams; 2] {
    [LevelParams::new(7, 1, 0.15); 2]
}

fn known(scenario: &TollScenario, reduced: bool) -> KnownOptimum {
    let eq = toll_equilibrium(scenario.d);
    let mut point = vec![eq.t1, eq.t2, eq.p1, eq.p2];
    if !reduced {
        point.push(eq.p3);
    }
    let mut free = Vec::new();
    if eq.t1_free {
        free.push("any larger t1");
    }
    if eq.t2_free {
        free.push("any larger t2");
    }
    let note = if free.is_empty() {
        "closed-form equilibrium".to_string()
    } else {
        format!("closed-form equilibrium; {} attains the same value", free.join(", "))
    };
    KnownOptimum {
        point,
        leader_value: eq.leader_value,
        note,
    }
}

fn revenue() -> Function {
    Function::new(|x| x[2] * x[0] + x[3] * x[1]).with_gradient(|x, g| {
        g.fill(0.0);
        g[0] = x[2];
        g[1] = x[3];
        g[2] = x[0];
        g[3] = x[1];
    })
}

/// Variables `(t1, t2, p1, p2, p3)` with `p1 + p2 + p3 = 1` imposed at level 3.
pub fn make_nested_toll(scenario: &TollScenario) -> MultilevelProblem {
    let d = scenario.d;
    let s = scenario.sigma;

    let l1 = LevelSpec::new(1, Sense::Maximize, revenue(), vec![0, 1])
        .constraint(Constraint::lower_bound("t1 >= 0", 0, 0.0))
        .constraint(Constraint::lower_bound("t2 >= 0", 1, 0.0));

    let f2 = Function::new(move |x| x[2] * (s * x[2] + x[0]) + s * (x[3] + x[4]).powi(2)).with_gradient(move |x, g| {
        g.fill(0.0);
        let rest = 2.0 * s * (x[3] + x[4]);
        g[0] = x[2];
        g[2] = 2.0 * s * x[2] + x[0];
        g[3] = rest;
        g[4] = rest;
    });
    let l2 = LevelSpec::new(2, Sense::Minimize, f2, vec![2])
        .constraint(Constraint::lower_bound("p1 >= 0", 2, 0.0))
        .constraint(Constraint::upper_bound("p1 <= 1", 2, 1.0));

    let f3 = Function::new(move |x| x[3] * (s * x[3] + x[1]) + x[4] * (s * x[4] + d)).with_gradient(move |x, g| {
        g.fill(0.0);
        g[1] = x[3];
        g[3] = 2.0 * s * x[3] + x[1];
        g[4] = 2.0 * s * x[4] + d;
    });
    let l3 = LevelSpec::new(3, Sense::Minimize, f3, vec![3, 4])
        .constraint(Constraint::lower_bound("p2 >= 0", 3, 0.0))
        .constraint(Constraint::upper_bound("p2 <= 1", 3, 1.0))
        .constraint(Constraint::lower_bound("p3 >= 0", 4, 0.0))
        .constraint(Constraint::upper_bound("p3 <= 1", 4, 1.0))
        .constraint(Constraint::equality(
            "p1 + p2 + p3 = 1",
            Function::linear(vec![(2, 1.0), (3, 1.0), (4, 1.0)], -1.0),
        ));

    MultilevelProblem::new(format!("nested_toll(D={d})"), 5, vec![l1, l2, l3])
        .and_then(|p| p.with_level_params(&table_params()))
        .and_then(|p| p.with_variable_names(names(&["t1", "t2", "p1", "p2", "p3"])))
        .expect("toll problem is well formed")
        .with_known_optimum(known(scenario, false))
}

/// Variables `(t1, t2, p1, p2)` with `p3 = 1 - p1 - p2` substituted, tolls
/// boxed to `[0, 10]` and no equality constraints.
pub fn make_nested_toll_bounded(scenario: &TollScenario) -> MultilevelProblem {
    let d = scenario.d;
    let s = scenario.sigma;

    let l1 = LevelSpec::new(1, Sense::Maximize, revenue(), vec![0, 1])
        .constraint(Constraint::lower_bound("t1 >= 0", 0, 0.0))
        .constraint(Constraint::upper_bound("t1 <= 10", 0, 10.0))
        .constraint(Constraint::lower_bound("t2 >= 0", 1, 0.0))
        .constraint(Constraint::upper_bound("t2 <= 10", 1, 10.0));

    let f2 = Function::new(move |x| x[2] * (s * x[2] + x[0]) + s * (1.0 - x[2]).powi(2)).with_gradient(move |x, g| {
        g.fill(0.0);
        g[0] = x[2];
        g[2] = 2.0 * s * x[2] + x[0] - 2.0 * s * (1.0 - x[2]);
    });
    let l2 = LevelSpec::new(2, Sense::Minimize, f2, vec![2])
        .constraint(Constraint::lower_bound("p1 >= 0", 2, 0.0))
        .constraint(Constraint::upper_bound("p1 <= 1", 2, 1.0));

    let f3 = Function::new(move |x| {
        let p3 = 1.0 - x[2] - x[3];
        x[3] * (s * x[3] + x[1]) + p3 * (s * p3 + d)
    })
    .with_gradient(move |x, g| {
        g.fill(0.0);
        let p3 = 1.0 - x[2] - x[3];
        let dp3 = -(2.0 * s * p3 + d);
        g[1] = x[3];
        g[2] = dp3;
        g[3] = 2.0 * s * x[3] + x[1] + dp3;
    });
    let l3 = LevelSpec::new(3, Sense::Minimize, f3, vec![3])
        .constraint(Constraint::lower_bound("p2 >= 0", 3, 0.0))
        .constraint(Constraint::linear_le("p1 + p2 <= 1", vec![(2, 1.0), (3, 1.0)], 1.0));

    MultilevelProblem::new(format!("nested_toll_bounded(D={d})"), 4, vec![l1, l2, l3])
        .and_then(|p| p.with_level_params(&table_params()))
        .and_then(|p| p.with_variable_names(names(&["t1", "t2", "p1", "p2"])))
        .expect("bounded toll problem is well formed")
        .with_known_optimum(known(scenario, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ConstraintKind, DecisionVector};

    fn dv(v: &[f64]) -> DecisionVector {
        DecisionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn structure() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let eqs: Vec<usize> = p
            .levels()
            .iter()
            .flat_map(|l| l.constraints.iter().map(move |c| (l.index, c.kind)))
            .filter(|(_, k)| *k == ConstraintKind::Equality)
            .map(|(l, _)| l)
            .collect();
        assert_eq!(eqs, vec![3]);
        assert_eq!(p.block(1).unwrap(), &[0, 1]);
        assert_eq!(p.block(2).unwrap(), &[2]);
        assert_eq!(p.block(3).unwrap(), &[3, 4]);

        let b = make_nested_toll_bounded(&TollScenario::new(6.0));
        assert!(b.all_constraints().iter().all(|c| c.kind == ConstraintKind::Inequality));
    }

    #[test]
    fn known_optima() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let k = p.known_optimum().unwrap();
        assert!((k.leader_value - 4.0).abs() < 1e-9);
        let x = dv(&k.point);
        assert!((x[1] - 4.0).abs() < 1e-9 && x[0] >= 2.0 - 1e-9);
        assert!(p.is_feasible_all(x.as_slice(), 1e-9));

        let p = make_nested_toll(&TollScenario::new(-1.5));
        let k = p.known_optimum().unwrap();
        assert!((k.leader_value - 0.25).abs() < 1e-9);
        assert!((k.point[0] - 1.0).abs() < 1e-9 && (k.point[2] - 0.25).abs() < 1e-9);
        assert!((k.point[4] - 0.75).abs() < 1e-9);
    }

    #[test]
    fn leader_value_at_table_point() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let x = dv(&[2.387, 4.032, 0.006, 0.989, 0.005]);
        assert!((p.objective_value(1, &x).unwrap() + 4.001).abs() < 2e-3);
    }

    #[test]
    fn box_violations() {
        let p = make_nested_toll(&TollScenario::new(6.0));
        let r = p.feasibility_report(2, &dv(&[0.0, 0.0, 1.1, 0.0, 0.0]), 1e-6).unwrap();
        assert!(!r.feasible);
        assert!((r.worst().unwrap().value + 0.1).abs() < 1e-12);
        assert!(p.is_feasible(3, &[0.0, 0.0, 0.0, 1.0, 0.0], 0.0));

        let b = make_nested_toll_bounded(&TollScenario::new(6.0));
        assert!(!b.is_feasible(1, &[0.0, 11.0, 0.0, 0.0], 1e-6));
    }

    #[test]
    fn reduced_form_agrees_with_full_form() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &d in &[6.0, -1.5, 0.0] {
            let full = make_nested_toll(&TollScenario::new(d));
            let red = make_nested_toll_bounded(&TollScenario::new(d));
            for _ in 0..200 {
                let t1 = rng.gen_range(0.0..10.0);
                let t2 = rng.gen_range(0.0..10.0);
                let p1: f64 = rng.gen_range(0.0..1.0);
                let p2 = rng.gen_range(0.0..=(1.0 - p1));
                let xf = dv(&[t1, t2, p1, p2, 1.0 - p1 - p2]);
                let xr = dv(&[t1, t2, p1, p2]);
                for l in 1..=3 {
                    let a = full.raw_objective(l, &xf).unwrap();
                    let b = red.raw_objective(l, &xr).unwrap();
                    assert!((a - b).abs() < 1e-9, "level {l}: {a} vs {b}");
                }
            }
        }
    }
}
