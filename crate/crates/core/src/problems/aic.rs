//! Adversarial initial condition for a fixed trajectory policy.
//!
//! Variables `(x1, x2, T)`. The leader wants the start `x` as far from the
//! finish line as possible, the second level pushes the trajectory towards
//! the obstacle by minimizing the margin `T`, and the final level sets `T`
//! to the smallest obstacle clearance `g(tau^i) = |o - tau^i|^2 - r^2` over
//! the trajectory generated from `x`.

use crate::error::{Error, Result};
use crate::problem::{Constraint, Function, LevelParams, LevelSpec, MultilevelProblem, Sense};

use super::names;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Steps `delta` along `x1`, keeps `x2`.
    Linear,
    /// Steps `delta` along `x1` and follows `x2 + A sin(B x1)`.
    Sinusoidal { amplitude: f64, frequency: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub delta: f64,
}

impl PolicySpec {
    pub fn linear(delta: f64) -> Self {
        Self {
            kind: PolicyKind::Linear,
            delta,
        }
    }

    pub fn sinusoidal(delta: f64, amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: PolicyKind::Sinusoidal { amplitude, frequency },
            delta,
        }
    }

    /// One policy step.
    pub fn step(&self, p: [f64; 2]) -> [f64; 2] {
        let x1 = p[0] + self.delta;
        match self.kind {
            PolicyKind::Linear => [x1, p[1]],
            PolicyKind::Sinusoidal { amplitude, frequency } => [
                x1,
                p[1] + amplitude * ((frequency * x1).sin() - (frequency * p[0]).sin()),
            ],
        }
    }

    /// Derivative of point `i` of the trajectory with respect to `x1`; the
    /// derivative with respect to `x2` is always `(0, 1)`.
    fn d_point_d_x1(&self, x1: f64, i: usize) -> [f64; 2] {
        match self.kind {
            PolicyKind::Linear => [1.0, 0.0],
            PolicyKind::Sinusoidal { amplitude, frequency } => {
                let xi = x1 + i as f64 * self.delta;
                [
                    1.0,
                    amplitude * frequency * ((frequency * xi).cos() - (frequency * x1).cos()),
                ]
            }
        }
    }
}

/// The first `n` points of the trajectory starting at `x`.
pub fn generate_trajectory(policy: &PolicySpec, x: [f64; 2], n: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(n);
    let mut p = x;
    for i in 0..n {
        if i > 0 {
            p = policy.step(p);
        }
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AicScenario {
    pub obstacle: [f64; 2],
    pub obstacle_radius: f64,
    pub region_center: [f64; 2],
    pub region_radius: f64,
    pub trajectory_len: usize,
    pub finish_line: f64,
    pub policy: PolicySpec,
}

impl AicScenario {
    /// Default setup with the given obstacle center and linear policy.
    pub fn linear(obstacle: [f64; 2]) -> Self {
        Self {
            obstacle,
            obstacle_radius: 2.0,
            region_center: [5.0, 5.0],
            region_radius: 5.0,
            trajectory_len: 20,
            finish_line: 20.0,
            policy: PolicySpec::linear(1.0),
        }
    }

    /// Default setup with the sinusoidal policy (`A = 0.5`, `B = 3`).
    pub fn sinusoidal(obstacle: [f64; 2]) -> Self {
        Self {
            policy: PolicySpec::sinusoidal(1.0, 0.5, 3.0),
            ..Self::linear(obstacle)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.obstacle_radius > 0.0) || !(self.region_radius > 0.0) {
            return Err(Error::Argument("AIC radii must be positive".into()));
        }
        if self.trajectory_len == 0 {
            return Err(Error::Argument("trajectory needs at least one point".into()));
        }
        if !(self.policy.delta > 0.0) {
            return Err(Error::Argument("policy step must be positive".into()));
        }
        Ok(())
    }
}

/// `g(tau^i)` for every trajectory point generated from `x`.
pub fn obstacle_margins(scenario: &AicScenario, x: [f64; 2]) -> Vec<f64> {
    let [o1, o2] = scenario.obstacle;
    let r2 = scenario.obstacle_radius * scenario.obstacle_radius;
    generate_trajectory(&scenario.policy, x, scenario.trajectory_len)
        .into_iter()
        .map(|[a, b]| (o1 - a).powi(2) + (o2 - b).powi(2) - r2)
        .collect()
}

fn margin_constraint(s: AicScenario, i: usize) -> Constraint {
    let value = move |x: &[f64]| {
        let p = generate_trajectory(&s.policy, [x[0], x[1]], i + 1)[i];
        (s.obstacle[0] - p[0]).powi(2) + (s.obstacle[1] - p[1]).powi(2) - s.obstacle_radius * s.obstacle_radius - x[2]
    };
    let gradient = move |x: &[f64], g: &mut [f64]| {
        let p = generate_trajectory(&s.policy, [x[0], x[1]], i + 1)[i];
        let e1 = -2.0 * (s.obstacle[0] - p[0]);
        let e2 = -2.0 * (s.obstacle[1] - p[1]);
        let dp = s.policy.d_point_d_x1(x[0], i);
        g[0] = e1 * dp[0] + e2 * dp[1];
        g[1] = e2;
        g[2] = -1.0;
    };
    Constraint::inequality(format!("g(tau^{i}) >= T"), Function::new(value).with_gradient(gradient))
}

pub fn make_aic(scenario: &AicScenario) -> Result<MultilevelProblem> {
    scenario.validate()?;
    let s = *scenario;
    let d = s.finish_line;

    let f1 = Function::new(move |x| d - x[0]).with_gradient(|_, g| {
        g.fill(0.0);
        g[0] = -1.0;
    });
    let l1 = LevelSpec::new(1, Sense::Maximize, f1, vec![0, 1]);

    let [c1, c2] = s.region_center;
    let rho2 = s.region_radius * s.region_radius;
    let disk = Function::new(move |x| rho2 - (x[0] - c1).powi(2) - (x[1] - c2).powi(2)).with_gradient(move |x, g| {
        g.fill(0.0);
        g[0] = -2.0 * (x[0] - c1);
        g[1] = -2.0 * (x[1] - c2);
    });
    let l2 = LevelSpec::new(2, Sense::Minimize, Function::linear(vec![(2, 1.0)], 0.0), vec![0, 1])
        .constraint(Constraint::inequality("start inside region", disk));

    let l3 = LevelSpec::new(3, Sense::Maximize, Function::linear(vec![(2, 1.0)], 0.0), vec![2])
        .constraint(Constraint::lower_bound("T >= 0", 2, 0.0))
        .constraints((0..s.trajectory_len).map(|i| margin_constraint(s, i)));

    let p = MultilevelProblem::new("aic", 3, vec![l1, l2, l3])?
        .with_level_params(&[LevelParams::new(2, 1, 3.0), LevelParams::new(10, 1, 3.0)])?
        .with_variable_names(names(&["x1", "x2", "T"]))?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::DecisionVector;

    #[test]
    fn linear_trajectory() {
        let t = generate_trajectory(&PolicySpec::linear(1.0), [0.4, 3.0], 20);
        assert_eq!(t.len(), 20);
        for (i, p) in t.iter().enumerate() {
            assert!((p[0] - (0.4 + i as f64)).abs() < 1e-12);
            assert_eq!(p[1], 3.0);
        }
    }

    #[test]
    fn sinusoidal_trajectory_stays_in_band() {
        let pol = PolicySpec::sinusoidal(1.0, 0.5, 3.0);
        for &x in &[[0.0, 0.0], [0.4, 3.0], [-2.7, 8.1]] {
            for p in generate_trajectory(&pol, x, 50) {
                assert!((p[1] - x[1]).abs() <= 1.0 + 1e-12);
            }
        }
        let flat = generate_trajectory(&PolicySpec::sinusoidal(1.0, 0.0, 3.0), [0.4, 3.0], 20);
        assert_eq!(flat, generate_trajectory(&PolicySpec::linear(1.0), [0.4, 3.0], 20));
    }

    #[test]
    fn objectives_and_region() {
        let p = make_aic(&AicScenario::linear([15.0, 5.0])).unwrap();
        let x = DecisionVector::new(vec![0.417, 3.0, 0.0]).unwrap();
        assert!((p.raw_objective(1, &x).unwrap() - 19.583).abs() < 1e-12);
        let x = DecisionVector::new(vec![0.42, 3.0, 0.0]).unwrap();
        assert!(p.is_feasible(2, x.as_slice(), 1e-6));
        assert!(!p.is_feasible(2, &[0.0, 0.0, 0.0], 1e-6));
        assert_eq!(p.block(2).unwrap(), &[0, 1]);
    }

    #[test]
    fn margins_near_zero_when_column_meets_obstacle() {
        let s = AicScenario::linear([15.0, 5.0]);
        let m = obstacle_margins(&s, [0.0, 3.0]);
        assert_eq!(m.len(), 20);
        let min = m.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-12);
        let m = obstacle_margins(&s, [0.417, 3.0]);
        let min = m.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0 && min < 0.2, "{min}");
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = AicScenario::linear([15.0, 5.0]);
        s.trajectory_len = 0;
        assert!(make_aic(&s).is_err());
        let mut s = AicScenario::linear([15.0, 5.0]);
        s.obstacle_radius = 0.0;
        assert!(make_aic(&s).is_err());
    }
}
