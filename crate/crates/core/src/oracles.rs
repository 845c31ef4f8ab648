//! Independent reference solutions.
//!
//! Closed-form reactions and equilibrium of the toll game, the monotone
//! projection solving the norm chain, exhaustive backward induction over
//! per-level grids, and a grid scan of the AIC problem.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{Constraint, DecisionVector, MultilevelProblem};
use crate::problems::{obstacle_margins, AicScenario};

/// Share of the first fleet on the first tolled segment.
pub fn toll_reaction_p1(t1: f64) -> f64 {
    if t1 >= 2.0 {
        0.0
    } else if t1 <= -2.0 {
        1.0
    } else {
        (2.0 - t1) / 4.0
    }
}

/// Share of the second fleet on the second tolled segment.
pub fn toll_reaction_p2(p1: f64, t2: f64, d: f64) -> f64 {
    if d + 2.0 - 2.0 * p1 <= t2 {
        0.0
    } else if d - 2.0 + 2.0 * p1 >= t2 {
        1.0 - p1
    } else {
        (2.0 + d - 2.0 * p1 - t2) / 4.0
    }
}

/// Leader revenue when both fleets respond optimally.
pub fn toll_revenue(t1: f64, t2: f64, d: f64) -> f64 {
    let p1 = toll_reaction_p1(t1);
    p1 * t1 + toll_reaction_p2(p1, t2, d) * t2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TollEquilibrium {
    pub t1: f64,
    pub t2: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub leader_value: f64,
    /// Raising `t1` keeps the leader value.
    pub t1_free: bool,
    /// Raising `t2` keeps the leader value.
    pub t2_free: bool,
}

/// Box used to close the unbounded toll regions.
const TOLL_BOX: f64 = 1e3;

/// `a . t <= b`
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    a: [f64; 2],
    b: f64,
}

fn hp(a1: f64, a2: f64, b: f64) -> HalfPlane {
    HalfPlane { a: [a1, a2], b }
}

/// `R(t) = c . t + q11 t1^2 + q12 t1 t2 + q22 t2^2`
#[derive(Debug, Clone, Copy)]
struct Quadratic {
    c: [f64; 2],
    q11: f64,
    q12: f64,
    q22: f64,
}

impl Quadratic {
    fn grad(&self, t: [f64; 2]) -> [f64; 2] {
        [
            self.c[0] + 2.0 * self.q11 * t[0] + self.q12 * t[1],
            self.c[1] + self.q12 * t[0] + 2.0 * self.q22 * t[1],
        ]
    }

    fn curvature(&self, d: [f64; 2]) -> f64 {
        2.0 * (self.q11 * d[0] * d[0] + self.q12 * d[0] * d[1] + self.q22 * d[1] * d[1])
    }
}

fn inside(planes: &[HalfPlane], t: [f64; 2]) -> bool {
    planes
        .iter()
        .all(|h| h.a[0] * t[0] + h.a[1] * t[1] <= h.b + 1e-9 * (1.0 + h.b.abs()))
}

/// Candidate maximizers of `r` over the polygon: points on every edge where
/// the restriction is stationary, edge endpoints, and the interior
/// stationary point.
fn polygon_candidates(planes: &[HalfPlane], r: &Quadratic) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for (i, h) in planes.iter().enumerate() {
        let norm2 = h.a[0] * h.a[0] + h.a[1] * h.a[1];
        if norm2 == 0.0 {
            continue;
        }
        let p0 = [h.a[0] * h.b / norm2, h.a[1] * h.b / norm2];
        let d = [-h.a[1], h.a[0]];
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (j, o) in planes.iter().enumerate() {
            if i == j {
                continue;
            }
            let ad = o.a[0] * d[0] + o.a[1] * d[1];
            let slack = o.b - (o.a[0] * p0[0] + o.a[1] * p0[1]);
            if ad.abs() < 1e-14 {
                if slack < -1e-9 {
                    lo = f64::INFINITY;
                }
            } else if ad > 0.0 {
                hi = hi.min(slack / ad);
            } else {
                lo = lo.max(slack / ad);
            }
        }
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            continue;
        }
        let at = |s: f64| [p0[0] + s * d[0], p0[1] + s * d[1]];
        out.push(at(lo));
        out.push(at(hi));
        let k = r.curvature(d);
        if k.abs() > 1e-14 {
            let g = r.grad(p0);
            let s = -(g[0] * d[0] + g[1] * d[1]) / k;
            if s > lo && s < hi {
                out.push(at(s));
            }
        }
    }
    let det = 4.0 * r.q11 * r.q22 - r.q12 * r.q12;
    if det.abs() > 1e-14 {
        let t = [
            (-r.c[0] * 2.0 * r.q22 + r.c[1] * r.q12) / det,
            (-r.c[1] * 2.0 * r.q11 + r.c[0] * r.q12) / det,
        ];
        if inside(planes, t) {
            out.push(t);
        }
    }
    out
}

/// Global Stackelberg equilibrium of the toll game with `t1, t2 >= 0`.
///
/// Each fleet's reaction has three affine branches, so the toll plane splits
/// into at most nine polygons on which revenue is a quadratic. Ties in
/// revenue resolve to the smallest `t1`, then the smallest `t2`.
pub fn toll_equilibrium(d: f64) -> TollEquilibrium {
    // p1 = a0 + a1 t1 on each first-fleet branch, with its region.
    let p1_branches = [
        (0.0, 0.0, hp(-1.0, 0.0, -2.0)),
        (0.5, -0.25, hp(1.0, 0.0, 2.0)),
        (1.0, 0.0, hp(1.0, 0.0, -2.0)),
    ];
    // p2 = g0 + g1 p1 + g2 t2 on each second-fleet branch.
    let p2_branches = [(0.0, 0.0, 0.0), (1.0, -1.0, 0.0), ((2.0 + d) / 4.0, -0.5, -0.25)];

    let mut candidates = Vec::new();
    for (bi, &(a0, a1, region1)) in p1_branches.iter().enumerate() {
        for (bj, &(g0, g1, g2)) in p2_branches.iter().enumerate() {
            let mut planes = vec![
                hp(-1.0, 0.0, 0.0),
                hp(0.0, -1.0, 0.0),
                hp(1.0, 0.0, TOLL_BOX),
                hp(0.0, 1.0, TOLL_BOX),
                region1,
            ];
            if bi == 1 {
                planes.push(hp(-1.0, 0.0, 2.0));
            }
            let hi = d + 2.0 - 2.0 * a0;
            let lo = d - 2.0 + 2.0 * a0;
            match bj {
                0 => planes.push(hp(-2.0 * a1, -1.0, -hi)),
                1 => planes.push(hp(-2.0 * a1, 1.0, lo)),
                _ => {
                    planes.push(hp(2.0 * a1, -1.0, -lo));
                    planes.push(hp(2.0 * a1, 1.0, hi));
                }
            }
            let h0 = g0 + g1 * a0;
            let r = Quadratic {
                c: [a0, h0],
                q11: a1,
                q12: g1 * a1,
                q22: g2,
            };
            candidates.extend(polygon_candidates(&planes, &r));
        }
    }

    let clean = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    let scored: Vec<([f64; 2], f64)> = candidates
        .into_iter()
        .map(|t| [clean(t[0]).max(0.0), clean(t[1]).max(0.0)])
        .map(|t| (t, toll_revenue(t[0], t[1], d)))
        .collect();
    let best = scored.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * (1.0 + best.abs());
    let [t1, t2] = scored
        .iter()
        .filter(|c| c.1 >= best - tol)
        .map(|c| c.0)
        .min_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])))
        .expect("toll candidate set is never empty");

    let keeps = |a: f64, b: f64| toll_revenue(a, b, d) >= best - tol;
    let p1 = toll_reaction_p1(t1);
    let p2 = toll_reaction_p2(p1, t2, d);
    TollEquilibrium {
        t1,
        t2,
        p1,
        p2,
        p3: 1.0 - p1 - p2,
        leader_value: toll_revenue(t1, t2, d),
        t1_free: keeps(t1 + 1.0, t2) && keeps(t1 + 100.0, t2),
        t2_free: keeps(t1, t2 + 1.0) && keeps(t1, t2 + 100.0),
    }
}

/// Euclidean projection of `w` onto nonincreasing vectors (pool adjacent
/// violators).
pub fn pava_nonincreasing(w: &[f64]) -> Vec<f64> {
    // (sum, count) per pooled block
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(w.len());
    for &v in w {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 >= s1 / c1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, c0 + c1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && hi >= lo, "bad grid [{lo}, {hi}] step {step}");
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceOptions {
    /// Largest accepted product of all grid sizes.
    pub budget: u128,
    pub feasibility_tol: f64,
    /// Objective values closer than this count as ties, broken in the
    /// leader's favor.
    pub tie_tol: f64,
    pub parallel: bool,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self {
            budget: 1_000_000_000,
            feasibility_tol: 1e-9,
            tie_tol: 1e-12,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceSolution {
    pub point: DecisionVector,
    /// Leader objective in its own sense.
    pub leader_value: f64,
}

struct Scan<'p> {
    problem: &'p MultilevelProblem,
    grids: &'p [Vec<Vec<f64>>],
    constraints: Vec<Vec<&'p Constraint>>,
    opts: BruteForceOptions,
}

/// Best point found at one level: (point, canonical own objective, canonical leader objective).
type Pick = (Vec<f64>, f64, f64);

impl Scan<'_> {
    fn combos(&self, level: usize) -> usize {
        self.grids[level - 1].iter().map(Vec::len).product()
    }

    fn write(&self, level: usize, mut k: usize, x: &mut [f64]) {
        let block = &self.problem.levels()[level - 1].block;
        for (g, &i) in self.grids[level - 1].iter().zip(block) {
            x[i] = g[k % g.len()];
            k /= g.len();
        }
    }

    fn score(&self, level: usize, y: &[f64]) -> Option<(f64, f64)> {
        let tol = self.opts.feasibility_tol;
        let ok = self.constraints[level - 1].iter().all(|c| {
            let v = c.function.eval(y);
            !v.is_nan() && c.violation(v) <= tol
        });
        if !ok {
            return None;
        }
        let levels = self.problem.levels();
        let own = levels[level - 1].sense.sign() * levels[level - 1].objective.eval(y);
        let lead = levels[0].sense.sign() * levels[0].objective.eval(y);
        (own.is_finite() && lead.is_finite()).then_some((own, lead))
    }

    fn better(&self, cand: (f64, f64), best: &Option<Pick>) -> bool {
        match best {
            None => true,
            Some((_, v, lead)) => {
                let tie = self.opts.tie_tol * (1.0 + v.abs());
                cand.0 < v - tie || ((cand.0 - v).abs() <= tie && cand.1 < *lead)
            }
        }
    }

    /// Optimal response of `level..=L` with the upper blocks already written into `x`.
    fn respond(&self, level: usize, x: &mut Vec<f64>) -> Option<Pick> {
        let mut best: Option<Pick> = None;
        for k in 0..self.combos(level) {
            self.write(level, k, x);
            self.consider(level, k, x, &mut best);
        }
        best
    }

    fn consider(&self, level: usize, k: usize, x: &mut Vec<f64>, best: &mut Option<Pick>) {
        if level == self.problem.num_levels() {
            if let Some(s) = self.score(level, x) {
                if self.better(s, best) {
                    *best = Some((x.clone(), s.0, s.1));
                }
            }
            return;
        }
        if let Some((y, _, _)) = self.respond(level + 1, x) {
            if let Some(s) = self.score(level, &y) {
                if self.better(s, best) {
                    *best = Some((y, s.0, s.1));
                }
            }
        }
        // lower levels overwrote their blocks; restore ours for the caller
        self.write(level, k, x);
    }
}

/// Exact backward induction over per-level grids.
///
/// `grids[l - 1][j]` lists the values tried for the `j`-th coordinate of
/// level `l`'s block. Each level's choice is scored after every lower level
/// has responded, and only responses inside `C^l` count. Ties go to the
/// point that is best for the leader. Returns `None` when no grid point is
/// feasible at every level.
pub fn brute_force_nested(
    problem: &MultilevelProblem,
    grids: &[Vec<Vec<f64>>],
    opts: &BruteForceOptions,
) -> Result<Option<BruteForceSolution>> {
    if grids.len() != problem.num_levels() {
        return Err(Error::Argument(format!(
            "{} grids for {} levels",
            grids.len(),
            problem.num_levels()
        )));
    }
    let mut requested: u128 = 1;
    for (level, g) in problem.levels().iter().zip(grids) {
        if g.len() != level.block.len() {
            return Err(Error::Argument(format!(
                "level {} has {} block coordinates but {} grids",
                level.index,
                level.block.len(),
                g.len()
            )));
        }
        for axis in g {
            if axis.is_empty() {
                return Err(Error::Argument(format!("empty grid at level {}", level.index)));
            }
            requested = requested.saturating_mul(axis.len() as u128);
        }
    }
    if requested > opts.budget {
        return Err(Error::GridBudget {
            requested,
            budget: opts.budget,
        });
    }
    let constraints = (1..=problem.num_levels())
        .map(|l| problem.level_constraints(l))
        .collect::<Result<Vec<_>>>()?;
    let scan = Scan {
        problem,
        grids,
        constraints,
        opts: *opts,
    };

    let top = |k: usize| {
        let mut x = vec![0.0; problem.dim()];
        scan.write(1, k, &mut x);
        let mut best = None;
        scan.consider(1, k, &mut x, &mut best);
        best
    };
    let n_top = scan.combos(1);
    let picks: Vec<Option<Pick>> = if opts.parallel {
        (0..n_top).into_par_iter().map(top).collect()
    } else {
        (0..n_top).map(top).collect()
    };
    let mut best: Option<Pick> = None;
    for p in picks.into_iter().flatten() {
        if scan.better((p.1, p.2), &best) {
            best = Some(p);
        }
    }
    Ok(best.map(|(x, v, _)| BruteForceSolution {
        point: DecisionVector::from_vec_unchecked(x),
        leader_value: problem.levels()[0].sense.sign() * v,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AicGridSolution {
    /// Smallest nonnegative clearance `min_i g(tau^i)` found on the grid.
    pub min_margin: f64,
    /// Grid points `(x1, x2, T)` with clearance within the band of the minimum.
    pub near_minimal: Vec<[f64; 3]>,
    /// The point of `near_minimal` with the smallest `x1`.
    pub leader_best: [f64; 3],
}

/// Scans the feasible disk of an AIC scenario. The final level's response is
/// `T(x) = min_i g(tau^i)` in closed form, the second level's optimal set is
/// taken as every point whose clearance is within `band` of the smallest
/// one, and the leader picks the smallest `x1` from it.
pub fn aic_grid_oracle(scenario: &AicScenario, step: f64, band: f64) -> Result<AicGridSolution> {
    scenario.validate()?;
    if !(step > 0.0) || !(band >= 0.0) {
        return Err(Error::Argument("grid step must be > 0 and band >= 0".into()));
    }
    let [c1, c2] = scenario.region_center;
    let rho = scenario.region_radius;
    let axis1 = uniform_grid(c1 - rho, c1 + rho, step);
    let axis2 = uniform_grid(c2 - rho, c2 + rho, step);
    let mut points = Vec::new();
    for &a in &axis1 {
        for &b in &axis2 {
            if (a - c1).powi(2) + (b - c2).powi(2) > rho * rho {
                continue;
            }
            let t = obstacle_margins(scenario, [a, b])
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if t >= 0.0 {
                points.push([a, b, t]);
            }
        }
    }
    let min_margin = points.iter().map(|p| p[2]).fold(f64::INFINITY, f64::min);
    if !min_margin.is_finite() {
        return Err(Error::NoFeasibleStart { violation: f64::NAN });
    }
    let near_minimal: Vec<[f64; 3]> = points.into_iter().filter(|p| p[2] <= min_margin + band).collect();
    let leader_best = *near_minimal
        .iter()
        .min_by(|a, b| a[0].total_cmp(&b[0]))
        .expect("near-minimal set contains the minimizer");
    Ok(AicGridSolution {
        min_margin,
        near_minimal,
        leader_best,
    })
}
