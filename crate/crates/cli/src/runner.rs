//! Experiment execution and on-disk reports.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use mcmo::baselines::{bounded_random_search, iterative_best_response};
use mcmo::engine::{find_feasible_start, run_mcmo, weighted_start, EngineParams, RunHistory};
use mcmo::oracles::{
    aic_grid_oracle, brute_force_nested, pava_nonincreasing, toll_equilibrium, uniform_grid, BruteForceOptions,
};
use mcmo::problems::make_norm_chain;
use mcmo::{DecisionVector, LevelParams, MultilevelProblem};

use crate::catalog::{build, Built, Entry};
use crate::config::{Method, RunConfig, StartMode, Vary};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownJson {
    pub point: Vec<f64>,
    pub leader_value: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub variable_names: Vec<String>,
    pub x_star: Vec<f64>,
    /// Raw objective of every level at `x_star`.
    pub objectives: Vec<f64>,
    pub leader_value: f64,
    pub known_optimum: Option<KnownJson>,
    pub relative_error: Option<f64>,
    pub total_seconds: f64,
    pub iterations: usize,
    pub solve_full_calls: u64,
}

/// `|value - reference| / max(|reference|, 1e-12)`
pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-12)
}

pub fn engine_params(cfg: &RunConfig) -> EngineParams {
    EngineParams {
        maxiter: cfg.maxiter,
        smoothing_window: cfg.window(),
        seed: cfg.seed,
        feasibility_tol: cfg.epsilon,
        solver: cfg.solver,
        parallel: cfg.parallel,
    }
}

pub fn resolve_start(built: &Built, cfg: &RunConfig) -> Result<DecisionVector, CliError> {
    let p = &built.problem;
    let settings = cfg.solver;
    match cfg.start.as_ref().unwrap_or(&built.default_start) {
        StartMode::Point(v) => {
            if v.len() != p.dim() {
                return Err(CliError::Config(format!(
                    "start has {} entries, problem `{}` has dimension {}",
                    v.len(),
                    p.name(),
                    p.dim()
                )));
            }
            DecisionVector::new(v.clone()).map_err(|e| CliError::Config(e.to_string()))
        }
        StartMode::Feasible => Ok(find_feasible_start(p, &settings)?),
        StartMode::Weighted(w) => {
            if w.len() != p.num_levels() {
                return Err(CliError::Config(format!(
                    "weighted start needs {} weights, got {}",
                    p.num_levels(),
                    w.len()
                )));
            }
            Ok(weighted_start(p, w, &settings)?)
        }
    }
}

/// Reference point for a catalog problem.
pub fn oracle_point(built: &Built) -> Result<Vec<f64>, CliError> {
    Ok(match &built.entry {
        Entry::Toll { d, bounded } => {
            let e = toll_equilibrium(*d);
            let mut x = vec![e.t1, e.t2, e.p1, e.p2];
            if !bounded {
                x.push(e.p3);
            }
            x
        }
        Entry::NormChain(w) => pava_nonincreasing(w),
        Entry::Aic(s) => aic_grid_oracle(s, 0.02, 0.05)?.leader_best.to_vec(),
        Entry::Toy { lo, .. } => vec![*lo],
        Entry::Sinha => {
            let g = uniform_grid;
            let grids = [
                vec![g(0.0, 3.0, 0.05), g(0.0, 1.0, 0.05)],
                vec![g(0.0, 1.5, 0.025)],
                vec![g(0.0, 2.0, 0.005)],
            ];
            brute_force(&built.problem, &grids)?
        }
        Entry::Tilahun => {
            let g = uniform_grid;
            let grids = [
                vec![g(0.0, 0.5, 0.01)],
                vec![g(0.0, 1.0, 0.01)],
                vec![g(0.0, 1.0, 0.01)],
            ];
            brute_force(&built.problem, &grids)?
        }
    })
}

fn brute_force(p: &MultilevelProblem, grids: &[Vec<Vec<f64>>]) -> Result<Vec<f64>, CliError> {
    let opts = BruteForceOptions {
        feasibility_tol: 1e-9,
        ..Default::default()
    };
    brute_force_nested(p, grids, &opts)?
        .map(|s| s.point.into_vec())
        .ok_or(CliError::Solver(mcmo::Error::Problem(
            "reference grid has no feasible point".into(),
        )))
}

fn write_history(path: &Path, problem: &MultilevelProblem, h: &RunHistory) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iter".to_string(), "wall_ms".into(), "solve_full_calls".into()];
    header.extend((0..problem.dim()).map(|i| format!("x_{i}")));
    header.extend((1..=problem.num_levels()).map(|l| format!("f_{l}")));
    w.write_record(&header)?;
    for i in 0..h.len() {
        let mut row = vec![
            i.to_string(),
            h.wall_ms[i].to_string(),
            h.solve_full_calls[i].to_string(),
        ];
        row.extend(h.iterates[i].as_slice().iter().map(f64::to_string));
        row.extend(h.objectives[i].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn single_entry_history(problem: &MultilevelProblem, x: DecisionVector, wall_ms: f64) -> Result<RunHistory, CliError> {
    let objectives = problem.all_raw_objectives(&x)?;
    Ok(RunHistory {
        leader_canonical: vec![problem.levels()[0].sense.sign() * objectives[0]],
        objectives: vec![objectives],
        iterates: vec![x],
        wall_ms: vec![wall_ms],
        solve_full_calls: vec![0],
        kept_previous: vec![false],
    })
}

/// Runs one configured experiment and writes `history.csv`, `summary.json`
/// and `config.txt` into the configured output directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<Summary, CliError> {
    let built = build(cfg)?;
    let problem = &built.problem;
    let params = engine_params(cfg);
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.render())?;

    let clock = Instant::now();
    let (history, best) = match cfg.method {
        Method::Mcmo => {
            let start = resolve_start(&built, cfg)?;
            run_mcmo(problem, &start, &params)?
        }
        Method::Ibr => {
            let x = iterative_best_response(problem, cfg.ibr_rounds, cfg.seed, &params.solver)?;
            let h = single_entry_history(problem, x.clone(), clock.elapsed().as_secs_f64() * 1e3)?;
            (h, x)
        }
        Method::BoundedSearch => {
            let bounds = cfg.bounds.clone().or(built.default_bounds.clone()).ok_or_else(|| {
                CliError::Config(format!("problem `{}` needs `bounds` for bounded_search", cfg.problem))
            })?;
            if bounds.len() != problem.dim() {
                return Err(CliError::Config(format!(
                    "{} bounds for dimension {}",
                    bounds.len(),
                    problem.dim()
                )));
            }
            let x = bounded_random_search(problem, &bounds, cfg.search_samples, cfg.search_iters, cfg.seed)?;
            let h = single_entry_history(problem, x.clone(), clock.elapsed().as_secs_f64() * 1e3)?;
            (h, x)
        }
        Method::Oracle => {
            let x = DecisionVector::new(oracle_point(&built)?)?;
            let h = single_entry_history(problem, x.clone(), clock.elapsed().as_secs_f64() * 1e3)?;
            (h, x)
        }
    };
    let total_seconds = clock.elapsed().as_secs_f64();

    write_history(&cfg.out.join("history.csv"), problem, &history)?;
    let objectives = problem.all_raw_objectives(&best)?;
    let known = problem.known_optimum().map(|k| KnownJson {
        point: k.point.clone(),
        leader_value: k.leader_value,
        note: k.note.clone(),
    });
    let summary = Summary {
        problem: problem.name().to_string(),
        method: cfg.method.as_str().to_string(),
        seed: cfg.seed,
        variable_names: problem.variable_names().to_vec(),
        x_star: best.into_vec(),
        leader_value: objectives[0],
        relative_error: known.as_ref().map(|k| relative_error(objectives[0], k.leader_value)),
        objectives,
        known_optimum: known,
        total_seconds,
        iterations: history.len() - 1,
        solve_full_calls: history.solve_full_calls.last().copied().unwrap_or(0),
    };
    fs::write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub levels: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    pub seconds: f64,
    pub solve_full_calls: u64,
    pub calls_per_iteration: f64,
    pub expected_calls_per_iteration: u64,
    pub status: String,
}

/// Weights for a norm chain with `n` levels, cycling through `base`.
fn chain_weights(base: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| base[i % base.len()]).collect()
}

fn timing_problem(cfg: &RunConfig, base: &[f64], levels: usize, samples: usize) -> Result<MultilevelProblem, CliError> {
    let m = cfg.iterations.first().copied().unwrap_or(1);
    let alpha = cfg.step.first().copied().unwrap_or(0.25);
    Ok(make_norm_chain(&chain_weights(base, levels))?
        .with_level_params(&vec![LevelParams::new(samples, m, alpha); levels - 1])?)
}

/// One timed run: wall seconds and total `solve_full` calls.
fn timed_run(problem: &MultilevelProblem, params: &EngineParams) -> Result<(f64, u64), CliError> {
    let start = DecisionVector::zeros(problem.dim());
    let t = Instant::now();
    let (h, _) = run_mcmo(problem, &start, params)?;
    Ok((t.elapsed().as_secs_f64(), *h.solve_full_calls.last().unwrap_or(&0)))
}

/// Wall time and final-level solve counts of norm-chain runs over a grid of
/// depths and sample counts. Each cell reports the fastest of at least
/// `repeats` identical runs, more for cells faster than `timing_budget`.
/// Failed cells are recorded and the sweep goes on.
pub fn sweep_timing(cfg: &RunConfig, workers: usize) -> Result<Vec<TimingRow>, CliError> {
    if cfg.problem != "norm_chain" {
        return Err(CliError::Config("sweep-timing runs on `problem = norm_chain`".into()));
    }
    if cfg.levels.iter().any(|&l| l < 2) || cfg.sweep_samples.iter().any(|&n| n < 1) {
        return Err(CliError::Config("sweep needs levels >= 2 and N >= 1".into()));
    }
    engine_params(cfg)
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let base: Vec<f64> = match cfg.params.get("w") {
        Some(v) => crate::config::parse_list("w", v)?,
        None => vec![3.0, 8.0, 7.0, 7.0, 3.0],
    };
    if base.is_empty() {
        return Err(CliError::Config("`w` must not be empty".into()));
    }
    let cells: Vec<(usize, usize)> = cfg
        .levels
        .iter()
        .flat_map(|&l| cfg.sweep_samples.iter().map(move |&n| (l, n)))
        .collect();
    let m = cfg.iterations.first().copied().unwrap_or(1) as u64;
    let params = engine_params(cfg);
    let mut rows: Vec<TimingRow> = Vec::with_capacity(cells.len());
    let mut problems = Vec::with_capacity(cells.len());
    for &(levels, samples) in &cells {
        let problem = timing_problem(cfg, &base, levels, samples);
        rows.push(TimingRow {
            levels,
            samples,
            seconds: f64::INFINITY,
            solve_full_calls: 0,
            calls_per_iteration: f64::NAN,
            expected_calls_per_iteration: ((samples as u64 + 1) * m).pow(levels as u32 - 1),
            status: match &problem {
                Ok(_) => "ok".into(),
                Err(e) => format!("error: {e}"),
            },
        });
        problems.push(problem.ok());
    }
    // Rounds are interleaved across cells so a slow stretch of the machine
    // hits every cell rather than one. Cheap cells keep repeating until they
    // have `timing_budget` seconds of samples.
    let mut spent = vec![0.0; cells.len()];
    for round in 0.. {
        let active: Vec<bool> = rows
            .iter()
            .zip(&spent)
            .map(|(r, &t)| r.status == "ok" && (round < cfg.repeats.max(1) || t < cfg.timing_budget))
            .collect();
        if !active.contains(&true) {
            break;
        }
        let results: Vec<Option<Result<(f64, u64), CliError>>> = with_workers(workers, || {
            problems
                .par_iter()
                .zip(&active)
                .map(|(p, &on)| p.as_ref().filter(|_| on).map(|p| timed_run(p, &params)))
                .collect()
        })?;
        for ((row, t), result) in rows.iter_mut().zip(spent.iter_mut()).zip(results) {
            match result {
                Some(Ok((seconds, calls))) => {
                    *t += seconds;
                    row.seconds = row.seconds.min(seconds);
                    row.solve_full_calls = calls;
                    row.calls_per_iteration = calls as f64 / cfg.maxiter.max(1) as f64;
                }
                Some(Err(e)) => row.status = format!("error: {e}"),
                None => {}
            }
        }
    }
    for row in rows.iter_mut().filter(|r| r.status != "ok") {
        row.seconds = f64::NAN;
    }
    fs::create_dir_all(&cfg.out)?;
    let mut w = csv::Writer::from_path(cfg.out.join("timing.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub value: f64,
    pub seed: u64,
    /// Leader objective at iterations `0..=maxiter`.
    pub leader: Vec<f64>,
}

/// Leader objective per iteration for each value of `N` or `alpha` (applied
/// to every non-final level) and each seed.
pub fn sweep_convergence(cfg: &RunConfig, workers: usize) -> Result<Vec<ConvergenceRow>, CliError> {
    if cfg.values.is_empty() {
        return Err(CliError::Config("sweep-convergence needs `values`".into()));
    }
    let seeds = if cfg.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.seeds.clone()
    };
    let mut cells = Vec::new();
    for &v in &cfg.values {
        let mut c = cfg.clone();
        match cfg.vary {
            Vary::Samples => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(CliError::Config(format!("N values must be positive integers, got {v}")));
                }
                c.samples = vec![v as usize];
            }
            Vary::Step => c.step = vec![v],
        }
        for &s in &seeds {
            let mut cs = c.clone();
            cs.seed = s;
            let built = build(&cs)?;
            let start = resolve_start(&built, &cs)?;
            let params = engine_params(&cs);
            params.validate().map_err(|e| CliError::Config(e.to_string()))?;
            cells.push((v, s, built.problem, start, params));
        }
    }
    let results: Vec<Result<ConvergenceRow, CliError>> = with_workers(workers, || {
        cells
            .par_iter()
            .map(|(v, s, p, start, params)| {
                let (h, _) = run_mcmo(p, start, params)?;
                Ok(ConvergenceRow {
                    value: *v,
                    seed: *s,
                    leader: h.leader_values(),
                })
            })
            .collect()
    })?;
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    fs::create_dir_all(&cfg.out)?;
    let mut w = csv::Writer::from_path(cfg.out.join("convergence.csv"))?;
    let mut header = vec!["vary".to_string(), "value".into(), "seed".into()];
    header.extend((0..=cfg.maxiter).map(|i| format!("iter_{i}")));
    w.write_record(&header)?;
    let vary = match cfg.vary {
        Vary::Samples => "N",
        Vary::Step => "alpha",
    };
    for r in &rows {
        let mut rec = vec![vary.to_string(), r.value.to_string(), r.seed.to_string()];
        rec.extend(r.leader.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(rows)
}
