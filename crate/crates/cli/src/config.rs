//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! Keys not recognized here are handed to the problem catalog as problem
//! parameters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mcmo,
    Ibr,
    BoundedSearch,
    Oracle,
}

impl FromStr for Method {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "mcmo" => Ok(Method::Mcmo),
            "ibr" => Ok(Method::Ibr),
            "bounded_search" => Ok(Method::BoundedSearch),
            "oracle" => Ok(Method::Oracle),
            _ => Err(CliError::Config(format!(
                "unknown method `{s}` (expected mcmo, ibr, bounded_search or oracle)"
            ))),
        }
    }
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mcmo => "mcmo",
            Method::Ibr => "ibr",
            Method::BoundedSearch => "bounded_search",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartMode {
    Point(Vec<f64>),
    Feasible,
    Weighted(Vec<f64>),
}

impl FromStr for StartMode {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        if s == "feasible" {
            return Ok(StartMode::Feasible);
        }
        if let Some(w) = s.strip_prefix("weighted:") {
            return Ok(StartMode::Weighted(parse_list("start", w)?));
        }
        Ok(StartMode::Point(parse_list("start", s)?))
    }
}

impl StartMode {
    fn render(&self) -> String {
        match self {
            StartMode::Point(v) => join(v),
            StartMode::Feasible => "feasible".into(),
            StartMode::Weighted(w) => format!("weighted:{}", join(w)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vary {
    Samples,
    Step,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    /// Problem-specific parameters, validated by the catalog.
    pub params: BTreeMap<String, String>,
    pub method: Method,
    /// `N`, `M` and `alpha`, one value per non-final level or a single value
    /// for all of them. Empty means the catalog default.
    pub samples: Vec<usize>,
    pub iterations: Vec<usize>,
    pub step: Vec<f64>,
    pub maxiter: usize,
    /// Smoothing window; defaults to `min(10, maxiter)`.
    pub k: Option<usize>,
    pub seed: u64,
    pub epsilon: f64,
    /// `None` means the catalog default start.
    pub start: Option<StartMode>,
    pub out: PathBuf,
    pub parallel: bool,
    pub ibr_rounds: usize,
    pub search_samples: usize,
    pub search_iters: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub levels: Vec<usize>,
    pub sweep_samples: Vec<usize>,
    pub repeats: usize,
    /// Seconds of samples each timing cell collects beyond `repeats`.
    pub timing_budget: f64,
    pub vary: Vary,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Final-level solver settings (`solver_*` keys).
    pub solver: mcmo::SolverSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: String::new(),
            params: BTreeMap::new(),
            method: Method::Mcmo,
            samples: Vec::new(),
            iterations: Vec::new(),
            step: Vec::new(),
            maxiter: 100,
            k: None,
            seed: 0,
            epsilon: mcmo::DEFAULT_FEASIBILITY_TOL,
            start: None,
            out: PathBuf::from("out"),
            parallel: false,
            ibr_rounds: 10,
            search_samples: 100,
            search_iters: 100,
            bounds: None,
            levels: vec![2, 3, 4, 5],
            sweep_samples: vec![3, 4, 5],
            repeats: 3,
            timing_budget: 0.5,
            vary: Vary::Samples,
            values: Vec::new(),
            seeds: Vec::new(),
            solver: mcmo::SolverSettings::default(),
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_one<T: FromStr>(key: &str, s: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse `{s}` for key `{key}`")))
}

pub fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| parse_one(key, p)).collect()
}

fn parse_bool(key: &str, s: &str) -> Result<bool, CliError> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}` must be true or false, got `{s}`"))),
    }
}

fn parse_bounds(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("bound `{pair}` must look like lo:hi")))?;
            Ok((parse_one("bounds", lo)?, parse_one("bounds", hi)?))
        })
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        if cfg.problem.is_empty() {
            return Err(CliError::Config("missing `problem` key".into()));
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "problem" => self.problem = value.to_string(),
            "method" => self.method = value.parse()?,
            "N" => self.samples = parse_list(key, value)?,
            "M" => self.iterations = parse_list(key, value)?,
            "alpha" => self.step = parse_list(key, value)?,
            "maxiter" => self.maxiter = parse_one(key, value)?,
            "k" => self.k = Some(parse_one(key, value)?),
            "seed" => self.seed = parse_one(key, value)?,
            "epsilon" => self.epsilon = parse_one(key, value)?,
            "start" => self.start = Some(value.parse()?),
            "out" => self.out = PathBuf::from(value),
            "parallel" => self.parallel = parse_bool(key, value)?,
            "ibr_rounds" => self.ibr_rounds = parse_one(key, value)?,
            "search_samples" => self.search_samples = parse_one(key, value)?,
            "search_iters" => self.search_iters = parse_one(key, value)?,
            "bounds" => self.bounds = Some(parse_bounds(value)?),
            "levels" => self.levels = parse_list(key, value)?,
            "sweep_N" => self.sweep_samples = parse_list(key, value)?,
            "repeats" => self.repeats = parse_one(key, value)?,
            "timing_budget" => self.timing_budget = parse_one(key, value)?,
            "vary" => {
                self.vary = match value {
                    "N" => Vary::Samples,
                    "alpha" => Vary::Step,
                    _ => return Err(CliError::Config(format!("`vary` must be N or alpha, got `{value}`"))),
                }
            }
            "values" => self.values = parse_list(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "solver_stationarity_tol" => self.solver.stationarity_tol = parse_one(key, value)?,
            "solver_constraint_tol" => self.solver.constraint_tol = parse_one(key, value)?,
            "solver_max_outer" => self.solver.max_outer = parse_one(key, value)?,
            "solver_max_inner" => self.solver.max_inner = parse_one(key, value)?,
            "solver_fd_step" => self.solver.fd_step = parse_one(key, value)?,
            _ => {
                self.params.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }

    /// Smoothing window actually used.
    pub fn window(&self) -> usize {
        self.k.unwrap_or_else(|| self.maxiter.clamp(1, 10))
    }

    /// Every setting, defaults included, in the input format.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("problem", self.problem.clone());
        for (k, v) in &self.params {
            line(k, v.clone());
        }
        line("method", self.method.as_str().into());
        if !self.samples.is_empty() {
            line("N", join(&self.samples));
        }
        if !self.iterations.is_empty() {
            line("M", join(&self.iterations));
        }
        if !self.step.is_empty() {
            line("alpha", join(&self.step));
        }
        line("maxiter", self.maxiter.to_string());
        line("k", self.window().to_string());
        line("seed", self.seed.to_string());
        line("epsilon", self.epsilon.to_string());
        if let Some(start) = &self.start {
            line("start", start.render());
        }
        line("out", self.out.display().to_string());
        line("parallel", self.parallel.to_string());
        line("ibr_rounds", self.ibr_rounds.to_string());
        line("search_samples", self.search_samples.to_string());
        line("search_iters", self.search_iters.to_string());
        if let Some(b) = &self.bounds {
            let pairs: Vec<String> = b.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
            line("bounds", pairs.join(","));
        }
        line("levels", join(&self.levels));
        line("sweep_N", join(&self.sweep_samples));
        line("repeats", self.repeats.to_string());
        line("timing_budget", self.timing_budget.to_string());
        line(
            "vary",
            match self.vary {
                Vary::Samples => "N".into(),
                Vary::Step => "alpha".into(),
            },
        );
        if !self.values.is_empty() {
            line("values", join(&self.values));
        }
        if !self.seeds.is_empty() {
            line("seeds", join(&self.seeds));
        }
        line("solver_stationarity_tol", self.solver.stationarity_tol.to_string());
        line("solver_constraint_tol", self.solver.constraint_tol.to_string());
        line("solver_max_outer", self.solver.max_outer.to_string());
        line("solver_max_inner", self.solver.max_inner.to_string());
        line("solver_fd_step", self.solver.fd_step.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_comments_and_params() {
        let cfg = RunConfig::parse(
            "# toll run\nproblem = nested_toll\nD = 6\nN = 7,7\nalpha=0.15 # step\nstart = 0,0,1,0,0\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, "nested_toll");
        assert_eq!(cfg.params.get("D").map(String::as_str), Some("6"));
        assert_eq!(cfg.samples, vec![7, 7]);
        assert_eq!(cfg.step, vec![0.15]);
        assert_eq!(cfg.start, Some(StartMode::Point(vec![0.0, 0.0, 1.0, 0.0, 0.0])));
        assert_eq!(cfg.window(), 10);
    }

    #[test]
    fn render_round_trips() {
        let cfg = RunConfig::parse(
            "problem = aic\nobstacle = 15,5\nsolver_max_outer = 20\nstart = weighted:100000,0.00001,1\nbounds = 0:10,-1:1\nvary = alpha\n",
        )
        .unwrap();
        let mut resolved = cfg.clone();
        resolved.k = Some(cfg.window());
        assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), resolved);
    }

    #[test]
    fn errors() {
        assert!(RunConfig::parse("D = 6").is_err());
        assert!(RunConfig::parse("problem = x\nmaxiter = many").is_err());
        assert!(RunConfig::parse("problem = x\njust text").is_err());
        assert!(RunConfig::parse("problem = x\nmethod = magic").is_err());
    }
}
