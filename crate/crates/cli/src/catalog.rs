//! Problems addressable by name from a configuration.

use std::collections::BTreeMap;

use mcmo::problems::{
    make_aic, make_nested_toll, make_nested_toll_bounded, make_norm_chain, make_shared_dof_toy, make_sinha,
    make_tilahun, AicScenario, PolicySpec, TollScenario,
};
use mcmo::{LevelParams, MultilevelProblem};

use crate::config::{parse_list, RunConfig, StartMode};
use crate::error::CliError;

pub const CATALOG: &[&str] = &[
    "nested_toll",
    "nested_toll_bounded",
    "aic",
    "sinha",
    "tilahun",
    "norm_chain",
    "shared_dof_toy",
];

/// A catalog problem together with what the runner needs to know about it.
#[derive(Debug, Clone)]
pub enum Entry {
    Toll { d: f64, bounded: bool },
    Aic(AicScenario),
    Sinha,
    Tilahun,
    NormChain(Vec<f64>),
    Toy { lo: f64, hi: f64 },
}

pub struct Built {
    pub entry: Entry,
    pub problem: MultilevelProblem,
    pub default_start: StartMode,
    /// Box used by the bounded random search when none is configured.
    pub default_bounds: Option<Vec<(f64, f64)>>,
}

struct Params<'a> {
    map: &'a BTreeMap<String, String>,
    allowed: &'static [&'static str],
}

impl Params<'_> {
    fn check(&self, problem: &str) -> Result<(), CliError> {
        if let Some(k) = self.map.keys().find(|k| !self.allowed.contains(&k.as_str())) {
            return Err(CliError::Config(format!(
                "unknown key `{k}` for problem `{problem}` (problem keys: {})",
                if self.allowed.is_empty() {
                    "none".to_string()
                } else {
                    self.allowed.join(", ")
                }
            )));
        }
        Ok(())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("cannot parse `{v}` for key `{key}`"))),
        }
    }

    fn pair_or(&self, key: &str, default: [f64; 2]) -> Result<[f64; 2], CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => {
                let l: Vec<f64> = parse_list(key, v)?;
                <[f64; 2]>::try_from(l).map_err(|_| CliError::Config(format!("`{key}` needs exactly two numbers")))
            }
        }
    }
}

pub fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    let name = cfg.problem.as_str();
    let allowed: &'static [&'static str] = match name {
        "nested_toll" | "nested_toll_bounded" => &["D"],
        "aic" => &[
            "obstacle",
            "obstacle_radius",
            "region_center",
            "region_radius",
            "trajectory_len",
            "finish_line",
            "policy",
            "delta",
            "amplitude",
            "frequency",
        ],
        "norm_chain" => &["w"],
        "shared_dof_toy" => &["lower", "upper"],
        "sinha" | "tilahun" => &[],
        _ => {
            return Err(CliError::Config(format!(
                "unknown problem `{name}`; the catalog has: {}",
                CATALOG.join(", ")
            )))
        }
    };
    let p = Params {
        map: &cfg.params,
        allowed,
    };
    p.check(name)?;

    let built = match name {
        "nested_toll" | "nested_toll_bounded" => {
            let d = p.f64_or("D", 6.0)?;
            let bounded = name == "nested_toll_bounded";
            let s = TollScenario::new(d);
            let (problem, start, bounds) = if bounded {
                (
                    make_nested_toll_bounded(&s),
                    vec![0.0, 0.0, 1.0, 0.0],
                    vec![(0.0, 10.0), (0.0, 10.0), (0.0, 1.0), (0.0, 1.0)],
                )
            } else {
                (
                    make_nested_toll(&s),
                    vec![0.0, 0.0, 1.0, 0.0, 0.0],
                    vec![(0.0, 10.0), (0.0, 10.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
                )
            };
            Built {
                entry: Entry::Toll { d, bounded },
                problem,
                default_start: StartMode::Point(start),
                default_bounds: Some(bounds),
            }
        }
        "aic" => {
            let base = AicScenario::linear(p.pair_or("obstacle", [15.0, 5.0])?);
            let delta = p.f64_or("delta", base.policy.delta)?;
            let policy = match cfg.params.get("policy").map(String::as_str).unwrap_or("linear") {
                "linear" => PolicySpec::linear(delta),
                "sinusoidal" => PolicySpec::sinusoidal(delta, p.f64_or("amplitude", 0.5)?, p.f64_or("frequency", 3.0)?),
                other => {
                    return Err(CliError::Config(format!(
                        "`policy` must be linear or sinusoidal, got `{other}`"
                    )))
                }
            };
            let len = p.f64_or("trajectory_len", base.trajectory_len as f64)?;
            if len < 1.0 || len.fract() != 0.0 {
                return Err(CliError::Config("`trajectory_len` must be a positive integer".into()));
            }
            let scenario = AicScenario {
                obstacle_radius: p.f64_or("obstacle_radius", base.obstacle_radius)?,
                region_center: p.pair_or("region_center", base.region_center)?,
                region_radius: p.f64_or("region_radius", base.region_radius)?,
                trajectory_len: len as usize,
                finish_line: p.f64_or("finish_line", base.finish_line)?,
                policy,
                ..base
            };
            let problem = make_aic(&scenario).map_err(|e| CliError::Config(e.to_string()))?;
            Built {
                entry: Entry::Aic(scenario),
                problem,
                default_start: StartMode::Weighted(vec![1e5, 1e-5, 1.0]),
                default_bounds: None,
            }
        }
        "sinha" => Built {
            entry: Entry::Sinha,
            problem: make_sinha(),
            default_start: StartMode::Point(vec![0.4; 4]),
            default_bounds: Some(vec![(0.0, 5.0); 4]),
        },
        "tilahun" => Built {
            entry: Entry::Tilahun,
            problem: make_tilahun(),
            default_start: StartMode::Point(vec![0.0; 3]),
            default_bounds: Some(vec![(0.0, 0.5), (0.0, 1.0), (0.0, 1.0)]),
        },
        "norm_chain" => {
            let w: Vec<f64> = match cfg.params.get("w") {
                Some(v) => parse_list("w", v)?,
                None => vec![3.0, 8.0, 7.0, 7.0, 3.0],
            };
            let problem = make_norm_chain(&w).map_err(|e| CliError::Config(e.to_string()))?;
            let n = w.len();
            Built {
                entry: Entry::NormChain(w),
                problem,
                default_start: StartMode::Point(vec![0.0; n]),
                default_bounds: None,
            }
        }
        _ => {
            let lo = p.f64_or("lower", 0.0)?;
            let hi = p.f64_or("upper", 1.0)?;
            if !(lo <= hi) {
                return Err(CliError::Config(format!("need lower <= upper, got [{lo}, {hi}]")));
            }
            Built {
                entry: Entry::Toy { lo, hi },
                problem: make_shared_dof_toy(lo, hi),
                default_start: StartMode::Point(vec![0.5 * (lo + hi)]),
                default_bounds: Some(vec![(lo, hi)]),
            }
        }
    };
    apply_level_params(cfg, built)
}

fn per_level<T: Copy>(key: &str, values: &[T], defaults: Vec<T>) -> Result<Vec<T>, CliError> {
    match values.len() {
        0 => Ok(defaults),
        1 => Ok(vec![values[0]; defaults.len()]),
        n if n == defaults.len() => Ok(values.to_vec()),
        n => Err(CliError::Config(format!(
            "`{key}` has {n} values; give one or one per non-final level ({})",
            defaults.len()
        ))),
    }
}

fn apply_level_params(cfg: &RunConfig, mut built: Built) -> Result<Built, CliError> {
    let upper = &built.problem.levels()[..built.problem.num_levels() - 1];
    let n = per_level("N", &cfg.samples, upper.iter().map(|l| l.params.samples).collect())?;
    let m = per_level(
        "M",
        &cfg.iterations,
        upper.iter().map(|l| l.params.iterations).collect(),
    )?;
    let a = per_level("alpha", &cfg.step, upper.iter().map(|l| l.params.step).collect())?;
    let params: Vec<LevelParams> = (0..n.len()).map(|i| LevelParams::new(n[i], m[i], a[i])).collect();
    built.problem = built
        .problem
        .with_level_params(&params)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(built)
}
