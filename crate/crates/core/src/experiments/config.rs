//! Flat `key = value` run configuration.
//!
//! Recognised keys (all optional except `problem`):
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `problem` | `S1`..`S4` | |
//! | `p` | spatial degree | 1 |
//! | `q` | temporal degree, one value or one per step (comma separated) | 0 |
//! | `levels` | uniform refinement levels, comma separated; level `L` is `2L` bisection rounds | 2 |
//! | `t_end` | final time | problem default |
//! | `steps` | number of time steps | 4 |
//! | `time` | `uniform` or `geometric` | `uniform` |
//! | `ratio` | growth ratio of geometric steps | 1 |
//! | `nodes` | explicit time nodes, overrides `t_end`/`steps`/`time` | |
//! | `schedule` | `uniform` or `adaptive` | `uniform` |
//! | `theta` | Dörfler fraction (adaptive) | 0.5 |
//! | `coarsen_fraction` | coarsen below this fraction of the mean indicator | 0.1 |
//! | `max_depth` | bisection depth cap (adaptive) | 12 |
//! | `gamma` | threshold for the `h_ω² ≤ γ τ` condition | 1 |
//! | `efficiency` | compute local oscillations and efficiency ratios | false |
//! | `osc_rounds` | bisection rounds of the local dual-norm meshes | 2 |
//! | `output` | output directory | none |
//! | `seed` | seed for randomized probes | 0 |
//!
//! Lines starting with `#` and blank lines are ignored.

use crate::error::{Error, Result};
use crate::estimators::ManufacturedProblem;
use crate::temporal::TimePartition;
use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::PathBuf;

#[derive(Clone, Debug, PartialEq)]
pub enum TimeSpec {
    Uniform { t_end: f64, steps: usize },
    Geometric { t_end: f64, steps: usize, ratio: f64 },
    Nodes(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Uniform { levels: Vec<usize> },
    Adaptive { level: usize, theta: f64, coarsen_fraction: f64, max_depth: u8 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    pub p: usize,
    pub q: Vec<usize>,
    pub time: TimeSpec,
    pub schedule: Schedule,
    pub gamma_threshold: f64,
    pub efficiency: bool,
    pub oscillation_rounds: usize,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Canonical `key=value` lines the hash is computed from.
    canonical: Vec<(String, String)>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

const KEYS: &[&str] = &[
    "problem",
    "p",
    "q",
    "levels",
    "t_end",
    "steps",
    "time",
    "ratio",
    "nodes",
    "schedule",
    "theta",
    "coarsen_fraction",
    "max_depth",
    "gamma",
    "efficiency",
    "osc_rounds",
    "output",
    "seed",
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let k = k.trim().to_ascii_lowercase();
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", i + 1)));
            }
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Self::from_map(map)
    }

    fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let problem = get("problem").ok_or_else(|| Error::Config("missing key `problem`".into()))?;
        let resolved = ManufacturedProblem::by_name(problem)?;
        let p = get("p").map_or(Ok(1), |v| parse("p", v))?;
        if p == 0 {
            return Err(Error::Config("`p` must be at least 1".into()));
        }
        let q = get("q").map_or(Ok(vec![0]), |v| parse_list("q", v))?;
        if q.is_empty() {
            return Err(Error::Config("`q` is empty".into()));
        }
        let t_end = get("t_end").map_or(Ok(resolved.t_end), |v| parse("t_end", v))?;
        let steps = get("steps").map_or(Ok(4), |v| parse("steps", v))?;
        let time = if let Some(nodes) = get("nodes") {
            TimeSpec::Nodes(parse_list("nodes", nodes)?)
        } else {
            match get("time").unwrap_or("uniform") {
                "uniform" => TimeSpec::Uniform { t_end, steps },
                "geometric" => TimeSpec::Geometric {
                    t_end,
                    steps,
                    ratio: get("ratio").map_or(Ok(1.0), |v| parse("ratio", v))?,
                },
                other => return Err(Error::Config(format!("unknown time grading `{other}`"))),
            }
        };
        let levels: Vec<usize> = get("levels").map_or(Ok(vec![2]), |v| parse_list("levels", v))?;
        if levels.is_empty() {
            return Err(Error::Config("`levels` is empty".into()));
        }
        let schedule = match get("schedule").unwrap_or("uniform") {
            "uniform" => Schedule::Uniform { levels },
            "adaptive" => {
                let theta: f64 = get("theta").map_or(Ok(0.5), |v| parse("theta", v))?;
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::Config(format!("`theta` must lie in (0, 1], got {theta}")));
                }
                Schedule::Adaptive {
                    level: levels[0],
                    theta,
                    coarsen_fraction: get("coarsen_fraction").map_or(Ok(0.1), |v| parse("coarsen_fraction", v))?,
                    max_depth: get("max_depth").map_or(Ok(12), |v| parse("max_depth", v))?,
                }
            }
            other => return Err(Error::Config(format!("unknown schedule `{other}`"))),
        };
        let config = Self {
            problem: resolved.name.to_string(),
            p,
            q,
            time,
            schedule,
            gamma_threshold: get("gamma").map_or(Ok(1.0), |v| parse("gamma", v))?,
            efficiency: get("efficiency").map_or(Ok(false), |v| parse_bool("efficiency", v))?,
            oscillation_rounds: get("osc_rounds").map_or(Ok(2), |v| parse("osc_rounds", v))?,
            output: get("output").map(PathBuf::from),
            seed: get("seed").map_or(Ok(0), |v| parse("seed", v))?,
            canonical: map.into_iter().filter(|(k, _)| k != "output").collect(),
        };
        config.partition()?;
        Ok(config)
    }

    pub fn problem(&self) -> ManufacturedProblem {
        ManufacturedProblem::by_name(&self.problem).expect("validated at parse time")
    }

    /// Time partition with the configured degrees.
    pub fn partition(&self) -> Result<TimePartition> {
        let base = match &self.time {
            TimeSpec::Uniform { t_end, steps } => TimePartition::uniform(*t_end, *steps, 0)?,
            TimeSpec::Geometric { t_end, steps, ratio } => TimePartition::geometric(*t_end, *steps, *ratio, 0)?,
            TimeSpec::Nodes(nodes) => TimePartition::from_nodes(nodes.clone(), vec![0; nodes.len().saturating_sub(1)])?,
        };
        let n = base.num_steps();
        let degrees = match self.q.len() {
            1 => vec![self.q[0]; n],
            len if len == n => self.q.clone(),
            len => return Err(Error::Config(format!("{len} temporal degrees given for {n} steps"))),
        };
        TimePartition::from_nodes(base.nodes().to_vec(), degrees)
    }

    /// Stable hash of the settings that influence results (the output path is excluded).
    pub fn hash(&self) -> String {
        let mut h = DefaultHasher::new();
        self.canonical.hash(&mut h);
        format!("{:016x}", h.finish())
    }
}
