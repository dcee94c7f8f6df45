//! Scenario configuration.
//!
//! INI text, UTF-8, `#` comments. Only `[map] file` and `[robots] starts`
//! are required; every other key has a default.
//!
//! ```ini
//! [map]
//! file = desk.pgm            # relative to the config file
//!
//! [robots]
//! count = 2                  # optional; must match starts
//! starts = 1.0 1.0 0.0, 2.0 1.0 0.0   # x y heading per robot
//!
//! [lidar]
//! beam_count = 180
//! max_range = 2.0
//!
//! [frontier]
//! rad = 1.0
//! per_unk = 60
//! min_pts = 0
//! max_pts = 10
//! rad_step = 0.25
//! perc_step = 10
//!
//! [utility]
//! lambda = 0.1
//! u1_weight = 1.0
//! u2_weight = 1.0
//!
//! [graph]
//! node_spacing = 0.5
//! loop_closure_radius = 0.6
//! odometry_weight = 1.0
//! loop_weight = 2.0
//!
//! [allocation]
//! goal_skip_wait = 5
//!
//! [planner]
//! inflation = 1
//!
//! [sim]
//! method = proposed          # proposed | mags | greedy_frontier
//! speed = 0.3
//! dt = 0.5
//! max_sim_time = 300
//! seed = 1
//! start_jitter = 0.3
//! ```

use crate::frontier::FilterParams;
use crate::geometry::Pose;
use crate::planner::PlannerConfig;
use crate::pose_graph::GraphBuildParams;
use crate::utility::UtilityParams;
use ini::Ini;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown key [{section}] {key}")]
    UnknownKey { section: String, key: String },
    #[error("missing key [{section}] {key}")]
    Missing { section: &'static str, key: &'static str },
    #[error("[{section}] {key} = {value:?}: {reason}")]
    Invalid { section: String, key: String, value: String, reason: String },
}

/// Exploration strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Border-filtered candidates, full utility, reward spreading.
    Proposed,
    /// Every detected frontier offered, pose-graph gain plus distance decay,
    /// independent argmax per robot.
    Mags,
    /// Nearest reachable frontier by path length.
    GreedyFrontier,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::Mags, Method::GreedyFrontier];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Mags => "mags",
            Method::GreedyFrontier => "greedy_frontier",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "proposed" => Ok(Method::Proposed),
            "mags" => Ok(Method::Mags),
            "greedy_frontier" | "greedy" => Ok(Method::GreedyFrontier),
            other => Err(format!("unknown method {other:?} (expected proposed, mags or greedy_frontier)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarParams {
    pub beam_count: usize,
    /// Meters.
    pub max_range: f64,
}

impl Default for LidarParams {
    fn default() -> Self {
        Self { beam_count: 180, max_range: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub map_file: PathBuf,
    pub starts: Vec<Pose>,
    pub lidar: LidarParams,
    pub filter: FilterParams,
    pub utility: UtilityParams,
    pub graph: GraphBuildParams,
    pub goal_skip_wait: u32,
    pub planner: PlannerConfig,
    pub method: Method,
    /// Meters per second.
    pub speed: f64,
    /// Seconds per tick.
    pub dt: f64,
    /// Seconds.
    pub max_sim_time: f64,
    pub seed: u64,
    /// Half-width in meters of the square each start pose is jittered in.
    pub start_jitter: f64,
}

impl ScenarioConfig {
    /// A scenario with default parameters.
    pub fn new(map_file: PathBuf, starts: Vec<Pose>) -> Self {
        Self {
            map_file,
            starts,
            lidar: LidarParams::default(),
            filter: FilterParams::default(),
            utility: UtilityParams::default(),
            graph: GraphBuildParams::default(),
            goal_skip_wait: 5,
            planner: PlannerConfig::default(),
            method: Method::Proposed,
            speed: 0.3,
            dt: 0.5,
            max_sim_time: 300.0,
            seed: 1,
            start_jitter: 0.3,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses config text; a relative map path is resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        // The INI reader keeps inline `#` comments, and rejects them after
        // section headers, so they are cut here.
        let stripped: String = text.lines().map(|l| l.split('#').next().unwrap_or("")).collect::<Vec<_>>().join("\n");
        let ini = Ini::load_from_str(&stripped).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut map_file = None;
        let mut starts = None;
        let mut count = None;
        let mut cfg = Self::new(PathBuf::new(), Vec::new());

        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                let value = value.trim();
                let v = Value { section, key, value };
                match (section, key) {
                    ("map", "file") => map_file = Some(base.join(v.value)),
                    ("robots", "starts") => starts = Some(v.poses()?),
                    ("robots", "count") => count = Some(v.parse::<usize>()?),
                    ("lidar", "beam_count") => cfg.lidar.beam_count = v.parse()?,
                    ("lidar", "max_range") => cfg.lidar.max_range = v.parse()?,
                    ("frontier", "rad") => cfg.filter.rad = v.parse()?,
                    ("frontier", "per_unk") => cfg.filter.per_unk = v.parse()?,
                    ("frontier", "min_pts") => cfg.filter.min_pts = v.parse()?,
                    ("frontier", "max_pts") => cfg.filter.max_pts = v.parse()?,
                    ("frontier", "rad_step") => cfg.filter.rad_step = v.parse()?,
                    ("frontier", "perc_step") => cfg.filter.perc_step = v.parse()?,
                    ("utility", "lambda") => cfg.utility.lambda = v.parse()?,
                    ("utility", "u1_weight") => cfg.utility.u1_weight = v.parse()?,
                    ("utility", "u2_weight") => cfg.utility.u2_weight = v.parse()?,
                    ("graph", "node_spacing") => cfg.graph.node_spacing = v.parse()?,
                    ("graph", "loop_closure_radius") => cfg.graph.loop_closure_radius = v.parse()?,
                    ("graph", "odometry_weight") => cfg.graph.odometry_weight = v.parse()?,
                    ("graph", "loop_weight") => cfg.graph.loop_weight = v.parse()?,
                    ("allocation", "goal_skip_wait") => cfg.goal_skip_wait = v.parse()?,
                    ("planner", "inflation") => cfg.planner.inflation = v.parse()?,
                    ("sim", "method") => cfg.method = v.parse()?,
                    ("sim", "speed") => cfg.speed = v.parse()?,
                    ("sim", "dt") => cfg.dt = v.parse()?,
                    ("sim", "max_sim_time") => cfg.max_sim_time = v.parse()?,
                    ("sim", "seed") => cfg.seed = v.parse()?,
                    ("sim", "start_jitter") => cfg.start_jitter = v.parse()?,
                    _ => return Err(ConfigError::UnknownKey { section: section.into(), key: key.into() }),
                }
            }
        }
        cfg.map_file = map_file.ok_or(ConfigError::Missing { section: "map", key: "file" })?;
        cfg.starts = starts.ok_or(ConfigError::Missing { section: "robots", key: "starts" })?;
        if let Some(n) = count {
            if n != cfg.starts.len() {
                return Err(invalid(
                    "robots",
                    "count",
                    &n.to_string(),
                    format!("{} start poses given", cfg.starts.len()),
                ));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks value ranges that do not need the map.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, section: &str, key: &str, value: String, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(invalid(section, key, &value, reason.to_string()))
            }
        };
        check(!self.starts.is_empty(), "robots", "starts", String::new(), "at least one robot is required")?;
        for p in &self.starts {
            check(
                p.x.is_finite() && p.y.is_finite() && p.heading.is_finite(),
                "robots",
                "starts",
                format!("{p:?}"),
                "must be finite",
            )?;
        }
        check(self.lidar.beam_count > 0, "lidar", "beam_count", self.lidar.beam_count.to_string(), "must be positive")?;
        check(
            positive(self.lidar.max_range),
            "lidar",
            "max_range",
            self.lidar.max_range.to_string(),
            "must be positive",
        )?;
        self.filter.validate().map_err(|e| invalid("frontier", "*", "", e.0))?;
        self.utility.validate().map_err(|e| invalid("utility", "*", "", e.to_string()))?;
        self.graph.validate().map_err(|e| invalid("graph", "*", "", e.to_string()))?;
        check(
            self.goal_skip_wait > 0,
            "allocation",
            "goal_skip_wait",
            self.goal_skip_wait.to_string(),
            "must be positive",
        )?;
        check(positive(self.speed), "sim", "speed", self.speed.to_string(), "must be positive")?;
        check(positive(self.dt), "sim", "dt", self.dt.to_string(), "must be positive")?;
        check(positive(self.max_sim_time), "sim", "max_sim_time", self.max_sim_time.to_string(), "must be positive")?;
        check(
            self.start_jitter >= 0.0 && self.start_jitter.is_finite(),
            "sim",
            "start_jitter",
            self.start_jitter.to_string(),
            "must be non-negative",
        )
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn invalid(section: &str, key: &str, value: &str, reason: String) -> ConfigError {
    ConfigError::Invalid { section: section.into(), key: key.into(), value: value.into(), reason }
}

struct Value<'a> {
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

impl Value<'_> {
    fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.value.parse().map_err(|e: T::Err| invalid(self.section, self.key, self.value, e.to_string()))
    }

    /// `x y heading` triples separated by commas.
    fn poses(&self) -> Result<Vec<Pose>, ConfigError> {
        self.value
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                let f: Result<Vec<f64>, _> = s.split_whitespace().map(str::parse).collect();
                match f.as_deref() {
                    Ok(&[x, y, h]) => Ok(Pose::new(x, y, h)),
                    Ok(&[x, y]) => Ok(Pose::new(x, y, 0.0)),
                    _ => Err(invalid(self.section, self.key, s.trim(), "expected `x y heading`".into())),
                }
            })
            .collect()
    }
}
