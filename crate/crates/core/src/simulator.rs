//! Deterministic multi-robot exploration loop.
//!
//! Each tick:
//!
//! 1. every robot takes a lidar scan of the ground truth and integrates it
//!    into its own map; the maps are merged;
//! 2. goals are checked: reached, no longer worth visiting (their disc became
//!    fully known in transit) or blocked by a newly seen obstacle (replan);
//! 3. robots without a goal ask the server for a turn;
//! 4. the server serves at most one turn: all robots submit their local
//!    frontiers, the served robot receives the candidate list, scores it and
//!    gets a goal back; every exchange goes through the binary message codec;
//! 5. a metrics row is recorded;
//! 6. robots advance along their paths and extend their pose graphs.
//!
//! Robots are points with perfect localization. Nothing here is random
//! except the start-pose jitter, drawn from a generator seeded by the
//! scenario seed, so a scenario and seed fully determine the run.

use crate::allocation::{
    AllocationError, AllocationServer, AllocationState, CandidatePolicy, CodecError, ListCounts, Message,
    SelectionPolicy,
};
use crate::config::{ConfigError, Method, ScenarioConfig};
use crate::frontier::{detect_frontiers, unknown_percentage, FrontierPoint};
use crate::geometry::{AgentId, Point2, Pose};
use crate::grid_map::{
    coverage_percent, load_ground_truth, map_entropy, map_quality, merge_maps, raycast, CellState, GridError,
    GroundTruthMap, MapQuality, OccupancyGrid, RayTraversal,
};
use crate::planner::{plan, remaining_length, step_along, GridPath};
use crate::pose_graph::PoseGraph;
use crate::utility::{build_reward_matrix, MultiGoalPlanner, ScoringContext, UtilityError, UtilityMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Map(#[from] GridError),
    #[error("start pose of robot {robot} ({x}, {y}) is not in free space")]
    StartBlocked { robot: AgentId, x: f64, y: f64 },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

impl From<CodecError> for SimError {
    fn from(e: CodecError) -> Self {
        SimError::Protocol(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickMetrics {
    pub time: f64,
    /// Per robot, percent of cells known in its own map.
    pub coverage: Vec<f64>,
    pub merged_coverage: f64,
    /// Counts from the most recent served turn; zero before the first.
    pub raw_frontiers: usize,
    pub filtered_frontiers: usize,
    /// Bits.
    pub map_entropy: f64,
    pub loop_closures: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalAssignment {
    pub time: f64,
    pub agent: AgentId,
    pub goal: Point2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub method: Method,
    pub seed: u64,
    pub ticks: Vec<TickMetrics>,
    /// Candidate-list counts, one entry per served turn.
    pub iterations: Vec<ListCounts>,
    pub goals: Vec<GoalAssignment>,
    /// Merged map against the ground truth at the end of the run.
    pub quality: MapQuality,
    /// Meters travelled per robot.
    pub distances: Vec<f64>,
}

/// Column order of [`RunMetrics::summary_csv`].
pub const SUMMARY_COLUMNS: [&str; 13] = [
    "method",
    "seed",
    "robots",
    "sim_time",
    "iterations",
    "final_coverage",
    "mean_reduction",
    "ssim",
    "rmse",
    "alignment_error",
    "total_distance",
    "loop_closures",
    "goals",
];

impl RunMetrics {
    pub fn robot_count(&self) -> usize {
        self.distances.len()
    }

    pub fn final_coverage(&self) -> f64 {
        self.ticks.last().map_or(0.0, |t| t.merged_coverage)
    }

    /// Mean over served turns with a non-empty raw list of
    /// `100 * (1 - filtered / raw)`.
    pub fn mean_reduction(&self) -> Option<f64> {
        let v: Vec<f64> = self
            .iterations
            .iter()
            .filter(|c| c.raw > 0)
            .map(|c| 100.0 * (1.0 - c.filtered as f64 / c.raw as f64))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// `time, coverage_r0.., merged_coverage, raw_frontiers,
    /// filtered_frontiers, map_entropy, loop_closures`, one row per tick.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for r in 0..self.robot_count() {
            let _ = write!(out, ",coverage_r{r}");
        }
        out.push_str(",merged_coverage,raw_frontiers,filtered_frontiers,map_entropy,loop_closures\n");
        for t in &self.ticks {
            let _ = write!(out, "{:.6}", t.time);
            for c in &t.coverage {
                let _ = write!(out, ",{c:.6}");
            }
            let _ = writeln!(
                out,
                ",{:.6},{},{},{:.6},{}",
                t.merged_coverage, t.raw_frontiers, t.filtered_frontiers, t.map_entropy, t.loop_closures
            );
        }
        out
    }

    /// Header plus one row with the [`SUMMARY_COLUMNS`].
    pub fn summary_csv(&self) -> String {
        let last = self.ticks.last();
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
        format!(
            "{}\n{},{},{},{:.6},{},{:.6},{},{:.6},{:.6},{:.6},{:.6},{},{}\n",
            SUMMARY_COLUMNS.join(","),
            self.method,
            self.seed,
            self.robot_count(),
            last.map_or(0.0, |t| t.time),
            self.iterations.len(),
            self.final_coverage(),
            fmt(self.mean_reduction()),
            self.quality.ssim,
            self.quality.rmse,
            self.quality.alignment_error,
            self.distances.iter().sum::<f64>(),
            last.map_or(0, |t| t.loop_closures),
            self.goals.len(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct Robot {
    pub id: AgentId,
    pub pose: Pose,
    pub map: OccupancyGrid,
    pub graph: PoseGraph,
    pub goal: Option<Point2>,
    pub path: Option<GridPath>,
    pub distance: f64,
    /// Goals this robot was given, used by the baselines to avoid
    /// returning to a spot they already visited.
    pub past_goals: Vec<Point2>,
    waiting: bool,
    /// Whether the goal disc still had unknown cells when assigned.
    goal_was_open: bool,
}

pub struct Simulation {
    config: ScenarioConfig,
    truth: GroundTruthMap,
    robots: Vec<Robot>,
    server: AllocationServer,
    merged: OccupancyGrid,
    time: f64,
    tick: u64,
    last_counts: ListCounts,
    ticks: Vec<TickMetrics>,
    iterations: Vec<ListCounts>,
    goals: Vec<GoalAssignment>,
}

impl Simulation {
    /// Loads the map named by the config.
    pub fn from_config(config: ScenarioConfig) -> Result<Self, SimError> {
        config.validate()?;
        let truth = load_ground_truth(&config.map_file)?;
        Self::new(config, truth)
    }

    pub fn new(config: ScenarioConfig, truth: GroundTruthMap) -> Result<Self, SimError> {
        config.validate()?;
        let g = *truth.geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut robots = Vec::with_capacity(config.starts.len());
        for (i, &start) in config.starts.iter().enumerate() {
            let id = AgentId(i);
            if !truth.is_free(g.world_to_grid(start.position())) {
                return Err(SimError::StartBlocked { robot: id, x: start.x, y: start.y });
            }
            let pose = jitter(start, config.start_jitter, &truth, &mut rng);
            let mut graph = PoseGraph::new();
            graph.extend_trajectory(pose, &config.graph);
            robots.push(Robot {
                id,
                pose,
                map: OccupancyGrid::new(g),
                graph,
                goal: None,
                path: None,
                distance: 0.0,
                past_goals: Vec::new(),
                waiting: false,
                goal_was_open: false,
            });
        }
        let (candidates, selection) = match config.method {
            Method::Proposed => (CandidatePolicy::Filtered, SelectionPolicy::Spread),
            Method::Mags | Method::GreedyFrontier => (CandidatePolicy::Unfiltered, SelectionPolicy::Independent),
        };
        let server =
            AllocationServer::new(AllocationState::new(g, config.goal_skip_wait), config.filter, candidates, selection);
        Ok(Self {
            config,
            truth,
            robots,
            server,
            merged: OccupancyGrid::new(g),
            time: 0.0,
            tick: 0,
            last_counts: ListCounts { raw: 0, filtered: 0 },
            ticks: Vec::new(),
            iterations: Vec::new(),
            goals: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn truth(&self) -> &GroundTruthMap {
        &self.truth
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn merged(&self) -> &OccupancyGrid {
        &self.merged
    }

    pub fn server(&self) -> &AllocationServer {
        &self.server
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn ticks(&self) -> &[TickMetrics] {
        &self.ticks
    }

    pub fn goals(&self) -> &[GoalAssignment] {
        &self.goals
    }

    pub fn is_done(&self) -> bool {
        self.time >= self.config.max_sim_time - 1e-9
            || self.ticks.last().is_some_and(|t| t.merged_coverage >= 100.0 - 1e-9)
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.sense()?;
        self.server.state.evict_explored(&self.merged, self.config.filter.rad);
        self.check_goals();
        for i in 0..self.robots.len() {
            let r = &mut self.robots[i];
            if r.goal.is_none() && !r.waiting {
                r.waiting = true;
                let msg = Message::RequestTurn { agent: r.id };
                self.send(msg)?;
            }
        }
        if let Some(agent) = self.server.begin_turn() {
            self.serve(agent)?;
        }
        self.record()?;
        self.advance();
        self.tick += 1;
        self.time = self.tick as f64 * self.config.dt;
        Ok(())
    }

    pub fn run(mut self) -> Result<RunMetrics, SimError> {
        while !self.is_done() {
            self.step()?;
        }
        self.finish()
    }

    /// Final metrics for the ticks run so far.
    pub fn finish(self) -> Result<RunMetrics, SimError> {
        Ok(RunMetrics {
            method: self.config.method,
            seed: self.config.seed,
            quality: map_quality(&self.merged, &self.truth)?,
            distances: self.robots.iter().map(|r| r.distance).collect(),
            ticks: self.ticks,
            iterations: self.iterations,
            goals: self.goals,
        })
    }

    fn sense(&mut self) -> Result<(), SimError> {
        let lidar = self.config.lidar;
        for r in &mut self.robots {
            let scan = raycast(&self.truth, r.pose, lidar.beam_count, lidar.max_range)?;
            r.map.integrate_scan(&scan);
        }
        let maps: Vec<OccupancyGrid> = self.robots.iter().map(|r| r.map.clone()).collect();
        self.merged = merge_maps(&maps)?;
        Ok(())
    }

    fn goal_is_open(&self, goal: Point2) -> bool {
        unknown_percentage(goal, &self.merged, self.config.filter.rad).is_some_and(|u| u > 0.0)
    }

    fn check_goals(&mut self) {
        for i in 0..self.robots.len() {
            let Some(goal) = self.robots[i].goal else { continue };
            let open = self.goal_is_open(goal);
            let r = &self.robots[i];
            let arrived = r.path.as_ref().is_some_and(|p| remaining_length(p, r.pose) == 0.0);
            let stale = r.goal_was_open && !open;
            if arrived || stale {
                log::debug!("t={:.1} {} drops goal ({:.2}, {:.2}) arrived={arrived}", self.time, r.id, goal.x, goal.y);
                self.clear_goal(i);
                continue;
            }
            let blocked = r
                .path
                .as_ref()
                .is_none_or(|p| p.cells.iter().any(|&c| self.merged.state(c) == Some(CellState::Occupied)));
            if blocked {
                match plan(&self.merged, r.pose.position(), goal, self.config.planner) {
                    Ok(p) => self.robots[i].path = Some(p),
                    Err(_) => self.clear_goal(i),
                }
            }
        }
    }

    fn clear_goal(&mut self, i: usize) {
        let r = &mut self.robots[i];
        r.goal = None;
        r.path = None;
    }

    fn send(&mut self, msg: Message) -> Result<Option<Message>, SimError> {
        exchange(&mut self.server, &self.merged, msg)
    }

    /// One workflow iteration for `agent`.
    fn serve(&mut self, agent: AgentId) -> Result<(), SimError> {
        let idx = agent.0;
        self.robots[idx].waiting = false;

        let order = (0..self.robots.len()).filter(|&i| i != idx).chain([idx]);
        let mut reply = None;
        for i in order {
            let r = &self.robots[i];
            let points = detect_frontiers(&r.map, r.id).iter().map(FrontierPoint::position).collect();
            reply = self.send(Message::SubmitPoints { agent: r.id, points })?;
        }
        if let Some(c) = self.server.take_counts() {
            self.iterations.push(c);
            self.last_counts = c;
        }
        let Some(Message::PointsReply { points }) = reply else {
            return Err(SimError::Protocol("expected a candidate list".into()));
        };
        if points.is_empty() {
            self.server.end_turn();
            return Ok(());
        }
        let r = &self.robots[idx];
        let g = self.merged.geometry();
        let visited = |p: &Point2| r.past_goals.iter().any(|q| g.world_to_grid(*q) == g.world_to_grid(*p));
        let candidates: Vec<FrontierPoint> = points
            .iter()
            .filter(|p| self.config.method == Method::Proposed || !visited(p))
            .map(|p| FrontierPoint::new(p.x, p.y, agent))
            .collect();
        if candidates.is_empty() {
            self.server.end_turn();
            return Ok(());
        }
        let mut planner = MultiGoalPlanner::new(&self.merged, r.pose.position(), self.config.planner);
        let goal = match self.config.method {
            Method::GreedyFrontier => {
                self.server.end_turn();
                candidates
                    .iter()
                    .filter_map(|c| planner.path_to(c.position()).ok().map(|p| (p.cost, c.position())))
                    .fold(None, |best: Option<(_, Point2)>, (cost, p)| match best {
                        Some((b, _)) if b <= cost => best,
                        _ => Some((cost, p)),
                    })
                    .map(|(_, p)| p)
            }
            Method::Proposed | Method::Mags => {
                let ctx = ScoringContext {
                    agent,
                    pose: r.pose,
                    grid: &self.merged,
                    graph: &r.graph,
                    graph_params: &self.config.graph,
                    planner: self.config.planner,
                    params: &self.config.utility,
                    mode: if self.config.method == Method::Proposed {
                        UtilityMode::Full
                    } else {
                        UtilityMode::GainAndDecay
                    },
                };
                match build_reward_matrix(&ctx, &candidates) {
                    Ok(h) => {
                        let rows = h
                            .rows
                            .iter()
                            .map(|row| (row.point.x, row.point.y, row.reward.value().unwrap_or(f64::NEG_INFINITY)))
                            .collect();
                        match exchange(&mut self.server, &self.merged, Message::SubmitRewards { agent, rows })? {
                            Some(Message::GoalReply { x, y }) => Some(Point2::new(x, y)),
                            _ => None,
                        }
                    }
                    Err(UtilityError::NoViableCandidates) => {
                        self.server.end_turn();
                        None
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        let Some(goal) = goal else { return Ok(()) };
        let path = planner.path_to(goal).ok();
        let open = self.goal_is_open(goal);
        let r = &mut self.robots[idx];
        if let Some(path) = path {
            log::debug!("t={:.1} {} goal ({:.2}, {:.2}) {:.2} m", self.time, agent, goal.x, goal.y, path.length_m);
            r.goal = Some(goal);
            r.path = Some(path);
            r.goal_was_open = open;
            r.past_goals.push(goal);
            self.goals.push(GoalAssignment { time: self.time, agent, goal });
        }
        Ok(())
    }

    fn record(&mut self) -> Result<(), SimError> {
        let mut coverage = Vec::with_capacity(self.robots.len());
        for r in &self.robots {
            coverage.push(coverage_percent(&r.map, &self.truth)?);
        }
        self.ticks.push(TickMetrics {
            time: self.time,
            coverage,
            merged_coverage: coverage_percent(&self.merged, &self.truth)?,
            raw_frontiers: self.last_counts.raw,
            filtered_frontiers: self.last_counts.filtered,
            map_entropy: map_entropy(&self.merged),
            loop_closures: self.robots.iter().map(|r| r.graph.loop_closure_count()).sum(),
        });
        Ok(())
    }

    fn advance(&mut self) {
        let (speed, dt) = (self.config.speed, self.config.dt);
        for r in &mut self.robots {
            let Some(path) = &r.path else { continue };
            let next = step_along(path, r.pose, speed, dt);
            if segment_is_free(&self.truth, r.pose.position(), next.position()) {
                r.distance += r.pose.position().distance(&next.position());
                r.pose = next;
                r.graph.extend_trajectory(r.pose, &self.config.graph);
            } else {
                log::debug!("{} stopped by an unseen obstacle", r.id);
                r.path = None;
            }
        }
    }
}

/// Passes a message through the wire format to the server and back.
fn exchange(server: &mut AllocationServer, merged: &OccupancyGrid, msg: Message) -> Result<Option<Message>, SimError> {
    let decoded = Message::decode(&msg.encode())?;
    match server.handle(decoded, merged) {
        Ok(reply) => reply.map(|m| Message::decode(&m.encode())).transpose().map_err(SimError::from),
        Err(AllocationError::NoAssignableGoal) => Ok(None),
        Err(e) => Err(SimError::Protocol(e.to_string())),
    }
}

/// Whether the straight segment `a → b` crosses only free truth cells.
fn segment_is_free(truth: &GroundTruthMap, a: Point2, b: Point2) -> bool {
    let g = truth.geometry();
    let len = a.distance(&b);
    if len == 0.0 {
        return truth.is_free(g.world_to_grid(a));
    }
    let heading = (b.y - a.y).atan2(b.x - a.x);
    RayTraversal::new(g, a, heading).take_while(|&(_, t)| t <= len).all(|(c, _)| truth.is_free(c))
}

fn jitter(start: Pose, amount: f64, truth: &GroundTruthMap, rng: &mut ChaCha8Rng) -> Pose {
    if amount <= 0.0 {
        return start;
    }
    for _ in 0..100 {
        let x = start.x + rng.gen_range(-amount..=amount);
        let y = start.y + rng.gen_range(-amount..=amount);
        if truth.is_free(truth.geometry().world_to_grid(Point2::new(x, y)))
            && segment_is_free(truth, start.position(), Point2::new(x, y))
        {
            return Pose::new(x, y, start.heading);
        }
    }
    start
}

/// Runs a scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<RunMetrics, SimError> {
    Simulation::from_config(config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn open_room(n: usize) -> GroundTruthMap {
        let mut rows = vec!["#".repeat(n)];
        for _ in 0..n - 2 {
            rows.push(format!("#{}#", ".".repeat(n - 2)));
        }
        rows.push("#".repeat(n));
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        GroundTruthMap::from_rows(0.1, Point2::default(), &refs).unwrap()
    }

    fn config(starts: Vec<Pose>) -> ScenarioConfig {
        let mut c = ScenarioConfig::new(PathBuf::new(), starts);
        c.max_sim_time = 120.0;
        c.lidar.max_range = 0.8;
        c
    }

    #[test]
    fn single_robot_sweeps_open_room() {
        let c = config(vec![Pose::new(0.35, 0.35, 0.0)]);
        let m = Simulation::new(c, open_room(20)).unwrap().run().unwrap();
        assert!(m.final_coverage() >= 95.0, "coverage {}", m.final_coverage());
        assert!(m.ticks.len() <= 240);
    }

    #[test]
    fn merged_coverage_is_monotone_and_runs_repeat() {
        let c = config(vec![Pose::new(0.35, 0.35, 0.0), Pose::new(1.55, 1.55, 0.0)]);
        let a = Simulation::new(c.clone(), open_room(20)).unwrap().run().unwrap();
        let b = Simulation::new(c, open_room(20)).unwrap().run().unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.ticks.windows(2).all(|w| w[1].merged_coverage >= w[0].merged_coverage));
    }

    #[test]
    fn embedded_start_is_rejected() {
        let c = config(vec![Pose::new(0.05, 0.05, 0.0)]);
        assert!(matches!(Simulation::new(c, open_room(10)), Err(SimError::StartBlocked { .. })));
    }

    #[test]
    fn csv_shapes() {
        let mut c = config(vec![Pose::new(0.35, 0.35, 0.0)]);
        c.max_sim_time = 2.0;
        let m = Simulation::new(c, open_room(12)).unwrap().run().unwrap();
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "time,coverage_r0,merged_coverage,raw_frontiers,filtered_frontiers,map_entropy,loop_closures"
        );
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[1].starts_with("0.000000,"));
        let summary = m.summary_csv();
        assert_eq!(summary.lines().next().unwrap(), SUMMARY_COLUMNS.join(","));
        assert_eq!(summary.lines().nth(1).unwrap().split(',').count(), SUMMARY_COLUMNS.len());
    }

    #[test]
    fn segment_check() {
        let t = GroundTruthMap::from_rows(1.0, Point2::default(), &["..#.."]).unwrap();
        assert!(segment_is_free(&t, Point2::new(0.5, 0.5), Point2::new(1.9, 0.5)));
        assert!(!segment_is_free(&t, Point2::new(0.5, 0.5), Point2::new(3.5, 0.5)));
    }
}
