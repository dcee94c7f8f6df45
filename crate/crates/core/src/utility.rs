//! Candidate scoring.
//!
//! For a candidate goal `n` reached along planned path `G^n` of `L` cells
//! with summed cell entropy `E`:
//!
//! ```text
//! γ  = exp(-λ d)                 d: straight-line distance robot → candidate
//! U2 = (1 - E/L) ρ + γ           ρ: normalized pose-graph gain
//! U  = Δ + U2                    Δ: log spanning-tree gain of the path
//! ```
//!
//! Low `E/L` means the path runs through known space, so the robot can
//! localize on the way; `Δ` rewards paths that close loops.

use crate::frontier::FrontierPoint;
use crate::geometry::{AgentId, Cell, Point2, Pose};
use crate::grid_map::{cell_entropy, OccupancyGrid};
use crate::planner::{DistanceField, GridPath, PlanError, PlannerConfig};
use crate::pose_graph::{normalize_gains, GraphBuildParams, GraphError, PoseGraph};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum UtilityError {
    #[error("no path")]
    NoPath,
    #[error("no candidates")]
    NoCandidates,
    #[error("no viable candidates")]
    NoViableCandidates,
    #[error("invalid utility parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityParams {
    /// Distance decay rate per meter.
    pub lambda: f64,
    /// Weight of the pose-graph gain term.
    pub u1_weight: f64,
    /// Weight of the entropy/decay term.
    pub u2_weight: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        Self { lambda: 0.1, u1_weight: 1.0, u2_weight: 1.0 }
    }
}

impl UtilityParams {
    pub fn validate(&self) -> Result<(), UtilityError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(UtilityError::InvalidParams("lambda must be positive".into()));
        }
        for (name, w) in [("u1_weight", self.u1_weight), ("u2_weight", self.u2_weight)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(UtilityError::InvalidParams(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Which terms make up the reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UtilityMode {
    /// `Δ + U2`.
    #[default]
    Full,
    /// `Δ + γ`: pose-graph gain and distance decay only.
    GainAndDecay,
}

/// A reward, or the marker for a candidate that must not be chosen.
/// `Suppressed` orders below every finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reward {
    Suppressed,
    Finite(f64),
}

impl Reward {
    pub fn value(self) -> Option<f64> {
        match self {
            Reward::Finite(v) => Some(v),
            Reward::Suppressed => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Reward::Finite(_))
    }
}

impl PartialOrd for Reward {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Reward::Suppressed, Reward::Suppressed) => Some(Ordering::Equal),
            (Reward::Suppressed, Reward::Finite(_)) => Some(Ordering::Less),
            (Reward::Finite(_), Reward::Suppressed) => Some(Ordering::Greater),
            (Reward::Finite(a), Reward::Finite(b)) => a.partial_cmp(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardRow {
    pub point: FrontierPoint,
    pub reward: Reward,
}

/// One agent's rewards, one row per candidate in the order received.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardMatrix {
    pub owner: AgentId,
    pub rows: Vec<RewardRow>,
}

impl RewardMatrix {
    /// Largest finite reward.
    pub fn max_finite(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.reward.value()).reduce(f64::max)
    }

    /// Index of the largest reward, lowest index on ties; `None` when every
    /// row is suppressed.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(v) = r.reward.value() {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Summed entropy (bits) and cell count of a path.
pub fn path_entropy(grid: &OccupancyGrid, path: &[Cell]) -> Result<(f64, usize), UtilityError> {
    if path.is_empty() {
        return Err(UtilityError::NoPath);
    }
    let mut e = 0.0;
    for &c in path {
        let p = grid.probability(c).ok_or(UtilityError::NoPath)?;
        e += cell_entropy(p).expect("class probabilities are validated");
    }
    Ok((e, path.len()))
}

pub fn decay(distance: f64, params: &UtilityParams) -> f64 {
    (-params.lambda * distance.max(0.0)).exp()
}

pub fn u2(entropy: f64, length: usize, rho: f64, gamma: f64) -> f64 {
    (1.0 - entropy / length as f64) * rho + gamma
}

/// Everything the scorer needs about the agent asking.
#[derive(Clone, Copy, Debug)]
pub struct ScoringContext<'a> {
    pub agent: AgentId,
    pub pose: Pose,
    /// Map used for planning and path entropy.
    pub grid: &'a OccupancyGrid,
    pub graph: &'a PoseGraph,
    pub graph_params: &'a GraphBuildParams,
    pub planner: PlannerConfig,
    pub params: &'a UtilityParams,
    pub mode: UtilityMode,
}

/// Plans from one start to many goals, retrying without obstacle inflation
/// for goals the inflated search cannot reach.
pub struct MultiGoalPlanner<'a> {
    grid: &'a OccupancyGrid,
    start: Point2,
    inflated: Option<DistanceField>,
    plain: Option<Option<DistanceField>>,
}

impl<'a> MultiGoalPlanner<'a> {
    pub fn new(grid: &'a OccupancyGrid, start: Point2, config: PlannerConfig) -> Self {
        let inflated = DistanceField::compute(grid, start, config).ok();
        let plain = (config.inflation == 0).then_some(None);
        Self { grid, start, inflated, plain }
    }

    pub fn path_to(&mut self, goal: Point2) -> Result<GridPath, PlanError> {
        if let Some(Ok(p)) = self.inflated.as_ref().map(|f| f.path_to(goal)) {
            return Ok(p);
        }
        let (grid, start) = (self.grid, self.start);
        let plain =
            self.plain.get_or_insert_with(|| DistanceField::compute(grid, start, PlannerConfig { inflation: 0 }).ok());
        plain.as_ref().ok_or(PlanError::NoPath)?.path_to(goal)
    }
}

/// Scores every candidate. Unreachable candidates keep their row with a
/// suppressed reward.
pub fn build_reward_matrix(ctx: &ScoringContext, candidates: &[FrontierPoint]) -> Result<RewardMatrix, UtilityError> {
    if candidates.is_empty() {
        return Err(UtilityError::NoCandidates);
    }
    let here = ctx.pose.position();
    let mut planner = MultiGoalPlanner::new(ctx.grid, here, ctx.planner);
    let base = ctx.graph.log_spanning_trees()?;

    struct Scored {
        delta: f64,
        entropy: f64,
        length: usize,
        gamma: f64,
    }
    let mut scored: Vec<Option<Scored>> = Vec::with_capacity(candidates.len());
    for c in candidates {
        let Ok(path) = planner.path_to(c.position()) else {
            scored.push(None);
            continue;
        };
        let (entropy, length) = path_entropy(ctx.grid, &path.cells)?;
        let delta = ctx.graph.predicted_gain_from(base, &path.waypoints, ctx.graph_params)?;
        let gamma = decay(here.distance(&c.position()), ctx.params);
        scored.push(Some(Scored { delta, entropy, length, gamma }));
    }
    if scored.iter().all(Option::is_none) {
        return Err(UtilityError::NoViableCandidates);
    }

    let deltas: Vec<f64> = scored.iter().flatten().map(|s| s.delta).collect();
    let mut rhos = normalize_gains(&deltas).into_iter();
    let rows = candidates
        .iter()
        .zip(&scored)
        .map(|(&point, s)| {
            let reward = match s {
                None => Reward::Suppressed,
                Some(s) => {
                    let rho = rhos.next().expect("one rho per reachable candidate");
                    let second = match ctx.mode {
                        UtilityMode::Full => u2(s.entropy, s.length, rho, s.gamma),
                        UtilityMode::GainAndDecay => s.gamma,
                    };
                    Reward::Finite(ctx.params.u1_weight * s.delta + ctx.params.u2_weight * second)
                }
            };
            RewardRow { point, reward }
        })
        .collect();
    Ok(RewardMatrix { owner: ctx.agent, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_map::CellState;

    fn binary_entropy(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    #[test]
    fn entropy_of_free_and_unknown_paths() {
        let g = OccupancyGrid::from_rows(1.0, Point2::default(), &["......", "??????"]).unwrap();
        let free: Vec<Cell> = (0..6).map(|x| Cell::new(x, 1)).collect();
        let (e, l) = path_entropy(&g, &free).unwrap();
        assert_eq!(l, 6);
        assert!((e / l as f64 - binary_entropy(0.05)).abs() < 1e-12);
        assert!((e / l as f64 - 0.2864).abs() < 1e-4);
        let unknown: Vec<Cell> = (0..6).map(|x| Cell::new(x, 0)).collect();
        let (e, l) = path_entropy(&g, &unknown).unwrap();
        assert_eq!(e / l as f64, 1.0);
        assert_eq!(path_entropy(&g, &[]), Err(UtilityError::NoPath));
        assert_eq!(path_entropy(&g, &[Cell::new(0, 1)]).unwrap(), (binary_entropy(0.05), 1));
    }

    #[test]
    fn decay_values() {
        let p = UtilityParams::default();
        assert_eq!(decay(0.0, &p), 1.0);
        assert!((decay(10.0, &p) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(decay(3.0, &p) > decay(3.5, &p));
    }

    #[test]
    fn u2_values() {
        assert_eq!(u2(10.0, 10, 0.7, 0.5), 0.5);
        assert_eq!(u2(0.0, 4, 1.0, 0.0), 1.0);
        let expected = (1.0 - 3.0 / 10.0) * 0.5 + 0.3679;
        assert!((u2(3.0, 10, 0.5, 0.3679) - expected).abs() < 1e-12);
        assert!((u2(3.0, 10, 0.5, 0.3679) - 0.7179).abs() < 1e-4);
    }

    #[test]
    fn reward_ordering() {
        assert!(Reward::Suppressed < Reward::Finite(-1e300));
        assert!(Reward::Finite(1.0) < Reward::Finite(2.0));
        let m = RewardMatrix {
            owner: AgentId(0),
            rows: [Reward::Finite(1.0), Reward::Suppressed, Reward::Finite(3.0), Reward::Finite(3.0)]
                .into_iter()
                .map(|reward| RewardRow { point: FrontierPoint::new(0.0, 0.0, AgentId(0)), reward })
                .collect(),
        };
        assert_eq!(m.argmax(), Some(2));
        assert_eq!(m.max_finite(), Some(3.0));
    }

    struct Fixture {
        grid: OccupancyGrid,
        graph: PoseGraph,
        graph_params: GraphBuildParams,
        params: UtilityParams,
    }

    impl Fixture {
        fn new(rows: &[&str]) -> Self {
            let grid = OccupancyGrid::from_rows(1.0, Point2::default(), rows).unwrap();
            let mut graph = PoseGraph::new();
            graph.extend_trajectory(Pose::new(0.5, 0.5, 0.0), &GraphBuildParams::default());
            Self { grid, graph, graph_params: GraphBuildParams::default(), params: UtilityParams::default() }
        }

        fn score(&self, pose: Pose, candidates: &[FrontierPoint]) -> Result<RewardMatrix, UtilityError> {
            let ctx = ScoringContext {
                agent: AgentId(0),
                pose,
                grid: &self.grid,
                graph: &self.graph,
                graph_params: &self.graph_params,
                planner: PlannerConfig { inflation: 0 },
                params: &self.params,
                mode: UtilityMode::Full,
            };
            build_reward_matrix(&ctx, candidates)
        }
    }

    fn pt(x: f64, y: f64) -> FrontierPoint {
        FrontierPoint::new(x, y, AgentId(0))
    }

    #[test]
    fn single_candidate_has_rho_one() {
        let f = Fixture::new(&["......"]);
        let m = f.score(Pose::new(0.5, 0.5, 0.0), &[pt(4.5, 0.5)]).unwrap();
        assert_eq!(m.rows.len(), 1);
        // Straight path: no loop closure, Δ = 0, ρ = 1, all cells free.
        let expected = (1.0 - binary_entropy(0.05)) + (-0.1f64 * 4.0).exp();
        assert!((m.rows[0].reward.value().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn nearer_candidate_wins_when_all_else_equal() {
        let f = Fixture::new(&["........."]);
        let m = f.score(Pose::new(4.5, 0.5, 0.0), &[pt(1.5, 0.5), pt(6.5, 0.5)]).unwrap();
        let (a, b) = (m.rows[0].reward.value().unwrap(), m.rows[1].reward.value().unwrap());
        assert!(b > a, "{a} {b}");
    }

    #[test]
    fn sealed_candidate_is_suppressed() {
        let f = Fixture::new(&["......###", "......#.#", "......###"]);
        let m = f.score(Pose::new(0.5, 0.5, 0.0), &[pt(7.5, 1.5), pt(3.5, 1.5)]).unwrap();
        assert_eq!(m.rows[0].reward, Reward::Suppressed);
        assert!(m.rows[1].reward.is_finite());
        assert_eq!(f.score(Pose::new(0.5, 0.5, 0.0), &[pt(7.5, 1.5)]), Err(UtilityError::NoViableCandidates));
        assert_eq!(f.score(Pose::new(0.5, 0.5, 0.0), &[]), Err(UtilityError::NoCandidates));
    }

    #[test]
    fn scoring_is_deterministic() {
        let mut f = Fixture::new(&["..??..", ".#??#.", "......"]);
        f.grid.set(Cell::new(5, 2), CellState::Unknown);
        let c = [pt(2.5, 1.5), pt(5.5, 2.5), pt(0.5, 2.5)];
        let pose = Pose::new(0.5, 0.5, 0.0);
        assert_eq!(f.score(pose, &c).unwrap(), f.score(pose, &c).unwrap());
    }
}
