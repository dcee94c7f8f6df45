//! Central goal allocation.
//!
//! The server handles one reward matrix at a time. Requests are served in
//! ascending agent id, with a starvation guard: an agent may be passed over
//! at most `goal_skip_wait` consecutive times. Assigned goals are remembered,
//! and rewards near them are lowered by `K / d²` with
//! `K = |max reward| / |chosen|`, so later agents are pushed away from goals
//! already taken.

use crate::frontier::{
    dedup_points, enforce_list_bounds, merge_points, unknown_percentage, FilterParams, FrontierPoint,
};
use crate::geometry::{AgentId, Point2};
use crate::grid_map::{GridGeometry, OccupancyGrid};
use crate::utility::{Reward, RewardMatrix, RewardRow};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AllocationError {
    #[error("no assignable goal")]
    NoAssignableGoal,
    #[error("empty reward matrix")]
    EmptyMatrix,
    #[error("agent {0} does not hold the current turn")]
    NotYourTurn(AgentId),
    #[error("unexpected message {0}")]
    UnexpectedMessage(&'static str),
}

/// Turn order with bounded waiting.
///
/// The lowest pending id is served unless that would leave some agent unable
/// to be served before its deferral count passes `goal_skip_wait`, assuming
/// every pending agent keeps waiting. In that case the most-deferred agent
/// (lowest id on ties) goes first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scheduler {
    goal_skip_wait: u32,
    skip_counters: BTreeMap<AgentId, u32>,
}

impl Scheduler {
    pub fn new(goal_skip_wait: u32) -> Self {
        Self { goal_skip_wait, skip_counters: BTreeMap::new() }
    }

    pub fn goal_skip_wait(&self) -> u32 {
        self.goal_skip_wait
    }

    pub fn skip_counter(&self, agent: AgentId) -> u32 {
        self.skip_counters.get(&agent).copied().unwrap_or(0)
    }

    pub fn set_skip_counter(&mut self, agent: AgentId, count: u32) {
        self.skip_counters.insert(agent, count);
    }

    /// Whether serving `served` keeps every other pending agent schedulable
    /// within its remaining allowance.
    fn feasible_after(&self, pending: &BTreeSet<AgentId>, served: AgentId) -> bool {
        let mut slack: Vec<i64> = pending
            .iter()
            .filter(|&&a| a != served)
            .map(|&a| self.goal_skip_wait as i64 - (self.skip_counter(a) as i64 + 1))
            .collect();
        slack.sort_unstable();
        // The k-th tightest agent (0-based) can be served in round k at the
        // earliest, after k deferrals.
        slack.iter().enumerate().all(|(k, &s)| s >= k as i64)
    }

    /// Picks the agent to serve, bumps the others' counters and resets the
    /// winner's. `pending` must be non-empty.
    pub fn schedule(&mut self, pending: &BTreeSet<AgentId>) -> AgentId {
        let first = *pending.first().expect("pending set is non-empty");
        let served = if self.feasible_after(pending, first) {
            first
        } else {
            *pending
                .iter()
                .max_by(|a, b| self.skip_counter(**a).cmp(&self.skip_counter(**b)).then(b.cmp(a)))
                .expect("pending set is non-empty")
        };
        for &a in pending {
            let c = self.skip_counters.entry(a).or_insert(0);
            *c = if a == served { 0 } else { *c + 1 };
        }
        served
    }
}

/// How the final goal is taken from a reward matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// Lower rewards near remembered goals, never repeat one.
    Spread,
    /// Plain argmax; nothing is remembered.
    Independent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationState {
    /// Goals handed out and not yet explored, oldest first.
    pub chosen: Vec<Point2>,
    pub scheduler: Scheduler,
    geometry: GridGeometry,
}

impl AllocationState {
    /// `geometry` defines when two points are the same goal: they fall in
    /// the same cell.
    pub fn new(geometry: GridGeometry, goal_skip_wait: u32) -> Self {
        Self { chosen: Vec::new(), scheduler: Scheduler::new(goal_skip_wait), geometry }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn is_chosen(&self, p: Point2) -> bool {
        same_cell_any(&self.geometry, &self.chosen, p)
    }

    /// Drops remembered goals whose `rad` disc on the merged map has no
    /// unknown cell left.
    pub fn evict_explored(&mut self, merged: &OccupancyGrid, rad: f64) -> usize {
        let before = self.chosen.len();
        self.chosen.retain(|&p| unknown_percentage(p, merged, rad).is_some_and(|u| u > 0.0));
        before - self.chosen.len()
    }

    /// Takes the best row of `h`, records it and returns it.
    pub fn select_goal(
        &mut self,
        mut h: RewardMatrix,
        policy: SelectionPolicy,
    ) -> Result<FrontierPoint, AllocationError> {
        if h.rows.is_empty() {
            return Err(AllocationError::EmptyMatrix);
        }
        if policy == SelectionPolicy::Independent {
            return h.argmax().map(|i| h.rows[i].point).ok_or(AllocationError::NoAssignableGoal);
        }
        if !self.chosen.is_empty() {
            update_rewards(&self.chosen, &self.geometry, &mut h);
        }
        loop {
            let i = h.argmax().ok_or(AllocationError::NoAssignableGoal)?;
            let p = h.rows[i].point;
            if self.is_chosen(p.position()) {
                h.rows[i].reward = Reward::Suppressed;
                continue;
            }
            self.chosen.push(p.position());
            return Ok(p);
        }
    }
}

fn same_cell(g: &GridGeometry, a: Point2, b: Point2) -> bool {
    g.world_to_grid(a) == g.world_to_grid(b)
}

fn same_cell_any(g: &GridGeometry, set: &[Point2], p: Point2) -> bool {
    set.iter().any(|&c| same_cell(g, c, p))
}

/// Lowers every finite reward by `K / d²` for each chosen point at distance
/// `d`, with `K = |max finite reward| / |chosen|`; rows on a chosen cell are
/// suppressed. Returns the `K` used, or `None` (leaving `h` untouched) when no
/// reward is finite. `chosen` must be non-empty.
pub fn update_rewards(chosen: &[Point2], geometry: &GridGeometry, h: &mut RewardMatrix) -> Option<f64> {
    assert!(!chosen.is_empty(), "reward spreading needs at least one chosen goal");
    let k_total = h.max_finite()?.abs() / chosen.len() as f64;
    for &c in chosen {
        for row in &mut h.rows {
            let Reward::Finite(r) = row.reward else { continue };
            let g = row.point.position();
            let d = c.distance(&g);
            row.reward = if same_cell(geometry, c, g) || d == 0.0 {
                Reward::Suppressed
            } else {
                Reward::Finite(r - k_total / (d * d))
            };
        }
    }
    Some(k_total)
}

/// Request/response messages between agents and the server.
#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    RequestTurn {
        agent: AgentId,
    },
    SubmitPoints {
        agent: AgentId,
        points: Vec<Point2>,
    },
    PointsReply {
        points: Vec<Point2>,
    },
    /// Suppressed rewards travel as negative infinity.
    SubmitRewards {
        agent: AgentId,
        rows: Vec<(f64, f64, f64)>,
    },
    GoalReply {
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("truncated message")]
    Truncated,
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

impl Message {
    fn name(&self) -> &'static str {
        match self {
            Message::RequestTurn { .. } => "RequestTurn",
            Message::SubmitPoints { .. } => "SubmitPoints",
            Message::PointsReply { .. } => "PointsReply",
            Message::SubmitRewards { .. } => "SubmitRewards",
            Message::GoalReply { .. } => "GoalReply",
        }
    }

    /// Little-endian encoding: a tag byte, agent ids as u32, numbers as f64,
    /// lists prefixed by a u32 length.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let agent = |out: &mut Vec<u8>, a: AgentId| out.extend((a.0 as u32).to_le_bytes());
        let num = |out: &mut Vec<u8>, v: f64| out.extend(v.to_le_bytes());
        let len = |out: &mut Vec<u8>, n: usize| out.extend((n as u32).to_le_bytes());
        match self {
            Message::RequestTurn { agent: a } => {
                out.push(0);
                agent(&mut out, *a);
            }
            Message::SubmitPoints { agent: a, points } => {
                out.push(1);
                agent(&mut out, *a);
                len(&mut out, points.len());
                for p in points {
                    num(&mut out, p.x);
                    num(&mut out, p.y);
                }
            }
            Message::PointsReply { points } => {
                out.push(2);
                len(&mut out, points.len());
                for p in points {
                    num(&mut out, p.x);
                    num(&mut out, p.y);
                }
            }
            Message::SubmitRewards { agent: a, rows } => {
                out.push(3);
                agent(&mut out, *a);
                len(&mut out, rows.len());
                for &(x, y, r) in rows {
                    num(&mut out, x);
                    num(&mut out, y);
                    num(&mut out, r);
                }
            }
            Message::GoalReply { x, y } => {
                out.push(4);
                num(&mut out, *x);
                num(&mut out, *y);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader { bytes, pos: 0 };
        let msg = match r.u8()? {
            0 => Message::RequestTurn { agent: r.agent()? },
            1 => {
                let agent = r.agent()?;
                Message::SubmitPoints { agent, points: r.points()? }
            }
            2 => Message::PointsReply { points: r.points()? },
            3 => {
                let agent = r.agent()?;
                let n = r.len(24)?;
                let rows = (0..n).map(|_| Ok((r.f64()?, r.f64()?, r.f64()?))).collect::<Result<_, _>>()?;
                Message::SubmitRewards { agent, rows }
            }
            4 => Message::GoalReply { x: r.f64()?, y: r.f64()? },
            t => return Err(CodecError::UnknownTag(t)),
        };
        match bytes.len() - r.pos {
            0 => Ok(msg),
            n => Err(CodecError::Trailing(n)),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let s = self.bytes.get(self.pos..self.pos + N).ok_or(CodecError::Truncated)?;
        self.pos += N;
        Ok(s.try_into().expect("slice has length N"))
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn agent(&mut self) -> Result<AgentId, CodecError> {
        Ok(AgentId(self.u32()? as usize))
    }

    /// Reads a list length, rejecting lengths the remaining bytes cannot hold.
    fn len(&mut self, item_size: usize) -> Result<usize, CodecError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(item_size) > self.bytes.len() - self.pos {
            return Err(CodecError::Truncated);
        }
        Ok(n)
    }

    fn points(&mut self) -> Result<Vec<Point2>, CodecError> {
        let n = self.len(16)?;
        (0..n).map(|_| Ok(Point2::new(self.f64()?, self.f64()?))).collect()
    }
}

/// Candidate-list counts of one served turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ListCounts {
    /// Points submitted by all agents, duplicates included.
    pub raw: usize,
    /// Points offered to the served agent.
    pub filtered: usize,
}

/// How the server prepares the candidate list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidatePolicy {
    /// Remembered goals removed, then border filtering and list-size
    /// control on the merged map.
    Filtered,
    /// Every submitted point, duplicates removed.
    Unfiltered,
}

/// The message-driven server. One turn at a time: `begin_turn` picks an
/// agent from the pending requests; that agent's `SubmitPoints` is answered
/// with the candidate list and its `SubmitRewards` with a goal.
#[derive(Clone, Debug)]
pub struct AllocationServer {
    pub state: AllocationState,
    pub filter: FilterParams,
    pub candidates: CandidatePolicy,
    pub selection: SelectionPolicy,
    pending: BTreeSet<AgentId>,
    lists: BTreeMap<AgentId, Vec<FrontierPoint>>,
    current: Option<AgentId>,
    last_counts: Option<ListCounts>,
}

impl AllocationServer {
    pub fn new(
        state: AllocationState,
        filter: FilterParams,
        candidates: CandidatePolicy,
        selection: SelectionPolicy,
    ) -> Self {
        Self {
            state,
            filter,
            candidates,
            selection,
            pending: BTreeSet::new(),
            lists: BTreeMap::new(),
            current: None,
            last_counts: None,
        }
    }

    pub fn pending(&self) -> &BTreeSet<AgentId> {
        &self.pending
    }

    pub fn current(&self) -> Option<AgentId> {
        self.current
    }

    /// Counts from the most recent candidate list, cleared when read.
    pub fn take_counts(&mut self) -> Option<ListCounts> {
        self.last_counts.take()
    }

    /// Starts a turn for the next pending agent, if any and if no turn is
    /// open.
    pub fn begin_turn(&mut self) -> Option<AgentId> {
        if self.current.is_some() || self.pending.is_empty() {
            return None;
        }
        let agent = self.state.scheduler.schedule(&self.pending);
        self.pending.remove(&agent);
        self.current = Some(agent);
        Some(agent)
    }

    /// Closes the open turn without assigning a goal.
    pub fn end_turn(&mut self) {
        self.current = None;
    }

    fn candidate_list(&self, merged: &OccupancyGrid) -> (Vec<FrontierPoint>, ListCounts) {
        let lists: Vec<Vec<FrontierPoint>> = self.lists.values().cloned().collect();
        let raw: Vec<FrontierPoint> = lists.iter().flatten().copied().collect();
        let points = match self.candidates {
            CandidatePolicy::Filtered => {
                // Goals already handed out are not offered again.
                let fresh: Vec<Vec<FrontierPoint>> = lists
                    .iter()
                    .map(|l| l.iter().filter(|p| !self.state.is_chosen(p.position())).copied().collect())
                    .collect();
                let fresh_raw: Vec<FrontierPoint> = fresh.iter().flatten().copied().collect();
                let uni = merge_points(&fresh, merged, &self.filter);
                enforce_list_bounds(uni, &fresh_raw, merged, &self.filter).points
            }
            CandidatePolicy::Unfiltered => dedup_points(&raw, merged),
        };
        let counts = ListCounts { raw: raw.len(), filtered: points.len() };
        (points, counts)
    }

    /// Processes one message against the current merged map.
    pub fn handle(&mut self, msg: Message, merged: &OccupancyGrid) -> Result<Option<Message>, AllocationError> {
        match msg {
            Message::RequestTurn { agent } => {
                self.pending.insert(agent);
                Ok(None)
            }
            Message::SubmitPoints { agent, points } => {
                let list = points.iter().map(|p| FrontierPoint::new(p.x, p.y, agent)).collect();
                self.lists.insert(agent, list);
                if self.current != Some(agent) {
                    return Ok(None);
                }
                let (points, counts) = self.candidate_list(merged);
                self.last_counts = Some(counts);
                Ok(Some(Message::PointsReply { points: points.iter().map(FrontierPoint::position).collect() }))
            }
            Message::SubmitRewards { agent, rows } => {
                if self.current != Some(agent) {
                    return Err(AllocationError::NotYourTurn(agent));
                }
                self.current = None;
                let h = RewardMatrix {
                    owner: agent,
                    rows: rows
                        .into_iter()
                        .map(|(x, y, r)| RewardRow {
                            point: FrontierPoint::new(x, y, agent),
                            reward: if r.is_finite() { Reward::Finite(r) } else { Reward::Suppressed },
                        })
                        .collect(),
                };
                let goal = self.state.select_goal(h, self.selection)?;
                Ok(Some(Message::GoalReply { x: goal.x, y: goal.y }))
            }
            other => Err(AllocationError::UnexpectedMessage(other.name())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> GridGeometry {
        GridGeometry::new(0.1, 0.0, 0.0, 200, 200).unwrap()
    }

    fn matrix(rows: &[(f64, f64, f64)]) -> RewardMatrix {
        RewardMatrix {
            owner: AgentId(0),
            rows: rows
                .iter()
                .map(|&(x, y, r)| RewardRow { point: FrontierPoint::new(x, y, AgentId(0)), reward: Reward::Finite(r) })
                .collect(),
        }
    }

    fn ids(v: &[usize]) -> BTreeSet<AgentId> {
        v.iter().map(|&i| AgentId(i)).collect()
    }

    #[test]
    fn lowest_id_first() {
        let mut s = Scheduler::new(5);
        assert_eq!(s.schedule(&ids(&[2, 0, 1])), AgentId(0));
        assert_eq!((s.skip_counter(AgentId(1)), s.skip_counter(AgentId(2))), (1, 1));
    }

    #[test]
    fn starved_agent_is_served() {
        let mut s = Scheduler::new(5);
        s.set_skip_counter(AgentId(2), 5);
        assert_eq!(s.schedule(&ids(&[0, 2])), AgentId(2));
        assert_eq!(s.skip_counter(AgentId(2)), 0);
        assert_eq!(s.skip_counter(AgentId(0)), 1);
    }

    #[test]
    fn single_agent_resets() {
        let mut s = Scheduler::new(5);
        s.set_skip_counter(AgentId(3), 2);
        assert_eq!(s.schedule(&ids(&[3])), AgentId(3));
        assert_eq!(s.skip_counter(AgentId(3)), 0);
    }

    #[test]
    fn two_starving_agents_stay_within_bound() {
        let mut s = Scheduler::new(5);
        let all = ids(&[0, 1, 2]);
        for _ in 0..100 {
            s.schedule(&all);
            for a in &all {
                assert!(s.skip_counter(*a) <= 5);
            }
        }
    }

    #[test]
    fn spreading_arithmetic() {
        let g = geometry();
        let chosen: Vec<Point2> = [(0.0, 0.0), (18.0, 18.0), (18.5, 18.0), (19.0, 18.0), (19.5, 18.0)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let mut h = matrix(&[(2.05, 0.05, 10.0)]);
        // Only the first chosen point matters to the arithmetic below; the
        // others are far away.
        let k = update_rewards(&chosen, &g, &mut h).unwrap();
        assert_eq!(k, 2.0);
        let d0 = Point2::new(2.05, 0.05).distance(&Point2::default());
        let far: f64 = chosen[1..].iter().map(|c| 2.0 / c.distance(&Point2::new(2.05, 0.05)).powi(2)).sum();
        let expected = 10.0 - 2.0 / (d0 * d0) - far;
        assert!((h.rows[0].reward.value().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn spreading_penalty_for_distance_two() {
        let g = geometry();
        let mut h = matrix(&[(5.0, 3.0, 10.0), (15.0, 15.0, 4.0)]);
        let chosen = [Point2::new(3.0, 3.0)];
        assert_eq!(update_rewards(&chosen, &g, &mut h), Some(10.0));
        assert_eq!(h.rows[0].reward, Reward::Finite(10.0 - 10.0 / 4.0));
    }

    #[test]
    fn coinciding_row_is_suppressed() {
        let g = geometry();
        let mut h = matrix(&[(1.02, 1.02, 3.0), (5.0, 5.0, 1.0)]);
        update_rewards(&[Point2::new(1.05, 1.05)], &g, &mut h);
        assert_eq!(h.rows[0].reward, Reward::Suppressed);
        assert!(h.rows[1].reward.is_finite());
    }

    #[test]
    fn penalties_accumulate() {
        let g = geometry();
        let mut h = matrix(&[(5.0, 5.0, 8.0)]);
        let chosen = [Point2::new(3.0, 5.0), Point2::new(7.0, 5.0)];
        let k = update_rewards(&chosen, &g, &mut h).unwrap();
        assert_eq!(k, 4.0);
        assert_eq!(h.rows[0].reward, Reward::Finite(8.0 - 2.0 * 4.0 / 4.0));
    }

    #[test]
    fn all_suppressed_is_untouched() {
        let g = geometry();
        let mut h = matrix(&[(1.0, 1.0, 0.0)]);
        h.rows[0].reward = Reward::Suppressed;
        let before = h.clone();
        assert_eq!(update_rewards(&[Point2::new(3.0, 3.0)], &g, &mut h), None);
        assert_eq!(h, before);
    }

    #[test]
    fn select_records_and_skips_chosen() {
        let mut st = AllocationState::new(geometry(), 5);
        let a = (2.0, 2.0, 5.0);
        let b = (12.0, 12.0, 3.0);
        let got = st.select_goal(matrix(&[a, b]), SelectionPolicy::Spread).unwrap();
        assert_eq!(got.position(), Point2::new(2.0, 2.0));
        assert_eq!(st.chosen, vec![Point2::new(2.0, 2.0)]);
        let got = st.select_goal(matrix(&[a, b]), SelectionPolicy::Spread).unwrap();
        assert_eq!(got.position(), Point2::new(12.0, 12.0));
        assert_eq!(st.select_goal(matrix(&[a]), SelectionPolicy::Spread), Err(AllocationError::NoAssignableGoal));
    }

    #[test]
    fn equal_rewards_pick_lowest_index() {
        let mut st = AllocationState::new(geometry(), 5);
        let got = st
            .select_goal(matrix(&[(3.0, 1.0, 2.0), (1.0, 3.0, 2.0), (5.0, 5.0, 2.0)]), SelectionPolicy::Spread)
            .unwrap();
        assert_eq!(got.position(), Point2::new(3.0, 1.0));
    }

    #[test]
    fn eviction_after_exploration() {
        let g = GridGeometry::new(0.1, 0.0, 0.0, 60, 60).unwrap();
        let mut st = AllocationState::new(g, 5);
        st.chosen = vec![Point2::new(1.0, 1.0), Point2::new(4.5, 4.5)];
        let mut merged = OccupancyGrid::new(g);
        for y in 0..30 {
            for x in 0..30 {
                merged.set(crate::Cell::new(x, y), crate::grid_map::CellState::Free);
            }
        }
        assert_eq!(st.evict_explored(&merged, 1.0), 1);
        assert_eq!(st.chosen, vec![Point2::new(4.5, 4.5)]);
    }

    #[test]
    fn codec_round_trip_and_errors() {
        let msgs = [
            Message::RequestTurn { agent: AgentId(7) },
            Message::SubmitPoints { agent: AgentId(1), points: vec![Point2::new(1.5, -2.0)] },
            Message::PointsReply { points: vec![] },
            Message::SubmitRewards { agent: AgentId(2), rows: vec![(1.0, 2.0, f64::NEG_INFINITY), (0.0, 0.0, 3.25)] },
            Message::GoalReply { x: 4.0, y: 5.5 },
        ];
        for m in msgs {
            let bytes = m.encode();
            assert_eq!(Message::decode(&bytes).unwrap(), m);
            assert_eq!(Message::decode(&bytes[..bytes.len() - 1]), Err(CodecError::Truncated));
        }
        assert_eq!(Message::decode(&[9]), Err(CodecError::UnknownTag(9)));
        assert_eq!(Message::decode(&[0, 1, 0, 0, 0, 0]), Err(CodecError::Trailing(1)));
        assert_eq!(Message::decode(&[2, 255, 255, 255, 255]), Err(CodecError::Truncated));
    }

    fn open_map() -> OccupancyGrid {
        OccupancyGrid::new(GridGeometry::new(0.1, 0.0, 0.0, 100, 100).unwrap())
    }

    #[test]
    fn server_turn_flow() {
        let merged = open_map();
        let mut server = AllocationServer::new(
            AllocationState::new(*merged.geometry(), 5),
            FilterParams::default(),
            CandidatePolicy::Filtered,
            SelectionPolicy::Spread,
        );
        for a in [1, 0] {
            server.handle(Message::RequestTurn { agent: AgentId(a) }, &merged).unwrap();
        }
        assert_eq!(server.begin_turn(), Some(AgentId(0)));
        assert_eq!(server.begin_turn(), None);
        let other =
            server.handle(Message::SubmitPoints { agent: AgentId(1), points: vec![Point2::new(5.0, 5.0)] }, &merged);
        assert_eq!(other, Ok(None));
        let reply = server
            .handle(
                Message::SubmitPoints { agent: AgentId(0), points: vec![Point2::new(2.0, 2.0), Point2::new(2.0, 2.0)] },
                &merged,
            )
            .unwrap();
        let Some(Message::PointsReply { points }) = reply else { panic!("{reply:?}") };
        assert_eq!(points, vec![Point2::new(2.0, 2.0), Point2::new(5.0, 5.0)]);
        assert_eq!(server.take_counts(), Some(ListCounts { raw: 3, filtered: 2 }));
        assert_eq!(
            server.handle(Message::SubmitRewards { agent: AgentId(1), rows: vec![] }, &merged),
            Err(AllocationError::NotYourTurn(AgentId(1)))
        );
        let goal = server
            .handle(Message::SubmitRewards { agent: AgentId(0), rows: vec![(5.0, 5.0, 1.0), (2.0, 2.0, 2.0)] }, &merged)
            .unwrap();
        assert_eq!(goal, Some(Message::GoalReply { x: 2.0, y: 2.0 }));
        assert_eq!(server.begin_turn(), Some(AgentId(1)));
    }
}
