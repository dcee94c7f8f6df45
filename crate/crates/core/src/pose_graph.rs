//! Synthetic pose graphs and their spanning-tree D-optimality measure.
//!
//! By the matrix-tree theorem the weighted number of spanning trees of a graph
//! equals the determinant of its weighted Laplacian with one row and column
//! removed. We work with its natural log, computed from a Cholesky factor of
//! the reduced Laplacian, so counts for long trajectories stay representable.

use crate::geometry::{Point2, Pose};
use nalgebra::DMatrix;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("zero spanning trees: graph is disconnected")]
    Disconnected,
    #[error("graph has no nodes")]
    Empty,
    #[error("invalid edge {0}-{1}: {2}")]
    InvalidEdge(usize, usize, &'static str),
    #[error("invalid graph parameters: {0}")]
    InvalidParams(&'static str),
    #[error("edge list line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Odometry,
    LoopClosure,
}

impl EdgeKind {
    fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Odometry => "odometry",
            EdgeKind::LoopClosure => "loop_closure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    pub kind: EdgeKind,
}

/// Trajectory sampling and edge weights for graph construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphBuildParams {
    /// Minimum travel between consecutive nodes (m).
    pub node_spacing: f64,
    /// A new node closes a loop with the nearest earlier, non-adjacent node
    /// within this distance (m).
    pub loop_closure_radius: f64,
    pub odometry_weight: f64,
    pub loop_weight: f64,
}

impl Default for GraphBuildParams {
    fn default() -> Self {
        Self { node_spacing: 0.5, loop_closure_radius: 0.6, odometry_weight: 1.0, loop_weight: 2.0 }
    }
}

impl GraphBuildParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.node_spacing)
            && positive(self.loop_closure_radius)
            && positive(self.odometry_weight)
            && positive(self.loop_weight))
        {
            return Err(GraphError::InvalidParams("all graph parameters must be positive"));
        }
        if self.loop_closure_radius < self.node_spacing {
            return Err(GraphError::InvalidParams("loop_closure_radius must be at least node_spacing"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoseGraph {
    nodes: Vec<Pose>,
    edges: Vec<PoseEdge>,
}

impl PoseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from explicit parts. Node ids are positions in `nodes`.
    pub fn from_parts(nodes: Vec<Pose>, edges: Vec<PoseEdge>) -> Result<Self, GraphError> {
        let mut g = Self { nodes, edges: Vec::with_capacity(edges.len()) };
        for e in edges {
            g.add_edge(e)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, e: PoseEdge) -> Result<(), GraphError> {
        if e.a == e.b {
            return Err(GraphError::InvalidEdge(e.a, e.b, "self-loop"));
        }
        if e.a >= self.nodes.len() || e.b >= self.nodes.len() {
            return Err(GraphError::InvalidEdge(e.a, e.b, "unknown node"));
        }
        if !(e.weight > 0.0 && e.weight.is_finite()) {
            return Err(GraphError::InvalidEdge(e.a, e.b, "weight must be positive"));
        }
        self.edges.push(e);
        Ok(())
    }

    pub fn nodes(&self) -> &[Pose] {
        &self.nodes
    }

    pub fn edges(&self) -> &[PoseEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn loop_closure_count(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::LoopClosure).count()
    }

    /// Adds a node once the robot is at least `node_spacing` away from the
    /// last one, linked by an odometry edge and, when some earlier
    /// non-adjacent node lies within `loop_closure_radius`, by one loop
    /// closure to the nearest such node. Returns whether a node was added.
    pub fn extend_trajectory(&mut self, pose: Pose, params: &GraphBuildParams) -> bool {
        let p = pose.position();
        let Some(last) = self.nodes.last() else {
            self.nodes.push(pose);
            return true;
        };
        if last.position().distance(&p) < params.node_spacing {
            return false;
        }
        let id = self.nodes.len();
        let prev = id - 1;
        let closure = self.nodes[..prev]
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.position().distance(&p)))
            .filter(|&(_, d)| d <= params.loop_closure_radius)
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((i, d)),
            });
        self.nodes.push(pose);
        self.edges.push(PoseEdge { a: prev, b: id, weight: params.odometry_weight, kind: EdgeKind::Odometry });
        if let Some((j, _)) = closure {
            self.edges.push(PoseEdge { a: j, b: id, weight: params.loop_weight, kind: EdgeKind::LoopClosure });
        }
        true
    }

    /// Weighted Laplacian: incident weight sums on the diagonal, negated edge
    /// weights off it. Parallel edges add up.
    pub fn weighted_laplacian(&self) -> DMatrix<f64> {
        let n = self.nodes.len();
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            l[(e.a, e.a)] += e.weight;
            l[(e.b, e.b)] += e.weight;
            l[(e.a, e.b)] -= e.weight;
            l[(e.b, e.a)] -= e.weight;
        }
        l
    }

    pub fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return false;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = n;
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components == 1
    }

    /// Natural log of the weighted spanning-tree count.
    pub fn log_spanning_trees(&self) -> Result<f64, GraphError> {
        let n = self.nodes.len();
        match n {
            0 => return Err(GraphError::Empty),
            1 => return Ok(0.0),
            _ => {}
        }
        if !self.is_connected() {
            return Err(GraphError::Disconnected);
        }
        let mut reduced = DMatrix::<f64>::zeros(n - 1, n - 1);
        for e in &self.edges {
            let (a, b, w) = (e.a as isize - 1, e.b as isize - 1, e.weight);
            if a >= 0 {
                reduced[(a as usize, a as usize)] += w;
            }
            if b >= 0 {
                reduced[(b as usize, b as usize)] += w;
            }
            if a >= 0 && b >= 0 {
                reduced[(a as usize, b as usize)] -= w;
                reduced[(b as usize, a as usize)] -= w;
            }
        }
        let chol = reduced.cholesky().ok_or(GraphError::Disconnected)?;
        Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// Change in log spanning-tree count if the robot followed `path` from
    /// its current trajectory end.
    pub fn predicted_gain(&self, path: &[Point2], params: &GraphBuildParams) -> Result<f64, GraphError> {
        let base = self.log_spanning_trees()?;
        self.predicted_gain_from(base, path, params)
    }

    /// As [`predicted_gain`](Self::predicted_gain) with the current log count
    /// supplied by the caller.
    pub fn predicted_gain_from(
        &self,
        base: f64,
        path: &[Point2],
        params: &GraphBuildParams,
    ) -> Result<f64, GraphError> {
        let mut hypothetical = self.clone();
        for p in path {
            hypothetical.extend_trajectory(Pose::new(p.x, p.y, 0.0), params);
        }
        Ok(hypothetical.log_spanning_trees()? - base)
    }

    /// One line per edge: `a b weight kind`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {} {}", e.a, e.b, e.weight, e.kind.as_str());
        }
        out
    }

    /// Parses [`to_edge_list`](Self::to_edge_list) output. Node poses are not
    /// part of the format and come back as the origin.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut n = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| GraphError::Parse { line: i + 1, reason: reason.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            let [a, b, w, kind] = f[..] else {
                return Err(bad("expected 4 fields"));
            };
            let a: usize = a.parse().map_err(|_| bad("bad node id"))?;
            let b: usize = b.parse().map_err(|_| bad("bad node id"))?;
            let weight: f64 = w.parse().map_err(|_| bad("bad weight"))?;
            let kind = match kind {
                "odometry" => EdgeKind::Odometry,
                "loop_closure" => EdgeKind::LoopClosure,
                _ => return Err(bad("unknown edge kind")),
            };
            n = n.max(a + 1).max(b + 1);
            edges.push(PoseEdge { a, b, weight, kind });
        }
        Self::from_parts(vec![Pose::default(); n], edges)
    }
}

/// Max-normalizes predicted gains into [0, 1]. All-equal gains map to 1.
/// When no gain is positive, gains are min-max scaled instead.
pub fn normalize_gains(gains: &[f64]) -> Vec<f64> {
    let max = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = gains.iter().copied().fold(f64::INFINITY, f64::min);
    if gains.is_empty() || max - min <= 1e-12 * max.abs().max(1.0) {
        return vec![1.0; gains.len()];
    }
    if max > 0.0 {
        gains.iter().map(|g| (g / max).clamp(0.0, 1.0)).collect()
    } else {
        gains.iter().map(|g| (g - min) / (max - min)).collect()
    }
}
