//! Multi-robot frontier exploration.
//!
//! The crate models a team of lidar robots sharing a global frame. Each robot
//! detects frontiers on its own map; a central allocation server merges and
//! filters the candidate lists against the merged map, every robot scores the
//! surviving candidates with a utility built from path entropy, distance
//! decay and the spanning-tree count of its pose graph, and the server spreads
//! the chosen goals by penalizing rewards near already assigned ones.

pub mod allocation;
pub mod config;
pub mod frontier;
pub mod geometry;
pub mod grid_map;
pub mod planner;
pub mod pose_graph;
pub mod simulator;
pub mod utility;

pub use geometry::{AgentId, Cell, Point2, Pose};
