//! WebAssembly bindings for the browser demo: step a three-robot run on the
//! bundled desk map, render it to RGBA, and preview the frontier filter.

use mrexplore::config::{Method, ScenarioConfig};
use mrexplore::frontier::{detect_frontiers, enforce_list_bounds, merge_points, FilterParams, FrontierPoint};
use mrexplore::grid_map::{ground_truth_from_bytes, CellState};
use mrexplore::simulator::Simulation;
use mrexplore::{Cell, Point2};
use std::fmt::Write;
use std::path::Path;
use wasm_bindgen::prelude::*;

const DESK_PGM: &[u8] = include_bytes!("../../core/maps/desk.pgm");
const DESK_META: &str = include_str!("../../core/maps/desk.meta");
const DESK_CONF: &str = include_str!("../../core/maps/desk.conf");

const ROBOT_COLORS: [[u8; 3]; 4] = [[220, 50, 47], [38, 139, 210], [133, 153, 0], [211, 54, 130]];

/// Frontier lists under the preview filter settings.
#[derive(Clone, Debug, Default)]
pub struct FilterPreview {
    pub rad: f64,
    pub per_unk: f64,
    pub raw: Vec<Point2>,
    pub filtered: Vec<Point2>,
}

#[wasm_bindgen]
pub struct DemoSim {
    sim: Simulation,
    method: Method,
    preview: FilterPreview,
}

impl DemoSim {
    pub fn with_method(method: Method, seed: u64) -> Self {
        let mut config = ScenarioConfig::parse(DESK_CONF, Path::new("")).expect("bundled scenario parses");
        config.method = method;
        config.seed = seed;
        let truth = ground_truth_from_bytes(DESK_PGM, DESK_META).expect("bundled map loads");
        let preview = FilterPreview { rad: config.filter.rad, per_unk: config.filter.per_unk, ..Default::default() };
        let mut demo = Self { sim: Simulation::new(config, truth).expect("bundled starts are free"), method, preview };
        demo.refresh_preview();
        demo
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn preview(&self) -> &FilterPreview {
        &self.preview
    }

    /// Runs the server-side filter over every robot's current detections
    /// with the preview settings.
    fn refresh_preview(&mut self) {
        let merged = self.sim.merged();
        let lists: Vec<Vec<FrontierPoint>> = self.sim.robots().iter().map(|r| detect_frontiers(&r.map, r.id)).collect();
        let raw: Vec<FrontierPoint> = lists.iter().flatten().copied().collect();
        let params = FilterParams { rad: self.preview.rad, per_unk: self.preview.per_unk, ..self.sim.config().filter };
        let filtered = enforce_list_bounds(merge_points(&lists, merged, &params), &raw, merged, &params);
        self.preview.raw = raw.iter().map(FrontierPoint::position).collect();
        self.preview.filtered = filtered.points.iter().map(FrontierPoint::position).collect();
    }
}

#[wasm_bindgen]
impl DemoSim {
    /// `method` is one of `proposed`, `mags`, `greedy_frontier`.
    #[wasm_bindgen(constructor)]
    pub fn new(method: &str, seed: u32) -> Result<DemoSim, JsError> {
        let method = method.parse::<Method>().map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Self::with_method(method, seed.into()))
    }

    /// Advances up to `ticks` ticks; returns whether the run is over.
    pub fn step(&mut self, ticks: u32) -> Result<bool, JsError> {
        for _ in 0..ticks {
            if self.sim.is_done() {
                break;
            }
            self.sim.step().map_err(|e| JsError::new(&e.to_string()))?;
        }
        self.refresh_preview();
        Ok(self.sim.is_done())
    }

    /// Changes the preview filter; returns the filtered list size.
    pub fn set_filter(&mut self, rad: f64, per_unk: f64) -> usize {
        self.preview.rad = rad.max(0.05);
        self.preview.per_unk = per_unk.clamp(0.0, 100.0);
        self.refresh_preview();
        self.preview.filtered.len()
    }

    pub fn width(&self) -> usize {
        self.sim.merged().geometry().width
    }

    pub fn height(&self) -> usize {
        self.sim.merged().geometry().height
    }

    /// Merged map as RGBA, top row first, with frontier points, planned
    /// paths, goals and robots drawn on top.
    pub fn render(&self) -> Vec<u8> {
        let merged = self.sim.merged();
        let g = *merged.geometry();
        let mut rgba = vec![0u8; g.len() * 4];
        let mut put = |c: Cell, rgb: [u8; 3]| {
            if g.contains(c) {
                let i = (c.x as usize + (g.height - 1 - c.y as usize) * g.width) * 4;
                rgba[i..i + 4].copy_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        };
        for (i, state) in merged.cells().iter().enumerate() {
            let rgb = match state {
                CellState::Unknown => [90, 90, 100],
                CellState::Free => [245, 245, 240],
                CellState::Occupied => [20, 20, 20],
            };
            put(g.cell_at(i), rgb);
        }
        for p in &self.preview.raw {
            put(g.world_to_grid(*p), [120, 190, 255]);
        }
        for p in &self.preview.filtered {
            let c = g.world_to_grid(*p);
            for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
                put(c.offset(dx, dy), [255, 140, 0]);
            }
        }
        for r in self.sim.robots() {
            let color = ROBOT_COLORS[r.id.0 % ROBOT_COLORS.len()];
            let faded = color.map(|v| ((v as u16 + 255) / 2) as u8);
            if let Some(path) = &r.path {
                for &c in &path.cells {
                    put(c, faded);
                }
            }
            if let Some(goal) = r.goal {
                let c = g.world_to_grid(goal);
                for d in -2..=2 {
                    put(c.offset(d, d), color);
                    put(c.offset(d, -d), color);
                }
            }
            let c = g.world_to_grid(r.pose.position());
            for dy in -1..=1 {
                for dx in -1..=1 {
                    put(c.offset(dx, dy), color);
                }
            }
        }
        rgba
    }

    /// Plain-text status lines.
    pub fn stats(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method        {}", self.method);
        let _ = writeln!(out, "time          {:.1} s", self.sim.time());
        if let Some(t) = self.sim.ticks().last() {
            let _ = writeln!(out, "coverage      {:.1} %", t.merged_coverage);
            let _ = writeln!(out, "last turn     {} raw -> {} offered", t.raw_frontiers, t.filtered_frontiers);
            let _ = writeln!(out, "loop closures {}", t.loop_closures);
        }
        let _ = writeln!(out, "goals         {}", self.sim.goals().len());
        let _ = writeln!(
            out,
            "preview       {} raw -> {} filtered (rad {:.2} m, unknown >= {:.0} %)",
            self.preview.raw.len(),
            self.preview.filtered.len(),
            self.preview.rad,
            self.preview.per_unk
        );
        out
    }
}
