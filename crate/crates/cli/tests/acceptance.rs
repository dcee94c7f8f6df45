//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fail.

use explorer_cli::cmd_compare;
use mrexplore::allocation::{update_rewards, AllocationState, Scheduler, SelectionPolicy};
use mrexplore::config::{Method, ScenarioConfig};
use mrexplore::frontier::{enforce_list_bounds, max_passes, merge_points, FilterParams, FrontierPoint};
use mrexplore::grid_map::{
    cell_entropy, load_ground_truth, map_entropy, map_quality, CellState, GridGeometry, GroundTruthMap, OccupancyGrid,
};
use mrexplore::planner::{plan, PathCost, PlanError, PlannerConfig};
use mrexplore::pose_graph::{EdgeKind, PoseEdge, PoseGraph};
use mrexplore::utility::{Reward, RewardMatrix, RewardRow};
use mrexplore::{AgentId, Cell, Point2, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::mpsc;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn desk_conf() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/maps/desk.conf")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. Spanning-tree weight against brute-force enumeration.

fn brute_force_tree_weight(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            x = parent[x];
        }
        x
    }
    let m = edges.len();
    let mut total = 0.0;
    // Every edge subset of size n - 1 that is acyclic is a spanning tree.
    for mask in 0u64..(1 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        let mut product = 1.0;
        let mut acyclic = true;
        for (i, &(a, b, w)) in edges.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra == rb {
                acyclic = false;
                break;
            }
            parent[ra] = rb;
            product *= w;
        }
        if acyclic {
            total += product;
        }
    }
    total
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=7);
        let mut edges: Vec<(usize, usize, f64)> =
            (1..n).map(|i| (i, rng.gen_range(0..i), rng.gen_range(0.1..5.0))).collect();
        for _ in 0..rng.gen_range(0..=n + 4) {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                edges.push((a, b, rng.gen_range(0.1..5.0)));
            }
        }
        let expected = brute_force_tree_weight(n, &edges);
        let graph = PoseGraph::from_parts(
            vec![Pose::default(); n],
            edges.iter().map(|&(a, b, weight)| PoseEdge { a, b, weight, kind: EdgeKind::Odometry }).collect(),
        )
        .map_err(|e| e.to_string())?;
        let got = graph.log_spanning_trees().map_err(|e| e.to_string())?.exp();
        worst = worst.max((got - expected).abs() / expected);
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-6 && secs < 10.0, format!("100 graphs, max relative error {worst:.2e}, {secs:.2} s"))
}

// 2. Entropy identities.

fn ac2() -> Outcome {
    let h = |p| cell_entropy(p).unwrap();
    let mut ok = (h(0.5) - 1.0).abs() <= 1e-12 && h(0.0).abs() <= 1e-12 && h(1.0).abs() <= 1e-12;
    let mut worst: f64 = 0.0;
    for (w, hgt) in [(1, 1), (7, 3), (50, 40), (200, 200)] {
        let g = OccupancyGrid::new(GridGeometry::new(0.1, 0.0, 0.0, w, hgt).unwrap());
        let err = (map_entropy(&g) - (w * hgt) as f64).abs();
        worst = worst.max(err);
        ok &= err <= 1e-12;
    }
    check(ok, format!("H(0.5)={}, H(0)={}, H(1)={}, all-unknown grid error {worst:.1e}", h(0.5), h(0.0), h(1.0)))
}

// 3. Frontier reduction on the desk map.

fn ac3() -> Outcome {
    let config = ScenarioConfig::load(&desk_conf()).map_err(|e| e.to_string())?;
    let f = &config.filter;
    if config.starts.len() != 3
        || f.per_unk != 60.0
        || f.rad != 1.0
        || f.max_pts != 10
        || config.method != Method::Proposed
    {
        return Err(format!("desk scenario is not the 3-robot PER_UNK=60 RAD=1 MAX_PTS=10 setup: {f:?}"));
    }
    let m = mrexplore::simulator::run(&config).map_err(|e| e.to_string())?;
    let reduction = m.mean_reduction().ok_or("no iteration with raw points")?;
    let turns = m.iterations.iter().filter(|c| c.raw > 0).count();
    check(reduction >= 50.0, format!("mean reduction {reduction:.1}% over {turns} turns (need >= 50%)"))
}

// 4. Coverage ordering, proposed vs MAGS.

fn ac4() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let seeds = [1, 2, 3, 4, 5];
    let report =
        cmd_compare(&desk_conf(), &[Method::Proposed, Method::Mags], &seeds, tmp.path()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let p = report.summary(Method::Proposed).ok_or("no proposed summary")?;
    let m = report.summary(Method::Mags).ok_or("no mags summary")?;
    let sim_time = ScenarioConfig::load(&desk_conf()).map_err(|e| e.to_string())?.max_sim_time;
    check(
        p.coverage_mean > m.coverage_mean && secs < 300.0 && sim_time >= 300.0 && p.runs >= 5,
        format!(
            "{} seeds x {sim_time} s: proposed {:.2}% vs mags {:.2}%, {secs:.1} s",
            seeds.len(),
            p.coverage_mean,
            m.coverage_mean
        ),
    )
}

// 5. List-size control terminates.

fn random_grid(rng: &mut ChaCha8Rng) -> OccupancyGrid {
    let (w, h) = (rng.gen_range(3..48), rng.gen_range(3..48));
    let mut g = OccupancyGrid::new(GridGeometry::new(rng.gen_range(0.05..0.3), 0.0, 0.0, w, h).unwrap());
    for _ in 0..rng.gen_range(0..10) {
        let (cx, cy, r) = (rng.gen_range(0..w), rng.gen_range(0..h), rng.gen_range(1..15));
        let state = if rng.gen_bool(0.2) { CellState::Occupied } else { CellState::Free };
        for y in cy.saturating_sub(r)..(cy + r).min(h) {
            for x in cx.saturating_sub(r)..(cx + r).min(w) {
                g.set(Cell::new(x as i64, y as i64), state);
            }
        }
    }
    g
}

fn ac5() -> Outcome {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut exhausted = 0;
        let mut worst_ratio: f64 = 0.0;
        for case in 0..1000 {
            let g = random_grid(&mut rng);
            let (wm, hm) = (
                g.geometry().width as f64 * g.geometry().resolution,
                g.geometry().height as f64 * g.geometry().resolution,
            );
            let raw: Vec<FrontierPoint> = (0..rng.gen_range(0..60))
                .map(|_| {
                    FrontierPoint::new(
                        rng.gen_range(-0.2..wm + 0.2),
                        rng.gen_range(-0.2..hm + 0.2),
                        AgentId(rng.gen_range(0..3)),
                    )
                })
                .collect();
            let min_pts = rng.gen_range(0..8);
            let params = FilterParams {
                rad: rng.gen_range(0.02..2.0),
                per_unk: rng.gen_range(0.0..=100.0),
                min_pts,
                max_pts: min_pts + rng.gen_range(1..15),
                rad_step: rng.gen_range(0.01..1.0),
                perc_step: rng.gen_range(0.5..50.0),
            };
            let uni = merge_points(std::slice::from_ref(&raw), &g, &params);
            let out = enforce_list_bounds(uni, &raw, &g, &params);
            let bound = max_passes(&params, &g);
            let n = out.points.len();
            let in_bounds = params.min_pts < n && n < params.max_pts;
            if out.passes > bound || !(in_bounds || out.exhausted) {
                let _ = tx.send(Err(format!(
                    "case {case}: {} passes (bound {bound}), size {n}, params {params:?}",
                    out.passes
                )));
                return;
            }
            exhausted += usize::from(!in_bounds);
            if bound > 0 {
                worst_ratio = worst_ratio.max(out.passes as f64 / bound as f64);
            }
        }
        let _ = tx.send(Ok(format!(
            "1000 cases, {exhausted} clamp-exhausted, at most {:.0}% of the pass bound used",
            worst_ratio * 100.0
        )));
    });
    rx.recv_timeout(Duration::from_secs(120)).unwrap_or_else(|_| Err("no result within 120 s (hang)".into()))
}

// 6. Fair scheduling under contention.

/// Replays a request script and counts each agent's consecutive
/// deferrals independently of the scheduler's own counters.
fn replay(wait: u32, rounds: usize, rerequest_delay: [usize; 3]) -> u32 {
    let mut s = Scheduler::new(wait);
    let mut pending: BTreeSet<AgentId> = (0..3).map(AgentId).collect();
    let mut ready_at = [0usize; 3];
    let mut deferred = [0u32; 3];
    let mut worst = 0;
    for round in 0..rounds {
        for (a, &ready) in ready_at.iter().enumerate() {
            if ready <= round {
                pending.insert(AgentId(a));
            }
        }
        if pending.is_empty() {
            continue;
        }
        let served = s.schedule(&pending);
        pending.remove(&served);
        ready_at[served.0] = round + 1 + rerequest_delay[served.0];
        deferred[served.0] = 0;
        for a in &pending {
            deferred[a.0] += 1;
            worst = worst.max(deferred[a.0]);
        }
    }
    worst
}

fn ac6() -> Outcome {
    let scripts = [[0, 0, 0], [0, 0, 1], [0, 0, 3], [1, 0, 0], [0, 2, 0]];
    let worst = scripts.iter().map(|&d| replay(5, 1000, d)).max().unwrap();
    check(
        worst <= 5,
        format!("{} scripted traces x 1000 turns, max consecutive deferrals {worst} (limit 5)", scripts.len()),
    )
}

// 7. Reward spreading picks the farthest of equal candidates.

fn ac7() -> Outcome {
    let geometry = GridGeometry::new(0.1, 0.0, 0.0, 100, 100).unwrap();
    let chosen = Point2::new(1.05, 1.05);
    let candidates = [(2.05, 1.05), (1.05, 3.05), (4.05, 5.05)];
    let r = 4.0;
    let matrix = || RewardMatrix {
        owner: AgentId(1),
        rows: candidates
            .iter()
            .map(|&(x, y)| RewardRow { point: FrontierPoint::new(x, y, AgentId(1)), reward: Reward::Finite(r) })
            .collect(),
    };
    // k = K / d² with K = max reward / |chosen| = r.
    let expected: Vec<f64> =
        candidates.iter().map(|&(x, y)| r - r / chosen.distance(&Point2::new(x, y)).powi(2)).collect();
    let mut h = matrix();
    update_rewards(&[chosen], &geometry, &mut h);
    let updated: Vec<f64> = h.rows.iter().map(|row| row.reward.value().unwrap()).collect();
    let exact = updated.iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-12);
    let mut state = AllocationState::new(geometry, 5);
    state.chosen.push(chosen);
    let goal = state.select_goal(matrix(), SelectionPolicy::Spread).map_err(|e| e.to_string())?;
    let farthest = Point2::new(4.05, 5.05);
    check(
        exact && goal.position() == farthest,
        format!("rewards {updated:.4?} (expected {expected:.4?}), selected ({:.2}, {:.2})", goal.x, goal.y),
    )
}

// 8. Planner optimality against exhaustive relaxation.

fn relaxation_oracle(states: &[CellState], w: usize, h: usize, start: usize) -> Vec<Option<(u32, u32)>> {
    let blocked = |x: i64, y: i64| {
        x < 0 || y < 0 || x >= w as i64 || y >= h as i64 || states[x as usize + y as usize * w] == CellState::Occupied
    };
    let len = |c: (u32, u32)| c.0 as f64 + c.1 as f64 * std::f64::consts::SQRT_2;
    let mut best = vec![None; w * h];
    best[start] = Some((0u32, 0u32));
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..w * h {
            let Some(c) = best[i] else { continue };
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
                let diagonal = dx != 0 && dy != 0;
                if blocked(x + dx, y + dy) || (diagonal && (blocked(x + dx, y) || blocked(x, y + dy))) {
                    continue;
                }
                let next = if diagonal { (c.0, c.1 + 1) } else { (c.0 + 1, c.1) };
                let j = (x + dx) as usize + (y + dy) as usize * w;
                if best[j].is_none_or(|old| len(next) < len(old) - 1e-9) {
                    best[j] = Some(next);
                    changed = true;
                }
            }
        }
    }
    best
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut reachable = 0;
    for case in 0..200 {
        let (w, h) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let mut states: Vec<CellState> = (0..w * h)
            .map(|_| match rng.gen_range(0..10) {
                0..=5 => CellState::Free,
                6 | 7 => CellState::Occupied,
                _ => CellState::Unknown,
            })
            .collect();
        let (s, t) = (rng.gen_range(0..w * h), rng.gen_range(0..w * h));
        states[s] = CellState::Free;
        let geometry = GridGeometry::new(0.25, 0.0, 0.0, w, h).unwrap();
        let grid = OccupancyGrid::from_states(geometry, states.clone()).unwrap();
        let center = |i: usize| geometry.grid_to_world(geometry.cell_at(i));
        match (
            plan(&grid, center(s), center(t), PlannerConfig { inflation: 0 }),
            relaxation_oracle(&states, w, h, s)[t],
        ) {
            (Ok(p), Some((axis, diagonal))) if p.cost == (PathCost { axis, diagonal }) => reachable += 1,
            (Err(PlanError::NoPath), None) => {}
            (got, want) => {
                return Err(format!("case {case} ({w}x{h}): planner {:?}, oracle {want:?}", got.map(|p| p.cost)))
            }
        }
    }
    Ok(format!("200 grids up to 8x8, exact cost equality ({reachable} reachable, {} unreachable)", 200 - reachable))
}

// 9. Byte-identical metrics across two runs.

fn ac9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_explorer"))
            .args(["run", "--config"])
            .arg(desk_conf())
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("explorer run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let bytes = std::fs::read(out.join("metrics.csv")).map_err(|e| e.to_string())?;
        digests.push((Sha256::digest(&bytes), bytes.len()));
    }
    let hex: String = digests[0].0.iter().take(8).map(|b| format!("{b:02x}")).collect();
    check(digests[0] == digests[1] && digests[0].1 > 0, format!("sha256 {hex}.. on both runs ({} bytes)", digests[0].1))
}

// 10. Map-quality identities.

fn ac10() -> Outcome {
    let config = ScenarioConfig::load(&desk_conf()).map_err(|e| e.to_string())?;
    let mut truths = vec![load_ground_truth(&config.map_file).map_err(|e| e.to_string())?];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..20 {
        let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let cells = (0..w * h).map(|_| rng.gen_bool(0.3)).collect();
        truths.push(GroundTruthMap::new(GridGeometry::new(0.1, 0.0, 0.0, w, h).unwrap(), cells).unwrap());
    }
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for t in &truths {
        let q = map_quality(&t.to_grid(), t).map_err(|e| e.to_string())?;
        worst = (worst.0.max((q.ssim - 1.0).abs()), worst.1.max(q.rmse), worst.2.max(q.alignment_error));
    }
    check(
        worst.0 <= 1e-9 && worst.1 == 0.0 && worst.2 == 0.0,
        format!(
            "{} maps incl. desk: max |ssim - 1| {:.1e}, max rmse {}, max ae {}",
            truths.len(),
            worst.0,
            worst.1,
            worst.2
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1", "spanning-tree oracle", ac1),
        ("AC2", "entropy identities", ac2),
        ("AC3", "frontier reduction", ac3),
        ("AC4", "coverage ordering", ac4),
        ("AC5", "list-bound termination", ac5),
        ("AC6", "scheduling fairness", ac6),
        ("AC7", "reward spreading", ac7),
        ("AC8", "planner optimality", ac8),
        ("AC9", "run determinism", ac9),
        ("AC10", "map-quality identities", ac10),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("{id:<5} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id:<5} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
