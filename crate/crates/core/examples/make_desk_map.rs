//! Regenerates `maps/desk.pgm` and its sidecar: a 20 m x 20 m office at
//! 10 cm resolution with a central corridor, eight rooms and furniture.
//!
//! cargo run -p mrexplore --example make_desk_map

use mrexplore::grid_map::{save_occupancy, GridGeometry, GroundTruthMap};
use std::path::Path;

const N: usize = 200;

struct Canvas {
    occupied: Vec<bool>,
}

impl Canvas {
    fn fill(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, value: bool) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.occupied[x + y * N] = value;
            }
        }
    }

    fn wall(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) {
        self.fill(x0, y0, x1, y1, true);
    }

    fn door(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) {
        self.fill(x0, y0, x1, y1, false);
    }
}

fn main() {
    let mut c = Canvas { occupied: vec![false; N * N] };
    // Outer walls.
    c.wall(0, 0, N - 1, 0);
    c.wall(0, N - 1, N - 1, N - 1);
    c.wall(0, 0, 0, N - 1);
    c.wall(N - 1, 0, N - 1, N - 1);

    // Corridor between y = 8.5 m and y = 11.5 m.
    c.wall(0, 85, N - 1, 85);
    c.wall(0, 115, N - 1, 115);

    // Four rooms on each side, 5 m wide, with 1 m doors onto the corridor.
    for k in 1..4 {
        c.wall(k * 50, 0, k * 50, 85);
        c.wall(k * 50, 115, k * 50, N - 1);
    }
    for k in 0..4 {
        let x = k * 50 + 20;
        c.door(x, 85, x + 10, 85);
        c.door(x + 5, 115, x + 15, 115);
    }
    // Connecting doors between some neighboring rooms.
    c.door(50, 20, 50, 30);
    c.door(150, 40, 150, 50);
    c.door(100, 160, 100, 170);

    // Desks and cabinets.
    let furniture = [
        (10, 15, 25, 22),
        (30, 50, 40, 60),
        (60, 10, 70, 35),
        (80, 55, 90, 62),
        (112, 20, 135, 27),
        (115, 55, 122, 70),
        (165, 10, 185, 18),
        (170, 50, 178, 58),
        (10, 140, 20, 165),
        (30, 175, 42, 185),
        (62, 130, 85, 137),
        (70, 165, 80, 180),
        (110, 135, 118, 150),
        (130, 170, 142, 178),
        (160, 130, 168, 138),
        (175, 160, 190, 168),
        // Pillars in the corridor.
        (48, 99, 52, 101),
        (148, 99, 152, 101),
    ];
    for (x0, y0, x1, y1) in furniture {
        c.wall(x0, y0, x1, y1);
    }

    let geometry = GridGeometry::new(0.1, 0.0, 0.0, N, N).expect("valid geometry");
    let truth = GroundTruthMap::new(geometry, c.occupied).expect("valid map");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("maps");
    std::fs::create_dir_all(&dir).expect("create maps directory");
    save_occupancy(&truth.to_grid(), &dir.join("desk.pgm")).expect("write map");
    println!("wrote {}", dir.join("desk.pgm").display());
}
