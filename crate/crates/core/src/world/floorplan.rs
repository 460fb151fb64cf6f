//! Seeded multi-room floorplans: recursive binary partitioning into rooms,
//! optional hallway strips, one doorway per partition wall and a few pieces
//! of furniture.

use super::{BoundaryPolicy, OccupancyGrid};
use crate::geometry::Point;
use crate::noise::{rng_from, SimRng};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloorplanConfig {
    pub resolution: f64,
    pub width_m: (f64, f64),
    pub height_m: (f64, f64),
    pub wall_thickness_m: f64,
    pub min_room_m: f64,
    pub max_room_m: f64,
    pub hallway_probability: f64,
    pub hallway_width_m: f64,
    pub door_width_m: (f64, f64),
    pub extra_door_probability: f64,
    pub furniture_per_room: usize,
    pub furniture_size_m: (f64, f64),
}

impl Default for FloorplanConfig {
    fn default() -> Self {
        Self {
            resolution: super::DEFAULT_RESOLUTION,
            width_m: (14.0, 20.0),
            height_m: (10.0, 15.0),
            wall_thickness_m: 0.15,
            min_room_m: 2.8,
            max_room_m: 6.0,
            hallway_probability: 0.35,
            hallway_width_m: 1.5,
            door_width_m: (0.9, 1.3),
            extra_door_probability: 0.25,
            furniture_per_room: 2,
            furniture_size_m: (0.4, 1.0),
        }
    }
}

/// Half-open cell rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Rect {
    fn w(&self) -> usize {
        self.x1 - self.x0
    }
    fn h(&self) -> usize {
        self.y1 - self.y0
    }
}

/// A partition wall; `vertical` walls span y and separate x.
#[derive(Debug, Clone, Copy)]
struct Wall {
    rect: Rect,
    vertical: bool,
    extra_doors: usize,
}

struct Builder<'a> {
    cfg: &'a FloorplanConfig,
    rng: SimRng,
    width: usize,
    height: usize,
    obstacle: Vec<bool>,
    walls: Vec<Wall>,
    rooms: Vec<Rect>,
}

impl Builder<'_> {
    fn cells(&self, m: f64) -> usize {
        (m / self.cfg.resolution).round().max(1.0) as usize
    }

    fn fill(&mut self, r: Rect, value: bool) {
        for j in r.y0..r.y1 {
            for i in r.x0..r.x1 {
                self.obstacle[j * self.width + i] = value;
            }
        }
    }

    fn split(&mut self, r: Rect) {
        let min_room = self.cells(self.cfg.min_room_m);
        let max_room = self.cells(self.cfg.max_room_m);
        let t = self.cells(self.cfg.wall_thickness_m);
        let can_x = r.w() >= 2 * min_room + t;
        let can_y = r.h() >= 2 * min_room + t;
        let must = r.w() > max_room || r.h() > max_room;
        if !(can_x || can_y) || (!must && self.rng.random_bool(0.3)) {
            self.rooms.push(r);
            return;
        }
        let vertical = match (can_x, can_y) {
            (true, false) => true,
            (false, true) => false,
            _ => {
                if r.w() as f64 > 1.25 * r.h() as f64 {
                    true
                } else if r.h() as f64 > 1.25 * r.w() as f64 {
                    false
                } else {
                    self.rng.random_bool(0.5)
                }
            }
        };
        let len = if vertical { r.w() } else { r.h() };
        let hall = self.cells(self.cfg.hallway_width_m);
        let hallway = len >= 2 * min_room + 2 * t + hall
            && self.rng.random_bool(self.cfg.hallway_probability);
        if hallway {
            let lo = min_room;
            let hi = len - min_room - 2 * t - hall;
            let at = self.rng.random_range(lo..=hi);
            let (a, corridor, b, w1, w2) = if vertical {
                let wx1 = r.x0 + at;
                let wx2 = wx1 + t + hall;
                (
                    Rect { x1: wx1, ..r },
                    Rect { x0: wx1 + t, x1: wx2, ..r },
                    Rect { x0: wx2 + t, ..r },
                    Rect { x0: wx1, x1: wx1 + t, ..r },
                    Rect { x0: wx2, x1: wx2 + t, ..r },
                )
            } else {
                let wy1 = r.y0 + at;
                let wy2 = wy1 + t + hall;
                (
                    Rect { y1: wy1, ..r },
                    Rect { y0: wy1 + t, y1: wy2, ..r },
                    Rect { y0: wy2 + t, ..r },
                    Rect { y0: wy1, y1: wy1 + t, ..r },
                    Rect { y0: wy2, y1: wy2 + t, ..r },
                )
            };
            for w in [w1, w2] {
                self.fill(w, true);
                let extra = usize::from(self.rng.random_bool(0.6));
                self.walls.push(Wall { rect: w, vertical, extra_doors: extra });
            }
            self.rooms.push(corridor);
            self.split(a);
            self.split(b);
        } else {
            let at = self.rng.random_range(min_room..=len - min_room - t);
            let (a, b, w) = if vertical {
                let wx = r.x0 + at;
                (
                    Rect { x1: wx, ..r },
                    Rect { x0: wx + t, ..r },
                    Rect { x0: wx, x1: wx + t, ..r },
                )
            } else {
                let wy = r.y0 + at;
                (
                    Rect { y1: wy, ..r },
                    Rect { y0: wy + t, ..r },
                    Rect { y0: wy, y1: wy + t, ..r },
                )
            };
            self.fill(w, true);
            let extra = usize::from(self.rng.random_bool(self.cfg.extra_door_probability));
            self.walls.push(Wall { rect: w, vertical, extra_doors: extra });
            self.split(a);
            self.split(b);
        }
    }

    fn free(&self, i: usize, j: usize) -> bool {
        !self.obstacle[j * self.width + i]
    }

    /// Carves doorways once every wall is in place, so later perpendicular
    /// walls cannot block them.
    fn carve_doors(&mut self) {
        let walls = std::mem::take(&mut self.walls);
        for wall in &walls {
            let door = self.rng.random_range(
                self.cells(self.cfg.door_width_m.0)..=self.cells(self.cfg.door_width_m.1),
            );
            let r = wall.rect;
            let (span_lo, span_hi) = if wall.vertical { (r.y0, r.y1) } else { (r.x0, r.x1) };
            if span_hi - span_lo < door {
                continue;
            }
            let candidates: Vec<usize> = (span_lo..=span_hi - door)
                .filter(|&p| {
                    (p..p + door).all(|s| {
                        if wall.vertical {
                            r.x0 > 0 && r.x1 < self.width && self.free(r.x0 - 1, s) && self.free(r.x1, s)
                        } else {
                            r.y0 > 0 && r.y1 < self.height && self.free(s, r.y0 - 1) && self.free(s, r.y1)
                        }
                    })
                })
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let mut used: Vec<usize> = Vec::new();
            for _ in 0..=wall.extra_doors {
                let p = candidates[self.rng.random_range(0..candidates.len())];
                if used.iter().any(|&u| u.abs_diff(p) < 2 * door) {
                    continue;
                }
                used.push(p);
                let cut = if wall.vertical {
                    Rect { x0: r.x0, x1: r.x1, y0: p, y1: p + door }
                } else {
                    Rect { x0: p, x1: p + door, y0: r.y0, y1: r.y1 }
                };
                self.fill(cut, false);
            }
        }
        self.walls = walls;
    }

    fn furnish(&mut self) {
        let clearance = self.cells(0.7);
        let rooms = self.rooms.clone();
        for room in rooms {
            if room.w() < 2 * clearance + 4 || room.h() < 2 * clearance + 4 {
                continue;
            }
            let count = self.rng.random_range(0..=self.cfg.furniture_per_room);
            for _ in 0..count {
                let sz = self.cfg.furniture_size_m;
                let (mw, mh) = (self.rng.random_range(sz.0..=sz.1), self.rng.random_range(sz.0..=sz.1));
                let (bw, bh) = (self.cells(mw), self.cells(mh));
                let (ax, bx) = (room.x0 + clearance, room.x1.saturating_sub(clearance + bw));
                let (ay, by) = (room.y0 + clearance, room.y1.saturating_sub(clearance + bh));
                if bx <= ax || by <= ay {
                    continue;
                }
                let x0 = self.rng.random_range(ax..bx);
                let y0 = self.rng.random_range(ay..by);
                self.fill(Rect { x0, y0, x1: x0 + bw, y1: y0 + bh }, true);
            }
        }
    }
}

/// Generates a closed, connected multi-room floorplan. Identical seeds and
/// configs yield identical grids.
pub fn generate_floorplan(seed: u64, cfg: &FloorplanConfig) -> OccupancyGrid {
    let mut rng = rng_from(seed, 0xF100);
    let wm = rng.random_range(cfg.width_m.0..=cfg.width_m.1);
    let hm = rng.random_range(cfg.height_m.0..=cfg.height_m.1);
    let width = (wm / cfg.resolution).round() as usize;
    let height = (hm / cfg.resolution).round() as usize;
    let mut b = Builder {
        cfg,
        rng,
        width,
        height,
        obstacle: vec![false; width * height],
        walls: Vec::new(),
        rooms: Vec::new(),
    };
    let t = b.cells(cfg.wall_thickness_m);
    b.fill(Rect { x0: 0, y0: 0, x1: width, y1: t }, true);
    b.fill(Rect { x0: 0, y0: height - t, x1: width, y1: height }, true);
    b.fill(Rect { x0: 0, y0: 0, x1: t, y1: height }, true);
    b.fill(Rect { x0: width - t, y0: 0, x1: width, y1: height }, true);
    b.split(Rect { x0: t, y0: t, x1: width - t, y1: height - t });
    b.carve_doors();
    b.furnish();

    let grid = OccupancyGrid::new(
        width,
        height,
        cfg.resolution,
        Point::default(),
        b.obstacle,
        BoundaryPolicy::Close,
    )
    .expect("generator builds valid rasters");
    keep_largest_component(grid)
}

fn keep_largest_component(grid: OccupancyGrid) -> OccupancyGrid {
    let (labels, count) = grid.components();
    if count <= 1 {
        return grid;
    }
    let mut sizes = vec![0usize; count as usize];
    for &l in &labels {
        if l != u32::MAX {
            sizes[l as usize] += 1;
        }
    }
    let keep = (0..count as usize).max_by_key(|&k| (sizes[k], usize::MAX - k)).unwrap() as u32;
    let cells = labels.iter().map(|&l| l != keep).collect();
    OccupancyGrid::new(
        grid.width(),
        grid.height(),
        grid.resolution(),
        grid.origin(),
        cells,
        BoundaryPolicy::Close,
    )
    .expect("derived from a valid grid")
}
