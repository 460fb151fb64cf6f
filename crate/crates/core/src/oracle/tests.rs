use super::*;
use crate::geometry::Pose;
use crate::noise::rng_from;
use crate::world::{geodesic, raycast, BoundaryPolicy, OccupancyGrid};
use proptest::prelude::*;
use rand::Rng;
use std::collections::VecDeque;

const RES: f64 = 0.05;

/// Closed grid of `w × h` meters with axis-aligned obstacle boxes given in
/// meters as `(x0, y0, x1, y1)`.
fn grid_with(w: f64, h: f64, boxes: &[(f64, f64, f64, f64)]) -> Arc<OccupancyGrid> {
    let (nw, nh) = ((w / RES).round() as usize, (h / RES).round() as usize);
    let mut cells = vec![false; nw * nh];
    for j in 0..nh {
        for i in 0..nw {
            let (x, y) = ((i as f64 + 0.5) * RES, (j as f64 + 0.5) * RES);
            cells[j * nw + i] = boxes.iter().any(|&(x0, y0, x1, y1)| x >= x0 && x < x1 && y >= y0 && y < y1);
        }
    }
    Arc::new(OccupancyGrid::new(nw, nh, RES, Point::default(), cells, BoundaryPolicy::Close).unwrap())
}

fn obs_at(g: &OccupancyGrid, x: f64, y: f64) -> PanoramicObservation {
    PanoramicObservation::capture(g, Pose::new(x, y, 0.0), 360, 10.0).unwrap()
}

#[test]
fn bin_and_score_formulas() {
    assert_eq!(direction_bin(std::f64::consts::PI), 6);
    assert_eq!(direction_bin(359f64.to_radians()), 0);
    assert_eq!(direction_bin(15f64.to_radians() + 1e-12), 1);
    assert_eq!(direction_bin(-std::f64::consts::FRAC_PI_2), 9);
    assert_eq!(intra_node_score(0.0), 1.0);
    assert!((intra_node_score(1.5) - 0.5).abs() < 1e-12);
    assert!((intra_node_score(2.9) - 0.1 / 3.0).abs() < 1e-12);
    assert_eq!(intra_node_score(4.0), 0.0);
    assert_eq!(inter_node_score(25.0), 0.0);
    assert_eq!(inter_node_score(0.0), 1.0);
    assert!((inter_node_score(5.0) - 0.75).abs() < 1e-12);
}

#[test]
fn relative_pose_examples() {
    let g = grid_with(10.0, 10.0, &[]);
    let o = OraclePredictors::exact(g.clone());
    let s = obs_at(&g, 5.0, 5.0);
    let r = o.relative_pose(&s, &obs_at(&g, 5.0, 5.0)).unwrap();
    assert_eq!((r.direction_bin, r.score), (0, 1.0));
    let r = o.relative_pose(&s, &obs_at(&g, 3.5, 5.0)).unwrap();
    assert_eq!(r.direction_bin, 6);
    assert!((r.score - 0.5).abs() < 1e-12);
    let a = 359f64.to_radians();
    let t = Point::new(5.0, 5.0).offset(2.9, a);
    let r = o.relative_pose(&s, &obs_at(&g, t.x, t.y)).unwrap();
    assert_eq!(r.direction_bin, 0);
    assert!((r.score - 0.0333333333).abs() < 1e-6);
    assert!((r.distance() - 2.9).abs() < 1e-9);
}

#[test]
fn connection_examples() {
    // wall at x = 6 with no opening
    let g = grid_with(12.0, 10.0, &[(6.0, 0.0, 6.2, 10.0)]);
    let o = OraclePredictors::exact(g.clone());
    let s = obs_at(&g, 4.5, 5.0);
    assert!(o.localize(&s, &s).unwrap());
    assert!(o.localize(&s, &obs_at(&g, 2.5, 5.0)).unwrap());
    assert!(!o.localize(&s, &obs_at(&g, 6.5, 5.0)).unwrap());
    assert!(!o.localize(&s, &obs_at(&g, 1.0, 5.0)).unwrap());
    assert_eq!(o.relative_pose(&s, &obs_at(&g, 1.0, 5.0)), Err(OracleError::NotConnected));
}

#[test]
fn cross_map_pairs_are_rejected() {
    let g1 = grid_with(10.0, 10.0, &[]);
    let g2 = grid_with(10.0, 10.0, &[(1.0, 1.0, 2.0, 2.0)]);
    let o = OraclePredictors::exact(g1.clone());
    let a = obs_at(&g1, 5.0, 5.0);
    let b = obs_at(&g2, 5.0, 5.0);
    assert_eq!(o.localize(&a, &b), Err(OracleError::CrossMap));
    assert_eq!(o.scores(&b, &b), Err(OracleError::ForeignObservation));
}

#[test]
fn open_room_center_all_bins_explorable() {
    let g = grid_with(10.0, 10.0, &[]);
    let o = OraclePredictors::exact(g.clone());
    assert_eq!(o.explorable(&obs_at(&g, 5.0, 5.0)).unwrap().count(), N_THETA);
}

/// Ground-truth bins: probe free on the true grid and reachable within
/// 1.05·r by a true grid path (octile is an upper bound on any-angle length,
/// so only clear-cut bins are compared).
fn true_bins(g: &OccupancyGrid, src: Point) -> [Option<bool>; N_THETA] {
    std::array::from_fn(|bin| {
        let probe = src.offset(NODE_RADIUS, bin_center(bin));
        if !g.is_free_point(probe) {
            return Some(false);
        }
        let d = geodesic(g, src, probe).unwrap().distance?;
        if d < NODE_RADIUS * 1.01 {
            Some(true)
        } else if d > NODE_RADIUS * 1.2 {
            Some(false)
        } else {
            None
        }
    })
}

#[test]
fn dead_end_corridor_bins() {
    // corridor along +x, 1 m wide, closed at x = 0.5
    let g = grid_with(14.0, 5.0, &[(0.0, 0.0, 14.0, 2.0), (0.0, 3.0, 14.0, 5.0), (0.0, 0.0, 0.5, 5.0)]);
    let o = OraclePredictors::exact(g.clone());
    let src = Point::new(1.0, 2.5);
    let bins = o.explorable(&obs_at(&g, src.x, src.y)).unwrap();
    assert!(bins.get(0));
    for b in [3, 6, 9] {
        assert!(!bins.get(b), "bin {b}");
    }
    for (bin, truth) in true_bins(&g, src).iter().enumerate() {
        if let Some(t) = truth {
            assert_eq!(bins.get(bin), *t, "bin {bin}");
        }
    }
}

#[test]
fn explorable_is_path_based_not_ray_based() {
    // a thin post blocks the bin-0 ray, but the detour is under 1.05·r
    let g = grid_with(10.0, 10.0, &[(4.45, 4.95, 4.55, 5.05)]);
    let o = OraclePredictors::exact(g.clone());
    let s = obs_at(&g, 3.0, 5.0);
    assert!(raycast(&g, Point::new(3.0, 5.0), 0.0, 10.0).unwrap() < NODE_RADIUS);
    assert!(o.explorable(&s).unwrap().get(0));
    // a wide board does not leave such a detour
    let g = grid_with(10.0, 10.0, &[(4.45, 3.5, 4.55, 6.5)]);
    let o = OraclePredictors::exact(g.clone());
    assert!(!o.explorable(&obs_at(&g, 3.0, 5.0)).unwrap().get(0));
}

#[test]
fn score_bounds_examples() {
    let g = grid_with(30.0, 4.0, &[]);
    let o = OraclePredictors::exact(g.clone());
    let s = obs_at(&g, 1.0, 2.0);
    let far = obs_at(&g, 29.5, 2.0);
    assert_eq!(o.scores(&s, &far).unwrap().0, [0.0; N_THETA]);
    // goal sits exactly at the bin-0 farthest point
    let fp = o.farthest_points(&s).unwrap()[0];
    let goal = obs_at(&g, fp.x, fp.y);
    assert_eq!(o.scores(&s, &goal).unwrap().get(0), 1.0);
}

#[test]
fn unreachable_goal_scores_zero() {
    let g = grid_with(12.0, 10.0, &[(6.0, 0.0, 6.2, 10.0)]);
    let o = OraclePredictors::exact(g.clone());
    let sc = o.scores(&obs_at(&g, 3.0, 5.0), &obs_at(&g, 9.0, 5.0)).unwrap();
    assert_eq!(sc.0, [0.0; N_THETA]);
}

#[test]
fn junction_argmax_matches_brute_force() {
    // horizontal corridor meeting a vertical one; goal 7 m up corridor A
    let g = grid_with(
        12.0,
        20.0,
        &[(0.0, 0.0, 5.0, 9.5), (0.0, 10.5, 5.0, 20.0), (6.0, 0.0, 12.0, 20.0)],
    );
    let o = OraclePredictors::exact(g.clone());
    let s = obs_at(&g, 5.5, 10.0);
    let goal = obs_at(&g, 5.5, 17.0);
    let sc = o.scores(&s, &goal).unwrap();
    assert_eq!(sc.argmax(), 3);
    let fps = o.farthest_points(&s).unwrap();
    let d: Vec<f64> = fps
        .iter()
        .map(|&p| geodesic(&g, p, Point::new(5.5, 17.0)).unwrap().distance.unwrap())
        .collect();
    let argmin = (0..N_THETA).fold(0, |b, i| if d[i] < d[b] { i } else { b });
    assert_eq!(sc.argmax(), argmin);
    for i in 0..N_THETA {
        assert!((sc.get(i) - inter_node_score(d[i])).abs() < 1e-12);
    }
}

fn random_obs(g: &OccupancyGrid, rng: &mut crate::noise::SimRng) -> PanoramicObservation {
    let (ex, ey) = g.extent();
    loop {
        let p = Point::new(rng.random_range(0.0..ex), rng.random_range(0.0..ey));
        if g.is_free_point(p) {
            return obs_at(g, p.x, p.y);
        }
    }
}

fn bfs_reach(view: &LocalView) -> Vec<bool> {
    let n = view.size() as i64;
    let mut seen = vec![false; (n * n) as usize];
    let c = view.center();
    let mut q = VecDeque::from([c]);
    seen[view.index(c)] = true;
    while let Some((i, j)) = q.pop_front() {
        for (di, dj) in [(0i64, 1i64), (1, 0), (0, -1), (-1, 0)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= n || nj >= n {
                continue;
            }
            let nc = (ni as usize, nj as usize);
            if !view.is_obstacle(nc) && !seen[view.index(nc)] {
                seen[view.index(nc)] = true;
                q.push_back(nc);
            }
        }
    }
    seen
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_properties(map_seed in 0u64..6, seed in any::<u64>()) {
        let g = Arc::new(crate::world::generate_floorplan(map_seed, &Default::default()));
        let o = OraclePredictors::exact(g.clone());
        let mut rng = rng_from(seed, 3);
        let a = random_obs(&g, &mut rng);
        // nearby partner so connected pairs actually occur
        let b = loop {
            let p = a.capture_pose().position().offset(rng.random_range(0.0..4.0), rng.random_range(0.0..TAU));
            if g.is_free_point(p) {
                break obs_at(&g, p.x, p.y);
            }
        };
        let d = a.capture_pose().position().distance(&b.capture_pose().position());
        let (ab, ba) = (o.localize(&a, &b).unwrap(), o.localize(&b, &a).unwrap());
        if d > NODE_RADIUS {
            prop_assert!(!ab && !ba);
        }
        if ab {
            let r = o.relative_pose(&a, &b).unwrap();
            prop_assert!((r.distance() - d).abs() < 1e-9);
        }
        let sc = o.scores(&a, &b).unwrap();
        prop_assert!(sc.0.iter().all(|s| (0.0..=1.0).contains(s)));
        let dist = o.bin_distances(&a, &b).unwrap();
        let brute: Vec<f64> = dist.iter().map(|d| d.unwrap_or(f64::INFINITY)).collect();
        let argmin = (0..N_THETA).fold(0, |m, i| if brute[i] < brute[m] { i } else { m });
        if brute[argmin] < D_MAX {
            prop_assert_eq!(sc.argmax(), argmin);
        }

        let view = LocalView::build(&a, g.resolution(), g.origin(), NODE_RADIUS);
        let reach = bfs_reach(&view);
        let src = a.capture_pose().position();
        for bin in o.explorable(&a).unwrap().true_bins() {
            let probe = view.local_cell(src.offset(NODE_RADIUS, bin_center(bin))).unwrap();
            prop_assert!(reach[view.index(probe)]);
        }
    }
}
