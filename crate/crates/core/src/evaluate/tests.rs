use nalgebra::Vector3;

use super::*;
use crate::controlsim::{Disturbance, Input, TraceSample};
use crate::pathgen::{slice_mesh, SliceConfig};

fn grid() -> OccupancyGrid {
    OccupancyGrid::for_bounds(Vec3::zeros(), Vec3::new(0.3, 0.3, 0.1), &GridConfig::default()).unwrap()
}

fn wall(x0: f64, g: &OccupancyGrid) -> OccupancyGrid {
    let samples: Vec<Vec3> = (0..=40).map(|i| Vec3::new(x0, i as f64 * 0.005, 0.02)).collect();
    rasterize_deposition(&samples, 0.03, 0.02, g).unwrap()
}

fn sample(state: State, reference: Vector3<f64>) -> TraceSample {
    TraceSample {
        t: 0.0,
        chunk: Some(0),
        reference,
        state,
        input: Input::zeros(),
        w_hat: Disturbance::zeros(),
        w_true: Disturbance::zeros(),
        extrude: true,
    }
}

#[test]
fn grid_spans_margin_and_height() {
    let g = grid();
    assert_eq!(g.dims, [50, 50, 50]);
    assert!((g.origin - Vec3::new(-0.1, -0.1, 0.0)).norm() < 1e-12);
}

#[test]
fn no_samples_gives_an_empty_grid() {
    assert_eq!(rasterize_deposition(&[], 0.03, 0.025, &grid()).unwrap().count(), 0);
}

#[test]
fn single_sample_marks_a_padded_block() {
    let g = grid();
    let o = rasterize_deposition(&[Vec3::new(0.105, 0.105, 0.05)], 0.03, 0.02, &g).unwrap();
    // 3 x 3 in plan, centers at z = 0.035 and 0.045 inside [0.03, 0.05].
    assert_eq!(o.count(), 18);
    // ceil(0.025 / 0.01) = 3 rows: centers 0.025, 0.035, 0.045.
    let o = rasterize_deposition(&[Vec3::new(0.105, 0.105, 0.05)], 0.03, 0.025, &g).unwrap();
    assert_eq!(o.count(), 27);
}

#[test]
fn sample_outside_the_grid_is_rejected() {
    let e = rasterize_deposition(&[Vec3::new(5.0, 0.0, 0.0)], 0.03, 0.02, &grid());
    assert!(matches!(e, Err(EvaluateError::OutOfBounds(..))));
}

#[test]
fn identical_and_disjoint_grids() {
    let g = grid();
    let a = wall(0.105, &g);
    assert_eq!(compare_grids(&a, &a).unwrap().iou, 1.0);
    let b = wall(0.205, &g);
    let c = compare_grids(&a, &b).unwrap();
    assert_eq!(c.iou, 0.0);
    assert_eq!(c.excess, 1.0);
}

#[test]
fn shifted_wall_keeps_two_thirds() {
    let g = grid();
    let a = wall(0.105, &g);
    let b = wall(0.115, &g);
    let c = compare_grids(&a, &b).unwrap();
    assert!((c.coverage - 2.0 / 3.0).abs() < 1e-12, "{c:?}");
    assert!((c.iou - 0.5).abs() < 1e-12);
    assert_eq!(compare_grids(&b, &a).unwrap().iou, c.iou);
}

#[test]
fn mismatched_grids_are_rejected() {
    let g = grid();
    let h = OccupancyGrid::new(g.origin, 0.02, g.dims).unwrap();
    assert_eq!(compare_grids(&g, &h), Err(EvaluateError::GridMismatch));
}

#[test]
fn voxelized_box_matches_its_volume() {
    let g = grid();
    let mesh = TriangleMesh::cuboid(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.1, 0.2, 0.05));
    let v = voxelize_mesh(&mesh, &g);
    assert_eq!(v.count(), 10 * 20 * 5);
}

#[test]
fn voxelized_plate_skips_the_hole() {
    let g = OccupancyGrid::for_bounds(Vec3::zeros(), Vec3::new(0.55, 0.55, 0.08), &GridConfig::default()).unwrap();
    let v = voxelize_mesh(&crate::fixtures::rectangle(), &g);
    assert!((v.volume_liters() - 21.0).abs() / 21.0 < 0.05, "{}", v.volume_liters());
}

#[test]
fn sliced_box_covers_its_voxels() {
    let mesh = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(0.2, 0.2, 0.05));
    let cfg = SliceConfig::default();
    let path = slice_mesh(&mesh, &cfg).unwrap();
    let g = OccupancyGrid::for_bounds(Vec3::zeros(), Vec3::new(0.2, 0.2, 0.05), &GridConfig::default()).unwrap();
    let dep = rasterize_path(&path, cfg.line_width, cfg.layer_height, &g).unwrap();
    let refv = voxelize_mesh(&mesh, &g);
    let c = compare_grids(&refv, &dep).unwrap();
    assert!(c.coverage > 0.95, "{c:?}");
    assert_eq!(dep.difference_count(&refv.dilate()).unwrap(), 0);
    let vol = mesh.volume_liters().unwrap();
    assert!((dep.volume_liters() - vol).abs() / vol < 0.15, "{}", dep.volume_liters());
}

#[test]
fn adding_covered_voxels_never_lowers_coverage() {
    let g = grid();
    let a = wall(0.105, &g);
    let mut b = wall(0.115, &g);
    let before = compare_grids(&a, &b).unwrap().coverage;
    b.union_with(&wall(0.105, &g)).unwrap();
    assert!(compare_grids(&a, &b).unwrap().coverage >= before);
}

#[test]
fn dilation_grows_by_one_voxel() {
    let mut g = grid();
    g.set(10, 10, 10);
    assert_eq!(g.dilate().count(), 27);
    let mut corner = grid();
    corner.set(0, 0, 0);
    assert_eq!(corner.dilate().count(), 8);
}

#[test]
fn rle_round_trip() {
    let g = grid();
    let a = wall(0.105, &g);
    let text = a.to_rle();
    assert_eq!(OccupancyGrid::from_rle(&text).unwrap(), a);
    assert!(OccupancyGrid::from_rle("origin 0 0 0").is_err());
}

#[test]
fn level_tip_hangs_straight_down() {
    let mut x = State::zeros();
    x[0] = 0.3;
    x[1] = -0.2;
    x[2] = 1.0;
    assert_eq!(extruder_tip(&x, 0.3), Vector3::new(0.3, -0.2, 0.7));
}

#[test]
fn pitch_swings_the_tip_backward() {
    let mut x = State::zeros();
    x[7] = 0.1;
    let tip = extruder_tip(&x, 0.3);
    assert!((tip - Vector3::new(-0.3 * 0.1f64.sin(), 0.0, -0.3 * 0.1f64.cos())).norm() < 1e-12);
}

#[test]
fn perfect_tracking_has_zero_error() {
    let p = Vector3::new(0.0, 0.0, 1.0);
    let mut x = State::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&p);
    let tr = MissionTrace { samples: vec![sample(x, p); 5], ..Default::default() };
    let s = tracking_stats(&tr, 0.3).unwrap();
    assert_eq!(s.chunks[0].uav, ErrorStats::default());
    assert_eq!(s.chunks[0].tip, ErrorStats::default());
}

#[test]
fn constant_planar_offset() {
    let p = Vector3::new(0.0, 0.0, 1.0);
    let mut x = State::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&(p + Vector3::new(0.02, 0.0, 0.0)));
    let tr = MissionTrace { samples: vec![sample(x, p); 4], ..Default::default() };
    let s = tracking_stats(&tr, 0.3).unwrap().chunks[0];
    assert!((s.uav.mean_planar - 0.02).abs() < 1e-12 && (s.uav.max_planar - 0.02).abs() < 1e-12);
    assert!((s.uav.mean_3d - 0.02).abs() < 1e-12);
}

#[test]
fn rolling_amplifies_tip_error() {
    let p = Vector3::new(0.0, 0.0, 1.0);
    let samples: Vec<TraceSample> = (0..100)
        .map(|k| {
            let t = k as f64 * 0.05;
            let mut x = State::zeros();
            x[1] = 0.01 * (2.0 * t).sin();
            x[2] = 1.0;
            x[6] = 0.08 * (2.0 * t).sin();
            sample(x, p)
        })
        .collect();
    let tr = MissionTrace { samples, ..Default::default() };
    let s = tracking_stats(&tr, 0.3).unwrap().chunks[0];
    assert!(s.tip.mean_3d >= s.uav.mean_3d, "{s:?}");
    assert!(s.uav.mean_3d <= s.uav.max_3d);
}

#[test]
fn empty_trace_is_an_error() {
    assert_eq!(tracking_stats(&MissionTrace::default(), 0.3), Err(EvaluateError::EmptyTrace));
}

#[test]
fn non_extruding_samples_are_ignored() {
    let mut s = sample(State::zeros(), Vector3::new(1.0, 0.0, 0.0));
    s.extrude = false;
    let tr = MissionTrace { samples: vec![s], ..Default::default() };
    assert!(tracking_stats(&tr, 0.3).unwrap().chunks.is_empty());
    assert_eq!(error_series_csv(&tr, 0.3).lines().count(), 1);
}
