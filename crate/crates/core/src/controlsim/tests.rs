use nalgebra::Vector3;

use super::*;
use crate::pathgen::{interpolate_references, Frame, ManufacturingPath, Reference, Segment};

/// Square of side `s` at height `z`, flown once at `v` m/s after `hold` s at
/// the first corner.
pub(crate) fn square(s: f64, z: f64, v: f64, hold: f64) -> Vec<Reference> {
    let c = [(0.0, 0.0), (s, 0.0), (s, s), (0.0, s), (0.0, 0.0)];
    let mut segments = Vec::new();
    for w in c.windows(2) {
        segments.push(Segment {
            start: Vector3::new(w[0].0, w[0].1, z),
            end: Vector3::new(w[1].0, w[1].1, z),
            extrude: true,
            layer: 0,
        });
    }
    let path = ManufacturingPath { frame: Frame::Body, segments };
    let mut refs = vec![Reference { t: 0.0, position: Vector3::new(0.0, 0.0, z), extrude: false }];
    refs.extend(interpolate_references(&path, v, 0.05).unwrap().into_iter().map(|mut r| {
        r.t += hold;
        r
    }));
    refs
}

fn hold(p: Vector3<f64>, seconds: f64) -> Vec<Reference> {
    vec![
        Reference { t: 0.0, position: p, extrude: false },
        Reference { t: seconds, position: p, extrude: false },
    ]
}

fn fly(refs: &[Reference], plant: PlantSpec, estimator: EstimatorMode) -> MissionTrace {
    let cfg = MissionConfig { estimator, ..MissionConfig::default() };
    let mut ex = Executor::new(plant, refs[0].position, cfg, 1).unwrap();
    ex.track(refs, Some(0), 0.0, &mut 0.0).unwrap();
    ex.finish()
}

fn planar_error(s: &TraceSample) -> f64 {
    (position(&s.state) - s.reference).xy().norm()
}

fn lateral() -> Disturbance {
    let mut w = Disturbance::zeros();
    w[3] = 0.15;
    w[4] = 0.30;
    w
}

#[test]
fn ideal_square_is_tracked_within_5mm() {
    let refs = square(0.5, 1.0, 0.1, 1.0);
    let tr = fly(&refs, PlantSpec::ideal(), EstimatorMode::On);
    let mean = tr.samples.iter().map(|s| (position(&s.state) - s.reference).norm()).sum::<f64>() / tr.samples.len() as f64;
    assert!(mean < 0.005, "{mean}");
}

#[test]
fn applied_inputs_respect_bounds_and_rates() {
    let refs = square(0.5, 1.0, 0.1, 1.0);
    let tr = fly(&refs, PlantSpec::ideal().with_constant(lateral()), EstimatorMode::On);
    let cfg = NmpcConfig::default();
    let mut prev = hover_input();
    for s in &tr.samples {
        assert!(cfg.is_feasible(&s.input, &prev, 1e-12), "{:?}", s.input);
        prev = s.input;
    }
}

#[test]
fn constant_push_leaves_an_offset_without_estimation() {
    let p = Vector3::new(0.0, 0.0, 1.0);
    let tr = fly(&hold(p, 20.0), PlantSpec::ideal().with_constant(lateral()), EstimatorMode::Off);
    let e = planar_error(tr.samples.last().unwrap());
    assert!(e > 0.02, "{e}");
}

#[test]
fn estimation_removes_the_offset() {
    let p = Vector3::new(0.0, 0.0, 1.0);
    let tr = fly(&hold(p, 30.0), PlantSpec::ideal().with_constant(lateral()), EstimatorMode::On);
    let last = tr.samples.last().unwrap();
    // The hover-input penalty keeps a few millimeters against the tilt needed.
    assert!(planar_error(last) < 0.02, "{}", planar_error(last));
    let off = fly(&hold(p, 30.0), PlantSpec::ideal().with_constant(lateral()), EstimatorMode::Off);
    assert!(planar_error(last) < planar_error(off.samples.last().unwrap()) / 2.0);
    assert!((last.w_hat - lateral()).rows(3, 2).amax() < 0.02, "{:?}", last.w_hat);
}

#[test]
fn plant_attitude_time_constant() {
    let mut plant = Plant::new(PlantSpec::ideal(), State::zeros(), 0);
    let u = Input::new(G, 0.1, 0.0);
    for _ in 0..4 {
        plant.step(&u, 0.0, 0.05);
    }
    let frac = plant.state[6] / 0.1;
    assert!((frac - 0.632).abs() < 0.632 * 0.02, "{frac}");
}

#[test]
fn trace_csv_has_documented_header() {
    let tr = fly(&hold(Vector3::new(0.0, 0.0, 1.0), 0.2), PlantSpec::ideal(), EstimatorMode::On);
    let csv = tr.to_csv();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,x_ref,y_ref,z_ref,x,y,z,vx,vy,vz,phi,theta,T,phi_ref,theta_ref,wx_hat,wy_hat,wz_hat,wx_true,wy_true,wz_true,extrude"
    );
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 22));
}

#[test]
fn runs_are_deterministic() {
    let refs = square(0.3, 1.0, 0.1, 0.5);
    let plant = PlantSpec { measurement_noise: [0.001; 8], ..PlantSpec::default() };
    let a = fly(&refs, plant.clone(), EstimatorMode::On);
    let b = fly(&refs, plant, EstimatorMode::On);
    assert_eq!(a.to_csv(), b.to_csv());
}
