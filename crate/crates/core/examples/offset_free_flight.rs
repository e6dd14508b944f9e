//! Hover-and-track with a constant push on the vehicle, with and without
//! the disturbance estimator.

use aeroprint::controlsim::{transit, Disturbance, EstimatorMode, Executor, MissionConfig, PlantSpec};
use aeroprint::evaluate::tracking_stats;
use nalgebra::Vector3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut w = Disturbance::zeros();
    w[3] = 0.3;
    w[5] = -0.2;
    let plant = PlantSpec::ideal().with_constant(w);
    let a = Vector3::new(0.0, 0.0, 1.0);
    let b = Vector3::new(0.4, 0.0, 1.0);

    for mode in [EstimatorMode::Off, EstimatorMode::On] {
        let cfg = MissionConfig { estimator: mode, ..MissionConfig::default() };
        let dt = cfg.nmpc.model.dt;
        let mut refs = transit(a, b, 0.02, dt);
        for r in &mut refs {
            r.extrude = true;
        }
        let mut ex = Executor::new(plant.clone(), a, cfg, 1)?;
        let mut depleted = 0.0;
        ex.track(&refs, Some(0), 0.0, &mut depleted)?;
        let trace = ex.finish();
        let tail = &trace.samples[trace.samples.len() * 3 / 4..];
        let err: f64 = tail.iter().map(|s| (s.state.fixed_rows::<3>(0) - s.reference).norm()).sum::<f64>()
            / tail.len() as f64;
        let stats = tracking_stats(&trace, 0.0)?;
        let last = trace.samples.last().unwrap();
        println!(
            "estimator {mode:?}: final-quarter error {:.2} cm, overall mean {:.2} cm, w_hat [{:.2} {:.2} {:.2}]",
            err * 100.0,
            stats.chunks[0].uav.mean_3d * 100.0,
            last.w_hat[3],
            last.w_hat[4],
            last.w_hat[5]
        );
    }
    Ok(())
}
