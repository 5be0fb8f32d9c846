//! Explicit MLS-MPM with APIC transfers and per-particle materials.

mod config;
mod grid;
mod particles;
mod solver;
mod trajectory;

pub use config::{GroundConfig, SimConfig, SofteningConfig, Timestep, BOUNDARY_CELLS};
pub use grid::{GridField, Stencil, Vec3};
pub use particles::{particles_from_asset, voxel_volume_per_point, ParticleModel, ParticleState};
pub use solver::{clamp_singular_values, Boundaries, Diagnostics, Forcing, GroundPlane, MpmSolver};
pub use trajectory::{Frame, Provenance, Trajectory, TrajectoryError};

use crate::assets::{AssetError, SimReadyAsset};
use crate::constitutive::ConstitutiveError;
use crate::scenarios::{
    external_acceleration, init_state_for_scenario, prescribed_velocity, ScenarioSpec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;
use thiserror::Error;

/// CFL number used to validate fixed timesteps.
pub const FIXED_STEP_CFL: f64 = 0.4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("particle {index} at {position:?} left the simulation domain")]
    OutOfDomain { index: usize, position: [f64; 3] },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("timestep {dt:e} s violates the CFL bound; use dt <= {suggested:e} s")]
    Cfl { dt: f64, suggested: f64 },
    #[error("numerical failure at particle {index}: {source}")]
    Numeric {
        index: usize,
        #[source]
        source: ConstitutiveError,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("cancelled after {frames} frames")]
    Cancelled { frames: usize },
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub frames: usize,
    pub steps: u64,
    pub clamps: u64,
    pub min_dt: f64,
    pub max_dt: f64,
    pub wall_time_s: f64,
}

/// Short stable hash of the resolved scenario + config. The worker count
/// does not affect results and is left out.
pub fn config_hash(scenario: &ScenarioSpec, config: &SimConfig) -> String {
    let config = SimConfig {
        workers: 0,
        ..config.clone()
    };
    let json = serde_json::to_string(&(scenario, &config)).unwrap();
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn run_simulation(
    asset: &SimReadyAsset,
    scenario: &ScenarioSpec,
    config: &SimConfig,
) -> Result<Trajectory, SimError> {
    run_simulation_with_report(asset, scenario, config).map(|(t, _)| t)
}

/// Runs `scenario` on `asset`, emitting one frame per `1/fps` seconds starting
/// with the initial state at `t = 0`.
pub fn run_simulation_with_report(
    asset: &SimReadyAsset,
    scenario: &ScenarioSpec,
    config: &SimConfig,
) -> Result<(Trajectory, SimulationReport), SimError> {
    run_simulation_observed(asset, scenario, config, &mut |_, _| true)
}

/// Like [`run_simulation_with_report`], calling `observer(frames_done, total)`
/// after every frame; returning `false` cancels the run.
pub fn run_simulation_observed(
    asset: &SimReadyAsset,
    scenario: &ScenarioSpec,
    config: &SimConfig,
    observer: &mut dyn FnMut(usize, usize) -> bool,
) -> Result<(Trajectory, SimulationReport), SimError> {
    let started = Instant::now();
    config.validate().map_err(SimError::Config)?;
    let init = init_state_for_scenario(asset, scenario, config)?;
    let handle = init.handle;
    let mut solver = MpmSolver::new(init.particles, init.boundaries, config)?;
    let n_frames = config.frame_count();
    let mut frames = Vec::with_capacity(n_frames);
    frames.push(capture(&solver, 0.0, config.record_velocities));
    let mut report = SimulationReport {
        min_dt: f64::INFINITY,
        ..Default::default()
    };

    for k in 1..n_frames {
        let t0 = (k - 1) as f64 / config.fps;
        let t1 = k as f64 / config.fps;
        let allowed = match config.timestep {
            Timestep::Fixed { dt } => {
                let limit = solver.cfl_limit(FIXED_STEP_CFL);
                if dt > limit {
                    return Err(SimError::Cfl {
                        dt,
                        suggested: limit,
                    });
                }
                dt
            }
            Timestep::Adaptive { max_dt, cfl } => max_dt.min(solver.cfl_limit(cfl)),
        };
        let substeps = ((t1 - t0) / allowed).ceil().max(1.0) as usize;
        let h = (t1 - t0) / substeps as f64;
        report.min_dt = report.min_dt.min(h);
        report.max_dt = report.max_dt.max(h);
        for s in 0..substeps {
            let t = t0 + s as f64 * h;
            let forcing = Forcing {
                external_accel: Vec3::from(external_acceleration(scenario, t)),
                prescribed: prescribed_velocity(scenario, t)
                    .map(|v| (handle.as_slice(), Vec3::from(v))),
            };
            solver.step(h, &forcing)?;
        }
        solver.time = t1;
        frames.push(capture(&solver, t1, config.record_velocities));
        if !observer(frames.len(), n_frames) {
            return Err(SimError::Cancelled {
                frames: frames.len(),
            });
        }
    }

    let trajectory = Trajectory::new(
        Provenance {
            asset_id: asset.metadata().id.clone(),
            scenario: scenario.name().to_string(),
            config_hash: config_hash(scenario, config),
            fps: config.fps,
        },
        frames,
    )?;
    report.frames = trajectory.len();
    report.steps = solver.diagnostics.steps;
    report.clamps = solver.diagnostics.clamps;
    if report.steps == 0 {
        report.min_dt = 0.0;
    }
    report.wall_time_s = started.elapsed().as_secs_f64();
    Ok((trajectory, report))
}

fn capture(solver: &MpmSolver, time: f64, velocities: bool) -> Frame {
    let f32x3 = |v: &Vec3| [v.x as f32, v.y as f32, v.z as f32];
    Frame {
        time,
        positions: solver.particles.iter().map(|p| f32x3(&p.x)).collect(),
        velocities: velocities.then(|| solver.particles.iter().map(|p| f32x3(&p.v)).collect()),
    }
}
