use nalgebra::Matrix3;
use proptest::prelude::*;
use sha2::{Digest, Sha256};
use simready_core::assets::{cube_asset, lattice_box, MaterialParams};
use simready_core::constitutive::PlasticState;
use simready_core::mpm::{
    run_simulation, Boundaries, Forcing, GroundConfig, MpmSolver, ParticleState, SimConfig,
    SimError, Timestep, Vec3,
};
use simready_core::scenarios::{init_state_for_scenario, ScenarioSpec};
use simready_core::{BehaviorType, SimReadyAsset};

fn small_config() -> SimConfig {
    let mut c = SimConfig {
        resolution: 32,
        ..Default::default()
    };
    c.ground.height = 0.25;
    c
}

fn free_config() -> SimConfig {
    SimConfig {
        resolution: 32,
        gravity: [0.0; 3],
        walls: false,
        ground: GroundConfig {
            enabled: false,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn cube(e: f64, n: usize, side: f64) -> SimReadyAsset {
    cube_asset(
        "cube",
        n,
        MaterialParams::elastic(e, 0.3, 500.0),
        [0.6; 3],
        side,
    )
    .unwrap()
}

fn com_y(points: &[[f64; 3]]) -> f64 {
    points.iter().map(|p| p[1]).sum::<f64>() / points.len() as f64
}

#[test]
fn soft_cube_falls_ballistically_before_contact() {
    let mut cfg = small_config();
    cfg.duration = 7.0 / 24.0;
    cfg.timestep = Timestep::Fixed { dt: 1e-4 };
    let traj = run_simulation(
        &cube(1e5, 8, 0.2),
        &ScenarioSpec::Drop { height: 0.5 },
        &cfg,
    )
    .unwrap();
    assert_eq!(traj.len(), 7);
    let y0 = com_y(&traj.frame_points(0));
    for (k, f) in traj.frames().iter().enumerate() {
        let expected = y0 - 0.5 * 9.8 * f.time * f.time;
        let got = com_y(&traj.frame_points(k));
        assert!(
            (got - expected).abs() < 1e-3,
            "frame {k}: {got} vs {expected}"
        );
    }
}

fn spinning_block() -> Vec<ParticleState> {
    let cfg = free_config();
    let asset = cube(1e6, 8, 0.3);
    let mut init =
        init_state_for_scenario(&asset, &ScenarioSpec::Drop { height: 0.5 }, &cfg).unwrap();
    let c = init.particles.iter().map(|p| p.x).sum::<Vec3>() / init.particles.len() as f64;
    let omega = Vec3::new(0.5, 3.0, -1.0);
    for p in init.particles.iter_mut() {
        p.v = Vec3::new(0.4, -0.2, 0.1) + omega.cross(&(p.x - c));
    }
    init.particles
}

#[test]
fn mass_and_momentum_are_conserved_without_gravity_or_contact() {
    let cfg = free_config();
    let particles = spinning_block();
    let mut solver = MpmSolver::new(
        particles,
        Boundaries {
            walls: false,
            ground: None,
        },
        &cfg,
    )
    .unwrap();
    let m0 = solver.total_mass();
    let p0 = solver.total_momentum();
    let forcing = Forcing::default();
    for _ in 0..1000 {
        solver.step(1e-4, &forcing).unwrap();
        assert!((solver.grid.total_mass() - m0).abs() <= 1e-10 * m0);
        assert!((solver.total_mass() - m0).abs() <= 1e-10 * m0);
    }
    let p1 = solver.total_momentum();
    assert!((p1 - p0).norm() <= 1e-6 * p0.norm(), "{p0} -> {p1}");
}

#[test]
fn grid_mass_matches_particle_mass_every_step_with_contact() {
    let cfg = small_config();
    let asset = cube(1e5, 8, 0.2);
    let init = init_state_for_scenario(&asset, &ScenarioSpec::Drop { height: 0.0 }, &cfg).unwrap();
    let mut solver = MpmSolver::new(init.particles, init.boundaries, &cfg).unwrap();
    let m0 = solver.total_mass();
    for _ in 0..200 {
        solver.step(1e-4, &Forcing::default()).unwrap();
        assert!((solver.grid.total_mass() - m0).abs() <= 1e-10 * m0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn affine_velocity_fields_are_reproduced(
        a in prop::array::uniform9(-2.0f64..2.0),
        v0 in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let cfg = free_config();
        let a = Matrix3::from_row_slice(&a);
        let v0 = Vec3::from(v0);
        let particles: Vec<ParticleState> = lattice_box([6, 6, 6], [0.8; 3], [1.2; 3])
            .into_iter()
            .map(|x| {
                let x = Vec3::from(x);
                ParticleState {
                    x,
                    v: v0 + a * x,
                    f: Matrix3::identity(),
                    c: a,
                    mass: 0.01,
                    volume0: 1e-5,
                    material: MaterialParams::elastic(1e6, 0.3, 1000.0),
                    plastic: PlasticState::new(f64::MAX),
                }
            })
            .collect();
        let before: Vec<Vec3> = particles.iter().map(|p| p.x).collect();
        let mut solver = MpmSolver::new(particles, Boundaries { walls: false, ground: None }, &cfg).unwrap();
        solver.step(1e-5, &Forcing::default()).unwrap();
        for (p, x) in solver.particles.iter().zip(&before) {
            prop_assert!((p.v - (v0 + a * x)).norm() < 1e-10);
            prop_assert!((p.c - a).norm() < 1e-9);
        }
    }
}

fn mixed_asset() -> SimReadyAsset {
    let base = cube(1e6, 8, 0.25);
    let mut m1 = MaterialParams::elastic(2e6, 0.35, 900.0);
    m1.behavior = BehaviorType::M1;
    m1.yield_stress = Some(2e4);
    let mut m3 = MaterialParams::elastic(5e5, 0.3, 1600.0);
    m3.behavior = BehaviorType::M3;
    m3.friction_angle = Some(0.6);
    let mut materials = base.materials().to_vec();
    for (i, m) in materials.iter_mut().enumerate() {
        *m = match i % 3 {
            0 => *m,
            1 => m1,
            _ => m3,
        };
    }
    SimReadyAsset::new(
        base.points().to_vec(),
        base.colors().to_vec(),
        base.part_labels().to_vec(),
        materials,
        base.metadata().clone(),
        *base.normalization(),
    )
    .unwrap()
}

#[test]
fn repeated_runs_and_worker_counts_give_identical_bytes() {
    let asset = mixed_asset();
    let spec = ScenarioSpec::Throw {
        velocity: [1.0, 0.5, 0.0],
        height: 0.05,
    };
    let hash = |workers| {
        let mut cfg = small_config();
        cfg.duration = 4.0 / 24.0;
        cfg.workers = workers;
        let t = run_simulation(&asset, &spec, &cfg).unwrap();
        Sha256::digest(t.to_bytes()).to_vec()
    };
    let reference = hash(1);
    assert_eq!(hash(1), reference);
    assert_eq!(hash(2), reference);
    assert_eq!(hash(4), reference);
}

#[test]
fn every_scenario_runs() {
    let asset = mixed_asset();
    let mut cfg = small_config();
    cfg.duration = 2.0 / 24.0;
    for spec in ["drop", "throw", "tilt", "drag", "wind"].map(|n| ScenarioSpec::by_name(n).unwrap())
    {
        let t = run_simulation(&asset, &spec, &cfg).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.provenance.scenario, spec.name());
        assert!(t
            .frames()
            .iter()
            .all(|f| f.positions.iter().flatten().all(|x| x.is_finite())));
    }
}

#[test]
fn dragged_handle_moves_at_prescribed_velocity() {
    let asset = cube(1e5, 8, 0.2);
    let spec = ScenarioSpec::default_drag();
    let cfg = small_config();
    let init = init_state_for_scenario(&asset, &spec, &cfg).unwrap();
    let handle = init.handle.clone();
    let mut solver = MpmSolver::new(init.particles, init.boundaries, &cfg).unwrap();
    let v = Vec3::new(0.5, 0.0, 0.0);
    let before: Vec<Vec3> = solver.particles.iter().map(|p| p.x).collect();
    let forcing = Forcing {
        external_accel: Vec3::zeros(),
        prescribed: Some((&handle, v)),
    };
    for _ in 0..100 {
        solver.step(1e-4, &forcing).unwrap();
    }
    for ((p, x0), &h) in solver.particles.iter().zip(&before).zip(&handle) {
        if h {
            assert!((p.x - x0 - 100.0 * 1e-4 * v).norm() < 1e-12);
        }
    }
}

#[test]
fn oversized_fixed_step_reports_cfl_bound() {
    let mut cfg = small_config();
    cfg.timestep = Timestep::Fixed { dt: 1e-3 };
    let err = run_simulation(&cube(1e9, 4, 0.2), &ScenarioSpec::default_drop(), &cfg).unwrap_err();
    match err {
        SimError::Cfl { dt, suggested } => assert!(suggested < dt),
        other => panic!("unexpected {other}"),
    }
}
