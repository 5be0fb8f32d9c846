//! One explicit MLS-MPM step: P2G with APIC momentum and the stress force
//! folded into the affine term, grid velocity update with boundaries, G2P
//! with deformation update and per-particle return mapping.
//!
//! Per-particle work runs in parallel, but every floating-point reduction is
//! performed in particle order, so results do not depend on the worker count.

use super::config::{SimConfig, BOUNDARY_CELLS};
use super::grid::{GridField, Stencil, Vec3};
use super::particles::{ParticleModel, ParticleState};
use super::SimError;
use crate::constitutive::{stress_neo_hookean, stress_stvk, Mat3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    /// Any point on the plane.
    pub point: [f64; 3],
    /// Unit normal pointing out of the ground.
    pub normal: [f64; 3],
    pub friction: f64,
}

impl GroundPlane {
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        (x - Vec3::from(self.point)).dot(&Vec3::from(self.normal))
    }

    /// Coulomb contact: removes the into-plane normal velocity and scales the
    /// tangential part by `max(0, 1 - mu |v_n| / |v_t|)`.
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let n = Vec3::from(self.normal);
        let vn = v.dot(&n);
        if vn >= 0.0 {
            return *v;
        }
        let vt = v - vn * n;
        let vt_norm = vt.norm();
        if vt_norm <= 0.0 {
            return Vec3::zeros();
        }
        vt * (1.0 - self.friction * vn.abs() / vt_norm).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub walls: bool,
    pub ground: Option<GroundPlane>,
}

/// Per-step external driving.
#[derive(Clone, Copy, Debug, Default)]
pub struct Forcing<'a> {
    pub external_accel: Vec3,
    /// Particles flagged `true` move with the given velocity this step.
    pub prescribed: Option<(&'a [bool], Vec3)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: u64,
    /// Particle updates whose deformation gradient needed singular-value clamping.
    pub clamps: u64,
}

/// Per-particle P2G inputs, computed in parallel and scattered serially.
#[derive(Clone, Copy)]
struct Contribution {
    stencil: Stencil,
    mass: f64,
    momentum: Vec3,
    /// Affine momentum per cell of offset (stress impulse + APIC, times dx).
    affine: Mat3,
}

const EMPTY: Contribution = Contribution {
    stencil: Stencil {
        base: [0; 3],
        fx: Vec3::new(0.0, 0.0, 0.0),
        w: [[0.0; 3]; 3],
    },
    mass: 0.0,
    momentum: Vec3::new(0.0, 0.0, 0.0),
    affine: Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
};

pub struct MpmSolver {
    config: SimConfig,
    dx: f64,
    inv_dx: f64,
    pub grid: GridField,
    pub particles: Vec<ParticleState>,
    models: Vec<ParticleModel>,
    pub boundaries: Boundaries,
    pub time: f64,
    pub diagnostics: Diagnostics,
    pool: rayon::ThreadPool,
    scratch: Vec<Contribution>,
}

impl MpmSolver {
    pub fn new(
        particles: Vec<ParticleState>,
        boundaries: Boundaries,
        config: &SimConfig,
    ) -> Result<Self, SimError> {
        config.validate().map_err(SimError::Config)?;
        let models = particles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                ParticleModel::new(&p.material, config)
                    .map_err(|source| SimError::Numeric { index: i, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
        let dx = config.dx();
        Ok(MpmSolver {
            config: config.clone(),
            dx,
            inv_dx: 1.0 / dx,
            grid: GridField::new(config.resolution, dx),
            scratch: vec![EMPTY; particles.len()],
            particles,
            models,
            boundaries,
            time: 0.0,
            diagnostics: Diagnostics::default(),
            pool,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.particles.iter().map(|p| p.mass * p.v).sum()
    }

    pub fn max_speed(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.v.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_sound_speed(&self) -> f64 {
        self.models
            .iter()
            .map(|m| m.sound_speed)
            .fold(0.0, f64::max)
    }

    /// Largest step allowed by `dt <= cfl * dx / (v_max + c_max)`.
    pub fn cfl_limit(&self, cfl: f64) -> f64 {
        cfl * self.dx / (self.max_speed() + self.max_sound_speed())
    }

    /// Scatters mass and APIC momentum, with the MLS stress impulse
    /// `-dt V0 (4/dx²) τ` folded into the affine term.
    pub fn particle_to_grid(&mut self, dt: f64) -> Result<(), SimError> {
        let (inv_dx, dx, res) = (self.inv_dx, self.dx, self.config.resolution);
        let stress_scale = -dt * 4.0 * inv_dx * inv_dx;
        let particles = &self.particles;
        let models = &self.models;
        let scratch = &mut self.scratch;
        self.pool.install(|| {
            scratch
                .par_iter_mut()
                .zip(particles.par_iter().zip(models.par_iter()))
                .enumerate()
                .try_for_each(|(i, (out, (p, m)))| -> Result<(), SimError> {
                    let stencil = Stencil::new(&p.x, inv_dx, res).ok_or(SimError::OutOfDomain {
                        index: i,
                        position: p.x.into(),
                    })?;
                    let piola = if m.stvk {
                        stress_stvk(&p.f, &m.lame)
                    } else {
                        stress_neo_hookean(&p.f, &m.lame)
                            .map_err(|source| SimError::Numeric { index: i, source })?
                    };
                    let kirchhoff = piola * p.f.transpose();
                    *out = Contribution {
                        stencil,
                        mass: p.mass,
                        momentum: p.mass * p.v,
                        affine: (stress_scale * p.volume0 * kirchhoff + p.mass * p.c) * dx,
                    };
                    Ok(())
                })
        })?;
        self.grid.clear();
        let res = self.grid.resolution;
        for c in &self.scratch {
            let s = &c.stencil;
            s.for_each(|off, w, dpos| {
                let node =
                    ((s.base[0] + off[0]) * res + s.base[1] + off[1]) * res + s.base[2] + off[2];
                self.grid
                    .scatter(node, w * c.mass, w * (c.momentum + c.affine * dpos));
            });
        }
        Ok(())
    }

    /// Node velocity = momentum / mass + dt (gravity + external), then walls
    /// (free-slip) and the ground plane (Coulomb friction).
    pub fn grid_update(&mut self, dt: f64, external_accel: Vec3) {
        let accel = Vec3::from(self.config.gravity) + external_accel;
        let grid = &self.grid;
        let res = grid.resolution;
        let boundaries = self.boundaries;
        let velocities: Vec<Vec3> = self.pool.install(|| {
            grid.active
                .par_iter()
                .map(|&i| {
                    let m = grid.mass[i];
                    if m <= 0.0 {
                        return Vec3::zeros();
                    }
                    let mut v = grid.momentum[i] / m + dt * accel;
                    if boundaries.walls {
                        let c = grid.coords(i);
                        for a in 0..3 {
                            if (c[a] < BOUNDARY_CELLS && v[a] < 0.0)
                                || (c[a] + BOUNDARY_CELLS >= res && v[a] > 0.0)
                            {
                                v[a] = 0.0;
                            }
                        }
                    }
                    if let Some(ground) = &boundaries.ground {
                        if ground.signed_distance(&grid.node_position(i)) <= 0.0 {
                            v = ground.apply(&v);
                        }
                    }
                    v
                })
                .collect()
        });
        for (k, &i) in self.grid.active.iter().enumerate() {
            self.grid.velocity[i] = velocities[k];
        }
    }

    /// Gathers velocity and the affine matrix, advects, updates F and runs
    /// each particle's return mapping.
    pub fn grid_to_particle(&mut self, dt: f64, forcing: &Forcing) -> Result<(), SimError> {
        let (inv_dx, dx, res) = (self.inv_dx, self.dx, self.config.resolution);
        let [lo, hi] = self.config.singular_value_bounds;
        let walls = self.boundaries.walls;
        let (x_min, x_max) = (dx, (res - 2) as f64 * dx);
        let grid = &self.grid;
        let models = &self.models;
        let prescribed = forcing.prescribed;
        let clamps: Vec<u8> = self.pool.install(|| {
            self.particles
                .par_iter_mut()
                .zip(models.par_iter())
                .enumerate()
                .map(|(i, (p, m))| -> Result<u8, SimError> {
                    let stencil = Stencil::new(&p.x, inv_dx, res).ok_or(SimError::OutOfDomain {
                        index: i,
                        position: p.x.into(),
                    })?;
                    let mut v = Vec3::zeros();
                    let mut b = Mat3::zeros();
                    stencil.for_each(|off, w, dpos| {
                        let node = grid.index([
                            stencil.base[0] + off[0],
                            stencil.base[1] + off[1],
                            stencil.base[2] + off[2],
                        ]);
                        let vi = grid.velocity[node];
                        v += w * vi;
                        b += (w * vi) * (dpos * dx).transpose();
                    });
                    let c = b * (4.0 * inv_dx * inv_dx);
                    if let Some((flags, vel)) = prescribed {
                        if flags[i] {
                            v = vel;
                        }
                    }
                    p.v = v;
                    p.c = c;
                    p.x += dt * v;
                    if walls {
                        for a in 0..3 {
                            p.x[a] = p.x[a].clamp(x_min, x_max);
                        }
                    }

                    let mut clamped = 0u8;
                    let mut f_trial = (Mat3::identity() + dt * c) * p.f;
                    if !f_trial.iter().all(|x| x.is_finite()) {
                        return Err(SimError::Numeric {
                            index: i,
                            source: crate::constitutive::ConstitutiveError::NonFinite(
                                "deformation gradient",
                            ),
                        });
                    }
                    if f_trial.determinant() <= 0.0 {
                        f_trial = clamp_singular_values(&f_trial, lo, hi).unwrap_or(f_trial);
                        clamped = 1;
                    }
                    let (f_elastic, plastic) = m
                        .mapping
                        .apply(&f_trial, &m.lame, &p.plastic)
                        .map_err(|source| SimError::Numeric { index: i, source })?;
                    p.f = match clamp_singular_values(&f_elastic, lo, hi) {
                        Some(f) => {
                            clamped = 1;
                            f
                        }
                        None => f_elastic,
                    };
                    p.plastic = plastic;
                    Ok(clamped)
                })
                .collect::<Result<Vec<u8>, SimError>>()
        })?;
        self.diagnostics.clamps += clamps.iter().map(|&c| c as u64).sum::<u64>();
        Ok(())
    }

    pub fn step(&mut self, dt: f64, forcing: &Forcing) -> Result<(), SimError> {
        self.particle_to_grid(dt)?;
        self.grid_update(dt, forcing.external_accel);
        self.grid_to_particle(dt, forcing)?;
        self.time += dt;
        self.diagnostics.steps += 1;
        Ok(())
    }
}

/// Clamps the singular values of `f` into `[lo, hi]`, treating a reflected
/// `f` (det < 0) as having one negative stretch. `None` when already inside.
pub fn clamp_singular_values(f: &Mat3, lo: f64, hi: f64) -> Option<Mat3> {
    // Gershgorin discs of FᵀF bound the squared singular values.
    if f.determinant() > 0.0 {
        let c = f.transpose() * f;
        let inside = (0..3).all(|i| {
            let r: f64 = (0..3).filter(|&j| j != i).map(|j| c[(i, j)].abs()).sum();
            c[(i, i)] - r >= lo * lo && c[(i, i)] + r <= hi * hi
        });
        if inside {
            return None;
        }
    }
    let svd = f.svd(true, true);
    let (mut u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = svd.singular_values;
    if u.determinant() * vt.determinant() < 0.0 {
        let i = s.imin();
        s[i] = -s[i];
        u.column_mut(i).neg_mut();
    }
    if s.iter().all(|&x| x >= lo && x <= hi) {
        return None;
    }
    let s = s.map(|x| x.clamp(lo, hi));
    Some(u * Mat3::from_diagonal(&s) * vt)
}
