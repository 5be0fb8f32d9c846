use crate::constitutive::{DEFAULT_SOFTENING_FLOOR, DEFAULT_SOFTENING_RATE};
use serde::{Deserialize, Serialize};

/// Cells kept free at every domain face; wall boundary conditions act here.
pub const BOUNDARY_CELLS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Timestep {
    /// Fixed step; rejected if it violates the CFL bound.
    Fixed { dt: f64 },
    /// Largest step `<= max_dt` meeting `dt <= cfl * dx / (v_max + c_max)`,
    /// re-evaluated every output frame.
    Adaptive { max_dt: f64, cfl: f64 },
}

impl Default for Timestep {
    fn default() -> Self {
        Timestep::Adaptive {
            max_dt: 1e-4,
            cfl: 0.4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundConfig {
    pub enabled: bool,
    /// Height of the ground plane (m); scenarios place objects relative to it.
    pub height: f64,
    /// Coulomb coefficient of the ground contact.
    pub friction: f64,
}

impl Default for GroundConfig {
    fn default() -> Self {
        GroundConfig {
            enabled: true,
            height: 0.1,
            friction: 0.4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SofteningConfig {
    pub rate: f64,
    pub floor_ratio: f64,
}

impl Default for SofteningConfig {
    fn default() -> Self {
        SofteningConfig {
            rate: DEFAULT_SOFTENING_RATE,
            floor_ratio: DEFAULT_SOFTENING_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Grid nodes per axis.
    pub resolution: usize,
    /// Edge length of the cubic simulation domain (m).
    pub domain_size: f64,
    pub timestep: Timestep,
    pub gravity: [f64; 3],
    pub ground: GroundConfig,
    /// Free-slip walls on all six domain faces.
    pub walls: bool,
    pub fps: f64,
    pub duration: f64,
    pub deterministic: bool,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    pub softening: SofteningConfig,
    /// Singular values of F are clamped into this range after plasticity.
    pub singular_value_bounds: [f64; 2],
    pub record_velocities: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            resolution: 64,
            domain_size: 2.0,
            timestep: Timestep::default(),
            gravity: [0.0, -9.8, 0.0],
            ground: GroundConfig::default(),
            walls: true,
            fps: 24.0,
            duration: 1.0,
            deterministic: true,
            workers: 0,
            softening: SofteningConfig::default(),
            singular_value_bounds: [0.05, 4.0],
            record_velocities: false,
        }
    }
}

impl SimConfig {
    pub fn dx(&self) -> f64 {
        self.domain_size / self.resolution as f64
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        if self.resolution < 2 * BOUNDARY_CELLS + 2 {
            problems.push(format!("resolution {} is too small", self.resolution));
        }
        if !(self.domain_size > 0.0) {
            problems.push("domain_size must be positive".into());
        }
        if !(self.fps > 0.0) {
            problems.push("fps must be positive".into());
        }
        if !(self.duration > 0.0) || self.frame_count() == 0 {
            problems.push("duration must cover at least one frame".into());
        }
        match self.timestep {
            Timestep::Fixed { dt } if !(dt > 0.0) => problems.push("dt must be positive".into()),
            Timestep::Adaptive { max_dt, cfl } if !(max_dt > 0.0 && cfl > 0.0) => {
                problems.push("max_dt and cfl must be positive".into())
            }
            _ => {}
        }
        let [lo, hi] = self.singular_value_bounds;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            problems.push("singular_value_bounds must bracket 1".into());
        }
        if self.ground.enabled
            && (self.ground.height < BOUNDARY_CELLS as f64 * self.dx()
                || self.ground.height >= self.domain_size)
        {
            problems.push(format!(
                "ground height {} must lie inside the domain, above the {}-cell boundary layer",
                self.ground.height, BOUNDARY_CELLS
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }
}
