//! Drop, throw, tilt, drag and wind: initial placement plus time-dependent
//! driving of a simulation.

use crate::assets::SimReadyAsset;
use crate::mpm::{
    particles_from_asset, Boundaries, GroundPlane, ParticleState, SimConfig, SimError, Vec3,
};
use serde::{Deserialize, Serialize};

/// Particles dragged in a [`ScenarioSpec::Drag`], selected in normalized
/// asset coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Handle {
    /// Points within the top `fraction` of the object's height.
    TopFraction { fraction: f64 },
    /// Points inside an axis-aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
}

impl Default for Handle {
    fn default() -> Self {
        Handle::TopFraction { fraction: 0.1 }
    }
}

impl Handle {
    pub fn select(&self, points: &[[f64; 3]]) -> Vec<bool> {
        match *self {
            Handle::TopFraction { fraction } => {
                let (lo, hi) = points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        (lo.min(p[1]), hi.max(p[1]))
                    });
                let cut = hi - fraction * (hi - lo);
                points.iter().map(|p| p[1] >= cut).collect()
            }
            Handle::Box { min, max } => points
                .iter()
                .map(|p| (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]))
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Drop {
        height: f64,
    },
    Throw {
        velocity: [f64; 3],
        height: f64,
    },
    /// Ground normal rotated about the world x-axis by `angle` (rad).
    Tilt {
        angle: f64,
    },
    Drag {
        #[serde(default)]
        handle: Handle,
        velocity: [f64; 3],
        duration: f64,
    },
    /// Half-sine acceleration pulse `peak * sin(pi t / duration)`.
    Wind {
        peak_acceleration: [f64; 3],
        duration: f64,
    },
}

impl ScenarioSpec {
    pub fn default_drop() -> Self {
        ScenarioSpec::Drop { height: 0.5 }
    }

    pub fn default_throw() -> Self {
        ScenarioSpec::Throw {
            velocity: [1.0, 1.5, 0.0],
            height: 0.5,
        }
    }

    pub fn default_tilt() -> Self {
        ScenarioSpec::Tilt {
            angle: 20f64.to_radians(),
        }
    }

    pub fn default_drag() -> Self {
        ScenarioSpec::Drag {
            handle: Handle::default(),
            velocity: [0.5, 0.0, 0.0],
            duration: 0.5,
        }
    }

    pub fn default_wind() -> Self {
        ScenarioSpec::Wind {
            peak_acceleration: [3.0, 0.0, 0.0],
            duration: 0.5,
        }
    }

    /// Default parameters for a scenario by name.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "drop" => Self::default_drop(),
            "throw" => Self::default_throw(),
            "tilt" => Self::default_tilt(),
            "drag" => Self::default_drag(),
            "wind" => Self::default_wind(),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::Drop { .. } => "drop",
            ScenarioSpec::Throw { .. } => "throw",
            ScenarioSpec::Tilt { .. } => "tilt",
            ScenarioSpec::Drag { .. } => "drag",
            ScenarioSpec::Wind { .. } => "wind",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            ScenarioSpec::Drop { height } if !(height >= 0.0) => {
                Err(format!("height {height} must be >= 0"))
            }
            ScenarioSpec::Throw { height, .. } if !(height >= 0.0) => {
                Err(format!("height {height} must be >= 0"))
            }
            ScenarioSpec::Throw { velocity, .. } if !finite(&velocity) => {
                Err("velocity must be finite".into())
            }
            ScenarioSpec::Tilt { angle } if !(angle.abs() < std::f64::consts::FRAC_PI_2) => {
                Err(format!("tilt angle {angle} must be within (-pi/2, pi/2)"))
            }
            ScenarioSpec::Drag { duration, .. } | ScenarioSpec::Wind { duration, .. }
                if !(duration > 0.0) =>
            {
                Err(format!("duration {duration} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Particles, boundary setup and kinematic flags for one scenario run.
#[derive(Clone, Debug)]
pub struct ScenarioInit {
    pub particles: Vec<ParticleState>,
    pub boundaries: Boundaries,
    /// Drag handle membership per particle (all false for other scenarios).
    pub handle: Vec<bool>,
}

/// Ground normal after rotating `+y` about the world x-axis by `angle`.
pub fn tilted_normal(angle: f64) -> [f64; 3] {
    [0.0, angle.cos(), angle.sin()]
}

pub fn init_state_for_scenario(
    asset: &SimReadyAsset,
    spec: &ScenarioSpec,
    config: &SimConfig,
) -> Result<ScenarioInit, SimError> {
    spec.validate().map_err(SimError::Scenario)?;
    let mut particles = particles_from_asset(asset, config);
    let center = config.domain_size / 2.0;
    let ground_h = config.ground.height;
    let normal = match *spec {
        ScenarioSpec::Tilt { angle } => tilted_normal(angle),
        _ => [0.0, 1.0, 0.0],
    };
    let plane = GroundPlane {
        point: [center, ground_h, center],
        normal,
        friction: config.ground.friction,
    };

    // center horizontally
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for p in &particles {
        for a in 0..3 {
            lo[a] = lo[a].min(p.x[a]);
            hi[a] = hi[a].max(p.x[a]);
        }
    }
    let shift_x = center - 0.5 * (lo[0] + hi[0]);
    let shift_z = center - 0.5 * (lo[2] + hi[2]);
    for p in particles.iter_mut() {
        p.x.x += shift_x;
        p.x.z += shift_z;
    }

    // vertical placement: lowest point `clearance` above the (possibly tilted) plane
    let clearance = match *spec {
        ScenarioSpec::Drop { height } | ScenarioSpec::Throw { height, .. } => height,
        _ => 0.0,
    };
    let min_dist = particles
        .iter()
        .map(|p| plane.signed_distance(&p.x))
        .fold(f64::INFINITY, f64::min);
    let lift = (clearance - min_dist) / normal[1];
    for p in particles.iter_mut() {
        p.x.y += lift;
    }

    if let ScenarioSpec::Throw { velocity, .. } = *spec {
        for p in particles.iter_mut() {
            p.v = Vec3::from(velocity);
        }
    }

    let handle = match spec {
        ScenarioSpec::Drag { handle, .. } => {
            let flags = handle.select(asset.points());
            if !flags.iter().any(|&f| f) {
                return Err(SimError::Scenario(
                    "drag handle selects no particles".into(),
                ));
            }
            flags
        }
        _ => vec![false; particles.len()],
    };

    Ok(ScenarioInit {
        particles,
        boundaries: Boundaries {
            walls: config.walls,
            ground: config.ground.enabled.then_some(plane),
        },
        handle,
    })
}

/// Time-varying body acceleration; only wind is nonzero.
pub fn external_acceleration(spec: &ScenarioSpec, t: f64) -> [f64; 3] {
    match *spec {
        ScenarioSpec::Wind {
            peak_acceleration,
            duration,
        } if t < duration => {
            let s = (std::f64::consts::PI * t / duration).sin();
            peak_acceleration.map(|a| a * s)
        }
        _ => [0.0; 3],
    }
}

/// Velocity imposed on handle particles at time `t`, if any.
pub fn prescribed_velocity(spec: &ScenarioSpec, t: f64) -> Option<[f64; 3]> {
    match *spec {
        ScenarioSpec::Drag {
            velocity, duration, ..
        } if t < duration => Some(velocity),
        _ => None,
    }
}

/// Prescribed velocity for one particle: the drag velocity for handle
/// particles while the drag lasts, otherwise `None`.
pub fn kinematic_override(
    spec: &ScenarioSpec,
    t: f64,
    handle: &[bool],
    index: usize,
) -> Option<[f64; 3]> {
    if handle.get(index).copied().unwrap_or(false) {
        prescribed_velocity(spec, t)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{AssetMetadata, MaterialParams, NormalizationTransform, PartInfo};
    use nalgebra::{Rotation3, Vector3};

    fn block() -> SimReadyAsset {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    pts.push([i as f64 / 4.0, j as f64 / 8.0, k as f64 / 16.0 + 0.25]);
                }
            }
        }
        let n = pts.len();
        SimReadyAsset::new(
            pts,
            vec![[0.2, 0.4, 0.6]; n],
            vec![0; n],
            vec![MaterialParams::elastic(1e6, 0.3, 800.0); n],
            AssetMetadata {
                world_scale: 0.4,
                ..AssetMetadata::new(
                    "block",
                    vec![PartInfo {
                        name: "body".into(),
                        coarse_material: "wood".into(),
                        fine_material: None,
                    }],
                )
            },
            NormalizationTransform::identity(),
        )
        .unwrap()
    }

    #[test]
    fn drop_places_lowest_point_at_height() {
        let cfg = SimConfig::default();
        let init =
            init_state_for_scenario(&block(), &ScenarioSpec::Drop { height: 0.5 }, &cfg).unwrap();
        let min_y = init
            .particles
            .iter()
            .map(|p| p.x.y)
            .fold(f64::INFINITY, f64::min);
        assert!((min_y - (cfg.ground.height + 0.5)).abs() < 1e-12);
        assert!(init.particles.iter().all(|p| p.v == Vec3::zeros()));
        assert!(init
            .particles
            .iter()
            .all(|p| p.f == nalgebra::Matrix3::identity()));
    }

    #[test]
    fn throw_sets_uniform_velocity() {
        let spec = ScenarioSpec::Throw {
            velocity: [1.0, 2.0, 0.0],
            height: 0.3,
        };
        let init = init_state_for_scenario(&block(), &spec, &SimConfig::default()).unwrap();
        assert!(init
            .particles
            .iter()
            .all(|p| p.v == Vec3::new(1.0, 2.0, 0.0)));
    }

    #[test]
    fn tilt_normal_matches_rotation_and_object_touches_plane() {
        let angle = 0.3;
        let by_hand =
            Rotation3::from_axis_angle(&Vector3::x_axis(), angle) * Vector3::new(0.0, 1.0, 0.0);
        let n = tilted_normal(angle);
        assert!((Vector3::from(n) - by_hand).norm() < 1e-15);
        let init = init_state_for_scenario(
            &block(),
            &ScenarioSpec::Tilt { angle },
            &SimConfig::default(),
        )
        .unwrap();
        let plane = init.boundaries.ground.unwrap();
        assert_eq!(plane.normal, n);
        let min_d = init
            .particles
            .iter()
            .map(|p| plane.signed_distance(&p.x))
            .fold(f64::INFINITY, f64::min);
        assert!(min_d.abs() < 1e-12);
    }

    #[test]
    fn wind_profile() {
        let spec = ScenarioSpec::Wind {
            peak_acceleration: [3.0, 0.0, -1.0],
            duration: 0.5,
        };
        assert_eq!(external_acceleration(&spec, 0.25), [3.0, 0.0, -1.0]);
        let quarter = external_acceleration(&spec, 0.125);
        let s = (std::f64::consts::PI / 4.0).sin();
        assert!((quarter[0] - 3.0 * s).abs() < 1e-15);
        assert!((quarter[0] - 3.0 * 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(external_acceleration(&spec, 0.5), [0.0; 3]);
        assert_eq!(external_acceleration(&spec, 7.0), [0.0; 3]);
        assert_eq!(
            external_acceleration(&ScenarioSpec::default_drop(), 0.1),
            [0.0; 3]
        );
    }

    #[test]
    fn wind_is_continuous_at_the_end() {
        let spec = ScenarioSpec::default_wind();
        let a = external_acceleration(&spec, 0.5 - 1e-9);
        assert!(a[0].abs() < 1e-7);
    }

    #[test]
    fn drag_override() {
        let spec = ScenarioSpec::default_drag();
        let init = init_state_for_scenario(&block(), &spec, &SimConfig::default()).unwrap();
        let h = &init.handle;
        let handle_idx = h.iter().position(|&f| f).unwrap();
        let other = h.iter().position(|&f| !f).unwrap();
        assert_eq!(
            kinematic_override(&spec, 0.1, h, handle_idx),
            Some([0.5, 0.0, 0.0])
        );
        assert_eq!(kinematic_override(&spec, 0.6, h, handle_idx), None);
        assert_eq!(kinematic_override(&spec, 0.1, h, other), None);
        assert_eq!(
            kinematic_override(&ScenarioSpec::default_drop(), 0.1, h, handle_idx),
            None
        );
        // top 10% of a 5-layer block is exactly the top layer
        assert_eq!(h.iter().filter(|&&f| f).count(), 25);
    }

    #[test]
    fn empty_drag_handle_rejected() {
        let spec = ScenarioSpec::Drag {
            handle: Handle::Box {
                min: [2.0; 3],
                max: [3.0; 3],
            },
            velocity: [1.0, 0.0, 0.0],
            duration: 0.2,
        };
        assert!(matches!(
            init_state_for_scenario(&block(), &spec, &SimConfig::default()),
            Err(SimError::Scenario(_))
        ));
    }

    #[test]
    fn serde_tags() {
        let json = serde_json::to_string(&ScenarioSpec::default_drop()).unwrap();
        assert_eq!(json, r#"{"type":"drop","height":0.5}"#);
        let back: ScenarioSpec =
            serde_json::from_str(r#"{"type":"drag","velocity":[1,0,0],"duration":0.5}"#).unwrap();
        assert_eq!(back.name(), "drag");
    }
}
