//! Fixed-arity numeric encoding of [`MaterialParams`]:
//! `[log10 E, nu, log10 sigma_y, phi, rho, onehot(M0..M3)]`.
//!
//! Inapplicable parameters carry sentinels: `log10(1 Pa) = 0` for the yield
//! stress slot and `0 rad` for the friction angle slot.

use super::{BehaviorType, MaterialParams};

pub const FEATURE_DIM: usize = 9;

const YIELD_SENTINEL_LOG: f64 = 0.0;
const FRICTION_SENTINEL: f64 = 0.0;

pub fn material_feature_vector(m: &MaterialParams) -> [f64; FEATURE_DIM] {
    let b = m.behavior;
    let log_yield = match m.yield_stress {
        Some(s) if b.requires_yield_stress() => s.log10(),
        _ => YIELD_SENTINEL_LOG,
    };
    let phi = match m.friction_angle {
        Some(p) if b.requires_friction_angle() => p,
        _ => FRICTION_SENTINEL,
    };
    let mut v = [
        m.youngs_modulus.log10(),
        m.poisson_ratio,
        log_yield,
        phi,
        m.density,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    v[5 + b.index()] = 1.0;
    v
}

/// Inverse of [`material_feature_vector`]; the behavior slot is decoded by
/// argmax so soft predictions are accepted too.
pub fn material_from_features(v: &[f64; FEATURE_DIM]) -> MaterialParams {
    let idx = (0..4)
        .max_by(|&a, &b| v[5 + a].total_cmp(&v[5 + b]).then(b.cmp(&a)))
        .unwrap();
    let behavior = BehaviorType::from_index(idx).unwrap();
    MaterialParams {
        youngs_modulus: 10f64.powf(v[0]),
        poisson_ratio: v[1],
        yield_stress: behavior.requires_yield_stress().then(|| 10f64.powf(v[2])),
        friction_angle: behavior.requires_friction_angle().then_some(v[3]),
        density: v[4],
        behavior,
    }
}
