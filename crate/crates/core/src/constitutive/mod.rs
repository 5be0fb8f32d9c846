//! Finite-strain elasticity and plastic return mappings.
//!
//! Stresses are first Piola-Kirchhoff (`P`). Return mappings work on the
//! principal Hencky strain `ln(Σ)` of `F = U Σ Vᵀ` and hand back the elastic
//! part of the deformation gradient.

mod elastic;
mod plastic;

pub use elastic::{
    kirchhoff_from_hencky, neo_hookean_energy, stress_neo_hookean, stress_stvk, stvk_energy,
};
pub use plastic::{
    drucker_prager_alpha, principal_stretches, return_map_drucker_prager, return_map_identity,
    return_map_von_mises, ReturnMapping, Softening, DEFAULT_SOFTENING_FLOOR,
    DEFAULT_SOFTENING_RATE,
};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum ConstitutiveError {
    #[error("Poisson's ratio {0} is at or beyond the incompressible limit 0.5")]
    Incompressible(f64),
    #[error("Young's modulus {0} must be positive")]
    NonPositiveModulus(f64),
    #[error("deformation gradient is inverted or degenerate (det F = {0})")]
    InvertedElement(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LameParams {
    pub mu: f64,
    pub lambda: f64,
}

/// `mu = E / (2(1+nu))`, `lambda = E nu / ((1+nu)(1-2nu))`.
pub fn lame_from_moduli(
    youngs_modulus: f64,
    poisson_ratio: f64,
) -> Result<LameParams, ConstitutiveError> {
    if !(youngs_modulus > 0.0) {
        return Err(ConstitutiveError::NonPositiveModulus(youngs_modulus));
    }
    if poisson_ratio >= 0.5 || poisson_ratio.is_nan() {
        return Err(ConstitutiveError::Incompressible(poisson_ratio));
    }
    let (e, nu) = (youngs_modulus, poisson_ratio);
    Ok(LameParams {
        mu: e / (2.0 * (1.0 + nu)),
        lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
    })
}

/// Per-particle plastic history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlasticState {
    /// Accumulated equivalent plastic strain.
    pub eps_p: f64,
    /// Current yield stress (Pa); equals the initial value unless softening.
    pub sigma_y_current: f64,
}

impl PlasticState {
    pub fn new(initial_yield: f64) -> Self {
        PlasticState {
            eps_p: 0.0,
            sigma_y_current: initial_yield,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lame_closed_form() {
        let l = lame_from_moduli(1e6, 0.25).unwrap();
        assert!((l.mu - 4.0e5).abs() < 1e-9);
        assert!((l.lambda - 4.0e5).abs() < 1e-9);
        let l = lame_from_moduli(3e7, 0.0).unwrap();
        assert_eq!(l.mu, 1.5e7);
        assert_eq!(l.lambda, 0.0);
    }

    #[test]
    fn lame_steel() {
        // mu = 2.1e11 / 2.6, lambda = 2.1e11 * 0.3 / (1.3 * 0.4), evaluated
        // with exact rational arithmetic.
        let l = lame_from_moduli(2.1e11, 0.30).unwrap();
        let mu = 80_769_230_769.230_769_230_8;
        let lambda = 121_153_846_153.846_153_846;
        assert!((l.mu - mu).abs() / mu < 1e-9);
        assert!((l.lambda - lambda).abs() / lambda < 1e-9);
    }

    #[test]
    fn incompressible_rejected() {
        assert_eq!(
            lame_from_moduli(1e6, 0.5),
            Err(ConstitutiveError::Incompressible(0.5))
        );
        assert!(lame_from_moduli(-1.0, 0.3).is_err());
    }
}
