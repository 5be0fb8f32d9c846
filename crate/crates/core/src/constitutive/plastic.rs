use super::elastic::kirchhoff_from_hencky;
use super::{ConstitutiveError, LameParams, Mat3, PlasticState};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SOFTENING_RATE: f64 = 5.0;
pub const DEFAULT_SOFTENING_FLOOR: f64 = 0.1;

/// `sqrt(2/3)`: maps the deviatoric Frobenius norm to tension-test scale.
const SQRT_TWO_THIRDS: f64 = 0.816_496_580_927_726;

/// Linear yield-stress softening:
/// `sigma_y = initial_yield * max(1 - rate * eps_p, floor_ratio)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Softening {
    pub initial_yield: f64,
    pub rate: f64,
    pub floor_ratio: f64,
}

impl Softening {
    pub fn new(initial_yield: f64) -> Self {
        Softening {
            initial_yield,
            rate: DEFAULT_SOFTENING_RATE,
            floor_ratio: DEFAULT_SOFTENING_FLOOR,
        }
    }

    pub fn yield_at(&self, eps_p: f64) -> f64 {
        self.initial_yield * (1.0 - self.rate * eps_p).max(self.floor_ratio)
    }
}

/// SVD of `F` as `(U, Σ, Vᵀ)` with strictly positive singular values.
pub fn principal_stretches(f: &Mat3) -> Result<(Mat3, Vector3<f64>, Mat3), ConstitutiveError> {
    if !f.iter().all(|x| x.is_finite()) {
        return Err(ConstitutiveError::NonFinite("deformation gradient"));
    }
    let svd = f.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sigma = svd.singular_values;
    // U and Vᵀ may both be reflections; only a mixed pair means det F < 0.
    if sigma.iter().any(|&s| !(s > 0.0)) || u.determinant() * vt.determinant() < 0.0 {
        return Err(ConstitutiveError::InvertedElement(f.determinant()));
    }
    Ok((u, sigma, vt))
}

fn reconstruct(u: &Mat3, eps: &Vector3<f64>, vt: &Mat3) -> Mat3 {
    u * Mat3::from_diagonal(&eps.map(f64::exp)) * vt
}

fn deviator(eps: &Vector3<f64>) -> Vector3<f64> {
    eps - Vector3::repeat(eps.sum() / 3.0)
}

pub fn return_map_identity(f_trial: &Mat3, state: &PlasticState) -> (Mat3, PlasticState) {
    (*f_trial, *state)
}

/// von Mises return mapping in principal Hencky strain.
///
/// Yield when `‖dev τ‖_F > sqrt(2/3) sigma_y`. With softening the projection
/// lands on the softened surface (closest-point with the updated yield stress),
/// so applying the map twice is the same as once.
pub fn return_map_von_mises(
    f_trial: &Mat3,
    lame: &LameParams,
    state: &PlasticState,
    softening: Option<&Softening>,
) -> Result<(Mat3, PlasticState), ConstitutiveError> {
    if !(state.sigma_y_current > 0.0) {
        return Err(ConstitutiveError::NonFinite("yield stress"));
    }
    let (u, sigma, vt) = principal_stretches(f_trial)?;
    let eps = sigma.map(f64::ln);
    let dev = deviator(&eps);
    let dev_norm = dev.norm();
    let two_mu = 2.0 * lame.mu;
    if two_mu * dev_norm <= SQRT_TWO_THIRDS * state.sigma_y_current {
        return Ok((*f_trial, *state));
    }

    let (dgamma, new_yield, new_eps_p) = match softening {
        None => {
            let dg = dev_norm - SQRT_TWO_THIRDS * state.sigma_y_current / two_mu;
            (
                dg,
                state.sigma_y_current,
                state.eps_p + SQRT_TWO_THIRDS * dg,
            )
        }
        Some(s) => soften(s, two_mu, dev_norm, state),
    };
    let eps_new = eps - (dgamma / dev_norm) * dev;
    Ok((
        reconstruct(&u, &eps_new, &vt),
        PlasticState {
            eps_p: new_eps_p.max(state.eps_p),
            sigma_y_current: new_yield.min(state.sigma_y_current),
        },
    ))
}

/// Solves `2μ(‖dev ε‖ − Δγ) = sqrt(2/3) σ(eps_p + sqrt(2/3) Δγ)` for the
/// linear softening law; falls back to the floor branch when the linear
/// branch would pass below it or is unstable (softening modulus ≥ 2μ).
fn soften(s: &Softening, two_mu: f64, dev_norm: f64, state: &PlasticState) -> (f64, f64, f64) {
    let k = SQRT_TWO_THIRDS;
    let e0 = state.eps_p;
    let denom = two_mu - k * s.initial_yield * s.rate * k;
    if denom > 0.0 {
        let dg = (two_mu * dev_norm - k * s.initial_yield * (1.0 - s.rate * e0)) / denom;
        let e1 = e0 + k * dg;
        let ratio = 1.0 - s.rate * e1;
        if ratio >= s.floor_ratio && dg >= 0.0 {
            return (dg, s.initial_yield * ratio, e1);
        }
    }
    let floor = s.initial_yield * s.floor_ratio;
    let dg = dev_norm - k * floor / two_mu;
    let e_floor = if s.rate > 0.0 {
        (1.0 - s.floor_ratio) / s.rate
    } else {
        0.0
    };
    (dg, floor, (e0 + k * dg).max(e_floor))
}

/// `α = sqrt(2/3) · 2 sin φ / (3 − sin φ)`
pub fn drucker_prager_alpha(friction_angle: f64) -> f64 {
    let s = friction_angle.sin();
    SQRT_TWO_THIRDS * 2.0 * s / (3.0 - s)
}

/// Cohesionless Drucker-Prager return mapping: tensile trial states go to
/// the cone apex, states outside the cone are projected onto its surface
/// along the deviatoric direction.
pub fn return_map_drucker_prager(
    f_trial: &Mat3,
    lame: &LameParams,
    friction_angle: f64,
    state: &PlasticState,
) -> Result<(Mat3, PlasticState), ConstitutiveError> {
    if !friction_angle.is_finite() {
        return Err(ConstitutiveError::NonFinite("friction angle"));
    }
    let (u, sigma, vt) = principal_stretches(f_trial)?;
    let eps = sigma.map(f64::ln);
    let tr = eps.sum();
    let mut next = *state;
    if tr > 0.0 {
        next.eps_p += SQRT_TWO_THIRDS * eps.norm();
        return Ok((u * vt, next));
    }
    let tau = kirchhoff_from_hencky(&eps, lame);
    let dev = deviator(&eps);
    let dev_norm = dev.norm();
    let yield_value = deviator(&tau).norm() + drucker_prager_alpha(friction_angle) * tau.sum();
    if yield_value <= 0.0 || dev_norm == 0.0 {
        return Ok((*f_trial, *state));
    }
    let dgamma = yield_value / (2.0 * lame.mu);
    if dgamma >= dev_norm {
        // only reachable when tr == 0
        next.eps_p += SQRT_TWO_THIRDS * dev_norm;
        return Ok((reconstruct(&u, &Vector3::repeat(tr / 3.0), &vt), next));
    }
    let eps_new = eps - (dgamma / dev_norm) * dev;
    next.eps_p += SQRT_TWO_THIRDS * dgamma;
    Ok((reconstruct(&u, &eps_new, &vt), next))
}

/// Plasticity dispatch for one particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReturnMapping {
    Identity,
    VonMises { softening: Option<Softening> },
    DruckerPrager { friction_angle: f64 },
}

impl ReturnMapping {
    pub fn apply(
        &self,
        f_trial: &Mat3,
        lame: &LameParams,
        state: &PlasticState,
    ) -> Result<(Mat3, PlasticState), ConstitutiveError> {
        match self {
            ReturnMapping::Identity => Ok(return_map_identity(f_trial, state)),
            ReturnMapping::VonMises { softening } => {
                return_map_von_mises(f_trial, lame, state, softening.as_ref())
            }
            ReturnMapping::DruckerPrager { friction_angle } => {
                return_map_drucker_prager(f_trial, lame, *friction_angle, state)
            }
        }
    }
}
