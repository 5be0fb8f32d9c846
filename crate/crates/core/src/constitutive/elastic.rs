use super::{ConstitutiveError, LameParams, Mat3};
use nalgebra::Vector3;

/// `Ψ = μ/2 (tr(FᵀF) − 3) − μ ln J + λ/2 (ln J)²`
pub fn neo_hookean_energy(f: &Mat3, lame: &LameParams) -> Result<f64, ConstitutiveError> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(ConstitutiveError::InvertedElement(j));
    }
    let ln_j = j.ln();
    Ok(0.5 * lame.mu * (f.norm_squared() - 3.0) - lame.mu * ln_j + 0.5 * lame.lambda * ln_j * ln_j)
}

/// `P = μ(F − F⁻ᵀ) + λ ln(J) F⁻ᵀ`
pub fn stress_neo_hookean(f: &Mat3, lame: &LameParams) -> Result<Mat3, ConstitutiveError> {
    let j = f.determinant();
    if !(j > 0.0) || !j.is_finite() {
        return Err(ConstitutiveError::InvertedElement(j));
    }
    let f_inv_t = f
        .try_inverse()
        .ok_or(ConstitutiveError::InvertedElement(j))?
        .transpose();
    Ok(lame.mu * (f - f_inv_t) + lame.lambda * j.ln() * f_inv_t)
}

fn green_strain(f: &Mat3) -> Mat3 {
    0.5 * (f.transpose() * f - Mat3::identity())
}

/// `Ψ = μ G:G + λ/2 tr(G)²` with Green strain `G = (FᵀF − I)/2`.
pub fn stvk_energy(f: &Mat3, lame: &LameParams) -> f64 {
    let g = green_strain(f);
    let tr = g.trace();
    lame.mu * g.norm_squared() + 0.5 * lame.lambda * tr * tr
}

/// `P = F (2μG + λ tr(G) I)`
pub fn stress_stvk(f: &Mat3, lame: &LameParams) -> Mat3 {
    let g = green_strain(f);
    f * (2.0 * lame.mu * g + lame.lambda * g.trace() * Mat3::identity())
}

/// Principal Kirchhoff stress for principal Hencky strain `eps`:
/// `τ = 2μ ε + λ tr(ε) 1`.
pub fn kirchhoff_from_hencky(eps: &Vector3<f64>, lame: &LameParams) -> Vector3<f64> {
    let tr = eps.sum();
    2.0 * lame.mu * eps + Vector3::repeat(lame.lambda * tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    const LAME: LameParams = LameParams {
        mu: 4e5,
        lambda: 4e5,
    };

    fn fd_gradient(energy: impl Fn(&Mat3) -> f64, f: &Mat3, h: f64) -> Mat3 {
        let mut g = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut fp = *f;
                let mut fm = *f;
                fp[(i, j)] += h;
                fm[(i, j)] -= h;
                g[(i, j)] = (energy(&fp) - energy(&fm)) / (2.0 * h);
            }
        }
        g
    }

    #[test]
    fn rest_state_is_stress_free() {
        assert_eq!(
            stress_neo_hookean(&Mat3::identity(), &LAME).unwrap(),
            Mat3::zeros()
        );
        assert_eq!(stress_stvk(&Mat3::identity(), &LAME), Mat3::zeros());
    }

    #[test]
    fn rotations_are_stress_free() {
        let r = Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        assert!(stress_neo_hookean(&r, &LAME).unwrap().norm() < 1e-9);
        assert!(stress_stvk(&r, &LAME).norm() < 1e-9);
    }

    #[test]
    fn uniaxial_stretch_matches_energy_gradient() {
        let f = Mat3::from_diagonal(&Vector3::new(1.1, 1.0, 1.0));
        let p = stress_neo_hookean(&f, &LAME).unwrap();
        let fd = fd_gradient(|x| neo_hookean_energy(x, &LAME).unwrap(), &f, 1e-6);
        assert!((p - fd).norm() <= 1e-4 * p.norm());
    }

    #[test]
    fn stvk_uniform_scaling_is_isotropic() {
        let p = stress_stvk(&Mat3::from_diagonal_element(1.2), &LAME);
        assert!((p[(0, 0)] - p[(1, 1)]).abs() < 1e-9 && (p[(1, 1)] - p[(2, 2)]).abs() < 1e-9);
        assert!(p.abs().sum() - p.diagonal().abs().sum() < 1e-9);
    }

    #[test]
    fn inverted_rejected() {
        let f = Mat3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        assert!(matches!(
            stress_neo_hookean(&f, &LAME),
            Err(ConstitutiveError::InvertedElement(_))
        ));
    }
}
