use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use simready_core::constitutive::*;

/// Principal Hencky strain from the eigenvalues of `FᵀF`.
fn hencky(f: &Mat3) -> Vector3<f64> {
    (f.transpose() * f)
        .symmetric_eigen()
        .eigenvalues
        .map(|l| 0.5 * l.ln())
}

fn tau(f: &Mat3, lame: &LameParams) -> Vector3<f64> {
    let e = hencky(f);
    e.map(|x| 2.0 * lame.mu * x + lame.lambda * e.sum())
}

fn dev(v: &Vector3<f64>) -> Vector3<f64> {
    v - Vector3::repeat(v.sum() / 3.0)
}

fn central_difference(f: &Mat3, energy: impl Fn(&Mat3) -> f64) -> Mat3 {
    let h = 1e-6;
    Mat3::from_fn(|i, j| {
        let (mut p, mut m) = (*f, *f);
        p[(i, j)] += h;
        m[(i, j)] -= h;
        (energy(&p) - energy(&m)) / (2.0 * h)
    })
}

prop_compose! {
    /// Rotation · diag(stretch) · rotation with det in [0.5, 2].
    fn deformation()(
        r1 in prop::array::uniform3(-3.0f64..3.0),
        r2 in prop::array::uniform3(-3.0f64..3.0),
        s in prop::array::uniform3(0.6f64..1.6),
        det in 0.5f64..2.0,
    ) -> Mat3 {
        let scale = (det / (s[0] * s[1] * s[2])).cbrt();
        let d = Matrix3::from_diagonal(&Vector3::from(s).map(|x| x * scale));
        let a = Rotation3::new(Vector3::from(r1));
        let b = Rotation3::new(Vector3::from(r2));
        a.matrix() * d * b.matrix()
    }
}

prop_compose! {
    fn moduli()(e in 1e4f64..1e9, nu in 0.0f64..0.45) -> LameParams {
        lame_from_moduli(e, nu).unwrap()
    }
}

proptest! {
    #[test]
    fn neo_hookean_stress_is_energy_gradient(f in deformation(), lame in moduli()) {
        let p = stress_neo_hookean(&f, &lame).unwrap();
        let fd = central_difference(&f, |g| neo_hookean_energy(g, &lame).unwrap());
        prop_assert!((p - fd).norm() <= 1e-4 * p.norm().max(lame.mu * 1e-3));
    }

    #[test]
    fn stvk_stress_is_energy_gradient(f in deformation(), lame in moduli()) {
        let p = stress_stvk(&f, &lame);
        let fd = central_difference(&f, |g| stvk_energy(g, &lame));
        prop_assert!((p - fd).norm() <= 1e-4 * p.norm().max(lame.mu * 1e-3));
    }

    #[test]
    fn von_mises_lands_inside_yield_surface(
        f in deformation(),
        lame in moduli(),
        yield_ratio in 1e-4f64..1e-1,
        eps_p in 0.0f64..0.3,
        soften in any::<bool>(),
    ) {
        let sigma0 = yield_ratio * lame.mu;
        let softening = soften.then(|| Softening::new(sigma0));
        let state = PlasticState {
            eps_p,
            sigma_y_current: softening.map_or(sigma0, |s| s.yield_at(eps_p)),
        };
        let (fe, next) = return_map_von_mises(&f, &lame, &state, softening.as_ref()).unwrap();
        let bound = (2.0f64 / 3.0).sqrt() * next.sigma_y_current;
        prop_assert!(dev(&tau(&fe, &lame)).norm() <= bound * (1.0 + 1e-6));
        prop_assert!(next.eps_p >= state.eps_p);
        prop_assert!(next.sigma_y_current <= state.sigma_y_current);
        if let Some(s) = softening {
            prop_assert!((next.sigma_y_current - s.yield_at(next.eps_p)).abs() <= 1e-9 * sigma0);
        }
        // plastic flow is isochoric
        prop_assert!((fe.determinant() - f.determinant()).abs() <= 1e-10 * f.determinant());
        let (again, _) = return_map_von_mises(&fe, &lame, &next, softening.as_ref()).unwrap();
        prop_assert!((again - fe).norm() <= 1e-10 * fe.norm());
    }

    #[test]
    fn drucker_prager_lands_inside_cone(f in deformation(), lame in moduli(), phi in 0.0f64..1.5) {
        let state = PlasticState::new(f64::MAX);
        let (fe, next) = return_map_drucker_prager(&f, &lame, phi, &state).unwrap();
        let t = tau(&fe, &lame);
        let alpha = (2.0f64 / 3.0).sqrt() * 2.0 * phi.sin() / (3.0 - phi.sin());
        // relative to the trial stress being projected
        let scale = tau(&f, &lame).norm().max(lame.mu * 1e-9);
        prop_assert!(dev(&t).norm() + alpha * t.sum() <= 1e-6 * scale);
        prop_assert!(next.eps_p >= 0.0);
        let (again, _) = return_map_drucker_prager(&fe, &lame, phi, &next).unwrap();
        prop_assert!((again - fe).norm() <= 1e-10 * fe.norm());
    }

    #[test]
    fn identity_mapping_keeps_bits(vals in prop::array::uniform9(-5.0f64..5.0)) {
        let f = Matrix3::from_row_slice(&vals);
        let state = PlasticState { eps_p: 0.25, sigma_y_current: 3.0 };
        let (out, s) = return_map_identity(&f, &state);
        prop_assert!(out.iter().zip(f.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(s, state);
    }

    #[test]
    fn pure_dilation_never_yields_von_mises(s in 0.5f64..2.0, lame in moduli(), sy in 1.0f64..1e4) {
        let f = Mat3::identity() * s;
        let state = PlasticState::new(sy);
        let (fe, next) = return_map_von_mises(&f, &lame, &state, None).unwrap();
        prop_assert_eq!(fe, f);
        prop_assert_eq!(next, state);
    }
}

#[test]
fn drucker_prager_tension_goes_to_apex() {
    let lame = lame_from_moduli(1e6, 0.3).unwrap();
    let r = Rotation3::new(Vector3::new(0.3, -0.2, 1.0));
    let f = r.matrix() * Mat3::from_diagonal(&Vector3::new(1.2, 1.05, 0.98));
    let (fe, _) = return_map_drucker_prager(&f, &lame, 0.5, &PlasticState::new(f64::MAX)).unwrap();
    assert!((fe.transpose() * fe - Mat3::identity()).norm() < 1e-12);
    assert!((fe.determinant() - 1.0).abs() < 1e-12);
}
