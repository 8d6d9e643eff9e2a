//! Leray projection and the two inverse-divergence operators, realized as
//! exact spectral solves.

use num_complex::Complex64;

use crate::error::{CiemError, Result};
use crate::field::{ScalarField, TensorField, VectorField};

/// Split `v = P v + Q v` with `Q v = grad(psi) + mean(v)`, `lap psi = div v`.
/// `P v` is divergence-free with zero mean, exactly in coefficients.
pub fn leray(v: &VectorField) -> (VectorField, VectorField) {
    let lat = v.lattice();
    let mut p = VectorField::zeros(lat);
    let mut q = VectorField::zeros(lat);
    for (idx, k) in lat.modes().enumerate() {
        let vk = [v.comps[0].coeffs[idx], v.comps[1].coeffs[idx], v.comps[2].coeffs[idx]];
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        if k2 == 0.0 {
            for i in 0..3 {
                q.comps[i].coeffs[idx] = vk[i];
            }
            continue;
        }
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let kv = kf[0] * vk[0] + kf[1] * vk[1] + kf[2] * vk[2];
        for i in 0..3 {
            let qk = kf[i] * kv / k2;
            q.comps[i].coeffs[idx] = qk;
            p.comps[i].coeffs[idx] = vk[i] - qk;
        }
    }
    (p, q)
}

/// Matrix inverse divergence: a symmetric trace-free `R v` with
/// `div(R v) = v - mean(v)` exactly in coefficients.
pub fn inverse_divergence_matrix(v: &VectorField) -> TensorField {
    let lat = v.lattice();
    // u solves lap u = v - mean(v), zero-mean.
    let u = VectorField::new([
        v.comps[0].inverse_laplacian(),
        v.comps[1].inverse_laplacian(),
        v.comps[2].inverse_laplacian(),
    ]);
    let (pu, _) = leray(&u);
    let grad_u = u.jacobian();
    let grad_pu = pu.jacobian();
    let div_u = u.div();

    let mut out = TensorField::zeros(lat);
    for i in 0..3 {
        for j in 0..3 {
            let mut c = grad_pu.comp(i, j).add(grad_pu.comp(j, i)).scale(0.25);
            c.add_assign(&grad_u.comp(i, j).add(grad_u.comp(j, i)).scale(0.75));
            if i == j {
                c.add_assign(&div_u.scale(-0.5));
            }
            *out.comp_mut(i, j) = c;
        }
    }
    out
}

/// Scalar inverse divergence: `u` with `lap u = grad f`, `div u = f - mean f`.
/// Rejects inputs whose mean exceeds `mean_tol` (a nonzero mean signals a
/// missing time-correction upstream); the mean mode is dropped either way.
pub fn inverse_divergence_vector(f: &ScalarField, mean_tol: f64) -> Result<VectorField> {
    let mean = f.mean().norm();
    let scale = f.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    if mean > mean_tol * scale.max(1.0) {
        return Err(CiemError::Scheme(format!(
            "inverse divergence (vector mode) needs zero-mean input, |mean| = {mean:.3e}"
        )));
    }
    let lat = f.lattice;
    let mut u = VectorField::zeros(lat);
    for (idx, k) in lat.modes().enumerate() {
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        if k2 == 0.0 {
            continue;
        }
        let c = f.coeffs[idx];
        for i in 0..3 {
            // u_k = -i k f_k / |k|^2
            u.comps[i].coeffs[idx] = Complex64::new(0.0, -k[i] as f64 / k2) * c;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Lattice3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat() -> Lattice3 {
        Lattice3::new(16, 5).unwrap()
    }

    #[test]
    fn gradient_is_pure_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = ScalarField::random(lat(), 4, 1.0, &mut rng);
        let grad = VectorField::new([
            f.derivative([1, 0, 0]),
            f.derivative([0, 1, 0]),
            f.derivative([0, 0, 1]),
        ]);
        let (p, q) = leray(&grad);
        assert!(p.sup_norm() < 1e-12 * grad.sup_norm().max(1.0));
        assert!(q.sub(&grad).sup_norm() < 1e-12 * grad.sup_norm().max(1.0));
    }

    #[test]
    fn curl_is_pure_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let w = VectorField::random(lat(), 4, 1.0, &mut rng);
        let c = w.curl();
        let (p, q) = leray(&c);
        assert!(q.sup_norm() < 1e-12 * c.sup_norm().max(1.0));
        assert!(p.sub(&c).sup_norm() < 1e-12 * c.sup_norm().max(1.0));
    }

    #[test]
    fn single_mode_parallel_wavevector() {
        // v = e^{i x1} e1 is a gradient: P v = 0, Q v = v.
        let mut v = VectorField::zeros(lat());
        v.comps[0].set_coeff([1, 0, 0], Complex64::new(1.0, 0.0));
        let (p, q) = leray(&v);
        assert!(p.sup_norm() < 1e-13);
        assert!(q.sub(&v).sup_norm() < 1e-13);
    }

    #[test]
    fn leray_is_projection_and_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let v = VectorField::random(lat(), 5, 1.0, &mut rng);
        let (p, q) = leray(&v);
        // P + Q = identity, exactly.
        let sum = p.add(&q);
        for i in 0..3 {
            for (a, b) in sum.comps[i].coeffs.iter().zip(&v.comps[i].coeffs) {
                assert!((a - b).norm() < 1e-14);
            }
        }
        // div P v = 0 in coefficients, P o P = P.
        for c in &p.div().coeffs {
            assert!(c.norm() < 1e-12);
        }
        let (pp, _) = leray(&p);
        assert!(pp.sub(&p).sup_norm() < 1e-13);
    }

    #[test]
    fn invdiv_constant_is_zero() {
        let v = VectorField::constant(lat(), [1.0, -2.0, 0.5]);
        let r = inverse_divergence_matrix(&v);
        assert!(r.sup_norm() < 1e-13);
    }

    #[test]
    fn invdiv_single_mode_closed_form() {
        // v = e^{i x1} e1: R v = -(3i/2) e^{i x1} e1 (x) e1 + (i/2) e^{i x1} Id.
        let mut v = VectorField::zeros(lat());
        v.comps[0].set_coeff([1, 0, 0], Complex64::new(1.0, 0.0));
        let r = inverse_divergence_matrix(&v);
        let k = [1, 0, 0];
        for i in 0..3 {
            for j in 0..3 {
                let mut expect = Complex64::default();
                if i == 0 && j == 0 {
                    expect += Complex64::new(0.0, -1.5);
                }
                if i == j {
                    expect += Complex64::new(0.0, 0.5);
                }
                let got = r.comp(i, j).coeff(k);
                assert!((got - expect).norm() < 1e-13, "R[{i}{j}] = {got}");
            }
        }
        // div recovers v, trace vanishes.
        assert!(r.div().sub(&v).sup_norm() < 1e-12);
        assert!(r.trace_norm() < 1e-13);
    }

    #[test]
    fn invdiv_random_right_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let v = VectorField::random(lat(), 5, 1.0, &mut rng);
        let r = inverse_divergence_matrix(&v);
        let mut v0 = v.clone();
        for c in v0.comps.iter_mut() {
            c.set_coeff([0, 0, 0], Complex64::default());
        }
        let defect = r.div().sub(&v0).sup_norm();
        assert!(defect < 1e-10, "div R v defect {defect}");
        assert!(r.asymmetry() < 1e-10);
        assert!(r.trace_norm() < 1e-10);
    }

    #[test]
    fn invdiv_vector_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut f = ScalarField::random(lat(), 4, 1.0, &mut rng);
        f.set_coeff([0, 0, 0], Complex64::default());
        let u = inverse_divergence_vector(&f, 1e-10).unwrap();
        assert!(u.div().sub(&f).sup_norm() < 1e-11);
        // Nonzero mean rejected.
        let bad = ScalarField::constant(lat(), 0.5).add(&f);
        assert!(inverse_divergence_vector(&bad, 1e-10).is_err());
    }
}
