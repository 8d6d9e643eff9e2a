//! Littlewood-Paley projections in space: smooth low-pass / high-pass at a
//! dyadic level, with the radial profile of `bump::radial_bump`.

use super::bump::radial_bump;
use crate::field::{ScalarField, TensorField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpSide {
    /// Keep `phi(|k| / 2^j)`.
    Le,
    /// Keep `1 - phi(|k| / 2^j)`.
    Gt,
}

/// Multiply each coefficient by `phi(|k| / 2^j)` (or its complement).
pub fn lp_project(f: &ScalarField, j: i32, side: LpSide) -> ScalarField {
    let scale = (2.0f64).powi(j);
    let mut out = f.clone();
    for (idx, k) in f.lattice.modes().enumerate() {
        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let m = radial_bump(kn / scale);
        let w = match side {
            LpSide::Le => m,
            LpSide::Gt => 1.0 - m,
        };
        out.coeffs[idx] = f.coeffs[idx] * w;
    }
    out
}

/// Dyadic level used by `P_{<= a}`: the largest `J` with `2^J <= a`.
pub fn dyadic_level(a: f64) -> i32 {
    assert!(a > 0.0);
    a.log2().floor() as i32
}

/// `P_{<= a} f = P_{<= 2^J} f` with `J = floor(log2 a)`.
pub fn lp_low_pass(f: &ScalarField, a: f64) -> ScalarField {
    lp_project(f, dyadic_level(a), LpSide::Le)
}

pub fn lp_low_pass_vec(v: &VectorField, a: f64) -> VectorField {
    VectorField::new(std::array::from_fn(|i| lp_low_pass(&v.comps[i], a)))
}

pub fn lp_low_pass_tensor(t: &TensorField, a: f64) -> TensorField {
    TensorField::new(std::array::from_fn(|i| lp_low_pass(&t.comps[i], a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Lattice3;
    use num_complex::Complex64;

    fn lat() -> Lattice3 {
        Lattice3::new(24, 9).unwrap()
    }

    #[test]
    fn low_modes_unchanged() {
        let mut f = ScalarField::zeros(lat());
        f.set_coeff([1, 1, 0], Complex64::new(1.0, 0.0)); // |k| = sqrt(2) <= 2^1
        let g = lp_project(&f, 1, LpSide::Le);
        assert!((g.coeff([1, 1, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn high_modes_killed() {
        let mut f = ScalarField::zeros(lat());
        f.set_coeff([4, 0, 0], Complex64::new(1.0, 0.0)); // |k| = 4 >= 2^{j+1} for j = 1
        let g = lp_project(&f, 1, LpSide::Le);
        assert!(g.coeff([4, 0, 0]).norm() < 1e-15);
        let h = lp_project(&f, 1, LpSide::Gt);
        assert!((h.coeff([4, 0, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn constant_under_projections() {
        let f = ScalarField::constant(lat(), 2.0);
        let le = lp_project(&f, 0, LpSide::Le);
        let gt = lp_project(&f, 0, LpSide::Gt);
        assert!((le.mean() - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!(gt.mean().norm() < 1e-15);
    }

    #[test]
    fn level_from_threshold() {
        assert_eq!(dyadic_level(1.0), 0);
        assert_eq!(dyadic_level(2.9), 1);
        assert_eq!(dyadic_level(4.0), 2);
        assert_eq!(dyadic_level(0.7), -1);
    }
}
