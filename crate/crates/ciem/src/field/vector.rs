use num_complex::Complex64;
use rand::Rng;

use super::lattice::Lattice3;
use super::scalar::{GridField, ScalarField};
use super::tensor::TensorField;
use crate::error::Result;

/// Three scalar components on a shared lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub comps: [ScalarField; 3],
}

impl VectorField {
    pub fn zeros(lattice: Lattice3) -> Self {
        Self {
            comps: [
                ScalarField::zeros(lattice),
                ScalarField::zeros(lattice),
                ScalarField::zeros(lattice),
            ],
        }
    }

    pub fn new(comps: [ScalarField; 3]) -> Self {
        assert!(comps[0].lattice == comps[1].lattice && comps[1].lattice == comps[2].lattice);
        Self { comps }
    }

    pub fn lattice(&self) -> Lattice3 {
        self.comps[0].lattice
    }

    pub fn constant(lattice: Lattice3, v: [f64; 3]) -> Self {
        Self::new([
            ScalarField::constant(lattice, v[0]),
            ScalarField::constant(lattice, v[1]),
            ScalarField::constant(lattice, v[2]),
        ])
    }

    pub fn div(&self) -> ScalarField {
        let mut out = self.comps[0].derivative([1, 0, 0]);
        out.add_assign(&self.comps[1].derivative([0, 1, 0]));
        out.add_assign(&self.comps[2].derivative([0, 0, 1]));
        out
    }

    pub fn curl(&self) -> VectorField {
        let d = |i: usize, ax: usize| {
            let mut alpha = [0u32; 3];
            alpha[ax] = 1;
            self.comps[i].derivative(alpha)
        };
        VectorField::new([
            d(2, 1).sub(&d(1, 2)),
            d(0, 2).sub(&d(2, 0)),
            d(1, 0).sub(&d(0, 1)),
        ])
    }

    /// Jacobian matrix `(grad v)_{ij} = d_j v_i`.
    pub fn jacobian(&self) -> TensorField {
        let mut comps = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let mut alpha = [0u32; 3];
                alpha[j] = 1;
                comps.push(self.comps[i].derivative(alpha));
            }
        }
        TensorField::new(comps.try_into().unwrap())
    }

    pub fn add(&self, o: &VectorField) -> VectorField {
        VectorField::new([
            self.comps[0].add(&o.comps[0]),
            self.comps[1].add(&o.comps[1]),
            self.comps[2].add(&o.comps[2]),
        ])
    }

    pub fn sub(&self, o: &VectorField) -> VectorField {
        VectorField::new([
            self.comps[0].sub(&o.comps[0]),
            self.comps[1].sub(&o.comps[1]),
            self.comps[2].sub(&o.comps[2]),
        ])
    }

    pub fn scale(&self, s: f64) -> VectorField {
        VectorField::new([self.comps[0].scale(s), self.comps[1].scale(s), self.comps[2].scale(s)])
    }

    pub fn dot(&self, o: &VectorField) -> Result<ScalarField> {
        let mut out = self.comps[0].multiply(&o.comps[0])?;
        out.add_assign(&self.comps[1].multiply(&o.comps[1])?);
        out.add_assign(&self.comps[2].multiply(&o.comps[2])?);
        Ok(out)
    }

    pub fn cross(&self, o: &VectorField) -> Result<VectorField> {
        let c = |i: usize, j: usize| self.comps[i].multiply(&o.comps[j]);
        Ok(VectorField::new([
            c(1, 2)?.sub(&c(2, 1)?),
            c(2, 0)?.sub(&c(0, 2)?),
            c(0, 1)?.sub(&c(1, 0)?),
        ]))
    }

    /// Outer product `v (x) w`.
    pub fn outer(&self, o: &VectorField) -> Result<TensorField> {
        let mut comps = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                comps.push(self.comps[i].multiply(&o.comps[j])?);
            }
        }
        Ok(TensorField::new(comps.try_into().unwrap()))
    }

    pub fn mean(&self) -> [Complex64; 3] {
        [self.comps[0].mean(), self.comps[1].mean(), self.comps[2].mean()]
    }

    pub fn sup_norm(&self) -> f64 {
        let n = self.lattice().eval_grid();
        let g: [GridField; 3] =
            [self.comps[0].to_grid(n), self.comps[1].to_grid(n), self.comps[2].to_grid(n)];
        let mut m = 0.0f64;
        for idx in 0..g[0].values.len() {
            let s = g[0].values[idx].norm_sqr()
                + g[1].values[idx].norm_sqr()
                + g[2].values[idx].norm_sqr();
            m = m.max(s);
        }
        m.sqrt()
    }

    /// Mean of `|v|^2` over the torus.
    pub fn l2_mean_sq(&self) -> f64 {
        self.comps.iter().map(|c| c.l2_mean_sq()).sum()
    }

    pub fn reality_defect(&self) -> f64 {
        self.comps.iter().map(|c| c.reality_defect()).fold(0.0, f64::max)
    }

    pub fn random(lattice: Lattice3, k_max: i32, amp: f64, rng: &mut impl Rng) -> VectorField {
        VectorField::new([
            ScalarField::random(lattice, k_max, amp, rng),
            ScalarField::random(lattice, k_max, amp, rng),
            ScalarField::random(lattice, k_max, amp, rng),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat() -> Lattice3 {
        Lattice3::new(16, 5).unwrap()
    }

    #[test]
    fn curl_grad_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = ScalarField::random(lat(), 5, 1.0, &mut rng);
        let grad = VectorField::new([
            f.derivative([1, 0, 0]),
            f.derivative([0, 1, 0]),
            f.derivative([0, 0, 1]),
        ]);
        let c = grad.curl();
        assert!(c.sup_norm() < 1e-13 * grad.sup_norm().max(1.0));
    }

    #[test]
    fn div_curl_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = VectorField::random(lat(), 5, 1.0, &mut rng);
        let d = v.curl().div();
        assert!(d.sup_norm() < 1e-13 * v.sup_norm().max(1.0));
    }

    #[test]
    fn partial_of_single_mode() {
        let mut v = VectorField::zeros(lat());
        v.comps[0].set_coeff([2, 0, 1], Complex64::new(1.0, 0.0));
        let d = v.comps[0].derivative([1, 0, 0]);
        assert!((d.coeff([2, 0, 1]) - Complex64::new(0.0, 2.0)).norm() < 1e-14);
    }
}
