use super::lattice::Lattice3;
use super::scalar::ScalarField;
use super::vector::VectorField;
use crate::error::Result;

/// Nine scalar components `T_{ij}` (row-major) on a shared lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub comps: [ScalarField; 9],
}

impl TensorField {
    pub fn zeros(lattice: Lattice3) -> Self {
        Self { comps: std::array::from_fn(|_| ScalarField::zeros(lattice)) }
    }

    pub fn new(comps: [ScalarField; 9]) -> Self {
        let lat = comps[0].lattice;
        assert!(comps.iter().all(|c| c.lattice == lat));
        Self { comps }
    }

    pub fn lattice(&self) -> Lattice3 {
        self.comps[0].lattice
    }

    #[inline]
    pub fn comp(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[3 * i + j]
    }

    #[inline]
    pub fn comp_mut(&mut self, i: usize, j: usize) -> &mut ScalarField {
        &mut self.comps[3 * i + j]
    }

    pub fn identity_scaled(lattice: Lattice3, s: f64) -> Self {
        let mut t = Self::zeros(lattice);
        for i in 0..3 {
            *t.comp_mut(i, i) = ScalarField::constant(lattice, s);
        }
        t
    }

    /// Row divergence: `(div T)_i = d_j T_{ij}`.
    pub fn div(&self) -> VectorField {
        let mut out = VectorField::zeros(self.lattice());
        for i in 0..3 {
            for j in 0..3 {
                let mut alpha = [0u32; 3];
                alpha[j] = 1;
                out.comps[i].add_assign(&self.comp(i, j).derivative(alpha));
            }
        }
        out
    }

    pub fn trace(&self) -> ScalarField {
        let mut t = self.comp(0, 0).clone();
        t.add_assign(self.comp(1, 1));
        t.add_assign(self.comp(2, 2));
        t
    }

    pub fn transpose(&self) -> TensorField {
        let mut comps = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                comps.push(self.comp(j, i).clone());
            }
        }
        TensorField::new(comps.try_into().unwrap())
    }

    pub fn add(&self, o: &TensorField) -> TensorField {
        TensorField::new(std::array::from_fn(|i| self.comps[i].add(&o.comps[i])))
    }

    pub fn sub(&self, o: &TensorField) -> TensorField {
        TensorField::new(std::array::from_fn(|i| self.comps[i].sub(&o.comps[i])))
    }

    pub fn scale(&self, s: f64) -> TensorField {
        TensorField::new(std::array::from_fn(|i| self.comps[i].scale(s)))
    }

    /// Matrix-vector action `(T v)_i = T_{ij} v_j` with dealiased products.
    pub fn apply(&self, v: &VectorField) -> Result<VectorField> {
        let mut out = VectorField::zeros(self.lattice());
        for i in 0..3 {
            for j in 0..3 {
                out.comps[i].add_assign(&self.comp(i, j).multiply(&v.comps[j])?);
            }
        }
        Ok(out)
    }

    /// Frobenius contraction `T : S = T_{ij} S_{ij}`.
    pub fn contract(&self, o: &TensorField) -> Result<ScalarField> {
        let mut out = ScalarField::zeros(self.lattice());
        for i in 0..9 {
            out.add_assign(&self.comps[i].multiply(&o.comps[i])?);
        }
        Ok(out)
    }

    /// Largest pointwise asymmetry `|T_{ij} - T_{ji}|` on the eval grid.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                m = m.max(self.comp(i, j).sub(self.comp(j, i)).sup_norm());
            }
        }
        m
    }

    /// Largest pointwise trace magnitude on the eval grid.
    pub fn trace_norm(&self) -> f64 {
        self.trace().sup_norm()
    }

    pub fn sup_norm(&self) -> f64 {
        let n = self.lattice().eval_grid();
        let grids: Vec<_> = self.comps.iter().map(|c| c.to_grid(n)).collect();
        let mut m = 0.0f64;
        for idx in 0..grids[0].values.len() {
            let s: f64 = grids.iter().map(|g| g.values[idx].norm_sqr()).sum();
            m = m.max(s);
        }
        m.sqrt()
    }

    pub fn reality_defect(&self) -> f64 {
        self.comps.iter().map(|c| c.reality_defect()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn div_of_identity_vanishes() {
        let lat = Lattice3::new(16, 5).unwrap();
        let t = TensorField::identity_scaled(lat, 2.5);
        assert!(t.div().sup_norm() < 1e-14);
        assert!((t.trace_norm() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn outer_product_div_identity() {
        // div(v (x) w) = (div w) v + (w . grad) v for band-limited v, w.
        let lat = Lattice3::new(16, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = VectorField::random(lat, 2, 1.0, &mut rng);
        let w = VectorField::random(lat, 2, 1.0, &mut rng);
        let lhs = v.outer(&w).unwrap().div();
        let divw = w.div();
        let mut rhs = VectorField::zeros(lat);
        for i in 0..3 {
            rhs.comps[i].add_assign(&v.comps[i].multiply(&divw).unwrap());
            for j in 0..3 {
                let mut alpha = [0u32; 3];
                alpha[j] = 1;
                rhs.comps[i]
                    .add_assign(&w.comps[j].multiply(&v.comps[i].derivative(alpha)).unwrap());
            }
        }
        let err = lhs.sub(&rhs).sup_norm();
        assert!(err < 1e-10 * lhs.sup_norm().max(1.0), "defect {err}");
    }
}
