//! Shared discrete calculus for the correction step: coefficient-wise time
//! stencils and a pointwise-product context on the common dealiased grid.
//!
//! Every nonlinear term of the step is evaluated on one shared grid fine
//! enough for cubic products, so algebraic rearrangements of products hold
//! mode-for-mode and the closure residuals are limited by time stencils,
//! not by aliasing.

use num_complex::Complex64;

use crate::field::{ddt_stencil, GridField, Lattice3, ScalarField, TensorField, TimeSampled, VectorField};

/// 4th-order time derivative of a sampled field family, coefficient-wise.
pub fn ddt_scalar_series(ts: &TimeSampled<ScalarField>) -> TimeSampled<ScalarField> {
    let len = ts.samples.len();
    let dt = ts.grid.dt;
    let samples = (0..len)
        .map(|i| {
            let (off, w) = ddt_stencil(len, i);
            let mut acc = ScalarField::zeros(ts.samples[0].lattice);
            for (j, wj) in w.iter().enumerate() {
                let idx = (i as isize + off + j as isize) as usize;
                acc.axpy(wj / dt, &ts.samples[idx]);
            }
            acc
        })
        .collect();
    TimeSampled::new(ts.grid, samples)
}

pub fn ddt_vector_series(ts: &TimeSampled<VectorField>) -> TimeSampled<VectorField> {
    let len = ts.samples.len();
    let dt = ts.grid.dt;
    let samples = (0..len)
        .map(|i| {
            let (off, w) = ddt_stencil(len, i);
            let mut acc = VectorField::zeros(ts.samples[0].lattice());
            for (j, wj) in w.iter().enumerate() {
                let idx = (i as isize + off + j as isize) as usize;
                for c in 0..3 {
                    acc.comps[c].axpy(wj / dt, &ts.samples[idx].comps[c]);
                }
            }
            acc
        })
        .collect();
    TimeSampled::new(ts.grid, samples)
}

/// Pointwise-product context: all factors are evaluated on one shared
/// dealiased grid and projected back after the pointwise arithmetic.
#[derive(Clone, Copy)]
pub struct GridCtx {
    pub lat: Lattice3,
    pub n: usize,
}

impl GridCtx {
    pub fn new(lat: Lattice3) -> Self {
        Self { lat, n: lat.product_grid(3) }
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn sg(&self, f: &ScalarField) -> Vec<Complex64> {
        f.to_grid(self.n).values
    }

    pub fn vg(&self, v: &VectorField) -> [Vec<Complex64>; 3] {
        std::array::from_fn(|i| v.comps[i].to_grid(self.n).values)
    }

    pub fn tg(&self, t: &TensorField) -> [Vec<Complex64>; 9] {
        std::array::from_fn(|i| t.comps[i].to_grid(self.n).values)
    }

    pub fn ps(&self, values: Vec<Complex64>) -> ScalarField {
        ScalarField::from_grid(self.lat, &GridField { n: self.n, values })
    }

    pub fn pv(&self, values: [Vec<Complex64>; 3]) -> VectorField {
        let [a, b, c] = values;
        VectorField::new([self.ps(a), self.ps(b), self.ps(c)])
    }

    pub fn pt(&self, values: [Vec<Complex64>; 9]) -> TensorField {
        let comps: Vec<ScalarField> = values.into_iter().map(|v| self.ps(v)).collect();
        TensorField::new(comps.try_into().unwrap())
    }

    /// Real reciprocal values of a strictly positive field.
    pub fn recip(&self, f: &ScalarField) -> Vec<f64> {
        f.to_grid(self.n).values.iter().map(|v| 1.0 / v.re).collect()
    }

    /// `a (x) b / n` as a tensor field.
    pub fn outer_over(&self, a: &VectorField, b: &VectorField, n_inv: &[f64]) -> TensorField {
        let ag = self.vg(a);
        let bg = self.vg(b);
        let mut out: [Vec<Complex64>; 9] =
            std::array::from_fn(|_| vec![Complex64::default(); self.len()]);
        for i in 0..3 {
            for j in 0..3 {
                for p in 0..self.len() {
                    out[3 * i + j][p] = ag[i][p] * bg[j][p] * n_inv[p];
                }
            }
        }
        self.pt(out)
    }

    /// `a . b * w` (w a pointwise real weight) as a scalar field.
    pub fn dot_weighted(&self, a: &VectorField, b: &VectorField, w: &[f64]) -> ScalarField {
        let ag = self.vg(a);
        let bg = self.vg(b);
        let mut out = vec![Complex64::default(); self.len()];
        for p in 0..self.len() {
            out[p] = (ag[0][p] * bg[0][p] + ag[1][p] * bg[1][p] + ag[2][p] * bg[2][p]) * w[p];
        }
        self.ps(out)
    }

    /// `a x b` as a vector field.
    pub fn cross(&self, a: &VectorField, b: &VectorField) -> VectorField {
        let ag = self.vg(a);
        let bg = self.vg(b);
        let mut out: [Vec<Complex64>; 3] =
            std::array::from_fn(|_| vec![Complex64::default(); self.len()]);
        for p in 0..self.len() {
            out[0][p] = ag[1][p] * bg[2][p] - ag[2][p] * bg[1][p];
            out[1][p] = ag[2][p] * bg[0][p] - ag[0][p] * bg[2][p];
            out[2][p] = ag[0][p] * bg[1][p] - ag[1][p] * bg[0][p];
        }
        self.pv(out)
    }

    /// Vector scaled by a pointwise real weight.
    pub fn scale_vec(&self, a: &VectorField, w: &[f64]) -> VectorField {
        let ag = self.vg(a);
        let mut out: [Vec<Complex64>; 3] =
            std::array::from_fn(|_| vec![Complex64::default(); self.len()]);
        for c in 0..3 {
            for p in 0..self.len() {
                out[c][p] = ag[c][p] * w[p];
            }
        }
        self.pv(out)
    }

    /// Scalar times pointwise real weight.
    pub fn scale_scalar(&self, a: &ScalarField, w: &[f64]) -> ScalarField {
        let ag = self.sg(a);
        let mut out = vec![Complex64::default(); self.len()];
        for p in 0..self.len() {
            out[p] = ag[p] * w[p];
        }
        self.ps(out)
    }

    /// Tensor scaled by a pointwise real weight.
    pub fn scale_tensor(&self, a: &TensorField, w: &[f64]) -> TensorField {
        let ag = self.tg(a);
        let mut out: [Vec<Complex64>; 9] =
            std::array::from_fn(|_| vec![Complex64::default(); self.len()]);
        for c in 0..9 {
            for p in 0..self.len() {
                out[c][p] = ag[c][p] * w[p];
            }
        }
        self.pt(out)
    }

    /// Matrix action `(T v) * w`.
    pub fn apply_weighted(&self, t: &TensorField, v: &VectorField, w: &[f64]) -> VectorField {
        let tg = self.tg(t);
        let vg = self.vg(v);
        let mut out: [Vec<Complex64>; 3] =
            std::array::from_fn(|_| vec![Complex64::default(); self.len()]);
        for i in 0..3 {
            for p in 0..self.len() {
                out[i][p] = (tg[3 * i][p] * vg[0][p]
                    + tg[3 * i + 1][p] * vg[1][p]
                    + tg[3 * i + 2][p] * vg[2][p])
                    * w[p];
            }
        }
        self.pv(out)
    }

    /// Frobenius contraction `T : S` with a pointwise weight.
    pub fn contract_weighted(&self, t: &TensorField, s: &TensorField, w: &[f64]) -> ScalarField {
        let tg = self.tg(t);
        let sg = self.tg(s);
        let mut out = vec![Complex64::default(); self.len()];
        for p in 0..self.len() {
            let mut acc = Complex64::default();
            for c in 0..9 {
                acc += tg[c][p] * sg[c][p];
            }
            out[p] = acc * w[p];
        }
        self.ps(out)
    }

    /// Pointwise map of a real field.
    pub fn map_real(&self, f: &ScalarField, func: impl Fn(f64) -> f64) -> ScalarField {
        let g = self.sg(f);
        let out: Vec<Complex64> =
            g.iter().map(|v| Complex64::new(func(v.re), 0.0)).collect();
        self.ps(out)
    }

    /// Solve `P_K(n x) = P_K(p)` for `x` by pointwise division with a few
    /// refinement sweeps, so that re-multiplying the stored quotient by `n`
    /// reproduces the intended product exactly in the retained band.
    pub fn divide_refined_vec(&self, p: &VectorField, n_inv: &[f64], n_vals: &[f64]) -> VectorField {
        let mut x = self.scale_vec(p, n_inv);
        for _ in 0..4 {
            let r = p.sub(&self.scale_vec(&x, n_vals));
            x = x.add(&self.scale_vec(&r, n_inv));
        }
        x
    }

    pub fn divide_refined_tensor(
        &self,
        p: &TensorField,
        n_inv: &[f64],
        n_vals: &[f64],
    ) -> TensorField {
        let mut x = self.scale_tensor(p, n_inv);
        for _ in 0..4 {
            let r = p.sub(&self.scale_tensor(&x, n_vals));
            x = x.add(&self.scale_tensor(&r, n_inv));
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TimeGrid;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coefficientwise_time_derivative() {
        let lat = Lattice3::new(16, 4).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let mut base = ScalarField::zeros(lat);
        base.set_coeff([1, 0, 0], Complex64::new(1.0, 0.0));
        base.set_coeff([-1, 0, 0], Complex64::new(1.0, 0.0));
        let ts = TimeSampled::from_fn(grid, |t| base.scale((2.0 * t).sin()));
        let d = ddt_scalar_series(&ts);
        for i in [0usize, 7, 20] {
            let t = grid.time(i);
            let want = 2.0 * (2.0 * t).cos();
            let got = d.samples[i].coeff([1, 0, 0]).re;
            assert!((got - want).abs() < 1e-4, "ddt at {i}: {got} vs {want}");
        }
    }

    #[test]
    fn grid_products_match_field_products() {
        let lat = Lattice3::new(16, 4).unwrap();
        let ctx = GridCtx::new(lat);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = VectorField::random(lat, 2, 1.0, &mut rng);
        let b = VectorField::random(lat, 2, 1.0, &mut rng);
        let ones = vec![1.0; ctx.len()];
        let t1 = ctx.outer_over(&a, &b, &ones);
        let t2 = a.outer(&b).unwrap();
        assert!(t1.sub(&t2).sup_norm() < 1e-11 * t2.sup_norm().max(1.0));
        let c1 = ctx.cross(&a, &b);
        let c2 = a.cross(&b).unwrap();
        assert!(c1.sub(&c2).sup_norm() < 1e-11 * c2.sup_norm().max(1.0));
    }
}
