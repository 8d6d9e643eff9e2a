use num_complex::Complex64;
use rand::Rng;

use super::fft::fft3;
use super::lattice::Lattice3;
use crate::error::{CiemError, Result};

/// Band-limited scalar field on the torus, stored as Fourier coefficients
/// `c_k` for `|k_i| <= K` in lexicographic `(k1, k2, k3)` order, so that
/// `f(x) = sum_k c_k e^{i k.x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub lattice: Lattice3,
    pub coeffs: Vec<Complex64>,
}

/// Pointwise values of a field on an `n^3` collocation grid (axis-3 contiguous).
#[derive(Debug, Clone)]
pub struct GridField {
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![Complex64::default(); n * n * n] }
    }

    /// Fill from a pointwise function of the node coordinate.
    pub fn from_fn(n: usize, mut f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(n * n * n);
        for j1 in 0..n {
            for j2 in 0..n {
                for j3 in 0..n {
                    values.push(f(Lattice3::node_on(n, [j1, j2, j3])));
                }
            }
        }
        Self { n, values }
    }

    pub fn node(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        let j3 = flat % n;
        let j2 = (flat / n) % n;
        let j1 = flat / (n * n);
        Lattice3::node_on(n, [j1, j2, j3])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Grid mean (equals the zero coefficient for alias-free data).
    pub fn mean(&self) -> Complex64 {
        let sum: Complex64 = self.values.iter().sum();
        sum / self.values.len() as f64
    }
}

impl ScalarField {
    pub fn zeros(lattice: Lattice3) -> Self {
        Self { lattice, coeffs: vec![Complex64::default(); lattice.mode_count()] }
    }

    pub fn constant(lattice: Lattice3, c: f64) -> Self {
        let mut f = Self::zeros(lattice);
        f.coeffs[lattice.mode_index([0, 0, 0])] = Complex64::new(c, 0.0);
        f
    }

    #[inline]
    pub fn coeff(&self, k: [i32; 3]) -> Complex64 {
        self.coeffs[self.lattice.mode_index(k)]
    }

    #[inline]
    pub fn set_coeff(&mut self, k: [i32; 3], v: Complex64) {
        let idx = self.lattice.mode_index(k);
        self.coeffs[idx] = v;
    }

    /// Mean over the torus (zero mode).
    pub fn mean(&self) -> Complex64 {
        self.coeff([0, 0, 0])
    }

    pub fn check_lattice(&self, other: &ScalarField) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(CiemError::Lattice(format!(
                "lattice mismatch: {:?} vs {:?}",
                self.lattice, other.lattice
            )));
        }
        Ok(())
    }

    /// Evaluate on an `n^3` grid by zero-padded inverse FFT.
    pub fn to_grid(&self, n: usize) -> GridField {
        assert!(n >= self.lattice.modes_per_axis(), "grid too small for cutoff");
        let mut data = vec![Complex64::default(); n * n * n];
        let wrap = |k: i32| -> usize { k.rem_euclid(n as i32) as usize };
        for (idx, k) in self.lattice.modes().enumerate() {
            let c = self.coeffs[idx];
            if c != Complex64::default() {
                data[(wrap(k[0]) * n + wrap(k[1])) * n + wrap(k[2])] = c;
            }
        }
        fft3(&mut data, n, true);
        GridField { n, values: data }
    }

    /// Project grid values onto the retained band (forward FFT + truncation).
    pub fn from_grid(lattice: Lattice3, grid: &GridField) -> Self {
        let n = grid.n;
        assert!(n >= lattice.modes_per_axis(), "grid too small for cutoff");
        let mut data = grid.values.clone();
        fft3(&mut data, n, false);
        let vol = (n * n * n) as f64;
        let wrap = |k: i32| -> usize { k.rem_euclid(n as i32) as usize };
        let mut coeffs = Vec::with_capacity(lattice.mode_count());
        for k in lattice.modes() {
            coeffs.push(data[(wrap(k[0]) * n + wrap(k[1])) * n + wrap(k[2])] / vol);
        }
        Self { lattice, coeffs }
    }

    /// Sample a pointwise function on the evaluation grid and project.
    pub fn from_fn(lattice: Lattice3, f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        let grid = GridField::from_fn(lattice.eval_grid(), f);
        Self::from_grid(lattice, &grid)
    }

    /// Partial derivative `d^{a1}_1 d^{a2}_2 d^{a3}_3` as a spectral multiplier.
    pub fn derivative(&self, alpha: [u32; 3]) -> ScalarField {
        let mut out = self.clone();
        for (idx, k) in self.lattice.modes().enumerate() {
            let mut m = Complex64::new(1.0, 0.0);
            for ax in 0..3 {
                let ik = Complex64::new(0.0, k[ax] as f64);
                for _ in 0..alpha[ax] {
                    m *= ik;
                }
            }
            out.coeffs[idx] = self.coeffs[idx] * m;
        }
        out
    }

    pub fn laplacian(&self) -> ScalarField {
        let mut out = self.clone();
        for (idx, k) in self.lattice.modes().enumerate() {
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            out.coeffs[idx] = -k2 * self.coeffs[idx];
        }
        out
    }

    /// Solve `lap u = f - mean(f)` with zero-mean `u`.
    pub fn inverse_laplacian(&self) -> ScalarField {
        let mut out = self.clone();
        for (idx, k) in self.lattice.modes().enumerate() {
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            out.coeffs[idx] = if k2 == 0.0 { Complex64::default() } else { -self.coeffs[idx] / k2 };
        }
        out
    }

    /// Dealiased pointwise product: both fields are evaluated on a grid fine
    /// enough that modes `|k_i| <= K` of the product are exact, then projected.
    pub fn multiply(&self, other: &ScalarField) -> Result<ScalarField> {
        self.check_lattice(other)?;
        let n = self.lattice.product_grid(2);
        let a = self.to_grid(n);
        let b = other.to_grid(n);
        let mut prod = a;
        for (v, w) in prod.values.iter_mut().zip(&b.values) {
            *v *= w;
        }
        Ok(Self::from_grid(self.lattice, &prod))
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn add_assign(&mut self, other: &ScalarField) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }

    pub fn axpy(&mut self, s: f64, other: &ScalarField) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// Largest violation of the conjugate symmetry `c_{-k} = conj(c_k)`,
    /// relative to the largest coefficient.
    pub fn reality_defect(&self) -> f64 {
        let mut maxc = 0.0f64;
        let mut defect = 0.0f64;
        for (idx, k) in self.lattice.modes().enumerate() {
            let c = self.coeffs[idx];
            maxc = maxc.max(c.norm());
            let cm = self.coeff([-k[0], -k[1], -k[2]]);
            defect = defect.max((cm - c.conj()).norm());
        }
        if maxc == 0.0 {
            0.0
        } else {
            defect / maxc
        }
    }

    /// Symmetrize coefficients so the field is exactly real-valued.
    pub fn enforce_reality(&mut self) {
        for k in self.lattice.modes() {
            if k > [0, 0, 0] {
                continue;
            }
            let i = self.lattice.mode_index(k);
            let j = self.lattice.mode_index([-k[0], -k[1], -k[2]]);
            if i == j {
                self.coeffs[i] = Complex64::new(self.coeffs[i].re, 0.0);
            } else {
                let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
                self.coeffs[i] = avg;
                self.coeffs[j] = avg.conj();
            }
        }
    }

    /// Sup norm estimated on the evaluation grid.
    pub fn sup_norm(&self) -> f64 {
        self.to_grid(self.lattice.eval_grid()).max_abs()
    }

    /// Mean of `|f|^2` over the torus (Parseval: sum of `|c_k|^2`).
    pub fn l2_mean_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Random real band-limited field with coefficients supported in
    /// `|k_i| <= k_max`, for tests and randomized verification.
    pub fn random(lattice: Lattice3, k_max: i32, amp: f64, rng: &mut impl Rng) -> ScalarField {
        let mut f = Self::zeros(lattice);
        let km = k_max.min(lattice.k_cut);
        for k1 in -km..=km {
            for k2 in -km..=km {
                for k3 in -km..=km {
                    let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    f.set_coeff([k1, k2, k3], amp * c);
                }
            }
        }
        f.enforce_reality();
        f
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
    fn single_mode_grid_values() {
        // e^{i e1 . x} -> cos(x1) + i sin(x1) at the nodes.
        let mut f = ScalarField::zeros(lat());
        f.set_coeff([1, 0, 0], Complex64::new(1.0, 0.0));
        let g = f.to_grid(16);
        for flat in (0..g.values.len()).step_by(37) {
            let x = g.node(flat);
            let expect = Complex64::new(x[0].cos(), x[0].sin());
            assert!((g.values[flat] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_has_single_coeff() {
        let f = ScalarField::constant(lat(), 1.0);
        let back = ScalarField::from_grid(lat(), &f.to_grid(16));
        for (idx, k) in lat().modes().enumerate() {
            let expect = if k == [0, 0, 0] { 1.0 } else { 0.0 };
            assert!((back.coeffs[idx] - Complex64::new(expect, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn transform_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ScalarField::random(lat(), 5, 0.3, &mut rng);
        let back = ScalarField::from_grid(lat(), &f.to_grid(lat().eval_grid()));
        let err: f64 =
            f.coeffs.iter().zip(&back.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "round-trip error {err}");
    }

    #[test]
    fn derivative_single_mode() {
        let mut f = ScalarField::zeros(lat());
        f.set_coeff([3, -2, 1], Complex64::new(0.5, 0.0));
        let d1 = f.derivative([1, 0, 0]);
        assert!((d1.coeff([3, -2, 1]) - Complex64::new(0.0, 1.5)).norm() < 1e-15);
    }

    #[test]
    fn trig_product_identity() {
        // sin(x1) * sin(x1) = (1 - cos(2 x1)) / 2
        let mut s = ScalarField::zeros(lat());
        s.set_coeff([1, 0, 0], Complex64::new(0.0, -0.5));
        s.set_coeff([-1, 0, 0], Complex64::new(0.0, 0.5));
        let p = s.multiply(&s).unwrap();
        assert!((p.coeff([0, 0, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-13);
        assert!((p.coeff([2, 0, 0]) - Complex64::new(-0.25, 0.0)).norm() < 1e-13);
        assert!((p.coeff([-2, 0, 0]) - Complex64::new(-0.25, 0.0)).norm() < 1e-13);
        assert!((p.coeff([1, 0, 0])).norm() < 1e-14);
    }

    #[test]
    fn product_with_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = ScalarField::random(lat(), 4, 1.0, &mut rng);
        let one = ScalarField::constant(lat(), 1.0);
        let p = f.multiply(&one).unwrap();
        let err: f64 =
            f.coeffs.iter().zip(&p.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn mode_algebra_within_cutoff() {
        let mut f = ScalarField::zeros(lat());
        let mut g = ScalarField::zeros(lat());
        f.set_coeff([2, 1, 0], Complex64::new(1.0, 0.0));
        g.set_coeff([1, -1, 2], Complex64::new(1.0, 0.0));
        let p = f.multiply(&g).unwrap();
        assert!((p.coeff([3, 0, 2]) - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = ScalarField::random(lat(), 5, 0.7, &mut rng);
        let grid = f.to_grid(lat().eval_grid());
        let grid_mean: f64 =
            grid.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.values.len() as f64;
        let spec: f64 = f.l2_mean_sq();
        assert!((grid_mean - spec).abs() / spec < 1e-12);
    }

    #[test]
    fn leibniz_rule_on_dealiased_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Products stay under the padded Nyquist for k_max = 2.
        let f = ScalarField::random(lat(), 2, 1.0, &mut rng);
        let g = ScalarField::random(lat(), 2, 1.0, &mut rng);
        let lhs = f.multiply(&g).unwrap().derivative([1, 0, 0]);
        let rhs = f
            .derivative([1, 0, 0])
            .multiply(&g)
            .unwrap()
            .add(&f.multiply(&g.derivative([1, 0, 0])).unwrap());
        let scale = lhs.sup_norm().max(1e-30);
        let err: f64 =
            lhs.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err / scale < 1e-10, "Leibniz defect {err}");
    }

    #[test]
    fn reality_preserved_by_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = ScalarField::random(lat(), 3, 1.0, &mut rng);
        let g = ScalarField::random(lat(), 3, 1.0, &mut rng);
        assert!(f.reality_defect() < 1e-12);
        assert!(f.multiply(&g).unwrap().reality_defect() < 1e-12);
        assert!(f.derivative([0, 1, 0]).reality_defect() < 1e-12);
        assert!(f.laplacian().reality_defect() < 1e-12);
    }
}
