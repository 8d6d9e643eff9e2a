//! Periodic interpolation of band-limited fields at arbitrary points.
//!
//! Fields are oversampled onto a fine collocation grid once (an exact
//! spectral evaluation), then queried with periodic tricubic interpolation.
//! Trilinear lookup is also provided where the consumer pins that choice.

use num_complex::Complex64;

use crate::field::lattice::next_fast_size;
use crate::field::{ScalarField, VectorField};

/// Real values of one scalar field on a fine periodic grid.
#[derive(Debug, Clone)]
pub struct SampledScalar {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SampledScalar {
    pub fn new(f: &ScalarField, oversample: usize) -> Self {
        let n = next_fast_size(oversample * f.lattice.modes_per_axis());
        let grid = f.to_grid(n);
        Self { n, values: grid.values.iter().map(|v| v.re).collect() }
    }

    /// From complex parts kept explicitly (for phase fields).
    pub fn new_imag(f: &ScalarField, oversample: usize) -> Self {
        let n = next_fast_size(oversample * f.lattice.modes_per_axis());
        let grid = f.to_grid(n);
        Self { n, values: grid.values.iter().map(|v| v.im).collect() }
    }

    #[inline]
    fn value(&self, j: [i64; 3]) -> f64 {
        let n = self.n as i64;
        let w = |v: i64| v.rem_euclid(n) as usize;
        self.values[(w(j[0]) * self.n + w(j[1])) * self.n + w(j[2])]
    }

    /// Periodic tricubic (Catmull-Rom) interpolation.
    pub fn tricubic(&self, x: [f64; 3]) -> f64 {
        let h = std::f64::consts::TAU / self.n as f64;
        let mut base = [0i64; 3];
        let mut wts = [[0.0f64; 4]; 3];
        for ax in 0..3 {
            let u = x[ax] / h;
            let i = u.floor();
            let t = u - i;
            base[ax] = i as i64 - 1;
            let t2 = t * t;
            let t3 = t2 * t;
            wts[ax] = [
                0.5 * (-t3 + 2.0 * t2 - t),
                0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
                0.5 * (-3.0 * t3 + 4.0 * t2 + t),
                0.5 * (t3 - t2),
            ];
        }
        let mut acc = 0.0;
        for a in 0..4 {
            let wa = wts[0][a];
            for b in 0..4 {
                let wab = wa * wts[1][b];
                for c in 0..4 {
                    acc += wab
                        * wts[2][c]
                        * self.value([base[0] + a as i64, base[1] + b as i64, base[2] + c as i64]);
                }
            }
        }
        acc
    }

    /// Periodic trilinear interpolation.
    pub fn trilinear(&self, x: [f64; 3]) -> f64 {
        let h = std::f64::consts::TAU / self.n as f64;
        let mut base = [0i64; 3];
        let mut t = [0.0f64; 3];
        for ax in 0..3 {
            let u = x[ax] / h;
            let i = u.floor();
            base[ax] = i as i64;
            t[ax] = u - i;
        }
        let mut acc = 0.0;
        for a in 0..2 {
            let wa = if a == 0 { 1.0 - t[0] } else { t[0] };
            for b in 0..2 {
                let wb = if b == 0 { 1.0 - t[1] } else { t[1] };
                for c in 0..2 {
                    let wc = if c == 0 { 1.0 - t[2] } else { t[2] };
                    acc += wa
                        * wb
                        * wc
                        * self.value([base[0] + a as i64, base[1] + b as i64, base[2] + c as i64]);
                }
            }
        }
        acc
    }
}

/// Oversampled vector field with complex components retained. When the
/// spectral support is small enough, an exact mode-sum path replaces the
/// tricubic lookup so smooth maps evaluate to spectral accuracy.
#[derive(Debug, Clone)]
pub struct SampledVector {
    pub re: [SampledScalar; 3],
    im: Option<Box<[SampledScalar; 3]>>,
    sparse: Option<Vec<([i32; 3], [Complex64; 3])>>,
}

/// Exact evaluation is used below this many retained modes.
const EXACT_MODE_CAP: usize = 2800;

impl SampledVector {
    pub fn new(v: &VectorField, oversample: usize) -> Self {
        let re = std::array::from_fn(|i| SampledScalar::new(&v.comps[i], oversample));
        let defect = v.reality_defect();
        let im = if defect > 1e-10 {
            Some(Box::new(std::array::from_fn(|i| {
                SampledScalar::new_imag(&v.comps[i], oversample)
            })))
        } else {
            None
        };
        let sparse = Self::sparse_modes(v);
        Self { re, im, sparse }
    }

    fn sparse_modes(v: &VectorField) -> Option<Vec<([i32; 3], [Complex64; 3])>> {
        let lat = v.lattice();
        let maxc = v
            .comps
            .iter()
            .flat_map(|c| c.coeffs.iter())
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        if maxc == 0.0 {
            return Some(Vec::new());
        }
        let tol = 1e-14 * maxc;
        let mut modes = Vec::new();
        for (idx, k) in lat.modes().enumerate() {
            let c = [v.comps[0].coeffs[idx], v.comps[1].coeffs[idx], v.comps[2].coeffs[idx]];
            if c.iter().any(|z| z.norm() > tol) {
                if modes.len() >= EXACT_MODE_CAP {
                    return None;
                }
                modes.push((k, c));
            }
        }
        Some(modes)
    }

    fn eval_sparse(modes: &[([i32; 3], [Complex64; 3])], x: [f64; 3]) -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        for (k, c) in modes {
            let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
            let (s, co) = phase.sin_cos();
            for i in 0..3 {
                acc[i] += c[i].re * co - c[i].im * s;
            }
        }
        acc
    }

    pub fn tricubic(&self, x: [f64; 3]) -> [f64; 3] {
        if let Some(modes) = &self.sparse {
            return Self::eval_sparse(modes, x);
        }
        std::array::from_fn(|i| self.re[i].tricubic(x))
    }

    pub fn tricubic_c(&self, x: [f64; 3]) -> [Complex64; 3] {
        if let Some(modes) = &self.sparse {
            let mut acc = [Complex64::default(); 3];
            for (k, c) in modes {
                let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
                let e = Complex64::new(0.0, phase).exp();
                for i in 0..3 {
                    acc[i] += c[i] * e;
                }
            }
            return acc;
        }
        std::array::from_fn(|i| {
            let re = self.re[i].tricubic(x);
            let im = self.im.as_ref().map(|g| g[i].tricubic(x)).unwrap_or(0.0);
            Complex64::new(re, im)
        })
    }

    pub fn trilinear(&self, x: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| self.re[i].trilinear(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Lattice3;
    use num_complex::Complex64;

    #[test]
    fn tricubic_accuracy_on_low_mode() {
        let lat = Lattice3::new(16, 5).unwrap();
        let mut f = ScalarField::zeros(lat);
        f.set_coeff([2, 1, 0], Complex64::new(0.5, 0.0));
        f.set_coeff([-2, -1, 0], Complex64::new(0.5, 0.0));
        let s = SampledScalar::new(&f, 4);
        let mut worst = 0.0f64;
        for p in 0..200 {
            let x = [
                0.013 + 0.031 * p as f64,
                1.7 - 0.017 * p as f64,
                0.5 + 0.011 * (p as f64).sin(),
            ];
            let exact = (2.0 * x[0] + x[1]).cos();
            worst = worst.max((s.tricubic(x) - exact).abs());
        }
        assert!(worst < 2e-3, "tricubic error {worst}");
    }

    #[test]
    fn sparse_vector_path_is_exact() {
        let lat = Lattice3::new(16, 5).unwrap();
        let mut v = crate::field::VectorField::zeros(lat);
        v.comps[0].set_coeff([2, 1, 0], Complex64::new(0.25, 0.0));
        v.comps[0].set_coeff([-2, -1, 0], Complex64::new(0.25, 0.0));
        v.comps[2].set_coeff([0, 1, -1], Complex64::new(0.0, -0.5));
        v.comps[2].set_coeff([0, -1, 1], Complex64::new(0.0, 0.5));
        let s = SampledVector::new(&v, 4);
        for p in 0..100 {
            let x = [0.07 * p as f64, 2.0 - 0.013 * p as f64, 0.9 + 0.021 * p as f64];
            let got = s.tricubic(x);
            let want0 = 0.5 * (2.0 * x[0] + x[1]).cos();
            let want2 = (x[1] - x[2]).sin();
            assert!((got[0] - want0).abs() < 1e-12);
            assert!((got[1]).abs() < 1e-12);
            assert!((got[2] - want2).abs() < 1e-12);
        }
    }

    #[test]
    fn trilinear_exact_at_nodes() {
        let lat = Lattice3::new(16, 5).unwrap();
        let mut f = ScalarField::zeros(lat);
        f.set_coeff([1, 0, 2], Complex64::new(0.3, 0.0));
        f.set_coeff([-1, 0, -2], Complex64::new(0.3, 0.0));
        let s = SampledScalar::new(&f, 4);
        let h = std::f64::consts::TAU / s.n as f64;
        for j in [0usize, 3, 17, 40] {
            let x = [j as f64 * h, (2 * j % s.n) as f64 * h, 0.0];
            let exact = 0.6 * (x[0] + 2.0 * x[2]).cos();
            assert!((s.trilinear(x) - exact).abs() < 1e-12);
        }
    }
}
