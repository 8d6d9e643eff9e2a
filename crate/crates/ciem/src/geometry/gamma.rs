//! The two geometric decomposition lemmas: positive dyad coefficients for
//! symmetric matrices near the identity, and affine frame coefficients for
//! small vectors.

use super::families::{dyad, sym_coords, DirectionFamily, IVec3};
use crate::error::{CiemError, Result};

/// Solver for `sum_i G_i^2 f_i (x) f_i = Id - K` over one family's stress
/// directions. The 6x6 system is factored once per family; the map
/// `K -> {G^2}` is linear.
#[derive(Debug, Clone)]
pub struct StressDecomposition {
    pub dirs: [IVec3; 6],
    /// Inverse of the dyad-coordinate matrix (columns = dyads).
    inv: [[f64; 6]; 6],
}

impl StressDecomposition {
    pub fn new(family: &DirectionFamily) -> Result<Self> {
        let mut m = [[0.0f64; 6]; 6];
        for (col, f) in family.stress_dirs.iter().enumerate() {
            let coords = sym_coords(&dyad(*f));
            for row in 0..6 {
                m[row][col] = coords[row];
            }
        }
        let inv = invert6(&m).ok_or_else(|| {
            CiemError::OutsideAdmissible(format!(
                "family {}: dyad matrix singular",
                family.class_index
            ))
        })?;
        Ok(Self { dirs: family.stress_dirs, inv })
    }

    /// Squared coefficients for a symmetric target `Id - K`.
    pub fn solve_squared(&self, k: &[[f64; 3]; 3]) -> [f64; 6] {
        let target = [
            1.0 - k[0][0],
            1.0 - k[1][1],
            1.0 - k[2][2],
            -0.5 * (k[0][1] + k[1][0]),
            -0.5 * (k[0][2] + k[2][0]),
            -0.5 * (k[1][2] + k[2][1]),
        ];
        let mut g2 = [0.0f64; 6];
        for i in 0..6 {
            for j in 0..6 {
                g2[i] += self.inv[i][j] * target[j];
            }
        }
        g2
    }

    /// Positive coefficients `Gamma_i` with the reconstruction identity, or
    /// an admissibility error when any squared coefficient leaves the
    /// positivity floor (the matrix is outside `S_N` for this family).
    pub fn gamma(&self, k: &[[f64; 3]; 3]) -> Result<[f64; 6]> {
        let g2 = self.solve_squared(k);
        let floor = 1e-12;
        for (i, &v) in g2.iter().enumerate() {
            if v < floor {
                return Err(CiemError::OutsideAdmissible(format!(
                    "squared coefficient {i} = {v:.3e} below positivity floor \
                     (|K| too large for this family)"
                )));
            }
        }
        Ok(g2.map(f64::sqrt))
    }

    /// Residual `|sum G^2 f(x)f - (Id - K)|_inf` for verification.
    pub fn reconstruction_residual(&self, k: &[[f64; 3]; 3], g2: &[f64; 6]) -> f64 {
        let mut rec = [[0.0f64; 3]; 3];
        for (c, f) in self.dirs.iter().enumerate() {
            let d = dyad(*f);
            for i in 0..3 {
                for j in 0..3 {
                    rec[i][j] += g2[c] * d[i][j];
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 - k[i][j] } else { -k[i][j] };
                worst = worst.max((rec[i][j] - target).abs());
            }
        }
        worst
    }
}

/// Affine coefficients of the current-direction frame:
/// `Gamma_k(m) = 2 N0 + (m . f_k)/|f_k|^2` for the frame, `2 N0` for the
/// closing vector; then `sum_k Gamma_k f_k = m` exactly and all values lie
/// in `[N0, 3 N0]` for `|m| <= N0`.
#[derive(Debug, Clone)]
pub struct CurrentDecomposition {
    pub dirs: [IVec3; 4],
    pub n0: f64,
}

impl CurrentDecomposition {
    pub fn new(family: &DirectionFamily, n0: f64) -> Self {
        assert!(n0 > 0.0);
        Self { dirs: family.current_dirs, n0 }
    }

    pub fn gamma(&self, m: [f64; 3]) -> Result<[f64; 4]> {
        let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        if norm > self.n0 * (1.0 + 1e-12) {
            return Err(CiemError::OutsideAdmissible(format!(
                "|m| = {norm:.4e} exceeds N0 = {:.4e}",
                self.n0
            )));
        }
        let c0 = 2.0 * self.n0;
        let mut g = [c0; 4];
        for k in 0..3 {
            let f = self.dirs[k];
            let ff = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]) as f64;
            let mf = m[0] * f[0] as f64 + m[1] * f[1] as f64 + m[2] * f[2] as f64;
            g[k] = c0 + mf / ff;
        }
        Ok(g)
    }

    pub fn reconstruction_residual(&self, m: [f64; 3], g: &[f64; 4]) -> f64 {
        let mut rec = [0.0f64; 3];
        for (k, f) in self.dirs.iter().enumerate() {
            for ax in 0..3 {
                rec[ax] += g[k] * f[ax] as f64;
            }
        }
        (0..3).map(|ax| (rec[ax] - m[ax]).abs()).fold(0.0, f64::max)
    }
}

fn invert6(m: &[[f64; 6]; 6]) -> Option<[[f64; 6]; 6]> {
    let mut a = *m;
    let mut inv = [[0.0f64; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let pivot = (col..6).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for c in 0..6 {
            a[col][c] /= p;
            inv[col][c] /= p;
        }
        for r in 0..6 {
            if r != col {
                let s = a[r][col];
                for c in 0..6 {
                    a[r][c] -= s * a[col][c];
                    inv[r][c] -= s * inv[col][c];
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::families::build_families;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn base_family_identity_coefficients() {
        // K = 0 with the base family: sum f(x)f = 4 Id forces G = 1/2.
        let fams = build_families().unwrap();
        let solver = StressDecomposition::new(&fams[0]).unwrap();
        let g = solver.gamma(&[[0.0; 3]; 3]).unwrap();
        for v in g {
            assert!((v - 0.5).abs() < 1e-13, "Gamma = {v}");
        }
    }

    #[test]
    fn stress_reconstruction_all_families() {
        let fams = build_families().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for fam in &fams {
            let solver = StressDecomposition::new(fam).unwrap();
            for _ in 0..100 {
                let mut k = [[0.0f64; 3]; 3];
                for i in 0..3 {
                    for j in i..3 {
                        let v = rng.gen_range(-0.1..0.1);
                        k[i][j] = v;
                        k[j][i] = v;
                    }
                }
                let g = solver.gamma(&k).unwrap();
                let g2 = g.map(|v| v * v);
                let res = solver.reconstruction_residual(&k, &g2);
                assert!(res < 1e-12, "family {} residual {res}", fam.class_index);
            }
        }
    }

    #[test]
    fn huge_k_rejected() {
        let fams = build_families().unwrap();
        let solver = StressDecomposition::new(&fams[0]).unwrap();
        let mut k = [[0.0f64; 3]; 3];
        k[0][0] = 50.0;
        assert!(solver.gamma(&k).is_err());
    }

    #[test]
    fn current_zero_vector_is_symmetric() {
        let fams = build_families().unwrap();
        let dec = CurrentDecomposition::new(&fams[0], 1.5);
        let g = dec.gamma([0.0; 3]).unwrap();
        for v in g {
            assert!((v - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn current_frame_direction() {
        // m = f1 for an orthonormal frame: G1 = c0 + 1, others = c0.
        let fams = build_families().unwrap();
        let n0 = 2.0;
        let dec = CurrentDecomposition::new(&fams[0], n0);
        let g = dec.gamma([1.0, 0.0, 0.0]).unwrap();
        assert!((g[0] - (2.0 * n0 + 1.0)).abs() < 1e-14);
        for v in &g[1..] {
            assert!((v - 2.0 * n0).abs() < 1e-14);
        }
        assert!(dec.reconstruction_residual([1.0, 0.0, 0.0], &g) < 1e-14);
    }

    #[test]
    fn current_reconstruction_and_range() {
        let fams = build_families().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for fam in fams.iter().step_by(5) {
            let n0 = 3.0;
            let dec = CurrentDecomposition::new(fam, n0);
            for _ in 0..100 {
                let raw: [f64; 3] =
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let norm = (raw.iter().map(|v| v * v).sum::<f64>()).sqrt();
                let m = raw.map(|v| v / norm.max(1.0) * rng.gen_range(0.0..n0));
                let g = dec.gamma(m).unwrap();
                assert!(dec.reconstruction_residual(m, &g) < 1e-13);
                for v in g {
                    assert!(v >= n0 - 1e-12 && v <= 3.0 * n0 + 1e-12, "Gamma {v} outside range");
                }
            }
        }
    }

    #[test]
    fn sign_flip_leaves_squares_unchanged() {
        // Replacing Gamma by -Gamma leaves every squared-weight tensor
        // unchanged (the bifurcation invariance).
        let fams = build_families().unwrap();
        let solver = StressDecomposition::new(&fams[3]).unwrap();
        let mut k = [[0.0f64; 3]; 3];
        k[0][1] = 0.05;
        k[1][0] = 0.05;
        let g = solver.gamma(&k).unwrap();
        let flipped = g.map(|v| -v);
        for (a, b) in g.iter().zip(flipped.iter()) {
            assert!((a * a - b * b).abs() < 1e-15);
        }
    }

    #[test]
    fn stress_map_is_linear_in_k() {
        let fams = build_families().unwrap();
        let solver = StressDecomposition::new(&fams[1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut ka = [[0.0f64; 3]; 3];
        let mut kb = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let a = rng.gen_range(-0.05..0.05);
                let b = rng.gen_range(-0.05..0.05);
                ka[i][j] = a;
                ka[j][i] = a;
                kb[i][j] = b;
                kb[j][i] = b;
            }
        }
        // G^2(ka) + G^2(kb) - G^2(0) = G^2(ka + kb) by linearity.
        let mut ks = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                ks[i][j] = ka[i][j] + kb[i][j];
            }
        }
        let sa = solver.solve_squared(&ka);
        let sb = solver.solve_squared(&kb);
        let s0 = solver.solve_squared(&[[0.0; 3]; 3]);
        let ss = solver.solve_squared(&ks);
        for i in 0..6 {
            assert!((sa[i] + sb[i] - s0[i] - ss[i]).abs() < 1e-13);
        }
    }
}
