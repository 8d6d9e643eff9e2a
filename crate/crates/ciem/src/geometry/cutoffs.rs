//! Space and time partition-of-unity cutoffs. Raw plateau bumps are
//! normalized pointwise by the sixth-power sum, so the partition
//! `sum theta^6 = 1`, `sum chi^6 = 1` is exact by construction.

use serde::Serialize;

use crate::error::{CiemError, Result};
use crate::operators::bump::smoothstep;

/// Index family tag: stress directions use cube exponents, current
/// directions square exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyTag {
    Stress,
    Current,
}

impl FamilyTag {
    /// Exponent of the raw bump in `theta_I` / `chi_I`.
    pub fn exponent(self) -> i32 {
        match self {
            FamilyTag::Stress => 3,
            FamilyTag::Current => 2,
        }
    }
}

/// Raw time plateau: 1 on `[1/8, 7/8]`, supported in `(-1/8, 9/8)`.
pub fn theta_raw(t: f64) -> f64 {
    smoothstep((t + 0.125) / 0.25) * smoothstep((1.125 - t) / 0.25)
}

/// Raw 1D space plateau for one axis of the cell cutoff: 1 on
/// `[-7 pi/8, 7 pi/8]`, supported in `(-9 pi/8, 9 pi/8)`, `2 pi`-periodic
/// cells tile the axis when shifted by `2 pi Z`.
pub fn chi_axis_raw(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let w = pi / 4.0;
    smoothstep((x + 9.0 * pi / 8.0) / w) * smoothstep((9.0 * pi / 8.0 - x) / w)
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffSystem {
    pub tau: f64,
    /// `1/mu`, a positive multiple of 3.
    pub mu_inv: i64,
}

impl CutoffSystem {
    pub fn new(tau: f64, mu_inv: i64) -> Result<Self> {
        if tau <= 0.0 {
            return Err(CiemError::Cutoff(format!("tau must be positive, got {tau}")));
        }
        if mu_inv <= 0 || mu_inv % 3 != 0 {
            return Err(CiemError::Cutoff(format!(
                "1/mu must be a positive multiple of 3, got {mu_inv}"
            )));
        }
        Ok(Self { tau, mu_inv })
    }

    pub fn mu(&self) -> f64 {
        1.0 / self.mu_inv as f64
    }

    /// Normalized time bump `theta_u(t / tau)` (before the tag exponent).
    pub fn theta_base(&self, u: i64, t: f64) -> f64 {
        let s = t / self.tau;
        let raw = theta_raw(s - u as f64);
        if raw == 0.0 {
            return 0.0;
        }
        let mut sum6 = 0.0;
        let base = s.floor() as i64;
        for v in (base - 1)..=(base + 1) {
            sum6 += theta_raw(s - v as f64).powi(6);
        }
        raw / sum6.powf(1.0 / 6.0)
    }

    /// `theta_I(t)` with the family-tag exponent.
    pub fn theta(&self, u: i64, t: f64, tag: FamilyTag) -> f64 {
        self.theta_base(u, t).powi(tag.exponent())
    }

    /// Normalized cell bump `chi_v(x / mu)` evaluated at a position `y`
    /// (typically a backward-flow value), before the tag exponent.
    pub fn chi_base(&self, cell: [i64; 3], y: [f64; 3]) -> f64 {
        let tau2 = std::f64::consts::TAU;
        let mut val = 1.0;
        for ax in 0..3 {
            // Scaled coordinate relative to the cell center, reduced to the
            // periodic cell lattice of period 2 pi * mu_inv.
            let s = y[ax] / self.mu() - tau2 * cell[ax] as f64;
            let period = tau2 * self.mu_inv as f64;
            let mut r = s % period;
            if r > period / 2.0 {
                r -= period;
            } else if r < -period / 2.0 {
                r += period;
            }
            let raw = chi_axis_raw(r);
            if raw == 0.0 {
                return 0.0;
            }
            // Normalize along this axis over the two neighbors that overlap.
            let mut sum6 = 0.0;
            for dv in -1..=1 {
                sum6 += chi_axis_raw(r - tau2 * dv as f64).powi(6);
            }
            val *= raw / sum6.powf(1.0 / 6.0);
        }
        val
    }

    pub fn chi(&self, cell: [i64; 3], y: [f64; 3], tag: FamilyTag) -> f64 {
        self.chi_base(cell, y).powi(tag.exponent())
    }

    /// Active time windows `u` whose support intersects `[a, b]`.
    pub fn active_windows(&self, a: f64, b: f64) -> std::ops::RangeInclusive<i64> {
        let lo = (a / self.tau - 1.125).floor() as i64;
        let hi = (b / self.tau + 0.125).ceil() as i64;
        lo..=hi
    }

    /// All cells of the scaled torus, `v in {0..mu_inv - 1}^3`.
    pub fn cells(&self) -> Vec<[i64; 3]> {
        let m = self.mu_inv;
        let mut out = Vec::with_capacity((m * m * m) as usize);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }

    /// Support of `theta_u(t/tau)` in physical time.
    pub fn theta_support(&self, u: i64) -> (f64, f64) {
        ((u as f64 - 0.125) * self.tau, (u as f64 + 1.125) * self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sixth_power_partition_in_time() {
        let cs = CutoffSystem::new(0.2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let t = rng.gen_range(-3.0..3.0);
            let base = (t / cs.tau).floor() as i64;
            let sum: f64 = ((base - 2)..=(base + 2)).map(|u| cs.theta_base(u, t).powi(6)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "theta^6 sum {sum} at t {t}");
        }
    }

    #[test]
    fn sixth_power_partition_in_space() {
        let cs = CutoffSystem::new(0.2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let y = [
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ];
            let sum: f64 = cs.cells().iter().map(|&v| cs.chi_base(v, y).powi(6)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "chi^6 sum {sum} at {y:?}");
        }
    }

    #[test]
    fn plateau_interior_is_exactly_one() {
        let cs = CutoffSystem::new(0.5, 3).unwrap();
        // Deep inside window u = 0: t/tau in [1/8 + eps, 7/8 - eps] and
        // neighbors vanish, so the normalized bump equals 1.
        for t in [0.2, 0.25, 0.3] {
            assert_eq!(cs.theta_base(0, t), 1.0);
            assert_eq!(cs.theta_base(1, t), 0.0);
        }
    }

    #[test]
    fn disjoint_next_nearest_windows() {
        let cs = CutoffSystem::new(0.5, 3).unwrap();
        let (a0, b0) = cs.theta_support(0);
        let (a2, b2) = cs.theta_support(2);
        assert!(b0 <= a2 || b2 <= a0);
        // And numerically: no t has both active.
        for i in 0..200 {
            let t = -0.5 + i as f64 * 0.01;
            assert!(cs.theta_base(0, t) * cs.theta_base(2, t) == 0.0);
        }
    }

    #[test]
    fn rejects_bad_mu() {
        assert!(CutoffSystem::new(0.1, 4).is_err());
        assert!(CutoffSystem::new(0.1, -3).is_err());
        assert!(CutoffSystem::new(0.1, 6).is_ok());
    }

    #[test]
    fn chi_periodicity_in_cells() {
        let cs = CutoffSystem::new(0.2, 3).unwrap();
        let y = [1.0, 2.0, 3.0];
        // Cell indices wrap modulo mu_inv.
        let a = cs.chi_base([0, 1, 2], y);
        let b = cs.chi_base([3, 4, 5], y);
        assert!((a - b).abs() < 1e-15);
    }
}
