//! Discrete Hölder norms: `||f||_N = sum_{j<=N} [f]_j` with `[f]_j` the grid
//! sup over all spatial derivatives of order `j`, and a sampled-pair
//! estimator for the fractional seminorm. Time-sampled variants take the
//! sup over samples (the continuous-in-time sup is under-estimated between
//! samples; reports flag this).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::scalar::{GridField, ScalarField};
use crate::error::{CiemError, Result};

/// Multi-indices of total order `j`.
fn multi_indices(j: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for a in 0..=j {
        for b in 0..=(j - a) {
            out.push([a, b, j - a - b]);
        }
    }
    out
}

/// Periodic Euclidean distance on the torus of side `2*pi`.
fn torus_dist(x: [f64; 3], y: [f64; 3]) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut s = 0.0;
    for ax in 0..3 {
        let mut d = (x[ax] - y[ax]).abs() % tau;
        if d > tau / 2.0 {
            d = tau - d;
        }
        s += d * d;
    }
    s.sqrt()
}

/// `[f]_j`: max over `|alpha| = j` of the grid sup of `D^alpha f`.
pub fn seminorm(f: &ScalarField, j: u32) -> f64 {
    if j == 0 {
        return f.sup_norm();
    }
    multi_indices(j).into_iter().map(|a| f.derivative(a).sup_norm()).fold(0.0, f64::max)
}

/// Hölder norm `||f||_N` for integer `N <= 3`.
pub fn holder_norm(f: &ScalarField, n: u32) -> Result<f64> {
    if n > 3 {
        return Err(CiemError::Norm(format!("derivative order {n} > 3 unsupported")));
    }
    Ok((0..=n).map(|j| seminorm(f, j)).sum())
}

/// Configuration for the fractional seminorm estimator.
pub struct HolderPairs {
    /// Chebyshev radius (in grid cells) of the exhaustive near-pair sweep.
    pub near_radius: usize,
    /// Number of seeded random long-range pairs.
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for HolderPairs {
    fn default() -> Self {
        Self { near_radius: 2, random_pairs: 10_000, seed: 0x11CE }
    }
}

/// `[f]_{N+alpha}` estimated as the sup of difference quotients over all grid
/// pairs within `near_radius` cells plus seeded random long-range pairs.
pub fn fractional_seminorm(
    f: &ScalarField,
    n: u32,
    alpha: f64,
    cfg: &HolderPairs,
) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(CiemError::Norm(format!("Hölder exponent {alpha} outside [0,1)")));
    }
    if alpha == 0.0 {
        return seminorm_checked(f, n);
    }
    let ng = f.lattice.eval_grid();
    let grids: Vec<GridField> =
        multi_indices(n).into_iter().map(|a| f.derivative(a).to_grid(ng)).collect();

    let mut best = 0.0f64;
    let r = cfg.near_radius as isize;
    let n_i = ng as isize;
    let idx = |j: [isize; 3]| -> usize {
        let w = |v: isize| v.rem_euclid(n_i) as usize;
        (w(j[0]) * ng + w(j[1])) * ng + w(j[2])
    };
    for g in &grids {
        for j1 in 0..n_i {
            for j2 in 0..n_i {
                for j3 in 0..n_i {
                    let base = idx([j1, j2, j3]);
                    let xb = g.node(base);
                    let vb = g.values[base];
                    for d1 in 0..=r {
                        for d2 in -r..=r {
                            for d3 in -r..=r {
                                if d1 == 0 && (d2 < 0 || (d2 == 0 && d3 <= 0)) {
                                    continue;
                                }
                                let other = idx([j1 + d1, j2 + d2, j3 + d3]);
                                let dist = torus_dist(xb, g.node(other));
                                let diff = (g.values[other] - vb).norm();
                                best = best.max(diff / dist.powf(alpha));
                            }
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = ng * ng * ng;
    for _ in 0..cfg.random_pairs {
        let a = rng.gen_range(0..total);
        let b = rng.gen_range(0..total);
        if a == b {
            continue;
        }
        for g in &grids {
            let dist = torus_dist(g.node(a), g.node(b));
            if dist < 1e-12 {
                continue;
            }
            let diff = (g.values[a] - g.values[b]).norm();
            best = best.max(diff / dist.powf(alpha));
        }
    }
    Ok(best)
}

fn seminorm_checked(f: &ScalarField, n: u32) -> Result<f64> {
    if n > 3 {
        return Err(CiemError::Norm(format!("derivative order {n} > 3 unsupported")));
    }
    Ok(seminorm(f, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::lattice::Lattice3;
    use num_complex::Complex64;

    #[test]
    fn gradient_seminorm_of_high_mode() {
        // f = sin(8 x1): [f]_1 should approximate 8 on a 64-point axis.
        let lat = Lattice3::new(64, 10).unwrap();
        let mut f = ScalarField::zeros(lat);
        f.set_coeff([8, 0, 0], Complex64::new(0.0, -0.5));
        f.set_coeff([-8, 0, 0], Complex64::new(0.0, 0.5));
        let s = seminorm(&f, 1);
        assert!((7.6..=8.4).contains(&s), "[f]_1 = {s}");
    }

    #[test]
    fn constant_norms() {
        let lat = Lattice3::new(16, 4).unwrap();
        let f = ScalarField::constant(lat, -3.25);
        assert!((holder_norm(&f, 0).unwrap() - 3.25).abs() < 1e-12);
        assert!(seminorm(&f, 1) < 1e-13);
    }

    #[test]
    fn fractional_seminorm_single_mode() {
        // f = cos(x1): [f]_alpha against a dense 1D pair oracle.
        let lat = Lattice3::new(32, 6).unwrap();
        let mut f = ScalarField::zeros(lat);
        f.set_coeff([1, 0, 0], Complex64::new(0.5, 0.0));
        f.set_coeff([-1, 0, 0], Complex64::new(0.5, 0.0));
        let alpha = 0.5;
        // Oracle: dense sampling of |cos a - cos b| / |a - b|^alpha.
        let mut oracle = 0.0f64;
        let m = 600;
        for i in 0..m {
            let a = std::f64::consts::TAU * i as f64 / m as f64;
            for j in (i + 1)..m {
                let b = std::f64::consts::TAU * j as f64 / m as f64;
                let mut d = (a - b).abs();
                if d > std::f64::consts::PI {
                    d = std::f64::consts::TAU - d;
                }
                if d > 1e-9 {
                    oracle = oracle.max((a.cos() - b.cos()).abs() / d.powf(alpha));
                }
            }
        }
        let est = fractional_seminorm(&f, 0, alpha, &HolderPairs::default()).unwrap();
        assert!(
            (est - oracle).abs() / oracle < 0.05,
            "estimate {est} vs oracle {oracle}"
        );
    }

    #[test]
    fn rejects_alpha_one() {
        let lat = Lattice3::new(16, 4).unwrap();
        let f = ScalarField::constant(lat, 1.0);
        assert!(fractional_seminorm(&f, 0, 1.0, &HolderPairs::default()).is_err());
    }
}
