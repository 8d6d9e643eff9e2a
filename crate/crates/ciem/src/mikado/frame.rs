//! Orthogonal integer frames attached to pipe directions, and the transverse
//! translation lattice of the periodized pipe.

use crate::error::{CiemError, Result};
use crate::geometry::IVec3;

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn gcd3(v: IVec3) -> i64 {
    gcd(gcd(v[0], v[1]), v[2]).max(1)
}

pub fn cross(a: IVec3, b: IVec3) -> IVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(v: IVec3) -> f64 {
    ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) as f64).sqrt()
}

/// Primitive representative of a direction (divide by the content).
pub fn primitive(f: IVec3) -> IVec3 {
    let g = gcd3(f);
    [f[0] / g, f[1] / g, f[2] / g]
}

/// Integer partner `f*` orthogonal to `f`, from the fixed catalog of the ten
/// base directions (scaled directions share their base's frame).
pub fn orth_partner(f: IVec3) -> Result<IVec3> {
    let p = primitive(f);
    let table: &[(IVec3, IVec3)] = &[
        ([1, 1, 0], [1, -1, 0]),
        ([1, -1, 0], [1, 1, 0]),
        ([1, 0, 1], [1, 0, -1]),
        ([1, 0, -1], [1, 0, 1]),
        ([0, 1, 1], [0, 1, -1]),
        ([0, 1, -1], [0, 1, 1]),
        ([1, 0, 0], [0, 1, 0]),
        ([0, 1, 0], [0, 0, 1]),
        ([0, 0, 1], [1, 0, 0]),
        ([-1, -1, -1], [1, -1, 0]),
    ];
    for &(dir, partner) in table {
        if dir == p {
            return Ok(partner);
        }
    }
    Err(CiemError::Profile(format!("no frame catalog entry for direction {f:?}")))
}

/// Orthogonal frame of a pipe direction with the transverse lattice data.
#[derive(Debug, Clone)]
pub struct PipeFrame {
    pub f: IVec3,
    pub f_star: IVec3,
    pub f_cross: IVec3,
    /// Unit vectors spanning the transverse plane.
    pub u1: [f64; 3],
    pub u2: [f64; 3],
    /// Unit vector along the pipe.
    pub axis: [f64; 3],
    /// Periods of the 1D projections of the translation lattice `2 pi Z^3`
    /// onto `u1` and `u2`.
    pub p1: f64,
    pub p2: f64,
    /// Unique transverse offsets of nearby lattice copies (for
    /// periodization), as `(y1, y2)` pairs including the origin.
    pub transverse_offsets: Vec<[f64; 2]>,
}

impl PipeFrame {
    pub fn new(f: IVec3) -> Result<Self> {
        let p = primitive(f);
        let f_star = orth_partner(f)?;
        let f_cross = cross(p, f_star);
        let n1 = norm(f_star);
        let n2 = norm(f_cross);
        let nf = norm(p);
        let u1 = [f_star[0] as f64 / n1, f_star[1] as f64 / n1, f_star[2] as f64 / n1];
        let u2 = [f_cross[0] as f64 / n2, f_cross[1] as f64 / n2, f_cross[2] as f64 / n2];
        let axis = [p[0] as f64 / nf, p[1] as f64 / nf, p[2] as f64 / nf];
        let p1 = std::f64::consts::TAU * gcd3(f_star) as f64 / n1;
        let p2 = std::f64::consts::TAU * gcd3(f_cross) as f64 / n2;

        // Unique transverse offsets of 2 pi w for |w_i| <= 3.
        let mut offsets: Vec<[f64; 2]> = Vec::new();
        let range = 3i64;
        for w1 in -range..=range {
            for w2 in -range..=range {
                for w3 in -range..=range {
                    let w = [w1 as f64, w2 as f64, w3 as f64];
                    let y1 = std::f64::consts::TAU * (w[0] * u1[0] + w[1] * u1[1] + w[2] * u1[2]);
                    let y2 = std::f64::consts::TAU * (w[0] * u2[0] + w[1] * u2[1] + w[2] * u2[2]);
                    if !offsets
                        .iter()
                        .any(|o| (o[0] - y1).abs() < 1e-9 && (o[1] - y2).abs() < 1e-9)
                    {
                        offsets.push([y1, y2]);
                    }
                }
            }
        }
        Ok(Self { f: p, f_star, f_cross, u1, u2, axis, p1, p2, transverse_offsets: offsets })
    }

    /// Transverse coordinates of a point relative to the pipe through `z`.
    pub fn transverse(&self, x: [f64; 3], z: [f64; 3]) -> [f64; 2] {
        let d = [x[0] - z[0], x[1] - z[1], x[2] - z[2]];
        [
            d[0] * self.u1[0] + d[1] * self.u1[1] + d[2] * self.u1[2],
            d[0] * self.u2[0] + d[1] * self.u2[1] + d[2] * self.u2[2],
        ]
    }

    /// Whether a wavevector lies in the pipe plane `f . k = 0`.
    pub fn in_plane(&self, k: [i32; 3]) -> bool {
        self.f[0] * k[0] as i64 + self.f[1] * k[1] as i64 + self.f[2] * k[2] as i64 == 0
    }

    /// Sector test for the anti-periodic (odd-harmonic) stress profiles:
    /// `k . f* = |f*|^2 * (odd integer)`.
    pub fn in_odd_sector(&self, k: [i32; 3]) -> bool {
        let kf = self.f_star[0] * k[0] as i64
            + self.f_star[1] * k[1] as i64
            + self.f_star[2] * k[2] as i64;
        let n2 = self.f_star[0] * self.f_star[0]
            + self.f_star[1] * self.f_star[1]
            + self.f_star[2] * self.f_star[2];
        kf % n2 == 0 && (kf / n2).rem_euclid(2) == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_orthogonal() {
        for f in [[1i64, 1, 0], [3, -3, 0], [0, 5, 5], [1, 0, 0], [-3, -3, -3]] {
            let fr = PipeFrame::new(f).unwrap();
            let dotf = |a: [f64; 3], b: IVec3| {
                a[0] * b[0] as f64 + a[1] * b[1] as f64 + a[2] * b[2] as f64
            };
            assert!(dotf(fr.u1, fr.f).abs() < 1e-14);
            assert!(dotf(fr.u2, fr.f).abs() < 1e-14);
            let u12 = fr.u1[0] * fr.u2[0] + fr.u1[1] * fr.u2[1] + fr.u1[2] * fr.u2[2];
            assert!(u12.abs() < 1e-14);
        }
    }

    #[test]
    fn transverse_periods() {
        let fr = PipeFrame::new([1, 1, 0]).unwrap();
        assert!((fr.p1 - std::f64::consts::TAU / 2f64.sqrt()).abs() < 1e-12);
        assert!((fr.p2 - std::f64::consts::TAU).abs() < 1e-12);
        // Offsets form the product lattice for this direction.
        for o in &fr.transverse_offsets {
            let m1 = o[0] / fr.p1;
            let m2 = o[1] / fr.p2;
            assert!((m1 - m1.round()).abs() < 1e-9, "offset {o:?}");
            assert!((m2 - m2.round()).abs() < 1e-9, "offset {o:?}");
        }
    }

    #[test]
    fn odd_sector_examples() {
        let fr = PipeFrame::new([1, 1, 0]).unwrap();
        assert!(fr.in_plane([1, -1, 0]) && fr.in_odd_sector([1, -1, 0]));
        assert!(fr.in_plane([2, -2, 1]) && !fr.in_odd_sector([2, -2, 1]));
        assert!(fr.in_plane([3, -3, 2]) && fr.in_odd_sector([3, -3, 2]));
        assert!(!fr.in_plane([1, 0, 0]));
    }

    #[test]
    fn scaled_directions_share_frames() {
        let a = PipeFrame::new([1, 0, 1]).unwrap();
        let b = PipeFrame::new([5, 0, 5]).unwrap();
        assert_eq!(a.f, b.f);
        assert_eq!(a.f_star, b.f_star);
    }
}
