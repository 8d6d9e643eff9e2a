//! Two-dimensional profile constructions in the plane transverse to a pipe
//! direction, together with the quadrature machinery that certifies their
//! moment conditions: for stress profiles the shear-corrected moments
//! `int (psi - L^T Hess(Psi) L)^k` vanish for `k = 1, 3` and stay bounded
//! below for `k = 2`, for every shear `L`; for current profiles the cubic
//! moment is bounded away from zero on each selector region.

use serde::Serialize;

use crate::operators::bump::phi_star;

/// `phi_*` and its first two derivatives (analytic).
pub fn phi_star_d(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let d = x * x - 1.0;
        phi_star(x) * (-2.0 * x / (d * d))
    }
}

pub fn phi_star_dd(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        let d = x * x - 1.0;
        let du = -2.0 * x / (d * d);
        let ddu = (6.0 * x * x + 2.0) / (d * d * d);
        phi_star(x) * (du * du + ddu)
    }
}

/// `hat phi = phi_*^2 / 2` and derivatives.
pub fn phi_hat(x: f64) -> f64 {
    0.5 * phi_star(x) * phi_star(x)
}

pub fn phi_hat_d(x: f64) -> f64 {
    phi_star(x) * phi_star_d(x)
}

pub fn phi_hat_dd(x: f64) -> f64 {
    phi_star_d(x) * phi_star_d(x) + phi_star(x) * phi_star_dd(x)
}

/// A 1D factor with analytic derivatives.
#[derive(Clone)]
pub struct Factor1D {
    /// Bump centers and weights; each term is `w * base(x - c)`.
    terms: Vec<(f64, f64)>,
    base: BaseBump,
}

#[derive(Clone, Copy, PartialEq)]
pub enum BaseBump {
    Star,
    Hat,
}

impl Factor1D {
    pub fn new(base: BaseBump, terms: Vec<(f64, f64)>) -> Self {
        Self { terms, base }
    }

    pub fn value(&self, x: f64) -> f64 {
        let f = match self.base {
            BaseBump::Star => phi_star,
            BaseBump::Hat => phi_hat,
        };
        self.terms.iter().map(|&(c, w)| w * f(x - c)).sum()
    }

    pub fn d1(&self, x: f64) -> f64 {
        let f = match self.base {
            BaseBump::Star => phi_star_d,
            BaseBump::Hat => phi_hat_d,
        };
        self.terms.iter().map(|&(c, w)| w * f(x - c)).sum()
    }

    pub fn d2(&self, x: f64) -> f64 {
        let f = match self.base {
            BaseBump::Star => phi_star_dd,
            BaseBump::Hat => phi_hat_dd,
        };
        self.terms.iter().map(|&(c, w)| w * f(x - c)).sum()
    }

    /// Half-width of the support.
    pub fn radius(&self) -> f64 {
        self.terms.iter().map(|&(c, _)| c.abs() + 1.0).fold(0.0, f64::max)
    }
}

/// A 2D potential shape: either a product of two 1D factors or a radial
/// profile (with analytic Hessians in both cases).
#[derive(Clone)]
pub enum Shape2D {
    Product(Factor1D, Factor1D),
    /// Radial combination `sum_i w_i phi_*(r / s_i)`.
    Radial(Vec<(f64, f64)>),
}

impl Shape2D {
    pub fn value(&self, y: [f64; 2]) -> f64 {
        match self {
            Shape2D::Product(a, b) => a.value(y[0]) * b.value(y[1]),
            Shape2D::Radial(terms) => {
                let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
                terms.iter().map(|&(s, w)| w * phi_star(r / s)).sum()
            }
        }
    }

    /// Hessian matrix of the shape.
    pub fn hessian(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        match self {
            Shape2D::Product(a, b) => {
                let (a0, a1, a2) = (a.value(y[0]), a.d1(y[0]), a.d2(y[0]));
                let (b0, b1, b2) = (b.value(y[1]), b.d1(y[1]), b.d2(y[1]));
                [[a2 * b0, a1 * b1], [a1 * b1, a0 * b2]]
            }
            Shape2D::Radial(terms) => {
                let r2 = y[0] * y[0] + y[1] * y[1];
                let r = r2.sqrt();
                let mut g1 = 0.0; // dg/dr
                let mut g2 = 0.0; // d2g/dr2
                for &(s, w) in terms {
                    g1 += w * phi_star_d(r / s) / s;
                    g2 += w * phi_star_dd(r / s) / (s * s);
                }
                if r < 1e-9 {
                    // Smooth even profile: H = g''(0) Id.
                    return [[g2, 0.0], [0.0, g2]];
                }
                let rr = [y[0] / r, y[1] / r];
                let mut h = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let proj = rr[i] * rr[j];
                        let tang = if i == j { 1.0 - proj } else { -proj };
                        h[i][j] = g2 * proj + (g1 / r) * tang;
                    }
                }
                h
            }
        }
    }

    pub fn laplacian(&self, y: [f64; 2]) -> f64 {
        let h = self.hessian(y);
        h[0][0] + h[1][1]
    }

    pub fn radius(&self) -> f64 {
        match self {
            Shape2D::Product(a, b) => (a.radius().powi(2) + b.radius().powi(2)).sqrt(),
            Shape2D::Radial(terms) => terms.iter().map(|&(s, _)| s).fold(0.0, f64::max),
        }
    }
}

/// 2D Fourier transform `int Psi(y) e^{-i kappa . y} dy` by dense midpoint
/// quadrature over the compact support.
pub fn shape_transform(shape: &Shape2D, kappa: [f64; 2], n: usize) -> num_complex::Complex64 {
    let r = shape.radius() * 1.01;
    let h = 2.0 * r / n as f64;
    let mut acc = num_complex::Complex64::default();
    for i in 0..n {
        let y0 = -r + (i as f64 + 0.5) * h;
        for j in 0..n {
            let y1 = -r + (j as f64 + 0.5) * h;
            let v = shape.value([y0, y1]);
            if v != 0.0 {
                let phase = -(kappa[0] * y0 + kappa[1] * y1);
                acc += v * num_complex::Complex64::new(0.0, phase).exp();
            }
        }
    }
    acc * (h * h)
}

/// `int (lap Psi - L^T Hess(Psi) L)^k dy` over the support, by dense tensor
/// quadrature. `scale` rescales the argument (`Psi(y / scale)` semantics are
/// handled by the caller; here the shape is integrated as given).
pub fn shear_moment(shape: &Shape2D, l: [f64; 2], k: u32, n: usize) -> f64 {
    let r = shape.radius() * 1.01;
    let h = 2.0 * r / n as f64;
    let mut acc = 0.0;
    // Midpoint rule on a fine grid; the integrand is smooth and compactly
    // supported so this converges fast.
    for i in 0..n {
        let y0 = -r + (i as f64 + 0.5) * h;
        for j in 0..n {
            let y1 = -r + (j as f64 + 0.5) * h;
            let hess = shape.hessian([y0, y1]);
            let lap = hess[0][0] + hess[1][1];
            let quad =
                l[0] * l[0] * hess[0][0] + 2.0 * l[0] * l[1] * hess[0][1] + l[1] * l[1] * hess[1][1];
            acc += (lap - quad).powi(k as i32);
        }
    }
    acc * h * h
}

/// The stress-profile shape exhibited in the construction: a product of odd
/// bump pairs, `(phi_*(y+1) - phi_*(y-1))` in each variable.
pub fn stress_reference_shape() -> Shape2D {
    let pair = Factor1D::new(BaseBump::Star, vec![(-1.0, 1.0), (1.0, -1.0)]);
    Shape2D::Product(pair.clone(), pair)
}

/// Constants `D1`, `D2` of the stress-profile lower bound, by quadrature.
pub fn stress_constants(n: usize) -> (f64, f64) {
    let quad1d = |f: &dyn Fn(f64) -> f64| -> f64 {
        let r = 2.5;
        let h = 2.0 * r / n as f64;
        (0..n).map(|i| f(-r + (i as f64 + 0.5) * h)).sum::<f64>() * h
    };
    let pair_dd = |x: f64| phi_star_dd(x + 1.0) - phi_star_dd(x - 1.0);
    let pair = |x: f64| phi_star(x + 1.0) - phi_star(x - 1.0);
    let pair_d = |x: f64| phi_star_d(x + 1.0) - phi_star_d(x - 1.0);
    let d1 = quad1d(&|x| pair_dd(x).powi(2)) * quad1d(&|x| pair(x).powi(2));
    let d2 = quad1d(&|x| pair_d(x).powi(2)).powi(2);
    (d1, d2)
}

/// Current-profile case index (fixed priority order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurrentCase {
    DiagonalResonance, // case 1
    AxisResonance,     // case 2
    GenericRadial,     // case 3
    SmallShear,        // case 4
}

pub const CURRENT_CASES: [CurrentCase; 4] = [
    CurrentCase::DiagonalResonance,
    CurrentCase::AxisResonance,
    CurrentCase::GenericRadial,
    CurrentCase::SmallShear,
];

/// Selector thresholds: `eps` for the resonant annulus `|R^2 - 2| <= eps`
/// (the construction requires `eps < 4/11`), `eps1` for the small-shear disk.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CaseThresholds {
    pub eps: f64,
    pub eps1: f64,
}

impl Default for CaseThresholds {
    fn default() -> Self {
        Self { eps: 0.33, eps1: 0.6 }
    }
}

/// Select the profile case for a given 2D shear, first admissible in the
/// fixed priority order (regions overlap deliberately).
pub fn select_case(l: [f64; 2], th: &CaseThresholds) -> CurrentCase {
    let r2 = l[0] * l[0] + l[1] * l[1];
    let theta = l[1].atan2(l[0]);
    let frac = |center: f64| {
        let mut d = (theta - center) % std::f64::consts::PI;
        if d > std::f64::consts::FRAC_PI_2 {
            d -= std::f64::consts::PI;
        } else if d < -std::f64::consts::FRAC_PI_2 {
            d += std::f64::consts::PI;
        }
        d.abs()
    };
    let near_diag = frac(std::f64::consts::FRAC_PI_4) <= std::f64::consts::FRAC_PI_6;
    let near_axis = frac(0.0) <= std::f64::consts::FRAC_PI_6;
    if (r2 - 2.0).abs() <= th.eps && near_diag {
        CurrentCase::DiagonalResonance
    } else if (r2 - 2.0).abs() <= th.eps && near_axis {
        CurrentCase::AxisResonance
    } else if r2 > th.eps1 {
        CurrentCase::GenericRadial
    } else {
        CurrentCase::SmallShear
    }
}

/// Build the un-normalized shape of a current-profile case. The radial cases
/// are solved once: `GenericRadial` zeroes its own cubic moment at zero shear
/// by a cubic root in the two-bump weight (so the shear term carries the
/// moment), and `SmallShear` normalizes its cubic moment to one.
pub fn current_case_shape(case: CurrentCase, quad_n: usize) -> Shape2D {
    match case {
        CurrentCase::DiagonalResonance => {
            let pair = Factor1D::new(BaseBump::Star, vec![(-0.5, 1.0), (0.5, -1.0)]);
            Shape2D::Product(pair.clone(), pair)
        }
        CurrentCase::AxisResonance => {
            let a = Factor1D::new(
                BaseBump::Star,
                vec![(0.0, 2.0), (2.0, -1.0), (-2.0, -1.0)],
            );
            let b = Factor1D::new(BaseBump::Hat, vec![(0.0, 2.0), (2.0, -1.0), (-2.0, -1.0)]);
            Shape2D::Product(a, b)
        }
        CurrentCase::GenericRadial => {
            // phi4 = rho(r/s1) + w rho(r/s2): solve int (lap phi4)^3 = 0 in w.
            let (s1, s2) = (0.45, 0.9);
            let cube = |w: f64| {
                let shape = Shape2D::Radial(vec![(s1, 1.0), (s2, w)]);
                shear_moment(&shape, [0.0, 0.0], 3, quad_n)
            };
            let mut lo = -4.0;
            let mut hi = 4.0;
            let (mut flo, mut fhi) = (cube(lo), cube(hi));
            assert!(
                flo * fhi < 0.0,
                "cubic moment has no sign change on the bracket: {flo} .. {fhi}"
            );
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = cube(mid);
                if flo * fm <= 0.0 {
                    hi = mid;
                    fhi = fm;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            let _ = fhi;
            let w = 0.5 * (lo + hi);
            Shape2D::Radial(vec![(s1, 1.0), (s2, w)])
        }
        CurrentCase::SmallShear => {
            // phi5 = a rho(r/s): a^3 int (lap rho_s)^3 = 1.
            let s = 0.7;
            let base = Shape2D::Radial(vec![(s, 1.0)]);
            let q = shear_moment(&base, [0.0, 0.0], 3, quad_n);
            assert!(q.abs() > 1e-12, "degenerate radial cubic moment");
            let a = (1.0 / q).cbrt();
            Shape2D::Radial(vec![(s, a)])
        }
    }
}

/// Certified floor of `|int (psi - L^T H L)^3|` over one selector region,
/// by dense sampling of admissible shears.
pub fn certify_case_floor(
    case: CurrentCase,
    shape: &Shape2D,
    th: &CaseThresholds,
    samples: usize,
    quad_n: usize,
) -> f64 {
    let mut floor = f64::MAX;
    let mut count = 0usize;
    let mut idx = 0usize;
    while count < samples {
        idx += 1;
        // Low-discrepancy sweep of (R^2, theta).
        let a = (idx as f64 * 0.754877666).fract();
        let b = (idx as f64 * 0.569840296).fract();
        let r2 = a * 4.0;
        let theta = b * std::f64::consts::TAU;
        let l = [r2.sqrt() * theta.cos(), r2.sqrt() * theta.sin()];
        if select_case(l, th) != case {
            continue;
        }
        count += 1;
        let c3 = shear_moment(shape, l, 3, quad_n);
        floor = floor.min(c3.abs());
    }
    floor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stress_reference_moments_vanish() {
        // int (psi - L^T H L) = 0 and int (.)^3 = 0 for every L; int (.)^2
        // bounded below (the shape's own scale).
        let shape = stress_reference_shape();
        let mut min2 = f64::MAX;
        for p in 0..40 {
            let ang = p as f64 * 0.61;
            let r = (p as f64 * 0.37).fract() * 2.0;
            let l = [r * ang.cos(), r * ang.sin()];
            let m1 = shear_moment(&shape, l, 1, 400);
            let m3 = shear_moment(&shape, l, 3, 400);
            let m2 = shear_moment(&shape, l, 2, 400);
            let scale = m2.sqrt();
            assert!(m1.abs() < 1e-8 * scale, "first moment {m1} at L = {l:?}");
            assert!(m3.abs() < 1e-8 * scale.powi(3), "third moment {m3} at L = {l:?}");
            min2 = min2.min(m2);
        }
        assert!(min2 > 0.0);
    }

    #[test]
    fn stress_lower_bound_constant_positive() {
        let (d1, d2) = stress_constants(3000);
        assert!(d1 > d2 && d2 > 0.0, "D1 = {d1}, D2 = {d2}");
        let c_tilde = 4.0 * (d1 - d2) * d2 / (d1 + d2);
        assert!(c_tilde > 0.0);
    }

    #[test]
    fn selector_covers_plane_with_priority() {
        let th = CaseThresholds::default();
        for p in 0..500 {
            let r2 = (p as f64 * 0.017) % 4.0;
            let theta = p as f64 * 0.13;
            let l = [r2.sqrt() * theta.cos(), r2.sqrt() * theta.sin()];
            let _ = select_case(l, &th); // total by construction; no panic
        }
        // Known representatives.
        assert_eq!(select_case([1.0, 1.0], &th), CurrentCase::DiagonalResonance);
        assert_eq!(select_case([2.0f64.sqrt(), 0.0], &th), CurrentCase::AxisResonance);
        assert_eq!(select_case([1.0, 0.0], &th), CurrentCase::GenericRadial);
        assert_eq!(select_case([0.1, 0.1], &th), CurrentCase::SmallShear);
    }

    #[test]
    fn current_cases_have_positive_floors() {
        let th = CaseThresholds::default();
        for case in CURRENT_CASES {
            let shape = current_case_shape(case, 260);
            let floor = certify_case_floor(case, &shape, &th, 60, 260);
            assert!(floor > 1e-6, "{case:?} floor {floor:.3e}");
        }
    }

    #[test]
    fn small_shear_case_normalized() {
        let shape = current_case_shape(CurrentCase::SmallShear, 400);
        let c3 = shear_moment(&shape, [0.0, 0.0], 3, 400);
        assert!((c3 - 1.0).abs() < 1e-6, "normalized cubic moment {c3}");
    }

    #[test]
    fn generic_radial_zeroes_own_cube() {
        let shape = current_case_shape(CurrentCase::GenericRadial, 400);
        let c3 = shear_moment(&shape, [0.0, 0.0], 3, 400);
        let c2 = shear_moment(&shape, [0.0, 0.0], 2, 400);
        assert!(c3.abs() < 1e-6 * c2.powf(1.5), "cube {c3}");
    }
}
