//! Smooth plateau bumps used by every multiplier and cutoff in the crate,
//! built from the standard `exp(1/(x^2-1))` construction. The plateau
//! region is exact by piecewise definition, not by approximation.

/// `exp(-1/y)` for `y > 0`, `0` otherwise; the basic Gevrey transition.
#[inline]
pub fn sigma(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        (-1.0 / y).exp()
    }
}

/// Smooth step: 0 for `y <= 0`, 1 for `y >= 1`, strictly monotone between.
#[inline]
pub fn smoothstep(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        let a = sigma(y);
        let b = sigma(1.0 - y);
        a / (a + b)
    }
}

/// Radial multiplier profile: identically 1 on `[0, 1]`, supported in `[0, 2)`,
/// monotone on `[1, 2]`.
#[inline]
pub fn radial_bump(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        smoothstep(2.0 - r)
    }
}

/// Even 1D multiplier profile for time frequencies: 1 on `[-1, 1]`,
/// supported in `(-2, 2)`.
#[inline]
pub fn time_bump(z: f64) -> f64 {
    radial_bump(z.abs())
}

/// Compactly supported bump `exp(1/(x^2-1))` on `(-1, 1)`, un-normalized.
#[inline]
pub fn phi_star(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 / (x * x - 1.0)).exp()
    }
}

/// Mass of `phi_star` on `(-1, 1)` (dense Simpson quadrature, cached).
pub fn phi_star_mass() -> f64 {
    use std::sync::OnceLock;
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| simpson(phi_star, -1.0, 1.0, 20_000))
}

/// Conventional mollifier on `(-1, 1)` with unit mass.
#[inline]
pub fn rho(s: f64) -> f64 {
    phi_star(s) / phi_star_mass()
}

/// Dense composite Simpson rule (n even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        assert_eq!(radial_bump(0.0), 1.0);
        assert_eq!(radial_bump(1.0), 1.0);
        assert_eq!(radial_bump(0.999_999), 1.0);
        assert_eq!(radial_bump(2.0), 0.0);
        assert_eq!(radial_bump(5.0), 0.0);
        assert!(radial_bump(1.5) > 0.0 && radial_bump(1.5) < 1.0);
        // Monotone on [1, 2].
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = radial_bump(1.0 + i as f64 / 100.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn c2_junction_continuity() {
        // Finite-difference second derivative stays bounded and continuous
        // across r = 1 and r = 2 to the quoted tolerance.
        let h = 1e-4;
        for r0 in [1.0, 2.0] {
            let d2 = |r: f64| {
                (radial_bump(r + h) - 2.0 * radial_bump(r) + radial_bump(r - h)) / (h * h)
            };
            let inner = d2(r0 - 10.0 * h);
            let outer = d2(r0 + 10.0 * h);
            assert!(inner.abs() < 1e-2 && outer.abs() < 1e-2, "junction jump at {r0}");
            // The profile itself is continuous to machine precision.
            assert!((radial_bump(r0 - 1e-9) - radial_bump(r0 + 1e-9)).abs() < 1e-7);
        }
    }

    #[test]
    fn rho_has_unit_mass() {
        let m = simpson(rho, -1.0, 1.0, 4096);
        assert!((m - 1.0).abs() < 1e-10, "mass {m}");
    }
}
