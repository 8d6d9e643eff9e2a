//! Smooth low-pass mollification in time, `U_{<= 1/ell}`, realized as a
//! discrete convolution with the transform of the time multiplier profile.
//!
//! The kernel is evaluated by dense quadrature of its transform, truncated
//! where it falls below a relative tolerance or where the input window ends
//! (whichever is tighter), and its mass is renormalized to one so constants
//! are exact fixed points.

use rayon::prelude::*;

use super::bump::{simpson, time_bump};
use crate::error::{CiemError, Result};
use crate::field::{ScalarField, TimeGrid, TimeSampled};

/// What to do when the input interval is narrower than the paper margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginPolicy {
    /// Fail with a margin error (the spec default).
    Strict,
    /// Truncate the kernel to the available margin and record the clamp.
    Clamp,
}

/// Truncated, renormalized convolution kernel for `U_{<= 1/ell}`.
#[derive(Debug, Clone)]
pub struct TimeKernel {
    /// Dyadic level `J = floor(log2(1/ell))`.
    pub level: i32,
    /// Truncation half-width in seconds.
    pub half_width: f64,
    /// True when the window forced a truncation short of the tolerance cut.
    pub clamped: bool,
    scale: f64,
}

impl TimeKernel {
    /// Kernel value before truncation: `h(s) = (2^J/pi) int_0^2 phi^t(w) cos(2^J s w) dw`.
    fn raw(scale: f64, s: f64) -> f64 {
        scale / std::f64::consts::PI * simpson(|w| time_bump(w) * (scale * s * w).cos(), 0.0, 2.0, 256)
    }

    /// Build for mollification scale `ell`, with at most `avail` seconds of
    /// margin on each side of the output window.
    pub fn new(ell: f64, avail: f64, policy: MarginPolicy) -> Result<TimeKernel> {
        assert!(ell > 0.0);
        let level = (1.0 / ell).log2().floor() as i32;
        let scale = (2.0f64).powi(level);
        if avail < 2.0 * ell && policy == MarginPolicy::Strict {
            return Err(CiemError::Margin {
                need: format!("2*ell = {:.6}", 2.0 * ell),
                have: format!("{avail:.6}"),
            });
        }
        // Widest useful truncation: scan until the kernel stays below tol.
        let peak = Self::raw(scale, 0.0).abs();
        let tol = 1e-12 * peak;
        let step = 0.05 / scale;
        let mut s_cut = 2.0 * ell;
        let mut quiet = 0usize;
        let mut s = 2.0 * ell;
        while s < 4000.0 / scale {
            if Self::raw(scale, s).abs() < tol {
                quiet += 1;
                if quiet > 40 {
                    break;
                }
            } else {
                quiet = 0;
                s_cut = s;
            }
            s += step;
        }
        let natural = s_cut + 40.0 * step;
        let half_width = natural.min(avail).max(2.0 * ell.min(avail));
        Ok(TimeKernel { level, half_width, clamped: half_width < natural, scale })
    }

    /// Quadrature weights over the input grid for one output time `t`:
    /// returns `(first_index, weights)` with mass renormalized to 1. The
    /// support is clipped to the input window.
    pub fn weights(&self, input: &TimeGrid, t: f64) -> Result<(usize, Vec<f64>)> {
        // Clip symmetrically so the even kernel keeps zero odd moments.
        let hw = self.half_width.min(t - input.t0).min(input.t1() - t);
        if hw <= 0.0 {
            return Err(CiemError::Margin {
                need: "output time strictly inside the input window".into(),
                have: format!("t = {t}"),
            });
        }
        let (lo, hi) = input.window(t - hw, t + hw)?;
        if hi - lo < 2 {
            return Err(CiemError::Margin {
                need: "at least 3 quadrature nodes in kernel support".into(),
                have: format!("{}", hi - lo + 1),
            });
        }
        let mut w: Vec<f64> = (lo..=hi)
            .map(|m| {
                let s = input.time(m) - t;
                let trap = if m == lo || m == hi { 0.5 } else { 1.0 };
                trap * input.dt * Self::raw(self.scale, s)
            })
            .collect();
        let mass: f64 = w.iter().sum();
        if mass.abs() < 1e-8 {
            return Err(CiemError::Margin {
                need: "kernel mass bounded away from zero".into(),
                have: format!("{mass:.3e}"),
            });
        }
        for v in w.iter_mut() {
            *v /= mass;
        }
        Ok((lo, w))
    }

    /// The achieved 1D multiplier at frequency `omega` on a given grid.
    pub fn multiplier(&self, input: &TimeGrid, t: f64, omega: f64) -> Result<f64> {
        let (lo, w) = self.weights(input, t)?;
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let s = input.time(lo + j) - t;
            re += wj * (omega * s).cos();
            im += wj * (omega * s).sin();
        }
        Ok((re * re + im * im).sqrt())
    }
}

/// Apply `U_{<= 1/ell}` to a time-sampled scalar field on `out_grid`.
pub fn mollify_time(
    f: &TimeSampled<ScalarField>,
    ell: f64,
    out_grid: TimeGrid,
    policy: MarginPolicy,
) -> Result<TimeSampled<ScalarField>> {
    let avail_lo = out_grid.t0 - f.grid.t0;
    let avail_hi = f.grid.t1() - out_grid.t1();
    let avail = avail_lo.min(avail_hi);
    if avail < 0.0 {
        return Err(CiemError::Margin {
            need: format!("output [{:.4}, {:.4}] inside input", out_grid.t0, out_grid.t1()),
            have: format!("input [{:.4}, {:.4}]", f.grid.t0, f.grid.t1()),
        });
    }
    let kernel = TimeKernel::new(ell, avail, policy)?;
    let samples: Vec<ScalarField> = out_grid
        .times()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&t| {
            let (lo, w) = kernel.weights(&f.grid, t)?;
            let mut acc = ScalarField::zeros(f.samples[0].lattice);
            for (j, wj) in w.iter().enumerate() {
                acc.axpy(*wj, &f.samples[lo + j]);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(TimeSampled::new(out_grid, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Lattice3;

    fn static_signal(val: impl Fn(f64) -> f64, grid: TimeGrid) -> TimeSampled<ScalarField> {
        let lat = Lattice3::new(8, 2).unwrap();
        TimeSampled::from_fn(grid, |t| ScalarField::constant(lat, val(t)))
    }

    #[test]
    fn constants_are_fixed_points() {
        let input = TimeGrid::new(-4.0, 4.0, 400).unwrap();
        let out = TimeGrid::new(-0.5, 0.5, 20).unwrap();
        let f = static_signal(|_| 3.5, input);
        let g = mollify_time(&f, 0.25, out, MarginPolicy::Strict).unwrap();
        for s in &g.samples {
            assert!((s.mean().re - 3.5).abs() < 1e-10);
        }
    }

    #[test]
    fn low_frequencies_pass() {
        // |omega| <= 2^J: amplitude change below the kernel tolerance. The
        // oracle is the directly evaluated discrete multiplier.
        let ell = 0.25; // J = 2, plateau up to omega = 4
        let input = TimeGrid::new(-30.0, 30.0, 6000).unwrap();
        let kernel = TimeKernel::new(ell, 25.0, MarginPolicy::Strict).unwrap();
        for omega in [0.5, 1.0, 2.0, 4.0] {
            let m = kernel.multiplier(&input, 0.0, omega).unwrap();
            assert!((m - 1.0).abs() < 2e-4, "multiplier at omega {omega}: {m}");
        }
    }

    #[test]
    fn high_frequencies_suppressed() {
        // |omega| >= 2^{J+1}: the profile vanishes; residual is truncation
        // plus quadrature error of the discrete kernel.
        let ell = 0.25;
        let input = TimeGrid::new(-30.0, 30.0, 6000).unwrap();
        let kernel = TimeKernel::new(ell, 25.0, MarginPolicy::Strict).unwrap();
        for omega in [8.0, 12.0, 16.0] {
            let m = kernel.multiplier(&input, 0.0, omega).unwrap();
            assert!(m < 1e-6, "multiplier at omega {omega}: {m}");
        }
    }

    #[test]
    fn strict_margin_violation_errors() {
        let input = TimeGrid::new(-0.1, 0.4, 50).unwrap();
        let out = TimeGrid::new(0.0, 0.3, 10).unwrap();
        let f = static_signal(|_| 1.0, input);
        let err = mollify_time(&f, 0.25, out, MarginPolicy::Strict);
        assert!(err.is_err());
        // Clamp policy proceeds with a truncated kernel.
        let ok = mollify_time(&f, 0.25, out, MarginPolicy::Clamp).unwrap();
        assert!((ok.samples[0].mean().re - 1.0).abs() < 1e-9);
    }
}
