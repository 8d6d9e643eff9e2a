//! Maxwell-subsystem residuals of a space-time `(m, E, B)` triple, with
//! second-order centered time differences (the quoted convergence rates pin
//! the stencil order).

use crate::field::{ScalarField, TimeSampled, VectorField};

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MaxwellResiduals {
    /// `|dt E - curl B - m|` (sup over interior samples).
    pub ampere: f64,
    /// `|dt B + curl E|`.
    pub faraday: f64,
    /// `|div E - rho|` against the supplied charge target.
    pub gauss_e: f64,
    /// `|div B|`.
    pub gauss_b: f64,
    /// `|div m|`.
    pub div_m: f64,
    /// Scale used for the relative figures: max field sup.
    pub scale: f64,
}

impl MaxwellResiduals {
    pub fn relative(&self) -> MaxwellResiduals {
        let s = self.scale.max(1e-300);
        MaxwellResiduals {
            ampere: self.ampere / s,
            faraday: self.faraday / s,
            gauss_e: self.gauss_e / s,
            gauss_b: self.gauss_b / s,
            div_m: self.div_m / s,
            scale: 1.0,
        }
    }
}

/// 2nd-order centered time derivative of a sampled vector field at `i`.
pub fn ddt2_vector(series: &TimeSampled<VectorField>, i: usize) -> VectorField {
    let dt = series.grid.dt;
    let n = series.samples.len();
    assert!(n >= 3);
    if i == 0 {
        let mut out = series.samples[0].scale(-1.5);
        out = out.add(&series.samples[1].scale(2.0));
        out = out.add(&series.samples[2].scale(-0.5));
        out.scale(1.0 / dt)
    } else if i + 1 == n {
        let mut out = series.samples[n - 1].scale(1.5);
        out = out.add(&series.samples[n - 2].scale(-2.0));
        out = out.add(&series.samples[n - 3].scale(0.5));
        out.scale(1.0 / dt)
    } else {
        series.samples[i + 1].sub(&series.samples[i - 1]).scale(1.0 / (2.0 * dt))
    }
}

/// Residuals of the Maxwell subsystem for a sampled triple. `charge` is the
/// target of `div E` (zero for source-free blocks, `h - n` for tuples).
pub fn maxwell_residual(
    m: &TimeSampled<VectorField>,
    e: &TimeSampled<VectorField>,
    b: &TimeSampled<VectorField>,
    charge: Option<&ScalarField>,
) -> MaxwellResiduals {
    let n = m.samples.len();
    let mut out = MaxwellResiduals {
        ampere: 0.0,
        faraday: 0.0,
        gauss_e: 0.0,
        gauss_b: 0.0,
        div_m: 0.0,
        scale: 0.0,
    };
    // Interior samples only: the one-sided stencils at the ends are first
    // used by callers that care about boundary behavior.
    for i in 1..n.saturating_sub(1) {
        let dte = ddt2_vector(e, i);
        let dtb = ddt2_vector(b, i);
        let amp = dte.sub(&b.samples[i].curl()).sub(&m.samples[i]);
        let far = dtb.add(&e.samples[i].curl());
        out.ampere = out.ampere.max(amp.sup_norm());
        out.faraday = out.faraday.max(far.sup_norm());
        let mut div_e = e.samples[i].div();
        if let Some(rho) = charge {
            div_e = div_e.sub(rho);
        }
        out.gauss_e = out.gauss_e.max(div_e.sup_norm());
        out.gauss_b = out.gauss_b.max(b.samples[i].div().sup_norm());
        out.div_m = out.div_m.max(m.samples[i].div().sup_norm());
        out.scale = out
            .scale
            .max(m.samples[i].sup_norm())
            .max(e.samples[i].sup_norm())
            .max(b.samples[i].sup_norm());
    }
    out
}
