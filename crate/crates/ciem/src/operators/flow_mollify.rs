//! Mollification along flow trajectories:
//! `(rho_d *_Phi F)(t, x) = int F(t+s, Phi(t+s, x; t)) rho_d(s) ds`.
//!
//! Trajectory positions come from a forward/backward flow-map pair about a
//! common anchor (`Phi(t+s, x; t) = Psi(t+s, Psi^{-1}(t, x))`), the field is
//! looked up with trilinear periodic interpolation, and the quadrature runs
//! over the input sample times inside the kernel support, renormalized to
//! unit mass so constants are fixed points.

use rayon::prelude::*;

use super::bump::{phi_star, phi_star_mass, rho};
use crate::error::{CiemError, Result};
use crate::field::{GridField, Lattice3, ScalarField, TimeGrid, TimeSampled};
use crate::flow::{FlowDirection, FlowMap, SampledScalar};
use num_complex::Complex64;

/// Derivative of the conventional mollifier (for the advective identity).
pub fn rho_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = s * s - 1.0;
        phi_star(s) * (-2.0 * s / (d * d)) / phi_star_mass()
    }
}

struct TrajectoryQuadrature<'a> {
    fwd: &'a FlowMap,
    bwd: &'a FlowMap,
    delta: f64,
}

impl<'a> TrajectoryQuadrature<'a> {
    fn check_cover(&self, f_grid: &TimeGrid, out_grid: &TimeGrid) -> Result<()> {
        let need_lo = out_grid.t0 - self.delta;
        let need_hi = out_grid.t1() + self.delta;
        for (name, g) in [("field", f_grid), ("forward flow", &self.fwd.grid), ("backward flow", &self.bwd.grid)]
        {
            if need_lo < g.t0 - 1e-10 || need_hi > g.t1() + 1e-10 {
                return Err(CiemError::Margin {
                    need: format!("[{need_lo:.4}, {need_hi:.4}] for {name}"),
                    have: format!("[{:.4}, {:.4}]", g.t0, g.t1()),
                });
            }
        }
        if self.fwd.direction != FlowDirection::Forward
            || self.bwd.direction != FlowDirection::Backward
        {
            return Err(CiemError::Flow("trajectory pair needs (forward, backward) maps".into()));
        }
        Ok(())
    }
}

/// Apply `rho_delta *_Phi` to a time-sampled scalar field.
///
/// `weight` selects the kernel: `rho_delta` for the mollifier itself or its
/// derivative for the advective-derivative identity (then no mass
/// renormalization is applied and the result is scaled by `-1`).
pub fn mollify_along_flow(
    f: &TimeSampled<ScalarField>,
    fwd: &FlowMap,
    bwd: &FlowMap,
    delta: f64,
    out_grid: TimeGrid,
) -> Result<TimeSampled<ScalarField>> {
    flow_convolution(f, fwd, bwd, delta, out_grid, KernelKind::Mollifier)
}

/// `-int F(t+s, Phi(t+s, x; t)) rho_delta'(s) ds`, the advective derivative
/// of the flow mollification.
pub fn flow_mollify_advective(
    f: &TimeSampled<ScalarField>,
    fwd: &FlowMap,
    bwd: &FlowMap,
    delta: f64,
    out_grid: TimeGrid,
) -> Result<TimeSampled<ScalarField>> {
    flow_convolution(f, fwd, bwd, delta, out_grid, KernelKind::Derivative)
}

#[derive(Clone, Copy, PartialEq)]
enum KernelKind {
    Mollifier,
    Derivative,
}

fn flow_convolution(
    f: &TimeSampled<ScalarField>,
    fwd: &FlowMap,
    bwd: &FlowMap,
    delta: f64,
    out_grid: TimeGrid,
    kind: KernelKind,
) -> Result<TimeSampled<ScalarField>> {
    let quad = TrajectoryQuadrature { fwd, bwd, delta };
    quad.check_cover(&f.grid, &out_grid)?;
    let lattice = f.samples[0].lattice;
    let n = lattice.eval_grid();

    // Trilinear interpolants of the field per input sample.
    let field_samps: Vec<SampledScalar> =
        f.samples.iter().map(|s| SampledScalar::new(s, 4)).collect();

    let out: Vec<ScalarField> = out_grid
        .times()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&t| {
            // Quadrature nodes: input samples in [t - delta, t + delta].
            let (lo, hi) = f.grid.window(t - delta, t + delta)?;
            let mut weights = Vec::with_capacity(hi - lo + 1);
            for m in lo..=hi {
                let s = f.grid.time(m) - t;
                let trap = if m == lo || m == hi { 0.5 } else { 1.0 };
                let w = match kind {
                    KernelKind::Mollifier => rho(s / delta) / delta,
                    KernelKind::Derivative => rho_prime(s / delta) / (delta * delta),
                };
                weights.push(trap * f.grid.dt * w);
            }
            if kind == KernelKind::Mollifier {
                let mass: f64 = weights.iter().sum();
                if mass.abs() < 1e-8 {
                    return Err(CiemError::Margin {
                        need: "kernel support resolved by field samples".into(),
                        have: format!("mass {mass:.3e}"),
                    });
                }
                for w in weights.iter_mut() {
                    *w /= mass;
                }
            }

            let mut values = vec![Complex64::default(); n * n * n];
            for flat in 0..values.len() {
                let x = GridField { n, values: Vec::new() }.node_of(flat);
                let label = bwd.eval(t, x);
                let mut acc = 0.0;
                for (j, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let ts = f.grid.time(lo + j);
                    let pos = fwd.eval(ts, label);
                    acc += w * field_samps[lo + j].trilinear(pos);
                }
                values[flat] = Complex64::new(
                    if kind == KernelKind::Derivative { -acc } else { acc },
                    0.0,
                );
            }
            Ok(ScalarField::from_grid(lattice, &GridField { n, values }))
        })
        .collect::<Result<_>>()?;
    Ok(TimeSampled::new(out_grid, out))
}

impl GridField {
    /// Node coordinate without materialized values (helper for assembly).
    pub fn node_of(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        let j3 = flat % n;
        let j2 = (flat / n) % n;
        let j1 = flat / (n * n);
        Lattice3::node_on(n, [j1, j2, j3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{TimeGrid, VectorField};
    use crate::flow::{solve_flow, DriftVelocity};
    use crate::operators::time_mollify::{mollify_time, MarginPolicy};

    fn lat() -> Lattice3 {
        Lattice3::new(16, 5).unwrap()
    }

    fn shear() -> VectorField {
        let mut v = VectorField::zeros(lat());
        v.comps[0].set_coeff([0, 1, 0], Complex64::new(0.0, -0.25));
        v.comps[0].set_coeff([0, -1, 0], Complex64::new(0.0, 0.25));
        v
    }

    fn flows(v: VectorField, t0: f64, t1: f64, steps: usize) -> (DriftVelocity, FlowMap, FlowMap) {
        let grid = TimeGrid::new(t0, t1, steps).unwrap();
        let vel = DriftVelocity::new(TimeSampled::from_fn(grid, |_| v.clone()));
        let anchor = 0.5 * (t0 + t1);
        let fwd = solve_flow(&vel, anchor, (t0, t1), FlowDirection::Forward, lat()).unwrap();
        let bwd = solve_flow(&vel, anchor, (t0, t1), FlowDirection::Backward, lat()).unwrap();
        (vel, fwd, bwd)
    }

    #[test]
    fn constants_are_fixed_points() {
        let (_, fwd, bwd) = flows(shear(), -0.5, 0.5, 40);
        let f = TimeSampled::from_fn(fwd.grid, |_| ScalarField::constant(lat(), 2.25));
        let out_grid = TimeGrid::new(-0.1, 0.1, 8).unwrap();
        let g = mollify_along_flow(&f, &fwd, &bwd, 0.2, out_grid).unwrap();
        for s in &g.samples {
            assert!((s.mean().re - 2.25).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_drift_reduces_to_plain_time_mollification() {
        // With no drift the trajectories are vertical lines and the operator
        // is a plain 1D convolution with rho_delta; cross-check against a
        // direct quadrature of that convolution on the same sample grid.
        let (_, fwd, bwd) = flows(VectorField::zeros(lat()), -1.0, 1.0, 100);
        let grid = TimeGrid::new(-1.0, 1.0, 100).unwrap();
        let signal = |t: f64| (1.3 * t).sin() + 0.4 * (0.7 * t).cos();
        let f = TimeSampled::from_fn(grid, |t| ScalarField::constant(lat(), signal(t)));
        let out_grid = TimeGrid::new(-0.2, 0.2, 10).unwrap();
        let delta = 0.1;
        let a = mollify_along_flow(&f, &fwd, &bwd, delta, out_grid).unwrap();
        for (i, t) in out_grid.times().enumerate() {
            let (lo, hi) = grid.window(t - delta, t + delta).unwrap();
            let mut acc = 0.0;
            let mut mass = 0.0;
            for m in lo..=hi {
                let s = grid.time(m) - t;
                let trap = if m == lo || m == hi { 0.5 } else { 1.0 };
                let w = trap * grid.dt * rho(s / delta) / delta;
                acc += w * signal(grid.time(m));
                mass += w;
            }
            let oracle = acc / mass;
            assert!(
                (a.samples[i].mean().re - oracle).abs() < 1e-8,
                "plain-convolution mismatch at t={t}"
            );
        }
        // Sanity: the smooth-kernel low-pass agrees with it at low frequency
        // (limited by the truncated Gevrey tail of the low-pass kernel).
        let b = mollify_time(&f, delta, out_grid, MarginPolicy::Strict).unwrap();
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert!((sa.mean().re - sb.mean().re).abs() < 2e-2);
        }
    }

    #[test]
    fn transported_fields_are_invariant() {
        // F(t, x) = G(xi(t, x)) is constant along trajectories.
        let (_, fwd, bwd) = flows(shear(), -0.4, 0.4, 60);
        let mut g0 = ScalarField::zeros(lat());
        g0.set_coeff([1, 0, 0], Complex64::new(0.5, 0.0));
        g0.set_coeff([-1, 0, 0], Complex64::new(0.5, 0.0));
        let samp = crate::flow::SampledScalar::new(&g0, 4);
        let n = lat().eval_grid();
        let f = TimeSampled::from_fn(fwd.grid, |t| {
            let mut vals = vec![Complex64::default(); n * n * n];
            for flat in 0..vals.len() {
                let x = GridField { n, values: Vec::new() }.node_of(flat);
                let xi = bwd.eval(t, x);
                vals[flat] = Complex64::new(samp.tricubic(xi), 0.0);
            }
            ScalarField::from_grid(lat(), &GridField { n, values: vals })
        });
        let out_grid = TimeGrid::new(-0.05, 0.05, 4).unwrap();
        let out = mollify_along_flow(&f, &fwd, &bwd, 0.25, out_grid).unwrap();
        let mid = out.samples.len() / 2;
        let t_mid = out.grid.time(mid);
        let idx = f.grid.floor_index(t_mid);
        let diff = out.samples[mid].sub(&f.samples[idx]).sup_norm();
        // Bounded by the trilinear lookup error of the k = 1 payload.
        assert!(diff < 5e-3, "transported field moved by {diff}");
    }

    #[test]
    fn advective_derivative_identity() {
        // D_t (rho *_Phi F) computed two ways: kernel-derivative quadrature
        // versus discrete time differencing along trajectories.
        let (_, fwd, bwd) = flows(shear(), -0.5, 0.5, 100);
        let f = TimeSampled::from_fn(fwd.grid, |t| {
            ScalarField::constant(lat(), (1.3 * t).sin())
        });
        let delta = 0.15;
        let out_grid = TimeGrid::new(-0.2, 0.2, 16).unwrap();
        let smooth = mollify_along_flow(&f, &fwd, &bwd, delta, out_grid).unwrap();
        let dsm = flow_mollify_advective(&f, &fwd, &bwd, delta, out_grid).unwrap();
        // Spatially constant input: advective derivative = plain d/dt.
        let series: Vec<f64> = smooth.samples.iter().map(|s| s.mean().re).collect();
        let mid = series.len() / 2;
        let d = crate::field::ddt_scalar(&series, out_grid.dt, mid);
        let rhs = dsm.samples[mid].mean().re;
        assert!((d - rhs).abs() < 2e-3 * d.abs().max(1.0), "D_t defect {}", (d - rhs).abs());
    }
}
