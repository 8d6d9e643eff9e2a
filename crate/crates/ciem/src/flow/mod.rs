//! Backward and forward flow maps of the mollified drift velocity, with
//! gradients, inverses, and determinants.

pub mod interp;
pub mod map;

pub use interp::{SampledScalar, SampledVector};
pub use map::{solve_flow, velocity_at, DriftVelocity, FlowDirection, FlowMap};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Lattice3, ScalarField, TimeGrid, TimeSampled, VectorField};
    use num_complex::Complex64;

    fn lat() -> Lattice3 {
        Lattice3::new(16, 5).unwrap()
    }

    fn static_velocity(v: VectorField, t0: f64, t1: f64, steps: usize) -> DriftVelocity {
        let grid = TimeGrid::new(t0, t1, steps).unwrap();
        DriftVelocity::new(TimeSampled::from_fn(grid, |_| v.clone()))
    }

    /// Smooth shear `v = (a sin(x2), 0, b cos(x1))`.
    fn shear(a: f64, b: f64) -> VectorField {
        let mut v = VectorField::zeros(lat());
        v.comps[0].set_coeff([0, 1, 0], Complex64::new(0.0, -0.5 * a));
        v.comps[0].set_coeff([0, -1, 0], Complex64::new(0.0, 0.5 * a));
        v.comps[2].set_coeff([1, 0, 0], Complex64::new(0.5 * b, 0.0));
        v.comps[2].set_coeff([-1, 0, 0], Complex64::new(0.5 * b, 0.0));
        v
    }

    #[test]
    fn zero_velocity_gives_identity() {
        let vel = static_velocity(VectorField::zeros(lat()), 0.0, 1.0, 10);
        let fm = solve_flow(&vel, 0.5, (0.0, 1.0), FlowDirection::Backward, lat()).unwrap();
        for i in 0..fm.grid.len() {
            assert!(fm.disp[i].sup_norm() < 1e-12);
            assert!(fm.grad[i].sub(&crate::field::TensorField::identity_scaled(lat(), 1.0)).sup_norm() < 1e-12);
            assert!((fm.det_inv[i][0].mean().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_velocity_is_galilean() {
        let c = [0.3, -0.2, 0.1];
        let vel = static_velocity(VectorField::constant(lat(), c), 0.0, 1.0, 10);
        let fm = solve_flow(&vel, 0.0, (0.0, 1.0), FlowDirection::Backward, lat()).unwrap();
        // xi(t, x) = x - c (t - t_u), so displacement is -c t.
        for (i, t) in fm.grid.times().enumerate() {
            for ax in 0..3 {
                let d = fm.disp[i].comps[ax].mean().re;
                assert!((d - (-c[ax] * t)).abs() < 1e-10, "axis {ax} at t={t}: {d}");
            }
        }
    }

    #[test]
    fn forward_backward_composition() {
        let vel = static_velocity(shear(0.4, 0.3), 0.0, 0.4, 16);
        let bwd = solve_flow(&vel, 0.0, (0.0, 0.4), FlowDirection::Backward, lat()).unwrap();
        let fwd = solve_flow(&vel, 0.0, (0.0, 0.4), FlowDirection::Forward, lat()).unwrap();
        let t = 0.4;
        let mut worst = 0.0f64;
        for p in 0..300 {
            let x = [
                0.021 * p as f64 % std::f64::consts::TAU,
                (1.3 + 0.037 * p as f64) % std::f64::consts::TAU,
                (4.0 - 0.013 * p as f64).rem_euclid(std::f64::consts::TAU),
            ];
            let xi = bwd.eval(t, x);
            let back = fwd.eval(t, xi);
            for ax in 0..3 {
                let mut d = (back[ax] - x[ax]).abs() % std::f64::consts::TAU;
                if d > std::f64::consts::PI {
                    d = std::f64::consts::TAU - d;
                }
                worst = worst.max(d);
            }
        }
        assert!(worst < 1e-6, "composition defect {worst}");
    }

    #[test]
    fn jacobian_inverse_consistency() {
        let vel = static_velocity(shear(0.5, -0.4), 0.0, 0.3, 12);
        let fm = solve_flow(&vel, 0.15, (0.0, 0.3), FlowDirection::Backward, lat()).unwrap();
        for i in [0, fm.grid.len() / 2, fm.grid.len() - 1] {
            let prod = mat_product(&fm.grad[i], &fm.grad_inv[i]);
            let err = prod.sub(&crate::field::TensorField::identity_scaled(lat(), 1.0)).sup_norm();
            assert!(err < 1e-8, "grad * grad_inv defect {err}");
        }
    }

    fn mat_product(
        a: &crate::field::TensorField,
        b: &crate::field::TensorField,
    ) -> crate::field::TensorField {
        let mut out = crate::field::TensorField::zeros(a.lattice());
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out.comp_mut(i, j)
                        .add_assign(&a.comp(i, k).multiply(b.comp(k, j)).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn transport_pde_residual() {
        // dt xi + (v . grad) xi = 0: compare discrete time derivative of the
        // stored map against the stored advective derivative.
        let vel = static_velocity(shear(0.4, 0.2), 0.0, 0.2, 40);
        let fm = solve_flow(&vel, 0.1, (0.0, 0.2), FlowDirection::Backward, lat()).unwrap();
        let mid = fm.grid.len() / 2;
        let mut worst = 0.0f64;
        for ax in 0..3 {
            let vals: Vec<Vec<f64>> = fm
                .disp
                .iter()
                .map(|d| d.comps[ax].to_grid(16).values.iter().map(|v| v.re).collect())
                .collect();
            let dtg = fm.dt_map[mid].comps[ax].to_grid(16);
            for p in (0..vals[0].len()).step_by(7) {
                let series: Vec<f64> = vals.iter().map(|s| s[p]).collect();
                let d = crate::field::ddt_scalar(&series, fm.grid.dt, mid);
                worst = worst.max((d - dtg.values[p].re).abs());
            }
        }
        assert!(worst < 1e-7, "transport residual {worst}");
    }

    #[test]
    fn phase_conservation_along_flow() {
        // D_t e^{i l k . xi} = i l e^{...} k . (dt xi + (v.grad) xi) stays small.
        let vel = static_velocity(shear(0.3, 0.5), 0.0, 0.2, 40);
        let fm = solve_flow(&vel, 0.0, (0.0, 0.2), FlowDirection::Backward, lat()).unwrap();
        let lam = 4.0;
        let k = [1.0, 2.0, 0.0];
        let mid = fm.grid.len() / 2;
        // Evaluate the phase on a set of points over time, difference in t.
        let n = 16;
        let mut worst = 0.0f64;
        for p in (0..n * n * n).step_by(11) {
            let series: Vec<Complex64> = (0..fm.grid.len())
                .map(|i| {
                    let g: Vec<_> =
                        fm.disp[i].comps.iter().map(|c| c.to_grid(n).values[p]).collect();
                    let node = fm.disp[i].comps[0].to_grid(n).node(p);
                    let xi =
                        [node[0] + g[0].re, node[1] + g[1].re, node[2] + g[2].re];
                    let phase = lam * (k[0] * xi[0] + k[1] * xi[1] + k[2] * xi[2]);
                    Complex64::new(0.0, phase).exp()
                })
                .collect();
            let re: Vec<f64> = series.iter().map(|z| z.re).collect();
            let im: Vec<f64> = series.iter().map(|z| z.im).collect();
            let dre = crate::field::ddt_scalar(&re, fm.grid.dt, mid);
            let dim = crate::field::ddt_scalar(&im, fm.grid.dt, mid);
            // Advective part: i lam k . ((v.grad) xi) e^{i phase}; with the
            // stored dt_map this must cancel the time derivative.
            let node = fm.disp[mid].comps[0].to_grid(n).node(p);
            let g: Vec<_> = fm.disp[mid].comps.iter().map(|c| c.to_grid(n).values[p]).collect();
            let xi = [node[0] + g[0].re, node[1] + g[1].re, node[2] + g[2].re];
            let phase = lam * (k[0] * xi[0] + k[1] * xi[1] + k[2] * xi[2]);
            let e = Complex64::new(0.0, phase).exp();
            let dt_xi: Vec<_> =
                fm.dt_map[mid].comps.iter().map(|c| c.to_grid(n).values[p].re).collect();
            let adv = Complex64::new(0.0, lam * (k[0] * dt_xi[0] + k[1] * dt_xi[1] + k[2] * dt_xi[2])) * e;
            let total = (Complex64::new(dre, dim) - adv).norm();
            worst = worst.max(total);
        }
        assert!(worst < 1e-6, "phase conservation defect {worst}");
    }

    #[test]
    fn fourth_order_convergence() {
        // Composition error shrinks ~16x when the ODE substep halves.
        let run = |steps: usize| -> f64 {
            let grid = TimeGrid::new(0.0, 0.4, steps).unwrap();
            let v = shear(0.8, 0.7);
            // Time-varying scaling to exercise the integrator in t.
            let vel = DriftVelocity::new(TimeSampled::from_fn(grid, |t| {
                v.scale(1.0 + 0.5 * (3.0 * t).sin())
            }));
            let fwd = solve_flow(&vel, 0.0, (0.0, 0.4), FlowDirection::Forward, lat()).unwrap();
            let bwd = solve_flow(&vel, 0.0, (0.0, 0.4), FlowDirection::Backward, lat()).unwrap();
            let mut worst = 0.0f64;
            for p in 0..120 {
                let x = [0.05 * p as f64 % 6.0, (2.0 + 0.041 * p as f64) % 6.0, 1.0];
                let xi = bwd.eval(0.4, x);
                let back = fwd.eval(0.4, xi);
                for ax in 0..3 {
                    let mut d = (back[ax] - x[ax]).abs() % std::f64::consts::TAU;
                    if d > std::f64::consts::PI {
                        d = std::f64::consts::TAU - d;
                    }
                    worst = worst.max(d);
                }
            }
            worst
        };
        let coarse = run(8);
        let fine = run(16);
        // Interpolation floors the ratio; demand at least ~8x.
        assert!(
            fine < coarse / 8.0 || fine < 5e-9,
            "no 4th-order convergence: {coarse} -> {fine}"
        );
    }
}
