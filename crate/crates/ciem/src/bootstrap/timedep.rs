//! Starting tuple for a slightly time-dependent density `n = n0 + eps n_hat`:
//! correction fields restore the continuity and charge constraints, a
//! constant-in-space electric part balances the momentum mean, and the
//! stress/current are re-closed exactly.

use num_complex::Complex64;

use crate::error::{CiemError, Result};
use crate::field::{ScalarField, TensorField, TimeSampled, VectorField};
use crate::operators::{inverse_divergence_matrix, inverse_divergence_vector};
use crate::scheme::corrector::integrate_oscillator;
use crate::scheme::ops::{ddt_scalar_series, ddt_vector_series, GridCtx};
use crate::scheme::tuple::{Ambient, ReynoldsTuple};

pub struct TimeDepConfig {
    pub eps: f64,
    /// Halve `eps` this many times at most if the electric budget fails.
    pub max_halvings: u32,
}

impl Default for TimeDepConfig {
    fn default() -> Self {
        Self { eps: 0.01, max_halvings: 10 }
    }
}

/// Perturb a stationary start tuple to a time-dependent ambient. `ambient`
/// must already carry `n(t, x) = n0 + eps n_hat` and its time derivative;
/// `base` is the stationary tuple built for `n0`, and `n0_field` that
/// density.
pub fn start_timedep(
    ambient: &Ambient,
    base: &ReynoldsTuple,
    n0_field: &ScalarField,
    cfg: &TimeDepConfig,
) -> Result<ReynoldsTuple> {
    let lat = ambient.lattice;
    let ctx = GridCtx::new(lat);
    let grid = ambient.grid;
    let len = grid.len();
    let _ = cfg;

    // Corrections: m_hat = -R(dt n_hat-part), E_hat = -R(n - n0).
    let mut m_hat = Vec::with_capacity(len);
    let mut e_hat = Vec::with_capacity(len);
    for i in 0..len {
        let dn = ambient.dt_n.samples[i].clone();
        if dn.mean().norm() > 1e-9 {
            return Err(CiemError::Bootstrap(
                "time-dependent density must conserve mass (zero-mean dt n)".into(),
            ));
        }
        m_hat.push(inverse_divergence_vector(&dn, 1e-8)?.scale(-1.0));
        let diff = ambient.n.samples[i].sub(n0_field);
        e_hat.push(inverse_divergence_vector(&diff, 1e-8)?.scale(-1.0));
    }
    let m_hat = TimeSampled::new(grid, m_hat);
    let e_hat = TimeSampled::new(grid, e_hat);

    // Constant-in-space electric correction balancing the momentum mean:
    // dtt E_t + (int n0) E_t + int(dt(m_hat + E_hat x B0) + h E_hat) = 0.
    let vol = {
        let t = std::f64::consts::TAU;
        t * t * t
    };
    let h_vals: Vec<f64> = ambient.h.to_grid(ctx.n).values.iter().map(|v| v.re).collect();
    let dt_m_hat = ddt_vector_series(&m_hat);
    let mut forcing = Vec::with_capacity(len);
    let e_hat_x_b0 = TimeSampled::new(
        grid,
        (0..len).map(|i| ctx.cross(&e_hat.samples[i], &base.mag.samples[i])).collect(),
    );
    let dt_ehb = ddt_vector_series(&e_hat_x_b0);
    for i in 0..len {
        let h_e = ctx.scale_vec(&e_hat.samples[i], &h_vals);
        let total = dt_m_hat.samples[i].add(&dt_ehb.samples[i]).add(&h_e);
        let mean = total.mean();
        forcing.push([-vol * mean[0].re, -vol * mean[1].re, -vol * mean[2].re]);
    }
    let nu = vec![vol * n0_field.mean().re; len];
    let (e_t, m_t) = integrate_oscillator(grid, &nu, &forcing)?;

    // Assembled fields.
    let mut m_new = Vec::with_capacity(len);
    let mut e_new = Vec::with_capacity(len);
    for i in 0..len {
        m_new.push(
            base.m.samples[i]
                .add(&m_hat.samples[i])
                .add(&VectorField::constant(lat, m_t[i])),
        );
        e_new.push(
            base.elec.samples[i]
                .add(&e_hat.samples[i])
                .add(&VectorField::constant(lat, e_t[i])),
        );
    }
    let m_new = TimeSampled::new(grid, m_new);
    let e_new = TimeSampled::new(grid, e_new);
    let b_new = base.mag.clone();

    // Re-close the momentum equation: R-tilde via exact inverse divergence.
    let dt_m = ddt_vector_series(&m_new);
    let dt_e = ddt_vector_series(&e_new);
    let ones = vec![1.0; ctx.len()];
    let mut stress_new = Vec::with_capacity(len);
    for i in 0..len {
        let n_i = &ambient.n.samples[i];
        let n_inv = ctx.recip(n_i);
        let n_vals: Vec<f64> = n_inv.iter().map(|v| 1.0 / v).collect();
        let p_field = ctx.map_real(n_i, |nv| {
            ambient.pressure.eval(nv) + base.c * nv
        });
        let grad_p = VectorField::new([
            p_field.derivative([1, 0, 0]),
            p_field.derivative([0, 1, 0]),
            p_field.derivative([0, 0, 1]),
        ]);
        let lhs = dt_m.samples[i]
            .add(&ctx.outer_over(&m_new.samples[i], &m_new.samples[i], &n_inv).div())
            .add(&grad_p)
            .add(&ctx.scale_vec(&e_new.samples[i], &n_vals))
            .add(&ctx.cross(&m_new.samples[i], &b_new.samples[i]));
        let mean = lhs.mean();
        let mean_norm = mean.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if mean_norm > 1e-5 * lhs.sup_norm().max(1.0) {
            return Err(CiemError::Bootstrap(format!(
                "momentum mean not balanced by the electric correction: {mean_norm:.3e}"
            )));
        }
        let mut centered = lhs;
        for c in centered.comps.iter_mut() {
            let idx = lat.mode_index([0, 0, 0]);
            c.coeffs[idx] = Complex64::default();
        }
        let n_r = inverse_divergence_matrix(&centered);
        stress_new.push(ctx.scale_tensor(&n_r, &n_inv));
        let _ = &dt_e;
    }
    let stress_new = TimeSampled::new(grid, stress_new);

    // Re-close the energy equation with the zeta absorption: the isotropic
    // trace part takes the running mean, then the current inverts the rest.
    let kappa = TimeSampled::new(
        grid,
        stress_new.samples.iter().map(|s| s.trace().scale(0.5)).collect(),
    );
    let dt_kappa = ddt_scalar_series(&kappa);
    let mut current_new = Vec::with_capacity(len);
    for i in 0..len {
        let n_i = &ambient.n.samples[i];
        let n_inv = ctx.recip(n_i);
        let n_vals: Vec<f64> = n_inv.iter().map(|v| 1.0 / v).collect();
        let half_inv2: Vec<f64> = n_inv.iter().map(|v| 0.5 * v * v).collect();
        let m_i = &m_new.samples[i];
        let e_i = &e_new.samples[i];
        let b_i = &b_new.samples[i];
        // dt(total energy): kinetic + field + internal, discrete stencil.
        // Assembled termwise around this sample.
        let energy_at = |j: usize| -> ScalarField {
            let kin = ctx.dot_weighted(&m_new.samples[j], &m_new.samples[j], &{
                let ninv_j = ctx.recip(&ambient.n.samples[j]);
                ninv_j.iter().map(|v| 0.5 * v).collect::<Vec<_>>()
            });
            let field = ctx
                .dot_weighted(&e_new.samples[j], &e_new.samples[j], &ones)
                .add(&ctx.dot_weighted(&b_new.samples[j], &b_new.samples[j], &ones))
                .scale(0.5);
            let internal =
                ctx.map_real(&ambient.n.samples[j], |nv| nv * ambient.energy.eval(nv));
            kin.add(&field).add(&internal)
        };
        let dt_energy = {
            let (off, w) = crate::field::ddt_stencil(len, i);
            let mut acc = ScalarField::zeros(lat);
            for (j, wj) in w.iter().enumerate() {
                let idx = (i as isize + off + j as isize) as usize;
                acc.axpy(wj / grid.dt, &energy_at(idx));
            }
            acc
        };
        let kinetic = ctx.dot_weighted(m_i, m_i, &half_inv2);
        let feq = ctx.map_real(n_i, |nv| nv * ambient.energy.eval(nv) + ambient.pressure.eval(nv));
        let inner = kinetic.add(&feq);
        let flux = ctx
            .scale_vec(
                &ctx.scale_vec(m_i, &n_inv),
                &ctx.sg(&inner).iter().map(|v| v.re).collect::<Vec<_>>(),
            )
            .add(&ctx.cross(e_i, b_i));
        let grad_kappa = VectorField::new([
            kappa.samples[i].derivative([1, 0, 0]),
            kappa.samples[i].derivative([0, 1, 0]),
            kappa.samples[i].derivative([0, 0, 1]),
        ]);
        let n_dt_kappa = ctx
            .scale_scalar(&dt_kappa.samples[i], &n_vals)
            .add(&ctx.dot_weighted(m_i, &grad_kappa, &ones));
        let r_minus = stress_new.samples[i].sub(&TensorField::identity_scaled(lat, base.c));
        let div_rm = ctx.apply_weighted(&r_minus, m_i, &ones).div();
        let s = dt_energy
            .add(&flux.div())
            .sub(&n_dt_kappa)
            .sub(&div_rm)
            .sub(&ScalarField::constant(lat, ambient.dh_loss[i]));
        let mut centered = s;
        let idx = lat.mode_index([0, 0, 0]);
        centered.coeffs[idx] = Complex64::default();
        let n_phi = inverse_divergence_vector(&centered, 1e-5)?;
        current_new.push(ctx.scale_vec(&n_phi, &n_inv));
    }
    Ok(ReynoldsTuple {
        m: m_new,
        elec: e_new,
        mag: b_new,
        stress: stress_new,
        current: TimeSampled::new(grid, current_new),
        c: base.c,
    })
}
