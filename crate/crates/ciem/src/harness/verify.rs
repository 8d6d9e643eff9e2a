//! Residuals of the five relaxed-system equations for a tuple, evaluated
//! with the shared discrete conventions (4th-order time stencils, common
//! dealiased product grid, spectral space operators). This is the single
//! source of truth the acceptance criteria run against.

use serde::Serialize;

use crate::error::Result;
use crate::field::{ScalarField, TensorField, TimeGrid, TimeSampled, VectorField};
use crate::scheme::ops::{ddt_scalar_series, ddt_vector_series, GridCtx};
use crate::scheme::tuple::{Ambient, ReynoldsTuple};

#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct EquationResidual {
    /// Sup of the residual over the window, relative to the term scale.
    pub sup_rel: f64,
    /// Discrete L2 (mean-square in space, sup in time), relative.
    pub l2_rel: f64,
    /// The normalization used.
    pub scale: f64,
}

fn residual_of(res: &VectorField, scale: f64) -> (f64, f64) {
    (res.sup_norm() / scale.max(1e-300), res.l2_mean_sq().sqrt() / scale.max(1e-300))
}

#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct ResidualTable {
    pub continuity: EquationResidual,
    pub momentum: EquationResidual,
    pub ampere: EquationResidual,
    pub gauss_e: EquationResidual,
    pub faraday: EquationResidual,
    pub gauss_b: EquationResidual,
    pub energy: EquationResidual,
}

/// Evaluate the residual table on `window` (a sub-interval of the tuple).
pub fn verify(
    tuple: &ReynoldsTuple,
    ambient: &Ambient,
    window: (f64, f64),
) -> Result<ResidualTable> {
    let lat = ambient.lattice;
    let ctx = GridCtx::new(lat);
    let grid = tuple.grid();
    let (wlo, whi) = grid.window(window.0, window.1)?;
    let (alo, _) = ambient.grid.window(grid.t0, grid.t1())?;
    let ones = vec![1.0; ctx.len()];

    let dt_m = ddt_vector_series(&tuple.m);
    let dt_e = ddt_vector_series(&tuple.elec);
    let dt_b = ddt_vector_series(&tuple.mag);

    // kappa and the total energy density series (for the energy stencil).
    let kappa = TimeSampled::new(
        grid,
        tuple.stress.samples.iter().map(|s| s.trace().scale(0.5)).collect(),
    );
    let dt_kappa = ddt_scalar_series(&kappa);
    let energy_density = TimeSampled::new(
        grid,
        (0..grid.len())
            .map(|i| {
                let n_i = &ambient.n.samples[alo + i];
                let n_inv = ctx.recip(n_i);
                let half_inv: Vec<f64> = n_inv.iter().map(|v| 0.5 * v).collect();
                let kin = ctx.dot_weighted(&tuple.m.samples[i], &tuple.m.samples[i], &half_inv);
                let field = ctx
                    .dot_weighted(&tuple.elec.samples[i], &tuple.elec.samples[i], &ones)
                    .add(&ctx.dot_weighted(&tuple.mag.samples[i], &tuple.mag.samples[i], &ones))
                    .scale(0.5);
                let internal = ctx.map_real(n_i, |nv| nv * ambient.energy.eval(nv));
                kin.add(&field).add(&internal)
            })
            .collect(),
    );
    let dt_energy = ddt_scalar_series(&energy_density);

    let mut table = ResidualTable::default();
    for i in wlo..=whi {
        let n_i = &ambient.n.samples[alo + i];
        let n_inv = ctx.recip(n_i);
        let n_vals: Vec<f64> = n_inv.iter().map(|v| 1.0 / v).collect();
        let m_i = &tuple.m.samples[i];
        let e_i = &tuple.elec.samples[i];
        let b_i = &tuple.mag.samples[i];

        // Continuity.
        let cont = ambient.dt_n.samples[alo + i].add(&m_i.div());
        let cont_scale = m_i.jacobian().sup_norm().max(1.0);
        let s = cont.sup_norm() / cont_scale;
        table.continuity.sup_rel = table.continuity.sup_rel.max(s);
        table.continuity.l2_rel =
            table.continuity.l2_rel.max(cont.l2_mean_sq().sqrt() / cont_scale);
        table.continuity.scale = cont_scale;

        // Momentum.
        let p_field = ctx.map_real(n_i, |nv| ambient.pressure.eval(nv));
        let grad_p = VectorField::new([
            p_field.derivative([1, 0, 0]),
            p_field.derivative([0, 1, 0]),
            p_field.derivative([0, 0, 1]),
        ]);
        let conv = ctx.outer_over(m_i, m_i, &n_inv).div();
        let n_e = ctx.scale_vec(e_i, &n_vals);
        let m_x_b = ctx.cross(m_i, b_i);
        let r_minus = tuple.stress.samples[i].sub(&TensorField::identity_scaled(lat, tuple.c));
        let div_nr = ctx.scale_tensor(&r_minus, &n_vals).div();
        let mom = dt_m.samples[i]
            .add(&conv)
            .add(&grad_p)
            .add(&n_e)
            .add(&m_x_b)
            .sub(&div_nr);
        let mom_scale = [
            dt_m.samples[i].sup_norm(),
            conv.sup_norm(),
            grad_p.sup_norm(),
            n_e.sup_norm(),
            m_x_b.sup_norm(),
            div_nr.sup_norm(),
        ]
        .into_iter()
        .fold(0.0f64, f64::max)
        .max(1e-300);
        let (su, l2) = residual_of(&mom, mom_scale);
        table.momentum.sup_rel = table.momentum.sup_rel.max(su);
        table.momentum.l2_rel = table.momentum.l2_rel.max(l2);
        table.momentum.scale = mom_scale;

        // Ampere and Gauss (electric).
        let amp = dt_e.samples[i].sub(&b_i.curl()).sub(m_i);
        let amp_scale = m_i.sup_norm().max(dt_e.samples[i].sup_norm()).max(1e-300);
        let (su, l2) = residual_of(&amp, amp_scale);
        table.ampere.sup_rel = table.ampere.sup_rel.max(su);
        table.ampere.l2_rel = table.ampere.l2_rel.max(l2);
        table.ampere.scale = amp_scale;
        let rho = ambient.h.sub(n_i);
        let ge = e_i.div().sub(&rho);
        let ge_scale = rho.sup_norm().max(1.0);
        table.gauss_e.sup_rel = table.gauss_e.sup_rel.max(ge.sup_norm() / ge_scale);
        table.gauss_e.l2_rel =
            table.gauss_e.l2_rel.max(ge.l2_mean_sq().sqrt() / ge_scale);
        table.gauss_e.scale = ge_scale;

        // Faraday and Gauss (magnetic).
        let far = dt_b.samples[i].add(&e_i.curl());
        let far_scale = dt_b.samples[i]
            .sup_norm()
            .max(e_i.curl().sup_norm())
            .max(1e-300);
        let (su, l2) = residual_of(&far, far_scale);
        table.faraday.sup_rel = table.faraday.sup_rel.max(su);
        table.faraday.l2_rel = table.faraday.l2_rel.max(l2);
        table.faraday.scale = far_scale;
        let gb = b_i.div();
        let gb_scale = b_i.jacobian().sup_norm().max(1e-300);
        table.gauss_b.sup_rel = table.gauss_b.sup_rel.max(gb.sup_norm() / gb_scale);
        table.gauss_b.l2_rel =
            table.gauss_b.l2_rel.max(gb.l2_mean_sq().sqrt() / gb_scale);
        table.gauss_b.scale = gb_scale;

        // Energy.
        let half_inv2: Vec<f64> = n_inv.iter().map(|v| 0.5 * v * v).collect();
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
        let div_rm = ctx
            .apply_weighted(&r_minus, m_i, &ones)
            .div();
        let div_nphi = ctx.scale_vec(&tuple.current.samples[i], &n_vals).div();
        let energy = dt_energy.samples[i]
            .add(&flux.div())
            .sub(&n_dt_kappa)
            .sub(&div_rm)
            .sub(&div_nphi)
            .sub(&ScalarField::constant(lat, ambient.dh_loss[alo + i]));
        let en_scale = [
            dt_energy.samples[i].sup_norm(),
            flux.div().sup_norm(),
            n_dt_kappa.sup_norm(),
            div_rm.sup_norm(),
            div_nphi.sup_norm(),
        ]
        .into_iter()
        .fold(0.0f64, f64::max)
        .max(1e-300);
        table.energy.sup_rel = table.energy.sup_rel.max(energy.sup_norm() / en_scale);
        table.energy.l2_rel =
            table.energy.l2_rel.max(energy.l2_mean_sq().sqrt() / en_scale);
        table.energy.scale = en_scale;
    }
    Ok(table)
}

/// Verify on a grid-interior window (stencil-clean samples only).
pub fn verify_interior(tuple: &ReynoldsTuple, ambient: &Ambient) -> Result<ResidualTable> {
    let grid = tuple.grid();
    let a = grid.time(2.min(grid.len() - 1));
    let b = grid.time(grid.len().saturating_sub(3).max(0));
    verify(tuple, ambient, (a, b))
}

/// Helper exposed for manufactured-solution tests.
pub fn trivial_window(grid: &TimeGrid) -> (f64, f64) {
    (grid.t0, grid.t1())
}
