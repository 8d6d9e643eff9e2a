//! Mollification of the iterate: the velocity/field group is low-passed in
//! space and time; the errors are low-passed in space and then mollified
//! along the flow trajectories of the regularized drift.

use crate::error::{CiemError, Result};
use crate::field::{ScalarField, TensorField, TimeGrid, TimeSampled, VectorField};
use crate::flow::{solve_flow, DriftVelocity, FlowDirection, FlowMap};
use crate::operators::flow_mollify::mollify_along_flow;
use crate::operators::time_mollify::{mollify_time, MarginPolicy};
use crate::operators::{lp_low_pass, lp_low_pass_tensor, lp_low_pass_vec};

use super::ops::GridCtx;
use super::params::IterationParams;
use super::tuple::{Ambient, ReynoldsTuple};

pub struct MollifiedTuple {
    /// Low-passed velocity group on the extended window.
    pub m_l: TimeSampled<VectorField>,
    pub e_l: TimeSampled<VectorField>,
    pub b_l: TimeSampled<VectorField>,
    /// Flow-mollified errors on the working window.
    pub r_l: TimeSampled<TensorField>,
    pub phi_l: TimeSampled<VectorField>,
    /// Regularized drift `m_l / n` on the extended window.
    pub drift: DriftVelocity,
    /// Global trajectory pair about the window midpoint.
    pub flow_fwd: FlowMap,
    pub flow_bwd: FlowMap,
    /// Extended window (working window plus the trajectory margin).
    pub ext_grid: TimeGrid,
    pub working_grid: TimeGrid,
    /// Flow-mollification span actually used: the determinant budget of
    /// the trajectory maps caps it below `ell_t` at desk scale.
    pub flow_delta: f64,
    pub delta_clamped: bool,
}

/// Apply `U_{<=1/ell} P_{<=1/ell}` to a sampled vector field.
pub fn ulp_vector(
    v: &TimeSampled<VectorField>,
    ell: f64,
    out_grid: TimeGrid,
    policy: MarginPolicy,
) -> Result<TimeSampled<VectorField>> {
    let lp = TimeSampled::new(
        v.grid,
        v.samples.iter().map(|s| lp_low_pass_vec(s, 1.0 / ell)).collect(),
    );
    let comps: Vec<TimeSampled<ScalarField>> = (0..3)
        .map(|c| {
            let series = TimeSampled::new(
                lp.grid,
                lp.samples.iter().map(|s| s.comps[c].clone()).collect(),
            );
            mollify_time(&series, ell, out_grid, policy)
        })
        .collect::<Result<_>>()?;
    Ok(TimeSampled::new(
        out_grid,
        (0..out_grid.len())
            .map(|i| {
                VectorField::new([
                    comps[0].samples[i].clone(),
                    comps[1].samples[i].clone(),
                    comps[2].samples[i].clone(),
                ])
            })
            .collect(),
    ))
}

pub fn ulp_scalar(
    v: &TimeSampled<ScalarField>,
    ell: f64,
    out_grid: TimeGrid,
    policy: MarginPolicy,
) -> Result<TimeSampled<ScalarField>> {
    let lp = TimeSampled::new(
        v.grid,
        v.samples.iter().map(|s| lp_low_pass(s, 1.0 / ell)).collect(),
    );
    mollify_time(&lp, ell, out_grid, policy)
}

pub fn ulp_tensor(
    v: &TimeSampled<TensorField>,
    ell: f64,
    out_grid: TimeGrid,
    policy: MarginPolicy,
) -> Result<TimeSampled<TensorField>> {
    let comps: Vec<TimeSampled<ScalarField>> = (0..9)
        .map(|c| {
            let series = TimeSampled::new(
                v.grid,
                v.samples.iter().map(|s| lp_low_pass(&s.comps[c], 1.0 / ell)).collect(),
            );
            mollify_time(&series, ell, out_grid, policy)
        })
        .collect::<Result<_>>()?;
    Ok(TimeSampled::new(
        out_grid,
        (0..out_grid.len())
            .map(|i| {
                let fields: Vec<ScalarField> =
                    comps.iter().map(|c| c.samples[i].clone()).collect();
                TensorField::new(fields.try_into().unwrap())
            })
            .collect(),
    ))
}

/// Mollify a tuple onto `working_grid`. The tuple must extend `2 ell + ell_t`
/// beyond it (plus the trajectory margin), per the margin convention.
pub fn mollify_tuple(
    tuple: &ReynoldsTuple,
    ambient: &Ambient,
    params: &IterationParams,
    working_grid: TimeGrid,
    policy: MarginPolicy,
) -> Result<MollifiedTuple> {
    let outer = tuple.grid();
    let need_lo = working_grid.t0 - (2.0 * params.ell + params.ell_t);
    let need_hi = working_grid.t1() + (2.0 * params.ell + params.ell_t);
    if policy == MarginPolicy::Strict && (need_lo < outer.t0 - 1e-10 || need_hi > outer.t1() + 1e-10)
    {
        return Err(CiemError::Margin {
            need: format!("[{need_lo:.4}, {need_hi:.4}] (working + 2 ell + ell_t)"),
            have: format!("[{:.4}, {:.4}]", outer.t0, outer.t1()),
        });
    }

    // Flow-mollification span: capped by the trajectory determinant budget
    // (|det - 1| must stay within [1/2, 2] along the maps).
    let ctx_probe = GridCtx::new(ambient.lattice);
    let mut grad_probe = 0.0f64;
    {
        let (alo, _) = ambient.grid.window(working_grid.t0, working_grid.t1())?;
        for (i, _t) in working_grid.times().enumerate().step_by(4) {
            let (tlo, _) = outer.window(working_grid.t0, working_grid.t1())?;
            let n_inv = ctx_probe.recip(&ambient.n.samples[alo + i]);
            let v = ctx_probe.scale_vec(&tuple.m.samples[tlo + i], &n_inv);
            grad_probe = grad_probe.max(v.jacobian().sup_norm());
        }
    }
    let det_budget = if grad_probe > 0.0 { 1.0 / grad_probe } else { f64::MAX };
    let delta = params.ell_t.min(det_budget).max(3.0 * outer.dt);
    let delta_clamped = delta < params.ell_t - 1e-12;

    // Extended window reaching the trajectory margin, snapped to samples.
    let ext_lo_t = (working_grid.t0 - delta - 2.0 * outer.dt).max(outer.t0);
    let ext_hi_t = (working_grid.t1() + delta + 2.0 * outer.dt).min(outer.t1());
    let (elo, ehi) = outer.window(ext_lo_t, ext_hi_t)?;
    let ext_grid = TimeGrid { t0: outer.time(elo), dt: outer.dt, steps: ehi - elo };

    let m_l = ulp_vector(&tuple.m, params.ell, ext_grid, policy)?;
    let e_l = ulp_vector(&tuple.elec, params.ell, ext_grid, policy)?;
    let b_l = ulp_vector(&tuple.mag, params.ell, ext_grid, policy)?;

    // Drift m_l / n.
    let ctx = GridCtx::new(ambient.lattice);
    let (alo, _) = ambient.grid.window(ext_grid.t0, ext_grid.t1())?;
    let drift_fields = TimeSampled::new(
        ext_grid,
        (0..ext_grid.len())
            .map(|i| {
                let n_inv = ctx.recip(&ambient.n.samples[alo + i]);
                ctx.scale_vec(&m_l.samples[i], &n_inv)
            })
            .collect(),
    );
    let drift = DriftVelocity::new(drift_fields);

    let anchor = 0.5 * (working_grid.t0 + working_grid.t1());
    let flow_fwd = solve_flow(
        &drift,
        anchor,
        (ext_grid.t0, ext_grid.t1()),
        FlowDirection::Forward,
        ambient.lattice,
    )?;
    let flow_bwd = solve_flow(
        &drift,
        anchor,
        (ext_grid.t0, ext_grid.t1()),
        FlowDirection::Backward,
        ambient.lattice,
    )?;

    // Spatially low-passed errors on the extended window, then the flow
    // mollification onto the working window.
    let delta = delta
        .min((working_grid.t0 - ext_grid.t0).abs())
        .min((ext_grid.t1() - working_grid.t1()).abs())
        .max(2.0 * outer.dt);
    let (rlo, rhi) = outer.window(ext_grid.t0, ext_grid.t1())?;
    let r_lp = TimeSampled::new(
        ext_grid,
        (rlo..=rhi)
            .map(|i| lp_low_pass_tensor(&tuple.stress.samples[i], 1.0 / params.ell))
            .collect(),
    );
    let phi_lp = TimeSampled::new(
        ext_grid,
        (rlo..=rhi)
            .map(|i| lp_low_pass_vec(&tuple.current.samples[i], 1.0 / params.ell))
            .collect(),
    );
    let moll_tensor = |ts: &TimeSampled<TensorField>| -> Result<TimeSampled<TensorField>> {
        let comps: Vec<TimeSampled<ScalarField>> = (0..9)
            .map(|c| {
                let series = TimeSampled::new(
                    ts.grid,
                    ts.samples.iter().map(|s| s.comps[c].clone()).collect(),
                );
                mollify_along_flow(&series, &flow_fwd, &flow_bwd, delta, working_grid)
            })
            .collect::<Result<_>>()?;
        Ok(TimeSampled::new(
            working_grid,
            (0..working_grid.len())
                .map(|i| {
                    let fields: Vec<ScalarField> =
                        comps.iter().map(|c| c.samples[i].clone()).collect();
                    TensorField::new(fields.try_into().unwrap())
                })
                .collect(),
        ))
    };
    let r_l = moll_tensor(&r_lp)?;
    let phi_comps: Vec<TimeSampled<ScalarField>> = (0..3)
        .map(|c| {
            let series = TimeSampled::new(
                phi_lp.grid,
                phi_lp.samples.iter().map(|s| s.comps[c].clone()).collect(),
            );
            mollify_along_flow(&series, &flow_fwd, &flow_bwd, delta, working_grid)
        })
        .collect::<Result<_>>()?;
    let phi_l = TimeSampled::new(
        working_grid,
        (0..working_grid.len())
            .map(|i| {
                VectorField::new([
                    phi_comps[0].samples[i].clone(),
                    phi_comps[1].samples[i].clone(),
                    phi_comps[2].samples[i].clone(),
                ])
            })
            .collect(),
    );

    Ok(MollifiedTuple {
        m_l,
        e_l,
        b_l,
        r_l,
        phi_l,
        drift,
        flow_fwd,
        flow_bwd,
        ext_grid,
        working_grid,
        flow_delta: delta,
        delta_clamped,
    })
}
