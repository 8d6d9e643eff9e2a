//! The corrected Reynolds stress: direct algebraic pieces plus
//! inverse-divergence pieces, assembled from the stored fields with the
//! shared discrete calculus so the momentum closure is an identity.

use crate::error::Result;
use crate::field::{ScalarField, TensorField, TimeGrid, TimeSampled, VectorField};
use crate::operators::inverse_divergence_matrix;

use super::mollify::MollifiedTuple;
use super::ops::{ddt_vector_series, GridCtx};
use super::params::IterationParams;
use super::perturbation::PerturbationBundle;
use super::corrector::TimeCorrector;
use super::tuple::{Ambient, ReynoldsTuple};

/// Sub-stress decomposition (all as `n R_x` tensors on the working grid).
pub struct StressPieces {
    pub n_r_t: TimeSampled<TensorField>,
    pub n_r_n: TimeSampled<TensorField>,
    pub n_r_o1: TimeSampled<TensorField>,
    pub n_r_o2: TimeSampled<TensorField>,
    pub n_r_m: TimeSampled<TensorField>,
    pub n_r_time: TimeSampled<TensorField>,
    pub n_r_eb1: TimeSampled<TensorField>,
    pub n_r_eb2: TimeSampled<TensorField>,
    /// Largest mean (relative) of an inverse-divergence argument.
    pub max_mean_defect: f64,
    /// `dtt(curl potential) + B~`, reused by the current assembly.
    pub pot_accel: TimeSampled<VectorField>,
}

/// Sup norms of the pieces, for the diagnostics table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StressNorms {
    pub r_t: f64,
    pub r_n: f64,
    pub r_o1: f64,
    pub r_o2: f64,
    pub r_m: f64,
    pub r_time: f64,
    pub r_eb1: f64,
    pub r_eb2: f64,
}

pub struct NewStress {
    pub pieces: StressPieces,
    /// `R_{q+1}` including the isotropic zeta part.
    pub stress: TimeSampled<TensorField>,
    /// `n R_{q+1} - (2/3) zeta Id` (the zeta-independent part).
    pub n_stress0: TimeSampled<TensorField>,
    pub norms: StressNorms,
}

/// Mean-subtracting inverse divergence with defect bookkeeping.
fn invdiv_tracked(v: &VectorField, defect: &mut f64) -> TensorField {
    let scale = v.sup_norm().max(1e-300);
    let mean_norm = v
        .mean()
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    *defect = (*defect).max(mean_norm / scale);
    inverse_divergence_matrix(v)
}

#[allow(clippy::too_many_arguments)]
pub fn stress_pieces(
    tuple: &ReynoldsTuple,
    ambient: &Ambient,
    moll: &MollifiedTuple,
    bundle: &PerturbationBundle,
    corrector: &TimeCorrector,
    params: &IterationParams,
    working: TimeGrid,
) -> Result<StressPieces> {
    let lat = ambient.lattice;
    let ctx = GridCtx::new(lat);
    let (alo, _) = ambient.grid.window(working.t0, working.t1())?;
    let (mlo, _) = moll.ext_grid.window(working.t0, working.t1())?;

    // dtt(curl_pot) + B~ (the electromagnetic acceleration object).
    let pot_accel = {
        let d1 = ddt_vector_series(&bundle.curl_pot);
        let d2 = ddt_vector_series(&d1);
        TimeSampled::new(
            working,
            d2.samples.iter().zip(&bundle.b_p.samples).map(|(a, b)| a.add(b)).collect(),
        )
    };

    let len = working.len();
    let mut n_r_t = Vec::with_capacity(len);
    let mut n_r_n = Vec::with_capacity(len);
    let mut n_r_o1 = Vec::with_capacity(len);
    let mut n_r_o2 = Vec::with_capacity(len);
    let mut n_r_m = Vec::with_capacity(len);
    let mut n_r_time = Vec::with_capacity(len);
    let mut n_r_eb1 = Vec::with_capacity(len);
    let mut n_r_eb2 = Vec::with_capacity(len);
    let mut max_mean_defect = 0.0f64;

    // Precompute the advective-derivative series of m_eb / n.
    let m_eb_over_n = TimeSampled::new(
        working,
        (0..len)
            .map(|i| {
                let n_inv = ctx.recip(&ambient.n.samples[alo + i]);
                ctx.scale_vec(&bundle.m_eb.samples[i], &n_inv)
            })
            .collect(),
    );
    let dt_m_eb_over_n = ddt_vector_series(&m_eb_over_n);

    for i in 0..len {
        let n_field = &ambient.n.samples[alo + i];
        let n_inv = ctx.recip(n_field);
        let n_vals: Vec<f64> = n_inv.iter().map(|v| 1.0 / v).collect();
        let m_q = &tuple.m.samples[i];
        let m_l = &moll.m_l.samples[mlo + i];
        let dm = m_q.sub(m_l);
        let m_t_const = VectorField::constant(lat, corrector.m_t[i]);
        let e_t_const = VectorField::constant(lat, corrector.e_t[i]);
        let m_tilde = bundle.m_eb.samples[i].add(&m_t_const);
        let m_p = &bundle.m_p.samples[i];
        let m_c = m_tilde.sub(m_p);

        // Direct pieces.
        let o2 = ctx
            .outer_over(&m_c, m_p, &n_inv)
            .add(&ctx.outer_over(m_p, &m_c, &n_inv))
            .add(&ctx.outer_over(&m_c, &m_c, &n_inv));
        n_r_o2.push(o2);
        let rt = ctx
            .outer_over(m_q, &m_t_const, &n_inv)
            .add(&ctx.outer_over(&m_t_const, m_q, &n_inv));
        n_r_time.push(rt);
        let rm = ctx
            .scale_tensor(&tuple.stress.samples[i].sub(&moll.r_l.samples[i]), &n_vals)
            .add(&ctx.outer_over(&dm, &bundle.m_eb.samples[i], &n_inv))
            .add(&ctx.outer_over(&bundle.m_eb.samples[i], &dm, &n_inv));
        n_r_m.push(rm);
        // EB2: ((accel . B_q) Id - accel (x) B_q).
        let accel = &pot_accel.samples[i];
        let ones = vec![1.0; ctx.len()];
        let dot = ctx.dot_weighted(accel, &tuple.mag.samples[i], &ones);
        let mut eb2 = TensorField::zeros(lat);
        for r in 0..3 {
            *eb2.comp_mut(r, r) = dot.clone();
        }
        let outer = ctx.outer_over(accel, &tuple.mag.samples[i], &ones);
        n_r_eb2.push(eb2.sub(&outer));

        // Inverse-divergence pieces.
        // O1: div(m_p (x) m_p / n + n (R_l - delta Id)).
        let arg_o1 = ctx
            .outer_over(m_p, m_p, &n_inv)
            .add(&ctx.scale_tensor(
                &moll.r_l.samples[i]
                    .sub(&TensorField::identity_scaled(lat, params.delta_next)),
                &n_vals,
            ))
            .div();
        n_r_o1.push(invdiv_tracked(&arg_o1, &mut max_mean_defect));

        // N: (m_eb . grad)(m_l / n) = div(m_l/n (x) m_eb) for solenoidal m_eb.
        let drift_i = ctx.scale_vec(m_l, &n_inv);
        let jac = drift_i.jacobian();
        let arg_n = ctx.apply_weighted(&jac, &bundle.m_eb.samples[i], &ones);
        n_r_n.push(invdiv_tracked(&arg_n, &mut max_mean_defect));

        // T: n D_{t,l}(m_eb/n) - div(m_q - m_l) (m_eb / n).
        let adv = ctx.apply_weighted(&m_eb_over_n.samples[i].jacobian(), &drift_i, &ones);
        let ddt_part = &dt_m_eb_over_n.samples[i];
        let ddt_plus_adv = ddt_part.add(&adv);
        let n_ddt = ctx.scale_vec(&ddt_plus_adv, &n_vals);
        let div_dm = dm.div();
        let div_dm_grid: Vec<f64> =
            div_dm.to_grid(ctx.n).values.iter().map(|v| v.re).collect();
        let sub = ctx.scale_vec(&m_eb_over_n.samples[i], &div_dm_grid);
        let arg_t = n_ddt.sub(&sub);
        n_r_t.push(invdiv_tracked(&arg_t, &mut max_mean_defect));

        // EB1: dt m_t + n E_t + m_t x B_q + n E_p + m_q x B~ + m~ x B~
        //      - (grad B_q)^T (accel).
        let dt_mt = VectorField::constant(lat, corrector.dt_m_t[i]);
        let n_et = ctx.scale_vec(&e_t_const, &n_vals);
        let mt_x_bq = ctx.cross(&m_t_const, &tuple.mag.samples[i]);
        let n_ep = ctx.scale_vec(&bundle.e_p.samples[i], &n_vals);
        let mq_x_bt = ctx.cross(m_q, &bundle.b_p.samples[i]);
        let mt_x_bt = ctx.cross(&m_tilde, &bundle.b_p.samples[i]);
        let grad_bq_t = tuple.mag.samples[i].jacobian().transpose();
        let grad_term = ctx.apply_weighted(&grad_bq_t, accel, &ones);
        let arg_eb1 = dt_mt
            .add(&n_et)
            .add(&mt_x_bq)
            .add(&n_ep)
            .add(&mq_x_bt)
            .add(&mt_x_bt)
            .sub(&grad_term);
        n_r_eb1.push(invdiv_tracked(&arg_eb1, &mut max_mean_defect));
    }

    Ok(StressPieces {
        n_r_t: TimeSampled::new(working, n_r_t),
        n_r_n: TimeSampled::new(working, n_r_n),
        n_r_o1: TimeSampled::new(working, n_r_o1),
        n_r_o2: TimeSampled::new(working, n_r_o2),
        n_r_m: TimeSampled::new(working, n_r_m),
        n_r_time: TimeSampled::new(working, n_r_time),
        n_r_eb1: TimeSampled::new(working, n_r_eb1),
        n_r_eb2: TimeSampled::new(working, n_r_eb2),
        max_mean_defect,
        pot_accel,
    })
}

/// Combine the pieces and the zeta trace into `R_{q+1}`.
pub fn combine_stress(
    pieces: StressPieces,
    ambient: &Ambient,
    working: TimeGrid,
    zeta: &[f64],
) -> Result<NewStress> {
    let ctx = GridCtx::new(ambient.lattice);
    let (alo, _) = ambient.grid.window(working.t0, working.t1())?;
    let len = working.len();
    let mut n_stress0 = Vec::with_capacity(len);
    let mut stress = Vec::with_capacity(len);
    for i in 0..len {
        let sum0 = pieces.n_r_t.samples[i]
            .add(&pieces.n_r_n.samples[i])
            .add(&pieces.n_r_o1.samples[i])
            .add(&pieces.n_r_o2.samples[i])
            .add(&pieces.n_r_m.samples[i])
            .add(&pieces.n_r_time.samples[i])
            .add(&pieces.n_r_eb1.samples[i])
            .add(&pieces.n_r_eb2.samples[i]);
        let n_inv = ctx.recip(&ambient.n.samples[alo + i]);
        let mut r = ctx.scale_tensor(&sum0, &n_inv);
        // + (2/3) zeta / n Id.
        let zeta_over_n = ctx.map_real(&ambient.n.samples[alo + i], |nv| {
            2.0 / 3.0 * zeta[i] / nv
        });
        for d in 0..3 {
            let c = r.comp(d, d).add(&zeta_over_n);
            *r.comp_mut(d, d) = c;
        }
        n_stress0.push(sum0);
        stress.push(r);
    }
    let norms = StressNorms {
        r_t: sup_series(&pieces.n_r_t),
        r_n: sup_series(&pieces.n_r_n),
        r_o1: sup_series(&pieces.n_r_o1),
        r_o2: sup_series(&pieces.n_r_o2),
        r_m: sup_series(&pieces.n_r_m),
        r_time: sup_series(&pieces.n_r_time),
        r_eb1: sup_series(&pieces.n_r_eb1),
        r_eb2: sup_series(&pieces.n_r_eb2),
    };
    Ok(NewStress {
        pieces,
        stress: TimeSampled::new(working, stress),
        n_stress0: TimeSampled::new(working, n_stress0),
        norms,
    })
}

fn sup_series(ts: &TimeSampled<TensorField>) -> f64 {
    ts.samples.iter().map(|s| s.sup_norm()).fold(0.0, f64::max)
}

/// Trace bookkeeping: `tr(n R_{q+1}) = tr(n R_{O2} + n R_M + n R_t + n R_EB2) + 2 zeta`.
pub fn trace_identity_defect(
    ns: &NewStress,
    ambient: &Ambient,
    working: TimeGrid,
    zeta: &[f64],
) -> Result<f64> {
    let ctx = GridCtx::new(ambient.lattice);
    let (alo, _) = ambient.grid.window(working.t0, working.t1())?;
    let mut worst = 0.0f64;
    for i in 0..working.len() {
        let n_vals: Vec<f64> =
            ctx.recip(&ambient.n.samples[alo + i]).iter().map(|v| 1.0 / v).collect();
        let lhs = ctx.scale_tensor(&ns.stress.samples[i], &n_vals).trace();
        let rhs_t = ns.pieces.n_r_o2.samples[i]
            .add(&ns.pieces.n_r_m.samples[i])
            .add(&ns.pieces.n_r_time.samples[i])
            .add(&ns.pieces.n_r_eb2.samples[i])
            .trace();
        let rhs = rhs_t.add(&ScalarField::constant(ambient.lattice, 2.0 * zeta[i]));
        let scale = lhs.sup_norm().max(1e-300);
        worst = worst.max(lhs.sub(&rhs).sup_norm() / scale.max(1.0));
    }
    Ok(worst)
}
