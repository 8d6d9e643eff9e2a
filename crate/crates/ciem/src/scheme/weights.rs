//! Perturbation weights: the index set `(u, v, f)`, anchor shears, profile
//! instances, and the pointwise weight solves that make the two
//! low-frequency cancellation identities exact.

use std::collections::BTreeMap;

use crate::error::{CiemError, Result};
use crate::field::{Lattice3, TimeGrid};
use crate::flow::{solve_flow, FlowDirection, FlowMap};
use crate::geometry::{
    build_families, class_of_cell, CurrentDecomposition, CutoffSystem, DirectionFamily,
    FamilyTag, IVec3, StressDecomposition,
};
use crate::mikado::{
    place_shifts, CurrentShapeSet, MikadoProfile, Placement, PlacementRequest, ProfileShape,
    StrandPattern,
};

use super::mollify::MollifiedTuple;
use super::params::IterationParams;
use super::tuple::Ambient;

/// Key of one index `I = (u, v, f)`.
pub type IndexKey = (i64, [i64; 3], IVec3);

/// Everything fixed once per step about the index machinery.
pub struct IndexSet {
    pub cutoffs: CutoffSystem,
    pub families: Vec<DirectionFamily>,
    pub placement: Placement,
    /// Active windows intersecting the working grid.
    pub windows: Vec<i64>,
    /// Anchor shear `L_{u,v} = (m_l/n)(tau u, 2 pi mu v)`.
    pub anchors: BTreeMap<(i64, [i64; 3]), [f64; 3]>,
    /// Profile instance per index.
    pub profiles: BTreeMap<IndexKey, MikadoProfile>,
    /// Backward flow per window.
    pub flows: BTreeMap<i64, FlowMap>,
    pub stress_solvers: Vec<StressDecomposition>,
    pub current_solvers: Vec<CurrentDecomposition>,
    /// Admissibility bound of the current-weight lemma (measured).
    pub n0: f64,
    pub r_tilde: f64,
}

impl IndexSet {
    pub fn profile(&self, u: i64, cell: [i64; 3], f: IVec3) -> &MikadoProfile {
        &self.profiles[&(u, cell, f)]
    }
}

/// Measured sup of the current-weight argument over the run, for `N0`.
fn measure_n0(
    moll: &MollifiedTuple,
    ambient: &Ambient,
    params: &IterationParams,
    flows: &BTreeMap<i64, FlowMap>,
    working: &TimeGrid,
) -> Result<f64> {
    let lat = ambient.lattice;
    let n_eval = lat.eval_grid();
    let scale = 2.0 * params.lambda_q.powf(3.0 * params.gamma) * params.delta_next.powf(-1.5);
    let mut worst = 0.0f64;
    let (alo, _) = ambient.grid.window(working.t0, working.t1())?;
    for (i, t) in working.times().enumerate() {
        let n_g = ambient.n.samples[alo + i].to_grid(n_eval);
        let phi_g: Vec<_> =
            moll.phi_l.samples[i].comps.iter().map(|c| c.to_grid(n_eval)).collect();
        for (&_u, flow) in flows.iter() {
            if !flow.grid.contains(t) {
                continue;
            }
            let j = flow.sample_index(t)?;
            let grad: Vec<_> = flow.grad[j].comps.iter().map(|c| c.to_grid(n_eval)).collect();
            for p in 0..n_g.values.len() {
                let n3 = n_g.values[p].re.powi(3);
                let phi = [phi_g[0].values[p].re, phi_g[1].values[p].re, phi_g[2].values[p].re];
                let mut v = [0.0f64; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        v[r] += grad[3 * r + c].values[p].re * phi[c];
                    }
                }
                let mag = scale * n3 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                worst = worst.max(mag);
            }
        }
    }
    Ok((1.05 * worst).max(1e-6))
}

/// Build the index machinery for one step: flows per window, placement,
/// anchors, and profile instances.
pub fn build_index_set(
    moll: &MollifiedTuple,
    ambient: &Ambient,
    params: &IterationParams,
    working: TimeGrid,
    r_tilde_config: Option<f64>,
) -> Result<IndexSet> {
    let cutoffs = CutoffSystem::new(params.tau, params.mu_inv)?;
    let families = build_families()?;

    // Active windows: those whose support meets the working window, clipped
    // to anchors the extended grid can host.
    let mut windows: Vec<i64> = cutoffs
        .active_windows(working.t0, working.t1())
        .filter(|&u| {
            let t_u = u as f64 * params.tau;
            moll.ext_grid.contains(t_u)
        })
        .collect();
    windows.sort_unstable();
    if windows.is_empty() {
        return Err(CiemError::Scheme("no active time windows on the working grid".into()));
    }

    // Backward flow per window, on the window support intersected with the
    // extended grid.
    let mut flows = BTreeMap::new();
    for &u in &windows {
        let t_u = u as f64 * params.tau;
        let a = (t_u - 0.5 * params.tau).max(moll.ext_grid.t0);
        let b = (t_u + 1.5 * params.tau).min(moll.ext_grid.t1());
        let fm = solve_flow(&moll.drift, t_u, (a, b), FlowDirection::Backward, ambient.lattice)?;
        flows.insert(u, fm);
    }

    // Placement: certify at the configured pipe radius (or derive one from
    // the measured separation), with the fallback ladder inside.
    let drift_grad = moll.drift.grad_sup;
    let drift_sup = moll
        .drift
        .fields
        .samples
        .iter()
        .map(|v| v.sup_norm())
        .fold(0.0, f64::max);
    // Probe with a tiny radius to measure the separation, then choose
    // r_tilde below the certified constant.
    let probe_patterns = strand_patterns(&families, 1e-9)?;
    let probe = place_shifts(&PlacementRequest {
        cutoffs: &cutoffs,
        families: &families,
        patterns: &probe_patterns,
        drift_grad_sup: drift_grad,
        drift_sup,
        margin: 0.1,
    })?;
    let eta = probe.eta;
    let r_tilde = r_tilde_config.unwrap_or(eta / 101.0).min(eta / 100.0 * 0.999);
    let patterns = strand_patterns(&families, r_tilde * 2f64.sqrt())?;
    let placement = place_shifts(&PlacementRequest {
        cutoffs: &cutoffs,
        families: &families,
        patterns: &patterns,
        drift_grad_sup: drift_grad,
        drift_sup,
        margin: 0.1,
    })?;

    // Profile shapes per primitive direction (stress) and per direction
    // (current selector sets). Shapes are shared by scaled directions.
    let profile_lattice = Lattice3::new(10, 3)?;
    let mut stress_shapes: BTreeMap<IVec3, ProfileShape> = BTreeMap::new();
    let mut current_shapes: BTreeMap<IVec3, CurrentShapeSet> = BTreeMap::new();
    let base = &families[0];
    for f in base.stress_dirs.iter() {
        let prim = crate::mikado::frame::primitive(*f);
        stress_shapes.insert(
            prim,
            ProfileShape::build(prim, FamilyTag::Stress, None, r_tilde, profile_lattice)?,
        );
    }
    for f in base.current_dirs.iter() {
        let prim = crate::mikado::frame::primitive(*f);
        current_shapes.insert(
            prim,
            CurrentShapeSet::build(prim, r_tilde, profile_lattice, Default::default())?,
        );
    }

    // Anchor shears and profile instances.
    let mut anchors = BTreeMap::new();
    let mut profiles = BTreeMap::new();
    let tau2 = std::f64::consts::TAU;
    for &u in &windows {
        let t_u = u as f64 * params.tau;
        for cell in cutoffs.cells() {
            let anchor_x = [
                tau2 * cutoffs.mu() * cell[0] as f64,
                tau2 * cutoffs.mu() * cell[1] as f64,
                tau2 * cutoffs.mu() * cell[2] as f64,
            ];
            let l = moll.drift.eval(t_u, anchor_x);
            anchors.insert((u, cell), l);
            let fam = &families[class_of_cell(cell)];
            for f in fam.stress_dirs.iter() {
                let prim = crate::mikado::frame::primitive(*f);
                let shift = placement.shift_of(u, cell, *f);
                let p = MikadoProfile::instantiate(
                    &stress_shapes[&prim],
                    *f,
                    l,
                    shift,
                    params.n0_tilde,
                )?;
                profiles.insert((u, cell, *f), p);
            }
            for f in fam.current_dirs.iter() {
                let prim = crate::mikado::frame::primitive(*f);
                let shift = placement.shift_of(u, cell, *f);
                let p = MikadoProfile::instantiate_current(
                    &current_shapes[&prim],
                    *f,
                    l,
                    shift,
                    params.n0_tilde,
                )?;
                profiles.insert((u, cell, *f), p);
            }
        }
    }

    let n0 = measure_n0(moll, ambient, params, &flows, &working)?;
    let stress_solvers =
        families.iter().map(StressDecomposition::new).collect::<Result<Vec<_>>>()?;
    let current_solvers =
        families.iter().map(|fam| CurrentDecomposition::new(fam, n0)).collect();

    Ok(IndexSet {
        cutoffs,
        families,
        placement,
        windows,
        anchors,
        profiles,
        flows,
        stress_solvers,
        current_solvers,
        n0,
        r_tilde,
    })
}

fn strand_patterns(families: &[DirectionFamily], radius: f64) -> Result<Vec<StrandPattern>> {
    let mut out = Vec::new();
    for fam in families {
        for f in fam.stress_dirs.iter() {
            let frame = crate::mikado::PipeFrame::new(*f)?;
            let sep = frame.p1 / 4.0;
            out.push(StrandPattern {
                f: *f,
                tag: FamilyTag::Stress,
                strands: vec![
                    crate::mikado::Strand {
                        offset: [sep * frame.u1[0], sep * frame.u1[1], sep * frame.u1[2]],
                        radius,
                    },
                    crate::mikado::Strand {
                        offset: [-sep * frame.u1[0], -sep * frame.u1[1], -sep * frame.u1[2]],
                        radius,
                    },
                ],
            });
        }
        for f in fam.current_dirs.iter() {
            out.push(StrandPattern {
                f: *f,
                tag: FamilyTag::Current,
                strands: vec![crate::mikado::Strand { offset: [0.0; 3], radius }],
            });
        }
    }
    Ok(out)
}

/// Pointwise data a weight evaluation needs at one `(t, x)`.
#[derive(Debug, Clone, Copy)]
pub struct PointData {
    /// Density and mollified errors at the point.
    pub n: f64,
    pub r_l: [[f64; 3]; 3],
    pub phi_l: [f64; 3],
}

/// Pointwise flow data for one window at the point.
#[derive(Debug, Clone, Copy)]
pub struct FlowPoint {
    pub xi: [f64; 3],
    pub grad: [[f64; 3]; 3],
    pub grad_inv: [[f64; 3]; 3],
}

/// Current-family weights `gamma_J` at one point for one `(u, v)`:
/// `gamma = lam^{-gamma} delta^{1/2} Gamma^{1/3} / |f~|^{2/3}` with `Gamma`
/// the affine frame coefficients of the scaled argument.
pub fn current_gammas(
    set: &IndexSet,
    params: &IterationParams,
    cell: [i64; 3],
    point: &PointData,
    flow: &FlowPoint,
) -> Result<[f64; 4]> {
    let class = class_of_cell(cell);
    let dec = &set.current_solvers[class];
    let scale = -2.0 * params.lambda_q.powf(3.0 * params.gamma) * params.delta_next.powf(-1.5);
    let n3 = point.n.powi(3);
    let mut arg = [0.0f64; 3];
    for r in 0..3 {
        for c in 0..3 {
            arg[r] += flow.grad[r][c] * point.phi_l[c];
        }
        arg[r] *= scale * n3;
    }
    let gammas = dec.gamma(arg)?;
    let fam = &set.families[class];
    let mut out = [0.0f64; 4];
    for (j, f) in fam.current_dirs.iter().enumerate() {
        let ft = apply_inv(flow, *f);
        let ft_norm = (ft[0] * ft[0] + ft[1] * ft[1] + ft[2] * ft[2]).sqrt();
        out[j] = params.lambda_q.powf(-params.gamma)
            * params.delta_next.sqrt()
            * gammas[j].cbrt()
            / ft_norm.powf(2.0 / 3.0);
    }
    Ok(out)
}

pub fn apply_inv(flow: &FlowPoint, f: IVec3) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r] += flow.grad_inv[r][c] * f[c] as f64;
        }
    }
    out
}

/// The current-family subtraction tensor entering the stress solve:
/// `sum_J theta_J^2 chi_J^2(xi_J) gamma_J^2 <M_J^2> f~_J (x) f~_J` over the
/// `(u', v')` neighborhood of `(u, v)`.
#[allow(clippy::too_many_arguments)]
pub fn current_subtraction(
    set: &IndexSet,
    params: &IterationParams,
    t: f64,
    u: i64,
    cell: [i64; 3],
    point: &PointData,
    flow_points: &BTreeMap<i64, FlowPoint>,
) -> Result<[[f64; 3]; 3]> {
    let mut acc = [[0.0f64; 3]; 3];
    for du in -1..=1i64 {
        let u2 = u + du;
        let Some(fp) = flow_points.get(&u2) else { continue };
        let theta = set.cutoffs.theta(u2, t, FamilyTag::Current);
        if theta == 0.0 {
            continue;
        }
        for dv1 in -1..=1i64 {
            for dv2 in -1..=1i64 {
                for dv3 in -1..=1i64 {
                    let cell2 = [
                        (cell[0] + dv1).rem_euclid(set.cutoffs.mu_inv),
                        (cell[1] + dv2).rem_euclid(set.cutoffs.mu_inv),
                        (cell[2] + dv3).rem_euclid(set.cutoffs.mu_inv),
                    ];
                    let chi = set.cutoffs.chi(cell2, fp.xi, FamilyTag::Current);
                    if chi == 0.0 {
                        continue;
                    }
                    let gammas = current_gammas(set, params, cell2, point, fp)?;
                    let fam = &set.families[class_of_cell(cell2)];
                    for (j, f) in fam.current_dirs.iter().enumerate() {
                        let prof = set.profile(u2, cell2, *f);
                        let ft = apply_inv(fp, *f);
                        let w = theta * theta * chi * chi * gammas[j] * gammas[j] * prof.mean_m2;
                        for r in 0..3 {
                            for c in 0..3 {
                                acc[r][c] += w * ft[r] * ft[c];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Stress-family weights `gamma_I = delta^{1/2} n Gamma_I` at one point.
#[allow(clippy::too_many_arguments)]
pub fn stress_gammas(
    set: &IndexSet,
    params: &IterationParams,
    t: f64,
    u: i64,
    cell: [i64; 3],
    point: &PointData,
    flow_points: &BTreeMap<i64, FlowPoint>,
) -> Result<[f64; 6]> {
    let fp = flow_points
        .get(&u)
        .ok_or_else(|| CiemError::Scheme(format!("missing flow data for window {u}")))?;
    let sub = current_subtraction(set, params, t, u, cell, point, flow_points)?;
    let delta = params.delta_next;
    let n2_inv = 1.0 / (point.n * point.n);
    // M_I = grad xi [ (delta Id - R_l) - n^{-2} sub ] (grad xi)^T - delta Id.
    let mut inner = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            inner[r][c] = -point.r_l[r][c] - n2_inv * sub[r][c];
            if r == c {
                inner[r][c] += delta;
            }
        }
    }
    let mut m_i = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let mut acc = 0.0;
            for a in 0..3 {
                for b2 in 0..3 {
                    acc += fp.grad[r][a] * inner[a][b2] * fp.grad[c][b2];
                }
            }
            m_i[r][c] = acc - if r == c { delta } else { 0.0 };
        }
    }
    // Solve Id - K = Id + delta^{-1} M_I, i.e. K = -M_I / delta.
    let mut k = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            k[r][c] = -m_i[r][c] / delta;
        }
    }
    let class = class_of_cell(cell);
    let gammas = set.stress_solvers[class].gamma(&k)?;
    Ok(gammas.map(|g| params.delta_next.sqrt() * point.n * g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_errors_give_base_weights() {
        // With R_l = 0, phi subtraction absent, identity flow: M_I = 0 and
        // Gamma = Gamma(Id) = 1/2 on the base family, so
        // gamma = delta^{1/2} n / 2.
        let families = build_families().unwrap();
        let solver = StressDecomposition::new(&families[0]).unwrap();
        let g = solver.gamma(&[[0.0; 3]; 3]).unwrap();
        for v in g {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }
}
