//! Backward and forward flow maps of a time-sampled drift velocity, with
//! gradients, inverses, determinants, and the advective time derivative.
//!
//! Forward characteristics are integrated with the classical 4th-order
//! one-step method from every grid node; the backward map is assembled by
//! inverting the forward characteristic cloud onto the grid with a
//! fixed-point iteration on the displacement. Jacobians are spectral.

use num_complex::Complex64;
use rayon::prelude::*;

use super::interp::SampledVector;
use crate::error::{CiemError, Result};
use crate::field::{GridField, Lattice3, ScalarField, TensorField, TimeGrid, TimeSampled, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    /// `xi(t, x)`: inverse Lagrangian coordinates, `xi(anchor, x) = x`.
    Backward,
    /// `Phi(t, x; anchor)`: particle positions, `Phi(anchor, x) = x`.
    Forward,
}

/// Time-sampled drift velocity with evaluators for the integrator.
pub struct DriftVelocity {
    pub fields: TimeSampled<VectorField>,
    samplers: Vec<SampledVector>,
    /// Sparse spectral modes (direct evaluation) when the field is sparse
    /// enough for exact summation to be affordable.
    sparse: Option<Vec<([i32; 3], [Complex64; 3])>>,
    pub grad_sup: f64,
}

const SPARSE_MODE_CAP: usize = 700;

impl DriftVelocity {
    pub fn new(fields: TimeSampled<VectorField>) -> Self {
        let samplers = fields.samples.iter().map(|v| SampledVector::new(v, 4)).collect();
        let grad_sup = fields
            .samples
            .iter()
            .map(|v| v.jacobian().sup_norm())
            .fold(0.0, f64::max);
        // Sparse exact evaluation only when every sample shares a small
        // support and the velocity is steady enough to matter.
        let sparse = Self::sparse_modes(&fields);
        Self { fields, samplers, sparse, grad_sup }
    }

    fn sparse_modes(
        fields: &TimeSampled<VectorField>,
    ) -> Option<Vec<([i32; 3], [Complex64; 3])>> {
        // Only static velocities take the exact path.
        let first = &fields.samples[0];
        for s in &fields.samples[1..] {
            for c in 0..3 {
                for (a, b) in s.comps[c].coeffs.iter().zip(&first.comps[c].coeffs) {
                    if (a - b).norm() > 1e-14 {
                        return None;
                    }
                }
            }
        }
        let v = first;
        let lat = v.lattice();
        let mut modes = Vec::new();
        for (idx, k) in lat.modes().enumerate() {
            let c = [v.comps[0].coeffs[idx], v.comps[1].coeffs[idx], v.comps[2].coeffs[idx]];
            if c.iter().any(|z| z.norm() > 1e-15) {
                modes.push((k, c));
            }
        }
        (modes.len() <= SPARSE_MODE_CAP).then_some(modes)
    }

    /// Velocity at an arbitrary space-time point.
    pub fn eval(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        if let Some(modes) = &self.sparse {
            let mut acc = [0.0f64; 3];
            for (k, c) in modes {
                let phase = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
                let (s, co) = phase.sin_cos();
                for i in 0..3 {
                    acc[i] += c[i].re * co - c[i].im * s;
                }
            }
            return acc;
        }
        // 4-point Lagrange in time over tricubic spatial lookups.
        let grid = &self.fields.grid;
        let (i0, w) = time_lagrange(grid, t);
        let mut acc = [0.0f64; 3];
        for (j, wj) in w.iter().enumerate() {
            if wj.abs() < 1e-300 {
                continue;
            }
            let v = self.samplers[i0 + j].tricubic(x);
            for i in 0..3 {
                acc[i] += wj * v[i];
            }
        }
        acc
    }

    /// ODE sub-step honoring the advisory bound `dt * |grad v| <= 0.1`.
    pub fn ode_dt(&self) -> f64 {
        let dt_field = self.fields.grid.dt;
        let cap = if self.grad_sup > 0.0 { 0.1 / self.grad_sup } else { f64::MAX };
        dt_field.min(cap).min(0.05)
    }
}

/// Weights of 4-point Lagrange interpolation at `t` on a uniform grid.
pub fn time_lagrange(grid: &TimeGrid, t: f64) -> (usize, [f64; 4]) {
    if grid.len() < 4 {
        // Degenerate short grids: clamp to constant/linear interpolation.
        let i = grid.floor_index(t);
        let mut w = [0.0; 4];
        w[0] = 1.0;
        return (i.min(grid.len() - 1), w);
    }
    let u = (t - grid.t0) / grid.dt;
    let mut i0 = (u.floor() as isize - 1).clamp(0, grid.len() as isize - 4) as usize;
    // Guard against u exactly at the right end.
    if i0 + 3 >= grid.len() {
        i0 = grid.len() - 4;
    }
    let s = u - i0 as f64;
    let mut w = [0.0f64; 4];
    for j in 0..4 {
        let mut prod = 1.0;
        for m in 0..4 {
            if m != j {
                prod *= (s - m as f64) / (j as f64 - m as f64);
            }
        }
        w[j] = prod;
    }
    (i0, w)
}

/// One classical 4th-order step of `dx/dt = v(t, x)` (signed `dt`).
fn rk4_step(vel: &DriftVelocity, t: f64, x: [f64; 3], dt: f64) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = vel.eval(t, x);
    let k2 = vel.eval(t + 0.5 * dt, add(x, k1, 0.5 * dt));
    let k3 = vel.eval(t + 0.5 * dt, add(x, k2, 0.5 * dt));
    let k4 = vel.eval(t + dt, add(x, k3, dt));
    [
        x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        x[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

/// March a batch of points from `t_from` to `t_to` with sub-stepping.
fn march(vel: &DriftVelocity, pts: &mut [[f64; 3]], t_from: f64, t_to: f64) {
    let span = t_to - t_from;
    if span == 0.0 {
        return;
    }
    let n_sub = (span.abs() / vel.ode_dt()).ceil().max(1.0) as usize;
    let dt = span / n_sub as f64;
    pts.par_iter_mut().for_each(|x| {
        let mut t = t_from;
        for _ in 0..n_sub {
            *x = rk4_step(vel, t, *x, dt);
            t += dt;
        }
    });
}

/// Flow map on a time window with spectral jacobian data per sample.
pub struct FlowMap {
    pub direction: FlowDirection,
    pub anchor: f64,
    pub grid: TimeGrid,
    pub lattice: Lattice3,
    /// Displacement (`xi - x` or `Phi - x`) per sample.
    pub disp: Vec<VectorField>,
    pub grad: Vec<TensorField>,
    pub grad_inv: Vec<TensorField>,
    /// `det(grad)^{-m}` for `m = 1, 2, 3`.
    pub det_inv: Vec<[ScalarField; 3]>,
    /// Time derivative of the map (backward: `-(v . grad) xi`, exact in the
    /// stored fields; forward: `v` along the map).
    pub dt_map: Vec<VectorField>,
    /// Sup of `|grad - Id|` over the window (reported against the 1/5 bound).
    pub max_grad_dev: f64,
    /// Oversampled displacement interpolants per sample.
    samplers: Vec<SampledVector>,
}

impl FlowMap {
    /// Evaluate the map at an arbitrary point (tricubic in space, Lagrange in
    /// time): returns `xi(t, x)` resp. `Phi(t, x; anchor)`.
    pub fn eval(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        let (i0, w) = time_lagrange(&self.grid, t);
        let mut acc = x;
        for (j, wj) in w.iter().enumerate() {
            if wj.abs() < 1e-300 {
                continue;
            }
            let d = self.samplers[i0 + j].tricubic(x);
            for i in 0..3 {
                acc[i] += wj * d[i];
            }
        }
        acc
    }

    /// Map evaluated exactly at a sample index and grid of points.
    pub fn sample_index(&self, t: f64) -> Result<usize> {
        let u = (t - self.grid.t0) / self.grid.dt;
        let i = u.round() as isize;
        if (u - i as f64).abs() > 1e-8 || i < 0 || i as usize >= self.grid.len() {
            return Err(CiemError::Flow(format!("time {t} is not a flow sample")));
        }
        Ok(i as usize)
    }
}

/// Solve for the flow map of `vel` anchored at `anchor` over `window`.
pub fn solve_flow(
    vel: &DriftVelocity,
    anchor: f64,
    window: (f64, f64),
    direction: FlowDirection,
    lattice: Lattice3,
) -> Result<FlowMap> {
    let vgrid = &vel.fields.grid;
    {
        let (a, b) = window;
        if !(vgrid.contains(a) && vgrid.contains(b) && vgrid.contains(anchor)) {
            return Err(CiemError::Margin {
                need: format!("window [{a:.4}, {b:.4}] + anchor {anchor:.4}"),
                have: format!("velocity on [{:.4}, {:.4}]", vgrid.t0, vgrid.t1()),
            });
        }
    }
    let cfl = vel.grad_sup * (window.1 - window.0).abs();
    if cfl > 8.0 {
        return Err(CiemError::Flow(format!(
            "window too long for this velocity: |grad v| * span = {cfl:.2}"
        )));
    }

    // Sample times of the map: align with the velocity grid when sampled,
    // else a fixed subdivision of the window.
    let grid = {
        let (lo, hi) = vgrid.window(window.0, window.1)?;
        if hi - lo < 2 {
            return Err(CiemError::Flow("flow window shorter than two velocity samples".into()));
        }
        TimeGrid { t0: vgrid.time(lo), dt: vgrid.dt, steps: hi - lo }
    };

    let n = lattice.eval_grid();
    let nodes: Vec<[f64; 3]> = (0..n * n * n)
        .map(|flat| {
            let j3 = flat % n;
            let j2 = (flat / n) % n;
            let j1 = flat / (n * n);
            Lattice3::node_on(n, [j1, j2, j3])
        })
        .collect();

    // Forward positions from the anchor at every sample time.
    let mut positions: Vec<Option<Vec<[f64; 3]>>> = vec![None; grid.len()];
    let mut right: Vec<[f64; 3]> = nodes.clone();
    let mut t_cur = anchor;
    for i in 0..grid.len() {
        let t = grid.time(i);
        if t >= anchor - 1e-12 {
            march(vel, &mut right, t_cur, t);
            t_cur = t;
            positions[i] = Some(right.clone());
        }
    }
    let mut left: Vec<[f64; 3]> = nodes.clone();
    t_cur = anchor;
    for i in (0..grid.len()).rev() {
        let t = grid.time(i);
        if t < anchor - 1e-12 {
            march(vel, &mut left, t_cur, t);
            t_cur = t;
            positions[i] = Some(left.clone());
        }
    }

    // Per sample: displacement field of the requested map.
    let mut disp: Vec<VectorField> = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let pos = positions[i].as_ref().expect("all samples populated");
        let fwd_disp_grid: [GridField; 3] = std::array::from_fn(|c| GridField {
            n,
            values: (0..nodes.len())
                .map(|m| Complex64::new(wrap_disp(pos[m][c] - nodes[m][c]), 0.0))
                .collect(),
        });
        let fwd_disp = VectorField::new(std::array::from_fn(|c| {
            ScalarField::from_grid(lattice, &fwd_disp_grid[c])
        }));
        match direction {
            FlowDirection::Forward => disp.push(fwd_disp),
            FlowDirection::Backward => {
                disp.push(invert_displacement(&fwd_disp, &nodes, lattice)?);
            }
        }
    }

    // Jacobian bundle per sample.
    let mut grad = Vec::with_capacity(grid.len());
    let mut grad_inv = Vec::with_capacity(grid.len());
    let mut det_inv = Vec::with_capacity(grid.len());
    let mut max_grad_dev = 0.0f64;
    for d in &disp {
        let j = d.jacobian();
        let (ginv, dinv, dev) = pointwise_inverse(&j, lattice)?;
        max_grad_dev = max_grad_dev.max(dev);
        let mut g = j;
        for i in 0..3 {
            let idc = g.comp(i, i).lattice.mode_index([0, 0, 0]);
            g.comp_mut(i, i).coeffs[idc] += Complex64::new(1.0, 0.0);
        }
        grad.push(g);
        grad_inv.push(ginv);
        det_inv.push(dinv);
    }

    // Advective time derivative of the map.
    let mut dt_map = Vec::with_capacity(grid.len());
    for (i, d) in disp.iter().enumerate() {
        let t = grid.time(i);
        match direction {
            FlowDirection::Backward => {
                // dt xi = -(v . grad) xi = -v - (v . grad) d, exact products.
                let v = velocity_at(vel, t, lattice)?;
                let jd = d.jacobian();
                let mut adv = jd.apply(&v)?;
                adv = adv.add(&v);
                dt_map.push(adv.scale(-1.0));
            }
            FlowDirection::Forward => {
                // dt Phi = v(t, Phi).
                let pos = positions[i].as_ref().unwrap();
                let vals: Vec<[f64; 3]> = pos.par_iter().map(|&x| vel.eval(t, x)).collect();
                let gridf: [GridField; 3] = std::array::from_fn(|c| GridField {
                    n,
                    values: vals.iter().map(|v| Complex64::new(v[c], 0.0)).collect(),
                });
                dt_map.push(VectorField::new(std::array::from_fn(|c| {
                    ScalarField::from_grid(lattice, &gridf[c])
                })));
            }
        }
    }

    let samplers = disp.iter().map(|d| SampledVector::new(d, 4)).collect();
    Ok(FlowMap {
        direction,
        anchor,
        grid,
        lattice,
        disp,
        grad,
        grad_inv,
        det_inv,
        dt_map,
        max_grad_dev,
        samplers,
    })
}

/// Wrap a displacement into `(-pi, pi]` so periodic crossings stay smooth.
fn wrap_disp(d: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut v = d % tau;
    if v > std::f64::consts::PI {
        v -= tau;
    } else if v <= -std::f64::consts::PI {
        v += tau;
    }
    v
}

/// Solve `x + d_fwd(x) = y` for every node `y` (backward displacement) by
/// Newton iteration with the spectral Jacobian of the forward displacement.
fn invert_displacement(
    fwd_disp: &VectorField,
    nodes: &[[f64; 3]],
    lattice: Lattice3,
) -> Result<VectorField> {
    let sampler = SampledVector::new(fwd_disp, 4);
    let jac = fwd_disp.jacobian();
    let jac_samplers: [SampledVector; 3] = std::array::from_fn(|r| {
        SampledVector::new(
            &VectorField::new([
                jac.comp(r, 0).clone(),
                jac.comp(r, 1).clone(),
                jac.comp(r, 2).clone(),
            ]),
            4,
        )
    });
    let n = lattice.eval_grid();
    let sols: Vec<[f64; 3]> = nodes
        .par_iter()
        .map(|&y| {
            let mut x = y;
            for it in 0..80 {
                let d = sampler.tricubic(x);
                let f = [x[0] + d[0] - y[0], x[1] + d[1] - y[1], x[2] + d[2] - y[2]];
                let res = f[0].abs().max(f[1].abs()).max(f[2].abs());
                if res < 1e-13 {
                    return Ok(x);
                }
                if it == 79 {
                    return Err(CiemError::Flow(format!(
                        "displacement inversion did not converge (residual {res:.2e})"
                    )));
                }
                // J = Id + grad d at x.
                let mut j = [[0.0f64; 3]; 3];
                for (r, js) in jac_samplers.iter().enumerate() {
                    let row = js.tricubic(x);
                    for c in 0..3 {
                        j[r][c] = row[c] + if r == c { 1.0 } else { 0.0 };
                    }
                }
                let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                    - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                    + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
                if det.abs() < 1e-8 {
                    return Err(CiemError::Flow("singular jacobian in inversion".into()));
                }
                let inv = [
                    [
                        (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det,
                        (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det,
                        (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det,
                    ],
                    [
                        (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det,
                        (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det,
                        (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det,
                    ],
                    [
                        (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det,
                        (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det,
                        (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det,
                    ],
                ];
                for r in 0..3 {
                    x[r] -= inv[r][0] * f[0] + inv[r][1] * f[1] + inv[r][2] * f[2];
                }
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;
    let gridf: [GridField; 3] = std::array::from_fn(|c| GridField {
        n,
        values: (0..nodes.len())
            .map(|m| Complex64::new(wrap_disp(sols[m][c] - nodes[m][c]), 0.0))
            .collect(),
    });
    Ok(VectorField::new(std::array::from_fn(|c| ScalarField::from_grid(lattice, &gridf[c]))))
}

/// Pointwise inverse and inverse determinant powers of `Id + grad(disp)`.
fn pointwise_inverse(
    jac_disp: &TensorField,
    lattice: Lattice3,
) -> Result<(TensorField, [ScalarField; 3], f64)> {
    let n = lattice.product_grid(2);
    let grids: Vec<GridField> = jac_disp.comps.iter().map(|c| c.to_grid(n)).collect();
    let len = grids[0].values.len();
    let mut inv = vec![vec![Complex64::default(); len]; 9];
    let mut dets = vec![vec![Complex64::default(); len]; 3];
    let mut max_dev = 0.0f64;
    let mut det_range = (f64::MAX, f64::MIN);
    for p in 0..len {
        let mut a = [[0.0f64; 3]; 3];
        let mut dev = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let v = grids[3 * i + j].values[p].re;
                a[i][j] = v + if i == j { 1.0 } else { 0.0 };
                dev = dev.max(v.abs());
            }
        }
        max_dev = max_dev.max(dev);
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        det_range.0 = det_range.0.min(det);
        det_range.1 = det_range.1.max(det);
        if !(0.5..=2.0).contains(&det) {
            return Err(CiemError::Flow(format!(
                "flow jacobian determinant {det:.4} outside [1/2, 2]"
            )));
        }
        let inv_det = 1.0 / det;
        let cof = [
            [
                a[1][1] * a[2][2] - a[1][2] * a[2][1],
                a[0][2] * a[2][1] - a[0][1] * a[2][2],
                a[0][1] * a[1][2] - a[0][2] * a[1][1],
            ],
            [
                a[1][2] * a[2][0] - a[1][0] * a[2][2],
                a[0][0] * a[2][2] - a[0][2] * a[2][0],
                a[0][2] * a[1][0] - a[0][0] * a[1][2],
            ],
            [
                a[1][0] * a[2][1] - a[1][1] * a[2][0],
                a[0][1] * a[2][0] - a[0][0] * a[2][1],
                a[0][0] * a[1][1] - a[0][1] * a[1][0],
            ],
        ];
        for i in 0..3 {
            for j in 0..3 {
                inv[3 * i + j][p] = Complex64::new(cof[i][j] * inv_det, 0.0);
            }
        }
        dets[0][p] = Complex64::new(inv_det, 0.0);
        dets[1][p] = Complex64::new(inv_det * inv_det, 0.0);
        dets[2][p] = Complex64::new(inv_det * inv_det * inv_det, 0.0);
    }
    let to_field = |vals: Vec<Complex64>| ScalarField::from_grid(lattice, &GridField { n, values: vals });
    let ginv = TensorField::new(
        inv.into_iter().map(to_field).collect::<Vec<_>>().try_into().unwrap(),
    );
    let dinv: [ScalarField; 3] = {
        let mut it = dets.into_iter().map(to_field);
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
    };
    Ok((ginv, dinv, max_dev))
}

/// Exact spectral velocity at a sample time (no interpolation when `t` is on
/// the grid; Lagrange blend of spectral samples otherwise).
pub fn velocity_at(vel: &DriftVelocity, t: f64, lattice: Lattice3) -> Result<VectorField> {
    let grid = &vel.fields.grid;
    let u = (t - grid.t0) / grid.dt;
    let r = u.round();
    if (u - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < grid.len() {
        return Ok(vel.fields.samples[r as usize].clone());
    }
    let (i0, w) = time_lagrange(grid, t);
    let mut acc = VectorField::zeros(lattice);
    for (j, wj) in w.iter().enumerate() {
        for c in 0..3 {
            acc.comps[c].axpy(*wj, &vel.fields.samples[i0 + j].comps[c]);
        }
    }
    Ok(acc)
}
