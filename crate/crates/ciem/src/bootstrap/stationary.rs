//! Starting tuple for a stationary density: pipe-flow blocks whose
//! low-frequency momentum products cancel the pressure gradient, an
//! electric correction restoring the charge constraint, a second block
//! family cancelling the induced stress, and error fields closing the
//! momentum and energy balances exactly in the discrete algebra.

use num_complex::Complex64;

use crate::blocks::{build_block, BlockInputs};
use crate::error::{CiemError, Result};
use crate::field::{ScalarField, TensorField, TimeGrid, TimeSampled, VectorField};
use crate::geometry::{build_families, FamilyTag, StressDecomposition};
use crate::mikado::{MikadoProfile, ProfileShape};
use crate::operators::{inverse_divergence_matrix, inverse_divergence_vector};
use crate::scheme::ops::{ddt_scalar_series, GridCtx};
use crate::scheme::tuple::{Ambient, ReynoldsTuple};

pub struct StartConfig {
    /// Oscillation of the start blocks (a positive integer).
    pub lambda_tilde: f64,
    /// Amplitude margin: the pressure-cancellation constant is
    /// `margin * max(p + c0 n)` (the analytic recipe doubles the sup, which
    /// over-drives desk-scale flows; overridable here).
    pub pressure_margin: f64,
    /// Start-profile pipe radius and cutoff.
    pub r_tilde: f64,
    pub km: i32,
    /// `c_0 = sum_{j >= 1} delta_j` of the parameter ladder.
    pub c0: f64,
}

impl Default for StartConfig {
    fn default() -> Self {
        Self { lambda_tilde: 1.0, pressure_margin: 1.15, r_tilde: 0.25, km: 3, c0: 2.0 }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct StartDiagnostics {
    pub amplitude_floor: f64,
    pub cbar: f64,
    pub c_r: f64,
    pub m0_sup: f64,
    pub e0_sup: f64,
    pub b0_sup: f64,
    pub r0_sup: f64,
    pub phi0_sup: f64,
    /// Measured lower amplitude constant.
    pub m_lower_measured: f64,
    /// `|mean(h E_0)|`, which must vanish structurally.
    pub charge_mean_defect: f64,
    /// `|mean(S_0)|` of the energy defect before inversion.
    pub energy_mean_defect: f64,
    /// Relative sup of the projected pressure-cancellation combination.
    pub pressure_cancellation: f64,
}

/// Sum of blocks for one direction set with given amplitudes.
struct BlockSum {
    m: VectorField,
    b: VectorField,
    m_p: VectorField,
}

/// Build static blocks for a direction with a complex per-mode amplitude
/// profile and accumulate their fields at the mid sample.
fn direction_blocks(
    ambient: &Ambient,
    profile: &MikadoProfile,
    amp: &ScalarField,
    lambda: f64,
) -> Result<BlockSum> {
    let lat = ambient.lattice;
    let mini = TimeGrid::new(0.0, 1.0, 4)?;
    let mut m_p = VectorField::zeros(lat);
    let mut curl_pot = VectorField::zeros(lat);
    for mode in &profile.modes {
        // Amplitude a(x) * b_k (shift phase already inside the mode).
        let mut a_field = amp.clone();
        for c in a_field.coeffs.iter_mut() {
            *c *= mode.b;
        }
        let amplitude = TimeSampled::from_fn(mini, |_| a_field.clone());
        let block = build_block(&BlockInputs {
            lattice: lat,
            f: profile.f,
            k: mode.k,
            lambda,
            amplitude: &amplitude,
            flow: None,
            frozen_drift: [0.0; 3],
        })?;
        let mid = 2;
        curl_pot = curl_pot.add(&block.curl_pot.samples[mid]);
        m_p = m_p.add(&block.m_p.samples[mid]);
    }
    // Static chain from the stored potential: A = curl(curl_pot),
    // B = curl A, m = -curl B; every divergence and the Lorentz identity
    // hold exactly in coefficients.
    let a_pot = curl_pot.curl();
    let mut b = a_pot.curl();
    let mut m = b.curl().scale(-1.0);
    for c in 0..3 {
        m.comps[c].enforce_reality();
        b.comps[c].enforce_reality();
        m_p.comps[c].enforce_reality();
    }
    Ok(BlockSum { m, b, m_p })
}

/// Deterministic shift for a start pipe.
fn start_shift(tag: &str, i: usize) -> [f64; 3] {
    let mut h = 0xABCDu64 ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 29;
    }
    let mut out = [0.0; 3];
    for v in out.iter_mut() {
        h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
        *v = std::f64::consts::TAU * (h as f64 / u64::MAX as f64);
    }
    out
}

pub fn start_stationary(
    ambient: &Ambient,
    cfg: &StartConfig,
) -> Result<(ReynoldsTuple, StartDiagnostics)> {
    let lat = ambient.lattice;
    let ctx = GridCtx::new(lat);
    let grid = ambient.grid;
    let n0 = &ambient.n.samples[0];
    let n_inv = ctx.recip(n0);
    let n_vals: Vec<f64> = n_inv.iter().map(|v| 1.0 / v).collect();
    let ones = vec![1.0; ctx.len()];

    // Pressure-cancellation budget: cbar - p - c0 n > 0 everywhere.
    let p_plus = ctx.map_real(n0, |nv| ambient.pressure.eval(nv) + cfg.c0 * nv);
    let p_grid = ctx.sg(&p_plus);
    let p_max = p_grid.iter().map(|v| v.re).fold(f64::MIN, f64::max);
    let cbar = cfg.pressure_margin * p_max;
    let amp_sq_min = p_grid
        .iter()
        .zip(&n_vals)
        .map(|(p, n)| n * (cbar - p.re))
        .fold(f64::MAX, f64::min);
    if amp_sq_min <= 0.0 {
        return Err(CiemError::Bootstrap(format!(
            "pressure budget not positive: min amplitude^2 = {amp_sq_min}"
        )));
    }
    let amp0 = ctx.map_real(n0, |nv| {
        (nv * (cbar - ambient.pressure.eval(nv) - cfg.c0 * nv)).sqrt()
    });

    // Profiles for the three coordinate directions (unit second moment,
    // vanishing odd moments by the odd-harmonic sector).
    let profile_lattice = crate::field::Lattice3::new((2 * cfg.km + 4) as usize, cfg.km)?;
    let dirs = [[1i64, 0, 0], [0, 1, 0], [0, 0, 1]];
    let mut m0 = VectorField::zeros(lat);
    let mut b0 = VectorField::zeros(lat);
    let mut m0p = VectorField::zeros(lat);
    for (i, f) in dirs.iter().enumerate() {
        let shape = ProfileShape::build(*f, FamilyTag::Stress, None, cfg.r_tilde, profile_lattice)?;
        let prof =
            MikadoProfile::instantiate(&shape, *f, [0.0; 3], start_shift("press", i), 8)?;
        // Normalize to <psi^2> = 1 through the profile normalizer.
        let amp_scaled = {
            let mut a = amp0.clone();
            a = a.scale(1.0 / prof.normalizer);
            a
        };
        let sum = direction_blocks(ambient, &prof, &amp_scaled, cfg.lambda_tilde)?;
        m0 = m0.add(&sum.m);
        b0 = b0.add(&sum.b);
        m0p = m0p.add(&sum.m_p);
    }

    // Electric correction restoring div E = h - n, with its constant part.
    let charge = ambient.h.sub(n0);
    let e_c = inverse_divergence_vector(&charge, 1e-8)?;
    let n_ec = ctx.scale_vec(&e_c, &n_vals);
    let n_mean = n0.mean().re;
    let e_t = [
        -n_ec.comps[0].mean().re / n_mean,
        -n_ec.comps[1].mean().re / n_mean,
        -n_ec.comps[2].mean().re / n_mean,
    ];
    let e0 = e_c.add(&VectorField::constant(lat, e_t));

    // Stress correction blocks cancelling nR_c.
    let h_e0 = ctx.scale_vec(
        &e0,
        &ambient.h.to_grid(ctx.n).values.iter().map(|v| v.re).collect::<Vec<_>>(),
    );
    let charge_mean_defect = h_e0
        .mean()
        .iter()
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let e0_sq = ctx.dot_weighted(&e0, &e0, &ones);
    let mut n_r_c = inverse_divergence_matrix(&h_e0);
    let e0_outer = ctx.outer_over(&e0, &e0, &ones);
    for d in 0..3 {
        let c = n_r_c.comp(d, d).add(&e0_sq.scale(0.5));
        *n_r_c.comp_mut(d, d) = c;
    }
    n_r_c = n_r_c.sub(&e0_outer);
    let c_r = (4.0 * n_r_c.sup_norm()).max(1e-6);

    let families = build_families()?;
    let solver = StressDecomposition::new(&families[0])?;
    // Pointwise coefficients Gamma_i of Id - nR_c / c_r.
    let nrc_grids: [Vec<Complex64>; 9] = std::array::from_fn(|c| ctx.tg(&n_r_c)[c].clone());
    let mut gamma_fields: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); ctx.len()]; 6];
    for p in 0..ctx.len() {
        let mut k = [[0.0f64; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                k[r][c] = nrc_grids[3 * r + c][p].re / c_r;
            }
        }
        let g = solver.gamma(&k)?;
        for (j, gj) in g.iter().enumerate() {
            gamma_fields[j][p] = Complex64::new(*gj, 0.0);
        }
    }
    let mut m_r = VectorField::zeros(lat);
    let mut b_r = VectorField::zeros(lat);
    let mut m_rp = VectorField::zeros(lat);
    for (j, f) in families[0].stress_dirs.iter().enumerate() {
        let shape = ProfileShape::build(
            crate::mikado::frame::primitive(*f),
            FamilyTag::Stress,
            None,
            cfg.r_tilde,
            profile_lattice,
        )?;
        let prof =
            MikadoProfile::instantiate(&shape, *f, [0.0; 3], start_shift("stress", j), 8)?;
        // A_j = sqrt(n c_r) Gamma_j / normalizer.
        let sqrt_nc = ctx.map_real(n0, |nv| (nv * c_r).sqrt());
        let amp_j = ctx.scale_scalar(
            &sqrt_nc,
            &gamma_fields[j].iter().map(|v| v.re / prof.normalizer).collect::<Vec<_>>(),
        );
        let sum = direction_blocks(ambient, &prof, &amp_j, cfg.lambda_tilde)?;
        m_r = m_r.add(&sum.m);
        b_r = b_r.add(&sum.b);
        m_rp = m_rp.add(&sum.m_p);
    }

    let m_total = m0.add(&m_r);
    let b_total = b0.add(&b_r);
    let m0p_all = m0p.clone();
    let m_rp_all = m_rp.clone();

    // Momentum-closing stress.
    let arg1 = ctx
        .outer_over(&m0p_all, &m0p_all, &n_inv)
        .div()
        .add(&VectorField::new([
            p_plus.derivative([1, 0, 0]),
            p_plus.derivative([0, 1, 0]),
            p_plus.derivative([0, 0, 1]),
        ]));
    let r_part1 = inverse_divergence_matrix(&arg1);
    let arg2 = ctx.outer_over(&m_rp_all, &m_rp_all, &n_inv).add(&n_r_c).div();
    let r_part2 = inverse_divergence_matrix(&arg2);
    let mut n_r0_static = r_part1.add(&r_part2);
    n_r0_static = n_r0_static
        .add(&ctx.outer_over(&m_total, &m_total, &n_inv))
        .sub(&ctx.outer_over(&m0p_all, &m0p_all, &n_inv))
        .sub(&ctx.outer_over(&m_rp_all, &m_rp_all, &n_inv));
    // Magnetic closing terms (the electric ones already live inside the
    // stress-correction target fed through the second inverse divergence).
    let b_sq = ctx.dot_weighted(&b_total, &b_total, &ones);
    let b_outer = ctx.outer_over(&b_total, &b_total, &ones);
    for d in 0..3 {
        let c = n_r0_static.comp(d, d).add(&b_sq.scale(0.5));
        *n_r0_static.comp_mut(d, d) = c;
    }
    n_r0_static = n_r0_static.sub(&b_outer);

    // Time-sampled tuple fields (static except the energy-loss trace).
    let len = grid.len();
    let mut stress_samples = Vec::with_capacity(len);
    for i in 0..len {
        let mut n_r0 = n_r0_static.clone();
        let h_i = ambient.h_loss[i];
        if h_i != 0.0 {
            let iso = ScalarField::constant(lat, -2.0 / 3.0 * h_i);
            for d in 0..3 {
                let c = n_r0.comp(d, d).add(&iso);
                *n_r0.comp_mut(d, d) = c;
            }
        }
        stress_samples.push(ctx.divide_refined_tensor(&n_r0, &n_inv, &n_vals));
    }
    let stress = TimeSampled::new(grid, stress_samples);
    let m_series = TimeSampled::from_fn(grid, |_| m_total.clone());
    let e_series = TimeSampled::from_fn(grid, |_| e0.clone());
    let b_series = TimeSampled::from_fn(grid, |_| b_total.clone());

    // Energy-closing current: solve div(n phi_0) = S_0 exactly.
    let kappa = TimeSampled::new(
        grid,
        stress.samples.iter().map(|s| s.trace().scale(0.5)).collect(),
    );
    let dt_kappa = ddt_scalar_series(&kappa);
    let mut current_samples = Vec::with_capacity(len);
    let mut energy_mean_defect = 0.0f64;
    for i in 0..len {
        // Flux: m/n (|m|^2/2n + n e(n) + p) + E x B.
        let half_inv2: Vec<f64> = n_inv.iter().map(|v| 0.5 * v * v).collect();
        let kinetic = ctx.dot_weighted(&m_total, &m_total, &half_inv2);
        let feq = ctx.map_real(n0, |nv| {
            nv * ambient.energy.eval(nv) + ambient.pressure.eval(nv)
        });
        let inner = kinetic.add(&feq);
        let flux_m = ctx.scale_vec(
            &ctx.scale_vec(&m_total, &n_inv),
            &ctx.sg(&inner).iter().map(|v| v.re).collect::<Vec<_>>(),
        );
        let flux_eb = ctx.cross(&e0, &b_total);
        let div_flux = flux_m.add(&flux_eb).div();
        // n D_t kappa = n dt kappa + m . grad kappa.
        let grad_kappa = VectorField::new([
            kappa.samples[i].derivative([1, 0, 0]),
            kappa.samples[i].derivative([0, 1, 0]),
            kappa.samples[i].derivative([0, 0, 1]),
        ]);
        let n_dt_kappa = ctx
            .scale_scalar(&dt_kappa.samples[i], &n_vals)
            .add(&ctx.dot_weighted(&m_total, &grad_kappa, &ones));
        // div((R - c0 Id) m).
        let r_minus = stress.samples[i].sub(&TensorField::identity_scaled(lat, cfg.c0));
        let rm = ctx.apply_weighted(&r_minus, &m_total, &ones);
        let div_rm = rm.div();
        // S0 = div_flux - n D_t kappa - div_rm - H'.
        let s0 = div_flux
            .sub(&n_dt_kappa)
            .sub(&div_rm)
            .sub(&ScalarField::constant(lat, ambient.dh_loss[i]));
        energy_mean_defect = energy_mean_defect.max(s0.mean().re.abs());
        let mut centered = s0;
        let idx = lat.mode_index([0, 0, 0]);
        centered.coeffs[idx] = Complex64::default();
        let n_phi = inverse_divergence_vector(&centered, 1e-6)?;
        current_samples.push(ctx.divide_refined_vec(&n_phi, &n_inv, &n_vals));
    }
    let current = TimeSampled::new(grid, current_samples);

    // Pressure-cancellation diagnostic: the low-pass of
    // div(m0p (x) m0p / n) + grad(p + c0 n) at the block scale.
    let pressure_cancellation = {
        let combo = ctx.outer_over(&m0p_all, &m0p_all, &n_inv).div().add(&VectorField::new([
            p_plus.derivative([1, 0, 0]),
            p_plus.derivative([0, 1, 0]),
            p_plus.derivative([0, 0, 1]),
        ]));
        let low = crate::operators::lp_low_pass_vec(&combo, cfg.lambda_tilde * 0.9);
        low.sup_norm() / combo.sup_norm().max(1e-300)
    };

    let diagnostics = StartDiagnostics {
        amplitude_floor: amp_sq_min.sqrt(),
        cbar,
        c_r,
        m0_sup: m_total.sup_norm(),
        e0_sup: e0.sup_norm(),
        b0_sup: b_total.sup_norm(),
        r0_sup: stress.samples[0].sup_norm(),
        phi0_sup: current.samples[0].sup_norm(),
        m_lower_measured: m_total.sup_norm() + 1.0,
        charge_mean_defect,
        energy_mean_defect,
        pressure_cancellation,
    };
    let tuple = ReynoldsTuple {
        m: m_series,
        elec: e_series,
        mag: b_series,
        stress,
        current,
        c: cfg.c0,
    };
    Ok((tuple, diagnostics))
}
