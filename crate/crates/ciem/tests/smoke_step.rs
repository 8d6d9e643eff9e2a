//! End-to-end smoke test: build a stationary start tuple, check its
//! residuals, run one correction step at toy scale, and check the closure
//! residuals of the output.

use num_complex::Complex64;
use ciem::bootstrap::{start_stationary, StartConfig};
use ciem::field::{Lattice3, ScalarField, TimeGrid};
use ciem::harness::verify;
use ciem::scheme::{compute_params, step, Ambient, Pressure, RunConstants, StepOptions};

#[test]
fn bootstrap_and_one_step() {
    let lat = Lattice3::new(16, 5).unwrap();
    let constants = RunConstants {
        m_big: 5.0,
        m_lower: 3.0,
        c_ring_n: 0.003,
        eta: 0.5,
        n0_cap: 8,
    };
    let params = compute_params(0, 2.0, 1.3, 0.13, constants).unwrap();
    println!(
        "params: lambda1 = {}, delta1 = {:.4}, ell = {:.4}, ell_t = {:.4}, tau = {:.4}, mu_inv = {}",
        params.lambda_next, params.delta_next, params.ell, params.ell_t, params.tau, params.mu_inv
    );

    // Outer grid wide enough for the margins, with t = 0 on the grid.
    let margin = 2.0 * params.ell + params.ell_t + 0.1;
    let dt = params.tau / 8.0;
    let steps_left = (margin / dt).ceil() as usize + 20;
    let t0 = -(steps_left as f64) * dt;
    let total_steps = 2 * steps_left + 16;
    let outer = TimeGrid { t0, dt, steps: total_steps };
    println!("outer grid: [{:.3}, {:.3}] x {} samples", outer.t0, outer.t1(), outer.len());

    // Ambient: gently structured density; the ion background matches it so
    // the start electric field vanishes and the start flow stays mild.
    let mut n0 = ScalarField::constant(lat, 1.0);
    n0.set_coeff([1, 0, 0], Complex64::new(0.02, 0.0));
    n0.set_coeff([-1, 0, 0], Complex64::new(0.02, 0.0));
    n0.set_coeff([0, 1, 1], Complex64::new(0.0, 0.01));
    n0.set_coeff([0, -1, -1], Complex64::new(0.0, -0.01));
    let h = n0.clone();
    let ambient = Ambient::stationary(
        lat,
        outer,
        n0,
        h,
        Pressure::PowerLaw { coeff: 0.05, exponent: 5.0 / 3.0 },
        vec![0.0; outer.len()],
        vec![0.0; outer.len()],
    )
    .unwrap();

    // Start tuple.
    let start_cfg = StartConfig {
        lambda_tilde: 1.0,
        pressure_margin: 1.01,
        r_tilde: 0.25,
        km: 2,
        c0: params.c_q,
    };
    let (tuple0, diag0) = start_stationary(&ambient, &start_cfg).unwrap();
    println!("start: {diag0:#?}");
    assert!(diag0.charge_mean_defect < 1e-10, "charge mean {}", diag0.charge_mean_defect);
    assert!(diag0.energy_mean_defect < 1e-8, "energy mean {}", diag0.energy_mean_defect);

    let table0 = verify(&tuple0, &ambient, (-0.02, 0.1)).unwrap();
    println!("start residuals: {table0:#?}");
    assert!(table0.momentum.sup_rel < 1e-6, "start momentum {}", table0.momentum.sup_rel);
    assert!(table0.energy.sup_rel < 1e-5, "start energy {}", table0.energy.sup_rel);
    assert!(table0.gauss_e.sup_rel < 1e-8);
    assert!(table0.gauss_b.sup_rel < 1e-8);
    assert!(table0.continuity.sup_rel < 1e-8);

    // One correction step on a small working window around [0, T].
    let w_steps = 16usize;
    let w_lo = outer.floor_index(-4.0 * dt);
    let working = TimeGrid { t0: outer.time(w_lo), dt, steps: w_steps };
    assert!(working.times().any(|t| t.abs() < 1e-12));
    let out = step(&tuple0, &ambient, &params, working, &StepOptions::default()).unwrap();
    println!("step diagnostics: stress_id {:.3e}, current_id {:.3e}, mean_defect {:.3e}",
        out.diagnostics.stress_identity_defect,
        out.diagnostics.current_identity_defect,
        out.diagnostics.invdiv_mean_defect);

    assert!(out.diagnostics.stress_identity_defect < 1e-6,
        "stress identity {}", out.diagnostics.stress_identity_defect);
    assert!(out.diagnostics.current_identity_defect < 1e-6,
        "current identity {}", out.diagnostics.current_identity_defect);

    let interior = (working.time(3), working.time(working.len() - 4));
    let table1 = verify(&out.tuple, &ambient, interior).unwrap();
    println!("step residuals: {table1:#?}");
    assert!(table1.momentum.l2_rel < 1e-4, "momentum closure {}", table1.momentum.l2_rel);
    assert!(table1.energy.l2_rel < 1e-4, "energy closure {}", table1.energy.l2_rel);
    assert!(table1.gauss_e.sup_rel < 1e-8, "gauss E {}", table1.gauss_e.sup_rel);
    assert!(table1.gauss_b.sup_rel < 1e-8, "gauss B {}", table1.gauss_b.sup_rel);
    assert!(table1.continuity.sup_rel < 1e-8, "continuity {}", table1.continuity.sup_rel);
}
