//! Iteration parameters: the frequency/amplitude ladder, mollification
//! scales, and cutoff parameters, all recomputed deterministically from
//! `(q, lambda0, b, alpha)` and the run constants.

use serde::{Deserialize, Serialize};

use crate::error::{CiemError, Result};

/// Constants measured at runtime or overridden by the configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RunConstants {
    /// Amplitude constant `M` of the inductive bounds.
    pub m_big: f64,
    /// Lower amplitude constant (the starting-tuple budget).
    pub m_lower: f64,
    /// Drift-regularity constant entering `tau_q`.
    pub c_ring_n: f64,
    /// Geometric pipe constant (measured by the placement certifier).
    pub eta: f64,
    /// Cap on the coefficient-tail exponent.
    pub n0_cap: u32,
}

impl Default for RunConstants {
    fn default() -> Self {
        Self { m_big: 5.0, m_lower: 3.0, c_ring_n: 1.0, eta: 0.5, n0_cap: 8 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationParams {
    pub q: u32,
    pub lambda0: f64,
    pub b: f64,
    pub alpha: f64,
    /// `gamma = (b - 1)^2`.
    pub gamma: f64,
    pub lambda_q: f64,
    pub lambda_next: f64,
    pub delta_q: f64,
    pub delta_next: f64,
    pub delta_next2: f64,
    /// `c_q = sum_{j > q} delta_j`, summed until the increment drops
    /// below 1e-16.
    pub c_q: f64,
    pub c_next: f64,
    /// Space/time mollification scales.
    pub ell: f64,
    pub ell_t: f64,
    /// Cell parameter `1/mu`, a positive multiple of 3.
    pub mu_inv: i64,
    /// Window length `tau_q`.
    pub tau: f64,
    /// Tail exponent (capped).
    pub n0_tilde: u32,
    pub constants: RunConstants,
}

fn lambda_at(lambda0: f64, b: f64, q: u32) -> f64 {
    lambda0.powf(b.powi(q as i32)).ceil()
}

fn delta_at(lambda0: f64, b: f64, alpha: f64, q: u32) -> f64 {
    lambda_at(lambda0, b, q).powf(-2.0 * alpha)
}

pub fn compute_params(
    q: u32,
    lambda0: f64,
    b: f64,
    alpha: f64,
    constants: RunConstants,
) -> Result<IterationParams> {
    if !(alpha > 0.0 && alpha < 1.0 / 7.0) {
        return Err(CiemError::Scheme(format!("alpha = {alpha} outside (0, 1/7)")));
    }
    if !(b > 1.0 && b < 3.0) {
        return Err(CiemError::Scheme(format!("b = {b} outside (1, 3)")));
    }
    if lambda0 < 2.0 {
        return Err(CiemError::Scheme(format!("lambda0 = {lambda0} must be >= 2")));
    }
    let gamma = (b - 1.0) * (b - 1.0);
    let lambda_q = lambda_at(lambda0, b, q);
    let lambda_next = lambda_at(lambda0, b, q + 1);
    let delta_q = delta_at(lambda0, b, alpha, q);
    let delta_next = delta_at(lambda0, b, alpha, q + 1);
    let delta_next2 = delta_at(lambda0, b, alpha, q + 2);
    let c_sum = |from: u32| -> f64 {
        let mut acc = 0.0;
        for j in (from + 1)..10_000 {
            let d = delta_at(lambda0, b, alpha, j);
            acc += d;
            if d < 1e-16 {
                break;
            }
        }
        acc
    };
    let c_q = c_sum(q);
    let c_next = c_sum(q + 1);

    let ell = (delta_next / delta_q).powf(3.0 / 8.0)
        / (lambda_q.powf(0.75) * lambda_next.powf(0.25));
    let ell_t = 1.0
        / (lambda_q.powf(0.5 - 3.0 * gamma)
            * lambda_next.powf(0.5)
            * delta_q.powf(0.25)
            * delta_next.powf(0.25));
    let mu_raw = lambda_q.sqrt() * lambda_next.sqrt() * delta_q.powf(0.25)
        / delta_next.powf(0.25);
    let mu_inv = 3 * ((mu_raw / 3.0).ceil().max(1.0) as i64);
    let tau = 1.0
        / (40.0
            * std::f64::consts::PI
            * constants.c_ring_n
            * constants.m_big
            * lambda_q.sqrt()
            * lambda_next.sqrt()
            * delta_q.powf(0.25)
            * delta_next.powf(0.25)
            / constants.eta);
    let n0_raw = (2.0 * b * (2.0 + alpha) / ((b - 1.0) * (1.0 - alpha))).ceil() as u32;
    Ok(IterationParams {
        q,
        lambda0,
        b,
        alpha,
        gamma,
        lambda_q,
        lambda_next,
        delta_q,
        delta_next,
        delta_next2,
        c_q,
        c_next,
        ell,
        ell_t,
        mu_inv,
        tau,
        n0_tilde: n0_raw.min(constants.n0_cap),
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_ladder() {
        let p1 = compute_params(1, 2.0, 2.0, 0.125, RunConstants::default()).unwrap();
        assert_eq!(p1.lambda_q, 4.0);
        let p2 = compute_params(2, 2.0, 2.0, 0.125, RunConstants::default()).unwrap();
        assert_eq!(p2.lambda_q, 16.0);
    }

    #[test]
    fn amplitude_at_eighth() {
        // alpha = 1/8: delta_1 = 4^{-1/4}.
        let p = compute_params(1, 2.0, 2.0, 0.125, RunConstants::default()).unwrap();
        assert!((p.delta_q - 4.0f64.powf(-0.25)).abs() < 1e-12);
        assert!((p.delta_q - 0.8408964152537145).abs() < 1e-12);
    }

    #[test]
    fn gamma_of_b() {
        let p = compute_params(0, 2.0, 2.0, 0.125, RunConstants::default()).unwrap();
        assert_eq!(p.gamma, 1.0);
    }

    #[test]
    fn tail_sum_converges_and_mu_divisible() {
        let p = compute_params(0, 4.0, 1.2, 0.13, RunConstants::default()).unwrap();
        assert!(p.c_q.is_finite() && p.c_q > p.delta_next);
        assert_eq!(p.mu_inv % 3, 0);
        // c_{q+1} = c_q - delta_{q+1}.
        assert!((p.c_next - (p.c_q - p.delta_next)).abs() < 1e-12);
    }

    #[test]
    fn parameter_domains() {
        assert!(compute_params(0, 2.0, 2.0, 0.2, RunConstants::default()).is_err());
        assert!(compute_params(0, 2.0, 0.9, 0.1, RunConstants::default()).is_err());
    }
}
