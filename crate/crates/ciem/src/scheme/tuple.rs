//! The iterate carrier: one dissipative tuple `(m, E, B, c, R, phi)` plus
//! the ambient data (densities, pressure, internal energy, energy loss).

use serde::Serialize;

use crate::error::{CiemError, Result};
use crate::field::{Lattice3, ScalarField, TensorField, TimeGrid, TimeSampled, VectorField};

/// Barotropic pressure law.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum Pressure {
    /// `p(n) = coeff * n^exponent`.
    PowerLaw { coeff: f64, exponent: f64 },
}

impl Pressure {
    pub fn eval(&self, n: f64) -> f64 {
        match self {
            Pressure::PowerLaw { coeff, exponent } => coeff * n.powf(*exponent),
        }
    }
}

/// Tabulated internal energy `e(n)` solving `n^2 e'(n) = p(n)`, built by
/// dense cumulative quadrature of `p(s)/s^2` from the lower density bound.
#[derive(Debug, Clone)]
pub struct EnergyTable {
    n_min: f64,
    dn: f64,
    values: Vec<f64>,
}

impl EnergyTable {
    pub fn build(pressure: &Pressure, n_min: f64, n_max: f64) -> EnergyTable {
        assert!(n_min > 0.0 && n_max > n_min);
        let cells = 8192usize;
        let lo = 0.9 * n_min;
        let hi = 1.1 * n_max;
        let dn = (hi - lo) / cells as f64;
        let integrand = |s: f64| pressure.eval(s) / (s * s);
        let mut values = Vec::with_capacity(cells + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = lo + i as f64 * dn;
            // Simpson on each cell.
            acc += dn / 6.0 * (integrand(a) + 4.0 * integrand(a + 0.5 * dn) + integrand(a + dn));
            values.push(acc);
        }
        EnergyTable { n_min: lo, dn, values }
    }

    pub fn eval(&self, n: f64) -> f64 {
        let u = (n - self.n_min) / self.dn;
        let i = (u.floor() as usize).clamp(1, self.values.len() - 3);
        let t = u - i as f64;
        // 4-point Lagrange around i.
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t * t - 1.0) * (t - 2.0) / 2.0,
            -t * (t + 1.0) * (t - 2.0) / 2.0,
            t * (t * t - 1.0) / 6.0,
        ];
        w[0] * self.values[i - 1]
            + w[1] * self.values[i]
            + w[2] * self.values[i + 1]
            + w[3] * self.values[i + 2]
    }
}

/// Ambient data shared by all iterates of a run.
pub struct Ambient {
    pub lattice: Lattice3,
    pub grid: TimeGrid,
    /// Electron-fluid density `n(t, x) >= floor`.
    pub n: TimeSampled<ScalarField>,
    /// Analytic time derivative of the density.
    pub dt_n: TimeSampled<ScalarField>,
    /// Ion background `h(x)`.
    pub h: ScalarField,
    pub pressure: Pressure,
    pub energy: EnergyTable,
    /// Energy loss `H(t)` and its derivative at the samples.
    pub h_loss: Vec<f64>,
    pub dh_loss: Vec<f64>,
    pub n_floor: f64,
}

impl Ambient {
    /// Stationary ambient: `n = n(x)` for all t.
    #[allow(clippy::too_many_arguments)]
    pub fn stationary(
        lattice: Lattice3,
        grid: TimeGrid,
        n0: ScalarField,
        h: ScalarField,
        pressure: Pressure,
        h_loss: Vec<f64>,
        dh_loss: Vec<f64>,
    ) -> Result<Ambient> {
        let n_grid = n0.to_grid(lattice.eval_grid());
        let n_min = n_grid.values.iter().map(|v| v.re).fold(f64::MAX, f64::min);
        let n_max = n_grid.values.iter().map(|v| v.re).fold(f64::MIN, f64::max);
        if n_min <= 0.0 {
            return Err(CiemError::Scheme(format!("density floor violated: min n = {n_min}")));
        }
        let mass_n = n0.mean().re;
        let mass_h = h.mean().re;
        if (mass_n - mass_h).abs() > 1e-10 * mass_h.abs().max(1.0) {
            return Err(CiemError::Scheme(format!(
                "density/ion mass mismatch: {mass_n} vs {mass_h}"
            )));
        }
        let energy = EnergyTable::build(&pressure, n_min, n_max);
        Ok(Ambient {
            lattice,
            grid,
            n: TimeSampled::from_fn(grid, |_| n0.clone()),
            dt_n: TimeSampled::from_fn(grid, |_| ScalarField::zeros(lattice)),
            h,
            pressure,
            energy,
            h_loss,
            dh_loss,
            n_floor: n_min,
        })
    }

    /// Restrict to a sub-grid (index slice of the samples).
    pub fn restrict(&self, lo: usize, hi: usize) -> Ambient {
        let grid = TimeGrid { t0: self.grid.time(lo), dt: self.grid.dt, steps: hi - lo };
        Ambient {
            lattice: self.lattice,
            grid,
            n: TimeSampled::new(grid, self.n.samples[lo..=hi].to_vec()),
            dt_n: TimeSampled::new(grid, self.dt_n.samples[lo..=hi].to_vec()),
            h: self.h.clone(),
            pressure: self.pressure,
            energy: self.energy.clone(),
            h_loss: self.h_loss[lo..=hi].to_vec(),
            dh_loss: self.dh_loss[lo..=hi].to_vec(),
            n_floor: self.n_floor,
        }
    }
}

/// One iterate of the scheme.
#[derive(Clone)]
pub struct ReynoldsTuple {
    pub m: TimeSampled<VectorField>,
    pub elec: TimeSampled<VectorField>,
    pub mag: TimeSampled<VectorField>,
    pub stress: TimeSampled<TensorField>,
    pub current: TimeSampled<VectorField>,
    pub c: f64,
}

impl ReynoldsTuple {
    pub fn grid(&self) -> TimeGrid {
        self.m.grid
    }

    pub fn restrict(&self, lo: usize, hi: usize) -> ReynoldsTuple {
        let grid = TimeGrid { t0: self.m.grid.time(lo), dt: self.m.grid.dt, steps: hi - lo };
        let take_v = |s: &TimeSampled<VectorField>| TimeSampled::new(grid, s.samples[lo..=hi].to_vec());
        ReynoldsTuple {
            m: take_v(&self.m),
            elec: take_v(&self.elec),
            mag: take_v(&self.mag),
            stress: TimeSampled::new(grid, self.stress.samples[lo..=hi].to_vec()),
            current: take_v(&self.current),
            c: self.c,
        }
    }
}

/// Structural residuals of the tuple invariants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TupleInvariants {
    /// `|int n - int h|` relative.
    pub mass_match: f64,
    /// `|div E - (h - n)|` sup.
    pub gauss_e: f64,
    pub gauss_b: f64,
    /// `|dt n + div m|` sup (analytic density derivative).
    pub continuity: f64,
    pub stress_asymmetry: f64,
}

pub fn check_invariants(tuple: &ReynoldsTuple, ambient: &Ambient) -> Result<TupleInvariants> {
    let grid = tuple.grid();
    let (lo, _hi) = ambient.grid.window(grid.t0, grid.t1())?;
    let mut out = TupleInvariants {
        mass_match: 0.0,
        gauss_e: 0.0,
        gauss_b: 0.0,
        continuity: 0.0,
        stress_asymmetry: 0.0,
    };
    let h_mass = ambient.h.mean().re;
    for i in 0..grid.len() {
        let ai = lo + i;
        let n_i = &ambient.n.samples[ai];
        out.mass_match = out
            .mass_match
            .max((n_i.mean().re - h_mass).abs() / h_mass.abs().max(1.0));
        let rho = ambient.h.sub(n_i);
        out.gauss_e = out.gauss_e.max(tuple.elec.samples[i].div().sub(&rho).sup_norm());
        out.gauss_b = out.gauss_b.max(tuple.mag.samples[i].div().sup_norm());
        let cont = ambient.dt_n.samples[ai].add(&tuple.m.samples[i].div());
        out.continuity = out.continuity.max(cont.sup_norm());
        out.stress_asymmetry = out.stress_asymmetry.max(tuple.stress.samples[i].asymmetry());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn energy_table_matches_power_law() {
        // p = k n^g: e(n) = k (n^{g-1} - ref^{g-1})/(g-1).
        let p = Pressure::PowerLaw { coeff: 0.4, exponent: 5.0 / 3.0 };
        let table = EnergyTable::build(&p, 0.5, 2.0);
        let n_ref: f64 = 0.45; // = 0.9 * n_min
        for n in [0.5f64, 0.8, 1.3, 1.9] {
            let analytic = 0.4 * (n.powf(2.0 / 3.0) - n_ref.powf(2.0 / 3.0)) / (2.0 / 3.0);
            let got = table.eval(n);
            assert!((got - analytic).abs() < 1e-8, "e({n}) = {got}, want {analytic}");
        }
    }

    #[test]
    fn stationary_ambient_checks_mass() {
        let lat = Lattice3::new(16, 5).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let mut n0 = ScalarField::constant(lat, 1.0);
        n0.set_coeff([1, 0, 0], Complex64::new(0.05, 0.0));
        n0.set_coeff([-1, 0, 0], Complex64::new(0.05, 0.0));
        let h = ScalarField::constant(lat, 1.0);
        let amb = Ambient::stationary(
            lat,
            grid,
            n0,
            h,
            Pressure::PowerLaw { coeff: 0.1, exponent: 2.0 },
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
        )
        .unwrap();
        assert!(amb.n_floor > 0.8);
        // Mismatched masses rejected.
        let bad_h = ScalarField::constant(lat, 1.2);
        assert!(Ambient::stationary(
            lat,
            grid,
            ScalarField::constant(lat, 1.0),
            bad_h,
            Pressure::PowerLaw { coeff: 0.1, exponent: 2.0 },
            vec![0.0; grid.len()],
            vec![0.0; grid.len()],
        )
        .is_err());
    }
}
