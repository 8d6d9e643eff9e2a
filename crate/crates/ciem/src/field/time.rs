use serde::{Deserialize, Serialize};

use crate::error::{CiemError, Result};

/// Uniform sample times `t_i = t0 + i * dt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(CiemError::Time(format!("need at least 2 steps, got {steps}")));
        }
        if !(t1 > t0) {
            return Err(CiemError::Time(format!("empty interval [{t0}, {t1}]")));
        }
        Ok(Self { t0, dt: (t1 - t0) / steps as f64, steps })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    #[inline]
    pub fn t1(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.time(i))
    }

    /// Index of the closest sample at or below `t` (clamped).
    pub fn floor_index(&self, t: f64) -> usize {
        let i = ((t - self.t0) / self.dt).floor();
        (i.max(0.0) as usize).min(self.steps)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 - 1e-12 && t <= self.t1() + 1e-12
    }

    /// Sub-grid covering `[a, b]` (indices snapped outward).
    pub fn window(&self, a: f64, b: f64) -> Result<(usize, usize)> {
        if a < self.t0 - 1e-10 || b > self.t1() + 1e-10 {
            return Err(CiemError::Margin {
                need: format!("[{a:.6}, {b:.6}]"),
                have: format!("[{:.6}, {:.6}]", self.t0, self.t1()),
            });
        }
        let lo = ((a - self.t0) / self.dt).floor().max(0.0) as usize;
        let hi = (((b - self.t0) / self.dt).ceil() as usize).min(self.steps);
        Ok((lo, hi))
    }
}

/// A field sampled on a uniform time grid.
#[derive(Debug, Clone)]
pub struct TimeSampled<F> {
    pub grid: TimeGrid,
    pub samples: Vec<F>,
}

impl<F> TimeSampled<F> {
    pub fn new(grid: TimeGrid, samples: Vec<F>) -> Self {
        assert_eq!(samples.len(), grid.len());
        Self { grid, samples }
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> F) -> Self {
        let samples = grid.times().map(&mut f).collect();
        Self { grid, samples }
    }

    pub fn map<G>(&self, mut f: impl FnMut(&F) -> G) -> TimeSampled<G> {
        TimeSampled { grid: self.grid, samples: self.samples.iter().map(&mut f).collect() }
    }
}

/// Weights of the 4th-order centered first-derivative stencil, with one-sided
/// biased stencils of matching order near the ends.
pub fn ddt_stencil(len: usize, i: usize) -> (isize, [f64; 5]) {
    assert!(len >= 5, "time derivative needs at least 5 samples");
    if i >= 2 && i + 2 < len {
        (-2, [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0])
    } else if i == 0 {
        (0, [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25])
    } else if i == 1 {
        (-1, [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0])
    } else if i + 1 == len {
        (-4, [0.25, -4.0 / 3.0, 3.0, -4.0, 25.0 / 12.0])
    } else {
        (-3, [-1.0 / 12.0, 0.5, -1.5, 5.0 / 6.0, 0.25])
    }
}

/// 4th-order discrete time derivative of a sampled scalar signal.
pub fn ddt_scalar(values: &[f64], dt: f64, i: usize) -> f64 {
    let (off, w) = ddt_stencil(values.len(), i);
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let idx = (i as isize + off + j as isize) as usize;
        acc += wj * values[idx];
    }
    acc / dt
}

/// 2nd-order centered time derivative (one-sided at the ends); used where a
/// quoted convergence rate pins the stencil order.
pub fn ddt2_scalar(values: &[f64], dt: f64, i: usize) -> f64 {
    let n = values.len();
    assert!(n >= 3);
    if i == 0 {
        (-1.5 * values[0] + 2.0 * values[1] - 0.5 * values[2]) / dt
    } else if i + 1 == n {
        (1.5 * values[n - 1] - 2.0 * values[n - 2] + 0.5 * values[n - 3]) / dt
    } else {
        (values[i + 1] - values[i - 1]) / (2.0 * dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_orders() {
        let grid = TimeGrid::new(0.0, 1.0, 40).unwrap();
        let vals: Vec<f64> = grid.times().map(|t| (2.0 * t).sin()).collect();
        for i in [0usize, 1, 20, 39, 40] {
            let t = grid.time(i);
            let d4 = ddt_scalar(&vals, grid.dt, i);
            assert!(
                (d4 - 2.0 * (2.0 * t).cos()).abs() < 5e-6,
                "4th-order stencil at {i}: {d4}"
            );
        }
        let d2 = ddt2_scalar(&vals, grid.dt, 20);
        assert!((d2 - 2.0 * (2.0 * grid.time(20)).cos()).abs() < 1e-3);
    }

    #[test]
    fn window_margin_errors() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert!(grid.window(-0.2, 0.5).is_err());
        let (lo, hi) = grid.window(0.15, 0.55).unwrap();
        assert!(grid.time(lo) <= 0.15 && grid.time(hi) >= 0.55);
    }
}
