use serde::{Deserialize, Serialize};

use crate::error::{CiemError, Result};

/// Discretization of the periodic box `T^3` (side length `2*pi`).
///
/// Fields are stored as Fourier coefficients on the cube of wavevectors
/// `|k_i| <= k_cut`; `n_grid` is the nominal collocation grid used for
/// snapshots and reports. Nonlinear operations internally use finer,
/// zero-padded grids so that retained modes are alias-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice3 {
    /// Collocation points per axis (even).
    pub n_grid: usize,
    /// Spectral cutoff: modes with `|k_i| <= k_cut` are retained.
    pub k_cut: i32,
}

/// FFT-friendly sizes (products of 2, 3, 5).
const FAST_SIZES: &[usize] = &[
    4, 6, 8, 10, 12, 16, 18, 20, 24, 27, 30, 32, 36, 40, 45, 48, 54, 60, 64, 72, 80, 90, 96, 100,
    108, 120, 128, 135, 144, 150, 160, 180, 192, 200, 216, 240, 250, 256, 270, 288, 300, 320, 360,
    384, 400, 432, 450, 480, 500, 512,
];

pub fn next_fast_size(n: usize) -> usize {
    for &s in FAST_SIZES {
        if s >= n {
            return s;
        }
    }
    n.next_power_of_two()
}

impl Lattice3 {
    pub fn new(n_grid: usize, k_cut: i32) -> Result<Self> {
        if k_cut < 1 {
            return Err(CiemError::Lattice(format!("cutoff must be >= 1, got {k_cut}")));
        }
        if n_grid % 2 != 0 {
            return Err(CiemError::Lattice(format!("grid size must be even, got {n_grid}")));
        }
        if n_grid < 2 * k_cut as usize + 2 {
            return Err(CiemError::Lattice(format!(
                "grid size {n_grid} too small for cutoff {k_cut} (need >= {})",
                2 * k_cut + 2
            )));
        }
        Ok(Self { n_grid, k_cut })
    }

    /// Modes per axis, `2K + 1`.
    #[inline]
    pub fn modes_per_axis(&self) -> usize {
        2 * self.k_cut as usize + 1
    }

    /// Total number of retained modes, `(2K + 1)^3`.
    #[inline]
    pub fn mode_count(&self) -> usize {
        let m = self.modes_per_axis();
        m * m * m
    }

    /// Flat index of wavevector `k` in lexicographic `(k1, k2, k3)` order.
    #[inline]
    pub fn mode_index(&self, k: [i32; 3]) -> usize {
        let m = self.modes_per_axis();
        let kk = self.k_cut;
        debug_assert!(k.iter().all(|&ki| ki.abs() <= kk));
        (((k[0] + kk) as usize * m) + (k[1] + kk) as usize) * m + (k[2] + kk) as usize
    }

    /// Wavevector belonging to a flat index (inverse of `mode_index`).
    #[inline]
    pub fn mode_at(&self, idx: usize) -> [i32; 3] {
        let m = self.modes_per_axis();
        let kk = self.k_cut;
        let k3 = (idx % m) as i32 - kk;
        let k2 = ((idx / m) % m) as i32 - kk;
        let k1 = ((idx / (m * m)) % m) as i32 - kk;
        [k1, k2, k3]
    }

    /// Iterate all retained wavevectors in storage order.
    pub fn modes(&self) -> impl Iterator<Item = [i32; 3]> + '_ {
        let kk = self.k_cut;
        (-kk..=kk).flat_map(move |k1| {
            (-kk..=kk).flat_map(move |k2| (-kk..=kk).map(move |k3| [k1, k2, k3]))
        })
    }

    /// Node coordinate on a grid with `n` points per axis: `x_j = 2*pi*j/n`.
    #[inline]
    pub fn node_on(n: usize, j: [usize; 3]) -> [f64; 3] {
        let h = std::f64::consts::TAU / n as f64;
        [j[0] as f64 * h, j[1] as f64 * h, j[2] as f64 * h]
    }

    /// Grid size on which products of `order` cutoff-limited factors are
    /// alias-free in the retained band: `n >= (order + 1) * K + 1`.
    pub fn product_grid(&self, order: usize) -> usize {
        let need = (order + 1) * self.k_cut as usize + 1;
        next_fast_size(need.max(self.n_grid))
    }

    /// Grid used for plain (linear) evaluations.
    pub fn eval_grid(&self) -> usize {
        self.product_grid(1)
    }
}
