//! Thin 3D FFT layer over `rustfft` with a per-size plan cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

struct PlanCache {
    fwd: HashMap<usize, Arc<dyn Fft<f64>>>,
    inv: HashMap<usize, Arc<dyn Fft<f64>>>,
}

static CACHE: Mutex<Option<PlanCache>> = Mutex::new(None);

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut guard = CACHE.lock().unwrap();
    let cache = guard.get_or_insert_with(|| PlanCache { fwd: HashMap::new(), inv: HashMap::new() });
    let map = if inverse { &mut cache.inv } else { &mut cache.fwd };
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// In-place 3D DFT of `data` (length `n^3`, axis-3 contiguous).
///
/// Forward uses the `e^{-i k x}` convention and applies no normalization;
/// callers divide by `n^3` to obtain Fourier coefficients.
pub fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n);
    let fft = plan(n, inverse);

    // Axis 3 (contiguous lines).
    data.par_chunks_mut(n).for_each(|line| {
        fft.process(line);
    });

    // Axis 2: lines with stride n, within each i1-plane.
    data.par_chunks_mut(n * n).for_each(|plane| {
        let mut buf = vec![Complex64::default(); n];
        for i3 in 0..n {
            for i2 in 0..n {
                buf[i2] = plane[i2 * n + i3];
            }
            fft.process(&mut buf);
            for i2 in 0..n {
                plane[i2 * n + i3] = buf[i2];
            }
        }
    });

    // Axis 1: stride n*n lines, one per (i2, i3) pair.
    let nn = n * n;
    let ptr = SendPtr(data.as_mut_ptr());
    (0..nn).into_par_iter().for_each(|rem| {
        let mut buf = vec![Complex64::default(); n];
        // Safety: lines for distinct `rem` touch disjoint indices rem + i1*nn.
        let data = unsafe { std::slice::from_raw_parts_mut(ptr.get(), n * nn) };
        for i1 in 0..n {
            buf[i1] = data[i1 * nn + rem];
        }
        fft.process(&mut buf);
        for i1 in 0..n {
            data[i1 * nn + rem] = buf[i1];
        }
    });
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}
impl SendPtr {
    fn get(self) -> *mut Complex64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_roundtrip() {
        let n = 12;
        let mut data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i % 17) as f64 * 0.3 - 1.0, (i % 5) as f64 * 0.1))
            .collect();
        let orig = data.clone();
        fft3(&mut data, n, false);
        fft3(&mut data, n, true);
        let scale = (n * n * n) as f64;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_transforms_to_delta() {
        let n = 8;
        let tau = std::f64::consts::TAU;
        let mut data: Vec<Complex64> = Vec::with_capacity(n * n * n);
        for i1 in 0..n {
            for _i2 in 0..n {
                for _i3 in 0..n {
                    let x = tau * i1 as f64 / n as f64;
                    data.push(Complex64::new(0.0, x).exp());
                }
            }
        }
        fft3(&mut data, n, false);
        let vol = (n * n * n) as f64;
        // e^{i x_1} has coefficient 1 at k = (1,0,0) under e^{-ikx} forward.
        let idx = 1 * n * n;
        assert!((data[idx] / vol - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((data[0] / vol).norm() < 1e-13);
    }
}
