//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!   magic `b"CIEM"` | format version `u32` | `n_grid: u32` | `k_cut: i32` |
//!   `components: u32` | `samples: u32` | `t0: f64` | `t1: f64` |
//!   coefficient payload.
//!
//! The payload holds, for each time sample, for each component, the
//! `(2K+1)^3` coefficients in lexicographic `(k1, k2, k3)` order, each as an
//! `(re, im)` pair of `f64`. Static fields use `samples = 1`, `t0 = t1`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::lattice::Lattice3;
use super::scalar::ScalarField;
use super::time::{TimeGrid, TimeSampled};
use crate::error::{CiemError, Result};

pub const MAGIC: &[u8; 4] = b"CIEM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub lattice: Lattice3,
    pub t0: f64,
    pub t1: f64,
    /// `samples x components` scalar fields, sample-major.
    pub fields: Vec<Vec<ScalarField>>,
}

impl Snapshot {
    pub fn of_static(fields: Vec<ScalarField>) -> Self {
        let lattice = fields[0].lattice;
        Self { lattice, t0: 0.0, t1: 0.0, fields: vec![fields] }
    }

    pub fn of_sampled(ts: &TimeSampled<Vec<ScalarField>>) -> Self {
        let lattice = ts.samples[0][0].lattice;
        Self { lattice, t0: ts.grid.t0, t1: ts.grid.t1(), fields: ts.samples.clone() }
    }

    pub fn to_time_sampled(&self) -> Result<TimeSampled<Vec<ScalarField>>> {
        let grid = TimeGrid::new(self.t0, self.t1, self.fields.len() - 1)?;
        Ok(TimeSampled::new(grid, self.fields.clone()))
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let comps = self.fields[0].len() as u32;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.lattice.n_grid as u32).to_le_bytes())?;
        w.write_all(&self.lattice.k_cut.to_le_bytes())?;
        w.write_all(&comps.to_le_bytes())?;
        w.write_all(&(self.fields.len() as u32).to_le_bytes())?;
        w.write_all(&self.t0.to_le_bytes())?;
        w.write_all(&self.t1.to_le_bytes())?;
        for sample in &self.fields {
            if sample.len() as u32 != comps {
                return Err(CiemError::Snapshot("ragged component count".into()));
            }
            for field in sample {
                for c in &field.coeffs {
                    w.write_all(&c.re.to_le_bytes())?;
                    w.write_all(&c.im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Snapshot> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CiemError::Snapshot(format!("bad magic {magic:?}")));
        }
        let version = read_u32(r)?;
        if version != FORMAT_VERSION {
            return Err(CiemError::Snapshot(format!("unsupported format version {version}")));
        }
        let n_grid = read_u32(r)? as usize;
        let k_cut = read_i32(r)?;
        let comps = read_u32(r)? as usize;
        let samples = read_u32(r)? as usize;
        let t0 = read_f64(r)?;
        let t1 = read_f64(r)?;
        let lattice = Lattice3::new(n_grid, k_cut)?;
        let mode_count = lattice.mode_count();
        let mut fields = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut sample = Vec::with_capacity(comps);
            for _ in 0..comps {
                let mut coeffs = Vec::with_capacity(mode_count);
                for _ in 0..mode_count {
                    let re = read_f64(r)?;
                    let im = read_f64(r)?;
                    coeffs.push(Complex64::new(re, im));
                }
                sample.push(ScalarField { lattice, coeffs });
            }
            fields.push(sample);
        }
        Ok(Snapshot { lattice, t0, t1, fields })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_i32(r: &mut impl Read) -> Result<i32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(i32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_bit_identical() {
        let lat = Lattice3::new(12, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let fields =
            vec![ScalarField::random(lat, 3, 1.0, &mut rng), ScalarField::random(lat, 2, 0.5, &mut rng)];
        let snap = Snapshot::of_static(fields);
        let mut buf = Vec::new();
        snap.write(&mut buf).unwrap();
        let back = Snapshot::read(&mut buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        back.write(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert_eq!(back.fields[0][0].coeffs, snap.fields[0][0].coeffs);
    }

    #[test]
    fn rejects_bad_magic() {
        let data = b"NOPE\x01\x00\x00\x00";
        assert!(Snapshot::read(&mut data.as_slice()).is_err());
    }
}
