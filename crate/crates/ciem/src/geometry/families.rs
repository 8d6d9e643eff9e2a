//! The 27 direction families used by the perturbation, one per residue
//! class of the spatial cell index. Each family carries six stress
//! directions whose dyads form a basis of the symmetric matrices and four
//! current directions forming an orthogonal frame plus its negative sum.
//!
//! Families are generated from the two base families by odd integer
//! scalings, which keeps all invariants (dyad span, orthogonality,
//! reflection symmetries of the profile construction) and makes pairwise
//! disjointness immediate from the vector norms. Every invariant is
//! re-verified at construction and a violation aborts startup.

use serde::Serialize;

use crate::error::{CiemError, Result};

pub type IVec3 = [i64; 3];

/// Base stress directions: `(1, +-1, 0), (1, 0, +-1), (0, 1, +-1)`.
pub const BASE_R: [IVec3; 6] =
    [[1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1], [0, 1, 1], [0, 1, -1]];

/// Base current directions: the coordinate frame and `-(e1 + e2 + e3)`.
pub const BASE_PHI: [IVec3; 4] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, -1, -1]];

#[derive(Debug, Clone, Serialize)]
pub struct DirectionFamily {
    /// Residue class `j` of the cell index, packed as `j1 + 3 j2 + 9 j3`.
    pub class_index: usize,
    pub stress_dirs: [IVec3; 6],
    pub current_dirs: [IVec3; 4],
    /// The constant `C` with `sum f (x) f = C Id` over the stress set.
    pub dyad_constant: i64,
}

fn dot(a: IVec3, b: IVec3) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Index a symmetric 3x3 matrix as a 6-vector (diagonal then off-diagonal).
pub fn sym_coords(m: &[[f64; 3]; 3]) -> [f64; 6] {
    [m[0][0], m[1][1], m[2][2], m[0][1], m[0][2], m[1][2]]
}

pub fn dyad(f: IVec3) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (f[i] * f[j]) as f64;
        }
    }
    m
}

impl DirectionFamily {
    fn verify(&self) -> Result<()> {
        // Dyad sum proportional to the identity.
        let mut sum = [[0i64; 3]; 3];
        for f in &self.stress_dirs {
            for i in 0..3 {
                for j in 0..3 {
                    sum[i][j] += f[i] * f[j];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { self.dyad_constant } else { 0 };
                if sum[i][j] != expect {
                    return Err(CiemError::OutsideAdmissible(format!(
                        "family {}: dyad sum not {} Id",
                        self.class_index, self.dyad_constant
                    )));
                }
            }
        }
        // The six dyads span the symmetric matrices (rank 6).
        let rows: Vec<[f64; 6]> =
            self.stress_dirs.iter().map(|&f| sym_coords(&dyad(f))).collect();
        if rank6(&rows) != 6 {
            return Err(CiemError::OutsideAdmissible(format!(
                "family {}: dyads do not span Sym(3)",
                self.class_index
            )));
        }
        // Orthogonal frame and closing vector for the current directions.
        let [f1, f2, f3, f4] = self.current_dirs;
        if dot(f1, f2) != 0 || dot(f1, f3) != 0 || dot(f2, f3) != 0 {
            return Err(CiemError::OutsideAdmissible(format!(
                "family {}: current frame not orthogonal",
                self.class_index
            )));
        }
        for ax in 0..3 {
            if f4[ax] != -(f1[ax] + f2[ax] + f3[ax]) {
                return Err(CiemError::OutsideAdmissible(format!(
                    "family {}: fourth direction is not -(f1+f2+f3)",
                    self.class_index
                )));
            }
        }
        Ok(())
    }
}

/// Gaussian-elimination rank of a set of 6-vectors.
fn rank6(rows: &[[f64; 6]]) -> usize {
    let mut m: Vec<[f64; 6]> = rows.to_vec();
    let mut rank = 0;
    for col in 0..6 {
        let Some(pivot) = (rank..m.len()).max_by(|&a, &b| {
            m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
        }) else {
            break;
        };
        if m[pivot][col].abs() < 1e-9 {
            continue;
        }
        m.swap(rank, pivot);
        let p = m[rank][col];
        for r in 0..m.len() {
            if r != rank {
                let s = m[r][col] / p;
                for c in 0..6 {
                    m[r][c] -= s * m[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Build the 27 pairwise disjoint families and verify every invariant.
pub fn build_families() -> Result<Vec<DirectionFamily>> {
    let mut out = Vec::with_capacity(27);
    for class_index in 0..27usize {
        let s = (2 * class_index + 1) as i64; // odd scaling per class
        let scale = |f: IVec3| -> IVec3 { [s * f[0], s * f[1], s * f[2]] };
        let fam = DirectionFamily {
            class_index,
            stress_dirs: BASE_R.map(scale),
            current_dirs: BASE_PHI.map(scale),
            dyad_constant: 4 * s * s,
        };
        fam.verify()?;
        out.push(fam);
    }
    // Pairwise disjointness over all 27 * 10 vectors.
    let mut seen = std::collections::HashSet::new();
    for fam in &out {
        for f in fam.stress_dirs.iter().chain(fam.current_dirs.iter()) {
            if !seen.insert(*f) {
                return Err(CiemError::OutsideAdmissible(format!(
                    "direction {f:?} appears in two families"
                )));
            }
        }
    }
    Ok(out)
}

/// Residue-class index of a cell `v` (`v mod 3` packed base-3).
pub fn class_of_cell(v: [i64; 3]) -> usize {
    let r = |x: i64| x.rem_euclid(3) as usize;
    r(v[0]) + 3 * r(v[1]) + 9 * r(v[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_family_dyad_sum_is_4_id() {
        let fams = build_families().unwrap();
        assert_eq!(fams[0].stress_dirs, BASE_R);
        assert_eq!(fams[0].dyad_constant, 4);
    }

    #[test]
    fn all_families_verify_and_are_disjoint() {
        let fams = build_families().unwrap();
        assert_eq!(fams.len(), 27);
        for (a, fa) in fams.iter().enumerate() {
            for fb in fams.iter().skip(a + 1) {
                for x in fa.stress_dirs.iter().chain(fa.current_dirs.iter()) {
                    for y in fb.stress_dirs.iter().chain(fb.current_dirs.iter()) {
                        assert_ne!(x, y);
                    }
                }
            }
        }
    }

    #[test]
    fn class_packing() {
        assert_eq!(class_of_cell([0, 0, 0]), 0);
        assert_eq!(class_of_cell([1, 0, 0]), 1);
        assert_eq!(class_of_cell([0, 1, 0]), 3);
        assert_eq!(class_of_cell([-1, 0, 2]), 2 + 9 * 2);
    }
}
