//! Exact spectrum from the `(j, m)` block decomposition.
//!
//! Within a sector the basis `|s, m_s> ⊗ |j, m_j>` with `m_s + m_j = m` is ordered by
//! descending `m_s`, so row `i` carries `m_s = m_s^max - i`. The Hamiltonian only moves
//! one quantum between central spin and bath, which makes every block tridiagonal.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{eig_sym_tridiag, LinalgError, SymTridiag};
use crate::quantum::{
    allowed_bath_spins, allowed_magnetizations, bath_spin_multiplicity, HalfInt, ModelParams,
    QuantumError, SectorKey,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SectorError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Diagonal element `B m_s + 2A m_s m_j`.
pub fn mu(m_s: HalfInt, m_j: HalfInt, p: &ModelParams) -> f64 {
    let ms = m_s.to_f64();
    p.b * ms + 2.0 * p.a * ms * m_j.to_f64()
}

/// Coupling `A sqrt((s-m_s+1)(s+m_s)(j+m_j+1)(j-m_j))` between `(m_s, m_j)` and
/// `(m_s - 1, m_j + 1)`.
///
/// Panics if the product of the four factors is negative; callers only pass transitions
/// that stay inside the sector.
pub fn nu(m_s: HalfInt, m_j: HalfInt, s: HalfInt, j: HalfInt, a: f64) -> f64 {
    // all factors are integers once doubled: (2s-2m_s+2)(2s+2m_s)(2j+2m_j+2)(2j-2m_j) / 16
    let f1 = s.twice() - m_s.twice() + 2;
    let f2 = s.twice() + m_s.twice();
    let f3 = j.twice() + m_j.twice() + 2;
    let f4 = j.twice() - m_j.twice();
    let prod = (f1 as i128) * (f2 as i128) * (f3 as i128) * (f4 as i128);
    assert!(prod >= 0, "nu called outside the physical range: m_s={m_s}, m_j={m_j}, s={s}, j={j}");
    a * (prod as f64).sqrt() / 4.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorBlock {
    pub key: SectorKey,
    /// `(m_s, m_j)` pairs, descending `m_s`.
    pub basis: Vec<(HalfInt, HalfInt)>,
    pub matrix: SymTridiag,
    pub energies: Vec<f64>,
    /// Column `l` holds the expansion coefficients of the eigenvector for `energies[l]`.
    pub weights: DMatrix<f64>,
}

impl SectorBlock {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn dense_matrix(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

/// Basis of the `(j, m)` sector for central spin `s`, descending `m_s`.
pub fn sector_basis(s: HalfInt, key: SectorKey) -> Vec<(HalfInt, HalfInt)> {
    s.projections()
        .rev()
        .filter(|&ms| (key.m - ms).abs() <= key.j)
        .map(|ms| (ms, key.m - ms))
        .collect()
}

/// Symmetric tridiagonal block of the Hamiltonian restricted to `(j, m)`.
pub fn sector_matrix(p: &ModelParams, key: SectorKey) -> Result<SymTridiag, SectorError> {
    key.validate(p.s, p.n_bath)?;
    let basis = sector_basis(p.s, key);
    let diag = basis.iter().map(|&(ms, mj)| mu(ms, mj, p)).collect();
    let offdiag = basis
        .iter()
        .take(basis.len().saturating_sub(1))
        .map(|&(ms, mj)| nu(ms, mj, p.s, key.j, p.a))
        .collect();
    Ok(SymTridiag::new(diag, offdiag)?)
}

pub fn build_sector(p: &ModelParams, key: SectorKey) -> Result<SectorBlock, SectorError> {
    let matrix = sector_matrix(p, key)?;
    let eig = eig_sym_tridiag(&matrix)?;
    Ok(SectorBlock {
        key,
        basis: sector_basis(p.s, key),
        matrix,
        energies: eig.values,
        weights: eig.vectors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub j: HalfInt,
    pub m: HalfInt,
    pub energy: f64,
    pub multiplicity: u128,
}

/// Every allowed sector, ordered by descending `j`, then descending `m`.
pub fn all_sectors(p: &ModelParams) -> Vec<SectorKey> {
    allowed_bath_spins(p.n_bath)
        .into_iter()
        .rev()
        .flat_map(|j| allowed_magnetizations(p.s, j).into_iter().map(move |m| SectorKey::new(j, m)))
        .collect()
}

/// All levels with bath-spin multiplicities, sorted by (j desc, m desc, E asc).
pub fn full_spectrum(p: &ModelParams) -> Result<Vec<Level>, SectorError> {
    let blocks: Vec<Result<Vec<Level>, SectorError>> = all_sectors(p)
        .into_par_iter()
        .map(|key| {
            let block = build_sector(p, key)?;
            let multiplicity = bath_spin_multiplicity(p.n_bath, key.j);
            Ok(block
                .energies
                .iter()
                .map(|&energy| Level { j: key.j, m: key.m, energy, multiplicity })
                .collect())
        })
        .collect();
    let mut levels = Vec::new();
    for b in blocks {
        levels.extend(b?);
    }
    Ok(levels)
}

/// Energies expanded by multiplicity and sorted ascending.
pub fn spectrum_multiset(levels: &[Level]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in levels {
        out.extend(std::iter::repeat(l.energy).take(l.multiplicity as usize));
    }
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(t: &str) -> HalfInt {
        t.parse().unwrap()
    }

    fn table_params() -> ModelParams {
        ModelParams::new(HalfInt::ONE, 2, 0.5, 0.5).unwrap()
    }

    #[test]
    fn mu_examples() {
        let p = table_params();
        assert_eq!(mu(h("1"), h("1"), &p), 1.5);
        assert_eq!(mu(h("0"), h("5"), &p), 0.0);
        assert_eq!(mu(h("-1"), h("1"), &p), -1.5);
    }

    #[test]
    fn nu_examples() {
        let (s, j) = (h("3/2"), h("5/2"));
        let a = 0.7;
        let edge = nu(s, -j, s, j, a);
        assert!((edge - a * (2.0 * 1.5 * 2.0 * 2.5f64).sqrt()).abs() < 1e-14);
        // (s-m_s+1)(s+m_s)(j+m_j+1)(j-m_j) = 1*2*2*1 for m_s=1, m_j=0, s=j=1
        assert!((nu(h("1"), h("0"), h("1"), h("1"), 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(nu(-s, h("1/2"), s, j, a), 0.0);
    }

    #[test]
    #[should_panic]
    fn nu_rejects_unphysical() {
        nu(h("3"), h("0"), h("1"), h("1"), 1.0);
    }

    #[test]
    fn table_blocks() {
        let p = table_params();
        let b = build_sector(&p, SectorKey::new(h("1"), h("1"))).unwrap();
        assert!((b.energies[0] + 0.780776).abs() < 1e-6);
        assert!((b.energies[1] - 1.28078).abs() < 1e-5);
        let b = build_sector(&p, SectorKey::new(h("1"), h("0"))).unwrap();
        for (e, want) in b.energies.iter().zip([-2.14854, -0.893401, 1.04194]) {
            assert!((e - want).abs() < 1e-5);
        }
        for (m, want) in [("1", 0.5), ("0", 0.0), ("-1", -0.5)] {
            let b = build_sector(&p, SectorKey::new(h("0"), h(m))).unwrap();
            assert_eq!(b.dim(), 1);
            assert_eq!(b.energies[0], want);
        }
    }

    #[test]
    fn block_structure() {
        let p = ModelParams::new(h("3/2"), 5, 0.8, -0.3).unwrap();
        for key in all_sectors(&p) {
            let b = build_sector(&p, key).unwrap();
            for &(ms, mj) in &b.basis {
                assert_eq!(ms + mj, key.m);
            }
            assert!(b.basis.windows(2).all(|w| w[0].0 > w[1].0));
            let trace: f64 = b.matrix.diag().iter().sum();
            let sum: f64 = b.energies.iter().sum();
            assert!((trace - sum).abs() < 1e-10);
            let dense = b.dense_matrix();
            for (l, &e) in b.energies.iter().enumerate() {
                let v = b.weights.column(l);
                assert!((&dense * v - v * e).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn level_count() {
        let p = table_params();
        let levels = full_spectrum(&p).unwrap();
        assert_eq!(spectrum_multiset(&levels).len(), 12);
        let p = ModelParams::new(h("3/2"), 4, 0.3, 0.2).unwrap();
        assert_eq!(spectrum_multiset(&full_spectrum(&p).unwrap()).len(), 4 * 16);
    }

    #[test]
    fn zero_coupling_gives_zeeman_levels() {
        let p = ModelParams::new(h("1"), 3, 0.0, 0.7).unwrap();
        for l in full_spectrum(&p).unwrap() {
            let allowed = [-0.7, 0.0, 0.7];
            assert!(allowed.iter().any(|a| (a - l.energy).abs() < 1e-14));
        }
    }

    #[test]
    fn zero_field_mirror_symmetry() {
        let p = ModelParams::new(h("1"), 4, 0.9, 0.0).unwrap();
        for key in all_sectors(&p) {
            let a = build_sector(&p, key).unwrap();
            let b = build_sector(&p, SectorKey::new(key.j, -key.m)).unwrap();
            for (x, y) in a.energies.iter().zip(&b.energies) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
