//! Brute-force ground truth on the full product space.
//!
//! Basis index `k + (2s+1) * bits` with the central index `k` fastest (`m_s = s - k`) and
//! bath bit `i` set when bath spin `i` points down (little-endian). The Hamiltonian
//!
//! ```text
//! H = B S0^z + sum_i 2 A_i (S0^z s_i^z + (S0^+ s_i^- + S0^- s_i^+) / 2)
//! ```
//!
//! is assembled from ladder matrix elements, then diagonalized block by block in total
//! `S^z` with a dense symmetric eigensolver.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{
    entropy, purity, sminus_expectation, sz_expectation, CoherentPrep, EvolvedState, Observable,
    ReducedDensity,
};
use crate::quantum::{HalfInt, InhomModelParams, ModelParams};

pub const MAX_DIM: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dimension {dim} exceeds the oracle limit {MAX_DIM}")]
    DimensionGuard { dim: u128 },
    #[error("state has length {got}, expected {want}")]
    StateLength { got: usize, want: usize },
}

#[derive(Clone, Debug)]
struct SzBlock {
    indices: Vec<usize>,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Exact model on `(2s+1) 2^N` states.
#[derive(Clone, Debug)]
pub struct DenseModel {
    pub s: HalfInt,
    pub n_bath: usize,
    pub b: f64,
    pub couplings: Vec<f64>,
    pub dim: usize,
    /// Nonzero entries `(row, col, value)` of the symmetric Hamiltonian.
    pub entries: Vec<(usize, usize, f64)>,
    blocks: Vec<SzBlock>,
}

fn ladder(s: HalfInt, m: f64) -> f64 {
    // <m+1| S^+ |m>
    let s = s.to_f64();
    ((s - m) * (s + m + 1.0)).max(0.0).sqrt()
}

impl DenseModel {
    fn assemble(s: HalfInt, b: f64, couplings: Vec<f64>) -> Result<Self, OracleError> {
        let n_bath = couplings.len();
        let d = s.twice() as usize + 1;
        let dim = (d as u128) << n_bath;
        if n_bath >= 64 || dim > MAX_DIM as u128 {
            return Err(OracleError::DimensionGuard { dim: if n_bath >= 64 { u128::MAX } else { dim } });
        }
        let dim = dim as usize;
        let sf = s.to_f64();
        let mut entries = Vec::new();
        for idx in 0..dim {
            let (k, bits) = (idx % d, idx / d);
            let ms = sf - k as f64;
            let mut diag = b * ms;
            for (i, &a) in couplings.iter().enumerate() {
                let down = bits >> i & 1 == 1;
                diag += 2.0 * a * ms * if down { -0.5 } else { 0.5 };
                // S0^+ s_i^- : central up one step, bath spin i flips down
                if !down && k >= 1 {
                    let target = (k - 1) + d * (bits | 1 << i);
                    let v = a * ladder(s, ms);
                    entries.push((idx, target, v));
                    entries.push((target, idx, v));
                }
            }
            entries.push((idx, idx, diag));
        }
        let mut model = Self { s, n_bath, b, couplings, dim, entries, blocks: Vec::new() };
        model.blocks = model.diagonalize();
        Ok(model)
    }

    /// Twice the total `S^z` of a basis state.
    pub fn twice_sz(&self, idx: usize) -> i64 {
        let d = self.s.twice() as usize + 1;
        let (k, bits) = (idx % d, idx / d);
        self.s.twice() - 2 * k as i64 + self.n_bath as i64 - 2 * bits.count_ones() as i64
    }

    fn diagonalize(&self) -> Vec<SzBlock> {
        let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for idx in 0..self.dim {
            groups.entry(self.twice_sz(idx)).or_default().push(idx);
        }
        let mut position = vec![0usize; self.dim];
        for indices in groups.values() {
            for (p, &i) in indices.iter().enumerate() {
                position[i] = p;
            }
        }
        let mut mats: BTreeMap<i64, DMatrix<f64>> =
            groups.iter().map(|(&k, v)| (k, DMatrix::zeros(v.len(), v.len()))).collect();
        for &(r, c, v) in &self.entries {
            let key = self.twice_sz(r);
            assert_eq!(key, self.twice_sz(c), "Hamiltonian entry couples different S^z");
            mats.get_mut(&key).unwrap()[(position[r], position[c])] += v;
        }
        groups
            .into_iter()
            .map(|(key, indices)| {
                let eig = SymmetricEigen::new(mats.remove(&key).unwrap());
                SzBlock { indices, values: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
            })
            .collect()
    }

    /// Materialized Hamiltonian.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            h[(r, c)] += v;
        }
        h
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        for &(r, c, v) in &self.entries {
            y[r] += x[c] * v;
        }
        y
    }

    /// Largest `|H_ab|` between basis states of different total `S^z`.
    pub fn sz_leakage(&self) -> f64 {
        self.entries
            .iter()
            .filter(|&&(r, c, _)| self.twice_sz(r) != self.twice_sz(c))
            .fold(0.0, |m, e| m.max(e.2.abs()))
    }

    /// Largest `|H_ab - H_ba|`.
    pub fn asymmetry(&self) -> f64 {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(r, c, v) in &self.entries {
            *map.entry((r, c)).or_default() += v;
        }
        map.iter().fold(0.0, |m, (&(r, c), &v)| m.max((v - map.get(&(c, r)).copied().unwrap_or(0.0)).abs()))
    }

    /// Bath total spin squared `J^2 = sum_{i,i'} s_i . s_i'` applied to `x`.
    pub fn apply_j2(&self, x: &[Complex64]) -> Vec<Complex64> {
        let d = self.s.twice() as usize + 1;
        let n = self.n_bath;
        let mut y: Vec<Complex64> = x.iter().map(|v| v * (0.75 * n as f64)).collect();
        for idx in 0..self.dim {
            let (k, bits) = (idx % d, idx / d);
            for i in 0..n {
                for ip in (i + 1)..n {
                    let (bi, bj) = (bits >> i & 1, bits >> ip & 1);
                    if bi == bj {
                        y[idx] += x[idx] * 0.5;
                    } else {
                        y[idx] -= x[idx] * 0.5;
                        let swapped = k + d * (bits ^ (1 << i) ^ (1 << ip));
                        y[swapped] += x[idx];
                    }
                }
            }
        }
        y
    }

    /// `S0^2 = (S0^z)^2 + (S0^+ S0^- + S0^- S0^+) / 2` applied to `x`.
    pub fn apply_s0_sq(&self, x: &[Complex64]) -> Vec<Complex64> {
        let d = self.s.twice() as usize + 1;
        let sf = self.s.to_f64();
        x.iter()
            .enumerate()
            .map(|(idx, v)| {
                let m = sf - (idx % d) as f64;
                let up = ladder(self.s, m - 1.0);
                let dn = ladder(self.s, m);
                v * (m * m + 0.5 * (up * up + dn * dn))
            })
            .collect()
    }

    /// All eigenvalues, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// `exp(-i H t) psi0`.
    pub fn evolve(&self, psi0: &[Complex64], t: f64) -> Result<Vec<Complex64>, OracleError> {
        if psi0.len() != self.dim {
            return Err(OracleError::StateLength { got: psi0.len(), want: self.dim });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for blk in &self.blocks {
            let x = DVector::from_iterator(blk.indices.len(), blk.indices.iter().map(|&i| psi0[i]));
            if x.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let v = blk.vectors.map(|r| Complex64::new(r, 0.0));
            let mut y = v.transpose() * x;
            for (l, e) in blk.values.iter().enumerate() {
                y[l] *= Complex64::from_polar(1.0, -e * t);
            }
            let z = v * y;
            for (p, &i) in blk.indices.iter().enumerate() {
                out[i] = z[p];
            }
        }
        Ok(out)
    }
}

pub fn build_dense(p: &ModelParams) -> Result<DenseModel, OracleError> {
    DenseModel::assemble(p.s, p.b, vec![p.a; p.n_bath])
}

pub fn build_dense_inhom(p: &InhomModelParams) -> Result<DenseModel, OracleError> {
    DenseModel::assemble(p.s, p.b, p.couplings())
}

pub fn exact_spectrum(dm: &DenseModel) -> Vec<f64> {
    dm.spectrum()
}

pub fn exact_evolve(dm: &DenseModel, psi0: &[Complex64], t: f64) -> Result<Vec<Complex64>, OracleError> {
    dm.evolve(psi0, t)
}

/// `|s, s> ⊗ (cos(theta/2)|up> + sin(theta/2)|down>)^N` in the product basis.
pub fn coherent_product_state(s: HalfInt, n_bath: usize, theta: f64) -> Vec<Complex64> {
    let d = s.twice() as usize + 1;
    let (sn, cs) = (theta / 2.0).sin_cos();
    let mut psi = vec![Complex64::new(0.0, 0.0); d << n_bath];
    for bits in 0..(1usize << n_bath) {
        let down = bits.count_ones() as i32;
        psi[d * bits] = Complex64::new(cs.powi(n_bath as i32 - down) * sn.powi(down), 0.0);
    }
    psi
}

/// Coherent preparation expanded into the product basis.
pub fn prep_to_product(s: HalfInt, prep: &CoherentPrep) -> Vec<Complex64> {
    coherent_product_state(s, prep.n_bath(), prep.theta)
}

/// Dicke-basis evolved state written out in the product basis.
pub fn dicke_to_product(state: &EvolvedState) -> Vec<Complex64> {
    let d = state.two_s + 1;
    let n_bath = state.n_bath();
    let norms: Vec<f64> = (0..=n_bath)
        .map(|k| (0..k).fold(1.0, |acc, i| acc * (n_bath - i) as f64 / (i + 1) as f64).sqrt())
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); d << n_bath];
    for bits in 0..(1usize << n_bath) {
        let k = bits.count_ones() as usize;
        for j in 0..d {
            let n = k + j;
            if let Some(&z) = state.psi.get(n).and_then(|row| row.get(j)) {
                out[j + d * bits] = z / norms[k];
            }
        }
    }
    out
}

/// Reduced density matrix of the central spin, `rho[k][k'] = sum_bits psi[k] conj(psi[k'])`.
pub fn partial_trace_bath(psi: &[Complex64], s: HalfInt, n_bath: usize) -> Result<ReducedDensity, OracleError> {
    let d = s.twice() as usize + 1;
    if psi.len() != d << n_bath {
        return Err(OracleError::StateLength { got: psi.len(), want: d << n_bath });
    }
    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for chunk in psi.chunks(d) {
        for k in 0..d {
            for kp in 0..d {
                rho[(k, kp)] += chunk[k] * chunk[kp].conj();
            }
        }
    }
    Ok(ReducedDensity { rho })
}

/// Observables of the exactly propagated coherent state, `values[i][t]` for `obs[i]`.
pub fn oracle_timeseries(
    dm: &DenseModel,
    theta: f64,
    times: &[f64],
    obs: &[Observable],
) -> Result<Vec<Vec<f64>>, OracleError> {
    let psi0 = coherent_product_state(dm.s, dm.n_bath, theta);
    let mut values = vec![Vec::with_capacity(times.len()); obs.len()];
    for &t in times {
        let psi = dm.evolve(&psi0, t)?;
        let rho = partial_trace_bath(&psi, dm.s, dm.n_bath)?;
        let overlap: Complex64 = psi0.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
        for (o, col) in obs.iter().zip(values.iter_mut()) {
            col.push(match o {
                Observable::Entropy => entropy(&rho),
                Observable::Purity => purity(&rho),
                Observable::Sz => sz_expectation(&rho),
                Observable::SMinus2 => sminus_expectation(&rho).norm_sqr(),
                Observable::Loschmidt => overlap.norm_sqr(),
                Observable::Norm => psi.iter().map(|z| z.norm_sqr()).sum(),
            });
        }
    }
    Ok(values)
}

/// Normalized random complex probe vectors, reproducible from `seed`.
pub fn random_probes(dim: usize, count: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: Vec<Complex64> =
                (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / norm).collect()
        })
        .collect()
}

/// Commutator norms `max |([H, X] v)_i|` over the supplied probe vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutatorReport {
    pub sz: f64,
    pub j2: f64,
    pub s0_sq: f64,
}

pub fn commutator_checks(dm: &DenseModel, probes: &[Vec<Complex64>]) -> CommutatorReport {
    let comm = |op: &dyn Fn(&[Complex64]) -> Vec<Complex64>| {
        probes
            .iter()
            .map(|x| {
                let a = dm.apply(&op(x));
                let b = op(&dm.apply(x));
                a.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).norm()))
            })
            .fold(0.0, f64::max)
    };
    let sz = |x: &[Complex64]| -> Vec<Complex64> {
        x.iter().enumerate().map(|(i, v)| v * (dm.twice_sz(i) as f64 / 2.0)).collect()
    };
    CommutatorReport {
        sz: comm(&sz),
        j2: comm(&|x| dm.apply_j2(x)),
        s0_sq: comm(&|x| dm.apply_s0_sq(x)),
    }
}
