//! Central-spin dynamics from a spin coherent bath state.
//!
//! The initial state `|s, s> ⊗ |theta>` expands over Dicke states `|n>` of the bath. Each
//! term only explores the states `|s, s-j> ⊗ |n-j>`, so the evolved amplitudes follow from
//! the cached mode decompositions without any matrix exponential:
//!
//! ```text
//! psi(n, j; t) = amps[n] * sum_l c[j][l](n) exp(-i t omega_l(n))
//! ```

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modes::{Method, ModeCache, ModeError};
use crate::quantum::{HalfInt, ModelParams};

/// Slack on the positivity of reduced density matrices.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Modes(#[from] ModeError),
    #[error("time grid must be finite and sorted")]
    Grid,
    #[error("reduced density matrix has eigenvalue {min_eig:e}")]
    NotPositive { min_eig: f64 },
    #[error("mode cache built for N={cache} but state prepared for N={prep}")]
    CacheMismatch { cache: usize, prep: usize },
    #[error("unknown observable {0:?}")]
    UnknownObservable(String),
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Dicke-basis amplitudes of the bath coherent state.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherentPrep {
    pub theta: f64,
    /// `amps[n] = sqrt(C(N,n)) cos^(N-n)(theta/2) sin^n(theta/2)`
    pub amps: Vec<f64>,
}

impl CoherentPrep {
    pub fn n_bath(&self) -> usize {
        self.amps.len() - 1
    }
}

pub fn prepare(theta: f64, n_bath: usize) -> CoherentPrep {
    let (sn, cs) = (theta / 2.0).sin_cos();
    let amps = (0..=n_bath)
        .map(|n| binomial_f64(n_bath, n).sqrt() * cs.powi((n_bath - n) as i32) * sn.powi(n as i32))
        .collect();
    CoherentPrep { theta, amps }
}

/// Amplitudes of `|s, s-j> ⊗ |n-j>` at time `t`, stored as `psi[n][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolvedState {
    pub t: f64,
    pub two_s: usize,
    pub psi: Vec<Vec<Complex64>>,
}

impl EvolvedState {
    pub fn n_bath(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    /// `rho[j][j'] = sum psi(n, j) conj(psi(n', j'))` over `n - j = n' - j'`.
    pub fn reduced_density(&self) -> ReducedDensity {
        let d = self.two_s + 1;
        let n_bath = self.n_bath();
        let mut rho = DMatrix::<Complex64>::zeros(d, d);
        for j in 0..d {
            for jp in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..=n_bath {
                    let (n, np) = (k + j, k + jp);
                    if n <= n_bath && np <= n_bath {
                        if let (Some(a), Some(b)) = (self.psi[n].get(j), self.psi[np].get(jp)) {
                            acc += a * b.conj();
                        }
                    }
                }
                rho[(j, jp)] = acc;
            }
        }
        ReducedDensity { rho }
    }

    /// Same matrix through the explicit `(central, bath Dicke)` amplitude matrix.
    pub fn reduced_density_partial_trace(&self) -> ReducedDensity {
        let d = self.two_s + 1;
        let n_bath = self.n_bath();
        let mut grid = DMatrix::<Complex64>::zeros(d, n_bath + 1);
        for (n, row) in self.psi.iter().enumerate() {
            for (j, &z) in row.iter().enumerate() {
                grid[(j, n - j)] = z;
            }
        }
        ReducedDensity { rho: &grid * grid.adjoint() }
    }

    /// `<Psi(0)|Psi(t)>` for the coherent initial state.
    pub fn overlap_with(&self, prep: &CoherentPrep) -> Complex64 {
        prep.amps.iter().zip(&self.psi).map(|(&a, row)| row[0] * a).sum()
    }
}

pub fn evolve(prep: &CoherentPrep, cache: &ModeCache, t: f64) -> Result<EvolvedState, DynamicsError> {
    if cache.modes.len() != prep.amps.len() {
        return Err(DynamicsError::CacheMismatch { cache: cache.modes.len() - 1, prep: prep.n_bath() });
    }
    let psi = cache
        .modes
        .iter()
        .zip(&prep.amps)
        .map(|(md, &amp)| {
            let phases: Vec<Complex64> = md.omega.iter().map(|&w| Complex64::from_polar(1.0, -w * t)).collect();
            (0..md.dim())
                .map(|j| {
                    let s: Complex64 = phases.iter().enumerate().map(|(l, ph)| ph * md.c[(j, l)]).sum();
                    s * amp
                })
                .collect()
        })
        .collect();
    Ok(EvolvedState { t, two_s: cache.params.s.twice() as usize, psi })
}

/// Central-spin reduced density matrix in the basis `|s, s-j>`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensity {
    pub rho: DMatrix<Complex64>,
}

impl ReducedDensity {
    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Fails if an eigenvalue is below `-PSD_TOL`.
    pub fn check_positive(&self) -> Result<(), DynamicsError> {
        let min_eig = self.eigenvalues()[0];
        if min_eig < -PSD_TOL {
            return Err(DynamicsError::NotPositive { min_eig });
        }
        Ok(())
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Von Neumann entropy with eigenvalues clamped to `[0, 1]`.
pub fn entropy(rho: &ReducedDensity) -> f64 {
    -rho.eigenvalues()
        .into_iter()
        .map(|l| l.clamp(0.0, 1.0))
        .filter(|&l| l > 0.0)
        .map(|l| l * l.ln())
        .sum::<f64>()
}

pub fn purity(rho: &ReducedDensity) -> f64 {
    rho.eigenvalues().iter().map(|l| l * l).sum()
}

/// `sum_j (s - j) rho[j][j]`.
pub fn sz_expectation(rho: &ReducedDensity) -> f64 {
    let s = rho.dim() as f64 / 2.0 - 0.5;
    (0..rho.dim()).map(|j| (s - j as f64) * rho.rho[(j, j)].re).sum()
}

/// `tr(S^- rho) = sum_j sqrt((j+1)(2s-j)) rho[j][j+1]`.
pub fn sminus_expectation(rho: &ReducedDensity) -> Complex64 {
    let two_s = rho.dim() - 1;
    (0..two_s)
        .map(|j| rho.rho[(j, j + 1)] * (((j + 1) * (two_s - j)) as f64).sqrt())
        .sum()
}

pub fn reduced_density(prep: &CoherentPrep, cache: &ModeCache, t: f64) -> Result<ReducedDensity, DynamicsError> {
    Ok(evolve(prep, cache, t)?.reduced_density())
}

pub fn spin_polarization(prep: &CoherentPrep, cache: &ModeCache, t: f64) -> Result<f64, DynamicsError> {
    let state = evolve(prep, cache, t)?;
    let s = cache.params.s.to_f64();
    Ok(state
        .psi
        .iter()
        .flat_map(|row| row.iter().enumerate().map(move |(j, z)| (s - j as f64) * z.norm_sqr()))
        .sum())
}

pub fn coherent_factor(prep: &CoherentPrep, cache: &ModeCache, t: f64) -> Result<Complex64, DynamicsError> {
    Ok(sminus_expectation(&reduced_density(prep, cache, t)?))
}

/// `|<Psi(0)|Psi(t)>|^2`.
pub fn loschmidt(prep: &CoherentPrep, cache: &ModeCache, t: f64) -> Result<f64, DynamicsError> {
    Ok(evolve(prep, cache, t)?.overlap_with(prep).norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    Entropy,
    Purity,
    Sz,
    SMinus2,
    Loschmidt,
    Norm,
}

impl Observable {
    pub const ALL: [Observable; 6] = [
        Observable::Entropy,
        Observable::Purity,
        Observable::Sz,
        Observable::SMinus2,
        Observable::Loschmidt,
        Observable::Norm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Entropy => "entropy",
            Observable::Purity => "purity",
            Observable::Sz => "sz",
            Observable::SMinus2 => "sminus2",
            Observable::Loschmidt => "loschmidt",
            Observable::Norm => "norm",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| DynamicsError::UnknownObservable(s.to_string()))
    }
}

/// All observables at one time point. Fails if the reduced density matrix is not
/// positive semidefinite within [`PSD_TOL`].
pub fn observe(state: &EvolvedState, prep: &CoherentPrep, obs: &[Observable]) -> Result<Vec<f64>, DynamicsError> {
    let rho = state.reduced_density();
    rho.check_positive()?;
    Ok(obs
        .iter()
        .map(|o| match o {
            Observable::Entropy => entropy(&rho),
            Observable::Purity => purity(&rho),
            Observable::Sz => sz_expectation(&rho),
            Observable::SMinus2 => sminus_expectation(&rho).norm_sqr(),
            Observable::Loschmidt => state.overlap_with(prep).norm_sqr(),
            Observable::Norm => state.norm_sqr(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub params: ModelParams,
    pub theta: f64,
    pub times: Vec<f64>,
    pub observables: Vec<Observable>,
    /// `values[i]` is the series of `observables[i]`.
    pub values: Vec<Vec<f64>>,
}

/// `steps + 1` equally spaced points on `[0, t_max]`, or just `0` when `t_max == 0`.
pub fn uniform_grid(t_max: f64, steps: usize) -> Vec<f64> {
    if t_max == 0.0 || steps == 0 {
        return vec![0.0];
    }
    (0..=steps).map(|i| t_max * i as f64 / steps as f64).collect()
}

pub fn run_timeseries_cached(
    cache: &ModeCache,
    prep: &CoherentPrep,
    times: &[f64],
    obs: &[Observable],
) -> Result<TimeSeries, DynamicsError> {
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(DynamicsError::Grid);
    }
    let rows = times
        .par_iter()
        .map(|&t| observe(&evolve(prep, cache, t)?, prep, obs))
        .collect::<Result<Vec<_>, _>>()?;
    let values = (0..obs.len()).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
    Ok(TimeSeries {
        params: cache.params,
        theta: prep.theta,
        times: times.to_vec(),
        observables: obs.to_vec(),
        values,
    })
}

pub fn run_timeseries(
    p: &ModelParams,
    theta: f64,
    times: &[f64],
    obs: &[Observable],
    method: Method,
) -> Result<TimeSeries, DynamicsError> {
    let cache = ModeCache::build(p, method)?;
    run_timeseries_cached(&cache, &prepare(theta, p.n_bath), times, obs)
}

/// `ln(2s + 1)`.
pub fn max_entropy(s: HalfInt) -> f64 {
    ((s.twice() + 1) as f64).ln()
}
