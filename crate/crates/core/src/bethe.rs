//! Bethe ansatz for the central spin model.
//!
//! Both the inhomogeneous and the homogeneous Bethe equations have the Gaudin form
//!
//! ```text
//! -2sB - sum_k w_k / (v_a - e_k) + 2 sum_{b != a} 1 / (v_a - v_b) = 0
//! ```
//!
//! with weighted poles `(e_k, w_k)`: `(eps0, 2s)` and `(eps_j, 1)` in the inhomogeneous
//! model, `(0, 2s)` and `(-1/(2sA), N)` in the homogeneous one (roots shifted by `eps0`).
//! The energy is `E0 + sum_a 1 / (v_a - e_0)` where `e_0` is the central-spin pole.
//!
//! For the homogeneous model the q-polynomial `q(u) = prod_a (u - v_a)` turns the equations
//! into `P(u) = (a + b u) q(u)`. Matching coefficients gives a tridiagonal eigenproblem for
//! `a` with eigenvector `q`, which seeds a damped Newton solve of the coefficient system.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    newton_solve, newton_solve_complex, poly_roots, LinalgError, NewtonError, NewtonOptions,
    Polynomial,
};
use crate::quantum::{binomial, HalfInt, InhomModelParams, ModelParams};

/// Closest a root may approach a pole (or another root) before evaluation is refused.
pub const POLE_GUARD: f64 = 1e-12;
/// Roots this close to `0` or `-1/(2sA)` are treated as singular candidates.
pub const SINGULAR_GUARD: f64 = 1e-10;
/// Relative distance below which two roots count as coincident.
pub const COLLAPSE_GUARD: f64 = 1e-6;
/// Threshold on `prod_a |e - v_a| / (R + |e - v_a|)` below which roots are considered
/// clustered onto the pole `e`. Near-singular coefficient solutions produce such clusters,
/// with radius of order `eps^(1/k)` for `k` collapsing roots.
pub const CLUSTER_GUARD: f64 = 1e-8;
/// Largest tolerated imaginary part of an accepted energy.
pub const ENERGY_IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BetheError {
    #[error("root {index} collides with a pole or another root at {at}")]
    PoleCollision { index: usize, at: Complex64 },
    #[error("energy has imaginary part {imag:e}")]
    NonRealEnergy { imag: f64 },
    #[error("no Bethe solution found for M={m}")]
    NoSolutionFound { m: usize },
    #[error("q-polynomial lost its leading coefficient")]
    InconsistentDegree,
    #[error("M={m} outside 0..={max}")]
    RootCount { m: usize, max: usize },
    #[error("homogeneous Bethe equations need A != 0")]
    ZeroCoupling,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum BetheModel {
    Homogeneous(ModelParams),
    Inhomogeneous(InhomModelParams),
}

/// A solution of the Bethe equations and its energy.
#[derive(Clone, Debug, PartialEq)]
pub struct BetheState {
    pub roots: Vec<Complex64>,
    pub model: BetheModel,
    pub residual_inf: f64,
    pub energy: f64,
}

impl BetheState {
    pub fn m(&self) -> usize {
        self.roots.len()
    }

    /// `residual_inf` divided by the largest per-equation sum of term magnitudes (at least 1).
    pub fn scaled_residual(&self) -> f64 {
        let g = match &self.model {
            BetheModel::Homogeneous(p) => match Gaudin::homogeneous(p) {
                Ok(g) => g,
                Err(_) => return f64::INFINITY,
            },
            BetheModel::Inhomogeneous(p) => Gaudin::inhomogeneous(p),
        };
        self.residual_inf / g.term_scale(&self.roots).max(1.0)
    }
}

/// Rational Gaudin-type system: field term and weighted poles. `poles[0]` is the
/// central-spin pole entering the energy.
#[derive(Clone, Debug, PartialEq)]
struct Gaudin {
    field: f64,
    poles: Vec<(f64, f64)>,
    e0: f64,
}

impl Gaudin {
    fn homogeneous(p: &ModelParams) -> Result<Self, BetheError> {
        if p.a == 0.0 {
            return Err(BetheError::ZeroCoupling);
        }
        let s = p.s.to_f64();
        Ok(Self {
            field: 2.0 * s * p.b,
            poles: vec![(0.0, 2.0 * s), (-1.0 / (2.0 * s * p.a), p.n_bath as f64)],
            e0: s * (p.b + p.n_bath as f64 * p.a),
        })
    }

    fn inhomogeneous(p: &InhomModelParams) -> Self {
        let s = p.s.to_f64();
        let mut poles = vec![(p.eps0, 2.0 * s)];
        poles.extend(p.eps.iter().map(|&e| (e, 1.0)));
        let e0 = s * p.b + 0.5 * p.eps.iter().map(|e| 1.0 / (p.eps0 - e)).sum::<f64>();
        Self { field: 2.0 * s * p.b, poles, e0 }
    }

    fn pole_scale(&self) -> f64 {
        self.poles.iter().fold(1.0f64, |m, &(e, _)| m.max(e.abs()))
    }

    /// Roots beyond this distance are treated as escaped to infinity.
    fn horizon(&self) -> f64 {
        1e6 * self.pole_scale()
    }

    /// Smallest over poles of `prod_a |e - v_a| / (R + |e - v_a|)`, `R` the pole scale.
    fn pole_cluster(&self, v: &[Complex64]) -> f64 {
        let r = self.pole_scale();
        self.poles
            .iter()
            .map(|&(e, _)| {
                v.iter().map(|&va| {
                    let d = (va - e).norm();
                    d / (r + d)
                })
                .product::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn collapsed(&self, v: &[Complex64]) -> bool {
        let r = COLLAPSE_GUARD * self.pole_scale();
        self.pole_cluster(v) < CLUSTER_GUARD
            || v.iter().enumerate().any(|(a, &va)| v[..a].iter().any(|&vb| (va - vb).norm() < r))
    }

    fn check(&self, v: &[Complex64]) -> Result<(), BetheError> {
        for (a, &va) in v.iter().enumerate() {
            let near_pole = self.poles.iter().any(|&(e, _)| (va - e).norm() <= POLE_GUARD);
            let near_root = v[..a].iter().any(|&vb| (va - vb).norm() <= POLE_GUARD);
            if near_pole || near_root || !va.re.is_finite() || !va.im.is_finite() {
                return Err(BetheError::PoleCollision { index: a, at: va });
            }
        }
        Ok(())
    }

    fn residual(&self, v: &[Complex64]) -> Result<Vec<Complex64>, BetheError> {
        self.check(v)?;
        Ok(v.iter()
            .enumerate()
            .map(|(a, &va)| {
                let mut r = Complex64::new(-self.field, 0.0);
                for &(e, w) in &self.poles {
                    r -= w / (va - e);
                }
                for (b, &vb) in v.iter().enumerate() {
                    if b != a {
                        r += 2.0 / (va - vb);
                    }
                }
                r
            })
            .collect())
    }

    fn jacobian(&self, v: &[Complex64]) -> Result<DMatrix<Complex64>, BetheError> {
        self.check(v)?;
        let m = v.len();
        let mut jac = DMatrix::<Complex64>::zeros(m, m);
        for a in 0..m {
            let mut diag = Complex64::new(0.0, 0.0);
            for &(e, w) in &self.poles {
                let d = v[a] - e;
                diag += w / (d * d);
            }
            for b in 0..m {
                if b != a {
                    let d = v[a] - v[b];
                    let t = 2.0 / (d * d);
                    diag -= t;
                    jac[(a, b)] = t;
                }
            }
            jac[(a, a)] = diag;
        }
        Ok(jac)
    }

    fn energy(&self, v: &[Complex64]) -> Result<f64, BetheError> {
        let centre = self.poles[0].0;
        let sum: Complex64 = v.iter().map(|&va| 1.0 / (va - centre)).sum();
        let e = self.e0 + sum;
        if e.im.abs() > ENERGY_IMAG_TOL * e.re.abs().max(1.0) {
            return Err(BetheError::NonRealEnergy { imag: e.im });
        }
        Ok(e.re)
    }

    fn polish(&self, v0: &[Complex64], opts: &NewtonOptions) -> Option<(Vec<Complex64>, f64)> {
        if v0.is_empty() {
            return Some((Vec::new(), 0.0));
        }
        match newton_solve_complex(|v| self.residual(v).ok(), |v| self.jacobian(v).ok(), v0, opts) {
            Ok((v, res, _)) => Some((v, res)),
            Err(NewtonError::NonConvergence { best, residual_inf }) if residual_inf.is_finite() => {
                let m = v0.len();
                Some(((0..m).map(|a| Complex64::new(best[a], best[a + m])).collect(), residual_inf))
            }
            Err(_) => None,
        }
    }

    /// Largest per-equation sum of term magnitudes; rounding in `v` alone moves the residual by about `eps` times this.
    fn term_scale(&self, v: &[Complex64]) -> f64 {
        v.iter()
            .enumerate()
            .map(|(a, &va)| {
                let poles: f64 = self.poles.iter().map(|&(e, w)| w / (va - e).norm()).sum();
                let roots: f64 = v.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &vb)| 2.0 / (va - vb).norm()).sum();
                self.field.abs() + poles + roots
            })
            .fold(0.0, f64::max)
    }

    /// Residual small relative to the terms it cancels.
    fn converged(&self, v: &[Complex64], res: f64, tol: f64) -> bool {
        res <= tol * self.term_scale(v).max(1.0)
    }
}

fn inf_norm_c(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn residual_inhom(v: &[Complex64], p: &InhomModelParams) -> Result<Vec<Complex64>, BetheError> {
    Gaudin::inhomogeneous(p).residual(v)
}

pub fn energy_inhom(v: &[Complex64], p: &InhomModelParams) -> Result<f64, BetheError> {
    Gaudin::inhomogeneous(p).energy(v)
}

pub fn residual_hom(v: &[Complex64], p: &ModelParams) -> Result<Vec<Complex64>, BetheError> {
    Gaudin::homogeneous(p)?.residual(v)
}

pub fn energy_hom(v: &[Complex64], p: &ModelParams) -> Result<f64, BetheError> {
    Gaudin::homogeneous(p)?.energy(v)
}

/// Indices of roots within [`SINGULAR_GUARD`] of `0` or `-1/(2sA)`.
pub fn singular_candidates(v: &[Complex64], p: &ModelParams) -> Vec<usize> {
    let c = 1.0 / (p.s.twice() as f64 * p.a);
    v.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() < SINGULAR_GUARD || (*z + c).norm() < SINGULAR_GUARD)
        .map(|(i, _)| i)
        .collect()
}

/// `m = N/2 + s - M`.
pub fn magnetization_of_m(s: HalfInt, n_bath: usize, m_roots: usize) -> HalfInt {
    HalfInt::from_twice(n_bath as i64) + s - HalfInt::from_int(m_roots as i64)
}

/// Number of Bethe solutions with `M` roots:
/// `sum_{k=0}^{floor(s)} (-1)^k C(2s-k, k) C(N+2s-2k, M-k)`.
pub fn count_solutions(s: HalfInt, n_bath: usize, m_roots: usize) -> u128 {
    let two_s = s.twice();
    let mut total: i128 = 0;
    for k in 0..=s.floor() {
        if (m_roots as i64) < k {
            break;
        }
        let term = binomial((two_s - k) as u64, k as u64) as i128
            * binomial((n_bath as i64 + two_s - 2 * k) as u64, (m_roots as i64 - k) as u64) as i128;
        total += if k % 2 == 0 { term } else { -term };
    }
    debug_assert!(total >= 0);
    total as u128
}

fn max_roots(s: HalfInt, n_bath: usize) -> usize {
    n_bath + s.twice() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetheOptions {
    pub starts: usize,
    pub seed: u64,
    pub tol_newton: f64,
    pub tol_bethe: f64,
    pub tol_root: f64,
    /// Relative distance below which two root sets count as the same solution.
    pub dedup: f64,
}

impl Default for BetheOptions {
    fn default() -> Self {
        Self { starts: 200, seed: 42, tol_newton: 1e-10, tol_bethe: 1e-8, tol_root: 1e-10, dedup: 1e-6 }
    }
}

impl BetheOptions {
    fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.tol_newton, ..NewtonOptions::default() }
    }
}

fn sort_roots(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Greedy nearest matching of two root multisets; returns the worst relative mismatch.
pub fn root_set_distance(x: &[Complex64], y: &[Complex64]) -> f64 {
    if x.len() != y.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; y.len()];
    let mut worst: f64 = 0.0;
    for &a in x {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (i, &b) in y.iter().enumerate() {
            let d = (a - b).norm();
            if !used[i] && d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        if let Some(i) = best {
            used[i] = true;
        }
        worst = worst.max(best_d / a.norm().max(1.0));
    }
    worst
}

/// Largest distance between a root and the nearest conjugate of another root in the set.
pub fn conjugate_asymmetry(v: &[Complex64]) -> f64 {
    let conj: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
    root_set_distance(v, &conj)
}

fn push_unique(states: &mut Vec<BetheState>, cand: BetheState, dedup: f64) {
    if !states.iter().any(|s| root_set_distance(&s.roots, &cand.roots) < dedup) {
        states.push(cand);
    }
}

// ---------------------------------------------------------------------------------------
// q-polynomial route (homogeneous model)

/// Solution of `P(u) = (a + b u) q(u)` with monic `q` of degree `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct QPolyState {
    /// Monic in `u`.
    pub q: Polynomial,
    pub a: f64,
    pub b: f64,
    /// Scale used while solving: coefficients of `q(sigma w) / sigma^M` are O(1).
    pub sigma: f64,
}

/// The coefficient system in the rescaled variable `w = u / sigma`.
#[derive(Clone, Copy, Debug)]
struct QSystem {
    m: usize,
    two_s: f64,
    n_bath: f64,
    /// `2 s B sigma`
    field: f64,
    /// `1 / (2 s A sigma)`
    c: f64,
}

impl QSystem {
    fn new(p: &ModelParams, m: usize, sigma: f64) -> Self {
        let two_s = p.s.twice() as f64;
        Self {
            m,
            two_s,
            n_bath: p.n_bath as f64,
            field: two_s * p.b * sigma,
            c: 1.0 / (two_s * p.a * sigma),
        }
    }

    fn sub(&self, p: usize) -> f64 {
        self.field * (self.m + 1 - p) as f64
    }

    fn diag(&self, p: usize) -> f64 {
        let pf = p as f64;
        pf * (pf - 1.0) - pf * (self.field * self.c + self.two_s + self.n_bath)
    }

    fn sup(&self, p: usize) -> f64 {
        self.c * (p + 1) as f64 * (p as f64 - self.two_s)
    }

    /// Row `p` of `(T - a) x`, with `x` of length `M + 1`.
    fn row(&self, p: usize, a: f64, x: &[f64]) -> f64 {
        let mut r = (self.diag(p) - a) * x[p];
        if p > 0 {
            r += self.sub(p) * x[p - 1];
        }
        if p < self.m {
            r += self.sup(p) * x[p + 1];
        }
        r
    }

    fn matrix(&self, lo: usize, hi: usize) -> DMatrix<f64> {
        DMatrix::from_fn(hi - lo, hi - lo, |r, c| {
            let (p, k) = (r + lo, c + lo);
            if k == p {
                self.diag(p)
            } else if k + 1 == p {
                self.sub(p)
            } else if k == p + 1 {
                self.sup(p)
            } else {
                0.0
            }
        })
    }

    /// Size of the leading block decoupled from higher coefficients (`sup(2s) = 0`).
    fn top_size(&self) -> usize {
        (self.two_s as usize).min(self.m) + 1
    }

    fn row_scale(&self, p: usize) -> f64 {
        let mut s = self.diag(p).abs() + 1.0;
        if p > 0 {
            s += self.sub(p).abs();
        }
        if p < self.m {
            s += self.sup(p).abs();
        }
        s
    }

    /// Coefficient vector for eigenvalue `a` of the leading block, normalized to `x_M = 1`.
    fn seed_vector(&self, a: f64) -> Result<Vec<f64>, BetheError> {
        let m = self.m;
        let top = self.top_size();
        let mut x = vec![0.0; m + 1];
        x[0] = 1.0;
        for p in 0..top - 1 {
            let mut acc = (self.diag(p) - a) * x[p];
            if p > 0 {
                acc += self.sub(p) * x[p - 1];
            }
            x[p + 1] = -acc / self.sup(p);
        }
        if top <= m {
            let lower = self.matrix(top, m + 1) - DMatrix::identity(m + 1 - top, m + 1 - top) * a;
            let mut rhs = DVector::zeros(m + 1 - top);
            rhs[0] = -self.sub(top) * x[top - 1];
            let y = lower.lu().solve(&rhs).ok_or(BetheError::InconsistentDegree)?;
            x[top..].copy_from_slice(y.as_slice());
        }
        let scale = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let lead = x[m];
        if !scale.is_finite() || lead.abs() <= 1e-12 * scale {
            return Err(BetheError::InconsistentDegree);
        }
        Ok(x.into_iter().map(|v| v / lead).collect())
    }

    fn leading_eigenvalues(&self) -> Vec<f64> {
        real_eigenvalues(self.matrix(0, self.top_size()))
    }

    fn trailing_eigenvalues(&self) -> Vec<f64> {
        let top = self.top_size();
        if top > self.m {
            return Vec::new();
        }
        real_eigenvalues(self.matrix(top, self.m + 1))
    }

    /// Damped Newton on unknowns `(a, x_0..x_{M-1})`, equations weighted by row scale and
    /// coefficient magnitude so the tolerance is relative.
    fn newton(&self, a0: f64, x0: &[f64], opts: &NewtonOptions) -> Option<(f64, Vec<f64>)> {
        let m = self.m;
        let mut a = a0;
        let mut x: Vec<f64> = x0.to_vec();
        for _ in 0..3 {
            let mag = x.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            let weights: Vec<f64> = (0..=m).map(|p| 1.0 / (self.row_scale(p) * mag)).collect();
            let unpack = |u: &DVector<f64>| -> (f64, Vec<f64>) {
                let mut xs: Vec<f64> = u.iter().skip(1).copied().collect();
                xs.push(1.0);
                (u[0], xs)
            };
            let res = |u: &DVector<f64>| {
                let (a, xs) = unpack(u);
                DVector::from_iterator(m + 1, (0..=m).map(|p| weights[p] * self.row(p, a, &xs)))
            };
            let jac = |u: &DVector<f64>| {
                let (a, xs) = unpack(u);
                let mut j = DMatrix::zeros(m + 1, m + 1);
                for p in 0..=m {
                    j[(p, 0)] = -weights[p] * xs[p];
                    if p > 0 {
                        j[(p, p)] = weights[p] * self.sub(p);
                    }
                    if p < m {
                        j[(p, p + 1)] = weights[p] * (self.diag(p) - a);
                    }
                    if p + 1 < m {
                        j[(p, p + 2)] = weights[p] * self.sup(p);
                    }
                }
                j
            };
            let mut u0 = DVector::zeros(m + 1);
            u0[0] = a;
            for k in 0..m {
                u0[k + 1] = x[k];
            }
            match newton_solve(res, jac, u0, opts) {
                Ok(sol) => {
                    let (a_new, x_new) = unpack(&sol.x);
                    let mag_new = x_new.iter().fold(1.0f64, |s, v| s.max(v.abs()));
                    a = a_new;
                    x = x_new;
                    if mag_new <= 10.0 * mag {
                        return Some((a, x));
                    }
                }
                Err(NewtonError::NonConvergence { best, residual_inf }) if residual_inf < 1e-6 => {
                    let (a_new, x_new) = unpack(&best);
                    a = a_new;
                    x = x_new;
                }
                Err(_) => return None,
            }
        }
        None
    }
}

fn real_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    let scale = m.amax().max(1.0);
    let mut out: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-8 * scale)
        .map(|z| z.re)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// `max_k |P_k - ((a + b u) q)_k| / max_k |P_k|` with `P` assembled by polynomial arithmetic
/// in the rescaled variable.
pub fn qpoly_identity_residual(p: &ModelParams, state: &QPolyState) -> f64 {
    let m = state.q.degree();
    let sigma = state.sigma;
    // x_k = q_k sigma^(k - M)
    let x: Vec<f64> = state
        .q
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, &qk)| qk * sigma.powi(k as i32 - m as i32))
        .collect();
    let sys = QSystem::new(p, m, sigma);
    let qw = Polynomial::new(x);
    let d1 = qw.derivative();
    let d2 = d1.derivative();
    let mul = |poly: &Polynomial, lin: [f64; 3]| -> Vec<f64> {
        // poly * (lin[0] + lin[1] w + lin[2] w^2)
        let mut out = vec![0.0; poly.coeffs().len() + 2];
        for (i, &c) in poly.coeffs().iter().enumerate() {
            for (k, &l) in lin.iter().enumerate() {
                out[i + k] += c * l;
            }
        }
        out
    };
    let mut lhs = vec![0.0; m + 3];
    let terms = [
        mul(&d2, [0.0, sys.c, 1.0]),
        mul(&d1, [0.0, -sys.field * sys.c, -sys.field]),
        mul(&d1, [-sys.two_s * sys.c, -sys.two_s, 0.0]),
        mul(&d1, [0.0, -sys.n_bath, 0.0]),
    ];
    for t in &terms {
        for (i, &v) in t.iter().enumerate() {
            lhs[i] += v;
        }
    }
    let rhs = mul(&qw, [state.a, state.b * sigma, 0.0]);
    let scale = lhs.iter().chain(&rhs).fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    lhs.iter()
        .zip(rhs.iter().chain(std::iter::repeat(&0.0)))
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max)
        / scale
}

/// A q-polynomial solution together with the Bethe state it encodes.
#[derive(Clone, Debug, PartialEq)]
pub struct QPolySolution {
    pub qpoly: QPolyState,
    pub state: BetheState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QPolyReport {
    pub m: usize,
    pub solutions: Vec<QPolySolution>,
    /// Candidates with roots at `0` or `-1/(2sA)`, excluded from `solutions`.
    pub singular: usize,
    /// Count formula value; rigorous for the inhomogeneous model only.
    pub expected: u128,
}

fn geometric_scale(x: &[f64]) -> f64 {
    let m = x.len() - 1;
    let (lo, hi) = (x[0].abs(), x[m].abs());
    if m == 0 || lo == 0.0 || hi == 0.0 || !lo.is_finite() || !hi.is_finite() {
        return 1.0;
    }
    let s = (lo / hi).powf(1.0 / m as f64);
    if s.is_finite() && s > 0.0 { s } else { 1.0 }
}

fn qpoly_to_state(
    p: &ModelParams,
    g: &Gaudin,
    sys: &QSystem,
    sigma: f64,
    a: f64,
    x: &[f64],
    opts: &BetheOptions,
) -> Result<QPolySolution, Option<BetheState>> {
    let m = sys.m;
    let qw = Polynomial::new(x.to_vec());
    if qw.degree() != m {
        return Err(None);
    }
    let w_roots = match poly_roots(&qw, opts.tol_root) {
        Ok(r) => r,
        Err(LinalgError::IllConditionedRoots { roots, .. }) => roots,
        Err(_) => return Err(None),
    };
    let guess: Vec<Complex64> = w_roots.iter().map(|w| w * sigma).collect();
    let (mut roots, res) = match g.residual(&guess) {
        Ok(r) if inf_norm_c(&r) <= opts.tol_newton => (guess, inf_norm_c(&r)),
        _ => g.polish(&guess, &opts.newton()).ok_or(None)?,
    };
    sort_roots(&mut roots);
    let q_coeffs: Vec<f64> = x.iter().enumerate().map(|(k, &xk)| xk * sigma.powi((m - k) as i32)).collect();
    let qpoly = QPolyState { q: Polynomial::new(q_coeffs), a, b: -sys.two_s * p.b * m as f64, sigma };
    let energy = g.energy(&roots).map_err(|_| None)?;
    let state = BetheState { roots, model: BetheModel::Homogeneous(*p), residual_inf: res, energy };
    if !singular_candidates(&state.roots, p).is_empty() || g.collapsed(&state.roots) {
        return Err(Some(state));
    }
    if !g.converged(&state.roots, res, opts.tol_bethe) || inf_norm_c(&state.roots) > g.horizon() {
        return Err(None);
    }
    Ok(QPolySolution { qpoly, state })
}

/// Homogeneous Bethe solutions with `M` roots via the q-polynomial identity.
///
/// Seeds come from the exact eigenstructure of the coefficient system plus `opts.starts`
/// random starts with coefficients uniform in `[-2, 2]`; every seed is refined by damped
/// Newton, converted to roots, polished on the Bethe equations and deduplicated.
pub fn solve_hom_qpoly(p: &ModelParams, m: usize, opts: &BetheOptions) -> Result<QPolyReport, BetheError> {
    let max = max_roots(p.s, p.n_bath);
    if m > max {
        return Err(BetheError::RootCount { m, max });
    }
    let g = Gaudin::homogeneous(p)?;
    let expected = count_solutions(p.s, p.n_bath, m);
    if m == 0 {
        let state = BetheState {
            roots: Vec::new(),
            model: BetheModel::Homogeneous(*p),
            residual_inf: 0.0,
            energy: g.e0,
        };
        let qpoly = QPolyState { q: Polynomial::new(vec![1.0]), a: 0.0, b: 0.0, sigma: 1.0 };
        return Ok(QPolyReport { m, solutions: vec![QPolySolution { qpoly, state }], singular: 0, expected });
    }

    let newton = opts.newton();
    // seeds: (sigma, a, x)
    let mut seeds: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    let base = QSystem::new(p, m, 1.0);
    for a in base.leading_eigenvalues() {
        let mut sigma = 1.0;
        let mut x = base.seed_vector(a).ok();
        if x.as_ref().map_or(true, |x| x.iter().any(|v| !v.is_finite())) {
            x = None;
            sigma = 2f64.powi(8);
        }
        // refine the scale twice: the first guess may be far off
        for _ in 0..2 {
            if let Some(ref xs) = x {
                sigma *= geometric_scale(xs);
            }
            x = QSystem::new(p, m, sigma).seed_vector(a).ok();
        }
        if let Some(x) = x {
            seeds.push((sigma, a, x));
        }
    }
    let singular_roots_at_zero = base.trailing_eigenvalues().len();

    let random_sigma = seeds.first().map_or(1.0, |s| s.0);
    let random: Vec<(f64, f64, Vec<f64>)> = (0..opts.starts)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
            let a = rng.gen_range(-2.0..2.0);
            let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            x.push(1.0);
            (random_sigma, a, x)
        })
        .collect();

    let candidates: Vec<Result<QPolySolution, Option<BetheState>>> = seeds
        .into_iter()
        .chain(random)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(sigma, a0, x0)| {
            let sys = QSystem::new(p, m, sigma);
            let (a, x) = sys.newton(a0, &x0, &newton).ok_or(None)?;
            qpoly_to_state(p, &g, &sys, sigma, a, &x, opts)
        })
        .collect();

    let mut solutions: Vec<QPolySolution> = Vec::new();
    let mut singular_states: Vec<BetheState> = Vec::new();
    for c in candidates {
        match c {
            Ok(sol) => {
                if !solutions.iter().any(|s| root_set_distance(&s.state.roots, &sol.state.roots) < opts.dedup) {
                    solutions.push(sol);
                }
            }
            Err(Some(state)) => push_unique(&mut singular_states, state, opts.dedup),
            Err(None) => {}
        }
    }
    solutions.sort_by(|a, b| a.state.energy.total_cmp(&b.state.energy));
    if solutions.is_empty() {
        return Err(BetheError::NoSolutionFound { m });
    }
    Ok(QPolyReport { m, solutions, singular: singular_states.len() + singular_roots_at_zero, expected })
}

/// Homogeneous Bethe solutions by Newton directly on the Bethe equations from random
/// conjugate-symmetric starts.
pub fn solve_hom_newton(p: &ModelParams, m: usize, opts: &BetheOptions) -> Result<Vec<BetheState>, BetheError> {
    let max = max_roots(p.s, p.n_bath);
    if m > max {
        return Err(BetheError::RootCount { m, max });
    }
    let g = Gaudin::homogeneous(p)?;
    let c = 1.0 / (p.s.twice() as f64 * p.a);
    let spread = c.abs().max(1.0) * 4.0;
    let seeds = (0..opts.starts).map(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
        let mut v = Vec::with_capacity(m);
        while v.len() < m {
            let re = -rng.gen_range(0.0..spread) * c.signum();
            if m - v.len() >= 2 && rng.gen_bool(0.5) {
                let im = rng.gen_range(0.05..1.0) * spread * 0.5;
                v.push(Complex64::new(re, im));
                v.push(Complex64::new(re, -im));
            } else {
                v.push(Complex64::new(re, 0.0));
            }
        }
        v
    });
    solve_from_seeds(&g, BetheModel::Homogeneous(*p), m, seeds.collect(), opts, |v| {
        singular_candidates(v, p).is_empty() && !g.collapsed(v)
    })
}

/// Inhomogeneous Bethe solutions by damped Newton from starts seeded near the poles.
///
/// Returns the states and whether the inhomogeneities were all distinct (degenerate
/// inhomogeneities void the completeness of the count formula).
pub fn solve_inhom_newton(
    p: &InhomModelParams,
    m: usize,
    opts: &BetheOptions,
) -> Result<(Vec<BetheState>, bool), BetheError> {
    let max = max_roots(p.s, p.n_bath());
    if m > max {
        return Err(BetheError::RootCount { m, max });
    }
    let g = Gaudin::inhomogeneous(p);
    let mut poles: Vec<f64> = g.poles.iter().map(|x| x.0).collect();
    poles.sort_by(f64::total_cmp);
    poles.dedup();
    let width = (poles[poles.len() - 1] - poles[0]).max(1.0);
    let gaps: Vec<(f64, f64)> = {
        let mut v = vec![(poles[0] - width, poles[0])];
        v.extend(poles.windows(2).map(|w| (w[0], w[1])));
        v.push((poles[poles.len() - 1], poles[poles.len() - 1] + width));
        v
    };
    let seeds = (0..opts.starts)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
            let mut v: Vec<Complex64> = Vec::with_capacity(m);
            while v.len() < m {
                let (lo, hi) = gaps[rng.gen_range(0..gaps.len())];
                let re = lo + (hi - lo) * rng.gen_range(0.05..0.95);
                let im = (hi - lo).min(width) * rng.gen_range(0.0..0.3);
                if m - v.len() >= 2 && im > 0.0 && rng.gen_bool(0.5) {
                    v.push(Complex64::new(re, im));
                    v.push(Complex64::new(re, -im));
                } else {
                    v.push(Complex64::new(re, 0.0));
                }
            }
            v
        })
        .collect();
    let states = solve_from_seeds(&g, BetheModel::Inhomogeneous(p.clone()), m, seeds, opts, |_| true)?;
    Ok((states, p.distinct))
}

fn solve_from_seeds(
    g: &Gaudin,
    model: BetheModel,
    m: usize,
    seeds: Vec<Vec<Complex64>>,
    opts: &BetheOptions,
    accept: impl Fn(&[Complex64]) -> bool + Sync,
) -> Result<Vec<BetheState>, BetheError> {
    if m == 0 {
        return Ok(vec![BetheState { roots: Vec::new(), model, residual_inf: 0.0, energy: g.e0 }]);
    }
    let newton = opts.newton();
    let found: Vec<Option<(Vec<Complex64>, f64, f64)>> = seeds
        .into_par_iter()
        .map(|seed| {
            let (mut v, res) = g.polish(&seed, &newton)?;
            if !g.converged(&v, res, opts.tol_bethe) || !accept(&v) || g.collapsed(&v) || inf_norm_c(&v) > g.horizon() {
                return None;
            }
            let e = g.energy(&v).ok()?;
            sort_roots(&mut v);
            Some((v, res, e))
        })
        .collect();
    let mut states = Vec::new();
    for (roots, residual_inf, energy) in found.into_iter().flatten() {
        push_unique(&mut states, BetheState { roots, model: model.clone(), residual_inf, energy }, opts.dedup);
    }
    if states.is_empty() {
        return Err(BetheError::NoSolutionFound { m });
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(states)
}
