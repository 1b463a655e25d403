//! Frequencies and residues of the propagator on `|s,s> ⊗ |n>`.
//!
//! Powers of the Hamiltonian acting on `|s,s> ⊗ |n>` stay inside the span of
//! `|s,s-j> ⊗ |n-j>`, `j = 0..dim-1`, with coefficients `h_j^(k)` obeying a three-term
//! recurrence. The generating functions `h_j(z) = sum_k h_j^(k) z^k` are rational; their
//! partial fractions `sum_l c_{j,l} / (1 - omega_l z)` give `h_j^(k) = sum_l c_{j,l} omega_l^k`.
//!
//! Two routes produce `(omega, c)`:
//! * [`Method::Recipe`]: expand `det M(z)` and the first-row minors of `M(z) = T - 1/z`
//!   in powers of `1/z`, solve the frequency polynomial, then evaluate residues.
//! * [`Method::Spectral`]: diagonalize `T`; `c_{j,l} = v_l[0] v_l[j]`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{eig_sym_tridiag, poly_roots, LinalgError, Polynomial, SymTridiag};
use crate::quantum::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error("Dicke index n={n} outside 0..={n_bath}")]
    DickeIndex { n: usize, n_bath: usize },
    #[error("frequency polynomial has a complex root (imaginary part {imag:e})")]
    ComplexFrequency { imag: f64 },
    #[error("frequencies closer than {threshold:e}; residues are ill-defined")]
    DegenerateFrequencies { threshold: f64 },
    #[error("recurrence overflowed at k={k}")]
    Overflow { k: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Recipe,
    #[default]
    Spectral,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "recipe" => Ok(Method::Recipe),
            "spectral" => Ok(Method::Spectral),
            other => Err(format!("unknown method `{other}` (expected recipe|spectral)")),
        }
    }
}

/// Recurrence coefficients for Dicke index `n`, truncated to `min(2s, n) + 1` rows so that
/// every `beta` is strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorCoeffs {
    pub n: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SectorCoeffs {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn tridiag(&self) -> SymTridiag {
        SymTridiag::new(self.alpha.clone(), self.beta.clone()).expect("consistent by construction")
    }
}

pub fn build_sector_coeffs(p: &ModelParams, n: usize) -> Result<SectorCoeffs, ModeError> {
    if n > p.n_bath {
        return Err(ModeError::DickeIndex { n, n_bath: p.n_bath });
    }
    let two_s = p.s.twice() as usize;
    let dim = two_s.min(n) + 1;
    let big_n = p.n_bath as i64;
    let s2 = p.s.twice();
    let alpha = (0..dim as i64)
        .map(|j| {
            let central = (s2 - 2 * j) as f64 * 0.5;
            let bath = (big_n + 2 * j - 2 * n as i64) as f64 * 0.5;
            p.b * central + 2.0 * p.a * central * bath
        })
        .collect();
    let beta = (0..dim as i64 - 1)
        .map(|j| {
            let prod = (j + 1) as i128
                * (s2 - j) as i128
                * (n as i64 - j) as i128
                * (big_n + j + 1 - n as i64) as i128;
            p.a * (prod as f64).sqrt()
        })
        .collect();
    Ok(SectorCoeffs { n, alpha, beta })
}

// Polynomials in x = 1/z, ascending powers.
fn poly_mul_linear(p: &[f64], c0: f64, c1: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (i, &a) in p.iter().enumerate() {
        out[i] += a * c0;
        out[i + 1] += a * c1;
    }
    out
}

fn poly_axpy(acc: &mut Vec<f64>, scale: f64, q: &[f64]) {
    if acc.len() < q.len() {
        acc.resize(q.len(), 0.0);
    }
    for (a, &b) in acc.iter_mut().zip(q) {
        *a += scale * b;
    }
}

/// `det(T - x)` for the leading `k x k` blocks, `k = 0..=dim`, via the three-term recurrence.
fn leading_dets(c: &SectorCoeffs) -> Vec<Vec<f64>> {
    let mut dets = vec![vec![1.0]];
    for k in 1..=c.dim() {
        let mut next = poly_mul_linear(&dets[k - 1], c.alpha[k - 1], -1.0);
        if k >= 2 {
            let b = c.beta[k - 2];
            poly_axpy(&mut next, -b * b, &dets[k - 2]);
        }
        dets.push(next);
    }
    dets
}

/// `det(T_{k..} - x)` for the trailing blocks starting at row `k`, `k = 0..=dim`.
fn trailing_dets(c: &SectorCoeffs) -> Vec<Vec<f64>> {
    let d = c.dim();
    let mut dets = vec![Vec::new(); d + 1];
    dets[d] = vec![1.0];
    for k in (0..d).rev() {
        let mut next = poly_mul_linear(&dets[k + 1], c.alpha[k], -1.0);
        if k + 2 <= d {
            let b = c.beta[k];
            poly_axpy(&mut next, -b * b, &dets[k + 2]);
        }
        dets[k] = next;
    }
    dets
}

fn sign(power: usize) -> f64 {
    if power % 2 == 0 { 1.0 } else { -1.0 }
}

/// Coefficients `d_l` with `det M(z) = sum_l (-1)^dim z^-(dim-l) d_l`, `d_0 = 1`.
pub fn det_expansion(c: &SectorCoeffs) -> Vec<f64> {
    let dim = c.dim();
    let det = leading_dets(c).pop().unwrap();
    (0..=dim).map(|l| sign(dim) * det[dim - l]).collect()
}

/// Coefficients `n_l^(j)` with `minor_(1,1+j) M(z) = sum_l (-1)^(dim-1+j) z^-(dim-1-l) n_l`.
pub fn minor_expansion(c: &SectorCoeffs, j: usize) -> Vec<f64> {
    let dim = c.dim();
    assert!(j < dim, "minor column {j} outside block of dimension {dim}");
    let trailing = trailing_dets(c);
    let prefactor: f64 = c.beta[..j].iter().product();
    let minor: Vec<f64> = trailing[j + 1].iter().map(|x| x * prefactor).collect();
    let s = sign(dim - 1 + j);
    (0..dim)
        .map(|l| s * minor.get(dim - 1 - l).copied().unwrap_or(0.0))
        .collect()
}

/// Denominator and numerator coefficients of the generating functions.
#[derive(Clone, Debug, PartialEq)]
pub struct GenFuncPolys {
    pub d: Vec<f64>,
    pub numers: Vec<Vec<f64>>,
}

pub fn gen_func_polys(c: &SectorCoeffs) -> GenFuncPolys {
    GenFuncPolys {
        d: det_expansion(c),
        numers: (0..c.dim()).map(|j| minor_expansion(c, j)).collect(),
    }
}

/// Real roots of `sum_i d_i z^(dim-i)`, ascending.
pub fn frequencies(d: &[f64]) -> Result<Vec<f64>, ModeError> {
    if d.len() == 2 {
        return Ok(vec![-d[1] / d[0]]);
    }
    let poly = Polynomial::new(d.iter().rev().copied().collect());
    let roots = match poly_roots(&poly, 1e-10) {
        Ok(r) => r,
        Err(LinalgError::IllConditionedRoots { roots, .. }) => roots,
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::with_capacity(roots.len());
    for z in roots {
        if z.im.abs() > 1e-8 * z.norm().max(1.0) {
            return Err(ModeError::ComplexFrequency { imag: z.im });
        }
        out.push(z.re);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Residues `c[j][l]` of `h_j(z)` at `z = 1/omega_l`.
pub fn residues(numers: &[Vec<f64>], omega: &[f64]) -> Result<DMatrix<f64>, ModeError> {
    let dim = omega.len();
    let scale = omega.iter().fold(0.0f64, |m, w| m.max(w.abs())).max(f64::MIN_POSITIVE);
    let threshold = 1e-8 * scale;
    for l in 0..dim {
        for i in l + 1..dim {
            if (omega[l] - omega[i]).abs() < threshold {
                return Err(ModeError::DegenerateFrequencies { threshold });
            }
        }
    }
    let mut c = DMatrix::zeros(dim, dim);
    for l in 0..dim {
        let w = omega[l];
        let denom: f64 = (0..dim).filter(|&i| i != l).map(|i| w - omega[i]).product();
        for (j, nj) in numers.iter().enumerate() {
            let num = nj.iter().enumerate().map(|(i, &ni)| ni * w.powi((dim - 1 - i) as i32)).sum::<f64>();
            c[(j, l)] = num / denom;
        }
    }
    Ok(c)
}

/// Frequencies and residues for one Dicke index.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeDecomposition {
    pub n: usize,
    pub omega: Vec<f64>,
    /// `c[(j, l)]`
    pub c: DMatrix<f64>,
    pub method: Method,
    /// Recipe requested but degenerate frequencies forced the spectral route.
    pub fell_back: bool,
}

impl ModeDecomposition {
    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// `h_j^(k) = sum_l c[j][l] omega_l^k`.
    pub fn h(&self, k: u32) -> Vec<f64> {
        (0..self.dim())
            .map(|j| (0..self.dim()).map(|l| self.c[(j, l)] * self.omega[l].powi(k as i32)).sum())
            .collect()
    }

    /// Max deviation in `sum_l c[j][l] = delta_{j0}`.
    pub fn sum_rule_error(&self) -> f64 {
        (0..self.dim())
            .map(|j| {
                let s: f64 = self.c.row(j).iter().sum();
                (s - if j == 0 { 1.0 } else { 0.0 }).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Max deviation in `sum_j c[j][l] c[j][l'] = c[0][l] delta_{ll'}`.
    pub fn orthogonality_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for l in 0..dim {
            for lp in 0..dim {
                let s: f64 = (0..dim).map(|j| self.c[(j, l)] * self.c[(j, lp)]).sum();
                let want = if l == lp { self.c[(0, l)] } else { 0.0 };
                worst = worst.max((s - want).abs());
            }
        }
        worst
    }
}

fn spectral(coeffs: &SectorCoeffs) -> Result<(Vec<f64>, DMatrix<f64>), ModeError> {
    let eig = eig_sym_tridiag(&coeffs.tridiag())?;
    let dim = coeffs.dim();
    let v = &eig.vectors;
    let c = DMatrix::from_fn(dim, dim, |j, l| v[(0, l)] * v[(j, l)]);
    Ok((eig.values, c))
}

pub fn decompose(p: &ModelParams, n: usize, method: Method) -> Result<ModeDecomposition, ModeError> {
    let coeffs = build_sector_coeffs(p, n)?;
    match method {
        Method::Spectral => {
            let (omega, c) = spectral(&coeffs)?;
            Ok(ModeDecomposition { n, omega, c, method, fell_back: false })
        }
        Method::Recipe => {
            let polys = gen_func_polys(&coeffs);
            let omega = frequencies(&polys.d)?;
            match residues(&polys.numers, &omega) {
                Ok(c) => Ok(ModeDecomposition { n, omega, c, method, fell_back: false }),
                Err(ModeError::DegenerateFrequencies { .. }) => {
                    let (omega, c) = spectral(&coeffs)?;
                    Ok(ModeDecomposition { n, omega, c, method, fell_back: true })
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Decompositions for every `n = 0..=N`, computed once and shared read-only.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeCache {
    pub params: ModelParams,
    pub modes: Vec<ModeDecomposition>,
}

impl ModeCache {
    pub fn build(p: &ModelParams, method: Method) -> Result<Self, ModeError> {
        let modes = (0..=p.n_bath)
            .into_par_iter()
            .map(|n| decompose(p, n, method))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { params: *p, modes })
    }

    pub fn fallback_count(&self) -> usize {
        self.modes.iter().filter(|m| m.fell_back).count()
    }
}

/// `h^(k)` for `k = 0..=kmax` by direct iteration of the recurrence from `h^(0) = e_0`.
pub fn recurrence_oracle(p: &ModelParams, n: usize, kmax: usize) -> Result<Vec<Vec<f64>>, ModeError> {
    let c = build_sector_coeffs(p, n)?;
    let dim = c.dim();
    let mut h = vec![0.0; dim];
    h[0] = 1.0;
    let mut out = vec![h.clone()];
    for k in 1..=kmax {
        let prev = &out[k - 1];
        let next: Vec<f64> = (0..dim)
            .map(|j| {
                let mut v = c.alpha[j] * prev[j];
                if j + 1 < dim {
                    v += c.beta[j] * prev[j + 1];
                }
                if j > 0 {
                    v += c.beta[j - 1] * prev[j - 1];
                }
                v
            })
            .collect();
        if next.iter().any(|x| !x.is_finite()) {
            return Err(ModeError::Overflow { k });
        }
        out.push(next);
    }
    Ok(out)
}
