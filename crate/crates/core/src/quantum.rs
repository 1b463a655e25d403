//! Exact half-integer quantum numbers, model parameters and sector bookkeeping.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("cannot parse `{0}` as a half-integer (expected forms like `1`, `3/2`, `-1/2`)")]
    Parse(String),
    #[error("central spin must be at least 1/2, got {0}")]
    CentralSpin(HalfInt),
    #[error("bath size must be at least 1")]
    EmptyBath,
    #[error("bath spin j={j} is not allowed for N={n_bath}")]
    BathSpin { j: HalfInt, n_bath: usize },
    #[error("magnetization m={m} is outside [-j-s, j+s] or has the wrong parity for j={j}, s={s}")]
    Magnetization { m: HalfInt, j: HalfInt, s: HalfInt },
    #[error("central inhomogeneity eps0={0} coincides with a bath inhomogeneity")]
    PoleCoincidence(f64),
    #[error("non-finite model parameter")]
    NonFinite,
}

/// A half-integer stored as twice its value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct HalfInt(i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i64) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(value: i64) -> Self {
        HalfInt(2 * value)
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 * 0.5
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// Floor of the value, e.g. `floor(3/2) = 1`, `floor(-1/2) = -1`.
    pub fn floor(self) -> i64 {
        self.0.div_euclid(2)
    }

    /// True when `self - other` is an integer.
    pub fn same_parity(self, other: HalfInt) -> bool {
        (self.0 - other.0) % 2 == 0
    }

    /// Values `-self, -self+1, ..., self` in ascending order.
    pub fn projections(self) -> impl DoubleEndedIterator<Item = HalfInt> {
        let t = self.0;
        (0..=t).map(move |k| HalfInt(2 * k - t))
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl fmt::Debug for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for HalfInt {
    type Err = QuantumError;

    /// Accepts integers (`2`, `-1`) and halves (`3/2`, `-1/2`). Floats are rejected.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || QuantumError::Parse(text.to_string());
        let t = text.trim();
        match t.split_once('/') {
            None => t.parse::<i64>().map(HalfInt::from_int).map_err(|_| err()),
            Some((num, den)) => {
                let num: i64 = num.trim().parse().map_err(|_| err())?;
                match den.trim().parse::<i64>().map_err(|_| err())? {
                    1 => Ok(HalfInt::from_int(num)),
                    2 => Ok(HalfInt(num)),
                    _ => Err(err()),
                }
            }
        }
    }
}

impl From<HalfInt> for String {
    fn from(h: HalfInt) -> String {
        h.to_string()
    }
}

impl TryFrom<String> for HalfInt {
    type Error = QuantumError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Homogeneous model `H = B S0^z + 2A sum_j S0 . s_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub s: HalfInt,
    pub n_bath: usize,
    pub a: f64,
    pub b: f64,
}

impl ModelParams {
    pub fn new(s: HalfInt, n_bath: usize, a: f64, b: f64) -> Result<Self, QuantumError> {
        check_spin(s)?;
        if n_bath == 0 {
            return Err(QuantumError::EmptyBath);
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(QuantumError::NonFinite);
        }
        Ok(Self { s, n_bath, a, b })
    }

    /// Hilbert space dimension `(2s+1) 2^N`, saturating on overflow.
    pub fn hilbert_dim(&self) -> u128 {
        let central = (self.s.twice() + 1) as u128;
        if self.n_bath >= 120 {
            return u128::MAX;
        }
        central.saturating_mul(1u128 << self.n_bath)
    }

    /// Largest bath spin, `N/2`.
    pub fn max_bath_spin(&self) -> HalfInt {
        HalfInt::from_twice(self.n_bath as i64)
    }
}

/// Inhomogeneous model `H = B S0^z + (1/s) sum_j S0 . s_j / (eps0 - eps_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InhomModelParams {
    pub s: HalfInt,
    pub b: f64,
    pub eps0: f64,
    pub eps: Vec<f64>,
    /// All of `eps0, eps_1, ..., eps_N` pairwise distinct.
    pub distinct: bool,
}

impl InhomModelParams {
    pub fn new(s: HalfInt, b: f64, eps0: f64, eps: Vec<f64>) -> Result<Self, QuantumError> {
        check_spin(s)?;
        if eps.is_empty() {
            return Err(QuantumError::EmptyBath);
        }
        if !b.is_finite() || !eps0.is_finite() || eps.iter().any(|e| !e.is_finite()) {
            return Err(QuantumError::NonFinite);
        }
        if eps.iter().any(|&e| e == eps0) {
            return Err(QuantumError::PoleCoincidence(eps0));
        }
        let mut sorted = eps.clone();
        sorted.sort_by(f64::total_cmp);
        let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
        Ok(Self { s, b, eps0, eps, distinct })
    }

    pub fn n_bath(&self) -> usize {
        self.eps.len()
    }

    /// Effective coupling `A_j = 1 / (2s (eps0 - eps_j))` in the `2 A_j S0 . s_j` convention.
    pub fn couplings(&self) -> Vec<f64> {
        let two_s = self.s.twice() as f64;
        self.eps.iter().map(|e| 1.0 / (two_s * (self.eps0 - e))).collect()
    }
}

fn check_spin(s: HalfInt) -> Result<(), QuantumError> {
    if s.twice() < 1 {
        Err(QuantumError::CentralSpin(s))
    } else {
        Ok(())
    }
}

/// Bath spin `j` and total magnetization `m` labelling one block of the Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SectorKey {
    pub j: HalfInt,
    pub m: HalfInt,
}

impl SectorKey {
    pub fn new(j: HalfInt, m: HalfInt) -> Self {
        Self { j, m }
    }

    /// Checks `j` against the bath parity and `m` against `[-j-s, j+s]`.
    pub fn validate(&self, s: HalfInt, n_bath: usize) -> Result<(), QuantumError> {
        let n2 = n_bath as i64;
        let j2 = self.j.twice();
        if j2 < 0 || j2 > n2 || (n2 - j2) % 2 != 0 {
            return Err(QuantumError::BathSpin { j: self.j, n_bath });
        }
        check_magnetization(s, self.j, self.m)
    }
}

fn check_magnetization(s: HalfInt, j: HalfInt, m: HalfInt) -> Result<(), QuantumError> {
    let top = j + s;
    if m > top || m < -top || !m.same_parity(top) {
        return Err(QuantumError::Magnetization { m, j, s });
    }
    Ok(())
}

/// Bath spins allowed for `N` spin-1/2's, ascending.
pub fn allowed_bath_spins(n_bath: usize) -> Vec<HalfInt> {
    let n2 = n_bath as i64;
    (n2 % 2..=n2).step_by(2).map(HalfInt::from_twice).collect()
}

/// Magnetizations `m = -j-s, ..., j+s`, descending.
pub fn allowed_magnetizations(s: HalfInt, j: HalfInt) -> Vec<HalfInt> {
    (j + s).projections().rev().collect()
}

/// Number of `(m_s, m_j)` pairs with `m_s + m_j = m`.
pub fn sector_dimension(s: HalfInt, key: SectorKey) -> Result<usize, QuantumError> {
    if key.j.twice() < 0 {
        return Err(QuantumError::BathSpin { j: key.j, n_bath: 0 });
    }
    check_magnetization(s, key.j, key.m)?;
    let count = s
        .projections()
        .filter(|&ms| (key.m - ms).abs() <= key.j)
        .count();
    Ok(count)
}

/// Multiplicity of total spin `j` in `N` spin-1/2's: `C(N, N/2-j) - C(N, N/2-j-1)`.
pub fn bath_spin_multiplicity(n_bath: usize, j: HalfInt) -> u128 {
    let n2 = n_bath as i64;
    let j2 = j.twice();
    if j2 < 0 || j2 > n2 || (n2 - j2) % 2 != 0 {
        return 0;
    }
    let k = ((n2 - j2) / 2) as u64;
    let n = n_bath as u64;
    let lower = if k == 0 { 0 } else { binomial(n, k - 1) };
    binomial(n, k) - lower
}

/// `C(n, r)`, zero when `r > n`. Exact while the result fits in `u128`.
pub fn binomial(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        // acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
