//! Small numerical kernels shared by the spectrum, Bethe and dynamics code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix or polynomial contains non-finite entries")]
    NonFinite,
    #[error("tridiagonal lengths inconsistent: diag {diag}, offdiag {offdiag}")]
    Shape { diag: usize, offdiag: usize },
    #[error("QL iteration failed to converge")]
    NoConvergence,
    #[error("polynomial has degree zero")]
    ConstantPolynomial,
    #[error("root polish stalled: worst relative residual {worst:e}")]
    IllConditionedRoots { roots: Vec<Complex64>, worst: f64 },
}

/// Default numerical tolerances. All overridable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eig: f64,
    pub root: f64,
    pub newton: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eig: 1e-12, root: 1e-10, newton: 1e-10 }
    }
}

/// Real symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self, LinalgError> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(LinalgError::Shape { diag: diag.len(), offdiag: offdiag.len() });
        }
        Ok(Self { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag));
        for (i, &b) in self.offdiag.iter().enumerate() {
            m[(i, i + 1)] = b;
            m[(i + 1, i)] = b;
        }
        debug_assert_eq!(m.nrows(), n);
        m
    }
}

/// Eigenvalues ascending; column `l` of `vectors` belongs to `values[l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
///
/// Eigenvector signs are fixed so the largest-magnitude component is positive.
pub fn eig_sym_tridiag(t: &SymTridiag) -> Result<SymEigen, LinalgError> {
    if t.diag.iter().chain(&t.offdiag).any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let n = t.dim();
    let mut d = t.diag.clone();
    let mut e = t.offdiag.clone();
    e.push(0.0);
    let mut z = DMatrix::<f64>::identity(n, n);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LinalgError::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * zf;
                    z[(k, i)] = c * z[(k, i)] - s * zf;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = z.column(k).clone_owned();
        fix_sign(v.as_mut_slice());
        vectors.set_column(col, &v);
    }
    Ok(SymEigen { values, vectors })
}

/// Flip `v` so its largest-magnitude entry is positive (first one on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Real polynomial with coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Trailing (highest-degree) zeros are dropped.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// Monic polynomial with the given roots. Conjugate pairs give real coefficients;
    /// any residual imaginary part is dropped.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= r * ck;
            }
            c = next;
        }
        Self::new(c.into_iter().map(|z| z.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// `|p(z)| / sum_k |c_k| |z|^k`, the componentwise backward error at `z`.
    pub fn relative_residual(&self, z: Complex64) -> f64 {
        let scale = self
            .coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * z.norm() + c.abs());
        if scale == 0.0 {
            return 0.0;
        }
        self.eval_complex(z).norm() / scale
    }
}

/// Scale rows and columns by powers of two until row and column norms balance.
pub fn balance(m: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// All roots of `p` with multiplicity: balanced companion-matrix eigenvalues, then one
/// Newton step per root (kept only if it lowers the residual).
///
/// Returns `IllConditionedRoots` (carrying the roots) when any root's relative residual
/// stays above `tol`.
pub fn poly_roots(p: &Polynomial, tol: f64) -> Result<Vec<Complex64>, LinalgError> {
    let deg = p.degree();
    if deg == 0 {
        return Err(LinalgError::ConstantPolynomial);
    }
    if p.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let lead = p.leading();
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -p.coeffs[i] / lead;
    }
    balance(&mut companion);
    let raw = companion.complex_eigenvalues();

    let dp = p.derivative();
    let mut roots = Vec::with_capacity(deg);
    let mut worst: f64 = 0.0;
    for &z in raw.iter() {
        let mut best = z;
        let mut best_res = p.relative_residual(z);
        let slope = dp.eval_complex(z);
        if slope.norm() > 0.0 {
            let cand = z - p.eval_complex(z) / slope;
            let res = p.relative_residual(cand);
            if cand.re.is_finite() && cand.im.is_finite() && res < best_res {
                best = cand;
                best_res = res;
            }
        }
        worst = worst.max(best_res);
        roots.push(best);
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    if worst > tol {
        return Err(LinalgError::IllConditionedRoots { roots, worst });
    }
    Ok(roots)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default().newton, max_iter: 200, max_halvings: 40 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonSolution {
    pub x: DVector<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error("Newton did not converge; best residual {residual_inf:e}")]
    NonConvergence { best: DVector<f64>, residual_inf: f64 },
    #[error("singular Jacobian encountered")]
    SingularJacobian { x: DVector<f64> },
    #[error("residual/Jacobian dimensions do not match the unknowns")]
    DimensionMismatch,
    #[error("non-finite starting point")]
    NonFiniteStart,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Damped Newton: full step first, halved until the Euclidean residual norm drops.
pub fn newton_solve<F, J>(
    residual: F,
    jacobian: J,
    x0: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonSolution, NewtonError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(NewtonError::NonFiniteStart);
    }
    let mut x = x0;
    let mut r = residual(&x);
    if r.len() != x.len() {
        return Err(NewtonError::DimensionMismatch);
    }
    let mut norm2 = r.norm();
    let mut norm_inf = inf_norm(&r);
    if !norm_inf.is_finite() {
        return Err(NewtonError::NonConvergence { best: x, residual_inf: f64::INFINITY });
    }
    for iter in 0..=opts.max_iter {
        if norm_inf <= opts.tol {
            return Ok(NewtonSolution { x, residual_inf: norm_inf, iterations: iter });
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = jacobian(&x);
        if jac.nrows() != x.len() || jac.ncols() != x.len() {
            return Err(NewtonError::DimensionMismatch);
        }
        let step = match jac.lu().solve(&(-&r)) {
            Some(step) if step.iter().all(|v| v.is_finite()) => step,
            _ => return Err(NewtonError::SingularJacobian { x }),
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &x + &step * lambda;
            let rt = residual(&trial);
            let nt = rt.norm();
            if nt.is_finite() && nt < norm2 {
                x = trial;
                r = rt;
                norm2 = nt;
                norm_inf = inf_norm(&r);
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(NewtonError::NonConvergence { best: x, residual_inf: norm_inf })
}

/// Solve a square complex system `f(z) = 0` with holomorphic `f` by realifying it:
/// unknowns `(Re z, Im z)`, Jacobian `[[Re J, -Im J], [Im J, Re J]]`.
pub fn newton_solve_complex<F, J>(
    residual: F,
    jacobian: J,
    z0: &[Complex64],
    opts: &NewtonOptions,
) -> Result<(Vec<Complex64>, f64, usize), NewtonError>
where
    F: Fn(&[Complex64]) -> Option<Vec<Complex64>>,
    J: Fn(&[Complex64]) -> Option<DMatrix<Complex64>>,
{
    let m = z0.len();
    let unpack = |x: &DVector<f64>| -> Vec<Complex64> {
        (0..m).map(|a| Complex64::new(x[a], x[a + m])).collect()
    };
    let res = |x: &DVector<f64>| -> DVector<f64> {
        match residual(&unpack(x)) {
            Some(f) => DVector::from_iterator(2 * m, f.iter().map(|c| c.re).chain(f.iter().map(|c| c.im))),
            None => DVector::from_element(2 * m, f64::NAN),
        }
    };
    let jac = |x: &DVector<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::from_element(2 * m, 2 * m, f64::NAN);
        if let Some(jc) = jacobian(&unpack(x)) {
            for a in 0..m {
                for b in 0..m {
                    let c = jc[(a, b)];
                    out[(a, b)] = c.re;
                    out[(a, b + m)] = -c.im;
                    out[(a + m, b)] = c.im;
                    out[(a + m, b + m)] = c.re;
                }
            }
        }
        out
    };
    let x0 = DVector::from_iterator(2 * m, z0.iter().map(|c| c.re).chain(z0.iter().map(|c| c.im)));
    newton_solve(res, jac, x0, opts).map(|sol| (unpack(&sol.x), sol.residual_inf, sol.iterations))
}
