//! Complex dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Relative jitter added to the diagonal when a Hermitian solve fails.
pub const SOLVE_JITTER: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Max-abs entry of `m - m^H`, relative to `max(1, max|m_ij|)`.
pub fn hermitian_asymmetry(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// `(m + m^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Clone, Debug)]
pub struct HpdFactor {
    chol: Cholesky<C64, Dyn>,
    pub jittered: bool,
}

impl HpdFactor {
    /// Factors `x`. If the plain factorisation fails, retries once with
    /// `SOLVE_JITTER * trace / n` on the diagonal and logs a warning.
    pub fn new(x: &CMat) -> Result<Self> {
        let n = x.nrows();
        if n != x.ncols() {
            return Err(Error::Dimension(format!("{}x{} is not square", n, x.ncols())));
        }
        if let Some(chol) = Cholesky::new(x.clone()) {
            return Ok(HpdFactor { chol, jittered: false });
        }
        let jitter = SOLVE_JITTER * trace_re(x) / n.max(1) as f64;
        if jitter.is_finite() && jitter > 0.0 {
            log::warn!("Hermitian solve needed diagonal jitter {jitter:.3e}");
            let mut y = x.clone();
            for i in 0..n {
                y[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(y) {
                return Ok(HpdFactor { chol, jittered: true });
            }
        }
        Err(Error::Singular(format!("{n}x{n} covariance is not positive definite")))
    }

    pub fn solve_vec(&self, b: &CVec) -> CVec {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        self.chol.solve(b)
    }
}

/// Full Hermitian eigen-decomposition with eigenvalues sorted ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(m.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    eigvalsh(m).last().copied().unwrap_or(0.0)
}

/// Moore–Penrose pseudoinverse via SVD.
///
/// Singular values at or below `max(rows, cols) * eps * s_max` are treated as zero.
pub fn pinv(g: &CMat) -> CMat {
    let (rows, cols) = g.shape();
    let mut out = CMat::zeros(cols, rows);
    if rows == 0 || cols == 0 {
        return out;
    }
    let svd = g.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("SVD requested with both factors"),
    };
    let s = &svd.singular_values;
    let cutoff = rows.max(cols) as f64 * f64::EPSILON * s.max();
    for i in 0..s.len() {
        if s[i] > cutoff && s[i] > 0.0 {
            let vi = v_t.row(i).adjoint();
            let ui_h = u.column(i).adjoint();
            out += (vi * ui_h).unscale(s[i]);
        }
    }
    out
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * s_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

/// `v^H m v`, real part.
pub fn quad_form(m: &CMat, v: &CVec) -> f64 {
    v.dotc(&(m * v)).re
}

/// Draws from CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(s * re, s * im)
}

/// Pairwise (cascade) summation; the result depends only on the slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}
