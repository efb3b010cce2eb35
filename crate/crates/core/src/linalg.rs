//! Dense symmetric linear algebra: eigendecomposition, null-space
//! extraction with an explicit spectral-gap report, and SPD solves.
//!
//! Everything is double precision and deterministic. Eigenvalues are always
//! reported in ascending order.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type DMat = DMatrix<f64>;
pub type DVec = DVector<f64>;

/// Declared minimum ratio between the first kept and last dropped eigenvalue
/// for a null-space split to count as unambiguous.
pub const GAP_RATIO: f64 = 1e4;

/// Default relative eigenvalue tolerance for null-space extraction.
pub const NULLSPACE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: max relative asymmetry {0:.3e}")]
    NotSymmetric(f64),
    #[error("eigensolver failed to converge")]
    NoConvergence,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("solve residual {0:.3e} exceeds 1e-10")]
    ResidualTooLarge(f64),
}

/// Eigenvalues of a symmetric matrix, ascending, with the location of the
/// spectral gap separating the numerically-zero cluster when one exists.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues below the gap; `None` when no split with ratio
    /// >= [`GAP_RATIO`] exists at the tolerance used to build the spectrum.
    pub gap_index: Option<usize>,
}

impl Spectrum {
    /// Ratio between eigenvalue k and eigenvalue k-1 in magnitude.
    /// Infinite when the lower one vanishes; meaningless for k = 0.
    pub fn ratio_at(&self, k: usize) -> f64 {
        if k == 0 || k >= self.eigenvalues.len() {
            return f64::INFINITY;
        }
        let lo = self.eigenvalues[k - 1].abs();
        let hi = self.eigenvalues[k].abs();
        if lo == 0.0 {
            if hi == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            hi / lo
        }
    }
}

/// Result of [`nullspace`].
#[derive(Debug, Clone)]
pub struct Nullspace {
    /// Orthonormal basis of the numerical null space, one column per vector.
    pub basis: DMat,
    pub dim: usize,
    pub spectrum: Spectrum,
    /// Ratio between the first kept and the last dropped eigenvalue.
    pub gap_ratio: f64,
    /// Set when `gap_ratio` < [`GAP_RATIO`]: the split is not clear-cut.
    pub ambiguous: bool,
}

fn check_symmetric(m: &DMat) -> Result<f64, LinalgError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let mut scale = 0.0f64;
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i..n {
            scale = scale.max(m[(i, j)].abs()).max(m[(j, i)].abs());
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let rel = asym / scale;
    if rel > 1e-12 {
        return Err(LinalgError::NotSymmetric(rel));
    }
    Ok(scale)
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns the spectrum (ascending, no gap marked) and the matrix of
/// eigenvectors, column k matching eigenvalue k.
pub fn sym_eig(m: &DMat) -> Result<(Spectrum, DMat), LinalgError> {
    check_symmetric(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok((
            Spectrum {
                eigenvalues: vec![],
                gap_index: None,
            },
            DMat::zeros(0, 0),
        ));
    }
    // Symmetrize first so tiny asymmetries cannot push the solver off the
    // symmetric path.
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((
        Spectrum {
            eigenvalues,
            gap_index: None,
        },
        vectors,
    ))
}

fn split_below(mut spectrum: Spectrum, vectors: DMat, cut: f64) -> Nullspace {
    let dim = spectrum
        .eigenvalues
        .iter()
        .filter(|l| l.abs() <= cut)
        .count();
    let gap_ratio = if dim == 0 {
        f64::INFINITY
    } else {
        spectrum.ratio_at(dim)
    };
    let ambiguous = gap_ratio < GAP_RATIO;
    spectrum.gap_index = if ambiguous { None } else { Some(dim) };
    let basis = vectors.columns(0, dim).into_owned();
    Nullspace {
        basis,
        dim,
        spectrum,
        gap_ratio,
        ambiguous,
    }
}

/// Numerical null space of a symmetric positive semi-definite matrix.
///
/// An eigenvalue belongs to the null cluster when |lambda| <= tol * lambda_max.
/// The split is flagged ambiguous when the eigenvalue ratio across it is
/// below [`GAP_RATIO`]. An all-zero matrix yields the full space.
pub fn nullspace(m: &DMat, tol: f64) -> Result<Nullspace, LinalgError> {
    let (mut spectrum, vectors) = sym_eig(m)?;
    let n = spectrum.eigenvalues.len();
    let lam_max = spectrum
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &l| a.max(l.abs()));
    if lam_max == 0.0 {
        spectrum.gap_index = Some(n);
        return Ok(Nullspace {
            basis: DMat::identity(n, n),
            dim: n,
            spectrum,
            gap_ratio: f64::INFINITY,
            ambiguous: false,
        });
    }
    Ok(split_below(spectrum, vectors, tol * lam_max))
}

/// Numerical null space split at an absolute eigenvalue threshold.
///
/// Same report as [`nullspace`], for callers whose zero scale is a physical
/// quantity rather than a fraction of the largest eigenvalue.
pub fn nullspace_below(m: &DMat, cut: f64) -> Result<Nullspace, LinalgError> {
    let (spectrum, vectors) = sym_eig(m)?;
    Ok(split_below(spectrum, vectors, cut))
}

/// Solve A x = b for symmetric positive-definite A by Cholesky factorization.
/// The relative residual is verified to be at most 1e-10.
pub fn spd_solve(a: &DMat, b: &DVec) -> Result<DVec, LinalgError> {
    check_symmetric(a)?;
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(LinalgError::NotPositiveDefinite)?;
    let mut x = chol.solve(b);
    // One refinement pass with the same factor keeps the backward error near
    // round-off even when conditioning eats most of the tolerance.
    let r = b - a * &x;
    x += chol.solve(&r);
    // Normwise backward error; a relative residual would be unattainable for
    // ill-conditioned systems no matter how accurate the solve.
    let den = a.norm() * x.norm() + b.norm();
    if den > 0.0 {
        let res = (a * &x - b).norm() / den;
        if res > 1e-10 {
            return Err(LinalgError::ResidualTooLarge(res));
        }
    }
    Ok(x)
}

/// Symmetric banded matrix stored by its lower band, with an in-place
/// Cholesky factorization. Entry (i, j) with i >= j and i - j <= band lives at
/// `data[i * (band + 1) + (i - j)]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    pub n: usize,
    pub band: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedSpd {
    pub fn zeros(n: usize, band: usize) -> Self {
        BandedSpd {
            n,
            band,
            data: vec![0.0; n * (band + 1)],
            factored: false,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.band);
        i * (self.band + 1) + (i - j)
    }

    /// Add to entry (i, j); the caller supplies each unordered pair once.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(!self.factored, "matrix already factored");
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.band {
            0.0
        } else {
            self.data[self.at(i, j)]
        }
    }

    /// y += A x for the unfactored matrix.
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        assert!(!self.factored, "matrix already factored");
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.band);
            let mut s = 0.0;
            for j in lo..=i {
                let a = self.data[self.at(i, j)];
                s += a * x[j];
                if j < i {
                    y[j] += a * x[i];
                }
            }
            y[i] += s;
        }
    }

    /// Squared Frobenius norm of the unfactored matrix.
    pub fn frobenius_sq(&self) -> f64 {
        assert!(!self.factored, "matrix already factored");
        let mut s = 0.0;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.band);
            for j in lo..=i {
                let a = self.data[self.at(i, j)];
                s += if j == i { a * a } else { 2.0 * a * a };
            }
        }
        s
    }

    /// In-place Cholesky factorization A = L L^T within the band.
    pub fn factorize(&mut self) -> Result<(), LinalgError> {
        assert!(!self.factored, "matrix already factored");
        let band = self.band;
        for i in 0..self.n {
            let lo = i.saturating_sub(band);
            for j in lo..=i {
                let mut s = self.data[self.at(i, j)];
                let start = lo.max(j.saturating_sub(band));
                for k in start..j {
                    s -= self.data[self.at(i, k)] * self.data[self.at(j, k)];
                }
                let idx = self.at(i, j);
                if i == j {
                    if s <= 0.0 {
                        return Err(LinalgError::NotPositiveDefinite);
                    }
                    self.data[idx] = s.sqrt();
                } else {
                    self.data[idx] = s / self.data[self.at(j, j)];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve A x = b in place using the factorization.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert!(self.factored, "factorize before solving");
        assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.band);
            let mut s = b[i];
            for j in lo..i {
                s -= self.data[self.at(i, j)] * b[j];
            }
            b[i] = s / self.data[self.at(i, i)];
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.band).min(self.n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= self.data[self.at(j, i)] * b[j];
            }
            b[i] = s / self.data[self.at(i, i)];
        }
    }
}
