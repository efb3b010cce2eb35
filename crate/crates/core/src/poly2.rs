//! Dense bivariate polynomials with f64 coefficients.
//!
//! Used for closed-form solution fields and their source terms; sizes stay
//! small (degree <= ~16) so dense storage is fine.

use std::ops::{Add, Mul, Sub};

/// Polynomial in (x, y); coeffs[j * nx + i] multiplies x^i y^j.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePoly {
    nx: usize,
    ny: usize,
    coeffs: Vec<f64>,
}

impl BivariatePoly {
    pub fn zero() -> Self {
        BivariatePoly {
            nx: 1,
            ny: 1,
            coeffs: vec![0.0],
        }
    }

    pub fn constant(c: f64) -> Self {
        BivariatePoly {
            nx: 1,
            ny: 1,
            coeffs: vec![c],
        }
    }

    /// a + b x + c y.
    pub fn affine(a: f64, b: f64, c: f64) -> Self {
        BivariatePoly {
            nx: 2,
            ny: 2,
            coeffs: vec![a, b, c, 0.0],
        }
    }

    /// Build from (x-power, y-power, coefficient) terms.
    pub fn from_terms(terms: &[(usize, usize, f64)]) -> Self {
        let nx = terms.iter().map(|t| t.0).max().unwrap_or(0) + 1;
        let ny = terms.iter().map(|t| t.1).max().unwrap_or(0) + 1;
        let mut coeffs = vec![0.0; nx * ny];
        for &(i, j, c) in terms {
            coeffs[j * nx + i] += c;
        }
        BivariatePoly { nx, ny, coeffs }
    }

    fn coeff(&self, i: usize, j: usize) -> f64 {
        if i < self.nx && j < self.ny {
            self.coeffs[j * self.nx + i]
        } else {
            0.0
        }
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = BivariatePoly::constant(1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        BivariatePoly {
            nx: self.nx,
            ny: self.ny,
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn dx(&self) -> Self {
        if self.nx == 1 {
            return BivariatePoly::zero();
        }
        let nx = self.nx - 1;
        let mut coeffs = vec![0.0; nx * self.ny];
        for j in 0..self.ny {
            for i in 1..self.nx {
                coeffs[j * nx + i - 1] = i as f64 * self.coeffs[j * self.nx + i];
            }
        }
        BivariatePoly {
            nx,
            ny: self.ny,
            coeffs,
        }
    }

    pub fn dy(&self) -> Self {
        if self.ny == 1 {
            return BivariatePoly::zero();
        }
        let ny = self.ny - 1;
        let mut coeffs = vec![0.0; self.nx * ny];
        for j in 1..self.ny {
            for i in 0..self.nx {
                coeffs[(j - 1) * self.nx + i] = j as f64 * self.coeffs[j * self.nx + i];
            }
        }
        BivariatePoly {
            nx: self.nx,
            ny,
            coeffs,
        }
    }

    pub fn laplacian(&self) -> Self {
        &self.dx().dx() + &self.dy().dy()
    }

    pub fn bilaplacian(&self) -> Self {
        self.laplacian().laplacian()
    }

    /// Horner evaluation, y-major then x.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for j in (0..self.ny).rev() {
            let mut row = 0.0;
            for i in (0..self.nx).rev() {
                row = row * x + self.coeffs[j * self.nx + i];
            }
            acc = acc * y + row;
        }
        acc
    }

    pub fn total_degree(&self) -> usize {
        let mut deg = 0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.coeffs[j * self.nx + i] != 0.0 {
                    deg = deg.max(i + j);
                }
            }
        }
        deg
    }
}

impl Add for &BivariatePoly {
    type Output = BivariatePoly;
    fn add(self, rhs: &BivariatePoly) -> BivariatePoly {
        let nx = self.nx.max(rhs.nx);
        let ny = self.ny.max(rhs.ny);
        let mut coeffs = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                coeffs[j * nx + i] = self.coeff(i, j) + rhs.coeff(i, j);
            }
        }
        BivariatePoly { nx, ny, coeffs }
    }
}

impl Sub for &BivariatePoly {
    type Output = BivariatePoly;
    fn sub(self, rhs: &BivariatePoly) -> BivariatePoly {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &BivariatePoly {
    type Output = BivariatePoly;
    fn mul(self, rhs: &BivariatePoly) -> BivariatePoly {
        let nx = self.nx + rhs.nx - 1;
        let ny = self.ny + rhs.ny - 1;
        let mut coeffs = vec![0.0; nx * ny];
        for j1 in 0..self.ny {
            for i1 in 0..self.nx {
                let c1 = self.coeffs[j1 * self.nx + i1];
                if c1 == 0.0 {
                    continue;
                }
                for j2 in 0..rhs.ny {
                    for i2 in 0..rhs.nx {
                        coeffs[(j1 + j2) * nx + i1 + i2] += c1 * rhs.coeffs[j2 * rhs.nx + i2];
                    }
                }
            }
        }
        BivariatePoly { nx, ny, coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_and_power_expand_correctly() {
        let xy = BivariatePoly::affine(0.0, 1.0, 1.0); // x + y
        let sq = xy.pow(2); // x^2 + 2xy + y^2
        assert_abs_diff_eq!(sq.eval(2.0, 3.0), 25.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sq.coeff(1, 1), 2.0, epsilon = 1e-15);
        assert_eq!(sq.total_degree(), 2);
    }

    #[test]
    fn derivatives_reduce_degree() {
        let p = BivariatePoly::from_terms(&[(2, 1, 1.0)]); // x^2 y
        let lap = p.laplacian(); // 2y
        assert_abs_diff_eq!(lap.eval(5.0, 3.0), 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.dx().eval(1.5, 2.0), 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.dy().eval(1.5, 2.0), 2.25, epsilon = 1e-14);
    }

    #[test]
    fn bilaplacian_of_radial_bump_is_constant() {
        // w = (1 - x^2 - y^2)^2 has constant fourth-order Laplacian 64.
        let q = BivariatePoly::from_terms(&[(0, 0, 1.0), (2, 0, -1.0), (0, 2, -1.0)]);
        let w = q.pow(2);
        let b = w.bilaplacian();
        assert_eq!(b.total_degree(), 0);
        assert_abs_diff_eq!(b.eval(0.3, -0.4), 64.0, epsilon = 1e-12);
    }

    #[test]
    fn bilaplacian_of_quartic_monomial() {
        let p = BivariatePoly::from_terms(&[(4, 0, 1.0)]);
        assert_abs_diff_eq!(p.bilaplacian().eval(7.0, -2.0), 24.0, epsilon = 1e-12);
    }
}
