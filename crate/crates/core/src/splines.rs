//! Univariate and tensor-product spline spaces on [0, 1].
//!
//! A univariate space is determined by a degree p, an interior smoothness r,
//! and a number of uniform spans n: open (clamped) knot vector, every interior
//! knot i/n repeated p-r times. Choosing r >= p collapses the space to global
//! polynomials of degree p, regardless of n.

use crate::linalg::{DMat, DVec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("interpolation collocation matrix is singular")]
    SingularCollocation,
}

/// Univariate spline space S^p_r with n uniform spans on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplineSpace1D {
    pub degree: usize,
    pub regularity: usize,
    pub spans: usize,
}

impl SplineSpace1D {
    pub fn new(degree: usize, regularity: usize, spans: usize) -> Self {
        assert!(degree >= 1, "degree must be at least 1");
        assert!(spans >= 1, "need at least one span");
        SplineSpace1D {
            degree,
            regularity,
            spans,
        }
    }

    /// True when r >= p, i.e. the space is global polynomials of degree p.
    pub fn is_polynomial(&self) -> bool {
        self.regularity >= self.degree
    }

    /// Number of effective spans in the knot vector.
    fn knot_spans(&self) -> usize {
        if self.is_polynomial() {
            1
        } else {
            self.spans
        }
    }

    /// Multiplicity of each interior knot.
    fn interior_multiplicity(&self) -> usize {
        self.degree - self.regularity.min(self.degree - 1)
    }

    pub fn dim(&self) -> usize {
        let p = self.degree;
        if self.is_polynomial() {
            p + 1
        } else {
            (p + 1) + (self.spans - 1) * (p - self.regularity)
        }
    }

    /// Full clamped knot vector, length dim + p + 1.
    pub fn knots(&self) -> Vec<f64> {
        let p = self.degree;
        let n = self.knot_spans();
        let mult = self.interior_multiplicity();
        let mut t = Vec::with_capacity(self.dim() + p + 1);
        t.extend(std::iter::repeat(0.0).take(p + 1));
        for i in 1..n {
            let x = i as f64 / n as f64;
            t.extend(std::iter::repeat(x).take(mult));
        }
        t.extend(std::iter::repeat(1.0).take(p + 1));
        t
    }

    /// Index i of the knot span containing t, so that knots[i] <= t < knots[i+1]
    /// (t = 1 falls in the last nonempty span).
    pub fn find_span(&self, t: f64) -> usize {
        assert!(
            (0.0..=1.0).contains(&t),
            "parameter {t} outside the unit interval"
        );
        let n = self.knot_spans();
        let s = ((t * n as f64) as usize).min(n - 1);
        self.degree + s * self.interior_multiplicity()
    }

    /// Values and derivatives of the p+1 basis functions active at t.
    ///
    /// Returns `(first, ders)` where `ders[k][j]` is the k-th derivative of
    /// basis function `first + j`. Derivatives of order beyond the degree are
    /// zero. Cox-de Boor recursion on the local knot window.
    pub fn eval_basis(&self, t: f64, order: usize) -> (usize, Vec<Vec<f64>>) {
        let p = self.degree;
        let knots = self.knots();
        let span = self.find_span(t);
        let kmax = order.min(p);

        let mut ndu = vec![vec![0.0f64; p + 1]; p + 1];
        ndu[0][0] = 1.0;
        let mut left = vec![0.0f64; p + 1];
        let mut right = vec![0.0f64; p + 1];
        for j in 1..=p {
            left[j] = t - knots[span + 1 - j];
            right[j] = knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0f64; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = [vec![0.0f64; p + 1], vec![0.0f64; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0].iter_mut().for_each(|x| *x = 0.0);
            a[1].iter_mut().for_each(|x| *x = 0.0);
            a[0][0] = 1.0;
            for k in 1..=kmax {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    let col = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][col];
                    d += a[s2][j] * ndu[col][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=kmax {
            for j in 0..=p {
                ders[k][j] *= factor;
            }
            factor *= (p - k) as f64;
        }
        (span - p, ders)
    }

    /// Greville abscissae: averages of p consecutive interior knots.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        let knots = self.knots();
        (0..self.dim())
            .map(|i| knots[i + 1..i + 1 + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// The same space with twice the spans.
    pub fn h_refined(&self) -> SplineSpace1D {
        SplineSpace1D {
            spans: self.spans * 2,
            ..*self
        }
    }

    /// Prolongation matrix P (fine dim x coarse dim) with
    /// fine_coeffs = P * coarse_coeffs representing the same function on the
    /// h-refined space. Built by repeated single knot insertion.
    pub fn prolongation(&self) -> DMat {
        let fine = self.h_refined();
        if self.is_polynomial() {
            return DMat::identity(self.dim(), self.dim());
        }
        let p = self.degree;
        let mut knots = self.knots();
        let mut prol = DMat::identity(self.dim(), self.dim());
        // Insert every knot of the fine vector missing from the coarse one,
        // in ascending order.
        let target = fine.knots();
        let mut have = knots.clone();
        for &x in &target {
            if let Some(pos) = have.iter().position(|&k| (k - x).abs() < 1e-14) {
                have.remove(pos);
                continue;
            }
            let m = insert_knot(&mut knots, p, x);
            prol = m * prol;
        }
        assert!(have.is_empty(), "coarse knots must nest into fine knots");
        assert_eq!(prol.nrows(), fine.dim());
        prol
    }

    /// Interpolate f at the Greville abscissae.
    pub fn interpolate(
        &self,
        f: impl Fn(f64) -> f64,
    ) -> Result<SplineFunction1D, SplineError> {
        let pts = self.greville();
        let m = self.collocation_matrix(&pts);
        let rhs = DVec::from_iterator(pts.len(), pts.iter().map(|&x| f(x)));
        let lu = m.lu();
        let sol = lu.solve(&rhs).ok_or(SplineError::SingularCollocation)?;
        Ok(SplineFunction1D {
            space: *self,
            coeffs: sol.iter().copied().collect(),
        })
    }

    /// Collocation matrix B[i][j] = N_j(pts[i]).
    pub fn collocation_matrix(&self, pts: &[f64]) -> DMat {
        let mut m = DMat::zeros(pts.len(), self.dim());
        for (i, &x) in pts.iter().enumerate() {
            let (first, ders) = self.eval_basis(x, 0);
            for (j, &v) in ders[0].iter().enumerate() {
                m[(i, first + j)] = v;
            }
        }
        m
    }
}

/// One step of knot insertion; returns the (dim+1 x dim) coefficient map.
fn insert_knot(knots: &mut Vec<f64>, p: usize, x: f64) -> DMat {
    let dim = knots.len() - p - 1;
    // Span of x: last index with knots[k] <= x.
    let mut k = 0;
    for i in 0..knots.len() - 1 {
        if knots[i] <= x && x < knots[i + 1] {
            k = i;
        }
    }
    if x >= *knots.last().unwrap() {
        k = dim - 1;
    }
    let mut m = DMat::zeros(dim + 1, dim);
    for i in 0..=dim {
        if i + p <= k {
            m[(i, i)] = 1.0;
        } else if i > k {
            m[(i, i - 1)] = 1.0;
        } else {
            let denom = knots[i + p] - knots[i];
            let a = if denom > 0.0 { (x - knots[i]) / denom } else { 0.0 };
            m[(i, i)] = a;
            m[(i, i - 1)] = 1.0 - a;
        }
    }
    knots.insert(k + 1, x);
    m
}

/// Spline function: coefficients over a univariate space.
#[derive(Debug, Clone)]
pub struct SplineFunction1D {
    pub space: SplineSpace1D,
    pub coeffs: Vec<f64>,
}

impl SplineFunction1D {
    pub fn new(space: SplineSpace1D, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.dim());
        SplineFunction1D { space, coeffs }
    }

    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let (first, ders) = self.space.eval_basis(t, order);
        ders[order]
            .iter()
            .enumerate()
            .map(|(j, &b)| b * self.coeffs[first + j])
            .sum()
    }
}

/// Tensor-product space. Flat coefficient index is iv * dim_u + iu
/// (v-major, matching the geometry file layout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplineSpace2D {
    pub u: SplineSpace1D,
    pub v: SplineSpace1D,
}

/// Value and derivatives up to order 2 of a bivariate function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Deriv2 {
    pub v: f64,
    pub du: f64,
    pub dv: f64,
    pub duu: f64,
    pub duv: f64,
    pub dvv: f64,
}

impl SplineSpace2D {
    pub fn new(u: SplineSpace1D, v: SplineSpace1D) -> Self {
        SplineSpace2D { u, v }
    }

    /// Square space: same parameters in both directions.
    pub fn square(degree: usize, regularity: usize, spans: usize) -> Self {
        let s = SplineSpace1D::new(degree, regularity, spans);
        SplineSpace2D { u: s, v: s }
    }

    pub fn dim(&self) -> usize {
        self.u.dim() * self.v.dim()
    }

    pub fn index(&self, iu: usize, iv: usize) -> usize {
        iv * self.u.dim() + iu
    }

    /// Evaluate a coefficient grid with derivatives up to `order` (<= 2).
    pub fn eval_coeffs(&self, coeffs: &[f64], u: f64, v: f64, order: usize) -> Deriv2 {
        assert!(order <= 2);
        let (fu, du) = self.u.eval_basis(u, order);
        let (fv, dv) = self.v.eval_basis(v, order);
        let dim_u = self.u.dim();
        let mut out = Deriv2::default();
        for (jv, bv) in dv[0].iter().enumerate() {
            let row = (fv + jv) * dim_u + fu;
            let bv1 = if order >= 1 { dv[1][jv] } else { 0.0 };
            let bv2 = if order >= 2 { dv[2][jv] } else { 0.0 };
            for (ju, bu) in du[0].iter().enumerate() {
                let c = coeffs[row + ju];
                let bu1 = if order >= 1 { du[1][ju] } else { 0.0 };
                let bu2 = if order >= 2 { du[2][ju] } else { 0.0 };
                out.v += c * bu * bv;
                if order >= 1 {
                    out.du += c * bu1 * bv;
                    out.dv += c * bu * bv1;
                }
                if order >= 2 {
                    out.duu += c * bu2 * bv;
                    out.duv += c * bu1 * bv1;
                    out.dvv += c * bu * bv2;
                }
            }
        }
        out
    }

    /// Tensor-product Greville interpolation of f(u, v).
    pub fn interpolate(
        &self,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<SplineFunction2D, SplineError> {
        let gu = self.u.greville();
        let gv = self.v.greville();
        let (nu, nv) = (gu.len(), gv.len());
        // Interpolate along u for every v sample, then along v.
        let cu = self.u.collocation_matrix(&gu).lu();
        let cv = self.v.collocation_matrix(&gv).lu();
        let mut stage = vec![0.0; nu * nv];
        for (jv, &y) in gv.iter().enumerate() {
            let rhs = DVec::from_iterator(nu, gu.iter().map(|&x| f(x, y)));
            let sol = cu.solve(&rhs).ok_or(SplineError::SingularCollocation)?;
            for iu in 0..nu {
                stage[jv * nu + iu] = sol[iu];
            }
        }
        let mut coeffs = vec![0.0; nu * nv];
        for iu in 0..nu {
            let rhs = DVec::from_iterator(nv, (0..nv).map(|jv| stage[jv * nu + iu]));
            let sol = cv.solve(&rhs).ok_or(SplineError::SingularCollocation)?;
            for jv in 0..nv {
                coeffs[jv * nu + iu] = sol[jv];
            }
        }
        Ok(SplineFunction2D {
            space: *self,
            coeffs,
        })
    }
}

/// Bivariate spline function.
#[derive(Debug, Clone)]
pub struct SplineFunction2D {
    pub space: SplineSpace2D,
    pub coeffs: Vec<f64>,
}

impl SplineFunction2D {
    pub fn eval(&self, u: f64, v: f64, order: usize) -> Deriv2 {
        self.space.eval_coeffs(&self.coeffs, u, v, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent Cox-de Boor oracle: direct recursion over the full knot
    /// vector, derivatives by the knot-difference recurrence.
    fn oracle_basis(knots: &[f64], p: usize, i: usize, t: f64) -> f64 {
        if p == 0 {
            let last = t >= *knots.last().unwrap() - 1e-15 && knots[i + 1] >= 1.0;
            if (knots[i] <= t && t < knots[i + 1]) || (last && knots[i] < knots[i + 1]) {
                return 1.0;
            }
            return 0.0;
        }
        let mut acc = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            acc += (t - knots[i]) / d1 * oracle_basis(knots, p - 1, i, t);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            acc += (knots[i + p + 1] - t) / d2 * oracle_basis(knots, p - 1, i + 1, t);
        }
        acc
    }

    fn oracle_deriv(knots: &[f64], p: usize, i: usize, t: f64, order: usize) -> f64 {
        if order == 0 {
            return oracle_basis(knots, p, i, t);
        }
        let mut acc = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            acc += p as f64 / d1 * oracle_deriv(knots, p - 1, i, t, order - 1);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            acc -= p as f64 / d2 * oracle_deriv(knots, p - 1, i + 1, t, order - 1);
        }
        acc
    }

    #[test]
    fn dims_match_closed_form() {
        assert_eq!(SplineSpace1D::new(3, 1, 4).dim(), 10);
        assert_eq!(SplineSpace1D::new(2, 2, 5).dim(), 3); // global quadratics
        assert_eq!(SplineSpace1D::new(5, 4, 8).dim(), 13);
        assert_eq!(SplineSpace1D::new(4, 1, 1).dim(), 5);
    }

    #[test]
    fn knot_vector_layout() {
        let s = SplineSpace1D::new(3, 1, 2);
        assert_eq!(
            s.knots(),
            vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0]
        );
        let poly = SplineSpace1D::new(2, 5, 4);
        assert_eq!(poly.knots(), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn basis_matches_recursive_oracle() {
        for &(p, r, n) in &[(1, 1, 3), (2, 1, 2), (3, 1, 4), (3, 2, 3), (4, 2, 2), (5, 4, 4)] {
            let s = SplineSpace1D::new(p, r, n);
            let knots = s.knots();
            for k in 0..=40 {
                let t = k as f64 / 40.0;
                let (first, ders) = s.eval_basis(t, 2);
                for j in 0..s.dim() {
                    for order in 0..=2 {
                        let got = if j >= first && j <= first + p {
                            ders[order][j - first]
                        } else {
                            0.0
                        };
                        let want = oracle_deriv(&knots, p, j, t, order);
                        assert!(
                            (got - want).abs() < 1e-9 * (1.0 + want.abs()),
                            "p={p} r={r} n={n} t={t} j={j} order={order}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_positivity() {
        for p in 1..=5 {
            for r in 1..=p {
                let s = SplineSpace1D::new(p, r, 3);
                for k in 0..=50 {
                    let t = k as f64 / 50.0;
                    let (_, ders) = s.eval_basis(t, 1);
                    let sum: f64 = ders[0].iter().sum();
                    let dsum: f64 = ders[1].iter().sum();
                    assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-13);
                    assert_abs_diff_eq!(dsum, 0.0, epsilon = 1e-10);
                    assert!(ders[0].iter().all(|&x| x >= -1e-14));
                }
            }
        }
    }

    #[test]
    fn clamped_endpoint_interpolation() {
        let s = SplineSpace1D::new(4, 2, 3);
        let (first, d0) = s.eval_basis(0.0, 0);
        assert_eq!(first, 0);
        assert_abs_diff_eq!(d0[0][0], 1.0, epsilon = 1e-15);
        assert!(d0[0][1..].iter().all(|&x| x.abs() < 1e-15));
        let (first, d1) = s.eval_basis(1.0, 0);
        assert_eq!(first + 4, s.dim() - 1);
        assert_abs_diff_eq!(d1[0][4], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn prolongation_preserves_function_values() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &(p, r, n) in &[(2usize, 1usize, 1usize), (3, 1, 2), (3, 2, 2), (4, 3, 3), (5, 1, 2)] {
            let coarse = SplineSpace1D::new(p, r, n);
            let fine = coarse.h_refined();
            let prol = coarse.prolongation();
            assert_eq!(prol.nrows(), fine.dim());
            assert_eq!(prol.ncols(), coarse.dim());
            let c = DVec::from_iterator(coarse.dim(), (0..coarse.dim()).map(|_| rng.gen_range(-1.0..1.0)));
            let f = &prol * &c;
            let fc = SplineFunction1D::new(coarse, c.iter().copied().collect());
            let ff = SplineFunction1D::new(fine, f.iter().copied().collect());
            for k in 0..=100 {
                let t = k as f64 / 100.0;
                assert_abs_diff_eq!(fc.eval(t, 0), ff.eval(t, 0), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn greville_interpolation_reproduces_polynomials() {
        let s = SplineSpace1D::new(3, 1, 4);
        let f = |x: f64| 2.0 - x + 3.0 * x * x - 0.5 * x * x * x;
        let g = s.interpolate(f).unwrap();
        for k in 0..=97 {
            let t = k as f64 / 97.0;
            assert_abs_diff_eq!(g.eval(t, 0), f(t), epsilon = 1e-12);
        }
        // Derivative evaluation against the analytic derivative.
        let df = |x: f64| -1.0 + 6.0 * x - 1.5 * x * x;
        for k in 0..=9 {
            let t = k as f64 / 9.0;
            assert_abs_diff_eq!(g.eval(t, 1), df(t), epsilon = 1e-11);
        }
    }

    #[test]
    fn tensor_interpolation_is_exact_for_matching_degree() {
        let sp = SplineSpace2D::square(2, 2, 1);
        let f = |u: f64, v: f64| (1.0 + u) * (2.0 - v) + u * u * v * v;
        let g = sp.interpolate(f).unwrap();
        for i in 0..=7 {
            for j in 0..=7 {
                let (u, v) = (i as f64 / 7.0, j as f64 / 7.0);
                let d = g.eval(u, v, 2);
                assert_abs_diff_eq!(d.v, f(u, v), epsilon = 1e-12);
            }
        }
        // Spot-check mixed derivative: d2/dudv = 4uv.
        let d = g.eval(0.3, 0.7, 2);
        assert_abs_diff_eq!(d.duv, 4.0 * 0.3 * 0.7 - 1.0, epsilon = 1e-11);
    }

    #[test]
    fn refinement_is_nested_in_dimension() {
        for p in 2..=5 {
            for r in 1..p {
                let s = SplineSpace1D::new(p, r, 2);
                assert!(s.h_refined().dim() > s.dim());
            }
        }
    }
}
