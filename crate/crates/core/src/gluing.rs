//! Gluing data along interfaces and its linear-data classification.
//!
//! Along an interface the two adjacent parametrizations satisfy one linear
//! relation between their transversal derivatives and the interface tangent.
//! The scalar weights of that relation (two `alpha`s, one `beta`, plus the
//! tangential split of `beta` into per-side `beta`s) are what the C1 coupling
//! machinery consumes. [`compute_gluing_data`] extracts them exactly as
//! splines; [`classify_as_g1`] decides whether the relation also admits
//! weights of the low polynomial degrees (linear alphas, quadratic beta) that
//! the C1 space constructions require.
//!
//! Rational patches are handled through their homogeneous numerator surface;
//! for unit weights that projection coincides with the physical map, so all
//! sampling here goes through the homogeneous accessors of the frame.

use crate::geometry::{Edge, GeometryError, InterfaceFrame, MultiPatchGeometry, Side};
use crate::linalg::{DMat, DVec};
use crate::splines::{SplineFunction1D, SplineSpace1D};
use serde::Serialize;
use thiserror::Error;

/// Relative singular-value cutoff used by the classification.
pub const DEFAULT_AS_TOL: f64 = 1e-10;

/// A fit is accepted when its sampled residual stays below this, relative to
/// the data magnitude.
const FIT_TOL: f64 = 1e-10;

/// Above this defect the homogeneous surfaces do not share the interface
/// curve and per-side data cannot be compared there.
const HOM_C0_TOL: f64 = 1e-8;

/// Singular-value ratios in `(tol, AMBIGUITY_FACTOR*tol]` are flagged instead
/// of silently decided.
const AMBIGUITY_FACTOR: f64 = 1e3;

/// Span cap for the adaptive per-side beta fits.
const BETA_SPAN_CAP: usize = 1024;

#[derive(Debug, Error)]
pub enum GluingError {
    #[error("interface tangent vanishes near v = {v:.4} (|t| = {norm:.3e})")]
    TangentVanishes { v: f64, norm: f64 },
    #[error("sign condition fails: alpha_left*alpha_right = {product:.3e} at v = {v:.4}")]
    SignCondition { v: f64, product: f64 },
    #[error("homogeneous surfaces disagree along the interface (defect {defect:.3e})")]
    HomogeneousMismatch { defect: f64 },
    #[error("{what} is not representable in the fit space (residual {residual:.3e})")]
    FitFailed { what: &'static str, residual: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn det2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Spline layout (degree, regularity, spans) of the interface data direction,
/// merged over both sides. The data direction of a patch is the parameter
/// that runs along its glued edge.
fn fit_layout(frame: &InterfaceFrame) -> SplineSpace1D {
    let run = |side: Side| {
        let sp = frame.patch(side).space;
        match frame.edge(side) {
            Edge::U0 | Edge::U1 => sp.v,
            Edge::V0 | Edge::V1 => sp.u,
        }
    };
    let (l, r) = (run(Side::Left), run(Side::Right));
    SplineSpace1D::new(
        l.degree.max(r.degree),
        l.regularity.min(r.regularity),
        l.spans.max(r.spans),
    )
}

/// Interpolate `f` in `space` and verify the result reproduces `f` up to
/// [`FIT_TOL`] relative to the data magnitude.
fn fit_exact(
    space: SplineSpace1D,
    f: &dyn Fn(f64) -> f64,
    what: &'static str,
) -> Result<(SplineFunction1D, f64), GluingError> {
    let fit = space.interpolate(f).map_err(|_| GluingError::FitFailed {
        what,
        residual: f64::INFINITY,
    })?;
    let m = 4 * space.dim() + 17;
    let mut residual = 0.0f64;
    let mut scale = 1.0f64;
    for k in 0..m {
        let v = k as f64 / (m - 1) as f64;
        let val = f(v);
        scale = scale.max(val.abs());
        residual = residual.max((val - fit.eval(v, 0)).abs());
    }
    if residual > FIT_TOL * scale {
        return Err(GluingError::FitFailed { what, residual });
    }
    Ok((fit, residual))
}

/// Fit on successively halved spans until the residual bound is met. Needed
/// because the per-side betas are rational in general.
fn fit_adaptive(
    degree: usize,
    regularity: usize,
    spans: usize,
    f: &dyn Fn(f64) -> f64,
    what: &'static str,
) -> Result<(SplineFunction1D, f64), GluingError> {
    let mut n = spans;
    loop {
        match fit_exact(SplineSpace1D::new(degree, regularity, n), f, what) {
            Ok(ok) => return Ok(ok),
            Err(e) => {
                if n >= BETA_SPAN_CAP {
                    return Err(e);
                }
                n *= 2;
            }
        }
    }
}

/// The scalar weights of the interface derivative relation, stored as exact
/// splines with the scale fixed so that the alphas are the raw signed areas
/// of the frame derivatives.
#[derive(Debug, Clone)]
pub struct GluingData {
    pub alpha_left: SplineFunction1D,
    pub alpha_right: SplineFunction1D,
    pub beta_bar: SplineFunction1D,
    pub beta_left: SplineFunction1D,
    pub beta_right: SplineFunction1D,
    /// Human-readable record of the scale convention.
    pub gamma_normalization: String,
    /// Worst sampled residual among the five fits.
    pub fit_residual: f64,
}

impl GluingData {
    pub fn alpha(&self, side: Side) -> &SplineFunction1D {
        match side {
            Side::Left => &self.alpha_left,
            Side::Right => &self.alpha_right,
        }
    }

    pub fn beta(&self, side: Side) -> &SplineFunction1D {
        match side {
            Side::Left => &self.beta_left,
            Side::Right => &self.beta_right,
        }
    }

    /// Max norm of `alpha_right*duL - alpha_left*duR + beta_bar*t` over `n`
    /// uniform points.
    pub fn g1_residual(&self, frame: &InterfaceFrame, n: usize) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..n {
            let v = k as f64 / (n - 1) as f64;
            let l = frame.hom_du(Side::Left, v);
            let r = frame.hom_du(Side::Right, v);
            let t = frame.hom_dv_f0(v);
            let al = self.alpha_left.eval(v, 0);
            let ar = self.alpha_right.eval(v, 0);
            let bb = self.beta_bar.eval(v, 0);
            for c in 0..2 {
                worst = worst.max((ar * l[c] - al * r[c] + bb * t[c]).abs());
            }
        }
        worst
    }

    /// Max defect of `beta_bar = alpha_left*beta_right - alpha_right*beta_left`
    /// over `n` uniform points.
    pub fn beta_identity_residual(&self, n: usize) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..n {
            let v = k as f64 / (n - 1) as f64;
            let split = self.alpha_left.eval(v, 0) * self.beta_right.eval(v, 0)
                - self.alpha_right.eval(v, 0) * self.beta_left.eval(v, 0);
            worst = worst.max((self.beta_bar.eval(v, 0) - split).abs());
        }
        worst
    }

    /// Smallest sampled value of `alpha_left*alpha_right`; positive means the
    /// sign condition holds on the sample grid.
    pub fn sign_condition_margin(&self, n: usize) -> f64 {
        let mut min = f64::INFINITY;
        for k in 0..n {
            let v = k as f64 / (n - 1) as f64;
            min = min.min(self.alpha_left.eval(v, 0) * self.alpha_right.eval(v, 0));
        }
        min
    }
}

/// Computes the interface gluing data as exact splines.
///
/// The alphas land in degree `2p-1`, the tangential weight `beta_bar` in
/// degree `2p`, both on the merged edge knots; the per-side betas are in
/// general rational and are fitted adaptively. Uses homogeneous data
/// throughout, which for unit-weight patches equals the physical data.
pub fn compute_gluing_data(frame: &InterfaceFrame) -> Result<GluingData, GluingError> {
    if frame.is_rational() {
        let defect = frame.hom_c0_defect();
        if defect > HOM_C0_TOL {
            return Err(GluingError::HomogeneousMismatch { defect });
        }
    }
    let t = |v: f64| frame.hom_dv_f0(v);
    let al = |v: f64| det2(frame.hom_du(Side::Left, v), t(v));
    let ar = |v: f64| det2(frame.hom_du(Side::Right, v), t(v));
    let bb = |v: f64| det2(frame.hom_du(Side::Left, v), frame.hom_du(Side::Right, v));
    let bl = |v: f64| {
        let tv = t(v);
        dot2(frame.hom_du(Side::Left, v), tv) / dot2(tv, tv)
    };
    let br = |v: f64| {
        let tv = t(v);
        dot2(frame.hom_du(Side::Right, v), tv) / dot2(tv, tv)
    };

    for k in 0..=100 {
        let v = k as f64 / 100.0;
        let tv = t(v);
        let norm = dot2(tv, tv).sqrt();
        if norm < 1e-10 {
            return Err(GluingError::TangentVanishes { v, norm });
        }
        let product = al(v) * ar(v);
        if product <= 0.0 {
            return Err(GluingError::SignCondition { v, product });
        }
    }

    let layout = fit_layout(frame);
    let p = layout.degree;
    let alpha_space = SplineSpace1D::new(2 * p - 1, layout.regularity.saturating_sub(1), layout.spans);
    let beta_space = SplineSpace1D::new(2 * p, layout.regularity, layout.spans);
    let (alpha_left, r0) = fit_exact(alpha_space, &al, "alpha_left")?;
    let (alpha_right, r1) = fit_exact(alpha_space, &ar, "alpha_right")?;
    let (beta_bar, r2) = fit_exact(beta_space, &bb, "beta_bar")?;
    let (beta_left, r3) = fit_adaptive(2 * p, layout.regularity, layout.spans, &bl, "beta_left")?;
    let (beta_right, r4) = fit_adaptive(2 * p, layout.regularity, layout.spans, &br, "beta_right")?;
    Ok(GluingData {
        alpha_left,
        alpha_right,
        beta_bar,
        beta_left,
        beta_right,
        gamma_normalization: "unit scale (alphas are raw signed areas of frame derivatives)".into(),
        fit_residual: r0.max(r1).max(r2).max(r3).max(r4),
    })
}

/// Gluing data for every interface of a geometry, in interface order.
pub fn all_gluing_data(geom: &MultiPatchGeometry) -> Result<Vec<GluingData>, GluingError> {
    (0..geom.interfaces.len())
        .map(|k| compute_gluing_data(&InterfaceFrame::new(geom, k)?))
        .collect()
}

/// Direction crossing the interface, built from one side's gluing data.
pub fn transversal_from(
    gluing: &GluingData,
    frame: &InterfaceFrame,
    side: Side,
    v: f64,
) -> [f64; 2] {
    let du = frame.hom_du(side, v);
    let tv = frame.hom_dv_f0(v);
    let a = gluing.alpha(side).eval(v, 0);
    let b = gluing.beta(side).eval(v, 0);
    [(du[0] - b * tv[0]) / a, (du[1] - b * tv[1]) / a]
}

/// The transversal direction along the interface; both sides produce the same
/// field, the left one is used.
pub fn transversal_vector<'a>(
    gluing: &'a GluingData,
    frame: &'a InterfaceFrame<'a>,
) -> impl Fn(f64) -> [f64; 2] + 'a {
    move |v| transversal_from(gluing, frame, Side::Left, v)
}

/// Classification verdict for one interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Linear alphas and quadratic beta reproduce the interface relation.
    AsG1,
    /// Polynomial patches, but no admissible linear data exists.
    NotAsG1,
    /// Rational patches whose data admits no linear fit; the linear-data
    /// theory does not cover them.
    OutsideFramework,
}

/// A geometry is only as good as its worst interface.
pub fn geometry_verdict(reports: &[AsG1Report]) -> Verdict {
    reports
        .iter()
        .map(|r| r.verdict)
        .max()
        .unwrap_or(Verdict::AsG1)
}

/// Outcome of [`classify_as_g1`], serializable for CLI reports.
#[derive(Debug, Clone, Serialize)]
pub struct AsG1Report {
    pub verdict: Verdict,
    pub is_as_g1: bool,
    /// Beta vanishes and the alphas are proportional; the interface is
    /// reparametrizable to plain C1.
    pub trivially_g1: bool,
    /// Singular-value ratio fell in the undecided band above `tol`.
    pub ambiguous: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Max sampled defect of the interface relation with the reported data.
    pub residual: f64,
    /// Linear coefficients `[c0, c1]` meaning `c0 + c1*v`; present when AS.
    pub alpha_left: Option<[f64; 2]>,
    pub alpha_right: Option<[f64; 2]>,
    pub beta_left: Option<[f64; 2]>,
    pub beta_right: Option<[f64; 2]>,
    /// Polynomial degree of the (normalized) alphas; -1 encodes zero. For a
    /// non-AS interface with an identity left patch these are the degrees of
    /// the exact data under the alpha_left = 1 normalization.
    pub p_alpha: Option<i32>,
    pub p_beta: Option<i32>,
    pub normalization: String,
    /// "homogeneous" or "physical"; physical is the fallback when the
    /// homogeneous surfaces do not even agree along the interface.
    pub data_source: &'static str,
    pub hom_c0_defect: f64,
}

/// Power-basis degree of `c0 + c1*v` relative to `scale`; -1 for zero.
fn line_degree(c: [f64; 2], scale: f64) -> i32 {
    if c[1].abs() > 1e-9 * scale {
        1
    } else if c[0].abs() > 1e-9 * scale {
        0
    } else {
        -1
    }
}

/// Minimal-norm split of a quadratic `c` into `a*e - b*d` with linear `d`,
/// `e`. Returns the lines and the solve residual; `None` when no split exists
/// (possible only for proportional `a`, `b` with `c` not divisible by them).
fn decompose_beta(a: [f64; 2], b: [f64; 2], c: [f64; 3]) -> Option<([f64; 2], [f64; 2], f64)> {
    let m = DMat::from_row_slice(
        3,
        4,
        &[
            -b[0], 0.0, a[0], 0.0, //
            -b[1], -b[0], a[1], a[0], //
            0.0, -b[1], 0.0, a[1],
        ],
    );
    let rhs = DVec::from_column_slice(&c);
    let svd = m.clone().svd(true, true);
    let x = svd.solve(&rhs, 1e-13).ok()?;
    let residual = (&m * &x - &rhs).amax();
    let scale = 1.0 + c.iter().fold(0.0f64, |s, &z| s.max(z.abs()));
    if residual > 1e-8 * scale {
        return None;
    }
    Some(([x[0], x[1]], [x[2], x[3]], residual))
}

fn sign_condition_holds(a: [f64; 2], b: [f64; 2]) -> bool {
    (0..=100).all(|k| {
        let v = k as f64 / 100.0;
        (a[0] + a[1] * v) * (b[0] + b[1] * v) > 0.0
    })
}

/// True when the left patch restricted to the frame is the identity map,
/// which pins the preferred normalization for reporting degrees.
fn left_patch_is_identity(frame: &InterfaceFrame) -> bool {
    let mut worst = 0.0f64;
    for i in 0..=4 {
        for j in 0..=4 {
            let u = -(i as f64) / 4.0;
            let v = j as f64 / 4.0;
            let p = frame.eval(Side::Left, u, v, 0).p;
            worst = worst.max((p[0] - u).abs()).max((p[1] - v).abs());
        }
    }
    worst <= 1e-12
}

/// Lowest polynomial degree that reproduces the samples within `tol`
/// (relative); -1 encodes the zero function, `None` no degree up to
/// `max_degree`.
fn detected_degree(samples: &[(f64, f64)], max_degree: usize, tol: f64) -> Option<i32> {
    let scale = samples.iter().fold(1.0f64, |s, &(_, y)| s.max(y.abs()));
    for d in 0..=max_degree {
        let n = samples.len();
        let mut m = DMat::zeros(n, d + 1);
        for (i, &(x, _)) in samples.iter().enumerate() {
            let mut pw = 1.0;
            for j in 0..=d {
                m[(i, j)] = pw;
                pw *= x;
            }
        }
        let rhs = DVec::from_iterator(n, samples.iter().map(|&(_, y)| y));
        let svd = m.clone().svd(true, true);
        let Ok(sol) = svd.solve(&rhs, 1e-13) else {
            continue;
        };
        if (&m * &sol - &rhs).amax() <= tol * scale {
            let mut deg = -1i32;
            for (j, &cj) in sol.iter().enumerate() {
                if cj.abs() > 1e-9 * scale {
                    deg = j as i32;
                }
            }
            return Some(deg);
        }
    }
    None
}

/// Decides whether the interface relation admits linear alphas and a
/// quadratic beta.
///
/// Samples the relation at `max(40, 4(2p+1))` points, two scalar equations
/// per point in the seven polynomial coefficients, and inspects the smallest
/// singular value relative to `tol`. A candidate must additionally satisfy
/// the sign condition and split its beta into per-side lines. Rational
/// interfaces whose data admits no such fit are reported as outside the
/// framework rather than merely non-AS.
pub fn classify_as_g1(frame: &InterfaceFrame, tol: f64) -> AsG1Report {
    let rational = frame.is_rational();
    let hom_c0_defect = if rational { frame.hom_c0_defect() } else { 0.0 };
    let use_hom = !rational || hom_c0_defect <= HOM_C0_TOL;
    let data_source = if use_hom { "homogeneous" } else { "physical" };
    let du = |side: Side, v: f64| {
        if use_hom {
            frame.hom_du(side, v)
        } else {
            frame.du(side, v)
        }
    };
    let tangent = |v: f64| {
        if use_hom {
            frame.hom_dv_f0(v)
        } else {
            frame.f0(v).dv
        }
    };

    let p = fit_layout(frame).degree;
    let m = 40usize.max(4 * (2 * p + 1));
    let mut a = DMat::zeros(2 * m, 7);
    for k in 0..m {
        let v = k as f64 / (m - 1) as f64;
        let l = du(Side::Left, v);
        let r = du(Side::Right, v);
        let t = tangent(v);
        for c in 0..2 {
            let row = 2 * k + c;
            a[(row, 0)] = -r[c];
            a[(row, 1)] = -v * r[c];
            a[(row, 2)] = l[c];
            a[(row, 3)] = v * l[c];
            a[(row, 4)] = t[c];
            a[(row, 5)] = v * t[c];
            a[(row, 6)] = v * v * t[c];
        }
    }
    let data_scale = a.amax();
    if data_scale > 0.0 {
        a.unscale_mut(data_scale);
    }

    let svd = a.clone().svd(false, true);
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");

    let null_basis: Vec<DVec> = (0..sv.len())
        .filter(|&i| sv[i] <= tol * sigma_max)
        .map(|i| v_t.row(i).transpose())
        .collect();
    let ambiguous = null_basis.is_empty()
        && sigma_min > tol * sigma_max
        && sigma_min <= AMBIGUITY_FACTOR * tol * sigma_max;

    // The null space can be fat (proportional alphas leave a free direction),
    // so prefer its projection of constant equal alphas, then fall back to
    // raw basis vectors and pairwise combinations.
    let mut candidates: Vec<DVec> = Vec::new();
    if !null_basis.is_empty() {
        let pref = DVec::from_column_slice(&[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let mut proj = DVec::zeros(7);
        for b in &null_basis {
            proj += b * b.dot(&pref);
        }
        if proj.norm() > 1e-6 {
            candidates.push(proj.normalize());
        }
        for b in &null_basis {
            candidates.push(b.clone());
        }
        for i in 0..null_basis.len() {
            for j in i + 1..null_basis.len() {
                candidates.push((&null_basis[i] + &null_basis[j]).normalize());
                candidates.push((&null_basis[i] - &null_basis[j]).normalize());
            }
        }
    }

    let identity_left = left_patch_is_identity(frame);
    let mut accepted: Option<(DVec, [f64; 2], [f64; 2], String)> = None;
    for cand in candidates {
        let mut x = cand;
        let alpha_l = [x[0], x[1]];
        let alpha_r = [x[2], x[3]];
        if !sign_condition_holds(alpha_l, alpha_r) {
            continue;
        }
        let normalization;
        if identity_left && x[1].abs() <= 1e-9 && x[0].abs() > 1e-6 {
            let s = 1.0 / x[0];
            x.scale_mut(s);
            normalization = "alpha_left = 1 (left patch is the identity)".to_string();
        } else {
            if x[2] + 0.5 * x[3] < 0.0 {
                x.neg_mut();
            }
            normalization = "unit coefficient norm, alpha_right(1/2) > 0".to_string();
        }
        let a_l = [x[0], x[1]];
        let a_r = [x[2], x[3]];
        let c = [x[4], x[5], x[6]];
        let Some((beta_l, beta_r, _)) = decompose_beta(a_l, a_r, c) else {
            continue;
        };
        accepted = Some((x, beta_l, beta_r, normalization));
        break;
    }

    let sampled_residual = |x: &DVec| {
        let mut worst = 0.0f64;
        for k in 0..200 {
            let v = k as f64 / 199.0;
            let l = du(Side::Left, v);
            let r = du(Side::Right, v);
            let t = tangent(v);
            let al = x[0] + x[1] * v;
            let ar = x[2] + x[3] * v;
            let b = x[4] + x[5] * v + x[6] * v * v;
            for cc in 0..2 {
                worst = worst.max((ar * l[cc] - al * r[cc] + b * t[cc]).abs());
            }
        }
        worst
    };

    if let Some((x, beta_l, beta_r, normalization)) = accepted {
        let nrm = x.norm().max(1.0);
        let c = [x[4], x[5], x[6]];
        let beta_zero = c.iter().all(|&z| z.abs() <= 1e-8 * nrm);
        let alphas_proportional = (x[0] * x[3] - x[1] * x[2]).abs() <= 1e-8 * nrm * nrm;
        let p_alpha = line_degree([x[0], x[1]], nrm).max(line_degree([x[2], x[3]], nrm));
        let p_beta = line_degree(beta_l, nrm).max(line_degree(beta_r, nrm));
        return AsG1Report {
            verdict: Verdict::AsG1,
            is_as_g1: true,
            trivially_g1: beta_zero && alphas_proportional,
            ambiguous: false,
            sigma_min,
            sigma_max,
            residual: sampled_residual(&x) * data_scale,
            alpha_left: Some([x[0], x[1]]),
            alpha_right: Some([x[2], x[3]]),
            beta_left: Some(beta_l),
            beta_right: Some(beta_r),
            p_alpha: Some(p_alpha),
            p_beta: Some(p_beta),
            normalization,
            data_source,
            hom_c0_defect,
        };
    }

    // No admissible linear data. For an identity left patch the exact data
    // itself is already normalized, so its degrees are still reportable.
    let (p_alpha, p_beta, normalization) = if use_hom && identity_left {
        match compute_gluing_data(frame) {
            Ok(data) => {
                let n = 80;
                let sample = |f: &SplineFunction1D, g: &SplineFunction1D| {
                    (0..n)
                        .map(|k| {
                            let v = k as f64 / (n - 1) as f64;
                            (v, f.eval(v, 0) / g.eval(v, 0))
                        })
                        .collect::<Vec<_>>()
                };
                let pa = detected_degree(&sample(&data.alpha_right, &data.alpha_left), 2 * p, 1e-8);
                let pb = detected_degree(&sample(&data.beta_right, &data.alpha_left), 2 * p, 1e-8);
                (pa, pb, "alpha_left = 1 (left patch is the identity)".to_string())
            }
            Err(_) => (None, None, "none (gluing data unavailable)".to_string()),
        }
    } else {
        (None, None, "none (no admissible linear data)".to_string())
    };

    let best = v_t
        .row(sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| {
            if s < acc.1 {
                (i, s)
            } else {
                acc
            }
        }).0)
        .transpose();
    AsG1Report {
        verdict: if rational {
            Verdict::OutsideFramework
        } else {
            Verdict::NotAsG1
        },
        is_as_g1: false,
        trivially_g1: false,
        ambiguous,
        sigma_min,
        sigma_max,
        residual: sampled_residual(&best) * data_scale,
        alpha_left: None,
        alpha_right: None,
        beta_left: None,
        beta_right: None,
        p_alpha,
        p_beta,
        normalization,
        data_source,
        hom_c0_defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{catalog, catalog_names, BoundaryEdge, Interface, MultiPatchGeometry, Patch};
    use crate::splines::SplineSpace2D;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame(geom: &MultiPatchGeometry, index: usize) -> InterfaceFrame<'_> {
        InterfaceFrame::new(geom, index).unwrap()
    }

    fn bilinear(corners: [[f64; 2]; 4]) -> Patch {
        let cps = corners.iter().map(|c| [c[0], c[1], 1.0]).collect();
        Patch::new(SplineSpace2D::square(1, 0, 1), cps)
    }

    fn max_over_v(n: usize, f: impl Fn(f64) -> f64) -> f64 {
        (0..n)
            .map(|k| f(k as f64 / (n - 1) as f64))
            .fold(0.0f64, f64::max)
    }

    #[test]
    fn identity_interface_has_constant_unit_data() {
        let geom = catalog("two_patch_identity").unwrap();
        let fr = frame(&geom, 0);
        let data = compute_gluing_data(&fr).unwrap();
        let worst = max_over_v(200, |v| {
            (data.alpha_left.eval(v, 0) - 1.0)
                .abs()
                .max((data.alpha_right.eval(v, 0) - 1.0).abs())
                .max(data.beta_bar.eval(v, 0).abs())
                .max(data.beta_left.eval(v, 0).abs())
                .max(data.beta_right.eval(v, 0).abs())
        });
        assert!(worst <= 1e-12, "worst deviation {worst:.3e}");
        for side in [Side::Left, Side::Right] {
            let worst = max_over_v(100, |v| {
                let d = transversal_from(&data, &fr, side, v);
                (d[0] - 1.0).abs().max(d[1].abs())
            });
            assert!(worst <= 1e-12, "transversal deviation {worst:.3e}");
        }
    }

    #[test]
    fn chevron_gluing_matches_hand_determinants() {
        let geom = catalog("chevron").unwrap();
        let fr = frame(&geom, 0);
        let data = compute_gluing_data(&fr).unwrap();
        let worst = max_over_v(200, |v| {
            (data.alpha_left.eval(v, 0) - 1.0)
                .abs()
                .max((data.alpha_right.eval(v, 0) - 1.0).abs())
                .max((data.beta_bar.eval(v, 0) - 2.0 * v).abs())
                .max((data.beta_left.eval(v, 0) + v).abs())
                .max((data.beta_right.eval(v, 0) - v).abs())
        });
        assert!(worst <= 1e-10, "worst deviation {worst:.3e}");
        // Both one-sided transversal fields reduce to the constant e1.
        for side in [Side::Left, Side::Right] {
            let worst = max_over_v(100, |v| {
                let d = transversal_from(&data, &fr, side, v);
                (d[0] - 1.0).abs().max(d[1].abs())
            });
            assert!(worst <= 1e-10, "transversal deviation {worst:.3e}");
        }
    }

    #[test]
    fn distorted_rectangle_gluing_is_normalized_with_quadratic_alpha() {
        let geom = catalog("distorted_rectangle").unwrap();
        let fr = frame(&geom, 0);
        let data = compute_gluing_data(&fr).unwrap();
        let worst = max_over_v(200, |v| {
            (data.alpha_left.eval(v, 0) - 1.0)
                .abs()
                .max((data.alpha_right.eval(v, 0) - (1.0 + 1.2 * v * (1.0 - v))).abs())
                .max(data.beta_bar.eval(v, 0).abs())
                .max(data.beta_left.eval(v, 0).abs())
                .max(data.beta_right.eval(v, 0).abs())
        });
        assert!(worst <= 1e-10, "worst deviation {worst:.3e}");
    }

    #[test]
    fn lshape_gluing_matches_hand_determinants() {
        let geom = catalog("lshape").unwrap();
        let fr = frame(&geom, 0);
        let data = compute_gluing_data(&fr).unwrap();
        let worst = max_over_v(200, |v| {
            (data.alpha_left.eval(v, 0) - (0.6 + 0.8 * v))
                .abs()
                .max((data.alpha_right.eval(v, 0) - (1.4 - 0.4 * v)).abs())
                .max((data.beta_bar.eval(v, 0) - (1.4 * v - 0.4 * v * v)).abs())
        });
        assert!(worst <= 1e-10, "worst deviation {worst:.3e}");
    }

    #[test]
    fn every_catalog_interface_satisfies_gluing_invariants() {
        for name in catalog_names() {
            let geom = catalog(name).unwrap();
            for index in 0..geom.interfaces.len() {
                let fr = frame(&geom, index);
                let data = compute_gluing_data(&fr)
                    .unwrap_or_else(|e| panic!("{name} interface {index}: {e}"));
                let g1 = data.g1_residual(&fr, 200);
                assert!(g1 <= 1e-10, "{name} interface {index}: residual {g1:.3e}");
                let split = data.beta_identity_residual(200);
                assert!(split <= 1e-10, "{name} interface {index}: split {split:.3e}");
                let margin = data.sign_condition_margin(100);
                assert!(margin > 0.0, "{name} interface {index}: margin {margin:.3e}");
                let agree = max_over_v(100, |v| {
                    let dl = transversal_from(&data, &fr, Side::Left, v);
                    let dr = transversal_from(&data, &fr, Side::Right, v);
                    (dl[0] - dr[0]).abs().max((dl[1] - dr[1]).abs())
                });
                assert!(agree <= 1e-10, "{name} interface {index}: sides disagree {agree:.3e}");
                // With the raw-determinant scale the transversal closes a unit
                // parallelogram with the tangent.
                let unit = max_over_v(100, |v| {
                    let d = transversal_from(&data, &fr, Side::Left, v);
                    (det2(d, fr.hom_dv_f0(v)) - 1.0).abs()
                });
                assert!(unit <= 1e-9, "{name} interface {index}: area defect {unit:.3e}");
                let field = transversal_vector(&data, &fr);
                let probe = field(0.5);
                assert_eq!(probe, transversal_from(&data, &fr, Side::Left, 0.5));
            }
        }
    }

    #[test]
    fn classification_matrix_over_catalog() {
        let as_g1_names = [
            "two_patch_identity",
            "chevron",
            "lshape",
            "triangle3",
            "rectangle4",
            "quarter_circle3",
            "smooth5",
        ];
        for name in as_g1_names {
            let geom = catalog(name).unwrap();
            for index in 0..geom.interfaces.len() {
                let report = classify_as_g1(&frame(&geom, index), DEFAULT_AS_TOL);
                assert_eq!(
                    report.verdict,
                    Verdict::AsG1,
                    "{name} interface {index}: {report:?}"
                );
                assert!(report.is_as_g1);
                assert!(!report.ambiguous);
                assert!(report.alpha_left.is_some() && report.beta_right.is_some());
                assert!(
                    report.residual <= 1e-8,
                    "{name} interface {index}: residual {:.3e}",
                    report.residual
                );
            }
        }

        let geom = catalog("two_patch_identity").unwrap();
        let report = classify_as_g1(&frame(&geom, 0), DEFAULT_AS_TOL);
        assert!(report.trivially_g1);
        let al = report.alpha_left.unwrap();
        assert!((al[0] - 1.0).abs() <= 1e-12 && al[1].abs() <= 1e-12, "{al:?}");
        assert_eq!(report.p_alpha, Some(0));
        assert_eq!(report.p_beta, Some(-1));

        let geom = catalog("distorted_rectangle").unwrap();
        let report = classify_as_g1(&frame(&geom, 0), DEFAULT_AS_TOL);
        assert_eq!(report.verdict, Verdict::NotAsG1);
        assert!(!report.is_as_g1 && !report.ambiguous);
        assert_eq!(report.p_alpha, Some(2), "{report:?}");
        assert_eq!(report.p_beta, Some(-1), "{report:?}");
        assert!(report.alpha_right.is_none());

        // The disk: the four hub-ring interfaces admit no linear data and the
        // patches are rational, so they land outside the framework; the
        // ring-ring diagonals happen to carry exact linear data. The geometry
        // as a whole is reported by its worst interface.
        let geom = catalog("circle5").unwrap();
        let reports: Vec<_> = (0..geom.interfaces.len())
            .map(|index| classify_as_g1(&frame(&geom, index), DEFAULT_AS_TOL))
            .collect();
        for (index, report) in reports.iter().take(4).enumerate() {
            assert_eq!(
                report.verdict,
                Verdict::OutsideFramework,
                "circle5 interface {index}: {report:?}"
            );
        }
        assert_eq!(geometry_verdict(&reports), Verdict::OutsideFramework);

        let geom = catalog("smooth5").unwrap();
        let reports: Vec<_> = (0..geom.interfaces.len())
            .map(|index| classify_as_g1(&frame(&geom, index), DEFAULT_AS_TOL))
            .collect();
        assert_eq!(geometry_verdict(&reports), Verdict::AsG1);
    }

    #[test]
    fn random_regular_bilinear_pairs_are_as_g1() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < 100 {
            attempts += 1;
            assert!(attempts < 2000, "rejection sampling stalled");
            let mut pt = |x0: f64, y0: f64| {
                [
                    x0 + rng.gen_range(-0.35..0.35),
                    y0 + rng.gen_range(-0.35..0.35),
                ]
            };
            let e0 = [0.0, 0.0];
            let e1 = pt(0.0, 1.0);
            let l0 = pt(-1.0, 0.0);
            let l1 = pt(-1.0, 1.0);
            let r0 = pt(1.0, 0.0);
            let r1 = pt(1.0, 1.0);
            let left = bilinear([l0, e0, l1, e1]);
            let right = bilinear([e0, r0, e1, r1]);
            let boundary = [
                (0, Edge::U0),
                (0, Edge::V0),
                (0, Edge::V1),
                (1, Edge::U1),
                (1, Edge::V0),
                (1, Edge::V1),
            ];
            let geom = MultiPatchGeometry {
                patches: vec![left, right],
                interfaces: vec![Interface {
                    a: (0, Edge::U1),
                    b: (1, Edge::U0),
                    flip: false,
                }],
                boundary: boundary
                    .iter()
                    .map(|&(patch, edge)| BoundaryEdge { patch, edge })
                    .collect(),
            };
            if geom.validate().is_err() {
                continue;
            }
            accepted += 1;
            let report = classify_as_g1(&frame(&geom, 0), DEFAULT_AS_TOL);
            assert!(
                report.is_as_g1,
                "regular bilinear pair {accepted} not AS: {report:?}"
            );
        }
    }

    #[test]
    fn recovered_data_stays_valid_under_positive_rescaling() {
        for name in ["chevron", "lshape"] {
            let geom = catalog(name).unwrap();
            let fr = frame(&geom, 0);
            let report = classify_as_g1(&fr, DEFAULT_AS_TOL);
            assert!(report.is_as_g1);
            let al = report.alpha_left.unwrap();
            let ar = report.alpha_right.unwrap();
            let bl = report.beta_left.unwrap();
            let br = report.beta_right.unwrap();
            let gamma = |v: f64| 1.0 + 0.3 * v;
            let worst = max_over_v(200, |v| {
                let g = gamma(v);
                let a = g * (al[0] + al[1] * v);
                let b = g * (ar[0] + ar[1] * v);
                let beta = g
                    * ((al[0] + al[1] * v) * (br[0] + br[1] * v)
                        - (ar[0] + ar[1] * v) * (bl[0] + bl[1] * v));
                let l = fr.hom_du(Side::Left, v);
                let r = fr.hom_du(Side::Right, v);
                let t = fr.hom_dv_f0(v);
                // Scaled beta must be rebuilt from the scaled alphas, hence
                // one factor of gamma only.
                let mut w = 0.0f64;
                for c in 0..2 {
                    w = w.max((b * l[c] - a * r[c] + beta * t[c]).abs());
                }
                w
            });
            assert!(worst <= 1e-9, "{name}: rescaled residual {worst:.3e}");
        }
    }

    #[test]
    fn ambiguity_band_is_flagged_not_decided() {
        let geom = catalog("distorted_rectangle").unwrap();
        let fr = frame(&geom, 0);
        let strict = classify_as_g1(&fr, DEFAULT_AS_TOL);
        let ratio = strict.sigma_min / strict.sigma_max;
        let report = classify_as_g1(&fr, ratio / 5.0);
        assert!(report.ambiguous, "{report:?}");
        assert!(!report.is_as_g1);
    }

    #[test]
    fn reports_serialize_to_json() {
        let geom = catalog("chevron").unwrap();
        let report = classify_as_g1(&frame(&geom, 0), DEFAULT_AS_TOL);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["verdict"], "as_g1");
        assert!(json["alpha_left"].is_array());

        let geom = catalog("distorted_rectangle").unwrap();
        let report = classify_as_g1(&frame(&geom, 0), DEFAULT_AS_TOL);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["verdict"], "not_as_g1");
        assert_eq!(json["p_alpha"], 2);
    }
}
