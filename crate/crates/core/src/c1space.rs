//! C0 and C1 isogeometric spaces on a multi-patch geometry.
//!
//! The C0 space V0 identifies coefficients along shared interface edges and
//! optionally removes the two outermost coefficient layers along the domain
//! boundary (clamped conditions). The C1 subspace V1 is extracted numerically:
//! a gradient-jump penalty matrix is assembled over the coupled coefficient
//! block around the interfaces and its null space spans the C1 functions.
//!
//! Fields on a rational patch are numerator splines over the patch weight
//! function, so merged coefficients stay continuous whenever the weights agree
//! along the shared edge. On polynomial patches this reduces to plain splines.

use crate::geometry::{
    BoundaryEdge, Edge, GeometryError, InterfaceFrame, Jet2, MultiPatchGeometry, Side,
};
use crate::gluing::{transversal_from, AsG1Report, GluingData};
use crate::linalg::{self, DMat, DVec, LinalgError, Spectrum};
use crate::quadrature::gauss_legendre;
use crate::splines::{Deriv2, SplineFunction1D, SplineSpace2D};
use thiserror::Error;

/// Interface weight functions may differ by at most this much along the shared
/// edge before coefficient identification stops producing continuous fields.
const WEIGHT_MATCH_TOL: f64 = 1e-8;

/// Loose relative eigenvalue cut of the penalty matrix selecting the candidate
/// null directions refined by the second split. Exact null vectors sit many
/// decades below this.
pub const DEFAULT_CANDIDATE_TOL: f64 = 1e-6;

/// Pointwise gradient-jump magnitude treated as zero by the second split; its
/// square times the total interface length cuts the candidate Gram spectrum.
const DEFECT_SPLIT: f64 = 1e-9;

/// Number of evaluation points used when the trace-pair sampling matrices are
/// built.
const TRACE_SAMPLES: usize = 200;

/// Relative singular-value cutoff for trace-pair rank decisions.
const TRACE_RANK_TOL: f64 = 1e-8;

/// A rank decision is flagged ambiguous when the singular values around the
/// cutoff are closer than this factor.
const TRACE_GAP_MIN: f64 = 1e2;

#[derive(Debug, Error)]
pub enum C1SpaceError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("interface {interface} weight functions differ along the edge (defect {defect:.3e})")]
    WeightMismatch { interface: usize, defect: f64 },
    #[error("need one gluing data set per interface: expected {expected}, got {got}")]
    GluingCount { expected: usize, got: usize },
    #[error("classification report carries no linear interface data")]
    MissingLinearData,
    #[error("linear interface data does not reproduce the interface relation (residual {0:.3e})")]
    DataMismatch(f64),
    #[error("trace pair spaces use different span counts ({g0} vs {g1})")]
    SpanMismatch { g0: usize, g1: usize },
}

/// How the domain boundary is treated when the space is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Keep every coefficient.
    Free,
    /// Zero the two outermost coefficient layers along each boundary edge,
    /// enforcing w = 0 and grad w . n = 0 exactly.
    Clamped,
}

/// C0-conforming tensor-product spline space over all patches of a geometry.
///
/// Raw coefficients are patch-major: patch pi owns the contiguous block
/// `pi * space.dim() ..`. Classes group raw coefficients identified across
/// interfaces; retained classes are the columns of the 0/1 scatter matrix N0.
#[derive(Debug, Clone)]
pub struct C0Space<'g> {
    pub geom: &'g MultiPatchGeometry,
    pub space: SplineSpace2D,
    pub bc: BoundaryCondition,
    pub raw_dim: usize,
    /// Number of retained columns (dim V0).
    pub dim: usize,
    class_of: Vec<usize>,
    pub col_of_class: Vec<Option<usize>>,
    pub class_of_col: Vec<usize>,
    /// Raw coefficient indices per class, ascending.
    pub members: Vec<Vec<usize>>,
    /// Per boundary edge: raw indices of the value layer and the derivative
    /// layer (the two layers a clamped space removes).
    pub boundary_layers: Vec<(BoundaryEdge, [Vec<usize>; 2])>,
}

/// Patch-local coefficient indices of the `layer`-th grid line parallel to an
/// edge, ordered by the edge parameter.
fn edge_layer(space: &SplineSpace2D, edge: Edge, layer: usize) -> Vec<usize> {
    let (du, dv) = (space.u.dim(), space.v.dim());
    match edge {
        Edge::U0 => (0..dv).map(|iv| space.index(layer, iv)).collect(),
        Edge::U1 => (0..dv).map(|iv| space.index(du - 1 - layer, iv)).collect(),
        Edge::V0 => (0..du).map(|iu| space.index(iu, layer)).collect(),
        Edge::V1 => (0..du).map(|iu| space.index(iu, dv - 1 - layer)).collect(),
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    // The smaller root wins so class numbering is reproducible.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Build the C0 space: one tensor-product spline space per patch, edge
/// coefficients identified across every interface, boundary layers removed
/// when `bc` is clamped.
pub fn build_c0_space(
    geom: &MultiPatchGeometry,
    degree: usize,
    regularity: usize,
    spans: usize,
    bc: BoundaryCondition,
) -> Result<C0Space<'_>, C1SpaceError> {
    let space = SplineSpace2D::square(degree, regularity, spans);
    for k in 0..geom.interfaces.len() {
        let frame = InterfaceFrame::new(geom, k)?;
        if frame.is_rational() {
            let defect = frame.hom_c0_defect();
            if defect > WEIGHT_MATCH_TOL {
                return Err(C1SpaceError::WeightMismatch {
                    interface: k,
                    defect,
                });
            }
        }
    }

    let pdim = space.dim();
    let raw_dim = pdim * geom.patches.len();
    let mut uf = UnionFind::new(raw_dim);
    for iface in &geom.interfaces {
        let ea = edge_layer(&space, iface.a.1, 0);
        let mut eb = edge_layer(&space, iface.b.1, 0);
        if iface.flip {
            eb.reverse();
        }
        for (&ra, &rb) in ea.iter().zip(&eb) {
            uf.union(iface.a.0 * pdim + ra, iface.b.0 * pdim + rb);
        }
    }

    let mut class_of = vec![usize::MAX; raw_dim];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for raw in 0..raw_dim {
        let root = uf.find(raw);
        if class_of[root] == usize::MAX {
            class_of[root] = members.len();
            members.push(Vec::new());
        }
        class_of[raw] = class_of[root];
        members[class_of[raw]].push(raw);
    }

    let mut boundary_layers = Vec::with_capacity(geom.boundary.len());
    for be in &geom.boundary {
        let layers = [0usize, 1].map(|layer| {
            edge_layer(&space, be.edge, layer)
                .into_iter()
                .map(|local| be.patch * pdim + local)
                .collect::<Vec<_>>()
        });
        boundary_layers.push((*be, layers));
    }

    let mut dropped = vec![false; members.len()];
    if bc == BoundaryCondition::Clamped {
        for (_, layers) in &boundary_layers {
            for &raw in layers.iter().flatten() {
                dropped[class_of[raw]] = true;
            }
        }
    }

    let mut col_of_class = vec![None; members.len()];
    let mut class_of_col = Vec::new();
    for (class, gone) in dropped.iter().enumerate() {
        if !gone {
            col_of_class[class] = Some(class_of_col.len());
            class_of_col.push(class);
        }
    }
    let dim = class_of_col.len();

    Ok(C0Space {
        geom,
        space,
        bc,
        raw_dim,
        dim,
        class_of,
        col_of_class,
        class_of_col,
        members,
        boundary_layers,
    })
}

impl<'g> C0Space<'g> {
    pub fn raw_index(&self, patch: usize, iu: usize, iv: usize) -> usize {
        patch * self.space.dim() + self.space.index(iu, iv)
    }

    /// Column of the retained class containing a raw coefficient; None when
    /// the class was removed by the boundary condition.
    pub fn col_of_raw(&self, raw: usize) -> Option<usize> {
        self.col_of_class[self.class_of[raw]]
    }

    /// Scatter retained-column values to the raw coefficient vector (x = N0 y).
    pub fn expand(&self, y: &DVec) -> Vec<f64> {
        assert_eq!(y.len(), self.dim);
        let mut raw = vec![0.0; self.raw_dim];
        for (col, &class) in self.class_of_col.iter().enumerate() {
            for &r in &self.members[class] {
                raw[r] = y[col];
            }
        }
        raw
    }

    /// Dense N0 (raw x dim). Intended for small spaces and tests.
    pub fn n0_dense(&self) -> DMat {
        let mut m = DMat::zeros(self.raw_dim, self.dim);
        for raw in 0..self.raw_dim {
            if let Some(col) = self.col_of_raw(raw) {
                m[(raw, col)] = 1.0;
            }
        }
        m
    }

    /// Parametric jet of the field on one patch given raw coefficients.
    /// Rational patches divide the numerator spline by the geometry weight.
    pub fn field_jet(&self, patch: usize, raw: &[f64], u: f64, v: f64, order: usize) -> Deriv2 {
        let pdim = self.space.dim();
        let block = &raw[patch * pdim..(patch + 1) * pdim];
        let num = self.space.eval_coeffs(block, u, v, order);
        let p = &self.geom.patches[patch];
        if p.is_rational() {
            let w = p.hom_jet(2, u, v, order);
            quotient_jet(&num, &w, order)
        } else {
            num
        }
    }
}

/// Jet of g / w from the jets of g and w (order <= 2).
pub(crate) fn quotient_jet(g: &Deriv2, w: &Deriv2, order: usize) -> Deriv2 {
    debug_assert!(w.v > 0.0, "weight must stay positive");
    let mut f = Deriv2 {
        v: g.v / w.v,
        ..Deriv2::default()
    };
    if order >= 1 {
        f.du = (g.du - f.v * w.du) / w.v;
        f.dv = (g.dv - f.v * w.dv) / w.v;
    }
    if order >= 2 {
        f.duu = (g.duu - 2.0 * f.du * w.du - f.v * w.duu) / w.v;
        f.duv = (g.duv - f.du * w.dv - f.dv * w.du - f.v * w.duv) / w.v;
        f.dvv = (g.dvv - 2.0 * f.dv * w.dv - f.v * w.dvv) / w.v;
    }
    f
}

/// Value, gradient and Hessian in physical coordinates of a parametric field
/// jet composed with the inverse patch map, from the patch jet at the same
/// parameter point.
pub fn physical_field(f: &Deriv2, geo: &Jet2) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let det = geo.du[0] * geo.dv[1] - geo.du[1] * geo.dv[0];
    // Rows of the inverse Jacobian transpose.
    let ix = [geo.dv[1] / det, -geo.du[1] / det];
    let iy = [-geo.dv[0] / det, geo.du[0] / det];
    let grad = [
        ix[0] * f.du + ix[1] * f.dv,
        iy[0] * f.du + iy[1] * f.dv,
    ];
    // Parametric Hessian of f minus the geometry curvature part.
    let h = [
        [
            f.duu - grad[0] * geo.duu[0] - grad[1] * geo.duu[1],
            f.duv - grad[0] * geo.duv[0] - grad[1] * geo.duv[1],
        ],
        [
            f.duv - grad[0] * geo.duv[0] - grad[1] * geo.duv[1],
            f.dvv - grad[0] * geo.dvv[0] - grad[1] * geo.dvv[1],
        ],
    ];
    // H = Jinv^T (hat H) Jinv, written out with the rows above.
    let mut hess = [[0.0f64; 2]; 2];
    let rows = [ix, iy];
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += rows[a][i] * h[i][j] * rows[b][j];
                }
            }
            hess[a][b] = s;
        }
    }
    (f.v, grad, hess)
}

/// One basis function active at an interface point, with everything later
/// consumers combine: value, physical gradient, and the field derivatives
/// along the frame directions.
struct LocalDof {
    pos: usize,
    value: f64,
    grad: [f64; 2],
    frame_du: f64,
    frame_dv: f64,
}

/// Active basis functions at interface parameter v seen from one side.
/// `pos` maps retained columns to output positions; columns mapped to
/// usize::MAX are skipped.
fn edge_local_dofs(
    space: &C0Space,
    frame: &InterfaceFrame,
    side: Side,
    v: f64,
    pos: &[usize],
) -> Vec<LocalDof> {
    let (pu, pv) = frame.patch_params(side, 0.0, v);
    let pi = frame.patch_index(side);
    let patch = &space.geom.patches[pi];
    let rational = patch.is_rational();
    let wj = if rational {
        patch.hom_jet(2, pu, pv, 1)
    } else {
        Deriv2 {
            v: 1.0,
            ..Deriv2::default()
        }
    };
    let geo = patch.eval(pu, pv, 1);
    let det = geo.du[0] * geo.dv[1] - geo.du[1] * geo.dv[0];
    let pjac = frame.param_jacobian(side);
    let (fu, bu) = space.space.u.eval_basis(pu, 1);
    let (fv, bv) = space.space.v.eval_basis(pv, 1);
    let pdim = space.space.dim();

    let mut out = Vec::with_capacity(bu[0].len() * bv[0].len());
    for (jv, &bv0) in bv[0].iter().enumerate() {
        for (ju, &bu0) in bu[0].iter().enumerate() {
            let raw = pi * pdim + space.space.index(fu + ju, fv + jv);
            let col = match space.col_of_raw(raw) {
                Some(c) => c,
                None => continue,
            };
            let p = pos[col];
            if p == usize::MAX {
                continue;
            }
            let n = bu0 * bv0;
            let nu = bu[1][ju] * bv0;
            let nv = bu0 * bv[1][jv];
            // Numerator over weight; plain spline when the weight is one.
            let value = n / wj.v;
            let gu = (nu - value * wj.du) / wj.v;
            let gv = (nv - value * wj.dv) / wj.v;
            let grad = [
                (geo.dv[1] * gu - geo.du[1] * gv) / det,
                (-geo.dv[0] * gu + geo.du[0] * gv) / det,
            ];
            out.push(LocalDof {
                pos: p,
                value,
                grad,
                frame_du: pjac[0][0] * gu + pjac[1][0] * gv,
                frame_dv: pjac[0][1] * gu + pjac[1][1] * gv,
            });
        }
    }
    out
}

/// Retained columns whose basis functions can have a nonzero value or
/// gradient on interface `index`: the two outermost layers on both sides.
fn interface_coupled_cols(space: &C0Space, index: usize) -> Vec<usize> {
    let iface = &space.geom.interfaces[index];
    let pdim = space.space.dim();
    let mut cols = Vec::new();
    for &(pi, edge) in [&iface.a, &iface.b] {
        for layer in 0..2 {
            for local in edge_layer(&space.space, edge, layer) {
                if let Some(col) = space.col_of_raw(pi * pdim + local) {
                    cols.push(col);
                }
            }
        }
    }
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// Union of the coupled columns over every interface, ascending.
pub fn coupled_columns(space: &C0Space) -> Vec<usize> {
    let mut cols = Vec::new();
    for k in 0..space.geom.interfaces.len() {
        cols.extend(interface_coupled_cols(space, k));
    }
    cols.sort_unstable();
    cols.dedup();
    cols
}

fn position_map(dim: usize, cols: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; dim];
    for (k, &c) in cols.iter().enumerate() {
        pos[c] = k;
    }
    pos
}

/// Rows of the gradient-jump factor B at the given interface parameters:
/// row k holds scale[k] * (grad_L - grad_R) . n over the listed columns.
/// With scale = sqrt of the quadrature weight times the arc measure,
/// B^T B is the penalty matrix.
fn gradient_jump_rows(
    space: &C0Space,
    frame: &InterfaceFrame,
    params: &[f64],
    scale: &[f64],
    pos: &[usize],
    ncols: usize,
) -> DMat {
    let mut rows = DMat::zeros(params.len(), ncols);
    for (k, &v) in params.iter().enumerate() {
        let tau = frame.f0(v).dv;
        let len = (tau[0] * tau[0] + tau[1] * tau[1]).sqrt();
        let n = [-tau[1] / len, tau[0] / len];
        for (side, sign) in [(Side::Left, 1.0), (Side::Right, -1.0)] {
            for d in edge_local_dofs(space, frame, side, v, pos) {
                rows[(k, d.pos)] += sign * scale[k] * (d.grad[0] * n[0] + d.grad[1] * n[1]);
            }
        }
    }
    rows
}

/// Rows of value jumps (left minus right) at the given interface parameters.
fn value_jump_rows(
    space: &C0Space,
    frame: &InterfaceFrame,
    params: &[f64],
    pos: &[usize],
    ncols: usize,
) -> DMat {
    let mut rows = DMat::zeros(params.len(), ncols);
    for (k, &v) in params.iter().enumerate() {
        for (side, sign) in [(Side::Left, 1.0), (Side::Right, -1.0)] {
            for d in edge_local_dofs(space, frame, side, v, pos) {
                rows[(k, d.pos)] += sign * d.value;
            }
        }
    }
    rows
}

/// Rows of the interface relation
/// alpha_R * D_u g_L - alpha_L * D_u g_R + beta_bar * D_v g0
/// evaluated with the given gluing data. Zero rows exactly characterize
/// fields whose gradient is continuous across the interface.
fn relation_rows(
    space: &C0Space,
    frame: &InterfaceFrame,
    gluing: &GluingData,
    params: &[f64],
    pos: &[usize],
    ncols: usize,
) -> DMat {
    let mut rows = DMat::zeros(params.len(), ncols);
    for (k, &v) in params.iter().enumerate() {
        let al = gluing.alpha_left.eval(v, 0);
        let ar = gluing.alpha_right.eval(v, 0);
        let bb = gluing.beta_bar.eval(v, 0);
        for d in edge_local_dofs(space, frame, Side::Left, v, pos) {
            // The trace derivative along the edge is taken from the left.
            rows[(k, d.pos)] += ar * d.frame_du + bb * d.frame_dv;
        }
        for d in edge_local_dofs(space, frame, Side::Right, v, pos) {
            rows[(k, d.pos)] -= al * d.frame_du;
        }
    }
    rows
}

/// Gauss points per knot span of the interface trace mesh and the square
/// roots of their arc-length-weighted quadrature weights.
///
/// The gradient jump of a patchwise field is rational along the interface:
/// Jacobian determinants (and weights) sit in the denominator. Its polynomial
/// numerator has span-wise degree at most p + 9q with q the geometry degree,
/// so that many points per span make "zero at every quadrature point" imply
/// "zero along the whole interface". Exactness of the null space needs that;
/// plain p + 1 points would admit spurious kinked functions.
fn interface_quadrature(space: &C0Space, frame: &InterfaceFrame) -> (Vec<f64>, Vec<f64>) {
    let run = match frame.edge(Side::Left) {
        Edge::U0 | Edge::U1 => space.space.v,
        Edge::V0 | Edge::V1 => space.space.u,
    };
    let spans = run.spans;
    let q = [Side::Left, Side::Right]
        .into_iter()
        .map(|s| {
            let sp = &frame.patch(s).space;
            sp.u.degree.max(sp.v.degree)
        })
        .max()
        .unwrap();
    let (nodes, weights) = gauss_legendre(space.space.u.degree + 9 * q + 2);
    let h = 1.0 / spans as f64;
    let mut params = Vec::with_capacity(spans * nodes.len());
    let mut scale = Vec::with_capacity(spans * nodes.len());
    for s in 0..spans {
        for (x, w) in nodes.iter().zip(&weights) {
            let v = (s as f64 + x) * h;
            let tau = frame.f0(v).dv;
            let len = (tau[0] * tau[0] + tau[1] * tau[1]).sqrt();
            params.push(v);
            scale.push((w * h * len).sqrt());
        }
    }
    (params, scale)
}

/// Gradient-jump penalty matrix of one interface over its coupled columns.
///
/// Entry (i, j) is the integral over the interface of the product of the
/// normal-gradient jumps of basis functions i and j. Returns the matrix and
/// the retained columns it is indexed by.
pub fn assemble_c1_matrix(
    space: &C0Space,
    interface: usize,
) -> Result<(DMat, Vec<usize>), C1SpaceError> {
    let frame = InterfaceFrame::new(space.geom, interface)?;
    let cols = interface_coupled_cols(space, interface);
    let pos = position_map(space.dim, &cols);
    let (params, scale) = interface_quadrature(space, &frame);
    let b = gradient_jump_rows(space, &frame, &params, &scale, &pos, cols.len());
    Ok((b.transpose() * &b, cols))
}

/// Unit-weight sample rows of the interface relation over the full coupled
/// block, stacked over all interfaces, oversampled so the row count exceeds
/// the column count.
///
/// The row matrix has the C1 functions as its exact kernel (zero relation is
/// equivalent to zero gradient jump), and its singular spectrum separates
/// far better than the eigenvalues of any assembled Gram: kernel singular
/// values sit at the round-off floor of the matrix norm instead of at its
/// square, and the unscaled parametric derivatives in the relation keep the
/// nonzero singular values bounded away from zero under refinement. Reported
/// constraint spectra are built from this matrix.
pub fn relation_sample_rows(
    space: &C0Space,
    gluings: &[GluingData],
) -> Result<DMat, C1SpaceError> {
    let n_ifaces = space.geom.interfaces.len();
    if gluings.len() != n_ifaces {
        return Err(C1SpaceError::GluingCount {
            expected: n_ifaces,
            got: gluings.len(),
        });
    }
    let coupled = coupled_columns(space);
    let pos = position_map(space.dim, &coupled);
    let mut blocks = Vec::with_capacity(n_ifaces);
    let mut rows = 0;
    for index in 0..n_ifaces {
        let frame = InterfaceFrame::new(space.geom, index)?;
        let run = match frame.edge(Side::Left) {
            Edge::U0 | Edge::U1 => space.space.v,
            Edge::V0 | Edge::V1 => space.space.u,
        };
        let q = [Side::Left, Side::Right]
            .into_iter()
            .map(|s| {
                let sp = &frame.patch(s).space;
                sp.u.degree.max(sp.v.degree)
            })
            .max()
            .unwrap();
        // Four times the quadrature density keeps the stack overdetermined
        // for every degree/regularity combination.
        let per_span = 4 * (space.space.u.degree + 9 * q + 2);
        let h = 1.0 / run.spans as f64;
        let params: Vec<f64> = (0..run.spans)
            .flat_map(|s| {
                (0..per_span).map(move |j| (s as f64 + (j as f64 + 0.5) / per_span as f64) * h)
            })
            .collect();
        let b = relation_rows(space, &frame, &gluings[index], &params, &pos, coupled.len());
        rows += b.nrows();
        blocks.push(b);
    }
    let mut stacked = DMat::zeros(rows, coupled.len());
    let mut at = 0;
    for b in blocks {
        stacked.rows_mut(at, b.nrows()).copy_from(&b);
        at += b.nrows();
    }
    Ok(stacked)
}

/// C1 subspace of a C0 space, represented by a null-space basis over the
/// coupled coefficient block and the identity elsewhere.
#[derive(Debug, Clone)]
pub struct C1Basis {
    /// Retained columns forming the coupled block, ascending.
    pub coupled_cols: Vec<usize>,
    /// Orthonormal null-space basis of the penalty matrix over the coupled
    /// block. Selected in two stages: a loose relative eigenvalue cut keeps
    /// every candidate direction, then the jump Gram reassembled on that
    /// subspace is split at an absolute threshold. Nearly-C1 directions keep
    /// a pointwise jump orders of magnitude above the round-off floor even
    /// once their penalty eigenvalue has sunk below relative resolution, so
    /// the second split stays sharp under refinement.
    pub basis: DMat,
    /// Retained null directions, equals `basis.ncols()`.
    pub null_dim: usize,
    /// Spectrum of the penalty matrix over the coupled block, ascending.
    pub spectrum: Spectrum,
    /// Spectrum of the candidate jump Gram the final split is taken on.
    pub refined_spectrum: Spectrum,
    /// Eigenvalue ratio across the final split.
    pub gap_ratio: f64,
    /// Set when the final split lacks a trustworthy spectral gap.
    pub ambiguous: bool,
    pub dim_v1: usize,
    /// Worst value-jump, gradient-jump or interface-relation residual of the
    /// null-space columns over 100 uniform samples per interface.
    pub verification_defect: f64,
}

impl C1Basis {
    /// Columns of V0 outside the coupled block keep their meaning as V1 basis
    /// functions; this is their count.
    pub fn uncoupled_count(&self, space: &C0Space) -> usize {
        space.dim - self.coupled_cols.len()
    }

    /// V1 basis column j as a V0 coefficient vector. Uncoupled columns come
    /// first, then the null-space combinations of the coupled block.
    pub fn column_v0(&self, space: &C0Space, j: usize) -> DVec {
        let pos = position_map(space.dim, &self.coupled_cols);
        let mut y = DVec::zeros(space.dim);
        let unc = self.uncoupled_count(space);
        if j < unc {
            let mut seen = 0;
            for col in 0..space.dim {
                if pos[col] == usize::MAX {
                    if seen == j {
                        y[col] = 1.0;
                        return y;
                    }
                    seen += 1;
                }
            }
            unreachable!("uncoupled column index out of range");
        }
        let k = j - unc;
        assert!(k < self.null_dim, "basis column index out of range");
        for (p, &col) in self.coupled_cols.iter().enumerate() {
            y[col] = self.basis[(p, k)];
        }
        y
    }
}

/// Assemble the summed penalty matrix, extract its null space over the
/// coupled block and verify the resulting basis pointwise.
///
/// `gluings` must hold one entry per interface; they feed the relation form
/// of the verification on polynomial interfaces. An ambiguous spectral gap is
/// reported through the returned basis, not as an error.
pub fn build_c1_basis(
    space: &C0Space,
    gluings: &[GluingData],
) -> Result<C1Basis, C1SpaceError> {
    build_c1_basis_with(space, gluings, DEFAULT_CANDIDATE_TOL)
}

/// Same construction with an explicit relative eigenvalue cut for the
/// candidate stage of null-space selection.
pub fn build_c1_basis_with(
    space: &C0Space,
    gluings: &[GluingData],
    candidate_tol: f64,
) -> Result<C1Basis, C1SpaceError> {
    let n_ifaces = space.geom.interfaces.len();
    if gluings.len() != n_ifaces {
        return Err(C1SpaceError::GluingCount {
            expected: n_ifaces,
            got: gluings.len(),
        });
    }
    let coupled = coupled_columns(space);
    let pos = position_map(space.dim, &coupled);
    let mut k = DMat::zeros(coupled.len(), coupled.len());
    let mut frames = Vec::with_capacity(n_ifaces);
    let mut factors = Vec::with_capacity(n_ifaces);
    let mut total_len = 0.0f64;
    for index in 0..n_ifaces {
        let frame = InterfaceFrame::new(space.geom, index)?;
        let (params, scale) = interface_quadrature(space, &frame);
        let b = gradient_jump_rows(space, &frame, &params, &scale, &pos, coupled.len());
        k += b.transpose() * &b;
        total_len += scale.iter().map(|s| s * s).sum::<f64>();
        frames.push(frame);
        factors.push(b);
    }
    let candidates = linalg::nullspace(&k, candidate_tol)?;

    // Second split. The Gram of the jump factors restricted to the candidate
    // subspace is assembled fresh, so its entries are accurate relative to
    // their own tiny size instead of carrying the full matrix's round-off.
    let mut gram = DMat::zeros(candidates.dim, candidates.dim);
    for b in &factors {
        let m = b * &candidates.basis;
        gram += m.transpose() * &m;
    }
    let cut = DEFECT_SPLIT * DEFECT_SPLIT * total_len.max(f64::MIN_POSITIVE);
    let refined = linalg::nullspace_below(&gram, cut)?;
    let basis = &candidates.basis * &refined.basis;

    // The uncoupled columns vanish near every interface, so only the
    // null-space columns need a pointwise check.
    let samples: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
    let mut defect = 0.0f64;
    if basis.ncols() > 0 {
        for (frame, gluing) in frames.iter().zip(gluings) {
            let vals = value_jump_rows(space, frame, &samples, &pos, coupled.len());
            let ones = vec![1.0; samples.len()];
            let grads = gradient_jump_rows(space, frame, &samples, &ones, &pos, coupled.len());
            defect = defect.max((vals * &basis).amax());
            defect = defect.max((grads * &basis).amax());
            if !frame.is_rational() {
                let rel = relation_rows(space, frame, gluing, &samples, &pos, coupled.len());
                defect = defect.max((rel * &basis).amax());
            }
        }
    }

    let dim_v1 = space.dim - coupled.len() + refined.dim;
    Ok(C1Basis {
        coupled_cols: coupled,
        basis,
        null_dim: refined.dim,
        spectrum: candidates.spectrum,
        refined_spectrum: refined.spectrum,
        gap_ratio: refined.gap_ratio,
        ambiguous: refined.ambiguous,
        dim_v1,
        verification_defect: defect,
    })
}

/// Worst value-jump and gradient-jump of the null-space columns at caller
/// supplied interface parameters, over all interfaces.
pub fn c1_defect(space: &C0Space, basis: &C1Basis, samples: &[f64]) -> Result<f64, C1SpaceError> {
    let pos = position_map(space.dim, &basis.coupled_cols);
    let ncols = basis.coupled_cols.len();
    let mut defect = 0.0f64;
    if basis.null_dim == 0 {
        return Ok(defect);
    }
    for index in 0..space.geom.interfaces.len() {
        let frame = InterfaceFrame::new(space.geom, index)?;
        let vals = value_jump_rows(space, &frame, samples, &pos, ncols);
        let ones = vec![1.0; samples.len()];
        let grads = gradient_jump_rows(space, &frame, samples, &ones, &pos, ncols);
        defect = defect.max((vals * &basis.basis).amax());
        defect = defect.max((grads * &basis.basis).amax());
    }
    Ok(defect)
}

/// Trace and transversal derivative of a C1 function along an interface.
#[derive(Debug, Clone)]
pub struct TracePair {
    pub g0: SplineFunction1D,
    pub g1: SplineFunction1D,
}

/// Dimensions of the maximal trace components along one interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceDims {
    /// Dimension of { g0 : the pair (g0, 0) is a V1 trace }.
    pub g0: usize,
    /// Dimension of { g1 : the pair (0, g1) is a V1 trace }.
    pub g1: usize,
    /// Set when a singular-value gap near the rank cutoff is too small to
    /// trust the counts.
    pub ambiguous: bool,
}

fn singular_rank(m: &DMat, rel: f64) -> (usize, bool) {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    if smax <= 0.0 {
        return (0, false);
    }
    let cut = rel * smax;
    let mut kept_min = f64::INFINITY;
    let mut dropped_max = 0.0f64;
    let mut rank = 0;
    for &s in sv.iter() {
        if s > cut {
            rank += 1;
            kept_min = kept_min.min(s);
        } else {
            dropped_max = dropped_max.max(s);
        }
    }
    let ambiguous = dropped_max > 0.0 && kept_min / dropped_max < TRACE_GAP_MIN;
    (rank, ambiguous)
}

/// Project the rows of `m` onto the orthogonal complement of the row space
/// of `zero_set`, then count the surviving rank.
fn intersected_rank(m: &DMat, zero_set: &DMat, rel: f64) -> (usize, bool) {
    let svd = zero_set.clone().svd(false, true);
    let vt = svd.v_t.expect("svd requested v_t");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let cut = rel * smax;
    let mut proj = m.clone();
    for (i, &s) in sv.iter().enumerate() {
        if smax > 0.0 && s > cut {
            let row = vt.row(i);
            // proj -= (proj row^T) row, one rank-one sweep per kept row.
            let coeff = &proj * row.transpose();
            for r in 0..proj.nrows() {
                for c in 0..proj.ncols() {
                    proj[(r, c)] -= coeff[r] * row[c];
                }
            }
        }
    }
    let scale = m.amax();
    if scale > 0.0 && proj.amax() <= 1e-12 * scale {
        return (0, false);
    }
    singular_rank(&proj, rel)
}

/// Dimensions of the maximal trace components G0 and G1 of the numerical C1
/// space along one interface.
///
/// Both components are sampled from the null-space columns: the trace as the
/// side average of the field values, the transversal derivative as the
/// average physical gradient dotted with the transversal direction of the
/// gluing data. Each component is intersected with the zero set of the other
/// through singular value decompositions with a relative cutoff of 1e-8.
pub fn trace_component_dims(
    space: &C0Space,
    basis: &C1Basis,
    frame: &InterfaceFrame,
    gluing: &GluingData,
) -> TraceDims {
    if basis.null_dim == 0 {
        return TraceDims {
            g0: 0,
            g1: 0,
            ambiguous: false,
        };
    }
    let pos = position_map(space.dim, &basis.coupled_cols);
    let ncols = basis.coupled_cols.len();
    let mut r0 = DMat::zeros(TRACE_SAMPLES, ncols);
    let mut r1 = DMat::zeros(TRACE_SAMPLES, ncols);
    for k in 0..TRACE_SAMPLES {
        let v = (k as f64 + 0.5) / TRACE_SAMPLES as f64;
        let d = transversal_from(gluing, frame, Side::Left, v);
        for side in [Side::Left, Side::Right] {
            for dof in edge_local_dofs(space, frame, side, v, &pos) {
                r0[(k, dof.pos)] += 0.5 * dof.value;
                r1[(k, dof.pos)] += 0.5 * (dof.grad[0] * d[0] + dof.grad[1] * d[1]);
            }
        }
    }
    let t0 = r0 * &basis.basis;
    let t1 = r1 * &basis.basis;
    let (g0, a0) = intersected_rank(&t0, &t1, TRACE_RANK_TOL);
    let (g1, a1) = intersected_rank(&t1, &t0, TRACE_RANK_TOL);
    TraceDims {
        g0,
        g1,
        ambiguous: a0 || a1,
    }
}

fn line(c: Option<[f64; 2]>) -> Result<[f64; 2], C1SpaceError> {
    c.ok_or(C1SpaceError::MissingLinearData)
}

/// Check that a trace pair extends to a patchwise spline that is C1 across
/// the interface: build the explicit first-layer extension
/// g(u, v) = g0(v) + (beta(v) g0'(v) + alpha(v) g1(v)) u on both sides, test
/// membership in the degree/regularity tensor space by interpolation, and
/// test the interface relation of the extension. Returns false when either
/// test fails; that signals data outside the linear framework or a
/// regularity too high for the pair.
pub fn verify_trace_inclusion(
    frame: &InterfaceFrame,
    report: &AsG1Report,
    degree: usize,
    regularity: usize,
    pair: &TracePair,
) -> Result<bool, C1SpaceError> {
    let al = line(report.alpha_left)?;
    let ar = line(report.alpha_right)?;
    let bl = line(report.beta_left)?;
    let br = line(report.beta_right)?;
    let evl = |c: [f64; 2], v: f64| c[0] + c[1] * v;
    // beta_bar = alpha_L beta_R - alpha_R beta_L, the tangential factor of
    // the interface relation.
    let bb = |v: f64| evl(al, v) * evl(br, v) - evl(ar, v) * evl(bl, v);

    // The data must reproduce the interface relation of this frame.
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..101 {
        let v = k as f64 / 100.0;
        let dl = frame.hom_du(Side::Left, v);
        let dr = frame.hom_du(Side::Right, v);
        let t = frame.hom_dv_f0(v);
        for c in 0..2 {
            let r = evl(ar, v) * dl[c] - evl(al, v) * dr[c] + bb(v) * t[c];
            residual = residual.max(r.abs());
            scale = scale.max(dl[c].abs()).max(dr[c].abs()).max(t[c].abs());
        }
    }
    if residual > 1e-6 * scale.max(1.0) {
        return Err(C1SpaceError::DataMismatch(residual));
    }

    if pair.g0.space.spans != pair.g1.space.spans {
        return Err(C1SpaceError::SpanMismatch {
            g0: pair.g0.space.spans,
            g1: pair.g1.space.spans,
        });
    }
    let spans = pair.g0.space.spans;
    let target = SplineSpace2D::square(degree, regularity, spans);

    // Frame u runs away from the interface on the right and toward it on the
    // left; both sides are checked on [0, 1] with s the distance from the
    // interface.
    for (side, a, b) in [(Side::Left, al, bl), (Side::Right, ar, br)] {
        let sign = match side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        let g = |s: f64, v: f64| {
            pair.g0.eval(v, 0)
                + (evl(b, v) * pair.g0.eval(v, 1) + evl(a, v) * pair.g1.eval(v, 0)) * sign * s
        };
        let interp = match target.interpolate(|s, v| g(s, v)) {
            Ok(f) => f,
            Err(_) => return Ok(false),
        };
        let m = 3 * target.u.dim() + 7;
        let mut err = 0.0f64;
        let mut mag = 0.0f64;
        for i in 0..=m {
            for j in 0..=m {
                let (s, v) = (i as f64 / m as f64, j as f64 / m as f64);
                let want = g(s, v);
                err = err.max((interp.eval(s, v, 0).v - want).abs());
                mag = mag.max(want.abs());
            }
        }
        if err > 1e-10 * mag.max(1.0) {
            return Ok(false);
        }
    }

    // Relation residual of the extension: D_u g at u = 0 from both sides.
    let mut rel = 0.0f64;
    let mut mag = 0.0f64;
    for k in 0..TRACE_SAMPLES {
        let v = (k as f64 + 0.5) / TRACE_SAMPLES as f64;
        let dul = evl(bl, v) * pair.g0.eval(v, 1) + evl(al, v) * pair.g1.eval(v, 0);
        let dur = evl(br, v) * pair.g0.eval(v, 1) + evl(ar, v) * pair.g1.eval(v, 0);
        let r = evl(ar, v) * dul - evl(al, v) * dur + bb(v) * pair.g0.eval(v, 1);
        rel = rel.max(r.abs());
        mag = mag.max(dul.abs()).max(dur.abs());
    }
    Ok(rel <= 1e-10 * mag.max(1.0))
}
