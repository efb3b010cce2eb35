//! Planar multi-patch geometry in homogeneous coordinates.
//!
//! Every patch stores homogeneous control points (w·x, w·y, w); w ≡ 1 marks a
//! polynomial patch. Patches are glued C0 along whole edges (no hanging
//! nodes); each patch edge is either boundary or belongs to exactly one
//! interface.

mod catalog;
mod frame;
mod io;

pub use catalog::{catalog, catalog_names};
pub use frame::{InterfaceFrame, Side};
pub use io::{load_geometry, save_geometry};

use crate::splines::{Deriv2, SplineSpace2D};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("patch {patch}: nonpositive weight {w} at (u,v)=({u},{v})")]
    NonpositiveWeight { patch: usize, u: f64, v: f64, w: f64 },
    #[error("patch {patch}: Jacobian determinant changes sign or vanishes on sample grid")]
    SingularPatch { patch: usize },
    #[error("interface {interface}: edges mismatch by {defect:.3e} (not C0)")]
    C0Mismatch { interface: usize, defect: f64 },
    #[error("interface {interface}: degenerate (interface curve has zero tangent)")]
    DegenerateInterface { interface: usize },
    #[error("patch {patch} edge {edge:?} appears {count} times across interfaces and boundary")]
    EdgeBookkeeping { patch: usize, edge: Edge, count: usize },
    #[error("interface {interface}: patch index out of range")]
    BadPatchIndex { interface: usize },
    #[error("unknown catalog geometry '{0}'")]
    UnknownName(String),
    #[error("geometry file: {0}")]
    File(String),
}

/// One of the four edges of the parameter square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    U0,
    U1,
    V0,
    V1,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::U0, Edge::U1, Edge::V0, Edge::V1];

    pub fn to_index(self) -> u8 {
        match self {
            Edge::U0 => 0,
            Edge::U1 => 1,
            Edge::V0 => 2,
            Edge::V1 => 3,
        }
    }

    pub fn from_index(i: u8) -> Option<Edge> {
        Edge::ALL.get(i as usize).copied()
    }

    /// Point on the edge at edge parameter t.
    pub fn param(self, t: f64) -> (f64, f64) {
        match self {
            Edge::U0 => (0.0, t),
            Edge::U1 => (1.0, t),
            Edge::V0 => (t, 0.0),
            Edge::V1 => (t, 1.0),
        }
    }

    /// Inward collar map: (s, t) ↦ patch coordinates, with s = 0 on the edge,
    /// s increasing into the patch, t the edge parameter.
    pub fn inward(self, s: f64, t: f64) -> (f64, f64) {
        match self {
            Edge::U0 => (s, t),
            Edge::U1 => (1.0 - s, t),
            Edge::V0 => (t, s),
            Edge::V1 => (t, 1.0 - s),
        }
    }

    /// Jacobian d(patch)/d(s,t) of `inward`; entries are 0 or ±1.
    pub fn inward_jacobian(self) -> [[f64; 2]; 2] {
        match self {
            Edge::U0 => [[1.0, 0.0], [0.0, 1.0]],
            Edge::U1 => [[-1.0, 0.0], [0.0, 1.0]],
            Edge::V0 => [[0.0, 1.0], [1.0, 0.0]],
            Edge::V1 => [[0.0, 1.0], [-1.0, 0.0]],
        }
    }
}

/// Second-order jet of a planar map at a parameter point.
#[derive(Debug, Clone, Copy, Default)]
pub struct Jet2 {
    pub p: [f64; 2],
    pub du: [f64; 2],
    pub dv: [f64; 2],
    pub duu: [f64; 2],
    pub duv: [f64; 2],
    pub dvv: [f64; 2],
}

impl Jet2 {
    pub fn jacobian_det(&self) -> f64 {
        self.du[0] * self.dv[1] - self.du[1] * self.dv[0]
    }
}

/// Tensor-product patch with homogeneous control points, v-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub space: SplineSpace2D,
    pub cps: Vec<[f64; 3]>,
}

impl Patch {
    pub fn new(space: SplineSpace2D, cps: Vec<[f64; 3]>) -> Self {
        assert_eq!(cps.len(), space.dim(), "control net size mismatch");
        Patch { space, cps }
    }

    /// True when any weight deviates from 1.
    pub fn is_rational(&self) -> bool {
        self.cps.iter().any(|c| (c[2] - 1.0).abs() > 1e-12)
    }

    /// Jet of one homogeneous component (0 = wx, 1 = wy, 2 = w).
    pub fn hom_jet(&self, component: usize, u: f64, v: f64, order: usize) -> Deriv2 {
        let coeffs: Vec<f64> = self.cps.iter().map(|c| c[component]).collect();
        self.space.eval_coeffs(&coeffs, u, v, order)
    }

    /// Physical point and derivatives via the quotient rule.
    pub fn eval(&self, u: f64, v: f64, order: usize) -> Jet2 {
        let jx = self.hom_jet(0, u, v, order);
        let jy = self.hom_jet(1, u, v, order);
        let jw = self.hom_jet(2, u, v, order);
        assert!(jw.v > 0.0, "nonpositive weight {} at ({u},{v})", jw.v);
        let mut out = Jet2::default();
        for (c, a) in [jx, jy].iter().enumerate() {
            let w = &jw;
            let f = a.v / w.v;
            out.p[c] = f;
            if order >= 1 {
                out.du[c] = (a.du - f * w.du) / w.v;
                out.dv[c] = (a.dv - f * w.dv) / w.v;
            }
            if order >= 2 {
                out.duu[c] = (a.duu - 2.0 * out.du[c] * w.du - f * w.duu) / w.v;
                out.duv[c] =
                    (a.duv - out.du[c] * w.dv - out.dv[c] * w.du - f * w.duv) / w.v;
                out.dvv[c] = (a.dvv - 2.0 * out.dv[c] * w.dv - f * w.dvv) / w.v;
            }
        }
        out
    }

    pub fn corner(&self, u: f64, v: f64) -> [f64; 2] {
        self.eval(u, v, 0).p
    }
}

/// Oriented interface: side `a` plays the left role in the canonical frame,
/// side `b` the right. `flip` reverses b's edge parameter relative to a's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub a: (usize, Edge),
    pub b: (usize, Edge),
    pub flip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub patch: usize,
    pub edge: Edge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPatchGeometry {
    pub patches: Vec<Patch>,
    pub interfaces: Vec<Interface>,
    pub boundary: Vec<BoundaryEdge>,
}

impl MultiPatchGeometry {
    /// Full well-formedness check; every constructor and loader runs this.
    pub fn validate(&self) -> Result<(), GeometryError> {
        const GRID: usize = 20;
        for (pi, patch) in self.patches.iter().enumerate() {
            let mut sign = 0.0f64;
            for i in 0..=GRID {
                for j in 0..=GRID {
                    let (u, v) = (i as f64 / GRID as f64, j as f64 / GRID as f64);
                    let w = patch.hom_jet(2, u, v, 0).v;
                    if w <= 0.0 {
                        return Err(GeometryError::NonpositiveWeight { patch: pi, u, v, w });
                    }
                    let det = patch.eval(u, v, 1).jacobian_det();
                    if det == 0.0 || (sign != 0.0 && det.signum() != sign) {
                        return Err(GeometryError::SingularPatch { patch: pi });
                    }
                    sign = det.signum();
                }
            }
        }

        let mut edge_count = vec![[0usize; 4]; self.patches.len()];
        let mut bump = |patch: usize, edge: Edge| {
            edge_count[patch][edge.to_index() as usize] += 1;
        };
        for (ii, itf) in self.interfaces.iter().enumerate() {
            if itf.a.0 >= self.patches.len() || itf.b.0 >= self.patches.len() {
                return Err(GeometryError::BadPatchIndex { interface: ii });
            }
            bump(itf.a.0, itf.a.1);
            bump(itf.b.0, itf.b.1);
        }
        for be in &self.boundary {
            if be.patch >= self.patches.len() {
                return Err(GeometryError::BadPatchIndex {
                    interface: usize::MAX,
                });
            }
            bump(be.patch, be.edge);
        }
        for (pi, counts) in edge_count.iter().enumerate() {
            for edge in Edge::ALL {
                let count = counts[edge.to_index() as usize];
                if count != 1 {
                    return Err(GeometryError::EdgeBookkeeping {
                        patch: pi,
                        edge,
                        count,
                    });
                }
            }
        }

        for ii in 0..self.interfaces.len() {
            self.check_interface_c0(ii, 1e-10)?;
        }
        Ok(())
    }

    /// Pointwise physical C0 match of an interface; tolerance is on positions.
    /// Sampled rather than control-point based so that patches of different
    /// degree may share an edge.
    pub(crate) fn check_interface_c0(
        &self,
        interface: usize,
        tol: f64,
    ) -> Result<(), GeometryError> {
        let itf = &self.interfaces[interface];
        let pa = &self.patches[itf.a.0];
        let pb = &self.patches[itf.b.0];
        let mut defect = 0.0f64;
        for k in 0..=50 {
            let t = k as f64 / 50.0;
            let tb = if itf.flip { 1.0 - t } else { t };
            let (ua, va) = itf.a.1.param(t);
            let (ub, vb) = itf.b.1.param(tb);
            let qa = pa.eval(ua, va, 0).p;
            let qb = pb.eval(ub, vb, 0).p;
            defect = defect.max(((qa[0] - qb[0]).powi(2) + (qa[1] - qb[1]).powi(2)).sqrt());
        }
        if defect > tol {
            return Err(GeometryError::C0Mismatch { interface, defect });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splines::SplineSpace2D;
    use approx::assert_abs_diff_eq;

    pub(crate) fn bilinear(corners: [[f64; 2]; 4]) -> Patch {
        let cps = corners.iter().map(|c| [c[0], c[1], 1.0]).collect();
        Patch::new(SplineSpace2D::square(1, 0, 1), cps)
    }

    #[test]
    fn identity_patch_has_identity_jacobian() {
        let p = bilinear([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        assert!(!p.is_rational());
        let j = p.eval(0.3, 0.8, 2);
        assert_abs_diff_eq!(j.p[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(j.p[1], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(j.du[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.du[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.dv[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.jacobian_det(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.duv[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rational_quarter_arc_lies_on_circle() {
        // Quadratic rational Bezier arc from (1,0) to (0,1), middle weight
        // cos(45 deg).
        let w = (2.0f64).sqrt() / 2.0;
        let u = crate::splines::SplineSpace1D::new(2, 1, 1);
        let v = crate::splines::SplineSpace1D::new(1, 0, 1);
        let space = SplineSpace2D::new(u, v);
        // Degenerate in v: same row twice (a ruled strip; only the u-edge matters).
        let row = [[1.0, 0.0, 1.0], [w, w, w], [0.0, 1.0, 1.0]];
        let mut cps = Vec::new();
        cps.extend_from_slice(&row);
        cps.extend(row.iter().map(|c| [c[0] * 2.0, c[1] * 2.0, c[2]]));
        let p = Patch::new(space, cps);
        assert!(p.is_rational());
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let q = p.eval(t, 0.0, 0).p;
            assert_abs_diff_eq!(q[0] * q[0] + q[1] * q[1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rational_derivatives_match_finite_differences() {
        let w = (2.0f64).sqrt() / 2.0;
        let space = SplineSpace2D::square(2, 1, 1);
        let cps = vec![
            [1.0, 0.0, 1.0],
            [w, w, w],
            [0.0, 1.0, 1.0],
            [1.5, 0.0, 1.0],
            [1.5 * w, 1.5 * w, w],
            [0.0, 1.5, 1.0],
            [2.0, 0.0, 1.0],
            [2.0 * w, 2.0 * w, w],
            [0.0, 2.0, 1.0],
        ];
        let p = Patch::new(space, cps);
        let (u0, v0, h) = (0.37, 0.52, 1e-5);
        let j = p.eval(u0, v0, 2);
        for c in 0..2 {
            let f = |u: f64, v: f64| p.eval(u, v, 0).p[c];
            let du = (f(u0 + h, v0) - f(u0 - h, v0)) / (2.0 * h);
            let dv = (f(u0, v0 + h) - f(u0, v0 - h)) / (2.0 * h);
            let duu = (f(u0 + h, v0) - 2.0 * f(u0, v0) + f(u0 - h, v0)) / (h * h);
            let dvv = (f(u0, v0 + h) - 2.0 * f(u0, v0) + f(u0, v0 - h)) / (h * h);
            let duv = (f(u0 + h, v0 + h) - f(u0 + h, v0 - h) - f(u0 - h, v0 + h)
                + f(u0 - h, v0 - h))
                / (4.0 * h * h);
            assert_abs_diff_eq!(j.du[c], du, epsilon = 1e-8);
            assert_abs_diff_eq!(j.dv[c], dv, epsilon = 1e-8);
            assert_abs_diff_eq!(j.duu[c], duu, epsilon = 1e-5);
            assert_abs_diff_eq!(j.dvv[c], dvv, epsilon = 1e-5);
            assert_abs_diff_eq!(j.duv[c], duv, epsilon = 1e-5);
        }
    }

    #[test]
    fn validation_rejects_folded_patch() {
        let good = bilinear([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let folded = bilinear([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let geom = MultiPatchGeometry {
            patches: vec![good, folded],
            interfaces: vec![Interface {
                a: (0, Edge::U1),
                b: (1, Edge::U0),
                flip: false,
            }],
            boundary: vec![],
        };
        assert!(matches!(
            geom.validate(),
            Err(GeometryError::SingularPatch { patch: 1 })
        ));
    }

    #[test]
    fn validation_rejects_mismatched_interface() {
        let a = bilinear([[-1.0, 0.0], [0.0, 0.0], [-1.0, 1.0], [0.0, 1.0]]);
        let b = bilinear([[0.1, 0.0], [1.0, 0.0], [0.1, 1.0], [1.0, 1.0]]);
        let mut boundary = Vec::new();
        for (p, e) in [
            (0, Edge::U0),
            (0, Edge::V0),
            (0, Edge::V1),
            (1, Edge::U1),
            (1, Edge::V0),
            (1, Edge::V1),
        ] {
            boundary.push(BoundaryEdge { patch: p, edge: e });
        }
        let geom = MultiPatchGeometry {
            patches: vec![a, b],
            interfaces: vec![Interface {
                a: (0, Edge::U1),
                b: (1, Edge::U0),
                flip: false,
            }],
            boundary,
        };
        assert!(matches!(
            geom.validate(),
            Err(GeometryError::C0Mismatch { interface: 0, .. })
        ));
    }

    #[test]
    fn validation_requires_every_edge_accounted_once() {
        let a = bilinear([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let geom = MultiPatchGeometry {
            patches: vec![a],
            interfaces: vec![],
            boundary: vec![BoundaryEdge {
                patch: 0,
                edge: Edge::U0,
            }],
        };
        assert!(matches!(
            geom.validate(),
            Err(GeometryError::EdgeBookkeeping { count: 0, .. })
        ));
    }
}
