//! Canonical two-sided interface frames.
//!
//! An interface is reparametrized so the left patch lives on [-1,0]x[0,1],
//! the right patch on [0,1]x[0,1], and both agree along u = 0 with the
//! interface curve F0(v). The reparametrizations are compositions of the
//! edge collar maps with sign flips, so their Jacobians are constant and
//! entries are 0 or +-1.

use super::{Edge, GeometryError, Interface, Jet2, MultiPatchGeometry, Patch};
use crate::splines::Deriv2;

/// Frame side: left occupies u in [-1,0], right u in [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

pub struct InterfaceFrame<'g> {
    pub geom: &'g MultiPatchGeometry,
    pub interface: Interface,
    pub index: usize,
}

/// Push a scalar jet through an affine reparametrization with constant
/// Jacobian m = d(patch)/d(frame).
pub fn transform_scalar_jet(d: &Deriv2, m: [[f64; 2]; 2]) -> Deriv2 {
    Deriv2 {
        v: d.v,
        du: d.du * m[0][0] + d.dv * m[1][0],
        dv: d.du * m[0][1] + d.dv * m[1][1],
        duu: d.duu * m[0][0] * m[0][0]
            + 2.0 * d.duv * m[0][0] * m[1][0]
            + d.dvv * m[1][0] * m[1][0],
        duv: d.duu * m[0][0] * m[0][1]
            + d.duv * (m[0][0] * m[1][1] + m[1][0] * m[0][1])
            + d.dvv * m[1][0] * m[1][1],
        dvv: d.duu * m[0][1] * m[0][1]
            + 2.0 * d.duv * m[0][1] * m[1][1]
            + d.dvv * m[1][1] * m[1][1],
    }
}

fn transform_jet(j: &Jet2, m: [[f64; 2]; 2]) -> Jet2 {
    let mut out = Jet2::default();
    for c in 0..2 {
        let d = Deriv2 {
            v: j.p[c],
            du: j.du[c],
            dv: j.dv[c],
            duu: j.duu[c],
            duv: j.duv[c],
            dvv: j.dvv[c],
        };
        let t = transform_scalar_jet(&d, m);
        out.p[c] = t.v;
        out.du[c] = t.du;
        out.dv[c] = t.dv;
        out.duu[c] = t.duu;
        out.duv[c] = t.duv;
        out.dvv[c] = t.dvv;
    }
    out
}

/// 2x2 product a*b.
fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

impl<'g> InterfaceFrame<'g> {
    /// Build the frame and verify its C0 and regularity invariants.
    pub fn new(geom: &'g MultiPatchGeometry, index: usize) -> Result<Self, GeometryError> {
        let interface = geom.interfaces[index];
        let frame = InterfaceFrame {
            geom,
            interface,
            index,
        };
        let mut defect = 0.0f64;
        let mut min_tangent = f64::INFINITY;
        for k in 0..=50 {
            let v = k as f64 / 50.0;
            let l = frame.eval(Side::Left, 0.0, v, 1);
            let r = frame.eval(Side::Right, 0.0, v, 1);
            defect = defect
                .max(((l.p[0] - r.p[0]).powi(2) + (l.p[1] - r.p[1]).powi(2)).sqrt());
            min_tangent = min_tangent.min((r.dv[0].powi(2) + r.dv[1].powi(2)).sqrt());
        }
        if defect > 1e-10 {
            return Err(GeometryError::C0Mismatch {
                interface: index,
                defect,
            });
        }
        if min_tangent < 1e-12 {
            return Err(GeometryError::DegenerateInterface { interface: index });
        }
        Ok(frame)
    }

    pub fn patch(&self, side: Side) -> &'g Patch {
        match side {
            Side::Left => &self.geom.patches[self.interface.a.0],
            Side::Right => &self.geom.patches[self.interface.b.0],
        }
    }

    pub fn patch_index(&self, side: Side) -> usize {
        match side {
            Side::Left => self.interface.a.0,
            Side::Right => self.interface.b.0,
        }
    }

    pub fn edge(&self, side: Side) -> Edge {
        match side {
            Side::Left => self.interface.a.1,
            Side::Right => self.interface.b.1,
        }
    }

    /// Patch parameters for frame coordinates (left: u in [-1,0], right: [0,1]).
    /// The frame's v is side a's edge parameter; flip is compensated on b.
    pub fn patch_params(&self, side: Side, u: f64, v: f64) -> (f64, f64) {
        match side {
            Side::Left => self.interface.a.1.inward(-u, v),
            Side::Right => {
                let t = if self.interface.flip { 1.0 - v } else { v };
                self.interface.b.1.inward(u, t)
            }
        }
    }

    /// Constant Jacobian d(patch)/d(frame) for one side.
    pub fn param_jacobian(&self, side: Side) -> [[f64; 2]; 2] {
        let collar = self.edge(side).inward_jacobian();
        let pre = match side {
            // (s,t) = (-u, v) on the left, (u, v) or (u, 1-v) on the right.
            Side::Left => [[-1.0, 0.0], [0.0, 1.0]],
            Side::Right => {
                let tv = if self.interface.flip { -1.0 } else { 1.0 };
                [[1.0, 0.0], [0.0, tv]]
            }
        };
        mat_mul(collar, pre)
    }

    /// Physical jet in frame coordinates.
    pub fn eval(&self, side: Side, u: f64, v: f64, order: usize) -> Jet2 {
        let (pu, pv) = self.patch_params(side, u, v);
        let j = self.patch(side).eval(pu, pv, order);
        transform_jet(&j, self.param_jacobian(side))
    }

    /// Jet of one homogeneous component in frame coordinates.
    pub fn hom_eval(&self, side: Side, component: usize, u: f64, v: f64, order: usize) -> Deriv2 {
        let (pu, pv) = self.patch_params(side, u, v);
        let d = self.patch(side).hom_jet(component, pu, pv, order);
        transform_scalar_jet(&d, self.param_jacobian(side))
    }

    /// Interface curve F0 with derivatives in the frame's v.
    pub fn f0(&self, v: f64) -> Jet2 {
        self.eval(Side::Right, 0.0, v, 2)
    }

    /// Transversal derivative D_u F(0, v) of one side, physical coordinates.
    pub fn du(&self, side: Side, v: f64) -> [f64; 2] {
        let j = self.eval(side, 0.0, v, 1);
        j.du
    }

    /// Transversal derivative of the homogeneous projection (wx, wy).
    pub fn hom_du(&self, side: Side, v: f64) -> [f64; 2] {
        [
            self.hom_eval(side, 0, 0.0, v, 1).du,
            self.hom_eval(side, 1, 0.0, v, 1).du,
        ]
    }

    /// Tangent D_v of the homogeneous projection along the interface.
    pub fn hom_dv_f0(&self, v: f64) -> [f64; 2] {
        [
            self.hom_eval(Side::Right, 0, 0.0, v, 1).dv,
            self.hom_eval(Side::Right, 1, 0.0, v, 1).dv,
        ]
    }

    pub fn is_rational(&self) -> bool {
        self.patch(Side::Left).is_rational() || self.patch(Side::Right).is_rational()
    }

    /// Max mismatch of all three homogeneous components along u = 0. Rational
    /// interfaces whose dehomogenized maps agree can still fail this: the AS
    /// classification theory needs the homogeneous surfaces themselves to be C0.
    pub fn hom_c0_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for k in 0..=50 {
            let v = k as f64 / 50.0;
            for c in 0..3 {
                let l = self.hom_eval(Side::Left, c, 0.0, v, 0).v;
                let r = self.hom_eval(Side::Right, c, 0.0, v, 0).v;
                defect = defect.max((l - r).abs());
            }
        }
        defect
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_frame_has_straight_interface() {
        let geom = catalog("two_patch_identity").unwrap();
        let frame = InterfaceFrame::new(&geom, 0).unwrap();
        for k in 0..=10 {
            let v = k as f64 / 10.0;
            let f0 = frame.f0(v);
            assert_abs_diff_eq!(f0.p[0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(f0.p[1], v, epsilon = 1e-14);
            assert_abs_diff_eq!(frame.du(Side::Left, v)[0], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(frame.du(Side::Right, v)[0], 1.0, epsilon = 1e-14);
        }
        // Left side covers [-1,0] x [0,1].
        let l = frame.eval(Side::Left, -1.0, 0.25, 0);
        assert_abs_diff_eq!(l.p[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l.p[1], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn edge_reversed_storage_is_normalized_by_flip() {
        use crate::geometry::tests::bilinear;
        use crate::geometry::{BoundaryEdge, Interface};
        // Right patch stored with its v axis reversed; flip restores matching.
        let a = bilinear([[-1.0, 0.0], [0.0, 0.0], [-1.0, 1.0], [0.0, 1.0]]);
        let b = bilinear([[0.0, 1.0], [1.0, 1.0], [0.0, 0.0], [1.0, 0.0]]);
        let mut boundary = Vec::new();
        for (p, e) in [
            (0usize, Edge::U0),
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
                flip: true,
            }],
            boundary,
        };
        geom.validate().unwrap();
        let frame = InterfaceFrame::new(&geom, 0).unwrap();
        for k in 0..=10 {
            let v = k as f64 / 10.0;
            let f0 = frame.f0(v);
            assert_abs_diff_eq!(f0.p[0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(f0.p[1], v, epsilon = 1e-14);
        }
    }

    #[test]
    fn chevron_frame_interface_curve() {
        let geom = catalog("chevron").unwrap();
        let frame = InterfaceFrame::new(&geom, 0).unwrap();
        for k in 0..=10 {
            let v = k as f64 / 10.0;
            let f0 = frame.f0(v);
            assert_abs_diff_eq!(f0.p[0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(f0.p[1], v - 1.0, epsilon = 1e-14);
            // Left and right transversal derivatives of the chevron frame.
            let dl = frame.du(Side::Left, v);
            let dr = frame.du(Side::Right, v);
            assert_abs_diff_eq!(dl[0], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(dl[1], -v, epsilon = 1e-14);
            assert_abs_diff_eq!(dr[0], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(dr[1], v, epsilon = 1e-14);
        }
    }

    #[test]
    fn frame_jets_match_finite_differences_on_curved_patch() {
        let geom = catalog("smooth5").unwrap();
        for index in 0..geom.interfaces.len() {
            let frame = InterfaceFrame::new(&geom, index).unwrap();
            for side in [Side::Left, Side::Right] {
                let (u0, v0, h) = match side {
                    Side::Left => (-0.4, 0.6, 1e-5),
                    Side::Right => (0.4, 0.6, 1e-5),
                };
                let j = frame.eval(side, u0, v0, 2);
                for c in 0..2 {
                    let f = |u: f64, v: f64| frame.eval(side, u, v, 0).p[c];
                    let du = (f(u0 + h, v0) - f(u0 - h, v0)) / (2.0 * h);
                    let dv = (f(u0, v0 + h) - f(u0, v0 - h)) / (2.0 * h);
                    let duv = (f(u0 + h, v0 + h) - f(u0 + h, v0 - h) - f(u0 - h, v0 + h)
                        + f(u0 - h, v0 - h))
                        / (4.0 * h * h);
                    assert_abs_diff_eq!(j.du[c], du, epsilon = 1e-8);
                    assert_abs_diff_eq!(j.dv[c], dv, epsilon = 1e-8);
                    assert_abs_diff_eq!(j.duv[c], duv, epsilon = 1e-4);
                }
            }
        }
    }
}
