//! Built-in geometry catalog.
//!
//! Corner coordinates below are this library's own choices and are the
//! reference documentation for them; tests elsewhere depend on the exact
//! numbers. All geometries validate (positive weights, regular patches,
//! C0 interfaces).

use super::{BoundaryEdge, Edge, GeometryError, Interface, MultiPatchGeometry, Patch};
use crate::splines::SplineSpace2D;

pub fn catalog_names() -> &'static [&'static str] {
    &[
        "two_patch_identity",
        "chevron",
        "lshape",
        "triangle3",
        "quarter_circle3",
        "rectangle4",
        "smooth5",
        "distorted_rectangle",
        "circle5",
    ]
}

/// Build a catalog geometry by name. The result always passes `validate`.
pub fn catalog(name: &str) -> Result<MultiPatchGeometry, GeometryError> {
    let geom = match name {
        "two_patch_identity" => two_patch_identity(),
        "chevron" => chevron(),
        "lshape" => lshape(),
        "triangle3" => triangle3(),
        "quarter_circle3" => quarter_circle3(),
        "rectangle4" => rectangle4(),
        "smooth5" => smooth5(),
        "distorted_rectangle" => distorted_rectangle(),
        "circle5" => circle5(),
        _ => return Err(GeometryError::UnknownName(name.to_string())),
    };
    geom.validate()?;
    Ok(geom)
}

fn bilinear(a00: [f64; 2], a10: [f64; 2], a01: [f64; 2], a11: [f64; 2]) -> Patch {
    let cps = [a00, a10, a01, a11]
        .iter()
        .map(|c| [c[0], c[1], 1.0])
        .collect();
    Patch::new(SplineSpace2D::square(1, 0, 1), cps)
}

/// Exact polynomial patch of the given degree from a closed-form map.
/// Both components must be polynomials of bidegree <= (degree, degree).
fn poly_patch(degree: usize, f: impl Fn(f64, f64) -> [f64; 2]) -> Patch {
    let space = SplineSpace2D::square(degree, degree - 1, 1);
    let fx = space.interpolate(|u, v| f(u, v)[0]).unwrap();
    let fy = space.interpolate(|u, v| f(u, v)[1]).unwrap();
    let cps = fx
        .coeffs
        .iter()
        .zip(&fy.coeffs)
        .map(|(&x, &y)| [x, y, 1.0])
        .collect();
    Patch::new(space, cps)
}

/// Exact rational patch from a closed-form homogeneous map (wx, wy, w).
fn hom_patch(degree: usize, f: impl Fn(f64, f64) -> [f64; 3]) -> Patch {
    let space = SplineSpace2D::square(degree, degree - 1, 1);
    let comp: Vec<_> = (0..3)
        .map(|c| space.interpolate(|u, v| f(u, v)[c]).unwrap())
        .collect();
    let cps = (0..space.dim())
        .map(|i| [comp[0].coeffs[i], comp[1].coeffs[i], comp[2].coeffs[i]])
        .collect();
    Patch::new(space, cps)
}

fn boundary(list: &[(usize, Edge)]) -> Vec<BoundaryEdge> {
    list.iter()
        .map(|&(patch, edge)| BoundaryEdge { patch, edge })
        .collect()
}

/// Two unit squares side by side, both identity maps; the interface gluing
/// is trivial (the union is a C1 parametrization of a rectangle).
fn two_patch_identity() -> MultiPatchGeometry {
    MultiPatchGeometry {
        patches: vec![
            bilinear([-1.0, 0.0], [0.0, 0.0], [-1.0, 1.0], [0.0, 1.0]),
            bilinear([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]),
        ],
        interfaces: vec![Interface {
            a: (0, Edge::U1),
            b: (1, Edge::U0),
            flip: false,
        }],
        boundary: boundary(&[
            (0, Edge::U0),
            (0, Edge::V0),
            (0, Edge::V1),
            (1, Edge::U1),
            (1, Edge::V0),
            (1, Edge::V1),
        ]),
    }
}

/// Arrow-shaped pair with a straight vertical interface and mirror-symmetric
/// patches. The frame maps are F(u,v) = (u, (v-1) -+ uv), giving equal
/// interface Jacobians on the two sides but a nonzero cross determinant:
/// the simplest nontrivially glued pair.
fn chevron() -> MultiPatchGeometry {
    MultiPatchGeometry {
        patches: vec![
            bilinear([-1.0, -1.0], [0.0, -1.0], [-1.0, 1.0], [0.0, 0.0]),
            bilinear([0.0, -1.0], [1.0, -1.0], [0.0, 0.0], [1.0, 1.0]),
        ],
        interfaces: vec![Interface {
            a: (0, Edge::U1),
            b: (1, Edge::U0),
            flip: false,
        }],
        boundary: boundary(&[
            (0, Edge::U0),
            (0, Edge::V0),
            (0, Edge::V1),
            (1, Edge::U1),
            (1, Edge::V0),
            (1, Edge::V1),
        ]),
    }
}

/// Pentagon with a reentrant corner at the origin, split into two convex
/// bilinear quads by the slanted segment from (-0.4,-1) to (0,0). The
/// off-center split makes the two interface Jacobians linearly independent
/// (0.6+0.8v vs 1.4-0.4v), unlike the symmetric split.
fn lshape() -> MultiPatchGeometry {
    MultiPatchGeometry {
        patches: vec![
            bilinear([-1.0, -1.0], [-0.4, -1.0], [-1.0, 1.0], [0.0, 0.0]),
            bilinear([-0.4, -1.0], [1.0, -1.0], [0.0, 0.0], [1.0, 0.0]),
        ],
        interfaces: vec![Interface {
            a: (0, Edge::U1),
            b: (1, Edge::U0),
            flip: false,
        }],
        boundary: boundary(&[
            (0, Edge::U0),
            (0, Edge::V0),
            (0, Edge::V1),
            (1, Edge::U1),
            (1, Edge::V0),
            (1, Edge::V1),
        ]),
    }
}

/// Fan of three quads around a center point inside a triangle: patch i has
/// corners (vertex_i, edge midpoint, opposite edge midpoint, center), glued
/// cyclically with interfaces (i, U1) - (i+1, V1).
fn fan3(corners: [[f64; 2]; 3], center: [f64; 2]) -> Vec<[[f64; 2]; 4]> {
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    (0..3)
        .map(|i| {
            let c = corners[i];
            let next = corners[(i + 1) % 3];
            let prev = corners[(i + 2) % 3];
            [c, mid(c, next), mid(prev, c), center]
        })
        .collect()
}

fn fan3_topology() -> (Vec<Interface>, Vec<BoundaryEdge>) {
    let interfaces = (0..3)
        .map(|i| Interface {
            a: (i, Edge::U1),
            b: ((i + 1) % 3, Edge::V1),
            flip: false,
        })
        .collect();
    let boundary = boundary(&[
        (0, Edge::U0),
        (0, Edge::V0),
        (1, Edge::U0),
        (1, Edge::V0),
        (2, Edge::U0),
        (2, Edge::V0),
    ]);
    (interfaces, boundary)
}

/// Equilateral triangle split into three bilinear quads through the centroid.
fn triangle3() -> MultiPatchGeometry {
    let s3 = 3.0f64.sqrt();
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.5, s3 / 2.0]];
    let center = [0.5, s3 / 6.0];
    let quads = fan3(corners, center);
    let (interfaces, boundary) = fan3_topology();
    MultiPatchGeometry {
        patches: quads
            .iter()
            .map(|q| bilinear(q[0], q[1], q[2], q[3]))
            .collect(),
        interfaces,
        boundary,
    }
}

/// Quadratic triangular Bezier surface in homogeneous coordinates mapping
/// the reference triangle onto a quarter of the unit disk. The curved edge
/// (s + t = 1) dehomogenizes onto the unit circle exactly.
fn quarter_disk_hom(s: f64, t: f64) -> [f64; 3] {
    let r2 = 2.0f64.sqrt();
    let g002 = [0.0, 0.0, 1.0];
    let g011 = [0.0, r2, 2.0 * r2];
    let g020 = [0.0, 1.0, 1.0];
    let g101 = [r2, 0.0, 2.0 * r2];
    let g110 = [2.0 * r2, 2.0 * r2, 2.0 * r2];
    let g200 = [1.0, 0.0, 1.0];
    let r = 1.0 - s - t;
    let mut out = [0.0; 3];
    for c in 0..3 {
        out[c] = g002[c] * r * r
            + g020[c] * t * t
            + g200[c] * s * s
            + 0.5 * (g011[c] * t * r + g101[c] * s * r + g110[c] * s * t);
    }
    out
}

/// Quarter of the unit disk as three rational biquadratic patches: bilinear
/// fan of the reference triangle composed with the homogeneous quadratic map.
fn quarter_circle3() -> MultiPatchGeometry {
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let center = [1.0 / 3.0, 1.0 / 3.0];
    let quads = fan3(corners, center);
    let (interfaces, boundary) = fan3_topology();
    let patches = quads
        .iter()
        .map(|q| {
            let q = *q;
            hom_patch(2, move |u, v| {
                let s = (1.0 - u) * (1.0 - v) * q[0][0]
                    + u * (1.0 - v) * q[1][0]
                    + (1.0 - u) * v * q[2][0]
                    + u * v * q[3][0];
                let t = (1.0 - u) * (1.0 - v) * q[0][1]
                    + u * (1.0 - v) * q[1][1]
                    + (1.0 - u) * v * q[2][1]
                    + u * v * q[3][1];
                quarter_disk_hom(s, t)
            })
        })
        .collect();
    MultiPatchGeometry {
        patches,
        interfaces,
        boundary,
    }
}

/// Rectangle [0,2]x[0,1] split into four bilinear quads around an off-center
/// cross vertex at (1.1, 0.5). The two horizontal interfaces are collinear
/// (both on y = 0.5); the two vertical ones are genuinely kinked.
fn rectangle4() -> MultiPatchGeometry {
    let x = [1.1, 0.5]; // cross vertex
    let b = [0.9, 0.0];
    let t = [1.2, 1.0];
    let l = [0.0, 0.5];
    let r = [2.0, 0.5];
    MultiPatchGeometry {
        patches: vec![
            bilinear([0.0, 0.0], b, l, x),
            bilinear(b, [2.0, 0.0], x, r),
            bilinear(l, x, [0.0, 1.0], t),
            bilinear(x, r, t, [2.0, 1.0]),
        ],
        interfaces: vec![
            Interface {
                a: (0, Edge::U1),
                b: (1, Edge::U0),
                flip: false,
            },
            Interface {
                a: (2, Edge::U1),
                b: (3, Edge::U0),
                flip: false,
            },
            Interface {
                a: (0, Edge::V1),
                b: (2, Edge::V0),
                flip: false,
            },
            Interface {
                a: (1, Edge::V1),
                b: (3, Edge::V0),
                flip: false,
            },
        ],
        boundary: boundary(&[
            (0, Edge::U0),
            (0, Edge::V0),
            (1, Edge::V0),
            (1, Edge::U1),
            (2, Edge::U0),
            (2, Edge::V1),
            (3, Edge::U1),
            (3, Edge::V1),
        ]),
    }
}

/// Simply connected domain with C1 boundary: central biquadratic square
/// plus four curved patches, the side ones being rotations of the top one.
fn smooth5() -> MultiPatchGeometry {
    let a = (17.0f64.sqrt() - 3.0) / 2.0;
    let b = (17.0f64.sqrt() - 5.0) / 2.0;
    let q = move |v: f64| 1.0 + a * v - b * v * v;
    let top = move |u: f64, v: f64| {
        [
            (u - 0.5) * q(v),
            2.0 * v * v * (u - u * u) + 0.5 * q(v),
        ]
    };
    let rot = |f: &dyn Fn(f64, f64) -> [f64; 2], u: f64, v: f64| {
        let p = f(u, v);
        [-p[1], p[0]]
    };
    let patches = vec![
        poly_patch(2, |u, v| [u - 0.5, v - 0.5]),
        poly_patch(2, top),
        poly_patch(2, |u, v| rot(&top, u, v)),
        poly_patch(2, |u, v| rot(&|u, v| rot(&top, u, v), u, v)),
        poly_patch(2, |u, v| {
            let p = top(u, v);
            [p[1], -p[0]]
        }),
    ];
    MultiPatchGeometry {
        patches,
        interfaces: vec![
            Interface {
                a: (0, Edge::V1),
                b: (1, Edge::V0),
                flip: false,
            },
            Interface {
                a: (0, Edge::U0),
                b: (2, Edge::V0),
                flip: false,
            },
            Interface {
                a: (0, Edge::V0),
                b: (3, Edge::V0),
                flip: true,
            },
            Interface {
                a: (0, Edge::U1),
                b: (4, Edge::V0),
                flip: true,
            },
            Interface {
                a: (1, Edge::U0),
                b: (2, Edge::U1),
                flip: false,
            },
            Interface {
                a: (2, Edge::U0),
                b: (3, Edge::U1),
                flip: false,
            },
            Interface {
                a: (3, Edge::U0),
                b: (4, Edge::U1),
                flip: false,
            },
            Interface {
                a: (4, Edge::U0),
                b: (1, Edge::U1),
                flip: false,
            },
        ],
        boundary: boundary(&[(1, Edge::V1), (2, Edge::V1), (3, Edge::V1), (4, Edge::V1)]),
    }
}

/// Identity left patch against a biquadratic right patch whose transversal
/// derivative along the interface is (1 + 4*delta*v(1-v), 0): the interface
/// Jacobian on the right is a genuine quadratic, so no linear gluing data
/// exists. delta = 0.3 keeps the right patch regular.
fn distorted_rectangle() -> MultiPatchGeometry {
    let delta = 0.3;
    MultiPatchGeometry {
        patches: vec![
            bilinear([-1.0, 0.0], [0.0, 0.0], [-1.0, 1.0], [0.0, 1.0]),
            poly_patch(2, move |u, v| {
                [u * (1.0 + 4.0 * delta * v * (1.0 - v) * (1.0 - u)), v]
            }),
        ],
        interfaces: vec![Interface {
            a: (0, Edge::U1),
            b: (1, Edge::U0),
            flip: false,
        }],
        boundary: boundary(&[
            (0, Edge::U0),
            (0, Edge::V0),
            (0, Edge::V1),
            (1, Edge::U1),
            (1, Edge::V0),
            (1, Edge::V1),
        ]),
    }
}

/// Exact unit disk from five patches: central biquadratic square
/// [-0.4,0.4]^2 and four rational ring patches. Ring control nets: inner row
/// on the square edge, outer row a rational quarter-circle arc, middle row
/// the homogeneous average. The homogeneous surfaces are C0-conforming, but
/// no linear gluing data exists for the ring interfaces.
fn circle5() -> MultiPatchGeometry {
    let s = 0.4;
    let r2 = 2.0f64.sqrt();
    let central = Patch::new(
        SplineSpace2D::square(2, 1, 1),
        (0..3)
            .flat_map(|j| (0..3).map(move |i| [s * (i as f64 - 1.0), s * (j as f64 - 1.0), 1.0]))
            .collect(),
    );
    let inner = [[-s, s, 1.0], [0.0, s, 1.0], [s, s, 1.0]];
    let outer = [
        [-r2 / 2.0, r2 / 2.0, 1.0],
        [0.0, 1.0, r2 / 2.0],
        [r2 / 2.0, r2 / 2.0, 1.0],
    ];
    let middle: Vec<[f64; 3]> = inner
        .iter()
        .zip(&outer)
        .map(|(i, o)| [(i[0] + o[0]) / 2.0, (i[1] + o[1]) / 2.0, (i[2] + o[2]) / 2.0])
        .collect();
    let mut top_cps = Vec::new();
    top_cps.extend_from_slice(&inner);
    top_cps.extend_from_slice(&middle);
    top_cps.extend_from_slice(&outer);
    let rot90 = |cps: &[[f64; 3]]| -> Vec<[f64; 3]> {
        cps.iter().map(|c| [-c[1], c[0], c[2]]).collect()
    };
    let left_cps = rot90(&top_cps);
    let bottom_cps = rot90(&left_cps);
    let right_cps = rot90(&bottom_cps);
    let ring_space = SplineSpace2D::square(2, 1, 1);
    MultiPatchGeometry {
        patches: vec![
            central,
            Patch::new(ring_space, top_cps),
            Patch::new(ring_space, left_cps),
            Patch::new(ring_space, bottom_cps),
            Patch::new(ring_space, right_cps),
        ],
        interfaces: vec![
            Interface {
                a: (0, Edge::V1),
                b: (1, Edge::V0),
                flip: false,
            },
            Interface {
                a: (0, Edge::U0),
                b: (2, Edge::V0),
                flip: false,
            },
            Interface {
                a: (0, Edge::V0),
                b: (3, Edge::V0),
                flip: true,
            },
            Interface {
                a: (0, Edge::U1),
                b: (4, Edge::V0),
                flip: true,
            },
            Interface {
                a: (1, Edge::U0),
                b: (2, Edge::U1),
                flip: false,
            },
            Interface {
                a: (2, Edge::U0),
                b: (3, Edge::U1),
                flip: false,
            },
            Interface {
                a: (3, Edge::U0),
                b: (4, Edge::U1),
                flip: false,
            },
            Interface {
                a: (4, Edge::U0),
                b: (1, Edge::U1),
                flip: false,
            },
        ],
        boundary: boundary(&[(1, Edge::V1), (2, Edge::V1), (3, Edge::V1), (4, Edge::V1)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn every_catalog_geometry_validates() {
        for name in catalog_names() {
            let geom = catalog(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            for i in 0..geom.interfaces.len() {
                crate::geometry::InterfaceFrame::new(&geom, i)
                    .unwrap_or_else(|e| panic!("{name} interface {i}: {e}"));
            }
        }
        assert!(catalog("no_such_geometry").is_err());
    }

    #[test]
    fn quarter_circle_corner_and_arc() {
        let geom = catalog("quarter_circle3").unwrap();
        // Patch 0 corner at the triangle corner (0,0).
        let p0 = geom.patches[0].corner(0.0, 0.0);
        assert_abs_diff_eq!(p0[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p0[1], 0.0, epsilon = 1e-14);
        // Curved boundary edges land on the unit circle.
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            for (patch, edge) in [(1usize, Edge::V0), (2usize, Edge::U0)] {
                let (u, v) = edge.param(t);
                let p = geom.patches[patch].eval(u, v, 0).p;
                assert_abs_diff_eq!(p[0] * p[0] + p[1] * p[1], 1.0, epsilon = 1e-12);
            }
        }
        assert!(geom.patches.iter().all(|p| p.is_rational()));
    }

    #[test]
    fn smooth5_patch_anchors() {
        let geom = catalog("smooth5").unwrap();
        let c = geom.patches[0].corner(0.5, 0.5);
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-14);
        let t = geom.patches[1].corner(0.5, 0.0);
        assert_abs_diff_eq!(t[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t[1], 0.5, epsilon = 1e-14);
        assert!(geom.patches.iter().all(|p| !p.is_rational()));
    }

    #[test]
    fn smooth5_boundary_is_c1_at_patch_corners() {
        let geom = catalog("smooth5").unwrap();
        // Ring neighbours (left patch index, right patch index) share the
        // outer corner where their V1 boundary edges meet.
        for (pa, pb) in [(1usize, 2usize), (2, 3), (3, 4), (4, 1)] {
            // a's V1 edge starts at u=0 at the shared corner; b's ends there.
            let ja = geom.patches[pa].eval(0.0, 1.0, 1);
            let jb = geom.patches[pb].eval(1.0, 1.0, 1);
            assert_abs_diff_eq!(ja.p[0], jb.p[0], epsilon = 1e-13);
            assert_abs_diff_eq!(ja.p[1], jb.p[1], epsilon = 1e-13);
            let cross = ja.du[0] * jb.du[1] - ja.du[1] * jb.du[0];
            assert!(cross.abs() <= 1e-10, "corner kink between {pa} and {pb}");
        }
    }

    #[test]
    fn rectangle4_has_exactly_one_collinear_interface_pair() {
        let geom = catalog("rectangle4").unwrap();
        // Horizontal interfaces both lie on y = 0.5.
        for idx in [2usize, 3] {
            let frame = crate::geometry::InterfaceFrame::new(&geom, idx).unwrap();
            for k in 0..=20 {
                let v = k as f64 / 20.0;
                assert_abs_diff_eq!(frame.f0(v).p[1], 0.5, epsilon = 1e-13);
            }
        }
        // Vertical interfaces are straight segments but with different slopes.
        let f0 = crate::geometry::InterfaceFrame::new(&geom, 0).unwrap();
        let f1 = crate::geometry::InterfaceFrame::new(&geom, 1).unwrap();
        let d0 = f0.f0(0.5).dv;
        let d1 = f1.f0(0.5).dv;
        let cross = d0[0] * d1[1] - d0[1] * d1[0];
        assert!(cross.abs() > 1e-3, "vertical interfaces should be kinked");
    }

    #[test]
    fn circle5_outer_boundary_is_unit_circle() {
        let geom = catalog("circle5").unwrap();
        for patch in 1..5 {
            for k in 0..=20 {
                let t = k as f64 / 20.0;
                let p = geom.patches[patch].eval(t, 1.0, 0).p;
                assert_abs_diff_eq!(p[0] * p[0] + p[1] * p[1], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn distorted_rectangle_interface_data() {
        let geom = catalog("distorted_rectangle").unwrap();
        let delta = 0.3;
        for k in 0..=20 {
            let v = k as f64 / 20.0;
            let j = geom.patches[1].eval(0.0, v, 1);
            assert_abs_diff_eq!(j.p[0], 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(j.p[1], v, epsilon = 1e-13);
            assert_abs_diff_eq!(
                j.du[0],
                1.0 + 4.0 * delta * v * (1.0 - v),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(j.du[1], 0.0, epsilon = 1e-13);
        }
    }
}
