//! C1 isogeometric analysis on C0 multi-patch spline geometries.
//!
//! The crate builds tensor-product B-spline / NURBS patches glued with C0
//! continuity along interfaces, classifies interfaces by whether a C1
//! isogeometric space with good approximation behaviour exists over them,
//! extracts that space numerically as the null space of a gradient-jump
//! penalty matrix, and runs biharmonic convergence studies on top of it.
//!
//! Module map:
//! * [`linalg`] — dense symmetric eigensolver, null-space extraction, SPD solve
//! * [`quadrature`] — Gauss-Legendre rules on [0, 1]
//! * [`splines`] — univariate and tensor-product spline spaces
//! * [`poly2`] — small dense bivariate polynomial algebra (manufactured solutions)
//! * [`geometry`] — patches, multi-patch domains, interface frames, catalog, file I/O
//! * [`gluing`] — gluing data along an interface and its classification
//! * [`c1space`] — C0 coupling, C1 constraint matrix, null-space basis, trace analysis
//! * [`biharmonic`] — clamped biharmonic solver and error measurement
//! * [`study`] — refinement loops, convergence orders, verdicts, CSV rows

pub mod biharmonic;
pub mod geometry;
pub mod c1space;
pub mod gluing;
pub mod linalg;
pub mod poly2;
pub mod quadrature;
pub mod splines;
pub mod study;

pub use geometry::{Edge, MultiPatchGeometry, Patch};
pub use linalg::{DMat, DVec};
