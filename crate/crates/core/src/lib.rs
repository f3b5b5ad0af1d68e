//! Finite-type knot invariants from configuration-space integrals over
//! trivalent diagrams, and their factoring through the stages of the
//! Taylor tower for long knots.

pub mod algebra;
pub mod diagram;
pub mod enumerate;
pub mod gauss;
pub mod integrals;
pub mod error;
pub mod knot;
pub mod projection;
pub mod rational;
pub mod tower;
pub mod vec3;

pub use algebra::{
    diagram_space_dimension, ihx_consistency, primitivity_filter, stu_rows, weight_basis,
    DiagramSpace, RelationMatrix, RelationOptions, RowKind, WeightSystem,
};
pub use diagram::{canonical_form, Canonical, Chord, Parity, TrivalentDiagram};
pub use enumerate::{enumerate_diagrams, MAX_ENUMERATION_DEGREE};
pub use error::{Error, Result};
pub use rational::{SparseVec, Q};
pub use gauss::{jones, v2, v3};
pub use integrals::{
    correction, integrate, integrand, invariant, tail_and_diagonal_report, AnomalyConfig,
    Configuration, InvariantOptions, InvariantReport, MCEstimate, Proposal, SamplingOptions,
    TailReport, Weighting, CALIBRATION,
};
pub use knot::{standard_knot, LongKnot, SplineSpec};
pub use projection::{gauss_projection, Crossing, GaussDiagramRec, DEFAULT_DIRECTION};
pub use tower::{
    check_gamma, integrate_tower, invariant_tower, knot_to_holim, restrict, synthetic_family,
    tower_projection, GammaMap, GammaReport, HolimPoint, PunctureSpec, PuncturedKnot,
};
