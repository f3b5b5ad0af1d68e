//! Shared fixtures for the pipeline benchmarks.

use knot_tower::{DiagramSpace, Parity, TrivalentDiagram};

/// The degree-2 diagram with one free vertex.
pub fn tripod() -> TrivalentDiagram {
    DiagramSpace::new(2, Parity::Odd)
        .expect("degree 2 enumerates")
        .keys
        .into_iter()
        .find(|d| d.free_vertices() == 1)
        .expect("degree 2 has a tripod")
}
