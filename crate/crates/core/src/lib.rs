//! Metric graphs with Kirchhoff Laplacians.

pub mod error;
pub mod generators;
pub mod geometry;
pub mod graph;
pub mod harnack;
pub mod heat;
pub mod inequality;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeId, MetricGraph, Point, VertexId, WeightProfile};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/graphs.md")]
mod book_graphs {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/geometry.md")]
mod book_geometry {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/heat.md")]
mod book_heat {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/inequalities.md")]
mod book_inequalities {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/harnack.md")]
mod book_harnack {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
