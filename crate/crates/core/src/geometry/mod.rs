//! Exact rational linear algebra and the convex polyhedron kernel.

mod arrangement;
mod dd;
pub mod linalg;
mod polyhedron;
mod rational;

pub use arrangement::{cells, Cell, Sign};
pub use polyhedron::{ConeFace, PolyCone, Polyhedron, PolyhedronFace};
pub use rational::*;
