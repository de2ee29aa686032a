//! Polygon spaces, polyhedron spaces of graph-surfaces, and the boundary map
//! between them.
#![no_std]

extern crate alloc;

pub mod dome;
pub mod fixtures;
pub mod generate;
pub mod numerics;
pub mod polygon_space;
pub mod polyhedron_space;
pub mod rigidity;
pub mod surface;
