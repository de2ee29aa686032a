//! Small named graph-surfaces.

use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::Vec3;
use crate::polyhedron_space::{PolyhedronPoint, PolyhedronTangent};
use crate::surface::{Edge, EdgeId, GraphSurface, MetricSurface, OrientedEdge, Triangle, VertexId};

fn edge(id: u32, tail: u32, head: u32) -> Edge {
    Edge { id: EdgeId(id), tail: VertexId(tail), head: VertexId(head) }
}

fn vertices(n: u32) -> Vec<VertexId> {
    (0..n).map(VertexId).collect()
}

fn fwd(id: u32) -> OrientedEdge {
    OrientedEdge::forward(id)
}

fn bwd(id: u32) -> OrientedEdge {
    OrientedEdge::backward(id)
}

/// One triangle `0 → 1 → 2` with edges 1, 2, 3.
pub fn single_triangle() -> GraphSurface {
    GraphSurface::new(
        vertices(3),
        vec![edge(1, 0, 1), edge(2, 1, 2), edge(3, 2, 0)],
        vec![Triangle([fwd(1), fwd(2), fwd(3)])],
        None,
    )
    .expect("valid fixture")
}

/// Three triangles around vertex 3 over the base triangle `0, 1, 2`.
pub fn tetrahedron_minus_face() -> GraphSurface {
    GraphSurface::new(
        vertices(4),
        vec![edge(1, 0, 1), edge(2, 1, 2), edge(3, 2, 0), edge(4, 0, 3), edge(5, 1, 3), edge(6, 2, 3)],
        vec![
            Triangle([fwd(1), fwd(5), bwd(4)]),
            Triangle([fwd(2), fwd(6), bwd(5)]),
            Triangle([fwd(3), fwd(4), bwd(6)]),
        ],
        None,
    )
    .expect("valid fixture")
}

/// Regular unit tetrahedron positions for [`tetrahedron_minus_face`].
pub fn regular_tetrahedron() -> Vec<Vec3> {
    let h = 3f64.sqrt() / 2.0;
    vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.5, h, 0.0),
        Vec3::new(0.5, h / 3.0, (2.0f64 / 3.0).sqrt()),
    ]
}

/// The square `a b c d` (edges 1 to 4) inside the projective plane, the
/// disk attached along `abcdabcd`.
pub fn rp2_square() -> GraphSurface {
    let walk = vec![fwd(1), fwd(2), fwd(3), fwd(4), fwd(1), fwd(2), fwd(3), fwd(4)];
    GraphSurface::new(vertices(4), vec![edge(1, 0, 1), edge(2, 1, 2), edge(3, 2, 3), edge(4, 3, 0)], vec![], Some(walk))
        .expect("valid fixture")
}

/// Unit lengths on [`rp2_square`].
pub fn rp2_metric() -> MetricSurface {
    MetricSurface::new(rp2_square(), vec![1.0; 4]).expect("valid fixture")
}

/// The unit square realization of [`rp2_square`].
pub fn rp2_point() -> PolyhedronPoint {
    PolyhedronPoint(vec![
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(-1.0, 0.0, 0.0),
    ])
}

/// The two tangent vectors at [`rp2_point`] whose `ω` does not vanish.
pub fn rp2_tangents() -> (PolyhedronTangent, PolyhedronTangent) {
    let s1 = PolyhedronTangent(vec![
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::zeros(),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::zeros(),
    ]);
    let s2 = PolyhedronTangent(vec![
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
    ]);
    (s1, s2)
}

/// A path `0 — 1 — 2 — 3` plus a leaf `1 — 4`, thickened: every edge is
/// walked once in each direction.
pub fn thickened_tree() -> GraphSurface {
    let walk = vec![fwd(1), fwd(4), bwd(4), fwd(2), fwd(3), bwd(3), bwd(2), bwd(1)];
    GraphSurface::new(vertices(5), vec![edge(1, 0, 1), edge(2, 1, 2), edge(3, 2, 3), edge(4, 1, 4)], vec![], Some(walk))
        .expect("valid fixture")
}

/// Three edges between two vertices, closed up into a torus by the walk
/// `a, −b, c, −a, b, −c`.
pub fn theta_torus() -> GraphSurface {
    let walk = vec![fwd(1), bwd(2), fwd(3), bwd(1), fwd(2), bwd(3)];
    GraphSurface::new(vertices(2), vec![edge(1, 0, 1), edge(2, 0, 1), edge(3, 0, 1)], vec![], Some(walk))
        .expect("valid fixture")
}
