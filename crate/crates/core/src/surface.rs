//! Graph-surfaces: finite 2-complexes whose complement in a closed surface is
//! an open disk, stored together with the boundary walk of that disk.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::polygon_space::{PolygonError, SamplePolygon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An edge taken with one of its two orientations.
///
/// `forward` means traversed from the stored tail to the stored head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrientedEdge {
    pub edge: EdgeId,
    pub forward: bool,
}

impl OrientedEdge {
    pub const fn new(edge: EdgeId, forward: bool) -> Self {
        Self { edge, forward }
    }

    pub const fn forward(edge: u32) -> Self {
        Self::new(EdgeId(edge), true)
    }

    pub const fn backward(edge: u32) -> Self {
        Self::new(EdgeId(edge), false)
    }

    #[must_use]
    pub const fn flip(self) -> Self {
        Self::new(self.edge, !self.forward)
    }

    /// `±1` according to orientation.
    pub const fn sign(self) -> i32 {
        if self.forward {
            1
        } else {
            -1
        }
    }

    /// Decodes the `±id` convention of surface files. Zero is rejected.
    pub fn from_signed(value: i64) -> Option<Self> {
        let id = u32::try_from(value.unsigned_abs()).ok()?;
        (id != 0).then_some(Self::new(EdgeId(id), value > 0))
    }

    pub fn signed(self) -> i64 {
        i64::from(self.edge.0) * i64::from(self.sign())
    }
}

impl fmt::Display for OrientedEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.forward {
            write!(f, "+{}", self.edge)
        } else {
            write!(f, "-{}", self.edge)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
}

/// A triangle given by its boundary as a closed walk of three oriented edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle(pub [OrientedEdge; 3]);

/// Where a walk inconsistency was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkSite {
    Triangle(usize),
    Boundary(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurfaceError {
    #[error("surface has no edges")]
    Empty,
    #[error("vertex {0} listed twice")]
    DuplicateVertex(VertexId),
    #[error("edge {0} listed twice")]
    DuplicateEdge(EdgeId),
    #[error("edge {edge} references unknown vertex {vertex}")]
    UnknownVertex { edge: EdgeId, vertex: VertexId },
    #[error("reference to unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("edge {0} has equal endpoints")]
    DegenerateEdge(EdgeId),
    #[error("vertex {0} is not incident to any edge")]
    IsolatedVertex(VertexId),
    #[error("the 1-skeleton is disconnected (vertex {0} unreachable)")]
    Disconnected(VertexId),
    #[error("walk does not chain at {site:?}: edge {edge} does not start where the previous edge ends")]
    BrokenWalk { site: WalkSite, edge: OrientedEdge },
    #[error("edge {edge} occupies {count} triangle/boundary slots, expected exactly 2")]
    BadIncidence { edge: EdgeId, count: usize },
    #[error("boundary walk is ambiguous at vertex {0}; supply it explicitly")]
    AmbiguousBoundary(VertexId),
    #[error("edge {0} lies on no triangle; a boundary walk must be supplied")]
    WalkRequired(EdgeId),
    #[error("not a disk: {0}")]
    NotADisk(&'static str),
    #[error("boundary position {0} is not an edge of exactly one triangle")]
    NotBoundaryTriangle(usize),
    #[error("boundary walk of length {0} is too short")]
    DegenerateBoundary(usize),
    #[error("edge {edge} has invalid length {length}")]
    BadLength { edge: EdgeId, length: f64 },
    #[error("triangle {0} violates a strict triangle inequality")]
    TriangleInequality(usize),
    #[error("length table has {got} entries for {expected} edges")]
    LengthCount { expected: usize, got: usize },
    #[error("boundary polygon: {0}")]
    Polygon(#[from] PolygonError),
}

/// Counts and flags reported by [`GraphSurface::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diagnostics {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_len: usize,
    /// `3|T| = 2|E| − |F|`.
    pub counting_identity: bool,
    pub orientable: bool,
    pub euler_characteristic: i64,
    /// Rank of `H₁(S)` over the rationals.
    pub first_betti: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSurface {
    vertices: Vec<VertexId>,
    edges: Vec<Edge>,
    triangles: Vec<Triangle>,
    boundary_walk: Vec<OrientedEdge>,
    orientable: bool,
}

/// Result of collapsing a triangle across boundary position `walk_index`.
///
/// `(boundary_edge, e, e_prime)` is the boundary of the removed triangle
/// oriented so that it starts with the removed boundary edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Collapse {
    pub surface: GraphSurface,
    pub walk_index: usize,
    pub triangle: usize,
    pub boundary_edge: OrientedEdge,
    pub e: OrientedEdge,
    pub e_prime: OrientedEdge,
}

/// A disk closed up into a sphere by a fan of diagonals from one boundary
/// vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeClosure {
    pub surface: GraphSurface,
    pub apex: VertexId,
    pub diagonals: Vec<EdgeId>,
}

/// A closed chain `Σ h_e e` over unoriented edges, sparse and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub coefficients: Vec<(EdgeId, i32)>,
}

/// Boundary polygon `P` together with `δ: f_i ↦ g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolygon {
    pub polygon: SamplePolygon,
    pub delta: Vec<OrientedEdge>,
}

impl GraphSurface {
    /// Builds and validates a graph-surface.
    ///
    /// With `boundary_walk = None` the walk is derived from the triangles:
    /// edges on exactly one triangle are chained into a single cycle oriented
    /// against a coherent orientation of the triangles. This only works for
    /// disk-like complexes; trees and other triangle-free pieces need an
    /// explicit walk. `Some(vec![])` declares a closed surface.
    pub fn new(
        vertices: Vec<VertexId>,
        mut edges: Vec<Edge>,
        triangles: Vec<Triangle>,
        boundary_walk: Option<Vec<OrientedEdge>>,
    ) -> Result<Self, SurfaceError> {
        let mut vertices = vertices;
        vertices.sort_unstable();
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(SurfaceError::DuplicateVertex(w[0]));
        }
        edges.sort_unstable_by_key(|e| e.id);
        if let Some(w) = edges.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(SurfaceError::DuplicateEdge(w[0].id));
        }
        let mut surface = Self {
            vertices,
            edges,
            triangles,
            boundary_walk: Vec::new(),
            orientable: false,
        };
        surface.check_references()?;
        surface.boundary_walk = match boundary_walk {
            Some(walk) => walk,
            None => surface.derive_disk_walk()?,
        };
        surface.validate()?;
        surface.orientable = surface.compute_orientable()?;
        Ok(surface)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_walk(&self) -> &[OrientedEdge] {
        &self.boundary_walk
    }

    pub fn is_orientable(&self) -> bool {
        self.orientable
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_walk.is_empty()
    }

    pub fn edge_index(&self, id: EdgeId) -> Option<usize> {
        self.edges.binary_search_by_key(&id, |e| e.id).ok()
    }

    pub fn vertex_index(&self, id: VertexId) -> Option<usize> {
        self.vertices.binary_search(&id).ok()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edge_index(id).map(|i| &self.edges[i])
    }

    /// Index of the edge underlying `oe`. Panics on foreign edges.
    pub fn index_of(&self, oe: OrientedEdge) -> usize {
        self.edge_index(oe.edge).expect("edge belongs to this surface")
    }

    pub fn tail(&self, oe: OrientedEdge) -> VertexId {
        let e = &self.edges[self.index_of(oe)];
        if oe.forward {
            e.tail
        } else {
            e.head
        }
    }

    pub fn head(&self, oe: OrientedEdge) -> VertexId {
        self.tail(oe.flip())
    }

    pub fn max_edge_id(&self) -> u32 {
        self.edges.last().map_or(0, |e| e.id.0)
    }

    fn check_references(&self) -> Result<(), SurfaceError> {
        if self.edges.is_empty() {
            return Err(SurfaceError::Empty);
        }
        for e in &self.edges {
            for v in [e.tail, e.head] {
                if self.vertex_index(v).is_none() {
                    return Err(SurfaceError::UnknownVertex { edge: e.id, vertex: v });
                }
            }
            if e.tail == e.head {
                return Err(SurfaceError::DegenerateEdge(e.id));
            }
        }
        for t in &self.triangles {
            for oe in t.0 {
                if self.edge_index(oe.edge).is_none() {
                    return Err(SurfaceError::UnknownEdge(oe.edge));
                }
            }
        }
        Ok(())
    }

    /// `(triangle, forward)` for every triangle slot, grouped by edge index.
    fn triangle_slots(&self) -> Vec<Vec<(usize, bool)>> {
        let mut slots = vec![Vec::new(); self.edges.len()];
        for (ti, t) in self.triangles.iter().enumerate() {
            for oe in t.0 {
                slots[self.index_of(oe)].push((ti, oe.forward));
            }
        }
        slots
    }

    fn derive_disk_walk(&self) -> Result<Vec<OrientedEdge>, SurfaceError> {
        let slots = self.triangle_slots();
        for (i, s) in slots.iter().enumerate() {
            match s.len() {
                0 => return Err(SurfaceError::WalkRequired(self.edges[i].id)),
                1 | 2 => {}
                n => return Err(SurfaceError::BadIncidence { edge: self.edges[i].id, count: n }),
            }
        }
        // Coherent orientation of triangles across interior edges.
        let mut orient: Vec<Option<bool>> = vec![None; self.triangles.len()];
        for start in 0..self.triangles.len() {
            if orient[start].is_some() {
                continue;
            }
            orient[start] = Some(true);
            let mut queue = VecDeque::from([start]);
            while let Some(t) = queue.pop_front() {
                let ot = orient[t].expect("visited");
                for oe in self.triangles[t].0 {
                    let s = &slots[self.index_of(oe)];
                    if s.len() != 2 {
                        continue;
                    }
                    let (me, other) = if s[0].0 == t && s[0].1 == oe.forward { (s[0], s[1]) } else { (s[1], s[0]) };
                    if other.0 == t {
                        continue;
                    }
                    // coherent: the two uses run in opposite directions
                    let me_forward = ot == me.1;
                    let need = if me_forward { !other.1 } else { other.1 };
                    match orient[other.0] {
                        None => {
                            orient[other.0] = Some(need);
                            queue.push_back(other.0);
                        }
                        Some(o) if o == need => {}
                        Some(_) => return Err(SurfaceError::NotADisk("triangles admit no coherent orientation")),
                    }
                }
            }
        }
        let mut outgoing: BTreeMap<VertexId, OrientedEdge> = BTreeMap::new();
        let mut boundary = Vec::new();
        for (i, s) in slots.iter().enumerate() {
            if s.len() == 1 {
                let (t, fwd) = s[0];
                let used_forward = fwd == orient[t].expect("oriented");
                let oe = OrientedEdge::new(self.edges[i].id, !used_forward);
                let v = self.tail(oe);
                if outgoing.insert(v, oe).is_some() {
                    return Err(SurfaceError::AmbiguousBoundary(v));
                }
                boundary.push(oe);
            }
        }
        let Some(&first) = boundary.first() else {
            return Ok(Vec::new());
        };
        let mut walk = vec![first];
        let mut current = first;
        loop {
            let next = *outgoing
                .get(&self.head(current))
                .ok_or(SurfaceError::NotADisk("boundary edges do not close up"))?;
            if next == first {
                break;
            }
            walk.push(next);
            current = next;
            if walk.len() > boundary.len() {
                return Err(SurfaceError::NotADisk("boundary edges do not close up"));
            }
        }
        if walk.len() != boundary.len() {
            return Err(SurfaceError::NotADisk("more than one boundary component"));
        }
        Ok(walk)
    }

    /// Checks every structural invariant and reports the counts.
    pub fn validate(&self) -> Result<Diagnostics, SurfaceError> {
        self.check_references()?;
        for oe in &self.boundary_walk {
            if self.edge_index(oe.edge).is_none() {
                return Err(SurfaceError::UnknownEdge(oe.edge));
            }
        }
        for (ti, t) in self.triangles.iter().enumerate() {
            let ids: BTreeSet<EdgeId> = t.0.iter().map(|oe| oe.edge).collect();
            if ids.len() != 3 {
                return Err(SurfaceError::BrokenWalk { site: WalkSite::Triangle(ti), edge: t.0[0] });
            }
            for j in 0..3 {
                let next = t.0[(j + 1) % 3];
                if self.head(t.0[j]) != self.tail(next) {
                    return Err(SurfaceError::BrokenWalk { site: WalkSite::Triangle(ti), edge: next });
                }
            }
        }
        let k = self.boundary_walk.len();
        for i in 0..k {
            let next = self.boundary_walk[(i + 1) % k];
            if self.head(self.boundary_walk[i]) != self.tail(next) {
                return Err(SurfaceError::BrokenWalk { site: WalkSite::Boundary((i + 1) % k), edge: next });
            }
        }
        let mut counts = vec![0usize; self.edges.len()];
        for t in &self.triangles {
            for oe in t.0 {
                counts[self.index_of(oe)] += 1;
            }
        }
        for oe in &self.boundary_walk {
            counts[self.index_of(*oe)] += 1;
        }
        if let Some((i, &c)) = counts.iter().enumerate().find(|(_, &c)| c != 2) {
            return Err(SurfaceError::BadIncidence { edge: self.edges[i].id, count: c });
        }
        let mut incident = vec![false; self.vertices.len()];
        for e in &self.edges {
            incident[self.vertex_index(e.tail).expect("checked")] = true;
            incident[self.vertex_index(e.head).expect("checked")] = true;
        }
        if let Some(i) = incident.iter().position(|&b| !b) {
            return Err(SurfaceError::IsolatedVertex(self.vertices[i]));
        }
        let (_, reach) = self.spanning_tree();
        if let Some(i) = reach.iter().position(|&b| !b) {
            return Err(SurfaceError::Disconnected(self.vertices[i]));
        }
        let orientable = self.compute_orientable()?;
        let (v, e, t, f) = (self.vertices.len(), self.edges.len(), self.triangles.len(), k);
        Ok(Diagnostics {
            vertices: v,
            edges: e,
            triangles: t,
            boundary_len: f,
            counting_identity: 3 * t + f == 2 * e,
            orientable,
            euler_characteristic: v as i64 - e as i64 + t as i64,
            first_betti: self.h1_generators().len(),
        })
    }

    /// Consistent orientation of all faces (triangles plus the disk `D`),
    /// each unoriented edge being traversed in opposite directions by its two
    /// incident face slots.
    fn compute_orientable(&self) -> Result<bool, SurfaceError> {
        let disk = self.triangles.len();
        let mut slots: Vec<Vec<(usize, bool)>> = vec![Vec::new(); self.edges.len()];
        for (ti, t) in self.triangles.iter().enumerate() {
            for oe in t.0 {
                slots[self.index_of(oe)].push((ti, oe.forward));
            }
        }
        for oe in &self.boundary_walk {
            slots[self.index_of(*oe)].push((disk, oe.forward));
        }
        // relation: orient[a] * sign_a = -orient[b] * sign_b
        let nodes = disk + usize::from(!self.boundary_walk.is_empty());
        let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); nodes];
        for (i, s) in slots.iter().enumerate() {
            if s.len() != 2 {
                return Err(SurfaceError::BadIncidence { edge: self.edges[i].id, count: s.len() });
            }
            let ((a, sa), (b, sb)) = (s[0], s[1]);
            // orient[b] = orient[a] xor (sa == sb)
            let flip = sa == sb;
            if a == b {
                if flip {
                    return Ok(false);
                }
                continue;
            }
            adj[a].push((b, flip));
            adj[b].push((a, flip));
        }
        let mut orient: Vec<Option<bool>> = vec![None; nodes];
        for start in 0..nodes {
            if orient[start].is_some() {
                continue;
            }
            orient[start] = Some(true);
            let mut queue = VecDeque::from([start]);
            while let Some(n) = queue.pop_front() {
                let on = orient[n].expect("visited");
                for &(m, flip) in &adj[n] {
                    let want = on ^ flip;
                    match orient[m] {
                        None => {
                            orient[m] = Some(want);
                            queue.push_back(m);
                        }
                        Some(o) if o == want => {}
                        Some(_) => return Ok(false),
                    }
                }
            }
        }
        Ok(true)
    }

    /// BFS spanning forest of the 1-skeleton from the smallest vertex.
    ///
    /// Returns, per vertex index, the oriented tree edge leading towards the
    /// root (`None` at the root) and reachability flags.
    fn spanning_tree(&self) -> (Vec<Option<OrientedEdge>>, Vec<bool>) {
        let n = self.vertices.len();
        let mut adj: Vec<Vec<OrientedEdge>> = vec![Vec::new(); n];
        for e in &self.edges {
            adj[self.vertex_index(e.tail).expect("valid")].push(OrientedEdge::new(e.id, true));
            adj[self.vertex_index(e.head).expect("valid")].push(OrientedEdge::new(e.id, false));
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        if n == 0 {
            return (parent, seen);
        }
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &oe in &adj[v] {
                let w = self.vertex_index(self.head(oe)).expect("valid");
                if !seen[w] {
                    seen[w] = true;
                    // from w back to v
                    parent[w] = Some(oe.flip());
                    queue.push_back(w);
                }
            }
        }
        (parent, seen)
    }

    /// Generators of `H₁(S)` as fundamental cycles of a spanning tree,
    /// keeping only those independent of the triangle boundaries.
    pub fn h1_generators(&self) -> Vec<Cycle> {
        let m = self.edges.len();
        let (parent, _) = self.spanning_tree();
        let tree: BTreeSet<EdgeId> = parent.iter().flatten().map(|oe| oe.edge).collect();
        let path_to_root = |start: VertexId| -> Vec<f64> {
            let mut acc = vec![0.0; m];
            let mut v = self.vertex_index(start).expect("valid");
            while let Some(oe) = parent[v] {
                acc[self.index_of(oe)] += f64::from(oe.sign());
                v = self.vertex_index(self.head(oe)).expect("valid");
            }
            acc
        };
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let absorb = |c: &[f64], basis: &mut Vec<Vec<f64>>| -> bool {
            let mut r = c.to_vec();
            for b in basis.iter() {
                let d: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>();
            let norm = <f64 as nalgebra::ComplexField>::sqrt(norm);
            let scale = c.iter().map(|x| x * x).sum::<f64>();
            let scale = <f64 as nalgebra::ComplexField>::sqrt(scale);
            if norm > 1e-9 * scale.max(1.0) {
                r.iter_mut().for_each(|x| *x /= norm);
                basis.push(r);
                true
            } else {
                false
            }
        };
        for t in &self.triangles {
            let mut c = vec![0.0; m];
            for oe in t.0 {
                c[self.index_of(oe)] += f64::from(oe.sign());
            }
            absorb(&c, &mut basis);
        }
        let mut generators = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if tree.contains(&e.id) {
                continue;
            }
            let up_head = path_to_root(e.head);
            let up_tail = path_to_root(e.tail);
            let mut c = vec![0.0; m];
            c[i] += 1.0;
            for j in 0..m {
                c[j] += up_head[j] - up_tail[j];
            }
            if absorb(&c, &mut basis) {
                let coefficients = c
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(j, &x)| (self.edges[j].id, x as i32))
                    .collect();
                generators.push(Cycle { coefficients });
            }
        }
        generators
    }

    /// The sample polygon of the boundary and the map `δ`.
    pub fn boundary_polygon(&self, lengths: &[f64]) -> Result<BoundaryPolygon, SurfaceError> {
        if lengths.len() != self.edges.len() {
            return Err(SurfaceError::LengthCount { expected: self.edges.len(), got: lengths.len() });
        }
        let delta = self.boundary_walk.clone();
        let polygon = SamplePolygon::new(delta.iter().map(|&g| lengths[self.index_of(g)]).collect())?;
        Ok(BoundaryPolygon { polygon, delta })
    }

    /// Walk positions whose edge lies on a triangle.
    pub fn collapsible_positions(&self) -> Vec<usize> {
        let slots = self.triangle_slots();
        self.boundary_walk
            .iter()
            .enumerate()
            .filter(|(_, g)| slots[self.index_of(**g)].len() == 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// Removes the triangle behind boundary position `walk_index` together
    /// with that boundary edge, rewriting `g_i` as `(−e′)(−e)`.
    pub fn collapse(&self, walk_index: usize) -> Result<Collapse, SurfaceError> {
        let g = *self
            .boundary_walk
            .get(walk_index)
            .ok_or(SurfaceError::NotBoundaryTriangle(walk_index))?;
        let slots = self.triangle_slots();
        let s = &slots[self.index_of(g)];
        if s.len() != 1 {
            return Err(SurfaceError::NotBoundaryTriangle(walk_index));
        }
        let (ti, _) = s[0];
        let tri = self.triangles[ti].0;
        let pos = tri.iter().position(|oe| oe.edge == g.edge).expect("slot");
        let (e, e_prime) = if tri[pos] == g {
            (tri[(pos + 1) % 3], tri[(pos + 2) % 3])
        } else {
            // reversed boundary (−c, −b, g) of (−g, b, c)
            (tri[(pos + 2) % 3].flip(), tri[(pos + 1) % 3].flip())
        };
        let mut walk = Vec::with_capacity(self.boundary_walk.len() + 1);
        walk.extend_from_slice(&self.boundary_walk[..walk_index]);
        walk.push(e_prime.flip());
        walk.push(e.flip());
        walk.extend_from_slice(&self.boundary_walk[walk_index + 1..]);
        let edges = self.edges.iter().copied().filter(|x| x.id != g.edge).collect();
        let mut triangles = self.triangles.clone();
        triangles.remove(ti);
        let surface = Self::new(self.vertices.clone(), edges, triangles, Some(walk))?;
        Ok(Collapse { surface, walk_index, triangle: ti, boundary_edge: g, e, e_prime })
    }

    /// Checks that this is a triangulated disk with a simple boundary cycle.
    pub fn check_disk(&self) -> Result<(), SurfaceError> {
        let k = self.boundary_walk.len();
        if k < 3 {
            return Err(SurfaceError::DegenerateBoundary(k));
        }
        if self.triangles.is_empty() {
            return Err(SurfaceError::NotADisk("no triangles"));
        }
        if !self.orientable {
            return Err(SurfaceError::NotADisk("not orientable"));
        }
        let walk_edges: BTreeSet<EdgeId> = self.boundary_walk.iter().map(|g| g.edge).collect();
        if walk_edges.len() != k {
            return Err(SurfaceError::NotADisk("a boundary edge lies on no triangle"));
        }
        let walk_vertices: BTreeSet<VertexId> = self.boundary_walk.iter().map(|&g| self.tail(g)).collect();
        if walk_vertices.len() != k {
            return Err(SurfaceError::NotADisk("boundary cycle is pinched"));
        }
        if !self.h1_generators().is_empty() {
            return Err(SurfaceError::NotADisk("first homology is nontrivial"));
        }
        if self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64 != 1 {
            return Err(SurfaceError::NotADisk("Euler characteristic differs from 1"));
        }
        Ok(())
    }

    /// Fills the disk `D` with a fan of `|F| − 3` diagonals and `|F| − 2`
    /// triangles from one boundary vertex, giving a sphere.
    ///
    /// The apex is the first boundary vertex (in walk order) with no edge to
    /// a non-adjacent boundary vertex, so that the diagonals never double an
    /// existing edge.
    pub fn cone_close(&self) -> Result<ConeClosure, SurfaceError> {
        self.check_disk()?;
        let k = self.boundary_walk.len();
        let corners: Vec<VertexId> = self.boundary_walk.iter().map(|&g| self.tail(g)).collect();
        let position: BTreeMap<VertexId, usize> = corners.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let has_chord = |j: usize| {
            self.edges.iter().any(|e| {
                let (a, b) = (position.get(&e.tail), position.get(&e.head));
                match (a, b) {
                    (Some(&a), Some(&b)) if a == j || b == j => {
                        let other = if a == j { b } else { a };
                        other != (j + 1) % k && other != (j + k - 1) % k
                    }
                    _ => false,
                }
            })
        };
        let start = (0..k).find(|&j| !has_chord(j)).unwrap_or(0);
        let walk: Vec<OrientedEdge> = (0..k).map(|j| self.boundary_walk[(start + j) % k]).collect();
        let b: Vec<VertexId> = walk.iter().map(|&g| self.tail(g)).collect();
        let apex = b[0];
        let mut edges = self.edges.clone();
        let mut next_id = self.max_edge_id() + 1;
        // diagonal[j] joins apex -> b[j], for 2 <= j <= k-2
        let mut diagonal: BTreeMap<usize, OrientedEdge> = BTreeMap::new();
        let mut diagonals = Vec::new();
        for (j, &bj) in b.iter().enumerate().take(k - 1).skip(2) {
            let id = EdgeId(next_id);
            next_id += 1;
            edges.push(Edge { id, tail: apex, head: bj });
            diagonal.insert(j, OrientedEdge::new(id, true));
            diagonals.push(id);
        }
        let mut triangles = self.triangles.clone();
        for j in 1..k - 1 {
            let back = if j + 1 == k - 1 { walk[k - 1] } else { diagonal[&(j + 1)].flip() };
            let out = if j == 1 { walk[0] } else { diagonal[&j] };
            triangles.push(Triangle([walk[j], back, out]));
        }
        let surface = Self::new(self.vertices.clone(), edges, triangles, Some(Vec::new()))?;
        Ok(ConeClosure { surface, apex, diagonals })
    }

    /// Indices `(tail, head)` of every edge in vertex-index space.
    pub fn edge_endpoints(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .map(|e| {
                (
                    self.vertex_index(e.tail).expect("valid"),
                    self.vertex_index(e.head).expect("valid"),
                )
            })
            .collect()
    }
}

/// A graph-surface with an edge-length function satisfying the strict
/// triangle inequalities on every face.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSurface {
    surface: GraphSurface,
    lengths: Vec<f64>,
}

impl MetricSurface {
    /// `lengths` is indexed like [`GraphSurface::edges`].
    pub fn new(surface: GraphSurface, lengths: Vec<f64>) -> Result<Self, SurfaceError> {
        if lengths.len() != surface.edges.len() {
            return Err(SurfaceError::LengthCount { expected: surface.edges.len(), got: lengths.len() });
        }
        for (e, &l) in surface.edges.iter().zip(&lengths) {
            if !(l.is_finite() && l > 0.0) {
                return Err(SurfaceError::BadLength { edge: e.id, length: l });
            }
        }
        for (ti, t) in surface.triangles.iter().enumerate() {
            let l: Vec<f64> = t.0.iter().map(|&oe| lengths[surface.index_of(oe)]).collect();
            if !(l[0] + l[1] > l[2] && l[1] + l[2] > l[0] && l[2] + l[0] > l[1]) {
                return Err(SurfaceError::TriangleInequality(ti));
            }
        }
        Ok(Self { surface, lengths })
    }

    pub fn from_map(surface: GraphSurface, lengths: &BTreeMap<EdgeId, f64>) -> Result<Self, SurfaceError> {
        let mut table = Vec::with_capacity(surface.edges.len());
        for e in &surface.edges {
            match lengths.get(&e.id) {
                Some(&l) => table.push(l),
                None => return Err(SurfaceError::BadLength { edge: e.id, length: f64::NAN }),
            }
        }
        Self::new(surface, table)
    }

    pub fn surface(&self) -> &GraphSurface {
        &self.surface
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn length(&self, oe: OrientedEdge) -> f64 {
        self.lengths[self.surface.index_of(oe)]
    }

    pub fn boundary_polygon(&self) -> Result<BoundaryPolygon, SurfaceError> {
        self.surface.boundary_polygon(&self.lengths)
    }

    /// Restricts the metric to the collapsed surface.
    pub fn collapse(&self, walk_index: usize) -> Result<(Self, Collapse), SurfaceError> {
        let c = self.surface.collapse(walk_index)?;
        let lengths = c
            .surface
            .edges
            .iter()
            .map(|e| self.lengths[self.surface.edge_index(e.id).expect("subset")])
            .collect();
        Ok((Self { surface: c.surface.clone(), lengths }, c))
    }
}
