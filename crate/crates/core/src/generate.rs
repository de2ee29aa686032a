//! Combinatorial triangulated disks: random growth, exhaustive enumeration up
//! to isomorphism, and random vertex realizations.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::numerics::Vec3;
use crate::surface::{Edge, EdgeId, GraphSurface, OrientedEdge, SurfaceError, Triangle, VertexId};

/// Relative area below which a sampled triangle counts as collinear.
pub const COLLINEAR_REJECTION: f64 = 1e-6;

/// Attempts before [`random_positions`] gives up.
pub const POSITION_ATTEMPTS: usize = 100;

/// A triangulated disk as coherently oriented vertex triples over the
/// vertices `0..vertex_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleDisk {
    triangles: Vec<[u32; 3]>,
    vertex_count: u32,
}

/// One growth step of a [`TriangleDisk`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthMove {
    /// Glue a triangle with a new vertex along the boundary edge `(u, v)`.
    Ear { u: u32, v: u32 },
    /// Glue a triangle across the boundary corner at `v`, joining its two
    /// boundary neighbours.
    Fill { v: u32 },
}

impl Default for TriangleDisk {
    fn default() -> Self {
        Self::single()
    }
}

impl TriangleDisk {
    pub fn single() -> Self {
        Self { triangles: vec![[0, 1, 2]], vertex_count: 3 }
    }

    /// Takes coherently oriented triples over `0..vertex_count` as given;
    /// [`TriangleDisk::to_surface`] validates them.
    pub fn from_triangles(vertex_count: u32, triangles: Vec<[u32; 3]>) -> Self {
        Self { triangles, vertex_count }
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> u32 {
        self.vertex_count
    }

    fn directed_edges(&self) -> BTreeSet<(u32, u32)> {
        self.triangles.iter().flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]).collect()
    }

    fn has_edge(&self, a: u32, b: u32) -> bool {
        let d = self.directed_edges();
        d.contains(&(a, b)) || d.contains(&(b, a))
    }

    /// Boundary edges in the direction of their triangle, chained into the
    /// boundary cycle starting at its smallest vertex.
    pub fn boundary_cycle(&self) -> Vec<(u32, u32)> {
        let d = self.directed_edges();
        let next: BTreeMap<u32, u32> = d.iter().filter(|(a, b)| !d.contains(&(*b, *a))).map(|&(a, b)| (a, b)).collect();
        let Some((&start, _)) = next.iter().next() else { return Vec::new() };
        let mut cycle = Vec::with_capacity(next.len());
        let mut v = start;
        loop {
            let w = next[&v];
            cycle.push((v, w));
            v = w;
            if v == start {
                break;
            }
        }
        cycle
    }

    /// All moves that keep the complex a simplicial disk.
    pub fn moves(&self) -> Vec<GrowthMove> {
        let cycle = self.boundary_cycle();
        let mut out: Vec<GrowthMove> = cycle.iter().map(|&(u, v)| GrowthMove::Ear { u, v }).collect();
        if cycle.len() >= 4 {
            for i in 0..cycle.len() {
                let (u, v) = cycle[i];
                let w = cycle[(i + 1) % cycle.len()].1;
                if !self.has_edge(u, w) {
                    out.push(GrowthMove::Fill { v });
                }
            }
        }
        out
    }

    pub fn apply(&self, m: GrowthMove) -> Self {
        let mut next = self.clone();
        match m {
            GrowthMove::Ear { u, v } => {
                next.triangles.push([v, u, next.vertex_count]);
                next.vertex_count += 1;
            }
            GrowthMove::Fill { v } => {
                let cycle = self.boundary_cycle();
                let u = cycle.iter().find(|e| e.1 == v).expect("boundary vertex").0;
                let w = cycle.iter().find(|e| e.0 == v).expect("boundary vertex").1;
                next.triangles.push([v, u, w]);
            }
        }
        next
    }

    /// Grows a disk with `triangles` faces by uniformly chosen moves.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, triangles: usize) -> Self {
        let mut disk = Self::single();
        while disk.triangles.len() < triangles {
            let moves = disk.moves();
            let m = moves[rng.random_range(0..moves.len())];
            disk = disk.apply(m);
        }
        disk
    }

    /// Graph-surface with edges numbered from 1 in order of their sorted
    /// endpoint pairs, each stored from the smaller to the larger vertex.
    pub fn to_surface(&self) -> Result<GraphSurface, SurfaceError> {
        let pairs: BTreeSet<(u32, u32)> = self.directed_edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        let ids: BTreeMap<(u32, u32), u32> = pairs.iter().enumerate().map(|(i, &p)| (p, i as u32 + 1)).collect();
        let edges = pairs
            .iter()
            .map(|&(a, b)| Edge { id: EdgeId(ids[&(a, b)]), tail: VertexId(a), head: VertexId(b) })
            .collect();
        let oriented = |a: u32, b: u32| OrientedEdge::new(EdgeId(ids[&(a.min(b), a.max(b))]), a < b);
        let triangles = self
            .triangles
            .iter()
            .map(|t| Triangle([oriented(t[0], t[1]), oriented(t[1], t[2]), oriented(t[2], t[0])]))
            .collect();
        GraphSurface::new((0..self.vertex_count).map(VertexId).collect(), edges, triangles, None)
    }

    /// Isomorphism invariant, mirror images included: the smallest
    /// breadth-first relabelling over all starting flags.
    pub fn canonical_code(&self) -> Vec<[u32; 3]> {
        let mirrored: Vec<[u32; 3]> = self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect();
        let mut best: Option<Vec<[u32; 3]>> = None;
        for tris in [&self.triangles, &mirrored] {
            for start in 0..tris.len() {
                for rot in 0..3 {
                    let code = bfs_code(tris, start, rot);
                    if best.as_ref().is_none_or(|b| code < *b) {
                        best = Some(code);
                    }
                }
            }
        }
        best.unwrap_or_default()
    }
}

fn bfs_code(tris: &[[u32; 3]], start: usize, rot: usize) -> Vec<[u32; 3]> {
    let owner: BTreeMap<(u32, u32), usize> = tris
        .iter()
        .enumerate()
        .flat_map(|(i, t)| [((t[0], t[1]), i), ((t[1], t[2]), i), ((t[2], t[0]), i)])
        .collect();
    let rotate = |t: [u32; 3], first: usize| [t[first], t[(first + 1) % 3], t[(first + 2) % 3]];
    let mut label: BTreeMap<u32, u32> = BTreeMap::new();
    let mut visited = vec![false; tris.len()];
    let first = rotate(tris[start], rot);
    for v in first {
        let n = label.len() as u32;
        label.insert(v, n);
    }
    visited[start] = true;
    let mut queue = VecDeque::from([first]);
    let mut code = Vec::with_capacity(tris.len());
    while let Some([x, y, z]) = queue.pop_front() {
        code.push([label[&x], label[&y], label[&z]]);
        for (a, b) in [(x, y), (y, z), (z, x)] {
            if let Some(&j) = owner.get(&(b, a)) {
                if !visited[j] {
                    visited[j] = true;
                    let t = tris[j];
                    let pos = t.iter().position(|&v| v == b).expect("shared vertex");
                    let nt = rotate(t, pos);
                    let n = label.len() as u32;
                    label.entry(nt[2]).or_insert(n);
                    queue.push_back(nt);
                }
            }
        }
    }
    code
}

/// All simplicial disks with at most `max_triangles` faces, one per
/// isomorphism class (mirror images identified), ordered by size and code.
pub fn enumerate_disks(max_triangles: usize) -> Vec<TriangleDisk> {
    let mut all = Vec::new();
    if max_triangles == 0 {
        return all;
    }
    let mut level: BTreeMap<Vec<[u32; 3]>, TriangleDisk> = BTreeMap::new();
    let single = TriangleDisk::single();
    level.insert(single.canonical_code(), single);
    for _ in 1..max_triangles {
        let mut next: BTreeMap<Vec<[u32; 3]>, TriangleDisk> = BTreeMap::new();
        for disk in level.values() {
            for m in disk.moves() {
                let child = disk.apply(m);
                next.entry(child.canonical_code()).or_insert(child);
            }
        }
        all.extend(core::mem::take(&mut level).into_values());
        level = next;
    }
    all.extend(level.into_values());
    all
}

/// Vertex corners of every triangle, as indices into the vertex list.
pub fn triangle_corners(surface: &GraphSurface) -> Vec<[usize; 3]> {
    surface
        .triangles()
        .iter()
        .map(|t| t.0.map(|oe| surface.vertex_index(surface.tail(oe)).expect("valid")))
        .collect()
}

/// Whether any triangle is collinear within [`COLLINEAR_REJECTION`].
pub fn has_flat_triangle(surface: &GraphSurface, positions: &[Vec3]) -> bool {
    triangle_corners(surface).iter().any(|&[a, b, c]| {
        let (u, v) = (positions[b] - positions[a], positions[c] - positions[a]);
        u.cross(&v).norm() <= COLLINEAR_REJECTION * u.norm() * v.norm()
    })
}

/// Vertex positions uniform in `[−1, 1]³`, resampled while some triangle is
/// nearly collinear.
pub fn random_positions<R: Rng + ?Sized>(rng: &mut R, surface: &GraphSurface) -> Option<Vec<Vec3>> {
    for _ in 0..POSITION_ATTEMPTS {
        let positions: Vec<Vec3> = (0..surface.vertices().len())
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        if !has_flat_triangle(surface, &positions) {
            return Some(positions);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_triangle_surface() {
        let s = TriangleDisk::single().to_surface().unwrap();
        assert_eq!(s.boundary_walk().len(), 3);
        s.check_disk().unwrap();
    }

    #[test]
    fn fill_needs_four_boundary_edges() {
        let d = TriangleDisk::single();
        assert!(d.moves().iter().all(|m| matches!(m, GrowthMove::Ear { .. })));
        let d = d.apply(GrowthMove::Ear { u: 0, v: 1 });
        assert_eq!(d.boundary_cycle().len(), 4);
        assert!(d.moves().iter().any(|m| matches!(m, GrowthMove::Fill { .. })));
    }

    #[test]
    fn random_disks_are_disks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 1..=20 {
            let d = TriangleDisk::random(&mut rng, t);
            let s = d.to_surface().unwrap();
            s.check_disk().unwrap();
            let diag = s.validate().unwrap();
            assert!(diag.counting_identity);
            assert_eq!(diag.triangles, t);
        }
    }

    #[test]
    fn code_is_label_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = TriangleDisk::random(&mut rng, 7);
        // relabel vertices by reversing their order
        let n = d.vertex_count();
        let relabelled = TriangleDisk {
            triangles: d.triangles.iter().rev().map(|t| [n - 1 - t[1], n - 1 - t[2], n - 1 - t[0]]).collect(),
            vertex_count: n,
        };
        assert_eq!(d.canonical_code(), relabelled.canonical_code());
    }

    #[test]
    fn small_disk_counts() {
        // with 3 triangles: the fan around a boundary vertex and the
        // tetrahedron minus a face
        let counts: Vec<usize> = (1..=3)
            .map(|t| enumerate_disks(3).iter().filter(|d| d.triangles().len() == t).count())
            .collect();
        assert_eq!(counts, vec![1, 1, 2]);
    }
}
