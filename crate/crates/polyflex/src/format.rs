//! Text formats: surfaces, realizations and boundary polygons.
//!
//! All three are JSON documents. Reading accepts any JSON layout; writing
//! emits a canonical layout with one edge, triangle or vector per line, so
//! diagnostics can point at a line and `write(read(text)) == text` for
//! canonical text. Floats are written in shortest round-trip form and read
//! back bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use polyflex_core::numerics::Vec3;
use polyflex_core::polygon_space::{PolygonPoint, SamplePolygon};
use polyflex_core::polyhedron_space::PolyhedronPoint;
use polyflex_core::surface::{Edge, EdgeId, GraphSurface, MetricSurface, OrientedEdge, SurfaceError, Triangle, VertexId, WalkSite};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{}{source}", at(*line))]
    Surface { line: Option<usize>, source: SurfaceError },
    #[error("{}{message}", at(*line))]
    Invalid { line: Option<usize>, message: String },
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl FormatError {
    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Parse { line, .. } => Some(*line),
            FormatError::Surface { line, .. } | FormatError::Invalid { line, .. } => *line,
        }
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep the message bare
        let message = match message.rfind(" at line ") {
            Some(cut) => message[..cut].to_string(),
            None => message,
        };
        FormatError::Parse { line: e.line(), column: e.column(), message }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: u32,
    pub tail: u32,
    pub head: u32,
}

/// A graph-surface with optional edge lengths. Oriented edges are signed ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceDoc {
    pub vertices: Vec<u32>,
    pub edges: Vec<EdgeDoc>,
    pub triangles: Vec<[i64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_walk: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<BTreeMap<u32, f64>>,
}

/// Edge vectors in stored orientation, or vertex positions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_vectors: Option<BTreeMap<u32, [f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<BTreeMap<u32, [f64; 3]>>,
}

/// A closed spatial polygon: side lengths and side vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonDoc {
    pub lengths: Vec<f64>,
    pub vectors: Vec<[f64; 3]>,
}

fn signed(oe: OrientedEdge) -> i64 {
    oe.signed()
}

fn oriented(value: i64, line: Option<usize>) -> Result<OrientedEdge, FormatError> {
    OrientedEdge::from_signed(value).ok_or_else(|| FormatError::Invalid { line, message: format!("invalid oriented edge {value}") })
}

fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("finite float")
}

fn vec_text(v: &[f64; 3]) -> String {
    format!("[{}, {}, {}]", num(v[0]), num(v[1]), num(v[2]))
}

fn join<T, F: Fn(&T) -> String>(items: &[T], f: F) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

fn write_map(out: &mut String, key: &str, map: &BTreeMap<u32, [f64; 3]>, last: bool) {
    let _ = writeln!(out, "  \"{key}\": {{");
    let n = map.len();
    for (i, (id, v)) in map.iter().enumerate() {
        let _ = writeln!(out, "    \"{id}\": {}{}", vec_text(v), if i + 1 < n { "," } else { "" });
    }
    let _ = writeln!(out, "  }}{}", if last { "" } else { "," });
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<(), FormatError> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(FormatError::Invalid { line: None, message: format!("{what} must be finite") })
    }
}

impl SurfaceDoc {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical text. Every section keeps the document's own order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"vertices\": [{}],", join(&self.vertices, |v| v.to_string()));
        out.push_str("  \"edges\": [\n");
        for (i, e) in self.edges.iter().enumerate() {
            let comma = if i + 1 < self.edges.len() { "," } else { "" };
            let _ = writeln!(out, "    {{\"id\": {}, \"tail\": {}, \"head\": {}}}{comma}", e.id, e.tail, e.head);
        }
        out.push_str("  ],\n");
        let has_walk = self.boundary_walk.is_some();
        let has_lengths = self.lengths.is_some();
        if self.triangles.is_empty() {
            out.push_str("  \"triangles\": []");
        } else {
            out.push_str("  \"triangles\": [\n");
            for (i, t) in self.triangles.iter().enumerate() {
                let comma = if i + 1 < self.triangles.len() { "," } else { "" };
                let _ = writeln!(out, "    [{}, {}, {}]{comma}", t[0], t[1], t[2]);
            }
            out.push_str("  ]");
        }
        out.push_str(if has_walk || has_lengths { ",\n" } else { "\n" });
        if let Some(walk) = &self.boundary_walk {
            let _ = writeln!(out, "  \"boundary_walk\": [{}]{}", join(walk, |g| g.to_string()), if has_lengths { "," } else { "" });
        }
        if let Some(lengths) = &self.lengths {
            out.push_str("  \"lengths\": {\n");
            let n = lengths.len();
            for (i, (id, l)) in lengths.iter().enumerate() {
                let _ = writeln!(out, "    \"{id}\": {}{}", num(*l), if i + 1 < n { "," } else { "" });
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    pub fn from_surface(surface: &GraphSurface, lengths: Option<&[f64]>) -> Self {
        SurfaceDoc {
            vertices: surface.vertices().iter().map(|v| v.0).collect(),
            edges: surface.edges().iter().map(|e| EdgeDoc { id: e.id.0, tail: e.tail.0, head: e.head.0 }).collect(),
            triangles: surface.triangles().iter().map(|t| t.0.map(signed)).collect(),
            boundary_walk: Some(surface.boundary_walk().iter().map(|&g| signed(g)).collect()),
            lengths: lengths.map(|ls| surface.edges().iter().zip(ls).map(|(e, &l)| (e.id.0, l)).collect()),
        }
    }

    pub fn from_metric(metric: &MetricSurface) -> Self {
        Self::from_surface(metric.surface(), Some(metric.lengths()))
    }

    /// Builds and validates the graph-surface. Validation failures carry the
    /// line of the offending entry when `text` is the source of `self`.
    pub fn surface(&self, text: Option<&str>) -> Result<GraphSurface, FormatError> {
        let locate = |e: &SurfaceError| text.and_then(|t| locate(t, self, e));
        let edges = self.edges.iter().map(|e| Edge { id: EdgeId(e.id), tail: VertexId(e.tail), head: VertexId(e.head) }).collect();
        let mut triangles = Vec::with_capacity(self.triangles.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let line = text.and_then(|s| entry_line(s, "triangles", i));
            triangles.push(Triangle([oriented(t[0], line)?, oriented(t[1], line)?, oriented(t[2], line)?]));
        }
        let walk = match &self.boundary_walk {
            Some(w) => {
                let line = text.and_then(|s| key_line(s, "boundary_walk"));
                Some(w.iter().map(|&g| oriented(g, line)).collect::<Result<Vec<_>, _>>()?)
            }
            None => None,
        };
        let vertices = self.vertices.iter().copied().map(VertexId).collect();
        let surface = GraphSurface::new(vertices, edges, triangles, walk).map_err(|e| FormatError::Surface { line: locate(&e), source: e })?;
        surface.validate().map_err(|e| FormatError::Surface { line: locate(&e), source: e })?;
        Ok(surface)
    }

    /// The surface with its length table; fails when lengths are absent.
    pub fn metric(&self, text: Option<&str>) -> Result<MetricSurface, FormatError> {
        let surface = self.surface(text)?;
        let lengths = self.lengths.as_ref().ok_or(FormatError::Invalid { line: None, message: "no lengths given".into() })?;
        check_finite(lengths.values().copied(), "lengths")?;
        let map: BTreeMap<EdgeId, f64> = lengths.iter().map(|(&id, &l)| (EdgeId(id), l)).collect();
        MetricSurface::from_map(surface, &map).map_err(|e| FormatError::Surface { line: text.and_then(|t| locate(t, self, &e)), source: e })
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        short_hash(self.to_text().as_bytes())
    }
}

pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Line (1-based) of the `key` field.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

/// Line of the `index`-th entry of a list laid out one entry per line, as in
/// canonical text.
fn entry_line(text: &str, key: &str, index: usize) -> Option<usize> {
    let start = key_line(text, key)?;
    let lines: Vec<&str> = text.lines().collect();
    let first = lines[start - 1];
    if first.trim_end().ends_with('[') {
        let mut seen = 0;
        for (offset, l) in lines[start..].iter().enumerate() {
            let t = l.trim_start();
            if t.starts_with(']') {
                return None;
            }
            if t.starts_with('[') || t.starts_with('{') {
                if seen == index {
                    return Some(start + offset + 1);
                }
                seen += 1;
            }
        }
        None
    } else {
        Some(start)
    }
}

fn edge_line(text: &str, doc: &SurfaceDoc, id: EdgeId) -> Option<usize> {
    let index = doc.edges.iter().position(|e| e.id == id.0)?;
    entry_line(text, "edges", index)
}

fn locate(text: &str, doc: &SurfaceDoc, e: &SurfaceError) -> Option<usize> {
    match e {
        SurfaceError::DuplicateEdge(id) => {
            let index = doc.edges.iter().enumerate().filter(|(_, d)| d.id == id.0).nth(1)?.0;
            entry_line(text, "edges", index)
        }
        SurfaceError::UnknownVertex { edge, .. }
        | SurfaceError::DegenerateEdge(edge)
        | SurfaceError::BadIncidence { edge, .. }
        | SurfaceError::WalkRequired(edge)
        | SurfaceError::BadLength { edge, .. } => edge_line(text, doc, *edge),
        SurfaceError::UnknownEdge(_) | SurfaceError::LengthCount { .. } => key_line(text, "lengths").or_else(|| key_line(text, "triangles")),
        SurfaceError::DuplicateVertex(_) | SurfaceError::IsolatedVertex(_) | SurfaceError::Disconnected(_) => key_line(text, "vertices"),
        SurfaceError::BrokenWalk { site: WalkSite::Triangle(i), .. } | SurfaceError::TriangleInequality(i) => entry_line(text, "triangles", *i),
        SurfaceError::BrokenWalk { site: WalkSite::Boundary(_), .. }
        | SurfaceError::AmbiguousBoundary(_)
        | SurfaceError::DegenerateBoundary(_)
        | SurfaceError::NotBoundaryTriangle(_)
        | SurfaceError::Polygon(_) => key_line(text, "boundary_walk"),
        SurfaceError::Empty | SurfaceError::NotADisk(_) => None,
    }
}

impl RealizationDoc {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.edge_vectors.is_none() && doc.positions.is_none() {
            return Err(FormatError::Invalid { line: Some(1), message: "realization needs edge_vectors or positions".into() });
        }
        Ok(doc)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("{\n");
        if let Some(q) = &self.edge_vectors {
            write_map(&mut out, "edge_vectors", q, self.positions.is_none());
        }
        if let Some(x) = &self.positions {
            write_map(&mut out, "positions", x, true);
        }
        out.push_str("}\n");
        out
    }

    pub fn from_positions(surface: &GraphSurface, positions: &[Vec3]) -> Self {
        let map = surface.vertices().iter().zip(positions).map(|(v, x)| (v.0, [x.x, x.y, x.z])).collect();
        RealizationDoc { edge_vectors: None, positions: Some(map) }
    }

    pub fn from_point(surface: &GraphSurface, q: &PolyhedronPoint) -> Self {
        let map = surface.edges().iter().zip(&q.0).map(|(e, v)| (e.id.0, [v.x, v.y, v.z])).collect();
        RealizationDoc { edge_vectors: Some(map), positions: None }
    }

    /// Vertex positions in surface vertex order, if given.
    pub fn vertex_positions(&self, surface: &GraphSurface) -> Result<Option<Vec<Vec3>>, FormatError> {
        let Some(map) = &self.positions else { return Ok(None) };
        let mut out = Vec::with_capacity(surface.vertices().len());
        for v in surface.vertices() {
            let x = map.get(&v.0).ok_or_else(|| FormatError::Invalid { line: None, message: format!("no position for vertex {}", v.0) })?;
            check_finite(x.iter().copied(), "positions")?;
            out.push(Vec3::new(x[0], x[1], x[2]));
        }
        if map.len() != out.len() {
            return Err(FormatError::Invalid { line: None, message: "positions name vertices outside the surface".into() });
        }
        Ok(Some(out))
    }

    /// Edge vectors in surface edge order: given directly, or differences of
    /// the positions.
    pub fn point(&self, surface: &GraphSurface) -> Result<PolyhedronPoint, FormatError> {
        let Some(map) = &self.edge_vectors else {
            let x = self.vertex_positions(surface)?.expect("one of the two is present");
            return Ok(PolyhedronPoint::from_positions(surface, &x));
        };
        let mut out = Vec::with_capacity(surface.edges().len());
        for e in surface.edges() {
            let v = map.get(&e.id.0).ok_or_else(|| FormatError::Invalid { line: None, message: format!("no vector for edge {}", e.id) })?;
            check_finite(v.iter().copied(), "edge vectors")?;
            out.push(Vec3::new(v[0], v[1], v[2]));
        }
        if map.len() != out.len() {
            return Err(FormatError::Invalid { line: None, message: "edge vectors name edges outside the surface".into() });
        }
        Ok(PolyhedronPoint(out))
    }
}

impl PolygonDoc {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.lengths.len() != doc.vectors.len() {
            return Err(FormatError::Invalid {
                line: None,
                message: format!("{} lengths for {} vectors", doc.lengths.len(), doc.vectors.len()),
            });
        }
        check_finite(doc.lengths.iter().copied().chain(doc.vectors.iter().flatten().copied()), "polygon data")?;
        Ok(doc)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"lengths\": [{}],", join(&self.lengths, |l| num(*l)));
        out.push_str("  \"vectors\": [\n");
        for (i, v) in self.vectors.iter().enumerate() {
            let _ = writeln!(out, "    {}{}", vec_text(v), if i + 1 < self.vectors.len() { "," } else { "" });
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn new(polygon: &SamplePolygon, p: &PolygonPoint) -> Self {
        PolygonDoc { lengths: polygon.lengths().to_vec(), vectors: p.0.iter().map(|v| [v.x, v.y, v.z]).collect() }
    }

    pub fn polygon(&self) -> Result<(SamplePolygon, PolygonPoint), polyflex_core::polygon_space::PolygonError> {
        let polygon = SamplePolygon::new(self.lengths.clone())?;
        Ok((polygon, PolygonPoint(self.vectors.iter().map(|v| Vec3::new(v[0], v[1], v[2])).collect())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use polyflex_core::fixtures;

    #[test]
    fn canonical_surface_round_trip() {
        let s = fixtures::tetrahedron_minus_face();
        let lengths = [0.1 + 0.2, 1.0, 1e-300, 2.5e17, std::f64::consts::PI, 1.0 / 3.0];
        let doc = SurfaceDoc::from_surface(&s, Some(&lengths));
        let text = doc.to_text();
        let back = SurfaceDoc::parse(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_text(), text);
        for (a, b) in back.lengths.unwrap().values().zip(&lengths) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn surface_layout() {
        let text = SurfaceDoc::from_surface(&fixtures::single_triangle(), None).to_text();
        let expected = "{\n  \"vertices\": [0, 1, 2],\n  \"edges\": [\n    {\"id\": 1, \"tail\": 0, \"head\": 1},\n    {\"id\": 2, \"tail\": 1, \"head\": 2},\n    {\"id\": 3, \"tail\": 2, \"head\": 0}\n  ],\n  \"triangles\": [\n    [1, 2, 3]\n  ],\n  \"boundary_walk\": [-1, -3, -2]\n}\n";
        assert_eq!(text, expected);
        let s = SurfaceDoc::parse(&text).unwrap().surface(Some(&text)).unwrap();
        assert_eq!(s, fixtures::single_triangle());
    }

    #[test]
    fn triangle_free_layout() {
        let s = fixtures::rp2_square();
        let text = SurfaceDoc::from_surface(&s, None).to_text();
        assert!(text.contains("\"triangles\": [],\n"));
        assert_eq!(SurfaceDoc::parse(&text).unwrap().surface(None).unwrap(), s);
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = SurfaceDoc::parse("{\n  \"vertices\": [0, 1],\n  \"edges\": [\n    {\"id\": 1, \"tail\": 0}\n  ]\n}\n").unwrap_err();
        assert_eq!(e.line(), Some(4));
        assert!(e.to_string().contains("head"), "{e}");
        let e = SurfaceDoc::parse("{\"vertices\": [0], \"colour\": 1}").unwrap_err();
        assert!(matches!(e, FormatError::Parse { line: 1, .. }));
    }

    #[test]
    fn validation_errors_point_at_entries() {
        let mut doc = SurfaceDoc::from_surface(&fixtures::tetrahedron_minus_face(), None);
        doc.edges[4].head = 9;
        let text = doc.to_text();
        let e = SurfaceDoc::parse(&text).unwrap().surface(Some(&text)).unwrap_err();
        assert!(matches!(e, FormatError::Surface { source: SurfaceError::UnknownVertex { .. }, .. }));
        assert_eq!(e.line(), Some(8));
        assert_eq!(text.lines().nth(7).unwrap().trim(), "{\"id\": 5, \"tail\": 1, \"head\": 9},");

        let mut doc = SurfaceDoc::from_surface(&fixtures::tetrahedron_minus_face(), None);
        doc.triangles[1] = [2, 6, 4];
        let text = doc.to_text();
        let e = doc.surface(Some(&text)).unwrap_err();
        assert_eq!(e.line(), Some(13), "{e}");
    }

    #[test]
    fn missing_walk_is_derived() {
        let mut doc = SurfaceDoc::from_surface(&fixtures::tetrahedron_minus_face(), None);
        doc.boundary_walk = None;
        let s = doc.surface(None).unwrap();
        assert_eq!(s.boundary_walk().len(), 3);
    }

    #[test]
    fn realization_round_trip() {
        let s = fixtures::rp2_square();
        let doc = RealizationDoc::from_point(&s, &fixtures::rp2_point());
        let text = doc.to_text();
        assert_eq!(RealizationDoc::parse(&text).unwrap(), doc);
        assert_eq!(RealizationDoc::parse(&text).unwrap().to_text(), text);
        assert_eq!(doc.point(&s).unwrap(), fixtures::rp2_point());
        assert!(RealizationDoc::parse("{}").is_err());
    }

    #[test]
    fn positions_give_edge_differences() {
        let s = fixtures::tetrahedron_minus_face();
        let x = fixtures::regular_tetrahedron();
        let doc = RealizationDoc::from_positions(&s, &x);
        let back = RealizationDoc::parse(&doc.to_text()).unwrap();
        assert_eq!(back.vertex_positions(&s).unwrap().unwrap(), x);
        assert_eq!(back.point(&s).unwrap(), PolyhedronPoint::from_positions(&s, &x));
    }

    #[test]
    fn polygon_round_trip_is_exact() {
        let doc = PolygonDoc { lengths: vec![0.1, 0.7, 1.0 / 7.0], vectors: vec![[0.1, -0.0, 1e-17], [1.0 / 3.0, 2.0, -5e-324], [f64::MAX, 0.0, 1.0]] };
        let text = doc.to_text();
        let back = PolygonDoc::parse(&text).unwrap();
        assert_eq!(back.to_text(), text);
        for (a, b) in back.vectors.iter().flatten().zip(doc.vectors.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(PolygonDoc::parse("{\"lengths\": [1.0], \"vectors\": []}").is_err());
    }

    #[test]
    fn hash_is_stable_under_layout() {
        let doc = SurfaceDoc::from_surface(&fixtures::single_triangle(), None);
        let compact = serde_json::to_string(&doc).unwrap();
        assert_eq!(SurfaceDoc::parse(&compact).unwrap().hash(), doc.hash());
        assert_eq!(doc.hash().len(), 16);
    }
}
