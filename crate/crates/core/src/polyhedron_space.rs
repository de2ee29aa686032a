//! Realizations of a metric graph-surface modulo translations, in the
//! edge-vector model: one 3-vector per edge, stored for the edge's canonical
//! orientation (tail to head), so `q(−e) = −q(e)` holds by construction.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::numerics::{self, NumericsError, Tolerance, Vec3};
use crate::polygon_space::{self, PolygonError, PolygonPoint, PolygonTangent, SkewGenerator};
use crate::surface::{Collapse, Cycle, GraphSurface, MetricSurface, OrientedEdge, SurfaceError, VertexId};

/// Relative tolerance on the defining equations of a realization.
pub const POINT_TOLERANCE: f64 = 1e-10;

/// Relative tolerance on the preconditions of [`fit_rotation`].
pub const FIT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyhedronError {
    #[error("expected {expected} edge vectors, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("edge vectors disagree around a cycle through vertex {0}")]
    InconsistentCycles(VertexId),
    #[error("unknown base vertex {0}")]
    UnknownVertex(VertexId),
    #[error("triangle edge vectors are collinear")]
    CollinearTriangle,
    #[error("triangle data violate the closure or orthogonality conditions")]
    InconsistentData,
    #[error("the ambient closed surface is not orientable; isotropy is not guaranteed")]
    NotOrientable,
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Edge vectors `q(e)`, indexed like [`GraphSurface::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedronPoint(pub Vec<Vec3>);

/// Tangent candidate `s(e)`, indexed like [`GraphSurface::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedronTangent(pub Vec<Vec3>);

fn oriented(values: &[Vec3], surface: &GraphSurface, oe: OrientedEdge) -> Vec3 {
    let v = values[surface.index_of(oe)];
    if oe.forward {
        v
    } else {
        -v
    }
}

fn flatten(v: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(v.len() * 3, v.iter().flat_map(|x| x.iter().copied()))
}

fn unflatten(v: &DVector<f64>) -> Vec<Vec3> {
    (0..v.len() / 3).map(|i| Vec3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2])).collect()
}

impl PolyhedronPoint {
    /// Edge vectors of a realization given by vertex positions (indexed like
    /// [`GraphSurface::vertices`]).
    pub fn from_positions(surface: &GraphSurface, positions: &[Vec3]) -> Self {
        Self(surface.edge_endpoints().iter().map(|&(t, h)| positions[h] - positions[t]).collect())
    }

    pub fn value(&self, surface: &GraphSurface, oe: OrientedEdge) -> Vec3 {
        oriented(&self.0, surface, oe)
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.norm()).collect()
    }

    pub fn apply(&self, a: &SkewGenerator) -> PolyhedronTangent {
        PolyhedronTangent(self.0.iter().map(|v| a.apply(v)).collect())
    }
}

impl PolyhedronTangent {
    pub fn zeros(edges: usize) -> Self {
        Self(vec![Vec3::zeros(); edges])
    }

    pub fn value(&self, surface: &GraphSurface, oe: OrientedEdge) -> Vec3 {
        oriented(&self.0, surface, oe)
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        flatten(&self.0)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        Self(unflatten(v))
    }

    pub fn norm(&self) -> f64 {
        self.to_dvector().norm()
    }
}

/// Defects of the defining equations of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedronResidual {
    /// `⟨q(e), q(e)⟩ − ℓ(e)²` per edge.
    pub length: Vec<f64>,
    /// `|q(e₁) + q(e₂) + q(e₃)|` per triangle.
    pub triangle: Vec<f64>,
    /// `|Σ h_e q(e)|` per `H₁` generator.
    pub cycle: Vec<f64>,
}

impl PolyhedronResidual {
    pub fn accepted(&self, metric: &MetricSurface) -> bool {
        let scale: f64 = metric.lengths().iter().sum();
        self.length
            .iter()
            .zip(metric.lengths())
            .all(|(d, l)| d.abs() <= POINT_TOLERANCE * l * l)
            && self.triangle.iter().chain(&self.cycle).all(|&d| d <= POINT_TOLERANCE * scale)
    }

    pub fn max_defect(&self) -> f64 {
        self.length
            .iter()
            .map(|d| d.abs())
            .chain(self.triangle.iter().copied())
            .chain(self.cycle.iter().copied())
            .fold(0.0, f64::max)
    }
}

fn check_size(surface: &GraphSurface, got: usize) -> Result<(), PolyhedronError> {
    let expected = surface.edges().len();
    if got == expected {
        Ok(())
    } else {
        Err(PolyhedronError::SizeMismatch { expected, got })
    }
}

fn cycle_sum(surface: &GraphSurface, values: &[Vec3], cycle: &Cycle) -> Vec3 {
    cycle
        .coefficients
        .iter()
        .map(|&(id, h)| values[surface.edge_index(id).expect("cycle edge")] * f64::from(h))
        .sum()
}

fn triangle_sum(surface: &GraphSurface, values: &[Vec3], t: usize) -> Vec3 {
    surface.triangles()[t].0.iter().map(|&oe| oriented(values, surface, oe)).sum()
}

pub fn residual(metric: &MetricSurface, q: &PolyhedronPoint) -> Result<PolyhedronResidual, PolyhedronError> {
    let s = metric.surface();
    check_size(s, q.0.len())?;
    let length = q.0.iter().zip(metric.lengths()).map(|(v, l)| v.norm_squared() - l * l).collect();
    let triangle = (0..s.triangles().len()).map(|t| triangle_sum(s, &q.0, t).norm()).collect();
    let cycle = s.h1_generators().iter().map(|c| cycle_sum(s, &q.0, c).norm()).collect();
    Ok(PolyhedronResidual { length, triangle, cycle })
}

/// Integrates edge vectors breadth-first from `base` placed at the origin.
///
/// Returns positions indexed like [`GraphSurface::vertices`]. A vertex
/// reached twice at positions further apart than `1e-8 · Σ|q(e)|` signals
/// violated cycle conditions.
pub fn reconstruct(surface: &GraphSurface, q: &PolyhedronPoint, base: VertexId) -> Result<Vec<Vec3>, PolyhedronError> {
    check_size(surface, q.0.len())?;
    let n = surface.vertices().len();
    let start = surface.vertex_index(base).ok_or(PolyhedronError::UnknownVertex(base))?;
    let mut adj: Vec<Vec<(usize, Vec3)>> = vec![Vec::new(); n];
    for (i, &(t, h)) in surface.edge_endpoints().iter().enumerate() {
        adj[t].push((h, q.0[i]));
        adj[h].push((t, -q.0[i]));
    }
    let slack = 1e-8 * q.0.iter().map(|v| v.norm()).sum::<f64>().max(1.0);
    let mut pos: Vec<Option<Vec3>> = vec![None; n];
    pos[start] = Some(Vec3::zeros());
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let pv = pos[v].expect("visited");
        for &(w, d) in &adj[v] {
            let candidate = pv + d;
            match pos[w] {
                None => {
                    pos[w] = Some(candidate);
                    queue.push_back(w);
                }
                Some(pw) if (pw - candidate).norm() <= slack => {}
                Some(_) => return Err(PolyhedronError::InconsistentCycles(surface.vertices()[w])),
            }
        }
    }
    pos.into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or(PolyhedronError::InconsistentCycles(surface.vertices()[i])))
        .collect()
}

/// Jacobian of the defining equations over `3|E|` coordinates: one row per
/// length (factor 2 dropped), three per triangle, three per `H₁` generator.
pub fn jacobian(surface: &GraphSurface, q: &PolyhedronPoint) -> DMatrix<f64> {
    let m = surface.edges().len();
    let generators = surface.h1_generators();
    let rows = m + 3 * surface.triangles().len() + 3 * generators.len();
    let mut j = DMatrix::zeros(rows, 3 * m);
    for (i, v) in q.0.iter().enumerate() {
        for a in 0..3 {
            j[(i, 3 * i + a)] = v[a];
        }
    }
    let mut row = m;
    for t in surface.triangles() {
        for oe in t.0 {
            let c = 3 * surface.index_of(oe);
            for a in 0..3 {
                j[(row + a, c + a)] += f64::from(oe.sign());
            }
        }
        row += 3;
    }
    for g in &generators {
        for &(id, h) in &g.coefficients {
            let c = 3 * surface.edge_index(id).expect("cycle edge");
            for a in 0..3 {
                j[(row + a, c + a)] += f64::from(h);
            }
        }
        row += 3;
    }
    j
}

/// Orthonormal basis of the Zariski tangent space at `q`.
pub fn tangent_basis(surface: &GraphSurface, q: &PolyhedronPoint, tol: &Tolerance) -> Result<Vec<PolyhedronTangent>, PolyhedronError> {
    check_size(surface, q.0.len())?;
    let basis = numerics::kernel_basis(&jacobian(surface, q), tol)?;
    Ok(basis.iter().map(PolyhedronTangent::from_dvector).collect())
}

/// Largest violation of the linearized equations, relative to edge lengths
/// for the orthogonality rows.
pub fn tangent_defect(surface: &GraphSurface, q: &PolyhedronPoint, s: &PolyhedronTangent) -> Result<f64, PolyhedronError> {
    check_size(surface, q.0.len())?;
    check_size(surface, s.0.len())?;
    let orth = q.0.iter().zip(&s.0).map(|(qe, se)| (qe.dot(se) / qe.norm()).abs()).fold(0.0, f64::max);
    let tri = (0..surface.triangles().len()).map(|t| triangle_sum(surface, &s.0, t).norm()).fold(0.0, f64::max);
    let cyc = surface.h1_generators().iter().map(|c| cycle_sum(surface, &s.0, c).norm()).fold(0.0, f64::max);
    Ok(orth.max(tri).max(cyc))
}

/// `q ∘ δ`.
pub fn boundary_point(surface: &GraphSurface, q: &PolyhedronPoint) -> Result<PolygonPoint, PolyhedronError> {
    check_size(surface, q.0.len())?;
    Ok(PolygonPoint(surface.boundary_walk().iter().map(|&g| q.value(surface, g)).collect()))
}

/// `s ∘ δ`.
pub fn d_delta(surface: &GraphSurface, s: &PolyhedronTangent) -> Result<PolygonTangent, PolyhedronError> {
    check_size(surface, s.0.len())?;
    Ok(PolygonTangent(surface.boundary_walk().iter().map(|&g| s.value(surface, g)).collect()))
}

/// Recovers the infinitesimal rotation of a rigid triangle from the motion
/// of its edge vectors.
///
/// The map is fixed on `p₁, p₂` by the data and on the normal `n` by
/// requiring `⟨a(n), p_j⟩ = −⟨n, t_j⟩` with `a(n) ∈ span(p₁, p₂)`.
pub fn fit_rotation(p: [Vec3; 3], t: [Vec3; 3], eps: f64) -> Result<SkewGenerator, PolyhedronError> {
    let tscale = t.iter().map(|v| v.norm()).fold(0.0, f64::max);
    fit_rotation_scaled(p, t, eps, tscale)
}

/// [`fit_rotation`] with the tangent-side preconditions measured against
/// `t_ref` instead of the largest `|t_j|`, for data cut out of a larger
/// tangent vector that may nearly vanish on this triangle.
pub fn fit_rotation_scaled(p: [Vec3; 3], t: [Vec3; 3], eps: f64, t_ref: f64) -> Result<SkewGenerator, PolyhedronError> {
    let pscale = p.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tscale = t.iter().map(|v| v.norm()).fold(t_ref, f64::max);
    let n = p[0].cross(&p[1]);
    if n.norm() <= eps * p[0].norm() * p[1].norm() || pscale == 0.0 {
        return Err(PolyhedronError::CollinearTriangle);
    }
    let closure_p = (p[0] + p[1] + p[2]).norm();
    let closure_t = (t[0] + t[1] + t[2]).norm();
    let orth = (0..3).map(|j| t[j].dot(&p[j]).abs()).fold(0.0, f64::max);
    if closure_p > eps * pscale || closure_t > eps * tscale.max(f64::MIN_POSITIVE) || orth > eps * pscale * tscale {
        return Err(PolyhedronError::InconsistentData);
    }
    let g = nalgebra::Matrix2::new(p[0].dot(&p[0]), p[1].dot(&p[0]), p[0].dot(&p[1]), p[1].dot(&p[1]));
    let rhs = nalgebra::Vector2::new(-n.dot(&t[0]), -n.dot(&t[1]));
    let coeff = g.try_inverse().ok_or(PolyhedronError::CollinearTriangle)? * rhs;
    let an = p[0] * coeff[0] + p[1] * coeff[1];
    let source = Matrix3::from_columns(&[p[0], p[1], n]);
    let image = Matrix3::from_columns(&[t[0], t[1], an]);
    let inv = source.try_inverse().ok_or(PolyhedronError::CollinearTriangle)?;
    Ok(SkewGenerator::from_matrix(image * inv))
}

/// Restriction of a realization or tangent to the surface left by a collapse.
pub fn restrict(before: &GraphSurface, after: &GraphSurface, values: &[Vec3]) -> Vec<Vec3> {
    after
        .edges()
        .iter()
        .map(|e| values[before.edge_index(e.id).expect("collapse keeps edge ids")])
        .collect()
}

/// `(q′, s′)`: restrictions of `q` and `s` to the collapsed surface.
pub fn collapse_restrict(
    before: &GraphSurface,
    collapse: &Collapse,
    q: &PolyhedronPoint,
    s: &PolyhedronTangent,
) -> Result<(PolyhedronPoint, PolyhedronTangent), PolyhedronError> {
    check_size(before, q.0.len())?;
    check_size(before, s.0.len())?;
    let after = &collapse.surface;
    Ok((PolyhedronPoint(restrict(before, after, &q.0)), PolyhedronTangent(restrict(before, after, &s.0))))
}

/// Subtracts the orbit tangent that matches `s` on the triangle behind
/// boundary position `walk_index`, so the result vanishes on its edges.
pub fn gauge_normalize(
    surface: &GraphSurface,
    q: &PolyhedronPoint,
    s: &PolyhedronTangent,
    walk_index: usize,
) -> Result<(PolyhedronTangent, SkewGenerator), PolyhedronError> {
    gauge_normalize_scaled(surface, q, s, walk_index, s.norm())
}

fn gauge_normalize_scaled(
    surface: &GraphSurface,
    q: &PolyhedronPoint,
    s: &PolyhedronTangent,
    walk_index: usize,
    t_ref: f64,
) -> Result<(PolyhedronTangent, SkewGenerator), PolyhedronError> {
    check_size(surface, q.0.len())?;
    check_size(surface, s.0.len())?;
    let c = surface.collapse(walk_index)?;
    let sides = [c.boundary_edge, c.e, c.e_prime];
    let p = sides.map(|oe| q.value(surface, oe));
    let t = sides.map(|oe| s.value(surface, oe));
    let a = fit_rotation_scaled(p, t, FIT_TOLERANCE, t_ref.max(s.norm()))?;
    let normalized = PolyhedronTangent(s.0.iter().zip(&q.0).map(|(se, qe)| se - a.apply(qe)).collect());
    Ok((normalized, a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropyOptions {
    /// Threshold relative to the largest single summand encountered.
    pub rel_tol: f64,
    pub allow_nonorientable: bool,
    pub verify_collapse_chain: bool,
}

impl Default for IsotropyOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, allow_nonorientable: false, verify_collapse_chain: false }
    }
}

/// Floor of the summand scale used for relative thresholds.
pub const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    pub walk_index: usize,
    pub triangles_before: usize,
    /// Largest difference between matching summands before and after.
    pub max_unchanged_gap: f64,
    /// Largest replaced summand (one before, two after the collapse).
    pub max_replaced: f64,
    /// Largest change of `ω` caused by gauge normalization.
    pub max_gauge_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub steps: Vec<ChainStep>,
    /// On the final triangle-free surface: largest `|summand(g) + summand(−g)|`
    /// over boundary edges traversed in both directions.
    pub terminal_pair_gap: f64,
    /// Boundary edges of the final surface traversed twice the same way.
    pub terminal_same_orientation_pairs: usize,
    pub terminal_max_omega: f64,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotropyReport {
    pub tangent_dim: usize,
    pub pairs: usize,
    pub max_abs_omega: f64,
    pub largest_summand: f64,
    pub threshold: f64,
    pub pass: bool,
    pub chain: Option<ChainReport>,
}

fn pair_indices(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Pulls `ω` back along `dδ` on a basis of the tangent space and checks that
/// it vanishes.
pub fn isotropy_audit(
    metric: &MetricSurface,
    q: &PolyhedronPoint,
    tol: &Tolerance,
    options: &IsotropyOptions,
) -> Result<IsotropyReport, PolyhedronError> {
    let surface = metric.surface();
    if !surface.is_orientable() && !options.allow_nonorientable {
        return Err(PolyhedronError::NotOrientable);
    }
    let basis = tangent_basis(surface, q, tol)?;
    let polygon = metric.boundary_polygon()?.polygon;
    let p = boundary_point(surface, q)?;
    let images: Vec<PolygonTangent> = basis.iter().map(|b| d_delta(surface, b)).collect::<Result<_, _>>()?;
    let mut max_abs_omega: f64 = 0.0;
    let mut largest_summand: f64 = 0.0;
    let mut pairs = 0;
    for (i, j) in pair_indices(images.len()) {
        let terms = polygon_space::omega_summands(&polygon, &p, &images[i], &images[j])?;
        largest_summand = terms.iter().fold(largest_summand, |m, t| m.max(t.abs()));
        max_abs_omega = max_abs_omega.max(terms.iter().sum::<f64>().abs());
        pairs += 1;
    }
    let threshold = options.rel_tol * largest_summand.max(SCALE_FLOOR);
    let chain = if options.verify_collapse_chain {
        Some(collapse_chain(metric, q, basis.clone(), options.rel_tol)?)
    } else {
        None
    };
    let pass = max_abs_omega <= threshold && chain.as_ref().is_none_or(|c| c.pass);
    Ok(IsotropyReport { tangent_dim: basis.len(), pairs, max_abs_omega, largest_summand, threshold, pass, chain })
}

/// Follows the collapse sequence down to a triangle-free graph-surface,
/// gauge-normalizing the tangent family on each removed triangle and
/// comparing the `ω` summands termwise across every step.
pub fn collapse_chain(
    metric: &MetricSurface,
    q: &PolyhedronPoint,
    family: Vec<PolyhedronTangent>,
    rel_tol: f64,
) -> Result<ChainReport, PolyhedronError> {
    let mut metric = metric.clone();
    let mut q = q.clone();
    let mut family = family;
    let t_ref = family.iter().map(PolyhedronTangent::norm).fold(0.0, f64::max);
    let mut steps = Vec::new();
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    while !metric.surface().triangles().is_empty() {
        let surface = metric.surface().clone();
        let i = *surface.collapsible_positions().first().ok_or(SurfaceError::NotBoundaryTriangle(0))?;
        let polygon = metric.boundary_polygon()?.polygon;
        let p = boundary_point(&surface, &q)?;
        let (next_metric, collapse) = metric.collapse(i)?;
        let next_surface = &collapse.surface;
        let next_polygon = next_metric.boundary_polygon()?.polygon;
        let next_q = PolyhedronPoint(restrict(&surface, next_surface, &q.0));
        let next_p = boundary_point(next_surface, &next_q)?;

        let raw: Vec<PolygonTangent> = family.iter().map(|s| d_delta(&surface, s)).collect::<Result<_, _>>()?;
        let mut normalized = Vec::with_capacity(family.len());
        for s in &family {
            normalized.push(gauge_normalize_scaled(&surface, &q, s, i, t_ref)?.0);
        }
        let here: Vec<PolygonTangent> = normalized.iter().map(|s| d_delta(&surface, s)).collect::<Result<_, _>>()?;
        let restricted: Vec<PolyhedronTangent> =
            normalized.iter().map(|s| PolyhedronTangent(restrict(&surface, next_surface, &s.0))).collect();
        let there: Vec<PolygonTangent> =
            restricted.iter().map(|s| d_delta(next_surface, s)).collect::<Result<_, _>>()?;

        let mut step = ChainStep {
            walk_index: i,
            triangles_before: surface.triangles().len(),
            max_unchanged_gap: 0.0,
            max_replaced: 0.0,
            max_gauge_shift: 0.0,
        };
        for (a, b) in pair_indices(family.len()) {
            let original = polygon_space::omega_summands(&polygon, &p, &raw[a], &raw[b])?;
            let before = polygon_space::omega_summands(&polygon, &p, &here[a], &here[b])?;
            let after = polygon_space::omega_summands(&next_polygon, &next_p, &there[a], &there[b])?;
            for t in original.iter().chain(&before).chain(&after) {
                scale = scale.max(t.abs());
            }
            let shift = (original.iter().sum::<f64>() - before.iter().sum::<f64>()).abs();
            step.max_gauge_shift = step.max_gauge_shift.max(shift);
            for (j, &v) in before.iter().enumerate() {
                if j == i {
                    step.max_replaced = step.max_replaced.max(v.abs());
                    continue;
                }
                let k = if j < i { j } else { j + 1 };
                step.max_unchanged_gap = step.max_unchanged_gap.max((v - after[k]).abs());
            }
            step.max_replaced = step.max_replaced.max(after[i].abs()).max(after[i + 1].abs());
        }
        worst = worst.max(step.max_unchanged_gap).max(step.max_replaced).max(step.max_gauge_shift);
        steps.push(step);
        metric = next_metric;
        q = next_q;
        family = restricted;
    }

    // Triangle-free: summands of g and −g cancel.
    let surface = metric.surface();
    let polygon = metric.boundary_polygon()?.polygon;
    let p = boundary_point(surface, &q)?;
    let images: Vec<PolygonTangent> = family.iter().map(|s| d_delta(surface, s)).collect::<Result<_, _>>()?;
    let walk = surface.boundary_walk();
    let mut partner = vec![None; walk.len()];
    let mut same = 0;
    for a in 0..walk.len() {
        for b in a + 1..walk.len() {
            if walk[a].edge == walk[b].edge {
                if walk[a].forward == walk[b].forward {
                    same += 1;
                } else {
                    partner[a] = Some(b);
                }
            }
        }
    }
    let mut terminal_pair_gap: f64 = 0.0;
    let mut terminal_max_omega: f64 = 0.0;
    for (a, b) in pair_indices(images.len()) {
        let terms = polygon_space::omega_summands(&polygon, &p, &images[a], &images[b])?;
        for t in &terms {
            scale = scale.max(t.abs());
        }
        terminal_max_omega = terminal_max_omega.max(terms.iter().sum::<f64>().abs());
        for (x, y) in partner.iter().enumerate().filter_map(|(x, y)| y.map(|y| (x, y))) {
            terminal_pair_gap = terminal_pair_gap.max((terms[x] + terms[y]).abs());
        }
    }
    let threshold = rel_tol * scale.max(SCALE_FLOOR);
    let pass = worst <= threshold && terminal_pair_gap <= threshold && terminal_max_omega <= threshold;
    Ok(ChainReport {
        steps,
        terminal_pair_gap,
        terminal_same_orientation_pairs: same,
        terminal_max_omega,
        scale,
        pass,
    })
}

/// Metric induced on `surface` by vertex positions.
pub fn induced_metric(surface: &GraphSurface, positions: &[Vec3]) -> Result<(MetricSurface, PolyhedronPoint), PolyhedronError> {
    let q = PolyhedronPoint::from_positions(surface, positions);
    let metric = MetricSurface::new(surface.clone(), q.lengths())?;
    Ok((metric, q))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::generate::{self, TriangleDisk};
    use crate::surface::EdgeId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_triangle() -> (MetricSurface, PolyhedronPoint) {
        let h = 3f64.sqrt() / 2.0;
        let q1 = Vec3::new(1.0, 0.0, 0.0);
        let q2 = Vec3::new(-0.5, h, 0.0);
        let q = PolyhedronPoint(vec![q1, q2, -q1 - q2]);
        (MetricSurface::new(fixtures::single_triangle(), vec![1.0; 3]).unwrap(), q)
    }

    fn random_skew(rng: &mut impl Rng) -> SkewGenerator {
        SkewGenerator::from_axial(Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn flat_triangle_residual() {
        let (m, mut q) = flat_triangle();
        let r = residual(&m, &q).unwrap();
        assert!(r.max_defect() < 1e-15 && r.accepted(&m));
        q.0[0].x += 1e-3;
        let r = residual(&m, &q).unwrap();
        assert!((r.triangle[0] - 1e-3).abs() < 1e-15);
        assert!(!r.accepted(&m));
        assert_eq!(residual(&m, &PolyhedronPoint(vec![])).unwrap_err(), PolyhedronError::SizeMismatch { expected: 3, got: 0 });
    }

    #[test]
    fn projective_square_data() {
        let m = fixtures::rp2_metric();
        let q = fixtures::rp2_point();
        let r = residual(&m, &q).unwrap();
        assert_eq!(r.max_defect(), 0.0);
        assert_eq!(r.cycle.len(), 1);
        let (s1, s2) = fixtures::rp2_tangents();
        assert_eq!(tangent_defect(m.surface(), &q, &s1).unwrap(), 0.0);
        assert_eq!(tangent_defect(m.surface(), &q, &s2).unwrap(), 0.0);
        let p = boundary_point(m.surface(), &q).unwrap();
        assert_eq!(&p.0[..4], &q.0[..]);
        assert_eq!(&p.0[4..], &q.0[..]);
        let positions = reconstruct(m.surface(), &q, VertexId(0)).unwrap();
        assert_eq!(positions[2], Vec3::new(1.0, -1.0, 0.0));
    }

    #[test]
    fn projective_square_tangents_in_basis_span() {
        let m = fixtures::rp2_metric();
        let q = fixtures::rp2_point();
        let basis = tangent_basis(m.surface(), &q, &Tolerance::default()).unwrap();
        let (s1, s2) = fixtures::rp2_tangents();
        for s in [s1, s2] {
            let v = s.to_dvector();
            let projected: DVector<f64> = basis.iter().map(|b| b.to_dvector() * b.to_dvector().dot(&v)).sum();
            assert!((projected - v).norm() < 1e-12);
        }
    }

    #[test]
    fn projective_square_audit_refused() {
        let m = fixtures::rp2_metric();
        let q = fixtures::rp2_point();
        let tol = Tolerance::default();
        let err = isotropy_audit(&m, &q, &tol, &IsotropyOptions::default()).unwrap_err();
        assert_eq!(err, PolyhedronError::NotOrientable);
        let forced = IsotropyOptions { allow_nonorientable: true, ..Default::default() };
        let report = isotropy_audit(&m, &q, &tol, &forced).unwrap();
        assert!(!report.pass);
        assert!(report.max_abs_omega > 1e3 * report.threshold);
    }

    #[test]
    fn reconstruct_triangle_and_round_trip() {
        let (m, q) = flat_triangle();
        let x = reconstruct(m.surface(), &q, VertexId(0)).unwrap();
        assert_eq!(x[0], Vec3::zeros());
        assert_eq!(x[1], q.0[0]);
        assert_eq!(x[2], q.0[0] + q.0[1]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = TriangleDisk::random(&mut rng, 10).to_surface().unwrap();
        let x = generate::random_positions(&mut rng, &s).unwrap();
        let q = PolyhedronPoint::from_positions(&s, &x);
        let y = reconstruct(&s, &q, s.vertices()[0]).unwrap();
        let shift = x[0] - y[0];
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b - shift).amax() <= 1e-10);
        }
    }

    #[test]
    fn reconstruct_detects_broken_cycle() {
        let mut q = fixtures::rp2_point();
        q.0[3].x += 0.5;
        let err = reconstruct(&fixtures::rp2_square(), &q, VertexId(0)).unwrap_err();
        assert!(matches!(err, PolyhedronError::InconsistentCycles(_)));
    }

    #[test]
    fn triangle_tangents_are_rotations() {
        let (m, q) = flat_triangle();
        let tol = Tolerance::default();
        let basis = tangent_basis(m.surface(), &q, &tol).unwrap();
        assert_eq!(basis.len(), 3);
        let orbit: Vec<DVector<f64>> = SkewGenerator::standard().iter().map(|a| q.apply(a).to_dvector()).collect();
        let mut cols = orbit.clone();
        cols.extend(basis.iter().map(PolyhedronTangent::to_dvector));
        assert_eq!(numerics::numerical_rank(&numerics::columns_to_matrix(9, &cols), &tol).unwrap(), 3);
    }

    #[test]
    fn fit_rotation_cases() {
        let p = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(-1.0, -1.0, 0.0)];
        let zero = fit_rotation(p, [Vec3::zeros(); 3], FIT_TOLERANCE).unwrap();
        assert_eq!(zero.axial(), Vec3::zeros());
        let a0 = SkewGenerator::from_axial(Vec3::new(0.0, 0.0, 1.0));
        let a = fit_rotation(p, p.map(|v| a0.apply(&v)), FIT_TOLERANCE).unwrap();
        assert!((a.matrix() - a0.matrix()).amax() < 1e-15);

        let line = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(-2.0, 0.0, 0.0)];
        assert_eq!(fit_rotation(line, [Vec3::zeros(); 3], FIT_TOLERANCE).unwrap_err(), PolyhedronError::CollinearTriangle);
        let mut t = p.map(|v| a0.apply(&v));
        t[0].x += 0.1;
        assert_eq!(fit_rotation(p, t, FIT_TOLERANCE).unwrap_err(), PolyhedronError::InconsistentData);
    }

    #[test]
    fn fit_rotation_random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p1 = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let p2 = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let p = [p1, p2, -p1 - p2];
            let a0 = random_skew(&mut rng);
            let a = fit_rotation(p, p.map(|v| a0.apply(&v)), FIT_TOLERANCE).unwrap();
            let err = (a.matrix() - a0.matrix()).norm() / a0.matrix().norm();
            let sine = p1.cross(&p2).norm() / (p1.norm() * p2.norm());
            assert!(err <= 1e-12 / sine, "{err} at sine {sine}");
        }
    }

    #[test]
    fn gauge_normalize_removes_orbit_and_clears_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = TriangleDisk::random(&mut rng, 8).to_surface().unwrap();
        let x = generate::random_positions(&mut rng, &s).unwrap();
        let q = PolyhedronPoint::from_positions(&s, &x);
        let a0 = random_skew(&mut rng);
        let (n, a) = gauge_normalize(&s, &q, &q.apply(&a0), 0).unwrap();
        assert!(n.norm() < 1e-12);
        assert!((a.matrix() - a0.matrix()).amax() < 1e-12);

        let basis = tangent_basis(&s, &q, &Tolerance::default()).unwrap();
        let c = s.collapse(0).unwrap();
        for b in &basis {
            let (n, _) = gauge_normalize(&s, &q, b, 0).unwrap();
            for oe in [c.boundary_edge, c.e, c.e_prime] {
                assert!(n.value(&s, oe).norm() < 1e-9);
            }
            assert!(tangent_defect(&s, &q, &n).unwrap() < 1e-9);
        }
        // already vanishing on the triangle: unchanged
        let (n, _) = gauge_normalize(&s, &q, &gauge_normalize(&s, &q, &basis[0], 0).unwrap().0, 0).unwrap();
        let (m, _) = gauge_normalize(&s, &q, &basis[0], 0).unwrap();
        assert!((n.to_dvector() - m.to_dvector()).amax() < 1e-12);
    }

    #[test]
    fn collapse_restrict_tetrahedron() {
        let s = fixtures::tetrahedron_minus_face();
        let x = fixtures::regular_tetrahedron();
        let (metric, q) = induced_metric(&s, &x).unwrap();
        let tol = Tolerance::default();
        let basis = tangent_basis(&s, &q, &tol).unwrap();
        let (next, c) = metric.collapse(0).unwrap();
        for b in &basis {
            let (q2, s2) = collapse_restrict(&s, &c, &q, b).unwrap();
            assert_eq!(q2.0.len(), 5);
            assert!(residual(&next, &q2).unwrap().accepted(&next));
            assert!(tangent_defect(&c.surface, &q2, &s2).unwrap() < 1e-12);
        }
        let a0 = SkewGenerator::from_axial(Vec3::new(0.3, -0.2, 0.9));
        let (q2, s2) = collapse_restrict(&s, &c, &q, &q.apply(&a0)).unwrap();
        assert_eq!(s2, q2.apply(&a0));
    }

    #[test]
    fn d_delta_commutes_with_orbit() {
        let (m, q) = flat_triangle();
        let a = SkewGenerator::from_axial(Vec3::new(1.0, 2.0, 3.0));
        let image = d_delta(m.surface(), &q.apply(&a)).unwrap();
        let p = boundary_point(m.surface(), &q).unwrap();
        for (t, v) in image.0.iter().zip(&p.0) {
            assert_eq!(*t, a.apply(v));
        }
    }

    #[test]
    fn triangle_free_surfaces_are_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tree = fixtures::thickened_tree();
        let x: Vec<Vec3> = (0..5).map(|_| crate::polygon_space::random_unit(&mut rng)).collect();
        let (m, q) = induced_metric(&tree, &x).unwrap();
        let opts = IsotropyOptions { verify_collapse_chain: true, ..Default::default() };
        let r = isotropy_audit(&m, &q, &Tolerance::default(), &opts).unwrap();
        assert_eq!(r.tangent_dim, 8);
        assert!(r.pass && r.max_abs_omega < 1e-15);
        assert!(r.chain.unwrap().steps.is_empty());

        // all three theta edges must carry the same vector
        let theta = fixtures::theta_torus();
        let v = Vec3::new(0.6, 0.0, 0.8);
        let m = MetricSurface::new(theta, vec![1.0; 3]).unwrap();
        let q = PolyhedronPoint(vec![v; 3]);
        assert!(residual(&m, &q).unwrap().accepted(&m));
        let r = isotropy_audit(&m, &q, &Tolerance::default(), &IsotropyOptions::default()).unwrap();
        assert!(r.pass);
        assert_eq!(m.surface().edge(EdgeId(2)).unwrap().head, VertexId(1));
    }

    #[test]
    fn collapse_chain_on_random_disks() {
        let tol = Tolerance::default();
        let opts = IsotropyOptions { verify_collapse_chain: true, ..Default::default() };
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=12);
            let s = TriangleDisk::random(&mut rng, n).to_surface().unwrap();
            let x = generate::random_positions(&mut rng, &s).unwrap();
            let (m, q) = induced_metric(&s, &x).unwrap();
            let r = isotropy_audit(&m, &q, &tol, &opts).unwrap();
            let chain = r.chain.as_ref().unwrap();
            assert_eq!(chain.steps.len(), n);
            assert_eq!(chain.terminal_same_orientation_pairs, 0);
            assert!(r.pass, "{r:?}");
        }
    }
}
