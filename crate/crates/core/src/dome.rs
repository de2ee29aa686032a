//! Unit domes: triangulated disks realized with every edge of length 1, and
//! the rank bound their boundary map satisfies.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::generate::{self, TriangleDisk};
use crate::numerics::{self, Tolerance, Vec3};
use crate::polygon_space;
use crate::polyhedron_space::{self, IsotropyOptions};
use crate::rigidity::{self, RigidityError};
use crate::surface::GraphSurface;

/// Largest accepted `| |x_u − x_v|² − 1 |` for a unit realization.
pub const UNIT_DEFECT: f64 = 1e-12;
pub const SOLVER_ITERATIONS: usize = 100;
pub const SOLVER_RESTARTS: usize = 8;

/// Minimum-norm Gauss–Newton on the squared edge lengths from random starts
/// in `[−1, 1]³`. Returns `None` when no start converges.
pub fn realize_unit<R: Rng + ?Sized>(surface: &GraphSurface, rng: &mut R, tol: &Tolerance) -> Option<Vec<Vec3>> {
    let ends = surface.edge_endpoints();
    let n = surface.vertices().len();
    for _ in 0..SOLVER_RESTARTS {
        let mut x = DVector::from_iterator(3 * n, (0..3 * n).map(|_| rng.random_range(-1.0..1.0)));
        for _ in 0..SOLVER_ITERATIONS {
            let mut r = DVector::zeros(ends.len());
            let mut j = DMatrix::zeros(ends.len(), 3 * n);
            for (row, &(u, v)) in ends.iter().enumerate() {
                let d = Vec3::new(x[3 * u] - x[3 * v], x[3 * u + 1] - x[3 * v + 1], x[3 * u + 2] - x[3 * v + 2]);
                r[row] = d.norm_squared() - 1.0;
                for a in 0..3 {
                    j[(row, 3 * u + a)] = 2.0 * d[a];
                    j[(row, 3 * v + a)] = -2.0 * d[a];
                }
            }
            if r.amax() <= UNIT_DEFECT {
                let positions: Vec<Vec3> = (0..n).map(|i| Vec3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2])).collect();
                return Some(positions);
            }
            match numerics::least_squares(&j, &(-r), tol) {
                Ok(step) => x += step,
                Err(_) => break,
            }
            if !x.iter().all(|c| c.is_finite()) {
                break;
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomeStatus {
    Checked,
    /// The solver found no unit realization.
    Unrealized,
    /// The realized boundary polygon is collinear.
    SingularBoundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomeEntry {
    pub triangles: usize,
    pub vertices: usize,
    pub boundary_len: usize,
    pub status: DomeStatus,
    pub tangent_dim: usize,
    pub mod_orbit_rank: usize,
    /// `|F| − 3`.
    pub bound: usize,
    pub max_omega: f64,
    /// The first check failed and the entry was recomputed at the
    /// tightened tolerance.
    pub reexamined: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomeAudit {
    pub entries: Vec<DomeEntry>,
}

impl DomeAudit {
    pub fn checked(&self) -> usize {
        self.entries.iter().filter(|e| e.status == DomeStatus::Checked).count()
    }

    pub fn skipped(&self, status: DomeStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| !e.pass).count()
    }

    pub fn pass(&self) -> bool {
        self.failures() == 0
    }
}

/// Rank of `dδ` modulo the rotation orbit at a unit realization, against the
/// bound `|F| − 3`. A failure is recomputed once at [`Tolerance::tightened`].
pub fn audit_dome(surface: &GraphSurface, positions: &[Vec3], tol: &Tolerance) -> Result<DomeEntry, RigidityError> {
    let entry = audit_dome_once(surface, positions, tol)?;
    if entry.pass {
        return Ok(entry);
    }
    let mut again = audit_dome_once(surface, positions, &tol.tightened())?;
    again.reexamined = true;
    Ok(again)
}

fn audit_dome_once(surface: &GraphSurface, positions: &[Vec3], tol: &Tolerance) -> Result<DomeEntry, RigidityError> {
    let k = surface.boundary_walk().len();
    let mut entry = DomeEntry {
        triangles: surface.triangles().len(),
        vertices: surface.vertices().len(),
        boundary_len: k,
        status: DomeStatus::Checked,
        tangent_dim: 0,
        mod_orbit_rank: 0,
        bound: k.saturating_sub(3),
        max_omega: 0.0,
        reexamined: false,
        pass: true,
    };
    let (metric, q) = polyhedron_space::induced_metric(surface, positions)?;
    let p = polyhedron_space::boundary_point(surface, &q)?;
    if polygon_space::is_singular(&p, tol) {
        entry.status = DomeStatus::SingularBoundary;
        return Ok(entry);
    }
    let basis = polyhedron_space::tangent_basis(surface, &q, tol)?;
    let images: Vec<_> = basis.iter().map(|b| polyhedron_space::d_delta(surface, b)).collect::<Result<_, _>>()?;
    entry.tangent_dim = basis.len();
    entry.mod_orbit_rank = rigidity::mod_orbit_rank(&p, &images, tol)?;
    entry.max_omega = polyhedron_space::isotropy_audit(&metric, &q, tol, &IsotropyOptions::default())?.max_abs_omega;
    entry.pass = entry.mod_orbit_rank <= entry.bound;
    Ok(entry)
}

/// Enumerates every simplicial disk with at most `max_triangles` faces,
/// realizes it with unit edges and checks the rank bound.
pub fn dome_audit<R: Rng + ?Sized>(max_triangles: usize, rng: &mut R, tol: &Tolerance) -> Result<DomeAudit, RigidityError> {
    let mut entries = Vec::new();
    for disk in generate::enumerate_disks(max_triangles) {
        entries.push(audit_disk(&disk, rng, tol)?);
    }
    Ok(DomeAudit { entries })
}

/// Realizes one disk with unit edges and audits it; an unrealized disk is
/// reported as such and counts as passing.
pub fn audit_disk<R: Rng + ?Sized>(disk: &TriangleDisk, rng: &mut R, tol: &Tolerance) -> Result<DomeEntry, RigidityError> {
    let surface = disk.to_surface()?;
    match realize_unit(&surface, rng, tol) {
        Some(positions) => audit_dome(&surface, &positions, tol),
        None => {
            let k = surface.boundary_walk().len();
            Ok(DomeEntry {
                triangles: surface.triangles().len(),
                vertices: surface.vertices().len(),
                boundary_len: k,
                status: DomeStatus::Unrealized,
                tangent_dim: 0,
                mod_orbit_rank: 0,
                bound: k.saturating_sub(3),
                max_omega: 0.0,
                reexamined: false,
                pass: true,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equilateral_tetrahedron_dome() {
        let s = fixtures::tetrahedron_minus_face();
        let e = audit_dome(&s, &fixtures::regular_tetrahedron(), &Tolerance::default()).unwrap();
        assert_eq!(e.status, DomeStatus::Checked);
        assert_eq!((e.boundary_len, e.bound, e.mod_orbit_rank, e.tangent_dim), (3, 0, 0, 3));
        assert!(e.pass && !e.reexamined);
    }

    #[test]
    fn solver_returns_unit_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = fixtures::tetrahedron_minus_face();
        let x = realize_unit(&s, &mut rng, &Tolerance::default()).unwrap();
        for (u, v) in s.edge_endpoints() {
            assert!(((x[u] - x[v]).norm_squared() - 1.0).abs() <= UNIT_DEFECT);
        }
    }

    #[test]
    fn small_audit_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = dome_audit(5, &mut rng, &Tolerance::default()).unwrap();
        assert_eq!(a.entries.len(), generate::enumerate_disks(5).len());
        assert!(a.pass());
        for e in &a.entries {
            assert!(e.mod_orbit_rank <= e.bound);
        }
    }
}
