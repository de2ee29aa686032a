//! Bar-joint rigidity of realized graph-surfaces: the rigidity matrix,
//! infinitesimal rigidity of closed spheres, boundary rigidity of disks, the
//! rank of the boundary map and the Lagrangian dimension count.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::numerics::{self, NumericsError, Tolerance, Vec3};
use crate::polygon_space::{self, PolygonError, PolygonPoint, PolygonTangent};
use crate::polyhedron_space::{self, IsotropyOptions, IsotropyReport, PolyhedronError};
use crate::surface::{GraphSurface, SurfaceError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RigidityError {
    #[error("need at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("surface has a boundary; a closed surface is required")]
    NotClosed,
    #[error("expected {expected} vertex positions, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("not a disk: {0}")]
    NotADisk(SurfaceError),
    #[error("boundary polygon is collinear; audit skipped")]
    SingularBoundary,
    #[error("counting identity 3|T| = 2|E| - |F| fails")]
    CountingIdentity,
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Polyhedron(#[from] PolyhedronError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn check_positions(surface: &GraphSurface, positions: &[Vec3]) -> Result<(), RigidityError> {
    let expected = surface.vertices().len();
    if positions.len() == expected {
        Ok(())
    } else {
        Err(RigidityError::SizeMismatch { expected, got: positions.len() })
    }
}

/// Jacobian of the squared edge lengths at `positions`, without the factor 2:
/// one row per edge `(u, v)` holding `x_u − x_v` in `u`'s block and its
/// negation in `v`'s block.
pub fn rigidity_matrix(surface: &GraphSurface, positions: &[Vec3]) -> DMatrix<f64> {
    let ends = surface.edge_endpoints();
    let mut m = DMatrix::zeros(ends.len(), 3 * positions.len());
    for (row, &(u, v)) in ends.iter().enumerate() {
        let d = positions[u] - positions[v];
        for a in 0..3 {
            m[(row, 3 * u + a)] = d[a];
            m[(row, 3 * v + a)] = -d[a];
        }
    }
    m
}

/// Three translations and three rotation fields `x ↦ w × x`, as columns.
pub fn trivial_motions(positions: &[Vec3]) -> DMatrix<f64> {
    let n = positions.len();
    let mut m = DMatrix::zeros(3 * n, 6);
    for (i, x) in positions.iter().enumerate() {
        for a in 0..3 {
            m[(3 * i + a, a)] = 1.0;
            let mut w = Vec3::zeros();
            w[a] = 1.0;
            let field = w.cross(x);
            for b in 0..3 {
                m[(3 * i + b, 3 + a)] = field[b];
            }
        }
    }
    m
}

pub fn trivial_motion_dim(positions: &[Vec3], tol: &Tolerance) -> Result<usize, RigidityError> {
    Ok(numerics::numerical_rank(&trivial_motions(positions), tol)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RigidityVerdict {
    pub kernel_dim: usize,
    pub trivial_dim: usize,
    pub rigid: bool,
}

/// Infinitesimal rigidity of a closed surface: the kernel of the rigidity
/// matrix is exactly 6-dimensional.
pub fn infinitesimally_rigid(surface: &GraphSurface, positions: &[Vec3], tol: &Tolerance) -> Result<RigidityVerdict, RigidityError> {
    check_positions(surface, positions)?;
    if !surface.is_closed() {
        return Err(RigidityError::NotClosed);
    }
    if positions.len() < 3 {
        return Err(RigidityError::TooFewVertices(positions.len()));
    }
    let m = rigidity_matrix(surface, positions);
    let kernel_dim = m.ncols() - numerics::numerical_rank(&m, tol)?;
    let trivial_dim = trivial_motion_dim(positions, tol)?;
    Ok(RigidityVerdict { kernel_dim, trivial_dim, rigid: kernel_dim == 6 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryRigidity {
    /// Dimension of the edge-vector tangent space.
    pub tangent_dim: usize,
    /// Dimension of the kernel of `dδ` on that tangent space.
    pub direct_kernel_dim: usize,
    pub direct: bool,
    /// Kernel dimension of the rigidity matrix of the cone closure.
    pub cone_kernel_dim: usize,
    pub cone: bool,
}

impl BoundaryRigidity {
    /// A rigid cone closure must imply the direct certificate.
    pub fn implication_holds(&self) -> bool {
        !self.cone || self.direct
    }
}

fn delta_images(surface: &GraphSurface, positions: &[Vec3], tol: &Tolerance) -> Result<(PolygonPoint, Vec<PolygonTangent>), RigidityError> {
    let q = polyhedron_space::PolyhedronPoint::from_positions(surface, positions);
    let basis = polyhedron_space::tangent_basis(surface, &q, tol)?;
    let p = polyhedron_space::boundary_point(surface, &q)?;
    let images = basis.iter().map(|b| polyhedron_space::d_delta(surface, b)).collect::<Result<_, _>>()?;
    Ok((p, images))
}

fn tangent_columns(images: &[PolygonTangent], k: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = images.iter().map(|t| t.to_dvector()).collect();
    numerics::columns_to_matrix(3 * k, &cols)
}

/// Both certificates of boundary rigidity for a realized disk.
pub fn boundary_rigid(surface: &GraphSurface, positions: &[Vec3], tol: &Tolerance) -> Result<BoundaryRigidity, RigidityError> {
    check_positions(surface, positions)?;
    surface.check_disk().map_err(RigidityError::NotADisk)?;
    let (_, images) = delta_images(surface, positions, tol)?;
    let k = surface.boundary_walk().len();
    let rank = numerics::numerical_rank(&tangent_columns(&images, k), tol)?;
    let direct_kernel_dim = images.len() - rank;
    let cone = surface.cone_close()?;
    let verdict = infinitesimally_rigid(&cone.surface, positions, tol)?;
    Ok(BoundaryRigidity {
        tangent_dim: images.len(),
        direct_kernel_dim,
        direct: direct_kernel_dim == 0,
        cone_kernel_dim: verdict.kernel_dim,
        cone: verdict.rigid,
    })
}

/// Rank of the boundary map at vertex level: the velocities of the boundary
/// vertices over the kernel of the rigidity matrix, translations included.
pub fn delta_image_rank(surface: &GraphSurface, positions: &[Vec3], tol: &Tolerance) -> Result<usize, RigidityError> {
    check_positions(surface, positions)?;
    surface.check_disk().map_err(RigidityError::NotADisk)?;
    let kernel = numerics::kernel_basis(&rigidity_matrix(surface, positions), tol)?;
    let corners: Vec<usize> = surface
        .boundary_walk()
        .iter()
        .map(|&g| surface.vertex_index(surface.tail(g)).expect("valid"))
        .collect();
    let mut m = DMatrix::zeros(3 * corners.len(), kernel.len());
    for (j, v) in kernel.iter().enumerate() {
        for (i, &c) in corners.iter().enumerate() {
            for a in 0..3 {
                m[(3 * i + a, j)] = v[3 * c + a];
            }
        }
    }
    Ok(numerics::numerical_rank(&m, tol)?)
}

/// `rank([images | orbit]) − rank(orbit)`: the rank of a family of polygon
/// tangents modulo the rotation orbit through `p`.
pub fn mod_orbit_rank(p: &PolygonPoint, images: &[PolygonTangent], tol: &Tolerance) -> Result<usize, RigidityError> {
    let k = p.0.len();
    let orbit = polygon_space::so3_orbit_tangents(p);
    let o = tangent_columns(&orbit, k);
    let mut all: Vec<PolygonTangent> = images.to_vec();
    all.extend(orbit);
    let joint = numerics::numerical_rank(&tangent_columns(&all, k), tol)?;
    Ok(joint - numerics::numerical_rank(&o, tol)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianReport {
    pub boundary_len: usize,
    pub tangent_dim: usize,
    pub vertex_rank: usize,
    pub mod_orbit_rank: usize,
    /// `|F| − 3`, half the dimension of the boundary moduli tangent space.
    pub half_dim: usize,
    pub isotropy: IsotropyReport,
    pub pass: bool,
}

/// Rank half the boundary moduli dimension and isotropic: the image of a
/// generic disk is Lagrangian.
pub fn lagrangian_audit(surface: &GraphSurface, positions: &[Vec3], tol: &Tolerance, options: &IsotropyOptions) -> Result<LagrangianReport, RigidityError> {
    check_positions(surface, positions)?;
    surface.check_disk().map_err(RigidityError::NotADisk)?;
    if !surface.validate()?.counting_identity {
        return Err(RigidityError::CountingIdentity);
    }
    let (metric, q) = polyhedron_space::induced_metric(surface, positions)?;
    let p = polyhedron_space::boundary_point(surface, &q)?;
    if polygon_space::is_singular(&p, tol) {
        return Err(RigidityError::SingularBoundary);
    }
    let (_, images) = delta_images(surface, positions, tol)?;
    let rank = mod_orbit_rank(&p, &images, tol)?;
    let vertex_rank = delta_image_rank(surface, positions, tol)?;
    let isotropy = polyhedron_space::isotropy_audit(&metric, &q, tol, options)?;
    let k = surface.boundary_walk().len();
    let half_dim = k - 3;
    let pass = rank == half_dim && isotropy.pass;
    Ok(LagrangianReport { boundary_len: k, tangent_dim: images.len(), vertex_rank, mod_orbit_rank: rank, half_dim, isotropy, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::generate::{self, TriangleDisk};
    use crate::surface::{Edge, EdgeId, OrientedEdge, VertexId};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kernel_dim(m: &DMatrix<f64>) -> usize {
        m.ncols() - numerics::numerical_rank(m, &Tolerance::default()).unwrap()
    }

    #[test]
    fn single_edge_matrix() {
        let s = GraphSurface::new(
            vec![VertexId(0), VertexId(1)],
            vec![Edge { id: EdgeId(1), tail: VertexId(0), head: VertexId(1) }],
            vec![],
            Some(vec![OrientedEdge::forward(1), OrientedEdge::backward(1)]),
        )
        .unwrap();
        let m = rigidity_matrix(&s, &[Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0)]);
        assert_eq!(m.shape(), (1, 6));
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, -2.0, 0.0, 0.0, 2.0]);
        assert_eq!(kernel_dim(&m), 5);
    }

    #[test]
    fn triangle_kernels() {
        let s = fixtures::single_triangle();
        let flat = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let m = rigidity_matrix(&s, &flat);
        assert_eq!(m.shape(), (3, 9));
        assert_eq!(kernel_dim(&m), 6);
        // every row annihilates every trivial motion
        assert!((&m * trivial_motions(&flat)).amax() < 1e-15);
        let line = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)];
        assert_eq!(kernel_dim(&rigidity_matrix(&s, &line)), 7);
        assert_eq!(trivial_motion_dim(&line, &Tolerance::default()).unwrap(), 5);
    }

    #[test]
    fn tetrahedron_is_rigid() {
        let sphere = fixtures::tetrahedron_minus_face().cone_close().unwrap().surface;
        let v = infinitesimally_rigid(&sphere, &fixtures::regular_tetrahedron(), &Tolerance::default()).unwrap();
        assert_eq!(v, RigidityVerdict { kernel_dim: 6, trivial_dim: 6, rigid: true });
    }

    #[test]
    fn open_surface_rejected() {
        let s = fixtures::single_triangle();
        let x = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert_eq!(infinitesimally_rigid(&s, &x, &Tolerance::default()).unwrap_err(), RigidityError::NotClosed);
        assert!(matches!(
            boundary_rigid(&fixtures::thickened_tree(), &[Vec3::zeros(); 5], &Tolerance::default()).unwrap_err(),
            RigidityError::NotADisk(_)
        ));
    }

    #[test]
    fn coplanar_sphere_flexes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = TriangleDisk::random(&mut rng, 6).to_surface().unwrap();
        let sphere = s.cone_close().unwrap().surface;
        let mut x = generate::random_positions(&mut rng, &s).unwrap();
        x.iter_mut().for_each(|p| p.z = 0.0);
        assert!(x.len() >= 5);
        let v = infinitesimally_rigid(&sphere, &x, &Tolerance::default()).unwrap();
        assert!(!v.rigid && v.kernel_dim > 6);
    }

    #[test]
    fn single_triangle_counts() {
        let s = fixtures::single_triangle();
        let x = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.2, 0.9, 0.0)];
        let tol = Tolerance::default();
        let b = boundary_rigid(&s, &x, &tol).unwrap();
        assert!(b.direct && b.cone && b.implication_holds());
        assert_eq!(delta_image_rank(&s, &x, &tol).unwrap(), 6);
        let l = lagrangian_audit(&s, &x, &tol, &IsotropyOptions::default()).unwrap();
        assert_eq!((l.mod_orbit_rank, l.half_dim, l.tangent_dim), (0, 0, 3));
        assert!(l.pass);
    }

    #[test]
    fn generic_disk_counts() {
        let tol = Tolerance::default();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = TriangleDisk::random(&mut rng, 1 + seed as usize % 14).to_surface().unwrap();
            let x = generate::random_positions(&mut rng, &s).unwrap();
            let k = s.boundary_walk().len();
            let b = boundary_rigid(&s, &x, &tol).unwrap();
            assert!(b.direct && b.cone);
            assert_eq!(b.tangent_dim, k);
            assert_eq!(delta_image_rank(&s, &x, &tol).unwrap(), k + 3);
            let l = lagrangian_audit(&s, &x, &tol, &IsotropyOptions::default()).unwrap();
            assert_eq!(l.mod_orbit_rank, k - 3);
            assert_eq!(l.tangent_dim - 3, l.mod_orbit_rank);
            assert!(l.pass);
        }
    }

    #[test]
    fn collinear_boundary_is_skipped() {
        // fan around vertex 0 whose boundary folds back onto the x axis
        let s = TriangleDisk::from_triangles(5, vec![[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]]).to_surface().unwrap();
        let x = [
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ];
        let err = lagrangian_audit(&s, &x, &Tolerance::default(), &IsotropyOptions::default()).unwrap_err();
        assert_eq!(err, RigidityError::SingularBoundary);
    }
}
