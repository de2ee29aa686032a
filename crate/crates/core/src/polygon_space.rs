//! Closed spatial polygons with fixed side lengths, modulo translations.
//!
//! A point is the list of edge vectors `p(f_i)` with `|p(f_i)| = ℓ(f_i)` and
//! `Σ p(f_i) = 0`. Tangent vectors satisfy the linearized equations. The skew
//! form [`omega`] is the weighted sum of the area forms of the edge spheres.

use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector, Matrix3};
use rand::Rng;

use crate::numerics::{self, NumericsError, Tolerance, Vec3};

/// Relative tolerance on the defining equations of a polygon point.
pub const POINT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolygonError {
    #[error("a polygon needs at least one edge")]
    Empty,
    #[error("edge {index} has invalid length {length}")]
    BadLength { index: usize, length: f64 },
    #[error("edge {index} is at least as long as all other edges together")]
    Degenerate { index: usize },
    #[error("expected {expected} vectors, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("closure projection did not converge")]
    SamplingFailed,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Cyclically ordered edges `f_1 … f_k` with positive lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePolygon {
    lengths: Vec<f64>,
}

impl SamplePolygon {
    /// Rejects non-positive lengths and polygons where one side is at least
    /// the sum of the others; such length vectors admit at most one shape.
    pub fn new(lengths: Vec<f64>) -> Result<Self, PolygonError> {
        if lengths.is_empty() {
            return Err(PolygonError::Empty);
        }
        for (index, &length) in lengths.iter().enumerate() {
            if !(length.is_finite() && length > 0.0) {
                return Err(PolygonError::BadLength { index, length });
            }
        }
        let total: f64 = lengths.iter().sum();
        if let Some(index) = lengths.iter().position(|&l| l >= total - l) {
            return Err(PolygonError::Degenerate { index });
        }
        Ok(Self { lengths })
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn perimeter(&self) -> f64 {
        self.lengths.iter().sum()
    }

    fn check_size(&self, got: usize) -> Result<(), PolygonError> {
        if got == self.len() {
            Ok(())
        } else {
            Err(PolygonError::SizeMismatch { expected: self.len(), got })
        }
    }
}

/// Edge vectors of a polygon, one per `f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonPoint(pub Vec<Vec3>);

/// A candidate tangent vector: one 3-vector per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonTangent(pub Vec<Vec3>);

fn flatten(v: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(v.len() * 3, v.iter().flat_map(|x| x.iter().copied()))
}

fn unflatten(v: &DVector<f64>) -> Vec<Vec3> {
    (0..v.len() / 3).map(|i| Vec3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2])).collect()
}

impl PolygonPoint {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        flatten(&self.0)
    }
}

impl PolygonTangent {
    pub fn zeros(k: usize) -> Self {
        Self(alloc::vec![Vec3::zeros(); k])
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        Self(unflatten(v))
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        flatten(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.to_dvector().norm()
    }
}

/// An element of `so(3)`, stored as an antisymmetric 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewGenerator(Matrix3<f64>);

impl SkewGenerator {
    /// Antisymmetric part of `m`; `m` itself is expected to be antisymmetric
    /// up to rounding.
    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        Self((m - m.transpose()) * 0.5)
    }

    /// The generator `v ↦ w × v`.
    pub fn from_axial(w: Vec3) -> Self {
        Self(w.cross_matrix())
    }

    pub fn axial(&self) -> Vec3 {
        Vec3::new(self.0[(2, 1)], self.0[(0, 2)], self.0[(1, 0)])
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotations about the three coordinate axes.
    pub fn standard() -> [Self; 3] {
        [Self::from_axial(Vec3::x()), Self::from_axial(Vec3::y()), Self::from_axial(Vec3::z())]
    }

    pub fn zero() -> Self {
        Self(Matrix3::zeros())
    }
}

/// Defects of the defining equations at a candidate point.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonResidual {
    /// `⟨p(f_i), p(f_i)⟩ − ℓ(f_i)²`.
    pub length_defects: Vec<f64>,
    /// `Σ p(f_i)`.
    pub closure_defect: Vec3,
}

impl PolygonResidual {
    /// All defects within [`POINT_TOLERANCE`] relative to the lengths.
    pub fn accepted(&self, polygon: &SamplePolygon) -> bool {
        self.length_defects
            .iter()
            .zip(polygon.lengths())
            .all(|(d, l)| d.abs() <= POINT_TOLERANCE * l * l)
            && self.closure_defect.norm() <= POINT_TOLERANCE * polygon.perimeter()
    }
}

pub fn residual(polygon: &SamplePolygon, p: &PolygonPoint) -> Result<PolygonResidual, PolygonError> {
    polygon.check_size(p.len())?;
    let length_defects = p.0.iter().zip(polygon.lengths()).map(|(v, l)| v.norm_squared() - l * l).collect();
    let closure_defect = p.0.iter().sum();
    Ok(PolygonResidual { length_defects, closure_defect })
}

/// Jacobian of the defining equations, `(k + 3) × 3k`, with the factor 2 of
/// the length rows dropped.
pub fn jacobian(p: &PolygonPoint) -> DMatrix<f64> {
    let k = p.len();
    let mut j = DMatrix::zeros(k + 3, 3 * k);
    for (i, v) in p.0.iter().enumerate() {
        for a in 0..3 {
            j[(i, 3 * i + a)] = v[a];
            j[(k + a, 3 * i + a)] = 1.0;
        }
    }
    j
}

/// Tangent-equation defects of `t` at `p`: `(max |⟨t_i, p_i⟩| / ℓ_i, |Σ t_i|)`.
pub fn tangent_defect(polygon: &SamplePolygon, p: &PolygonPoint, t: &PolygonTangent) -> Result<(f64, f64), PolygonError> {
    polygon.check_size(p.len())?;
    polygon.check_size(t.0.len())?;
    let orth = t
        .0
        .iter()
        .zip(&p.0)
        .zip(polygon.lengths())
        .map(|((ti, pi), l)| (ti.dot(pi) / l).abs())
        .fold(0.0, f64::max);
    let closure: Vec3 = t.0.iter().sum();
    Ok((orth, closure.norm()))
}

/// Orthonormal basis of the Zariski tangent space at `p`.
pub fn tangent_basis(polygon: &SamplePolygon, p: &PolygonPoint, tol: &Tolerance) -> Result<Vec<PolygonTangent>, PolygonError> {
    polygon.check_size(p.len())?;
    let basis = numerics::kernel_basis(&jacobian(p), tol)?;
    Ok(basis.iter().map(PolygonTangent::from_dvector).collect())
}

/// Singular points are exactly those with all edge vectors collinear.
pub fn is_singular(p: &PolygonPoint, tol: &Tolerance) -> bool {
    let m = DMatrix::from_fn(3, p.len(), |r, c| p.0[c][r]);
    numerics::numerical_rank(&m, tol).map_or(true, |r| r <= 1)
}

/// Images of the three coordinate rotation generators.
pub fn so3_orbit_tangents(p: &PolygonPoint) -> [PolygonTangent; 3] {
    SkewGenerator::standard().map(|a| PolygonTangent(p.0.iter().map(|v| a.apply(v)).collect()))
}

/// The summands `det[t_j, t′_j, p_j] / ℓ_j²` of `ω_p(t, t′)`.
pub fn omega_summands(
    polygon: &SamplePolygon,
    p: &PolygonPoint,
    t: &PolygonTangent,
    t2: &PolygonTangent,
) -> Result<Vec<f64>, PolygonError> {
    polygon.check_size(p.len())?;
    polygon.check_size(t.0.len())?;
    polygon.check_size(t2.0.len())?;
    Ok((0..p.len())
        .map(|j| {
            let l = polygon.lengths()[j];
            numerics::triple_product(&t.0[j], &t2.0[j], &p.0[j]) / (l * l)
        })
        .collect())
}

pub fn omega(polygon: &SamplePolygon, p: &PolygonPoint, t: &PolygonTangent, t2: &PolygonTangent) -> Result<f64, PolygonError> {
    Ok(omega_summands(polygon, p, t, t2)?.iter().sum())
}

/// Gram matrix `G_ij = ω(b_i, b_j)`.
pub fn omega_gram(polygon: &SamplePolygon, p: &PolygonPoint, basis: &[PolygonTangent]) -> Result<DMatrix<f64>, PolygonError> {
    let n = basis.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let w = omega(polygon, p, &basis[i], &basis[j])?;
            g[(i, j)] = w;
            g[(j, i)] = -w;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaKernelReport {
    pub singular: bool,
    pub tangent_dim: usize,
    pub gram_rank: usize,
    pub kernel_dim: usize,
    pub expected_kernel_dim: usize,
    /// Largest `|ω(b_i, o/|o|)|` or tangent-equation defect over the basis
    /// `b_i` and the nonzero orbit tangents `o`.
    pub orbit_residual: f64,
    pub pass: bool,
}

/// Orbit residual budget of [`omega_kernel_check`].
pub const ORBIT_RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Checks that the kernel of `ω` on the tangent space is the orbit tangent
/// space: dimension 3 at smooth points, 2 at singular ones.
pub fn omega_kernel_check(polygon: &SamplePolygon, p: &PolygonPoint, tol: &Tolerance) -> Result<OmegaKernelReport, PolygonError> {
    let basis = tangent_basis(polygon, p, tol)?;
    let gram = omega_gram(polygon, p, &basis)?;
    let gram_rank = numerics::numerical_rank(&gram, tol)?;
    let singular = is_singular(p, tol);
    let expected_kernel_dim = if singular { 2 } else { 3 };
    let mut orbit_residual: f64 = 0.0;
    for o in so3_orbit_tangents(p) {
        let n = o.norm();
        if n <= tol.abs_eps.max(1e-12 * polygon.perimeter()) {
            continue;
        }
        let unit = PolygonTangent(o.0.iter().map(|v| v / n).collect());
        let (orth, closure) = tangent_defect(polygon, p, &unit)?;
        orbit_residual = orbit_residual.max(orth).max(closure);
        for b in &basis {
            orbit_residual = orbit_residual.max(omega(polygon, p, b, &unit)?.abs());
        }
    }
    let kernel_dim = basis.len() - gram_rank;
    Ok(OmegaKernelReport {
        singular,
        tangent_dim: basis.len(),
        gram_rank,
        kernel_dim,
        expected_kernel_dim,
        orbit_residual,
        pass: kernel_dim == expected_kernel_dim && orbit_residual <= ORBIT_RESIDUAL_TOLERANCE,
    })
}

/// Uniform random unit vector by rejection from the cube.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n2 = v.norm_squared();
        if n2 > 1e-4 && n2 <= 1.0 {
            return v / ComplexField::sqrt(n2);
        }
    }
}

/// Newton iterations allowed per draw in [`sample_point`].
pub const SAMPLING_ITERATIONS: usize = 100;
const SAMPLING_DRAWS: usize = 16;

/// Samples a point of the polygon space: random directions scaled to the
/// side lengths, projected onto the closure condition by minimum-norm Newton
/// steps. A draw that does not converge within [`SAMPLING_ITERATIONS`] is
/// rejected and redrawn.
pub fn sample_point<R: Rng + ?Sized>(polygon: &SamplePolygon, rng: &mut R, tol: &Tolerance) -> Result<PolygonPoint, PolygonError> {
    let k = polygon.len();
    for _ in 0..SAMPLING_DRAWS {
        let mut x = flatten(&polygon.lengths().iter().map(|&l| random_unit(rng) * l).collect::<Vec<_>>());
        for _ in 0..SAMPLING_ITERATIONS {
            let p = PolygonPoint(unflatten(&x));
            let r = residual(polygon, &p)?;
            let done = r
                .length_defects
                .iter()
                .zip(polygon.lengths())
                .all(|(d, l)| d.abs() <= 1e-3 * POINT_TOLERANCE * l * l)
                && r.closure_defect.norm() <= 1e-3 * POINT_TOLERANCE * polygon.perimeter();
            if done {
                return Ok(p);
            }
            let mut c = DVector::zeros(k + 3);
            for i in 0..k {
                c[i] = r.length_defects[i];
            }
            for a in 0..3 {
                c[k + a] = r.closure_defect[a];
            }
            let mut jac = jacobian(&p);
            jac.rows_mut(0, k).scale_mut(2.0);
            let step = numerics::least_squares(&jac, &c, tol)?;
            x -= step;
        }
    }
    Err(PolygonError::SamplingFailed)
}
