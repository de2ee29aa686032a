//! Audit runners behind the command line.
//!
//! Randomized audits draw trial `i` from a ChaCha8 stream `i` of the master
//! seed, so each trial is reproducible on its own and the report does not
//! depend on execution order. A failing trial is re-examined once at the
//! tightened tolerance; the record keeps the second verdict and says so.

use std::collections::BTreeMap;
use std::path::PathBuf;

use polyflex_core::dome::{self, DomeStatus};
use polyflex_core::generate::{self, TriangleDisk};
use polyflex_core::numerics::{NumericsError, Tolerance, Vec3};
use polyflex_core::polygon_space::{self, PolygonError};
use polyflex_core::polyhedron_space::{self, ChainReport, IsotropyOptions, PolyhedronError, PolyhedronPoint};
use polyflex_core::rigidity::{self, RigidityError};
use polyflex_core::surface::{GraphSurface, MetricSurface, SurfaceError};
use polyflex_core::fixtures;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::format::{FormatError, PolygonDoc, RealizationDoc, SurfaceDoc};
use crate::report::{
    AuditReport, BoundaryReport, Certificates, ChainSummary, CollapseReport, CollapseStep, DeltaRow, Repeat, Rp2Report, TrialRecord,
    TrialStatus,
};

pub const DEFAULT_MAX_TRIANGLES: usize = 20;
pub const DOME_MAX_TRIANGLES: usize = 8;
pub const ISOTROPY_TRIALS: usize = 50;
pub const RIGIDITY_TRIALS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("max_triangles must be at least 1")]
    NoTriangles,
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error(transparent)]
    Polyhedron(#[from] PolyhedronError),
    #[error(transparent)]
    Rigidity(#[from] RigidityError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub tol: Tolerance,
    pub max_triangles: usize,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(seed: u64, trials: usize, tol: Tolerance, max_triangles: usize, output: Option<PathBuf>) -> Result<Self, RunError> {
        if trials == 0 {
            return Err(RunError::NoTrials);
        }
        if max_triangles == 0 {
            return Err(RunError::NoTriangles);
        }
        Ok(RunConfig { seed, trials, tol, max_triangles, output })
    }

    pub fn with_seed(seed: u64, trials: usize, max_triangles: usize) -> Result<Self, RunError> {
        Self::new(seed, trials, Tolerance::default(), max_triangles, None)
    }

    fn report(&self, command: &str, max_triangles: Option<usize>, records: Vec<TrialRecord>) -> AuditReport {
        AuditReport::new(command, self.seed, self.tol.rel_eps, self.tol.abs_eps, max_triangles, records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuditFlags {
    pub allow_nonorientable: bool,
    pub verify_collapse_chain: bool,
}

impl AuditFlags {
    pub fn options(&self) -> IsotropyOptions {
        IsotropyOptions {
            allow_nonorientable: self.allow_nonorientable,
            verify_collapse_chain: self.verify_collapse_chain,
            ..IsotropyOptions::default()
        }
    }
}

/// Generator for trial `trial` of the run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// A parsed surface file together with its source text.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub doc: SurfaceDoc,
    pub text: String,
    pub surface: GraphSurface,
    pub hash: String,
}

impl Loaded {
    pub fn parse(text: String) -> Result<Self, FormatError> {
        let doc = SurfaceDoc::parse(&text)?;
        let surface = doc.surface(Some(&text))?;
        let hash = doc.hash();
        Ok(Loaded { doc, text, surface, hash })
    }

    pub fn from_doc(doc: SurfaceDoc) -> Result<Self, FormatError> {
        Self::parse(doc.to_text())
    }

    /// Lengths from the file, or else induced by `q`.
    pub fn metric(&self, q: Option<&PolyhedronPoint>) -> Result<Option<MetricSurface>, RunError> {
        if self.doc.lengths.is_some() {
            return Ok(Some(self.doc.metric(Some(&self.text))?));
        }
        match q {
            Some(q) => Ok(Some(MetricSurface::new(self.surface.clone(), q.lengths())?)),
            None => Ok(None),
        }
    }
}

fn counts(s: &GraphSurface) -> [usize; 4] {
    [s.vertices().len(), s.edges().len(), s.triangles().len(), s.boundary_walk().len()]
}

fn chain_summary(c: &ChainReport) -> ChainSummary {
    ChainSummary {
        steps: c.steps.len(),
        max_unchanged_gap: c.steps.iter().fold(0.0, |m, s| m.max(s.max_unchanged_gap)),
        max_replaced: c.steps.iter().fold(0.0, |m, s| m.max(s.max_replaced)),
        terminal_pair_gap: c.terminal_pair_gap,
        terminal_same_orientation_pairs: c.terminal_same_orientation_pairs,
        scale: c.scale,
        pass: c.pass,
    }
}

type Check<'a> = dyn Fn(&mut TrialRecord, &Tolerance) -> Result<(), RunError> + 'a;

/// Runs `check`, and once more at the tightened tolerance if it fails.
fn examine(record: TrialRecord, tol: &Tolerance, check: &Check) -> TrialRecord {
    let attempt = |tol: &Tolerance| {
        let mut r = record.clone();
        if let Err(e) = check(&mut r, tol) {
            r.error = Some(e.to_string());
            r.pass = false;
        }
        r
    };
    let first = attempt(tol);
    if first.pass {
        return first;
    }
    let mut again = attempt(&tol.tightened());
    again.reexamined = true;
    again
}

fn isotropy_check<'a>(metric: &'a MetricSurface, q: &'a PolyhedronPoint, flags: AuditFlags) -> impl Fn(&mut TrialRecord, &Tolerance) -> Result<(), RunError> + 'a {
    move |r, tol| {
        let audit = polyhedron_space::isotropy_audit(metric, q, tol, &flags.options())?;
        r.tangent_dim = Some(audit.tangent_dim);
        r.max_omega = Some(audit.max_abs_omega);
        r.threshold = Some(audit.threshold);
        r.chain = audit.chain.as_ref().map(chain_summary);
        r.pass = audit.pass;
        Ok(())
    }
}

fn rigidity_check<'a>(s: &'a GraphSurface, x: &'a [Vec3]) -> impl Fn(&mut TrialRecord, &Tolerance) -> Result<(), RunError> + 'a {
    move |r, tol| {
        if !s.validate()?.counting_identity {
            return Err(RigidityError::CountingIdentity.into());
        }
        let b = rigidity::boundary_rigid(s, x, tol)?;
        let rank = rigidity::delta_image_rank(s, x, tol)?;
        let c = Certificates {
            direct: b.direct,
            direct_kernel_dim: b.direct_kernel_dim,
            cone: b.cone,
            cone_kernel_dim: b.cone_kernel_dim,
            implication: b.implication_holds(),
        };
        r.tangent_dim = Some(b.tangent_dim);
        r.delta_rank = Some(rank);
        r.certificates = Some(c);
        r.pass = c.direct && c.cone && c.implication && rank == s.boundary_walk().len() + 3;
        Ok(())
    }
}

fn lagrangian_check<'a>(s: &'a GraphSurface, x: &'a [Vec3], flags: AuditFlags) -> impl Fn(&mut TrialRecord, &Tolerance) -> Result<(), RunError> + 'a {
    move |r, tol| {
        let audit = match rigidity::lagrangian_audit(s, x, tol, &flags.options()) {
            Err(RigidityError::SingularBoundary) => {
                r.status = TrialStatus::SingularBoundary;
                r.pass = true;
                return Ok(());
            }
            other => other?,
        };
        r.tangent_dim = Some(audit.tangent_dim);
        r.delta_rank = Some(audit.vertex_rank);
        r.mod_orbit_rank = Some(audit.mod_orbit_rank);
        r.bound = Some(audit.half_dim);
        r.max_omega = Some(audit.isotropy.max_abs_omega);
        r.threshold = Some(audit.isotropy.threshold);
        r.chain = audit.isotropy.chain.as_ref().map(chain_summary);
        r.pass = audit.pass && audit.vertex_rank == audit.boundary_len + 3;
        Ok(())
    }
}

/// A random disk with at most `max_triangles` faces and random vertex
/// positions; `None` positions when every draw had a flat triangle.
pub fn random_sample(seed: u64, trial: usize, max_triangles: usize) -> Result<(GraphSurface, Option<Vec<Vec3>>), RunError> {
    let mut rng = trial_rng(seed, trial);
    let n = rng.random_range(1..=max_triangles);
    let surface = TriangleDisk::random(&mut rng, n).to_surface()?;
    let positions = generate::random_positions(&mut rng, &surface);
    Ok((surface, positions))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Audit {
    Isotropy,
    Rigidity,
    Lagrangian,
}

impl Audit {
    fn name(self) -> &'static str {
        match self {
            Audit::Isotropy => "isotropy",
            Audit::Rigidity => "rigidity",
            Audit::Lagrangian => "lagrangian",
        }
    }
}

fn random_trial(config: &RunConfig, flags: AuditFlags, audit: Audit, trial: usize) -> Result<TrialRecord, RunError> {
    let (s, x) = random_sample(config.seed, trial, config.max_triangles)?;
    let mut record = TrialRecord::new(trial, config.seed, SurfaceDoc::from_surface(&s, None).hash(), counts(&s));
    let Some(x) = x else {
        record.status = TrialStatus::DegenerateSample;
        return Ok(record);
    };
    Ok(match audit {
        Audit::Isotropy => {
            let (metric, q) = polyhedron_space::induced_metric(&s, &x)?;
            let record = examine(record, &config.tol, &isotropy_check(&metric, &q, flags));
            record
        }
        Audit::Rigidity => examine(record, &config.tol, &rigidity_check(&s, &x)),
        Audit::Lagrangian => examine(record, &config.tol, &lagrangian_check(&s, &x, flags)),
    })
}

fn random_audit(config: &RunConfig, flags: AuditFlags, audit: Audit) -> Result<AuditReport, RunError> {
    let records = (0..config.trials).map(|t| random_trial(config, flags, audit, t)).collect::<Result<Vec<_>, _>>()?;
    Ok(config.report(audit.name(), Some(config.max_triangles), records))
}

pub fn isotropy_random(config: &RunConfig, flags: AuditFlags) -> Result<AuditReport, RunError> {
    random_audit(config, flags, Audit::Isotropy)
}

pub fn rigidity_random(config: &RunConfig) -> Result<AuditReport, RunError> {
    random_audit(config, AuditFlags::default(), Audit::Rigidity)
}

pub fn lagrangian_random(config: &RunConfig, flags: AuditFlags) -> Result<AuditReport, RunError> {
    random_audit(config, flags, Audit::Lagrangian)
}

fn file_record(config: &RunConfig, loaded: &Loaded) -> TrialRecord {
    TrialRecord::new(0, config.seed, loaded.hash.clone(), counts(&loaded.surface))
}

/// Vertex positions of a realization, reconstructed from edge vectors when
/// only those are given.
pub fn positions(loaded: &Loaded, realization: &RealizationDoc) -> Result<Vec<Vec3>, RunError> {
    if let Some(x) = realization.vertex_positions(&loaded.surface)? {
        return Ok(x);
    }
    let q = realization.point(&loaded.surface)?;
    Ok(polyhedron_space::reconstruct(&loaded.surface, &q, loaded.surface.vertices()[0])?)
}

pub fn isotropy_file(config: &RunConfig, flags: AuditFlags, loaded: &Loaded, realization: &RealizationDoc) -> Result<AuditReport, RunError> {
    if !loaded.surface.is_orientable() && !flags.allow_nonorientable {
        return Err(PolyhedronError::NotOrientable.into());
    }
    let q = realization.point(&loaded.surface)?;
    let metric = loaded.metric(Some(&q))?.expect("lengths available");
    let residual = polyhedron_space::residual(&metric, &q)?;
    if !residual.accepted(&metric) {
        return Err(RunError::Input(format!("realization does not satisfy the surface equations (defect {:.3e})", residual.max_defect())));
    }
    let record = examine(file_record(config, loaded), &config.tol, &isotropy_check(&metric, &q, flags));
    Ok(config.report("isotropy", None, vec![record]))
}

pub fn rigidity_file(config: &RunConfig, loaded: &Loaded, realization: &RealizationDoc) -> Result<AuditReport, RunError> {
    let x = positions(loaded, realization)?;
    let record = examine(file_record(config, loaded), &config.tol, &rigidity_check(&loaded.surface, &x));
    Ok(config.report("rigidity", None, vec![record]))
}

pub fn lagrangian_file(config: &RunConfig, flags: AuditFlags, loaded: &Loaded, realization: &RealizationDoc) -> Result<AuditReport, RunError> {
    let x = positions(loaded, realization)?;
    let record = examine(file_record(config, loaded), &config.tol, &lagrangian_check(&loaded.surface, &x, flags));
    Ok(config.report("lagrangian", None, vec![record]))
}

/// Every combinatorial disk with at most `config.max_triangles` faces,
/// realized with unit edges; disk `i` uses stream `i` of the seed.
pub fn dome_audit(config: &RunConfig) -> Result<AuditReport, RunError> {
    let mut records = Vec::new();
    for (i, disk) in generate::enumerate_disks(config.max_triangles).iter().enumerate() {
        let s = disk.to_surface()?;
        let mut record = TrialRecord::new(i, config.seed, SurfaceDoc::from_surface(&s, None).hash(), counts(&s));
        let mut rng = trial_rng(config.seed, i);
        match dome::audit_disk(disk, &mut rng, &config.tol) {
            Ok(e) => {
                record.status = match e.status {
                    DomeStatus::Checked => TrialStatus::Checked,
                    DomeStatus::Unrealized => TrialStatus::Unrealized,
                    DomeStatus::SingularBoundary => TrialStatus::SingularBoundary,
                };
                if e.status == DomeStatus::Checked {
                    record.tangent_dim = Some(e.tangent_dim);
                    record.mod_orbit_rank = Some(e.mod_orbit_rank);
                    record.max_omega = Some(e.max_omega);
                }
                record.bound = Some(e.bound);
                record.reexamined = e.reexamined;
                record.pass = e.pass;
            }
            Err(e) => {
                record.error = Some(e.to_string());
                record.pass = false;
            }
        }
        records.push(record);
    }
    Ok(config.report("dome-audit", Some(config.max_triangles), records))
}

/// The square in the projective plane: the two tangent vectors whose
/// pulled-back form does not vanish, and the full audit there.
pub fn rp2_demo(config: &RunConfig) -> Result<Rp2Report, RunError> {
    let metric = fixtures::rp2_metric();
    let s = metric.surface();
    let q = fixtures::rp2_point();
    let (s1, s2) = fixtures::rp2_tangents();
    let polygon = metric.boundary_polygon()?.polygon;
    let p = polyhedron_space::boundary_point(s, &q)?;
    let summands = polygon_space::omega_summands(&polygon, &p, &polyhedron_space::d_delta(s, &s1)?, &polyhedron_space::d_delta(s, &s2)?)?;
    let options = AuditFlags { allow_nonorientable: true, verify_collapse_chain: false }.options();
    let audit = polyhedron_space::isotropy_audit(&metric, &q, &config.tol, &options)?;
    Ok(Rp2Report {
        surface_hash: SurfaceDoc::from_metric(&metric).hash(),
        orientable: s.is_orientable(),
        omega: summands.iter().sum(),
        summands,
        tangent_dim: audit.tangent_dim,
        max_omega: audit.max_abs_omega,
        threshold: audit.threshold,
        pass: audit.pass,
    })
}

/// The walk with its edge table; with a realization, also the boundary
/// polygon it induces.
pub fn boundary(loaded: &Loaded, realization: Option<&RealizationDoc>) -> Result<(BoundaryReport, Option<PolygonDoc>), RunError> {
    let s = &loaded.surface;
    let d = s.validate()?;
    let walk = s.boundary_walk();
    let delta = walk
        .iter()
        .enumerate()
        .map(|(i, &g)| DeltaRow { position: i + 1, edge: g.signed(), tail: s.tail(g).0, head: s.head(g).0 })
        .collect();
    let mut seen: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, g) in walk.iter().enumerate() {
        seen.entry(g.edge.0).or_default().push(i);
    }
    let repeats = seen
        .into_iter()
        .filter(|(_, at)| at.len() > 1)
        .map(|(edge, at)| Repeat {
            edge,
            same_orientation: at.iter().all(|&i| walk[i].forward == walk[at[0]].forward),
            positions: at.iter().map(|i| i + 1).collect(),
        })
        .collect();
    let q = realization.map(|r| r.point(s)).transpose()?;
    let metric = loaded.metric(q.as_ref())?;
    let lengths = match &metric {
        Some(m) => Some(m.boundary_polygon()?.polygon.lengths().to_vec()),
        None => None,
    };
    let polygon = match (&metric, &q) {
        (Some(m), Some(q)) => Some(PolygonDoc::new(&m.boundary_polygon()?.polygon, &polyhedron_space::boundary_point(s, q)?)),
        _ => None,
    };
    let report = BoundaryReport {
        surface_hash: loaded.hash.clone(),
        vertices: d.vertices,
        edges: d.edges,
        triangles: d.triangles,
        boundary_len: d.boundary_len,
        counting_identity: d.counting_identity,
        orientable: d.orientable,
        euler_characteristic: d.euler_characteristic,
        first_betti: d.first_betti,
        walk: walk.iter().map(|g| g.signed()).collect(),
        delta,
        repeats,
        lengths,
        pass: d.counting_identity,
    };
    Ok((report, polygon))
}

/// Collapses at the 1-based walk `position`, or repeatedly at the first
/// collapsible position until no triangle is left.
pub fn collapse(loaded: &Loaded, position: Option<usize>) -> Result<(CollapseReport, SurfaceDoc), RunError> {
    let mut surface = loaded.surface.clone();
    let mut metric = loaded.metric(None)?;
    let mut steps = Vec::new();
    loop {
        let at = match position {
            Some(p) if steps.is_empty() => {
                if p == 0 || p > surface.boundary_walk().len() {
                    return Err(RunError::Input(format!("position {p} is outside the walk 1..={}", surface.boundary_walk().len())));
                }
                p - 1
            }
            Some(_) => break,
            None => match surface.collapsible_positions().first() {
                Some(&i) => i,
                None => break,
            },
        };
        let c = match &metric {
            Some(m) => {
                let (m2, c) = m.collapse(at)?;
                metric = Some(m2);
                c
            }
            None => surface.collapse(at)?,
        };
        surface = c.surface;
        let d = surface.validate()?;
        steps.push(CollapseStep {
            position: at + 1,
            triangle: c.triangle + 1,
            boundary_edge: c.boundary_edge.signed(),
            e: c.e.signed(),
            e_prime: c.e_prime.signed(),
            edges: d.edges,
            triangles: d.triangles,
            boundary_len: d.boundary_len,
            counting_identity: d.counting_identity,
        });
    }
    let doc = SurfaceDoc::from_surface(&surface, metric.as_ref().map(|m| m.lengths()));
    let [_, edges, triangles, boundary_len] = counts(&loaded.surface);
    let report = CollapseReport {
        surface_hash: loaded.hash.clone(),
        edges,
        triangles,
        boundary_len,
        pass: steps.iter().all(|s| s.counting_identity),
        steps,
        final_walk: surface.boundary_walk().iter().map(|g| g.signed()).collect(),
        final_hash: doc.hash(),
    };
    Ok((report, doc))
}
