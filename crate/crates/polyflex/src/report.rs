//! Reports: serializable records with a plain-text rendering.
//!
//! Nothing here depends on time or on the machine, so a report is a pure
//! function of its inputs and the seed.

use std::fmt::Write as _;

use serde::Serialize;

pub trait Report: Serialize {
    fn pass(&self) -> bool;
    fn text(&self) -> String;

    fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Checked,
    /// Boundary polygon collinear; the check does not apply.
    SingularBoundary,
    /// No realization without flat triangles was drawn.
    DegenerateSample,
    /// No unit-length realization was found.
    Unrealized,
}

impl TrialStatus {
    fn label(self) -> &'static str {
        match self {
            TrialStatus::Checked => "checked",
            TrialStatus::SingularBoundary => "singular",
            TrialStatus::DegenerateSample => "degenerate",
            TrialStatus::Unrealized => "unrealized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Certificates {
    pub direct: bool,
    pub direct_kernel_dim: usize,
    pub cone: bool,
    pub cone_kernel_dim: usize,
    /// A rigid cone closure came with a passing direct certificate.
    pub implication: bool,
}

impl Certificates {
    fn label(&self) -> String {
        let mut held = Vec::new();
        if self.direct {
            held.push("direct");
        }
        if self.cone {
            held.push("cone");
        }
        let mut s = if held.is_empty() { "none".to_string() } else { held.join("+") };
        if !self.implication {
            s.push('!');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub steps: usize,
    pub max_unchanged_gap: f64,
    pub max_replaced: f64,
    pub terminal_pair_gap: f64,
    pub terminal_same_orientation_pairs: usize,
    pub scale: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub surface_hash: String,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_len: usize,
    pub status: TrialStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tangent_dim: Option<usize>,
    /// Vertex-level rank of the boundary map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mod_orbit_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Certificates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSummary>,
    pub reexamined: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

impl TrialRecord {
    pub fn new(trial: usize, seed: u64, surface_hash: String, counts: [usize; 4]) -> Self {
        let [vertices, edges, triangles, boundary_len] = counts;
        TrialRecord {
            trial,
            seed,
            surface_hash,
            vertices,
            edges,
            triangles,
            boundary_len,
            status: TrialStatus::Checked,
            tangent_dim: None,
            delta_rank: None,
            mod_orbit_rank: None,
            bound: None,
            certificates: None,
            max_omega: None,
            threshold: None,
            chain: None,
            reexamined: false,
            error: None,
            pass: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub command: String,
    pub seed: u64,
    pub trials: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_triangles: Option<usize>,
    pub records: Vec<TrialRecord>,
    pub checked: usize,
    pub skipped: usize,
    pub failed: usize,
    pub reexamined: usize,
    pub pass: bool,
}

impl AuditReport {
    pub fn new(command: &str, seed: u64, rel_tol: f64, abs_tol: f64, max_triangles: Option<usize>, records: Vec<TrialRecord>) -> Self {
        let checked = records.iter().filter(|r| r.status == TrialStatus::Checked).count();
        let failed = records.iter().filter(|r| !r.pass).count();
        let reexamined = records.iter().filter(|r| r.reexamined).count();
        AuditReport {
            command: command.to_string(),
            seed,
            trials: records.len(),
            rel_tol,
            abs_tol,
            max_triangles,
            checked,
            skipped: records.len() - checked,
            failed,
            reexamined,
            pass: failed == 0,
            records,
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn sci(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"))
}

impl Report for AuditReport {
    fn pass(&self) -> bool {
        self.pass
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command        {}", self.command);
        let _ = writeln!(out, "seed           {}", self.seed);
        let _ = writeln!(out, "trials         {}", self.trials);
        let _ = writeln!(out, "tol            rel {:e}, abs {:e}", self.rel_tol, self.abs_tol);
        if let Some(m) = self.max_triangles {
            let _ = writeln!(out, "max_triangles  {m}");
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:>5} {:>20} {:16} {:>4} {:>4} {:>4} {:>4} {:>11} {:>10} {:>9} {:>5} {:>12} {:>10} {:>10}  pass",
            "trial", "seed", "surface_hash", "|V|", "|E|", "|T|", "|F|", "tangent_dim", "delta_rank", "mod_orbit", "bound", "certificates", "max_omega", "status"
        );
        for r in &self.records {
            let mut status = r.status.label().to_string();
            if r.reexamined {
                status.push('*');
            }
            let _ = writeln!(
                out,
                "{:>5} {:>20} {:16} {:>4} {:>4} {:>4} {:>4} {:>11} {:>10} {:>9} {:>5} {:>12} {:>10} {:>10}  {}",
                r.trial,
                r.seed,
                r.surface_hash,
                r.vertices,
                r.edges,
                r.triangles,
                r.boundary_len,
                opt(r.tangent_dim),
                opt(r.delta_rank),
                opt(r.mod_orbit_rank),
                opt(r.bound),
                r.certificates.map_or_else(|| "-".to_string(), |c| c.label()),
                sci(r.max_omega),
                status,
                if r.pass { "ok" } else { "FAIL" }
            );
            if let Some(c) = &r.chain {
                let _ = writeln!(
                    out,
                    "      chain: {} steps, unchanged gap {:.3e}, replaced {:.3e}, terminal gap {:.3e}, same-orientation pairs {}, {}",
                    c.steps,
                    c.max_unchanged_gap,
                    c.max_replaced,
                    c.terminal_pair_gap,
                    c.terminal_same_orientation_pairs,
                    if c.pass { "ok" } else { "FAIL" }
                );
            }
            if let Some(e) = &r.error {
                let _ = writeln!(out, "      error: {e}");
            }
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "checked {}, skipped {}, failed {}, re-examined {}",
            self.checked, self.skipped, self.failed, self.reexamined
        );
        let _ = writeln!(out, "pass           {}", self.pass);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Repeat {
    pub edge: u32,
    /// 1-based positions in the walk.
    pub positions: Vec<usize>,
    pub same_orientation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaRow {
    pub position: usize,
    pub edge: i64,
    pub tail: u32,
    pub head: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub surface_hash: String,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_len: usize,
    pub counting_identity: bool,
    pub orientable: bool,
    pub euler_characteristic: i64,
    pub first_betti: usize,
    pub walk: Vec<i64>,
    pub delta: Vec<DeltaRow>,
    pub repeats: Vec<Repeat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    pub pass: bool,
}

impl Report for BoundaryReport {
    fn pass(&self) -> bool {
        self.pass
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "surface_hash   {}", self.surface_hash);
        let _ = writeln!(out, "|V| {}  |E| {}  |T| {}  |F| {}", self.vertices, self.edges, self.triangles, self.boundary_len);
        let _ = writeln!(out, "k              {}", self.boundary_len);
        let _ = writeln!(out, "counting       3|T| = 2|E| - |F|: {}", self.counting_identity);
        let _ = writeln!(out, "orientable     {}", self.orientable);
        let _ = writeln!(out, "euler          {}", self.euler_characteristic);
        let _ = writeln!(out, "first_betti    {}", self.first_betti);
        let walk: Vec<String> = self.walk.iter().map(|g| format!("{g:+}")).collect();
        let _ = writeln!(out, "walk           {}", walk.join(" "));
        out.push('\n');
        let _ = writeln!(out, "{:>4} {:>6} {:>6} {:>6} {:>22}", "f", "g", "tail", "head", "length");
        for (i, d) in self.delta.iter().enumerate() {
            let l = self.lengths.as_ref().map_or_else(|| "-".to_string(), |ls| format!("{}", ls[i]));
            let _ = writeln!(out, "{:>4} {:>+6} {:>6} {:>6} {:>22}", d.position, d.edge, d.tail, d.head, l);
        }
        if !self.repeats.is_empty() {
            out.push('\n');
            for r in &self.repeats {
                let pos: Vec<String> = r.positions.iter().map(|p| p.to_string()).collect();
                let how = if r.same_orientation { "same orientation" } else { "opposite orientations" };
                let _ = writeln!(out, "edge {} at f{}: {how}", r.edge, pos.join(", f"));
            }
        }
        let _ = writeln!(out, "pass           {}", self.pass);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseStep {
    /// 1-based position of the collapsed boundary edge in the walk.
    pub position: usize,
    pub triangle: usize,
    pub boundary_edge: i64,
    pub e: i64,
    pub e_prime: i64,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_len: usize,
    pub counting_identity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub surface_hash: String,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_len: usize,
    pub steps: Vec<CollapseStep>,
    pub final_walk: Vec<i64>,
    pub final_hash: String,
    pub pass: bool,
}

impl Report for CollapseReport {
    fn pass(&self) -> bool {
        self.pass
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "surface_hash   {}", self.surface_hash);
        let _ = writeln!(out, "start          |E| {}  |T| {}  |F| {}", self.edges, self.triangles, self.boundary_len);
        out.push('\n');
        let _ = writeln!(out, "{:>4} {:>4} {:>8} {:>6} {:>6} {:>5} {:>5} {:>5}  counting", "step", "at", "triangle", "e", "e'", "|E|", "|T|", "|F|");
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>4} {:>4} {:>8} {:>+6} {:>+6} {:>5} {:>5} {:>5}  {}",
                i + 1,
                s.position,
                s.triangle,
                s.e,
                s.e_prime,
                s.edges,
                s.triangles,
                s.boundary_len,
                s.counting_identity
            );
        }
        let walk: Vec<String> = self.final_walk.iter().map(|g| format!("{g:+}")).collect();
        out.push('\n');
        let _ = writeln!(out, "final walk     {}", walk.join(" "));
        let _ = writeln!(out, "final_hash     {}", self.final_hash);
        let _ = writeln!(out, "pass           {}", self.pass);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rp2Report {
    pub surface_hash: String,
    pub orientable: bool,
    pub summands: Vec<f64>,
    pub omega: f64,
    pub tangent_dim: usize,
    pub max_omega: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Report for Rp2Report {
    fn pass(&self) -> bool {
        self.pass
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "surface_hash   {}", self.surface_hash);
        let _ = writeln!(out, "orientable     {}", self.orientable);
        let terms: Vec<String> = self.summands.iter().map(|t| format!("{t}")).collect();
        let _ = writeln!(out, "summands       {}", terms.join(" + "));
        let _ = writeln!(out, "omega          {}", self.omega);
        let _ = writeln!(out, "tangent_dim    {}", self.tangent_dim);
        let _ = writeln!(out, "max_omega      {:.3e} (threshold {:.3e})", self.max_omega, self.threshold);
        let _ = writeln!(out, "pass           {}", self.pass);
        out
    }
}
