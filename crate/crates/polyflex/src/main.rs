use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyflex::format::RealizationDoc;
use polyflex::report::Report;
use polyflex::run::{self, AuditFlags, Loaded, RunConfig, RunError};
use polyflex_core::numerics::Tolerance;

/// Audits of polyhedral surfaces with boundary and their boundary polygons.
///
/// Exit status: 0 when every audit passes, 1 when one fails, 2 on bad input.
#[derive(Parser, Debug)]
#[command(name = "polyflex", version)]
struct Cli {
    /// Master seed of randomized trials.
    #[arg(long, global = true, env = "POLYFLEX_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of randomized trials.
    #[arg(long, global = true, env = "POLYFLEX_TRIALS")]
    trials: Option<usize>,
    /// Relative rank tolerance.
    #[arg(long, global = true, env = "POLYFLEX_TOL")]
    tol: Option<f64>,
    /// Largest number of triangles of a generated disk.
    #[arg(long, global = true, env = "POLYFLEX_MAX_TRIANGLES")]
    max_triangles: Option<usize>,
    /// Run the isotropy audit on non-orientable surfaces.
    #[arg(long, global = true, env = "POLYFLEX_ALLOW_NONORIENTABLE")]
    allow_nonorientable: bool,
    /// Also compare the form termwise along a full collapse sequence.
    #[arg(long, global = true, env = "POLYFLEX_VERIFY_COLLAPSE_CHAIN")]
    verify_collapse_chain: bool,
    /// Print the report as JSON.
    #[arg(long, global = true, env = "POLYFLEX_JSON")]
    json: bool,
    /// Write the report here instead of standard output.
    #[arg(long, global = true, env = "POLYFLEX_OUTPUT")]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Input {
    /// Surface file.
    surface: Option<PathBuf>,
    /// Realization file for the surface.
    #[arg(long, requires = "surface")]
    realization: Option<PathBuf>,
    /// Use randomly generated disks instead of a file.
    #[arg(long, conflicts_with = "surface")]
    random: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the boundary walk and the edge each boundary side maps to.
    Boundary {
        surface: PathBuf,
        #[arg(long)]
        realization: Option<PathBuf>,
        /// Write the boundary polygon of the realization to this file.
        #[arg(long, requires = "realization")]
        write_polygon: Option<PathBuf>,
    },
    /// Collapse boundary triangles, one position or all the way down.
    Collapse {
        surface: PathBuf,
        /// 1-based walk position to collapse at.
        #[arg(long)]
        position: Option<usize>,
        /// Write the collapsed surface to this file.
        #[arg(long)]
        write_surface: Option<PathBuf>,
    },
    /// Check that the boundary map pulls the polygon form back to zero.
    Isotropy {
        #[command(flatten)]
        input: Input,
        /// Run the projective-plane counterexample instead.
        #[arg(long, conflicts_with_all = ["surface", "random"])]
        rp2_demo: bool,
    },
    /// Boundary rigidity certificates and the vertex-level rank.
    Rigidity {
        #[command(flatten)]
        input: Input,
    },
    /// Half-dimensional rank plus isotropy.
    Lagrangian {
        #[command(flatten)]
        input: Input,
    },
    /// Rank bound on every unit-length disk up to the triangle limit.
    DomeAudit,
    /// The projective-plane example, where the form does not vanish.
    Rp2Demo,
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|e| RunError::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Loaded, RunError> {
    Loaded::parse(read(path)?).map_err(|e| RunError::Input(format!("{}: {e}", path.display())))
}

fn load_realization(path: &Path) -> Result<RealizationDoc, RunError> {
    RealizationDoc::parse(&read(path)?).map_err(|e| RunError::Input(format!("{}: {e}", path.display())))
}

enum Source {
    Random,
    File(Box<Loaded>, RealizationDoc),
}

fn source(input: &Input) -> Result<Source, RunError> {
    match (&input.surface, &input.realization) {
        (None, _) if input.random => Ok(Source::Random),
        (Some(s), Some(r)) => Ok(Source::File(Box::new(load(s)?), load_realization(r)?)),
        (Some(_), None) => Err(RunError::Input("a surface file needs --realization".into())),
        (None, _) => Err(RunError::Input("give a surface file or --random".into())),
    }
}

fn execute(cli: &Cli) -> Result<(String, bool), RunError> {
    let tol = match cli.tol {
        Some(rel) => Tolerance::new(rel, Tolerance::default().abs_eps)?,
        None => Tolerance::default(),
    };
    let default_trials = match cli.command {
        Command::Isotropy { .. } => run::ISOTROPY_TRIALS,
        _ => run::RIGIDITY_TRIALS,
    };
    let default_max = match cli.command {
        Command::DomeAudit => run::DOME_MAX_TRIANGLES,
        _ => run::DEFAULT_MAX_TRIANGLES,
    };
    let config = RunConfig::new(cli.seed, cli.trials.unwrap_or(default_trials), tol, cli.max_triangles.unwrap_or(default_max), cli.output.clone())?;
    let flags = AuditFlags { allow_nonorientable: cli.allow_nonorientable, verify_collapse_chain: cli.verify_collapse_chain };
    let render = |r: &dyn ReportDyn| (if cli.json { r.json_dyn() } else { r.text_dyn() }, r.pass_dyn());
    Ok(match &cli.command {
        Command::Boundary { surface, realization, write_polygon } => {
            let loaded = load(surface)?;
            let realization = realization.as_deref().map(load_realization).transpose()?;
            let (report, polygon) = run::boundary(&loaded, realization.as_ref())?;
            if let (Some(path), Some(polygon)) = (write_polygon, polygon) {
                write(path, &polygon.to_text())?;
            }
            render(&report)
        }
        Command::Collapse { surface, position, write_surface } => {
            let (report, doc) = run::collapse(&load(surface)?, *position)?;
            if let Some(path) = write_surface {
                write(path, &doc.to_text())?;
            }
            render(&report)
        }
        Command::Isotropy { rp2_demo: true, .. } | Command::Rp2Demo => render(&run::rp2_demo(&config)?),
        Command::Isotropy { input, .. } => match source(input)? {
            Source::Random => render(&run::isotropy_random(&config, flags)?),
            Source::File(l, r) => render(&run::isotropy_file(&config, flags, &l, &r)?),
        },
        Command::Rigidity { input } => match source(input)? {
            Source::Random => render(&run::rigidity_random(&config)?),
            Source::File(l, r) => render(&run::rigidity_file(&config, &l, &r)?),
        },
        Command::Lagrangian { input } => match source(input)? {
            Source::Random => render(&run::lagrangian_random(&config, flags)?),
            Source::File(l, r) => render(&run::lagrangian_file(&config, flags, &l, &r)?),
        },
        Command::DomeAudit => render(&run::dome_audit(&config)?),
    })
}

/// Object-safe view of [`Report`].
trait ReportDyn {
    fn json_dyn(&self) -> String;
    fn text_dyn(&self) -> String;
    fn pass_dyn(&self) -> bool;
}

impl<T: Report> ReportDyn for T {
    fn json_dyn(&self) -> String {
        self.json()
    }
    fn text_dyn(&self) -> String {
        self.text()
    }
    fn pass_dyn(&self) -> bool {
        self.pass()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((text, pass)) => {
            let written = match &cli.output {
                Some(path) => write(path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
                Ok(()) if pass => ExitCode::SUCCESS,
                Ok(()) => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
