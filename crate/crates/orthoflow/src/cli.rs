//! Command-line entry point: argument parsing, tolerance files, run
//! manifests and exit codes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::config::{colored_cycles, Configuration, GeometricCoordinates, Kind, Label};
use crate::error::{Error, Result};
use crate::height::evaluate_height;
use crate::lsq::LmOptions;
use crate::monodromy::continue_loop;
use crate::nonexist::{check_obstruction, corroborate};
use crate::polygon::ConformalPolygon;
use crate::scmap::{develop, OrthodiskSpec};
use crate::solver::{push_sign_experiment, solve, DualOptions, Sign, SolveOptions, SolveResult};
use crate::weier::{self, MeshFormat, PatchOptions, Tree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_OBSTRUCTED: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;

/// Every numeric threshold the commands use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Height below which a solve counts as reflexive.
    pub height: f64,
    /// Residual norm at which the height descent stops.
    pub descent: f64,
    pub max_iter: usize,
    /// Largest accepted Weierstrass period residual.
    pub period: f64,
    /// Largest accepted seam gap, also the weld radius.
    pub seam: f64,
    /// Largest accepted monodromy shift error, relative to |F(beta)|.
    pub shift: f64,
    /// Largest accepted change of the log-corrected period around the loop.
    pub closure: f64,
    /// Coordinate step of the push experiment.
    pub push_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SolveOptions::default();
        Self {
            height: s.height_tol,
            descent: s.lm.tol,
            max_iter: s.lm.max_iter,
            period: 1e-6,
            seam: 1e-6,
            shift: 1e-5,
            closure: 1e-6,
            push_step: 1e-5,
        }
    }
}

impl Tolerances {
    fn solve_options(&self) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions { lm: LmOptions { tol: self.descent, max_iter: self.max_iter, ..d.lm }, height_tol: self.height }
    }
}

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Arguments after the program name, without `--manifest`.
    pub command: Vec<String>,
    pub cfg: Option<Configuration>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub outputs: Vec<PathBuf>,
    pub version: String,
}

#[derive(Debug, Parser)]
#[command(name = "orthoflow", version, about = "Reflexive orthodisk solver and minimal surface mesher")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON file of tolerances; missing fields keep their defaults.
    #[arg(long, global = true)]
    tolerances: Option<PathBuf>,
    #[arg(long, global = true)]
    height_tol: Option<f64>,
    #[arg(long, global = true)]
    period_tol: Option<f64>,
    #[arg(long, global = true)]
    seam_tol: Option<f64>,
    /// Seed for randomized steps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Writes a run manifest to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Finds the reflexive pair of DH_{m,n} and prints it as JSON.
    Solve {
        m: usize,
        n: usize,
        /// Also writes the result JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the descent trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Height of the geometric coordinates in a JSON file.
    Height {
        m: usize,
        n: usize,
        #[arg(long)]
        coords: PathBuf,
    },
    /// Solves, verifies the periods and writes the symmetric surface mesh.
    Mesh {
        m: usize,
        n: usize,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Output mesh; the format follows the extension (.obj or .ply).
        #[arg(long)]
        out: PathBuf,
        /// Cut-off distance from the patch center.
        #[arg(long, default_value_t = 10.0)]
        truncation: f64,
        /// End disk radius in grid steps.
        #[arg(long, default_value_t = 1.5)]
        guard: f64,
        /// Integrates along rings instead of spokes.
        #[arg(long)]
        ring: bool,
        /// Writes the fundamental patch only.
        #[arg(long)]
        patch_only: bool,
    },
    /// Prints the obstruction certificate of DH_{m,n}, if there is one.
    Nonexist {
        m: usize,
        n: usize,
        /// Number of seeded period-residual solves to run as corroboration.
        #[arg(long, default_value_t = 0)]
        corroborate: u64,
    },
    /// Carries one prevertex around its neighbour; the spec is a JSON file.
    Monodromy {
        #[arg(long)]
        config: PathBuf,
    },
    /// Extremal-length response of mauve to an H-edge push at the DH_{1,1} solution.
    PushTest {
        /// Pushed edge as two labels, e.g. H1H2.
        #[arg(long, default_value = "H1H2")]
        edge: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Draws the Gdh orthodisk of the DH_{m,n} solution as SVG.
    Develop {
        m: usize,
        n: usize,
        #[arg(long)]
        svg: PathBuf,
        /// Draws the G^-1dh orthodisk instead.
        #[arg(long)]
        ginv: bool,
        /// Length of the rays drawn for infinite edges.
        #[arg(long, default_value_t = 0.5)]
        ray: f64,
    },
    /// Repeats the run recorded in a manifest.
    Replay { manifest: PathBuf },
}

/// Monodromy input file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonodromyConfig {
    pub prevertices: Vec<f64>,
    pub exponents: Vec<i32>,
    #[serde(default = "yes")]
    pub has_infinity: bool,
    #[serde(default = "unit")]
    pub scale: C,
    pub j: usize,
    pub delta0: f64,
}

fn yes() -> bool {
    true
}

fn unit() -> C {
    C::new(1.0, 0.0)
}

/// Accepts a bare array or an object with a `values` field.
#[derive(Deserialize)]
#[serde(untagged)]
enum CoordsFile {
    Bare(Vec<f64>),
    Wrapped { values: Vec<f64> },
}

struct Outcome {
    code: i32,
    stdout: String,
    outputs: Vec<PathBuf>,
}

impl Outcome {
    fn json<T: Serialize>(code: i32, value: &T) -> Self {
        Self { code, stdout: serde_json::to_string_pretty(value).expect("serializable"), outputs: vec![] }
    }
}

/// Runs the program on `argv` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return EXIT_OK;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return EXIT_USAGE;
        }
    };
    if let Some(j) = cli.global.jobs {
        // A second call in one process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    if let Command::Replay { manifest } = &cli.command {
        return replay(manifest);
    }
    let tol = match tolerances(&cli.global) {
        Ok(t) => t,
        Err(e) => return report(&e),
    };
    let outcome = match execute(&cli.command, &tol, cli.global.seed) {
        Ok(o) => o,
        Err(e) => return report(&e),
    };
    if !outcome.stdout.is_empty() {
        println!("{}", outcome.stdout);
    }
    if let Some(path) = &cli.global.manifest {
        let m = RunManifest {
            command: strip_manifest(&args[1..]),
            cfg: configuration(&cli.command),
            seed: cli.global.seed,
            tolerances: tol,
            outputs: outcome.outputs.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        if let Err(e) = fs::write(path, text) {
            return report(&e.into());
        }
    }
    outcome.code
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. } | Error::Side { .. } => EXIT_NO_CONVERGENCE,
        Error::Obstructed { .. } => EXIT_OBSTRUCTED,
        Error::Io(_) => EXIT_NO_INPUT,
        _ => EXIT_VALIDATION,
    }
}

fn strip_manifest(args: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        let s = a.to_string_lossy().into_owned();
        if skip {
            skip = false;
        } else if s == "--manifest" {
            skip = true;
        } else if !s.starts_with("--manifest=") {
            out.push(s);
        }
    }
    out
}

fn replay(path: &Path) -> i32 {
    let m: RunManifest = match read_json(path) {
        Ok(m) => m,
        Err(e) => return report(&e),
    };
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest written by version {}, running {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    let mut argv = vec!["orthoflow".to_string()];
    argv.extend(m.command);
    run(argv)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn tolerances(g: &Global) -> Result<Tolerances> {
    let mut t = match &g.tolerances {
        Some(p) => read_json(p)?,
        None => Tolerances::default(),
    };
    if let Some(v) = g.height_tol {
        t.height = v;
    }
    if let Some(v) = g.period_tol {
        t.period = v;
    }
    if let Some(v) = g.seam_tol {
        t.seam = v;
    }
    Ok(t)
}

fn configuration(c: &Command) -> Option<Configuration> {
    match *c {
        Command::Solve { m, n, .. }
        | Command::Height { m, n, .. }
        | Command::Mesh { m, n, .. }
        | Command::Nonexist { m, n, .. }
        | Command::Develop { m, n, .. } => Some(Configuration::new(m, n)),
        Command::PushTest { .. } => Some(Configuration::new(1, 1)),
        Command::Monodromy { .. } | Command::Replay { .. } => None,
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Solves and refuses obstructed or unconverged configurations.
fn solved(cfg: &Configuration, tol: &Tolerances) -> Result<SolveResult> {
    let sol = solve(cfg, &tol.solve_options())?;
    if !sol.reflexive {
        return Err(Error::NoConvergence { iterations: sol.iterations, residual: sol.height });
    }
    Ok(sol)
}

fn execute(cmd: &Command, tol: &Tolerances, seed: u64) -> Result<Outcome> {
    match cmd {
        Command::Solve { m, n, out, trace } => {
            let cfg = Configuration::new(*m, *n);
            if let Some(cert) = check_obstruction(&cfg) {
                return Ok(Outcome { code: EXIT_OBSTRUCTED, stdout: cert.to_json(), outputs: vec![] });
            }
            let sol = solve(&cfg, &tol.solve_options())?;
            let code = if sol.reflexive { EXIT_OK } else { EXIT_NO_CONVERGENCE };
            let mut o = Outcome::json(code, &sol);
            if let Some(p) = out {
                write(p, o.stdout.as_bytes())?;
                o.outputs.push(p.clone());
            }
            if let Some(p) = trace {
                let mut buf = Vec::new();
                sol.write_trace(&mut buf)?;
                write(p, &buf)?;
                o.outputs.push(p.clone());
            }
            Ok(o)
        }
        Command::Height { m, n, coords } => {
            let cfg = Configuration::new(*m, *n);
            let values = match read_json::<CoordsFile>(coords)? {
                CoordsFile::Bare(v) | CoordsFile::Wrapped { values: v } => v,
            };
            let gc = GeometricCoordinates::new(cfg, values)?;
            Ok(Outcome::json(EXIT_OK, &evaluate_height(&gc, &cfg)?))
        }
        Command::Mesh { m, n, resolution, out, truncation, guard, ring, patch_only } => {
            let fmt = MeshFormat::from_path(out)
                .ok_or_else(|| Error::Config(format!("{}: expected a .obj or .ply path", out.display())))?;
            let sol = solved(&Configuration::new(*m, *n), tol)?;
            let data = weier::assemble(&sol)?;
            let periods = weier::verify_periods(&data, &weier::period_cycles(&data.gdh))?;
            if periods.max() > tol.period {
                return Err(Error::Geometry(format!(
                    "period residual {:.3e} on {} exceeds {:.1e}",
                    periods.max(),
                    periods.worst_cycle,
                    tol.period
                )));
            }
            let opts = PatchOptions {
                resolution: *resolution,
                truncation: *truncation,
                guard: *guard,
                tree: if *ring { Tree::Ring } else { Tree::Radial },
            };
            let patch = weier::integrate_patch(&data, &opts)?;
            let (mesh, seam_gap) = if *patch_only {
                (patch, None)
            } else {
                let (mesh, group) = weier::apply_symmetries(&patch, &data, tol.seam)?;
                (mesh, Some(group.seam_gap))
            };
            mesh.write(out, fmt)?;
            let topo = mesh.topology();
            let summary = MeshSummary {
                cfg: sol.cfg,
                profile: weier::divisor_profile(&sol.cfg),
                periods,
                null_defect: data.null_defect,
                seam_gap,
                vertices: topo.vertices,
                triangles: topo.faces,
                boundary_loops: topo.boundary_loops,
                genus: topo.genus(),
                manifold: topo.is_manifold(),
                out: out.clone(),
            };
            let mut o = Outcome::json(EXIT_OK, &summary);
            o.outputs.push(out.clone());
            Ok(o)
        }
        Command::Nonexist { m, n, corroborate: runs } => {
            let cfg = Configuration::new(*m, *n);
            let Some(cert) = check_obstruction(&cfg) else {
                return Ok(Outcome { code: EXIT_OK, stdout: format!("{cfg}: no obstruction"), outputs: vec![] });
            };
            let mut stdout = format!("{cert}\n{}", cert.to_json());
            if *runs > 0 {
                let opts = DualOptions::default();
                let r = corroborate(&cfg, seed..seed + runs, &opts);
                stdout.push('\n');
                stdout.push_str(&serde_json::to_string_pretty(&r).expect("serializable"));
            }
            Ok(Outcome { code: EXIT_OBSTRUCTED, stdout, outputs: vec![] })
        }
        Command::Monodromy { config } => {
            let c: MonodromyConfig = read_json(config)?;
            let poly = ConformalPolygon::unlabeled(c.prevertices, c.has_infinity)?;
            let spec = OrthodiskSpec::new(poly, c.exponents, c.scale)?;
            let r = continue_loop(&spec, c.j, c.delta0)?;
            let ok = r.shift_error <= tol.shift * r.beta_before.norm() && r.closure_error <= tol.closure;
            Ok(Outcome::json(if ok { EXIT_OK } else { EXIT_VALIDATION }, &r))
        }
        Command::PushTest { edge, scale } => {
            let cfg = Configuration::new(1, 1);
            let (a, b) = parse_edge(edge)?;
            let e = cfg.edge(a, b)?;
            let sol = solved(&cfg, tol)?;
            let cycles = colored_cycles(&cfg)?;
            let mauve = cycles.get("mauve").expect("mauve is a colored cycle");
            let r = push_sign_experiment(&sol, e, mauve, *scale, tol.push_step)?;
            let opposite = matches!(
                (r.sign_gdh, r.sign_ginv),
                (Sign::Positive, Sign::Negative) | (Sign::Negative, Sign::Positive)
            );
            Ok(Outcome::json(if opposite { EXIT_OK } else { EXIT_VALIDATION }, &r))
        }
        Command::Develop { m, n, svg, ginv, ray } => {
            let sol = solved(&Configuration::new(*m, *n), tol)?;
            let spec = if *ginv { &sol.spec_ginv } else { &sol.spec_gdh };
            let dev = develop(spec)?;
            write(svg, dev.to_svg(*ray).as_bytes())?;
            let mut o = Outcome::json(EXIT_OK, &dev);
            o.outputs.push(svg.clone());
            Ok(o)
        }
        Command::Replay { .. } => unreachable!("handled before dispatch"),
    }
}

#[derive(Serialize)]
struct MeshSummary {
    cfg: Configuration,
    profile: weier::DivisorProfile,
    periods: weier::PeriodCheck,
    null_defect: f64,
    seam_gap: Option<f64>,
    vertices: usize,
    triangles: usize,
    boundary_loops: usize,
    genus: Option<usize>,
    manifold: bool,
    out: PathBuf,
}

/// Parses two concatenated labels such as `H1H2` or `P3C2`.
pub fn parse_edge(s: &str) -> Result<(Label, Label)> {
    let bad = || Error::Config(format!("edge {s:?} is not two labels like H1H2"));
    let split = s[1..].find(|c: char| c.is_ascii_alphabetic()).map(|k| k + 1).ok_or_else(bad)?;
    let label = |t: &str| -> Result<Label> {
        let mut chars = t.chars();
        let kind = match chars.next() {
            Some('H') => Kind::H,
            Some('P') => Kind::P,
            Some('C') => Kind::C,
            Some('R') => Kind::R,
            _ => return Err(bad()),
        };
        let index = chars.as_str().parse().map_err(|_| bad())?;
        Ok(Label { kind, index })
    };
    Ok((label(&s[..split])?, label(&s[split..])?))
}
