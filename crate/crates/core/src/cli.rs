//! The `casimir-kit` command line. Every command prints one JSON document
//! (keys sorted, `"version": "casimir-kit/1"`) and maps errors to exit codes:
//! 0 ok or same orbit, 2 invalid input, 3 different orbit, 4 not simple Morse,
//! 5 numerical failure.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::circulation::{oneform_from_vorticity, vorticity_two_form, CirculationOptions, DiscreteOneForm};
use crate::euler_torus::{casimir_trace, InitSpec, TorusFlowState, TraceOptions};
use crate::fixtures;
use crate::geometry::{
    certify_simple, classify_vertices, parse_off, parse_reals, perturb_to_simple_with, write_off, write_reals,
    TriangulatedSurface,
};
use crate::measure::{pushforward_measure, MeasuredReebGraph};
use crate::moments::{hausdorff_check, reconstruct_density, stieltjes_transform, MomentSequence, ReconstructOptions, StieltjesMode};
use crate::orbit::{measured_iso, same_orbit, Coset, MatchOptions, OrbitOptions, Verdict};
use crate::reeb::{build_reeb, check_compatibility, simplify};
use crate::{Error, Result};

pub const VERSION: &str = "casimir-kit/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIFFERENT: i32 = 3;
pub const EXIT_NOT_SIMPLE: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "casimir-kit",
    version,
    about = "Reeb graphs, pushforward measures and circulations of vorticity fields on surfaces",
    after_help = "Exit codes: 0 ok / same orbit, 2 invalid input, 3 different orbit, 4 not simple Morse, 5 numerical failure."
)]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by all commands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Moments m_0..m_{N-1} per arc (N >= 2).
    #[arg(short = 'N', long = "moments", default_value_t = 16, global = true)]
    pub moments: usize,
    /// Samples of each arc's cumulative area profile.
    #[arg(short = 'K', long = "samples", default_value_t = 256, global = true)]
    pub samples: usize,
    /// Relative tolerance on edge moments when matching graphs.
    #[arg(long, default_value = "1e-6", global = true)]
    pub tol_rel: f64,
    /// Relative tolerance on circulation limits when matching graphs.
    #[arg(long, default_value = "1e-6", global = true)]
    pub tol_circ: f64,
    /// Tolerance on node values, relative to the field range.
    #[arg(long, default_value = "1e-8", global = true)]
    pub tol_f: f64,
    /// Hausdorff feasibility tolerance, relative to m_0.
    #[arg(long, default_value = "1e-10", global = true)]
    pub tol_feas: f64,
    /// Kirchhoff / Newton-Leibniz tolerance for measured circulations.
    #[arg(long, default_value = "1e-6", global = true)]
    pub tol_kirch: f64,
    /// Relative scale of the tie-breaking perturbation.
    #[arg(long, default_value = "1e-9", global = true)]
    pub perturb_eps: f64,
    /// Cancel leaf arcs with persistence below this fraction of the field range (0 = off).
    #[arg(long, default_value_t = 0.0, global = true)]
    pub persistence: f64,
    /// Include cumulative area profiles in graph documents.
    #[arg(long, global = true)]
    pub profiles: bool,
    /// Write the document here instead of standard output.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for randomized fixtures.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reeb graph and pushforward measure of a field on a mesh.
    Analyze {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// Per-triangle areas overriding the embedding.
        #[arg(long)]
        areas: Option<PathBuf>,
        /// Break ties instead of rejecting non-simple fields.
        #[arg(long)]
        perturb: bool,
    },
    /// Feasibility checks and Stieltjes values of the arc moments in a graph document.
    Moments {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        arc: Option<usize>,
        /// Evaluate the Stieltjes transform at `re,im`.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Option<Complex64>,
    },
    /// Circulation graph of a 1-form given as lines `u v value`.
    Circulation {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        form: PathBuf,
        /// Vorticity values; defaults to the curl of the form.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        areas: Option<PathBuf>,
    },
    /// Orbit comparison of two inputs: graph documents, mesh + field, or mesh + form.
    Equiv(EquivArgs),
    /// Density of one arc measure (or a moment file) from its moments.
    Reconstruct {
        #[arg(long, conflicts_with = "moment_file")]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        arc: usize,
        /// JSON `{"lo": .., "hi": .., "m": [..]}`.
        #[arg(long = "moment-file")]
        moment_file: Option<PathBuf>,
        #[arg(long, default_value = "1e-2")]
        eps: f64,
        #[arg(long, default_value_t = 201)]
        grid: usize,
        /// Relative noise level that truncates the Legendre expansion.
        #[arg(long, default_value = "1e-6")]
        noise: f64,
    },
    /// Evolve a torus vorticity field and track its Casimirs.
    Simulate {
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// JSON `{"modes": [{"kx", "ky", "amp", "phase"}]}`; default cos x + 0.5 cos y + 0.1 cos(x+y).
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        #[arg(long = "snapshots", default_value_t = 5)]
        snapshots: usize,
        /// Fixed time step; CFL 0.4 when omitted.
        #[arg(long)]
        dt: Option<f64>,
        /// Mesh refinement factor for the analysis snapshots.
        #[arg(long, default_value_t = 4)]
        upsample: usize,
    },
    /// Write a fixture mesh and its data files into a directory.
    Fixture {
        name: FixtureName,
        #[arg(long)]
        dir: PathBuf,
        /// Grid or subdivision size.
        #[arg(long)]
        size: Option<usize>,
        /// Coefficient c of the closed form c dx (shift) or area fraction moved (figure3).
        #[arg(long)]
        amount: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct EquivArgs {
    #[arg(long)]
    pub graph_a: Option<PathBuf>,
    #[arg(long)]
    pub graph_b: Option<PathBuf>,
    #[arg(long)]
    pub mesh_a: Option<PathBuf>,
    #[arg(long)]
    pub mesh_b: Option<PathBuf>,
    #[arg(long)]
    pub field_a: Option<PathBuf>,
    #[arg(long)]
    pub field_b: Option<PathBuf>,
    #[arg(long)]
    pub form_a: Option<PathBuf>,
    #[arg(long)]
    pub form_b: Option<PathBuf>,
    #[arg(long)]
    pub areas_a: Option<PathBuf>,
    #[arg(long)]
    pub areas_b: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureName {
    /// Octahedron with the height field.
    Octahedron,
    /// Subdivided octahedral sphere with the height field.
    Sphere,
    /// Torus with one minimum, three saddles and two maxima.
    Figure1,
    /// Torus with a single saddle pair, cos y + 0.5 cos x.
    Saddle,
    /// Sphere with two area forms whose branch moments differ.
    Figure3,
    /// Torus cosets differing by the closed form c dx.
    Shift,
    /// Torus field and its image under a random grid shear and translation.
    Shear,
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or("expected re,im")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(Complex64::new(p(re)?, p(im)?))
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::NonManifold(..)
        | Error::NonManifoldVertex(_)
        | Error::Orientation(..)
        | Error::CountMismatch { .. }
        | Error::InvalidArea { .. }
        | Error::InvalidInput(_)
        | Error::OutOfRange { .. }
        | Error::BadPinPlacement(_)
        | Error::NonZeroMean(_) => EXIT_INVALID,
        Error::NotSimple(_) | Error::PerturbFailure { .. } => EXIT_NOT_SIMPLE,
        _ => EXIT_NUMERICAL,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "parse",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::NonManifold(..) | Error::NonManifoldVertex(_) => "non_manifold",
        Error::Orientation(..) => "orientation",
        Error::CountMismatch { .. } => "count_mismatch",
        Error::InvalidArea { .. } => "invalid_area",
        Error::InvalidInput(_) => "invalid_input",
        Error::NotSimple(_) => "not_simple",
        Error::PerturbFailure { .. } => "perturb_failure",
        Error::OutOfRange { .. } => "out_of_range",
        Error::NoSolution { .. } => "no_solution",
        Error::BadPinPlacement(_) => "bad_pin_placement",
        Error::Infeasible { .. } => "infeasible",
        Error::AntiderivativeViolation { .. } => "antiderivative_violation",
        Error::InsufficientSamples(_) => "insufficient_samples",
        Error::DivergenceRisk { .. } => "divergence_risk",
        Error::InfeasibleMoments { .. } => "infeasible_moments",
        Error::IllConditioned { .. } => "ill_conditioned",
        Error::NonZeroMean(_) => "non_zero_mean",
        Error::CflViolation { .. } => "cfl_violation",
        Error::TopologyChange(_) => "topology_change",
    }
}

/// Parses `args` (including the program name), runs the command and writes its document.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = command_name(&cli.command);
    let (mut doc, code) = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("casimir-kit {name}: {e}");
            let mut err = json!({"kind": error_kind(&e), "message": e.to_string()});
            if let Error::NotSimple(report) = &e {
                err["violations"] = serde_json::to_value(&report.violations).unwrap_or(Value::Null);
            }
            (json!({"error": err}), exit_code(&e))
        }
    };
    doc["version"] = json!(VERSION);
    doc["command"] = json!(name);
    doc["exit_code"] = json!(code);
    let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    let written = match &cli.config.output {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("casimir-kit {name}: cannot write output: {e}");
        return EXIT_INVALID;
    }
    code
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Analyze { .. } => "analyze",
        Command::Moments { .. } => "moments",
        Command::Circulation { .. } => "circulation",
        Command::Equiv(_) => "equiv",
        Command::Reconstruct { .. } => "reconstruct",
        Command::Simulate { .. } => "simulate",
        Command::Fixture { .. } => "fixture",
    }
}

fn validate(cfg: &RunConfig) -> Result<()> {
    if cfg.moments < 2 {
        return Err(Error::InvalidInput(format!("N = {} must be at least 2", cfg.moments)));
    }
    if cfg.samples < 4 {
        return Err(Error::InvalidInput(format!("K = {} must be at least 4", cfg.samples)));
    }
    for (name, v) in [
        ("tol-rel", cfg.tol_rel),
        ("tol-circ", cfg.tol_circ),
        ("tol-f", cfg.tol_f),
        ("tol-feas", cfg.tol_feas),
        ("tol-kirch", cfg.tol_kirch),
        ("perturb-eps", cfg.perturb_eps),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("--{name} must be positive, got {v}")));
        }
    }
    if !(cfg.persistence >= 0.0) {
        return Err(Error::InvalidInput("--persistence must be non-negative".into()));
    }
    Ok(())
}

fn circulation_options(cfg: &RunConfig) -> CirculationOptions {
    CirculationOptions {
        samples: cfg.samples,
        moments: cfg.moments,
        tol_kirch: cfg.tol_kirch,
        perturb_eps: cfg.perturb_eps,
        persistence: cfg.persistence,
    }
}

fn match_options(cfg: &RunConfig) -> MatchOptions {
    MatchOptions { moments: cfg.moments, tol_rel: cfg.tol_rel, tol_f: cfg.tol_f, tol_circ: cfg.tol_circ, ..Default::default() }
}

fn execute(cli: &Cli) -> Result<(Value, i32)> {
    let cfg = &cli.config;
    validate(cfg)?;
    match &cli.command {
        Command::Analyze { mesh, field, areas, perturb } => analyze(cfg, mesh, field, areas.as_deref(), *perturb),
        Command::Moments { graph, arc, lambda } => moments(cfg, graph, *arc, *lambda),
        Command::Circulation { mesh, form, field, areas } => {
            let surface = read_surface(mesh, areas.as_deref())?;
            let form = read_form(&surface, form)?;
            let field = field.as_deref().map(read_reals).transpose()?;
            let coset = Coset { surface: &surface, form: &form, field: field.as_deref() };
            let (c, defect) = crate::orbit::analyze_coset(coset, &circulation_options(cfg))?;
            Ok((json!({"graph": c.to_json(cfg.profiles), "curl_defect": defect}), EXIT_OK))
        }
        Command::Equiv(args) => equiv(cfg, args),
        Command::Reconstruct { graph, arc, moment_file, eps, grid, noise } => {
            let ms = match (graph, moment_file) {
                (Some(g), _) => {
                    let m = read_graph(g)?;
                    let e = m.edges.get(*arc).ok_or_else(|| Error::InvalidInput(format!("no arc {arc}")))?;
                    MomentSequence::from_edge(e)
                }
                (None, Some(p)) => {
                    let doc: Value = serde_json::from_reader(BufReader::new(File::open(p)?))?;
                    let num = |k: &str| doc[k].as_f64().ok_or_else(|| Error::InvalidInput(format!("missing number `{k}`")));
                    let m: Vec<f64> = doc["m"]
                        .as_array()
                        .ok_or_else(|| Error::InvalidInput("missing array `m`".into()))?
                        .iter()
                        .map(|x| x.as_f64().ok_or_else(|| Error::InvalidInput("non-numeric moment".into())))
                        .collect::<Result<_>>()?;
                    MomentSequence::new(num("lo")?, num("hi")?, m)?
                }
                (None, None) => return Err(Error::InvalidInput("give --graph or --moment-file".into())),
            };
            let opts = ReconstructOptions { eps_rel: *eps, grid: *grid, tol_feas: cfg.tol_feas, noise: *noise };
            let r = reconstruct_density(&ms, &opts)?;
            Ok((
                json!({
                    "lo": ms.lo, "hi": ms.hi,
                    "points": r.points, "density": r.density,
                    "effective_n": r.effective_n, "eps": r.eps, "defect": r.defect, "mass": r.mass(),
                }),
                EXIT_OK,
            ))
        }
        Command::Simulate { n, init, t_end, snapshots, dt, upsample } => {
            let spec = match init {
                Some(p) => serde_json::from_reader(BufReader::new(File::open(p)?))?,
                None => default_init(),
            };
            let state = TorusFlowState::from_spec(*n, &spec)?;
            let opts = TraceOptions {
                t_end: *t_end,
                samples: *snapshots,
                dt: *dt,
                upsample: *upsample,
                moments: cfg.moments.min(8),
                circulation: CirculationOptions { persistence: if cfg.persistence > 0.0 { cfg.persistence } else { 1e-3 }, ..circulation_options(cfg) },
            };
            let trace = casimir_trace(&state, &opts)?;
            Ok((json!({"n": n, "init": spec, "trace": trace.to_json()}), EXIT_OK))
        }
        Command::Fixture { name, dir, size, amount } => fixture(cfg, *name, dir, *size, *amount),
    }
}

pub fn default_init() -> InitSpec {
    serde_json::from_value(json!({"modes": [
        {"kx": 1, "ky": 0, "amp": 1.0},
        {"kx": 0, "ky": 1, "amp": 0.5},
        {"kx": 1, "ky": 1, "amp": 0.1},
    ]}))
    .expect("valid spec")
}

fn reader(p: &Path) -> Result<BufReader<File>> {
    File::open(p).map(BufReader::new).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
}

fn read_reals(p: &Path) -> Result<Vec<f64>> {
    parse_reals(reader(p)?)
}

fn read_surface(mesh: &Path, areas: Option<&Path>) -> Result<TriangulatedSurface<f64>> {
    let (positions, triangles) = parse_off::<f64, _>(reader(mesh)?)?;
    match areas {
        Some(a) => TriangulatedSurface::from_areas(positions.len(), triangles, read_reals(a)?, Some(positions)),
        None => TriangulatedSurface::from_positions(positions, triangles),
    }
}

/// Reads a 1-form from lines `u v value` (`#` starts a comment).
pub fn read_form(surface: &TriangulatedSurface<f64>, p: &Path) -> Result<DiscreteOneForm<f64>> {
    let mut triples = Vec::new();
    for (i, line) in reader(p)?.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let parts: Vec<&str> = body.split_whitespace().collect();
        let bad = |msg: String| Error::Parse { line: i + 1, msg };
        if parts.len() != 3 {
            return Err(bad(format!("expected `u v value`, got {} fields", parts.len())));
        }
        let u = parts[0].parse::<usize>().map_err(|e| bad(e.to_string()))?;
        let v = parts[1].parse::<usize>().map_err(|e| bad(e.to_string()))?;
        let x = parts[2].parse::<f64>().map_err(|e| bad(e.to_string()))?;
        triples.push((u, v, x));
    }
    DiscreteOneForm::from_triples(surface, &triples)
}

pub fn write_form<W: Write>(surface: &TriangulatedSurface<f64>, form: &DiscreteOneForm<f64>, mut w: W) -> Result<()> {
    for (e, x) in surface.edges().iter().zip(form.values()) {
        writeln!(w, "{} {} {:e}", e.a, e.b, x)?;
    }
    Ok(())
}

/// Accepts a bare graph document or a command output wrapping one under `graph`.
fn read_graph(p: &Path) -> Result<MeasuredReebGraph<f64>> {
    let doc: Value = serde_json::from_reader(reader(p)?)?;
    let g = if doc.get("graph").is_some() { &doc["graph"] } else { &doc };
    MeasuredReebGraph::from_json(g)
}

fn measured(cfg: &RunConfig, mesh: &Path, field: &Path, areas: Option<&Path>, perturb: bool) -> Result<(MeasuredReebGraph<f64>, Value)> {
    let surface = read_surface(mesh, areas)?;
    let values = read_reals(field)?;
    if values.len() != surface.num_vertices() {
        return Err(Error::CountMismatch { what: "field values", expected: surface.num_vertices(), found: values.len() });
    }
    let mut field = classify_vertices(&surface, values);
    if perturb {
        field = perturb_to_simple_with(&field, &surface, cfg.perturb_eps)?;
    }
    let cert = certify_simple(&field, &surface).map_err(Error::NotSimple)?;
    let (graph, qmap) = build_reeb(&surface, &field, &cert)?;
    let (graph, qmap) = if cfg.persistence > 0.0 {
        let (lo, hi) = field.value_range();
        let (g, q, _) = simplify(&graph, &qmap, cfg.persistence * (hi - lo));
        (g, q)
    } else {
        (graph, qmap)
    };
    let report = check_compatibility(&graph, &surface);
    let m = pushforward_measure(&surface, &graph, &qmap, cfg.samples, cfg.moments);
    let compat = json!({"betti1": report.betti1, "genus": report.genus, "pass": report.pass, "detail": report.detail});
    Ok((m, compat))
}

fn analyze(cfg: &RunConfig, mesh: &Path, field: &Path, areas: Option<&Path>, perturb: bool) -> Result<(Value, i32)> {
    let (m, compat) = measured(cfg, mesh, field, areas, perturb)?;
    Ok((json!({"graph": m.to_json(cfg.profiles), "compatibility": compat, "total_m": m.total_moments()}), EXIT_OK))
}

fn moments(cfg: &RunConfig, graph: &Path, arc: Option<usize>, lambda: Option<Complex64>) -> Result<(Value, i32)> {
    let m = read_graph(graph)?;
    let arcs: Vec<usize> = match arc {
        Some(a) if a < m.edges.len() => vec![a],
        Some(a) => return Err(Error::InvalidInput(format!("no arc {a}"))),
        None => (0..m.edges.len()).collect(),
    };
    let mut out = Vec::new();
    for a in arcs {
        let ms = MomentSequence::from_edge(&m.edges[a]);
        let rep = hausdorff_check(&ms, cfg.tol_feas);
        let mut entry = json!({
            "arc": a,
            "lo": ms.lo,
            "hi": ms.hi,
            "m": ms.values,
            "m_rescaled": ms.rescaled(),
            "feasible": rep.feasible,
            "violations": rep.violations.len(),
            "worst": rep.worst,
        });
        if let Some(z) = lambda {
            entry["stieltjes"] = match stieltjes_transform(&ms, z, StieltjesMode::Series { margin: 0.05 }) {
                Ok(v) => json!({"re": v.value.re, "im": v.value.im, "tail_bound": v.tail_bound}),
                Err(e) => json!({"error": e.to_string()}),
            };
        }
        out.push(entry);
    }
    Ok((json!({"arcs": out, "total_m": m.total_moments()}), EXIT_OK))
}

fn equiv(cfg: &RunConfig, a: &EquivArgs) -> Result<(Value, i32)> {
    let mopts = match_options(cfg);
    let code = |v: &Verdict| if v.is_isomorphic() { EXIT_OK } else { EXIT_DIFFERENT };
    if let (Some(ga), Some(gb)) = (&a.graph_a, &a.graph_b) {
        let v = measured_iso(&read_graph(ga)?, &read_graph(gb)?, &mopts);
        let c = code(&v);
        return Ok((json!({"mode": "graph", "result": v.to_json()}), c));
    }
    let (Some(ma), Some(mb)) = (&a.mesh_a, &a.mesh_b) else {
        return Err(Error::InvalidInput("give --graph-a/--graph-b or --mesh-a/--mesh-b".into()));
    };
    match (&a.form_a, &a.form_b) {
        (Some(fa), Some(fb)) => {
            let sa = read_surface(ma, a.areas_a.as_deref())?;
            let sb = read_surface(mb, a.areas_b.as_deref())?;
            let (wa, wb) = (read_form(&sa, fa)?, read_form(&sb, fb)?);
            let va = a.field_a.as_deref().map(read_reals).transpose()?;
            let vb = a.field_b.as_deref().map(read_reals).transpose()?;
            let opts = OrbitOptions { matching: mopts, circulation: circulation_options(cfg) };
            let r = same_orbit(
                Coset { surface: &sa, form: &wa, field: va.as_deref() },
                Coset { surface: &sb, form: &wb, field: vb.as_deref() },
                &opts,
            )?;
            let c = code(&r.verdict);
            Ok((json!({"mode": "coset", "result": r.to_json()}), c))
        }
        (None, None) => {
            let (Some(fa), Some(fb)) = (&a.field_a, &a.field_b) else {
                return Err(Error::InvalidInput("mesh inputs need --field-a/--field-b or --form-a/--form-b".into()));
            };
            let (ga, _) = measured(cfg, ma, fa, a.areas_a.as_deref(), true)?;
            let (gb, _) = measured(cfg, mb, fb, a.areas_b.as_deref(), true)?;
            let v = measured_iso(&ga, &gb, &mopts);
            let c = code(&v);
            let mut result = v.to_json();
            result["left"] = ga.to_json(false);
            result["right"] = gb.to_json(false);
            Ok((json!({"mode": "measured", "result": result}), c))
        }
        _ => Err(Error::InvalidInput("give both --form-a and --form-b".into())),
    }
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut File) -> Result<()>) -> Result<String> {
    let p = dir.join(name);
    let mut file = File::create(&p)?;
    f(&mut file)?;
    Ok(p.display().to_string())
}

fn fixture(cfg: &RunConfig, name: FixtureName, dir: &Path, size: Option<usize>, amount: Option<f64>) -> Result<(Value, i32)> {
    fs::create_dir_all(dir)?;
    let mut files = serde_json::Map::new();
    let mut put = |key: &str, path: String| {
        files.insert(key.to_string(), json!(path));
    };
    let torus = |n: usize, f: fn(f64, f64) -> f64| (fixtures::flat_torus::<f64>(n), fixtures::sample_torus::<f64>(n, f));
    let vorticity_form = |s: &TriangulatedSurface<f64>, f: &[f64]| oneform_from_vorticity(s, &vorticity_two_form(s, f));
    match name {
        FixtureName::Octahedron | FixtureName::Sphere => {
            let s = if name == FixtureName::Octahedron { fixtures::octahedron::<f64>() } else { fixtures::octa_sphere::<f64>(size.unwrap_or(50)) };
            let f = fixtures::height(&s);
            put("mesh", write_file(dir, "mesh.off", |w| write_off(&s, w))?);
            put("field", write_file(dir, "field.txt", |w| write_reals(&f, w))?);
        }
        FixtureName::Figure1 | FixtureName::Saddle => {
            let g = if name == FixtureName::Figure1 { fixtures::two_maxima_torus } else { fixtures::saddle_torus };
            let (s, f) = torus(size.unwrap_or(64), g);
            let w = vorticity_form(&s, &f)?;
            put("mesh", write_file(dir, "mesh.off", |o| write_off(&s, o))?);
            put("areas", write_file(dir, "areas.txt", |o| write_reals(s.areas(), o))?);
            put("field", write_file(dir, "field.txt", |o| write_reals(&f, o))?);
            put("form", write_file(dir, "form.txt", |o| write_form(&s, &w, o))?);
        }
        FixtureName::Figure3 => {
            let fx = fixtures::figure_three_pair::<f64>(size.unwrap_or(12), amount.unwrap_or(0.3));
            put("mesh", write_file(dir, "mesh.off", |o| write_off(&fx.first, o))?);
            put("field", write_file(dir, "field.txt", |o| write_reals(&fx.field, o))?);
            put("areas_a", write_file(dir, "areas_a.txt", |o| write_reals(fx.first.areas(), o))?);
            put("areas_b", write_file(dir, "areas_b.txt", |o| write_reals(fx.second.areas(), o))?);
        }
        FixtureName::Shift => {
            let n = size.unwrap_or(32);
            let (s, f) = torus(n, fixtures::two_maxima_torus);
            let wa = vorticity_form(&s, &f)?;
            let wb = wa.add(&fixtures::constant_form(&s, 2.0 * std::f64::consts::PI, amount.unwrap_or(1.0), 0.0));
            put("mesh", write_file(dir, "mesh.off", |o| write_off(&s, o))?);
            put("areas", write_file(dir, "areas.txt", |o| write_reals(s.areas(), o))?);
            put("form_a", write_file(dir, "form_a.txt", |o| write_form(&s, &wa, o))?);
            put("form_b", write_file(dir, "form_b.txt", |o| write_form(&s, &wb, o))?);
        }
        FixtureName::Shear => {
            let n = size.unwrap_or(32);
            let (s, f) = torus(n, fixtures::two_maxima_torus);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let perm = shear_permutation(n, rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            let moved = shear_surface(&s, &perm)?;
            let mut g = vec![0.0; f.len()];
            for (v, x) in f.iter().enumerate() {
                g[perm[v]] = *x;
            }
            put("mesh_a", write_file(dir, "mesh_a.off", |o| write_off(&s, o))?);
            put("areas", write_file(dir, "areas.txt", |o| write_reals(s.areas(), o))?);
            put("field_a", write_file(dir, "field_a.txt", |o| write_reals(&f, o))?);
            put("mesh_b", write_file(dir, "mesh_b.off", |o| write_off(&moved, o))?);
            put("field_b", write_file(dir, "field_b.txt", |o| write_reals(&g, o))?);
        }
    }
    Ok((json!({"fixture": format!("{name:?}").to_lowercase(), "files": files}), EXIT_OK))
}

/// Vertex permutation of the grid map `(i, j) -> (i + k j + a, j + b)` on the `n x n` torus grid.
pub fn shear_permutation(n: usize, k: usize, a: usize, b: usize) -> Vec<usize> {
    let mut perm = vec![0; n * n];
    for j in 0..n {
        for i in 0..n {
            perm[fixtures::grid_index(n, i, j)] = fixtures::grid_index(n, (i + k * j + a) % n, (j + b) % n);
        }
    }
    perm
}

/// Image of a grid mesh under a vertex map: vertices keep their grid positions, triangles
/// follow the map, areas are carried over.
pub fn shear_surface(s: &TriangulatedSurface<f64>, perm: &[usize]) -> Result<TriangulatedSurface<f64>> {
    let tris = s.triangles().iter().map(|t| t.map(|v| perm[v])).collect();
    TriangulatedSurface::from_areas(s.num_vertices(), tris, s.areas().to_vec(), s.positions().map(|p| p.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_default_tolerances() {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        let help = cmd.render_long_help().to_string();
        for needle in ["1e-6", "1e-8", "1e-10", "1e-9"] {
            assert!(help.contains(needle), "{needle} missing from help");
        }
        assert!(help.contains("Exit codes"));
    }

    #[test]
    fn perturb_default_matches_library() {
        let cli = Cli::try_parse_from(["casimir-kit", "fixture", "octahedron", "--dir", "."]).unwrap();
        assert_eq!(cli.config.perturb_eps, crate::geometry::PERTURB_RELATIVE);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), EXIT_INVALID);
        assert_eq!(exit_code(&Error::NotSimple(crate::geometry::ViolationReport { violations: vec![] })), EXIT_NOT_SIMPLE);
        assert_eq!(exit_code(&Error::InfeasibleMoments { violations: 1, worst: 0.1 }), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::TopologyChange(1.0)), EXIT_NUMERICAL);
    }

    #[test]
    fn complex_argument() {
        assert_eq!(parse_complex("2,-0.5").unwrap(), Complex64::new(2.0, -0.5));
        assert!(parse_complex("2").is_err());
    }

    #[test]
    fn shear_is_a_permutation() {
        let mut p = shear_permutation(8, 3, 1, 5);
        p.sort_unstable();
        assert_eq!(p, (0..64).collect::<Vec<_>>());
    }
}
