//! Command-line front end. Every run writes its primary outputs plus a
//! manifest with input hashes, settings, timings and a certificate summary.
//!
//! Exit codes: 0 on success, 2 when a construction certifies its own
//! failure (an inequality it relies on does not hold on this input), 1 for
//! usage and I/O errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::continuum::continuum_trace;
use crate::extension::{extend, ExtensionProblem, ProblemFile, SCHEMA};
use crate::metric_core::{MetricError, VertexId, REPORT_SEED};
use crate::modulus::{analytic_bounds, solve_modulus, BoundParams, CurveFamilySpec, FamilyShape};
use crate::pathfinder::{clearance_path, uniform_connect_with, ClearanceParams, PathError, UniformParams};
use crate::space_gallery::{cylinder_space, grid_space, plane_pair_space, regularity_fit};
use crate::straighten::{curve_distortion, straighten_traced, StraightenConfig};
use crate::whitney::{ds_filtration, filter_endpoints, verify_filtration, whitney_decompose};
use crate::{Path, Space};

#[derive(Debug, Parser, Serialize)]
#[command(name = "bilip", version, about = "Bi-Lipschitz extension and curve tools on discretized metric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every randomized step; overrides seeds in input files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Where to write the run manifest; defaults to `<output>.manifest.json`.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Also write plotting CSVs and a script into this directory.
    #[arg(long, global = true)]
    pub plot_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Grid,
    PlanePair,
    Cylinder,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a space from the gallery.
    GenSpace {
        #[arg(long, value_enum)]
        kind: SpaceKind,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Lattice points per side; the circumference for cylinders.
        #[arg(long, default_value_t = 9)]
        side: usize,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long, default_value_t = 0.0)]
        hole_radius: f64,
        /// Cylinder length in lattice steps.
        #[arg(long, default_value_t = 9)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
        /// Write a regularity estimate of the generated space here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Whitney decomposition of a finite set on the line, with filtrations.
    Whitney {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        rmin: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 2.0)]
        p0: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.05)]
        delta0: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discrete p-modulus of a curve family.
    Modulus {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Path between two vertices keeping clear of an obstacle set.
    Connect {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
        #[arg(long)]
        obstacles: Option<PathBuf>,
        /// Route through porosity holes at dyadic scales.
        #[arg(long)]
        uniform: bool,
        #[arg(long, default_value_t = 2.0)]
        p0: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace a curve by a bi-Lipschitz one nearby with the same endpoints.
    Straighten {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        curve: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Extend a bi-Lipschitz map from a finite subset of the line to a curve.
    Extend {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        rmin: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Trace a connected vertex set by a bi-Lipschitz curve.
    Trace {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "K")]
        k: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Re-check the certificates recorded in a report.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenSpace { .. } => "gen-space",
            Command::Whitney { .. } => "whitney",
            Command::Modulus { .. } => "modulus",
            Command::Connect { .. } => "connect",
            Command::Straighten { .. } => "straighten",
            Command::Extend { .. } => "extend",
            Command::Trace { .. } => "trace",
            Command::Verify { .. } => "verify",
        }
    }

    fn primary_output(&self) -> Option<&PathBuf> {
        match self {
            Command::GenSpace { out, .. }
            | Command::Whitney { out, .. }
            | Command::Modulus { out, .. }
            | Command::Connect { out, .. }
            | Command::Straighten { out, .. }
            | Command::Extend { out, .. }
            | Command::Trace { out, .. } => Some(out),
            Command::Verify { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("certified failure: '{clause}' does not hold: {detail}")]
    Certified { clause: String, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Certified { .. } => 2,
            _ => 1,
        }
    }

    fn certified(clause: impl Into<String>, detail: impl ToString) -> Self {
        CliError::Certified { clause: clause.into(), detail: detail.to_string() }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Failed(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    /// The parsed arguments.
    pub config: Value,
    pub seed: Option<u64>,
    /// SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every output file.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_s: f64,
    pub stage_timings: Vec<(String, f64)>,
    pub certificates: BTreeMap<String, bool>,
    pub exit_code: i32,
    pub error: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Bookkeeping for one invocation.
struct Run {
    started: Instant,
    stage_started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    timings: Vec<(String, f64)>,
    certificates: BTreeMap<String, bool>,
    plot_dir: Option<PathBuf>,
}

impl Run {
    fn new(plot_dir: Option<PathBuf>) -> Self {
        let now = Instant::now();
        Self {
            started: now,
            stage_started: now,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings: Vec::new(),
            certificates: BTreeMap::new(),
            plot_dir,
        }
    }

    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push((name.to_string(), (now - self.stage_started).as_secs_f64()));
        self.stage_started = now;
    }

    fn read(&mut self, path: &FsPath) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&mut self, path: &FsPath) -> Result<T, CliError> {
        let bytes = self.read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Parse { path: path.to_path_buf(), detail: e.to_string() })
    }

    fn read_space(&mut self, path: &FsPath) -> Result<Space, CliError> {
        let bytes = self.read(path)?;
        Space::read_json(bytes.as_slice()).map_err(|e| CliError::Parse { path: path.to_path_buf(), detail: e.to_string() })
    }

    fn read_set(&mut self, path: &FsPath) -> Result<Vec<VertexId>, CliError> {
        let v: Value = self.read_json(path)?;
        parse_vertex_set(&v).ok_or_else(|| CliError::Parse {
            path: path.to_path_buf(),
            detail: "expected a list of vertex ids or an object with a \"set\" list".into(),
        })
    }

    fn write(&mut self, path: &FsPath, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        }
        fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        self.outputs.insert(path.display().to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, path: &FsPath, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
        bytes.push(b'\n');
        self.write(path, &bytes)
    }

    fn write_curve(&mut self, space: &Space, curve: &Path, path: &FsPath) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        curve.write_csv(space, &mut bytes)?;
        self.write(path, &bytes)
    }

    fn certify(&mut self, clause: &str, passed: bool) {
        self.certificates.insert(clause.to_string(), passed);
    }

    fn plot(&mut self, space: &Space, samples: &[(f64, VertexId)], stem: &str) -> Result<(), CliError> {
        let Some(dir) = self.plot_dir.clone() else { return Ok(()) };
        for file in emit_plot_data(Some(space), &PlotSource::Curve(samples), &dir, stem)? {
            let bytes = fs::read(&file).map_err(|source| CliError::Io { path: file.clone(), source })?;
            self.outputs.insert(file.display().to_string(), sha256_hex(&bytes));
        }
        Ok(())
    }
}

/// Accepts `[1, 2, 3]` or `{"set": [...]}` (also under `"K"` or `"Y"`).
fn parse_vertex_set(v: &Value) -> Option<Vec<VertexId>> {
    let list = match v {
        Value::Array(_) => v,
        Value::Object(m) => m.get("set").or_else(|| m.get("K")).or_else(|| m.get("Y"))?,
        _ => return None,
    };
    list.as_array()?.iter().map(|x| x.as_u64().map(|n| VertexId(n as usize))).collect()
}

/// Input of [`emit_plot_data`].
pub enum PlotSource<'a> {
    /// Parameterized curve samples.
    Curve(&'a [(f64, VertexId)]),
    /// Distortion ratios only.
    Ratios(&'a [f64]),
}

/// Ratios `d(x_i, x_j) / |t_i - t_j|` over all sample pairs, or over a fixed
/// seeded subset when there are many.
pub fn distortion_ratios(space: &Space, samples: &[(f64, VertexId)]) -> Result<Vec<f64>, MetricError> {
    let idx: Vec<usize> = samples.iter().map(|s| space.index(s.1)).collect::<Result<_, _>>()?;
    let m = samples.len();
    let mut out = Vec::new();
    let push = |i: usize, j: usize, out: &mut Vec<f64>| {
        let gap = (samples[i].0 - samples[j].0).abs();
        if gap > 0.0 {
            out.push(space.dist_idx(idx[i], idx[j]) / gap);
        }
    };
    if m * m <= 40_000 {
        for i in 0..m {
            for j in i + 1..m {
                push(i, j, &mut out);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(REPORT_SEED);
        for _ in 0..20_000 {
            let (i, j) = (rng.gen_range(0..m), rng.gen_range(0..m));
            push(i, j, &mut out);
        }
    }
    Ok(out)
}

fn histogram_csv(ratios: &[f64], bins: usize) -> String {
    let mut s = String::from("log2_lo,log2_hi,count\n");
    let logs: Vec<f64> = ratios.iter().filter(|r| **r > 0.0 && r.is_finite()).map(|r| r.log2()).collect();
    if logs.is_empty() {
        return s;
    }
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-9);
    let mut counts = vec![0usize; bins];
    for x in logs {
        counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", lo + k as f64 * width, lo + (k + 1) as f64 * width, c);
    }
    s
}

/// Writes `<stem>_curve.csv` (coordinates when the space has them, otherwise
/// vertex ids and parameters), `<stem>_ratios.csv` with a histogram of
/// distortion ratios, and `<stem>_plot.py` that reads only those files.
pub fn emit_plot_data(
    space: Option<&Space>,
    source: &PlotSource,
    dir: &FsPath,
    stem: &str,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    let mut write = |name: String, text: String| -> Result<(), CliError> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
        files.push(path);
        Ok(())
    };
    let (curve_csv, ratios) = match (source, space) {
        (PlotSource::Curve(samples), Some(space)) => {
            let dim = samples.iter().filter_map(|s| space.coords(s.1)).map(<[f64]>::len).max().unwrap_or(0);
            let mut text = String::from("t,vertex_id");
            for k in 0..dim {
                let _ = write!(text, ",x{k}");
            }
            text.push('\n');
            for &(t, v) in samples.iter() {
                let _ = write!(text, "{t},{}", v.0);
                if let Some(c) = space.coords(v) {
                    for x in c {
                        let _ = write!(text, ",{x}");
                    }
                }
                text.push('\n');
            }
            (Some((text, dim)), distortion_ratios(space, samples)?)
        }
        (PlotSource::Curve(_), None) => return Err(CliError::Usage("curve plots need the space".into())),
        (PlotSource::Ratios(r), _) => (None, r.to_vec()),
    };
    let mut script = String::from("import csv\nimport matplotlib.pyplot as plt\n\n");
    let _ = write!(
        script,
        "rows = list(csv.DictReader(open('{stem}_ratios.csv')))\n\
         plt.figure()\n\
         plt.bar([float(r['log2_lo']) for r in rows], [int(r['count']) for r in rows],\n\
         \x20       width=[float(r['log2_hi']) - float(r['log2_lo']) for r in rows], align='edge')\n\
         plt.xlabel('log2 distance ratio')\n\
         plt.savefig('{stem}_ratios.png')\n"
    );
    if let Some((text, dim)) = curve_csv {
        write(format!("{stem}_curve.csv"), text)?;
        let (xs, ys) = if dim >= 2 { ("x0", "x1") } else { ("t", "vertex_id") };
        let _ = write!(
            script,
            "\ncurve = list(csv.DictReader(open('{stem}_curve.csv')))\n\
             plt.figure()\n\
             plt.plot([float(r['{xs}']) for r in curve], [float(r['{ys}']) for r in curve], marker='.')\n\
             plt.savefig('{stem}_curve.png')\n"
        );
    }
    write(format!("{stem}_ratios.csv"), histogram_csv(&ratios, 20))?;
    write(format!("{stem}_plot.py"), script)?;
    Ok(files)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    apply_thread_cap();
    let mut run = Run::new(cli.plot_dir.clone());
    let outcome = dispatch(&cli, &mut run);
    let exit_code = match &outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let manifest = RunManifest {
        schema: SCHEMA,
        command: cli.command.name().to_string(),
        config: serde_json::to_value(&cli.command).unwrap_or(Value::Null),
        seed: cli.seed,
        inputs: run.inputs.clone(),
        outputs: run.outputs.clone(),
        wall_clock_s: run.started.elapsed().as_secs_f64(),
        stage_timings: run.timings.clone(),
        certificates: run.certificates.clone(),
        exit_code,
        error: outcome.as_ref().err().map(|e| e.to_string()),
    };
    let target = cli.manifest.clone().or_else(|| {
        cli.command.primary_output().map(|out| {
            let mut name = out.clone().into_os_string();
            name.push(".manifest.json");
            PathBuf::from(name)
        })
    });
    let text = serde_json::to_string_pretty(&manifest).unwrap_or_default();
    match target {
        Some(path) => {
            if let Err(e) = fs::write(&path, text + "\n") {
                eprintln!("error: {}: {e}", path.display());
                return exit_code.max(1);
            }
        }
        None => println!("{text}"),
    }
    exit_code
}

/// Caps rayon's pool at `BILIP_THREADS` when set.
fn apply_thread_cap() {
    if let Some(n) = std::env::var("BILIP_THREADS").ok().and_then(|s| s.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cli: &Cli, run: &mut Run) -> Result<(), CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::GenSpace { kind, dim, side, h, hole_radius, length, out, report } => {
            let space = match kind {
                SpaceKind::Grid => grid_space(*dim, *side, *h),
                SpaceKind::PlanePair => plane_pair_space(*dim, *side, *h, *hole_radius).map(|p| p.space),
                SpaceKind::Cylinder => cylinder_space(*side, *length, *h),
            }
            .map_err(|e| CliError::Usage(e.to_string()))?;
            run.stage("generate");
            run.write_json(out, &space.to_file())?;
            if let Some(path) = report {
                let r_max = (*h * *side as f64 / 4.0).max(2.0 * h);
                let fit = regularity_fit(&space, 8, *h, r_max, seed.unwrap_or(7)).map_err(|e| CliError::Failed(e.to_string()))?;
                run.stage("estimate");
                run.write_json(path, &json!({ "schema": SCHEMA, "regularity": fit }))?;
            }
            Ok(())
        }
        Command::Whitney { a, rmin, l, p0, lambda, delta0, out } => {
            let v: Value = run.read_json(a)?;
            let pts: Vec<f64> = v
                .as_array()
                .or_else(|| v.get("A").and_then(Value::as_array))
                .and_then(|xs| xs.iter().map(Value::as_f64).collect())
                .ok_or_else(|| CliError::Parse { path: a.clone(), detail: "expected a list of numbers or {\"A\": [...]}".into() })?;
            let dec = whitney_decompose(&pts, *rmin).map_err(|e| CliError::Usage(e.to_string()))?;
            let ef = filter_endpoints(&dec, *l, *p0).map_err(|e| CliError::Usage(e.to_string()))?;
            let qf = ds_filtration(&dec, *l, *lambda, *delta0).map_err(|e| CliError::Usage(e.to_string()))?;
            run.stage("decompose");
            let axioms = dec.verify();
            let classes = verify_filtration(&dec, &qf);
            run.certify("whitney axioms", axioms.is_ok());
            run.certify("interval filtration", classes.is_ok());
            let taus: Vec<_> = (0..dec.endpoints.len()).map(|k| dec.tau(k)).collect();
            run.write_json(
                out,
                &json!({
                    "schema": SCHEMA,
                    "decomposition": dec,
                    "tau": taus,
                    "endpoint_filtration": ef,
                    "interval_filtration": qf,
                }),
            )?;
            if let Err(v) = axioms {
                return Err(CliError::certified("whitney axioms", v.0));
            }
            classes.map_err(|v| CliError::certified("interval filtration", v.0))
        }
        Command::Modulus { space, family, p, tol, out } => {
            #[derive(Deserialize)]
            struct FamilyFile {
                #[serde(flatten)]
                spec: CurveFamilySpec,
                #[serde(default)]
                shape: Option<FamilyShape>,
                #[serde(default)]
                bounds: Option<BoundParams>,
            }
            let space = run.read_space(space)?;
            let fam: FamilyFile = run.read_json(family)?;
            run.stage("load");
            let result = solve_modulus(&space, &fam.spec, *p, *tol).map_err(|e| CliError::Failed(e.to_string()))?;
            run.stage("solve");
            let (lower, upper) = match &fam.shape {
                Some(shape) => analytic_bounds(&space, &fam.spec, *p, shape, &fam.bounds.unwrap_or_default())
                    .map_err(|e| CliError::Usage(e.to_string()))?,
                None => (None, None),
            };
            let under_upper = upper.is_none_or(|u| result.value <= u * (1.0 + tol) + tol);
            run.certify("modulus below admissible mass", under_upper);
            run.write_json(out, &json!({ "schema": SCHEMA, "result": result, "lower_bound": lower, "upper_bound": upper }))?;
            if !under_upper {
                return Err(CliError::certified(
                    "modulus below admissible mass",
                    format!("{} > {}", result.value, upper.unwrap_or(f64::NAN)),
                ));
            }
            Ok(())
        }
        Command::Connect { space, x, y, obstacles, uniform, p0, out } => {
            let space = run.read_space(space)?;
            let obs = match obstacles {
                Some(path) => run.read_set(path)?,
                None => Vec::new(),
            };
            run.stage("load");
            let (x, y) = (VertexId(*x), VertexId(*y));
            let found = if *uniform {
                uniform_connect_with(&space, &obs, x, y, &UniformParams { p0: *p0, ..UniformParams::default() })
            } else {
                clearance_path(&space, x, y, &obs, &ClearanceParams::default()).map(|c| c.curve)
            };
            let curve = found.map_err(|e| match e {
                PathError::NoClearancePath { .. } | PathError::PorosityWitnessNotFound { .. } => {
                    CliError::certified("path existence", e)
                }
                other => CliError::Usage(other.to_string()),
            })?;
            run.stage("search");
            let clear = !curve.points().iter().any(|v| obs.contains(v));
            run.certify("path avoids obstacles", clear);
            run.write_curve(&space, &curve, out)?;
            run.plot(&space, &arc_samples(&curve), "connect")?;
            if !clear {
                return Err(CliError::certified("path avoids obstacles", "curve meets the obstacle set"));
            }
            Ok(())
        }
        Command::Straighten { space, curve, eps, out, report } => {
            let space = run.read_space(space)?;
            let bytes = run.read(curve)?;
            let sigma = Path::read_csv(&space, bytes.as_slice())
                .map_err(|e| CliError::Parse { path: curve.clone(), detail: e.to_string() })?;
            run.stage("load");
            let trace = straighten_traced(&space, &sigma, &StraightenConfig::new(*eps), true).map_err(|e| match e {
                crate::straighten::StraightenError::ChainNotFound { .. } => CliError::certified("net chain", e),
                other => CliError::Usage(other.to_string()),
            })?;
            run.stage("straighten");
            let out_curve = &trace.curve;
            let h = space.resolution();
            let ends = out_curve.first() == sigma.first() && out_curve.last() == sigma.last();
            let haus = space.hausdorff_distance(sigma.points(), out_curve.points())?;
            let reach = space.directed_hausdorff(&space.indices(out_curve.points())?, &space.indices(sigma.points())?);
            let haus_bound = eps * trace.diam + h;
            let l = if out_curve.length() > 0.0 { curve_distortion(&space, out_curve)?.l_measured } else { 1.0 };
            let l_bound = 2f64.powi(trace.hops() as i32);
            let ls: Vec<f64> = trace.steps.iter().filter_map(|s| s.l_measured).collect();
            // a fold can reach 2L + 1 when the new geodesic ends near an early part of the curve
            let folds = ls.windows(2).all(|w| w[1] <= (2.0 * w[0] + 1.0) * (1.0 + 1e-6));
            let checks = [
                ("endpoints preserved", ends),
                ("output within eps diam + h of the input", reach <= haus_bound),
                ("distortion within 2^(n-1)", l <= l_bound * (1.0 + 1e-9)),
                ("each fold within 2L + 1", folds),
            ];
            for (c, ok) in checks {
                run.certify(c, ok);
            }
            run.write_curve(&space, out_curve, out)?;
            if let Some(path) = report {
                run.write_json(
                    path,
                    &json!({
                        "schema": SCHEMA,
                        "shortcut": trace.shortcut,
                        "chain": trace.chain,
                        "steps": trace.steps,
                        "diam": trace.diam,
                        "hausdorff": haus,
                        "output_reach": reach,
                        "hausdorff_bound": haus_bound,
                        "L_measured": l,
                        "L_bound": l_bound,
                        "certificates": checks.iter().map(|(c, ok)| json!({ "clause": c, "passed": ok })).collect::<Vec<_>>(),
                    }),
                )?;
            }
            run.plot(&space, &arc_samples(out_curve), "straighten")?;
            match checks.iter().find(|c| !c.1) {
                Some((c, _)) => Err(CliError::certified(*c, format!("reach {reach}, L {l}"))),
                None => Ok(()),
            }
        }
        Command::Extend { space, problem, rmin, out, report } => {
            let space = run.read_space(space)?;
            let file: ProblemFile = run.read_json(problem)?;
            let pairs = file.pairs().map_err(|e| CliError::Usage(e.to_string()))?;
            let mut config = file.config.clone();
            if rmin.is_some() {
                config.r_min = *rmin;
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            let prob = ExtensionProblem::new(&space, &pairs, config).map_err(|e| CliError::Usage(e.to_string()))?;
            run.stage("load");
            let result = extend(&prob).map_err(|e| {
                if e.is_certified_failure() {
                    run.certify(&e.clause(), false);
                    CliError::certified(e.clause(), e)
                } else {
                    CliError::Usage(e.to_string())
                }
            })?;
            run.stage("extend");
            for c in &result.certificates {
                let entry = run.certificates.entry(c.clause.clone()).or_insert(true);
                *entry &= c.passed;
            }
            run.certify("component diameters", result.component_certificates.iter().all(|c| c.passed));
            let breakpoints: Vec<(f64, f64)> = result.pieces.iter().map(|p| (p.lo, p.hi)).collect();
            run.write_json(out, &json!({ "schema": SCHEMA, "breakpoints": breakpoints, "pieces": result.pieces }))?;
            if let Some(path) = report {
                let mut v = serde_json::to_value(&result).map_err(|e| CliError::Failed(e.to_string()))?;
                if let Value::Object(m) = &mut v {
                    m.remove("pieces");
                    m.insert("passed".into(), Value::Bool(result.all_passed()));
                }
                run.write_json(path, &v)?;
            }
            run.plot(&space, &result.samples(), "extend")?;
            if !result.all_passed() {
                let c = result.certificates.iter().find(|c| !c.passed);
                return Err(CliError::certified(
                    c.map_or("component diameters".to_string(), |c| c.clause.clone()),
                    c.map_or(String::new(), |c| c.detail.clone()),
                ));
            }
            Ok(())
        }
        Command::Trace { space, k, eps, x, y, out, plan } => {
            let space = run.read_space(space)?;
            let set = run.read_set(k)?;
            run.stage("load");
            let mut config = crate::extension::ExtensionConfig::default();
            if let Some(s) = seed {
                config.seed = s;
            }
            let traced = continuum_trace(&space, &set, *eps, VertexId(*x), VertexId(*y), config).map_err(|e| {
                if e.is_certified_failure() {
                    CliError::certified("continuum trace", e)
                } else {
                    CliError::Usage(e.to_string())
                }
            })?;
            run.stage("trace");
            for c in &traced.checks {
                run.certify(&c.clause, c.passed);
            }
            run.write_curve(&space, &traced.curve, out)?;
            if let Some(path) = plan {
                run.write_json(
                    path,
                    &json!({
                        "schema": SCHEMA,
                        "plan": traced.plan,
                        "diam": traced.diam,
                        "eps": traced.eps,
                        "r_min": traced.r_min,
                        "L_map": traced.l_map,
                        "hausdorff": traced.hausdorff,
                        "certificates": traced.checks,
                    }),
                )?;
            }
            run.plot(&space, &traced.extension.samples(), "trace")?;
            Ok(())
        }
        Command::Verify { report } => {
            let v: Value = run.read_json(report)?;
            let mut found = Vec::new();
            collect_certificates(&v, &mut found);
            if found.is_empty() {
                return Err(CliError::Usage(format!("{}: no certificates found", report.display())));
            }
            for (clause, ok) in &found {
                let entry = run.certificates.entry(clause.clone()).or_insert(true);
                *entry &= ok;
            }
            if let Some(dir) = run.plot_dir.clone() {
                let ratios: Vec<f64> = v.pointer("/report").map(|r| {
                    ["lower", "upper"].iter().filter_map(|k| r.get(k).and_then(Value::as_f64)).collect()
                }).unwrap_or_default();
                emit_plot_data(None, &PlotSource::Ratios(&ratios), &dir, "verify")?;
            }
            match found.iter().find(|c| !c.1) {
                Some((clause, _)) => Err(CliError::certified(clause.clone(), "recorded as failed")),
                None => Ok(()),
            }
        }
    }
}

/// Every object with a boolean `passed` field, named by its `clause` when present.
fn collect_certificates(v: &Value, out: &mut Vec<(String, bool)>) {
    match v {
        Value::Object(m) => {
            if let Some(ok) = m.get("passed").and_then(Value::as_bool) {
                let name = m.get("clause").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| {
                    match (m.get("lo").and_then(Value::as_f64), m.get("hi").and_then(Value::as_f64)) {
                        (Some(lo), Some(hi)) => format!("component [{lo}, {hi}]"),
                        _ => "passed".to_string(),
                    }
                });
                out.push((name, ok));
            }
            for (k, child) in m {
                if k != "passed" {
                    collect_certificates(child, out);
                }
            }
        }
        Value::Array(xs) => xs.iter().for_each(|x| collect_certificates(x, out)),
        _ => {}
    }
}

fn arc_samples(curve: &Path) -> Vec<(f64, VertexId)> {
    curve.cum_length().iter().copied().zip(curve.points().iter().copied()).collect()
}
