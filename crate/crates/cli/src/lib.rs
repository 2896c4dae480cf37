//! Verbs behind the `contagion` binary.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use contagion::{
    build_from_topology, degree_stats, emit_config, validate, ConfigError, DefaultEvent, Error,
    RngStream, Scenario, ScenarioConfig, Topology, TopologyKind, ValidationReport,
};
use serde::Serialize;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

/// Why a command failed; each kind maps to its own exit status.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
    Invalid(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Invalid(_) => EXIT_INVALID,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Runtime(m) => write!(f, "error: {m}"),
            Failure::Invalid(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => c.into(),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type Outcome<T> = Result<T, Failure>;

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_at(path))?))
}

fn ensure_dir(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))
}

pub fn load_config(path: &Path) -> Outcome<ScenarioConfig> {
    Ok(contagion::parse_config(path)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeSummary {
    pub n: usize,
    pub edges: usize,
    pub density: f64,
    pub mean_out_degree: f64,
    pub max_out_degree: usize,
    pub mean_in_degree: f64,
    pub max_in_degree: usize,
}

impl DegreeSummary {
    pub fn of(t: &Topology) -> Self {
        let st = degree_stats(t);
        let mean = st.mean_degree();
        Self {
            n: t.n(),
            edges: t.edge_count(),
            density: st.density,
            mean_out_degree: mean,
            max_out_degree: st.max_out_degree(),
            mean_in_degree: mean,
            max_in_degree: st.max_in_degree(),
        }
    }
}

impl fmt::Display for DegreeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n = {}, edges = {}, density = {:.6}, mean g = mean c = {:.4}, max g = {}, max c = {}",
            self.n,
            self.edges,
            self.density,
            self.mean_out_degree,
            self.max_out_degree,
            self.max_in_degree
        )
    }
}

/// The topology replication `stream` of the scenario would use.
pub fn sample_topology(cfg: &ScenarioConfig, stream: u64) -> Outcome<Topology> {
    let sc = Scenario::new(cfg.clone())?;
    let mut rng = RngStream::new(cfg.master_seed, stream).rng();
    let (topo, _) = sc.sample(&mut rng)?;
    Ok((*topo).clone())
}

/// Writes `topology.txt` and `degree_stats.json` into `out`.
pub fn cmd_generate(cfg: &ScenarioConfig, stream: u64, out: &Path) -> Outcome<DegreeSummary> {
    if cfg.topology == TopologyKind::External {
        return Err(Failure::Config(
            "generate needs a homogeneous or heterogeneous topology".into(),
        ));
    }
    let topo = sample_topology(cfg, stream)?;
    ensure_dir(out)?;
    let path = out.join("topology.txt");
    topo.write_edge_list(create(&path)?).map_err(io_at(&path))?;

    let summary = DegreeSummary::of(&topo);
    let path = out.join("degree_stats.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_at(&path))?;
    Ok(summary)
}

fn read_topology(path: &Path) -> Outcome<Topology> {
    let file = File::open(path).map_err(io_at(path))?;
    Topology::read_edge_list(BufReader::new(file))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Builds the balance sheets of one topology at capital ratio `r` and writes
/// them as CSV to `out`.
///
/// The topology comes from `topology`, else the scenario's external file,
/// else replication `stream` of the scenario.
pub fn cmd_inspect<W: Write>(
    cfg: &ScenarioConfig,
    topology: Option<&Path>,
    r: Option<f64>,
    stream: u64,
    out: W,
) -> Outcome<ValidationReport> {
    let topo = match (topology, &cfg.topology_file) {
        (Some(path), _) => read_topology(path)?,
        (None, Some(path)) if cfg.topology == TopologyKind::External => read_topology(path)?,
        _ => sample_topology(cfg, stream)?,
    };
    let r = r.unwrap_or(cfg.r_grid[0]);
    let (_, mut bs) = build_from_topology(&topo, cfg.s, cfg.t, cfg.q, r, cfg.e_total)?;
    if let Some(sur) = cfg.surcharge {
        bs = contagion::apply_surcharge(&bs, sur.ratio, sur.biggest_fraction)?;
    }
    bs.write_csv(out)?;
    Ok(validate(&bs))
}

#[derive(Debug, Clone, Serialize)]
pub struct RuntimeAtR {
    #[serde(rename = "R")]
    pub r: f64,
    /// Cascade time summed over replications and workers.
    pub cascade_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: String,
    pub wall_clock_seconds: f64,
    pub workers: Option<usize>,
    pub scalar: &'static str,
    pub config: ScenarioConfig,
    /// The scenario as a config file, every field explicit.
    pub config_toml: Option<String>,
    pub realized_density_mean: f64,
    pub per_r_runtime: Vec<RuntimeAtR>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub workers: Option<usize>,
    pub raw_samples: bool,
    pub trace: bool,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    stream_index: u64,
    #[serde(rename = "R")]
    r: f64,
    #[serde(flatten)]
    event: &'a DefaultEvent,
}

/// Runs the sweep and writes `curves.csv`, `manifest.json` and, on request,
/// `raw_samples.csv` and `trace.ndjson` into `out`.
pub fn cmd_sweep(cfg: &ScenarioConfig, out: &Path, opts: &SweepOptions) -> Outcome<RunManifest> {
    let started = Instant::now();
    let timestamp = chrono::Utc::now().to_rfc3339();
    let sc = Scenario::new(cfg.clone())?;
    let result = match opts.workers {
        Some(w) => sc.sweep_with_workers::<f64>(w)?,
        None => sc.sweep::<f64>()?,
    };

    ensure_dir(out)?;
    let mut outputs = Vec::new();
    let path = out.join("curves.csv");
    result.write_csv(create(&path)?).map_err(io_at(&path))?;
    outputs.push(path);

    if opts.raw_samples {
        let path = out.join("raw_samples.csv");
        result.write_raw_csv(create(&path)?).map_err(io_at(&path))?;
        outputs.push(path);
    }

    if opts.trace {
        let path = out.join("trace.ndjson");
        let mut w = create(&path)?;
        for i in 0..cfg.replications {
            for (r, res) in cfg.r_grid.iter().zip(sc.trace::<f64>(i)?) {
                for event in &res.defaults {
                    let line = TraceLine {
                        stream_index: i,
                        r: *r,
                        event,
                    };
                    serde_json::to_writer(&mut w, &line)
                        .map_err(|e| Failure::Runtime(e.to_string()))?;
                    writeln!(w).map_err(io_at(&path))?;
                }
            }
        }
        w.flush().map_err(io_at(&path))?;
        outputs.push(path);
    }

    let path = out.join("manifest.json");
    outputs.push(path.clone());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        timestamp,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        workers: opts.workers,
        scalar: "f64",
        config: cfg.clone(),
        config_toml: emit_config(cfg).ok(),
        realized_density_mean: result.realized_density_mean,
        per_r_runtime: cfg
            .r_grid
            .iter()
            .zip(&result.cascade_time)
            .map(|(&r, t)| RuntimeAtR {
                r,
                cascade_seconds: t.as_secs_f64(),
            })
            .collect(),
        outputs,
    };
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_at(&path))?;
    Ok(manifest)
}
