//! Monte Carlo sweeps of the equity capital ratio.
//!
//! Each replication draws one topology and one initially shocked bank from its
//! own random stream, then runs a cascade for every `R` in the grid on that
//! same network (paired sampling). Statistics per `R` are assembled in
//! stream-index order, so the output does not depend on the worker count.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{apply_surcharge, build_balance_sheets, compute_weights};
use crate::cascade::{initial_shock, propagate, CascadeResult, LossRule};
use crate::error::{Error, Result};
use crate::netgen::{
    degree_stats, gen_erdos_renyi, gen_preferential_attachment, Topology, TopologyKind,
};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Capital surcharge imposed on the biggest banks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surcharge {
    /// Additional equity capital ratio `R_s`.
    pub ratio: f64,
    /// Fraction of banks, by total asset, that carry it.
    pub biggest_fraction: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBankPolicy {
    /// Uniformly random bank, drawn after the topology from the replication's stream.
    #[default]
    UniformRandom,
    /// Always the given bank.
    Fixed(usize),
}

/// One scenario: network ensemble, constants, R grid and sampling setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub topology: TopologyKind,
    /// Edge-list file, for [`TopologyKind::External`] only.
    pub topology_file: Option<PathBuf>,
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub t: f64,
    pub e_total: f64,
    pub r_grid: Vec<f64>,
    pub replications: u64,
    pub master_seed: u64,
    pub loss_rule: LossRule,
    pub surcharge: Option<Surcharge>,
    pub initial_bank: InitialBankPolicy,
}

impl ScenarioConfig {
    pub const DEFAULT_REPLICATIONS: u64 = 10_000;
    pub const DEFAULT_E_TOTAL: f64 = 1.0;

    /// Scenario with the documented defaults: `E = 1`, 10,000 replications,
    /// the `paper_max` rule, uniform initial bank, and `s = t = 2` for
    /// heterogeneous networks (`0` otherwise).
    pub fn new(n: usize, topology: TopologyKind, p: f64, q: f64, r_grid: Vec<f64>) -> Self {
        let power = if topology == TopologyKind::Heterogeneous {
            2.0
        } else {
            0.0
        };
        Self {
            n,
            topology,
            topology_file: None,
            p,
            q,
            s: power,
            t: power,
            e_total: Self::DEFAULT_E_TOTAL,
            r_grid,
            replications: Self::DEFAULT_REPLICATIONS,
            master_seed: 0,
            loss_rule: LossRule::default(),
            surcharge: None,
            initial_bank: InitialBankPolicy::default(),
        }
    }

    /// Checks every scenario invariant; the error names the offending field.
    pub fn validate(&self) -> std::result::Result<(), crate::error::ConfigError> {
        use crate::error::ConfigError::Invalid;
        let bad = |field, message: String| Err(Invalid { field, message });

        if self.n < 2 {
            return bad("n", format!("need at least 2 banks, got {}", self.n));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p", format!("{} outside [0, 1]", self.p));
        }
        if !(self.q > 0.0 && self.q < 0.5) {
            return bad(
                "Q",
                format!("{} outside the open interval (0, 0.5)", self.q),
            );
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return bad("s", format!("{} must be non-negative", self.s));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return bad("t", format!("{} must be non-negative", self.t));
        }
        if !(self.e_total > 0.0 && self.e_total.is_finite()) {
            return bad("E", format!("{} must be positive", self.e_total));
        }
        if self.r_grid.is_empty() {
            return bad("r_grid", "must contain at least one value".into());
        }
        if let Some(r) = self.r_grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return bad("r_grid", format!("{r} outside (0, 1)"));
        }
        if let Some(w) = self.r_grid.windows(2).find(|w| w[0] >= w[1]) {
            return bad(
                "r_grid",
                format!("not strictly increasing at {} -> {}", w[0], w[1]),
            );
        }
        if self.replications < 1 {
            return bad("replications", "must be at least 1".into());
        }
        if let Some(sur) = self.surcharge {
            if !(sur.ratio >= 0.0) {
                return bad(
                    "surcharge.ratio",
                    format!("{} must be non-negative", sur.ratio),
                );
            }
            let r_max = self.r_grid.last().copied().unwrap_or(0.0);
            if r_max + sur.ratio >= 1.0 {
                return bad(
                    "surcharge.ratio",
                    format!("R + R_s = {} must stay below 1", r_max + sur.ratio),
                );
            }
            if !(0.0..=1.0).contains(&sur.biggest_fraction) {
                return bad(
                    "surcharge.biggest_fraction",
                    format!("{} outside [0, 1]", sur.biggest_fraction),
                );
            }
        }
        match (self.topology, &self.topology_file) {
            (TopologyKind::External, None) => {
                return bad("topology_file", "required for external topologies".into())
            }
            (TopologyKind::Homogeneous | TopologyKind::Heterogeneous, Some(_)) => {
                return bad(
                    "topology_file",
                    format!("only valid for external topologies, not {}", self.topology),
                )
            }
            _ => {}
        }
        if let InitialBankPolicy::Fixed(b) = self.initial_bank {
            if b >= self.n {
                return bad(
                    "initial_bank",
                    format!("bank {b} out of range for n = {}", self.n),
                );
            }
        }
        Ok(())
    }
}

/// Statistics of `N_d` over all replications at one `R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub r: f64,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator; zero for one sample).
    pub std: f64,
    pub p90: u32,
    pub p95: u32,
    pub p99: u32,
    pub max: u32,
    /// Fraction of replications with at least one knock-on default (`N_d ≥ 2`).
    pub knock_on_fraction: f64,
}

impl SweepRecord {
    pub fn mean_plus_std(&self) -> f64 {
        self.mean + self.std
    }

    /// Summarizes one column of samples.
    pub fn from_samples(r: f64, samples: &[u32]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "no samples to summarize"));
        }
        let count = samples.len() as f64;
        let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / count;
        let std = if samples.len() > 1 {
            let ss: f64 = samples.iter().map(|&x| (x as f64 - mean).powi(2)).sum();
            (ss / (count - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let knock_on = samples.iter().filter(|&&x| x >= 2).count();
        Ok(Self {
            r,
            mean,
            std,
            p90: percentile(&sorted, 0.90)?,
            p95: percentile(&sorted, 0.95)?,
            p99: percentile(&sorted, 0.99)?,
            max: *sorted.last().unwrap(),
            knock_on_fraction: knock_on as f64 / count,
        })
    }
}

/// Nearest-rank percentile: the `⌈q·n⌉`-th smallest of the sorted samples.
pub fn percentile<V: Copy>(sorted: &[V], q: f64) -> Result<V> {
    if sorted.is_empty() {
        return Err(Error::invalid("samples", "percentile of an empty sample"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid("q", format!("quantile {q} outside (0, 1]")));
    }
    // the epsilon absorbs q·n landing a hair above an integer, e.g. 0.29 * 100
    let rank = (q * sorted.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ScenarioConfig,
    pub records: Vec<SweepRecord>,
    /// `samples[k][i]` is `N_d` for `r_grid[k]` in replication `i`.
    pub samples: Vec<Vec<u32>>,
    /// Mean realized density of the sampled topologies.
    pub realized_density_mean: f64,
    /// Cascade time per `R`, summed over replications (all workers).
    pub cascade_time: Vec<Duration>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str =
        "R,mean,std,mean_plus_std,p90,p95,p99,max,knock_on_fraction";

    pub fn record_at(&self, r: f64) -> Option<&SweepRecord> {
        self.records.iter().find(|rec| (rec.r - r).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for rec in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                rec.r,
                rec.mean,
                rec.std,
                rec.mean_plus_std(),
                rec.p90,
                rec.p95,
                rec.p99,
                rec.max,
                rec.knock_on_fraction
            )?;
        }
        out.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Raw samples: `R,stream_index,N_d`.
    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "R,stream_index,N_d")?;
        for (r, column) in self.config.r_grid.iter().zip(&self.samples) {
            for (i, nd) in column.iter().enumerate() {
                writeln!(out, "{r},{i},{nd}")?;
            }
        }
        out.flush()
    }
}

/// A validated scenario with its external topology (if any) loaded once.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    external: Option<Arc<Topology>>,
}

/// Outcome of one replication over the whole grid.
#[derive(Debug, Clone)]
pub struct Replication {
    pub n_defaults: Vec<u32>,
    pub initial_bank: usize,
    pub density: f64,
    pub cascade_time: Vec<Duration>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let external = match &config.topology_file {
            Some(path) if config.topology == TopologyKind::External => {
                let file = File::open(path)?;
                let topo = Topology::read_edge_list(BufReader::new(file))?;
                if topo.n() != config.n {
                    return Err(crate::error::ConfigError::Invalid {
                        field: "n",
                        message: format!(
                            "{} does not match the {} banks in {}",
                            config.n,
                            topo.n(),
                            path.display()
                        ),
                    }
                    .into());
                }
                Some(Arc::new(topo))
            }
            _ => None,
        };
        Ok(Self { config, external })
    }

    /// Uses an in-memory topology instead of reading `topology_file`.
    pub fn with_topology(mut config: ScenarioConfig, topology: Topology) -> Result<Self> {
        config.topology = TopologyKind::External;
        config.n = topology.n();
        if config.topology_file.is_none() {
            config.topology_file = Some(PathBuf::from("<memory>"));
        }
        config.validate()?;
        Ok(Self {
            config,
            external: Some(Arc::new(topology)),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Draws the replication's topology and initial bank, in that order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Arc<Topology>, usize)> {
        let cfg = &self.config;
        let topology = match cfg.topology {
            TopologyKind::Homogeneous => Arc::new(gen_erdos_renyi(cfg.n, cfg.p, rng)?),
            TopologyKind::Heterogeneous => {
                Arc::new(gen_preferential_attachment(cfg.n, cfg.p, rng)?)
            }
            TopologyKind::External => self
                .external
                .clone()
                .expect("external scenarios always carry their topology"),
        };
        let bank = match cfg.initial_bank {
            InitialBankPolicy::UniformRandom => rng.random_range(0..topology.n()),
            InitialBankPolicy::Fixed(b) => b,
        };
        Ok((topology, bank))
    }

    /// Runs replication `stream_index` for every `R` of the grid.
    pub fn replicate<T: Scalar>(&self, stream_index: u64) -> Result<Replication> {
        self.replicate_inner::<T>(stream_index)
            .map_err(|source| Error::Replication {
                stream_index,
                source: Box::new(source),
            })
    }

    fn replicate_inner<T: Scalar>(&self, stream_index: u64) -> Result<Replication> {
        let grid = self.config.r_grid.len();
        let mut n_defaults = Vec::with_capacity(grid);
        let mut cascade_time = Vec::with_capacity(grid);
        let (initial_bank, density) = self.run_grid::<T, _>(stream_index, |result, elapsed| {
            n_defaults.push(result.n_defaults as u32);
            cascade_time.push(elapsed);
        })?;
        Ok(Replication {
            n_defaults,
            initial_bank,
            density,
            cascade_time,
        })
    }

    /// Full cascade results of replication `stream_index`, one per `R`.
    pub fn trace<T: Scalar>(&self, stream_index: u64) -> Result<Vec<CascadeResult<T>>> {
        let mut out = Vec::with_capacity(self.config.r_grid.len());
        self.run_grid::<T, _>(stream_index, |result, _| out.push(result))
            .map_err(|source| Error::Replication {
                stream_index,
                source: Box::new(source),
            })?;
        Ok(out)
    }

    fn run_grid<T: Scalar, F>(&self, stream_index: u64, mut visit: F) -> Result<(usize, f64)>
    where
        F: FnMut(CascadeResult<T>, Duration),
    {
        let cfg = &self.config;
        let mut rng = RngStream::new(cfg.master_seed, stream_index).rng();
        let (topology, bank) = self.sample(&mut rng)?;
        let q = T::of(cfg.q);
        let e_total = T::of(cfg.e_total);
        let wm = compute_weights(&topology, T::of(cfg.s), T::of(cfg.t), q, e_total)?;
        for &r in &cfg.r_grid {
            let start = Instant::now();
            let mut bs = build_balance_sheets(&wm, q, T::of(r), e_total)?;
            if let Some(sur) = cfg.surcharge {
                bs = apply_surcharge(&bs, T::of(sur.ratio), T::of(sur.biggest_fraction))?;
            }
            let state = initial_shock(&bs, bank)?;
            let result = propagate(&bs, &wm, state, cfg.loss_rule);
            visit(result, start.elapsed());
        }
        Ok((bank, degree_stats(&topology).density))
    }

    /// Runs the whole sweep on the current rayon pool.
    pub fn sweep<T: Scalar>(&self) -> Result<SweepResult> {
        let cfg = &self.config;
        let reps: Vec<Replication> = (0..cfg.replications)
            .into_par_iter()
            .map(|i| self.replicate::<T>(i))
            .collect::<Result<_>>()?;

        let grid = cfg.r_grid.len();
        let mut samples = vec![Vec::with_capacity(reps.len()); grid];
        let mut cascade_time = vec![Duration::ZERO; grid];
        let mut density_sum = 0.0;
        for rep in &reps {
            for k in 0..grid {
                samples[k].push(rep.n_defaults[k]);
                cascade_time[k] += rep.cascade_time[k];
            }
            density_sum += rep.density;
        }
        let records = cfg
            .r_grid
            .iter()
            .zip(&samples)
            .map(|(&r, column)| SweepRecord::from_samples(r, column))
            .collect::<Result<_>>()?;
        Ok(SweepResult {
            config: cfg.clone(),
            records,
            samples,
            realized_density_mean: density_sum / reps.len() as f64,
            cascade_time,
        })
    }

    /// Runs the sweep on a dedicated pool of `workers` threads.
    pub fn sweep_with_workers<T: Scalar>(&self, workers: usize) -> Result<SweepResult> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        pool.install(|| self.sweep::<T>())
    }
}

/// `N_d` of replication `stream_index` at a single `R`.
pub fn run_replication(cfg: &ScenarioConfig, r: f64, stream_index: u64) -> Result<u32> {
    let mut single = cfg.clone();
    single.r_grid = vec![r];
    let rep = Scenario::new(single)?.replicate::<f64>(stream_index)?;
    Ok(rep.n_defaults[0])
}

/// Double-precision sweep on the global rayon pool.
pub fn sweep(cfg: &ScenarioConfig) -> Result<SweepResult> {
    Scenario::new(cfg.clone())?.sweep::<f64>()
}
