//! Config-driven batches of simulations and the solver micro-benchmark.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, emit_comparison, write_job_table, write_summary, MetricsReport, Trim};
use crate::model::{BasePriority, Job, SystemConfig, SystemState};
use crate::moo::{brute_force_problem, ga_solve_problem, GaParams, WindowProblem, BRUTE_FORCE_LIMIT};
use crate::policies::PolicySpec;
use crate::simulator::{run_simulation, write_event_log};
use crate::trace::{
    generate_workload, read_trace_file, synthesize_bb_workload, synthesize_ssd_workload,
    GeneratorParams, Workload,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub total_nodes: u32,
    pub total_bb_gb: u64,
    #[serde(default)]
    pub persistent_bb_gb: u64,
    /// Explicit per-node SSD capacities.
    #[serde(default)]
    pub node_ssd_gb: Option<Vec<u32>>,
    /// Shorthand: first half of the nodes get `[0]` GB, the rest `[1]` GB.
    #[serde(default)]
    pub ssd_split: Option<[u32; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerSection {
    pub window_size: usize,
    pub starvation_bound: u32,
    pub base: BasePriority,
    pub backfill: bool,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        SchedulerSection {
            window_size: 20,
            starvation_bound: 50,
            base: BasePriority::Fcfs,
            backfill: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbSynthesis {
    pub fraction: f64,
    pub threshold_gb: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsdSynthesis {
    pub low_fraction: f64,
}

/// Where jobs come from. Exactly one of `trace` and `generate` is set; the
/// synthesis steps apply on top, seeded by the run seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub trace: Option<PathBuf>,
    pub generate: Option<GeneratorParams>,
    pub bb: Option<BbSynthesis>,
    pub ssd: Option<SsdSynthesis>,
}

fn default_threshold() -> u64 {
    crate::metrics::DEFAULT_ABNORMAL_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub scheduler: SchedulerSection,
    #[serde(default)]
    pub ga: GaParams,
    pub workload: WorkloadSection,
    pub policies: Vec<PolicySpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub trim: Trim,
    #[serde(default = "default_threshold")]
    pub abnormal_threshold: u64,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// Parses and fully checks a TOML config. Relative paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(t) = &cfg.workload.trace {
            if t.is_relative() {
                cfg.workload.trace = Some(base.join(t));
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<toml>".into());
            Error::config(&field, msg)
        })
    }

    pub fn system_config(&self) -> SystemConfig {
        let s = &self.system;
        let mut cfg = SystemConfig::new(s.total_nodes, s.total_bb_gb);
        cfg.persistent_bb_gb = s.persistent_bb_gb;
        cfg.node_ssd_gb = s.node_ssd_gb.clone();
        if let Some([small, large]) = s.ssd_split {
            cfg = cfg.with_split_ssd(small, large);
        }
        cfg.scheduler.window_size = self.scheduler.window_size;
        cfg.scheduler.starvation_bound = self.scheduler.starvation_bound;
        cfg.scheduler.base = self.scheduler.base;
        cfg.scheduler.backfill = self.scheduler.backfill;
        cfg.scheduler.ga = self.ga;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("policies", "at least one policy is required"));
        }
        if self.system.node_ssd_gb.is_some() && self.system.ssd_split.is_some() {
            return Err(Error::config("system.ssd_split", "conflicts with system.node_ssd_gb"));
        }
        let cfg = self.system_config();
        cfg.validate()?;
        let mut names = std::collections::HashSet::new();
        for p in &self.policies {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return Err(Error::config("policies.name", format!("duplicate policy {:?}", p.name)));
            }
            if let crate::policies::PolicyKind::Weighted { weights } = &p.kind {
                let want = if cfg.ssd_enabled() { 4 } else { 2 };
                if weights.len() != want {
                    return Err(Error::config(
                        "policies.weights",
                        format!("policy {:?} needs {want} weights", p.name),
                    ));
                }
            }
        }
        match (&self.workload.trace, &self.workload.generate) {
            (Some(t), None) => {
                if !t.exists() {
                    return Err(Error::config("workload.trace", format!("{} does not exist", t.display())));
                }
            }
            (None, Some(_)) => {}
            _ => {
                return Err(Error::config(
                    "workload",
                    "set exactly one of `trace` and `generate`",
                ))
            }
        }
        if self.workload.ssd.is_some() && !cfg.ssd_enabled() {
            return Err(Error::config("workload.ssd", "system has no SSD layout"));
        }
        Ok(())
    }

    /// The workload for one seed.
    pub fn build_workload(&self, seed: u64) -> Result<Workload> {
        let mut wl = match (&self.workload.trace, &self.workload.generate) {
            (Some(t), _) => read_trace_file(t)?,
            (None, Some(g)) => generate_workload(g, seed)?,
            (None, None) => return Err(Error::config("workload", "no source")),
        };
        if let Some(bb) = &self.workload.bb {
            wl = synthesize_bb_workload(&wl, bb.fraction, bb.threshold_gb, seed)?;
        }
        if let Some(ssd) = &self.workload.ssd {
            wl = synthesize_ssd_workload(&wl, ssd.low_fraction, seed)?;
        }
        Ok(wl)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub policy: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub result: std::result::Result<MetricsReport, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub runs: Vec<RunOutcome>,
    pub comparison: PathBuf,
}

impl ExperimentSummary {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }
}

pub fn run_dir_name(policy: &str, seed: u64) -> String {
    format!("{policy}-seed{seed}")
}

fn run_one(
    exp: &ExperimentConfig,
    cfg: &SystemConfig,
    policy: &PolicySpec,
    seed: u64,
    dir: &Path,
) -> Result<MetricsReport> {
    let wl = exp.build_workload(seed)?;
    let mut cfg = cfg.clone();
    cfg.scheduler.ga.seed = seed;
    let out = run_simulation(&wl, &cfg, policy)?;
    fs::create_dir_all(dir)?;
    write_event_log(&out.events, std::io::BufWriter::new(fs::File::create(dir.join("events.log"))?))?;
    let report = compute_metrics(&out.events, &cfg, exp.trim, exp.abnormal_threshold)?;
    write_summary(&report, fs::File::create(dir.join("metrics.csv"))?)?;
    write_job_table(&report, fs::File::create(dir.join("jobs.csv"))?)?;
    if !out.rejected.is_empty() {
        fs::write(dir.join("rejected.json"), serde_json::to_vec_pretty(&out.rejected)?)?;
    }
    Ok(report)
}

fn mean_report(reports: &[&MetricsReport]) -> MetricsReport {
    let n = reports.len() as f64;
    let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    MetricsReport {
        node_usage: avg(|r| r.node_usage),
        bb_usage: avg(|r| r.bb_usage),
        avg_wait: avg(|r| r.avg_wait),
        avg_slowdown: avg(|r| r.avg_slowdown),
        t0: reports.iter().map(|r| r.t0).min().unwrap_or(0),
        t1: reports.iter().map(|r| r.t1).max().unwrap_or(0),
        jobs: Vec::new(),
    }
}

/// Runs every (policy, seed) pair, `parallelism` at a time, and writes the
/// per-run artifacts plus `comparison.csv`. A failed run is logged and
/// recorded; the others still complete.
pub fn run_experiment(exp: &ExperimentConfig, parallelism: usize) -> Result<ExperimentSummary> {
    exp.validate()?;
    let cfg = exp.system_config();
    fs::create_dir_all(&exp.output_dir)?;
    let pairs: Vec<(&PolicySpec, u64)> = exp
        .policies
        .iter()
        .flat_map(|p| exp.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let runs: Vec<RunOutcome> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(policy, seed)| {
                let dir = exp.output_dir.join(run_dir_name(&policy.name, seed));
                let result = run_one(exp, &cfg, policy, seed, &dir).map_err(|e| {
                    error!("run {} failed: {e}", dir.display());
                    e.to_string()
                });
                if result.is_ok() {
                    info!("finished {}", dir.display());
                }
                RunOutcome {
                    policy: policy.name.clone(),
                    seed,
                    dir,
                    result,
                }
            })
            .collect()
    });

    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for p in &exp.policies {
        let ok: Vec<&MetricsReport> = runs
            .iter()
            .filter(|r| r.policy == p.name)
            .filter_map(|r| r.result.as_ref().ok())
            .collect();
        for r in runs.iter().filter(|r| r.policy == p.name) {
            if let Ok(m) = &r.result {
                rows.push((run_dir_name(&r.policy, r.seed), m.clone()));
            }
        }
        if !ok.is_empty() {
            rows.push((format!("{}-mean", p.name), mean_report(&ok)));
        }
    }
    let comparison = exp.output_dir.join("comparison.csv");
    let refs: Vec<(String, &MetricsReport)> = rows.iter().map(|(n, r)| (n.clone(), r)).collect();
    if !refs.is_empty() {
        fs::write(&comparison, emit_comparison(&refs, exp.normalize)?)?;
    }
    Ok(ExperimentSummary { runs, comparison })
}

/// A window of `w` jobs with node demands uniform in `[1, N]` and burst
/// buffer demands uniform in `[0, B]`, on an idle machine.
pub fn random_window<R: Rng + ?Sized>(w: usize, cfg: &SystemConfig, rng: &mut R) -> Vec<Job> {
    (0..w)
        .map(|i| {
            let n = rng.random_range(1..=cfg.total_nodes);
            let b = rng.random_range(0..=cfg.usable_bb_gb());
            let mut j = Job::new(format!("w{i}"), 0, n, 3600).with_bb(b);
            if let Some(layout) = &cfg.node_ssd_gb {
                let top = layout.iter().copied().max().unwrap_or(0);
                j.ssd_per_node = rng.random_range(0..=top);
            }
            j
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub window: usize,
    pub generations: usize,
    pub population: usize,
    pub instances: usize,
    pub ga_mean_s: f64,
    /// Only for windows small enough to enumerate.
    pub brute_mean_s: Option<f64>,
}

/// Mean solve time per (window size, GA settings) over seeded random
/// windows on a 100-node / 100 TB machine.
pub fn bench_solver(
    windows: &[usize],
    params: &[GaParams],
    instances: usize,
    seed: u64,
) -> Vec<BenchRow> {
    let cfg = crate::fixtures::example_config();
    let state = SystemState::new(&cfg);
    let mut rows = Vec::new();
    for &w in windows {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ w as u64);
        let problems: Vec<WindowProblem> = (0..instances.max(1))
            .map(|_| {
                WindowProblem::new(&random_window(w, &cfg, &mut rng), &state, &cfg, false)
                    .expect("no extension requested")
            })
            .collect();
        let brute = (w <= BRUTE_FORCE_LIMIT.min(22)).then(|| {
            let t = Instant::now();
            for p in &problems {
                brute_force_problem(p).expect("window within limit");
            }
            t.elapsed().as_secs_f64() / problems.len() as f64
        });
        for gp in params {
            let t = Instant::now();
            for (k, p) in problems.iter().enumerate() {
                let mut g = *gp;
                g.seed = seed.wrapping_add(k as u64);
                std::hint::black_box(ga_solve_problem(p, &g));
            }
            rows.push(BenchRow {
                window: w,
                generations: gp.generations,
                population: gp.population,
                instances: problems.len(),
                ga_mean_s: t.elapsed().as_secs_f64() / problems.len() as f64,
                brute_mean_s: brute,
            });
        }
    }
    rows
}
