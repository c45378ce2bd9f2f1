//! Workload ingestion, export and synthesis.
//!
//! The native format is JSON lines, one job per line, with the fields
//! `id, submit_time, nodes, walltime_estimate, runtime, bb_request_gb,
//! ssd_per_node_gb, dependencies`. The CSV reader expects a header row with
//! the same names and encodes `dependencies` as a `;`-separated list.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{Job, Time};

pub const FIELDS: [&str; 8] = [
    "id",
    "submit_time",
    "nodes",
    "walltime_estimate",
    "runtime",
    "bb_request_gb",
    "ssd_per_node_gb",
    "dependencies",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceFormat {
    NativeJsonl,
    Csv,
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "native-jsonl" | "native" => Ok(TraceFormat::NativeJsonl),
            "csv" => Ok(TraceFormat::Csv),
            other => Err(Error::InvalidParameter(format!("unknown trace format `{other}`"))),
        }
    }
}

impl TraceFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => TraceFormat::Csv,
            _ => TraceFormat::NativeJsonl,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadMeta {
    pub source: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, String>,
}

/// Jobs sorted by submit time, plus where they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    pub jobs: Vec<Job>,
    pub meta: WorkloadMeta,
}

impl Workload {
    pub fn new(mut jobs: Vec<Job>, source: impl Into<String>) -> Result<Self> {
        jobs.sort_by_key(|j| j.submit_time);
        let wl = Workload {
            jobs,
            meta: WorkloadMeta {
                source: source.into(),
                ..Default::default()
            },
        };
        wl.validate()?;
        Ok(wl)
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    /// Fraction of jobs with a non-zero burst buffer request.
    pub fn bb_fraction(&self) -> f64 {
        if self.jobs.is_empty() {
            return 0.0;
        }
        self.jobs.iter().filter(|j| j.bb_request > 0).count() as f64 / self.jobs.len() as f64
    }

    /// Checks id uniqueness, ordering, and that dependencies name known jobs
    /// without forming a cycle.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.jobs.len());
        for j in &self.jobs {
            if !ids.insert(j.id.as_str()) {
                return Err(Error::DuplicateJob(j.id.clone()));
            }
        }
        if self.jobs.windows(2).any(|w| w[0].submit_time > w[1].submit_time) {
            return Err(Error::InvalidWorkload("jobs not sorted by submit_time".into()));
        }
        let by_id: HashMap<&str, &Job> = self.jobs.iter().map(|j| (j.id.as_str(), j)).collect();
        for j in &self.jobs {
            for d in &j.dependencies {
                if !by_id.contains_key(d.as_str()) {
                    return Err(Error::InvalidWorkload(format!(
                        "job `{}` depends on unknown job `{d}`",
                        j.id
                    )));
                }
            }
        }
        // Iterative DFS with colors: 1 = on stack, 2 = done.
        let mut color: HashMap<&str, u8> = HashMap::new();
        for root in &self.jobs {
            if color.contains_key(root.id.as_str()) {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(root.id.as_str(), 0)];
            color.insert(root.id.as_str(), 1);
            while let Some((id, next)) = stack.pop() {
                let deps = &by_id[id].dependencies;
                if next < deps.len() {
                    stack.push((id, next + 1));
                    let d = deps[next].as_str();
                    match color.get(d) {
                        Some(1) => {
                            return Err(Error::InvalidWorkload(format!(
                                "dependency cycle through `{d}`"
                            )))
                        }
                        Some(_) => {}
                        None => {
                            color.insert(d, 1);
                            stack.push((d, 0));
                        }
                    }
                } else {
                    color.insert(id, 2);
                }
            }
        }
        Ok(())
    }
}

pub fn parse_trace<R: Read>(input: R, format: TraceFormat) -> Result<Workload> {
    let jobs = match format {
        TraceFormat::NativeJsonl => parse_jsonl(input)?,
        TraceFormat::Csv => parse_csv(input)?,
    };
    let mut seen = HashSet::with_capacity(jobs.len());
    for j in &jobs {
        if !seen.insert(j.id.clone()) {
            return Err(Error::DuplicateJob(j.id.clone()));
        }
    }
    let source = match format {
        TraceFormat::NativeJsonl => "jsonl",
        TraceFormat::Csv => "csv",
    };
    Workload::new(jobs, source)
}

pub fn read_trace_file(path: &std::path::Path) -> Result<Workload> {
    let file = std::fs::File::open(path)?;
    let mut wl = parse_trace(BufReader::new(file), TraceFormat::from_path(path))?;
    wl.meta.source = path.display().to_string();
    Ok(wl)
}

fn parse_jsonl<R: Read>(input: R) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(trimmed)
            .map_err(|e| Error::parse(lineno, "<record>", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse(lineno, "<record>", "expected a JSON object"))?;
        jobs.push(job_from_json(obj, lineno)?);
    }
    Ok(jobs)
}

fn json_int(obj: &Map<String, Value>, field: &str, line: usize, required: bool) -> Result<i64> {
    match obj.get(field) {
        None | Some(Value::Null) if !required => Ok(0),
        None | Some(Value::Null) => Err(Error::parse(line, field, "missing")),
        Some(v) => v
            .as_i64()
            .ok_or_else(|| Error::parse(line, field, format!("expected an integer, got {v}"))),
    }
}

fn job_from_json(obj: &Map<String, Value>, line: usize) -> Result<Job> {
    let id = match obj.get("id") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(Error::parse(line, "id", "missing or not a string")),
    };
    let dependencies = match obj.get("dependencies") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::String(s)) => split_deps(s),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                _ => Err(Error::parse(line, "dependencies", "expected job id strings")),
            })
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::parse(line, "dependencies", "expected a list")),
    };
    build_job(
        line,
        id,
        json_int(obj, "submit_time", line, true)?,
        json_int(obj, "nodes", line, true)?,
        json_int(obj, "walltime_estimate", line, true)?,
        json_int(obj, "runtime", line, true)?,
        json_int(obj, "bb_request_gb", line, false)?,
        json_int(obj, "ssd_per_node_gb", line, false)?,
        dependencies,
    )
}

fn split_deps(s: &str) -> Vec<String> {
    s.split(';')
        .map(str::trim)
        .filter(|d| !d.is_empty())
        .map(String::from)
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn build_job(
    line: usize,
    id: String,
    submit_time: i64,
    nodes: i64,
    walltime_estimate: i64,
    runtime: i64,
    bb: i64,
    ssd: i64,
    dependencies: Vec<String>,
) -> Result<Job> {
    let non_negative = |v: i64, field: &str| {
        if v < 0 {
            Err(Error::parse(line, field, format!("negative value {v}")))
        } else {
            Ok(v)
        }
    };
    let nodes = non_negative(nodes, "nodes")?;
    if nodes == 0 || nodes > u32::MAX as i64 {
        return Err(Error::parse(line, "nodes", format!("out of range: {nodes}")));
    }
    let walltime_estimate = non_negative(walltime_estimate, "walltime_estimate")?;
    if walltime_estimate == 0 {
        return Err(Error::parse(line, "walltime_estimate", "must be positive"));
    }
    let ssd = non_negative(ssd, "ssd_per_node_gb")?;
    if ssd > u32::MAX as i64 {
        return Err(Error::parse(line, "ssd_per_node_gb", "out of range"));
    }
    Ok(Job {
        id,
        submit_time: submit_time as Time,
        nodes_requested: nodes as u32,
        walltime_estimate: walltime_estimate as u64,
        runtime: non_negative(runtime, "runtime")? as u64,
        bb_request: non_negative(bb, "bb_request_gb")? as u64,
        ssd_per_node: ssd as u32,
        dependencies,
        state: Default::default(),
    })
}

fn parse_csv<R: Read>(input: R) -> Result<Vec<Job>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    // An entirely empty file has no header and no jobs.
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for required in ["id", "submit_time", "nodes", "walltime_estimate", "runtime"] {
        if !col.contains_key(required) {
            return Err(Error::parse(1, required, "missing column in header"));
        }
    }
    let mut jobs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |name: &str| col.get(name).and_then(|&i| rec.get(i)).unwrap_or("");
        let int = |name: &str, required: bool| -> Result<i64> {
            let raw = cell(name);
            if raw.is_empty() {
                return if required {
                    Err(Error::parse(line, name, "missing"))
                } else {
                    Ok(0)
                };
            }
            raw.parse::<i64>()
                .map_err(|_| Error::parse(line, name, format!("not an integer: `{raw}`")))
        };
        let id = cell("id");
        if id.is_empty() {
            return Err(Error::parse(line, "id", "missing"));
        }
        jobs.push(build_job(
            line,
            id.to_string(),
            int("submit_time", true)?,
            int("nodes", true)?,
            int("walltime_estimate", true)?,
            int("runtime", true)?,
            int("bb_request_gb", false)?,
            int("ssd_per_node_gb", false)?,
            split_deps(cell("dependencies")),
        )?);
    }
    Ok(jobs)
}

pub fn write_trace<W: Write>(wl: &Workload, format: TraceFormat, mut out: W) -> Result<()> {
    match format {
        TraceFormat::NativeJsonl => {
            for job in &wl.jobs {
                let mut j = job.clone();
                j.state = Default::default();
                serde_json::to_writer(&mut out, &j)?;
                out.write_all(b"\n")?;
            }
        }
        TraceFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(FIELDS)?;
            for j in &wl.jobs {
                w.write_record([
                    j.id.clone(),
                    j.submit_time.to_string(),
                    j.nodes_requested.to_string(),
                    j.walltime_estimate.to_string(),
                    j.runtime.to_string(),
                    j.bb_request.to_string(),
                    j.ssd_per_node.to_string(),
                    j.dependencies.join(";"),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Raises the share of jobs requesting burst buffer to `target_fraction`.
///
/// Jobs without a request are picked uniformly without replacement; each
/// receives a value drawn uniformly, with replacement, from the base requests
/// strictly larger than `threshold_gb`.
pub fn synthesize_bb_workload(
    base: &Workload,
    target_fraction: f64,
    threshold_gb: u64,
    seed: u64,
) -> Result<Workload> {
    if !(0.0..=1.0).contains(&target_fraction) {
        return Err(Error::InvalidParameter(format!(
            "target_fraction {target_fraction} outside [0, 1]"
        )));
    }
    let donors: Vec<u64> = base
        .jobs
        .iter()
        .map(|j| j.bb_request)
        .filter(|&b| b > threshold_gb)
        .collect();
    if donors.is_empty() {
        return Err(Error::Synthesis(format!(
            "no base request exceeds {threshold_gb} GB"
        )));
    }
    let total = base.jobs.len();
    let current = base.jobs.iter().filter(|j| j.bb_request > 0).count();
    let target = (target_fraction * total as f64).round() as usize;
    if target < current {
        return Err(Error::Synthesis(format!(
            "target of {target} jobs is below the {current} jobs already requesting burst buffer"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let empty: Vec<usize> = (0..total).filter(|&i| base.jobs[i].bb_request == 0).collect();
    let mut picked: Vec<usize> = index::sample(&mut rng, empty.len(), target - current)
        .into_iter()
        .map(|k| empty[k])
        .collect();
    picked.sort_unstable();

    let mut out = base.clone();
    for i in picked {
        out.jobs[i].bb_request = donors[rng.random_range(0..donors.len())];
    }
    out.meta.seed = Some(seed);
    out.meta.params.insert("bb_target_fraction".into(), target_fraction.to_string());
    out.meta.params.insert("bb_threshold_gb".into(), threshold_gb.to_string());
    Ok(out)
}

/// Overwrites every job's per-node SSD request: with probability
/// `low_fraction` uniform in `[0, 128]`, otherwise uniform in `[129, 256]`.
pub fn synthesize_ssd_workload(base: &Workload, low_fraction: f64, seed: u64) -> Result<Workload> {
    if !(0.0..=1.0).contains(&low_fraction) {
        return Err(Error::InvalidParameter(format!(
            "low_fraction {low_fraction} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = base.clone();
    for j in &mut out.jobs {
        j.ssd_per_node = if rng.random_bool(low_fraction) {
            rng.random_range(0..=128)
        } else {
            rng.random_range(129..=256)
        };
    }
    out.meta.seed = Some(seed);
    out.meta.params.insert("ssd_low_fraction".into(), low_fraction.to_string());
    Ok(out)
}

/// Knobs for the stand-in base trace generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub jobs: usize,
    pub total_nodes: u32,
    /// Demanded node-seconds over available node-seconds across the trace.
    pub offered_load: f64,
    /// Largest job as a fraction of the machine.
    pub max_job_fraction: f64,
    pub runtime_min: u64,
    pub runtime_max: u64,
    /// Estimates are runtime times a factor uniform in `[1, this]`.
    pub estimate_slack_max: f64,
    pub bb_fraction: f64,
    pub bb_min_gb: u64,
    pub bb_max_gb: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            jobs: 1000,
            total_nodes: 1000,
            offered_load: 1.1,
            max_job_fraction: 0.5,
            runtime_min: 300,
            runtime_max: 6 * 3600,
            estimate_slack_max: 2.0,
            bb_fraction: 0.05,
            bb_min_gb: 1,
            bb_max_gb: 120 * 1024,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Produces a Poisson-arrival workload with log-uniform job sizes, runtimes
/// and (for a small share of jobs) burst buffer requests.
pub fn generate_workload(params: &GeneratorParams, seed: u64) -> Result<Workload> {
    if params.jobs == 0 || params.total_nodes == 0 || params.offered_load <= 0.0 {
        return Err(Error::InvalidParameter(
            "jobs, total_nodes and offered_load must be positive".into(),
        ));
    }
    if params.runtime_min == 0 || params.runtime_max < params.runtime_min {
        return Err(Error::InvalidParameter("bad runtime range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_nodes = ((params.total_nodes as f64 * params.max_job_fraction).round() as u32)
        .clamp(1, params.total_nodes);
    let mut jobs = Vec::with_capacity(params.jobs);
    let mut node_seconds = 0.0;
    for i in 0..params.jobs {
        let nodes = (log_uniform(&mut rng, 1.0, max_nodes as f64 + 1.0).floor() as u32)
            .clamp(1, max_nodes);
        let runtime = log_uniform(
            &mut rng,
            params.runtime_min as f64,
            params.runtime_max as f64,
        )
        .round() as u64;
        let slack = rng.random_range(1.0..=params.estimate_slack_max.max(1.0));
        let estimate = ((runtime as f64 * slack).ceil() as u64).max(runtime).max(1);
        let bb = if rng.random_bool(params.bb_fraction.clamp(0.0, 1.0)) {
            log_uniform(
                &mut rng,
                params.bb_min_gb.max(1) as f64,
                params.bb_max_gb.max(1) as f64,
            )
            .round() as u64
        } else {
            0
        };
        node_seconds += nodes as f64 * runtime as f64;
        jobs.push(Job::new(format!("j{i}"), 0, nodes, runtime).with_estimate(estimate).with_bb(bb));
    }
    let mean_gap =
        node_seconds / params.jobs as f64 / (params.total_nodes as f64 * params.offered_load);
    let gaps = Exp::new(1.0 / mean_gap.max(1e-9))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut t = 0.0f64;
    for j in &mut jobs {
        j.submit_time = t.round() as Time;
        t += gaps.sample(&mut rng);
    }
    let mut wl = Workload::new(jobs, "generated")?;
    wl.meta.seed = Some(seed);
    wl.meta.params.insert("jobs".into(), params.jobs.to_string());
    wl.meta.params.insert("offered_load".into(), params.offered_load.to_string());
    Ok(wl)
}
