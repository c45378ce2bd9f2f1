//! Usage, wait and slowdown figures computed from a simulator event log.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SystemConfig, Time};
use crate::simulator::{EventKind, SimEvent};

/// Seconds cut from the start and end of the log before measuring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trim {
    pub warmup: u64,
    pub cooldown: u64,
}

impl Trim {
    pub const NONE: Trim = Trim {
        warmup: 0,
        cooldown: 0,
    };

    /// Half a month on each side.
    pub fn half_month() -> Self {
        Trim {
            warmup: 15 * 86_400,
            cooldown: 15 * 86_400,
        }
    }
}

/// Jobs shorter than this are left out of the slowdown average.
pub const DEFAULT_ABNORMAL_THRESHOLD: u64 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub submit: Time,
    pub start: Time,
    pub end: Time,
    pub nodes: u32,
    pub bb_gb: u64,
    pub wait: u64,
    pub runtime: u64,
    pub slowdown: f64,
    /// Counted in the slowdown average.
    pub normal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub node_usage: f64,
    pub bb_usage: f64,
    pub avg_wait: f64,
    pub avg_slowdown: f64,
    pub t0: Time,
    pub t1: Time,
    /// Jobs submitted inside `[t0, t1]`.
    pub jobs: Vec<JobRecord>,
}

fn slowdown(wait: u64, runtime: u64) -> f64 {
    let r = runtime.max(1) as f64;
    (wait as f64 + r) / r
}

fn overlap(a0: Time, a1: Time, b0: Time, b1: Time) -> u64 {
    (a1.min(b1) - a0.max(b0)).max(0) as u64
}

/// Measures the log over `[first + warmup, last - cooldown]`. Jobs crossing
/// the boundary count toward usage for the part inside it.
pub fn compute_metrics(
    log: &[SimEvent],
    cfg: &SystemConfig,
    trim: Trim,
    abnormal_threshold: u64,
) -> Result<MetricsReport> {
    let first = log.iter().map(|e| e.time).min().unwrap_or(0);
    let last = log.iter().map(|e| e.time).max().unwrap_or(0);
    let t0 = first + trim.warmup as Time;
    let t1 = last - trim.cooldown as Time;
    if t1 <= t0 {
        return Err(Error::InvalidParameter(format!(
            "empty measurement window [{t0}, {t1}]"
        )));
    }

    let mut submits: HashMap<&str, Time> = HashMap::new();
    let mut starts: HashMap<&str, &SimEvent> = HashMap::new();
    let mut records = Vec::new();
    let mut node_secs = 0u128;
    let mut bb_secs = 0u128;
    for e in log {
        let Some(id) = e.job.as_deref() else { continue };
        match e.kind {
            EventKind::Submit => {
                submits.insert(id, e.time);
            }
            EventKind::JobStart => {
                starts.insert(id, e);
            }
            EventKind::JobEnd => {
                let s = starts.remove(id).ok_or_else(|| {
                    Error::InvalidParameter(format!("job {id} ends without starting"))
                })?;
                let ov = overlap(s.time, e.time, t0, t1) as u128;
                node_secs += s.nodes as u128 * ov;
                bb_secs += s.bb_gb as u128 * ov;
                let submit = submits.get(id).copied().unwrap_or(s.time);
                if submit < t0 || submit > t1 {
                    continue;
                }
                let wait = (s.time - submit).max(0) as u64;
                let runtime = (e.time - s.time).max(0) as u64;
                records.push(JobRecord {
                    id: id.to_string(),
                    submit,
                    start: s.time,
                    end: e.time,
                    nodes: s.nodes,
                    bb_gb: s.bb_gb,
                    wait,
                    runtime,
                    slowdown: slowdown(wait, runtime),
                    normal: runtime >= abnormal_threshold,
                });
            }
            EventKind::ScheduleTick => {}
        }
    }
    if let Some(id) = starts.keys().next() {
        return Err(Error::InvalidParameter(format!(
            "incomplete log: job {id} never ends"
        )));
    }
    records.sort_by(|a, b| a.submit.cmp(&b.submit).then_with(|| a.id.cmp(&b.id)));

    let span = (t1 - t0) as f64;
    let node_usage = node_secs as f64 / (cfg.total_nodes as f64 * span);
    let bb_usage = if cfg.total_bb_gb == 0 {
        0.0
    } else {
        bb_secs as f64 / (cfg.total_bb_gb as f64 * span)
    };
    let avg_wait = mean(records.iter().map(|r| r.wait as f64)).unwrap_or(0.0);
    let avg_slowdown = mean(records.iter().filter(|r| r.normal).map(|r| r.slowdown)).unwrap_or(1.0);
    Ok(MetricsReport {
        node_usage,
        bb_usage,
        avg_wait,
        avg_slowdown,
        t0,
        t1,
        jobs: records,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    JobSize,
    BbRequest,
    Runtime,
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "job_size" => Ok(Dimension::JobSize),
            "bb_request" => Ok(Dimension::BbRequest),
            "runtime" => Ok(Dimension::Runtime),
            other => Err(Error::InvalidParameter(format!("unknown dimension {other:?}"))),
        }
    }
}

/// Inclusive range `[lo, hi]` in the dimension's unit (nodes, GB, seconds).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub label: String,
    pub lo: u64,
    pub hi: u64,
}

impl Bucket {
    pub fn new(label: impl Into<String>, lo: u64, hi: u64) -> Self {
        Bucket {
            label: label.into(),
            lo,
            hi,
        }
    }
}

pub fn default_buckets(dim: Dimension) -> Vec<Bucket> {
    const TB: u64 = 1024;
    match dim {
        Dimension::JobSize => vec![
            Bucket::new("1-8", 1, 8),
            Bucket::new("9-128", 9, 128),
            Bucket::new("129-1023", 129, 1023),
            Bucket::new("1024+", 1024, u64::MAX),
        ],
        Dimension::BbRequest => vec![
            Bucket::new("0", 0, 0),
            Bucket::new("<=1TB", 1, TB),
            Bucket::new("<=10TB", TB + 1, 10 * TB),
            Bucket::new("<=100TB", 10 * TB + 1, 100 * TB),
            Bucket::new(">100TB", 100 * TB + 1, u64::MAX),
        ],
        Dimension::Runtime => vec![
            Bucket::new("<1h", 0, 3599),
            Bucket::new("1-6h", 3600, 6 * 3600 - 1),
            Bucket::new(">=6h", 6 * 3600, u64::MAX),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub label: String,
    pub count: usize,
    /// `None` for an empty bucket.
    pub avg_wait: Option<f64>,
    pub avg_slowdown: Option<f64>,
}

pub fn bucketize(report: &MetricsReport, dim: Dimension, buckets: &[Bucket]) -> Vec<BucketStats> {
    let key = |r: &JobRecord| match dim {
        Dimension::JobSize => r.nodes as u64,
        Dimension::BbRequest => r.bb_gb,
        Dimension::Runtime => r.runtime,
    };
    buckets
        .iter()
        .map(|b| {
            let inside: Vec<&JobRecord> = report
                .jobs
                .iter()
                .filter(|r| (b.lo..=b.hi).contains(&key(r)))
                .collect();
            BucketStats {
                label: b.label.clone(),
                count: inside.len(),
                avg_wait: mean(inside.iter().map(|r| r.wait as f64)),
                avg_slowdown: mean(inside.iter().filter(|r| r.normal).map(|r| r.slowdown)),
            }
        })
        .collect()
}

pub const COMPARISON_COLUMNS: [&str; 4] = ["node_usage", "bb_usage", "inv_avg_wait", "inv_avg_slowdown"];

/// Higher-is-better view of a report. Waits below one second are floored so
/// an idle system does not produce an infinite score.
pub fn comparison_values(r: &MetricsReport) -> [f64; 4] {
    [
        r.node_usage,
        r.bb_usage,
        1.0 / r.avg_wait.max(1.0),
        1.0 / r.avg_slowdown.max(1.0),
    ]
}

/// CSV with one row per named report. With `normalize`, each column is
/// min-max scaled so the best row gets 1 and the worst 0; a column where
/// all rows agree is all 1.
pub fn emit_comparison(reports: &[(String, &MetricsReport)], normalize: bool) -> Result<Vec<u8>> {
    let raw: Vec<[f64; 4]> = reports.iter().map(|(_, r)| comparison_values(r)).collect();
    let mut values = raw.clone();
    if normalize {
        for k in 0..4 {
            let lo = raw.iter().map(|v| v[k]).fold(f64::INFINITY, f64::min);
            let hi = raw.iter().map(|v| v[k]).fold(f64::NEG_INFINITY, f64::max);
            for (row, v) in values.iter_mut().zip(&raw) {
                row[k] = if hi > lo { (v[k] - lo) / (hi - lo) } else { 1.0 };
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run"];
    header.extend(COMPARISON_COLUMNS);
    w.write_record(&header)?;
    for ((name, _), v) in reports.iter().zip(&values) {
        let mut rec = vec![name.clone()];
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Summary row followed by nothing else; the per-job table is separate.
pub fn write_summary<W: std::io::Write>(r: &MetricsReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t0",
        "t1",
        "jobs",
        "node_usage",
        "bb_usage",
        "avg_wait",
        "avg_slowdown",
    ])?;
    w.write_record([
        r.t0.to_string(),
        r.t1.to_string(),
        r.jobs.len().to_string(),
        r.node_usage.to_string(),
        r.bb_usage.to_string(),
        r.avg_wait.to_string(),
        r.avg_slowdown.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_job_table<W: std::io::Write>(r: &MetricsReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for j in &r.jobs {
        w.serialize(j)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Job;

    fn ev(time: Time, kind: EventKind, id: &str, nodes: u32, bb: u64) -> SimEvent {
        SimEvent {
            time,
            kind,
            job: Some(id.into()),
            nodes,
            bb_gb: bb,
            ssd_per_node_gb: 0,
            assigned: vec![],
            window_ticks: None,
        }
    }

    fn job_log(id: &str, submit: Time, start: Time, end: Time, nodes: u32, bb: u64) -> Vec<SimEvent> {
        vec![
            ev(submit, EventKind::Submit, id, nodes, bb),
            ev(start, EventKind::JobStart, id, nodes, bb),
            ev(end, EventKind::JobEnd, id, nodes, bb),
        ]
    }

    #[test]
    fn single_job_usage() {
        let cfg = SystemConfig::new(100, 1000);
        let r = compute_metrics(&job_log("a", 0, 0, 3600, 10, 500), &cfg, Trim::NONE, 60).unwrap();
        assert!((r.node_usage - 0.10).abs() < 1e-12);
        assert!((r.bb_usage - 0.5).abs() < 1e-12);
        assert_eq!(r.avg_wait, 0.0);
        assert_eq!(r.avg_slowdown, 1.0);
    }

    #[test]
    fn slowdown_two() {
        let cfg = SystemConfig::new(100, 0);
        let r = compute_metrics(&job_log("a", 0, 3600, 7200, 1, 0), &cfg, Trim::NONE, 60).unwrap();
        assert_eq!(r.jobs[0].slowdown, 2.0);
        assert_eq!(r.avg_slowdown, 2.0);
        assert_eq!(r.avg_wait, 3600.0);
    }

    #[test]
    fn abnormal_jobs_excluded_from_slowdown() {
        let cfg = SystemConfig::new(100, 0);
        let mut log = job_log("short", 0, 100, 110, 1, 0);
        log.extend(job_log("long", 0, 3600, 7200, 1, 0));
        log.sort_by_key(|e| e.time);
        let r = compute_metrics(&log, &cfg, Trim::NONE, 60).unwrap();
        assert_eq!(r.avg_slowdown, 2.0);
        assert_eq!(r.jobs.len(), 2);
    }

    #[test]
    fn trimming() {
        let cfg = SystemConfig::new(10, 0);
        let mut log = job_log("a", 0, 0, 1000, 10, 0);
        log.extend(job_log("b", 500, 1000, 2000, 10, 0));
        log.sort_by_key(|e| e.time);
        let full = compute_metrics(&log, &cfg, Trim::NONE, 60).unwrap();
        let zero = compute_metrics(&log, &cfg, Trim { warmup: 0, cooldown: 0 }, 60).unwrap();
        assert_eq!(full, zero);
        let t = compute_metrics(&log, &cfg, Trim { warmup: 400, cooldown: 500 }, 60).unwrap();
        assert_eq!((t.t0, t.t1), (400, 1500));
        assert_eq!(t.node_usage, 1.0);
        assert_eq!(t.jobs.len(), 1);
        assert_eq!(t.jobs[0].id, "b");
        assert!(compute_metrics(&log, &cfg, Trim { warmup: 1000, cooldown: 1000 }, 60).is_err());
    }

    #[test]
    fn incomplete_log_is_an_error() {
        let cfg = SystemConfig::new(10, 0);
        let mut log = job_log("a", 0, 0, 10, 1, 0);
        log.pop();
        log.push(ev(20, EventKind::ScheduleTick, "x", 0, 0));
        assert!(compute_metrics(&log, &cfg, Trim::NONE, 60).is_err());
    }

    fn report_with(jobs: &[(u32, u64)]) -> MetricsReport {
        MetricsReport {
            node_usage: 0.0,
            bb_usage: 0.0,
            avg_wait: 0.0,
            avg_slowdown: 1.0,
            t0: 0,
            t1: 1,
            jobs: jobs
                .iter()
                .enumerate()
                .map(|(i, &(nodes, bb))| JobRecord {
                    id: i.to_string(),
                    submit: 0,
                    start: 0,
                    end: 100,
                    nodes,
                    bb_gb: bb,
                    wait: 10,
                    runtime: 100,
                    slowdown: 1.1,
                    normal: true,
                })
                .collect(),
        }
    }

    #[test]
    fn bucket_examples() {
        let buckets = [
            Bucket::new("small", 1, 8),
            Bucket::new("mid", 9, 1023),
            Bucket::new("large", 1024, u64::MAX),
        ];
        let s = bucketize(&report_with(&[(4, 0), (2000, 0)]), Dimension::JobSize, &buckets);
        assert_eq!(s.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 0, 1]);
        assert_eq!(s[1].avg_wait, None);
        assert_eq!(s[0].avg_wait, Some(10.0));

        let tb = 1024;
        let buckets = [
            Bucket::new("none", 0, 0),
            Bucket::new("<=100", 1, 100 * tb),
            Bucket::new("<=200", 100 * tb + 1, 200 * tb),
        ];
        let s = bucketize(&report_with(&[(1, 0), (1, 150 * tb)]), Dimension::BbRequest, &buckets);
        assert_eq!(s.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 0, 1]);
        assert!("nodes".parse::<Dimension>().is_err());
        assert_eq!("runtime".parse::<Dimension>().unwrap(), Dimension::Runtime);
    }

    fn parse(bytes: &[u8]) -> Vec<Vec<f64>> {
        let mut r = csv::Reader::from_reader(bytes);
        r.records()
            .map(|rec| rec.unwrap().iter().skip(1).map(|x| x.parse().unwrap()).collect())
            .collect()
    }

    #[test]
    fn comparison_examples() {
        let mut a = report_with(&[]);
        a.avg_wait = 100.0;
        a.node_usage = 0.5;
        let one = emit_comparison(&[("a".into(), &a)], true).unwrap();
        assert_eq!(parse(&one), vec![vec![1.0; 4]]);

        let mut b = a.clone();
        b.avg_wait = 200.0;
        let two = parse(&emit_comparison(&[("a".into(), &a), ("b".into(), &b)], true).unwrap());
        assert_eq!(two[0][2], 1.0);
        assert_eq!(two[1][2], 0.0);

        let raw = parse(&emit_comparison(&[("a".into(), &a)], false).unwrap());
        assert_eq!(raw[0][0], 0.5);
        assert_eq!(raw[0][2], 0.01);
    }

    #[test]
    fn normalization_unit_invariant() {
        let mut rs: Vec<MetricsReport> = (1..=3).map(|_| report_with(&[])).collect();
        for (i, r) in rs.iter_mut().enumerate() {
            r.node_usage = 0.2 * (i + 1) as f64;
            r.avg_wait = 100.0 * (i + 1) as f64;
        }
        let named = |rs: &[MetricsReport]| -> Vec<(String, MetricsReport)> {
            rs.iter().enumerate().map(|(i, r)| (i.to_string(), r.clone())).collect()
        };
        let base = named(&rs);
        let refs: Vec<(String, &MetricsReport)> = base.iter().map(|(n, r)| (n.clone(), r)).collect();
        let x = parse(&emit_comparison(&refs, true).unwrap());
        for r in &mut rs {
            r.avg_wait *= 60.0;
            r.node_usage *= 100.0;
        }
        let scaled = named(&rs);
        let refs: Vec<(String, &MetricsReport)> = scaled.iter().map(|(n, r)| (n.clone(), r)).collect();
        let y = parse(&emit_comparison(&refs, true).unwrap());
        for (a, b) in x.iter().flatten().zip(y.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_wait_slowdown_is_one() {
        let cfg = SystemConfig::new(4, 0);
        let j = Job::new("a", 0, 1, 5);
        let r = compute_metrics(&job_log(&j.id, 0, 0, 5, 1, 0), &cfg, Trim::NONE, 0).unwrap();
        assert_eq!(r.jobs[0].slowdown, 1.0);
    }
}
