//! Domain types shared by the solver, the policies and the simulator.
//!
//! Resource quantities are integral: nodes are counts, burst buffer and SSD
//! volumes are gigabytes, and time is whole seconds.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moo::GaParams;

/// Seconds since the trace epoch.
pub type Time = i64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    #[default]
    Queued,
    InWindow,
    Running,
    Completed,
}

impl JobState {
    fn is_queued(&self) -> bool {
        *self == JobState::Queued
    }
}

/// One batch job as submitted to the machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub submit_time: Time,
    #[serde(rename = "nodes")]
    pub nodes_requested: u32,
    pub walltime_estimate: u64,
    pub runtime: u64,
    #[serde(rename = "bb_request_gb", default)]
    pub bb_request: u64,
    #[serde(rename = "ssd_per_node_gb", default)]
    pub ssd_per_node: u32,
    #[serde(default)]
    pub dependencies: Vec<String>,
    #[serde(default, skip_serializing_if = "JobState::is_queued")]
    pub state: JobState,
}

impl Job {
    pub fn new(id: impl Into<String>, submit_time: Time, nodes: u32, runtime: u64) -> Self {
        Job {
            id: id.into(),
            submit_time,
            nodes_requested: nodes,
            walltime_estimate: runtime,
            runtime,
            bb_request: 0,
            ssd_per_node: 0,
            dependencies: Vec::new(),
            state: JobState::Queued,
        }
    }

    pub fn with_bb(mut self, gb: u64) -> Self {
        self.bb_request = gb;
        self
    }

    pub fn with_ssd(mut self, gb_per_node: u32) -> Self {
        self.ssd_per_node = gb_per_node;
        self
    }

    pub fn with_estimate(mut self, seconds: u64) -> Self {
        self.walltime_estimate = seconds;
        self
    }

    pub fn with_dependencies<I, S>(mut self, deps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.dependencies = deps.into_iter().map(Into::into).collect();
        self
    }

    /// Time the job actually occupies its allocation: over-runs are killed
    /// at the walltime estimate.
    pub fn effective_runtime(&self) -> u64 {
        self.runtime.min(self.walltime_estimate)
    }

    /// Total local SSD requested across all of the job's nodes.
    pub fn ssd_total(&self) -> u64 {
        self.ssd_per_node as u64 * self.nodes_requested as u64
    }
}

/// Which priority order the base scheduler imposes on the waiting queue.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePriority {
    #[default]
    Fcfs,
    Wfp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerParams {
    pub window_size: usize,
    /// Number of ticks a job may sit in the window before it must run.
    pub starvation_bound: u32,
    pub base: BasePriority,
    pub backfill: bool,
    pub ga: GaParams,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        SchedulerParams {
            window_size: 20,
            starvation_bound: 50,
            base: BasePriority::Fcfs,
            backfill: true,
            ga: GaParams::default(),
        }
    }
}

/// Machine capacities plus the scheduling parameters shared by every policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub total_nodes: u32,
    pub total_bb_gb: u64,
    /// Burst buffer held by persistent reservations, unavailable to jobs.
    #[serde(default)]
    pub persistent_bb_gb: u64,
    /// Per-node local SSD capacity; `None` disables the SSD objectives.
    #[serde(default)]
    pub node_ssd_gb: Option<Vec<u32>>,
    #[serde(default)]
    pub scheduler: SchedulerParams,
}

impl SystemConfig {
    pub fn new(total_nodes: u32, total_bb_gb: u64) -> Self {
        SystemConfig {
            total_nodes,
            total_bb_gb,
            persistent_bb_gb: 0,
            node_ssd_gb: None,
            scheduler: SchedulerParams::default(),
        }
    }

    /// Half the nodes with `small` GB SSDs, the rest with `large`.
    pub fn with_split_ssd(mut self, small: u32, large: u32) -> Self {
        let n = self.total_nodes as usize;
        let layout = (0..n).map(|i| if i < n / 2 { small } else { large }).collect();
        self.node_ssd_gb = Some(layout);
        self
    }

    pub fn ssd_enabled(&self) -> bool {
        self.node_ssd_gb.is_some()
    }

    pub fn total_ssd_gb(&self) -> u64 {
        self.node_ssd_gb
            .as_ref()
            .map(|v| v.iter().map(|&c| c as u64).sum())
            .unwrap_or(0)
    }

    /// Burst buffer capacity jobs can actually use.
    pub fn usable_bb_gb(&self) -> u64 {
        self.total_bb_gb.saturating_sub(self.persistent_bb_gb)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_nodes == 0 {
            return Err(Error::config("total_nodes", "must be at least 1"));
        }
        if self.persistent_bb_gb > self.total_bb_gb {
            return Err(Error::config(
                "persistent_bb_gb",
                "reservation exceeds total burst buffer",
            ));
        }
        if let Some(layout) = &self.node_ssd_gb {
            if layout.len() != self.total_nodes as usize {
                return Err(Error::config(
                    "node_ssd_gb",
                    format!("{} entries for {} nodes", layout.len(), self.total_nodes),
                ));
            }
        }
        if self.scheduler.window_size == 0 {
            return Err(Error::config("scheduler.window_size", "must be at least 1"));
        }
        self.scheduler.ga.validate()
    }

    /// Whether the job could ever run on an empty machine.
    pub fn can_ever_fit(&self, job: &Job) -> bool {
        if job.nodes_requested == 0
            || job.nodes_requested > self.total_nodes
            || job.bb_request > self.usable_bb_gb()
        {
            return false;
        }
        match &self.node_ssd_gb {
            Some(layout) => {
                layout.iter().filter(|&&c| c >= job.ssd_per_node).count()
                    >= job.nodes_requested as usize
            }
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSlot {
    pub ssd_gb: u32,
    pub occupant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunningJob {
    pub start: Time,
    pub estimated_end: Time,
    pub nodes: Vec<usize>,
    pub bb_gb: u64,
    pub ssd_per_node: u32,
}

/// Instantaneous allocation of the machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemState {
    nodes: Vec<NodeSlot>,
    nodes_used: u32,
    bb_used: u64,
    bb_capacity: u64,
    /// Free node count per SSD capacity class.
    free_by_ssd: BTreeMap<u32, u32>,
    running: BTreeMap<String, RunningJob>,
}

impl SystemState {
    pub fn new(cfg: &SystemConfig) -> Self {
        let nodes: Vec<NodeSlot> = match &cfg.node_ssd_gb {
            Some(layout) => layout
                .iter()
                .map(|&c| NodeSlot {
                    ssd_gb: c,
                    occupant: None,
                })
                .collect(),
            None => (0..cfg.total_nodes)
                .map(|_| NodeSlot {
                    ssd_gb: 0,
                    occupant: None,
                })
                .collect(),
        };
        let mut free_by_ssd = BTreeMap::new();
        for n in &nodes {
            *free_by_ssd.entry(n.ssd_gb).or_insert(0) += 1;
        }
        SystemState {
            nodes,
            nodes_used: 0,
            bb_used: cfg.persistent_bb_gb,
            bb_capacity: cfg.total_bb_gb,
            free_by_ssd,
            running: BTreeMap::new(),
        }
    }

    pub fn nodes_used(&self) -> u32 {
        self.nodes_used
    }

    pub fn bb_used(&self) -> u64 {
        self.bb_used
    }

    pub fn free_nodes(&self) -> u32 {
        self.nodes.len() as u32 - self.nodes_used
    }

    pub fn free_bb(&self) -> u64 {
        self.bb_capacity.saturating_sub(self.bb_used)
    }

    pub fn free_by_ssd(&self) -> &BTreeMap<u32, u32> {
        &self.free_by_ssd
    }

    pub fn nodes(&self) -> &[NodeSlot] {
        &self.nodes
    }

    pub fn running(&self) -> &BTreeMap<String, RunningJob> {
        &self.running
    }

    pub fn is_running(&self, id: &str) -> bool {
        self.running.contains_key(id)
    }

    /// Places a job on the given nodes. Panics if a node is already taken or
    /// burst buffer is exhausted: callers check feasibility first.
    pub fn start(&mut self, job: &Job, node_ids: Vec<usize>, now: Time) {
        assert_eq!(node_ids.len(), job.nodes_requested as usize);
        assert!(job.bb_request <= self.free_bb(), "burst buffer over-committed");
        for &i in &node_ids {
            let slot = &mut self.nodes[i];
            assert!(slot.occupant.is_none(), "node {i} already allocated");
            assert!(slot.ssd_gb >= job.ssd_per_node || job.ssd_per_node == 0);
            slot.occupant = Some(job.id.clone());
            let free = self.free_by_ssd.get_mut(&slot.ssd_gb).expect("class exists");
            *free -= 1;
        }
        self.nodes_used += job.nodes_requested;
        self.bb_used += job.bb_request;
        self.running.insert(
            job.id.clone(),
            RunningJob {
                start: now,
                estimated_end: now + job.walltime_estimate as Time,
                nodes: node_ids,
                bb_gb: job.bb_request,
                ssd_per_node: job.ssd_per_node,
            },
        );
    }

    pub fn finish(&mut self, id: &str) -> Option<RunningJob> {
        let rj = self.running.remove(id)?;
        for &i in &rj.nodes {
            let slot = &mut self.nodes[i];
            slot.occupant = None;
            *self.free_by_ssd.get_mut(&slot.ssd_gb).expect("class exists") += 1;
        }
        self.nodes_used -= rj.nodes.len() as u32;
        self.bb_used -= rj.bb_gb;
        Some(rj)
    }

    /// Lowest-index free nodes of the given SSD capacity class.
    pub(crate) fn free_nodes_in_class(&self, ssd_gb: u32, count: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.ssd_gb == ssd_gb && n.occupant.is_none())
            .map(|(i, _)| i)
            .take(count)
            .collect()
    }
}

/// Binary job-selection vector over the window, with the number of
/// generations it has survived.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionVector {
    pub bits: Vec<bool>,
    pub age: u32,
}

impl SelectionVector {
    pub fn new(bits: Vec<bool>) -> Self {
        SelectionVector { bits, age: 0 }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![false; len])
    }

    pub fn from_positions(len: usize, positions: &[usize]) -> Self {
        let mut bits = vec![false; len];
        for &p in positions {
            bits[p] = true;
        }
        Self::new(bits)
    }

    /// Parses a string of `0`/`1` characters.
    pub fn from_bitstr(s: &str) -> Self {
        Self::new(s.chars().map(|c| c == '1').collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn positions(&self) -> Vec<usize> {
        self.selected().collect()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    /// Orders selections by how close to the front of the window their jobs
    /// sit: `Less` means `self` holds the earlier jobs. At the first position
    /// where the two differ, the selection that includes that job wins.
    pub fn cmp_front(&self, other: &Self) -> Ordering {
        for (a, b) in self.bits.iter().zip(&other.bits) {
            match (a, b) {
                (true, false) => return Ordering::Less,
                (false, true) => return Ordering::Greater,
                _ => {}
            }
        }
        Ordering::Equal
    }
}

impl fmt::Display for SelectionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Objective values of one selection, all to be maximized: nodes, burst
/// buffer GB, and with the SSD extension, SSD GB and negated wasted SSD GB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObjectiveVector {
    values: [i64; 4],
    arity: usize,
}

impl ObjectiveVector {
    pub fn two(f1: i64, f2: i64) -> Self {
        ObjectiveVector {
            values: [f1, f2, 0, 0],
            arity: 2,
        }
    }

    pub fn four(f1: i64, f2: i64, f3: i64, f4: i64) -> Self {
        ObjectiveVector {
            values: [f1, f2, f3, f4],
            arity: 4,
        }
    }

    pub fn from_slice(values: &[i64]) -> Self {
        match *values {
            [a, b] => Self::two(a, b),
            [a, b, c, d] => Self::four(a, b, c, d),
            _ => panic!("objective arity must be 2 or 4, got {}", values.len()),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.values[..self.arity]
    }

    pub fn f1(&self) -> i64 {
        self.values[0]
    }

    pub fn f2(&self) -> i64 {
        self.values[1]
    }

    pub fn f3(&self) -> i64 {
        self.values[2]
    }

    pub fn f4(&self) -> i64 {
        self.values[3]
    }

    pub fn get(&self, k: usize) -> i64 {
        self.as_slice()[k]
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.as_slice().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_tracks_allocation() {
        let cfg = SystemConfig::new(10, 100);
        let mut st = SystemState::new(&cfg);
        let job = Job::new("a", 0, 4, 60).with_bb(30);
        st.start(&job, vec![0, 1, 2, 3], 0);
        assert_eq!(st.nodes_used(), 4);
        assert_eq!(st.bb_used(), 30);
        assert_eq!(st.free_by_ssd()[&0], 6);
        let rj = st.finish("a").unwrap();
        assert_eq!(rj.estimated_end, 60);
        assert_eq!(st.nodes_used(), 0);
        assert_eq!(st.free_bb(), 100);
    }

    #[test]
    fn persistent_reservation_counts_as_used() {
        let mut cfg = SystemConfig::new(10, 90);
        cfg.persistent_bb_gb = 30;
        let st = SystemState::new(&cfg);
        assert_eq!(st.bb_used(), 30);
        assert_eq!(st.free_bb(), 60);
        assert_eq!(cfg.usable_bb_gb(), 60);
    }

    #[test]
    fn front_ordering_prefers_earlier_jobs() {
        let a = SelectionVector::from_bitstr("10010");
        let b = SelectionVector::from_bitstr("01111");
        assert_eq!(a.cmp_front(&b), Ordering::Less);
        let c = SelectionVector::from_bitstr("1100");
        let d = SelectionVector::from_bitstr("1000");
        assert_eq!(c.cmp_front(&d), Ordering::Less);
        assert_eq!(c.cmp_front(&c), Ordering::Equal);
    }

    #[test]
    fn validate_rejects_bad_ssd_layout() {
        let mut cfg = SystemConfig::new(4, 0);
        cfg.node_ssd_gb = Some(vec![128, 256]);
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    }

    #[test]
    fn job_json_round_trip() {
        let job = Job::new("j7", 42, 3, 100)
            .with_bb(2048)
            .with_ssd(64)
            .with_estimate(200)
            .with_dependencies(["j1", "j2"]);
        let text = serde_json::to_string(&job).unwrap();
        let back: Job = serde_json::from_str(&text).unwrap();
        assert_eq!(job, back);
    }
}
