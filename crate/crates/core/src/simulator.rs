//! Discrete-event replay of a workload through base priority, window,
//! selection policy and EASY backfilling.
//!
//! All events at one timestamp are applied in a fixed order (completions,
//! then submissions, each by job id) before a single scheduling tick runs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{BasePriority, Job, JobState, SystemConfig, SystemState, Time};
use crate::moo::{GaParams, WindowProblem};
use crate::policies::{assign_nodes, select_problem, PolicySpec};
use crate::trace::Workload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Submit,
    ScheduleTick,
    JobStart,
    JobEnd,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: Time,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    pub nodes: u32,
    #[serde(default, skip_serializing_if = "is_zero_u64")]
    pub bb_gb: u64,
    #[serde(default, skip_serializing_if = "is_zero_u32")]
    pub ssd_per_node_gb: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assigned: Vec<usize>,
    /// Ticks the job spent in the window before it started.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_ticks: Option<u32>,
}

fn is_zero_u32(v: &u32) -> bool {
    *v == 0
}

fn is_zero_u64(v: &u64) -> bool {
    *v == 0
}

impl SimEvent {
    fn for_job(time: Time, kind: EventKind, job: &Job) -> Self {
        SimEvent {
            time,
            kind,
            job: Some(job.id.clone()),
            nodes: job.nodes_requested,
            bb_gb: job.bb_request,
            ssd_per_node_gb: job.ssd_per_node,
            assigned: Vec::new(),
            window_ticks: None,
        }
    }

    fn tick(time: Time) -> Self {
        SimEvent {
            time,
            kind: EventKind::ScheduleTick,
            job: None,
            nodes: 0,
            bb_gb: 0,
            ssd_per_node_gb: 0,
            assigned: Vec::new(),
            window_ticks: None,
        }
    }
}

pub fn write_event_log<W: Write>(events: &[SimEvent], mut out: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_event_log<R: std::io::Read>(input: R) -> Result<Vec<SimEvent>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(input).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Base-scheduler priority; larger runs first.
///
/// FCFS ranks by arrival. WFP ranks by `nodes * (wait / estimate)^3`, which
/// favors large jobs that have waited long relative to their request.
pub fn compute_priority(job: &Job, now: Time, base: BasePriority) -> f64 {
    match base {
        BasePriority::Fcfs => -(job.submit_time as f64),
        BasePriority::Wfp => {
            let wait = (now - job.submit_time).max(0) as f64;
            let ratio = wait / job.walltime_estimate.max(1) as f64;
            job.nodes_requested as f64 * ratio.powi(3)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowEntry {
    pub job: Job,
    pub ticks: u32,
}

/// Jobs under consideration for selection, with how many ticks each has
/// been passed over.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowState {
    pub entries: Vec<WindowEntry>,
    pub capacity: usize,
}

impl WindowState {
    pub fn new(capacity: usize) -> Self {
        WindowState {
            entries: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.job.id == id)
    }

    /// Entries that reached the starvation bound.
    pub fn must_run(&self, bound: u32) -> Vec<&WindowEntry> {
        self.entries.iter().filter(|e| e.ticks >= bound).collect()
    }
}

fn deps_done(job: &Job, completed: &HashSet<String>) -> bool {
    job.dependencies.iter().all(|d| completed.contains(d))
}

/// Tops the window up from the front of the priority-ordered queue, skipping
/// jobs already present and jobs whose dependencies have not completed.
pub fn fill_window(queue: &[Job], ws: &mut WindowState, completed: &HashSet<String>) {
    let mut present: HashSet<String> = ws.entries.iter().map(|e| e.job.id.clone()).collect();
    for job in queue {
        if ws.entries.len() >= ws.capacity {
            break;
        }
        if present.contains(&job.id) || !deps_done(job, completed) {
            continue;
        }
        present.insert(job.id.clone());
        let mut job = job.clone();
        job.state = JobState::InWindow;
        ws.entries.push(WindowEntry { job, ticks: 0 });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub job: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationOutput {
    pub events: Vec<SimEvent>,
    pub rejected: Vec<Rejection>,
}

/// What one scheduling tick started.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TickReport {
    pub time: Time,
    pub forced: Vec<String>,
    pub selected: Vec<String>,
    pub backfilled: Vec<String>,
}

impl TickReport {
    pub fn started(&self) -> Vec<String> {
        self.forced
            .iter()
            .chain(&self.selected)
            .chain(&self.backfilled)
            .cloned()
            .collect()
    }
}

/// Free resources in aggregate form, used for reservation arithmetic.
#[derive(Debug, Clone)]
struct Pool {
    by_ssd: BTreeMap<u32, u32>,
    bb: u64,
}

impl Pool {
    fn of(state: &SystemState) -> Self {
        Pool {
            by_ssd: state.free_by_ssd().clone(),
            bb: state.free_bb(),
        }
    }

    fn release(&mut self, state: &SystemState, nodes: &[usize], bb: u64) {
        for &i in nodes {
            *self.by_ssd.entry(state.nodes()[i].ssd_gb).or_insert(0) += 1;
        }
        self.bb += bb;
    }

    /// Takes the job's resources (smallest sufficient class first) if they
    /// are available; leaves the pool untouched otherwise.
    fn take(&mut self, nodes: u32, ssd: u32, bb: u64) -> bool {
        if bb > self.bb {
            return false;
        }
        let eligible: u32 = self.by_ssd.range(ssd..).map(|(_, &n)| n).sum();
        if eligible < nodes {
            return false;
        }
        let mut need = nodes;
        for (_, free) in self.by_ssd.range_mut(ssd..) {
            let t = need.min(*free);
            *free -= t;
            need -= t;
            if need == 0 {
                break;
            }
        }
        self.bb -= bb;
        true
    }

    fn fits(&self, nodes: u32, ssd: u32, bb: u64) -> bool {
        self.clone().take(nodes, ssd, bb)
    }
}

/// Event-driven simulator state for one (workload, config, policy) run.
pub struct Simulator<'a> {
    jobs: &'a [Job],
    cfg: &'a SystemConfig,
    policy: &'a PolicySpec,
    extension: bool,
    state: SystemState,
    window: WindowState,
    /// Submitted jobs that have not started, by index into `jobs`.
    waiting: Vec<usize>,
    completed: HashSet<String>,
    index: HashMap<&'a str, usize>,
    ends: BinaryHeap<Reverse<(Time, String, usize)>>,
    next_submit: usize,
    ticks: u64,
    events: Vec<SimEvent>,
    rejected: Vec<Rejection>,
}

impl<'a> Simulator<'a> {
    pub fn new(workload: &'a Workload, cfg: &'a SystemConfig, policy: &'a PolicySpec) -> Result<Self> {
        cfg.validate()?;
        policy.validate()?;
        workload.validate()?;
        Ok(Simulator {
            jobs: &workload.jobs,
            cfg,
            policy,
            extension: cfg.ssd_enabled(),
            state: SystemState::new(cfg),
            window: WindowState::new(cfg.scheduler.window_size),
            waiting: Vec::new(),
            completed: HashSet::new(),
            index: workload
                .jobs
                .iter()
                .enumerate()
                .map(|(i, j)| (j.id.as_str(), i))
                .collect(),
            ends: BinaryHeap::new(),
            next_submit: 0,
            ticks: 0,
            events: Vec::new(),
            rejected: Vec::new(),
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn window(&self) -> &WindowState {
        &self.window
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    fn next_time(&self) -> Option<Time> {
        let sub = self.jobs.get(self.next_submit).map(|j| j.submit_time);
        let end = self.ends.peek().map(|Reverse((t, _, _))| *t);
        match (sub, end) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Applies every event at the next timestamp and runs one tick.
    pub fn step(&mut self) -> Option<TickReport> {
        let now = self.next_time()?;
        while let Some(Reverse((t, _, _))) = self.ends.peek() {
            if *t != now {
                break;
            }
            let Reverse((_, id, idx)) = self.ends.pop().expect("peeked");
            self.state.finish(&id);
            self.completed.insert(id);
            self.events
                .push(SimEvent::for_job(now, EventKind::JobEnd, &self.jobs[idx]));
        }
        let mut arrivals = Vec::new();
        while let Some(job) = self.jobs.get(self.next_submit) {
            if job.submit_time != now {
                break;
            }
            arrivals.push(self.next_submit);
            self.next_submit += 1;
        }
        arrivals.sort_by(|&a, &b| self.jobs[a].id.cmp(&self.jobs[b].id));
        for idx in arrivals {
            let job = &self.jobs[idx];
            self.events.push(SimEvent::for_job(now, EventKind::Submit, job));
            if self.cfg.can_ever_fit(job) {
                self.waiting.push(idx);
            } else {
                let reason = format!(
                    "requests {} nodes / {} GB burst buffer / {} GB SSD per node, beyond machine capacity",
                    job.nodes_requested, job.bb_request, job.ssd_per_node
                );
                warn!("rejecting job {}: {reason}", job.id);
                self.rejected.push(Rejection {
                    job: job.id.clone(),
                    reason,
                });
            }
        }
        Some(self.schedule_tick(now))
    }

    /// Waiting jobs whose dependencies are met, highest priority first.
    fn ordered_eligible(&self, now: Time) -> Vec<usize> {
        let base = self.cfg.scheduler.base;
        let mut keyed: Vec<(f64, usize)> = self
            .waiting
            .iter()
            .copied()
            .filter(|&i| deps_done(&self.jobs[i], &self.completed))
            .map(|i| (compute_priority(&self.jobs[i], now, base), i))
            .collect();
        keyed.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.jobs[a.1].submit_time.cmp(&self.jobs[b.1].submit_time))
                .then(a.1.cmp(&b.1))
        });
        keyed.into_iter().map(|(_, i)| i).collect()
    }

    fn fits_now(&self, job: &Job) -> bool {
        let ssd = if self.extension { job.ssd_per_node } else { 0 };
        Pool::of(&self.state).fits(job.nodes_requested, ssd, job.bb_request)
    }

    fn start(&mut self, idx: usize, now: Time) {
        let job = &self.jobs[idx];
        let ssd = if self.extension { job.ssd_per_node } else { 0 };
        let assignment =
            assign_nodes(job.nodes_requested, ssd, &self.state).expect("caller checked fit");
        self.state.start(job, assignment.nodes.clone(), now);
        let ticks = self
            .window
            .entries
            .iter()
            .position(|e| e.job.id == job.id)
            .map(|p| self.window.entries.remove(p).ticks)
            .unwrap_or(0);
        self.waiting.retain(|&i| i != idx);
        let mut ev = SimEvent::for_job(now, EventKind::JobStart, job);
        ev.assigned = assignment.nodes;
        ev.window_ticks = Some(ticks);
        self.events.push(ev);
        let end = now + job.effective_runtime() as Time;
        self.ends.push(Reverse((end, job.id.clone(), idx)));
    }

    fn tick_params(&self) -> GaParams {
        let mut ga = self.cfg.scheduler.ga;
        ga.seed = ga
            .seed
            .wrapping_add(self.ticks.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        ga
    }

    /// One scheduling pass: forced starts for starving jobs, policy
    /// selection over the window, then backfilling.
    pub fn schedule_tick(&mut self, now: Time) -> TickReport {
        self.events.push(SimEvent::tick(now));
        self.ticks += 1;
        let mut report = TickReport {
            time: now,
            ..Default::default()
        };

        let order = self.ordered_eligible(now);
        let rank: HashMap<&str, usize> = order
            .iter()
            .enumerate()
            .map(|(r, &i)| (self.jobs[i].id.as_str(), r))
            .collect();
        self.window
            .entries
            .sort_by_key(|e| rank.get(e.job.id.as_str()).copied().unwrap_or(usize::MAX));
        let queue: Vec<Job> = order
            .iter()
            .take(self.window.capacity + self.window.entries.len())
            .map(|&i| self.jobs[i].clone())
            .collect();
        fill_window(&queue, &mut self.window, &self.completed);

        // Starving jobs go first; the first one that cannot start holds a
        // reservation and suppresses policy selection for this tick.
        let bound = self.cfg.scheduler.starvation_bound;
        let mut reserved: Option<usize> = None;
        let starving: Vec<usize> = self
            .window
            .must_run(bound)
            .iter()
            .map(|e| self.index[e.job.id.as_str()])
            .collect();
        for idx in starving {
            if self.fits_now(&self.jobs[idx]) {
                self.start(idx, now);
                report.forced.push(self.jobs[idx].id.clone());
            } else {
                reserved = Some(idx);
                break;
            }
        }

        if reserved.is_none() && !self.window.entries.is_empty() {
            let window_jobs: Vec<Job> = self.window.entries.iter().map(|e| e.job.clone()).collect();
            let problem = WindowProblem::new(&window_jobs, &self.state, self.cfg, self.extension)
                .expect("extension flag matches config");
            let sel = select_problem(self.policy, &problem, self.cfg, &self.tick_params());
            let mut chosen: Vec<usize> = sel
                .selected()
                .map(|p| self.index[window_jobs[p].id.as_str()])
                .collect();
            // Most SSD-demanding first so the joint feasibility check holds
            // node by node.
            chosen.sort_by_key(|&i| (Reverse(self.jobs[i].ssd_per_node), i));
            for idx in chosen {
                if self.fits_now(&self.jobs[idx]) {
                    self.start(idx, now);
                    report.selected.push(self.jobs[idx].id.clone());
                }
            }
        }

        for e in &mut self.window.entries {
            if e.ticks <= bound {
                e.ticks += 1;
            }
        }

        if self.cfg.scheduler.backfill {
            report.backfilled = self.easy_backfill(now, reserved);
        }
        report
    }

    /// Classic EASY: the highest-priority waiting job (or the starving job
    /// holding a reservation) gets the earliest start computed from running
    /// jobs' estimates; later jobs may start now only if they cannot delay it.
    pub fn easy_backfill(&mut self, now: Time, reserved: Option<usize>) -> Vec<String> {
        let mut started = Vec::new();
        let mut order = self.ordered_eligible(now);
        if let Some(r) = reserved {
            order.retain(|&i| i != r);
            order.insert(0, r);
        }
        let mut pos = 0;
        // Start heads that already fit.
        while pos < order.len() && self.fits_now(&self.jobs[order[pos]]) {
            self.start(order[pos], now);
            started.push(self.jobs[order[pos]].id.clone());
            pos += 1;
        }
        if pos >= order.len() {
            return started;
        }
        let head = &self.jobs[order[pos]];
        let head_ssd = if self.extension { head.ssd_per_node } else { 0 };

        let mut running: Vec<(&String, &crate::model::RunningJob)> = self.state.running().iter().collect();
        running.sort_by(|a, b| a.1.estimated_end.cmp(&b.1.estimated_end).then(a.0.cmp(b.0)));
        let mut pool = Pool::of(&self.state);
        let mut shadow: Option<Time> = None;
        for (_, rj) in running {
            pool.release(&self.state, &rj.nodes, rj.bb_gb);
            if pool.fits(head.nodes_requested, head_ssd, head.bb_request) {
                shadow = Some(rj.estimated_end.max(now));
                break;
            }
        }
        let mut extra = match shadow {
            Some(_) => {
                let mut p = pool;
                p.take(head.nodes_requested, head_ssd, head.bb_request);
                Some(p)
            }
            None => None,
        };

        for &idx in &order[pos + 1..] {
            let job = &self.jobs[idx];
            if !self.fits_now(job) {
                continue;
            }
            let ssd = if self.extension { job.ssd_per_node } else { 0 };
            let ok = match (shadow, extra.as_mut()) {
                (Some(t), Some(x)) => {
                    now + job.walltime_estimate as Time <= t
                        || x.take(job.nodes_requested, ssd, job.bb_request)
                }
                // The head cannot start even on an idle machine (its
                // dependencies hold elsewhere); nothing to protect.
                _ => true,
            };
            if ok {
                self.start(idx, now);
                started.push(self.jobs[idx].id.clone());
            }
        }
        started
    }

    pub fn run(mut self) -> SimulationOutput {
        while self.step().is_some() {}
        for &idx in &self.waiting {
            let job = &self.jobs[idx];
            let reason = "never became eligible (unsatisfiable dependencies)".to_string();
            warn!("job {} {reason}", job.id);
            self.rejected.push(Rejection {
                job: job.id.clone(),
                reason,
            });
        }
        SimulationOutput {
            events: self.events,
            rejected: self.rejected,
        }
    }
}

/// Replays the workload to completion and returns the event log.
pub fn run_simulation(
    workload: &Workload,
    cfg: &SystemConfig,
    policy: &PolicySpec,
) -> Result<SimulationOutput> {
    Ok(Simulator::new(workload, cfg, policy)?.run())
}

/// Replays a log against the machine and reports the first violation of
/// capacity, node exclusivity, SSD fit, dependency order or the starvation
/// bound.
pub fn audit_event_log(events: &[SimEvent], workload: &Workload, cfg: &SystemConfig) -> std::result::Result<(), String> {
    let jobs: HashMap<&str, &Job> = workload.jobs.iter().map(|j| (j.id.as_str(), j)).collect();
    let layout = cfg.node_ssd_gb.clone();
    let mut owner: Vec<Option<&str>> = vec![None; cfg.total_nodes as usize];
    let mut bb = 0u64;
    let mut started: HashMap<&str, Time> = HashMap::new();
    let mut ended: HashSet<&str> = HashSet::new();
    let mut last = Time::MIN;
    let bound = cfg.scheduler.starvation_bound;
    for e in events {
        if e.time < last {
            return Err(format!("time goes backwards at {}", e.time));
        }
        last = e.time;
        let Some(id) = e.job.as_deref() else { continue };
        let job = jobs.get(id).ok_or_else(|| format!("unknown job {id}"))?;
        match e.kind {
            EventKind::JobStart => {
                if e.time < job.submit_time {
                    return Err(format!("{id} starts before submission"));
                }
                if started.insert(id, e.time).is_some() {
                    return Err(format!("{id} starts twice"));
                }
                if let Some(d) = job.dependencies.iter().find(|d| !ended.contains(d.as_str())) {
                    return Err(format!("{id} starts before dependency {d} ends"));
                }
                if e.assigned.len() != job.nodes_requested as usize {
                    return Err(format!("{id} got {} nodes, asked {}", e.assigned.len(), job.nodes_requested));
                }
                for &n in &e.assigned {
                    let slot = owner.get_mut(n).ok_or_else(|| format!("{id} on missing node {n}"))?;
                    if let Some(other) = slot {
                        return Err(format!("{id} and {other} share node {n} at {}", e.time));
                    }
                    *slot = Some(id);
                    if let Some(l) = &layout {
                        if job.ssd_per_node > l[n] {
                            return Err(format!("{id} needs {} GB SSD, node {n} has {}", job.ssd_per_node, l[n]));
                        }
                    }
                }
                bb += job.bb_request;
                if bb > cfg.usable_bb_gb() {
                    return Err(format!("burst buffer oversubscribed at {}: {bb} GB", e.time));
                }
                match e.window_ticks {
                    Some(t) if t > bound + 1 => {
                        return Err(format!("{id} waited {t} ticks in the window (bound {bound})"))
                    }
                    _ => {}
                }
            }
            EventKind::JobEnd => {
                let s = started.get(id).ok_or_else(|| format!("{id} ends without starting"))?;
                if (e.time - s) as u64 != job.effective_runtime() {
                    return Err(format!("{id} ran {} s, expected {}", e.time - s, job.effective_runtime()));
                }
                for slot in owner.iter_mut().filter(|o| **o == Some(id)) {
                    *slot = None;
                }
                bb -= job.bb_request;
                ended.insert(id);
            }
            _ => {}
        }
    }
    if started.len() != ended.len() {
        return Err("log ends with jobs still running".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_config, example_window};

    #[test]
    fn priority_examples() {
        let a = Job::new("a", 100, 1, 10);
        let b = Job::new("b", 200, 1, 10);
        assert!(compute_priority(&a, 300, BasePriority::Fcfs) > compute_priority(&b, 300, BasePriority::Fcfs));
        assert_eq!(compute_priority(&a, 100, BasePriority::Wfp), 0.0);
        // Waits of 2 h and 1 h against a 1 h estimate: 10 * 8 vs 100 * 1.
        let small = Job::new("s", 0, 10, 3600);
        let large = Job::new("l", 3600, 100, 3600);
        assert_eq!(compute_priority(&small, 7200, BasePriority::Wfp), 80.0);
        assert_eq!(compute_priority(&large, 7200, BasePriority::Wfp), 100.0);
    }

    #[test]
    fn fill_window_examples() {
        let queue: Vec<Job> = (0..25).map(|i| Job::new(format!("q{i:02}"), i, 1, 1)).collect();
        let mut ws = WindowState::new(20);
        fill_window(&queue, &mut ws, &HashSet::new());
        assert_eq!(ws.entries.len(), 20);
        assert_eq!(ws.entries[19].job.id, "q19");

        let queue = vec![
            Job::new("child", 0, 1, 1).with_dependencies(["parent"]),
            Job::new("other", 1, 1, 1),
        ];
        let mut ws = WindowState::new(2);
        fill_window(&queue, &mut ws, &HashSet::new());
        assert_eq!(ws.entries.len(), 1);
        assert_eq!(ws.entries[0].job.id, "other");
        let done: HashSet<String> = ["parent".to_string()].into();
        fill_window(&queue, &mut ws, &done);
        assert_eq!(ws.entries.len(), 2);

        let mut ws = WindowState::new(3);
        ws.entries.push(WindowEntry {
            job: Job::new("old", 0, 1, 1),
            ticks: 50,
        });
        fill_window(&[Job::new("new", 1, 1, 1)], &mut ws, &HashSet::new());
        assert_eq!(ws.entries[0].ticks, 50);
        assert_eq!(ws.entries[1].ticks, 0);
        assert_eq!(ws.must_run(50).len(), 1);
    }

    fn example_sim_first_tick(policy: PolicySpec) -> TickReport {
        let cfg = example_config();
        let wl = Workload::new(example_window(), "t1").unwrap();
        let mut sim = Simulator::new(&wl, &cfg, &policy).unwrap();
        sim.step().unwrap()
    }

    #[test]
    fn example_tick_bbsched() {
        let r = example_sim_first_tick(PolicySpec::bbsched(2.0));
        assert_eq!(r.selected, vec!["J2", "J3", "J4", "J5"]);
        assert!(r.backfilled.is_empty());
    }

    #[test]
    fn example_tick_naive_backfills_j4() {
        let r = example_sim_first_tick(PolicySpec::naive());
        assert_eq!(r.selected, vec!["J1"]);
        assert_eq!(r.backfilled, vec!["J4"]);
    }

    #[test]
    fn empty_window_starts_nothing() {
        let cfg = example_config();
        let wl = Workload::new(vec![], "empty").unwrap();
        let policy = PolicySpec::naive();
        let mut sim = Simulator::new(&wl, &cfg, &policy).unwrap();
        assert!(sim.step().is_none());
        let r = sim.schedule_tick(0);
        assert!(r.started().is_empty());
    }

    fn starts(out: &SimulationOutput) -> BTreeMap<String, Time> {
        out.events
            .iter()
            .filter(|e| e.kind == EventKind::JobStart)
            .map(|e| (e.job.clone().unwrap(), e.time))
            .collect()
    }

    #[test]
    fn single_job_starts_on_arrival() {
        let cfg = example_config();
        let wl = Workload::new(vec![Job::new("a", 42, 10, 100)], "one").unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::naive()).unwrap();
        assert_eq!(starts(&out)["a"], 42);
    }

    #[test]
    fn two_large_jobs_serialize() {
        let cfg = example_config();
        let wl = Workload::new(vec![Job::new("a", 0, 60, 3600), Job::new("b", 0, 60, 3600)], "two")
            .unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::naive()).unwrap();
        let s = starts(&out);
        assert_eq!((s["a"], s["b"]), (0, 3600));
    }

    #[test]
    fn example_bbsched_timeline() {
        // J2..J5 start at 0. J1 needs 80 nodes and 20 TB: J4 ends at 1800,
        // J2 at 3600 (freeing the burst buffer), J5 at 5400, J3 at 7200, the
        // first point with 80 free nodes.
        let cfg = example_config();
        let wl = Workload::new(example_window(), "t1").unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::bbsched(2.0)).unwrap();
        let s = starts(&out);
        for j in ["J2", "J3", "J4", "J5"] {
            assert_eq!(s[j], 0, "{j}");
        }
        assert_eq!(s["J1"], 7200);
    }

    #[test]
    fn oversize_jobs_rejected() {
        let cfg = example_config();
        let wl = Workload::new(vec![Job::new("big", 0, 101, 10), Job::new("ok", 0, 1, 10)], "r")
            .unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::naive()).unwrap();
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].job, "big");
        assert!(starts(&out).contains_key("ok"));
    }

    #[test]
    fn dependencies_gate_start() {
        let cfg = example_config();
        let wl = Workload::new(
            vec![
                Job::new("a", 0, 10, 500),
                Job::new("b", 0, 10, 100).with_dependencies(["a"]),
            ],
            "deps",
        )
        .unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::naive()).unwrap();
        assert_eq!(starts(&out)["b"], 500);
    }

    #[test]
    fn overruns_truncated_at_estimate() {
        let cfg = example_config();
        let wl = Workload::new(vec![Job::new("a", 0, 1, 1000).with_estimate(600)], "o").unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::naive()).unwrap();
        let end = out.events.iter().find(|e| e.kind == EventKind::JobEnd).unwrap();
        assert_eq!(end.time, 600);
    }

    #[test]
    fn event_log_round_trips() {
        let cfg = example_config();
        let wl = Workload::new(example_window(), "t1").unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::naive()).unwrap();
        let mut buf = Vec::new();
        write_event_log(&out.events, &mut buf).unwrap();
        assert_eq!(read_event_log(buf.as_slice()).unwrap(), out.events);
    }

    #[test]
    fn starving_job_is_forced() {
        // A 60-node job at the head keeps losing to pairs of small jobs under
        // bbsched; with a bound of 2 it must eventually start on its own.
        let mut cfg = SystemConfig::new(100, 100);
        cfg.scheduler.starvation_bound = 2;
        cfg.scheduler.backfill = false;
        let mut jobs = vec![Job::new("wide", 0, 60, 100).with_bb(0)];
        for i in 0..40 {
            jobs.push(Job::new(format!("s{i:02}"), i * 10, 50, 100).with_bb(50));
        }
        let wl = Workload::new(jobs, "starve").unwrap();
        let out = run_simulation(&wl, &cfg, &PolicySpec::bbsched(2.0)).unwrap();
        let start = out
            .events
            .iter()
            .find(|e| e.kind == EventKind::JobStart && e.job.as_deref() == Some("wide"))
            .unwrap();
        assert!(start.window_ticks.unwrap() <= 3);
    }
}
