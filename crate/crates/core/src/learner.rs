//! Offline template creation from a profiling trace.
//!
//! A task's records are cut into loop instances at boundary syscalls (the
//! sleep or wait a periodic task blocks in). Instances are grouped by their
//! syscall-number sequence, argument constraints are induced per group, the
//! best `n` groups become templates, and a second pass over the trace fills
//! in their temporal bounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit_record::{AuditRecord, RecordKind, TaskId};
use crate::reducer::Automaton;
use crate::template::{entry_matches, TaskBinding, Template, TemplateEntry, TemplateSet, WILDCARD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("template `{0}` never matched an instance of the profiling trace")]
    NoMatchingInstances(String),
    #[error("bad temporal policy `{0}` (expected none, max or musigma:K)")]
    BadPolicy(String),
}

const ARCH_ARM: u64 = 0x4000_0028;
const ARCH_X86_64: u64 = 0xc000_003e;

/// nanosleep, sched_yield, select and epoll_wait for an audit arch value.
pub fn default_boundaries(arch: u64) -> BTreeSet<u64> {
    match arch {
        ARCH_X86_64 => [35, 24, 23, 232].into(),
        ARCH_ARM => [162, 158, 142, 252].into(),
        _ => [162, 158, 142, 252].into(),
    }
}

/// Which syscalls end a loop instance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundaries {
    /// Replaces the per-arch defaults for every task.
    pub global: Option<BTreeSet<u64>>,
    /// Per-`comm` overrides.
    pub per_comm: BTreeMap<String, BTreeSet<u64>>,
}

impl Boundaries {
    pub fn explicit(set: impl IntoIterator<Item = u64>) -> Self {
        Boundaries {
            global: Some(set.into_iter().collect()),
            per_comm: BTreeMap::new(),
        }
    }

    pub fn is_boundary(&self, r: &AuditRecord) -> bool {
        let Some(sys) = r.syscall.get() else {
            return false;
        };
        if let Some(set) = r.comm_name().and_then(|c| self.per_comm.get(c)) {
            return set.contains(&sys);
        }
        match &self.global {
            Some(set) => set.contains(&sys),
            None => default_boundaries(r.arch.get().unwrap_or(ARCH_ARM)).contains(&sys),
        }
    }
}

/// One run of records between boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub records: Vec<AuditRecord>,
    /// Run before the task's first boundary (the init phase).
    pub leading: bool,
    /// Run not closed by a boundary before the trace ended.
    pub partial: bool,
}

impl Instance {
    pub fn shape(&self) -> Vec<u64> {
        self.records
            .iter()
            .map(|r| r.syscall.get().unwrap_or(u64::MAX))
            .collect()
    }

    pub fn start_ns(&self) -> u64 {
        self.records.first().map_or(0, AuditRecord::time_ns)
    }

    pub fn duration_ns(&self) -> u64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.time_ns().saturating_sub(a.time_ns()),
            _ => 0,
        }
    }
}

/// Records of one task split into instances.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTrace {
    pub task: TaskId,
    pub comm: Option<String>,
    pub instances: Vec<Instance>,
}

/// Split each task's records at boundary syscalls. Boundary records are
/// dropped; empty runs (two boundaries in a row) produce no instance.
pub fn segment_trace(records: &[AuditRecord], boundaries: &Boundaries) -> Vec<TaskTrace> {
    struct Acc {
        comm: Option<String>,
        seen_boundary: bool,
        run: Vec<AuditRecord>,
        out: Vec<Instance>,
    }
    let mut tasks: BTreeMap<TaskId, Acc> = BTreeMap::new();
    for r in records {
        if r.kind() != RecordKind::Syscall {
            continue;
        }
        let Some(task) = r.task_id() else { continue };
        let acc = tasks.entry(task).or_insert_with(|| Acc {
            comm: r.comm_name().map(str::to_string),
            seen_boundary: false,
            run: Vec::new(),
            out: Vec::new(),
        });
        if boundaries.is_boundary(r) {
            let leading = !acc.seen_boundary;
            acc.seen_boundary = true;
            if !acc.run.is_empty() {
                acc.out.push(Instance {
                    records: std::mem::take(&mut acc.run),
                    leading,
                    partial: false,
                });
            }
        } else {
            acc.run.push(r.clone());
        }
    }
    tasks
        .into_iter()
        .map(|(task, mut acc)| {
            if !acc.run.is_empty() {
                acc.out.push(Instance {
                    records: acc.run,
                    leading: !acc.seen_boundary,
                    partial: true,
                });
            }
            TaskTrace {
                task,
                comm: acc.comm,
                instances: acc.out,
            }
        })
        .collect()
}

/// Entry list for instances sharing one syscall sequence: an argument is
/// kept where every instance agrees on it and wildcarded otherwise.
pub fn induce_arguments(instances: &[&[AuditRecord]]) -> Vec<TemplateEntry> {
    let Some(first) = instances.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|pos| {
            let sys = first[pos].syscall.get().unwrap_or(0);
            let mut args = [WILDCARD; 4];
            for (k, slot) in args.iter_mut().enumerate() {
                let v = first[pos].arg(k).and_then(|v| i64::try_from(v).ok());
                if let Some(v) = v {
                    if instances.iter().all(|i| i[pos].arg(k) == Some(v as u64)) {
                        *slot = v;
                    }
                }
            }
            TemplateEntry::new(sys, args)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceStats {
    pub entries: Vec<TemplateEntry>,
    pub count: u64,
    pub probability: f64,
    /// Fewer than two occurrences.
    pub low_support: bool,
    #[serde(skip)]
    pub durations_ns: Vec<u64>,
    /// Start-time gaps between consecutive instances that both took this
    /// sequence.
    #[serde(skip)]
    pub interarrivals_ns: Vec<u64>,
}

impl SequenceStats {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Events saved per loop iteration by reducing this sequence.
    pub fn score(&self) -> f64 {
        self.probability * (self.entries.len() as f64 - 1.0)
    }
}

/// Best first: higher score, then longer, then lexicographically smaller.
fn rank(a: &SequenceStats, b: &SequenceStats) -> std::cmp::Ordering {
    b.score()
        .total_cmp(&a.score())
        .then_with(|| b.len().cmp(&a.len()))
        .then_with(|| a.entries.cmp(&b.entries))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskStats {
    pub task: TaskId,
    pub comm: Option<String>,
    /// Records before the first boundary.
    pub init_events: u64,
    /// Closed loop instances.
    pub instances: u64,
    pub partial_instances: u64,
    /// Ranked best first.
    pub sequences: Vec<SequenceStats>,
}

/// Sequence statistics of one task.
pub fn task_stats(trace: &TaskTrace) -> TaskStats {
    let mut init_events = 0;
    let mut partial = 0;
    let mut loops: Vec<&Instance> = Vec::new();
    for inst in &trace.instances {
        if inst.leading {
            init_events += inst.records.len() as u64;
        } else if inst.partial {
            partial += 1;
        } else {
            loops.push(inst);
        }
    }
    let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for (i, inst) in loops.iter().enumerate() {
        groups.entry(inst.shape()).or_default().push(i);
    }
    let total = loops.len() as f64;
    let mut sequences: Vec<SequenceStats> = groups
        .into_values()
        .map(|idx| {
            let recs: Vec<&[AuditRecord]> =
                idx.iter().map(|&i| loops[i].records.as_slice()).collect();
            let interarrivals_ns = idx
                .windows(2)
                .filter(|w| w[1] == w[0] + 1)
                .map(|w| loops[w[1]].start_ns() - loops[w[0]].start_ns())
                .collect();
            SequenceStats {
                entries: induce_arguments(&recs),
                count: idx.len() as u64,
                probability: idx.len() as f64 / total,
                low_support: idx.len() < 2,
                durations_ns: idx.iter().map(|&i| loops[i].duration_ns()).collect(),
                interarrivals_ns,
            }
        })
        .collect();
    sequences.sort_by(rank);
    TaskStats {
        task: trace.task,
        comm: trace.comm.clone(),
        init_events,
        instances: loops.len() as u64,
        partial_instances: partial,
        sequences,
    }
}

/// The `n` best sequences. Low-support sequences are skipped unless
/// `include_low_support` is set.
pub fn select_top_n(stats: &TaskStats, n: usize, include_low_support: bool) -> Vec<&SequenceStats> {
    stats
        .sequences
        .iter()
        .filter(|s| include_low_support || !s.low_support)
        .take(n)
        .collect()
}

/// How observed samples turn into a temporal bound.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TemporalPolicy {
    /// No bound (the template stores 0).
    #[default]
    None,
    Max,
    /// `ceil(mean + k * sigma)` with the population standard deviation.
    MeanPlusSigma(f64),
}

impl TemporalPolicy {
    /// Bound for a sample set; 0 (disabled) when there are no samples.
    pub fn apply(&self, samples: &[u64]) -> u64 {
        if samples.is_empty() {
            return 0;
        }
        match *self {
            TemporalPolicy::None => 0,
            TemporalPolicy::Max => samples.iter().copied().max().unwrap_or(0),
            TemporalPolicy::MeanPlusSigma(k) => {
                let n = samples.len() as f64;
                let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
                let var = samples
                    .iter()
                    .map(|&x| (x as f64 - mean).powi(2))
                    .sum::<f64>()
                    / n;
                (mean + k * var.sqrt()).ceil().max(0.0) as u64
            }
        }
    }
}

impl FromStr for TemporalPolicy {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, LearnError> {
        let bad = || LearnError::BadPolicy(s.to_string());
        match s {
            "none" => Ok(TemporalPolicy::None),
            "max" => Ok(TemporalPolicy::Max),
            _ => {
                let k = s.strip_prefix("musigma:").ok_or_else(bad)?;
                let k: f64 = k.parse().map_err(|_| bad())?;
                if !k.is_finite() || k < 0.0 {
                    return Err(bad());
                }
                Ok(TemporalPolicy::MeanPlusSigma(k))
            }
        }
    }
}

impl fmt::Display for TemporalPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemporalPolicy::None => f.write_str("none"),
            TemporalPolicy::Max => f.write_str("max"),
            TemporalPolicy::MeanPlusSigma(k) => write!(f, "musigma:{k}"),
        }
    }
}

/// Observed timing of one template over a trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateTiming {
    pub durations_ns: Vec<u64>,
    pub interarrivals_ns: Vec<u64>,
}

fn instance_matches(t: &Template, inst: &Instance) -> bool {
    t.entries.len() == inst.records.len()
        && t.entries
            .iter()
            .zip(&inst.records)
            .all(|(e, r)| entry_matches(e, r))
}

/// Durations and successive-start gaps of the instances matching each
/// template of `set`.
pub fn profile_timing(traces: &[TaskTrace], set: &TemplateSet) -> BTreeMap<String, TemplateTiming> {
    let mut out: BTreeMap<String, TemplateTiming> = BTreeMap::new();
    for tr in traces {
        let Some(binding) = set.binding_for(tr.task, tr.comm.as_deref()) else {
            continue;
        };
        let templates = set.templates_for(binding);
        let mut prev: Option<(usize, u64, &str)> = None;
        for (k, inst) in tr
            .instances
            .iter()
            .filter(|i| !i.leading && !i.partial)
            .enumerate()
        {
            let Some(t) = templates.iter().find(|t| instance_matches(t, inst)) else {
                prev = None;
                continue;
            };
            let timing = out.entry(t.name.clone()).or_default();
            timing.durations_ns.push(inst.duration_ns());
            if let Some((pk, pstart, pname)) = prev {
                if pk + 1 == k && pname == t.name {
                    timing.interarrivals_ns.push(inst.start_ns() - pstart);
                }
            }
            prev = Some((k, inst.start_ns(), &t.name));
        }
    }
    out
}

/// Fill in the temporal bounds of every template from a profiling trace.
pub fn temporal_profile(
    records: &[AuditRecord],
    intermediate: &TemplateSet,
    policy: TemporalPolicy,
    boundaries: &Boundaries,
) -> Result<TemplateSet, LearnError> {
    let traces = segment_trace(records, boundaries);
    apply_policy(&traces, intermediate, policy)
}

fn apply_policy(
    traces: &[TaskTrace],
    intermediate: &TemplateSet,
    policy: TemporalPolicy,
) -> Result<TemplateSet, LearnError> {
    let timing = profile_timing(traces, intermediate);
    let mut out = TemplateSet::new();
    for (binding, t) in intermediate.iter() {
        let obs = timing
            .get(&t.name)
            .ok_or_else(|| LearnError::NoMatchingInstances(t.name.clone()))?;
        let mut t = t.clone();
        t.expected_runtime_ns = policy.apply(&obs.durations_ns);
        t.expected_interarrival_ns = policy.apply(&obs.interarrivals_ns);
        out.insert(binding.clone(), t)
            .expect("names are unique in the source set");
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub boundaries: Boundaries,
    pub top_n: usize,
    pub policy: TemporalPolicy,
    pub include_low_support: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            boundaries: Boundaries::default(),
            top_n: 1,
            policy: TemporalPolicy::Max,
            include_low_support: false,
        }
    }
}

/// Per-task summary in the shape of the closed-form parameters
/// (`N`, `I`, `len`, `p`, `f`, `n`). Selected sequences come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub name: String,
    pub task: TaskId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comm: Option<String>,
    pub binding: TaskBinding,
    #[serde(rename = "N")]
    pub n_sequences: usize,
    #[serde(rename = "I")]
    pub iterations: u64,
    pub len: Vec<usize>,
    pub p: Vec<f64>,
    pub f: u64,
    pub n: usize,
    pub counts: Vec<u64>,
    pub low_support: Vec<bool>,
    pub partial_instances: u64,
    /// Template names, one per selected sequence.
    pub templates: Vec<String>,
    /// Selected sequences dropped because they would make one template a
    /// prefix of another.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_prefix_conflicts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub templates: TemplateSet,
    pub reports: Vec<TaskReport>,
    pub stats: Vec<TaskStats>,
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "task".into()
    } else {
        s
    }
}

/// Learn templates for every task in a trace.
pub fn learn(records: &[AuditRecord], cfg: &LearnConfig) -> Result<LearnOutput, LearnError> {
    let traces = segment_trace(records, &cfg.boundaries);
    let stats: Vec<TaskStats> = traces.iter().map(task_stats).collect();

    let mut comm_users: BTreeMap<Option<String>, usize> = BTreeMap::new();
    for s in &stats {
        *comm_users.entry(s.comm.clone()).or_default() += 1;
    }

    let mut intermediate = TemplateSet::new();
    let mut reports = Vec::new();
    for s in &stats {
        let shared = s.comm.is_none() || comm_users[&s.comm] > 1;
        let (binding, base) = match &s.comm {
            Some(c) if !shared => (TaskBinding::Comm(c.clone()), sanitize(c)),
            c => (
                TaskBinding::Thread(s.task),
                format!(
                    "{}-{}",
                    sanitize(c.as_deref().unwrap_or("task")),
                    s.task.tid
                ),
            ),
        };
        let chosen = select_top_n(s, cfg.top_n, cfg.include_low_support);
        let mut kept: Vec<Template> = Vec::new();
        let mut kept_idx: Vec<usize> = Vec::new();
        let mut dropped = Vec::new();
        for (rank, seq) in chosen.iter().enumerate() {
            let name = if kept.is_empty() {
                base.clone()
            } else {
                format!("{base}_{}", kept.len() + 1)
            };
            let t = Template::new(name, seq.entries.clone());
            let mut trial = kept.clone();
            trial.push(t.clone());
            if Automaton::build(&trial).is_ok() {
                kept.push(t);
                let idx = s
                    .sequences
                    .iter()
                    .position(|x| std::ptr::eq(x, *seq))
                    .expect("selected from this task");
                kept_idx.push(idx);
            } else {
                dropped.push(rank);
            }
        }
        for t in &kept {
            intermediate
                .insert(binding.clone(), t.clone())
                .expect("generated names are unique");
        }
        // Selected sequences first, the rest in rank order.
        let mut order = kept_idx.clone();
        order.extend((0..s.sequences.len()).filter(|i| !kept_idx.contains(i)));
        let seqs: Vec<&SequenceStats> = order.iter().map(|&i| &s.sequences[i]).collect();
        reports.push(TaskReport {
            name: base,
            task: s.task,
            comm: s.comm.clone(),
            binding,
            n_sequences: seqs.len(),
            iterations: s.instances,
            len: seqs.iter().map(|x| x.len()).collect(),
            p: seqs.iter().map(|x| x.probability).collect(),
            f: s.init_events,
            n: kept.len(),
            counts: seqs.iter().map(|x| x.count).collect(),
            low_support: seqs.iter().map(|x| x.low_support).collect(),
            partial_instances: s.partial_instances,
            templates: kept.iter().map(|t| t.name.clone()).collect(),
            dropped_prefix_conflicts: dropped,
        });
    }

    let templates = match cfg.policy {
        TemporalPolicy::None => intermediate,
        policy => apply_policy(&traces, &intermediate, policy)?,
    };
    Ok(LearnOutput {
        templates,
        reports,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit_record::parse_record;
    use crate::workload_gen::{bundled_spec, generate, SequenceSpec, TaskSpec, WorkloadSpec};
    use proptest::prelude::*;

    fn rec(t_us: u64, tid: u64, comm: &str, sys: u64, a0: u64) -> AuditRecord {
        let ns = 1_601_405_431_000_000_000 + t_us * 1000;
        let line = format!(
            "type=SYSCALL msg=audit({}.{:09}:{}): arch=40000028 syscall={sys} per=800000 success=yes exit=0 a0={a0:x} a1=10 a2=1 a3=3 items=0 ppid=1 pid={tid} tid={tid} auid=1000 uid=0 gid=0 euid=0 suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=pts0 ses=1 comm=\"{comm}\" exe=\"/bin/{comm}\" key=(null)",
            ns / 1_000_000_000,
            ns % 1_000_000_000,
            t_us,
        );
        parse_record(&line).unwrap()
    }

    #[test]
    fn segments_at_nanosleep() {
        let recs = [4, 4, 162, 4, 4, 162]
            .iter()
            .enumerate()
            .map(|(i, &s)| rec(i as u64, 7, "t", s, 1))
            .collect::<Vec<_>>();
        let tr = segment_trace(&recs, &Boundaries::default());
        assert_eq!(tr.len(), 1);
        let inst = &tr[0].instances;
        assert_eq!(inst.len(), 2);
        assert_eq!(inst[0].shape(), vec![4, 4]);
        assert_eq!(inst[1].shape(), vec![4, 4]);
        assert!(inst[0].leading && !inst[0].partial);
        assert!(!inst[1].leading && !inst[1].partial);
    }

    #[test]
    fn trailing_run_is_partial_and_tasks_are_separate() {
        let mut recs = vec![
            rec(0, 1, "a", 162, 0),
            rec(1, 2, "b", 3, 0),
            rec(2, 1, "a", 4, 0),
            rec(3, 2, "b", 162, 0),
            rec(4, 1, "a", 162, 0),
            rec(5, 1, "a", 4, 0),
        ];
        recs.push(rec(6, 2, "b", 5, 0));
        let tr = segment_trace(&recs, &Boundaries::default());
        let a = &tr[0];
        assert_eq!(a.task.tid, 1);
        assert_eq!(a.instances.len(), 2);
        assert!(!a.instances[0].leading && !a.instances[0].partial);
        assert!(a.instances[1].partial);
        let b = &tr[1];
        assert_eq!(b.instances.len(), 2);
        assert!(b.instances[0].leading);
        assert_eq!(b.instances[1].shape(), vec![5]);
        assert!(b.instances[1].partial);
    }

    #[test]
    fn explicit_and_per_comm_boundaries() {
        let recs = [3, 162, 3, 7, 3]
            .iter()
            .enumerate()
            .map(|(i, &s)| rec(i as u64, 1, "x", s, 0))
            .collect::<Vec<_>>();
        let b = Boundaries::explicit([7]);
        let tr = segment_trace(&recs, &b);
        assert_eq!(tr[0].instances[0].shape(), vec![3, 162, 3]);
        let mut b = Boundaries::default();
        b.per_comm.insert("x".into(), [7].into());
        assert_eq!(segment_trace(&recs, &b), tr);
        assert_eq!(default_boundaries(0xc000_003e), [35, 24, 23, 232].into());
    }

    #[test]
    fn induction_keeps_only_agreeing_args() {
        let a = vec![rec(0, 1, "x", 4, 3), rec(1, 1, "x", 4, 9)];
        let b = vec![rec(2, 1, "x", 4, 3), rec(3, 1, "x", 4, 8)];
        let e = induce_arguments(&[&a, &b]);
        assert_eq!(e[0], TemplateEntry::new(4, [3, 16, 1, 3]));
        assert_eq!(e[1], TemplateEntry::new(4, [-1, 16, 1, 3]));
        assert!(induce_arguments(&[]).is_empty());
    }

    fn seq(len: usize, sys: u64, p: f64, count: u64) -> SequenceStats {
        SequenceStats {
            entries: (0..len).map(|_| TemplateEntry::any_args(sys)).collect(),
            count,
            probability: p,
            low_support: count < 2,
            durations_ns: vec![],
            interarrivals_ns: vec![],
        }
    }

    #[test]
    fn ranking_and_selection() {
        let mut stats = TaskStats {
            task: TaskId { pid: 1, tid: 1 },
            comm: None,
            init_events: 0,
            instances: 100,
            partial_instances: 0,
            sequences: vec![
                seq(3, 4, 0.5, 50),
                seq(11, 5, 0.1, 10),
                seq(2, 3, 0.4, 39),
                seq(30, 6, 0.01, 1),
                seq(2, 2, 0.4, 39),
            ],
        };
        stats.sequences.sort_by(rank);
        let lens: Vec<usize> = stats.sequences.iter().map(|s| s.len()).collect();
        // ties on score go to the longer sequence, then the smaller one
        assert_eq!(lens, vec![11, 3, 2, 2, 30]);
        assert_eq!(stats.sequences[2].entries[0].syscall, 2);
        let top: Vec<usize> = select_top_n(&stats, 5, false)
            .iter()
            .map(|s| s.len())
            .collect();
        assert_eq!(top, vec![11, 3, 2, 2]);
        assert_eq!(select_top_n(&stats, 5, true).len(), 5);
        assert_eq!(select_top_n(&stats, 1, false)[0].len(), 11);
    }

    #[test]
    fn policies() {
        let s = [10, 20, 30, 40];
        assert_eq!(TemporalPolicy::None.apply(&s), 0);
        assert_eq!(TemporalPolicy::Max.apply(&s), 40);
        // mean 25, population sigma sqrt(125) = 11.18..
        assert_eq!(TemporalPolicy::MeanPlusSigma(1.0).apply(&s), 37);
        assert_eq!(TemporalPolicy::MeanPlusSigma(0.0).apply(&s), 25);
        assert_eq!(TemporalPolicy::Max.apply(&[]), 0);
        assert_eq!(
            "musigma:4".parse::<TemporalPolicy>().unwrap(),
            TemporalPolicy::MeanPlusSigma(4.0)
        );
        assert_eq!(
            "max".parse::<TemporalPolicy>().unwrap(),
            TemporalPolicy::Max
        );
        assert!("musigma:x".parse::<TemporalPolicy>().is_err());
        assert!("musigma:-1".parse::<TemporalPolicy>().is_err());
        assert_eq!(
            TemporalPolicy::MeanPlusSigma(2.5).to_string(),
            "musigma:2.5"
        );
    }

    fn one_task(seqs: Vec<SequenceSpec>, iterations: u64) -> WorkloadSpec {
        WorkloadSpec {
            name: None,
            seed: 3,
            epoch_ns: 1_000_000_000_000,
            arch: "40000028".into(),
            first_serial: 1,
            target_record_bytes: None,
            tasks: vec![TaskSpec {
                comm: "loop".into(),
                exe: None,
                pid: 50,
                tid: None,
                ppid: 1,
                init_records: 4,
                init_duration_ns: 1_000_000,
                period_ns: 1_000_000,
                jitter_ns: 1000,
                iterations,
                start_offset_ns: 0,
                boundary_syscall: Some(162),
                sequences: seqs,
                duration_outliers: None,
            }],
        }
    }

    #[test]
    fn learns_constants_and_wildcards_from_generated_trace() {
        let spec = one_task(
            vec![SequenceSpec {
                entries: vec![
                    "4:3:-1:1:-1".parse().unwrap(),
                    "3:5:-1:64:-1".parse().unwrap(),
                ],
                probability: 1.0,
                duration_ns: 5000,
                duration_jitter_ns: 100,
            }],
            50,
        );
        let recs = generate(&spec).unwrap();
        let out = learn(&recs, &LearnConfig::default()).unwrap();
        let (binding, t) = out.templates.iter().next().unwrap();
        assert_eq!(binding, &TaskBinding::Comm("loop".into()));
        assert_eq!(t.name, "loop");
        assert_eq!(t.entries[0], TemplateEntry::new(4, [3, -1, 1, -1]));
        assert_eq!(t.entries[1], TemplateEntry::new(3, [5, -1, 64, -1]));
        assert!(t.expected_runtime_ns >= 5000 && t.expected_runtime_ns <= 5100);
        assert!(t.expected_interarrival_ns >= 999_000 && t.expected_interarrival_ns <= 1_001_000);
        let r = &out.reports[0];
        assert_eq!((r.iterations, r.f, r.n, r.n_sequences), (50, 4, 1, 1));
        assert_eq!(r.len, vec![2]);
    }

    #[test]
    fn arducopter_statistics_recover_the_mixture() {
        let spec = bundled_spec("arducopter").unwrap().with_iterations(10_000);
        let recs = generate(&spec).unwrap();
        let cfg = LearnConfig {
            top_n: 5,
            ..LearnConfig::default()
        };
        let out = learn(&recs, &cfg).unwrap();
        assert_eq!(out.reports.len(), 1);
        let r = &out.reports[0];
        assert_eq!(r.iterations, 10_000);
        assert_eq!(r.f, 679);
        assert_eq!(r.n_sequences, 5);
        let lens: BTreeSet<usize> = spec.tasks[0]
            .sequences
            .iter()
            .map(|s| s.entries.len())
            .collect();
        let mut by_len: BTreeMap<usize, f64> = BTreeMap::new();
        for (l, p) in r.len.iter().zip(&r.p) {
            *by_len.entry(*l).or_default() += p;
        }
        for l in lens {
            let want = spec.tasks[0]
                .sequences
                .iter()
                .filter(|s| s.entries.len() == l)
                .map(|s| s.probability)
                .sum::<f64>();
            assert!(
                (by_len[&l] - want).abs() <= 0.02,
                "len {l}: {} vs {want}",
                by_len[&l]
            );
        }
        // the dominant 14-write loop comes first and keeps its fds
        let t = out.templates.get("arducopter").unwrap();
        assert_eq!(t.len(), 14);
        assert_eq!(t.entries[0], TemplateEntry::new(4, [3, -1, 1, -1]));
        assert_eq!(t.expected_runtime_ns, 1_303_419);
    }

    #[test]
    fn shared_comm_binds_by_thread() {
        let mut spec = one_task(
            vec![SequenceSpec {
                entries: vec!["4:3:-1:1:-1".parse().unwrap(); 3],
                probability: 1.0,
                duration_ns: 5000,
                duration_jitter_ns: 0,
            }],
            10,
        );
        let mut other = spec.tasks[0].clone();
        other.tid = Some(51);
        other.start_offset_ns = 300_000;
        spec.tasks.push(other);
        let out = learn(&generate(&spec).unwrap(), &LearnConfig::default()).unwrap();
        let names: Vec<String> = out.templates.iter().map(|(_, t)| t.name.clone()).collect();
        assert_eq!(names, vec!["loop-50", "loop-51"]);
        assert!(out
            .templates
            .bindings()
            .all(|b| matches!(b, TaskBinding::Thread(_))));
    }

    #[test]
    fn prefix_conflicts_drop_the_lower_ranked() {
        let recs: Vec<AuditRecord> = [
            162, 4, 4, 4, 162, 4, 4, 4, 162, 4, 4, 162, 4, 4, 162, 4, 4, 4, 162,
        ]
        .iter()
        .enumerate()
        .map(|(i, &s)| rec(i as u64, 1, "x", s, 1))
        .collect();
        let cfg = LearnConfig {
            top_n: 2,
            policy: TemporalPolicy::None,
            ..LearnConfig::default()
        };
        let out = learn(&recs, &cfg).unwrap();
        assert_eq!(out.templates.len(), 1);
        let r = &out.reports[0];
        assert_eq!(r.n, 1);
        assert_eq!(r.len, vec![3, 2]);
        assert_eq!(r.dropped_prefix_conflicts, vec![1]);
    }

    #[test]
    fn temporal_profile_needs_a_match() {
        let recs: Vec<AuditRecord> = [162, 4, 4, 162]
            .iter()
            .enumerate()
            .map(|(i, &s)| rec(i as u64, 1, "x", s, 1))
            .collect();
        let mut set = TemplateSet::new();
        set.insert(
            TaskBinding::Comm("x".into()),
            Template::new("x", vec![TemplateEntry::any_args(5)]),
        )
        .unwrap();
        let err = temporal_profile(&recs, &set, TemporalPolicy::Max, &Boundaries::default());
        assert_eq!(
            err.unwrap_err(),
            LearnError::NoMatchingInstances("x".into())
        );
        let mut set = TemplateSet::new();
        set.insert(
            TaskBinding::Comm("x".into()),
            Template::new("x", vec![TemplateEntry::any_args(4); 2]),
        )
        .unwrap();
        let ok =
            temporal_profile(&recs, &set, TemporalPolicy::Max, &Boundaries::default()).unwrap();
        assert_eq!(ok.get("x").unwrap().expected_runtime_ns, 1000);
        assert_eq!(ok.get("x").unwrap().expected_interarrival_ns, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn segmentation_conserves_non_boundary_records(
            shape in proptest::collection::vec(prop_oneof![Just(162u64), Just(3), Just(4), Just(54)], 0..80)
        ) {
            let recs: Vec<AuditRecord> = shape
                .iter()
                .enumerate()
                .map(|(i, &s)| rec(i as u64, 1 + (i as u64 % 2), "x", s, 1))
                .collect();
            let tr = segment_trace(&recs, &Boundaries::default());
            let total: usize = tr.iter().flat_map(|t| &t.instances).map(|i| i.records.len()).sum();
            prop_assert_eq!(total, shape.iter().filter(|&&s| s != 162).count());
            for t in &tr {
                prop_assert!(t.instances.iter().filter(|i| i.partial).count() <= 1);
                prop_assert!(t.instances.iter().filter(|i| i.leading).count() <= 1);
                for i in &t.instances {
                    prop_assert!(!i.records.is_empty());
                    prop_assert!(i.records.iter().all(|r| r.tid() == Some(t.task.tid)));
                }
            }
            let stats: Vec<TaskStats> = tr.iter().map(task_stats).collect();
            for s in stats {
                if s.instances > 0 {
                    let p: f64 = s.sequences.iter().map(|q| q.probability).sum();
                    prop_assert!((p - 1.0).abs() < 1e-9);
                    let c: u64 = s.sequences.iter().map(|q| q.count).sum();
                    prop_assert_eq!(c, s.instances);
                }
            }
        }

        #[test]
        fn policy_order(samples in proptest::collection::vec(0u64..1_000_000, 1..50)) {
            let max = TemporalPolicy::Max.apply(&samples);
            prop_assert_eq!(max, *samples.iter().max().unwrap());
            let lo = TemporalPolicy::MeanPlusSigma(0.0).apply(&samples);
            let hi = TemporalPolicy::MeanPlusSigma(4.0).apply(&samples);
            prop_assert!(lo <= hi);
            prop_assert!(lo <= max);
        }
    }
}
