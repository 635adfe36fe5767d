//! Seeded synthetic audit streams for periodic task sets.
//!
//! Every task runs an init phase followed by `iterations` loop instances.
//! Each instance draws one of the task's sequences, spreads its records
//! evenly over the sequence duration and optionally ends with a boundary
//! syscall (the call a real task would sleep in). Tasks are generated
//! independently and merged by timestamp.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit_record::{
    quoted, record_size_bytes, AuditRecord, EventTime, Id, Slot, Timestamp, SYSCALL_TYPE,
};
use crate::template::{TemplateEntry, WILDCARD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("invalid workload spec: {0}")]
    Invalid(String),
    #[error("unknown bundled spec `{0}`")]
    UnknownBundled(String),
    #[error("cannot parse workload spec: {0}")]
    Json(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError::Invalid(msg.into()))
}

/// One candidate loop body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    /// Entries with the argument values to log; `-1` draws a fresh random
    /// value per record (buffer addresses and the like).
    pub entries: Vec<TemplateEntry>,
    pub probability: f64,
    /// Time from the first to the last record of an instance.
    pub duration_ns: u64,
    /// Extra uniform duration in `[0, duration_jitter_ns]`.
    #[serde(default)]
    pub duration_jitter_ns: u64,
}

/// Occasional slow instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationOutliers {
    pub probability: f64,
    pub extra_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub comm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exe: Option<String>,
    pub pid: u64,
    /// Defaults to `pid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tid: Option<u64>,
    #[serde(default = "default_ppid")]
    pub ppid: u64,
    /// Number of init-phase records `f`.
    #[serde(default)]
    pub init_records: u64,
    #[serde(default)]
    pub init_duration_ns: u64,
    pub period_ns: u64,
    /// Release jitter of each instance, uniform in `[0, jitter_ns]`.
    #[serde(default)]
    pub jitter_ns: u64,
    pub iterations: u64,
    #[serde(default)]
    pub start_offset_ns: u64,
    /// Syscall logged after the init phase and after every instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_syscall: Option<u64>,
    pub sequences: Vec<SequenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_outliers: Option<DurationOutliers>,
}

fn default_ppid() -> u64 {
    1
}

fn default_arch() -> String {
    "40000028".into()
}

fn default_epoch() -> u64 {
    1_601_405_431_000_000_000
}

fn default_serial() -> u64 {
    5_893_330
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Absolute time of synthetic t = 0.
    #[serde(default = "default_epoch")]
    pub epoch_ns: u64,
    #[serde(default = "default_arch")]
    pub arch: String,
    #[serde(default = "default_serial")]
    pub first_serial: u64,
    /// Pad executable paths so raw records average about this many bytes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_record_bytes: Option<u64>,
    pub tasks: Vec<TaskSpec>,
}

impl TaskSpec {
    pub fn tid(&self) -> u64 {
        self.tid.unwrap_or(self.pid)
    }

    fn exe_path(&self) -> String {
        self.exe
            .clone()
            .unwrap_or_else(|| format!("/usr/bin/{}", self.comm))
    }

    /// Mean records per instance under the spec's mixture.
    pub fn mean_instance_len(&self) -> f64 {
        self.sequences
            .iter()
            .map(|s| s.probability * s.entries.len() as f64)
            .sum()
    }

    fn validate(&self) -> Result<(), SpecError> {
        let who = &self.comm;
        if self.period_ns == 0 {
            return invalid(format!("{who}: period_ns must be positive"));
        }
        if self.iterations > 0 && self.sequences.is_empty() {
            return invalid(format!("{who}: no sequences"));
        }
        let mut total = 0.0;
        for (i, s) in self.sequences.iter().enumerate() {
            if s.entries.is_empty() {
                return invalid(format!("{who}: sequence {i} is empty"));
            }
            if !(0.0..=1.0).contains(&s.probability) {
                return invalid(format!("{who}: sequence {i} probability {}", s.probability));
            }
            total += s.probability;
            let extra = self.duration_outliers.as_ref().map_or(0, |o| o.extra_ns);
            let worst = s.duration_ns + s.duration_jitter_ns + extra + self.jitter_ns;
            // One extra nanosecond for the boundary record.
            if worst + 1 >= self.period_ns {
                return invalid(format!(
                    "{who}: sequence {i} may run {worst} ns, beyond the {} ns period",
                    self.period_ns
                ));
            }
        }
        if !self.sequences.is_empty() && (total - 1.0).abs() > 1e-9 {
            return invalid(format!("{who}: probabilities sum to {total}"));
        }
        if let Some(o) = &self.duration_outliers {
            if !(0.0..=1.0).contains(&o.probability) {
                return invalid(format!("{who}: outlier probability {}", o.probability));
            }
        }
        Ok(())
    }
}

impl WorkloadSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: WorkloadSpec =
            serde_json::from_str(text).map_err(|e| SpecError::Json(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn arch_value(&self) -> Result<u64, SpecError> {
        u64::from_str_radix(&self.arch, 16)
            .or_else(|_| invalid(format!("arch `{}` is not hex", self.arch)))
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        self.arch_value()?;
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tasks {
            t.validate()?;
            if !seen.insert((t.pid, t.tid())) {
                return invalid(format!("thread {}/{} listed twice", t.pid, t.tid()));
            }
        }
        Ok(())
    }

    /// Same spec with every task's iteration count replaced.
    pub fn with_iterations(mut self, iterations: u64) -> Self {
        for t in &mut self.tasks {
            t.iterations = iterations;
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of records a run will produce; known in advance only when
    /// each task's sequences share one length.
    pub fn record_count(&self) -> Option<u64> {
        let mut n = 0;
        for t in &self.tasks {
            let lens: Vec<usize> = t.sequences.iter().map(|s| s.entries.len()).collect();
            if lens.windows(2).any(|w| w[0] != w[1]) {
                return None;
            }
            let b = u64::from(t.boundary_syscall.is_some());
            let per = lens.first().copied().unwrap_or(0) as u64 + b;
            n += t.init_records + t.iterations * per + b * u64::from(t.iterations > 0);
        }
        Some(n)
    }
}

/// Where a generated record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Init,
    /// Record `position` of loop instance `instance`, which drew sequence
    /// `sequence`.
    Instance {
        instance: u64,
        sequence: usize,
        position: usize,
    },
    Boundary,
}

#[derive(Debug, Clone)]
pub struct Annotated {
    pub task: usize,
    pub origin: Origin,
    pub record: AuditRecord,
}

/// Per-task record factory.
#[derive(Debug, Clone)]
struct Identity {
    arch: u64,
    ppid: u64,
    pid: u64,
    tid: u64,
    comm: Arc<str>,
    exe: Arc<str>,
    key: Arc<str>,
    tty: Arc<str>,
}

impl Identity {
    fn record(&self, ts: u64, syscall: u64, args: [u64; 4], exit: i64) -> AuditRecord {
        let mut r = AuditRecord::new(
            SYSCALL_TYPE,
            EventTime::Exact(Timestamp::from_nanos(ts)),
            None,
        );
        r.arch = Slot::Known(self.arch);
        r.syscall = Slot::Known(syscall);
        r.per = Slot::Known(0x80_0000);
        r.success = Slot::Known(true);
        r.exit = Slot::Known(exit);
        r.args = args.map(Slot::Known);
        r.items = Slot::Known(0);
        let ids = [
            (Id::Ppid, self.ppid),
            (Id::Pid, self.pid),
            (Id::Tid, self.tid),
            (Id::Auid, 1000),
            (Id::Uid, 0),
            (Id::Gid, 0),
            (Id::Euid, 0),
            (Id::Suid, 0),
            (Id::Fsuid, 0),
            (Id::Egid, 0),
            (Id::Sgid, 0),
            (Id::Fsgid, 0),
        ];
        for (id, v) in ids {
            r.ids[id] = Slot::Known(v);
        }
        r.tty = Slot::Known(Arc::clone(&self.tty));
        r.ses = Slot::Known(1);
        r.comm = Slot::Known(Arc::clone(&self.comm));
        r.exe = Slot::Known(Arc::clone(&self.exe));
        r.key = Slot::Known(Arc::clone(&self.key));
        r
    }
}

/// Syscalls cycled through during an init phase (ARM numbering:
/// open, read, write, close, mmap2, ioctl).
const INIT_SYSCALLS: [u64; 6] = [5, 3, 4, 6, 192, 54];
/// Init-phase descriptors start here so they never look like loop fds.
const INIT_FD_BASE: u64 = 100;

/// Lazily generated record stream of one task.
#[derive(Debug, Clone)]
struct TaskStream {
    spec: TaskSpec,
    id: Identity,
    rng: ChaCha8Rng,
    t0: u64,
    init_step: u64,
    next_init: u64,
    boundary_after_init: bool,
    instance: u64,
    /// Records of the instance being emitted, in reverse.
    queue: Vec<(u64, AuditRecord, Origin)>,
}

impl TaskStream {
    fn new(spec: TaskSpec, id: Identity, seed: u64, task_index: usize, epoch: u64) -> Self {
        let mut seed_bytes = [0u8; 32];
        seed_bytes[..8].copy_from_slice(&seed.to_le_bytes());
        seed_bytes[8..16].copy_from_slice(&(task_index as u64).to_le_bytes());
        let init_step = if spec.init_records == 0 {
            0
        } else {
            (spec.init_duration_ns / spec.init_records).max(1)
        };
        TaskStream {
            t0: epoch + spec.start_offset_ns,
            boundary_after_init: spec.boundary_syscall.is_some() && spec.iterations > 0,
            spec,
            id,
            rng: ChaCha8Rng::from_seed(seed_bytes),
            init_step,
            next_init: 0,
            instance: 0,
            queue: Vec::new(),
        }
    }

    fn loop_start(&self) -> u64 {
        let init_end = self.t0 + self.init_step * self.spec.init_records;
        init_end.max(self.t0 + self.spec.init_duration_ns) + self.spec.period_ns
    }

    fn boundary(&self, ts: u64) -> AuditRecord {
        let sys = self.spec.boundary_syscall.expect("boundary configured");
        self.id.record(ts, sys, [0, 0, 0, 0], 0)
    }

    fn fill_instance(&mut self) {
        let k = self.instance;
        self.instance += 1;
        let spec = &self.spec;
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut seq = spec.sequences.len() - 1;
        for (i, s) in spec.sequences.iter().enumerate() {
            acc += s.probability;
            if u < acc {
                seq = i;
                break;
            }
        }
        let s = &spec.sequences[seq];
        let jitter = self.rng.gen_range(0..=spec.jitter_ns);
        let mut duration = s.duration_ns + self.rng.gen_range(0..=s.duration_jitter_ns);
        if let Some(o) = &spec.duration_outliers {
            if self.rng.gen_bool(o.probability) {
                duration += o.extra_ns;
            }
        }
        let start = self.loop_start() + k * spec.period_ns + jitter;
        let len = s.entries.len() as u64;
        let mut recs = Vec::with_capacity(s.entries.len() + 1);
        for (pos, e) in s.entries.iter().enumerate() {
            let ts = if len == 1 {
                start
            } else {
                start + duration * pos as u64 / (len - 1)
            };
            let args = e.args.map(|a| {
                if a == WILDCARD {
                    u64::from(self.rng.gen::<u32>() & 0x00ff_fff8)
                } else {
                    a as u64
                }
            });
            let exit = self.rng.gen_range(0..=16);
            let origin = Origin::Instance {
                instance: k,
                sequence: seq,
                position: pos,
            };
            recs.push((ts, self.id.record(ts, e.syscall, args, exit), origin));
        }
        if spec.boundary_syscall.is_some() {
            let ts = start + duration + 1;
            recs.push((ts, self.boundary(ts), Origin::Boundary));
        }
        recs.reverse();
        self.queue = recs;
    }
}

impl Iterator for TaskStream {
    type Item = (u64, AuditRecord, Origin);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_init < self.spec.init_records {
            let i = self.next_init;
            self.next_init += 1;
            let ts = self.t0 + i * self.init_step;
            let sys = INIT_SYSCALLS[(i % INIT_SYSCALLS.len() as u64) as usize];
            let fd = INIT_FD_BASE + i % 50;
            let a1 = u64::from(self.rng.gen::<u32>() & 0x00ff_fff8);
            let r = self.id.record(ts, sys, [fd, a1, i % 7, 0], 0);
            return Some((ts, r, Origin::Init));
        }
        if self.boundary_after_init {
            self.boundary_after_init = false;
            let ts = self.loop_start() - self.spec.period_ns / 2;
            return Some((ts, self.boundary(ts), Origin::Boundary));
        }
        if self.queue.is_empty() && self.instance < self.spec.iterations {
            self.fill_instance();
        }
        self.queue.pop()
    }
}

/// Timestamp-merged stream over all tasks with global serials.
#[derive(Debug, Clone)]
pub struct Generator {
    streams: Vec<TaskStream>,
    heads: BinaryHeap<Reverse<(u64, usize)>>,
    buffered: Vec<Option<(AuditRecord, Origin)>>,
    serial: u64,
}

impl Generator {
    pub fn new(spec: &WorkloadSpec) -> Result<Self, SpecError> {
        spec.validate()?;
        let pads = exe_padding(spec)?;
        let arch = spec.arch_value()?;
        let mut streams = Vec::new();
        for (i, t) in spec.tasks.iter().enumerate() {
            let exe = pad_path(&t.exe_path(), pads[i]);
            let id = Identity {
                arch,
                ppid: t.ppid,
                pid: t.pid,
                tid: t.tid(),
                comm: quoted(&t.comm),
                exe: quoted(&exe),
                key: Arc::from("(null)"),
                tty: Arc::from("pts0"),
            };
            streams.push(TaskStream::new(t.clone(), id, spec.seed, i, spec.epoch_ns));
        }
        let mut g = Generator {
            heads: BinaryHeap::new(),
            buffered: vec![None; streams.len()],
            streams,
            serial: spec.first_serial,
        };
        for i in 0..g.streams.len() {
            g.refill(i);
        }
        Ok(g)
    }

    fn refill(&mut self, i: usize) {
        if let Some((ts, r, o)) = self.streams[i].next() {
            self.buffered[i] = Some((r, o));
            self.heads.push(Reverse((ts, i)));
        }
    }

    /// Next record with the task index and origin it came from.
    pub fn next_annotated(&mut self) -> Option<Annotated> {
        let Reverse((_, i)) = self.heads.pop()?;
        let (mut record, origin) = self.buffered[i].take().expect("buffered head");
        self.refill(i);
        record.serial = Some(self.serial);
        self.serial += 1;
        Some(Annotated {
            task: i,
            origin,
            record,
        })
    }
}

impl Iterator for Generator {
    type Item = AuditRecord;

    fn next(&mut self) -> Option<AuditRecord> {
        self.next_annotated().map(|a| a.record)
    }
}

fn pad_path(path: &str, pad: usize) -> String {
    if pad == 0 {
        return path.to_string();
    }
    // Grow the directory part, keeping the file name intact.
    match path.rfind('/') {
        Some(slash) => format!("{}/{}{}", &path[..slash], "x".repeat(pad), &path[slash..]),
        None => format!("{}/{path}", "x".repeat(pad)),
    }
}

/// Per-task padding that brings the mean raw record size to the target.
fn exe_padding(spec: &WorkloadSpec) -> Result<Vec<usize>, SpecError> {
    let Some(target) = spec.target_record_bytes else {
        return Ok(vec![0; spec.tasks.len()]);
    };
    let mut sample = spec.clone();
    sample.target_record_bytes = None;
    for t in &mut sample.tasks {
        t.iterations = t.iterations.min(200);
    }
    let mut g = Generator::new(&sample)?;
    let mut sums = vec![(0u64, 0u64); spec.tasks.len()];
    while let Some(a) = g.next_annotated() {
        sums[a.task].0 += record_size_bytes(&a.record) as u64;
        sums[a.task].1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(bytes, n)| {
            if n == 0 {
                0
            } else {
                let mean = (bytes as f64 / n as f64).round() as u64;
                // `/x..x` adds one separator plus the filler.
                target.saturating_sub(mean).saturating_sub(1) as usize
            }
        })
        .collect())
}

/// Stream the records of a workload.
pub fn generate_iter(spec: &WorkloadSpec) -> Result<Generator, SpecError> {
    Generator::new(spec)
}

/// All records of a workload in timestamp order.
pub fn generate(spec: &WorkloadSpec) -> Result<Vec<AuditRecord>, SpecError> {
    Ok(Generator::new(spec)?.collect())
}

/// All records with their provenance.
pub fn generate_annotated(spec: &WorkloadSpec) -> Result<Vec<Annotated>, SpecError> {
    let mut g = Generator::new(spec)?;
    Ok(std::iter::from_fn(move || g.next_annotated()).collect())
}

/// Records to splice into an existing stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    /// `(time_ns, entry)` pairs; the entry's args are logged verbatim
    /// (wildcards become 0).
    pub events: Vec<(u64, TemplateEntry)>,
    /// Thread the records are attributed to.
    pub pid: u64,
    pub tid: u64,
    pub comm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exe: Option<String>,
}

impl AnomalySpec {
    /// openat / write / close of one file at `t_ns`, attributed to a task.
    /// Syscall numbers are the 32-bit ARM ones.
    pub fn exfiltration(t_ns: u64, pid: u64, tid: u64, comm: &str) -> Self {
        AnomalySpec {
            events: vec![
                (
                    t_ns,
                    TemplateEntry::new(322, [0xffff_ff9c, 0x1000, 0x241, 0o644]),
                ),
                (t_ns + 2_000, TemplateEntry::new(4, [42, 0x2000, 4096, 0])),
                (t_ns + 4_000, TemplateEntry::new(6, [42, 0, 0, 0])),
            ],
            pid,
            tid,
            comm: comm.to_string(),
            exe: None,
        }
    }

    pub fn records(&self, arch: u64) -> Vec<AuditRecord> {
        let id = Identity {
            arch,
            ppid: 1,
            pid: self.pid,
            tid: self.tid,
            comm: quoted(&self.comm),
            exe: quoted(
                &self
                    .exe
                    .clone()
                    .unwrap_or_else(|| format!("/usr/bin/{}", self.comm)),
            ),
            key: Arc::from("(null)"),
            tty: Arc::from("pts0"),
        };
        self.events
            .iter()
            .map(|(t, e)| {
                let args = e.args.map(|a| if a == WILDCARD { 0 } else { a as u64 });
                id.record(*t, e.syscall, args, 3)
            })
            .collect()
    }
}

/// Merge anomaly records into a time-ordered stream. Existing records are
/// left untouched; injected ones go after any record with the same time and
/// get serials above every serial in the stream.
pub fn inject(stream: Vec<AuditRecord>, anomaly: &AnomalySpec) -> Vec<AuditRecord> {
    let arch = stream
        .iter()
        .find_map(|r| r.arch.get())
        .unwrap_or(0x4000_0028);
    let mut extra = anomaly.records(arch);
    let mut serial = stream
        .iter()
        .filter_map(|r| r.serial)
        .max()
        .map_or(0, |s| s + 1);
    for r in &mut extra {
        r.serial = Some(serial);
        serial += 1;
    }
    extra.sort_by_key(AuditRecord::time_ns);
    let mut out = Vec::with_capacity(stream.len() + extra.len());
    let mut extra = extra.into_iter().peekable();
    for r in stream {
        while extra.peek().is_some_and(|e| e.time_ns() < r.time_ns()) {
            out.push(extra.next().expect("peeked"));
        }
        out.push(r);
    }
    out.extend(extra);
    out
}

pub const BUNDLED: [(&str, &str); 11] = [
    ("arducopter", include_str!("../workloads/arducopter.json")),
    ("ap-rcin", include_str!("../workloads/ap-rcin.json")),
    ("ap-spi-0", include_str!("../workloads/ap-spi-0.json")),
    ("motion-1", include_str!("../workloads/motion-1.json")),
    ("motion-2", include_str!("../workloads/motion-2.json")),
    ("motion-3", include_str!("../workloads/motion-3.json")),
    ("motion-4", include_str!("../workloads/motion-4.json")),
    ("motion-5", include_str!("../workloads/motion-5.json")),
    ("motion-6", include_str!("../workloads/motion-6.json")),
    ("motion-7", include_str!("../workloads/motion-7.json")),
    ("motion-8", include_str!("../workloads/motion-8.json")),
];

pub fn bundled_spec(name: &str) -> Result<WorkloadSpec, SpecError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SpecError::UnknownBundled(name.to_string()))?;
    WorkloadSpec::from_json(text)
}

/// Random but valid spec, for fuzzing the pipeline.
pub fn random_spec(seed: u64) -> WorkloadSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tasks = rng.gen_range(1..=3);
    let mut tasks = Vec::new();
    for ti in 0..n_tasks {
        let n_seq = rng.gen_range(1..=4);
        let mut weights: Vec<f64> = (0..n_seq).map(|_| rng.gen_range(1.0..10.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let fix: f64 = weights[..n_seq - 1].iter().sum();
        weights[n_seq - 1] = 1.0 - fix;
        let period = rng.gen_range(1_000_000..10_000_000u64);
        let mut sequences = Vec::new();
        for (si, p) in weights.into_iter().enumerate() {
            let len = rng.gen_range(1..=12);
            let entries = (0..len)
                .map(|k| {
                    let sys = [3u64, 4, 54, 180][rng.gen_range(0..4)];
                    let a0 = if rng.gen_bool(0.8) {
                        (3 + k + si) as i64
                    } else {
                        WILDCARD
                    };
                    TemplateEntry::new(sys, [a0, WILDCARD, rng.gen_range(0..3), WILDCARD])
                })
                .collect();
            sequences.push(SequenceSpec {
                entries,
                probability: p,
                duration_ns: rng.gen_range(0..period / 4),
                duration_jitter_ns: rng.gen_range(0..period / 8),
            });
        }
        tasks.push(TaskSpec {
            comm: format!("task-{ti}"),
            exe: None,
            pid: 1000 + ti as u64,
            tid: Some(1000 + ti as u64),
            ppid: 1,
            init_records: rng.gen_range(0..40),
            init_duration_ns: rng.gen_range(0..5_000_000),
            period_ns: period,
            jitter_ns: rng.gen_range(0..period / 8),
            iterations: rng.gen_range(0..150),
            start_offset_ns: rng.gen_range(0..period),
            boundary_syscall: None,
            sequences,
            duration_outliers: if rng.gen_bool(0.3) {
                Some(DurationOutliers {
                    probability: 0.05,
                    extra_ns: period / 4,
                })
            } else {
                None
            },
        });
    }
    WorkloadSpec {
        name: Some(format!("random-{seed}")),
        seed,
        epoch_ns: default_epoch(),
        arch: default_arch(),
        first_serial: 1,
        target_record_bytes: None,
        tasks,
    }
}
