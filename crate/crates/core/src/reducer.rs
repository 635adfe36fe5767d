//! Runtime template matching.
//!
//! Each task gets a prefix tree over its templates. Records are fed one at a
//! time; a record that extends the current prefix is held back, a completed
//! template is replaced by a single template-match record, and anything else
//! flushes what was held back unchanged.

use std::borrow::Cow;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit_record::{
    record_size_bytes, AuditRecord, EventTime, RecordKind, TaskId, TemplateMatch,
};
use crate::template::{entry_matches, TaskBinding, Template, TemplateEntry, TemplateSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("no templates given")]
    Empty,
    #[error("template `{0}` has no entries")]
    EmptyTemplate(String),
    #[error("duplicate template name `{0}`")]
    DuplicateName(String),
    #[error("template `{shorter}` is a prefix of `{longer}`")]
    PrefixConflict { shorter: String, longer: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReduceError {
    #[error("record {index}: task {task} went back in time ({ts_ns} < {prev_ns})")]
    OutOfOrderTimestamp {
        index: u64,
        task: TaskId,
        prev_ns: u64,
        ts_ns: u64,
    },
    #[error("templates for {binding}: {source}")]
    Automaton {
        binding: String,
        #[source]
        source: AutomatonError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One template record per matched instance.
    #[default]
    Ellipsis,
    /// Consecutive matches of one template fold into a single record.
    #[serde(rename = "hp")]
    EllipsisHp,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ellipsis" => Ok(Mode::Ellipsis),
            "hp" | "ellipsis-hp" => Ok(Mode::EllipsisHp),
            other => Err(format!("unknown mode `{other}` (expected ellipsis or hp)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ellipsis => "ellipsis",
            Mode::EllipsisHp => "hp",
        })
    }
}

/// Switches for the temporal checks stored in templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalOverride {
    pub runtime: bool,
    pub interarrival: bool,
}

impl Default for TemporalOverride {
    fn default() -> Self {
        TemporalOverride {
            runtime: true,
            interarrival: true,
        }
    }
}

impl TemporalOverride {
    pub const DISABLED: TemporalOverride = TemporalOverride {
        runtime: false,
        interarrival: false,
    };
}

#[derive(Debug, Clone)]
struct Node {
    depth: usize,
    /// Outgoing edges, most constrained entry first, then insertion order.
    children: Vec<(TemplateEntry, usize)>,
    /// Templates whose prefix passes through this node.
    reachable: Vec<usize>,
    accept: Option<usize>,
}

/// Prefix tree over the templates of one task.
#[derive(Debug, Clone)]
pub struct Automaton {
    nodes: Vec<Node>,
    templates: Vec<Template>,
}

pub const ROOT: usize = 0;

impl Automaton {
    pub fn build(templates: &[Template]) -> Result<Self, AutomatonError> {
        if templates.is_empty() {
            return Err(AutomatonError::Empty);
        }
        let mut nodes = vec![Node {
            depth: 0,
            children: Vec::new(),
            reachable: Vec::new(),
            accept: None,
        }];
        let mut names = BTreeSet::new();
        for (ti, t) in templates.iter().enumerate() {
            if t.entries.is_empty() {
                return Err(AutomatonError::EmptyTemplate(t.name.clone()));
            }
            if !names.insert(t.name.as_str()) {
                return Err(AutomatonError::DuplicateName(t.name.clone()));
            }
            let mut cur = ROOT;
            nodes[ROOT].reachable.push(ti);
            for e in &t.entries {
                if let Some(done) = nodes[cur].accept {
                    return Err(AutomatonError::PrefixConflict {
                        shorter: templates[done].name.clone(),
                        longer: t.name.clone(),
                    });
                }
                let next = match nodes[cur].children.iter().find(|(ce, _)| ce == e) {
                    Some(&(_, n)) => n,
                    None => {
                        let n = nodes.len();
                        nodes.push(Node {
                            depth: nodes[cur].depth + 1,
                            children: Vec::new(),
                            reachable: Vec::new(),
                            accept: None,
                        });
                        let children = &mut nodes[cur].children;
                        let pos = children
                            .iter()
                            .position(|(ce, _)| ce.constrained() < e.constrained())
                            .unwrap_or(children.len());
                        children.insert(pos, (*e, n));
                        n
                    }
                };
                nodes[next].reachable.push(ti);
                cur = next;
            }
            if let Some(other) = nodes[cur].accept {
                // Identical entry lists: each is a prefix of the other.
                return Err(AutomatonError::PrefixConflict {
                    shorter: templates[other].name.clone(),
                    longer: t.name.clone(),
                });
            }
            if !nodes[cur].children.is_empty() {
                let longer = nodes[cur]
                    .reachable
                    .iter()
                    .find(|&&x| x != ti)
                    .map(|&x| templates[x].name.clone())
                    .unwrap_or_default();
                return Err(AutomatonError::PrefixConflict {
                    shorter: t.name.clone(),
                    longer,
                });
            }
            nodes[cur].accept = Some(ti);
        }
        Ok(Automaton {
            nodes,
            templates: templates.to_vec(),
        })
    }

    pub fn state_count(&self) -> usize {
        self.nodes.len()
    }

    /// `(matched_count, reachable template names)` of a state.
    pub fn state(&self, id: usize) -> (usize, Vec<&str>) {
        let n = &self.nodes[id];
        (
            n.depth,
            n.reachable
                .iter()
                .map(|&t| self.templates[t].name.as_str())
                .collect(),
        )
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = (&TemplateEntry, usize)> {
        self.nodes[id].children.iter().map(|(e, n)| (e, *n))
    }

    pub fn accepting(&self, id: usize) -> Option<&Template> {
        self.nodes[id].accept.map(|t| &self.templates[t])
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    /// First child of `state` whose entry matches `r`, counting predicate
    /// evaluations into `comparisons`.
    fn advance(&self, state: usize, r: &AuditRecord, comparisons: &mut u64) -> Option<usize> {
        for (e, next) in &self.nodes[state].children {
            *comparisons += 1;
            if entry_matches(e, r) {
                return Some(*next);
            }
        }
        None
    }
}

/// A record entering the reducer, with its position in the input and
/// (optionally) the exact text it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub index: u64,
    pub record: AuditRecord,
    pub text: Option<Arc<str>>,
}

impl Event {
    pub fn new(index: u64, record: AuditRecord) -> Self {
        Event {
            index,
            record,
            text: None,
        }
    }

    /// Text to write out: the original line when known.
    pub fn line(&self) -> Cow<'_, str> {
        match &self.text {
            Some(t) => Cow::Borrowed(t),
            None => Cow::Owned(self.record.to_string()),
        }
    }

    fn size_bytes(&self) -> u64 {
        match &self.text {
            Some(t) => t.len() as u64 + 1,
            None => record_size_bytes(&self.record) as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Raw(Event),
    Template {
        record: AuditRecord,
        /// Input index of the first covered record.
        first_index: u64,
        /// Number of input records the template record stands for.
        covered: u64,
    },
}

impl Emission {
    pub fn key(&self) -> u64 {
        match self {
            Emission::Raw(e) => e.index,
            Emission::Template { first_index, .. } => *first_index,
        }
    }

    pub fn record(&self) -> &AuditRecord {
        match self {
            Emission::Raw(e) => &e.record,
            Emission::Template { record, .. } => record,
        }
    }

    pub fn is_template(&self) -> bool {
        matches!(self, Emission::Template { .. })
    }

    pub fn line(&self) -> Cow<'_, str> {
        match self {
            Emission::Raw(e) => e.line(),
            Emission::Template { record, .. } => Cow::Owned(record.to_string()),
        }
    }

    pub fn size_bytes(&self) -> u64 {
        match self {
            Emission::Raw(e) => e.size_bytes(),
            Emission::Template { record, .. } => record_size_bytes(record) as u64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCounters {
    pub events_in: u64,
    pub events_out: u64,
    pub raw_out: u64,
    pub template_records: u64,
    /// Template instances accepted.
    pub matches: u64,
    /// Partial matches flushed, either on a mismatch or a failed temporal
    /// check.
    pub failures: u64,
    pub temporal_failures: u64,
    /// Input records represented by template records.
    pub covered: u64,
    pub comparisons: u64,
    pub max_comparisons_per_step: u64,
}

#[derive(Debug, Clone)]
struct HpState {
    template: usize,
    rep: u64,
    stime: u64,
    etime: u64,
    last_start: u64,
    first_index: u64,
    covered: u64,
    proto: AuditRecord,
}

/// Matching state of one task.
#[derive(Debug, Clone)]
pub struct TaskReducer {
    automaton: Arc<Automaton>,
    mode: Mode,
    temporal: TemporalOverride,
    state: usize,
    pending: Vec<Event>,
    hp: Option<HpState>,
    last_ts: Option<u64>,
    pub counters: TaskCounters,
}

impl TaskReducer {
    pub fn new(automaton: Arc<Automaton>, mode: Mode, temporal: TemporalOverride) -> Self {
        TaskReducer {
            automaton,
            mode,
            temporal,
            state: ROOT,
            pending: Vec::new(),
            hp: None,
            last_ts: None,
            counters: TaskCounters::default(),
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn hp_rep(&self) -> Option<u64> {
        self.hp.as_ref().map(|h| h.rep)
    }

    /// Smallest input index this task still holds back.
    pub fn earliest_open(&self) -> Option<u64> {
        let hp = self.hp.as_ref().map(|h| h.first_index);
        let pending = self.pending.first().map(|e| e.index);
        match (hp, pending) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Feed one record of this task. `now_ns` stamps any template record
    /// emitted by this step.
    pub fn step(&mut self, ev: Event, now_ns: u64) -> Result<Vec<Emission>, ReduceError> {
        let ts = ev.record.time_ns();
        if let Some(prev) = self.last_ts {
            if ts < prev {
                return Err(ReduceError::OutOfOrderTimestamp {
                    index: ev.index,
                    task: ev.record.task_id().unwrap_or(TaskId { pid: 0, tid: 0 }),
                    prev_ns: prev,
                    ts_ns: ts,
                });
            }
        }
        self.last_ts = Some(ts);
        self.counters.events_in += 1;

        let mut out = Vec::new();
        let mut cmp = 0;
        match self.automaton.advance(self.state, &ev.record, &mut cmp) {
            Some(next) => self.accept_record(ev, next, now_ns, &mut out),
            None => {
                let was_root = self.state == ROOT;
                self.flush_hp(now_ns, &mut out);
                if !self.pending.is_empty() {
                    self.counters.failures += 1;
                }
                self.flush_pending(&mut out);
                let retry = if !was_root {
                    self.automaton.advance(ROOT, &ev.record, &mut cmp)
                } else {
                    None
                };
                match retry {
                    Some(next) => self.accept_record(ev, next, now_ns, &mut out),
                    None => out.push(Emission::Raw(ev)),
                }
            }
        }
        self.counters.comparisons += cmp;
        self.counters.max_comparisons_per_step = self.counters.max_comparisons_per_step.max(cmp);
        self.count_out(&out);
        Ok(out)
    }

    /// End of stream: emit any aggregate and release held-back records.
    pub fn finish(&mut self, now_ns: u64) -> Vec<Emission> {
        let mut out = Vec::new();
        self.flush_hp(now_ns, &mut out);
        self.flush_pending(&mut out);
        self.state = ROOT;
        self.count_out(&out);
        out
    }

    fn count_out(&mut self, out: &[Emission]) {
        for e in out {
            self.counters.events_out += 1;
            match e {
                Emission::Raw(_) => self.counters.raw_out += 1,
                Emission::Template { covered, .. } => {
                    self.counters.template_records += 1;
                    self.counters.covered += covered;
                }
            }
        }
    }

    fn accept_record(&mut self, ev: Event, next: usize, now_ns: u64, out: &mut Vec<Emission>) {
        self.pending.push(ev);
        self.state = next;
        if let Some(ti) = self.automaton.nodes[next].accept {
            self.complete(ti, now_ns, out);
        }
    }

    fn complete(&mut self, ti: usize, now_ns: u64, out: &mut Vec<Emission>) {
        let automaton = Arc::clone(&self.automaton);
        let t = &automaton.templates[ti];
        let stime = self.pending[0].record.time_ns();
        let etime = self.pending[self.pending.len() - 1].record.time_ns();
        self.state = ROOT;
        if self.temporal.runtime
            && t.expected_runtime_ns > 0
            && etime - stime > t.expected_runtime_ns
        {
            self.counters.failures += 1;
            self.counters.temporal_failures += 1;
            self.flush_hp(now_ns, out);
            self.flush_pending(out);
            return;
        }
        self.counters.matches += 1;
        let pending = std::mem::take(&mut self.pending);
        let covered = pending.len() as u64;
        let first_index = pending[0].index;
        match self.mode {
            Mode::Ellipsis => {
                let record = template_record(&pending[0].record, &t.name, 1, stime, etime, now_ns);
                out.push(Emission::Template {
                    record,
                    first_index,
                    covered,
                });
            }
            Mode::EllipsisHp => {
                let extend = self.hp.as_ref().is_some_and(|h| {
                    h.template == ti
                        && (!self.temporal.interarrival
                            || t.expected_interarrival_ns == 0
                            || stime - h.last_start <= t.expected_interarrival_ns)
                });
                if extend {
                    let h = self.hp.as_mut().expect("aggregate present");
                    h.rep += 1;
                    h.etime = etime;
                    h.last_start = stime;
                    h.covered += covered;
                } else {
                    self.flush_hp(now_ns, out);
                    self.hp = Some(HpState {
                        template: ti,
                        rep: 1,
                        stime,
                        etime,
                        last_start: stime,
                        first_index,
                        covered,
                        proto: pending.into_iter().next().expect("nonempty").record,
                    });
                }
            }
        }
    }

    fn flush_hp(&mut self, now_ns: u64, out: &mut Vec<Emission>) {
        if let Some(h) = self.hp.take() {
            let name = &self.automaton.templates[h.template].name;
            let record = template_record(&h.proto, name, h.rep, h.stime, h.etime, now_ns);
            out.push(Emission::Template {
                record,
                first_index: h.first_index,
                covered: h.covered,
            });
        }
    }

    fn flush_pending(&mut self, out: &mut Vec<Emission>) {
        out.extend(self.pending.drain(..).map(Emission::Raw));
        self.state = ROOT;
    }
}

/// Template-match record carrying the identity of `first`.
pub fn template_record(
    first: &AuditRecord,
    name: &str,
    rep: u64,
    stime: u64,
    etime: u64,
    now_ns: u64,
) -> AuditRecord {
    let mut r = AuditRecord::new(
        &first.record_type,
        EventTime::exact_like(now_ns, &first.time),
        None,
    );
    r.arch = first.arch.clone();
    r.per = first.per.clone();
    r.template = Some(TemplateMatch {
        name: name.to_string(),
        rep,
        stime,
        etime,
    });
    r.ids = first.ids.clone();
    r.tty = first.tty.clone();
    r.ses = first.ses.clone();
    r.comm = first.comm.clone();
    r.exe = first.exe.clone();
    r.key = first.key.clone();
    r
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: TaskId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comm: Option<String>,
    pub binding: String,
    #[serde(flatten)]
    pub counters: TaskCounters,
}

/// Totals over a whole reduction run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceCounters {
    pub events_in: u64,
    pub events_out: u64,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub matches: u64,
    pub failures: u64,
    pub temporal_failures: u64,
    pub template_records: u64,
    pub raw_records: u64,
    /// Input records represented by template records.
    pub covered_events: u64,
    pub comparisons: u64,
    pub max_comparisons_per_step: u64,
    pub tasks: Vec<TaskSummary>,
}

impl ReduceCounters {
    /// `1 - bytes_out / bytes_in`.
    pub fn byte_reduction(&self) -> f64 {
        if self.bytes_in == 0 {
            0.0
        } else {
            1.0 - self.bytes_out as f64 / self.bytes_in as f64
        }
    }

    pub fn event_reduction(&self) -> f64 {
        if self.events_in == 0 {
            0.0
        } else {
            1.0 - self.events_out as f64 / self.events_in as f64
        }
    }
}

#[derive(Debug)]
struct Pending(Emission);

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.0.key() == o.0.key()
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.key().cmp(&o.0.key())
    }
}

/// Reduces an interleaved multi-task stream.
///
/// Output is ordered by the input position of each emission's first record,
/// so records released by a failed match land where they were read.
/// Template records get serials above every serial seen so far.
#[derive(Debug)]
pub struct StreamReducer {
    automata: BTreeMap<TaskBinding, Arc<Automaton>>,
    set: TemplateSet,
    mode: Mode,
    temporal: TemporalOverride,
    tasks: HashMap<TaskId, (TaskReducer, TaskBinding)>,
    /// Earliest held-back input index per task.
    open: BTreeMap<TaskId, u64>,
    open_idx: BTreeSet<u64>,
    ready: BinaryHeap<Reverse<Pending>>,
    next_index: u64,
    next_serial: u64,
    last_ns: u64,
    counters: ReduceCounters,
}

impl StreamReducer {
    pub fn new(
        set: &TemplateSet,
        mode: Mode,
        temporal: TemporalOverride,
    ) -> Result<Self, ReduceError> {
        let mut automata = BTreeMap::new();
        for b in set.bindings() {
            let ts: Vec<Template> = set.templates_for(b).into_iter().cloned().collect();
            let a = Automaton::build(&ts).map_err(|source| ReduceError::Automaton {
                binding: b.to_string(),
                source,
            })?;
            automata.insert(b.clone(), Arc::new(a));
        }
        Ok(StreamReducer {
            automata,
            set: set.clone(),
            mode,
            temporal,
            tasks: HashMap::new(),
            open: BTreeMap::new(),
            open_idx: BTreeSet::new(),
            ready: BinaryHeap::new(),
            next_index: 0,
            next_serial: 0,
            last_ns: 0,
            counters: ReduceCounters::default(),
        })
    }

    /// Feed the next input record; returns whatever can be written out now.
    pub fn push(
        &mut self,
        record: AuditRecord,
        text: Option<Arc<str>>,
    ) -> Result<Vec<Emission>, ReduceError> {
        let index = self.next_index;
        self.next_index += 1;
        let ev = Event {
            index,
            record,
            text,
        };
        self.counters.events_in += 1;
        self.counters.bytes_in += ev.size_bytes();
        if let Some(s) = ev.record.serial {
            self.next_serial = self.next_serial.max(s + 1);
        }
        let now = ev.record.time_ns();
        self.last_ns = self.last_ns.max(now);

        let task = match (ev.record.kind(), ev.record.task_id()) {
            (RecordKind::Syscall, Some(task)) => Some(task),
            _ => None,
        };
        let Some(task) = task.filter(|t| self.ensure_task(*t, &ev.record)) else {
            self.enqueue(vec![Emission::Raw(ev)]);
            return Ok(self.release());
        };
        let (tr, _) = self.tasks.get_mut(&task).expect("task registered");
        let emitted = tr.step(ev, now)?;
        let open = tr.earliest_open();
        self.set_open(task, open);
        self.enqueue(emitted);
        Ok(self.release())
    }

    /// End of input: flush every task and return the remaining output with
    /// the run's counters.
    pub fn finish(mut self) -> (Vec<Emission>, ReduceCounters) {
        let now = self.last_ns;
        let mut ids: Vec<TaskId> = self.tasks.keys().copied().collect();
        ids.sort();
        let mut all = Vec::new();
        for id in &ids {
            let (tr, _) = self.tasks.get_mut(id).expect("task");
            all.extend(tr.finish(now));
        }
        self.open.clear();
        self.open_idx.clear();
        self.enqueue(all);
        let out = self.release();
        for id in ids {
            let (tr, binding) = self.tasks.remove(&id).expect("task");
            let c = &mut self.counters;
            c.matches += tr.counters.matches;
            c.failures += tr.counters.failures;
            c.temporal_failures += tr.counters.temporal_failures;
            c.covered_events += tr.counters.covered;
            c.comparisons += tr.counters.comparisons;
            c.max_comparisons_per_step = c
                .max_comparisons_per_step
                .max(tr.counters.max_comparisons_per_step);
            let comm = match &binding {
                TaskBinding::Comm(c) => Some(c.clone()),
                TaskBinding::Thread(_) => None,
            };
            c.tasks.push(TaskSummary {
                task: id,
                comm,
                binding: binding.to_string(),
                counters: tr.counters,
            });
        }
        (out, self.counters)
    }

    /// Counters so far; per-task totals are filled in by [`finish`](Self::finish).
    pub fn counters(&self) -> &ReduceCounters {
        &self.counters
    }

    fn ensure_task(&mut self, task: TaskId, r: &AuditRecord) -> bool {
        if self.tasks.contains_key(&task) {
            return true;
        }
        let Some(binding) = self.set.binding_for(task, r.comm_name()) else {
            return false;
        };
        let a = Arc::clone(&self.automata[binding]);
        self.tasks.insert(
            task,
            (
                TaskReducer::new(a, self.mode, self.temporal),
                binding.clone(),
            ),
        );
        true
    }

    fn set_open(&mut self, task: TaskId, open: Option<u64>) {
        if let Some(old) = self.open.remove(&task) {
            self.open_idx.remove(&old);
        }
        if let Some(i) = open {
            self.open.insert(task, i);
            self.open_idx.insert(i);
        }
    }

    fn enqueue(&mut self, emitted: Vec<Emission>) {
        for mut e in emitted {
            if let Emission::Template { record, .. } = &mut e {
                record.serial = Some(self.next_serial);
                self.next_serial += 1;
            }
            self.ready.push(Reverse(Pending(e)));
        }
    }

    fn release(&mut self) -> Vec<Emission> {
        let watermark = self.open_idx.first().copied().unwrap_or(u64::MAX);
        let mut out = Vec::new();
        while self
            .ready
            .peek()
            .is_some_and(|Reverse(p)| p.0.key() < watermark)
        {
            let Reverse(Pending(e)) = self.ready.pop().expect("peeked");
            self.counters.events_out += 1;
            self.counters.bytes_out += e.size_bytes();
            if e.is_template() {
                self.counters.template_records += 1;
            } else {
                self.counters.raw_records += 1;
            }
            out.push(e);
        }
        out
    }
}

/// Reduced stream and counters.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub emissions: Vec<Emission>,
    pub counters: ReduceCounters,
}

impl Reduced {
    pub fn records(&self) -> Vec<AuditRecord> {
        self.emissions.iter().map(|e| e.record().clone()).collect()
    }

    pub fn lines(&self) -> Vec<String> {
        self.emissions
            .iter()
            .map(|e| e.line().into_owned())
            .collect()
    }
}

/// Reduce a whole in-memory stream.
pub fn reduce_stream(
    records: impl IntoIterator<Item = AuditRecord>,
    set: &TemplateSet,
    mode: Mode,
    temporal: TemporalOverride,
) -> Result<Reduced, ReduceError> {
    let mut sr = StreamReducer::new(set, mode, temporal)?;
    let mut emissions = Vec::new();
    for r in records {
        emissions.extend(sr.push(r, None)?);
    }
    let (rest, counters) = sr.finish();
    emissions.extend(rest);
    Ok(Reduced {
        emissions,
        counters,
    })
}
