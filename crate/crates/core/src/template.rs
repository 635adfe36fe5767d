//! Templates: named syscall sequences with argument constraints and temporal
//! bounds, plus the on-disk template file format.
//!
//! A template file is plain text:
//!
//! ```text
//! arducopter
//! 3
//! 1303419
//! 5012313
//! 4:3:-1:1:-1
//! 4:4:-1:1:-1
//! 4:5:-1:1:-1
//! ```
//!
//! name, syscall count, expected runtime (ns), expected inter-arrival (ns),
//! then one `syscall:a0:a1:a2:a3` entry per line. An argument of `-1` is a
//! wildcard and a temporal value of `0` disables that check.

use std::collections::{btree_map::Entry, BTreeMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit_record::{AuditRecord, TaskId};

/// Argument value meaning "ignore this slot".
pub const WILDCARD: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {line}: template declares {declared} syscalls but lists {found}")]
    CountMismatch {
        line: usize,
        declared: usize,
        found: usize,
    },
    #[error("line {line}: {reason}")]
    MalformedEntry { line: usize, reason: String },
    #[error("duplicate template name `{0}`")]
    DuplicateName(String),
}

/// One position of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemplateEntry {
    pub syscall: u64,
    /// `-1` is a wildcard; any other value must equal the record argument.
    pub args: [i64; 4],
}

impl TemplateEntry {
    pub fn new(syscall: u64, args: [i64; 4]) -> Self {
        TemplateEntry { syscall, args }
    }

    /// Entry matching any invocation of `syscall`.
    pub fn any_args(syscall: u64) -> Self {
        TemplateEntry::new(syscall, [WILDCARD; 4])
    }

    /// Number of constrained (non-wildcard) argument slots.
    pub fn constrained(&self) -> usize {
        self.args.iter().filter(|&&a| a != WILDCARD).count()
    }

    pub fn matches(&self, r: &AuditRecord) -> bool {
        entry_matches(self, r)
    }
}

/// `true` iff the record has the entry's syscall number and every
/// constrained argument equals the corresponding record argument.
pub fn entry_matches(e: &TemplateEntry, r: &AuditRecord) -> bool {
    if r.syscall.get() != Some(e.syscall) {
        return false;
    }
    e.args.iter().enumerate().all(|(k, &want)| {
        want == WILDCARD
            || u64::try_from(want)
                .ok()
                .is_some_and(|w| r.arg(k) == Some(w))
    })
}

impl fmt::Display for TemplateEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a0, a1, a2, a3] = self.args;
        write!(f, "{}:{a0}:{a1}:{a2}:{a3}", self.syscall)
    }
}

impl FromStr for TemplateEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() != 5 {
            return Err(format!("expected `sys:a0:a1:a2:a3`, got `{s}`"));
        }
        let syscall = parts[0]
            .parse::<u64>()
            .map_err(|_| format!("bad syscall number `{}`", parts[0]))?;
        let mut args = [WILDCARD; 4];
        for (slot, p) in args.iter_mut().zip(&parts[1..]) {
            let v = p
                .parse::<i64>()
                .map_err(|_| format!("bad argument `{p}`"))?;
            if v < WILDCARD {
                return Err(format!("argument {v} is neither -1 nor nonnegative"));
            }
            *slot = v;
        }
        Ok(TemplateEntry { syscall, args })
    }
}

impl Serialize for TemplateEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TemplateEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    pub name: String,
    /// Upper bound on `etime - stime` of one instance; `0` disables it.
    pub expected_runtime_ns: u64,
    /// Upper bound on the gap between successive instance starts; `0`
    /// disables it.
    pub expected_interarrival_ns: u64,
    pub entries: Vec<TemplateEntry>,
}

impl Template {
    pub fn new(name: impl Into<String>, entries: Vec<TemplateEntry>) -> Self {
        Template {
            name: name.into(),
            expected_runtime_ns: 0,
            expected_interarrival_ns: 0,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parse a template file.
pub fn parse_template_file(text: &str) -> Result<Template, TemplateError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut header = |what: &str| {
        lines.next().ok_or_else(|| TemplateError::MalformedEntry {
            line: 0,
            reason: format!("missing {what}"),
        })
    };
    let (_, name) = header("template name")?;
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(TemplateError::MalformedEntry {
            line: 1,
            reason: "template name must be a single non-empty token".into(),
        });
    }
    let name = name.to_string();
    let number = |(line, s): (usize, &str)| {
        s.parse::<u64>().map_err(|_| TemplateError::MalformedEntry {
            line,
            reason: format!("expected a nonnegative integer, got `{s}`"),
        })
    };
    let declared = number(header("syscall count")?)? as usize;
    let runtime = number(header("expected runtime")?)?;
    let interarrival = number(header("expected inter-arrival time")?)?;

    let mut entries = Vec::with_capacity(declared);
    let mut last_line = 4;
    for (line, l) in lines {
        last_line = line;
        if l.is_empty() {
            continue;
        }
        let e = l
            .parse::<TemplateEntry>()
            .map_err(|reason| TemplateError::MalformedEntry { line, reason })?;
        entries.push(e);
    }
    if entries.len() != declared || declared == 0 {
        return Err(TemplateError::CountMismatch {
            line: last_line,
            declared,
            found: entries.len(),
        });
    }
    Ok(Template {
        name,
        expected_runtime_ns: runtime,
        expected_interarrival_ns: interarrival,
        entries,
    })
}

/// Canonical newline-terminated template file.
pub fn serialize_template(t: &Template) -> String {
    let mut out = format!(
        "{}\n{}\n{}\n{}\n",
        t.name,
        t.entries.len(),
        t.expected_runtime_ns,
        t.expected_interarrival_ns
    );
    for e in &t.entries {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

/// Which tasks a group of templates applies to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskBinding {
    /// Every thread whose `comm` equals this name.
    Comm(String),
    /// One specific thread; takes precedence over a `comm` binding.
    Thread(TaskId),
}

impl fmt::Display for TaskBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskBinding::Comm(c) => write!(f, "comm={c}"),
            TaskBinding::Thread(t) => write!(f, "thread={t}"),
        }
    }
}

/// Per-kernel sizes used for template memory accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryCosts {
    /// Bytes per template excluding its entries.
    pub per_template: u64,
    /// Bytes per template entry.
    pub per_syscall: u64,
}

impl Default for MemoryCosts {
    /// Sizes measured on a 32-bit kernel.
    fn default() -> Self {
        MemoryCosts {
            per_template: 116,
            per_syscall: 56,
        }
    }
}

impl MemoryCosts {
    pub fn cost<'a>(&self, templates: impl IntoIterator<Item = &'a Template>) -> u64 {
        templates.into_iter().fold(0, |acc, t| {
            acc + self.per_template + self.per_syscall * t.len() as u64
        })
    }
}

/// Loaded templates grouped by the tasks they bind to.
///
/// Template names are unique across the whole set, since reduced records
/// refer to templates by name only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateSet {
    tasks: BTreeMap<TaskBinding, BTreeMap<String, Template>>,
    order: BTreeMap<TaskBinding, Vec<String>>,
    owner: BTreeMap<String, TaskBinding>,
}

impl TemplateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, binding: TaskBinding, t: Template) -> Result<(), TemplateError> {
        match self.owner.entry(t.name.clone()) {
            Entry::Occupied(_) => return Err(TemplateError::DuplicateName(t.name)),
            Entry::Vacant(v) => {
                v.insert(binding.clone());
            }
        }
        self.order
            .entry(binding.clone())
            .or_default()
            .push(t.name.clone());
        self.tasks
            .entry(binding)
            .or_default()
            .insert(t.name.clone(), t);
        Ok(())
    }

    pub fn bindings(&self) -> impl Iterator<Item = &TaskBinding> {
        self.tasks.keys()
    }

    /// Templates of one binding in insertion order.
    pub fn templates_for(&self, binding: &TaskBinding) -> Vec<&Template> {
        match (self.order.get(binding), self.tasks.get(binding)) {
            (Some(names), Some(map)) => names.iter().map(|n| &map[n]).collect(),
            _ => Vec::new(),
        }
    }

    /// Selection parameter `n` of one binding.
    pub fn selected_count(&self, binding: &TaskBinding) -> usize {
        self.tasks.get(binding).map_or(0, BTreeMap::len)
    }

    /// Binding that applies to a record's task, thread bindings first.
    pub fn binding_for(&self, task: TaskId, comm: Option<&str>) -> Option<&TaskBinding> {
        let thread = TaskBinding::Thread(task);
        if let Some((b, _)) = self.tasks.get_key_value(&thread) {
            return Some(b);
        }
        let comm = TaskBinding::Comm(comm?.to_string());
        self.tasks.get_key_value(&comm).map(|(b, _)| b)
    }

    pub fn get(&self, name: &str) -> Option<&Template> {
        let binding = self.owner.get(name)?;
        self.tasks.get(binding)?.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TaskBinding, &Template)> {
        self.order
            .iter()
            .flat_map(move |(b, names)| names.iter().map(move |n| (b, &self.tasks[b][n])))
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    /// Memory cost of the templates bound to one task.
    pub fn memory_cost(&self, binding: &TaskBinding, costs: MemoryCosts) -> u64 {
        costs.cost(self.templates_for(binding))
    }

    /// Memory cost of every loaded template.
    pub fn total_memory_cost(&self, costs: MemoryCosts) -> u64 {
        costs.cost(self.iter().map(|(_, t)| t))
    }
}

/// `M_fixed * n + M_syscall * sum(len)` for the templates of one task.
pub fn memory_cost(set: &TemplateSet, task: &TaskBinding) -> u64 {
    set.memory_cost(task, MemoryCosts::default())
}

/// The three ArduPilot templates (arducopter, ap-rcin, ap-spi-0).
pub fn ardupilot_templates() -> Vec<Template> {
    let arducopter = Template {
        name: "arducopter".into(),
        expected_runtime_ns: 1_303_419,
        expected_interarrival_ns: 5_012_313,
        entries: (3..=16)
            .map(|fd| TemplateEntry::new(4, [fd, -1, 1, -1]))
            .collect(),
    };
    let rcin = Template {
        name: "ap-rcin".into(),
        expected_runtime_ns: 671_567,
        expected_interarrival_ns: 20_029_121,
        entries: (17..=32)
            .map(|fd| TemplateEntry::new(180, [fd, -1, 11, -1]))
            .collect(),
    };
    let spi = Template {
        name: "ap-spi-0".into(),
        expected_runtime_ns: 0,
        expected_interarrival_ns: 2_010_477,
        entries: vec![TemplateEntry::new(3, [55, -1, 8, -1])],
    };
    vec![arducopter, rcin, spi]
}
