//! Linux Audit `SYSCALL` records and the template-match records emitted by the
//! reducer.
//!
//! Records are parsed into typed fields and rendered back in a fixed field
//! order. A canonical line (single spaces, lowercase hex, known keys in kernel
//! order) survives `parse -> serialize` byte for byte. Keys the parser does
//! not know about, or known keys that show up out of order, are kept as
//! [`Extra`] tokens anchored to the field they followed.
//!
//! Values that could not be recovered (for example after reconstruction) are
//! rendered as `∅` and timestamps known only up to an interval as
//! `[min, max]`.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use thiserror::Error;

/// Marker for a value that is known to exist but could not be recovered.
pub const UNKNOWN: &str = "∅";

/// Record type carried by syscall and template-match lines.
pub const SYSCALL_TYPE: &str = "SYSCALL";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("malformed record at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("record invariant violated: {0}")]
    InvariantViolation(String),
}

fn malformed(offset: usize, reason: impl Into<String>) -> RecordError {
    RecordError::Malformed {
        offset,
        reason: reason.into(),
    }
}

/// A field value that may be missing from the line, present but unknown
/// (`∅`), or known.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum Slot<T> {
    #[default]
    Absent,
    Unknown,
    Known(T),
}

impl<T> Slot<T> {
    pub fn known(&self) -> Option<&T> {
        match self {
            Slot::Known(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, Slot::Absent)
    }

    pub fn is_known(&self) -> bool {
        matches!(self, Slot::Known(_))
    }
}

impl<T: Copy> Slot<T> {
    pub fn get(&self) -> Option<T> {
        self.known().copied()
    }
}

impl<T> From<T> for Slot<T> {
    fn from(v: T) -> Self {
        Slot::Known(v)
    }
}

/// Wall-clock time as printed in `msg=audit(SECS.FRAC:...)`.
///
/// `digits` is the number of fractional digits on the line; the kernel prints
/// milliseconds, the modified kernel prints nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timestamp {
    secs: u64,
    nanos: u32,
    digits: u8,
}

impl Timestamp {
    pub const NANOS_PER_SEC: u64 = 1_000_000_000;

    /// Nanosecond-precision timestamp.
    pub fn from_nanos(ns: u64) -> Self {
        Self::from_nanos_with_digits(ns, 9)
    }

    /// Timestamp rendered with `digits` fractional digits; sub-resolution
    /// nanoseconds are truncated. `digits` is clamped to `1..=9`.
    pub fn from_nanos_with_digits(ns: u64, digits: u8) -> Self {
        let digits = digits.clamp(1, 9);
        let unit = 10u64.pow(9 - u32::from(digits));
        let secs = ns / Self::NANOS_PER_SEC;
        let nanos = ((ns % Self::NANOS_PER_SEC) / unit * unit) as u32;
        Timestamp {
            secs,
            nanos,
            digits,
        }
    }

    pub fn secs(&self) -> u64 {
        self.secs
    }

    pub fn subsec_nanos(&self) -> u32 {
        self.nanos
    }

    pub fn digits(&self) -> u8 {
        self.digits
    }

    pub fn as_nanos(&self) -> u64 {
        self.secs * Self::NANOS_PER_SEC + u64::from(self.nanos)
    }

    fn parse(s: &str) -> Option<Self> {
        let (secs, frac) = s.split_once('.')?;
        if secs.is_empty() || frac.is_empty() || frac.len() > 9 {
            return None;
        }
        let secs = parse_dec(secs)?;
        let frac_val = parse_dec(frac)?;
        let digits = frac.len() as u8;
        let nanos = frac_val * 10u64.pow(9 - u32::from(digits));
        secs.checked_mul(Self::NANOS_PER_SEC)?.checked_add(nanos)?;
        Some(Timestamp {
            secs,
            nanos: nanos as u32,
            digits,
        })
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unit = 10u32.pow(9 - u32::from(self.digits));
        write!(
            f,
            "{}.{:0width$}",
            self.secs,
            self.nanos / unit,
            width = usize::from(self.digits)
        )
    }
}

/// Event time in the `msg=audit(...)` prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventTime {
    Exact(Timestamp),
    /// Known only to lie in `[min, max]`.
    Range(Timestamp, Timestamp),
}

impl EventTime {
    pub fn lower_ns(&self) -> u64 {
        match self {
            EventTime::Exact(t) | EventTime::Range(t, _) => t.as_nanos(),
        }
    }

    pub fn upper_ns(&self) -> u64 {
        match self {
            EventTime::Exact(t) | EventTime::Range(_, t) => t.as_nanos(),
        }
    }

    pub fn exact_ns(&self) -> Option<u64> {
        match self {
            EventTime::Exact(t) => Some(t.as_nanos()),
            EventTime::Range(..) => None,
        }
    }

    pub fn contains(&self, ns: u64) -> bool {
        self.lower_ns() <= ns && ns <= self.upper_ns()
    }

    fn digits(&self) -> u8 {
        match self {
            EventTime::Exact(t) | EventTime::Range(t, _) => t.digits(),
        }
    }
}

impl fmt::Display for EventTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventTime::Exact(t) => write!(f, "{t}"),
            EventTime::Range(lo, hi) => write!(f, "[{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Syscall,
    TemplateMatch,
    /// Any non-`SYSCALL` record; passed through untouched.
    Other,
}

/// Fields specific to a template-match record.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TemplateMatch {
    pub name: String,
    /// Consecutive repetitions covered by this record.
    pub rep: u64,
    /// Timestamp of the first covered syscall, in nanoseconds.
    pub stime: u64,
    /// Timestamp of the last covered syscall, in nanoseconds.
    pub etime: u64,
}

/// Identity fields, in the order the kernel prints them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Id {
    Ppid,
    Pid,
    Tid,
    Auid,
    Uid,
    Gid,
    Euid,
    Suid,
    Fsuid,
    Egid,
    Sgid,
    Fsgid,
}

impl Id {
    pub const ALL: [Id; 12] = [
        Id::Ppid,
        Id::Pid,
        Id::Tid,
        Id::Auid,
        Id::Uid,
        Id::Gid,
        Id::Euid,
        Id::Suid,
        Id::Fsuid,
        Id::Egid,
        Id::Sgid,
        Id::Fsgid,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Id::Ppid => "ppid",
            Id::Pid => "pid",
            Id::Tid => "tid",
            Id::Auid => "auid",
            Id::Uid => "uid",
            Id::Gid => "gid",
            Id::Euid => "euid",
            Id::Suid => "suid",
            Id::Fsuid => "fsuid",
            Id::Egid => "egid",
            Id::Sgid => "sgid",
            Id::Fsgid => "fsgid",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Ids([Slot<u64>; 12]);

impl Index<Id> for Ids {
    type Output = Slot<u64>;
    fn index(&self, id: Id) -> &Slot<u64> {
        &self.0[id as usize]
    }
}

impl IndexMut<Id> for Ids {
    fn index_mut(&mut self, id: Id) -> &mut Slot<u64> {
        &mut self.0[id as usize]
    }
}

/// Known keys of a `SYSCALL` line in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Arch,
    Syscall,
    Per,
    Template,
    Rep,
    Stime,
    Etime,
    Success,
    Exit,
    Arg(u8),
    Items,
    Id(u8),
    Tty,
    Ses,
    Comm,
    Exe,
    Key,
}

impl Field {
    fn order() -> impl Iterator<Item = Field> {
        [
            Field::Arch,
            Field::Syscall,
            Field::Per,
            Field::Template,
            Field::Rep,
            Field::Stime,
            Field::Etime,
            Field::Success,
            Field::Exit,
        ]
        .into_iter()
        .chain((0..4).map(Field::Arg))
        .chain(std::iter::once(Field::Items))
        .chain((0..12).map(Field::Id))
        .chain([Field::Tty, Field::Ses, Field::Comm, Field::Exe, Field::Key])
    }

    fn from_key(key: &str) -> Option<Field> {
        Some(match key {
            "arch" => Field::Arch,
            "syscall" => Field::Syscall,
            "per" => Field::Per,
            "template" => Field::Template,
            "rep" => Field::Rep,
            "stime" => Field::Stime,
            "etime" => Field::Etime,
            "success" => Field::Success,
            "exit" => Field::Exit,
            "a0" => Field::Arg(0),
            "a1" => Field::Arg(1),
            "a2" => Field::Arg(2),
            "a3" => Field::Arg(3),
            "items" => Field::Items,
            "tty" => Field::Tty,
            "ses" => Field::Ses,
            "comm" => Field::Comm,
            "exe" => Field::Exe,
            "key" => Field::Key,
            other => {
                let idx = Id::ALL.iter().position(|id| id.key() == other)?;
                Field::Id(idx as u8)
            }
        })
    }
}

/// A key/value token the typed model does not cover.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Extra {
    /// Field this token followed; `None` means directly after the header.
    pub after: Option<Field>,
    pub key: String,
    pub value: String,
}

/// One audit log line.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AuditRecord {
    pub record_type: String,
    pub time: EventTime,
    /// Audit event id; `None` renders as `∅`.
    pub serial: Option<u64>,
    pub arch: Slot<u64>,
    pub syscall: Slot<u64>,
    pub per: Slot<u64>,
    pub template: Option<TemplateMatch>,
    pub success: Slot<bool>,
    pub exit: Slot<i64>,
    pub args: [Slot<u64>; 4],
    pub items: Slot<u64>,
    pub ids: Ids,
    /// String fields keep their rendered form, quotes included
    /// (`"arducopter"`, `(null)`).
    pub tty: Slot<Arc<str>>,
    pub ses: Slot<u64>,
    pub comm: Slot<Arc<str>>,
    pub exe: Slot<Arc<str>>,
    pub key: Slot<Arc<str>>,
    pub extras: Vec<Extra>,
}

/// Task identity: a Linux thread.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct TaskId {
    pub pid: u64,
    pub tid: u64,
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.pid, self.tid)
    }
}

/// Wrap a string in double quotes, the way `comm` and `exe` are printed.
pub fn quoted(s: &str) -> Arc<str> {
    Arc::from(format!("\"{s}\""))
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(s)
}

impl AuditRecord {
    /// Empty record of the given type; every field absent.
    pub fn new(record_type: &str, time: EventTime, serial: Option<u64>) -> Self {
        AuditRecord {
            record_type: record_type.to_string(),
            time,
            serial,
            arch: Slot::Absent,
            syscall: Slot::Absent,
            per: Slot::Absent,
            template: None,
            success: Slot::Absent,
            exit: Slot::Absent,
            args: Default::default(),
            items: Slot::Absent,
            ids: Ids::default(),
            tty: Slot::Absent,
            ses: Slot::Absent,
            comm: Slot::Absent,
            exe: Slot::Absent,
            key: Slot::Absent,
            extras: Vec::new(),
        }
    }

    pub fn kind(&self) -> RecordKind {
        if self.record_type != SYSCALL_TYPE {
            RecordKind::Other
        } else if self.template.is_some() {
            RecordKind::TemplateMatch
        } else {
            RecordKind::Syscall
        }
    }

    pub fn pid(&self) -> Option<u64> {
        self.ids[Id::Pid].get()
    }

    pub fn tid(&self) -> Option<u64> {
        self.ids[Id::Tid].get()
    }

    /// `(pid, tid)`; a record without `tid` is attributed to its main thread.
    pub fn task_id(&self) -> Option<TaskId> {
        let pid = self.pid()?;
        Some(TaskId {
            pid,
            tid: self.tid().unwrap_or(pid),
        })
    }

    /// `comm` without surrounding quotes.
    pub fn comm_name(&self) -> Option<&str> {
        self.comm.known().map(|c| unquote(c))
    }

    /// Best known event time in nanoseconds (the lower bound for ranges).
    pub fn time_ns(&self) -> u64 {
        self.time.lower_ns()
    }

    /// Argument value of slot `k` (0..4), if known.
    pub fn arg(&self, k: usize) -> Option<u64> {
        self.args.get(k).and_then(Slot::get)
    }

    /// Check the per-kind invariants.
    pub fn validate(&self) -> Result<(), RecordError> {
        let violation = |m: &str| Err(RecordError::InvariantViolation(m.to_string()));
        if let EventTime::Range(lo, hi) = self.time {
            if lo.as_nanos() > hi.as_nanos() {
                return violation("time range lower bound exceeds upper bound");
            }
        }
        match self.kind() {
            RecordKind::Syscall => {
                if !self.syscall.is_known() {
                    return violation("syscall record without a syscall number");
                }
            }
            RecordKind::TemplateMatch => {
                let t = self.template.as_ref().expect("kind checked");
                if !self.syscall.is_absent() {
                    return violation("template record carries a syscall number");
                }
                if t.rep == 0 {
                    return violation("template record with rep=0");
                }
                if t.stime > t.etime {
                    return violation("template record with stime > etime");
                }
                if t.name.is_empty() || t.name.contains(char::is_whitespace) {
                    return violation("template name must be a non-empty token");
                }
            }
            RecordKind::Other => {}
        }
        Ok(())
    }

    fn render(&self, out: &mut impl fmt::Write) -> fmt::Result {
        write!(out, "type={} msg=audit({}:", self.record_type, self.time)?;
        match self.serial {
            Some(s) => write!(out, "{s}")?,
            None => out.write_str(UNKNOWN)?,
        }
        out.write_str("):")?;
        self.render_extras(out, None)?;
        for field in Field::order() {
            self.render_field(out, field)?;
            self.render_extras(out, Some(field))?;
        }
        Ok(())
    }

    fn render_extras(&self, out: &mut impl fmt::Write, anchor: Option<Field>) -> fmt::Result {
        for e in self.extras.iter().filter(|e| e.after == anchor) {
            write!(out, " {}={}", e.key, e.value)?;
        }
        Ok(())
    }

    fn render_field(&self, out: &mut impl fmt::Write, field: Field) -> fmt::Result {
        fn slot<T>(
            out: &mut impl fmt::Write,
            key: &str,
            s: &Slot<T>,
            show: impl Fn(&T, &mut dyn fmt::Write) -> fmt::Result,
        ) -> fmt::Result {
            match s {
                Slot::Absent => Ok(()),
                Slot::Unknown => write!(out, " {key}={UNKNOWN}"),
                Slot::Known(v) => {
                    write!(out, " {key}=")?;
                    show(v, out)
                }
            }
        }
        let hex = |v: &u64, o: &mut dyn fmt::Write| write!(o, "{v:x}");
        let dec = |v: &u64, o: &mut dyn fmt::Write| write!(o, "{v}");
        let text = |v: &Arc<str>, o: &mut dyn fmt::Write| o.write_str(v);
        match field {
            Field::Arch => slot(out, "arch", &self.arch, hex),
            Field::Syscall => {
                if self.template.is_some() && self.syscall.is_absent() {
                    // The syscall slot stays empty on template records.
                    out.write_char(' ')
                } else {
                    slot(out, "syscall", &self.syscall, dec)
                }
            }
            Field::Per => slot(out, "per", &self.per, hex),
            Field::Template => match &self.template {
                Some(t) => write!(out, " template={}", t.name),
                None => Ok(()),
            },
            Field::Rep => match &self.template {
                Some(t) => write!(out, " rep={}", t.rep),
                None => Ok(()),
            },
            Field::Stime => match &self.template {
                Some(t) => write!(out, " stime={}", t.stime),
                None => Ok(()),
            },
            Field::Etime => match &self.template {
                Some(t) => write!(out, " etime={}", t.etime),
                None => Ok(()),
            },
            Field::Success => slot(out, "success", &self.success, |v, o| {
                o.write_str(if *v { "yes" } else { "no" })
            }),
            Field::Exit => slot(out, "exit", &self.exit, |v, o| write!(o, "{v}")),
            Field::Arg(k) => {
                let key = ["a0", "a1", "a2", "a3"][usize::from(k)];
                slot(out, key, &self.args[usize::from(k)], hex)
            }
            Field::Items => slot(out, "items", &self.items, dec),
            Field::Id(k) => {
                let id = Id::ALL[usize::from(k)];
                slot(out, id.key(), &self.ids[id], dec)
            }
            Field::Tty => slot(out, "tty", &self.tty, text),
            Field::Ses => slot(out, "ses", &self.ses, dec),
            Field::Comm => slot(out, "comm", &self.comm, text),
            Field::Exe => slot(out, "exe", &self.exe, text),
            Field::Key => slot(out, "key", &self.key, text),
        }
    }
}

/// Renders without validating; see [`serialize_record`].
impl fmt::Display for AuditRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.render(f)
    }
}

/// Render a record as one line (no trailing newline).
pub fn serialize_record(r: &AuditRecord) -> Result<String, RecordError> {
    r.validate()?;
    Ok(r.to_string())
}

/// Bytes the record occupies in a log file, trailing newline included.
pub fn record_size_bytes(r: &AuditRecord) -> usize {
    struct Counter(usize);
    impl fmt::Write for Counter {
        fn write_str(&mut self, s: &str) -> fmt::Result {
            self.0 += s.len();
            Ok(())
        }
    }
    let mut c = Counter(0);
    r.render(&mut c).expect("counting never fails");
    c.0 + 1
}

/// Parse raw bytes; non-UTF-8 input is rejected rather than replaced.
pub fn parse_record_bytes(bytes: &[u8]) -> Result<AuditRecord, RecordError> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_record(s),
        Err(e) => Err(malformed(e.valid_up_to(), "invalid UTF-8")),
    }
}

/// Parse one audit line. Leading and trailing whitespace is ignored.
pub fn parse_record(line: &str) -> Result<AuditRecord, RecordError> {
    let lead = line.len() - line.trim_start().len();
    let s = line.trim();
    let rest = s
        .strip_prefix("type=")
        .ok_or_else(|| malformed(lead, "missing type="))?;
    let type_end = rest
        .find(' ')
        .ok_or_else(|| malformed(lead + s.len(), "missing msg=audit(...)"))?;
    let record_type = &rest[..type_end];
    if record_type.is_empty() {
        return Err(malformed(lead + 5, "empty record type"));
    }
    let mut pos = 5 + type_end;
    pos += s[pos..].len() - s[pos..].trim_start().len();
    let after = s[pos..]
        .strip_prefix("msg=audit(")
        .ok_or_else(|| malformed(lead + pos, "missing msg=audit("))?;
    pos += "msg=audit(".len();
    let (time, used) =
        parse_event_time(after).map_err(|(off, r)| malformed(lead + pos + off, r))?;
    pos += used;
    let close = s[pos..]
        .find("):")
        .ok_or_else(|| malformed(lead + pos, "unterminated msg=audit("))?;
    let serial_text = &s[pos..pos + close];
    let serial = if serial_text == UNKNOWN {
        None
    } else {
        Some(parse_dec(serial_text).ok_or_else(|| malformed(lead + pos, "bad serial"))?)
    };
    pos += close + 2;

    let mut rec = AuditRecord::new(record_type, time, serial);
    let structured = record_type == SYSCALL_TYPE;
    let mut last: Option<Field> = None;
    let mut template_name: Option<String> = None;
    let (mut rep, mut stime, mut etime) = (None, None, None);

    for tok in Tokens::new(s, pos) {
        let (off, key, value) = tok.map_err(|(o, r)| malformed(lead + o, r))?;
        let at = |reason: &str| malformed(lead + off, format!("{reason} in `{key}`"));
        let field = if structured {
            Field::from_key(key)
        } else {
            None
        };
        let field = match field {
            Some(f) if last.map_or(true, |l| f > l) => f,
            _ => {
                rec.extras.push(Extra {
                    after: last,
                    key: key.to_string(),
                    value: value.to_string(),
                });
                continue;
            }
        };
        last = Some(field);
        let unknown = value == UNKNOWN;
        macro_rules! slot {
            ($parse:expr) => {
                if unknown {
                    Slot::Unknown
                } else {
                    Slot::Known($parse(value).ok_or_else(|| at("bad value"))?)
                }
            };
        }
        match field {
            Field::Arch => rec.arch = slot!(parse_hex),
            Field::Syscall => rec.syscall = slot!(parse_dec),
            Field::Per => rec.per = slot!(parse_hex),
            Field::Template => {
                if value.is_empty() || unknown {
                    return Err(at("bad template name"));
                }
                template_name = Some(value.to_string());
            }
            Field::Rep => rep = Some(parse_dec(value).ok_or_else(|| at("bad value"))?),
            Field::Stime => stime = Some(parse_dec(value).ok_or_else(|| at("bad value"))?),
            Field::Etime => etime = Some(parse_dec(value).ok_or_else(|| at("bad value"))?),
            Field::Success => {
                rec.success = slot!(|v| match v {
                    "yes" => Some(true),
                    "no" => Some(false),
                    _ => None,
                })
            }
            Field::Exit => rec.exit = slot!(parse_signed),
            Field::Arg(k) => rec.args[usize::from(k)] = slot!(parse_hex),
            Field::Items => rec.items = slot!(parse_dec),
            Field::Id(k) => rec.ids[Id::ALL[usize::from(k)]] = slot!(parse_dec),
            Field::Tty => rec.tty = slot!(|v: &str| Some(Arc::from(v))),
            Field::Ses => rec.ses = slot!(parse_dec),
            Field::Comm => rec.comm = slot!(|v: &str| Some(Arc::from(v))),
            Field::Exe => rec.exe = slot!(|v: &str| Some(Arc::from(v))),
            Field::Key => rec.key = slot!(|v: &str| Some(Arc::from(v))),
        }
    }

    match (template_name, rep, stime, etime) {
        (None, None, None, None) => {}
        (Some(name), Some(rep), Some(stime), Some(etime)) => {
            rec.template = Some(TemplateMatch {
                name,
                rep,
                stime,
                etime,
            })
        }
        _ => {
            return Err(malformed(
                lead,
                "template records need template, rep, stime and etime",
            ))
        }
    }
    if structured && rec.template.is_none() && !rec.syscall.is_known() {
        return Err(malformed(lead, "SYSCALL record without syscall="));
    }
    rec.validate().map_err(|e| malformed(lead, e.to_string()))?;
    Ok(rec)
}

fn parse_event_time(s: &str) -> Result<(EventTime, usize), (usize, &'static str)> {
    if let Some(inner) = s.strip_prefix('[') {
        let end = inner.find(']').ok_or((0, "unterminated time range"))?;
        let (lo, hi) = inner[..end]
            .split_once(',')
            .ok_or((1, "time range needs two bounds"))?;
        let lo = Timestamp::parse(lo.trim()).ok_or((1, "bad timestamp"))?;
        let hi = Timestamp::parse(hi.trim()).ok_or((1, "bad timestamp"))?;
        let used = end + 2;
        if !s[used..].starts_with(':') {
            return Err((used, "expected ':' after timestamp"));
        }
        Ok((EventTime::Range(lo, hi), used + 1))
    } else {
        let end = s.find(':').ok_or((0, "missing ':' in msg=audit("))?;
        let t = Timestamp::parse(&s[..end]).ok_or((0, "bad timestamp"))?;
        Ok((EventTime::Exact(t), end + 1))
    }
}

/// Iterator over ` key=value` tokens, honouring quoted values.
struct Tokens<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(s: &'a str, pos: usize) -> Self {
        Tokens { s, pos }
    }
}

impl<'a> Iterator for Tokens<'a> {
    type Item = Result<(usize, &'a str, &'a str), (usize, &'static str)>;

    fn next(&mut self) -> Option<Self::Item> {
        let bytes = self.s.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos] == b' ' {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.s[start..];
        let Some(eq) = rest.find('=') else {
            self.pos = bytes.len();
            return Some(Err((start, "token without '='")));
        };
        let key = &rest[..eq];
        if key.is_empty() || key.contains(' ') {
            self.pos = bytes.len();
            return Some(Err((start, "token without '='")));
        }
        let vstart = start + eq + 1;
        let vrest = &self.s[vstart..];
        let vlen = match vrest.as_bytes().first() {
            Some(&q @ (b'"' | b'\'')) => match vrest[1..].find(q as char) {
                Some(i) => i + 2,
                None => {
                    self.pos = bytes.len();
                    return Some(Err((vstart, "unterminated quoted value")));
                }
            },
            _ => vrest.find(' ').unwrap_or(vrest.len()),
        };
        let end = vstart + vlen;
        if end < bytes.len() && bytes[end] != b' ' {
            self.pos = bytes.len();
            return Some(Err((end, "expected space after value")));
        }
        self.pos = end;
        Some(Ok((start, key, &self.s[vstart..end])))
    }
}

fn parse_dec(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn parse_signed(s: &str) -> Option<i64> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    parse_dec(digits)?;
    s.parse().ok()
}

fn parse_hex(s: &str) -> Option<u64> {
    if s.is_empty() || s.len() > 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    u64::from_str_radix(s, 16).ok()
}

impl EventTime {
    /// Exact timestamp from nanoseconds, using the digit width of `like`.
    pub fn exact_like(ns: u64, like: &EventTime) -> EventTime {
        EventTime::Exact(Timestamp::from_nanos_with_digits(ns, like.digits()))
    }
}
