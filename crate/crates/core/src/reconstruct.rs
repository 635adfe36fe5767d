//! Expansion of reduced logs back into per-syscall records, and a checker
//! that compares an expansion against the stream it came from.
//!
//! A template-match record with `rep = r` over a template of length `L`
//! becomes `r * L` records. The first gets `stime`, the last `etime`, and
//! everything in between the range `[stime, etime]`. Serials, wildcard
//! arguments, `success`, `exit` and `items` are not stored anywhere and
//! come back as `∅`. Records that were never reduced pass through as is.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit_record::{
    AuditRecord, EventTime, Extra, Field, RecordKind, Slot, TaskId, Timestamp,
};
use crate::template::{TemplateSet, WILDCARD};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconstructError {
    #[error("record {index}: unknown template `{name}`")]
    UnknownTemplate { index: usize, name: String },
    #[error("record {index}: rep must be at least 1, got {rep}")]
    RepInvalid { index: usize, rep: u64 },
    #[error("record {index}: stime {stime} is after etime {etime}")]
    InvalidSpan {
        index: usize,
        stime: u64,
        etime: u64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReconstructOptions {
    /// Number expanded records 1, 2, ... and tag them `synthetic=yes`
    /// instead of leaving the serial unknown.
    pub synthesize_serials: bool,
}

/// One output record and where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expanded {
    pub record: AuditRecord,
    /// Index of the reduced record it was produced from.
    pub source: usize,
    /// Produced from a template-match record rather than passed through.
    pub from_template: bool,
}

/// Streaming expander; feed reduced records in order.
#[derive(Debug)]
pub struct Reconstructor<'a> {
    set: &'a TemplateSet,
    opts: ReconstructOptions,
    next_serial: u64,
    index: usize,
}

impl<'a> Reconstructor<'a> {
    pub fn new(set: &'a TemplateSet, opts: ReconstructOptions) -> Self {
        Reconstructor {
            set,
            opts,
            next_serial: 1,
            index: 0,
        }
    }

    pub fn push(&mut self, r: &AuditRecord) -> Result<Vec<Expanded>, ReconstructError> {
        let index = self.index;
        self.index += 1;
        let Some(tm) = r
            .template
            .as_ref()
            .filter(|_| r.kind() == RecordKind::TemplateMatch)
        else {
            return Ok(vec![Expanded {
                record: r.clone(),
                source: index,
                from_template: false,
            }]);
        };
        let t = self
            .set
            .get(&tm.name)
            .ok_or_else(|| ReconstructError::UnknownTemplate {
                index,
                name: tm.name.clone(),
            })?;
        if tm.rep == 0 {
            return Err(ReconstructError::RepInvalid { index, rep: 0 });
        }
        if tm.stime > tm.etime {
            return Err(ReconstructError::InvalidSpan {
                index,
                stime: tm.stime,
                etime: tm.etime,
            });
        }
        let digits = match r.time {
            EventTime::Exact(ts) | EventTime::Range(ts, _) => ts.digits(),
        };
        let ts = |ns| Timestamp::from_nanos_with_digits(ns, digits);
        let total = tm.rep as usize * t.entries.len();
        let mut out = Vec::with_capacity(total);
        for j in 0..total {
            let e = &t.entries[j % t.entries.len()];
            let time = if j == 0 {
                EventTime::Exact(ts(tm.stime))
            } else if j + 1 == total {
                EventTime::Exact(ts(tm.etime))
            } else {
                EventTime::Range(ts(tm.stime), ts(tm.etime))
            };
            let mut x = AuditRecord::new(&r.record_type, time, None);
            x.arch = r.arch.clone();
            x.syscall = Slot::Known(e.syscall);
            x.per = r.per.clone();
            x.success = Slot::Unknown;
            x.exit = Slot::Unknown;
            for (slot, &a) in x.args.iter_mut().zip(&e.args) {
                *slot = if a == WILDCARD {
                    Slot::Unknown
                } else {
                    Slot::Known(a as u64)
                };
            }
            x.items = Slot::Unknown;
            x.ids = r.ids.clone();
            x.tty = r.tty.clone();
            x.ses = r.ses.clone();
            x.comm = r.comm.clone();
            x.exe = r.exe.clone();
            x.key = r.key.clone();
            if self.opts.synthesize_serials {
                x.serial = Some(self.next_serial);
                self.next_serial += 1;
                x.extras.push(Extra {
                    after: Some(Field::Key),
                    key: "synthetic".into(),
                    value: "yes".into(),
                });
            }
            out.push(Expanded {
                record: x,
                source: index,
                from_template: true,
            });
        }
        Ok(out)
    }
}

/// Expand a whole reduced log.
pub fn reconstruct(
    reduced: &[AuditRecord],
    set: &TemplateSet,
    opts: ReconstructOptions,
) -> Result<Vec<Expanded>, ReconstructError> {
    let mut rc = Reconstructor::new(set, opts);
    let mut out = Vec::with_capacity(reduced.len());
    for r in reduced {
        out.extend(rc.push(r)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    MissingRecord,
    ExtraRecord,
    Syscall,
    Argument(u8),
    Timestamp,
    Identity,
    Serial,
    Status,
    /// A record that was not reduced differs from the original.
    RawMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("retention violated at original record {index} ({kind:?}) for task {task}")]
pub struct RetentionViolation {
    /// Index into the original stream (its length for surplus records).
    pub index: usize,
    pub kind: ViolationKind,
    pub task: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Violation(#[from] RetentionViolation),
}

/// What a successful check found.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub original_events: u64,
    pub reconstructed_events: u64,
    /// Records that passed through unreduced and match byte for byte.
    pub exact_records: u64,
    pub expanded_records: u64,
    /// Expanded records whose time is a range.
    pub ranged_timestamps: u64,
    /// Per field, how many records lost it.
    pub lost_fields: BTreeMap<String, u64>,
    /// Whether the cross-task order of the expansion equals the original.
    pub interleaving_preserved: bool,
}

fn identity_eq(a: &AuditRecord, b: &AuditRecord) -> bool {
    a.record_type == b.record_type
        && a.arch == b.arch
        && a.per == b.per
        && a.ids == b.ids
        && a.tty == b.tty
        && a.ses == b.ses
        && a.comm == b.comm
        && a.exe == b.exe
        && a.key == b.key
}

fn slot_ok<T: PartialEq>(rec: &Slot<T>, orig: &Slot<T>) -> Option<bool> {
    match rec {
        Slot::Unknown => Some(false),
        other => (other == orig).then_some(true),
    }
}

/// Reconstruct `reduced` and check it against `original`: every event is
/// present in per-task order, constrained arguments and identity fields are
/// exact, and every true timestamp lies within its reconstructed bounds.
pub fn verify_retention(
    original: &[AuditRecord],
    reduced: &[AuditRecord],
    set: &TemplateSet,
) -> Result<RetentionReport, VerifyError> {
    let expanded = reconstruct(reduced, set, ReconstructOptions::default())?;
    let mut by_task: BTreeMap<Option<TaskId>, Vec<usize>> = BTreeMap::new();
    for (i, r) in original.iter().enumerate() {
        by_task.entry(r.task_id()).or_default().push(i);
    }
    let mut rec_by_task: BTreeMap<Option<TaskId>, Vec<&Expanded>> = BTreeMap::new();
    for e in &expanded {
        rec_by_task.entry(e.record.task_id()).or_default().push(e);
    }

    let mut report = RetentionReport {
        original_events: original.len() as u64,
        reconstructed_events: expanded.len() as u64,
        ..RetentionReport::default()
    };
    let lost = |f: &str, report: &mut RetentionReport| {
        *report.lost_fields.entry(f.to_string()).or_default() += 1;
    };
    let mut first: Option<RetentionViolation> = None;
    let mut flag = |index: usize, kind: ViolationKind, task: &Option<TaskId>| {
        if first.as_ref().map_or(true, |v| index < v.index) {
            first = Some(RetentionViolation {
                index,
                kind,
                task: task.map_or_else(|| "-".to_string(), |t| t.to_string()),
            });
        }
    };

    let empty = Vec::new();
    for (task, rec) in &rec_by_task {
        let orig = by_task.get(task).unwrap_or(&empty);
        if rec.len() > orig.len() {
            flag(original.len(), ViolationKind::ExtraRecord, task);
        }
    }
    for (task, orig) in &by_task {
        let rec = rec_by_task.get(task).map_or(&[][..], Vec::as_slice);
        for (k, &oi) in orig.iter().enumerate() {
            let o = &original[oi];
            let Some(e) = rec.get(k) else {
                flag(oi, ViolationKind::MissingRecord, task);
                break;
            };
            let r = &e.record;
            if !e.from_template {
                if r == o {
                    report.exact_records += 1;
                } else {
                    flag(oi, ViolationKind::RawMismatch, task);
                    break;
                }
                continue;
            }
            report.expanded_records += 1;
            if r.syscall != o.syscall {
                flag(oi, ViolationKind::Syscall, task);
                break;
            }
            if !identity_eq(r, o) {
                flag(oi, ViolationKind::Identity, task);
                break;
            }
            if !r.time.contains(o.time_ns()) {
                flag(oi, ViolationKind::Timestamp, task);
                break;
            }
            if r.time.exact_ns().is_none() {
                report.ranged_timestamps += 1;
                lost("timestamp", &mut report);
            }
            match (r.serial, o.serial) {
                (None, _) => lost("serial", &mut report),
                (a, b) if a != b => {
                    flag(oi, ViolationKind::Serial, task);
                    break;
                }
                _ => {}
            }
            let mut bad = None;
            for k in 0..4 {
                match slot_ok(&r.args[k], &o.args[k]) {
                    Some(true) => {}
                    Some(false) => lost(["a0", "a1", "a2", "a3"][k], &mut report),
                    None => bad = Some(ViolationKind::Argument(k as u8)),
                }
            }
            for (name, ok) in [
                ("success", slot_ok(&r.success, &o.success)),
                ("exit", slot_ok(&r.exit, &o.exit)),
                ("items", slot_ok(&r.items, &o.items)),
            ] {
                match ok {
                    Some(true) => {}
                    Some(false) => lost(name, &mut report),
                    None => bad = bad.or(Some(ViolationKind::Status)),
                }
            }
            if !o.extras.is_empty() {
                lost("extras", &mut report);
            }
            if let Some(kind) = bad {
                flag(oi, kind, task);
                break;
            }
        }
    }
    if let Some(v) = first {
        return Err(v.into());
    }
    let order_orig = original.iter().map(AuditRecord::task_id);
    let order_rec = expanded.iter().map(|e| e.record.task_id());
    report.interleaving_preserved = order_orig.eq(order_rec);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit_record::tests::{LISTING_RAW, LISTING_REDUCED};
    use crate::audit_record::{parse_record, serialize_record};
    use crate::learner::{learn, Boundaries, LearnConfig};
    use crate::reducer::{reduce_stream, Mode, TemporalOverride};
    use crate::template::{parse_template_file, TaskBinding, Template, TemplateEntry};
    use crate::workload_gen::{generate, inject, random_spec, AnomalySpec};

    const LISTING_TEMPLATE: &str =
        "arducopter\n3\n1303419\n5012313\n4:3:-1:1:-1\n4:4:-1:1:-1\n4:5:-1:1:-1\n";

    fn listing_set() -> TemplateSet {
        let mut set = TemplateSet::new();
        set.insert(
            TaskBinding::Comm("arducopter".into()),
            parse_template_file(LISTING_TEMPLATE).unwrap(),
        )
        .unwrap();
        set
    }

    fn expected_line(time: &str, a0: u64) -> String {
        format!(
            "type=SYSCALL msg=audit({time}:∅): arch=40000028 syscall=4 per=800000 success=∅ exit=∅ a0={a0} a1=∅ a2=1 a3=∅ items=∅ ppid=1513 pid=1526 tid=1526 auid=1000 uid=0 gid=0 euid=0 suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=pts0 ses=1 comm=\"arducopter\" exe=\"/home/pi/ardupilot/build/navio2/bin/arducopter\" key=(null)"
        )
    }

    #[test]
    fn compressed_line_expands_to_three_records() {
        let reduced = parse_record(LISTING_REDUCED).unwrap();
        let out = reconstruct(&[reduced], &listing_set(), ReconstructOptions::default()).unwrap();
        let lines: Vec<String> = out
            .iter()
            .map(|e| serialize_record(&e.record).unwrap())
            .collect();
        assert_eq!(
            lines,
            vec![
                expected_line("1601405431.612391356", 3),
                expected_line("[1601405431.612391356, 1601405431.612391367]", 4),
                expected_line("1601405431.612391367", 5),
            ]
        );
        let orig: Vec<AuditRecord> = LISTING_RAW
            .iter()
            .map(|l| parse_record(l).unwrap())
            .collect();
        let reduced = parse_record(LISTING_REDUCED).unwrap();
        let rep = verify_retention(&orig, &[reduced], &listing_set()).unwrap();
        assert_eq!(rep.expanded_records, 3);
        assert_eq!(rep.lost_fields["serial"], 3);
        assert_eq!(rep.lost_fields["a1"], 3);
        assert_eq!(rep.lost_fields["a3"], 3);
        assert_eq!(rep.lost_fields["timestamp"], 1);
        assert!(!rep.lost_fields.contains_key("a0"));
    }

    #[test]
    fn rep_two_gives_exact_ends_only() {
        let mut r = parse_record(LISTING_REDUCED).unwrap();
        r.template.as_mut().unwrap().rep = 2;
        let out = reconstruct(&[r], &listing_set(), ReconstructOptions::default()).unwrap();
        assert_eq!(out.len(), 6);
        let exact: Vec<bool> = out
            .iter()
            .map(|e| e.record.time.exact_ns().is_some())
            .collect();
        assert_eq!(exact, vec![true, false, false, false, false, true]);
        let a0: Vec<u64> = out.iter().map(|e| e.record.arg(0).unwrap()).collect();
        assert_eq!(a0, vec![3, 4, 5, 3, 4, 5]);
    }

    #[test]
    fn raw_input_is_identity() {
        let raw: Vec<AuditRecord> = LISTING_RAW
            .iter()
            .map(|l| parse_record(l).unwrap())
            .collect();
        let out = reconstruct(&raw, &TemplateSet::new(), ReconstructOptions::default()).unwrap();
        let back: Vec<AuditRecord> = out.into_iter().map(|e| e.record).collect();
        assert_eq!(back, raw);
    }

    #[test]
    fn errors() {
        let r = parse_record(LISTING_REDUCED).unwrap();
        assert_eq!(
            reconstruct(
                &[r.clone()],
                &TemplateSet::new(),
                ReconstructOptions::default()
            )
            .unwrap_err(),
            ReconstructError::UnknownTemplate {
                index: 0,
                name: "arducopter".into()
            }
        );
        let mut z = r.clone();
        z.template.as_mut().unwrap().rep = 0;
        assert_eq!(
            reconstruct(&[r, z], &listing_set(), ReconstructOptions::default()).unwrap_err(),
            ReconstructError::RepInvalid { index: 1, rep: 0 }
        );
    }

    #[test]
    fn synthetic_serials_are_tagged() {
        let mut r = parse_record(LISTING_REDUCED).unwrap();
        r.template.as_mut().unwrap().rep = 2;
        let opts = ReconstructOptions {
            synthesize_serials: true,
        };
        let out = reconstruct(&[r], &listing_set(), opts).unwrap();
        let serials: Vec<u64> = out.iter().map(|e| e.record.serial.unwrap()).collect();
        assert_eq!(serials, vec![1, 2, 3, 4, 5, 6]);
        let line = serialize_record(&out[0].record).unwrap();
        assert!(line.contains(":1): "));
        assert!(line.ends_with("key=(null) synthetic=yes"));
        assert_eq!(parse_record(&line).unwrap(), out[0].record);
    }

    #[test]
    fn tampered_rep_is_caught() {
        let orig: Vec<AuditRecord> = LISTING_RAW
            .iter()
            .map(|l| parse_record(l).unwrap())
            .collect();
        let mut t = Template::new("w", vec![TemplateEntry::new(4, [-1, -1, 1, -1])]);
        t.expected_runtime_ns = 0;
        let mut set = TemplateSet::new();
        set.insert(TaskBinding::Comm("arducopter".into()), t)
            .unwrap();
        let red = reduce_stream(
            orig.clone(),
            &set,
            Mode::EllipsisHp,
            TemporalOverride::DISABLED,
        )
        .unwrap();
        let mut recs = red.records();
        assert_eq!(recs.len(), 1);
        assert!(verify_retention(&orig, &recs, &set).is_ok());
        recs[0].template.as_mut().unwrap().rep = 2;
        let err = verify_retention(&orig, &recs, &set).unwrap_err();
        match err {
            VerifyError::Violation(v) => {
                assert_eq!(v.index, 1);
                assert_eq!(v.kind, ViolationKind::Timestamp);
            }
            e => panic!("{e:?}"),
        }
        recs[0].template.as_mut().unwrap().rep = 4;
        let VerifyError::Violation(v) = verify_retention(&orig, &recs, &set).unwrap_err() else {
            panic!()
        };
        assert_eq!(v.kind, ViolationKind::ExtraRecord);
        assert_eq!(v.index, 3);
    }

    #[test]
    fn constrained_argument_mismatch_is_a_violation() {
        let orig: Vec<AuditRecord> = LISTING_RAW
            .iter()
            .map(|l| parse_record(l).unwrap())
            .collect();
        let reduced = parse_record(LISTING_REDUCED).unwrap();
        let bad = "arducopter\n3\n0\n0\n4:3:-1:1:-1\n4:9:-1:1:-1\n4:5:-1:1:-1\n";
        let mut set = TemplateSet::new();
        set.insert(
            TaskBinding::Comm("arducopter".into()),
            parse_template_file(bad).unwrap(),
        )
        .unwrap();
        let VerifyError::Violation(v) = verify_retention(&orig, &[reduced], &set).unwrap_err()
        else {
            panic!()
        };
        assert_eq!((v.index, v.kind), (1, ViolationKind::Argument(0)));
    }

    #[test]
    fn random_workloads_round_trip_with_anomalies() {
        for seed in 0..12 {
            let spec = random_spec(seed);
            let stream = generate(&spec).unwrap();
            let t_mid = stream[stream.len() / 2].time_ns();
            let task = &spec.tasks[0];
            let stream = inject(
                stream,
                &AnomalySpec::exfiltration(t_mid, task.pid, task.tid(), &task.comm),
            );
            let mut profiling = spec.clone().with_seed(seed + 1000);
            for t in &mut profiling.tasks {
                t.boundary_syscall = Some(162);
            }
            let cfg = LearnConfig {
                top_n: 2,
                boundaries: Boundaries::explicit([162]),
                ..Default::default()
            };
            let set = learn(&generate(&profiling).unwrap(), &cfg)
                .unwrap()
                .templates;
            assert!(!set.is_empty());
            for mode in [Mode::Ellipsis, Mode::EllipsisHp] {
                let red =
                    reduce_stream(stream.clone(), &set, mode, TemporalOverride::default()).unwrap();
                let rep = verify_retention(&stream, &red.records(), &set)
                    .unwrap_or_else(|e| panic!("seed {seed} {mode}: {e}"));
                assert_eq!(rep.reconstructed_events, stream.len() as u64);
                assert!(rep.exact_records >= 3);
            }
        }
    }
}
