use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ellipsis_core::analytics::{compare, ComparisonReport, Prediction, TaskParams};
use ellipsis_core::audit_record::{parse_record, AuditRecord};
use ellipsis_core::buffer_sim::{
    arrivals_from_records, min_capacity_for_lossless, simulate, write_samples_csv, BufferConfig,
    DrainParams,
};
use ellipsis_core::learner::{learn, Boundaries, LearnConfig, TemporalPolicy};
use ellipsis_core::reconstruct::{
    verify_retention, ReconstructOptions, Reconstructor, VerifyError,
};
use ellipsis_core::reducer::{Mode, StreamReducer, TemporalOverride};
use ellipsis_core::template::{
    parse_template_file, serialize_template, MemoryCosts, TaskBinding, TemplateSet,
};
use ellipsis_core::workload_gen::{bundled_spec, inject, AnomalySpec, Generator, WorkloadSpec};
use ellipsis_core::{ExactTaskParams, Scalar};

const SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

/// Failure class, mapped to the process exit code.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Input(anyhow::Error),
    Verification(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Input(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

type Res<T> = Result<T, Failure>;

trait Classify<T> {
    fn config(self) -> Res<T>;
    fn input(self) -> Res<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Res<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn input(self) -> Res<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }
}

#[derive(Parser)]
#[command(
    name = "ellipsis",
    version,
    about = "Template-based audit log reduction for periodic tasks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic audit log from a workload spec.
    Generate(GenerateArgs),
    /// Learn templates from a profiling trace.
    Learn(LearnArgs),
    /// Replace template instances in a log with template records.
    Reduce(ReduceArgs),
    /// Expand a reduced log back into per-syscall records.
    Reconstruct(ReconstructArgs),
    /// Run the audit backlog model over an arrival stream.
    Simulate(SimulateArgs),
    /// Evaluate the closed-form event and size predictions.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Workload spec JSON.
    #[arg(long, conflicts_with = "bundled", required_unless_present = "bundled")]
    spec: Option<PathBuf>,
    /// Name of a bundled spec instead of a file (arducopter, ap-rcin, motion-3, ...).
    #[arg(long)]
    bundled: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override every task's iteration count.
    #[arg(long)]
    iterations: Option<u64>,
    /// Leave out the per-instance boundary syscalls.
    #[arg(long)]
    no_boundaries: bool,
    /// Anomaly spec JSON to splice in.
    #[arg(long)]
    anomaly: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    top_n: usize,
    /// none, max or musigma:K
    #[arg(long, default_value = "max")]
    policy: String,
    /// Comma-separated boundary syscall numbers (default: per-arch set).
    #[arg(long, value_delimiter = ',')]
    boundaries: Option<Vec<u64>>,
    /// Allow sequences seen only once to become templates.
    #[arg(long)]
    include_low_support: bool,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    templates: PathBuf,
    /// ellipsis or hp
    #[arg(long, default_value = "ellipsis")]
    mode: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    counters: Option<PathBuf>,
    /// Skip the runtime and inter-arrival checks.
    #[arg(long)]
    no_temporal: bool,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    templates: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Original (pre-reduction) log to check the expansion against.
    #[arg(long)]
    verify_against: Option<PathBuf>,
    /// Where to write the retention report (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    synthesize_serials: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// One arrival time in ns per line.
    #[arg(
        long,
        conflicts_with = "from_log",
        required_unless_present = "from_log"
    )]
    arrivals: Option<PathBuf>,
    /// Audit log whose record times are the arrivals.
    #[arg(long)]
    from_log: Option<PathBuf>,
    /// BufferConfig JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    capacity: Option<u64>,
    #[arg(long)]
    drain_period: Option<u64>,
    #[arg(long)]
    drain_burst: Option<u64>,
    #[arg(long)]
    drain_jitter: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 10_000_000)]
    sample_period: u64,
    /// Occupancy samples CSV.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Also search for the smallest lossless capacity.
    #[arg(long)]
    min_capacity: bool,
    /// SimResult JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// TaskParams JSON: one object, an array, or a learner stats file.
    #[arg(long)]
    params: PathBuf,
    /// Reducer counters JSON to compare against.
    #[arg(long)]
    counters: Option<PathBuf>,
    /// Which prediction the counters are compared with: audit, ellipsis or hp.
    #[arg(long, default_value = "ellipsis")]
    predict: String,
    #[arg(long, default_value_t = 0.03)]
    tolerance: f64,
    /// Evaluate over exact rationals.
    #[arg(long)]
    exact: bool,
    /// Print a table instead of JSON.
    #[arg(long)]
    table: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ELLIPSIS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Learn(a) => cmd_learn(a),
        Cmd::Reduce(a) => cmd_reduce(a),
        Cmd::Reconstruct(a) => cmd_reconstruct(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Analyze(a) => cmd_analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(e) | Failure::Input(e) | Failure::Verification(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

fn print_json(v: &Value) -> Res<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).input()?;
    writeln!(out).input()
}

fn write_json(path: &Path, v: &Value) -> Res<()> {
    let text = serde_json::to_string_pretty(v).input()?;
    fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .input()
}

/// Attach the schema version to a serializable value.
fn versioned<T: Serialize>(v: &T) -> Value {
    let mut v = serde_json::to_value(v).expect("plain data serializes");
    if let Value::Object(m) = &mut v {
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    v
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .input()
}

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .input()
}

/// Parsed records of a log with their original text; blank lines skipped.
fn read_log(path: &Path) -> Res<Vec<(AuditRecord, Arc<str>)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line
            .with_context(|| format!("{}: read error", path.display()))
            .input()?;
        if line.trim().is_empty() {
            continue;
        }
        let r = parse_record(&line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))
            .input()?;
        out.push((r, Arc::from(line)));
    }
    Ok(out)
}

fn read_records(path: &Path) -> Res<Vec<AuditRecord>> {
    Ok(read_log(path)?.into_iter().map(|(r, _)| r).collect())
}

fn cmd_generate(a: GenerateArgs) -> Res<()> {
    let mut spec = match (&a.spec, &a.bundled) {
        (Some(p), _) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read spec {}", p.display()))
                .config()?;
            WorkloadSpec::from_json(&text).config()?
        }
        (None, Some(name)) => bundled_spec(name).config()?,
        (None, None) => return Err(Failure::Config(anyhow!("--spec or --bundled is required"))),
    };
    if let Some(seed) = a.seed {
        spec = spec.with_seed(seed);
    }
    if let Some(i) = a.iterations {
        spec = spec.with_iterations(i);
    }
    if a.no_boundaries {
        for t in &mut spec.tasks {
            t.boundary_syscall = None;
        }
    }
    spec.validate().config()?;
    let mut w = create(&a.out)?;
    let mut records = 0u64;
    let mut bytes = 0u64;
    let mut emit = |r: &AuditRecord, w: &mut BufWriter<File>| -> Res<()> {
        let line = r.to_string();
        bytes += line.len() as u64 + 1;
        records += 1;
        writeln!(w, "{line}").input()
    };
    if let Some(path) = &a.anomaly {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read anomaly {}", path.display()))
            .config()?;
        let anomaly: AnomalySpec = serde_json::from_str(&text).config()?;
        let stream: Vec<AuditRecord> = Generator::new(&spec).config()?.collect();
        for r in &inject(stream, &anomaly) {
            emit(r, &mut w)?;
        }
    } else {
        for r in Generator::new(&spec).config()? {
            emit(&r, &mut w)?;
        }
    }
    w.flush().input()?;
    info!("wrote {records} records to {}", a.out.display());
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "records": records,
        "bytes": bytes,
        "mean_record_bytes": if records == 0 { 0.0 } else { bytes as f64 / records as f64 },
        "seed": spec.seed,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    file: String,
    binding: TaskBinding,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    templates: Vec<ManifestEntry>,
}

fn template_file_name(name: &str) -> String {
    format!("{name}.tpl")
}

fn save_templates(dir: &Path, set: &TemplateSet) -> Res<Manifest> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .input()?;
    let mut entries = Vec::new();
    for (binding, t) in set.iter() {
        let file = template_file_name(&t.name);
        fs::write(dir.join(&file), serialize_template(t))
            .with_context(|| format!("cannot write template {file}"))
            .input()?;
        entries.push(ManifestEntry {
            name: t.name.clone(),
            file,
            binding: binding.clone(),
        });
    }
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        templates: entries,
    };
    write_json(
        &dir.join(MANIFEST),
        &serde_json::to_value(&m).expect("plain data"),
    )?;
    Ok(m)
}

/// Templates from a directory. With a manifest its bindings and order are
/// used; otherwise every `*.tpl` file is bound to the `comm` equal to the
/// template's name.
fn load_templates(dir: &Path) -> Res<TemplateSet> {
    let mut set = TemplateSet::new();
    let manifest = dir.join(MANIFEST);
    let entries: Vec<(PathBuf, Option<TaskBinding>)> = if manifest.exists() {
        let text = fs::read_to_string(&manifest).input()?;
        let m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("bad manifest {}", manifest.display()))
            .input()?;
        m.templates
            .into_iter()
            .map(|e| (dir.join(e.file), Some(e.binding)))
            .collect()
    } else {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("cannot read template dir {}", dir.display()))
            .input()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tpl"))
            .collect();
        files.sort();
        files.into_iter().map(|p| (p, None)).collect()
    };
    for (path, binding) in entries {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read template {}", path.display()))
            .input()?;
        let t = parse_template_file(&text)
            .with_context(|| format!("template {}", path.display()))
            .input()?;
        let binding = binding.unwrap_or_else(|| TaskBinding::Comm(t.name.clone()));
        set.insert(binding, t).input()?;
    }
    debug!("loaded {} templates from {}", set.len(), dir.display());
    Ok(set)
}

fn cmd_learn(a: LearnArgs) -> Res<()> {
    let policy: TemporalPolicy = a.policy.parse().config()?;
    let cfg = LearnConfig {
        boundaries: a
            .boundaries
            .map_or_else(Boundaries::default, Boundaries::explicit),
        top_n: a.top_n,
        policy,
        include_low_support: a.include_low_support,
    };
    let records = read_records(&a.trace)?;
    let out = learn(&records, &cfg).input()?;
    let manifest = save_templates(&a.out_dir, &out.templates)?;
    let stats = json!({
        "schema_version": SCHEMA_VERSION,
        "policy": policy.to_string(),
        "top_n": a.top_n,
        "records": records.len(),
        "tasks": out.reports,
    });
    write_json(&a.out_dir.join("stats.json"), &stats)?;
    info!("learned {} templates", manifest.templates.len());
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "templates": manifest.templates.iter().map(|e| &e.name).collect::<Vec<_>>(),
        "tasks": out.reports.len(),
    }))
}

fn cmd_reduce(a: ReduceArgs) -> Res<()> {
    let mode: Mode = a
        .mode
        .parse()
        .map_err(|e: String| Failure::Config(anyhow!(e)))?;
    let set = load_templates(&a.templates)?;
    let temporal = if a.no_temporal {
        TemporalOverride::DISABLED
    } else {
        TemporalOverride::default()
    };
    let mut red = StreamReducer::new(&set, mode, temporal).input()?;
    let mut w = create(&a.out)?;
    let path = &a.input;
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.input()?;
        if line.trim().is_empty() {
            continue;
        }
        let r = parse_record(&line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))
            .input()?;
        for e in red.push(r, Some(Arc::from(line))).input()? {
            writeln!(w, "{}", e.line()).input()?;
        }
    }
    let (rest, counters) = red.finish();
    for e in rest {
        writeln!(w, "{}", e.line()).input()?;
    }
    w.flush().input()?;
    let mut v = versioned(&counters);
    if let Value::Object(m) = &mut v {
        m.insert("mode".into(), json!(mode));
        m.insert("byte_reduction".into(), json!(counters.byte_reduction()));
        m.insert("event_reduction".into(), json!(counters.event_reduction()));
    }
    match &a.counters {
        Some(p) => write_json(p, &v)?,
        None => print_json(&v)?,
    }
    info!(
        "{} -> {} events, {:.1}% fewer bytes",
        counters.events_in,
        counters.events_out,
        100.0 * counters.byte_reduction()
    );
    Ok(())
}

fn cmd_reconstruct(a: ReconstructArgs) -> Res<()> {
    let set = load_templates(&a.templates)?;
    let opts = ReconstructOptions {
        synthesize_serials: a.synthesize_serials,
    };
    let reduced = read_records(&a.input)?;
    let mut rc = Reconstructor::new(&set, opts);
    let mut w = create(&a.out)?;
    let mut written = 0u64;
    for r in &reduced {
        for e in rc.push(r).input()? {
            writeln!(w, "{}", e.record).input()?;
            written += 1;
        }
    }
    w.flush().input()?;
    let Some(orig_path) = &a.verify_against else {
        return print_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "reduced_records": reduced.len(),
            "reconstructed_records": written,
        }));
    };
    let original = read_records(orig_path)?;
    let (report, failure) = match verify_retention(&original, &reduced, &set) {
        Ok(rep) => (
            json!({ "schema_version": SCHEMA_VERSION, "ok": true, "report": rep }),
            None,
        ),
        Err(VerifyError::Violation(v)) => (
            json!({ "schema_version": SCHEMA_VERSION, "ok": false, "violation": v }),
            Some(Failure::Verification(anyhow!("{v}"))),
        ),
        Err(e @ VerifyError::Reconstruct(_)) => return Err(Failure::Input(e.into())),
    };
    match &a.report {
        Some(p) => write_json(p, &report)?,
        None => print_json(&report)?,
    }
    failure.map_or(Ok(()), Err)
}

fn cmd_simulate(a: SimulateArgs) -> Res<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))
                .config()?;
            serde_json::from_str::<BufferConfig>(&text).config()?
        }
        None => BufferConfig {
            capacity: ellipsis_core::buffer_sim::DEFAULT_CAPACITY,
            drain: DrainParams {
                drain_period_ns: 0,
                drain_burst: 0,
                drain_jitter_ns: 0,
                seed: 0,
            },
        },
    };
    if let Some(c) = a.capacity {
        cfg.capacity = c;
    }
    if let Some(p) = a.drain_period {
        cfg.drain.drain_period_ns = p;
    }
    if let Some(b) = a.drain_burst {
        cfg.drain.drain_burst = b;
    }
    if let Some(j) = a.drain_jitter {
        cfg.drain.drain_jitter_ns = j;
    }
    if let Some(s) = a.seed {
        cfg.drain.seed = s;
    }
    cfg.validate().config()?;

    let arrivals = match (&a.arrivals, &a.from_log) {
        (Some(p), _) => {
            let mut v = Vec::new();
            for (i, line) in open(p)?.lines().enumerate() {
                let line = line.input()?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let t: u64 = line
                    .parse()
                    .with_context(|| format!("{}:{}: not a timestamp", p.display(), i + 1))
                    .input()?;
                v.push(t);
            }
            if v.windows(2).any(|w| w[0] > w[1]) {
                warn!("arrivals are not sorted; sorting");
                v.sort_unstable();
            }
            v
        }
        (None, Some(p)) => arrivals_from_records(&read_records(p)?),
        (None, None) => {
            return Err(Failure::Config(anyhow!(
                "--arrivals or --from-log is required"
            )))
        }
    };
    let res = simulate(&arrivals, &cfg, a.sample_period);
    if let Some(p) = &a.samples {
        write_samples_csv(create(p)?, &res.occupancy_samples).input()?;
    }
    let mut v = versioned(&res);
    if let Value::Object(m) = &mut v {
        m.insert("config".into(), json!(cfg));
        m.insert(
            "max_utilization".into(),
            json!(res.max_utilization(cfg.capacity)),
        );
        if a.min_capacity {
            m.insert(
                "min_capacity_for_lossless".into(),
                json!(min_capacity_for_lossless(&arrivals, &cfg.drain)),
            );
        }
    }
    match &a.out {
        Some(p) => write_json(p, &v),
        None => print_json(&v),
    }
}

#[derive(Debug, Serialize)]
struct TaskAnalysis {
    name: Option<String>,
    events_audit: f64,
    events_ellipsis: f64,
    event_reduction: f64,
    log_size_audit: f64,
    log_size_ellipsis: f64,
    size_reduction: f64,
    events_hp_best: f64,
    log_size_hp_best: f64,
    template_memory: u64,
    identities_hold: bool,
}

fn analyze_one(tp: &TaskParams<f64>, exact: bool) -> TaskAnalysis {
    let mem = tp.template_memory(MemoryCosts::default());
    if exact {
        let q: ExactTaskParams = tp.convert();
        let v = |x| Scalar::to_f64(&x);
        let identities_hold = q.event_reduction() == q.events_audit() - q.events_ellipsis()
            && q.size_reduction() == q.log_size_audit() - q.log_size_ellipsis();
        return TaskAnalysis {
            name: tp.name.clone(),
            events_audit: v(q.events_audit()),
            events_ellipsis: v(q.events_ellipsis()),
            event_reduction: v(q.event_reduction()),
            log_size_audit: v(q.log_size_audit()),
            log_size_ellipsis: v(q.log_size_ellipsis()),
            size_reduction: v(q.size_reduction()),
            events_hp_best: v(q.events_hp_best()),
            log_size_hp_best: v(q.log_size_hp_best()),
            template_memory: mem,
            identities_hold,
        };
    }
    let ea = tp.events_audit();
    let ee = tp.events_ellipsis();
    let la = tp.log_size_audit();
    let le = tp.log_size_ellipsis();
    let identities_hold = (tp.event_reduction() - (ea - ee)).abs() <= 1e-9 * ea.abs().max(1.0)
        && (tp.size_reduction() - (la - le)).abs() <= 1e-6 * la.abs().max(1.0);
    TaskAnalysis {
        name: tp.name.clone(),
        events_audit: ea,
        events_ellipsis: ee,
        event_reduction: tp.event_reduction(),
        log_size_audit: la,
        log_size_ellipsis: le,
        size_reduction: tp.size_reduction(),
        events_hp_best: tp.events_hp_best(),
        log_size_hp_best: tp.log_size_hp_best(),
        template_memory: mem,
        identities_hold,
    }
}

fn parse_params(v: Value) -> Res<Vec<TaskParams<f64>>> {
    let items = match v {
        Value::Array(a) => a,
        Value::Object(mut m) if m.contains_key("tasks") => match m.remove("tasks") {
            Some(Value::Array(a)) => a,
            _ => return Err(Failure::Input(anyhow!("`tasks` must be an array"))),
        },
        other => vec![other],
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            TaskParams::from_json_value(v).map_err(|e| Failure::Input(anyhow!("task {i}: {e}")))
        })
        .collect()
}

fn cmd_analyze(a: AnalyzeArgs) -> Res<()> {
    let prediction = match a.predict.as_str() {
        "audit" => Prediction::LinuxAudit,
        "ellipsis" => Prediction::Ellipsis,
        "hp" => Prediction::EllipsisHpBest,
        other => return Err(Failure::Config(anyhow!("unknown prediction `{other}`"))),
    };
    if !(a.tolerance >= 0.0) {
        return Err(Failure::Config(anyhow!("tolerance must be nonnegative")));
    }
    let text = fs::read_to_string(&a.params)
        .with_context(|| format!("cannot read {}", a.params.display()))
        .input()?;
    let v: Value = serde_json::from_str(&text).input()?;
    let params = parse_params(v)?;
    let tasks: Vec<TaskAnalysis> = params.iter().map(|tp| analyze_one(tp, a.exact)).collect();

    let comparison = match &a.counters {
        None => None,
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .input()?;
            let counters = serde_json::from_str(&text)
                .with_context(|| format!("bad counters {}", p.display()))
                .input()?;
            // several tasks: compare the summed prediction with the totals
            let parts: Vec<ComparisonReport> = params
                .iter()
                .map(|tp| compare(tp, &counters, prediction, a.tolerance))
                .collect();
            let mut total = parts
                .first()
                .cloned()
                .ok_or_else(|| Failure::Input(anyhow!("no task parameters")))?;
            total.predicted_events = parts.iter().map(|c| c.predicted_events).sum();
            total.predicted_bytes = parts.iter().map(|c| c.predicted_bytes).sum();
            let rel = |p: f64, m: u64| (m as f64 - p).abs() / p.abs().max(f64::MIN_POSITIVE);
            total.events_rel_error = rel(total.predicted_events, total.measured_events);
            total.bytes_rel_error = rel(total.predicted_bytes, total.measured_bytes);
            total.within_tolerance = total.events_rel_error <= a.tolerance;
            Some(total)
        }
    };

    if a.table {
        let mut out = io::stdout().lock();
        let _ = writeln!(
            out,
            "{:<16} {:>12} {:>12} {:>12} {:>12} {:>14} {:>14} {:>8}",
            "task", "E_A", "E_E", "E_A-E_E", "E_HP", "L_A", "L_E", "M"
        );
        for t in &tasks {
            let _ = writeln!(
                out,
                "{:<16} {:>12.2} {:>12.2} {:>12.2} {:>12.2} {:>14.0} {:>14.0} {:>8}",
                t.name.as_deref().unwrap_or("-"),
                t.events_audit,
                t.events_ellipsis,
                t.event_reduction,
                t.events_hp_best,
                t.log_size_audit,
                t.log_size_ellipsis,
                t.template_memory
            );
        }
        if let Some(c) = &comparison {
            let _ = writeln!(
                out,
                "measured {} events vs predicted {:.2} ({:+.2}%), {}",
                c.measured_events,
                c.predicted_events,
                100.0 * c.events_rel_error,
                if c.within_tolerance {
                    "within tolerance"
                } else {
                    "OUT OF TOLERANCE"
                }
            );
        }
    } else {
        print_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "exact": a.exact,
            "tasks": tasks,
            "total_template_memory": tasks.iter().map(|t| t.template_memory).sum::<u64>(),
            "comparison": comparison,
        }))?;
    }
    if let Some(t) = tasks.iter().find(|t| !t.identities_hold) {
        return Err(Failure::Verification(anyhow!(
            "reduction identities do not hold for {}",
            t.name.as_deref().unwrap_or("task")
        )));
    }
    if let Some(c) = comparison.filter(|c| !c.within_tolerance) {
        return Err(Failure::Verification(anyhow!(
            "measured {} events, predicted {:.2}: relative error {:.4} exceeds {}",
            c.measured_events,
            c.predicted_events,
            c.events_rel_error,
            c.tolerance
        )));
    }
    Ok(())
}
