//! Batch sweeps over `(method, n, K)` with run manifests.
//!
//! Config files are flat `key = value` text, one entry per line:
//!
//! ```text
//! # comments run to end of line
//! K_grid     = 0.80:0.02:1.10       # start:step:stop, or a list: 0.8, 0.9, 1.0
//! depth      = 8                    # number of golden-mean convergents
//! methods    = greene, nch          # any of greene, nch, chirikov
//! output_dir = "runs/a"             # strings may be quoted
//! threads    = 4                    # KAMCRIT_THREADS takes precedence
//! tol.threshold_width = 1e-6        # final bracket width of K*(n)
//! tol.dk_max = 0.05                 # largest continuation step along the grid
//! ```
//!
//! Keys may appear once. Unknown keys are errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::criteria::{
    check_grid, chirikov_kcrit, extrapolate, measure_overlap, nch_distance_curve_with, nch_from_curves,
    CriterionResult, DistanceCurve, Method,
};
use crate::error::{Error, Result};
use crate::map::Stochasticity;
use crate::orbit::{fibonacci_convergents, Convergent, Family, DEFAULT_DK_MAX};
use crate::stability::{destabilization_threshold_with, THRESHOLD_WIDTH};

pub const THREADS_ENV: &str = "KAMCRIT_THREADS";
pub const DEFAULT_DEPTH: usize = 8;
pub const DEFAULT_GRID: (f64, f64, f64) = (0.80, 0.02, 1.10);
pub const DEFAULT_OUTPUT_DIR: &str = "kamcrit-scan";
const STAGING_DIR: &str = ".staging";
/// Label of greene rows in the `K_or_stat` column.
pub const K_STAR: &str = "K_star";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dk_max: Option<f64>,
}

impl Tolerances {
    pub fn threshold_width(&self) -> f64 {
        self.threshold_width.unwrap_or(THRESHOLD_WIDTH)
    }

    pub fn dk_max(&self) -> f64 {
        self.dk_max.unwrap_or(DEFAULT_DK_MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    #[serde(rename = "K_grid")]
    pub k_grid: Vec<f64>,
    pub depth: usize,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let (a, h, b) = DEFAULT_GRID;
        Self {
            k_grid: expand_range(a, h, b).expect("default grid"),
            depth: DEFAULT_DEPTH,
            methods: Vec::new(),
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            tolerances: Tolerances::default(),
            threads: None,
        }
    }
}

/// Rounds away the representation noise of `start + i*step`.
fn tidy(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Inclusive range `start:step:stop`.
pub fn expand_range(start: f64, step: f64, stop: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) || step <= 0.0 || stop < start {
        return Err(Error::Config(format!("bad range {start}:{step}:{stop}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    if count > 1_000_000 {
        return Err(Error::Config(format!("range {start}:{step}:{stop} is too long")));
    }
    Ok((0..=count).map(|i| tidy(start + i as f64 * step)).collect())
}

fn parse_real(key: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: {s:?} is not a real number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{key}: {s:?} is not finite")));
    }
    Ok(v)
}

fn parse_reals(key: &str, s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "{key}: range must be start:step:stop, got {s:?}"
            )));
        }
        return expand_range(
            parse_real(key, parts[0])?,
            parse_real(key, parts[1])?,
            parse_real(key, parts[2])?,
        );
    }
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| parse_real(key, x))
        .collect()
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"').and_then(|t| t.strip_suffix('"')).unwrap_or(s)
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

impl ScanConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScanConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            let value = value.trim();
            match key {
                "K_grid" => cfg.k_grid = parse_reals(key, unquote(value))?,
                "depth" => {
                    cfg.depth = unquote(value)
                        .parse()
                        .map_err(|_| Error::Config(format!("depth: {value:?} is not a positive integer")))?
                }
                "methods" => {
                    cfg.methods = unquote(value)
                        .split(',')
                        .filter(|m| !m.trim().is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                "output_dir" => cfg.output_dir = PathBuf::from(unquote(value)),
                "threads" => {
                    cfg.threads = Some(unquote(value).parse().map_err(|_| {
                        Error::Config(format!("threads: {value:?} is not a positive integer"))
                    })?)
                }
                "tol.threshold_width" => {
                    cfg.tolerances.threshold_width = Some(parse_real(key, unquote(value))?)
                }
                "tol.dk_max" => cfg.tolerances.dk_max = Some(parse_real(key, unquote(value))?),
                other => return Err(Error::Config(format!("line {}: unknown key {other}", lineno + 1))),
            }
        }
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn normalize(&mut self) {
        self.methods.sort();
        self.methods.dedup();
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        check_grid(&self.k_grid, 1).map_err(|e| Error::Config(format!("K_grid: {e}")))?;
        if let Some(w) = self.tolerances.threshold_width {
            if w <= 0.0 {
                return Err(Error::Config("tol.threshold_width must be positive".into()));
            }
        }
        if let Some(d) = self.tolerances.dk_max {
            if d <= 0.0 {
                return Err(Error::Config("tol.dk_max must be positive".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical))
    }

    pub fn tasks(&self) -> Result<Vec<Task>> {
        let cs = fibonacci_convergents(self.depth)?;
        let mut out = Vec::new();
        for m in &self.methods {
            match m {
                Method::Greene => out.extend(cs.iter().map(|&c| Task::Greene(c))),
                Method::Nch => out.extend(cs.iter().map(|&c| Task::Nch(c))),
                Method::Chirikov => out.extend(self.k_grid.iter().map(|&k| Task::Chirikov(k))),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    Greene(Convergent),
    Nch(Convergent),
    Chirikov(f64),
}

impl Task {
    pub fn method(&self) -> Method {
        match self {
            Task::Greene(_) => Method::Greene,
            Task::Nch(_) => Method::Nch,
            Task::Chirikov(_) => Method::Chirikov,
        }
    }

    pub fn id(&self) -> String {
        match self {
            Task::Greene(c) => format!("greene-n{}", c.n),
            Task::Nch(c) => format!("nch-n{}", c.n),
            Task::Chirikov(k) => format!("chirikov-K{k}"),
        }
    }

    fn run(&self, cfg: &ScanConfig) -> Result<Vec<Row>> {
        let tol = &cfg.tolerances;
        match *self {
            Task::Greene(c) => {
                let kstar = destabilization_threshold_with(c, Family::Rational, tol.threshold_width())?;
                Ok(vec![Row::new(Method::Greene, c.n, K_STAR.into(), kstar)])
            }
            Task::Nch(c) => {
                let curve = nch_distance_curve_with(c, &cfg.k_grid, tol.dk_max())?;
                if let Some(k) = curve.truncated_at {
                    return Err(Error::Continuation {
                        last_good_k: curve.samples.last().map_or(f64::NAN, |s| s.0),
                        target_k: k,
                        reason: "orbit pair lost along the grid".into(),
                    });
                }
                Ok(curve
                    .samples
                    .iter()
                    .map(|&(k, d)| Row::new(Method::Nch, c.n, fmt_k(k), d))
                    .collect())
            }
            Task::Chirikov(k) => {
                let m = measure_overlap(Stochasticity::new(k)?)?;
                Ok(vec![Row::new(Method::Chirikov, 0, fmt_k(k), m.rho)])
            }
        }
    }
}

fn fmt_k(k: f64) -> String {
    format!("{k}")
}

/// One line of a result table. Greene rows carry `K_star` in `K_or_stat`;
/// chirikov rows use `n = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: Method,
    pub n: u64,
    #[serde(rename = "K_or_stat")]
    pub k_or_stat: String,
    pub value: f64,
}

impl Row {
    pub fn new(method: Method, n: u64, k_or_stat: String, value: f64) -> Self {
        Self {
            method,
            n,
            k_or_stat,
            value,
        }
    }

    fn key(&self) -> (Method, u64, String) {
        (self.method, self.n, self.k_or_stat.clone())
    }

    fn sort_key(&self) -> (Method, u64, f64, String) {
        let k = self.k_or_stat.parse().unwrap_or(f64::NEG_INFINITY);
        (self.method, self.n, k, self.k_or_stat.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub method: Method,
    /// `ok` or `failed(<reason>)`.
    pub status: String,
}

impl TaskRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ScanConfig,
    pub config_sha256: String,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub threads: usize,
    pub tasks: Vec<TaskRecord>,
    pub task_count: usize,
    pub failure_count: usize,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn succeeded(&self) -> usize {
        self.task_count - self.failure_count
    }
}

/// Writes through a sibling staging file and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn rows_to_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["method", "n", "K_or_stat", "value"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub fn rows_from_csv(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Worker count: `KAMCRIT_THREADS`, then the config, then rayon's default.
pub fn worker_count(cfg_threads: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be >= 1")));
        }
        return Ok(n);
    }
    Ok(cfg_threads.unwrap_or_else(rayon::current_num_threads))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn summarize(method: Method, rows: &[Row], cfg: &ScanConfig) -> Value {
    let result: Result<CriterionResult> = match method {
        Method::Greene => {
            let per_n: Vec<(u64, f64)> = rows.iter().map(|r| (r.n, r.value)).collect();
            if per_n.is_empty() {
                Err(Error::Criterion("no thresholds".into()))
            } else {
                let seq: Vec<f64> = per_n.iter().map(|x| x.1).collect();
                let (k_crit, scheme) = extrapolate(&seq);
                let mut diagnostics = serde_json::Map::new();
                diagnostics.insert("extrapolation".into(), json!(scheme));
                Ok(CriterionResult {
                    method,
                    k_crit,
                    per_n,
                    diagnostics,
                })
            }
        }
        Method::Nch => {
            let mut curves: BTreeMap<u64, DistanceCurve> = BTreeMap::new();
            for r in rows {
                let k: f64 = r.k_or_stat.parse().unwrap_or(f64::NAN);
                curves
                    .entry(r.n)
                    .or_insert_with(|| DistanceCurve {
                        n: r.n,
                        samples: Vec::new(),
                        truncated_at: None,
                    })
                    .samples
                    .push((k, r.value));
            }
            let cs: Vec<(Convergent, Result<DistanceCurve>)> = fibonacci_convergents(cfg.depth)
                .unwrap_or_default()
                .into_iter()
                .filter_map(|c| curves.remove(&c.n).map(|cv| (c, Ok(cv))))
                .collect();
            nch_from_curves(&cs)
        }
        Method::Chirikov => chirikov_kcrit(&cfg.k_grid),
    };
    let (result, error) = match result {
        Ok(r) => (serde_json::to_value(r).unwrap_or(Value::Null), Value::Null),
        Err(e) => (Value::Null, json!(e.to_string())),
    };
    json!({ "method": method, "rows": rows, "result": result, "error": error })
}

/// Runs every task of `cfg`, writing `<method>.csv`, `<method>.json` and
/// `manifest.json` into the output directory. Failed tasks are recorded in
/// the manifest and never stop the others.
pub fn run_scan(cfg: &ScanConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let tasks = cfg.tasks()?;
    let started = now();
    let threads = worker_count(cfg.threads)?;
    let out = &cfg.output_dir;
    let staging = out.join(STAGING_DIR);
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let statuses: Vec<String> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let staged = staging.join(format!("{}.csv", t.id()));
                match t
                    .run(cfg)
                    .and_then(|rows| write_atomic(&staged, &rows_to_csv(&rows)?))
                {
                    Ok(()) => "ok".to_string(),
                    Err(e) => format!("failed({})", e.to_string().replace(['\n', '\r'], " ")),
                }
            })
            .collect()
    });

    let mut records = Vec::with_capacity(tasks.len());
    let mut by_method: BTreeMap<Method, Vec<Row>> = cfg.methods.iter().map(|m| (*m, Vec::new())).collect();
    for (t, status) in tasks.iter().zip(statuses) {
        if status == "ok" {
            let staged = staging.join(format!("{}.csv", t.id()));
            by_method
                .entry(t.method())
                .or_default()
                .extend(rows_from_csv(&staged)?);
        }
        records.push(TaskRecord {
            id: t.id(),
            method: t.method(),
            status,
        });
    }
    let mut outputs = Vec::new();
    for (method, rows) in &by_method {
        let csv_name = format!("{method}.csv");
        write_atomic(&out.join(&csv_name), &rows_to_csv(rows)?)?;
        let json_name = format!("{method}.json");
        let summary = pool.install(|| summarize(*method, rows, cfg));
        write_atomic(&out.join(&json_name), &serde_json::to_vec_pretty(&summary)?)?;
        outputs.push(csv_name);
        outputs.push(json_name);
    }
    fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    let failure_count = records.iter().filter(|r| !r.ok()).count();
    let manifest = RunManifest {
        config: cfg.clone(),
        config_sha256: cfg.content_hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        threads,
        task_count: records.len(),
        failure_count,
        tasks: records,
        outputs,
    };
    write_atomic(&out.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Union of the result tables of several runs, keyed by `(method, n, K)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergedTables {
    pub tables: BTreeMap<Method, Vec<Row>>,
}

impl MergedTables {
    pub fn row_count(&self) -> usize {
        self.tables.values().map(Vec::len).sum()
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (method, rows) in &self.tables {
            let path = dir.join(format!("{method}.csv"));
            write_atomic(&path, &rows_to_csv(rows)?)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn merge_results(dirs: &[PathBuf]) -> Result<MergedTables> {
    let mut seen: BTreeMap<(Method, u64, String), Row> = BTreeMap::new();
    let mut conflicts = Vec::new();
    for dir in dirs {
        let manifest_path = dir.join("manifest.json");
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        for m in &manifest.config.methods {
            let path = dir.join(format!("{m}.csv"));
            for row in rows_from_csv(&path)? {
                match seen.get(&row.key()) {
                    Some(prev) if prev.value.to_bits() != row.value.to_bits() => conflicts.push(format!(
                        "method={} n={} K_or_stat={}: {} vs {} ({})",
                        row.method,
                        row.n,
                        row.k_or_stat,
                        prev.value,
                        row.value,
                        dir.display()
                    )),
                    Some(_) => {}
                    None => {
                        seen.insert(row.key(), row);
                    }
                }
            }
        }
    }
    if !conflicts.is_empty() {
        return Err(Error::MergeConflict(conflicts));
    }
    let mut tables: BTreeMap<Method, Vec<Row>> = BTreeMap::new();
    for row in seen.into_values() {
        tables.entry(row.method).or_default().push(row);
    }
    for rows in tables.values_mut() {
        rows.sort_by(|a, b| {
            let (ka, kb) = (a.sort_key(), b.sort_key());
            ka.0.cmp(&kb.0)
                .then(ka.1.cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
                .then(ka.3.cmp(&kb.3))
        });
    }
    Ok(MergedTables { tables })
}
