use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use kamcrit::criteria::{
    self, greene_kcrit, measure_overlap, measured_crossing, nch_curves, nch_from_curves, pendulum_crossing,
    Method,
};
use kamcrit::map::{reduce_to_torus, trajectory, Stochasticity};
use kamcrit::orbit::{alternate_orbit, rational_orbit, Convergent, PeriodicOrbit};
use kamcrit::scan::{self, merge_results, rows_to_csv, run_scan, write_atomic, Row, ScanConfig};
use kamcrit::stability::{classify, destabilization_threshold, monodromy, stability_record};

mod seeds;

#[derive(Parser)]
#[command(
    name = "kamcrit",
    version,
    about = "Standard-map periodic orbits and KAM breakup estimates"
)]
struct Cli {
    /// Worker threads; subcommands other than scan run single-threaded without it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the periodic orbit of winding m/n at K.
    Orbit(OrbitArgs),
    /// Monodromy trace, residue and class of an orbit; optionally its destabilization K.
    Residue(ResidueArgs),
    /// Greene estimate of the golden-mean breakup K.
    KcritGreene(GreeneArgs),
    /// Estimate from the minimum distance between rational and alternate iterates.
    KcritNch(NchArgs),
    /// Overlap ratio of the two integer resonances.
    Chirikov(ChirikovArgs),
    /// Iterate seeds and write torus-reduced points for plotting.
    Portrait(PortraitArgs),
    /// Batch sweep from a config file, or merge earlier sweeps.
    Scan(ScanArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Rational,
    Alternate,
}

#[derive(Args)]
struct OrbitSpec {
    #[arg(long)]
    m: u64,
    #[arg(long)]
    n: u64,
    /// Stochasticity parameter.
    #[arg(long = "K", visible_alias = "k", default_value_t = 0.5)]
    k: f64,
    #[arg(long, value_enum, default_value = "rational")]
    family: FamilyArg,
    /// Index of the alternate family.
    #[arg(long, default_value_t = 1)]
    j: u32,
}

#[derive(Args)]
struct OrbitArgs {
    #[command(flatten)]
    spec: OrbitSpec,
    /// Output file, .json or .csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResidueArgs {
    #[command(flatten)]
    spec: OrbitSpec,
    /// Also locate the K where the residue crosses 1.
    #[arg(long)]
    threshold: bool,
    /// Output file, .json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GreeneArgs {
    /// Number of golden-mean convergents (8 reaches n = 55).
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// Output file, .json or .csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NchArgs {
    #[arg(long, default_value_t = 8)]
    depth: usize,
    /// K grid as start:step:stop or a comma list.
    #[arg(long, default_value = "0.80:0.02:1.10")]
    grid: String,
    /// Output file, .json or .csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChirikovArgs {
    /// K values as start:step:stop or a comma list.
    #[arg(long = "K", visible_alias = "k", default_value = "0.1:0.1:1.0")]
    k: String,
    /// Also locate the rho = 1 crossing (measured and pendulum).
    #[arg(long)]
    crossing: bool,
    /// Output file, .json or .csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PortraitArgs {
    #[arg(long = "K", visible_alias = "k")]
    k: f64,
    /// A count of seeds spaced evenly along q = 0, or pairs "(q,p);(q,p)".
    #[arg(long, default_value = "16")]
    seeds: String,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Config file in the key = value grammar.
    #[arg(long, required_unless_present = "merge", conflicts_with = "merge")]
    config: Option<PathBuf>,
    /// Directories of earlier runs to merge.
    #[arg(long, num_args = 1..)]
    merge: Vec<PathBuf>,
    /// Output directory; overrides output_dir of the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Numeric(anyhow::Error),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let numeric = e
            .chain()
            .any(|c| c.downcast_ref::<kamcrit::Error>().is_some_and(|k| k.is_numeric()));
        if numeric {
            Failure::Numeric(e)
        } else {
            Failure::Usage(e)
        }
    }
}

impl From<kamcrit::Error> for Failure {
    fn from(e: kamcrit::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Command::Scan(args) = cli.command {
        if let Some(t) = cli.threads {
            if t == 0 {
                return Err(Failure::Usage(anyhow::anyhow!("--threads must be >= 1")));
            }
            std::env::set_var(scan::THREADS_ENV, t.to_string());
        }
        return cmd_scan(args);
    }
    let threads = cli.threads.unwrap_or(1);
    if threads == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--threads must be >= 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("setting up worker threads")?;
    match cli.command {
        Command::Orbit(a) => cmd_orbit(a),
        Command::Residue(a) => cmd_residue(a),
        Command::KcritGreene(a) => cmd_greene(a),
        Command::KcritNch(a) => cmd_nch(a),
        Command::Chirikov(a) => cmd_chirikov(a),
        Command::Portrait(a) => cmd_portrait(a),
        Command::Scan(_) => unreachable!(),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Json,
    Csv,
}

fn out_format(path: &Path, allowed: &[Format]) -> std::result::Result<Format, Failure> {
    let f = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        Some("csv") => Format::Csv,
        _ => {
            return Err(Failure::Usage(anyhow::anyhow!(
                "--out {}: extension must be .json or .csv",
                path.display()
            )))
        }
    };
    if !allowed.contains(&f) {
        return Err(Failure::Usage(anyhow::anyhow!(
            "--out {}: unsupported format for this subcommand",
            path.display()
        )));
    }
    Ok(f)
}

fn stochasticity(k: f64) -> std::result::Result<Stochasticity, Failure> {
    Stochasticity::new(k).map_err(|e| Failure::Usage(e.into()))
}

fn convergent(m: u64, n: u64) -> std::result::Result<Convergent, Failure> {
    Convergent::new(m, n).map_err(|e| Failure::Usage(e.into()))
}

fn find_orbit(spec: &OrbitSpec) -> std::result::Result<PeriodicOrbit, Failure> {
    let c = convergent(spec.m, spec.n)?;
    let k = stochasticity(spec.k)?;
    let orbit = match spec.family {
        FamilyArg::Rational => rational_orbit(c, k),
        FamilyArg::Alternate => alternate_orbit(c, k, spec.j),
    };
    orbit.map_err(|e| match e {
        kamcrit::Error::Unsupported(_) | kamcrit::Error::Domain(_) => Failure::Usage(e.into()),
        e => e.into(),
    })
}

fn cmd_orbit(a: OrbitArgs) -> CmdResult {
    let format = a
        .out
        .as_deref()
        .map(|p| out_format(p, &[Format::Json, Format::Csv]))
        .transpose()?;
    let orbit = find_orbit(&a.spec)?;
    let report = classify(&monodromy(&orbit));
    if let (Some(path), Some(format)) = (&a.out, format) {
        let bytes = match format {
            Format::Json => serde_json::to_vec_pretty(&serde_json::json!({
                "orbit": orbit,
                "stability": report,
            }))
            .context("encoding orbit")?,
            Format::Csv => {
                let mut s = String::from("index,q,p,q_torus,p_torus\n");
                for (i, x) in orbit.points.iter().enumerate() {
                    let t = reduce_to_torus(*x);
                    s.push_str(&format!("{i},{},{},{},{}\n", x.q, x.p, t.q, t.p));
                }
                s.into_bytes()
            }
        };
        write_atomic(path, &bytes)?;
    }
    println!(
        "m={} n={} K={} family={} line={} closure_error={:e} residue={} class={}",
        orbit.convergent.m,
        orbit.convergent.n,
        orbit.k,
        orbit.family,
        orbit.symmetry_line.label(),
        orbit.closure_error,
        report.residue,
        report.classification
    );
    Ok(())
}

fn cmd_residue(a: ResidueArgs) -> CmdResult {
    if let Some(p) = &a.out {
        out_format(p, &[Format::Json])?;
    }
    let orbit = find_orbit(&a.spec)?;
    let record = stability_record(&orbit);
    let threshold = if a.threshold {
        Some(destabilization_threshold(orbit.convergent, orbit.family)?)
    } else {
        None
    };
    if let Some(path) = &a.out {
        let mut v = serde_json::to_value(record).context("encoding record")?;
        if let Some(t) = threshold {
            v["K_star"] = serde_json::json!(t);
        }
        write_atomic(path, &serde_json::to_vec_pretty(&v).context("encoding record")?)?;
    }
    let mut line = format!(
        "m={} n={} K={} family={} trace={} residue={} class={} lyapunov={}",
        record.m,
        record.n,
        record.k,
        orbit.family,
        record.report.trace,
        record.report.residue,
        record.report.classification,
        record.report.lyapunov
    );
    if let Some(t) = threshold {
        line.push_str(&format!(" K_star={t}"));
    }
    println!("{line}");
    Ok(())
}

fn result_rows(res: &criteria::CriterionResult, stat: &str) -> Vec<Row> {
    let mut rows: Vec<Row> = res
        .per_n
        .iter()
        .map(|&(n, v)| Row::new(res.method, n, stat.to_string(), v))
        .collect();
    rows.push(Row::new(res.method, 0, "K_crit".into(), res.k_crit));
    rows
}

fn write_result(path: &Path, format: Format, res: &criteria::CriterionResult, rows: &[Row]) -> CmdResult {
    let bytes = match format {
        Format::Json => serde_json::to_vec_pretty(res).context("encoding result")?,
        Format::Csv => rows_to_csv(rows)?,
    };
    write_atomic(path, &bytes)?;
    Ok(())
}

fn cmd_greene(a: GreeneArgs) -> CmdResult {
    if a.depth == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--depth must be >= 1")));
    }
    let format = a
        .out
        .as_deref()
        .map(|p| out_format(p, &[Format::Json, Format::Csv]))
        .transpose()?;
    let res = greene_kcrit(a.depth)?;
    if res.per_n.len() < 3 && a.depth >= 3 {
        return Err(Failure::Numeric(anyhow::anyhow!(
            "only {} of {} thresholds found: {}",
            res.per_n.len(),
            a.depth,
            serde_json::Value::Object(res.diagnostics.clone())
        )));
    }
    if res.per_n.len() < 3 {
        eprintln!("warning: degenerate sequence, K_crit is the last K*(n) without extrapolation");
    }
    if let Some(f) = res.diagnostics.get("failures") {
        eprintln!("warning: some thresholds failed: {f}");
    }
    if let (Some(path), Some(format)) = (&a.out, format) {
        write_result(path, format, &res, &result_rows(&res, scan::K_STAR))?;
    }
    for (n, v) in &res.per_n {
        println!("method=greene n={n} K_star={v}");
    }
    println!(
        "method=greene depth={} K_crit={} orders={}",
        a.depth,
        res.k_crit,
        res.per_n.len()
    );
    Ok(())
}

fn parse_grid(text: &str) -> std::result::Result<Vec<f64>, Failure> {
    // reuse the config grammar so the CLI and scan files agree
    let cfg = ScanConfig::parse(&format!("methods = chirikov\nK_grid = {text}"))?;
    Ok(cfg.k_grid)
}

fn cmd_nch(a: NchArgs) -> CmdResult {
    if a.depth == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--depth must be >= 1")));
    }
    let format = a
        .out
        .as_deref()
        .map(|p| out_format(p, &[Format::Json, Format::Csv]))
        .transpose()?;
    let grid = parse_grid(&a.grid)?;
    if grid.len() < 5 {
        return Err(Failure::Usage(anyhow::anyhow!("--grid needs at least 5 points")));
    }
    let curves = nch_curves(a.depth, &grid)?;
    for (c, curve) in &curves {
        match curve {
            Ok(cv) => {
                let (kmin, dmin) = cv
                    .samples
                    .iter()
                    .copied()
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .unwrap_or((f64::NAN, f64::NAN));
                let minimizer = cv.minimizer().map_or("none".to_string(), |v| v.to_string());
                println!(
                    "method=nch n={} samples={} d_min={dmin} K_at_d_min={kmin} minimizer={minimizer}",
                    c.n,
                    cv.samples.len()
                );
            }
            Err(e) => eprintln!("warning: n={} curve failed: {e}", c.n),
        }
    }
    let res = nch_from_curves(&curves)?;
    if let (Some(path), Some(format)) = (&a.out, format) {
        let mut rows: Vec<Row> = curves
            .iter()
            .filter_map(|(_, c)| c.as_ref().ok())
            .flat_map(|cv| {
                cv.samples
                    .iter()
                    .map(move |&(k, d)| Row::new(Method::Nch, cv.n, k.to_string(), d))
            })
            .collect();
        rows.push(Row::new(Method::Nch, 0, "K_crit".into(), res.k_crit));
        write_result(path, format, &res, &rows)?;
    }
    println!(
        "method=nch depth={} K_crit={} orders={}",
        a.depth,
        res.k_crit,
        res.per_n.len()
    );
    Ok(())
}

fn cmd_chirikov(a: ChirikovArgs) -> CmdResult {
    let format = a
        .out
        .as_deref()
        .map(|p| out_format(p, &[Format::Json, Format::Csv]))
        .transpose()?;
    let grid = parse_grid(&a.k)?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let mut lines = Vec::new();
    for &k in &grid {
        let m = measure_overlap(stochasticity(k)?)?;
        lines.push(format!(
            "method=chirikov K={k} w0={} w1={} rho={} pendulum_rho={}",
            m.w0, m.w1, m.rho, m.pendulum_rho
        ));
        rows.push(Row::new(Method::Chirikov, 0, k.to_string(), m.rho));
        table.push(m);
    }
    let crossing = if a.crossing {
        Some((measured_crossing(0.01, 10.0)?, pendulum_crossing()))
    } else {
        None
    };
    if let (Some(path), Some(format)) = (&a.out, format) {
        let bytes = match format {
            Format::Json => serde_json::to_vec_pretty(&serde_json::json!({
                "method": "chirikov",
                "table": table,
                "measured_crossing": crossing.map(|c| c.0),
                "pendulum_crossing": crossing.map(|c| c.1),
            }))
            .context("encoding table")?,
            Format::Csv => rows_to_csv(&rows)?,
        };
        write_atomic(path, &bytes)?;
    }
    for l in lines {
        println!("{l}");
    }
    if let Some((measured, pendulum)) = crossing {
        println!("method=chirikov measured_crossing={measured} pendulum_crossing={pendulum}");
    }
    Ok(())
}

fn cmd_portrait(a: PortraitArgs) -> CmdResult {
    if a.iters == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--iters must be >= 1")));
    }
    let k = stochasticity(a.k)?;
    let seeds = seeds::parse(&a.seeds).map_err(Failure::Usage)?;
    let mut csv = String::from("seed_id,iter,q,p\n");
    let mut excursion: f64 = 0.0;
    for (id, &x0) in seeds.iter().enumerate() {
        let traj = trajectory(x0, k, a.iters)?;
        for (i, x) in traj.iter().enumerate() {
            excursion = excursion.max((x.p - x0.p).abs());
            let t = reduce_to_torus(*x);
            csv.push_str(&format!("{id},{i},{},{}\n", t.q, t.p));
        }
    }
    let summary = format!(
        "K={} seeds={} iters={} max_p_excursion={excursion}",
        a.k,
        seeds.len(),
        a.iters
    );
    match &a.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            println!("{summary}");
        }
        None => {
            print!("{csv}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_scan(a: ScanArgs) -> CmdResult {
    if !a.merge.is_empty() {
        let Some(out) = &a.out_dir else {
            return Err(Failure::Usage(anyhow::anyhow!("--merge needs --out-dir")));
        };
        let merged = merge_results(&a.merge).map_err(|e| Failure::Usage(e.into()))?;
        let written = merged.write(out)?;
        println!(
            "merged_dirs={} rows={} files={}",
            a.merge.len(),
            merged.row_count(),
            written.len()
        );
        return Ok(());
    }
    let path = a.config.expect("clap requires --config without --merge");
    let mut cfg = ScanConfig::from_file(&path).map_err(|e| Failure::Usage(e.into()))?;
    if let Some(dir) = a.out_dir {
        cfg.output_dir = dir;
    }
    let manifest = run_scan(&cfg).map_err(|e| match e {
        e @ kamcrit::Error::Config(_) => Failure::Usage(e.into()),
        e => e.into(),
    })?;
    println!(
        "tasks={} failed={} threads={} output_dir={} config_sha256={}",
        manifest.task_count,
        manifest.failure_count,
        manifest.threads,
        cfg.output_dir.display(),
        manifest.config_sha256
    );
    if manifest.succeeded() == 0 {
        return Err(Failure::Numeric(anyhow::anyhow!(
            "every task failed; see manifest.json"
        )));
    }
    Ok(())
}
