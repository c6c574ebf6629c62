//! `tilescan` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 validation failure,
//! 3 I/O error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tilescan::bench::{
    bench_join, bench_project, bench_select, bench_sort, bench_ssb, fraction_sweep, parse_count,
    parse_quantity, pow2_sweep, probe_hardware, BenchEnv, BenchError, BenchReport, JoinVariant,
    ProbeOptions, ProjectVariant, SelectVariant, SortAlgo,
};
use tilescan::cost_models::{
    model_coprocessor, model_join_probe, model_project, model_q21, model_select, model_sort,
    CostEstimate, HardwareProfile, ModelError, ProfileClass, Q21Params,
};
use tilescan::operators::ProjectKind;
use tilescan::parallel::WORKERS_ENV;
use tilescan::ssb_queries::QueryId;
use tilescan::storage::{generate_ssb, load_database, save_database, StorageError};
use tilescan::tile_engine::{CursorMode, Kernel, TileConfig};

#[derive(Parser, Debug)]
#[command(
    name = "tilescan",
    version,
    about = "Tile-based columnar operators, SSB queries and bandwidth cost models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an operator microbenchmark sweep.
    Bench(BenchArgs),
    /// Run SSB queries.
    Ssb(SsbArgs),
    /// Measure memory bandwidth and cache sizes, write a profile.
    Probe(ProbeArgs),
    /// Evaluate a cost model.
    Model(ModelArgs),
    /// Generate an SSB database and save it to a directory.
    Gen(GenArgs),
}

#[derive(Args, Debug, Clone)]
struct RunOpts {
    /// Tile shape, BLOCK_THREADSxITEMS_PER_THREAD.
    #[arg(long, global = true, default_value = "128x4")]
    config: TileConfig,
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value_t = 3)]
    reps: usize,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Output cursor mode: deterministic or arrival.
    #[arg(long, global = true, default_value = "deterministic")]
    mode: CursorMode,
    /// Attach the cost-model prediction to each report.
    #[arg(long, global = true)]
    model: bool,
    /// Profile file or built-in name (table2-cpu, table2-gpu).
    #[arg(long, global = true, default_value = "table2-cpu")]
    profile: String,
    /// Emit CSV instead of JSON lines.
    #[arg(long, global = true)]
    csv: bool,
    /// Write reports to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(subcommand)]
    op: BenchOp,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Subcommand, Debug)]
enum BenchOp {
    /// Selection scan; sweeps selectivity 0..1 by 0.1 unless --sel is given.
    Select {
        #[arg(long, default_value = "2^29")]
        n: String,
        #[arg(long)]
        sel: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        /// branching, predicated, tile or all.
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Projection of two columns.
    Project {
        #[arg(long, default_value = "2^29")]
        n: String,
        /// linear, sigmoid or all.
        #[arg(long, default_value = "all")]
        kind: String,
        /// scalar, tile or all.
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Hash join probe; sweeps the hash table size by powers of two.
    Join {
        #[arg(long, default_value = "2^28")]
        probe: String,
        #[arg(long, default_value = "8KB")]
        ht_min: String,
        #[arg(long, default_value = "1GB")]
        ht_max: String,
        /// scalar, prefetch, tile or all.
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Radix sort of key/payload pairs.
    Sort {
        #[arg(long, default_value = "2^28")]
        n: String,
        /// lsb, msb or all.
        #[arg(long, default_value = "all")]
        algo: String,
    },
}

#[derive(Args, Debug)]
struct SsbArgs {
    #[arg(long, default_value_t = 1)]
    sf: u32,
    /// Load the database from a directory written by `gen` instead of
    /// generating it.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, conflicts_with = "all", required_unless_present = "all")]
    query: Vec<String>,
    #[arg(long)]
    all: bool,
    /// Check each result against the reference interpreter.
    #[arg(long)]
    validate: bool,
    /// Attach the q21 model prediction.
    #[arg(long)]
    compare_model: bool,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Where to write the profile; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Probe buffer size (default 4x last-level cache, at least 256MB).
    #[arg(long)]
    buffer: Option<String>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, default_value = "probed")]
    label: String,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(value_enum)]
    model: ModelKind,
    /// Profile file or built-in name (table2-cpu, table2-gpu).
    #[arg(long, default_value = "table2-cpu")]
    profile: String,
    /// Rows (select, project, sort), probe rows (join) or fact rows (coproc).
    #[arg(long, alias = "rows")]
    n: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Hash table size in bytes (join).
    #[arg(long)]
    ht: Option<String>,
    #[arg(long, default_value_t = 4)]
    passes: u32,
    /// Bytes scanned per row (coproc).
    #[arg(long, default_value_t = 16)]
    row_bytes: u32,
    /// Host memory bandwidth, bytes/s (coproc).
    #[arg(long)]
    bc: Option<String>,
    /// Interconnect bandwidth, bytes/s (coproc).
    #[arg(long)]
    bp: Option<String>,
    /// Override the part-table cache hit ratio (q21).
    #[arg(long)]
    pi: Option<f64>,
    /// Target class for q21; defaults to the profile's class.
    #[arg(long)]
    target: Option<ProfileClass>,
    #[arg(long)]
    json: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelKind {
    Select,
    Project,
    Join,
    Sort,
    Coproc,
    Q21,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    sf: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// An error with its process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(m: impl ToString) -> Self {
        Self {
            code: 1,
            message: m.to_string(),
        }
    }

    fn validation(m: impl ToString) -> Self {
        Self {
            code: 2,
            message: m.to_string(),
        }
    }

    fn io(m: impl ToString) -> Self {
        Self {
            code: 3,
            message: m.to_string(),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Query(tilescan::ssb_queries::QueryError::Storage(s)) => s.into(),
            other => Failure::usage(other),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::ProfileIo { .. } => Failure::io(e),
            other => Failure::usage(other),
        }
    }
}

impl From<StorageError> for Failure {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::InvalidScaleFactor(_) => Failure::usage(e),
            other => Failure::io(other),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::io(e)
    }
}

type Res<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Res {
    match cli.command {
        Command::Bench(a) => cmd_bench(a),
        Command::Ssb(a) => cmd_ssb(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Model(a) => cmd_model(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// A file path, or a built-in profile name with an optional `.json` suffix
/// and directory.
fn resolve_profile(spec: &str) -> Res<HardwareProfile> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(HardwareProfile::load(path)?);
    }
    match path.file_stem().and_then(|s| s.to_str()) {
        Some("table2-cpu") | Some("cpu") => Ok(HardwareProfile::table2_cpu()),
        Some("table2-gpu") | Some("gpu") => Ok(HardwareProfile::table2_gpu()),
        _ => Err(Failure::io(format!(
            "profile {spec:?} not found and not a built-in name"
        ))),
    }
}

fn parse_list<T: std::str::FromStr<Err = String> + Copy>(s: &str, all: &[T]) -> Res<Vec<T>> {
    if s == "all" {
        return Ok(all.to_vec());
    }
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(Failure::usage))
        .collect()
}

fn count(s: &str) -> Res<usize> {
    Ok(parse_count(s)?)
}

fn quantity(s: &str) -> Res<f64> {
    Ok(parse_quantity(s)?)
}

fn env_for(run: &RunOpts, with_model: bool) -> Res<BenchEnv> {
    if run.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    let mut kernel = Kernel::new(run.config).mode(run.mode);
    if let Some(w) = run.workers {
        if w == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        kernel = kernel.workers(w);
    }
    let profile = if with_model {
        Some(resolve_profile(&run.profile)?)
    } else {
        None
    };
    Ok(BenchEnv {
        kernel,
        reps: run.reps,
        seed: run.seed,
        profile,
    })
}

struct Emitter {
    csv: bool,
    header_done: bool,
    out: Box<dyn Write>,
}

impl Emitter {
    fn new(run: &RunOpts) -> Res<Self> {
        let out: Box<dyn Write> = match &run.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| Failure::io(format!("{}: {e}", p.display())))?,
            )),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Self {
            csv: run.csv,
            header_done: false,
            out,
        })
    }

    fn emit(&mut self, r: &BenchReport) -> Res {
        if self.csv {
            if !self.header_done {
                writeln!(self.out, "{}", BenchReport::CSV_HEADER)?;
                self.header_done = true;
            }
            writeln!(self.out, "{}", r.to_csv_row())?;
        } else {
            writeln!(self.out, "{}", r.to_json_line())?;
        }
        self.out.flush()?;
        Ok(())
    }
}

fn cmd_bench(a: BenchArgs) -> Res {
    let env = env_for(&a.run, a.run.model)?;
    let reports = match a.op {
        BenchOp::Select {
            n,
            sel,
            step,
            variant,
        } => {
            let sigmas = match sel {
                Some(s) => vec![s],
                None => fraction_sweep(step)?,
            };
            bench_select(
                count(&n)?,
                &sigmas,
                &parse_list(&variant, SelectVariant::ALL)?,
                &env,
            )?
        }
        BenchOp::Project { n, kind, variant } => {
            let kinds = if kind == "all" {
                vec![ProjectKind::Linear, ProjectKind::Sigmoid]
            } else {
                kind.split(',')
                    .map(|k| k.trim().parse().map_err(Failure::usage))
                    .collect::<Res<_>>()?
            };
            bench_project(
                count(&n)?,
                &kinds,
                &parse_list(&variant, ProjectVariant::ALL)?,
                &env,
            )?
        }
        BenchOp::Join {
            probe,
            ht_min,
            ht_max,
            variant,
        } => {
            let sizes = pow2_sweep(count(&ht_min)?, count(&ht_max)?)?;
            bench_join(
                count(&probe)?,
                &sizes,
                &parse_list(&variant, JoinVariant::ALL)?,
                &env,
            )?
        }
        BenchOp::Sort { n, algo } => {
            bench_sort(count(&n)?, &parse_list(&algo, SortAlgo::ALL)?, &env)?
        }
    };
    let mut em = Emitter::new(&a.run)?;
    for r in &reports {
        em.emit(r)?;
    }
    Ok(())
}

fn cmd_ssb(a: SsbArgs) -> Res {
    let queries: Vec<QueryId> = if a.all {
        QueryId::ALL.to_vec()
    } else {
        a.query
            .iter()
            .map(|q| q.parse().map_err(Failure::usage))
            .collect::<Res<_>>()?
    };
    let env = env_for(&a.run, a.compare_model || a.run.model)?;
    let db = match &a.data {
        Some(dir) => load_database(dir)?,
        None => generate_ssb(a.sf, a.run.seed)?,
    };
    let runs = bench_ssb(&db, &queries, &env, a.validate)?;
    let mut em = Emitter::new(&a.run)?;
    let mut failed = Vec::new();
    for r in &runs {
        em.emit(&r.report)?;
        if a.validate {
            match &r.mismatch {
                None => eprintln!("PASS {}", r.query),
                Some(m) => {
                    eprintln!("FAIL {}: {m}", r.query);
                    failed.push(r.query.to_string());
                }
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::validation(format!(
            "validation failed for {}",
            failed.join(", ")
        )))
    }
}

fn cmd_probe(a: ProbeArgs) -> Res {
    let mut opts = ProbeOptions {
        reps: a.reps.max(1),
        label: a.label,
        ..ProbeOptions::default()
    };
    if let Some(w) = a.workers {
        opts.workers = w.max(1);
    }
    if let Some(b) = &a.buffer {
        opts.buffer_bytes = Some(count(b)?);
    }
    let profile = probe_hardware(&opts).map_err(|e| match e {
        BenchError::Allocation(m) => Failure::io(m),
        other => other.into(),
    })?;
    let text = profile.to_json();
    match &a.out {
        Some(p) => std::fs::write(p, text + "\n")
            .map_err(|e| Failure::io(format!("{}: {e}", p.display())))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn need<'a>(v: &'a Option<String>, flag: &str) -> Res<&'a str> {
    v.as_deref()
        .ok_or_else(|| Failure::usage(format!("this model requires --{flag}")))
}

fn cmd_model(a: ModelArgs) -> Res {
    let profile = resolve_profile(&a.profile)?;
    let est: CostEstimate = match a.model {
        ModelKind::Select => {
            let sigma = a
                .sigma
                .ok_or_else(|| Failure::usage("this model requires --sigma"))?;
            model_select(quantity(need(&a.n, "n")?)?, sigma, &profile)?
        }
        ModelKind::Project => model_project(quantity(need(&a.n, "n")?)?, &profile)?,
        ModelKind::Join => model_join_probe(
            quantity(need(&a.n, "n")?)?,
            quantity(need(&a.ht, "ht")?)?,
            &profile,
        )?,
        ModelKind::Sort => model_sort(quantity(need(&a.n, "n")?)?, &profile, a.passes)?,
        ModelKind::Coproc => {
            let rows = quantity(need(&a.n, "rows")?)?;
            let bc = match &a.bc {
                Some(s) => quantity(s)?,
                None => profile.read_bw_bytes_per_sec,
            };
            let bp = match &a.bp {
                Some(s) => quantity(s)?,
                None => profile.interconnect_bw_bytes_per_sec.ok_or_else(|| {
                    Failure::usage(format!(
                        "profile {} has no interconnect bandwidth; pass --bp",
                        profile.label
                    ))
                })?,
            };
            let b = model_coprocessor(rows * f64::from(a.row_bytes), bc, bp)?;
            if a.json {
                println!(
                    "{}",
                    json!({"model": "coproc", "host_ms": b.host_seconds * 1e3,
                    "coprocessor_ms": b.coprocessor_seconds * 1e3, "host_wins": b.host_wins()})
                );
            } else {
                println!(
                    "host (one scan at {bc:.3e} B/s):         {:.3} ms",
                    b.host_seconds * 1e3
                );
                println!(
                    "coprocessor (transfer at {bp:.3e} B/s):  {:.3} ms",
                    b.coprocessor_seconds * 1e3
                );
                println!(
                    "{}",
                    if b.host_wins() {
                        "host is faster"
                    } else {
                        "coprocessor is faster"
                    }
                );
            }
            return Ok(());
        }
        ModelKind::Q21 => {
            let params = Q21Params {
                l2_hit_ratio: a.pi,
                ..Q21Params::reference()
            };
            model_q21(&params, &profile, a.target.unwrap_or(profile.class))?
        }
    };
    if a.json {
        println!(
            "{}",
            serde_json::to_string(&est).expect("estimate serializes")
        );
    } else {
        println!("{} on {}: {:.4} ms", est.model, est.profile, est.total_ms());
        for t in &est.terms {
            println!("  {:<14} {:.4} ms", t.name, t.seconds * 1e3);
        }
        for t in &est.shadowed {
            println!("  {:<14} {:.4} ms (shadowed)", t.name, t.seconds * 1e3);
        }
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Res {
    std::fs::create_dir_all(&a.out)
        .map_err(|e| Failure::io(format!("{}: {e}", a.out.display())))?;
    let db = generate_ssb(a.sf, a.seed)?;
    let manifest = save_database(&a.out, &db)?;
    let rows: Vec<String> = manifest
        .tables
        .iter()
        .map(|t| format!("{}={}", t.name, t.rows))
        .collect();
    eprintln!(
        "wrote SF={} to {} ({})",
        a.sf,
        a.out.display(),
        rows.join(", ")
    );
    Ok(())
}
