//! Command-line runner: resolves a flat `key=value` configuration from a file
//! and flags, runs one subcommand and writes JSON-lines or CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use num_bigint::BigInt;
use serde_json::{json, Value};

use dioph::bestapprox::{enumerate_best_general, oracle_best, BestApprox, Definition, EngineConfig, SearchConfig, Theta};
use dioph::dynamics::{hit_time, verify_correspondence};
use dioph::experiment::{
    determinants, doeblin_lenstra, dual_levy, levy, residues, search_refining, sweep, LevySummary, Run,
};
use dioph::geometry::ApproxSpace;
use dioph::sampling::ThetaSource;
use dioph::stats::{
    count_constrained, frequencies, gap_blocks, gap_distribution, levy_series, telescoping_check, ConstraintSet,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Bestapprox,
    Levy,
    DoeblinLenstra,
    Cheung,
    CrossSection,
    Determinants,
    Residues,
    Gaps,
    Count,
    Selfcheck,
}

#[derive(Debug, Parser)]
#[command(name = "dioph", version, about = "Best Diophantine approximations and their statistics")]
pub struct Cli {
    pub command: Command,
    /// Flat key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Block dimensions, e.g. `2,1|1`.
    #[arg(long)]
    pub decomp: Option<String>,
    /// Norm codes per block (`s`, `e`, `p3`, `w1:3`), e.g. `e,s|s`.
    #[arg(long)]
    pub norms: Option<String>,
    #[arg(long = "def")]
    pub definition: Option<String>,
    #[arg(long)]
    pub qmax: Option<String>,
    #[arg(long = "T")]
    pub big_t: Option<String>,
    #[arg(long)]
    pub length: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long = "mod")]
    pub modulus: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub format: Option<String>,
    /// Comma-separated row-major entries of an exact θ.
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub theta_file: Option<PathBuf>,
    #[arg(long)]
    pub digits: Option<String>,
    #[arg(long)]
    pub shift: Option<String>,
    #[arg(long)]
    pub depth: Option<String>,
    /// `;`-separated clauses such as `error=0:0.5; mod=2:1,1`.
    #[arg(long)]
    pub constraint: Option<String>,
    /// Record stream written by `bestapprox`, used instead of sampling.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Expected value of the main estimate.
    #[arg(long)]
    pub expect: Option<String>,
    /// Relative tolerance for `--expect`.
    #[arg(long)]
    pub tol: Option<String>,
    /// Recheck a 1% sample of records against the exhaustive oracle.
    #[arg(long)]
    pub selfcheck: bool,
    /// Confirm hitting times by lattice-point enumeration.
    #[arg(long)]
    pub verify: bool,
    /// Any other setting, e.g. `--set coefficients=1,1,-1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub extra: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] dioph::Error),
    #[error("oracle mismatch: {0}")]
    Mismatch(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                dioph::Error::Parse(_) | dioph::Error::InvalidConfig(_) | dioph::Error::Dimension(_) => 1,
                _ => 2,
            },
            CliError::Mismatch(_) => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("config line {} lacks '=': {line}", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// File settings overridden by flags.
pub fn resolve_settings(cli: &Cli) -> CliResult<BTreeMap<String, String>> {
    let mut s = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("decomp", &cli.decomp),
        ("norms", &cli.norms),
        ("def", &cli.definition),
        ("qmax", &cli.qmax),
        ("T", &cli.big_t),
        ("length", &cli.length),
        ("samples", &cli.samples),
        ("measure", &cli.measure),
        ("mod", &cli.modulus),
        ("seed", &cli.seed),
        ("workers", &cli.workers),
        ("out", &cli.out),
        ("format", &cli.format),
        ("theta", &cli.theta),
        ("digits", &cli.digits),
        ("shift", &cli.shift),
        ("depth", &cli.depth),
        ("constraint", &cli.constraint),
        ("expect", &cli.expect),
        ("tol", &cli.tol),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.insert(k.to_string(), v.clone());
        }
    }
    if let Some(path) = &cli.theta_file {
        let text = std::fs::read_to_string(path)?;
        let entries: Vec<&str> = text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
        s.insert("theta".into(), entries.join(","));
    }
    if let Some(path) = &cli.records {
        s.insert("records".into(), path.display().to_string());
    }
    if cli.selfcheck {
        s.insert("selfcheck".into(), "true".into());
    }
    if cli.verify {
        s.insert("verify".into(), "true".into());
    }
    for kv in &cli.extra {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Parse(format!("--set {kv} lacks '='")))?;
        s.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(s)
}

/// Typed view of the resolved settings.
pub struct RunConfig {
    pub command: Command,
    pub settings: BTreeMap<String, String>,
}

impl RunConfig {
    fn get(&self, k: &str) -> Option<&str> {
        self.settings.get(k).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, k: &str, default: T) -> CliResult<T> {
        match self.get(k) {
            Some(v) => v.parse().map_err(|_| CliError::Parse(format!("{k}={v} is not valid"))),
            None => Ok(default),
        }
    }

    fn flag(&self, k: &str) -> bool {
        matches!(self.get(k), Some("true" | "1" | "yes"))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.parsed("seed", 0)
    }

    fn default_decomp(&self) -> &'static str {
        match self.command {
            Command::Cheung => "1,1|1",
            _ => "1|1",
        }
    }

    fn default_definition(&self) -> &'static str {
        match self.command {
            Command::Cheung => "cuboid",
            Command::Determinants | Command::Gaps | Command::DoeblinLenstra => "norm",
            _ => "general",
        }
    }

    /// The space from `decomp` and `norms`; missing norms are sup norms.
    pub fn space(&self) -> CliResult<ApproxSpace> {
        let decomp = self.get("decomp").unwrap_or(self.default_decomp());
        let (ml, nl) = decomp.split_once('|').ok_or_else(|| CliError::Parse(format!("decomp '{decomp}' lacks '|'")))?;
        let (norm_m, norm_n) = match self.get("norms") {
            Some(n) => n.split_once('|').ok_or_else(|| CliError::Parse(format!("norms '{n}' lacks '|'")))?,
            None => ("", ""),
        };
        let side = |dims: &str, norms: &str| -> CliResult<String> {
            let dims: Vec<&str> = dims.split(',').map(str::trim).collect();
            let norms: Vec<&str> = if norms.trim().is_empty() {
                vec!["s"; dims.len()]
            } else {
                norms.split(',').map(str::trim).collect()
            };
            if dims.len() != norms.len() {
                return Err(CliError::Parse(format!("{} blocks but {} norms", dims.len(), norms.len())));
            }
            Ok(dims.iter().zip(&norms).map(|(d, n)| format!("{d}{n}")).collect::<Vec<_>>().join(","))
        };
        Ok(ApproxSpace::parse(&format!("m:{}|n:{}", side(ml, norm_m)?, side(nl, norm_n)?))?)
    }

    pub fn definition(&self) -> CliResult<Definition> {
        Ok(self.get("def").unwrap_or(self.default_definition()).parse()?)
    }

    /// Exact θ from `theta`, if given.
    pub fn explicit_theta(&self, space: &ApproxSpace) -> CliResult<Option<Theta>> {
        match self.get("theta") {
            Some(t) => Ok(Some(Theta::parse(t, space.m(), space.n())?)),
            None => Ok(None),
        }
    }

    /// Source settings with the shape taken from the space.
    pub fn source(&self, space: &ApproxSpace) -> CliResult<Arc<ThetaSource>> {
        let mut s = self.settings.clone();
        s.entry("rows".into()).or_insert_with(|| space.m().to_string());
        s.entry("cols".into()).or_insert_with(|| space.n().to_string());
        if let Some(t) = self.get("theta") {
            s.insert("measure".into(), "explicit".into());
            s.insert("theta".into(), t.to_string());
        }
        if self.command == Command::Levy && self.get("digits").is_none() {
            // Enough decimal digits for the requested number of convergents.
            let length: usize = self.parsed("length", 1000)?;
            let per_record = match s.get("measure").map(String::as_str) {
                Some("cantor") => 1.0,
                _ => 1.05,
            };
            s.insert("digits".into(), ((length as f64 * per_record) as usize + 100).to_string());
        }
        let source = ThetaSource::from_settings(&s)?;
        let cap = s.get("cap").map_or(Ok(source.hard_cap().max(self.parsed("digits", 0)?) * 4), |c| {
            c.parse().map_err(|_| CliError::Parse(format!("cap={c} is not a count")))
        })?;
        let source = source.with_hard_cap(cap);
        if source.shape() != (space.m(), space.n()) {
            return Err(CliError::Parse(format!(
                "source is {}x{} but the space has m={}, n={}",
                source.shape().0,
                source.shape().1,
                space.m(),
                space.n()
            )));
        }
        Ok(Arc::new(source))
    }

    fn header(&self) -> CliResult<Value> {
        Ok(json!({ "config": self.settings, "version": VERSION, "seed": self.seed()? }))
    }
}

fn int_strings(v: &[BigInt]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

fn record_json(r: &BestApprox, space: &ApproxSpace) -> Value {
    let t = if r.degenerate { None } else { hit_time(r, space).ok().map(|h| h.t) };
    json!({
        "index": r.index,
        "p": int_strings(&r.p),
        "q": int_strings(&r.q),
        "error": r.error,
        "log_q": r.log_q,
        "degenerate": r.degenerate,
        "t": t,
    })
}

/// Output sink: a file or stdout, in JSON-lines or CSV.
struct Sink {
    out: Box<dyn Write>,
    csv: bool,
}

impl Sink {
    fn open(cfg: &RunConfig) -> CliResult<Self> {
        let csv = match cfg.get("format").unwrap_or("jsonl") {
            "csv" => true,
            "jsonl" | "json" => false,
            other => return Err(CliError::Parse(format!("unknown format '{other}'"))),
        };
        let out: Box<dyn Write> = match cfg.get("out") {
            Some("-") | None => Box::new(std::io::stdout()),
            Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        };
        Ok(Sink { out, csv })
    }

    fn header(&mut self, header: &Value, csv_columns: &str) -> CliResult<()> {
        if self.csv {
            writeln!(self.out, "# {header}")?;
            writeln!(self.out, "{csv_columns}")?;
        } else {
            writeln!(self.out, "{header}")?;
        }
        Ok(())
    }

    fn json(&mut self, v: &Value) -> CliResult<()> {
        writeln!(self.out, "{v}")?;
        Ok(())
    }

    fn line(&mut self, s: &str) -> CliResult<()> {
        writeln!(self.out, "{s}")?;
        Ok(())
    }

    /// One estimator row: `estimator,key,value,stderr`.
    fn row(&mut self, estimator: &str, key: &str, value: impl std::fmt::Display, stderr: Option<f64>) -> CliResult<()> {
        let value = value.to_string();
        if self.csv {
            let se = stderr.map_or(String::new(), |s| s.to_string());
            writeln!(self.out, "{estimator},{key},{value},{se}")?;
        } else {
            let value = value.parse::<f64>().map_or(json!(value), |v| json!(v));
            writeln!(self.out, "{}", json!({ "estimator": estimator, "key": key, "value": value, "stderr": stderr }))?;
        }
        Ok(())
    }

    fn finish(mut self) -> CliResult<()> {
        self.out.flush()?;
        Ok(())
    }
}

const ROW_COLUMNS: &str = "estimator,key,value,stderr";

/// Parses the CLI and runs it; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let settings = resolve_settings(cli)?;
    let cfg = RunConfig { command: cli.command, settings };
    let workers = match cfg.get("workers").map(str::to_string).or_else(|| std::env::var("DIOPH_WORKERS").ok()) {
        Some(w) => w.parse().map_err(|_| CliError::Parse(format!("workers={w} is not a count")))?,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Parse(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cfg))
}

fn dispatch(cfg: &RunConfig) -> CliResult<()> {
    match cfg.command {
        Command::Bestapprox => run_bestapprox(cfg),
        Command::CrossSection => run_cross_section(cfg),
        Command::Selfcheck => run_selfcheck(cfg),
        _ => run_experiment(cfg),
    }
}

fn run_bestapprox(cfg: &RunConfig) -> CliResult<()> {
    let space = cfg.space()?;
    let definition = cfg.definition()?;
    let theta = match cfg.explicit_theta(&space)? {
        Some(t) => t,
        None => cfg.source(&space)?.sample(0),
    };
    let qmax: Option<f64> = cfg.get("qmax").map(|v| v.parse()).transpose().map_err(|_| CliError::Parse("qmax is not a number".into()))?;
    let length: Option<usize> = cfg.get("length").map(|v| v.parse()).transpose().map_err(|_| CliError::Parse("length is not a count".into()))?;
    let (theta, records) = if space.n() == 1 {
        let mut sc = SearchConfig::new(definition, length.unwrap_or(usize::MAX));
        if let Some(q) = qmax {
            sc.q_limit = Some(BigInt::from(q.floor() as u128));
        } else if length.is_none() {
            return Err(CliError::Parse("bestapprox needs --qmax or --length".into()));
        }
        search_refining(&theta, &space, &sc)?
    } else {
        let q = qmax.ok_or_else(|| CliError::Parse("bestapprox with n > 1 needs --qmax".into()))?;
        let mut records = enumerate_best_general(&theta, &space, &EngineConfig::new(definition, q))?;
        if let Some(l) = length {
            records.truncate(l);
        }
        (theta, records)
    };
    let resolved = definition.resolve(&space)?;
    let mut sink = Sink::open(cfg)?;
    let mut header = cfg.header()?;
    header["theta"] = json!(theta.entries().iter().map(ToString::to_string).collect::<Vec<_>>());
    header["space"] = json!(resolved.descriptor());
    sink.header(&header, "index,p,q,error,log_q,degenerate")?;
    for r in &records {
        if sink.csv {
            let join = |v: &[BigInt]| int_strings(v).join(";");
            sink.line(&format!("{},{},{},{},{},{}", r.index, join(&r.p), join(&r.q), r.error, r.log_q, r.degenerate))?;
        } else {
            sink.json(&record_json(r, &resolved))?;
        }
    }
    sink.finish()?;
    if cfg.flag("selfcheck") {
        selfcheck_records(&theta, &resolved, &records)?;
    }
    Ok(())
}

/// Rechecks every hundredth record whose oracle box is small enough.
fn selfcheck_records(theta: &Theta, space: &ApproxSpace, records: &[BestApprox]) -> CliResult<()> {
    let d = space.d() as u32;
    let cap = (2e6f64.powf(1.0 / d as f64) / 2.0) as i64;
    for r in records.iter().step_by(100) {
        let b = r.p.iter().chain(&r.q).map(|x| x.magnitude().clone()).max().unwrap_or_default();
        let Ok(b) = i64::try_from(BigInt::from(b)) else { continue };
        if b > cap {
            continue;
        }
        let inside = |x: &BestApprox| x.p.iter().chain(&x.q).all(|v| v.magnitude() <= &num_bigint::BigUint::from(b as u64));
        let ora: Vec<_> = oracle_best(theta, space, b).into_iter().map(|x| (x.p, x.q)).collect();
        let eng: Vec<_> = records.iter().filter(|x| inside(x)).map(|x| (x.p.clone(), x.q.clone())).collect();
        if ora != eng {
            return Err(CliError::Mismatch(format!("records inside the box {b} differ from the oracle")));
        }
    }
    eprintln!("selfcheck: oracle agrees");
    Ok(())
}

fn run_cross_section(cfg: &RunConfig) -> CliResult<()> {
    let space = cfg.space()?;
    let theta = cfg
        .explicit_theta(&space)?
        .ok_or_else(|| CliError::Parse("cross-section needs an exact --theta".into()))?;
    let big_t: f64 = cfg.parsed("T", 3.0)?;
    let report = verify_correspondence(&theta, &space, cfg.definition()?, big_t)?;
    let mut sink = Sink::open(cfg)?;
    sink.header(&cfg.header()?, ROW_COLUMNS)?;
    sink.row("hitting_times", "T", report.records, None)?;
    sink.row("visits", "T", report.visits, None)?;
    sink.row("confirmed", "T", report.confirmed, None)?;
    sink.row("refuted", "T", report.refuted, None)?;
    sink.finish()?;
    if cfg.flag("verify") {
        if report.exact() {
            println!("match: exact");
        } else {
            println!("match: mismatch");
            return Err(CliError::Mismatch(report.mismatches.join("; ")));
        }
    }
    Ok(())
}

/// Random rationals across shapes and definitions, engines against oracle.
fn run_selfcheck(cfg: &RunConfig) -> CliResult<()> {
    let seed = cfg.seed()?;
    let per_shape: usize = cfg.parsed("samples", 10)?;
    let mut mismatches = Vec::new();
    let mut checks = 0;
    for (m, n, b, general) in [(1, 1, 20, "m:1e|n:1s"), (2, 1, 6, "m:2e|n:1s"), (1, 2, 6, "m:1s|n:2e"), (2, 2, 2, "m:1s,1s|n:2s")] {
        let source = Arc::new(ThetaSource::from_settings(&BTreeMap::from([
            ("rows".to_string(), m.to_string()),
            ("cols".to_string(), n.to_string()),
            ("digits".to_string(), "2".to_string()),
            ("seed".to_string(), seed.to_string()),
        ]))?);
        for c in 0..per_shape as u64 {
            let sample = source.sample(c);
            let theta = Theta::explicit(m, n, sample.entries().to_vec())?;
            for def in [Definition::Cuboid, Definition::NormCylinder, Definition::General] {
                let space = match def {
                    Definition::General => ApproxSpace::parse(general)?,
                    _ => ApproxSpace::cylinder(m, n, dioph::geometry::NormSpec::Sup, dioph::geometry::NormSpec::Sup)?,
                };
                let resolved = def.resolve(&space)?;
                let reach = resolved.n_norms().iter().map(|nb| nb.scale * nb.spec.norm(&vec![1.0; nb.dim])).fold(0.0, f64::max);
                let bound = (b as f64 * reach * (1.0 + 1e-9)).max(1.0);
                let inside = |x: &BestApprox| x.p.iter().chain(&x.q).all(|v| v.magnitude() <= &num_bigint::BigUint::from(b as u64));
                let eng: Vec<_> = enumerate_best_general(&theta, &space, &EngineConfig::new(def, bound))?
                    .into_iter()
                    .filter(|x| inside(x))
                    .map(|x| (x.p, x.q))
                    .collect();
                let ora: Vec<_> = oracle_best(&theta, &resolved, b).into_iter().map(|x| (x.p, x.q)).collect();
                checks += 1;
                if eng != ora {
                    mismatches.push(format!("{} θ={:?}", def.name(), theta.entries()));
                }
            }
        }
    }
    println!("selfcheck: {checks} engine runs, {} mismatches", mismatches.len());
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(CliError::Mismatch(mismatches.join("; ")))
    }
}

/// Reads a `bestapprox` JSON-lines stream back into a run.
pub fn read_records(text: &str) -> CliResult<(ApproxSpace, Run)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Value = serde_json::from_str(lines.next().ok_or_else(|| CliError::Parse("empty record stream".into()))?)
        .map_err(|e| CliError::Parse(format!("bad header: {e}")))?;
    let space = ApproxSpace::parse(header["space"].as_str().ok_or_else(|| CliError::Parse("header lacks space".into()))?)?;
    let entries: Vec<String> = serde_json::from_value(header["theta"].clone()).map_err(|e| CliError::Parse(format!("bad θ: {e}")))?;
    let theta = Theta::parse(&entries.join(","), space.m(), space.n())?;
    let ints = |v: &Value| -> CliResult<Vec<BigInt>> {
        let strings: Vec<String> = serde_json::from_value(v.clone()).map_err(|e| CliError::Parse(format!("bad vector: {e}")))?;
        strings.iter().map(|s| s.parse().map_err(|_| CliError::Parse(format!("bad integer {s}")))).collect()
    };
    let mut records = Vec::new();
    for line in lines {
        let v: Value = serde_json::from_str(line).map_err(|e| CliError::Parse(format!("bad record: {e}")))?;
        records.push(BestApprox::from_pq(&theta, &space, ints(&v["p"])?, ints(&v["q"])?, records.len() + 1));
    }
    Ok((space, Run { counter: 0, theta, records }))
}

fn run_experiment(cfg: &RunConfig) -> CliResult<()> {
    let (space, runs) = match cfg.get("records") {
        Some(path) => {
            let (space, run) = read_records(&std::fs::read_to_string(path)?)?;
            (space, vec![run])
        }
        None => {
            let space = cfg.definition()?.resolve(&cfg.space()?)?;
            let source = cfg.source(&space)?;
            let samples: usize = cfg.parsed("samples", 10)?;
            let length: usize = cfg.parsed("length", 1000)?;
            let runs = sweep(&source, 0, samples, &space, cfg.definition()?, length)?;
            (space, runs)
        }
    };
    let mut sink = Sink::open(cfg)?;
    let mut header = cfg.header()?;
    header["space"] = json!(space.descriptor());
    sink.header(&header, ROW_COLUMNS)?;
    let check = |sink: &mut Sink, name: &str, value: f64| -> CliResult<()> {
        if let Some(expect) = cfg.get("expect") {
            let expect: f64 = expect.parse().map_err(|_| CliError::Parse("expect is not a number".into()))?;
            let tol: f64 = cfg.parsed("tol", 0.01)?;
            let rel = (value - expect).abs() / expect.abs();
            let verdict = if rel <= tol { "pass" } else { "fail" };
            sink.row("check", name, format!("{verdict} rel={rel:.6} tol={tol}"), None)?;
            eprintln!("{name}: {value:.6} vs {expect} ({verdict})");
        }
        Ok(())
    };
    let summary_rows = |sink: &mut Sink, name: &str, s: &LevySummary| -> CliResult<()> {
        for (run, e) in runs.iter().zip(&s.estimates) {
            sink.row(name, &format!("theta{}", run.counter), e, None)?;
        }
        sink.row(&format!("{name}_mean"), "all", s.mean, Some(s.stderr))?;
        sink.row(&format!("{name}_spread"), "all", s.spread, None)
    };
    match cfg.command {
        Command::Levy | Command::Cheung => {
            let s = levy(&runs, &space);
            summary_rows(&mut sink, "levy", &s)?;
            if space.k() == 1 && space.r() == 1 {
                summary_rows(&mut sink, "dual_levy", &dual_levy(&runs, &space))?;
            }
            check(&mut sink, "levy_mean", s.mean)?;
            if cfg.command == Command::Cheung {
                let tol: f64 = cfg.parsed("tol", 0.10)?;
                let verdict = if s.spread < tol { "pass" } else { "fail" };
                sink.row("check", "spread", format!("{verdict} spread={:.6} tol={tol}", s.spread), None)?;
            }
        }
        Command::DoeblinLenstra => {
            let shift: usize = cfg.parsed("shift", 0)?;
            let (dist, s) = doeblin_lenstra(&runs, &space, shift)?;
            sink.row("samples", "all", s.samples, None)?;
            sink.row("ks", "all", s.ks, None)?;
            sink.row("cdf_at_half", "all", s.cdf_at_half, None)?;
            sink.row("mean", "all", s.mean, None)?;
            let edges: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
            histogram_row(&mut sink, &serde_json::to_value(dist.histogram(&edges)).expect("serializable"))?;
            check(&mut sink, "cdf_at_half", s.cdf_at_half)?;
        }
        Command::Determinants => {
            let table = determinants(&runs, &space);
            for (value, f) in frequencies(&table) {
                sink.row("determinant", &value.to_string(), f, None)?;
            }
        }
        Command::Residues => {
            let n: u64 = cfg.parsed("mod", 2)?;
            for (class, f) in frequencies(&residues(&runs, n)) {
                let key = class.iter().map(ToString::to_string).collect::<Vec<_>>().join(";");
                sink.row("residue", &key, f, None)?;
            }
        }
        Command::Gaps => {
            let depth: usize = cfg.parsed("depth", 1)?;
            let mut pooled = dioph::stats::EmpiricalDistribution::default();
            for run in &runs {
                let (direct, summed) = telescoping_check(&run.records);
                sink.row("telescoping", &format!("theta{}", run.counter), direct - summed, None)?;
                sink.row("mean_gap", &format!("theta{}", run.counter), levy_series(&run.records, &space).points.last().map_or(f64::NAN, |p| p.1), None)?;
                pooled = pooled.merge(gap_distribution(&run.records));
                if depth > 1 {
                    let blocks = gap_blocks(&run.records, depth);
                    let mean_product = blocks.iter().map(|b| b.iter().product::<f64>()).sum::<f64>() / blocks.len().max(1) as f64;
                    sink.row(&format!("joint_product_{depth}"), &format!("theta{}", run.counter), mean_product, None)?;
                }
            }
            sink.row("gap_mean", "all", pooled.mean(), None)?;
            let top = pooled.samples().last().copied().unwrap_or(1.0).max(1e-9);
            let edges: Vec<f64> = (0..=20).map(|i| top * i as f64 / 20.0).collect();
            histogram_row(&mut sink, &serde_json::to_value(pooled.histogram(&edges)).expect("serializable"))?;
        }
        Command::Count => {
            let set = match cfg.get("constraint") {
                Some(c) => ConstraintSet::parse(c)?,
                None => ConstraintSet::all(),
            };
            let big_t: f64 = cfg.parsed("T", 10.0)?;
            for run in &runs {
                let c = count_constrained(&run.theta, &space, &run.records, &set, big_t)?;
                sink.row("count", &format!("theta{}", run.counter), c.count, None)?;
                sink.row("count_normalized", &format!("theta{}", run.counter), c.normalized, None)?;
            }
        }
        Command::Bestapprox | Command::CrossSection | Command::Selfcheck => unreachable!("dispatched elsewhere"),
    }
    sink.finish()
}

fn histogram_row(sink: &mut Sink, histogram: &Value) -> CliResult<()> {
    if sink.csv {
        let mut line = String::from("# histogram ");
        let _ = write!(line, "{histogram}");
        sink.line(&line)
    } else {
        sink.json(&json!({ "histogram": histogram }))
    }
}
