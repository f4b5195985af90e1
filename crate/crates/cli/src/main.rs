use clap::{Args, Parser, Subcommand};
use crvec_core::bench::{self, BenchConfig, BenchReport, Variant};
use crvec_core::coeffgen::{artifact, gen_all_tables};
use crvec_core::hexfloat::{parse_f32, parse_f64};
use crvec_core::kernels_f64::F64Fn;
use crvec_core::verify::checks::{self, Distribution};
use crvec_core::verify::corpus::{corpus_check, format_corpus, generate_hard_cases};
use crvec_core::verify::{sweep_f32, KernelId, SweepOptions, DEFAULT_CAP};
use crvec_core::RoundingMode;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_TABLES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/tables.txt");

#[derive(Parser)]
#[command(name = "crvec", version, about = "Correctly rounded vector exp2/log: tables, verification, benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Regenerate the table artifact, or check the checked-in one.
    GenTables {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compare with the existing artifact instead of writing.
        #[arg(long)]
        check: bool,
    },
    /// Sweep binary32 inputs against the oracle.
    Verify(VerifyArgs),
    /// Replay a hard-case corpus through the full kernel.
    Corpus(CorpusArgs),
    /// Undecided-lane rate of a binary64 fast path.
    Callouts(CalloutArgs),
    /// Soundness, exactness, monotonicity and consistency checks.
    Check(CheckArgs),
    /// Reciprocal-throughput benchmark.
    Bench(BenchArgs),
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "fn")]
    func: String,
    /// rne, rz, ru, rd or all.
    #[arg(long, default_value = "rne")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    stride: u32,
    /// Inclusive bit-pattern range `lo:hi`, as hex patterns or floats, in
    /// either order.
    #[arg(long, allow_hyphen_values = true)]
    range: Option<String>,
    /// Add the exponent-boundary neighborhoods.
    #[arg(long)]
    boundary: bool,
    /// Extra seeded random patterns.
    #[arg(long, default_value_t = 0)]
    random: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Stride 2^8, boundary neighborhoods and 2^20 random patterns.
    #[arg(long)]
    stratified: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long = "fn")]
    func: String,
    #[arg(long)]
    file: PathBuf,
    #[arg(long)]
    all_modes: bool,
    #[arg(long, default_value = "rne")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write a fresh corpus to FILE instead of checking it, sampling this
    /// many random inputs for undecided lanes.
    #[arg(long)]
    generate: Option<u64>,
    /// log2 of the largest distance to a rounding boundary, in ulps, kept
    /// when generating.
    #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
    threshold: f64,
}

#[derive(Args)]
struct CalloutArgs {
    #[arg(long = "fn")]
    func: String,
    #[arg(long, allow_hyphen_values = true)]
    uniform: Option<String>,
    #[arg(long, default_value_t = 10_000_000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "rne")]
    mode: String,
    #[arg(long, default_value_t = 8)]
    width: usize,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// soundness, exactness, monotonicity or consistency.
    kind: String,
    #[arg(long = "fn")]
    func: String,
    /// Inputs (soundness), lanes (consistency) or ladder length (monotonicity).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    uniform: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// One or more functions, comma separated.
    #[arg(long = "fn", value_delimiter = ',')]
    func: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "scalar,batch8")]
    variants: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    uniform: Option<String>,
    #[arg(long, default_value_t = 1 << 20)]
    n: usize,
    #[arg(long, default_value_t = 15)]
    reps: usize,
    #[arg(long, default_value = "rne")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Size the input buffer beyond the last-level cache.
    #[arg(long)]
    large_buffer: bool,
    #[arg(long)]
    json: Option<PathBuf>,
}

type Res<T> = Result<T, String>;

fn kernel(s: &str) -> Res<KernelId> {
    KernelId::from_name(s).ok_or_else(|| format!("unknown function `{s}` (expected exp2f, log2f, exp2 or log)"))
}

fn modes(s: &str) -> Res<Vec<RoundingMode>> {
    if s == "all" {
        return Ok(RoundingMode::ALL.to_vec());
    }
    s.split(',')
        .map(|m| {
            RoundingMode::from_short_name(m)
                .ok_or_else(|| format!("unknown mode `{m}` (expected rne, rz, ru, rd or all)"))
        })
        .collect()
}

fn pair<T>(s: &str, one: impl Fn(&str) -> Res<T>) -> Res<(T, T)> {
    // the separator is the first ':' not at the start, so `-20:20` parses
    let at = s.char_indices().skip(1).find(|&(_, c)| c == ':').map(|(i, _)| i);
    let (a, b) = at.map(|i| (&s[..i], &s[i + 1..])).ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    Ok((one(a)?, one(b)?))
}

fn number(s: &str) -> Res<f64> {
    s.parse::<f64>().or_else(|_| parse_f64(s).map_err(|e| e.to_string()))
}

fn uniform(s: &str) -> Res<Distribution> {
    let (lo, hi) = pair(s, number)?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("empty or unbounded interval `{s}`"));
    }
    Ok(Distribution::Uniform { lo, hi })
}

fn pattern(s: &str) -> Res<u32> {
    let t = s.trim();
    if let Some(h) = t.strip_prefix("0x").filter(|h| !h.contains(['p', '.'])) {
        return u32::from_str_radix(h, 16).map_err(|e| format!("bad pattern `{s}`: {e}"));
    }
    let v = t.parse::<f32>().ok().filter(|v| v.to_string() == t || t.parse::<f64>().ok() == Some(*v as f64));
    match v {
        Some(v) => Ok(v.to_bits()),
        None => parse_f32(t).map(f32::to_bits).map_err(|e| format!("bad pattern `{s}`: {e}")),
    }
}

fn write(path: &Path, text: &str) -> Res<()> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_json<T: serde::Serialize>(path: Option<&PathBuf>, v: &T) -> Res<()> {
    match path {
        Some(p) => write(p, &(serde_json::to_string_pretty(v).expect("serializable") + "\n")),
        None => Ok(()),
    }
}

fn f64_kernel(k: KernelId) -> Res<F64Fn> {
    k.f64_fn().ok_or_else(|| format!("{} is a binary32 kernel; use exp2 or log", k.name()))
}

fn gen_tables(out: Option<PathBuf>, check: bool) -> Res<bool> {
    let path = out.unwrap_or_else(|| PathBuf::from(DEFAULT_TABLES));
    let (t, certs) = gen_all_tables().map_err(|e| e.to_string())?;
    for c in &certs {
        println!("{:<28} degree {:>2}  bound {:.3e}  budget {:.3e}", c.name, c.degree, c.bound, c.budget);
    }
    let fresh = artifact::format(&t, &certs);
    if !check {
        write(&path, &fresh)?;
        println!("wrote {}", path.display());
        return Ok(true);
    }
    let old = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let r = artifact::compare(&old, &fresh).map_err(|e| e.to_string())?;
    if r.passed() {
        println!("{}: bit-identical", path.display());
    } else {
        println!("{}: {} differing entries", path.display(), r.total_mismatches);
        for m in &r.mismatches {
            println!("  {m}");
        }
    }
    Ok(r.passed())
}

fn verify(a: VerifyArgs) -> Res<bool> {
    let k = kernel(&a.func)?;
    let f =
        k.f32_fn().ok_or_else(|| format!("{} is a binary64 kernel; use `corpus`, `callouts` or `check`", k.name()))?;
    let ms = modes(&a.mode)?;
    if a.stride == 0 {
        return Err("stride must be at least 1".into());
    }
    // negative floats have descending patterns
    let range = a.range.as_deref().map(|r| pair(r, pattern)).transpose()?.map(|(a, b)| (a.min(b), a.max(b)));
    let base = if a.stratified { SweepOptions::stratified(a.seed) } else { SweepOptions::exhaustive() };
    let opts = SweepOptions {
        stride: if a.stratified && a.stride == 1 { base.stride } else { a.stride },
        range,
        boundary: base.boundary || a.boundary,
        random: base.random.max(a.random),
        seed: a.seed,
        jobs: a.jobs,
        cap: a.cap,
    };
    let r = sweep_f32(f, &ms, &opts);
    print!("{}", r.to_table());
    if let Some(p) = &a.report {
        write(p, &(r.to_json() + "\n"))?;
    }
    Ok(r.passed())
}

fn corpus(a: CorpusArgs) -> Res<bool> {
    let k = kernel(&a.func)?;
    if let Some(n) = a.generate {
        let f = f64_kernel(k)?;
        let cases = generate_hard_cases(f, n, a.seed, a.threshold);
        let header = format!(
            "{} hard cases: structured families plus undecided lanes of {n} random inputs (seed {}),\nkept within 2^{} ulp of a rounding boundary",
            k.name(),
            a.seed,
            a.threshold
        );
        write(&a.file, &format_corpus(&cases, &header))?;
        println!("wrote {} cases to {}", cases.len(), a.file.display());
        return Ok(true);
    }
    let ms = if a.all_modes { RoundingMode::ALL.to_vec() } else { modes(&a.mode)? };
    let text = std::fs::read_to_string(&a.file).map_err(|e| format!("{}: {e}", a.file.display()))?;
    let r = corpus_check(&a.file.display().to_string(), &text, k, &ms, a.seed);
    print!("{}", r.to_table());
    if let Some(p) = &a.report {
        write(p, &(r.to_json() + "\n"))?;
    }
    Ok(r.passed())
}

fn callouts(a: CalloutArgs) -> Res<bool> {
    let f = f64_kernel(kernel(&a.func)?)?;
    let dist = a.uniform.as_deref().map(uniform).transpose()?.unwrap_or(Distribution::default_for(f));
    let [m] = modes(&a.mode)?[..] else {
        return Err("callouts takes a single mode".into());
    };
    if a.n == 0 {
        return Err("n must be at least 1".into());
    }
    if ![1, 4, 8, 16].contains(&a.width) {
        return Err(format!("unsupported width {}", a.width));
    }
    let s = checks::callout_stats(f, dist, a.n, a.seed, m, a.width);
    print!("{}", s.to_table());
    write_json(a.json.as_ref(), &s)?;
    Ok(true)
}

fn check(a: CheckArgs) -> Res<bool> {
    let k = kernel(&a.func)?;
    let (text, json, ok) = match a.kind.as_str() {
        "soundness" => {
            let f = f64_kernel(k)?;
            let dist = a.uniform.as_deref().map(uniform).transpose()?.unwrap_or(Distribution::default_for(f));
            let r = checks::soundness(f, dist, a.n.unwrap_or(100_000_000), a.seed);
            let rate = r.undecided_rate();
            let text = format!(
                "soundness {}: {} inputs x {} modes, {} violations, undecided rate {:.3e} (2^{:.2}), {:.1} s",
                k.name(),
                r.n,
                r.modes.len(),
                r.violations,
                rate,
                rate.log2(),
                r.wall_time_s
            );
            (text, serde_json::to_value(&r), r.passed())
        }
        kind @ ("exactness" | "monotonicity" | "consistency") => {
            let r = match kind {
                "exactness" => checks::exactness(k),
                "monotonicity" => {
                    checks::monotonicity(k, &checks::default_ladder_starts(k), a.n.unwrap_or(1_000_000) as usize)
                }
                _ => checks::consistency(k, a.n.unwrap_or(10_000_000), a.seed),
            };
            let mut text = format!("{kind} {}: {} checked, {} failures", k.name(), r.checked, r.failures);
            for e in &r.examples {
                text += &format!("\n  {e}");
            }
            (text, serde_json::to_value(&r), r.passed())
        }
        other => return Err(format!("unknown check `{other}`")),
    };
    println!("{text}");
    write_json(a.json.as_ref(), &json.expect("serializable"))?;
    Ok(ok)
}

fn run_bench(a: BenchArgs) -> Res<bool> {
    let mode = match modes(&a.mode)?[..] {
        [m] => m,
        _ => return Err("bench takes a single mode".into()),
    };
    let variants = a.variants.iter().map(|v| Variant::parse(v).map_err(|e| e.to_string())).collect::<Res<Vec<_>>>()?;
    let fns = if a.func.is_empty() { vec!["exp2f".to_string()] } else { a.func.clone() };
    let mut reports: Vec<BenchReport> = Vec::new();
    for name in &fns {
        let k = kernel(name)?;
        let mut cfg = BenchConfig {
            n_elements: a.n,
            reps: a.reps,
            mode,
            seed: a.seed,
            large_buffer: a.large_buffer,
            ..BenchConfig::new(k)
        };
        if let Some(u) = &a.uniform {
            cfg.distribution = uniform(u)?;
        }
        for &v in &variants {
            reports.push(bench::throughput(k, v, &cfg).map_err(|e| e.to_string())?);
        }
    }
    print!("{}", bench::report_tables(&reports));
    println!("timing: wall clock per pass over independent inputs, median of {} after one warmup pass", a.reps);
    write_json(a.json.as_ref(), &reports)?;
    Ok(reports.iter().all(|r| r.spot_check.mismatches == 0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::GenTables { out, check } => gen_tables(out, check),
        Cmd::Verify(a) => verify(a),
        Cmd::Corpus(a) => corpus(a),
        Cmd::Callouts(a) => callouts(a),
        Cmd::Check(a) => check(a),
        Cmd::Bench(a) => run_bench(a),
    };
    match r {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
