//! `crvx` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal failure.
//! Standard output is deterministic for identical inputs; timings go to
//! standard error.

use std::io::Write;
use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crvx::embedding::GaussianSource;
use crvx::eval::{eval_index, run_concentration_suite, ConcentrationConfig, QueryMode};
use crvx::io::{load_index, parse_dataset, save_index};
use crvx::metrics::{brute_force_lp_distance, curve_distance};
use crvx::{build, Backend, Curve, CurveMetric, Error, PNorm, Point, SearchParams};

#[derive(Parser)]
#[command(name = "crvx", version, about = "Approximate nearest-neighbor search for curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index over a dataset file and save it.
    Build {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer every curve of a query file against a saved index.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Build an index and compare its answers with an exact scan.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        mode: ModeArgs,
    },
    /// Run the concentration checks and a metric oracle comparison.
    Selftest {
        /// Smaller trial counts; the thresholds are unchanged.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// Exponent of the curve distance: a real >= 1, or `inf`.
    #[arg(long)]
    p: String,
    #[arg(long)]
    eps: f64,
    /// Repetitions; defaults to ceil(4 / eps).
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value = "scan")]
    backend: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed projection dimension instead of the derived one.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    k_scale: f64,
}

#[derive(Args)]
#[group(multiple = false)]
struct ModeArgs {
    #[arg(long)]
    dfd: bool,
    #[arg(long)]
    dtw: bool,
}

impl ModeArgs {
    fn mode(&self) -> QueryMode {
        match (self.dfd, self.dtw) {
            (true, _) => QueryMode::Dfd,
            (_, true) => QueryMode::Dtw,
            _ => QueryMode::Native,
        }
    }
}

enum Failure {
    Usage(String),
    Data(Error),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn search_params(a: &ParamArgs) -> Result<SearchParams, Failure> {
    let usage = |e: Error| Failure::Usage(e.to_string());
    let p: PNorm = a.p.parse().map_err(usage)?;
    let mut params = SearchParams::new(p, a.eps);
    if let Some(r) = a.reps {
        params.repetitions = r;
    }
    params.backend = a.backend.parse::<Backend>().map_err(usage)?;
    params.seed = a.seed;
    params.k_override = a.k;
    params.k_scale = a.k_scale;
    params.validate().map_err(usage)?;
    Ok(params)
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Internal(e.to_string());
    match cli.command {
        Command::Build { data, params, out: path } => {
            let params = search_params(&params)?;
            let curves = parse_dataset(&data)?;
            let start = Instant::now();
            let index = build(curves, params)?;
            eprintln!("built in {:.3}s", start.elapsed().as_secs_f64());
            save_index(&index, &path)?;
            let m = index.meta();
            writeln!(
                out,
                "index n={} m={} d={} k={} effective_p={} repetitions={} stored_vectors={}",
                m.n,
                m.m,
                m.d,
                m.k,
                m.effective_p,
                index.params().repetitions,
                index.stored_vectors()
            )
            .map_err(io)?;
        }
        Command::Query { index, query, mode } => {
            let index = load_index(&index)?;
            let queries = parse_dataset(&query)?;
            let metric = match mode.mode() {
                QueryMode::Native => CurveMetric::from(index.meta().requested_p),
                QueryMode::Dfd => CurveMetric::Dfd,
                QueryMode::Dtw => CurveMetric::Dtw,
            };
            let start = Instant::now();
            for q in &queries {
                let r = match mode.mode() {
                    QueryMode::Native => index.query(q),
                    QueryMode::Dfd => index.query_dfd(q),
                    QueryMode::Dtw => index.query_dtw(q),
                }?;
                let hit = index.curves().iter().find(|c| c.id() == r.curve_id).expect("dataset member");
                writeln!(
                    out,
                    "{} {} {} probes={} candidates={} fallback={}",
                    q.id(),
                    r.curve_id,
                    metric.distance(q, hit)?,
                    r.signatures_probed,
                    r.candidates_examined,
                    r.fallback as u8
                )
                .map_err(io)?;
            }
            eprintln!("answered {} queries in {:.3}s", queries.len(), start.elapsed().as_secs_f64());
        }
        Command::Eval {
            data,
            queries,
            params,
            mode,
        } => {
            let params = search_params(&params)?;
            let curves = parse_dataset(&data)?;
            let queries = parse_dataset(&queries)?;
            let start = Instant::now();
            let index = build(curves, params)?;
            eprintln!("built in {:.3}s", start.elapsed().as_secs_f64());
            let report = eval_index(&index, &queries, mode.mode())?;
            out.write_all(report.render().as_bytes()).map_err(io)?;
        }
        Command::Selftest { quick } => {
            let cfg = if quick {
                ConcentrationConfig {
                    trials: 10_000,
                    tail_trials: 200_000,
                    ..ConcentrationConfig::default()
                }
            } else {
                ConcentrationConfig::default()
            };
            let report = run_concentration_suite(&cfg);
            out.write_all(report.render().as_bytes()).map_err(io)?;
            let oracle = oracle_check(if quick { 100 } else { 500 })?;
            writeln!(
                out,
                "{} metric_oracle value={} require=0 mismatches",
                if oracle == 0 { "PASS" } else { "FAIL" },
                oracle
            )
            .map_err(io)?;
            if !report.passed() || oracle != 0 {
                return Err(Failure::Internal("selftest failed".into()));
            }
        }
    }
    Ok(())
}

/// Number of random curve pairs where the dynamic program and exhaustive
/// traversal enumeration disagree by more than 1e-9.
fn oracle_check(pairs: usize) -> Result<usize, Error> {
    let mut g = GaussianSource::new(7);
    let curve = |g: &mut GaussianSource, d: usize| {
        let len = 1 + (g.next_u64() % 5) as usize;
        let points = (0..len)
            .map(|_| Point::new((0..d).map(|_| g.next_normal()).collect()))
            .collect();
        Curve::new("x", points).expect("valid curve")
    };
    let mut bad = 0;
    for i in 0..pairs {
        let d = 1 + i % 3;
        let (v, u) = (curve(&mut g, d), curve(&mut g, d));
        for p in [
            PNorm::Finite(1.0),
            PNorm::Finite(1.5),
            PNorm::Finite(2.0),
            PNorm::Finite(3.0),
            PNorm::Infinity,
        ] {
            let dp = curve_distance(&v, &u, p)?;
            let bf = brute_force_lp_distance(&v, &u, p)?;
            if (dp - bf).abs() > 1e-9 {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = panic::catch_unwind(|| {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        run(cli, &mut lock)
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(msg))) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Data(e))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
        Err(_) => ExitCode::from(3),
    }
}
