use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hqts::bench::{
    cmt_suite, render_bench_csv, render_bench_text, render_study_csv, render_study_text,
    run_bench, run_once, run_study, BenchError, BksTable, Keep, Problem, StartMethod,
    StudyConfig, StudyKind,
};
use hqts::instance::{build_distance_matrix, Instance};
use hqts::qubo::{build_tsp_qubo, route_penalties, PenaltyConfig};
use hqts::sampler::protocol::serve;
use hqts::sampler::{
    sample_sa, AnnealSchedule, ExactSampler, RemoteEndpoint, RemoteSampler, Sampler,
    SamplerError, SamplerSpec,
};
use hqts::tabu::trace::write_trace;
use hqts::tabu::{RerouteAccept, SearchParams};

#[derive(Parser)]
#[command(name = "hqts", version, about = "Hybrid tabu search CVRP solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Run a benchmark suite and print the results table.
    Bench(BenchArgs),
    /// Run a routing-delay or start-method study.
    Study(StudyArgs),
    /// Write the TSP QUBO of one route as JSON.
    QuboExport(QuboExportArgs),
    /// Answer sampler protocol requests with a local backend.
    #[command(hide = true)]
    SamplerServe(ServeArgs),
}

#[derive(Args, Clone)]
struct SamplerArgs {
    /// sa, exact or remote:ADDR (HOST:PORT or stdio:PROGRAM ARGS).
    #[arg(long, default_value = "sa")]
    sampler: SamplerSpec,
    /// Reads per QUBO for the annealing and remote samplers.
    #[arg(long, default_value_t = 1000)]
    num_reads: usize,
    /// Seconds to wait for a remote response.
    #[arg(long, default_value_t = 120)]
    remote_timeout: u64,
}

impl SamplerArgs {
    fn build(&self) -> Result<Box<dyn Sampler<f64>>, SamplerError> {
        build_sampler(&self.sampler, self.num_reads, self.remote_timeout)
    }
}

fn build_sampler(
    spec: &SamplerSpec,
    num_reads: usize,
    timeout_secs: u64,
) -> Result<Box<dyn Sampler<f64>>, SamplerError> {
    match spec {
        SamplerSpec::Remote(addr) => {
            let endpoint: RemoteEndpoint = addr.parse().map_err(SamplerError::Transport)?;
            let mut s = RemoteSampler::new(endpoint);
            s.num_reads = num_reads;
            s.timeout = Duration::from_secs(timeout_secs);
            s.connect()?;
            Ok(Box::new(s))
        }
        other => other.build(num_reads),
    }
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = 250)]
    routing_delay: usize,
    #[arg(long, default_value_t = 100)]
    stop_factor: usize,
    /// Wall-clock cap in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_iterations: Option<u64>,
    /// better: keep a re-sequenced route only if shorter; always: take it.
    #[arg(long, default_value = "better")]
    reroute_accept: RerouteAccept,
    /// Narrow and wide neighbour breadths, e.g. 15,50.
    #[arg(long, value_parser = parse_pair)]
    breadth: Option<(usize, usize)>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

impl SearchArgs {
    fn params(&self, seed: u64) -> SearchParams {
        SearchParams {
            routing_delay: self.routing_delay,
            stop_factor: self.stop_factor,
            seed,
            neighbor_breadth: self.breadth,
            reroute_accept: self.reroute_accept,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            max_iterations: self.max_iterations,
            ..SearchParams::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// cw, cluster or import:PATH.
    #[arg(long, default_value = "cw")]
    start: StartMethod,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solution JSON destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines search trace destination.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Add elapsed_ms to trace events.
    #[arg(long)]
    trace_timing: bool,
    /// Known optimum or best-known cost, for the gap in the summary.
    #[arg(long)]
    bks: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "cmt")]
    suite: String,
    /// Directory holding the suite's instance files.
    #[arg(long, default_value = "data/cmt")]
    data_dir: PathBuf,
    #[arg(long)]
    bks: PathBuf,
    #[arg(long, default_value_t = 3)]
    runs: usize,
    /// best: report the cheapest run; all: also the mean.
    #[arg(long, default_value = "best")]
    keep: Keep,
    #[arg(long, default_value = "cw")]
    start: StartMethod,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Seed of the first run; run k uses seed + k.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Only these instances (comma separated names).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    kind: StudyKind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    num_reads: usize,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct QuboExportArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Customer ids in route order, e.g. "1,5,9".
    #[arg(long, value_delimiter = ',', required = true)]
    route: Vec<usize>,
    /// Constraint weight; defaults to twice the largest distance involved.
    #[arg(long)]
    penalty_a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    penalty_b: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// sa or exact.
    #[arg(long, default_value = "sa")]
    backend: SamplerSpec,
    /// Serve TCP connections on this address instead of stdin/stdout.
    #[arg(long)]
    listen: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit status 2 marks failures of a remote sampler.
struct Failure {
    remote: bool,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let remote = error.chain().any(|c| {
            c.downcast_ref::<SamplerError>().is_some_and(SamplerError::is_remote)
                || matches!(c.downcast_ref::<BenchError>(), Some(BenchError::Sampler(s)) if s.is_remote())
        });
        Self { remote, error }
    }
}

fn remote_failure(error: anyhow::Error) -> Failure {
    Failure { remote: true, error }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Study(a) => study(a),
        Command::QuboExport(a) => qubo_export(a),
        Command::SamplerServe(a) => sampler_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(if f.remote { 2 } else { 1 })
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn solve(a: SolveArgs) -> Result<(), Failure> {
    let problem = Problem::load(&a.instance)?;
    let sampler = a.sampler.build()?;
    let mut params = a.search.params(a.seed);
    params.trace_timing = a.trace_timing;
    params.trace_moves = a.trace.is_some();
    let (record, result) = run_once(&problem, &a.start, &a.sampler.sampler, sampler.as_ref(), &params, a.bks)?;

    let mut json = serde_json::to_string_pretty(&result.best.to_json()).map_err(anyhow::Error::from)?;
    json.push('\n');
    write_output(a.out.as_deref(), &json)?;
    if let Some(path) = &a.trace {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_trace(&result.trace, BufWriter::new(file))?;
    }
    eprintln!(
        "{}: cost {:.2}{} feasible {} routes {} iterations {} (best at {}) reroutes {} sampler calls {} fallbacks {} time {:.1}s",
        record.instance,
        record.cost,
        record.deviation.map(|d| format!(" ({d:.2}% over bks)")).unwrap_or_default(),
        record.feasible,
        result.best.num_routes(),
        record.iterations,
        record.iterations_to_best,
        record.reroute_count,
        record.sampler_calls,
        record.sampler_failures,
        record.wall_ms as f64 / 1000.0,
    );
    if let Some(e) = result.sampler_errors.first() {
        eprintln!("first sampler error: {e}");
    }
    let remote = matches!(a.sampler.sampler, SamplerSpec::Remote(_));
    if remote && record.sampler_calls > 0 && record.sampler_failures == record.sampler_calls {
        return Err(remote_failure(anyhow::anyhow!(
            "every remote sampler call failed; the solution was produced without re-sequencing"
        )));
    }
    if !record.feasible {
        return Err(anyhow::anyhow!("no feasible solution found").into());
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    if a.suite != "cmt" {
        return Err(anyhow::anyhow!("unknown suite {:?}; only cmt is available", a.suite).into());
    }
    let bks = BksTable::load(&a.bks)?;
    let (mut paths, missing) = cmt_suite(&a.data_dir);
    if !a.only.is_empty() {
        paths.retain(|p| {
            p.file_stem()
                .is_some_and(|s| a.only.iter().any(|o| o.as_str() == s.to_string_lossy()))
        });
    }
    if !missing.is_empty() {
        eprintln!("skipping instances without data files: {}", missing.join(", "));
    }
    if paths.is_empty() {
        return Err(anyhow::anyhow!("no instance files found in {}", a.data_dir.display()).into());
    }
    let problems = paths.iter().map(Problem::load).collect::<Result<Vec<_>, _>>()?;
    let sampler = a.sampler.build()?;
    let params = a.search.params(a.seed);
    let report = run_bench(
        &problems,
        &bks,
        a.runs,
        a.keep,
        &a.start,
        &a.sampler.sampler,
        sampler.as_ref(),
        &params,
        |r| {
            eprintln!(
                "{} seed {}: cost {:.2} iterations to best {} time {:.1}s",
                r.instance,
                r.seed,
                r.cost,
                r.iterations_to_best,
                r.wall_ms as f64 / 1000.0
            )
        },
    )?;
    print!("{}", render_bench_text(&report));
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
        fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, render_bench_csv(&report)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn study(a: StudyArgs) -> Result<(), Failure> {
    let config = StudyConfig::load(&a.config)?;
    if config.kind != a.kind {
        return Err(anyhow::anyhow!(
            "--kind {:?} does not match the config's kind {:?}",
            a.kind,
            config.kind
        )
        .into());
    }
    let sampler = build_sampler(&config.sampler, a.num_reads, 120)?;
    let report = run_study(&config, sampler.as_ref(), |cell, r, q| {
        eprintln!(
            "{cell} seed {}: cost {:.2} iterations to best {}{}",
            r.seed,
            r.cost,
            r.iterations_to_best,
            if q { "" } else { " (not qualifying)" }
        )
    })?;
    print!("{}", render_study_text(&report));
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
        fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, render_study_csv(&report)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn qubo_export(a: QuboExportArgs) -> Result<(), Failure> {
    let instance: Instance = Instance::from_file(&a.instance)?;
    let matrix = build_distance_matrix(&instance);
    let n = instance.num_customers();
    if let Some(&bad) = a.route.iter().find(|&&c| c == 0 || c > n) {
        return Err(anyhow::anyhow!("customer id {bad} is outside 1..={n}").into());
    }
    let penalties = match a.penalty_a {
        Some(pa) => PenaltyConfig { a: pa, b: a.penalty_b },
        None => {
            let d = route_penalties(&a.route, 0, &matrix);
            PenaltyConfig { a: d.a * a.penalty_b, b: a.penalty_b }
        }
    };
    let tsp = build_tsp_qubo(&a.route, &matrix, 0, penalties).map_err(anyhow::Error::from)?;
    let mut text = serde_json::to_string(&tsp.qubo.to_wire()).map_err(anyhow::Error::from)?;
    text.push('\n');
    write_output(a.out.as_deref(), &text)?;
    Ok(())
}

fn sampler_serve(a: ServeArgs) -> Result<(), Failure> {
    let exact = match a.backend {
        SamplerSpec::Anneal => false,
        SamplerSpec::Exact => true,
        SamplerSpec::Remote(_) => bail_failure("sampler-serve needs a local backend")?,
    };
    let seed = a.seed;
    let handler = move |q: &hqts::qubo::Qubo, reads: usize| {
        if exact {
            ExactSampler::default().sample(q, seed)
        } else {
            sample_sa(q, &AnnealSchedule::for_qubo(q, reads.max(1), seed))
        }
    };
    match a.listen {
        None => {
            let stdin = io::stdin().lock();
            serve(stdin, io::stdout().lock(), handler)?;
        }
        Some(addr) => {
            let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let stream = stream?;
                let reader = BufReader::new(stream.try_clone()?);
                if let Err(e) = serve(reader, stream, handler) {
                    eprintln!("connection closed: {e}");
                }
            }
        }
    }
    Ok(())
}

fn bail_failure<T>(msg: &str) -> Result<T> {
    bail!("{msg}")
}
