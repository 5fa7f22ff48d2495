use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccs_core::bvs::{run_chains, Hyper, LinearBvsConfig, MoveProbs};
use ccs_core::credible::SignMode;
use ccs_core::datagen::{gen_block_ar, gen_george_mcculloch};
use ccs_core::factorization::AgglomerateConfig;
use ccs_core::io::design::dataset_comments;
use ccs_core::io::report::Status;
use ccs_core::io::{read_design, read_report, read_trace, write_design, write_report, write_svg, write_trace, SvgStyle, TraceFormat};
use ccs_core::oracle::{exact_posterior_enumeration, exhaustive_partition_scan, exhaustive_set_mass, validate_credible_set, ExplicitDistribution, MassSource};
use ccs_core::pipeline::{find, RunConfig};
use ccs_core::summaries::summarize;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ccs", version, about = "Cartesian credible sets for Bayesian variable selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic regression design
    Simulate {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Run the spike-and-slab sampler on a design file
    Sample(SampleArgs),
    /// Build the Cartesian credible set report from a trace
    Find(FindArgs),
    /// Print PIPs, median and MAP models and inclusion correlations
    Summarize {
        trace: PathBuf,
        #[arg(long, default_value_t = 0.04, value_parser = parse_tau)]
        screen: f64,
    },
    /// Brute-force reference computations for small problems
    Oracle {
        #[command(subcommand)]
        op: OracleOp,
    },
}

#[derive(Subcommand)]
enum Generator {
    /// Fifteen variables with correlated and confounded columns
    Gm {
        #[arg(long, default_value_t = 180)]
        n: usize,
        #[arg(long, default_value_t = 2.5)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Five 3×3 autoregressive blocks
    BlockAr {
        #[arg(long, default_value_t = 640)]
        n: usize,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SampleArgs {
    design: PathBuf,
    /// Prior mean model size
    #[arg(long)]
    p0: f64,
    /// Kept draws per chain
    #[arg(long, default_value_t = 50_000)]
    iterations: usize,
    #[arg(long, default_value_t = 20_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Slab variance: a positive number, or "learn"
    #[arg(long, default_value = "learn", value_parser = parse_hyper)]
    g: Hyper,
    /// Prior inclusion probability: a number in [0, 1], or "learn"
    #[arg(long, default_value = "learn", value_parser = parse_hyper)]
    pi: Hyper,
    #[arg(long, default_value_t = 0.4)]
    p_add: f64,
    #[arg(long, default_value_t = 0.4)]
    p_delete: f64,
    #[arg(long, default_value_t = 0.2)]
    p_swap: f64,
    /// Write the packed binary trace format
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FindArgs {
    trace: PathBuf,
    #[arg(long, default_value_t = 0.5, value_parser = parse_lambda)]
    lambda: f64,
    #[arg(long = "M", default_value_t = 2.0, value_parser = parse_positive)]
    m: f64,
    #[arg(long, default_value_t = 0.04, value_parser = parse_tau)]
    screen: f64,
    #[arg(long, default_value = "penalty-added", value_parser = parse_sign_mode)]
    sign_mode: SignMode,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    max_block_size: Option<usize>,
    /// Report path; printed to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleOp {
    /// Exact mass of a report's credible set under the trace's empirical distribution
    SetMass { trace: PathBuf, report: PathBuf },
    /// Exact posterior over all models for fixed g and pi (p ≤ 20)
    Enumerate {
        design: PathBuf,
        #[arg(long, value_parser = parse_positive)]
        g: f64,
        #[arg(long)]
        pi: f64,
        /// Number of top models to print
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// KL-minimal partition for each block count (p ≤ 8)
    PartitionScan { trace: PathBuf },
    /// Check a report's credible set against the trace it came from
    Validate {
        trace: PathBuf,
        report: PathBuf,
        /// Level to check; defaults to the report's lambda
        #[arg(long, value_parser = parse_lambda)]
        lambda: Option<f64>,
    },
}

fn parse_lambda(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1]"))
    }
}

fn parse_tau(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1)"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

fn parse_hyper(s: &str) -> Result<Hyper, String> {
    if s == "learn" {
        Ok(Hyper::Learn)
    } else {
        s.parse().map(Hyper::Fixed).map_err(|e| format!("expected a number or \"learn\": {e}"))
    }
}

fn parse_sign_mode(s: &str) -> Result<SignMode, String> {
    s.parse().map_err(|e: ccs_core::Error| e.to_string())
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<ccs_core::Error> for Failure {
    fn from(e: ccs_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn require(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("no such file: {}", path.display())))
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { generator } => {
            let (data, out) = match generator {
                Generator::Gm { n, sigma, seed, out } => (gen_george_mcculloch(n, sigma, seed)?, out),
                Generator::BlockAr { n, rho, sigma, seed, out } => (gen_block_ar(n, rho, sigma, seed)?, out),
            };
            write_design(&data.design(), &dataset_comments(&data), &out)?;
            eprintln!("wrote {} × {} design to {}", data.n(), data.p(), out.display());
        }
        Command::Sample(a) => {
            require(&a.design)?;
            let design = read_design(&a.design)?;
            let config = LinearBvsConfig {
                iterations: a.iterations,
                burn_in: a.burn_in,
                thin: a.thin,
                seed: a.seed,
                g: a.g,
                pi: a.pi,
                move_probs: MoveProbs {
                    add: a.p_add,
                    delete: a.p_delete,
                    swap: a.p_swap,
                },
                ..LinearBvsConfig::new(a.p0)
            };
            let trace = run_chains(&design, &config, a.chains)?;
            let format = if a.binary { TraceFormat::Binary } else { TraceFormat::Text };
            write_trace(&trace, &a.out, format)?;
            eprintln!("wrote {} draws over {} variables to {}", trace.n_samples(), trace.n_vars(), a.out.display());
        }
        Command::Find(a) => {
            require(&a.trace)?;
            let trace = read_trace(&a.trace)?;
            let config = RunConfig {
                lambda: a.lambda,
                m: a.m,
                screen_tau: a.screen,
                sign_mode: a.sign_mode,
                agglomerate: AgglomerateConfig {
                    max_steps: a.max_steps,
                    max_block_size: a.max_block_size,
                },
                input: a.trace.file_name().map(|f| f.to_string_lossy().into_owned()),
            };
            let report = find(&trace, &config)?;
            match &a.out {
                Some(path) => write_report(&report, path)?,
                None => print!("{}", report.to_json()?),
            }
            if let Some(svg) = &a.svg {
                write_svg(&report, &SvgStyle::default(), svg)?;
            }
            if report.status == Status::Error {
                let msg = report.error.as_ref().map_or_else(String::new, |e| e.message.clone());
                return Err(Failure::Run(msg));
            }
            if let (Some(set), Some(_)) = (&report.credible_set, &a.out) {
                eprintln!("{} blocks, {} models, mass {:.4}", set.blocks.len(), set.size, set.mass);
            }
        }
        Command::Summarize { trace, screen } => {
            require(&trace)?;
            print_json(&summarize(&read_trace(&trace)?, screen)?)?;
        }
        Command::Oracle { op } => match op {
            OracleOp::SetMass { trace, report } => {
                require(&trace)?;
                require(&report)?;
                let dist = ExplicitDistribution::from_trace(&read_trace(&trace)?)?;
                let set = report_set(&read_report(&report)?)?;
                println!("{}", exhaustive_set_mass(&dist, &set)?);
            }
            OracleOp::Enumerate { design, g, pi, top } => {
                require(&design)?;
                let post = exact_posterior_enumeration(&read_design(&design)?, g, pi)?;
                let mut atoms: Vec<_> = post.atoms().iter().collect();
                atoms.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
                for (m, w) in atoms.into_iter().take(top) {
                    println!("{m}\t{w:.6e}");
                }
            }
            OracleOp::PartitionScan { trace } => {
                require(&trace)?;
                for (part, score) in exhaustive_partition_scan(&read_trace(&trace)?)? {
                    println!("{}\t{score:.12}\t{:?}", part.n_blocks(), part.blocks());
                }
            }
            OracleOp::Validate { trace, report, lambda } => {
                require(&trace)?;
                require(&report)?;
                let trace = read_trace(&trace)?;
                let report = read_report(&report)?;
                let set = report_set(&report)?;
                let result = validate_credible_set(MassSource::Trace(&trace), &set, lambda.unwrap_or(set.lambda));
                print_json(&result)?;
                if !result.passed {
                    return Err(Failure::Run(result.diagnostics.join("; ")));
                }
            }
        },
    }
    Ok(())
}

fn report_set(report: &ccs_core::io::Report) -> Result<ccs_core::credible::CartesianCredibleSet, Failure> {
    let set = report
        .credible_set
        .as_ref()
        .ok_or_else(|| Failure::Run("report has no credible set".into()))?;
    Ok(set.to_set(report.screened_out.iter().map(|s| s.index).collect())?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Some(threads) = std::env::var("CCS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // ignore failures: the pool may already exist
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
