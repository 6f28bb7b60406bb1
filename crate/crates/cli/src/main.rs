use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use cdbg::analysis::{self, AnalysisModel};
use cdbg::graph_builder::emit_gfa;
use cdbg::pipeline::{self, OutputFormat, RunConfig};
use cdbg::sequence_io::{read_fasta_file, read_manifest};
use cdbg::{Error, SequenceSet, StrandMode};

#[derive(Parser)]
#[command(
    name = "cdbg",
    version,
    about = "Compacted de Bruijn graphs from complete genomes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the compacted graph of one or more FASTA files.
    Construct(ConstructArgs),
    /// Print the closed-form error and memory estimates as TSV.
    #[command(disable_help_flag = true)]
    Estimate(EstimateArgs),
    /// Build the graph by brute force (small inputs only).
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Gfa1,
    Junctions,
}

#[derive(Args)]
struct InputArgs {
    /// FASTA files.
    inputs: Vec<PathBuf>,
    /// File listing one FASTA path per line.
    #[arg(short = 's', long = "sequences")]
    manifest: Option<PathBuf>,
}

impl InputArgs {
    fn paths(&self) -> Result<Vec<PathBuf>, Error> {
        let mut paths = self.inputs.clone();
        if let Some(m) = &self.manifest {
            paths.extend(read_manifest(m)?);
        }
        if paths.is_empty() {
            return Err(Error::config("no input files given"));
        }
        Ok(paths)
    }
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(short = 'k')]
    k: usize,
    /// log2 of the first-pass filter size in bits.
    #[arg(short = 'f', long = "filter-log2-size", default_value_t = 24)]
    filter_log2: u32,
    #[arg(short = 'q', long = "hash-count", default_value_t = 4)]
    hash_count: usize,
    #[arg(short = 'r', long, default_value_t = 1)]
    rounds: usize,
    /// Worker threads (default: available parallelism).
    #[arg(short = 't', long)]
    workers: Option<usize>,
    /// Build over the input strands only.
    #[arg(long)]
    single_strand: bool,
    /// Skip the exact pass and emit the partially compacted graph.
    #[arg(long)]
    partial: bool,
    #[arg(long, value_enum, default_value = "gfa1")]
    format: Format,
    #[arg(long, default_value_t = pipeline::DEFAULT_SEED)]
    seed: u64,
    /// Output file (default: standard output).
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = pipeline::chunking::DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    /// Fail if a round's exact table would hold more keys than this.
    #[arg(long)]
    max_table_keys: Option<usize>,
    /// Run report TSV (default: standard error).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-pass mark counts TSV.
    #[arg(long)]
    mark_counts: Option<PathBuf>,
    /// Per-round partition load estimates TSV.
    #[arg(long)]
    partition_loads: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Hash functions.
    #[arg(short = 'h', long = "hashes", default_value_t = 4)]
    hashes: u32,
    /// Distinct (k+1)-mers.
    #[arg(short = 'E', long = "edges")]
    edges: u64,
    /// Filter size in bits.
    #[arg(short = 'b', long = "bits")]
    bits: u64,
    /// Link (non-junction) k-mers.
    #[arg(short = 'L', long = "links", default_value_t = 0)]
    links: u64,
    /// Junction k-mers.
    #[arg(short = 'J', long = "junctions", default_value_t = 0)]
    junctions: u64,
    /// Mean occurrences of a false-positive junction.
    #[arg(short = 'r', long = "occurrences", default_value_t = 1.0)]
    r: f64,
    /// Edges of the compacted graph.
    #[arg(short = 'g', long = "gc-edges", default_value_t = 0)]
    gc_edges: u64,
    #[arg(short = 'k', default_value_t = 25)]
    k: usize,
    /// Memory budget in bits; adds a suggested filter size.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, action = ArgAction::Help)]
    help: Option<bool>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(short = 'k')]
    k: usize,
    #[arg(long)]
    single_strand: bool,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Parse { .. } | Error::Io { .. } => 2,
        Error::Output(_) | Error::TableOverflow { .. } | Error::OracleTooLarge { .. } => 3,
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn mode(single_strand: bool) -> StrandMode {
    if single_strand {
        StrandMode::Single
    } else {
        StrandMode::Double
    }
}

fn construct(args: ConstructArgs) -> Result<(), Error> {
    let config = RunConfig {
        k: args.k,
        filter_log2_bits: args.filter_log2,
        hash_count: args.hash_count,
        rounds: args.rounds,
        workers: args.workers.unwrap_or(RunConfig::default().workers),
        mode: mode(args.single_strand),
        format: match args.format {
            Format::Gfa1 => OutputFormat::Gfa1,
            Format::Junctions => OutputFormat::Junctions,
        },
        inputs: args.input.paths()?,
        seed: args.seed,
        chunk_size: args.chunk_size,
        partial: args.partial,
        table_limit: args.max_table_keys,
        ..Default::default()
    };
    let out = pipeline::run(&config)?;

    let mut w = open_output(args.output.as_deref())?;
    out.write_output(&mut w)?;
    w.flush()?;

    match &args.report {
        Some(p) => {
            let mut w = open_output(Some(p))?;
            out.report.write_tsv(&mut w)?;
            w.flush()?;
        }
        None => out.report.write_tsv(io::stderr().lock())?,
    }
    if let Some(p) = &args.mark_counts {
        let mut w = open_output(Some(p))?;
        out.report.write_mark_counts(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &args.partition_loads {
        let mut w = open_output(Some(p))?;
        match &out.report.plan {
            Some(plan) => plan.write_tsv(&mut w)?,
            None => {
                cdbg::partitioner::PartitionPlan::single(config.buckets, 0).write_tsv(&mut w)?
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Error> {
    if args.bits == 0 {
        return Err(Error::config("filter size must be positive"));
    }
    let model = AnalysisModel {
        edges: args.edges,
        junctions: args.junctions,
        links: args.links,
        hashes: args.hashes,
        filter_bits: args.bits,
        r: args.r,
        gc_edges: args.gc_edges,
        k: args.k,
        ..Default::default()
    };
    let mut out = io::stdout().lock();
    writeln!(out, "metric\tvalue")?;
    writeln!(out, "q\t{:.6}", model.bloom_fp_prob())?;
    writeln!(out, "p\t{:.6}", model.junction_fp_prob())?;
    writeln!(
        out,
        "expected_false_junctions\t{:.3}",
        model.expected_false_junctions()
    )?;
    writeln!(out, "expected_marks\t{:.3}", model.expected_marks())?;
    writeln!(out, "memory_estimate_bits\t{:.0}", model.memory_estimate())?;
    if let Some(budget) = args.budget {
        writeln!(
            out,
            "suggested_filter_bits\t{}",
            analysis::suggest_filter_size(budget)?
        )?;
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), Error> {
    let mut records = Vec::new();
    for p in args.input.paths()? {
        records.extend(read_fasta_file(&p, args.k)?.records);
    }
    let input = SequenceSet::new(records);
    let graph = cdbg::oracle::naive_compacted_graph(&input, args.k, mode(args.single_strand))?;
    let mut w = open_output(args.output.as_deref())?;
    emit_gfa(&graph, &input, &mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Construct(a) => construct(a),
        Command::Estimate(a) => estimate(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
