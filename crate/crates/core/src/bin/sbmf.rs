use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sbmf::block::{b64, BlockFormat, BlockSize, FormatSet, Scheme};
use sbmf::codec::{self, BlockedContainer, Values};
use sbmf::fetch::Fetcher;
use sbmf::matrix::{parse_matrix_market, ParsedMatrix, Precision};
use sbmf::optimize::{named_size_set, optimal_config, SearchSpace};
use sbmf::report::{self, analyze_matrix, CorpusInput, CorpusRunConfig};

#[derive(Parser)]
#[command(name = "sbmf", version, about = "Space-efficient blocked sparse matrix storage")]
struct Cli {
    /// Number of worker threads for corpus processing (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download matrices from the SuiteSparse collection into the cache
    Fetch(FetchArgs),
    /// Compute the footprint table and optimum of one matrix
    Analyze(AnalyzeArgs),
    /// Encode a Matrix Market file into a blocked container
    Encode(EncodeArgs),
    /// Decode a blocked container back to Matrix Market
    Decode(DecodeArgs),
    /// Check a container's payload against the footprint model
    Verify(VerifyArgs),
    /// Run the full corpus pipeline and write a report directory
    Corpus(CorpusArgs),
    /// Rank all 64 block sizes over a corpus
    Rank(ListArgs),
    /// Run the subset-consistency experiment over a corpus
    Consistency(ConsistencyArgs),
}

#[derive(Args)]
struct FetchArgs {
    /// Matrix ids in Group/Name form, or archive URLs
    #[arg(required = true)]
    ids: Vec<String>,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct CacheArgs {
    /// Cache directory (default: $SBMF_CACHE_DIR or ~/.cache/sbmf)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Never touch the network; fail on cache misses
    #[arg(long)]
    offline: bool,
}

impl CacheArgs {
    fn fetcher(&self) -> Fetcher {
        Fetcher::new(self.cache_dir.clone(), self.offline)
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Matrix Market file, or a Group/Name id to fetch
    source: String,
    /// Block-size set: b64, b20, b14 or b8
    #[arg(long, default_value = "b64")]
    sizes: String,
    /// Value precision: 32, 64 or both
    #[arg(long, default_value = "both")]
    precision: String,
    /// Write the report as JSON here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct EncodeArgs {
    /// Matrix Market input file, or a Group/Name id to fetch
    source: String,
    /// Output container path
    #[arg(long, short)]
    output: PathBuf,
    /// Storage scheme (coo, csr, bitmap, dense, min-fixed, adaptive,
    /// min-fixed-wo-csr, adaptive-wo-csr); default: best of the full space
    #[arg(long)]
    scheme: Option<String>,
    /// Block size as HxW, e.g. 8x16; default: best of the full space
    #[arg(long)]
    size: Option<String>,
    /// Value precision: 32 or 64
    #[arg(long, default_value = "64")]
    precision: String,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct DecodeArgs {
    /// Container input file
    input: PathBuf,
    /// Matrix Market output path (default: stdout)
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Container input file
    input: PathBuf,
}

#[derive(Args)]
struct ListArgs {
    /// CSV corpus list with header `id,kind,path`
    #[arg(long)]
    list: PathBuf,
    /// Output file (default: stdout)
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    /// CSV corpus list with header `id,kind,path`
    #[arg(long)]
    list: PathBuf,
    /// Report output directory
    #[arg(long, short)]
    output: PathBuf,
    /// Keep only matrices with more than 100000 nonzeros
    #[arg(long)]
    filter_nnz: bool,
    /// Keep matrices with duplicate nonzero structure
    #[arg(long)]
    no_dedup: bool,
    /// Seed of the consistency experiment sampler
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random subsets per consistency configuration
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Subset size (default: min(200, corpus size))
    #[arg(long)]
    subset_size: Option<usize>,
}

#[derive(Args)]
struct ConsistencyArgs {
    #[command(flatten)]
    list: ListArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Subset size (default: min(200, corpus size))
    #[arg(long)]
    subset_size: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fetch(args) => {
            let fetcher = args.cache.fetcher();
            for id in &args.ids {
                let path = fetcher.fetch(id)?;
                println!("{}\t{}", id, path.display());
            }
            Ok(())
        }
        Command::Analyze(args) => analyze(args),
        Command::Encode(args) => encode(args),
        Command::Decode(args) => decode(args),
        Command::Verify(args) => verify(args),
        Command::Corpus(args) => corpus(args),
        Command::Rank(args) => rank(args),
        Command::Consistency(args) => consistency(args),
    }
}

fn parse_precisions(s: &str) -> Result<Vec<Precision>> {
    match s {
        "32" => Ok(vec![Precision::Single]),
        "64" => Ok(vec![Precision::Double]),
        "both" => Ok(Precision::BOTH.to_vec()),
        other => bail!("invalid precision `{other}` (expected 32, 64 or both)"),
    }
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "coo" => Scheme::Fixed(BlockFormat::Coo),
        "csr" => Scheme::Fixed(BlockFormat::Csr),
        "bitmap" => Scheme::Fixed(BlockFormat::Bitmap),
        "dense" => Scheme::Fixed(BlockFormat::Dense),
        "min-fixed" => Scheme::MinFixed(FormatSet::ALL),
        "adaptive" => Scheme::Adaptive(FormatSet::ALL),
        "min-fixed-wo-csr" => Scheme::MinFixed(FormatSet::WITHOUT_CSR),
        "adaptive-wo-csr" => Scheme::Adaptive(FormatSet::WITHOUT_CSR),
        other => bail!("unknown scheme `{other}`"),
    })
}

/// Treats `source` as a local file when it exists, otherwise as a
/// collection id to fetch.
fn load_source(source: &str, cache: &CacheArgs) -> Result<ParsedMatrix> {
    let path = if Path::new(source).exists() {
        PathBuf::from(source)
    } else if source.contains('/') && !source.contains('.') {
        cache.fetcher().fetch(source)?
    } else {
        bail!("input file `{source}` not found");
    };
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))?;
    parse_matrix_market(&text).with_context(|| format!("parsing {}", path.display()))
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let parsed = load_source(&args.source, &args.cache)?;
    let sizes = named_size_set(&args.sizes)
        .ok_or_else(|| anyhow!("unknown size set `{}`", args.sizes))?;
    let precisions = parse_precisions(&args.precision)?;
    let mut schemes = Scheme::s6().to_vec();
    schemes.extend(Scheme::without_csr_variants());
    let report = analyze_matrix(&args.source, &parsed.matrix, &schemes, &sizes, &precisions)?;
    let json = serde_json::to_string_pretty(&report)?;
    match args.output {
        Some(path) => fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let parsed = load_source(&args.source, &args.cache)?;
    let precisions = parse_precisions(&args.precision)?;
    if precisions.len() != 1 {
        bail!("encode needs a single precision (32 or 64)");
    }
    let p = precisions[0];
    let (scheme, size) = match (&args.scheme, &args.size) {
        (Some(s), Some(sz)) => (
            parse_scheme(s)?,
            BlockSize::parse(sz).ok_or_else(|| anyhow!("invalid block size `{sz}`"))?,
        ),
        (None, None) => {
            let opt = optimal_config(&parsed.matrix, &SearchSpace::full(), p)?;
            eprintln!("selected {} at {} ({} bits)", opt.scheme, opt.size, opt.bits);
            (opt.scheme, opt.size)
        }
        (Some(s), None) => {
            let scheme = parse_scheme(s)?;
            let space = SearchSpace::new(vec![scheme], b64())?;
            let opt = optimal_config(&parsed.matrix, &space, p)?;
            eprintln!("selected {} at {} ({} bits)", opt.scheme, opt.size, opt.bits);
            (scheme, opt.size)
        }
        (None, Some(sz)) => {
            let size = BlockSize::parse(sz).ok_or_else(|| anyhow!("invalid block size `{sz}`"))?;
            let space = SearchSpace::new(Scheme::s6().to_vec(), vec![size])?;
            let opt = optimal_config(&parsed.matrix, &space, p)?;
            eprintln!("selected {} at {} ({} bits)", opt.scheme, opt.size, opt.bits);
            (opt.scheme, size)
        }
    };
    let values = Values::from_f64(p, &parsed.values);
    let container = codec::encode(&parsed.matrix, &values, scheme, size, p)?;
    container.write_file(&args.output)?;
    println!(
        "{}: {} at {}, payload {} bits ({} bytes on disk)",
        args.output.display(),
        scheme,
        size,
        container.payload_bits,
        container.to_bytes().len()
    );
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<()> {
    let container = BlockedContainer::read_file(&args.input)?;
    let (matrix, values) = codec::decode(&container)?;
    let values_f64: Vec<f64> = match values {
        Values::F32(v) => v.into_iter().map(f64::from).collect(),
        Values::F64(v) => v,
    };
    let text = matrix.to_matrix_market(Some(&values_f64));
    match args.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<()> {
    let container = BlockedContainer::read_file(&args.input)?;
    let (payload, model) = codec::verify(&container)?;
    println!(
        "{}: OK, payload {} bits == model {} bits ({} at {}, {}-bit values)",
        args.input.display(),
        payload,
        model,
        container.scheme,
        container.size,
        container.precision
    );
    Ok(())
}

fn read_corpus_list(path: &Path) -> Result<Vec<CorpusInput>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading corpus list {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("corpus list is missing a `{name}` column"))
    };
    let (id_i, kind_i, path_i) = (idx("id")?, idx("kind")?, idx("path")?);
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut inputs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let rel = Path::new(&record[path_i]);
        let path = if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            base.join(rel)
        };
        inputs.push(CorpusInput {
            id: record[id_i].to_string(),
            kind: record[kind_i].to_string(),
            path,
        });
    }
    if inputs.is_empty() {
        bail!("corpus list {} has no entries", path.display());
    }
    Ok(inputs)
}

fn corpus(args: CorpusArgs) -> Result<()> {
    let inputs = read_corpus_list(&args.list)?;
    let config = CorpusRunConfig {
        precisions: Precision::BOTH.to_vec(),
        apply_nnz_filter: args.filter_nnz,
        dedup_structure: !args.no_dedup,
        seed: args.seed,
        trials: args.trials,
        subset_size: args.subset_size,
    };
    let summary = report::corpus_run(&inputs, &config, &args.output)?;
    println!(
        "{}: {} matrices in, {} kept, {} failed",
        args.output.display(),
        summary.inputs,
        summary.kept,
        summary.failed
    );
    Ok(())
}

/// Parses and tabulates every corpus matrix in parallel.
fn load_tables(inputs: &[CorpusInput]) -> Result<Vec<sbmf::stats::MatrixTables>> {
    use rayon::prelude::*;
    inputs
        .par_iter()
        .map(|input| {
            let text = fs::read_to_string(&input.path)
                .with_context(|| format!("reading {}", input.path.display()))?;
            let parsed = parse_matrix_market(&text)
                .with_context(|| format!("parsing {}", input.path.display()))?;
            Ok(sbmf::stats::MatrixTables::compute(&parsed.matrix))
        })
        .collect()
}

fn write_lines(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn rank(args: ListArgs) -> Result<()> {
    let inputs = read_corpus_list(&args.list)?;
    let tables = load_tables(&inputs)?;
    let mut out = String::from("rank,precision,size,avg,max\n");
    for p in Precision::BOTH {
        let per_precision: Vec<_> = tables.iter().map(|t| t.for_precision(p).clone()).collect();
        let ranked = sbmf::optimize::rank_block_sizes(&per_precision)?;
        for (i, r) in ranked.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                p,
                r.size,
                report::pct(r.avg),
                report::pct(r.max)
            ));
        }
    }
    write_lines(args.output.as_deref(), &out)
}

fn consistency(args: ConsistencyArgs) -> Result<()> {
    let inputs = read_corpus_list(&args.list.list)?;
    let tables = load_tables(&inputs)?;
    let params = sbmf::stats::ConsistencyParams {
        subset_size: args.subset_size.unwrap_or_else(|| tables.len().min(200)),
        trials: args.trials,
        seed: args.seed,
    };
    let size_sets: [(&str, Vec<BlockSize>); 4] = [
        ("B64", b64()),
        ("B20", sbmf::optimize::b20()),
        ("B14", sbmf::optimize::b14()),
        ("B8", sbmf::optimize::b8()),
    ];
    let schemes = [
        Scheme::MinFixed(FormatSet::ALL),
        Scheme::Adaptive(FormatSet::ALL),
    ];
    let mut out =
        String::from("precision,scheme,sizes,std_dev_avg,std_dev_max,normalized_avg,normalized_max\n");
    for p in Precision::BOTH {
        for scheme in schemes {
            for (label, sizes) in &size_sets {
                let deltas = sbmf::stats::scheme_deltas(&tables, scheme, sizes, p)?;
                let r = sbmf::stats::consistency_experiment(
                    &deltas,
                    &scheme.to_string(),
                    label,
                    p,
                    &params,
                )?;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    p,
                    scheme,
                    label,
                    report::pct(r.std_dev_avg),
                    report::pct(r.std_dev_max),
                    r.normalized_avg.map_or("n/a".into(), report::pct),
                    r.normalized_max.map_or("n/a".into(), report::pct)
                ));
            }
        }
    }
    write_lines(args.list.output.as_deref(), &out)
}
