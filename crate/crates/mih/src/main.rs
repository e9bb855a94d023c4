use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mih_core::costmodel::SubstringLengths;
use mih_core::mih::default_num_tables;
use mih_core::{estimate_correlations, CodeDatabase, MihIndex, Partition, SearchTrace};
use mih::bench::{self, BenchConfig, MihMethod, Query, ScanMethod, SearchMethod};
use mih::{curves, gen, io as mio, lsh, Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "mih", version, about = "Exact Hamming-space search with multi-index hashing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// Independent uniform codes.
    Uniform,
    /// Codes made of runs of `--block` copies of one uniform bit.
    Blocks,
    /// Correlated real-valued vectors (writes a vector file).
    Vectors,
    /// LSH codes of the vector file given by `--vectors`.
    Lsh,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lengths {
    All,
    Divisors,
}

#[derive(clap::Args)]
struct IndexArgs {
    /// Codes file to index.
    #[arg(long)]
    dataset: PathBuf,
    /// Number of substrings; defaults to round(b / log2 n).
    #[arg(long)]
    tables: Option<usize>,
    /// Partition file; defaults to consecutive substrings.
    #[arg(long, conflicts_with = "tables")]
    partition: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[arg(long, value_enum, default_value = "uniform")]
        kind: Kind,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        bits: usize,
        /// Vector dimension for `--kind vectors`.
        #[arg(long, default_value_t = 128)]
        dim: usize,
        /// Run length for `--kind blocks` and `--kind vectors`.
        #[arg(long, default_value_t = 4)]
        block: usize,
        /// Input vector file for `--kind lsh`.
        #[arg(long, required_if_eq("kind", "lsh"))]
        vectors: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an index and write it to disk.
    Build {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer kNN and range queries.
    Query {
        /// Codes file to index; ignored when `--index` is given.
        #[arg(long, required_unless_present = "index")]
        dataset: Option<PathBuf>,
        /// Prebuilt index file.
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        tables: Option<usize>,
        #[arg(long, conflicts_with = "tables")]
        partition: Option<PathBuf>,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        radius: Vec<u32>,
        /// Worker threads; results are identical for any count.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Time multi-index hashing against linear scan after checking that
    /// both return the same answers.
    Bench {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        radius: Vec<u32>,
        /// Untimed queries per method before timing.
        #[arg(long, default_value_t = 100)]
        warmup: usize,
        /// Pick the table count by timing the heuristic and its neighbors.
        #[arg(long, conflicts_with_all = ["tables", "partition"])]
        select_tables: bool,
        /// Seed for the query sample used by `--select-tables`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Emit cost-model curves, or with `--dataset` compare single-table
    /// lookups against measured multi-index lookups.
    Costmodel {
        #[arg(long, default_value_t = 64)]
        bits: u32,
        #[arg(long, value_delimiter = ',', default_value = "16")]
        radius: Vec<u32>,
        /// Database sizes (reals, e.g. 1e9).
        #[arg(long, value_delimiter = ',', default_value = "1e9")]
        n: Vec<f64>,
        #[arg(long, value_enum, default_value = "all")]
        lengths: Lengths,
        #[arg(long, requires = "queries")]
        dataset: Option<PathBuf>,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "10")]
        k: Vec<usize>,
        #[arg(long)]
        tables: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Assign bits to substrings greedily by bit correlation.
    Optimize {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        tables: Option<usize>,
        /// Use only the first this many codes to estimate correlations.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidArgument(_) => 1,
                Error::Mismatch(_) => 3,
                _ => 2,
            })
        }
    }
}

fn usage(message: impl Into<String>) -> Error {
    Error::InvalidArgument(message.into())
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Error::File { path: path.into(), source: e })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_rows<T: Serialize>(rows: &[T], output: &OutputArgs) -> Result<()> {
    let mut w = open_output(output.out.as_deref())?;
    match output.format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(&mut w);
            for row in rows {
                out.serialize(row)?;
            }
            out.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn build_index(db: CodeDatabase, tables: Option<usize>, partition: Option<&Path>) -> Result<MihIndex> {
    let partition = match (partition, tables) {
        (Some(path), _) => mio::read_partition(path)?,
        (None, Some(m)) => Partition::consecutive(db.bits(), m)?,
        (None, None) => Partition::consecutive(db.bits(), default_num_tables(db.bits(), db.len()))?,
    };
    Ok(MihIndex::build(db, partition)?)
}

fn query_list(k: &[usize], radius: &[u32]) -> Result<Vec<Query>> {
    if k.is_empty() && radius.is_empty() {
        return Err(usage("give at least one --k or --radius"));
    }
    Ok(k.iter().map(|&k| Query::Knn(k)).chain(radius.iter().map(|&r| Query::Range(r))).collect())
}

fn check_bits(index: &MihIndex, queries: &CodeDatabase) -> Result<()> {
    if index.db().bits() != queries.bits() {
        return Err(mih_core::Error::LengthMismatch { expected: index.db().bits(), actual: queries.bits() }.into());
    }
    Ok(())
}

#[derive(Serialize)]
struct NeighborRow {
    query: usize,
    kind: &'static str,
    param: u64,
    rank: usize,
    id: u32,
    distance: u32,
}

#[derive(Serialize)]
struct QueryResult {
    query: usize,
    kind: &'static str,
    param: u64,
    neighbors: Vec<(u32, u32)>,
    lookups: u64,
    candidates: u64,
    unique_candidates: u64,
    final_radius: Option<u32>,
}

fn answer_all(index: &MihIndex, queries: &CodeDatabase, list: &[Query], threads: usize) -> Result<Vec<QueryResult>> {
    let answer = |range: std::ops::Range<usize>| -> Result<Vec<QueryResult>> {
        let mut method = MihMethod::new(index);
        let mut out = Vec::new();
        for i in range {
            let q = queries.get(i).unwrap();
            for &query in list {
                let (found, trace) = method.run(&q, query)?;
                let trace = trace.unwrap_or_else(SearchTrace::default);
                out.push(QueryResult {
                    query: i,
                    kind: query.kind(),
                    param: query.param(),
                    neighbors: found.iter().map(|n| (n.id, n.distance)).collect(),
                    lookups: trace.lookups,
                    candidates: trace.candidates,
                    unique_candidates: trace.unique_candidates,
                    final_radius: trace.final_radius,
                });
            }
        }
        Ok(out)
    };
    let threads = threads.clamp(1, queries.len().max(1));
    if threads == 1 {
        return answer(0..queries.len());
    }
    let chunk = queries.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let range = t * chunk..((t + 1) * chunk).min(queries.len());
                scope.spawn(move || answer(range))
            })
            .collect();
        let mut all = Vec::new();
        for h in handles {
            all.extend(h.join().expect("query worker panicked")?);
        }
        Ok(all)
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen { kind, n, bits, dim, block, vectors, seed, out } => match kind {
            Kind::Uniform => mio::write_codes(&gen::gen_uniform(n, bits, seed)?, out),
            Kind::Blocks => mio::write_codes(&gen::gen_block_codes(n, bits, block, seed)?, out),
            Kind::Vectors => mio::write_vectors(&gen::gen_correlated_vectors(n, dim, block, seed)?, out),
            Kind::Lsh => {
                let input = mio::read_vectors(vectors.expect("required by clap"))?;
                let (db, _) = lsh::lsh_encode(&input, bits, seed)?;
                mio::write_codes(&db, out)
            }
        },
        Command::Build { index, out } => {
            let db = mio::read_codes(&index.dataset)?;
            let built = build_index(db, index.tables, index.partition.as_deref())?;
            mio::write_index(&built, out)
        }
        Command::Query { dataset, index, tables, partition, queries, k, radius, threads, output } => {
            let list = query_list(&k, &radius)?;
            let built = match (index, dataset) {
                (Some(path), _) => mio::read_index(path)?,
                (None, Some(path)) => build_index(mio::read_codes(path)?, tables, partition.as_deref())?,
                (None, None) => return Err(usage("give --dataset or --index")),
            };
            let queries = mio::read_codes(queries)?;
            check_bits(&built, &queries)?;
            let results = answer_all(&built, &queries, &list, threads)?;
            match output.format {
                Format::Json => write_rows(&results, &output),
                Format::Csv => {
                    let rows: Vec<NeighborRow> = results
                        .iter()
                        .flat_map(|r| {
                            r.neighbors.iter().enumerate().map(|(rank, &(id, distance))| NeighborRow {
                                query: r.query,
                                kind: r.kind,
                                param: r.param,
                                rank,
                                id,
                                distance,
                            })
                        })
                        .collect();
                    write_rows(&rows, &output)
                }
            }
        }
        Command::Bench { index, queries, k, radius, warmup, select_tables, seed, output } => {
            let list = query_list(&k, &radius)?;
            let db = mio::read_codes(&index.dataset)?;
            let queries = mio::read_codes(queries)?;
            let tables = if select_tables {
                let k = k.first().copied().unwrap_or(10);
                let sample = sample_codes(&queries, 100, seed)?;
                let choice = bench::select_num_tables(&db, &sample, k)?;
                for (m, t) in &choice.timings {
                    eprintln!("m = {m}: {t:.1} us per query");
                }
                eprintln!("selected m = {} (heuristic {})", choice.selected, choice.heuristic);
                Some(choice.selected)
            } else {
                index.tables
            };
            let built = build_index(db, tables, index.partition.as_deref())?;
            check_bits(&built, &queries)?;
            let mut method = MihMethod::new(&built);
            let mut baseline = ScanMethod(built.db());
            let config = BenchConfig { queries: list, warmup };
            let report = bench::run_benchmark(&mut method, &mut baseline, &queries, &config)?;
            let mut w = open_output(output.out.as_deref())?;
            match output.format {
                Format::Csv => bench::write_report_csv(&report, &mut w)?,
                Format::Json => bench::write_report_json(&report, &mut w)?,
            }
            w.flush()?;
            Ok(())
        }
        Command::Costmodel { bits, radius, n, lengths, dataset, queries, k, tables, output } => {
            if let (Some(dataset), Some(queries)) = (dataset, queries) {
                let built = build_index(mio::read_codes(dataset)?, tables, None)?;
                let queries = mio::read_codes(queries)?;
                check_bits(&built, &queries)?;
                let rows = k
                    .iter()
                    .map(|&k| curves::single_table_comparison(&built, &queries, k))
                    .collect::<Result<Vec<_>>>()?;
                return write_rows(&rows, &output);
            }
            let lengths = match lengths {
                Lengths::All => SubstringLengths::All,
                Lengths::Divisors => SubstringLengths::Divisors,
            };
            write_rows(&curves::cost_curves(bits, &radius, &n, lengths)?, &output)
        }
        Command::Optimize { dataset, tables, sample, seed, out } => {
            let db = mio::read_codes(dataset)?;
            let m = tables.unwrap_or_else(|| default_num_tables(db.bits(), db.len()));
            let db = match sample {
                Some(s) if s < db.len() => {
                    CodeDatabase::from_words(db.bits(), db.as_words()[..s * db.stride()].to_vec())?
                }
                _ => db,
            };
            let corr = estimate_correlations(&db)?;
            let partition = mih_core::greedy_assign(&corr, m, seed)?;
            mio::write_partition(&partition, out)
        }
    }
}

/// Up to `count` codes drawn without replacement.
fn sample_codes(db: &CodeDatabase, count: usize, seed: u64) -> Result<CodeDatabase> {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, db.len(), count.min(db.len())).into_vec();
    picked.sort_unstable();
    let mut out = CodeDatabase::with_capacity(db.bits(), picked.len())?;
    for i in picked {
        out.push(&db.get(i).unwrap())?;
    }
    Ok(out)
}
