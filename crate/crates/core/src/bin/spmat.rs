use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spmat::counting::{exact_report, CountReport, ExactSource};
use spmat::matrix::Sigma;
use spmat::oracle::cad_classify;
use spmat::report::verify;
use spmat::sudoku::{assemble, family_rate_experiment, find_family, SearchParams};
use spmat::Error;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_TOO_LARGE: u8 = 3;
const EXIT_EXHAUSTED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "spmat",
    version,
    about = "S-permutation matrix counting and Sudoku generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Source {
    Paper,
    Oracle,
}

#[derive(Args)]
struct Common {
    /// Block size; matrices are n^2 x n^2.
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "table")]
    output_format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Pool {
    #[arg(long, env = "SPMAT_WORKERS", default_value_t = default_workers())]
    workers: usize,
    /// Allow n > 3 (sampling mode for oracle checks).
    #[arg(long)]
    force_large: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form counts and lower bounds, with printed constants for n = 2, 3.
    Formulas {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "paper")]
        source: Source,
        #[arg(long, env = "SPMAT_WORKERS", default_value_t = default_workers())]
        workers: usize,
    },
    /// Run the exhaustive verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pool: Pool,
        /// Include per-check wall time in the JSON report.
        #[arg(long)]
        timings: bool,
    },
    /// Search for a family of k mutually disjoint matrices.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = SearchParams::default().budget)]
        budget: u64,
        #[arg(long, default_value_t = SearchParams::default().stall_limit)]
        stall: u64,
        /// Prefix for `<prefix>.family.json` and `<prefix>.sudoku.txt`.
        #[arg(long)]
        prefix: Option<PathBuf>,
    },
    /// Stream every matrix in enumeration order.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        force_large: bool,
    },
    /// Tally a vs C*A*D by derangement pattern of the factors.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pool: Pool,
        /// Stream index of the matrix to classify against.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Repeat the complete-family search and report the success rate.
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = SearchParams::default().budget)]
        budget: u64,
        #[arg(long, default_value_t = SearchParams::default().stall_limit)]
        stall: u64,
        #[arg(long, env = "SPMAT_WORKERS", default_value_t = default_workers())]
        workers: usize,
    },
}

fn envelope(kind: &str, body: Value) -> Value {
    let mut v = json!({ "schema": format!("spmat.{kind}/1") });
    if let (Value::Object(out), Value::Object(body)) = (&mut v, body) {
        out.extend(body);
    }
    v
}

fn emit(common: &Common, text: String) -> Result<(), Failure> {
    match &common.output {
        Some(path) => fs::write(path, text).map_err(Failure::io),
        None => io::stdout().write_all(text.as_bytes()).map_err(Failure::io),
    }
}

fn emit_json(common: &Common, v: &Value) -> Result<(), Failure> {
    emit(
        common,
        format!("{}\n", serde_json::to_string_pretty(v).expect("json")),
    )
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(e: io::Error) -> Self {
        Failure {
            code: EXIT_CHECK_FAILED,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TooLarge { .. } => EXIT_TOO_LARGE,
            Error::Exhausted { .. } => EXIT_EXHAUSTED,
            _ => EXIT_USAGE,
        };
        let message = match e {
            Error::TooLarge { .. } => format!("{e} (--force-large)"),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

fn table(rows: &[(String, String)]) -> String {
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<w$}  {v}\n"))
        .collect()
}

fn formulas(common: &Common, source: Source, workers: usize) -> Result<(), Failure> {
    let report = match source {
        Source::Paper => CountReport::for_formulas(common.n),
        Source::Oracle => exact_report(common.n, ExactSource::Oracle { workers })?,
    };
    match common.output_format {
        Format::Json => emit_json(common, &envelope("formulas", report.to_json())),
        Format::Table => {
            let rows: Vec<(String, String)> = report
                .rows()
                .into_iter()
                .map(|(k, v, p)| (k.to_string(), format!("{v}  [{p}]")))
                .collect();
            emit(common, format!("n = {}\n{}", common.n, table(&rows)))
        }
    }
}

fn run_verify(common: &Common, pool: &Pool, timings: bool) -> Result<bool, Failure> {
    let report = verify(common.n, pool.workers, pool.force_large)?;
    match common.output_format {
        Format::Json => emit_json(common, &report.to_json(timings))?,
        Format::Table => emit(common, report.to_table(true))?,
    }
    for c in report.failures() {
        eprintln!(
            "FAILED {}: expected {}, got {}",
            c.name,
            c.expected.as_deref().unwrap_or("-"),
            c.actual
        );
    }
    Ok(report.passed())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn generate(
    common: &Common,
    k: usize,
    seed: u64,
    params: SearchParams,
    prefix: Option<&Path>,
) -> Result<(), Failure> {
    let n = common.n;
    if k < 2 || k > n * n {
        return Err(Error::Domain(format!("need 2 <= k <= n^2 = {}, got {k}", n * n)).into());
    }
    let out = find_family(n, k, seed, params)?;
    let record = serde_json::to_value(out.family.to_record()).expect("json");
    let sudoku = if out.family.is_complete() {
        Some(assemble(&out.family)?.to_text())
    } else {
        None
    };
    if let Some(prefix) = prefix {
        let fam = with_suffix(prefix, ".family.json");
        fs::write(
            &fam,
            format!("{}\n", serde_json::to_string(&record).expect("json")),
        )
        .map_err(Failure::io)?;
        if let Some(text) = &sudoku {
            fs::write(with_suffix(prefix, ".sudoku.txt"), text).map_err(Failure::io)?;
        }
    }
    match common.output_format {
        Format::Json => {
            let mut body = json!({
                "n": n, "k": k, "seed": seed,
                "draws": out.draws, "backtracks": out.backtracks,
            });
            if prefix.is_none() {
                body["family"] = record;
                body["sudoku"] = json!(sudoku);
            }
            emit_json(common, &envelope("generate", body))
        }
        Format::Table => {
            let mut text = table(&[
                ("n".into(), n.to_string()),
                ("k".into(), k.to_string()),
                ("seed".into(), seed.to_string()),
                ("draws".into(), out.draws.to_string()),
                ("backtracks".into(), out.backtracks.to_string()),
            ]);
            if prefix.is_none() {
                match sudoku {
                    Some(s) => text.push_str(&s),
                    None => {
                        for m in out.family.members() {
                            text.push_str(&m.to_dense().to_text());
                            text.push('\n');
                        }
                    }
                }
            }
            emit(common, text)
        }
    }
}

fn enumerate(common: &Common, force: bool) -> Result<(), Failure> {
    let sigma = Sigma::new(common.n, force)?;
    let sink: Box<dyn Write> = match &common.output {
        Some(p) => Box::new(fs::File::create(p).map_err(Failure::io)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    let mut count = 0u64;
    for m in sigma.iter() {
        let rec = m.to_record();
        match common.output_format {
            Format::Json => serde_json::to_writer(&mut w, &rec).expect("json"),
            Format::Table => write!(w, "row_off={:?} col_off={:?}", rec.row_off, rec.col_off)
                .map_err(Failure::io)?,
        }
        writeln!(w).map_err(Failure::io)?;
        count += 1;
    }
    match common.output_format {
        Format::Json => writeln!(
            w,
            "{}",
            json!({ "schema": "spmat.enumerate/1", "count": count.to_string() })
        ),
        Format::Table => writeln!(w, "count {count}"),
    }
    .map_err(Failure::io)?;
    w.flush().map_err(Failure::io)
}

fn classify(common: &Common, pool: &Pool, index: u64) -> Result<(), Failure> {
    let sigma = Sigma::new(common.n, pool.force_large)?;
    if sigma.len().is_some_and(|len| index >= len) {
        return Err(Error::Domain(format!("index {index} out of range")).into());
    }
    let a = sigma.matrix_at(index);
    let cls = cad_classify(&a, pool.workers)?;
    match common.output_format {
        Format::Json => {
            let tallies: Vec<Value> = cls
                .tallies
                .iter()
                .map(|t| {
                    json!({
                        "c_pattern": t.class.c_word(),
                        "d_pattern": t.class.d_word(),
                        "basic": t.class.is_basic(),
                        "case": t.class.case_label(),
                        "total_pairs": t.total_pairs.to_string(),
                        "disjoint_pairs": t.disjoint_pairs.to_string(),
                    })
                })
                .collect();
            emit_json(
                common,
                &envelope(
                    "classify",
                    json!({
                        "n": common.n,
                        "index": index,
                        "basic_disjoint": cls.basic_disjoint().to_string(),
                        "nonbasic_disjoint": cls.nonbasic_disjoint().to_string(),
                        "tallies": tallies,
                    }),
                ),
            )
        }
        Format::Table => {
            let mut text = String::from("c_pattern  d_pattern  case      total  disjoint\n");
            for t in &cls.tallies {
                text.push_str(&format!(
                    "{:<9}  {:<9}  {:<8}  {:>5}  {:>8}\n",
                    t.class.c_word(),
                    t.class.d_word(),
                    t.class
                        .case_label()
                        .unwrap_or(if t.class.is_basic() { "basic" } else { "-" }),
                    t.total_pairs,
                    t.disjoint_pairs
                ));
            }
            text.push_str(&format!(
                "basic disjoint {}\nnon-basic disjoint {}\n",
                cls.basic_disjoint(),
                cls.nonbasic_disjoint()
            ));
            emit(common, text)
        }
    }
}

fn rate(
    common: &Common,
    runs: u64,
    seed: u64,
    params: SearchParams,
    workers: usize,
) -> Result<(), Failure> {
    let r = family_rate_experiment(common.n, runs, seed, params, workers)?;
    match common.output_format {
        Format::Json => emit_json(
            common,
            &envelope(
                "rate",
                json!({
                    "n": common.n, "runs": r.runs, "seed": seed,
                    "successes": r.successes, "distinct_families": r.distinct_families,
                    "total_draws": r.total_draws.to_string(),
                }),
            ),
        ),
        Format::Table => emit(
            common,
            table(&[
                ("runs".into(), r.runs.to_string()),
                ("successes".into(), r.successes.to_string()),
                ("distinct_families".into(), r.distinct_families.to_string()),
                ("total_draws".into(), r.total_draws.to_string()),
            ]),
        ),
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let check_n = |n: usize| -> Result<(), Failure> {
        if n == 0 {
            Err(Error::Domain("n must be at least 1".into()).into())
        } else {
            Ok(())
        }
    };
    match &cli.command {
        Command::Formulas {
            common,
            source,
            workers,
        } => {
            check_n(common.n)?;
            formulas(common, *source, *workers)?;
        }
        Command::Verify {
            common,
            pool,
            timings,
        } => {
            check_n(common.n)?;
            return run_verify(common, pool, *timings);
        }
        Command::Generate {
            common,
            k,
            seed,
            budget,
            stall,
            prefix,
        } => {
            check_n(common.n)?;
            let params = SearchParams {
                budget: *budget,
                stall_limit: *stall,
            };
            generate(common, *k, *seed, params, prefix.as_deref())?;
        }
        Command::Enumerate {
            common,
            force_large,
        } => {
            check_n(common.n)?;
            enumerate(common, *force_large)?;
        }
        Command::Classify {
            common,
            pool,
            index,
        } => {
            check_n(common.n)?;
            classify(common, pool, *index)?;
        }
        Command::Rate {
            common,
            runs,
            seed,
            budget,
            stall,
            workers,
        } => {
            check_n(common.n)?;
            let params = SearchParams {
                budget: *budget,
                stall_limit: *stall,
            };
            rate(common, *runs, *seed, params, *workers)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
