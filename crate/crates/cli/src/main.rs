//! `curator`: ingest, serve, search, aggregate, thumbs, fsck, annotate.
//!
//! Exit codes: 0 ok, 1 operational error, 2 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curator_core::annotator::{load_manifests, AnnotatorManifest};
use curator_core::catalog::Catalog;
use curator_core::index::{QueryParseError, SeriesDocument};
use curator_core::thumbnail::ThumbnailConfig;
use curator_service::{api, ingest_directory, ApiError, Config};
use rayon::prelude::*;

const GRAMMAR: &str = "query grammar: term | \"phrase\" | field:value | field:\"exact\" | field:[lo TO hi] | field:{lo TO hi} | NOT q | q AND q | q OR q | (q); `*` and `?` are wildcards";

#[derive(Parser)]
#[command(name = "curator", version, about = "DICOM curation catalog")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "CURATOR_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    archive_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    annotator_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Archive and index every DICOM or NIfTI file under a path.
    Ingest {
        path: PathBuf,
        /// Only the top-level directory.
        #[arg(long)]
        no_recursive: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        bind: Option<std::net::SocketAddr>,
    },
    /// Print matching series.
    Search {
        query: String,
        /// NDJSON documents instead of a table.
        #[arg(long)]
        json: bool,
        /// Comma-separated columns.
        #[arg(long, default_value = "uid,Modality,PatientID,instance_count,tags")]
        cols: String,
        #[arg(long)]
        sort: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Value counts of fields over the matching series.
    Aggregate {
        query: String,
        #[arg(long, required = true)]
        fields: String,
        /// CSV for a single field.
        #[arg(long, conflicts_with = "json")]
        csv: bool,
        #[arg(long)]
        json: bool,
    },
    /// Render thumbnails of the matching series into the cache.
    Thumbs {
        query: String,
        #[arg(long)]
        edge: Option<u32>,
        /// Also copy each PNG here as `<uid>.png`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check dataset references, archive files and tag mirroring.
    Fsck {
        #[arg(long)]
        json: bool,
    },
    /// Run an annotator over the matching series.
    Annotate {
        name: String,
        query: String,
        #[arg(long)]
        json: bool,
    },
    /// Stand-in annotator: labels the series given in CURATOR_SERIES_UID.
    #[command(hide = true)]
    MockAnnotate {
        input_dir: PathBuf,
        output_dir: PathBuf,
        #[arg(long, default_value = "liver")]
        labels: String,
        #[arg(long)]
        body_part: Option<String>,
    },
}

enum Failure {
    Usage(String),
    Op(String),
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        if e.code == "query_parse_error" {
            Failure::Usage(format!("{}\n{GRAMMAR}", e.message))
        } else {
            Failure::Op(format!("{}: {}", e.code, e.message))
        }
    }
}

impl From<QueryParseError> for Failure {
    fn from(e: QueryParseError) -> Self {
        ApiError::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Op(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("CURATOR_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Op(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = Config::load(cli.config.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(d) = &cli.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(d) = &cli.archive_dir {
        cfg.archive_dir = Some(d.clone());
    }
    if let Some(d) = &cli.annotator_dir {
        cfg.annotator_dir = d.clone();
    }
    Ok(cfg)
}

fn open(cfg: &Config) -> Result<Catalog, Failure> {
    let (cat, report) =
        Catalog::open(&cfg.data_dir, &cfg.archive_dir()).map_err(|e| Failure::Op(format!("{}: {e}", e.code())))?;
    if !report.reconciled.is_empty() || !report.reindexed.is_empty() {
        eprintln!(
            "repaired at open: {} tag mirrors, {} series re-indexed",
            report.reconciled.len(),
            report.reindexed.len()
        );
    }
    Ok(cat)
}

/// Every matching series, paging through the index.
fn all_matches(cat: &Catalog, query: &str, sort: Option<&str>, limit: Option<usize>) -> Result<Vec<SeriesDocument>, Failure> {
    let mut out = Vec::new();
    let cap = limit.unwrap_or(usize::MAX);
    loop {
        let size = (cap - out.len()).min(1000);
        let page = api::search(&cat.index, query, out.len(), size, sort)?;
        let n = page.hits.len();
        out.extend(page.hits);
        if n == 0 || out.len() >= page.total || out.len() >= cap {
            return Ok(out);
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = config(&cli)?;
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Ingest {
            path,
            no_recursive,
            json,
        } => {
            let cat = open(&cfg)?;
            let r = ingest_directory(&cat, &path, !no_recursive)
                .map_err(|e| Failure::Op(format!("{}: {e}", e.code())))?;
            if json {
                writeln!(stdout, "{}", serde_json::to_string(&r).unwrap())?;
            } else {
                for s in &r.skipped {
                    writeln!(stdout, "skipped\t{}\t{}", s.path.display(), s.code)?;
                }
                writeln!(
                    stdout,
                    "scanned {} files: {} instances in {} series, {} skipped, {} ms",
                    r.scanned,
                    r.instances,
                    r.indexed_series,
                    r.skipped.len(),
                    r.duration_ms
                )?;
            }
        }
        Command::Serve { bind } => {
            let mut cfg = cfg;
            if let Some(b) = bind {
                cfg.bind = b;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(curator_service::serve(cfg))?;
        }
        Command::Search {
            query,
            json,
            cols,
            sort,
            limit,
        } => {
            let cat = open(&cfg)?;
            let docs = all_matches(&cat, &query, sort.as_deref(), limit)?;
            if json {
                for d in &docs {
                    writeln!(stdout, "{}", serde_json::to_string(d).unwrap())?;
                }
            } else {
                let cols = api::field_list(&cols);
                writeln!(stdout, "{}", cols.join("\t"))?;
                for d in &docs {
                    let row: Vec<String> = cols.iter().map(|c| cell(d, c)).collect();
                    writeln!(stdout, "{}", row.join("\t"))?;
                }
            }
            eprintln!("{} series", docs.len());
        }
        Command::Aggregate {
            query,
            fields,
            csv,
            json,
        } => {
            let fields = api::field_list(&fields);
            if fields.is_empty() {
                return Err(Failure::Usage("--fields needs at least one field".into()));
            }
            if csv {
                if fields.len() != 1 {
                    return Err(Failure::Usage("--csv exports exactly one field".into()));
                }
                let cat = open(&cfg)?;
                stdout.write_all(&api::aggregate_csv(&cat.index, &query, &fields[0])?)?;
                return Ok(());
            }
            let cat = open(&cfg)?;
            let dist = api::aggregate(&cat.index, &query, &fields)?;
            if json {
                writeln!(stdout, "{}", serde_json::to_string(&dist).unwrap())?;
            } else {
                writeln!(stdout, "field\tvalue\tcount")?;
                for f in &dist.facets {
                    for b in &f.buckets {
                        writeln!(stdout, "{}\t{}\t{}", f.field, b.value, b.count)?;
                    }
                    if f.missing_count > 0 {
                        writeln!(stdout, "{}\t__missing__\t{}", f.field, f.missing_count)?;
                    }
                }
                eprintln!("{} series", dist.total);
            }
        }
        Command::Thumbs { query, edge, out } => {
            let thumb = ThumbnailConfig::with_edge(edge.unwrap_or(cfg.thumb_edge));
            thumb
                .validate()
                .map_err(|e| Failure::Usage(format!("invalid_thumbnail_config: {e}")))?;
            let cat = open(&cfg)?;
            let docs = all_matches(&cat, &query, None, None)?;
            if let Some(o) = &out {
                std::fs::create_dir_all(o)?;
            }
            let results: Vec<(String, Result<usize, String>)> = docs
                .par_iter()
                .map(|d| {
                    let r = cat
                        .thumbnail(&d.series_uid, &thumb)
                        .map_err(|e| format!("{}: {e}", e.code()))
                        .and_then(|png| {
                            if let Some(o) = &out {
                                std::fs::write(o.join(format!("{}.png", d.series_uid)), &png)
                                    .map_err(|e| e.to_string())?;
                            }
                            Ok(png.len())
                        });
                    (d.series_uid.clone(), r)
                })
                .collect();
            let mut failed = 0;
            for (uid, r) in &results {
                match r {
                    Ok(n) => writeln!(stdout, "{uid}\t{n}")?,
                    Err(e) => {
                        failed += 1;
                        eprintln!("{uid}: {e}");
                    }
                }
            }
            if failed > 0 {
                return Err(Failure::Op(format!("{failed} of {} thumbnails failed", results.len())));
            }
        }
        Command::Fsck { json } => {
            let cat = open(&cfg)?;
            let r = cat.fsck();
            if json {
                writeln!(stdout, "{}", serde_json::to_string(&r).unwrap())?;
            } else {
                for d in &r.dangling {
                    writeln!(stdout, "dangling\t{}\t{}\t{}", d.dataset_id, d.dataset_name, d.series_uid)?;
                }
                for u in &r.missing_archive {
                    writeln!(stdout, "missing_archive\t{u}")?;
                }
                for u in &r.tag_mismatches {
                    writeln!(stdout, "tag_mismatch\t{u}")?;
                }
            }
            if !r.is_clean() {
                return Err(Failure::Op("catalog has problems".into()));
            }
            eprintln!("clean");
        }
        Command::Annotate { name, query, json } => {
            let manifest = find_annotator(&cfg.annotator_dir, &name)?;
            let cat = open(&cfg)?;
            let uids: Vec<String> = all_matches(&cat, &query, None, None)?
                .into_iter()
                .map(|d| d.series_uid)
                .collect();
            let work = cfg.data_dir.join("work").join(format!("cli-{}", std::process::id()));
            let items = curator_service::jobs::run_annotator(&cat, &manifest, &uids, &work);
            let _ = std::fs::remove_dir_all(&work);
            for it in &items {
                if json {
                    writeln!(stdout, "{}", serde_json::to_string(it).unwrap())?;
                } else if it.ok {
                    writeln!(stdout, "{}\tok\t{}", it.series_uid, it.structures.join(","))?;
                } else {
                    writeln!(
                        stdout,
                        "{}\t{}\t{}",
                        it.series_uid,
                        it.code.as_deref().unwrap_or(""),
                        it.message.as_deref().unwrap_or("")
                    )?;
                }
            }
            let failed = items.iter().filter(|i| !i.ok).count();
            if failed > 0 {
                return Err(Failure::Op(format!("{failed} of {} series failed", items.len())));
            }
            eprintln!("{} series annotated", items.len());
        }
        Command::MockAnnotate {
            input_dir,
            output_dir,
            labels,
            body_part,
        } => mock_annotate(&input_dir, &output_dir, &labels, body_part)?,
    }
    Ok(())
}

fn cell(d: &SeriesDocument, col: &str) -> String {
    let name = if col == "uid" { "series_uid" } else { col };
    d.field(name).map(|v| v.display_values().join(",")).unwrap_or_default()
}

fn find_annotator(dir: &Path, name: &str) -> Result<AnnotatorManifest, Failure> {
    load_manifests(dir)
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Failure::Op(format!("unknown_annotator: no manifest named `{name}` in {}", dir.display())))
}

fn mock_annotate(input: &Path, output: &Path, labels: &str, body_part: Option<String>) -> Outcome {
    let uid = std::env::var("CURATOR_SERIES_UID").map_err(|_| Failure::Usage("CURATOR_SERIES_UID is not set".into()))?;
    let inputs = std::fs::read_dir(input)?.count();
    if inputs == 0 {
        return Err(Failure::Op(format!("no input files in {}", input.display())));
    }
    let mut result = serde_json::json!({
        "series_uid": uid,
        "structures": api::field_list(labels),
    });
    if let Some(b) = body_part {
        result["body_part"] = b.into();
    }
    std::fs::create_dir_all(output)?;
    std::fs::write(output.join("result.json"), serde_json::to_vec(&result).unwrap())?;
    Ok(())
}
