use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use msgstat::harness::{ingest_captured, run_corpus, write_captured};
use msgstat::matrix::build_relation_matrix;
use msgstat::numfmt::format_ext;
use msgstat::{CorpusManifest, MessageCatalog, ParserRun};

use crate::output::{OutDir, Summary};
use crate::OutArgs;

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Message catalog JSON.
    #[arg(long, env = "MSGSTAT_CATALOG")]
    catalog: PathBuf,
    /// Manifest CSV (`file_id,path,ground_truth`).
    #[arg(long, env = "MSGSTAT_MANIFEST")]
    manifest: PathBuf,
    /// Dataset label stored in the matrix; defaults to the manifest file stem.
    #[arg(long)]
    label: Option<String>,
    /// Add one synthetic row per parser that fires on a nonzero exit status.
    #[arg(long)]
    exit_rows: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Maximum number of parser subprocesses in flight.
    #[arg(long, env = "MSGSTAT_PARALLELISM", default_value_t = 4)]
    parallelism: usize,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Directory of `f<id>.<parser>.stderr` logs and optional `.meta` sidecars.
    #[arg(long)]
    logs: PathBuf,
}

fn load(args: &CorpusArgs) -> anyhow::Result<(MessageCatalog, CorpusManifest)> {
    let mut catalog =
        MessageCatalog::load(&args.catalog).with_context(|| format!("loading catalog {}", args.catalog.display()))?;
    if args.exit_rows {
        catalog = catalog.with_exit_rows()?;
    }
    let label = match &args.label {
        Some(l) => l.clone(),
        None => args
            .manifest
            .file_stem()
            .map(|s| s.to_string_lossy().replace(char::is_whitespace, "_"))
            .unwrap_or_else(|| "corpus".into()),
    };
    let manifest = CorpusManifest::load(&args.manifest, label)
        .with_context(|| format!("loading manifest {}", args.manifest.display()))?;
    Ok((catalog, manifest))
}

pub fn run(args: &RunArgs) -> anyhow::Result<()> {
    let (catalog, manifest) = load(&args.corpus)?;
    let runs = run_corpus(&manifest, &catalog, args.parallelism)?;
    let out = OutDir::create(&args.corpus.out.out)?;
    write_captured(&out.path("logs"), &runs)?;
    tabulate(&out, &catalog, &manifest, &runs, 0)
}

pub fn ingest(args: &IngestArgs) -> anyhow::Result<()> {
    let (catalog, manifest) = load(&args.corpus)?;
    let ingested = ingest_captured(&args.logs, &manifest, &catalog)?;
    for w in &ingested.warnings {
        log::warn!("{w}");
    }
    let out = OutDir::create(&args.corpus.out.out)?;
    tabulate(&out, &catalog, &manifest, &ingested.runs, ingested.warnings.len())
}

fn tabulate(
    out: &OutDir,
    catalog: &MessageCatalog,
    manifest: &CorpusManifest,
    runs: &[ParserRun],
    warnings: usize,
) -> anyhow::Result<()> {
    let m = build_relation_matrix(&manifest.dataset_label, runs, catalog)?;
    out.write("matrix.csv", |w| Ok(m.write_csv(w)?))?;
    out.write("runs.csv", |w| write_runs(runs, w))?;
    let truth = manifest.ground_truth();
    if !truth.is_empty() {
        out.write("truth.csv", |w| Ok(truth.write_csv(w)?))?;
    }

    let mut summary = Summary::default();
    summary.add("dataset", &manifest.dataset_label);
    summary.add("files", manifest.len());
    summary.add("parsers", catalog.parsers().len());
    summary.add("messages", catalog.len());
    summary.add("runs", runs.len());
    summary.add("timed_out", runs.iter().filter(|r| r.timed_out).count());
    summary.add("nonzero_exit", runs.iter().filter(|r| matches!(r.exit_code, Some(c) if c != 0)).count());
    summary.add("message_firings", m.total());
    summary.add("nonzero_entries", m.nnz());
    summary.add("ingest_warnings", warnings);
    summary.write(out, "summary.csv")?;
    summary.print();
    Ok(())
}

fn write_runs(runs: &[ParserRun], w: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["file_id", "parser", "exit_code", "duration_s", "timed_out"])?;
    for r in runs {
        wtr.write_record([
            r.file_id.to_string(),
            r.parser.clone(),
            r.exit_code.map(|c| c.to_string()).unwrap_or_default(),
            format_ext(r.duration.as_secs_f64()),
            r.timed_out.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
