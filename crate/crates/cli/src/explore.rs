use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use msgstat::matrix::{aggregate_by_parser, binarize, hconcat, ParserCounts};
use msgstat::pca::{project_files, project_parsers, scree_files, scree_parsers, write_projections, write_scree, PcaResult, Scree};
use msgstat::redundancy::{message_correlations, parser_median_correlation, rank_parsers, write_ranking, write_redundancy_matrix};
use msgstat::{GroundTruth, Label, MessageCatalog, RelationMatrix};

use crate::output::{OutDir, Summary};
use crate::{svg, OutArgs, PlotArgs};

#[derive(Debug, Args)]
pub struct ExploreArgs {
    /// Relation matrix CSV; give twice to explore the concatenation of two corpora.
    #[arg(long = "matrix", required = true, num_args = 1)]
    matrices: Vec<PathBuf>,
    /// Ground truth per matrix, in the same order (used for point colors).
    #[arg(long = "truth", num_args = 1)]
    truths: Vec<PathBuf>,
    /// Message catalog JSON the matrices were built with.
    #[arg(long, env = "MSGSTAT_CATALOG")]
    catalog: PathBuf,
    #[command(flatten)]
    plot: PlotArgs,
    #[command(flatten)]
    out: OutArgs,
}

const GROUPS: [&str; 3] = ["valid", "rejected", "unknown"];

pub fn explore(args: &ExploreArgs) -> anyhow::Result<()> {
    if args.matrices.len() > 2 {
        bail!("at most two matrices can be explored together");
    }
    if !args.truths.is_empty() && args.truths.len() != args.matrices.len() {
        bail!("give one --truth per --matrix or none");
    }
    let catalog = MessageCatalog::load(&args.catalog).with_context(|| format!("loading catalog {}", args.catalog.display()))?;
    let counts = args
        .matrices
        .iter()
        .map(|p| RelationMatrix::load(p).with_context(|| format!("loading matrix {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let truths = args
        .truths
        .iter()
        .map(|p| GroundTruth::load(p).with_context(|| format!("loading ground truth {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if counts.len() == 2 && counts[0].dataset_label == counts[1].dataset_label {
        bail!("both matrices are labelled `{}`; file ids would collide", counts[0].dataset_label);
    }

    let mut binary = binarize(&counts[0]);
    let mut groups: Vec<usize> = group_of(&counts[0], truths.first());
    let mut per_parser = aggregate_by_parser(&counts[0], &catalog)?;
    if let Some(second) = counts.get(1) {
        binary = hconcat(&binary, &binarize(second))?;
        groups.extend(group_of(second, truths.get(1)));
        append_columns(&mut per_parser, aggregate_by_parser(second, &catalog)?);
    }

    let out = OutDir::create(&args.out.out)?;
    let mut summary = Summary::default();
    summary.add("dataset", &binary.dataset_label);
    summary.add("files", binary.n_cols());
    summary.add("messages", binary.n_rows());
    summary.add("never_fired_rows", binary.row_ones().iter().filter(|&&c| c == 0).count());

    // File space.
    if binary.n_cols() >= 2 && binary.n_rows() >= 1 {
        let scree = scree_files(&binary)?;
        let r = project_files(&binary, scree.variances.len().min(3))?;
        let ids: Vec<String> = binary.cols().iter().map(ToString::to_string).collect();
        out.write("files_pca.csv", |w| Ok(write_projections(&ids, &r, w)?))?;
        out.write("files_scree.csv", |w| Ok(write_scree(&scree, w)?))?;
        summary.add("files_total_variance", msgstat::numfmt::format_ext(scree.total_variance));
        if args.plot.enabled() {
            let pts = scatter_points(&r, &groups);
            out.write_str("files_pca.svg", &svg::scatter("Files, first two principal components", &pts, &GROUPS, None))?;
            out.write_str("files_scree.svg", &svg::scree("File-space scree", &scree.fractions))?;
        }
    } else {
        println!("fewer than 2 files; skipping file-space PCA");
    }

    // Parser space.
    if per_parser.parsers.len() >= 2 && !per_parser.cols.is_empty() {
        let scree = scree_parsers(&per_parser)?;
        plot_parsers(&out, args.plot.enabled(), &per_parser, &scree)?;
    } else {
        println!("fewer than 2 parsers or no files; skipping parser-space PCA");
    }

    // Redundancy.
    let corr = message_correlations(&binary)?;
    summary.add("constant_rows_removed", corr.removed.len());
    summary.add("rows_correlated", corr.len());
    let red = parser_median_correlation(&corr, &catalog)?;
    summary.add("parsers_correlated", red.parsers.len());
    summary.add("parsers_without_varying_rows", red.excluded.join(" "));
    let ranking = rank_parsers(&red);
    let order: Vec<String> = ranking.iter().map(|r| r.name.clone()).collect();
    let sorted = red.reordered(&order);
    out.write("redundancy_matrix.csv", |w| Ok(write_redundancy_matrix(&sorted, w)?))?;
    out.write("parser_ranking.csv", |w| Ok(write_ranking(&ranking, w)?))?;
    if args.plot.enabled() {
        out.write_str(
            "redundancy_heatmap.svg",
            &svg::heatmap("Median message correlation between parsers", &sorted.parsers, &sorted.matrix),
        )?;
    }

    summary.write(&out, "summary.csv")?;
    summary.print();
    Ok(())
}

fn plot_parsers(out: &OutDir, plot: bool, per_parser: &ParserCounts, scree: &Scree) -> anyhow::Result<()> {
    let r = project_parsers(per_parser, scree.variances.len().min(3))?;
    out.write("parsers_pca.csv", |w| Ok(write_projections(&per_parser.parsers, &r, w)?))?;
    out.write("parsers_scree.csv", |w| Ok(write_scree(scree, w)?))?;
    if plot {
        let pts = scatter_points(&r, &vec![0; per_parser.parsers.len()]);
        out.write_str(
            "parsers_pca.svg",
            &svg::scatter("Parsers, first two principal components", &pts, &["parser"], Some(&per_parser.parsers)),
        )?;
        out.write_str("parsers_scree.svg", &svg::scree("Parser-space scree", &scree.fractions))?;
    }
    Ok(())
}

fn group_of(m: &RelationMatrix, truth: Option<&GroundTruth>) -> Vec<usize> {
    m.cols()
        .iter()
        .map(|c| match truth.and_then(|t| t.get(c.id)) {
            Some(Label::Valid) => 0,
            Some(Label::Rejected) => 1,
            None => 2,
        })
        .collect()
}

fn append_columns(into: &mut ParserCounts, more: ParserCounts) {
    into.cols.extend(more.cols);
    for (row, extra) in into.counts.iter_mut().zip(more.counts) {
        row.extend(extra);
    }
}

fn scatter_points(r: &PcaResult, groups: &[usize]) -> Vec<(f64, f64, usize)> {
    r.projections
        .iter()
        .zip(groups)
        .map(|(p, &g)| (p[0], p.get(1).copied().unwrap_or(0.0), g))
        .collect()
}
