use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use msgstat::bernoulli::{classify, score_dataset, write_scores};
use msgstat::evaluation::{roc, write_roc};
use msgstat::matrix::binarize;
use msgstat::numfmt::format_ext;
use msgstat::{BinaryRelationMatrix, GroundTruth, Label, MisclassificationScore, RelationMatrix, ScoreOptions, Threshold};

use crate::output::{OutDir, Summary};
use crate::{svg, OutArgs, PlotArgs};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Relation matrix of the mostly-valid corpus.
    #[arg(long)]
    matrix_a: PathBuf,
    /// Relation matrix of the mostly-rejected corpus.
    #[arg(long)]
    matrix_b: PathBuf,
    /// Ground truth (`file_id,label`) for corpus A.
    #[arg(long)]
    truth_a: Option<PathBuf>,
    /// Ground truth (`file_id,label`) for corpus B.
    #[arg(long)]
    truth_b: Option<PathBuf>,
    /// Additive smoothing for the message probabilities.
    #[arg(long, env = "MSGSTAT_ALPHA", default_value_t = 0.0)]
    alpha: f64,
    /// Flag files with λ above this value.
    #[arg(long, env = "MSGSTAT_THRESHOLD", default_value_t = 1.0)]
    threshold: f64,
    /// Estimate each file's own-corpus probabilities without that file.
    #[arg(long)]
    leave_one_out: bool,
    #[command(flatten)]
    plot: PlotArgs,
    #[command(flatten)]
    out: OutArgs,
}

fn load_matrix(path: &PathBuf) -> anyhow::Result<BinaryRelationMatrix> {
    let m = RelationMatrix::load(path).with_context(|| format!("loading matrix {}", path.display()))?;
    Ok(binarize(&m))
}

fn load_truth(path: &Option<PathBuf>) -> anyhow::Result<Option<GroundTruth>> {
    path.as_ref()
        .map(|p| GroundTruth::load(p).with_context(|| format!("loading ground truth {}", p.display())))
        .transpose()
}

pub fn analyze(args: &AnalyzeArgs) -> anyhow::Result<()> {
    let a = load_matrix(&args.matrix_a)?;
    let b = load_matrix(&args.matrix_b)?;
    let truths = [load_truth(&args.truth_a)?, load_truth(&args.truth_b)?];
    let opts = ScoreOptions {
        alpha: args.alpha,
        leave_one_out: args.leave_one_out,
    };
    let threshold = Threshold::lambda(args.threshold);
    let out = OutDir::create(&args.out.out)?;
    let mut summary = Summary::default();
    summary.add("alpha", format_ext(args.alpha));
    summary.add("threshold_lambda", format_ext(args.threshold));
    summary.add("leave_one_out", args.leave_one_out);

    let directions = [("a", &a, &b, Label::Valid), ("b", &b, &a, Label::Rejected)];
    for ((tag, own, other, majority), truth) in directions.into_iter().zip(&truths) {
        let scores = score_dataset(own, other, opts)?;
        out.write(&format!("scores_{tag}.csv"), |w| Ok(write_scores(&scores, w)?))?;

        let c = classify(&scores, threshold);
        let finite: Vec<f64> = scores.iter().map(|s| s.log_lambda).filter(|v| v.is_finite()).collect();
        summary.add(&format!("{tag}.dataset"), &own.dataset_label);
        summary.add(&format!("{tag}.files"), scores.len());
        summary.add(&format!("{tag}.flagged"), c.flagged.len());
        summary.add(&format!("{tag}.indeterminate"), c.indeterminate.len());
        summary.add(&format!("{tag}.pos_inf"), scores.iter().filter(|s| s.log_lambda == f64::INFINITY).count());
        summary.add(&format!("{tag}.neg_inf"), scores.iter().filter(|s| s.log_lambda == f64::NEG_INFINITY).count());
        if !finite.is_empty() {
            summary.add(&format!("{tag}.mean_finite_log_lambda"), format_ext(finite.iter().sum::<f64>() / finite.len() as f64));
        }
        if args.plot.enabled() {
            let values: Vec<f64> = scores.iter().filter(|s| s.is_determinate()).map(|s| s.log_lambda).collect();
            out.write_str(
                &format!("hist_{tag}.svg"),
                &svg::log_lambda_histogram(&format!("log10 λ over {}", own.dataset_label), &values),
            )?;
        }

        let Some(truth) = truth else {
            println!("no ground truth for {tag}; skipping ROC");
            continue;
        };
        let (kept, flags) = truth_flags(&scores, truth, majority);
        if kept.len() < scores.len() {
            log::warn!("{} {tag} files have no ground truth and are left out of the ROC", scores.len() - kept.len());
        }
        let curve = roc(&kept, &flags).with_context(|| format!("ROC for corpus {tag}"))?;
        out.write(&format!("roc_{tag}.csv"), |w| Ok(write_roc(&curve, w)?))?;
        summary.add(&format!("{tag}.misclassified"), flags.iter().filter(|&&f| f).count());
        summary.add(&format!("{tag}.roc_excluded"), curve.excluded.len());
        summary.add(&format!("{tag}.auc"), format_ext(curve.auc));
        if args.plot.enabled() {
            let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.p_fa, p.p_d)).collect();
            out.write_str(
                &format!("roc_{tag}.svg"),
                &svg::roc_plot(&format!("ROC for {} (AUC {:.3})", own.dataset_label, curve.auc), &pts),
            )?;
        }
    }
    summary.write(&out, "summary.csv")?;
    summary.print();
    Ok(())
}

/// Scores with known truth, and whether each contradicts the corpus majority.
fn truth_flags(
    scores: &[MisclassificationScore],
    truth: &GroundTruth,
    majority: Label,
) -> (Vec<MisclassificationScore>, Vec<bool>) {
    scores
        .iter()
        .filter_map(|s| Some((s.clone(), truth.is_misclassified(s.file_id.id, majority)?)))
        .unzip()
}
