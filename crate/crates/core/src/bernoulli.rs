//! Bernoulli pseudo-likelihood ratio misclassification statistic.
//!
//! Each message `k` is treated as an independent Bernoulli variable with a
//! per-corpus probability `p_k`. A file column `f` has pseudo-likelihood
//!
//! ```text
//! L(f) = Π_k  p_k·f_k + (1 − p_k)·(1 − f_k)
//! ```
//!
//! and its statistic against its own corpus is `λ(f) = L_other(f) / L_own(f)`.
//! Large λ means the file looks more like the other corpus. Everything is
//! computed as `log λ` on the extended reals, since products over hundreds of
//! messages underflow and exact zeros are meaningful.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::{BinaryRelationMatrix, ColumnId};
use crate::numfmt::{format_ext, parse_ext};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProbabilities {
    pub dataset_label: String,
    pub p: Vec<f64>,
    pub smoothing_alpha: f64,
}

impl ErrorProbabilities {
    pub fn new(dataset_label: impl Into<String>, p: Vec<f64>) -> Result<Self> {
        if let Some(bad) = p.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidArgument(format!("probability {bad} outside [0, 1]")));
        }
        Ok(ErrorProbabilities {
            dataset_label: dataset_label.into(),
            p,
            smoothing_alpha: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    fn log_factors(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.p.iter().map(|&p| p.ln()).collect(),
            self.p.iter().map(|&p| (-p).ln_1p()).collect(),
        )
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("smoothing alpha must be finite and ≥ 0, got {alpha}")))
    }
}

/// `p_k = (ones_k + alpha) / (M + 2·alpha)`. With `alpha = 0` this is the
/// plain row mean.
pub fn estimate_probabilities(m: &BinaryRelationMatrix, alpha: f64) -> Result<ErrorProbabilities> {
    check_alpha(alpha)?;
    if m.n_cols() == 0 {
        return Err(Error::NoFiles);
    }
    let denom = m.n_cols() as f64 + 2.0 * alpha;
    Ok(ErrorProbabilities {
        dataset_label: m.dataset_label.clone(),
        p: m.row_ones().into_iter().map(|c| (c as f64 + alpha) / denom).collect(),
        smoothing_alpha: alpha,
    })
}

/// `Σ_k log(p_k·f_k + (1−p_k)·(1−f_k))`; `−∞` exactly when a factor is 0.
pub fn pseudo_log_likelihood(column: &[bool], probs: &ErrorProbabilities) -> f64 {
    assert_eq!(column.len(), probs.len(), "column length must match probability vector");
    column
        .iter()
        .zip(&probs.p)
        .map(|(&f, &p)| if f { p.ln() } else { (-p).ln_1p() })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisclassificationScore {
    pub file_id: ColumnId,
    /// `log λ`. NaN when `indeterminate`.
    pub log_lambda: f64,
    /// Both pseudo-likelihoods are zero, so λ = 0/0.
    pub indeterminate: bool,
}

impl MisclassificationScore {
    fn from_logs(file_id: ColumnId, log_own: f64, log_other: f64) -> Self {
        let neg = f64::NEG_INFINITY;
        let (log_lambda, indeterminate) = match (log_other == neg, log_own == neg) {
            (true, true) => (f64::NAN, true),
            (false, true) => (f64::INFINITY, false),
            (true, false) => (neg, false),
            (false, false) => (log_other - log_own, false),
        };
        MisclassificationScore {
            file_id,
            log_lambda,
            indeterminate,
        }
    }

    pub fn is_determinate(&self) -> bool {
        !self.indeterminate
    }
}

pub fn lambda_statistic(
    file_id: ColumnId,
    column: &[bool],
    probs_own: &ErrorProbabilities,
    probs_other: &ErrorProbabilities,
) -> MisclassificationScore {
    MisclassificationScore::from_logs(
        file_id,
        pseudo_log_likelihood(column, probs_own),
        pseudo_log_likelihood(column, probs_other),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    pub alpha: f64,
    /// Estimate each file's own-corpus probabilities without that file.
    pub leave_one_out: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            alpha: 0.0,
            leave_one_out: false,
        }
    }
}

/// Scores every column of `m_own` against probabilities estimated from
/// `m_own` (own) and `m_other` (other). Output follows `m_own`'s column order.
pub fn score_dataset(
    m_own: &BinaryRelationMatrix,
    m_other: &BinaryRelationMatrix,
    opts: ScoreOptions,
) -> Result<Vec<MisclassificationScore>> {
    if m_own.rows() != m_other.rows() {
        return Err(Error::RowMismatch("own and other matrices have different row spaces".into()));
    }
    let other = estimate_probabilities(m_other, opts.alpha)?;
    let (other_ln1, other_ln0) = other.log_factors();

    // Per-row log factors for f_k = 1 and f_k = 0 under own probabilities.
    let (own_ln1, own_ln0) = if opts.leave_one_out {
        check_alpha(opts.alpha)?;
        let denom = m_own.n_cols() as f64 - 1.0 + 2.0 * opts.alpha;
        if denom <= 0.0 {
            return Err(Error::Degenerate("leave-one-out needs at least 2 files or alpha > 0".into()));
        }
        let ones = m_own.row_ones();
        let ln1 = ones.iter().map(|&c| ((c as f64 - 1.0 + opts.alpha) / denom).ln()).collect();
        let ln0 = ones.iter().map(|&c| (-(c as f64 + opts.alpha) / denom).ln_1p()).collect();
        (ln1, ln0)
    } else {
        estimate_probabilities(m_own, opts.alpha)?.log_factors()
    };

    let n = m_own.n_rows();
    let mut scores = Vec::with_capacity(m_own.n_cols());
    let mut col = vec![false; n];
    for j in 0..m_own.n_cols() {
        col.iter_mut().for_each(|b| *b = false);
        for &r in m_own.column(j) {
            col[r as usize] = true;
        }
        let ll = |ln1: &[f64], ln0: &[f64]| -> f64 {
            col.iter()
                .enumerate()
                .map(|(k, &f)| if f { ln1[k] } else { ln0[k] })
                .sum()
        };
        scores.push(MisclassificationScore::from_logs(
            m_own.cols()[j].clone(),
            ll(&own_ln1, &own_ln0),
            ll(&other_ln1, &other_ln0),
        ));
    }
    Ok(scores)
}

/// Detection threshold `T` on λ. A determinate file is flagged iff λ > T.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `T < 0` (including `T = −∞`): every determinate file, λ = 0 included.
    BelowAll,
    /// `T = exp(t)`: flagged iff `log λ > t`. `t = −∞` is `T = 0`.
    Log(f64),
}

impl Threshold {
    pub fn lambda(t: f64) -> Self {
        if t < 0.0 {
            Threshold::BelowAll
        } else {
            Threshold::Log(t.ln())
        }
    }

    pub fn log(t: f64) -> Self {
        Threshold::Log(t)
    }

    pub fn flags(&self, score: &MisclassificationScore) -> bool {
        if score.indeterminate {
            return false;
        }
        match *self {
            Threshold::BelowAll => true,
            Threshold::Log(t) => score.log_lambda > t,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::BelowAll => f.write_str("below_all"),
            Threshold::Log(t) => f.write_str(&format_ext(*t)),
        }
    }
}

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "below_all" => Ok(Threshold::BelowAll),
            t => parse_ext(t).map(Threshold::Log).ok_or_else(|| format!("bad threshold `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Classification {
    pub flagged: Vec<ColumnId>,
    /// Files with λ = 0/0; never flagged.
    pub indeterminate: Vec<ColumnId>,
}

pub fn classify(scores: &[MisclassificationScore], threshold: Threshold) -> Classification {
    let mut out = Classification::default();
    for s in scores {
        if s.indeterminate {
            out.indeterminate.push(s.file_id.clone());
        } else if threshold.flags(s) {
            out.flagged.push(s.file_id.clone());
        }
    }
    out
}

/// Writes `file_id,log_lambda,indeterminate`.
pub fn write_scores<W: Write>(scores: &[MisclassificationScore], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["file_id", "log_lambda", "indeterminate"])?;
    for s in scores {
        wtr.write_record([
            s.file_id.to_string(),
            format_ext(s.log_lambda),
            s.indeterminate.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_scores<R: std::io::Read>(r: R) -> Result<Vec<MisclassificationScore>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let get = |k: usize| rec.get(k).ok_or_else(|| Error::parse(line, "expected three fields"));
        let file_id: ColumnId = get(0)?.parse().map_err(|e| Error::parse(line, e))?;
        let indeterminate: bool = get(2)?.parse().map_err(|_| Error::parse(line, "bad indeterminate flag"))?;
        let log_lambda = if indeterminate {
            f64::NAN
        } else {
            parse_ext(get(1)?).ok_or_else(|| Error::parse(line, "bad log_lambda"))?
        };
        out.push(MisclassificationScore {
            file_id,
            log_lambda,
            indeterminate,
        });
    }
    Ok(out)
}
