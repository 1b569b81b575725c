//! Ground-truth evaluation: ROC curves, AUC and the 2×2 χ² test.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use crate::bernoulli::{MisclassificationScore, Threshold};
use crate::error::{Error, Result};
use crate::matrix::ColumnId;
use crate::numfmt::{format_ext, parse_ext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub p_fa: f64,
    pub p_d: f64,
    /// Operating point: files with `log λ` strictly above this are flagged.
    pub threshold: Threshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// From `(0, 0)` at a threshold above every score to `(1, 1)`.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// Indeterminate files left out of the sweep.
    pub excluded: Vec<ColumnId>,
}

/// ROC of a misclassification detector. `misclassified[i]` is the truth for
/// `scores[i]`. Every distinct score value is one sweep step, so tied scores
/// across classes move the curve diagonally.
pub fn roc(scores: &[MisclassificationScore], misclassified: &[bool]) -> Result<RocCurve> {
    if scores.len() != misclassified.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} truth flags",
            scores.len(),
            misclassified.len()
        )));
    }
    let mut excluded = Vec::new();
    let mut pairs = Vec::with_capacity(scores.len());
    for (s, &m) in scores.iter().zip(misclassified) {
        if s.indeterminate {
            excluded.push(s.file_id.clone());
        } else {
            pairs.push((s.log_lambda, m));
        }
    }
    let mut curve = roc_from_values(&pairs)?;
    curve.excluded = excluded;
    Ok(curve)
}

/// ROC over `(score, is_positive)` pairs. Scores may be ±∞ but not NaN.
pub fn roc_from_values(pairs: &[(f64, bool)]) -> Result<RocCurve> {
    if pairs.iter().any(|(v, _)| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN score in ROC input".into()));
    }
    let n_pos = pairs.iter().filter(|(_, p)| *p).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(format!(
            "ROC needs both classes ({n_pos} misclassified, {n_neg} correctly classified)"
        )));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut points = vec![RocPoint {
        p_fa: 0.0,
        p_d: 0.0,
        threshold: Threshold::Log(f64::INFINITY),
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // The largest threshold that still flags this group is the next
        // lower distinct value.
        let threshold = match sorted.get(i) {
            Some(&(next, _)) => Threshold::Log(next),
            None if v == f64::NEG_INFINITY => Threshold::BelowAll,
            None => Threshold::Log(f64::NEG_INFINITY),
        };
        points.push(RocPoint {
            p_fa: fp as f64 / n_neg as f64,
            p_d: tp as f64 / n_pos as f64,
            threshold,
        });
    }
    let auc = auc(&points);
    Ok(RocCurve {
        points,
        auc,
        excluded: Vec::new(),
    })
}

/// Trapezoidal area under the `(p_fa, p_d)` polyline, closed with `(0, 0)`
/// and `(1, 1)` if the points do not already include them.
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut xy: Vec<(f64, f64)> = points.iter().map(|p| (p.p_fa, p.p_d)).collect();
    if xy.first() != Some(&(0.0, 0.0)) {
        xy.insert(0, (0.0, 0.0));
    }
    if xy.last() != Some(&(1.0, 1.0)) {
        xy.push((1.0, 1.0));
    }
    xy.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

pub fn write_roc<W: Write>(curve: &RocCurve, mut w: W) -> Result<()> {
    {
        let mut wtr = csv::Writer::from_writer(&mut w);
        wtr.write_record(["threshold", "p_fa", "p_d"])?;
        for p in &curve.points {
            wtr.write_record([p.threshold.to_string(), format_ext(p.p_fa), format_ext(p.p_d)])?;
        }
        wtr.flush()?;
    }
    writeln!(w, "# auc={}", format_ext(curve.auc))?;
    Ok(())
}

pub fn read_roc<R: BufRead>(r: R) -> Result<RocCurve> {
    let mut points = Vec::new();
    let mut auc_line = None;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix("# auc=") {
            auc_line = Some(parse_ext(rest).ok_or_else(|| Error::parse(lineno, "bad auc"))?);
            continue;
        }
        if line.is_empty() || line.starts_with('#') || (i == 0 && line == "threshold,p_fa,p_d") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::parse(lineno, "expected threshold,p_fa,p_d"));
        }
        let num = |s: &str| parse_ext(s).ok_or_else(|| Error::parse(lineno, format!("bad number `{s}`")));
        points.push(RocPoint {
            threshold: f[0].parse().map_err(|e| Error::parse(lineno, e))?,
            p_fa: num(f[1])?,
            p_d: num(f[2])?,
        });
    }
    let auc_value = auc_line.ok_or_else(|| Error::parse(0, "missing `# auc=` line"))?;
    Ok(RocCurve {
        points,
        auc: auc_value,
        excluded: Vec::new(),
    })
}

/// Dataset × {valid, rejected} counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyTable2x2 {
    pub counts: [[u64; 2]; 2],
}

impl ContingencyTable2x2 {
    pub fn new(a_valid: u64, a_rejected: u64, b_valid: u64, b_rejected: u64) -> Result<Self> {
        let t = ContingencyTable2x2 {
            counts: [[a_valid, a_rejected], [b_valid, b_rejected]],
        };
        if t.total() == 0 {
            return Err(Error::Degenerate("contingency table is empty".into()));
        }
        Ok(t)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn transpose(&self) -> Self {
        let c = self.counts;
        ContingencyTable2x2 {
            counts: [[c[0][0], c[1][0]], [c[0][1], c[1][1]]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson χ² with one degree of freedom, no continuity correction.
pub fn chi_square_independence(t: &ContingencyTable2x2) -> Result<ChiSquare> {
    let c = t.counts.map(|r| r.map(|x| x as f64));
    let n = t.total() as f64;
    let rows = [c[0][0] + c[0][1], c[1][0] + c[1][1]];
    let cols = [c[0][0] + c[1][0], c[0][1] + c[1][1]];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(Error::Degenerate("contingency table has a zero marginal".into()));
    }
    let mut statistic = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] * cols[j] / n;
            statistic += (c[i][j] - e).powi(2) / e;
        }
    }
    // Survival function of χ²(1): P(X > x) = erfc(√(x/2)).
    let p_value = statrs::function::erf::erfc((statistic / 2.0).sqrt()).clamp(0.0, 1.0);
    Ok(ChiSquare { statistic, p_value })
}
