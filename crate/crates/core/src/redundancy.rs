//! Parser redundancy: how strongly parsers' messages co-occur.
//!
//! Message rows that never vary are dropped, Pearson correlations are taken
//! between every pair of remaining rows, and each pair of parsers is
//! summarized by the median correlation over their cross pairs. Parsers with
//! low median correlation to the rest are the most informative.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use crate::catalog::MessageCatalog;
use crate::error::{Error, Result};
use crate::matrix::{drop_zero_variance_rows, BinaryRelationMatrix};
use crate::numfmt::{format_ext, parse_ext};

#[derive(Debug, Clone, PartialEq)]
pub struct MessageCorrelation {
    /// Catalog rows that survived zero-variance removal.
    pub rows: Vec<usize>,
    /// Catalog rows removed because they were constant.
    pub removed: Vec<usize>,
    /// Row-major `rows.len()²` Pearson coefficients.
    r: Vec<f64>,
}

impl MessageCorrelation {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Correlation between surviving positions `i` and `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.rows.len() + j]
    }
}

fn bitset(m: &BinaryRelationMatrix) -> Vec<Vec<u64>> {
    let words = m.n_cols().div_ceil(64);
    let mut bits = vec![vec![0u64; words]; m.n_rows()];
    for j in 0..m.n_cols() {
        for &r in m.column(j) {
            bits[r as usize][j / 64] |= 1 << (j % 64);
        }
    }
    bits
}

/// Pearson correlation between every pair of non-constant message rows.
///
/// For 0/1 rows this reduces to
/// `(M·n₁₁ − n₁·n₂) / √(n₁(M − n₁)·n₂(M − n₂))`, evaluated from exact counts.
pub fn message_correlations(m: &BinaryRelationMatrix) -> Result<MessageCorrelation> {
    if m.n_cols() < 2 {
        return Err(Error::Degenerate("correlations need at least 2 files".into()));
    }
    let (kept, removed) = drop_zero_variance_rows(m);
    let n = kept.n_rows();
    if n < 2 {
        return Err(Error::Degenerate(format!("only {n} message row(s) vary across files")));
    }
    let total = kept.n_cols() as i64;
    let bits = bitset(&kept);
    let ones: Vec<i64> = kept.row_ones().into_iter().map(|c| c as i64).collect();
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        r[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let both: i64 = bits[i]
                .iter()
                .zip(&bits[j])
                .map(|(a, b)| (a & b).count_ones() as i64)
                .sum();
            let num = (total * both - ones[i] * ones[j]) as f64;
            let den = ((ones[i] * (total - ones[i])) as f64 * (ones[j] * (total - ones[j])) as f64).sqrt();
            let v = (num / den).clamp(-1.0, 1.0);
            r[i * n + j] = v;
            r[j * n + i] = v;
        }
    }
    Ok(MessageCorrelation {
        rows: kept.rows().to_vec(),
        removed,
        r,
    })
}

/// Median with the even-count convention of averaging the middle two.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParserRedundancy {
    /// Parsers with at least one surviving row, in catalog order.
    pub parsers: Vec<String>,
    /// Parsers whose rows were all removed.
    pub excluded: Vec<String>,
    /// Symmetric median-correlation matrix indexed like `parsers`.
    pub matrix: Vec<Vec<f64>>,
}

impl ParserRedundancy {
    /// Same data with parsers listed in `order` (names from `self.parsers`).
    pub fn reordered(&self, order: &[String]) -> ParserRedundancy {
        let idx: HashMap<&str, usize> = self.parsers.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        let pos: Vec<usize> = order.iter().map(|n| idx[n.as_str()]).collect();
        ParserRedundancy {
            parsers: order.to_vec(),
            excluded: self.excluded.clone(),
            matrix: pos.iter().map(|&i| pos.iter().map(|&j| self.matrix[i][j]).collect()).collect(),
        }
    }
}

/// Median cross-correlation for every pair of parsers. The diagonal is the
/// median over distinct within-parser pairs (1 for a parser with a single
/// surviving row).
pub fn parser_median_correlation(c: &MessageCorrelation, catalog: &MessageCatalog) -> Result<ParserRedundancy> {
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (pos, &row) in c.rows.iter().enumerate() {
        let parser = catalog
            .parser_of_row(row)
            .ok_or_else(|| Error::RowMismatch(format!("row {row} is not in the catalog")))?;
        groups.entry(parser).or_default().push(pos);
    }
    let (parsers, excluded): (Vec<String>, Vec<String>) = catalog
        .parsers()
        .iter()
        .map(|p| p.name.clone())
        .partition(|name| groups.contains_key(name.as_str()));

    let p = parsers.len();
    let mut matrix = vec![vec![0.0; p]; p];
    for a in 0..p {
        let ra = &groups[parsers[a].as_str()];
        for b in a..p {
            let rb = &groups[parsers[b].as_str()];
            let mut vals: Vec<f64> = if a == b {
                ra.iter()
                    .enumerate()
                    .flat_map(|(x, &i)| ra[x + 1..].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| c.get(i, j))
                    .collect()
            } else {
                ra.iter().flat_map(|&i| rb.iter().map(move |&j| c.get(i, j))).collect()
            };
            let v = median(&mut vals).unwrap_or(1.0);
            matrix[a][b] = v;
            matrix[b][a] = v;
        }
    }
    Ok(ParserRedundancy {
        parsers,
        excluded,
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedParser {
    pub name: String,
    /// Median of the parser's off-diagonal entries; `None` with no other
    /// parser to compare against.
    pub sort_key: Option<f64>,
    /// 1-based; 1 is the least redundant.
    pub rank: usize,
}

/// Orders parsers by ascending sort key, ties broken by name.
pub fn rank_parsers(r: &ParserRedundancy) -> Vec<RankedParser> {
    let mut keyed: Vec<(String, Option<f64>)> = r
        .parsers
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut off: Vec<f64> = r.matrix[i]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            (name.clone(), median(&mut off))
        })
        .collect();
    keyed.sort_by(|(na, ka), (nb, kb)| {
        let by_key = match (ka, kb) {
            (Some(a), Some(b)) => a.total_cmp(b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_key.then_with(|| na.cmp(nb))
    });
    keyed
        .into_iter()
        .enumerate()
        .map(|(i, (name, sort_key))| RankedParser {
            name,
            sort_key,
            rank: i + 1,
        })
        .collect()
}

/// Square CSV: header `parser,<name>...`, one row per parser.
pub fn write_redundancy_matrix<W: Write>(r: &ParserRedundancy, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["parser".to_string()];
    header.extend(r.parsers.iter().cloned());
    wtr.write_record(&header)?;
    for (name, row) in r.parsers.iter().zip(&r.matrix) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|&v| format_ext(v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_redundancy_matrix<R: std::io::Read>(r: R) -> Result<ParserRedundancy> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    let parsers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut matrix = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.get(0) != parsers.get(i).map(String::as_str) {
            return Err(Error::parse(i + 2, "row order must match the header"));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|s| parse_ext(s).ok_or_else(|| Error::parse(i + 2, format!("bad value `{s}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != parsers.len() {
            return Err(Error::parse(i + 2, "row length must match the header"));
        }
        matrix.push(row);
    }
    Ok(ParserRedundancy {
        parsers,
        excluded: Vec::new(),
        matrix,
    })
}

/// Writes `parser,sort_key,rank`; an undefined key is left empty.
pub fn write_ranking<W: Write>(ranking: &[RankedParser], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["parser", "sort_key", "rank"])?;
    for r in ranking {
        wtr.write_record([
            r.name.clone(),
            r.sort_key.map(format_ext).unwrap_or_default(),
            r.rank.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_ranking<R: std::io::Read>(r: R) -> Result<Vec<RankedParser>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let key = match rec.get(1).unwrap_or("") {
            "" => None,
            s => Some(parse_ext(s).ok_or_else(|| Error::parse(line, "bad sort_key"))?),
        };
        out.push(RankedParser {
            name: rec.get(0).unwrap_or("").to_string(),
            sort_key: key,
            rank: rec
                .get(2)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(line, "bad rank"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bm(rows: &[&[u8]]) -> BinaryRelationMatrix {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        BinaryRelationMatrix::from_dense_rows("t", &rows)
    }

    fn catalog(owners: &[&str]) -> MessageCatalog {
        let mut names: Vec<&str> = owners.to_vec();
        names.sort_unstable();
        names.dedup();
        let parsers: Vec<String> = names
            .iter()
            .map(|n| format!(r#"{{"name": "{n}", "command": "x", "args": ["{{file}}"], "timeout_s": 1}}"#))
            .collect();
        let msgs: Vec<String> = owners
            .iter()
            .enumerate()
            .map(|(i, n)| format!(r#"{{"row": {}, "parser": "{n}", "regex": "m{}"}}"#, i + 1, i + 1))
            .collect();
        MessageCatalog::from_json(&format!(
            r#"{{"parsers": [{}], "messages": [{}]}}"#,
            parsers.join(","),
            msgs.join(",")
        ))
        .unwrap()
    }

    #[test]
    fn pearson_examples() {
        let c = message_correlations(&bm(&[&[1, 1, 0, 0], &[1, 1, 0, 0], &[0, 0, 1, 1], &[1, 0, 1, 0]])).unwrap();
        assert_eq!(c.get(0, 1), 1.0);
        assert_eq!(c.get(0, 2), -1.0);
        assert_eq!(c.get(0, 3), 0.0);
        assert_eq!(c.get(3, 3), 1.0);
    }

    #[test]
    fn constant_rows_are_removed_first() {
        let c = message_correlations(&bm(&[&[0, 0, 0], &[1, 0, 1], &[1, 1, 1], &[0, 1, 1]])).unwrap();
        assert_eq!(c.rows, vec![2, 4]);
        assert_eq!(c.removed, vec![1, 3]);
        assert!(message_correlations(&bm(&[&[0, 0], &[1, 0]])).is_err());
        assert!(message_correlations(&bm(&[&[1], &[0]])).is_err());
    }

    #[test]
    fn median_convention() {
        assert_eq!(median(&mut [1.0, 0.0, 0.0, -1.0]), Some(0.0));
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [1.0, 2.0]), Some(1.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn cross_median_of_four_pairs() {
        // a owns rows x1, x2; b owns y1, y2 with r(x1,y1)=1, r(x1,y2)=0,
        // r(x2,y1)=0, r(x2,y2)=-1.
        let m = bm(&[&[1, 1, 0, 0], &[1, 0, 1, 0], &[1, 1, 0, 0], &[0, 1, 0, 1]]);
        let c = message_correlations(&m).unwrap();
        let cat = catalog(&["a", "a", "b", "b"]);
        let r = parser_median_correlation(&c, &cat).unwrap();
        assert_eq!(c.get(0, 2), 1.0);
        assert_eq!(c.get(0, 3), 0.0);
        assert_eq!(c.get(1, 2), 0.0);
        assert_eq!(c.get(1, 3), -1.0);
        assert_eq!(r.matrix[0][1], 0.0);
        assert_eq!(r.matrix[1][0], 0.0);
        // diagonal: a has the single pair (x1, x2) with r = 0
        assert_eq!(r.matrix[0][0], 0.0);
    }

    #[test]
    fn single_row_parsers_and_exclusion() {
        let m = bm(&[&[1, 0, 1, 0], &[1, 1, 0, 0], &[0, 0, 0, 0]]);
        let c = message_correlations(&m).unwrap();
        let r = parser_median_correlation(&c, &catalog(&["a", "b", "z"])).unwrap();
        assert_eq!(r.parsers, vec!["a", "b"]);
        assert_eq!(r.excluded, vec!["z"]);
        assert_eq!(r.matrix[0][0], 1.0);
        assert_eq!(r.matrix[0][1], c.get(0, 1));
    }

    #[test]
    fn ranking_ties_broken_by_name() {
        let r = ParserRedundancy {
            parsers: vec!["zeta".into(), "mid".into(), "alpha".into()],
            excluded: vec![],
            matrix: vec![vec![1.0, 0.1, 0.1], vec![0.1, 1.0, 0.9], vec![0.1, 0.9, 1.0]],
        };
        // keys: zeta 0.1, mid 0.5, alpha 0.5 → zeta first, then alpha, mid by name
        let ranked = rank_parsers(&r);
        let names: Vec<&str> = ranked.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, vec!["zeta", "alpha", "mid"]);
        assert_eq!(ranked[1].sort_key, Some(0.5));
    }

    #[test]
    fn three_parser_key_fixture() {
        // keys (0.1, 0.5, 0.1) for (p, q, r): tie between p and r broken by name
        let r = ParserRedundancy {
            parsers: vec!["r".into(), "q".into(), "p".into()],
            excluded: vec![],
            matrix: vec![vec![1.0, 0.2, 0.0], vec![0.2, 1.0, 0.8], vec![0.0, 0.8, 1.0]],
        };
        let ranked = rank_parsers(&r);
        let keys: Vec<(&str, f64)> = ranked.iter().map(|p| (p.name.as_str(), p.sort_key.unwrap())).collect();
        assert_eq!(keys, vec![("r", 0.1), ("p", 0.4), ("q", 0.5)]);
        let sym = ParserRedundancy {
            parsers: vec!["r".into(), "q".into(), "p".into()],
            excluded: vec![],
            matrix: vec![vec![1.0, 0.1, 0.1], vec![0.1, 1.0, 0.9], vec![0.1, 0.9, 1.0]],
        };
        // r: median(0.1,0.1)=0.1; q: median(0.1,0.9)=0.5; p: 0.5 → p before q
        let names: Vec<String> = rank_parsers(&sym).into_iter().map(|p| p.name).collect();
        assert_eq!(names, vec!["r", "p", "q"]);
    }

    #[test]
    fn lone_uncorrelated_parser_ranks_first() {
        // a and b duplicate each other; c is independent of both.
        let m = bm(&[
            &[1, 1, 0, 0, 1, 0, 1, 0],
            &[0, 1, 1, 0, 0, 1, 1, 0],
            &[1, 1, 0, 0, 1, 0, 1, 0],
            &[0, 1, 1, 0, 0, 1, 1, 0],
            &[1, 0, 1, 0, 1, 0, 1, 0],
        ]);
        let c = message_correlations(&m).unwrap();
        let r = parser_median_correlation(&c, &catalog(&["a", "a", "b", "b", "c"])).unwrap();
        let ranked = rank_parsers(&r);
        assert_eq!(ranked[0].name, "c");
        assert_eq!(ranked.last().unwrap().name, "b");
    }

    #[test]
    fn single_parser_ranking() {
        let m = bm(&[&[1, 0, 1], &[0, 1, 1]]);
        let c = message_correlations(&m).unwrap();
        let r = parser_median_correlation(&c, &catalog(&["only", "only"])).unwrap();
        assert_eq!(r.matrix.len(), 1);
        let ranked = rank_parsers(&r);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].sort_key, None);
    }

    #[test]
    fn csv_round_trips() {
        let r = ParserRedundancy {
            parsers: vec!["a".into(), "b".into()],
            excluded: vec![],
            matrix: vec![vec![1.0, -0.25], vec![-0.25, 1.0]],
        };
        let mut buf = Vec::new();
        write_redundancy_matrix(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "parser,a,b\na,1,-0.25\nb,-0.25,1\n");
        assert_eq!(read_redundancy_matrix(&buf[..]).unwrap(), r);

        let ranking = rank_parsers(&r);
        let mut buf = Vec::new();
        write_ranking(&ranking, &mut buf).unwrap();
        assert_eq!(read_ranking(&buf[..]).unwrap(), ranking);
        assert_eq!(r.reordered(&["b".into(), "a".into()]).matrix, r.matrix);
    }

    proptest! {
        #[test]
        fn within_parser_row_order_does_not_matter(
            rows in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 6), 4),
        ) {
            let m = BinaryRelationMatrix::from_dense_rows("t", &rows);
            let owners = ["a", "a", "b", "b"];
            let Ok(c1) = message_correlations(&m) else { return Ok(()) };
            let swapped = BinaryRelationMatrix::from_dense_rows("t", &[rows[1].clone(), rows[0].clone(), rows[3].clone(), rows[2].clone()]);
            let c2 = message_correlations(&swapped).unwrap();
            let r1 = parser_median_correlation(&c1, &catalog(&owners)).unwrap();
            let r2 = parser_median_correlation(&c2, &catalog(&owners)).unwrap();
            prop_assert_eq!(r1, r2);
        }

        #[test]
        fn correlations_are_bounded_and_symmetric(
            rows in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 2..20), 2..8),
        ) {
            let len = rows[0].len();
            let rows: Vec<Vec<bool>> = rows.into_iter().map(|mut r| { r.resize(len, false); r }).collect();
            let m = BinaryRelationMatrix::from_dense_rows("t", &rows);
            if let Ok(c) = message_correlations(&m) {
                for i in 0..c.len() {
                    prop_assert_eq!(c.get(i, i), 1.0);
                    for j in 0..c.len() {
                        prop_assert!((-1.0..=1.0).contains(&c.get(i, j)));
                        prop_assert_eq!(c.get(i, j), c.get(j, i));
                    }
                }
            }
        }
    }
}
