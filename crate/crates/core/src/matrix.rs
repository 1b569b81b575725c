//! Relation matrices: message rows × file columns.
//!
//! Storage is sparse and column-major. Absent entries are zero; stored counts
//! are always positive.
//!
//! The on-disk form is a triplet CSV:
//!
//! ```text
//! # dataset=internet_sourced n_rows=955 n_cols=9000
//! row,col,count
//! 58,1000,1
//! ```
//!
//! `row` is the 1-based catalog row, `col` the 1-based column position.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use crate::catalog::MessageCatalog;
use crate::error::{Error, Result};
use crate::harness::{match_messages, ParserRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Valid,
    Rejected,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Valid => "valid",
            Label::Rejected => "rejected",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Valid => Label::Rejected,
            Label::Rejected => Label::Valid,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "valid" => Ok(Label::Valid),
            "rejected" => Ok(Label::Rejected),
            other => Err(format!("unknown label `{other}` (expected valid or rejected)")),
        }
    }
}

/// Column identifier. Plain ids come from a corpus manifest; concatenation
/// namespaces them as `<dataset>/<id>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnId {
    pub dataset: Option<String>,
    pub id: usize,
}

impl ColumnId {
    pub fn plain(id: usize) -> Self {
        ColumnId { dataset: None, id }
    }
}

impl fmt::Display for ColumnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.dataset {
            Some(d) => write!(f, "{d}/{}", self.id),
            None => write!(f, "{}", self.id),
        }
    }
}

impl FromStr for ColumnId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (dataset, id) = match s.rsplit_once('/') {
            Some((d, id)) => (Some(d.to_string()), id),
            None => (None, s),
        };
        let id = id.trim().parse().map_err(|_| format!("bad column id `{s}`"))?;
        Ok(ColumnId { dataset, id })
    }
}

/// Per-file compliance labels, keyed by file id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth(BTreeMap<usize, Label>);

impl FromIterator<(usize, Label)> for GroundTruth {
    fn from_iter<I: IntoIterator<Item = (usize, Label)>>(iter: I) -> Self {
        GroundTruth(iter.into_iter().collect())
    }
}

impl GroundTruth {
    pub fn get(&self, file_id: usize) -> Option<Label> {
        self.0.get(&file_id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Label)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    /// A file is misclassified when its label differs from the corpus's
    /// majority character: rejected files in a mostly-valid corpus, valid
    /// files in a mostly-rejected one.
    pub fn is_misclassified(&self, file_id: usize, majority: Label) -> Option<bool> {
        self.get(file_id).map(|l| l != majority)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["file_id", "label"])?;
        for (id, label) in self.iter() {
            wtr.write_record([id.to_string(), label.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut out = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let id: usize = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(line, "bad file_id"))?;
            let label: Label = rec
                .get(1)
                .ok_or_else(|| Error::parse(line, "missing label"))?
                .parse()
                .map_err(|e| Error::parse(line, e))?;
            if out.insert(id, label).is_some() {
                return Err(Error::parse(line, format!("duplicate file_id {id}")));
            }
        }
        Ok(GroundTruth(out))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Nonnegative integer message × file occurrence table.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMatrix {
    pub dataset_label: String,
    rows: Vec<usize>,
    cols: Vec<ColumnId>,
    /// Per column: `(row position, count)` ascending by position, counts > 0.
    columns: Vec<Vec<(u32, u64)>>,
}

impl RelationMatrix {
    pub fn zeros(dataset_label: impl Into<String>, rows: Vec<usize>, cols: Vec<ColumnId>) -> Self {
        let columns = vec![Vec::new(); cols.len()];
        RelationMatrix {
            dataset_label: dataset_label.into(),
            rows,
            cols,
            columns,
        }
    }

    /// Builds from `(row position, column position, count)` triplets.
    /// Zero counts are skipped; repeated positions are summed.
    pub fn from_triplets(
        dataset_label: impl Into<String>,
        rows: Vec<usize>,
        cols: Vec<ColumnId>,
        triplets: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self> {
        let mut m = Self::zeros(dataset_label, rows, cols);
        let mut acc: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); m.cols.len()];
        for (r, c, n) in triplets {
            if r >= m.rows.len() || c >= m.cols.len() {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({r}, {c}) outside {}x{}",
                    m.rows.len(),
                    m.cols.len()
                )));
            }
            if n > 0 {
                *acc[c].entry(r as u32).or_insert(0) += n;
            }
        }
        m.columns = acc.into_iter().map(|c| c.into_iter().collect()).collect();
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// Catalog row index of each row position.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[ColumnId] {
        &self.cols
    }

    /// Nonzero entries of column `j` as `(row position, count)`.
    pub fn column(&self, j: usize) -> &[(u32, u64)] {
        &self.columns[j]
    }

    pub fn get(&self, row_pos: usize, col_pos: usize) -> u64 {
        let col = &self.columns[col_pos];
        match col.binary_search_by_key(&(row_pos as u32), |&(r, _)| r) {
            Ok(i) => col[i].1,
            Err(_) => 0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> u64 {
        self.columns.iter().flatten().map(|&(_, n)| n).sum()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        self.columns.iter().map(|c| c.iter().map(|&(_, n)| n).sum()).collect()
    }

    /// Nonzero triplets `(row position, column position, count)` in
    /// row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, u64)> {
        let mut t: Vec<(usize, usize, u64)> = self
            .columns
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |&(r, n)| (r as usize, j, n)))
            .collect();
        t.sort_unstable();
        t
    }

    fn check_full_row_space(&self) -> Result<()> {
        if self.rows.iter().enumerate().any(|(i, &r)| r != i + 1) {
            return Err(Error::InvalidArgument(
                "matrix CSV requires the full catalog row space 1..N".into(),
            ));
        }
        if self.dataset_label.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "dataset label `{}` contains whitespace",
                self.dataset_label
            )));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.check_full_row_space()?;
        writeln!(
            w,
            "# dataset={} n_rows={} n_cols={}",
            self.dataset_label,
            self.n_rows(),
            self.n_cols()
        )?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "col", "count"])?;
        for (r, c, n) in self.triplets() {
            wtr.write_record([self.rows[r].to_string(), (c + 1).to_string(), n.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim();
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(1, "expected `# dataset=... n_rows=... n_cols=...`"))?;
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for kv in body.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("bad header field `{kv}`")))?;
            fields.insert(k, v);
        }
        let label = fields.get("dataset").copied().unwrap_or("").to_string();
        let num = |k: &str| -> Result<usize> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(1, format!("missing or bad `{k}`")))
        };
        let (n_rows, n_cols) = (num("n_rows")?, num("n_cols")?);

        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut seen = std::collections::HashSet::new();
        let mut triplets = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 3;
            let field = |k: usize| -> Result<u64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(line, "expected three nonnegative integers"))
            };
            let (row, col, count) = (field(0)? as usize, field(1)? as usize, field(2)?);
            if row == 0 || row > n_rows || col == 0 || col > n_cols {
                return Err(Error::parse(line, format!("entry ({row},{col}) outside {n_rows}x{n_cols}")));
            }
            if count == 0 {
                return Err(Error::parse(line, "stored counts must be positive"));
            }
            if !seen.insert((row, col)) {
                return Err(Error::parse(line, format!("duplicate entry ({row},{col})")));
            }
            triplets.push((row - 1, col - 1, count));
        }
        Self::from_triplets(
            label,
            (1..=n_rows).collect(),
            (1..=n_cols).map(ColumnId::plain).collect(),
            triplets,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// 0/1 relation matrix. Stored as, per column, the ascending row positions
/// holding a 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryRelationMatrix {
    pub dataset_label: String,
    rows: Vec<usize>,
    cols: Vec<ColumnId>,
    columns: Vec<Vec<u32>>,
}

impl BinaryRelationMatrix {
    /// Builds from dense columns (`columns[j][k]` is entry (k, j)). Rows are
    /// numbered 1..N and columns 1..M.
    pub fn from_dense_columns(dataset_label: impl Into<String>, n_rows: usize, columns: &[Vec<bool>]) -> Self {
        let cols = (1..=columns.len()).map(ColumnId::plain).collect();
        let columns = columns
            .iter()
            .map(|c| {
                assert_eq!(c.len(), n_rows, "column length must equal the row count");
                c.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u32).collect()
            })
            .collect();
        BinaryRelationMatrix {
            dataset_label: dataset_label.into(),
            rows: (1..=n_rows).collect(),
            cols,
            columns,
        }
    }

    /// Builds from dense rows (`rows[k][j]` is entry (k, j)).
    pub fn from_dense_rows(dataset_label: impl Into<String>, rows: &[Vec<bool>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let columns: Vec<Vec<bool>> = (0..n_cols).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_dense_columns(dataset_label, rows.len(), &columns)
    }

    /// Builds from per-column sorted row positions.
    pub fn from_sparse_columns(
        dataset_label: impl Into<String>,
        rows: Vec<usize>,
        cols: Vec<ColumnId>,
        columns: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if columns.len() != cols.len() {
            return Err(Error::InvalidArgument("column count mismatch".into()));
        }
        for c in &columns {
            if c.windows(2).any(|w| w[0] >= w[1]) || c.last().is_some_and(|&r| r as usize >= rows.len()) {
                return Err(Error::InvalidArgument(
                    "sparse column positions must be strictly ascending and in range".into(),
                ));
            }
        }
        Ok(BinaryRelationMatrix {
            dataset_label: dataset_label.into(),
            rows,
            cols,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[ColumnId] {
        &self.cols
    }

    /// Row positions holding a 1 in column `j`.
    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn dense_column(&self, j: usize) -> Vec<bool> {
        let mut out = vec![false; self.n_rows()];
        for &r in &self.columns[j] {
            out[r as usize] = true;
        }
        out
    }

    pub fn dense_rows(&self) -> Vec<Vec<bool>> {
        let mut out = vec![vec![false; self.n_cols()]; self.n_rows()];
        for (j, c) in self.columns.iter().enumerate() {
            for &r in c {
                out[r as usize][j] = true;
            }
        }
        out
    }

    pub fn get(&self, row_pos: usize, col_pos: usize) -> bool {
        self.columns[col_pos].binary_search(&(row_pos as u32)).is_ok()
    }

    /// Number of 1s in each row.
    pub fn row_ones(&self) -> Vec<usize> {
        let mut ones = vec![0; self.n_rows()];
        for &r in self.columns.iter().flatten() {
            ones[r as usize] += 1;
        }
        ones
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Same matrix with rows permuted: new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n_rows());
        let mut inverse = vec![0u32; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new as u32;
        }
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let mut v: Vec<u32> = c.iter().map(|&r| inverse[r as usize]).collect();
                v.sort_unstable();
                v
            })
            .collect();
        BinaryRelationMatrix {
            dataset_label: self.dataset_label.clone(),
            rows: perm.iter().map(|&i| self.rows[i]).collect(),
            cols: self.cols.clone(),
            columns,
        }
    }

    /// Counts view with every 1 stored as count 1.
    pub fn to_counts(&self) -> RelationMatrix {
        RelationMatrix {
            dataset_label: self.dataset_label.clone(),
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            columns: self.columns.iter().map(|c| c.iter().map(|&r| (r, 1)).collect()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.to_counts().write_csv(w)
    }

    /// Reads a matrix CSV and binarizes it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(binarize(&RelationMatrix::load(path)?))
    }
}

/// Tabulates message counts: entry (k, f) is the total count of message k
/// over all runs of file f. Columns are the distinct file ids, ascending.
pub fn build_relation_matrix(
    dataset_label: impl Into<String>,
    runs: &[ParserRun],
    catalog: &MessageCatalog,
) -> Result<RelationMatrix> {
    let mut seen = std::collections::HashSet::new();
    for run in runs {
        if catalog.parser(&run.parser).is_none() {
            return Err(Error::UnknownParser(run.parser.clone()));
        }
        if !seen.insert((run.file_id, run.parser.as_str())) {
            return Err(Error::DuplicateRun {
                file_id: run.file_id,
                parser: run.parser.clone(),
            });
        }
    }
    let mut file_ids: Vec<usize> = runs.iter().map(|r| r.file_id).collect();
    file_ids.sort_unstable();
    file_ids.dedup();
    let col_of: HashMap<usize, usize> = file_ids.iter().enumerate().map(|(j, &f)| (f, j)).collect();

    let triplets = runs.iter().flat_map(|run| {
        let j = col_of[&run.file_id];
        match_messages(run, catalog).into_iter().map(move |(row, n)| (row - 1, j, n))
    });
    RelationMatrix::from_triplets(
        dataset_label,
        (1..=catalog.len()).collect(),
        file_ids.into_iter().map(ColumnId::plain).collect(),
        triplets.collect::<Vec<_>>(),
    )
}

/// Entrywise indicator of count ≥ 1.
pub fn binarize(m: &RelationMatrix) -> BinaryRelationMatrix {
    BinaryRelationMatrix {
        dataset_label: m.dataset_label.clone(),
        rows: m.rows.clone(),
        cols: m.cols.clone(),
        columns: m.columns.iter().map(|c| c.iter().map(|&(r, _)| r).collect()).collect(),
    }
}

/// Horizontal concatenation over an identical row space. Column ids are
/// namespaced by their source dataset label.
pub fn hconcat(a: &BinaryRelationMatrix, b: &BinaryRelationMatrix) -> Result<BinaryRelationMatrix> {
    if a.rows != b.rows {
        let pos = a.rows.iter().zip(&b.rows).position(|(x, y)| x != y);
        let msg = match pos {
            Some(i) => format!("first differing row at position {}: {} vs {}", i + 1, a.rows[i], b.rows[i]),
            None => format!(
                "row counts differ ({} vs {}); first differing row at position {}",
                a.n_rows(),
                b.n_rows(),
                a.n_rows().min(b.n_rows()) + 1
            ),
        };
        return Err(Error::RowMismatch(msg));
    }
    let ns = |m: &BinaryRelationMatrix| -> Vec<ColumnId> {
        m.cols
            .iter()
            .map(|c| ColumnId {
                dataset: Some(c.dataset.clone().unwrap_or_else(|| m.dataset_label.clone())),
                id: c.id,
            })
            .collect()
    };
    let mut cols = ns(a);
    cols.extend(ns(b));
    let mut columns = a.columns.clone();
    columns.extend(b.columns.iter().cloned());
    Ok(BinaryRelationMatrix {
        dataset_label: format!("{}+{}", a.dataset_label, b.dataset_label),
        rows: a.rows.clone(),
        cols,
        columns,
    })
}

/// Removes rows that are constant across all columns (all-zero or all-one).
/// Returns the reduced matrix and the catalog row indices removed.
pub fn drop_zero_variance_rows(m: &BinaryRelationMatrix) -> (BinaryRelationMatrix, Vec<usize>) {
    let ones = m.row_ones();
    let n = m.n_cols();
    let keep: Vec<bool> = ones.iter().map(|&c| c > 0 && c < n).collect();
    let mut new_pos = vec![u32::MAX; m.n_rows()];
    let mut rows = Vec::new();
    let mut removed = Vec::new();
    for (i, &k) in keep.iter().enumerate() {
        if k {
            new_pos[i] = rows.len() as u32;
            rows.push(m.rows[i]);
        } else {
            removed.push(m.rows[i]);
        }
    }
    let columns = m
        .columns
        .iter()
        .map(|c| c.iter().filter(|&&r| keep[r as usize]).map(|&r| new_pos[r as usize]).collect())
        .collect();
    (
        BinaryRelationMatrix {
            dataset_label: m.dataset_label.clone(),
            rows,
            cols: m.cols.clone(),
            columns,
        },
        removed,
    )
}

/// Fraction of files in which each message occurred.
pub fn row_means(m: &BinaryRelationMatrix) -> Result<Vec<f64>> {
    if m.n_cols() == 0 {
        return Err(Error::NoFiles);
    }
    let n = m.n_cols() as f64;
    Ok(m.row_ones().into_iter().map(|c| c as f64 / n).collect())
}

/// Parser × file totals of raw message counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ParserCounts {
    pub parsers: Vec<String>,
    pub cols: Vec<ColumnId>,
    /// `counts[p][j]`.
    pub counts: Vec<Vec<u64>>,
}

impl ParserCounts {
    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.cols.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }
}

/// Sums each column's counts over each parser's rows. Parsers appear in
/// catalog declaration order.
pub fn aggregate_by_parser(m: &RelationMatrix, catalog: &MessageCatalog) -> Result<ParserCounts> {
    let index: HashMap<&str, usize> = catalog
        .parsers()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.name.as_str(), i))
        .collect();
    let mut owner = Vec::with_capacity(m.n_rows());
    for &row in m.rows() {
        let parser = catalog
            .parser_of_row(row)
            .ok_or_else(|| Error::RowMismatch(format!("row {row} is not in the catalog")))?;
        owner.push(index[parser]);
    }
    let mut counts = vec![vec![0u64; m.n_cols()]; catalog.parsers().len()];
    for (j, col) in m.columns.iter().enumerate() {
        for &(r, n) in col {
            counts[owner[r as usize]][j] += n;
        }
    }
    Ok(ParserCounts {
        parsers: catalog.parsers().iter().map(|p| p.name.clone()).collect(),
        cols: m.cols.clone(),
        counts,
    })
}
