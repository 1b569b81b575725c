//! Parser registry and the ordered message catalog.
//!
//! A catalog fixes the row space of every relation matrix: row `k` (1-based)
//! is the `k`-th message pattern. Each pattern belongs to exactly one parser,
//! and a parser may own several disjoint row ranges.
//!
//! Patterns use the `regex` crate dialect (character classes, alternation,
//! anchors, quantifiers; no backreferences or lookaround). Each pattern is
//! applied to one line of captured stderr at a time, and within a parser's
//! rows the first matching pattern (lowest row index) wins, so one line
//! increments at most one row.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::Duration;

use regex::RegexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placeholder substituted with the input file path in a parser's arguments.
pub const FILE_PLACEHOLDER: &str = "{file}";

#[derive(Debug, Clone, PartialEq)]
pub struct ParserSpec {
    pub name: String,
    pub command: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl ParserSpec {
    /// Arguments with the file placeholder replaced by `file`.
    pub fn render_args(&self, file: &Path) -> Vec<String> {
        let file = file.to_string_lossy();
        self.args
            .iter()
            .map(|a| a.replace(FILE_PLACEHOLDER, &file))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// Matched against stderr lines.
    #[default]
    Regex,
    /// Fires once when the run exited with a nonzero status. Never matches
    /// stderr text.
    NonzeroExit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessagePattern {
    pub row_index: usize,
    pub parser: String,
    pub regex: String,
    pub description: String,
    pub kind: PatternKind,
}

/// Compiled per-parser lookup. `rows[i]` is the row index of the `i`-th
/// regex in `set`, ascending.
#[derive(Debug, Clone)]
struct ParserMatcher {
    rows: Vec<usize>,
    set: RegexSet,
    exit_rows: Vec<usize>,
}

/// Ordered, validated message catalog. Immutable once constructed.
#[derive(Debug, Clone)]
pub struct MessageCatalog {
    parsers: Vec<ParserSpec>,
    patterns: Vec<MessagePattern>,
    matchers: HashMap<String, ParserMatcher>,
}

impl PartialEq for MessageCatalog {
    fn eq(&self, other: &Self) -> bool {
        self.parsers == other.parsers && self.patterns == other.patterns
    }
}

// On-disk document shape.

#[derive(Debug, Serialize, Deserialize)]
struct CatalogDoc {
    parsers: Vec<ParserDoc>,
    messages: Vec<MessageDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParserDoc {
    name: String,
    command: String,
    args: Vec<String>,
    timeout_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MessageDoc {
    row: usize,
    parser: String,
    #[serde(default)]
    regex: String,
    #[serde(default)]
    description: String,
    #[serde(default, skip_serializing_if = "is_regex_kind")]
    kind: PatternKind,
}

fn is_regex_kind(k: &PatternKind) -> bool {
    *k == PatternKind::Regex
}

impl MessageCatalog {
    /// Validates and compiles a catalog. Patterns must be listed in row
    /// order with row indices exactly `1..=N`.
    pub fn new(parsers: Vec<ParserSpec>, patterns: Vec<MessagePattern>) -> Result<Self> {
        let mut names = HashSet::new();
        for p in &parsers {
            if p.name.is_empty() {
                return Err(Error::catalog(None, "parser name is empty"));
            }
            if !names.insert(p.name.as_str()) {
                return Err(Error::catalog(None, format!("duplicate parser name `{}`", p.name)));
            }
            if p.command.is_empty() {
                return Err(Error::catalog(None, format!("parser `{}` has an empty command", p.name)));
            }
            let placeholders: usize = p.args.iter().map(|a| a.matches(FILE_PLACEHOLDER).count()).sum();
            if placeholders != 1 {
                return Err(Error::catalog(
                    None,
                    format!(
                        "parser `{}` arguments must contain exactly one {FILE_PLACEHOLDER} placeholder (found {placeholders})",
                        p.name
                    ),
                ));
            }
            if p.timeout.is_zero() {
                return Err(Error::catalog(None, format!("parser `{}` timeout must be positive", p.name)));
            }
        }

        let mut seen = HashSet::new();
        for (pos, pat) in patterns.iter().enumerate() {
            let row = pat.row_index;
            if !seen.insert(row) {
                return Err(Error::catalog(Some(row), format!("duplicate row_index {row}")));
            }
            if row != pos + 1 {
                return Err(Error::catalog(
                    Some(row),
                    format!("rows must be exactly 1..N in order; expected {} here", pos + 1),
                ));
            }
            if !names.contains(pat.parser.as_str()) {
                return Err(Error::catalog(
                    Some(row),
                    format!("pattern references undeclared parser `{}`", pat.parser),
                ));
            }
            if pat.kind == PatternKind::Regex {
                if let Err(e) = regex::Regex::new(&pat.regex) {
                    return Err(Error::catalog(Some(row), format!("regex does not compile: {e}")));
                }
            }
        }

        let mut matchers = HashMap::new();
        for p in &parsers {
            let mut rows = Vec::new();
            let mut regexes = Vec::new();
            let mut exit_rows = Vec::new();
            for pat in patterns.iter().filter(|m| m.parser == p.name) {
                match pat.kind {
                    PatternKind::Regex => {
                        rows.push(pat.row_index);
                        regexes.push(pat.regex.as_str());
                    }
                    PatternKind::NonzeroExit => exit_rows.push(pat.row_index),
                }
            }
            let set = RegexSet::new(&regexes)
                .map_err(|e| Error::catalog(rows.first().copied(), format!("regex set for `{}`: {e}", p.name)))?;
            matchers.insert(
                p.name.clone(),
                ParserMatcher {
                    rows,
                    set,
                    exit_rows,
                },
            );
        }

        Ok(MessageCatalog {
            parsers,
            patterns,
            matchers,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CatalogDoc = serde_json::from_str(text)?;
        let mut parsers = Vec::with_capacity(doc.parsers.len());
        for p in doc.parsers {
            if !(p.timeout_s.is_finite() && p.timeout_s > 0.0) {
                return Err(Error::catalog(None, format!("parser `{}` timeout must be positive", p.name)));
            }
            parsers.push(ParserSpec {
                name: p.name,
                command: p.command,
                args: p.args,
                timeout: Duration::from_secs_f64(p.timeout_s),
            });
        }
        let patterns = doc
            .messages
            .into_iter()
            .map(|m| MessagePattern {
                row_index: m.row,
                parser: m.parser,
                regex: m.regex,
                description: m.description,
                kind: m.kind,
            })
            .collect();
        Self::new(parsers, patterns)
    }

    pub fn to_json(&self) -> String {
        let doc = CatalogDoc {
            parsers: self
                .parsers
                .iter()
                .map(|p| ParserDoc {
                    name: p.name.clone(),
                    command: p.command.clone(),
                    args: p.args.clone(),
                    timeout_s: p.timeout.as_secs_f64(),
                })
                .collect(),
            messages: self
                .patterns
                .iter()
                .map(|m| MessageDoc {
                    row: m.row_index,
                    parser: m.parser.clone(),
                    regex: m.regex.clone(),
                    description: m.description.clone(),
                    kind: m.kind,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("catalog document serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Number of message rows, N.
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn parsers(&self) -> &[ParserSpec] {
        &self.parsers
    }

    pub fn patterns(&self) -> &[MessagePattern] {
        &self.patterns
    }

    pub fn parser(&self, name: &str) -> Option<&ParserSpec> {
        self.parsers.iter().find(|p| p.name == name)
    }

    pub fn pattern(&self, row: usize) -> Option<&MessagePattern> {
        row.checked_sub(1).and_then(|i| self.patterns.get(i))
    }

    /// Name of the parser owning `row`.
    pub fn parser_of_row(&self, row: usize) -> Option<&str> {
        self.pattern(row).map(|p| p.parser.as_str())
    }

    /// Every parser's owned rows. Parsers that own no rows map to an empty set.
    pub fn parser_row_ranges(&self) -> BTreeMap<String, BTreeSet<usize>> {
        let mut out: BTreeMap<String, BTreeSet<usize>> =
            self.parsers.iter().map(|p| (p.name.clone(), BTreeSet::new())).collect();
        for pat in &self.patterns {
            out.entry(pat.parser.clone()).or_default().insert(pat.row_index);
        }
        out
    }

    /// Contiguous row ranges owned by `parser`, ascending.
    pub fn contiguous_ranges(&self, parser: &str) -> Vec<RangeInclusive<usize>> {
        let mut out: Vec<RangeInclusive<usize>> = Vec::new();
        for pat in self.patterns.iter().filter(|p| p.parser == parser) {
            let r = pat.row_index;
            match out.last_mut() {
                Some(last) if *last.end() + 1 == r => *last = *last.start()..=r,
                _ => out.push(r..=r),
            }
        }
        out
    }

    /// Row index of the first regex (in row order) owned by `parser` that
    /// matches `line`.
    pub fn match_line(&self, parser: &str, line: &str) -> Option<usize> {
        let m = self.matchers.get(parser)?;
        m.set.matches(line).iter().next().map(|i| m.rows[i])
    }

    /// Rows of kind [`PatternKind::NonzeroExit`] owned by `parser`.
    pub fn exit_rows(&self, parser: &str) -> &[usize] {
        self.matchers.get(parser).map(|m| m.exit_rows.as_slice()).unwrap_or(&[])
    }

    /// Copy of this catalog with one `nonzero_exit` row appended per parser
    /// (in parser declaration order) that does not already have one.
    pub fn with_exit_rows(&self) -> Result<Self> {
        let mut patterns = self.patterns.clone();
        for p in &self.parsers {
            if !self.exit_rows(&p.name).is_empty() {
                continue;
            }
            patterns.push(MessagePattern {
                row_index: patterns.len() + 1,
                parser: p.name.clone(),
                regex: String::new(),
                description: "nonzero exit status".to_string(),
                kind: PatternKind::NonzeroExit,
            });
        }
        Self::new(self.parsers.clone(), patterns)
    }
}

impl fmt::Display for MessageCatalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "catalog: {} parsers, {} messages", self.parsers.len(), self.patterns.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> &'static str {
        r#"{
          "parsers": [
            {"name": "p1", "command": "/bin/true", "args": ["{file}"], "timeout_s": 5},
            {"name": "p2", "command": "/bin/true", "args": ["-i", "{file}"], "timeout_s": 1.5}
          ],
          "messages": [
            {"row": 1, "parser": "p1", "regex": "^Type error", "description": "type"},
            {"row": 2, "parser": "p1", "regex": ".+", "description": "uncategorized"},
            {"row": 3, "parser": "p2", "regex": "error", "description": ""}
          ]
        }"#
    }

    #[test]
    fn loads_minimal_catalog() {
        let c = MessageCatalog::from_json(minimal_json()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.parsers().len(), 2);
        assert_eq!(c.parser("p2").unwrap().timeout, Duration::from_millis(1500));
        let ranges = c.parser_row_ranges();
        assert_eq!(ranges["p1"], BTreeSet::from([1, 2]));
        assert_eq!(ranges["p2"], BTreeSet::from([3]));
    }

    #[test]
    fn duplicate_row_cites_row() {
        let text = minimal_json().replace(r#""row": 3"#, r#""row": 2"#);
        let err = MessageCatalog::from_json(&text).unwrap_err();
        match err {
            Error::Catalog { row, message } => {
                assert_eq!(row, Some(2));
                assert!(message.contains("duplicate"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn gap_is_rejected() {
        let text = minimal_json().replace(r#""row": 3"#, r#""row": 4"#);
        let err = MessageCatalog::from_json(&text).unwrap_err();
        assert!(matches!(err, Error::Catalog { row: Some(4), .. }));
    }

    #[test]
    fn bad_regex_and_unknown_parser() {
        let text = minimal_json().replace("^Type error", "(unclosed");
        assert!(matches!(
            MessageCatalog::from_json(&text).unwrap_err(),
            Error::Catalog { row: Some(1), .. }
        ));
        let text = minimal_json().replace(r#""parser": "p2", "regex""#, r#""parser": "p9", "regex""#);
        assert!(matches!(
            MessageCatalog::from_json(&text).unwrap_err(),
            Error::Catalog { row: Some(3), .. }
        ));
    }

    #[test]
    fn backreferences_are_outside_the_dialect() {
        let text = minimal_json().replace("^Type error", r"(a)\\1");
        assert!(MessageCatalog::from_json(&text).is_err());
    }

    #[test]
    fn parser_invariants() {
        let two = minimal_json().replace(r#"["{file}"]"#, r#"["{file}", "{file}"]"#);
        assert!(MessageCatalog::from_json(&two).is_err());
        let none = minimal_json().replace(r#"["{file}"]"#, r#"["x"]"#);
        assert!(MessageCatalog::from_json(&none).is_err());
        let zero = minimal_json().replace(r#""timeout_s": 5"#, r#""timeout_s": 0"#);
        assert!(MessageCatalog::from_json(&zero).is_err());
        let dup = minimal_json().replace(r#""name": "p2""#, r#""name": "p1""#);
        assert!(MessageCatalog::from_json(&dup).is_err());
        let empty = minimal_json().replace(r#""name": "p2""#, r#""name": """#);
        assert!(MessageCatalog::from_json(&empty).is_err());
    }

    #[test]
    fn first_match_wins_within_parser() {
        let c = MessageCatalog::from_json(minimal_json()).unwrap();
        assert_eq!(c.match_line("p1", "Type error : Invalid variant type"), Some(1));
        assert_eq!(c.match_line("p1", "something else"), Some(2));
        assert_eq!(c.match_line("p1", ""), None);
        // p1's rows are never consulted for p2's output
        assert_eq!(c.match_line("p2", "Type mismatch"), None);
        assert_eq!(c.match_line("p2", "an error"), Some(3));
        assert_eq!(c.match_line("nope", "error"), None);
    }

    #[test]
    fn single_parser_catalog() {
        let msgs: Vec<String> = (1..=5)
            .map(|i| format!(r#"{{"row": {i}, "parser": "only", "regex": "m{i}"}}"#))
            .collect();
        let text = format!(
            r#"{{"parsers": [{{"name": "only", "command": "x", "args": ["{{file}}"], "timeout_s": 1}}], "messages": [{}]}}"#,
            msgs.join(",")
        );
        let c = MessageCatalog::from_json(&text).unwrap();
        let ranges = c.parser_row_ranges();
        assert_eq!(ranges.len(), 1);
        assert_eq!(ranges["only"].len(), 5);
        assert_eq!(c.contiguous_ranges("only"), vec![1..=5]);
    }

    #[test]
    fn exit_rows_are_appended() {
        let c = MessageCatalog::from_json(minimal_json()).unwrap().with_exit_rows().unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.exit_rows("p1"), &[4]);
        assert_eq!(c.exit_rows("p2"), &[5]);
        assert_eq!(c.contiguous_ranges("p1"), vec![1..=2, 4..=4]);
        // idempotent
        assert_eq!(c.with_exit_rows().unwrap().len(), 5);
        let back = MessageCatalog::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn save_load_round_trip() {
        let c = MessageCatalog::from_json(minimal_json()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        c.save(&path).unwrap();
        assert_eq!(MessageCatalog::load(&path).unwrap(), c);
    }
}
