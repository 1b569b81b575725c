//! Running parsers over a corpus and counting the messages they emit.
//!
//! Only stderr is inspected. Exit codes are recorded on each [`ParserRun`]
//! but contribute to counts only through catalog rows of kind
//! [`PatternKind::NonzeroExit`](crate::catalog::PatternKind::NonzeroExit).
//!
//! Captured-log layout (offline mode, see [`ingest_captured`]):
//!
//! ```text
//! <dir>/f000001.qpdf.stderr
//! <dir>/f000001.qpdf.meta      {"exit_code":1,"duration_s":0.12,"timed_out":false}
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::catalog::{MessageCatalog, ParserSpec};
use crate::error::{Error, Result};
use crate::matrix::{GroundTruth, Label};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub file_id: usize,
    pub path: PathBuf,
    pub ground_truth: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub dataset_label: String,
    /// Sorted by `file_id`, which runs `1..=M`.
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct ManifestRecord {
    file_id: usize,
    path: String,
    #[serde(default)]
    ground_truth: String,
}

impl CorpusManifest {
    pub fn new(dataset_label: impl Into<String>, mut entries: Vec<ManifestEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.file_id);
        for (i, e) in entries.iter().enumerate() {
            if e.file_id != i + 1 {
                return Err(Error::Manifest(format!(
                    "file ids must be exactly 1..M; expected {} but found {}",
                    i + 1,
                    e.file_id
                )));
            }
        }
        let mut paths = HashSet::new();
        for e in &entries {
            if !paths.insert(&e.path) {
                return Err(Error::Manifest(format!("duplicate path {}", e.path.display())));
            }
        }
        Ok(CorpusManifest {
            dataset_label: dataset_label.into(),
            entries,
        })
    }

    /// Reads a `file_id,path,ground_truth` CSV. Relative paths are resolved
    /// against the manifest's directory.
    pub fn load(path: impl AsRef<Path>, dataset_label: impl Into<String>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut entries = Vec::new();
        for (i, rec) in rdr.deserialize::<ManifestRecord>().enumerate() {
            let rec = rec?;
            let ground_truth = match rec.ground_truth.as_str() {
                "" => None,
                s => Some(s.parse::<Label>().map_err(|e| Error::parse(i + 2, e))?),
            };
            let p = PathBuf::from(&rec.path);
            let p = if p.is_absolute() { p } else { base.join(p) };
            entries.push(ManifestEntry {
                file_id: rec.file_id,
                path: p,
                ground_truth,
            });
        }
        Self::new(dataset_label, entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Labels of entries that carry one.
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth::from_iter(self.entries.iter().filter_map(|e| e.ground_truth.map(|g| (e.file_id, g))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParserRun {
    pub file_id: usize,
    pub parser: String,
    /// Absent when the process timed out or was killed by a signal.
    pub exit_code: Option<i32>,
    pub stderr_text: String,
    pub duration: Duration,
    pub timed_out: bool,
}

/// Locates an executable: paths containing `/` are checked directly,
/// bare names are searched on `PATH`.
pub fn resolve_command(command: &str) -> Option<PathBuf> {
    fn is_executable(p: &Path) -> bool {
        match std::fs::metadata(p) {
            Ok(m) if m.is_file() => {
                #[cfg(unix)]
                {
                    use std::os::unix::fs::PermissionsExt;
                    m.permissions().mode() & 0o111 != 0
                }
                #[cfg(not(unix))]
                {
                    true
                }
            }
            _ => false,
        }
    }
    if command.contains('/') {
        let p = PathBuf::from(command);
        return is_executable(&p).then_some(p);
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(command))
        .find(|p| is_executable(p))
}

/// Runs every catalog parser on every manifest file with at most
/// `parallelism` subprocesses in flight. The result is sorted by
/// `(file_id, parser)` regardless of completion order.
pub fn run_corpus(manifest: &CorpusManifest, catalog: &MessageCatalog, parallelism: usize) -> Result<Vec<ParserRun>> {
    if parallelism == 0 {
        return Err(Error::InvalidArgument("parallelism must be at least 1".into()));
    }
    let mut exes = HashMap::new();
    for p in catalog.parsers() {
        let exe = resolve_command(&p.command).ok_or_else(|| Error::MissingExecutable {
            parser: p.name.clone(),
            command: p.command.clone(),
        })?;
        exes.insert(p.name.as_str(), exe);
    }

    let jobs: Vec<(&ManifestEntry, &ParserSpec)> = manifest
        .entries
        .iter()
        .flat_map(|e| catalog.parsers().iter().map(move |p| (e, p)))
        .collect();
    let next = AtomicUsize::new(0);
    let workers = parallelism.min(jobs.len()).max(1);

    let mut runs: Vec<ParserRun> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some((entry, parser)) = jobs.get(i) else { break };
                        done.push(execute(parser, &exes[parser.name.as_str()], entry));
                    }
                    done
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("harness worker panicked"))
            .collect()
    });
    runs.sort_by(|a, b| (a.file_id, &a.parser).cmp(&(b.file_id, &b.parser)));
    Ok(runs)
}

fn execute(parser: &ParserSpec, exe: &Path, entry: &ManifestEntry) -> ParserRun {
    let mut cmd = Command::new(exe);
    cmd.args(parser.render_args(&entry.path))
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }

    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => {
            log::warn!("{} on file {}: spawn failed: {e}", parser.name, entry.file_id);
            return ParserRun {
                file_id: entry.file_id,
                parser: parser.name.clone(),
                exit_code: None,
                stderr_text: String::new(),
                duration: start.elapsed(),
                timed_out: false,
            };
        }
    };

    let mut stderr = child.stderr.take().expect("stderr is piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let mut poll = Duration::from_millis(1);
    let (status, timed_out) = loop {
        match child.try_wait() {
            Ok(Some(status)) => break (Some(status), false),
            Ok(None) => {}
            Err(e) => {
                log::warn!("{} on file {}: wait failed: {e}", parser.name, entry.file_id);
                break (None, false);
            }
        }
        if start.elapsed() >= parser.timeout {
            kill_group(&mut child);
            let _ = child.wait();
            break (None, true);
        }
        std::thread::sleep(poll);
        poll = (poll * 2).min(Duration::from_millis(20));
    };
    let duration = start.elapsed();
    // Stragglers in the group would otherwise hold stderr open.
    kill_group(&mut child);
    let bytes = reader.join().unwrap_or_default();

    ParserRun {
        file_id: entry.file_id,
        parser: parser.name.clone(),
        exit_code: if timed_out { None } else { status.and_then(|s| s.code()) },
        stderr_text: String::from_utf8_lossy(&bytes).into_owned(),
        duration,
        timed_out,
    }
}

fn kill_group(child: &mut std::process::Child) {
    #[cfg(unix)]
    {
        let pgid = child.id() as libc::pid_t;
        // SAFETY: signalling a process group we created; ESRCH is harmless.
        unsafe {
            libc::kill(-pgid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
pub struct RunMeta {
    pub exit_code: Option<i32>,
    pub duration_s: f64,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub runs: Vec<ParserRun>,
    pub warnings: Vec<String>,
}

/// Path stem `<dir>/f<file_id:06>.<parser>` for a run's captured logs.
pub fn log_stem(dir: &Path, file_id: usize, parser: &str) -> PathBuf {
    dir.join(format!("f{file_id:06}.{parser}"))
}

/// Builds runs from pre-captured stderr logs. Every (manifest file, catalog
/// parser) pair yields a run; absent logs give empty stderr plus a warning.
pub fn ingest_captured(dir: &Path, manifest: &CorpusManifest, catalog: &MessageCatalog) -> Result<Ingested> {
    let name_re = Regex::new(r"^f(\d{6,})\.(.+)\.(stderr|meta)$").expect("static regex");
    let mut stderr_files: HashMap<(usize, String), PathBuf> = HashMap::new();
    let mut meta_files: HashMap<(usize, String), PathBuf> = HashMap::new();
    let mut warnings = Vec::new();

    let mut listing: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    listing.sort();
    for path in listing {
        if path.is_dir() {
            continue;
        }
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let caps = name_re.captures(&name).ok_or_else(|| Error::Layout(path.clone()))?;
        let file_id: usize = caps[1].parse().map_err(|_| Error::Layout(path.clone()))?;
        let parser = caps[2].to_string();
        if catalog.parser(&parser).is_none() {
            warnings.push(format!("{}: parser `{parser}` not in catalog, ignored", path.display()));
            continue;
        }
        if file_id == 0 || file_id > manifest.len() {
            warnings.push(format!("{}: file id {file_id} not in manifest, ignored", path.display()));
            continue;
        }
        let key = (file_id, parser);
        match &caps[3] {
            "stderr" => stderr_files.insert(key, path),
            _ => meta_files.insert(key, path),
        };
    }

    let mut runs = Vec::with_capacity(manifest.len() * catalog.parsers().len());
    for entry in &manifest.entries {
        let mut names: Vec<&str> = catalog.parsers().iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        for parser in names {
            let key = (entry.file_id, parser.to_string());
            let stderr_text = match stderr_files.get(&key) {
                Some(p) => String::from_utf8_lossy(&std::fs::read(p)?).into_owned(),
                None => {
                    warnings.push(format!("missing stderr log for file {} parser `{parser}`", entry.file_id));
                    String::new()
                }
            };
            let mut meta = match meta_files.get(&key) {
                Some(p) => serde_json::from_slice::<RunMeta>(&std::fs::read(p)?)?,
                None => RunMeta::default(),
            };
            if meta.timed_out && meta.exit_code.is_some() {
                warnings.push(format!(
                    "file {} parser `{parser}`: timed out run carries an exit code, dropped",
                    entry.file_id
                ));
                meta.exit_code = None;
            }
            runs.push(ParserRun {
                file_id: entry.file_id,
                parser: parser.to_string(),
                exit_code: meta.exit_code,
                stderr_text,
                duration: Duration::from_secs_f64(meta.duration_s.max(0.0)),
                timed_out: meta.timed_out,
            });
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Ingested { runs, warnings })
}

/// Writes runs in the captured-log layout read by [`ingest_captured`].
pub fn write_captured(dir: &Path, runs: &[ParserRun]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for run in runs {
        let stem = log_stem(dir, run.file_id, &run.parser);
        std::fs::write(stem.with_extension_appended("stderr"), run.stderr_text.as_bytes())?;
        let meta = RunMeta {
            exit_code: run.exit_code,
            duration_s: run.duration.as_secs_f64(),
            timed_out: run.timed_out,
        };
        std::fs::write(stem.with_extension_appended("meta"), serde_json::to_vec(&meta)?)?;
    }
    Ok(())
}

trait AppendExt {
    fn with_extension_appended(&self, ext: &str) -> PathBuf;
}

impl AppendExt for PathBuf {
    fn with_extension_appended(&self, ext: &str) -> PathBuf {
        let mut s = self.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    }
}

/// Per-row message counts for one run. Only rows owned by `run.parser` can
/// appear; each stderr line increments at most one row.
pub fn match_messages(run: &ParserRun, catalog: &MessageCatalog) -> BTreeMap<usize, u64> {
    let mut counts = BTreeMap::new();
    for line in run.stderr_text.lines() {
        if let Some(row) = catalog.match_line(&run.parser, line) {
            *counts.entry(row).or_insert(0) += 1;
        }
    }
    if matches!(run.exit_code, Some(c) if c != 0) {
        for &row in catalog.exit_rows(&run.parser) {
            *counts.entry(row).or_insert(0) += 1;
        }
    }
    counts
}
