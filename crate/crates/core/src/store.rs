//! Embedded file-backed store.
//!
//! Keyed tables (`users`, `layouts`, `settings`, `records`) live in one
//! snapshot file each, replaced wholesale on every write by writing a temp
//! file, fsyncing it and renaming it over the old one. Stream tables
//! (`action_log`, `chat`) are append-only journals, fsynced per entry.
//!
//! Snapshot layout (UTF-8, one item per line):
//!
//! ```text
//! flexgui-table 1 <table>
//! <json item>
//! ...
//! #end <item count>
//! ```
//!
//! Journal layout: `<index>\t<json string>\n`, indices dense from 1. A final
//! line without its newline is a torn, unacknowledged append and is dropped
//! when the journal is reopened.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SNAPSHOT_MAGIC: &str = "flexgui-table 1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: corrupt table file: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("seed line {line}: {reason}")]
    Seed { line: u64, reason: String },
}

pub type StoreResult<T> = Result<T, StoreError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Tables addressed by key with overwrite semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyedTable {
    Users,
    Layouts,
    Settings,
}

impl KeyedTable {
    pub const ALL: [KeyedTable; 3] = [KeyedTable::Users, KeyedTable::Layouts, KeyedTable::Settings];

    pub fn name(self) -> &'static str {
        match self {
            KeyedTable::Users => "users",
            KeyedTable::Layouts => "layouts",
            KeyedTable::Settings => "settings",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Append-only tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    ActionLog,
    Chat,
}

impl Stream {
    pub const ALL: [Stream; 2] = [Stream::ActionLog, Stream::Chat];

    pub fn name(self) -> &'static str {
        match self {
            Stream::ActionLog => "action_log",
            Stream::Chat => "chat",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One row of the searchable `records` table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Record {
    pub id: i64,
    pub name: String,
    pub category: String,
    pub description: String,
}

/// Points inside a write at which a crash can be injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlushPoint {
    SnapshotTempWritten,
    SnapshotSynced,
    SnapshotRenamed,
    JournalPartial,
    JournalWritten,
}

pub type CrashHook = Arc<dyn Fn(FlushPoint) + Send + Sync>;

struct KeyedSlot {
    path: PathBuf,
    data: RwLock<Arc<BTreeMap<String, String>>>,
    writer: Mutex<()>,
}

struct StreamSlot {
    path: PathBuf,
    entries: RwLock<Vec<Arc<str>>>,
    file: Mutex<File>,
}

pub struct Store {
    dir: PathBuf,
    keyed: Vec<KeyedSlot>,
    streams: Vec<StreamSlot>,
    records_path: PathBuf,
    records: RwLock<Arc<Vec<Record>>>,
    records_writer: Mutex<()>,
    crash_hook: Option<CrashHook>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) the store rooted at `dir`. Missing files
    /// are empty tables; unreadable or corrupt ones fail naming the file.
    pub fn open(dir: impl AsRef<Path>) -> StoreResult<Store> {
        Self::open_inner(dir.as_ref(), None)
    }

    /// Like [`Store::open`], calling `hook` at every [`FlushPoint`].
    pub fn open_with_crash_hook(dir: impl AsRef<Path>, hook: CrashHook) -> StoreResult<Store> {
        Self::open_inner(dir.as_ref(), Some(hook))
    }

    fn open_inner(dir: &Path, crash_hook: Option<CrashHook>) -> StoreResult<Store> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            if path.extension().is_some_and(|e| e == "tmp") {
                fs::remove_file(&path).map_err(io_err(&path))?;
            }
        }

        let mut keyed = Vec::new();
        for table in KeyedTable::ALL {
            let path = dir.join(format!("{}.tbl", table.name()));
            let mut map = BTreeMap::new();
            for (line, item) in read_snapshot(&path, table.name())? {
                let (k, v): (String, String) = serde_json::from_str(&item).map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    line,
                    reason: e.to_string(),
                })?;
                map.insert(k, v);
            }
            keyed.push(KeyedSlot {
                path,
                data: RwLock::new(Arc::new(map)),
                writer: Mutex::new(()),
            });
        }

        let mut streams = Vec::new();
        for stream in Stream::ALL {
            let path = dir.join(format!("{}.jnl", stream.name()));
            let entries = load_journal(&path)?;
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(io_err(&path))?;
            streams.push(StreamSlot {
                path,
                entries: RwLock::new(entries),
                file: Mutex::new(file),
            });
        }

        let records_path = dir.join("records.tbl");
        let mut records = Vec::new();
        for (line, item) in read_snapshot(&records_path, "records")? {
            records.push(serde_json::from_str(&item).map_err(|e| StoreError::Corrupt {
                path: records_path.clone(),
                line,
                reason: e.to_string(),
            })?);
        }

        sync_dir(dir)?;
        Ok(Store {
            dir: dir.to_owned(),
            keyed,
            streams,
            records_path,
            records: RwLock::new(Arc::new(records)),
            records_writer: Mutex::new(()),
            crash_hook,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn flush_point(&self, point: FlushPoint) {
        if let Some(hook) = &self.crash_hook {
            hook(point);
        }
    }

    pub fn get(&self, table: KeyedTable, key: &str) -> Option<String> {
        let slot = &self.keyed[table.index()];
        let data = slot.data.read().expect("table lock poisoned").clone();
        data.get(key).cloned()
    }

    pub fn len(&self, table: KeyedTable) -> usize {
        self.keyed[table.index()].data.read().expect("table lock poisoned").len()
    }

    pub fn is_empty(&self, table: KeyedTable) -> bool {
        self.len(table) == 0
    }

    /// Durably sets `key` to `value`; returns once the new snapshot is in place.
    pub fn put(&self, table: KeyedTable, key: &str, value: &str) -> StoreResult<()> {
        self.write_keyed(table, |map| {
            map.insert(key.to_owned(), value.to_owned());
            true
        })
        .map(|_| ())
    }

    /// Inserts `key` only if absent. `make` receives the current row count
    /// and runs under the table's write lock. Returns whether it inserted.
    pub fn put_if_absent(
        &self,
        table: KeyedTable,
        key: &str,
        make: impl FnOnce(usize) -> String,
    ) -> StoreResult<bool> {
        self.write_keyed(table, |map| {
            if map.contains_key(key) {
                return false;
            }
            let value = make(map.len());
            map.insert(key.to_owned(), value);
            true
        })
    }

    fn write_keyed(
        &self,
        table: KeyedTable,
        edit: impl FnOnce(&mut BTreeMap<String, String>) -> bool,
    ) -> StoreResult<bool> {
        let slot = &self.keyed[table.index()];
        let _writer = slot.writer.lock().expect("writer lock poisoned");
        let mut next = (**slot.data.read().expect("table lock poisoned")).clone();
        if !edit(&mut next) {
            return Ok(false);
        }
        let lines = next
            .iter()
            .map(|kv| serde_json::to_string(&kv).expect("strings serialize"));
        self.write_snapshot(&slot.path, table.name(), lines)?;
        *slot.data.write().expect("table lock poisoned") = Arc::new(next);
        Ok(true)
    }

    /// Appends an entry built by `make`, which receives the entry's index
    /// (dense from 1) and runs under the stream's write lock.
    pub fn append_with(&self, stream: Stream, make: impl FnOnce(u64) -> String) -> StoreResult<u64> {
        let slot = &self.streams[stream.index()];
        let mut file = slot.file.lock().expect("journal lock poisoned");
        let index = slot.entries.read().expect("journal lock poisoned").len() as u64 + 1;
        let entry = make(index);
        let line = format!(
            "{index}\t{}\n",
            serde_json::to_string(&entry).expect("strings serialize")
        );
        let (head, tail) = line.as_bytes().split_at(line.len() / 2);
        let io = io_err(&slot.path);
        file.write_all(head).map_err(io)?;
        self.flush_point(FlushPoint::JournalPartial);
        file.write_all(tail).map_err(io_err(&slot.path))?;
        self.flush_point(FlushPoint::JournalWritten);
        file.sync_data().map_err(io_err(&slot.path))?;
        slot.entries
            .write()
            .expect("journal lock poisoned")
            .push(Arc::from(entry));
        Ok(index)
    }

    pub fn append(&self, stream: Stream, entry: &str) -> StoreResult<u64> {
        self.append_with(stream, |_| entry.to_owned())
    }

    /// Entries with index greater than `after`, ascending, at most `limit`.
    pub fn scan(&self, stream: Stream, after: u64, limit: usize) -> Vec<(u64, Arc<str>)> {
        let entries = self.streams[stream.index()]
            .entries
            .read()
            .expect("journal lock poisoned");
        let start = usize::try_from(after).unwrap_or(usize::MAX).min(entries.len());
        entries[start..]
            .iter()
            .take(limit)
            .enumerate()
            .map(|(i, e)| ((start + i + 1) as u64, e.clone()))
            .collect()
    }

    /// Entries newest first, filtered by `keep`, at most `limit`.
    pub fn scan_rev_filtered(
        &self,
        stream: Stream,
        limit: usize,
        mut keep: impl FnMut(&str) -> bool,
    ) -> Vec<Arc<str>> {
        let entries = self.streams[stream.index()]
            .entries
            .read()
            .expect("journal lock poisoned");
        entries
            .iter()
            .rev()
            .filter(|e| keep(e))
            .take(limit)
            .cloned()
            .collect()
    }

    /// Highest assigned index; 0 for an empty stream.
    pub fn stream_len(&self, stream: Stream) -> u64 {
        self.streams[stream.index()]
            .entries
            .read()
            .expect("journal lock poisoned")
            .len() as u64
    }

    /// Read-only snapshot of the records table.
    pub fn records(&self) -> Arc<Vec<Record>> {
        self.records.read().expect("records lock poisoned").clone()
    }

    pub fn replace_records(&self, records: Vec<Record>) -> StoreResult<()> {
        let _writer = self.records_writer.lock().expect("writer lock poisoned");
        let lines = records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize"));
        self.write_snapshot(&self.records_path, "records", lines)?;
        *self.records.write().expect("records lock poisoned") = Arc::new(records);
        Ok(())
    }

    /// Replaces the records table from a seed CSV file.
    pub fn ingest_seed(&self, csv_path: impl AsRef<Path>) -> StoreResult<usize> {
        let path = csv_path.as_ref();
        let file = File::open(path).map_err(io_err(path))?;
        self.ingest_seed_reader(file)
    }

    pub fn ingest_seed_reader(&self, reader: impl Read) -> StoreResult<usize> {
        let records = parse_seed(reader)?;
        let n = records.len();
        self.replace_records(records)?;
        Ok(n)
    }

    fn write_snapshot(
        &self,
        path: &Path,
        table: &str,
        lines: impl Iterator<Item = String>,
    ) -> StoreResult<()> {
        let tmp = path.with_extension("tmp");
        let mut body = format!("{SNAPSHOT_MAGIC} {table}\n");
        let mut count = 0usize;
        for line in lines {
            body.push_str(&line);
            body.push('\n');
            count += 1;
        }
        body.push_str(&format!("#end {count}\n"));

        let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(body.as_bytes()).map_err(io_err(&tmp))?;
        self.flush_point(FlushPoint::SnapshotTempWritten);
        file.sync_all().map_err(io_err(&tmp))?;
        drop(file);
        self.flush_point(FlushPoint::SnapshotSynced);
        fs::rename(&tmp, path).map_err(io_err(path))?;
        self.flush_point(FlushPoint::SnapshotRenamed);
        sync_dir(&self.dir)
    }
}

fn sync_dir(dir: &Path) -> StoreResult<()> {
    #[cfg(unix)]
    File::open(dir)
        .and_then(|d| d.sync_all())
        .map_err(io_err(dir))?;
    Ok(())
}

/// Items of a snapshot file with their 1-based line numbers; empty if the
/// file does not exist.
fn read_snapshot(path: &Path, table: &str) -> StoreResult<Vec<(usize, String)>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) if e.kind() == io::ErrorKind::InvalidData => {
            return Err(StoreError::Corrupt {
                path: path.to_owned(),
                line: 0,
                reason: "not valid UTF-8".into(),
            })
        }
        Err(e) => return Err(io_err(path)(e)),
    };
    let corrupt = |line: usize, reason: String| StoreError::Corrupt {
        path: path.to_owned(),
        line,
        reason,
    };
    if !text.ends_with('\n') {
        return Err(corrupt(text.lines().count(), "truncated (no final newline)".into()));
    }
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let expected = format!("{SNAPSHOT_MAGIC} {table}");
    match lines.next() {
        Some((_, header)) if header == expected => {}
        _ => return Err(corrupt(1, format!("expected header {expected:?}"))),
    }
    let mut items = Vec::new();
    for (n, line) in lines.by_ref() {
        if let Some(count) = line.strip_prefix("#end ") {
            if count.parse::<usize>().ok() != Some(items.len()) {
                return Err(corrupt(n, format!("end marker says {count}, found {} items", items.len())));
            }
            if let Some((extra, _)) = lines.next() {
                return Err(corrupt(extra, "data after end marker".into()));
            }
            return Ok(items);
        }
        items.push((n, line.to_owned()));
    }
    Err(corrupt(text.lines().count(), "truncated (missing end marker)".into()))
}

fn load_journal(path: &Path) -> StoreResult<Vec<Arc<str>>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut reader = BufReader::new(file);
    let mut entries: Vec<Arc<str>> = Vec::new();
    let mut good_len = 0u64;
    let mut raw = Vec::new();
    loop {
        raw.clear();
        let n = reader.read_until(b'\n', &mut raw).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        if raw.last() != Some(&b'\n') {
            // torn final append: never acknowledged
            break;
        }
        let line_no = entries.len() + 1;
        let corrupt = |reason: String| StoreError::Corrupt {
            path: path.to_owned(),
            line: line_no,
            reason,
        };
        let line = std::str::from_utf8(&raw[..raw.len() - 1]).map_err(|_| corrupt("not valid UTF-8".into()))?;
        let (index, body) = line
            .split_once('\t')
            .ok_or_else(|| corrupt("missing tab separator".into()))?;
        if index.parse::<usize>().ok() != Some(line_no) {
            return Err(corrupt(format!("index {index:?} out of sequence")));
        }
        let entry: String = serde_json::from_str(body).map_err(|e| corrupt(e.to_string()))?;
        entries.push(Arc::from(entry));
        good_len += n as u64;
    }
    let actual = fs::metadata(path).map_err(io_err(path))?.len();
    if actual != good_len {
        let file = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
        file.set_len(good_len).map_err(io_err(path))?;
        file.sync_all().map_err(io_err(path))?;
    }
    Ok(entries)
}

fn parse_seed(reader: impl Read) -> StoreResult<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let seed_err = |line: u64, reason: String| StoreError::Seed { line, reason };
    match rows.next() {
        Some(Ok(header)) if header.iter().eq(["id", "name", "category", "description"]) => {}
        Some(Ok(header)) => {
            return Err(seed_err(
                1,
                format!("expected header id,name,category,description, got {:?}", header.iter().collect::<Vec<_>>()),
            ))
        }
        Some(Err(e)) => return Err(seed_err(1, e.to_string())),
        None => return Err(seed_err(1, "missing header".into())),
    }
    let mut records = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            seed_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 4 {
            return Err(seed_err(line, format!("expected 4 fields, got {}", row.len())));
        }
        let id: i64 = row[0]
            .trim()
            .parse()
            .map_err(|_| seed_err(line, format!("id {:?} is not an integer", &row[0])))?;
        if !ids.insert(id) {
            return Err(seed_err(line, format!("duplicate id {id}")));
        }
        records.push(Record {
            id,
            name: row[1].to_owned(),
            category: row[2].to_owned(),
            description: row[3].to_owned(),
        });
    }
    Ok(records)
}
