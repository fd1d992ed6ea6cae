//! Write-ack-kill harness. The test binary re-runs itself with a filter
//! selecting [`CHILD_TEST`]; the child performs a fixed workload against a
//! store whose crash hook aborts the process at the Nth flush point and
//! prints `ACK i` after each acknowledged write. The parent then reopens
//! the store and checks that every acknowledged write survived.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use flexgui_core::store::{FlushPoint, KeyedTable, Record, Store, Stream};

pub const CHILD_TEST: &str = "crash_child";
const ENV_AT: &str = "FLEXGUI_CRASH_AT";
const ENV_DIR: &str = "FLEXGUI_CRASH_DIR";

#[derive(Debug, Clone)]
enum Op {
    Put(KeyedTable, String, String),
    Append(Stream, String),
    Records(Vec<Record>),
}

fn records(generation: usize) -> Vec<Record> {
    (1..=3)
        .map(|id| Record {
            id,
            name: format!("part {id} gen {generation}"),
            category: "c".into(),
            description: "d".into(),
        })
        .collect()
}

fn workload() -> Vec<Op> {
    let mut ops = Vec::new();
    for i in 0..48 {
        let op = match i % 6 {
            0 => Op::Put(KeyedTable::Users, format!("u{}", i % 4), format!("{{\"v\":{i}}}")),
            1 => Op::Append(Stream::Chat, format!("chat {i}")),
            2 => Op::Put(KeyedTable::Layouts, format!("{}", i % 3), format!("[{i}]")),
            3 => Op::Append(Stream::ActionLog, format!("log {i}")),
            4 => Op::Put(KeyedTable::Settings, "1".into(), format!("s{i}")),
            _ if i % 12 == 5 => Op::Records(records(i)),
            _ => Op::Append(Stream::Chat, format!("chat tab\tand newline\n {i}")),
        };
        ops.push(op);
    }
    ops
}

fn apply(store: &Store, op: &Op) {
    match op {
        Op::Put(t, k, v) => store.put(*t, k, v).unwrap(),
        Op::Append(s, e) => {
            store.append(*s, e).unwrap();
        }
        Op::Records(r) => store.replace_records(r.clone()).unwrap(),
    }
}

/// Body of the child test; does nothing unless launched by [`run_point`].
pub fn child_main() {
    let (Ok(at), Ok(dir)) = (std::env::var(ENV_AT), std::env::var(ENV_DIR)) else {
        return;
    };
    let at: usize = at.parse().unwrap();
    let seen = Arc::new(AtomicUsize::new(0));
    let hook_seen = Arc::clone(&seen);
    let hook = Arc::new(move |_: FlushPoint| {
        if hook_seen.fetch_add(1, Ordering::SeqCst) + 1 == at {
            std::process::abort();
        }
    });
    let store = Store::open_with_crash_hook(&dir, hook).unwrap();
    let mut out = std::io::stdout().lock();
    for (i, op) in workload().iter().enumerate() {
        apply(&store, op);
        writeln!(out, "ACK {i}").unwrap();
        out.flush().unwrap();
    }
    writeln!(out, "DONE {}", seen.load(Ordering::SeqCst)).unwrap();
    out.flush().unwrap();
    std::process::exit(0);
}

/// Total flush points in an uninterrupted workload run.
pub fn total_flush_points() -> usize {
    let dir = tempfile::tempdir().unwrap();
    let seen = Arc::new(AtomicUsize::new(0));
    let s = Arc::clone(&seen);
    let store = Store::open_with_crash_hook(dir.path(), Arc::new(move |_| {
        s.fetch_add(1, Ordering::SeqCst);
    }))
    .unwrap();
    for op in workload() {
        apply(&store, &op);
    }
    seen.load(Ordering::SeqCst)
}

#[derive(Debug)]
pub struct PointOutcome {
    pub acked: usize,
    pub crashed: bool,
}

#[derive(Default)]
struct Model {
    keyed: BTreeMap<(&'static str, String), String>,
    streams: BTreeMap<&'static str, Vec<String>>,
    records: Vec<Record>,
}

impl Model {
    fn apply(&mut self, op: &Op) {
        match op {
            Op::Put(t, k, v) => {
                self.keyed.insert((t.name(), k.clone()), v.clone());
            }
            Op::Append(s, e) => self.streams.entry(s.name()).or_default().push(e.clone()),
            Op::Records(r) => self.records = r.clone(),
        }
    }
}

fn snapshot(store: &Store) -> Model {
    let mut m = Model::default();
    let ops = workload();
    let keys: Vec<(KeyedTable, String)> = ops
        .iter()
        .filter_map(|op| match op {
            Op::Put(t, k, _) => Some((*t, k.clone())),
            _ => None,
        })
        .collect();
    for (t, k) in keys {
        if let Some(v) = store.get(t, &k) {
            m.keyed.insert((t.name(), k), v);
        }
    }
    for s in Stream::ALL {
        let entries: Vec<String> = store.scan(s, 0, usize::MAX).into_iter().map(|(_, e)| e.to_string()).collect();
        if !entries.is_empty() {
            m.streams.insert(s.name(), entries);
        }
    }
    m.records = store.records().to_vec();
    m
}

fn same(a: &Model, b: &Model) -> bool {
    a.keyed == b.keyed && a.streams == b.streams && a.records == b.records
}

/// Crashes the child at flush point `n` (1-based) and verifies recovery.
pub fn run_point(n: usize) -> Result<PointOutcome, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(std::env::current_exe().unwrap())
        .args([CHILD_TEST, "--exact", "--nocapture", "--test-threads=1"])
        .env(ENV_AT, n.to_string())
        .env(ENV_DIR, dir.path())
        .output()
        .map_err(|e| format!("spawn: {e}"))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    // libtest prints the first marker on its "test ... " line
    let acked = stdout.matches("ACK ").count();
    let crashed = !stdout.contains("DONE ");
    if crashed == out.status.success() {
        return Err(format!("point {n}: unexpected child status {:?}\n{stdout}", out.status));
    }
    verify(dir.path(), acked, crashed).map_err(|e| format!("point {n} (after {acked} acks): {e}"))?;
    Ok(PointOutcome { acked, crashed })
}

fn verify(dir: &Path, acked: usize, crashed: bool) -> Result<(), String> {
    let ops = workload();
    let mut before = Model::default();
    for op in &ops[..acked] {
        before.apply(op);
    }
    let store = Store::open(dir).map_err(|e| format!("reopen failed: {e}"))?;
    let actual = snapshot(&store);
    let ok = if same(&actual, &before) {
        true
    } else if crashed && acked < ops.len() {
        // the in-flight write may or may not have landed
        let mut after = Model::default();
        for op in &ops[..=acked] {
            after.apply(op);
        }
        same(&actual, &after)
    } else {
        false
    };
    if !ok {
        return Err(format!(
            "recovered state matches neither side of the in-flight write: keyed {:?} streams {:?}",
            actual.keyed, actual.streams
        ));
    }
    // a recovered store keeps working and its journals stay well-formed
    let chat_len = store.stream_len(Stream::Chat);
    store.append(Stream::Chat, "after recovery").map_err(|e| e.to_string())?;
    store.put(KeyedTable::Users, "after", "1").map_err(|e| e.to_string())?;
    drop(store);
    let again = Store::open(dir).map_err(|e| format!("second reopen failed: {e}"))?;
    if again.stream_len(Stream::Chat) != chat_len + 1 || again.get(KeyedTable::Users, "after").is_none() {
        return Err("writes after recovery were lost".into());
    }
    Ok(())
}
