//! Authentication, layout and settings persistence, action log, chat and
//! the search entry point.

mod ops;

use std::collections::HashMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError};

use log::{debug, error};
use pbkdf2::pbkdf2_hmac;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::clock::Clock;
use crate::fault::{Fault, FaultCode};
use crate::search::{execute_sql, parse_sql, phrase_search, SearchError, SearchResult};
use crate::store::{KeyedTable, Store, StoreError, Stream};

pub use ops::Operation;

pub const SESSION_IDLE_MILLIS: i64 = 24 * 60 * 60 * 1000;
pub const DEFAULT_PBKDF2_ROUNDS: u32 = 100_000;
pub const MAX_LAYOUT_ENTRIES: usize = 256;
pub const MAX_CHAT_CHARS: usize = 1000;
pub const CHAT_POLL_CAP: usize = 100;
pub const ACTION_LOG_MAX_LIMIT: i64 = 500;

const SALT_LEN: usize = 16;
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub token: String,
    pub user_id: i64,
    pub username: String,
    pub login_seq: u64,
    pub last_active: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentState {
    pub component_id: String,
    pub x: i64,
    pub y: i64,
    pub visible: bool,
    pub z_order: i64,
    /// Kept in the order the client sent them.
    pub props: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiSettings {
    pub background_color: String,
    pub font_family: String,
    pub font_size: i64,
    pub theme: String,
}

impl Default for UiSettings {
    fn default() -> Self {
        UiSettings {
            background_color: "#FFFFFF".into(),
            font_family: "sans-serif".into(),
            font_size: 12,
            theme: "light".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEntry {
    /// Milliseconds since the epoch, UTC.
    pub ts: i64,
    pub user_id: i64,
    pub action: String,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub seq: u64,
    pub sender: String,
    pub ts: i64,
    pub text: String,
}

#[derive(Serialize, Deserialize)]
struct ChatLine {
    sender: String,
    ts: i64,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct UserRow {
    user_id: i64,
    salt: String,
    hash: String,
    rounds: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Phrase,
    Sql,
}

impl SearchMode {
    pub fn parse(mode: &str) -> Option<SearchMode> {
        match mode {
            "phrase" => Some(SearchMode::Phrase),
            "sql" => Some(SearchMode::Sql),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub pbkdf2_rounds: u32,
    pub session_idle_millis: i64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            pbkdf2_rounds: DEFAULT_PBKDF2_ROUNDS,
            session_idle_millis: SESSION_IDLE_MILLIS,
        }
    }
}

pub struct AppServices {
    store: Arc<Store>,
    clock: Arc<dyn Clock>,
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Session>>,
    /// Keeps journal timestamps non-decreasing if the wall clock steps back.
    last_log_ts: AtomicI64,
    last_chat_ts: AtomicI64,
}

fn store_fault(err: StoreError) -> Fault {
    error!("store failure: {err}");
    Fault::internal("storage failure")
}

fn corrupt_row(table: &str, err: serde_json::Error) -> Fault {
    error!("unreadable {table} row: {err}");
    Fault::internal("storage failure")
}

fn hash_password(password: &str, salt: &[u8], rounds: u32) -> [u8; HASH_LEN] {
    let mut out = [0u8; HASH_LEN];
    pbkdf2_hmac::<Sha256>(password.as_bytes(), salt, rounds, &mut out);
    out
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn new_token() -> String {
    let mut bytes = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

fn stamp(last: &AtomicI64, now: i64) -> i64 {
    last.fetch_max(now, Ordering::SeqCst).max(now)
}

pub fn valid_username(name: &str) -> bool {
    (3..=32).contains(&name.len()) && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

pub fn valid_color(color: &str) -> bool {
    color.len() == 7 && color.starts_with('#') && color[1..].bytes().all(|b| b.is_ascii_hexdigit())
}

impl ComponentState {
    pub fn check(&self) -> Result<(), String> {
        if self.component_id.is_empty() {
            return Err("component_id must be non-empty".into());
        }
        if self.x < 0 || self.y < 0 {
            return Err(format!("{}: position must be non-negative", self.component_id));
        }
        Ok(())
    }
}

pub fn check_layout(states: &[ComponentState]) -> Result<(), String> {
    if states.len() > MAX_LAYOUT_ENTRIES {
        return Err(format!("at most {MAX_LAYOUT_ENTRIES} states, got {}", states.len()));
    }
    let mut seen = std::collections::HashSet::new();
    for s in states {
        s.check()?;
        if !seen.insert(s.z_order) {
            return Err(format!("duplicate z_order {}", s.z_order));
        }
    }
    Ok(())
}

impl UiSettings {
    pub fn check(&self) -> Result<(), String> {
        if !valid_color(&self.background_color) {
            return Err(format!("background_color {:?} is not #RRGGBB", self.background_color));
        }
        if !(6..=72).contains(&self.font_size) {
            return Err(format!("font_size {} outside 6..=72", self.font_size));
        }
        Ok(())
    }
}

impl AppServices {
    pub fn new(store: Arc<Store>, clock: Arc<dyn Clock>, config: ServiceConfig) -> Self {
        AppServices {
            store,
            clock,
            config,
            sessions: Mutex::new(HashMap::new()),
            last_log_ts: AtomicI64::new(i64::MIN),
            last_chat_ts: AtomicI64::new(i64::MIN),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<String, Session>> {
        self.sessions.lock().unwrap_or_else(PoisonError::into_inner)
    }

    fn log_action(&self, user_id: i64, action: Operation, detail: Option<String>) -> Result<(), Fault> {
        let now = self.clock.now_millis();
        self.store
            .append_with(Stream::ActionLog, |_| {
                let entry = ActionEntry {
                    ts: stamp(&self.last_log_ts, now),
                    user_id,
                    action: action.target().to_owned(),
                    detail,
                };
                serde_json::to_string(&entry).expect("entry serializes")
            })
            .map(|_| ())
            .map_err(store_fault)
    }

    fn open_session(&self, user_id: i64, username: &str) -> Session {
        let now = self.clock.now_millis();
        let session = Session {
            token: new_token(),
            user_id,
            username: username.to_owned(),
            login_seq: self.store.stream_len(Stream::Chat),
            last_active: now,
        };
        let idle = self.config.session_idle_millis;
        let mut sessions = self.sessions();
        sessions.retain(|_, s| now - s.last_active <= idle);
        sessions.insert(session.token.clone(), session.clone());
        session
    }

    pub fn register_user(&self, username: &str, password: &str) -> Result<Session, Fault> {
        if !valid_username(username) {
            return Err(Fault::bad_arguments("username must be 3-32 characters of A-Z, a-z, 0-9, _"));
        }
        if password.chars().count() < 6 {
            return Err(Fault::bad_arguments("password must be at least 6 characters"));
        }
        let mut salt = [0u8; SALT_LEN];
        rand::rngs::OsRng.fill_bytes(&mut salt);
        let rounds = self.config.pbkdf2_rounds;
        let hash = hash_password(password, &salt, rounds);
        let mut user_id = 0;
        let inserted = self
            .store
            .put_if_absent(KeyedTable::Users, username, |count| {
                user_id = count as i64 + 1;
                let row = UserRow {
                    user_id,
                    salt: hex::encode(salt),
                    hash: hex::encode(hash),
                    rounds,
                };
                serde_json::to_string(&row).expect("row serializes")
            })
            .map_err(store_fault)?;
        if !inserted {
            return Err(Fault::new(FaultCode::DuplicateUser, format!("user {username} already exists")));
        }
        debug!("registered {username} as user {user_id}");
        let session = self.open_session(user_id, username);
        self.log_action(user_id, Operation::Register, Some(username.to_owned()))?;
        Ok(session)
    }

    pub fn login(&self, username: &str, password: &str) -> Result<Session, Fault> {
        let invalid = || Fault::new(FaultCode::AuthInvalid, "unknown user or wrong password");
        let Some(raw) = self.store.get(KeyedTable::Users, username) else {
            // same cost as a real check so timing does not reveal the user set
            hash_password(password, &[0; SALT_LEN], self.config.pbkdf2_rounds);
            return Err(invalid());
        };
        let row: UserRow = serde_json::from_str(&raw).map_err(|e| corrupt_row("users", e))?;
        let salt = hex::decode(&row.salt).map_err(|_| Fault::internal("storage failure"))?;
        let expected = hex::decode(&row.hash).map_err(|_| Fault::internal("storage failure"))?;
        if !constant_time_eq(&hash_password(password, &salt, row.rounds), &expected) {
            return Err(invalid());
        }
        let session = self.open_session(row.user_id, username);
        self.log_action(row.user_id, Operation::Login, Some(username.to_owned()))?;
        Ok(session)
    }

    /// Checks the token and refreshes its idle timer.
    pub fn validate(&self, token: &str) -> Result<Session, Fault> {
        let now = self.clock.now_millis();
        let mut sessions = self.sessions();
        let Some(session) = sessions.get_mut(token) else {
            return Err(Fault::auth_required());
        };
        if now - session.last_active > self.config.session_idle_millis {
            sessions.remove(token);
            return Err(Fault::auth_required());
        }
        session.last_active = session.last_active.max(now);
        Ok(session.clone())
    }

    pub fn logout(&self, token: &str) -> Result<(), Fault> {
        let live = self.validate(token).ok();
        if let Some(session) = live {
            self.sessions().remove(token);
            self.log_action(session.user_id, Operation::Logout, None)?;
        }
        Ok(())
    }

    pub fn save_component_states(&self, token: &str, states: &[ComponentState]) -> Result<(), Fault> {
        let session = self.validate(token)?;
        check_layout(states).map_err(Fault::bad_arguments)?;
        let json = serde_json::to_string(states).expect("layout serializes");
        self.store
            .put(KeyedTable::Layouts, &session.user_id.to_string(), &json)
            .map_err(store_fault)?;
        self.log_action(session.user_id, Operation::SaveStates, Some(format!("{} states", states.len())))
    }

    pub fn load_component_states(&self, token: &str) -> Result<Vec<ComponentState>, Fault> {
        let session = self.validate(token)?;
        let states = match self.store.get(KeyedTable::Layouts, &session.user_id.to_string()) {
            Some(raw) => serde_json::from_str(&raw).map_err(|e| corrupt_row("layouts", e))?,
            None => Vec::new(),
        };
        self.log_action(session.user_id, Operation::LoadStates, None)?;
        Ok(states)
    }

    pub fn save_ui_settings(&self, token: &str, settings: &UiSettings) -> Result<(), Fault> {
        let session = self.validate(token)?;
        settings.check().map_err(Fault::bad_arguments)?;
        let json = serde_json::to_string(settings).expect("settings serialize");
        self.store
            .put(KeyedTable::Settings, &session.user_id.to_string(), &json)
            .map_err(store_fault)?;
        self.log_action(session.user_id, Operation::SaveSettings, None)
    }

    pub fn load_ui_settings(&self, token: &str) -> Result<UiSettings, Fault> {
        let session = self.validate(token)?;
        let settings = match self.store.get(KeyedTable::Settings, &session.user_id.to_string()) {
            Some(raw) => serde_json::from_str(&raw).map_err(|e| corrupt_row("settings", e))?,
            None => UiSettings::default(),
        };
        self.log_action(session.user_id, Operation::LoadSettings, None)?;
        Ok(settings)
    }

    /// The caller's own entries, newest first. The call itself is logged
    /// after the read, so it shows up in the next call.
    pub fn get_action_log(&self, token: &str, limit: i64) -> Result<Vec<ActionEntry>, Fault> {
        let session = self.validate(token)?;
        if !(1..=ACTION_LOG_MAX_LIMIT).contains(&limit) {
            return Err(Fault::bad_arguments(format!("limit must be 1-{ACTION_LOG_MAX_LIMIT}, got {limit}")));
        }
        let mut entries = Vec::new();
        let mut bad = None;
        self.store
            .scan_rev_filtered(Stream::ActionLog, limit as usize, |raw| {
                match serde_json::from_str::<ActionEntry>(raw) {
                    Ok(e) if e.user_id == session.user_id => {
                        entries.push(e);
                        true
                    }
                    Ok(_) => false,
                    Err(e) => {
                        bad.get_or_insert(e);
                        false
                    }
                }
            });
        if let Some(e) = bad {
            return Err(corrupt_row("action_log", e));
        }
        self.log_action(session.user_id, Operation::GetLog, Some(limit.to_string()))?;
        Ok(entries)
    }

    pub fn send_chat(&self, token: &str, text: &str) -> Result<ChatMessage, Fault> {
        let session = self.validate(token)?;
        let chars = text.chars().count();
        if !(1..=MAX_CHAT_CHARS).contains(&chars) {
            return Err(Fault::bad_arguments(format!("text must be 1-{MAX_CHAT_CHARS} characters, got {chars}")));
        }
        let now = self.clock.now_millis();
        let mut ts = now;
        let seq = self
            .store
            .append_with(Stream::Chat, |_| {
                ts = stamp(&self.last_chat_ts, now);
                let line = ChatLine {
                    sender: session.username.clone(),
                    ts,
                    text: text.to_owned(),
                };
                serde_json::to_string(&line).expect("chat line serializes")
            })
            .map_err(store_fault)?;
        self.log_action(session.user_id, Operation::SendChat, Some(format!("seq {seq}")))?;
        Ok(ChatMessage {
            seq,
            sender: session.username,
            ts,
            text: text.to_owned(),
        })
    }

    /// Messages with seq above both the cursor and the session's login
    /// point, ascending, at most [`CHAT_POLL_CAP`].
    pub fn poll_chat(&self, token: &str, after_seq: i64) -> Result<Vec<ChatMessage>, Fault> {
        let session = self.validate(token)?;
        if after_seq < 0 {
            return Err(Fault::bad_arguments("after_seq must be non-negative"));
        }
        let from = (after_seq as u64).max(session.login_seq);
        let messages = self
            .store
            .scan(Stream::Chat, from, CHAT_POLL_CAP)
            .into_iter()
            .map(|(seq, raw)| {
                let line: ChatLine = serde_json::from_str(&raw).map_err(|e| corrupt_row("chat", e))?;
                Ok(ChatMessage {
                    seq,
                    sender: line.sender,
                    ts: line.ts,
                    text: line.text,
                })
            })
            .collect::<Result<Vec<_>, Fault>>()?;
        self.log_action(session.user_id, Operation::PollChat, None)?;
        Ok(messages)
    }

    pub fn search(&self, token: &str, mode: &str, query: &str) -> Result<SearchResult, Fault> {
        let session = self.validate(token)?;
        let mode = SearchMode::parse(mode)
            .ok_or_else(|| Fault::bad_arguments(format!("mode must be \"phrase\" or \"sql\", got {mode:?}")))?;
        let records = self.store.records();
        let result = match mode {
            SearchMode::Phrase => phrase_search(query, &records),
            SearchMode::Sql => parse_sql(query)
                .and_then(|ast| execute_sql(&ast, &records))
                .map_err(search_fault)?,
        };
        self.log_action(session.user_id, Operation::Search, Some(query.to_owned()))?;
        Ok(result)
    }
}

fn search_fault(err: SearchError) -> Fault {
    use flexgui_amf::AmfValue;
    let message = err.to_string();
    match err {
        SearchError::Parse { position, .. } => Fault::new(FaultCode::QueryParse, message)
            .with_details(AmfValue::object([("position", AmfValue::from_i64(position as i64))])),
        SearchError::Type(_) => Fault::new(FaultCode::QueryParse, message),
        SearchError::Forbidden(_) => Fault::new(FaultCode::QueryForbidden, message),
    }
}
