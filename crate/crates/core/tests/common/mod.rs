//! Helpers shared by the integration test binaries.
#![allow(dead_code)]

pub mod crash;
pub mod sql_oracle;

use std::io::Read;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use flexgui_amf::{decode_packet, encode_packet, AmfMessage, AmfPacket, AmfValue};
use flexgui_core::clock::ManualClock;
use flexgui_core::fault::Fault;
use flexgui_core::gateway::{Gateway, AMF_CONTENT_TYPE};
use flexgui_core::server::{self, ServerConfig, ServerHandle};
use flexgui_core::services::ServiceConfig;
use flexgui_core::store::Store;
use flexgui_core::{build_gateway, AppConfig};

pub const SEED_CSV: &str = include_str!("../../fixtures/records.csv");
pub const START_MILLIS: i64 = 1_700_000_000_000;

pub fn fast_services() -> ServiceConfig {
    ServiceConfig {
        pbkdf2_rounds: 1000,
        ..ServiceConfig::default()
    }
}

/// A server on a free local port over a temporary data directory.
pub struct TestApp {
    pub dir: tempfile::TempDir,
    pub clock: ManualClock,
    pub gateway: Gateway,
    pub server: ServerHandle,
    agent: ureq::Agent,
}

pub struct HttpResult {
    pub status: u16,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl TestApp {
    pub fn start() -> TestApp {
        Self::start_with(|_| {})
    }

    pub fn start_with(prepare: impl FnOnce(&Path)) -> TestApp {
        let dir = tempfile::tempdir().unwrap();
        prepare(dir.path());
        let clock = ManualClock::new(START_MILLIS);
        let mut config = AppConfig::new(dir.path());
        config.services = fast_services();
        let gateway = build_gateway(&config, Arc::new(clock.clone())).unwrap();
        let mut server_config = ServerConfig::local(0);
        let static_dir = dir.path().join("static");
        if static_dir.is_dir() {
            server_config.static_dir = Some(static_dir);
        }
        let server = server::start(gateway.clone(), server_config).unwrap();
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build();
        TestApp {
            dir,
            clock,
            gateway,
            server,
            agent,
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        self.gateway.services().store()
    }

    pub fn request(&self, method: &str, path: &str, body: &[u8]) -> HttpResult {
        let req = self
            .agent
            .request(method, &self.server.url(path))
            .set("Content-Type", AMF_CONTENT_TYPE);
        let resp = match req.send_bytes(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => panic!("{method} {path}: transport error {e}"),
        };
        let status = resp.status();
        let content_type = resp.header("Content-Type").map(str::to_owned);
        let mut body = Vec::new();
        resp.into_reader().read_to_end(&mut body).unwrap();
        HttpResult {
            status,
            content_type,
            body,
        }
    }

    pub fn post(&self, body: &[u8]) -> HttpResult {
        self.request("POST", "/gateway", body)
    }

    /// Sends a packet and decodes the reply; panics unless HTTP 200.
    pub fn send(&self, packet: &AmfPacket) -> AmfPacket {
        let r = self.post(&encode_packet(packet).unwrap());
        assert_eq!(r.status, 200);
        assert_eq!(r.content_type.as_deref(), Some(AMF_CONTENT_TYPE));
        decode_packet(&r.body).unwrap()
    }

    /// One remote call over HTTP.
    pub fn call(&self, target: &str, args: Vec<AmfValue>) -> Result<AmfValue, Fault> {
        let reply = self.send(&AmfPacket::with_messages(vec![AmfMessage::new(
            target,
            "/1",
            AmfValue::dense(args),
        )]));
        unwrap_reply(&reply, "/1")
    }

    pub fn register(&self, user: &str, password: &str) -> String {
        let s = self
            .call("auth.register", vec![user.into(), password.into()])
            .unwrap();
        s.get("token").and_then(AmfValue::as_str).unwrap().to_owned()
    }

    pub fn login(&self, user: &str, password: &str) -> String {
        let s = self.call("auth.login", vec![user.into(), password.into()]).unwrap();
        s.get("token").and_then(AmfValue::as_str).unwrap().to_owned()
    }
}

/// The single reply message as a result or a fault.
pub fn unwrap_reply(reply: &AmfPacket, response_uri: &str) -> Result<AmfValue, Fault> {
    assert_eq!(reply.messages.len(), 1);
    let m = &reply.messages[0];
    assert_eq!(m.response_uri, "");
    if m.target_uri == format!("{response_uri}/onResult") {
        Ok(m.body.clone())
    } else {
        assert_eq!(m.target_uri, format!("{response_uri}/onStatus"));
        Err(Fault::from_value(&m.body).unwrap_or_else(|| panic!("malformed fault {:?}", m.body)))
    }
}

/// Reads every regular file under `dir`, recursively.
pub fn all_file_bytes(dir: &Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.push((path, bytes));
            }
        }
    }
    out
}

pub fn contains_bytes(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}
