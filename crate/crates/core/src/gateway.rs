//! Routes request messages to service operations and correlates replies.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use flexgui_amf::{decode_packet, encode_packet, AmfMessage, AmfPacket, AmfValue};
use log::{debug, error, warn};
use thiserror::Error;

use crate::fault::{Fault, FaultCode};
use crate::services::{AppServices, Operation};

pub const AMF_CONTENT_TYPE: &str = "application/x-amf";
pub const ON_RESULT: &str = "/onResult";
pub const ON_STATUS: &str = "/onStatus";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("route {0} is already registered")]
    DuplicateRoute(String),
    #[error("route {target}: {operation} takes {expected} arguments, not {got}")]
    Arity {
        target: String,
        operation: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid route name {0:?}")]
    BadTarget(String),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub operation: Operation,
    pub arity: usize,
}

/// Target name to operation. Immutable once the server starts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceRegistry {
    routes: BTreeMap<String, Route>,
}

impl ServiceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every operation under its standard target.
    pub fn with_defaults() -> Self {
        let mut reg = Self::new();
        for op in Operation::ALL {
            reg.register_route(op.target(), op, op.arity())
                .expect("default routes are consistent");
        }
        reg
    }

    pub fn register_route(&mut self, name: &str, operation: Operation, arity: usize) -> Result<(), ConfigError> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(ConfigError::BadTarget(name.to_owned()));
        }
        if arity != operation.arity() {
            return Err(ConfigError::Arity {
                target: name.to_owned(),
                operation: operation.name(),
                expected: operation.arity(),
                got: arity,
            });
        }
        if self.routes.contains_key(name) {
            return Err(ConfigError::DuplicateRoute(name.to_owned()));
        }
        self.routes.insert(name.to_owned(), Route { operation, arity });
        Ok(())
    }

    pub fn resolve(&self, target: &str) -> Option<Route> {
        self.routes.get(target).copied()
    }

    pub fn routes(&self) -> impl Iterator<Item = (&str, Route)> {
        self.routes.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// One `target=operation` per line; blank lines and `#` comments ignored.
    pub fn parse_routes(text: &str) -> Result<Self, ConfigError> {
        let mut reg = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |reason: String| ConfigError::Syntax { line: line_no, reason };
            let (target, op_name) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected target=operation, got {line:?}")))?;
            let (target, op_name) = (target.trim(), op_name.trim());
            let op = Operation::from_name(op_name).ok_or_else(|| syntax(format!("unknown operation {op_name:?}")))?;
            reg.register_route(target, op, op.arity()).map_err(|e| syntax(e.to_string()))?;
        }
        Ok(reg)
    }

    /// Reads the routes file, or the built-in routes if it does not exist.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse_routes(&text),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::with_defaults()),
            Err(source) => Err(ConfigError::Io {
                path: path.to_owned(),
                source,
            }),
        }
    }

    /// The built-in routes in routes-file syntax.
    pub fn default_routes_text() -> String {
        Operation::ALL
            .iter()
            .map(|op| format!("{}={}\n", op.target(), op.name()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Clone)]
pub struct Gateway {
    registry: Arc<ServiceRegistry>,
    services: Arc<AppServices>,
}

impl Gateway {
    pub fn new(registry: ServiceRegistry, services: Arc<AppServices>) -> Self {
        Gateway {
            registry: Arc::new(registry),
            services,
        }
    }

    pub fn registry(&self) -> &ServiceRegistry {
        &self.registry
    }

    pub fn services(&self) -> &Arc<AppServices> {
        &self.services
    }

    fn call(&self, msg: &AmfMessage) -> Result<AmfValue, Fault> {
        let route = self.registry.resolve(&msg.target_uri).ok_or_else(|| {
            Fault::new(FaultCode::NoSuchTarget, format!("no such target {:?}", msg.target_uri))
        })?;
        let args = match &msg.body {
            AmfValue::Array(a) if a.assoc.is_empty() => &a.dense,
            _ => return Err(Fault::bad_arguments("body must be a dense array of arguments")),
        };
        if args.len() != route.arity {
            return Err(Fault::bad_arguments(format!("want {} got {}", route.arity, args.len())));
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| route.operation.invoke(&self.services, args)));
        let value = match outcome {
            Ok(result) => result?,
            Err(_) => {
                error!("handler for {} panicked", msg.target_uri);
                return Err(Fault::internal("handler failed"));
            }
        };
        value.validate().map_err(|e| {
            error!("{} produced an unencodable result: {e}", msg.target_uri);
            Fault::internal("result cannot be encoded")
        })?;
        Ok(value)
    }

    /// One reply per request message, in order. Headers are not interpreted.
    pub fn dispatch(&self, request: &AmfPacket) -> AmfPacket {
        let messages = request
            .messages
            .iter()
            .map(|msg| match self.call(msg) {
                Ok(value) => AmfMessage::new(format!("{}{ON_RESULT}", msg.response_uri), "", value),
                Err(fault) => {
                    debug!("{} -> {fault}", msg.target_uri);
                    AmfMessage::new(format!("{}{ON_STATUS}", msg.response_uri), "", fault.to_value())
                }
            })
            .collect();
        AmfPacket::with_messages(messages)
    }

    /// POST body in, status and AMF body out. Undecodable input is a 400
    /// with an empty body.
    pub fn handle_http(&self, method: &str, body: &[u8]) -> HttpReply {
        if method != "POST" {
            return HttpReply {
                status: 405,
                body: Vec::new(),
            };
        }
        let request = match decode_packet(body) {
            Ok(p) => p,
            Err(e) => {
                debug!("rejecting request: {e}");
                return HttpReply {
                    status: 400,
                    body: Vec::new(),
                };
            }
        };
        let response = self.dispatch(&request);
        match encode_packet(&response) {
            Ok(bytes) => HttpReply {
                status: 200,
                body: bytes,
            },
            Err(e) => {
                warn!("cannot encode response: {e}");
                HttpReply {
                    status: 500,
                    body: Vec::new(),
                }
            }
        }
    }
}
