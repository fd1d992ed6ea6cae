//! HTTP front end: `/gateway`, `/healthz` and static files.

use std::fs;
use std::io::{self, Read};
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use log::{debug, error, info, warn};
use socket2::{Domain, Protocol, Socket, Type};
use thiserror::Error;
use tiny_http::{Header, Request, Response, Server};

use crate::gateway::{Gateway, AMF_CONTENT_TYPE};

pub const GATEWAY_PATH: &str = "/gateway";
pub const HEALTH_PATH: &str = "/healthz";
pub const DEFAULT_MAX_BODY: usize = 16 << 20;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot listen on {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("static directory {path}: {source}")]
    StaticDir {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// `host:port`; port 0 picks a free one.
    pub listen: String,
    pub static_dir: Option<PathBuf>,
    pub workers: usize,
    pub max_body: usize,
}

impl ServerConfig {
    pub fn local(port: u16) -> Self {
        ServerConfig {
            listen: format!("127.0.0.1:{port}"),
            static_dir: None,
            workers: 8,
            max_body: DEFAULT_MAX_BODY,
        }
    }
}

struct Shared {
    gateway: Gateway,
    static_root: Option<PathBuf>,
    max_body: usize,
}

pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    stopping: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    /// Stops accepting work and waits for the workers to finish.
    pub fn shutdown(mut self) {
        self.stop();
    }

    /// Blocks until the workers exit, which only happens on shutdown.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    fn stop(&mut self) {
        self.stopping.store(true, Ordering::SeqCst);
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// tiny_http flushes headers and body as separate writes, so with Nagle on
/// any reply over its 1 KiB buffer stalls on the client's delayed ACK.
/// Accepted sockets inherit TCP_NODELAY from the listener.
fn bind_listener(listen: &str) -> io::Result<TcpListener> {
    let addr = listen
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no address"))?;
    let socket = Socket::new(Domain::for_address(addr), Type::STREAM, Some(Protocol::TCP))?;
    socket.set_reuse_address(true)?;
    socket.set_tcp_nodelay(true)?;
    socket.bind(&addr.into())?;
    socket.listen(1024)?;
    Ok(socket.into())
}

pub fn start(gateway: Gateway, config: ServerConfig) -> Result<ServerHandle, ServerError> {
    let static_root = match &config.static_dir {
        Some(dir) => Some(fs::canonicalize(dir).map_err(|source| ServerError::StaticDir {
            path: dir.clone(),
            source,
        })?),
        None => None,
    };
    let bind_err = |reason: String| ServerError::Bind {
        addr: config.listen.clone(),
        reason,
    };
    let listener = bind_listener(&config.listen).map_err(|e| bind_err(e.to_string()))?;
    let server = Server::from_listener(listener, None).map_err(|e| bind_err(e.to_string()))?;
    let addr = server.server_addr().to_ip().ok_or_else(|| ServerError::Bind {
        addr: config.listen.clone(),
        reason: "not an IP listener".into(),
    })?;
    let server = Arc::new(server);
    let stopping = Arc::new(AtomicBool::new(false));
    let shared = Arc::new(Shared {
        gateway,
        static_root,
        max_body: config.max_body,
    });
    let workers = (0..config.workers.max(1))
        .map(|i| {
            let server = Arc::clone(&server);
            let shared = Arc::clone(&shared);
            let stopping = Arc::clone(&stopping);
            thread::Builder::new()
                .name(format!("http-{i}"))
                .spawn(move || loop {
                    match server.recv() {
                        Ok(rq) => serve(&shared, rq),
                        Err(_) if stopping.load(Ordering::SeqCst) => break,
                        Err(e) => warn!("accept failed: {e}"),
                    }
                })
                .expect("spawn worker thread")
        })
        .collect();
    info!("listening on http://{addr}");
    Ok(ServerHandle {
        addr,
        server,
        stopping,
        workers,
    })
}

fn header(name: &str, value: &str) -> Header {
    Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("static header is valid")
}

fn reply(rq: Request, status: u16, content_type: Option<&str>, body: Vec<u8>) {
    let mut resp = Response::from_data(body).with_status_code(status);
    if let Some(ct) = content_type {
        resp.add_header(header("Content-Type", ct));
    }
    if status == 405 {
        let allow = if rq.url().starts_with(GATEWAY_PATH) { "POST" } else { "GET, HEAD" };
        resp.add_header(header("Allow", allow));
    }
    if let Err(e) = rq.respond(resp) {
        debug!("client went away: {e}");
    }
}

fn serve(shared: &Shared, mut rq: Request) {
    let method = rq.method().as_str().to_owned();
    let path = rq.url().split(['?', '#']).next().unwrap_or("/").to_owned();
    debug!("{method} {path}");
    if path == GATEWAY_PATH {
        if method != "POST" {
            return reply(rq, 405, None, Vec::new());
        }
        let mut body = Vec::new();
        let limit = shared.max_body as u64 + 1;
        if let Err(e) = rq.as_reader().take(limit).read_to_end(&mut body) {
            debug!("reading request body: {e}");
            return reply(rq, 400, None, Vec::new());
        }
        if body.len() > shared.max_body {
            return reply(rq, 413, None, Vec::new());
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| shared.gateway.handle_http(&method, &body)));
        match outcome {
            Ok(r) if r.status == 200 => reply(rq, 200, Some(AMF_CONTENT_TYPE), r.body),
            Ok(r) => reply(rq, r.status, None, r.body),
            Err(_) => {
                error!("gateway panicked");
                reply(rq, 500, None, Vec::new())
            }
        }
    } else if path == HEALTH_PATH {
        match method.as_str() {
            "GET" | "HEAD" => reply(rq, 200, Some("text/plain; charset=utf-8"), b"ok".to_vec()),
            _ => reply(rq, 405, None, Vec::new()),
        }
    } else {
        let Some(root) = &shared.static_root else {
            return reply(rq, 404, None, Vec::new());
        };
        if !matches!(method.as_str(), "GET" | "HEAD") {
            return reply(rq, 405, None, Vec::new());
        }
        match resolve_static(root, &path) {
            Some(file) => match fs::read(&file) {
                Ok(bytes) => reply(rq, 200, Some(content_type(&file)), bytes),
                Err(_) => reply(rq, 404, None, Vec::new()),
            },
            None => reply(rq, 404, None, Vec::new()),
        }
    }
}

/// Maps a URL path to a file under `root`, refusing anything that would
/// escape it. Directories map to their `index.html`.
pub fn resolve_static(root: &Path, url_path: &str) -> Option<PathBuf> {
    let rel = url_path.trim_start_matches('/');
    if rel.contains(['\\', '\0', ':']) {
        return None;
    }
    let rel = Path::new(rel);
    if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut candidate = root.join(rel);
    if candidate.is_dir() {
        candidate.push("index.html");
    }
    // symlinks must not lead outside the root either
    let real = fs::canonicalize(&candidate).ok()?;
    (real.starts_with(root) && real.is_file()).then_some(real)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "wasm" => "application/wasm",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}
