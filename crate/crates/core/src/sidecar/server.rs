//! Unix-socket inference server.
//!
//! Each connection gets its own thread and scratch buffers; after the first
//! request of the largest K seen, the request path does not allocate. The
//! model is an atomically published snapshot, so a swap never blocks or
//! drops a request in flight.
//!
//! A connection whose first four bytes are `SWAP` is a control connection:
//! every line `SWAP <path>\n` loads a model file and publishes it, and is
//! answered with `OK\n` or `ERR <reason>\n`.

use std::io::{self, BufRead, BufReader, ErrorKind, Read, Write};
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use arc_swap::ArcSwapOption;

use super::protocol::{
    decode_request_header, decode_request_into, encode_response, EvictResponse, Status, MAX_REQUEST_LEN,
    REQUEST_HEADER_LEN,
};
use crate::dqn::{load_model, select_mask, DuelingModel, Workspace};
use crate::features::{N_FEATURES, SIZE_FEATURE};

const CONTROL_PREFIX: &[u8; 4] = b"SWAP";

/// Counters shared by all connections.
#[derive(Debug, Default)]
pub struct ServerStats {
    pub requests: AtomicU64,
    pub bad_requests: AtomicU64,
    pub unavailable: AtomicU64,
    pub swaps: AtomicU64,
}

struct Shared {
    model: ArcSwapOption<DuelingModel<f32>>,
    stats: ServerStats,
    shutdown: AtomicBool,
}

pub struct Server {
    listener: UnixListener,
    path: PathBuf,
    shared: Arc<Shared>,
}

impl Server {
    /// Binds `path`. A stale socket file nobody listens on is replaced.
    pub fn bind(path: impl AsRef<Path>, model: Option<DuelingModel<f32>>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if path.exists() {
            if UnixStream::connect(&path).is_ok() {
                return Err(io::Error::new(ErrorKind::AddrInUse, format!("{} is in use", path.display())));
            }
            std::fs::remove_file(&path)?;
        }
        let listener = UnixListener::bind(&path)?;
        let shared = Arc::new(Shared {
            model: ArcSwapOption::from(model.map(Arc::new)),
            stats: ServerStats::default(),
            shutdown: AtomicBool::new(false),
        });
        Ok(Self { listener, path, shared })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Serves until the process exits.
    pub fn run(self) -> io::Result<()> {
        accept_loop(&self.listener, &self.shared);
        Ok(())
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> ServerHandle {
        let shared = Arc::clone(&self.shared);
        let path = self.path.clone();
        let thread = std::thread::spawn(move || {
            accept_loop(&self.listener, &self.shared);
        });
        ServerHandle { shared, path, thread: Some(thread) }
    }
}

pub struct ServerHandle {
    shared: Arc<Shared>,
    path: PathBuf,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Publishes a new model (or none) to every connection.
    pub fn swap(&self, model: Option<DuelingModel<f32>>) {
        self.shared.model.store(model.map(Arc::new));
        self.shared.stats.swaps.fetch_add(1, Ordering::Relaxed);
    }

    pub fn stats(&self) -> &ServerStats {
        &self.shared.stats
    }

    /// Stops accepting connections and removes the socket file. Open
    /// connections finish when their clients hang up.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(t) = self.thread.take() {
            self.shared.shutdown.store(true, Ordering::SeqCst);
            let _ = UnixStream::connect(&self.path);
            let _ = t.join();
            let _ = std::fs::remove_file(&self.path);
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: &UnixListener, shared: &Arc<Shared>) {
    for stream in listener.incoming() {
        if shared.shutdown.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let shared = Arc::clone(shared);
        std::thread::spawn(move || {
            let _ = handle_connection(stream, &shared);
        });
    }
}

struct Scratch {
    buf: Vec<u8>,
    rows: Vec<f32>,
    sizes: Vec<u64>,
    ws: Workspace<f32>,
}

fn handle_connection(mut stream: UnixStream, shared: &Shared) -> io::Result<()> {
    let mut s = Scratch {
        buf: vec![0u8; MAX_REQUEST_LEN],
        rows: Vec::with_capacity(MAX_REQUEST_LEN / 4),
        sizes: Vec::with_capacity(64),
        ws: Workspace::default(),
    };
    loop {
        if !read_full(&mut stream, &mut s.buf[..4])? {
            return Ok(());
        }
        if &s.buf[..4] == CONTROL_PREFIX {
            return handle_control(stream, shared);
        }
        if !read_full(&mut stream, &mut s.buf[4..REQUEST_HEADER_LEN])? {
            return Ok(());
        }
        shared.stats.requests.fetch_add(1, Ordering::Relaxed);
        let header = match decode_request_header(&s.buf[..REQUEST_HEADER_LEN]) {
            Ok(h) => h,
            Err(_) => {
                // framing is lost, so answer once and hang up
                shared.stats.bad_requests.fetch_add(1, Ordering::Relaxed);
                stream.write_all(&encode_response(&EvictResponse { status: Status::BadRequest, mask: 0 }))?;
                return Ok(());
            }
        };
        let len = header.message_len();
        if !read_full(&mut stream, &mut s.buf[REQUEST_HEADER_LEN..len])? {
            return Ok(());
        }
        let resp = evaluate(shared, &mut s, len);
        stream.write_all(&encode_response(&resp))?;
    }
}

fn evaluate(shared: &Shared, s: &mut Scratch, len: usize) -> EvictResponse {
    let header = match decode_request_into(&s.buf[..len], &mut s.rows) {
        Ok(h) => h,
        Err(_) => {
            shared.stats.bad_requests.fetch_add(1, Ordering::Relaxed);
            return EvictResponse { status: Status::BadRequest, mask: 0 };
        }
    };
    let guard = shared.model.load();
    let Some(model) = guard.as_ref() else {
        shared.stats.unavailable.fetch_add(1, Ordering::Relaxed);
        return EvictResponse { status: Status::ModelUnavailable, mask: 0 };
    };
    if model.forward_into(&s.rows, &mut s.ws).is_err() {
        shared.stats.bad_requests.fetch_add(1, Ordering::Relaxed);
        return EvictResponse { status: Status::BadRequest, mask: 0 };
    }
    s.sizes.clear();
    s.sizes.extend(
        s.rows
            .chunks_exact(N_FEATURES)
            .map(|r| model.norm.denormalize_one(SIZE_FEATURE, r[SIZE_FEATURE]).round() as u64),
    );
    EvictResponse { status: Status::Ok, mask: select_mask(&s.ws.q, &s.sizes, header.needed) }
}

fn handle_control(stream: UnixStream, shared: &Shared) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = String::from("SWAP");
    loop {
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let reply = match line.strip_prefix("SWAP ").map(str::trim_end) {
            Some(path) if !path.is_empty() => match std::fs::File::open(path).map_err(Into::into).and_then(load_model) {
                Ok(model) => {
                    shared.model.store(Some(Arc::new(model)));
                    shared.stats.swaps.fetch_add(1, Ordering::Relaxed);
                    "OK\n".to_string()
                }
                Err(e) => format!("ERR {e}\n"),
            },
            _ => format!("ERR expected `SWAP <path>`, got {:?}\n", line.trim_end()),
        };
        writer.write_all(reply.as_bytes())?;
        line.clear();
    }
}

/// Fills `buf`; `Ok(false)` on a clean end of stream before the first byte.
fn read_full(stream: &mut UnixStream, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match stream.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Sends `SWAP <model>` on a fresh control connection and waits for the
/// reply.
pub fn request_swap(socket: impl AsRef<Path>, model: impl AsRef<Path>) -> io::Result<Result<(), String>> {
    let mut stream = UnixStream::connect(socket)?;
    writeln!(stream, "SWAP {}", model.as_ref().display())?;
    let mut reply = String::new();
    BufReader::new(stream).read_line(&mut reply)?;
    Ok(match reply.trim_end() {
        "OK" => Ok(()),
        other => Err(other.strip_prefix("ERR ").unwrap_or(other).to_string()),
    })
}
