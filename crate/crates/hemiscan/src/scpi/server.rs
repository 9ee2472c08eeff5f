//! Line-oriented TCP front end for the emulated analyzer. One command
//! session is served at a time; further connections wait in the OS
//! accept queue, which matches the one-instrument-one-controller model
//! of the measurement loop.

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::analyzer::{handle_line, AnalyzerState, LinkBackend};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
}

pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    active: Arc<Mutex<Option<TcpStream>>>,
    join: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    fn signal_stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Drop any in-flight session, then unblock the accept call.
        if let Ok(mut guard) = self.active.lock() {
            if let Some(stream) = guard.take() {
                let _ = stream.shutdown(Shutdown::Both);
            }
        }
        let _ = TcpStream::connect(self.addr);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }

    /// Stops the accept loop, terminating any in-flight session.
    pub fn stop(mut self) {
        self.signal_stop();
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.signal_stop();
    }
}

fn serve_connection(
    stream: TcpStream,
    state: &mut AnalyzerState,
    backend: &dyn LinkBackend,
) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if let Some(reply) = handle_line(&line, state, backend) {
            writer.write_all(reply.as_bytes())?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
    }
    Ok(())
}

/// Binds and serves in a background thread. The analyzer state persists
/// across connections; a dropped connection leaves it consistent because
/// every command is handled atomically.
pub fn serve(
    bind_addr: &str,
    state: AnalyzerState,
    backend: Box<dyn LinkBackend>,
) -> Result<ServerHandle, ServeError> {
    let listener = TcpListener::bind(bind_addr).map_err(|source| ServeError::Bind {
        addr: bind_addr.to_string(),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind {
        addr: bind_addr.to_string(),
        source,
    })?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let active: Arc<Mutex<Option<TcpStream>>> = Arc::new(Mutex::new(None));
    let flag = shutdown.clone();
    let slot = active.clone();
    let join = std::thread::spawn(move || {
        let mut state = state;
        for stream in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            match stream {
                Ok(stream) => {
                    if let Ok(clone) = stream.try_clone() {
                        if let Ok(mut guard) = slot.lock() {
                            *guard = Some(clone);
                        }
                    }
                    let _ = serve_connection(stream, &mut state, backend.as_ref());
                    if let Ok(mut guard) = slot.lock() {
                        *guard = None;
                    }
                }
                Err(_) => break,
            }
        }
    });
    Ok(ServerHandle {
        addr,
        shutdown,
        active,
        join: Some(join),
    })
}
