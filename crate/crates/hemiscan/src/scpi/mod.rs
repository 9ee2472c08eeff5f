//! SCPI surface of the emulated receiver chain: the command grammar, the
//! analyzer state machine, a single-session TCP server, and the
//! measurement client used by the acquisition loop.

pub mod analyzer;
pub mod client;
pub mod grammar;
pub mod server;

pub use analyzer::{
    handle, handle_line, quantize_dbm, AnalyzerState, Detector, LinkBackend, PatternBackend,
    ReflectorBackend,
};
pub use client::{EmbeddedTransport, InstrumentClient, ScpiTransport, TcpTransport, TransportError};
pub use grammar::{format_scpi, parse_scpi, CommandId, ParseError, ScpiArg, ScpiCommand};
pub use server::{serve, ServeError, ServerHandle};
