//! Measurement-side SCPI client. Generic over the transport so the same
//! acquisition code drives a TCP instrument or an in-process emulator;
//! both see the identical command stream and therefore produce identical
//! values for identical seeds.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use thiserror::Error;

use crate::se3::SphericalCoord;

use super::analyzer::{handle_line, AnalyzerState, LinkBackend};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("timed out waiting for a response")]
    Timeout,
    #[error("connection closed mid-exchange")]
    Closed,
    #[error("instrument error response: {0}")]
    Instrument(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl TransportError {
    /// Transport-level faults are retryable; instrument errors are not.
    pub fn retryable(&self) -> bool {
        !matches!(self, TransportError::Instrument(_))
    }
}

pub trait ScpiTransport {
    /// Sends a setter/action line; no response is expected.
    fn send(&mut self, line: &str) -> Result<(), TransportError>;
    /// Sends a query line and reads one response line.
    fn query(&mut self, line: &str) -> Result<String, TransportError>;
}

/// TCP transport with line framing and a read timeout.
pub struct TcpTransport {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl TcpTransport {
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self, TransportError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        let writer = stream.try_clone()?;
        Ok(Self {
            writer,
            reader: BufReader::new(stream),
        })
    }
}

impl ScpiTransport for TcpTransport {
    fn send(&mut self, line: &str) -> Result<(), TransportError> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    fn query(&mut self, line: &str) -> Result<String, TransportError> {
        self.send(line)?;
        let mut reply = String::new();
        let n = self.reader.read_line(&mut reply).map_err(|e| {
            if e.kind() == std::io::ErrorKind::WouldBlock || e.kind() == std::io::ErrorKind::TimedOut
            {
                TransportError::Timeout
            } else {
                TransportError::Io(e)
            }
        })?;
        if n == 0 {
            return Err(TransportError::Closed);
        }
        Ok(reply.trim_end_matches(['\r', '\n']).to_string())
    }
}

/// In-process transport: the handler runs directly and replies queue up
/// exactly as they would on the wire.
pub struct EmbeddedTransport {
    state: AnalyzerState,
    backend: Box<dyn LinkBackend>,
    pending: VecDeque<String>,
}

impl EmbeddedTransport {
    pub fn new(state: AnalyzerState, backend: Box<dyn LinkBackend>) -> Self {
        Self {
            state,
            backend,
            pending: VecDeque::new(),
        }
    }
}

impl ScpiTransport for EmbeddedTransport {
    fn send(&mut self, line: &str) -> Result<(), TransportError> {
        if let Some(reply) = handle_line(line, &mut self.state, self.backend.as_ref()) {
            self.pending.push_back(reply);
        }
        Ok(())
    }

    fn query(&mut self, line: &str) -> Result<String, TransportError> {
        self.send(line)?;
        self.pending.pop_front().ok_or(TransportError::Timeout)
    }
}

/// Acquisition-facing instrument client: configuration plus the per-pose
/// measure cycle of the scan loop.
pub struct InstrumentClient<T: ScpiTransport> {
    transport: T,
    center_hz: f64,
    span_hz: f64,
    trace_bins: usize,
}

impl<T: ScpiTransport> InstrumentClient<T> {
    pub fn new(transport: T, trace_bins: usize) -> Self {
        Self {
            transport,
            center_hz: 60e9,
            span_hz: 2e9,
            trace_bins,
        }
    }

    pub fn identify(&mut self) -> Result<String, TransportError> {
        let reply = self.transport.query("*IDN?")?;
        check_instrument_error(&reply)?;
        Ok(reply)
    }

    /// Fixed acquisition setup sent once per scan: centre, span, RBW/VBW,
    /// max-hold detector.
    pub fn configure(
        &mut self,
        center_hz: f64,
        span_hz: f64,
        rbw_hz: f64,
        vbw_hz: f64,
    ) -> Result<(), TransportError> {
        self.transport.send("*RST")?;
        self.transport
            .send(&format!(":FREQ:CENT {}", super::grammar::format_nrf(center_hz)))?;
        self.transport
            .send(&format!(":FREQ:SPAN {}", super::grammar::format_nrf(span_hz)))?;
        self.transport
            .send(&format!(":BAND {}", super::grammar::format_nrf(rbw_hz)))?;
        self.transport
            .send(&format!(":BAND:VID {}", super::grammar::format_nrf(vbw_hz)))?;
        self.transport.send(":DET MAXH")?;
        self.center_hz = center_hz;
        self.span_hz = span_hz;
        Ok(())
    }

    fn bin_nearest(&self, fc_hz: f64) -> usize {
        if self.span_hz == 0.0 || self.trace_bins < 2 {
            return self.trace_bins / 2;
        }
        let start = self.center_hz - self.span_hz / 2.0;
        let step = self.span_hz / (self.trace_bins - 1) as f64;
        (((fc_hz - start) / step).round().max(0.0) as usize).min(self.trace_bins - 1)
    }

    /// One pose measurement: set the simulated pose (which resets the
    /// trace), trigger once per sweep interval across the dwell, fetch
    /// the trace, and return the bin nearest the operating frequency.
    pub fn measure(
        &mut self,
        pose: SphericalCoord,
        fc_hz: f64,
        dwell_s: f64,
        sweep_rate_hz: f64,
    ) -> Result<f64, TransportError> {
        self.transport.send(&format!(
            ":SYST:POSE {},{},{}",
            super::grammar::format_nrf(pose.phi_deg()),
            super::grammar::format_nrf(pose.theta_deg()),
            super::grammar::format_nrf(pose.radius())
        ))?;
        let sweeps = ((dwell_s * sweep_rate_hz).ceil() as u64).max(1);
        for _ in 0..sweeps {
            self.transport.send(":INIT:IMM")?;
        }
        let reply = self.transport.query(":TRAC:DATA? TRACE1")?;
        check_instrument_error(&reply)?;
        let values: Vec<f64> = reply
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| TransportError::Malformed(format!("trace value `{v}`")))
            })
            .collect::<Result<_, _>>()?;
        if values.len() != self.trace_bins {
            return Err(TransportError::Malformed(format!(
                "trace length {} (expected {})",
                values.len(),
                self.trace_bins
            )));
        }
        Ok(values[self.bin_nearest(fc_hz)])
    }
}

/// Error responses start with a negative SCPI class code.
fn check_instrument_error(reply: &str) -> Result<(), TransportError> {
    if reply.starts_with('-') && reply.contains(',') {
        let numeric = reply.split(',').next().unwrap_or("");
        if numeric.len() > 1 && numeric[1..].chars().all(|c| c.is_ascii_digit()) {
            return Err(TransportError::Instrument(reply.to_string()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::analyzer::{quantize_dbm, PatternBackend};
    use super::*;
    use crate::rf::{ideal_power_dbm, LinkConfig, PatternModel};

    fn quiet_link() -> LinkConfig {
        LinkConfig {
            noise_sigma_db: 0.0,
            multipath_ripple_sigma_db: 0.0,
            ..LinkConfig::default()
        }
    }

    fn embedded(link: LinkConfig) -> InstrumentClient<EmbeddedTransport> {
        let backend = PatternBackend::new(PatternModel::default_lobe(), link, 1, 2);
        InstrumentClient::new(
            EmbeddedTransport::new(AnalyzerState::new(1001), Box::new(backend)),
            1001,
        )
    }

    #[test]
    fn measure_matches_ideal_power_within_quantization() {
        let link = quiet_link();
        let mut client = embedded(link.clone());
        client.configure(60e9, 2e9, 1e6, 1e6).unwrap();
        let pose = SphericalCoord::from_degrees(45.0, 30.0, 0.08).unwrap();
        let got = client.measure(pose, 60e9, 1.0, 10.0).unwrap();
        let expect = ideal_power_dbm(&PatternModel::default_lobe(), &link, pose);
        assert_eq!(got, quantize_dbm(expect));
        assert!((got - expect).abs() < 0.002);
    }

    #[test]
    fn zero_span_returns_flat_bin() {
        let link = quiet_link();
        let mut client = embedded(link);
        client.configure(60e9, 0.0, 1e6, 1e6).unwrap();
        let pose = SphericalCoord::from_degrees(0.0, 0.0, 0.05).unwrap();
        let got = client.measure(pose, 60e9, 1.0, 10.0).unwrap();
        // Any bin equals the sole value in zero-span mode.
        let trace = client.transport.query(":TRAC:DATA? TRACE1").unwrap();
        let first: f64 = trace.split(',').next().unwrap().parse().unwrap();
        assert_eq!(got, first);
    }

    #[test]
    fn server_death_is_a_transport_error() {
        let link = quiet_link();
        let backend = PatternBackend::new(PatternModel::default_lobe(), link, 1, 2);
        let server = super::super::server::serve(
            "127.0.0.1:0",
            AnalyzerState::new(101),
            Box::new(backend),
        )
        .unwrap();
        let addr = server.addr().to_string();
        let transport =
            TcpTransport::connect(&addr, Duration::from_millis(500)).unwrap();
        let mut client = InstrumentClient::new(transport, 101);
        client.configure(60e9, 2e9, 1e6, 1e6).unwrap();
        server.stop();
        std::thread::sleep(Duration::from_millis(50));
        let pose = SphericalCoord::from_degrees(0.0, 0.0, 0.05).unwrap();
        let err = client.measure(pose, 60e9, 1.0, 10.0).unwrap_err();
        assert!(err.retryable(), "unexpected error kind: {err}");
    }
}
