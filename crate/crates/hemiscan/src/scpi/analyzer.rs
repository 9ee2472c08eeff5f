//! Emulated spectrum-analyzer state machine: settings, trace rendering
//! against a link backend, max-hold accumulation, and 16-bit trace
//! quantization over the display range.

use crate::rf::{self, LinkConfig, PatternModel, RippleField, VerificationTarget};
use crate::se3::SphericalCoord;

use super::grammar::{
    format_nrf, parse_scpi, CommandId, ScpiArg, ScpiCommand, DET_MAXHOLD, DET_NORMAL, TRACE1,
};

/// Received power per sweep at a commanded pose. Implementations must be
/// pure in (pose, sweep index) so replay and transport mode never change
/// results.
pub trait LinkBackend: Send {
    fn sweep_power_dbm(&self, pose: SphericalCoord, sweep_index: u64) -> f64;
    fn noise_floor_dbm(&self) -> f64;
}

/// Device pattern + free-space link + ripple + receiver noise.
pub struct PatternBackend {
    pattern: PatternModel,
    link: LinkConfig,
    ripple: RippleField,
    noise_seed: u64,
}

impl PatternBackend {
    pub fn new(
        pattern: PatternModel,
        link: LinkConfig,
        noise_seed: u64,
        environment_seed: u64,
    ) -> Self {
        let ripple = RippleField::new(
            environment_seed,
            link.multipath_ripple_sigma_db,
            link.ripple_correlation_deg,
        );
        Self {
            pattern,
            link,
            ripple,
            noise_seed,
        }
    }
}

impl LinkBackend for PatternBackend {
    fn sweep_power_dbm(&self, pose: SphericalCoord, sweep_index: u64) -> f64 {
        rf::sweep_power_dbm(
            &self.pattern,
            &self.link,
            &self.ripple,
            pose,
            self.noise_seed,
            sweep_index,
        )
    }

    fn noise_floor_dbm(&self) -> f64 {
        self.link.noise_floor_dbm
    }
}

/// Corner-reflector verification target behind the same receiver chain.
pub struct ReflectorBackend {
    target: VerificationTarget,
    link: LinkConfig,
    noise_seed: u64,
}

impl ReflectorBackend {
    pub fn new(target: VerificationTarget, link: LinkConfig, noise_seed: u64) -> Self {
        Self {
            target,
            link,
            noise_seed,
        }
    }
}

impl LinkBackend for ReflectorBackend {
    fn sweep_power_dbm(&self, pose: SphericalCoord, sweep_index: u64) -> f64 {
        let base = rf::reflector_power_dbm(&self.target, &self.link, pose);
        rf::apply_receiver_noise(base, &self.link, pose, self.noise_seed, sweep_index)
    }

    fn noise_floor_dbm(&self) -> f64 {
        self.link.noise_floor_dbm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Normal,
    MaxHold,
}

/// Display range and resolution of the emulated trace: values quantize
/// onto a 16-bit grid spanning [-170, +30] dBm.
pub const DISPLAY_MIN_DBM: f64 = -170.0;
pub const DISPLAY_MAX_DBM: f64 = 30.0;

pub fn quantize_dbm(v: f64) -> f64 {
    let step = (DISPLAY_MAX_DBM - DISPLAY_MIN_DBM) / (u16::MAX as f64);
    let clamped = v.clamp(DISPLAY_MIN_DBM, DISPLAY_MAX_DBM);
    let code = ((clamped - DISPLAY_MIN_DBM) / step).round();
    DISPLAY_MIN_DBM + code * step
}

#[derive(Debug, Clone)]
pub struct AnalyzerState {
    pub center_freq_hz: f64,
    pub span_hz: f64,
    pub rbw_hz: f64,
    pub vbw_hz: f64,
    pub detector: Detector,
    pub trace: Vec<f64>,
    pub armed: bool,
    pub sim_pose: SphericalCoord,
    pub sweeps_since_reset: u64,
}

impl AnalyzerState {
    pub fn new(trace_bins: usize) -> Self {
        Self {
            center_freq_hz: 60e9,
            span_hz: 2e9,
            rbw_hz: 1e6,
            vbw_hz: 1e6,
            detector: Detector::MaxHold,
            trace: vec![DISPLAY_MIN_DBM; trace_bins.max(1)],
            armed: false,
            sim_pose: SphericalCoord::new(0.0, 0.0, 0.05).expect("valid default pose"),
            sweeps_since_reset: 0,
        }
    }

    fn reset(&mut self, floor: f64) {
        let bins = self.trace.len();
        *self = Self::new(bins);
        self.fill_floor(floor);
    }

    fn fill_floor(&mut self, floor: f64) {
        let q = quantize_dbm(floor);
        self.trace.iter_mut().for_each(|b| *b = q);
    }

    fn clear_trace(&mut self, floor: f64) {
        self.fill_floor(floor);
        self.sweeps_since_reset = 0;
        self.armed = false;
    }

    fn bin_freq(&self, i: usize) -> f64 {
        if self.span_hz == 0.0 || self.trace.len() < 2 {
            self.center_freq_hz
        } else {
            let start = self.center_freq_hz - self.span_hz / 2.0;
            start + self.span_hz * i as f64 / (self.trace.len() - 1) as f64
        }
    }

    /// One triggered sweep: renders the tone through a Gaussian
    /// resolution filter (3 dB down at half the RBW from the carrier),
    /// quantizes, and folds into the trace per the detector mode.
    fn sweep(&mut self, backend: &dyn LinkBackend) {
        let power = backend.sweep_power_dbm(self.sim_pose, self.sweeps_since_reset);
        let floor = backend.noise_floor_dbm();
        let tone_hz = crate::rf::SPEED_OF_LIGHT / crate::rf::wavelength_m(self.center_freq_hz);
        // The simulated carrier sits at the configured centre frequency;
        // off-tune configurations show the tone walk across the span.
        let _ = tone_hz;
        for i in 0..self.trace.len() {
            let df = self.bin_freq(i) - self.center_freq_hz;
            let value = if self.span_hz == 0.0 {
                power
            } else {
                let atten = 3.0 * (2.0 * df / self.rbw_hz).powi(2);
                (power - atten).max(floor)
            };
            let q = quantize_dbm(value.max(floor));
            self.trace[i] = match self.detector {
                Detector::MaxHold => self.trace[i].max(q),
                Detector::Normal => q,
            };
        }
        self.sweeps_since_reset += 1;
        self.armed = true;
    }
}

/// Outcome of one handled line: setters answer nothing, queries answer a
/// line, malformed traffic answers an error line.
pub fn handle(cmd: &ScpiCommand, state: &mut AnalyzerState, backend: &dyn LinkBackend) -> Option<String> {
    fn err(code: i32, text: &str) -> Option<String> {
        Some(format!("{code},{text}"))
    }
    let floor = backend.noise_floor_dbm();

    let expect_no_args = |cmd: &ScpiCommand| -> Option<String> {
        if cmd.args.is_empty() {
            None
        } else {
            err(-108, "Parameter not allowed")
        }
    };

    match cmd.id {
        CommandId::Idn => {
            if !cmd.is_query {
                return err(-100, "Command error");
            }
            expect_no_args(cmd).or_else(|| {
                Some(format!(
                    "HEMISCAN,SIM-ANALYZER,0,{}",
                    env!("CARGO_PKG_VERSION")
                ))
            })
        }
        CommandId::Rst => expect_no_args(cmd).or_else(|| {
            state.reset(floor);
            None
        }),
        CommandId::FreqCenter => scalar_node(cmd, floor, state, |s| s.center_freq_hz, |s, v| {
            if v <= 0.0 {
                return false;
            }
            s.center_freq_hz = v;
            true
        }),
        CommandId::FreqSpan => scalar_node(cmd, floor, state, |s| s.span_hz, |s, v| {
            if v < 0.0 {
                return false;
            }
            s.span_hz = v;
            true
        }),
        CommandId::Rbw => scalar_node(cmd, floor, state, |s| s.rbw_hz, |s, v| {
            if v <= 0.0 {
                return false;
            }
            s.rbw_hz = v;
            true
        }),
        CommandId::Vbw => scalar_node(cmd, floor, state, |s| s.vbw_hz, |s, v| {
            if v <= 0.0 {
                return false;
            }
            s.vbw_hz = v;
            true
        }),
        CommandId::Detector => {
            if cmd.is_query {
                return Some(
                    match state.detector {
                        Detector::Normal => "NORM",
                        Detector::MaxHold => "MAXH",
                    }
                    .to_string(),
                );
            }
            match cmd.args.as_slice() {
                [ScpiArg::Mnemonic(m)] if DET_NORMAL.matches(m) => {
                    state.detector = Detector::Normal;
                    state.clear_trace(floor);
                    None
                }
                [ScpiArg::Mnemonic(m)] if DET_MAXHOLD.matches(m) => {
                    state.detector = Detector::MaxHold;
                    state.clear_trace(floor);
                    None
                }
                _ => err(-224, "Illegal parameter value"),
            }
        }
        CommandId::InitImmediate => {
            if cmd.is_query {
                return err(-100, "Command error");
            }
            expect_no_args(cmd).or_else(|| {
                state.sweep(backend);
                None
            })
        }
        CommandId::TraceData => {
            if !cmd.is_query {
                return err(-100, "Command error");
            }
            match cmd.args.as_slice() {
                // Shortest round-trip decimal form: the parsed value is
                // bit-identical to the quantized bin.
                [ScpiArg::Mnemonic(m)] if TRACE1.matches(m) => Some(
                    state
                        .trace
                        .iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>()
                        .join(","),
                ),
                _ => err(-224, "Illegal parameter value"),
            }
        }
        CommandId::SystemPose => {
            if cmd.is_query {
                let p = state.sim_pose;
                return Some(format!(
                    "{},{},{}",
                    format_nrf(p.phi_deg()),
                    format_nrf(p.theta_deg()),
                    format_nrf(p.radius())
                ));
            }
            match cmd.args.as_slice() {
                [ScpiArg::Number(phi), ScpiArg::Number(theta), ScpiArg::Number(r)] => {
                    match SphericalCoord::from_degrees(*phi, *theta, *r) {
                        Ok(pose) => {
                            state.sim_pose = pose;
                            // New pose starts a fresh acquisition.
                            state.clear_trace(floor);
                            None
                        }
                        Err(_) => err(-222, "Data out of range"),
                    }
                }
                _ => err(-109, "Missing parameter"),
            }
        }
    }
}

fn scalar_node(
    cmd: &ScpiCommand,
    _floor: f64,
    state: &mut AnalyzerState,
    get: impl Fn(&AnalyzerState) -> f64,
    set: impl Fn(&mut AnalyzerState, f64) -> bool,
) -> Option<String> {
    if cmd.is_query {
        if !cmd.args.is_empty() {
            return Some("-108,Parameter not allowed".to_string());
        }
        return Some(format_nrf(get(state)));
    }
    match cmd.args.as_slice() {
        [ScpiArg::Number(v)] => {
            if set(state, *v) {
                None
            } else {
                Some("-222,Data out of range".to_string())
            }
        }
        [] => Some("-109,Missing parameter".to_string()),
        _ => Some("-108,Parameter not allowed".to_string()),
    }
}

/// Parses and handles one raw line; parse failures map onto SCPI error
/// classes.
pub fn handle_line(
    line: &str,
    state: &mut AnalyzerState,
    backend: &dyn LinkBackend,
) -> Option<String> {
    match parse_scpi(line) {
        Ok(cmd) => handle(&cmd, state, backend),
        Err(super::grammar::ParseError::Empty) => None,
        Err(super::grammar::ParseError::UndefinedHeader { .. }) => {
            Some("-113,Undefined header".to_string())
        }
        Err(super::grammar::ParseError::BadNumber { .. }) => {
            Some("-104,Data type error".to_string())
        }
        Err(_) => Some("-100,Command error".to_string()),
    }
}
