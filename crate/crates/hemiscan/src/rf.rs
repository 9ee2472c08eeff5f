//! Free-space transmit/receive link model behind the emulated receiver
//! chain: device radiation pattern, path loss, a seeded smooth multipath
//! ripple field, per-sweep receiver noise, and the max-hold detector.
//!
//! Every stochastic quantity is a pure function of (configuration, seed,
//! pose, sweep index), so call order never changes a result and repeat
//! runs with the same seeds are bit-identical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::{dot, SphericalCoord};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum RfError {
    #[error("gridded pattern: {0}")]
    BadPatternGrid(String),
    #[error("pattern csv parse error at line {line}: {msg}")]
    PatternCsv { line: usize, msg: String },
}

pub fn wavelength_m(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

/// Free-space path loss `20 log10(4 pi r / lambda)` in dB.
pub fn fspl_db(r_m: f64, frequency_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * r_m / wavelength_m(frequency_hz)).log10()
}

/// Transmit-pattern model: an analytic cosine-power lobe or a gridded
/// gain table with bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternModel {
    /// `G(phi, theta) = peak + 10 m(phi) log10(cos theta)` where the
    /// exponent blends between the two principal planes:
    /// `m(phi) = m_e cos^2 phi + m_h sin^2 phi`.
    Analytic {
        peak_gain_dbi: f64,
        exponent_e: f64,
        exponent_h: f64,
    },
    Gridded(GriddedPattern),
}

impl PatternModel {
    /// Default lobe: 5 dBi peak with a 25 dB fall-off at 60 degrees.
    pub fn default_lobe() -> Self {
        PatternModel::Analytic {
            peak_gain_dbi: 5.0,
            exponent_e: 8.3,
            exponent_h: 8.3,
        }
    }

    pub fn gain_dbi(&self, phi_rad: f64, theta_rad: f64) -> f64 {
        match self {
            PatternModel::Analytic {
                peak_gain_dbi,
                exponent_e,
                exponent_h,
            } => {
                let c = theta_rad.cos().max(1e-20);
                let (s_phi, c_phi) = phi_rad.sin_cos();
                let m = exponent_e * c_phi * c_phi + exponent_h * s_phi * s_phi;
                peak_gain_dbi + 10.0 * m * c.log10()
            }
            PatternModel::Gridded(g) => g.gain_dbi(phi_rad.to_degrees(), theta_rad.to_degrees()),
        }
    }
}

/// Regular (phi, theta) gain table in dBi. Azimuth is treated as periodic
/// when the grid spans the full circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedPattern {
    phi_deg: Vec<f64>,
    theta_deg: Vec<f64>,
    /// Row-major: `gain[theta_index * n_phi + phi_index]`.
    gain_dbi: Vec<f64>,
}

impl GriddedPattern {
    pub fn new(
        phi_deg: Vec<f64>,
        theta_deg: Vec<f64>,
        gain_dbi: Vec<f64>,
    ) -> Result<Self, RfError> {
        if phi_deg.len() < 2 || theta_deg.len() < 2 {
            return Err(RfError::BadPatternGrid(
                "need at least 2 x 2 grid nodes".into(),
            ));
        }
        if gain_dbi.len() != phi_deg.len() * theta_deg.len() {
            return Err(RfError::BadPatternGrid(format!(
                "{} values for a {} x {} grid",
                gain_dbi.len(),
                theta_deg.len(),
                phi_deg.len()
            )));
        }
        if !gain_dbi.iter().all(|v| v.is_finite()) {
            return Err(RfError::BadPatternGrid("non-finite gain entry".into()));
        }
        for axis in [&phi_deg, &theta_deg] {
            if !axis.windows(2).all(|w| w[1] > w[0]) {
                return Err(RfError::BadPatternGrid(
                    "grid axes must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            phi_deg,
            theta_deg,
            gain_dbi,
        })
    }

    /// Parses the `phi_deg,theta_deg,gain_dbi` CSV export format. Rows
    /// may come in any order but must fill a complete regular grid.
    pub fn from_csv(text: &str) -> Result<Self, RfError> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("phi_deg")) {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |name: &str| -> Result<f64, RfError> {
                parts
                    .next()
                    .ok_or_else(|| RfError::PatternCsv {
                        line: i + 1,
                        msg: format!("missing {name}"),
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| RfError::PatternCsv {
                        line: i + 1,
                        msg: format!("{name}: {e}"),
                    })
            };
            rows.push((field("phi_deg")?, field("theta_deg")?, field("gain_dbi")?));
        }
        let mut phis: Vec<f64> = Vec::new();
        let mut thetas: Vec<f64> = Vec::new();
        for &(p, t, _) in &rows {
            if !phis.iter().any(|&x| (x - p).abs() < 1e-9) {
                phis.push(p);
            }
            if !thetas.iter().any(|&x| (x - t).abs() < 1e-9) {
                thetas.push(t);
            }
        }
        phis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if rows.len() != phis.len() * thetas.len() {
            return Err(RfError::BadPatternGrid(format!(
                "{} rows do not fill a {} x {} regular grid",
                rows.len(),
                thetas.len(),
                phis.len()
            )));
        }
        let mut gain = vec![f64::NAN; rows.len()];
        for (p, t, g) in rows {
            let pi = phis.iter().position(|&x| (x - p).abs() < 1e-9).unwrap();
            let ti = thetas.iter().position(|&x| (x - t).abs() < 1e-9).unwrap();
            gain[ti * phis.len() + pi] = g;
        }
        if gain.iter().any(|v| v.is_nan()) {
            return Err(RfError::BadPatternGrid("duplicate grid rows".into()));
        }
        Self::new(phis, thetas, gain)
    }

    fn node(&self, ti: usize, pi: usize) -> f64 {
        self.gain_dbi[ti * self.phi_deg.len() + pi]
    }

    pub fn gain_dbi(&self, phi_deg: f64, theta_deg: f64) -> f64 {
        let phi_span = self.phi_deg.last().unwrap() - self.phi_deg[0];
        let step = phi_span / (self.phi_deg.len() - 1) as f64;
        let periodic = (phi_span + step - 360.0).abs() < 1e-6;
        let mut phi = phi_deg;
        if periodic {
            phi = self.phi_deg[0] + (phi - self.phi_deg[0]).rem_euclid(360.0);
        }

        let (pi, pt) = bracket(&self.phi_deg, phi, periodic);
        let (ti, tt) = bracket(&self.theta_deg, theta_deg, false);
        let n_phi = self.phi_deg.len();
        let pi1 = if pi + 1 < n_phi { pi + 1 } else if periodic { 0 } else { pi };
        let ti1 = (ti + 1).min(self.theta_deg.len() - 1);
        let g00 = self.node(ti, pi);
        let g01 = self.node(ti, pi1);
        let g10 = self.node(ti1, pi);
        let g11 = self.node(ti1, pi1);
        let top = g00 + (g01 - g00) * pt;
        let bottom = g10 + (g11 - g10) * pt;
        top + (bottom - top) * tt
    }
}

/// Finds the cell index and interpolation fraction for `x` on a sorted
/// axis; clamps outside the span (or wraps into the last cell when the
/// axis is periodic).
fn bracket(axis: &[f64], x: f64, periodic: bool) -> (usize, f64) {
    let n = axis.len();
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[n - 1] {
        if periodic {
            let step = (axis[n - 1] - axis[0]) / (n - 1) as f64;
            let t = ((x - axis[n - 1]) / step).clamp(0.0, 1.0);
            return (n - 1, t);
        }
        return (n - 2, 1.0);
    }
    let mut i = match axis.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    if i >= n - 1 {
        i = n - 2;
    }
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    (i, t)
}

/// Receiver-chain and environment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    pub frequency_hz: f64,
    pub tx_power_dbm: f64,
    pub rx_gain_dbi: f64,
    pub noise_floor_dbm: f64,
    /// Per-sweep receiver noise, dB (standard deviation).
    pub noise_sigma_db: f64,
    /// Smooth angular ripple field amplitude, dB (standard deviation).
    pub multipath_ripple_sigma_db: f64,
    /// Angular correlation length of the ripple field, degrees.
    pub ripple_correlation_deg: f64,
    pub sweep_rate_hz: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 60e9,
            tx_power_dbm: 0.0,
            rx_gain_dbi: 20.0,
            noise_floor_dbm: -90.0,
            noise_sigma_db: 0.3,
            multipath_ripple_sigma_db: 0.5,
            ripple_correlation_deg: 30.0,
            sweep_rate_hz: 10.0,
        }
    }
}

/// Noiseless received power: `tx + G_tx(phi, theta) + rx_gain - FSPL`.
/// Pure geometry and pattern; the receiver floor clamp applies only to
/// detector outputs, so the radius law stays exact here.
pub fn ideal_power_dbm(pattern: &PatternModel, link: &LinkConfig, s: SphericalCoord) -> f64 {
    link.tx_power_dbm + pattern.gain_dbi(s.phi(), s.theta()) + link.rx_gain_dbi
        - fspl_db(s.radius(), link.frequency_hz)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_key(parts: &[u64]) -> u64 {
    let mut state = 0x243F_6A88_85A3_08D3;
    let mut acc = 0u64;
    for &p in parts {
        state ^= p;
        acc ^= splitmix64(&mut state);
    }
    acc
}

fn unit_f64(bits: u64) -> f64 {
    // Uniform in (0, 1]: top 53 bits, never zero.
    (((bits >> 11) + 1) as f64) / (1u64 << 53) as f64
}

/// One standard normal draw keyed purely by the inputs (Box-Muller on a
/// counter-based generator).
fn keyed_normal(key: u64) -> f64 {
    let mut state = key;
    let u1 = unit_f64(splitmix64(&mut state));
    let u2 = unit_f64(splitmix64(&mut state));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seeded smooth zero-mean random field over directions on the sphere,
/// built as a superposition of random plane-wave harmonics. Each term has
/// variance 1/2 over its uniform phase, so the field's pointwise standard
/// deviation equals `sigma_db` exactly; the harmonic frequency sets the
/// angular correlation length.
#[derive(Debug, Clone)]
pub struct RippleField {
    sigma_db: f64,
    omega: f64,
    directions: Vec<[f64; 3]>,
    phases: Vec<f64>,
}

const RIPPLE_TERMS: usize = 64;

impl RippleField {
    pub fn new(environment_seed: u64, sigma_db: f64, correlation_deg: f64) -> Self {
        let mut directions = Vec::with_capacity(RIPPLE_TERMS);
        let mut phases = Vec::with_capacity(RIPPLE_TERMS);
        let mut state = mix_key(&[environment_seed, 0x7269_7070_6c65]);
        for _ in 0..RIPPLE_TERMS {
            // Uniform direction via normalized Gaussian triple.
            let g = [
                keyed_normal(splitmix64(&mut state)),
                keyed_normal(splitmix64(&mut state)),
                keyed_normal(splitmix64(&mut state)),
            ];
            directions.push(crate::se3::normalize(g));
            phases.push(std::f64::consts::TAU * unit_f64(splitmix64(&mut state)));
        }
        // Chord length at which the sinc-shaped correlation falls to 1/2.
        let corr = correlation_deg.to_radians().clamp(1e-3, std::f64::consts::PI);
        let chord = 2.0 * (corr / 2.0).sin();
        Self {
            sigma_db,
            omega: 1.8955 / chord,
            directions,
            phases,
        }
    }

    pub fn evaluate(&self, direction: [f64; 3]) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let amp = self.sigma_db * (2.0 / RIPPLE_TERMS as f64).sqrt();
        let mut sum = 0.0;
        for (d, ph) in self.directions.iter().zip(&self.phases) {
            sum += (self.omega * dot(*d, direction) + ph).cos();
        }
        amp * sum
    }
}

/// Ideal power plus the seeded angular ripple field.
pub fn perturbed_power_dbm(
    pattern: &PatternModel,
    link: &LinkConfig,
    s: SphericalCoord,
    environment_seed: u64,
) -> f64 {
    let field = RippleField::new(
        environment_seed,
        link.multipath_ripple_sigma_db,
        link.ripple_correlation_deg,
    );
    ideal_power_dbm(pattern, link, s) + field.evaluate(s.direction())
}

/// Adds one keyed Gaussian receiver-noise draw to a base power and
/// clamps at the noise floor. The draw depends only on
/// (seed, pose, sweep index), never on call order.
pub fn apply_receiver_noise(
    base_dbm: f64,
    link: &LinkConfig,
    s: SphericalCoord,
    noise_seed: u64,
    sweep_index: u64,
) -> f64 {
    let noise = if link.noise_sigma_db > 0.0 {
        let key = mix_key(&[
            noise_seed,
            s.phi().to_bits(),
            s.theta().to_bits(),
            s.radius().to_bits(),
            sweep_index,
        ]);
        link.noise_sigma_db * keyed_normal(key)
    } else {
        0.0
    };
    (base_dbm + noise).max(link.noise_floor_dbm)
}

/// Per-sweep receiver observation: perturbed power plus one Gaussian
/// noise draw, clamped at the noise floor.
pub fn sweep_power_dbm(
    pattern: &PatternModel,
    link: &LinkConfig,
    ripple: &RippleField,
    s: SphericalCoord,
    noise_seed: u64,
    sweep_index: u64,
) -> f64 {
    let base = ideal_power_dbm(pattern, link, s) + ripple.evaluate(s.direction());
    apply_receiver_noise(base, link, s, noise_seed, sweep_index)
}

/// Max-hold detector output over a dwell: the maximum of
/// `ceil(dwell * sweep_rate)` sweeps (at least one).
pub fn max_hold_sample(
    pattern: &PatternModel,
    link: &LinkConfig,
    s: SphericalCoord,
    dwell_s: f64,
    sweep_rate_hz: f64,
    noise_seed: u64,
    environment_seed: u64,
) -> f64 {
    let ripple = RippleField::new(
        environment_seed,
        link.multipath_ripple_sigma_db,
        link.ripple_correlation_deg,
    );
    let sweeps = ((dwell_s * sweep_rate_hz).ceil() as u64).max(1);
    (0..sweeps)
        .map(|k| sweep_power_dbm(pattern, link, &ripple, s, noise_seed, k))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Analytic stand-in for a trihedral corner reflector: a Gaussian angular
/// lobe around a known direction with inverse-square spreading relative
/// to a reference radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerificationTarget {
    pub phi_deg: f64,
    pub theta_deg: f64,
    pub lobe_width_deg: f64,
    pub peak_return_dbm: f64,
    pub reference_radius_m: f64,
}

impl Default for VerificationTarget {
    fn default() -> Self {
        Self {
            phi_deg: 90.0,
            theta_deg: 20.0,
            lobe_width_deg: 15.0,
            peak_return_dbm: -30.0,
            reference_radius_m: 0.05,
        }
    }
}

impl VerificationTarget {
    fn direction(&self) -> [f64; 3] {
        let (sp, cp) = self.phi_deg.to_radians().sin_cos();
        let (st, ct) = self.theta_deg.to_radians().sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Reflected power seen when the probe looks from direction `s`:
/// quadratic-in-angle dB roll-off (12 dB at one lobe width) plus the
/// spreading term, clamped at the receiver floor.
pub fn reflector_power_dbm(
    target: &VerificationTarget,
    link: &LinkConfig,
    s: SphericalCoord,
) -> f64 {
    let c = dot(target.direction(), s.direction()).clamp(-1.0, 1.0);
    let angle_deg = c.acos().to_degrees();
    let attenuation = 12.0 * (angle_deg / target.lobe_width_deg).powi(2);
    let spreading = 20.0 * (s.radius() / target.reference_radius_m).log10();
    (target.peak_return_dbm - attenuation - spreading).max(link.noise_floor_dbm)
}
