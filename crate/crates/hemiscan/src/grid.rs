//! Hemispherical sampling grids.
//!
//! A grid is the cross product of an azimuth sweep (half-open: the 360
//! degree column is the 0 degree column) and a polar sweep whose end
//! value is included or excluded per the spec flag. The pole row, when
//! present, is sampled once per azimuth column so every column has the
//! same shape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::SphericalCoord;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("{axis} step must be > 0 (got {step} deg)")]
    NonPositiveStep { axis: &'static str, step: f64 },
    #[error("{axis} span [{start}, {end}] deg with step {step} deg yields no samples")]
    EmptyAxis {
        axis: &'static str,
        start: f64,
        end: f64,
        step: f64,
    },
    #[error("radius must be > 0 (got {0} m)")]
    NonPositiveRadius(f64),
    #[error("polar span must stay within [0, 90] deg (got [{0}, {1}])")]
    ThetaOutOfRange(f64, f64),
}

/// Traversal order over the (phi, theta) product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridOrdering {
    /// Outer loop over azimuth columns, polar angles ascending in each.
    #[default]
    AzimuthMajor,
    /// Alternate polar direction on successive azimuth columns to cut
    /// simulated travel between columns.
    Serpentine,
}

/// Declarative grid description. Angles in degrees, radius in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub radius_m: f64,
    pub phi_start_deg: f64,
    /// Exclusive azimuth end (a full sweep is 0..360).
    pub phi_end_deg: f64,
    pub phi_step_deg: f64,
    pub theta_start_deg: f64,
    pub theta_end_deg: f64,
    pub theta_step_deg: f64,
    pub theta_end_inclusive: bool,
    pub ordering: GridOrdering,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radius_m: 0.05,
            phi_start_deg: 0.0,
            phi_end_deg: 360.0,
            phi_step_deg: 15.0,
            theta_start_deg: 0.0,
            theta_end_deg: 60.0,
            theta_step_deg: 15.0,
            theta_end_inclusive: true,
            ordering: GridOrdering::AzimuthMajor,
        }
    }
}

/// Radius band that needs no calibration warning; outside the band a scan
/// still runs but the configuration is flagged.
pub const RADIUS_NOMINAL_RANGE_M: (f64, f64) = (0.03, 0.20);

/// One grid point with its execution order index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalSample {
    pub coord: SphericalCoord,
    pub index: usize,
}

fn axis_values(
    axis: &'static str,
    start: f64,
    end: f64,
    step: f64,
    inclusive: bool,
) -> Result<Vec<f64>, GridError> {
    if step <= 0.0 {
        return Err(GridError::NonPositiveStep { axis, step });
    }
    if end == start {
        return Ok(vec![start]);
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let v = start + step * k as f64;
        let past_end = if inclusive {
            v > end + 1e-9
        } else {
            v >= end - 1e-9
        };
        if past_end {
            break;
        }
        out.push(v);
        k += 1;
    }
    if out.is_empty() {
        return Err(GridError::EmptyAxis {
            axis,
            start,
            end,
            step,
        });
    }
    Ok(out)
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), GridError> {
        if self.radius_m <= 0.0 {
            return Err(GridError::NonPositiveRadius(self.radius_m));
        }
        if self.theta_start_deg < 0.0 || self.theta_end_deg > 90.0 {
            return Err(GridError::ThetaOutOfRange(
                self.theta_start_deg,
                self.theta_end_deg,
            ));
        }
        self.phi_values()?;
        self.theta_values()?;
        Ok(())
    }

    /// True when the radius sits outside the nominal calibration band.
    pub fn radius_warning(&self) -> bool {
        self.radius_m < RADIUS_NOMINAL_RANGE_M.0 || self.radius_m > RADIUS_NOMINAL_RANGE_M.1
    }

    /// Azimuth values, half-open `[start, end)`.
    pub fn phi_values(&self) -> Result<Vec<f64>, GridError> {
        axis_values(
            "phi",
            self.phi_start_deg,
            self.phi_end_deg,
            self.phi_step_deg,
            false,
        )
    }

    /// Polar values, end inclusive or exclusive per the flag.
    pub fn theta_values(&self) -> Result<Vec<f64>, GridError> {
        axis_values(
            "theta",
            self.theta_start_deg,
            self.theta_end_deg,
            self.theta_step_deg,
            self.theta_end_inclusive,
        )
    }
}

/// `(N_phi, N_theta, N_total)` for a grid spec; `N_total = N_phi * N_theta`.
pub fn grid_counts(spec: &GridSpec) -> Result<(usize, usize, usize), GridError> {
    let np = spec.phi_values()?.len();
    let nt = spec.theta_values()?.len();
    Ok((np, nt, np * nt))
}

/// Materializes the ordered sample list. Indices are contiguous from 0 in
/// execution order.
pub fn generate_grid(spec: &GridSpec) -> Result<Vec<SphericalSample>, GridError> {
    spec.validate()?;
    if spec.radius_m <= 0.0 {
        return Err(GridError::NonPositiveRadius(spec.radius_m));
    }
    let phis = spec.phi_values()?;
    let thetas = spec.theta_values()?;
    let mut samples = Vec::with_capacity(phis.len() * thetas.len());
    for (col, &phi) in phis.iter().enumerate() {
        let reversed = spec.ordering == GridOrdering::Serpentine && col % 2 == 1;
        let column: Box<dyn Iterator<Item = &f64>> = if reversed {
            Box::new(thetas.iter().rev())
        } else {
            Box::new(thetas.iter())
        };
        for &theta in column {
            let coord = SphericalCoord::from_degrees(phi, theta, spec.radius_m)
                .expect("validated spec produces valid coordinates");
            samples.push(SphericalSample {
                coord,
                index: samples.len(),
            });
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(radius: f64, phi_step: f64, theta_end: f64, theta_step: f64, incl: bool) -> GridSpec {
        GridSpec {
            radius_m: radius,
            phi_step_deg: phi_step,
            theta_end_deg: theta_end,
            theta_step_deg: theta_step,
            theta_end_inclusive: incl,
            ..GridSpec::default()
        }
    }

    #[test]
    fn standard_configs_point_totals() {
        // The four shipped scan configurations and their point totals.
        assert_eq!(grid_counts(&spec(0.04, 15.0, 60.0, 15.0, true)).unwrap(), (24, 5, 120));
        assert_eq!(grid_counts(&spec(0.05, 10.0, 70.0, 10.0, false)).unwrap(), (36, 7, 252));
        assert_eq!(grid_counts(&spec(0.08, 20.0, 60.0, 20.0, true)).unwrap(), (18, 4, 72));
        assert_eq!(grid_counts(&spec(0.15, 15.0, 60.0, 15.0, true)).unwrap(), (24, 5, 120));
    }

    #[test]
    fn generated_length_matches_counts() {
        for s in [
            spec(0.04, 15.0, 60.0, 15.0, true),
            spec(0.05, 10.0, 70.0, 10.0, false),
            spec(0.08, 20.0, 60.0, 20.0, true),
            spec(0.15, 15.0, 60.0, 15.0, true),
        ] {
            let (_, _, n) = grid_counts(&s).unwrap();
            let g = generate_grid(&s).unwrap();
            assert_eq!(g.len(), n);
            for (i, sample) in g.iter().enumerate() {
                assert_eq!(sample.index, i);
            }
        }
    }

    #[test]
    fn twenty_degree_full_azimuth() {
        let s = spec(0.08, 20.0, 60.0, 20.0, true);
        let (np, nt, n) = grid_counts(&s).unwrap();
        assert_eq!(np, 18);
        assert_eq!(nt, 4); // 0, 20, 40, 60
        assert_eq!(n, 72);
        assert_eq!(s.theta_values().unwrap(), vec![0.0, 20.0, 40.0, 60.0]);
    }

    #[test]
    fn single_point_grid() {
        let s = GridSpec {
            phi_end_deg: 0.0,
            theta_end_deg: 0.0,
            ..GridSpec::default()
        };
        let g = generate_grid(&s).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].coord.theta(), 0.0);
        assert_eq!(g[0].coord.phi(), 0.0);
    }

    #[test]
    fn zero_point_axis_is_an_error() {
        let s = GridSpec {
            phi_start_deg: 10.0,
            phi_end_deg: 5.0,
            ..GridSpec::default()
        };
        assert!(matches!(
            generate_grid(&s),
            Err(GridError::EmptyAxis { axis: "phi", .. })
        ));
        let s = GridSpec {
            theta_step_deg: 0.0,
            ..GridSpec::default()
        };
        assert!(matches!(
            generate_grid(&s),
            Err(GridError::NonPositiveStep { axis: "theta", .. })
        ));
    }

    #[test]
    fn no_duplicate_directions() {
        let g = generate_grid(&spec(0.05, 10.0, 70.0, 10.0, false)).unwrap();
        for (i, a) in g.iter().enumerate() {
            for b in &g[i + 1..] {
                let same = (a.coord.phi_deg() - b.coord.phi_deg()).abs() < 1e-9
                    && (a.coord.theta_deg() - b.coord.theta_deg()).abs() < 1e-9;
                assert!(!same, "duplicate at {:?}", a.coord);
            }
        }
    }

    #[test]
    fn serpentine_visits_same_set() {
        let mut az = spec(0.05, 30.0, 60.0, 20.0, true);
        az.ordering = GridOrdering::AzimuthMajor;
        let mut sp = az.clone();
        sp.ordering = GridOrdering::Serpentine;
        let key = |s: &SphericalSample| {
            (
                (s.coord.phi_deg() * 1e6).round() as i64,
                (s.coord.theta_deg() * 1e6).round() as i64,
            )
        };
        let mut a: Vec<_> = generate_grid(&az).unwrap().iter().map(key).collect();
        let mut b: Vec<_> = generate_grid(&sp).unwrap().iter().map(key).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn serpentine_reverses_odd_columns() {
        let mut s = spec(0.05, 90.0, 40.0, 20.0, true);
        s.ordering = GridOrdering::Serpentine;
        let g = generate_grid(&s).unwrap();
        // Column 0 ascends, column 1 descends.
        assert_eq!(g[0].coord.theta_deg(), 0.0);
        assert_eq!(g[2].coord.theta_deg().round(), 40.0);
        assert_eq!(g[3].coord.theta_deg().round(), 40.0);
        assert_eq!(g[5].coord.theta_deg(), 0.0);
    }

    #[test]
    fn radius_band_warnings() {
        assert!(!spec(0.05, 15.0, 60.0, 15.0, true).radius_warning());
        assert!(spec(0.025, 15.0, 60.0, 15.0, true).radius_warning());
        assert!(spec(0.25, 15.0, 60.0, 15.0, true).radius_warning());
    }
}
