//! Symmetric Holland (1980) parametric pressure and gradient-wind profiles.
//!
//! Units: pressures in hPa, radii in km, speeds in m/s. Internally the wind
//! profile works in SI (Pa, m).

use std::f64::consts::E;

use crate::error::ForcingError;
use crate::field::Field2;
use crate::gridding::GridSpec;
use crate::tracks::{lon_delta, TrackPoint};

pub const DEFAULT_AMBIENT_PRESSURE_HPA: f64 = 1013.25;
pub const DEFAULT_AIR_DENSITY: f64 = 1.15;
pub const EARTH_ROTATION_RATE: f64 = 7.292e-5;
pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const HOLLAND_B_MIN: f64 = 1.0;
pub const HOLLAND_B_MAX: f64 = 2.5;

/// Ambient conditions and conventions applied when turning a track point into
/// a parametric vortex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindConfig {
    pub ambient_pressure: f64,
    pub air_density: f64,
    /// Rotation of the wind vector toward the eye, degrees.
    pub inflow_deg: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self {
            ambient_pressure: DEFAULT_AMBIENT_PRESSURE_HPA,
            air_density: DEFAULT_AIR_DENSITY,
            inflow_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HollandParams {
    /// Central pressure, hPa.
    pub p_c: f64,
    /// Ambient pressure, hPa.
    pub p_n: f64,
    /// Radius of maximum winds, km.
    pub r_max: f64,
    pub v_max: f64,
    /// Shape parameter.
    pub b: f64,
    pub rho_air: f64,
    /// Coriolis parameter, 1/s, signed by hemisphere.
    pub f: f64,
}

impl HollandParams {
    /// Calibrates B from the track intensity and takes f at the eye latitude.
    pub fn from_track_point(tp: &TrackPoint, cfg: &WindConfig) -> Result<Self, ForcingError> {
        let b = holland_b(tp.p_min, cfg.ambient_pressure, tp.v_max, cfg.air_density)?;
        Ok(Self {
            p_c: tp.p_min,
            p_n: cfg.ambient_pressure,
            r_max: tp.r_max,
            v_max: tp.v_max,
            b,
            rho_air: cfg.air_density,
            f: coriolis(tp.lat),
        })
    }

    pub fn pressure_deficit(&self) -> f64 {
        self.p_n - self.p_c
    }
}

pub fn coriolis(lat_deg: f64) -> f64 {
    2.0 * EARTH_ROTATION_RATE * lat_deg.to_radians().sin()
}

/// Unclamped shape parameter from `v_max^2 = B * dp / (rho * e)` with dp in Pa.
pub fn holland_b_raw(p_c: f64, p_n: f64, v_max: f64, rho_air: f64) -> Result<f64, ForcingError> {
    if !(p_n > p_c) {
        return Err(ForcingError::InvalidIntensity { p_c, p_n });
    }
    Ok(v_max * v_max * rho_air * E / (100.0 * (p_n - p_c)))
}

pub fn holland_b(p_c: f64, p_n: f64, v_max: f64, rho_air: f64) -> Result<f64, ForcingError> {
    holland_b_raw(p_c, p_n, v_max, rho_air).map(|b| b.clamp(HOLLAND_B_MIN, HOLLAND_B_MAX))
}

/// Surface pressure at `r` km from the eye, hPa. `r = 0` gives `p_c`.
pub fn pressure_at(r: f64, p: &HollandParams) -> f64 {
    if r <= 0.0 {
        return p.p_c;
    }
    let shape = (p.r_max / r).powf(p.b);
    p.p_c + p.pressure_deficit() * (-shape).exp()
}

/// Gradient wind speed at `r` km from the eye.
pub fn gradient_wind_speed(r: f64, p: &HollandParams) -> Result<f64, ForcingError> {
    if !(r > 0.0) {
        return Err(ForcingError::Domain(r));
    }
    let r_m = r * 1000.0;
    let dp_pa = 100.0 * p.pressure_deficit();
    let ln_ratio = (p.r_max / r).ln();
    let shape = (p.b * ln_ratio).exp();
    // (r_max/r)^B * exp(-(r_max/r)^B) without overflow at small r.
    let cyclostrophic = (p.b * ln_ratio - shape).exp() * p.b * dp_pa / p.rho_air;
    let half_fr = 0.5 * r_m * p.f.abs();
    // sqrt(a + c^2) - c rewritten to avoid cancellation far from the eye.
    Ok(cyclostrophic / ((cyclostrophic + half_fr * half_fr).sqrt() + half_fr))
}

/// Local equirectangular offset (east, north) in km from the eye to a point,
/// scaled by the cosine of the eye latitude.
pub fn local_offset_km(lat: f64, lon: f64, eye_lat: f64, eye_lon: f64) -> (f64, f64) {
    let dx = EARTH_RADIUS_KM * eye_lat.to_radians().cos() * lon_delta(eye_lon, lon).to_radians();
    let dy = EARTH_RADIUS_KM * (lat - eye_lat).to_radians();
    (dx, dy)
}

/// Wind vector (u east, v north) at a point. Counterclockwise circulation for
/// eyes in the northern hemisphere (latitude >= 0), clockwise otherwise, rotated
/// `inflow_deg` toward the eye.
pub fn wind_vector_at(
    lat: f64,
    lon: f64,
    eye_lat: f64,
    eye_lon: f64,
    p: &HollandParams,
    inflow_deg: f64,
) -> (f64, f64) {
    let (dx, dy) = local_offset_km(lat, lon, eye_lat, eye_lon);
    let r = dx.hypot(dy);
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let speed = gradient_wind_speed(r, p).expect("positive radius");
    let (ex, ey) = (dx / r, dy / r);
    let (tx, ty) = if eye_lat >= 0.0 { (-ey, ex) } else { (ey, -ex) };
    let (sin_a, cos_a) = inflow_deg.to_radians().sin_cos();
    let u = cos_a * tx - sin_a * ex;
    let v = cos_a * ty - sin_a * ey;
    (speed * u, speed * v)
}

/// Pressure and wind on every cell center of a grid window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSnapshot {
    pub pressure: Field2<f64>,
    pub u: Field2<f64>,
    pub v: Field2<f64>,
}

/// Pressure and wind at a single location; the same kernel `field_snapshot` applies per cell.
pub fn forcing_at(lat: f64, lon: f64, tp: &TrackPoint, p: &HollandParams, inflow_deg: f64) -> (f64, f64, f64) {
    let (dx, dy) = local_offset_km(lat, lon, tp.lat, tp.lon);
    let pressure = pressure_at(dx.hypot(dy), p);
    let (u, v) = wind_vector_at(lat, lon, tp.lat, tp.lon, p, inflow_deg);
    (pressure, u, v)
}

pub fn field_snapshot(tp: &TrackPoint, grid: &GridSpec, cfg: &WindConfig) -> Result<ForcingSnapshot, ForcingError> {
    let params = HollandParams::from_track_point(tp, cfg)?;
    let n = grid.resolution;
    let mut pressure = Vec::with_capacity(n * n);
    let mut u = Vec::with_capacity(n * n);
    let mut v = Vec::with_capacity(n * n);
    for row in 0..n {
        let lat = grid.cell_lat(row);
        for col in 0..n {
            let (p, uu, vv) = forcing_at(lat, grid.cell_lon(col), tp, &params, cfg.inflow_deg);
            pressure.push(p);
            u.push(uu);
            v.push(vv);
        }
    }
    Ok(ForcingSnapshot {
        pressure: Field2::from_vec(n, n, pressure),
        u: Field2::from_vec(n, n, u),
        v: Field2::from_vec(n, n, v),
    })
}
