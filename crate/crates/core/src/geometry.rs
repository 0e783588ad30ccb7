//! Angles, array layout and scene placement.
//!
//! The surface lies in the xy-plane with its broadside normal along +z.
//! Elevation `theta` is measured from +z and azimuth `phi` from +x in the
//! array plane. Row index `m` runs along x, column index `n` along y.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Pitch of the fabricated unit cell, in wavelengths.
pub const HARDWARE_PITCH_WAVELENGTHS: f64 = 0.408;

pub type Position = Point3<f64>;

/// A direction relative to the array normal, stored in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    theta_deg: f64,
    phi_deg: f64,
}

impl Angle {
    /// `theta` must lie in `[0, 90)`; `phi` is wrapped into `[0, 360)`.
    pub fn new(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        if !theta_deg.is_finite() || !(0.0..90.0).contains(&theta_deg) {
            return Err(invalid("theta", format!("{theta_deg} not in [0, 90)")));
        }
        if !phi_deg.is_finite() {
            return Err(invalid("phi", "not finite"));
        }
        Ok(Self {
            theta_deg,
            phi_deg: wrap_degrees(phi_deg),
        })
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi_deg
    }

    pub fn theta_rad(&self) -> f64 {
        self.theta_deg.to_radians()
    }

    pub fn phi_rad(&self) -> f64 {
        self.phi_deg.to_radians()
    }

    /// The same elevation on the opposite azimuth half-cut, `phi + 180`.
    pub fn mirror(&self) -> Self {
        Self {
            theta_deg: self.theta_deg,
            phi_deg: wrap_degrees(self.phi_deg + 180.0),
        }
    }

    /// Plots use a signed elevation: negative values sit on the `phi + 180` cut.
    pub fn from_signed(signed_theta_deg: f64, cut_phi_deg: f64) -> Result<Self> {
        if signed_theta_deg < 0.0 {
            Self::new(-signed_theta_deg, cut_phi_deg + 180.0)
        } else {
            Self::new(signed_theta_deg, cut_phi_deg)
        }
    }

    /// `(Psi, Phi) = (sin(theta) cos(phi), sin(theta) sin(phi))`.
    pub fn direction_cosines(&self) -> (f64, f64) {
        let (st, (sp, cp)) = (self.theta_rad().sin(), self.phi_rad().sin_cos());
        (st * cp, st * sp)
    }

    /// Unit vector pointing along this direction.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (psi, phi) = self.direction_cosines();
        Vector3::new(psi, phi, self.theta_rad().cos())
    }
}

fn wrap_degrees(x: f64) -> f64 {
    let w = x.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Free function form of [`Angle::direction_cosines`].
pub fn direction_cosines(a: &Angle) -> (f64, f64) {
    a.direction_cosines()
}

/// Uniform planar array description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub unit_dx: f64,
    pub unit_dy: f64,
    pub carrier_hz: f64,
    pub quant_bits: u8,
    /// Linear power gain of a single unit (isotropic pattern).
    pub unit_gain: f64,
}

impl ArrayConfig {
    pub fn new(
        rows: usize,
        cols: usize,
        unit_dx: f64,
        unit_dy: f64,
        carrier_hz: f64,
        quant_bits: u8,
        unit_gain: f64,
    ) -> Result<Self> {
        let cfg = Self {
            rows,
            cols,
            unit_dx,
            unit_dy,
            carrier_hz,
            quant_bits,
            unit_gain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 16x16 two-bit surface at 3.5 GHz with the 0.408 wavelength pitch.
    pub fn hardware_default() -> Self {
        let lambda = SPEED_OF_LIGHT / 3.5e9;
        Self {
            rows: 16,
            cols: 16,
            unit_dx: HARDWARE_PITCH_WAVELENGTHS * lambda,
            unit_dy: HARDWARE_PITCH_WAVELENGTHS * lambda,
            carrier_hz: 3.5e9,
            quant_bits: 2,
            unit_gain: 1.0,
        }
    }

    /// Same array with a square pitch given in wavelengths.
    pub fn with_pitch_wavelengths(mut self, pitch: f64) -> Self {
        let d = pitch * self.wavelength();
        self.unit_dx = d;
        self.unit_dy = d;
        self
    }

    pub fn with_bits(mut self, bits: u8) -> Self {
        self.quant_bits = bits;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("rows/cols", "array needs at least one unit"));
        }
        if self.quant_bits == 0 || self.quant_bits > 8 {
            return Err(invalid("quant_bits", format!("{} not in 1..=8", self.quant_bits)));
        }
        if !(self.unit_dx > 0.0 && self.unit_dy > 0.0) {
            return Err(invalid("unit_dx/unit_dy", "pitch must be positive"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(invalid("carrier_hz", "must be positive"));
        }
        if !(self.unit_gain > 0.0) {
            return Err(invalid("unit_gain", "must be positive"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength()
    }

    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of phase levels, `2^b`.
    pub fn levels(&self) -> usize {
        1usize << self.quant_bits
    }

    /// Row-major positions of every unit, centred on `center`.
    pub fn unit_positions(&self, center: &Position) -> Vec<Position> {
        let mut out = Vec::with_capacity(self.units());
        for m in 1..=self.rows {
            for n in 1..=self.cols {
                out.push(self.offset_of(m, n, center));
            }
        }
        out
    }

    fn offset_of(&self, m: usize, n: usize, center: &Position) -> Position {
        let x = (m as f64 - 0.5) * self.unit_dx - self.rows as f64 * self.unit_dx / 2.0;
        let y = (n as f64 - 0.5) * self.unit_dy - self.cols as f64 * self.unit_dy / 2.0;
        Position::new(center.x + x, center.y + y, center.z)
    }
}

/// Position of unit `(m, n)` (1-based).
///
/// Offsets are corner-referenced at `((m - 0.5) dx, (n - 0.5) dy)` and then
/// shifted so the array centroid lands on `center`.
pub fn unit_position(m: usize, n: usize, cfg: &ArrayConfig, center: &Position) -> Result<Position> {
    if m == 0 || n == 0 || m > cfg.rows || n > cfg.cols {
        return Err(Error::IndexOutOfRange {
            m,
            n,
            rows: cfg.rows,
            cols: cfg.cols,
        });
    }
    Ok(cfg.offset_of(m, n, center))
}

/// Point at distance `dist` from `center` along direction `a`.
pub fn place_by_angle(center: &Position, a: &Angle, dist: f64) -> Result<Position> {
    if !(dist > 0.0) {
        return Err(invalid("dist", format!("{dist} must be positive")));
    }
    Ok(center + a.unit_vector() * dist)
}

/// Direction and distance of `p` as seen from `center`.
///
/// Fails when `p` coincides with `center` or lies behind the array plane.
pub fn angle_of_departure(center: &Position, p: &Position) -> Result<(Angle, f64)> {
    let v = p - center;
    let r = v.norm();
    if r == 0.0 {
        return Err(Error::DegenerateGeometry(
            "point coincides with the array centre".into(),
        ));
    }
    if v.z <= 0.0 {
        return Err(Error::DegenerateGeometry("point is not in front of the array".into()));
    }
    let theta = (v.z / r).clamp(-1.0, 1.0).acos().to_degrees();
    let phi = v.y.atan2(v.x).to_degrees();
    Ok((Angle::new(theta, phi)?, r))
}

/// Transmitter, receiver and surface placement plus the link budget terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGeometry {
    pub array: ArrayConfig,
    pub ris_center: Position,
    pub tx_pos: Position,
    pub rx_pos: Position,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub tx_power_dbm: f64,
}

impl SceneGeometry {
    /// Builds a scene from angle/distance placements around the array centre.
    #[allow(clippy::too_many_arguments)]
    pub fn from_angles(
        array: ArrayConfig,
        ris_center: Position,
        tx_angle: Angle,
        d_t: f64,
        rx_angle: Angle,
        d_r: f64,
        tx_gain_dbi: f64,
        rx_gain_dbi: f64,
        tx_power_dbm: f64,
    ) -> Result<Self> {
        let scene = Self {
            tx_pos: place_by_angle(&ris_center, &tx_angle, d_t)?,
            rx_pos: place_by_angle(&ris_center, &rx_angle, d_r)?,
            array,
            ris_center,
            tx_gain_dbi,
            rx_gain_dbi,
            tx_power_dbm,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Default measurement geometry: tx broadside at 0.5 m, rx at (30, 0) deg and 3 m,
    /// 13 dBi horns, 0 dBm transmit power.
    pub fn hardware_default() -> Self {
        Self::from_angles(
            ArrayConfig::hardware_default(),
            Position::origin(),
            Angle::new(0.0, 270.0).unwrap(),
            0.5,
            Angle::new(30.0, 0.0).unwrap(),
            3.0,
            13.0,
            13.0,
            0.0,
        )
        .expect("default scene is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        for (name, p) in [("tx", &self.tx_pos), ("rx", &self.rx_pos)] {
            let v = p - self.ris_center;
            if v.norm() == 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "{name} coincides with the array centre"
                )));
            }
            if v.z <= 0.0 {
                return Err(Error::DegenerateGeometry(format!("{name} is behind the array plane")));
            }
        }
        Ok(())
    }

    pub fn d_t(&self) -> f64 {
        (self.tx_pos - self.ris_center).norm()
    }

    pub fn d_r(&self) -> f64 {
        (self.rx_pos - self.ris_center).norm()
    }

    pub fn with_rx(&self, rx_pos: Position) -> Self {
        Self { rx_pos, ..self.clone() }
    }

    pub fn with_tx(&self, tx_pos: Position) -> Self {
        Self { tx_pos, ..self.clone() }
    }

    /// Receiver moved to `a` at distance `dist` from the array centre.
    pub fn with_rx_at(&self, a: &Angle, dist: f64) -> Result<Self> {
        Ok(self.with_rx(place_by_angle(&self.ris_center, a, dist)?))
    }

    pub fn with_tx_at(&self, a: &Angle, dist: f64) -> Result<Self> {
        Ok(self.with_tx(place_by_angle(&self.ris_center, a, dist)?))
    }

    pub fn unit_positions(&self) -> Vec<Position> {
        self.array.unit_positions(&self.ris_center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn direction_cosines_examples() {
        let (p, q) = Angle::new(0.0, 270.0).unwrap().direction_cosines();
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);

        let (p, q) = Angle::new(30.0, 0.0).unwrap().direction_cosines();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);

        let (p, q) = Angle::new(10.0, 180.0).unwrap().direction_cosines();
        assert_abs_diff_eq!(p, -0.173_648_177_666_930_35, epsilon = 1e-12);
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn angle_validation() {
        assert!(Angle::new(90.0, 0.0).is_err());
        assert!(Angle::new(-1.0, 0.0).is_err());
        assert!(Angle::new(f64::NAN, 0.0).is_err());
        assert_eq!(Angle::new(10.0, -90.0).unwrap().phi_deg(), 270.0);
        assert_eq!(Angle::new(10.0, 720.0).unwrap().phi_deg(), 0.0);
    }

    #[test]
    fn mirror_shifts_azimuth_by_half_turn() {
        let a = Angle::new(25.0, 300.0).unwrap();
        let m = a.mirror();
        assert_eq!(m.theta_deg(), 25.0);
        assert_abs_diff_eq!(m.phi_deg(), 120.0, epsilon = 1e-12);
        let (p, q) = a.direction_cosines();
        let (pm, qm) = m.direction_cosines();
        assert_abs_diff_eq!(p, -pm, epsilon = 1e-12);
        assert_abs_diff_eq!(q, -qm, epsilon = 1e-12);
    }

    #[test]
    fn unit_position_examples() {
        let one = ArrayConfig::new(1, 1, 0.035, 0.035, 3.5e9, 2, 1.0).unwrap();
        let c = Position::new(0.3, -0.2, 1.8);
        assert_eq!(unit_position(1, 1, &one, &c).unwrap(), c);

        let cfg = ArrayConfig::new(16, 16, 0.035, 0.035, 3.5e9, 2, 1.0).unwrap();
        let o = Position::origin();
        let p = unit_position(1, 1, &cfg, &o).unwrap();
        assert_abs_diff_eq!(p.x, -0.2625, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, -0.2625, epsilon = 1e-12);
        assert_eq!(p.z, 0.0);
        let p = unit_position(16, 16, &cfg, &o).unwrap();
        assert_abs_diff_eq!(p.x, 0.2625, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.2625, epsilon = 1e-12);

        assert!(matches!(
            unit_position(17, 1, &cfg, &o),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(unit_position(0, 1, &cfg, &o).is_err());
    }

    #[test]
    fn place_by_angle_examples() {
        let o = Position::origin();
        let p = place_by_angle(&o, &Angle::new(0.0, 123.0).unwrap(), 3.0).unwrap();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z, 3.0, epsilon = 1e-15);

        let p = place_by_angle(&o, &Angle::new(30.0, 0.0).unwrap(), 3.0).unwrap();
        assert_abs_diff_eq!(p.x, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 2.598_076_211_353_316, epsilon = 1e-12);

        let p = place_by_angle(&o, &Angle::new(10.0, 180.0).unwrap(), 2.0).unwrap();
        assert_abs_diff_eq!(p.x, -0.347_296_355_333_860_7, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 1.969_615_506_024_416, epsilon = 1e-12);

        assert!(place_by_angle(&o, &Angle::new(0.0, 0.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn scene_rejects_points_behind_the_array() {
        let mut s = SceneGeometry::hardware_default();
        s.rx_pos = Position::new(0.0, 0.0, -1.0);
        assert!(matches!(s.validate(), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn default_pitch_is_near_35_mm() {
        let cfg = ArrayConfig::hardware_default();
        assert!((cfg.unit_dx - 0.035).abs() < 1e-4);
        assert_eq!(cfg.levels(), 4);
    }
}
