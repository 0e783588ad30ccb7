//! Received-power model, angle sweeps and lobe metrics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::codebook::Codeword;
use crate::error::{invalid, Error, Result};
use crate::geometry::{Angle, Position, SceneGeometry};

/// Relative floor for peak detection, dB below the global maximum.
pub const DEFAULT_PEAK_FLOOR_DB: f64 = 20.0;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

/// `G dx dy lambda^2 / (64 pi^3)`: the per-unit aperture term of the link budget.
pub fn aperture_factor(scene: &SceneGeometry) -> f64 {
    let a = &scene.array;
    let lambda = a.wavelength();
    a.unit_gain * a.unit_dx * a.unit_dy * lambda * lambda / (64.0 * PI.powi(3))
}

/// `sum exp(j phi - j k (r_tx + r_rx)) / (r_tx r_rx)` over all units.
pub(crate) fn array_sum(scene: &SceneGeometry, phases: &[f64]) -> Result<Complex64> {
    let k = scene.array.wavenumber();
    let mut s = Complex64::new(0.0, 0.0);
    for (p, &phi) in scene.unit_positions().iter().zip(phases) {
        let rt = (scene.tx_pos - p).norm();
        let rr = (scene.rx_pos - p).norm();
        if rt == 0.0 || rr == 0.0 {
            return Err(Error::DegenerateGeometry("terminal coincides with a unit".into()));
        }
        s += Complex64::from_polar(1.0 / (rt * rr), phi - k * (rt + rr));
    }
    Ok(s)
}

/// Received power in watts for an arbitrary per-unit phase profile.
pub fn received_power_watts_phases(scene: &SceneGeometry, phases: &[f64]) -> Result<f64> {
    if phases.len() != scene.array.units() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} phases", scene.array.units()),
            got: format!("{}", phases.len()),
        });
    }
    let s = array_sum(scene, phases)?;
    Ok(dbm_to_watts(scene.tx_power_dbm)
        * db_to_lin(scene.tx_gain_dbi)
        * db_to_lin(scene.rx_gain_dbi)
        * aperture_factor(scene)
        * s.norm_sqr())
}

pub fn received_power_watts(scene: &SceneGeometry, cw: &Codeword) -> Result<f64> {
    cw.check_shape(&scene.array)?;
    received_power_watts_phases(scene, &cw.phases())
}

/// Received power in dBm with exact spherical distances to every unit.
pub fn received_power(scene: &SceneGeometry, cw: &Codeword) -> Result<f64> {
    received_power_watts(scene, cw).map(watts_to_dbm)
}

/// Power in dBm at each receiver location, evaluated in parallel.
pub fn power_map(scene: &SceneGeometry, cw: &Codeword, rx: &[Position]) -> Result<Vec<f64>> {
    cw.check_shape(&scene.array)?;
    let phases = cw.phases();
    rx.par_iter()
        .map(|p| {
            let s = scene.with_rx(*p);
            s.validate()?;
            received_power_watts_phases(&s, &phases).map(watts_to_dbm)
        })
        .collect()
}

/// Received power sampled along a receiver arc on the `{phi, phi + 180}` cut.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleSpectrum {
    pub cut_phi: f64,
    pub sweep_radius: f64,
    /// `(signed_theta_deg, power_dbm)`, strictly increasing in angle.
    pub samples: Vec<(f64, f64)>,
}

impl AngleSpectrum {
    pub fn new(cut_phi: f64, sweep_radius: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(invalid("samples", "angles must be strictly increasing"));
        }
        Ok(Self {
            cut_phi,
            sweep_radius,
            samples,
        })
    }

    /// Sample with the highest power.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.samples.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Maximum power over `[center - half_width, center + half_width]`.
    pub fn max_in(&self, center: f64, half_width: f64) -> Result<f64> {
        self.samples
            .iter()
            .filter(|(t, _)| (t - center).abs() <= half_width + 1e-9)
            .map(|s| s.1)
            .max_by(f64::total_cmp)
            .ok_or(Error::EmptyWindow { center, half_width })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("signed_theta_deg,power_dbm\n");
        for (t, p) in &self.samples {
            writeln!(out, "{t:.6},{p:.6}").unwrap();
        }
        out
    }
}

/// Sweeps the receiver over `[-theta_max, theta_max]` at radius `d_r` in steps of `step`.
///
/// Samples sit on the integer grid `i * step`; negative angles lie on the
/// `cut_phi + 180` half-cut.
pub fn angle_spectrum(
    scene: &SceneGeometry,
    cw: &Codeword,
    cut_phi: f64,
    theta_max: f64,
    step: f64,
) -> Result<AngleSpectrum> {
    if !(step > 0.0) {
        return Err(invalid("step", "must be positive"));
    }
    if !(0.0..90.0).contains(&theta_max) {
        return Err(invalid("theta_max", format!("{theta_max} not in [0, 90)")));
    }
    cw.check_shape(&scene.array)?;
    let n = (theta_max / step + 1e-9).floor() as i64;
    let radius = scene.d_r();
    let phases = cw.phases();
    let samples = (-n..=n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * step;
            let a = Angle::from_signed(t, cut_phi)?;
            let s = scene.with_rx_at(&a, radius)?;
            Ok((t, watts_to_dbm(received_power_watts_phases(&s, &phases)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    AngleSpectrum::new(cut_phi, radius, samples)
}

/// Main-lobe width `2 [pi/2 - acos(1.391 lambda / (pi N d))]` in degrees.
pub fn beamwidth(n_units: usize, pitch: f64, lambda: f64) -> Result<f64> {
    if n_units == 0 || !(pitch > 0.0) || !(lambda > 0.0) {
        return Err(invalid("beamwidth", "N, pitch and wavelength must be positive"));
    }
    let arg = 1.391 * lambda / (PI * n_units as f64 * pitch);
    if arg > 1.0 {
        return Err(Error::BeamwidthUndefined(arg));
    }
    Ok((2.0 * (PI / 2.0 - arg.acos())).to_degrees())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamMetrics {
    pub peaks: Vec<(f64, f64)>,
    pub main_lobe_dbm: f64,
    pub image_lobe_dbm: f64,
    pub suppression_db: f64,
}

/// Local maxima no more than `floor_db` below the global maximum.
///
/// A sample (or a run of equal samples) counts when both neighbours are
/// strictly lower; runs report their middle sample. Endpoints never count.
pub fn find_peaks(samples: &[(f64, f64)], floor_db: f64) -> Vec<(f64, f64)> {
    let Some(gmax) = samples.iter().map(|s| s.1).max_by(f64::total_cmp) else {
        return Vec::new();
    };
    let floor = gmax - floor_db;
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < samples.len() {
        let mut j = i;
        while j + 1 < samples.len() && samples[j + 1].1 == samples[i].1 {
            j += 1;
        }
        if j + 1 < samples.len()
            && samples[i - 1].1 < samples[i].1
            && samples[j + 1].1 < samples[i].1
            && samples[i].1 >= floor
        {
            peaks.push(samples[(i + j) / 2]);
        }
        i = j + 1;
    }
    peaks
}

/// Main lobe around `target`, image lobe around `-target`, and peaks above the default floor.
pub fn beam_metrics(sp: &AngleSpectrum, target: f64, window: f64) -> Result<BeamMetrics> {
    beam_metrics_with_floor(sp, target, window, DEFAULT_PEAK_FLOOR_DB)
}

pub fn beam_metrics_with_floor(sp: &AngleSpectrum, target: f64, window: f64, floor_db: f64) -> Result<BeamMetrics> {
    if !(window > 0.0) {
        return Err(invalid("window", "must be positive"));
    }
    let main = sp.max_in(target, window)?;
    let image = sp.max_in(-target, window)?;
    Ok(BeamMetrics {
        peaks: find_peaks(&sp.samples, floor_db),
        main_lobe_dbm: main,
        image_lobe_dbm: image,
        suppression_db: main - image,
    })
}
