//! Time-varying equivalent channel under codeword switching, with an optional
//! moving scatterer, and the windowed stationarity statistics.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::codebook::Codeword;
use crate::error::{invalid, Error, Result};
use crate::field::aperture_factor;
use crate::geometry::{Position, SceneGeometry};

pub const DEFAULT_SAMPLE_INTERVAL_S: f64 = 1e-3;
pub const DEFAULT_WINDOW: usize = 50;
pub const DEFAULT_LAG: usize = 1;
pub const DEFAULT_THRESHOLD_DB: f64 = -15.0;
/// `|a_ref|^2` below this is treated as a vanishing reference.
pub const DEGENERATE_REFERENCE: f64 = 1e-30;

const NOISE_STREAM: u64 = 0x6e6f_6973_6500_0001;

/// A point scatterer sweeping back and forth between two endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MovingScatterer {
    pub x1: Position,
    pub x2: Position,
    /// m/s
    pub speed: f64,
    /// Amplitude of the scattered path relative to the direct unit-to-receiver path.
    pub coupling_amp: f64,
}

impl Default for MovingScatterer {
    /// A 2 m crossing one metre above the array centre line at 1 m/s.
    fn default() -> Self {
        Self {
            x1: Position::new(1.0, -1.0, 2.0),
            x2: Position::new(1.0, 1.0, 2.0),
            speed: 1.0,
            coupling_amp: 0.2,
        }
    }
}

impl MovingScatterer {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0) {
            return Err(invalid("speed", "must be nonnegative"));
        }
        if !(self.coupling_amp >= 0.0) {
            return Err(invalid("coupling_amp", "must be nonnegative"));
        }
        Ok(())
    }

    /// Triangle-wave position: out along `x1 -> x2`, then back.
    pub fn position(&self, t: f64) -> Position {
        let span = self.x2 - self.x1;
        let len = span.norm();
        if len == 0.0 || self.speed == 0.0 {
            return self.x1;
        }
        let s = (self.speed * t).rem_euclid(2.0 * len);
        let along = if s <= len { s } else { 2.0 * len - s };
        self.x1 + span * (along / len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub enum Perturbation {
    #[default]
    None,
    MovingScatterer(MovingScatterer),
}

/// Per-unit line-of-sight channels `A e^{-jkr}/r`, with `A^4` equal to the
/// aperture term so that `|h_rx^T Theta h_tx|^2 P_t G_t G_r` is the link budget.
pub fn unit_channels(scene: &SceneGeometry) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    scene.validate()?;
    let amp = aperture_factor(scene).powf(0.25);
    let k = scene.array.wavenumber();
    let mut h_tx = Vec::with_capacity(scene.array.units());
    let mut h_rx = Vec::with_capacity(scene.array.units());
    for p in scene.unit_positions() {
        let rt = (scene.tx_pos - p).norm();
        let rr = (scene.rx_pos - p).norm();
        if rt == 0.0 || rr == 0.0 {
            return Err(Error::DegenerateGeometry("terminal coincides with a unit".into()));
        }
        h_tx.push(Complex64::from_polar(amp / rt, -k * rt));
        h_rx.push(Complex64::from_polar(amp / rr, -k * rr));
    }
    Ok((h_tx, h_rx))
}

fn scattered_rx(scene: &SceneGeometry, sc: &MovingScatterer, t: f64, h_rx: &mut [Complex64]) -> Result<()> {
    let amp = aperture_factor(scene).powf(0.25) * sc.coupling_amp;
    let k = scene.array.wavenumber();
    let x = sc.position(t);
    let d_sr = (scene.rx_pos - x).norm();
    for (h, p) in h_rx.iter_mut().zip(scene.unit_positions()) {
        let path = (x - p).norm() + d_sr;
        if path == 0.0 {
            return Err(Error::DegenerateGeometry("scatterer path has zero length".into()));
        }
        *h += Complex64::from_polar(amp / path, -k * path);
    }
    Ok(())
}

fn combine(h_tx: &[Complex64], h_rx: &[Complex64], cw: &Codeword) -> Complex64 {
    h_tx.iter()
        .zip(h_rx)
        .zip(cw.indices())
        .map(|((t, r), &k)| t * r * Complex64::from_polar(1.0, cw.level_phase(k)))
        .sum()
}

/// `c(t) = h_rx^T Theta h_tx`, including the scattered path when present.
pub fn equivalent_channel(scene: &SceneGeometry, cw: &Codeword, pm: &Perturbation, t: f64) -> Result<Complex64> {
    cw.check_shape(&scene.array)?;
    let (h_tx, mut h_rx) = unit_channels(scene)?;
    if let Perturbation::MovingScatterer(sc) = pm {
        sc.validate()?;
        scattered_rx(scene, sc, t, &mut h_rx)?;
    }
    Ok(combine(&h_tx, &h_rx, cw))
}

/// Periodic codeword rotation with dwell `dwell_s` per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSchedule {
    pub codewords: Vec<Codeword>,
    pub dwell_s: f64,
    pub start_offset_s: f64,
}

impl SwitchingSchedule {
    pub fn new(codewords: Vec<Codeword>, dwell_s: f64) -> Result<Self> {
        let s = Self {
            codewords,
            dwell_s,
            start_offset_s: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn fixed(cw: Codeword) -> Self {
        Self {
            codewords: vec![cw],
            dwell_s: 1.0,
            start_offset_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.codewords.is_empty() {
            return Err(invalid("codewords", "schedule is empty"));
        }
        if !(self.dwell_s > 0.0) {
            return Err(invalid("dwell_s", "must be positive"));
        }
        if !self.start_offset_s.is_finite() {
            return Err(invalid("start_offset_s", "must be finite"));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        self.dwell_s * self.codewords.len() as f64
    }

    /// Index of the codeword active at `t`.
    pub fn active_index(&self, t: f64) -> usize {
        let slots = (t - self.start_offset_s) / self.dwell_s;
        // absorb rounding of k*dt/T_s just below an integer
        let slot = (slots + 1e-9 * slots.abs().max(1.0)).floor() as i64;
        slot.rem_euclid(self.codewords.len() as i64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSeries {
    pub sample_interval_s: f64,
    pub samples: Vec<Complex64>,
    pub noise_var: f64,
    pub rng_seed: u64,
    pub dwell_s: f64,
    pub schedule_len: usize,
}

impl ChannelSeries {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|k| k as f64 * self.sample_interval_s)
    }

    /// Every sample multiplied by `g`.
    pub fn scaled(&self, g: Complex64) -> Self {
        Self {
            samples: self.samples.iter().map(|c| c * g).collect(),
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,re,im\n");
        for (t, c) in self.times().zip(&self.samples) {
            writeln!(out, "{t:.6},{:.9e},{:.9e}", c.re, c.im).unwrap();
        }
        out
    }
}

/// Noise variance giving `snr_db` against a nominal channel value.
pub fn noise_var_for_snr(c_nominal: Complex64, snr_db: f64) -> f64 {
    c_nominal.norm_sqr() / 10f64.powf(snr_db / 10.0)
}

/// Generator for sample `k`; depends only on `(seed, stream, k)`.
fn sample_rng(seed: u64, stream: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream);
    rng.set_stream(k);
    rng
}

/// Samples `c(k dt)` for `k = 0 .. round(duration / dt)`, plus CN(0, noise_var) noise.
#[allow(clippy::too_many_arguments)]
pub fn simulate_series(
    scene: &SceneGeometry,
    schedule: &SwitchingSchedule,
    pm: &Perturbation,
    dt: f64,
    duration: f64,
    noise_var: f64,
    seed: u64,
) -> Result<ChannelSeries> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    if !(duration > 0.0) {
        return Err(invalid("duration", "must be positive"));
    }
    if !(noise_var >= 0.0) {
        return Err(invalid("noise_var", "must be nonnegative"));
    }
    schedule.validate()?;
    for cw in &schedule.codewords {
        cw.check_shape(&scene.array)?;
    }
    let n = (duration / dt).round() as usize;
    if n < 2 {
        return Err(invalid("duration", "series needs at least two samples"));
    }
    let (h_tx, h_rx) = unit_channels(scene)?;
    let static_values: Option<Vec<Complex64>> = match pm {
        Perturbation::None => Some(schedule.codewords.iter().map(|cw| combine(&h_tx, &h_rx, cw)).collect()),
        Perturbation::MovingScatterer(sc) => {
            sc.validate()?;
            None
        }
    };
    let sigma = (noise_var / 2.0).sqrt();
    let samples = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * dt;
            let idx = schedule.active_index(t);
            let mut c = match (&static_values, pm) {
                (Some(v), _) => v[idx],
                (None, Perturbation::MovingScatterer(sc)) => {
                    let mut hr = h_rx.clone();
                    scattered_rx(scene, sc, t, &mut hr)?;
                    combine(&h_tx, &hr, &schedule.codewords[idx])
                }
                (None, Perturbation::None) => unreachable!(),
            };
            if noise_var > 0.0 {
                let mut rng = sample_rng(seed, NOISE_STREAM, k as u64);
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                c += Complex64::new(sigma * re, sigma * im);
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelSeries {
        sample_interval_s: dt,
        samples,
        noise_var,
        rng_seed: seed,
        dwell_s: schedule.dwell_s,
        schedule_len: schedule.codewords.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    /// Times of the rows below; starts once both estimators have a full window.
    pub times_s: Vec<f64>,
    pub delta_a: Vec<f64>,
    pub delta_r: Vec<f64>,
    pub threshold_db: f64,
    pub exceedance_fraction: f64,
    /// Sorted `(delta_a, cumulative fraction)`.
    pub cdf: Vec<(f64, f64)>,
    pub window: usize,
    pub lag: usize,
}

impl StationarityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,delta_a_db,delta_R_db\n");
        for ((t, a), r) in self.times_s.iter().zip(&self.delta_a).zip(&self.delta_r) {
            writeln!(out, "{t:.6},{a:.6},{r:.6}").unwrap();
        }
        out
    }

    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("delta_a_db,cumulative_fraction\n");
        for (v, f) in &self.cdf {
            writeln!(out, "{v:.6},{f:.6}").unwrap();
        }
        out
    }
}

/// `10 log10(|x - x_ref|^2 / |x_ref|^2)`.
pub fn normalized_difference_db(x: Complex64, x_ref: Complex64) -> f64 {
    10.0 * ((x - x_ref).norm_sqr() / x_ref.norm_sqr()).log10()
}

fn window_mean(v: impl Iterator<Item = Complex64>, w: usize) -> Complex64 {
    v.sum::<Complex64>() / w as f64
}

/// Windowed mean `a[k]` and lag-`L` autocorrelation `R[k]`, each compared
/// with its first full-window estimate.
pub fn stationarity_report(
    series: &ChannelSeries,
    window: usize,
    lag: usize,
    threshold_db: f64,
) -> Result<StationarityReport> {
    if window < 2 {
        return Err(invalid("window", "must be at least 2"));
    }
    if lag < 1 {
        return Err(invalid("lag", "must be at least 1"));
    }
    let c = &series.samples;
    if c.len() < window + lag {
        return Err(invalid(
            "series",
            format!("length {} shorter than window + lag = {}", c.len(), window + lag),
        ));
    }
    let mean_at = |k: usize| window_mean(c[k + 1 - window..=k].iter().copied(), window);
    let corr_at = |k: usize| window_mean((k + 1 - window..=k).map(|i| c[i] * c[i - lag].conj()), window);

    let a_ref = mean_at(window - 1);
    let k0 = window - 1 + lag;
    let r_ref = corr_at(k0);
    for r in [a_ref, r_ref] {
        if r.norm_sqr() < DEGENERATE_REFERENCE {
            return Err(Error::DegenerateReference(r.norm_sqr()));
        }
    }
    let rows: Vec<(f64, f64, f64)> = (k0..c.len())
        .into_par_iter()
        .map(|k| {
            (
                k as f64 * series.sample_interval_s,
                normalized_difference_db(mean_at(k), a_ref),
                normalized_difference_db(corr_at(k), r_ref),
            )
        })
        .collect();
    let delta_a: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let exceed = delta_a.iter().filter(|&&d| d > threshold_db).count();
    let mut sorted = delta_a.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let cdf = sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect();
    Ok(StationarityReport {
        times_s: rows.iter().map(|r| r.0).collect(),
        delta_r: rows.iter().map(|r| r.2).collect(),
        exceedance_fraction: exceed as f64 / n,
        delta_a,
        threshold_db,
        cdf,
        window,
        lag,
    })
}
