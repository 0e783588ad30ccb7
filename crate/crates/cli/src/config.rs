//! Run configuration: JSON with every field optional, defaults filled in on load.

use std::path::{Path, PathBuf};

use ris_forge::coupling::{Placement, CALIBRATION_GAP_DB, CALIBRATION_RATIO, DEFAULT_Z_REF_DEG};
use ris_forge::geometry::{Angle, ArrayConfig, Position, SceneGeometry, HARDWARE_PITCH_WAVELENGTHS, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub rows: usize,
    pub cols: usize,
    pub unit_dx_m: f64,
    pub unit_dy_m: f64,
    pub carrier_hz: f64,
    pub quant_bits: u8,
    pub unit_gain_lin: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        let pitch = HARDWARE_PITCH_WAVELENGTHS * SPEED_OF_LIGHT / 3.5e9;
        Self {
            rows: 16,
            cols: 16,
            unit_dx_m: pitch,
            unit_dy_m: pitch,
            carrier_hz: 3.5e9,
            quant_bits: 2,
            unit_gain_lin: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TxSection {
    pub angle_deg: [f64; 2],
    pub dist_m: f64,
    pub gain_dbi: f64,
    pub power_dbm: f64,
}

impl Default for TxSection {
    fn default() -> Self {
        Self {
            angle_deg: [0.0, 270.0],
            dist_m: 0.5,
            gain_dbi: 13.0,
            power_dbm: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RxSection {
    pub angle_deg: [f64; 2],
    pub dist_m: f64,
    pub gain_dbi: f64,
}

impl Default for RxSection {
    fn default() -> Self {
        Self {
            angle_deg: [30.0, 0.0],
            dist_m: 3.0,
            gain_dbi: 13.0,
        }
    }
}

/// Exit directions for `design`; empty means "toward the receiver".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    pub exits_deg: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub theta_max_deg: f64,
    pub step_deg: f64,
    /// Cut azimuth; defaults to the first exit's azimuth.
    pub cut_phi_deg: Option<f64>,
    /// Signed target; defaults to the first exit's elevation.
    pub target_deg: Option<f64>,
    /// Half-width of the lobe windows; defaults to half the beamwidth.
    pub window_deg: Option<f64>,
    pub peak_floor_db: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            theta_max_deg: 60.0,
            step_deg: 0.25,
            cut_phi_deg: None,
            target_deg: None,
            window_deg: None,
            peak_floor_db: ris_forge::field::DEFAULT_PEAK_FLOOR_DB,
        }
    }
}

/// Receiver points for `focus`, on a sphere of radius `rx.dist_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FocusSection {
    pub thetas_deg: Vec<f64>,
    pub phis_deg: Vec<f64>,
}

impl Default for FocusSection {
    fn default() -> Self {
        Self {
            thetas_deg: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            phis_deg: vec![0.0, 180.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesCodebook {
    /// Sweep the scan set around the receiver.
    Scan,
    /// Hold the codeword focused on the receiver.
    Focus,
    /// Hold the uniform level-0 codeword.
    Plate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScattererSection {
    pub x1_m: [f64; 3],
    pub x2_m: [f64; 3],
    pub speed_mps: f64,
    pub coupling_amp: f64,
}

impl Default for ScattererSection {
    fn default() -> Self {
        let d = ris_forge::channel::MovingScatterer::default();
        Self {
            x1_m: [d.x1.x, d.x1.y, d.x1.z],
            x2_m: [d.x2.x, d.x2.y, d.x2.z],
            speed_mps: d.speed,
            coupling_amp: d.coupling_amp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaritySection {
    pub codebook: SeriesCodebook,
    /// Exit elevations of the scan set, on the receiver's azimuth.
    pub scan_thetas_deg: Vec<f64>,
    pub dwell_s: f64,
    pub sample_interval_s: f64,
    pub duration_s: f64,
    pub window: usize,
    pub lag: usize,
    pub threshold_db: f64,
    pub noise_var: f64,
    /// When set, overrides `noise_var` relative to the first codeword's channel.
    pub snr_db: Option<f64>,
    pub scatterer: Option<ScattererSection>,
}

impl Default for StationaritySection {
    fn default() -> Self {
        Self {
            codebook: SeriesCodebook::Scan,
            scan_thetas_deg: (26..=34).map(f64::from).collect(),
            dwell_s: 20e-3,
            sample_interval_s: ris_forge::channel::DEFAULT_SAMPLE_INTERVAL_S,
            duration_s: 2.0,
            window: ris_forge::channel::DEFAULT_WINDOW,
            lag: ris_forge::channel::DEFAULT_LAG,
            threshold_db: ris_forge::channel::DEFAULT_THRESHOLD_DB,
            noise_var: 0.0,
            snr_db: None,
            scatterer: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerTableKind {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PowerFitSection {
    /// Shipped table to fit when `table` is absent.
    pub builtin: PowerTableKind,
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub r_i: Vec<f64>,
    pub placement: Placement,
    pub default_phase_deg: f64,
    /// Fixed kernel strength; calibrated against `target_gap_db` when absent.
    pub strength: Option<f64>,
    pub target_gap_db: f64,
    pub calibration_r_i: f64,
    pub max_strength: f64,
    pub z_ref_deg: f64,
    /// Externally computed `p,q,re,im` coupling matrix; replaces the synthetic kernel.
    pub zss_csv: Option<PathBuf>,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            r_i: vec![0.0, 0.25, 0.5, 0.75, 0.875],
            placement: Placement::Interleaved,
            default_phase_deg: 90.0,
            strength: None,
            target_gap_db: CALIBRATION_GAP_DB,
            calibration_r_i: CALIBRATION_RATIO,
            max_strength: 0.1,
            z_ref_deg: DEFAULT_Z_REF_DEG,
            zss_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub array: ArraySection,
    pub ris_center_m: [f64; 3],
    pub tx: TxSection,
    pub rx: RxSection,
    pub beam: BeamSection,
    pub spectrum: SpectrumSection,
    pub focus: FocusSection,
    pub stationarity: StationaritySection,
    pub power_fit: PowerFitSection,
    pub coupling: CouplingSection,
    pub seed: u64,
    /// Not part of the config hash.
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.scene()?;
        Ok(cfg)
    }

    pub fn array(&self) -> Result<ArrayConfig, CliError> {
        let a = &self.array;
        ArrayConfig::new(
            a.rows,
            a.cols,
            a.unit_dx_m,
            a.unit_dy_m,
            a.carrier_hz,
            a.quant_bits,
            a.unit_gain_lin,
        )
        .map_err(|e| CliError::config("array", e))
    }

    pub fn tx_angle(&self) -> Result<Angle, CliError> {
        Angle::new(self.tx.angle_deg[0], self.tx.angle_deg[1]).map_err(|e| CliError::config("tx.angle_deg", e))
    }

    pub fn rx_angle(&self) -> Result<Angle, CliError> {
        Angle::new(self.rx.angle_deg[0], self.rx.angle_deg[1]).map_err(|e| CliError::config("rx.angle_deg", e))
    }

    pub fn scene(&self) -> Result<SceneGeometry, CliError> {
        let [x, y, z] = self.ris_center_m;
        SceneGeometry::from_angles(
            self.array()?,
            Position::new(x, y, z),
            self.tx_angle()?,
            self.tx.dist_m,
            self.rx_angle()?,
            self.rx.dist_m,
            self.tx.gain_dbi,
            self.rx.gain_dbi,
            self.tx.power_dbm,
        )
        .map_err(|e| CliError::config("tx/rx", e))
    }

    /// Exit directions of the beam spec, defaulting to the receiver direction.
    pub fn exits(&self) -> Result<Vec<Angle>, CliError> {
        if self.beam.exits_deg.is_empty() {
            return Ok(vec![self.rx_angle()?]);
        }
        self.beam
            .exits_deg
            .iter()
            .map(|[t, p]| Angle::new(*t, *p).map_err(|e| CliError::config("beam.exits_deg", e)))
            .collect()
    }

    /// Canonical JSON of the defaults-applied config, without `output_dir`.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_string_pretty(&c).expect("config serializes") + "\n"
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    RunConfig::parse(&text)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
