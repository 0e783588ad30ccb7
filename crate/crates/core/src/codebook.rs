//! Phase-profile design, quantization and the binary codeword format.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Angle, ArrayConfig};

/// Relative magnitude below which a pattern-addition sum counts as zero.
const ZERO_SUM_RTOL: f64 = 1e-12;

/// Unquantized per-unit phases in `[0, 2pi)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousCodeword {
    rows: usize,
    cols: usize,
    phases: Vec<f64>,
}

impl ContinuousCodeword {
    /// Phases are wrapped into `[0, 2pi)` on the way in.
    pub fn new(rows: usize, cols: usize, phases: Vec<f64>) -> Result<Self> {
        check_len(rows, cols, phases.len())?;
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(invalid("phases", "non-finite phase"));
        }
        Ok(Self {
            rows,
            cols,
            phases: phases.into_iter().map(wrap_phase).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Phase of unit `(m, n)`, 1-based.
    pub fn at(&self, m: usize, n: usize) -> f64 {
        self.phases[(m - 1) * self.cols + (n - 1)]
    }
}

/// Quantized per-unit level indices, row-major. Level `k` means phase `2 pi k / 2^b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Codeword {
    rows: usize,
    cols: usize,
    bits: u8,
    indices: Vec<u8>,
}

impl Codeword {
    pub fn new(rows: usize, cols: usize, bits: u8, indices: Vec<u8>) -> Result<Self> {
        check_bits(bits)?;
        check_len(rows, cols, indices.len())?;
        let k = 1u16 << bits;
        if let Some(bad) = indices.iter().find(|&&i| u16::from(i) >= k) {
            return Err(invalid("indices", format!("level {bad} not below {k}")));
        }
        Ok(Self {
            rows,
            cols,
            bits,
            indices,
        })
    }

    /// Every unit at the same level (level 0 is the metal-plate codeword).
    pub fn uniform(rows: usize, cols: usize, bits: u8, level: u8) -> Result<Self> {
        Self::new(rows, cols, bits, vec![level; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        1usize << self.bits
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn indices_mut(&mut self) -> &mut [u8] {
        &mut self.indices
    }

    /// Level of unit `(m, n)`, 1-based.
    pub fn at(&self, m: usize, n: usize) -> u8 {
        self.indices[(m - 1) * self.cols + (n - 1)]
    }

    /// Phase of level `k` in radians.
    pub fn level_phase(&self, k: u8) -> f64 {
        TAU * f64::from(k) / self.levels() as f64
    }

    /// Unit phases `2 pi k / K`, row-major.
    pub fn phases(&self) -> Vec<f64> {
        self.indices.iter().map(|&k| self.level_phase(k)).collect()
    }

    pub fn dequantize(&self) -> ContinuousCodeword {
        ContinuousCodeword {
            rows: self.rows,
            cols: self.cols,
            phases: self.phases(),
        }
    }

    /// Adds `shift` levels to every unit (a global phase rotation).
    pub fn rotated(&self, shift: usize) -> Self {
        let k = self.levels();
        let mut out = self.clone();
        for i in out.indices.iter_mut() {
            *i = ((usize::from(*i) + shift) % k) as u8;
        }
        out
    }

    pub fn check_shape(&self, cfg: &ArrayConfig) -> Result<()> {
        if self.rows != cfg.rows || self.cols != cfg.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", cfg.rows, cfg.cols),
                got: format!("{}x{}", self.rows, self.cols),
            });
        }
        Ok(())
    }
}

/// One incident direction and `R` weighted exit directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub incident: Angle,
    pub exits: Vec<Angle>,
    pub weights: Vec<f64>,
}

impl BeamSpec {
    pub fn single(incident: Angle, exit: Angle) -> Self {
        Self {
            incident,
            exits: vec![exit],
            weights: vec![1.0],
        }
    }

    /// Equal-weight multi-beam spec.
    pub fn multi(incident: Angle, exits: Vec<Angle>) -> Self {
        let weights = vec![1.0; exits.len()];
        Self {
            incident,
            exits,
            weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exits.is_empty() {
            return Err(invalid("exits", "at least one exit direction is required"));
        }
        if self.weights.len() != self.exits.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", self.exits.len()),
                got: format!("{}", self.weights.len()),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights", "weights must be finite and nonnegative"));
        }
        if self.weights.iter().all(|&w| w == 0.0) {
            return Err(invalid("weights", "weights are all zero"));
        }
        Ok(())
    }
}

/// Output of pattern-addition synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiBeamDesign {
    pub codeword: ContinuousCodeword,
    /// Units where the weighted sum vanished; they were assigned phase 0.
    pub zero_sum_units: usize,
}

pub(crate) fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn check_len(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(invalid("rows/cols", "grid must be non-empty"));
    }
    if rows * cols != len {
        return Err(Error::DimensionMismatch {
            expected: format!("{rows}x{cols} = {} entries", rows * cols),
            got: format!("{len}"),
        });
    }
    Ok(())
}

fn check_bits(bits: u8) -> Result<()> {
    if bits == 0 || bits > 8 {
        return Err(invalid("bits", format!("{bits} not in 1..=8")));
    }
    Ok(())
}

fn steer(incident: &Angle, exit: &Angle, cfg: &ArrayConfig) -> ContinuousCodeword {
    let (pi, fi) = incident.direction_cosines();
    let (pr, fr) = exit.direction_cosines();
    let k = cfg.wavenumber();
    let gx = -k * (pi + pr) * cfg.unit_dx;
    let gy = -k * (fi + fr) * cfg.unit_dy;
    let mut phases = Vec::with_capacity(cfg.units());
    for m in 1..=cfg.rows {
        for n in 1..=cfg.cols {
            phases.push(wrap_phase(gx * (m as f64 - 0.5) + gy * (n as f64 - 0.5)));
        }
    }
    ContinuousCodeword {
        rows: cfg.rows,
        cols: cfg.cols,
        phases,
    }
}

/// Linear phase gradient that reflects `spec.incident` into its single exit.
pub fn design_single_beam(spec: &BeamSpec, cfg: &ArrayConfig) -> Result<ContinuousCodeword> {
    spec.validate()?;
    if spec.exits.len() != 1 {
        return Err(invalid(
            "exits",
            format!("single-beam design needs exactly 1 exit, got {}", spec.exits.len()),
        ));
    }
    cfg.validate()?;
    Ok(steer(&spec.incident, &spec.exits[0], cfg))
}

/// Pattern addition: `arg(sum_r w_r exp(j phi_r))` per unit.
///
/// Zero-weight exits are dropped; when a single exit remains its gradient is
/// returned unchanged.
pub fn design_multi_beam(spec: &BeamSpec, cfg: &ArrayConfig) -> Result<MultiBeamDesign> {
    spec.validate()?;
    cfg.validate()?;
    let terms: Vec<(f64, ContinuousCodeword)> = spec
        .exits
        .iter()
        .zip(&spec.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(e, &w)| (w, steer(&spec.incident, e, cfg)))
        .collect();
    if terms.len() == 1 {
        return Ok(MultiBeamDesign {
            codeword: terms.into_iter().next().unwrap().1,
            zero_sum_units: 0,
        });
    }
    let wsum: f64 = terms.iter().map(|(w, _)| w).sum();
    let mut zero_sum_units = 0;
    let phases = (0..cfg.units())
        .map(|i| {
            let s: Complex64 = terms
                .iter()
                .map(|(w, cw)| Complex64::from_polar(*w, cw.phases[i]))
                .sum();
            if s.norm() <= ZERO_SUM_RTOL * wsum {
                zero_sum_units += 1;
                0.0
            } else {
                wrap_phase(s.arg())
            }
        })
        .collect();
    Ok(MultiBeamDesign {
        codeword: ContinuousCodeword {
            rows: cfg.rows,
            cols: cfg.cols,
            phases,
        },
        zero_sum_units,
    })
}

/// Nearest level on the circle; exact ties go to the lower index.
pub fn quantize_phase(phase: f64, bits: u8) -> u8 {
    let k = 1i64 << bits;
    let x = wrap_phase(phase) / (TAU / k as f64);
    // ceil(x - 0.5) picks the lower level when x sits exactly on a midpoint
    ((x - 0.5).ceil() as i64).rem_euclid(k) as u8
}

pub fn quantize(cw: &ContinuousCodeword, bits: u8) -> Result<Codeword> {
    check_bits(bits)?;
    Ok(Codeword {
        rows: cw.rows,
        cols: cw.cols,
        bits,
        indices: cw.phases.iter().map(|&p| quantize_phase(p, bits)).collect(),
    })
}

/// Fraction of units carrying the same level.
pub fn similarity(a: &Codeword, b: &Codeword) -> Result<f64> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.rows, a.cols),
            got: format!("{}x{}", b.rows, b.cols),
        });
    }
    if a.bits != b.bits {
        return Err(Error::QuantizationMismatch { a: a.bits, b: b.bits });
    }
    let same = a.indices.iter().zip(&b.indices).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.indices.len() as f64)
}

const MAGIC: &[u8; 4] = b"RISC";
const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 10;

/// Serializes a codeword: `RISC`, version, `M` and `N` as u16 LE, `b`, then
/// indices packed LSB-first.
pub fn pack(cw: &Codeword) -> Result<Vec<u8>> {
    if !matches!(cw.bits, 1 | 2 | 4 | 8) {
        return Err(Error::UnsupportedBitWidth(cw.bits));
    }
    let dims = |v: usize, name| u16::try_from(v).map_err(|_| invalid(name, format!("{v} exceeds u16")));
    let (m, n) = (dims(cw.rows, "rows")?, dims(cw.cols, "cols")?);
    let b = usize::from(cw.bits);
    let mut out = Vec::with_capacity(HEADER_LEN + payload_len(cw.indices.len(), b));
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.push(cw.bits);
    let mut payload = vec![0u8; payload_len(cw.indices.len(), b)];
    for (i, &k) in cw.indices.iter().enumerate() {
        let bit = b * i;
        payload[bit / 8] |= k << (bit % 8);
    }
    out.extend_from_slice(&payload);
    Ok(out)
}

fn payload_len(units: usize, bits: usize) -> usize {
    (units * bits).div_ceil(8)
}

pub fn unpack(bytes: &[u8]) -> Result<Codeword> {
    let fmt = |offset, reason: &str| Error::Format {
        offset,
        reason: reason.to_string(),
    };
    if let Some(i) = (0..4).find(|&i| bytes.get(i) != Some(&MAGIC[i])) {
        return Err(fmt(
            i,
            if i >= bytes.len() {
                "truncated magic"
            } else {
                "bad magic"
            },
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(fmt(bytes.len(), "truncated header"));
    }
    if bytes[4] != VERSION {
        return Err(fmt(4, "unsupported version"));
    }
    let rows = usize::from(u16::from_le_bytes([bytes[5], bytes[6]]));
    let cols = usize::from(u16::from_le_bytes([bytes[7], bytes[8]]));
    if rows == 0 {
        return Err(fmt(5, "zero rows"));
    }
    if cols == 0 {
        return Err(fmt(7, "zero columns"));
    }
    let bits = bytes[9];
    if !matches!(bits, 1 | 2 | 4 | 8) {
        return Err(Error::UnsupportedBitWidth(bits));
    }
    let b = usize::from(bits);
    let units = rows * cols;
    let need = payload_len(units, b);
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < need {
        return Err(fmt(bytes.len(), "truncated payload"));
    }
    if payload.len() > need {
        return Err(fmt(HEADER_LEN + need, "trailing bytes after payload"));
    }
    let mask = ((1u16 << b) - 1) as u8;
    let indices = (0..units)
        .map(|i| {
            let bit = b * i;
            (payload[bit / 8] >> (bit % 8)) & mask
        })
        .collect();
    let used = units * b;
    if used % 8 != 0 && payload[need - 1] >> (used % 8) != 0 {
        return Err(fmt(HEADER_LEN + need - 1, "nonzero padding bits"));
    }
    Codeword::new(rows, cols, bits, indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArrayConfig;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn broadside() -> Angle {
        Angle::new(0.0, 270.0).unwrap()
    }

    fn hw() -> ArrayConfig {
        ArrayConfig::hardware_default()
    }

    #[test]
    fn specular_pair_gives_zero_phases() {
        let cw = design_single_beam(&BeamSpec::single(broadside(), Angle::new(0.0, 90.0).unwrap()), &hw()).unwrap();
        assert!(cw.phases().iter().all(|&p| p.abs() < 1e-12));
    }

    #[test]
    fn thirty_degree_gradient() {
        let cfg = hw();
        let cw = design_single_beam(&BeamSpec::single(broadside(), Angle::new(30.0, 0.0).unwrap()), &cfg).unwrap();
        let expect = (-TAU * 0.5 * 0.5 * 0.408).rem_euclid(TAU);
        assert_abs_diff_eq!(cw.at(1, 1), expect, epsilon = 1e-9);
        assert_abs_diff_eq!(cw.at(1, 1), 5.642_300_406, epsilon = 1e-8);
        for n in 1..=16 {
            assert_abs_diff_eq!(cw.at(3, n), cw.at(3, 1), epsilon = 1e-12);
        }
    }

    #[test]
    fn opposite_azimuth_negates_row_increment() {
        let cfg = hw();
        let a = design_single_beam(&BeamSpec::single(broadside(), Angle::new(30.0, 0.0).unwrap()), &cfg).unwrap();
        let b = design_single_beam(&BeamSpec::single(broadside(), Angle::new(30.0, 180.0).unwrap()), &cfg).unwrap();
        for m in 1..=16 {
            assert_abs_diff_eq!(wrap_phase(a.at(m, 1) + b.at(m, 1)), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_beam_rejects_multiple_exits() {
        let spec = BeamSpec::multi(broadside(), vec![Angle::new(10.0, 0.0).unwrap(); 2]);
        assert!(design_single_beam(&spec, &hw()).is_err());
    }

    #[test]
    fn quantize_examples() {
        for b in 1..=8 {
            assert_eq!(quantize_phase(0.0, b), 0);
        }
        assert_eq!(quantize_phase(3.0 * PI / 4.0, 2), 1);
        assert_eq!(quantize_phase(TAU - 0.01, 1), 0);
        assert_eq!(quantize_phase(PI / 4.0, 1), 0);
        assert_eq!(quantize_phase(PI, 1), 1);
        assert_eq!(quantize_phase(1.5 * PI, 1), 1);
    }

    #[test]
    fn multi_beam_degenerate_cases() {
        let cfg = hw();
        let e = Angle::new(20.0, 45.0).unwrap();
        let single = design_single_beam(&BeamSpec::single(broadside(), e), &cfg).unwrap();

        let same = design_multi_beam(&BeamSpec::multi(broadside(), vec![e, e]), &cfg).unwrap();
        assert_eq!(same.zero_sum_units, 0);
        for (a, b) in same.codeword.phases().iter().zip(single.phases()) {
            let d = wrap_phase(a - b);
            assert!(d.min(TAU - d) < 1e-12);
        }

        let other = Angle::new(10.0, 0.0).unwrap();
        let spec = BeamSpec {
            incident: broadside(),
            exits: vec![e, other],
            weights: vec![1.0, 0.0],
        };
        assert_eq!(design_multi_beam(&spec, &cfg).unwrap().codeword, single);
        assert_eq!(
            design_multi_beam(&BeamSpec::single(broadside(), e), &cfg)
                .unwrap()
                .codeword,
            single
        );
    }

    #[test]
    fn symmetric_pair_gives_binary_phases() {
        let cfg = hw();
        let spec = BeamSpec::multi(
            broadside(),
            vec![Angle::new(10.0, 0.0).unwrap(), Angle::new(10.0, 180.0).unwrap()],
        );
        let d = design_multi_beam(&spec, &cfg).unwrap();
        for &p in d.codeword.phases() {
            let to_zero = p.min(TAU - p);
            let to_pi = (p - PI).abs();
            assert!(to_zero < 1e-9 || to_pi < 1e-9, "phase {p}");
        }
        // Along n the phase is constant, as both gradients run along m only.
        for m in 1..=16 {
            let (a, b) = (d.codeword.at(m, 1), d.codeword.at(m, 16));
            let diff = wrap_phase(a - b);
            assert!(diff.min(TAU - diff) < 1e-9);
        }
    }

    #[test]
    fn weights_are_validated() {
        let cfg = hw();
        let e = Angle::new(10.0, 0.0).unwrap();
        let mut spec = BeamSpec::multi(broadside(), vec![e, e]);
        spec.weights = vec![0.0, 0.0];
        assert!(design_multi_beam(&spec, &cfg).is_err());
        spec.weights = vec![1.0, -1.0];
        assert!(design_multi_beam(&spec, &cfg).is_err());
        spec.weights = vec![1.0];
        assert!(design_multi_beam(&spec, &cfg).is_err());
    }

    #[test]
    fn similarity_examples() {
        let a = Codeword::new(2, 2, 1, vec![0, 1, 1, 0]).unwrap();
        let comp = Codeword::new(2, 2, 1, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(similarity(&a, &comp).unwrap(), 0.0);
        let two = Codeword::new(2, 2, 2, vec![0, 1, 1, 0]).unwrap();
        assert!(matches!(similarity(&a, &two), Err(Error::QuantizationMismatch { .. })));
        let wide = Codeword::new(1, 4, 1, vec![0, 1, 1, 0]).unwrap();
        assert!(matches!(similarity(&a, &wide), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pack_single_unit() {
        let cw = Codeword::new(1, 1, 2, vec![3]).unwrap();
        let bytes = pack(&cw).unwrap();
        assert_eq!(bytes, [b'R', b'I', b'S', b'C', 1, 1, 0, 1, 0, 2, 0x03]);
        assert_eq!(unpack(&bytes).unwrap(), cw);
    }

    #[test]
    fn pack_bit_layout_is_lsb_first() {
        let cw = Codeword::new(1, 5, 2, vec![1, 2, 3, 0, 3]).unwrap();
        let bytes = pack(&cw).unwrap();
        assert_eq!(&bytes[10..], &[0b00_11_10_01, 0b0000_0011]);
    }

    #[test]
    fn unpack_errors_name_offsets() {
        let mut bytes = pack(&Codeword::uniform(4, 4, 2, 1).unwrap()).unwrap();
        let mut bad = bytes.clone();
        bad[2] = b'X';
        assert_eq!(
            unpack(&bad).unwrap_err(),
            Error::Format {
                offset: 2,
                reason: "bad magic".into()
            }
        );

        bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(unpack(&bad), Err(Error::Format { offset: 4, .. })));

        bad = bytes.clone();
        bad[9] = 3;
        assert_eq!(unpack(&bad).unwrap_err(), Error::UnsupportedBitWidth(3));

        bad = bytes[..bytes.len() - 1].to_vec();
        assert!(matches!(unpack(&bad), Err(Error::Format { offset: 13, .. })));

        assert!(matches!(unpack(b"RIS"), Err(Error::Format { offset: 3, .. })));
        assert!(matches!(unpack(b"RISC\x01\x01"), Err(Error::Format { offset: 6, .. })));

        bytes.push(0);
        assert!(matches!(unpack(&bytes), Err(Error::Format { offset: 14, .. })));

        let padded = pack(&Codeword::new(1, 3, 2, vec![1, 1, 1]).unwrap()).unwrap();
        let mut bad = padded.clone();
        bad[10] |= 0b1100_0000;
        assert!(matches!(unpack(&bad), Err(Error::Format { offset: 10, .. })));
    }

    #[test]
    fn pack_rejects_odd_widths() {
        let cw = Codeword::uniform(2, 2, 3, 5).unwrap();
        assert_eq!(pack(&cw).unwrap_err(), Error::UnsupportedBitWidth(3));
    }
}
