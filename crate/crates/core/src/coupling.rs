//! Impedance-matrix channel `beta0 h_rx^T (Z_RIS + Z_ss)^-1 h_tx` and the
//! invalid-unit experiment.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::unit_channels;
use crate::codebook::{quantize_phase, Codeword};
use crate::error::{invalid, Error, Result};
use crate::field::received_power_watts;
use crate::geometry::{ArrayConfig, SceneGeometry};

/// Solves whose 1-norm condition estimate exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Target gap used to calibrate the synthetic kernel.
pub const CALIBRATION_GAP_DB: f64 = 4.0;
pub const CALIBRATION_RATIO: f64 = 0.875;

/// Phase of the reference coupling impedance in the synthetic kernel.
pub const DEFAULT_Z_REF_DEG: f64 = 315.0;

pub type CMatrix = DMatrix<Complex64>;

/// Per-level tunable impedance `|Z| e^{-j 2 pi k / K}`.
///
/// A lone uncoupled unit then reflects with `1/Z = e^{j 2 pi k / K} / |Z|`,
/// i.e. exactly the level phase.
pub fn level_to_impedance(level: u8, bits: u8, magnitude: f64) -> Result<Complex64> {
    if bits == 0 || bits > 8 {
        return Err(invalid("bits", format!("{bits} not in 1..=8")));
    }
    let k = 1u32 << bits;
    if u32::from(level) >= k {
        return Err(invalid("level", format!("{level} not below {k}")));
    }
    if !(magnitude > 0.0) {
        return Err(invalid("magnitude", "must be positive"));
    }
    Ok(Complex64::from_polar(magnitude, -TAU * f64::from(level) / f64::from(k)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceModel {
    /// Diagonal `Z_RIS` entry for each level `0 .. K`.
    pub z_levels: Vec<Complex64>,
    pub z_ss: CMatrix,
    pub beta0: Complex64,
}

impl ImpedanceModel {
    /// Phase-matched levels of unit magnitude, `beta0 = 1`.
    pub fn phase_matched(bits: u8, z_ss: CMatrix) -> Result<Self> {
        let z_levels = (0..1u16 << bits)
            .map(|k| level_to_impedance(k as u8, bits, 1.0))
            .collect::<Result<_>>()?;
        Self::new(z_levels, z_ss, Complex64::new(1.0, 0.0))
    }

    pub fn new(z_levels: Vec<Complex64>, z_ss: CMatrix, beta0: Complex64) -> Result<Self> {
        if !z_ss.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square Z_ss".into(),
                got: format!("{}x{}", z_ss.nrows(), z_ss.ncols()),
            });
        }
        if !z_levels.len().is_power_of_two() || z_levels.len() < 2 {
            return Err(invalid("z_levels", "need 2^b entries"));
        }
        Ok(Self { z_levels, z_ss, beta0 })
    }

    pub fn units(&self) -> usize {
        self.z_ss.nrows()
    }

    /// `Z_RIS + Z_ss` for a codeword.
    pub fn system_matrix(&self, cw: &Codeword) -> Result<CMatrix> {
        if cw.levels() != self.z_levels.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} levels", self.z_levels.len()),
                got: format!("{}", cw.levels()),
            });
        }
        if cw.indices().len() != self.units() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} units", self.units()),
                got: format!("{}", cw.indices().len()),
            });
        }
        let mut a = self.z_ss.clone();
        for (i, &k) in cw.indices().iter().enumerate() {
            a[(i, i)] += self.z_levels[usize::from(k)];
        }
        Ok(a)
    }

    /// Whether `Z_ss` equals its transpose within `tol`.
    pub fn is_reciprocal(&self, tol: f64) -> bool {
        let n = self.units();
        (0..n).all(|p| (p + 1..n).all(|q| (self.z_ss[(p, q)] - self.z_ss[(q, p)]).norm() <= tol))
    }
}

fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solution of `a x = b` by partially pivoted LU, with a 1-norm condition estimate.
///
/// The estimate uses Hager's iteration, which only needs solves with `a` and
/// its adjoint against the existing factorization.
pub fn solve_guarded(a: &CMatrix, b: &DVector<Complex64>) -> Result<(DVector<Complex64>, f64)> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or(Error::Singular)?;
    if x.iter().any(|z| !z.is_finite()) {
        return Err(Error::Singular);
    }
    let l = lu.l();
    let u = lu.u();
    let (lh, uh) = (l.adjoint(), u.adjoint());
    let solve_adj = |rhs: &DVector<Complex64>| -> Result<DVector<Complex64>> {
        // a = P^T L U, so a^H z = r  <=>  U^H L^H (P z) = r
        let w = uh.solve_lower_triangular(rhs).ok_or(Error::Singular)?;
        let mut v = lh.solve_upper_triangular(&w).ok_or(Error::Singular)?;
        lu.p().inv_permute_rows(&mut v);
        Ok(v)
    };

    let mut v = DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&v).ok_or(Error::Singular)?;
        let norm_y: f64 = y.iter().map(|z| z.norm()).sum();
        if norm_y <= est {
            break;
        }
        est = norm_y;
        let xi = y.map(|z| {
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        let z = solve_adj(&xi)?;
        let (j, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, 0.0), |m, c| if c.1 > m.1 { c } else { m });
        let ztv = z.dotc(&v).re;
        if zmax <= ztv {
            break;
        }
        v = DVector::from_element(n, Complex64::new(0.0, 0.0));
        v[j] = Complex64::new(1.0, 0.0);
    }
    let cond = one_norm(a) * est;
    if !cond.is_finite() {
        return Err(Error::Singular);
    }
    if cond > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    Ok((x, cond))
}

/// `beta0 h_rx^T (Z_RIS + Z_ss)^-1 h_tx`.
pub fn coupled_channel(
    h_tx: &[Complex64],
    h_rx: &[Complex64],
    model: &ImpedanceModel,
    cw: &Codeword,
) -> Result<Complex64> {
    let n = model.units();
    if h_tx.len() != n || h_rx.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}-element channel vectors"),
            got: format!("{} and {}", h_tx.len(), h_rx.len()),
        });
    }
    let a = model.system_matrix(cw)?;
    let (x, _) = solve_guarded(&a, &DVector::from_column_slice(h_tx))?;
    let s: Complex64 = h_rx.iter().zip(x.iter()).map(|(r, x)| r * x).sum();
    Ok(model.beta0 * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    None,
    DistanceDecay,
}

/// Illustrative coupling matrix `strength z_ref e^{-j k d} / (d / lambda)` off the diagonal.
pub fn synthetic_zss(cfg: &ArrayConfig, kernel: Kernel, strength: f64, z_ref: Complex64) -> Result<CMatrix> {
    if !(strength >= 0.0) {
        return Err(invalid("strength", "must be nonnegative"));
    }
    let n = cfg.units();
    let mut z = CMatrix::zeros(n, n);
    if kernel == Kernel::None || strength == 0.0 {
        return Ok(z);
    }
    let pos = cfg.unit_positions(&nalgebra::Point3::origin());
    let (lambda, k) = (cfg.wavelength(), cfg.wavenumber());
    for p in 0..n {
        for q in p + 1..n {
            let d = (pos[p] - pos[q]).norm();
            let v = z_ref * Complex64::from_polar(strength * lambda / d, -k * d);
            z[(p, q)] = v;
            z[(q, p)] = v;
        }
    }
    Ok(z)
}

/// The default reference impedance, unit magnitude at [`DEFAULT_Z_REF_DEG`].
pub fn default_z_ref() -> Complex64 {
    Complex64::from_polar(1.0, DEFAULT_Z_REF_DEG.to_radians())
}

/// Reads `p,q,re,im` rows (0-based indices) into an `n x n` matrix.
///
/// Unlisted entries are zero; a single listed off-diagonal entry is mirrored.
/// Conflicting `(p, q)` / `(q, p)` values are rejected.
pub fn parse_zss_csv(text: &str, n: usize) -> Result<CMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == "p,q,re,im" => {}
        _ => return Err(invalid("zss", "expected `p,q,re,im` header")),
    }
    let mut z = CMatrix::zeros(n, n);
    let mut seen = vec![false; n * n];
    for (i, line) in lines {
        let bad = |why: &str| invalid("zss", format!("line {}: {why}", i + 1));
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let p: usize = f[0].trim().parse().map_err(|_| bad("bad row index"))?;
        let q: usize = f[1].trim().parse().map_err(|_| bad("bad column index"))?;
        let re: f64 = f[2].trim().parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = f[3].trim().parse().map_err(|_| bad("bad imaginary part"))?;
        if p >= n || q >= n {
            return Err(bad("index out of range"));
        }
        let v = Complex64::new(re, im);
        for (a, b) in [(p, q), (q, p)] {
            if seen[a * n + b] && z[(a, b)] != v {
                return Err(bad("conflicts with an earlier entry; Z_ss must be symmetric"));
            }
            seen[a * n + b] = true;
            z[(a, b)] = v;
        }
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Placement {
    /// First units in row-major order.
    Block,
    /// Ordered-dither ranks, spreading invalid units evenly; half gives a checkerboard.
    Interleaved,
    SeededRandom {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvalidUnitSpec {
    pub r_i: f64,
    pub placement: Placement,
    pub default_phase: f64,
}

impl InvalidUnitSpec {
    /// Units frozen at 90 degrees.
    pub fn new(r_i: f64, placement: Placement) -> Self {
        Self {
            r_i,
            placement,
            default_phase: PI / 2.0,
        }
    }
}

/// Recursive Bayer matrix of side `2^order`.
fn bayer(order: u32) -> Vec<Vec<usize>> {
    let mut b = vec![vec![0usize]];
    for _ in 0..order {
        let s = b.len();
        let mut next = vec![vec![0usize; 2 * s]; 2 * s];
        for i in 0..s {
            for j in 0..s {
                let v = 4 * b[i][j];
                next[i][j] = v;
                next[i][j + s] = v + 2;
                next[i + s][j] = v + 3;
                next[i + s][j + s] = v + 1;
            }
        }
        b = next;
    }
    b
}

/// Row-major unit indices in ordered-dither order.
fn dither_order(rows: usize, cols: usize) -> Vec<usize> {
    let order = rows.max(cols).next_power_of_two().trailing_zeros();
    let b = bayer(order);
    let mut idx: Vec<usize> = (0..rows * cols).collect();
    idx.sort_by_key(|&i| b[i / cols][i % cols]);
    idx
}

/// Units to freeze for a given count and placement.
pub fn invalid_unit_indices(rows: usize, cols: usize, count: usize, placement: Placement) -> Vec<usize> {
    let mut idx: Vec<usize> = match placement {
        Placement::Block => (0..count).collect(),
        Placement::Interleaved => dither_order(rows, cols).into_iter().take(count).collect(),
        Placement::SeededRandom { seed } => {
            let mut all: Vec<usize> = (0..rows * cols).collect();
            all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            all.truncate(count);
            all
        }
    };
    idx.sort_unstable();
    idx
}

/// `base` with `round(r_i M N)` units overwritten by the default level.
pub fn invalid_units_codeword(base: &Codeword, spec: &InvalidUnitSpec) -> Result<Codeword> {
    if !(0.0..=1.0).contains(&spec.r_i) {
        return Err(invalid("r_i", format!("{} not in [0, 1]", spec.r_i)));
    }
    let k = base.levels() as f64;
    let pos = spec.default_phase.rem_euclid(TAU) * k / TAU;
    if !spec.default_phase.is_finite() || (pos - pos.round()).abs() > 1e-9 {
        return Err(Error::OffGrid(spec.default_phase, base.bits()));
    }
    let level = quantize_phase(spec.default_phase, base.bits());
    let units = base.rows() * base.cols();
    let count = (spec.r_i * units as f64).round() as usize;
    let mut out = base.clone();
    for i in invalid_unit_indices(base.rows(), base.cols(), count, spec.placement) {
        out.indices_mut()[i] = level;
    }
    Ok(out)
}

/// Coupled-minus-uncoupled received power in dB, each relative to its own
/// `r_i = 0` value. Positive gap means the coupled model retains more power
/// than the diagonal model as units are frozen.
pub fn coupling_gap_curve(
    scene: &SceneGeometry,
    model: &ImpedanceModel,
    base: &Codeword,
    r_i_list: &[f64],
    placement: Placement,
    default_phase: f64,
) -> Result<Vec<(f64, f64)>> {
    base.check_shape(&scene.array)?;
    let (h_tx, h_rx) = unit_channels(scene)?;
    let eval = |r_i: f64| -> Result<(f64, f64)> {
        let cw = invalid_units_codeword(
            base,
            &InvalidUnitSpec {
                r_i,
                placement,
                default_phase,
            },
        )?;
        let theory = received_power_watts(scene, &cw)?;
        let coupled = coupled_channel(&h_tx, &h_rx, model, &cw)?.norm_sqr();
        Ok((theory, coupled))
    };
    let (t0, c0) = eval(0.0)?;
    r_i_list
        .iter()
        .map(|&r| {
            let (t, c) = eval(r)?;
            Ok((r, 10.0 * (c / c0).log10() - 10.0 * (t / t0).log10()))
        })
        .collect()
}

pub fn gap_curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("r_i,gap_db\n");
    for (r, g) in curve {
        writeln!(out, "{r:.6},{g:.6}").unwrap();
    }
    out
}

/// Kernel strength giving `target_db` of gap at `r_i` for the given placement.
///
/// Scans `(0, max_strength]` for the first crossing of the target, then bisects.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_strength(
    scene: &SceneGeometry,
    base: &Codeword,
    z_ref: Complex64,
    placement: Placement,
    r_i: f64,
    target_db: f64,
    max_strength: f64,
) -> Result<f64> {
    let bits = base.bits();
    let gap = |s: f64| -> Result<f64> {
        let z = synthetic_zss(&scene.array, Kernel::DistanceDecay, s, z_ref)?;
        let model = ImpedanceModel::phase_matched(bits, z)?;
        Ok(coupling_gap_curve(scene, &model, base, &[r_i], placement, PI / 2.0)?[0].1 - target_db)
    };
    const SCAN: usize = 50;
    let mut lo = (0.0, gap(0.0)?);
    let mut bracket = None;
    for i in 1..=SCAN {
        let s = max_strength * i as f64 / SCAN as f64;
        let g = gap(s)?;
        if lo.1 < 0.0 && g >= 0.0 {
            bracket = Some((lo.0, s));
            break;
        }
        lo = (s, g);
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        invalid(
            "strength",
            format!("no strength up to {max_strength} reaches {target_db} dB"),
        )
    })?;
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if gap(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(b)
}
