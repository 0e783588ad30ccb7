//! Quadratic power-consumption fits and the per-diode power chain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Static power versus conducting-diode fraction, as shipped with the crate.
pub const STATIC_POWER_TABLE: &str = include_str!("../data/static_power.csv");
/// Dynamic power versus switching frequency in kHz.
pub const DYNAMIC_POWER_TABLE: &str = include_str!("../data/dynamic_power.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XUnit {
    Fraction,
    Percent,
    #[serde(rename = "kHz")]
    KHz,
    #[serde(rename = "Hz")]
    Hz,
}

impl XUnit {
    pub fn name(self) -> &'static str {
        match self {
            XUnit::Fraction => "fraction",
            XUnit::Percent => "percent",
            XUnit::KHz => "kHz",
            XUnit::Hz => "Hz",
        }
    }
}

impl fmt::Display for XUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for XUnit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fraction" => Ok(XUnit::Fraction),
            "percent" | "%" => Ok(XUnit::Percent),
            "kHz" => Ok(XUnit::KHz),
            "Hz" => Ok(XUnit::Hz),
            other => Err(invalid("x_unit", format!("unknown unit `{other}`"))),
        }
    }
}

/// `y = c0 + c1 x + c2 x^2`, with `x` in `x_unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModel {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub x_unit: XUnit,
    /// Root-mean-square residual on the fitted data (0 for hand-built models).
    pub rmse: f64,
}

impl QuadraticModel {
    pub fn new(c0: f64, c1: f64, c2: f64, x_unit: XUnit) -> Self {
        Self {
            c0,
            c1,
            c2,
            x_unit,
            rmse: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    /// `dy/dx` at `x`, in y per `x_unit`.
    pub fn slope(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * x
    }
}

/// Least-squares quadratic through the 3x3 normal equations.
///
/// The regressor is centred and scaled before forming the equations and the
/// coefficients are mapped back, which keeps `Hz`-scale data well conditioned.
pub fn fit_quadratic(xs: &[f64], ys: &[f64], x_unit: XUnit) -> Result<QuadraticModel> {
    check_data(xs, ys)?;
    if distinct(xs) < 3 {
        return Err(Error::RankDeficient(format!(
            "{} distinct x values; need 3",
            distinct(xs)
        )));
    }
    let (mu, s) = centre_scale(xs);
    let us: Vec<f64> = xs.iter().map(|x| (x - mu) / s).collect();
    let p = |k: i32| us.iter().map(|u| u.powi(k)).sum::<f64>();
    let q = |k: i32| us.iter().zip(ys).map(|(u, y)| u.powi(k) * y).sum::<f64>();
    let a = [[p(0), p(1), p(2)], [p(1), p(2), p(3)], [p(2), p(3), p(4)]];
    let b = [q(0), q(1), q(2)];
    let [d0, d1, d2] = solve3(a, b)?;
    // y = d0 + d1 (x - mu)/s + d2 (x - mu)^2 / s^2
    let (e1, e2) = (d1 / s, d2 / (s * s));
    let mut m = QuadraticModel::new(d0 - e1 * mu + e2 * mu * mu, e1 - 2.0 * e2 * mu, e2, x_unit);
    m.rmse = rmse(xs, ys, |x| m.eval(x));
    Ok(m)
}

/// Least-squares line, returned as a quadratic with `c2 = 0`.
pub fn fit_linear(xs: &[f64], ys: &[f64], x_unit: XUnit) -> Result<QuadraticModel> {
    check_data(xs, ys)?;
    if distinct(xs) < 2 {
        return Err(Error::RankDeficient("need 2 distinct x values".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let mut m = QuadraticModel::new(my - slope * mx, slope, 0.0, x_unit);
    m.rmse = rmse(xs, ys, |x| m.eval(x));
    Ok(m)
}

fn check_data(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} y values", xs.len()),
            got: format!("{}", ys.len()),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(invalid("data", "non-finite value"));
    }
    Ok(())
}

fn distinct(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn centre_scale(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let s = xs.iter().map(|x| (x - mu).abs()).fold(0.0, f64::max);
    (mu, if s > 0.0 { s } else { 1.0 })
}

fn rmse(xs: &[f64], ys: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    (xs.iter().zip(ys).map(|(x, y)| (y - f(*x)).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Cramer's rule.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let d = det3(&a);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).powi(3);
    if d.abs() <= 1e-12 * scale {
        return Err(Error::RankDeficient(format!("normal matrix determinant {d:e}")));
    }
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let mut aj = a;
        for i in 0..3 {
            aj[i][j] = b[i];
        }
        *o = det3(&aj) / d;
    }
    Ok(out)
}

/// Static power in watts at conducting fraction `r`.
pub fn static_power(model: &QuadraticModel, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(invalid("r", format!("{r} not in [0, 1]")));
    }
    let x = match model.x_unit {
        XUnit::Fraction => r,
        XUnit::Percent => 100.0 * r,
        other => {
            return Err(Error::UnitMismatch {
                model: other.name(),
                supplied: "fraction",
            })
        }
    };
    Ok(model.eval(x))
}

/// Dynamic power in watts at switching frequency `f_khz`.
pub fn dynamic_power(model: &QuadraticModel, f_khz: f64) -> Result<f64> {
    if !(f_khz >= 0.0) {
        return Err(invalid("f_khz", "must be nonnegative"));
    }
    let x = match model.x_unit {
        XUnit::KHz => f_khz,
        XUnit::Hz => 1e3 * f_khz,
        other => {
            return Err(Error::UnitMismatch {
                model: other.name(),
                supplied: "kHz",
            })
        }
    };
    Ok(model.eval(x))
}

/// A measured `x,y` table with declared units.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub x_unit: XUnit,
    pub y_unit: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PowerTable {
    pub fn fit(&self) -> Result<QuadraticModel> {
        fit_quadratic(&self.xs, &self.ys, self.x_unit)
    }
}

/// Parses `# x_unit=<u> y_unit=<u> ...`, an `x,y` header, then data rows.
pub fn parse_table(text: &str) -> Result<PowerTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| invalid("table", "empty input"))?;
    let comment = first
        .strip_prefix('#')
        .ok_or_else(|| invalid("table", "line 1: expected a `#` unit comment"))?;
    let field = |key: &str| {
        comment
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .map(str::to_string)
    };
    let x_unit: XUnit = field("x_unit")
        .ok_or_else(|| invalid("table", "missing x_unit"))?
        .parse()?;
    let y_unit = field("y_unit").ok_or_else(|| invalid("table", "missing y_unit"))?;
    let (_, header) = lines.next().ok_or_else(|| invalid("table", "missing `x,y` header"))?;
    if header.trim() != "x,y" {
        return Err(invalid(
            "table",
            format!("expected `x,y` header, found `{}`", header.trim()),
        ));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        let bad = || invalid("table", format!("line {}: expected two numbers", i + 1));
        let (x, y) = line.trim().split_once(',').ok_or_else(bad)?;
        xs.push(x.trim().parse::<f64>().map_err(|_| bad())?);
        ys.push(y.trim().parse::<f64>().map_err(|_| bad())?);
    }
    if xs.is_empty() {
        return Err(invalid("table", "no data rows"));
    }
    Ok(PowerTable { x_unit, y_unit, xs, ys })
}

/// Power drawn per conducting diode and its current-limiting resistor, in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinPowerChain {
    pub p_full_w: f64,
    pub p_idle_w: f64,
    pub diode_count: u32,
    pub v_res: f64,
    pub r_ohm: f64,
    /// Diode plus resistor: `(P_full - P_idle) / count`.
    pub p_pin_res_mw: f64,
    /// Resistor alone: `V^2 / R`.
    pub p_res_mw: f64,
    /// Diode alone.
    pub p_pin_mw: f64,
}

pub fn pin_power_chain(
    p_full_w: f64,
    p_idle_w: f64,
    diode_count: u32,
    v_res: f64,
    r_ohm: f64,
) -> Result<PinPowerChain> {
    if !(p_full_w > p_idle_w) {
        return Err(invalid("p_full_w", "must exceed p_idle_w"));
    }
    if diode_count == 0 {
        return Err(invalid("diode_count", "must be at least 1"));
    }
    if !(r_ohm > 0.0) {
        return Err(invalid("r_ohm", "must be positive"));
    }
    if !v_res.is_finite() {
        return Err(invalid("v_res", "must be finite"));
    }
    let p_pin_res_mw = (p_full_w - p_idle_w) / f64::from(diode_count) * 1000.0;
    let p_res_mw = v_res * v_res / r_ohm * 1000.0;
    Ok(PinPowerChain {
        p_full_w,
        p_idle_w,
        diode_count,
        v_res,
        r_ohm,
        p_pin_res_mw,
        p_res_mw,
        p_pin_mw: p_pin_res_mw - p_res_mw,
    })
}
