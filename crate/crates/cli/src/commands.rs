use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use num_complex::Complex64;
use ris_forge::channel::{
    equivalent_channel, noise_var_for_snr, simulate_series, stationarity_report, MovingScatterer, Perturbation,
    SwitchingSchedule,
};
use ris_forge::codebook::{design_multi_beam, pack, quantize, similarity, BeamSpec, Codeword};
use ris_forge::coupling::{
    calibrate_strength, coupling_gap_curve, gap_curve_csv, parse_zss_csv, synthetic_zss, ImpedanceModel, Kernel,
};
use ris_forge::field::{angle_spectrum, beam_metrics_with_floor, beamwidth, power_map};
use ris_forge::geometry::{place_by_angle, Angle, Position, SceneGeometry};
use ris_forge::power::{parse_table, pin_power_chain, XUnit, DYNAMIC_POWER_TABLE, STATIC_POWER_TABLE};
use serde::Serialize;
use serde_json::json;

use crate::config::{PowerTableKind, RunConfig, SeriesCodebook};
use crate::report::{Manifest, OutputDir};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Codeword file plus mirror-similarity table.
    Design,
    /// Angle sweep CSV plus lobe metrics.
    Spectrum,
    /// Designed beam versus metal plate over a grid of receiver points.
    Focus,
    /// Switching-channel series and stationarity report.
    Stationarity,
    /// Quadratic power model from a measured table.
    PowerFit,
    /// Invalid-unit coupling gap curve.
    Coupling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Spectrum => "spectrum",
            Command::Focus => "focus",
            Command::Stationarity => "stationarity",
            Command::PowerFit => "power-fit",
            Command::Coupling => "coupling",
        }
    }
}

/// Runs one command, writing into `out` and returning the manifest.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<Manifest, CliError> {
    let mut dir = OutputDir::prepare(out)?;
    dir.write("config.json", cfg.canonical_json().as_bytes())?;
    match command {
        Command::Design => design(cfg, &mut dir)?,
        Command::Spectrum => spectrum(cfg, &mut dir)?,
        Command::Focus => focus(cfg, &mut dir)?,
        Command::Stationarity => stationarity(cfg, &mut dir)?,
        Command::PowerFit => power_fit(cfg, &mut dir)?,
        Command::Coupling => coupling(cfg, &mut dir)?,
    }
    dir.finish(command.name(), cfg)
}

fn beam_spec(cfg: &RunConfig) -> Result<BeamSpec, CliError> {
    let exits = cfg.exits()?;
    let weights = if cfg.beam.weights.is_empty() {
        vec![1.0; exits.len()]
    } else {
        cfg.beam.weights.clone()
    };
    Ok(BeamSpec {
        incident: cfg.tx_angle()?,
        exits,
        weights,
    })
}

/// Quantized design for the configured beam and the count of zero-sum units.
fn designed_codeword(cfg: &RunConfig, scene: &SceneGeometry) -> Result<(Codeword, usize), CliError> {
    let d = design_multi_beam(&beam_spec(cfg)?, &scene.array)?;
    Ok((quantize(&d.codeword, scene.array.quant_bits)?, d.zero_sum_units))
}

fn steer(scene: &SceneGeometry, incident: Angle, exit: Angle, bits: u8) -> Result<Codeword, CliError> {
    let d = design_multi_beam(&BeamSpec::single(incident, exit), &scene.array)?;
    Ok(quantize(&d.codeword, bits)?)
}

fn design(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let scene = cfg.scene()?;
    let spec = beam_spec(cfg)?;
    let d = design_multi_beam(&spec, &scene.array)?;
    let cw = quantize(&d.codeword, scene.array.quant_bits)?;
    out.write("codeword.risc", &pack(&cw)?)?;

    let mut grid = String::from("m,n,continuous_rad,level\n");
    for m in 1..=cw.rows() {
        for n in 1..=cw.cols() {
            writeln!(grid, "{m},{n},{:.6},{}", d.codeword.at(m, n), cw.at(m, n)).unwrap();
        }
    }
    out.write("codeword.csv", grid.as_bytes())?;

    let mut bits = vec![1, 2, scene.array.quant_bits];
    bits.sort_unstable();
    bits.dedup();
    let mut sim = String::from("exit_theta_deg,exit_phi_deg,bits,mirror_similarity\n");
    for e in &spec.exits {
        for &b in &bits {
            let a = steer(&scene, spec.incident, *e, b)?;
            let m = steer(&scene, spec.incident, e.mirror(), b)?;
            writeln!(
                sim,
                "{:.6},{:.6},{b},{:.6}",
                e.theta_deg(),
                e.phi_deg(),
                similarity(&a, &m)?
            )
            .unwrap();
        }
    }
    out.write("similarity.csv", sim.as_bytes())?;
    out.write_json(
        "design.json",
        &json!({
            "incident_deg": [spec.incident.theta_deg(), spec.incident.phi_deg()],
            "exits_deg": spec.exits.iter().map(|e| [e.theta_deg(), e.phi_deg()]).collect::<Vec<_>>(),
            "weights": spec.weights,
            "bits": cw.bits(),
            "zero_sum_units": d.zero_sum_units,
        }),
    )
}

#[derive(Serialize)]
struct Peak {
    theta_deg: f64,
    power_dbm: f64,
}

fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let scene = cfg.scene()?;
    let (cw, _) = designed_codeword(cfg, &scene)?;
    let first = cfg.exits()?[0];
    let sc = &cfg.spectrum;
    let cut = sc.cut_phi_deg.unwrap_or(first.phi_deg());
    let target = sc.target_deg.unwrap_or(first.theta_deg());
    let a = &scene.array;
    // the cut mostly runs along x (rows) or y (cols)
    let (n, pitch) = if cut.to_radians().cos().abs() >= cut.to_radians().sin().abs() {
        (a.rows, a.unit_dx)
    } else {
        (a.cols, a.unit_dy)
    };
    let bw = beamwidth(n, pitch, a.wavelength())?;
    let window = sc.window_deg.unwrap_or(bw / 2.0);
    let sp = angle_spectrum(&scene, &cw, cut, sc.theta_max_deg, sc.step_deg)?;
    out.write("spectrum.csv", sp.to_csv().as_bytes())?;
    let m = beam_metrics_with_floor(&sp, target, window, sc.peak_floor_db)?;
    out.write_json(
        "metrics.json",
        &json!({
            "cut_phi_deg": cut,
            "target_deg": target,
            "window_deg": window,
            "beamwidth_deg": bw,
            "peak_floor_db": sc.peak_floor_db,
            "main_lobe_dbm": m.main_lobe_dbm,
            "image_lobe_dbm": m.image_lobe_dbm,
            "suppression_db": m.suppression_db,
            "peaks": m.peaks.iter().map(|&(t, p)| Peak { theta_deg: t, power_dbm: p }).collect::<Vec<_>>(),
        }),
    )
}

fn focus(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let scene = cfg.scene()?;
    let (cw, _) = designed_codeword(cfg, &scene)?;
    let plate = Codeword::uniform(cw.rows(), cw.cols(), cw.bits(), 0)?;
    let mut grid = Vec::new();
    for &phi in &cfg.focus.phis_deg {
        for &theta in &cfg.focus.thetas_deg {
            let a = Angle::new(theta, phi).map_err(|e| CliError::config("focus", e))?;
            grid.push((a, place_by_angle(&scene.ris_center, &a, cfg.rx.dist_m)?));
        }
    }
    let pts: Vec<Position> = grid.iter().map(|g| g.1).collect();
    let f = power_map(&scene, &cw, &pts)?;
    let p = power_map(&scene, &plate, &pts)?;
    let mut csv = String::from("theta_deg,phi_deg,x_m,y_m,z_m,focus_dbm,plate_dbm,gain_db\n");
    for (((a, x), fd), pd) in grid.iter().zip(&f).zip(&p) {
        writeln!(
            csv,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{fd:.6},{pd:.6},{:.6}",
            a.theta_deg(),
            a.phi_deg(),
            x.x,
            x.y,
            x.z,
            fd - pd
        )
        .unwrap();
    }
    out.write("focus.csv", csv.as_bytes())
}

fn stationarity(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let scene = cfg.scene()?;
    let st = &cfg.stationarity;
    let bits = scene.array.quant_bits;
    let inc = cfg.tx_angle()?;
    let rx = cfg.rx_angle()?;
    let codewords = match st.codebook {
        SeriesCodebook::Scan => st
            .scan_thetas_deg
            .iter()
            .map(|&t| {
                let e = Angle::new(t, rx.phi_deg()).map_err(|e| CliError::config("stationarity.scan_thetas_deg", e))?;
                steer(&scene, inc, e, bits)
            })
            .collect::<Result<Vec<_>, _>>()?,
        SeriesCodebook::Focus => vec![steer(&scene, inc, rx, bits)?],
        SeriesCodebook::Plate => vec![Codeword::uniform(scene.array.rows, scene.array.cols, bits, 0)?],
    };
    let schedule = SwitchingSchedule::new(codewords, st.dwell_s)?;
    let pm = match &st.scatterer {
        None => Perturbation::None,
        Some(s) => Perturbation::MovingScatterer(MovingScatterer {
            x1: Position::new(s.x1_m[0], s.x1_m[1], s.x1_m[2]),
            x2: Position::new(s.x2_m[0], s.x2_m[1], s.x2_m[2]),
            speed: s.speed_mps,
            coupling_amp: s.coupling_amp,
        }),
    };
    let noise_var = match st.snr_db {
        Some(snr) => {
            let c: Complex64 = equivalent_channel(&scene, &schedule.codewords[0], &Perturbation::None, 0.0)?;
            noise_var_for_snr(c, snr)
        }
        None => st.noise_var,
    };
    let series = simulate_series(
        &scene,
        &schedule,
        &pm,
        st.sample_interval_s,
        st.duration_s,
        noise_var,
        cfg.seed,
    )?;
    let rep = stationarity_report(&series, st.window, st.lag, st.threshold_db)?;
    out.write("series.csv", series.to_csv().as_bytes())?;
    out.write("report.csv", rep.to_csv().as_bytes())?;
    out.write("cdf.csv", rep.cdf_csv().as_bytes())?;
    out.write_json(
        "summary.json",
        &json!({
            "exceedance_fraction": rep.exceedance_fraction,
            "threshold_db": rep.threshold_db,
            "W": rep.window,
            "L": rep.lag,
            "T_s": st.dwell_s,
        }),
    )
}

fn power_fit(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let text = match &cfg.power_fit.table {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => match cfg.power_fit.builtin {
            PowerTableKind::Static => STATIC_POWER_TABLE.to_string(),
            PowerTableKind::Dynamic => DYNAMIC_POWER_TABLE.to_string(),
        },
    };
    let table = parse_table(&text)?;
    let model = table.fit()?;
    out.write_json("model.json", &model)?;
    // A conduction-ratio table spanning all-off to all-on also gives the per-diode chain.
    if table.x_unit == XUnit::Fraction {
        let at = |x: f64| table.xs.iter().position(|&v| v == x).map(|i| table.ys[i]);
        if let (Some(idle), Some(full)) = (at(0.0), at(1.0)) {
            let a = &cfg.array;
            let diodes = (a.rows * a.cols * usize::from(a.quant_bits)) as u32;
            out.write_json("pin_chain.json", &pin_power_chain(full, idle, diodes, 0.4, 400.0)?)?;
        }
    }
    Ok(())
}

fn coupling(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let scene = cfg.scene()?;
    let (base, _) = designed_codeword(cfg, &scene)?;
    let c = &cfg.coupling;
    let z_ref = Complex64::from_polar(1.0, c.z_ref_deg.to_radians());
    let default_phase = c.default_phase_deg.to_radians();
    let (z_ss, kernel, strength, calibrated) = match &c.zss_csv {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            (parse_zss_csv(&text, scene.array.units())?, "external", None, false)
        }
        None => {
            let (s, cal) = match c.strength {
                Some(s) => (s, false),
                None => (
                    calibrate_strength(
                        &scene,
                        &base,
                        z_ref,
                        c.placement,
                        c.calibration_r_i,
                        c.target_gap_db,
                        c.max_strength,
                    )?,
                    true,
                ),
            };
            (
                synthetic_zss(&scene.array, Kernel::DistanceDecay, s, z_ref)?,
                "distance_decay",
                Some(s),
                cal,
            )
        }
    };
    let model = ImpedanceModel::phase_matched(base.bits(), z_ss)?;
    let curve = coupling_gap_curve(&scene, &model, &base, &c.r_i, c.placement, default_phase)?;
    out.write("gap_curve.csv", gap_curve_csv(&curve).as_bytes())?;
    out.write_json(
        "coupling.json",
        &json!({
            "kernel": kernel,
            "strength": strength,
            "calibrated": calibrated,
            "z_ref_deg": c.z_ref_deg,
            "placement": c.placement,
            "default_phase_deg": default_phase * 180.0 / PI,
        }),
    )
}
