use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use ris_forge::channel::{simulate_series, stationarity_report, ChannelSeries, Perturbation, SwitchingSchedule};
use ris_forge::codebook::{design_multi_beam, design_single_beam, pack, quantize, unpack, BeamSpec, Codeword};
use ris_forge::coupling::{coupled_channel, default_z_ref, synthetic_zss, ImpedanceModel, Kernel};
use ris_forge::field::{beamwidth, received_power};
use ris_forge::geometry::{
    angle_of_departure, place_by_angle, unit_position, Angle, ArrayConfig, Position, SceneGeometry,
};
use ris_forge::power::{fit_linear, fit_quadratic, parse_table, XUnit, DYNAMIC_POWER_TABLE, STATIC_POWER_TABLE};

fn angle() -> impl Strategy<Value = Angle> {
    (0.0..85.0f64, 0.0..360.0f64).prop_map(|(t, p)| Angle::new(t, p).unwrap())
}

fn small_array() -> impl Strategy<Value = ArrayConfig> {
    (1usize..=4, 1usize..=4, 0.3..0.6f64, 1u8..=3).prop_map(|(m, n, d, b)| {
        ArrayConfig::hardware_default()
            .with_pitch_wavelengths(d)
            .with_bits(b)
            .resized(m, n)
    })
}

trait Resized {
    fn resized(self, m: usize, n: usize) -> Self;
}

impl Resized for ArrayConfig {
    fn resized(mut self, m: usize, n: usize) -> Self {
        self.rows = m;
        self.cols = n;
        self
    }
}

fn scene_for(array: ArrayConfig, tx: Angle, dt: f64, rx: Angle, dr: f64) -> SceneGeometry {
    SceneGeometry::from_angles(array, Position::new(0.1, -0.2, 0.0), tx, dt, rx, dr, 13.0, 10.0, 3.0).unwrap()
}

fn codeword_for(cfg: &ArrayConfig, levels: &[u8]) -> Codeword {
    let k = cfg.levels() as u8;
    let idx = (0..cfg.units()).map(|i| levels[i % levels.len()] % k).collect();
    Codeword::new(cfg.rows, cfg.cols, cfg.quant_bits, idx).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn placement_round_trips(a in angle(), dist in 0.1..20.0f64, cx in -1.0..1.0f64, cy in -1.0..1.0f64) {
        let c = Position::new(cx, cy, 0.5);
        let p = place_by_angle(&c, &a, dist).unwrap();
        let (back, r) = angle_of_departure(&c, &p).unwrap();
        prop_assert!((r - dist).abs() < 1e-12);
        prop_assert!((back.theta_deg() - a.theta_deg()).abs() < 1e-9);
        if a.theta_deg() > 1e-3 {
            let dphi = (back.phi_deg() - a.phi_deg()).rem_euclid(360.0);
            prop_assert!(dphi.min(360.0 - dphi) < 1e-9);
        }
    }

    #[test]
    fn mirror_negates_cosines(a in angle()) {
        let (p, q) = a.direction_cosines();
        let (pm, qm) = a.mirror().direction_cosines();
        prop_assert!((p + pm).abs() < 1e-12 && (q + qm).abs() < 1e-12);
        prop_assert!((a.mirror().phi_deg() - (a.phi_deg() + 180.0).rem_euclid(360.0)).abs() < 1e-9);
    }

    #[test]
    fn scene_distances_match_configuration(cfg in small_array(), tx in angle(), rx in angle(), dt in 0.2..10.0f64, dr in 0.2..10.0f64) {
        let s = scene_for(cfg, tx, dt, rx, dr);
        prop_assert!((s.d_t() - dt).abs() < 1e-12);
        prop_assert!((s.d_r() - dr).abs() < 1e-12);
    }

    #[test]
    fn mirrored_point_and_index_keep_distance(
        m in 1usize..=16, n in 1usize..=16, x in -2.0..2.0f64, y in -2.0..2.0f64, z in 0.1..3.0f64,
    ) {
        let cfg = ArrayConfig::hardware_default();
        let c = Position::new(0.3, 0.4, 0.0);
        let p = Position::new(c.x + x, c.y + y, z);
        let pm = Position::new(c.x - x, c.y - y, z);
        let u = unit_position(m, n, &cfg, &c).unwrap();
        let um = unit_position(17 - m, 17 - n, &cfg, &c).unwrap();
        prop_assert!(((p - u).norm() - (pm - um).norm()).abs() < 1e-12);
    }

    #[test]
    fn quantization_is_idempotent(phases in prop::collection::vec(0.0..TAU, 16), b in 1u8..=8) {
        let cw = ris_forge::codebook::ContinuousCodeword::new(4, 4, phases).unwrap();
        let q = quantize(&cw, b).unwrap();
        prop_assert_eq!(quantize(&q.dequantize(), b).unwrap(), q);
    }

    #[test]
    fn quantized_level_is_nearest(phase in 0.0..TAU, b in 1u8..=8) {
        let k = ris_forge::codebook::quantize_phase(phase, b);
        let levels = 1u32 << b;
        let dist = |l: u32| {
            let d = (phase - TAU * f64::from(l) / f64::from(levels)).rem_euclid(TAU);
            d.min(TAU - d)
        };
        let best = (0..levels).map(dist).fold(f64::INFINITY, f64::min);
        prop_assert!(dist(u32::from(k)) <= best + 1e-12);
    }

    #[test]
    fn single_beam_is_separable(inc in angle(), exit in angle()) {
        let cfg = ArrayConfig::hardware_default();
        let cw = design_single_beam(&BeamSpec::single(inc, exit), &cfg).unwrap();
        // phi(m, n) - phi(m, 1) - phi(1, n) + phi(1, 1) == 0 (mod 2 pi)
        for m in 1..=16 {
            for n in 1..=16 {
                let d = (cw.at(m, n) - cw.at(m, 1) - cw.at(1, n) + cw.at(1, 1)).rem_euclid(TAU);
                prop_assert!(d.min(TAU - d) < 1e-9);
            }
        }
        let multi = design_multi_beam(&BeamSpec::single(inc, exit), &cfg).unwrap();
        prop_assert_eq!(multi.codeword, cw);
    }

    #[test]
    fn codeword_files_round_trip(m in 1usize..=20, n in 1usize..=20, bsel in 0usize..4, raw in prop::collection::vec(any::<u8>(), 400)) {
        let b = [1u8, 2, 4, 8][bsel];
        let mask = ((1u16 << b) - 1) as u8;
        let idx = raw[..m * n].iter().map(|r| r & mask).collect();
        let cw = Codeword::new(m, n, b, idx).unwrap();
        prop_assert_eq!(unpack(&pack(&cw).unwrap()).unwrap(), cw);
    }

    #[test]
    fn global_phase_leaves_power_unchanged(cfg in small_array(), tx in angle(), rx in angle(), levels in prop::collection::vec(0u8..8, 16), shift in 1usize..8) {
        let s = scene_for(cfg.clone(), tx, 1.3, rx, 2.1);
        let cw = codeword_for(&cfg, &levels);
        let p0 = received_power(&s, &cw).unwrap();
        let p1 = received_power(&s, &cw.rotated(shift)).unwrap();
        prop_assert!((p0 - p1).abs() < 1e-9);
    }

    #[test]
    fn phase_term_is_reciprocal(cfg in small_array(), tx in angle(), rx in angle(), levels in prop::collection::vec(0u8..8, 16)) {
        let s = scene_for(cfg.clone(), tx, 1.7, rx, 2.4);
        let swapped = SceneGeometry { tx_pos: s.rx_pos, rx_pos: s.tx_pos, ..s.clone() };
        let cw = codeword_for(&cfg, &levels);
        prop_assert!((received_power(&s, &cw).unwrap() - received_power(&swapped, &cw).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn beamwidth_shrinks_with_size_and_pitch(n in 4usize..64, d in 0.3..1.0f64) {
        let b = beamwidth(n, d, 1.0).unwrap();
        prop_assert!(beamwidth(n + 1, d, 1.0).unwrap() < b);
        prop_assert!(beamwidth(n, d * 1.01, 1.0).unwrap() < b);
    }

    #[test]
    fn stationarity_is_scale_invariant(re in -3.0..3.0f64, im in -3.0..3.0f64, seed in any::<u64>()) {
        prop_assume!(re.hypot(im) > 1e-3);
        let samples: Vec<Complex64> = (0..120)
            .map(|k| {
                let x = (seed.wrapping_add(k as u64).wrapping_mul(0x9e3779b97f4a7c15) >> 11) as f64 / (1u64 << 53) as f64;
                Complex64::new(1.0 + 0.3 * x, 0.2 * (k as f64 * 0.1).sin())
            })
            .collect();
        let s = ChannelSeries { sample_interval_s: 1e-3, samples, noise_var: 0.0, rng_seed: seed, dwell_s: 1.0, schedule_len: 1 };
        let a = stationarity_report(&s, 20, 3, -15.0).unwrap();
        let b = stationarity_report(&s.scaled(Complex64::new(re, im)), 20, 3, -15.0).unwrap();
        for (x, y) in a.delta_a.iter().zip(&b.delta_a).chain(a.delta_r.iter().zip(&b.delta_r)) {
            prop_assert!((x - y).abs() < 1e-9 || (x.is_infinite() && x == y));
        }
    }

    #[test]
    fn quadratic_fit_beats_linear(ys in prop::collection::vec(-5.0..5.0f64, 6)) {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.2).collect();
        let q = fit_quadratic(&xs, &ys, XUnit::Fraction).unwrap();
        let l = fit_linear(&xs, &ys, XUnit::Fraction).unwrap();
        prop_assert!(q.rmse <= l.rmse + 1e-12);
    }

    #[test]
    fn fit_rescales_with_the_regressor(ys in prop::collection::vec(-5.0..5.0f64, 7)) {
        let xs: Vec<f64> = (0..7).map(|i| i as f64 / 6.0).collect();
        let xp: Vec<f64> = xs.iter().map(|x| 100.0 * x).collect();
        let a = fit_quadratic(&xs, &ys, XUnit::Fraction).unwrap();
        let b = fit_quadratic(&xp, &ys, XUnit::Percent).unwrap();
        prop_assert!((b.c1 - a.c1 / 100.0).abs() < 1e-9 * (1.0 + a.c1.abs()));
        prop_assert!((b.c2 - a.c2 / 1e4).abs() < 1e-9 * (1.0 + a.c2.abs()));
        for (x, x2) in xs.iter().zip(&xp) {
            prop_assert!((a.eval(*x) - b.eval(*x2)).abs() < 1e-9);
        }
    }
}

#[test]
fn refits_are_monotone_on_their_ranges() {
    let s = parse_table(STATIC_POWER_TABLE).unwrap().fit().unwrap();
    for i in 0..100 {
        let r = i as f64 / 100.0;
        assert!(s.eval(r + 0.01) > s.eval(r));
    }
    let d = parse_table(DYNAMIC_POWER_TABLE).unwrap().fit().unwrap();
    for f in 10..700 {
        assert!(d.eval(f as f64 + 1.0) > d.eval(f as f64));
    }
}

#[test]
fn series_do_not_depend_on_thread_count() {
    let scene = SceneGeometry::hardware_default();
    let cws: Vec<Codeword> = [26.0, 30.0, 34.0]
        .iter()
        .map(|&t| {
            let spec = BeamSpec::single(Angle::new(0.0, 270.0).unwrap(), Angle::new(t, 0.0).unwrap());
            quantize(&design_single_beam(&spec, &scene.array).unwrap(), 2).unwrap()
        })
        .collect();
    let sch = SwitchingSchedule::new(cws, 5e-3).unwrap();
    let pm = Perturbation::MovingScatterer(Default::default());
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_series(&scene, &sch, &pm, 1e-3, 0.3, 1e-15, 11).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn zss_degeneration_across_levels_on_a_small_array() {
    let cfg = ArrayConfig::hardware_default().resized(3, 3);
    let s = scene_for(
        cfg.clone(),
        Angle::new(10.0, 30.0).unwrap(),
        1.0,
        Angle::new(25.0, 200.0).unwrap(),
        2.0,
    );
    let (ht, hr) = ris_forge::channel::unit_channels(&s).unwrap();
    let m = ImpedanceModel::phase_matched(2, synthetic_zss(&cfg, Kernel::None, 0.0, default_z_ref()).unwrap()).unwrap();
    let mut scale = None;
    for seed in 0..20u8 {
        let cw = codeword_for(&cfg, &[seed, seed / 3 + 1, 2 * seed + 1, 3]);
        let pc = coupled_channel(&ht, &hr, &m, &cw).unwrap().norm_sqr();
        let p3 = ris_forge::field::received_power_watts(&s, &cw).unwrap();
        let r = pc / p3;
        let s0 = *scale.get_or_insert(r);
        assert!((r / s0 - 1.0).abs() < 1e-10);
    }
}
