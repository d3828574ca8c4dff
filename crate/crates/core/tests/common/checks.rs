//! Seeded property checks shared by the property tests and the acceptance run.

use super::{cn, desk_cfg, pilot_rx};
use num_complex::Complex64;
use otfs_dse::channel::{build_matrix, jakes_draw, ChannelRealization};
use otfs_dse::config::kmh_to_mps;
use otfs_dse::equalizer::{lmmse_equalize, lmmse_residual, EqualizerInput};
use otfs_dse::estimator::estimate_channel;
use otfs_dse::grid::{dft_rows, Direction};
use otfs_dse::harness::output::to_csv_string;
use otfs_dse::harness::{run_experiment, ExperimentKind, ExperimentSpec};
use otfs_dse::modem::{isfft, qpsk_demap, qpsk_map, sfft, DelayDopplerGrid, TransmitFrame};
use otfs_dse::{DseMode, FrameConfig, Grid};
use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;
pub type NamedCheck = (&'static str, fn(u64) -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn desk_speed() -> f64 {
    kmh_to_mps(super::load("desk_ber.toml").velocity_kmh.to_vec()[0])
}

pub fn desk_channel(cfg: &FrameConfig, rng: &mut ChaCha8Rng) -> ChannelRealization {
    jakes_draw(cfg, desk_speed(), 3, rng).unwrap()
}

fn noisy_pilots(cfg: &FrameConfig, ch: &ChannelRealization, sigma_n2: f64, rng: &mut ChaCha8Rng) -> Grid {
    let mut rx = pilot_rx(cfg, ch.paths());
    for z in rx.as_mut_slice() {
        *z += cn(rng, sigma_n2);
    }
    rx
}

/// A global phase on the pilot (and hence on every pilot observation)
/// changes no detection, Doppler or gain estimate.
pub fn pilot_phase_invariance(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = desk_cfg().with_snr_db(rng.random_range(0.0..30.0));
    let ch = desk_channel(&cfg, &mut rng);
    let rx = noisy_pilots(&cfg, &ch, cfg.sigma_n2, &mut rng);
    let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let rot = Complex64::cis(phi);
    let rotated_cfg = FrameConfig {
        pilot: cfg.pilot * rot,
        ..cfg.clone()
    };
    let rotated_rx = Grid::from_fn(rx.rows(), rx.cols(), |r, c| rx[(r, c)] * rot);
    let gamma = 3.0 * cfg.sigma_n2.sqrt();
    for mode in [DseMode::Aware, DseMode::Ignorant] {
        let a = estimate_channel(&rx, &cfg, gamma, mode).map_err(|e| e.to_string())?;
        let b = estimate_channel(&rotated_rx, &rotated_cfg, gamma, mode).map_err(|e| e.to_string())?;
        ensure(a.delays() == b.delays(), || format!("{mode}: delays {:?} vs {:?}", a.delays(), b.delays()))?;
        for (x, y) in a.entries.iter().zip(&b.entries) {
            ensure((x.doppler - y.doppler).abs() < 1e-9, || format!("{mode}: k {} vs {}", x.doppler, y.doppler))?;
            ensure((x.gain - y.gain).norm() <= 1e-9 * x.gain.norm().max(1e-300), || {
                format!("{mode}: beta {} vs {}", x.gain, y.gain)
            })?;
        }
    }
    Ok(())
}

/// Raising the threshold only removes delays from the detected set.
pub fn gamma_monotonicity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = desk_cfg().with_snr_db(rng.random_range(-5.0..20.0));
    let ch = desk_channel(&cfg, &mut rng);
    let rx = noisy_pilots(&cfg, &ch, cfg.sigma_n2, &mut rng);
    let sigma = cfg.sigma_n2.sqrt();
    let mut gammas: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..10.0) * sigma).collect();
    gammas.sort_by(f64::total_cmp);
    let mut previous: Option<Vec<usize>> = None;
    for g in gammas {
        let set = estimate_channel(&rx, &cfg, g, DseMode::Aware).map_err(|e| e.to_string())?.delays();
        if let Some(prev) = &previous {
            ensure(set.iter().all(|d| prev.contains(d)), || format!("Gamma {g}: {set:?} not within {prev:?}"))?;
        }
        previous = Some(set);
    }
    let all = estimate_channel(&rx, &cfg, f64::INFINITY, DseMode::Aware).map_err(|e| e.to_string())?;
    ensure(all.entries.is_empty(), || "infinite threshold detected paths".into())
}

/// ISFFT/SFFT, row DFTs and QPSK mapping are lossless; the ISFFT preserves energy.
pub fn transform_round_trips(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1 << rng.random_range(0..5);
    let m = 1 << rng.random_range(1..7);
    let x = DelayDopplerGrid(Grid::from_fn(n, m, |_, _| cn(&mut rng, 1.0)));
    let tf = isfft(&x);
    let energy = x.energy();
    ensure((tf.energy() - energy).abs() <= 1e-12 * energy, || format!("isfft energy {} vs {energy}", tf.energy()))?;
    let back = sfft(&tf);
    ensure(back.max_abs_diff(&x) < 1e-12, || format!("sfft(isfft) error {}", back.max_abs_diff(&x)))?;
    let mut g = x.0.clone();
    dft_rows(&mut g, Direction::Forward);
    dft_rows(&mut g, Direction::Inverse);
    ensure(g.max_abs_diff(&x) < 1e-12, || "row DFT round trip".into())?;
    let bits: Vec<u8> = (0..2 * n * m).map(|_| rng.random_range(0..2u8)).collect();
    let sigma_s2 = rng.random_range(0.1..4.0);
    let symbols = qpsk_map(&bits, n, m, sigma_s2).map_err(|e| e.to_string())?;
    ensure(qpsk_demap(symbols.as_slice()) == bits, || "QPSK round trip".into())
}

/// The LMMSE solve meets its residual bound and the normal matrix is
/// Hermitian positive definite.
pub fn lmmse_residual_bound(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = desk_cfg();
    let ch = desk_channel(&cfg, &mut rng);
    let n = rng.random_range(2..cfg.n + 2);
    let mode = if rng.random_bool(0.5) { DseMode::Aware } else { DseMode::Ignorant };
    let h = build_matrix(ch.paths(), &cfg, n, mode);
    let r: Vec<Complex64> = (0..cfg.m).map(|_| cn(&mut rng, 1.0)).collect();
    let input = EqualizerInput {
        h_hat: &h,
        r: &r,
        sigma_n2: 10f64.powf(-rng.random_range(0.0..4.0)),
        sigma_s2: 1.0,
    };
    let (a, _) = input.normal_equations().map_err(|e| e.to_string())?;
    let asym = (&a - a.adjoint()).norm() / a.norm();
    ensure(asym < 1e-12, || format!("normal matrix asymmetry {asym:e}"))?;
    ensure(Cholesky::new(a).is_some(), || "normal matrix not positive definite".into())?;
    let s = lmmse_equalize(&input).map_err(|e| e.to_string())?;
    let res = lmmse_residual(&input, &s).map_err(|e| e.to_string())?;
    ensure(res < 1e-10, || format!("residual {res:e}"))
}

/// Zero-Doppler paths give the same circulant matrix in both modes and
/// for every symbol: a pure cyclic shift by each delay.
pub fn static_circulant(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = desk_cfg();
    let ch = jakes_draw(&cfg, 0.0, rng.random_range(1..=3), &mut rng).unwrap();
    let m = cfg.m;
    let expected = nalgebra::DMatrix::from_fn(m, m, |l, lp| {
        ch.paths()
            .iter()
            .filter(|p| (l + m - p.delay) % m == lp)
            .map(|p| p.gain)
            .sum::<Complex64>()
    });
    for n in [0, 1, rng.random_range(2..cfg.n + 2)] {
        for mode in [DseMode::Aware, DseMode::Ignorant] {
            let h = build_matrix(ch.paths(), &cfg, n, mode);
            let err = (&h - &expected).norm();
            ensure(err < 1e-12, || format!("n={n} {mode}: deviation {err:e}"))?;
        }
    }
    Ok(())
}

/// Small estimate + BER sweep used by the determinism checks.
pub fn small_sweep(kind: ExperimentKind, seed: u64) -> ExperimentSpec {
    let file = super::load("desk_ber.toml");
    ExperimentSpec {
        cfg: FrameConfig {
            m: 32,
            n: 8,
            ..file.frame_config()
        },
        snr_db_list: vec![10.0, 20.0],
        trials: 4,
        seed,
        ..file.experiment(kind)
    }
}

/// The same spec gives byte-identical CSV on one and on several threads.
pub fn parallel_determinism(seed: u64) -> Check {
    let spec = small_sweep(ExperimentKind::Ber, seed);
    let run = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let rows = pool.install(|| run_experiment(&spec)).map_err(|e| e.to_string())?;
        to_csv_string(&rows).map_err(|e| e.to_string())
    };
    let one = run(1)?;
    let three = run(3)?;
    ensure(one == three, || "CSV differs between 1 and 3 threads".into())
}

/// Every named check with its seeded entry point.
pub const ALL: &[NamedCheck] = &[
    ("pilot-phase invariance", pilot_phase_invariance),
    ("Gamma monotonicity", gamma_monotonicity),
    ("transform round trips", transform_round_trips),
    ("LMMSE residual bound", lmmse_residual_bound),
    ("static circulant", static_circulant),
    ("parallel determinism", parallel_determinism),
];

/// Sampled waveform equals the continuous waveform at the grid times.
pub fn sampling_consistency(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = FrameConfig {
        m: 16,
        n: 4,
        ..desk_cfg()
    };
    let x = DelayDopplerGrid(Grid::from_fn(cfg.n, cfg.m, |_, _| cn(&mut rng, 1.0)));
    let frame = TransmitFrame::new(&cfg, &x).map_err(|e| e.to_string())?;
    let scale = frame.samples.max_abs();
    for n in 0..cfg.n + 2 {
        for l in 0..cfg.m {
            let t = otfs_dse::modem::sample_time(&cfg, n, l);
            let s = otfs_dse::modem::eval_waveform(&cfg, &frame.tf, t);
            let e = (s - frame.samples[(n, l)]).norm();
            ensure(e < 1e-12 * scale, || format!("n={n} l={l}: {e:e}"))?;
        }
    }
    Ok(())
}
