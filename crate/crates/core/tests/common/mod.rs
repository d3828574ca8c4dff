#![allow(dead_code)]

pub mod checks;

use num_complex::Complex64;
use otfs_dse::channel::{oracle_receive_rows, PathParams};
use otfs_dse::estimator::{estimate_channel, EstimatedCsi};
use otfs_dse::harness::SimulationFile;
use otfs_dse::modem::TransmitFrame;
use otfs_dse::{DseMode, FrameConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::PathBuf;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn load(name: &str) -> SimulationFile {
    SimulationFile::load(&config_path(name)).unwrap()
}

/// Reduced BER frame (M = 64, N = 16), noiseless.
pub fn desk_cfg() -> FrameConfig {
    FrameConfig {
        sigma_n2: 0.0,
        ..load("desk_ber.toml").frame_config()
    }
}

pub fn reference_cfg() -> FrameConfig {
    FrameConfig {
        sigma_n2: 0.0,
        ..load("reference.toml").frame_config()
    }
}

pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// One path with delay in `1..=l_max`, Doppler uniform in `[-(k_max-1), k_max-1]`
/// and a CN(0, 1) gain.
pub fn random_single_path<R: Rng + ?Sized>(cfg: &FrameConfig, rng: &mut R) -> PathParams {
    let delay = rng.random_range(1..=cfg.l_max);
    let span = cfg.k_max as f64 - 1.0;
    let doppler = if span > 0.0 { rng.random_range(-span..=span) } else { 0.0 };
    PathParams::new(delay, doppler, cn(rng, 1.0)).unwrap()
}

/// Noiseless pilot rows through the sampling oracle.
pub fn pilot_rx(cfg: &FrameConfig, paths: &[PathParams]) -> otfs_dse::Grid {
    let frame = TransmitFrame::pilots_only(cfg);
    oracle_receive_rows(&frame.tf, paths, cfg, 0..2)
}

/// Threshold for noiseless runs: a fixed fraction of the weakest true pilot echo.
pub fn noiseless_gamma(cfg: &FrameConfig, paths: &[PathParams]) -> f64 {
    let weakest = paths.iter().map(|p| p.gain.norm()).fold(f64::INFINITY, f64::min);
    0.05 * cfg.pilot.norm() * weakest
}

pub fn estimate_noiseless(cfg: &FrameConfig, paths: &[PathParams], mode: DseMode) -> EstimatedCsi {
    let rx = pilot_rx(cfg, paths);
    estimate_channel(&rx, cfg, noiseless_gamma(cfg, paths), mode).unwrap()
}

/// One line of the acceptance report.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
}
