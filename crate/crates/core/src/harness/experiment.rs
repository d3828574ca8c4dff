//! Monte-Carlo sweeps over velocity, subcarrier count and SNR.
//!
//! Every trial `t` draws its channel, data and noise from streams keyed by
//! `(seed, t)` only. The unit-variance noise of a trial is shared by all SNR
//! points (it is only rescaled), and the channel draw is shared by all
//! velocities (Doppler scales with `v`). Trials run in parallel and are
//! reduced in trial order, so the output does not depend on thread count.

use super::metrics::{ber, nmse, Summary};
use super::rng::{stream_rng, Stream};
use super::spec::{ExperimentKind, ExperimentSpec, SpecError};
use crate::channel::{
    add_awgn_in_place, build_matrix, jakes_draw, oracle_receive, oracle_receive_rows, ChannelError, ChannelMatrixSet,
    ChannelRealization, DseMode,
};
use crate::config::{kmh_to_mps, ConfigError, FrameConfig};
use crate::equalizer::detect_frame;
use crate::estimator::{estimate_channel, reconstruct, EstimatedCsi};
use crate::grid::Grid;
use crate::modem::{qpsk_map, ModemError, SampledFrame, TransmitFrame};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest matrix-vs-oracle relative deviation accepted by `oracle-check`.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("sweep point M = {m}, v = {velocity_kmh} km/h: {source}")]
    Config {
        m: usize,
        velocity_kmh: f64,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

/// One sweep point. Metric columns not produced by the experiment kind are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub m_cp: usize,
    pub velocity_kmh: f64,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub failed_trials: usize,
    pub nmse_model: Option<f64>,
    pub nmse_model_se: Option<f64>,
    pub nmse_est_dse: Option<f64>,
    pub nmse_est_dse_se: Option<f64>,
    pub nmse_est_nodse: Option<f64>,
    pub nmse_est_nodse_se: Option<f64>,
    pub ber_perfect_dse: Option<f64>,
    pub ber_perfect_dse_se: Option<f64>,
    pub ber_perfect_nodse: Option<f64>,
    pub ber_perfect_nodse_se: Option<f64>,
    pub ber_est_dse: Option<f64>,
    pub ber_est_dse_se: Option<f64>,
    pub ber_est_nodse: Option<f64>,
    pub ber_est_nodse_se: Option<f64>,
    pub oracle_max_rel_err: Option<f64>,
}

/// Per-trial metric values at one sweep point.
#[derive(Debug, Clone, Default, PartialEq)]
struct TrialMetrics {
    nmse_model: Option<f64>,
    nmse_est_dse: Option<f64>,
    nmse_est_nodse: Option<f64>,
    ber_perfect_dse: Option<f64>,
    ber_perfect_nodse: Option<f64>,
    ber_est_dse: Option<f64>,
    ber_est_nodse: Option<f64>,
    oracle_rel_err: Option<f64>,
}

type TrialResult = Result<TrialMetrics, String>;

/// Runs every sweep point of `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, HarnessError> {
    spec.check()?;
    let m_list = match spec.kind {
        ExperimentKind::NmseModel => spec.m_list.clone(),
        _ => vec![spec.cfg.m],
    };
    let mut rows = Vec::new();
    for &m in &m_list {
        for &v_kmh in &spec.velocity_kmh_list {
            let cfg = point_config(spec, m, v_kmh)?;
            let v = kmh_to_mps(v_kmh);
            let snrs: Vec<Option<f64>> = match spec.kind {
                ExperimentKind::OracleCheck | ExperimentKind::NmseModel => vec![None],
                ExperimentKind::Estimate | ExperimentKind::Ber => spec.snr_db_list.iter().copied().map(Some).collect(),
            };
            let per_trial: Vec<Vec<TrialResult>> = (0..spec.trials as u64)
                .into_par_iter()
                .map(|t| run_trial(spec, &cfg, v, t, &snrs))
                .collect::<Result<_, HarnessError>>()?;
            for (i, snr) in snrs.iter().enumerate() {
                let outcomes: Vec<&TrialResult> = per_trial.iter().map(|r| &r[i]).collect();
                rows.push(aggregate(spec.kind, &cfg, v_kmh, *snr, &outcomes));
            }
        }
    }
    Ok(rows)
}

/// Frame for one sweep point: `M` replaced and `k_max` raised to cover `v`.
pub fn point_config(spec: &ExperimentSpec, m: usize, velocity_kmh: f64) -> Result<FrameConfig, HarnessError> {
    let v = kmh_to_mps(velocity_kmh);
    let mut cfg = FrameConfig { m, ..spec.cfg.clone() };
    cfg.k_max = cfg.k_max.max(cfg.required_k_max(v));
    cfg.validate(v).map_err(|source| HarnessError::Config {
        m,
        velocity_kmh,
        source,
    })?;
    Ok(cfg)
}

fn aggregate(kind: ExperimentKind, cfg: &FrameConfig, velocity_kmh: f64, snr_db: Option<f64>, outcomes: &[&TrialResult]) -> ResultRow {
    let ok: Vec<&TrialMetrics> = outcomes.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = outcomes.len() - ok.len();
    if failed > 0 {
        let first = outcomes.iter().find_map(|r| r.as_ref().err()).cloned().unwrap_or_default();
        log::warn!("{kind} M={} v={velocity_kmh} snr={snr_db:?}: {failed} trial(s) failed, first: {first}", cfg.m);
    }
    let stat = |f: fn(&TrialMetrics) -> Option<f64>| -> (Option<f64>, Option<f64>) {
        let xs: Vec<f64> = ok.iter().filter_map(|t| f(t)).collect();
        match Summary::of(&xs) {
            Some(s) => (Some(s.mean), Some(s.std_err)),
            None => (None, None),
        }
    };
    let (nmse_model, nmse_model_se) = stat(|t| t.nmse_model);
    let (nmse_est_dse, nmse_est_dse_se) = stat(|t| t.nmse_est_dse);
    let (nmse_est_nodse, nmse_est_nodse_se) = stat(|t| t.nmse_est_nodse);
    let (ber_perfect_dse, ber_perfect_dse_se) = stat(|t| t.ber_perfect_dse);
    let (ber_perfect_nodse, ber_perfect_nodse_se) = stat(|t| t.ber_perfect_nodse);
    let (ber_est_dse, ber_est_dse_se) = stat(|t| t.ber_est_dse);
    let (ber_est_nodse, ber_est_nodse_se) = stat(|t| t.ber_est_nodse);
    let oracle_max_rel_err = ok
        .iter()
        .filter_map(|t| t.oracle_rel_err)
        .reduce(f64::max);
    ResultRow {
        kind: kind.to_string(),
        m: cfg.m,
        n: cfg.n,
        m_cp: cfg.m_cp,
        velocity_kmh,
        snr_db,
        trials: outcomes.len(),
        failed_trials: failed,
        nmse_model,
        nmse_model_se,
        nmse_est_dse,
        nmse_est_dse_se,
        nmse_est_nodse,
        nmse_est_nodse_se,
        ber_perfect_dse,
        ber_perfect_dse_se,
        ber_perfect_nodse,
        ber_perfect_nodse_se,
        ber_est_dse,
        ber_est_dse_se,
        ber_est_nodse,
        ber_est_nodse_se,
        oracle_max_rel_err,
    }
}

fn run_trial(spec: &ExperimentSpec, cfg: &FrameConfig, v: f64, trial: u64, snrs: &[Option<f64>]) -> Result<Vec<TrialResult>, HarnessError> {
    let ch = jakes_draw(cfg, v, spec.n_paths, &mut stream_rng(spec.seed, trial, Stream::Channel))?;
    let out = match spec.kind {
        ExperimentKind::OracleCheck => vec![Ok(oracle_trial(spec, cfg, &ch, trial)?)],
        ExperimentKind::NmseModel => vec![model_trial(cfg, &ch)],
        ExperimentKind::Estimate => estimate_trial(spec, cfg, &ch, trial, snrs),
        ExperimentKind::Ber => ber_trial(spec, cfg, &ch, trial, snrs)?,
    };
    Ok(out)
}

/// Random QPSK bits for the whole data grid.
pub fn trial_bits(cfg: &FrameConfig, seed: u64, trial: u64) -> Vec<u8> {
    let mut rng = stream_rng(seed, trial, Stream::Data);
    (0..2 * cfg.n * cfg.m).map(|_| rng.random_range(0..2u8)).collect()
}

/// Adds trial noise at `sigma_n2` to every row; row `n` uses stream `Noise(n)`.
pub fn add_trial_noise(rows: &mut Grid, sigma_n2: f64, seed: u64, trial: u64) {
    for n in 0..rows.rows() {
        let mut rng = stream_rng(seed, trial, Stream::Noise(n));
        add_awgn_in_place(rows.row_mut(n), sigma_n2, &mut rng);
    }
}

fn oracle_trial(spec: &ExperimentSpec, cfg: &FrameConfig, ch: &ChannelRealization, trial: u64) -> Result<TrialMetrics, HarnessError> {
    let bits = trial_bits(cfg, spec.seed, trial);
    let frame = TransmitFrame::new(cfg, &qpsk_map(&bits, cfg.n, cfg.m, cfg.sigma_s2)?)?;
    let oracle = oracle_receive(&frame.tf, ch.paths(), cfg);
    let matrix = ChannelMatrixSet::build(ch.paths(), cfg, DseMode::Aware).apply(&frame.samples);
    Ok(TrialMetrics {
        oracle_rel_err: Some(oracle.max_abs_diff(&matrix) / oracle.max_abs()),
        ..Default::default()
    })
}

fn model_nmse(cfg: &FrameConfig, ch: &ChannelRealization) -> Result<f64, String> {
    let n = cfg.n + 1;
    let exact = build_matrix(ch.paths(), cfg, n, DseMode::Aware);
    let ignorant = build_matrix(ch.paths(), cfg, n, DseMode::Ignorant);
    nmse(&ignorant, &exact).map_err(|e| e.to_string())
}

fn model_trial(cfg: &FrameConfig, ch: &ChannelRealization) -> TrialResult {
    Ok(TrialMetrics {
        nmse_model: Some(model_nmse(cfg, ch)?),
        ..Default::default()
    })
}

/// Estimates under both models and scores them against `h_true` at `n = N + 1`.
fn estimate_both(
    rx: &Grid,
    cfg: &FrameConfig,
    gamma: f64,
    h_true: &crate::channel::ChannelMatrix,
) -> Result<(EstimatedCsi, EstimatedCsi, f64, f64), String> {
    let aware = estimate_channel(rx, cfg, gamma, DseMode::Aware).map_err(|e| e.to_string())?;
    let ignorant = estimate_channel(rx, cfg, gamma, DseMode::Ignorant).map_err(|e| e.to_string())?;
    let n = cfg.n + 1;
    let nmse_aware = nmse(&reconstruct(&aware, cfg, n), h_true).map_err(|e| e.to_string())?;
    let nmse_ignorant = nmse(&reconstruct(&ignorant, cfg, n), h_true).map_err(|e| e.to_string())?;
    Ok((aware, ignorant, nmse_aware, nmse_ignorant))
}

fn snr_config(cfg: &FrameConfig, snr: Option<f64>) -> FrameConfig {
    snr.map_or_else(|| cfg.clone(), |s| cfg.with_snr_db(s))
}

fn estimate_trial(spec: &ExperimentSpec, cfg: &FrameConfig, ch: &ChannelRealization, trial: u64, snrs: &[Option<f64>]) -> Vec<TrialResult> {
    let frame = TransmitFrame::pilots_only(cfg);
    let clean = oracle_receive_rows(&frame.tf, ch.paths(), cfg, 0..2);
    let h_true = build_matrix(ch.paths(), cfg, cfg.n + 1, DseMode::Aware);
    let model = model_nmse(cfg, ch);
    snrs.iter()
        .map(|&snr| {
            let cfg = snr_config(cfg, snr);
            let mut rx = clean.clone();
            add_trial_noise(&mut rx, cfg.sigma_n2, spec.seed, trial);
            let gamma = spec.gamma_sigma_mult() * cfg.sigma_n2.sqrt();
            let (_, _, aware, ignorant) = estimate_both(&rx, &cfg, gamma, &h_true)?;
            Ok(TrialMetrics {
                nmse_model: Some(model.clone()?),
                nmse_est_dse: Some(aware),
                nmse_est_nodse: Some(ignorant),
                ..Default::default()
            })
        })
        .collect()
}

fn ber_trial(
    spec: &ExperimentSpec,
    cfg: &FrameConfig,
    ch: &ChannelRealization,
    trial: u64,
    snrs: &[Option<f64>],
) -> Result<Vec<TrialResult>, HarnessError> {
    let bits = trial_bits(cfg, spec.seed, trial);
    let frame = TransmitFrame::new(cfg, &qpsk_map(&bits, cfg.n, cfg.m, cfg.sigma_s2)?)?;
    let clean = oracle_receive(&frame.tf, ch.paths(), cfg);
    let h_true = build_matrix(ch.paths(), cfg, cfg.n + 1, DseMode::Aware);
    let model = model_nmse(cfg, ch);
    let perfect_aware = EstimatedCsi::from_realization(ch, DseMode::Aware);
    let perfect_ignorant = EstimatedCsi::from_realization(ch, DseMode::Ignorant);
    Ok(snrs
        .iter()
        .map(|&snr| {
            let cfg = snr_config(cfg, snr);
            let mut rx = clean.0.clone();
            add_trial_noise(&mut rx, cfg.sigma_n2, spec.seed, trial);
            let rx = SampledFrame(rx);
            let gamma = spec.gamma_sigma_mult() * cfg.sigma_n2.sqrt();
            let (est_aware, est_ignorant, nmse_aware, nmse_ignorant) = estimate_both(&rx, &cfg, gamma, &h_true)?;
            let link_ber = |csi: &EstimatedCsi| -> Result<f64, String> {
                let det = detect_frame(&rx, csi, &cfg).map_err(|e| format!("{} CSI: {e}", csi.mode))?;
                ber(&det.bits, &bits).map_err(|e| e.to_string())
            };
            Ok(TrialMetrics {
                nmse_model: Some(model.clone()?),
                nmse_est_dse: Some(nmse_aware),
                nmse_est_nodse: Some(nmse_ignorant),
                ber_perfect_dse: Some(link_ber(&perfect_aware)?),
                ber_perfect_nodse: Some(link_ber(&perfect_ignorant)?),
                ber_est_dse: Some(link_ber(&est_aware)?),
                ber_est_nodse: Some(link_ber(&est_ignorant)?),
                oracle_rel_err: None,
            })
        })
        .collect())
}
