//! Pilot-based channel parameter estimation.
//!
//! The two prefix pilot symbols carry a comb with spacing `l_max + 1`, so
//! every candidate delay `l_i` in `1..=l_max` sees its own set of `M_p`
//! samples in each pilot symbol. For each candidate the estimator
//!
//! 1. declares a path when every one of the `2 M_p` samples exceeds `Gamma`,
//! 2. takes the mean phase advance between the two pilot symbols to get
//!    the normalized Doppler, clamped to `k_max`,
//! 3. fits the gain by least squares against the pilot basis built from
//!    that Doppler.
//!
//! The estimated paths are then turned back into channel matrices with the
//! same closed-form taps as the true channel.

use crate::channel::{build_matrix, check_distinct, ChannelError, ChannelMatrix, ChannelRealization, DseMode, PathParams};
use crate::config::FrameConfig;
use crate::grid::Grid;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("candidate delay {delay} outside 1..={l_max} or past the end of the symbol")]
    DelayOutOfRange { delay: usize, l_max: usize },
    #[error("pilot reference sample {q} is zero")]
    ZeroReference { q: usize },
    #[error("received frame has {rows} rows, need both pilot symbols")]
    MissingPilots { rows: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Pilot samples seen at one candidate delay in the two pilot symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub delay: usize,
    pub r0: Vec<Complex64>,
    pub r1: Vec<Complex64>,
}

/// Strided gather `r_n(q) = R[n, q (l_max + 1) + l_i]` for `n = 0, 1`.
pub fn extract_pilot_vectors(r: &Grid, cfg: &FrameConfig, delay: usize) -> Result<PilotObservation, EstimatorError> {
    if r.rows() < 2 {
        return Err(EstimatorError::MissingPilots { rows: r.rows() });
    }
    let m_p = cfg.dims().m_p;
    let spacing = cfg.pilot_spacing();
    let out_of_range = EstimatorError::DelayOutOfRange {
        delay,
        l_max: cfg.l_max,
    };
    if delay == 0 || delay > cfg.l_max || m_p == 0 || (m_p - 1) * spacing + delay >= r.cols() {
        return Err(out_of_range);
    }
    let gather = |n: usize| (0..m_p).map(|q| r[(n, q * spacing + delay)]).collect();
    Ok(PilotObservation {
        delay,
        r0: gather(0),
        r1: gather(1),
    })
}

/// True when every pilot sample magnitude exceeds `gamma`.
pub fn detect_delay(obs: &PilotObservation, gamma: f64) -> bool {
    obs.r0.iter().chain(&obs.r1).all(|z| z.norm() > gamma)
}

/// Principal-value phase of `r1(q) / r0(q)`, in `(-pi, pi]`.
pub fn phase_difference(obs: &PilotObservation) -> Result<Vec<f64>, EstimatorError> {
    obs.r0
        .iter()
        .zip(&obs.r1)
        .enumerate()
        .map(|(q, (a, b))| {
            if a.norm_sqr() == 0.0 {
                return Err(EstimatorError::ZeroReference { q });
            }
            let angle = (b * a.conj()).arg();
            Ok(if angle == -PI { PI } else { angle })
        })
        .collect()
}

fn squint(cfg: &FrameConfig, mode: DseMode) -> f64 {
    match mode {
        DseMode::Aware => cfg.squint_factor(),
        DseMode::Ignorant => 1.0,
    }
}

/// Normalized Doppler from the mean phase step, clamped to `[-k_max, k_max]`.
pub fn extract_doppler(theta: &[f64], cfg: &FrameConfig, mode: DseMode) -> f64 {
    if theta.is_empty() {
        return 0.0;
    }
    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    let scale = (cfg.m * cfg.n) as f64 / (2.0 * PI * cfg.symbol_len() as f64 * squint(cfg, mode));
    let k_max = cfg.k_max as f64;
    (scale * mean).clamp(-k_max, k_max)
}

/// Pilot basis `psi_n(q)` for `n = 0, 1`, stacked as `[psi_0; psi_1]`.
pub fn pilot_basis(cfg: &FrameConfig, delay: usize, doppler: f64, mode: DseMode) -> Vec<Complex64> {
    let m_p = cfg.dims().m_p;
    let spacing = cfg.pilot_spacing();
    let rate = doppler / cfg.n as f64 * squint(cfg, mode) / cfg.m as f64;
    (0..2)
        .flat_map(|n| (0..m_p).map(move |q| n * cfg.symbol_len() + q * spacing + delay))
        .map(|a| cfg.pilot * Complex64::cis(2.0 * PI * a as f64 * rate))
        .collect()
}

/// Least-squares gain `psi^H r / psi^H psi`.
pub fn estimate_gain(obs: &PilotObservation, cfg: &FrameConfig, doppler: f64, mode: DseMode) -> Complex64 {
    let psi = pilot_basis(cfg, obs.delay, doppler, mode);
    let r = obs.r0.iter().chain(&obs.r1);
    let num: Complex64 = psi.iter().zip(r).map(|(p, z)| p.conj() * z).sum();
    let den: f64 = psi.iter().map(|p| p.norm_sqr()).sum();
    num / den
}

/// Estimated channel parameters and the model they were fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedCsi {
    pub entries: Vec<PathParams>,
    pub mode: DseMode,
}

impl EstimatedCsi {
    pub fn empty(mode: DseMode) -> Self {
        EstimatedCsi {
            entries: Vec::new(),
            mode,
        }
    }

    /// Perfect parameter knowledge under the given model.
    pub fn from_realization(ch: &ChannelRealization, mode: DseMode) -> Self {
        EstimatedCsi {
            entries: ch.paths().to_vec(),
            mode,
        }
    }

    pub fn delays(&self) -> Vec<usize> {
        self.entries.iter().map(|p| p.delay).collect()
    }

    /// Plain-text record: a `mode,<tag>` line followed by path lines.
    pub fn to_record(&self) -> String {
        format!("mode,{}\n{}", self.mode, crate::record::write_paths(&self.entries))
    }

    pub fn from_record(text: &str) -> Result<Self, EstimatorError> {
        let mut lines = crate::record::read_lines(text);
        let (line, header) = lines.next().ok_or(ChannelError::Record {
            line: 1,
            reason: "missing mode line".into(),
        })?;
        let mode = header
            .strip_prefix("mode,")
            .ok_or_else(|| "expected `mode,<tag>`".to_string())
            .and_then(str::parse::<DseMode>)
            .map_err(|reason| ChannelError::Record { line, reason })?;
        let entries = lines
            .map(|(line, content)| crate::record::parse_path(line, content))
            .collect::<Result<Vec<_>, _>>()?;
        check_distinct(&entries)?;
        Ok(EstimatedCsi { entries, mode })
    }
}

/// Runs detection, Doppler extraction and gain fitting over every candidate
/// delay `1..=l_max`. Candidates are independent and processed in parallel.
pub fn estimate_channel(r: &Grid, cfg: &FrameConfig, gamma: f64, mode: DseMode) -> Result<EstimatedCsi, EstimatorError> {
    let found: Vec<Option<PathParams>> = (1..=cfg.l_max)
        .into_par_iter()
        .map(|delay| {
            let obs = extract_pilot_vectors(r, cfg, delay)?;
            if !detect_delay(&obs, gamma) {
                return Ok(None);
            }
            let theta = phase_difference(&obs)?;
            let doppler = extract_doppler(&theta, cfg, mode);
            let gain = estimate_gain(&obs, cfg, doppler, mode);
            Ok(Some(PathParams { delay, doppler, gain }))
        })
        .collect::<Result<_, EstimatorError>>()?;
    Ok(EstimatedCsi {
        entries: found.into_iter().flatten().collect(),
        mode,
    })
}

/// `H_n` rebuilt from the estimated parameters in the CSI's model.
pub fn reconstruct(csi: &EstimatedCsi, cfg: &FrameConfig, n: usize) -> ChannelMatrix {
    build_matrix(&csi.entries, cfg, n, csi.mode)
}
