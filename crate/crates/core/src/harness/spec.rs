//! Experiment description and the key-value simulation file.

use crate::config::{pilot_from_boost, FrameConfig, Modulation};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Matrix route against the sampling oracle.
    OracleCheck,
    /// Squint-ignorant model error with perfect parameters.
    NmseModel,
    /// Channel estimation NMSE from the pilot symbols.
    Estimate,
    /// Full link bit error rate.
    Ber,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::OracleCheck => "oracle-check",
            ExperimentKind::NmseModel => "nmse-model",
            ExperimentKind::Estimate => "estimate",
            ExperimentKind::Ber => "ber",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle-check" => Ok(ExperimentKind::OracleCheck),
            "nmse-model" => Ok(ExperimentKind::NmseModel),
            "estimate" => Ok(ExperimentKind::Estimate),
            "ber" => Ok(ExperimentKind::Ber),
            other => Err(format!("unknown experiment kind {other:?}")),
        }
    }
}

/// BER runs above this many subcarriers need `full_scale`.
pub const DESK_SCALE_MAX_M: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Base frame; `sigma_n2` is overwritten per SNR point.
    pub cfg: FrameConfig,
    pub snr_db_list: Vec<f64>,
    pub velocity_kmh_list: Vec<f64>,
    /// Subcarrier counts swept by `nmse-model`; other kinds use `cfg.m`.
    pub m_list: Vec<usize>,
    pub n_paths: usize,
    pub trials: usize,
    pub seed: u64,
    /// Detection threshold as a multiple of `sigma_n`; 3 when unset.
    pub gamma_override: Option<f64>,
    pub full_scale: bool,
}

impl ExperimentSpec {
    pub fn gamma_sigma_mult(&self) -> f64 {
        self.gamma_override.unwrap_or(3.0)
    }

    pub fn check(&self) -> Result<(), SpecError> {
        let fail = |m: &str| Err(SpecError::Invalid(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.snr_db_list.is_empty() || self.velocity_kmh_list.is_empty() || self.m_list.is_empty() {
            return fail("sweep lists must be non-empty");
        }
        if self.n_paths == 0 {
            return fail("n_paths must be at least 1");
        }
        if self.velocity_kmh_list.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail("velocities must be finite and non-negative");
        }
        if self.snr_db_list.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return fail("SNR values must be numbers (inf means noiseless)");
        }
        if let Some(g) = self.gamma_override {
            if g.is_nan() || g < 0.0 {
                return fail("gamma multiplier must be non-negative");
            }
        }
        if self.kind == ExperimentKind::Ber && self.cfg.m > DESK_SCALE_MAX_M && !self.full_scale {
            return Err(SpecError::Invalid(format!(
                "BER with M = {} costs N M^3 per frame; pass --full-scale to run it",
                self.cfg.m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

/// The flat key-value simulation file (TOML syntax).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    pub carrier_hz: f64,
    pub subcarrier_hz: f64,
    pub m: usize,
    pub n: usize,
    pub m_cp: usize,
    pub l_max: usize,
    pub k_max: usize,
    pub pilot_power_db_over_data: f64,
    pub sigma_s2: f64,
    pub snr_db: OneOrMany<f64>,
    pub velocity_kmh: OneOrMany<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub trials: usize,
}

impl SimulationFile {
    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|message| SpecError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Frame with the first SNR value applied and the pilot derived from the boost.
    pub fn frame_config(&self) -> FrameConfig {
        let cfg = FrameConfig {
            carrier_hz: self.carrier_hz,
            subcarrier_hz: self.subcarrier_hz,
            m: self.m,
            n: self.n,
            m_cp: self.m_cp,
            l_max: self.l_max,
            k_max: self.k_max,
            pilot: pilot_from_boost(self.sigma_s2, self.pilot_power_db_over_data),
            sigma_s2: self.sigma_s2,
            sigma_n2: 0.0,
            modulation: Modulation::Qpsk,
        };
        match self.snr_db.to_vec().first() {
            Some(&snr) => cfg.with_snr_db(snr),
            None => cfg,
        }
    }

    pub fn experiment(&self, kind: ExperimentKind) -> ExperimentSpec {
        ExperimentSpec {
            kind,
            cfg: self.frame_config(),
            snr_db_list: self.snr_db.to_vec(),
            velocity_kmh_list: self.velocity_kmh.to_vec(),
            m_list: vec![self.m],
            n_paths: self.n_paths,
            trials: self.trials,
            seed: self.seed,
            gamma_override: None,
            full_scale: false,
        }
    }
}
