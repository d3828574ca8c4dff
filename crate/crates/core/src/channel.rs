//! Multipath linear time-variant channel with Doppler squint.
//!
//! Each path `i` has an integer delay index `l_i`, a real normalized Doppler
//! `k_i = nu_i N T` and a complex gain `beta_i`. The received baseband signal
//! is `r(t) = sum_i beta_i e^{j 2 pi nu_i t} s(t - tau_i + t / p_i)` with the
//! mobility parameter `p_i = f_c / nu_i`; the `t / p_i` term is the squint.
//!
//! Two routes to the sampled output are provided and must agree:
//! [`oracle_receive`] samples the continuous expression above directly, and
//! [`build_matrix`] evaluates the closed-form per-symbol taps
//! `h_n^i[l, l']` so that `R[n, .] = H_n S[n, .]`.

use crate::config::{FrameConfig, SPEED_OF_LIGHT};
use crate::grid::Grid;
use crate::modem::{eval_waveform, sample_time, SampledFrame, TimeFrequencyGrid};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub type ChannelMatrix = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("cannot draw {n_paths} distinct delays from 1..={l_max}")]
    TooManyPaths { n_paths: usize, l_max: usize },
    #[error("channel needs at least one path")]
    Empty,
    #[error("delay index {0} used by more than one path")]
    DuplicateDelay(usize),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("record line {line}: {reason}")]
    Record { line: usize, reason: String },
}

/// Whether the squint is modelled (`Aware`) or the frequency-independent
/// Doppler limit `p_i -> infinity` is used (`Ignorant`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DseMode {
    Aware,
    Ignorant,
}

impl DseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DseMode::Aware => "dse-aware",
            DseMode::Ignorant => "dse-ignorant",
        }
    }
}

impl fmt::Display for DseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "dse-aware" | "exact" => Ok(DseMode::Aware),
            "dse-ignorant" => Ok(DseMode::Ignorant),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    /// Delay index `l_i`, at least 1.
    pub delay: usize,
    /// Normalized Doppler `k_i`.
    pub doppler: f64,
    /// Complex gain `beta_i`, carrier phase `e^{-j 2 pi f_c tau_i}` included.
    pub gain: Complex64,
}

impl PathParams {
    pub fn new(delay: usize, doppler: f64, gain: Complex64) -> Result<Self, ChannelError> {
        if delay == 0 {
            return Err(ChannelError::InvalidPath("delay index must be at least 1".into()));
        }
        if !doppler.is_finite() || !gain.re.is_finite() || !gain.im.is_finite() {
            return Err(ChannelError::InvalidPath("non-finite parameter".into()));
        }
        Ok(PathParams { delay, doppler, gain })
    }

    /// Doppler shift at the carrier, `nu_i = k_i delta_f / N`.
    pub fn nu(&self, cfg: &FrameConfig) -> f64 {
        self.doppler * cfg.subcarrier_hz / cfg.n as f64
    }

    /// `1 / p_i = nu_i / f_c`; zero for a static path.
    pub fn inv_mobility(&self, cfg: &FrameConfig) -> f64 {
        self.nu(cfg) / cfg.carrier_hz
    }

    /// `p_i = f_c / nu_i`, or `None` for a static path.
    pub fn mobility(&self, cfg: &FrameConfig) -> Option<f64> {
        (self.doppler != 0.0).then(|| 1.0 / self.inv_mobility(cfg))
    }

    /// Radial speed `v_i = nu_i c / f_c` in m/s.
    pub fn speed(&self, cfg: &FrameConfig) -> f64 {
        self.nu(cfg) * SPEED_OF_LIGHT / cfg.carrier_hz
    }

    /// Delay in seconds, `l_i / (M delta_f)`.
    pub fn tau(&self, cfg: &FrameConfig) -> f64 {
        self.delay as f64 / (cfg.m as f64 * cfg.subcarrier_hz)
    }
}

/// A full multipath draw: distinct delays, at least one path.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    paths: Vec<PathParams>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<PathParams>) -> Result<Self, ChannelError> {
        if paths.is_empty() {
            return Err(ChannelError::Empty);
        }
        check_distinct(&paths)?;
        Ok(ChannelRealization { paths })
    }

    pub fn paths(&self) -> &[PathParams] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Checks every path against the frame's delay and Doppler limits.
    pub fn check_limits(&self, cfg: &FrameConfig) -> Result<(), ChannelError> {
        for p in &self.paths {
            if p.delay > cfg.l_max {
                return Err(ChannelError::InvalidPath(format!(
                    "delay {} exceeds l_max {}",
                    p.delay, cfg.l_max
                )));
            }
            if p.doppler.abs() > cfg.k_max as f64 {
                return Err(ChannelError::InvalidPath(format!(
                    "Doppler {} exceeds k_max {}",
                    p.doppler, cfg.k_max
                )));
            }
        }
        Ok(())
    }

    /// Plain-text record, one `l_i,k_i,re,im` line per path.
    pub fn to_record(&self) -> String {
        crate::record::write_paths(&self.paths)
    }

    pub fn from_record(text: &str) -> Result<Self, ChannelError> {
        Self::new(crate::record::read_paths(text)?)
    }
}

pub(crate) fn check_distinct(paths: &[PathParams]) -> Result<(), ChannelError> {
    for (i, p) in paths.iter().enumerate() {
        if paths[..i].iter().any(|q| q.delay == p.delay) {
            return Err(ChannelError::DuplicateDelay(p.delay));
        }
    }
    Ok(())
}

/// Draws `n_paths` paths with Jakes Doppler `nu_max cos(theta)`,
/// `beta ~ CN(0, 1 / n_paths)` and distinct delays from `1..=l_max`.
pub fn jakes_draw<R: Rng + ?Sized>(
    cfg: &FrameConfig,
    v_max: f64,
    n_paths: usize,
    rng: &mut R,
) -> Result<ChannelRealization, ChannelError> {
    if n_paths == 0 {
        return Err(ChannelError::Empty);
    }
    if n_paths > cfg.l_max {
        return Err(ChannelError::TooManyPaths {
            n_paths,
            l_max: cfg.l_max,
        });
    }
    let nu_max = cfg.nu_max(v_max);
    let delays = rand::seq::index::sample(rng, cfg.l_max, n_paths);
    let std = (0.5 / n_paths as f64).sqrt();
    let paths = delays
        .iter()
        .map(|d| {
            let theta = rng.random_range(-PI..=PI);
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            PathParams {
                delay: d + 1,
                doppler: cfg.k_of_nu(nu_max * theta.cos()),
                gain: Complex64::new(re * std, im * std),
            }
        })
        .collect();
    ChannelRealization::new(paths)
}

/// `sin(pi x) / (M sin(pi x / M))` at `x = d + eps` with `d` an integer.
///
/// The numerator is evaluated as `(-1)^d sin(pi eps)` so that large `d`
/// loses no precision; near `x in M Z` the removable singularity is replaced
/// by `cos(pi x) / cos(pi x / M)`.
pub fn dirichlet(d: i64, eps: f64, m: usize) -> f64 {
    let mf = m as f64;
    let x = d as f64 + eps;
    let parity = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let den = (PI * x / mf).sin();
    if den.abs() < 1e-9 {
        parity * (PI * eps).cos() / (PI * x / mf).cos()
    } else {
        parity * (PI * eps).sin() / (mf * den)
    }
}

/// Row-dependent parts of a path's taps at `(n, l)`: the Doppler phase
/// factor and the fractional offset `eps = (n (M + M_CP) + l) / p_i`.
fn row_terms(path: &PathParams, cfg: &FrameConfig, n: usize, l: usize, mode: DseMode) -> (Complex64, f64) {
    let a = (n * cfg.symbol_len() + l) as f64;
    let base = a / cfg.m as f64 * path.doppler / cfg.n as f64;
    match mode {
        DseMode::Aware => (
            path.gain * Complex64::cis(2.0 * PI * base * cfg.squint_factor()),
            a * path.inv_mobility(cfg),
        ),
        DseMode::Ignorant => (path.gain * Complex64::cis(2.0 * PI * base), 0.0),
    }
}

fn tap_from_terms(scaled: Complex64, eps: f64, d: i64, m: usize, mode: DseMode) -> Complex64 {
    match mode {
        DseMode::Ignorant => {
            if d.rem_euclid(m as i64) == 0 {
                scaled
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        DseMode::Aware => {
            if eps == 0.0 {
                // Static path: exact delta at d = 0 mod M.
                return tap_from_terms(scaled, 0.0, d, m, DseMode::Ignorant);
            }
            let mf = m as f64;
            let phase = Complex64::cis(PI * (mf - 1.0) / mf * d as f64);
            scaled * phase * dirichlet(d, eps, m)
        }
    }
}

/// Single-path tap `h_n^i[l, l']` in the squint-aware form.
pub fn dse_tap(path: &PathParams, cfg: &FrameConfig, n: usize, l: usize, l_prime: usize) -> Complex64 {
    tap(path, cfg, n, l, l_prime, DseMode::Aware)
}

/// Single-path tap in either model.
pub fn tap(path: &PathParams, cfg: &FrameConfig, n: usize, l: usize, l_prime: usize, mode: DseMode) -> Complex64 {
    let (scaled, eps) = row_terms(path, cfg, n, l, mode);
    let d = l as i64 - l_prime as i64 - path.delay as i64;
    tap_from_terms(scaled, eps, d, cfg.m, mode)
}

/// `H_n` for OFDM symbol `n`: the sum of all paths' taps.
pub fn build_matrix(paths: &[PathParams], cfg: &FrameConfig, n: usize, mode: DseMode) -> ChannelMatrix {
    let m = cfg.m;
    let mut h = ChannelMatrix::zeros(m, m);
    for path in paths {
        for l in 0..m {
            let (scaled, eps) = row_terms(path, cfg, n, l, mode);
            if mode == DseMode::Ignorant || eps == 0.0 {
                let col = (l as i64 - path.delay as i64).rem_euclid(m as i64) as usize;
                h[(l, col)] += scaled;
                continue;
            }
            for lp in 0..m {
                let d = l as i64 - lp as i64 - path.delay as i64;
                h[(l, lp)] += tap_from_terms(scaled, eps, d, m, mode);
            }
        }
    }
    h
}

/// Per-symbol channel matrices for a whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrixSet {
    pub mode: DseMode,
    pub matrices: Vec<ChannelMatrix>,
}

impl ChannelMatrixSet {
    /// Builds `H_n` for `n = 0..N+2`, in parallel over symbols.
    pub fn build(paths: &[PathParams], cfg: &FrameConfig, mode: DseMode) -> Self {
        let matrices = (0..cfg.n + 2)
            .into_par_iter()
            .map(|n| build_matrix(paths, cfg, n, mode))
            .collect();
        ChannelMatrixSet { mode, matrices }
    }

    /// `R[n, .] = H_n S[n, .]` for every symbol.
    pub fn apply(&self, samples: &SampledFrame) -> SampledFrame {
        assert_eq!(samples.rows(), self.matrices.len());
        let m = samples.cols();
        let mut out = Grid::zeros(samples.rows(), m);
        for (n, h) in self.matrices.iter().enumerate() {
            let r = h * DVector::from_column_slice(samples.row(n));
            out.row_mut(n).copy_from_slice(r.as_slice());
        }
        SampledFrame(out)
    }
}

/// `H_n s` for one symbol row.
pub fn apply_matrix(h: &ChannelMatrix, row: &[Complex64]) -> Vec<Complex64> {
    (h * DVector::from_column_slice(row)).as_slice().to_vec()
}

/// Samples the received waveform `R[n, l] = r(n T_u + l T / M)` by direct
/// evaluation of the continuous channel output. No ISI assumption is made:
/// `s(.)` is evaluated wherever the delayed, squinted time lands.
pub fn oracle_receive(tf: &TimeFrequencyGrid, paths: &[PathParams], cfg: &FrameConfig) -> SampledFrame {
    SampledFrame(oracle_receive_rows(tf, paths, cfg, 0..tf.rows()))
}

/// [`oracle_receive`] restricted to a range of OFDM symbols.
pub fn oracle_receive_rows(
    tf: &TimeFrequencyGrid,
    paths: &[PathParams],
    cfg: &FrameConfig,
    rows: std::ops::Range<usize>,
) -> Grid {
    let m = cfg.m;
    let count = rows.len();
    let data: Vec<Complex64> = rows
        .into_par_iter()
        .flat_map_iter(|n| (0..m).map(move |l| (n, l)))
        .map(|(n, l)| oracle_sample(tf, paths, cfg, n, l))
        .collect();
    Grid::from_vec(count, m, data)
}

fn oracle_sample(tf: &TimeFrequencyGrid, paths: &[PathParams], cfg: &FrameConfig, n: usize, l: usize) -> Complex64 {
    let t = sample_time(cfg, n, l);
    paths
        .iter()
        .map(|p| {
            let arg = t - p.tau(cfg) + t * p.inv_mobility(cfg);
            p.gain * Complex64::cis(2.0 * PI * p.nu(cfg) * t) * eval_waveform(cfg, tf, arg)
        })
        .sum()
}

/// Adds circular complex Gaussian noise of variance `sigma_n2` per sample.
pub fn add_awgn<R: Rng + ?Sized>(frame: &SampledFrame, sigma_n2: f64, rng: &mut R) -> SampledFrame {
    let mut out = frame.clone();
    add_awgn_in_place(out.as_mut_slice(), sigma_n2, rng);
    out
}

pub fn add_awgn_in_place<R: Rng + ?Sized>(samples: &mut [Complex64], sigma_n2: f64, rng: &mut R) {
    if sigma_n2 == 0.0 {
        return;
    }
    let std = (sigma_n2 / 2.0).sqrt();
    for z in samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += Complex64::new(re * std, im * std);
    }
}
