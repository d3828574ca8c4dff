//! Per-symbol LMMSE equalization and delay-Doppler demodulation.
//!
//! With the cyclic prefix long enough there is no inter-symbol interference,
//! so each data symbol `n` is equalized on its own:
//! `s_hat = (H^H H + (sigma_n2 / sigma_s2) I)^{-1} H^H r`, solved through a
//! Cholesky factorization of the regularized normal matrix.

use crate::channel::ChannelMatrix;
use crate::config::FrameConfig;
use crate::estimator::{reconstruct, EstimatedCsi};
use crate::grid::{dft_cols, Direction, Grid};
use crate::modem::{qpsk_demap, DelayDopplerGrid, SampledFrame};
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EqualizerError {
    #[error("normal matrix is singular (sigma_n2 = 0 and rank-deficient channel)")]
    SingularSystem,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid powers: sigma_n2 = {sigma_n2}, sigma_s2 = {sigma_s2}")]
    InvalidPower { sigma_n2: f64, sigma_s2: f64 },
}

/// One symbol's equalization problem.
#[derive(Debug, Clone)]
pub struct EqualizerInput<'a> {
    pub h_hat: &'a ChannelMatrix,
    pub r: &'a [Complex64],
    pub sigma_n2: f64,
    pub sigma_s2: f64,
}

impl EqualizerInput<'_> {
    fn check(&self) -> Result<f64, EqualizerError> {
        let m = self.r.len();
        if self.h_hat.nrows() != m || self.h_hat.ncols() != m {
            return Err(EqualizerError::Dimension(format!(
                "H is {}x{}, r has {m} entries",
                self.h_hat.nrows(),
                self.h_hat.ncols()
            )));
        }
        if !(self.sigma_s2 > 0.0 && self.sigma_n2 >= 0.0) {
            return Err(EqualizerError::InvalidPower {
                sigma_n2: self.sigma_n2,
                sigma_s2: self.sigma_s2,
            });
        }
        Ok(self.sigma_n2 / self.sigma_s2)
    }

    /// Regularized normal matrix `H^H H + rho I` and right-hand side `H^H r`.
    pub fn normal_equations(&self) -> Result<(DMatrix<Complex64>, DVector<Complex64>), EqualizerError> {
        let rho = self.check()?;
        let m = self.r.len();
        let mut a = self.h_hat.ad_mul(self.h_hat);
        for i in 0..m {
            a[(i, i)] += Complex64::new(rho, 0.0);
        }
        let b = self.h_hat.ad_mul(&DVector::from_column_slice(self.r));
        Ok((a, b))
    }
}

/// LMMSE estimate of the transmitted samples of one OFDM symbol.
pub fn lmmse_equalize(input: &EqualizerInput<'_>) -> Result<Vec<Complex64>, EqualizerError> {
    let (a, b) = input.normal_equations()?;
    let chol = Cholesky::new(a).ok_or(EqualizerError::SingularSystem)?;
    if input.sigma_n2 == 0.0 {
        let diag = chol.l_dirty().diagonal();
        let max = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min = diag.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if max.is_nan() || max <= 0.0 || min < 1e-10 * max {
            return Err(EqualizerError::SingularSystem);
        }
    }
    Ok(chol.solve(&b).as_slice().to_vec())
}

/// `||(H^H H + rho I) s_hat - H^H r|| / ||H^H r||`.
pub fn lmmse_residual(input: &EqualizerInput<'_>, s_hat: &[Complex64]) -> Result<f64, EqualizerError> {
    let (a, b) = input.normal_equations()?;
    let res = a * DVector::from_column_slice(s_hat) - &b;
    Ok(res.norm() / b.norm())
}

/// `x_hat[k, l] = N^{-1/2} sum_n S_hat[n + 2, l] e^{-j 2 pi n k / N}`.
///
/// `rows` holds the `N` equalized data symbols (`N x M`).
pub fn dd_demod(rows: &Grid) -> DelayDopplerGrid {
    let mut g = rows.clone();
    dft_cols(&mut g, Direction::Forward);
    DelayDopplerGrid(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetection {
    pub bits: Vec<u8>,
    pub symbols: DelayDopplerGrid,
}

/// Equalizes data symbols `2..N+2` of `r` with channels rebuilt from `csi`,
/// then demodulates and demaps them to `2 N M` bits.
pub fn detect_frame(r: &SampledFrame, csi: &EstimatedCsi, cfg: &FrameConfig) -> Result<FrameDetection, EqualizerError> {
    if r.shape() != (cfg.n + 2, cfg.m) {
        return Err(EqualizerError::Dimension(format!(
            "received frame is {}x{}, expected {}x{}",
            r.rows(),
            r.cols(),
            cfg.n + 2,
            cfg.m
        )));
    }
    let rows: Vec<Vec<Complex64>> = (2..cfg.n + 2)
        .into_par_iter()
        .map(|n| {
            let h_hat = reconstruct(csi, cfg, n);
            lmmse_equalize(&EqualizerInput {
                h_hat: &h_hat,
                r: r.row(n),
                sigma_n2: cfg.sigma_n2,
                sigma_s2: cfg.sigma_s2,
            })
        })
        .collect::<Result<_, _>>()?;
    let grid = Grid::from_vec(cfg.n, cfg.m, rows.into_iter().flatten().collect());
    let symbols = dd_demod(&grid);
    Ok(FrameDetection {
        bits: qpsk_demap(symbols.as_slice()),
        symbols,
    })
}
