//! Transmitter: QPSK mapping, the pilot comb, delay-Doppler to time-domain
//! mapping and the continuous CP-OFDM waveform.
//!
//! Frame layout is `N + 2` OFDM symbols of `M` samples. Symbols 0 and 1 carry
//! the time-domain pilot comb `x_p` at `l = q (l_max + 1)`; symbols `2..N+2`
//! carry the data grid spread along the Doppler axis by an `N`-point inverse
//! DFT. Each symbol is preceded by an `M_CP` sample cyclic prefix, which only
//! exists in the continuous waveform ([`eval_waveform`]).

use crate::config::FrameConfig;
use crate::grid::{dft_cols, dft_rows, Direction, Grid};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Deref, DerefMut};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModemError {
    #[error("expected {expected} bits, got {actual}")]
    BitCount { expected: usize, actual: usize },
    #[error("grid is {actual_rows}x{actual_cols}, expected {rows}x{cols}")]
    Dimension {
        rows: usize,
        cols: usize,
        actual_rows: usize,
        actual_cols: usize,
    },
}

fn check_shape(g: &Grid, rows: usize, cols: usize) -> Result<(), ModemError> {
    if g.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(ModemError::Dimension {
            rows,
            cols,
            actual_rows: g.rows(),
            actual_cols: g.cols(),
        })
    }
}

macro_rules! grid_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Grid);

        impl Deref for $name {
            type Target = Grid;
            fn deref(&self) -> &Grid {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Grid {
                &mut self.0
            }
        }
    };
}

grid_newtype!(
    /// `N x M` data symbols, entry `(k, l)` at Doppler bin `k`, delay bin `l`.
    DelayDopplerGrid
);
grid_newtype!(
    /// `(N + 2) x M` time-frequency symbols `X[n, m]`.
    TimeFrequencyGrid
);
grid_newtype!(
    /// `(N + 2) x M` time-domain samples `S[n, l]` (or `R[n, l]` after the channel).
    SampledFrame
);

/// Gray-mapped QPSK with power `sigma_s2`: bit pair `(b0, b1)` maps to
/// `((1 - 2 b0) + j (1 - 2 b1)) sqrt(sigma_s2 / 2)`.
pub fn qpsk_symbol(b0: u8, b1: u8, sigma_s2: f64) -> Complex64 {
    let a = FRAC_1_SQRT_2 * sigma_s2.sqrt();
    Complex64::new(if b0 == 0 { a } else { -a }, if b1 == 0 { a } else { -a })
}

/// Maps `2 N M` bits row-major onto an `N x M` delay-Doppler grid.
pub fn qpsk_map(bits: &[u8], n: usize, m: usize, sigma_s2: f64) -> Result<DelayDopplerGrid, ModemError> {
    let expected = 2 * n * m;
    if bits.len() != expected {
        return Err(ModemError::BitCount {
            expected,
            actual: bits.len(),
        });
    }
    let data = bits
        .chunks_exact(2)
        .map(|b| qpsk_symbol(b[0], b[1], sigma_s2))
        .collect();
    Ok(DelayDopplerGrid(Grid::from_vec(n, m, data)))
}

/// Hard-decision demapping. A zero component decides bit 0.
pub fn qpsk_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|z| [u8::from(z.re < 0.0), u8::from(z.im < 0.0)])
        .collect()
}

/// The two identical pilot rows (`2 x M`): `x_p` on the comb `q (l_max + 1)`.
pub fn build_pilot_rows(cfg: &FrameConfig) -> Grid {
    let spacing = cfg.pilot_spacing();
    let m_p = cfg.dims().m_p;
    let mut rows = Grid::zeros(2, cfg.m);
    for n in 0..2 {
        for q in 0..m_p {
            rows[(n, q * spacing)] = cfg.pilot;
        }
    }
    rows
}

/// Data rows `S[n + 2, l] = N^{-1/2} sum_k x_d[k, l] e^{j 2 pi n k / N}`.
pub fn map_data_rows(cfg: &FrameConfig, x_d: &DelayDopplerGrid) -> Result<Grid, ModemError> {
    check_shape(x_d, cfg.n, cfg.m)?;
    let mut rows = x_d.0.clone();
    dft_cols(&mut rows, Direction::Inverse);
    Ok(rows)
}

/// Inverse symplectic finite Fourier transform of an `N x M` grid.
pub fn isfft(x_d: &DelayDopplerGrid) -> TimeFrequencyGrid {
    let mut g = x_d.0.clone();
    dft_cols(&mut g, Direction::Inverse);
    dft_rows(&mut g, Direction::Forward);
    TimeFrequencyGrid(g)
}

/// Symplectic finite Fourier transform; exact inverse of [`isfft`].
pub fn sfft(x_tf: &TimeFrequencyGrid) -> DelayDopplerGrid {
    let mut g = x_tf.0.clone();
    dft_rows(&mut g, Direction::Inverse);
    dft_cols(&mut g, Direction::Forward);
    DelayDopplerGrid(g)
}

/// A complete transmit frame in both the sampled and time-frequency forms.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitFrame {
    pub samples: SampledFrame,
    pub tf: TimeFrequencyGrid,
}

impl TransmitFrame {
    /// Pilot rows plus the data grid.
    pub fn new(cfg: &FrameConfig, x_d: &DelayDopplerGrid) -> Result<Self, ModemError> {
        let data = map_data_rows(cfg, x_d)?;
        let pilots = build_pilot_rows(cfg);
        let mut samples = Grid::zeros(cfg.n + 2, cfg.m);
        for n in 0..2 {
            samples.row_mut(n).copy_from_slice(pilots.row(n));
        }
        for n in 0..cfg.n {
            samples.row_mut(n + 2).copy_from_slice(data.row(n));
        }
        Ok(Self::from_samples(SampledFrame(samples)))
    }

    /// Frame with pilot rows and empty data symbols.
    pub fn pilots_only(cfg: &FrameConfig) -> Self {
        let zeros = DelayDopplerGrid(Grid::zeros(cfg.n, cfg.m));
        Self::new(cfg, &zeros).expect("zero grid has the configured shape")
    }

    /// Derives `X[n, .]` as the unitary forward DFT of each sampled row.
    pub fn from_samples(samples: SampledFrame) -> Self {
        let mut tf = samples.0.clone();
        dft_rows(&mut tf, Direction::Forward);
        TransmitFrame {
            samples,
            tf: TimeFrequencyGrid(tf),
        }
    }
}

/// Continuous baseband waveform `s(t)` of the frame described by `tf`.
///
/// Symbol `n` occupies `[n T_u - T_CP, (n + 1) T_u - T_CP)`; outside the
/// frame the waveform is zero.
pub fn eval_waveform(cfg: &FrameConfig, tf: &TimeFrequencyGrid, t: f64) -> Complex64 {
    let dims = cfg.dims();
    let mut n = ((t + dims.t_cp) / dims.t_u).floor();
    // Guard the floor against rounding at symbol boundaries.
    let offset = t - n * dims.t_u + dims.t_cp;
    if offset < 0.0 {
        n -= 1.0;
    } else if offset >= dims.t_u {
        n += 1.0;
    }
    if n < 0.0 || n >= tf.rows() as f64 {
        return Complex64::new(0.0, 0.0);
    }
    let symbol = n as usize;
    // Subcarrier phase in cycles per unit m.
    let cycles = (t - n * dims.t_u) * cfg.subcarrier_hz;
    let sum: Complex64 = tf
        .row(symbol)
        .iter()
        .enumerate()
        .filter(|(_, x)| x.re != 0.0 || x.im != 0.0)
        .map(|(m, x)| x * Complex64::cis(2.0 * PI * m as f64 * cycles))
        .sum();
    sum / (cfg.m as f64).sqrt()
}

/// Sampling instant of `S[n, l]`: `n T_u + l T / M`.
pub fn sample_time(cfg: &FrameConfig, n: usize, l: usize) -> f64 {
    let dims = cfg.dims();
    n as f64 * dims.t_u + l as f64 * dims.sample_period
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::pilot_from_boost;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, n: usize, m_cp: usize, l_max: usize) -> FrameConfig {
        FrameConfig {
            m,
            n,
            m_cp,
            l_max,
            k_max: 1,
            ..FrameConfig::reference()
        }
    }

    fn random_grid(rows: usize, cols: usize, rng: &mut impl Rng) -> Grid {
        Grid::from_fn(rows, cols, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn qpsk_gray_convention() {
        let s = FRAC_1_SQRT_2;
        assert_eq!(qpsk_symbol(0, 0, 1.0), Complex64::new(s, s));
        assert_eq!(qpsk_symbol(1, 0, 1.0), Complex64::new(-s, s));
        assert_eq!(qpsk_symbol(0, 1, 1.0), Complex64::new(s, -s));
        assert_eq!(qpsk_symbol(1, 1, 1.0), Complex64::new(-s, -s));
        assert!((qpsk_symbol(1, 1, 4.0).norm_sqr() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn qpsk_round_trip_and_tie_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits: Vec<u8> = (0..2 * 4 * 8).map(|_| rng.random_range(0..2)).collect();
        let grid = qpsk_map(&bits, 4, 8, 2.0).unwrap();
        assert_eq!(qpsk_demap(grid.as_slice()), bits);
        assert_eq!(qpsk_demap(&[Complex64::new(0.0, 0.0)]), vec![0, 0]);
        assert_eq!(
            qpsk_map(&bits[1..], 4, 8, 1.0),
            Err(ModemError::BitCount {
                expected: 64,
                actual: 63
            })
        );
    }

    #[test]
    fn pilot_comb_positions() {
        let c = FrameConfig {
            pilot: Complex64::new(2.0, 0.0),
            ..cfg(8, 2, 5, 3)
        };
        let rows = build_pilot_rows(&c);
        let two = Complex64::new(2.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let expected = [two, zero, zero, zero, two, zero, zero, zero];
        assert_eq!(rows.row(0), &expected);
        assert_eq!(rows.row(1), &expected);

        let reference = FrameConfig::reference();
        let rows = build_pilot_rows(&reference);
        let nz: Vec<usize> = (0..1024).filter(|&l| rows[(0, l)].norm() > 0.0).collect();
        assert_eq!(nz.len(), 48);
        assert_eq!(nz, (0..48).map(|q| 21 * q).collect::<Vec<_>>());
        assert_eq!(*nz.last().unwrap(), 987);
        let power: f64 = rows.row(0).iter().map(|z| z.norm_sqr()).sum();
        assert!((power - 48.0 * reference.pilot.norm_sqr()).abs() < 1e-9);
    }

    #[test]
    fn data_rows_dc_and_single_tone() {
        let c = cfg(8, 4, 5, 3);
        let mut x = DelayDopplerGrid(Grid::zeros(4, 8));
        for l in 0..8 {
            x[(0, l)] = Complex64::new(1.0, 0.0);
        }
        let rows = map_data_rows(&c, &x).unwrap();
        for z in rows.as_slice() {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
        let k0 = 3;
        let mut x = DelayDopplerGrid(Grid::zeros(4, 8));
        x[(k0, 2)] = Complex64::new(1.0, 0.0);
        let rows = map_data_rows(&c, &x).unwrap();
        for n in 0..4 {
            let expected = Complex64::cis(2.0 * PI * (n * k0) as f64 / 4.0) * 0.5;
            assert!((rows[(n, 2)] - expected).norm() < 1e-14);
            assert_eq!(rows[(n, 1)], Complex64::new(0.0, 0.0));
        }
        assert!(map_data_rows(&c, &DelayDopplerGrid(Grid::zeros(3, 8))).is_err());
    }

    #[test]
    fn isfft_route_equals_direct_mapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = cfg(16, 8, 5, 3);
        let x = DelayDopplerGrid(random_grid(8, 16, &mut rng));
        let mut via_tf = isfft(&x).0;
        dft_rows(&mut via_tf, Direction::Inverse);
        let direct = map_data_rows(&c, &x).unwrap();
        assert!(via_tf.max_abs_diff(&direct) < 1e-10);
        assert!(sfft(&isfft(&x)).max_abs_diff(&x) < 1e-12);
        assert!((isfft(&x).energy() - x.energy()).abs() < 1e-10);
        let zeros = DelayDopplerGrid(Grid::zeros(8, 16));
        assert_eq!(isfft(&zeros).max_abs(), 0.0);
    }

    #[test]
    fn isfft_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, m) = (4, 6);
        let x = DelayDopplerGrid(random_grid(n, m, &mut rng));
        let tf = isfft(&x);
        for nn in 0..n {
            for mm in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    for l in 0..m {
                        let ph = 2.0 * PI * ((nn * k) as f64 / n as f64 - (mm * l) as f64 / m as f64);
                        acc += x[(k, l)] * Complex64::cis(ph);
                    }
                }
                acc /= ((n * m) as f64).sqrt();
                assert!((acc - tf[(nn, mm)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn waveform_samples_match_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = cfg(32, 4, 6, 4);
        let x = DelayDopplerGrid(random_grid(4, 32, &mut rng));
        let frame = TransmitFrame::new(&c, &x).unwrap();
        let scale = frame.samples.max_abs();
        for n in 0..6 {
            for l in 0..32 {
                let s = eval_waveform(&c, &frame.tf, sample_time(&c, n, l));
                assert!((s - frame.samples[(n, l)]).norm() < 1e-12 * scale.max(1.0), "n={n} l={l}");
            }
        }
    }

    #[test]
    fn cyclic_prefix_is_a_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = cfg(16, 2, 5, 3);
        let x = DelayDopplerGrid(random_grid(2, 16, &mut rng));
        let frame = TransmitFrame::new(&c, &x).unwrap();
        let d = c.dims();
        for n in 0..4 {
            for j in 0..20 {
                let tau = d.t_cp * (j as f64 + 0.5) / 20.0;
                let head = eval_waveform(&c, &frame.tf, n as f64 * d.t_u - d.t_cp + tau);
                let tail = eval_waveform(&c, &frame.tf, n as f64 * d.t_u + d.t - d.t_cp + tau);
                assert!((head - tail).norm() < 1e-11, "n={n} j={j} {head} {tail}");
            }
        }
    }

    #[test]
    fn single_subcarrier_waveform() {
        let c = cfg(16, 2, 5, 3);
        let m0 = 3;
        let mut tf = TimeFrequencyGrid(Grid::zeros(4, 16));
        tf[(0, m0)] = Complex64::new(4.0, 0.0);
        let d = c.dims();
        for j in 0..50 {
            let t = -d.t_cp + d.t_u * j as f64 / 50.0;
            let expected = Complex64::cis(2.0 * PI * m0 as f64 * c.subcarrier_hz * t);
            assert!((eval_waveform(&c, &tf, t) - expected).norm() < 1e-9);
        }
        assert_eq!(eval_waveform(&c, &tf, -d.t_cp - 1e-9), Complex64::new(0.0, 0.0));
        assert_eq!(eval_waveform(&c, &tf, 4.0 * d.t_u), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn frame_layout() {
        let c = FrameConfig {
            pilot: pilot_from_boost(1.0, 30.0),
            ..cfg(8, 2, 5, 3)
        };
        let frame = TransmitFrame::pilots_only(&c);
        assert_eq!(frame.samples.shape(), (4, 8));
        assert_eq!(frame.samples.row(0), build_pilot_rows(&c).row(0));
        assert_eq!(frame.samples.row(3).iter().map(|z| z.norm()).sum::<f64>(), 0.0);
    }
}
