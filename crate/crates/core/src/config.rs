//! System dimensioning, derived timing and admissibility checks.
//!
//! A [`FrameConfig`] holds everything that fixes the shape of one OTFS frame:
//! the OFDM numerology, the delay/Doppler grid extent, the pilot value and the
//! signal/noise powers. [`FrameConfig::validate`] enforces the cyclic prefix
//! rule `l_max + 2 <= M_CP < M`, the Doppler squint bound on the mobility
//! parameter and the phase-wrap bound used by the Doppler extractor.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("cyclic prefix too short: M_CP = {m_cp} < l_max + 2 = {required}")]
    CpTooShort { m_cp: usize, required: usize },
    #[error("cyclic prefix too long: M_CP = {m_cp} >= M = {m}")]
    CpTooLong { m_cp: usize, m: usize },
    #[error("Doppler squint bound violated: (N+2)M = {block} >= min |p_i| = {min_p:.6e}")]
    DseAssumptionViolated { block: usize, min_p: f64 },
    #[error("Doppler phase step {phase:.6} rad per symbol is not below pi; k_max = {k_max} is ambiguous")]
    DopplerAmbiguous { phase: f64, k_max: usize },
}

/// Constellation used for the data grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Qpsk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Subcarrier spacing in Hz.
    pub subcarrier_hz: f64,
    /// Subcarriers per OFDM symbol (delay bins).
    pub m: usize,
    /// Data OFDM symbols per frame (Doppler bins).
    pub n: usize,
    /// Cyclic prefix length in samples.
    pub m_cp: usize,
    /// Largest delay index a path may occupy.
    pub l_max: usize,
    /// Largest normalized Doppler magnitude.
    pub k_max: usize,
    /// Pilot sample value.
    pub pilot: Complex64,
    /// Average data symbol power.
    pub sigma_s2: f64,
    /// Noise variance per complex sample.
    pub sigma_n2: f64,
    pub modulation: Modulation,
}

/// Timing and layout quantities that follow from a [`FrameConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedDims {
    /// Useful OFDM symbol duration `1 / delta_f`.
    pub t: f64,
    /// Cyclic prefix duration.
    pub t_cp: f64,
    /// Whole OFDM symbol duration including the CP.
    pub t_u: f64,
    /// Pilots per pilot OFDM symbol.
    pub m_p: usize,
    /// Total OFDM symbols in the frame, `N + 2`.
    pub num_symbols: usize,
    /// Sample spacing `T / M`.
    pub sample_period: f64,
}

impl FrameConfig {
    /// Parameters of the reference system: 4 GHz carrier, 30 kHz spacing,
    /// M = 1024, N = 128, M_CP = 24, l_max = 20, pilots 30 dB above data.
    pub fn reference() -> Self {
        let sigma_s2 = 1.0;
        FrameConfig {
            carrier_hz: 4e9,
            subcarrier_hz: 30e3,
            m: 1024,
            n: 128,
            m_cp: 24,
            l_max: 20,
            k_max: 16,
            pilot: pilot_from_boost(sigma_s2, 30.0),
            sigma_s2,
            sigma_n2: 0.0,
            modulation: Modulation::Qpsk,
        }
    }

    /// Derived quantities without any admissibility checks.
    pub fn dims(&self) -> DerivedDims {
        let t = 1.0 / self.subcarrier_hz;
        let t_cp = self.m_cp as f64 / self.m as f64 * t;
        let t_u = (self.m + self.m_cp) as f64 / self.m as f64 * t;
        DerivedDims {
            t,
            t_cp,
            t_u,
            m_p: self.m / (self.l_max + 1),
            num_symbols: self.n + 2,
            sample_period: t / self.m as f64,
        }
    }

    /// Spacing of the pilot comb, `l_max + 1`.
    pub fn pilot_spacing(&self) -> usize {
        self.l_max + 1
    }

    /// Number of samples per OFDM symbol including the CP.
    pub fn symbol_len(&self) -> usize {
        self.m + self.m_cp
    }

    /// Squint correction `1 + (M - 1) delta_f / (2 f_c)` applied to the Doppler phase.
    pub fn squint_factor(&self) -> f64 {
        1.0 + (self.m as f64 - 1.0) * self.subcarrier_hz / (2.0 * self.carrier_hz)
    }

    /// Doppler phase advance between the two pilot symbols at `k = k_max`.
    pub fn pilot_phase_step(&self) -> f64 {
        2.0 * PI * (self.symbol_len() as f64 / self.m as f64) * (self.k_max as f64 / self.n as f64)
            * self.squint_factor()
    }

    /// Checks the frame against a scenario with maximum speed `v_max` (m/s).
    pub fn validate(&self, v_max: f64) -> Result<DerivedDims, ConfigError> {
        self.check_positive(v_max)?;
        if self.m_cp < self.l_max + 2 {
            return Err(ConfigError::CpTooShort {
                m_cp: self.m_cp,
                required: self.l_max + 2,
            });
        }
        if self.m_cp >= self.m {
            return Err(ConfigError::CpTooLong {
                m_cp: self.m_cp,
                m: self.m,
            });
        }
        let block = (self.n + 2) * self.m;
        let min_p = min_mobility_parameter(v_max);
        if block as f64 >= min_p {
            return Err(ConfigError::DseAssumptionViolated { block, min_p });
        }
        let phase = self.pilot_phase_step();
        if phase >= PI {
            return Err(ConfigError::DopplerAmbiguous {
                phase,
                k_max: self.k_max,
            });
        }
        let dims = self.dims();
        debug_assert!(dims.m_p >= 1);
        debug_assert!((dims.m_p - 1) * self.pilot_spacing() + self.l_max < self.m);
        Ok(dims)
    }

    fn check_positive(&self, v_max: f64) -> Result<(), ConfigError> {
        fn positive(name: &'static str, value: f64) -> Result<(), ConfigError> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {value}"),
                })
            }
        }
        positive("carrier_hz", self.carrier_hz)?;
        positive("subcarrier_hz", self.subcarrier_hz)?;
        positive("sigma_s2", self.sigma_s2)?;
        positive("|x_p|", self.pilot.norm())?;
        for (name, value) in [
            ("m", self.m),
            ("n", self.n),
            ("m_cp", self.m_cp),
            ("l_max", self.l_max),
            ("k_max", self.k_max),
        ] {
            positive(name, value as f64)?;
        }
        if !(self.sigma_n2.is_finite() && self.sigma_n2 >= 0.0) {
            return Err(ConfigError::InvalidParameter {
                name: "sigma_n2",
                reason: format!("must be non-negative, got {}", self.sigma_n2),
            });
        }
        if !(v_max.is_finite() && v_max >= 0.0) {
            return Err(ConfigError::InvalidParameter {
                name: "v_max",
                reason: format!("must be non-negative, got {v_max}"),
            });
        }
        match self.modulation {
            Modulation::Qpsk => Ok(()),
        }
    }

    /// Maximum Doppler shift (Hz) at the carrier for speed `v_max` (m/s).
    pub fn nu_max(&self, v_max: f64) -> f64 {
        v_max * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Normalized Doppler `k = nu N T`; not rounded.
    pub fn k_of_nu(&self, nu: f64) -> f64 {
        nu * self.n as f64 / self.subcarrier_hz
    }

    /// `ceil(nu_max N T)`, the smallest admissible `k_max` for speed `v_max`.
    pub fn required_k_max(&self, v_max: f64) -> usize {
        self.k_of_nu(self.nu_max(v_max)).ceil() as usize
    }

    /// Same frame with noise variance set for `snr_db = 10 log10(sigma_s2 / sigma_n2)`.
    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        FrameConfig {
            sigma_n2: self.sigma_s2 / 10f64.powf(snr_db / 10.0),
            ..self.clone()
        }
    }
}

/// Real positive pilot with `|x_p|^2 = sigma_s2 * 10^(boost_db / 10)`.
pub fn pilot_from_boost(sigma_s2: f64, boost_db: f64) -> Complex64 {
    Complex64::new((sigma_s2 * 10f64.powf(boost_db / 10.0)).sqrt(), 0.0)
}

/// Smallest mobility parameter `|p_i| = c / v` reachable at speed `v_max`.
pub fn min_mobility_parameter(v_max: f64) -> f64 {
    if v_max == 0.0 {
        f64::INFINITY
    } else {
        SPEED_OF_LIGHT / v_max
    }
}

pub fn kmh_to_mps(v_kmh: f64) -> f64 {
    v_kmh / 3.6
}
