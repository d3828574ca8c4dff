//! OTFS link simulation over a CP-OFDM transmitter, with a wideband
//! (Doppler-squint) channel, pilot-based channel estimation and LMMSE
//! detection.

pub mod channel;
pub mod config;
pub mod equalizer;
pub mod estimator;
pub mod grid;
pub mod harness;
pub mod modem;
pub(crate) mod record;

pub use channel::{ChannelMatrix, ChannelRealization, DseMode, PathParams};
pub use config::{ConfigError, DerivedDims, FrameConfig, Modulation};
pub use estimator::{estimate_channel, EstimatedCsi};
pub use grid::Grid;
