//! Channel NMSE, bit error rate and order-stable aggregation.

use crate::channel::ChannelMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("reference matrix has zero norm")]
    ZeroReference,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bit sequences differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// `||H_hat - H||_F^2 / ||H||_F^2`.
pub fn nmse(h_hat: &ChannelMatrix, h_true: &ChannelMatrix) -> Result<f64, MetricError> {
    if h_hat.shape() != h_true.shape() {
        return Err(MetricError::Shape(format!("{:?} vs {:?}", h_hat.shape(), h_true.shape())));
    }
    let reference = h_true.norm_squared();
    if reference == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    Ok((h_hat - h_true).norm_squared() / reference)
}

/// Fraction of differing bits.
pub fn ber(bits_hat: &[u8], bits_true: &[u8]) -> Result<f64, MetricError> {
    if bits_hat.len() != bits_true.len() {
        return Err(MetricError::LengthMismatch(bits_hat.len(), bits_true.len()));
    }
    if bits_true.is_empty() {
        return Ok(0.0);
    }
    let errors = bits_hat.iter().zip(bits_true).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / bits_true.len() as f64)
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Option<Summary> {
        let count = xs.len();
        if count == 0 {
            return None;
        }
        let mean = pairwise_sum(xs) / count as f64;
        let std_err = if count > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
            (pairwise_sum(&dev) / (count - 1) as f64 / count as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, std_err, count })
    }
}
