//! Plain-text path records used for fixtures and replay.
//!
//! One path per line as `l_i,k_i,re(beta_i),im(beta_i)`. Blank lines and
//! lines starting with `#` are ignored. Floats are written in Rust's shortest
//! round-trip form, so a record reproduces its paths bit for bit.

use crate::channel::{ChannelError, PathParams};
use num_complex::Complex64;

pub(crate) fn write_paths(paths: &[PathParams]) -> String {
    let mut out = String::new();
    for p in paths {
        out.push_str(&format!("{},{:?},{:?},{:?}\n", p.delay, p.doppler, p.gain.re, p.gain.im));
    }
    out
}

pub(crate) fn read_paths(text: &str) -> Result<Vec<PathParams>, ChannelError> {
    read_lines(text)
        .map(|(line, content)| parse_path(line, content))
        .collect()
}

/// Non-empty, non-comment lines with 1-based line numbers.
pub(crate) fn read_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_path(line: usize, content: &str) -> Result<PathParams, ChannelError> {
    let err = |reason: String| ChannelError::Record { line, reason };
    let fields: Vec<&str> = content.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(err(format!("expected 4 fields, found {}", fields.len())));
    }
    let delay: usize = fields[0]
        .parse()
        .map_err(|e| err(format!("delay {:?}: {e}", fields[0])))?;
    let mut nums = [0.0f64; 3];
    for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
        *slot = field.parse().map_err(|e| err(format!("value {field:?}: {e}")))?;
    }
    PathParams::new(delay, nums[0], Complex64::new(nums[1], nums[2])).map_err(|e| err(e.to_string()))
}
