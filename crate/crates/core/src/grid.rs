//! Row-major complex grids and unitary DFT helpers.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::ops::{Index, IndexMut};

/// Dense row-major complex matrix used for frame-shaped data.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Wraps `data` (row-major). Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data length");
        Grid { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Grid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Grid {
        Grid::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }
}

impl Index<(usize, usize)> for Grid {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        assert!(r < self.rows && c < self.cols, "grid index out of range");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Grid {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        assert!(r < self.rows && c < self.cols, "grid index out of range");
        &mut self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `exp(-j 2 pi k n / L)` kernel.
    Forward,
    /// `exp(+j 2 pi k n / L)` kernel.
    Inverse,
}

/// In-place unitary DFT of every row of `grid` (scaled by `1 / sqrt(cols)`).
pub fn dft_rows(grid: &mut Grid, direction: Direction) {
    let cols = grid.cols();
    if cols == 0 || grid.rows() == 0 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = match direction {
        Direction::Forward => planner.plan_fft_forward(cols),
        Direction::Inverse => planner.plan_fft_inverse(cols),
    };
    fft.process(grid.as_mut_slice());
    let scale = 1.0 / (cols as f64).sqrt();
    grid.as_mut_slice().iter_mut().for_each(|z| *z *= scale);
}

/// In-place unitary DFT down every column of `grid`.
pub fn dft_cols(grid: &mut Grid, direction: Direction) {
    let mut t = grid.transpose();
    dft_rows(&mut t, direction);
    *grid = t.transpose();
}

/// Unitary DFT of a single vector.
pub fn dft_vec(v: &[Complex64], direction: Direction) -> Vec<Complex64> {
    let mut g = Grid::from_vec(1, v.len(), v.to_vec());
    dft_rows(&mut g, direction);
    g.into_vec()
}
