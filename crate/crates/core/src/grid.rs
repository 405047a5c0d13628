//! Row-major 2D rasters with a physical pixel size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `data[y * width + x]`; `x` is the column, `y` the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("grid dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "grid data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    /// Reverses the row order.
    pub fn flip_rows(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(x, self.height - 1 - y))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Surface heights in nm sampled on a square lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopographyMap {
    /// nm per pixel.
    pub pixel_size: f64,
    pub heights: Grid,
}

impl TopographyMap {
    pub fn new(pixel_size: f64, heights: Grid) -> Result<Self> {
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        if !heights.all_finite() {
            return Err(Error::NonFinite("topography heights"));
        }
        Ok(Self { pixel_size, heights })
    }

    pub fn width_nm(&self) -> f64 {
        self.heights.width() as f64 * self.pixel_size
    }

    pub fn height_nm(&self) -> f64 {
        self.heights.height() as f64 * self.pixel_size
    }

    /// Root-mean-square deviation from the mean height.
    pub fn rms(&self) -> f64 {
        let d = self.heights.data();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        (d.iter().map(|h| (h - m) * (h - m)).sum::<f64>() / d.len() as f64).sqrt()
    }

    /// Bilinear height at physical position `(x, y)` nm, pixel centres at
    /// `(i + 0.5) * pixel_size`. Positions beyond the outer centres clamp.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let g = &self.heights;
        let fx = (x / self.pixel_size - 0.5).clamp(0.0, (g.width() - 1) as f64);
        let fy = (y / self.pixel_size - 0.5).clamp(0.0, (g.height() - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(g.width() - 1), (y0 + 1).min(g.height() - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let top = g.get(x0, y0) * (1.0 - tx) + g.get(x1, y0) * tx;
        let bottom = g.get(x0, y1) * (1.0 - tx) + g.get(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

/// Projected EDS intensity; rows run along the growth (vertical) axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdsImage {
    /// nm per pixel.
    pub pixel_size: f64,
    pub values: Grid,
}

impl EdsImage {
    pub fn new(pixel_size: f64, values: Grid) -> Result<Self> {
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        if !values.all_finite() {
            return Err(Error::NonFinite("EDS image"));
        }
        Ok(Self { pixel_size, values })
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_plane() {
        let g = Grid::from_fn(8, 6, |x, y| 0.3 * x as f64 - 0.2 * y as f64);
        let t = TopographyMap::new(0.5, g).unwrap();
        let (x, y) = (1.37, 2.01);
        let expect = 0.3 * (x / 0.5 - 0.5) - 0.2 * (y / 0.5 - 0.5);
        assert!((t.height_at(x, y) - expect).abs() < 1e-12);
    }

    #[test]
    fn transpose_and_flip() {
        let g = Grid::from_fn(3, 2, |x, y| (10 * y + x) as f64);
        assert_eq!(g.transpose().get(1, 2), g.get(2, 1));
        assert_eq!(g.flip_rows().get(0, 0), g.get(0, 1));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Grid::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Grid::from_vec(0, 2, vec![]).is_err());
    }
}
