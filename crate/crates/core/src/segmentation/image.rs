use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Depth frame; lower values are closer, `0` marks occluded pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<u16>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::shape(format!(
                "depth map {width}x{height} with {} values",
                values.len()
            )));
        }
        Ok(DepthMap { width, height, values })
    }

    /// Builds a map from rows of equal length.
    pub fn from_rows(rows: &[&[u16]]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::shape("depth rows have different lengths"));
        }
        Self::new(width, rows.len(), rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.values[y * self.width + x]
    }
}

/// Two-valued image; `1` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::shape(format!(
                "mask {width}x{height} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(BinaryMask { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            values: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y) as u8);
            }
        }
        BinaryMask { width, height, values }
    }

    /// Parses rows of `0`/`1` characters (any other character is an error);
    /// whitespace-only lines are skipped.
    pub fn from_ascii(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let width = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(width * rows.len());
        for row in &rows {
            if row.len() != width {
                return Err(Error::shape("mask rows have different lengths"));
            }
            for ch in row.chars() {
                values.push(match ch {
                    '0' | '.' => 0,
                    '1' | '#' => 1,
                    other => return Err(Error::invalid(format!("unexpected mask character {other:?}"))),
                });
            }
        }
        Self::new(width, rows.len(), values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.values[y * self.width + x] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }

    /// `true` if every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.values.iter().zip(&other.values).all(|(&a, &b)| a <= b)
    }

    /// Network input: `height x width x 1` of 0.0 / 1.0.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::new(
            vec![self.height, self.width, 1],
            self.values.iter().map(|&v| v as f32).collect(),
        )
        .expect("mask dimensions are positive")
    }

    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for row in self.values.chunks(self.width) {
            s.extend(row.iter().map(|&v| if v != 0 { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }
}
