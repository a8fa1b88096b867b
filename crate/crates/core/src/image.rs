//! Grid types shared by every stage: intensity images, class label maps and
//! binary masks. All grids are row-major.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

fn check_dims(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "grid dimensions must be positive, got {height}x{width}"
        )));
    }
    if height * width != len {
        return Err(Error::invalid(format!(
            "grid {height}x{width} needs {} values, got {len}",
            height * width
        )));
    }
    Ok(())
}

/// Single-channel intensity image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
    spacing: f64,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width, data.len())?;
        if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} at index {i} is outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
            spacing: 1.0,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "empty image");
        Self {
            height,
            width,
            data: vec![0.0; height * width],
            spacing: 1.0,
        }
    }

    /// Builds an image from a per-pixel function; values are clamped into `[0, 1]`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                img.data[r * width + c] = clamp01(f(r, c));
            }
        }
        img
    }

    /// Physical pixel size, used only by distance metrics.
    pub fn with_spacing(mut self, spacing: f64) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!((0.0..=1.0).contains(&v));
        self.data[r * self.width + c] = v;
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub(crate) fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Per-pixel class indices; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
    num_classes: u8,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>, num_classes: u8) -> Result<Self> {
        check_dims(height, width, data.len())?;
        if num_classes == 0 {
            return Err(Error::invalid("label map needs at least one class"));
        }
        if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| **v >= num_classes) {
            return Err(Error::invalid(format!(
                "class {v} at index {i} is out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            num_classes,
        })
    }

    pub fn background(height: usize, width: usize, num_classes: u8) -> Self {
        assert!(height > 0 && width > 0 && num_classes > 0);
        Self {
            height,
            width,
            data: vec![0; height * width],
            num_classes,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.width + c]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Distinct classes that occur at least once.
    pub fn classes_present(&self) -> BTreeSet<u8> {
        let mut seen = [false; 256];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        (0..=255u8).filter(|&c| seen[c as usize]).collect()
    }

    /// Mask of pixels labeled `class`.
    pub fn class_mask(&self, class: u8) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v == class).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(height, width, data.len())?;
        Ok(Self { height, width, data })
    }

    /// Accepts a 0/1 byte grid; any other value is rejected.
    pub fn from_bytes(height: usize, width: usize, data: &[u8]) -> Result<Self> {
        check_dims(height, width, data.len())?;
        let data = data
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid(format!("mask value {other} is not binary"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { height, width, data })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0);
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.width + c] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// `(row, col)` of every set pixel, in row-major order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v as u8).collect()
    }
}

pub(crate) fn ensure_same_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!(
            "{what}: dimension mismatch {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
