//! Row-major 2-D rasters shared by masks, surge fields and forcing snapshots.
//!
//! Row 0 is the southernmost row of a grid window; column 0 the westernmost.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2<T> {
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

/// Maximum water elevation on a grid window, meters.
pub type SurgeField = Field2<f32>;

/// Boolean cell mask (land, coverage, coastal band).
pub type Mask = Field2<bool>;

impl<T: Clone> Field2<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }
}

impl<T> Field2<T> {
    /// Panics if `data.len() != height * width`.
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), height * width, "raster size mismatch");
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let i = self.index(row, col);
        self.data[i] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape<U>(&self, other: &Field2<U>) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Field2<U> {
        Field2 {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// True when every set cell of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.same_shape(other) && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}
