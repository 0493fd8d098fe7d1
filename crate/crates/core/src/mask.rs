//! Per-pixel prediction and ground-truth grids.

use crate::error::{Error, Result};

/// Predicted foreground probabilities for one image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Contract(format!(
                "probability at pixel {i} is {v}, outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// A single-row map, convenient for small hand-written examples.
    pub fn from_row(values: Vec<f64>) -> Result<Self> {
        Self::new(values.len(), 1, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Returns a copy with pixel `index` replaced.
    pub fn with_value(&self, index: usize, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Contract(format!(
                "probability {value} outside [0, 1]"
            )));
        }
        let mut values = self.values.clone();
        values[index] = value;
        Ok(Self {
            width: self.width,
            height: self.height,
            values,
        })
    }
}

/// Binary ground-truth labels for one image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v > 1) {
            return Err(Error::Contract(format!(
                "mask label at pixel {i} is {v}, expected 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_row(values: Vec<u8>) -> Result<Self> {
        Self::new(values.len(), 1, values)
    }

    pub fn from_bools(width: usize, height: usize, values: &[bool]) -> Result<Self> {
        Self::new(width, height, values.iter().map(|&b| b as u8).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn is_foreground(&self, index: usize) -> bool {
        self.values[index] == 1
    }

    pub fn foreground_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.foreground_count() as f64 / self.values.len() as f64
    }

    /// The mask as a hard probability map.
    pub fn to_prob_map(&self) -> ProbMap {
        ProbMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| v as f64).collect(),
        }
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("dims", "width and height must be positive"));
    }
    if width * height != len {
        return Err(Error::Contract(format!(
            "{len} values do not fill a {width}x{height} grid"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(p: &ProbMap, g: &BinMask) -> Result<()> {
    if p.dims() != g.dims() {
        return Err(Error::DimensionMismatch {
            expected: g.dims(),
            found: p.dims(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_probability() {
        assert!(ProbMap::from_row(vec![0.2, 1.2]).is_err());
        assert!(ProbMap::from_row(vec![0.2, f64::NAN]).is_err());
    }

    #[test]
    fn rejects_non_binary_label() {
        assert!(BinMask::from_row(vec![0, 1, 2]).is_err());
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(ProbMap::new(2, 2, vec![0.0; 3]).is_err());
        assert!(BinMask::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn mismatched_dims_detected() {
        let p = ProbMap::new(2, 2, vec![0.5; 4]).unwrap();
        let g = BinMask::from_row(vec![0, 1, 0, 1]).unwrap();
        assert!(matches!(
            ensure_same_dims(&p, &g),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
