//! JSON file formats: point files and serde helpers for dense matrices.
//!
//! Matrices are always written as row-major nested arrays.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matops::Mat;
use crate::moments::{mat_from_rows, rows_of};
use crate::ncpoly::MatrixTuple;

pub fn ser_mat<S: Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    rows_of(m).serialize(s)
}

pub fn ser_mats<S: Serializer>(ms: &[Mat], s: S) -> std::result::Result<S::Ok, S::Error> {
    ms.iter().map(rows_of).collect::<Vec<_>>().serialize(s)
}

pub fn ser_opt_mat<S: Serializer>(m: &Option<Mat>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(rows_of).serialize(s)
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    rows_of(m)
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    mat_from_rows(rows)
}

/// `{"g": …, "n": …, "matrices": [[[…]], …]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PointFile {
    pub g: usize,
    pub n: usize,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl PointFile {
    pub fn from_tuple(x: &MatrixTuple) -> Self {
        PointFile { g: x.g(), n: x.n(), matrices: x.mats().iter().map(rows_of).collect() }
    }

    pub fn to_tuple(&self) -> Result<MatrixTuple> {
        if self.matrices.len() != self.g {
            return Err(Error::Shape(format!(
                "point file declares g = {} but lists {} matrices",
                self.g,
                self.matrices.len()
            )));
        }
        let mats = self.matrices.iter().map(|m| mat_from_rows(m)).collect::<Result<Vec<_>>>()?;
        let x = MatrixTuple::new(mats)?;
        if x.n() != self.n {
            return Err(Error::Shape(format!(
                "point file declares n = {} but matrices are {}x{}",
                self.n,
                x.n(),
                x.n()
            )));
        }
        Ok(x)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
