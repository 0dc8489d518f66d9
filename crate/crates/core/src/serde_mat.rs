//! Serialize nalgebra matrices as nested row arrays, vectors as flat arrays.

use nalgebra::DMatrix;
use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    // keep the column count for 0-row matrices
    (m.ncols(), rows).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let (ncols, rows): (usize, Vec<Vec<f64>>) = Deserialize::deserialize(d)?;
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(D::Error::custom("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        let v: Vec<f64> = Deserialize::deserialize(d)?;
        Ok(DVector::from_vec(v))
    }
}
