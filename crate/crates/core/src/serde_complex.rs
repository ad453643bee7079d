//! Serde adapters writing complex numbers as `[re, im]` pairs.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::{ComplexMatrix, ComplexVector};

fn pair(z: &Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpair(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

pub fn vector_to_pairs(v: &ComplexVector) -> Vec<[f64; 2]> {
    v.iter().map(pair).collect()
}

pub fn vector_from_pairs(p: Vec<[f64; 2]>) -> ComplexVector {
    ComplexVector::from_iterator(p.len(), p.into_iter().map(unpair))
}

pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| pair(&m[(r, c)])).collect())
        .collect()
}

pub fn matrix_from_rows<E: serde::de::Error>(rows: Vec<Vec<[f64; 2]>>) -> Result<ComplexMatrix, E> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(E::custom("ragged complex matrix"));
    }
    Ok(ComplexMatrix::from_fn(nrows, ncols, |r, c| unpair(rows[r][c])))
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &ComplexVector, s: S) -> Result<S::Ok, S::Error> {
        vector_to_pairs(v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexVector, D::Error> {
        Ok(vector_from_pairs(Vec::deserialize(d)?))
    }
}

pub mod vector_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[ComplexVector], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(vector_to_pairs).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexVector>, D::Error> {
        let raw: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(vector_from_pairs).collect())
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        matrix_from_rows(Vec::deserialize(d)?)
    }
}

pub mod matrix_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[ComplexMatrix], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(matrix_to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexMatrix>, D::Error> {
        let raw: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
        raw.into_iter().map(matrix_from_rows).collect()
    }
}
