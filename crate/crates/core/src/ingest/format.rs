//! Columnar matrix file.
//!
//! ```text
//! offset  size          field
//! 0       8             magic  b"JAMFMTX\0"
//! 8       4             format version, u32 LE (currently 1)
//! 12      8             header length H, u64 LE
//! 20      H             header, UTF-8 JSON (see MatrixHeader)
//! 20+H    F*R*W         feature columns, column-major; W = 4 (f32) or 8 (f64), LE
//! ...     R             labels, one byte per row (0 or 1)
//! ```
//!
//! Missing values are stored as the canonical quiet NaN of the dtype.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::encode::{EncodingMap, FeatureMatrix};
use super::schema::FeatureSchema;
use super::IngestReport;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MATRIX_MAGIC: &[u8; 8] = b"JAMFMTX\0";
pub const MATRIX_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub dtype: String,
    pub n_rows: u64,
    pub n_features: u64,
    pub schema: FeatureSchema,
    pub schema_fingerprint: String,
    pub encoding: EncodingMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestReport>,
}

pub fn write_matrix<F: Scalar, W: Write>(
    mut out: W,
    matrix: &FeatureMatrix<F>,
    encoding: &EncodingMap,
    ingest: Option<&IngestReport>,
) -> Result<()> {
    let header = MatrixHeader {
        dtype: F::DTYPE.to_owned(),
        n_rows: matrix.n_rows as u64,
        n_features: matrix.n_features as u64,
        schema: matrix.schema.clone(),
        schema_fingerprint: matrix.schema.fingerprint(),
        encoding: encoding.clone(),
        ingest: ingest.cloned(),
    };
    let header = serde_json::to_vec(&header)?;
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&MATRIX_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(matrix.n_rows * F::WIDTH);
    for f in 0..matrix.n_features {
        buf.clear();
        for v in matrix.column(f) {
            let v = if v.is_nan() { F::nan() } else { v };
            v.write_le(&mut buf);
        }
        out.write_all(&buf)?;
    }
    let labels: Vec<u8> = matrix.labels.iter().map(|&l| l as u8).collect();
    out.write_all(&labels)?;
    out.flush()?;
    Ok(())
}

pub fn read_matrix_header<R: Read>(input: &mut R) -> Result<MatrixHeader> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format("not a matrix file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != MATRIX_VERSION {
        return Err(Error::Format(format!("unsupported matrix version {version}")));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut header = vec![0u8; len];
    input.read_exact(&mut header)?;
    let header: MatrixHeader = serde_json::from_slice(&header)?;
    if header.schema.len() as u64 != header.n_features {
        return Err(Error::Format("header feature count disagrees with schema".into()));
    }
    Ok(header)
}

pub fn read_matrix<F: Scalar, R: Read>(mut input: R) -> Result<(FeatureMatrix<F>, MatrixHeader)> {
    let header = read_matrix_header(&mut input)?;
    if header.dtype != F::DTYPE {
        return Err(Error::Format(format!(
            "matrix stores {} values, requested {}",
            header.dtype,
            F::DTYPE
        )));
    }
    let n_rows = header.n_rows as usize;
    let n_features = header.n_features as usize;
    let mut values = vec![F::zero(); n_rows * n_features];
    let mut col = vec![0u8; n_rows * F::WIDTH];
    for f in 0..n_features {
        input.read_exact(&mut col)?;
        for (r, bytes) in col.chunks_exact(F::WIDTH).enumerate() {
            values[r * n_features + f] = F::read_le(bytes);
        }
    }
    let mut labels = vec![0u8; n_rows];
    input.read_exact(&mut labels)?;
    let labels = labels
        .into_iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!("label byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = FeatureMatrix::new(values, labels, header.schema.clone())?;
    Ok((matrix, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> (FeatureMatrix<f64>, EncodingMap) {
        let schema = FeatureSchema::custom(&["street", "speed"]).unwrap();
        let m = FeatureMatrix::new(
            vec![1.0, 2.5, f64::NAN, 0.0, 2.0, 7.25],
            vec![true, false, true],
            schema,
        )
        .unwrap();
        let mut map = EncodingMap::default();
        map.columns.insert("street".into(), vec!["A".into(), "B".into()]);
        (m, map)
    }

    #[test]
    fn layout_is_columnar_after_header() {
        let (m, map) = sample();
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m, &map, None).unwrap();
        assert_eq!(&bytes[..8], MATRIX_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        let h = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = &bytes[20 + h..];
        assert_eq!(body.len(), 2 * 3 * 8 + 3);
        let first_col: Vec<f64> = body[..24].chunks(8).map(f64::read_le).collect();
        assert_eq!(first_col[0], 1.0);
        assert!(first_col[1].is_nan());
        assert_eq!(first_col[2], 2.0);
        assert_eq!(&body[48..], &[1, 0, 1]);
    }

    #[test]
    fn dtype_mismatch_is_rejected() {
        let (m, map) = sample();
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m, &map, None).unwrap();
        assert!(matches!(read_matrix::<f32, _>(&bytes[..]), Err(Error::Format(_))));
        assert!(matches!(
            read_matrix::<f64, _>(&b"garbage!xxxxxxxxxxxx"[..]),
            Err(Error::Format(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            vals in prop::collection::vec(prop::option::of(-1e6f32..1e6), 0..60),
        ) {
            let n_rows = vals.len() / 2;
            let values: Vec<f32> = vals[..n_rows * 2].iter().map(|v| v.unwrap_or(f32::NAN)).collect();
            let labels: Vec<bool> = (0..n_rows).map(|i| i % 3 == 0).collect();
            let schema = FeatureSchema::custom(&["hour", "speed"]).unwrap();
            let m = FeatureMatrix::new(values, labels, schema).unwrap();
            let mut bytes = Vec::new();
            write_matrix(&mut bytes, &m, &EncodingMap::default(), None).unwrap();
            let (back, header) = read_matrix::<f32, _>(&bytes[..]).unwrap();
            prop_assert_eq!(header.n_rows as usize, n_rows);
            prop_assert_eq!(&back.labels, &m.labels);
            for (a, b) in back.values.iter().zip(&m.values) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
