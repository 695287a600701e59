use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::clean::{clean_reason, CleanConfig};
use super::parse::{for_each_line, parse_jam_line, Rejection};
use super::schema::{FeatureKind, FeatureSchema, Field};
use super::IngestReport;
use crate::error::{Error, Result};
use crate::event_model::{decompose_time, derive_label, JamRecord};
use crate::scalar::Scalar;

/// Categorical text → dense index, per categorical feature.
///
/// Categories are stored sorted; the index of a category is its position + 1.
/// Index 0 is reserved for categories not seen when the map was built.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub columns: BTreeMap<String, Vec<String>>,
}

impl EncodingMap {
    pub const UNKNOWN: u32 = 0;

    pub fn index(&self, feature: &str, category: &str) -> u32 {
        self.columns
            .get(feature)
            .and_then(|cats| cats.binary_search_by(|c| c.as_str().cmp(category)).ok())
            .map_or(Self::UNKNOWN, |pos| pos as u32 + 1)
    }

    pub fn categories(&self, feature: &str) -> &[String] {
        self.columns.get(feature).map_or(&[], Vec::as_slice)
    }
}

/// Encoded design matrix: row-major values plus one boolean label per row.
///
/// Missing values are NaN, which no real encoded value can equal.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<F> {
    pub n_rows: usize,
    pub n_features: usize,
    pub values: Vec<F>,
    pub labels: Vec<bool>,
    pub schema: FeatureSchema,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn new(values: Vec<F>, labels: Vec<bool>, schema: FeatureSchema) -> Result<Self> {
        let n_features = schema.len();
        let n_rows = labels.len();
        if n_features == 0 {
            return Err(Error::Validation("matrix needs at least one feature".into()));
        }
        if values.len() != n_rows * n_features {
            return Err(Error::Validation(format!(
                "{} values do not form {n_rows} rows of {n_features} features",
                values.len()
            )));
        }
        Ok(FeatureMatrix {
            n_rows,
            n_features,
            values,
            labels,
            schema,
        })
    }

    /// Convenience constructor from per-row vectors, with a custom schema
    /// named `f0, f1, ...`.
    pub fn from_rows(rows: &[Vec<F>], labels: &[bool]) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::Validation("ragged rows".into()));
        }
        let schema = FeatureSchema {
            features: (0..n_features)
                .map(|i| super::FeatureSpec {
                    name: format!("f{i}"),
                    kind: FeatureKind::Numeric,
                    source: format!("f{i}"),
                })
                .collect(),
            feature_set: super::FeatureSet::Custom,
        };
        Self::new(rows.concat(), labels.to_vec(), schema)
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.values[r * self.n_features..(r + 1) * self.n_features]
    }

    #[inline]
    pub fn get(&self, r: usize, f: usize) -> F {
        self.values[r * self.n_features + f]
    }

    pub fn column(&self, f: usize) -> impl Iterator<Item = F> + '_ {
        self.values.iter().skip(f).step_by(self.n_features).copied()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.values.chunks_exact(self.n_features)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            n_rows: rows.len(),
            n_features: self.n_features,
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            schema: self.schema.clone(),
        }
    }

    /// The columns of `schema`, looked up by name. Fails if a feature is
    /// absent from this matrix.
    pub fn project(&self, schema: &FeatureSchema) -> Result<Self> {
        let cols = schema
            .features
            .iter()
            .map(|f| {
                self.schema
                    .index_of(&f.name)
                    .ok_or_else(|| Error::Schema(format!("feature {:?} is not in the matrix", f.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for row in self.rows() {
            values.extend(cols.iter().map(|&c| row[c]));
        }
        FeatureMatrix::new(values, self.labels.clone(), schema.clone())
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

struct Provisional {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

/// Incremental encoder: push cleaned records one at a time, then `finish`.
///
/// Without a frozen map, categorical columns first receive provisional ids in
/// order of appearance; `finish` rewrites them to lexicographic indices. With a
/// frozen map every lookup is final and the map is returned unchanged.
pub struct MatrixBuilder<F> {
    schema: FeatureSchema,
    fields: Vec<Field>,
    needs_time: bool,
    frozen: Option<EncodingMap>,
    provisional: Vec<Option<Provisional>>,
    values: Vec<F>,
    labels: Vec<bool>,
}

impl<F: Scalar> MatrixBuilder<F> {
    pub fn new(schema: FeatureSchema, existing: Option<EncodingMap>) -> Result<Self> {
        let fields = schema.resolve()?;
        let provisional = fields
            .iter()
            .map(|f| {
                (existing.is_none() && f.kind() == FeatureKind::Categorical).then(|| Provisional {
                    ids: HashMap::new(),
                    names: Vec::new(),
                })
            })
            .collect();
        Ok(MatrixBuilder {
            needs_time: fields.iter().any(|f| f.is_time_part()),
            schema,
            fields,
            frozen: existing,
            provisional,
            values: Vec::new(),
            labels: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn push(&mut self, rec: &JamRecord) -> Result<()> {
        let label = derive_label(rec.level)?;
        let time = if self.needs_time {
            Some(decompose_time(rec.pub_date)?)
        } else {
            None
        };
        let num = |v: f64| F::from_f64_lossy(v);
        for i in 0..self.fields.len() {
            let field = self.fields[i];
            let v = match field {
                Field::LocationX => num(rec.location_x),
                Field::LocationY => num(rec.location_y),
                Field::RoadType => rec.road_type.map_or(F::nan(), |t| num(t as f64)),
                Field::PubDate => num(rec.pub_date as f64),
                Field::Speed => num(rec.speed),
                Field::Length => num(rec.length),
                Field::Delay => num(rec.delay),
                Field::Street | Field::City | Field::Country => {
                    let text = match field {
                        Field::Street => rec.street.as_deref(),
                        Field::City => rec.city.as_deref(),
                        _ => rec.country.as_deref(),
                    };
                    match text {
                        None => F::nan(),
                        Some(text) => num(self.category_id(i, text) as f64),
                    }
                }
                _ => {
                    let t = time.as_ref().expect("time parts computed");
                    num(match field {
                        Field::Month => t.month,
                        Field::Day => t.day,
                        Field::Hour => t.hour,
                        Field::Min => t.min,
                        Field::Sec => t.sec,
                        _ => t.weekday.index(),
                    } as f64)
                }
            };
            self.values.push(v);
        }
        self.labels.push(label);
        Ok(())
    }

    fn category_id(&mut self, feature: usize, text: &str) -> u32 {
        if let Some(map) = &self.frozen {
            return map.index(&self.schema.features[feature].name, text);
        }
        let prov = self.provisional[feature].as_mut().expect("categorical column");
        if let Some(&id) = prov.ids.get(text) {
            return id;
        }
        prov.names.push(text.to_owned());
        let id = prov.names.len() as u32;
        prov.ids.insert(text.to_owned(), id);
        id
    }

    pub fn finish(self) -> Result<(FeatureMatrix<F>, EncodingMap)> {
        let MatrixBuilder {
            schema,
            frozen,
            provisional,
            mut values,
            labels,
            ..
        } = self;
        let n_features = schema.len();
        let map = match frozen {
            Some(map) => map,
            None => {
                let mut map = EncodingMap::default();
                for (f, prov) in provisional.into_iter().enumerate() {
                    let Some(prov) = prov else { continue };
                    let mut order: Vec<u32> = (0..prov.names.len() as u32).collect();
                    order.sort_by(|&a, &b| prov.names[a as usize].cmp(&prov.names[b as usize]));
                    // remap[provisional id] = final index
                    let mut remap = vec![F::nan(); prov.names.len() + 1];
                    for (rank, &p) in order.iter().enumerate() {
                        remap[p as usize + 1] = F::from_f64_lossy((rank + 1) as f64);
                    }
                    for v in values.iter_mut().skip(f).step_by(n_features) {
                        if !v.is_nan() {
                            *v = remap[v.to_usize().expect("provisional id")];
                        }
                    }
                    let mut names = prov.names;
                    names.sort();
                    map.columns.insert(schema.features[f].name.clone(), names);
                }
                map
            }
        };
        Ok((FeatureMatrix::new(values, labels, schema)?, map))
    }
}

/// Encodes cleaned records under `schema`. With `existing`, the map is used
/// read-only and unseen categories get index 0.
pub fn encode<F: Scalar>(
    records: &[JamRecord],
    schema: &FeatureSchema,
    existing: Option<&EncodingMap>,
) -> Result<(FeatureMatrix<F>, EncodingMap)> {
    let mut builder = MatrixBuilder::new(schema.clone(), existing.cloned())?;
    for rec in records {
        builder.push(rec)?;
    }
    builder.finish()
}

/// Streaming parse → clean → encode over any number of JSONL readers.
///
/// Memory is bounded by the encoded matrix; raw records are never collected.
pub struct JamIngestor<F> {
    builder: MatrixBuilder<F>,
    clean: CleanConfig,
    report: IngestReport,
}

impl<F: Scalar> JamIngestor<F> {
    pub fn new(schema: FeatureSchema, clean: CleanConfig, existing: Option<EncodingMap>) -> Result<Self> {
        Ok(JamIngestor {
            builder: MatrixBuilder::new(schema, existing)?,
            clean,
            report: IngestReport::default(),
        })
    }

    pub fn ingest<R: BufRead>(&mut self, reader: R) -> Result<()> {
        let clean = self.clean;
        let builder = &mut self.builder;
        let mut push_err = None;
        let report = for_each_line(
            reader,
            |line| {
                let rec = parse_jam_line(line).map_err(Rejection::reason)?;
                match clean_reason(&rec, &clean) {
                    Some(reason) => Err(reason),
                    None => Ok(rec),
                }
            },
            |rec| {
                if push_err.is_none() {
                    push_err = builder.push(&rec).err();
                }
            },
        )?;
        if let Some(e) = push_err {
            return Err(e);
        }
        self.report.merge(&report);
        self.report.files_read += 1;
        Ok(())
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn finish(self) -> Result<(FeatureMatrix<F>, EncodingMap, IngestReport)> {
        let (matrix, map) = self.builder.finish()?;
        Ok((matrix, map, self.report))
    }
}
