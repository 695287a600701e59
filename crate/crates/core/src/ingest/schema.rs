use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// A jam-record field a feature can be read from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    LocationX,
    LocationY,
    RoadType,
    Street,
    City,
    Country,
    PubDate,
    Month,
    Day,
    Hour,
    Min,
    Sec,
    Weekday,
    Speed,
    Length,
    Delay,
}

impl Field {
    const ALL: [Field; 16] = [
        Field::LocationX,
        Field::LocationY,
        Field::RoadType,
        Field::Street,
        Field::City,
        Field::Country,
        Field::PubDate,
        Field::Month,
        Field::Day,
        Field::Hour,
        Field::Min,
        Field::Sec,
        Field::Weekday,
        Field::Speed,
        Field::Length,
        Field::Delay,
    ];

    pub fn path(self) -> &'static str {
        match self {
            Field::LocationX => "location_x",
            Field::LocationY => "location_y",
            Field::RoadType => "road_type",
            Field::Street => "street",
            Field::City => "city",
            Field::Country => "country",
            Field::PubDate => "pub_date",
            Field::Month => "month",
            Field::Day => "day",
            Field::Hour => "hour",
            Field::Min => "min",
            Field::Sec => "sec",
            Field::Weekday => "weekday",
            Field::Speed => "speed",
            Field::Length => "length",
            Field::Delay => "delay",
        }
    }

    pub fn kind(self) -> FeatureKind {
        match self {
            Field::Street | Field::City | Field::Country => FeatureKind::Categorical,
            _ => FeatureKind::Numeric,
        }
    }

    /// Whether the field is derived from the publication timestamp.
    pub fn is_time_part(self) -> bool {
        matches!(
            self,
            Field::Month | Field::Day | Field::Hour | Field::Min | Field::Sec | Field::Weekday
        )
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(f) = Field::ALL.into_iter().find(|f| f.path() == s) {
            return Ok(f);
        }
        let why = match s {
            "level" => "level is the label source and cannot be a feature",
            "type" | "event_type" | "report_description" => "field exists on alerts, not jams",
            "date_pst" => "use the decomposed calendar fields instead",
            _ => "no such jam field",
        };
        Err(Error::Schema(format!("{s:?}: {why}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// `honest` plus the jam measurements (speed, length, delay) that move with level.
    Leaky,
    /// Location, road and calendar fields only.
    Honest,
    Custom,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Leaky => "leaky",
            FeatureSet::Honest => "honest",
            FeatureSet::Custom => "custom",
        }
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaky" => Ok(FeatureSet::Leaky),
            "honest" => Ok(FeatureSet::Honest),
            other => Err(Error::Config(format!(
                "unknown feature set {other:?} (expected leaky or honest)"
            ))),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Field path on the jam record.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub feature_set: FeatureSet,
}

const HONEST: [Field; 10] = [
    Field::LocationX,
    Field::LocationY,
    Field::RoadType,
    Field::Street,
    Field::City,
    Field::Month,
    Field::Day,
    Field::Hour,
    Field::Min,
    Field::Weekday,
];

const JAM_MEASUREMENTS: [Field; 3] = [Field::Speed, Field::Length, Field::Delay];

impl FeatureSchema {
    fn from_fields(fields: impl IntoIterator<Item = Field>, feature_set: FeatureSet) -> Self {
        let features = fields
            .into_iter()
            .map(|f| FeatureSpec {
                name: f.path().to_owned(),
                kind: f.kind(),
                source: f.path().to_owned(),
            })
            .collect();
        FeatureSchema { features, feature_set }
    }

    pub fn honest() -> Self {
        Self::from_fields(HONEST, FeatureSet::Honest)
    }

    pub fn leaky() -> Self {
        Self::from_fields(HONEST.into_iter().chain(JAM_MEASUREMENTS), FeatureSet::Leaky)
    }

    pub fn named(set: FeatureSet) -> Result<Self> {
        match set {
            FeatureSet::Leaky => Ok(Self::leaky()),
            FeatureSet::Honest => Ok(Self::honest()),
            FeatureSet::Custom => Err(Error::Config("custom schemas are built from a field list".into())),
        }
    }

    /// A schema over the given field paths, in order.
    pub fn custom<S: AsRef<str>>(paths: &[S]) -> Result<Self> {
        let fields = paths
            .iter()
            .map(|p| p.as_ref().parse::<Field>())
            .collect::<Result<Vec<_>>>()?;
        let schema = Self::from_fields(fields, FeatureSet::Custom);
        schema.validate()?;
        Ok(schema)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {:?}", f.name)));
            }
        }
        Ok(())
    }

    /// Resolves every feature's source path against the jam record layout.
    pub fn resolve(&self) -> Result<Vec<Field>> {
        self.validate()?;
        self.features
            .iter()
            .map(|spec| {
                let field: Field = spec.source.parse()?;
                if field.kind() != spec.kind {
                    return Err(Error::Schema(format!(
                        "feature {:?} declared {:?} but {:?} is {:?}",
                        spec.name,
                        spec.kind,
                        spec.source,
                        field.kind()
                    )));
                }
                Ok(field)
            })
            .collect()
    }

    /// Short stable digest of feature names, kinds and sources.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(&self.features).expect("schema serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }
}
