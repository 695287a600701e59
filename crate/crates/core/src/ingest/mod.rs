//! Event-file ingestion: parse line-delimited JSON, clean, and encode into a
//! [`FeatureMatrix`].
//!
//! Parsing is tolerant: a bad line is counted under a rejection reason and the
//! stream continues. The batch functions ([`parse_jams`], [`clean`], [`encode`])
//! and the streaming [`JamIngestor`] share the same per-record code paths.

mod clean;
mod encode;
mod format;
mod parse;
mod schema;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use clean::{clean, clean_reason, CleanConfig};
pub use encode::{encode, EncodingMap, FeatureMatrix, JamIngestor, MatrixBuilder};
pub use format::{read_matrix, read_matrix_header, write_matrix, MatrixHeader, MATRIX_MAGIC, MATRIX_VERSION};
pub use parse::{parse_alert_line, parse_alerts, parse_jam_line, parse_jams, Rejection};
pub use schema::{FeatureKind, FeatureSchema, FeatureSet, FeatureSpec, Field};

/// Row accounting for one ingestion step (or several, merged).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files_read: u64,
    pub rows_accepted: u64,
    pub rows_rejected: u64,
    pub rejection_reasons: BTreeMap<String, u64>,
}

impl IngestReport {
    pub fn accept(&mut self) {
        self.rows_accepted += 1;
    }

    pub fn reject(&mut self, reason: &str) {
        self.rows_rejected += 1;
        *self.rejection_reasons.entry(reason.to_owned()).or_default() += 1;
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.files_read += other.files_read;
        self.rows_accepted += other.rows_accepted;
        self.rows_rejected += other.rows_rejected;
        for (reason, n) in &other.rejection_reasons {
            *self.rejection_reasons.entry(reason.clone()).or_default() += n;
        }
    }

    pub fn rows_seen(&self) -> u64 {
        self.rows_accepted + self.rows_rejected
    }
}
