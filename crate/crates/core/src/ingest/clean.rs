use serde::{Deserialize, Serialize};

use super::IngestReport;
use crate::event_model::JamRecord;

/// Cleaning rules. `window` is a half-open `[start, end)` range of UTC epoch
/// milliseconds; `None` keeps every timestamp.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanConfig {
    pub window: Option<(i64, i64)>,
}

/// The reason `rec` would be dropped by cleaning, if any.
pub fn clean_reason(rec: &JamRecord, config: &CleanConfig) -> Option<&'static str> {
    if rec.speed < 0.0 {
        return Some("negative_speed");
    }
    if rec.length < 0.0 {
        return Some("negative_length");
    }
    if rec.delay < 0.0 {
        return Some("negative_delay");
    }
    if rec.location_x == 0.0 && rec.location_y == 0.0 {
        return Some("null_island");
    }
    if let Some((start, end)) = config.window {
        if rec.pub_date < start || rec.pub_date >= end {
            return Some("outside_window");
        }
    }
    None
}

pub fn clean(records: Vec<JamRecord>, config: &CleanConfig) -> (Vec<JamRecord>, IngestReport) {
    let mut report = IngestReport::default();
    let kept = records
        .into_iter()
        .filter(|r| match clean_reason(r, config) {
            Some(reason) => {
                report.reject(reason);
                false
            }
            None => {
                report.accept();
                true
            }
        })
        .collect();
    (kept, report)
}
