use std::io::BufRead;

use serde::Deserialize;
use serde_json::error::Category;

use super::IngestReport;
use crate::error::Result;
use crate::event_model::{AlertRecord, EventType, JamRecord, MAX_LEVEL, MIN_LEVEL};

/// Why a single input line was not turned into a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    MalformedJson,
    InvalidField,
    MissingField(&'static str),
    LevelOutOfRange,
    UnknownEventType,
    InvalidPubDate,
}

impl Rejection {
    pub fn reason(self) -> &'static str {
        match self {
            Rejection::MalformedJson => "malformed_json",
            Rejection::InvalidField => "invalid_field",
            Rejection::MissingField(_) => "missing_field",
            Rejection::LevelOutOfRange => "level_out_of_range",
            Rejection::UnknownEventType => "unknown_event_type",
            Rejection::InvalidPubDate => "invalid_pub_date",
        }
    }
}

impl From<serde_json::Error> for Rejection {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            Category::Data => Rejection::InvalidField,
            _ => Rejection::MalformedJson,
        }
    }
}

#[derive(Deserialize)]
struct RawJam<'a> {
    location_x: Option<f64>,
    location_y: Option<f64>,
    #[serde(borrow)]
    street: Option<std::borrow::Cow<'a, str>>,
    #[serde(borrow)]
    city: Option<std::borrow::Cow<'a, str>>,
    #[serde(borrow)]
    country: Option<std::borrow::Cow<'a, str>>,
    road_type: Option<i32>,
    pub_date: Option<i64>,
    level: Option<i64>,
    speed: Option<f64>,
    length: Option<f64>,
    delay: Option<f64>,
}

#[derive(Deserialize)]
struct RawAlert<'a> {
    location_x: Option<f64>,
    location_y: Option<f64>,
    #[serde(borrow)]
    street: Option<std::borrow::Cow<'a, str>>,
    #[serde(borrow)]
    city: Option<std::borrow::Cow<'a, str>>,
    #[serde(borrow)]
    country: Option<std::borrow::Cow<'a, str>>,
    road_type: Option<i32>,
    #[serde(borrow)]
    report_description: Option<std::borrow::Cow<'a, str>>,
    #[serde(rename = "type", alias = "event_type", borrow)]
    event_type: Option<std::borrow::Cow<'a, str>>,
    pub_date: Option<i64>,
}

fn required<T>(v: Option<T>, name: &'static str) -> Result<T, Rejection> {
    v.ok_or(Rejection::MissingField(name))
}

fn pub_date(v: Option<i64>) -> Result<i64, Rejection> {
    let t = required(v, "pub_date")?;
    if t <= 0 {
        return Err(Rejection::InvalidPubDate);
    }
    Ok(t)
}

/// Parses one non-blank JSONL line into a jam record.
pub fn parse_jam_line(line: &str) -> Result<JamRecord, Rejection> {
    let raw: RawJam = serde_json::from_str(line)?;
    let level = required(raw.level, "level")?;
    if level < MIN_LEVEL as i64 || level > MAX_LEVEL as i64 {
        return Err(Rejection::LevelOutOfRange);
    }
    Ok(JamRecord {
        location_x: required(raw.location_x, "location_x")?,
        location_y: required(raw.location_y, "location_y")?,
        street: raw.street.map(Into::into),
        city: raw.city.map(Into::into),
        country: raw.country.map(Into::into),
        road_type: raw.road_type,
        pub_date: pub_date(raw.pub_date)?,
        level: level as u8,
        speed: required(raw.speed, "speed")?,
        length: required(raw.length, "length")?,
        delay: required(raw.delay, "delay")?,
    })
}

/// Parses one non-blank JSONL line into an alert record.
pub fn parse_alert_line(line: &str) -> Result<AlertRecord, Rejection> {
    let raw: RawAlert = serde_json::from_str(line)?;
    let event_type = required(raw.event_type, "type")?
        .parse::<EventType>()
        .map_err(|_| Rejection::UnknownEventType)?;
    Ok(AlertRecord {
        location_x: required(raw.location_x, "location_x")?,
        location_y: required(raw.location_y, "location_y")?,
        street: raw.street.map(Into::into),
        city: raw.city.map(Into::into),
        country: raw.country.map(Into::into),
        road_type: raw.road_type,
        report_description: raw.report_description.map(Into::into),
        event_type,
        pub_date: pub_date(raw.pub_date)?,
    })
}

/// Runs `parse` over every non-blank line of `reader`, handing accepted
/// records to `sink` and counting each failure under the returned reason. Blank (whitespace-only) lines are neither accepted nor
/// rejected.
pub(crate) fn for_each_line<R, T, P, S>(mut reader: R, mut parse: P, mut sink: S) -> Result<IngestReport>
where
    R: BufRead,
    P: FnMut(&str) -> Result<T, &'static str>,
    S: FnMut(T),
{
    let mut report = IngestReport::default();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        let Ok(line) = std::str::from_utf8(&buf) else {
            report.reject(Rejection::MalformedJson.reason());
            continue;
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse(line) {
            Ok(rec) => {
                report.accept();
                sink(rec);
            }
            Err(reason) => report.reject(reason),
        }
    }
    Ok(report)
}

pub fn parse_jams<R: BufRead>(reader: R) -> Result<(Vec<JamRecord>, IngestReport)> {
    let mut out = Vec::new();
    let report = for_each_line(
        reader,
        |l| parse_jam_line(l).map_err(Rejection::reason),
        |r| out.push(r),
    )?;
    Ok((out, report))
}

pub fn parse_alerts<R: BufRead>(reader: R) -> Result<(Vec<AlertRecord>, IngestReport)> {
    let mut out = Vec::new();
    let report = for_each_line(
        reader,
        |l| parse_alert_line(l).map_err(Rejection::reason),
        |r| out.push(r),
    )?;
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"level":4,"speed":3.1,"length":500,"delay":120,"pub_date":1514764800000,"street":"I-405 N","city":"Los Angeles","country":"US","location_x":-118.4,"location_y":34.0,"road_type":3}"#;

    #[test]
    fn well_formed_jam() {
        let (recs, rep) = parse_jams(GOOD.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(rep.rows_rejected, 0);
        let r = &recs[0];
        assert_eq!(r.level, 4);
        assert_eq!(r.street.as_deref(), Some("I-405 N"));
        assert_eq!(r.road_type, Some(3));
        assert_eq!(r.pub_date, 1_514_764_800_000);
    }

    #[test]
    fn level_out_of_range_is_counted() {
        let line = GOOD.replace("\"level\":4", "\"level\":9");
        let (recs, rep) = parse_jams(line.as_bytes()).unwrap();
        assert!(recs.is_empty());
        assert_eq!(rep.rejection_reasons["level_out_of_range"], 1);
    }

    #[test]
    fn garbage_is_malformed() {
        let (recs, rep) = parse_jams("not json\n".as_bytes()).unwrap();
        assert!(recs.is_empty());
        assert_eq!(rep.rejection_reasons["malformed_json"], 1);
        assert_eq!(rep.rows_rejected, 1);
    }

    #[test]
    fn missing_and_mistyped_fields() {
        let no_speed = GOOD.replace("\"speed\":3.1,", "");
        let bad_type = GOOD.replace("\"speed\":3.1", "\"speed\":\"fast\"");
        let input = format!("{no_speed}\n{bad_type}\n");
        let (_, rep) = parse_jams(input.as_bytes()).unwrap();
        assert_eq!(rep.rejection_reasons["missing_field"], 1);
        assert_eq!(rep.rejection_reasons["invalid_field"], 1);
    }

    #[test]
    fn alerts_accept_known_types_only() {
        let ok = r#"{"type":"accident","pub_date":1514764800000,"location_x":-118.3,"location_y":34.1,"report_description":"two cars"}"#;
        let bad = ok.replace("accident", "flood");
        let input = format!("{ok}\n\n   \n{bad}\n");
        let (recs, rep) = parse_alerts(input.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].event_type, EventType::Accident);
        assert_eq!(rep.rows_accepted, 1);
        assert_eq!(rep.rows_rejected, 1);
        assert_eq!(rep.rejection_reasons["unknown_event_type"], 1);
    }

    #[test]
    fn event_type_key_alias() {
        let line = r#"{"event_type":"hazard","pub_date":5,"location_x":1,"location_y":2}"#;
        assert_eq!(parse_alert_line(line).unwrap().event_type, EventType::Hazard);
    }

    #[test]
    fn non_positive_pub_date() {
        let line = GOOD.replace("1514764800000", "0");
        assert_eq!(parse_jam_line(&line), Err(Rejection::InvalidPubDate));
    }

    #[test]
    fn invalid_utf8_is_rejected_not_fatal() {
        let mut bytes = b"\xff\xfe\n".to_vec();
        bytes.extend_from_slice(GOOD.as_bytes());
        let (recs, rep) = parse_jams(&bytes[..]).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(rep.rows_rejected, 1);
    }
}
