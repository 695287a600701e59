//! Traffic event records and the pure derivations computed from them.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed Pacific Standard Time offset. Daylight saving is not modelled.
pub const PST_OFFSET_MS: i64 = -8 * 3_600_000;

pub const MIN_LEVEL: u8 = 1;
pub const MAX_LEVEL: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    RoadClosed,
    Jam,
    Accident,
    Hazard,
}

impl EventType {
    pub const ALL: [EventType; 4] = [
        EventType::RoadClosed,
        EventType::Jam,
        EventType::Accident,
        EventType::Hazard,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::RoadClosed => "road_closed",
            EventType::Jam => "jam",
            EventType::Accident => "accident",
            EventType::Hazard => "hazard",
        }
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown event type {s:?}")))
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A user-reported traffic event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub location_x: f64,
    pub location_y: f64,
    pub street: Option<String>,
    pub city: Option<String>,
    pub country: Option<String>,
    pub road_type: Option<i32>,
    pub report_description: Option<String>,
    pub event_type: EventType,
    /// Epoch milliseconds, UTC.
    pub pub_date: i64,
}

/// Device-captured congestion telemetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JamRecord {
    pub location_x: f64,
    pub location_y: f64,
    pub street: Option<String>,
    pub city: Option<String>,
    pub country: Option<String>,
    pub road_type: Option<i32>,
    /// Epoch milliseconds, UTC.
    pub pub_date: i64,
    /// 1 (almost no jam) ..= 5 (standstill).
    pub level: u8,
    /// Miles per hour.
    pub speed: f64,
    /// Meters.
    pub length: f64,
    /// Seconds of deviation from the free-flow travel time.
    pub delay: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    /// Monday = 0 .. Sunday = 6.
    pub fn index(self) -> u8 {
        self as u8
    }

    fn from_chrono(w: chrono::Weekday) -> Self {
        match w {
            chrono::Weekday::Mon => Weekday::Monday,
            chrono::Weekday::Tue => Weekday::Tuesday,
            chrono::Weekday::Wed => Weekday::Wednesday,
            chrono::Weekday::Thu => Weekday::Thursday,
            chrono::Weekday::Fri => Weekday::Friday,
            chrono::Weekday::Sat => Weekday::Saturday,
            chrono::Weekday::Sun => Weekday::Sunday,
        }
    }
}

/// Calendar fields of a publication instant, in Pacific Standard Time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeParts {
    pub date_pst: NaiveDateTime,
    pub month: u8,
    pub day: u8,
    pub hour: u8,
    pub min: u8,
    pub sec: u8,
    pub weekday: Weekday,
}

/// Jam label: true when the level is strictly greater than 2.
pub fn derive_label(level: u8) -> Result<bool> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&level) {
        return Err(Error::Validation(format!(
            "jam level {level} outside {MIN_LEVEL}..={MAX_LEVEL}"
        )));
    }
    Ok(level > 2)
}

/// Splits a UTC epoch-millisecond timestamp into PST (UTC-8) calendar fields.
pub fn decompose_time(pub_date_utc: i64) -> Result<TimeParts> {
    if pub_date_utc <= 0 {
        return Err(Error::Validation(format!(
            "pub_date must be positive, got {pub_date_utc}"
        )));
    }
    let local = DateTime::from_timestamp_millis(pub_date_utc + PST_OFFSET_MS)
        .ok_or_else(|| Error::Validation(format!("pub_date {pub_date_utc} out of range")))?
        .naive_utc();
    Ok(TimeParts {
        date_pst: local,
        month: local.month() as u8,
        day: local.day() as u8,
        hour: local.hour() as u8,
        min: local.minute() as u8,
        sec: local.second() as u8,
        weekday: Weekday::from_chrono(local.weekday()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Day-by-day calendar walk from 1970-01-01 (a Thursday); shares nothing with chrono.
    fn oracle(ms_utc: i64) -> (i64, u8, u8, u8, u8, u8, u8) {
        fn leap(y: i64) -> bool {
            (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
        }
        let local = ms_utc.div_euclid(1000) - 8 * 3600;
        let mut days = local.div_euclid(86_400);
        let secs = local.rem_euclid(86_400);
        let weekday = ((days + 3).rem_euclid(7)) as u8; // Monday = 0
        let mut year = 1970;
        loop {
            let len = if leap(year) { 366 } else { 365 };
            if days < len {
                break;
            }
            days -= len;
            year += 1;
        }
        let lens = [
            31,
            if leap(year) { 29 } else { 28 },
            31,
            30,
            31,
            30,
            31,
            31,
            30,
            31,
            30,
            31,
        ];
        let mut month = 0;
        while days >= lens[month] {
            days -= lens[month];
            month += 1;
        }
        (
            year,
            month as u8 + 1,
            days as u8 + 1,
            (secs / 3600) as u8,
            (secs / 60 % 60) as u8,
            (secs % 60) as u8,
            weekday,
        )
    }

    const JAN1_2018_UTC_MS: i64 = 1_514_764_800_000;

    #[test]
    fn label_rule() {
        assert!(derive_label(3).unwrap());
        assert!(!derive_label(2).unwrap());
        assert!(!derive_label(1).unwrap());
        assert!(derive_label(5).unwrap());
        assert!(derive_label(0).is_err());
        assert!(derive_label(6).is_err());
    }

    #[test]
    fn pst_midnight_new_year() {
        let t = decompose_time(JAN1_2018_UTC_MS + 8 * 3_600_000).unwrap();
        assert_eq!(t.date_pst.to_string(), "2018-01-01 00:00:00");
        assert_eq!((t.month, t.day, t.hour), (1, 1, 0));
        assert_eq!(t.weekday, Weekday::Monday);
        assert_eq!(oracle(JAN1_2018_UTC_MS + 8 * 3_600_000), (2018, 1, 1, 0, 0, 0, 0));
    }

    #[test]
    fn pst_new_years_eve_is_sunday() {
        let t = decompose_time(JAN1_2018_UTC_MS - 16 * 3_600_000).unwrap();
        assert_eq!(t.date_pst.to_string(), "2017-12-31 00:00:00");
        assert_eq!(t.weekday, Weekday::Sunday);
    }

    #[test]
    fn crosses_midnight_westward() {
        let t = decompose_time(JAN1_2018_UTC_MS + 8 * 3_600_000 - 1000).unwrap();
        assert_eq!(t.date_pst.to_string(), "2017-12-31 23:59:59");
        assert_eq!((t.month, t.day, t.hour, t.min, t.sec), (12, 31, 23, 59, 59));
    }

    #[test]
    fn rejects_non_positive_timestamps() {
        assert!(decompose_time(0).is_err());
        assert!(decompose_time(-5).is_err());
    }

    #[test]
    fn event_type_names() {
        for t in EventType::ALL {
            assert_eq!(t.as_str().parse::<EventType>().unwrap(), t);
        }
        assert!("flood".parse::<EventType>().is_err());
    }

    proptest! {
        #[test]
        fn matches_calendar_oracle(ms in 1i64..4_102_444_800_000) {
            let t = decompose_time(ms).unwrap();
            let (year, month, day, hour, min, sec, wd) = oracle(ms);
            prop_assert_eq!(t.date_pst.year() as i64, year);
            prop_assert_eq!((t.month, t.day, t.hour, t.min, t.sec), (month, day, hour, min, sec));
            prop_assert_eq!(t.weekday.index(), wd);
        }

        #[test]
        fn next_day_keeps_clock_fields(ms in 1i64..4_000_000_000_000) {
            let a = decompose_time(ms).unwrap();
            let b = decompose_time(ms + 86_400_000).unwrap();
            prop_assert_eq!((a.hour, a.min, a.sec), (b.hour, b.min, b.sec));
            prop_assert_eq!((a.weekday.index() + 1) % 7, b.weekday.index());
        }

        #[test]
        fn reassembly_recovers_utc_seconds(ms in 1i64..4_000_000_000_000) {
            let t = decompose_time(ms).unwrap();
            let back = t.date_pst.and_utc().timestamp() + 8 * 3600;
            prop_assert_eq!(back, ms.div_euclid(1000));
        }

        #[test]
        fn label_is_monotone(a in 1u8..=5, b in 1u8..=5) {
            if a <= b {
                prop_assert!(derive_label(a).unwrap() <= derive_label(b).unwrap());
            }
        }
    }
}
