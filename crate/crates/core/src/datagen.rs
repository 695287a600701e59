//! Seeded synthetic alert/jam streams in the ingest JSONL dialect.
//!
//! Streams are reproducible byte for byte from the seed:
//!
//! * PRNG: xoshiro256++ seeded with `seed_from_u64` (SplitMix64 expansion).
//!   Jams use `seed`, alerts use `seed ^ ALERT_STREAM`.
//! * Draws use `rand` 0.8's `Standard` (uniform), `gen_range` (site, kind,
//!   timestamp), `WeightedIndex` (level) and `rand_distr`'s `StandardNormal`.
//! * Per jam, draws happen in this order: timestamp, site, x jitter, y jitter,
//!   level, then (band, noise) for speed, length and delay.
//!
//! Jam measurements come from per-level bands that do not overlap, so with
//! `coupling_noise = 0` speed, length and delay each determine the level.
//! Level probabilities are also nudged up for rush hours and freeways, which
//! gives the location/time features a weak honest signal.

use std::io::Write;

use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{EventType, PST_OFFSET_MS};

/// 2017-12-31T00:00:00Z
pub const DEFAULT_WINDOW_START: i64 = 1_514_678_400_000;
/// 2018-01-09T00:00:00Z (exclusive): nine days.
pub const DEFAULT_WINDOW_END: i64 = 1_515_456_000_000;

pub const ALERT_STREAM: u64 = 0xA1E7_5EED_0000_0001;

pub const SPEED_MIDPOINTS: [f64; 5] = [60.0, 45.0, 30.0, 15.0, 3.0];
pub const DELAY_MIDPOINTS: [f64; 5] = [30.0, 90.0, 240.0, 600.0, 1500.0];
pub const LENGTH_MIDPOINTS: [f64; 5] = [200.0, 600.0, 1500.0, 3000.0, 6000.0];

/// Levels 3..=5 carry 66% of the mass, close to the positive share of the
/// reference confusion matrix (4,398,279 of 6,658,144).
pub const DEFAULT_LEVEL_WEIGHTS: [f64; 5] = [0.17, 0.17, 0.22, 0.22, 0.22];

const RUSH_HOUR_BOOST: f64 = 1.6;
const FREEWAY_BOOST: f64 = 1.3;
const JITTER_DEGREES: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_jams: u64,
    pub n_alerts: u64,
    pub seed: u64,
    /// `[start, end)` in UTC epoch milliseconds.
    pub date_window: (i64, i64),
    pub level_weights: [f64; 5],
    pub coupling_noise: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_jams: 100_000,
            n_alerts: 10_000,
            seed: 42,
            date_window: (DEFAULT_WINDOW_START, DEFAULT_WINDOW_END),
            level_weights: DEFAULT_LEVEL_WEIGHTS,
            coupling_noise: 0.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let (start, end) = self.date_window;
        if start <= 0 || start >= end {
            return Err(Error::Config(format!(
                "date window must satisfy 0 < start < end, got [{start}, {end})"
            )));
        }
        if self.level_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("level weights must be finite and non-negative".into()));
        }
        if self.level_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("level weights must not all be zero".into()));
        }
        if !self.coupling_noise.is_finite() || self.coupling_noise < 0.0 {
            return Err(Error::Config("coupling_noise must be a finite value >= 0".into()));
        }
        Ok(())
    }

    /// Config for shard `index` of a multi-file run.
    pub fn shard(&self, index: u64) -> GenConfig {
        GenConfig {
            seed: self.seed.wrapping_add(index),
            ..self.clone()
        }
    }
}

struct Site {
    street: &'static str,
    city: &'static str,
    road_type: i32,
    x: f64,
    y: f64,
}

const fn site(street: &'static str, city: &'static str, road_type: i32, x: f64, y: f64) -> Site {
    Site {
        street,
        city,
        road_type,
        x,
        y,
    }
}

// Waze road types: 1 street, 2 primary street, 3 freeway, 4 ramp, 6 primary highway.
const SITES: [Site; 24] = [
    site("I-405 N", "Los Angeles", 3, -118.4695, 34.0617),
    site("I-405 S", "Los Angeles", 3, -118.4482, 33.9854),
    site("I-10 E", "Los Angeles", 3, -118.3446, 34.0361),
    site("I-10 W", "Santa Monica", 3, -118.4771, 34.0195),
    site("US-101 N", "Los Angeles", 3, -118.3290, 34.1015),
    site("US-101 S", "Sherman Oaks", 3, -118.4512, 34.1557),
    site("I-5 N", "Burbank", 3, -118.3187, 34.1808),
    site("I-110 S", "Los Angeles", 3, -118.2747, 34.0093),
    site("I-105 W", "Inglewood", 3, -118.3530, 33.9285),
    site("CA-110 N", "Pasadena", 3, -118.1686, 34.1170),
    site("to I-405 N", "Culver City", 4, -118.3965, 34.0090),
    site("to US-101 S", "Hollywood", 4, -118.3390, 34.0990),
    site("Wilshire Blvd", "Los Angeles", 2, -118.3120, 34.0618),
    site("Sunset Blvd", "West Hollywood", 2, -118.3850, 34.0910),
    site("Santa Monica Blvd", "Beverly Hills", 2, -118.4050, 34.0700),
    site("Sepulveda Blvd", "Los Angeles", 2, -118.4450, 34.0350),
    site("Ventura Blvd", "Studio City", 2, -118.3960, 34.1430),
    site("Colorado Blvd", "Pasadena", 2, -118.1440, 34.1460),
    site("Figueroa St", "Los Angeles", 1, -118.2620, 34.0480),
    site("Main St", "Santa Monica", 1, -118.4820, 34.0030),
    site("Lincoln Blvd", "Venice", 2, -118.4560, 33.9940),
    site("Pacific Coast Hwy", "Malibu", 6, -118.6920, 34.0360),
    site("Crenshaw Blvd", "Inglewood", 2, -118.3260, 33.9620),
    site("Atlantic Blvd", "Long Beach", 2, -118.1850, 33.8050),
];

const DESCRIPTIONS: [&str; 8] = [
    "",
    "stopped traffic",
    "car on shoulder",
    "lane blocked",
    "two-car collision",
    "debris on road",
    "construction",
    "police on scene",
];

struct Stream(Xoshiro256PlusPlus);

impl Stream {
    fn new(seed: u64) -> Self {
        Stream(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    fn uniform(&mut self) -> f64 {
        self.0.gen()
    }

    fn below(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    fn weighted(&mut self, weights: &[f64]) -> Result<usize> {
        let dist = WeightedIndex::new(weights).map_err(|e| Error::Config(format!("level weights: {e}")))?;
        Ok(self.0.sample(dist))
    }

    fn timestamp(&mut self, (start, end): (i64, i64)) -> i64 {
        self.0.gen_range(start..end)
    }
}

/// Half-width of each level's band: a quarter of the distance to the nearest
/// neighbouring midpoint, so bands never touch.
fn band_half_width(mids: &[f64; 5], level_idx: usize) -> f64 {
    let below = level_idx.checked_sub(1).map(|j| (mids[j] - mids[level_idx]).abs());
    let above = mids.get(level_idx + 1).map(|m| (m - mids[level_idx]).abs());
    let gap = match (below, above) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => mids[level_idx],
    };
    gap / 4.0
}

fn measurement(rng: &mut Stream, mids: &[f64; 5], level_idx: usize, noise: f64) -> f64 {
    let mid = mids[level_idx];
    let hw = band_half_width(mids, level_idx);
    let band = mid - hw + 2.0 * hw * rng.uniform();
    let z = rng.normal();
    (band + noise * mid * z).max(0.0)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn pst_hour(pub_date: i64) -> i64 {
    (pub_date + PST_OFFSET_MS).div_euclid(3_600_000).rem_euclid(24)
}

#[derive(Serialize)]
struct JamLine<'a> {
    location_x: f64,
    location_y: f64,
    street: &'a str,
    city: &'a str,
    country: &'a str,
    road_type: i32,
    pub_date: i64,
    level: u8,
    speed: f64,
    length: i64,
    delay: i64,
}

#[derive(Serialize)]
struct AlertLine<'a> {
    location_x: f64,
    location_y: f64,
    street: &'a str,
    city: &'a str,
    country: &'a str,
    road_type: i32,
    report_description: &'a str,
    #[serde(rename = "type")]
    event_type: &'a str,
    pub_date: i64,
}

fn located(rng: &mut Stream) -> (&'static Site, f64, f64) {
    let s = &SITES[rng.below(SITES.len())];
    let x = round_to(s.x + JITTER_DEGREES * (2.0 * rng.uniform() - 1.0), 6);
    let y = round_to(s.y + JITTER_DEGREES * (2.0 * rng.uniform() - 1.0), 6);
    (s, x, y)
}

/// Writes `config.n_jams` JSONL jam lines to `out`.
pub fn generate_jams<W: Write>(config: &GenConfig, mut out: W) -> Result<()> {
    config.validate()?;
    let mut rng = Stream::new(config.seed);
    let mut line = Vec::with_capacity(256);
    for _ in 0..config.n_jams {
        let pub_date = rng.timestamp(config.date_window);
        let (site, x, y) = located(&mut rng);
        let hour = pst_hour(pub_date);
        let mut boost = 1.0;
        if (7..=9).contains(&hour) || (16..=19).contains(&hour) {
            boost *= RUSH_HOUR_BOOST;
        }
        if site.road_type == 3 {
            boost *= FREEWAY_BOOST;
        }
        let mut weights = config.level_weights;
        for w in &mut weights[2..] {
            *w *= boost;
        }
        let li = rng.weighted(&weights)?;
        let noise = config.coupling_noise;
        let speed = measurement(&mut rng, &SPEED_MIDPOINTS, li, noise);
        let length = measurement(&mut rng, &LENGTH_MIDPOINTS, li, noise);
        let delay = measurement(&mut rng, &DELAY_MIDPOINTS, li, noise);
        line.clear();
        serde_json::to_writer(
            &mut line,
            &JamLine {
                location_x: x,
                location_y: y,
                street: site.street,
                city: site.city,
                country: "US",
                road_type: site.road_type,
                pub_date,
                level: li as u8 + 1,
                speed: round_to(speed, 2),
                length: length.round() as i64,
                delay: delay.round() as i64,
            },
        )?;
        line.push(b'\n');
        out.write_all(&line)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `config.n_alerts` JSONL alert lines to `out`; event types are uniform.
pub fn generate_alerts<W: Write>(config: &GenConfig, mut out: W) -> Result<()> {
    config.validate()?;
    let mut rng = Stream::new(config.seed ^ ALERT_STREAM);
    let mut line = Vec::with_capacity(256);
    for _ in 0..config.n_alerts {
        let pub_date = rng.timestamp(config.date_window);
        let (site, x, y) = located(&mut rng);
        let event_type = EventType::ALL[rng.below(EventType::ALL.len())];
        let description = DESCRIPTIONS[rng.below(DESCRIPTIONS.len())];
        line.clear();
        serde_json::to_writer(
            &mut line,
            &AlertLine {
                location_x: x,
                location_y: y,
                street: site.street,
                city: site.city,
                country: "US",
                road_type: site.road_type,
                report_description: description,
                event_type: event_type.as_str(),
                pub_date,
            },
        )?;
        line.push(b'\n');
        out.write_all(&line)?;
    }
    out.flush()?;
    Ok(())
}

pub fn jams_to_vec(config: &GenConfig) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(config.n_jams as usize * 200);
    generate_jams(config, &mut out)?;
    Ok(out)
}

pub fn alerts_to_vec(config: &GenConfig) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(config.n_alerts as usize * 220);
    generate_alerts(config, &mut out)?;
    Ok(out)
}
