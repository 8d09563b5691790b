//! Seedable synthetic trade-and-quote tapes.
//!
//! Each ticker-day is generated minute by minute from two independent
//! streams (see [`crate::rng`] for the stream definition):
//!
//! * `synth/<ticker>/<date>/path` drives the minute-level process. Every
//!   minute draws a book state (`signal` on or off, probability 1/2) and a
//!   direction for the move into the next minute, which equals the state's
//!   sign with probability `(1 + signal_strength) / 2`. The reference price
//!   then moves by `round(R * volatility * |Z|)` ticks in that direction, so
//!   zero-tick moves (ties) occur naturally.
//! * `synth/<ticker>/<date>/events` drives the events inside each minute:
//!   Poisson trade and quote arrivals, sizes and half-spreads.
//!
//! The first trade of a minute prints at the reference price. Quotes sit
//! `hb` ticks below and `ha` ticks above it (`hb, ha >= 1`), so quotes are
//! never crossed. The book state is made visible through the signal
//! channels selected by `signal_features`:
//!
//! * imbalance (`order_ratio`, `log_depth`, `adj_log_quote_slope`): when
//!   the state is on, one side (chosen at random) quotes `q * (1 + imbalance)`
//!   and the other `q * (1 - imbalance)`; otherwise both quote `q`.
//! * spread (`spread`, `rel_spread_mid`, `rel_spread_log`, `quote_slope`,
//!   `log_quote_slope`, `composite_liquidity`): when the state is on, the
//!   mean half-spread doubles.
//!
//! With `signal_strength = 0` the direction is independent of the state and
//! the price is a symmetric random walk.

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, TimeZone, Weekday};
use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Direction;
use crate::liquidity::Metric;
use crate::rng::StreamRng;
use crate::sampler::{bucketize, MinuteBucket};
use crate::tickdata::{local_date, TickRecord, NANOS_PER_MINUTE, NANOS_PER_SECOND};

/// Minimum number of minute pairs [`plant_check`] will score.
pub const MIN_PLANT_SAMPLE: usize = 10_000;

pub const IMBALANCE_METRICS: [Metric; 3] = [Metric::OrderRatio, Metric::LogDepth, Metric::AdjLogQuoteSlope];
pub const SPREAD_METRICS: [Metric; 6] = [
    Metric::Spread,
    Metric::RelSpreadMid,
    Metric::RelSpreadLog,
    Metric::QuoteSlope,
    Metric::LogQuoteSlope,
    Metric::CompositeLiquidity,
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("only {found} scorable minutes; at least {MIN_PLANT_SAMPLE} needed")]
    InsufficientSample { found: usize },
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub tickers: Vec<String>,
    pub start_date: NaiveDate,
    /// Trading days (weekdays) to generate from `start_date` on.
    pub days: u32,
    /// IANA timezone of the session clock.
    pub timezone: String,
    pub session_start: NaiveTime,
    pub session_end: NaiveTime,
    /// Poisson rates, events per minute.
    pub trade_rate: f64,
    pub quote_rate: f64,
    pub start_price: f64,
    /// Per-minute log-price step scale.
    pub volatility: f64,
    /// Price grid; `1 / tick_size` must be an integer.
    pub tick_size: f64,
    pub half_spread_ticks: f64,
    pub half_spread_jitter: f64,
    /// Log-normal size distribution parameters (shares).
    pub size_log_mean: f64,
    pub size_log_sd: f64,
    /// Relative size skew of an imbalanced book, in `(0, 1)`.
    pub imbalance: f64,
    pub signal_strength: f64,
    pub signal_features: Vec<Metric>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tickers: vec!["SYN".into()],
            start_date: NaiveDate::from_ymd_opt(2024, 8, 5).expect("valid date"),
            days: 5,
            timezone: "America/New_York".into(),
            session_start: NaiveTime::from_hms_opt(9, 30, 0).expect("valid time"),
            session_end: NaiveTime::from_hms_opt(16, 0, 0).expect("valid time"),
            trade_rate: 5.0,
            quote_rate: 20.0,
            start_price: 100.0,
            volatility: 5e-4,
            tick_size: 0.01,
            half_spread_ticks: 2.0,
            half_spread_jitter: 0.5,
            size_log_mean: 500f64.ln(),
            size_log_sd: 0.5,
            imbalance: 0.6,
            signal_strength: 0.0,
            signal_features: IMBALANCE_METRICS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Channels {
    imbalance: bool,
    spread: bool,
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let config: SynthConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth config serializes")
    }

    pub fn tz(&self) -> Result<Tz, SynthError> {
        self.timezone
            .parse()
            .map_err(|_| SynthError::Config(format!("unknown timezone `{}`", self.timezone)))
    }

    fn ticks_per_unit(&self) -> f64 {
        (1.0 / self.tick_size).round()
    }

    fn channels(&self) -> Channels {
        Channels {
            imbalance: self.signal_features.iter().any(|m| IMBALANCE_METRICS.contains(m)),
            spread: self.signal_features.iter().any(|m| SPREAD_METRICS.contains(m)),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::Config(msg));
        if self.tickers.is_empty() {
            return fail("at least one ticker is required".into());
        }
        for t in &self.tickers {
            if t.is_empty() || !t.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit()) {
                return fail(format!("ticker `{t}` is not uppercase alphanumeric"));
            }
        }
        if self.days == 0 {
            return fail("days must be positive".into());
        }
        self.tz()?;
        if self.session_start >= self.session_end {
            return fail("session_start must precede session_end".into());
        }
        if !(self.trade_rate > 0.0 && self.quote_rate > 0.0) || !self.trade_rate.is_finite() || !self.quote_rate.is_finite() {
            return fail("arrival rates must be positive".into());
        }
        let per_unit = 1.0 / self.tick_size;
        if !(self.tick_size > 0.0) || (per_unit - per_unit.round()).abs() > 1e-9 {
            return fail("1 / tick_size must be an integer".into());
        }
        if !(self.start_price >= 10.0 * self.tick_size) || !self.start_price.is_finite() {
            return fail("start_price must be at least ten ticks".into());
        }
        if !(self.volatility >= 0.0 && self.volatility < 0.1) {
            return fail("volatility must be in [0, 0.1)".into());
        }
        if !(self.half_spread_ticks >= 1.0) || !(self.half_spread_jitter >= 0.0) {
            return fail("half_spread_ticks must be >= 1 and jitter >= 0".into());
        }
        if !self.size_log_mean.is_finite() || !(self.size_log_sd >= 0.0) {
            return fail("size distribution parameters must be finite, sd >= 0".into());
        }
        if !(self.imbalance > 0.0 && self.imbalance < 1.0) {
            return fail("imbalance must be in (0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return fail("signal_strength must be in [0, 1]".into());
        }
        for m in &self.signal_features {
            if !IMBALANCE_METRICS.contains(m) && !SPREAD_METRICS.contains(m) {
                return fail(format!("metric `{m}` has no planting channel"));
            }
        }
        if self.signal_strength > 0.0 && self.signal_features.is_empty() {
            return fail("signal_strength > 0 needs at least one signal feature".into());
        }
        Ok(())
    }

    /// The weekday session dates covered by the config.
    pub fn session_dates(&self) -> Vec<NaiveDate> {
        let mut dates = Vec::with_capacity(self.days as usize);
        let mut d = self.start_date;
        while dates.len() < self.days as usize {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                dates.push(d);
            }
            d += Duration::days(1);
        }
        dates
    }

    fn session_minutes(&self) -> i64 {
        (self.session_end - self.session_start).num_minutes()
    }
}

/// One step of the minute-level process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinuteState {
    /// Whether the book state is on for this minute.
    pub signal: bool,
    /// Direction of the move into the next minute.
    pub direction: Direction,
    /// Reference price of this minute, in ticks.
    pub ticks: i64,
    /// Reference price of the next minute, in ticks.
    pub next_ticks: i64,
}

/// Infinite iterator over the minute-level process of one stream.
pub struct MinutePath {
    rng: StreamRng,
    ticks: i64,
    volatility: f64,
    agree: f64,
}

impl MinutePath {
    pub fn new(config: &SynthConfig, label: &str) -> Self {
        Self {
            rng: StreamRng::new(config.seed, label),
            ticks: (config.start_price * config.ticks_per_unit()).round() as i64,
            volatility: config.volatility,
            agree: 0.5 * (1.0 + config.signal_strength),
        }
    }
}

impl Iterator for MinutePath {
    type Item = MinuteState;

    fn next(&mut self) -> Option<MinuteState> {
        let signal = self.rng.chance(0.5);
        let follows = self.rng.chance(self.agree);
        let up = signal == follows;
        let step = (self.ticks as f64 * self.volatility * self.rng.normal().abs()).round() as i64;
        let next_ticks = if up { self.ticks + step } else { (self.ticks - step).max(1) };
        let state = MinuteState {
            signal,
            direction: if up { Direction::Up } else { Direction::Down },
            ticks: self.ticks,
            next_ticks,
        };
        self.ticks = next_ticks;
        Some(state)
    }
}

fn arrivals(rng: &mut StreamRng, per_minute: f64) -> Vec<i64> {
    let rate_per_sec = per_minute / 60.0;
    let mut out = Vec::new();
    let mut t = rng.exponential(rate_per_sec);
    while t < 60.0 {
        out.push((t * NANOS_PER_SECOND as f64) as i64);
        t += rng.exponential(rate_per_sec);
    }
    out
}

fn lognormal_size(rng: &mut StreamRng, config: &SynthConfig) -> f64 {
    libm::exp(config.size_log_mean + config.size_log_sd * rng.normal())
}

fn shares(x: f64) -> f64 {
    x.round().max(1.0)
}

/// Generates one ticker-day. Records are time-sorted.
pub fn generate_day(config: &SynthConfig, ticker: &str, date: NaiveDate) -> Result<Vec<TickRecord>, SynthError> {
    let tz = config.tz()?;
    let channels = config.channels();
    let per_unit = config.ticks_per_unit();
    let price = |ticks: i64| ticks as f64 / per_unit;
    let label = format!("synth/{ticker}/{date}");
    let path = MinutePath::new(config, &format!("{label}/path"));
    let mut rng = StreamRng::new(config.seed, &format!("{label}/events"));
    let open = tz
        .from_local_datetime(&date.and_time(config.session_start))
        .earliest()
        .ok_or_else(|| SynthError::Config(format!("session start does not exist on {date}")))?
        .timestamp_nanos_opt()
        .ok_or_else(|| SynthError::Config("date out of range".into()))?;
    let mut records = Vec::new();
    let mut events: Vec<(i64, TickRecord)> = Vec::new();
    for (m, state) in path.take(config.session_minutes() as usize).enumerate() {
        let minute_start = open + m as i64 * NANOS_PER_MINUTE;
        events.clear();
        let imbalanced = channels.imbalance && state.signal;
        let heavy_bid = rng.chance(0.5);
        let spread_scale = if channels.spread && state.signal { 2.0 } else { 1.0 };

        for (k, offset) in arrivals(&mut rng, config.trade_rate).into_iter().enumerate() {
            let ticks = if k == 0 {
                state.ticks
            } else {
                (state.ticks + rng.below(3) as i64 - 1).max(1)
            };
            let size = shares(lognormal_size(&mut rng, config));
            events.push((offset, TickRecord::trade(minute_start + offset, ticker, price(ticks), size)));
        }
        for offset in arrivals(&mut rng, config.quote_rate) {
            let q = lognormal_size(&mut rng, config);
            let (bid_size, ask_size) = if imbalanced {
                let (hi, lo) = (shares(q * (1.0 + config.imbalance)), shares(q * (1.0 - config.imbalance)));
                if heavy_bid { (hi, lo) } else { (lo, hi) }
            } else {
                (shares(q), shares(q))
            };
            let mut half = || {
                let mean = config.half_spread_ticks * spread_scale;
                (mean + config.half_spread_jitter * rng.normal()).round().max(1.0) as i64
            };
            let (hb, ha) = (half(), half());
            let bid = (state.ticks - hb).max(1);
            let ask = state.ticks + ha;
            events.push((
                offset,
                TickRecord::quote(minute_start + offset, ticker, price(bid), price(ask), bid_size, ask_size),
            ));
        }
        // Trades were pushed first, so a stable sort keeps a trade ahead of
        // a quote with the same timestamp.
        events.sort_by_key(|e| e.0);
        records.extend(events.drain(..).map(|e| e.1));
    }
    Ok(records)
}

/// Generates the full tape: days in order, tickers interleaved by time
/// within each day (ties ordered as in `config.tickers`).
pub fn generate(config: &SynthConfig) -> Result<Vec<TickRecord>, SynthError> {
    config.validate()?;
    let dates = config.session_dates();
    let shards: Vec<(NaiveDate, usize)> = dates
        .iter()
        .flat_map(|&d| (0..config.tickers.len()).map(move |t| (d, t)))
        .collect();
    let days: Vec<Vec<TickRecord>> = shards
        .par_iter()
        .map(|&(date, t)| generate_day(config, &config.tickers[t], date))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(days.iter().map(Vec::len).sum());
    for day in days.chunks(config.tickers.len()) {
        let mut merged: Vec<(i64, usize, usize)> = day
            .iter()
            .enumerate()
            .flat_map(|(t, recs)| recs.iter().enumerate().map(move |(i, r)| (r.timestamp, t, i)))
            .collect();
        merged.sort_unstable();
        out.extend(merged.into_iter().map(|(_, t, i)| day[t][i].clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantCheck {
    /// Scored minute pairs: adjacent emitted minutes with a price change.
    pub minutes: usize,
    /// Fraction of scored minutes whose direction matches the proxy.
    pub agreement: f64,
    /// `2 * agreement - 1`.
    pub implied_strength: f64,
}

/// The proxy the tape exposes for the planted state of a bucket.
fn proxy_on(config: &SynthConfig, bucket: &MinuteBucket) -> bool {
    let channels = config.channels();
    if channels.imbalance {
        let threshold = 0.5 * ((1.0 + config.imbalance) / (1.0 - config.imbalance)).ln();
        (bucket.avg_bid_size / bucket.avg_ask_size).ln().abs() > threshold
    } else {
        let spread_ticks = (bucket.avg_ask_price - bucket.avg_bid_price) * config.ticks_per_unit();
        spread_ticks > 3.0 * config.half_spread_ticks
    }
}

/// Re-measures the planted relationship from a tape: how often the move to
/// the next minute is Up exactly when the proxy is on. Only pairs of
/// adjacent emitted minutes with a non-zero price change are scored.
pub fn plant_check(config: &SynthConfig, records: &[TickRecord]) -> Result<PlantCheck, SynthError> {
    config.validate()?;
    if config.signal_features.is_empty() {
        return Err(SynthError::Config("no signal channel to check".into()));
    }
    let tz = config.tz()?;
    let mut by_ticker: std::collections::BTreeMap<&str, Vec<TickRecord>> = Default::default();
    for r in records {
        by_ticker.entry(&r.ticker).or_default().push(r.clone());
    }
    let (mut scored, mut agree) = (0usize, 0usize);
    for recs in by_ticker.values() {
        let mut start = 0;
        while start < recs.len() {
            let day = local_date(recs[start].timestamp, tz).map_err(|e| SynthError::Config(e.to_string()))?;
            let end = start
                + recs[start..]
                    .iter()
                    .take_while(|r| local_date(r.timestamp, tz).is_ok_and(|d| d == day))
                    .count();
            let buckets = bucketize(&recs[start..end]);
            for w in buckets.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                if b.minute_start - a.minute_start != NANOS_PER_MINUTE || b.first_trade_price == a.first_trade_price {
                    continue;
                }
                scored += 1;
                let up = b.first_trade_price > a.first_trade_price;
                if up == proxy_on(config, a) {
                    agree += 1;
                }
            }
            start = end;
        }
    }
    if scored < MIN_PLANT_SAMPLE {
        return Err(SynthError::InsufficientSample { found: scored });
    }
    let agreement = agree as f64 / scored as f64;
    Ok(PlantCheck {
        minutes: scored,
        agreement,
        implied_strength: 2.0 * agreement - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tickdata::{parse_tape, write_tape, TickEvent};

    fn config(days: u32, strength: f64) -> SynthConfig {
        SynthConfig {
            seed: 42,
            days,
            signal_strength: strength,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn null_path_is_balanced() {
        let cfg = config(1, 0.0);
        let (mut up, mut moved) = (0u64, 0u64);
        for s in MinutePath::new(&cfg, "test/null").take(1_000_000) {
            if s.next_ticks != s.ticks {
                moved += 1;
                up += u64::from(s.direction == Direction::Up);
            }
        }
        let freq = up as f64 / moved as f64;
        assert!((0.47..=0.53).contains(&freq), "{freq}");
        assert!(moved < 1_000_000, "ties must occur");
    }

    #[test]
    fn trade_count_is_poisson() {
        let cfg = SynthConfig {
            session_start: NaiveTime::from_hms_opt(11, 0, 0).unwrap(),
            ..config(1, 0.0)
        };
        let day = generate_day(&cfg, "SYN", cfg.start_date).unwrap();
        let trades = day.iter().filter(|r| r.is_trade()).count() as f64;
        let sd = 1500f64.sqrt();
        assert!((trades - 1500.0).abs() <= 3.0 * sd, "{trades}");
    }

    #[test]
    fn tapes_are_deterministic_and_ingest_cleanly() {
        let cfg = SynthConfig {
            tickers: vec!["AAA".into(), "BBB".into()],
            ..config(2, 0.5)
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_tape(&mut buf, &a).unwrap();
        let (parsed, report) = parse_tape(buf.as_slice()).unwrap();
        assert_eq!(report.rejected(), 0);
        assert_eq!(parsed, a);
        for w in a.windows(2) {
            assert!(w[0].timestamp <= w[1].timestamp);
        }
        for r in &a {
            if let TickEvent::Quote { bid_price, ask_price, .. } = r.event {
                assert!(ask_price > bid_price);
            }
        }
        let other = generate(&SynthConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = config(3, 0.25);
        assert_eq!(SynthConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(SynthConfig::from_toml("bogus = 1").is_err());
        let partial = SynthConfig::from_toml("seed = 9\ndays = 2\nsignal_strength = 0.5").unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.trade_rate, 5.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SynthConfig { trade_rate: 0.0, ..SynthConfig::default() },
            SynthConfig { signal_strength: 1.5, ..SynthConfig::default() },
            SynthConfig { tick_size: 0.03, ..SynthConfig::default() },
            SynthConfig { timezone: "Mars/Olympus".into(), ..SynthConfig::default() },
            SynthConfig { tickers: vec!["lower".into()], ..SynthConfig::default() },
            SynthConfig { signal_features: vec![Metric::Turnover], ..SynthConfig::default() },
            SynthConfig { signal_features: vec![], signal_strength: 0.5, ..SynthConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn session_dates_skip_weekends() {
        let cfg = config(6, 0.0); // 2024-08-05 is a Monday
        let dates = cfg.session_dates();
        assert_eq!(dates.len(), 6);
        assert_eq!(dates[5], NaiveDate::from_ymd_opt(2024, 8, 12).unwrap());
    }

    fn check(strength: f64, days: u32) -> PlantCheck {
        let cfg = config(days, strength);
        plant_check(&cfg, &generate(&cfg).unwrap()).unwrap()
    }

    #[test]
    fn full_strength_planting_is_exact() {
        assert_eq!(check(1.0, 30).agreement, 1.0);
    }

    #[test]
    fn partial_and_null_planting_are_recovered() {
        let c = check(0.6, 30);
        assert!(c.minutes >= MIN_PLANT_SAMPLE);
        assert!((0.77..=0.83).contains(&c.agreement), "{c:?}");
        let c = check(0.0, 30);
        assert!((0.47..=0.53).contains(&c.agreement), "{c:?}");
    }

    #[test]
    fn small_tapes_are_refused() {
        let cfg = config(1, 0.5);
        let err = plant_check(&cfg, &generate(&cfg).unwrap()).unwrap_err();
        assert!(matches!(err, SynthError::InsufficientSample { .. }));
    }

    #[test]
    fn spread_channel_planting() {
        let cfg = SynthConfig {
            signal_features: vec![Metric::Spread],
            half_spread_jitter: 0.0,
            ..config(30, 1.0)
        };
        let c = plant_check(&cfg, &generate(&cfg).unwrap()).unwrap();
        assert_eq!(c.agreement, 1.0);
    }
}
