//! Tick-level data model, CSV tape ingest and session filtering.
//!
//! The tape format is a UTF-8 CSV with the fixed header
//!
//! ```text
//! timestamp,ticker,kind,trade_price,trade_size,bid_price,ask_price,bid_size,ask_size
//! ```
//!
//! `timestamp` is integer nanoseconds since the Unix epoch, `kind` is `T`
//! (trade) or `Q` (quote) and fields that do not apply to the row's kind are
//! left empty. Tickers may interleave; each ticker's rows must be time-sorted.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveTime, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TAPE_HEADER: [&str; 9] = [
    "timestamp",
    "ticker",
    "kind",
    "trade_price",
    "trade_size",
    "bid_price",
    "ask_price",
    "bid_size",
    "ask_size",
];

pub const NANOS_PER_SECOND: i64 = 1_000_000_000;
pub const NANOS_PER_MINUTE: i64 = 60 * NANOS_PER_SECOND;

#[derive(Debug, Error)]
pub enum TickDataError {
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: String, found: String },
    #[error("input is not time-sorted: record {index} at {timestamp} precedes its predecessor at {previous}")]
    UnsortedInput {
        index: usize,
        timestamp: i64,
        previous: i64,
    },
    #[error("invalid session window: start {start} must precede end {end}")]
    InvalidSession { start: NaiveTime, end: NaiveTime },
    #[error("timestamp {0} is outside the representable date range")]
    TimestampRange(i64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Payload of one tape row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TickEvent {
    Trade {
        price: f64,
        size: f64,
    },
    Quote {
        bid_price: f64,
        ask_price: f64,
        bid_size: f64,
        ask_size: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    /// Nanoseconds since the Unix epoch.
    pub timestamp: i64,
    pub ticker: String,
    pub event: TickEvent,
}

impl TickRecord {
    pub fn trade(timestamp: i64, ticker: impl Into<String>, price: f64, size: f64) -> Self {
        Self {
            timestamp,
            ticker: ticker.into(),
            event: TickEvent::Trade { price, size },
        }
    }

    pub fn quote(
        timestamp: i64,
        ticker: impl Into<String>,
        bid_price: f64,
        ask_price: f64,
        bid_size: f64,
        ask_size: f64,
    ) -> Self {
        Self {
            timestamp,
            ticker: ticker.into(),
            event: TickEvent::Quote {
                bid_price,
                ask_price,
                bid_size,
                ask_size,
            },
        }
    }

    pub fn is_trade(&self) -> bool {
        matches!(self.event, TickEvent::Trade { .. })
    }
}

/// Why a tape row was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    Malformed(String),
    Crossed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowRejection {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub reason: RejectReason,
}

/// Row-level outcome of an ingest pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted: u64,
    pub rejected_malformed: u64,
    pub rejected_crossed: u64,
    /// The first [`IngestReport::MAX_LOGGED`] rejections, in file order.
    pub rejections: Vec<RowRejection>,
}

impl IngestReport {
    pub const MAX_LOGGED: usize = 1000;

    pub fn rejected(&self) -> u64 {
        self.rejected_malformed + self.rejected_crossed
    }

    fn reject(&mut self, line: u64, reason: RejectReason) {
        match reason {
            RejectReason::Crossed => self.rejected_crossed += 1,
            RejectReason::Malformed(_) => self.rejected_malformed += 1,
        }
        if self.rejections.len() < Self::MAX_LOGGED {
            self.rejections.push(RowRejection { line, reason });
        }
    }
}

/// Validates a plain decimal literal (`digits[.digits]`) and converts it.
///
/// Exponents, signs, `inf` and `nan` are rejected before the float parser
/// ever sees the text.
fn parse_positive_decimal(field: &str, name: &str) -> Result<f64, String> {
    let (int_part, frac_part) = match field.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (field, None),
    };
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    let well_formed = digits_ok(int_part)
        && frac_part.map_or(true, |f| !f.is_empty() && digits_ok(f))
        && !(int_part.is_empty() && frac_part.is_none());
    if !well_formed || field.is_empty() {
        return Err(format!("{name}: `{field}` is not a decimal"));
    }
    let positive = field.bytes().any(|b| (b'1'..=b'9').contains(&b));
    if !positive {
        return Err(format!("{name}: must be > 0"));
    }
    let value: f64 = field
        .parse()
        .map_err(|_| format!("{name}: `{field}` is not a decimal"))?;
    if !value.is_finite() {
        return Err(format!("{name}: `{field}` overflows"));
    }
    Ok(value)
}

fn valid_ticker(ticker: &str) -> bool {
    !ticker.is_empty()
        && ticker
            .bytes()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
}

fn parse_row(row: &csv::StringRecord) -> Result<TickRecord, RejectReason> {
    let malformed = |msg: String| RejectReason::Malformed(msg);
    if row.len() != TAPE_HEADER.len() {
        return Err(malformed(format!(
            "expected {} fields, found {}",
            TAPE_HEADER.len(),
            row.len()
        )));
    }
    let timestamp: i64 = row[0]
        .parse()
        .map_err(|_| malformed(format!("timestamp: `{}` is not an integer", &row[0])))?;
    if timestamp <= 0 {
        return Err(malformed("timestamp: must be > 0".into()));
    }
    let ticker = &row[1];
    if !valid_ticker(ticker) {
        return Err(malformed(format!(
            "ticker: `{ticker}` is not uppercase alphanumeric"
        )));
    }
    let empty = |range: std::ops::Range<usize>| range.into_iter().all(|i| row[i].is_empty());
    let num = |i: usize| parse_positive_decimal(&row[i], TAPE_HEADER[i]).map_err(malformed);
    let event = match &row[2] {
        "T" => {
            if !empty(5..9) {
                return Err(malformed("trade row carries quote fields".into()));
            }
            TickEvent::Trade {
                price: num(3)?,
                size: num(4)?,
            }
        }
        "Q" => {
            if !empty(3..5) {
                return Err(malformed("quote row carries trade fields".into()));
            }
            let (bid_price, ask_price) = (num(5)?, num(6)?);
            let (bid_size, ask_size) = (num(7)?, num(8)?);
            if ask_price < bid_price {
                return Err(RejectReason::Crossed);
            }
            TickEvent::Quote {
                bid_price,
                ask_price,
                bid_size,
                ask_size,
            }
        }
        other => return Err(malformed(format!("kind: `{other}` is not T or Q"))),
    };
    Ok(TickRecord {
        timestamp,
        ticker: ticker.to_owned(),
        event,
    })
}

/// Parses a CSV tape. Records are returned in file order; bad rows are
/// counted in the report and skipped. Only a bad header is fatal.
pub fn parse_tape<R: Read>(reader: R) -> Result<(Vec<TickRecord>, IngestReport), TickDataError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = csv.records();
    let expected = TAPE_HEADER.join(",");
    match rows.next() {
        Some(Ok(header)) if header.iter().eq(TAPE_HEADER.iter().copied()) => {}
        Some(Ok(header)) => {
            return Err(TickDataError::MalformedHeader {
                expected,
                found: header.iter().collect::<Vec<_>>().join(","),
            })
        }
        Some(Err(e)) => return Err(e.into()),
        None => {
            return Err(TickDataError::MalformedHeader {
                expected,
                found: String::new(),
            })
        }
    }

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for row in rows {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(e.into());
                }
                let line = e.position().map_or(0, |p| p.line());
                report.reject(line, RejectReason::Malformed(e.to_string()));
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row) {
            Ok(record) => {
                report.accepted += 1;
                records.push(record);
            }
            Err(reason) => report.reject(line, reason),
        }
    }
    Ok((records, report))
}

/// Writes records in the tape format. `parse_tape` inverts this exactly.
pub fn write_tape<'a, W, I>(writer: W, records: I) -> Result<(), TickDataError>
where
    W: Write,
    I: IntoIterator<Item = &'a TickRecord>,
{
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(TAPE_HEADER)?;
    let mut fields: [String; 9] = Default::default();
    for record in records {
        fields[0] = record.timestamp.to_string();
        fields[1].clone_from(&record.ticker);
        for f in &mut fields[2..] {
            f.clear();
        }
        match record.event {
            TickEvent::Trade { price, size } => {
                fields[2] = "T".into();
                fields[3] = fmt_decimal(price);
                fields[4] = fmt_decimal(size);
            }
            TickEvent::Quote {
                bid_price,
                ask_price,
                bid_size,
                ask_size,
            } => {
                fields[2] = "Q".into();
                fields[5] = fmt_decimal(bid_price);
                fields[6] = fmt_decimal(ask_price);
                fields[7] = fmt_decimal(bid_size);
                fields[8] = fmt_decimal(ask_size);
            }
        }
        csv.write_record(&fields)?;
    }
    csv.flush()?;
    Ok(())
}

/// Shortest round-tripping decimal without exponent notation.
pub fn fmt_decimal(value: f64) -> String {
    let s = format!("{value}");
    if s.contains('e') || s.contains('E') {
        // Debug and Display never use exponents for f64, but keep the
        // grammar closed in case that changes.
        format!("{value:.17}")
    } else {
        s
    }
}

/// Half-open wall-clock window `[start, end)` in the exchange timezone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionWindow {
    start: NaiveTime,
    end: NaiveTime,
}

impl SessionWindow {
    pub fn new(start: NaiveTime, end: NaiveTime) -> Result<Self, TickDataError> {
        if start >= end {
            return Err(TickDataError::InvalidSession { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> NaiveTime {
        self.start
    }

    pub fn end(&self) -> NaiveTime {
        self.end
    }

    pub fn contains(&self, time: NaiveTime) -> bool {
        self.start <= time && time < self.end
    }

    /// Number of whole minutes the window spans.
    pub fn minutes(&self) -> i64 {
        (self.end - self.start).num_minutes()
    }
}

impl Default for SessionWindow {
    fn default() -> Self {
        Self {
            start: NaiveTime::from_hms_opt(11, 0, 0).expect("valid time"),
            end: NaiveTime::from_hms_opt(16, 0, 0).expect("valid time"),
        }
    }
}

fn local_datetime(timestamp: i64, tz: Tz) -> Result<chrono::DateTime<Tz>, TickDataError> {
    Ok(DateTime::from_timestamp_nanos(timestamp).with_timezone(&tz))
}

/// Wall-clock time of day of a timestamp in `tz`.
pub fn local_time(timestamp: i64, tz: Tz) -> Result<NaiveTime, TickDataError> {
    let dt = local_datetime(timestamp, tz)?;
    NaiveTime::from_hms_nano_opt(dt.hour(), dt.minute(), dt.second(), dt.nanosecond())
        .ok_or(TickDataError::TimestampRange(timestamp))
}

/// Exchange-local calendar date of a timestamp.
pub fn local_date(timestamp: i64, tz: Tz) -> Result<NaiveDate, TickDataError> {
    Ok(local_datetime(timestamp, tz)?.date_naive())
}

/// Keeps records whose local time of day lies in the session window.
///
/// Relative order is preserved. The input must be non-decreasing in time;
/// callers with interleaved tickers filter each ticker's stream separately.
pub fn filter_session(
    records: Vec<TickRecord>,
    window: &SessionWindow,
    tz: Tz,
) -> Result<Vec<TickRecord>, TickDataError> {
    check_sorted(&records)?;
    let mut keep = Vec::with_capacity(records.len());
    for record in records {
        if window.contains(local_time(record.timestamp, tz)?) {
            keep.push(record);
        }
    }
    Ok(keep)
}

fn check_sorted(records: &[TickRecord]) -> Result<(), TickDataError> {
    for (index, pair) in records.windows(2).enumerate() {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(TickDataError::UnsortedInput {
                index: index + 1,
                timestamp: pair[1].timestamp,
                previous: pair[0].timestamp,
            });
        }
    }
    Ok(())
}
