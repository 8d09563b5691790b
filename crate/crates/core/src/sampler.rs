//! One-minute reduction: the first trade of each minute plus that minute's
//! quote averages.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::tickdata::{TickEvent, TickRecord, NANOS_PER_MINUTE};

pub const BUCKET_HEADER: [&str; 10] = [
    "ticker",
    "minute_start",
    "first_trade_price",
    "first_trade_size",
    "avg_bid_price",
    "avg_ask_price",
    "avg_bid_size",
    "avg_ask_size",
    "quote_count",
    "trade_count",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteBucket {
    pub ticker: String,
    /// Timestamp truncated to the minute, nanoseconds.
    pub minute_start: i64,
    pub first_trade_price: f64,
    pub first_trade_size: f64,
    pub first_trade_time: i64,
    pub avg_bid_price: f64,
    pub avg_ask_price: f64,
    pub avg_bid_size: f64,
    pub avg_ask_size: f64,
    pub quote_count: u64,
    /// Every trade seen in the minute, although only the first is retained.
    pub trade_count: u64,
}

impl MinuteBucket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.avg_ask_price + self.avg_bid_price)
    }
}

pub fn minute_of(timestamp: i64) -> i64 {
    timestamp.div_euclid(NANOS_PER_MINUTE) * NANOS_PER_MINUTE
}

#[derive(Default)]
struct Accumulator {
    first_trade: Option<(i64, f64, f64)>,
    trade_count: u64,
    quote_count: u64,
    bid_price: f64,
    ask_price: f64,
    bid_size: f64,
    ask_size: f64,
}

impl Accumulator {
    fn push(&mut self, record: &TickRecord) {
        match record.event {
            TickEvent::Trade { price, size } => {
                self.trade_count += 1;
                // Input is time-sorted, so the first trade seen is the
                // earliest, and equal timestamps keep file order.
                if self.first_trade.is_none() {
                    self.first_trade = Some((record.timestamp, price, size));
                }
            }
            TickEvent::Quote {
                bid_price,
                ask_price,
                bid_size,
                ask_size,
            } => {
                self.quote_count += 1;
                self.bid_price += bid_price;
                self.ask_price += ask_price;
                self.bid_size += bid_size;
                self.ask_size += ask_size;
            }
        }
    }

    fn finish(self, ticker: &str, minute_start: i64) -> Option<MinuteBucket> {
        let (time, price, size) = self.first_trade?;
        if self.quote_count == 0 {
            return None;
        }
        let n = self.quote_count as f64;
        let bucket = MinuteBucket {
            ticker: ticker.to_owned(),
            minute_start,
            first_trade_price: price,
            first_trade_size: size,
            first_trade_time: time,
            avg_bid_price: self.bid_price / n,
            avg_ask_price: self.ask_price / n,
            avg_bid_size: self.bid_size / n,
            avg_ask_size: self.ask_size / n,
            quote_count: self.quote_count,
            trade_count: self.trade_count,
        };
        debug_assert!(bucket.avg_ask_price >= bucket.avg_bid_price);
        Some(bucket)
    }
}

/// Reduces one ticker-day of session-filtered, time-sorted records to
/// minute buckets. Minutes without at least one trade and one quote are
/// skipped.
pub fn bucketize(records: &[TickRecord]) -> Vec<MinuteBucket> {
    let mut out = Vec::new();
    let Some(first) = records.first() else {
        return out;
    };
    let ticker = first.ticker.as_str();
    let mut current = minute_of(first.timestamp);
    let mut acc = Accumulator::default();
    for record in records {
        debug_assert_eq!(record.ticker, ticker, "bucketize expects a single ticker");
        let minute = minute_of(record.timestamp);
        if minute != current {
            out.extend(std::mem::take(&mut acc).finish(ticker, current));
            current = minute;
        }
        acc.push(record);
    }
    out.extend(acc.finish(ticker, current));
    out
}

/// Writes the optional bucket dump. Lines starting with `#` are comments.
pub fn write_buckets<W: Write>(
    writer: W,
    buckets: &[MinuteBucket],
    comment: Option<&str>,
) -> Result<(), csv::Error> {
    let mut writer = writer;
    if let Some(comment) = comment {
        writeln!(writer, "# {comment}")?;
    }
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(BUCKET_HEADER)?;
    for b in buckets {
        csv.write_record([
            b.ticker.clone(),
            b.minute_start.to_string(),
            b.first_trade_price.to_string(),
            b.first_trade_size.to_string(),
            b.avg_bid_price.to_string(),
            b.avg_ask_price.to_string(),
            b.avg_bid_size.to_string(),
            b.avg_ask_size.to_string(),
            b.quote_count.to_string(),
            b.trade_count.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a bucket dump. The dump has no first-trade time column, so
/// `first_trade_time` is restored as `minute_start`.
pub fn read_buckets<R: Read>(reader: R) -> Result<Vec<MinuteBucket>, csv::Error> {
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let f = |i: usize| -> Result<f64, csv::Error> {
            row[i].parse().map_err(|_| bad_field(&row, i))
        };
        let n = |i: usize| -> Result<i64, csv::Error> {
            row[i].parse().map_err(|_| bad_field(&row, i))
        };
        let minute_start = n(1)?;
        out.push(MinuteBucket {
            ticker: row[0].to_owned(),
            minute_start,
            first_trade_price: f(2)?,
            first_trade_size: f(3)?,
            first_trade_time: minute_start,
            avg_bid_price: f(4)?,
            avg_ask_price: f(5)?,
            avg_bid_size: f(6)?,
            avg_ask_size: f(7)?,
            quote_count: n(8)? as u64,
            trade_count: n(9)? as u64,
        });
    }
    Ok(out)
}

fn bad_field(row: &csv::StringRecord, i: usize) -> csv::Error {
    csv::Error::from(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!(
            "line {}: bad `{}` value `{}`",
            row.position().map_or(0, |p| p.line()),
            BUCKET_HEADER.get(i).copied().unwrap_or("?"),
            &row[i]
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tickdata::NANOS_PER_SECOND;
    use proptest::prelude::*;

    const T0: i64 = 1_722_870_000 * NANOS_PER_SECOND; // a whole minute

    fn q(t: i64, bid: f64, ask: f64) -> TickRecord {
        TickRecord::quote(t, "IBM", bid, ask, 100.0, 100.0)
    }

    fn tr(t: i64, price: f64) -> TickRecord {
        TickRecord::trade(t, "IBM", price, 10.0)
    }

    #[test]
    fn two_quote_means() {
        let buckets = bucketize(&[q(T0, 10.00, 10.02), tr(T0 + 1, 10.01), q(T0 + 2, 10.02, 10.04)]);
        assert_eq!(buckets.len(), 1);
        approx::assert_relative_eq!(buckets[0].avg_bid_price, 10.01, max_relative = 1e-12);
        approx::assert_relative_eq!(buckets[0].avg_ask_price, 10.03, max_relative = 1e-12);
        assert_eq!(buckets[0].quote_count, 2);
    }

    #[test]
    fn singleton_trade_offset() {
        let t = T0 + 7 * NANOS_PER_SECOND;
        let buckets = bucketize(&[q(T0, 10.0, 10.1), tr(t, 10.05)]);
        assert_eq!(buckets[0].first_trade_time - buckets[0].minute_start, 7 * NANOS_PER_SECOND);
        assert_eq!(buckets[0].trade_count, 1);
    }

    #[test]
    fn first_trade_wins_and_all_trades_count() {
        let buckets = bucketize(&[tr(T0 + 5, 10.0), tr(T0 + 5, 11.0), tr(T0 + 9, 12.0), q(T0 + 10, 9.0, 9.5)]);
        assert_eq!(buckets[0].first_trade_price, 10.0);
        assert_eq!(buckets[0].trade_count, 3);
    }

    #[test]
    fn minutes_missing_a_side_are_skipped() {
        let m = NANOS_PER_MINUTE;
        let records = [
            tr(T0, 10.0),           // trade only
            q(T0 + m, 10.0, 10.1),  // quote only
            tr(T0 + 2 * m, 10.0),
            q(T0 + 2 * m + 1, 10.0, 10.1),
        ];
        let buckets = bucketize(&records);
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[0].minute_start, T0 + 2 * m);
        assert!(bucketize(&[]).is_empty());
    }

    #[test]
    fn dump_round_trip() {
        let buckets = bucketize(&[q(T0, 10.0, 10.02), tr(T0, 10.01)]);
        let mut buf = Vec::new();
        write_buckets(&mut buf, &buckets, Some("run_config=abc")).unwrap();
        let back = read_buckets(buf.as_slice()).unwrap();
        assert_eq!(back, buckets);
    }

    fn arb_minute_records() -> impl Strategy<Value = Vec<TickRecord>> {
        proptest::collection::vec((0i64..600, any::<bool>(), 1u32..50), 0..300).prop_map(|mut v| {
            v.sort_by_key(|x| x.0);
            v.into_iter()
                .map(|(sec, is_trade, c)| {
                    let t = T0 + sec * NANOS_PER_SECOND;
                    let p = 10.0 + f64::from(c) / 100.0;
                    if is_trade { tr(t, p) } else { q(t, p, p + 0.01) }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn quote_counts_and_bucket_counts_match_scan(records in arb_minute_records()) {
            let buckets = bucketize(&records);
            // Independent scan: per-minute (trades, quotes) tallies.
            let mut tallies = std::collections::BTreeMap::<i64, (u64, u64)>::new();
            for r in &records {
                let e = tallies.entry(r.timestamp / NANOS_PER_MINUTE).or_default();
                if r.is_trade() { e.0 += 1 } else { e.1 += 1 }
            }
            let expected: Vec<_> = tallies.iter().filter(|(_, (t, q))| *t > 0 && *q > 0).collect();
            prop_assert_eq!(buckets.len(), expected.len());
            for (b, (m, (t, qc))) in buckets.iter().zip(expected) {
                prop_assert_eq!(b.minute_start, m * NANOS_PER_MINUTE);
                prop_assert_eq!(b.trade_count, *t);
                prop_assert_eq!(b.quote_count, *qc);
                prop_assert!(b.avg_ask_price >= b.avg_bid_price);
            }
            for w in buckets.windows(2) {
                prop_assert!(w[0].minute_start < w[1].minute_start);
            }
        }

        #[test]
        fn concatenation_of_disjoint_minute_ranges(records in arb_minute_records(), cut in 0i64..600) {
            let split_at = records.partition_point(|r| r.timestamp < minute_of(T0 + cut * NANOS_PER_SECOND));
            let (a, b) = records.split_at(split_at);
            let mut joined = bucketize(a);
            joined.extend(bucketize(b));
            prop_assert_eq!(bucketize(&records), joined);
        }
    }
}
