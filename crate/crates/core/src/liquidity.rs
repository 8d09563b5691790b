//! Per-minute liquidity metrics.
//!
//! Notation for a bucket: `P` first trade price, `v` first trade size, `A`/`B`
//! average ask/bid price, `Qa`/`Qb` average ask/bid size, `M = (A + B) / 2`
//! and `r = ln(P / P_prev)` against the previous emitted bucket of the same
//! ticker-day.
//!
//! | metric | definition |
//! |---|---|
//! | turnover | `P * v` |
//! | depth | `(Qa + Qb) / 2` |
//! | log_depth | `ln Qa + ln Qb` |
//! | dollar_depth | `(Qa * A + Qb * B) / 2` |
//! | spread | `A - B` |
//! | effective_spread | `2 * abs(P - M)` |
//! | rel_spread_mid | `(A - B) / M` |
//! | rel_spread_log | `ln(A / B)` |
//! | rel_effective_spread | `2 * abs(P - M) / P` |
//! | quote_slope | `(A - B) / log_depth` |
//! | log_quote_slope | `ln(A / B) / log_depth` |
//! | adj_log_quote_slope | `log_quote_slope * (1 + abs(ln(Qb / Qa)))` |
//! | composite_liquidity | `rel_spread_mid / dollar_depth` |
//! | amivest_ratio | `turnover / abs(r)` |
//! | flow_ratio | `turnover / dt`, `dt` seconds between first trades |
//! | order_ratio | `abs(Qb - Qa) / turnover` |
//! | amihud_illiq | `abs(r) / turnover` |
//!
//! A metric whose inputs are missing or whose value is not finite is masked:
//! the stored value is `0.0` and its validity flag is `false`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sampler::MinuteBucket;
use crate::tickdata::NANOS_PER_SECOND;

macro_rules! metrics {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// One liquidity metric. Discriminants give the fixed column order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum Metric {
            $($variant),+
        }

        impl Metric {
            pub const ALL: [Metric; METRIC_COUNT] = [$(Metric::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(Metric::$variant => $name),+
                }
            }
        }
    };
}

pub const METRIC_COUNT: usize = 17;

metrics! {
    Turnover => "turnover",
    Depth => "depth",
    LogDepth => "log_depth",
    DollarDepth => "dollar_depth",
    Spread => "spread",
    EffectiveSpread => "effective_spread",
    RelSpreadMid => "rel_spread_mid",
    RelSpreadLog => "rel_spread_log",
    RelEffectiveSpread => "rel_effective_spread",
    QuoteSlope => "quote_slope",
    LogQuoteSlope => "log_quote_slope",
    AdjLogQuoteSlope => "adj_log_quote_slope",
    CompositeLiquidity => "composite_liquidity",
    AmivestRatio => "amivest_ratio",
    FlowRatio => "flow_ratio",
    OrderRatio => "order_ratio",
    AmihudIlliq => "amihud_illiq",
}

impl Metric {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric `{0}`")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| UnknownMetric(s.to_owned()))
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadMetrics {
    pub spread: f64,
    pub effective_spread: f64,
    pub rel_spread_mid: f64,
    pub rel_spread_log: f64,
    pub rel_effective_spread: f64,
}

pub fn spread_metrics(bucket: &MinuteBucket) -> SpreadMetrics {
    let (a, b, p) = (bucket.avg_ask_price, bucket.avg_bid_price, bucket.first_trade_price);
    let mid = 0.5 * (a + b);
    let effective = 2.0 * (p - mid).abs();
    SpreadMetrics {
        spread: a - b,
        effective_spread: effective,
        rel_spread_mid: (a - b) / mid,
        rel_spread_log: (a / b).ln(),
        rel_effective_spread: effective / p,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    pub depth: f64,
    pub log_depth: f64,
    pub dollar_depth: f64,
}

pub fn depth_metrics(bucket: &MinuteBucket) -> DepthMetrics {
    let (qa, qb) = (bucket.avg_ask_size, bucket.avg_bid_size);
    DepthMetrics {
        depth: 0.5 * (qa + qb),
        log_depth: qa.ln() + qb.ln(),
        dollar_depth: 0.5 * (qa * bucket.avg_ask_price + qb * bucket.avg_bid_price),
    }
}

/// Slope metrics are `None` when `log_depth` is zero (`Qa * Qb = 1`) or the
/// quotient is otherwise not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeMetrics {
    pub quote_slope: Option<f64>,
    pub log_quote_slope: Option<f64>,
    pub adj_log_quote_slope: Option<f64>,
    pub composite_liquidity: Option<f64>,
}

pub fn slope_metrics(bucket: &MinuteBucket) -> SlopeMetrics {
    let spreads = spread_metrics(bucket);
    let depths = depth_metrics(bucket);
    let imbalance = 1.0 + (bucket.avg_bid_size / bucket.avg_ask_size).ln().abs();
    let (quote_slope, log_quote_slope) = if depths.log_depth == 0.0 {
        (None, None)
    } else {
        (
            finite(spreads.spread / depths.log_depth),
            finite(spreads.rel_spread_log / depths.log_depth),
        )
    };
    SlopeMetrics {
        quote_slope,
        log_quote_slope,
        adj_log_quote_slope: log_quote_slope.and_then(|s| finite(s * imbalance)),
        composite_liquidity: finite(spreads.rel_spread_mid / depths.dollar_depth),
    }
}

/// Metrics that need the previous emitted bucket are `None` without one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityMetrics {
    pub turnover: f64,
    pub amivest_ratio: Option<f64>,
    pub flow_ratio: Option<f64>,
    pub order_ratio: f64,
    pub amihud_illiq: Option<f64>,
}

pub fn activity_metrics(bucket: &MinuteBucket, previous: Option<&MinuteBucket>) -> ActivityMetrics {
    let turnover = bucket.first_trade_price * bucket.first_trade_size;
    let order_ratio = (bucket.avg_bid_size - bucket.avg_ask_size).abs() / turnover;
    let (mut amivest, mut flow, mut amihud) = (None, None, None);
    if let Some(prev) = previous {
        let abs_return = (bucket.first_trade_price / prev.first_trade_price).ln().abs();
        if abs_return.is_finite() {
            amihud = finite(abs_return / turnover);
            if abs_return > 0.0 {
                amivest = finite(turnover / abs_return);
            }
        }
        let dt = (bucket.first_trade_time - prev.first_trade_time) as f64 / NANOS_PER_SECOND as f64;
        if dt > 0.0 {
            flow = finite(turnover / dt);
        }
    }
    ActivityMetrics {
        turnover,
        amivest_ratio: amivest,
        flow_ratio: flow,
        order_ratio,
        amihud_illiq: amihud,
    }
}

/// The full metric set for one minute, in [`Metric::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; METRIC_COUNT],
    pub valid: [bool; METRIC_COUNT],
}

impl FeatureVector {
    fn empty() -> Self {
        Self {
            values: [0.0; METRIC_COUNT],
            valid: [false; METRIC_COUNT],
        }
    }

    fn set(&mut self, metric: Metric, value: Option<f64>) {
        let i = metric.index();
        match value.and_then(finite) {
            Some(v) => {
                self.values[i] = v;
                self.valid[i] = true;
            }
            None => {
                self.values[i] = 0.0;
                self.valid[i] = false;
            }
        }
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        let i = metric.index();
        self.valid[i].then_some(self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn all_valid(&self, metrics: &[Metric]) -> bool {
        metrics.iter().all(|m| self.valid[m.index()])
    }
}

pub fn compute_feature_vector(bucket: &MinuteBucket, previous: Option<&MinuteBucket>) -> FeatureVector {
    let spreads = spread_metrics(bucket);
    let depths = depth_metrics(bucket);
    let slopes = slope_metrics(bucket);
    let activity = activity_metrics(bucket, previous);
    let mut fv = FeatureVector::empty();
    fv.set(Metric::Turnover, Some(activity.turnover));
    fv.set(Metric::Depth, Some(depths.depth));
    fv.set(Metric::LogDepth, Some(depths.log_depth));
    fv.set(Metric::DollarDepth, Some(depths.dollar_depth));
    fv.set(Metric::Spread, Some(spreads.spread));
    fv.set(Metric::EffectiveSpread, Some(spreads.effective_spread));
    fv.set(Metric::RelSpreadMid, Some(spreads.rel_spread_mid));
    fv.set(Metric::RelSpreadLog, Some(spreads.rel_spread_log));
    fv.set(Metric::RelEffectiveSpread, Some(spreads.rel_effective_spread));
    fv.set(Metric::QuoteSlope, slopes.quote_slope);
    fv.set(Metric::LogQuoteSlope, slopes.log_quote_slope);
    fv.set(Metric::AdjLogQuoteSlope, slopes.adj_log_quote_slope);
    fv.set(Metric::CompositeLiquidity, slopes.composite_liquidity);
    fv.set(Metric::AmivestRatio, activity.amivest_ratio);
    fv.set(Metric::FlowRatio, activity.flow_ratio);
    fv.set(Metric::OrderRatio, Some(activity.order_ratio));
    fv.set(Metric::AmihudIlliq, activity.amihud_illiq);
    fv
}

/// Features for an ordered run of buckets from one ticker-day.
pub fn compute_day_features(buckets: &[MinuteBucket]) -> Vec<FeatureVector> {
    buckets
        .iter()
        .enumerate()
        .map(|(i, b)| compute_feature_vector(b, i.checked_sub(1).map(|j| &buckets[j])))
        .collect()
}

/// One row of the feature dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub ticker: String,
    /// Exchange-local session date, `YYYY-MM-DD`.
    pub session_date: String,
    pub minute_start: i64,
    pub features: FeatureVector,
}

/// Column order of the feature dump: three keys, the metric values in
/// [`Metric::ALL`] order, then one `valid_<metric>` flag (`1`/`0`) each.
pub fn feature_header() -> Vec<String> {
    let mut header = vec!["ticker".into(), "session_date".into(), "minute_start".into()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_owned()));
    header.extend(Metric::ALL.iter().map(|m| format!("valid_{}", m.name())));
    header
}

pub fn write_features<W: Write>(
    writer: W,
    rows: &[FeatureRecord],
    comment: Option<&str>,
) -> Result<(), csv::Error> {
    let mut writer = writer;
    if let Some(comment) = comment {
        writeln!(writer, "# {comment}")?;
    }
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(feature_header())?;
    let mut fields = Vec::with_capacity(3 + 2 * METRIC_COUNT);
    for row in rows {
        fields.clear();
        fields.push(row.ticker.clone());
        fields.push(row.session_date.clone());
        fields.push(row.minute_start.to_string());
        fields.extend(row.features.values.iter().map(|v| v.to_string()));
        fields.extend(
            row.features
                .valid
                .iter()
                .map(|v| if *v { "1".to_owned() } else { "0".to_owned() }),
        );
        csv.write_record(&fields)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(reader: R) -> Result<Vec<FeatureRecord>, csv::Error> {
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().ne(feature_header().iter().map(String::as_str)) {
        return Err(invalid("feature dump header does not match the fixed column order".into()));
    }
    let mut out = Vec::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let mut features = FeatureVector::empty();
        for i in 0..METRIC_COUNT {
            features.values[i] = row[3 + i]
                .parse()
                .map_err(|_| invalid(format!("line {line}: bad value `{}`", &row[3 + i])))?;
            features.valid[i] = match &row[3 + METRIC_COUNT + i] {
                "1" => true,
                "0" => false,
                other => return Err(invalid(format!("line {line}: bad validity flag `{other}`"))),
            };
        }
        out.push(FeatureRecord {
            ticker: row[0].to_owned(),
            session_date: row[1].to_owned(),
            minute_start: row[2]
                .parse()
                .map_err(|_| invalid(format!("line {line}: bad minute_start")))?,
            features,
        });
    }
    Ok(out)
}

fn invalid(msg: String) -> csv::Error {
    csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bucket(p: f64, v: f64, a: f64, b: f64, qa: f64, qb: f64) -> MinuteBucket {
        MinuteBucket {
            ticker: "IBM".into(),
            minute_start: 60 * NANOS_PER_SECOND,
            first_trade_price: p,
            first_trade_size: v,
            first_trade_time: 60 * NANOS_PER_SECOND,
            avg_bid_price: b,
            avg_ask_price: a,
            avg_bid_size: qb,
            avg_ask_size: qa,
            quote_count: 1,
            trade_count: 1,
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for (i, m) in Metric::ALL.into_iter().enumerate() {
            assert_eq!(m.index(), i);
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("bogus".parse::<Metric>().is_err());
    }

    #[test]
    fn trade_at_mid_has_zero_effective_spread() {
        let s = spread_metrics(&bucket(10.01, 1.0, 10.02, 10.00, 1.0, 1.0));
        assert_relative_eq!(s.spread, 0.02, max_relative = 1e-9);
        assert!(s.effective_spread.abs() < 1e-12);
        assert_relative_eq!(s.rel_spread_mid, 0.02 / 10.01, max_relative = 1e-9);
        // ln(10.02 / 10.00) = ln(1.002) = 0.0019980026626730579...
        assert_relative_eq!(s.rel_spread_log, 0.001_998_002_662_673_058, max_relative = 1e-12);
    }

    #[test]
    fn locked_quote() {
        let s = spread_metrics(&bucket(10.0, 1.0, 10.0, 10.0, 5.0, 5.0));
        assert_eq!(s.spread, 0.0);
        assert_eq!(s.rel_spread_log, 0.0);
        let sl = slope_metrics(&bucket(10.0, 1.0, 10.0, 10.0, 5.0, 5.0));
        assert_eq!(sl.quote_slope, Some(0.0));
        assert_eq!(sl.composite_liquidity, Some(0.0));
    }

    #[test]
    fn depth_examples() {
        let d = depth_metrics(&bucket(10.0, 1.0, 10.02, 10.00, 100.0, 100.0));
        assert_eq!(d.depth, 100.0);
        assert_relative_eq!(d.dollar_depth, 1001.0, max_relative = 1e-12);
        assert_eq!(depth_metrics(&bucket(10.0, 1.0, 10.02, 10.00, 1.0, 1.0)).log_depth, 0.0);
        let d = depth_metrics(&bucket(10.0, 1.0, 10.02, 10.00, 200.0, 50.0));
        // ln 200 + ln 50 = ln 10000
        assert_relative_eq!(d.log_depth, 9.210_340_371_976_184, max_relative = 1e-12);
    }

    #[test]
    fn slope_examples() {
        let sl = slope_metrics(&bucket(10.0, 1.0, 10.02, 10.00, 300.0, 300.0));
        assert_eq!(sl.adj_log_quote_slope, sl.log_quote_slope);
        // Qa * Qb = 1 makes log_depth vanish.
        let sl = slope_metrics(&bucket(10.0, 1.0, 10.02, 10.00, 4.0, 0.25));
        assert_eq!(sl.quote_slope, None);
        assert_eq!(sl.log_quote_slope, None);
        assert_eq!(sl.adj_log_quote_slope, None);
        assert!(sl.composite_liquidity.is_some());

        let sl = slope_metrics(&bucket(10.01, 1.0, 10.02, 10.00, 200.0, 50.0));
        let log_depth = 200f64.ln() + 50f64.ln();
        let log_slope = (10.02f64 / 10.00).ln() / log_depth;
        assert_relative_eq!(sl.quote_slope.unwrap(), 0.02 / log_depth, max_relative = 1e-9);
        assert_relative_eq!(sl.log_quote_slope.unwrap(), log_slope, max_relative = 1e-12);
        assert_relative_eq!(
            sl.adj_log_quote_slope.unwrap(),
            log_slope * (1.0 + 4f64.ln()),
            max_relative = 1e-12
        );
        let dollar_depth = (200.0 * 10.02 + 50.0 * 10.00) / 2.0;
        assert_relative_eq!(
            sl.composite_liquidity.unwrap(),
            (0.02 / 10.01) / dollar_depth,
            max_relative = 1e-9
        );
    }

    #[test]
    fn activity_examples() {
        let prev = bucket(10.00, 100.0, 10.01, 9.99, 100.0, 100.0);
        let mut cur = bucket(10.05, 300.0, 10.06, 10.04, 200.0, 50.0);
        cur.first_trade_time = prev.first_trade_time + 60 * NANOS_PER_SECOND;
        let a = activity_metrics(&cur, Some(&prev));
        assert_relative_eq!(a.turnover, 3015.0, max_relative = 1e-12);
        assert_relative_eq!(a.amihud_illiq.unwrap(), 1.005f64.ln() / 3015.0, max_relative = 1e-9);
        assert_relative_eq!(a.flow_ratio.unwrap(), 3015.0 / 60.0, max_relative = 1e-12);
        assert_relative_eq!(a.order_ratio, 150.0 / 3015.0, max_relative = 1e-12);

        let flat = activity_metrics(&prev, Some(&prev.clone()));
        assert_eq!(flat.amihud_illiq, Some(0.0));
        assert_eq!(flat.amivest_ratio, None);
        assert_eq!(flat.order_ratio, 0.0);
    }

    #[test]
    fn first_bucket_masks_return_metrics() {
        let fv = compute_feature_vector(&bucket(10.0, 1.0, 10.02, 10.00, 100.0, 50.0), None);
        assert_eq!(fv.valid_count(), METRIC_COUNT - 3);
        for m in [Metric::AmivestRatio, Metric::AmihudIlliq, Metric::FlowRatio] {
            assert_eq!(fv.get(m), None);
            assert_eq!(fv.values[m.index()], 0.0);
        }
    }

    #[test]
    fn feature_vector_matches_standalone_ops() {
        let prev = bucket(10.00, 100.0, 10.01, 9.99, 120.0, 80.0);
        let mut cur = bucket(10.03, 250.0, 10.05, 10.01, 200.0, 50.0);
        cur.first_trade_time += 42 * NANOS_PER_SECOND;
        let fv = compute_feature_vector(&cur, Some(&prev));
        let s = spread_metrics(&cur);
        let d = depth_metrics(&cur);
        let sl = slope_metrics(&cur);
        let a = activity_metrics(&cur, Some(&prev));
        let expected = [
            Some(a.turnover),
            Some(d.depth),
            Some(d.log_depth),
            Some(d.dollar_depth),
            Some(s.spread),
            Some(s.effective_spread),
            Some(s.rel_spread_mid),
            Some(s.rel_spread_log),
            Some(s.rel_effective_spread),
            sl.quote_slope,
            sl.log_quote_slope,
            sl.adj_log_quote_slope,
            sl.composite_liquidity,
            a.amivest_ratio,
            a.flow_ratio,
            Some(a.order_ratio),
            a.amihud_illiq,
        ];
        for (m, e) in Metric::ALL.into_iter().zip(expected) {
            assert_eq!(fv.get(m), e, "{m}");
        }
        assert_eq!(fv.valid_count(), METRIC_COUNT);
    }

    #[test]
    fn feature_dump_round_trip() {
        let prev = bucket(10.00, 100.0, 10.01, 9.99, 120.0, 80.0);
        let cur = bucket(10.03, 250.0, 10.05, 10.01, 200.0, 50.0);
        let rows: Vec<_> = [None, Some(&prev)]
            .into_iter()
            .map(|p| FeatureRecord {
                ticker: "IBM".into(),
                session_date: "2024-08-05".into(),
                minute_start: 7,
                features: compute_feature_vector(&cur, p),
            })
            .collect();
        let mut buf = Vec::new();
        write_features(&mut buf, &rows, Some("hash")).unwrap();
        assert_eq!(read_features(buf.as_slice()).unwrap(), rows);
    }

    fn arb_pair() -> impl Strategy<Value = (MinuteBucket, MinuteBucket)> {
        (
            (1.0f64..500.0, 1.0f64..1e4, 0.0f64..0.05, 1.0f64..1e4, 1.0f64..1e4, -0.5f64..0.5),
            (-0.02f64..0.02, 1u32..120),
        )
            .prop_map(|((mid, v, half_rel, qa, qb, pos), (ret, secs))| {
                let half = mid * half_rel;
                let cur = bucket(mid + pos * 2.0 * half, v, mid + half, mid - half, qa, qb);
                let mut prev = cur.clone();
                prev.first_trade_price = cur.first_trade_price * (-ret).exp();
                prev.first_trade_time -= i64::from(secs) * NANOS_PER_SECOND;
                (cur, prev)
            })
    }

    fn scaled(b: &MinuteBucket, k: f64) -> MinuteBucket {
        let mut s = b.clone();
        s.first_trade_price *= k;
        s.avg_ask_price *= k;
        s.avg_bid_price *= k;
        s
    }

    fn swapped(b: &MinuteBucket) -> MinuteBucket {
        let mut s = b.clone();
        std::mem::swap(&mut s.avg_ask_size, &mut s.avg_bid_size);
        s
    }

    proptest! {
        #[test]
        fn price_scale_covariance((cur, _) in arb_pair()) {
            let base = spread_metrics(&cur);
            for k in [0.5, 2.0, 10.0] {
                let s = spread_metrics(&scaled(&cur, k));
                prop_assert!((s.rel_spread_mid - base.rel_spread_mid).abs() <= 1e-9 * base.rel_spread_mid.abs().max(1e-12));
                prop_assert!((s.rel_spread_log - base.rel_spread_log).abs() <= 1e-9 * base.rel_spread_log.abs().max(1e-12));
                prop_assert!((s.rel_effective_spread - base.rel_effective_spread).abs() <= 1e-9 * base.rel_effective_spread.abs().max(1e-12));
                prop_assert!((s.spread - k * base.spread).abs() <= 1e-9 * (k * base.spread).abs().max(1e-12));
                prop_assert!((s.effective_spread - k * base.effective_spread).abs() <= 1e-9 * (k * cur.first_trade_price));
            }
        }

        #[test]
        fn amivest_times_amihud_is_one((cur, prev) in arb_pair()) {
            let a = activity_metrics(&cur, Some(&prev));
            if let (Some(x), Some(y)) = (a.amivest_ratio, a.amihud_illiq) {
                prop_assert!((x * y - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn size_swap_symmetry((cur, prev) in arb_pair()) {
            let sw = swapped(&cur);
            let (d0, d1) = (depth_metrics(&cur), depth_metrics(&sw));
            prop_assert_eq!(d0.depth, d1.depth);
            prop_assert!((d0.log_depth - d1.log_depth).abs() <= 1e-12 * d0.log_depth.abs().max(1.0));
            let f0 = (cur.avg_bid_size / cur.avg_ask_size).ln().abs();
            let f1 = (sw.avg_bid_size / sw.avg_ask_size).ln().abs();
            prop_assert!((f0 - f1).abs() <= 1e-12 * f0.max(1.0));
            prop_assert_eq!(
                activity_metrics(&cur, Some(&prev)).order_ratio,
                activity_metrics(&sw, Some(&prev)).order_ratio
            );
        }

        #[test]
        fn valid_metrics_are_finite_and_in_range((cur, prev) in arb_pair()) {
            let fv = compute_feature_vector(&cur, Some(&prev));
            for (v, ok) in fv.values.iter().zip(fv.valid) {
                prop_assert!(v.is_finite());
                if !ok { prop_assert_eq!(*v, 0.0); }
            }
            prop_assert!(fv.values[Metric::Spread.index()] >= 0.0);
            prop_assert!(fv.values[Metric::EffectiveSpread.index()] >= 0.0);
            prop_assert!(fv.values[Metric::Depth.index()] > 0.0);
            prop_assert!(fv.values[Metric::DollarDepth.index()] > 0.0);
            prop_assert!(fv.values[Metric::Turnover.index()] > 0.0);
            let rsm = fv.values[Metric::RelSpreadMid.index()];
            prop_assert!((0.0..2.0).contains(&rsm));
        }
    }
}
