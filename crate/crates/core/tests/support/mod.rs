//! Independent reference implementations used by the integration tests.
//! Nothing here calls the sampler or the metric layer.

#![allow(dead_code)]

use std::collections::BTreeMap;

use liqlab_core::{Metric, StreamRng, TickEvent, TickRecord, METRIC_COUNT};

const MINUTE: i64 = 60_000_000_000;

/// A tape of random minutes for one ticker. About a third of the minutes
/// lacks trades or quotes, and prices often repeat so zero returns occur.
pub fn random_minute_tape(seed: u64, minutes: usize) -> Vec<TickRecord> {
    let mut rng = StreamRng::new(seed, "oracle/tape");
    let start = 1_722_870_000_000_000_000i64 / MINUTE * MINUTE;
    let mut out = Vec::new();
    let mut level = 5000i64; // cents
    for m in 0..minutes as i64 {
        let base = start + m * MINUTE;
        let trades = rng.below(5) as usize;
        let quotes = rng.below(6) as usize;
        let mut events = Vec::new();
        if rng.chance(0.6) {
            level = (level + rng.below(7) as i64 - 3).max(100);
        }
        for _ in 0..trades {
            let t = base + rng.below(60_000_000_000) as i64;
            let price = (level + rng.below(3) as i64 - 1) as f64 / 100.0;
            let size = (1 + rng.below(900)) as f64;
            events.push(TickRecord::trade(t, "ORC", price, size));
        }
        for _ in 0..quotes {
            let t = base + rng.below(60_000_000_000) as i64;
            let bid = level - rng.below(4) as i64;
            let ask = level + rng.below(4) as i64;
            // Sizes of 1 on both sides make log depth exactly zero.
            let (bs, asz) = if rng.chance(0.02) {
                (1.0, 1.0)
            } else {
                ((1 + rng.below(2000)) as f64 * 0.5, (1 + rng.below(2000)) as f64 * 0.5)
            };
            events.push(TickRecord::quote(t, "ORC", bid as f64 / 100.0, ask as f64 / 100.0, bs, asz));
        }
        events.sort_by_key(|r| r.timestamp);
        out.extend(events);
    }
    out
}

pub struct OracleMinute {
    pub minute_start: i64,
    pub price: f64,
    pub metrics: [Option<f64>; METRIC_COUNT],
}

fn ok(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Recomputes every metric straight from raw ticks.
pub fn raw_tick_features(records: &[TickRecord]) -> Vec<OracleMinute> {
    let mut minutes: BTreeMap<i64, Vec<&TickRecord>> = BTreeMap::new();
    for r in records {
        minutes.entry(r.timestamp.div_euclid(MINUTE) * MINUTE).or_default().push(r);
    }
    let mut out = Vec::new();
    let mut prev: Option<(f64, i64)> = None;
    for (minute_start, events) in minutes {
        let trade = events
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r.event {
                TickEvent::Trade { price, size } => Some((r.timestamp, i, price, size)),
                _ => None,
            })
            .min_by_key(|t| (t.0, t.1));
        let quotes: Vec<[f64; 4]> = events
            .iter()
            .filter_map(|r| match r.event {
                TickEvent::Quote { bid_price, ask_price, bid_size, ask_size } => {
                    Some([bid_price, ask_price, bid_size, ask_size])
                }
                _ => None,
            })
            .collect();
        let Some((t, _, p, v)) = trade else { continue };
        if quotes.is_empty() {
            continue;
        }
        let mean = |k: usize| quotes.iter().map(|q| q[k]).sum::<f64>() / quotes.len() as f64;
        let (b, a, qb, qa) = (mean(0), mean(1), mean(2), mean(3));
        let mid = (a + b) / 2.0;
        let turnover = p * v;
        let log_depth = qa.ln() + qb.ln();
        let dollar_depth = (qa * a + qb * b) / 2.0;
        let rel_mid = (a - b) / mid;
        let mut m = [None; METRIC_COUNT];
        let mut put = |metric: Metric, x: Option<f64>| m[metric.index()] = x.and_then(ok);
        put(Metric::Turnover, Some(turnover));
        put(Metric::Depth, Some((qa + qb) / 2.0));
        put(Metric::LogDepth, Some(log_depth));
        put(Metric::DollarDepth, Some(dollar_depth));
        put(Metric::Spread, Some(a - b));
        put(Metric::EffectiveSpread, Some(2.0 * (p - mid).abs()));
        put(Metric::RelSpreadMid, Some(rel_mid));
        put(Metric::RelSpreadLog, Some((a / b).ln()));
        put(Metric::RelEffectiveSpread, Some(2.0 * (p - mid).abs() / p));
        let slopes = log_depth != 0.0;
        put(Metric::QuoteSlope, slopes.then(|| (a - b) / log_depth));
        put(Metric::LogQuoteSlope, slopes.then(|| (a / b).ln() / log_depth));
        put(
            Metric::AdjLogQuoteSlope,
            slopes.then(|| (a / b).ln() / log_depth * (1.0 + (qb / qa).ln().abs())),
        );
        put(Metric::CompositeLiquidity, Some(rel_mid / dollar_depth));
        put(Metric::OrderRatio, Some((qb - qa).abs() / turnover));
        if let Some((p0, t0)) = prev {
            let r = (p / p0).ln().abs();
            put(Metric::AmihudIlliq, Some(r / turnover));
            put(Metric::AmivestRatio, (r != 0.0).then(|| turnover / r));
            let dt = (t - t0) as f64 / 1e9;
            put(Metric::FlowRatio, (dt > 0.0).then(|| turnover / dt));
        }
        prev = Some((p, t));
        out.push(OracleMinute { minute_start, price: p, metrics: m });
    }
    out
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality required at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
