//! Tape to feature table: session filter, per ticker-day bucketing and
//! metric computation.

use std::collections::BTreeMap;

use chrono_tz::Tz;
use rayon::prelude::*;

use crate::dataset::{label_feature_rows, DatasetError, LabeledRow};
use crate::liquidity::{compute_day_features, FeatureRecord};
use crate::sampler::{bucketize, MinuteBucket};
use crate::tickdata::{filter_session, local_date, SessionWindow, TickDataError, TickRecord};

/// Buckets and their feature rows, aligned index by index. Ordered by
/// ticker (alphabetically), then session date, then minute.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub buckets: Vec<MinuteBucket>,
    pub features: Vec<FeatureRecord>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn labeled_rows(&self) -> Result<Vec<LabeledRow>, DatasetError> {
        label_feature_rows(&self.features, &self.buckets)
    }
}

struct DayShard {
    session_date: String,
    records: Vec<TickRecord>,
}

fn split_days(records: Vec<TickRecord>, tz: Tz) -> Result<Vec<DayShard>, TickDataError> {
    let mut shards: Vec<DayShard> = Vec::new();
    for record in records {
        let date = local_date(record.timestamp, tz)?.to_string();
        match shards.last_mut() {
            Some(shard) if shard.session_date == date => shard.records.push(record),
            _ => shards.push(DayShard {
                session_date: date,
                records: vec![record],
            }),
        }
    }
    Ok(shards)
}

/// Runs the tape through the session filter, the sampler and the metric
/// layer. Each ticker's stream must be non-decreasing in time. Ticker-days
/// are processed in parallel; the output order does not depend on the
/// thread count.
pub fn build_features(records: Vec<TickRecord>, window: &SessionWindow, tz: Tz) -> Result<FeatureTable, TickDataError> {
    let mut by_ticker: BTreeMap<String, Vec<TickRecord>> = BTreeMap::new();
    for record in records {
        by_ticker.entry(record.ticker.clone()).or_default().push(record);
    }
    let mut shards = Vec::new();
    for stream in by_ticker.into_values() {
        shards.extend(split_days(filter_session(stream, window, tz)?, tz)?);
    }
    let parts: Vec<(Vec<MinuteBucket>, Vec<FeatureRecord>)> = shards
        .into_par_iter()
        .map(|shard| {
            let buckets = bucketize(&shard.records);
            let features = compute_day_features(&buckets)
                .into_iter()
                .zip(&buckets)
                .map(|(features, b)| FeatureRecord {
                    ticker: b.ticker.clone(),
                    session_date: shard.session_date.clone(),
                    minute_start: b.minute_start,
                    features,
                })
                .collect();
            (buckets, features)
        })
        .collect();
    let mut table = FeatureTable::default();
    for (buckets, features) in parts {
        table.buckets.extend(buckets);
        table.features.extend(features);
    }
    Ok(table)
}
