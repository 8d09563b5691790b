//! Direction labels, design-matrix assembly, the train/validation/test split
//! and train-only standardization.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::liquidity::{compute_day_features, FeatureRecord, FeatureVector, Metric};
use crate::rng::StreamRng;
use crate::sampler::MinuteBucket;

/// Minimum number of labeled rows accepted by [`split`].
pub const MIN_ROWS: usize = 20;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset too small: {0} rows, need at least {MIN_ROWS}")]
    DatasetTooSmall(usize),
    #[error("feature `{0}` is constant on the training slice")]
    ConstantFeature(Metric),
    #[error("split percentages {0:?} must be positive integers summing to 100")]
    BadSplit([u32; 3]),
    #[error("no active features")]
    NoFeatures,
    #[error("row {row}: feature dump key ({ticker}, {minute_start}) has no matching bucket")]
    KeyMismatch {
        row: usize,
        ticker: String,
        minute_start: i64,
    },
    #[error("dataset dump: {0}")]
    Format(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    /// `+1.0` for Up, `-1.0` for Down.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }

    /// `1.0` for Up, `0.0` for Down.
    pub fn indicator(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => 0.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

impl FromStr for Direction {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            other => Err(DatasetError::Format(format!("bad label `{other}`"))),
        }
    }
}

/// Label for each position of a price sequence: the sign of the move to the
/// next element, `None` on ties and for the last element.
pub fn label_directions(prices: &[f64]) -> Vec<Option<Direction>> {
    let mut labels: Vec<_> = prices
        .windows(2)
        .map(|w| {
            if w[1] > w[0] {
                Some(Direction::Up)
            } else if w[1] < w[0] {
                Some(Direction::Down)
            } else {
                None
            }
        })
        .collect();
    if !prices.is_empty() {
        labels.push(None);
    }
    labels
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub ticker: String,
    pub session_date: String,
    pub minute_start: i64,
    pub features: FeatureVector,
    pub label: Direction,
}

/// Labels one ticker-day of buckets. Features come from the same buckets.
pub fn label_rows(buckets: &[MinuteBucket], session_date: &str) -> Vec<LabeledRow> {
    let features = compute_day_features(buckets);
    let prices: Vec<f64> = buckets.iter().map(|b| b.first_trade_price).collect();
    label_directions(&prices)
        .into_iter()
        .zip(buckets.iter().zip(features))
        .filter_map(|(label, (b, features))| {
            Some(LabeledRow {
                ticker: b.ticker.clone(),
                session_date: session_date.to_owned(),
                minute_start: b.minute_start,
                features,
                label: label?,
            })
        })
        .collect()
}

/// Labels a feature dump using the matching bucket dump for prices. Rows
/// are grouped into ticker-days by consecutive `(ticker, session_date)`.
pub fn label_feature_rows(
    rows: &[FeatureRecord],
    buckets: &[MinuteBucket],
) -> Result<Vec<LabeledRow>, DatasetError> {
    for (i, (row, bucket)) in rows.iter().zip(buckets).enumerate() {
        if row.ticker != bucket.ticker || row.minute_start != bucket.minute_start {
            return Err(DatasetError::KeyMismatch {
                row: i,
                ticker: row.ticker.clone(),
                minute_start: row.minute_start,
            });
        }
    }
    if rows.len() != buckets.len() {
        let i = rows.len().min(buckets.len());
        let (ticker, minute_start) = rows
            .get(i)
            .map_or((String::new(), 0), |r| (r.ticker.clone(), r.minute_start));
        return Err(DatasetError::KeyMismatch {
            row: i,
            ticker,
            minute_start,
        });
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (&rows[start].ticker, &rows[start].session_date);
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| (&r.ticker, &r.session_date) == key)
                .count();
        let prices: Vec<f64> = buckets[start..end].iter().map(|b| b.first_trade_price).collect();
        for (row, label) in rows[start..end].iter().zip(label_directions(&prices)) {
            if let Some(label) = label {
                out.push(LabeledRow {
                    ticker: row.ticker.clone(),
                    session_date: row.session_date.clone(),
                    minute_start: row.minute_start,
                    features: row.features,
                    label,
                });
            }
        }
        start = end;
    }
    Ok(out)
}

/// Drops rows with a masked metric in the active set. Returns the kept rows
/// and the number dropped.
pub fn drop_masked(rows: Vec<LabeledRow>, active: &[Metric]) -> (Vec<LabeledRow>, usize) {
    let before = rows.len();
    let kept: Vec<_> = rows
        .into_iter()
        .filter(|r| r.features.all_valid(active))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// Row-major design matrix with labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Direction>,
}

impl Samples {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Direction>) -> Self {
        assert_eq!(x.len(), y.len(), "row/label count mismatch");
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Projects onto the given column indices, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Samples {
        Samples {
            x: self
                .x
                .iter()
                .map(|row| columns.iter().map(|&c| row[c]).collect())
                .collect(),
            y: self.y.clone(),
        }
    }
}

/// Per-feature affine standardization, fit on the training slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub features: Vec<Metric>,
    pub mean: Vec<f64>,
    /// Population standard deviation (divisor `n`).
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[LabeledRow], features: &[Metric]) -> Result<Self, DatasetError> {
        let n = rows.len() as f64;
        let mut mean = Vec::with_capacity(features.len());
        let mut std = Vec::with_capacity(features.len());
        for &m in features {
            let i = m.index();
            let mu = rows.iter().map(|r| r.features.values[i]).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|r| (r.features.values[i] - mu).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            let first = rows.first().map(|r| r.features.values[i]);
            let constant = rows.iter().all(|r| Some(r.features.values[i]) == first);
            if constant || !(sd > 0.0) || !sd.is_finite() {
                return Err(DatasetError::ConstantFeature(m));
            }
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self {
            features: features.to_vec(),
            mean,
            std,
        })
    }

    pub fn transform(&self, features: &FeatureVector) -> Vec<f64> {
        self.features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(m, (mu, sd))| (features.values[m.index()] - mu) / sd)
            .collect()
    }

    /// SHA-256 over the JSON encoding, used to tie models to the
    /// standardization they were trained under.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("standardizer serializes");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Chronological,
    Shuffled { seed: u64 },
}

/// Integer percentages for train/validation/test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFractions(pub [u32; 3]);

impl Default for SplitFractions {
    fn default() -> Self {
        Self([70, 15, 15])
    }
}

impl SplitFractions {
    pub fn validate(self) -> Result<Self, DatasetError> {
        let [a, b, c] = self.0;
        if a == 0 || b == 0 || c == 0 || a + b + c != 100 {
            return Err(DatasetError::BadSplit(self.0));
        }
        Ok(self)
    }

    /// Boundaries `floor(train% * n)` and `floor((train% + val%) * n)`.
    pub fn boundaries(self, n: usize) -> (usize, usize) {
        let [a, b, _] = self.0;
        let n = n as u128;
        (
            (n * u128::from(a) / 100) as usize,
            (n * u128::from(a + b) / 100) as usize,
        )
    }
}

impl FromStr for SplitFractions {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| DatasetError::Format(format!("bad split `{s}`")))?;
        let arr: [u32; 3] = parts
            .try_into()
            .map_err(|_| DatasetError::Format(format!("split `{s}` needs three parts")))?;
        SplitFractions(arr).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Validation,
    Test,
}

impl Part {
    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Validation => "val",
            Part::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    /// All rows in split order; the three ranges partition it.
    pub rows: Vec<LabeledRow>,
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
    pub standardizer: Standardizer,
}

impl SplitDataset {
    pub fn range(&self, part: Part) -> Range<usize> {
        match part {
            Part::Train => self.train.clone(),
            Part::Validation => self.validation.clone(),
            Part::Test => self.test.clone(),
        }
    }

    pub fn features(&self) -> &[Metric] {
        &self.standardizer.features
    }

    /// Standardized design matrix for one part.
    pub fn samples(&self, part: Part) -> Samples {
        let rows = &self.rows[self.range(part)];
        Samples::new(
            rows.iter()
                .map(|r| self.standardizer.transform(&r.features))
                .collect(),
            rows.iter().map(|r| r.label).collect(),
        )
    }

    pub fn part_of(&self, index: usize) -> Part {
        if self.train.contains(&index) {
            Part::Train
        } else if self.validation.contains(&index) {
            Part::Validation
        } else {
            Part::Test
        }
    }
}

/// Splits rows into train/validation/test and fits standardization on the
/// training slice. Rows are expected ticker-major, time-minor.
pub fn split(
    mut rows: Vec<LabeledRow>,
    features: &[Metric],
    fractions: SplitFractions,
    mode: SplitMode,
) -> Result<SplitDataset, DatasetError> {
    let fractions = fractions.validate()?;
    if features.is_empty() {
        return Err(DatasetError::NoFeatures);
    }
    let n = rows.len();
    if n < MIN_ROWS {
        return Err(DatasetError::DatasetTooSmall(n));
    }
    if let SplitMode::Shuffled { seed } = mode {
        StreamRng::new(seed, "split/shuffle").shuffle(&mut rows);
    }
    let (b1, b2) = fractions.boundaries(n);
    let standardizer = Standardizer::fit(&rows[..b1], features)?;
    Ok(SplitDataset {
        rows,
        train: 0..b1,
        validation: b1..b2,
        test: b2..n,
        standardizer,
    })
}

/// Dataset dump: keys, split, label and the raw (unstandardized) active
/// feature values.
pub fn write_dataset<W: Write>(
    writer: W,
    data: &SplitDataset,
    comment: Option<&str>,
) -> Result<(), DatasetError> {
    let mut writer = writer;
    if let Some(comment) = comment {
        writeln!(writer, "# {comment}")?;
    }
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["ticker", "session_date", "minute_start", "split", "label"]
        .map(String::from)
        .to_vec();
    header.extend(data.features().iter().map(|m| m.name().to_owned()));
    csv.write_record(&header)?;
    for (i, row) in data.rows.iter().enumerate() {
        let mut fields = vec![
            row.ticker.clone(),
            row.session_date.clone(),
            row.minute_start.to_string(),
            data.part_of(i).name().to_owned(),
            row.label.to_string(),
        ];
        fields.extend(
            data.features()
                .iter()
                .map(|m| row.features.values[m.index()].to_string()),
        );
        csv.write_record(&fields)?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads a dataset dump back, reattaching the stored standardization.
pub fn read_dataset<R: Read>(
    reader: R,
    standardizer: Standardizer,
) -> Result<SplitDataset, DatasetError> {
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = csv.headers()?.clone();
    let names: Vec<&str> = header.iter().skip(5).collect();
    let expected: Vec<&str> = standardizer.features.iter().map(|m| m.name()).collect();
    if names != expected {
        return Err(DatasetError::Format(
            "dataset columns do not match standardization features".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut order = Vec::new();
    for record in csv.records() {
        let record = record?;
        let part = match &record[3] {
            "train" => "train",
            "val" => "val",
            "test" => "test",
            other => return Err(DatasetError::Format(format!("bad split `{other}`"))),
        };
        *counts.entry(part).or_default() += 1;
        order.push(part);
        let mut features = FeatureVector {
            values: [0.0; crate::liquidity::METRIC_COUNT],
            valid: [false; crate::liquidity::METRIC_COUNT],
        };
        for (j, m) in standardizer.features.iter().enumerate() {
            features.values[m.index()] = record[5 + j]
                .parse()
                .map_err(|_| DatasetError::Format(format!("bad value `{}`", &record[5 + j])))?;
            features.valid[m.index()] = true;
        }
        rows.push(LabeledRow {
            ticker: record[0].to_owned(),
            session_date: record[1].to_owned(),
            minute_start: record[2]
                .parse()
                .map_err(|_| DatasetError::Format("bad minute_start".into()))?,
            features,
            label: record[4].parse()?,
        });
    }
    let n_train = counts.get("train").copied().unwrap_or(0);
    let n_val = counts.get("val").copied().unwrap_or(0);
    let contiguous = order
        .iter()
        .enumerate()
        .all(|(i, p)| *p == if i < n_train { "train" } else if i < n_train + n_val { "val" } else { "test" });
    if !contiguous {
        return Err(DatasetError::Format("split ranges are not contiguous".into()));
    }
    let n = rows.len();
    Ok(SplitDataset {
        rows,
        train: 0..n_train,
        validation: n_train..n_train + n_val,
        test: n_train + n_val..n,
        standardizer,
    })
}
