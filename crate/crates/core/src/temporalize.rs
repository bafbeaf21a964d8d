//! Event lists to hourly minutes-asleep bins and the 34-column matrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateSet, DayOfWeek, Month, Sex, MAX_AGE, MIN_AGE};
use crate::ingest::{EventRecord, PersonDay};
use crate::{BIN_MINUTES, N_BINS, WINDOW_MINUTES};

/// Total number of columns in the cross-sectional schema.
pub const N_COLUMNS: usize = N_BINS + 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemporalizeError {
    #[error("no persons to temporalize")]
    EmptyInput,
    #[error("line {line}: bad matrix header: {reason}")]
    BadHeader { line: u64, reason: String },
    #[error("line {line}: malformed matrix row: {reason}")]
    MalformedRow { line: u64, reason: String },
}

/// Minutes asleep in each of the 30 hourly bins; bin `h` covers window
/// minutes `[60h, 60h + 60)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SleepVector([u8; N_BINS]);

impl SleepVector {
    pub const AWAKE: SleepVector = SleepVector([0; N_BINS]);

    /// Returns `None` if any bin exceeds 60.
    pub fn new(bins: [u8; N_BINS]) -> Option<Self> {
        bins.iter()
            .all(|&b| u32::from(b) <= BIN_MINUTES)
            .then_some(SleepVector(bins))
    }

    pub fn bins(&self) -> &[u8; N_BINS] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&b| u32::from(b)).sum()
    }
}

/// Count, per hourly bin, the distinct window minutes covered by at least
/// one event. Overlaps count once; minutes at or past the window end are
/// discarded.
pub fn bin_sleep_minutes(events: &[EventRecord]) -> SleepVector {
    let mut spans: Vec<(u32, u32)> = events
        .iter()
        .map(|e| (e.start_min.min(WINDOW_MINUTES), e.end_min().min(WINDOW_MINUTES)))
        .filter(|(s, e)| s < e)
        .collect();
    spans.sort_unstable();

    let mut bins = [0u8; N_BINS];
    let mut add = |start: u32, end: u32| {
        let mut m = start;
        while m < end {
            let bin = m / BIN_MINUTES;
            let bin_end = ((bin + 1) * BIN_MINUTES).min(end);
            bins[bin as usize] += (bin_end - m) as u8;
            m = bin_end;
        }
    };

    let mut current: Option<(u32, u32)> = None;
    for (s, e) in spans {
        match current {
            Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                add(cs, ce);
                current = Some((s, e));
            }
            None => current = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = current {
        add(cs, ce);
    }
    SleepVector(bins)
}

/// Column name for 1-based sleep bin `i`: `hour{i}_{clock}` with clock
/// hour `(3 + i) mod 24`.
pub fn sleep_column_name(i: usize) -> String {
    format!("hour{}_{}", i, (3 + i) % 24)
}

pub fn column_names() -> Vec<String> {
    (1..=N_BINS)
        .map(sleep_column_name)
        .chain(["age", "sex", "day_of_week", "month"].map(String::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureRow {
    pub sleep: SleepVector,
    pub covariates: CovariateSet,
}

/// Sum of the 30 sleep columns, in `[0, 1800]`.
pub fn total_sleep_minutes(row: &FeatureRow) -> u32 {
    row.sleep.total()
}

/// Cross-sectional form: one 34-column row per person-day.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<FeatureRow>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_names(&self) -> Vec<String> {
        column_names()
    }

    pub fn to_csv(&self) -> String {
        let mut out = column_names().join(",");
        out.push('\n');
        for row in &self.rows {
            for b in row.sleep.bins() {
                out.push_str(&b.to_string());
                out.push(',');
            }
            let c = &row.covariates;
            out.push_str(&format!("{},{},{},{}\n", c.age, c.sex, c.day_of_week, c.month));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TemporalizeError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records = reader.records();
        let malformed = |line: u64, reason: String| TemporalizeError::MalformedRow { line, reason };

        let header = match records.next() {
            Some(Ok(h)) => h,
            Some(Err(e)) => {
                return Err(TemporalizeError::BadHeader {
                    line: 1,
                    reason: e.to_string(),
                })
            }
            None => {
                return Err(TemporalizeError::BadHeader {
                    line: 1,
                    reason: "empty input".into(),
                })
            }
        };
        let expected = column_names();
        if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
            return Err(TemporalizeError::BadHeader {
                line: 1,
                reason: format!("expected {} named columns", N_COLUMNS),
            });
        }

        let mut rows = Vec::new();
        for rec in records {
            let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != N_COLUMNS {
                return Err(malformed(
                    line,
                    format!("expected {N_COLUMNS} columns, found {}", rec.len()),
                ));
            }
            let mut bins = [0u8; N_BINS];
            for (i, b) in bins.iter_mut().enumerate() {
                let v: u32 = rec[i]
                    .trim()
                    .parse()
                    .map_err(|_| malformed(line, format!("column {}: {:?} is not an integer", i + 1, &rec[i])))?;
                if v > BIN_MINUTES {
                    return Err(malformed(line, format!("column {}: {v} exceeds {BIN_MINUTES}", i + 1)));
                }
                *b = v as u8;
            }
            let age: u32 = rec[N_BINS]
                .trim()
                .parse()
                .map_err(|_| malformed(line, format!("age {:?} is not an integer", &rec[N_BINS])))?;
            if !(MIN_AGE..=MAX_AGE).contains(&age) {
                return Err(malformed(line, format!("age {age} outside [{MIN_AGE}, {MAX_AGE}]")));
            }
            let sex: Sex = rec[N_BINS + 1]
                .trim()
                .parse()
                .map_err(|e| malformed(line, format!("{e}")))?;
            let day_of_week: DayOfWeek = rec[N_BINS + 2]
                .trim()
                .parse()
                .map_err(|e| malformed(line, format!("{e}")))?;
            let month: Month = rec[N_BINS + 3]
                .trim()
                .parse()
                .map_err(|e| malformed(line, format!("{e}")))?;
            rows.push(FeatureRow {
                sleep: SleepVector(bins),
                covariates: CovariateSet {
                    age,
                    sex,
                    day_of_week,
                    month,
                },
            });
        }
        Ok(FeatureMatrix { rows })
    }
}

/// One row per person, in input order.
pub fn build_feature_matrix(persons: &[PersonDay]) -> Result<FeatureMatrix, TemporalizeError> {
    if persons.is_empty() {
        return Err(TemporalizeError::EmptyInput);
    }
    let rows = persons
        .par_iter()
        .map(|p| FeatureRow {
            sleep: bin_sleep_minutes(&p.events),
            covariates: p.covariates,
        })
        .collect();
    Ok(FeatureMatrix { rows })
}
