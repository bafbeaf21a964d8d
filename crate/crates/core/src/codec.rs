//! Reversible mapping between the 34-column schema and the GAN's numeric
//! space.
//!
//! Continuous columns are min-max scaled onto `[-1, 1]` using fixed
//! physical bounds (sleep minutes `[0, 60]`, age `[15, 120]`); categorical
//! columns expand to one-hot blocks over their full enumeration. With 31
//! continuous columns and 2 + 7 + 12 categories the encoded width is 52.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariates::{CovariateSet, DayOfWeek, Month, Sex, MAX_AGE, MIN_AGE};
use crate::temporalize::{column_names, FeatureMatrix, FeatureRow, SleepVector, N_COLUMNS};
use crate::{BIN_MINUTES, N_BINS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("cannot fit a codec on an empty matrix")]
    EmptyInput,
    #[error("column {column}: {reason}")]
    DomainError { column: String, reason: String },
    #[error("expected a vector of length {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid codec: {0}")]
    InvalidSpec(String),
    #[error("codec JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous { lo: f64, hi: f64 },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn width(&self) -> usize {
        match &self.kind {
            ColumnKind::Continuous { .. } => 1,
            ColumnKind::Categorical { categories } => categories.len(),
        }
    }

    fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous { lo, hi },
        }
    }

    fn categorical(name: &str, tokens: impl IntoIterator<Item = &'static str>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical {
                categories: tokens.into_iter().map(String::from).collect(),
            },
        }
    }
}

/// One schema cell before encoding.
#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Number(f64),
    Category(&'static str),
}

fn row_cells(row: &FeatureRow) -> Vec<Cell> {
    let c = &row.covariates;
    row.sleep
        .bins()
        .iter()
        .map(|&b| Cell::Number(f64::from(b)))
        .chain([
            Cell::Number(f64::from(c.age)),
            Cell::Category(c.sex.token()),
            Cell::Category(c.day_of_week.token()),
            Cell::Category(c.month.token()),
        ])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codec {
    specs: Vec<ColumnSpec>,
    encoded_width: usize,
}

impl Codec {
    /// The schema-fixed codec: bounds and categories do not depend on data.
    pub fn for_schema() -> Self {
        let names = column_names();
        let mut specs: Vec<ColumnSpec> = names[..N_BINS]
            .iter()
            .map(|n| ColumnSpec::continuous(n.clone(), 0.0, f64::from(BIN_MINUTES)))
            .collect();
        specs.push(ColumnSpec::continuous("age", f64::from(MIN_AGE), f64::from(MAX_AGE)));
        specs.push(ColumnSpec::categorical("sex", Sex::ALL.iter().map(|s| s.token())));
        specs.push(ColumnSpec::categorical(
            "day_of_week",
            DayOfWeek::ALL.iter().map(|d| d.token()),
        ));
        specs.push(ColumnSpec::categorical("month", Month::ALL.iter().map(|m| m.token())));
        let encoded_width = specs.iter().map(ColumnSpec::width).sum();
        Codec { specs, encoded_width }
    }

    pub fn specs(&self) -> &[ColumnSpec] {
        &self.specs
    }

    pub fn encoded_width(&self) -> usize {
        self.encoded_width
    }

    /// Check structural invariants, e.g. after loading from JSON.
    pub fn validate(&self) -> Result<(), CodecError> {
        let invalid = |m: String| Err(CodecError::InvalidSpec(m));
        if self.specs.len() != N_COLUMNS {
            return invalid(format!("expected {N_COLUMNS} columns, found {}", self.specs.len()));
        }
        for (spec, name) in self.specs.iter().zip(column_names()) {
            if spec.name != name {
                return invalid(format!("column {name:?} named {:?}", spec.name));
            }
            match &spec.kind {
                ColumnKind::Continuous { lo, hi } => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return invalid(format!("{name}: bounds [{lo}, {hi}]"));
                    }
                }
                ColumnKind::Categorical { categories } => {
                    let mut sorted = categories.clone();
                    sorted.sort();
                    sorted.dedup();
                    if sorted.len() < 2 || sorted.len() != categories.len() {
                        return invalid(format!("{name}: need at least 2 distinct categories"));
                    }
                }
            }
        }
        let width: usize = self.specs.iter().map(ColumnSpec::width).sum();
        if width != self.encoded_width {
            return invalid(format!("encoded_width {} but specs sum to {width}", self.encoded_width));
        }
        Ok(())
    }

    pub fn encode(&self, row: &FeatureRow) -> Result<Vec<f64>, CodecError> {
        let mut out = Vec::with_capacity(self.encoded_width);
        for (spec, cell) in self.specs.iter().zip(row_cells(row)) {
            match (&spec.kind, cell) {
                (ColumnKind::Continuous { lo, hi }, Cell::Number(x)) => {
                    if !(x >= *lo && x <= *hi) {
                        return Err(CodecError::DomainError {
                            column: spec.name.clone(),
                            reason: format!("{x} outside [{lo}, {hi}]"),
                        });
                    }
                    out.push(2.0 * (x - lo) / (hi - lo) - 1.0);
                }
                (ColumnKind::Categorical { categories }, Cell::Category(tok)) => {
                    let idx = categories
                        .iter()
                        .position(|c| c == tok)
                        .ok_or_else(|| CodecError::DomainError {
                            column: spec.name.clone(),
                            reason: format!("unknown category {tok:?}"),
                        })?;
                    out.extend((0..categories.len()).map(|i| if i == idx { 1.0 } else { 0.0 }));
                }
                _ => {
                    return Err(CodecError::DomainError {
                        column: spec.name.clone(),
                        reason: "column kind does not match schema".into(),
                    })
                }
            }
        }
        Ok(out)
    }

    /// Encode every row into one row-major buffer of `len * encoded_width`.
    pub fn encode_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, CodecError> {
        let mut out = Vec::with_capacity(matrix.len() * self.encoded_width);
        for row in &matrix.rows {
            out.extend(self.encode(row)?);
        }
        Ok(out)
    }

    /// Decode any finite-or-not vector of the right length into a
    /// schema-valid row: continuous values are clamped and rounded,
    /// categorical blocks resolve by argmax (lowest index on ties).
    pub fn decode(&self, v: &[f64]) -> Result<FeatureRow, CodecError> {
        if v.len() != self.encoded_width {
            return Err(CodecError::LengthMismatch {
                expected: self.encoded_width,
                found: v.len(),
            });
        }
        let mut numbers = Vec::with_capacity(N_BINS + 1);
        let mut tokens = Vec::with_capacity(3);
        let mut offset = 0;
        for spec in &self.specs {
            match &spec.kind {
                ColumnKind::Continuous { lo, hi } => {
                    let x = lo + (v[offset] + 1.0) * (hi - lo) / 2.0;
                    // NaN decodes to the lower bound
                    let x = if x.is_nan() { *lo } else { x.clamp(*lo, *hi) };
                    numbers.push(x.round());
                }
                ColumnKind::Categorical { categories } => {
                    let block = &v[offset..offset + categories.len()];
                    let mut best = 0;
                    for (i, &x) in block.iter().enumerate() {
                        if x > block[best] || block[best].is_nan() && !x.is_nan() {
                            best = i;
                        }
                    }
                    tokens.push((spec.name.as_str(), categories[best].as_str()));
                }
            }
            offset += spec.width();
        }

        let bad = |column: &str, reason: String| CodecError::DomainError {
            column: column.into(),
            reason,
        };
        let mut bins = [0u8; N_BINS];
        for (b, x) in bins.iter_mut().zip(&numbers) {
            *b = (*x).clamp(0.0, f64::from(BIN_MINUTES)) as u8;
        }
        let age = numbers[N_BINS].clamp(f64::from(MIN_AGE), f64::from(MAX_AGE)) as u32;
        let sex: Sex = tokens[0].1.parse().map_err(|e| bad(tokens[0].0, format!("{e}")))?;
        let day_of_week: DayOfWeek = tokens[1].1.parse().map_err(|e| bad(tokens[1].0, format!("{e}")))?;
        let month: Month = tokens[2].1.parse().map_err(|e| bad(tokens[2].0, format!("{e}")))?;
        Ok(FeatureRow {
            sleep: SleepVector::new(bins).expect("bins clamped to [0, 60]"),
            covariates: CovariateSet {
                age,
                sex,
                day_of_week,
                month,
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("codec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CodecError> {
        let codec: Codec = serde_json::from_str(text).map_err(|e| CodecError::Json(e.to_string()))?;
        codec.validate()?;
        Ok(codec)
    }

    /// Hex SHA-256 of the canonical JSON form; ties checkpoints to codecs.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("codec serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fit a codec to `matrix`. Bounds and categories are schema-fixed, so any
/// non-empty matrix yields the same codec.
pub fn fit_codec(matrix: &FeatureMatrix) -> Result<Codec, CodecError> {
    if matrix.is_empty() {
        return Err(CodecError::EmptyInput);
    }
    Ok(Codec::for_schema())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(sleep: [u8; N_BINS], age: u32, sex: Sex, day: DayOfWeek, month: Month) -> FeatureRow {
        FeatureRow {
            sleep: SleepVector::new(sleep).unwrap(),
            covariates: CovariateSet {
                age,
                sex,
                day_of_week: day,
                month,
            },
        }
    }

    fn offset_of(codec: &Codec, name: &str) -> usize {
        let mut off = 0;
        for s in codec.specs() {
            if s.name == name {
                return off;
            }
            off += s.width();
        }
        panic!("no column {name}")
    }

    #[test]
    fn width_is_52() {
        let m = FeatureMatrix::new(vec![row([0; N_BINS], 20, Sex::Male, DayOfWeek::Mon, Month::Jan)]);
        let c = fit_codec(&m).unwrap();
        assert_eq!(c.encoded_width(), 31 + 2 + 7 + 12);
        assert_eq!(c.encoded_width(), 52);
        c.validate().unwrap();
    }

    #[test]
    fn sleep_bounds_and_data_independence() {
        let a = FeatureMatrix::new(vec![row([0; N_BINS], 20, Sex::Male, DayOfWeek::Mon, Month::Jan)]);
        let b = FeatureMatrix::new(vec![row([60; N_BINS], 80, Sex::Female, DayOfWeek::Sat, Month::Jul)]);
        let ca = fit_codec(&a).unwrap();
        assert_eq!(ca, fit_codec(&b).unwrap());
        assert_eq!(ca.specs()[0].kind, ColumnKind::Continuous { lo: 0.0, hi: 60.0 });
        assert_eq!(ca.specs()[30].kind, ColumnKind::Continuous { lo: 15.0, hi: 120.0 });
        assert_eq!(fit_codec(&FeatureMatrix::default()), Err(CodecError::EmptyInput));
    }

    #[test]
    fn encode_endpoints_and_one_hot() {
        let c = Codec::for_schema();
        let mut sleep = [0u8; N_BINS];
        sleep[1] = 60;
        sleep[2] = 30;
        let v = c
            .encode(&row(sleep, 15, Sex::Male, DayOfWeek::Wed, Month::Dec))
            .unwrap();
        assert_eq!(v.len(), 52);
        assert_eq!(&v[..3], &[-1.0, 1.0, 0.0]);
        assert_eq!(v[30], -1.0);
        let sex = offset_of(&c, "sex");
        assert_eq!(&v[sex..sex + 2], &[0.0, 1.0]);
        let day = offset_of(&c, "day_of_week");
        assert_eq!(&v[day..day + 7], &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let month = offset_of(&c, "month");
        assert_eq!(v[month + 11], 1.0);
    }

    #[test]
    fn decode_clamps_and_argmaxes() {
        let c = Codec::for_schema();
        let mut v = vec![0.0; 52];
        v[0] = -1.0;
        v[1] = 1.3;
        v[2] = -7.0;
        v[30] = 5.0;
        let day = offset_of(&c, "day_of_week");
        v[day..day + 7].copy_from_slice(&[0.2, 0.9, 0.1, 0.0, 0.0, 0.0, 0.0]);
        let r = c.decode(&v).unwrap();
        assert_eq!(r.sleep.bins()[0], 0);
        assert_eq!(r.sleep.bins()[1], 60);
        assert_eq!(r.sleep.bins()[2], 0);
        assert_eq!(r.sleep.bins()[3], 30);
        assert_eq!(r.covariates.age, 120);
        assert_eq!(r.covariates.day_of_week, DayOfWeek::Tue);
        // all-zero blocks tie: lowest index wins
        assert_eq!(r.covariates.sex, Sex::Female);
        assert_eq!(r.covariates.month, Month::Jan);
    }

    #[test]
    fn decode_length_mismatch() {
        let c = Codec::for_schema();
        assert_eq!(
            c.decode(&[0.0; 51]),
            Err(CodecError::LengthMismatch {
                expected: 52,
                found: 51
            })
        );
    }

    #[test]
    fn json_round_trip_and_validation() {
        let c = Codec::for_schema();
        let back = Codec::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let broken = c.to_json().replacen("\"hi\": 60.0", "\"hi\": -1.0", 1);
        assert!(matches!(Codec::from_json(&broken), Err(CodecError::InvalidSpec(_))));
    }

    #[test]
    fn unknown_category_in_edited_codec() {
        let mut c = Codec::for_schema();
        if let ColumnKind::Categorical { categories } = &mut c.specs[31].kind {
            categories[1] = "other".into();
        }
        let r = row([0; N_BINS], 30, Sex::Male, DayOfWeek::Mon, Month::Jan);
        assert!(matches!(c.encode(&r), Err(CodecError::DomainError { .. })));
    }

    fn row_strategy() -> impl Strategy<Value = FeatureRow> {
        (
            prop::array::uniform30(0u8..=60),
            15u32..=120,
            0usize..2,
            0usize..7,
            0usize..12,
        )
            .prop_map(|(s, age, sex, day, month)| {
                row(
                    s,
                    age,
                    Sex::from_index(sex).unwrap(),
                    DayOfWeek::from_index(day).unwrap(),
                    Month::from_index(month).unwrap(),
                )
            })
    }

    proptest! {
        #[test]
        fn round_trip_exact(r in row_strategy()) {
            let c = Codec::for_schema();
            let v = c.encode(&r).unwrap();
            prop_assert!(v.iter().all(|x| (-1.0..=1.0).contains(x)));
            prop_assert_eq!(c.decode(&v).unwrap(), r);
        }

        #[test]
        fn decode_is_total(v in prop::collection::vec(-3.0f64..3.0, 52)) {
            let c = Codec::for_schema();
            let r = c.decode(&v).unwrap();
            prop_assert!(CovariateSet::age_in_range(r.covariates.age));
            prop_assert!(r.sleep.bins().iter().all(|&b| b <= 60));
            prop_assert_eq!(c.decode(&v).unwrap(), r);
        }
    }
}
