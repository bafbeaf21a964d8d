//! Event-log CSV ingestion.
//!
//! The interchange format is one row per activity episode:
//!
//! ```text
//! person_id,age,sex,day_of_week,month,activity,start_min,duration_min
//! p1,30,male,Mon,Jan,sleep,0,60
//! ```
//!
//! `start_min` counts minutes from 4:00am of the reference day and must lie
//! in `[0, 1800)`. Covariate columns repeat on every row of a person. Rows
//! whose activity is not the configured sleep code are validated and then
//! dropped (and counted).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateSet, DayOfWeek, Month, Sex, MAX_AGE, MIN_AGE};
use crate::WINDOW_MINUTES;

pub const HEADER: [&str; 8] = [
    "person_id",
    "age",
    "sex",
    "day_of_week",
    "month",
    "activity",
    "start_min",
    "duration_min",
];

pub const DEFAULT_SLEEP_ACTIVITY: &str = "sleep";

/// One timed activity episode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub person_id: String,
    pub activity: String,
    pub start_min: u32,
    pub duration_min: u32,
}

impl EventRecord {
    /// End minute, exclusive. May exceed the window.
    pub fn end_min(&self) -> u32 {
        self.start_min + self.duration_min
    }

    pub fn covers(&self, minute: u32) -> bool {
        minute >= self.start_min && minute < self.end_min()
    }

    pub fn is_valid(&self) -> bool {
        self.start_min < WINDOW_MINUTES && self.duration_min >= 1 && !self.activity.is_empty()
    }
}

/// All sleep episodes of one person for one reference day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonDay {
    pub person_id: String,
    pub covariates: CovariateSet,
    /// Sorted ascending by `start_min`.
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: bad header: expected `{}`, found `{found}`", HEADER.join(","))]
    BadHeader { line: u64, found: String },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: conflict for person {person_id:?}: {reason}")]
    CovariateConflict {
        line: u64,
        person_id: String,
        reason: String,
    },
    #[error("line {line}: {reason}")]
    DomainError { line: u64, reason: String },
    #[error("no event rows")]
    EmptyInput,
    #[error("time {0} outside [0, {WINDOW_MINUTES}]")]
    TimeOutOfRange(u32),
}

impl IngestError {
    pub fn line(&self) -> Option<u64> {
        match self {
            IngestError::BadHeader { line, .. }
            | IngestError::MalformedRow { line, .. }
            | IngestError::CovariateConflict { line, .. }
            | IngestError::DomainError { line, .. } => Some(*line),
            IngestError::EmptyInput | IngestError::TimeOutOfRange(_) => None,
        }
    }
}

/// Every located error found in one input, in line order.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseErrors(pub Vec<IngestError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Activity code kept as sleep; every other activity is dropped.
    pub sleep_activity: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            sleep_activity: DEFAULT_SLEEP_ACTIVITY.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEvents {
    /// One entry per distinct person id, ordered by id.
    pub persons: Vec<PersonDay>,
    /// Valid rows dropped because their activity was not sleep.
    pub dropped_rows: usize,
}

struct PersonAcc {
    covariates: CovariateSet,
    first_line: u64,
    events: BTreeMap<u32, (u64, EventRecord)>,
}

fn parse_int(field: &str, name: &str, line: u64) -> Result<i64, IngestError> {
    field.trim().parse::<i64>().map_err(|_| IngestError::MalformedRow {
        line,
        reason: format!("{name}: unparsable integer {field:?}"),
    })
}

fn parse_token<T: std::str::FromStr>(field: &str, name: &str, line: u64) -> Result<T, IngestError> {
    field.trim().parse::<T>().map_err(|_| IngestError::DomainError {
        line,
        reason: format!("{name}: invalid value {field:?}"),
    })
}

fn parse_row(rec: &csv::StringRecord, line: u64) -> Result<(CovariateSet, EventRecord), IngestError> {
    if rec.len() != HEADER.len() {
        return Err(IngestError::MalformedRow {
            line,
            reason: format!("expected {} columns, found {}", HEADER.len(), rec.len()),
        });
    }
    let person_id = rec[0].trim().to_string();
    if person_id.is_empty() {
        return Err(IngestError::MalformedRow {
            line,
            reason: "empty person_id".into(),
        });
    }
    let age = parse_int(&rec[1], "age", line)?;
    let start = parse_int(&rec[6], "start_min", line)?;
    let duration = parse_int(&rec[7], "duration_min", line)?;
    if !(MIN_AGE as i64..=MAX_AGE as i64).contains(&age) {
        return Err(IngestError::DomainError {
            line,
            reason: format!("age {age} outside [{MIN_AGE}, {MAX_AGE}]"),
        });
    }
    if !(0..WINDOW_MINUTES as i64).contains(&start) {
        return Err(IngestError::DomainError {
            line,
            reason: format!("start_min {start} outside [0, {WINDOW_MINUTES})"),
        });
    }
    if duration < 1 || duration > u32::MAX as i64 - WINDOW_MINUTES as i64 {
        return Err(IngestError::DomainError {
            line,
            reason: format!("duration_min {duration} must be a positive minute count"),
        });
    }
    let sex: Sex = parse_token(&rec[2], "sex", line)?;
    let day_of_week: DayOfWeek = parse_token(&rec[3], "day_of_week", line)?;
    let month: Month = parse_token(&rec[4], "month", line)?;
    let activity = rec[5].trim().to_string();
    if activity.is_empty() {
        return Err(IngestError::DomainError {
            line,
            reason: "empty activity".into(),
        });
    }
    Ok((
        CovariateSet {
            age: age as u32,
            sex,
            day_of_week,
            month,
        },
        EventRecord {
            person_id,
            activity,
            start_min: start as u32,
            duration_min: duration as u32,
        },
    ))
}

/// Parse an event CSV into per-person sleep episode lists.
///
/// Every row is validated, including rows that are later dropped for not
/// being sleep. All errors are collected; the result is `Ok` only when the
/// input is entirely clean.
pub fn parse_events(input: &str, opts: &IngestOptions) -> Result<ParsedEvents, ParseErrors> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input.as_bytes());

    let mut errors = Vec::new();
    let mut persons: BTreeMap<String, PersonAcc> = BTreeMap::new();
    let mut dropped_rows = 0usize;
    let mut saw_header = false;
    let mut data_rows = 0usize;

    for result in reader.records() {
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                errors.push(IngestError::MalformedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if !saw_header {
            saw_header = true;
            let found: Vec<&str> = rec.iter().map(str::trim).collect();
            if found != HEADER {
                return Err(ParseErrors(vec![IngestError::BadHeader {
                    line,
                    found: found.join(","),
                }]));
            }
            continue;
        }
        data_rows += 1;

        let (cov, event) = match parse_row(&rec, line) {
            Ok(v) => v,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };

        let acc = persons.entry(event.person_id.clone()).or_insert_with(|| PersonAcc {
            covariates: cov,
            first_line: line,
            events: BTreeMap::new(),
        });
        if acc.covariates != cov {
            errors.push(IngestError::CovariateConflict {
                line,
                person_id: event.person_id.clone(),
                reason: format!("covariates differ from line {}", acc.first_line),
            });
            continue;
        }
        if event.activity != opts.sleep_activity {
            dropped_rows += 1;
            continue;
        }
        if let Some((prev_line, _)) = acc.events.get(&event.start_min) {
            errors.push(IngestError::CovariateConflict {
                line,
                person_id: event.person_id.clone(),
                reason: format!(
                    "duplicate event at start_min {} (first seen on line {prev_line})",
                    event.start_min
                ),
            });
            continue;
        }
        acc.events.insert(event.start_min, (line, event));
    }

    if !saw_header {
        return Err(ParseErrors(vec![IngestError::EmptyInput]));
    }
    if !errors.is_empty() {
        return Err(ParseErrors(errors));
    }
    if data_rows == 0 {
        return Err(ParseErrors(vec![IngestError::EmptyInput]));
    }

    let persons = persons
        .into_iter()
        .map(|(person_id, acc)| PersonDay {
            person_id,
            covariates: acc.covariates,
            events: acc.events.into_values().map(|(_, e)| e).collect(),
        })
        .collect();
    Ok(ParsedEvents { persons, dropped_rows })
}

/// Fraction of persons with no event covering minute `t_min`.
pub fn awake_fraction_at(persons: &[PersonDay], t_min: u32) -> Result<f64, IngestError> {
    if t_min > WINDOW_MINUTES {
        return Err(IngestError::TimeOutOfRange(t_min));
    }
    if persons.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let awake = persons
        .iter()
        .filter(|p| !p.events.iter().any(|e| e.covers(t_min)))
        .count();
    Ok(awake as f64 / persons.len() as f64)
}

/// Serialize persons back into the event CSV format.
///
/// A person without sleep episodes is written as a single `awake` row
/// spanning the window so their covariates survive a round trip.
pub fn write_events_csv(persons: &[PersonDay]) -> String {
    let mut out = String::new();
    out.push_str(&HEADER.join(","));
    out.push('\n');
    for p in persons {
        let c = &p.covariates;
        let mut row = |activity: &str, start: u32, dur: u32| {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.person_id, c.age, c.sex, c.day_of_week, c.month, activity, start, dur
            ));
        };
        if p.events.is_empty() {
            row("awake", 0, WINDOW_MINUTES);
        }
        for e in &p.events {
            row(&e.activity, e.start_min, e.duration_min);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HDR: &str = "person_id,age,sex,day_of_week,month,activity,start_min,duration_min\n";

    fn parse(body: &str) -> Result<ParsedEvents, ParseErrors> {
        parse_events(&format!("{HDR}{body}"), &IngestOptions::default())
    }

    fn single_error(body: &str) -> IngestError {
        let errs = parse(body).unwrap_err().0;
        assert_eq!(errs.len(), 1, "{errs:?}");
        errs.into_iter().next().unwrap()
    }

    #[test]
    fn two_rows_one_person_sorted() {
        let out = parse("p1,30,male,Mon,Jan,sleep,1200,480\np1,30,male,Mon,Jan,sleep,0,60\n").unwrap();
        assert_eq!(out.persons.len(), 1);
        let p = &out.persons[0];
        assert_eq!(p.events.len(), 2);
        assert_eq!(p.events[0].start_min, 0);
        assert_eq!(p.events[1].start_min, 1200);
        assert_eq!(p.covariates.age, 30);
    }

    #[test]
    fn underage_is_domain_error_with_line() {
        let e = single_error("p1,30,male,Mon,Jan,sleep,0,60\np2,12,male,Mon,Jan,sleep,0,60\n");
        assert!(matches!(e, IngestError::DomainError { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn start_and_duration_bounds() {
        assert!(matches!(
            single_error("p1,30,male,Mon,Jan,sleep,1800,5\n"),
            IngestError::DomainError { line: 2, .. }
        ));
        assert!(matches!(
            single_error("p1,30,male,Mon,Jan,sleep,-5,5\n"),
            IngestError::DomainError { line: 2, .. }
        ));
        assert!(matches!(
            single_error("p1,30,male,Mon,Jan,sleep,10,0\n"),
            IngestError::DomainError { line: 2, .. }
        ));
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            single_error("p1,30,male,Mon,Jan,sleep,0\n"),
            IngestError::MalformedRow { line: 2, .. }
        ));
        assert!(matches!(
            single_error("p1,thirty,male,Mon,Jan,sleep,0,60\n"),
            IngestError::MalformedRow { line: 2, .. }
        ));
    }

    #[test]
    fn bad_tokens_are_domain_errors() {
        assert!(matches!(
            single_error("p1,30,other,Mon,Jan,sleep,0,60\n"),
            IngestError::DomainError { .. }
        ));
        assert!(matches!(
            single_error("p1,30,male,Monday,Jan,sleep,0,60\n"),
            IngestError::DomainError { .. }
        ));
    }

    #[test]
    fn covariate_conflict() {
        let e = single_error("p1,30,male,Mon,Jan,sleep,0,60\np1,31,male,Mon,Jan,sleep,100,60\n");
        assert!(matches!(e, IngestError::CovariateConflict { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn duplicate_start_rejected() {
        let e = single_error("p1,30,male,Mon,Jan,sleep,0,60\np1,30,male,Mon,Jan,sleep,0,90\n");
        assert!(matches!(e, IngestError::CovariateConflict { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn overlapping_events_accepted() {
        let out = parse("p1,30,male,Mon,Jan,sleep,0,60\np1,30,male,Mon,Jan,sleep,30,60\n").unwrap();
        assert_eq!(out.persons[0].events.len(), 2);
    }

    #[test]
    fn non_sleep_rows_counted_and_dropped() {
        let out =
            parse("p1,30,male,Mon,Jan,work,0,60\np1,30,male,Mon,Jan,sleep,600,60\np2,40,female,Sat,Feb,eat,10,10\n")
                .unwrap();
        assert_eq!(out.dropped_rows, 2);
        assert_eq!(out.persons.len(), 2);
        assert_eq!(out.persons[0].events.len(), 1);
        assert!(out.persons[1].events.is_empty());
    }

    #[test]
    fn custom_sleep_code() {
        let opts = IngestOptions {
            sleep_activity: "010101".into(),
        };
        let out = parse_events(&format!("{HDR}p1,30,male,Mon,Jan,010101,0,60\n"), &opts).unwrap();
        assert_eq!(out.persons[0].events.len(), 1);
    }

    #[test]
    fn all_errors_reported() {
        let errs =
            parse("p1,12,male,Mon,Jan,sleep,0,60\np2,30,male,Mon,Jan,sleep,x,60\np3,30,male,Mon,Jan,sleep,0,60\n")
                .unwrap_err()
                .0;
        let lines: Vec<_> = errs.iter().map(|e| e.line().unwrap()).collect();
        assert_eq!(lines, vec![2, 3]);
    }

    #[test]
    fn crlf_and_header_checks() {
        let text =
            "person_id,age,sex,day_of_week,month,activity,start_min,duration_min\r\np1,30,male,Mon,Jan,sleep,0,60\r\n";
        assert_eq!(parse_events(text, &IngestOptions::default()).unwrap().persons.len(), 1);

        let bad = "id,age,sex,day_of_week,month,activity,start_min,duration_min\np1,30,male,Mon,Jan,sleep,0,60\n";
        let errs = parse_events(bad, &IngestOptions::default()).unwrap_err().0;
        assert!(matches!(errs[0], IngestError::BadHeader { line: 1, .. }));

        assert_eq!(
            parse_events("", &IngestOptions::default()).unwrap_err().0,
            vec![IngestError::EmptyInput]
        );
        assert_eq!(
            parse_events(HDR, &IngestOptions::default()).unwrap_err().0,
            vec![IngestError::EmptyInput]
        );
    }

    fn person(id: &str, events: &[(u32, u32)]) -> PersonDay {
        PersonDay {
            person_id: id.into(),
            covariates: CovariateSet {
                age: 40,
                sex: Sex::Female,
                day_of_week: DayOfWeek::Tue,
                month: Month::Mar,
            },
            events: events
                .iter()
                .map(|&(s, d)| EventRecord {
                    person_id: id.into(),
                    activity: "sleep".into(),
                    start_min: s,
                    duration_min: d,
                })
                .collect(),
        }
    }

    #[test]
    fn awake_fraction_ninety_six_of_hundred() {
        // 4 people still asleep at 10:00am, 96 awake
        let persons: Vec<_> = (0..100)
            .map(|i| {
                if i < 4 {
                    person(&format!("p{i}"), &[(1100, 720)])
                } else {
                    person(&format!("p{i}"), &[(1100, 600)])
                }
            })
            .collect();
        assert_eq!(awake_fraction_at(&persons, 1800).unwrap(), 0.96);
    }

    #[test]
    fn awake_fraction_everyone_asleep_and_errors() {
        let persons = vec![person("a", &[(0, 1800)]), person("b", &[(100, 50), (500, 10)])];
        assert_eq!(awake_fraction_at(&persons, 505).unwrap(), 0.0);
        assert_eq!(awake_fraction_at(&[], 10), Err(IngestError::EmptyInput));
        assert_eq!(
            awake_fraction_at(&persons, 1801),
            Err(IngestError::TimeOutOfRange(1801))
        );
    }

    #[test]
    fn write_then_parse_round_trip() {
        let persons = vec![person("a", &[(0, 60), (900, 400)]), person("b", &[])];
        let text = write_events_csv(&persons);
        let parsed = parse_events(&text, &IngestOptions::default()).unwrap();
        assert_eq!(parsed.persons, persons);
        assert_eq!(parsed.dropped_rows, 1);
    }
}
