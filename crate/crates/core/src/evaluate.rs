//! Real-vs-synthetic comparison: per-hour means, covariate probabilities,
//! age-group x day-of-week grids of total sleep, and per-group quantile
//! curves, plus two scalar deviation metrics.
//!
//! Sleep sums are accumulated as integers before dividing, so every value
//! here is independent of row order.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covariates::{DayOfWeek, Month, Sex};
use crate::fsutil::write_atomic;
use crate::temporalize::{sleep_column_name, total_sleep_minutes, FeatureMatrix};
use crate::N_BINS;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{0} matrix is empty")]
    EmptyInput(&'static str),
    #[error("no rows in age group {0}")]
    EmptyGroup(AgeGroup),
    #[error("quantile level {0} outside [0, 1]")]
    BadQuantile(f64),
    #[error("unknown age group {0:?}")]
    UnknownAgeGroup(String),
}

/// Evaluation-only age bands; the GAN itself sees age as a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "15-24")]
    From15To24,
    #[serde(rename = "25-34")]
    From25To34,
    #[serde(rename = "35-44")]
    From35To44,
    #[serde(rename = "45-54")]
    From45To54,
    #[serde(rename = "55-64")]
    From55To64,
    #[serde(rename = "65-74")]
    From65To74,
    #[serde(rename = "75+")]
    From75,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 7] = [
        AgeGroup::From15To24,
        AgeGroup::From25To34,
        AgeGroup::From35To44,
        AgeGroup::From45To54,
        AgeGroup::From55To64,
        AgeGroup::From65To74,
        AgeGroup::From75,
    ];

    /// Ages below 15 fall outside the schema; they map to the youngest band.
    pub fn of_age(age: u32) -> AgeGroup {
        match age {
            0..=24 => AgeGroup::From15To24,
            25..=34 => AgeGroup::From25To34,
            35..=44 => AgeGroup::From35To44,
            45..=54 => AgeGroup::From45To54,
            55..=64 => AgeGroup::From55To64,
            65..=74 => AgeGroup::From65To74,
            _ => AgeGroup::From75,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::From15To24 => "15-24",
            AgeGroup::From25To34 => "25-34",
            AgeGroup::From35To44 => "35-44",
            AgeGroup::From45To54 => "45-54",
            AgeGroup::From55To64 => "55-64",
            AgeGroup::From65To74 => "65-74",
            AgeGroup::From75 => "75+",
        }
    }

    /// Filename-safe form of the label.
    pub fn file_token(self) -> String {
        self.label().replace('+', "plus")
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AgeGroup {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgeGroup::ALL
            .into_iter()
            .find(|g| g.label() == s || g.file_token() == s)
            .ok_or_else(|| EvalError::UnknownAgeGroup(s.to_string()))
    }
}

fn non_empty<'a>(m: &'a FeatureMatrix, which: &'static str) -> Result<&'a FeatureMatrix, EvalError> {
    if m.is_empty() {
        Err(EvalError::EmptyInput(which))
    } else {
        Ok(m)
    }
}

/// Arithmetic mean of each sleep column.
pub fn mean_sleep_per_hour(matrix: &FeatureMatrix) -> Result<[f64; N_BINS], EvalError> {
    non_empty(matrix, "input")?;
    let mut sums = [0u64; N_BINS];
    for row in &matrix.rows {
        for (s, &b) in sums.iter_mut().zip(row.sleep.bins()) {
            *s += u64::from(b);
        }
    }
    let n = matrix.len() as f64;
    Ok(sums.map(|s| s as f64 / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateProb {
    pub label: String,
    pub p_real: f64,
    pub p_synth: f64,
}

fn indicator_labels() -> Vec<String> {
    let mut labels = Vec::new();
    labels.extend(Sex::ALL.iter().map(|s| format!("sex={s}")));
    labels.extend(DayOfWeek::ALL.iter().map(|d| format!("day_of_week={d}")));
    labels.extend(Month::ALL.iter().map(|m| format!("month={m}")));
    labels.extend(AgeGroup::ALL.iter().map(|g| format!("age_group={g}")));
    labels.push("weekday".into());
    labels
}

fn indicator_fractions(m: &FeatureMatrix) -> Vec<f64> {
    let ns = Sex::ALL.len();
    let nd = DayOfWeek::ALL.len();
    let nm = Month::ALL.len();
    let na = AgeGroup::ALL.len();
    let mut counts = vec![0u64; ns + nd + nm + na + 1];
    for row in &m.rows {
        let c = &row.covariates;
        counts[c.sex.index()] += 1;
        counts[ns + c.day_of_week.index()] += 1;
        counts[ns + nd + c.month.index()] += 1;
        counts[ns + nd + nm + AgeGroup::of_age(c.age).index()] += 1;
        if c.day_of_week.is_weekday() {
            counts[ns + nd + nm + na] += 1;
        }
    }
    let n = m.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Empirical frequency of every covariate level (sex, day, month, age
/// group) and of the derived Mon-Fri weekday indicator.
pub fn covariate_probabilities(real: &FeatureMatrix, synth: &FeatureMatrix) -> Result<Vec<CovariateProb>, EvalError> {
    let pr = indicator_fractions(non_empty(real, "real")?);
    let ps = indicator_fractions(non_empty(synth, "synthetic")?);
    Ok(indicator_labels()
        .into_iter()
        .zip(pr.into_iter().zip(ps))
        .map(|(label, (p_real, p_synth))| CovariateProb { label, p_real, p_synth })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: u64,
    /// Mean total daily sleep in minutes; `None` when `n == 0`.
    pub mean: Option<f64>,
}

/// Age group x day-of-week table of mean total sleep minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedGrid {
    /// Indexed `[age_group][day_of_week]`.
    pub cells: Vec<Vec<GridCell>>,
}

impl StratifiedGrid {
    pub fn cell(&self, group: AgeGroup, day: DayOfWeek) -> GridCell {
        self.cells[group.index()][day.index()]
    }

    /// Pooled mean over the cells of `group` whose day satisfies `pick`.
    pub fn pooled_mean(&self, group: AgeGroup, pick: impl Fn(DayOfWeek) -> bool) -> Option<f64> {
        let (mut total, mut n) = (0.0, 0u64);
        for &d in DayOfWeek::ALL.iter().filter(|&&d| pick(d)) {
            let c = self.cell(group, d);
            if let Some(m) = c.mean {
                total += m * c.n as f64;
                n += c.n;
            }
        }
        (n > 0).then(|| total / n as f64)
    }
}

pub fn stratified_means(matrix: &FeatureMatrix) -> Result<StratifiedGrid, EvalError> {
    non_empty(matrix, "input")?;
    let nd = DayOfWeek::ALL.len();
    let mut sums = vec![vec![(0u64, 0u64); nd]; AgeGroup::ALL.len()];
    for row in &matrix.rows {
        let c = &row.covariates;
        let cell = &mut sums[AgeGroup::of_age(c.age).index()][c.day_of_week.index()];
        cell.0 += u64::from(total_sleep_minutes(row));
        cell.1 += 1;
    }
    let cells = sums
        .into_iter()
        .map(|days| {
            days.into_iter()
                .map(|(sum, n)| GridCell {
                    n,
                    mean: (n > 0).then(|| sum as f64 / n as f64),
                })
                .collect()
        })
        .collect();
    Ok(StratifiedGrid { cells })
}

/// Linear interpolation between order statistics of ascending `sorted`:
/// `h = (n - 1) q`, `x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h])`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// For each sleep column, the requested quantiles over rows in `group`.
/// Result is indexed `[bin][q]`.
pub fn quantile_curves(matrix: &FeatureMatrix, group: AgeGroup, qs: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
    if let Some(&q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(EvalError::BadQuantile(q));
    }
    let members: Vec<_> = matrix
        .rows
        .iter()
        .filter(|r| AgeGroup::of_age(r.covariates.age) == group)
        .collect();
    if members.is_empty() {
        return Err(EvalError::EmptyGroup(group));
    }
    Ok((0..N_BINS)
        .map(|bin| {
            let mut col: Vec<f64> = members.iter().map(|r| f64::from(r.sleep.bins()[bin])).collect();
            col.sort_by(f64::total_cmp);
            qs.iter().map(|&q| quantile_sorted(&col, q)).collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

impl Quartiles {
    pub fn iqr(&self) -> f64 {
        self.q75 - self.q25
    }
}

pub const QUARTILE_LEVELS: [f64; 3] = [0.25, 0.5, 0.75];

/// Quartile curve of one group, or `None` if the group has no rows.
pub fn quartile_curve(matrix: &FeatureMatrix, group: AgeGroup) -> Option<Vec<Quartiles>> {
    match quantile_curves(matrix, group, &QUARTILE_LEVELS) {
        Ok(curve) => Some(
            curve
                .into_iter()
                .map(|q| Quartiles {
                    q25: q[0],
                    q50: q[1],
                    q75: q[2],
                })
                .collect(),
        ),
        Err(_) => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourMean {
    pub hour: usize,
    pub column: String,
    pub real: f64,
    pub synth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedCell {
    pub age_group: AgeGroup,
    pub day_of_week: DayOfWeek,
    pub n_real: u64,
    pub n_synth: u64,
    pub real_mean: Option<f64>,
    pub synth_mean: Option<f64>,
}

/// Quartile curves of one age group for both datasets. Inter-quartile
/// widths are reported per bin so under-dispersion of the synthetic data
/// is measurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupQuantiles {
    pub group: AgeGroup,
    pub n_real: u64,
    pub n_synth: u64,
    pub real: Option<Vec<Quartiles>>,
    pub synth: Option<Vec<Quartiles>>,
    pub iqr_real: Option<Vec<f64>>,
    pub iqr_synth: Option<Vec<f64>>,
    /// Mean synthetic IQR over mean real IQR across bins.
    pub iqr_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean absolute difference of the per-hour means, in minutes.
    pub mean_per_hour_mae: f64,
    pub max_covariate_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_real: usize,
    pub n_synth: usize,
    pub mean_per_hour: Vec<HourMean>,
    pub covariate_probs: Vec<CovariateProb>,
    pub stratified: Vec<StratifiedCell>,
    pub quantiles: Vec<GroupQuantiles>,
    pub metrics: Metrics,
}

fn group_quantiles(real: &FeatureMatrix, synth: &FeatureMatrix, group: AgeGroup) -> GroupQuantiles {
    let count = |m: &FeatureMatrix| {
        m.rows
            .iter()
            .filter(|r| AgeGroup::of_age(r.covariates.age) == group)
            .count() as u64
    };
    let real_q = quartile_curve(real, group);
    let synth_q = quartile_curve(synth, group);
    let iqr = |c: &Option<Vec<Quartiles>>| c.as_ref().map(|v| v.iter().map(Quartiles::iqr).collect::<Vec<_>>());
    let iqr_real = iqr(&real_q);
    let iqr_synth = iqr(&synth_q);
    let iqr_ratio = match (&iqr_real, &iqr_synth) {
        (Some(r), Some(s)) => {
            let r: f64 = r.iter().sum();
            let s: f64 = s.iter().sum();
            (r > 0.0).then(|| s / r)
        }
        _ => None,
    };
    GroupQuantiles {
        group,
        n_real: count(real),
        n_synth: count(synth),
        real: real_q,
        synth: synth_q,
        iqr_real,
        iqr_synth,
        iqr_ratio,
    }
}

pub fn build_report(
    real: &FeatureMatrix,
    synth: &FeatureMatrix,
    groups_for_quantiles: &[AgeGroup],
) -> Result<EvalReport, EvalError> {
    let mean_real = mean_sleep_per_hour(non_empty(real, "real")?)?;
    let mean_synth = mean_sleep_per_hour(non_empty(synth, "synthetic")?)?;
    let mean_per_hour: Vec<HourMean> = (0..N_BINS)
        .map(|h| HourMean {
            hour: h + 1,
            column: sleep_column_name(h + 1),
            real: mean_real[h],
            synth: mean_synth[h],
        })
        .collect();
    let mean_per_hour_mae = mean_per_hour.iter().map(|m| (m.real - m.synth).abs()).sum::<f64>() / N_BINS as f64;

    let covariate_probs = covariate_probabilities(real, synth)?;
    let max_covariate_deviation = covariate_probs
        .iter()
        .map(|p| (p.p_real - p.p_synth).abs())
        .fold(0.0, f64::max);

    let grid_real = stratified_means(real)?;
    let grid_synth = stratified_means(synth)?;
    let mut stratified = Vec::with_capacity(AgeGroup::ALL.len() * DayOfWeek::ALL.len());
    for g in AgeGroup::ALL {
        for &d in DayOfWeek::ALL {
            let (r, s) = (grid_real.cell(g, d), grid_synth.cell(g, d));
            stratified.push(StratifiedCell {
                age_group: g,
                day_of_week: d,
                n_real: r.n,
                n_synth: s.n,
                real_mean: r.mean,
                synth_mean: s.mean,
            });
        }
    }

    let quantiles = groups_for_quantiles
        .iter()
        .map(|&g| group_quantiles(real, synth, g))
        .collect();

    Ok(EvalReport {
        n_real: real.len(),
        n_synth: synth.len(),
        mean_per_hour,
        covariate_probs,
        stratified,
        quantiles,
        metrics: Metrics {
            mean_per_hour_mae,
            max_covariate_deviation,
        },
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn fig2_csv(&self) -> String {
        let mut out = String::from("hour,column,real_mean,synth_mean\n");
        for m in &self.mean_per_hour {
            out.push_str(&format!("{},{},{},{}\n", m.hour, m.column, m.real, m.synth));
        }
        out
    }

    pub fn fig3_csv(&self) -> String {
        let mut out = String::from("label,p_real,p_synth\n");
        for p in &self.covariate_probs {
            out.push_str(&format!("{},{},{}\n", p.label, p.p_real, p.p_synth));
        }
        out
    }

    pub fn fig4_csv(&self) -> String {
        let mut out = String::from("age_group,day_of_week,n_real,real_mean,n_synth,synth_mean\n");
        for c in &self.stratified {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.age_group,
                c.day_of_week,
                c.n_real,
                opt(c.real_mean),
                c.n_synth,
                opt(c.synth_mean)
            ));
        }
        out
    }

    pub fn fig5_csv(q: &GroupQuantiles) -> String {
        let mut out =
            String::from("hour,column,real_q25,real_q50,real_q75,real_iqr,synth_q25,synth_q50,synth_q75,synth_iqr\n");
        let side = |c: &Option<Vec<Quartiles>>, h: usize| match c {
            Some(v) => {
                let q = v[h];
                format!("{},{},{},{}", q.q25, q.q50, q.q75, q.iqr())
            }
            None => ",,,".to_string(),
        };
        for h in 0..N_BINS {
            out.push_str(&format!(
                "{},{},{},{}\n",
                h + 1,
                sleep_column_name(h + 1),
                side(&q.real, h),
                side(&q.synth, h)
            ));
        }
        out
    }

    /// `report.json` plus one plot-ready CSV per figure.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> std::io::Result<Vec<String>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut files = vec![
            ("report.json".to_string(), self.to_json()),
            ("fig2_means.csv".to_string(), self.fig2_csv()),
            ("fig3_probs.csv".to_string(), self.fig3_csv()),
            ("fig4_grid.csv".to_string(), self.fig4_csv()),
        ];
        for q in &self.quantiles {
            files.push((
                format!("fig5_quantiles_{}.csv", q.group.file_token()),
                Self::fig5_csv(q),
            ));
        }
        for (name, body) in &files {
            write_atomic(dir.join(name), body.as_bytes())?;
        }
        Ok(files.into_iter().map(|(n, _)| n).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::CovariateSet;
    use crate::temporalize::{FeatureRow, SleepVector};

    fn row(fill: u8, age: u32, day: DayOfWeek) -> FeatureRow {
        FeatureRow {
            sleep: SleepVector::new([fill; N_BINS]).unwrap(),
            covariates: CovariateSet {
                age,
                sex: Sex::Female,
                day_of_week: day,
                month: Month::Apr,
            },
        }
    }

    #[test]
    fn age_bands() {
        assert_eq!(AgeGroup::of_age(15), AgeGroup::From15To24);
        assert_eq!(AgeGroup::of_age(24), AgeGroup::From15To24);
        assert_eq!(AgeGroup::of_age(25), AgeGroup::From25To34);
        assert_eq!(AgeGroup::of_age(74), AgeGroup::From65To74);
        assert_eq!(AgeGroup::of_age(75), AgeGroup::From75);
        assert_eq!(AgeGroup::of_age(120), AgeGroup::From75);
        assert_eq!("75+".parse::<AgeGroup>().unwrap(), AgeGroup::From75);
        assert_eq!("75plus".parse::<AgeGroup>().unwrap(), AgeGroup::From75);
        assert!("10-14".parse::<AgeGroup>().is_err());
    }

    #[test]
    fn means_midpoint_and_single_row() {
        let m = FeatureMatrix::new(vec![row(0, 30, DayOfWeek::Mon), row(60, 30, DayOfWeek::Mon)]);
        assert_eq!(mean_sleep_per_hour(&m).unwrap(), [30.0; N_BINS]);
        let one = FeatureMatrix::new(vec![row(17, 30, DayOfWeek::Mon)]);
        assert_eq!(mean_sleep_per_hour(&one).unwrap(), [17.0; N_BINS]);
        assert_eq!(
            mean_sleep_per_hour(&FeatureMatrix::default()),
            Err(EvalError::EmptyInput("input"))
        );
    }

    #[test]
    fn weekday_hand_count() {
        let m = FeatureMatrix::new(vec![
            row(0, 30, DayOfWeek::Mon),
            row(0, 30, DayOfWeek::Mon),
            row(0, 30, DayOfWeek::Sat),
            row(0, 30, DayOfWeek::Sun),
        ]);
        let probs = covariate_probabilities(&m, &m).unwrap();
        let wk = probs.iter().find(|p| p.label == "weekday").unwrap();
        assert_eq!(wk.p_real, 0.5);
        assert_eq!(wk.p_synth, 0.5);
        assert_eq!(probs.len(), 2 + 7 + 12 + 7 + 1);
    }

    #[test]
    fn weekday_forty_nine_percent() {
        let rows: Vec<_> = (0..100)
            .map(|i| row(0, 30, if i < 49 { DayOfWeek::Tue } else { DayOfWeek::Sun }))
            .collect();
        let real = FeatureMatrix::new(rows);
        let synth_rows: Vec<_> = (0..100)
            .map(|i| row(0, 30, if i < 48 { DayOfWeek::Tue } else { DayOfWeek::Sun }))
            .collect();
        let probs = covariate_probabilities(&real, &FeatureMatrix::new(synth_rows)).unwrap();
        let wk = probs.iter().find(|p| p.label == "weekday").unwrap();
        assert_eq!(wk.p_real, 0.49);
        assert_eq!(wk.p_synth, 0.48);
    }

    #[test]
    fn grid_single_cell() {
        let mut sleep = [0u8; N_BINS];
        sleep[18..26].fill(60);
        let r = FeatureRow {
            sleep: SleepVector::new(sleep).unwrap(),
            covariates: CovariateSet {
                age: 20,
                sex: Sex::Male,
                day_of_week: DayOfWeek::Mon,
                month: Month::Jan,
            },
        };
        let grid = stratified_means(&FeatureMatrix::new(vec![r; 3])).unwrap();
        for g in AgeGroup::ALL {
            for &d in DayOfWeek::ALL {
                let c = grid.cell(g, d);
                if g == AgeGroup::From15To24 && d == DayOfWeek::Mon {
                    assert_eq!(
                        c,
                        GridCell {
                            n: 3,
                            mean: Some(480.0)
                        }
                    );
                } else {
                    assert_eq!(c, GridCell { n: 0, mean: None });
                }
            }
        }
    }

    #[test]
    fn type7_quantiles() {
        assert_eq!(quantile_sorted(&[0.0, 10.0, 20.0, 30.0], 0.5), 15.0);
        assert_eq!(quantile_sorted(&[0.0, 10.0, 20.0, 30.0], 0.25), 7.5);
        assert_eq!(quantile_sorted(&[0.0, 10.0, 20.0, 30.0], 1.0), 30.0);
        assert_eq!(quantile_sorted(&[4.0], 0.75), 4.0);
        let m = FeatureMatrix::new(vec![row(42, 20, DayOfWeek::Mon); 5]);
        let c = quantile_curves(&m, AgeGroup::From15To24, &QUARTILE_LEVELS).unwrap();
        assert!(c.iter().flatten().all(|&v| v == 42.0));
        assert_eq!(
            quantile_curves(&m, AgeGroup::From75, &QUARTILE_LEVELS),
            Err(EvalError::EmptyGroup(AgeGroup::From75))
        );
        assert_eq!(
            quantile_curves(&m, AgeGroup::From15To24, &[1.5]),
            Err(EvalError::BadQuantile(1.5))
        );
    }

    #[test]
    fn monday_to_saturday_shift() {
        let rows: Vec<_> = (0..100)
            .map(|i| row((i % 61) as u8, 20 + i as u32 % 60, DayOfWeek::ALL[i % 7]))
            .collect();
        let real = FeatureMatrix::new(rows);
        let mut synth = real.clone();
        let idx = synth
            .rows
            .iter()
            .position(|r| r.covariates.day_of_week == DayOfWeek::Mon)
            .unwrap();
        synth.rows[idx].covariates.day_of_week = DayOfWeek::Sat;
        let report = build_report(&real, &synth, &[]).unwrap();
        let wk = report.covariate_probs.iter().find(|p| p.label == "weekday").unwrap();
        assert!(((wk.p_real - wk.p_synth) - 0.01).abs() < 1e-12);
        assert!((report.metrics.max_covariate_deviation - 0.01).abs() < 1e-12);
        assert_eq!(report.metrics.mean_per_hour_mae, 0.0);
    }

    #[test]
    fn disjoint_fixtures_report() {
        let real = FeatureMatrix::new(vec![row(60, 20, DayOfWeek::Mon)]);
        let synth = FeatureMatrix::new(vec![row(0, 80, DayOfWeek::Sun)]);
        let report = build_report(&real, &synth, &AgeGroup::ALL).unwrap();
        assert_eq!(report.metrics.mean_per_hour_mae, 60.0);
        assert_eq!(report.metrics.max_covariate_deviation, 1.0);
        let q = &report.quantiles[0];
        assert!(q.real.is_some() && q.synth.is_none() && q.iqr_ratio.is_none());
        assert!(report.to_json().contains("\"75+\""));
    }

    #[test]
    fn writes_all_figure_files() {
        let m = FeatureMatrix::new(vec![row(30, 20, DayOfWeek::Mon), row(10, 80, DayOfWeek::Fri)]);
        let report = build_report(&m, &m, &[AgeGroup::From15To24, AgeGroup::From75]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = report.write_to_dir(dir.path()).unwrap();
        assert_eq!(
            files,
            [
                "report.json",
                "fig2_means.csv",
                "fig3_probs.csv",
                "fig4_grid.csv",
                "fig5_quantiles_15-24.csv",
                "fig5_quantiles_75plus.csv"
            ]
        );
        let back: EvalReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back, report);
        let fig5 = std::fs::read_to_string(dir.path().join("fig5_quantiles_15-24.csv")).unwrap();
        assert_eq!(fig5.lines().count(), 31);
    }
}
