//! Parametric sleep-diary population generator.
//!
//! Each person draws an age-band profile by weight, then covariates, then a
//! main sleep episode from normal onset/duration draws for the day type
//! (weekday or weekend), plus an optional nap. Person `i` uses its own
//! ChaCha stream seeded with `seed + i`, so generation order and
//! parallelism never change the output.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateSet, DayOfWeek, Month, Sex, MAX_AGE, MIN_AGE};
use crate::ingest::{EventRecord, PersonDay, DEFAULT_SLEEP_ACTIVITY};
use crate::WINDOW_MINUTES;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid population config: {0}")]
pub struct ConfigError(pub String);

/// Normal model of one sleep episode, in window minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeModel {
    pub onset_mean: f64,
    pub onset_sd: f64,
    pub duration_mean: f64,
    pub duration_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub age_min: u32,
    pub age_max: u32,
    /// Probability of drawing this profile.
    pub weight: f64,
    pub weekday: EpisodeModel,
    pub weekend: EpisodeModel,
    pub nap_probability: f64,
    pub nap: EpisodeModel,
}

fn uniform_days() -> Vec<f64> {
    vec![1.0 / 7.0; 7]
}

fn uniform_months() -> Vec<f64> {
    vec![1.0 / 12.0; 12]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub profiles: Vec<GroupProfile>,
    pub n_persons: usize,
    /// Mon..Sun.
    #[serde(default = "uniform_days")]
    pub day_of_week_weights: Vec<f64>,
    /// Jan..Dec.
    #[serde(default = "uniform_months")]
    pub month_weights: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

const SUM_TOLERANCE: f64 = 1e-9;

fn check_distribution(name: &str, w: &[f64], len: usize) -> Result<(), ConfigError> {
    if w.len() != len {
        return Err(ConfigError(format!("{name} needs {len} weights, found {}", w.len())));
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(ConfigError(format!("{name} weights must be finite and non-negative")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(ConfigError(format!("{name} weights sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_episode(label: &str, e: &EpisodeModel) -> Result<(), ConfigError> {
    let window = 0.0..f64::from(WINDOW_MINUTES);
    let finite = [e.onset_mean, e.onset_sd, e.duration_mean, e.duration_sd]
        .iter()
        .all(|x| x.is_finite());
    if !finite {
        return Err(ConfigError(format!("{label}: non-finite parameter")));
    }
    if e.onset_sd < 0.0 || e.duration_sd < 0.0 {
        return Err(ConfigError(format!("{label}: standard deviations must be >= 0")));
    }
    if !window.contains(&e.onset_mean) || !window.contains(&e.duration_mean) {
        return Err(ConfigError(format!("{label}: means must lie in [0, {WINDOW_MINUTES})")));
    }
    Ok(())
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_persons == 0 {
            return Err(ConfigError("n_persons must be at least 1".into()));
        }
        if self.profiles.is_empty() {
            return Err(ConfigError("at least one profile is required".into()));
        }
        let weights: Vec<f64> = self.profiles.iter().map(|p| p.weight).collect();
        check_distribution("profile", &weights, weights.len())?;
        check_distribution("day_of_week", &self.day_of_week_weights, 7)?;
        check_distribution("month", &self.month_weights, 12)?;
        for (i, p) in self.profiles.iter().enumerate() {
            let label = format!("profile {i} ({}-{})", p.age_min, p.age_max);
            if p.age_min > p.age_max || p.age_min < MIN_AGE || p.age_max > MAX_AGE {
                return Err(ConfigError(format!(
                    "{label}: age range outside [{MIN_AGE}, {MAX_AGE}]"
                )));
            }
            if !(0.0..=1.0).contains(&p.nap_probability) {
                return Err(ConfigError(format!("{label}: nap_probability outside [0, 1]")));
            }
            check_episode(&format!("{label} weekday"), &p.weekday)?;
            check_episode(&format!("{label} weekend"), &p.weekend)?;
            check_episode(&format!("{label} nap"), &p.nap)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: PopulationConfig = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn episode(onset_mean: f64, onset_sd: f64, duration_mean: f64, duration_sd: f64) -> EpisodeModel {
    EpisodeModel {
        onset_mean,
        onset_sd,
        duration_mean,
        duration_sd,
    }
}

/// Ground-truth population with the stratified sleep orderings built in.
///
/// Onsets are minutes after 4:00am (1080 = 10pm); all values in minutes.
///
/// | ages  | weight | weekday onset / duration | weekend onset / duration | nap p |
/// |-------|--------|--------------------------|--------------------------|-------|
/// | 15-24 | 0.16   | 1110±90 / 540±75         | 1110±90 / 615±75         | 0.15  |
/// | 25-34 | 0.17   | 1110±60 / 480±50         | 1140±70 / 510±60         | 0.10  |
/// | 35-44 | 0.16   | 1110±50 / 440±45         | 1125±55 / 470±50         | 0.10  |
/// | 45-54 | 0.17   | 1110±50 / 445±45         | 1125±55 / 475±50         | 0.10  |
/// | 55-64 | 0.15   | 1095±50 / 465±45         | 1110±55 / 490±50         | 0.12  |
/// | 65-74 | 0.11   | 1080±50 / 500±50         | 1080±50 / 515±50         | 0.20  |
/// | 75+   | 0.08   | 1065±55 / 525±55         | 1065±55 / 535±55         | 0.25  |
///
/// Naps start at 660±90 (3pm) and last 45±20. The 15-24 band has the
/// widest spread, weekend sleep beats weekday sleep for 15-24, 15-24
/// weekday sleep beats every 35-54 cell, and both 65+ bands beat 35-54.
pub fn default_population() -> PopulationConfig {
    let nap = episode(660.0, 90.0, 45.0, 20.0);
    let band = |age_min, age_max, weight, weekday, weekend, nap_probability| GroupProfile {
        age_min,
        age_max,
        weight,
        weekday,
        weekend,
        nap_probability,
        nap,
    };
    PopulationConfig {
        profiles: vec![
            band(
                15,
                24,
                0.16,
                episode(1110.0, 90.0, 540.0, 75.0),
                episode(1110.0, 90.0, 615.0, 75.0),
                0.15,
            ),
            band(
                25,
                34,
                0.17,
                episode(1110.0, 60.0, 480.0, 50.0),
                episode(1140.0, 70.0, 510.0, 60.0),
                0.10,
            ),
            band(
                35,
                44,
                0.16,
                episode(1110.0, 50.0, 440.0, 45.0),
                episode(1125.0, 55.0, 470.0, 50.0),
                0.10,
            ),
            band(
                45,
                54,
                0.17,
                episode(1110.0, 50.0, 445.0, 45.0),
                episode(1125.0, 55.0, 475.0, 50.0),
                0.10,
            ),
            band(
                55,
                64,
                0.15,
                episode(1095.0, 50.0, 465.0, 45.0),
                episode(1110.0, 55.0, 490.0, 50.0),
                0.12,
            ),
            band(
                65,
                74,
                0.11,
                episode(1080.0, 50.0, 500.0, 50.0),
                episode(1080.0, 50.0, 515.0, 50.0),
                0.20,
            ),
            band(
                75,
                90,
                0.08,
                episode(1065.0, 55.0, 525.0, 55.0),
                episode(1065.0, 55.0, 535.0, 55.0),
                0.25,
            ),
        ],
        n_persons: 2000,
        day_of_week_weights: uniform_days(),
        month_weights: uniform_months(),
        seed: 17,
    }
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sd * z
}

fn draw_event(rng: &mut ChaCha8Rng, person_id: &str, model: &EpisodeModel) -> EventRecord {
    let start = normal(rng, model.onset_mean, model.onset_sd).round();
    let duration = normal(rng, model.duration_mean, model.duration_sd).round();
    EventRecord {
        person_id: person_id.to_string(),
        activity: DEFAULT_SLEEP_ACTIVITY.to_string(),
        start_min: start.clamp(0.0, f64::from(WINDOW_MINUTES - 1)) as u32,
        duration_min: duration.clamp(1.0, f64::from(WINDOW_MINUTES)) as u32,
    }
}

struct Samplers {
    profile: WeightedIndex<f64>,
    day: WeightedIndex<f64>,
    month: WeightedIndex<f64>,
}

fn simulate_person(config: &PopulationConfig, samplers: &Samplers, index: usize, id_width: usize) -> PersonDay {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(index as u64));
    let person_id = format!("p{index:0id_width$}");
    let profile = &config.profiles[samplers.profile.sample(&mut rng)];
    let age = rng.random_range(profile.age_min..=profile.age_max);
    let sex = if rng.random_bool(0.5) { Sex::Female } else { Sex::Male };
    let day_of_week = DayOfWeek::ALL[samplers.day.sample(&mut rng)];
    let month = Month::ALL[samplers.month.sample(&mut rng)];

    let model = if day_of_week.is_weekday() {
        &profile.weekday
    } else {
        &profile.weekend
    };
    let main = draw_event(&mut rng, &person_id, model);
    let mut events = vec![main];
    if rng.random_bool(profile.nap_probability) {
        let nap = draw_event(&mut rng, &person_id, &profile.nap);
        // one event per start minute; a colliding nap is absorbed
        if nap.start_min != events[0].start_min {
            events.push(nap);
        }
    }
    events.sort_by_key(|e| e.start_min);
    PersonDay {
        person_id,
        covariates: CovariateSet {
            age,
            sex,
            day_of_week,
            month,
        },
        events,
    }
}

/// Generate `config.n_persons` person-days, ordered by person id.
pub fn simulate_population(config: &PopulationConfig) -> Result<Vec<PersonDay>, ConfigError> {
    config.validate()?;
    let weighted = |w: Vec<f64>| WeightedIndex::new(w).map_err(|e| ConfigError(e.to_string()));
    let samplers = Samplers {
        profile: weighted(config.profiles.iter().map(|p| p.weight).collect())?,
        day: weighted(config.day_of_week_weights.clone())?,
        month: weighted(config.month_weights.clone())?,
    };
    let id_width = (config.n_persons - 1).to_string().len();
    Ok((0..config.n_persons)
        .into_par_iter()
        .map(|i| simulate_person(config, &samplers, i, id_width))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporalize::bin_sleep_minutes;

    fn one_profile(onset_sd: f64) -> PopulationConfig {
        PopulationConfig {
            profiles: vec![GroupProfile {
                age_min: 30,
                age_max: 40,
                weight: 1.0,
                weekday: episode(1080.0, onset_sd, 480.0, 0.0),
                weekend: episode(1080.0, onset_sd, 480.0, 0.0),
                nap_probability: 0.0,
                nap: episode(600.0, 0.0, 30.0, 0.0),
            }],
            n_persons: 50,
            day_of_week_weights: uniform_days(),
            month_weights: uniform_months(),
            seed: 4,
        }
    }

    #[test]
    fn deterministic_episode_bins() {
        let persons = simulate_population(&one_profile(0.0)).unwrap();
        let mut want = [0u8; 30];
        want[18..26].fill(60);
        for p in &persons {
            assert_eq!(bin_sleep_minutes(&p.events).bins(), &want);
            assert!((30..=40).contains(&p.covariates.age));
        }
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = default_population();
        cfg.validate().unwrap();
        let back = PopulationConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_errors() {
        let mut cfg = one_profile(10.0);
        cfg.profiles[0].weight = 0.5;
        assert!(simulate_population(&cfg).is_err());

        let mut cfg = one_profile(10.0);
        cfg.n_persons = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = one_profile(10.0);
        cfg.profiles[0].weekday.onset_sd = -1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = one_profile(10.0);
        cfg.day_of_week_weights = vec![0.2; 5];
        assert!(cfg.validate().is_err());

        assert!(PopulationConfig::from_json("{}").is_err());
    }

    #[test]
    fn json_defaults_for_distributions() {
        let mut v: serde_json::Value = serde_json::from_str(&one_profile(1.0).to_json()).unwrap();
        let obj = v.as_object_mut().unwrap();
        obj.remove("day_of_week_weights");
        obj.remove("month_weights");
        let cfg = PopulationConfig::from_json(&v.to_string()).unwrap();
        assert_eq!(cfg.day_of_week_weights, uniform_days());
    }

    #[test]
    fn person_ids_sort_in_index_order() {
        let mut cfg = one_profile(5.0);
        cfg.n_persons = 120;
        let persons = simulate_population(&cfg).unwrap();
        assert_eq!(persons[7].person_id, "p007");
        assert!(persons.windows(2).all(|w| w[0].person_id < w[1].person_id));
    }

    #[test]
    fn subseeds_make_persons_independent_of_population_size() {
        let mut small = one_profile(40.0);
        small.n_persons = 10;
        let mut big = small.clone();
        big.n_persons = 100;
        let a = simulate_population(&small).unwrap();
        let b = simulate_population(&big).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.events[0].start_min, y.events[0].start_min);
            assert_eq!(x.covariates, y.covariates);
        }
    }
}
