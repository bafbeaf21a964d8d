//! End-to-end run on the default simulated population, printing the
//! evaluation metrics. `LGS_ITERS`, `LGS_LR`, `LGS_CLIP`, `LGS_NCRITIC` and
//! `LGS_SEED` override the defaults.

use std::time::Instant;

use lgs_core::codec::fit_codec;
use lgs_core::evaluate::{build_report, AgeGroup};
use lgs_core::simulate::{default_population, simulate_population};
use lgs_core::temporalize::build_feature_matrix;
use lgs_core::wgan::{encode_training_matrix, sample, GanConfig, Trainer};
use lgs_core::DayOfWeek;

fn env<T: std::str::FromStr>(key: &str) -> Option<T> {
    std::env::var(key).ok()?.parse().ok()
}

fn main() {
    let seed = env("LGS_SEED").unwrap_or(17);
    let mut pop = default_population();
    pop.seed = seed;
    let persons = simulate_population(&pop).unwrap();
    let real = build_feature_matrix(&persons).unwrap();
    let codec = fit_codec(&real).unwrap();
    let data = encode_training_matrix(&codec, &real).unwrap();

    let mut config = GanConfig {
        seed,
        ..GanConfig::default()
    };
    if let Some(n) = env("LGS_ITERS") {
        config.iterations = n;
    }
    if let Some(lr) = env("LGS_LR") {
        config.learning_rate = lr;
    }
    if let Some(c) = env("LGS_CLIP") {
        config.clip_c = c;
    }
    if let Some(k) = env("LGS_NCRITIC") {
        config.n_critic = k;
    }
    let started = Instant::now();
    let mut trainer = Trainer::new(&data, &config, &codec.hash()).unwrap();
    let every = (config.iterations / 10).max(1);
    while trainer.iteration() < config.iterations {
        let e = trainer.step().unwrap();
        if (e.iteration + 1).is_multiple_of(every) {
            eprintln!(
                "iter {:>6}  W {:+.5}  ({:.1}s)",
                e.iteration + 1,
                e.wasserstein_estimate,
                started.elapsed().as_secs_f64()
            );
        }
    }
    let cp = trainer.into_checkpoint();
    let synth = sample(&cp, &codec, 20_000, seed).unwrap();
    let report = build_report(&real, &synth, &[AgeGroup::From15To24]).unwrap();

    println!("mean-per-hour MAE        {:.3} min", report.metrics.mean_per_hour_mae);
    println!("max covariate deviation  {:.4}", report.metrics.max_covariate_deviation);
    for p in &report.covariate_probs {
        println!("  {:<16} real {:.3}  synth {:.3}", p.label, p.p_real, p.p_synth);
    }
    for h in &report.mean_per_hour {
        println!("  {:<10} real {:6.2}  synth {:6.2}", h.column, h.real, h.synth);
    }
    for c in &report.stratified {
        if matches!(
            c.age_group,
            AgeGroup::From15To24 | AgeGroup::From35To44 | AgeGroup::From45To54
        ) {
            println!(
                "  {:<6} {}  real {:>7.1} (n={:>4})  synth {:>7.1} (n={:>5})",
                c.age_group.label(),
                c.day_of_week,
                c.real_mean.unwrap_or(f64::NAN),
                c.n_real,
                c.synth_mean.unwrap_or(f64::NAN),
                c.n_synth
            );
        }
    }
    let grid = lgs_core::evaluate::stratified_means(&synth).unwrap();
    let young_weekend = grid
        .pooled_mean(AgeGroup::From15To24, |d| !d.is_weekday())
        .unwrap_or(f64::NAN);
    let young_weekday = grid
        .pooled_mean(AgeGroup::From15To24, DayOfWeek::is_weekday)
        .unwrap_or(f64::NAN);
    let mid = [AgeGroup::From35To44, AgeGroup::From45To54]
        .iter()
        .flat_map(|&g| DayOfWeek::ALL.iter().map(move |&d| (g, d)))
        .map(|(g, d)| grid.cell(g, d))
        .filter(|c| c.n >= 100)
        .filter_map(|c| c.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("ORDER 15-24 weekend {young_weekend:.1} > weekday {young_weekday:.1} > max 35-54 {mid:.1}");
    if let Some(r) = report.quantiles[0].iqr_ratio {
        println!("15-24 IQR ratio synth/real {r:.3}");
    }
}
