//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use lgs_core::covariates::{CovariateSet, DayOfWeek, Month, Sex};
use lgs_core::ingest::{EventRecord, PersonDay};
use lgs_core::neuralnet::{Activation, DenseNet, Matrix};
use lgs_core::temporalize::{FeatureMatrix, FeatureRow, SleepVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WINDOW: u32 = 1800;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random sleep episodes, possibly overlapping and possibly running past
/// the window end.
pub fn random_events(rng: &mut impl Rng, person: &str) -> Vec<EventRecord> {
    let n = rng.random_range(0..=6);
    let mut events: Vec<EventRecord> = (0..n)
        .map(|_| EventRecord {
            person_id: person.to_string(),
            activity: "sleep".into(),
            start_min: rng.random_range(0..WINDOW),
            duration_min: if rng.random_bool(0.2) {
                rng.random_range(1..=5)
            } else {
                rng.random_range(1..=900)
            },
        })
        .collect();
    events.sort_by_key(|e| e.start_min);
    events.dedup_by_key(|e| e.start_min);
    events
}

/// Per-minute occupancy scan: a minute sleeps if any episode covers it.
pub fn minute_scan_bins(events: &[EventRecord]) -> [u8; 30] {
    let mut bins = [0u8; 30];
    for m in 0..WINDOW {
        if events
            .iter()
            .any(|e| m >= e.start_min && m < e.start_min + e.duration_min)
        {
            bins[(m / 60) as usize] += 1;
        }
    }
    bins
}

pub fn random_covariates(rng: &mut impl Rng) -> CovariateSet {
    CovariateSet {
        age: rng.random_range(15..=95),
        sex: Sex::ALL[rng.random_range(0..2)],
        day_of_week: DayOfWeek::ALL[rng.random_range(0..7)],
        month: Month::ALL[rng.random_range(0..12)],
    }
}

pub fn random_person(rng: &mut impl Rng, index: usize) -> PersonDay {
    let id = format!("p{index:04}");
    PersonDay {
        events: random_events(rng, &id),
        person_id: id,
        covariates: random_covariates(rng),
    }
}

/// CSV text built by hand (not through the library writer).
pub fn events_csv(persons: &[PersonDay]) -> String {
    let mut s = String::from("person_id,age,sex,day_of_week,month,activity,start_min,duration_min\n");
    for p in persons {
        let c = &p.covariates;
        for e in &p.events {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                p.person_id, c.age, c.sex, c.day_of_week, c.month, e.activity, e.start_min, e.duration_min
            ));
        }
    }
    s
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize) -> FeatureMatrix {
    FeatureMatrix::new(
        (0..rows)
            .map(|_| {
                let mut bins = [0u8; 30];
                for b in &mut bins {
                    *b = match rng.random_range(0..4) {
                        0 => 0,
                        1 => 60,
                        _ => rng.random_range(0..=60),
                    };
                }
                FeatureRow {
                    sleep: SleepVector::new(bins).unwrap(),
                    covariates: random_covariates(rng),
                }
            })
            .collect(),
    )
}

pub fn random_net(rng: &mut impl Rng) -> DenseNet {
    let depth = rng.random_range(1..=3);
    let widths: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=8)).collect();
    let acts = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Identity,
    ];
    let hidden = acts[rng.random_range(0..4)];
    let output = acts[rng.random_range(0..4)];
    let mut net = DenseNet::new(&widths, hidden, output, rng).unwrap();
    for layer in net.layers_mut() {
        for b in &mut layer.bias {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    net
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect(),
    )
    .unwrap()
}

const STEP: f64 = 1e-5;

/// Scalar loss `sum(coef .* net(x))`.
fn probe_loss(net: &DenseNet, x: &Matrix, coef: &Matrix) -> f64 {
    let (y, _) = net.forward(x).unwrap();
    y.as_slice().iter().zip(coef.as_slice()).map(|(a, b)| a * b).sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative error between backprop and central differences over
/// every parameter and input coordinate.
pub fn max_gradient_error(net: &DenseNet, x: &Matrix, coef: &Matrix) -> f64 {
    let (_, cache) = net.forward(x).unwrap();
    let (grads, dx) = net.backward(&cache, coef).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().map(<[f64]>::to_vec).collect();

    let mut worst: f64 = 0.0;
    for (t, tensor) in analytic.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let mut plus = net.clone();
            plus.params_mut().nth(t).unwrap()[i] += STEP;
            let mut minus = net.clone();
            minus.params_mut().nth(t).unwrap()[i] -= STEP;
            let numeric = (probe_loss(&plus, x, coef) - probe_loss(&minus, x, coef)) / (2.0 * STEP);
            worst = worst.max(rel_err(a, numeric));
        }
    }
    for i in 0..x.as_slice().len() {
        let mut xp = x.clone();
        xp.as_mut_slice()[i] += STEP;
        let mut xm = x.clone();
        xm.as_mut_slice()[i] -= STEP;
        let numeric = (probe_loss(net, &xp, coef) - probe_loss(net, &xm, coef)) / (2.0 * STEP);
        worst = worst.max(rel_err(dx.as_slice()[i], numeric));
    }
    worst
}

/// Gradient check over 20 random networks and 5 random batches each.
pub fn gradient_check_sweep(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let net = random_net(&mut r);
        for _ in 0..5 {
            let n = r.random_range(1..=4);
            let x = uniform_matrix(&mut r, n, net.input_dim());
            let coef = uniform_matrix(&mut r, n, net.output_dim());
            worst = worst.max(max_gradient_error(&net, &x, &coef));
        }
    }
    worst
}

/// Type-7 quantile by sorting and linear interpolation.
pub fn quantile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
