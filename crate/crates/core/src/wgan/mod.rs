//! Weight-clipped Wasserstein GAN over encoded feature rows.
//!
//! Each generator iteration runs `n_critic` critic updates (RMSProp on
//! `-(mean D(real) - mean D(G(z)))`, then clipping every critic parameter
//! into `[-clip_c, clip_c]`) followed by one generator update on
//! `-mean D(G(z))`. Real batches are drawn without replacement from a
//! per-epoch shuffle; latent noise is standard normal.
//!
//! All randomness flows from one seeded ChaCha stream (plus per-epoch
//! shuffle streams derived from the same seed), so a run is a pure function
//! of data, config and seed, and can be resumed from a checkpoint with
//! bit-identical results.

mod checkpoint;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codec::{Codec, CodecError};
use crate::neuralnet::{Activation, DenseNet, Matrix, NnError, RmsProp};
use crate::temporalize::FeatureMatrix;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum WganError {
    #[error("invalid GAN config: {0}")]
    Config(String),
    #[error("need at least {batch} rows for one batch, found {rows}")]
    InsufficientData { rows: usize, batch: usize },
    #[error("training data contains non-finite values")]
    NonFiniteData,
    #[error("data width {found} does not match model width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: u64 },
    #[error("empty score batch")]
    EmptyBatch,
    #[error("codec hash {found} does not match checkpoint codec {expected}")]
    CodecMismatch { expected: String, found: String },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("cannot resume: {0}")]
    ResumeMismatch(String),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub latent_dim: usize,
    /// Hidden widths between the latent input and the encoded output.
    pub generator_hidden: Vec<usize>,
    /// Hidden widths between the encoded input and the scalar score.
    pub critic_hidden: Vec<usize>,
    pub n_critic: usize,
    pub clip_c: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub eps: f64,
    /// Total generator iterations.
    pub iterations: u64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            generator_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            n_critic: 5,
            clip_c: 0.01,
            batch_size: 64,
            learning_rate: 5e-5,
            rho: 0.9,
            eps: 1e-8,
            iterations: 3000,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<(), WganError> {
        let fail = |m: &str| Err(WganError::Config(m.to_string()));
        if self.latent_dim == 0 {
            return fail("latent_dim must be positive");
        }
        if self.generator_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return fail("hidden widths must be positive");
        }
        if self.n_critic == 0 {
            return fail("n_critic must be at least 1");
        }
        if !(self.clip_c > 0.0 && self.clip_c.is_finite()) {
            return fail("clip_c must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail("rho must lie in (0, 1)");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return fail("eps must be positive");
        }
        Ok(())
    }

    pub fn generator_widths(&self, data_width: usize) -> Vec<usize> {
        let mut w = vec![self.latent_dim];
        w.extend(&self.generator_hidden);
        w.push(data_width);
        w
    }

    pub fn critic_widths(&self, data_width: usize) -> Vec<usize> {
        let mut w = vec![data_width];
        w.extend(&self.critic_hidden);
        w.push(1);
        w
    }
}

/// Serializable position of a ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Where the next real batch starts: batch `position` of the shuffle for
/// `epoch`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataCursor {
    pub epoch: u64,
    pub position: u64,
}

/// Complete training state: resuming from it continues a run exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: GanConfig,
    pub codec_hash: String,
    pub data_width: usize,
    pub data_rows: u64,
    pub generator: DenseNet,
    pub critic: DenseNet,
    pub generator_opt: RmsProp,
    pub critic_opt: RmsProp,
    pub iteration: u64,
    pub rng: RngState,
    pub cursor: DataCursor,
}

impl ModelCheckpoint {
    /// Freshly initialized networks and optimizer state.
    pub fn initialize(
        config: &GanConfig,
        codec_hash: &str,
        data_width: usize,
        data_rows: usize,
    ) -> Result<Self, WganError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = DenseNet::new(
            &config.generator_widths(data_width),
            Activation::Relu,
            Activation::Tanh,
            &mut rng,
        )?;
        let critic = DenseNet::new(
            &config.critic_widths(data_width),
            Activation::Relu,
            Activation::Identity,
            &mut rng,
        )?;
        let generator_opt = RmsProp::new(&generator, config.learning_rate, config.rho, config.eps);
        let critic_opt = RmsProp::new(&critic, config.learning_rate, config.rho, config.eps);
        Ok(Self {
            config: config.clone(),
            codec_hash: codec_hash.to_string(),
            data_width,
            data_rows: data_rows as u64,
            generator,
            critic,
            generator_opt,
            critic_opt,
            iteration: 0,
            rng: RngState::capture(&rng),
            cursor: DataCursor::default(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        checkpoint::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WganError> {
        checkpoint::decode(bytes)
    }
}

/// Mean critic score on real minus mean score on fake.
pub fn wasserstein_estimate(critic_real: &[f64], critic_fake: &[f64]) -> Result<f64, WganError> {
    if critic_real.is_empty() || critic_fake.is_empty() {
        return Err(WganError::EmptyBatch);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(critic_real) - mean(critic_fake))
}

/// Clamp every critic weight and bias into `[-c, c]`.
pub fn clip_weights(critic: &mut DenseNet, c: f64) {
    critic.clip_params(c);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEntry {
    pub iteration: u64,
    pub wasserstein_estimate: f64,
}

/// `iteration,wasserstein_estimate` CSV.
pub fn loss_log_csv(log: &[LossEntry]) -> String {
    let mut out = String::from("iteration,wasserstein_estimate\n");
    for e in log {
        out.push_str(&format!("{},{}\n", e.iteration, e.wasserstein_estimate));
    }
    out
}

fn sample_latent(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Matrix {
    let mut z = Matrix::zeros(rows, dim);
    for v in z.as_mut_slice() {
        *v = rng.sample(StandardNormal);
    }
    z
}

fn constant(rows: usize, value: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, 1);
    m.as_mut_slice().fill(value);
    m
}

/// Stateful training loop over an encoded data matrix.
pub struct Trainer<'a> {
    state: ModelCheckpoint,
    data: &'a Matrix,
    rng: ChaCha8Rng,
    shuffle: Vec<usize>,
    shuffle_epoch: Option<u64>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a Matrix, config: &GanConfig, codec_hash: &str) -> Result<Self, WganError> {
        config.validate()?;
        let state = ModelCheckpoint::initialize(config, codec_hash, data.cols(), data.rows())?;
        Self::resume(state, data)
    }

    /// Continue from `state`; `data` must be the matrix the run started on.
    pub fn resume(state: ModelCheckpoint, data: &'a Matrix) -> Result<Self, WganError> {
        state.config.validate()?;
        if data.cols() != state.data_width {
            return Err(WganError::WidthMismatch {
                expected: state.data_width,
                found: data.cols(),
            });
        }
        if data.rows() as u64 != state.data_rows {
            return Err(WganError::ResumeMismatch(format!(
                "checkpoint was trained on {} rows, data has {}",
                state.data_rows,
                data.rows()
            )));
        }
        if data.rows() < state.config.batch_size {
            return Err(WganError::InsufficientData {
                rows: data.rows(),
                batch: state.config.batch_size,
            });
        }
        if data.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(WganError::NonFiniteData);
        }
        let rng = state.rng.restore();
        Ok(Self {
            state,
            data,
            rng,
            shuffle: Vec::new(),
            shuffle_epoch: None,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.state.iteration
    }

    pub fn critic(&self) -> &DenseNet {
        &self.state.critic
    }

    pub fn generator(&self) -> &DenseNet {
        &self.state.generator
    }

    pub fn checkpoint(&self) -> ModelCheckpoint {
        let mut cp = self.state.clone();
        cp.rng = RngState::capture(&self.rng);
        cp
    }

    pub fn into_checkpoint(self) -> ModelCheckpoint {
        let mut cp = self.state;
        cp.rng = RngState::capture(&self.rng);
        cp
    }

    fn next_real_batch(&mut self) -> Matrix {
        let b = self.state.config.batch_size;
        let n = self.data.rows();
        let batches_per_epoch = (n / b) as u64;
        if self.state.cursor.position >= batches_per_epoch {
            self.state.cursor.epoch += 1;
            self.state.cursor.position = 0;
        }
        let epoch = self.state.cursor.epoch;
        if self.shuffle_epoch != Some(epoch) {
            // stream 0 is the main stream; epoch e shuffles with stream e + 1
            let mut srng = ChaCha8Rng::seed_from_u64(self.state.config.seed);
            srng.set_stream(epoch + 1);
            self.shuffle = (0..n).collect();
            self.shuffle.shuffle(&mut srng);
            self.shuffle_epoch = Some(epoch);
        }
        let start = self.state.cursor.position as usize * b;
        let mut batch = Matrix::zeros(b, self.data.cols());
        for (i, &src) in self.shuffle[start..start + b].iter().enumerate() {
            batch.row_mut(i).copy_from_slice(self.data.row(src));
        }
        self.state.cursor.position += 1;
        batch
    }

    fn non_finite(&self, e: NnError) -> WganError {
        match e {
            NnError::NonFiniteGradient | NnError::NonFiniteValue(_) => WganError::NonFiniteGradient {
                iteration: self.state.iteration,
            },
            other => WganError::Network(other),
        }
    }

    fn critic_step(&mut self) -> Result<f64, WganError> {
        let cfg = &self.state.config;
        let (b, latent, clip) = (cfg.batch_size, cfg.latent_dim, cfg.clip_c);
        let real = self.next_real_batch();
        let z = sample_latent(&mut self.rng, b, latent);
        let (fake, _) = self.state.generator.forward(&z)?;

        let critic = &self.state.critic;
        let (score_real, cache_real) = critic.forward(&real)?;
        let (score_fake, cache_fake) = critic.forward(&fake)?;
        let estimate = wasserstein_estimate(score_real.as_slice(), score_fake.as_slice())?;
        if !estimate.is_finite() {
            return Err(WganError::NonFiniteGradient {
                iteration: self.state.iteration,
            });
        }

        // critic loss = mean D(fake) - mean D(real)
        let inv = 1.0 / b as f64;
        let (mut grads, _) = critic.backward(&cache_real, &constant(b, -inv))?;
        let (grads_fake, _) = critic.backward(&cache_fake, &constant(b, inv))?;
        grads.add_assign(&grads_fake);

        let ModelCheckpoint { critic, critic_opt, .. } = &mut self.state;
        if let Err(e) = critic_opt.step(critic, &grads) {
            return Err(self.non_finite(e));
        }
        clip_weights(&mut self.state.critic, clip);
        Ok(estimate)
    }

    fn generator_step(&mut self) -> Result<(), WganError> {
        let b = self.state.config.batch_size;
        let z = sample_latent(&mut self.rng, b, self.state.config.latent_dim);
        let (fake, gen_cache) = self.state.generator.forward(&z)?;
        let (_, critic_cache) = self.state.critic.forward(&fake)?;
        // generator loss = -mean D(G(z))
        let (_, d_fake) = self
            .state
            .critic
            .backward(&critic_cache, &constant(b, -1.0 / b as f64))?;
        let (grads, _) = self.state.generator.backward(&gen_cache, &d_fake)?;

        let ModelCheckpoint {
            generator,
            generator_opt,
            ..
        } = &mut self.state;
        if let Err(e) = generator_opt.step(generator, &grads) {
            return Err(self.non_finite(e));
        }
        Ok(())
    }

    /// One generator iteration; `on_critic_step` sees the critic after each
    /// update-and-clip. Returns the last critic step's Wasserstein estimate.
    pub fn step_observed(&mut self, mut on_critic_step: impl FnMut(&DenseNet)) -> Result<LossEntry, WganError> {
        let mut estimate = 0.0;
        for _ in 0..self.state.config.n_critic {
            estimate = self.critic_step()?;
            on_critic_step(&self.state.critic);
        }
        self.generator_step()?;
        let entry = LossEntry {
            iteration: self.state.iteration,
            wasserstein_estimate: estimate,
        };
        self.state.iteration += 1;
        Ok(entry)
    }

    pub fn step(&mut self) -> Result<LossEntry, WganError> {
        self.step_observed(|_| {})
    }

    /// Run until `config.iterations` generator iterations have completed.
    pub fn run_to_end(&mut self) -> Result<Vec<LossEntry>, WganError> {
        let remaining = self.state.config.iterations.saturating_sub(self.state.iteration);
        self.run(remaining)
    }

    pub fn run(&mut self, iterations: u64) -> Result<Vec<LossEntry>, WganError> {
        (0..iterations).map(|_| self.step()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub loss_log: Vec<LossEntry>,
}

/// Train from scratch for `config.iterations` generator iterations.
pub fn train(data: &Matrix, config: &GanConfig, codec_hash: &str) -> Result<TrainOutcome, WganError> {
    let mut trainer = Trainer::new(data, config, codec_hash)?;
    let loss_log = trainer.run_to_end()?;
    Ok(TrainOutcome {
        checkpoint: trainer.into_checkpoint(),
        loss_log,
    })
}

/// Encode a feature matrix into the GAN's row-major training matrix.
pub fn encode_training_matrix(codec: &Codec, matrix: &FeatureMatrix) -> Result<Matrix, WganError> {
    let data = codec.encode_matrix(matrix)?;
    Ok(Matrix::from_vec(matrix.len(), codec.encoded_width(), data)?)
}

/// Draw `n` synthetic rows: standard-normal latents through the generator,
/// decoded by `codec`.
pub fn sample(checkpoint: &ModelCheckpoint, codec: &Codec, n: usize, seed: u64) -> Result<FeatureMatrix, WganError> {
    let hash = codec.hash();
    if hash != checkpoint.codec_hash {
        return Err(WganError::CodecMismatch {
            expected: checkpoint.codec_hash.clone(),
            found: hash,
        });
    }
    if codec.encoded_width() != checkpoint.generator.output_dim() {
        return Err(WganError::WidthMismatch {
            expected: checkpoint.generator.output_dim(),
            found: codec.encoded_width(),
        });
    }
    if n == 0 {
        return Err(WganError::NoSamples);
    }
    const CHUNK: usize = 1024;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let latent = checkpoint.generator.input_dim();
    while rows.len() < n {
        let take = CHUNK.min(n - rows.len());
        let z = sample_latent(&mut rng, take, latent);
        let (out, _) = checkpoint.generator.forward(&z)?;
        for i in 0..take {
            rows.push(codec.decode(out.row(i))?);
        }
    }
    Ok(FeatureMatrix::new(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data(rows: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * 2)
            .map(|_| if rng.random_bool(0.5) { 0.5 } else { -0.5 })
            .collect();
        Matrix::from_vec(rows, 2, data).unwrap()
    }

    fn small_config() -> GanConfig {
        GanConfig {
            latent_dim: 4,
            generator_hidden: vec![16],
            critic_hidden: vec![16],
            batch_size: 16,
            iterations: 10,
            seed: 5,
            ..GanConfig::default()
        }
    }

    #[test]
    fn estimate_formula() {
        assert_eq!(wasserstein_estimate(&[3.0, 3.0], &[3.0]).unwrap(), 0.0);
        assert_eq!(wasserstein_estimate(&[1.0, 3.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(wasserstein_estimate(&[], &[1.0]), Err(WganError::EmptyBatch)));
    }

    #[test]
    fn config_validation() {
        let bad = GanConfig {
            clip_c: 0.0,
            ..GanConfig::default()
        };
        assert!(matches!(bad.validate(), Err(WganError::Config(_))));
        let bad = GanConfig {
            n_critic: 0,
            ..GanConfig::default()
        };
        assert!(bad.validate().is_err());
        GanConfig::default().validate().unwrap();
        assert_eq!(GanConfig::default().generator_widths(52), vec![32, 128, 128, 52]);
        assert_eq!(GanConfig::default().critic_widths(52), vec![52, 128, 128, 1]);
    }

    #[test]
    fn config_json_defaults_fill_in() {
        let cfg: GanConfig = serde_json::from_str(r#"{"iterations": 7, "seed": 3}"#).unwrap();
        assert_eq!(cfg.iterations, 7);
        assert_eq!(cfg.latent_dim, 32);
        assert!(serde_json::from_str::<GanConfig>(r#"{"latnet_dim": 7}"#).is_err());
    }

    #[test]
    fn zero_iterations_is_initialization() {
        let data = toy_data(64, 1);
        let cfg = GanConfig {
            iterations: 0,
            ..small_config()
        };
        let out = train(&data, &cfg, "h").unwrap();
        let init = ModelCheckpoint::initialize(&cfg, "h", 2, 64).unwrap();
        assert_eq!(out.checkpoint, init);
        assert!(out.loss_log.is_empty());
    }

    #[test]
    fn insufficient_data() {
        let data = toy_data(8, 1);
        assert!(matches!(
            train(&data, &small_config(), "h"),
            Err(WganError::InsufficientData { rows: 8, batch: 16 })
        ));
    }

    #[test]
    fn clip_holds_after_every_critic_step() {
        let data = toy_data(100, 2);
        let cfg = small_config();
        let mut t = Trainer::new(&data, &cfg, "h").unwrap();
        let mut checked = 0;
        for _ in 0..cfg.iterations {
            t.step_observed(|critic| {
                assert!(critic.max_abs_param() <= cfg.clip_c);
                checked += 1;
            })
            .unwrap();
        }
        assert_eq!(checked, cfg.iterations as usize * cfg.n_critic);
    }

    #[test]
    fn deterministic_runs() {
        let data = toy_data(100, 3);
        let a = train(&data, &small_config(), "h").unwrap();
        let b = train(&data, &small_config(), "h").unwrap();
        assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
        assert_eq!(a.loss_log, b.loss_log);
        assert_eq!(a.loss_log.len(), 10);
        assert!(a.loss_log.iter().all(|e| e.wasserstein_estimate.is_finite()));
    }

    #[test]
    fn epochs_cover_every_row_once() {
        let data = Matrix::from_vec(40, 1, (0..40).map(f64::from).collect()).unwrap();
        let cfg = GanConfig {
            batch_size: 10,
            ..small_config()
        };
        let state = ModelCheckpoint::initialize(&cfg, "h", 1, 40).unwrap();
        let mut t = Trainer::resume(state, &data).unwrap();
        let mut seen: Vec<f64> = (0..4).flat_map(|_| t.next_real_batch().into_vec()).collect();
        seen.sort_by(f64::total_cmp);
        assert_eq!(seen, (0..40).map(f64::from).collect::<Vec<_>>());
        assert_eq!(t.state.cursor, DataCursor { epoch: 0, position: 4 });
        t.next_real_batch();
        assert_eq!(t.state.cursor, DataCursor { epoch: 1, position: 1 });
    }

    #[test]
    fn loss_csv_format() {
        let csv = loss_log_csv(&[
            LossEntry {
                iteration: 0,
                wasserstein_estimate: 0.25,
            },
            LossEntry {
                iteration: 1,
                wasserstein_estimate: -1.5,
            },
        ]);
        assert_eq!(csv, "iteration,wasserstein_estimate\n0,0.25\n1,-1.5\n");
    }
}
