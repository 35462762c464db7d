//! Alternating GAN optimization: RMSprop with a stepped learning rate,
//! seed-deterministic batch sampling, per-term divergence aborts,
//! per-epoch checkpoints, and a bitwise-reproducible training log.

pub mod ablation;
pub mod rmsprop;

pub use ablation::{ablation_run, AblationArm, AblationReport};
pub use rmsprop::RmsProp;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::config::FlatConfig;
use crate::error::{Error, Result};
use crate::imaging::{make_pair, Image};
use crate::losses::{
    adversarial_d_loss, adversarial_g_loss, perceptual_loss, pixel_mse, robust_loss_mean,
    total_generator_loss, tv_loss, FeatureExtractor, LossParts, LossWeights, RobustLossParams,
};
use crate::networks::{save_checkpoint, Checkpoint, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::rng;
use crate::tensor::tape::Tape;
use crate::tensor::{Shape, Tensor};

/// Which pixel-space content term the generator objective uses. The
/// adaptive robust penalty is the default; plain MSE is the ablation
/// arm it replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentLoss {
    Robust,
    Mse,
}

impl std::fmt::Display for ContentLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ContentLoss::Robust => "robust",
            ContentLoss::Mse => "mse",
        })
    }
}

impl std::str::FromStr for ContentLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "robust" => Ok(ContentLoss::Robust),
            "mse" => Ok(ContentLoss::Mse),
            other => Err(Error::Config(format!("unknown content_loss `{other}` (expected robust or mse)"))),
        }
    }
}

/// Everything a training run needs, resolvable from a flat config
/// file. Defaults are desk-scale; the large-scale recipe (batch 64 on
/// a natural-image corpus) stays reachable by overriding keys.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: GeneratorConfig,
    pub disc: DiscriminatorConfig,
    pub batch_size: usize,
    /// High-resolution crop side length fed to the discriminator.
    pub crop_size: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_after: f64,
    /// First epoch that uses `lr_after`; 0 means from the start.
    pub switch_epoch: usize,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    pub seed: u64,
    pub weights: LossWeights,
    pub content_loss: ContentLoss,
    pub robust_alpha_init: f64,
    pub robust_c_init: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: GeneratorConfig::default(),
            disc: DiscriminatorConfig::default(),
            batch_size: 8,
            crop_size: 128,
            epochs: 20,
            lr_initial: 5e-4,
            lr_after: 1e-4,
            switch_epoch: 20,
            rmsprop_decay: 0.9,
            rmsprop_eps: 1e-8,
            seed: 0,
            weights: LossWeights::default(),
            content_loss: ContentLoss::Robust,
            robust_alpha_init: 1.0,
            robust_c_init: 0.25,
        }
    }
}

impl TrainConfig {
    /// Overlays config-file keys onto `self`. Callers pass the parsed
    /// file and afterwards invoke `finish()` so unknown keys fail.
    pub fn apply_flat(&mut self, flat: &mut FlatConfig) -> Result<()> {
        flat.take_into("scale", &mut self.model.scale)?;
        flat.take_into("n_sc_blocks", &mut self.model.n_sc_blocks)?;
        flat.take_into("base_channels", &mut self.model.base_channels)?;
        flat.take_into("r_pool", &mut self.model.r_pool)?;
        if let Some(spec) = flat.take_str("d_channels") {
            self.disc.channels = spec
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Config(format!("d_channels entry `{tok}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
        }
        flat.take_into("leaky_slope", &mut self.disc.leaky_slope)?;
        flat.take_into("batch_size", &mut self.batch_size)?;
        flat.take_into("crop_size", &mut self.crop_size)?;
        flat.take_into("epochs", &mut self.epochs)?;
        flat.take_into("lr_initial", &mut self.lr_initial)?;
        flat.take_into("lr_after", &mut self.lr_after)?;
        flat.take_into("switch_epoch", &mut self.switch_epoch)?;
        flat.take_into("rmsprop_decay", &mut self.rmsprop_decay)?;
        flat.take_into("rmsprop_eps", &mut self.rmsprop_eps)?;
        flat.take_into("seed", &mut self.seed)?;
        flat.take_into("w_adversarial", &mut self.weights.adversarial)?;
        flat.take_into("w_robust", &mut self.weights.robust)?;
        flat.take_into("w_perceptual", &mut self.weights.perceptual)?;
        flat.take_into("w_tv", &mut self.weights.tv)?;
        flat.take_into("content_loss", &mut self.content_loss)?;
        flat.take_into("robust_alpha_init", &mut self.robust_alpha_init)?;
        flat.take_into("robust_c_init", &mut self.robust_c_init)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.disc.validate()?;
        self.weights.validate()?;
        let bad = |detail: String| Err(Error::Config(detail));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        for (name, lr) in [("lr_initial", self.lr_initial), ("lr_after", self.lr_after)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be finite and > 0, got {lr}"));
            }
        }
        if !(0.0 < self.rmsprop_decay && self.rmsprop_decay < 1.0) {
            return bad(format!("rmsprop_decay must be in (0,1), got {}", self.rmsprop_decay));
        }
        if !(self.rmsprop_eps >= 0.0 && self.rmsprop_eps.is_finite()) {
            return bad(format!("rmsprop_eps must be finite and >= 0, got {}", self.rmsprop_eps));
        }
        if self.crop_size % self.model.scale != 0 {
            return bad(format!(
                "crop_size {} must be a multiple of scale {}",
                self.crop_size, self.model.scale
            ));
        }
        let lr_side = self.crop_size / self.model.scale;
        if lr_side % self.model.input_multiple() != 0 || lr_side == 0 {
            return bad(format!(
                "crop_size {} gives low-res side {lr_side}, not a positive multiple of {}",
                self.crop_size,
                self.model.input_multiple()
            ));
        }
        if self.crop_size % 4 != 0 {
            return bad(format!(
                "crop_size {} must be a multiple of 4: the feature extractor downsamples twice",
                self.crop_size
            ));
        }
        if self.crop_size < self.disc.min_input() {
            return bad(format!(
                "crop_size {} below the discriminator minimum {}",
                self.crop_size,
                self.disc.min_input()
            ));
        }
        Ok(())
    }

    /// Flat key=value rendering of every resolved option, parseable
    /// back by the config reader.
    pub fn echo(&self) -> String {
        let d_channels: Vec<String> = self.disc.channels.iter().map(|c| c.to_string()).collect();
        let mut out = String::new();
        let _ = writeln!(out, "scale = {}", self.model.scale);
        let _ = writeln!(out, "n_sc_blocks = {}", self.model.n_sc_blocks);
        let _ = writeln!(out, "base_channels = {}", self.model.base_channels);
        let _ = writeln!(out, "r_pool = {}", self.model.r_pool);
        let _ = writeln!(out, "d_channels = {}", d_channels.join(","));
        let _ = writeln!(out, "leaky_slope = {}", self.disc.leaky_slope);
        let _ = writeln!(out, "batch_size = {}", self.batch_size);
        let _ = writeln!(out, "crop_size = {}", self.crop_size);
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "lr_initial = {}", self.lr_initial);
        let _ = writeln!(out, "lr_after = {}", self.lr_after);
        let _ = writeln!(out, "switch_epoch = {}", self.switch_epoch);
        let _ = writeln!(out, "rmsprop_decay = {}", self.rmsprop_decay);
        let _ = writeln!(out, "rmsprop_eps = {}", self.rmsprop_eps);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "w_adversarial = {}", self.weights.adversarial);
        let _ = writeln!(out, "w_robust = {}", self.weights.robust);
        let _ = writeln!(out, "w_perceptual = {}", self.weights.perceptual);
        let _ = writeln!(out, "w_tv = {}", self.weights.tv);
        let _ = writeln!(out, "content_loss = {}", self.content_loss);
        let _ = writeln!(out, "robust_alpha_init = {}", self.robust_alpha_init);
        let _ = writeln!(out, "robust_c_init = {}", self.robust_c_init);
        out
    }

    /// Text printed at the start of every run: the full resolved
    /// config plus a note where the desk defaults deviate from the
    /// large-scale recipe.
    pub fn run_header(&self) -> String {
        format!(
            "resolved configuration:\n{}\
             note: desk-scale defaults (batch_size 8, synthetic corpora) differ from the\n\
             large-scale recipe (batch_size 64 on a large natural-image corpus); override\n\
             batch_size and supply a real corpus to approximate that setup.\n",
            self.echo()
        )
    }
}

/// lr_initial before `switch_epoch`, lr_after from it onward.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    if epoch < cfg.switch_epoch {
        cfg.lr_initial
    } else {
        cfg.lr_after
    }
}

/// One training iteration's logged values.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iter: u64,
    pub epoch: usize,
    pub lr: f64,
    pub d_loss: f64,
    pub g_total: f64,
    pub g_adversarial: f64,
    pub g_content: f64,
    pub g_perceptual: f64,
    pub g_tv: f64,
    /// Wall time of the iteration. Reported in the run manifest, not
    /// the CSV, so identical runs produce identical files.
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    /// Deterministic CSV: float columns use the shortest round-trip
    /// form, and wall time is excluded by design.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,epoch,lr,d_loss,g_total,g_adv,g_content,g_perc,g_tv\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.iter, r.epoch, r.lr, r.d_loss, r.g_total, r.g_adversarial, r.g_content, r.g_perceptual, r.g_tv
            );
        }
        out
    }

    pub fn total_wall_ms(&self) -> u128 {
        self.rows.iter().map(|r| r.wall_ms).sum()
    }

    /// Iterations strictly increasing, every value finite.
    pub fn validate(&self) -> Result<()> {
        let mut last: Option<u64> = None;
        for r in &self.rows {
            if let Some(prev) = last {
                if r.iter <= prev {
                    return Err(Error::InvalidArgument {
                        op: "train_log",
                        detail: format!("iteration {} follows {prev}", r.iter),
                    });
                }
            }
            last = Some(r.iter);
            for (name, v) in [
                ("lr", r.lr),
                ("d_loss", r.d_loss),
                ("g_total", r.g_total),
                ("g_adv", r.g_adversarial),
                ("g_content", r.g_content),
                ("g_perc", r.g_perceptual),
                ("g_tv", r.g_tv),
            ] {
                if !v.is_finite() {
                    return Err(Error::Diverged { term: name.to_string(), iteration: r.iter });
                }
            }
        }
        Ok(())
    }
}

/// Trained models plus the log and any checkpoints written.
#[derive(Debug)]
pub struct TrainOutcome {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub robust: RobustLossParams,
    pub log: TrainLog,
    pub checkpoints: Vec<PathBuf>,
}

/// The generator exactly as `train` initializes it, for untrained
/// baselines.
pub fn init_generator(cfg: &TrainConfig) -> Result<Generator> {
    Generator::init(&cfg.model, rng::derive(cfg.seed, "generator"))
}

fn init_discriminator(cfg: &TrainConfig) -> Result<Discriminator> {
    Discriminator::init(&cfg.disc, rng::derive(cfg.seed, "discriminator"))
}

/// N x 3 x H x W batch from same-sized images.
fn stack_images(imgs: &[Image]) -> Result<Tensor> {
    let (w, h) = (imgs[0].width(), imgs[0].height());
    for img in imgs {
        if img.width() != w || img.height() != h {
            return Err(Error::Image(format!(
                "batch mixes {w}x{h} and {}x{} images",
                img.width(),
                img.height()
            )));
        }
    }
    Ok(Tensor::from_fn(Shape::new(imgs.len(), 3, h, w), |n, c, i, j| imgs[n].pixel(j, i)[c]))
}

fn sample_batch(cfg: &TrainConfig, images: &[Image], rng: &mut ChaCha12Rng) -> Result<(Tensor, Tensor)> {
    let mut lrs = Vec::with_capacity(cfg.batch_size);
    let mut hrs = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let ix = rng.random_range(0..images.len());
        let pair = make_pair(&images[ix], cfg.crop_size, cfg.model.scale, rng)?;
        lrs.push(pair.lr);
        hrs.push(pair.hr);
    }
    Ok((stack_images(&lrs)?, stack_images(&hrs)?))
}

/// Maps a non-finite-value error inside one loss term to the training
/// abort that names the term.
fn guard<T>(term: &str, iteration: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite { .. } => Error::Diverged { term: term.to_string(), iteration },
        other => other,
    })
}

/// Runs alternating optimization over HR source images: per batch one
/// discriminator update on real crops vs detached generator outputs,
/// then one generator update on the four-term objective. Writes one
/// generator checkpoint per epoch when `out_dir` is given.
pub fn train(cfg: &TrainConfig, images: &[Image], out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument { op: "train", detail: "corpus is empty".into() });
    }
    for (ix, img) in images.iter().enumerate() {
        if img.width() < cfg.crop_size || img.height() < cfg.crop_size {
            return Err(Error::InvalidArgument {
                op: "train",
                detail: format!(
                    "corpus image {ix} is {}x{}, smaller than crop_size {}",
                    img.width(),
                    img.height(),
                    cfg.crop_size
                ),
            });
        }
    }
    let mut g = init_generator(cfg)?;
    let mut d = init_discriminator(cfg)?;
    let mut robust = RobustLossParams::init(cfg.robust_alpha_init, cfg.robust_c_init)?;
    let fe = FeatureExtractor::seeded(rng::derive(cfg.seed, "extractor"));
    let mut opt_g = RmsProp::new(cfg.rmsprop_decay, cfg.rmsprop_eps)?;
    let mut opt_d = RmsProp::new(cfg.rmsprop_decay, cfg.rmsprop_eps)?;
    let mut data_rng = rng::seeded(rng::derive(cfg.seed, "data"));
    let iters_per_epoch = (images.len() / cfg.batch_size).max(1);

    let mut rows = Vec::with_capacity(cfg.epochs * iters_per_epoch);
    let mut checkpoints = Vec::new();
    let mut iter: u64 = 0;
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        for _ in 0..iters_per_epoch {
            let t0 = Instant::now();
            let (lr_batch, hr_batch) = sample_batch(cfg, images, &mut data_rng)?;

            // Discriminator update. The fake batch enters as a plain
            // leaf, so no gradient can reach the generator here.
            let fake = guard("generator forward", iter, g.forward_value(&lr_batch))?;
            let d_loss = {
                let tape = Tape::new();
                let real_scores = guard("d_loss", iter, d.forward(&tape, tape.leaf(hr_batch.clone())))?;
                let fake_scores = guard("d_loss", iter, d.forward(&tape, tape.leaf(fake)))?;
                let loss = guard("d_loss", iter, adversarial_d_loss(&tape, real_scores, fake_scores))?;
                let value = tape.value(loss).value()?;
                if !value.is_finite() {
                    return Err(Error::Diverged { term: "d_loss".into(), iteration: iter });
                }
                let grads = tape.backward(loss)?;
                debug_assert!(grads.names().all(|n| n.starts_with("discriminator.")));
                opt_d.step(&mut d, &grads, lr)?;
                value
            };

            // Generator update on the weighted four-term objective.
            let tape = Tape::new();
            let x = tape.leaf(lr_batch);
            let sr = guard("generator forward", iter, g.forward(&tape, x))?;
            let hr_v = tape.leaf(hr_batch);
            let scores = guard("adversarial", iter, d.forward(&tape, sr))?;
            let adversarial = guard("adversarial", iter, adversarial_g_loss(&tape, scores))?;
            let content = match cfg.content_loss {
                ContentLoss::Robust => guard("content", iter, robust_loss_mean(&tape, sr, hr_v, &robust))?,
                ContentLoss::Mse => guard("content", iter, pixel_mse(&tape, sr, hr_v))?,
            };
            let perceptual = guard("perceptual", iter, perceptual_loss(&tape, sr, hr_v, &fe))?;
            let tv = guard("tv", iter, tv_loss(&tape, sr))?;
            let parts = LossParts { adversarial, robust: content, perceptual, tv };
            let (total, breakdown) = total_generator_loss(&tape, &parts, &cfg.weights)?;
            for (term, v) in [
                ("adversarial", breakdown.adversarial),
                ("content", breakdown.robust),
                ("perceptual", breakdown.perceptual),
                ("tv", breakdown.tv),
                ("g_total", breakdown.total),
            ] {
                if !v.is_finite() {
                    return Err(Error::Diverged { term: term.to_string(), iteration: iter });
                }
            }
            let grads = tape.backward(total)?;
            opt_g.step(&mut g, &grads, lr)?;
            if cfg.content_loss == ContentLoss::Robust {
                opt_g.step(&mut robust, &grads, lr)?;
            }

            rows.push(LogRow {
                iter,
                epoch,
                lr,
                d_loss,
                g_total: breakdown.total,
                g_adversarial: breakdown.adversarial,
                g_content: breakdown.robust,
                g_perceptual: breakdown.perceptual,
                g_tv: breakdown.tv,
                wall_ms: t0.elapsed().as_millis(),
            });
            iter += 1;
        }
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("gen_epoch_{epoch:03}.ckpt"));
            save_checkpoint(&path, &Checkpoint::from_bundle(cfg.model.echo(), [cfg.seed, iter], &g))?;
            checkpoints.push(path);
        }
    }
    let log = TrainLog { rows };
    log.validate()?;
    Ok(TrainOutcome { generator: g, discriminator: d, robust, log, checkpoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::synthetic_corpus_images;
    use crate::networks::load_checkpoint;
    use crate::tensor::tape::ParamBundle;

    fn tiny_config(seed: u64) -> TrainConfig {
        TrainConfig {
            model: GeneratorConfig { scale: 2, n_sc_blocks: 1, base_channels: 8, r_pool: 2 },
            disc: DiscriminatorConfig { channels: vec![4, 8], leaky_slope: 0.2 },
            batch_size: 2,
            crop_size: 16,
            epochs: 1,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lr_schedule_matches_the_recipe() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), 5e-4);
        assert_eq!(lr_schedule(19, &cfg), 5e-4);
        assert_eq!(lr_schedule(20, &cfg), 1e-4);
        assert_eq!(lr_schedule(100, &cfg), 1e-4);
        let always_after = TrainConfig { switch_epoch: 0, ..TrainConfig::default() };
        assert_eq!(lr_schedule(0, &always_after), 1e-4);
    }

    #[test]
    fn one_iteration_smoke() {
        let cfg = tiny_config(11);
        let images = synthetic_corpus_images(2, 24, 100);
        let out = train(&cfg, &images, None).unwrap();
        assert_eq!(out.log.rows.len(), 1);
        let r = &out.log.rows[0];
        assert_eq!(r.iter, 0);
        assert_eq!(r.epoch, 0);
        assert_eq!(r.lr, 5e-4);
        out.log.validate().unwrap();
    }

    #[test]
    fn same_seed_gives_bitwise_identical_logs() {
        let cfg = TrainConfig { epochs: 2, ..tiny_config(42) };
        let images = synthetic_corpus_images(4, 24, 7);
        let a = train(&cfg, &images, None).unwrap();
        let b = train(&cfg, &images, None).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        // And the trained weights agree bitwise too.
        for (p, q) in a.generator.params().iter().zip(b.generator.params().iter()) {
            assert_eq!(p.value.data(), q.value.data(), "{}", p.name);
        }
        let different = train(&TrainConfig { seed: 43, ..cfg }, &images, None).unwrap();
        assert_ne!(a.log.to_csv(), different.log.to_csv());
    }

    #[test]
    fn d_step_gradients_never_reach_the_generator() {
        let cfg = tiny_config(5);
        let images = synthetic_corpus_images(2, 24, 8);
        let g = init_generator(&cfg).unwrap();
        let d = init_discriminator(&cfg).unwrap();
        let mut data_rng = rng::seeded(rng::derive(cfg.seed, "data"));
        let (lr_batch, hr_batch) = sample_batch(&cfg, &images, &mut data_rng).unwrap();
        let fake = g.forward_value(&lr_batch).unwrap();
        let tape = Tape::new();
        let real_scores = d.forward(&tape, tape.leaf(hr_batch)).unwrap();
        let fake_scores = d.forward(&tape, tape.leaf(fake)).unwrap();
        let loss = adversarial_d_loss(&tape, real_scores, fake_scores).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(!grads.is_empty());
        for name in grads.names() {
            assert!(name.starts_with("discriminator."), "gradient leaked to `{name}`");
        }
    }

    #[test]
    fn both_networks_update_during_training() {
        let cfg = tiny_config(6);
        let images = synthetic_corpus_images(2, 24, 9);
        let out = train(&cfg, &images, None).unwrap();
        let g0 = init_generator(&cfg).unwrap();
        let d0 = init_discriminator(&cfg).unwrap();
        let moved = |a: &dyn ParamBundle, b: &dyn ParamBundle| {
            a.params().iter().zip(b.params()).any(|(p, q)| p.value.data() != q.value.data())
        };
        assert!(moved(&out.generator, &g0), "generator never updated");
        assert!(moved(&out.discriminator, &d0), "discriminator never updated");
        // The robust shape parameters are learnable and must move too.
        let r0 = RobustLossParams::init(cfg.robust_alpha_init, cfg.robust_c_init).unwrap();
        assert!(moved(&out.robust, &r0), "robust loss parameters never updated");
    }

    #[test]
    fn nan_input_aborts_within_one_iteration() {
        let cfg = tiny_config(7);
        // Poison every pixel so the random crop cannot miss it.
        let poisoned = Image::from_fn(24, 24, |_, _| [f64::NAN, 0.5, 0.5]);
        let err = train(&cfg, &[poisoned.clone(), poisoned], None).unwrap_err();
        match err {
            Error::Diverged { iteration, .. } => assert_eq!(iteration, 0),
            other => panic!("expected divergence abort, got {other}"),
        }
    }

    #[test]
    fn checkpoints_land_per_epoch_and_reload() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = TrainConfig { epochs: 2, ..tiny_config(12) };
        let images = synthetic_corpus_images(2, 24, 13);
        let out = train(&cfg, &images, Some(tmp.path())).unwrap();
        assert_eq!(out.checkpoints.len(), 2);
        let last = load_checkpoint(&out.checkpoints[1]).unwrap();
        let mut fresh = init_generator(&cfg).unwrap();
        last.load_into(&cfg.model.echo(), &mut fresh).unwrap();
        for (p, q) in fresh.params().iter().zip(out.generator.params().iter()) {
            assert_eq!(p.value.data(), q.value.data(), "{}", p.name);
        }
    }

    #[test]
    fn csv_schema_and_wall_time_exclusion() {
        let log = TrainLog {
            rows: vec![LogRow {
                iter: 0,
                epoch: 0,
                lr: 5e-4,
                d_loss: 1.5,
                g_total: 0.25,
                g_adversarial: -0.7,
                g_content: 0.2,
                g_perceptual: 0.04,
                g_tv: 0.01,
                wall_ms: 123,
            }],
        };
        let csv = log.to_csv();
        assert!(csv.starts_with("iter,epoch,lr,d_loss,g_total,g_adv,g_content,g_perc,g_tv\n"));
        assert!(!csv.contains("123"), "wall time leaked into the CSV");
        assert_eq!(log.total_wall_ms(), 123);
    }

    #[test]
    fn log_validation_catches_bad_rows() {
        let good = LogRow {
            iter: 0,
            epoch: 0,
            lr: 1e-4,
            d_loss: 1.0,
            g_total: 1.0,
            g_adversarial: 0.0,
            g_content: 1.0,
            g_perceptual: 0.0,
            g_tv: 0.0,
            wall_ms: 1,
        };
        let mut bad_order = TrainLog { rows: vec![good.clone(), good.clone()] };
        assert!(bad_order.validate().is_err());
        bad_order.rows[1].iter = 1;
        bad_order.validate().unwrap();
        bad_order.rows[1].g_total = f64::NAN;
        assert!(matches!(bad_order.validate(), Err(Error::Diverged { .. })));
    }

    #[test]
    fn config_resolution_and_validation() {
        let mut flat = FlatConfig::parse(
            "scale = 2\nn_sc_blocks = 1\nbase_channels = 8\nr_pool = 2\n\
             d_channels = 4,8\nbatch_size = 2\ncrop_size = 16\nepochs = 3\n\
             content_loss = mse\nseed = 9\n",
        )
        .unwrap();
        let mut cfg = TrainConfig::default();
        cfg.apply_flat(&mut flat).unwrap();
        flat.finish().unwrap();
        assert_eq!(cfg.model.scale, 2);
        assert_eq!(cfg.disc.channels, vec![4, 8]);
        assert_eq!(cfg.content_loss, ContentLoss::Mse);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.seed, 9);
        cfg.validate().unwrap();

        // Round trip: the echo parses back to the same config.
        let mut echoed = FlatConfig::parse(&cfg.echo()).unwrap();
        let mut back = TrainConfig::default();
        back.apply_flat(&mut echoed).unwrap();
        echoed.finish().unwrap();
        assert_eq!(back, cfg);

        // Cross-field failures: low-res side 9 breaks r_pool
        // divisibility, and crop 10 gives side 5 with the same issue.
        let bad = TrainConfig { crop_size: 18, ..tiny_config(0) };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { crop_size: 10, ..tiny_config(0) };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { lr_initial: 0.0, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn run_header_mentions_the_scale_gap() {
        let header = tiny_config(0).run_header();
        assert!(header.contains("batch_size 64"));
        assert!(header.contains("scale = 2"));
    }
}
