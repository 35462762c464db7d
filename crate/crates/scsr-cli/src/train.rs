//! `train`: resolve the configuration (defaults, then config file, then
//! flags), load the corpus, and run the alternating GAN loop.

use std::path::PathBuf;

use clap::Args;
use scsr::config::FlatConfig;
use scsr::imaging::load_image;
use scsr::training::{train, TrainConfig};
use scsr::{Error, Result};

use crate::manifest::{with_manifest, RunManifest};
use crate::util::{list_images, parse_scale};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of high-resolution training images.
    #[arg(long)]
    pub data: PathBuf,
    /// Upscaling factor (2, 4, or 8); overrides the config file.
    #[arg(long, value_parser = parse_scale)]
    pub scale: Option<usize>,
    /// Epoch count; overrides the config file.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Flat key=value config file; unknown keys are errors.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for checkpoints, the log, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for everything random in the run; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Defaults, overlaid by the config file, overlaid by flags.
pub fn resolve_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut flat = FlatConfig::parse(&text)?;
        cfg.apply_flat(&mut flat)?;
        flat.finish()?;
    }
    if let Some(scale) = args.scale {
        cfg.model.scale = scale;
    }
    if let Some(epochs) = args.epochs {
        cfg.epochs = epochs;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let mut m = RunManifest::new("train");
    m.set_path("data", &args.data);
    m.set_path("out", &args.out);
    if let Some(c) = &args.config {
        m.set_path("config_file", c);
    }

    with_manifest(&args.out, m, |m| {
        let cfg = resolve_config(args)?;
        m.set_block("config", &cfg.echo());
        m.set("seed", cfg.seed);
        print!("{}", cfg.run_header());

        let files = list_images(&args.data)?;
        if files.is_empty() {
            return Err(Error::Image(format!("no png/ppm images in {}", args.data.display())));
        }
        let images = files.iter().map(|p| load_image(p)).collect::<Result<Vec<_>>>()?;
        m.set("corpus_images", images.len());

        let outcome = train(&cfg, &images, Some(&args.out))?;
        let log_path = args.out.join("train_log.csv");
        std::fs::write(&log_path, outcome.log.to_csv())?;
        m.set("iterations", outcome.log.rows.len());
        m.set("checkpoints", outcome.checkpoints.len());
        m.set_path("train_log", &log_path);
        let last = outcome.log.rows.last().expect("validated configs train at least one iteration");
        println!(
            "trained {} iterations over {} epochs; final d_loss {:.6}, g_total {:.6}",
            outcome.log.rows.len(),
            cfg.epochs,
            last.d_loss,
            last.g_total
        );
        println!("wrote {} checkpoints and {}", outcome.checkpoints.len(), log_path.display());
        Ok(())
    })
}
