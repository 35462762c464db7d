//! `sr`: load a generator checkpoint and upscale every image in a
//! directory by the model's factor.

use std::path::PathBuf;

use clap::Args;
use scsr::imaging::{load_image, save_image, Image};
use scsr::networks::{load_checkpoint, Generator, GeneratorConfig};
use scsr::{Error, Result};

use crate::manifest::{with_manifest, RunManifest};
use crate::util::{list_images, stem};

#[derive(Args, Debug)]
pub struct SrArgs {
    /// Generator checkpoint produced by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of low-resolution inputs.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory for the reconstructions.
    #[arg(long)]
    pub out: PathBuf,
}

/// Rebuilds the generator a checkpoint was saved from.
pub fn load_generator(path: &std::path::Path) -> Result<Generator> {
    let ckpt = load_checkpoint(path)?;
    let cfg = GeneratorConfig::from_echo(&ckpt.config_echo)
        .map_err(|e| Error::Checkpoint(format!("{}: not a generator checkpoint: {e}", path.display())))?;
    let mut gen = Generator::init(&cfg, 0)?;
    ckpt.load_into(&cfg.echo(), &mut gen)?;
    Ok(gen)
}

pub fn run(args: &SrArgs) -> Result<()> {
    let mut m = RunManifest::new("sr");
    m.set_path("model", &args.model);
    m.set_path("in", &args.input);
    m.set_path("out", &args.out);

    with_manifest(&args.out, m, |m| {
        let gen = load_generator(&args.model)?;
        let scale = gen.config.scale;
        let multiple = gen.config.input_multiple();
        m.set_block("model_config", &gen.config.echo());

        let files = list_images(&args.input)?;
        if files.is_empty() {
            return Err(Error::Image(format!("no png/ppm images in {}", args.input.display())));
        }
        std::fs::create_dir_all(&args.out)?;

        let mut failures = Vec::new();
        let mut written = 0usize;
        for path in &files {
            let name = stem(path)?;
            let result = (|| -> Result<()> {
                let img = load_image(path)?;
                let (w, h) = (img.width(), img.height());
                if w % multiple != 0 || h % multiple != 0 {
                    return Err(Error::InvalidArgument {
                        op: "sr",
                        detail: format!(
                            "input {w}x{h} not usable: the model needs both sides divisible by {multiple}"
                        ),
                    });
                }
                let sr = gen.forward_value(&img.to_tensor())?;
                save_image(&args.out.join(format!("{name}.png")), &Image::from_tensor(&sr)?)?;
                written += 1;
                Ok(())
            })();
            if let Err(e) = result {
                failures.push(format!("{}: {e}", path.display()));
            }
        }
        m.set("images_in", files.len());
        m.set("images_out", written);
        m.set("failures", failures.len());
        println!(
            "reconstructed {written} of {} images at {scale}x into {}",
            files.len(),
            args.out.display()
        );
        if !failures.is_empty() {
            for f in &failures {
                eprintln!("failed: {f}");
            }
            return Err(Error::Image(format!(
                "{} of {} images failed; see lines above",
                failures.len(),
                files.len()
            )));
        }
        Ok(())
    })
}
