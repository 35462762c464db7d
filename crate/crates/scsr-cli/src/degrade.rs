//! `degrade`: crop each source image and pair it with its bicubic
//! downscale, producing the hr/ + lr/ trees that evaluation consumes.

use std::path::PathBuf;

use clap::Args;
use scsr::imaging::{load_image, make_pair, save_image, write_manifest};
use scsr::{rng, Error, Result};

use crate::manifest::{with_manifest, RunManifest};
use crate::util::{list_images, parse_scale, stem};

#[derive(Args, Debug)]
pub struct DegradeArgs {
    /// Directory of source images (png or ppm).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output directory; receives hr/, lr/, manifest.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Upscaling factor the low-res tree is built for (2, 4, or 8).
    #[arg(long, value_parser = parse_scale)]
    pub scale: usize,
    /// Square crop side taken from each source image.
    #[arg(long, default_value_t = 128)]
    pub crop: usize,
    /// Seed for the crop positions; one stream per file.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &DegradeArgs) -> Result<()> {
    let scale = args.scale;
    let mut m = RunManifest::new("degrade");
    m.set_path("in", &args.input);
    m.set_path("out", &args.out);
    m.set("scale", scale);
    m.set("crop", args.crop);
    m.set("seed", args.seed);

    with_manifest(&args.out, m, |m| {
        let files = list_images(&args.input)?;
        if files.is_empty() {
            return Err(Error::Image(format!("no png/ppm images in {}", args.input.display())));
        }
        std::fs::create_dir_all(args.out.join("hr"))?;
        std::fs::create_dir_all(args.out.join("lr"))?;

        let mut written = Vec::new();
        let mut failures = Vec::new();
        for path in &files {
            let name = stem(path)?;
            let result = (|| -> Result<()> {
                let img = load_image(path)?;
                // One rng stream per file: adding or removing files
                // never moves another file's crop.
                let mut r = rng::seeded(rng::derive(args.seed, &name));
                let pair = make_pair(&img, args.crop, scale, &mut r)?;
                save_image(&args.out.join("hr").join(format!("{name}.png")), &pair.hr)?;
                save_image(&args.out.join("lr").join(format!("{name}.png")), &pair.lr)?;
                written.push(format!("hr/{name}.png"));
                written.push(format!("lr/{name}.png"));
                Ok(())
            })();
            if let Err(e) = result {
                failures.push(format!("{}: {e}", path.display()));
            }
        }
        write_manifest(&args.out.join("manifest.txt"), &written)?;
        m.set("images_in", files.len());
        m.set("pairs_written", written.len() / 2);
        m.set("failures", failures.len());
        println!(
            "degraded {} of {} images (scale {scale}, crop {}) into {}",
            written.len() / 2,
            files.len(),
            args.crop,
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
