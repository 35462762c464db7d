//! `compare`: one table per dataset with a row per method. Baselines
//! are computed, not copied: each HR image is bicubic-downscaled by the
//! factor, every method reconstructs the same low-res input, and the
//! rows aggregate PSNR/SSIM over the dataset.

use std::path::{Path, PathBuf};

use clap::Args;
use scsr::imaging::{bicubic_resize, load_image, Image};
use scsr::metrics::report::{pair_rows, MetricReport};
use scsr::metrics::{Channel, MetricConfig};
use scsr::networks::Generator;
use scsr::{Error, Result};

use crate::manifest::{with_manifest, RunManifest};
use crate::sr::load_generator;
use crate::util::{list_images, parse_scale, stem};

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Comma-separated methods: `bicubic` and/or `model:PATH.ckpt`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<String>,
    /// Comma-separated directories of high-resolution images; each is
    /// one dataset named by its directory.
    #[arg(long, value_delimiter = ',', required = true)]
    pub datasets: Vec<PathBuf>,
    /// Upscaling factor every method reconstructs at.
    #[arg(long, value_parser = parse_scale)]
    pub scale: usize,
    /// Color convention; luma with a scale-sized border crop is the
    /// usual reporting convention for these baselines.
    #[arg(long, value_parser = crate::eval::parse_channel, default_value = "luma")]
    pub channel: Channel,
    /// Border pixels stripped before metrics; defaults to the scale.
    #[arg(long = "border-crop")]
    pub border_crop: Option<usize>,
    /// Output directory for per-dataset tables and CSVs.
    #[arg(long, default_value = "compare_out")]
    pub out: PathBuf,
}

enum Method {
    Bicubic,
    Model { label: String, gen: Box<Generator> },
}

impl Method {
    fn label(&self) -> &str {
        match self {
            Method::Bicubic => "bicubic",
            Method::Model { label, .. } => label,
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn parse_methods(specs: &[String]) -> Result<Vec<Method>> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument { op: "compare", detail: "no methods given".into() });
    }
    let mut out = Vec::new();
    for spec in specs {
        if spec == "bicubic" {
            out.push(Method::Bicubic);
        } else if let Some(path) = spec.strip_prefix("model:") {
            let path = Path::new(path);
            let gen = load_generator(path)?;
            let mut label = format!("model:{}", stem(path)?);
            // Two checkpoints may share a file stem; disambiguate.
            let clashes = out.iter().filter(|m: &&Method| m.label() == label).count();
            if clashes > 0 {
                label = format!("{label}#{}", clashes + 1);
            }
            out.push(Method::Model { label, gen: Box::new(gen) });
        } else {
            return Err(Error::InvalidArgument {
                op: "compare",
                detail: format!("unknown method `{spec}` (expected bicubic or model:PATH)"),
            });
        }
    }
    Ok(out)
}

/// Largest top-left crop whose sides divide evenly through every
/// method: the downscale needs multiples of `scale`, and a model input
/// must additionally divide by its pooling rate.
fn crop_multiple(methods: &[Method], scale: usize) -> usize {
    let mut m = scale;
    for method in methods {
        if let Method::Model { gen, .. } = method {
            m = lcm(m, scale * gen.config.input_multiple());
        }
    }
    m
}

/// Method-by-method mean table for one dataset.
fn method_table(dataset: &str, cfg: &MetricConfig, scale: usize, per_method: &[MetricReport]) -> String {
    let label_w = per_method.iter().map(|r| r.rows[0].method.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "dataset: {dataset}  (scale = {scale}, channel = {}, border_crop = {}, images = {})\n",
        cfg.channel,
        cfg.border_crop,
        per_method.first().map(|r| r.rows.len()).unwrap_or(0)
    );
    out.push_str(&format!("{:<label_w$}  {:>10}  {:>8}\n", "method", "psnr_db", "ssim"));
    out.push_str(&format!("{}  {}  {}\n", "-".repeat(label_w), "-".repeat(10), "-".repeat(8)));
    for report in per_method {
        let psnr = if report.mean_psnr_db.is_infinite() {
            "inf".to_string()
        } else {
            format!("{:.4}", report.mean_psnr_db)
        };
        out.push_str(&format!(
            "{:<label_w$}  {:>10}  {:>8.4}\n",
            report.rows[0].method, psnr, report.mean_ssim
        ));
    }
    out
}

pub fn run(args: &CompareArgs) -> Result<()> {
    let border = args.border_crop.unwrap_or(args.scale);
    let cfg = MetricConfig { channel: args.channel, border_crop: border, global_window: false };

    let mut m = RunManifest::new("compare");
    m.set("methods", args.methods.join(","));
    m.set(
        "datasets",
        args.datasets.iter().map(|d| d.display().to_string()).collect::<Vec<_>>().join(","),
    );
    m.set("scale", args.scale);
    m.set("channel", args.channel);
    m.set("border_crop", border);
    m.set_path("out", &args.out);

    with_manifest(&args.out, m, |m| {
        let methods = parse_methods(&args.methods)?;
        let multiple = crop_multiple(&methods, args.scale);
        std::fs::create_dir_all(&args.out)?;

        for dir in &args.datasets {
            let dataset = dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string());
            let files = list_images(dir)?;
            if files.is_empty() {
                return Err(Error::Image(format!("no png/ppm images in {}", dir.display())));
            }

            // Shared preprocessing: crop each HR to the common multiple
            // and downscale once, so every method sees the same input.
            let mut prepared = Vec::new();
            for path in &files {
                let id = stem(path)?;
                let img = load_image(path)?;
                let (w, h) = (img.width() / multiple * multiple, img.height() / multiple * multiple);
                if w == 0 || h == 0 {
                    return Err(Error::Image(format!(
                        "{}: {}x{} smaller than the required multiple {multiple}",
                        path.display(),
                        img.width(),
                        img.height()
                    )));
                }
                let hr = img.crop(0, 0, w, h)?;
                let lr = bicubic_resize(&hr, w / args.scale, h / args.scale)?;
                prepared.push((id, hr, lr));
            }

            let mut per_method = Vec::new();
            let mut all_rows = Vec::new();
            for method in &methods {
                let pairs = prepared
                    .iter()
                    .map(|(id, hr, lr)| {
                        let sr = match method {
                            Method::Bicubic => bicubic_resize(lr, hr.width(), hr.height())?,
                            Method::Model { gen, .. } => {
                                Image::from_tensor(&gen.forward_value(&lr.to_tensor())?)?
                            }
                        };
                        Ok((id.clone(), sr, hr.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let rows = pair_rows(&pairs, method.label(), args.scale, &cfg)?;
                all_rows.extend(rows.clone());
                per_method.push(MetricReport::from_rows(&dataset, cfg, rows)?);
            }

            let combined = MetricReport::from_rows(&dataset, cfg, all_rows)?;
            let table = method_table(&dataset, &cfg, args.scale, &per_method);
            let csv_path = args.out.join(format!("compare_{dataset}.csv"));
            let txt_path = args.out.join(format!("compare_{dataset}.txt"));
            std::fs::write(&csv_path, combined.to_csv())?;
            std::fs::write(&txt_path, &table)?;
            for report in &per_method {
                m.set(
                    &format!("{dataset}.{}.psnr_db", report.rows[0].method),
                    format!("{:.6}", report.mean_psnr_db),
                );
                m.set(
                    &format!("{dataset}.{}.ssim", report.rows[0].method),
                    format!("{:.6}", report.mean_ssim),
                );
            }
            print!("{table}\n");
        }
        println!("reports written to {}", args.out.display());
        Ok(())
    })
}
