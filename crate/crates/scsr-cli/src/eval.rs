//! `eval`: pair reconstructions with references by file stem and report
//! PSNR/SSIM per image plus corpus means, as CSV and an aligned table.

use std::path::PathBuf;

use clap::Args;
use scsr::metrics::report::evaluate_corpus;
use scsr::metrics::{Channel, MetricConfig};
use scsr::Result;

use crate::manifest::{with_manifest, RunManifest};
use crate::util::parse_scale;

pub fn parse_channel(s: &str) -> std::result::Result<Channel, String> {
    match s {
        "rgb" => Ok(Channel::Rgb),
        "luma" => Ok(Channel::Luma),
        other => Err(format!("unknown channel `{other}` (expected rgb or luma)")),
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of reconstructions.
    #[arg(long)]
    pub sr: PathBuf,
    /// Directory of references; stems must match --sr one-to-one.
    #[arg(long)]
    pub hr: PathBuf,
    /// Color convention the metrics run under.
    #[arg(long, value_parser = parse_channel, default_value = "rgb")]
    pub channel: Channel,
    /// Pixels stripped from every border first (commonly 0 or the scale).
    #[arg(long = "border-crop", default_value_t = 0)]
    pub border_crop: usize,
    /// Upscaling factor recorded in the report rows.
    #[arg(long, value_parser = parse_scale, default_value_t = 4)]
    pub scale: usize,
    /// Method label recorded in the report rows.
    #[arg(long, default_value = "model")]
    pub method: String,
    /// Dataset label; defaults to the --hr directory name.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Output directory for eval_report.csv / eval_report.txt.
    #[arg(long, default_value = "eval_out")]
    pub out: PathBuf,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let dataset = args
        .dataset
        .clone()
        .or_else(|| args.hr.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "dataset".to_string());
    let cfg = MetricConfig { channel: args.channel, border_crop: args.border_crop, global_window: false };

    let mut m = RunManifest::new("eval");
    m.set_path("sr", &args.sr);
    m.set_path("hr", &args.hr);
    m.set_path("out", &args.out);
    m.set("channel", args.channel);
    m.set("border_crop", args.border_crop);
    m.set("scale", args.scale);
    m.set("method", &args.method);
    m.set("dataset", &dataset);

    with_manifest(&args.out, m, |m| {
        let report = evaluate_corpus(&args.sr, &args.hr, &args.method, args.scale, &dataset, &cfg)?;
        std::fs::create_dir_all(&args.out)?;
        let csv_path = args.out.join("eval_report.csv");
        let txt_path = args.out.join("eval_report.txt");
        let convention = format!(
            "conventions: channel = {}, border_crop = {}\n",
            args.channel, args.border_crop
        );
        std::fs::write(&csv_path, report.to_csv())?;
        std::fs::write(&txt_path, format!("{convention}{}", report.to_table()))?;
        m.set("pairs", report.rows.len());
        m.set("mean_psnr_db", format!("{:.6}", report.mean_psnr_db));
        m.set("mean_ssim", format!("{:.6}", report.mean_ssim));
        print!("{convention}{}", report.to_table());
        println!("wrote {} and {}", csv_path.display(), txt_path.display());
        Ok(())
    })
}
