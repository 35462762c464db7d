//! Corpus-level evaluation: per-image rows, arithmetic-mean
//! aggregates, CSV and aligned-table rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{load_image, Image};
use crate::metrics::{image_metrics, MetricConfig, Psnr};

/// One evaluated image pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub image: String,
    pub method: String,
    pub scale: usize,
    pub psnr: Psnr,
    pub ssim: f64,
}

/// Rows plus corpus aggregates and the conventions they were computed
/// under.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub dataset: String,
    pub config: MetricConfig,
    pub rows: Vec<MetricRow>,
    /// Arithmetic mean of row PSNRs; +inf if any row hit the
    /// identical-pair sentinel.
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
}

impl MetricReport {
    /// Computes aggregates from rows. Rows are kept in the order given.
    pub fn from_rows(dataset: impl Into<String>, config: MetricConfig, rows: Vec<MetricRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Metric("report has no rows".into()));
        }
        let n = rows.len() as f64;
        let mean_psnr_db = rows.iter().map(|r| r.psnr.db()).sum::<f64>() / n;
        let mean_ssim = rows.iter().map(|r| r.ssim).sum::<f64>() / n;
        Ok(MetricReport { dataset: dataset.into(), config, rows, mean_psnr_db, mean_ssim })
    }

    fn fmt_psnr(db: f64) -> String {
        if db.is_infinite() {
            "inf".to_string()
        } else {
            format!("{db:.6}")
        }
    }

    /// CSV with one line per image pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,method,scale,psnr_db,ssim\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{:.6}", r.image, r.method, r.scale, r.psnr, r.ssim);
        }
        out
    }

    /// Aligned plain-text table with a trailing mean row.
    pub fn to_table(&self) -> String {
        let window = if self.config.global_window { "global" } else { "gaussian-11x11" };
        let mut header = format!(
            "dataset: {}  channel: {}  border_crop: {}  window: {}\n",
            self.dataset, self.config.channel, self.config.border_crop, window
        );
        let mut cells: Vec<[String; 5]> = vec![[
            "image".into(),
            "method".into(),
            "scale".into(),
            "psnr_db".into(),
            "ssim".into(),
        ]];
        for r in &self.rows {
            cells.push([
                r.image.clone(),
                r.method.clone(),
                r.scale.to_string(),
                r.psnr.to_string(),
                format!("{:.6}", r.ssim),
            ]);
        }
        let methods: Vec<&str> = {
            let mut m: Vec<&str> = self.rows.iter().map(|r| r.method.as_str()).collect();
            m.dedup();
            m
        };
        let mean_method = if methods.len() == 1 { methods[0].to_string() } else { "mixed".to_string() };
        let mean_scale = self.rows[0].scale.to_string();
        cells.push([
            "mean".into(),
            mean_method,
            mean_scale,
            Self::fmt_psnr(self.mean_psnr_db),
            format!("{:.6}", self.mean_ssim),
        ]);
        let mut widths = [0usize; 5];
        for row in &cells {
            for (i, c) in row.iter().enumerate() {
                widths[i] = widths[i].max(c.len());
            }
        }
        for (rix, row) in cells.iter().enumerate() {
            if rix == cells.len() - 1 {
                let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                header.push_str(&"-".repeat(rule));
                header.push('\n');
            }
            let line: Vec<String> =
                row.iter().enumerate().map(|(i, c)| format!("{c:<width$}", width = widths[i])).collect();
            header.push_str(line.join("  ").trim_end());
            header.push('\n');
        }
        header
    }
}

/// Evaluates in-memory (id, reconstruction, reference) triples in
/// parallel and returns rows sorted by id.
pub fn pair_rows(
    pairs: &[(String, Image, Image)],
    method: &str,
    scale: usize,
    cfg: &MetricConfig,
) -> Result<Vec<MetricRow>> {
    let mut rows = pairs
        .par_iter()
        .map(|(id, sr, hr)| {
            let (psnr, ssim) = image_metrics(sr, hr, cfg)
                .map_err(|e| Error::Metric(format!("{id}: {e}")))?;
            Ok(MetricRow { image: id.clone(), method: method.to_string(), scale, psnr, ssim })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.image.cmp(&b.image));
    Ok(rows)
}

/// Maps image id (file stem) to path for every png/ppm in a directory.
fn collect_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
        if !matches!(ext.as_deref(), Some("png") | Some("ppm")) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Metric(format!("unreadable file name {}", path.display())))?
            .to_string();
        if let Some(dup) = out.insert(stem.clone(), path) {
            return Err(Error::Metric(format!(
                "duplicate image id `{stem}` in {} (also {})",
                dir.display(),
                dup.display()
            )));
        }
    }
    Ok(out)
}

/// Pairs reconstructions with references by file stem and evaluates
/// the corpus. Every file must have a partner; leftovers on either
/// side are an error listing the offending names.
pub fn evaluate_corpus(
    sr_dir: &Path,
    hr_dir: &Path,
    method: &str,
    scale: usize,
    dataset: &str,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    let sr = collect_images(sr_dir)?;
    let mut hr = collect_images(hr_dir)?;
    let mut sr_only = Vec::new();
    let mut pairs = Vec::new();
    for (stem, sp) in sr {
        match hr.remove(&stem) {
            Some(hp) => pairs.push((stem, sp, hp)),
            None => sr_only.push(stem),
        }
    }
    let hr_only: Vec<String> = hr.into_keys().collect();
    if !sr_only.is_empty() || !hr_only.is_empty() {
        return Err(Error::Metric(format!(
            "unmatched files: reconstruction-only [{}]; reference-only [{}]",
            sr_only.join(", "),
            hr_only.join(", ")
        )));
    }
    if pairs.is_empty() {
        return Err(Error::Metric(format!(
            "no image pairs found under {} and {}",
            sr_dir.display(),
            hr_dir.display()
        )));
    }
    let loaded = pairs
        .par_iter()
        .map(|(id, sp, hp)| Ok((id.clone(), load_image(sp)?, load_image(hp)?)))
        .collect::<Result<Vec<_>>>()?;
    let rows = pair_rows(&loaded, method, scale, cfg)?;
    MetricReport::from_rows(dataset, *cfg, rows)
}
