//! PNG and binary PPM readers/writers plus the plain-text corpus
//! manifest. Samples are quantized to 8 bits on save; loading maps
//! byte v to v/255.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::Image;

fn byte_to_unit(v: u8) -> f64 {
    v as f64 / 255.0
}

fn unit_to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Loads a PNG or binary PPM (P6) by file extension. 8-bit only;
/// grayscale is replicated across the three channels, alpha dropped.
pub fn load_image(path: &Path) -> Result<Image> {
    match extension(path)?.as_str() {
        "png" => load_png(path),
        "ppm" => load_ppm(path),
        other => Err(Error::Image(format!("unsupported image format `.{other}`"))),
    }
}

/// Saves as PNG or binary PPM by file extension.
pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    match extension(path)?.as_str() {
        "png" => save_png(path, img),
        "ppm" => save_ppm(path, img),
        other => Err(Error::Image(format!("unsupported image format `.{other}`"))),
    }
}

fn extension(path: &Path) -> Result<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .ok_or_else(|| Error::Image(format!("no file extension on {}", path.display())))
}

fn load_png(path: &Path) -> Result<Image> {
    let dyn_img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    let mut data = Vec::with_capacity(w * h * 3);
    match dyn_img {
        image::DynamicImage::ImageLuma8(g) => {
            for p in g.pixels() {
                let v = byte_to_unit(p.0[0]);
                data.extend_from_slice(&[v, v, v]);
            }
        }
        image::DynamicImage::ImageLumaA8(g) => {
            for p in g.pixels() {
                let v = byte_to_unit(p.0[0]);
                data.extend_from_slice(&[v, v, v]);
            }
        }
        image::DynamicImage::ImageRgb8(rgb) => {
            for p in rgb.pixels() {
                data.extend_from_slice(&[byte_to_unit(p.0[0]), byte_to_unit(p.0[1]), byte_to_unit(p.0[2])]);
            }
        }
        image::DynamicImage::ImageRgba8(rgba) => {
            for p in rgba.pixels() {
                data.extend_from_slice(&[byte_to_unit(p.0[0]), byte_to_unit(p.0[1]), byte_to_unit(p.0[2])]);
            }
        }
        other => {
            return Err(Error::Image(format!(
                "{}: unsupported pixel format {:?} (8-bit gray or RGB only)",
                path.display(),
                other.color()
            )))
        }
    }
    Image::new(w, h, data)
}

fn save_png(path: &Path, img: &Image) -> Result<()> {
    let mut buf = image::RgbImage::new(img.width() as u32, img.height() as u32);
    for (x, y, p) in buf.enumerate_pixels_mut() {
        let [r, g, b] = img.pixel(x as usize, y as usize);
        *p = image::Rgb([unit_to_byte(r), unit_to_byte(g), unit_to_byte(b)]);
    }
    buf.save(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

fn load_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    let fail = |msg: &str| Error::Image(format!("{}: {msg}", path.display()));
    // Header: magic, width, height, maxval as whitespace-separated
    // tokens with `#` comments, then a single whitespace byte before
    // the raw samples.
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        while *pos < bytes.len() {
            match bytes[*pos] {
                b' ' | b'\t' | b'\r' | b'\n' => *pos += 1,
                b'#' => {
                    while *pos < bytes.len() && bytes[*pos] != b'\n' {
                        *pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(fail("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos)? != "P6" {
        return Err(fail("not a binary PPM (P6)"));
    }
    let dim = |s: String| s.parse::<usize>().map_err(|_| fail("bad header number"));
    let w = dim(token(&mut pos)?)?;
    let h = dim(token(&mut pos)?)?;
    let maxval = dim(token(&mut pos)?)?;
    if maxval != 255 {
        return Err(fail(&format!("maxval {maxval} unsupported (8-bit only)")));
    }
    pos += 1; // the single whitespace byte after maxval
    let want = w * h * 3;
    if bytes.len() < pos + want {
        return Err(fail("truncated pixel data"));
    }
    let data = bytes[pos..pos + want].iter().map(|&b| byte_to_unit(b)).collect();
    Image::new(w, h, data)
}

fn save_ppm(path: &Path, img: &Image) -> Result<()> {
    let mut out = Vec::with_capacity(20 + img.width() * img.height() * 3);
    write!(out, "P6\n{} {}\n255\n", img.width(), img.height())?;
    out.extend(img.data().iter().map(|&v| unit_to_byte(v)));
    fs::write(path, out)?;
    Ok(())
}

/// Reads a corpus manifest: one path per line, relative to the
/// manifest's directory; blank lines and `#` comments are skipped.
pub fn read_manifest(manifest: &Path) -> Result<Vec<PathBuf>> {
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = fs::read_to_string(manifest)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// Writes a manifest of relative paths next to the corpus images.
pub fn write_manifest(manifest: &Path, names: &[String]) -> Result<()> {
    let mut text = String::new();
    for n in names {
        text.push_str(n);
        text.push('\n');
    }
    fs::write(manifest, text)?;
    Ok(())
}
