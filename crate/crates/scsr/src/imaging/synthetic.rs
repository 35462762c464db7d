//! Procedural test corpus: gradients, checkerboards, and Gaussian
//! blobs. Every image is a pure function of the seed, so corpora are
//! reproducible across runs and machines.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::Result;
use crate::imaging::{save_image, write_manifest, Image};
use crate::rng;

/// Families of generated content. They cycle in corpus order so every
/// corpus mixes smooth regions, hard edges, and isolated features.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    Gradient,
    Checkerboard,
    Blobs,
}

const KINDS: [SyntheticKind; 3] = [
    SyntheticKind::Gradient,
    SyntheticKind::Checkerboard,
    SyntheticKind::Blobs,
];

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn random_color(r: &mut rand_chacha::ChaCha12Rng) -> [f64; 3] {
    [
        r.random_range(0.0..1.0),
        r.random_range(0.0..1.0),
        r.random_range(0.0..1.0),
    ]
}

/// Renders one image of the given kind, fully determined by the seed.
pub fn synthetic_image(kind: SyntheticKind, size: usize, seed: u64) -> Image {
    let mut r = rng::seeded(seed);
    match kind {
        SyntheticKind::Gradient => {
            let angle = r.random_range(0.0..std::f64::consts::TAU);
            let (dx, dy) = (angle.cos(), angle.sin());
            let a = random_color(&mut r);
            let b = random_color(&mut r);
            let half = size as f64 / 2.0;
            // Projection onto the gradient axis, normalized so t spans
            // [0, 1] across the image diagonal.
            let norm = 2.0 * half * (dx.abs() + dy.abs()).max(1e-9);
            Image::from_fn(size, size, |x, y| {
                let p = (x as f64 - half) * dx + (y as f64 - half) * dy;
                lerp3(a, b, (p / norm + 0.5).clamp(0.0, 1.0))
            })
        }
        SyntheticKind::Checkerboard => {
            let period = r.random_range(8..=32usize);
            let px = r.random_range(0..period);
            let py = r.random_range(0..period);
            let a = random_color(&mut r);
            let b = random_color(&mut r);
            Image::from_fn(size, size, |x, y| {
                let cell = ((x + px) / period + (y + py) / period) % 2;
                if cell == 0 {
                    a
                } else {
                    b
                }
            })
        }
        SyntheticKind::Blobs => {
            let base = lerp3([0.0; 3], random_color(&mut r), 0.4);
            let count = r.random_range(3..=6usize);
            let blobs: Vec<([f64; 3], f64, f64, f64)> = (0..count)
                .map(|_| {
                    let color = random_color(&mut r);
                    let cx = r.random_range(0.0..size as f64);
                    let cy = r.random_range(0.0..size as f64);
                    let sigma = r.random_range(size as f64 / 16.0..size as f64 / 6.0);
                    (color, cx, cy, sigma)
                })
                .collect();
            Image::from_fn(size, size, |x, y| {
                let mut p = base;
                for (color, cx, cy, sigma) in &blobs {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    let w = (-d2 / (2.0 * sigma * sigma)).exp();
                    p = lerp3(p, *color, w);
                }
                [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0), p[2].clamp(0.0, 1.0)]
            })
        }
    }
}

/// Renders a corpus in memory: `count` images cycling through the
/// kinds, each seeded independently from the root seed.
pub fn synthetic_corpus_images(count: usize, size: usize, seed: u64) -> Vec<Image> {
    (0..count)
        .map(|i| {
            let kind = KINDS[i % KINDS.len()];
            synthetic_image(kind, size, rng::derive(seed, &format!("synthetic-{i:04}")))
        })
        .collect()
}

/// Writes a corpus of PNGs plus a `corpus.txt` manifest into `dir`
/// and returns the image paths in manifest order.
pub fn synthetic_corpus(dir: &Path, count: usize, size: usize, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(count);
    let mut paths = Vec::with_capacity(count);
    for (i, img) in synthetic_corpus_images(count, size, seed).iter().enumerate() {
        let name = format!("synth_{i:04}.png");
        let path = dir.join(&name);
        save_image(&path, img)?;
        names.push(name);
        paths.push(path);
    }
    write_manifest(&dir.join("corpus.txt"), &names)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{load_image, read_manifest};

    #[test]
    fn images_are_deterministic_in_the_seed() {
        for kind in KINDS {
            let a = synthetic_image(kind, 32, 99);
            let b = synthetic_image(kind, 32, 99);
            assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0);
            let c = synthetic_image(kind, 32, 100);
            assert!(a.max_abs_diff(&c).unwrap() > 0.0, "{kind:?} ignores the seed");
        }
    }

    #[test]
    fn values_stay_inside_the_unit_range() {
        for (i, img) in synthetic_corpus_images(9, 48, 5).iter().enumerate() {
            for &v in img.data() {
                assert!((0.0..=1.0).contains(&v), "image {i} sample {v}");
            }
        }
    }

    #[test]
    fn checkerboard_has_hard_edges_and_gradient_is_smooth() {
        let checker = synthetic_image(SyntheticKind::Checkerboard, 64, 1);
        let grad = synthetic_image(SyntheticKind::Gradient, 64, 1);
        let max_step = |img: &Image| {
            let mut m: f64 = 0.0;
            for y in 0..img.height() {
                for x in 1..img.width() {
                    let a = img.pixel(x - 1, y);
                    let b = img.pixel(x, y);
                    for c in 0..3 {
                        m = m.max((a[c] - b[c]).abs());
                    }
                }
            }
            m
        };
        assert!(max_step(&checker) > 0.1);
        assert!(max_step(&grad) < 0.05);
    }

    #[test]
    fn corpus_on_disk_matches_its_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let paths = synthetic_corpus(dir.path(), 5, 16, 77).unwrap();
        assert_eq!(paths.len(), 5);
        let listed = read_manifest(&dir.path().join("corpus.txt")).unwrap();
        assert_eq!(listed, paths);
        for p in &listed {
            let img = load_image(p).unwrap();
            assert_eq!(img.width(), 16);
        }
    }
}
