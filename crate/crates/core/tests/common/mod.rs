//! Synthetic images with planted fixations, shared by integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saliency::dataset::save_rgb_png;
use saliency::sift::{keypoints, SiftParams};
use saliency::{FixationRecord, FixationSet, RgbImage};

pub const SIDE: usize = 128;

pub struct Scene {
    pub image: RgbImage,
    pub blobs: Vec<(f64, f64)>,
    pub fixations: FixationSet,
}

fn far_enough(p: (f64, f64), others: &[(f64, f64)], d: f64) -> bool {
    others.iter().all(|q| (p.0 - q.0).hypot(p.1 - q.1) >= d)
}

/// Gaussian blobs (which SIFT detects) among straight full-width bars
/// (which the edge test rejects) on a smoothly varying background.
/// Observers fixate the detected blob keypoints, preferring central ones.
pub fn scene(id: &str, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (SIDE, SIDE);
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.4..0.6));
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.01..0.05),
                rng.random_range(0.01..0.05),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.01..0.03),
            )
        })
        .collect();

    let mut blobs: Vec<(f64, f64)> = Vec::new();
    while blobs.len() < 6 {
        let p = (rng.random_range(16.0..112.0), rng.random_range(16.0..112.0));
        if far_enough(p, &blobs, 24.0) {
            blobs.push(p);
        }
    }
    let blob_style: Vec<(f64, [f64; 3])> = blobs
        .iter()
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let tint: [f64; 3] = std::array::from_fn(|_| sign * rng.random_range(0.35..0.5));
            (rng.random_range(2.5..4.0), tint)
        })
        .collect();

    let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (nx, ny) = (angle.cos(), angle.sin());
    let bars: Vec<(f64, [f64; 3])> = (0..3)
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let tint: [f64; 3] = std::array::from_fn(|_| sign * rng.random_range(0.2..0.35));
            (rng.random_range(-50.0..50.0), tint)
        })
        .collect();

    let image = RgbImage::from_fn(w, h, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let bg: f64 = waves.iter().map(|&(a, b, ph, amp)| amp * (a * xf + b * yf + ph).sin()).sum();
        let mut px = base.map(|c| c + bg);
        for (&(bx, by), &(s, tint)) in blobs.iter().zip(&blob_style) {
            let g = (-((xf - bx).powi(2) + (yf - by).powi(2)) / (2.0 * s * s)).exp();
            for c in 0..3 {
                px[c] += g * tint[c];
            }
        }
        let d = (xf - 63.5) * nx + (yf - 63.5) * ny;
        for &(off, tint) in &bars {
            // Bar of width 6 with one-pixel soft edges.
            let t = (4.0 - (d - off).abs()).clamp(0.0, 1.0);
            for c in 0..3 {
                px[c] += t * tint[c];
            }
        }
        px.map(|c| c.clamp(0.0, 1.0))
    })
    .expect("valid synthetic image");

    // Fixation targets are the blob keypoints the detector actually finds.
    let kps = keypoints(&image.luma(), &SiftParams::default()).expect("valid SIFT parameters");
    let mut targets: Vec<(f64, f64)> = kps.iter().map(|k| (k.x, k.y)).collect();
    if targets.is_empty() {
        targets = blobs.clone();
    }
    let weights: Vec<f64> = targets
        .iter()
        .map(|&(x, y)| (-((x - 63.5).powi(2) + (y - 63.5).powi(2)) / (2.0 * 35.0f64.powi(2))).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut records = Vec::new();
    for obs in 0..15u32 {
        for _ in 0..3 {
            let mut u = rng.random_range(0.0..total);
            let mut k = 0;
            while k + 1 < weights.len() && u >= weights[k] {
                u -= weights[k];
                k += 1;
            }
            let (bx, by) = if rng.random_bool(0.25) {
                // Free viewing near the image center.
                let r = 0.15 * w as f64 * rng.random_range(0.0f64..1.0).sqrt();
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                (63.5 + r * t.cos(), 63.5 + r * t.sin())
            } else {
                targets[k]
            };
            records.push(FixationRecord {
                observer_id: obs,
                x: (bx + rng.random_range(-1.0..1.0)).clamp(0.0, w as f64 - 1.0),
                y: (by + rng.random_range(-1.0..1.0)).clamp(0.0, h as f64 - 1.0),
            });
        }
    }
    Scene {
        image,
        blobs,
        fixations: FixationSet {
            image_id: id.to_string(),
            records,
        },
    }
}

pub fn scene_id(i: usize) -> String {
    format!("syn{i:03}")
}

/// Writes `n` scenes as PNG plus fixation CSV and returns the manifest path.
pub fn write_corpus(dir: &Path, n: usize, seed: u64) -> PathBuf {
    std::fs::create_dir_all(dir.join("images")).unwrap();
    std::fs::create_dir_all(dir.join("fixations")).unwrap();
    let mut manifest = String::from("image_id,image_path,fixation_path\n");
    for i in 0..n {
        let id = scene_id(i);
        let s = scene(&id, seed.wrapping_add(i as u64));
        save_rgb_png(&dir.join(format!("images/{id}.png")), &s.image).unwrap();
        std::fs::write(
            dir.join(format!("fixations/{id}.csv")),
            saliency::dataset::format_fixations(&s.fixations),
        )
        .unwrap();
        let _ = writeln!(manifest, "{id},images/{id}.png,fixations/{id}.csv");
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}
