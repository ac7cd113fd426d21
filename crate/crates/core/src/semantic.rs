//! Mid- and high-level channels: horizon band, ingested detector maps and
//! the center prior.

use log::warn;

use crate::error::{Error, Result};
use crate::features::filters::gaussian_blur;
use crate::types::{Plane, RgbImage};

pub const HORIZON_MIN_SIDE: usize = 64;
/// Band half-width as a fraction of image height.
pub const HORIZON_BAND: f64 = 0.05;
/// Fraction of the image height searched, centered vertically.
pub const HORIZON_SEARCH: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonEstimate {
    pub row: f64,
    pub confidence: f64,
}

/// Finds the row with the strongest mean horizontal-edge energy inside the
/// middle band of the image. Ties go to the upper row.
pub fn estimate_horizon(img: &RgbImage) -> Result<HorizonEstimate> {
    img.ensure_min_size(HORIZON_MIN_SIDE, HORIZON_MIN_SIDE)?;
    let h = img.height();
    let smooth = gaussian_blur(&img.luma(), 1.0);
    let margin = (1.0 - HORIZON_SEARCH) / 2.0;
    let lo = ((margin * h as f64).ceil() as usize).max(1);
    let hi = (((1.0 - margin) * h as f64).floor() as usize).min(h - 2);

    let energy: Vec<f64> = (lo..=hi)
        .map(|y| {
            let above = smooth.row(y - 1);
            let below = smooth.row(y + 1);
            above
                .iter()
                .zip(below)
                .map(|(a, b)| ((b - a) * 0.5).powi(2))
                .sum::<f64>()
                / above.len() as f64
        })
        .collect();

    let mut best = 0;
    for (i, &e) in energy.iter().enumerate() {
        if e > energy[best] {
            best = i;
        }
    }
    let peak = energy[best];
    let mean = energy.iter().sum::<f64>() / energy.len() as f64;
    let confidence = if peak > 0.0 { ((peak - mean) / peak).clamp(0.0, 1.0) } else { 0.0 };
    Ok(HorizonEstimate {
        row: (lo + best) as f64,
        confidence,
    })
}

/// Soft Gaussian band around `row` with standard deviation `0.05·height`.
pub fn horizon_band(width: usize, height: usize, row: f64) -> Plane {
    let s = HORIZON_BAND * height as f64;
    Plane::from_fn(width, height, |_, y| {
        let d = y as f64 - row;
        (-(d * d) / (2.0 * s * s)).exp()
    })
}

/// Horizon channel; `override_row`, when given, replaces the estimate.
pub fn horizon_channel(img: &RgbImage, override_row: Option<f64>) -> Result<Plane> {
    let row = match override_row {
        Some(r) => {
            if !(r >= 0.0 && r < img.height() as f64) {
                return Err(Error::InvalidParameter(format!(
                    "horizon row {r} outside image of height {}",
                    img.height()
                )));
            }
            r
        }
        None => estimate_horizon(img)?.row,
    };
    Ok(horizon_band(img.width(), img.height(), row))
}

/// Face, person and car planes. Missing maps become zero planes and
/// values outside [0,1] are clamped.
pub fn detector_channels(
    width: usize,
    height: usize,
    maps: [Option<&Plane>; 3],
) -> Result<[Plane; 3]> {
    const NAMES: [&str; 3] = ["face", "person", "car"];
    let mut out: [Plane; 3] = std::array::from_fn(|_| Plane::zeros(width, height));
    for (i, m) in maps.iter().enumerate() {
        let Some(m) = m else { continue };
        if m.width() != width || m.height() != height {
            return Err(Error::DimensionMismatch {
                expected_width: width,
                expected_height: height,
                width: m.width(),
                height: m.height(),
            });
        }
        let clamped = m.values().iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
        if clamped > 0 {
            warn!("{} detector map: clamped {clamped} values into [0,1]", NAMES[i]);
        }
        out[i] = m.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
    }
    Ok(out)
}

/// `1 - d/d_max` where `d` is the distance to the image center and `d_max`
/// the distance from the center to a corner.
pub fn center_channel(width: usize, height: usize) -> Plane {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let d_max = (cx * cx + cy * cy).sqrt();
    Plane::from_fn(width, height, |x, y| {
        if d_max == 0.0 {
            return 1.0;
        }
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        (1.0 - (dx * dx + dy * dy).sqrt() / d_max).clamp(0.0, 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_finds_step_boundary() {
        let img = RgbImage::from_fn(80, 100, |_, y| if y < 50 { [0.0; 3] } else { [1.0; 3] }).unwrap();
        let est = estimate_horizon(&img).unwrap();
        assert!((est.row - 50.0).abs() <= 1.0, "row {}", est.row);
        assert!(est.confidence > 0.5);
    }

    #[test]
    fn horizon_band_values() {
        let plane = horizon_band(10, 100, 40.0);
        assert_eq!(plane.get(3, 40), 1.0);
        let expected = (-0.5f64).exp();
        assert!((plane.get(3, 45) - expected).abs() < 1e-12);
        assert!((expected - 0.6065).abs() < 1e-4);
        assert_eq!(plane.argmax().1, 40);
    }

    #[test]
    fn horizon_override_is_used() {
        let img = RgbImage::from_fn(64, 64, |_, _| [0.3; 3]).unwrap();
        let plane = horizon_channel(&img, Some(10.0)).unwrap();
        assert_eq!(plane.get(0, 10), 1.0);
        assert!(horizon_channel(&img, Some(64.0)).is_err());
    }

    #[test]
    fn detectors_default_to_zero_and_clamp() {
        let [f, p, c] = detector_channels(8, 8, [None, None, None]).unwrap();
        for plane in [f, p, c] {
            assert!(plane.values().iter().all(|&v| v == 0.0));
        }
        let mut face = Plane::zeros(8, 8);
        face.set(2, 2, 1.7);
        face.set(3, 2, 1.0);
        let [f, p, _] = detector_channels(8, 8, [Some(&face), None, None]).unwrap();
        assert_eq!(f.get(2, 2), 1.0);
        assert_eq!(f.get(3, 2), 1.0);
        assert!(p.values().iter().all(|&v| v == 0.0));
        let wrong = Plane::zeros(7, 8);
        assert!(matches!(
            detector_channels(8, 8, [None, Some(&wrong), None]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn detector_identity_on_valid_maps() {
        let face = Plane::from_fn(9, 9, |x, y| if (2..5).contains(&x) && (3..7).contains(&y) { 1.0 } else { 0.0 });
        let [f, _, _] = detector_channels(9, 9, [Some(&face), None, None]).unwrap();
        assert_eq!(f, face);
    }

    #[test]
    fn center_channel_values() {
        let p = center_channel(101, 101);
        assert_eq!(p.get(50, 50), 1.0);
        for (x, y) in [(0, 0), (100, 0), (0, 100), (100, 100)] {
            assert!(p.get(x, y).abs() < 1e-12);
        }
        let expected = 1.0 - 50.0 / (50.0 * 2f64.sqrt());
        assert!((p.get(0, 50) - expected).abs() < 1e-12);
        assert!((expected - 0.2929).abs() < 1e-4);
    }

    #[test]
    fn center_channel_mirror_symmetric() {
        for (w, h) in [(64, 48), (33, 71)] {
            let p = center_channel(w, h);
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(p.get(x, y), p.get(w - 1 - x, y));
                    assert_eq!(p.get(x, y), p.get(x, h - 1 - y));
                }
            }
        }
    }
}
