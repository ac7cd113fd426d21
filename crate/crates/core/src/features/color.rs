//! Color value channels, their marginal probabilities, and joint color
//! histogram probabilities after median filtering at several scales.

use crate::error::{Error, Result};
use crate::types::{Plane, RgbImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramSpec {
    pub bins_per_axis: usize,
    pub median_radii: [usize; 6],
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            bins_per_axis: 8,
            median_radii: [1, 2, 4, 8, 16, 32],
        }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins_per_axis == 0 {
            return Err(Error::InvalidParameter("bins_per_axis must be >= 1".into()));
        }
        if self.median_radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "median radii must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// 8-bit level of a [0,1] value.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// `[R, G, B, P(R), P(G), P(B)]` where `P(c)` is the share of pixels whose
/// 8-bit level in channel `c` equals this pixel's.
pub fn color_value_channels(img: &RgbImage) -> [Plane; 6] {
    let n = (img.width() * img.height()) as f64;
    let value = |c: usize| img.channel(c);
    let probability = |c: usize| {
        let mut counts = [0usize; 256];
        for p in img.pixels() {
            counts[quantize_u8(p[c]) as usize] += 1;
        }
        Plane::from_fn(img.width(), img.height(), |x, y| {
            counts[quantize_u8(img.get(x, y)[c]) as usize] as f64 / n
        })
    };
    [
        value(0),
        value(1),
        value(2),
        probability(0),
        probability(1),
        probability(2),
    ]
}

/// Median over a `(2r+1)²` window with clamped borders, computed on 8-bit
/// levels with a sliding histogram. Returns levels.
pub fn median_filter_u8(levels: &[u8], width: usize, height: usize, radius: usize) -> Vec<u8> {
    let r = radius as isize;
    let clamp_x = |x: isize| x.clamp(0, width as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, height as isize - 1) as usize;
    let window = ((2 * radius + 1) * (2 * radius + 1)) as u32;
    let rank = window / 2 + 1;
    let mut out = vec![0u8; width * height];

    for y in 0..height {
        let rows: Vec<usize> = (-r..=r).map(|dy| clamp_y(y as isize + dy)).collect();
        let mut hist = [0u32; 256];
        for dx in -r..=r {
            let sx = clamp_x(dx);
            for &sy in &rows {
                hist[levels[sy * width + sx] as usize] += 1;
            }
        }
        for x in 0..width {
            if x > 0 {
                let gone = clamp_x(x as isize - 1 - r);
                let added = clamp_x(x as isize + r);
                for &sy in &rows {
                    hist[levels[sy * width + gone] as usize] -= 1;
                    hist[levels[sy * width + added] as usize] += 1;
                }
            }
            let mut acc = 0;
            for (level, &count) in hist.iter().enumerate() {
                acc += count;
                if acc >= rank {
                    out[y * width + x] = level as u8;
                    break;
                }
            }
        }
    }
    out
}

/// Joint-histogram bin of a pixel given its three 8-bit channel levels.
#[inline]
pub fn joint_bin(levels: [u8; 3], bins: usize) -> usize {
    let axis = |l: u8| ((l as f64 / 255.0 * bins as f64).floor() as usize).min(bins - 1);
    (axis(levels[0]) * bins + axis(levels[1])) * bins + axis(levels[2])
}

/// Per-pixel probability of its joint color bin after median filtering with
/// `radius`; not yet normalized.
pub fn colorhist3d_raw(img: &RgbImage, radius: usize, bins: usize) -> Plane {
    let (w, h) = (img.width(), img.height());
    let filtered: Vec<Vec<u8>> = (0..3)
        .map(|c| {
            let levels: Vec<u8> = img.pixels().iter().map(|p| quantize_u8(p[c])).collect();
            median_filter_u8(&levels, w, h, radius)
        })
        .collect();
    let bin_of = |i: usize| joint_bin([filtered[0][i], filtered[1][i], filtered[2][i]], bins);
    let mut counts = vec![0usize; bins * bins * bins];
    for i in 0..w * h {
        counts[bin_of(i)] += 1;
    }
    let n = (w * h) as f64;
    let data = (0..w * h).map(|i| counts[bin_of(i)] as f64 / n).collect();
    Plane::from_vec(w, h, data).expect("dims")
}

/// One min-max normalized plane per median radius.
pub fn colorhist3d_probability(img: &RgbImage, spec: &HistogramSpec) -> Result<[Plane; 6]> {
    spec.validate()?;
    Ok(spec
        .median_radii
        .map(|r| colorhist3d_raw(img, r, spec.bins_per_axis).normalized()))
}
