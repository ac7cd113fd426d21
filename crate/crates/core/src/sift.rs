//! Scale-space keypoint localization (difference-of-Gaussians extrema with
//! sub-pixel refinement, contrast and edge rejection) and the keypoint
//! density channel built from it. No orientations or descriptors.

use crate::error::{Error, Result};
use crate::features::filters::{decimate2, gaussian_blur, splat_gaussians};
use crate::types::{Plane, MIN_IMAGE_SIDE};

/// Smallest side an octave may have and still be searched.
const MIN_OCTAVE_SIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiftParams {
    pub octaves: usize,
    pub scales_per_octave: usize,
    pub base_sigma: f64,
    pub contrast_threshold: f64,
    pub edge_ratio: f64,
    /// `None` means `0.02 · max(width, height)`.
    pub density_sigma: Option<f64>,
}

impl Default for SiftParams {
    fn default() -> Self {
        SiftParams {
            octaves: 4,
            scales_per_octave: 3,
            base_sigma: 1.6,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            density_sigma: None,
        }
    }
}

impl SiftParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.octaves >= 1
            && self.scales_per_octave >= 2
            && self.base_sigma > 0.0
            && self.contrast_threshold > 0.0
            && self.edge_ratio > 0.0
            && self.density_sigma.is_none_or(|s| s > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid SIFT parameters {self:?}")))
        }
    }

    pub fn density_sigma_for(&self, width: usize, height: usize) -> f64 {
        self.density_sigma
            .unwrap_or_else(|| 0.02 * width.max(height) as f64)
    }

    /// Blur of Gaussian level `i` relative to its octave's resolution.
    pub fn level_sigma(&self, i: usize) -> f64 {
        self.base_sigma * 2f64.powf(i as f64 / self.scales_per_octave as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Octave {
    pub gaussians: Vec<Plane>,
    pub dogs: Vec<Plane>,
}

#[derive(Debug, Clone)]
pub struct DogPyramid {
    pub octaves: Vec<Octave>,
    pub params: SiftParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub contrast: f64,
}

/// Builds `scales_per_octave + 2` Gaussian levels per octave and their
/// `scales_per_octave + 1` adjacent differences. Octave 0 blurs the input
/// directly with each level's sigma; later octaves start from level
/// `scales_per_octave` of the previous octave decimated by two.
pub fn dog_pyramid(luma: &Plane, p: &SiftParams) -> Result<DogPyramid> {
    p.validate()?;
    if luma.width() < MIN_IMAGE_SIDE || luma.height() < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            width: luma.width(),
            height: luma.height(),
            min_width: MIN_IMAGE_SIDE,
            min_height: MIN_IMAGE_SIDE,
        });
    }
    let levels = p.scales_per_octave + 2;
    let mut octaves: Vec<Octave> = Vec::with_capacity(p.octaves);
    for o in 0..p.octaves {
        let gaussians: Vec<Plane> = if o == 0 {
            (0..levels).map(|i| gaussian_blur(luma, p.level_sigma(i))).collect()
        } else {
            let prev = &octaves[o - 1].gaussians[p.scales_per_octave];
            if prev.width().div_ceil(2) < MIN_OCTAVE_SIDE || prev.height().div_ceil(2) < MIN_OCTAVE_SIDE {
                break;
            }
            let base = decimate2(prev);
            let s0 = p.base_sigma;
            let mut g = Vec::with_capacity(levels);
            g.push(base.clone());
            for i in 1..levels {
                let si = p.level_sigma(i);
                g.push(gaussian_blur(&base, (si * si - s0 * s0).sqrt()));
            }
            g
        };
        let dogs = gaussians
            .windows(2)
            .map(|w| {
                let data = w[1]
                    .values()
                    .iter()
                    .zip(w[0].values())
                    .map(|(a, b)| a - b)
                    .collect();
                Plane::from_vec(w[0].width(), w[0].height(), data).expect("dims")
            })
            .collect();
        octaves.push(Octave { gaussians, dogs });
    }
    Ok(DogPyramid {
        octaves,
        params: *p,
    })
}

fn is_strict_extremum(dogs: &[Plane], s: usize, x: usize, y: usize) -> bool {
    let v = dogs[s].get(x, y);
    let mut greater = true;
    let mut smaller = true;
    for plane in &dogs[s - 1..=s + 1] {
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                if std::ptr::eq(plane, &dogs[s]) && nx == x && ny == y {
                    continue;
                }
                let n = plane.get(nx, ny);
                greater &= v > n;
                smaller &= v < n;
                if !greater && !smaller {
                    return false;
                }
            }
        }
    }
    greater || smaller
}

/// Solves the 3x3 system `h · x = b`; `None` when singular.
fn solve3(h: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
        - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    if det.abs() < 1e-15 {
        return None;
    }
    let col = |k: usize| {
        let mut m = h;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    Some([col(0) / det, col(1) / det, col(2) / det])
}

/// Ratio `tr² / det` of the 2x2 spatial Hessian at `(x, y)`; `None` when
/// the determinant is not positive.
pub fn curvature_ratio(dog: &Plane, x: usize, y: usize) -> Option<f64> {
    let v = dog.get(x, y);
    let dxx = dog.get(x + 1, y) + dog.get(x - 1, y) - 2.0 * v;
    let dyy = dog.get(x, y + 1) + dog.get(x, y - 1) - 2.0 * v;
    let dxy = (dog.get(x + 1, y + 1) - dog.get(x + 1, y - 1) - dog.get(x - 1, y + 1)
        + dog.get(x - 1, y - 1))
        / 4.0;
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    if det <= 0.0 {
        None
    } else {
        Some(tr * tr / det)
    }
}

/// Strict 3x3x3 extrema of the inner DoG levels, refined once, filtered by
/// contrast and edge response, in full-resolution coordinates.
pub fn detect_keypoints(pyr: &DogPyramid) -> Vec<Keypoint> {
    let p = &pyr.params;
    let edge_limit = (p.edge_ratio + 1.0).powi(2) / p.edge_ratio;
    let mut out = Vec::new();
    for (o, octave) in pyr.octaves.iter().enumerate() {
        let dogs = &octave.dogs;
        let (w, h) = (dogs[0].width(), dogs[0].height());
        if w < 3 || h < 3 {
            continue;
        }
        let factor = 2f64.powi(o as i32);
        for s in 1..dogs.len() - 1 {
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let v = dogs[s].get(x, y);
                    if v.abs() < 0.5 * p.contrast_threshold {
                        continue;
                    }
                    if !is_strict_extremum(dogs, s, x, y) {
                        continue;
                    }
                    let d = |ds: isize, dx: isize, dy: isize| {
                        dogs[(s as isize + ds) as usize]
                            .get((x as isize + dx) as usize, (y as isize + dy) as usize)
                    };
                    let g = [
                        (d(0, 1, 0) - d(0, -1, 0)) / 2.0,
                        (d(0, 0, 1) - d(0, 0, -1)) / 2.0,
                        (d(1, 0, 0) - d(-1, 0, 0)) / 2.0,
                    ];
                    let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * v;
                    let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * v;
                    let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * v;
                    let dxy = (d(0, 1, 1) - d(0, 1, -1) - d(0, -1, 1) + d(0, -1, -1)) / 4.0;
                    let dxs = (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0)) / 4.0;
                    let dys = (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1)) / 4.0;
                    let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
                    let offset = solve3(hess, [-g[0], -g[1], -g[2]])
                        .map(|o| o.map(|c| c.clamp(-0.5, 0.5)))
                        .unwrap_or([0.0; 3]);
                    let contrast = v + 0.5 * (g[0] * offset[0] + g[1] * offset[1] + g[2] * offset[2]);
                    if contrast.abs() < p.contrast_threshold {
                        continue;
                    }
                    match curvature_ratio(&dogs[s], x, y) {
                        Some(r) if r < edge_limit => {}
                        _ => continue,
                    }
                    let scale = p.base_sigma
                        * factor
                        * 2f64.powf((s as f64 + offset[2]) / p.scales_per_octave as f64);
                    out.push(Keypoint {
                        x: (x as f64 + offset[0]) * factor,
                        y: (y as f64 + offset[1]) * factor,
                        scale,
                        contrast,
                    });
                }
            }
        }
    }
    out
}

/// Convenience: pyramid plus detection on a luma plane.
pub fn keypoints(luma: &Plane, p: &SiftParams) -> Result<Vec<Keypoint>> {
    Ok(detect_keypoints(&dog_pyramid(luma, p)?))
}

/// Gaussian density of keypoint positions, min-max normalized.
pub fn sift_density_channel(kps: &[Keypoint], width: usize, height: usize, density_sigma: f64) -> Result<Plane> {
    if !(density_sigma > 0.0) {
        return Err(Error::InvalidParameter("density_sigma must be positive".into()));
    }
    Ok(splat_gaussians(width, height, kps.iter().map(|k| (k.x, k.y)), density_sigma).normalized())
}

/// Writes keypoints as CSV rows `image_id,x,y,scale,contrast` (with header).
pub fn write_keypoints_csv(out: &mut impl std::io::Write, image_id: &str, kps: &[Keypoint]) -> std::io::Result<()> {
    writeln!(out, "image_id,x,y,scale,contrast")?;
    for k in kps {
        writeln!(out, "{image_id},{},{},{},{}", k.x, k.y, k.scale, k.contrast)?;
    }
    Ok(())
}
