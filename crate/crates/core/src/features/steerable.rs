//! Oriented local energy from a second-derivative-of-Gaussian steerable
//! basis applied over a dyadic pyramid.

use crate::error::{Error, Result};
use crate::features::filters::{convolve_separable, downsample_box2, gaussian_blur, resize_bilinear};
use crate::types::{Plane, RgbImage, MIN_IMAGE_SIDE};

/// Steering angles in degrees, in registry order.
pub const ORIENTATIONS_DEG: [f64; 4] = [0.0, 45.0, 90.0, 135.0];

/// Width of the second-derivative filter at every pyramid level.
pub const FILTER_SIGMA: f64 = 1.0;

/// Pre-decimation blur between pyramid levels.
pub const PYRAMID_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PyramidSpec {
    pub orientations: usize,
    pub scales: usize,
    pub include_lowpass: bool,
}

impl Default for PyramidSpec {
    fn default() -> Self {
        PyramidSpec {
            orientations: 4,
            scales: 3,
            include_lowpass: true,
        }
    }
}

/// The three separable basis kernels `(g, g', g'')` with `g''` and `g'`
/// forced to zero sum.
pub fn basis_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let r = (4.0 * sigma).ceil() as isize;
    let s2 = sigma * sigma;
    let g: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * s2)).exp())
        .collect();
    let z: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / z).collect();
    let d1: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(i, &gv)| -(i as f64) / s2 * gv)
        .collect();
    let mut d2: Vec<f64> = (-r..=r)
        .zip(&g)
        .map(|(i, &gv)| ((i * i) as f64 / (s2 * s2) - 1.0 / s2) * gv)
        .collect();
    let mean = d2.iter().sum::<f64>() / d2.len() as f64;
    d2.iter_mut().for_each(|v| *v -= mean);
    (g, d1, d2)
}

/// Responses of the three basis filters `(xx, xy, yy)`.
pub fn basis_responses(plane: &Plane, sigma: f64) -> (Plane, Plane, Plane) {
    let (g, d1, d2) = basis_kernels(sigma);
    let rxx = convolve_separable(plane, &d2, &g);
    let rxy = convolve_separable(plane, &d1, &d1);
    let ryy = convolve_separable(plane, &g, &d2);
    (rxx, rxy, ryy)
}

/// Steers the basis to angle `theta` (radians, 0 = responds to vertical
/// structure, i.e. variation along x).
pub fn steer(rxx: &Plane, rxy: &Plane, ryy: &Plane, theta: f64) -> Plane {
    let (c, s) = (theta.cos(), theta.sin());
    let (cc, cs, ss) = (c * c, 2.0 * c * s, s * s);
    let data = rxx
        .values()
        .iter()
        .zip(rxy.values())
        .zip(ryy.values())
        .map(|((&a, &b), &d)| cc * a + cs * b + ss * d)
        .collect();
    Plane::from_vec(rxx.width(), rxx.height(), data).expect("same dimensions")
}

/// Gaussian pyramid with `levels` levels; level 0 is the input.
pub fn gaussian_pyramid(base: &Plane, levels: usize, sigma: f64) -> Vec<Plane> {
    let mut out = Vec::with_capacity(levels);
    out.push(base.clone());
    for _ in 1..levels {
        let prev = out.last().expect("non-empty");
        out.push(downsample_box2(&gaussian_blur(prev, sigma)));
    }
    out
}

/// Squared oriented responses at every scale (scale-major, orientation
/// minor) followed by the squared low-pass residual, all upsampled to full
/// resolution and min-max normalized.
pub fn steerable_energy(img: &RgbImage, spec: &PyramidSpec) -> Result<Vec<Plane>> {
    img.ensure_min_size(MIN_IMAGE_SIDE, MIN_IMAGE_SIDE)?;
    if spec.orientations != 4 || spec.scales != 3 {
        return Err(Error::InvalidParameter(
            "pyramid must use 4 orientations and 3 scales".into(),
        ));
    }
    Ok(steerable_energy_luma(&img.luma(), spec))
}

pub(crate) fn steerable_energy_luma(luma: &Plane, spec: &PyramidSpec) -> Vec<Plane> {
    let (w, h) = (luma.width(), luma.height());
    let pyramid = gaussian_pyramid(luma, spec.scales + 1, PYRAMID_SIGMA);
    let mut planes = Vec::with_capacity(spec.scales * spec.orientations + 1);
    for level in pyramid.iter().take(spec.scales) {
        let (rxx, rxy, ryy) = basis_responses(level, FILTER_SIGMA);
        for k in 0..spec.orientations {
            let theta = std::f64::consts::PI * k as f64 / spec.orientations as f64;
            let energy = steer(&rxx, &rxy, &ryy, theta).map(|v| v * v);
            planes.push(resize_bilinear(&energy, w, h).normalized());
        }
    }
    if spec.include_lowpass {
        let residual = gaussian_blur(&pyramid[spec.scales], PYRAMID_SIGMA).map(|v| v * v);
        planes.push(resize_bilinear(&residual, w, h).normalized());
    }
    planes
}
