//! Low-level filtering helpers. Every filter reads outside the plane by
//! clamping to the nearest edge pixel.

use crate::types::Plane;

/// Sampled Gaussian with radius `ceil(4σ)`, normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves rows with `kx` and columns with `ky`. Both kernels have odd
/// length and are centered.
pub fn convolve_separable(plane: &Plane, kx: &[f64], ky: &[f64]) -> Plane {
    let (w, h) = (plane.width(), plane.height());
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = plane.row(y);
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                let sx = (x as isize + i as isize - rx).clamp(0, w as isize - 1) as usize;
                acc += k * row[sx];
            }
            tmp[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (i, &k) in ky.iter().enumerate() {
            let sy = (y as isize + i as isize - ry).clamp(0, h as isize - 1) as usize;
            let src = &tmp[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }
    Plane::from_vec(w, h, out).expect("dimensions preserved")
}

pub fn gaussian_blur(plane: &Plane, sigma: f64) -> Plane {
    let k = gaussian_kernel(sigma);
    convolve_separable(plane, &k, &k)
}

/// Direct (non-separable) 2-D convolution with a square odd-sized kernel
/// given row-major.
pub fn convolve_2d(plane: &Plane, kernel: &[f64], size: usize) -> Plane {
    assert_eq!(kernel.len(), size * size);
    let r = (size / 2) as isize;
    Plane::from_fn(plane.width(), plane.height(), |x, y| {
        let mut acc = 0.0;
        for ky in 0..size {
            for kx in 0..size {
                let sx = x as isize + kx as isize - r;
                let sy = y as isize + ky as isize - r;
                acc += kernel[ky * size + kx] * plane.get_clamped(sx, sy);
            }
        }
        acc
    })
}

/// Halves each dimension (rounding up) by averaging 2x2 blocks. Blocks
/// cut by an odd edge average the pixels they contain.
pub fn downsample_box2(plane: &Plane) -> Plane {
    let (w, h) = (plane.width(), plane.height());
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    Plane::from_fn(nw, nh, |x, y| {
        let mut acc = 0.0;
        let mut n = 0.0;
        for sy in 2 * y..(2 * y + 2).min(h) {
            for sx in 2 * x..(2 * x + 2).min(w) {
                acc += plane.get(sx, sy);
                n += 1.0;
            }
        }
        acc / n
    })
}

/// Keeps every other pixel starting at (0,0); output is `ceil(w/2) x ceil(h/2)`.
pub fn decimate2(plane: &Plane) -> Plane {
    let (nw, nh) = (plane.width().div_ceil(2), plane.height().div_ceil(2));
    Plane::from_fn(nw, nh, |x, y| plane.get(2 * x, 2 * y))
}

/// Pixel-center aligned bilinear resize.
pub fn resize_bilinear(plane: &Plane, width: usize, height: usize) -> Plane {
    if plane.width() == width && plane.height() == height {
        return plane.clone();
    }
    let sx = plane.width() as f64 / width as f64;
    let sy = plane.height() as f64 / height as f64;
    let max_x = (plane.width() - 1) as f64;
    let max_y = (plane.height() - 1) as f64;
    Plane::from_fn(width, height, |x, y| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        sample_bilinear(plane, fx, fy)
    })
}

#[inline]
pub fn sample_bilinear(plane: &Plane, fx: f64, fy: f64) -> f64 {
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(plane.width() - 1);
    let y1 = (y0 + 1).min(plane.height() - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    let top = plane.get(x0, y0) * (1.0 - tx) + plane.get(x1, y0) * tx;
    let bottom = plane.get(x0, y1) * (1.0 - tx) + plane.get(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Sum of isotropic Gaussians `exp(-d²/2σ²)` centered at `points`,
/// truncated to the square window of half-width 3σ, sampled on the pixel
/// grid.
pub fn splat_gaussians(
    width: usize,
    height: usize,
    points: impl IntoIterator<Item = (f64, f64)>,
    sigma: f64,
) -> Plane {
    let mut plane = Plane::zeros(width, height);
    let cutoff = 3.0 * sigma;
    let inv = 1.0 / (2.0 * sigma * sigma);
    for (px, py) in points {
        let x_lo = (px - cutoff).ceil().max(0.0) as usize;
        let y_lo = (py - cutoff).ceil().max(0.0) as usize;
        let x_hi = ((px + cutoff).floor() as isize).min(width as isize - 1);
        let y_hi = ((py + cutoff).floor() as isize).min(height as isize - 1);
        if x_hi < 0 || y_hi < 0 {
            continue;
        }
        for y in y_lo..=y_hi as usize {
            for x in x_lo..=x_hi as usize {
                let dx = x as f64 - px;
                let dy = y as f64 - py;
                let v = plane.get(x, y) + (-(dx * dx + dy * dy) * inv).exp();
                plane.set(x, y, v);
            }
        }
    }
    plane
}
