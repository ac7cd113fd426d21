//! Intensity, color-opponency and orientation conspicuity maps built from
//! center-surround differences over a nine-level Gaussian pyramid.

use crate::error::Result;
use crate::features::filters::{convolve_2d, resize_bilinear};
use crate::features::steerable::gaussian_pyramid;
use crate::types::{Plane, RgbImage};

pub const MIN_SIDE: usize = 64;
pub const CENTER_LEVELS: [usize; 3] = [2, 3, 4];
pub const SURROUND_DELTAS: [usize; 2] = [3, 4];
const LEVELS: usize = 9;
const SUM_LEVEL: usize = 4;
/// Local maxima below this fraction of the global maximum are ignored.
const LOCAL_MAX_FLOOR: f64 = 0.1;

const GABOR_SIGMA: f64 = 2.0;
const GABOR_WAVELENGTH: f64 = 5.0;

/// Map normalization: rescale to [0,1], then weight by `(1 - m)²` where `m`
/// is the mean of the local maxima other than the global one.
pub fn normalize_map(map: &Plane) -> Plane {
    let scaled = map.normalized();
    let (w, h) = (scaled.width(), scaled.height());
    if scaled.values().iter().all(|&v| v == 0.0) {
        return scaled;
    }
    let mut maxima = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = scaled.get(x, y);
            if v < LOCAL_MAX_FLOOR {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    if scaled.get(nx as usize, ny as usize) > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                maxima.push(v);
            }
        }
    }
    // Drop one instance of the global maximum.
    if let Some(pos) = maxima.iter().position(|&v| v == 1.0) {
        maxima.swap_remove(pos);
    }
    let mean = if maxima.is_empty() {
        0.0
    } else {
        maxima.iter().sum::<f64>() / maxima.len() as f64
    };
    let weight = (1.0 - mean).powi(2);
    scaled.map(|v| v * weight)
}

fn gabor_kernel(theta: f64) -> (Vec<f64>, usize) {
    let r = (3.0 * GABOR_SIGMA).ceil() as isize;
    let size = (2 * r + 1) as usize;
    let (c, s) = (theta.cos(), theta.sin());
    let mut k = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            let (xf, yf) = (x as f64, y as f64);
            let along = xf * c + yf * s;
            let env = (-(xf * xf + yf * yf) / (2.0 * GABOR_SIGMA * GABOR_SIGMA)).exp();
            k.push(env * (2.0 * std::f64::consts::PI * along / GABOR_WAVELENGTH).cos());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    (k, size)
}

fn center_surround(pyr: &[Plane]) -> Vec<Plane> {
    let mut maps = Vec::new();
    for &c in &CENTER_LEVELS {
        for &d in &SURROUND_DELTAS {
            let s = c + d;
            let center = &pyr[c];
            let surround = resize_bilinear(&pyr[s], center.width(), center.height());
            let data = center
                .values()
                .iter()
                .zip(surround.values())
                .map(|(a, b)| (a - b).abs())
                .collect();
            maps.push(Plane::from_vec(center.width(), center.height(), data).expect("dims"));
        }
    }
    maps
}

fn across_scale_sum(maps: impl IntoIterator<Item = Plane>, w: usize, h: usize) -> Plane {
    let mut acc = Plane::zeros(w, h);
    for m in maps {
        let r = resize_bilinear(&m, w, h);
        for (a, b) in acc.values_mut().iter_mut().zip(r.values()) {
            *a += b;
        }
    }
    acc
}

fn add(a: &Plane, b: &Plane) -> Plane {
    let data = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
    Plane::from_vec(a.width(), a.height(), data).expect("dims")
}

/// Returns `[intensity, color, orientation]` conspicuity planes at full
/// resolution, each in [0,1].
pub fn itti_channels(img: &RgbImage) -> Result<[Plane; 3]> {
    img.ensure_min_size(MIN_SIDE, MIN_SIDE)?;
    let (w, h) = (img.width(), img.height());

    let intensity = img.luma();
    let rg = Plane::from_fn(w, h, |x, y| {
        let [r, g, _] = img.get(x, y);
        r - g
    });
    let by = Plane::from_fn(w, h, |x, y| {
        let [r, g, b] = img.get(x, y);
        b - 0.5 * (r + g)
    });

    let i_pyr = gaussian_pyramid(&intensity, LEVELS, 1.0);
    let rg_pyr = gaussian_pyramid(&rg, LEVELS, 1.0);
    let by_pyr = gaussian_pyramid(&by, LEVELS, 1.0);
    let (sw, sh) = (i_pyr[SUM_LEVEL].width(), i_pyr[SUM_LEVEL].height());

    let i_bar = across_scale_sum(center_surround(&i_pyr).iter().map(normalize_map), sw, sh);

    let rg_cs = center_surround(&rg_pyr);
    let by_cs = center_surround(&by_pyr);
    let c_bar = across_scale_sum(
        rg_cs
            .iter()
            .zip(&by_cs)
            .map(|(a, b)| add(&normalize_map(a), &normalize_map(b))),
        sw,
        sh,
    );

    let mut o_bar = Plane::zeros(sw, sh);
    for k in 0..4 {
        let theta = std::f64::consts::PI * k as f64 / 4.0;
        let (kernel, size) = gabor_kernel(theta);
        let o_pyr: Vec<Plane> = i_pyr
            .iter()
            .map(|level| convolve_2d(level, &kernel, size).map(f64::abs))
            .collect();
        let per_theta = across_scale_sum(center_surround(&o_pyr).iter().map(normalize_map), sw, sh);
        o_bar = add(&o_bar, &normalize_map(&per_theta));
    }

    let finish = |p: &Plane| resize_bilinear(&normalize_map(p), w, h).normalized();
    Ok([finish(&i_bar), finish(&c_bar), finish(&o_bar)])
}
