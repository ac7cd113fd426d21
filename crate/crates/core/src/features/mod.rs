//! Per-pixel feature extraction and the `FSTK` feature-stack file format.

pub mod color;
pub mod filters;
pub mod itti;
pub mod steerable;

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::semantic::{center_channel, detector_channels, horizon_channel};
use crate::sift::{self, SiftParams};
use crate::types::{FeatureStack, Plane, RgbImage, NUM_CHANNELS};

pub use color::{color_value_channels, colorhist3d_probability, HistogramSpec};
pub use itti::itti_channels;
pub use steerable::{steerable_energy, PyramidSpec};

pub const FSTK_MAGIC: &[u8; 4] = b"FSTK";
pub const FSTK_VERSION: u16 = 1;

/// Everything needed to turn one image into a [`FeatureStack`].
#[derive(Debug, Clone, Default)]
pub struct ExtractOptions {
    pub pyramid: PyramidSpec,
    pub histogram: HistogramSpec,
    pub sift: SiftParams,
    /// Face, person and car maps; `None` means no detections.
    pub detectors: [Option<Plane>; 3],
    pub horizon_row: Option<f64>,
}

/// Computes all 34 channels in registry order.
pub fn extract_features(img: &RgbImage, opts: &ExtractOptions) -> Result<FeatureStack> {
    let (w, h) = (img.width(), img.height());
    let ((pyramid, itti), (hist, sift_plane)) = rayon::join(
        || rayon::join(|| steerable_energy(img, &opts.pyramid), || itti_channels(img)),
        || {
            rayon::join(
                || colorhist3d_probability(img, &opts.histogram),
                || -> Result<Plane> {
                    let kps = sift::keypoints(&img.luma(), &opts.sift)?;
                    sift::sift_density_channel(&kps, w, h, opts.sift.density_sigma_for(w, h))
                },
            )
        },
    );
    let detectors = detector_channels(
        w,
        h,
        [
            opts.detectors[0].as_ref(),
            opts.detectors[1].as_ref(),
            opts.detectors[2].as_ref(),
        ],
    )?;

    let mut planes = Vec::with_capacity(NUM_CHANNELS);
    planes.extend(pyramid?);
    planes.extend(itti?);
    planes.extend(color_value_channels(img));
    planes.extend(hist?);
    planes.push(horizon_channel(img, opts.horizon_row)?);
    planes.extend(detectors);
    planes.push(center_channel(w, h));
    planes.push(sift_plane?);
    FeatureStack::new(planes)
}

pub fn write_stack(out: &mut impl Write, stack: &FeatureStack) -> std::io::Result<()> {
    out.write_all(FSTK_MAGIC)?;
    out.write_all(&FSTK_VERSION.to_le_bytes())?;
    out.write_all(&(stack.width() as u32).to_le_bytes())?;
    out.write_all(&(stack.height() as u32).to_le_bytes())?;
    out.write_all(&(NUM_CHANNELS as u16).to_le_bytes())?;
    let mut buf = Vec::with_capacity(stack.width() * stack.height() * 4);
    for plane in stack.planes() {
        buf.clear();
        for &v in plane.values() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_stack(input: &mut impl Read) -> Result<FeatureStack> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::CorruptFile(e.to_string()))?;
    parse_stack(&bytes)
}

fn parse_stack(bytes: &[u8]) -> Result<FeatureStack> {
    const HEADER: usize = 4 + 2 + 4 + 4 + 2;
    if bytes.len() < HEADER || &bytes[..4] != FSTK_MAGIC {
        return Err(Error::CorruptFile("missing FSTK header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version > FSTK_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: FSTK_VERSION,
        });
    }
    let width = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let height = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
    let channels = u16::from_le_bytes([bytes[14], bytes[15]]) as usize;
    if channels != NUM_CHANNELS {
        return Err(Error::CorruptFile(format!("expected 34 channels, found {channels}")));
    }
    let n = width * height;
    if bytes.len() != HEADER + channels * n * 4 {
        return Err(Error::CorruptFile("feature stack payload has the wrong length".into()));
    }
    let planes = bytes[HEADER..]
        .chunks_exact(n * 4)
        .map(|chunk| {
            let data = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect();
            Plane::from_vec(width, height, data)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureStack::new(planes)
}

pub fn save_stack(path: &Path, stack: &FeatureStack) -> Result<()> {
    let mut buf = Vec::new();
    write_stack(&mut buf, stack).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_stack(path: &Path) -> Result<FeatureStack> {
    if !path.exists() {
        return Err(Error::MissingUpstream(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_stack(&bytes)
}
