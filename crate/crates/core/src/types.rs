//! Domain types shared by every stage of the pipeline, plus the fixed
//! 34-channel feature registry.
//!
//! Coordinates are 0-based with `x` = column and `y` = row, origin at the
//! top-left corner. All planes are stored row-major.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Number of per-pixel feature channels.
pub const NUM_CHANNELS: usize = 34;

/// Smallest accepted image side.
pub const MIN_IMAGE_SIDE: usize = 32;

/// Below this span a plane is treated as constant by [`Plane::normalized`].
pub const CONSTANT_SPAN_EPS: f64 = 1e-9;

/// A single real-valued image plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "plane of {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Reads with coordinates clamped into the plane.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Affinely rescales to [0,1]. Constant planes (span below
    /// [`CONSTANT_SPAN_EPS`]) become all zeros.
    pub fn normalized(&self) -> Plane {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        if !(span > CONSTANT_SPAN_EPS) || !span.is_finite() {
            return Plane::zeros(self.width, self.height);
        }
        self.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the largest value; the first one in row-major order wins ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }
}

/// An RGB image with channel values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(Error::ImageTooSmall {
                width,
                height,
                min_width: MIN_IMAGE_SIDE,
                min_height: MIN_IMAGE_SIDE,
            });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels
            .iter()
            .flatten()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidImage(format!(
                "channel value {bad} outside [0,1]"
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn channel(&self, c: usize) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.pixels.iter().map(|p| p[c]).collect(),
        }
    }

    /// Luma plane `0.299 R + 0.587 G + 0.114 B`.
    pub fn luma(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self
                .pixels
                .iter()
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect(),
        }
    }

    pub fn ensure_min_size(&self, min_width: usize, min_height: usize) -> Result<()> {
        if self.width < min_width || self.height < min_height {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
                min_width,
                min_height,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationRecord {
    pub observer_id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    pub image_id: String,
    pub records: Vec<FixationRecord>,
}

/// A continuous per-pixel saliency map, ground truth or predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap(Plane);

impl SaliencyMap {
    /// Wraps a plane after min-max normalizing it.
    pub fn from_unnormalized(plane: &Plane) -> Self {
        SaliencyMap(plane.normalized())
    }

    /// Wraps a plane as-is; the caller guarantees the value range.
    pub fn from_plane(plane: Plane) -> Self {
        SaliencyMap(plane)
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }
}

impl Deref for SaliencyMap {
    type Target = Plane;

    fn deref(&self) -> &Plane {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelGroup {
    Pyramid,
    Itti,
    Color,
    ColorHist,
    Horizon,
    Detector,
    Center,
    Sift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelId {
    pub index: usize,
    pub group: ChannelGroup,
}

const REGISTRY: [(ChannelGroup, &str); NUM_CHANNELS] = [
    (ChannelGroup::Pyramid, "pyramid_s0_o0"),
    (ChannelGroup::Pyramid, "pyramid_s0_o45"),
    (ChannelGroup::Pyramid, "pyramid_s0_o90"),
    (ChannelGroup::Pyramid, "pyramid_s0_o135"),
    (ChannelGroup::Pyramid, "pyramid_s1_o0"),
    (ChannelGroup::Pyramid, "pyramid_s1_o45"),
    (ChannelGroup::Pyramid, "pyramid_s1_o90"),
    (ChannelGroup::Pyramid, "pyramid_s1_o135"),
    (ChannelGroup::Pyramid, "pyramid_s2_o0"),
    (ChannelGroup::Pyramid, "pyramid_s2_o45"),
    (ChannelGroup::Pyramid, "pyramid_s2_o90"),
    (ChannelGroup::Pyramid, "pyramid_s2_o135"),
    (ChannelGroup::Pyramid, "pyramid_lowpass"),
    (ChannelGroup::Itti, "itti_intensity"),
    (ChannelGroup::Itti, "itti_color"),
    (ChannelGroup::Itti, "itti_orientation"),
    (ChannelGroup::Color, "red"),
    (ChannelGroup::Color, "green"),
    (ChannelGroup::Color, "blue"),
    (ChannelGroup::Color, "red_probability"),
    (ChannelGroup::Color, "green_probability"),
    (ChannelGroup::Color, "blue_probability"),
    (ChannelGroup::ColorHist, "colorhist_r1"),
    (ChannelGroup::ColorHist, "colorhist_r2"),
    (ChannelGroup::ColorHist, "colorhist_r4"),
    (ChannelGroup::ColorHist, "colorhist_r8"),
    (ChannelGroup::ColorHist, "colorhist_r16"),
    (ChannelGroup::ColorHist, "colorhist_r32"),
    (ChannelGroup::Horizon, "horizon"),
    (ChannelGroup::Detector, "face"),
    (ChannelGroup::Detector, "person"),
    (ChannelGroup::Detector, "car"),
    (ChannelGroup::Center, "center_prior"),
    (ChannelGroup::Sift, "sift_density"),
];

/// Well-known channel indices.
pub mod channel {
    pub const PYRAMID_START: usize = 0;
    pub const PYRAMID_LOWPASS: usize = 12;
    pub const ITTI_START: usize = 13;
    pub const COLOR_START: usize = 16;
    pub const COLOR_PROB_START: usize = 19;
    pub const COLORHIST_START: usize = 22;
    pub const HORIZON: usize = 28;
    pub const FACE: usize = 29;
    pub const PERSON: usize = 30;
    pub const CAR: usize = 31;
    pub const CENTER: usize = 32;
    pub const SIFT: usize = 33;
}

/// The fixed channel layout, in index order.
pub fn channel_registry() -> Vec<(ChannelId, &'static str)> {
    REGISTRY
        .iter()
        .enumerate()
        .map(|(index, &(group, name))| (ChannelId { index, group }, name))
        .collect()
}

/// Per-pixel stack of exactly [`NUM_CHANNELS`] feature planes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    width: usize,
    height: usize,
    planes: Vec<Plane>,
}

impl FeatureStack {
    pub fn new(planes: Vec<Plane>) -> Result<Self> {
        if planes.len() != NUM_CHANNELS {
            return Err(Error::InvalidParameter(format!(
                "feature stack needs {NUM_CHANNELS} planes, got {}",
                planes.len()
            )));
        }
        let (width, height) = (planes[0].width(), planes[0].height());
        for p in &planes {
            if p.width() != width || p.height() != height {
                return Err(Error::DimensionMismatch {
                    expected_width: width,
                    expected_height: height,
                    width: p.width(),
                    height: p.height(),
                });
            }
            if !p.is_finite() {
                return Err(Error::InvalidParameter(
                    "feature plane contains non-finite values".into(),
                ));
            }
        }
        Ok(FeatureStack {
            width,
            height,
            planes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn plane(&self, channel: usize) -> &Plane {
        &self.planes[channel]
    }

    pub fn vector_at(&self, x: usize, y: usize) -> [f64; NUM_CHANNELS] {
        let idx = y * self.width + x;
        let mut out = [0.0; NUM_CHANNELS];
        for (o, p) in out.iter_mut().zip(&self.planes) {
            *o = p.values()[idx];
        }
        out
    }

    /// Returns a copy with one channel replaced by zeros.
    pub fn with_channel_zeroed(&self, channel: usize) -> FeatureStack {
        let mut planes = self.planes.clone();
        planes[channel] = Plane::zeros(self.width, self.height);
        FeatureStack {
            width: self.width,
            height: self.height,
            planes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(v: f64) -> Label {
        if v >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Label> {
        match v {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: [f64; NUM_CHANNELS],
    pub label: Label,
    pub image_id: String,
    pub x: usize,
    pub y: usize,
}

/// Dense row-major matrix of feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidParameter("ragged matrix rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_fixed_layout() {
        let reg = channel_registry();
        assert_eq!(reg.len(), 34);
        assert_eq!(reg[32].0.group, ChannelGroup::Center);
        assert_eq!(reg[33].0.group, ChannelGroup::Sift);
        assert_eq!(reg[12].0.group, ChannelGroup::Pyramid);
        assert_eq!(reg[28].0.group, ChannelGroup::Horizon);
        for (i, (id, _)) in reg.iter().enumerate() {
            assert_eq!(id.index, i);
        }
        let count = |g| reg.iter().filter(|(c, _)| c.group == g).count();
        assert_eq!(count(ChannelGroup::Pyramid), 13);
        assert_eq!(count(ChannelGroup::Itti), 3);
        assert_eq!(count(ChannelGroup::Color), 6);
        assert_eq!(count(ChannelGroup::ColorHist), 6);
        assert_eq!(count(ChannelGroup::Detector), 3);
        assert_eq!(channel_registry(), reg);
    }

    #[test]
    fn rgb_image_rejects_small_and_out_of_range() {
        assert!(matches!(
            RgbImage::new(16, 40, vec![[0.0; 3]; 640]),
            Err(Error::ImageTooSmall { .. })
        ));
        let mut px = vec![[0.5; 3]; 32 * 32];
        px[7][1] = 1.5;
        assert!(matches!(
            RgbImage::new(32, 32, px),
            Err(Error::InvalidImage(_))
        ));
    }

    #[test]
    fn constant_plane_normalizes_to_zero() {
        let p = Plane::filled(4, 3, 0.7);
        assert!(p.normalized().values().iter().all(|&v| v == 0.0));
        let q = Plane::from_fn(4, 1, |x, _| x as f64 * 2.0);
        assert_eq!(q.normalized().values(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn luma_weights() {
        let img = RgbImage::from_fn(32, 32, |_, _| [1.0, 0.0, 0.0]).unwrap();
        assert!((img.luma().get(3, 3) - 0.299).abs() < 1e-15);
    }

    #[test]
    fn feature_stack_requires_34_planes() {
        assert!(FeatureStack::new(vec![Plane::zeros(4, 4); 33]).is_err());
        let mut planes = vec![Plane::zeros(4, 4); 34];
        planes[5] = Plane::zeros(5, 4);
        assert!(matches!(
            FeatureStack::new(planes),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut planes = vec![Plane::zeros(4, 4); 34];
        planes[3].set(0, 0, f64::NAN);
        assert!(FeatureStack::new(planes).is_err());
    }
}
