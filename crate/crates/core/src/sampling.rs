//! Per-image selection of strongly positive and strongly negative pixels,
//! matrix assembly, min-max normalization and the sample file formats.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rand::seq::index::sample as sample_indices;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};
use crate::types::{FeatureStack, Label, LabeledSample, Matrix, SaliencyMap, NUM_CHANNELS};

pub const SMPL_MAGIC: &[u8; 4] = b"SMPL";
pub const SMPL_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub pos_per_image: usize,
    pub neg_per_image: usize,
    pub pos_percentile: f64,
    pub neg_percentile: f64,
    pub border_margin: usize,
    pub rng_seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            pos_per_image: 10,
            neg_per_image: 10,
            pos_percentile: 0.05,
            neg_percentile: 0.30,
            border_margin: 10,
            rng_seed: 0,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.pos_percentile >= 0.0
            && self.neg_percentile >= 0.0
            && self.pos_percentile + self.neg_percentile <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "percentiles {} + {} must lie in [0,1]",
                self.pos_percentile, self.neg_percentile
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub width: usize,
    pub height: usize,
    pub pos: Vec<bool>,
    pub neg: Vec<bool>,
}

impl RegionMasks {
    pub fn pos_count(&self) -> usize {
        self.pos.iter().filter(|&&b| b).count()
    }

    pub fn neg_count(&self) -> usize {
        self.neg.iter().filter(|&&b| b).count()
    }
}

/// Ranks pixels by saliency, descending, ties in row-major order. The first
/// `⌊p·N⌋` ranks are positive and the last `⌊q·N⌋` negative.
pub fn percentile_regions(gt: &SaliencyMap, spec: &SamplingSpec) -> Result<RegionMasks> {
    spec.validate()?;
    let values = gt.values();
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let n_pos = (spec.pos_percentile * n as f64).floor() as usize;
    let n_neg = (spec.neg_percentile * n as f64).floor() as usize;
    let mut pos = vec![false; n];
    let mut neg = vec![false; n];
    for &i in &order[..n_pos] {
        pos[i] = true;
    }
    for &i in &order[n - n_neg..] {
        neg[i] = true;
    }
    Ok(RegionMasks {
        width: gt.width(),
        height: gt.height(),
        pos,
        neg,
    })
}

/// Summed-area table of a mask, `(w+1)·(h+1)` entries.
fn integral(mask: &[bool], w: usize, h: usize) -> Vec<u32> {
    let mut s = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0;
        for x in 0..w {
            row += mask[y * w + x] as u32;
            s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
        }
    }
    s
}

fn any_within(sat: &[u32], w: usize, h: usize, x: usize, y: usize, r: usize) -> bool {
    let x0 = x.saturating_sub(r);
    let y0 = y.saturating_sub(r);
    let x1 = (x + r + 1).min(w);
    let y1 = (y + r + 1).min(h);
    let at = |xx: usize, yy: usize| sat[yy * (w + 1) + xx];
    at(x1, y1) + at(x0, y0) - at(x0, y1) - at(x1, y0) > 0
}

/// Pixels of `mask` at least `margin` away from every edge and more than
/// `margin` (Chebyshev) from any pixel of `opposite`.
pub fn eligible_pixels(mask: &[bool], opposite: &[bool], w: usize, h: usize, margin: usize) -> Vec<usize> {
    let sat = integral(opposite, w, h);
    let mut out = Vec::new();
    if w <= 2 * margin || h <= 2 * margin {
        return out;
    }
    for y in margin..h - margin {
        for x in margin..w - margin {
            let i = y * w + x;
            if mask[i] && !any_within(&sat, w, h, x, y, margin) {
                out.push(i);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawOutcome {
    pub samples: Vec<LabeledSample>,
    /// Requested minus delivered, per class.
    pub pos_shortfall: usize,
    pub neg_shortfall: usize,
}

/// Draws positives then negatives without replacement. The PRNG is seeded
/// from `spec.rng_seed` and the image id.
pub fn draw_samples(
    stack: &FeatureStack,
    masks: &RegionMasks,
    spec: &SamplingSpec,
    image_id: &str,
) -> Result<DrawOutcome> {
    let (w, h) = (stack.width(), stack.height());
    if masks.width != w || masks.height != h {
        return Err(Error::DimensionMismatch {
            expected_width: w,
            expected_height: h,
            width: masks.width,
            height: masks.height,
        });
    }
    let mut rng = rng(derive_seed(spec.rng_seed, image_id));
    let mut samples = Vec::with_capacity(spec.pos_per_image + spec.neg_per_image);
    let mut shortfall = [0usize; 2];
    let classes = [
        (&masks.pos, &masks.neg, spec.pos_per_image, Label::Positive),
        (&masks.neg, &masks.pos, spec.neg_per_image, Label::Negative),
    ];
    for (k, (mask, opposite, wanted, label)) in classes.into_iter().enumerate() {
        let eligible = eligible_pixels(mask, opposite, w, h, spec.border_margin);
        let chosen: Vec<usize> = if eligible.len() <= wanted {
            eligible
        } else {
            sample_indices(&mut rng, eligible.len(), wanted)
                .into_iter()
                .map(|j| eligible[j])
                .collect()
        };
        shortfall[k] = wanted - chosen.len();
        for i in chosen {
            let (x, y) = (i % w, i / w);
            samples.push(LabeledSample {
                features: stack.vector_at(x, y),
                label,
                image_id: image_id.to_string(),
                x,
                y,
            });
        }
    }
    if shortfall.iter().any(|&s| s > 0) {
        warn!(
            "image {image_id}: sampling shortfall ({} positive, {} negative)",
            shortfall[0], shortfall[1]
        );
    }
    Ok(DrawOutcome {
        samples,
        pos_shortfall: shortfall[0],
        neg_shortfall: shortfall[1],
    })
}

pub fn assemble_matrix(samples: &[LabeledSample]) -> Result<(Matrix, Vec<Label>)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut data = Vec::with_capacity(samples.len() * NUM_CHANNELS);
    for s in samples {
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature in sample {}@({},{})",
                s.image_id, s.x, s.y
            )));
        }
        data.extend_from_slice(&s.features);
    }
    let labels = samples.iter().map(|s| s.label).collect();
    Ok((Matrix::new(samples.len(), NUM_CHANNELS, data)?, labels))
}

/// Per-column min and max of a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationStats {
    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn apply_value(&self, j: usize, v: f64) -> f64 {
        let span = self.maxs[j] - self.mins[j];
        if span > 0.0 {
            ((v - self.mins[j]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| self.apply_value(j, v))
            .collect()
    }
}

pub fn fit_normalizer(matrix: &Matrix) -> NormalizationStats {
    let d = matrix.cols();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for row in matrix.iter_rows() {
        for j in 0..d {
            mins[j] = mins[j].min(row[j]);
            maxs[j] = maxs[j].max(row[j]);
        }
    }
    if matrix.rows() == 0 {
        mins.fill(0.0);
        maxs.fill(0.0);
    }
    NormalizationStats { mins, maxs }
}

pub fn apply_normalizer(stats: &NormalizationStats, matrix: &Matrix) -> Matrix {
    let mut out = matrix.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = stats.apply_value(j, *v);
        }
    }
    out
}

/// Binary sample matrix: magic, version u16, n u32, dim u16, then per row
/// `dim` little-endian f32 followed by an i8 label.
pub fn write_smpl(matrix: &Matrix, labels: &[Label]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + matrix.rows() * (matrix.cols() * 4 + 1));
    buf.extend_from_slice(SMPL_MAGIC);
    buf.extend_from_slice(&SMPL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(matrix.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(matrix.cols() as u16).to_le_bytes());
    for (row, label) in matrix.iter_rows().zip(labels) {
        for &v in row {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf.push(label.as_i8() as u8);
    }
    buf
}

pub fn read_smpl(bytes: &[u8]) -> Result<(Matrix, Vec<Label>)> {
    const HEADER: usize = 12;
    if bytes.len() < HEADER || &bytes[..4] != SMPL_MAGIC {
        return Err(Error::CorruptFile("missing SMPL header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version > SMPL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: SMPL_VERSION,
        });
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let d = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
    let stride = d * 4 + 1;
    if bytes.len() != HEADER + n * stride {
        return Err(Error::CorruptFile("sample payload has the wrong length".into()));
    }
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for rec in bytes[HEADER..].chunks_exact(stride) {
        for b in rec[..d * 4].chunks_exact(4) {
            data.push(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64);
        }
        let l = rec[d * 4] as i8;
        labels.push(Label::from_i8(l).ok_or_else(|| Error::CorruptFile(format!("bad label {l}")))?);
    }
    Ok((Matrix::new(n, d, data)?, labels))
}

pub fn save_smpl(path: &Path, matrix: &Matrix, labels: &[Label]) -> Result<()> {
    std::fs::write(path, write_smpl(matrix, labels)).map_err(|e| Error::io(path, e))
}

pub fn load_smpl(path: &Path) -> Result<(Matrix, Vec<Label>)> {
    if !path.exists() {
        return Err(Error::MissingUpstream(path.to_path_buf()));
    }
    read_smpl(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn samples_csv_header() -> String {
    let mut h = String::from("image_id,x,y,label");
    for j in 0..NUM_CHANNELS {
        let _ = write!(h, ",f{j:02}");
    }
    h
}

pub fn format_samples_csv(samples: &[LabeledSample]) -> String {
    let mut s = samples_csv_header();
    s.push('\n');
    for smp in samples {
        let label = if smp.label.is_positive() { "+1" } else { "-1" };
        let _ = write!(s, "{},{},{},{}", smp.image_id, smp.x, smp.y, label);
        for v in &smp.features {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_samples_csv(text: &str) -> Result<Vec<LabeledSample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == samples_csv_header() => {}
        _ => {
            return Err(Error::MalformedLine {
                line: 1,
                message: "unexpected sample CSV header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::MalformedLine {
            line: i + 1,
            message: m.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 + NUM_CHANNELS {
            return Err(bad("wrong field count"));
        }
        let label = match f[3] {
            "+1" | "1" => Label::Positive,
            "-1" => Label::Negative,
            _ => return Err(bad("label must be +1 or -1")),
        };
        let mut features = [0.0; NUM_CHANNELS];
        for (j, v) in features.iter_mut().enumerate() {
            *v = f[4 + j].parse().map_err(|_| bad("bad feature value"))?;
        }
        out.push(LabeledSample {
            image_id: f[0].to_string(),
            x: f[1].parse().map_err(|_| bad("bad x"))?,
            y: f[2].parse().map_err(|_| bad("bad y"))?,
            label,
            features,
        });
    }
    Ok(out)
}
