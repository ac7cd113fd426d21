//! Corpus ingestion: images, fixation files, detector channel maps, the
//! corpus manifest, ground-truth maps and the train/test split.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::filters::splat_gaussians;
use crate::types::{FixationRecord, FixationSet, Plane, RgbImage, SaliencyMap};

pub const FIXATION_HEADER: &str = "observer_id,x,y";
pub const MANIFEST_HEADER: &str = "image_id,image_path,fixation_path";

/// Parses fixation CSV text for an image of the given size.
pub fn parse_fixations(text: &str, image_id: &str, width: usize, height: usize) -> Result<FixationSet> {
    let mut lines = text.split('\n').enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == FIXATION_HEADER => {}
        Some((_, header)) if header.trim().is_empty() => {
            return Err(Error::EmptyFile(PathBuf::from(image_id)));
        }
        _ => {
            return Err(Error::MalformedLine {
                line: 1,
                message: format!("expected header '{FIXATION_HEADER}'"),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedLine {
                line: line_no,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::MalformedLine {
            line: line_no,
            message: format!("cannot parse {what}"),
        };
        let observer_id: u32 = fields[0].trim().parse().map_err(|_| bad("observer_id"))?;
        let x: f64 = fields[1].trim().parse().map_err(|_| bad("x"))?;
        let y: f64 = fields[2].trim().parse().map_err(|_| bad("y"))?;
        if !(x >= 0.0 && x < width as f64 && y >= 0.0 && y < height as f64) {
            return Err(Error::OutOfBounds {
                line: line_no,
                x,
                y,
                width,
                height,
            });
        }
        records.push(FixationRecord { observer_id, x, y });
    }
    if records.is_empty() {
        return Err(Error::EmptyFile(PathBuf::from(image_id)));
    }
    Ok(FixationSet {
        image_id: image_id.to_string(),
        records,
    })
}

/// Loads a fixation file; the image id is taken from the file stem.
pub fn load_fixations(path: &Path, width: usize, height: usize) -> Result<FixationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_fixations(&text, &id, width, height).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })
}

/// Canonical serialization: header, then `observer,x,y` with shortest
/// round-trip decimal reals, LF endings.
pub fn format_fixations(set: &FixationSet) -> String {
    let mut s = String::with_capacity(16 * (set.records.len() + 1));
    s.push_str(FIXATION_HEADER);
    s.push('\n');
    for r in &set.records {
        let _ = writeln!(s, "{},{:?},{:?}", r.observer_id, r.x, r.y);
    }
    s
}

/// Default ground-truth blur: 2% of the longer side.
pub fn default_sigma(width: usize, height: usize) -> f64 {
    0.02 * width.max(height) as f64
}

/// Unnormalized sum of Gaussians at the fixations (3σ square truncation).
pub fn fixation_density(fix: &FixationSet, width: usize, height: usize, sigma: f64) -> Result<Plane> {
    if fix.records.is_empty() {
        return Err(Error::EmptyFixations);
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(splat_gaussians(
        width,
        height,
        fix.records.iter().map(|r| (r.x, r.y)),
        sigma,
    ))
}

pub fn ground_truth_map(fix: &FixationSet, width: usize, height: usize, sigma: f64) -> Result<SaliencyMap> {
    Ok(SaliencyMap::from_unnormalized(&fixation_density(
        fix, width, height, sigma,
    )?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    pub fixation_path: PathBuf,
    /// Face, person and car channel-map paths.
    pub detector_paths: [Option<PathBuf>; 3],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.image_id.as_str())
    }
}

/// Reads a manifest CSV. Relative paths resolve against the manifest's
/// directory; empty detector fields mean "not supplied".
pub fn load_manifest(path: &Path) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim().starts_with(MANIFEST_HEADER) => {}
        _ => {
            return Err(Error::MalformedLine {
                line: 1,
                message: format!("expected manifest header starting with '{MANIFEST_HEADER}'"),
            })
        }
    }
    let resolve = |p: &str| {
        let p = Path::new(p.trim());
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 3 || f.len() > 6 {
            return Err(Error::MalformedLine {
                line: i + 1,
                message: format!("expected 3 to 6 fields, found {}", f.len()),
            });
        }
        let image_id = f[0].trim().to_string();
        if image_id.is_empty() || !seen.insert(image_id.clone()) {
            return Err(Error::MalformedLine {
                line: i + 1,
                message: format!("empty or duplicate image id '{image_id}'"),
            });
        }
        let fixation_path = resolve(f[2]);
        if !fixation_path.exists() {
            return Err(Error::MissingUpstream(fixation_path));
        }
        let detector_paths = std::array::from_fn(|k| {
            f.get(3 + k)
                .filter(|s| !s.trim().is_empty())
                .map(|s| resolve(s))
        });
        entries.push(CorpusEntry {
            image_id,
            image_path: resolve(f[1]),
            fixation_path,
            detector_paths,
        });
    }
    Ok(Corpus { entries })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub rng_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            rng_seed: 0,
        }
    }
}

/// Seeded shuffle, then the first `round(N·f)` entries train. Each side
/// keeps the manifest order.
pub fn split_corpus(c: &Corpus, s: &SplitSpec) -> Result<(Corpus, Corpus)> {
    if c.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {} outside (0,1)",
            s.train_fraction
        )));
    }
    let n = c.len();
    let n_train = (n as f64 * s.train_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(s.rng_seed));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let pick = |flag: bool| Corpus {
        entries: c
            .entries
            .iter()
            .zip(&is_train)
            .filter(|(_, &t)| t == flag)
            .map(|(e, _)| e.clone())
            .collect(),
    };
    Ok((pick(true), pick(false)))
}

/// Parses `CHAN <w> <h>\n` followed by `w·h` whitespace-separated reals.
/// Values are clamped into [0,1].
pub fn parse_channel_map(text: &str, width: usize, height: usize) -> Result<Plane> {
    let (header, body) = text
        .split_once('\n')
        .ok_or_else(|| Error::MalformedHeader("missing header line".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "CHAN" {
        return Err(Error::MalformedHeader(header.to_string()));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedHeader(header.to_string()))
    };
    let (w, h) = (dim(parts[1])?, dim(parts[2])?);
    if w != width || h != height {
        return Err(Error::DimensionMismatch {
            expected_width: width,
            expected_height: height,
            width: w,
            height: h,
        });
    }
    let mut data = Vec::with_capacity(w * h);
    for tok in body.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::CorruptFile(format!("bad channel value '{tok}'")))?;
        if !v.is_finite() {
            return Err(Error::CorruptFile(format!("non-finite channel value '{tok}'")));
        }
        data.push(v.clamp(0.0, 1.0));
    }
    if data.len() != w * h {
        return Err(Error::CorruptFile(format!(
            "channel map declares {} values, found {}",
            w * h,
            data.len()
        )));
    }
    Plane::from_vec(w, h, data)
}

pub fn format_channel_map(plane: &Plane) -> String {
    let mut s = format!("CHAN {} {}\n", plane.width(), plane.height());
    for y in 0..plane.height() {
        let row: Vec<String> = plane.row(y).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Loads a declared detector channel; `channel` names it in errors.
pub fn load_channel_map(path: &Path, width: usize, height: usize, channel: &str) -> Result<Plane> {
    if !path.exists() {
        return Err(Error::MissingChannel {
            channel: channel.to_string(),
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channel_map(&text, width, height)
}

pub fn save_channel_map(path: &Path, plane: &Plane) -> Result<()> {
    std::fs::write(path, format_channel_map(plane)).map_err(|e| Error::io(path, e))
}

/// Decodes PNG/JPEG to 8-bit RGB scaled to [0,1].
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb
        .pixels()
        .map(|p| p.0.map(|c| c as f64 / 255.0))
        .collect();
    RgbImage::new(w, h, pixels)
}

pub fn save_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    let mut buf = image::RgbImage::new(img.width() as u32, img.height() as u32);
    for (dst, src) in buf.pixels_mut().zip(img.pixels()) {
        dst.0 = src.map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    buf.save(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `round(255·v)` as 8-bit grayscale PNG.
pub fn save_gray_png(path: &Path, plane: &Plane) -> Result<()> {
    let mut buf = image::GrayImage::new(plane.width() as u32, plane.height() as u32);
    for (dst, &v) in buf.pixels_mut().zip(plane.values()) {
        dst.0 = [(255.0 * v).round().clamp(0.0, 255.0) as u8];
    }
    buf.save(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads `image_id,horizon_row` overrides (header required).
pub fn load_horizon_overrides(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (id, row) = line.split_once(',').ok_or_else(|| Error::MalformedLine {
            line: i + 1,
            message: "expected image_id,horizon_row".into(),
        })?;
        let row: f64 = row.trim().parse().map_err(|_| Error::MalformedLine {
            line: i + 1,
            message: "cannot parse horizon_row".into(),
        })?;
        out.push((id.trim().to_string(), row));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[(f64, f64)]) -> FixationSet {
        FixationSet {
            image_id: "t".into(),
            records: points
                .iter()
                .map(|&(x, y)| FixationRecord {
                    observer_id: 1,
                    x,
                    y,
                })
                .collect(),
        }
    }

    #[test]
    fn parses_single_record() {
        let text = "observer_id,x,y\n1,10.5,20.0\n";
        let fs = parse_fixations(text, "a", 100, 100).unwrap();
        assert_eq!(fs.records.len(), 1);
        assert_eq!((fs.records[0].x, fs.records[0].y), (10.5, 20.0));
        assert_eq!(format_fixations(&fs), text);
    }

    #[test]
    fn rejects_out_of_bounds_and_malformed() {
        let err = parse_fixations("observer_id,x,y\n1,-3,5\n", "a", 100, 100).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { line: 2, .. }));
        let err = parse_fixations("observer_id,x,y\n1,100,5\n", "a", 100, 100).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { .. }));
        let err = parse_fixations("observer_id,x,y\n1,3\n", "a", 100, 100).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
        let err = parse_fixations("observer_id,x,y\n1,a,3\n", "a", 100, 100).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { .. }));
        assert!(matches!(
            parse_fixations("observer_id,x,y\n", "a", 10, 10),
            Err(Error::EmptyFile(_))
        ));
        assert!(matches!(parse_fixations("", "a", 10, 10), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn preserves_order_and_count() {
        let mut text = String::from("observer_id,x,y\n");
        for obs in 1..=15 {
            for k in 0..6 {
                text.push_str(&format!("{obs},{}.0,{}.5\n", k * 3, obs));
            }
        }
        let fs = parse_fixations(&text, "a", 50, 50).unwrap();
        assert_eq!(fs.records.len(), 90);
        assert_eq!(fs.records[7].observer_id, 2);
        assert_eq!(fs.records[7].x, 3.0);
        assert_eq!(format_fixations(&fs), text);
    }

    #[test]
    fn gt_single_fixation_peak() {
        let map = ground_truth_map(&set(&[(50.0, 50.0)]), 101, 101, 5.0).unwrap();
        assert_eq!(map.argmax(), (50, 50));
        assert_eq!(map.get(50, 50), 1.0);
        let (lo, hi) = map.min_max();
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn gt_coincident_fixations_identical() {
        let one = ground_truth_map(&set(&[(20.0, 30.0)]), 64, 64, 3.0).unwrap();
        let two = ground_truth_map(&set(&[(20.0, 30.0), (20.0, 30.0)]), 64, 64, 3.0).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn gt_errors() {
        assert!(matches!(ground_truth_map(&set(&[]), 10, 10, 1.0), Err(Error::EmptyFixations)));
        assert!(ground_truth_map(&set(&[(1.0, 1.0)]), 10, 10, 0.0).is_err());
    }

    #[test]
    fn gt_mass_close_to_continuous_integral() {
        let sigma = 5.0;
        let fix = set(&[(50.0, 50.0)]);
        // Independent brute-force double loop over the full plane.
        let mut full = 0.0;
        for y in 0..101 {
            for x in 0..101 {
                let d2 = ((x as f64 - 50.0).powi(2) + (y as f64 - 50.0).powi(2)) / (2.0 * sigma * sigma);
                full += (-d2).exp();
            }
        }
        let target = 2.0 * std::f64::consts::PI * sigma * sigma;
        assert!((full - target).abs() / target < 0.01);
        let truncated: f64 = fixation_density(&fix, 101, 101, sigma).unwrap().values().iter().sum();
        assert!((truncated - full).abs() / full < 0.012);
        assert!((truncated - target).abs() / target < 0.01);
    }

    fn corpus(n: usize) -> Corpus {
        Corpus {
            entries: (0..n)
                .map(|i| CorpusEntry {
                    image_id: format!("img{i}"),
                    image_path: PathBuf::from(format!("{i}.png")),
                    fixation_path: PathBuf::from(format!("{i}.csv")),
                    detector_paths: [None, None, None],
                })
                .collect(),
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let spec = SplitSpec {
            train_fraction: 0.8,
            rng_seed: 7,
        };
        let (tr, te) = split_corpus(&corpus(1003), &spec).unwrap();
        assert_eq!((tr.len(), te.len()), (802, 201));
        let (tr, te) = split_corpus(&corpus(10), &spec).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let again = split_corpus(&corpus(10), &spec).unwrap();
        assert_eq!((tr, te), again);
        assert!(split_corpus(&Corpus::default(), &spec).is_err());
    }

    #[test]
    fn channel_map_parse() {
        let zero = parse_channel_map("CHAN 3 2\n0 0 0\n0 0 0\n", 3, 2).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let boxed = Plane::from_fn(6, 5, |x, y| if (1..4).contains(&x) && (2..4).contains(&y) { 1.0 } else { 0.0 });
        let text = format_channel_map(&boxed);
        assert_eq!(parse_channel_map(&text, 6, 5).unwrap(), boxed);
        assert!(matches!(
            parse_channel_map("CHAN 3 2\n0 0 0 0 0 0\n", 4, 2),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(parse_channel_map("CHN 3 2\n", 3, 2), Err(Error::MalformedHeader(_))));
        assert!(matches!(parse_channel_map("CHAN 3\n", 3, 2), Err(Error::MalformedHeader(_))));
        let clamped = parse_channel_map("CHAN 2 1\n1.7 -0.2\n", 2, 1).unwrap();
        assert_eq!(clamped.values(), &[1.0, 0.0]);
        let precise = parse_channel_map("CHAN 1 1\n0.1234567890123456789\n", 1, 1).unwrap();
        assert_eq!(precise.get(0, 0), 0.1234567890123456789f64);
    }

    #[test]
    fn missing_channel_names_channel() {
        let err = load_channel_map(Path::new("/nonexistent/face.chan"), 4, 4, "face").unwrap_err();
        match err {
            Error::MissingChannel { channel, .. } => assert_eq!(channel, "face"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
