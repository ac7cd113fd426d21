//! SMDL model files.
//!
//! Layout: magic `SMDL`, version u16, kind u8, the kind's payload, then a
//! normalizer block (`u8` presence flag; if set, `dim` u16 followed by the
//! mins and maxs as f64). All numbers are little-endian.
//!
//! | kind | payload |
//! |------|---------|
//! | 1 svm | n_sv u32, dim u16, support vectors f64, dual coefficients f64, bias f64, gamma f64 |
//! | 2 tree | preorder nodes: `0` positives u32 total u32, or `1` attribute u16 threshold f64 left right |
//! | 3 knn | k u32, n u32, dim u16, rows f64, labels i8 |
//! | 4 nb | priors f64 ×2, attributes u16, points u32, then per attribute lo hi f64 and both curves f64 |
//! | 5 boost | count u32, then per member an svm payload followed by α f64 |

use std::path::Path;

use super::boost::BoostModel;
use super::knn::{KnnModel, KnnParams};
use super::nb::{AttributeDensity, NbModel};
use super::svm::SvmModel;
use super::tree::TreeNode;
use super::TrainedModel;
use crate::error::{Error, Result};
use crate::sampling::NormalizationStats;
use crate::types::{Label, Matrix};

pub const SMDL_MAGIC: &[u8; 4] = b"SMDL";
pub const SMDL_VERSION: u16 = 1;

const KIND_SVM: u8 = 1;
const KIND_TREE: u8 = 2;
const KIND_KNN: u8 = 3;
const KIND_NB: u8 = 4;
const KIND_BOOST: u8 = 5;
const MAX_TREE_DEPTH: usize = 10_000;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u16).to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CorruptFile("model file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<usize> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        // Bound the allocation by what is actually left.
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(Error::CorruptFile("model file is truncated".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

fn write_svm(w: &mut Writer, m: &SvmModel) {
    w.u32(m.support_vectors.rows());
    w.u16(m.support_vectors.cols());
    w.f64s(m.support_vectors.data());
    w.f64s(&m.dual_coefs);
    w.f64(m.bias);
    w.f64(m.gamma);
}

fn read_svm(r: &mut Reader) -> Result<SvmModel> {
    let n = r.u32()?;
    let d = r.u16()?;
    let sv = r.f64s(n * d)?;
    let dual_coefs = r.f64s(n)?;
    Ok(SvmModel {
        support_vectors: Matrix::new(n, d, sv)?,
        dual_coefs,
        bias: r.f64()?,
        gamma: r.f64()?,
    })
}

fn write_tree(w: &mut Writer, node: &TreeNode) {
    match node {
        TreeNode::Leaf { positives, total } => {
            w.u8(0);
            w.u32(*positives as usize);
            w.u32(*total as usize);
        }
        TreeNode::Split {
            attribute,
            threshold,
            left,
            right,
        } => {
            w.u8(1);
            w.u16(*attribute);
            w.f64(*threshold);
            write_tree(w, left);
            write_tree(w, right);
        }
    }
}

fn read_tree(r: &mut Reader, depth: usize) -> Result<TreeNode> {
    if depth > MAX_TREE_DEPTH {
        return Err(Error::CorruptFile("tree is too deep".into()));
    }
    match r.u8()? {
        0 => {
            let positives = r.u32()? as u32;
            let total = r.u32()? as u32;
            if positives > total {
                return Err(Error::CorruptFile("leaf has more positives than rows".into()));
            }
            Ok(TreeNode::Leaf { positives, total })
        }
        1 => {
            let attribute = r.u16()?;
            let threshold = r.f64()?;
            let left = Box::new(read_tree(r, depth + 1)?);
            let right = Box::new(read_tree(r, depth + 1)?);
            Ok(TreeNode::Split {
                attribute,
                threshold,
                left,
                right,
            })
        }
        t => Err(Error::CorruptFile(format!("unknown tree node tag {t}"))),
    }
}

/// Serializes a model and its optional input normalizer.
pub fn write_model(model: &TrainedModel, norm: Option<&NormalizationStats>) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(SMDL_MAGIC);
    w.u16(SMDL_VERSION as usize);
    match model {
        TrainedModel::Svm(m) => {
            w.u8(KIND_SVM);
            write_svm(&mut w, m);
        }
        TrainedModel::Tree(t) => {
            w.u8(KIND_TREE);
            write_tree(&mut w, t);
        }
        TrainedModel::Knn(m) => {
            w.u8(KIND_KNN);
            w.u32(m.params.k);
            w.u32(m.matrix.rows());
            w.u16(m.matrix.cols());
            w.f64s(m.matrix.data());
            for l in &m.labels {
                w.u8(l.as_i8() as u8);
            }
        }
        TrainedModel::Nb(m) => {
            w.u8(KIND_NB);
            w.f64(m.prior_positive);
            w.f64(m.prior_negative);
            w.u16(m.attributes.len());
            w.u32(m.attributes.first().map_or(0, |a| a.positive.len()));
            for a in &m.attributes {
                w.f64(a.lo);
                w.f64(a.hi);
                w.f64s(&a.positive);
                w.f64s(&a.negative);
            }
        }
        TrainedModel::Boost(m) => {
            w.u8(KIND_BOOST);
            w.u32(m.members.len());
            for (svm, alpha) in &m.members {
                write_svm(&mut w, svm);
                w.f64(*alpha);
            }
        }
    }
    match norm {
        Some(s) => {
            w.u8(1);
            w.u16(s.dim());
            w.f64s(&s.mins);
            w.f64s(&s.maxs);
        }
        None => w.u8(0),
    }
    w.0
}

pub fn read_model(bytes: &[u8]) -> Result<(TrainedModel, Option<NormalizationStats>)> {
    if bytes.len() < 7 || &bytes[..4] != SMDL_MAGIC {
        return Err(Error::CorruptFile("missing SMDL header".into()));
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u16()? as u16;
    if version != SMDL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: SMDL_VERSION,
        });
    }
    let model = match r.u8()? {
        KIND_SVM => TrainedModel::Svm(read_svm(&mut r)?),
        KIND_TREE => TrainedModel::Tree(read_tree(&mut r, 0)?),
        KIND_KNN => {
            let k = r.u32()?;
            let n = r.u32()?;
            let d = r.u16()?;
            let matrix = Matrix::new(n, d, r.f64s(n * d)?)?;
            let labels = r
                .take(n)?
                .iter()
                .map(|&b| Label::from_i8(b as i8).ok_or_else(|| Error::CorruptFile(format!("bad label {b}"))))
                .collect::<Result<Vec<_>>>()?;
            TrainedModel::Knn(
                KnnModel::new(matrix, labels, KnnParams { k }).map_err(|e| Error::CorruptFile(e.to_string()))?,
            )
        }
        KIND_NB => {
            let prior_positive = r.f64()?;
            let prior_negative = r.f64()?;
            let n_attr = r.u16()?;
            let points = r.u32()?;
            let attributes = (0..n_attr)
                .map(|_| {
                    Ok(AttributeDensity {
                        lo: r.f64()?,
                        hi: r.f64()?,
                        positive: r.f64s(points)?,
                        negative: r.f64s(points)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            TrainedModel::Nb(NbModel {
                prior_positive,
                prior_negative,
                attributes,
            })
        }
        KIND_BOOST => {
            let count = r.u32()?;
            let mut members = Vec::new();
            for _ in 0..count {
                let svm = read_svm(&mut r)?;
                members.push((svm, r.f64()?));
            }
            TrainedModel::Boost(BoostModel { members })
        }
        k => return Err(Error::CorruptFile(format!("unknown model kind {k}"))),
    };
    let norm = match r.u8()? {
        0 => None,
        1 => {
            let d = r.u16()?;
            Some(NormalizationStats {
                mins: r.f64s(d)?,
                maxs: r.f64s(d)?,
            })
        }
        f => return Err(Error::CorruptFile(format!("bad normalizer flag {f}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::CorruptFile("trailing bytes after model".into()));
    }
    Ok((model, norm))
}

pub fn save_model(path: &Path, model: &TrainedModel, norm: Option<&NormalizationStats>) -> Result<()> {
    std::fs::write(path, write_model(model, norm)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(TrainedModel, Option<NormalizationStats>)> {
    if !path.exists() {
        return Err(Error::MissingUpstream(path.to_path_buf()));
    }
    read_model(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LearnerSpec, Method};

    fn toy() -> (Matrix, Vec<Label>) {
        let rows: Vec<[f64; 2]> = (0..20)
            .map(|i| [(i % 5) as f64 / 4.0, ((i * 7) % 11) as f64 / 10.0])
            .collect();
        let y = (0..20).map(|i| Label::from_sign(rows[i][0] + rows[i][1] - 0.9)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn every_kind_round_trips() {
        let (x, y) = toy();
        let norm = NormalizationStats {
            mins: vec![0.0, -1.0],
            maxs: vec![1.0, 2.0],
        };
        for m in Method::ALL {
            let mut spec = LearnerSpec::new(m);
            spec.params.knn.k = 3;
            spec.params.boost.rounds = 3;
            let model = spec.train(&x, &y, 5).unwrap();
            let bytes = write_model(&model, Some(&norm));
            let (back, n2) = read_model(&bytes).unwrap();
            assert_eq!(back, model, "{m}");
            assert_eq!(n2.as_ref(), Some(&norm));
            for r in x.iter_rows() {
                assert_eq!(back.score(r).to_bits(), model.score(r).to_bits());
            }
        }
    }

    #[test]
    fn truncation_and_version_are_detected() {
        let (x, y) = toy();
        let model = LearnerSpec::new(Method::Svm).train(&x, &y, 0).unwrap();
        let bytes = write_model(&model, None);
        for cut in [3, 7, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(read_model(&bytes[..cut]), Err(Error::CorruptFile(_))));
        }
        let mut future = bytes.clone();
        future[4] = 9;
        assert!(matches!(read_model(&future), Err(Error::VersionMismatch { found: 9, .. })));
    }
}
