//! The binary container: a little-endian, versioned format holding clouds,
//! feature channels, block decompositions, or segmentation results as
//! contiguous channel blocks. Byte-level layout is given in FORMAT.md.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use urbanseg_core::features::{EmbeddingMatrix, PointFeatures};
use urbanseg_core::model::{AnnotatedPointCloud, BuildingCategory, UrbanClass};
use urbanseg_core::partition::Block;
use urbanseg_core::Vec3;

use crate::error::FormatError;

pub const MAGIC: [u8; 4] = *b"UBC1";
pub const VERSION: u16 = 1;

/// What a container file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Kind {
    Cloud = 1,
    Features = 2,
    Blocks = 3,
    Result = 4,
}

impl Kind {
    fn from_code(code: u16) -> Option<Kind> {
        match code {
            1 => Some(Kind::Cloud),
            2 => Some(Kind::Features),
            3 => Some(Kind::Blocks),
            4 => Some(Kind::Result),
            _ => None,
        }
    }
}

/// One row of a result file's proposal table.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProposalRow {
    pub id: u32,
    pub block: u32,
    pub category: BuildingCategory,
    pub score: f64,
    pub points: u64,
    pub anchor: Vec3,
}

/// A scene-level segmentation result: per-point proposal and block ids plus
/// the proposal table.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResultFile {
    /// Per point: scene-global proposal id, or `UNASSIGNED`.
    pub assignment: Vec<u32>,
    /// Per point: id of the block that processed it.
    pub block_of: Vec<u32>,
    pub proposals: Vec<ProposalRow>,
}

struct Counting<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Counting<R> {
    fn new(inner: R) -> Self {
        Counting { inner, offset: 0 }
    }

    fn read_bytes(&mut self, buf: &mut [u8], field: &'static str) -> Result<(), FormatError> {
        let at = self.offset;
        self.inner
            .read_exact(buf)
            .map_err(|e| field_error(field, at, &e.to_string()))?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, FormatError> {
        let mut b = [0u8; 1];
        self.read_bytes(&mut b, field)?;
        Ok(b[0])
    }

    fn u16(&mut self, field: &'static str) -> Result<u16, FormatError> {
        let mut b = [0u8; 2];
        self.read_bytes(&mut b, field)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, FormatError> {
        let mut b = [0u8; 4];
        self.read_bytes(&mut b, field)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, FormatError> {
        let mut b = [0u8; 8];
        self.read_bytes(&mut b, field)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self, field: &'static str) -> Result<f64, FormatError> {
        let mut b = [0u8; 8];
        self.read_bytes(&mut b, field)?;
        Ok(f64::from_le_bytes(b))
    }

    fn vec3(&mut self, field: &'static str) -> Result<Vec3, FormatError> {
        Ok(Vec3::new(self.f64(field)?, self.f64(field)?, self.f64(field)?))
    }

    fn expect_eof(&mut self) -> Result<(), FormatError> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b) {
            Ok(0) => Ok(()),
            Ok(_) => Err(field_error(
                "trailer",
                self.offset,
                "unexpected trailing bytes",
            )),
            Err(e) => Err(FormatError::Io(e)),
        }
    }
}

fn field_error(field: &'static str, offset: u64, detail: &str) -> FormatError {
    FormatError::Field {
        field,
        offset,
        detail: detail.to_string(),
    }
}

fn read_header<R: Read>(r: &mut Counting<R>, expect: Kind) -> Result<(), FormatError> {
    let mut magic = [0u8; 4];
    r.read_bytes(&mut magic, "magic")?;
    if magic != MAGIC {
        return Err(FormatError::Header {
            offset: 0,
            detail: format!("bad magic {magic:02x?}, expected {MAGIC:02x?}"),
        });
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(FormatError::Header {
            offset: 4,
            detail: format!("unsupported version {version}"),
        });
    }
    let kind_code = r.u16("kind")?;
    let kind = Kind::from_code(kind_code).ok_or_else(|| FormatError::Header {
        offset: 6,
        detail: format!("unknown kind {kind_code}"),
    })?;
    if kind != expect {
        return Err(FormatError::Header {
            offset: 6,
            detail: format!("container holds {kind:?}, expected {expect:?}"),
        });
    }
    Ok(())
}

fn write_header<W: Write>(w: &mut W, kind: Kind) -> Result<(), FormatError> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(kind as u16).to_le_bytes())?;
    Ok(())
}

pub fn write_cloud<W: Write>(w: &mut W, cloud: &AnnotatedPointCloud) -> Result<(), FormatError> {
    write_header(w, Kind::Cloud)?;
    w.write_all(&(cloud.len() as u64).to_le_bytes())?;
    for p in cloud.positions() {
        w.write_all(&p.x.to_le_bytes())?;
        w.write_all(&p.y.to_le_bytes())?;
        w.write_all(&p.z.to_le_bytes())?;
    }
    for c in cloud.colors() {
        w.write_all(c)?;
    }
    for &s in cloud.semantic() {
        w.write_all(&[s.code()])?;
    }
    for &i in cloud.instance() {
        w.write_all(&i.to_le_bytes())?;
    }
    for &c in cloud.category() {
        w.write_all(&[c.code()])?;
    }
    Ok(())
}

pub fn read_cloud<R: Read>(reader: R) -> Result<AnnotatedPointCloud, FormatError> {
    let mut r = Counting::new(reader);
    read_header(&mut r, Kind::Cloud)?;
    let n = r.u64("count")? as usize;

    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push(r.vec3("positions")?);
    }
    let mut colors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut c = [0u8; 3];
        r.read_bytes(&mut c, "colors")?;
        colors.push(c);
    }
    let mut semantic = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.offset;
        let code = r.u8("semantic")?;
        semantic.push(UrbanClass::from_code(code).ok_or_else(|| {
            field_error("semantic", at, &format!("unknown class code {code}"))
        })?);
    }
    let mut instance = Vec::with_capacity(n);
    for _ in 0..n {
        instance.push(r.u32("instance")?);
    }
    let mut category = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.offset;
        let code = r.u8("category")?;
        category.push(BuildingCategory::from_code(code).ok_or_else(|| {
            field_error("category", at, &format!("unknown category code {code}"))
        })?);
    }
    r.expect_eof()?;
    Ok(AnnotatedPointCloud::new(
        positions, colors, semantic, instance, category,
    )?)
}

pub fn write_features<W: Write>(
    w: &mut W,
    features: &PointFeatures,
) -> Result<(), FormatError> {
    write_header(w, Kind::Features)?;
    w.write_all(&(features.len() as u64).to_le_bytes())?;
    w.write_all(&(features.embeddings().dim() as u32).to_le_bytes())?;
    let flags: u8 = if features.semantic_scores().is_some() { 1 } else { 0 };
    w.write_all(&[flags])?;
    for &s in features.semantic_pred() {
        w.write_all(&[s.code()])?;
    }
    if let Some(scores) = features.semantic_scores() {
        for &v in scores {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for o in features.offsets() {
        w.write_all(&o.x.to_le_bytes())?;
        w.write_all(&o.y.to_le_bytes())?;
        w.write_all(&o.z.to_le_bytes())?;
    }
    for &v in features.embeddings().data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_features<R: Read>(reader: R) -> Result<PointFeatures, FormatError> {
    let mut r = Counting::new(reader);
    read_header(&mut r, Kind::Features)?;
    let n = r.u64("count")? as usize;
    let dim = r.u32("dim")? as usize;
    let flags = r.u8("flags")?;
    if flags > 1 {
        return Err(field_error("flags", r.offset - 1, "unknown flag bits"));
    }

    let mut semantic_pred = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.offset;
        let code = r.u8("semantic_pred")?;
        semantic_pred.push(UrbanClass::from_code(code).ok_or_else(|| {
            field_error("semantic_pred", at, &format!("unknown class code {code}"))
        })?);
    }
    let semantic_scores = if flags & 1 != 0 {
        let classes = UrbanClass::ALL.len();
        let mut scores = Vec::with_capacity(n * classes);
        for _ in 0..n * classes {
            scores.push(r.f64("semantic_scores")?);
        }
        Some(scores)
    } else {
        None
    };
    let mut offsets = Vec::with_capacity(n);
    for _ in 0..n {
        offsets.push(r.vec3("offsets")?);
    }
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        data.push(r.f64("embeddings")?);
    }
    r.expect_eof()?;
    let embeddings = EmbeddingMatrix::new(dim, data)?;
    Ok(PointFeatures::new(
        semantic_pred,
        semantic_scores,
        offsets,
        embeddings,
    )?)
}

/// Write a block decomposition for caching; blocks are stored as sorted
/// index lists and rebuilt against their cloud on load.
pub fn write_blocks<W: Write>(w: &mut W, blocks: &[Block]) -> Result<(), FormatError> {
    write_header(w, Kind::Blocks)?;
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for block in blocks {
        w.write_all(&block.id().to_le_bytes())?;
        w.write_all(&(block.len() as u64).to_le_bytes())?;
        for &i in block.indices() {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_blocks<R: Read>(
    reader: R,
    cloud: &AnnotatedPointCloud,
) -> Result<Vec<Block>, FormatError> {
    let mut r = Counting::new(reader);
    read_header(&mut r, Kind::Blocks)?;
    let count = r.u32("block_count")? as usize;
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let id = r.u32("block_id")?;
        let n = r.u64("block_len")? as usize;
        let mut indices = Vec::with_capacity(n);
        for _ in 0..n {
            indices.push(r.u32("block_indices")?);
        }
        blocks.push(Block::new(id, indices, cloud)?);
    }
    r.expect_eof()?;
    Ok(blocks)
}

pub fn write_result<W: Write>(w: &mut W, result: &ResultFile) -> Result<(), FormatError> {
    write_header(w, Kind::Result)?;
    w.write_all(&(result.assignment.len() as u64).to_le_bytes())?;
    for &a in &result.assignment {
        w.write_all(&a.to_le_bytes())?;
    }
    for &b in &result.block_of {
        w.write_all(&b.to_le_bytes())?;
    }
    w.write_all(&(result.proposals.len() as u32).to_le_bytes())?;
    for p in &result.proposals {
        w.write_all(&p.id.to_le_bytes())?;
        w.write_all(&p.block.to_le_bytes())?;
        w.write_all(&[p.category.code()])?;
        w.write_all(&p.score.to_le_bytes())?;
        w.write_all(&p.points.to_le_bytes())?;
        w.write_all(&p.anchor.x.to_le_bytes())?;
        w.write_all(&p.anchor.y.to_le_bytes())?;
        w.write_all(&p.anchor.z.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_result<R: Read>(reader: R) -> Result<ResultFile, FormatError> {
    let mut r = Counting::new(reader);
    read_header(&mut r, Kind::Result)?;
    let n = r.u64("count")? as usize;
    let mut assignment = Vec::with_capacity(n);
    for _ in 0..n {
        assignment.push(r.u32("assignment")?);
    }
    let mut block_of = Vec::with_capacity(n);
    for _ in 0..n {
        block_of.push(r.u32("block_of")?);
    }
    let p_count = r.u32("proposal_count")? as usize;
    let mut proposals = Vec::with_capacity(p_count);
    for _ in 0..p_count {
        let id = r.u32("proposal_id")?;
        let block = r.u32("proposal_block")?;
        let at = r.offset;
        let cat_code = r.u8("proposal_category")?;
        let category = BuildingCategory::from_code(cat_code).ok_or_else(|| {
            field_error(
                "proposal_category",
                at,
                &format!("unknown category code {cat_code}"),
            )
        })?;
        let score = r.f64("proposal_score")?;
        let points = r.u64("proposal_points")?;
        let anchor = r.vec3("proposal_anchor")?;
        proposals.push(ProposalRow {
            id,
            block,
            category,
            score,
            points,
            anchor,
        });
    }
    r.expect_eof()?;
    // Cheap cross-checks so a truncated or shuffled table is caught here.
    for p in &proposals {
        let members = assignment.iter().filter(|&&a| a == p.id).count() as u64;
        if members != p.points {
            return Err(field_error(
                "proposal_points",
                0,
                &format!(
                    "proposal {} lists {} points but {} are assigned",
                    p.id, p.points, members
                ),
            ));
        }
    }
    Ok(ResultFile {
        assignment,
        block_of,
        proposals,
    })
}

pub fn write_cloud_file(path: &Path, cloud: &AnnotatedPointCloud) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cloud(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

pub fn read_cloud_file(path: &Path) -> Result<AnnotatedPointCloud, FormatError> {
    read_cloud(BufReader::new(File::open(path)?))
}

pub fn write_features_file(path: &Path, features: &PointFeatures) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_features(&mut w, features)?;
    w.flush()?;
    Ok(())
}

pub fn read_features_file(path: &Path) -> Result<PointFeatures, FormatError> {
    read_features(BufReader::new(File::open(path)?))
}

pub fn write_result_file(path: &Path, result: &ResultFile) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_result(&mut w, result)?;
    w.flush()?;
    Ok(())
}

pub fn read_result_file(path: &Path) -> Result<ResultFile, FormatError> {
    read_result(BufReader::new(File::open(path)?))
}
