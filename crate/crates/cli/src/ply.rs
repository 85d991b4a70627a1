//! Extended-PLY reader/writer for annotated clouds and labeled meshes.
//!
//! Clouds are `element vertex` with the usual x/y/z and red/green/blue plus
//! three extra integer properties: `semantic` (uchar), `instance` (uint,
//! 0xffffffff = none), and `category` (uchar, 255 = unlabeled). Meshes carry
//! the same three labels per face. Files are written as
//! `binary_little_endian`; both that and `ascii` are accepted on read.
//! Unknown properties are skipped.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use urbanseg_core::mesh::TriangleMesh;
use urbanseg_core::model::{AnnotatedPointCloud, BuildingCategory, UrbanClass};
use urbanseg_core::segmenter::UNASSIGNED;
use urbanseg_core::Vec3;

use crate::error::FormatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(token: &str) -> Option<ScalarType> {
        Some(match token {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum PropertyType {
    Scalar(ScalarType),
    List(ScalarType, ScalarType),
}

#[derive(Debug, Clone)]
struct PropertyDef {
    name: String,
    ty: PropertyType,
}

#[derive(Debug, Clone)]
struct ElementDef {
    name: String,
    count: usize,
    properties: Vec<PropertyDef>,
}

#[derive(Debug)]
struct Header {
    binary: bool,
    elements: Vec<ElementDef>,
    /// Byte offset of the first body byte.
    body: usize,
    /// Number of header lines, for ascii line reporting.
    lines: usize,
}

fn ply_error(line: usize, detail: impl Into<String>) -> FormatError {
    FormatError::Ply {
        line,
        detail: detail.into(),
    }
}

fn parse_header(data: &[u8]) -> Result<Header, FormatError> {
    let mut elements: Vec<ElementDef> = Vec::new();
    let mut binary: Option<bool> = None;
    let mut pos = 0usize;
    let mut line_no = 0usize;

    loop {
        let end = data[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ply_error(line_no + 1, "missing end_header"))?;
        let raw = &data[pos..pos + end];
        pos += end + 1;
        line_no += 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| ply_error(line_no, "non-UTF8 header line"))?
            .trim_end_matches('\r');
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            None => continue,
            Some("ply") => {
                if line_no != 1 {
                    return Err(ply_error(line_no, "unexpected `ply` keyword"));
                }
            }
            Some("comment") | Some("obj_info") => continue,
            Some("format") => match tokens.next() {
                Some("ascii") => binary = Some(false),
                Some("binary_little_endian") => binary = Some(true),
                other => {
                    return Err(ply_error(
                        line_no,
                        format!("unsupported format {:?}", other.unwrap_or("")),
                    ))
                }
            },
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| ply_error(line_no, "element without a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| ply_error(line_no, "element without a count"))?;
                elements.push(ElementDef {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| ply_error(line_no, "property before any element"))?;
                let first = tokens
                    .next()
                    .ok_or_else(|| ply_error(line_no, "property without a type"))?;
                let ty = if first == "list" {
                    let count_ty = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| ply_error(line_no, "bad list count type"))?;
                    let item_ty = tokens
                        .next()
                        .and_then(ScalarType::parse)
                        .ok_or_else(|| ply_error(line_no, "bad list item type"))?;
                    PropertyType::List(count_ty, item_ty)
                } else {
                    PropertyType::Scalar(
                        ScalarType::parse(first)
                            .ok_or_else(|| ply_error(line_no, format!("unknown type `{first}`")))?,
                    )
                };
                let name = tokens
                    .next()
                    .ok_or_else(|| ply_error(line_no, "property without a name"))?;
                element.properties.push(PropertyDef {
                    name: name.to_string(),
                    ty,
                });
            }
            Some("end_header") => {
                let binary = binary.ok_or_else(|| ply_error(line_no, "missing format line"))?;
                return Ok(Header {
                    binary,
                    elements,
                    body: pos,
                    lines: line_no,
                });
            }
            Some(other) => {
                return Err(ply_error(line_no, format!("unknown keyword `{other}`")));
            }
        }
    }
}

/// One parsed property value.
#[derive(Debug, Clone)]
enum Value {
    Scalar(f64),
    List(Vec<f64>),
}

impl Value {
    fn scalar(&self) -> f64 {
        match self {
            Value::Scalar(v) => *v,
            Value::List(_) => f64::NAN,
        }
    }
}

struct BinaryCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BinaryCursor<'a> {
    fn scalar(&mut self, ty: ScalarType) -> Result<f64, FormatError> {
        let size = ty.size();
        let at = self.pos;
        let bytes = self
            .data
            .get(at..at + size)
            .ok_or_else(|| FormatError::Field {
                field: "ply body",
                offset: at as u64,
                detail: "unexpected end of file".to_string(),
            })?;
        self.pos += size;
        Ok(match ty {
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I32 => {
                i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
            }
            ScalarType::U32 => {
                u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
            }
            ScalarType::F32 => {
                f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
            }
            ScalarType::F64 => f64::from_le_bytes(bytes.try_into().expect("8 bytes")),
        })
    }
}

/// Parse every element's rows. Returns, per element, a row-major table of
/// property values.
fn parse_body(data: &[u8], header: &Header) -> Result<Vec<Vec<Vec<Value>>>, FormatError> {
    let mut tables = Vec::with_capacity(header.elements.len());
    if header.binary {
        let mut cursor = BinaryCursor {
            data,
            pos: header.body,
        };
        for element in &header.elements {
            let mut rows = Vec::with_capacity(element.count);
            for _ in 0..element.count {
                let mut row = Vec::with_capacity(element.properties.len());
                for prop in &element.properties {
                    row.push(match prop.ty {
                        PropertyType::Scalar(ty) => Value::Scalar(cursor.scalar(ty)?),
                        PropertyType::List(count_ty, item_ty) => {
                            let count = cursor.scalar(count_ty)? as usize;
                            let mut items = Vec::with_capacity(count);
                            for _ in 0..count {
                                items.push(cursor.scalar(item_ty)?);
                            }
                            Value::List(items)
                        }
                    });
                }
                rows.push(row);
            }
            tables.push(rows);
        }
    } else {
        let body = std::str::from_utf8(&data[header.body..])
            .map_err(|_| ply_error(header.lines + 1, "non-UTF8 body"))?;
        let mut lines = body.lines().enumerate();
        for element in &header.elements {
            let mut rows = Vec::with_capacity(element.count);
            for _ in 0..element.count {
                let (i, line) = lines
                    .next()
                    .ok_or_else(|| ply_error(header.lines + 1, "unexpected end of file"))?;
                let line_no = header.lines + i + 1;
                let mut tokens = line.split_whitespace();
                let mut next_f64 = |what: &str| -> Result<f64, FormatError> {
                    let token = tokens
                        .next()
                        .ok_or_else(|| ply_error(line_no, format!("missing {what}")))?;
                    token
                        .parse::<f64>()
                        .map_err(|_| ply_error(line_no, format!("bad {what} `{token}`")))
                };
                let mut row = Vec::with_capacity(element.properties.len());
                for prop in &element.properties {
                    row.push(match prop.ty {
                        PropertyType::Scalar(_) => Value::Scalar(next_f64(&prop.name)?),
                        PropertyType::List(..) => {
                            let count = next_f64("list count")? as usize;
                            let mut items = Vec::with_capacity(count);
                            for _ in 0..count {
                                items.push(next_f64("list item")?);
                            }
                            Value::List(items)
                        }
                    });
                }
                rows.push(row);
            }
            tables.push(rows);
        }
    }
    Ok(tables)
}

fn find_element<'h>(
    header: &'h Header,
    name: &'static str,
) -> Result<(usize, &'h ElementDef), FormatError> {
    header
        .elements
        .iter()
        .enumerate()
        .find(|(_, e)| e.name == name)
        .ok_or_else(|| FormatError::MissingProperty {
            element: name,
            property: "<element itself>".to_string(),
        })
}

fn property_index(
    element: &ElementDef,
    element_name: &'static str,
    property: &str,
) -> Result<usize, FormatError> {
    element
        .properties
        .iter()
        .position(|p| p.name == property)
        .ok_or_else(|| FormatError::MissingProperty {
            element: element_name,
            property: property.to_string(),
        })
}

fn optional_property_index(element: &ElementDef, property: &str) -> Option<usize> {
    element.properties.iter().position(|p| p.name == property)
}

fn semantic_from(value: f64, row: usize) -> Result<UrbanClass, FormatError> {
    UrbanClass::from_code(value as u8).ok_or_else(|| {
        ply_error(row + 1, format!("unknown semantic code {value} in row {row}"))
    })
}

fn category_from(value: f64, row: usize) -> Result<BuildingCategory, FormatError> {
    BuildingCategory::from_code(value as u8).ok_or_else(|| {
        ply_error(row + 1, format!("unknown category code {value} in row {row}"))
    })
}

pub fn read_cloud_ply(data: &[u8]) -> Result<AnnotatedPointCloud, FormatError> {
    let header = parse_header(data)?;
    let (vertex_table, vertex) = find_element(&header, "vertex")?;
    let ix = property_index(vertex, "vertex", "x")?;
    let iy = property_index(vertex, "vertex", "y")?;
    let iz = property_index(vertex, "vertex", "z")?;
    let isem = property_index(vertex, "vertex", "semantic")?;
    let iinst = property_index(vertex, "vertex", "instance")?;
    let icat = property_index(vertex, "vertex", "category")?;
    let rgb = (
        optional_property_index(vertex, "red"),
        optional_property_index(vertex, "green"),
        optional_property_index(vertex, "blue"),
    );

    let tables = parse_body(data, &header)?;
    let rows = &tables[vertex_table];
    let mut positions = Vec::with_capacity(rows.len());
    let mut colors = Vec::with_capacity(rows.len());
    let mut semantic = Vec::with_capacity(rows.len());
    let mut instance = Vec::with_capacity(rows.len());
    let mut category = Vec::with_capacity(rows.len());
    for (row_no, row) in rows.iter().enumerate() {
        positions.push(Vec3::new(
            row[ix].scalar(),
            row[iy].scalar(),
            row[iz].scalar(),
        ));
        colors.push(match rgb {
            (Some(r), Some(g), Some(b)) => [
                row[r].scalar() as u8,
                row[g].scalar() as u8,
                row[b].scalar() as u8,
            ],
            _ => [128, 128, 128],
        });
        semantic.push(semantic_from(row[isem].scalar(), row_no)?);
        instance.push(row[iinst].scalar() as u32);
        category.push(category_from(row[icat].scalar(), row_no)?);
    }
    Ok(AnnotatedPointCloud::new(
        positions, colors, semantic, instance, category,
    )?)
}

pub fn write_cloud_ply<W: Write>(w: &mut W, cloud: &AnnotatedPointCloud) -> Result<(), FormatError> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n",
        cloud.len()
    )?;
    w.write_all(
        b"property double x\nproperty double y\nproperty double z\n\
          property uchar red\nproperty uchar green\nproperty uchar blue\n\
          property uchar semantic\nproperty uint instance\nproperty uchar category\n\
          end_header\n",
    )?;
    for i in 0..cloud.len() {
        let p = cloud.positions()[i];
        w.write_all(&p.x.to_le_bytes())?;
        w.write_all(&p.y.to_le_bytes())?;
        w.write_all(&p.z.to_le_bytes())?;
        w.write_all(&cloud.colors()[i])?;
        w.write_all(&[cloud.semantic()[i].code()])?;
        w.write_all(&cloud.instance()[i].to_le_bytes())?;
        w.write_all(&[cloud.category()[i].code()])?;
    }
    Ok(())
}

pub fn read_mesh_ply(data: &[u8]) -> Result<TriangleMesh, FormatError> {
    let header = parse_header(data)?;
    let (vertex_table, vertex) = find_element(&header, "vertex")?;
    let ix = property_index(vertex, "vertex", "x")?;
    let iy = property_index(vertex, "vertex", "y")?;
    let iz = property_index(vertex, "vertex", "z")?;
    let rgb = (
        optional_property_index(vertex, "red"),
        optional_property_index(vertex, "green"),
        optional_property_index(vertex, "blue"),
    );
    let (face_table, face) = find_element(&header, "face")?;
    let iverts = property_index(face, "face", "vertex_indices")?;
    let isem = property_index(face, "face", "semantic")?;
    let iinst = property_index(face, "face", "instance")?;
    let icat = property_index(face, "face", "category")?;

    let tables = parse_body(data, &header)?;

    let vertex_rows = &tables[vertex_table];
    let mut vertices = Vec::with_capacity(vertex_rows.len());
    let mut colors = Vec::with_capacity(vertex_rows.len());
    let has_colors = matches!(rgb, (Some(_), Some(_), Some(_)));
    for row in vertex_rows {
        vertices.push(Vec3::new(
            row[ix].scalar(),
            row[iy].scalar(),
            row[iz].scalar(),
        ));
        if let (Some(r), Some(g), Some(b)) = rgb {
            colors.push([
                row[r].scalar() as u8,
                row[g].scalar() as u8,
                row[b].scalar() as u8,
            ]);
        }
    }

    let face_rows = &tables[face_table];
    let mut triangles = Vec::with_capacity(face_rows.len());
    let mut semantic = Vec::with_capacity(face_rows.len());
    let mut instance = Vec::with_capacity(face_rows.len());
    let mut category = Vec::with_capacity(face_rows.len());
    for (row_no, row) in face_rows.iter().enumerate() {
        let Value::List(items) = &row[iverts] else {
            return Err(ply_error(row_no + 1, "vertex_indices is not a list"));
        };
        if items.len() != 3 {
            return Err(ply_error(
                row_no + 1,
                format!("face {row_no} has {} vertices, expected 3", items.len()),
            ));
        }
        triangles.push([items[0] as u32, items[1] as u32, items[2] as u32]);
        semantic.push(semantic_from(row[isem].scalar(), row_no)?);
        instance.push(row[iinst].scalar() as u32);
        category.push(category_from(row[icat].scalar(), row_no)?);
    }

    Ok(TriangleMesh::new(
        vertices,
        has_colors.then_some(colors),
        triangles,
        semantic,
        instance,
        category,
    )?)
}

pub fn write_mesh_ply<W: Write>(w: &mut W, mesh: &TriangleMesh) -> Result<(), FormatError> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n",
        mesh.vertices().len()
    )?;
    w.write_all(b"property double x\nproperty double y\nproperty double z\n")?;
    if mesh.vertex_colors().is_some() {
        w.write_all(b"property uchar red\nproperty uchar green\nproperty uchar blue\n")?;
    }
    writeln!(w, "element face {}", mesh.triangle_count())?;
    w.write_all(
        b"property list uchar uint vertex_indices\n\
          property uchar semantic\nproperty uint instance\nproperty uchar category\n\
          end_header\n",
    )?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        w.write_all(&v.x.to_le_bytes())?;
        w.write_all(&v.y.to_le_bytes())?;
        w.write_all(&v.z.to_le_bytes())?;
        if let Some(colors) = mesh.vertex_colors() {
            w.write_all(&colors[i])?;
        }
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        w.write_all(&[3u8])?;
        for &v in tri {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[mesh.semantic()[t].code()])?;
        w.write_all(&mesh.instance()[t].to_le_bytes())?;
        w.write_all(&[mesh.category()[t].code()])?;
    }
    Ok(())
}

/// Write a cloud colorized by segmentation assignment for external viewers;
/// unassigned points come out mid-gray.
pub fn write_instance_colored_ply<W: Write>(
    w: &mut W,
    cloud: &AnnotatedPointCloud,
    assignment: &[u32],
) -> Result<(), FormatError> {
    if assignment.len() != cloud.len() {
        return Err(urbanseg_core::Error::DimensionMismatch {
            what: "assignment",
            expected: cloud.len(),
            got: assignment.len(),
        }
        .into());
    }
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n",
        cloud.len()
    )?;
    w.write_all(
        b"property double x\nproperty double y\nproperty double z\n\
          property uchar red\nproperty uchar green\nproperty uchar blue\n\
          property uint instance\nend_header\n",
    )?;
    for (p, &a) in cloud.positions().iter().zip(assignment) {
        w.write_all(&p.x.to_le_bytes())?;
        w.write_all(&p.y.to_le_bytes())?;
        w.write_all(&p.z.to_le_bytes())?;
        w.write_all(&instance_color(a))?;
        w.write_all(&a.to_le_bytes())?;
    }
    Ok(())
}

/// Golden-angle hue palette keyed on the proposal id.
fn instance_color(id: u32) -> [u8; 3] {
    if id == UNASSIGNED {
        return [128, 128, 128];
    }
    let hue = (id as f64 * 0.618_033_988_749_895).fract();
    let h6 = hue * 6.0;
    let sector = h6 as u32 % 6;
    let f = h6.fract();
    let (r, g, b) = match sector {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, 1.0 - f),
    };
    [
        (40.0 + 215.0 * r) as u8,
        (40.0 + 215.0 * g) as u8,
        (40.0 + 215.0 * b) as u8,
    ]
}

pub fn write_cloud_ply_file(path: &Path, cloud: &AnnotatedPointCloud) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cloud_ply(&mut w, cloud)?;
    w.flush()?;
    Ok(())
}

pub fn read_cloud_ply_file(path: &Path) -> Result<AnnotatedPointCloud, FormatError> {
    read_cloud_ply(&std::fs::read(path)?)
}

pub fn write_mesh_ply_file(path: &Path, mesh: &TriangleMesh) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh_ply(&mut w, mesh)?;
    w.flush()?;
    Ok(())
}

pub fn read_mesh_ply_file(path: &Path) -> Result<TriangleMesh, FormatError> {
    read_mesh_ply(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_cloud;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use urbanseg_core::model::NO_INSTANCE;

    #[test]
    fn cloud_round_trips_through_binary_ply() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let cloud = random_cloud(&mut rng, 60);
            let mut bytes = Vec::new();
            write_cloud_ply(&mut bytes, &cloud).unwrap();
            assert_eq!(read_cloud_ply(&bytes).unwrap(), cloud);
        }
    }

    #[test]
    fn ascii_ply_with_extra_properties_is_accepted() {
        let text = "ply\n\
                    format ascii 1.0\n\
                    comment extended cloud\n\
                    element vertex 2\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar red\nproperty uchar green\nproperty uchar blue\n\
                    property float confidence\n\
                    property uchar semantic\nproperty uint instance\nproperty uchar category\n\
                    end_header\n\
                    1.5 2.5 3.5 10 20 30 0.9 6 7 2\n\
                    -1 0 0 1 2 3 0.5 0 4294967295 255\n";
        let cloud = read_cloud_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.positions()[0], Vec3::new(1.5, 2.5, 3.5));
        assert_eq!(cloud.semantic()[0], UrbanClass::Building);
        assert_eq!(cloud.instance()[0], 7);
        assert_eq!(cloud.category()[0], BuildingCategory::Office);
        assert_eq!(cloud.instance()[1], NO_INSTANCE);
    }

    #[test]
    fn missing_instance_property_is_named() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar semantic\nproperty uchar category\n\
                    end_header\n0 0 0 0 255\n";
        let err = read_cloud_ply(text.as_bytes()).unwrap_err();
        match err {
            FormatError::MissingProperty { element, property } => {
                assert_eq!(element, "vertex");
                assert_eq!(property, "instance");
            }
            other => panic!("expected missing property, got {other}"),
        }
    }

    #[test]
    fn empty_cloud_round_trips() {
        let cloud = AnnotatedPointCloud::empty();
        let mut bytes = Vec::new();
        write_cloud_ply(&mut bytes, &cloud).unwrap();
        assert_eq!(read_cloud_ply(&bytes).unwrap(), cloud);
    }

    #[test]
    fn mesh_round_trips() {
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(1.0, 1.0, 2.0),
            ],
            Some(vec![[255, 0, 0], [0, 255, 0], [0, 0, 255], [9, 9, 9]]),
            vec![[0, 1, 2], [1, 3, 2]],
            vec![UrbanClass::Ground, UrbanClass::Building],
            vec![NO_INSTANCE, 12],
            vec![BuildingCategory::Unlabeled, BuildingCategory::Cultural],
        )
        .unwrap();
        let mut bytes = Vec::new();
        write_mesh_ply(&mut bytes, &mesh).unwrap();
        assert_eq!(read_mesh_ply(&bytes).unwrap(), mesh);
    }

    #[test]
    fn non_triangular_face_is_rejected() {
        let text = "ply\nformat ascii 1.0\n\
                    element vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar uint vertex_indices\n\
                    property uchar semantic\nproperty uint instance\nproperty uchar category\n\
                    end_header\n\
                    0 0 0\n1 0 0\n1 1 0\n0 1 0\n\
                    4 0 1 2 3 0 4294967295 255\n";
        let err = read_mesh_ply(text.as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Ply { .. }), "{err}");
        assert!(err.to_string().contains("4 vertices"));
    }

    #[test]
    fn truncated_binary_body_reports_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cloud = loop {
            let c = random_cloud(&mut rng, 20);
            if !c.is_empty() {
                break c;
            }
        };
        let mut bytes = Vec::new();
        write_cloud_ply(&mut bytes, &cloud).unwrap();
        bytes.truncate(bytes.len() - 2);
        let err = read_cloud_ply(&bytes).unwrap_err();
        assert!(matches!(err, FormatError::Field { .. }), "{err}");
    }

    #[test]
    fn instance_colored_export_is_readable_ply() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cloud = loop {
            let c = random_cloud(&mut rng, 20);
            if !c.is_empty() {
                break c;
            }
        };
        let assignment: Vec<u32> = (0..cloud.len())
            .map(|i| if i % 3 == 0 { UNASSIGNED } else { i as u32 % 5 })
            .collect();
        let mut bytes = Vec::new();
        write_instance_colored_ply(&mut bytes, &cloud, &assignment).unwrap();
        let header = parse_header(&bytes).unwrap();
        assert!(header.binary);
        assert_eq!(header.elements[0].count, cloud.len());
    }
}
