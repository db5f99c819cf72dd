//! Binary little-endian PLY for point clouds.
//!
//! Writes `x y z` as float32 plus optional `red green blue` as uint8. Reading
//! accepts any scalar property layout as long as the vertex element comes
//! first; unknown scalar properties are skipped.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Property {
    name: String,
    kind: Scalar,
    offset: usize,
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

pub fn parse_ply(bytes: &[u8]) -> Result<PointCloud> {
    const END: &[u8] = b"end_header\n";
    let header_end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Ply("missing end_header".into()))?
        + END.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| Error::Ply("header is not utf-8".into()))?;
    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(Error::Ply("missing ply magic".into()));
    }

    let mut vertex_count = None;
    let mut props: Vec<Property> = Vec::new();
    let mut stride = 0usize;
    let mut in_vertex = false;
    let mut seen_element = false;
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("binary_little_endian") {
                    return Err(Error::Ply(format!("unsupported format line '{line}'")));
                }
            }
            Some("element") => {
                let name = tok.next().unwrap_or_default();
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::Ply(format!("bad element line '{line}'")))?;
                if name == "vertex" {
                    if seen_element {
                        return Err(Error::Ply("vertex must be the first element".into()));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                }
                seen_element = true;
            }
            Some("property") if in_vertex => {
                let ty = tok.next().unwrap_or_default();
                if ty == "list" {
                    return Err(Error::Ply("list properties on vertices are unsupported".into()));
                }
                let kind = Scalar::parse(ty).ok_or_else(|| Error::Ply(format!("unknown type '{ty}'")))?;
                let name = tok
                    .next()
                    .ok_or_else(|| Error::Ply(format!("bad property line '{line}'")))?;
                props.push(Property {
                    name: name.to_string(),
                    kind,
                    offset: stride,
                });
                stride += kind.size();
            }
            _ => {}
        }
    }

    let n = vertex_count.ok_or_else(|| Error::Ply("no vertex element".into()))?;
    let find = |name: &str| props.iter().find(|p| p.name == name);
    let (x, y, z) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::Ply("vertex element lacks x, y, z".into())),
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some((r, g, b)),
        _ => None,
    };

    let body = &bytes[header_end..];
    if body.len() < n * stride {
        return Err(Error::Ply(format!(
            "truncated body: {} vertices need {} bytes, found {}",
            n,
            n * stride,
            body.len()
        )));
    }
    let mut points = Vec::with_capacity(n);
    let mut colors = rgb.map(|_| Vec::with_capacity(n));
    for row in body.chunks_exact(stride).take(n) {
        let get = |p: &Property| p.kind.read(&row[p.offset..]);
        points.push(Point3::new(get(x), get(y), get(z)));
        if let (Some((r, g, b)), Some(c)) = (rgb, colors.as_mut()) {
            let scale = |p: &Property| match p.kind {
                Scalar::F32 | Scalar::F64 => get(p).clamp(0.0, 1.0),
                _ => (get(p) / 255.0).clamp(0.0, 1.0),
            };
            c.push([scale(r), scale(g), scale(b)]);
        }
    }
    match colors {
        Some(c) => PointCloud::with_colors(points, c),
        None => PointCloud::new(points),
    }
    .map_err(|e| Error::Ply(e.to_string()))
}

pub fn encode_ply(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + cloud.len() * 15);
    let colors = cloud.colors();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    )
    .unwrap();
    if colors.is_some() {
        out.extend_from_slice(b"property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.extend_from_slice(b"end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(c) = colors {
            for ch in c[i] {
                out.push((ch * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    fs::write(path, encode_ply(cloud)).map_err(|e| Error::io(path, e))
}
