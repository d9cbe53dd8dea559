//! PLY point clouds with `x y z nx ny nz` vertex properties, ASCII or
//! binary little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{PointNormalCloud, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
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

    fn read_le(self, b: &[u8]) -> f64 {
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

struct Header {
    format: PlyFormat,
    vertex_count: usize,
    properties: Vec<(String, Scalar)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Ply(msg.into())
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(bad("missing 'ply' magic"));
    }
    let mut format = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    let mut seen_other_element = false;
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(bad("unexpected end of header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, _] => return Err(bad(format!("unsupported format {other}"))),
            ["element", "vertex", n] => {
                if seen_other_element {
                    return Err(bad("vertex element must come first"));
                }
                vertex_count = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => {
                in_vertex = false;
                seen_other_element = true;
            }
            ["property", "list", ..] if in_vertex => return Err(bad("list property on vertex")),
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown type {ty}")))?;
                properties.push((name.to_string(), s));
            }
            ["property", ..] => {}
            _ => return Err(bad(format!("unrecognized header line: {}", line.trim()))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| bad("missing format line"))?,
        vertex_count: vertex_count.ok_or_else(|| bad("missing vertex element"))?,
        properties,
    })
}

const FIELDS: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

pub fn read_ply<R: Read>(reader: R) -> Result<PointNormalCloud> {
    let mut r = BufReader::new(reader);
    let header = read_header(&mut r)?;
    let slots: Vec<usize> = FIELDS
        .iter()
        .map(|f| {
            header
                .properties
                .iter()
                .position(|(n, _)| n == f)
                .ok_or_else(|| bad(format!("missing vertex property {f}")))
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(header.vertex_count);
    let mut normals = Vec::with_capacity(header.vertex_count);
    let mut values = vec![0.0; header.properties.len()];
    match header.format {
        PlyFormat::Ascii => {
            let mut line = String::new();
            let mut read = 0;
            while read < header.vertex_count {
                line.clear();
                if r.read_line(&mut line)? == 0 {
                    return Err(bad(format!("expected {} vertices, got {read}", header.vertex_count)));
                }
                if line.trim().is_empty() {
                    continue;
                }
                let mut toks = line.split_whitespace();
                for v in values.iter_mut() {
                    let t = toks.next().ok_or_else(|| bad("short vertex line"))?;
                    *v = t.parse::<f64>().map_err(|_| bad(format!("bad number '{t}'")))?;
                }
                push_vertex(&values, &slots, &mut points, &mut normals);
                read += 1;
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let stride: usize = header.properties.iter().map(|(_, s)| s.size()).sum();
            let mut buf = vec![0u8; stride];
            for _ in 0..header.vertex_count {
                r.read_exact(&mut buf).map_err(|_| bad("truncated binary vertex data"))?;
                let mut off = 0;
                for (v, (_, s)) in values.iter_mut().zip(&header.properties) {
                    *v = s.read_le(&buf[off..]);
                    off += s.size();
                }
                push_vertex(&values, &slots, &mut points, &mut normals);
            }
        }
    }
    PointNormalCloud::new(points, normals)
}

fn push_vertex(values: &[f64], slots: &[usize], points: &mut Vec<Vec3>, normals: &mut Vec<Vec3>) {
    points.push(Vec3::new(values[slots[0]], values[slots[1]], values[slots[2]]));
    normals.push(Vec3::new(values[slots[3]], values[slots[4]], values[slots[5]]));
}

pub fn write_ply<W: Write>(writer: W, cloud: &PointNormalCloud, format: PlyFormat) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len())?;
    for f in FIELDS {
        writeln!(w, "property double {f}")?;
    }
    writeln!(w, "end_header")?;
    for (p, n) in cloud.iter() {
        let row = [p.x, p.y, p.z, n.x, n.y, n.z];
        match format {
            PlyFormat::Ascii => {
                let s: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", s.join(" "))?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_ply(path: impl AsRef<Path>) -> Result<PointNormalCloud> {
    read_ply(File::open(path)?)
}

pub fn save_ply(path: impl AsRef<Path>, cloud: &PointNormalCloud, format: PlyFormat) -> Result<()> {
    write_ply(File::create(path)?, cloud, format)
}
