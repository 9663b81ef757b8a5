//! OFF, OBJ and PLY readers/writers. Only positions and faces are kept;
//! polygons are fan-triangulated.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::TriangleMesh;
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let bytes = std::fs::read(path)?;
    let res = match ext.as_str() {
        "off" => read_off(&bytes[..]),
        "obj" => read_obj(&bytes[..]),
        "ply" => read_ply(&bytes[..]),
        _ => return Err(Error::parse(path, format!("unsupported mesh extension '{ext}'"))),
    };
    // readers report "<stream>"; attach the real path
    res.map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })
}

fn perr(msg: impl Into<String>) -> Error {
    Error::parse("<stream>", msg)
}

fn fan(poly: &[usize], out: &mut Vec<[usize; 3]>) -> Result<()> {
    if poly.len() < 3 {
        return Err(perr(format!("face with {} vertices", poly.len())));
    }
    for k in 1..poly.len() - 1 {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
    Ok(())
}

fn finish(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<TriangleMesh> {
    let n = vertices.len();
    if let Some(bad) = faces.iter().flatten().find(|&&v| v >= n) {
        return Err(perr(format!("face index {bad} out of range for {n} vertices")));
    }
    TriangleMesh::new(vertices, faces).map_err(|e| match e {
        Error::Parse { message, .. } => perr(message),
        other => other,
    })
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(format!("missing {what}")))?;
    tok.parse().map_err(|_| perr(format!("invalid {what} '{tok}'")))
}

/// Non-blank lines with `#` comments stripped.
fn content_lines<R: Read>(r: R) -> impl Iterator<Item = std::io::Result<String>> {
    BufReader::new(r).lines().filter_map(|l| match l {
        Ok(l) => {
            let l = match l.find('#') {
                Some(i) => l[..i].to_string(),
                None => l,
            };
            if l.trim().is_empty() {
                None
            } else {
                Some(Ok(l))
            }
        }
        Err(e) => Some(Err(e)),
    })
}

pub fn read_off<R: Read>(r: R) -> Result<TriangleMesh> {
    let lines: Vec<String> = content_lines(r).collect::<std::io::Result<_>>()?;
    let mut lines = lines.iter().map(|l| l.split_whitespace());
    let mut head = lines.next().ok_or_else(|| perr("empty file"))?;
    let mut counts = match head.next() {
        Some("OFF") => {
            let rest: Vec<&str> = head.collect();
            if rest.is_empty() {
                lines.next().ok_or_else(|| perr("missing counts line"))?.collect()
            } else {
                rest
            }
        }
        _ => return Err(perr("missing OFF header")),
    }
    .into_iter();
    let nv: usize = parse_num(counts.next(), "vertex count")?;
    let nf: usize = parse_num(counts.next(), "face count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut t = lines.next().ok_or_else(|| perr("missing vertex line"))?;
        let x = parse_num(t.next(), "coordinate")?;
        let y = parse_num(t.next(), "coordinate")?;
        let z = parse_num(t.next(), "coordinate")?;
        vertices.push([x, y, z]);
    }
    let mut faces = Vec::with_capacity(nf);
    let mut poly = Vec::new();
    for _ in 0..nf {
        // anything after the k indices (per-face colour) is ignored
        let mut t = lines.next().ok_or_else(|| perr("missing face line"))?;
        let k: usize = parse_num(t.next(), "face size")?;
        poly.clear();
        for _ in 0..k {
            poly.push(parse_num(t.next(), "face index")?);
        }
        fan(&poly, &mut faces)?;
    }
    finish(vertices, faces)
}

pub fn read_obj<R: Read>(r: R) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::new();
    for line in content_lines(r) {
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let x = parse_num(tok.next(), "coordinate")?;
                let y = parse_num(tok.next(), "coordinate")?;
                let z = parse_num(tok.next(), "coordinate")?;
                vertices.push([x, y, z]);
            }
            Some("f") => {
                poly.clear();
                for t in tok {
                    let idx = t.split('/').next().unwrap_or("");
                    let i: i64 = parse_num(Some(idx), "face index")?;
                    let resolved = match i {
                        0 => return Err(perr("OBJ face index 0")),
                        i if i > 0 => (i - 1) as usize,
                        i => {
                            let back = (-i) as usize;
                            if back > vertices.len() {
                                return Err(perr(format!("relative face index {i} out of range")));
                            }
                            vertices.len() - back
                        }
                    };
                    poly.push(resolved);
                }
                fan(&poly, &mut faces)?;
            }
            _ => {}
        }
    }
    finish(vertices, faces)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug)]
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
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return Err(perr(format!("unknown PLY scalar type '{s}'"))),
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

#[derive(Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Cursor over the PLY body that yields one numeric value at a time.
enum Body<'a> {
    Ascii(std::iter::Flatten<std::vec::IntoIter<std::str::SplitWhitespace<'a>>>),
    Binary(&'a [u8]),
}

impl Body<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        match self {
            Body::Ascii(it) => parse_num(it.next(), "PLY value"),
            Body::Binary(buf) => {
                let s = ty.size();
                if buf.len() < s {
                    return Err(perr("truncated binary PLY body"));
                }
                let v = ty.read_le(buf);
                *buf = &buf[s..];
                Ok(v)
            }
        }
    }
}

pub fn read_ply<R: Read>(mut r: R) -> Result<TriangleMesh> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let end = find_header_end(&bytes).ok_or_else(|| perr("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end.0]).map_err(|_| perr("non-UTF8 PLY header"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(perr("missing ply magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(PlyEncoding::BinaryLittleEndian),
            ["format", other, _] => return Err(perr(format!("unsupported PLY format '{other}'"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: parse_num(Some(count), "element count")?,
                props: Vec::new(),
            }),
            ["property", "list", c, i, name] => elements
                .last_mut()
                .ok_or_else(|| perr("property before element"))?
                .props
                .push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(c)?,
                    item: Scalar::parse(i)?,
                }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| perr("property before element"))?
                .props
                .push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                }),
            ["comment", ..] | ["obj_info", ..] | [] | ["end_header"] => {}
            _ => return Err(perr(format!("unrecognized PLY header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| perr("missing PLY format line"))?;
    let body_bytes = &bytes[end.1..];
    let mut body = match encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body_bytes).map_err(|_| perr("non-UTF8 ascii PLY body"))?;
            let lines: Vec<_> = text.lines().map(str::split_whitespace).collect();
            Body::Ascii(lines.into_iter().flatten())
        }
        PlyEncoding::BinaryLittleEndian => Body::Binary(body_bytes),
    };

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut pos = [0.0f64; 3];
            for p in &el.props {
                match p {
                    Property::Scalar { name, ty } => {
                        let v = body.next(*ty)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => pos[0] = v,
                                "y" => pos[1] = v,
                                "z" => pos[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let k = body.next(*count)? as usize;
                        poly.clear();
                        for _ in 0..k {
                            poly.push(body.next(*item)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            let idx: Vec<usize> = poly
                                .iter()
                                .map(|&v| {
                                    if v < 0.0 {
                                        Err(perr("negative PLY face index"))
                                    } else {
                                        Ok(v as usize)
                                    }
                                })
                                .collect::<Result<_>>()?;
                            fan(&idx, &mut faces)?;
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(pos);
            }
        }
    }
    finish(vertices, faces)
}

/// Returns (end of header text, start of body).
fn find_header_end(bytes: &[u8]) -> Option<(usize, usize)> {
    let pat = b"end_header";
    let pos = bytes.windows(pat.len()).position(|w| w == pat)?;
    let mut body = pos + pat.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    Some((pos, body))
}

pub fn write_off<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", mesh.n_vertices(), mesh.n_faces())?;
    for p in mesh.vertices() {
        writeln!(w, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    for p in mesh.vertices() {
        writeln!(w, "v {:e} {:e} {:e}", p[0], p[1], p[2])?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_ply<W: Write>(mesh: &TriangleMesh, mut w: W, encoding: PlyEncoding) -> Result<()> {
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    write!(
        w,
        "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.n_vertices(),
        mesh.n_faces()
    )?;
    match encoding {
        PlyEncoding::Ascii => {
            for p in mesh.vertices() {
                writeln!(w, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
            }
            for f in mesh.faces() {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        PlyEncoding::BinaryLittleEndian => {
            for p in mesh.vertices() {
                for c in p {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
            for f in mesh.faces() {
                w.write_all(&[3u8])?;
                for &v in f {
                    w.write_all(&(v as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn minimal_off() {
        let src = "OFF\n# a comment\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let m = read_off(src.as_bytes()).unwrap();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.n_faces(), 1);
    }

    #[test]
    fn off_index_out_of_range() {
        let src = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n";
        assert!(matches!(read_off(src.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn off_empty_and_garbage() {
        assert!(matches!(read_off("OFF\n0 0 0\n".as_bytes()), Err(Error::EmptyMesh(_))));
        assert!(matches!(read_off("NOPE\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(read_off("OFF\n3 1 0\n0 0 x\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn obj_quads_and_slashes() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2/2/1 3/3/1 4/4/1\n";
        let m = read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.n_faces(), 2);
        assert_eq!(m.faces()[1], [0, 2, 3]);
        let rel = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
        assert_eq!(read_obj(rel.as_bytes()).unwrap().faces()[0], [0, 1, 2]);
    }

    #[test]
    fn writers_roundtrip() {
        let mesh = shapes::icosphere(1);
        let mut off = Vec::new();
        write_off(&mesh, &mut off).unwrap();
        let mut obj = Vec::new();
        write_obj(&mesh, &mut obj).unwrap();
        let mut ply_a = Vec::new();
        write_ply(&mesh, &mut ply_a, PlyEncoding::Ascii).unwrap();
        let mut ply_b = Vec::new();
        write_ply(&mesh, &mut ply_b, PlyEncoding::BinaryLittleEndian).unwrap();
        for back in [
            read_off(&off[..]).unwrap(),
            read_obj(&obj[..]).unwrap(),
            read_ply(&ply_a[..]).unwrap(),
            read_ply(&ply_b[..]).unwrap(),
        ] {
            assert_eq!(back.faces(), mesh.faces());
            for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn ply_skips_extra_properties() {
        let mut body = Vec::new();
        body.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 3\nproperty float x\n\
              property float y\nproperty float z\nproperty uchar red\nelement face 1\n\
              property list uchar uint vertex_indices\nproperty float quality\nend_header\n",
        );
        for p in [[0f32, 0., 0.], [1., 0., 0.], [0., 1., 0.]] {
            for c in p {
                body.extend_from_slice(&c.to_le_bytes());
            }
            body.push(200);
        }
        body.push(3);
        for i in [0u32, 1, 2] {
            body.extend_from_slice(&i.to_le_bytes());
        }
        body.extend_from_slice(&0.5f32.to_le_bytes());
        let m = read_ply(&body[..]).unwrap();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(m.vertices()[1], [1.0, 0.0, 0.0]);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert!(read_ply(&body[..body.len() - 2]).is_err());
    }
}
