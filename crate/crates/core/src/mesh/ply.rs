use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::TriangleMesh;
use crate::error::{Error, Result};

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

enum Property {
    Scalar(String),
    List,
}

/// Parses ASCII PLY. Only triangular faces are accepted.
pub(super) fn parse(text: &str, path: &Path) -> Result<TriangleMesh> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(perr(1, "missing `ply` magic".into())),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut ended = false;
    for (ln, line) in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("format") => match tok.next() {
                Some("ascii") => {}
                Some(other) => {
                    return Err(perr(
                        ln,
                        format!("only ASCII PLY is supported, got `{other}`"),
                    ))
                }
                None => return Err(perr(ln, "incomplete format line".into())),
            },
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| perr(ln, "element without name".into()))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| perr(ln, "element without a valid count".into()))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(ln, "property before any element".into()))?;
                let rest: Vec<&str> = tok.collect();
                let prop = match rest.as_slice() {
                    ["list", _, _, _] => Property::List,
                    [_, name] => Property::Scalar(name.to_string()),
                    _ => return Err(perr(ln, format!("malformed property `{line}`"))),
                };
                el.props.push(prop);
            }
            Some("end_header") => {
                ended = true;
                break;
            }
            Some(other) => return Err(perr(ln, format!("unexpected header keyword `{other}`"))),
        }
    }
    if !ended {
        return Err(perr(text.lines().count(), "missing end_header".into()));
    }

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let pos = |axis: &str| {
                    el.props
                        .iter()
                        .position(|p| matches!(p, Property::Scalar(n) if n == axis))
                };
                let (Some(xi), Some(yi), Some(zi)) = (pos("x"), pos("y"), pos("z")) else {
                    return Err(perr(0, "vertex element lacks x/y/z properties".into()));
                };
                vertices.reserve(el.count);
                for _ in 0..el.count {
                    let (ln, line) = next_data(&mut lines, &perr, "vertex")?;
                    let vals: Vec<&str> = line.split_whitespace().collect();
                    let get = |i: usize| -> Result<f64> {
                        vals.get(i)
                            .and_then(|s| s.parse::<f64>().ok())
                            .ok_or_else(|| perr(ln, format!("bad vertex record `{line}`")))
                    };
                    vertices.push(Vector3::new(get(xi)?, get(yi)?, get(zi)?));
                }
            }
            "face" => {
                if el.props.len() != 1 || !matches!(el.props[0], Property::List) {
                    return Err(perr(
                        0,
                        "face element must hold exactly one list property".into(),
                    ));
                }
                triangles.reserve(el.count);
                for _ in 0..el.count {
                    let (ln, line) = next_data(&mut lines, &perr, "face")?;
                    let vals: Vec<i64> = line
                        .split_whitespace()
                        .map(|s| s.parse::<i64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| perr(ln, format!("bad face record `{line}`")))?;
                    let (n, idx) = vals
                        .split_first()
                        .ok_or_else(|| perr(ln, "empty face record".into()))?;
                    if *n as usize != idx.len() {
                        return Err(perr(
                            ln,
                            format!("face declares {n} indices, has {}", idx.len()),
                        ));
                    }
                    if *n != 3 {
                        return Err(Error::UnsupportedGeometry {
                            path: path.to_path_buf(),
                            line: ln,
                            msg: format!("face with {n} vertices (only triangles are supported)"),
                        });
                    }
                    let mut tri = [0u32; 3];
                    for (slot, &i) in tri.iter_mut().zip(idx) {
                        if i < 0 || i as usize >= vertices.len() {
                            return Err(perr(ln, format!("face index {i} out of range")));
                        }
                        *slot = i as u32;
                    }
                    triangles.push(tri);
                }
            }
            _ => {
                for _ in 0..el.count {
                    next_data(&mut lines, &perr, &el.name)?;
                }
            }
        }
    }

    TriangleMesh::new(vertices, triangles)
}

fn next_data<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    perr: &impl Fn(usize, String) -> Error,
    what: &str,
) -> Result<(usize, &'a str)> {
    lines
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| perr(0, format!("unexpected end of file in {what} data")))
}

pub(super) fn to_ascii(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ply\nformat ascii 1.0");
    let _ = writeln!(s, "element vertex {}", mesh.vertices().len());
    let _ = writeln!(s, "property double x\nproperty double y\nproperty double z");
    let _ = writeln!(s, "element face {}", mesh.triangles().len());
    let _ = writeln!(s, "property list uchar int vertex_indices\nend_header");
    for v in mesh.vertices() {
        // `{:?}` on f64 prints the shortest representation that round-trips.
        let _ = writeln!(s, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}
