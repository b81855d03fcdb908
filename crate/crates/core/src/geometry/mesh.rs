use crate::error::{Error, Result};
use crate::math::{Aabb, Affine3, Vec3};

/// Triangles with area below this are dropped at load time.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Counts produced while cleaning up a triangle soup.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub kept: usize,
    pub dropped: usize,
}

/// Indexed triangle mesh with per-triangle geometric normals.
///
/// Normals follow right-hand winding: `normalize((b - a) x (c - a))`.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    bounds: Aabb,
}

impl TriangleMesh {
    /// Builds a mesh, dropping degenerate triangles and recomputing normals.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<(Self, LoadReport)> {
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for tri in triangles {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidGrid(format!(
                    "triangle {tri:?} references a vertex beyond {n}"
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(c - a);
            let area = 0.5 * cross.length();
            if !(area >= DEGENERATE_AREA) || !cross.is_finite() {
                dropped += 1;
                continue;
            }
            kept.push(tri);
            normals.push(cross.normalize());
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh { dropped });
        }
        let report = LoadReport {
            kept: kept.len(),
            dropped,
        };
        let bounds = Aabb::from_points(kept.iter().flat_map(|t| t.map(|i| vertices[i as usize])));
        Ok((
            TriangleMesh {
                vertices,
                triangles: kept,
                normals,
                bounds,
            },
            report,
        ))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, id: usize) -> [Vec3; 3] {
        self.triangles[id].map(|i| self.vertices[i as usize])
    }

    #[inline]
    pub fn normal(&self, id: usize) -> Vec3 {
        self.normals[id]
    }

    pub fn triangle_bounds(&self, id: usize) -> Aabb {
        Aabb::from_points(self.triangle(id))
    }

    /// Applies `transform` to every vertex and recomputes normals and bounds.
    pub fn transformed(&self, transform: &Affine3) -> Result<TriangleMesh> {
        let vertices = self.vertices.iter().map(|&v| transform.transform_point(v)).collect();
        TriangleMesh::new(vertices, self.triangles.clone()).map(|(m, _)| m)
    }

    /// Concatenates meshes into one soup. Triangle ids follow input order.
    pub fn merge<'a, I: IntoIterator<Item = &'a TriangleMesh>>(meshes: I) -> Result<TriangleMesh> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for mesh in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&mesh.vertices);
            triangles.extend(mesh.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        TriangleMesh::new(vertices, triangles).map(|(m, _)| m)
    }

    /// Total surface area.
    pub fn area(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                0.5 * (b - a).cross(c - a).length()
            })
            .sum()
    }
}

/// Parses an OBJ subset (`v` and `f` records) and applies `transform`.
///
/// Polygons are fan-triangulated around their first vertex. Texture and normal
/// indices in face records are accepted and ignored, as are all other record
/// types.
pub fn load_mesh(source: &[u8], transform: &Affine3) -> Result<(TriangleMesh, LoadReport)> {
    let text = std::str::from_utf8(source).map_err(|e| Error::MeshParse {
        line: 0,
        message: format!("not utf-8: {e}"),
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 || coords.len() > 4 {
                    return Err(Error::MeshParse {
                        line,
                        message: format!("vertex needs 3 coordinates, found {}", coords.len()),
                    });
                }
                let mut xyz = [0.0; 3];
                for (slot, tok) in xyz.iter_mut().zip(&coords) {
                    *slot = tok.parse::<f64>().map_err(|_| Error::MeshParse {
                        line,
                        message: format!("bad coordinate {tok:?}"),
                    })?;
                    if !slot.is_finite() {
                        return Err(Error::MeshParse {
                            line,
                            message: format!("non-finite coordinate {tok:?}"),
                        });
                    }
                }
                vertices.push(transform.transform_point(Vec3::from_array(xyz)));
            }
            "f" => {
                let mut poly = Vec::new();
                for tok in tokens {
                    let index_text = tok.split('/').next().unwrap_or("");
                    let idx: i64 = index_text.parse().map_err(|_| Error::MeshParse {
                        line,
                        message: format!("bad face index {tok:?}"),
                    })?;
                    let resolved = match idx {
                        0 => None,
                        i if i > 0 => Some(i as usize - 1),
                        i => vertices.len().checked_sub(i.unsigned_abs() as usize),
                    };
                    match resolved {
                        Some(v) if v < vertices.len() => poly.push(v as u32),
                        _ => {
                            return Err(Error::MeshParse {
                                line,
                                message: format!(
                                    "face index {idx} out of range ({} vertices so far)",
                                    vertices.len()
                                ),
                            })
                        }
                    }
                }
                if poly.len() < 3 {
                    return Err(Error::MeshParse {
                        line,
                        message: format!("face needs at least 3 vertices, found {}", poly.len()),
                    });
                }
                for k in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let (mesh, report) = TriangleMesh::new(vertices, triangles)?;
    log::info!(
        "loaded mesh: {} triangles kept, {} degenerate dropped",
        report.kept,
        report.dropped
    );
    Ok((mesh, report))
}

/// Writes `mesh` as OBJ text (vertices and faces only).
pub fn write_obj(mesh: &TriangleMesh) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}
