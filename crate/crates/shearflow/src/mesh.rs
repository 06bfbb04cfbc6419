//! 2D triangle meshes: structured generation, plain-text import/export,
//! edge topology and validation.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Boundary tag; the artifact uses a single Dirichlet boundary Γ.
pub const GAMMA: u32 = 1;

/// A conforming triangulation of a plane domain.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges (vertex pairs) with their tag.
    pub boundary_edges: Vec<([usize; 2], u32)>,
}

/// Unique interior+boundary edges and the triangle→edge incidence.
#[derive(Debug, Clone)]
pub struct EdgeTopology {
    /// Edge endpoints, ordered (min, max).
    pub edges: Vec<[usize; 2]>,
    /// For each triangle, the edge ids opposite local vertices are at
    /// positions: 0 ↔ (v0,v1), 1 ↔ (v1,v2), 2 ↔ (v2,v0).
    pub triangle_edges: Vec<[usize; 3]>,
    /// Number of incident triangles per edge.
    pub edge_valence: Vec<u8>,
}

impl Mesh {
    /// Crossed-diagonal triangulation of the rectangle `[x0,x1]×[y0,y1]`
    /// with `nx × ny` cells, each split into four triangles around its
    /// center. The outer boundary is tagged Γ.
    pub fn structured(nx: usize, ny: usize, rect: [f64; 4]) -> Result<Mesh> {
        let [x0, y0, x1, y1] = rect;
        if nx < 1 || ny < 1 {
            return Err(Error::Mesh(format!("need nx, ny >= 1, got {nx} x {ny}")));
        }
        if !(x1 > x0) || !(y1 > y0) {
            return Err(Error::Mesh(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([x0 + i as f64 * hx, y0 + j as f64 * hy]);
            }
        }
        let corner = |i: usize, j: usize| j * (nx + 1) + i;
        let center_base = vertices.len();
        for j in 0..ny {
            for i in 0..nx {
                vertices.push([x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy]);
            }
        }
        let center = |i: usize, j: usize| center_base + j * nx + i;

        let mut triangles = Vec::with_capacity(4 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (bl, br) = (corner(i, j), corner(i + 1, j));
                let (tr, tl) = (corner(i + 1, j + 1), corner(i, j + 1));
                let c = center(i, j);
                triangles.push([bl, br, c]);
                triangles.push([br, tr, c]);
                triangles.push([tr, tl, c]);
                triangles.push([tl, bl, c]);
            }
        }

        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_edges.push(([corner(i, 0), corner(i + 1, 0)], GAMMA));
            boundary_edges.push(([corner(i, ny), corner(i + 1, ny)], GAMMA));
        }
        for j in 0..ny {
            boundary_edges.push(([corner(0, j), corner(0, j + 1)], GAMMA));
            boundary_edges.push(([corner(nx, j), corner(nx, j + 1)], GAMMA));
        }

        let mesh = Mesh { vertices, triangles, boundary_edges };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Reads the plain-text format: a header `nv nt`, then `nv` coordinate
    /// lines `x y`, then `nt` index triples (0-based). Boundary edges are
    /// recovered from the topology and tagged Γ.
    pub fn from_text(path: &Path) -> Result<Mesh> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let mut next_line = || -> Result<String> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        if !l.trim().is_empty() {
                            return Ok(l);
                        }
                    }
                    None => return Err(Error::Format("unexpected end of mesh file".into())),
                }
            }
        };
        let header = next_line()?;
        let mut it = header.split_whitespace();
        let nv: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("mesh header must be `nv nt`".into()))?;
        let nt: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("mesh header must be `nv nt`".into()))?;
        let mut vertices = Vec::with_capacity(nv);
        for k in 0..nv {
            let l = next_line()?;
            let mut it = l.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad coordinate line {k}")))?;
            let y: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad coordinate line {k}")))?;
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for k in 0..nt {
            let l = next_line()?;
            let mut idx = [0usize; 3];
            let mut it = l.split_whitespace();
            for slot in idx.iter_mut() {
                *slot = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Format(format!("bad triangle line {k}")))?;
                if *slot >= nv {
                    return Err(Error::Format(format!(
                        "triangle {k} references vertex {} >= {nv}",
                        *slot
                    )));
                }
            }
            triangles.push(idx);
        }
        let mut mesh = Mesh { vertices, triangles, boundary_edges: Vec::new() };
        mesh.boundary_edges = mesh
            .derive_boundary()?
            .into_iter()
            .map(|e| (e, GAMMA))
            .collect();
        mesh.validate()?;
        Ok(mesh)
    }

    /// Writes the plain-text format read by [`Mesh::from_text`].
    pub fn to_text(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{} {}", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(f, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(f, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Edge topology in first-encounter order over triangles.
    pub fn edge_topology(&self) -> EdgeTopology {
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut valence = Vec::new();
        let mut triangle_edges = Vec::with_capacity(self.triangles.len());
        for t in &self.triangles {
            let local = [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]];
            let mut ids = [0usize; 3];
            for (k, e) in local.iter().enumerate() {
                let key = [e[0].min(e[1]), e[0].max(e[1])];
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    valence.push(0u8);
                    edges.len() - 1
                });
                valence[id] = valence[id].saturating_add(1);
                ids[k] = id;
            }
            triangle_edges.push(ids);
        }
        EdgeTopology { edges, triangle_edges, edge_valence: valence }
    }

    fn derive_boundary(&self) -> Result<Vec<[usize; 2]>> {
        let topo = self.edge_topology();
        let mut out = Vec::new();
        for (e, &v) in topo.edges.iter().zip(&topo.edge_valence) {
            match v {
                1 => out.push(*e),
                2 => {}
                v => {
                    return Err(Error::Mesh(format!(
                        "edge ({}, {}) shared by {v} triangles; mesh is not conforming",
                        e[0], e[1]
                    )))
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Checks positive orientation, conformity and that the stored boundary
    /// edges exactly cover the topological boundary.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let area = self.signed_area(t);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "triangle {t} has non-positive signed area {area}"
                )));
            }
        }
        let derived = self.derive_boundary()?;
        let mut stored: Vec<[usize; 2]> = self
            .boundary_edges
            .iter()
            .map(|(e, _)| [e[0].min(e[1]), e[0].max(e[1])])
            .collect();
        stored.sort();
        if stored != derived {
            return Err(Error::Mesh(format!(
                "stored boundary ({} edges) does not match topological boundary ({} edges)",
                stored.len(),
                derived.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_cell_counts() {
        let m = Mesh::structured(1, 1, [0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.vertices.len(), 5);
        assert_eq!(m.triangles.len(), 4);
        assert_eq!(m.boundary_edges.len(), 4);
    }

    #[test]
    fn areas_partition_the_square() {
        let m = Mesh::structured(16, 16, [0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(m.area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn euler_relation() {
        for (nx, ny) in [(1, 1), (3, 2), (8, 8)] {
            let m = Mesh::structured(nx, ny, [0.0, 0.0, 2.0, 1.0]).unwrap();
            let topo = m.edge_topology();
            let v = m.vertices.len() as i64;
            let e = topo.edges.len() as i64;
            let t = m.triangles.len() as i64;
            assert_eq!(v - e + t, 1);
        }
    }

    #[test]
    fn rejects_degenerate_rectangle() {
        assert!(Mesh::structured(2, 2, [0.0, 0.0, 0.0, 1.0]).is_err());
        assert!(Mesh::structured(0, 2, [0.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh::structured(3, 4, [0.0, 0.0, 1.0, 2.0]).unwrap();
        let dir = std::env::temp_dir().join("shearflow-mesh-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.txt");
        m.to_text(&path).unwrap();
        let m2 = Mesh::from_text(&path).unwrap();
        assert_eq!(m.vertices, m2.vertices);
        assert_eq!(m.triangles, m2.triangles);
        let mut a: Vec<_> = m.boundary_edges.iter().map(|(e, _)| *e).collect();
        let mut b: Vec<_> = m2.boundary_edges.iter().map(|(e, _)| *e).collect();
        a.iter_mut().for_each(|e| e.sort());
        b.iter_mut().for_each(|e| e.sort());
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
