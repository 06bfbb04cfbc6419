//! Field export: legacy VTK unstructured grids and CSV tables.

use std::io::Write;
use std::path::Path;

use crate::disc::Discretization;
use crate::error::Result;
use crate::fem::FeField;

/// Averages a per-quadrature-point scalar into one value per element.
pub fn cell_average(disc: &Discretization, values: &[f64]) -> Vec<f64> {
    let nq = disc.n_quad_per_elem();
    let ne = disc.mesh.triangles.len();
    let weights = disc.qp_weights();
    let mut out = Vec::with_capacity(ne);
    for t in 0..ne {
        let mut num = 0.0;
        let mut den = 0.0;
        for q in 0..nq {
            num += weights[t * nq + q] * values[t * nq + q];
            den += weights[t * nq + q];
        }
        out.push(num / den);
    }
    out
}

/// Writes a legacy ASCII VTK unstructured grid with vertex vector fields
/// (sampled at mesh vertices) and per-cell scalars.
pub fn write_vtk(
    path: &Path,
    disc: &Discretization,
    title: &str,
    point_vectors: &[(&str, &FeField)],
    cell_scalars: &[(&str, &[f64])],
) -> Result<()> {
    let mesh = &disc.mesh;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# vtk DataFile Version 2.0")?;
    writeln!(f, "{title}")?;
    writeln!(f, "ASCII")?;
    writeln!(f, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(f, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(f, "{} {} 0", v[0], v[1])?;
    }
    writeln!(f, "CELLS {} {}", mesh.triangles.len(), 4 * mesh.triangles.len())?;
    for t in &mesh.triangles {
        writeln!(f, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(f, "CELL_TYPES {}", mesh.triangles.len())?;
    for _ in &mesh.triangles {
        writeln!(f, "5")?;
    }
    if !point_vectors.is_empty() {
        writeln!(f, "POINT_DATA {}", mesh.vertices.len())?;
        for (name, field) in point_vectors {
            field.expect_velocity_space()?;
            writeln!(f, "VECTORS {name} double")?;
            let c = field.coeffs();
            for k in 0..mesh.vertices.len() {
                writeln!(f, "{} {} 0", c[2 * k], c[2 * k + 1])?;
            }
        }
    }
    if !cell_scalars.is_empty() {
        writeln!(f, "CELL_DATA {}", mesh.triangles.len())?;
        for (name, values) in cell_scalars {
            writeln!(f, "SCALARS {name} double 1")?;
            writeln!(f, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(f, "{v}")?;
            }
        }
    }
    Ok(())
}

/// Writes rows of (x, y, value...) columns.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

/// Vertex-sampled CSV of a velocity-space field: x, y, vx, vy.
pub fn field_csv_rows(disc: &Discretization, field: &FeField) -> Result<Vec<Vec<f64>>> {
    field.expect_velocity_space()?;
    let c = field.coeffs();
    Ok(disc
        .mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(k, v)| vec![v[0], v[1], c[2 * k], c[2 * k + 1]])
        .collect())
}
