//! Taylor-Hood degrees of freedom and coefficient fields.
//!
//! Velocities are vector P2 (nodes at vertices and edge midpoints, two
//! components per node), the pressure is scalar P1 on vertices. The
//! divergence-free velocity space is realized weakly through the mixed
//! saddle-point formulation; pressure acts as the Lagrange multiplier.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::tensor::SymTensor;

/// Degree-of-freedom layout for one mesh.
///
/// Velocity node `k` (vertex `k`, or edge node `n_vertices + e`) owns dofs
/// `2k` and `2k + 1`. Pressure dof `q` lives on vertex `q` and sits at
/// global index `n_velocity + q` in the coupled saddle system.
#[derive(Debug)]
pub struct DofMap {
    pub n_vertices: usize,
    pub n_edges: usize,
    /// Per triangle, edge ids in local order (v0,v1), (v1,v2), (v2,v0).
    pub triangle_edges: Vec<[usize; 3]>,
    /// Dirichlet mask over velocity dofs (boundary nodes, both components).
    pub dirichlet: Vec<bool>,
    pub n_velocity: usize,
    pub n_pressure: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Result<DofMap> {
        let topo = mesh.edge_topology();
        let n_vertices = mesh.vertices.len();
        let n_edges = topo.edges.len();
        let n_velocity = 2 * (n_vertices + n_edges);

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        for (id, e) in topo.edges.iter().enumerate() {
            edge_index.insert(*e, id);
        }

        let mut dirichlet = vec![false; n_velocity];
        for (e, _tag) in &mesh.boundary_edges {
            let key = [e[0].min(e[1]), e[0].max(e[1])];
            let id = *edge_index
                .get(&key)
                .ok_or_else(|| Error::Mesh(format!("boundary edge {key:?} not in mesh")))?;
            for node in [e[0], e[1], n_vertices + id] {
                dirichlet[2 * node] = true;
                dirichlet[2 * node + 1] = true;
            }
        }

        Ok(DofMap {
            n_vertices,
            n_edges,
            triangle_edges: topo.triangle_edges,
            dirichlet,
            n_velocity,
            n_pressure: n_vertices,
        })
    }

    /// Total size of the coupled velocity-pressure system.
    pub fn n_system(&self) -> usize {
        self.n_velocity + self.n_pressure
    }

    /// Local velocity nodes of a triangle in P2 basis order.
    pub fn element_nodes(&self, t: usize, tri: &[usize; 3]) -> [usize; 6] {
        let e = self.triangle_edges[t];
        [
            tri[0],
            tri[1],
            tri[2],
            self.n_vertices + e[0],
            self.n_vertices + e[1],
            self.n_vertices + e[2],
        ]
    }

    pub fn dof_count(&self, role: FieldRole) -> usize {
        match role {
            FieldRole::Pressure => self.n_pressure,
            _ => self.n_velocity,
        }
    }

    fn role_is_constrained(role: FieldRole) -> bool {
        matches!(
            role,
            FieldRole::Velocity | FieldRole::Adjoint | FieldRole::Direction
        )
    }
}

/// What a coefficient vector represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRole {
    Velocity,
    Pressure,
    Control,
    Adjoint,
    Direction,
}

impl FieldRole {
    pub fn name(&self) -> &'static str {
        match self {
            FieldRole::Velocity => "velocity",
            FieldRole::Pressure => "pressure",
            FieldRole::Control => "control",
            FieldRole::Adjoint => "adjoint",
            FieldRole::Direction => "direction",
        }
    }
}

/// A finite-element coefficient vector tied to a dof map and a role.
///
/// Velocity, adjoint and direction fields carry exact zeros on Dirichlet
/// dofs; control fields are unconstrained (they discretize plain L²).
#[derive(Debug, Clone)]
pub struct FeField {
    dofmap: Arc<DofMap>,
    role: FieldRole,
    coeffs: Vec<f64>,
}

impl FeField {
    pub fn new(dofmap: Arc<DofMap>, role: FieldRole, coeffs: Vec<f64>) -> Result<FeField> {
        let expected = dofmap.dof_count(role);
        if coeffs.len() != expected {
            return Err(Error::LengthMismatch { expected, got: coeffs.len() });
        }
        if DofMap::role_is_constrained(role) {
            for (dof, (&c, &fixed)) in coeffs.iter().zip(&dofmap.dirichlet).enumerate() {
                if fixed && c != 0.0 {
                    return Err(Error::ConstrainedDofNonzero { dof });
                }
            }
        }
        Ok(FeField { dofmap, role, coeffs })
    }

    /// Like [`FeField::new`] but zeroes constrained dofs instead of failing.
    pub fn with_zeroed_boundary(
        dofmap: Arc<DofMap>,
        role: FieldRole,
        mut coeffs: Vec<f64>,
    ) -> Result<FeField> {
        if DofMap::role_is_constrained(role) {
            for (c, &fixed) in coeffs.iter_mut().zip(&dofmap.dirichlet) {
                if fixed {
                    *c = 0.0;
                }
            }
        }
        FeField::new(dofmap, role, coeffs)
    }

    pub fn zeros(dofmap: Arc<DofMap>, role: FieldRole) -> FeField {
        let n = dofmap.dof_count(role);
        FeField { dofmap, role, coeffs: vec![0.0; n] }
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Vec<f64> {
        &mut self.coeffs
    }

    pub fn expect_role(&self, expected: FieldRole) -> Result<()> {
        if self.role == expected {
            Ok(())
        } else {
            Err(Error::RoleMismatch { expected: expected.name(), got: self.role.name() })
        }
    }

    /// Checks the field lives in the velocity space (any non-pressure role).
    pub fn expect_velocity_space(&self) -> Result<()> {
        if self.role == FieldRole::Pressure {
            return Err(Error::RoleMismatch { expected: "velocity-space", got: "pressure" });
        }
        Ok(())
    }

    /// Returns a copy re-tagged with another velocity-space role.
    pub fn retag(&self, role: FieldRole) -> Result<FeField> {
        FeField::with_zeroed_boundary(self.dofmap.clone(), role, self.coeffs.clone())
    }

    pub fn axpy(&mut self, c: f64, other: &FeField) {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in self.coeffs.iter_mut() {
            *a *= c;
        }
    }

    pub fn sub(&self, other: &FeField) -> FeField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// Per-quadrature-point symmetric tensor values with integration weights.
#[derive(Debug, Clone)]
pub struct QuadTensorField {
    /// Quadrature points per element.
    pub n_per_elem: usize,
    /// Values, element-major.
    pub values: Vec<SymTensor>,
    /// Physical quadrature weights (reference weight × |det J|).
    pub weights: Vec<f64>,
    /// Physical coordinates of the quadrature points.
    pub points: Vec<[f64; 2]>,
}

impl QuadTensorField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// L² norm: sqrt(Σ w_q |T_q|²).
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * t.dot(t))
            .sum::<f64>()
            .sqrt()
    }

    pub fn domain_area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Applies `f` pointwise, keeping weights and coordinates.
    pub fn map(&self, f: impl Fn(&SymTensor) -> SymTensor) -> QuadTensorField {
        QuadTensorField {
            n_per_elem: self.n_per_elem,
            values: self.values.iter().map(f).collect(),
            weights: self.weights.clone(),
            points: self.points.clone(),
        }
    }

    /// L² norm of the difference with another field on the same layout.
    pub fn l2_distance(&self, other: &QuadTensorField) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .zip(&self.weights)
            .map(|((a, b), w)| {
                let d = a.sub(b);
                w * d.dot(&d)
            })
            .sum::<f64>()
            .sqrt()
    }
}
