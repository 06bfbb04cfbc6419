//! Discretization context: cached element geometry, basis tables, and
//! assembly of every bilinear/nonlinear form of the flow model.
//!
//! Element contributions are computed independently per element and merged
//! into global triplet lists in element order; the merge is the only
//! accumulation point, so results do not depend on how the element work is
//! scheduled. All cached data is immutable after construction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{DofMap, FeField, FieldRole, QuadTensorField};
use crate::linsolve::SpMat;
use crate::mesh::Mesh;
use crate::quadrature::{rule, TriRule};
use crate::tensor::{self, SymTensor};

/// Velocity-block operator selection for saddle-point assembly.
pub enum VelOperator<'a> {
    /// Pure viscous block μ(εu, εv).
    Stokes,
    /// μ(εw, εv) + ν(J_δ(εy) εw, εv): Newton/adjoint matrix of the
    /// smoothed system.
    RegJacobian { eps_y: &'a QuadTensorField, nu: f64, g: f64, delta: f64 },
    /// μ + ν · (derivative of the threshold map where |εy| > g, else 0):
    /// generalized Jacobian for the semismooth Newton step.
    GenJacobian { eps_y: &'a QuadTensorField, nu: f64, g: f64 },
    /// μ + ν · (linear derivative cases only): points with
    /// | |εy| − g | ≤ band_tol are left out and handled by lagging.
    LinearizedSmooth { eps_y: &'a QuadTensorField, nu: f64, g: f64, band_tol: f64 },
}

/// Derivative of the threshold map strictly above the threshold, as a
/// bilinear form; zero at or below it.
fn gen_jac_form(e: &SymTensor, h: &SymTensor, k: &SymTensor, g: f64) -> f64 {
    let s = e.norm();
    if s <= g {
        return 0.0;
    }
    (1.0 - g / s) * h.dot(k) + g * e.dot(h) * e.dot(k) / (s * s * s)
}

/// Assembled mesh + Taylor-Hood space with per-element caches.
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub dofmap: Arc<DofMap>,
    quad: TriRule,
    /// J⁻ᵀ per element.
    inv_jt: Vec<[[f64; 2]; 2]>,
    /// Reference P2 values and gradients per quadrature point.
    p2_vals: Vec<[f64; 6]>,
    p2_grads: Vec<[[f64; 2]; 6]>,
    p1_vals: Vec<[f64; 3]>,
    /// Physical quadrature weights and coordinates, element-major.
    qp_weights: Vec<f64>,
    qp_coords: Vec<[f64; 2]>,
    mass: SpMat,
    grad_stiff: SpMat,
    eps_stiff: SpMat,
    pressure_mass: SpMat,
    /// ∫ ψ_q per pressure basis function (for mean removal).
    pressure_integral: Vec<f64>,
    area: f64,
}

fn p2_shape(xi: f64, eta: f64) -> ([f64; 6], [[f64; 2]; 6]) {
    let l = [1.0 - xi - eta, xi, eta];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let vals = [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ];
    let mut grads = [[0.0; 2]; 6];
    for i in 0..3 {
        for d in 0..2 {
            grads[i][d] = (4.0 * l[i] - 1.0) * dl[i][d];
        }
    }
    let pairs = [(0, 1), (1, 2), (2, 0)];
    for (k, (a, b)) in pairs.iter().enumerate() {
        for d in 0..2 {
            grads[3 + k][d] = 4.0 * (l[*a] * dl[*b][d] + l[*b] * dl[*a][d]);
        }
    }
    (vals, grads)
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, quad_order: usize) -> Result<Discretization> {
        mesh.validate()?;
        let dofmap = Arc::new(DofMap::new(&mesh)?);
        let quad = rule(quad_order);
        let nq = quad.points.len();

        let mut p2_vals = Vec::with_capacity(nq);
        let mut p2_grads = Vec::with_capacity(nq);
        let mut p1_vals = Vec::with_capacity(nq);
        for p in quad.points {
            let (v, g) = p2_shape(p[0], p[1]);
            p2_vals.push(v);
            p2_grads.push(g);
            p1_vals.push([1.0 - p[0] - p[1], p[0], p[1]]);
        }

        let ne = mesh.triangles.len();
        let mut inv_jt = Vec::with_capacity(ne);

        let mut qp_weights = Vec::with_capacity(ne * nq);
        let mut qp_coords = Vec::with_capacity(ne * nq);
        for t in 0..ne {
            let [a, b, c] = mesh.triangles[t];
            let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
            let j = [[pb[0] - pa[0], pc[0] - pa[0]], [pb[1] - pa[1], pc[1] - pa[1]]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det > 0.0) {
                return Err(Error::Mesh(format!("element {t} has singular Jacobian")));
            }
            // inv(J) = [[j11, -j01], [-j10, j00]]/det; store its transpose
            inv_jt.push([
                [j[1][1] / det, -j[1][0] / det],
                [-j[0][1] / det, j[0][0] / det],
            ]);

            for (p, w) in quad.points.iter().zip(quad.weights) {
                qp_weights.push(w * det);
                qp_coords.push([
                    pa[0] + j[0][0] * p[0] + j[0][1] * p[1],
                    pa[1] + j[1][0] * p[0] + j[1][1] * p[1],
                ]);
            }
        }

        let mut disc = Discretization {
            mesh,
            dofmap,
            quad,
            inv_jt,
            p2_vals,
            p2_grads,
            p1_vals,
            qp_weights,
            qp_coords,
            mass: SpMat::from_triplets(0, 0, vec![])?,
            grad_stiff: SpMat::from_triplets(0, 0, vec![])?,
            eps_stiff: SpMat::from_triplets(0, 0, vec![])?,
            pressure_mass: SpMat::from_triplets(0, 0, vec![])?,
            pressure_integral: vec![],
            area: 0.0,
        };
        disc.area = disc.qp_weights.iter().sum();
        disc.build_norm_matrices()?;
        Ok(disc)
    }

    fn build_norm_matrices(&mut self) -> Result<()> {
        let nv = self.dofmap.n_velocity;
        let np = self.dofmap.n_pressure;
        let nq = self.quad.points.len();
        let mut mass = Vec::new();
        let mut grad = Vec::new();
        let mut eps = Vec::new();
        let mut pmass = Vec::new();
        let mut pint = vec![0.0; np];

        for t in 0..self.mesh.triangles.len() {
            let tri = self.mesh.triangles[t];
            let nodes = self.dofmap.element_nodes(t, &tri);
            let mut m_loc = [[0.0; 6]; 6];
            let mut g_loc = [[0.0; 6]; 6];
            let mut e_loc = [[0.0; 12]; 12];
            let mut pm_loc = [[0.0; 3]; 3];
            for q in 0..nq {
                let w = self.qp_weights[t * nq + q];
                let vals = &self.p2_vals[q];
                let grads = self.phys_grads(t, q);
                let pv = &self.p1_vals[q];
                for a in 0..6 {
                    for b in 0..6 {
                        m_loc[a][b] += w * vals[a] * vals[b];
                        g_loc[a][b] += w * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    }
                }
                let eps_basis = basis_strains(&grads);
                for a in 0..12 {
                    for b in 0..12 {
                        e_loc[a][b] += w * eps_basis[a].dot(&eps_basis[b]);
                    }
                }
                for a in 0..3 {
                    pint[tri[a]] += w * pv[a];
                    for b in 0..3 {
                        pm_loc[a][b] += w * pv[a] * pv[b];
                    }
                }
            }
            for a in 0..6 {
                for b in 0..6 {
                    for c in 0..2 {
                        mass.push((2 * nodes[a] + c, 2 * nodes[b] + c, m_loc[a][b]));
                        grad.push((2 * nodes[a] + c, 2 * nodes[b] + c, g_loc[a][b]));
                    }
                }
            }
            for a in 0..12 {
                for b in 0..12 {
                    let (ka, ca) = (a / 2, a % 2);
                    let (kb, cb) = (b / 2, b % 2);
                    eps.push((2 * nodes[ka] + ca, 2 * nodes[kb] + cb, e_loc[a][b]));
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    pmass.push((tri[a], tri[b], pm_loc[a][b]));
                }
            }
        }

        self.mass = SpMat::from_triplets(nv, nv, mass)?;
        self.grad_stiff = SpMat::from_triplets(nv, nv, grad)?;
        self.eps_stiff = SpMat::from_triplets(nv, nv, eps)?;
        self.pressure_mass = SpMat::from_triplets(np, np, pmass)?;
        self.pressure_integral = pint;
        Ok(())
    }

    fn phys_grads(&self, t: usize, q: usize) -> [[f64; 2]; 6] {
        let it = &self.inv_jt[t];
        let rg = &self.p2_grads[q];
        let mut out = [[0.0; 2]; 6];
        for k in 0..6 {
            out[k][0] = it[0][0] * rg[k][0] + it[0][1] * rg[k][1];
            out[k][1] = it[1][0] * rg[k][0] + it[1][1] * rg[k][1];
        }
        out
    }

    pub fn n_quad_per_elem(&self) -> usize {
        self.quad.points.len()
    }

    pub fn quad_degree(&self) -> usize {
        self.quad.degree
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn qp_weights(&self) -> &[f64] {
        &self.qp_weights
    }

    pub fn qp_coords(&self) -> &[[f64; 2]] {
        &self.qp_coords
    }

    /// Coordinates of all velocity nodes (vertices, then edge midpoints).
    pub fn node_coords(&self) -> Vec<[f64; 2]> {
        let topo = self.mesh.edge_topology();
        let mut out = self.mesh.vertices.clone();
        out.reserve(topo.edges.len());
        for e in &topo.edges {
            let (a, b) = (self.mesh.vertices[e[0]], self.mesh.vertices[e[1]]);
            out.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        out
    }

    /// Nodal interpolation of a vector function into a velocity-space field.
    pub fn interpolate(&self, role: FieldRole, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<FeField> {
        let coords = self.node_coords();
        let mut coeffs = vec![0.0; self.dofmap.n_velocity];
        for (k, x) in coords.iter().enumerate() {
            let v = f(*x);
            coeffs[2 * k] = v[0];
            coeffs[2 * k + 1] = v[1];
        }
        FeField::with_zeroed_boundary(self.dofmap.clone(), role, coeffs)
    }

    /// Symmetrized gradient ½(∇v + ∇vᵀ) at every quadrature point.
    pub fn eval_sym_gradient(&self, field: &FeField) -> Result<QuadTensorField> {
        field.expect_velocity_space()?;
        let nq = self.quad.points.len();
        let ne = self.mesh.triangles.len();
        let coeffs = field.coeffs();
        let mut values = Vec::with_capacity(ne * nq);
        for t in 0..ne {
            let nodes = self.dofmap.element_nodes(t, &self.mesh.triangles[t]);
            for q in 0..nq {
                let grads = self.phys_grads(t, q);
                let mut gm = [[0.0f64; 2]; 2];
                for (k, node) in nodes.iter().enumerate() {
                    for c in 0..2 {
                        let y = coeffs[2 * node + c];
                        gm[c][0] += y * grads[k][0];
                        gm[c][1] += y * grads[k][1];
                    }
                }
                values.push(SymTensor::from_2d(
                    gm[0][0],
                    0.5 * (gm[0][1] + gm[1][0]),
                    gm[1][1],
                ));
            }
        }
        Ok(QuadTensorField {
            n_per_elem: nq,
            values,
            weights: self.qp_weights.clone(),
            points: self.qp_coords.clone(),
        })
    }

    /// Field values at every quadrature point.
    pub fn eval_vector(&self, field: &FeField) -> Result<Vec<[f64; 2]>> {
        field.expect_velocity_space()?;
        let nq = self.quad.points.len();
        let ne = self.mesh.triangles.len();
        let coeffs = field.coeffs();
        let mut out = Vec::with_capacity(ne * nq);
        for t in 0..ne {
            let nodes = self.dofmap.element_nodes(t, &self.mesh.triangles[t]);
            for q in 0..nq {
                let vals = &self.p2_vals[q];
                let mut v = [0.0; 2];
                for (k, node) in nodes.iter().enumerate() {
                    v[0] += coeffs[2 * node] * vals[k];
                    v[1] += coeffs[2 * node + 1] * vals[k];
                }
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Assembles the coupled saddle matrix with the selected velocity-block
    /// operator, Dirichlet rows/columns replaced by identity, and the first
    /// pressure dof pinned to remove the constant-pressure null space.
    pub fn assemble_saddle(&self, mu: f64, op: &VelOperator) -> Result<SpMat> {
        if let VelOperator::RegJacobian { g, delta, .. } = op {
            if !(*delta > 0.0 && delta < g) {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    value: *delta,
                    constraint: "0 < delta < g",
                });
            }
        }
        let nq = self.quad.points.len();
        let ne = self.mesh.triangles.len();
        let n_vel = self.dofmap.n_velocity;
        let n_sys = self.dofmap.n_system();
        let dirichlet = &self.dofmap.dirichlet;
        let pinned = n_vel; // first pressure dof

        let mut triplets: Vec<(usize, usize, f64)> =
            Vec::with_capacity(ne * (144 + 72) + n_sys);
        for t in 0..ne {
            let tri = self.mesh.triangles[t];
            let nodes = self.dofmap.element_nodes(t, &tri);
            let mut vv = [[0.0f64; 12]; 12];
            let mut vp = [[0.0f64; 3]; 12];
            for q in 0..nq {
                let w = self.qp_weights[t * nq + q];
                let grads = self.phys_grads(t, q);
                let eps_basis = basis_strains(&grads);
                let pv = &self.p1_vals[q];
                let e_at = |idx: &QuadTensorField| idx.values[t * nq + q];
                for a in 0..12 {
                    for b in a..12 {
                        let mut v = mu * eps_basis[a].dot(&eps_basis[b]);
                        v += match op {
                            VelOperator::Stokes => 0.0,
                            VelOperator::RegJacobian { eps_y, nu, g, delta } => {
                                nu * tensor::reg_jac_form(
                                    &e_at(eps_y),
                                    &eps_basis[a],
                                    &eps_basis[b],
                                    *g,
                                    *delta,
                                )
                            }
                            VelOperator::GenJacobian { eps_y, nu, g } => {
                                nu * gen_jac_form(&e_at(eps_y), &eps_basis[a], &eps_basis[b], *g)
                            }
                            VelOperator::LinearizedSmooth { eps_y, nu, g, band_tol } => {
                                let e = e_at(eps_y);
                                if e.norm() > g + band_tol {
                                    nu * gen_jac_form(&e, &eps_basis[a], &eps_basis[b], *g)
                                } else {
                                    0.0
                                }
                            }
                        };
                        let v = w * v;
                        vv[a][b] += v;
                        if a != b {
                            vv[b][a] += v;
                        }
                    }
                    // divergence coupling: −(ψ_q, div φ_a)
                    let (ka, ca) = (a / 2, a % 2);
                    let div_a = grads[ka][ca];
                    for (pq, val) in pv.iter().enumerate() {
                        vp[a][pq] -= w * val * div_a;
                    }
                }
            }
            for a in 0..12 {
                let (ka, ca) = (a / 2, a % 2);
                let ga = 2 * nodes[ka] + ca;
                if dirichlet[ga] {
                    continue;
                }
                for b in 0..12 {
                    let (kb, cb) = (b / 2, b % 2);
                    let gb = 2 * nodes[kb] + cb;
                    if dirichlet[gb] {
                        continue;
                    }
                    triplets.push((ga, gb, vv[a][b]));
                }
                for pq in 0..3 {
                    let gp = n_vel + tri[pq];
                    if gp == pinned {
                        continue;
                    }
                    triplets.push((ga, gp, vp[a][pq]));
                    triplets.push((gp, ga, vp[a][pq]));
                }
            }
        }
        for (d, &fixed) in dirichlet.iter().enumerate() {
            if fixed {
                triplets.push((d, d, 1.0));
            }
        }
        triplets.push((pinned, pinned, 1.0));
        SpMat::from_triplets(n_sys, n_sys, triplets)
    }

    /// Velocity stiffness μ(εu, εv) with Dirichlet rows/cols as identity,
    /// and the raw divergence block −(ψ, div v), as separate matrices.
    pub fn stokes_blocks(&self, mu: f64) -> Result<(SpMat, SpMat)> {
        let nq = self.quad.points.len();
        let n_vel = self.dofmap.n_velocity;
        let np = self.dofmap.n_pressure;
        let dirichlet = &self.dofmap.dirichlet;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for t in 0..self.mesh.triangles.len() {
            let tri = self.mesh.triangles[t];
            let nodes = self.dofmap.element_nodes(t, &tri);
            for q in 0..nq {
                let w = self.qp_weights[t * nq + q];
                let grads = self.phys_grads(t, q);
                let eps_basis = basis_strains(&grads);
                let pv = &self.p1_vals[q];
                for i in 0..12 {
                    let (ki, ci) = (i / 2, i % 2);
                    let gi = 2 * nodes[ki] + ci;
                    if dirichlet[gi] {
                        continue;
                    }
                    for j in 0..12 {
                        let (kj, cj) = (j / 2, j % 2);
                        let gj = 2 * nodes[kj] + cj;
                        if dirichlet[gj] {
                            continue;
                        }
                        a.push((gi, gj, w * mu * eps_basis[i].dot(&eps_basis[j])));
                    }
                    let div_i = grads[ki][ci];
                    for (pq, val) in pv.iter().enumerate() {
                        b.push((tri[pq], gi, -w * val * div_i));
                    }
                }
            }
        }
        for (d, &fixed) in dirichlet.iter().enumerate() {
            if fixed {
                a.push((d, d, 1.0));
            }
        }
        Ok((SpMat::from_triplets(n_vel, n_vel, a)?, SpMat::from_triplets(np, n_vel, b)?))
    }

    /// Residual of the mixed system at (y, p) for control u:
    ///
    /// momentum rows: μ(εy, εφ) + ν(T(εy), εφ) − (p, div φ) − (u, φ),
    /// pressure rows: −(ψ, div y);
    ///
    /// with T the threshold map (`delta: None`) or its smoothing. Constrained
    /// rows are zero.
    pub fn residual(
        &self,
        velocity: &FeField,
        pressure: &FeField,
        control: &FeField,
        params: &tensor::FluidParams,
        delta: Option<f64>,
    ) -> Result<Vec<f64>> {
        velocity.expect_velocity_space()?;
        pressure.expect_role(FieldRole::Pressure)?;
        if let Some(d) = delta {
            if !(d > 0.0 && d < params.g) {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    value: d,
                    constraint: "0 < delta < g",
                });
            }
        }
        let thresholded = |e: &SymTensor| -> SymTensor {
            match delta {
                None => tensor::soft_threshold(e, params.g).expect("validated g"),
                Some(d) => tensor::soft_threshold_reg(e, params.g, d).expect("validated delta"),
            }
        };
        self.momentum_residual(
            Some((velocity.coeffs(), params.mu)),
            pressure.coeffs(),
            &mut |_, e| thresholded(e).scale(params.nu),
            Some(velocity.coeffs()),
            control.coeffs(),
        )
    }

    /// Generic mixed residual:
    /// μ(ε v_mu, εφ) + (T, εφ) − (p, div φ) − (load, φ) on momentum rows and
    /// −(ψ, div v_div) on pressure rows. `tensor_term` is called with the
    /// global quadrature-point index and the strain of `v_mu` there, and
    /// returns the already weighted tensor T added to the viscous stress.
    pub fn momentum_residual(
        &self,
        v_mu: Option<(&[f64], f64)>,
        pressure: &[f64],
        tensor_term: &mut dyn FnMut(usize, &SymTensor) -> SymTensor,
        v_div: Option<&[f64]>,
        load: &[f64],
    ) -> Result<Vec<f64>> {
        let nq = self.quad.points.len();
        let n_vel = self.dofmap.n_velocity;
        let n_sys = self.dofmap.n_system();
        let dirichlet = &self.dofmap.dirichlet;
        let pinned = n_vel;
        let mut out = vec![0.0; n_sys];

        for t in 0..self.mesh.triangles.len() {
            let tri = self.mesh.triangles[t];
            let nodes = self.dofmap.element_nodes(t, &tri);
            let mut local_v = [0.0f64; 12];
            let mut local_p = [0.0f64; 3];
            for q in 0..nq {
                let w = self.qp_weights[t * nq + q];
                let grads = self.phys_grads(t, q);
                let vals = &self.p2_vals[q];
                let pv = &self.p1_vals[q];

                // strain and divergence of the velocity argument(s)
                let grad_of = |coeffs: &[f64]| {
                    let mut gm = [[0.0f64; 2]; 2];
                    for (k, node) in nodes.iter().enumerate() {
                        for c in 0..2 {
                            let y = coeffs[2 * node + c];
                            gm[c][0] += y * grads[k][0];
                            gm[c][1] += y * grads[k][1];
                        }
                    }
                    gm
                };

                let mut stress = SymTensor::zero(2);
                if let Some((coeffs, mu)) = v_mu {
                    let gm = grad_of(coeffs);
                    let e = SymTensor::from_2d(gm[0][0], 0.5 * (gm[0][1] + gm[1][0]), gm[1][1]);
                    stress = e.scale(mu).add(&tensor_term(t * nq + q, &e));
                }
                let p_val: f64 = (0..3).map(|a| pressure[tri[a]] * pv[a]).sum();
                let mut load_val = [0.0; 2];
                for (k, node) in nodes.iter().enumerate() {
                    load_val[0] += load[2 * node] * vals[k];
                    load_val[1] += load[2 * node + 1] * vals[k];
                }

                for a in 0..12 {
                    let (ka, ca) = (a / 2, a % 2);
                    let eps_a = strain_of_basis(&grads[ka], ca);
                    let div_a = grads[ka][ca];
                    local_v[a] += w
                        * (stress.dot(&eps_a) - p_val * div_a - load_val[ca] * vals[ka]);
                }
                if let Some(coeffs) = v_div {
                    let gm = grad_of(coeffs);
                    let div = gm[0][0] + gm[1][1];
                    for (pq, val) in pv.iter().enumerate() {
                        local_p[pq] -= w * val * div;
                    }
                }
            }
            for a in 0..12 {
                let (ka, ca) = (a / 2, a % 2);
                let ga = 2 * nodes[ka] + ca;
                if !dirichlet[ga] {
                    out[ga] += local_v[a];
                }
            }
            for pq in 0..3 {
                let gp = n_vel + tri[pq];
                if gp != pinned {
                    out[gp] += local_p[pq];
                }
            }
        }
        Ok(out)
    }

    /// Load vector (f, φ) for an analytic right-hand side, over free
    /// momentum rows of the coupled system.
    pub fn load_from_fn(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let nq = self.quad.points.len();
        let n_sys = self.dofmap.n_system();
        let dirichlet = &self.dofmap.dirichlet;
        let mut out = vec![0.0; n_sys];
        for t in 0..self.mesh.triangles.len() {
            let nodes = self.dofmap.element_nodes(t, &self.mesh.triangles[t]);
            for q in 0..nq {
                let w = self.qp_weights[t * nq + q];
                let vals = &self.p2_vals[q];
                let fv = f(self.qp_coords[t * nq + q]);
                for (k, node) in nodes.iter().enumerate() {
                    for c in 0..2 {
                        let g = 2 * node + c;
                        if !dirichlet[g] {
                            out[g] += w * fv[c] * vals[k];
                        }
                    }
                }
            }
        }
        out
    }

    /// Load vector (u, φ) for a coefficient field, over free momentum rows.
    pub fn load_from_field(&self, u: &FeField) -> Result<Vec<f64>> {
        u.expect_velocity_space()?;
        let mut m = self.mass.apply(u.coeffs());
        for (v, &fixed) in m.iter_mut().zip(&self.dofmap.dirichlet) {
            if fixed {
                *v = 0.0;
            }
        }
        m.resize(self.dofmap.n_system(), 0.0);
        Ok(m)
    }

    /// Load vector (T, εφ) of a quadrature tensor field against test strains,
    /// over free momentum rows.
    pub fn load_from_tensor(&self, field: &QuadTensorField, scale: f64) -> Vec<f64> {
        let nq = self.quad.points.len();
        let n_sys = self.dofmap.n_system();
        let dirichlet = &self.dofmap.dirichlet;
        let mut out = vec![0.0; n_sys];
        for t in 0..self.mesh.triangles.len() {
            let nodes = self.dofmap.element_nodes(t, &self.mesh.triangles[t]);
            for q in 0..nq {
                let w = self.qp_weights[t * nq + q] * scale;
                let grads = self.phys_grads(t, q);
                let tv = &field.values[t * nq + q];
                for (k, node) in nodes.iter().enumerate() {
                    for c in 0..2 {
                        let g = 2 * node + c;
                        if !dirichlet[g] {
                            out[g] += w * tv.dot(&strain_of_basis(&grads[k], c));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn mass(&self) -> &SpMat {
        &self.mass
    }

    pub fn eps_stiffness(&self) -> &SpMat {
        &self.eps_stiff
    }

    /// L² inner product of two velocity-space coefficient fields.
    pub fn l2_inner(&self, a: &FeField, b: &FeField) -> f64 {
        self.mass.inner(a.coeffs(), b.coeffs())
    }

    pub fn l2_norm(&self, a: &FeField) -> f64 {
        self.l2_inner(a, a).max(0.0).sqrt()
    }

    /// Full H¹ norm sqrt(‖v‖² + ‖∇v‖²).
    pub fn h1_norm(&self, a: &FeField) -> f64 {
        let x = a.coeffs();
        (self.mass.inner(x, x) + self.grad_stiff.inner(x, x)).max(0.0).sqrt()
    }

    /// Strain seminorm ‖εv‖.
    pub fn eps_seminorm(&self, a: &FeField) -> f64 {
        let x = a.coeffs();
        self.eps_stiff.inner(x, x).max(0.0).sqrt()
    }

    /// L² norm of div v.
    pub fn div_l2(&self, a: &FeField) -> Result<f64> {
        a.expect_velocity_space()?;
        let nq = self.quad.points.len();
        let coeffs = a.coeffs();
        let mut acc = 0.0;
        for t in 0..self.mesh.triangles.len() {
            let nodes = self.dofmap.element_nodes(t, &self.mesh.triangles[t]);
            for q in 0..nq {
                let grads = self.phys_grads(t, q);
                let mut div = 0.0;
                for (k, node) in nodes.iter().enumerate() {
                    div += coeffs[2 * node] * grads[k][0] + coeffs[2 * node + 1] * grads[k][1];
                }
                acc += self.qp_weights[t * nq + q] * div * div;
            }
        }
        Ok(acc.sqrt())
    }

    pub fn pressure_mean(&self, p: &FeField) -> f64 {
        p.coeffs()
            .iter()
            .zip(&self.pressure_integral)
            .map(|(c, w)| c * w)
            .sum::<f64>()
            / self.area
    }

    pub fn remove_pressure_mean(&self, p: &mut FeField) {
        let mean = self.pressure_mean(p);
        for c in p.coeffs_mut() {
            *c -= mean;
        }
    }

    pub fn pressure_l2(&self, p: &FeField) -> f64 {
        self.pressure_mass.inner(p.coeffs(), p.coeffs()).max(0.0).sqrt()
    }

    /// L² norm of a velocity-space quadrature evaluation of `a - b` where
    /// `b` is an analytic field (error measurement).
    pub fn l2_error_against(
        &self,
        a: &FeField,
        exact: impl Fn([f64; 2]) -> [f64; 2],
    ) -> Result<f64> {
        let vals = self.eval_vector(a)?;
        let mut acc = 0.0;
        for (v, (w, x)) in vals.iter().zip(self.qp_weights.iter().zip(&self.qp_coords)) {
            let e = exact(*x);
            acc += w * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
        }
        Ok(acc.sqrt())
    }

    /// Zeroes constrained velocity rows and the pinned pressure row of a
    /// system-sized vector.
    pub fn mask_constrained(&self, v: &mut [f64]) {
        for (d, &fixed) in self.dofmap.dirichlet.iter().enumerate() {
            if fixed {
                v[d] = 0.0;
            }
        }
        v[self.dofmap.n_velocity] = 0.0;
    }

    /// Euclidean norm of the free part of a system residual vector.
    pub fn residual_norm(&self, r: &[f64]) -> f64 {
        r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Strain tensors of the 12 local velocity basis fields at one point.
fn basis_strains(grads: &[[f64; 2]; 6]) -> [SymTensor; 12] {
    let mut out = [SymTensor::zero(2); 12];
    for k in 0..6 {
        out[2 * k] = strain_of_basis(&grads[k], 0);
        out[2 * k + 1] = strain_of_basis(&grads[k], 1);
    }
    out
}

/// ε of the vector basis function `N e_c`: sym(e_c ⊗ ∇N).
#[inline]
fn strain_of_basis(grad: &[f64; 2], c: usize) -> SymTensor {
    if c == 0 {
        SymTensor::from_2d(grad[0], 0.5 * grad[1], 0.0)
    } else {
        SymTensor::from_2d(0.0, 0.5 * grad[0], grad[1])
    }
}
