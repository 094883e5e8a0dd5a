//! Piecewise-linear finite elements on one subdomain of a [`CoupledMesh`].
//!
//! Homogeneous Dirichlet conditions on the outer boundary are imposed by
//! removing those nodes from the [`DofMap`]. The interface space is the P1
//! trace space of the matched interface mesh, indexed by position in
//! `mesh.interface_nodes`, including the two end points.

use crate::mesh::{CoupledMesh, Subdomain};
use crate::sparse::CsrMatrix;

/// Degree-2 rule on triangles: edge midpoints with equal weights.
/// Barycentric coordinates and weights relative to the triangle area.
pub const LOAD_RULE: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const D4_A: f64 = 0.445_948_490_915_965;
const D4_B: f64 = 1.0 - 2.0 * D4_A;
const D4_WA: f64 = 0.223_381_589_678_011_5;
const D4_C: f64 = 0.091_576_213_509_770_74;
const D4_D: f64 = 1.0 - 2.0 * D4_C;
const D4_WC: f64 = 0.109_951_743_655_321_87;

/// Six-point rule exact for polynomials of degree 4.
pub const ERROR_RULE: [([f64; 3], f64); 6] = [
    ([D4_A, D4_A, D4_B], D4_WA),
    ([D4_A, D4_B, D4_A], D4_WA),
    ([D4_B, D4_A, D4_A], D4_WA),
    ([D4_C, D4_C, D4_D], D4_WC),
    ([D4_C, D4_D, D4_C], D4_WC),
    ([D4_D, D4_C, D4_C], D4_WC),
];

/// Three-point Gauss-Legendre on `[0, 1]` for interface segments.
const SEGMENT_RULE: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Degree-of-freedom numbering on one subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub subdomain: Subdomain,
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<usize>,
    /// Dof of each interface node in trace order; `None` where the node is
    /// an eliminated Dirichlet end point.
    interface_dofs: Vec<Option<usize>>,
}

impl DofMap {
    /// Free dofs: subdomain nodes minus the exterior Dirichlet set.
    pub fn new(mesh: &CoupledMesh, sub: Subdomain) -> Self {
        Self::build(mesh, sub, true)
    }

    /// Every subdomain node carries a dof (no Dirichlet elimination).
    pub fn without_dirichlet(mesh: &CoupledMesh, sub: Subdomain) -> Self {
        Self::build(mesh, sub, false)
    }

    fn build(mesh: &CoupledMesh, sub: Subdomain, eliminate: bool) -> Self {
        let mut used = vec![false; mesh.n_nodes()];
        for t in mesh.triangles(sub) {
            for &n in t {
                used[n] = true;
            }
        }
        if eliminate {
            for &n in mesh.exterior_dirichlet(sub) {
                used[n] = false;
            }
        }
        let mut node_to_dof = vec![None; mesh.n_nodes()];
        let mut dof_to_node = Vec::new();
        for (node, _) in used.iter().enumerate().filter(|(_, u)| **u) {
            node_to_dof[node] = Some(dof_to_node.len());
            dof_to_node.push(node);
        }
        let interface_dofs = mesh
            .interface_nodes
            .iter()
            .map(|&n| node_to_dof[n])
            .collect();
        Self {
            subdomain: sub,
            node_to_dof,
            dof_to_node,
            interface_dofs,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    pub fn interface_dofs(&self) -> &[Option<usize>] {
        &self.interface_dofs
    }
}

/// Coefficients of a discrete function over a [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub subdomain: Subdomain,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(subdomain: Subdomain, values: Vec<f64>) -> Self {
        Self { subdomain, values }
    }

    pub fn zeros(dofs: &DofMap) -> Self {
        Self::new(dofs.subdomain, vec![0.0; dofs.n_dofs()])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a mesh node; zero on eliminated Dirichlet nodes.
    pub fn at_node(&self, dofs: &DofMap, node: usize) -> f64 {
        dofs.dof(node).map_or(0.0, |d| self.values[d])
    }
}

/// Nodal values on the interface, in trace order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceField {
    pub values: Vec<f64>,
}

impl TraceField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn corners(mesh: &CoupledMesh, t: [usize; 3]) -> [[f64; 2]; 3] {
    t.map(|n| mesh.nodes[n])
}

fn map_point(p: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
        bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
    ]
}

/// Area and constant gradients of the three barycentric basis functions.
fn basis_gradients(p: &[[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = crate::mesh::signed_area(p[0], p[1], p[2]);
    let two_a = 2.0 * area;
    let g = std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        [(p[j][1] - p[k][1]) / two_a, (p[k][0] - p[j][0]) / two_a]
    });
    (area, g)
}

fn assemble_element_matrix<F>(mesh: &CoupledMesh, dofs: &DofMap, local: F) -> CsrMatrix
where
    F: Fn(&[[f64; 2]; 3]) -> [[f64; 3]; 3],
{
    let tris = mesh.triangles(dofs.subdomain);
    let mut entries = Vec::with_capacity(9 * tris.len());
    for &t in tris {
        let p = corners(mesh, t);
        let m = local(&p);
        for a in 0..3 {
            let Some(ra) = dofs.dof(t[a]) else { continue };
            for b in 0..3 {
                if let Some(cb) = dofs.dof(t[b]) {
                    entries.push((ra, cb, m[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(dofs.n_dofs(), dofs.n_dofs(), &entries).expect("dof indices in range")
}

/// Consistent mass matrix `(phi_j, phi_i)` over the free dofs.
pub fn assemble_mass(mesh: &CoupledMesh, dofs: &DofMap) -> CsrMatrix {
    assemble_element_matrix(mesh, dofs, |p| {
        let area = crate::mesh::signed_area(p[0], p[1], p[2]);
        let mut m = [[area / 12.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = area / 6.0;
        }
        m
    })
}

/// Stiffness matrix `(grad phi_j, grad phi_i)` over the free dofs.
pub fn assemble_stiffness(mesh: &CoupledMesh, dofs: &DofMap) -> CsrMatrix {
    assemble_element_matrix(mesh, dofs, |p| {
        let (area, g) = basis_gradients(p);
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
        k
    })
}

/// Position of each mesh node in trace order, `None` off the interface.
fn trace_positions(mesh: &CoupledMesh) -> Vec<Option<usize>> {
    let mut pos = vec![None; mesh.n_nodes()];
    for (k, &n) in mesh.interface_nodes.iter().enumerate() {
        pos[n] = Some(k);
    }
    pos
}

/// P1 mass matrix on the interface, in trace order, over all interface nodes.
pub fn assemble_interface_mass(mesh: &CoupledMesh) -> CsrMatrix {
    let pos = trace_positions(mesh);
    let mut entries = Vec::with_capacity(4 * mesh.interface_segments.len());
    for &[a, b] in &mesh.interface_segments {
        let len = crate::mesh::distance(mesh.nodes[a], mesh.nodes[b]);
        let (i, j) = (
            pos[a].expect("segment on interface"),
            pos[b].expect("segment on interface"),
        );
        entries.push((i, i, len / 3.0));
        entries.push((j, j, len / 3.0));
        entries.push((i, j, len / 6.0));
        entries.push((j, i, len / 6.0));
    }
    let n = mesh.n_interface();
    CsrMatrix::from_triplets(n, n, &entries).expect("trace indices in range")
}

/// Restricts a trace-space matrix to the interface dofs of a subdomain,
/// i.e. `E^T M E` with `E` the dof-to-trace restriction.
pub fn embed_interface_matrix(m_sigma: &CsrMatrix, dofs: &DofMap) -> CsrMatrix {
    let map = dofs.interface_dofs();
    let entries: Vec<_> = m_sigma
        .triplets()
        .filter_map(|(i, j, v)| Some((map[i]?, map[j]?, v)))
        .collect();
    CsrMatrix::from_triplets(dofs.n_dofs(), dofs.n_dofs(), &entries).expect("dof indices in range")
}

/// Load vector `(f(., t), phi_i)` with the degree-2 edge-midpoint rule.
pub fn assemble_load<F>(mesh: &CoupledMesh, dofs: &DofMap, f: F, t: f64) -> Vec<f64>
where
    F: Fn([f64; 2], f64) -> f64,
{
    let mut load = vec![0.0; dofs.n_dofs()];
    for &tri in mesh.triangles(dofs.subdomain) {
        let p = corners(mesh, tri);
        let area = crate::mesh::signed_area(p[0], p[1], p[2]);
        for (bary, w) in LOAD_RULE {
            let fx = f(map_point(&p, bary), t) * w * area;
            for a in 0..3 {
                if let Some(d) = dofs.dof(tri[a]) {
                    load[d] += fx * bary[a];
                }
            }
        }
    }
    load
}

/// Interface load `<g(., t), mu_k>` for every trace basis function.
pub fn assemble_interface_load<G>(mesh: &CoupledMesh, g: G, t: f64) -> Vec<f64>
where
    G: Fn([f64; 2], f64) -> f64,
{
    let pos = trace_positions(mesh);
    let mut load = vec![0.0; mesh.n_interface()];
    for &[a, b] in &mesh.interface_segments {
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let len = crate::mesh::distance(pa, pb);
        let (i, j) = (pos[a].unwrap(), pos[b].unwrap());
        for (s, w) in SEGMENT_RULE {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let gx = g(x, t) * w * len;
            load[i] += gx * (1.0 - s);
            load[j] += gx * s;
        }
    }
    load
}

/// Nodal interpolant on the free dofs.
pub fn interpolate<F>(mesh: &CoupledMesh, dofs: &DofMap, f: F, t: f64) -> Field
where
    F: Fn([f64; 2], f64) -> f64,
{
    let values = (0..dofs.n_dofs())
        .map(|d| f(mesh.nodes[dofs.node(d)], t))
        .collect();
    Field::new(dofs.subdomain, values)
}

/// Nodal interpolant on all interface nodes.
pub fn interpolate_trace<F>(mesh: &CoupledMesh, f: F, t: f64) -> TraceField
where
    F: Fn([f64; 2], f64) -> f64,
{
    TraceField::new(
        mesh.interface_nodes
            .iter()
            .map(|&n| f(mesh.nodes[n], t))
            .collect(),
    )
}

/// Interface values of a field in trace order; eliminated end points read 0.
pub fn trace_restrict(field: &Field, dofs: &DofMap) -> TraceField {
    TraceField::new(
        dofs.interface_dofs()
            .iter()
            .map(|d| d.map_or(0.0, |d| field.values[d]))
            .collect(),
    )
}

/// Adds trace-ordered values onto the interface dofs of a dof vector
/// (the transpose of [`trace_restrict`]).
pub fn scatter_trace_add(trace: &[f64], dofs: &DofMap, target: &mut [f64]) {
    for (v, d) in trace.iter().zip(dofs.interface_dofs()) {
        if let Some(d) = d {
            target[*d] += v;
        }
    }
}

/// `|| field - exact(., t) ||_{L2}` with the degree-4 rule, exact evaluated at
/// quadrature points.
pub fn l2_error<F>(mesh: &CoupledMesh, dofs: &DofMap, field: &Field, exact: F, t: f64) -> f64
where
    F: Fn([f64; 2], f64) -> f64,
{
    let mut acc = 0.0;
    for &tri in mesh.triangles(dofs.subdomain) {
        let p = corners(mesh, tri);
        let area = crate::mesh::signed_area(p[0], p[1], p[2]);
        let nodal = tri.map(|n| field.at_node(dofs, n));
        for (bary, w) in ERROR_RULE {
            let uh = bary[0] * nodal[0] + bary[1] * nodal[1] + bary[2] * nodal[2];
            let e = uh - exact(map_point(&p, bary), t);
            acc += w * area * e * e;
        }
    }
    acc.sqrt()
}

/// `|| grad(field - exact(., t)) ||_{L2}` given the exact gradient.
pub fn h1_semi_error<G>(
    mesh: &CoupledMesh,
    dofs: &DofMap,
    field: &Field,
    exact_gradient: G,
    t: f64,
) -> f64
where
    G: Fn([f64; 2], f64) -> [f64; 2],
{
    let mut acc = 0.0;
    for &tri in mesh.triangles(dofs.subdomain) {
        let p = corners(mesh, tri);
        let (area, g) = basis_gradients(&p);
        let nodal = tri.map(|n| field.at_node(dofs, n));
        let gh = [
            nodal[0] * g[0][0] + nodal[1] * g[1][0] + nodal[2] * g[2][0],
            nodal[0] * g[0][1] + nodal[1] * g[1][1] + nodal[2] * g[2][1],
        ];
        for (bary, w) in ERROR_RULE {
            let ge = exact_gradient(map_point(&p, bary), t);
            let (dx, dy) = (gh[0] - ge[0], gh[1] - ge[1]);
            acc += w * area * (dx * dx + dy * dy);
        }
    }
    acc.sqrt()
}
