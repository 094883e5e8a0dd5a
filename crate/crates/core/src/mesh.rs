//! Coupled triangulations of the unit square with a node-matched interface.
//!
//! Both generators build the same kind of mapped structured grid: columns of
//! nodes at uniform `x`, with the rows of each column stretched between the
//! bottom edge and the interface (fluid side) or the interface and the top
//! edge (solid side). The interface row is shared by both subdomains.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};

use crate::error::MeshError;

/// Tolerance for geometric checks on generated meshes.
pub const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subdomain {
    Fluid,
    Solid,
}

impl fmt::Display for Subdomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subdomain::Fluid => f.write_str("f"),
            Subdomain::Solid => f.write_str("s"),
        }
    }
}

/// Straight interface separating the fluid (below) from the solid (above).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterfaceGeometry {
    Horizontal { y0: f64 },
    Slanted { slope: f64, intercept: f64 },
}

impl InterfaceGeometry {
    /// The horizontal interface `y = 3/4` of the uniform experiments.
    pub const UNIFORM: InterfaceGeometry = InterfaceGeometry::Horizontal { y0: 0.75 };
    /// The line `y = x/2 + 1/4`.
    pub const SLANTED: InterfaceGeometry = InterfaceGeometry::Slanted {
        slope: 0.5,
        intercept: 0.25,
    };

    pub fn validate(&self) -> Result<(), MeshError> {
        let (left, right) = (self.height_at(0.0), self.height_at(1.0));
        let inside = |y: f64| y > 0.0 && y < 1.0;
        if inside(left) && inside(right) {
            Ok(())
        } else {
            Err(MeshError::Geometry(format!(
                "{self:?} must cross both vertical sides strictly inside (0, 1)"
            )))
        }
    }

    pub fn height_at(&self, x: f64) -> f64 {
        match *self {
            InterfaceGeometry::Horizontal { y0 } => y0,
            InterfaceGeometry::Slanted { slope, intercept } => slope * x + intercept,
        }
    }

    /// Signed vertical offset of `p` from the line; negative on the fluid side.
    pub fn offset(&self, p: [f64; 2]) -> f64 {
        p[1] - self.height_at(p[0])
    }

    /// Unit normal pointing out of the fluid subdomain (into the solid).
    pub fn fluid_normal(&self) -> [f64; 2] {
        match *self {
            InterfaceGeometry::Horizontal { .. } => [0.0, 1.0],
            InterfaceGeometry::Slanted { slope, .. } => {
                let norm = (1.0 + slope * slope).sqrt();
                [-slope / norm, 1.0 / norm]
            }
        }
    }

    /// Length of the interface clipped to the unit square.
    pub fn length(&self) -> f64 {
        match *self {
            InterfaceGeometry::Horizontal { .. } => 1.0,
            InterfaceGeometry::Slanted { slope, .. } => (1.0 + slope * slope).sqrt(),
        }
    }

    /// Area of the fluid part of the unit square.
    pub fn fluid_area(&self) -> f64 {
        0.5 * (self.height_at(0.0) + self.height_at(1.0))
    }
}

/// Two conforming triangulations sharing the nodes on the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledMesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles_f: Vec<[usize; 3]>,
    pub triangles_s: Vec<[usize; 3]>,
    /// Sorted node ids on the fluid boundary away from the interface
    /// (including the two interface end points).
    pub exterior_dirichlet_f: Vec<usize>,
    pub exterior_dirichlet_s: Vec<usize>,
    /// Interface nodes ordered by increasing `x`.
    pub interface_nodes: Vec<usize>,
    pub interface_segments: Vec<[usize; 2]>,
    pub h_max: f64,
    pub geometry: InterfaceGeometry,
}

impl CoupledMesh {
    pub fn triangles(&self, sub: Subdomain) -> &[[usize; 3]] {
        match sub {
            Subdomain::Fluid => &self.triangles_f,
            Subdomain::Solid => &self.triangles_s,
        }
    }

    pub fn exterior_dirichlet(&self, sub: Subdomain) -> &[usize] {
        match sub {
            Subdomain::Fluid => &self.exterior_dirichlet_f,
            Subdomain::Solid => &self.exterior_dirichlet_s,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_interface(&self) -> usize {
        self.interface_nodes.len()
    }

    pub fn signed_area(&self, tri: [usize; 3]) -> f64 {
        signed_area(self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]])
    }

    pub fn subdomain_area(&self, sub: Subdomain) -> f64 {
        self.triangles(sub)
            .iter()
            .map(|&t| self.signed_area(t))
            .sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.interface_segments
            .iter()
            .map(|&[a, b]| distance(self.nodes[a], self.nodes[b]))
            .sum()
    }

    /// Checks every structural invariant; an empty list means the mesh is valid.
    pub fn validate(&self) -> Vec<MeshViolation> {
        let mut out = Vec::new();
        let n = self.nodes.len();
        let in_range = |i: usize| i < n;

        for (sub, tris) in [
            (Subdomain::Fluid, &self.triangles_f),
            (Subdomain::Solid, &self.triangles_s),
        ] {
            for (t, tri) in tris.iter().enumerate() {
                if !tri.iter().all(|&i| in_range(i)) {
                    out.push(MeshViolation::NodeIndexOutOfRange {
                        subdomain: sub,
                        triangle: t,
                    });
                    continue;
                }
                let area = self.signed_area(*tri);
                if area <= 0.0 {
                    out.push(MeshViolation::NonPositiveArea {
                        subdomain: sub,
                        triangle: t,
                        area,
                    });
                }
            }
        }
        if !out.is_empty() {
            return out;
        }

        let total = self.subdomain_area(Subdomain::Fluid) + self.subdomain_area(Subdomain::Solid);
        if (total - 1.0).abs() > GEOMETRY_TOL {
            out.push(MeshViolation::AreaMismatch { total });
        }
        let fluid_area = self.subdomain_area(Subdomain::Fluid);
        if (fluid_area - self.geometry.fluid_area()).abs() > GEOMETRY_TOL {
            out.push(MeshViolation::SideMismatch { fluid_area });
        }

        let used_f: BTreeSet<usize> = self.triangles_f.iter().flatten().copied().collect();
        let used_s: BTreeSet<usize> = self.triangles_s.iter().flatten().copied().collect();
        for &node in &self.interface_nodes {
            if !in_range(node) {
                out.push(MeshViolation::InterfaceNodeOutOfRange { node });
                continue;
            }
            let deviation = self.geometry.offset(self.nodes[node]).abs();
            if deviation > GEOMETRY_TOL {
                out.push(MeshViolation::OffInterface { node, deviation });
            }
            if !used_f.contains(&node) || !used_s.contains(&node) {
                out.push(MeshViolation::UnmatchedTrace { node });
            }
        }
        for w in self.interface_nodes.windows(2) {
            if in_range(w[0]) && in_range(w[1]) && self.nodes[w[0]][0] >= self.nodes[w[1]][0] {
                out.push(MeshViolation::InterfaceOrder { node: w[1] });
            }
        }
        let length = self.interface_length();
        if (length - self.geometry.length()).abs() > GEOMETRY_TOL {
            out.push(MeshViolation::InterfaceLength { length });
        }

        let on_outer = |p: [f64; 2]| {
            p[0].abs() <= GEOMETRY_TOL
                || (p[0] - 1.0).abs() <= GEOMETRY_TOL
                || p[1].abs() <= GEOMETRY_TOL
                || (p[1] - 1.0).abs() <= GEOMETRY_TOL
        };
        let interface: BTreeSet<usize> = self.interface_nodes.iter().copied().collect();
        for sub in [Subdomain::Fluid, Subdomain::Solid] {
            let dirichlet = self.exterior_dirichlet(sub);
            for &node in dirichlet {
                if !in_range(node) {
                    out.push(MeshViolation::DirichletOffBoundary {
                        subdomain: sub,
                        node,
                    });
                } else if !on_outer(self.nodes[node]) {
                    if interface.contains(&node) {
                        out.push(MeshViolation::DirichletOnInterface {
                            subdomain: sub,
                            node,
                        });
                    } else {
                        out.push(MeshViolation::DirichletOffBoundary {
                            subdomain: sub,
                            node,
                        });
                    }
                }
            }
            let set: BTreeSet<usize> = dirichlet.iter().copied().collect();
            for &node in &self.interface_nodes {
                if in_range(node) && on_outer(self.nodes[node]) && !set.contains(&node) {
                    out.push(MeshViolation::MissingEndpoint {
                        subdomain: sub,
                        node,
                    });
                }
            }
        }
        out
    }

    /// Plain-text dump: a header line per section, then one record per line
    /// as `index field...` separated by spaces.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# nodes {}", self.nodes.len())?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i} {:.17e} {:.17e}", p[0], p[1])?;
        }
        for (label, tris) in [
            ("triangles_f", &self.triangles_f),
            ("triangles_s", &self.triangles_s),
        ] {
            writeln!(w, "# {label} {}", tris.len())?;
            for (i, t) in tris.iter().enumerate() {
                writeln!(w, "{i} {} {} {}", t[0], t[1], t[2])?;
            }
        }
        writeln!(w, "# interface_segments {}", self.interface_segments.len())?;
        for (i, s) in self.interface_segments.iter().enumerate() {
            writeln!(w, "{i} {} {}", s[0], s[1])?;
        }
        for (label, set) in [
            ("dirichlet_f", &self.exterior_dirichlet_f),
            ("dirichlet_s", &self.exterior_dirichlet_s),
        ] {
            writeln!(w, "# {label} {}", set.len())?;
            for (i, n) in set.iter().enumerate() {
                writeln!(w, "{i} {n}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshViolation {
    NodeIndexOutOfRange {
        subdomain: Subdomain,
        triangle: usize,
    },
    NonPositiveArea {
        subdomain: Subdomain,
        triangle: usize,
        area: f64,
    },
    AreaMismatch {
        total: f64,
    },
    SideMismatch {
        fluid_area: f64,
    },
    InterfaceNodeOutOfRange {
        node: usize,
    },
    OffInterface {
        node: usize,
        deviation: f64,
    },
    UnmatchedTrace {
        node: usize,
    },
    InterfaceOrder {
        node: usize,
    },
    InterfaceLength {
        length: f64,
    },
    DirichletOffBoundary {
        subdomain: Subdomain,
        node: usize,
    },
    DirichletOnInterface {
        subdomain: Subdomain,
        node: usize,
    },
    MissingEndpoint {
        subdomain: Subdomain,
        node: usize,
    },
}

impl fmt::Display for MeshViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NodeIndexOutOfRange {
                subdomain,
                triangle,
            } => {
                write!(
                    f,
                    "triangle {triangle} of Ω_{subdomain} references a missing node"
                )
            }
            Self::NonPositiveArea {
                subdomain,
                triangle,
                area,
            } => {
                write!(
                    f,
                    "triangle {triangle} of Ω_{subdomain} has signed area {area:e}"
                )
            }
            Self::AreaMismatch { total } => write!(f, "triangle areas sum to {total}, expected 1"),
            Self::SideMismatch { fluid_area } => {
                write!(f, "fluid area {fluid_area} does not match the interface")
            }
            Self::InterfaceNodeOutOfRange { node } => {
                write!(f, "interface node {node} does not exist")
            }
            Self::OffInterface { node, deviation } => {
                write!(
                    f,
                    "interface node {node} is {deviation:e} off the interface line"
                )
            }
            Self::UnmatchedTrace { node } => {
                write!(
                    f,
                    "interface node {node} is not shared by both triangulations"
                )
            }
            Self::InterfaceOrder { node } => {
                write!(f, "interface node {node} breaks increasing-x order")
            }
            Self::InterfaceLength { length } => {
                write!(f, "interface segments sum to length {length}")
            }
            Self::DirichletOffBoundary { subdomain, node } => {
                write!(
                    f,
                    "Dirichlet node {node} of Ω_{subdomain} is not on the outer boundary"
                )
            }
            Self::DirichletOnInterface { subdomain, node } => {
                write!(
                    f,
                    "Dirichlet node {node} of Ω_{subdomain} lies inside the interface"
                )
            }
            Self::MissingEndpoint { subdomain, node } => {
                write!(
                    f,
                    "interface end point {node} missing from the Dirichlet set of Ω_{subdomain}"
                )
            }
        }
    }
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform mesh of the unit square split at `y = 3/4`: `n` columns, and rows
/// spaced `(3/4)/ceil(3n/4)` below the interface and `(1/4)/ceil(n/4)` above.
pub fn uniform_split_mesh(n: usize) -> Result<CoupledMesh, MeshError> {
    if n < 2 {
        return Err(MeshError::TooCoarse(n));
    }
    let rows_f = (3 * n).div_ceil(4);
    let rows_s = n.div_ceil(4);
    Ok(mapped_mesh(n, rows_f, rows_s, InterfaceGeometry::UNIFORM))
}

/// Columns per unit length at level 0 of the slanted family.
const SLANTED_BASE_COLUMNS: usize = 4;
/// Rows per subdomain at level 0 of the slanted family.
const SLANTED_BASE_ROWS: usize = 3;

/// Non-uniform mesh whose nodes resolve the interface `y = x/2 + 1/4`.
/// Each level doubles the resolution in both directions.
pub fn slanted_interface_mesh(level: usize) -> Result<CoupledMesh, MeshError> {
    if level > 10 {
        return Err(MeshError::LevelOutOfRange(level));
    }
    let scale = 1usize << level;
    Ok(mapped_mesh(
        SLANTED_BASE_COLUMNS * scale,
        SLANTED_BASE_ROWS * scale,
        SLANTED_BASE_ROWS * scale,
        InterfaceGeometry::SLANTED,
    ))
}

/// Mapped structured grid: global node `(i, r)` has id `r * (nx + 1) + i`,
/// rows `0..=rows_f` on the fluid side and `rows_f..=rows_f + rows_s` on the
/// solid side, with row `rows_f` on the interface.
fn mapped_mesh(
    nx: usize,
    rows_f: usize,
    rows_s: usize,
    geometry: InterfaceGeometry,
) -> CoupledMesh {
    let cols = nx + 1;
    let rows = rows_f + rows_s;
    let mut nodes = Vec::with_capacity(cols * (rows + 1));
    for r in 0..=rows {
        for i in 0..=nx {
            let x = i as f64 / nx as f64;
            let top = geometry.height_at(x);
            let y = if r == rows_f {
                top
            } else if r < rows_f {
                top * r as f64 / rows_f as f64
            } else if r == rows {
                1.0
            } else {
                top + (1.0 - top) * (r - rows_f) as f64 / rows_s as f64
            };
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, r: usize| r * cols + i;

    let mut triangles_f = Vec::with_capacity(2 * nx * rows_f);
    let mut triangles_s = Vec::with_capacity(2 * nx * rows_s);
    for r in 0..rows {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, r), id(i + 1, r), id(i + 1, r + 1), id(i, r + 1));
            let ac = distance(nodes[a], nodes[c]);
            let bd = distance(nodes[b], nodes[d]);
            let pair = if ac <= bd + GEOMETRY_TOL {
                [[a, b, c], [a, c, d]]
            } else {
                [[a, b, d], [b, c, d]]
            };
            if r < rows_f {
                triangles_f.extend(pair);
            } else {
                triangles_s.extend(pair);
            }
        }
    }

    let mut dirichlet_f = BTreeSet::new();
    let mut dirichlet_s = BTreeSet::new();
    for r in 0..=rows {
        for i in [0, nx] {
            if r <= rows_f {
                dirichlet_f.insert(id(i, r));
            }
            if r >= rows_f {
                dirichlet_s.insert(id(i, r));
            }
        }
    }
    for i in 0..=nx {
        dirichlet_f.insert(id(i, 0));
        dirichlet_s.insert(id(i, rows));
    }

    let interface_nodes: Vec<usize> = (0..=nx).map(|i| id(i, rows_f)).collect();
    let interface_segments = interface_nodes.windows(2).map(|w| [w[0], w[1]]).collect();

    let h_max = triangles_f
        .iter()
        .chain(&triangles_s)
        .map(|t| {
            let [p, q, s] = t.map(|k| nodes[k]);
            distance(p, q).max(distance(q, s)).max(distance(s, p))
        })
        .fold(0.0, f64::max);

    CoupledMesh {
        nodes,
        triangles_f,
        triangles_s,
        exterior_dirichlet_f: dirichlet_f.into_iter().collect(),
        exterior_dirichlet_s: dirichlet_s.into_iter().collect(),
        interface_nodes,
        interface_segments,
        h_max,
        geometry,
    }
}
