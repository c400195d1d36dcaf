//! Structured simplicial meshes on intervals and rectangles.
//!
//! Vertices are stored as `[f64; 2]`. On 1D meshes only the first component is
//! used and it is the vertical coordinate; on 2D meshes the layout is `[x, z]`.
//! The vertical (gravity) axis is always the last coordinate axis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

/// Default slack for the weakly acute test; right angles give dot products
/// that are zero up to rounding.
pub const WEAKLY_ACUTE_TOL: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("domain extent must be positive (got {0})")]
    NonPositiveExtent(f64),
    #[error("segment count must be at least 1")]
    NoSegments,
    #[error("an interval mesh needs at least 2 points (got {0})")]
    TooFewPoints(usize),
    #[error("at least one Dirichlet side is required")]
    NoDirichletSides,
    #[error("unsupported mesh dimension {0}")]
    BadDimension(usize),
    #[error("element {0} references vertex {1} which does not exist")]
    VertexOutOfRange(usize, usize),
    #[error("element {0} is degenerate (measure {1:e})")]
    Degenerate(usize, f64),
    #[error("element id {0} out of range")]
    ElementOutOfRange(usize),
    #[error("mesh text: {0}")]
    Parse(String),
}

/// Boundary side labels. Interval meshes only use `Left` (z = 0) and
/// `Right` (z = H).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Bottom,
    Top,
    Left,
    Right,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Top, Side::Left, Side::Right];

    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Top => "top",
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bottom" => Some(Side::Bottom),
            "top" => Some(Side::Top),
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }
}

/// A conforming simplicial mesh with a Dirichlet/interior node partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<[f64; 2]>,
    elements: Vec<usize>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
    boundary_markers: BTreeMap<usize, Side>,
    /// position of a node in `interior_nodes`, `None` for Dirichlet nodes
    interior_index: Vec<Option<usize>>,
}

/// Affine geometry of one P1 element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub element_id: usize,
    pub volume: f64,
    pub diameter: f64,
    n_local: usize,
    gradients: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// Constant basis gradients, one per local vertex.
    pub fn gradients(&self) -> &[[f64; 2]] {
        &self.gradients[..self.n_local]
    }

    pub fn grad_dot(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.gradients[i], self.gradients[j]);
        a[0] * b[0] + a[1] * b[1]
    }

    pub fn pairwise_grad_dots(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..self.n_local {
            for j in 0..self.n_local {
                out[i][j] = self.grad_dot(i, j);
            }
        }
        out
    }

    /// Component of the basis gradient along the vertical axis.
    pub fn vertical_gradient(&self, i: usize, dim: usize) -> f64 {
        self.gradients[i][dim - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcuteViolation {
    pub element: usize,
    pub local_i: usize,
    pub local_j: usize,
    pub dot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeaklyAcuteReport {
    pub passed: bool,
    pub violations: Vec<AcuteViolation>,
}

impl Mesh {
    /// Builds a mesh from raw parts. `boundary` maps every Dirichlet node to a
    /// side label; all other nodes are interior.
    pub fn from_parts(
        dim: usize,
        vertices: Vec<[f64; 2]>,
        elements: Vec<usize>,
        boundary: BTreeMap<usize, Side>,
    ) -> Result<Mesh, MeshError> {
        if dim != 1 && dim != 2 {
            return Err(MeshError::BadDimension(dim));
        }
        let stride = dim + 1;
        if elements.len() % stride != 0 {
            return Err(MeshError::Parse("element array length is not a multiple of dim+1".into()));
        }
        let nv = vertices.len();
        for (e, conn) in elements.chunks(stride).enumerate() {
            if let Some(&v) = conn.iter().find(|&&v| v >= nv) {
                return Err(MeshError::VertexOutOfRange(e, v));
            }
        }
        if let Some((&v, _)) = boundary.iter().find(|(&v, _)| v >= nv) {
            return Err(MeshError::VertexOutOfRange(usize::MAX, v));
        }
        let mut interior_index = vec![None; nv];
        let mut interior_nodes = Vec::new();
        for v in 0..nv {
            if !boundary.contains_key(&v) {
                interior_index[v] = Some(interior_nodes.len());
                interior_nodes.push(v);
            }
        }
        let mesh = Mesh {
            dim,
            vertices,
            elements,
            boundary_nodes: boundary.keys().copied().collect(),
            interior_nodes,
            boundary_markers: boundary,
            interior_index,
        };
        for e in 0..mesh.n_elements() {
            mesh.element_geometry(e)?;
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    /// Vertical coordinate of a vertex.
    pub fn height(&self, v: usize) -> f64 {
        self.vertices[v][self.dim - 1]
    }

    /// Horizontal coordinate (0 on interval meshes).
    pub fn horizontal(&self, v: usize) -> f64 {
        if self.dim == 2 {
            self.vertices[v][0]
        } else {
            0.0
        }
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.elements[e * s..(e + 1) * s]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.elements.chunks(self.dim + 1)
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn boundary_markers(&self) -> &BTreeMap<usize, Side> {
        &self.boundary_markers
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.interior_index[v].is_none()
    }

    /// Position of `v` in [`Mesh::interior_nodes`].
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_index[v]
    }

    /// Total measure of the domain.
    pub fn measure(&self) -> f64 {
        (0..self.n_elements())
            .map(|e| self.element_geometry(e).map(|g| g.volume).unwrap_or(0.0))
            .sum()
    }

    pub fn element_geometry(&self, e: usize) -> Result<ElementGeometry, MeshError> {
        if e >= self.n_elements() {
            return Err(MeshError::ElementOutOfRange(e));
        }
        let conn = self.element(e);
        let mut gradients = [[0.0; 2]; 3];
        let (volume, diameter) = if self.dim == 1 {
            let (a, b) = (self.vertices[conn[0]][0], self.vertices[conn[1]][0]);
            let len = b - a;
            if len.abs() <= f64::EPSILON * (a.abs() + b.abs()).max(1.0) {
                return Err(MeshError::Degenerate(e, len.abs()));
            }
            gradients[0] = [-1.0 / len, 0.0];
            gradients[1] = [1.0 / len, 0.0];
            (len.abs(), len.abs())
        } else {
            let p0 = self.vertices[conn[0]];
            let p1 = self.vertices[conn[1]];
            let p2 = self.vertices[conn[2]];
            let (ax, az) = (p1[0] - p0[0], p1[1] - p0[1]);
            let (bx, bz) = (p2[0] - p0[0], p2[1] - p0[1]);
            let det = ax * bz - az * bx;
            let scale = (ax * ax + az * az).max(bx * bx + bz * bz);
            if det.abs() <= 1e-14 * scale {
                return Err(MeshError::Degenerate(e, 0.5 * det.abs()));
            }
            // rows of the inverse Jacobian are the gradients of phi_1, phi_2
            gradients[1] = [bz / det, -bx / det];
            gradients[2] = [-az / det, ax / det];
            gradients[0] = [
                -gradients[1][0] - gradients[2][0],
                -gradients[1][1] - gradients[2][1],
            ];
            let d01 = ax.hypot(az);
            let d02 = bx.hypot(bz);
            let d12 = (p2[0] - p1[0]).hypot(p2[1] - p1[1]);
            (0.5 * det.abs(), d01.max(d02).max(d12))
        };
        Ok(ElementGeometry {
            element_id: e,
            volume,
            diameter,
            n_local: self.dim + 1,
            gradients,
        })
    }

    /// Barycentric location of a point: returns the element and the P1 basis
    /// weights of its vertices, or `None` when the point lies outside.
    pub fn locate(&self, point: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10;
        for e in 0..self.n_elements() {
            let conn = self.element(e);
            if self.dim == 1 {
                let (a, b) = (self.vertices[conn[0]][0], self.vertices[conn[1]][0]);
                let t = (point[0] - a) / (b - a);
                if (-tol..=1.0 + tol).contains(&t) {
                    return Some((e, [1.0 - t, t, 0.0]));
                }
            } else {
                let p0 = self.vertices[conn[0]];
                let p1 = self.vertices[conn[1]];
                let p2 = self.vertices[conn[2]];
                let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
                let l1 = ((point[0] - p0[0]) * (p2[1] - p0[1]) - (point[1] - p0[1]) * (p2[0] - p0[0])) / det;
                let l2 = ((p1[0] - p0[0]) * (point[1] - p0[1]) - (p1[1] - p0[1]) * (point[0] - p0[0])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 >= -tol && l1 >= -tol && l2 >= -tol {
                    return Some((e, [l0, l1, l2]));
                }
            }
        }
        None
    }

    /// Plain-text export: `dim n_vertices n_elements`, vertex coordinates,
    /// element tuples, then the boundary count followed by `node side` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.dim, self.n_vertices(), self.n_elements());
        for v in &self.vertices {
            if self.dim == 1 {
                let _ = writeln!(out, "{:.17e}", v[0]);
            } else {
                let _ = writeln!(out, "{:.17e} {:.17e}", v[0], v[1]);
            }
        }
        for conn in self.elements() {
            let line: Vec<String> = conn.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let _ = writeln!(out, "{}", self.boundary_nodes.len());
        for (v, side) in &self.boundary_markers {
            let _ = writeln!(out, "{} {}", v, side.name());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| MeshError::Parse(format!("unexpected end of input reading {what}")))
        };
        let nums = |line: &str| -> Result<Vec<f64>, MeshError> {
            line.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| MeshError::Parse(format!("{t:?}: {e}"))))
                .collect()
        };
        let header = nums(next("header")?)?;
        if header.len() != 3 {
            return Err(MeshError::Parse("header must be `dim n_vertices n_elements`".into()));
        }
        let (dim, nv, ne) = (header[0] as usize, header[1] as usize, header[2] as usize);
        if dim != 1 && dim != 2 {
            return Err(MeshError::BadDimension(dim));
        }
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let c = nums(next("vertex")?)?;
            if c.len() != dim {
                return Err(MeshError::Parse(format!("vertex line needs {dim} coordinates")));
            }
            vertices.push([c[0], if dim == 2 { c[1] } else { 0.0 }]);
        }
        let mut elements = Vec::with_capacity(ne * (dim + 1));
        for _ in 0..ne {
            let line = next("element")?;
            let conn: Result<Vec<usize>, _> = line.split_whitespace().map(str::parse::<usize>).collect();
            let conn = conn.map_err(|e| MeshError::Parse(e.to_string()))?;
            if conn.len() != dim + 1 {
                return Err(MeshError::Parse(format!("element line needs {} indices", dim + 1)));
            }
            elements.extend(conn);
        }
        let nb: usize = next("boundary count")?
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| MeshError::Parse(e.to_string()))?;
        let mut boundary = BTreeMap::new();
        for _ in 0..nb {
            let line = next("boundary node")?;
            let mut it = line.split_whitespace();
            let v: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| MeshError::Parse(format!("bad boundary line {line:?}")))?;
            let side = it
                .next()
                .and_then(Side::parse)
                .ok_or_else(|| MeshError::Parse(format!("bad side label in {line:?}")))?;
            boundary.insert(v, side);
        }
        Mesh::from_parts(dim, vertices, elements, boundary)
    }
}

/// Structured right-triangle mesh of `(0, L) x (0, H)`; every cell is split
/// along its lower-left to upper-right diagonal. Nodes on sides listed in
/// `dirichlet_sides` go to the Dirichlet set, everything else is interior
/// (natural zero-flux condition).
pub fn build_rect_mesh(
    length: f64,
    height: f64,
    nx: usize,
    nz: usize,
    dirichlet_sides: &BTreeSet<Side>,
) -> Result<Mesh, MeshError> {
    for ext in [length, height] {
        if !(ext > 0.0) || !ext.is_finite() {
            return Err(MeshError::NonPositiveExtent(ext));
        }
    }
    if nx == 0 || nz == 0 {
        return Err(MeshError::NoSegments);
    }
    if dirichlet_sides.is_empty() {
        return Err(MeshError::NoDirichletSides);
    }
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (nz + 1));
    for j in 0..=nz {
        for i in 0..=nx {
            vertices.push([length * i as f64 / nx as f64, height * j as f64 / nz as f64]);
        }
    }
    let mut elements = Vec::with_capacity(6 * nx * nz);
    for j in 0..nz {
        for i in 0..nx {
            let (ll, lr, ur, ul) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            elements.extend([ll, lr, ur]);
            elements.extend([ll, ur, ul]);
        }
    }
    let mut boundary = BTreeMap::new();
    for j in 0..=nz {
        for i in 0..=nx {
            let mut on = Vec::with_capacity(2);
            if j == 0 {
                on.push(Side::Bottom);
            }
            if j == nz {
                on.push(Side::Top);
            }
            if i == 0 {
                on.push(Side::Left);
            }
            if i == nx {
                on.push(Side::Right);
            }
            if let Some(&side) = on.iter().find(|s| dirichlet_sides.contains(s)) {
                boundary.insert(node(i, j), side);
            }
        }
    }
    Mesh::from_parts(2, vertices, elements, boundary)
}

/// Uniform interval mesh of `(0, H)` with `n_points` vertices and Dirichlet
/// data at both ends.
pub fn build_interval_mesh(height: f64, n_points: usize) -> Result<Mesh, MeshError> {
    if !(height > 0.0) || !height.is_finite() {
        return Err(MeshError::NonPositiveExtent(height));
    }
    if n_points < 2 {
        return Err(MeshError::TooFewPoints(n_points));
    }
    let segments = n_points - 1;
    let vertices = (0..n_points)
        .map(|i| [height * i as f64 / segments as f64, 0.0])
        .collect();
    let elements = (0..segments).flat_map(|i| [i, i + 1]).collect();
    let boundary = BTreeMap::from([(0, Side::Left), (segments, Side::Right)]);
    Mesh::from_parts(1, vertices, elements, boundary)
}

/// Equilateral triangular lattice with `nx + 1` nodes per row and `nz + 1`
/// rows, odd rows shifted by half a spacing. Bottom and top rows are
/// Dirichlet. `jitter(v)` displaces every other node; small displacements
/// keep all angles acute.
pub fn build_lattice_mesh(
    nx: usize,
    nz: usize,
    spacing: f64,
    mut jitter: impl FnMut(usize) -> [f64; 2],
) -> Result<Mesh, MeshError> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(MeshError::NonPositiveExtent(spacing));
    }
    if nx == 0 || nz == 0 {
        return Err(MeshError::NoSegments);
    }
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let dz = spacing * 3f64.sqrt() / 2.0;
    let mut vertices = Vec::with_capacity((nx + 1) * (nz + 1));
    let mut boundary = BTreeMap::new();
    for j in 0..=nz {
        let shift = if j % 2 == 1 { 0.5 * spacing } else { 0.0 };
        for i in 0..=nx {
            let v = node(i, j);
            let mut p = [i as f64 * spacing + shift, j as f64 * dz];
            if j == 0 {
                boundary.insert(v, Side::Bottom);
            } else if j == nz {
                boundary.insert(v, Side::Top);
            } else {
                let d = jitter(v);
                p = [p[0] + d[0], p[1] + d[1]];
            }
            vertices.push(p);
        }
    }
    let mut elements = Vec::with_capacity(6 * nx * nz);
    for j in 0..nz {
        for i in 0..nx {
            if j % 2 == 0 {
                elements.extend([node(i, j), node(i + 1, j), node(i, j + 1)]);
                elements.extend([node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
            } else {
                elements.extend([node(i, j), node(i + 1, j + 1), node(i, j + 1)]);
                elements.extend([node(i, j), node(i + 1, j), node(i + 1, j + 1)]);
            }
        }
    }
    Mesh::from_parts(2, vertices, elements, boundary)
}

/// Checks `grad(phi_i) . grad(phi_j) <= tol` for every distinct local pair.
pub fn check_weakly_acute(mesh: &Mesh, tol: f64) -> WeaklyAcuteReport {
    let mut violations = Vec::new();
    for e in 0..mesh.n_elements() {
        let Ok(geo) = mesh.element_geometry(e) else {
            continue;
        };
        for i in 0..geo.n_local() {
            for j in i + 1..geo.n_local() {
                let dot = geo.grad_dot(i, j);
                if dot > tol {
                    violations.push(AcuteViolation { element: e, local_i: i, local_j: j, dot });
                }
            }
        }
    }
    WeaklyAcuteReport { passed: violations.is_empty(), violations }
}
