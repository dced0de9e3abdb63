//! Structured meshes on unit intervals, squares and cubes.
//!
//! Meshes are immutable after construction. Uniform refinement keeps the
//! coarse nodes at their original indices and records, for every child cell,
//! the index of its parent so that coarse functions can be prolonged.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Coordinates are stored with three components; unused trailing
/// components are zero for 2D meshes.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Triangle,
    Quadrilateral,
    Hexahedron,
}

const TRI_REF: [Point; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
const QUAD_REF: [Point; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
const HEX_REF: [Point; 8] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.0, 1.0, 1.0],
];

const TRI_FACETS: [&[usize]; 3] = [&[0, 1], &[1, 2], &[2, 0]];
const QUAD_FACETS: [&[usize]; 4] = [&[0, 1], &[1, 2], &[2, 3], &[3, 0]];
// Hex faces listed as parallelograms (a, b, c, d) with c = b + d - a.
const HEX_FACETS: [&[usize]; 6] = [&[0, 1, 2, 3], &[4, 5, 6, 7], &[0, 1, 5, 4], &[1, 2, 6, 5], &[3, 2, 6, 7], &[0, 3, 7, 4]];

impl CellKind {
    pub fn dim(self) -> usize {
        match self {
            CellKind::Triangle | CellKind::Quadrilateral => 2,
            CellKind::Hexahedron => 3,
        }
    }

    pub fn n_vertices(self) -> usize {
        self.reference_vertices().len()
    }

    pub fn reference_vertices(self) -> &'static [Point] {
        match self {
            CellKind::Triangle => &TRI_REF,
            CellKind::Quadrilateral => &QUAD_REF,
            CellKind::Hexahedron => &HEX_REF,
        }
    }

    pub fn n_facets(self) -> usize {
        self.facets().len()
    }

    /// Local vertex lists of every facet.
    pub fn facets(self) -> &'static [&'static [usize]] {
        match self {
            CellKind::Triangle => &TRI_FACETS,
            CellKind::Quadrilateral => &QUAD_FACETS,
            CellKind::Hexahedron => &HEX_FACETS,
        }
    }

    /// Measure of the reference cell.
    pub fn reference_measure(self) -> f64 {
        match self {
            CellKind::Triangle => 0.5,
            CellKind::Quadrilateral | CellKind::Hexahedron => 1.0,
        }
    }

    pub fn vtk_type(self) -> u8 {
        match self {
            CellKind::Triangle => 5,
            CellKind::Quadrilateral => 9,
            CellKind::Hexahedron => 12,
        }
    }
}

/// Affine map `x = origin + A ξ` from reference to physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub dim: usize,
    pub origin: Point,
    /// `jacobian[i][j] = ∂x_i/∂ξ_j`
    pub jacobian: [[f64; 3]; 3],
}

impl AffineMap {
    pub fn apply(&self, xi: &Point) -> Point {
        let mut x = self.origin;
        for i in 0..self.dim {
            for j in 0..self.dim {
                x[i] += self.jacobian[i][j] * xi[j];
            }
        }
        x
    }

    pub fn det(&self) -> f64 {
        let a = &self.jacobian;
        match self.dim {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// `inverse[j][i] = ∂ξ_j/∂x_i`
    pub fn inverse(&self) -> [[f64; 3]; 3] {
        let a = &self.jacobian;
        let det = self.det();
        let mut inv = [[0.0; 3]; 3];
        match self.dim {
            1 => inv[0][0] = 1.0 / a[0][0],
            2 => {
                inv[0][0] = a[1][1] / det;
                inv[0][1] = -a[0][1] / det;
                inv[1][0] = -a[1][0] / det;
                inv[1][1] = a[0][0] / det;
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
                        let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
                        inv[i][j] = (a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]) / det;
                    }
                }
            }
        }
        inv
    }

    pub fn to_reference(&self, x: &Point) -> Point {
        let inv = self.inverse();
        let mut xi = [0.0; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                xi[i] += inv[i][j] * (x[j] - self.origin[j]);
            }
        }
        xi
    }

    pub fn is_diagonal(&self) -> bool {
        let scale = (0..self.dim).map(|i| self.jacobian[i][i].abs()).fold(0.0, f64::max);
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.jacobian[i][j].abs() <= 1e-12 * scale))
    }
}

/// A facet on the boundary of the mesh together with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet {
    pub cell: usize,
    pub local_facet: usize,
    pub normal: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    kind: CellKind,
    nodes: Vec<Point>,
    cells: Vec<usize>,
    boundary_facets: Vec<BoundaryFacet>,
    h_per_cell: Vec<f64>,
    parent: Option<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw nodes and cell connectivity, deriving boundary
    /// facets and cell diameters.
    pub fn new(kind: CellKind, nodes: Vec<Point>, cells: Vec<usize>) -> Result<Mesh> {
        let nv = kind.n_vertices();
        if !cells.len().is_multiple_of(nv) {
            return Err(Error::InvalidArgument(format!("connectivity length {} is not a multiple of {nv}", cells.len())));
        }
        let mut mesh = Mesh { kind, nodes, cells, boundary_facets: Vec::new(), h_per_cell: Vec::new(), parent: None };
        mesh.validate()?;
        mesh.h_per_cell = (0..mesh.n_cells()).map(|c| mesh.diameter(c)).collect();
        mesh.boundary_facets = mesh.find_boundary_facets();
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            let verts = self.cell(c);
            for (i, &a) in verts.iter().enumerate() {
                if a >= self.nodes.len() {
                    return Err(Error::InvalidArgument(format!("cell {c} references missing node {a}")));
                }
                if verts[..i].contains(&a) {
                    return Err(Error::InvalidArgument(format!("cell {c} repeats node {a}")));
                }
            }
            let map = self.cell_map(c)?;
            if map.det() <= 0.0 {
                return Err(Error::InvalidArgument(format!("cell {c} has non-positive orientation")));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.kind.n_vertices()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.kind.n_vertices();
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.kind.n_vertices())
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn h_per_cell(&self) -> &[f64] {
        &self.h_per_cell
    }

    pub fn h_max(&self) -> f64 {
        self.h_per_cell.iter().cloned().fold(0.0, f64::max)
    }

    pub fn parent(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    pub fn vertex(&self, c: usize, local: usize) -> Point {
        self.nodes[self.cell(c)[local]]
    }

    pub fn centroid(&self, c: usize) -> Point {
        let verts = self.cell(c);
        let mut x = [0.0; 3];
        for &v in verts {
            for k in 0..3 {
                x[k] += self.nodes[v][k];
            }
        }
        x.map(|s| s / verts.len() as f64)
    }

    fn diameter(&self, c: usize) -> f64 {
        let verts = self.cell(c);
        let mut h: f64 = 0.0;
        for (i, &a) in verts.iter().enumerate() {
            for &b in &verts[i + 1..] {
                h = h.max(distance(&self.nodes[a], &self.nodes[b]));
            }
        }
        h
    }

    /// Reference-to-physical map of a cell. Quadrilaterals and hexahedra must
    /// be axis-aligned boxes.
    pub fn cell_map(&self, c: usize) -> Result<AffineMap> {
        let dim = self.dim();
        let v0 = self.vertex(c, 0);
        let axes: Vec<usize> = match self.kind {
            CellKind::Triangle => vec![1, 2],
            CellKind::Quadrilateral => vec![1, 3],
            CellKind::Hexahedron => vec![1, 3, 4],
        };
        let mut jacobian = [[0.0; 3]; 3];
        for (j, &a) in axes.iter().enumerate() {
            let va = self.vertex(c, a);
            for i in 0..dim {
                jacobian[i][j] = va[i] - v0[i];
            }
        }
        let mut map = AffineMap { dim, origin: v0, jacobian };
        if self.kind != CellKind::Triangle {
            if !map.is_diagonal() {
                return Err(Error::UnsupportedGeometry(format!("cell {c} is not axis-aligned")));
            }
            // Drop round-off left by refinement so box cells map exactly.
            for i in 0..dim {
                for j in 0..dim {
                    if i != j {
                        map.jacobian[i][j] = 0.0;
                    }
                }
            }
            for (l, r) in self.kind.reference_vertices().iter().enumerate() {
                let x = map.apply(r);
                if distance(&x, &self.vertex(c, l)) > 1e-12 * (1.0 + norm(&x)) {
                    return Err(Error::UnsupportedGeometry(format!("cell {c} is not a box")));
                }
            }
        }
        Ok(map)
    }

    /// Physical vertices of a local facet.
    pub fn facet_vertices(&self, c: usize, local_facet: usize) -> Vec<Point> {
        self.kind.facets()[local_facet].iter().map(|&l| self.vertex(c, l)).collect()
    }

    /// Measure (length or area) of a facet.
    pub fn facet_measure(&self, c: usize, local_facet: usize) -> f64 {
        let v = self.facet_vertices(c, local_facet);
        match self.dim() {
            2 => distance(&v[0], &v[1]),
            _ => norm(&cross(&sub(&v[1], &v[0]), &sub(&v[3], &v[0]))),
        }
    }

    fn facet_normal(&self, c: usize, local_facet: usize) -> Point {
        let v = self.facet_vertices(c, local_facet);
        let mut n = match self.dim() {
            2 => {
                let t = sub(&v[1], &v[0]);
                [t[1], -t[0], 0.0]
            }
            _ => cross(&sub(&v[1], &v[0]), &sub(&v[3], &v[0])),
        };
        let len = norm(&n);
        n = n.map(|x| x / len);
        let centre = self.centroid(c);
        if dot(&n, &sub(&v[0], &centre)) < 0.0 {
            n = n.map(|x| -x);
        }
        n
    }

    fn find_boundary_facets(&self) -> Vec<BoundaryFacet> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in 0..self.n_cells() {
            for f in 0..self.kind.n_facets() {
                *count.entry(self.facet_key(c, f)).or_insert(0) += 1;
            }
        }
        let mut out = Vec::new();
        for c in 0..self.n_cells() {
            for f in 0..self.kind.n_facets() {
                if count[&self.facet_key(c, f)] == 1 {
                    out.push(BoundaryFacet { cell: c, local_facet: f, normal: self.facet_normal(c, f) });
                }
            }
        }
        out
    }

    fn facet_key(&self, c: usize, f: usize) -> Vec<usize> {
        let verts = self.cell(c);
        let mut key: Vec<usize> = self.kind.facets()[f].iter().map(|&l| verts[l]).collect();
        key.sort_unstable();
        key
    }

    /// Measure of the whole mesh, Σ_K |K|.
    pub fn measure(&self) -> Result<f64> {
        let mut total = 0.0;
        for c in 0..self.n_cells() {
            total += self.cell_map(c)?.det().abs() * self.kind.reference_measure();
        }
        Ok(total)
    }

    /// A copy of the mesh shifted by `offset`.
    pub fn translated(&self, offset: Point) -> Mesh {
        let mut m = self.clone();
        for x in &mut m.nodes {
            for k in 0..3 {
                x[k] += offset[k];
            }
        }
        m
    }

    /// Finds the cell containing `x` (closed cells, tolerance relative to h).
    pub fn locate(&self, x: &Point) -> Option<(usize, Point)> {
        for c in 0..self.n_cells() {
            let map = self.cell_map(c).ok()?;
            let xi = map.to_reference(x);
            if reference_contains(self.kind, &xi, 1e-10) {
                return Some((c, xi));
            }
        }
        None
    }
}

pub(crate) fn reference_contains(kind: CellKind, xi: &Point, tol: f64) -> bool {
    match kind {
        CellKind::Triangle => xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol,
        CellKind::Quadrilateral => (0..2).all(|k| xi[k] >= -tol && xi[k] <= 1.0 + tol),
        CellKind::Hexahedron => (0..3).all(|k| xi[k] >= -tol && xi[k] <= 1.0 + tol),
    }
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

fn check_subdivisions(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of subdivisions must be at least 1".into()));
    }
    Ok(())
}

/// Unit square split into `2n²` triangles along the lower-left to
/// upper-right diagonal of every sub-square.
pub fn unit_square_tri(n: usize) -> Result<Mesh> {
    check_subdivisions(n)?;
    let nodes = grid_nodes_2d(n);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.extend_from_slice(&[a, b, c, a, c, d]);
        }
    }
    Mesh::new(CellKind::Triangle, nodes, cells)
}

/// Unit square split into `n²` axis-aligned quadrilaterals.
pub fn unit_square_quad(n: usize) -> Result<Mesh> {
    check_subdivisions(n)?;
    let nodes = grid_nodes_2d(n);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.extend_from_slice(&[id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(CellKind::Quadrilateral, nodes, cells)
}

/// Unit cube split into `n³` hexahedra, shifted by `z_offset` along z.
pub fn unit_cube_hex(n: usize, z_offset: f64) -> Result<Mesh> {
    check_subdivisions(n)?;
    let s = n as f64;
    let mut nodes = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([i as f64 / s, j as f64 / s, k as f64 / s + z_offset]);
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut cells = Vec::with_capacity(8 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                cells.extend_from_slice(&[
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
            }
        }
    }
    Mesh::new(CellKind::Hexahedron, nodes, cells)
}

fn grid_nodes_2d(n: usize) -> Vec<Point> {
    let s = n as f64;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 / s, j as f64 / s, 0.0]);
        }
    }
    nodes
}

/// Uniform refinement: triangles and quadrilaterals into 4 children,
/// hexahedra into 8. Coarse nodes keep their indices.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let kind = m.kind;
    let mut nodes = m.nodes.clone();
    let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut cells = Vec::with_capacity(m.cells.len() * if kind == CellKind::Hexahedron { 8 } else { 4 });
    let mut parent = Vec::new();

    // Node at the barycentre of a set of coarse vertices, created once.
    let mut node_for = |support: Vec<usize>, nodes: &mut Vec<Point>| -> usize {
        if support.len() == 1 {
            return support[0];
        }
        let mut key = support;
        key.sort_unstable();
        if let Some(&id) = lookup.get(&key) {
            return id;
        }
        let mut x = [0.0; 3];
        for &v in &key {
            for k in 0..3 {
                x[k] += nodes[v][k];
            }
        }
        let x = x.map(|s| s / key.len() as f64);
        nodes.push(x);
        lookup.insert(key, nodes.len() - 1);
        nodes.len() - 1
    };

    for c in 0..m.n_cells() {
        let verts = m.cell(c).to_vec();
        match kind {
            CellKind::Triangle => {
                let m01 = node_for(vec![verts[0], verts[1]], &mut nodes);
                let m12 = node_for(vec![verts[1], verts[2]], &mut nodes);
                let m20 = node_for(vec![verts[2], verts[0]], &mut nodes);
                let children = [[verts[0], m01, m20], [m01, verts[1], m12], [m20, m12, verts[2]], [m01, m12, m20]];
                for ch in children {
                    cells.extend_from_slice(&ch);
                    parent.push(c);
                }
            }
            CellKind::Quadrilateral | CellKind::Hexahedron => {
                let dim = kind.dim();
                let refs = kind.reference_vertices();
                // Lattice coordinates in {0, 1, 2}^dim, 1 meaning "midway".
                let lattice = |p: [usize; 3], nodes: &mut Vec<Point>, node_for: &mut dyn FnMut(Vec<usize>, &mut Vec<Point>) -> usize| {
                    let support: Vec<usize> = refs
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| (0..dim).all(|k| p[k] == 1 || r[k] * 2.0 == p[k] as f64))
                        .map(|(l, _)| verts[l])
                        .collect();
                    node_for(support, nodes)
                };
                let offsets: Vec<[usize; 3]> = if dim == 2 {
                    vec![[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
                } else {
                    vec![[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
                };
                for child in &offsets {
                    for r in refs {
                        let mut p = [0usize; 3];
                        for k in 0..dim {
                            p[k] = child[k] + r[k] as usize;
                        }
                        let id = lattice(p, &mut nodes, &mut node_for);
                        cells.push(id);
                    }
                    parent.push(c);
                }
            }
        }
    }
    let mut fine = Mesh::new(kind, nodes, cells).expect("refinement of a valid mesh is valid");
    fine.parent = Some(parent);
    fine
}

/// Which entities of a mesh take part in an interface pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterfaceZone {
    /// Every cell of the mesh.
    Cells,
    /// Boundary facets whose outward normal matches the given unit vector.
    BoundaryFacets { normal: Point },
}

/// A cell, or a local facet of a cell, on one side of an interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfaceEntity {
    pub cell: usize,
    pub facet: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct InterfacePairing {
    pub pairs: Vec<(InterfaceEntity, InterfaceEntity)>,
    /// Coordinate axis dropped when projecting onto the pairing plane.
    pub axis: usize,
    pub tolerance: f64,
}

fn zone_entities(m: &Mesh, zone: InterfaceZone) -> Vec<(InterfaceEntity, Vec<Point>)> {
    match zone {
        InterfaceZone::Cells => {
            (0..m.n_cells()).map(|c| (InterfaceEntity { cell: c, facet: None }, m.cell(c).iter().map(|&v| m.nodes[v]).collect())).collect()
        }
        InterfaceZone::BoundaryFacets { normal } => m
            .boundary_facets
            .iter()
            .filter(|f| distance(&f.normal, &normal) < 1e-9)
            .map(|f| (InterfaceEntity { cell: f.cell, facet: Some(f.local_facet) }, m.facet_vertices(f.cell, f.local_facet)))
            .collect(),
    }
}

fn project(points: &[Point], axis: usize) -> Vec<[f64; 2]> {
    let keep: Vec<usize> = (0..3).filter(|&k| k != axis).collect();
    let mut out: Vec<[f64; 2]> = points.iter().map(|p| [p[keep[0]], p[keep[1]]]).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    out
}

/// Pairs the entities of two meshes whose projections onto the plane
/// orthogonal to `axis` coincide within `tol`. The pairing must be a
/// bijection between the two zones.
pub fn pair_interface(a: &Mesh, a_zone: InterfaceZone, b: &Mesh, b_zone: InterfaceZone, axis: usize, tol: f64) -> Result<InterfacePairing> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("pairing axis {axis} out of range")));
    }
    let ea = zone_entities(a, a_zone);
    let eb = zone_entities(b, b_zone);
    if ea.is_empty() {
        return Err(Error::PairingFailure("contact zone on the first mesh is empty".into()));
    }
    let pb: Vec<Vec<[f64; 2]>> = eb.iter().map(|(_, v)| project(v, axis)).collect();
    // Index B entities by the first projected vertex for a bounded search.
    let mut order: Vec<usize> = (0..eb.len()).collect();
    order.sort_by(|&i, &j| pb[i][0].partial_cmp(&pb[j][0]).expect("finite coordinates"));
    let mut used = vec![false; eb.len()];
    let mut pairs = Vec::with_capacity(ea.len());
    for (ent, verts) in &ea {
        let pa = project(verts, axis);
        let lo = order.partition_point(|&i| pb[i][0][0] < pa[0][0] - tol);
        let hit = order[lo..].iter().take_while(|&&i| pb[i][0][0] <= pa[0][0] + tol).copied().find(|&i| {
            !used[i]
                && pb[i].len() == pa.len()
                && pb[i].iter().zip(&pa).all(|(p, q)| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol)
        });
        match hit {
            Some(i) => {
                used[i] = true;
                pairs.push((*ent, eb[i].0));
            }
            None => return Err(Error::PairingFailure(format!("no partner for cell {} facet {:?} of the first mesh", ent.cell, ent.facet))),
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Error::PairingFailure(format!("cell {} facet {:?} of the second mesh is unmatched", eb[i].0.cell, eb[i].0.facet)));
    }
    Ok(InterfacePairing { pairs, axis, tolerance: tol })
}
