//! Reference elements, derivative tabulation and degree-of-freedom maps.
//!
//! Every basis is stored as a polynomial in reference coordinates, obtained
//! by inverting the matrix of DOF functionals applied to a monomial span. On
//! a physical cell the reference functions are first pulled back through the
//! affine map (chain rule, [`push_forward`]); families whose DOFs are not
//! preserved by that map (Morley normal derivatives, Bogner–Fox–Schmit
//! derivative DOFs) are then recombined so that the *physical* DOF
//! functionals are dual to the basis.

use std::collections::HashMap;
use std::sync::Arc;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::error::{Error, Result};
use crate::mesh::{AffineMap, CellKind, Mesh, Point};

/// Highest derivative order any table can hold. Order 4 is what the
/// element-wise biharmonic operator needs.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Linear Lagrange triangle.
    P1,
    /// Quadratic Lagrange triangle.
    P2,
    /// Bilinear Lagrange quadrilateral.
    Q1,
    /// Trilinear Lagrange hexahedron.
    Q1Hex,
    /// Nonconforming quadratic plate triangle.
    Morley,
    /// Bogner–Fox–Schmit bicubic Hermite rectangle.
    Bfs,
}

impl Family {
    pub fn cell_kind(self) -> CellKind {
        match self {
            Family::P1 | Family::P2 | Family::Morley => CellKind::Triangle,
            Family::Q1 | Family::Bfs => CellKind::Quadrilateral,
            Family::Q1Hex => CellKind::Hexahedron,
        }
    }

    /// Polynomial degree used to choose quadrature (per variable for tensor
    /// families).
    pub fn degree(self) -> usize {
        match self {
            Family::P1 | Family::Q1 | Family::Q1Hex => 1,
            Family::P2 | Family::Morley => 2,
            Family::Bfs => 3,
        }
    }

    /// Whether the reference DOFs map onto the physical DOFs under affine maps.
    pub fn affine_equivalent(self) -> bool {
        !matches!(self, Family::Morley | Family::Bfs)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::P1 => "P1",
            Family::P2 => "P2",
            Family::Q1 => "Q1",
            Family::Q1Hex => "Q1Hex",
            Family::Morley => "Morley",
            Family::Bfs => "BFS",
        }
    }
}

/// Multi-index layout of all partial derivatives up to a given order,
/// sorted by order, then by decreasing x-exponent, then decreasing y.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivLayout {
    pub dim: usize,
    pub order: usize,
    pub alphas: Vec<[u8; 3]>,
}

impl DerivLayout {
    pub fn new(dim: usize, order: usize) -> DerivLayout {
        let mut alphas = Vec::new();
        for k in 0..=order as u8 {
            match dim {
                1 => alphas.push([k, 0, 0]),
                2 => (0..=k).for_each(|b| alphas.push([k - b, b, 0])),
                _ => {
                    for a in (0..=k).rev() {
                        for b in (0..=k - a).rev() {
                            alphas.push([a, b, k - a - b]);
                        }
                    }
                }
            }
        }
        DerivLayout { dim, order, alphas }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Position of a multi-index in the layout.
    pub fn index(&self, alpha: [u8; 3]) -> usize {
        let k = (alpha[0] + alpha[1] + alpha[2]) as usize;
        debug_assert!(k <= self.order);
        match self.dim {
            1 => k,
            2 => k * (k + 1) / 2 + alpha[1] as usize,
            _ => {
                let offset: usize = (0..k).map(|j| (j + 1) * (j + 2) / 2).sum();
                let a = alpha[0] as usize;
                let b = alpha[1] as usize;
                offset + (k - a) * (k - a + 1) / 2 + (k - a - b)
            }
        }
    }

    /// Multi-index of the derivative along the listed axes.
    pub fn alpha_of(axes: &[usize]) -> [u8; 3] {
        let mut alpha = [0u8; 3];
        for &a in axes {
            alpha[a] += 1;
        }
        alpha
    }
}

/// Sparse polynomial in up to three variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    pub terms: Vec<([u8; 3], f64)>,
}

impl Poly {
    /// Value of the derivative `∂^alpha` at `x`.
    pub fn eval_deriv(&self, alpha: [u8; 3], x: &Point) -> f64 {
        let mut s = 0.0;
        for (e, c) in &self.terms {
            if e[0] < alpha[0] || e[1] < alpha[1] || e[2] < alpha[2] {
                continue;
            }
            let mut t = *c;
            for k in 0..3 {
                for j in 0..alpha[k] {
                    t *= (e[k] - j) as f64;
                }
                t *= x[k].powi((e[k] - alpha[k]) as i32);
            }
            s += t;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofEntity {
    Vertex(usize),
    Edge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofKind {
    Value,
    NormalDerivative,
    /// Partial derivative along the given axis.
    PartialDerivative(usize),
    /// `∂²/∂x∂y`
    MixedDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofDescriptor {
    pub entity: DofEntity,
    pub kind: DofKind,
    /// Location of the functional in reference coordinates.
    pub point: Point,
    /// Reference normal for normal-derivative DOFs.
    pub normal: Point,
}

/// Values of a DOF functional applied to one function, given its
/// derivatives at the DOF point.
fn apply_functional(kind: DofKind, normal: &Point, derivs: impl Fn([u8; 3]) -> f64) -> f64 {
    match kind {
        DofKind::Value => derivs([0, 0, 0]),
        DofKind::NormalDerivative => normal[0] * derivs([1, 0, 0]) + normal[1] * derivs([0, 1, 0]),
        DofKind::PartialDerivative(axis) => {
            let mut a = [0u8; 3];
            a[axis] = 1;
            derivs(a)
        }
        DofKind::MixedDerivative => derivs([1, 1, 0]),
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    family: Family,
    dofs: Vec<DofDescriptor>,
    basis: Vec<Poly>,
}

impl ReferenceElement {
    pub fn new(family: Family) -> ReferenceElement {
        let (monomials, dofs) = definition(family);
        let n = dofs.len();
        debug_assert_eq!(monomials.len(), n);
        let v = Mat::from_fn(n, n, |i, j| {
            let m = Poly { terms: vec![(monomials[j], 1.0)] };
            apply_functional(dofs[i].kind, &dofs[i].normal, |a| m.eval_deriv(a, &dofs[i].point))
        });
        let c = v.partial_piv_lu().inverse();
        let basis =
            (0..n).map(|k| Poly { terms: (0..n).map(|j| (monomials[j], c[(j, k)])).filter(|(_, x)| *x != 0.0).collect() }).collect();
        ReferenceElement { family, dofs, basis }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn cell_kind(&self) -> CellKind {
        self.family.cell_kind()
    }

    pub fn degree(&self) -> usize {
        self.family.degree()
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn dofs(&self) -> &[DofDescriptor] {
        &self.dofs
    }

    pub fn basis(&self) -> &[Poly] {
        &self.basis
    }

    /// Local DOFs attached to the closure of a local facet.
    pub fn closure_dofs(&self, local_facet: usize) -> Vec<usize> {
        let kind = self.cell_kind();
        let verts = kind.facets()[local_facet];
        self.dofs
            .iter()
            .enumerate()
            .filter(|(_, d)| match d.entity {
                DofEntity::Vertex(v) => verts.contains(&v),
                DofEntity::Edge(e) => kind.dim() == 2 && e == local_facet,
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Reference basis derivatives of every order up to `order` at `pts`.
    pub fn tabulate(&self, pts: &[Point], order: usize) -> Result<BasisTable> {
        if order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "derivative order {order} exceeds the supported maximum {MAX_ORDER} for {}",
                self.family.name()
            )));
        }
        let layout = DerivLayout::new(self.cell_kind().dim(), order);
        let mut table = BasisTable::zeros(pts.len(), self.n_dofs(), layout);
        for (p, x) in pts.iter().enumerate() {
            for (i, b) in self.basis.iter().enumerate() {
                for c in 0..table.layout.len() {
                    let v = b.eval_deriv(table.layout.alphas[c], x);
                    table.set(p, i, c, v);
                }
            }
        }
        Ok(table)
    }
}

type Definition = (Vec<[u8; 3]>, Vec<DofDescriptor>);

fn definition(family: Family) -> Definition {
    let vertex_values = |kind: CellKind| -> Vec<DofDescriptor> {
        kind.reference_vertices()
            .iter()
            .enumerate()
            .map(|(v, &point)| DofDescriptor { entity: DofEntity::Vertex(v), kind: DofKind::Value, point, normal: [0.0; 3] })
            .collect()
    };
    let tri_edges: [(Point, Point); 3] = [
        ([0.5, 0.0, 0.0], [0.0, -1.0, 0.0]),
        ([0.5, 0.5, 0.0], [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2, 0.0]),
        ([0.0, 0.5, 0.0], [-1.0, 0.0, 0.0]),
    ];
    let p2_monomials = vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0], [1, 1, 0], [0, 2, 0]];
    match family {
        Family::P1 => (vec![[0, 0, 0], [1, 0, 0], [0, 1, 0]], vertex_values(CellKind::Triangle)),
        Family::P2 => {
            let mut dofs = vertex_values(CellKind::Triangle);
            for (e, (point, normal)) in tri_edges.iter().enumerate() {
                dofs.push(DofDescriptor { entity: DofEntity::Edge(e), kind: DofKind::Value, point: *point, normal: *normal });
            }
            (p2_monomials, dofs)
        }
        Family::Morley => {
            let mut dofs = vertex_values(CellKind::Triangle);
            for (e, (point, normal)) in tri_edges.iter().enumerate() {
                dofs.push(DofDescriptor { entity: DofEntity::Edge(e), kind: DofKind::NormalDerivative, point: *point, normal: *normal });
            }
            (p2_monomials, dofs)
        }
        Family::Q1 => (vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], vertex_values(CellKind::Quadrilateral)),
        Family::Q1Hex => {
            let mut monomials = Vec::new();
            for c in 0..2 {
                for b in 0..2 {
                    for a in 0..2 {
                        monomials.push([a, b, c]);
                    }
                }
            }
            (monomials, vertex_values(CellKind::Hexahedron))
        }
        Family::Bfs => {
            let mut monomials = Vec::new();
            for b in 0..4 {
                for a in 0..4 {
                    monomials.push([a, b, 0]);
                }
            }
            let kinds = [DofKind::Value, DofKind::PartialDerivative(0), DofKind::PartialDerivative(1), DofKind::MixedDerivative];
            let mut dofs = Vec::new();
            for (v, &point) in CellKind::Quadrilateral.reference_vertices().iter().enumerate() {
                for kind in kinds {
                    dofs.push(DofDescriptor { entity: DofEntity::Vertex(v), kind, point, normal: [0.0; 3] });
                }
            }
            (monomials, dofs)
        }
    }
}

/// Derivative table indexed by (point, basis function, derivative component).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub n_points: usize,
    pub n_basis: usize,
    pub layout: DerivLayout,
    pub data: Vec<f64>,
}

impl BasisTable {
    pub fn zeros(n_points: usize, n_basis: usize, layout: DerivLayout) -> BasisTable {
        let data = vec![0.0; n_points * n_basis * layout.len()];
        BasisTable { n_points, n_basis, layout, data }
    }

    #[inline]
    pub fn get(&self, p: usize, i: usize, c: usize) -> f64 {
        self.data[(p * self.n_basis + i) * self.layout.len() + c]
    }

    #[inline]
    pub fn set(&mut self, p: usize, i: usize, c: usize, v: f64) {
        let nc = self.layout.len();
        self.data[(p * self.n_basis + i) * nc + c] = v;
    }

    /// All derivative components of basis `i` at point `p`.
    pub fn components(&self, p: usize, i: usize) -> &[f64] {
        let nc = self.layout.len();
        let start = (p * self.n_basis + i) * nc;
        &self.data[start..start + nc]
    }

    /// Derivative `alpha` of the function with coefficients `coeffs`.
    pub fn eval(&self, p: usize, coeffs: &[f64], alpha: [u8; 3]) -> f64 {
        let c = self.layout.index(alpha);
        coeffs.iter().enumerate().map(|(i, x)| x * self.get(p, i, c)).sum()
    }
}

/// Chain-rule matrices `T[k]` with `∂^α_x = Σ_β T[α][β] ∂^β_ξ` for every
/// multi-index of order `k`.
fn chain_rule(layout: &DerivLayout, map: &AffineMap) -> Vec<Vec<(usize, f64)>> {
    let inv = map.inverse();
    let dim = layout.dim;
    let mut rows = Vec::with_capacity(layout.len());
    for alpha in &layout.alphas {
        let mut axes = Vec::new();
        for (k, &m) in alpha.iter().enumerate() {
            axes.extend(std::iter::repeat_n(k, m as usize));
        }
        let order = axes.len();
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for idx in 0..dim.pow(order as u32) {
            let mut r = idx;
            let mut w = 1.0;
            let mut beta = [0u8; 3];
            for &a in &axes {
                let c = r % dim;
                r /= dim;
                w *= inv[c][a];
                beta[c] += 1;
            }
            if w != 0.0 {
                *acc.entry(layout.index(beta)).or_insert(0.0) += w;
            }
        }
        let mut row: Vec<(usize, f64)> = acc.into_iter().collect();
        row.sort_by_key(|(i, _)| *i);
        rows.push(row);
    }
    rows
}

/// Physical derivatives of the pulled-back reference functions `φ ∘ F⁻¹`.
pub fn push_forward(elem: &ReferenceElement, map: &AffineMap, table: &BasisTable) -> Result<BasisTable> {
    if elem.cell_kind() != CellKind::Triangle && !map.is_diagonal() {
        return Err(Error::UnsupportedGeometry(format!("{} requires axis-aligned cells", elem.family().name())));
    }
    let rows = chain_rule(&table.layout, map);
    let mut out = BasisTable::zeros(table.n_points, table.n_basis, table.layout.clone());
    for p in 0..table.n_points {
        for i in 0..table.n_basis {
            let src = table.components(p, i);
            for (c, row) in rows.iter().enumerate() {
                let v: f64 = row.iter().map(|&(b, w)| w * src[b]).sum();
                out.set(p, i, c, v);
            }
        }
    }
    Ok(out)
}

/// Geometry of one cell plus, for non-affine-equivalent families, the
/// matrix recombining pulled-back functions into the physical nodal basis.
#[derive(Debug, Clone)]
pub struct CellTransform {
    pub map: AffineMap,
    /// Row-major `n × n`: `φ_k = Σ_j mix[k][j] (φ̂_j ∘ F⁻¹)`.
    pub mix: Option<Vec<f64>>,
}

impl CellTransform {
    pub fn new(elem: &ReferenceElement, mesh: &Mesh, cell: usize) -> Result<CellTransform> {
        if mesh.kind() != elem.cell_kind() {
            return Err(Error::InvalidArgument(format!("{} cannot live on {:?} cells", elem.family().name(), mesh.kind())));
        }
        let map = mesh.cell_map(cell)?;
        if elem.family().affine_equivalent() {
            return Ok(CellTransform { map, mix: None });
        }
        let n = elem.n_dofs();
        let pts: Vec<Point> = elem.dofs().iter().map(|d| d.point).collect();
        let pulled = push_forward(elem, &map, &elem.tabulate(&pts, 2)?)?;
        let verts = mesh.cell(cell);
        let kind = elem.cell_kind();
        // d[i][j] = physical functional i applied to pulled-back function j
        let d = Mat::from_fn(n, n, |i, j| {
            let dof = &elem.dofs()[i];
            let normal = match dof.entity {
                DofEntity::Edge(e) => {
                    let fv = kind.facets()[e];
                    global_edge_normal(mesh, verts[fv[0]], verts[fv[1]])
                }
                DofEntity::Vertex(_) => [0.0; 3],
            };
            apply_functional(dof.kind, &normal, |a| pulled.get(i, j, pulled.layout.index(a)))
        });
        let dinv = d.partial_piv_lu().inverse();
        // mix = D^{-T}
        let mix = (0..n * n).map(|idx| dinv[(idx % n, idx / n)]).collect();
        Ok(CellTransform { map, mix: Some(mix) })
    }

    /// Physical basis table from a reference table at the same points.
    pub fn physical(&self, elem: &ReferenceElement, table: &BasisTable) -> Result<BasisTable> {
        let pulled = push_forward(elem, &self.map, table)?;
        let Some(mix) = &self.mix else { return Ok(pulled) };
        let n = table.n_basis;
        let nc = table.layout.len();
        let mut out = BasisTable::zeros(table.n_points, n, table.layout.clone());
        for p in 0..table.n_points {
            for k in 0..n {
                for c in 0..nc {
                    let v: f64 = (0..n).map(|j| mix[k * n + j] * pulled.get(p, j, c)).sum();
                    out.set(p, k, c, v);
                }
            }
        }
        Ok(out)
    }
}

/// Unit normal of a global edge: the tangent from the lower to the higher
/// vertex index rotated clockwise.
pub fn global_edge_normal(mesh: &Mesh, a: usize, b: usize) -> Point {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let x0 = mesh.nodes()[lo];
    let x1 = mesh.nodes()[hi];
    let t = [x1[0] - x0[0], x1[1] - x0[1]];
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    [t[1] / len, -t[0] / len, 0.0]
}

/// Where a global DOF lives and which functional it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalDof {
    pub kind: DofKind,
    pub point: Point,
    pub normal: Point,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    element: Arc<ReferenceElement>,
    cell_dofs: Vec<usize>,
    n_global: usize,
    info: Vec<GlobalDof>,
}

impl DofMap {
    pub fn element(&self) -> &Arc<ReferenceElement> {
        &self.element
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        let n = self.element.n_dofs();
        &self.cell_dofs[c * n..(c + 1) * n]
    }

    pub fn info(&self) -> &[GlobalDof] {
        &self.info
    }

    /// Global DOFs in the closure of every boundary facet accepted by
    /// `select`, sorted and without duplicates.
    pub fn boundary_dofs(&self, mesh: &Mesh, select: impl Fn(&crate::mesh::BoundaryFacet) -> bool) -> Vec<usize> {
        let mut out = Vec::new();
        for f in mesh.boundary_facets().iter().filter(|f| select(f)) {
            for l in self.element.closure_dofs(f.local_facet) {
                out.push(self.cell_dofs(f.cell)[l]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// DOF-wise interpolation of a function given through its point jet
    /// (value, gradient, Hessian).
    pub fn interpolate(&self, f: impl Fn(&Point) -> PointJet) -> Vec<f64> {
        self.info
            .iter()
            .map(|d| {
                let jet = f(&d.point);
                match d.kind {
                    DofKind::Value => jet.value,
                    DofKind::NormalDerivative => jet.grad[0] * d.normal[0] + jet.grad[1] * d.normal[1],
                    DofKind::PartialDerivative(a) => jet.grad[a],
                    DofKind::MixedDerivative => jet.hess[0][1],
                }
            })
            .collect()
    }
}

/// Value, gradient and Hessian of a function at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointJet {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

/// Numbers the DOFs of `elem` on `mesh`: vertex DOFs first, then edge DOFs.
pub fn build_dofmap(mesh: &Mesh, elem: Arc<ReferenceElement>) -> Result<DofMap> {
    let kind = elem.cell_kind();
    if mesh.kind() != kind {
        return Err(Error::InvalidArgument(format!("{} needs {:?} cells, mesh has {:?}", elem.family().name(), kind, mesh.kind())));
    }
    let per_vertex = elem.dofs().iter().filter(|d| d.entity == DofEntity::Vertex(0)).count();
    let per_edge = elem.dofs().iter().filter(|d| d.entity == DofEntity::Edge(0)).count();
    let n_vertex_dofs = mesh.n_nodes() * per_vertex;

    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    if per_edge > 0 {
        for verts in mesh.cells() {
            for fv in kind.facets() {
                let (a, b) = (verts[fv[0]], verts[fv[1]]);
                let key = (a.min(b), a.max(b));
                edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
            }
        }
    }
    let n_global = n_vertex_dofs + edges.len() * per_edge;

    let mut info = vec![GlobalDof { kind: DofKind::Value, point: [0.0; 3], normal: [0.0; 3] }; n_global];
    let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * elem.n_dofs());
    for (c, verts) in mesh.cells().enumerate() {
        let mut seen_vertex = vec![0usize; kind.n_vertices()];
        let mut seen_edge = vec![0usize; kind.n_facets()];
        for dof in elem.dofs() {
            let g = match dof.entity {
                DofEntity::Vertex(v) => {
                    let g = verts[v] * per_vertex + seen_vertex[v];
                    seen_vertex[v] += 1;
                    info[g] = GlobalDof { kind: dof.kind, point: mesh.nodes()[verts[v]], normal: [0.0; 3] };
                    g
                }
                DofEntity::Edge(e) => {
                    let fv = kind.facets()[e];
                    let (a, b) = (verts[fv[0]], verts[fv[1]]);
                    let id = edge_ids[&(a.min(b), a.max(b))];
                    let g = n_vertex_dofs + id * per_edge + seen_edge[e];
                    seen_edge[e] += 1;
                    let (xa, xb) = (mesh.nodes()[a], mesh.nodes()[b]);
                    let mid = [0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1]), 0.5 * (xa[2] + xb[2])];
                    info[g] = GlobalDof { kind: dof.kind, point: mid, normal: global_edge_normal(mesh, a, b) };
                    g
                }
            };
            cell_dofs.push(g);
        }
        debug_assert_eq!(cell_dofs.len(), (c + 1) * elem.n_dofs());
    }
    Ok(DofMap { element: elem, cell_dofs, n_global, info })
}
