//! Global energy, residual and Jacobian assembly; prolongation and norms.
//!
//! A [`Problem`] is a set of fields plus a list of integration terms. Each
//! term is compiled once: quadrature points, physical basis tables and the
//! positions of its local matrix entries in the global sparsity pattern are
//! stored per integration entity. Assembly then only evaluates integrands.
//!
//! Derivatives are taken with hyper-dual numbers with respect to the jet
//! (field values and partial derivatives at a quadrature point) and pulled
//! back to the local DOFs through the basis tables. Since the jet is linear
//! in the DOFs this gives the exact DOF gradient and Hessian.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::autodiff::{eval_grad_hess, HyperDual};
use crate::elements::{build_dofmap, BasisTable, CellTransform, DofKind, Family, PointJet, ReferenceElement};
use crate::error::{Error, Result};
use crate::forms::{ConstraintKind, Integrand, Jet, PointContext, SlotShape};
use crate::mesh::{BoundaryFacet, CellKind, InterfacePairing, Mesh, Point};
use crate::quadrature::{rule_for, RefShape, MAX_DEGREE};

/// Marker for a strongly constrained DOF or an unused pattern slot.
pub const NONE: usize = usize::MAX;

/// Compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries and drops the ones that end up exactly zero.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> SparseMatrix {
        let mut t: Vec<(usize, usize, f64)> = triplets.to_vec();
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut rows = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            if rows.last() == Some(&i) && col_idx.last() == Some(&j) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n, row_ptr, col_idx, values }.drop_zeros()
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Removes stored entries equal to zero.
    pub fn drop_zeros(self) -> SparseMatrix {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let mut row_ptr = vec![0; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.values.len());
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[i + 1] = values.len();
        }
        SparseMatrix { n: self.n, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k])))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.values[k] * x[self.col_idx[k]]).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij − a_ji|`
    pub fn asymmetry(&self) -> f64 {
        self.triplets().fold(0.0, |m, (i, j, v)| m.max((v - self.get(j, i)).abs()))
    }
}

/// One unknown field: a (possibly vector-valued) finite element function.
#[derive(Debug, Clone)]
pub struct Field {
    pub name: String,
    pub mesh: Arc<Mesh>,
    pub dofmap: crate::elements::DofMap,
    pub ncomp: usize,
    /// Strongly constrained entries, indexed `scalar_dof * ncomp + comp`.
    pub fixed: Vec<bool>,
}

impl Field {
    pub fn new(name: &str, mesh: Arc<Mesh>, family: Family, ncomp: usize) -> Result<Field> {
        let dofmap = build_dofmap(&mesh, Arc::new(ReferenceElement::new(family)))?;
        let n = dofmap.n_global() * ncomp;
        Ok(Field { name: name.to_string(), mesh, dofmap, ncomp, fixed: vec![false; n] })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_global() * self.ncomp
    }

    pub fn element(&self) -> &ReferenceElement {
        self.dofmap.element()
    }

    pub fn family(&self) -> Family {
        self.element().family()
    }

    /// Values of every component at reference points of one cell, indexed
    /// `[point][comp]`. `u` holds this field's entries only.
    pub fn evaluate(&self, u: &[f64], cell: usize, xi: &[Point]) -> Result<Vec<Vec<f64>>> {
        let elem = self.element();
        let tr = CellTransform::new(elem, &self.mesh, cell)?;
        let tab = tr.physical(elem, &elem.tabulate(xi, 0)?)?;
        let dofs = self.dofmap.cell_dofs(cell);
        Ok((0..xi.len())
            .map(|p| {
                (0..self.ncomp)
                    .map(|c| {
                        let coeffs: Vec<f64> = dofs.iter().map(|&g| u[g * self.ncomp + c]).collect();
                        tab.eval(p, &coeffs, [0, 0, 0])
                    })
                    .collect()
            })
            .collect())
    }

    /// Fixes the listed components of every DOF on the selected boundary facets.
    pub fn fix_boundary(&mut self, select: impl Fn(&BoundaryFacet) -> bool, comps: &[usize]) {
        for g in self.dofmap.boundary_dofs(&self.mesh, select) {
            for &c in comps {
                self.fixed[g * self.ncomp + c] = true;
            }
        }
    }
}

/// A field seen by a term, with the highest derivative order the integrand
/// reads from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub field: usize,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone)]
pub enum Zone {
    /// Every cell of the slots' common mesh.
    Cells,
    /// The listed `(cell, local_facet)` boundary facets.
    Boundary(Vec<(usize, usize)>),
    /// Paired entities of two meshes; each slot lives on one side.
    /// Quadrature points are placed on side A.
    Interface { pairing: InterfacePairing, sides: Vec<Side> },
}

#[derive(Clone)]
pub struct Term {
    pub name: String,
    pub zone: Zone,
    pub slots: Vec<Slot>,
    pub integrand: Arc<dyn Integrand>,
    pub quad_degree: usize,
}

struct Entity {
    cell: usize,
    points: Vec<Point>,
    weights: Vec<f64>,
    normal: Point,
    h: f64,
    tables: Vec<Arc<BasisTable>>,
    /// Local DOF → full global index.
    dofs: Vec<usize>,
    /// Local DOF → free index, or [`NONE`].
    free: Vec<usize>,
    /// Row-major local matrix entry → position in the Jacobian values.
    pos: Vec<usize>,
    /// First local DOF of each slot.
    starts: Vec<usize>,
}

struct CompiledTerm {
    name: String,
    integrand: Arc<dyn Integrand>,
    shapes: Vec<SlotShape>,
    /// Jet positions that can be nonzero, with their (slot, comp, component).
    active: Vec<(usize, usize, usize, usize)>,
    jet_len: usize,
    entities: Vec<Entity>,
}

/// Values returned by a full assembly on the free DOFs.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub energy: f64,
    pub residual: Vec<f64>,
    pub jacobian: SparseMatrix,
}

/// λ_h and β at one constraint quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSample {
    pub term: usize,
    pub cell: usize,
    pub x: Point,
    pub weight: f64,
    pub beta: f64,
    pub value: f64,
}

#[derive(Clone)]
pub struct Problem {
    fields: Vec<Field>,
    offsets: Vec<usize>,
    n_dofs: usize,
    free: Vec<usize>,
    terms: Vec<Arc<CompiledTerm>>,
    pattern_rows: Vec<usize>,
    pattern_cols: Vec<usize>,
}

#[derive(Default)]
struct TableCache {
    map: HashMap<Vec<u64>, Arc<BasisTable>>,
}

impl TableCache {
    fn get(&mut self, elem: &ReferenceElement, tr: &CellTransform, pts: &[Point], order: usize) -> Result<Arc<BasisTable>> {
        let mut key = vec![elem.family() as u64, order as u64];
        key.extend(tr.map.jacobian.iter().flatten().map(|v| v.to_bits()));
        if let Some(m) = &tr.mix {
            key.extend(m.iter().map(|v| v.to_bits()));
        }
        key.extend(pts.iter().flatten().map(|v| v.to_bits()));
        if let Some(t) = self.map.get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(tr.physical(elem, &elem.tabulate(pts, order)?)?);
        self.map.insert(key, t.clone());
        Ok(t)
    }
}

/// Affine parameterization of a cell or facet by `t ∈` its parameter domain.
struct Param {
    shape: RefShape,
    xi0: Point,
    axes: Vec<Point>,
    scale: f64,
}

fn entity_param(mesh: &Mesh, cell: usize, facet: Option<usize>) -> Result<Param> {
    let kind = mesh.kind();
    match facet {
        None => {
            let det = mesh.cell_map(cell)?.det().abs();
            let axes = (0..kind.dim())
                .map(|k| {
                    let mut e = [0.0; 3];
                    e[k] = 1.0;
                    e
                })
                .collect();
            Ok(Param { shape: RefShape::from(kind), xi0: [0.0; 3], axes, scale: det })
        }
        Some(lf) => {
            let fv = kind.facets()[lf];
            let rv = kind.reference_vertices();
            let xi0 = rv[fv[0]];
            let dir = |v: usize| [rv[v][0] - xi0[0], rv[v][1] - xi0[1], rv[v][2] - xi0[2]];
            let (shape, axes) = if fv.len() == 2 {
                (RefShape::Interval, vec![dir(fv[1])])
            } else {
                (RefShape::Quadrilateral, vec![dir(fv[1]), dir(fv[3])])
            };
            Ok(Param { shape, xi0, axes, scale: mesh.facet_measure(cell, lf) })
        }
    }
}

impl Param {
    fn xi(&self, t: &Point) -> Point {
        let mut x = self.xi0;
        for (k, a) in self.axes.iter().enumerate() {
            for d in 0..3 {
                x[d] += t[k] * a[d];
            }
        }
        x
    }

    /// Parameter of the point whose projection (dropping `axis`) matches
    /// that of the physical point `x`.
    fn solve(&self, mesh: &Mesh, cell: usize, x: &Point, axis: usize) -> Result<Point> {
        let map = mesh.cell_map(cell)?;
        let x0 = map.apply(&self.xi0);
        let keep: Vec<usize> = (0..3).filter(|&k| k != axis).collect();
        let cols: Vec<Point> = self
            .axes
            .iter()
            .map(|a| {
                let p = map.apply(&[self.xi0[0] + a[0], self.xi0[1] + a[1], self.xi0[2] + a[2]]);
                [p[0] - x0[0], p[1] - x0[1], p[2] - x0[2]]
            })
            .collect();
        let r = [x[0] - x0[0], x[1] - x0[1], x[2] - x0[2]];
        let n = cols.len();
        let mut ata = [[0.0; 2]; 2];
        let mut atr = [0.0; 2];
        for i in 0..n {
            for &k in &keep {
                atr[i] += cols[i][k] * r[k];
                for j in 0..n {
                    ata[i][j] += cols[i][k] * cols[j][k];
                }
            }
        }
        let mut t = [0.0; 3];
        if n == 1 {
            t[0] = atr[0] / ata[0][0];
        } else {
            let det = ata[0][0] * ata[1][1] - ata[0][1] * ata[1][0];
            t[0] = (ata[1][1] * atr[0] - ata[0][1] * atr[1]) / det;
            t[1] = (ata[0][0] * atr[1] - ata[1][0] * atr[0]) / det;
        }
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::PairingFailure(format!("degenerate interface entity on cell {cell}")));
        }
        Ok(t)
    }
}

fn facet_normal(mesh: &Mesh, cell: usize, lf: usize) -> Result<Point> {
    mesh.boundary_facets()
        .iter()
        .find(|f| f.cell == cell && f.local_facet == lf)
        .map(|f| f.normal)
        .ok_or_else(|| Error::InvalidArgument(format!("facet {lf} of cell {cell} is not on the boundary")))
}

impl Problem {
    pub fn new(fields: Vec<Field>, terms: Vec<Term>) -> Result<Problem> {
        let mut offsets = Vec::with_capacity(fields.len());
        let mut n_dofs = 0;
        for f in &fields {
            offsets.push(n_dofs);
            n_dofs += f.n_dofs();
        }
        let mut free = Vec::new();
        let mut free_index = vec![NONE; n_dofs];
        for (f, field) in fields.iter().enumerate() {
            for (k, &fixed) in field.fixed.iter().enumerate() {
                if !fixed {
                    free_index[offsets[f] + k] = free.len();
                    free.push(offsets[f] + k);
                }
            }
        }
        let mut cache = TableCache::default();
        let mut compiled = Vec::with_capacity(terms.len());
        for t in &terms {
            compiled.push(compile_term(t, &fields, &offsets, &free_index, &mut cache)?);
        }
        let mut p = Problem { fields, offsets, n_dofs, free, terms: Vec::new(), pattern_rows: Vec::new(), pattern_cols: Vec::new() };
        p.build_pattern(&mut compiled);
        p.terms = compiled.into_iter().map(Arc::new).collect();
        Ok(p)
    }

    fn build_pattern(&mut self, terms: &mut [CompiledTerm]) {
        let n = self.free.len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in terms.iter() {
            for e in &t.entities {
                for &i in e.free.iter().filter(|&&i| i != NONE) {
                    rows[i].extend(e.free.iter().copied().filter(|&j| j != NONE));
                }
            }
        }
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        for (i, r) in rows.iter_mut().enumerate() {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(r);
            row_ptr[i + 1] = cols.len();
        }
        for t in terms.iter_mut() {
            for e in &mut t.entities {
                let nl = e.free.len();
                e.pos = vec![NONE; nl * nl];
                for a in 0..nl {
                    let i = e.free[a];
                    if i == NONE {
                        continue;
                    }
                    let row = &cols[row_ptr[i]..row_ptr[i + 1]];
                    for b in 0..nl {
                        let j = e.free[b];
                        if j != NONE {
                            e.pos[a * nl + b] = row_ptr[i] + row.binary_search(&j).expect("pattern contains entity");
                        }
                    }
                }
            }
        }
        self.pattern_rows = row_ptr;
        self.pattern_cols = cols;
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Number of unknowns after strong constraints are eliminated.
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn term_names(&self) -> Vec<&str> {
        self.terms.iter().map(|t| t.name.as_str()).collect()
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.n_dofs]
    }

    /// Slice of `u` belonging to field `f`.
    pub fn field_values<'a>(&self, u: &'a [f64], f: usize) -> &'a [f64] {
        &u[self.offsets[f]..self.offsets[f] + self.fields[f].n_dofs()]
    }

    /// The same problem without its constraint terms.
    pub fn without_constraints(&self) -> Problem {
        let mut p = self.clone();
        p.terms.retain(|t| t.integrand.kind().is_none());
        p
    }

    pub fn has_inequality(&self) -> bool {
        self.terms.iter().any(|t| t.integrand.kind().is_some_and(|k| k.is_inequality()))
    }

    /// Restricts a full vector to the free DOFs.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&g| u[g]).collect()
    }

    /// Adds `alpha * w` (free DOFs) to `u` (full vector).
    pub fn update(&self, u: &mut [f64], w: &[f64], alpha: f64) {
        for (k, &g) in self.free.iter().enumerate() {
            u[g] += alpha * w[k];
        }
    }

    /// Total energy.
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            let parts: Vec<Result<f64>> = t.entities.par_iter().map(|e| t.entity_energy(e, u)).collect();
            for p in parts {
                total += p?;
            }
        }
        Ok(total)
    }

    /// Energy, residual and Jacobian on the free DOFs.
    pub fn assemble(&self, u: &[f64]) -> Result<Assembled> {
        let nf = self.free.len();
        let mut energy = 0.0;
        let mut residual = vec![0.0; nf];
        let mut values = vec![0.0; self.pattern_cols.len()];
        for t in &self.terms {
            let locals: Vec<Result<Local>> = t.entities.par_iter().map(|e| t.entity_local(e, u)).collect();
            for (e, l) in t.entities.iter().zip(locals) {
                let l = l?;
                energy += l.energy;
                for (a, &i) in e.free.iter().enumerate() {
                    if i != NONE {
                        residual[i] += l.grad[a];
                    }
                }
                for (k, &p) in e.pos.iter().enumerate() {
                    if p != NONE {
                        values[p] += l.hess[k];
                    }
                }
            }
        }
        let jacobian = SparseMatrix { n: nf, row_ptr: self.pattern_rows.clone(), col_idx: self.pattern_cols.clone(), values }.drop_zeros();
        Ok(Assembled { energy, residual, jacobian })
    }

    /// Multiplier and constraint values at every constraint quadrature point.
    pub fn recover_multiplier(&self, u: &[f64]) -> Vec<MultiplierSample> {
        let mut out = Vec::new();
        for (ti, t) in self.terms.iter().enumerate() {
            if t.integrand.kind().is_none() {
                continue;
            }
            for e in &t.entities {
                let mut z = vec![0.0; t.jet_len];
                for p in 0..e.points.len() {
                    t.jet_values(e, u, p, &mut z);
                    let jet = Jet { shapes: &t.shapes, data: &z };
                    let ctx = e.context(p);
                    if let Some((beta, value)) = t.integrand.constraint_values(&jet, &ctx) {
                        out.push(MultiplierSample { term: ti, cell: e.cell, x: e.points[p], weight: e.weights[p], beta, value });
                    }
                }
            }
        }
        out
    }

    /// Kind of the constraint term that produced a multiplier sample.
    pub fn term_kind(&self, term: usize) -> Option<ConstraintKind> {
        self.terms[term].integrand.kind()
    }
}

struct Local {
    energy: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Entity {
    fn context(&self, p: usize) -> PointContext {
        PointContext { x: self.points[p], normal: self.normal, h: self.h, cell: self.cell }
    }
}

impl CompiledTerm {
    fn jet_values(&self, e: &Entity, u: &[f64], p: usize, z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        for &(jidx, s, c, k) in &self.active {
            let t = &e.tables[s];
            let nc = self.shapes[s].ncomp;
            let start = e.starts[s];
            let mut v = 0.0;
            for i in 0..t.n_basis {
                v += u[e.dofs[start + i * nc + c]] * t.get(p, i, k);
            }
            z[jidx] = v;
        }
    }

    fn entity_energy(&self, e: &Entity, u: &[f64]) -> Result<f64> {
        let mut z = vec![0.0; self.jet_len];
        let mut total = 0.0;
        for p in 0..e.points.len() {
            self.jet_values(e, u, p, &mut z);
            let jet = Jet { shapes: &self.shapes, data: &z };
            let v = self.integrand.energy(&jet, &e.context(p))?;
            if !v.is_finite() {
                return Err(Error::NonfiniteEnergy { cell: e.cell });
            }
            total += e.weights[p] * v;
        }
        Ok(total)
    }

    fn entity_local(&self, e: &Entity, u: &[f64]) -> Result<Local> {
        let nl = e.dofs.len();
        let m = self.active.len();
        let mut grad = vec![0.0; nl];
        let mut hess = vec![0.0; nl * nl];
        let mut energy = 0.0;
        let mut z = vec![0.0; self.jet_len];
        let buf = RefCell::new(vec![HyperDual::default(); self.jet_len]);
        let failure: Cell<Option<Error>> = Cell::new(None);
        // b[a][j] = ∂(jet component a)/∂(local dof j)
        let mut b = vec![0.0; m * nl];
        let mut hb = vec![0.0; m * nl];
        for p in 0..e.points.len() {
            self.jet_values(e, u, p, &mut z);
            let ctx = e.context(p);
            let x: Vec<f64> = self.active.iter().map(|a| z[a.0]).collect();
            let f = |args: &[HyperDual]| {
                let mut full = buf.borrow_mut();
                for (k, v) in full.iter_mut().enumerate() {
                    *v = HyperDual::constant(z[k]);
                }
                for (a, arg) in self.active.iter().zip(args) {
                    full[a.0] = *arg;
                }
                let jet = Jet { shapes: &self.shapes, data: &full[..] };
                match self.integrand.energy_hd(&jet, &ctx) {
                    Ok(v) => v,
                    Err(err) => {
                        failure.set(Some(err));
                        HyperDual::constant(f64::NAN)
                    }
                }
            };
            let (val, g, h) = match eval_grad_hess(f, &x) {
                Ok(r) => r,
                Err(_) => return Err(failure.take().unwrap_or(Error::NonfiniteEnergy { cell: e.cell })),
            };
            let w = e.weights[p];
            energy += w * val;
            b.iter_mut().for_each(|v| *v = 0.0);
            for (a, &(_, s, c, k)) in self.active.iter().enumerate() {
                let t = &e.tables[s];
                let nc = self.shapes[s].ncomp;
                for i in 0..t.n_basis {
                    b[a * nl + e.starts[s] + i * nc + c] = t.get(p, i, k);
                }
            }
            for a in 0..m {
                if g[a] != 0.0 {
                    for j in 0..nl {
                        grad[j] += w * g[a] * b[a * nl + j];
                    }
                }
            }
            hb.iter_mut().for_each(|v| *v = 0.0);
            for a in 0..m {
                for c in 0..m {
                    let hac = h[a * m + c];
                    if hac != 0.0 {
                        for j in 0..nl {
                            hb[a * nl + j] += hac * b[c * nl + j];
                        }
                    }
                }
            }
            for a in 0..m {
                for i in 0..nl {
                    let bai = b[a * nl + i];
                    if bai != 0.0 {
                        let wb = w * bai;
                        for j in 0..nl {
                            hess[i * nl + j] += wb * hb[a * nl + j];
                        }
                    }
                }
            }
        }
        for i in 0..nl {
            for j in i + 1..nl {
                let s = 0.5 * (hess[i * nl + j] + hess[j * nl + i]);
                hess[i * nl + j] = s;
                hess[j * nl + i] = s;
            }
        }
        Ok(Local { energy, grad, hess })
    }
}

fn compile_term(term: &Term, fields: &[Field], offsets: &[usize], free_index: &[usize], cache: &mut TableCache) -> Result<CompiledTerm> {
    if term.slots.is_empty() {
        return Err(Error::InvalidArgument(format!("term {} has no slots", term.name)));
    }
    if term.quad_degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("term {} asks for quadrature degree {}", term.name, term.quad_degree)));
    }
    for s in &term.slots {
        if s.field >= fields.len() {
            return Err(Error::InvalidArgument(format!("term {} refers to missing field {}", term.name, s.field)));
        }
    }
    let shapes =
        SlotShape::sequence(&term.slots.iter().map(|s| (fields[s.field].ncomp, fields[s.field].mesh.dim(), s.order)).collect::<Vec<_>>());
    let jet_len: usize = shapes.iter().map(|s| s.len()).sum();
    let slot_mesh = |s: usize| &fields[term.slots[s].field].mesh;

    // (geometry mesh, cell, facet) for side A, per-slot (cell) and B-side data.
    struct Placement {
        a_cell: usize,
        a_facet: Option<usize>,
        b: Option<(usize, Option<usize>)>,
    }
    let (a_mesh, b_mesh, sides, axis, placements): (Arc<Mesh>, Option<Arc<Mesh>>, Vec<Side>, usize, Vec<Placement>) = match &term.zone {
        Zone::Cells | Zone::Boundary(_) => {
            let m0 = slot_mesh(0).clone();
            for s in 1..term.slots.len() {
                let m = slot_mesh(s);
                if !Arc::ptr_eq(m, &m0) && (m.n_cells() != m0.n_cells() || m.kind() != m0.kind()) {
                    return Err(Error::InvalidArgument(format!("term {} mixes fields on different meshes", term.name)));
                }
            }
            let placements = match &term.zone {
                Zone::Cells => (0..m0.n_cells()).map(|c| Placement { a_cell: c, a_facet: None, b: None }).collect(),
                Zone::Boundary(list) => list.iter().map(|&(c, lf)| Placement { a_cell: c, a_facet: Some(lf), b: None }).collect(),
                Zone::Interface { .. } => unreachable!(),
            };
            (m0, None, vec![Side::A; term.slots.len()], 2, placements)
        }
        Zone::Interface { pairing, sides } => {
            if sides.len() != term.slots.len() {
                return Err(Error::InvalidArgument(format!("term {}: one side per slot required", term.name)));
            }
            let first = |side: Side| {
                sides
                    .iter()
                    .position(|&s| s == side)
                    .ok_or_else(|| Error::InvalidArgument(format!("term {} has no slot on side {side:?}", term.name)))
            };
            let a = slot_mesh(first(Side::A)?).clone();
            let b = slot_mesh(first(Side::B)?).clone();
            let placements = pairing
                .pairs
                .iter()
                .map(|(ea, eb)| Placement { a_cell: ea.cell, a_facet: ea.facet, b: Some((eb.cell, eb.facet)) })
                .collect();
            (a, Some(b), sides.clone(), pairing.axis, placements)
        }
    };

    let mut entities = Vec::with_capacity(placements.len());
    for pl in &placements {
        let pa = entity_param(&a_mesh, pl.a_cell, pl.a_facet)?;
        let rule = rule_for(pa.shape, term.quad_degree)?;
        let xi_a: Vec<Point> = rule.points.iter().map(|t| pa.xi(t)).collect();
        let map_a = a_mesh.cell_map(pl.a_cell)?;
        let points: Vec<Point> = xi_a.iter().map(|xi| map_a.apply(xi)).collect();
        let weights: Vec<f64> = rule.weights.iter().map(|w| w * pa.scale).collect();
        let mut normal = match pl.a_facet {
            Some(lf) => facet_normal(&a_mesh, pl.a_cell, lf)?,
            None => [0.0; 3],
        };
        let mut h = a_mesh.h_per_cell()[pl.a_cell];
        let mut xi_b = Vec::new();
        if let (Some((bc, bf)), Some(bm)) = (pl.b, &b_mesh) {
            let pb = entity_param(bm, bc, bf)?;
            for x in &points {
                xi_b.push(pb.xi(&pb.solve(bm, bc, x, axis)?));
            }
            if let (None, Some(lf)) = (pl.a_facet, bf) {
                normal = facet_normal(bm, bc, lf)?;
            }
            h = h.max(bm.h_per_cell()[bc]);
        }
        let mut tables = Vec::with_capacity(term.slots.len());
        let mut dofs = Vec::new();
        let mut starts = Vec::with_capacity(term.slots.len());
        for (s, slot) in term.slots.iter().enumerate() {
            let field = &fields[slot.field];
            let (cell, pts) = match sides[s] {
                Side::A => (pl.a_cell, &xi_a),
                Side::B => (pl.b.expect("interface placement").0, &xi_b),
            };
            let elem = field.element();
            let tr = CellTransform::new(elem, &field.mesh, cell)?;
            tables.push(cache.get(elem, &tr, pts, slot.order)?);
            starts.push(dofs.len());
            for &g in field.dofmap.cell_dofs(cell) {
                for c in 0..field.ncomp {
                    dofs.push(offsets[slot.field] + g * field.ncomp + c);
                }
            }
        }
        let free = dofs.iter().map(|&g| free_index[g]).collect();
        let cell = pl.a_cell;
        entities.push(Entity { cell, points, weights, normal, h, tables, dofs, free, pos: Vec::new(), starts });
    }

    let mut active = Vec::new();
    for (s, shape) in shapes.iter().enumerate() {
        let nonzero: Vec<bool> = (0..shape.layout.len())
            .map(|k| {
                entities.iter().any(|e| {
                    let t = &e.tables[s];
                    (0..t.n_points).any(|p| (0..t.n_basis).any(|i| t.get(p, i, k) != 0.0))
                })
            })
            .collect();
        for c in 0..shape.ncomp {
            for (k, &nz) in nonzero.iter().enumerate() {
                if nz {
                    active.push((shape.offset + c * shape.layout.len() + k, s, c, k));
                }
            }
        }
    }
    Ok(CompiledTerm { name: term.name.clone(), integrand: term.integrand.clone(), shapes, active, jet_len, entities })
}

/// Boundary facets of `mesh` accepted by `select`, as `(cell, local_facet)`.
pub fn boundary_zone(mesh: &Mesh, select: impl Fn(&BoundaryFacet) -> bool) -> Vec<(usize, usize)> {
    mesh.boundary_facets().iter().filter(|f| select(f)).map(|f| (f.cell, f.local_facet)).collect()
}

/// Coarse-to-fine transfer of one field by DOF-wise evaluation of the coarse
/// function on the parent cells; values from several fine cells sharing a
/// DOF are averaged, which matters only for nonconforming families.
pub fn prolong_field(coarse: &Field, fine: &Field, uc: &[f64]) -> Result<Vec<f64>> {
    let cm = &coarse.mesh;
    let fm = &fine.mesh;
    let parent = fm.parent().ok_or_else(|| Error::InvalidArgument("fine mesh carries no parent links".into()))?;
    let factor = 1usize << cm.dim();
    if coarse.family() != fine.family()
        || coarse.ncomp != fine.ncomp
        || cm.kind() != fm.kind()
        || fm.n_cells() != cm.n_cells() * factor
        || parent.iter().any(|&p| p >= cm.n_cells())
    {
        return Err(Error::InvalidArgument("meshes are not a coarse/fine refinement pair".into()));
    }
    let elem = coarse.element();
    let nc = coarse.ncomp;
    let n = fine.dofmap.n_global();
    let mut sum = vec![0.0; n * nc];
    let mut count = vec![0usize; n];
    let mut transforms: HashMap<usize, CellTransform> = HashMap::new();
    for fc in 0..fm.n_cells() {
        let pc = parent[fc];
        if let std::collections::hash_map::Entry::Vacant(v) = transforms.entry(pc) {
            v.insert(CellTransform::new(elem, cm, pc)?);
        }
        let tr = &transforms[&pc];
        let cdofs = coarse.dofmap.cell_dofs(pc);
        for &g in fine.dofmap.cell_dofs(fc) {
            let info = fine.dofmap.info()[g];
            let xi = tr.map.to_reference(&info.point);
            let tab = tr.physical(elem, &elem.tabulate(&[xi], 2)?)?;
            for comp in 0..nc {
                let coeffs: Vec<f64> = cdofs.iter().map(|&d| uc[d * nc + comp]).collect();
                let v = match info.kind {
                    DofKind::Value => tab.eval(0, &coeffs, [0, 0, 0]),
                    DofKind::NormalDerivative => {
                        info.normal[0] * tab.eval(0, &coeffs, [1, 0, 0]) + info.normal[1] * tab.eval(0, &coeffs, [0, 1, 0])
                    }
                    DofKind::PartialDerivative(a) => {
                        let mut alpha = [0u8; 3];
                        alpha[a] = 1;
                        tab.eval(0, &coeffs, alpha)
                    }
                    DofKind::MixedDerivative => tab.eval(0, &coeffs, [1, 1, 0]),
                };
                sum[g * nc + comp] += v;
            }
            count[g] += 1;
        }
    }
    Ok((0..n * nc).map(|k| sum[k] / count[k / nc] as f64).collect())
}

/// Prolongs a full state of `coarse` to the fields of `fine`.
pub fn prolong(coarse: &Problem, fine: &Problem, uc: &[f64]) -> Result<Vec<f64>> {
    if coarse.fields.len() != fine.fields.len() {
        return Err(Error::InvalidArgument("problems have different field sets".into()));
    }
    let mut out = Vec::with_capacity(fine.n_dofs);
    for f in 0..coarse.fields.len() {
        out.extend(prolong_field(&coarse.fields[f], &fine.fields[f], coarse.field_values(uc, f))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// Gradient seminorm.
    H1,
    /// Cell-wise Hessian seminorm.
    BrokenH2,
}

impl NormKind {
    fn order(self) -> usize {
        match self {
            NormKind::L2 => 0,
            NormKind::H1 => 1,
            NormKind::BrokenH2 => 2,
        }
    }
}

/// `√(Σ_K ∫_K |D(u − exact)|²)` over one field, `exact` optional.
pub fn field_error(field: &Field, u: &[f64], exact: Option<&dyn Fn(&Point) -> PointJet>, kind: NormKind) -> Result<f64> {
    let mesh = &field.mesh;
    let elem = field.element();
    let degree = (2 * elem.degree() + 2).min(MAX_DEGREE);
    let rule = rule_for(RefShape::from(mesh.kind()), degree)?;
    let order = kind.order();
    let dim = mesh.dim();
    let nc = field.ncomp;
    let mut cache = TableCache::default();
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let tr = CellTransform::new(elem, mesh, c)?;
        let tab = cache.get(elem, &tr, &rule.points, order)?;
        let det = tr.map.det().abs();
        let dofs = field.dofmap.cell_dofs(c);
        for (p, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = tr.map.apply(xi);
            let ex = exact.map(|f| f(&x));
            let mut s = 0.0;
            for comp in 0..nc {
                let coeffs: Vec<f64> = dofs.iter().map(|&g| u[g * nc + comp]).collect();
                match kind {
                    NormKind::L2 => {
                        let d = tab.eval(p, &coeffs, [0, 0, 0]) - ex.map_or(0.0, |e| e.value);
                        s += d * d;
                    }
                    NormKind::H1 => {
                        for a in 0..dim {
                            let d = tab.eval(p, &coeffs, crate::elements::DerivLayout::alpha_of(&[a])) - ex.map_or(0.0, |e| e.grad[a]);
                            s += d * d;
                        }
                    }
                    NormKind::BrokenH2 => {
                        for a in 0..dim {
                            for b in 0..dim {
                                let d = tab.eval(p, &coeffs, crate::elements::DerivLayout::alpha_of(&[a, b]))
                                    - ex.map_or(0.0, |e| e.hess[a][b]);
                                s += d * d;
                            }
                        }
                    }
                }
            }
            total += w * det * s;
        }
    }
    Ok(total.sqrt())
}

/// `‖u_f − u_c‖` for a field on a fine mesh and the same field on its
/// parent mesh, with `u_c` evaluated on the parent cell of every fine
/// quadrature point. Exact for nonconforming families, whose coarse space
/// is not contained in the fine one.
pub fn nested_field_diff(coarse: &Field, uc: &[f64], fine: &Field, uf: &[f64], kind: NormKind) -> Result<f64> {
    let (cm, fm) = (&coarse.mesh, &fine.mesh);
    let parent = fm.parent().ok_or_else(|| Error::InvalidArgument("fine mesh carries no parent links".into()))?;
    if coarse.family() != fine.family() || coarse.ncomp != fine.ncomp || parent.iter().any(|&p| p >= cm.n_cells()) {
        return Err(Error::InvalidArgument("fields are not a coarse/fine refinement pair".into()));
    }
    let elem = fine.element();
    let rule = rule_for(RefShape::from(fm.kind()), (2 * elem.degree() + 2).min(MAX_DEGREE))?;
    let order = kind.order();
    let dim = fm.dim();
    let nc = fine.ncomp;
    let alphas: Vec<[u8; 3]> = match kind {
        NormKind::L2 => vec![[0, 0, 0]],
        NormKind::H1 => (0..dim).map(|a| crate::elements::DerivLayout::alpha_of(&[a])).collect(),
        NormKind::BrokenH2 => (0..dim).flat_map(|a| (0..dim).map(move |b| crate::elements::DerivLayout::alpha_of(&[a, b]))).collect(),
    };
    let mut cache = TableCache::default();
    let mut total = 0.0;
    for c in 0..fm.n_cells() {
        let tf = CellTransform::new(elem, fm, c)?;
        let tab_f = cache.get(elem, &tf, &rule.points, order)?;
        let pc = parent[c];
        let tc = CellTransform::new(elem, cm, pc)?;
        let xi_c: Vec<Point> = rule.points.iter().map(|xi| tc.map.to_reference(&tf.map.apply(xi))).collect();
        let tab_c = tc.physical(elem, &elem.tabulate(&xi_c, order)?)?;
        let det = tf.map.det().abs();
        let (df, dc) = (fine.dofmap.cell_dofs(c), coarse.dofmap.cell_dofs(pc));
        for comp in 0..nc {
            let cf: Vec<f64> = df.iter().map(|&g| uf[g * nc + comp]).collect();
            let cc: Vec<f64> = dc.iter().map(|&g| uc[g * nc + comp]).collect();
            for (p, w) in rule.weights.iter().enumerate() {
                let s: f64 = alphas.iter().map(|&a| (tab_f.eval(p, &cf, a) - tab_c.eval(p, &cc, a)).powi(2)).sum();
                total += w * det * s;
            }
        }
    }
    Ok(total.sqrt())
}

/// [`nested_field_diff`] over all fields of two problems built on a
/// coarse/fine mesh pair.
pub fn nested_diff(coarse: &Problem, uc: &[f64], fine: &Problem, uf: &[f64], kind: NormKind) -> Result<f64> {
    if coarse.fields.len() != fine.fields.len() {
        return Err(Error::InvalidArgument("problems have different field sets".into()));
    }
    let mut total = 0.0;
    for f in 0..fine.fields.len() {
        let d = nested_field_diff(&coarse.fields[f], coarse.field_values(uc, f), &fine.fields[f], fine.field_values(uf, f), kind)?;
        total += d * d;
    }
    Ok(total.sqrt())
}

/// Norm of the difference of two states of the same problem, summing the
/// squared contributions of all fields.
pub fn energy_norm_diff(problem: &Problem, a: &[f64], b: &[f64], kind: NormKind) -> Result<f64> {
    let mut total = 0.0;
    for (f, field) in problem.fields.iter().enumerate() {
        let d: Vec<f64> = problem.field_values(a, f).iter().zip(problem.field_values(b, f)).map(|(x, y)| x - y).collect();
        total += field_error(field, &d, None, kind)?.powi(2);
    }
    Ok(total.sqrt())
}

/// Cell kind check used by presets that need a given mesh type.
pub fn require_kind(mesh: &Mesh, kind: CellKind) -> Result<()> {
    if mesh.kind() == kind {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("expected a {kind:?} mesh, got {:?}", mesh.kind())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;
    use crate::forms::{poisson_density, Density, Volume};
    use crate::mesh::{refine_uniform, unit_square_quad, unit_square_tri};

    struct Laplace;
    impl Density for Laplace {
        fn eval<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
            poisson_density(&[jet.grad(0, 0, 0), jet.grad(0, 0, 1)], 1.0, 0.0, jet.value(0, 0))
        }
    }

    fn laplace_problem(mesh: Mesh, family: Family) -> Problem {
        let field = Field::new("u", Arc::new(mesh), family, 1).unwrap();
        let term = Term {
            name: "energy".into(),
            zone: Zone::Cells,
            slots: vec![Slot { field: 0, order: 1 }],
            integrand: Arc::new(Volume(Laplace)),
            quad_degree: 2 * family.degree(),
        };
        Problem::new(vec![field], vec![term]).unwrap()
    }

    #[test]
    fn sparse_from_triplets() {
        let m = SparseMatrix::from_triplets(3, &[(0, 0, 1.0), (2, 1, 3.0), (0, 0, 2.0), (1, 1, 0.0), (2, 1, -3.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(2, 1), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 0.0, 0.0]);
        assert_eq!(SparseMatrix::identity(2).matvec(&[4.0, 5.0]), vec![4.0, 5.0]);
    }

    /// Single reference triangle: stiffness by the cotangent formula.
    #[test]
    fn reference_triangle_stiffness() {
        let mesh = Mesh::new(CellKind::Triangle, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![0, 1, 2]).unwrap();
        let p = laplace_problem(mesh, Family::P1);
        let a = p.assemble(&p.zero_state()).unwrap();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.jacobian.get(i, j) - want[i][j]).abs() < 1e-14, "({i},{j})");
            }
        }
        assert_eq!(a.energy, 0.0);
        assert!(a.residual.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn energy_of_linear_function() {
        let p = laplace_problem(unit_square_tri(3).unwrap(), Family::P1);
        let u: Vec<f64> = p.fields()[0].dofmap.info().iter().map(|d| d.point[0]).collect();
        assert!((p.energy(&u).unwrap() - 0.5).abs() < 1e-14);
        let a = p.assemble(&u).unwrap();
        // Residual equals K u and the energy is ½ uᵀ K u.
        let ku = a.jacobian.matvec(&u);
        for (r, k) in a.residual.iter().zip(&ku) {
            assert!((r - k).abs() < 1e-13);
        }
        assert_eq!(a.jacobian.asymmetry(), 0.0);
    }

    #[test]
    fn norm_examples() {
        let f = Field::new("u", Arc::new(unit_square_quad(4).unwrap()), Family::Bfs, 1).unwrap();
        let x = f.dofmap.interpolate(|p| PointJet { value: p[0], grad: [1.0, 0.0, 0.0], ..Default::default() });
        assert!((field_error(&f, &x, None, NormKind::H1).unwrap() - 1.0).abs() < 1e-13);
        let x2 = f.dofmap.interpolate(|p| PointJet {
            value: p[0] * p[0],
            grad: [2.0 * p[0], 0.0, 0.0],
            hess: [[2.0, 0.0, 0.0], [0.0; 3], [0.0; 3]],
        });
        assert!((field_error(&f, &x2, None, NormKind::BrokenH2).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(field_error(&f, &x2, None, NormKind::L2).unwrap(), field_error(&f, &x2, None, NormKind::L2).unwrap());
        let zero = vec![0.0; x.len()];
        assert_eq!(field_error(&f, &zero, None, NormKind::H1).unwrap(), 0.0);
    }

    #[test]
    fn prolong_reproduces_nested_functions() {
        let coarse = Arc::new(unit_square_quad(2).unwrap());
        let fine = Arc::new(refine_uniform(&coarse));
        let fc = Field::new("u", coarse, Family::Bfs, 1).unwrap();
        let ff = Field::new("u", fine, Family::Bfs, 1).unwrap();
        // Random coarse state: its bicubic pieces are reproduced exactly.
        let uc: Vec<f64> = (0..fc.n_dofs()).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let uf = prolong_field(&fc, &ff, &uc).unwrap();
        let fine_mesh = ff.mesh.clone();
        let pts = [[0.3, 0.7, 0.0], [0.55, 0.12, 0.0]];
        let elem = fc.element();
        for c in 0..fine_mesh.n_cells() {
            let trf = CellTransform::new(elem, &fine_mesh, c).unwrap();
            let pc = fine_mesh.parent().unwrap()[c];
            let trc = CellTransform::new(elem, &fc.mesh, pc).unwrap();
            let tf = trf.physical(elem, &elem.tabulate(&pts, 2).unwrap()).unwrap();
            let xs: Vec<Point> = pts.iter().map(|xi| trc.map.to_reference(&trf.map.apply(xi))).collect();
            let tc = trc.physical(elem, &elem.tabulate(&xs, 2).unwrap()).unwrap();
            let cf: Vec<f64> = ff.dofmap.cell_dofs(c).iter().map(|&g| uf[g]).collect();
            let cc: Vec<f64> = fc.dofmap.cell_dofs(pc).iter().map(|&g| uc[g]).collect();
            for p in 0..2 {
                for alpha in [[0, 0, 0], [1, 0, 0], [0, 2, 0], [1, 1, 0]] {
                    assert!((tf.eval(p, &cf, alpha) - tc.eval(p, &cc, alpha)).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn prolong_constant_and_lineage() {
        let coarse = Arc::new(unit_square_tri(2).unwrap());
        let fine = Arc::new(refine_uniform(&coarse));
        for fam in [Family::P1, Family::P2, Family::Morley] {
            let fc = Field::new("u", coarse.clone(), fam, 1).unwrap();
            let ff = Field::new("u", fine.clone(), fam, 1).unwrap();
            let uc = fc.dofmap.interpolate(|_| PointJet { value: 2.5, ..Default::default() });
            let uf = prolong_field(&fc, &ff, &uc).unwrap();
            let want = ff.dofmap.interpolate(|_| PointJet { value: 2.5, ..Default::default() });
            for (a, b) in uf.iter().zip(&want) {
                assert!((a - b).abs() < 1e-13);
            }
        }
        let other = Field::new("u", Arc::new(unit_square_tri(4).unwrap()), Family::P1, 1).unwrap();
        let fc = Field::new("u", coarse, Family::P1, 1).unwrap();
        assert!(prolong_field(&fc, &other, &vec![0.0; fc.n_dofs()]).is_err());
    }

    #[test]
    fn strong_constraints_reduce_system() {
        let mesh = Arc::new(unit_square_tri(2).unwrap());
        let mut field = Field::new("u", mesh, Family::P1, 1).unwrap();
        field.fix_boundary(|_| true, &[0]);
        let term = Term {
            name: "energy".into(),
            zone: Zone::Cells,
            slots: vec![Slot { field: 0, order: 1 }],
            integrand: Arc::new(Volume(Laplace)),
            quad_degree: 2,
        };
        let p = Problem::new(vec![field], vec![term]).unwrap();
        assert_eq!(p.n_free(), 1);
        let a = p.assemble(&p.zero_state()).unwrap();
        assert!((a.jacobian.get(0, 0) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn assembly_is_deterministic() {
        let p = laplace_problem(unit_square_tri(8).unwrap(), Family::P2);
        let u: Vec<f64> = (0..p.n_dofs()).map(|k| (k as f64 * 0.37).sin()).collect();
        let a = p.assemble(&u).unwrap();
        let b = p.assemble(&u).unwrap();
        assert_eq!(a.jacobian, b.jacobian);
        assert_eq!(a.residual, b.residual);
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
    }
}
