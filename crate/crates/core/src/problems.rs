//! Problem presets: meshes, fields, energies and constraint terms for each
//! model problem, with their default parameter values.
//!
//! A [`Preset`] is an editable description (name, parameters, discrete
//! options). [`Preset::build`] turns it into a [`Setup`] on given meshes;
//! convergence studies build the coarsest meshes with [`Preset::meshes`] and
//! obtain the finer ones by uniform refinement so that solutions can be
//! prolonged between levels.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::assembly::{boundary_zone, Field, NormKind, Problem, Side, Slot, Term, Zone};
use crate::autodiff::Scalar;
use crate::elements::{DofKind, Family};
use crate::error::{Error, Result};
use crate::forms::{
    elasticity_density, kirchhoff_shear, plate_density, poisson_density, stress, Constraint, ConstraintKind, ConstraintTriple, Density,
    Jet, PointContext, Volume,
};
use crate::mesh::{pair_interface, refine_uniform, unit_cube_hex, unit_square_quad, unit_square_tri, InterfaceZone, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetKind {
    DirichletPoisson,
    Signorini,
    Obstacle,
    TwoMembrane,
    MembraneSolid,
    TwoPlate,
    PlateCorners,
    TwoBodyElastic,
}

impl PresetKind {
    pub const ALL: [PresetKind; 8] = [
        PresetKind::DirichletPoisson,
        PresetKind::Signorini,
        PresetKind::Obstacle,
        PresetKind::TwoMembrane,
        PresetKind::MembraneSolid,
        PresetKind::TwoPlate,
        PresetKind::PlateCorners,
        PresetKind::TwoBodyElastic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetKind::DirichletPoisson => "dirichlet_poisson",
            PresetKind::Signorini => "signorini",
            PresetKind::Obstacle => "obstacle",
            PresetKind::TwoMembrane => "two_membrane",
            PresetKind::MembraneSolid => "membrane_solid",
            PresetKind::TwoPlate => "two_plate",
            PresetKind::PlateCorners => "plate_corners",
            PresetKind::TwoBodyElastic => "two_body_elastic",
        }
    }

    /// Numeric parameters and their defaults.
    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            PresetKind::DirichletPoisson => &[("kappa", 1.0), ("f", 0.0), ("g", 0.0), ("alpha", 0.1), ("gamma_power", 1.0)],
            PresetKind::Signorini => &[("kappa", 1.0), ("f", -1.0), ("g", 0.0), ("alpha", 0.1), ("gamma_power", 1.0), ("clamp_top", 0.0)],
            PresetKind::Obstacle => &[("kappa", 1.0), ("f", -1.0), ("g", -0.01), ("alpha", 1e-2), ("gamma_power", 2.0)],
            PresetKind::TwoMembrane => {
                &[("kappa1", 1.0), ("kappa2", 1.0), ("f1", 1.0), ("f2", 0.0), ("g", 0.05), ("alpha", 1e-2), ("gamma_power", 2.0)]
            }
            PresetKind::MembraneSolid => &[("mu", 1.0), ("lambda", 1.0), ("f", 2.0), ("g", 0.1), ("alpha", 1e-2), ("gamma_power", 1.0)],
            PresetKind::TwoPlate => &[("f1", 100.0), ("f2", 0.0), ("g", 0.05), ("alpha", 1e-2), ("gamma_power", 4.0)],
            PresetKind::PlateCorners => &[("f", -1.0), ("alpha", 0.25), ("gamma_power", 3.0)],
            PresetKind::TwoBodyElastic => &[("mu", 1.0), ("lambda", 1.0), ("f", -1.0), ("alpha", 1e-2), ("gamma_power", 1.0)],
        }
    }

    pub fn default_family(self) -> Family {
        match self {
            PresetKind::DirichletPoisson | PresetKind::Signorini | PresetKind::Obstacle | PresetKind::TwoMembrane => Family::P1,
            PresetKind::MembraneSolid | PresetKind::TwoBodyElastic => Family::Q1,
            PresetKind::TwoPlate => Family::Morley,
            PresetKind::PlateCorners => Family::Bfs,
        }
    }

    pub fn allowed_families(self) -> &'static [Family] {
        match self {
            PresetKind::DirichletPoisson | PresetKind::Signorini | PresetKind::Obstacle | PresetKind::TwoMembrane => {
                &[Family::P1, Family::P2]
            }
            PresetKind::MembraneSolid | PresetKind::TwoBodyElastic => &[Family::Q1],
            PresetKind::TwoPlate => &[Family::Morley],
            PresetKind::PlateCorners => &[Family::Bfs],
        }
    }

    /// Whether the constraint of this preset is an inequality.
    pub fn is_inequality(self) -> bool {
        self != PresetKind::DirichletPoisson
    }

    pub fn default_norm(self) -> NormKind {
        match self {
            PresetKind::TwoPlate | PresetKind::PlateCorners => NormKind::BrokenH2,
            _ => NormKind::H1,
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<PresetKind> {
        PresetKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::InvalidArgument(format!("unknown preset '{s}'")))
    }
}

/// Weak enforcement used for the constraint term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Nitsche,
    Penalty,
}

/// Volume load of the scalar Poisson presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Load {
    Constant,
    /// `f = 2π²κ sin(πx) sin(πy)`, whose solution with `g = 0` is
    /// `sin(πx) sin(πy)`.
    Sine,
}

/// Outer support of the upper body in the two-body preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Horizontal displacement fixed on the top edge.
    Roller,
    /// Both displacement components fixed on the top edge.
    Clamped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub kind: PresetKind,
    values: BTreeMap<&'static str, f64>,
    pub family: Family,
    pub method: Method,
    pub load: Load,
    pub support: Support,
}

/// A built problem ready to be solved.
#[derive(Clone)]
pub struct Setup {
    pub name: String,
    pub problem: Problem,
    pub initial: Vec<f64>,
    pub norm: NormKind,
    pub meshes: Vec<Arc<Mesh>>,
}

impl Preset {
    pub fn new(kind: PresetKind) -> Preset {
        Preset {
            kind,
            values: kind.defaults().iter().copied().collect(),
            family: kind.default_family(),
            method: Method::Nitsche,
            load: Load::Constant,
            support: Support::Roller,
        }
    }

    pub fn by_name(name: &str) -> Result<Preset> {
        Ok(Preset::new(name.parse()?))
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Names of the numeric parameters.
    pub fn parameter_names(&self) -> Vec<&'static str> {
        self.values.keys().copied().collect()
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.values.get(key).copied().ok_or_else(|| Error::InvalidParameter(format!("preset {} has no parameter '{key}'", self.name())))
    }

    /// Sets a numeric parameter or one of the options `family`, `method`,
    /// `load`, `support` from text.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidParameter(format!("invalid {what} '{value}' for preset {}", self.kind));
        match key {
            "family" => {
                let fam = match value.to_ascii_lowercase().as_str() {
                    "p1" => Family::P1,
                    "p2" => Family::P2,
                    "q1" => Family::Q1,
                    "morley" => Family::Morley,
                    "bfs" => Family::Bfs,
                    _ => return Err(bad("family")),
                };
                if !self.kind.allowed_families().contains(&fam) {
                    return Err(bad("family"));
                }
                self.family = fam;
            }
            "method" | "kind" => {
                self.method = match value {
                    "nitsche" | "equality" | "inequality" => Method::Nitsche,
                    "penalty" => Method::Penalty,
                    _ => return Err(bad("method")),
                }
            }
            "load" => {
                if self.kind != PresetKind::DirichletPoisson {
                    return Err(bad("load"));
                }
                self.load = match value {
                    "constant" => Load::Constant,
                    "sine" => Load::Sine,
                    _ => return Err(bad("load")),
                }
            }
            "support" => {
                if self.kind != PresetKind::TwoBodyElastic {
                    return Err(bad("support"));
                }
                self.support = match value {
                    "roller" => Support::Roller,
                    "clamped" => Support::Clamped,
                    _ => return Err(bad("support")),
                }
            }
            _ => {
                let v: f64 = value.trim().parse().map_err(|_| bad(key))?;
                self.set_value(key, v)?;
            }
        }
        Ok(())
    }

    pub fn set_value(&mut self, key: &str, v: f64) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("parameter {key} must be finite")));
                }
                *slot = v;
                Ok(())
            }
            None => Err(Error::InvalidParameter(format!(
                "preset {} has no parameter '{key}' (known: {})",
                self.name(),
                self.parameter_names().join(", ")
            ))),
        }
    }

    /// Builder-style [`Preset::set_value`].
    pub fn with(mut self, key: &str, v: f64) -> Result<Preset> {
        self.set_value(key, v)?;
        Ok(self)
    }

    fn v(&self, key: &str) -> f64 {
        self.values[key]
    }

    fn constraint_kind(&self) -> ConstraintKind {
        match (self.method, self.kind.is_inequality()) {
            (Method::Nitsche, true) => ConstraintKind::Inequality,
            (Method::Nitsche, false) => ConstraintKind::Equality,
            (Method::Penalty, one_sided) => ConstraintKind::Penalty { one_sided },
        }
    }

    fn scaling(&self) -> Result<Scaling> {
        let alpha = self.v("alpha");
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        let p = self.v("gamma_power");
        if p.fract() != 0.0 || !(0.0..=8.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("gamma_power must be an integer in 0..=8, got {p}")));
        }
        Ok(Scaling { alpha, power: p as i32 })
    }

    /// Meshes of the preset at resolution `n` (cells per unit length).
    pub fn meshes(&self, n: usize) -> Result<Vec<Arc<Mesh>>> {
        let tri = || unit_square_tri(n).map(Arc::new);
        Ok(match self.kind {
            PresetKind::DirichletPoisson
            | PresetKind::Signorini
            | PresetKind::Obstacle
            | PresetKind::TwoMembrane
            | PresetKind::TwoPlate => {
                vec![tri()?]
            }
            PresetKind::PlateCorners => vec![Arc::new(unit_square_quad(n)?)],
            PresetKind::MembraneSolid => vec![Arc::new(unit_square_quad(n)?), Arc::new(unit_cube_hex(n, self.v("g"))?)],
            PresetKind::TwoBodyElastic => {
                let lower = unit_square_quad(n)?;
                let upper = lower.translated([0.0, 1.0, 0.0]);
                vec![Arc::new(lower), Arc::new(upper)]
            }
        })
    }

    /// Uniform refinement of every mesh.
    pub fn refine(meshes: &[Arc<Mesh>]) -> Vec<Arc<Mesh>> {
        meshes.iter().map(|m| Arc::new(refine_uniform(m))).collect()
    }

    pub fn setup(&self, n: usize) -> Result<Setup> {
        self.build(self.meshes(n)?)
    }

    pub fn build(&self, meshes: Vec<Arc<Mesh>>) -> Result<Setup> {
        let expected = if matches!(self.kind, PresetKind::MembraneSolid | PresetKind::TwoBodyElastic) { 2 } else { 1 };
        if meshes.len() != expected {
            return Err(Error::InvalidArgument(format!("preset {} needs {expected} mesh(es)", self.name())));
        }
        let sc = self.scaling()?;
        let kind = self.constraint_kind();
        let fam = self.family;
        let q = 2 * fam.degree();
        let (fields, terms, initial): (Vec<Field>, Vec<Term>, Initial) = match self.kind {
            PresetKind::DirichletPoisson => {
                let kappa = positive(self.v("kappa"), "kappa")?;
                let mesh = meshes[0].clone();
                let field = Field::new("u", mesh.clone(), fam, 1)?;
                let load = match self.load {
                    Load::Constant => PoissonLoad::Constant(self.v("f")),
                    Load::Sine => PoissonLoad::Sine,
                };
                let volume = term("energy", Zone::Cells, vec![slot(0, 1)], Volume(Poisson { kappa, load }), q + 2);
                let c = ScalarBoundary { kappa, g: self.v("g"), sc };
                let bnd = term("dirichlet", Zone::Boundary(boundary_zone(&mesh, |_| true)), vec![slot(0, 1)], triple(c, kind), q + 2);
                (vec![field], vec![volume, bnd], Initial::Zero)
            }
            PresetKind::Signorini => {
                let kappa = positive(self.v("kappa"), "kappa")?;
                let mesh = meshes[0].clone();
                let mut field = Field::new("u", mesh.clone(), fam, 1)?;
                let clamp = self.v("clamp_top") != 0.0;
                if clamp {
                    field.fix_boundary(|f| f.normal[1] > 0.5, &[0]);
                }
                let load = PoissonLoad::Constant(self.v("f"));
                let volume = term("energy", Zone::Cells, vec![slot(0, 1)], Volume(Poisson { kappa, load }), q);
                let g = self.v("g");
                let zone = boundary_zone(&mesh, |f| !clamp || f.normal[1] <= 0.5);
                let bnd = term("contact", Zone::Boundary(zone), vec![slot(0, 1)], triple(ScalarBoundary { kappa, g, sc }, kind), q + 2);
                let init = if clamp { Initial::Zero } else { Initial::Values(vec![g - INITIAL_PENETRATION]) };
                (vec![field], vec![volume, bnd], init)
            }
            PresetKind::Obstacle => {
                let kappa = positive(self.v("kappa"), "kappa")?;
                let mut field = Field::new("u", meshes[0].clone(), fam, 1)?;
                field.fix_boundary(|_| true, &[0]);
                let f = self.v("f");
                let volume = term("energy", Zone::Cells, vec![slot(0, 1)], Volume(Poisson { kappa, load: PoissonLoad::Constant(f) }), q);
                let c = Obstacle { kappa, f, g: self.v("g"), sc };
                let con = term("obstacle", Zone::Cells, vec![slot(0, 2)], triple(c, kind), q + 2);
                (vec![field], vec![volume, con], Initial::Zero)
            }
            PresetKind::TwoMembrane => {
                let k1 = positive(self.v("kappa1"), "kappa1")?;
                let k2 = positive(self.v("kappa2"), "kappa2")?;
                if k1 > k2 {
                    return Err(Error::InvalidParameter(format!(
                        "kappa1 = {k1} exceeds kappa2 = {k2}; the constrained side must be the less stiff membrane"
                    )));
                }
                let mut fields = Vec::new();
                for name in ["u1", "u2"] {
                    let mut f = Field::new(name, meshes[0].clone(), fam, 1)?;
                    f.fix_boundary(|_| true, &[0]);
                    fields.push(f);
                }
                let (f1, f2) = (self.v("f1"), self.v("f2"));
                let terms = vec![
                    term("energy1", Zone::Cells, vec![slot(0, 1)], Volume(Poisson { kappa: k1, load: PoissonLoad::Constant(f1) }), q),
                    term("energy2", Zone::Cells, vec![slot(1, 1)], Volume(Poisson { kappa: k2, load: PoissonLoad::Constant(f2) }), q),
                    term(
                        "contact",
                        Zone::Cells,
                        vec![slot(0, 2), slot(1, 0)],
                        triple(MembraneGap { kappa1: k1, f1, g: self.v("g"), sc }, kind),
                        q + 2,
                    ),
                ];
                (fields, terms, Initial::Zero)
            }
            PresetKind::TwoPlate => {
                let mut fields = Vec::new();
                for name in ["u1", "u2"] {
                    let mut f = Field::new(name, meshes[0].clone(), fam, 1)?;
                    f.fix_boundary(|_| true, &[0]);
                    fields.push(f);
                }
                let (f1, f2) = (self.v("f1"), self.v("f2"));
                let terms = vec![
                    term("energy1", Zone::Cells, vec![slot(0, 2)], Volume(Plate { f: f1 }), q),
                    term("energy2", Zone::Cells, vec![slot(1, 2)], Volume(Plate { f: f2 }), q),
                    term("contact", Zone::Cells, vec![slot(0, 4), slot(1, 0)], triple(PlateGap { f1, g: self.v("g"), sc }, kind), q + 2),
                ];
                (fields, terms, Initial::Zero)
            }
            PresetKind::PlateCorners => {
                let mesh = meshes[0].clone();
                let field = Field::new("u", mesh.clone(), fam, 1)?;
                let terms = vec![
                    term("energy", Zone::Cells, vec![slot(0, 2)], Volume(Plate { f: self.v("f") }), q),
                    term(
                        "support",
                        Zone::Boundary(boundary_zone(&mesh, |_| true)),
                        vec![slot(0, 3)],
                        triple(PlateEdge { sc }, kind),
                        q + 2,
                    ),
                ];
                (vec![field], terms, Initial::Values(vec![-INITIAL_PENETRATION]))
            }
            PresetKind::MembraneSolid => {
                let (mu, lam) = (positive(self.v("mu"), "mu")?, self.v("lambda"));
                let g = self.v("g");
                let (membrane, solid) = (meshes[0].clone(), meshes[1].clone());
                let mut m = Field::new("membrane", membrane.clone(), Family::Q1, 1)?;
                m.fix_boundary(|_| true, &[0]);
                let mut s = Field::new("solid", solid.clone(), Family::Q1Hex, 3)?;
                s.fix_boundary(|f| f.normal[2] > 0.5, &[0, 1, 2]);
                let pairing = pair_interface(
                    &membrane,
                    InterfaceZone::Cells,
                    &solid,
                    InterfaceZone::BoundaryFacets { normal: [0.0, 0.0, -1.0] },
                    2,
                    1e-9,
                )?;
                let zone = Zone::Interface { pairing, sides: vec![Side::A, Side::B] };
                let terms = vec![
                    term(
                        "membrane",
                        Zone::Cells,
                        vec![slot(0, 1)],
                        Volume(Poisson { kappa: 1.0, load: PoissonLoad::Constant(self.v("f")) }),
                        2,
                    ),
                    term("solid", Zone::Cells, vec![slot(1, 1)], Volume(Elastic { dim: 3, mu, lam, f: [0.0; 3] }), 2),
                    term("contact", zone, vec![slot(0, 0), slot(1, 1)], triple(MembraneSolidGap { mu, lam, g, sc }, kind), 4),
                ];
                (vec![m, s], terms, Initial::Zero)
            }
            PresetKind::TwoBodyElastic => {
                let (mu, lam) = (positive(self.v("mu"), "mu")?, self.v("lambda"));
                let (lower, upper) = (meshes[0].clone(), meshes[1].clone());
                let mut b1 = Field::new("body1", lower.clone(), Family::Q1, 2)?;
                b1.fix_boundary(|f| f.normal[1] < -0.5, &[0, 1]);
                let mut b2 = Field::new("body2", upper.clone(), Family::Q1, 2)?;
                let top = |f: &crate::mesh::BoundaryFacet| f.normal[1] > 0.5;
                match self.support {
                    Support::Roller => b2.fix_boundary(top, &[0]),
                    Support::Clamped => b2.fix_boundary(top, &[0, 1]),
                }
                let pairing = pair_interface(
                    &lower,
                    InterfaceZone::BoundaryFacets { normal: [0.0, 1.0, 0.0] },
                    &upper,
                    InterfaceZone::BoundaryFacets { normal: [0.0, -1.0, 0.0] },
                    1,
                    1e-9,
                )?;
                let zone = Zone::Interface { pairing, sides: vec![Side::A, Side::B] };
                let f = self.v("f");
                let terms = vec![
                    term("body1", Zone::Cells, vec![slot(0, 1)], Volume(Elastic { dim: 2, mu, lam, f: [0.0; 3] }), 2),
                    term("body2", Zone::Cells, vec![slot(1, 1)], Volume(Elastic { dim: 2, mu, lam, f: [0.0, f, 0.0] }), 2),
                    term("contact", zone, vec![slot(0, 1), slot(1, 0)], triple(ElasticGap { mu, lam, sc }, kind), 4),
                ];
                let init = match self.support {
                    Support::Roller => Initial::BodyShift { field: 1, comp: 1, value: -INITIAL_PENETRATION },
                    Support::Clamped => Initial::Zero,
                };
                (vec![b1, b2], terms, init)
            }
        };
        let problem = Problem::new(fields, terms)?;
        let initial = initial.apply(&problem);
        Ok(Setup { name: self.name().to_string(), problem, initial, norm: self.kind.default_norm(), meshes })
    }
}

/// Size of the initial violation used where a constraint has to start
/// active for the first Newton system to be nonsingular.
pub const INITIAL_PENETRATION: f64 = 1e-3;

enum Initial {
    Zero,
    /// Constant value on the value DOFs of the single field.
    Values(Vec<f64>),
    /// Constant on one component of one vector field.
    BodyShift {
        field: usize,
        comp: usize,
        value: f64,
    },
}

impl Initial {
    fn apply(&self, p: &Problem) -> Vec<f64> {
        let mut u = p.zero_state();
        match self {
            Initial::Zero => {}
            Initial::Values(v) => {
                let f = &p.fields()[0];
                for (g, d) in f.dofmap.info().iter().enumerate() {
                    if d.kind == DofKind::Value && !f.fixed[g] {
                        u[p.offsets()[0] + g] = v[0];
                    }
                }
            }
            Initial::BodyShift { field, comp, value } => {
                let f = &p.fields()[*field];
                for g in 0..f.dofmap.n_global() {
                    let k = g * f.ncomp + comp;
                    if !f.fixed[k] {
                        u[p.offsets()[*field] + k] = *value;
                    }
                }
            }
        }
        u
    }
}

fn positive(v: f64, name: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn slot(field: usize, order: usize) -> Slot {
    Slot { field, order }
}

fn term(name: &str, zone: Zone, slots: Vec<Slot>, integrand: impl crate::forms::Integrand + 'static, quad_degree: usize) -> Term {
    Term {
        name: name.to_string(),
        zone,
        slots,
        integrand: Arc::new(integrand),
        quad_degree: quad_degree.min(crate::quadrature::MAX_DEGREE),
    }
}

fn triple<C: Constraint>(constraint: C, kind: ConstraintKind) -> ConstraintTriple<C> {
    ConstraintTriple { constraint, kind }
}

/// `γ = α h^power`, divided by a material stiffness where applicable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub alpha: f64,
    pub power: i32,
}

impl Scaling {
    pub fn gamma(&self, h: f64, stiffness: f64) -> f64 {
        self.alpha * h.powi(self.power) / stiffness
    }
}

#[derive(Debug, Clone, Copy)]
enum PoissonLoad {
    Constant(f64),
    Sine,
}

struct Poisson {
    kappa: f64,
    load: PoissonLoad,
}

impl Density for Poisson {
    fn eval<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S {
        let f = match self.load {
            PoissonLoad::Constant(f) => f,
            PoissonLoad::Sine => 2.0 * PI * PI * self.kappa * (PI * ctx.x[0]).sin() * (PI * ctx.x[1]).sin(),
        };
        let dim = jet.dim(0);
        let grad: Vec<S> = (0..dim).map(|i| jet.grad(0, 0, i)).collect();
        poisson_density(&grad, self.kappa, f, jet.value(0, 0))
    }
}

struct Elastic {
    dim: usize,
    mu: f64,
    lam: f64,
    f: [f64; 3],
}

impl Density for Elastic {
    fn eval<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        let u: Vec<S> = (0..self.dim).map(|c| jet.value(0, c)).collect();
        elasticity_density(self.dim, &jet.vector_grad(0), self.mu, self.lam, &self.f[..self.dim], &u)
    }
}

struct Plate {
    f: f64,
}

impl Density for Plate {
    fn eval<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        let h = [[jet.second(0, 0, 0, 0), jet.second(0, 0, 0, 1)], [jet.second(0, 0, 1, 0), jet.second(0, 0, 1, 1)]];
        plate_density(&h, self.f, jet.value(0, 0))
    }
}

/// `β = u − g`, `λ = κ ∂u/∂n`, `γ = α h^p / κ` on boundary facets.
struct ScalarBoundary {
    kappa: f64,
    g: f64,
    sc: Scaling,
}

impl Constraint for ScalarBoundary {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        jet.value(0, 0) - S::cst(self.g)
    }

    fn lambda<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S {
        let mut dn = S::zero();
        for i in 0..jet.dim(0) {
            dn += jet.grad(0, 0, i).scale(ctx.normal[i]);
        }
        dn.scale(self.kappa)
    }

    fn gamma(&self, ctx: &PointContext) -> f64 {
        self.sc.gamma(ctx.h, self.kappa)
    }
}

/// `β = u − g`, `λ = −κ Δ_h u − f`, `γ = α h^p / κ` in every cell.
struct Obstacle {
    kappa: f64,
    f: f64,
    g: f64,
    sc: Scaling,
}

impl Constraint for Obstacle {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        jet.value(0, 0) - S::cst(self.g)
    }

    fn lambda<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        -jet.laplacian(0, 0).scale(self.kappa) - S::cst(self.f)
    }

    fn gamma(&self, ctx: &PointContext) -> f64 {
        self.sc.gamma(ctx.h, self.kappa)
    }
}

/// `β = u₂ − u₁ + g`, `λ = κ₁ Δ_h u₁ + f₁`, `γ = α h^p / κ₁`.
struct MembraneGap {
    kappa1: f64,
    f1: f64,
    g: f64,
    sc: Scaling,
}

impl Constraint for MembraneGap {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        jet.value(1, 0) - jet.value(0, 0) + S::cst(self.g)
    }

    fn lambda<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        jet.laplacian(0, 0).scale(self.kappa1) + S::cst(self.f1)
    }

    fn gamma(&self, ctx: &PointContext) -> f64 {
        self.sc.gamma(ctx.h, self.kappa1)
    }
}

/// `β = u₂ − u₁ + g`, `λ = −Δ_h² u₁ − f₁`, `γ = α h^p`.
struct PlateGap {
    f1: f64,
    g: f64,
    sc: Scaling,
}

impl Constraint for PlateGap {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        jet.value(1, 0) - jet.value(0, 0) + S::cst(self.g)
    }

    fn lambda<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        -jet.bilaplacian(0, 0) - S::cst(self.f1)
    }

    fn gamma(&self, ctx: &PointContext) -> f64 {
        self.sc.gamma(ctx.h, 1.0)
    }
}

/// `β = u`, `λ = K_h(u)` (Kirchhoff shear), `γ = α h^p` on the plate edge.
struct PlateEdge {
    sc: Scaling,
}

impl Constraint for PlateEdge {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, _: &PointContext) -> S {
        jet.value(0, 0)
    }

    fn lambda<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S {
        let n = [ctx.normal[0], ctx.normal[1]];
        let s = [-n[1], n[0]];
        kirchhoff_shear(|i, j, k| jet.third(0, 0, i, j, k), &n, &s)
    }

    fn gamma(&self, ctx: &PointContext) -> f64 {
        self.sc.gamma(ctx.h, 1.0)
    }
}

/// Membrane (slot 0) below a solid (slot 1) whose lower face has outward
/// normal `n₂ = ctx.normal`: `β = −u₂·n₂ − u₁ + g`, `λ = −σ(u₂)n₂·n₂`,
/// `γ = α h^p`.
struct MembraneSolidGap {
    mu: f64,
    lam: f64,
    g: f64,
    sc: Scaling,
}

impl Constraint for MembraneSolidGap {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S {
        let mut un = S::zero();
        for c in 0..3 {
            un -= jet.value(1, c).scale(ctx.normal[c]);
        }
        un - jet.value(0, 0) + S::cst(self.g)
    }

    fn lambda<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S {
        normal_stress(3, &jet.vector_grad(1), self.mu, self.lam, &ctx.normal).scale(-1.0)
    }

    fn gamma(&self, ctx: &PointContext) -> f64 {
        self.sc.gamma(ctx.h, 1.0)
    }
}

/// Lower body (slot 0) with upper face normal `n₁ = ctx.normal` against
/// an upper body (slot 1): `β = (u₂ − u₁)·n₁`, `λ = −σ(u₁)n₁·n₁`,
/// `γ = α h^p / μ`.
struct ElasticGap {
    mu: f64,
    lam: f64,
    sc: Scaling,
}

impl Constraint for ElasticGap {
    fn beta<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S {
        let mut b = S::zero();
        for c in 0..2 {
            b += (jet.value(1, c) - jet.value(0, c)).scale(ctx.normal[c]);
        }
        b
    }

    fn lambda<S: Scalar>(&self, jet: &Jet<S>, ctx: &PointContext) -> S {
        normal_stress(2, &jet.vector_grad(0), self.mu, self.lam, &ctx.normal).scale(-1.0)
    }

    fn gamma(&self, ctx: &PointContext) -> f64 {
        self.sc.gamma(ctx.h, self.mu)
    }
}

/// `σ(u)n·n`
fn normal_stress<S: Scalar>(dim: usize, grad: &[[S; 3]; 3], mu: f64, lam: f64, n: &[f64; 3]) -> S {
    let mut s = S::zero();
    for i in 0..dim {
        for j in 0..dim {
            if n[i] != 0.0 && n[j] != 0.0 {
                s += stress(dim, grad, mu, lam, i, j).scale(n[i] * n[j]);
            }
        }
    }
    s
}

/// Dirichlet problem for `−κΔu = f`, `u = g` on the boundary, imposed by
/// Nitsche's method (`Method::Nitsche`) or a penalty.
pub fn dirichlet_poisson(n: usize, kappa: f64, f: f64, g: f64, alpha: f64, method: Method) -> Result<Setup> {
    let mut p = Preset::new(PresetKind::DirichletPoisson).with("kappa", kappa)?.with("f", f)?.with("g", g)?.with("alpha", alpha)?;
    p.method = method;
    p.setup(n)
}

/// Scalar contact `u ≥ g` on the whole boundary.
pub fn signorini(n: usize, kappa: f64, f: f64, g: f64, alpha: f64) -> Result<Setup> {
    Preset::new(PresetKind::Signorini).with("kappa", kappa)?.with("f", f)?.with("g", g)?.with("alpha", alpha)?.setup(n)
}

/// Membrane above a flat rigid obstacle `u ≥ g`, clamped on the boundary.
pub fn obstacle(n: usize, kappa: f64, f: f64, g: f64, alpha: f64) -> Result<Setup> {
    Preset::new(PresetKind::Obstacle).with("kappa", kappa)?.with("f", f)?.with("g", g)?.with("alpha", alpha)?.setup(n)
}

/// Two stacked membranes with initial gap `g`.
#[allow(clippy::too_many_arguments)]
pub fn two_membrane(n: usize, kappa1: f64, kappa2: f64, f1: f64, f2: f64, g: f64, alpha: f64) -> Result<Setup> {
    Preset::new(PresetKind::TwoMembrane)
        .with("kappa1", kappa1)?
        .with("kappa2", kappa2)?
        .with("f1", f1)?
        .with("f2", f2)?
        .with("g", g)?
        .with("alpha", alpha)?
        .setup(n)
}

/// Membrane pushed against an elastic cube hanging `g` above it.
pub fn membrane_solid(n: usize, mu: f64, lambda: f64, f: f64, g: f64, alpha: f64) -> Result<Setup> {
    Preset::new(PresetKind::MembraneSolid)
        .with("mu", mu)?
        .with("lambda", lambda)?
        .with("f", f)?
        .with("g", g)?
        .with("alpha", alpha)?
        .setup(n)
}

/// Two stacked clamped plates with initial gap `g`.
pub fn two_plate(n: usize, f1: f64, f2: f64, g: f64, alpha: f64) -> Result<Setup> {
    Preset::new(PresetKind::TwoPlate).with("f1", f1)?.with("f2", f2)?.with("g", g)?.with("alpha", alpha)?.setup(n)
}

/// Plate resting on its boundary with the unilateral condition `u ≥ 0`.
pub fn plate_corners(n: usize, f: f64, alpha: f64) -> Result<Setup> {
    Preset::new(PresetKind::PlateCorners).with("f", f)?.with("alpha", alpha)?.setup(n)
}

/// Two elastic squares in plane strain touching along `y = 1`.
pub fn two_body_elastic(n: usize, mu: f64, lambda: f64, f: f64, alpha: f64, support: Support) -> Result<Setup> {
    let mut p = Preset::new(PresetKind::TwoBodyElastic).with("mu", mu)?.with("lambda", lambda)?.with("f", f)?.with("alpha", alpha)?;
    p.support = support;
    p.setup(n)
}
