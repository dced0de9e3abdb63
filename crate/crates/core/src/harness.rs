//! Study drivers behind the command-line tool: single solves, convergence
//! sweeps under uniform refinement and condition-number studies, with CSV
//! tables and legacy VTK output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::assembly::{nested_diff, prolong, NormKind, Problem};
use crate::elements::Family;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problems::{Method, Preset, Setup};
use crate::solver::{newton_solve, NewtonConfig, NewtonReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Solve,
    Converge,
    Condition,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub preset: Preset,
    /// Mesh resolutions; each one doubles the previous.
    pub levels: Vec<usize>,
    /// Norm of the convergence study; the preset's natural norm if unset.
    pub norm: Option<NormKind>,
    pub out: Option<PathBuf>,
    pub newton: NewtonConfig,
}

impl StudyConfig {
    pub fn new(kind: StudyKind, preset: Preset, levels: Vec<usize>) -> StudyConfig {
        StudyConfig { kind, preset, levels, norm: None, out: None, newton: NewtonConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.newton.validate()?;
        let min = match self.kind {
            StudyKind::Solve | StudyKind::Condition => 1,
            StudyKind::Converge => 2,
        };
        if self.levels.len() < min {
            return Err(Error::InvalidArgument(format!("{:?} study needs at least {min} mesh level(s)", self.kind)));
        }
        if self.levels[0] == 0 {
            return Err(Error::InvalidArgument("mesh levels must be positive".into()));
        }
        for w in self.levels.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(Error::InvalidArgument(format!("mesh levels must double from one to the next, got {} after {}", w[1], w[0])));
            }
        }
        Ok(())
    }

    pub fn norm(&self) -> NormKind {
        self.norm.unwrap_or(self.preset.kind.default_norm())
    }
}

/// A converged discrete solution.
#[derive(Clone)]
pub struct Solution {
    pub setup: Setup,
    pub u: Vec<f64>,
    pub report: NewtonReport,
}

/// Runs Newton's method from `initial` (or the preset's initial state) and
/// fails if it does not converge.
pub fn solve_setup(setup: Setup, initial: Option<Vec<f64>>, newton: &NewtonConfig) -> Result<Solution> {
    let start = initial.unwrap_or_else(|| setup.initial.clone());
    let (u, report) = newton_solve(&setup.problem, &start, newton)?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.residual_history.last().copied().unwrap_or(f64::NAN),
        });
    }
    Ok(Solution { setup, u, report })
}

/// Solves the preset on the first level and, with an output directory,
/// writes the VTK files and a one-line summary table.
pub fn run_solve(cfg: &StudyConfig) -> Result<Solution> {
    cfg.validate()?;
    let n = cfg.levels[0];
    let sol = cfg.preset.setup(n).and_then(|s| solve_setup(s, None, &cfg.newton)).map_err(|e| level_failure(n, e))?;
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        export_solution(&sol, dir)?;
        let mut csv = String::from("n,n_dofs,newton_iters,final_residual,energy\n");
        writeln!(
            csv,
            "{},{},{},{:.6e},{:.12e}",
            n,
            sol.setup.problem.n_free(),
            sol.report.iterations,
            sol.report.residual_history.last().copied().unwrap_or(0.0),
            sol.report.final_energy
        )
        .expect("writing to a String");
        fs::write(dir.join("solve.csv"), csv)?;
    }
    Ok(sol)
}

fn level_failure(n: usize, e: Error) -> Error {
    match e {
        Error::LevelFailure { .. } => e,
        other => Error::LevelFailure { n, source: Box::new(other) },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Largest cell diameter of the finer level.
    pub h: f64,
    pub n_dofs: usize,
    /// `‖u_h − u_2h‖`, the coarse solution evaluated on the parent cells.
    pub diff_norm: f64,
    /// `log₂(diff(2h) / diff(h))`, absent on the first row.
    pub observed_rate: Option<f64>,
    pub newton_iters: usize,
}

/// Solves every level, reusing the prolonged coarse solution as the initial
/// guess on the next level, and reports pairwise difference norms.
pub fn run_converge(cfg: &StudyConfig) -> Result<Vec<ConvergenceRow>> {
    let (rows, _) = converge_with_solutions(cfg)?;
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("converge.csv"), convergence_csv(&rows))?;
    }
    Ok(rows)
}

/// [`run_converge`] without file output, also returning the solution on
/// every level.
pub fn converge_with_solutions(cfg: &StudyConfig) -> Result<(Vec<ConvergenceRow>, Vec<Solution>)> {
    cfg.validate()?;
    if cfg.kind != StudyKind::Converge {
        return Err(Error::InvalidArgument("not a convergence study".into()));
    }
    let norm = cfg.norm();
    let mut meshes = cfg.preset.meshes(cfg.levels[0]).map_err(|e| level_failure(cfg.levels[0], e))?;
    let mut solutions: Vec<Solution> = Vec::new();
    let mut rows = Vec::new();
    for (i, &n) in cfg.levels.iter().enumerate() {
        if i > 0 {
            meshes = Preset::refine(&meshes);
        }
        let setup = cfg.preset.build(meshes.clone()).map_err(|e| level_failure(n, e))?;
        let guess = match solutions.last() {
            Some(prev) => {
                // Strongly fixed entries keep their prescribed values.
                let p = prolong(&prev.setup.problem, &setup.problem, &prev.u).map_err(|e| level_failure(n, e))?;
                let mut g = setup.initial.clone();
                for &i in setup.problem.free_dofs() {
                    g[i] = p[i];
                }
                Some(g)
            }
            None => None,
        };
        let sol = solve_setup(setup, guess, &cfg.newton).map_err(|e| level_failure(n, e))?;
        if let Some(prev) = solutions.last() {
            let diff = nested_diff(&prev.setup.problem, &prev.u, &sol.setup.problem, &sol.u, norm).map_err(|e| level_failure(n, e))?;
            let rate = rows.last().map(|r: &ConvergenceRow| (r.diff_norm / diff).log2());
            rows.push(ConvergenceRow {
                h: max_h(&sol.setup.meshes),
                n_dofs: sol.setup.problem.n_free(),
                diff_norm: diff,
                observed_rate: rate,
                newton_iters: sol.report.iterations,
            });
        }
        solutions.push(sol);
    }
    Ok((rows, solutions))
}

fn max_h(meshes: &[Arc<Mesh>]) -> f64 {
    meshes.iter().map(|m| m.h_max()).fold(0.0, f64::max)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("h,n_dofs,diff_norm,observed_rate,newton_iters\n");
    for r in rows {
        let rate = r.observed_rate.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(s, "{:.6e},{},{:.12e},{},{}", r.h, r.n_dofs, r.diff_norm, rate, r.newton_iters).expect("writing to a String");
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionRow {
    pub h: f64,
    /// Newton iteration whose Jacobian was measured, from 1.
    pub iteration: usize,
    pub method: Method,
    /// NaN when the estimate failed.
    pub cond: f64,
}

/// For every level, solves the preset once with Nitsche's method and once
/// with a penalty whose `γ` carries one more power of `h`, recording the
/// condition number of each Newton Jacobian.
pub fn run_condition(cfg: &StudyConfig) -> Result<Vec<ConditionRow>> {
    cfg.validate()?;
    let base_power = cfg.preset.get("gamma_power")?;
    let mut newton = cfg.newton;
    newton.track_condition = true;
    let mut rows = Vec::new();
    for &n in &cfg.levels {
        for method in [Method::Nitsche, Method::Penalty] {
            let mut preset = cfg.preset.clone();
            preset.method = method;
            if method == Method::Penalty {
                preset.set_value("gamma_power", base_power + 1.0)?;
            }
            let sol = preset.setup(n).and_then(|s| solve_setup(s, None, &newton)).map_err(|e| level_failure(n, e))?;
            let h = max_h(&sol.setup.meshes);
            for (k, &cond) in sol.report.condition_estimates.iter().flatten().enumerate() {
                rows.push(ConditionRow { h, iteration: k + 1, method, cond });
            }
        }
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("condition.csv"), condition_csv(&rows))?;
    }
    Ok(rows)
}

pub fn condition_csv(rows: &[ConditionRow]) -> String {
    let mut s = String::from("h,iteration,method,cond\n");
    for r in rows {
        let method = match r.method {
            Method::Nitsche => "nitsche",
            Method::Penalty => "penalty",
        };
        let cond = if r.cond.is_finite() { format!("{:.6e}", r.cond) } else { String::new() };
        writeln!(s, "{:.6e},{},{},{}", r.h, r.iteration, method, cond).expect("writing to a String");
    }
    s
}

/// Writes one VTK file per mesh of the solution into `dir`, named after the
/// preset (`<name>.vtk`, or `<name>_<k>.vtk` for several meshes).
pub fn export_solution(sol: &Solution, dir: &Path) -> Result<Vec<PathBuf>> {
    let meshes = &sol.setup.meshes;
    let mut paths = Vec::new();
    for (k, mesh) in meshes.iter().enumerate() {
        let file = if meshes.len() == 1 { format!("{}.vtk", sol.setup.name) } else { format!("{}_{k}.vtk", sol.setup.name) };
        let path = dir.join(file);
        export_vtk(&sol.setup.problem, &sol.u, mesh, k == 0, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Legacy ASCII VTK unstructured grid of the fields living on `mesh`. With
/// `multiplier`, the weight-averaged recovered multiplier of the constraint
/// quadrature points in each cell is added as cell data `lambda_h` (the
/// constraint points of every preset belong to its first mesh).
///
/// Morley fields are written cell by cell as quadratic triangles sampled at
/// the vertices and edge midpoints, so their jumps across edges stay visible.
pub fn export_vtk(problem: &Problem, u: &[f64], mesh: &Arc<Mesh>, multiplier: bool, path: &Path) -> Result<()> {
    let fields: Vec<usize> = (0..problem.fields().len()).filter(|&f| Arc::ptr_eq(&problem.fields()[f].mesh, mesh)).collect();
    let discontinuous = fields.iter().any(|&f| problem.fields()[f].family() == Family::Morley);
    let kind = mesh.kind();
    let ref_pts: Vec<[f64; 3]> = if discontinuous {
        let v = kind.reference_vertices();
        let mid = |a: usize, b: usize| [(v[a][0] + v[b][0]) / 2.0, (v[a][1] + v[b][1]) / 2.0, 0.0];
        vec![v[0], v[1], v[2], mid(0, 1), mid(1, 2), mid(2, 0)]
    } else {
        kind.reference_vertices().to_vec()
    };

    // Point coordinates and, per cell, the point indices.
    let (points, connectivity): (Vec<[f64; 3]>, Vec<Vec<usize>>) = if discontinuous {
        let mut pts = Vec::new();
        let mut conn = Vec::new();
        for c in 0..mesh.n_cells() {
            let map = mesh.cell_map(c)?;
            conn.push((pts.len()..pts.len() + ref_pts.len()).collect());
            pts.extend(ref_pts.iter().map(|xi| map.apply(xi)));
        }
        (pts, conn)
    } else {
        (mesh.nodes().to_vec(), mesh.cells().map(|c| c.to_vec()).collect())
    };

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("nitsche solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", points.len()).expect("string write");
    for p in &points {
        writeln!(out, "{:.12e} {:.12e} {:.12e}", p[0], p[1], p[2]).expect("string write");
    }
    let total: usize = connectivity.iter().map(|c| c.len() + 1).sum();
    writeln!(out, "CELLS {} {}", connectivity.len(), total).expect("string write");
    for c in &connectivity {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        writeln!(out, "{} {}", c.len(), ids.join(" ")).expect("string write");
    }
    writeln!(out, "CELL_TYPES {}", connectivity.len()).expect("string write");
    let cell_type = if discontinuous { 22 } else { kind.vtk_type() };
    for _ in &connectivity {
        writeln!(out, "{cell_type}").expect("string write");
    }

    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", points.len()).expect("string write");
    }
    for &f in &fields {
        let field = &problem.fields()[f];
        let uf = problem.field_values(u, f);
        let mut values = vec![vec![0.0; field.ncomp]; points.len()];
        for c in 0..mesh.n_cells() {
            let vals = field.evaluate(uf, c, &ref_pts)?;
            for (local, v) in vals.into_iter().enumerate() {
                values[connectivity[c][local]] = v;
            }
        }
        if field.ncomp == 1 {
            writeln!(out, "SCALARS {} double 1\nLOOKUP_TABLE default", field.name).expect("string write");
            for v in &values {
                writeln!(out, "{:.12e}", v[0]).expect("string write");
            }
        } else {
            writeln!(out, "VECTORS {} double", field.name).expect("string write");
            for v in &values {
                let c = |i: usize| v.get(i).copied().unwrap_or(0.0);
                writeln!(out, "{:.12e} {:.12e} {:.12e}", c(0), c(1), c(2)).expect("string write");
            }
        }
    }

    if multiplier {
        let mut num = vec![0.0; mesh.n_cells()];
        let mut den = vec![0.0; mesh.n_cells()];
        for s in problem.recover_multiplier(u) {
            num[s.cell] += s.weight * s.value;
            den[s.cell] += s.weight;
        }
        writeln!(out, "CELL_DATA {}\nSCALARS lambda_h double 1\nLOOKUP_TABLE default", mesh.n_cells()).expect("string write");
        for (n, d) in num.iter().zip(&den) {
            let v = if *d > 0.0 { n / d } else { 0.0 };
            writeln!(out, "{v:.12e}").expect("string write");
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::PresetKind;

    #[test]
    fn level_validation() {
        let p = Preset::new(PresetKind::Obstacle);
        assert!(StudyConfig::new(StudyKind::Converge, p.clone(), vec![4]).validate().is_err());
        assert!(StudyConfig::new(StudyKind::Converge, p.clone(), vec![4, 6]).validate().is_err());
        assert!(StudyConfig::new(StudyKind::Converge, p.clone(), vec![8, 4]).validate().is_err());
        assert!(StudyConfig::new(StudyKind::Converge, p.clone(), vec![4, 8, 16]).validate().is_ok());
        assert!(StudyConfig::new(StudyKind::Solve, p, vec![0]).validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = [
            ConvergenceRow { h: 0.5, n_dofs: 9, diff_norm: 0.1, observed_rate: None, newton_iters: 3 },
            ConvergenceRow { h: 0.25, n_dofs: 49, diff_norm: 0.05, observed_rate: Some(1.0), newton_iters: 2 },
        ];
        let s = convergence_csv(&rows);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "h,n_dofs,diff_norm,observed_rate,newton_iters");
        assert_eq!(lines[1].split(',').nth(3), Some(""));
        assert_eq!(lines[2].split(',').nth(3), Some("1.000000"));
    }
}
