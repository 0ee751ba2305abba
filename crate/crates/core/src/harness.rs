//! Convergence-study driver: runs the splitting scheme over tau and mesh
//! sequences, measures discrete errors against the interpolated exact
//! solution, and emits CSV tables and log-log SVG plots.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::assemble;
use crate::linops::weighted_norm;
use crate::mesh::refine_sequence;
use crate::problems::{ProblemKind, ProblemSpec};
use crate::splitting::{integrate, SplitState, StepperConfig, TransformedOps, DEFAULT_EXPMV_TOL};

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub tau0: f64,
    pub tau_levels: usize,
    pub h0: f64,
    pub mesh_levels: usize,
    pub t_max: f64,
    pub expmv_tol: f64,
    /// additionally record H1-type errors (stiffness seminorm plus mass norm)
    pub h1_errors: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::AllenCahn,
            tau0: 0.2,
            tau_levels: 7,
            h0: 0.4,
            mesh_levels: 5,
            t_max: 1.0,
            expmv_tol: DEFAULT_EXPMV_TOL,
            h1_errors: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0 && self.h0 > 0.0 && self.h0 <= 1.0 && self.t_max > 0.0) {
            return Err(Error::Config(
                "tau0, h0 and t_max must be positive (h0 <= 1)".into(),
            ));
        }
        if self.tau_levels == 0 || self.mesh_levels == 0 {
            return Err(Error::Config(
                "need at least one tau and one mesh level".into(),
            ));
        }
        if !(self.expmv_tol > 0.0 && self.expmv_tol <= 1e-4) {
            return Err(Error::Config(
                "expmv tolerance must lie in (0, 1e-4]".into(),
            ));
        }
        for j in 0..self.tau_levels {
            let tau = self.tau(j);
            let steps = self.t_max / tau;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return Err(Error::Config(format!(
                    "t_max {} is not an integer multiple of tau level {j} ({tau})",
                    self.t_max
                )));
            }
        }
        Ok(())
    }

    pub fn tau(&self, level: usize) -> f64 {
        self.tau0 / 2f64.powi(level as i32)
    }

    /// Update one field from a key-value pair (config-file syntax).
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for {what}"));
        match key {
            "problem" => self.problem = ProblemKind::from_name(value)?,
            "tau0" => self.tau0 = value.parse().map_err(|_| bad("tau0"))?,
            "tau-levels" | "tau_levels" => {
                self.tau_levels = value.parse().map_err(|_| bad("tau-levels"))?
            }
            "h0" => self.h0 = value.parse().map_err(|_| bad("h0"))?,
            "mesh-levels" | "mesh_levels" => {
                self.mesh_levels = value.parse().map_err(|_| bad("mesh-levels"))?
            }
            "tmax" | "t_max" => self.t_max = value.parse().map_err(|_| bad("tmax"))?,
            "expmv-tol" | "expmv_tol" => {
                self.expmv_tol = value.parse().map_err(|_| bad("expmv-tol"))?
            }
            "h1" | "h1_errors" => self.h1_errors = value.parse().map_err(|_| bad("h1"))?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }
}

/// Parse `key = value` / `key value` lines; '#' starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k, v),
            None => line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?,
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub problem: String,
    pub mesh_level: usize,
    pub h: f64,
    pub ndof_bulk: usize,
    pub ndof_surf: usize,
    pub tau: f64,
    pub err_bulk: f64,
    pub err_surf: f64,
    /// max-norm of the trace-constraint violation; not part of the CSV schema
    pub trace_violation: f64,
    /// optional H1-type errors; reported on stdout, not part of the CSV schema
    pub err_bulk_h1: Option<f64>,
    pub err_surf_h1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RowFailure {
    pub mesh_level: usize,
    pub tau: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<RowFailure>,
}

impl ConvergenceReport {
    pub fn level_rows(&self, mesh_level: usize) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.mesh_level == mesh_level)
            .collect()
    }

    /// Pairwise observed orders log2(e_k / e_{k+1}) for one mesh level,
    /// as (coarser tau, bulk order, surface order).
    pub fn observed_orders(&self, mesh_level: usize) -> Vec<(f64, f64, f64)> {
        let rows = self.level_rows(mesh_level);
        rows.windows(2)
            .map(|w| {
                (
                    w[0].tau,
                    (w[0].err_bulk / w[1].err_bulk).log2(),
                    (w[0].err_surf / w[1].err_surf).log2(),
                )
            })
            .collect()
    }
}

/// Max over the trajectory of the lumped-mass discrete L2 distance to the
/// nodal interpolation of the exact solution, separately per component.
pub fn discrete_error(
    trajectory: &[SplitState],
    problem: &ProblemSpec,
    ops: &TransformedOps,
) -> (f64, f64) {
    let mut err_bulk = 0.0_f64;
    let mut err_surf = 0.0_f64;
    for state in trajectory {
        let du: Vec<f64> = ops
            .node_xy
            .iter()
            .zip(&state.u)
            .map(|(&p, &ui)| ui - problem.exact_u(p, state.t))
            .collect();
        let dv: Vec<f64> = ops
            .boundary
            .iter()
            .zip(&state.v)
            .map(|(&b, &vk)| vk - problem.exact_v_at(ops.node_xy[b], state.t))
            .collect();
        err_bulk = err_bulk.max(weighted_norm(&ops.mass_bulk, &du));
        err_surf = err_surf.max(weighted_norm(&ops.mass_surf, &dv));
    }
    (err_bulk, err_surf)
}

/// Max over the trajectory of the H1-type error: stiffness seminorm plus
/// lumped mass norm of the nodal difference, per component.
pub fn discrete_error_h1(
    trajectory: &[SplitState],
    problem: &ProblemSpec,
    ops: &TransformedOps,
    fem: &crate::fem::FemOperators,
) -> (f64, f64) {
    let h1 = |stiff: &crate::linops::SparseMat, mass: &[f64], d: &[f64]| -> f64 {
        let ad = stiff.mul_vec(d).expect("dimensions fixed by construction");
        let semi: f64 = ad.iter().zip(d).map(|(a, b)| a * b).sum();
        (semi.max(0.0) + weighted_norm(mass, d).powi(2)).sqrt()
    };
    let mut err_bulk = 0.0_f64;
    let mut err_surf = 0.0_f64;
    for state in trajectory {
        let du: Vec<f64> = ops
            .node_xy
            .iter()
            .zip(&state.u)
            .map(|(&p, &ui)| ui - problem.exact_u(p, state.t))
            .collect();
        let dv: Vec<f64> = ops
            .boundary
            .iter()
            .zip(&state.v)
            .map(|(&b, &vk)| vk - problem.exact_v_at(ops.node_xy[b], state.t))
            .collect();
        err_bulk = err_bulk.max(h1(&fem.stiff_bulk, &ops.mass_bulk, &du));
        err_surf = err_surf.max(h1(&fem.stiff_surf, &ops.mass_surf, &dv));
    }
    (err_bulk, err_surf)
}

fn trace_violation(trajectory: &[SplitState], ops: &TransformedOps) -> f64 {
    let mut worst = 0.0_f64;
    for state in trajectory {
        for (k, &b) in ops.boundary.iter().enumerate() {
            worst = worst.max((state.u[b] - state.v[k]).abs());
        }
    }
    worst
}

/// Run the full (mesh level) x (tau level) grid. Rows are ordered by mesh
/// level then descending tau; a failing row is reported and skipped.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let problem = ProblemSpec::new(cfg.problem);
    let meshes = refine_sequence(cfg.h0, cfg.mesh_levels)?;

    let mut report = ConvergenceReport::default();
    for (level_idx, mesh) in meshes.iter().enumerate() {
        let mesh_level = level_idx + 1;
        let fem = assemble(mesh)?;
        let ops = TransformedOps::build(mesh, &fem)?;

        let v0: Vec<f64> = ops
            .boundary
            .iter()
            .map(|&b| problem.exact_v_at(ops.node_xy[b], 0.0))
            .collect();
        let mut u0: Vec<f64> = ops
            .node_xy
            .iter()
            .map(|&p| problem.exact_u(p, 0.0))
            .collect();
        for (k, &b) in ops.boundary.iter().enumerate() {
            u0[b] = v0[k];
        }

        let level_results: Vec<std::result::Result<ReportRow, RowFailure>> = (0..cfg.tau_levels)
            .into_par_iter()
            .map(|j| {
                let tau = cfg.tau(j);
                let step_cfg = StepperConfig {
                    tau,
                    t_max: cfg.t_max,
                    expmv_tol: cfg.expmv_tol,
                };
                match integrate(u0.clone(), v0.clone(), &problem, &step_cfg, &ops) {
                    Ok(traj) => {
                        let (err_bulk, err_surf) = discrete_error(&traj, &problem, &ops);
                        let (h1_b, h1_s) = if cfg.h1_errors {
                            let (b, s) = discrete_error_h1(&traj, &problem, &ops, &fem);
                            (Some(b), Some(s))
                        } else {
                            (None, None)
                        };
                        Ok(ReportRow {
                            problem: problem.name().to_string(),
                            mesh_level,
                            h: mesh.h,
                            ndof_bulk: ops.n_bulk(),
                            ndof_surf: ops.n_surf(),
                            tau,
                            err_bulk,
                            err_surf,
                            trace_violation: trace_violation(&traj, &ops),
                            err_bulk_h1: h1_b,
                            err_surf_h1: h1_s,
                        })
                    }
                    Err(e) => Err(RowFailure {
                        mesh_level,
                        tau,
                        message: e.to_string(),
                    }),
                }
            })
            .collect();
        for r in level_results {
            match r {
                Ok(row) => report.rows.push(row),
                Err(f) => report.failures.push(f),
            }
        }
    }
    Ok(report)
}

pub const CSV_HEADER: &str = "problem,mesh_level,h,ndof_bulk,ndof_surf,tau,err_bulk,err_surf";

pub fn csv_string(report: &ConvergenceReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.problem, r.mesh_level, r.h, r.ndof_bulk, r.ndof_surf, r.tau, r.err_bulk, r.err_surf
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<ConvergenceReport> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Config(format!("unexpected CSV header: {other:?}"))),
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Config(format!("bad CSV row: {line}")));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad float '{s}'")))
        };
        let parse_u = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad integer '{s}'")))
        };
        rows.push(ReportRow {
            problem: f[0].to_string(),
            mesh_level: parse_u(f[1])?,
            h: parse_f(f[2])?,
            ndof_bulk: parse_u(f[3])?,
            ndof_surf: parse_u(f[4])?,
            tau: parse_f(f[5])?,
            err_bulk: parse_f(f[6])?,
            err_surf: parse_f(f[7])?,
            trace_violation: 0.0,
            err_bulk_h1: None,
            err_surf_h1: None,
        });
    }
    Ok(ConvergenceReport {
        rows,
        failures: Vec::new(),
    })
}

pub fn emit_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::Config("cannot emit an empty report".into()));
    }
    std::fs::write(path, csv_string(report))?;
    Ok(())
}

/// Endpoints of the first-order reference segment in data coordinates
/// (tau, error); the log-log slope between them is exactly 1.
pub fn reference_segment(report: &ConvergenceReport) -> ((f64, f64), (f64, f64)) {
    let tau_min = report
        .rows
        .iter()
        .map(|r| r.tau)
        .fold(f64::INFINITY, f64::min);
    let tau_max = report.rows.iter().map(|r| r.tau).fold(0.0, f64::max);
    let err_min = report
        .rows
        .iter()
        .map(|r| r.err_bulk.min(r.err_surf))
        .fold(f64::INFINITY, f64::min);
    let c = 0.5 * err_min / tau_min;
    ((tau_min, c * tau_min), (tau_max, c * tau_max))
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Log-log convergence plot: one polyline per mesh level per error column
/// (bulk solid, surface dashed) plus a dashed first-order reference segment.
pub fn svg_string(report: &ConvergenceReport) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::Config("cannot plot an empty report".into()));
    }
    let (width, height) = (860.0, 620.0);
    let (ml, mr, mt, mb) = (80.0, 30.0, 30.0, 70.0);

    let mut xs: Vec<f64> = report.rows.iter().map(|r| r.tau.log10()).collect();
    let mut ys: Vec<f64> = report
        .rows
        .iter()
        .flat_map(|r| [r.err_bulk, r.err_surf])
        .filter(|e| *e > 0.0)
        .map(|e| e.log10())
        .collect();
    let ((rx0, ry0), (rx1, ry1)) = reference_segment(report);
    xs.extend([rx0.log10(), rx1.log10()]);
    ys.extend([ry0.log10(), ry1.log10()]);
    let (x_lo, x_hi) = bounds(&xs);
    let (y_lo, y_hi) = bounds(&ys);
    let to_px = |lx: f64, ly: f64| {
        let px = ml + (lx - x_lo) / (x_hi - x_lo) * (width - ml - mr);
        let py = height - mb - (ly - y_lo) / (y_hi - y_lo) * (height - mt - mb);
        (px, py)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));

    // decade grid and tick labels
    for d in (x_lo.floor() as i32)..=(x_hi.ceil() as i32) {
        let lx = d as f64;
        if lx < x_lo || lx > x_hi {
            continue;
        }
        let (px, _) = to_px(lx, y_lo);
        svg.push_str(&format!(
            "<line x1=\"{px:.1}\" y1=\"{mt}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n",
            height - mb
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">1e{d}</text>\n",
            height - mb + 20.0
        ));
    }
    for d in (y_lo.floor() as i32)..=(y_hi.ceil() as i32) {
        let ly = d as f64;
        if ly < y_lo || ly > y_hi {
            continue;
        }
        let (_, py) = to_px(x_lo, ly);
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#ddd\"/>\n",
            width - mr
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>\n",
            ml - 8.0,
            py + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">time step tau</text>\n",
        ml + 0.5 * (width - ml - mr),
        height - 18.0
    ));
    svg.push_str(&format!(
        "<text x=\"22\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 22 {:.1})\">discrete L2 error</text>\n",
        mt + 0.5 * (height - mt - mb),
        mt + 0.5 * (height - mt - mb)
    ));

    let levels: Vec<usize> = {
        let mut l: Vec<usize> = report.rows.iter().map(|r| r.mesh_level).collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    for (li, &level) in levels.iter().enumerate() {
        let color = PALETTE[li % PALETTE.len()];
        let rows = report.level_rows(level);
        for (col, dash) in [("bulk", ""), ("surf", " stroke-dasharray=\"6 4\"")] {
            let pts: Vec<String> = rows
                .iter()
                .filter_map(|r| {
                    let e = if col == "bulk" {
                        r.err_bulk
                    } else {
                        r.err_surf
                    };
                    (e > 0.0).then(|| {
                        let (px, py) = to_px(r.tau.log10(), e.log10());
                        format!("{px:.1},{py:.1}")
                    })
                })
                .collect();
            if pts.len() >= 2 {
                svg.push_str(&format!(
                    "<polyline class=\"level{level}-{col}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{dash}/>\n",
                    pts.join(" ")
                ));
            }
        }
        let h = rows.first().map(|r| r.h).unwrap_or(0.0);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">level {level} (h={h:.3})</text>\n",
            ml + 12.0,
            mt + 18.0 * (li as f64 + 1.0)
        ));
    }

    let (p0, p1) = (
        to_px(rx0.log10(), ry0.log10()),
        to_px(rx1.log10(), ry1.log10()),
    );
    svg.push_str(&format!(
        "<line class=\"ref-order-1\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#555\" stroke-dasharray=\"4 4\"/>\n",
        p0.0, p0.1, p1.0, p1.1
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#555\">O(tau)</text>\n",
        p1.0 + 6.0,
        p1.1
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (hi - lo).max(1e-3);
    (lo - pad, hi + pad)
}

pub fn emit_plot(report: &ConvergenceReport, path: &Path) -> Result<()> {
    std::fs::write(path, svg_string(report)?)?;
    Ok(())
}
