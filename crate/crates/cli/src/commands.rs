use crate::manifest::{Outputs, SolverStats};
use anyhow::{anyhow, Context, Result};
use bernoulli::config::{Problem, RunConfig, SetmoveInit, Solvers};
use bernoulli::diagnostics::{
    blowup_rescale, density_csv, diagnose, el_csv, free_boundary_points, growth_csv, log_radii,
    rescale_defect, weiss_csv, weiss_profile,
};
use bernoulli::energy::EnergyReport;
use bernoulli::field::{field_from_csv, field_to_csv};
use bernoulli::geometry::Chart;
use bernoulli::minimize::{
    brute_force_oracle, certify, solve_relaxed, solve_setmove, SolveResult, CERT_REL_TOL,
};
use bernoulli::{PositivityMask, VectorField};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Input = 1,
    Quantitative = 2,
    NotConverged = 3,
}

struct Solved {
    relaxed: Option<SolveResult>,
    setmove: Option<SolveResult>,
    stats: Vec<SolverStats>,
}

impl Solved {
    fn last(&self) -> &SolveResult {
        self.setmove
            .as_ref()
            .or(self.relaxed.as_ref())
            .expect("at least one solver ran")
    }

    fn converged(&self) -> bool {
        self.relaxed
            .iter()
            .chain(&self.setmove)
            .all(|r| r.converged)
    }
}

fn load(config: &Path) -> Result<(RunConfig, Problem)> {
    let cfg = RunConfig::load(config)?;
    let problem = cfg
        .build()
        .with_context(|| format!("cannot build the instance of {}", config.display()))?;
    log::info!(
        "{}: {} vertices, h = {:.4e}",
        problem.complex.description(),
        problem.complex.num_vertices(),
        problem.complex.mesh_size()
    );
    Ok((cfg, problem))
}

fn run_solvers(cfg: &RunConfig, p: &Problem) -> Result<Solved> {
    let sc = &cfg.solver;
    let mut stats = Vec::new();
    let wants_relaxed =
        cfg.run.solvers != Solvers::Setmove || cfg.run.setmove_init == SetmoveInit::Relaxed;
    let relaxed = if wants_relaxed {
        let t = Instant::now();
        let r = solve_relaxed(&p.complex, &p.q, &p.g, sc)?;
        log::info!(
            "relaxed: J = {:.12e} after {} iterations",
            r.energy.total,
            r.iterations
        );
        stats.push(SolverStats::new("relaxed", &r, t.elapsed()));
        Some(r)
    } else {
        None
    };
    let setmove = if cfg.run.solvers != Solvers::Relaxed {
        let init = match (&relaxed, cfg.run.setmove_init) {
            (Some(r), SetmoveInit::Relaxed) => PositivityMask::of(&r.field, sc.tau),
            _ => PositivityMask::from_vec(vec![true; p.complex.num_vertices()], sc.tau),
        };
        let t = Instant::now();
        let r = solve_setmove(&p.complex, &p.q, &p.g, &init, sc)?;
        log::info!(
            "setmove: J = {:.12e} after {} moves",
            r.energy.total,
            r.iterations
        );
        stats.push(SolverStats::new("setmove", &r, t.elapsed()));
        Some(r)
    } else {
        None
    };
    Ok(Solved {
        relaxed,
        setmove,
        stats,
    })
}

#[derive(Serialize)]
struct EnergySummary<'a> {
    relaxed: Option<&'a EnergyReport>,
    setmove: Option<&'a EnergyReport>,
    /// `|J_relaxed - J_setmove| / J` when both ran.
    cross_solver_gap: Option<f64>,
    final_energy: f64,
}

fn read_field(p: &Problem, path: &Path) -> Result<VectorField> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read field {}", path.display()))?;
    let u = field_from_csv(&p.complex, &text)?;
    if u.m() != p.g.m() {
        return Err(anyhow!(
            "field has {} components, config data has {}",
            u.m(),
            p.g.m()
        ));
    }
    Ok(u)
}

pub fn cmd_solve(config: &Path) -> Result<Status> {
    let (cfg, p) = load(config)?;
    let solved = run_solvers(&cfg, &p)?;
    let mut out = Outputs::create(cfg.output_dir())?;
    let tau = cfg.solver.tau;
    if let Some(r) = &solved.relaxed {
        out.write("field_relaxed.csv", &field_to_csv(&r.field, tau))?;
    }
    if let Some(r) = &solved.setmove {
        out.write("field_setmove.csv", &field_to_csv(&r.field, tau))?;
    }
    let last = solved.last();
    out.write("field.csv", &field_to_csv(&last.field, tau))?;
    let gap = match (&solved.relaxed, &solved.setmove) {
        (Some(a), Some(b)) if cfg.run.solvers == Solvers::Both => {
            let j = b.energy.total.abs().max(f64::MIN_POSITIVE);
            Some((a.energy.total - b.energy.total).abs() / j)
        }
        _ => None,
    };
    out.write_json(
        "energy.json",
        &EnergySummary {
            relaxed: solved.relaxed.as_ref().map(|r| &r.energy),
            setmove: solved.setmove.as_ref().map(|r| &r.energy),
            cross_solver_gap: gap,
            final_energy: last.energy.total,
        },
    )?;
    let mut status = Status::Success;
    if cfg.certify.enabled {
        let cert = certify(&p.complex, &last.field, &p.q, &cfg.solver)?;
        log::info!(
            "certificate valid: {} (worst margin {:.3e})",
            cert.valid,
            cert.worst_margin
        );
        out.write_json("certificate.json", &cert)?;
        if !cert.valid {
            status = Status::Quantitative;
        }
    }
    if status == Status::Success && !solved.converged() {
        status = Status::NotConverged;
    }
    out.finish("solve", &cfg, &p.complex, solved.stats)?;
    Ok(status)
}

pub fn cmd_diagnose(config: &Path, field: &Path) -> Result<Status> {
    let (cfg, p) = load(config)?;
    let u = read_field(&p, field)?;
    let report = diagnose(
        &p.complex,
        &u,
        &p.q,
        cfg.diagnose.center,
        &cfg.diagnose.options,
    )?;
    let mut out = Outputs::create(cfg.output_dir())?;
    out.write("growth.csv", &growth_csv(&report.growth))?;
    out.write("density.csv", &density_csv(&report.density))?;
    if let Some(w) = &report.weiss {
        out.write("weiss.csv", &weiss_csv(w))?;
    }
    if let Some(e) = &report.el {
        out.write("el.csv", &el_csv(e))?;
    }
    out.write_json("diagnostics.json", &report)?;
    out.finish("diagnose", &cfg, &p.complex, Vec::new())?;
    Ok(Status::Success)
}

#[derive(Serialize)]
struct OracleComparison {
    solver: String,
    energy: f64,
    /// `(J_solver - J_oracle) / max(|J_oracle|, 1e-300)`.
    relative_gap: f64,
}

#[derive(Serialize)]
struct OracleSummary {
    energy: f64,
    mask: Vec<bool>,
    masks_evaluated: usize,
    intervals_only: bool,
    tolerance: f64,
    solvers: Vec<OracleComparison>,
    agrees: bool,
}

pub fn cmd_oracle(config: &Path) -> Result<Status> {
    let (cfg, p) = load(config)?;
    let oracle = brute_force_oracle(&p.complex, &p.q, &p.g, &cfg.solver)?;
    let solved = run_solvers(&cfg, &p)?;
    let scale = oracle.energy.abs().max(1e-300);
    let solvers: Vec<OracleComparison> =
        [("relaxed", &solved.relaxed), ("setmove", &solved.setmove)]
            .into_iter()
            .filter_map(|(name, r)| {
                r.as_ref().map(|r| OracleComparison {
                    solver: name.into(),
                    energy: r.energy.total,
                    relative_gap: (r.energy.total - oracle.energy) / scale,
                })
            })
            .collect();
    let agrees = solvers.iter().all(|s| s.relative_gap.abs() <= CERT_REL_TOL);
    let mut out = Outputs::create(cfg.output_dir())?;
    out.write(
        "oracle_field.csv",
        &field_to_csv(&oracle.field, cfg.solver.tau),
    )?;
    out.write_json(
        "oracle.json",
        &OracleSummary {
            energy: oracle.energy,
            mask: oracle.mask.mask.clone(),
            masks_evaluated: oracle.masks_evaluated,
            intervals_only: oracle.intervals_only,
            tolerance: CERT_REL_TOL,
            solvers,
            agrees,
        },
    )?;
    out.finish("oracle", &cfg, &p.complex, solved.stats)?;
    Ok(if agrees {
        Status::Success
    } else {
        Status::Quantitative
    })
}

#[derive(Serialize)]
struct BlowupSummary {
    center: usize,
    r: f64,
    nr: usize,
    ntheta: usize,
    /// `max |v(y) - u(x0 + r y)/r|` over the blow-up mesh.
    rescale_defect: f64,
    energy: f64,
    weiss_radii: Vec<f64>,
    weiss: Vec<f64>,
    weiss_monotonicity_defect: f64,
}

pub fn cmd_blowup(config: &Path, field: Option<&Path>) -> Result<Status> {
    let (cfg, p) = load(config)?;
    let (u, stats) = match field {
        Some(f) => (read_field(&p, f)?, Vec::new()),
        None => {
            let s = run_solvers(&cfg, &p)?;
            (s.last().field.clone(), s.stats)
        }
    };
    let tau = cfg.solver.tau;
    let center = match (cfg.blowup.center, p.complex.chart()) {
        (Some(c), _) => c,
        (None, Chart::Cone { .. }) => 0,
        (None, _) => *free_boundary_points(&p.complex, &u, tau)
            .first()
            .ok_or_else(|| anyhow!("field has no free boundary point to blow up at"))?,
    };
    let b = &cfg.blowup;
    let (fine, v) = blowup_rescale(
        &p.complex,
        &u,
        &p.q,
        center,
        b.r,
        b.nr,
        b.ntheta,
        &cfg.solver,
    )?;
    let defect = rescale_defect(&p.complex, &u, center, b.r, &fine, &v)?;
    let qf = bernoulli::QField::constant(fine.num_vertices(), p.q.at(center))?;
    let energy = bernoulli::energy::energy(&fine, &v, &qf, tau)?;
    let radii = log_radii(4.0 * fine.mesh_size(), 0.8, 8)?;
    let n = fine.intrinsic_dim() as f64;
    let w = weiss_profile(&fine, &v, &qf, 0, &radii, None, n, tau)?;
    let mut out = Outputs::create(cfg.output_dir())?;
    out.write("blowup_field.csv", &field_to_csv(&v, tau))?;
    out.write("blowup_weiss.csv", &weiss_csv(&w))?;
    out.write_json(
        "blowup.json",
        &BlowupSummary {
            center,
            r: b.r,
            nr: b.nr,
            ntheta: b.ntheta,
            rescale_defect: defect,
            energy: energy.total,
            weiss_radii: w.radii.clone(),
            weiss: w.values.clone(),
            weiss_monotonicity_defect: w.monotonicity_defect,
        },
    )?;
    out.finish("blowup", &cfg, &p.complex, stats)?;
    Ok(Status::Success)
}

pub fn cmd_mesh(config: &Path) -> Result<Status> {
    let cfg = RunConfig::load(config)?;
    let complex = cfg.build_mesh()?;
    let mut out = Outputs::create(cfg.output_dir())?;
    out.write("mesh.json", &(complex.to_json()? + "\n"))?;
    out.finish("mesh", &cfg, &complex, Vec::new())?;
    Ok(Status::Success)
}
