use std::path::PathBuf;

use glue_core::adiabatic::{adia_distance_cfg, AdiaDistanceReport};
use glue_core::cylinder::CylinderGrid;
use glue_core::decay::{decay_fit_with, gamma_c, three_interval_bound, window_energies_at, WindowKind};
use glue_core::examples::{cpn_row, summarize, CpnExample, CpnRow};
use glue_core::floer_op::{error_report, Equation, ErrorReport};
use glue_core::flow::{dim_identity_check, fredholm_index, fredholm_index_family, toy_index_svd, ToyIndexSpec};
use glue_core::inverse::{contraction_check, ContractionReport};
use glue_core::newton::{glue_with, GlueOutput, IFTReport, NewtonOptions};
use glue_core::preglue::{flat_toy_with, preglue, DfdConfig, PregZone};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{LabError, Result, Status};
use crate::gridio::write_dump;
use crate::report::{num, write_csv, write_json, Artifacts, Provenance, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Preglue,
    ErrorSweep,
    InverseCheck,
    Newton,
    Decay,
    Adia,
    Cpn,
    Transversality,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Preglue => "preglue",
            Command::ErrorSweep => "error-sweep",
            Command::InverseCheck => "inverse-check",
            Command::Newton => "newton",
            Command::Decay => "decay",
            Command::Adia => "adia",
            Command::Cpn => "cpn",
            Command::Transversality => "transversality",
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub status: Status,
    pub artifacts: Artifacts,
    /// One line per notable finding, for the terminal.
    pub messages: Vec<String>,
}

/// Failed sweep point, kept in the JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct PointError {
    pub eps: f64,
    pub error: String,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    prov: Provenance,
    out: RunOutput,
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, &self.prov, table)?;
        self.out.artifacts.files.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, report: &T) -> Result<()> {
        let p = self.path(name);
        write_json(&p, &self.prov, report)?;
        self.out.artifacts.files.push(p);
        Ok(())
    }

    fn dump(&mut self, name: &str, u: &CylinderGrid) -> Result<()> {
        if self.cfg.flags.write_grids {
            let p = self.path(name);
            write_dump(&p, u)?;
            self.out.artifacts.files.push(p);
        }
        Ok(())
    }

    fn flag(&mut self, status: Status, msg: String) {
        self.out.status = self.out.status.worst(status);
        self.out.messages.push(msg);
    }

    /// Splits sweep results, recording failures with their exit class.
    fn split<T>(&mut self, results: Vec<(f64, Result<T>)>) -> (Vec<(f64, T)>, Vec<PointError>) {
        let mut ok = Vec::new();
        let mut errs = Vec::new();
        for (eps, r) in results {
            match r {
                Ok(v) => ok.push((eps, v)),
                Err(e) => {
                    self.flag(Status::from(&e), format!("ε = {}: {e}", num(eps)));
                    errs.push(PointError { eps, error: e.to_string() });
                }
            }
        }
        (ok, errs)
    }
}

/// Worker count from `GLUE_LAB_THREADS`; unset means rayon's default.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("GLUE_LAB_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(LabError::Config(format!("GLUE_LAB_THREADS = {s:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Evaluates `f` over the sweep on a bounded pool; results come back in sweep order.
fn sweep<T: Send>(eps: &[f64], threads: Option<usize>, f: impl Fn(f64) -> Result<T> + Sync) -> Result<Sweep<T>> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| eps.par_iter().map(|&e| (e, f(e))).collect()))
}

/// Per-point results of a sweep, in sweep order.
type Sweep<T> = Vec<(f64, Result<T>)>;

fn tag(eps: f64) -> String {
    format!("eps{}", num(eps))
}

/// Runs one subcommand and writes its artifacts under `cfg.output_dir`.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<RunOutput> {
    run_with_threads(cmd, cfg, thread_cap()?)
}

pub fn run_with_threads(cmd: Command, cfg: &RunConfig, threads: Option<usize>) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| LabError::io(&cfg.output_dir, e))?;
    let mut run = Run {
        cfg,
        prov: Provenance::new(cmd.name(), cfg.scenario.id(), cfg.seed),
        out: RunOutput { status: Status::Ok, artifacts: Artifacts::default(), messages: Vec::new() },
    };
    match cmd {
        Command::Preglue => cmd_preglue(&mut run, threads)?,
        Command::ErrorSweep => cmd_error_sweep(&mut run, threads)?,
        Command::InverseCheck => cmd_inverse_check(&mut run, threads)?,
        Command::Newton => cmd_newton(&mut run, threads)?,
        Command::Decay => cmd_decay(&mut run, threads)?,
        Command::Adia => cmd_adia(&mut run, threads)?,
        Command::Cpn => cmd_cpn(&mut run, threads)?,
        Command::Transversality => cmd_transversality(&mut run)?,
    }
    Ok(run.out)
}

fn toy(cfg: &RunConfig) -> Result<DfdConfig> {
    let spec = cfg.toy_spec()?;
    flat_toy_with(&spec).map_err(|e| match e {
        glue_core::GlueError::ShapeMismatch(m) | glue_core::GlueError::InvalidParams(m) => LabError::Config(m),
        e => e.into(),
    })
}

const ZONES: [PregZone; 5] = [PregZone::EndMinus, PregZone::BridgeMinus, PregZone::Neck, PregZone::BridgePlus, PregZone::EndPlus];

fn zone_name(z: PregZone) -> &'static str {
    match z {
        PregZone::EndMinus => "end_minus",
        PregZone::BridgeMinus => "bridge_minus",
        PregZone::Neck => "neck",
        PregZone::BridgePlus => "bridge_plus",
        PregZone::EndPlus => "end_plus",
    }
}

fn preglue_reports(run: &Run, threads: Option<usize>) -> Result<Sweep<(CylinderGrid, ErrorReport)>> {
    let dfd = toy(run.cfg)?;
    let cfg = run.cfg;
    sweep(&cfg.eps_list()?, threads, |eps| {
        let p = cfg.params_at(eps);
        let u = preglue(&dfd, &p)?;
        let rep = error_report(&u, &Equation::of_config(&dfd, &p))?;
        Ok((u, rep))
    })
}

fn cmd_preglue(run: &mut Run, threads: Option<usize>) -> Result<()> {
    let res = preglue_reports(run, threads)?;
    let (ok, errs) = run.split(res);
    let mut t = Table::new(&["eps [1]", "zone", "residual_norm [L^p_beta]", "residual_max [chart]"]);
    for (eps, (u, rep)) in &ok {
        for z in &rep.zones {
            t.push(vec![num(*eps), zone_name(z.zone).into(), num(z.norm), num(z.max_abs)]);
        }
        run.dump(&format!("preglue_{}.bin", tag(*eps)), u)?;
    }
    run.csv("preglue_zones.csv", &t)?;
    if !errs.is_empty() {
        run.json("preglue_errors.json", &errs)?;
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Serialize)]
struct ErrorSweepReport {
    slope: Option<f64>,
    errors: Vec<PointError>,
}

fn cmd_error_sweep(run: &mut Run, threads: Option<usize>) -> Result<()> {
    let res = preglue_reports(run, threads)?;
    let (ok, errs) = run.split(res);
    let xs: Vec<f64> = ok.iter().map(|(e, _)| *e).collect();
    let ys: Vec<f64> = ok.iter().map(|(_, (_, r))| r.total).collect();
    let slope = log_slope(&xs, &ys);
    let mut cols = vec!["eps [1]".to_string(), "error [L^p_beta]".into(), "error_resolved [eps-norm]".into()];
    cols.extend(ZONES.iter().map(|z| format!("{} [L^p_beta]", zone_name(*z))));
    cols.push("fitted_slope [1]".into());
    let mut t = Table { columns: cols, rows: Vec::new() };
    for (eps, (_, rep)) in &ok {
        let mut row = vec![num(*eps), num(rep.total), num(rep.resolved)];
        for z in ZONES {
            row.push(rep.zones.iter().find(|r| r.zone == z).map_or(String::new(), |r| num(r.norm)));
        }
        row.push(slope.map_or(String::new(), num));
        t.push(row);
    }
    run.csv("error_sweep.csv", &t)?;
    if let Some(s) = slope {
        run.out.messages.push(format!("fitted slope {s:.4}"));
    }
    run.json("error_sweep.json", &ErrorSweepReport { slope, errors: errs })
}

#[derive(Serialize)]
struct InverseCheckReport {
    points: Vec<(f64, ContractionReport)>,
    errors: Vec<PointError>,
}

fn cmd_inverse_check(run: &mut Run, threads: Option<usize>) -> Result<()> {
    let dfd = toy(run.cfg)?;
    let cfg = run.cfg;
    let res = sweep(&cfg.eps_list()?, threads, |eps| Ok(contraction_check(&dfd, &cfg.params_at(eps), cfg.flags.probes, cfg.seed)?))?;
    let (ok, errs) = run.split(res);
    let mut t = Table::new(&["eps [1]", "bound_estimate [eps-norm]", "contraction_ratio [1]", "matching_residual [chart]", "probes [count]"]);
    for (eps, r) in &ok {
        t.push(vec![num(*eps), num(r.q_norm), num(r.max_ratio), num(r.max_matching_residual), r.ratios.len().to_string()]);
        if r.max_ratio > cfg.flags.contraction_max {
            run.flag(Status::BoundViolated, format!("ε = {}: contraction ratio {:.3e} > {}", num(*eps), r.max_ratio, cfg.flags.contraction_max));
        }
    }
    run.csv("inverse_check.csv", &t)?;
    run.json("inverse_check.json", &InverseCheckReport { points: ok, errors: errs })
}

fn glue_sweep(run: &Run, threads: Option<usize>) -> Result<(DfdConfig, Sweep<GlueOutput>)> {
    let dfd = toy(run.cfg)?;
    let cfg = run.cfg;
    let opts = NewtonOptions { seed: cfg.seed, ..NewtonOptions::default() };
    let res = sweep(&cfg.eps_list()?, threads, |eps| Ok(glue_with(&dfd, &cfg.params_at(eps), &opts)?))?;
    Ok((dfd, res))
}

#[derive(Serialize)]
struct NewtonReport {
    points: Vec<(f64, IFTReport)>,
    errors: Vec<PointError>,
}

fn cmd_newton(run: &mut Run, threads: Option<usize>) -> Result<()> {
    let (_, res) = glue_sweep(run, threads)?;
    let (ok, errs) = run.split(res);
    let mut t = Table::new(&[
        "eps [1]",
        "initial_residual [eps-norm]",
        "final_residual [eps-norm]",
        "iterations [count]",
        "distance [X-norm]",
        "distance_bound [X-norm]",
        "c_used [1]",
        "h_used [X-norm]",
        "k_used [1]",
        "mu [1]",
        "bound_holds",
    ]);
    let mut reports = Vec::new();
    for (eps, g) in &ok {
        let r = &g.newton.report;
        t.push(vec![
            num(*eps),
            num(r.initial_residual),
            num(r.final_residual),
            r.iterations.to_string(),
            num(r.distance),
            num(2.0 * r.c_used * r.initial_residual),
            num(r.c_used),
            num(r.h_used),
            num(r.k_used),
            num(r.mu),
            r.bound_holds.to_string(),
        ]);
        if !r.bound_holds {
            run.flag(Status::BoundViolated, format!("ε = {}: ‖x − x₀‖ exceeds 2C‖F(x₀)‖", num(*eps)));
        }
        run.dump(&format!("newton_{}.bin", tag(*eps)), &g.grid)?;
        reports.push((*eps, r.clone()));
    }
    run.csv("newton.csv", &t)?;
    run.json("newton.json", &NewtonReport { points: reports, errors: errs })
}

#[derive(Serialize)]
struct DecayPoint {
    eps: f64,
    sigma: f64,
    r2: f64,
    windows: usize,
    hypothesis_holds: bool,
    conclusion_holds: bool,
}

#[derive(Serialize)]
struct DecayReport {
    c: f64,
    points: Vec<DecayPoint>,
    errors: Vec<PointError>,
}

fn cmd_decay(run: &mut Run, threads: Option<usize>) -> Result<()> {
    let (_, res) = glue_sweep(run, threads)?;
    let (ok, errs) = run.split(res);
    let c = 2.0 * std::f64::consts::PI * run.cfg.flags.upsilon;
    let gamma = gamma_c(c);
    let mut t = Table::new(&["eps [1]", "k [window]", "x_k [energy]", "bound_k [energy]", "sigma_fit [1/tau]"]);
    let mut points = Vec::new();
    for (eps, g) in &ok {
        let r = run.cfg.params_at(*eps).r();
        let n = r.floor() as i64;
        let windows: Vec<(f64, f64)> = (0..2 * n).map(|q| (-r + q as f64, -r + q as f64 + 1.0)).collect();
        let w = window_energies_at(&g.grid.as_section(), WindowKind::HigherModeL2, &windows)?;
        let dist: Vec<f64> = windows.iter().map(|(a, b)| r - (0.5 * (a + b)).abs()).collect();
        let fit = decay_fit_with(&w.x, &dist, 1e-28)?;
        let ti = three_interval_bound(&w.x, gamma)?;
        for (k, (x, b)) in w.x.iter().zip(&ti.bound).enumerate() {
            t.push(vec![num(*eps), k.to_string(), num(*x), num(*b), num(fit.sigma)]);
        }
        if ti.holds_hypothesis && !ti.conclusion_holds {
            run.flag(Status::BoundViolated, format!("ε = {}: three-interval conclusion fails", num(*eps)));
        }
        points.push(DecayPoint {
            eps: *eps,
            sigma: fit.sigma,
            r2: fit.r2,
            windows: w.x.len(),
            hypothesis_holds: ti.holds_hypothesis,
            conclusion_holds: ti.conclusion_holds,
        });
    }
    run.csv("decay.csv", &t)?;
    run.json("decay.json", &DecayReport { c, points, errors: errs })
}

#[derive(Serialize)]
struct AdiaReport {
    zeta: f64,
    points: Vec<(f64, AdiaDistanceReport)>,
    errors: Vec<PointError>,
}

fn cmd_adia(run: &mut Run, threads: Option<usize>) -> Result<()> {
    let (dfd, res) = glue_sweep(run, threads)?;
    let cfg = run.cfg;
    let zeta = cfg.flags.zeta;
    let res: Sweep<AdiaDistanceReport> =
        res.into_iter().map(|(eps, g)| (eps, g.and_then(|g| Ok(adia_distance_cfg(&g.grid, &dfd, &cfg.params_at(eps), zeta)?)))).collect();
    let (ok, errs) = run.split(res);
    let mut t = Table::new(&[
        "eps [1]",
        "local_energy [energy]",
        "hausdorff_neck [d_M]",
        "transition_diam_minus [d_M]",
        "transition_diam_plus [d_M]",
        "end_c1_minus [C^1]",
        "end_c1_plus [C^1]",
        "composite [1]",
    ]);
    for (eps, d) in &ok {
        t.push(vec![
            num(*eps),
            num(d.local_energy),
            num(d.hausdorff_neck),
            num(d.transition_diams.0),
            num(d.transition_diams.1),
            num(d.end_c1_distances.0),
            num(d.end_c1_distances.1),
            num(d.composite),
        ]);
    }
    run.csv("adia.csv", &t)?;
    run.json("adia.json", &AdiaReport { zeta, points: ok, errors: errs })
}

#[derive(Serialize)]
struct CpnSummary {
    zeta: f64,
    c_tilde: f64,
    drift_ratio: f64,
    composite_decreasing: bool,
    rows: Vec<CpnRow>,
    errors: Vec<PointError>,
}

fn cmd_cpn(run: &mut Run, threads: Option<usize>) -> Result<()> {
    let cfg = run.cfg;
    let spec = cfg.cpn_spec()?;
    let ex = CpnExample::new(&spec)?;
    let zeta = cfg.flags.zeta;
    let res = sweep(&cfg.eps_list()?, threads, |eps| Ok(cpn_row(&ex, eps, zeta)?))?;
    let (ok, errs) = run.split(res);
    let mut t = Table::new(&[
        "eps [1]",
        "chord_bound [chart]",
        "measured_sup [chart]",
        "transition_bound [chart]",
        "transition_sup [chart]",
        "far_bound [chart]",
        "far_sup [chart]",
        "energy_bound [energy]",
        "measured_energy [energy]",
        "energy_ratio [1]",
        "residual [chart]",
        "composite_distance [1]",
    ]);
    for (_, r) in &ok {
        t.push(vec![
            num(r.eps),
            num(r.neck_bound),
            num(r.neck_sup),
            num(r.transition_bound),
            num(r.transition_sup),
            num(r.far_bound),
            num(r.far_sup),
            num(r.energy_bound),
            num(r.energy),
            num(r.energy_ratio),
            num(r.residual.max_norm),
            num(r.distance.composite),
        ]);
    }
    run.csv("cpn.csv", &t)?;
    let rep = summarize(ok.into_iter().map(|(_, r)| r).collect());
    if !rep.composite_decreasing {
        run.out.messages.push("composite distance is not strictly decreasing at this zeta".into());
    }
    if rep.drift_ratio >= 2.0 {
        run.flag(Status::BoundViolated, format!("energy envelope drift {:.3} ≥ 2", rep.drift_ratio));
    }
    run.json(
        "cpn.json",
        &CpnSummary {
            zeta,
            c_tilde: rep.c_tilde,
            drift_ratio: rep.drift_ratio,
            composite_decreasing: rep.composite_decreasing,
            rows: rep.rows,
            errors: errs,
        },
    )
}

/// `(μ₋, μ₊, c₁₋, c₁₊)` cases for the toy index check.
const INDEX_CASES: [(i64, i64, i64, i64); 5] = [(0, 0, 0, 0), (1, -1, 0, 0), (-2, 1, 1, 0), (0, 2, 0, 1), (2, 0, 0, 0)];
const INDEX_NODES: [usize; 3] = [9, 17, 33];

#[derive(Serialize)]
struct TransversalityReport {
    trials: usize,
    dim_mismatches: usize,
    index_cases: usize,
    index_mismatches: usize,
}

fn cmd_transversality(run: &mut Run) -> Result<()> {
    let cfg = run.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = Table::new(&["trial", "n", "dim_a", "dim_b", "lhs [dim]", "rhs [dim]", "match"]);
    let mut dim_bad = 0;
    for trial in 0..cfg.flags.trials {
        let n = rng.random_range(1..7);
        let da = rng.random_range(0..=n);
        let db = rng.random_range(0..=n);
        let a = DMatrix::from_fn(n, da, |_, _| rng.random_range(-1.0..1.0));
        let mut b = DMatrix::from_fn(n, db, |_, _| rng.random_range(-1.0..1.0));
        for c in 0..rng.random_range(0..=da.min(db)) {
            b.set_column(c, &a.column(c).clone_owned());
        }
        let d = dim_identity_check(&a, &b, n);
        let ok = d.lhs == d.rhs_plus;
        dim_bad += usize::from(!ok);
        t.push(vec![trial.to_string(), n.to_string(), da.to_string(), db.to_string(), d.lhs.to_string(), d.rhs_plus.to_string(), ok.to_string()]);
    }
    run.csv("transversality.csv", &t)?;

    let mut ti = Table::new(&["mu_minus", "mu_plus", "c1_minus", "c1_plus", "parametrized", "nodes", "kernel [dim]", "cokernel [dim]", "index", "formula", "match"]);
    let mut idx_bad = 0;
    let mut cases = 0;
    for (mm, mp, c1m, c1p) in INDEX_CASES {
        for parametrized in [false, true] {
            let want = if parametrized { fredholm_index_family(mm, mp, c1m, c1p) } else { fredholm_index(mm, mp, c1m, c1p) };
            for nodes in INDEX_NODES {
                let spec = ToyIndexSpec { n: 2, mu_minus: mm, mu_plus: mp, c1_minus: c1m, c1_plus: c1p, nodes, l: cfg.params.l, parametrized, seed: cfg.seed };
                let r = toy_index_svd(&spec)?;
                let ok = r.index == want && r.index == r.formula;
                cases += 1;
                idx_bad += usize::from(!ok);
                ti.push(vec![
                    mm.to_string(),
                    mp.to_string(),
                    c1m.to_string(),
                    c1p.to_string(),
                    parametrized.to_string(),
                    nodes.to_string(),
                    r.kernel.to_string(),
                    r.cokernel.to_string(),
                    r.index.to_string(),
                    r.formula.to_string(),
                    ok.to_string(),
                ]);
            }
        }
    }
    run.csv("toy_index.csv", &ti)?;
    if dim_bad + idx_bad > 0 {
        run.flag(Status::BoundViolated, format!("{dim_bad} dimension mismatches, {idx_bad} index mismatches"));
    }
    run.json(
        "transversality.json",
        &TransversalityReport { trials: cfg.flags.trials, dim_mismatches: dim_bad, index_cases: cases, index_mismatches: idx_bad },
    )
}
