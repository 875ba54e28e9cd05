//! Batch front end: JSON configuration, command dispatch and deterministic
//! JSON/CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::barriers::{
    compute_h, default_alpha1, solve_sublinear, subsolution, subsolution_threshold, torsion, BarrierSet,
};
use crate::error::{Error, Result};
use crate::fraclap::{getoor_constant, DiscreteFracLap};
use crate::mesh::{FieldFunction, Grid};
use crate::semipositone::{
    estimate_lambda0_with, existence_detector, monotone_iterate, uncut_residual, DetectorOptions, Direction,
    SolveReport,
};
use crate::spectral::{embedding_constant, principal_eigenpair, EmbeddingOptions, Eigenpair};
use crate::variational::{
    check_r, choose_rho_mu_from, critical_exponent, minimize_in_ball_with, mountain_pass_with, verify_solution,
    CutoffNonlinearity, EmbeddingSet, MinimizeOptions, MountainPassOptions, ThresholdReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ValidateOperator,
    Eigen,
    Barriers,
    SolveP0,
    Lambda0,
    Solve,
    Thresholds,
    Sweep,
}

impl Command {
    fn operator_only(self) -> bool {
        matches!(self, Command::ValidateOperator | Command::Eigen)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Geometric,
}

/// A parameter value: a number, a multiple of its reference threshold, or
/// a ladder of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Value(f64),
    /// Multiple of `λ*` for `lambda`, of `μ_λ` (or `min(μ_λ, μ₀)` in the
    /// critical case) for `mu`.
    Times { times: f64 },
    Ladder {
        from: f64,
        to: f64,
        points: usize,
        scale: Scale,
        /// Ladder values are multiples of the reference threshold.
        #[serde(default)]
        relative: bool,
    },
}

impl ParamSpec {
    /// `(value, relative)` pairs, ascending.
    pub fn values(&self) -> Vec<(f64, bool)> {
        match *self {
            ParamSpec::Value(v) => vec![(v, false)],
            ParamSpec::Times { times } => vec![(times, true)],
            ParamSpec::Ladder {
                from,
                to,
                points,
                scale,
                relative,
            } => (0..points)
                .map(|k| {
                    let t = if points == 1 { 0.0 } else { k as f64 / (points - 1) as f64 };
                    let v = match scale {
                        Scale::Linear => from + t * (to - from),
                        Scale::Geometric => from * (to / from).powf(t),
                    };
                    (v, relative)
                })
                .collect(),
        }
    }

    fn is_ladder(&self) -> bool {
        matches!(self, ParamSpec::Ladder { .. })
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{name}: {m}")));
        match *self {
            ParamSpec::Value(v) if !(v >= 0.0 && v.is_finite()) => bad(format!("value {v} must be finite and nonnegative")),
            ParamSpec::Times { times } if !(times > 0.0 && times.is_finite()) => bad(format!("times = {times} must be positive")),
            ParamSpec::Ladder {
                from, to, points, scale, ..
            } => {
                if points == 0 {
                    return bad("ladder needs at least one point".into());
                }
                if !(from.is_finite() && to.is_finite() && from <= to && from >= 0.0) {
                    return bad(format!("ladder bounds must satisfy 0 <= from <= to, got {from}..{to}"));
                }
                if scale == Scale::Geometric && !(from > 0.0) {
                    return bad("geometric ladder needs from > 0".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Monotone iteration step and residual.
    pub solver: f64,
    /// Relative eigen-residual.
    pub eigen: f64,
    /// Relative bracket width of the `λ*` bisection.
    pub threshold: f64,
    /// Relative width of the `λ₀` bracket.
    pub lambda0: f64,
    /// Energy gradient of the ball minimizer.
    pub minimizer: f64,
    /// Energy gradient of the mountain-pass point.
    pub mountain_pass: f64,
    /// Uncut residual accepted by solution verification.
    pub residual: f64,
    /// Relative error accepted by operator validation.
    pub operator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: 1e-10,
            eigen: 1e-12,
            threshold: 1e-4,
            lambda0: 0.05,
            minimizer: 1e-6,
            mountain_pass: 1e-4,
            residual: 1e-5,
            operator: 1e-2,
        }
    }
}

fn default_q() -> f64 {
    0.5
}
fn default_r() -> f64 {
    2.0
}
fn default_domain() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_lambda() -> ParamSpec {
    ParamSpec::Times { times: 2.0 }
}
fn default_mu() -> ParamSpec {
    ParamSpec::Times { times: 0.5 }
}
fn default_levels() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub s: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    /// Defaults to the midpoint of `(1, 1/(1-q))`.
    #[serde(default)]
    pub alpha1: Option<f64>,
    /// Defaults to `1/(1-q) + 1/2`.
    #[serde(default)]
    pub alpha2: Option<f64>,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    pub n: usize,
    #[serde(default = "default_lambda")]
    pub lambda: ParamSpec,
    #[serde(default = "default_mu")]
    pub mu: ParamSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    /// Number of grids (halving `n` each time) in `validate-operator`.
    #[serde(default = "default_levels")]
    pub validate_levels: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1.unwrap_or_else(|| default_alpha1(self.q))
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2.unwrap_or(1.0 / (1.0 - self.q) + 0.5)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.domain[0], self.domain[1], self.n).map_err(|e| Error::Config(e.to_string()))
    }

    /// Re-checks every parameter constraint for `command`.
    pub fn validate(&self, command: Command) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.grid()?;
        if command.operator_only() {
            if !(self.s > 0.0 && self.s < 1.0) {
                return cfg(format!("s = {} must lie in (0, 1)", self.s));
            }
            return Ok(());
        }
        if !(self.s > 0.0 && self.s < 0.5) {
            return cfg(format!("s = {} must lie in (0, 1/2) for {command:?}", self.s));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return cfg(format!("q = {} must lie in (0, 1)", self.q));
        }
        let crit = critical_exponent(self.s).map_err(|e| Error::Config(e.to_string()))?;
        check_r(self.r, crit).map_err(|e| Error::Config(format!("r: {e}")))?;
        let top = 1.0 / (1.0 - self.q);
        if !(self.alpha1() > 1.0 && self.alpha1() < top) {
            return cfg(format!("alpha1 = {} must lie in (1, {top})", self.alpha1()));
        }
        if !(self.alpha2() > top) {
            return cfg(format!("alpha2 = {} must exceed {top}", self.alpha2()));
        }
        self.lambda.validate("lambda")?;
        self.mu.validate("mu")?;
        if command != Command::Sweep && (self.lambda.is_ladder() || self.mu.is_ladder()) {
            return cfg("ladders are only accepted by the sweep command".into());
        }
        if let ParamSpec::Value(v) = self.lambda {
            if !(v > 0.0) {
                return cfg("lambda must be positive".into());
            }
        }
        if command == Command::Solve && self.mu == ParamSpec::Value(0.0) {
            return cfg("solve needs mu > 0; use solve-p0 for mu = 0".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("solver", t.solver),
            ("eigen", t.eigen),
            ("threshold", t.threshold),
            ("lambda0", t.lambda0),
            ("minimizer", t.minimizer),
            ("mountain_pass", t.mountain_pass),
            ("residual", t.residual),
            ("operator", t.operator),
        ] {
            if !(v > 0.0) {
                return cfg(format!("tolerances.{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Everything a command produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Value,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
    pub passed: bool,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv(header: &[&str], columns: &[&[f64]]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| num(c[i])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Solution profile CSV: `x, u, u_under, residual`.
pub fn solution_csv(u: &FieldFunction, u_under: &FieldFunction, residual: &FieldFunction) -> String {
    csv(
        &["x", "u", "u_under", "residual"],
        &[&u.grid().nodes(), u.values(), u_under.values(), residual.values()],
    )
}

/// Barrier CSV: `x, phi1, h, u_under, z_super, psi` where `psi` is the
/// scaled torsion supersolution `λ^{α₂} ψ`.
pub fn barriers_csv(b: &BarrierSet, phi1: &FieldFunction, h: &FieldFunction) -> String {
    csv(
        &["x", "phi1", "h", "u_under", "z_super", "psi"],
        &[
            &phi1.grid().nodes(),
            phi1.values(),
            h.values(),
            b.u_under.values(),
            b.z_super.values(),
            b.psi_super.values(),
        ],
    )
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    certs: BTreeMap<String, bool>,
    files: Vec<(String, String)>,
}

impl Ctx<'_> {
    fn cert(&mut self, name: &str, ok: bool) {
        self.certs.insert(name.to_string(), ok);
    }
}

/// Runs `command`. Configuration problems are errors; numerical failures
/// are recorded in the report and make `passed` false.
pub fn run_command(cfg: &RunConfig, command: Command, workers: usize) -> Result<RunOutput> {
    cfg.validate(command)?;
    let mut ctx = Ctx {
        cfg,
        certs: BTreeMap::new(),
        files: Vec::new(),
    };
    let outcome = match command {
        Command::ValidateOperator => cmd_validate_operator(&mut ctx),
        Command::Eigen => cmd_eigen(&mut ctx),
        Command::Barriers => cmd_barriers(&mut ctx),
        Command::SolveP0 => cmd_solve_p0(&mut ctx),
        Command::Lambda0 => cmd_lambda0(&mut ctx),
        Command::Solve => cmd_solve(&mut ctx),
        Command::Thresholds => cmd_thresholds(&mut ctx),
        Command::Sweep => cmd_sweep(&mut ctx, workers),
    };
    let (results, error) = match outcome {
        Ok(v) => (v, None),
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => (Value::Null, Some(e.to_string())),
    };
    let passed = error.is_none() && !ctx.certs.is_empty() && ctx.certs.values().all(|&b| b);
    let report = json!({
        "command": command,
        "config": cfg,
        "passed": passed,
        "certifications": ctx.certs,
        "results": results,
        "error": error,
    });
    Ok(RunOutput {
        report,
        files: ctx.files,
        passed,
    })
}

fn operator(cfg: &RunConfig) -> Result<DiscreteFracLap> {
    DiscreteFracLap::assemble(cfg.grid()?, cfg.s)
}

fn cmd_validate_operator(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let levels = cfg.validate_levels.max(1);
    let mut rows = Vec::new();
    let mut last = None;
    for k in (0..levels).rev() {
        let n = cfg.n >> k;
        if n < 8 {
            continue;
        }
        let grid = Grid::new(cfg.domain[0], cfg.domain[1], n)?;
        let op = DiscreteFracLap::assemble(grid, cfg.s)?;
        let (m, rad) = (grid.midpoint(), grid.half_width());
        let gamma = getoor_constant(cfg.s)?;
        let bump = FieldFunction::from_fn(grid, |x| (rad * rad - (x - m) * (x - m)).max(0.0).powf(cfg.s))?;
        let applied = op.apply(&bump)?;
        let psi = torsion(&op, 1e-13)?;
        let exact = bump.scaled(1.0 / gamma);
        let mut op_dev = 0.0_f64;
        let mut tor_err = 0.0_f64;
        for j in 0..n {
            if (grid.node(j) - m).abs() <= 0.9 * rad {
                op_dev = op_dev.max((applied.values()[j] / gamma - 1.0).abs());
                tor_err = tor_err.max((psi.values()[j] / exact.values()[j] - 1.0).abs());
            }
        }
        rows.push(json!({"n": n, "operator_deviation": op_dev, "torsion_error": tor_err}));
        last = Some((grid, applied, psi, exact));
    }
    let Some((grid, applied, psi, exact)) = last else {
        return Err(Error::Config("n too small for operator validation".into()));
    };
    let dev: Vec<f64> = rows.iter().map(|r| r["operator_deviation"].as_f64().unwrap_or(f64::NAN)).collect();
    let tor: Vec<f64> = rows.iter().map(|r| r["torsion_error"].as_f64().unwrap_or(f64::NAN)).collect();
    let tol = cfg.tolerances.operator;
    ctx.cert("operator_deviation_below_tolerance", dev.last().is_some_and(|&d| d < tol));
    ctx.cert("torsion_error_below_tolerance", tor.last().is_some_and(|&d| d < tol));
    ctx.cert("operator_deviation_decreasing", dev.windows(2).all(|w| w[1] < w[0]));
    ctx.cert("torsion_error_decreasing", tor.windows(2).all(|w| w[1] < w[0]));
    ctx.files.push((
        "operator.csv".into(),
        csv(
            &["x", "applied_bump", "torsion", "torsion_exact"],
            &[&grid.nodes(), applied.values(), psi.values(), exact.values()],
        ),
    ));
    Ok(json!({ "getoor_constant": getoor_constant(cfg.s)?, "levels": rows }))
}

fn cmd_eigen(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let op = operator(cfg)?;
    let eig = principal_eigenpair(&op, cfg.tolerances.eigen.max(1e-14))?;
    let v = eig.phi1.values();
    let n = v.len();
    let symmetry = (0..n).fold(0.0_f64, |m, i| m.max((v[i] - v[n - 1 - i]).abs()));
    let e2 = embedding_constant(&op, 2.0, 1e-9)?;
    let check = e2 * eig.lambda1.sqrt();
    ctx.cert("residual", eig.residual <= 1e-10 * eig.lambda1);
    ctx.cert("positive", eig.phi1.min() > 0.0);
    ctx.cert("symmetric", symmetry <= 1e-10);
    ctx.cert("embedding_p2", (check - 1.0).abs() <= 1e-6);
    ctx.files.push(("eigen.csv".into(), csv(&["x", "phi1"], &[&op.grid().nodes(), v])));
    Ok(json!({
        "lambda1": eig.lambda1,
        "residual_inf": eig.residual,
        "iterations": eig.iterations,
        "symmetry_error": symmetry,
        "embedding_p2": e2,
        "embedding_p2_times_sqrt_lambda1": check,
    }))
}

/// Shared setup for the semipositone commands.
struct Base {
    op: DiscreteFracLap,
    eig: Eigenpair,
    lambda_star: f64,
    threshold: crate::barriers::SubsolutionThreshold,
}

fn base(cfg: &RunConfig) -> Result<Base> {
    let op = operator(cfg)?;
    let eig = principal_eigenpair(&op, cfg.tolerances.eigen.max(1e-14))?;
    let threshold = subsolution_threshold(&op, &eig, cfg.q, cfg.alpha1(), cfg.tolerances.threshold)?;
    Ok(Base {
        op,
        eig,
        lambda_star: threshold.lambda_star,
        threshold,
    })
}

fn single(spec: &ParamSpec, reference: f64) -> f64 {
    let (v, rel) = spec.values()[0];
    if rel {
        v * reference
    } else {
        v
    }
}

fn cmd_barriers(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let b = base(cfg)?;
    let lambda = single(&cfg.lambda, b.lambda_star);
    let hp = compute_h(&b.op, &b.eig);
    ctx.cert("h_routes_agree", hp.is_ok());
    let hp = hp?;
    let psi = torsion(&b.op, 1e-13)?;
    let z1 = solve_sublinear(&b.op, 1.0, cfg.q, cfg.tolerances.solver)?;
    let set = BarrierSet::build(&b.op, &b.eig, &psi, &z1, lambda, cfg.q, cfg.alpha1(), cfg.alpha2())?;
    ctx.cert("subsolution", set.margins.subsolution <= 0.0);
    ctx.cert("supersolution", set.margins.supersolution >= 0.0);
    ctx.cert("ordered", set.margins.ordering_gap >= 0.0);
    ctx.cert("h_positive", hp.h.min() > 0.0);
    ctx.files.push(("barriers.csv".into(), barriers_csv(&set, &b.eig.phi1, &hp.h)));
    Ok(json!({
        "lambda": lambda,
        "lambda1": b.eig.lambda1,
        "threshold": b.threshold,
        "margins": set.margins,
        "h_min": hp.h.min(),
        "h_route_deviation": hp.max_rel_dev,
    }))
}

fn solution_entry(file: &str, rep: &SolveReport, params: Value) -> Value {
    let mut v = serde_json::to_value(rep).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.insert("solution_csv_path".into(), json!(file));
        m.insert("params".into(), params);
    }
    v
}

fn cmd_solve_p0(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let b = base(cfg)?;
    let lambda = single(&cfg.lambda, b.lambda_star);
    let lower = subsolution(&b.eig, lambda, cfg.alpha1(), cfg.q)?;
    let margin = crate::barriers::certify_subsolution(&b.op, &lower, lambda, cfg.q)?;
    let upper = solve_sublinear(&b.op, lambda, cfg.q, cfg.tolerances.solver)?;
    let gap = upper.sub(&lower)?.min();
    ctx.cert("subsolution", margin <= 0.0);
    ctx.cert("ordered", gap >= 0.0);
    let tol = cfg.tolerances.solver;
    let rep = monotone_iterate(&b.op, lambda, 0.0, cfg.q, cfg.r, &lower, &upper, Direction::Ascend, tol)?;
    ctx.cert("converged", rep.converged && rep.residual_inf <= tol);
    ctx.cert("inside_barriers", rep.ordering_ok);
    let res = uncut_residual(&b.op, &rep.solution, lambda, 0.0, cfg.q, cfg.r)?;
    ctx.files.push(("solution_1.csv".into(), solution_csv(&rep.solution, &lower, &res)));
    let params = json!({"lambda": lambda, "mu": 0.0, "q": cfg.q, "r": cfg.r, "s": cfg.s});
    Ok(json!({
        "lambda_star": b.lambda_star,
        "subsolution_margin": margin,
        "ordering_gap": gap,
        "solutions": [solution_entry("solution_1.csv", &rep, params)],
    }))
}

fn cmd_lambda0(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let op = operator(cfg)?;
    let br = estimate_lambda0_with(&op, cfg.q, cfg.tolerances.lambda0, &DetectorOptions::default())?;
    ctx.cert(
        "bracket_width",
        (br.lambda_hi - br.lambda_lo) / br.lambda_hi <= cfg.tolerances.lambda0,
    );
    ctx.cert("endpoints_verified", !br.at_lo.exists && br.at_hi.exists);
    Ok(serde_json::to_value(&br)?)
}

fn embedding_options(cfg: &RunConfig) -> EmbeddingOptions {
    EmbeddingOptions {
        seed: cfg.seed,
        ..Default::default()
    }
}

/// Thresholds at `λ`, with `μ` resolved against `μ_λ` (or `min(μ_λ, μ₀)`
/// in the critical case).
fn thresholds_at(
    cfg: &RunConfig,
    b: &Base,
    set: &EmbeddingSet,
    lambda: f64,
    mu_spec: (f64, bool),
) -> Result<(CutoffNonlinearity, ThresholdReport)> {
    let lower = subsolution(&b.eig, lambda, cfg.alpha1(), cfg.q)?;
    let nl = CutoffNonlinearity::new(lambda, 0.0, cfg.q, cfg.r, cfg.s, lower)?;
    let th = choose_rho_mu_from(&nl, &b.op, set)?;
    let cap = mu_cap(&nl, &th);
    let mu = if mu_spec.1 { mu_spec.0 * cap } else { mu_spec.0 };
    let nl = nl.with_mu(mu)?;
    let th = choose_rho_mu_from(&nl, &b.op, set)?;
    Ok((nl, th))
}

fn mu_cap(nl: &CutoffNonlinearity, th: &ThresholdReport) -> f64 {
    if nl.is_critical() {
        th.mu_lambda.min(th.mu0_critical)
    } else {
        th.mu_lambda
    }
}

fn cmd_thresholds(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let b = base(cfg)?;
    let lambda = single(&cfg.lambda, b.lambda_star);
    let set = EmbeddingSet::compute(&b.op, cfg.q, cfg.r, &embedding_options(cfg))?;
    let (nl, th) = thresholds_at(cfg, &b, &set, lambda, cfg.mu.values()[0])?;
    ctx.cert("subsolution_certified", lambda >= b.lambda_star);
    ctx.cert("mu_below_threshold", nl.mu < mu_cap(&nl, &th));
    ctx.cert("boundary_bound_positive", th.boundary_inf_bound > 0.0);
    Ok(json!({
        "lambda_star": b.lambda_star,
        "critical_case": nl.is_critical(),
        "thresholds": th,
    }))
}

/// Both solutions of the cut-off problem at one `(λ, μ)`.
struct PairOutcome {
    minimizer: Option<(SolveReport, bool)>,
    mountain_pass: Option<(SolveReport, bool, f64, bool, usize)>,
    errors: Vec<String>,
}

fn solve_pair(cfg: &RunConfig, op: &DiscreteFracLap, nl: &CutoffNonlinearity, th: &ThresholdReport) -> PairOutcome {
    let mut out = PairOutcome {
        minimizer: None,
        mountain_pass: None,
        errors: Vec::new(),
    };
    let t = &cfg.tolerances;
    let opts = MinimizeOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    match minimize_in_ball_with(nl, op, th.rho, t.minimizer, &opts) {
        Ok(m) => {
            let ok = verify_solution(nl, op, &m.report.solution, t.residual)
                .map(|c| c.passed)
                .unwrap_or(false)
                && m.report.converged
                && m.report.energy.is_some_and(|e| e <= 0.0);
            out.minimizer = Some((m.report, ok));
        }
        Err(e) => out.errors.push(format!("minimizer: {e}")),
    }
    if nl.is_critical() {
        return out;
    }
    let Some((u0, _)) = &out.minimizer else {
        return out;
    };
    match mountain_pass_with(nl, op, &u0.solution, th.rho, t.mountain_pass, &MountainPassOptions::default()) {
        Ok(mp) => {
            let ok = verify_solution(nl, op, &mp.report.solution, t.residual)
                .map(|c| c.passed)
                .unwrap_or(false)
                && mp.report.converged
                && !mp.merged;
            out.mountain_pass = Some((mp.report, ok, mp.separation, mp.merged, mp.morse_index));
        }
        Err(e) => out.errors.push(format!("mountain pass: {e}")),
    }
    out
}

fn cmd_solve(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let b = base(cfg)?;
    let lambda = single(&cfg.lambda, b.lambda_star);
    let set = EmbeddingSet::compute(&b.op, cfg.q, cfg.r, &embedding_options(cfg))?;
    let (nl, th) = thresholds_at(cfg, &b, &set, lambda, cfg.mu.values()[0])?;
    let critical = nl.is_critical();
    ctx.cert("subsolution_certified", lambda >= b.lambda_star);
    ctx.cert("mu_below_threshold", nl.mu > 0.0 && nl.mu < mu_cap(&nl, &th));
    let pair = solve_pair(cfg, &b.op, &nl, &th);
    let params = json!({"lambda": lambda, "mu": nl.mu, "q": cfg.q, "r": cfg.r, "s": cfg.s});
    let mut solutions = Vec::new();
    let mut add = |ctx: &mut Ctx, rep: &SolveReport, extra: Value| -> Result<()> {
        let k = solutions.len() + 1;
        let file = format!("solution_{k}.csv");
        let res = uncut_residual(&b.op, &rep.solution, nl.lambda, nl.mu, nl.q, nl.r)?;
        ctx.files.push((file.clone(), solution_csv(&rep.solution, &nl.u_under, &res)));
        let mut entry = solution_entry(&file, rep, params.clone());
        if let (Value::Object(m), Value::Object(x)) = (&mut entry, extra) {
            m.extend(x);
        }
        solutions.push(entry);
        Ok(())
    };
    ctx.cert("minimizer", pair.minimizer.as_ref().is_some_and(|m| m.1));
    if let Some((rep, _)) = &pair.minimizer {
        add(ctx, rep, json!({}))?;
    }
    if !critical {
        ctx.cert("mountain_pass", pair.mountain_pass.as_ref().is_some_and(|m| m.1));
        if let Some((rep, _, sep, merged, morse)) = &pair.mountain_pass {
            add(ctx, rep, json!({"separation": sep, "merged": merged, "morse_index": morse}))?;
        }
        let m0 = pair.minimizer.as_ref().and_then(|m| m.0.energy);
        let mmu = pair.mountain_pass.as_ref().and_then(|m| m.0.energy);
        ctx.cert("levels_ordered", matches!((m0, mmu), (Some(a), Some(b)) if a <= 0.0 && 0.0 < b));
    }
    Ok(json!({
        "lambda_star": b.lambda_star,
        "critical_case": critical,
        "thresholds": th,
        "solutions": solutions,
        "errors": pair.errors,
    }))
}

/// One row of the phase diagram.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// NaN (blank in the CSV) when `μ` is relative and its reference
    /// threshold does not exist at this `λ`.
    pub mu: f64,
    pub detector: bool,
    pub solution_count: usize,
    pub m0: Option<f64>,
    pub m_mu: Option<f64>,
    pub min_value: Option<f64>,
    pub residual_1: Option<f64>,
    pub residual_2: Option<f64>,
    pub status: String,
}

fn sweep_point(cfg: &RunConfig, b: &Base, set: &EmbeddingSet, z1: &FieldFunction, lambda: f64, mu_spec: (f64, bool)) -> SweepRow {
    let mut row = SweepRow {
        lambda,
        mu: if mu_spec.1 { f64::NAN } else { mu_spec.0 },
        detector: false,
        solution_count: 0,
        m0: None,
        m_mu: None,
        min_value: None,
        residual_1: None,
        residual_2: None,
        status: String::new(),
    };
    let det = match existence_detector(&b.op, z1, lambda, cfg.q, &DetectorOptions::default()) {
        Ok(d) => d,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    row.detector = det.exists;
    if mu_spec.0 == 0.0 {
        row.mu = 0.0;
        if det.exists {
            row.solution_count = 1;
            row.min_value = Some(det.min_value);
            row.residual_1 = Some(det.residual_inf);
            row.status = "ok".into();
        } else {
            row.status = "no-solution-detected".into();
        }
        return row;
    }
    if !det.exists {
        row.status = "no-solution-detected".into();
        return row;
    }
    if lambda < b.lambda_star {
        row.status = "no-certified-subsolution".into();
        return row;
    }
    let (nl, th) = match thresholds_at(cfg, b, set, lambda, mu_spec) {
        Ok(v) => v,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    row.mu = nl.mu;
    if !(nl.mu < mu_cap(&nl, &th)) {
        row.status = "mu-above-threshold".into();
        return row;
    }
    let pair = solve_pair(cfg, &b.op, &nl, &th);
    let mut mins = Vec::new();
    if let Some((rep, ok)) = &pair.minimizer {
        row.m0 = rep.energy;
        row.residual_1 = Some(rep.residual_inf);
        if *ok {
            row.solution_count += 1;
            mins.push(rep.min_value);
        }
    }
    if let Some((rep, ok, ..)) = &pair.mountain_pass {
        row.m_mu = rep.energy;
        row.residual_2 = Some(rep.residual_inf);
        if *ok {
            row.solution_count += 1;
            mins.push(rep.min_value);
        }
    }
    row.min_value = mins.into_iter().reduce(f64::min);
    row.status = if pair.errors.is_empty() {
        "ok".into()
    } else {
        format!("error: {}", pair.errors.join("; "))
    };
    row
}

/// Phase-diagram CSV; one row per `(λ, μ)` in ladder order.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("lambda,mu,detector,solution_count,m0,m_mu,min_value,residual_1,residual_2,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            num(r.lambda),
            num(r.mu),
            r.detector,
            r.solution_count,
            opt(r.m0),
            opt(r.m_mu),
            opt(r.min_value),
            opt(r.residual_1),
            opt(r.residual_2),
            r.status.replace(',', ";")
        );
    }
    out
}

fn cmd_sweep(ctx: &mut Ctx, workers: usize) -> Result<Value> {
    let cfg = ctx.cfg;
    let b = base(cfg)?;
    let set = EmbeddingSet::compute(&b.op, cfg.q, cfg.r, &embedding_options(cfg))?;
    let z1 = solve_sublinear(&b.op, 1.0, cfg.q, 1e-12)?;
    let lambdas: Vec<f64> = cfg
        .lambda
        .values()
        .into_iter()
        .map(|(v, rel)| if rel { v * b.lambda_star } else { v })
        .collect();
    let mus = cfg.mu.values();
    let points: Vec<(f64, (f64, bool))> = lambdas
        .iter()
        .flat_map(|&l| mus.iter().map(move |&m| (l, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|&(l, m)| sweep_point(cfg, &b, &set, &z1, l, m))
            .collect()
    });
    ctx.cert("all_points_evaluated", rows.iter().all(|r| !r.status.starts_with("error")));
    ctx.files.push(("sweep.csv".into(), sweep_csv(&rows)));
    Ok(json!({
        "lambda_star": b.lambda_star,
        "rows": rows.len(),
        "embedding": set,
    }))
}

/// Files this tool may write into an output directory.
fn owned(name: &str) -> bool {
    matches!(
        name,
        "report.json" | "barriers.csv" | "sweep.csv" | "eigen.csv" | "operator.csv"
    ) || (name.starts_with("solution_") && name.ends_with(".csv"))
}

/// Writes `report.json` and the CSV files into `out`. An existing
/// non-empty directory is only reused with `force`, and then only files
/// this tool owns are removed.
pub fn write_outputs(out: &Path, output: &RunOutput, force: bool) -> Result<()> {
    if out.exists() {
        let entries: Vec<PathBuf> = std::fs::read_dir(out)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        if !entries.is_empty() && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty; pass --force to overwrite",
                out.display()
            )));
        }
        for p in entries {
            if p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(owned) {
                std::fs::remove_file(p)?;
            }
        }
    } else {
        std::fs::create_dir_all(out)?;
    }
    let mut text = serde_json::to_string_pretty(&output.report)?;
    text.push('\n');
    std::fs::write(out.join("report.json"), text)?;
    for (name, body) in &output.files {
        std::fs::write(out.join(name), body)?;
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "fracsemi", about = "Semipositone problems for the 1-D fractional Laplacian")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub force: bool,
}

/// Exit status: 0 when every certification passed, 1 when one failed,
/// 2 on configuration or usage errors.
pub fn run(args: &Args) -> i32 {
    let result = RunConfig::load(&args.config)
        .and_then(|cfg| run_command(&cfg, args.command, args.workers))
        .and_then(|out| write_outputs(&args.out, &out, args.force).map(|_| out));
    match result {
        Ok(out) if out.passed => 0,
        Ok(_) => 1,
        Err(e @ Error::Config(_)) => {
            eprintln!("fracsemi: {e}");
            2
        }
        Err(e) => {
            eprintln!("fracsemi: {e}");
            1
        }
    }
}

pub fn main_entry() -> i32 {
    match Args::try_parse() {
        Ok(args) => run(&args),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}
