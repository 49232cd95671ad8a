//! Command-line front end: flat key=value configuration, the
//! solve/sweep/verify/oracle subcommands, and all file output.
//!
//! Configuration is a UTF-8 document of `key=value` lines; `#` starts a
//! comment, blank lines are ignored, unknown keys are rejected. The same
//! keys are accepted as `--key value` flags, which override the config file.
//! All numbers are printed with 17 significant digits so every emitted file
//! round-trips losslessly, and equal configs produce byte-identical output.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::functional::{coupling, energy_total, Exponents};
use crate::mesh::{splitmix64_at, Grid, ScalarField};
use crate::oracle;
use crate::proofcheck::{
    concavity_violation, four_normalization, jensen_gap, midpoint_pair, path_energy_check,
};
use crate::solver::{self, balance_project, multi_start, EigenPair, SolverConfig, SolverReport};

// Verification thresholds of the randomized suites.
const JENSEN_MIN_GAP: f64 = -1e-14;
const CONCAVITY_MAX_VIOLATION: f64 = 1e-12;
const PATH_PROPORTIONAL_MAX: f64 = 1e-10;
const PATH_STABILITY_RATIO: f64 = 2.0;
const FOURNORM_PROPORTIONAL_MAX: f64 = 1e-10;
const CROSS_WITNESS_DELTA_MAX: f64 = 1e-6;

/// Sweep range `start:end:count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Range {
    fn parse(text: &str) -> Option<Range> {
        let mut parts = text.split(':');
        let start = parts.next()?.trim().parse().ok()?;
        let end = parts.next()?.trim().parse().ok()?;
        let count = parts.next()?.trim().parse().ok()?;
        if parts.next().is_some() || count == 0 {
            return None;
        }
        Some(Range { start, end, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + i as f64 * step).collect()
    }
}

/// Full run configuration: grid, exponents, solver settings, output paths
/// and per-subcommand parameters.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub solver: SolverConfig,
    pub json_out: String,
    pub csv_out: String,
    pub sweep_out: String,
    pub verify_out: String,
    pub sweep_p: Range,
    pub sweep_q: Option<f64>,
    pub theta: f64,
    pub trials: usize,
    pub concavity_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 1,
            n: 100,
            length: 1.0,
            p: 2.0,
            q: 2.0,
            alpha: 1.0,
            beta: 1.0,
            solver: SolverConfig::default(),
            json_out: "report.json".into(),
            csv_out: "fields.csv".into(),
            sweep_out: "sweep.csv".into(),
            verify_out: "verify.json".into(),
            sweep_p: Range { start: 1.6, end: 3.0, count: 16 },
            sweep_q: None,
            theta: 0.5,
            trials: 100_000,
            concavity_trials: 10_000,
        }
    }
}

impl RunConfig {
    pub fn exponents(&self) -> Result<Exponents> {
        Exponents::new(self.p, self.q, self.alpha, self.beta)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n, self.length)
    }

    fn validate(&self) -> Result<()> {
        self.grid()?;
        self.exponents()?;
        self.solver.validate()?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "theta must be in (0,1), got {}",
                self.theta
            )));
        }
        if self.trials == 0 || self.concavity_trials == 0 {
            return Err(Error::ParameterDomain("trial counts must be >= 1".into()));
        }
        Ok(())
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: Option<usize>) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("invalid value '{value}' for key '{key}'") })
}

fn parse_bool(key: &str, value: &str, line: Option<usize>) -> Result<bool> {
    match value.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => {
            Err(Error::Parse { line, msg: format!("invalid boolean '{other}' for key '{key}'") })
        }
    }
}

/// Apply one key=value assignment. `line` is the source line for error
/// messages (None for command-line flags).
fn apply_key(cfg: &mut RunConfig, key: &str, value: &str, line: Option<usize>) -> Result<()> {
    match key {
        "dim" => cfg.dim = parse_value(key, value, line)?,
        "n" => cfg.n = parse_value(key, value, line)?,
        "length" => cfg.length = parse_value(key, value, line)?,
        // "p" doubles as the sweep range when given as start:end:count
        "p" if value.contains(':') => cfg.sweep_p = parse_range(key, value, line)?,
        "p" => cfg.p = parse_value(key, value, line)?,
        "q" => cfg.q = parse_value(key, value, line)?,
        "alpha" => cfg.alpha = parse_value(key, value, line)?,
        "beta" => cfg.beta = parse_value(key, value, line)?,
        "seed" => cfg.solver.seed = parse_value(key, value, line)?,
        "n_starts" => cfg.solver.n_starts = parse_value(key, value, line)?,
        "positive_init" => cfg.solver.positive_init = parse_bool(key, value, line)?,
        "step_init" => cfg.solver.step_init = parse_value(key, value, line)?,
        "armijo_shrink" => cfg.solver.armijo_shrink = parse_value(key, value, line)?,
        "armijo_slope" => cfg.solver.armijo_slope = parse_value(key, value, line)?,
        "tol_lambda" => cfg.solver.tol_lambda = parse_value(key, value, line)?,
        "tol_kkt" => cfg.solver.tol_kkt = parse_value(key, value, line)?,
        "max_iters" => cfg.solver.max_iters = parse_value(key, value, line)?,
        "eps_grad" => cfg.solver.eps_grad = parse_value(key, value, line)?,
        "eps_u" => cfg.solver.eps_u = parse_value(key, value, line)?,
        "json_out" => cfg.json_out = value.trim().to_string(),
        "csv_out" => cfg.csv_out = value.trim().to_string(),
        "sweep_out" => cfg.sweep_out = value.trim().to_string(),
        "verify_out" => cfg.verify_out = value.trim().to_string(),
        "sweep_p" => cfg.sweep_p = parse_range(key, value, line)?,
        "sweep_q" => cfg.sweep_q = Some(parse_value(key, value, line)?),
        "theta" => cfg.theta = parse_value(key, value, line)?,
        "trials" => cfg.trials = parse_value(key, value, line)?,
        "concavity_trials" => cfg.concavity_trials = parse_value(key, value, line)?,
        other => {
            return Err(Error::Parse { line, msg: format!("unknown key '{other}'") });
        }
    }
    Ok(())
}

fn parse_range(key: &str, value: &str, line: Option<usize>) -> Result<Range> {
    Range::parse(value).ok_or_else(|| Error::Parse {
        line,
        msg: format!("invalid range '{value}' for key '{key}' (expected start:end:count)"),
    })
}

fn parse_document(cfg: &mut RunConfig, text: &str) -> Result<()> {
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line: Some(line),
                msg: format!("malformed line '{raw}' (expected key=value)"),
            });
        };
        apply_key(cfg, key.trim(), value, Some(line))?;
    }
    Ok(())
}

/// Parse a configuration document into a fully validated `RunConfig`;
/// missing keys take their documented defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    parse_document(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Format a float with 17 significant digits (lossless f64 round-trip).
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

const USAGE: &str = "usage: pqeig <solve|sweep|verify|oracle> [--config FILE] [--key value ...]
keys: dim n length p q alpha beta seed n_starts positive_init step_init
      armijo_shrink armijo_slope tol_lambda tol_kkt max_iters eps_grad eps_u
      json_out csv_out sweep_out verify_out sweep_p sweep_q theta trials
      concavity_trials";

/// Run the CLI. Exit code 0 on success, 1 on a failed verification (or a
/// runtime failure), 2 on a configuration error.
pub fn run(args: &[String]) -> i32 {
    let Some(sub) = args.first().map(String::as_str) else {
        eprintln!("{USAGE}");
        return 2;
    };
    if !matches!(sub, "solve" | "sweep" | "verify" | "oracle") {
        eprintln!("unknown subcommand '{sub}'\n{USAGE}");
        return 2;
    }
    let cfg = match config_from_args(&args[1..]) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("{err}");
            return 2;
        }
    };
    let outcome = match sub {
        "solve" => cmd_solve(&cfg),
        "sweep" => cmd_sweep(&cfg),
        "verify" => cmd_verify(&cfg),
        _ => cmd_oracle(&cfg),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("{err}");
            1
        }
    }
}

fn config_from_args(args: &[String]) -> Result<RunConfig> {
    // (key, value) pairs in order; --config files load first, flags override.
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let Some(stripped) = arg.strip_prefix("--") else {
            return Err(Error::Parse { line: None, msg: format!("unexpected argument '{arg}'") });
        };
        let (key, value) = match stripped.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                i += 1;
                let Some(value) = args.get(i) else {
                    return Err(Error::Parse {
                        line: None,
                        msg: format!("flag '--{stripped}' is missing a value"),
                    });
                };
                (stripped.to_string(), value.clone())
            }
        };
        pairs.push((key.replace('-', "_"), value));
        i += 1;
    }
    let mut cfg = RunConfig::default();
    for (_, value) in pairs.iter().filter(|(k, _)| k == "config") {
        let text = std::fs::read_to_string(value.trim()).map_err(|e| Error::Parse {
            line: None,
            msg: format!("cannot read config file '{value}': {e}"),
        })?;
        parse_document(&mut cfg, &text)?;
    }
    for (key, value) in pairs.iter().filter(|(k, _)| k != "config") {
        apply_key(&mut cfg, key, value, None)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn solve_report_json(cfg: &RunConfig, pair: &EigenPair, report: &SolverReport) -> String {
    let (kkt_u, kkt_v) = *report.kkt_history.last().expect("history never empty");
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"lambda\": {},", fmt17(pair.lambda()));
    let _ = writeln!(s, "  \"iterations\": {},", report.iterations);
    let _ = writeln!(s, "  \"converged\": {},", report.converged);
    let _ = writeln!(s, "  \"termination\": \"{}\",", report.termination.as_str());
    let _ = writeln!(s, "  \"kkt_u\": {},", fmt17(kkt_u));
    let _ = writeln!(s, "  \"kkt_v\": {},", fmt17(kkt_v));
    let _ = writeln!(s, "  \"p\": {},", fmt17(cfg.p));
    let _ = writeln!(s, "  \"q\": {},", fmt17(cfg.q));
    let _ = writeln!(s, "  \"alpha\": {},", fmt17(cfg.alpha));
    let _ = writeln!(s, "  \"beta\": {},", fmt17(cfg.beta));
    let _ = writeln!(s, "  \"dim\": {},", cfg.dim);
    let _ = writeln!(s, "  \"n\": {},", cfg.n);
    let _ = writeln!(s, "  \"seed\": {}", cfg.solver.seed);
    s.push_str("}\n");
    s
}

fn fields_csv(pair: &EigenPair) -> String {
    let grid = pair.u().grid();
    let mut s = String::new();
    s.push_str(if grid.dim() == 1 { "x,u,v\n" } else { "x,y,u,v\n" });
    for idx in 0..grid.node_count() {
        let c = grid.node_coords(idx);
        if grid.dim() == 1 {
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt17(c[0]),
                fmt17(pair.u().values()[idx]),
                fmt17(pair.v().values()[idx])
            );
        } else {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                fmt17(c[0]),
                fmt17(c[1]),
                fmt17(pair.u().values()[idx]),
                fmt17(pair.v().values()[idx])
            );
        }
    }
    s
}

fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let grid = cfg.grid()?;
    let e = cfg.exponents()?;
    let (pair, report) = solver::solve(grid, &e, &cfg.solver)?;
    std::fs::write(&cfg.json_out, solve_report_json(cfg, &pair, &report))?;
    std::fs::write(&cfg.csv_out, fields_csv(&pair))?;
    println!(
        "lambda={} iterations={} converged={} termination={}",
        fmt17(pair.lambda()),
        report.iterations,
        report.converged,
        report.termination.as_str()
    );
    Ok(0)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let grid = cfg.grid()?;
    let points = cfg.sweep_p.points();
    let runs: Vec<Result<(Exponents, EigenPair, SolverReport)>> =
        solver::run_batched(points.len(), 8, |i| {
            let p = points[i];
            let q = cfg.sweep_q.unwrap_or(p);
            let e = Exponents::new(p, q, cfg.theta * p, (1.0 - cfg.theta) * q)?;
            let (pair, report) = solver::solve(grid, &e, &cfg.solver)?;
            Ok((e, pair, report))
        });
    let mut s = String::from("p,q,alpha,beta,lambda,iterations,kkt_u,kkt_v,converged\n");
    for run in runs {
        let (e, pair, report) = run?;
        let (kkt_u, kkt_v) = *report.kkt_history.last().expect("history never empty");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            fmt17(e.p),
            fmt17(e.q),
            fmt17(e.alpha),
            fmt17(e.beta),
            fmt17(pair.lambda()),
            report.iterations,
            fmt17(kkt_u),
            fmt17(kkt_v),
            report.converged
        );
    }
    std::fs::write(&cfg.sweep_out, s)?;
    println!("sweep: {} points written to {}", points.len(), cfg.sweep_out);
    Ok(0)
}

fn cmd_oracle(cfg: &RunConfig) -> Result<i32> {
    let grid = cfg.grid()?;
    let (linear, _) = oracle::linear_first_eig(grid)?;
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"p\": {},", fmt17(cfg.p));
    let _ = writeln!(s, "  \"length\": {},", fmt17(cfg.length));
    let _ = writeln!(s, "  \"dim\": {},", cfg.dim);
    let _ = writeln!(s, "  \"n\": {},", cfg.n);
    let _ = writeln!(s, "  \"pi_p\": {},", fmt17(oracle::pi_p(cfg.p)?));
    let _ =
        writeln!(s, "  \"plap1d_lambda1\": {},", fmt17(oracle::plap1d_lambda1(cfg.p, cfg.length)?));
    let _ = writeln!(s, "  \"linear_lambda1\": {}", fmt17(linear));
    s.push_str("}\n");
    print!("{s}");
    Ok(0)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 / 9007199254740992.0
}

fn jensen_suite(trials: usize, seed: u64) -> (f64, bool) {
    let ps = [1.5, 2.0, 3.0, 4.7];
    let mut min_gap = f64::INFINITY;
    for t in 0..trials as u64 {
        let r = |k: u64| unit(splitmix64_at(seed, 8 * t + k));
        let a1 = r(0);
        let a2 = r(1);
        let x1 = [2.0 * r(2) - 1.0, 2.0 * r(3) - 1.0, 2.0 * r(4) - 1.0];
        let x2 = [2.0 * r(5) - 1.0, 2.0 * r(6) - 1.0, 2.0 * r(7) - 1.0];
        let p = ps[(t % 4) as usize];
        min_gap = min_gap.min(jensen_gap(a1, a2, &x1, &x2, p));
    }
    (min_gap, min_gap >= JENSEN_MIN_GAP)
}

fn concavity_suite(trials: usize, seed: u64) -> Result<(f64, bool)> {
    let grid = Grid::new(1, 16, 1.0)?;
    let exps = [
        Exponents::new(3.0, 3.0, 1.5, 1.5)?,
        Exponents::new(2.0, 2.0, 1.0, 1.0)?,
        Exponents::new(2.0, 3.0, 1.0, 1.5)?,
        Exponents::new(4.0, 1.5, 2.0, 0.75)?,
    ];
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials as u64 {
        let f = |k: u64| ScalarField::random(grid, splitmix64_at(seed ^ 0xC0FFEE, 4 * t + k), true);
        let e = &exps[(t % 4) as usize];
        worst = worst.max(concavity_violation(&f(0), &f(1), &f(2), &f(3), e)?);
    }
    Ok((worst, worst <= CONCAVITY_MAX_VIOLATION))
}

/// Smooth positive test pairs rescaled onto the constraint set.
fn constraint_pair(n: usize, which: usize, e: &Exponents) -> Result<(ScalarField, ScalarField)> {
    let grid = Grid::new(1, n, 1.0)?;
    let pi = std::f64::consts::PI;
    let (u, v) = match which {
        0 => (
            ScalarField::from_fn(grid, |c| c[0] * (1.0 - c[0]))?,
            ScalarField::from_fn(grid, |c| (pi * c[0]).sin())?,
        ),
        _ => (
            ScalarField::from_fn(grid, |c| c[0] * (1.0 - c[0]) * (2.0 - c[0]))?,
            ScalarField::from_fn(grid, |c| (c[0] * (1.0 - c[0])).powf(0.75))?,
        ),
    };
    let (u, v, _) = balance_project(&u, &v, e)?;
    Ok((u, v))
}

fn path_suite(e: &Exponents) -> Result<(Vec<Check>, f64, Vec<f64>)> {
    let mut checks = Vec::new();

    // proportional pairs: delta vanishes
    let (u, v) = constraint_pair(100, 0, e)?;
    let k = 1.7f64;
    let phi = u.scaled(k);
    let psi = v.scaled(k.powf(-e.alpha / e.beta));
    let prop = path_energy_check(&u, &v, &phi, &psi, e)?;
    let prop_delta = prop.delta.abs();
    checks.push(Check {
        name: "path_proportional",
        pass: prop_delta <= PATH_PROPORTIONAL_MAX,
        detail: format!("delta {}", fmt17(prop_delta)),
    });

    // genuinely different pairs: delta positive, stable under refinement
    let mut deltas = Vec::new();
    for n in [50usize, 100, 200] {
        let (u, v) = constraint_pair(n, 0, e)?;
        let (phi, psi) = constraint_pair(n, 1, e)?;
        deltas.push(path_energy_check(&u, &v, &phi, &psi, e)?.delta);
    }
    let dmin = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = deltas.iter().cloned().fold(0.0f64, f64::max);
    checks.push(Check {
        name: "path_distinct",
        pass: dmin > 0.0 && dmax / dmin < PATH_STABILITY_RATIO,
        detail: format!(
            "deltas {}",
            deltas.iter().map(|d| fmt17(*d)).collect::<Vec<_>>().join(" ")
        ),
    });

    // four-way normalization: proportional pairs have zero defect
    let (_, defect) = four_normalization(&u, &v, &phi, &psi, e)?;
    checks.push(Check {
        name: "four_normalization_proportional",
        pass: defect <= FOURNORM_PROPORTIONAL_MAX,
        detail: format!("defect {}", fmt17(defect)),
    });

    Ok((checks, prop_delta, deltas))
}

fn clamp_nonnegative(f: &ScalarField) -> ScalarField {
    let vals = f.values().iter().map(|&x| x.max(0.0)).collect();
    ScalarField::from_values(f.grid(), vals).expect("clamped field is finite")
}

fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let e = cfg.exponents()?;
    let grid = cfg.grid()?;
    let mut checks: Vec<Check> = Vec::new();

    let (min_gap, jensen_pass) = jensen_suite(cfg.trials, cfg.solver.seed);
    checks.push(Check {
        name: "jensen",
        pass: jensen_pass,
        detail: format!("trials {} min_gap {}", cfg.trials, fmt17(min_gap)),
    });

    let (max_violation, concavity_pass) = concavity_suite(cfg.concavity_trials, cfg.solver.seed)?;
    checks.push(Check {
        name: "concavity",
        pass: concavity_pass,
        detail: format!("trials {} max_violation {}", cfg.concavity_trials, fmt17(max_violation)),
    });

    let (path_checks, _, _) = path_suite(&e)?;
    checks.extend(path_checks);

    let verdict = multi_start(grid, &e, &cfg.solver)?;
    checks.push(Check {
        name: "simplicity",
        pass: verdict.simple,
        detail: format!(
            "converged {}/{} lambda_spread {} max_misfit {} sign_flip_fraction {}",
            verdict.n_converged,
            verdict.n_runs,
            fmt17(verdict.lambda_spread),
            fmt17(verdict.max_misfit),
            fmt17(verdict.sign_flip_fraction)
        ),
    });

    let converged: Vec<&EigenPair> = verdict
        .runs
        .iter()
        .flatten()
        .filter(|(_, r)| r.converged)
        .map(|(p, _)| p)
        .collect();

    // first eigenfunctions are single-signed: after positive-mean
    // normalization no node may dip below -1e-8 of the peak
    let mut worst_dip = f64::NEG_INFINITY;
    for pair in &converged {
        for field in [pair.u(), pair.v()] {
            let max = field.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = field.values().iter().cloned().fold(f64::INFINITY, f64::min);
            worst_dip = worst_dip.max(-min / max);
        }
    }
    checks.push(Check {
        name: "nonnegativity",
        pass: worst_dip <= 1e-8,
        detail: format!("worst -min/max {}", fmt17(worst_dip)),
    });

    // The two simplicity witnesses (alignment and midpoint path) must agree
    // on independently computed eigenpairs.
    if converged.len() >= 2 {
        let (_, _, misfit) = solver::align(converged[0], converged[1])?;
        let (au, av, _) = balance_project(
            &clamp_nonnegative(converged[0].u()),
            &clamp_nonnegative(converged[0].v()),
            &e,
        )?;
        let (bu, bv, _) = balance_project(
            &clamp_nonnegative(converged[1].u()),
            &clamp_nonnegative(converged[1].v()),
            &e,
        )?;
        let report = path_energy_check(&au, &av, &bu, &bv, &e)?;
        checks.push(Check {
            name: "cross_witness",
            pass: misfit < solver::MISFIT_TOL && report.delta.abs() < CROSS_WITNESS_DELTA_MAX,
            detail: format!("misfit {} path_delta {}", fmt17(misfit), fmt17(report.delta)),
        });

        // The midpoint pair is admissible, so its quotient cannot undercut
        // the computed first eigenvalue.
        let (w1, w2) = midpoint_pair(&au, &bu, e.p, &av, &bv, e.q)?;
        let quotient = energy_total(&w1, &w2, &e)? / coupling(&w1, &w2, &e)?;
        let lambda_min = converged[0].lambda().min(converged[1].lambda());
        checks.push(Check {
            name: "midpoint_quotient_bound",
            pass: quotient >= lambda_min * (1.0 - 1e-8),
            detail: format!("quotient {} vs lambda {}", fmt17(quotient), fmt17(lambda_min)),
        });
    }

    let all_pass = checks.iter().all(|c| c.pass);
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"trials\": {},", cfg.trials);
    let _ = writeln!(s, "  \"concavity_trials\": {},", cfg.concavity_trials);
    let _ = writeln!(s, "  \"seed\": {},", cfg.solver.seed);
    let _ = writeln!(s, "  \"jensen_min_gap\": {},", fmt17(min_gap));
    let _ = writeln!(s, "  \"concavity_max_violation\": {},", fmt17(max_violation));
    let _ = writeln!(
        s,
        "  \"simplicity\": \"{}\",",
        if verdict.simple { "simple" } else { "not-simple" }
    );
    let _ = writeln!(s, "  \"lambda_spread\": {},", fmt17(verdict.lambda_spread));
    let _ = writeln!(s, "  \"max_misfit\": {},", fmt17(verdict.max_misfit));
    let _ = writeln!(s, "  \"sign_flip_fraction\": {},", fmt17(verdict.sign_flip_fraction));
    s.push_str("  \"checks\": [\n");
    for (i, c) in checks.iter().enumerate() {
        let comma = if i + 1 == checks.len() { "" } else { "," };
        let _ = writeln!(
            s,
            "    {{\"name\": \"{}\", \"pass\": {}, \"detail\": \"{}\"}}{comma}",
            c.name,
            c.pass,
            json_escape(&c.detail)
        );
    }
    s.push_str("  ],\n");
    let _ = writeln!(s, "  \"pass\": {all_pass}");
    s.push_str("}\n");
    std::fs::write(&cfg.verify_out, &s)?;

    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if all_pass { 0 } else { 1 })
}
