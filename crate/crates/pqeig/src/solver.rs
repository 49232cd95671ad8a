//! Minimization of the total energy over the coupling constraint set by
//! projected gradient descent.
//!
//! The projection exploits the separate homogeneity of energy and coupling:
//! for fields with positive energies and positive coupling G0 the rescale
//! (s u, t v) that minimizes I subject to the constraint has the closed form
//!
//! ```text
//! mu = E_p(u)^(alpha/p) * E_q(v)^(beta/q) / G0,
//! s  = (mu / E_p(u))^(1/p),   t = (mu / E_q(v))^(1/q),
//! ```
//!
//! (equivalently mu = 1 / (G0 (alpha/(pA))^(alpha/p) (beta/(qB))^(beta/q))
//! with A = (alpha/p) E_p, B = (beta/q) E_q). The projected pair satisfies
//! coupling = 1 and I = mu, so the eigenvalue estimate is available at every
//! iterate. Inputs are divided by their max-abs first; that keeps the
//! formulas in range and makes the projected pair exactly invariant under
//! power-of-two input scalings (scaling by 2^k commutes with rounding), and
//! invariant to a unit in the last place otherwise.
//!
//! Descent direction is the Euclidean gradient of the Lagrangian
//! I - lambda_k G at the current multiplier estimate; the step is a
//! Barzilai-Borwein trial length backtracked under an Armijo rule on the
//! re-projected eigenvalue, so the lambda trace is strictly decreasing until
//! no decreasing step exists. At a balanced point the directional derivative
//! of the projected eigenvalue along -g is -|g|^2, which is the slope the
//! Armijo test uses.
//!
//! The eigenvalue merit bottoms out at absolute noise ~eps_f64 * lambda, so
//! Armijo acceptance can stall while the stationarity residual is still
//! above tol_kkt (the per-step decrease t |g|^2 falls below the noise before
//! |g| does). When that happens the loop switches to a polish phase: same
//! direction and BB trial steps, but acceptance on monotone decrease of
//! |g|^2 itself, which is computable to full relative precision. Eigenvalue
//! drift per polish step is O(eps_f64 * lambda), within the documented
//! 1e-12 per-step slack of the lambda history.

use crate::error::{Error, Result};
use crate::functional::{
    coupling, dirichlet_energy, energy_total, grad_coupling, grad_energy, Exponents,
    EPS_GRAD_DEFAULT, EPS_U_DEFAULT,
};
use crate::mesh::{derive_seed, Grid, ScalarField};

/// Relative eigenvalue spread below which a multi-start family counts as a
/// single eigenvalue.
pub const SPREAD_TOL: f64 = 1e-6;
/// Alignment misfit below which two eigenfunction pairs count as
/// proportional.
pub const MISFIT_TOL: f64 = 1e-3;

const LINE_SEARCH_FLOOR: f64 = 1e-18;
const MAX_START_ATTEMPTS: u64 = 64;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub step_init: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    /// Relative per-step eigenvalue-change tolerance.
    pub tol_lambda: f64,
    /// Stationarity-residual tolerance (both components).
    pub tol_kkt: f64,
    pub max_iters: usize,
    pub eps_grad: f64,
    pub eps_u: f64,
    pub seed: u64,
    pub n_starts: usize,
    pub positive_init: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step_init: 1.0,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            tol_lambda: 1e-10,
            tol_kkt: 1e-6,
            max_iters: 50_000,
            eps_grad: EPS_GRAD_DEFAULT,
            eps_u: EPS_U_DEFAULT,
            seed: 0,
            n_starts: 10,
            positive_init: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ParameterDomain(msg));
        let step_ok = self.step_init > 0.0;
        if !step_ok {
            return bad(format!("step_init must be > 0, got {}", self.step_init));
        }
        let shrink_ok = self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0;
        if !shrink_ok {
            return bad(format!("armijo_shrink must be in (0,1), got {}", self.armijo_shrink));
        }
        let slope_ok = self.armijo_slope > 0.0 && self.armijo_slope < 1.0;
        if !slope_ok {
            return bad(format!("armijo_slope must be in (0,1), got {}", self.armijo_slope));
        }
        let tols_ok = self.tol_lambda > 0.0 && self.tol_kkt > 0.0;
        if !tols_ok {
            return bad("tolerances must be > 0".into());
        }
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1".into());
        }
        if self.eps_grad < 0.0 || self.eps_u < 0.0 {
            return bad("regularizations must be >= 0".into());
        }
        if self.n_starts < 1 {
            return bad("n_starts must be >= 1".into());
        }
        Ok(())
    }
}

/// A computed eigenpair on the constraint set: coupling(u, v) = 1 (to 1e-8)
/// and lambda = I(u, v) (to 1e-10 relative), lambda > 0.
#[derive(Clone, Debug)]
pub struct EigenPair {
    u: ScalarField,
    v: ScalarField,
    lambda: f64,
    exponents: Exponents,
}

impl EigenPair {
    pub fn new(
        u: ScalarField,
        v: ScalarField,
        lambda: f64,
        exponents: Exponents,
    ) -> Result<EigenPair> {
        let g = coupling(&u, &v, &exponents)?;
        if (g - 1.0).abs() > 1e-8 {
            return Err(Error::Precondition(format!(
                "pair not on the constraint set: coupling = {g}"
            )));
        }
        let energy = energy_total(&u, &v, &exponents)?;
        let lambda_ok = lambda > 0.0 && (lambda - energy).abs() <= 1e-10 * lambda;
        if !lambda_ok {
            return Err(Error::Precondition(format!(
                "lambda = {lambda} does not match energy {energy}"
            )));
        }
        Ok(EigenPair { u, v, lambda, exponents })
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn v(&self) -> &ScalarField {
        &self.v
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn exponents(&self) -> Exponents {
        self.exponents
    }

    /// Flip the pair jointly so u has positive mean ((u, v) and (-u, -v)
    /// solve the same problem).
    pub fn sign_normalized(self) -> EigenPair {
        if self.u.mean() < 0.0 {
            EigenPair {
                u: self.u.scaled(-1.0),
                v: self.v.scaled(-1.0),
                lambda: self.lambda,
                exponents: self.exponents,
            }
        } else {
            self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// No further decreasing step exists and the residual tolerance was not
    /// reached.
    LambdaStalled,
    /// Eigenvalue change and stationarity residual both within tolerance.
    KktMet,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::LambdaStalled => "lambda-stalled",
            Termination::KktMet => "kkt-met",
            Termination::MaxIters => "max-iters",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverReport {
    /// Number of accepted gradient steps.
    pub iterations: usize,
    /// Eigenvalue after each projection, initial point included.
    pub lambda_history: Vec<f64>,
    /// Stationarity residual norms alongside each eigenvalue.
    pub kkt_history: Vec<(f64, f64)>,
    pub converged: bool,
    pub termination: Termination,
}

/// Rescale (u, v) onto the constraint set, minimizing the total energy among
/// rescalings. Returns the projected pair and its energy mu.
pub fn balance_project(
    u: &ScalarField,
    v: &ScalarField,
    e: &Exponents,
) -> Result<(ScalarField, ScalarField, f64)> {
    if u.grid() != v.grid() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", u.grid(), v.grid())));
    }
    let mu_u = u.max_abs();
    let mu_v = v.max_abs();
    if mu_u == 0.0 || mu_v == 0.0 {
        return Err(Error::ProjectionInfeasible("zero field".into()));
    }
    let un = u.scaled(1.0 / mu_u);
    let vn = v.scaled(1.0 / mu_v);
    let ep = dirichlet_energy(&un, e.p)?;
    let eq = dirichlet_energy(&vn, e.q)?;
    let g0 = coupling(&un, &vn, e)?;
    let feasible = g0.is_finite() && g0 > 0.0;
    if !feasible {
        return Err(Error::ProjectionInfeasible(format!("coupling = {g0} <= 0")));
    }
    if ep == 0.0 || eq == 0.0 {
        return Err(Error::ProjectionInfeasible("zero Dirichlet energy".into()));
    }
    let mu = ep.powf(e.alpha / e.p) * eq.powf(e.beta / e.q) / g0;
    let s = (mu / ep).powf(1.0 / e.p);
    let t = (mu / eq).powf(1.0 / e.q);
    if !mu.is_finite() || !s.is_finite() || !t.is_finite() {
        return Err(Error::ProjectionInfeasible(format!("non-finite scales (mu = {mu})")));
    }
    Ok((un.scaled(s), vn.scaled(t), mu))
}

struct GradEval {
    gu: ScalarField,
    gv: ScalarField,
    norm2: f64,
    kkt: (f64, f64),
}

/// Lagrangian gradient of I - lambda G at (u, v). The stationarity residual
/// is accumulated with the same arithmetic as [`crate::functional::kkt_residual_with_eps`]
/// so the reported norms are bit-identical to an external recomputation.
fn lagrangian_grad(
    u: &ScalarField,
    v: &ScalarField,
    lambda: f64,
    e: &Exponents,
    cfg: &SolverConfig,
) -> Result<GradEval> {
    let ge_u = grad_energy(u, e.p, cfg.eps_grad)?;
    let ge_v = grad_energy(v, e.q, cfg.eps_grad)?;
    let (gc_u, gc_v) = grad_coupling(u, v, e, cfg.eps_u)?;
    let n = u.len();
    let mut gu = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let mut nu2 = 0.0;
    let mut nv2 = 0.0;
    let mut ru2 = 0.0;
    let mut rv2 = 0.0;
    for i in 0..n {
        let a = e.alpha / e.p * ge_u.values()[i] - lambda * gc_u.values()[i];
        let b = e.beta / e.q * ge_v.values()[i] - lambda * gc_v.values()[i];
        gu[i] = a;
        gv[i] = b;
        nu2 += a * a;
        nv2 += b * b;
        let ru = ge_u.values()[i] / e.p - lambda * gc_u.values()[i] / e.alpha;
        let rv = ge_v.values()[i] / e.q - lambda * gc_v.values()[i] / e.beta;
        ru2 += ru * ru;
        rv2 += rv * rv;
    }
    Ok(GradEval {
        gu: ScalarField::from_values(u.grid(), gu)?,
        gv: ScalarField::from_values(u.grid(), gv)?,
        norm2: nu2 + nv2,
        kkt: (ru2.sqrt(), rv2.sqrt()),
    })
}

/// Minimize I over the constraint set starting from a given (not necessarily
/// feasible) pair. The pair is balance-projected first; everything after
/// that first projection is a deterministic function of the projected point.
pub fn solve_from(
    u0: &ScalarField,
    v0: &ScalarField,
    e: &Exponents,
    cfg: &SolverConfig,
) -> Result<(EigenPair, SolverReport)> {
    cfg.validate()?;
    let (mut u, mut v, mut lambda) = balance_project(u0, v0, e)?;
    let mut grad = lagrangian_grad(&u, &v, lambda, e, cfg)?;
    let mut lambda_history = vec![lambda];
    let mut kkt_history = vec![grad.kkt];
    let mut prev: Option<(ScalarField, ScalarField, ScalarField, ScalarField)> = None;
    let mut last_step = cfg.step_init;
    let mut iterations = 0usize;
    let mut polishing = false;
    let termination;

    let kkt_ok = |kkt: (f64, f64)| kkt.0 < cfg.tol_kkt && kkt.1 < cfg.tol_kkt;

    loop {
        if iterations > 0 {
            let delta = lambda_history[iterations - 1] - lambda;
            if delta.abs() <= cfg.tol_lambda * lambda && kkt_ok(grad.kkt) {
                termination = Termination::KktMet;
                break;
            }
        }
        if iterations >= cfg.max_iters {
            termination = Termination::MaxIters;
            break;
        }
        if grad.norm2 == 0.0 {
            // exact critical point
            termination = Termination::KktMet;
            break;
        }

        // Barzilai-Borwein trial step from the previous displacement.
        let mut t = match &prev {
            Some((pu, pv, pgu, pgv)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..u.len() {
                    let su = u.values()[i] - pu.values()[i];
                    let sv = v.values()[i] - pv.values()[i];
                    let yu = grad.gu.values()[i] - pgu.values()[i];
                    let yv = grad.gv.values()[i] - pgv.values()[i];
                    ss += su * su + sv * sv;
                    sy += su * yu + sv * yv;
                }
                if sy > 0.0 {
                    (ss / sy).clamp(1e-14, 1e10)
                } else {
                    (last_step / cfg.armijo_shrink).clamp(1e-14, 1e10)
                }
            }
            None => cfg.step_init,
        };

        // A trial step is evaluated by re-projecting; acceptance is the
        // Armijo decrease of the eigenvalue, or in the polish phase a
        // sufficient decrease of the residual norm (with the eigenvalue
        // allowed to drift by one part in 1e13, below the documented
        // history slack).
        let mut accepted = None;
        while t >= LINE_SEARCH_FLOOR {
            let mut tu = Vec::with_capacity(u.len());
            let mut tv = Vec::with_capacity(u.len());
            for i in 0..u.len() {
                tu.push(u.values()[i] - t * grad.gu.values()[i]);
                tv.push(v.values()[i] - t * grad.gv.values()[i]);
            }
            let feasible = ScalarField::from_values(u.grid(), tu)
                .and_then(|fu| ScalarField::from_values(v.grid(), tv).map(|fv| (fu, fv)))
                .and_then(|(fu, fv)| balance_project(&fu, &fv, e));
            if let Ok((cu, cv, mu)) = feasible {
                if mu.is_finite() {
                    if !polishing {
                        if mu <= lambda - cfg.armijo_slope * t * grad.norm2 {
                            accepted = Some((cu, cv, mu, t, None));
                            break;
                        }
                    } else if mu <= lambda + 1e-13 * lambda {
                        let trial_grad = lagrangian_grad(&cu, &cv, mu, e, cfg)?;
                        if trial_grad.norm2 <= (1.0 - 1e-6) * grad.norm2 {
                            accepted = Some((cu, cv, mu, t, Some(trial_grad)));
                            break;
                        }
                    }
                }
            }
            t *= cfg.armijo_shrink;
        }

        match accepted {
            None if !polishing && !kkt_ok(grad.kkt) => {
                // The eigenvalue merit has hit its floating-point floor with
                // the residual still out of tolerance: switch to residual
                // polishing and retry.
                polishing = true;
                continue;
            }
            None => {
                // No residual-decreasing step either; if the residual is
                // already in tolerance this is convergence.
                termination =
                    if kkt_ok(grad.kkt) { Termination::KktMet } else { Termination::LambdaStalled };
                break;
            }
            Some((cu, cv, mu, step, trial_grad)) => {
                let new_grad = match trial_grad {
                    Some(g) => g,
                    None => lagrangian_grad(&cu, &cv, mu, e, cfg)?,
                };
                prev = Some((
                    std::mem::replace(&mut u, cu),
                    std::mem::replace(&mut v, cv),
                    std::mem::replace(&mut grad.gu, new_grad.gu),
                    std::mem::replace(&mut grad.gv, new_grad.gv),
                ));
                grad.norm2 = new_grad.norm2;
                grad.kkt = new_grad.kkt;
                lambda = mu;
                last_step = step;
                iterations += 1;
                lambda_history.push(lambda);
                kkt_history.push(grad.kkt);
            }
        }
    }

    let converged = termination == Termination::KktMet;
    let pair = EigenPair::new(u, v, lambda, *e)?;
    Ok((pair, SolverReport { iterations, lambda_history, kkt_history, converged, termination }))
}

/// Minimize I over the constraint set from a seeded random start
/// (re-randomizing a bounded number of times if the start is infeasible).
pub fn solve(grid: Grid, e: &Exponents, cfg: &SolverConfig) -> Result<(EigenPair, SolverReport)> {
    cfg.validate()?;
    for attempt in 0..MAX_START_ATTEMPTS {
        let u0 = ScalarField::random(grid, derive_seed(cfg.seed, 2 * attempt), cfg.positive_init);
        let v0 =
            ScalarField::random(grid, derive_seed(cfg.seed, 2 * attempt + 1), cfg.positive_init);
        match solve_from(&u0, &v0, e, cfg) {
            Err(Error::ProjectionInfeasible(_)) => continue,
            other => return other,
        }
    }
    Err(Error::SolverFailed(format!(
        "no feasible starting pair in {MAX_START_ATTEMPTS} attempts (seed {})",
        cfg.seed
    )))
}

/// Best proportionality constants between two eigenpairs and the residual
/// misfit: k1 minimizes |a.u - k1 b.u|, k2 likewise for v, and the misfit is
/// the larger relative residual.
pub fn align(a: &EigenPair, b: &EigenPair) -> Result<(f64, f64, f64)> {
    if a.u.grid() != b.u.grid() {
        return Err(Error::ShapeMismatch("eigenpairs on different grids".into()));
    }
    if a.exponents != b.exponents {
        return Err(Error::Precondition("eigenpairs with different exponents".into()));
    }
    let bu2 = b.u.dot(&b.u);
    let bv2 = b.v.dot(&b.v);
    if bu2 == 0.0 || bv2 == 0.0 {
        return Err(Error::DegenerateAlignment("zero field in b".into()));
    }
    let k1 = a.u.dot(&b.u) / bu2;
    let k2 = a.v.dot(&b.v) / bv2;
    let res = |x: &ScalarField, k: f64, y: &ScalarField| -> f64 {
        let mut acc = 0.0;
        for i in 0..x.len() {
            let d = x.values()[i] - k * y.values()[i];
            acc += d * d;
        }
        acc.sqrt() / x.norm2()
    };
    let misfit = res(&a.u, k1, &b.u).max(res(&a.v, k2, &b.v));
    Ok((k1, k2, misfit))
}

/// One multi-start run; `None` when no feasible start was found.
pub type StartResult = Option<(EigenPair, SolverReport)>;

#[derive(Clone, Debug)]
pub struct SimplicityVerdict {
    pub n_runs: usize,
    pub n_converged: usize,
    /// Eigenvalues of the converged runs, in seed order.
    pub lambdas: Vec<f64>,
    /// Max pairwise relative eigenvalue spread among converged runs.
    pub lambda_spread: f64,
    /// Max pairwise alignment misfit after sign normalization.
    pub max_misfit: f64,
    /// Largest fraction of nodes disagreeing with the majority sign of
    /// their field, over all converged eigenfunctions. Zero for
    /// single-signed eigenfunctions.
    pub sign_flip_fraction: f64,
    pub simple: bool,
    /// All runs in seed order (sign-normalized when converged).
    pub runs: Vec<StartResult>,
}

fn flipped_fraction(field: &ScalarField) -> f64 {
    let pos = field.values().iter().filter(|&&x| x > 0.0).count();
    let neg = field.values().iter().filter(|&&x| x < 0.0).count();
    let minority = pos.min(neg);
    minority as f64 / field.len() as f64
}

/// Evaluate `f(0..count)` on scoped threads, `batch` at a time, collecting
/// results in index order. Each call must be independent and deterministic,
/// so scheduling cannot influence the output.
pub(crate) fn run_batched<T, F>(count: usize, batch: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let f = &f;
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let end = (start + batch).min(count);
        let mut results = std::thread::scope(|scope| {
            let handles: Vec<_> = (start..end).map(|k| scope.spawn(move || f(k))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker thread panicked"))
                .collect::<Vec<T>>()
        });
        out.append(&mut results);
        start = end;
    }
    out
}

/// Run `solve` from seeds seed, seed+1, ... and test whether all converged
/// runs found the same eigenpair up to scaling.
pub fn multi_start(grid: Grid, e: &Exponents, cfg: &SolverConfig) -> Result<SimplicityVerdict> {
    cfg.validate()?;
    let n_runs = cfg.n_starts;

    // Runs share nothing; farm them out in bounded batches. Results are
    // placed by seed order, so scheduling cannot affect output.
    let outcomes = run_batched(n_runs, 8, |k| {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = cfg.seed.wrapping_add(k as u64);
        solve(grid, e, &run_cfg)
    });
    let mut runs: Vec<StartResult> = Vec::with_capacity(n_runs);
    for outcome in outcomes {
        match outcome {
            Ok((pair, report)) => runs.push(Some((pair.sign_normalized(), report))),
            Err(Error::SolverFailed(_)) => runs.push(None),
            Err(other) => return Err(other),
        }
    }

    let converged: Vec<&EigenPair> = runs
        .iter()
        .flatten()
        .filter(|(_, report)| report.converged)
        .map(|(pair, _)| pair)
        .collect();
    if converged.is_empty() {
        return Err(Error::AllFailed(format!("none of {n_runs} starts converged")));
    }

    let lambdas: Vec<f64> = converged.iter().map(|p| p.lambda()).collect();
    let lam_min = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let lam_max = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lambda_spread = (lam_max - lam_min) / lam_min;

    let mut max_misfit = 0.0f64;
    for i in 0..converged.len() {
        for j in i + 1..converged.len() {
            let (_, _, misfit) = align(converged[i], converged[j])?;
            max_misfit = max_misfit.max(misfit);
        }
    }

    let mut sign_flip_fraction = 0.0f64;
    for pair in &converged {
        sign_flip_fraction = sign_flip_fraction
            .max(flipped_fraction(pair.u()))
            .max(flipped_fraction(pair.v()));
    }

    Ok(SimplicityVerdict {
        n_runs,
        n_converged: converged.len(),
        lambdas,
        lambda_spread,
        max_misfit,
        sign_flip_fraction,
        simple: lambda_spread < SPREAD_TOL && max_misfit < MISFIT_TOL,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linear_first_eig;
    use proptest::prelude::*;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n, 1.0).unwrap()
    }

    fn e22() -> Exponents {
        Exponents::new(2.0, 2.0, 1.0, 1.0).unwrap()
    }

    fn positive_pair(grid: Grid, seed: u64) -> (ScalarField, ScalarField) {
        (ScalarField::random(grid, seed, true), ScalarField::random(grid, seed + 999, true))
    }

    #[test]
    fn balance_symmetric_fixed_point() {
        // p = q, alpha = beta = p/2, u = v already on the constraint set:
        // scales are 1 and mu = A + B = E_p.
        let e = Exponents::new(3.0, 3.0, 1.5, 1.5).unwrap();
        let g = grid1(30);
        let raw = ScalarField::from_fn(g, |c| c[0] * (1.0 - c[0]) + 0.1).unwrap();
        let c0 = coupling(&raw, &raw, &e).unwrap();
        let u = raw.scaled(c0.powf(-1.0 / 3.0)); // G is 3-homogeneous here
        let g_now = coupling(&u, &u, &e).unwrap();
        assert!((g_now - 1.0).abs() < 1e-12);
        let (pu, pv, mu) = balance_project(&u, &u, &e).unwrap();
        let a = e.alpha / e.p * dirichlet_energy(&u, e.p).unwrap();
        assert!((mu - 2.0 * a).abs() <= 1e-12 * mu);
        for i in 0..u.len() {
            assert!((pu.values()[i] - u.values()[i]).abs() <= 1e-12 * u.values()[i].abs());
            assert!((pv.values()[i] - u.values()[i]).abs() <= 1e-12 * u.values()[i].abs());
        }
    }

    #[test]
    fn balance_lands_on_constraint_set() {
        let e = Exponents::new(2.0, 3.0, 1.0, 1.5).unwrap();
        let (u, v) = positive_pair(grid1(25), 11);
        let (pu, pv, mu) = balance_project(&u, &v, &e).unwrap();
        assert!((coupling(&pu, &pv, &e).unwrap() - 1.0).abs() < 1e-12);
        let i_total = energy_total(&pu, &pv, &e).unwrap();
        assert!((i_total - mu).abs() <= 1e-12 * mu);
    }

    #[test]
    fn balance_rejects_infeasible_input() {
        let e = e22();
        let g = grid1(10);
        let zero = ScalarField::zeros(g);
        let (u, v) = positive_pair(g, 5);
        assert!(matches!(balance_project(&zero, &v, &e), Err(Error::ProjectionInfeasible(_))));
        // opposite signs: negative coupling
        let neg = v.scaled(-1.0);
        assert!(matches!(balance_project(&u, &neg, &e), Err(Error::ProjectionInfeasible(_))));
    }

    #[test]
    fn balance_matches_grid_search() {
        // Brute-force search over (log s, log t) within the feasibility band.
        let e = Exponents::new(2.0, 3.0, 1.0, 1.5).unwrap();
        let (u, v) = positive_pair(grid1(20), 42);
        let (_, _, mu) = balance_project(&u, &v, &e).unwrap();
        let a = e.alpha / e.p * dirichlet_energy(&u, e.p).unwrap();
        let b = e.beta / e.q * dirichlet_energy(&v, e.q).unwrap();
        let g0 = coupling(&u, &v, &e).unwrap();
        let m = 400;
        let (lo, hi) = (-3.0, 3.0);
        let delta = (hi - lo) / (m - 1) as f64;
        let band = 0.5 * (e.alpha + e.beta) * delta;
        let mut best = f64::INFINITY;
        let mut best_pt = (0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let ls = lo + i as f64 * delta;
                let lt = lo + j as f64 * delta;
                if (e.alpha * ls + e.beta * lt + g0.ln()).abs() <= band {
                    let obj = (e.p * ls).exp() * a + (e.q * lt).exp() * b;
                    if obj < best {
                        best = obj;
                        best_pt = (ls, lt);
                    }
                }
            }
        }
        assert!((best - mu).abs() <= 0.05 * mu, "grid {best} vs closed form {mu}");
        // the argmin must sit at the closed-form scales
        let s_exact = ((mu / dirichlet_energy(&u, e.p).unwrap()).ln()) / e.p;
        let t_exact = ((mu / dirichlet_energy(&v, e.q).unwrap()).ln()) / e.q;
        assert!((best_pt.0 - s_exact).abs() <= 2.0 * delta + band / e.alpha);
        assert!((best_pt.1 - t_exact).abs() <= 2.0 * delta + band / e.beta);
    }

    #[test]
    fn balance_bitwise_invariant_under_pow2_scaling() {
        let e = Exponents::new(2.0, 3.0, 1.0, 1.5).unwrap();
        let (u, v) = positive_pair(grid1(23), 3);
        let (pu, pv, mu) = balance_project(&u, &v, &e).unwrap();
        for (s, t) in [(2.0, 0.25), (1024.0, 1.0 / 4096.0), (0.5, 8.0)] {
            let (qu, qv, nu) = balance_project(&u.scaled(s), &v.scaled(t), &e).unwrap();
            assert_eq!(pu.values(), qu.values());
            assert_eq!(pv.values(), qv.values());
            assert_eq!(mu, nu);
        }
    }

    #[test]
    fn solve_matches_linear_oracle_1d() {
        let grid = grid1(50);
        let e = e22();
        let cfg = SolverConfig::default();
        let (pair, report) = solve(grid, &e, &cfg).unwrap();
        assert!(report.converged);
        assert_eq!(report.termination, Termination::KktMet);
        assert_eq!(report.lambda_history.len(), report.iterations + 1);
        assert_eq!(report.kkt_history.len(), report.iterations + 1);
        let (lam_ref, _) = linear_first_eig(grid).unwrap();
        assert!(
            (pair.lambda() - lam_ref).abs() <= 1e-6 * lam_ref,
            "{} vs {}",
            pair.lambda(),
            lam_ref
        );
        // monotone lambda trace
        for w in report.lambda_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        let (ku, kv) = report.kkt_history[report.iterations];
        assert!(ku <= cfg.tol_kkt && kv <= cfg.tol_kkt);
    }

    #[test]
    fn solve_nonlinear_converges_through_residual_polish() {
        // p = 3 exhausts the eigenvalue merit before the residual tolerance;
        // the polish phase must finish the job.
        let grid = grid1(40);
        let e = Exponents::new(3.0, 3.0, 1.5, 1.5).unwrap();
        let cfg = SolverConfig { seed: 3, ..SolverConfig::default() };
        let (pair, report) = solve(grid, &e, &cfg).unwrap();
        assert!(report.converged, "termination {:?}", report.termination);
        let (ku, kv) = *report.kkt_history.last().unwrap();
        assert!(ku < cfg.tol_kkt && kv < cfg.tol_kkt);
        // reported norms match an external recomputation bitwise
        let (ru, rv) =
            crate::functional::kkt_residual(pair.u(), pair.v(), pair.lambda(), &e).unwrap();
        assert_eq!((ku, kv), (ru, rv));
        // lambda history nonincreasing within the documented slack
        for w in report.lambda_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn solve_is_deterministic_through_the_polish_phase() {
        let grid = grid1(40);
        let e = Exponents::new(3.0, 3.0, 1.5, 1.5).unwrap();
        let cfg = SolverConfig { seed: 3, ..SolverConfig::default() };
        let (pair_a, rep_a) = solve(grid, &e, &cfg).unwrap();
        let (pair_b, rep_b) = solve(grid, &e, &cfg).unwrap();
        assert_eq!(rep_a.lambda_history, rep_b.lambda_history);
        assert_eq!(rep_a.kkt_history, rep_b.kkt_history);
        assert_eq!(pair_a.u().values(), pair_b.u().values());
    }

    #[test]
    fn solve_signed_init_reaches_same_eigenvalue() {
        let grid = grid1(40);
        let e = e22();
        let cfg = SolverConfig { positive_init: false, seed: 2, ..SolverConfig::default() };
        let (pair, report) = solve(grid, &e, &cfg).unwrap();
        assert!(report.converged);
        let (lam_ref, _) = linear_first_eig(grid).unwrap();
        assert!((pair.lambda() - lam_ref).abs() <= 1e-5 * lam_ref);
    }

    #[test]
    fn solve_iterates_invariant_under_pow2_start_scaling() {
        let grid = grid1(30);
        let e = Exponents::new(2.0, 3.0, 1.0, 1.5).unwrap();
        let cfg = SolverConfig { max_iters: 400, tol_kkt: 1e-4, ..SolverConfig::default() };
        let (u0, v0) = positive_pair(grid, 17);
        let (pair_a, rep_a) = solve_from(&u0, &v0, &e, &cfg).unwrap();
        let (pair_b, rep_b) =
            solve_from(&u0.scaled(1024.0), &v0.scaled(1.0 / 32.0), &e, &cfg).unwrap();
        assert_eq!(rep_a.lambda_history, rep_b.lambda_history);
        assert_eq!(pair_a.u().values(), pair_b.u().values());
        assert_eq!(pair_a.v().values(), pair_b.v().values());
    }

    #[test]
    fn align_identity_and_scaling() {
        let grid = grid1(40);
        let e = Exponents::new(2.0, 3.0, 1.0, 1.5).unwrap();
        let cfg = SolverConfig::default();
        let (pair, _) = solve(grid, &e, &cfg).unwrap();
        let (k1, k2, misfit) = align(&pair, &pair).unwrap();
        assert!((k1 - 1.0).abs() < 1e-12 && (k2 - 1.0).abs() < 1e-12);
        assert!(misfit < 1e-12);

        // b = (2u, 2^(-alpha/beta) v) stays on the constraint set; the
        // closed form is oriented so k1 is the reciprocal factor 1/2.
        let k = 2.0f64;
        let kv = k.powf(-e.alpha / e.beta);
        let (bu, bv) = (pair.u().scaled(k), pair.v().scaled(kv));
        let lam_b = energy_total(&bu, &bv, &e).unwrap();
        let b = EigenPair::new(bu, bv, lam_b, e).unwrap();
        let (k1, k2, misfit) = align(&pair, &b).unwrap();
        assert!((k1 - 0.5).abs() < 1e-12, "k1 = {k1}");
        assert!((k2 - 1.0 / kv).abs() < 1e-10, "k2 = {k2}");
        assert!(misfit < 1e-12);
    }

    #[test]
    fn align_distinct_modes_has_large_misfit() {
        // sin(k pi x) sampled at the nodes are exact discrete eigenvectors;
        // distinct modes are orthogonal, so the misfit saturates at 1.
        let grid = grid1(31);
        let e = e22();
        let pi = std::f64::consts::PI;
        let make = |k: usize| {
            let raw = ScalarField::from_fn(grid, |c| (k as f64 * pi * c[0]).sin()).unwrap();
            let (u, v, mu) = balance_project(&raw, &raw, &e).unwrap();
            EigenPair::new(u, v, mu, e).unwrap()
        };
        let first = make(1);
        let second = make(2);
        let (_, _, misfit) = align(&first, &second).unwrap();
        assert!(misfit > 0.5, "misfit = {misfit}");
    }

    #[test]
    fn multi_start_single_run_trivially_simple() {
        let cfg = SolverConfig { n_starts: 1, ..SolverConfig::default() };
        let verdict = multi_start(grid1(30), &e22(), &cfg).unwrap();
        assert!(verdict.simple);
        assert_eq!(verdict.n_converged, 1);
        assert_eq!(verdict.lambda_spread, 0.0);
        assert_eq!(verdict.max_misfit, 0.0);
    }

    #[test]
    fn multi_start_linear_case_is_simple() {
        let cfg = SolverConfig { n_starts: 4, ..SolverConfig::default() };
        let verdict = multi_start(grid1(60), &e22(), &cfg).unwrap();
        assert_eq!(verdict.n_converged, 4);
        assert!(verdict.simple, "spread {} misfit {}", verdict.lambda_spread, verdict.max_misfit);
        assert!(verdict.lambda_spread < 1e-8);
        assert_eq!(verdict.sign_flip_fraction, 0.0);
    }

    #[test]
    fn multi_start_asymmetric_exponents() {
        let e = Exponents::new(2.0, 3.0, 1.0, 1.5).unwrap();
        let cfg = SolverConfig { n_starts: 3, ..SolverConfig::default() };
        let verdict = multi_start(grid1(50), &e, &cfg).unwrap();
        assert!(verdict.simple, "spread {} misfit {}", verdict.lambda_spread, verdict.max_misfit);
        assert_eq!(verdict.sign_flip_fraction, 0.0);
    }

    #[test]
    fn multi_start_2d_linear_case() {
        let grid = Grid::new(2, 12, 1.0).unwrap();
        let cfg = SolverConfig { n_starts: 2, ..SolverConfig::default() };
        let verdict = multi_start(grid, &e22(), &cfg).unwrap();
        assert!(verdict.simple);
        assert_eq!(verdict.sign_flip_fraction, 0.0);
        let (lam_ref, _) = linear_first_eig(grid).unwrap();
        assert!((verdict.lambdas[0] - lam_ref).abs() <= 1e-6 * lam_ref);
    }

    #[test]
    fn multi_start_all_unconverged_is_an_error() {
        // one iteration is never enough to meet the tolerances
        let cfg = SolverConfig { n_starts: 3, max_iters: 1, ..SolverConfig::default() };
        assert!(matches!(multi_start(grid1(20), &e22(), &cfg), Err(Error::AllFailed(_))));
    }

    #[test]
    fn eigenpair_rejects_off_constraint_input() {
        let grid = grid1(12);
        let e = e22();
        let (u, v) = positive_pair(grid, 1);
        let lam = energy_total(&u, &v, &e).unwrap();
        assert!(matches!(EigenPair::new(u, v, lam, e), Err(Error::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn balance_projection_idempotent(seed in 0u64..500) {
            let e = Exponents::new(2.0, 3.0, 1.0, 1.5).unwrap();
            let (u, v) = positive_pair(grid1(15), seed);
            let (pu, pv, mu) = balance_project(&u, &v, &e).unwrap();
            let (qu, qv, nu) = balance_project(&pu, &pv, &e).unwrap();
            prop_assert!((mu - nu).abs() <= 1e-12 * mu);
            for i in 0..pu.len() {
                prop_assert!((pu.values()[i] - qu.values()[i]).abs() <= 1e-12 * pu.values()[i].abs().max(1e-30));
                prop_assert!((pv.values()[i] - qv.values()[i]).abs() <= 1e-12 * pv.values()[i].abs().max(1e-30));
            }
        }

        #[test]
        fn balance_general_scaling_invariance(seed in 0u64..200, ls in -2.0f64..2.0, lt in -2.0f64..2.0) {
            let e = Exponents::new(2.0, 2.0, 1.0, 1.0).unwrap();
            let (u, v) = positive_pair(grid1(12), seed);
            let (pu, _, mu) = balance_project(&u, &v, &e).unwrap();
            let (qu, _, nu) = balance_project(&u.scaled(ls.exp()), &v.scaled(lt.exp()), &e).unwrap();
            prop_assert!((mu - nu).abs() <= 1e-12 * mu);
            for i in 0..pu.len() {
                prop_assert!((pu.values()[i] - qu.values()[i]).abs() <= 1e-12 * pu.values()[i].abs().max(1e-30));
            }
        }
    }
}
