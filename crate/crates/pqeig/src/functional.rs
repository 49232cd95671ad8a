//! Discrete energies of the coupled eigenvalue system and their gradients.
//!
//! Quadrature conventions, fixed once here and used everywhere:
//!
//! * `dirichlet_energy`: forward differences per cell, cells include the two
//!   boundary-adjacent ones with implicit zero ghosts, cell volume `h^dim`.
//!   For p = 2 this makes the energy the exact quadratic form of the
//!   classical (-1, 2, -1)/h stiffness in 1D and its 5-point tensor analog
//!   in 2D.
//! * `coupling`: node-based sum with weight `h^dim`, so its partial
//!   derivatives stay local to a node.
//! * Reductions run in fixed sequential index order for bit reproducibility.
//!
//! Multiplier convention: stationarity of `I - lambda * G` is assembled as
//!
//! ```text
//! r_u = (1/p) dE_p(u) - lambda |u|^(a-1) |v|^(b-1) v h^d
//! r_v = (1/q) dE_q(v) - lambda |u|^(a-1) u |v|^(b-1) h^d
//! ```
//!
//! which is the nodal (h^d-weighted) residual of the strong system
//! `-div(|grad u|^(p-2) grad u) = lambda |u|^(a-1)|v|^(b-1) v` (and its
//! counterpart in v). Contracting the first equation with u and using the
//! p-homogeneity of E_p shows `E_p(u) = E_q(v) = I(u, v) = lambda` on the
//! constraint set, so the Lagrange multiplier of the minimization equals the
//! reported eigenvalue with no extra factor.

use crate::error::{Error, Result};
use crate::mesh::ScalarField;

/// Default regularization inside the `(p-2)/2` gradient factor.
pub const EPS_GRAD_DEFAULT: f64 = 1e-10;
/// Default regularization of `|u|^(alpha-1)` when `alpha < 1`.
pub const EPS_U_DEFAULT: f64 = 1e-12;

/// Exponent quadruple (p, q, alpha, beta) with alpha/p + beta/q = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64, alpha: f64, beta: f64) -> Result<Exponents> {
        for (name, v, low) in
            [("p", p, 1.0), ("q", q, 1.0), ("alpha", alpha, 0.0), ("beta", beta, 0.0)]
        {
            if !v.is_finite() || v <= low {
                return Err(Error::ParameterDomain(format!("{name} must be > {low}, got {v}")));
            }
        }
        let sum = alpha / p + beta / q;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::ParameterDomain(format!("alpha/p + beta/q = {sum} != 1")));
        }
        Ok(Exponents { p, q, alpha, beta })
    }
}

fn check_p(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::ParameterDomain(format!("p must be > 1, got {p}")));
    }
    Ok(())
}

fn check_same_grid(u: &ScalarField, v: &ScalarField) -> Result<()> {
    if u.grid() != v.grid() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", u.grid(), v.grid())));
    }
    Ok(())
}

/// sign(x) |x|^a, continuous through 0 for a > 0.
#[inline]
fn sgn_pow(x: f64, a: f64) -> f64 {
    if a == 1.0 {
        x
    } else if x >= 0.0 {
        x.powf(a)
    } else {
        -(-x).powf(a)
    }
}

/// |x|^(a-1), regularized to (x^2 + eps^2)^((a-1)/2) when the exponent is
/// negative (a < 1).
#[inline]
fn abs_pow_m1(x: f64, a: f64, eps: f64) -> f64 {
    let e = a - 1.0;
    if e == 0.0 {
        1.0
    } else if e > 0.0 {
        x.abs().powf(e)
    } else {
        (x * x + eps * eps).powf(0.5 * e)
    }
}

/// Apply `visit(cell gradient magnitude squared, per-axis differences, node indices)`
/// to every cell of the grid, ghosts included. Node index `usize::MAX` marks
/// a boundary ghost.
struct Cell {
    mag2: f64,
    // (difference value, downwind node, upwind node) per axis
    comp: [(f64, usize, usize); 2],
    n_axes: usize,
}

fn for_each_cell<F: FnMut(Cell)>(u: &ScalarField, mut visit: F) {
    const GHOST: usize = usize::MAX;
    let grid = u.grid();
    let n = grid.n_per_axis();
    let h = grid.spacing();
    let vals = u.values();
    match grid.dim() {
        1 => {
            for c in 0..=n {
                let (left, il) = if c == 0 { (0.0, GHOST) } else { (vals[c - 1], c - 1) };
                let (right, ir) = if c == n { (0.0, GHOST) } else { (vals[c], c) };
                let d = (right - left) / h;
                visit(Cell { mag2: d * d, comp: [(d, ir, il), (0.0, GHOST, GHOST)], n_axes: 1 });
            }
        }
        _ => {
            let at = |ix: usize, iy: usize| -> (f64, usize) {
                if ix == 0 || iy == 0 || ix == n + 1 || iy == n + 1 {
                    (0.0, GHOST)
                } else {
                    let idx = (ix - 1) * n + (iy - 1);
                    (vals[idx], idx)
                }
            };
            for cx in 0..=n {
                for cy in 0..=n {
                    let (corner, ic) = at(cx, cy);
                    let (east, ie) = at(cx + 1, cy);
                    let (north, inn) = at(cx, cy + 1);
                    let gx = (east - corner) / h;
                    let gy = (north - corner) / h;
                    visit(Cell {
                        mag2: gx * gx + gy * gy,
                        comp: [(gx, ie, ic), (gy, inn, ic)],
                        n_axes: 2,
                    });
                }
            }
        }
    }
}

/// Integral of |grad u|^p by the per-cell forward-difference rule.
///
/// Nonnegative; zero exactly when u vanishes identically.
pub fn dirichlet_energy(u: &ScalarField, p: f64) -> Result<f64> {
    check_p(p)?;
    let vol = u.grid().cell_volume();
    let mut acc = 0.0;
    if p == 2.0 {
        for_each_cell(u, |cell| acc += cell.mag2 * vol);
    } else {
        let half_p = 0.5 * p;
        for_each_cell(u, |cell| acc += cell.mag2.powf(half_p) * vol);
    }
    Ok(acc)
}

/// Gradient of [`dirichlet_energy`] with respect to the nodal values, with
/// the degenerate factor |grad u|^(p-2) regularized by eps_grad (exponent
/// factor only; the energy value itself is never regularized).
pub fn grad_energy(u: &ScalarField, p: f64, eps_grad: f64) -> Result<ScalarField> {
    check_p(p)?;
    if eps_grad < 0.0 {
        return Err(Error::ParameterDomain(format!("eps_grad must be >= 0, got {eps_grad}")));
    }
    let grid = u.grid();
    let vol = grid.cell_volume();
    let h = grid.spacing();
    let mut g = vec![0.0; grid.node_count()];
    let e2 = eps_grad * eps_grad;
    let exp = 0.5 * (p - 2.0);
    for_each_cell(u, |cell| {
        // w -> p |grad u|^(p-2) as eps -> 0; skip exactly-degenerate cells
        // where the limit contribution is zero anyway (p > 1).
        let w = if p == 2.0 {
            p
        } else if cell.mag2 == 0.0 && e2 == 0.0 {
            return;
        } else {
            p * (cell.mag2 + e2).powf(exp)
        };
        for &(d, down, up) in &cell.comp[..cell.n_axes] {
            let f = w * d * vol / h;
            if down != usize::MAX {
                g[down] += f;
            }
            if up != usize::MAX {
                g[up] -= f;
            }
        }
    });
    ScalarField::from_values(grid, g)
}

/// Coupling integral over the nodes: sum of |u|^(a-1) |v|^(b-1) u v h^d.
pub fn coupling(u: &ScalarField, v: &ScalarField, e: &Exponents) -> Result<f64> {
    check_same_grid(u, v)?;
    let vol = u.grid().cell_volume();
    let mut acc = 0.0;
    for (&a, &b) in u.values().iter().zip(v.values()) {
        acc += sgn_pow(a, e.alpha) * sgn_pow(b, e.beta) * vol;
    }
    Ok(acc)
}

/// Total energy I(u, v) = (alpha/p) E_p(u) + (beta/q) E_q(v).
pub fn energy_total(u: &ScalarField, v: &ScalarField, e: &Exponents) -> Result<f64> {
    check_same_grid(u, v)?;
    Ok(e.alpha / e.p * dirichlet_energy(u, e.p)? + e.beta / e.q * dirichlet_energy(v, e.q)?)
}

/// Nodal partial derivatives (dG/du, dG/dv) of the coupling integral.
///
/// The standalone |u|^(alpha-1) factor is regularized by eps_u when
/// alpha < 1 (likewise for beta); the sign-carrying |.|^(a-1)(.) factors
/// need no regularization.
pub fn grad_coupling(
    u: &ScalarField,
    v: &ScalarField,
    e: &Exponents,
    eps_u: f64,
) -> Result<(ScalarField, ScalarField)> {
    check_same_grid(u, v)?;
    if eps_u < 0.0 {
        return Err(Error::ParameterDomain(format!("eps_u must be >= 0, got {eps_u}")));
    }
    let grid = u.grid();
    let vol = grid.cell_volume();
    let n = grid.node_count();
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    for (i, (&a, &b)) in u.values().iter().zip(v.values()).enumerate() {
        du[i] = e.alpha * abs_pow_m1(a, e.alpha, eps_u) * sgn_pow(b, e.beta) * vol;
        dv[i] = e.beta * abs_pow_m1(b, e.beta, eps_u) * sgn_pow(a, e.alpha) * vol;
    }
    Ok((ScalarField::from_values(grid, du)?, ScalarField::from_values(grid, dv)?))
}

/// Euclidean norms of the stationarity residual of the discrete system at
/// (u, v, lambda), with explicit regularization parameters.
pub fn kkt_residual_with_eps(
    u: &ScalarField,
    v: &ScalarField,
    lambda: f64,
    e: &Exponents,
    eps_grad: f64,
    eps_u: f64,
) -> Result<(f64, f64)> {
    check_same_grid(u, v)?;
    let ge_u = grad_energy(u, e.p, eps_grad)?;
    let ge_v = grad_energy(v, e.q, eps_grad)?;
    let (gc_u, gc_v) = grad_coupling(u, v, e, eps_u)?;
    let mut ru2 = 0.0;
    let mut rv2 = 0.0;
    for i in 0..u.len() {
        let ru = ge_u.values()[i] / e.p - lambda * gc_u.values()[i] / e.alpha;
        let rv = ge_v.values()[i] / e.q - lambda * gc_v.values()[i] / e.beta;
        ru2 += ru * ru;
        rv2 += rv * rv;
    }
    Ok((ru2.sqrt(), rv2.sqrt()))
}

/// [`kkt_residual_with_eps`] at the default regularizations. Zero (to
/// roundoff) exactly at discrete eigenpairs; lambda then equals
/// [`energy_total`] on the constraint set.
pub fn kkt_residual(
    u: &ScalarField,
    v: &ScalarField,
    lambda: f64,
    e: &Exponents,
) -> Result<(f64, f64)> {
    kkt_residual_with_eps(u, v, lambda, e, EPS_GRAD_DEFAULT, EPS_U_DEFAULT)
}
