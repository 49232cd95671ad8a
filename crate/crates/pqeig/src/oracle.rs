//! Independent reference values: the linear (p = q = 2) discrete
//! eigenproblem and the 1D scalar p-Laplacian closed form.
//!
//! The linear oracle solves `A x = theta x` for the dimensionless Dirichlet
//! stencil A (tridiagonal (-1, 2, -1) in 1D, 5-point in 2D) by inverse
//! iteration, using a direct tridiagonal solve in 1D and conjugate gradients
//! in 2D. The reported eigenvalue is `theta / h^2`, which is the multiplier
//! of the discrete system for p = q = 2, alpha = beta = 1 under this crate's
//! energy and coupling quadratures.

use crate::error::{Error, Result};
use crate::mesh::{Grid, ScalarField};

/// Dimensionless Dirichlet stencil applied to nodal values.
fn stencil_apply(grid: Grid, x: &[f64], out: &mut [f64]) {
    let n = grid.n_per_axis();
    match grid.dim() {
        1 => {
            for i in 0..n {
                let left = if i == 0 { 0.0 } else { x[i - 1] };
                let right = if i + 1 == n { 0.0 } else { x[i + 1] };
                out[i] = 2.0 * x[i] - left - right;
            }
        }
        _ => {
            for ix in 0..n {
                for iy in 0..n {
                    let idx = ix * n + iy;
                    let mut acc = 4.0 * x[idx];
                    if ix > 0 {
                        acc -= x[idx - n];
                    }
                    if ix + 1 < n {
                        acc -= x[idx + n];
                    }
                    if iy > 0 {
                        acc -= x[idx - 1];
                    }
                    if iy + 1 < n {
                        acc -= x[idx + 1];
                    }
                    out[idx] = acc;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Thomas algorithm for the constant tridiagonal (-1, 2, -1) system.
fn solve_tridiag(b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut c = vec![0.0; n]; // superdiagonal after elimination
    let mut d = vec![0.0; n];
    c[0] = -0.5;
    d[0] = b[0] / 2.0;
    for i in 1..n {
        let m = 2.0 + c[i - 1];
        c[i] = -1.0 / m;
        d[i] = (b[i] + d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Conjugate gradients on the 2D stencil, relative residual 1e-13.
fn solve_cg(grid: Grid, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut ap = vec![0.0; n];
    let b_norm2 = dot(b, b);
    if b_norm2 == 0.0 {
        return Ok(x);
    }
    let tol2 = 1e-26 * b_norm2;
    let mut r_norm2 = b_norm2;
    for _ in 0..20 * n {
        stencil_apply(grid, &p, &mut ap);
        let alpha = r_norm2 / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_new = dot(&r, &r);
        if r_new <= tol2 {
            return Ok(x);
        }
        let beta = r_new / r_norm2;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        r_norm2 = r_new;
    }
    Err(Error::OracleFailed("conjugate gradients did not converge".into()))
}

/// Smallest eigenvalue and eigenvector of the assembled discrete Dirichlet
/// Laplacian, by inverse iteration. The eigenvector has unit 2-norm and
/// positive mean.
pub fn linear_first_eig(grid: Grid) -> Result<(f64, ScalarField)> {
    let n = grid.node_count();
    let h = grid.spacing();
    let mut x = vec![1.0; n];
    let nrm = dot(&x, &x).sqrt();
    for v in &mut x {
        *v /= nrm;
    }
    let mut ax = vec![0.0; n];
    let mut theta_prev = f64::INFINITY;
    for _ in 0..500 {
        let y = match grid.dim() {
            1 => solve_tridiag(&x),
            _ => solve_cg(grid, &x)?,
        };
        let nrm = dot(&y, &y).sqrt();
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::OracleFailed(
                "inverse iteration produced a degenerate vector".into(),
            ));
        }
        x = y;
        for v in &mut x {
            *v /= nrm;
        }
        stencil_apply(grid, &x, &mut ax);
        let theta = dot(&x, &ax);
        let resid2 = {
            let mut acc = 0.0;
            for i in 0..n {
                let r = ax[i] - theta * x[i];
                acc += r * r;
            }
            acc
        };
        if (theta - theta_prev).abs() <= 1e-14 * theta && resid2.sqrt() <= 1e-12 * theta {
            let mean: f64 = x.iter().sum::<f64>();
            if mean < 0.0 {
                for v in &mut x {
                    *v = -*v;
                }
            }
            return Ok((theta / (h * h), ScalarField::from_values(grid, x)?));
        }
        theta_prev = theta;
    }
    Err(Error::OracleFailed("inverse iteration did not converge in 500 steps".into()))
}

/// Generalized pi constant, `2 pi (p-1)^(1/p) / (p sin(pi/p))`.
pub fn pi_p(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::ParameterDomain(format!("p must be > 1, got {p}")));
    }
    Ok(2.0 * std::f64::consts::PI * (p - 1.0).powf(1.0 / p)
        / (p * (std::f64::consts::PI / p).sin()))
}

/// First Dirichlet eigenvalue of the 1D scalar p-Laplacian on (0, L):
/// `(pi_p / L)^p`.
///
/// The (p-1)^(1/p) factor inside [`pi_p`] already accounts for the (p-1)
/// prefactor that appears when the constant is defined without it
/// ((p-1) (2 pi / (p sin(pi/p)))^p is the same number); the shooting
/// cross-validation in the tests pins this convention. Computed as
/// `pi_p^p / L^p` so the homogeneity in L is exact in floating point.
pub fn plap1d_lambda1(p: f64, length: f64) -> Result<f64> {
    let length_ok = length.is_finite() && length > 0.0;
    if !length_ok {
        return Err(Error::ParameterDomain(format!("length must be > 0, got {length}")));
    }
    Ok(pi_p(p)?.powf(p) / length.powf(p))
}
