//! Numerical checks of the inequalities behind the simplicity proof.
//!
//! Two eigenpair candidates (u, v) and (phi, psi) are merged along the
//! midpoint path w1 = ((u^p + phi^p)/2)^(1/p), w2 = ((v^q + psi^q)/2)^(1/q).
//! The pointwise facts — Jensen's inequality for |.|^p on convex gradient
//! combinations and the power-mean concavity bound on w1^alpha w2^beta —
//! are exact algebra and are tested without discretization tolerance. The
//! integrated energy comparison (`path_energy_check`) carries the O(h)
//! discrete chain-rule error instead and is the strictness witness: its gap
//! vanishes exactly for proportional pairs and stays positive, stably under
//! refinement, for genuinely different pairs.

use crate::error::{Error, Result};
use crate::functional::{coupling, energy_total, Exponents};
use crate::mesh::ScalarField;

fn check_nonnegative(fields: &[(&str, &ScalarField)]) -> Result<()> {
    for (name, f) in fields {
        if let Some(i) = f.values().iter().position(|&x| x < 0.0) {
            return Err(Error::Domain(format!(
                "{name} has negative node {i} ({}); nonnegative representatives required",
                f.values()[i]
            )));
        }
    }
    Ok(())
}

fn check_same_grid(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.grid(), b.grid())));
    }
    Ok(())
}

/// Midpoint-path pair w1 = ((u^p + phi^p)/2)^(1/p), w2 = ((v^q + psi^q)/2)^(1/q),
/// applied nodewise to nonnegative fields.
pub fn midpoint_pair(
    u: &ScalarField,
    phi: &ScalarField,
    p: f64,
    v: &ScalarField,
    psi: &ScalarField,
    q: f64,
) -> Result<(ScalarField, ScalarField)> {
    for (name, val) in [("p", p), ("q", q)] {
        if !val.is_finite() || val <= 1.0 {
            return Err(Error::ParameterDomain(format!("{name} must be > 1, got {val}")));
        }
    }
    check_same_grid(u, phi)?;
    check_same_grid(u, v)?;
    check_same_grid(v, psi)?;
    check_nonnegative(&[("u", u), ("phi", phi), ("v", v), ("psi", psi)])?;
    let power_mean = |a: &ScalarField, b: &ScalarField, r: f64| -> Result<ScalarField> {
        let vals = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| (0.5 * (x.powf(r) + y.powf(r))).powf(1.0 / r))
            .collect();
        ScalarField::from_values(a.grid(), vals)
    };
    Ok((power_mean(u, phi, p)?, power_mean(v, psi, q)?))
}

/// Jensen gap of the convex function |.|^p at the two-atom average with
/// weights (a1, a2) and vector atoms x1, x2:
///
/// ```text
/// (a1 |x1|^p + a2 |x2|^p) / (a1 + a2)  -  |(a1 x1 + a2 x2) / (a1 + a2)|^p
/// ```
///
/// Nonnegative up to roundoff for a1, a2 >= 0 (a1 + a2 > 0) and p >= 1.
pub fn jensen_gap(a1: f64, a2: f64, x1: &[f64], x2: &[f64], p: f64) -> f64 {
    debug_assert!(a1 >= 0.0 && a2 >= 0.0 && a1 + a2 > 0.0);
    debug_assert_eq!(x1.len(), x2.len());
    let total = a1 + a2;
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    let mut nm = 0.0;
    for (&c1, &c2) in x1.iter().zip(x2) {
        n1 += c1 * c1;
        n2 += c2 * c2;
        let m = (a1 * c1 + a2 * c2) / total;
        nm += m * m;
    }
    (a1 * n1.powf(0.5 * p) + a2 * n2.powf(0.5 * p)) / total - nm.powf(0.5 * p)
}

/// Worst-node violation of the concavity bound
/// w1^alpha w2^beta >= ((u^alpha + phi^alpha)/2) ((v^beta + psi^beta)/2):
/// returns max over nodes of (right side - left side), which exact algebra
/// keeps at or below roundoff.
pub fn concavity_violation(
    u: &ScalarField,
    v: &ScalarField,
    phi: &ScalarField,
    psi: &ScalarField,
    e: &Exponents,
) -> Result<f64> {
    let (w1, w2) = midpoint_pair(u, phi, e.p, v, psi, e.q)?;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..u.len() {
        let lhs = w1.values()[i].powf(e.alpha) * w2.values()[i].powf(e.beta);
        let rhs = 0.5
            * (u.values()[i].powf(e.alpha) + phi.values()[i].powf(e.alpha))
            * 0.5
            * (v.values()[i].powf(e.beta) + psi.values()[i].powf(e.beta));
        worst = worst.max(rhs - lhs);
    }
    Ok(worst)
}

/// Outcome of the midpoint-path energy comparison.
#[derive(Clone, Copy, Debug)]
pub struct PathReport {
    /// (I(u,v) + I(phi,psi))/2 - I(w1,w2); zero for proportional pairs,
    /// strictly positive (stably under refinement) otherwise.
    pub delta: f64,
    /// coupling(w1, w2) - 1, the constraint surplus of the midpoint pair.
    pub coupling_surplus: f64,
    pub energy_uv: f64,
    pub energy_phipsi: f64,
    pub energy_mid: f64,
}

/// Energy along the midpoint path between two pairs on the constraint set.
pub fn path_energy_check(
    u: &ScalarField,
    v: &ScalarField,
    phi: &ScalarField,
    psi: &ScalarField,
    e: &Exponents,
) -> Result<PathReport> {
    check_nonnegative(&[("u", u), ("phi", phi), ("v", v), ("psi", psi)])?;
    for (name, g) in [("(u,v)", coupling(u, v, e)?), ("(phi,psi)", coupling(phi, psi, e)?)] {
        if (g - 1.0).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "pair {name} not on the constraint set: coupling = {g}"
            )));
        }
    }
    let (w1, w2) = midpoint_pair(u, phi, e.p, v, psi, e.q)?;
    let energy_uv = energy_total(u, v, e)?;
    let energy_phipsi = energy_total(phi, psi, e)?;
    let energy_mid = energy_total(&w1, &w2, e)?;
    Ok(PathReport {
        delta: 0.5 * (energy_uv + energy_phipsi) - energy_mid,
        coupling_surplus: coupling(&w1, &w2, e)? - 1.0,
        energy_uv,
        energy_phipsi,
        energy_mid,
    })
}

/// Solve, in least squares, for positive scales (s_u, s_v, s_phi, s_psi)
/// making all four cross-integrals
/// `int u^alpha v^beta, int u^alpha psi^beta, int phi^alpha v^beta,
/// int phi^alpha psi^beta` equal to one.
///
/// The 4x4 log-linear system has rank 3 (rows satisfy r1 - r2 - r3 + r4 = 0),
/// so an exact solution exists iff A11 A22 = A12 A21; the returned defect
/// `|ln A11 + ln A22 - ln A12 - ln A21|` measures the obstruction (zero for
/// proportional pairs). The minimal-norm least-squares scales are returned;
/// each constraint is then violated by defect/4 in log, defect/2 in l2 norm.
pub fn four_normalization(
    u: &ScalarField,
    v: &ScalarField,
    phi: &ScalarField,
    psi: &ScalarField,
    e: &Exponents,
) -> Result<([f64; 4], f64)> {
    check_nonnegative(&[("u", u), ("phi", phi), ("v", v), ("psi", psi)])?;
    check_same_grid(u, v)?;
    check_same_grid(u, phi)?;
    check_same_grid(u, psi)?;
    let vol = u.grid().cell_volume();
    let cross = |a: &ScalarField, b: &ScalarField| -> f64 {
        let mut acc = 0.0;
        for (&x, &y) in a.values().iter().zip(b.values()) {
            acc += x.powf(e.alpha) * y.powf(e.beta) * vol;
        }
        acc
    };
    let a11 = cross(u, v);
    let a12 = cross(u, psi);
    let a21 = cross(phi, v);
    let a22 = cross(phi, psi);
    for (name, val) in [("A11", a11), ("A12", a12), ("A21", a21), ("A22", a22)] {
        let positive = val.is_finite() && val > 0.0;
        if !positive {
            return Err(Error::Domain(format!("cross integral {name} = {val} is not positive")));
        }
    }
    let b = [-a11.ln(), -a12.ln(), -a21.ln(), -a22.ln()];
    let defect = (a11.ln() + a22.ln() - a12.ln() - a21.ln()).abs();

    // Project the right-hand side onto the range {y : y1 - y2 - y3 + y4 = 0},
    // solve the now-consistent system, then remove the null component
    // span{(beta, -alpha, beta, -alpha)} for the minimal-norm solution.
    let excess = (b[0] - b[1] - b[2] + b[3]) / 4.0;
    let bh = [b[0] - excess, b[1] + excess, b[2] + excess, b[3] - excess];
    let x_u = bh[0] / e.alpha;
    let x_v = 0.0;
    let x_phi = bh[2] / e.alpha;
    let x_psi = (bh[1] - bh[0]) / e.beta;
    let null = [e.beta, -e.alpha, e.beta, -e.alpha];
    let x = [x_u, x_v, x_phi, x_psi];
    let proj = x.iter().zip(&null).map(|(a, n)| a * n).sum::<f64>()
        / null.iter().map(|n| n * n).sum::<f64>();
    let logs = [
        x[0] - proj * null[0],
        x[1] - proj * null[1],
        x[2] - proj * null[2],
        x[3] - proj * null[3],
    ];
    Ok(([logs[0].exp(), logs[1].exp(), logs[2].exp(), logs[3].exp()], defect))
}
