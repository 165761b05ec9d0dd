//! Coverage-constrained projection of the association matrix and its dual.
//!
//! The primal problem is min ½‖X − X̃‖²_F subject to (X ⊙ β)·p ≥ RSRP_min·1
//! and X ≥ 0. It separates by row. With multiplier μ_i ≤ 0 the row minimiser
//! is x* = max(x̃ − μ_i β_i ⊙ p, 0), and the dual is maximised by driving the
//! row's coverage back to RSRP_min whenever the plain clip violates it.

use ndarray::Array2;

use crate::channel::ChannelState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub x: Array2<f64>,
    /// μ ≤ 0 per UE, in the units of the Lagrangian.
    pub mu: Vec<f64>,
    /// Vectorised dual sweeps used (maximum over rows).
    pub iterations: usize,
}

/// X* = max(X̃ − β ⊙ p^PAD ⊙ μ^PAD, 0).
pub fn x_star(x_tilde: &Array2<f64>, beta: &Array2<f64>, p: &[f64], mu: &[f64]) -> Array2<f64> {
    let mut out = x_tilde.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = (*v - beta[[i, j]] * p[j] * mu[i]).max(0.0);
    }
    out
}

fn frob2(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Tr(A Bᵀ) = Σ_ij a_ij b_ij.
fn trace_abt(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// β ⊙ p^PAD ⊙ μ^PAD.
pub fn padded_product(beta: &Array2<f64>, p: &[f64], mu: &[f64]) -> Array2<f64> {
    let mut out = beta.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v *= p[j] * mu[i];
    }
    out
}

/// [(X ⊙ β)·p]ᵀ μ.
pub fn coverage_dot(x: &Array2<f64>, beta: &Array2<f64>, p: &[f64], mu: &[f64]) -> f64 {
    (0..x.nrows())
        .map(|i| mu[i] * (0..x.ncols()).map(|j| x[[i, j]] * beta[[i, j]] * p[j]).sum::<f64>())
        .sum()
}

/// Tr(X (β ⊙ p^PAD ⊙ μ^PAD)ᵀ), the trace form of [`coverage_dot`].
pub fn trace_form(x: &Array2<f64>, beta: &Array2<f64>, p: &[f64], mu: &[f64]) -> f64 {
    trace_abt(x, &padded_product(beta, p, mu))
}

/// L(X, μ) = ½‖X − X̃‖²_F + ((X ⊙ β)·p − RSRP_min·1)ᵀ μ.
pub fn lagrangian(x: &Array2<f64>, mu: &[f64], x_tilde: &Array2<f64>, beta: &Array2<f64>, p: &[f64], rsrp_min: f64) -> f64 {
    0.5 * frob2(&(x - x_tilde)) + coverage_dot(x, beta, p, mu) - rsrp_min * mu.iter().sum::<f64>()
}

/// The dual in the reduced form ½‖X*‖² − Tr(X*[X̃ − β⊙p⊙μ]ᵀ) − RSRP_min·1ᵀμ.
/// It differs from L(X*, μ) by the constant ½‖X̃‖²_F.
pub fn dual_value_reduced(mu: &[f64], x_tilde: &Array2<f64>, beta: &Array2<f64>, p: &[f64], rsrp_min: f64) -> f64 {
    let xs = x_star(x_tilde, beta, p, mu);
    let shifted = x_tilde - &padded_product(beta, p, mu);
    0.5 * frob2(&xs) - trace_abt(&xs, &shifted) - rsrp_min * mu.iter().sum::<f64>()
}

/// D(μ) = L(X*(μ), μ): the reduced form plus ½‖X̃‖²_F.
pub fn dual_value(mu: &[f64], x_tilde: &Array2<f64>, beta: &Array2<f64>, p: &[f64], rsrp_min: f64) -> f64 {
    dual_value_reduced(mu, x_tilde, beta, p, rsrp_min) + 0.5 * frob2(x_tilde)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolver {
    pub max_iterations: usize,
    /// Relative tolerance on the row coverage residual.
    pub tolerance: f64,
}

impl Default for DualSolver {
    fn default() -> Self {
        DualSolver {
            max_iterations: 500,
            tolerance: 1e-12,
        }
    }
}

/// Solves one row in scaled units: a = β_i ⊙ p / RSRP_min, ν = −μ·RSRP_min,
/// x = max(x̃ + a ν, 0), target aᵀx = 1.
fn solve_row(xt: &[f64], a: &[f64], solver: &DualSolver) -> (f64, usize) {
    let cover = |nu: f64| -> (f64, f64) {
        let mut h = 0.0;
        let mut slope = 0.0;
        for (x, ai) in xt.iter().zip(a) {
            let v = x + ai * nu;
            if v > 0.0 {
                h += ai * v;
                slope += ai * ai;
            }
        }
        (h, slope)
    };
    let (h0, _) = cover(0.0);
    if h0 >= 1.0 {
        return (0.0, 1);
    }
    let mut nu = 0.0f64;
    let mut it = 0;
    while it < solver.max_iterations {
        it += 1;
        let (h, slope) = cover(nu);
        let resid = 1.0 - h;
        if resid.abs() <= solver.tolerance {
            break;
        }
        let next = if slope > 0.0 {
            nu + resid / slope
        } else {
            // no active entry yet: jump to the first breakpoint
            xt.iter()
                .zip(a)
                .filter(|(_, ai)| **ai > 0.0)
                .map(|(x, ai)| -x / ai)
                .filter(|b| *b > nu)
                .fold(f64::INFINITY, f64::min)
                .max(nu)
                + f64::EPSILON * nu.abs().max(1.0)
        };
        let next = next.max(0.0);
        if next == nu {
            break;
        }
        nu = next;
    }
    (nu, it)
}

/// Exact projection onto {X ≥ 0, (X ⊙ β)·p ≥ RSRP_min} via the dual.
pub fn project_coverage(x_tilde: &Array2<f64>, beta: &Array2<f64>, p: &[f64], rsrp_min: f64, solver: &DualSolver) -> Result<DualSolution> {
    let (k, l) = x_tilde.dim();
    if beta.dim() != (k, l) || p.len() != l {
        return Err(Error::Dimension("projection inputs disagree in shape".into()));
    }
    let mut mu = vec![0.0; k];
    let mut iterations = 0;
    for i in 0..k {
        let a: Vec<f64> = (0..l).map(|j| beta[[i, j]] * p[j] / rsrp_min).collect();
        if a.iter().all(|v| *v <= 0.0) {
            return Err(Error::UncoverableUe { ue: i });
        }
        let xt: Vec<f64> = x_tilde.row(i).to_vec();
        let (nu, it) = solve_row(&xt, &a, solver);
        mu[i] = -nu / rsrp_min;
        iterations = iterations.max(it);
    }
    let mut x = x_tilde.clone();
    for i in 0..k {
        for j in 0..l {
            // same value as x_star, in scaled units to avoid rounding
            let a = beta[[i, j]] * p[j] / rsrp_min;
            x[[i, j]] = (x_tilde[[i, j]] + a * (-mu[i] * rsrp_min)).max(0.0);
        }
    }
    Ok(DualSolution { x, mu, iterations })
}

/// Projection followed by the relaxed-row repair: entries clipped to
/// [0, 1], rows with mass renormalised to sum 1, empty rows sent to the
/// strongest column that covers the UE at full power.
pub fn project_association(x_tilde: &Array2<f64>, ch: &ChannelState, p: &[f64], rsrp_min: f64, solver: &DualSolver) -> Result<DualSolution> {
    for i in 0..ch.num_ues() {
        if !(0..ch.num_mbs()).any(|j| ch.can_cover(i, j, rsrp_min)) {
            return Err(Error::UncoverableUe { ue: i });
        }
    }
    let mut sol = project_coverage(x_tilde, &ch.gain, p, rsrp_min, solver)?;
    for (i, mut row) in sol.x.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v.clamp(0.0, 1.0));
        let s: f64 = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        } else {
            let j = best_covering(ch, i, rsrp_min).ok_or(Error::UncoverableUe { ue: i })?;
            row[j] = 1.0;
        }
    }
    Ok(sol)
}

/// Column with the highest full-power RSRP among those covering UE `i`.
pub fn best_covering(ch: &ChannelState, i: usize, rsrp_min: f64) -> Option<usize> {
    (0..ch.num_mbs())
        .filter(|&j| ch.can_cover(i, j, rsrp_min))
        .max_by(|&a, &b| {
            (ch.gain[[i, a]] * ch.max_power_mw[a])
                .total_cmp(&(ch.gain[[i, b]] * ch.max_power_mw[b]))
                .then(b.cmp(&a))
        })
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Exact row projection by enumerating supports: for each candidate
    /// support the KKT system is either unconstrained or has an active
    /// coverage constraint with a closed-form multiplier.
    pub fn brute_force_projection(x_tilde: &Array2<f64>, beta: &Array2<f64>, p: &[f64], rsrp_min: f64) -> Array2<f64> {
        let (k, l) = x_tilde.dim();
        let mut out = Array2::zeros((k, l));
        for i in 0..k {
            let xt: Vec<f64> = x_tilde.row(i).to_vec();
            let b: Vec<f64> = (0..l).map(|j| beta[[i, j]] * p[j]).collect();
            let feasible = |x: &[f64]| {
                x.iter().all(|v| *v >= -1e-15)
                    && x.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>() >= rsrp_min * (1.0 - 1e-12)
            };
            let cost = |x: &[f64]| x.iter().zip(&xt).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
            let mut best: Option<(f64, Vec<f64>)> = None;
            for mask in 0u32..(1 << l) {
                let on: Vec<usize> = (0..l).filter(|j| mask & (1 << j) != 0).collect();
                let mut cands = Vec::new();
                // inactive coverage: x = x̃ on the support
                let mut x = vec![0.0; l];
                for &j in &on {
                    x[j] = xt[j];
                }
                cands.push(x);
                // active coverage: x = x̃ + ν b on the support, bᵀx = R
                let bb: f64 = on.iter().map(|&j| b[j] * b[j]).sum();
                if bb > 0.0 {
                    let bx: f64 = on.iter().map(|&j| b[j] * xt[j]).sum();
                    let nu = (rsrp_min - bx) / bb;
                    if nu >= 0.0 {
                        let mut x = vec![0.0; l];
                        for &j in &on {
                            x[j] = xt[j] + nu * b[j];
                        }
                        cands.push(x);
                    }
                }
                for c in cands {
                    if feasible(&c) {
                        let v = cost(&c);
                        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                            best = Some((v, c));
                        }
                    }
                }
            }
            let (_, x) = best.expect("row has a feasible point");
            for j in 0..l {
                out[[i, j]] = x[j].max(0.0);
            }
        }
        out
    }
}
