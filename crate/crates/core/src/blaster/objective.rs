//! Objective evaluation and gradients of the smooth part.

use ndarray::Array2;

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::linklayer::{self, Allocation, LinkParams, TierBandwidth};
use crate::scenario::{Mbs, Tier};

/// Everything an optimizer needs besides the decision variables.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub ch: &'a ChannelState,
    /// Static power ψ_j of every MBS, W.
    pub psi: Vec<f64>,
    pub noise_mw: f64,
    pub total_bandwidth_hz: f64,
    pub rsrp_min_mw: f64,
}

impl<'a> Problem<'a> {
    pub fn new(ch: &'a ChannelState, roster: &[Mbs], link: &LinkParams) -> Result<Self> {
        if roster.len() != ch.num_mbs() {
            return Err(Error::Dimension(format!(
                "{} MBSs in roster, {} columns in channel",
                roster.len(),
                ch.num_mbs()
            )));
        }
        Ok(Problem {
            ch,
            psi: roster.iter().map(|m| m.static_power_w).collect(),
            noise_mw: link.noise_mw(),
            total_bandwidth_hz: link.total_bandwidth_hz,
            rsrp_min_mw: link.rsrp_min_mw(),
        })
    }

    pub fn bandwidth(&self, epsilon: f64) -> Result<TierBandwidth> {
        linklayer::split_bandwidth(epsilon, self.total_bandwidth_hz)
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.ch.tiers
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown {
    pub slt: f64,
    pub l1: f64,
    /// Σ_j ψ_j w_j · ‖p‖₂.
    pub group: f64,
    pub lambda: f64,
    pub total: f64,
}

pub fn penalty_terms(p: &[f64], w: &[f64], psi: &[f64]) -> (f64, f64) {
    let l1: f64 = p.iter().map(|v| v.abs()).sum();
    let l2 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let wpsi: f64 = w.iter().zip(psi).map(|(a, b)| a * b).sum();
    (l1, wpsi * l2)
}

pub fn objective(alloc: &Allocation, prob: &Problem, w: &[f64], lambda: f64) -> Result<ObjectiveBreakdown> {
    let rates = linklayer::ue_throughput(alloc, prob.ch, prob.bandwidth(alloc.epsilon)?, prob.noise_mw)?;
    let slt = linklayer::sum_log_throughput(&rates)?;
    Ok(breakdown(slt, &alloc.p, w, &prob.psi, lambda))
}

pub fn breakdown(slt: f64, p: &[f64], w: &[f64], psi: &[f64], lambda: f64) -> ObjectiveBreakdown {
    let (l1, group) = penalty_terms(p, w, psi);
    ObjectiveBreakdown {
        slt,
        l1,
        group,
        lambda,
        total: slt - lambda * (l1 + group),
    }
}

/// SLT with the per-MBS loads held at `loads`.
pub fn slt_frozen(x: &Array2<f64>, p: &[f64], epsilon: f64, loads: &[f64], prob: &Problem) -> Result<f64> {
    let g = linklayer::sinr_matrix(prob.ch, p, prob.noise_mw);
    let rates = linklayer::rates_with_loads(x, &g, prob.tiers(), prob.bandwidth(epsilon)?, loads);
    linklayer::sum_log_throughput(&rates)
}

/// Per-link rates R_ij = (W_j / k_j) log2(1 + γ_ij) at the given loads.
/// Links of empty MBSs use k_j = 1.
pub fn link_rates(sinr: &Array2<f64>, tiers: &[Tier], bw: TierBandwidth, loads: &[f64]) -> Array2<f64> {
    let mut r = sinr.mapv(|g| (1.0 + g).log2());
    for (j, mut col) in r.columns_mut().into_iter().enumerate() {
        let k = if loads[j] > 0.0 { loads[j] } else { 1.0 };
        let c = bw.of(tiers[j]) / k;
        col.mapv_inplace(|v| v * c);
    }
    r
}

/// ∂SLT/∂x_ij = R_ij / R_i under frozen loads.
pub fn assoc_gradient(alloc: &Allocation, prob: &Problem) -> Result<Array2<f64>> {
    let loads = linklayer::loads(&alloc.x);
    let g = linklayer::sinr_matrix(prob.ch, &alloc.p, prob.noise_mw);
    let r = link_rates(&g, prob.tiers(), prob.bandwidth(alloc.epsilon)?, &loads);
    let mut grad = r.clone();
    for (i, mut row) in grad.rows_mut().into_iter().enumerate() {
        let ri: f64 = alloc.x.row(i).iter().zip(r.row(i)).map(|(x, v)| x * v).sum();
        if !(ri > 0.0) {
            return Err(Error::NonPositiveRate { ue: i, rate: ri });
        }
        row.mapv_inplace(|v| v / ri);
    }
    Ok(grad)
}

/// X̃ = X + α ⊙ ∇.
pub fn assoc_gradient_step(x: &Array2<f64>, alpha: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    x + &(alpha * grad)
}

/// Row-scaled step matrix: the steepest entry of each row moves by `base`.
pub fn row_scaled_step(grad: &Array2<f64>, base: f64) -> Array2<f64> {
    let mut a = Array2::zeros(grad.dim());
    for (i, row) in grad.rows().into_iter().enumerate() {
        let m = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let s = if m > 0.0 { base / m } else { 0.0 };
        a.row_mut(i).fill(s);
    }
    a
}

/// ∇_p SLT at fixed association, bandwidth split and loads.
pub fn power_gradient(alloc: &Allocation, prob: &Problem) -> Result<Vec<f64>> {
    let ch = prob.ch;
    let (k, l) = ch.gain.dim();
    let p = &alloc.p;
    let loads = linklayer::loads(&alloc.x);
    let bw = prob.bandwidth(alloc.epsilon)?;
    let c: Vec<f64> = (0..l)
        .map(|j| if loads[j] > 0.0 { bw.of(ch.tiers[j]) / loads[j] } else { 0.0 })
        .collect();
    let slot: Vec<usize> = ch.tiers.iter().map(|t| linklayer::tier_slot(*t)).collect();
    let ln2 = std::f64::consts::LN_2;
    let mut grad = vec![0.0; l];
    let mut d = vec![0.0; l];
    let mut gam = vec![0.0; l];
    let mut gcoef = vec![0.0; l];
    for i in 0..k {
        let mut total = [0.0f64; 2];
        for j in 0..l {
            total[slot[j]] += ch.gain[[i, j]] * p[j];
        }
        let mut ri = 0.0;
        for j in 0..l {
            let s = ch.gain[[i, j]] * p[j];
            d[j] = (total[slot[j]] - s).max(0.0) + prob.noise_mw;
            gam[j] = s / d[j];
            ri += alloc.x[[i, j]] * c[j] * (1.0 + gam[j]).log2();
        }
        if !(ri > 0.0) {
            return Err(Error::NonPositiveRate { ue: i, rate: ri });
        }
        let mut h = [0.0f64; 2];
        for j in 0..l {
            gcoef[j] = alloc.x[[i, j]] * c[j] / ((1.0 + gam[j]) * ln2 * ri);
            h[slot[j]] += gcoef[j] * gam[j] / d[j];
        }
        for m in 0..l {
            let own = gcoef[m] / d[m];
            let cross = h[slot[m]] - gcoef[m] * gam[m] / d[m];
            grad[m] += ch.gain[[i, m]] * (own - cross);
        }
    }
    Ok(grad)
}

/// p̃ = p + η ∇.
pub fn power_gradient_step(p: &[f64], eta: f64, grad: &[f64]) -> Vec<f64> {
    p.iter().zip(grad).map(|(a, g)| a + eta * g).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linklayer::one_hot;
    use approx::assert_relative_eq;
    use ndarray::array;

    pub(crate) fn toy3() -> ChannelState {
        ChannelState::from_gains(
            array![[4e-11, 1e-11, 2e-12], [6e-12, 3e-11, 1.5e-12], [1e-11, 9e-12, 2.5e-12]],
            vec![Tier::Terrestrial, Tier::Terrestrial, Tier::Satellite],
            vec![58.9, 58.9, 38.0],
        )
        .unwrap()
    }

    fn prob(ch: &ChannelState) -> Problem<'_> {
        let link = LinkParams::default();
        Problem {
            ch,
            psi: vec![100.0, 100.0, 100.0],
            noise_mw: link.noise_mw(),
            total_bandwidth_hz: link.total_bandwidth_hz,
            rsrp_min_mw: link.rsrp_min_mw(),
        }
    }

    fn relaxed() -> Allocation {
        Allocation {
            x: array![[0.6, 0.3, 0.1], [0.2, 0.7, 0.1], [0.3, 0.3, 0.4]],
            p: vec![40.0, 25.0, 38.0],
            epsilon: 0.3,
        }
    }

    #[test]
    fn lambda_zero_is_slt() {
        let ch = toy3();
        let pr = prob(&ch);
        let a = relaxed();
        let b = objective(&a, &pr, &[1.0; 3], 0.0).unwrap();
        assert_eq!(b.total, b.slt);
        let z = breakdown(1.5, &[0.0; 3], &[1.0; 3], &pr.psi, 10.0);
        assert_eq!((z.l1, z.group, z.total), (0.0, 0.0, 1.5));
    }

    #[test]
    fn objective_matches_direct_evaluation() {
        let ch = toy3();
        let pr = prob(&ch);
        let a = relaxed();
        let w = [0.02, 0.04, 0.03];
        let lambda = 0.7;
        let b = objective(&a, &pr, &w, lambda).unwrap();
        // independent re-evaluation, term by term
        let k: Vec<f64> = (0..3).map(|j| (0..3).map(|i| a.x[[i, j]]).sum()).collect();
        let bw = [(1.0 - 0.3) * 40e6, (1.0 - 0.3) * 40e6, 0.3 * 40e6];
        let mut slt = 0.0;
        for i in 0..3 {
            let mut r = 0.0;
            for j in 0..3 {
                let others: f64 = (0..3)
                    .filter(|&m| m != j && ch.tiers[m] == ch.tiers[j])
                    .map(|m| ch.gain[[i, m]] * a.p[m])
                    .sum();
                let g = ch.gain[[i, j]] * a.p[j] / (others + pr.noise_mw);
                r += a.x[[i, j]] * bw[j] / k[j] * (1.0 + g).log2();
            }
            slt += r.ln();
        }
        let l1 = 40.0 + 25.0 + 38.0;
        let l2 = (40.0f64 * 40.0 + 25.0 * 25.0 + 38.0 * 38.0).sqrt();
        let group = (0.02 + 0.04 + 0.03) * 100.0 * l2;
        assert_relative_eq!(b.slt, slt, max_relative = 1e-13);
        assert_relative_eq!(b.l1, l1, max_relative = 1e-15);
        assert_relative_eq!(b.group, group, max_relative = 1e-13);
        assert_relative_eq!(b.total, slt - lambda * (l1 + group), max_relative = 1e-13);
    }

    fn frozen_f(x: &Array2<f64>, p: &[f64], loads: &[f64], pr: &Problem) -> f64 {
        slt_frozen(x, p, 0.3, loads, pr).unwrap()
    }

    #[test]
    fn assoc_gradient_matches_central_differences() {
        let ch = toy3();
        let pr = prob(&ch);
        let a = relaxed();
        let loads = linklayer::loads(&a.x);
        let grad = assoc_gradient(&a, &pr).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let h = 1e-6;
                let mut up = a.x.clone();
                up[[i, j]] += h;
                let mut dn = a.x.clone();
                dn[[i, j]] -= h;
                let fd = (frozen_f(&up, &a.p, &loads, &pr) - frozen_f(&dn, &a.p, &loads, &pr)) / (2.0 * h);
                assert_relative_eq!(grad[[i, j]], fd, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn gradient_prefers_better_link() {
        let ch = ChannelState::from_gains(
            array![[1e-10, 1e-12]],
            vec![Tier::Terrestrial, Tier::Terrestrial],
            vec![58.9, 58.9],
        )
        .unwrap();
        let pr = Problem {
            psi: vec![100.0; 2],
            ..prob(&ch)
        };
        let a = Allocation {
            x: array![[0.5, 0.5]],
            p: vec![58.9, 58.9],
            epsilon: 0.0,
        };
        let g = assoc_gradient(&a, &pr).unwrap();
        assert!(g[[0, 0]] > g[[0, 1]]);
        let zero = Array2::zeros((1, 2));
        assert_eq!(assoc_gradient_step(&a.x, &row_scaled_step(&g, 0.1), &zero), a.x);
    }

    #[test]
    fn power_gradient_matches_central_differences() {
        let ch = toy3();
        let pr = prob(&ch);
        let a = relaxed();
        let loads = linklayer::loads(&a.x);
        let grad = power_gradient(&a, &pr).unwrap();
        for m in 0..3 {
            let h = 1e-4 * a.p[m];
            let mut up = a.p.clone();
            up[m] += h;
            let mut dn = a.p.clone();
            dn[m] -= h;
            let fd = (frozen_f(&a.x, &up, &loads, &pr) - frozen_f(&a.x, &dn, &loads, &pr)) / (2.0 * h);
            assert_relative_eq!(grad[m], fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn interferer_gradient_sign() {
        // UE 0 is served by MBS 0 only; raising MBS 1 can only hurt it
        let ch = toy3();
        let pr = prob(&ch);
        let a = Allocation {
            x: one_hot(&[Some(0), Some(0), Some(2)], 3),
            p: vec![40.0, 25.0, 38.0],
            epsilon: 0.3,
        };
        let g = power_gradient(&a, &pr).unwrap();
        assert!(g[1] < 0.0);
        assert!(g[0] > 0.0);
        assert_eq!(power_gradient_step(&a.p, 0.5, &[0.0; 3]), a.p);
    }
}
