use ndarray::Array2;

use crate::blaster::projection::best_covering;
use crate::channel::ChannelState;
use crate::error::{Error, Result};

/// Block soft-thresholding: max(1 − t/‖p̃‖₂, 0) · p̃.
pub fn prox_group(p_tilde: &[f64], t: f64) -> Vec<f64> {
    let norm = p_tilde.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= t || norm == 0.0 {
        return vec![0.0; p_tilde.len()];
    }
    let s = 1.0 - t / norm;
    p_tilde.iter().map(|v| s * v).collect()
}

/// Threshold t = λ · η · wᵀψ.
pub fn prox_threshold(lambda: f64, eta: f64, w: &[f64], psi: &[f64]) -> f64 {
    lambda * eta * w.iter().zip(psi).map(|(a, b)| a * b).sum::<f64>()
}

/// w_j = 1 / (p_j + δ).
pub fn reweight(p: &[f64], delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: "must be positive".into(),
        });
    }
    Ok(p.iter().map(|v| 1.0 / (v + delta)).collect())
}

/// Serving MBS per UE: the row argmax, replaced by the strongest covering
/// MBS when the argmax cannot reach RSRP_min at full power.
pub fn serving_with_repair(x: &Array2<f64>, ch: &ChannelState, rsrp_min: f64) -> Result<Vec<usize>> {
    x.rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut arg = None;
            let mut best = f64::NEG_INFINITY;
            for (j, v) in row.iter().enumerate() {
                if *v > best {
                    best = *v;
                    arg = Some(j);
                }
            }
            match arg {
                Some(j) if best > 0.0 && ch.can_cover(i, j, rsrp_min) => Ok(j),
                _ => best_covering(ch, i, rsrp_min).ok_or(Error::UncoverableUe { ue: i }),
            }
        })
        .collect()
}

/// τ_j = max over served UEs of RSRP_min / β_ij; 0 for empty MBSs.
pub fn coverage_floors(ch: &ChannelState, serving: &[usize], rsrp_min: f64) -> Vec<f64> {
    let mut tau = vec![0.0f64; ch.num_mbs()];
    for (i, &j) in serving.iter().enumerate() {
        tau[j] = tau[j].max(rsrp_min / ch.gain[[i, j]]);
    }
    tau
}

/// Clamps p̂ into [τ_j, p_max,j]. Satellite powers are held at p_max when
/// `hold_satellite` is set.
pub fn power_feasibility_clamp(p_hat: &[f64], ch: &ChannelState, serving: &[usize], rsrp_min: f64, hold_satellite: bool) -> Result<Vec<f64>> {
    let tau = coverage_floors(ch, serving, rsrp_min);
    (0..ch.num_mbs())
        .map(|j| {
            let pmax = ch.max_power_mw[j];
            if hold_satellite && ch.is_satellite(j) {
                return Ok(pmax);
            }
            if tau[j] > pmax * (1.0 + 1e-12) {
                return Err(Error::InfeasibleCoverage {
                    mbs: j,
                    floor_mw: tau[j],
                    max_mw: pmax,
                });
            }
            Ok(p_hat[j].clamp(tau[j].min(pmax), pmax))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linklayer::one_hot;
    use crate::rng::{self, Stream};
    use crate::scenario::Tier;
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn prox_cost(pt: &[f64], p: &[f64], t: f64) -> f64 {
        0.5 * pt.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() + t * p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The minimiser lies on the ray through p̃ (the objective is rotation
    /// invariant about it), so a golden-section search over the scale
    /// s ∈ [0, 1] finds it.
    fn line_search_oracle(pt: &[f64], t: f64) -> Vec<f64> {
        let f = |s: f64| {
            let p: Vec<f64> = pt.iter().map(|v| s * v).collect();
            prox_cost(pt, &p, t)
        };
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) <= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let s = 0.5 * (a + b);
        let s = if f(0.0) <= f(s) { 0.0 } else { s };
        pt.iter().map(|v| s * v).collect()
    }

    #[test]
    fn prox_examples() {
        assert_eq!(prox_group(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
        assert_eq!(prox_group(&[3.0, 4.0], 6.0), vec![0.0, 0.0]);
        assert_eq!(prox_group(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        let p = prox_group(&[3.0, 4.0], 2.5);
        assert_relative_eq!(p[0], 1.5);
        assert_relative_eq!(p[1], 2.0);
    }

    #[test]
    fn prox_matches_line_search() {
        let mut r = rng::stream(5, Stream::Link, 1);
        for n in 0..100 {
            let len = 1 + n % 6;
            let pt: Vec<f64> = (0..len).map(|_| r.random_range(-5.0..60.0)).collect();
            let norm = pt.iter().map(|v| v * v).sum::<f64>().sqrt();
            // a third of the draws land in the shutdown regime
            let t = if n % 3 == 0 { norm * r.random_range(1.0..2.0) } else { norm * r.random_range(0.0..1.0) };
            let a = prox_group(&pt, t);
            let b = line_search_oracle(&pt, t);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-6, "draw {n}");
            }
        }
    }

    #[test]
    fn reweight_examples() {
        let w = reweight(&[0.0, 1e9, 1.0, 2.0], 0.5).unwrap();
        assert_eq!(w[0], 2.0);
        assert!(w[1] < 1e-8);
        assert!(w[2] > w[3]);
        assert!(reweight(&[1.0], 0.0).is_err());
    }

    fn ch2() -> ChannelState {
        ChannelState::from_gains(
            array![[1e-10, 1e-13, 1e-13], [4e-11, 2e-13, 1e-13], [1e-16, 1e-16, 1e-16]],
            vec![Tier::Terrestrial, Tier::Terrestrial, Tier::Satellite],
            vec![50.0, 50.0, 40.0],
        )
        .unwrap()
    }

    #[test]
    fn floors_and_clamp() {
        let ch = ChannelState::from_gains(
            array![[1e-10, 1e-13, 1e-13], [4e-11, 2e-13, 1e-13]],
            vec![Tier::Terrestrial, Tier::Terrestrial, Tier::Satellite],
            vec![50.0, 50.0, 40.0],
        )
        .unwrap();
        let rmin = 1e-12;
        let tau = coverage_floors(&ch, &[0, 0], rmin);
        assert_relative_eq!(tau[0], (1e-12f64 / 1e-10).max(1e-12 / 4e-11));
        assert_eq!(tau[1], 0.0);
        let p = power_feasibility_clamp(&[0.0, 0.0, 0.0], &ch, &[0, 0], rmin, true).unwrap();
        assert_relative_eq!(p[0], 0.025);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[2], 40.0);
        let p = power_feasibility_clamp(&[99.0, 99.0, 99.0], &ch, &[0, 0], rmin, false).unwrap();
        assert_eq!(p, vec![50.0, 50.0, 40.0]);
        // a 1e-16 link would need 1e4 mW
        let bad = ch2();
        assert!(matches!(
            power_feasibility_clamp(&[1.0; 3], &bad, &[0, 0, 1], rmin, true),
            Err(Error::InfeasibleCoverage { mbs: 1, .. })
        ));
    }

    #[test]
    fn repair_moves_uncovered_argmax() {
        let ch = ch2();
        let x = one_hot(&[Some(1), Some(0), Some(0)], 3);
        // UE 2 cannot be covered by anyone
        let err = serving_with_repair(&x, &ch, 1e-12);
        assert!(matches!(err, Err(Error::UncoverableUe { ue: 2 })));
        let x = one_hot(&[Some(1), Some(0)], 3);
        let ch = ChannelState::from_gains(
            array![[1e-10, 1e-14, 1e-13], [4e-11, 2e-13, 1e-13]],
            vec![Tier::Terrestrial, Tier::Terrestrial, Tier::Satellite],
            vec![50.0, 50.0, 40.0],
        )
        .unwrap();
        assert_eq!(serving_with_repair(&x, &ch, 1e-12).unwrap(), vec![0, 0]);
    }

    proptest! {
        #[test]
        fn prox_subgradient_condition(pt in proptest::collection::vec(-10.0f64..60.0, 1..8), frac in 0.0f64..1.5) {
            let norm = pt.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-6);
            let t = frac * norm;
            let p = prox_group(&pt, t);
            let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if pn > 0.0 {
                // p − p̃ + t p/‖p‖ = 0
                for (a, b) in p.iter().zip(&pt) {
                    prop_assert!((a - b + t * a / pn).abs() <= 1e-8 * (1.0 + b.abs()));
                }
            } else {
                // ‖p̃‖ ≤ t: 0 ∈ −p̃ + t·B
                prop_assert!(norm <= t * (1.0 + 1e-12));
            }
        }

        #[test]
        fn clamp_keeps_coverage(seed in 0u64..5000, k in 1usize..10) {
            let mut r = rng::stream(seed, Stream::Link, 2);
            let l = 4;
            let gain = Array2::from_shape_fn((k, l), |_| 10f64.powf(r.random_range(-12.0..-9.0)));
            let tiers = vec![Tier::Terrestrial, Tier::Terrestrial, Tier::Terrestrial, Tier::Satellite];
            let ch = ChannelState::from_gains(gain, tiers, vec![58.9; 4]).unwrap();
            let serving: Vec<usize> = (0..k).map(|_| r.random_range(0..l)).collect();
            let p_hat: Vec<f64> = (0..l).map(|_| r.random_range(0.0..80.0)).collect();
            let p = power_feasibility_clamp(&p_hat, &ch, &serving, 1e-12, true).unwrap();
            for (i, &j) in serving.iter().enumerate() {
                prop_assert!(ch.gain[[i, j]] * p[j] >= 1e-12 * (1.0 - 1e-12));
            }
            for (v, m) in p.iter().zip(&ch.max_power_mw) {
                prop_assert!(v <= m);
            }
        }
    }
}
