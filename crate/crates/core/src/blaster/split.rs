use ndarray::Array2;

use crate::scenario::Tier;

/// Satellite share of the association mass, K_S / K.
pub fn satellite_mass(x: &Array2<f64>, tiers: &[Tier]) -> f64 {
    let k = x.nrows() as f64;
    if k == 0.0 {
        return 0.0;
    }
    let mut sat = 0.0;
    for (j, t) in tiers.iter().enumerate() {
        if *t == Tier::Satellite {
            sat += x.column(j).sum();
        }
    }
    sat / k
}

/// ε* = K_S / K kept inside [floor, 1 − floor].
pub fn optimal_split(x: &Array2<f64>, tiers: &[Tier], floor: f64) -> f64 {
    satellite_mass(x, tiers).clamp(floor, 1.0 - floor)
}

/// dSLT/dε for a binary association: K_S/ε − (K − K_S)/(1 − ε).
pub fn split_derivative(k_s: f64, k: f64, epsilon: f64) -> f64 {
    k_s / epsilon - (k - k_s) / (1.0 - epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blaster::objective::Problem;
    use crate::channel::ChannelState;
    use crate::linklayer::{self, one_hot, Allocation, LinkParams};
    use crate::rng::{self, Stream};
    use rand::Rng;

    #[test]
    fn examples() {
        let tiers = [Tier::Terrestrial, Tier::Satellite];
        let serving: Vec<Option<usize>> = (0..100).map(|i| Some(usize::from(i < 25))).collect();
        let x = one_hot(&serving, 2);
        assert_eq!(optimal_split(&x, &tiers, 1e-3), 0.25);
        let none = one_hot(&[Some(0); 10], 2);
        assert_eq!(optimal_split(&none, &tiers, 1e-3), 1e-3);
        let all = one_hot(&[Some(1); 10], 2);
        assert_eq!(optimal_split(&all, &tiers, 1e-3), 1.0 - 1e-3);
    }

    #[test]
    fn stationary_at_optimum() {
        for ks in 1..20 {
            let e = ks as f64 / 20.0;
            if ks < 20 {
                assert!(split_derivative(ks as f64, 20.0, e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn beats_grid_search() {
        let link = LinkParams::default();
        for seed in 0..20u64 {
            let mut r = rng::stream(seed, Stream::Link, 3);
            let k = 12;
            let tiers = vec![Tier::Terrestrial, Tier::Terrestrial, Tier::Terrestrial, Tier::Satellite];
            let gain = Array2::from_shape_fn((k, 4), |_| 10f64.powf(r.random_range(-13.0..-9.0)));
            let ch = ChannelState::from_gains(gain, tiers.clone(), vec![58.9, 58.9, 58.9, 38.0]).unwrap();
            let serving: Vec<Option<usize>> = (0..k)
                .map(|i| Some(if i < 2 { 3 } else { r.random_range(0..4) }))
                .collect();
            let x = one_hot(&serving, 4);
            let prob = Problem {
                ch: &ch,
                psi: vec![100.0; 4],
                noise_mw: link.noise_mw(),
                total_bandwidth_hz: link.total_bandwidth_hz,
                rsrp_min_mw: link.rsrp_min_mw(),
            };
            let slt = |e: f64| {
                let a = Allocation { x: x.clone(), p: ch.max_power_mw.clone(), epsilon: e };
                linklayer::sum_log_throughput(&linklayer::ue_rates(&a, &ch, prob.bandwidth(e).unwrap(), prob.noise_mw)).unwrap()
            };
            let e_star = optimal_split(&x, &tiers, 1e-3);
            let grid_best = (1..100).map(|n| slt(n as f64 / 100.0)).fold(f64::NEG_INFINITY, f64::max);
            assert!(slt(e_star) >= grid_best - 1e-9, "seed {seed}");
            let ks = e_star * k as f64;
            assert!(split_derivative(ks, k as f64, e_star).abs() < 1e-9);
        }
    }
}
