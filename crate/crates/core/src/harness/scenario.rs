use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::harness::config::ExperimentConfig;
use crate::types::{FanBeamRig, FanBeamView, ParallelRig, ParallelView, Rig};

/// Rig and per-view ground truth of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum Scenario {
    Parallel {
        rig: ParallelRig,
        views: Vec<ParallelView>,
    },
    Fanbeam {
        rig: FanBeamRig,
        views: Vec<FanBeamView>,
    },
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    rng.random_range(range[0]..range[1])
}

/// Draws the view parameters of one scenario.
///
/// Parallel: the first `⌈P/2⌉` angles lie in `(0, π/2)`, the rest in
/// `(π/2, π)`, each kept `angle_margin` away from the axes; shifts are
/// uniform on `shift_range`. Fan-beam: source positions uniform on
/// `lambda_range`, jitters uniform on `jitter_range`. Draws happen view by
/// view, angle (or source) before shift (or jitter).
pub fn sample_scenario<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Scenario {
    let p = config.views;
    match &config.rig {
        Rig::Parallel(rig) => {
            let m = config.angle_margin;
            let first = p.div_ceil(2);
            let views = (0..p)
                .map(|i| {
                    let range = if i < first {
                        [m, FRAC_PI_2 - m]
                    } else {
                        [FRAC_PI_2 + m, PI - m]
                    };
                    let alpha = uniform(rng, range);
                    ParallelView::new(alpha, uniform(rng, config.shift_range))
                })
                .collect();
            Scenario::Parallel {
                rig: rig.clone(),
                views,
            }
        }
        Rig::Fanbeam(rig) => {
            let views = (0..p)
                .map(|_| {
                    let lambda = uniform(rng, config.lambda_range);
                    FanBeamView::new(lambda, uniform(rng, config.jitter_range))
                })
                .collect();
            Scenario::Fanbeam { rig: *rig, views }
        }
    }
}

/// Adds independent `N(0, noise_level·pixel_size)` to every position.
pub fn add_detection_noise<R: Rng + ?Sized>(
    positions: &[f64],
    noise_level: f64,
    pixel_size: f64,
    rng: &mut R,
) -> Vec<f64> {
    let sigma = noise_level * pixel_size;
    if sigma == 0.0 {
        return positions.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
    positions.iter().map(|x| x + normal.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parallel_quadrants_and_margin() {
        let cfg = ExperimentConfig::parallel(ParallelRig::reference(), 80);
        let Scenario::Parallel { views, .. } = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(3)) else {
            panic!()
        };
        assert_eq!(views.len(), 80);
        assert!(views[..40].iter().all(|v| v.alpha > 0.0 && v.alpha < FRAC_PI_2));
        assert!(views[40..].iter().all(|v| v.alpha > FRAC_PI_2 && v.alpha < PI));
        for v in &views {
            for axis in [0.0, FRAC_PI_2, PI] {
                assert!((v.alpha - axis).abs() >= 1e-3);
            }
            assert!(v.shift >= -0.05 && v.shift < 0.05);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = ExperimentConfig::fanbeam(FanBeamRig::reference(), 30);
        let a = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        let Scenario::Fanbeam { views, .. } = a else { panic!() };
        assert!(views.iter().all(|v| (-5.0..5.0).contains(&v.lambda)));
        assert!(views.iter().all(|v| (-0.05..0.05).contains(&v.jitter)));
    }

    #[test]
    fn zero_noise_is_identity() {
        let x = [0.1, -2.0, 3.5];
        assert_eq!(add_detection_noise(&x, 0.0, 0.01, &mut ChaCha8Rng::seed_from_u64(0)), x);
    }

    #[test]
    fn noise_std_matches_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zeros = vec![0.0; 1_000_000];
        let noisy = add_detection_noise(&zeros, 1.0, 0.01, &mut rng);
        let n = noisy.len() as f64;
        let mean = noisy.iter().sum::<f64>() / n;
        let std = (noisy.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 0.01).abs() < 1e-4, "std {std}");
    }
}
