//! Noise injection at a prescribed level and the two regularizers used on
//! noisy observations: a spatial Gaussian mollifier and a temporal moving
//! average with a difference-quotient derivative estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::CoreError;
use crate::field::{norm_h, norm_v_semi, ScalarField};
use crate::trajectory::Trajectory;

/// Parameters of the noise model and both regularizers.
#[derive(Debug, Clone, Copy)]
pub struct NoiseConfig {
    /// Target perturbation size in the discrete L^p([0,T]; L²) norm.
    pub delta: f64,
    /// Time-integrability exponent, at least 2.
    pub p: f64,
    pub seed: u64,
    /// Mollifier standard deviation in grid cells; 0 disables it.
    pub sp_width: f64,
    /// Moving-average width in samples; odd, and 1 disables averaging.
    pub ti_window: usize,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.delta < 0.0 {
            return Err(CoreError::InvalidParam {
                name: "delta",
                message: format!("noise level must be nonnegative, got {}", self.delta),
            });
        }
        if self.p < 2.0 {
            return Err(CoreError::InvalidParam {
                name: "p",
                message: format!("exponent must be at least 2, got {}", self.p),
            });
        }
        if self.sp_width < 0.0 {
            return Err(CoreError::InvalidParam {
                name: "sp_width",
                message: format!("mollifier width must be nonnegative, got {}", self.sp_width),
            });
        }
        if self.ti_window % 2 == 0 {
            return Err(CoreError::EvenWindow {
                window: self.ti_window,
            });
        }
        Ok(())
    }
}

/// Regularized observations: smoothed data, its derivative estimate, and the
/// measured discrepancy levels when a clean reference was supplied.
#[derive(Debug)]
pub struct SmoothedData {
    pub z_reg: Trajectory,
    pub dz_reg: Trajectory,
    /// Per-sample gradient-norm discrepancy against the clean data.
    pub delta_sp: Option<Vec<f64>>,
    /// Time-integrated discrepancy of the derivative estimate.
    pub delta_ti: Option<f64>,
    /// Future samples each derivative estimate consumes.
    pub lookahead: usize,
}

/// Trapezoid quadrature weight for time sample k of len samples.
fn time_weight(k: usize, len: usize, dt: f64) -> f64 {
    if k == 0 || k + 1 == len {
        0.5 * dt
    } else {
        dt
    }
}

/// Discrete L^p-in-time norm of an H-valued sequence.
fn lp_time_norm(grid: crate::field::Grid, snaps: &[Vec<f64>], dt: f64, p: f64) -> f64 {
    let len = snaps.len();
    let sum: f64 = snaps
        .iter()
        .enumerate()
        .map(|(k, s)| time_weight(k, len, dt) * norm_h(grid, s).powf(p))
        .sum();
    sum.powf(1.0 / p)
}

/// Adds i.i.d. Gaussian perturbations rescaled so the discrete
/// L^p([0,T]; L²) norm of the difference equals delta exactly.
pub fn add_noise(clean: &Trajectory, cfg: &NoiseConfig) -> Result<Trajectory, CoreError> {
    cfg.validate()?;
    if cfg.delta == 0.0 {
        return Trajectory::new(clean.grid, clean.dt, clean.snapshots.clone());
    }
    let grid = clean.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut raw: Vec<Vec<f64>> = (0..clean.len())
        .map(|_| {
            (0..grid.n)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    let size = lp_time_norm(grid, &raw, clean.dt, cfg.p);
    let scale = cfg.delta / size;
    for snap in &mut raw {
        for v in snap.iter_mut() {
            *v *= scale;
        }
    }
    let noisy: Vec<Vec<f64>> = clean
        .snapshots
        .iter()
        .zip(&raw)
        .map(|(z, eta)| z.iter().zip(eta).map(|(a, b)| a + b).collect())
        .collect();
    Trajectory::new(grid, clean.dt, noisy)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|j| (-0.5 * (j as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= total;
    }
    kernel
}

fn convolve_zero_padded(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len() as i64;
    let radius = (kernel.len() as i64 - 1) / 2;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let j = i + t as i64 - radius;
                if (0..n).contains(&j) {
                    acc += w * values[j as usize];
                }
            }
            acc
        })
        .collect()
}

/// Gaussian mollification with zero padding beyond the Dirichlet boundary;
/// the kernel is truncated at four standard deviations and renormalized.
pub fn smooth_spatial(sample: &ScalarField, cfg: &NoiseConfig) -> ScalarField {
    if cfg.sp_width == 0.0 {
        return sample.clone();
    }
    let kernel = gaussian_kernel(cfg.sp_width);
    ScalarField {
        grid: sample.grid,
        values: convolve_zero_padded(&sample.values, &kernel),
    }
}

/// Index reflection about the sequence ends (mirror without edge repeat).
fn reflect(j: i64, last: i64) -> usize {
    let mut j = j;
    loop {
        if j < 0 {
            j = -j;
        } else if j > last {
            j = 2 * last - j;
        } else {
            return j as usize;
        }
    }
}

/// Applies the spatial mollifier to every sample, then a centered moving
/// average in time, and differentiates the averaged sequence (centered in
/// the interior, one-sided second order at the ends). When the clean data
/// and its derivative are supplied, the measured discrepancy levels are
/// reported alongside.
pub fn smooth_temporal(
    noisy: &Trajectory,
    cfg: &NoiseConfig,
    clean: Option<(&Trajectory, &Trajectory)>,
) -> Result<SmoothedData, CoreError> {
    cfg.validate()?;
    let len = noisy.len();
    if cfg.ti_window > len {
        return Err(CoreError::WindowTooLarge {
            window: cfg.ti_window,
            len,
        });
    }
    if len < 3 {
        return Err(CoreError::WindowTooLarge { window: 3, len });
    }
    let grid = noisy.grid;
    let n = grid.n;
    let dt = noisy.dt;
    let half = (cfg.ti_window - 1) / 2;

    let z_reg_snaps: Vec<Vec<f64>> = noisy
        .snapshots
        .iter()
        .map(|s| {
            smooth_spatial(
                &ScalarField {
                    grid,
                    values: s.clone(),
                },
                cfg,
            )
            .values
        })
        .collect();

    // Moving average of the spatially smoothed sequence, reflected ends.
    let last = (len - 1) as i64;
    let averaged: Vec<Vec<f64>> = (0..len)
        .map(|k| {
            let mut acc = vec![0.0; n];
            for j in -(half as i64)..=half as i64 {
                // Causality: nothing beyond the declared lookahead is touched.
                debug_assert!(k as i64 + j <= k as i64 + half as i64);
                let src = &z_reg_snaps[reflect(k as i64 + j, last)];
                for i in 0..n {
                    acc[i] += src[i];
                }
            }
            let w = 1.0 / cfg.ti_window as f64;
            acc.iter_mut().for_each(|v| *v *= w);
            acc
        })
        .collect();

    let dz_snaps: Vec<Vec<f64>> = (0..len)
        .map(|k| {
            (0..n)
                .map(|i| {
                    if k == 0 {
                        (-3.0 * averaged[0][i] + 4.0 * averaged[1][i] - averaged[2][i])
                            / (2.0 * dt)
                    } else if k == len - 1 {
                        (3.0 * averaged[len - 1][i] - 4.0 * averaged[len - 2][i]
                            + averaged[len - 3][i])
                            / (2.0 * dt)
                    } else {
                        (averaged[k + 1][i] - averaged[k - 1][i]) / (2.0 * dt)
                    }
                })
                .collect()
        })
        .collect();

    let (delta_sp, delta_ti) = match clean {
        None => (None, None),
        Some((z_clean, dz_clean)) => {
            let sp: Vec<f64> = (0..len)
                .map(|k| {
                    let diff: Vec<f64> = (0..n)
                        .map(|i| z_reg_snaps[k][i] - z_clean.snapshot(k)[i])
                        .collect();
                    norm_v_semi(grid, &diff)
                })
                .collect();
            let diff_snaps: Vec<Vec<f64>> = (0..len)
                .map(|k| {
                    (0..n)
                        .map(|i| dz_snaps[k][i] - dz_clean.snapshot(k)[i])
                        .collect()
                })
                .collect();
            let ti = lp_time_norm(grid, &diff_snaps, dt, cfg.p);
            (Some(sp), Some(ti))
        }
    };

    Ok(SmoothedData {
        z_reg: Trajectory::new(grid, dt, z_reg_snaps)?,
        dz_reg: Trajectory::new(grid, dt, dz_snaps)?,
        delta_sp,
        delta_ti,
        lookahead: half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use proptest::prelude::*;

    fn base_cfg() -> NoiseConfig {
        NoiseConfig {
            delta: 0.1,
            p: 2.0,
            seed: 42,
            sp_width: 0.0,
            ti_window: 1,
        }
    }

    fn sine_trajectory(n: usize, len: usize, dt: f64) -> Trajectory {
        let grid = Grid::uniform(0.0, 1.0, n).unwrap();
        let snaps: Vec<Vec<f64>> = (0..len)
            .map(|k| {
                let t = k as f64 * dt;
                grid.nodes()
                    .iter()
                    .map(|x| (-t).exp() * (std::f64::consts::PI * x).sin())
                    .collect()
            })
            .collect();
        Trajectory::new(grid, dt, snaps).unwrap()
    }

    #[test]
    fn zero_level_is_identity() {
        let clean = sine_trajectory(19, 21, 0.05);
        let mut cfg = base_cfg();
        cfg.delta = 0.0;
        let noisy = add_noise(&clean, &cfg).unwrap();
        assert_eq!(noisy.snapshots, clean.snapshots);
    }

    #[test]
    fn perturbation_norm_is_exact_for_p2_and_p4() {
        let clean = sine_trajectory(33, 41, 0.025);
        for p in [2.0, 4.0] {
            let mut cfg = base_cfg();
            cfg.p = p;
            let noisy = add_noise(&clean, &cfg).unwrap();
            let diff: Vec<Vec<f64>> = (0..clean.len())
                .map(|k| {
                    (0..33)
                        .map(|i| noisy.snapshot(k)[i] - clean.snapshot(k)[i])
                        .collect()
                })
                .collect();
            let measured = lp_time_norm(clean.grid, &diff, clean.dt, p);
            assert!(
                (measured - cfg.delta).abs() <= 1e-12 * cfg.delta,
                "p = {p}: measured {measured}"
            );
        }
    }

    #[test]
    fn seeds_change_samples_but_not_the_norm() {
        let clean = sine_trajectory(19, 21, 0.05);
        let mut cfg = base_cfg();
        let a = add_noise(&clean, &cfg).unwrap();
        let again = add_noise(&clean, &cfg).unwrap();
        assert_eq!(a.snapshots, again.snapshots, "same seed must reproduce");
        cfg.seed = 43;
        let b = add_noise(&clean, &cfg).unwrap();
        assert_ne!(a.snapshots, b.snapshots, "different seed, different draw");
    }

    #[test]
    fn mollifier_is_identity_at_zero_width_and_interior_exact_on_constants() {
        let grid = Grid::uniform(0.0, 1.0, 99).unwrap();
        let ones = ScalarField::constant(grid, 1.0);
        let mut cfg = base_cfg();
        cfg.sp_width = 0.0;
        assert_eq!(smooth_spatial(&ones, &cfg).values, ones.values);
        cfg.sp_width = 3.0;
        let smoothed = smooth_spatial(&ones, &cfg);
        let margin = (4.0f64 * 3.0).ceil() as usize;
        for i in margin..99 - margin {
            assert!((smoothed.values[i] - 1.0).abs() < 1e-12, "node {i}");
        }
        // Zero padding must pull the profile down near the boundary.
        assert!(smoothed.values[0] < 1.0 - 1e-3);
    }

    #[test]
    fn mollifier_damps_noise_gradients_monotonically() {
        let grid = Grid::uniform(0.0, 1.0, 99).unwrap();
        let trials = 100;
        let widths = [1.0, 2.0, 3.0];
        let mut mean_ratio = [0.0f64; 3];
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let field = ScalarField {
                grid,
                values: (0..99).map(|_| StandardNormal.sample(&mut rng)).collect(),
            };
            let before = norm_v_semi(grid, &field.values);
            for (w, acc) in widths.iter().zip(mean_ratio.iter_mut()) {
                let mut cfg = base_cfg();
                cfg.sp_width = *w;
                let after = norm_v_semi(grid, &smooth_spatial(&field, &cfg).values);
                assert!(after <= before, "smoothing must not add gradient energy");
                *acc += after / before / trials as f64;
            }
        }
        assert!(mean_ratio[0] > mean_ratio[1] && mean_ratio[1] > mean_ratio[2]);
    }

    #[test]
    fn constant_in_time_data_has_zero_derivative_estimate() {
        let grid = Grid::uniform(0.0, 1.0, 19).unwrap();
        let snaps = vec![vec![2.5; 19]; 31];
        let traj = Trajectory::new(grid, 0.05, snaps).unwrap();
        let mut cfg = base_cfg();
        cfg.ti_window = 7;
        let smoothed = smooth_temporal(&traj, &cfg, None).unwrap();
        for k in 0..smoothed.dz_reg.len() {
            for v in smoothed.dz_reg.snapshot(k) {
                assert!(v.abs() < 1e-12);
            }
        }
        assert_eq!(smoothed.lookahead, 3);
    }

    #[test]
    fn derivative_estimate_tracks_analytic_decay() {
        let dt = 1e-2;
        let traj = sine_trajectory(33, 101, dt);
        let mut cfg = base_cfg();
        cfg.ti_window = 5;
        let smoothed = smooth_temporal(&traj, &cfg, None).unwrap();
        // Bias of the window average plus the quotient error, both O(dt²);
        // ends excluded since reflection flattens the average there.
        let mut worst = 0.0f64;
        for k in 3..traj.len() - 3 {
            let t = k as f64 * dt;
            for (i, &x) in traj.grid.nodes().iter().enumerate() {
                let exact = -(-t).exp() * (std::f64::consts::PI * x).sin();
                worst = worst.max((smoothed.dz_reg.snapshot(k)[i] - exact).abs());
            }
        }
        assert!(worst < 5e-4, "derivative deviation {worst:.2e}");
    }

    #[test]
    fn wider_windows_shrink_the_derivative_discrepancy() {
        let grid = Grid::uniform(0.0, 1.0, 33).unwrap();
        let dt = 0.01;
        let len = 101;
        let clean = Trajectory::new(grid, dt, vec![vec![1.0; 33]; len]).unwrap();
        let zero_dz = Trajectory::new(grid, dt, vec![vec![0.0; 33]; len]).unwrap();
        let mut total = [0.0f64; 2];
        for trial in 0..100 {
            for (slot, window) in [(0usize, 3usize), (1, 11)] {
                let cfg = NoiseConfig {
                    delta: 0.05,
                    p: 2.0,
                    seed: 5000 + trial,
                    sp_width: 0.0,
                    ti_window: window,
                };
                let noisy = add_noise(&clean, &cfg).unwrap();
                let sm = smooth_temporal(&noisy, &cfg, Some((&clean, &zero_dz))).unwrap();
                total[slot] += sm.delta_ti.unwrap();
            }
        }
        assert!(
            total[1] < total[0],
            "window 11 mean {} should beat window 3 mean {}",
            total[1] / 100.0,
            total[0] / 100.0
        );
    }

    #[test]
    fn window_errors_are_reported() {
        let traj = sine_trajectory(9, 11, 0.1);
        let mut cfg = base_cfg();
        cfg.ti_window = 4;
        assert!(matches!(
            smooth_temporal(&traj, &cfg, None),
            Err(CoreError::EvenWindow { window: 4 })
        ));
        cfg.ti_window = 13;
        assert!(matches!(
            smooth_temporal(&traj, &cfg, None),
            Err(CoreError::WindowTooLarge { window: 13, len: 11 })
        ));
    }

    proptest! {
        #[test]
        fn both_regularizers_are_linear(
            seed in 0u64..1000,
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let grid = Grid::uniform(0.0, 1.0, 25).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || -> Vec<f64> {
                (0..25).map(|_| StandardNormal.sample(&mut rng)).collect()
            };
            let u = draw();
            let v = draw();
            let combo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();

            let mut cfg = base_cfg();
            cfg.sp_width = 2.0;
            let s = |vals: &[f64]| -> Vec<f64> {
                smooth_spatial(&ScalarField { grid, values: vals.to_vec() }, &cfg).values
            };
            let su = s(&u);
            let sv = s(&v);
            let sc = s(&combo);
            for i in 0..25 {
                let lin = alpha * su[i] + beta * sv[i];
                prop_assert!((sc[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
            }

            // Temporal regularizer on trajectories built from the two draws.
            let mk = |a: &[f64], b: &[f64], ca: f64, cb: f64| -> Trajectory {
                let snaps: Vec<Vec<f64>> = (0..9)
                    .map(|k| {
                        (0..25)
                            .map(|i| ca * a[i] * (k as f64 * 0.3).cos() + cb * b[i] / (k + 1) as f64)
                            .collect()
                    })
                    .collect();
                Trajectory::new(grid, 0.1, snaps).unwrap()
            };
            let mut tcfg = base_cfg();
            tcfg.ti_window = 3;
            tcfg.sp_width = 1.0;
            let ta = mk(&u, &v, 1.0, 0.0);
            let tb = mk(&u, &v, 0.0, 1.0);
            let tc = mk(&u, &v, alpha, beta);
            let ra = smooth_temporal(&ta, &tcfg, None).unwrap();
            let rb = smooth_temporal(&tb, &tcfg, None).unwrap();
            let rc = smooth_temporal(&tc, &tcfg, None).unwrap();
            for k in 0..9 {
                for i in 0..25 {
                    let lin = alpha * ra.dz_reg.snapshot(k)[i] + beta * rb.dz_reg.snapshot(k)[i];
                    let got = rc.dz_reg.snapshot(k)[i];
                    prop_assert!((got - lin).abs() <= 1e-9 * (1.0 + lin.abs()));
                }
            }
        }
    }
}
