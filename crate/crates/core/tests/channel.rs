use std::f64::consts::PI;

use mixmimo::channel::{steering_vector, ArrayGeometry, ChannelModel, ChannelRealization, Fading, Tap, TapProfile};
use mixmimo::numerology::{reference_pair, validate_numerology_set};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

const FS: f64 = 30.72e6;

#[test]
fn average_gain_per_antenna_is_one() {
    let model = ChannelModel::new(TapProfile::cdl_a_like(), ArrayGeometry::dual_pol(8), FS).unwrap();
    let draws = 4000;
    let mut acc = [0.0; 8];
    for seed in 0..draws {
        let g = model.realize(60.0, seed).gains().clone();
        for (a, v) in acc.iter_mut().enumerate() {
            *v += g.column(a).norm_squared();
        }
    }
    for v in acc {
        let mean = v / draws as f64;
        // sum of |CN(0,1)|^2 over 4000 draws: relative std ~1.6%
        assert!((mean - 1.0).abs() < 0.06, "mean gain {mean}");
    }
}

#[test]
fn steering_vector_matches_hand_values() {
    let g = ArrayGeometry::single_pol(4);
    let a = steering_vector(&g, 30.0);
    // phase step pi * cos(30 deg - 90 deg + 90 deg) = pi * cos(30 deg)
    let step = PI * (30f64).to_radians().cos();
    for k in 0..4 {
        let want = Complex64::from_polar(1.0, step * k as f64);
        assert!((a[k] - want).norm() < 1e-12);
    }
    let broadside = steering_vector(&g, 90.0);
    assert!(broadside.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
}

#[test]
fn dual_pol_halves_share_positions() {
    let g = ArrayGeometry::dual_pol(8);
    let a = steering_vector(&g, 17.0);
    for k in 0..4 {
        assert!((a[k] - a[k + 4]).norm() < 1e-12);
    }
}

#[test]
fn two_tap_response_has_closed_form() {
    let delay = 1e-6;
    let model = ChannelModel::new(TapProfile::two_tap(delay), ArrayGeometry::single_pol(1), FS)
        .unwrap()
        .with_fading(Fading::Fixed);
    let ch = model.realize(90.0, 0);
    let d = (delay * FS).round();
    let grid: Vec<f64> = (0..64).map(|j| -480e3 + j as f64 * 15e3).collect();
    let h = ch.frequency_response(&grid).unwrap();
    for (j, f) in grid.iter().enumerate() {
        // |1 + e^{-i w}| / sqrt(2) = sqrt(2) |cos(w/2)|
        let w = 2.0 * PI * f * d / FS;
        let want = 2f64.sqrt() * (w / 2.0).cos().abs();
        assert!((h[(j, 0)].norm() - want).abs() < 1e-12);
    }
}

fn naive_dft_response(gains: &DMatrix<Complex64>, delays: &[usize], n: usize, bin: i64) -> Vec<Complex64> {
    // impulse response on an n-point grid, then one DFT bin
    let m = gains.ncols();
    (0..m)
        .map(|a| {
            let mut imp = vec![Complex64::new(0.0, 0.0); n];
            for (l, &d) in delays.iter().enumerate() {
                imp[d] += gains[(l, a)];
            }
            imp.iter()
                .enumerate()
                .map(|(t, x)| x * Complex64::from_polar(1.0, -2.0 * PI * (bin * t as i64) as f64 / n as f64))
                .sum()
        })
        .collect()
}

#[test]
fn frequency_response_equals_dft_of_impulse_response() {
    let model = ChannelModel::new(TapProfile::cdl_a_like(), ArrayGeometry::dual_pol(4), FS).unwrap();
    let ch = model.realize(120.0, 9);
    let n = 2048;
    let scs = FS / n as f64;
    for bin in [-600i64, -1, 0, 5, 599] {
        let h = ch.frequency_response(&[bin as f64 * scs]).unwrap();
        let want = naive_dft_response(ch.gains(), ch.delays(), n, bin);
        for (a, w) in want.iter().enumerate() {
            assert!((h[(0, a)] - w).norm() < 1e-9);
        }
    }
}

#[test]
fn coarse_grid_response_is_exact_subsample_of_fine() {
    let set = validate_numerology_set(&reference_pair(), true).unwrap();
    let set = set.clone().with_anchor(set.centered_anchor(1152)).unwrap();
    let model = ChannelModel::new(TapProfile::cdl_a_like(), ArrayGeometry::dual_pol(16), FS).unwrap();
    let ch = model.realize(45.0, 3);
    let fine = ch.frequency_response(&set.group_grid(0, 1152).unwrap()).unwrap();
    let coarse = ch.frequency_response(&set.group_grid(1, 576).unwrap()).unwrap();
    for j in 0..576 {
        for a in 0..16 {
            assert_eq!(coarse[(j, a)], fine[(2 * j, a)]);
        }
    }
}

#[test]
fn beyond_nyquist_is_rejected() {
    let ch = ChannelRealization::identity(2, FS);
    assert!(ch.frequency_response(&[FS]).is_err());
}

#[test]
fn bad_profiles_are_rejected() {
    let tap = |d: f64| Tap { delay_s: d, power_db: 0.0, aod_offset_deg: None };
    assert!(TapProfile::new(vec![]).is_err());
    assert!(TapProfile::new(vec![tap(1e-6), tap(0.0)]).is_err());
    assert!(TapProfile::new(vec![tap(-1e-9)]).is_err());
    assert!(ChannelModel::new(TapProfile::flat(), ArrayGeometry::dual_pol(3), FS).is_err());
}

proptest! {
    #[test]
    fn realization_is_a_function_of_seed(seed in any::<u64>(), angle in 0.0f64..180.0) {
        let model = ChannelModel::new(TapProfile::cdl_a_like(), ArrayGeometry::dual_pol(4), FS).unwrap();
        prop_assert_eq!(model.realize(angle, seed), model.realize(angle, seed));
    }

    #[test]
    fn response_is_linear_in_gains(seed in any::<u64>(), s in -3.0f64..3.0) {
        let model = ChannelModel::new(TapProfile::cdl_a_like(), ArrayGeometry::dual_pol(2), FS).unwrap();
        let ch = model.realize(70.0, seed);
        let scaled = ChannelRealization::from_taps(ch.gains() * Complex64::new(s, 0.5), ch.delays().to_vec(), FS).unwrap();
        let grid = [-1e6, 0.0, 2.5e6];
        let a = ch.frequency_response(&grid).unwrap() * Complex64::new(s, 0.5);
        let b = scaled.frequency_response(&grid).unwrap();
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn profiles_normalize_to_unit_power(p in proptest::collection::vec(-30.0f64..10.0, 1..8)) {
        let taps = p.iter().enumerate().map(|(i, &db)| Tap { delay_s: i as f64 * 1e-7, power_db: db, aod_offset_deg: None }).collect();
        let prof = TapProfile::new(taps).unwrap();
        prop_assert!((prof.linear_powers().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
