use mixmimo::channel::{ArrayGeometry, ChannelModel, TapProfile};
use mixmimo::numerology::{reference_pair, validate_numerology_set};
use mixmimo::precoding::{
    alignment_spec, build_precoder_set, cb_precoder, effective_channels, precoders_from_effective, sb_effective_channel,
    slnr_matrix, slnr_precoder, subband_ranges, GroupChannels, Method,
};
use mixmimo::Error;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cmat(seed: u64, r: usize, c: usize) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn unitary(seed: u64, m: usize) -> DMatrix<Complex64> {
    cmat(seed, m, m).qr().q()
}

/// Leakage-plus-noise ratio of column `w` for row `u` of `h`.
fn slnr_of(h: &DMatrix<Complex64>, u: usize, w: &DVector<Complex64>, sigma2: f64) -> f64 {
    let sig = (h.row(u) * w)[0].norm_sqr();
    let leak: f64 = (0..h.nrows()).filter(|&j| j != u).map(|j| (h.row(j) * w)[0].norm_sqr()).sum();
    sig / (leak + sigma2 * w.norm_squared())
}

/// Closed-form optimum `h_u B^-1 h_u^H` with `B` the leakage-plus-noise matrix.
fn slnr_optimum(h: &DMatrix<Complex64>, u: usize, sigma2: f64) -> f64 {
    let m = h.ncols();
    let mut b = DMatrix::<Complex64>::identity(m, m) * Complex64::new(sigma2, 0.0);
    for j in (0..h.nrows()).filter(|&j| j != u) {
        b += h.row(j).adjoint() * h.row(j);
    }
    let hu = h.row(u);
    (hu * b.try_inverse().unwrap() * hu.adjoint())[0].re
}

#[test]
fn slnr_column_attains_closed_form_optimum() {
    for (seed, k, m) in [(1, 2, 2), (2, 2, 8), (3, 4, 16), (4, 3, 3)] {
        let h = cmat(seed, k, m);
        for sigma2 in [1e-3, 0.1, 10.0] {
            let p = slnr_matrix(&h, sigma2).unwrap();
            for u in 0..k {
                let got = slnr_of(&h, u, &p.column(u).into_owned(), sigma2);
                let want = slnr_optimum(&h, u, sigma2);
                assert!((got - want).abs() <= 1e-9 * want, "seed {seed} u {u}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn push_through_form_matches_full_inverse() {
    let h = cmat(7, 3, 8);
    let p = slnr_matrix(&h, 0.05).unwrap();
    for u in 0..3 {
        let direct = slnr_precoder(&h.row(u).transpose(), &h, 0.05).unwrap();
        assert!((p.column(u) - &direct).norm() < 1e-10);
    }
}

#[test]
fn large_noise_slnr_tends_to_cb() {
    let h = cmat(8, 2, 8);
    let p = slnr_matrix(&h, 1e9).unwrap();
    let cb = cb_precoder(&h.row(0).transpose()).unwrap();
    let along = cb.dotc(&p.column(0));
    assert!((p.column(0) - &cb * along).norm() < 1e-8);
}

#[test]
fn invalid_inputs_are_rejected() {
    let h = cmat(9, 2, 4);
    assert!(matches!(slnr_matrix(&h, 0.0), Err(Error::Parameter(_))));
    assert!(matches!(slnr_matrix(&h, f64::NAN), Err(Error::Parameter(_))));
    assert!(matches!(cb_precoder(&DVector::zeros(4)), Err(Error::ZeroChannel)));
    let short = DVector::from_element(3, Complex64::new(1.0, 0.0));
    assert!(matches!(slnr_precoder(&short, &h, 0.1), Err(Error::Dimension(_))));
    assert!(matches!(alignment_spec(15e3, 20e3, 33), Err(Error::Grid(_))));
}

#[test]
fn rank_one_subband_recovers_the_direction() {
    let v = cmat(10, 1, 8).row(0).transpose();
    let coefs = cmat(11, 48, 1);
    let block = DMatrix::from_fn(48, 8, |j, a| coefs[(j, 0)] * v[a]);
    let h = sb_effective_channel(&block);
    // lambda_max = ||v||^2 * mean |c_j|^2 for a rank-one covariance
    let power = coefs.norm_squared() / 48.0 * v.norm_squared();
    assert!((h.norm_squared() - power).abs() < 1e-10 * power);
    let cos = h.dotc(&v).norm() / (h.norm() * v.norm());
    assert!((1.0 - cos).abs() < 1e-12);
    let first = h.iter().find(|z| z.norm() > 1e-12).unwrap();
    assert!(first.im.abs() < 1e-12 && first.re > 0.0);
}

#[test]
fn subbands_cover_used_band() {
    let r = subband_ranges(100, 48);
    assert_eq!(r, vec![0..48, 48..96, 96..100]);
}

fn reference_channels(m: usize, seed: u64) -> Vec<GroupChannels> {
    let set = validate_numerology_set(&reference_pair(), true).unwrap();
    let set = set.clone().with_anchor(set.centered_anchor(1152)).unwrap();
    let model = ChannelModel::new(TapProfile::cdl_a_like(), ArrayGeometry::dual_pol(m), set.sample_rate()).unwrap();
    [(135.0, 1152), (45.0, 576)]
        .iter()
        .enumerate()
        .map(|(t, &(angle, used))| GroupChannels {
            scs_hz: set.group(t).scs_hz,
            users: vec![model.realize(angle, seed * 10 + t as u64).frequency_response(&set.group_grid(t, used).unwrap()).unwrap()],
        })
        .collect()
}

#[test]
fn precoder_columns_share_the_power_budget() {
    for method in [Method::Cb, Method::Slnr] {
        let set = build_precoder_set(&reference_channels(8, 1), method, 0.01, 48, 33).unwrap();
        assert_eq!(set.groups[0].subbands.len(), 24);
        assert_eq!(set.groups[1].subbands.len(), 12);
        for n in set.column_norms().into_iter().flatten().flatten() {
            assert!((n - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }
}

#[test]
fn slnr_leaks_less_than_cb_into_the_other_group() {
    let ch = reference_channels(16, 2);
    let eff = effective_channels(&ch, 48, 33).unwrap();
    let cb = precoders_from_effective(&eff, Method::Cb, 1e-3).unwrap();
    let slnr = precoders_from_effective(&eff, Method::Slnr, 1e-3).unwrap();
    let leak = |p: &mixmimo::precoding::PrecoderSet| -> f64 {
        eff.stacked[0]
            .iter()
            .zip(&p.groups[0].subbands)
            .map(|(sb, pr)| (sb.matrix.row(1) * pr.matrix.column(0))[0].norm_sqr())
            .sum()
    };
    assert!(leak(&slnr) < 0.1 * leak(&cb), "{} vs {}", leak(&slnr), leak(&cb));
}

#[test]
fn effective_channels_do_not_depend_on_method() {
    let ch = reference_channels(4, 3);
    let eff = effective_channels(&ch, 48, 33).unwrap();
    let direct = build_precoder_set(&ch, Method::Slnr, 0.2, 48, 33).unwrap();
    assert_eq!(precoders_from_effective(&eff, Method::Slnr, 0.2).unwrap(), direct);
}

proptest! {
    #[test]
    fn slnr_is_unitarily_equivariant(seed in 0u64..1000, k in 1usize..4, sigma2 in 1e-3f64..10.0) {
        let m = 4;
        let h = cmat(seed, k, m);
        let u = unitary(seed + 1, m);
        let rotated = slnr_matrix(&(&h * &u), sigma2).unwrap();
        let want = u.adjoint() * slnr_matrix(&h, sigma2).unwrap();
        prop_assert!((rotated - want).norm() < 1e-9);
    }

    #[test]
    fn slnr_is_scale_equivariant(seed in 0u64..1000, a in 0.1f64..10.0, sigma2 in 1e-3f64..1.0) {
        let h = cmat(seed, 2, 6);
        let p = slnr_matrix(&h, sigma2).unwrap();
        let q = slnr_matrix(&(&h * Complex64::new(a, 0.0)), a * a * sigma2).unwrap();
        prop_assert!((p - q).norm() < 1e-9);
    }

    #[test]
    fn no_direction_beats_the_slnr_column(seed in 0u64..1000, probe in 0u64..1000) {
        let h = cmat(seed, 3, 4);
        let w = slnr_matrix(&h, 0.1).unwrap().column(0).into_owned();
        let best = slnr_of(&h, 0, &w, 0.1);
        let other = cmat(probe + 5000, 4, 1).column(0).into_owned();
        prop_assert!(slnr_of(&h, 0, &other, 0.1) <= best * (1.0 + 1e-12));
    }

    #[test]
    fn effective_channel_ignores_common_phase(seed in 0u64..1000, theta in 0.0f64..std::f64::consts::TAU) {
        let block = cmat(seed, 12, 4);
        let a = sb_effective_channel(&block);
        let b = sb_effective_channel(&(&block * Complex64::from_polar(1.0, theta)));
        prop_assert!((a - b).norm() < 1e-9);
    }
}
