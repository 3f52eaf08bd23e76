use modnls::dispersion::{symbol, EquationCoeffs, Propagator, RecipExponent};
use modnls::harness::{
    check_embeddings, check_hoelder_like, check_homogeneous_strichartz, check_power_lipschitz, duhamel_forcing,
    hoelder_modulation_pair, hoelder_planchon_pair, EmbeddingExponents, EnsembleSpec, ExponentSplit, FieldLaw,
    HoelderMode, PairLaw, RatioReport,
};
use modnls::modspace::{Partition, PartitionKind, PartitionSpec};
use modnls::nonlinear::{LipschitzExponents, Pattern};
use modnls::solver::TimeWindow;
use modnls::spectral::{Exponent, GridSpec, SpectralField, Trajectory};
use modnls::{Complex64 as C64, Rational64};
use proptest::prelude::*;

fn setup() -> modnls::harness::CheckSetup {
    modnls::harness::CheckSetup {
        coeffs: EquationCoeffs::new(1.0, 0.0, 1.0).unwrap(),
        grid: GridSpec::with_periods(2, 4, 64).unwrap(),
        partition: PartitionSpec { kind: PartitionKind::PiecewiseSmoothBump, k_max: 2 },
        window: TimeWindow { t_minus: 0.0, t_plus: 2.0, steps: 16 },
        s: 0.0,
        q: Exponent::Finite(1.0),
    }
}

/// Band 0.1 at four periods keeps only the zero mode, so every draw is a constant.
fn constants(count: usize, amplitude: f64) -> EnsembleSpec {
    EnsembleSpec { count, seed: 5, law: FieldLaw::GaussianSpectrum { decay: 1.0 }, amplitude, band: 0.1 }
}

fn recip(n: i64, d: i64) -> RecipExponent {
    RecipExponent(Rational64::new(n, d))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn constant_draws_have_the_requested_mass() {
    let s = setup();
    let e = constants(4, 0.7);
    for i in 0..4 {
        let f = e.draw(i, 0, s.grid).unwrap();
        let nonzero = f.spectrum().iter().filter(|z| z.norm() > 1e-12).count();
        assert_eq!(nonzero, 1);
        assert!(close(f.lp_norm(Exponent::Finite(2.0)).unwrap(), 0.7, 1e-12));
    }
}

#[test]
fn homogeneous_ratio_for_constants() {
    let s = setup();
    let x = 2.0 * s.grid.half_period();
    let t = s.window.length();
    let report = check_homogeneous_strichartz(&s, &constants(5, 1.0), recip(1, 6), recip(1, 4), false).unwrap();
    let want = x.powf(2.0 / 6.0 - 1.0) * t.powf(0.25);
    for r in [&report.lebesgue, &report.lifted] {
        assert!(close(r.max, want, 1e-10), "{} vs {want}", r.max);
        assert!(close(r.median, want, 1e-10));
        assert!(r.bounded());
    }
    // the last two of seventeen samples span 1/16 of the window
    assert!(close(report.tail_share, (1.0f64 / 16.0).powf(0.25), 1e-10), "{}", report.tail_share);
}

#[test]
fn zero_data_is_excluded() {
    let s = setup();
    let report = check_homogeneous_strichartz(&s, &constants(3, 0.0), recip(1, 6), recip(1, 4), false).unwrap();
    assert_eq!(report.lebesgue.excluded, 3);
    assert_eq!(report.lebesgue.failures, 0);
    assert!(report.bounded());
}

#[test]
fn embedding_ratios_for_constants() {
    let s = setup();
    let x = 2.0 * s.grid.half_period();
    let e = EmbeddingExponents {
        s: 0.0,
        q: Exponent::Finite(1.0),
        r: Exponent::Finite(2.0),
        p1: Exponent::Finite(2.0),
        p2: Exponent::Finite(4.0),
    };
    let report = check_embeddings(&s, &constants(3, 1.3), &e).unwrap();
    assert!(close(report.minkowski.max, 1.0, 1e-10));
    assert!(close(report.minkowski.median, 1.0, 1e-10));
    let bern = x.powf(2.0 * (0.25 - 0.5));
    assert!(close(report.bernstein.max, bern, 1e-10), "{} vs {bern}", report.bernstein.max);
    assert!(report.bounded());
    let bad = EmbeddingExponents { q: Exponent::Finite(3.0), ..e };
    assert!(check_embeddings(&s, &constants(1, 1.0), &bad).is_err());
}

#[test]
fn hoelder_is_exact_for_constants() {
    let s = setup();
    let split = ExponentSplit::uniform(2, recip(1, 4), recip(1, 4)).unwrap();
    for mode in [HoelderMode::Modulation, HoelderMode::Planchon] {
        let r = check_hoelder_like(&s, &constants(3, 0.9), &split, mode, false).unwrap();
        assert!(close(r.max, 1.0, 1e-10), "{mode:?}: {}", r.max);
        assert!(close(r.median, 1.0, 1e-10));
    }
}

#[test]
fn multiplying_by_one_is_exact() {
    let s = setup();
    let g = s.grid;
    let partition = Partition::build(s.partition, g).unwrap();
    let f = EnsembleSpec { band: 1.0, ..constants(1, 1.0) }.draw(0, 0, g).unwrap();
    let one = SpectralField::constant(g, C64::new(1.0, 0.0));
    let split = ExponentSplit::new(vec![(recip(1, 4), recip(1, 2)), (recip(0, 1), recip(0, 1))], (recip(1, 4), recip(1, 2)))
        .unwrap();
    let (lhs, rhs) = hoelder_modulation_pair(&partition, &[f.clone(), one.clone()], &split, 0.0, Exponent::Finite(1.0)).unwrap();
    assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");

    let prop = Propagator::new(s.coeffs, g);
    let times = s.window.times();
    let u = modnls::harness::free_trajectory(&prop, &f, &times).unwrap();
    let ones = Trajectory::stationary(one, times).unwrap();
    let (lhs, rhs) = hoelder_planchon_pair(&partition, &[u, ones], &split, 0.0, Exponent::Finite(1.0)).unwrap();
    assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
}

#[test]
fn lipschitz_against_zero_for_constants() {
    let s = setup();
    let x = 2.0 * s.grid.half_period();
    let t = s.window.length();
    let amp = 0.8;
    let a = amp / x; // |c| with ‖c‖_{L²} = amp in two dimensions
    let pattern: Pattern = "u,conj,u,u".parse().unwrap();
    for l in [2usize, 3] {
        let e = LipschitzExponents {
            s: 0.0,
            q: Exponent::Finite(1.0),
            r_tilde: Exponent::Finite(1.0),
            p_tilde: Exponent::Finite(2.0),
            l,
            m: 3,
        };
        let r = check_power_lipschitz(&s, &constants(3, amp), &pattern, &e, PairLaw::Zero, false).unwrap();
        let k = (l + 1) as f64;
        let lhs = a.powi(4) * x.powf(2.0 / 2.0) * t;
        let lifted = a * x.powf(2.0 / (2.0 * k)) * t.powf(1.0 / k);
        let energy = a * x;
        let rhs = lifted.powi(l as i32 + 1) * energy.powi(3 - l as i32);
        assert!(close(r.max, lhs / rhs, 1e-10), "l={l}: {} vs {}", r.max, lhs / rhs);
        assert!(close(r.spread(), 1.0, 1e-10));
    }
}

#[test]
fn duhamel_of_a_stationary_mode() {
    let g = GridSpec::with_periods(2, 4, 32).unwrap();
    let c = EquationCoeffs::new(1.0, 0.0, 1.0).unwrap();
    let xi = [0.5, 0.25];
    let phi = symbol(&c, &xi);
    let prop = Propagator::new(c, g);
    let times = TimeWindow { t_minus: 0.0, t_plus: 2.0, steps: 512 }.times();
    let wave = SpectralField::plane_wave(g, &xi);
    let forcing = Trajectory::stationary(wave.clone(), times.clone()).unwrap();
    let response = duhamel_forcing(&prop, &forcing).unwrap();
    for (k, &t) in times.iter().enumerate().step_by(64) {
        // ∫_0^t e^{iφ(t-τ)} dτ = (e^{iφt} - 1)/(iφ)
        let factor = (C64::from_polar(1.0, phi * t) - 1.0) / C64::new(0.0, phi);
        assert!((factor.norm() - (2.0 * (phi * t / 2.0).sin() / phi).abs()).abs() < 1e-12);
        let err = response.fields()[k].sub(&wave.scale(factor)).unwrap().lp_norm(Exponent::Infinity).unwrap();
        assert!(err < 1e-6, "t={t}: {err}");
    }
}

#[test]
fn checks_are_deterministic() {
    let s = setup();
    let e = EnsembleSpec { count: 4, seed: 99, law: FieldLaw::GaussianSpectrum { decay: 1.0 }, amplitude: 1.0, band: 1.0 };
    let a = check_homogeneous_strichartz(&s, &e, recip(1, 6), recip(1, 4), false).unwrap();
    let b = check_homogeneous_strichartz(&s, &e, recip(1, 6), recip(1, 4), false).unwrap();
    assert_eq!(a, b);
    let other = check_homogeneous_strichartz(&s, &EnsembleSpec { seed: 100, ..e }, recip(1, 6), recip(1, 4), false).unwrap();
    assert_ne!(a.lebesgue.max, other.lebesgue.max);
}

#[test]
fn refinement_keeps_the_window() {
    let s = setup();
    let fine = s.refined().unwrap();
    assert_eq!(fine.grid.points(), 128);
    assert_eq!(fine.grid.half_period(), s.grid.half_period());
    assert_eq!(fine.window, s.window);
}

fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(
        prop_oneof![
            8 => (0.0..10.0f64, 0.01..10.0f64),
            1 => Just((0.0, 0.0)),
            1 => (0.01..10.0f64, Just(0.0)),
        ],
        1..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_counts_add_up(p in pairs()) {
        let r = RatioReport::from_pairs(&p, false).unwrap();
        let usable = r.samples.iter().filter(|s| s.ratio.is_some()).count();
        prop_assert_eq!(usable + r.failures + r.excluded, p.len());
        if usable > 0 {
            let min = r.samples.iter().filter_map(|s| s.ratio).fold(f64::INFINITY, f64::min);
            prop_assert!(min <= r.median && r.median <= r.max);
        }
        prop_assert_eq!(r.bounded(), r.failures == 0 && r.flagged.is_empty());
    }

    #[test]
    fn report_spread_is_scale_free(p in pairs(), lambda in 0.01..100.0f64) {
        let a = RatioReport::from_pairs(&p, false).unwrap();
        let scaled: Vec<(f64, f64)> = p.iter().map(|&(l, r)| (lambda * l, r)).collect();
        let b = RatioReport::from_pairs(&scaled, false).unwrap();
        prop_assert!((b.max - lambda * a.max).abs() <= 1e-12 * b.max.max(1e-300));
        prop_assert!((b.spread() - a.spread()).abs() <= 1e-9 * a.spread().max(1.0));
        prop_assert_eq!(a.flagged, b.flagged);
    }

    #[test]
    fn gaussian_draws_respect_mass_and_band(seed in any::<u64>(), sample in 0usize..50, amplitude in 0.01..5.0f64, band in prop_oneof![Just(0.5), Just(1.0), Just(1.5)]) {
        let g = GridSpec::with_periods(2, 4, 32).unwrap();
        let e = EnsembleSpec { count: 1, seed, law: FieldLaw::GaussianSpectrum { decay: 1.0 }, amplitude, band };
        let f = e.draw(sample, 0, g).unwrap();
        prop_assert!((f.lp_norm(Exponent::Finite(2.0)).unwrap() - amplitude).abs() <= 1e-12 * amplitude);
        let m = g.periods() as f64;
        let mut outside = 0.0f64;
        g.for_each_frequency(|bin, j| {
            if j.iter().any(|&a| (a as f64 / m).abs() > band + 1e-12) {
                outside = outside.max(f.spectrum()[bin].norm());
            }
        });
        prop_assert!(outside <= 1e-9 * g.len() as f64 * amplitude);
    }
}
