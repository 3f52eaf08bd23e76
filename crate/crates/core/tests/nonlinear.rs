use modnls::modspace::{Partition, PartitionKind, PartitionSpec};
use modnls::nonlinear::{
    aliasing_residual, apply_exponential, apply_power, exponential_series, exponential_tail_bound,
    power_lipschitz_witness, scalar_lipschitz_ratio, LipschitzExponents, NonlinSpec, Pattern,
};
use modnls::spectral::{uniform_times, Exponent, GridSpec, SpectralField, Trajectory};
use modnls::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> GridSpec {
    GridSpec::with_periods(1, 4, 64).unwrap()
}

fn smooth_field(g: GridSpec, coeffs: &[(f64, f64)], band: i64) -> SpectralField {
    let mut spec = vec![C64::new(0.0, 0.0); g.len()];
    g.for_each_frequency(|i, lattice| {
        let j = lattice[0];
        if j.abs() <= band {
            let (a, b) = coeffs[(j + band) as usize % coeffs.len()];
            spec[i] = C64::new(a, b) * g.len() as f64;
        }
    });
    SpectralField::from_spectrum(g, spec).unwrap()
}

fn sup(f: &SpectralField) -> f64 {
    f.lp_norm(Exponent::Infinity).unwrap()
}

#[test]
fn cubic_on_a_constant() {
    let g = grid();
    for a in [C64::new(1.0, 0.0), C64::new(0.5, -0.25), C64::new(0.0, 2.0)] {
        let f = apply_power(&NonlinSpec::gauge_power(1, -1.0), &SpectralField::constant(g, a)).unwrap();
        for z in f.values() {
            assert!((z + a.norm_sqr() * a).norm() < 1e-14);
        }
    }
}

#[test]
fn pure_power_triples_the_frequency() {
    let g = grid();
    let f = apply_power(&NonlinSpec::power("u,u,u", C64::new(1.0, 0.0)).unwrap(), &SpectralField::plane_wave(g, &[0.5]))
        .unwrap();
    let want = SpectralField::plane_wave(g, &[1.5]);
    assert!(f.sub(&want).unwrap().lp_norm(Exponent::Infinity).unwrap() < 1e-13);
    // u·ū·u keeps the frequency
    let h = apply_power(&NonlinSpec::gauge_power(1, 1.0), &SpectralField::plane_wave(g, &[0.5])).unwrap();
    assert!(h.sub(&SpectralField::plane_wave(g, &[0.5])).unwrap().lp_norm(Exponent::Infinity).unwrap() < 1e-13);
}

#[test]
fn patterns_parse_and_count() {
    let p: Pattern = "u,conj,u,u".parse().unwrap();
    assert_eq!(p.degree(), 3);
    assert_eq!(p.plain_count(), 3);
    assert_eq!(p.conjugate_count(), 1);
    assert_eq!(p.gauge_order(), None);
    assert_eq!(Pattern::gauge(2).to_string(), "u,conj,u,conj,u");
    assert!("u,,u".parse::<Pattern>().is_err());
    assert!(NonlinSpec::zero().is_zero());
}

#[test]
fn exponential_closed_form_on_a_constant() {
    let lambda = C64::new(-1.0, 0.5);
    let spec = NonlinSpec::exponential(lambda, 1.5, 4).unwrap();
    let a = C64::new(0.3, 0.4);
    let f = apply_exponential(&spec, &SpectralField::constant(grid(), a)).unwrap();
    let want = lambda * ((1.5f64 * 0.25).exp() - 1.0) * a;
    assert!((f.values()[7] - want).norm() < 1e-15);
    assert!(NonlinSpec::exponential(lambda, 0.0, 4).is_err());
    assert!(NonlinSpec::exponential(lambda, 1.0, 0).is_err());
}

#[test]
fn series_stays_within_the_tail_bound() {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let coeffs: Vec<(f64, f64)> = (0..9).map(|_| (rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05))).collect();
        let u = smooth_field(g, &coeffs, 4);
        let lambda = C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let rho = rng.random_range(0.2..3.0);
        let spec = NonlinSpec::exponential(lambda, rho, 12).unwrap();
        let closed = apply_exponential(&spec, &u).unwrap();
        let s = sup(&u);
        for cutoff in 1..=12 {
            let series = exponential_series(&spec, &u, cutoff).unwrap();
            let dev = sup(&closed.sub(&series).unwrap());
            assert!(dev <= exponential_tail_bound(lambda, rho, cutoff, s), "cutoff {cutoff}: {dev}");
        }
    }
}

#[test]
fn tail_bound_is_tight_for_a_real_constant() {
    // for real x the remainder e^x - Σ_{k≤M} x^k/k! lies between x^{M+1}/(M+1)! and e^x x^{M+1}/(M+1)!
    let g = grid();
    let a = 0.8;
    let spec = NonlinSpec::exponential(C64::new(1.0, 0.0), 1.0, 12).unwrap();
    let u = SpectralField::constant(g, C64::new(a, 0.0));
    let closed = apply_exponential(&spec, &u).unwrap();
    for cutoff in 1..=6u32 {
        let series = exponential_series(&spec, &u, cutoff).unwrap();
        let dev = sup(&closed.sub(&series).unwrap());
        let x: f64 = a * a;
        let plain = (1..=cutoff + 1).fold(1.0, |acc, k| acc * x / k as f64) * a;
        assert!(dev >= plain * (1.0 - 1e-12));
        assert!(dev <= exponential_tail_bound(C64::new(1.0, 0.0), 1.0, cutoff, a));
    }
}

#[test]
fn scalar_lipschitz_supremum() {
    for m in 1..=5u32 {
        let c = scalar_lipschitz_ratio(m, 21);
        let half = (m as f64 + 1.0) / 2.0;
        assert!(c <= half + 1e-12, "m={m}: {c}");
        assert!(c >= 0.95 * half, "m={m}: {c}");
    }
}

#[test]
fn witness_vanishes_for_equal_arguments() {
    let g = grid();
    let p = Partition::build(PartitionSpec { kind: PartitionKind::PiecewiseSmoothBump, k_max: 3 }, g).unwrap();
    let f = smooth_field(g, &[(0.2, 0.1), (-0.1, 0.3)], 3);
    let u = Trajectory::stationary(f, uniform_times(0.0, 1.0, 8)).unwrap();
    let e = LipschitzExponents {
        s: 0.0,
        q: Exponent::Finite(1.0),
        r_tilde: Exponent::Finite(1.0),
        p_tilde: Exponent::Finite(2.0),
        l: 2,
        m: 3,
    };
    let pattern: Pattern = "u,conj,u,u".parse().unwrap();
    let (lhs, rhs) = power_lipschitz_witness(&p, &pattern, &u, &u, &e).unwrap();
    assert_eq!(lhs, 0.0);
    assert_eq!(rhs, 0.0);
    assert!(power_lipschitz_witness(&p, &Pattern::gauge(1), &u, &u, &e).is_err());
}

#[test]
fn band_limited_products_do_not_alias() {
    let g = grid();
    let u = smooth_field(g, &[(0.3, 0.0), (0.1, -0.2)], 4);
    // degree-3 products of band 1 stay well inside the Nyquist band of 8
    assert!(aliasing_residual(&NonlinSpec::gauge_power(1, -1.0), &u).unwrap() < 1e-12);
    let wide = smooth_field(g, &[(0.3, 0.0), (0.1, -0.2)], 30);
    assert!(aliasing_residual(&NonlinSpec::gauge_power(1, -1.0), &wide).unwrap() > 1e-6);
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 1..9)
}

fn pattern() -> impl Strategy<Value = Pattern> {
    prop::collection::vec(any::<bool>(), 1..6).prop_map(|bits| {
        let s: Vec<&str> = bits.iter().map(|&b| if b { "u" } else { "conj" }).collect();
        s.join(",").parse().unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homogeneous_of_degree_m_plus_one(c in coeffs(), pat in pattern(), lambda in 0.1..3.0f64) {
        let g = grid();
        let u = smooth_field(g, &c, 3);
        let spec = NonlinSpec::Power { pattern: pat.clone(), coeff: C64::new(0.7, -0.2) };
        let scaled = apply_power(&spec, &u.scale(C64::new(lambda, 0.0))).unwrap();
        let want = apply_power(&spec, &u).unwrap().scale(C64::new(lambda.powi(pat.degree() as i32 + 1), 0.0));
        let err = sup(&scaled.sub(&want).unwrap());
        prop_assert!(err <= 1e-12 * sup(&want).max(1e-300) + 1e-300);
    }

    #[test]
    fn gauge_covariance(c in coeffs(), pat in pattern(), theta in -3.2..3.2f64) {
        let g = grid();
        let u = smooth_field(g, &c, 3);
        let spec = NonlinSpec::Power { pattern: pat.clone(), coeff: C64::new(-1.0, 0.0) };
        let rotated = apply_power(&spec, &u.scale(C64::from_polar(1.0, theta))).unwrap();
        let charge = pat.plain_count() as f64 - pat.conjugate_count() as f64;
        let want = apply_power(&spec, &u).unwrap().scale(C64::from_polar(1.0, charge * theta));
        prop_assert!(sup(&rotated.sub(&want).unwrap()) <= 1e-12 * sup(&want).max(1e-300) + 1e-300);
    }

    #[test]
    fn gauge_powers_preserve_modulus_phase(c in coeffs(), k in 1usize..4) {
        // |u|^{2k}u is parallel to u pointwise
        let g = grid();
        let u = smooth_field(g, &c, 3);
        let f = apply_power(&NonlinSpec::gauge_power(k, 1.0), &u).unwrap();
        for (a, b) in u.values().iter().zip(f.values()) {
            let cross = (a.conj() * b).im;
            prop_assert!(cross.abs() <= 1e-12 * (a.norm() * b.norm()).max(1e-300));
        }
    }

    #[test]
    fn exponential_matches_series_at_high_cutoff(c in coeffs(), re in -2.0..2.0f64, im in -2.0..2.0f64, rho in 0.1..2.0f64) {
        let g = grid();
        let u = smooth_field(g, &c, 2);
        let lambda = C64::new(re, im);
        let spec = NonlinSpec::exponential(lambda, rho, 40).unwrap();
        let s = sup(&u);
        prop_assume!(rho * s * s < 4.0);
        let closed = apply_exponential(&spec, &u).unwrap();
        let series = exponential_series(&spec, &u, 40).unwrap();
        prop_assert!(sup(&closed.sub(&series).unwrap()) <= exponential_tail_bound(lambda, rho, 40, s));
    }
}
