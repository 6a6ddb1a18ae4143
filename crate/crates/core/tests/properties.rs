use proptest::prelude::*;
use spectral_lab::cocycle::{lyapunov, product_over};
use spectral_lab::dynamics::{RotationSystem, System};
use spectral_lab::measures::{cinf_dist, mollify, DensityCurve, EnergyGrid};
use spectral_lab::operator::{
    empirical_dos, potential_window, EmpiricalMeasure, TridiagonalMatrix,
};
use spectral_lab::sampler::{BaseSampler, Sampler, Shifted};

fn curve(values: Vec<Vec<f64>>) -> DensityCurve {
    let grid = EnergyGrid::linspace(0.0, 1.0, values[0].len()).unwrap();
    DensityCurve::new(grid, values).unwrap()
}

fn curves(n: usize) -> impl Strategy<Value = DensityCurve> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), 4).prop_map(curve)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cinf_dist_is_a_metric(f in curves(16), g in curves(16), h in curves(16)) {
        let d = |a: &DensityCurve, b: &DensityCurve| cinf_dist(a, b, 3).unwrap();
        prop_assert_eq!(d(&f, &f), 0.0);
        prop_assert_eq!(d(&f, &g), d(&g, &f));
        prop_assert!(d(&f, &h) <= d(&f, &g) + d(&g, &h) + 1e-15);
        prop_assert!(d(&f, &g) <= 2.0 - 0.125 + 1e-15);
    }

    #[test]
    fn eig_count_is_monotone_and_matches_spectrum(
        diag in prop::collection::vec(-4.0f64..4.0, 1..40),
        probes in prop::collection::vec(-7.0f64..7.0, 20),
    ) {
        let m = TridiagonalMatrix::new(diag).unwrap();
        let eig = m.eigenvalues();
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        let counts: Vec<usize> = probes.iter().map(|e| m.eig_count(*e)).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        for (e, c) in probes.iter().zip(&counts) {
            let below = eig.iter().filter(|x| **x < *e - 1e-9).count();
            let at_most = eig.iter().filter(|x| **x <= *e + 1e-9).count();
            prop_assert!(below <= *c && *c <= at_most);
        }
        let (lo, hi) = m.gershgorin();
        prop_assert_eq!(m.eig_count(lo - 1e-9), 0);
        prop_assert_eq!(m.eig_count(hi + 1e-9), m.dim());
    }

    #[test]
    fn spectrum_stays_in_the_support_bound(amp in 0.0f64..6.0, phase in 0.0f64..1.0, seed in 0u64..1000) {
        let v = BaseSampler::Cosine { amplitude: amp, phase };
        let sys = System::Rotation(RotationSystem::golden());
        let nu = empirical_dos(&v, &sys, 64, 3, seed).unwrap();
        let m = 2.0 + v.sup_bound();
        prop_assert!(nu.min_atom() >= -m && nu.max_atom() <= m);
    }

    #[test]
    fn rescaled_products_stay_unimodular(
        pot in prop::collection::vec(-5.0f64..5.0, 1..3000),
        e in -6.0f64..6.0,
    ) {
        let p = product_over(&pot, e);
        prop_assert!(p.det_defect() <= pot.len() as f64 * 1e-14);
    }

    #[test]
    fn wasserstein_is_symmetric_and_translation_exact(
        a in prop::collection::vec(-3.0f64..3.0, 1..30),
        b in prop::collection::vec(-3.0f64..3.0, 1..30),
        c in -1.0f64..1.0,
    ) {
        let x = EmpiricalMeasure::uniform(a).unwrap();
        let y = EmpiricalMeasure::uniform(b).unwrap();
        prop_assert!((x.wasserstein1(&y) - y.wasserstein1(&x)).abs() < 1e-12);
        prop_assert!((x.wasserstein1(&x.translate(c)) - c.abs()).abs() < 1e-12);
    }
}

#[test]
fn dos_and_lyapunov_are_translation_covariant() {
    let sys = System::Rotation(RotationSystem::golden());
    let v = BaseSampler::cosine(2.0);
    let c = 0.75;
    let shifted = Shifted {
        inner: v.clone(),
        by: c,
    };
    let nu = empirical_dos(&v, &sys, 300, 4, 9).unwrap();
    let mu = empirical_dos(&shifted, &sys, 300, 4, 9).unwrap();
    for (a, b) in nu.atoms().iter().zip(mu.atoms()) {
        assert!((a + c - b).abs() < 1e-12);
    }
    for e in [-1.3, 0.2, 2.9] {
        let l = lyapunov(&v, &sys, e, 2000, 4, 5).unwrap().value;
        let m = lyapunov(&shifted, &sys, e + c, 2000, 4, 5).unwrap().value;
        assert!((l - m).abs() < 1e-12, "{l} {m}");
    }
}

#[test]
fn windows_follow_the_orbit() {
    let r = RotationSystem::golden();
    let sys = System::Rotation(r.clone());
    let v = BaseSampler::cosine(1.0);
    let w = potential_window(&v, &sys, spectral_lab::dynamics::Point::Circle(0.3), 50).unwrap();
    for (j, x) in w.iter().enumerate() {
        assert_eq!(*x, v.eval(r.point_at(0.3, j as u64)));
    }
}

#[test]
fn mollified_dos_keeps_unit_mass() {
    let sys = System::Rotation(RotationSystem::golden());
    let nu = empirical_dos(&BaseSampler::cosine(3.0), &sys, 500, 10, 4).unwrap();
    let grid = EnergyGrid::linspace(-5.5, 5.5, 22_001).unwrap();
    for eps in [0.05, 0.2] {
        let f = mollify(&nu, eps, &grid, 0).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-8, "{}", f.mass());
    }
}
